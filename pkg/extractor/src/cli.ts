#!/usr/bin/env node
/**
 * extract --images DIR --labels CSV --out FILE [--layer pool3|pool4]
 *         [--size 84|224] [--seed N]
 *
 * Validate the result with the Python toolkit:
 *   python3 -m vcfewshot validate FILE
 */

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { PoolLayer, traceReceptiveField } from './backbone'
import { extractToFile } from './extract'

async function main() {
  const args = await yargs(hideBin(process.argv))
    .command('extract', 'run the backbone over an image folder')
    .demandCommand(1)
    .option('images', { type: 'string', demandOption: true, describe: 'image directory (PNG)' })
    .option('labels', { type: 'string', demandOption: true, describe: 'CSV: filename,category' })
    .option('out', { type: 'string', demandOption: true, describe: 'output VCFS path' })
    .option('layer', { choices: ['pool3', 'pool4'] as const, default: 'pool3' as PoolLayer })
    .option('size', { choices: [84, 224] as const, default: 84 as 84 | 224 })
    .option('seed', { type: 'number', default: 0 })
    .strict()
    .parse()

  const result = await extractToFile({
    imagesDir: args.images,
    labelsCsv: args.labels,
    outPath: args.out,
    layer: args.layer as PoolLayer,
    inputSize: args.size as 84 | 224,
    seed: args.seed,
  })
  const rf = traceReceptiveField(args.layer === 'pool3' ? 3 : 4)
  console.log(`wrote ${result.store.grids.length} grids to ${args.out}`)
  console.log(`lattice ${result.latticeSize}x${result.latticeSize}, ` +
              `stride ${rf.stride}, receptive field ${rf.size}x${rf.size}`)
  if (result.skipped.length > 0) {
    console.log(`skipped ${result.skipped.length} files ` +
                `(manifest: ${args.out}.skipped.json)`)
  }
}

main().catch(err => {
  console.error(err instanceof Error ? err.message : err)
  process.exit(1)
})
