/**
 * Extraction pipeline: image directory + label CSV -> one VCFS store with a
 * feature grid per readable labeled image. Unreadable or unlabeled images
 * are skipped and reported in a manifest, never fatal.
 */

import { readdirSync, writeFileSync } from 'fs'
import { join } from 'path'
import { PoolLayer, buildBackbone, forward } from './backbone'
import { loadAndResize, readLabels } from './images'
import { GridRecord, StoreRecord, writeStoreFile } from './vcfs'

export interface ExtractionConfig {
  imagesDir: string
  labelsCsv: string
  outPath: string
  layer: PoolLayer
  inputSize: 84 | 224
  seed?: number
  stageFilters?: number[]
}

export interface SkipEntry {
  file: string
  reason: string
}

export interface ExtractionResult {
  store: StoreRecord
  skipped: SkipEntry[]
  latticeSize: number
}

export async function extract(config: ExtractionConfig): Promise<ExtractionResult> {
  const labels = readLabels(config.labelsCsv)
  const backbone = buildBackbone(config.layer, config.seed ?? 0,
                                 config.stageFilters)
  const grids: GridRecord[] = []
  const skipped: SkipEntry[] = []
  let latticeSize = 0

  const files = readdirSync(config.imagesDir).sort()
  for (const file of files) {
    const categoryName = labels.byFile.get(file)
    if (categoryName === undefined) {
      skipped.push({ file, reason: 'not in label CSV' })
      continue
    }
    let features
    try {
      const image = loadAndResize(join(config.imagesDir, file), config.inputSize)
      features = forward(backbone, image)
      image.dispose()
    } catch (err) {
      skipped.push({ file, reason: `unreadable: ${(err as Error).message}` })
      continue
    }
    const [height, width, channels] = features.shape
    latticeSize = height
    const data = new Float32Array(await features.data())
    features.dispose()
    grids.push({
      imageId: file,
      categoryId: labels.idByName.get(categoryName)!,
      height,
      width,
      channels,
      rfOffset: backbone.rf.offset,
      rfStride: backbone.rf.stride,
      rfSize: backbone.rf.size,
      data,
    })
  }
  backbone.dispose()

  const categories = new Map<number, string>()
  for (const [name, id] of labels.idByName) categories.set(id, name)
  return {
    store: { layerName: config.layer, categories, grids },
    skipped,
    latticeSize,
  }
}

export async function extractToFile(config: ExtractionConfig): Promise<ExtractionResult> {
  const result = await extract(config)
  writeStoreFile(result.store, config.outPath)
  if (result.skipped.length > 0) {
    writeFileSync(`${config.outPath}.skipped.json`,
                  JSON.stringify(result.skipped, null, 2) + '\n')
  }
  return result
}
