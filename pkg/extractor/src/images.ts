/**
 * Image and label loading: PNG decode, bilinear resize to the network
 * input size, and the two-column label CSV (image filename, category name).
 */

import * as tf from '@tensorflow/tfjs'
import { readFileSync } from 'fs'
import Papa from 'papaparse'
import { PNG } from 'pngjs'

export function decodePng(path: string): tf.Tensor3D {
  const png = PNG.sync.read(readFileSync(path))
  const pixels = new Float32Array(png.width * png.height * 3)
  for (let i = 0; i < png.width * png.height; i++) {
    pixels[3 * i] = png.data[4 * i] / 255
    pixels[3 * i + 1] = png.data[4 * i + 1] / 255
    pixels[3 * i + 2] = png.data[4 * i + 2] / 255
  }
  return tf.tensor3d(pixels, [png.height, png.width, 3])
}

export function loadAndResize(path: string, size: number): tf.Tensor3D {
  const raw = decodePng(path)
  if (raw.shape[0] === size && raw.shape[1] === size) return raw
  const resized = tf.tidy(() => tf.image.resizeBilinear(raw, [size, size]))
  raw.dispose()
  return resized as tf.Tensor3D
}

export interface LabelTable {
  /** filename -> category name */
  byFile: Map<string, string>
  /** category name -> stable id (sorted names, ids 0..n-1) */
  idByName: Map<string, number>
}

export function readLabels(csvPath: string): LabelTable {
  const parsed = Papa.parse<string[]>(readFileSync(csvPath, 'utf-8').trim(), {
    skipEmptyLines: true,
  })
  if (parsed.errors.length > 0) {
    throw new Error(`label CSV parse error: ${parsed.errors[0].message}`)
  }
  const byFile = new Map<string, string>()
  for (const row of parsed.data) {
    if (row.length < 2) throw new Error(`label row needs 2 columns: ${row}`)
    byFile.set(row[0].trim(), row[1].trim())
  }
  const names = [...new Set(byFile.values())].sort()
  const idByName = new Map(names.map((name, i) => [name, i]))
  return { byFile, idByName }
}
