/**
 * VCFS writer: the binary feature-store container consumed by the Python
 * toolkit. All integers little-endian:
 *
 *   "VCFS" | version u16 (=1) | layerName (u16 len + UTF-8)
 *   | category count u32, per category: id u32, name (u16 len + UTF-8)
 *   | grid count u32, per grid:
 *       imageId (u16 len + UTF-8), categoryId u32, H u32, W u32, C u32,
 *       rfOffset i32, rfStride u32, rfSize u32, H*W*C float32
 *       (position-major, channels contiguous).
 */

import { writeFileSync, renameSync } from 'fs'

export interface GridRecord {
  imageId: string
  categoryId: number
  height: number
  width: number
  channels: number
  rfOffset: number
  rfStride: number
  rfSize: number
  /** length = height * width * channels, position-major */
  data: Float32Array
}

export interface StoreRecord {
  layerName: string
  /** categoryId -> name */
  categories: Map<number, string>
  grids: GridRecord[]
}

function utf16Len(text: string): Buffer {
  const raw = Buffer.from(text, 'utf-8')
  if (raw.length > 0xffff) throw new Error(`string too long: ${text.slice(0, 32)}...`)
  const out = Buffer.alloc(2 + raw.length)
  out.writeUInt16LE(raw.length, 0)
  raw.copy(out, 2)
  return out
}

function u32(value: number): Buffer {
  const out = Buffer.alloc(4)
  out.writeUInt32LE(value, 0)
  return out
}

function i32(value: number): Buffer {
  const out = Buffer.alloc(4)
  out.writeInt32LE(value, 0)
  return out
}

export function encodeStore(store: StoreRecord): Buffer {
  const parts: Buffer[] = []
  parts.push(Buffer.from('VCFS', 'ascii'))
  const version = Buffer.alloc(2)
  version.writeUInt16LE(1, 0)
  parts.push(version)
  parts.push(utf16Len(store.layerName))

  const categoryIds = [...store.categories.keys()].sort((a, b) => a - b)
  parts.push(u32(categoryIds.length))
  for (const id of categoryIds) {
    parts.push(u32(id))
    parts.push(utf16Len(store.categories.get(id)!))
  }

  parts.push(u32(store.grids.length))
  for (const grid of store.grids) {
    const expected = grid.height * grid.width * grid.channels
    if (grid.data.length !== expected) {
      throw new Error(
        `grid ${grid.imageId}: data length ${grid.data.length} != ${expected}`,
      )
    }
    parts.push(utf16Len(grid.imageId))
    parts.push(u32(grid.categoryId))
    parts.push(u32(grid.height))
    parts.push(u32(grid.width))
    parts.push(u32(grid.channels))
    parts.push(i32(grid.rfOffset))
    parts.push(u32(grid.rfStride))
    parts.push(u32(grid.rfSize))
    const payload = Buffer.alloc(4 * grid.data.length)
    for (let i = 0; i < grid.data.length; i++) {
      payload.writeFloatLE(grid.data[i], 4 * i)
    }
    parts.push(payload)
  }
  return Buffer.concat(parts)
}

/** Write atomically: temp file in the same directory, then rename. */
export function writeStoreFile(store: StoreRecord, path: string): void {
  const temp = `${path}.tmp-${process.pid}`
  writeFileSync(temp, encodeStore(store))
  renameSync(temp, path)
}
