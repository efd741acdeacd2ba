/**
 * Toy VGG-shaped backbone: stages of two 3x3 same-padded convolutions with
 * ReLU, each followed by a 2x2 max-pool. The receptive-field geometry of
 * the pooling outputs is traced layer by layer, so the VCFS metadata is
 * derived from the architecture instead of hard-coded. With three stages
 * (pool3) an 84x84 input yields a 10x10 lattice of stride 8 and a 36x36
 * receptive field centered at offset 3.5 (stored rounded).
 *
 * Weights are seeded He-initialized gaussians from the local PRNG; the
 * backbone is a fixture for format/e2e testing, not a trained model.
 */

import * as tf from '@tensorflow/tfjs'
import { gaussianFiller } from './rng'

export type PoolLayer = 'pool3' | 'pool4'

export interface ReceptiveField {
  /** input pixels per lattice step */
  stride: number
  /** side of the receptive field, input pixels */
  size: number
  /** exact center of lattice cell (0, 0) in input pixels */
  center: number
  /** center rounded to the integer stored in VCFS */
  offset: number
}

export interface Backbone {
  layer: PoolLayer
  stageFilters: number[]
  seed: number
  kernels: tf.Tensor4D[][]
  rf: ReceptiveField
  channelsOut: number
  dispose(): void
}

const STAGE_COUNT: Record<PoolLayer, number> = { pool3: 3, pool4: 4 }
export const DEFAULT_STAGE_FILTERS = [8, 16, 32, 64]

export function traceReceptiveField(stages: number): ReceptiveField {
  let stride = 1
  let size = 1
  let center = 0
  for (let s = 0; s < stages; s++) {
    for (let conv = 0; conv < 2; conv++) {
      size += 2 * stride // 3x3 same-padded conv grows the field only
    }
    size += stride // 2x2 pool
    center += 0.5 * stride
    stride *= 2
  }
  return { stride, size, center, offset: Math.round(center) }
}

export function buildBackbone(
  layer: PoolLayer,
  seed = 0,
  stageFilters: number[] = DEFAULT_STAGE_FILTERS,
): Backbone {
  const stages = STAGE_COUNT[layer]
  if (stageFilters.length < stages) {
    throw new Error(`need ${stages} stage widths, got ${stageFilters.length}`)
  }
  const fill = gaussianFiller(seed)
  const kernels: tf.Tensor4D[][] = []
  let channelsIn = 3
  for (let s = 0; s < stages; s++) {
    const filters = stageFilters[s]
    const stageKernels: tf.Tensor4D[] = []
    for (let conv = 0; conv < 2; conv++) {
      const fanIn = 3 * 3 * channelsIn
      const scale = Math.sqrt(2 / fanIn)
      const raw = fill(3 * 3 * channelsIn * filters)
      for (let i = 0; i < raw.length; i++) raw[i] *= scale
      stageKernels.push(tf.tensor4d(raw, [3, 3, channelsIn, filters]))
      channelsIn = filters
    }
    kernels.push(stageKernels)
  }
  return {
    layer,
    stageFilters: stageFilters.slice(0, stages),
    seed,
    kernels,
    rf: traceReceptiveField(stages),
    channelsOut: channelsIn,
    dispose() {
      for (const stage of kernels) for (const k of stage) k.dispose()
    },
  }
}

/** Forward pass: [h, w, 3] float input in [0, 1] -> [H, W, C] features. */
export function forward(backbone: Backbone, image: tf.Tensor3D): tf.Tensor3D {
  return tf.tidy(() => {
    let x = image.expandDims(0) as tf.Tensor4D
    for (const stage of backbone.kernels) {
      for (const kernel of stage) {
        x = tf.relu(tf.conv2d(x, kernel, 1, 'same'))
      }
      x = tf.maxPool(x, 2, 2, 'valid')
    }
    return x.squeeze([0]) as tf.Tensor3D
  })
}
