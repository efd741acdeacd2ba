/**
 * Small deterministic PRNG (mulberry32) plus a Box-Muller gaussian, so toy
 * backbone weights are identical across runs and platforms for a seed.
 */

export function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

export function gaussianFiller(seed: number): (n: number) => Float32Array {
  const uniform = mulberry32(seed)
  return (n: number) => {
    const out = new Float32Array(n)
    for (let i = 0; i < n; i += 2) {
      const u = Math.max(uniform(), 1e-12)
      const v = uniform()
      const radius = Math.sqrt(-2 * Math.log(u))
      out[i] = radius * Math.cos(2 * Math.PI * v)
      if (i + 1 < n) out[i + 1] = radius * Math.sin(2 * Math.PI * v)
    }
    return out
  }
}
