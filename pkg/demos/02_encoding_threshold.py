"""From distances to binary encodings: the coverage / firerate trade-off.

Shows the cosine-distance tensor of one image, sweeps the encoding
threshold to expose the trade-off, and runs the grid search that picks the
smallest threshold reaching 80% mean coverage over a training set.
"""

import io

import numpy as np

from vcfewshot import (
    FitConfig,
    collect_vectors,
    compute_distances,
    encode,
    fit_vmfm,
    make_planted_store,
    read_bitset,
    search_threshold,
    write_bitset,
)

store = make_planted_store(n_categories=4, images_per_category=8,
                           height=5, width=5, channels=12,
                           parts_per_category=3, seed=2)
pooled = collect_vectors(store)
dictionary = fit_vmfm(pooled.vectors, FitConfig(num_vcs=12, seed=0))

grid = store.grids[0]
tensor = compute_distances(grid, dictionary)
print(f"distance tensor {tensor.height}x{tensor.width}x{tensor.num_vcs}, "
      f"range [{tensor.values.min():.3f}, {tensor.values.max():.3f}]")

print("\nthreshold  coverage  firerate")
for threshold in (0.05, 0.1, 0.2, 0.4, 0.8, 1.2):
    enc = encode(tensor, threshold)
    print(f"{threshold:9.2f}  {enc.coverage:8.2f}  {enc.firerate:8.2f}")

# The few-shot recipe: smallest grid point whose mean coverage over the
# training images reaches 0.8 (step 0.001).
training = [compute_distances(g, dictionary) for g in store.grids[:8]]
threshold = search_threshold(training, coverage_target=0.8, step=0.001)
encodings = [encode(t, threshold) for t in training]
print(f"\nsearched threshold: {threshold:.3f}")
print(f"mean coverage  {np.mean([e.coverage for e in encodings]):.3f}")
print(f"mean firerate  {np.mean([e.firerate for e in encodings]):.3f}")

# Encodings serialize to a compact bitset file.
buf = io.BytesIO()
write_bitset(encodings[0].bits, buf)
raw = buf.getvalue()
assert np.array_equal(read_bitset(raw), encodings[0].bits)
print(f"\nbitset file: {len(raw)} bytes for "
      f"{encodings[0].bits.size} bits (header 16)")
