"""The two few-shot models: fuzzy nearest neighbor and factorized likelihood.

Demonstrates the shift tolerance of the matching kernel, fits the
per-category Bernoulli maps, and exports a per-concept contribution trace
showing *where* the likelihood decision comes from.
"""

import io

import numpy as np

from vcfewshot import (
    NeighborhoodSpec,
    classify_lh,
    classify_nn,
    export_contributions_csv,
    fit_likelihood,
    log_likelihood,
    similarity,
)
from vcfewshot.encoding import VcEncoding, coverage_of, firerate_of


def enc_from_bits(bits):
    bits = np.asarray(bits, dtype=bool)
    return VcEncoding(bits=bits, threshold=0.5,
                      coverage=coverage_of(bits), firerate=firerate_of(bits))


# --- the kernel tolerates one-cell shifts -------------------------------
pattern = np.zeros((5, 5, 1), dtype=bool)
pattern[1, 1, 0] = pattern[2, 2, 0] = pattern[3, 1, 0] = True
shifted = np.roll(pattern, 1, axis=1)

a, b = enc_from_bits(pattern), enc_from_bits(shifted)
print("similarity of a pattern to its one-cell shift:")
for radius in (0, 1, 2):
    print(f"  radius {radius}: {similarity(a, b, NeighborhoodSpec(radius)):.3f}")

# --- nearest neighbor over a tiny support set ---------------------------
rng = np.random.default_rng(0)
noise = enc_from_bits(rng.random((5, 5, 1)) < 0.15)
support = [(a, 0), (noise, 1)]
print(f"\nnearest neighbor assigns the shifted pattern to category "
      f"{classify_nn(b, support, NeighborhoodSpec(1))}")

# --- factorized likelihood model ----------------------------------------
def category_encodings(offset, n=4):
    out = []
    for _ in range(n):
        bits = np.zeros((5, 5, 2), dtype=bool)
        jitter = rng.integers(-1, 2)
        bits[np.clip(2 + offset + jitter, 0, 4), :, offset % 2] = True
        out.append(enc_from_bits(bits))
    return out

support = [(e, 0) for e in category_encodings(0)] + \
          [(e, 1) for e in category_encodings(2)]
model = fit_likelihood(support, sigma=1.2)
print(f"\nlikelihood model: categories {model.categories.tolist()}, "
      f"theta in [{model.theta.min():.3f}, {model.theta.max():.3f}]")

query = category_encodings(2, n=1)[0]
scores = {int(c): log_likelihood(query, model.theta_for(int(c)))
          for c in model.categories}
print(f"query log-likelihoods: {scores}")
print(f"decision: category {classify_lh(query, model)}")

# --- Fig-style inference trace: per-bit evidence as CSV ------------------
buf = io.StringIO()
export_contributions_csv(query, model, buf)
lines = buf.getvalue().splitlines()
print(f"\ncontribution CSV: {len(lines) - 1} rows, e.g.")
for line in lines[:4]:
    print(f"  {line}")
