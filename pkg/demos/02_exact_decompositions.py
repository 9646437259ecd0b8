"""Closed-form factorizations: some popular biases are exactly low rank.

Linear positional bias slope*(i - j) is rank 2: [1, i] against [-j, 1].
Squared 3-D distance is rank 9: each coordinate splits its square into
three channel pairs. Both reconstruct the dense bias to the last bit (the
positional case) or to rounding error (the distance case), so the factored
attention path is exact, not an approximation.
"""

import numpy as np

from flashbias import (AlibiBias, DenseBias, Rng, SpatialDistanceBias,
                       TileConfig, decompose_alibi, decompose_spatial,
                       flashbias_attention, frobenius, generate_bias,
                       reference_attention)

print("== linear positional bias (rank 2) ==")
n = 256
fb = decompose_alibi(n, n)
dense = generate_bias(AlibiBias(n, n))
print(f"factor shapes: fq {fb.fq.shape}, fk {fb.fk.shape}")
print(f"reconstruction max abs error: {np.abs(fb.dense() - dense).max()}")

rng = Rng(1)
q, k, v = rng.normal(n, 16), rng.normal(n, 16), rng.normal(n, 16)
expect = reference_attention(q, k, v, DenseBias(dense), mask="causal")
got = flashbias_attention(q, k, v, fb.fq, fb.fk, mask="causal",
                          tiles=TileConfig(64, 64))
print(f"causal attention, factored vs dense: {np.abs(got - expect).max():.2e}")

print("\n== squared spatial distance (rank 9) ==")
pts = rng.uniform(128, 3) * 20.0 - 10.0        # a point cloud in a box
weights = rng.uniform(128) * 1.5 + 0.5         # per-query row weights
dense = generate_bias(SpatialDistanceBias(pts, pts, weights))
fb = decompose_spatial(pts, pts, weights)
rel = frobenius(fb.dense() - dense) / frobenius(dense)
print(f"factor shapes: fq {fb.fq.shape}, fk {fb.fk.shape}")
print(f"weighted reconstruction relative error: {rel:.2e}")

q, k, v = rng.normal(128, 8), rng.normal(128, 8), rng.normal(128, 8)
expect = reference_attention(q, k, v, DenseBias(dense))
got = flashbias_attention(q, k, v, fb.fq, fb.fk, tiles=TileConfig(32, 32))
print(f"attention, factored vs dense: {np.abs(got - expect).max():.2e}")

print("\nbias storage, 128 points: dense", 128 * 128, "elements,",
      "factored", (128 + 128) * 9, "elements")
