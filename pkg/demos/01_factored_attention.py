"""Attention with a bias that is never materialized.

A dense N x M bias added to the attention logits can be replaced by two
factors fq (N x R) and fk (M x R) with fq @ fk.T equal to the bias. The
trick: widen the inputs to [q | sqrt(C)*fq] and [k | fk] and keep dividing
logits by sqrt(C) of the original channel count. The extra channels then
contribute exactly fq @ fk.T, and the streaming softmax kernel never sees
an N x M matrix.

This script shows the equivalence numerically, for every mask and tiling.
"""

import numpy as np

from flashbias import (DenseBias, Rng, TileConfig, flashbias_attention,
                       reference_attention, tiled_attention)

rng = Rng(0)
n, m, c, r = 96, 80, 32, 6

q, k, v = rng.normal(n, c), rng.normal(m, c), rng.normal(m, c)
fq, fk = rng.normal(n, r), rng.normal(m, r)
dense = DenseBias(fq @ fk.T)

print("reference path (full logit matrix, dense bias) ...")
expect = reference_attention(q, k, v, dense)

print("streaming path (tiled online softmax, dense bias read per tile) ...")
tiled = tiled_attention(q, k, v, dense, tiles=TileConfig(24, 16))
print(f"  tiled vs reference:     {np.abs(tiled - expect).max():.2e}")

print("factored path (bias folded into widened channels) ...")
fact = flashbias_attention(q, k, v, fq, fk, tiles=TileConfig(24, 16))
print(f"  factored vs reference:  {np.abs(fact - expect).max():.2e}")

print("\nthe tiling never changes the answer:")
for bq, bkv in [(1, 1), (7, 13), (96, 80)]:
    out = flashbias_attention(q, k, v, fq, fk, tiles=TileConfig(bq, bkv))
    print(f"  tiles ({bq:>2} x {bkv:>2}): diff {np.abs(out - expect).max():.2e}")

print("\ncausal masking composes with the factored bias:")
n = m = 64
q, k, v = rng.normal(n, c), rng.normal(n, c), rng.normal(n, c)
fq, fk = rng.normal(n, r), rng.normal(n, r)
expect = reference_attention(q, k, v, DenseBias(fq @ fk.T), mask="causal")
fact = flashbias_attention(q, k, v, fq, fk, mask="causal",
                           tiles=TileConfig(16, 16))
print(f"  causal factored vs causal reference: {np.abs(fact - expect).max():.2e}")

print("\nstorage for the bias term:")
print(f"  dense:    {n * m} elements")
print(f"  factored: {(n + m) * r} elements  ({n * m / ((n + m) * r):.1f}x smaller)")
