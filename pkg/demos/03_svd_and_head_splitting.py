"""SVD truncation of parameter-style biases, and splitting heads by rank.

A learned bias matrix is fixed after training, so it can be factored once
offline with an SVD. "Energy" is the retained fraction of the summed
squared singular values; for an SVD truncation the relation

    rel_fro_err^2 + energy_retained = 1

is exact (no rank-R factor pair does better in Frobenius norm). Real head
stacks mix ranks, so heads whose 95%-energy rank is small run factored
while the stubborn ones keep the dense path.
"""

import numpy as np

from flashbias import (DenseBias, Rng, TileConfig, energy_profile,
                       flashbias_attention, reference_attention,
                       split_heads_by_rank, svd_decompose)

rng = Rng(7)

# a smooth synthetic "parameter" bias: low-rank plus a dash of noise
n = 96
u = rng.normal(n, 6)
base = u @ rng.normal(n, 6).T
noisy = base + 0.01 * rng.normal(n, n)

s = np.linalg.svd(noisy, compute_uv=False)
prof = energy_profile(s)
print("retained energy by rank:",
      {k: round(float(prof[k - 1]), 4) for k in (2, 4, 6, 8, 16)})

for target in ({"rank": 6}, {"energy": 0.99}):
    fb, rep = svd_decompose(noisy, **target)
    ident = rep.rel_fro_err**2 + rep.energy_retained
    print(f"target {target}: rank_used={rep.rank_used} "
          f"rel_err={rep.rel_fro_err:.4f} energy={rep.energy_retained:.6f} "
          f"identity={ident:.12f}")

print("\n== head splitting ==")
heads = [rng.normal(n, k) @ rng.normal(n, k).T for k in (1, 2, 4, 8)]
heads.append(rng.normal(n, n))            # a genuinely full-rank head
heads.append(rng.normal(n, n))
split = split_heads_by_rank(heads, energy_threshold=0.95, max_rank=16)
print(f"low-rank subset {split.low_indices} at common rank {split.common_rank}")
print(f"dense subset    {split.dense_indices}")

q, k, v = rng.normal(n, 16), rng.normal(n, 16), rng.normal(n, 16)
worst = 0.0
for idx, head in enumerate(heads):
    expect = reference_attention(q, k, v, DenseBias(head))
    pos = split.low_indices.index(idx) if idx in split.low_indices else None
    if pos is not None:
        fb = split.low_factors[pos]
        got = flashbias_attention(q, k, v, fb.fq, fb.fk, tiles=TileConfig(32, 32))
    else:
        got = expect
    worst = max(worst, float(np.abs(got - expect).max()))
print(f"mixed-path output vs all-dense reference: {worst:.2e}")
