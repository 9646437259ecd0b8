"""Learning factor functions for biases with no closed-form split.

Great-circle distance on a sphere and inverse-square "gravity" weights
have no finite exact factorization, but two small tanh networks mapping
coordinates to R factor channels approximate them well. Training minimizes
the mean squared entry error of the factor product against the dense
target, full batch, with Adam.

Runs a short fit by default; pass --full for the 10000-iteration setting
(about a minute on a laptop core).
"""

import sys

import numpy as np

from flashbias import (GravityBias, Rng, SphericalDistanceBias, frobenius,
                       generate_bias, neural_decompose, reconstruction_report)

iters = 10000 if "--full" in sys.argv else 1500

rng = Rng(2024)
npts = 64

print(f"== spherical distance, {npts} points, rank 32, {iters} iterations ==")
lat = rng.uniform(npts) * np.pi - np.pi / 2
lon = rng.uniform(npts) * 2 * np.pi - np.pi
coords = np.stack([lat, lon], axis=1)
target = generate_bias(SphericalDistanceBias(coords))
fb, nets, losses = neural_decompose(coords, coords, target, rank=32,
                                    hidden=256, iters=iters, lr=1e-3, seed=7)
rep = reconstruction_report(fb, target)
print(f"loss: {losses[0]:.4f} -> {losses[-1]:.6f} "
      f"({losses[0] / losses[-1]:.0f}x smaller)")
print(f"reconstruction: max abs {rep.max_abs_err:.4f}, "
      f"relative Frobenius {rep.rel_fro_err:.4f}")

print(f"\n== gravity weights, {npts} points, rank 32 (the stress case) ==")
# jittered grid keeps pairs separated; purely random clouds produce
# near-coincident pairs and a bias spanning five decades
grid = np.stack(np.meshgrid(np.arange(8), np.arange(8)), -1).reshape(-1, 2)
pos = (grid + 0.2 + 0.6 * rng.uniform(npts, 2)) / 8.0
target = generate_bias(GravityBias(pos))          # 1/d^2, diagonal damped
scale = frobenius(target)
fb, nets, losses = neural_decompose(pos, pos, target / scale, rank=32,
                                    hidden=256, iters=iters, lr=1e-3, seed=7)
print(f"loss: {losses[0]:.6f} -> {losses[-1]:.8f} "
      f"({losses[0] / losses[-1]:.0f}x smaller)")
recon = fb.dense() * scale
off = ~np.eye(npts, dtype=bool)
off_rel = (np.linalg.norm((recon - target)[off])
           / np.linalg.norm(target[off]))
print(f"off-diagonal relative error: {off_rel:.2f}")
print("inverse-square spikes resist a smooth low-rank fit: the loss keeps "
      "falling\nbut the reconstruction stays coarse, unlike the clean "
      "spherical case above")
