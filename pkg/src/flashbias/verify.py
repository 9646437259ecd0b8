"""Self-check suite behind the ``verify`` subcommand.

Each property runs on seeded instances and reports the measured error next
to its threshold, so a failure is diagnosable from the JSON report alone.
``perturb_bias`` injects a deliberate fault into the factored path to
demonstrate the equivalence check actually bites.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import List

import numpy as np

from .attention import MASK_CAUSAL, MASK_NONE, TileConfig, flashbias_attention, reference_attention, tiled_attention
from .bias import DenseBias, random_low_rank_factors
from .core import frobenius
from .costmodel import (CostParams, count_flash, count_flashbias,
                        dense_over_factored_ratio, hbm_access_lower_bound)
from .decompose import decompose_alibi, decompose_spatial, svd_decompose
from .bias import AlibiBias, SpatialDistanceBias, generate_bias
from .fileio import read_dbm1, read_fbf1, write_dbm1, write_fbf1
from .neural import FactorNetworks, neural_decompose
from .rng import Rng


@dataclass
class PropertyResult:
    name: str
    passed: bool
    error: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "error": float(self.error),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


def _random_instance(rng: Rng, max_nm: int = 96):
    n = int(rng.integers(1, max_nm + 1)[0])
    causal = rng.uniform() < 0.5
    m = n if causal else int(rng.integers(1, max_nm + 1)[0])
    c = int(rng.integers(2, 33)[0])
    r = int(rng.integers(1, 17)[0])
    q = rng.normal(n, c)
    k = rng.normal(m, c)
    v = rng.normal(m, c)
    fq = rng.normal(n, r)
    fk = rng.normal(m, r)
    b_q = int(rng.integers(1, n + 1)[0])
    b_kv = int(rng.integers(1, m + 1)[0])
    mask = MASK_CAUSAL if causal else MASK_NONE
    return q, k, v, fq, fk, mask, TileConfig(b_q, b_kv)


def run_verification(seed: int = 0, instances: int = 20,
                     perturb_bias: float = 0.0) -> List[PropertyResult]:
    results: List[PropertyResult] = []
    rng = Rng(seed)

    # Factored path equals the dense-bias reference.
    worst = 0.0
    for _ in range(instances):
        q, k, v, fq, fk, mask, tiles = _random_instance(rng)
        expect = reference_attention(q, k, v, DenseBias(fq @ fk.T), mask)
        fq_run = fq + perturb_bias if perturb_bias else fq
        got = flashbias_attention(q, k, v, fq_run, fk, mask, tiles)
        worst = max(worst, float(np.abs(got - expect).max()))
    results.append(PropertyResult("factored_matches_reference", worst <= 1e-10,
                                  worst, 1e-10,
                                  f"{instances} seeded instances"))

    # Tiled dense-bias path equals the reference.
    worst = 0.0
    for _ in range(instances):
        q, k, v, fq, fk, mask, tiles = _random_instance(rng)
        dense = DenseBias(fq @ fk.T)
        expect = reference_attention(q, k, v, dense, mask)
        got = tiled_attention(q, k, v, dense, mask, tiles)
        worst = max(worst, float(np.abs(got - expect).max()))
    results.append(PropertyResult("tiled_matches_reference", worst <= 1e-11,
                                  worst, 1e-11))

    # Exact decomposers reconstruct their generators.
    fb = decompose_alibi(48, 48)
    err = float(np.abs(fb.dense() - generate_bias(AlibiBias(48, 48))).max())
    results.append(PropertyResult("alibi_exact_reconstruction", err == 0.0, err, 0.0))

    pts_q = rng.uniform(24, 3) * 200.0 - 100.0
    pts_k = rng.uniform(24, 3) * 200.0 - 100.0
    w = rng.uniform(24) * 1.5 + 0.5
    fb = decompose_spatial(pts_q, pts_k, w)
    target = generate_bias(SpatialDistanceBias(pts_q, pts_k, w))
    rel = frobenius(fb.dense() - target) / frobenius(target)
    results.append(PropertyResult("spatial_exact_reconstruction", rel <= 1e-9, rel, 1e-9))

    # SVD truncation: rank recovery and the energy identity.
    a = rng.normal(40, 6)
    bmat = a @ rng.normal(32, 6).T
    fb, rep = svd_decompose(bmat, rank=6)
    ident = abs(rep.rel_fro_err ** 2 + rep.energy_retained - 1.0)
    ok = rep.max_abs_err <= 1e-9 and ident <= 1e-10
    results.append(PropertyResult("svd_rank_and_energy_identity", ok,
                                  max(rep.max_abs_err, ident), 1e-9))

    # Backprop gradients match central finite differences.
    err = _gradient_check(seed)
    results.append(PropertyResult("neural_gradient_check", err <= 1e-5, err, 1e-5))

    # A zero target trains to a much smaller loss.
    xq = rng.uniform(8, 2)
    _, _, losses = neural_decompose(xq, xq, np.zeros((8, 8)), rank=3, hidden=16,
                                    iters=300, seed=seed)
    ratio = losses[-1] / losses[0] if losses[0] > 0 else 0.0
    results.append(PropertyResult("neural_zero_target_descent", ratio <= 1e-2,
                                  ratio, 1e-2))

    # Cost model identities.
    p = CostParams(n=4096, m=4096, c=64, r=0, sram_bytes=100 * 1024, dtype_bytes=2)
    delta = count_flash(p, dense_bias=True).total - count_flash(p, dense_bias=False).total
    ok = delta == p.n * p.m and count_flashbias(p).total == count_flash(p, False).total
    results.append(PropertyResult("cost_dense_delta_and_r0_reduction", ok,
                                  float(abs(delta - p.n * p.m)), 0.0))

    p = CostParams(n=16384, m=16384, c=64, r=64, sram_bytes=100 * 1024, dtype_bytes=2)
    ratio = dense_over_factored_ratio(p)
    results.append(PropertyResult("cost_dense_over_factored_band",
                                  4.8 <= ratio <= 7.2, ratio, 7.2,
                                  "expected near 6"))
    bound = hbm_access_lower_bound(p)
    ok = count_flashbias(p).total >= bound
    results.append(PropertyResult("cost_lower_bound_consistency", ok,
                                  count_flashbias(p).total / bound, 1.0,
                                  "total/bound must be >= 1"))

    # RNG reproducibility.
    same = np.array_equal(Rng(seed).uniform(10_000), Rng(seed).uniform(10_000))
    results.append(PropertyResult("rng_reproducibility", same,
                                  0.0 if same else 1.0, 0.0))

    # File formats round-trip.
    with tempfile.TemporaryDirectory() as tmp:
        mat = rng.normal(9, 5)
        dbm = os.path.join(tmp, "m.dbm")
        write_dbm1(dbm, mat)
        ok = np.array_equal(read_dbm1(dbm), mat)
        fbf = os.path.join(tmp, "f.fbf")
        fb = random_low_rank_factors(7, 5, 3, seed)
        write_fbf1(fbf, fb)
        back = read_fbf1(fbf)
        ok = ok and np.array_equal(back.fq, fb.fq) and np.array_equal(back.fk, fb.fk)
    results.append(PropertyResult("file_formats_round_trip", ok,
                                  0.0 if ok else 1.0, 0.0))

    return results


def _gradient_check(seed: int, step: float = 1e-5) -> float:
    """Worst relative error of backprop vs central differences on a small
    instance."""
    rng = Rng(seed + 7)
    xq = rng.uniform(4, 2)
    xk = rng.uniform(4, 2)
    target = rng.normal(4, 4)
    nets = FactorNetworks.init(Rng(seed + 8), 2, 5, 3)
    _, grads = nets.loss_and_grads(xq, xk, target)
    params = nets.params()
    worst = 0.0
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = nets.loss(xq, xk, target)
            flat[idx] = orig - step
            down = nets.loss(xq, xk, target)
            flat[idx] = orig
            fd = (up - down) / (2 * step)
            denom = max(abs(fd), abs(gflat[idx]), 1e-8)
            worst = max(worst, abs(fd - gflat[idx]) / denom)
    return worst
