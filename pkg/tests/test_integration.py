"""End-to-end checks: decomposer factors driving the factored attention
path against the reference with the original dense target."""

import numpy as np

from flashbias import (DenseBias, Rng, TileConfig, decompose_spatial,
                       flashbias_attention, generate_bias,
                       neural_decompose, reconstruction_report,
                       reference_attention, svd_decompose)
from flashbias.bench import BenchConfig, run_bench
from flashbias.bias import SpatialDistanceBias, SphericalDistanceBias


def _attention_pair(rng, n, c, target, fq, fk):
    q, k = rng.normal(n, c), rng.normal(n, c)
    v = rng.uniform(n, c) * 2.0 - 1.0  # |v| <= 1 keeps the weight bound tight
    expect = reference_attention(q, k, v, DenseBias(target))
    got = flashbias_attention(q, k, v, fq, fk, tiles=TileConfig(16, 16))
    return float(np.abs(got - expect).max())


def test_exact_factors_end_to_end():
    rng = Rng(50)
    pts = rng.uniform(40, 3) * 10
    target = generate_bias(SpatialDistanceBias(pts, pts))
    fb = decompose_spatial(pts, pts)
    diff = _attention_pair(rng, 40, 8, target, fb.fq, fb.fk)
    assert diff <= 1e-10


def test_lossy_svd_factors_respect_error_bound():
    # row-stochastic weights are a convex combination, so a logit
    # perturbation of eps moves each output entry by at most ~2*eps
    # when |v| <= 1
    rng = Rng(55)
    ll = np.stack([rng.uniform(48) * np.pi - np.pi / 2,
                   rng.uniform(48) * 2 * np.pi - np.pi], axis=1)
    target = generate_bias(SphericalDistanceBias(ll))
    for k in (2, 4, 8):
        fb, rep = svd_decompose(target, rank=k)
        diff = _attention_pair(rng, 48, 8, target, fb.fq, fb.fk)
        assert diff <= 2 * rep.max_abs_err


def test_neural_factors_respect_error_bound():
    rng = Rng(56)
    ll = np.stack([rng.uniform(48) * np.pi - np.pi / 2,
                   rng.uniform(48) * 2 * np.pi - np.pi], axis=1)
    target = generate_bias(SphericalDistanceBias(ll))
    fb, _, _ = neural_decompose(ll, ll, target, rank=8, hidden=32, iters=400,
                                seed=3)
    rep = reconstruction_report(fb, target)
    diff = _attention_pair(rng, 48, 8, target, fb.fq, fb.fk)
    assert diff <= 2 * rep.max_abs_err


def test_bench_is_deterministic_for_fixed_seed():
    cfg = dict(ns=[48, 64], c=8, r=4, seed=5, runs=1, warmup=0)
    a = run_bench(BenchConfig(**cfg))
    b = run_bench(BenchConfig(**cfg))
    for ra, rb in zip(a, b):
        assert ra.scenario == rb.scenario
        assert ra.checksum == rb.checksum
        assert ra.peak_bias_bytes == rb.peak_bias_bytes
