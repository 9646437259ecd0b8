import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flashbias import (NO_BIAS, ConfigError, DenseBias, FactoredBias,
                       MaskError, Rng, TileConfig, attention_weights,
                       choose_tile_sizes, flashbias_attention,
                       reference_attention, tiled_attention)


def scalar_attention(q, k, v, b=None, causal=False):
    """Oracle: explicit loops over (i, j) with scalar exponentials."""
    n, c = q.shape
    m = k.shape[0]
    out = np.zeros((n, v.shape[1]))
    for i in range(n):
        logits = []
        for j in range(m):
            if causal and j > i:
                logits.append(None)
                continue
            s = sum(q[i, t] * k[j, t] for t in range(c)) / math.sqrt(c)
            if b is not None:
                s += b[i, j]
            logits.append(s)
        mx = max(s for s in logits if s is not None)
        exps = [math.exp(s - mx) if s is not None else 0.0 for s in logits]
        z = sum(exps)
        for col in range(v.shape[1]):
            out[i, col] = sum(exps[j] * v[j, col] for j in range(m)) / z
    return out


def test_single_token_passes_value_through():
    out = reference_attention([[3.0]], [[-2.0]], [[7.0]])
    assert np.allclose(out, [[7.0]], atol=0)


def test_zero_dense_bias_equals_no_bias():
    rng = Rng(1)
    q, k, v = rng.normal(5, 3), rng.normal(6, 3), rng.normal(6, 3)
    a = reference_attention(q, k, v, NO_BIAS)
    b = reference_attention(q, k, v, DenseBias(np.zeros((5, 6))))
    assert np.abs(a - b).max() <= 1e-14


def test_reference_matches_scalar_oracle():
    rng = Rng(7)
    q, k, v = rng.normal(4, 2), rng.normal(4, 2), rng.normal(4, 2)
    b = rng.normal(4, 4)
    got = reference_attention(q, k, v, DenseBias(b))
    assert np.abs(got - scalar_attention(q, k, v, b)).max() <= 1e-12


def test_reference_causal_matches_scalar_oracle():
    rng = Rng(17)
    q, k, v = rng.normal(6, 3), rng.normal(6, 3), rng.normal(6, 3)
    got = reference_attention(q, k, v, mask="causal")
    assert np.abs(got - scalar_attention(q, k, v, causal=True)).max() <= 1e-12


def test_causal_requires_square():
    with pytest.raises(MaskError):
        reference_attention(np.ones((3, 2)), np.ones((4, 2)), np.ones((4, 2)),
                            mask="causal")


def test_tiled_degenerate_single_block():
    rng = Rng(2)
    q, k, v = rng.normal(9, 4), rng.normal(11, 4), rng.normal(11, 4)
    ref = reference_attention(q, k, v)
    got = tiled_attention(q, k, v, tiles=TileConfig(9, 11))
    assert np.abs(got - ref).max() <= 1e-13


def test_tiled_dense_bias_128():
    rng = Rng(3)
    q, k, v = rng.normal(128, 16), rng.normal(128, 16), rng.normal(128, 16)
    bias = DenseBias(rng.normal(128, 128))
    ref = reference_attention(q, k, v, bias)
    got = tiled_attention(q, k, v, bias, tiles=TileConfig(32, 32))
    assert np.abs(got - ref).max() <= 1e-11


def test_tiled_factored_bias_streams_blocks():
    rng = Rng(4)
    q, k, v = rng.normal(40, 8), rng.normal(56, 8), rng.normal(56, 8)
    fb = FactoredBias(rng.normal(40, 5), rng.normal(56, 5))
    ref = reference_attention(q, k, v, DenseBias(fb.dense()))
    got = tiled_attention(q, k, v, fb, tiles=TileConfig(16, 8))
    assert np.abs(got - ref).max() <= 1e-11


def test_causal_rows_ignore_later_keys():
    rng = Rng(5)
    n = 64
    q, k, v = rng.normal(n, 8), rng.normal(n, 8), rng.normal(n, 8)
    base = tiled_attention(q, k, v, mask="causal", tiles=TileConfig(16, 16))
    i = 20
    k2, v2 = k.copy(), v.copy()
    k2[i + 1:] += rng.normal(n - i - 1, 8) * 10
    v2[i + 1:] -= 3.0
    pert = tiled_attention(q, k2, v2, mask="causal", tiles=TileConfig(16, 16))
    assert np.abs(pert[: i + 1] - base[: i + 1]).max() <= 1e-13


def test_flashbias_zero_factors_match_no_bias():
    rng = Rng(6)
    q, k, v = rng.normal(12, 4), rng.normal(12, 4), rng.normal(12, 4)
    ref = reference_attention(q, k, v)
    got = flashbias_attention(q, k, v, np.zeros((12, 2)), np.zeros((12, 2)),
                              tiles=TileConfig(5, 7))
    assert np.abs(got - ref).max() <= 1e-14


def test_flashbias_alibi_factors_match_dense():
    from flashbias import decompose_alibi
    rng = Rng(8)
    n = 64
    q, k, v = rng.normal(n, 8), rng.normal(n, 8), rng.normal(n, 8)
    fb = decompose_alibi(n, n)
    i = np.arange(n, dtype=float)
    dense = DenseBias(i[:, None] - i[None, :])
    ref = reference_attention(q, k, v, dense)
    got = flashbias_attention(q, k, v, fb.fq, fb.fk, tiles=TileConfig(16, 24))
    assert np.abs(got - ref).max() <= 1e-11


def test_flashbias_causal_large():
    rng = Rng(9)
    n, r = 256, 16
    q, k, v = rng.normal(n, 16), rng.normal(n, 16), rng.normal(n, 16)
    fq, fk = rng.normal(n, r), rng.normal(n, r)
    ref = reference_attention(q, k, v, DenseBias(fq @ fk.T), mask="causal")
    got = flashbias_attention(q, k, v, fq, fk, mask="causal",
                              tiles=TileConfig(48, 32))
    assert np.abs(got - ref).max() <= 1e-10


@given(st.integers(0, 2**32))
@settings(max_examples=25, deadline=None)
def test_tiling_invariance(seed):
    rng = Rng(seed)
    n = int(rng.integers(2, 48)[0])
    m = int(rng.integers(2, 48)[0])
    c = int(rng.integers(2, 12)[0])
    q, k, v = rng.normal(n, c), rng.normal(m, c), rng.normal(m, c)
    bias = DenseBias(rng.normal(n, m))
    outs = []
    for _ in range(3):
        tiles = TileConfig(int(rng.integers(1, n + 1)[0]),
                           int(rng.integers(1, m + 1)[0]))
        outs.append(tiled_attention(q, k, v, bias, tiles=tiles))
    for o in outs[1:]:
        assert np.abs(o - outs[0]).max() <= 1e-11


def test_flashbias_matches_scalar_oracle_directly():
    # independent chain: the factored path against the loop oracle, not
    # just against reference_attention
    rng = Rng(31)
    n, c, r = 7, 3, 2
    q, k, v = rng.normal(n, c), rng.normal(n, c), rng.normal(n, c)
    fq, fk = rng.normal(n, r), rng.normal(n, r)
    b = fq @ fk.T
    got = flashbias_attention(q, k, v, fq, fk, tiles=TileConfig(3, 2))
    assert np.abs(got - scalar_attention(q, k, v, b)).max() <= 1e-12
    got = flashbias_attention(q, k, v, fq, fk, mask="causal",
                              tiles=TileConfig(2, 3))
    assert np.abs(got - scalar_attention(q, k, v, b, causal=True)).max() <= 1e-12


def test_tiled_handles_large_logit_swings():
    rng = Rng(14)
    q, k, v = rng.normal(24, 4) * 10, rng.normal(20, 4) * 10, rng.normal(20, 4)
    bias = DenseBias((rng.uniform(24, 20) * 2 - 1) * 1e3)
    ref = reference_attention(q, k, v, bias)
    got = tiled_attention(q, k, v, bias, tiles=TileConfig(5, 7))
    assert np.isfinite(got).all()
    assert np.abs(got - ref).max() <= 1e-11


def test_attention_weights_are_row_stochastic():
    rng = Rng(10)
    q, k = rng.normal(20, 6), rng.normal(24, 6)
    w = attention_weights(q, k, DenseBias(rng.normal(20, 24)))
    assert (w >= 0).all()
    assert np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
    w = attention_weights(q[:20], k[:20], mask="causal")
    assert np.abs(w.sum(axis=1) - 1.0).max() <= 1e-12
    assert np.triu(w, k=1).max() == 0.0


def test_bias_constant_shift_leaves_output_unchanged():
    rng = Rng(12)
    q, k, v = rng.normal(10, 4), rng.normal(13, 4), rng.normal(13, 4)
    b = rng.normal(10, 13)
    base = reference_attention(q, k, v, DenseBias(b))
    shifted = reference_attention(q, k, v, DenseBias(b + 5.5))
    assert np.abs(shifted - base).max() <= 1e-12

    # same shift via an appended rank-1 factor pair
    fq, fk = rng.normal(10, 3), rng.normal(13, 3)
    base = flashbias_attention(q, k, v, fq, fk, tiles=TileConfig(4, 5))
    fq2 = np.hstack([fq, np.full((10, 1), 5.5)])
    fk2 = np.hstack([fk, np.ones((13, 1))])
    shifted = flashbias_attention(q, k, v, fq2, fk2, tiles=TileConfig(4, 5))
    assert np.abs(shifted - base).max() <= 1e-12


def test_choose_tile_sizes_worked_example():
    tiles = choose_tile_sizes(64, 64, 100 * 1024, 2)
    assert tiles.b_q == 96 and tiles.b_kv == 96


def test_choose_tile_sizes_too_small():
    with pytest.raises(ConfigError):
        choose_tile_sizes(4096, 4096, 64, 8)


@given(st.integers(1, 128), st.integers(0, 128), st.integers(1, 20))
@settings(max_examples=40, deadline=None)
def test_choose_tile_sizes_monotone_in_sram(c, r, mult):
    base = 4 * 8 * (c + r)
    small = choose_tile_sizes(c, r, base * mult, 8)
    big = choose_tile_sizes(c, r, base * mult * 2, 8)
    assert big.b_q >= small.b_q


def test_tile_config_validates():
    with pytest.raises(ConfigError):
        TileConfig(0, 4)
