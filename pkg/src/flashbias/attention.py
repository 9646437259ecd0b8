"""Attention with additive bias: reference, tiled, and factored paths.

``reference_attention`` materializes the full logit matrix and is the
oracle everything else is checked against. ``tiled_attention`` streams
key/value blocks with an online softmax (running row max and denominator)
and never holds more than one logit tile. ``flashbias_attention`` runs the
same tiled kernel on widened inputs [q | sqrt(C)*fq] and [k | fk] while
keeping the 1/sqrt(C) logit scale of the original channel count C, so the
extra channels contribute exactly fq @ fk.T to the logits and the dense
bias never needs to exist.

Masking is additive: causal fills entries with column index greater than
the row index using the most negative finite float64 (not -inf), which
exponentiates to zero after max subtraction without ever producing NaN in
the streaming recurrence. Key/value blocks entirely above the diagonal are
skipped outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bias import NO_BIAS, DenseBias, FactoredBias, NoBias
from .core import as_matrix, concat_cols, softmax_rows
from .errors import ConfigError, MaskError, ShapeError, ValidationError

MASK_NONE = "none"
MASK_CAUSAL = "causal"

# Additive stand-in for -inf: survives max subtraction without NaN.
MASK_FILL = float(np.finfo(np.float64).min)


@dataclass(frozen=True)
class TileConfig:
    """Rows per query block and per key/value block."""

    b_q: int
    b_kv: int
    sram_budget_bytes: Optional[int] = None

    def __post_init__(self):
        if self.b_q < 1 or self.b_kv < 1:
            raise ConfigError("tile sizes must be >= 1")


def choose_tile_sizes(c: int, r: int, sram_bytes: int, dtype_bytes: int) -> TileConfig:
    """Size blocks for a given SRAM budget.

    The budget must hold four working tiles of the concatenated width
    (c + r): the query block, key block, value block and the output
    accumulator. Hence b_q = floor(sram_bytes / (4 * dtype_bytes * (c+r)))
    and b_kv = min(b_q, c + r), both rounded down to a multiple of 8 when
    at least 8 so block shapes stay friendly to vectorized readers.
    """
    width = c + r
    if width < 1:
        raise ConfigError("c + r must be >= 1")
    if sram_bytes < 4 * dtype_bytes * width:
        raise ConfigError(
            f"sram_bytes={sram_bytes} below minimum {4 * dtype_bytes * width} "
            f"for width c+r={width}"
        )
    b_q = sram_bytes // (4 * dtype_bytes * width)
    b_kv = min(b_q, width)

    def round8(v: int) -> int:
        return v - v % 8 if v >= 8 else v

    return TileConfig(max(1, round8(b_q)), max(1, round8(b_kv)), sram_bytes)


def _validate_qkv(q, k, v):
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    v = as_matrix(v, "v")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q and k channel counts differ: {q.shape[1]} vs {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise ShapeError(f"k and v row counts differ: {k.shape[0]} vs {v.shape[0]}")
    return q, k, v


def _validate_mask(mask: str, n: int, m: int) -> str:
    if mask not in (MASK_NONE, MASK_CAUSAL):
        raise ValidationError(f"unknown mask {mask!r}")
    if mask == MASK_CAUSAL and n != m:
        raise MaskError(f"causal mask requires N == M, got {n} x {m}")
    return mask


def _dense_bias_of(bias, n: int, m: int) -> Optional[np.ndarray]:
    """Materialize a provider to its dense matrix (None for NoBias)."""
    if isinstance(bias, NoBias):
        return None
    if isinstance(bias, DenseBias):
        b = bias.b
    elif isinstance(bias, FactoredBias):
        b = bias.dense()
    else:
        raise ValidationError(f"unknown bias provider {type(bias).__name__}")
    if b.shape != (n, m):
        raise ShapeError(f"bias shape {b.shape} does not match logits {(n, m)}")
    return b


def attention_weights(q, k, bias=NO_BIAS, mask: str = MASK_NONE,
                      scale: Optional[float] = None) -> np.ndarray:
    """Row-stochastic attention weight matrix of the reference path."""
    q = as_matrix(q, "q")
    k = as_matrix(k, "k")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(f"q and k channel counts differ: {q.shape[1]} vs {k.shape[1]}")
    n, m = q.shape[0], k.shape[0]
    _validate_mask(mask, n, m)
    if scale is None:
        scale = 1.0 / math.sqrt(q.shape[1])
    logits = (q @ k.T) * scale
    b = _dense_bias_of(bias, n, m)
    if b is not None:
        logits = logits + b
    if mask == MASK_CAUSAL:
        logits = np.where(np.triu(np.ones((n, m), dtype=bool), k=1), MASK_FILL, logits)
    return softmax_rows(logits)


def reference_attention(q, k, v, bias=NO_BIAS, mask: str = MASK_NONE,
                        scale: Optional[float] = None) -> np.ndarray:
    """Attention output softmax(q k^T / sqrt(C) + bias + mask) @ v computed
    with the full logit matrix in memory. Serves as the oracle for the
    streaming paths."""
    q, k, v = _validate_qkv(q, k, v)
    return attention_weights(q, k, bias, mask, scale) @ v


def tiled_attention(q, k, v, bias=NO_BIAS, mask: str = MASK_NONE,
                    tiles: Optional[TileConfig] = None,
                    scale: Optional[float] = None) -> np.ndarray:
    """Streaming attention over key/value blocks with an online softmax.

    Mathematically identical to ``reference_attention`` for any tiling;
    the only differences are in summation order. Dense biases are read one
    (b_q x b_kv) tile at a time; factored biases contribute through an
    on-the-fly fq_block @ fk_block.T product so the dense matrix is never
    formed.
    """
    q, k, v = _validate_qkv(q, k, v)
    n, m = q.shape[0], k.shape[0]
    _validate_mask(mask, n, m)
    if scale is None:
        scale = 1.0 / math.sqrt(q.shape[1])
    if tiles is None:
        tiles = TileConfig(min(n, 128), min(m, 128))

    dense = bias.b if isinstance(bias, DenseBias) else None
    factored = bias if isinstance(bias, FactoredBias) else None
    if isinstance(bias, DenseBias) and dense.shape != (n, m):
        raise ShapeError(f"bias shape {dense.shape} does not match logits {(n, m)}")
    if factored is not None and (factored.fq.shape[0] != n or factored.fk.shape[0] != m):
        raise ShapeError(
            f"factor shapes {factored.fq.shape} / {factored.fk.shape} do not "
            f"match logits {(n, m)}"
        )
    if not isinstance(bias, (NoBias, DenseBias, FactoredBias)):
        raise ValidationError(f"unknown bias provider {type(bias).__name__}")

    out = np.empty((n, v.shape[1]), dtype=np.float64)
    col = np.arange(m)

    for q0 in range(0, n, tiles.b_q):
        q1 = min(q0 + tiles.b_q, n)
        qb = q[q0:q1]
        rows = np.arange(q0, q1)
        m_run = np.full(q1 - q0, -np.inf)
        l_run = np.zeros(q1 - q0)
        acc = np.zeros((q1 - q0, v.shape[1]))

        for k0 in range(0, m, tiles.b_kv):
            k1 = min(k0 + tiles.b_kv, m)
            if mask == MASK_CAUSAL and k0 > q1 - 1:
                break  # block entirely above the diagonal: skip, no reads
            s = (qb @ k[k0:k1].T) * scale
            if dense is not None:
                s = s + dense[q0:q1, k0:k1]
            elif factored is not None:
                s = s + factored.fq[q0:q1] @ factored.fk[k0:k1].T
            if mask == MASK_CAUSAL and k1 - 1 > q0:
                s = np.where(col[None, k0:k1] > rows[:, None], MASK_FILL, s)

            m_new = np.maximum(m_run, s.max(axis=1))
            p = np.exp(s - m_new[:, None])
            alpha = np.exp(m_run - m_new)
            l_run = alpha * l_run + p.sum(axis=1)
            acc = alpha[:, None] * acc + p @ v[k0:k1]
            m_run = m_new

        out[q0:q1] = acc / l_run[:, None]
    return out


def flashbias_attention(q, k, v, fq, fk, mask: str = MASK_NONE,
                        tiles: Optional[TileConfig] = None) -> np.ndarray:
    """Tiled attention with a factored bias folded into the channels.

    Runs the streaming kernel on q' = [q | sqrt(C)*fq], k' = [k | fk] while
    dividing logits by sqrt(C) of the original channel count; the
    premultiplier on fq cancels that division for the extra channels, so
    the logits equal q k^T / sqrt(C) + fq fk^T exactly. No renormalization
    by sqrt(C + R) takes place.
    """
    q, k, v = _validate_qkv(q, k, v)
    fq = as_matrix(fq, "fq")
    fk = as_matrix(fk, "fk")
    if fq.shape[1] != fk.shape[1]:
        raise ShapeError(f"factor ranks differ: {fq.shape[1]} vs {fk.shape[1]}")
    if fq.shape[0] != q.shape[0]:
        raise ShapeError(f"fq rows {fq.shape[0]} do not match q rows {q.shape[0]}")
    if fk.shape[0] != k.shape[0]:
        raise ShapeError(f"fk rows {fk.shape[0]} do not match k rows {k.shape[0]}")

    c = q.shape[1]
    root_c = math.sqrt(c)
    q_wide = concat_cols(q, root_c * fq)
    k_wide = concat_cols(k, fk)
    return tiled_attention(q_wide, k_wide, v, NO_BIAS, mask, tiles,
                           scale=1.0 / root_c)
