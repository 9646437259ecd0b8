"""Factor a bias matrix: closed-form routes, SVD truncation, head splitting.

Energy of a truncation is the fraction of the summed squared singular
values retained by the leading components, so for an SVD truncation the
identity rel_fro_err**2 + energy_retained == 1 holds exactly (Eckart-Young
optimality in the Frobenius norm).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .bias import FactoredBias
from .core import as_matrix, check_finite, frobenius
from .errors import ShapeError, ValidationError


@dataclass
class DecompositionReport:
    rank_used: int
    energy_retained: float
    max_abs_err: float
    rel_fro_err: float

    def as_dict(self) -> dict:
        return {
            "rank_used": self.rank_used,
            "energy_retained": self.energy_retained,
            "max_abs_err": self.max_abs_err,
            "rel_fro_err": self.rel_fro_err,
        }


def decompose_alibi(n: int, m: int, slope: float = 1.0) -> FactoredBias:
    """Rank-2 factors of the linear positional bias slope*(i - j).

    Over 1-based indices i, j: fq row i is slope*[1, i], fk row j is
    [-j, 1], so fq @ fk.T gives slope*i - slope*j. With slope 1 (or any
    power of two) every product is exact in float64, hence reconstruction
    error is identically zero.
    """
    if n < 1 or m < 1:
        raise ValidationError("decompose_alibi requires n, m >= 1")
    i = np.arange(1, n + 1, dtype=np.float64)
    j = np.arange(1, m + 1, dtype=np.float64)
    fq = slope * np.stack([np.ones(n), i], axis=1)
    fk = np.stack([-j, np.ones(m)], axis=1)
    return FactoredBias(fq, fk, origin="exact",
                        descriptor=f"alibi(n={n},m={m},slope={slope})")


def decompose_spatial(pos_q, pos_k, row_weights=None) -> FactoredBias:
    """Rank-9 factors of the (weighted) squared-distance bias in 3-D.

    Per coordinate d the identity (x_d - y_d)^2 = x_d^2*1 + 1*y_d^2 +
    (-2 x_d)*y_d splits into three channel pairs, giving
    fq = [x0^2, 1, -2x0, x1^2, 1, -2x1, x2^2, 1, -2x2] and
    fk = [1, y0^2, y0, 1, y1^2, y1, 1, y2^2, y2]. A row weight w_i, when
    given, multiplies fq row i.
    """
    pq = as_matrix(pos_q, "pos_q")
    pk = as_matrix(pos_k, "pos_k")
    if pq.shape[1] != 3 or pk.shape[1] != 3:
        raise ShapeError("decompose_spatial requires N x 3 positions")
    n, m = pq.shape[0], pk.shape[0]
    ones_n, ones_m = np.ones(n), np.ones(m)
    fq_cols, fk_cols = [], []
    for d in range(3):
        fq_cols += [pq[:, d] ** 2, ones_n, -2.0 * pq[:, d]]
        fk_cols += [ones_m, pk[:, d] ** 2, pk[:, d]]
    fq = np.stack(fq_cols, axis=1)
    fk = np.stack(fk_cols, axis=1)
    if row_weights is not None:
        w = np.asarray(row_weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != n:
            raise ShapeError("row_weights length must equal pos_q rows")
        fq = w[:, None] * fq
    return FactoredBias(fq, fk, origin="exact", descriptor="spatial_distance_3d")


def energy_profile(singular_values: np.ndarray) -> np.ndarray:
    """Cumulative energy fractions energy(k) for k = 1..len(s).

    Nondecreasing and exactly 1 at full rank; an all-zero spectrum yields
    all ones (a zero matrix is retained perfectly at any rank).
    """
    s2 = np.asarray(singular_values, dtype=np.float64) ** 2
    cum = np.cumsum(s2)
    total = cum[-1] if cum.size else 0.0
    if total == 0.0:
        return np.ones_like(cum)
    return cum / total


def svd_decompose(b, rank: Optional[int] = None, energy: Optional[float] = None
                  ) -> Tuple[FactoredBias, DecompositionReport]:
    """Truncated-SVD factors of a dense bias.

    Exactly one target must be given: ``rank`` keeps that many components,
    ``energy`` keeps the smallest k whose retained energy reaches the
    threshold. Factors absorb sqrt of the singular values on both sides:
    fq = U_k diag(s)^(1/2), fk = V_k diag(s)^(1/2).
    """
    b = as_matrix(b, "bias")
    check_finite(b, "bias")
    if (rank is None) == (energy is None):
        raise ValidationError("specify exactly one of rank= or energy=")
    n, m = b.shape
    full = min(n, m)
    u, s, vt = np.linalg.svd(b, full_matrices=False)
    prof = energy_profile(s)
    if energy is not None:
        if not 0.0 < energy <= 1.0:
            raise ValidationError("energy target must lie in (0, 1]")
        k = int(np.searchsorted(prof, energy) + 1)
        k = min(k, full)
    else:
        if not 1 <= rank <= full:
            raise ValidationError(f"rank must lie in [1, {full}]")
        k = int(rank)
    root = np.sqrt(s[:k])
    fq = u[:, :k] * root
    fk = vt[:k].T * root
    fb = FactoredBias(fq, fk, origin="svd", descriptor=f"svd(k={k})")

    recon = fb.dense()
    norm_b = frobenius(b)
    rel = frobenius(recon - b) / norm_b if norm_b > 0 else 0.0
    report = DecompositionReport(
        rank_used=k,
        energy_retained=float(prof[k - 1]),
        max_abs_err=float(np.abs(recon - b).max()),
        rel_fro_err=float(rel),
    )
    return fb, report


def reconstruction_report(fb: FactoredBias, target) -> DecompositionReport:
    """Quality of fb against a dense target: max abs and relative Frobenius
    errors of fq @ fk.T, plus the energy the target's own spectrum retains
    at fb's rank."""
    target = as_matrix(target, "target")
    if (fb.fq.shape[0], fb.fk.shape[0]) != target.shape:
        raise ShapeError(
            f"factor shapes imply {(fb.fq.shape[0], fb.fk.shape[0])}, "
            f"target is {target.shape}"
        )
    diff = fb.dense() - target
    norm_t = frobenius(target)
    if norm_t > 0:
        rel = frobenius(diff) / norm_t
    else:
        rel = 0.0 if frobenius(diff) == 0.0 else float("inf")
    s = np.linalg.svd(target, compute_uv=False)
    prof = energy_profile(s)
    k = min(fb.rank, len(prof))
    return DecompositionReport(
        rank_used=fb.rank,
        energy_retained=float(prof[k - 1]) if len(prof) else 1.0,
        max_abs_err=float(np.abs(diff).max()),
        rel_fro_err=float(rel),
    )


@dataclass
class HeadSplit:
    """Partition of a head stack into a factored (low-rank) subset and a
    dense remainder."""

    low_indices: List[int]
    low_factors: List[FactoredBias]
    dense_indices: List[int]
    common_rank: int


def split_heads_by_rank(biases: Sequence[np.ndarray], energy_threshold: float,
                        max_rank: int) -> HeadSplit:
    """Assign each head to the factored or dense path by its energy rank.

    A head joins the low subset when the smallest rank retaining
    ``energy_threshold`` of its energy is at most ``max_rank``. All low
    heads share one common rank (the subset maximum rounded up to a
    multiple of 8, so a single batched kernel shape serves them all);
    factors are zero-padded if the common rank exceeds a head's full rank.
    """
    if len(biases) < 1:
        raise ValidationError("need at least one head")
    mats = [as_matrix(b, f"head {i}") for i, b in enumerate(biases)]
    shape = mats[0].shape
    for i, b in enumerate(mats):
        if b.shape != shape:
            raise ShapeError(f"head {i} shape {b.shape} differs from {shape}")
    if not 0.0 < energy_threshold <= 1.0:
        raise ValidationError("energy threshold must lie in (0, 1]")

    svds = [np.linalg.svd(b, full_matrices=False) for b in mats]
    ranks = []
    for _, s, _ in svds:
        prof = energy_profile(s)
        ranks.append(int(np.searchsorted(prof, energy_threshold) + 1))

    low = [i for i, r in enumerate(ranks) if r <= max_rank]
    dense = [i for i in range(len(mats)) if i not in low]
    if not low:
        return HeadSplit([], [], dense, 0)

    common = max(ranks[i] for i in low)
    common = ((common + 7) // 8) * 8

    factors = []
    for i in low:
        u, s, vt = svds[i]
        k_eff = min(common, len(s))
        root = np.sqrt(s[:k_eff])
        fq = u[:, :k_eff] * root
        fk = vt[:k_eff].T * root
        if k_eff < common:  # pad to the shared kernel rank
            fq = np.hstack([fq, np.zeros((fq.shape[0], common - k_eff))])
            fk = np.hstack([fk, np.zeros((fk.shape[0], common - k_eff))])
        factors.append(FactoredBias(fq, fk, origin="svd",
                                    descriptor=f"head{i}(common_rank={common})"))
    return HeadSplit(low, factors, dense, common)
