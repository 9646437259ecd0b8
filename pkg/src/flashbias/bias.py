"""Attention bias providers and closed-form bias generators.

A bias enters the attention logits additively, after the scaled query-key
product. It can be supplied three ways:

* ``NoBias``       no additive term;
* ``DenseBias``    an explicit N x M matrix;
* ``FactoredBias`` two factors fq (N x R) and fk (M x R) whose product
  fq @ fk.T is the bias. Storage drops from N*M to (N+M)*R entries, which
  is the whole point of the factored path.

Generators build dense biases from source coordinates (token indices,
spatial positions, lat/lon pairs) so decomposers can be checked against a
directly evaluated target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import as_matrix, check_finite
from .errors import ShapeError, ValidationError
from .rng import Rng


@dataclass(frozen=True)
class NoBias:
    def storage_bytes(self, dtype_bytes: int = 8) -> int:
        return 0


@dataclass(frozen=True, eq=False)
class DenseBias:
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", as_matrix(self.b, "bias"))

    def storage_bytes(self, dtype_bytes: int = 8) -> int:
        return self.b.shape[0] * self.b.shape[1] * dtype_bytes


@dataclass(frozen=True, eq=False)
class FactoredBias:
    """Bias represented as fq @ fk.T with a common rank R >= 1.

    ``origin`` records how the factors were obtained (exact, svd or
    neural); ``descriptor`` is a free-form note about the generator.
    """

    fq: np.ndarray
    fk: np.ndarray
    origin: str = "exact"
    descriptor: str = ""

    def __post_init__(self):
        object.__setattr__(self, "fq", as_matrix(self.fq, "fq"))
        object.__setattr__(self, "fk", as_matrix(self.fk, "fk"))
        if self.fq.shape[1] != self.fk.shape[1]:
            raise ShapeError(
                f"factor ranks differ: fq has {self.fq.shape[1]} columns, "
                f"fk has {self.fk.shape[1]}"
            )
        if self.fq.shape[1] < 1:
            raise ShapeError("factored bias requires rank >= 1")
        if self.origin not in ("exact", "svd", "neural"):
            raise ValidationError(f"unknown factor origin {self.origin!r}")

    @property
    def rank(self) -> int:
        return self.fq.shape[1]

    def dense(self) -> np.ndarray:
        return self.fq @ self.fk.T

    def storage_bytes(self, dtype_bytes: int = 8) -> int:
        n, r = self.fq.shape
        m = self.fk.shape[0]
        return (n + m) * r * dtype_bytes


NO_BIAS = NoBias()


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@dataclass
class AlibiBias:
    """Linear positional bias slope*(i - j) over 1-based token indices."""

    n: int
    m: int
    slope: float = 1.0


@dataclass
class SpatialDistanceBias:
    """Squared euclidean distance between 3-D points, optionally scaled by
    a per-query row weight."""

    pos_q: np.ndarray
    pos_k: np.ndarray
    row_weights: Optional[np.ndarray] = None


@dataclass
class GravityBias:
    """Inverse squared distance over 2-D points; ``eps`` regularizes the
    diagonal only, where the distance is identically zero."""

    pos: np.ndarray
    eps: float = 0.01


@dataclass
class SphericalDistanceBias:
    """Great-circle (haversine) distance between (lat, lon) pairs in
    radians."""

    latlon: np.ndarray


@dataclass
class RandomLowRankBias:
    """Seeded random bias of exact rank min(rank, n, m)."""

    n: int
    m: int
    rank: int
    seed: int = 0


@dataclass
class ParameterBias:
    """A dense matrix used verbatim (learned-parameter style bias)."""

    matrix: np.ndarray = field(repr=False)


def random_low_rank_factors(n: int, m: int, rank: int, seed: int = 0) -> FactoredBias:
    rng = Rng(seed)
    fq = rng.normal(n, rank)
    fk = rng.normal(m, rank)
    return FactoredBias(fq, fk, origin="exact",
                        descriptor=f"random_low_rank(n={n},m={m},r={rank},seed={seed})")


def _pairwise_sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=2)


def generate_bias(gen) -> np.ndarray:
    """Evaluate a generator to its dense N x M bias matrix."""
    if isinstance(gen, AlibiBias):
        if gen.n < 1 or gen.m < 1:
            raise ValidationError("alibi bias requires n, m >= 1")
        i = np.arange(1, gen.n + 1, dtype=np.float64)
        j = np.arange(1, gen.m + 1, dtype=np.float64)
        return gen.slope * (i[:, None] - j[None, :])

    if isinstance(gen, SpatialDistanceBias):
        pq = as_matrix(gen.pos_q, "pos_q")
        pk = as_matrix(gen.pos_k, "pos_k")
        if pq.shape[1] != 3 or pk.shape[1] != 3:
            raise ShapeError("spatial distance bias requires N x 3 positions")
        b = _pairwise_sq_dist(pq, pk)
        if gen.row_weights is not None:
            w = np.asarray(gen.row_weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != pq.shape[0]:
                raise ShapeError("row_weights length must equal pos_q rows")
            b = w[:, None] * b
        return b

    if isinstance(gen, GravityBias):
        pos = as_matrix(gen.pos, "pos")
        if pos.shape[1] != 2:
            raise ShapeError("gravity bias requires N x 2 positions")
        if gen.eps <= 0:
            raise ValidationError("gravity eps must be positive")
        d2 = _pairwise_sq_dist(pos, pos)
        n = pos.shape[0]
        off_diag_zero = (d2 == 0.0) & ~np.eye(n, dtype=bool)
        if off_diag_zero.any():
            raise ValidationError(
                "gravity bias undefined for coincident distinct points"
            )
        return 1.0 / (d2 + gen.eps * np.eye(n))

    if isinstance(gen, SphericalDistanceBias):
        ll = as_matrix(gen.latlon, "latlon")
        if ll.shape[1] != 2:
            raise ShapeError("spherical bias requires N x 2 (lat, lon) radians")
        lat, lon = ll[:, 0], ll[:, 1]
        if np.any(np.abs(lat) > np.pi / 2):
            raise ValidationError("latitudes must lie in [-pi/2, pi/2]")
        dlat = lat[:, None] - lat[None, :]
        dlon = lon[:, None] - lon[None, :]
        h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
        arg = np.clip(np.sqrt(np.clip(h, 0.0, None)), 0.0, 1.0)
        return 2.0 * np.arcsin(arg)

    if isinstance(gen, RandomLowRankBias):
        return random_low_rank_factors(gen.n, gen.m, gen.rank, gen.seed).dense()

    if isinstance(gen, ParameterBias):
        b = as_matrix(gen.matrix, "parameter bias")
        check_finite(b, "parameter bias")
        return b.copy()

    raise ValidationError(f"unknown bias generator {type(gen).__name__}")
