"""Wall-time and bias-memory measurements for the attention paths.

Timings are the median of a configurable number of runs (default 11) after
two warmups. Bias memory is tracked by explicit accounting on the bias
provider, not process RSS, so it isolates exactly the storage the factored
representation removes: a dense bias holds n*m elements, factors hold
(n + m) * r. Scenarios whose dense bias would exceed the configured byte
cap are emitted as skipped rows instead of crashing.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .attention import TileConfig, flashbias_attention, reference_attention, tiled_attention
from .bias import DenseBias, random_low_rank_factors
from .core import frobenius
from .errors import ValidationError
from .rng import Rng

PATHS = ("reference_dense", "tiled_dense", "flashbias")


@dataclass
class BenchResult:
    scenario: str
    n: int
    m: int
    c: int
    r: int
    dtype: str
    wall_nanos: Optional[int]  # median per call; None when skipped
    peak_bias_bytes: int
    checksum: Optional[float]
    skipped: bool = False
    skip_reason: str = ""

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n": self.n, "m": self.m, "c": self.c, "r": self.r,
            "dtype": self.dtype,
            "wall_nanos": self.wall_nanos,
            "peak_bias_bytes": self.peak_bias_bytes,
            "checksum": self.checksum,
            "skipped": self.skipped,
            "skip_reason": self.skip_reason,
        }


BENCH_CSV_HEADER = ("scenario,n,m,c,r,dtype,wall_nanos,peak_bias_bytes,"
                    "checksum,skipped,skip_reason")


def bench_csv_rows(results: List["BenchResult"]) -> str:
    lines = [BENCH_CSV_HEADER]
    for r in results:
        d = r.as_dict()
        lines.append(",".join("" if d[k] is None else str(d[k])
                              for k in BENCH_CSV_HEADER.split(",")))
    return "\n".join(lines) + "\n"


def _median_nanos(fn, runs: int, warmup: int) -> int:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(runs):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return int(np.median(samples))


@dataclass
class BenchConfig:
    ns: List[int]
    c: int = 64
    r: int = 16
    seed: int = 0
    dtype: str = "f64"
    tiles: Optional[TileConfig] = None
    runs: int = 11
    warmup: int = 2
    max_bias_bytes: int = 256 * 1024 * 1024
    paths: tuple = field(default=PATHS)

    def __post_init__(self):
        if not self.ns:
            raise ValidationError("bench sweep must not be empty")
        if self.dtype not in ("f32", "f64"):
            raise ValidationError("dtype must be f32 or f64")
        if self.runs < 1 or self.warmup < 0:
            raise ValidationError("runs must be >= 1 and warmup >= 0")


def run_bench(cfg: BenchConfig) -> List[BenchResult]:
    """Time the three attention paths on identical seeded inputs.

    Asserts the factored path's bias storage equals (n+m)*r*itemsize
    exactly and the dense path's is at least n*m*itemsize; these are
    accounting identities, so a mismatch is a harness bug.
    """
    itemsize = 4 if cfg.dtype == "f32" else 8
    store = np.float32 if cfg.dtype == "f32" else np.float64
    results: List[BenchResult] = []

    for n in cfg.ns:
        m = n
        rng = Rng(cfg.seed + n)
        q = rng.normal(n, cfg.c).astype(store)
        k = rng.normal(m, cfg.c).astype(store)
        v = rng.normal(m, cfg.c).astype(store)
        fb = random_low_rank_factors(n, m, cfg.r, cfg.seed + n)
        fq = fb.fq.astype(store)
        fk = fb.fk.astype(store)
        factored_bytes = fq.nbytes + fk.nbytes
        assert factored_bytes == (n + m) * cfg.r * itemsize
        dense_bytes = n * m * itemsize
        tiles = cfg.tiles or TileConfig(min(n, 128), min(m, 128))

        dense_ok = dense_bytes <= cfg.max_bias_bytes
        dense = None
        if dense_ok:
            # values stay f64 (all paths accumulate in 64-bit); capacity is
            # accounted at the bench dtype
            dense = DenseBias(fq.astype(np.float64) @ fk.astype(np.float64).T)
            assert dense.storage_bytes(itemsize) >= n * m * itemsize

        def row(path, nanos, bias_bytes, checksum):
            results.append(BenchResult(path, n, m, cfg.c, cfg.r, cfg.dtype,
                                       nanos, bias_bytes, checksum))

        if dense_ok:
            out_ref = reference_attention(q, k, v, dense)
            nanos = _median_nanos(lambda: reference_attention(q, k, v, dense),
                                  cfg.runs, cfg.warmup)
            row("reference_dense", nanos, dense.storage_bytes(itemsize),
                frobenius(out_ref))

            out_tiled = tiled_attention(q, k, v, dense, tiles=tiles)
            nanos = _median_nanos(lambda: tiled_attention(q, k, v, dense, tiles=tiles),
                                  cfg.runs, cfg.warmup)
            row("tiled_dense", nanos, dense.storage_bytes(itemsize),
                frobenius(out_tiled))
        else:
            reason = f"dense bias {dense_bytes} B exceeds cap {cfg.max_bias_bytes} B"
            for path in ("reference_dense", "tiled_dense"):
                results.append(BenchResult(path, n, m, cfg.c, cfg.r, cfg.dtype,
                                           None, dense_bytes, None,
                                           skipped=True, skip_reason=reason))

        out_fb = flashbias_attention(q, k, v, fq, fk, tiles=tiles)
        nanos = _median_nanos(lambda: flashbias_attention(q, k, v, fq, fk, tiles=tiles),
                              cfg.runs, cfg.warmup)
        row("flashbias", nanos, factored_bytes, frobenius(out_fb))

    return results


def checksum_agreement(results: List[BenchResult]) -> List[str]:
    """Names of sweep points where the factored checksum strays more than
    1e-8 from the dense reference checksum."""
    bad = []
    by_n: dict = {}
    for r in results:
        by_n.setdefault(r.n, {})[r.scenario] = r
    for n, rows in sorted(by_n.items()):
        ref = rows.get("reference_dense")
        fb = rows.get("flashbias")
        if ref is None or fb is None or ref.skipped or fb.skipped:
            continue
        if abs(ref.checksum - fb.checksum) > 1e-8:
            bad.append(f"n={n}: |{ref.checksum} - {fb.checksum}| > 1e-8")
    return bad
