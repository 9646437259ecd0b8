"""Attention with additive bias, computed without materializing the bias.

The factored path runs tiled online-softmax attention on channel-widened
inputs [q | sqrt(C)*fq] and [k | fk], so a rank-R bias costs (N+M)*R
storage instead of N*M. Decomposers produce the factors (closed-form, SVD,
or trained networks) and a cost model accounts the HBM traffic each
algorithm moves.
"""

from .attention import (MASK_CAUSAL, MASK_NONE, TileConfig, attention_weights,
                        choose_tile_sizes, flashbias_attention,
                        reference_attention, tiled_attention)
from .bias import (NO_BIAS, AlibiBias, DenseBias, FactoredBias, GravityBias,
                   NoBias, ParameterBias, RandomLowRankBias,
                   SpatialDistanceBias, SphericalDistanceBias, generate_bias,
                   random_low_rank_factors)
from .core import concat_cols, frobenius, matmul, softmax_rows
from .costmodel import (CostParams, CostReport, asymptotic_flash_io,
                        asymptotic_flashbias_io, asymptotic_standard_io,
                        count_flash, count_flashbias, count_for,
                        count_standard, dense_over_factored_ratio,
                        hbm_access_lower_bound, standard_over_flash_ratio)
from .decompose import (DecompositionReport, HeadSplit, decompose_alibi,
                        decompose_spatial, energy_profile,
                        reconstruction_report, split_heads_by_rank,
                        svd_decompose)
from .errors import (ConfigError, MaskError, ShapeError, TrainingError,
                     ValidationError)
from .fileio import read_dbm1, read_fbf1, write_dbm1, write_fbf1
from .neural import FactorNetworks, Mlp, neural_decompose
from .rng import Rng

__version__ = "0.1.0"

__all__ = [
    "MASK_CAUSAL", "MASK_NONE", "TileConfig", "attention_weights",
    "choose_tile_sizes", "flashbias_attention", "reference_attention",
    "tiled_attention",
    "NO_BIAS", "AlibiBias", "DenseBias", "FactoredBias", "GravityBias",
    "NoBias", "ParameterBias", "RandomLowRankBias", "SpatialDistanceBias",
    "SphericalDistanceBias", "generate_bias", "random_low_rank_factors",
    "concat_cols", "frobenius", "matmul", "softmax_rows",
    "CostParams", "CostReport", "asymptotic_flash_io",
    "asymptotic_flashbias_io", "asymptotic_standard_io", "count_flash",
    "count_flashbias", "count_for", "count_standard",
    "dense_over_factored_ratio", "hbm_access_lower_bound",
    "standard_over_flash_ratio",
    "DecompositionReport", "HeadSplit", "decompose_alibi",
    "decompose_spatial", "energy_profile", "reconstruction_report",
    "split_heads_by_rank", "svd_decompose",
    "ConfigError", "MaskError", "ShapeError", "TrainingError",
    "ValidationError",
    "read_dbm1", "read_fbf1", "write_dbm1", "write_fbf1",
    "FactorNetworks", "Mlp", "neural_decompose",
    "Rng",
]
