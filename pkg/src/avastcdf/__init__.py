"""Anytime-valid, value-uniform confidence bands for streaming CDFs."""

from .bands import (
    AtomSpec,
    Band,
    BandPoint,
    DepthSchedule,
    band_curve,
    band_with_atoms,
    lower_real_line,
    lower_unit,
    monotonize,
    upper_real_line,
    upper_unit,
)
from .kernels import KernelError, ToleranceConfig
from .oracles import (
    BernoulliOracle,
    BetGrid,
    DDRMOracle,
    EmpBernOracle,
    OracleQuery,
    SubGaussianOracle,
    make_oracle,
)
from .simulate import BandConfig, GeneratorConfig, coverage_mc, dkw_band, generate
from .stats import FrozenTailStats, LogApproxBuckets, ValueCounts, WeightedStreamStats

__version__ = "0.1.0"

__all__ = [
    "AtomSpec",
    "Band",
    "BandConfig",
    "BandPoint",
    "BernoulliOracle",
    "BetGrid",
    "DDRMOracle",
    "DepthSchedule",
    "EmpBernOracle",
    "FrozenTailStats",
    "GeneratorConfig",
    "KernelError",
    "LogApproxBuckets",
    "OracleQuery",
    "SubGaussianOracle",
    "ToleranceConfig",
    "ValueCounts",
    "WeightedStreamStats",
    "band_curve",
    "band_with_atoms",
    "coverage_mc",
    "dkw_band",
    "generate",
    "lower_real_line",
    "lower_unit",
    "make_oracle",
    "monotonize",
    "upper_real_line",
    "upper_unit",
]
