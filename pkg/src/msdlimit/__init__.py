"""Pathwise MSD analysis of anomalous diffusion: simulation, estimation and limit laws."""

from .errors import (
    DegenerateInputError,
    DomainError,
    IngestError,
    MsdError,
    NumericalError,
    RankError,
    RegimeError,
    UnsupportedModelError,
)
from .estimator import EstimateReport, Preset, fit_loglog, lag_presets
from .fractional_sim import SamplePath, simulate_fbm, simulate_fgn, simulate_ifou, simulate_path
from .model import Kind, LagScheme, ProcessModel, Regime, check_a2_regime, classify_regime
from .msd_core import MsdCurve, exact_msd_moment, msd, msd_curve

__all__ = [
    "DegenerateInputError", "DomainError", "IngestError", "MsdError", "NumericalError",
    "RankError", "RegimeError", "UnsupportedModelError",
    "EstimateReport", "Preset", "fit_loglog", "lag_presets",
    "SamplePath", "simulate_fbm", "simulate_fgn", "simulate_ifou", "simulate_path",
    "Kind", "LagScheme", "ProcessModel", "Regime", "check_a2_regime", "classify_regime",
    "MsdCurve", "exact_msd_moment", "msd", "msd_curve",
]
