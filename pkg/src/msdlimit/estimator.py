"""Log-log least-squares fit of the MSD power law."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateInputError, DomainError, RankError
from .model import LagScheme
from .msd_core import MsdCurve


class Preset(str, enum.Enum):
    CONSECUTIVE = "consecutive"
    PAIR = "pair"
    DYADIC_TRIPLE = "dyadic_triple"


@dataclass
class EstimateReport:
    log_theta_hat: float
    alpha_hat: float
    lags: tuple
    residuals: np.ndarray
    c_w: float
    delta: float = 1.0
    n: int | None = None

    @property
    def hurst_hat(self) -> float:
        return self.alpha_hat / 2.0

    @property
    def theta_hat(self) -> float:
        return float(np.exp(self.log_theta_hat))

    def to_dict(self) -> dict:
        return {
            "log_theta_hat": self.log_theta_hat,
            "alpha_hat": self.alpha_hat,
            "hurst_hat": self.hurst_hat,
            "lags": [int(h) for h in self.lags],
            "residuals": [float(r) for r in self.residuals],
            "c_w": self.c_w,
            "delta": self.delta,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> EstimateReport:
        try:
            return cls(
                float(d["log_theta_hat"]), float(d["alpha_hat"]), tuple(int(h) for h in d["lags"]),
                np.asarray(d.get("residuals", []), float), float(d.get("c_w", np.nan)),
                float(d.get("delta", 1.0)), d.get("n"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"invalid estimate report: {exc}") from None

    def table(self) -> str:
        rows = [
            ("log_theta_hat", self.log_theta_hat),
            ("theta_hat", self.theta_hat),
            ("alpha_hat", self.alpha_hat),
            ("hurst_hat", self.hurst_hat),
        ]
        lines = [f"{'parameter':<14}{'estimate':>14}"]
        lines += [f"{k:<14}{v:>14.6f}" for k, v in rows]
        lines.append(f"{'lags':<14}{len(self.lags):>14d}")
        return "\n".join(lines)


def design_constant(weights) -> float:
    """``c_w = m sum log^2 w_k - (sum log w_k)^2``, the determinant of M^T M."""
    lw = np.log(np.asarray(weights, dtype=float))
    return float(lw.size * np.sum(lw * lw) - np.sum(lw) ** 2)


def fit_loglog(curve: MsdCurve) -> EstimateReport:
    """OLS of ``log msd(h_k)`` on ``[1, log(delta h_k)]`` via a QR factorization."""
    values = np.asarray(curve.values, float)
    if values.size < 2:
        raise RankError("at least two lags are needed")
    if np.any(~(values > 0)):
        raise DegenerateInputError("MSD values must be positive; the path looks constant")
    t = np.asarray(curve.times, float)
    if np.unique(t).size < 2:
        raise RankError("all lags are equal")
    M = np.column_stack([np.ones_like(t), np.log(t)])
    q = np.log(values)
    Q, R = linalg.qr(M, mode="economic")
    beta = linalg.solve_triangular(R, Q.T @ q)
    resid = q - M @ beta
    return EstimateReport(
        float(beta[0]), float(beta[1]), tuple(int(h) for h in curve.lags), resid,
        design_constant(t / t.min()), float(curve.delta), curve.source.get("n"),
    )


def lag_presets(kind, h_min: int, h_max: int | None = None) -> LagScheme:
    kind = Preset(kind)
    if kind is Preset.DYADIC_TRIPLE:
        if h_min < 1:
            raise DomainError(f"h_min must be >= 1, got {h_min}")
        return LagScheme(h_min, (1.0, 2.0, 4.0))
    if h_max is None or not 1 <= h_min < h_max:
        raise DomainError(f"need 1 <= h_min < h_max, got {h_min}, {h_max}")
    if kind is Preset.PAIR:
        return LagScheme.from_lags([h_min, h_max])
    return LagScheme.from_lags(range(h_min, h_max + 1))
