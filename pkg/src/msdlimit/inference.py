"""Least-squares limit coefficients and confidence intervals for (alpha, log theta)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import asymptotics as asy
from .errors import DomainError, RankError, RegimeError
from .estimator import EstimateReport, design_constant
from .model import CRITICAL_TOL, LagScheme, ProcessModel, Regime, classify_regime


class DegenerateIntervalWarning(UserWarning):
    """The limit standard deviation vanished; the interval has zero width."""


@dataclass(frozen=True)
class LsLimitCoefficients:
    u_vector: np.ndarray
    c_w: float
    a_diag: np.ndarray
    rate_factor: float
    regime: Regime
    weights: tuple


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    parameter: str
    regime: Regime
    quantile_source: str
    sd: float

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "regime": self.regime.value,
            "quantile_source": self.quantile_source,
            "sd": self.sd,
        }


def ls_limit_coefficients(weights, theta: float, alpha: float, n: int, h: int,
                          tol: float = CRITICAL_TOL) -> LsLimitCoefficients:
    w = np.asarray(weights, dtype=float)
    if w.size < 2 or np.unique(w).size != w.size:
        raise RankError("need at least two distinct weights")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    regime = classify_regime(alpha, tol)
    lw = np.log(w)
    c_w = design_constant(w)
    if not c_w > 0:
        raise RankError("degenerate weights")
    u = (lw.sum() - w.size * lw) / c_w
    a = asy.zeta_fn(alpha, w, regime) / (theta * w**alpha)
    eta = asy.eta_fn(alpha, n, regime)
    rate = eta * float(asy.zeta_fn(alpha, h, regime)) / (n * h**alpha)
    return LsLimitCoefficients(u, c_w, a, rate, regime, tuple(w.tolist()))


def _intercept_weights(coefs: LsLimitCoefficients, mean_log_t: float) -> np.ndarray:
    # intercept row of (M^T M)^-1 M^T; the slope row is -U
    return 1.0 / coefs.u_vector.size + mean_log_t * coefs.u_vector


def _limit_sd(row: np.ndarray, coefs: LsLimitCoefficients, law: asy.AsymptoticLaw):
    """``(sigma, sign)`` with ``row^T A Z = sign * sigma * Z_std``."""
    ra = row * coefs.a_diag
    if law.regime is Regime.SUBCRITICAL:
        if law.sigma is None:
            raise DomainError("law lacks a covariance matrix")
        return float(math.sqrt(max(ra @ law.sigma.entries @ ra, 0.0))), 1.0
    if law.regime is Regime.SUPERCRITICAL:
        # rank-one limit: every component is the same tau-scaled Rosenblatt variable
        s = float(np.sum(ra))
        r = law.rosenblatt
        return abs(s) * law.tau / r.psi, (1.0 if s >= 0 else -1.0)
    raise RegimeError("no confidence interval in the critical regime alpha = 3/2")


def estimator_limit_sd(coefs: LsLimitCoefficients, law: asy.AsymptoticLaw) -> float:
    """``sigma`` with ``-U^T A Z = sigma Z_std``."""
    sd, _ = _limit_sd(-coefs.u_vector, coefs, law)
    if sd == 0.0:
        warnings.warn("limit standard deviation is zero", DegenerateIntervalWarning, stacklevel=2)
    return sd


def _std_quantiles(law, sign, level, tol):
    lo_p = (1.0 - level) / 2.0
    hi_p = 1.0 - lo_p
    if law.regime is Regime.SUBCRITICAL:
        z = stats.norm.ppf(hi_p)
        return -z, z, "normal"
    r = law.rosenblatt
    q_lo = asy.rosenblatt_quantile(r, lo_p, r.psi, tol)
    q_hi = asy.rosenblatt_quantile(r, hi_p, r.psi, tol)
    if sign < 0:
        q_lo, q_hi = -q_hi, -q_lo
    return q_lo, q_hi, "rosenblatt"


def confidence_interval(report: EstimateReport, n: int, h: int | None = None, level: float = 0.95,
                        weights=None, n_quad: int = asy.DEFAULT_N_QUAD,
                        tol: float = 1e-7, regime_tol: float = 1e-2):
    """Plug-in intervals for ``alpha`` and ``log theta``.

    ``h`` is the base lag and ``weights`` the lag multipliers; both default to
    the report's lags with ``h`` the smallest one.  The limit law is evaluated
    at ``(theta_hat, alpha_hat)``.  Estimates within ``regime_tol`` of 3/2 are
    refused.  Returns ``(alpha_interval, log_theta_interval)``.
    """
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    a_hat = report.alpha_hat
    lt_hat = report.log_theta_hat
    if not (np.isfinite(a_hat) and np.isfinite(lt_hat)):
        raise DomainError("estimates must be finite")
    if weights is None:
        scheme = LagScheme.from_lags(report.lags)
        h0, weights = scheme.base, scheme.weights
        h = h0 if h is None else h
    if h is None:
        raise DomainError("base lag h is required when weights are given")
    if not 0.0 < a_hat < 2.0:
        raise RegimeError(f"alpha_hat = {a_hat:.4f} lies outside (0, 2); no interval")
    if abs(a_hat - 1.5) <= regime_tol:
        raise RegimeError(
            f"alpha_hat = {a_hat:.4f} is within {regime_tol} of 3/2; the limit law changes "
            "there, so no interval is produced. Use more data or other lags."
        )
    theta_hat = math.exp(lt_hat)
    coefs = ls_limit_coefficients(weights, theta_hat, a_hat, n, h, tol=0.0)
    # the limit law depends on the process only through (theta, alpha)
    law = asy.asymptotic_law(ProcessModel.fbm(a_hat / 2.0, sigma2=theta_hat), weights, n_quad)
    mean_log_t = float(np.mean(np.log(report.delta * h * np.asarray(weights))))
    out = []
    for name, est, row in (
        ("alpha", a_hat, -coefs.u_vector),
        ("log_theta", lt_hat, _intercept_weights(coefs, mean_log_t)),
    ):
        sd, sign = _limit_sd(row, coefs, law)
        if sd == 0.0:
            warnings.warn(f"zero limit sd for {name}; interval has zero width",
                          DegenerateIntervalWarning, stacklevel=2)
        q_lo, q_hi, src = _std_quantiles(law, sign, level, tol)
        # est - true ~ rate * sd * Z_std, so true lies in est - rate*sd*[q_hi, q_lo]
        half = coefs.rate_factor * sd
        out.append(ConfidenceInterval(est - half * q_hi, est - half * q_lo, level, name,
                                      law.regime, src, half))
    return tuple(out)
