"""Pathwise mean squared displacement and its exact moments."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, NumericalError
from .fractional_sim import (
    DEFAULT_QUAD_TOL,
    SamplePath,
    fgn_autocov,
    fou_autocov,
    ifou_increment_cov_seq,
)
from .model import Kind, LagScheme, ProcessModel


def compensated_sum(x, axis: int = -1):
    """Sum with error-free pairwise transformations.

    Each pairwise addition ``a + b`` is split into the rounded sum and its
    exact rounding error (Knuth's TwoSum); the errors are accumulated
    separately and added back at the end, giving a result as accurate as
    summation in doubled working precision.
    """
    x = np.moveaxis(np.asarray(x, dtype=float), axis, -1)
    corr = np.zeros(x.shape[:-1])
    if x.shape[-1] == 0:
        return corr
    while x.shape[-1] > 1:
        if x.shape[-1] % 2:
            pad = np.zeros(x.shape[:-1] + (1,))
            x = np.concatenate([x, pad], axis=-1)
        a = x[..., 0::2]
        b = x[..., 1::2]
        s = a + b
        bv = s - a
        err = (a - (s - bv)) + (b - bv)
        corr = corr + err.sum(axis=-1)
        x = s
    out = x[..., 0] + corr
    return float(out) if out.ndim == 0 else out


@dataclass
class MsdCurve:
    lags: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    delta: float = 1.0
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)

    @property
    def times(self) -> np.ndarray:
        """Physical lag times ``delta * h_k``."""
        return self.delta * self.lags

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lag,msd,count\n")
        for h, v, c in zip(self.lags, self.values, self.counts):
            buf.write(f"{int(h)},{float(v)!r},{int(c)}\n")
        return buf.getvalue()

    def loglog_pairs(self) -> np.ndarray:
        """Columns ``log(delta h_k)``, ``log msd``; consumed by the fit and plots."""
        with np.errstate(divide="ignore"):
            return np.column_stack([np.log(self.times), np.log(self.values)])


def _check_lag(n, h):
    if int(h) != h or not 1 <= h <= n - 1:
        raise DomainError(f"lag must be an integer in [1, {n - 1}], got {h}")


def msd(path: SamplePath, h: int) -> float:
    """``(1/(n-h)) sum_{j=1}^{n-h} (X(j+h) - X(j))^2``."""
    n = path.n
    _check_lag(n, h)
    h = int(h)
    x = path.values
    d = x[1 + h :] - x[1 : n + 1 - h]
    return compensated_sum(d * d) / (n - h)


def msd_curve(path: SamplePath, scheme: LagScheme) -> MsdCurve:
    n = path.n
    scheme.check_path_length(n)
    lags = np.asarray(scheme.lags)
    x = path.values
    # pad all lags into one (m, n-h_1) block so the compensated sum runs once
    width = n - lags[0]
    sq = np.zeros((lags.size, width))
    for k, h in enumerate(lags):
        d = x[1 + h :] - x[1 : n + 1 - h]
        sq[k, : d.size] = d * d
    counts = n - lags
    values = compensated_sum(sq) / counts
    src = {"n": n, "seed": path.seed, "path_id": path.path_id}
    return MsdCurve(lags, np.atleast_1d(values), counts, path.delta, src)


def exact_msd_moment(model: ProcessModel, h, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``E X(h)^2``.

    fBm: ``sigma2 h^(2H)``.  ifOU at integer ``h``: the exact double sum of the
    unit-increment covariances; at non-integer ``h``:
    ``2 int_0^h (h-u) gamma_V(u) du`` by adaptive quadrature.
    """
    if h < 0:
        raise DomainError(f"lag must be non-negative, got {h}")
    if h == 0:
        return 0.0
    if model.kind is Kind.FBM:
        return model.sigma2 * float(h) ** model.alpha
    if float(h).is_integer():
        h = int(h)
        g = ifou_increment_cov_seq(model, h - 1, quad_tol)
        w = 2.0 * (h - np.arange(h, dtype=float))
        w[0] = h
        return compensated_sum(w * g)
    return _ifou_msd_time_domain(model, float(h), quad_tol)


def _ifou_msd_time_domain(model, h, quad_tol):
    val, err = integrate.quad(
        lambda u: (h - u) * fou_autocov(model, u, quad_tol), 0.0, h,
        epsabs=quad_tol * max(h, 1.0), limit=500,
    )
    if err > 1e3 * quad_tol * max(h, 1.0):
        raise NumericalError("ifOU MSD quadrature did not converge", err)
    return 2.0 * val


def increment_cross_cov(model: ProcessModel, z: int, h: int, w1: float = 1.0, w2: float = 1.0,
                        quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``E[Y_{j+z}(w1 h) Y_j(w2 h)]`` for either model."""
    if model.kind is Kind.FBM:
        return fgn_autocov(model, z, h, w1, w2)
    h1, h2 = w1 * h, w2 * h
    if not (float(h1).is_integer() and float(h2).is_integer()) or h1 < 1 or h2 < 1:
        raise DomainError("w*h must be positive integers")
    h1, h2, z = int(h1), int(h2), int(z)
    # Y(h1), Y(h2) are sums of unit increments; count the pairs at each gap
    counts = np.convolve(np.ones(h1), np.ones(h2))
    gaps = z + np.arange(-(h2 - 1), h1)
    g = ifou_increment_cov_seq(model, int(np.abs(gaps).max()), quad_tol)
    return compensated_sum(counts * g[np.abs(gaps)])
