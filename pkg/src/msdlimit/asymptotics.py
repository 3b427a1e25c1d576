"""Limit-law constants: rates, the Gaussian covariance and Rosenblatt numerics."""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special
from scipy.special import binom

from .errors import DomainError, NumericalError, RegimeError
from .model import CRITICAL_TOL, ProcessModel, Regime, c_hurst, classify_regime

DEFAULT_N_QUAD = 256
DEFAULT_S_MAX = 12
# eigenvalues carried explicitly in the CF product; the rest enter as a Gaussian factor
N_EXPLICIT = 1024


def c_H(H: float) -> float:
    return c_hurst(H)


def tau(model: ProcessModel) -> float:
    """Tail constant of the increment covariance, ``(C_alpha/C_H)^2 alpha(alpha-1)/2``."""
    a = model.alpha
    return model.theta * a * (a - 1.0) / 2.0


def psi(alpha: float) -> float:
    """Scale of the standardized Rosenblatt law."""
    if not 1.5 < alpha < 2.0:
        raise RegimeError(f"psi is defined for 3/2 < alpha < 2, got {alpha}")
    return math.sqrt((2.0 * alpha - 3.0) * (alpha - 1.0) / 2.0)


@dataclass(frozen=True)
class NormalizationPair:
    eta: float
    zeta_per_lag: np.ndarray
    regime: Regime


def zeta_fn(alpha: float, h, regime: Regime):
    h = np.asarray(h, dtype=float)
    if regime is Regime.SUBCRITICAL:
        return h ** (alpha + 0.5)
    return h**2


def eta_fn(alpha: float, n: float, regime: Regime) -> float:
    if regime is Regime.SUBCRITICAL:
        return math.sqrt(n)
    if regime is Regime.CRITICAL:
        return math.sqrt(n * math.log(n))
    return n ** (alpha - 1.0)


def normalization(alpha: float, n: int, h, tol: float = CRITICAL_TOL) -> NormalizationPair:
    regime = classify_regime(alpha, tol)
    h_arr = np.atleast_1d(np.asarray(h, dtype=float))
    if n < 2 or np.any(h_arr < 1):
        raise DomainError(f"need n >= 2 and h >= 1, got n={n}, h={h}")
    return NormalizationPair(eta_fn(alpha, n, regime), zeta_fn(alpha, h_arr, regime), regime)


# ---------------------------------------------------------------- Gaussian Sigma


@dataclass(frozen=True)
class SigmaMatrix:
    entries: np.ndarray
    alpha: float
    weights: tuple

    def to_dict(self) -> dict:
        return {
            "entries": self.entries.tolist(),
            "alpha": self.alpha,
            "weights": list(self.weights),
        }


def _g_series(alpha, w1, w2, order=40):
    """Coefficients ``b_j`` with ``G(u) = sum_j b_j u^(alpha-j)`` for large ``u``."""
    j = np.arange(order)
    shifts = w1 ** j - (w1 - w2) ** j - (0.0 ** j) + (-w2) ** j
    return 0.5 * binom(alpha, j) * shifts


def _g_direct(u, alpha, w1, w2):
    return 0.5 * (abs(u + w1) ** alpha - abs(u + w1 - w2) ** alpha
                  - abs(u) ** alpha + abs(u - w2) ** alpha)


def _sq_integral(alpha, w1, w2, quad_tol):
    # G is symmetric about c, so integrate over [c, inf) and double
    c = 0.5 * (w2 - w1)
    L = c + 4.0 * max(w1, w2)
    pts = sorted({p for p in (0.0, w2, w2 - w1, -w1) if c < p < L})
    val, err = integrate.quad(
        lambda u: _g_direct(u, alpha, w1, w2) ** 2, c, L,
        points=pts or None, epsabs=quad_tol, epsrel=quad_tol, limit=400,
    )
    if err > 100 * quad_tol * max(1.0, abs(val)):
        raise NumericalError("Sigma quadrature did not converge", err)
    # termwise tail: G^2 = sum_{j,l} b_j b_l u^(2 alpha - j - l)
    b = _g_series(alpha, w1, w2)
    j = np.arange(b.size)
    jl = j[:, None] + j[None, :]
    bb = np.outer(b, b)
    mask = (jl >= 4) & (bb != 0)
    e = 2.0 * alpha - jl[mask] + 1.0
    tail = float(np.sum(bb[mask] * L ** e / (-e)))
    return 2.0 * (val + tail)


def sigma_gaussian(model: ProcessModel, weights, quad_tol: float = 1e-10) -> SigmaMatrix:
    """Limit covariance of the normalized MSD vector for ``alpha < 3/2``."""
    a = model.alpha
    if classify_regime(a) is not Regime.SUBCRITICAL:
        raise RegimeError(f"sigma_gaussian needs alpha < 3/2, got {a}")
    w = np.asarray(weights, dtype=float)
    if w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise DomainError("weights must be positive and strictly increasing")
    m = w.size
    S = np.empty((m, m))
    for i in range(m):
        for k in range(i, m):
            val = _sq_integral(a, w[i], w[k], quad_tol)
            S[i, k] = S[k, i] = 2.0 * (w[i] * w[k]) ** (-a - 0.5) * model.theta**2 * val
    S = 0.5 * (S + S.T)
    return SigmaMatrix(S, a, tuple(w.tolist()))


def sigma_frequency(model: ProcessModel, weights, quad_tol: float = 1e-10) -> SigmaMatrix:
    """Frequency-domain form of :func:`sigma_gaussian`, kept as a cross-check.

    By Parseval, ``int G^2 du = 2 pi C_H^4 int |e^{i w1 x}-1|^2 |e^{i w2 x}-1|^2
    |x|^(-2 alpha - 2) dx``; the ``2 pi`` here is the one the Brownian
    oracle ``Sigma_11 = 4/3`` confirms.
    """
    a = model.alpha
    if classify_regime(a) is not Regime.SUBCRITICAL:
        raise RegimeError(f"sigma_frequency needs alpha < 3/2, got {a}")
    w = np.asarray(weights, dtype=float)
    ch4 = c_hurst(model.hurst) ** 4
    m = w.size
    S = np.empty((m, m))
    for i in range(m):
        for k in range(i, m):
            w1, w2 = w[i], w[k]
            f = lambda x: ((2 - 2 * math.cos(w1 * x)) * (2 - 2 * math.cos(w2 * x))  # noqa: E731
                           * x ** (-2 * a - 2))
            edges = np.concatenate([[0.0], np.arange(1, 201) * math.pi / max(w1, w2)])
            val = sum(integrate.quad(f, lo, hi, epsabs=quad_tol, limit=200)[0]
                      for lo, hi in zip(edges[:-1], edges[1:]))
            # tail where the cosines average out: mean of the product is 4 + 2 delta(w1 = w2)
            X = edges[-1]
            tail = (4.0 + (2.0 if w1 == w2 else 0.0)) * X ** (-2 * a - 1) / (2 * a + 1)
            sq = 2.0 * math.pi * ch4 * 2.0 * (val + tail)
            S[i, k] = S[k, i] = 2.0 * (w1 * w2) ** (-a - 0.5) * model.theta**2 * sq
    return SigmaMatrix(S, a, tuple(w.tolist()))


def sigma_critical(model: ProcessModel, m: int = 1) -> SigmaMatrix:
    a = model.alpha
    if classify_regime(a) is not Regime.CRITICAL:
        raise RegimeError(f"sigma_critical needs alpha = 3/2, got {a}")
    return SigmaMatrix(np.full((m, m), 4.0 * tau(model) ** 2), a, tuple(range(1, m + 1)))


# ---------------------------------------------------------------- Rosenblatt spectrum


def _cell_phi(u, p):
    return np.abs(u) ** (p + 2.0) / ((p + 1.0) * (p + 2.0))


def _galerkin_spectrum(alpha, N):
    """Eigenvalues of the kernel projected on N uniform cells (exact cell integrals)."""
    p = alpha - 2.0
    e = np.linspace(0.0, 1.0, N + 1)
    a = e[:-1]
    b = e[1:]
    A = (_cell_phi(b[:, None] - a[None, :], p) - _cell_phi(b[:, None] - b[None, :], p)
         - _cell_phi(a[:, None] - a[None, :], p) + _cell_phi(a[:, None] - b[None, :], p))
    A *= N  # divide by sqrt(w_i w_j) with w = 1/N
    try:
        lam = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigen-decomposition failed: {exc}") from None
    return lam[::-1]


def _tail_constant(alpha):
    return 2.0 * special.gamma(alpha - 1.0) * math.sin(math.pi * (2.0 - alpha) / 2.0)


def _tail_eigs(alpha, k):
    """Asymptotic eigenvalues ``C (pi (k - (alpha+1)/4))^(1-alpha)``."""
    return _tail_constant(alpha) * (math.pi * (k - (alpha + 1.0) / 4.0)) ** (1.0 - alpha)


def _tail_power_sum(alpha, s, k0):
    """``sum_{k > k0} tail_eig(k)^s`` via the Hurwitz zeta function."""
    base = (_tail_constant(alpha) * math.pi ** (1.0 - alpha)) ** s
    return base * float(special.zeta(s * (alpha - 1.0), k0 + 1.0 - (alpha + 1.0) / 4.0))


@dataclass
class RosenblattParams:
    """Spectrum of the kernel ``|x-y|^(alpha-2)`` on ``[0,1]``.

    ``eigenvalues`` holds the leading eigenvalues (Richardson-refined) followed
    by asymptotic tail eigenvalues up to ``N_EXPLICIT``; ``k_refined`` marks the
    split.  ``cs`` maps ``s`` to ``c_s`` including the infinite tail.
    """

    alpha: float
    tau: float
    psi: float
    eigenvalues: np.ndarray
    k_refined: int
    n_quad: int
    cs: dict
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def c2(self) -> float:
        return self.cs[2]

    @property
    def remainder_c2(self) -> float:
        """``c_2`` mass beyond the explicit eigenvalues."""
        return max(self.cs[2] - float(np.sum(self.eigenvalues**2)), 0.0)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "psi": self.psi,
            "n_quad": self.n_quad,
            "cs": {str(s): v for s, v in sorted(self.cs.items())},
            "leading_eigenvalues": self.eigenvalues[: min(10, self.eigenvalues.size)].tolist(),
        }


_spec_lock = threading.Lock()
_spec_cache: dict = {}


def rosenblatt_eigenvalues(alpha: float, n_quad: int = DEFAULT_N_QUAD) -> np.ndarray:
    """Leading ``n_quad // 16`` kernel eigenvalues, sorted descending.

    A plain Gauss-Legendre Nystrom matrix converges very slowly because of the
    diagonal singularity, so the operator is projected on uniform cells with
    exact cell integrals, and grids ``n_quad`` and ``n_quad/2`` are combined by
    Richardson extrapolation (error ``O(N^-2)``).  Only the leading block is
    returned: higher modes are under-resolved on the grid and are replaced by
    their asymptotic form inside :func:`rosenblatt_params`.
    """
    if not 1.5 < alpha < 2.0:
        raise RegimeError(f"Rosenblatt kernel needs 3/2 < alpha < 2, got {alpha}")
    if int(n_quad) != n_quad or n_quad < 16:
        raise DomainError(f"n_quad must be an integer >= 16, got {n_quad}")
    n_quad = int(n_quad)
    key = (float(alpha), n_quad)
    with _spec_lock:
        hit = _spec_cache.get(key)
    if hit is not None:
        return hit.copy()
    K = n_quad // 16
    fine = _galerkin_spectrum(alpha, n_quad)[:K]
    coarse = _galerkin_spectrum(alpha, n_quad // 2)[:K]
    lam = np.sort((4.0 * fine - coarse) / 3.0)[::-1]
    with _spec_lock:
        _spec_cache[key] = lam
    return lam.copy()


def rosenblatt_params(model_or_alpha, n_quad: int = DEFAULT_N_QUAD,
                      s_max: int = DEFAULT_S_MAX) -> RosenblattParams:
    if isinstance(model_or_alpha, ProcessModel):
        alpha = model_or_alpha.alpha
        t = tau(model_or_alpha)
    else:
        alpha = float(model_or_alpha)
        t = alpha * (alpha - 1.0) / 2.0
    lead = rosenblatt_eigenvalues(alpha, n_quad)
    K = lead.size
    k = np.arange(K + 1, max(N_EXPLICIT, K) + 1, dtype=float)
    eig = np.concatenate([lead, _tail_eigs(alpha, k)])
    cs = {}
    for s in range(2, s_max + 1):
        cs[s] = float(np.sum(lead**s)) + _tail_power_sum(alpha, s, K)
    return RosenblattParams(alpha, t, psi(alpha), eig, K, n_quad, cs)


def rosenblatt_cs(params: RosenblattParams, s: int) -> float:
    if int(s) != s or s < 2:
        raise DomainError(f"s must be an integer >= 2, got {s}")
    s = int(s)
    if s not in params.cs:
        K = params.k_refined
        params.cs[s] = (float(np.sum(params.eigenvalues[:K] ** s))
                        + _tail_power_sum(params.alpha, s, K))
    return params.cs[s]


def _log_cf(params, t, scale):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t.shape, dtype=complex)
    lam = params.eigenvalues
    flat = t.ravel()
    res = out.ravel()
    step = max(1, 2**22 // lam.size)
    for i in range(0, flat.size, step):
        u = scale * flat[i: i + step, None]
        z = 2j * u * lam[None, :]
        res[i: i + step] = np.sum(-0.5 * z - 0.5 * np.log1p(-z), axis=1)
    res -= (scale * flat) ** 2 * params.remainder_c2
    return res.reshape(t.shape)


def rosenblatt_cf(params: RosenblattParams, t, scale: float | None = None):
    """``E exp(i t scale sum lambda_k (xi_k^2 - 1))`` by the eigenvalue product.

    ``scale`` defaults to ``psi(alpha)`` (the standardized law).
    """
    scale = params.psi if scale is None else float(scale)
    val = np.exp(_log_cf(params, t, scale))
    return complex(val[0]) if np.ndim(t) == 0 else val


def _gl_panels(T, P, order=16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, T, P + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _cf_grid(params, scale, tol, P):
    key = ("grid", scale, tol, P)
    hit = params._cache.get(key)
    if hit is not None:
        return hit
    tkey = ("T", scale, tol)
    T = params._cache.get(tkey)
    if T is None:
        T = 1.0
        while abs(rosenblatt_cf(params, T, scale)) > 1e-3 * tol * T:
            T *= 2.0
            if T > 1e6:
                raise NumericalError("characteristic function does not decay")
        params._cache[tkey] = T
    nodes, weights = _gl_panels(T, P)
    phi = np.exp(_log_cf(params, nodes, scale))
    hit = (nodes, weights * phi / nodes)
    params._cache[key] = hit
    return hit


def _gil_pelaez(params, x, scale, tol, P):
    nodes, wphi = _cf_grid(params, scale, tol, P)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    for i in range(0, x.size, 256):
        xs = x[i: i + 256]
        ph = np.exp(-1j * xs[:, None] * nodes[None, :])
        out[i: i + 256] = 0.5 - (ph * wphi[None, :]).imag.sum(axis=1) / math.pi
    return out


def rosenblatt_cdf(params: RosenblattParams, x, scale: float | None = None, tol: float = 1e-8):
    """CDF by Gil-Pelaez inversion on composite Gauss-Legendre panels.

    The panel count doubles until two successive estimates agree to ``tol``.
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    scale = params.psi if scale is None else float(scale)
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    xs = np.asarray(x, dtype=float)
    P = params._cache.get(("P", scale, tol), 32)
    prev = _gil_pelaez(params, xs, scale, tol, P)
    while True:
        cur = _gil_pelaez(params, xs, scale, tol, 2 * P)
        diff = float(np.max(np.abs(cur - prev)))
        if diff <= tol:
            break
        P *= 2
        if P > 2**15:
            raise NumericalError("Gil-Pelaez inversion did not converge", diff)
        prev = cur
    params._cache[("P", scale, tol)] = max(P, params._cache.get(("P", scale, tol), 32))
    cur = np.clip(cur, 0.0, 1.0)
    return float(cur[0]) if xs.ndim == 0 else cur


def rosenblatt_quantile(params: RosenblattParams, p: float, scale: float | None = None,
                        tol: float = 1e-8) -> float:
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    scale = params.psi if scale is None else float(scale)
    sd = scale * math.sqrt(2.0 * params.c2)
    lo, hi = -sd, sd
    while rosenblatt_cdf(params, lo, scale, tol) > p:
        lo -= 2.0 * sd
    while rosenblatt_cdf(params, hi, scale, tol) < p:
        hi += 2.0 * sd
    return float(optimize.brentq(
        lambda x: rosenblatt_cdf(params, x, scale, tol) - p, lo, hi, xtol=tol,
    ))


def sample_rosenblatt(params: RosenblattParams, size: int, rng, scale: float | None = None):
    """Draws of ``scale * sum lambda_k (xi_k^2 - 1)`` over the explicit spectrum,
    plus a Gaussian stand-in for the remaining tail."""
    scale = params.psi if scale is None else float(scale)
    lam = params.eigenvalues
    out = np.empty(size)
    for i in range(0, size, 1024):
        k = min(1024, size - i)
        xi = rng.standard_normal((k, lam.size))
        out[i: i + k] = (xi * xi - 1.0) @ lam
    out += math.sqrt(2.0 * params.remainder_c2) * rng.standard_normal(size)
    return scale * out


# ---------------------------------------------------------------- law bundle


@dataclass
class AsymptoticLaw:
    """Everything needed to describe the limit of the normalized MSD vector."""

    model: ProcessModel
    weights: tuple
    regime: Regime
    tau: float
    sigma: SigmaMatrix | None = None
    rosenblatt: RosenblattParams | None = None

    def to_dict(self) -> dict:
        d = {
            "model": self.model.to_dict(),
            "weights": list(self.weights),
            "regime": self.regime.value,
            "tau": self.tau,
        }
        if self.sigma is not None:
            d["sigma"] = self.sigma.entries.tolist()
        if self.rosenblatt is not None:
            d["rosenblatt"] = self.rosenblatt.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def asymptotic_law(model: ProcessModel, weights=(1.0,), n_quad: int = DEFAULT_N_QUAD,
                   quad_tol: float = 1e-10) -> AsymptoticLaw:
    regime = classify_regime(model.alpha)
    w = tuple(float(x) for x in weights)
    law = AsymptoticLaw(model, w, regime, tau(model))
    if regime is Regime.SUBCRITICAL:
        law.sigma = sigma_gaussian(model, w, quad_tol)
    elif regime is Regime.CRITICAL:
        law.sigma = sigma_critical(model, len(w))
    else:
        law.rosenblatt = rosenblatt_params(model, n_quad)
    return law
