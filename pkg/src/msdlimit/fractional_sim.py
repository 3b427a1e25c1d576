"""Exact Gaussian simulation of fBm and integrated fOU paths.

All samplers use circulant embedding of a stationary covariance sequence
(FFT, O(n log n)), falling back to a dense Cholesky factor when the
embedding is not non-negative.  Randomness comes from a counter-based
Philox generator keyed by ``(seed, path_id, stream)``, so a replication is
reproducible independently of how replications are scheduled.
"""

from __future__ import annotations

import io
import math
import struct
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, linalg

from .errors import DomainError, NumericalError, UnsupportedModelError
from .model import Kind, ProcessModel

DEFAULT_QUAD_TOL = 1e-10
BINARY_MAGIC = b"MSDP"
BINARY_VERSION = 1

# relative size of a negative circulant eigenvalue that is treated as round-off
_EIG_TOL = 1e-10


def make_rng(seed: int, path_id: int = 0, stream: int = 0) -> np.random.Generator:
    if seed is None:
        raise DomainError("an explicit seed is required")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_id), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SamplePath:
    """Positions ``X(0), X(delta), ..., X(n delta)``."""

    values: np.ndarray
    delta: float = 1.0
    model: ProcessModel | None = None
    seed: int | None = None
    path_id: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise DomainError("a path needs at least two positions")
        if not self.delta > 0:
            raise DomainError(f"sampling interval must be positive, got {self.delta}")

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.values.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x\n")
        for t, x in zip(self.times, self.values):
            buf.write(f"{float(t)!r},{float(x)!r}\n")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        """``MSDP`` | version u8 | delta f64 | count u64 | values f64 (all LE)."""
        head = BINARY_MAGIC + struct.pack("<BdQ", BINARY_VERSION, self.delta, self.values.size)
        return head + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> SamplePath:
        if data[:4] != BINARY_MAGIC:
            raise DomainError("not an MSDP path file")
        version, delta, count = struct.unpack_from("<BdQ", data, 4)
        if version != BINARY_VERSION:
            raise DomainError(f"unsupported MSDP version {version}")
        off = 4 + struct.calcsize("<BdQ")
        values = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        return cls(values.astype(float), delta=delta)


@dataclass(frozen=True)
class IncrementArray:
    values: np.ndarray
    lag: int


def increments(path: SamplePath, h: int) -> IncrementArray:
    """``Y_i(h) = X(i+h) - X(i)`` for ``i = 1..n-h``."""
    n = path.n
    if int(h) != h or not 1 <= h <= n - 1:
        raise DomainError(f"lag must be an integer in [1, {n - 1}], got {h}")
    h = int(h)
    x = path.values
    return IncrementArray(x[1 + h :] - x[1 : n + 1 - h], h)


# ---------------------------------------------------------------------------
# fBm / fGn


def _fbm_cross(z, h1, h2, alpha, sigma2):
    z = np.asarray(z, dtype=float)
    a = np.abs
    return 0.5 * sigma2 * (
        a(z + h1) ** alpha - a(z + h1 - h2) ** alpha - a(z) ** alpha + a(z - h2) ** alpha
    )


def fgn_autocov(model: ProcessModel, z, h: int = 1, w1: float = 1.0, w2: float = 1.0):
    """``E[Y_{j+z}(w1 h) Y_j(w2 h)]`` for fBm, from the closed-form covariance."""
    if model.kind is not Kind.FBM:
        raise UnsupportedModelError("fgn_autocov is defined for fBm only")
    if h < 1:
        raise DomainError(f"base lag must be >= 1, got {h}")
    out = _fbm_cross(z, w1 * h, w2 * h, model.alpha, model.sigma2)
    return float(out) if np.ndim(out) == 0 else out


class CirculantSampler:
    """Draws a stationary Gaussian vector from its covariance ``c_0..c_L``.

    The first ``n <= L + 1`` entries of each draw have covariance exactly
    ``c_|i-j|``.
    """

    def __init__(self, cov: np.ndarray, n: int):
        cov = np.asarray(cov, dtype=float)
        L = cov.size - 1
        if n > L + 1 or n < 1:
            raise DomainError("covariance sequence shorter than requested sample")
        self.n = n
        self.chol = None
        if L == 0:
            self.sqrt_eig = None
            self.scale = math.sqrt(cov[0])
            return
        row = np.concatenate([cov, cov[-2:0:-1]])
        eig = np.fft.fft(row).real
        if eig.min() < -_EIG_TOL * eig.max():
            raise _EmbeddingFailed(float(eig.min() / eig.max()))
        self.sqrt_eig = np.sqrt(np.clip(eig, 0.0, None) / row.size)

    @classmethod
    def cholesky(cls, cov: np.ndarray, n: int) -> CirculantSampler:
        self = cls.__new__(cls)
        self.n = n
        idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        try:
            self.chol = linalg.cholesky(np.asarray(cov, float)[idx], lower=True)
        except linalg.LinAlgError as exc:
            raise NumericalError(f"covariance matrix is not positive definite: {exc}") from None
        return self

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.chol is not None:
            return self.chol @ rng.standard_normal(self.n)
        if self.sqrt_eig is None:
            return self.scale * rng.standard_normal(1)
        M = self.sqrt_eig.size
        z = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        return np.fft.fft(self.sqrt_eig * z).real[: self.n]


class _EmbeddingFailed(Exception):
    def __init__(self, min_eig):
        super().__init__(min_eig)
        self.min_eig = min_eig


def build_sampler(cov_fn, n: int, max_doublings: int = 3) -> CirculantSampler:
    """Circulant embedding with automatic padding, then Cholesky."""
    L = max(n, 1)
    for _ in range(max_doublings + 1):
        try:
            return CirculantSampler(cov_fn(L), n)
        except _EmbeddingFailed:
            L *= 2
    return CirculantSampler.cholesky(cov_fn(n - 1), n)


@lru_cache(maxsize=64)
def _fgn_sampler(hurst: float, sigma2: float, n: int) -> CirculantSampler:
    def cov(L):
        return _fbm_cross(np.arange(L + 1), 1.0, 1.0, 2.0 * hurst, sigma2)

    try:
        return CirculantSampler(cov(max(n, 1)), n)
    except _EmbeddingFailed as exc:  # pragma: no cover - fGn embeds for all H
        raise NumericalError(
            "negative circulant eigenvalue for fGn; this should be impossible", exc.min_eig
        ) from None


def simulate_fgn(model: ProcessModel, n: int, seed: int, path_id: int = 0) -> np.ndarray:
    """``n`` consecutive unit-lag increments of fBm."""
    if model.kind is not Kind.FBM:
        raise UnsupportedModelError("simulate_fgn requires an fBm model")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return _fgn_sampler(model.hurst, model.sigma2, int(n)).sample(make_rng(seed, path_id))


def _path_from_increments(dx: np.ndarray) -> np.ndarray:
    x = np.empty(dx.size + 1)
    x[0] = 0.0
    np.cumsum(dx, out=x[1:])
    return x


def simulate_fbm(model: ProcessModel, n: int, seed: int, path_id: int = 0, *, _noise=None) -> SamplePath:
    dx = simulate_fgn(model, n, seed, path_id) if _noise is None else np.asarray(_noise, float)
    return SamplePath(_path_from_increments(dx), 1.0, model, seed, path_id)


# ---------------------------------------------------------------------------
# fOU velocity and ifOU increments


def _spectral_amp(model: ProcessModel) -> float:
    H = model.hurst
    return model.sigma2 * math.gamma(2 * H + 1) * math.sin(math.pi * H)


def _cos_transform(g, z: float, H: float, tol: float):
    """``(1/pi) int_0^inf cos(z x) g(x) x^(1-2H) dx`` and an error estimate.

    The algebraic factor at the origin is handled by a Jacobi-weight rule on
    ``[0, a]``; the oscillatory tail by QUADPACK's Fourier integrator.
    """
    a = 1.0 if z <= 1.0 else math.pi / (2.0 * z)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        i1, e1 = integrate.quad(
            lambda x: math.cos(z * x) * g(x), 0.0, a, weight="alg",
            wvar=(1.0 - 2.0 * H, 0.0), epsabs=tol, epsrel=1e-12, limit=200,
        )
        f = lambda x: g(x) * x ** (1.0 - 2.0 * H)  # noqa: E731
        if z == 0.0:
            i2, e2 = integrate.quad(f, a, np.inf, epsabs=tol, epsrel=1e-12, limit=500)
        else:
            i2, e2 = integrate.quad(f, a, np.inf, weight="cos", wvar=z, epsabs=tol, limlst=400)
    return (i1 + i2) / math.pi, (e1 + e2) / math.pi


def _asymptotic_coefs(H: float, lam: float, sigma2: float, nmax: int = 12):
    """Coefficients ``a_n`` of ``gamma_V(s) ~ sum a_n s^(2H-2n)``."""
    coefs = []
    prod = 1.0
    for n in range(1, nmax + 2):
        for k in (2 * n - 2, 2 * n - 1):
            prod *= 2 * H - k
        coefs.append(0.5 * sigma2 * lam ** (-2 * n) * prod)
    return coefs


def _series_velocity(coefs, H, s):
    return sum(a * s ** (2 * H - 2 * (i + 1)) for i, a in enumerate(coefs))


def _series_increment(coefs, H, z):
    # integral of (1-|r|) s^p over s = z+r, r in [-1, 1]
    tot = 0.0
    for i, a in enumerate(coefs):
        p = 2 * H - 2 * (i + 1)
        q = p + 2
        tot += a * ((z + 1) ** q - 2 * z**q + (z - 1) ** q) / ((p + 1) * q)
    return tot


def _asymptotic_order(coefs, H, s, tol):
    """Smallest order whose first omitted term is below ``tol``, or None."""
    terms = [abs(a) * s ** (2 * H - 2 * (k + 1)) for k, a in enumerate(coefs)]
    for N in range(1, len(terms)):
        if terms[N] <= tol:
            return N
        if terms[N] > terms[N - 1]:
            return None  # divergent part of the asymptotic series
    return None


class _Cache:
    """Read-mostly memo; concurrent readers, exclusive insertion."""

    def __init__(self):
        self._d = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._d.get(key)

    def put(self, key, value):
        with self._lock:
            self._d.setdefault(key, value)
        return self._d[key]


_VEL_CACHE = _Cache()
_INC_CACHE = _Cache()


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    method: str  # "closed-form" | "quadrature" | "asymptotic(N)"


def _require_ifou(model):
    if model.kind is not Kind.IFOU:
        raise UnsupportedModelError("this operation requires an ifOU model")


def _model_key(model):
    return (model.hurst, model.lam, model.sigma2)


def fou_autocov_detail(model: ProcessModel, s: float, quad_tol: float = DEFAULT_QUAD_TOL) -> QuadResult:
    """Velocity covariance ``gamma_V(s)`` with provenance of the evaluation."""
    _require_ifou(model)
    if s < 0:
        raise DomainError("lag must be non-negative")
    if not quad_tol > 0:
        raise DomainError("quad_tol must be positive")
    key = (_model_key(model), float(s), quad_tol)
    hit = _VEL_CACHE.get(key)
    if hit is not None:
        return hit
    H, lam = model.hurst, model.lam
    if s == 0:
        res = QuadResult(model.sigma2 * math.gamma(2 * H + 1) * lam ** (-2 * H) / 2, 0.0, "closed-form")
        return _VEL_CACHE.put(key, res)
    N = None
    if H != 0.5:
        coefs = _asymptotic_coefs(H, lam, model.sigma2)
        N = _asymptotic_order(coefs, H, s, quad_tol)
    if N is not None:
        res = QuadResult(_series_velocity(coefs[:N], H, s), abs(coefs[N]) * s ** (2 * H - 2 * N - 2), f"asymptotic({N})")
    else:
        amp = _spectral_amp(model)
        val, err = _cos_transform(lambda x: 1.0 / (lam * lam + x * x), s, H, quad_tol / amp)
        err *= amp
        if err > 100 * quad_tol:
            raise NumericalError(f"fOU covariance quadrature did not converge at s={s}", err)
        res = QuadResult(amp * val, err, "quadrature")
    return _VEL_CACHE.put(key, res)


def fou_autocov(model: ProcessModel, s: float, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """Covariance ``Cov(V(t), V(t+s))`` of the stationary fOU velocity.

    Evaluated as the cosine transform of the spectral density
    ``sigma2 Gamma(2H+1) sin(pi H) |x|^(1-2H) / (lam^2 + x^2)`` divided by
    ``2 pi``, switching to the large-``s`` expansion once its first omitted
    term drops below ``quad_tol``.
    """
    return fou_autocov_detail(model, s, quad_tol).value


def ifou_increment_autocov(model: ProcessModel, z: int, quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``Cov(X(1)-X(0), X(z+1)-X(z))`` for the ifOU, exact up to ``quad_tol``."""
    _require_ifou(model)
    z = abs(int(z))
    key = (_model_key(model), z, quad_tol)
    hit = _INC_CACHE.get(key)
    if hit is not None:
        return hit
    H, lam = model.hurst, model.lam
    N = None
    if H != 0.5 and z >= 2:
        coefs = _asymptotic_coefs(H, lam, model.sigma2)
        N = _asymptotic_order(coefs, H, z - 1, quad_tol)
    if N is not None:
        val = _series_increment(coefs[:N], H, float(z))
    else:
        amp = _spectral_amp(model)
        # 2(1 - cos x)/x^2 written as sinc^2 to stay accurate near 0
        g = lambda x: np.sinc(x / (2 * math.pi)) ** 2 / (lam * lam + x * x)  # noqa: E731
        val, err = _cos_transform(g, float(z), H, quad_tol / amp)
        if amp * err > 100 * quad_tol:
            raise NumericalError(f"ifOU increment covariance did not converge at z={z}", amp * err)
        val *= amp
    return _INC_CACHE.put(key, val)


@lru_cache(maxsize=32)
def _ifou_increment_seq(hurst, lam, sigma2, L, quad_tol) -> np.ndarray:
    model = ProcessModel(Kind.IFOU, hurst, sigma2=sigma2, lam=lam)
    return np.array([ifou_increment_autocov(model, z, quad_tol) for z in range(L + 1)])


def ifou_increment_cov_seq(model: ProcessModel, L: int, quad_tol: float = DEFAULT_QUAD_TOL) -> np.ndarray:
    """``gamma_Y(0..L)`` for unit increments of the ifOU."""
    _require_ifou(model)
    return _ifou_increment_seq(model.hurst, model.lam, model.sigma2, int(L), quad_tol)


@lru_cache(maxsize=16)
def _ifou_sampler(hurst, lam, sigma2, n, quad_tol, method, oversample):
    model = ProcessModel(Kind.IFOU, hurst, sigma2=sigma2, lam=lam)
    if method == "exact":
        return build_sampler(lambda L: ifou_increment_cov_seq(model, L, quad_tol), n)
    d = 1.0 / oversample
    cov = lambda L: np.array([fou_autocov(model, j * d, quad_tol) for j in range(L + 1)])  # noqa: E731
    return build_sampler(cov, n * oversample + 1)


def simulate_ifou(
    model: ProcessModel,
    n: int,
    seed: int,
    path_id: int = 0,
    *,
    oversample: int = 1,
    method: str = "exact",
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> SamplePath:
    """Integrated fOU path ``X(0..n)`` started at the origin.

    ``method="exact"`` draws the unit increments of ``X`` from their exact
    covariance.  ``method="trapezoid"`` draws the stationary velocity on the
    grid ``j / oversample`` and integrates it with the trapezoidal rule; on a
    coarse grid this aliases the velocity spectrum and strongly inflates the
    MSD when ``H < 1/2``, so it is kept for comparison only.
    """
    _require_ifou(model)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if oversample < 1:
        raise DomainError(f"oversample must be >= 1, got {oversample}")
    if method not in ("exact", "trapezoid"):
        raise DomainError(f"unknown ifOU method {method!r}")
    sampler = _ifou_sampler(model.hurst, model.lam, model.sigma2, int(n), quad_tol, method, int(oversample))
    draw = sampler.sample(make_rng(seed, path_id))
    if method == "exact":
        x = _path_from_increments(draw)
    else:
        d = 1.0 / oversample
        steps = 0.5 * d * (draw[1:] + draw[:-1])
        x = _path_from_increments(steps)[::oversample]
    return SamplePath(x, 1.0, model, seed, path_id)


def simulate_path(model: ProcessModel, n: int, seed: int, path_id: int = 0, **kw) -> SamplePath:
    if model.kind is Kind.FBM:
        return simulate_fbm(model, n, seed, path_id)
    return simulate_ifou(model, n, seed, path_id, **kw)
