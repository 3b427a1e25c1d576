"""Process models, lag schemes and regime bookkeeping."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .errors import DomainError

#: Half-width of the band around alpha = 3/2 treated as the critical point.
CRITICAL_TOL = 1e-6


class Kind(str, enum.Enum):
    FBM = "fbm"
    IFOU = "ifou"


class Regime(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def c_hurst(H: float) -> float:
    """Spectral constant of standard fBm, sqrt(H Gamma(2H) sin(pi H) / pi)."""
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H}")
    return math.sqrt(H * math.gamma(2.0 * H) * math.sin(math.pi * H) / math.pi)


@dataclass(frozen=True)
class ProcessModel:
    """Gaussian stationary-increment position process.

    ``FBM`` is fractional Brownian motion with ``E X(t)^2 = sigma2 |t|^(2H)``.
    ``IFOU`` is the time integral of the stationary fractional
    Ornstein-Uhlenbeck velocity ``dV = -lam V dt + sqrt(sigma2) dB_H``.

    ``delta0``/``eps0`` are the short-range regularity constants of the
    spectral correction ``s(x)``.  For fBm ``s = 1`` so any positive value is
    admissible; for the ifOU, ``|s(x)|^2 = lam^2/(lam^2+x^2)`` gives
    ``||s|^2 - 1| <= x^2/lam^2`` and hence ``delta0 = 2``, ``eps0 = lam``.
    """

    kind: Kind
    hurst: float
    sigma2: float = 1.0
    lam: float = 1.0
    delta0: float = 2.0
    eps0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not 0.0 < self.hurst < 1.0:
            raise DomainError(f"hurst must lie in (0, 1), got {self.hurst}")
        if not self.sigma2 > 0.0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if self.kind is Kind.IFOU and not self.lam > 0.0:
            raise DomainError(f"ifOU relaxation rate must be positive, got {self.lam}")
        if not self.delta0 > 0.0:
            raise DomainError(f"delta0 must be positive, got {self.delta0}")
        if self.eps0 is None:
            object.__setattr__(
                self, "eps0", self.lam if self.kind is Kind.IFOU else math.inf
            )
        elif not self.eps0 > 0.0:
            raise DomainError(f"eps0 must be positive, got {self.eps0}")

    @classmethod
    def fbm(cls, hurst: float, sigma2: float = 1.0, delta0: float = 2.0) -> ProcessModel:
        return cls(Kind.FBM, hurst, sigma2=sigma2, delta0=delta0)

    @classmethod
    def ifou(cls, hurst: float, lam: float = 1.0, sigma2: float = 1.0) -> ProcessModel:
        return cls(Kind.IFOU, hurst, sigma2=sigma2, lam=lam)

    @property
    def alpha(self) -> float:
        return 2.0 * self.hurst

    @property
    def theta(self) -> float:
        """Diffusivity: ``E X(h)^2 / h^alpha -> theta`` as ``h -> inf``."""
        if self.kind is Kind.FBM:
            return self.sigma2
        return self.sigma2 / self.lam**2

    @property
    def c_alpha(self) -> float:
        return math.sqrt(self.theta) * c_hurst(self.hurst)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "H": self.hurst,
            "sigma2": self.sigma2,
            "lambda": self.lam,
            "delta0": self.delta0,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ProcessModel:
        unknown = set(d) - {"kind", "H", "sigma2", "lambda", "delta0"}
        if unknown:
            raise DomainError(f"unknown model keys: {sorted(unknown)}")
        try:
            kind = Kind(str(d["kind"]).lower())
            hurst = float(d["H"])
        except (KeyError, ValueError) as exc:
            raise DomainError(f"invalid model object: {exc}") from None
        return cls(
            kind,
            hurst,
            sigma2=float(d.get("sigma2", 1.0)),
            lam=float(d.get("lambda", 1.0)),
            delta0=float(d.get("delta0", 2.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ProcessModel:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LagScheme:
    """Lags ``h_k = w_k * h`` sharing one base lag ``h``."""

    base: int
    weights: tuple[float, ...]
    lags: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if int(self.base) != self.base or self.base < 1:
            raise DomainError(f"base lag must be a positive integer, got {self.base}")
        object.__setattr__(self, "base", int(self.base))
        w = tuple(float(x) for x in self.weights)
        if not w:
            raise DomainError("a lag scheme needs at least one lag")
        lags = []
        for wk in w:
            hk = wk * self.base
            if wk <= 0 or abs(hk - round(hk)) > 1e-9:
                raise DomainError(f"w*h must be a positive integer, got {wk}*{self.base}")
            lags.append(int(round(hk)))
        if any(b <= a for a, b in zip(lags, lags[1:])):
            raise DomainError(f"lags must be strictly increasing, got {lags}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lags", tuple(lags))

    @classmethod
    def from_lags(cls, lags) -> LagScheme:
        """Scheme with ``h`` equal to the smallest lag, so ``w_1 = 1``."""
        lags = [int(x) for x in lags]
        if not lags:
            raise DomainError("empty lag list")
        h = lags[0]
        if h < 1:
            raise DomainError(f"lags must be positive, got {lags}")
        return cls(h, tuple(x / h for x in lags))

    @property
    def m(self) -> int:
        return len(self.lags)

    def check_path_length(self, n: int) -> None:
        """Raise unless every lag fits a path ``X(0..n)``."""
        if self.lags[-1] > n - 1:
            raise DomainError(f"largest lag {self.lags[-1]} exceeds n-1 = {n - 1}")


def classify_regime(alpha: float, tol: float = CRITICAL_TOL) -> Regime:
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    if tol < 0:
        raise DomainError(f"tolerance must be non-negative, got {tol}")
    if abs(alpha - 1.5) <= tol:
        return Regime.CRITICAL
    return Regime.SUBCRITICAL if alpha < 1.5 else Regime.SUPERCRITICAL


def delta_exponent(model: ProcessModel) -> float:
    return min(model.alpha / 2.0, model.delta0 / 2.0)


@dataclass(frozen=True)
class A2Diagnostic:
    q1: float
    q2: float
    threshold: float

    @property
    def ok(self) -> bool:
        return max(self.q1, self.q2) <= self.threshold

    @property
    def flag(self) -> str:
        return "pass" if self.ok else "warn"


def check_a2_regime(n: int, h: int, delta: float, threshold: float = 1.0) -> A2Diagnostic:
    """Finite-n proxies for the lag-growth condition.

    ``q1 = h log^2(n) / n`` and ``q2 = n / h^(1 + delta/2)`` must both vanish
    asymptotically; at finite n we only warn when either exceeds
    ``threshold``.
    """
    if n < 2 or h < 1 or not delta > 0:
        raise DomainError(f"need n >= 2, h >= 1, delta > 0 (got {n}, {h}, {delta})")
    q1 = h * math.log(n) ** 2 / n
    q2 = n / h ** (1.0 + delta / 2.0)
    return A2Diagnostic(q1, q2, threshold)
