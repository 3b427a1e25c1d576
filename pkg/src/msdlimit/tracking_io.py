"""Ingestion of tracking CSV files and per-axis MSD analysis."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IngestError, RegimeError
from .estimator import EstimateReport, fit_loglog
from .fractional_sim import SamplePath
from .inference import ConfidenceInterval, confidence_interval
from .model import LagScheme, Regime, classify_regime
from .msd_core import msd_curve

DEFAULT_GRID_RTOL = 1e-6


class CriticalRegimeWarning(UserWarning):
    """The fitted exponent is too close to 3/2 for an interval."""


@dataclass
class TrackingRecord:
    times: np.ndarray
    coords: dict
    particle_id: str = "0"
    delta: float = field(init=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coords = {k: np.asarray(v, dtype=float) for k, v in self.coords.items()}
        if self.times.size < 2:
            raise DomainError(f"particle {self.particle_id}: need at least two frames")
        if any(v.shape != self.times.shape for v in self.coords.values()):
            raise DomainError(f"particle {self.particle_id}: axes differ in length")
        self.delta = float((self.times[-1] - self.times[0]) / (self.times.size - 1))

    @property
    def axes(self) -> list:
        return list(self.coords)

    def path(self, axis: str) -> SamplePath:
        return SamplePath(self.coords[axis], self.delta, seed=None, path_id=0)


def _check_grid(times, rows, rtol, pid):
    dt = np.diff(times)
    if np.any(dt <= 0):
        i = int(np.argmax(dt <= 0)) + 1
        raise IngestError(f"particle {pid}: time is not strictly increasing", rows[i])
    # median step so that a single gap is flagged at its own row
    step = float(np.median(dt))
    bad = np.abs(dt - step) > rtol * abs(step)
    if np.any(bad):
        i = int(np.argmax(bad)) + 1
        raise IngestError(f"particle {pid}: non-uniform time grid (step {float(dt[i - 1])!r}, "
                          f"expected {float(step)!r})", rows[i])


def ingest_csv(source, time_col: str = "t", axis_cols=("x",), id_col: str | None = None,
               delimiter: str = ",", grid_rtol: float = DEFAULT_GRID_RTOL) -> list:
    """Read one ``TrackingRecord`` per particle.

    ``source`` is a path or a text stream with a header row.  Row numbers in
    errors count the header as row 1.  Particles keep their first-seen order.
    """
    if isinstance(source, (str, bytes)) and not (isinstance(source, str) and "\n" in source):
        with open(source, newline="") as fh:
            return ingest_csv(fh, time_col, axis_cols, id_col, delimiter, grid_rtol)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source, delimiter=delimiter)
    if reader.fieldnames is None:
        raise IngestError("empty file", 1)
    header = [f.strip() for f in reader.fieldnames]
    reader.fieldnames = header
    axis_cols = tuple(axis_cols)
    need = [time_col, *axis_cols] + ([id_col] if id_col else [])
    missing = [c for c in need if c not in header]
    if missing:
        raise IngestError(f"missing columns {missing}; header is {header}", 1)
    data: dict = {}
    for lineno, row in enumerate(reader, start=2):
        pid = row[id_col].strip() if id_col else "0"
        try:
            t = float(row[time_col])
            xs = [float(row[c]) for c in axis_cols]
        except (TypeError, ValueError):
            raise IngestError("non-numeric value", lineno) from None
        if not math.isfinite(t) or not all(math.isfinite(x) for x in xs):
            raise IngestError("NaN or infinite value", lineno)
        d = data.setdefault(pid, {"t": [], "rows": [], "x": [[] for _ in axis_cols]})
        d["t"].append(t)
        d["rows"].append(lineno)
        for lst, x in zip(d["x"], xs):
            lst.append(x)
    if not data:
        raise IngestError("no data rows", 2)
    out = []
    for pid, d in data.items():
        times = np.asarray(d["t"])
        if times.size < 2:
            raise IngestError(f"particle {pid}: only one frame", d["rows"][0])
        _check_grid(times, d["rows"], grid_rtol, pid)
        out.append(TrackingRecord(times, dict(zip(axis_cols, d["x"])), pid))
    return out


@dataclass
class AxisAnalysis:
    axis: str
    report: EstimateReport
    regime: Regime
    alpha_ci: ConfidenceInterval | None
    log_theta_ci: ConfidenceInterval | None
    warning: str | None = None

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "estimate": self.report.to_dict(),
            "regime": self.regime.value,
            "alpha_ci": None if self.alpha_ci is None else self.alpha_ci.to_dict(),
            "log_theta_ci": None if self.log_theta_ci is None else self.log_theta_ci.to_dict(),
            "warning": self.warning,
        }


def analyze_path(path: SamplePath, scheme: LagScheme, level: float = 0.95, axis: str = "x",
                 regime_tol: float = 1e-2) -> AxisAnalysis:
    report = fit_loglog(msd_curve(path, scheme))
    a = report.alpha_hat
    regime = classify_regime(min(max(a, 1e-12), 2.0 - 1e-12), regime_tol)
    try:
        ci_a, ci_t = confidence_interval(report, path.n, scheme.base, level, scheme.weights,
                                         regime_tol=regime_tol)
    except RegimeError as exc:
        warnings.warn(str(exc), CriticalRegimeWarning, stacklevel=2)
        return AxisAnalysis(axis, report, regime, None, None, str(exc))
    return AxisAnalysis(axis, report, regime, ci_a, ci_t)


def analyze_track(record: TrackingRecord, scheme: LagScheme, level: float = 0.95) -> list:
    """Fit and intervals for each axis separately."""
    return [analyze_path(record.path(ax), scheme, level, ax) for ax in record.axes]


def export_csv(paths: dict, delta: float = 1.0, particle_id: str | None = None) -> str:
    """Inverse of :func:`ingest_csv` for axis-keyed position arrays."""
    axes = list(paths)
    n = len(paths[axes[0]])
    buf = io.StringIO()
    cols = (["id"] if particle_id is not None else []) + ["t"] + axes
    buf.write(",".join(cols) + "\n")
    for i in range(n):
        vals = [particle_id] if particle_id is not None else []
        vals.append(repr(delta * i))
        vals += [repr(float(paths[a][i])) for a in axes]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()
