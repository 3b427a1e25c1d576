"""Seeded, parallel Monte Carlo experiments.

Every replication draws its own seed from ``(master_seed, cell_id, rep)``, so
records do not depend on how replications are spread over workers.  Records
are kept in long format ``cell,rep,seed,key,value`` and summaries are always
recomputed from the sorted records.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import asymptotics as asy
from .errors import DomainError
from .estimator import fit_loglog
from .fractional_sim import simulate_path
from .model import Kind, LagScheme, ProcessModel, Regime, classify_regime
from .msd_core import exact_msd_moment, msd_curve

OUTPUTS = ("estimates", "msd", "normalized")

TABLE1_NS = (2**9, 2**10, 2**11, 2**12)
TABLE1_HURSTS = (0.25, 0.9)
# consecutive lags 2..128 and the two-lag pair {2, 128}
TABLE1_SCHEMES = {
    "consecutive": LagScheme.from_lags(range(2, 129)),
    "pair": LagScheme.from_lags([2, 128]),
}
TABLE2_SCHEMES = {f"lags_{2**k}_{2**(k+2)}": LagScheme(2**k, (1.0, 2.0, 4.0)) for k in (3, 4, 5, 6)}


def derive_seed(master_seed: int, cell_id: str, rep: int) -> int:
    """64-bit seed from a hash of ``(master_seed, cell_id, rep)``."""
    msg = f"{int(master_seed)}:{cell_id}:{int(rep)}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass
class ExperimentConfig:
    model: ProcessModel
    n: int
    replications: int
    schemes: dict
    master_seed: int
    outputs: tuple = ("estimates",)
    workers: int = 1
    cell_id: str | None = None
    sim_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 1:
            raise DomainError(f"replications must be a positive integer, got {self.replications}")
        if self.master_seed is None:
            raise DomainError("master_seed is required")
        if isinstance(self.schemes, LagScheme):
            self.schemes = {"scheme": self.schemes}
        if not self.schemes:
            raise DomainError("at least one lag scheme is required")
        for s in self.schemes.values():
            s.check_path_length(self.n)
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise DomainError(f"unknown outputs {sorted(bad)}; choose from {OUTPUTS}")
        if self.cell_id is None:
            self.cell_id = default_cell_id(self.model, self.n)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        try:
            model = ProcessModel.from_dict(d["model"])
            sch = d["scheme"]
            if isinstance(sch, dict) and not {"lags", "base"} & set(sch):
                schemes = {k: _scheme_from_obj(v) for k, v in sch.items()}
            else:
                schemes = {"scheme": _scheme_from_obj(sch)}
            return cls(
                model, int(d["n"]), int(d["replications"]), schemes, int(d["master_seed"]),
                tuple(d.get("outputs", ["estimates"])), int(d.get("workers", 1)),
                d.get("cell_id"), dict(d.get("sim_options", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"invalid experiment config: {exc!r}") from None


def _scheme_from_obj(obj) -> LagScheme:
    if isinstance(obj, dict):
        if "lags" in obj:
            return LagScheme.from_lags(obj["lags"])
        return LagScheme(int(obj["base"]), tuple(obj["weights"]))
    return LagScheme.from_lags(obj)


def default_cell_id(model: ProcessModel, n: int) -> str:
    lam = f"|lam={model.lam!r}" if model.kind is Kind.IFOU else ""
    return f"{model.kind.value}|H={model.hurst!r}{lam}|n={n}"


# ---------------------------------------------------------------- replication kernel


def _normalized(model, n, h, value):
    regime = classify_regime(model.alpha)
    N = n - h
    eta = asy.eta_fn(model.alpha, N, regime)
    zeta = float(asy.zeta_fn(model.alpha, h, regime))
    return N / (eta * zeta) * (value - exact_msd_moment(model, h))


def _replicate(cfg: ExperimentConfig, rep: int):
    seed = derive_seed(cfg.master_seed, cfg.cell_id, rep)
    path = simulate_path(cfg.model, cfg.n, seed, 0, **cfg.sim_options)
    rows = []
    for name, scheme in cfg.schemes.items():
        curve = msd_curve(path, scheme)
        if "estimates" in cfg.outputs:
            rep_ = fit_loglog(curve)
            rows.append((f"{name}:alpha_hat", rep_.alpha_hat))
            rows.append((f"{name}:hurst_hat", rep_.hurst_hat))
            rows.append((f"{name}:log_theta_hat", rep_.log_theta_hat))
        if "msd" in cfg.outputs or "normalized" in cfg.outputs:
            for h, v in zip(curve.lags, curve.values):
                if "msd" in cfg.outputs:
                    rows.append((f"{name}:msd_{h}", float(v)))
                if "normalized" in cfg.outputs:
                    rows.append((f"{name}:norm_{h}", _normalized(cfg.model, cfg.n, int(h), float(v))))
    return [(cfg.cell_id, rep, seed, k, float(v)) for k, v in rows]


def _run_chunk(args):
    cfg, reps = args
    out = []
    for r in reps:
        out.extend(_replicate(cfg, r))
    return out


def run_records(configs, workers: int = 1) -> list:
    """Run all replications of all configs; returns sorted record tuples."""
    jobs = []
    for cfg in configs:
        reps = range(cfg.replications)
        chunk = max(1, cfg.replications // max(4 * workers, 1))
        for i in range(0, cfg.replications, chunk):
            jobs.append((cfg, list(reps[i: i + chunk])))
    records = []
    if workers <= 1:
        for job in jobs:
            records.extend(_run_chunk(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, jobs):
                records.extend(part)
    records.sort(key=lambda r: (r[0], r[3], r[1]))
    return records


def records_csv(records) -> str:
    buf = io.StringIO()
    buf.write("cell,rep,seed,key,value\n")
    for cell, rep, seed, key, value in records:
        buf.write(f"{cell},{rep},{seed},{key},{value!r}\n")
    return buf.getvalue()


def parse_records_csv(text: str) -> list:
    lines = text.strip().splitlines()
    out = []
    for line in lines[1:]:
        cell, rep, seed, key, value = line.rsplit(",", 4)
        out.append((cell, int(rep), int(seed), key, float(value)))
    return out


# ---------------------------------------------------------------- summaries


def _moments(values):
    v = np.asarray(values, dtype=float)
    mean = math.fsum(v) / v.size
    sd = math.sqrt(math.fsum((v - mean) ** 2) / (v.size - 1)) if v.size > 1 else 0.0
    return mean, sd


@dataclass
class ExperimentSummary:
    cells: dict
    replications: int
    wall_time: float
    master_seed: int
    seeds: dict
    records: list = field(repr=False, default_factory=list)
    extra: dict = field(default_factory=dict)

    def stat(self, cell: str, key: str) -> dict:
        return self.cells[cell][key]

    def values(self, cell: str, key: str) -> np.ndarray:
        return np.array([r[4] for r in self.records if r[0] == cell and r[3] == key])

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "master_seed": self.master_seed,
            "wall_time": self.wall_time,
            "seed_provenance": "blake2b-64(master_seed:cell_id:rep)",
            "first_seeds": self.seeds,
            "cells": self.cells,
            "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "records.csv"), "w", newline="") as fh:
            fh.write(records_csv(self.records))
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            fh.write(self.to_json())


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def summarize(records, replications: int, master_seed: int, wall_time: float = 0.0) -> ExperimentSummary:
    groups: dict = {}
    seeds: dict = {}
    for cell, rep, seed, key, value in records:
        groups.setdefault(cell, {}).setdefault(key, []).append(value)
        if rep == 0:
            seeds[cell] = seed
    cells = {}
    for cell, keys in groups.items():
        cells[cell] = {}
        for key, vals in keys.items():
            mean, sd = _moments(vals)
            cells[cell][key] = {"mean": mean, "sd": sd, "count": len(vals)}
    return ExperimentSummary(cells, replications, wall_time, master_seed, seeds, records)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentSummary:
    return run_experiments([config], workers)


def run_experiments(configs, workers: int | None = None) -> ExperimentSummary:
    configs = list(configs)
    if workers is None:
        workers = max(c.workers for c in configs)
    t0 = time.perf_counter()
    recs = run_records(configs, workers)
    return summarize(recs, max(c.replications for c in configs), configs[0].master_seed,
                     time.perf_counter() - t0)


# ---------------------------------------------------------------- table experiments


def table1_configs(replications: int, master_seed: int, ns=TABLE1_NS, hursts=TABLE1_HURSTS):
    return [
        ExperimentConfig(ProcessModel.fbm(H), n, replications, dict(TABLE1_SCHEMES), master_seed)
        for H in hursts for n in ns
    ]


def run_table1(replications: int = 5000, master_seed: int = 0, workers: int = 1,
               ns=TABLE1_NS, hursts=TABLE1_HURSTS) -> ExperimentSummary:
    """fBm: mean and sd of the Hurst estimate for both lag presets."""
    return run_experiments(table1_configs(replications, master_seed, ns, hursts), workers)


def table2_configs(replications: int, master_seed: int, hursts=TABLE1_HURSTS, lam: float = 1.0,
                   n: int = 2**12, **sim_options):
    return [
        ExperimentConfig(ProcessModel.ifou(H, lam=lam), n, replications, dict(TABLE2_SCHEMES),
                         master_seed, sim_options=sim_options)
        for H in hursts
    ]


def run_table2(replications: int = 5000, master_seed: int = 0, workers: int = 1,
               hursts=TABLE1_HURSTS, lam: float = 1.0, n: int = 2**12, **sim_options) -> ExperimentSummary:
    """ifOU: bias of the Hurst estimate from small to large dyadic lag triples."""
    return run_experiments(table2_configs(replications, master_seed, hursts, lam, n, **sim_options), workers)


@dataclass
class HistogramData:
    raw: np.ndarray
    normalized: np.ndarray
    gauss_mean: float
    gauss_sd: float
    skewness: float
    skewness_se: float
    counts: np.ndarray
    edges: np.ndarray

    def to_dict(self) -> dict:
        return {
            "gauss_mean": self.gauss_mean,
            "gauss_sd": self.gauss_sd,
            "skewness": self.skewness,
            "skewness_se": self.skewness_se,
            "counts": self.counts.tolist(),
            "edges": self.edges.tolist(),
        }


def skewness_se(R: int) -> float:
    """Standard error of the sample skewness under normality."""
    return math.sqrt(6.0 * (R - 2) / ((R + 1) * (R + 3)))


def run_msd_histogram(model: ProcessModel, n: int = 2**10, h: int = 1, replications: int = 5000,
                      master_seed: int = 0, workers: int = 1, bins: int = 50, **sim_options):
    """Distribution of the pathwise MSD at one lag, raw and normalized."""
    cfg = ExperimentConfig(model, n, replications, {"h": LagScheme(h, (1.0,))}, master_seed,
                           ("msd", "normalized"), workers, sim_options=sim_options)
    summ = run_experiment(cfg, workers)
    raw = summ.values(cfg.cell_id, f"h:msd_{h}")
    norm = summ.values(cfg.cell_id, f"h:norm_{h}")
    mu, sd = _moments(norm)
    sk = float(stats.skew(norm)) if norm.size > 2 else float("nan")
    counts, edges = np.histogram(norm, bins=bins if norm.size > 1 else 1)
    hist = HistogramData(raw, norm, mu, sd, sk, skewness_se(max(norm.size, 3)), counts, edges)
    summ.extra["histogram"] = hist.to_dict()
    return hist, summ


def run_limit_check(model: ProcessModel, n: int, scheme: LagScheme, replications: int,
                    master_seed: int = 0, workers: int = 1, n_quad: int = asy.DEFAULT_N_QUAD,
                    **sim_options) -> ExperimentSummary:
    """Compare normalized MSD vectors with the limit law.

    Subcritical: sample covariance against Sigma.  Supercritical: KS distance
    of each component against the tau-scaled Rosenblatt CDF.
    """
    if replications < 2:
        raise DomainError("a limit check needs at least two replications")
    cfg = ExperimentConfig(model, n, replications, {"s": scheme}, master_seed, ("normalized",),
                           workers, sim_options=sim_options)
    summ = run_experiment(cfg, workers)
    Z = np.column_stack([summ.values(cfg.cell_id, f"s:norm_{h}") for h in scheme.lags])
    regime = classify_regime(model.alpha)
    extra = {"regime": regime.value, "lags": list(scheme.lags)}
    if regime is Regime.SUPERCRITICAL:
        params = asy.rosenblatt_params(model, n_quad)
        ks = []
        for k in range(Z.shape[1]):
            res = stats.kstest(Z[:, k], lambda x: asy.rosenblatt_cdf(params, x, params.tau, 1e-7))
            ks.append({"statistic": float(res.statistic), "pvalue": float(res.pvalue)})
        extra["ks"] = ks
    else:
        S = np.cov(Z, rowvar=False, ddof=1).reshape(Z.shape[1], Z.shape[1])
        extra["sample_cov"] = S.tolist()
        if regime is Regime.SUBCRITICAL:
            extra["sigma"] = asy.sigma_gaussian(model, scheme.weights).entries.tolist()
        else:
            extra["sigma"] = asy.sigma_critical(model, Z.shape[1]).entries.tolist()
        # SE of a variance estimate under normality
        extra["var_se"] = (np.diag(S) * math.sqrt(2.0 / (replications - 1))).tolist()
    summ.extra["limit_check"] = extra
    return summ


PAIR_BASES = (1, 2, 4, 8, 16, 32)


def run_pair_study(model: ProcessModel, n: int = 2**10, bases=PAIR_BASES, replications: int = 5000,
                   master_seed: int = 0, workers: int = 1, **sim_options) -> ExperimentSummary:
    """Bias, sd and MSE of the Hurst estimate for the two-lag schemes ``{b, 2b}``."""
    schemes = {f"pair_{b}_{2 * b}": LagScheme.from_lags([b, 2 * b]) for b in bases}
    cfg = ExperimentConfig(model, n, replications, schemes, master_seed, ("estimates",), workers,
                           sim_options=sim_options)
    summ = run_experiment(cfg, workers)
    rows = []
    for b, name in zip(bases, schemes):
        v = summ.values(cfg.cell_id, f"{name}:hurst_hat") - model.hurst
        bias, sd = _moments(v)
        rows.append({"scheme": name, "base": int(b), "bias": bias, "sd": sd,
                     "mse": math.fsum(v * v) / v.size})
    summ.extra["pair_study"] = rows
    return summ
