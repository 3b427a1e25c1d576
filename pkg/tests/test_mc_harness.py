import json
import math

import numpy as np
import pytest

from msdlimit.errors import DomainError
from msdlimit.mc_harness import (
    ExperimentConfig,
    derive_seed,
    parse_records_csv,
    records_csv,
    run_experiment,
    run_limit_check,
    run_msd_histogram,
    run_pair_study,
    skewness_se,
    summarize,
    table1_configs,
    table2_configs,
)
from msdlimit.model import LagScheme, ProcessModel


def _cfg(**kw):
    d = dict(model=ProcessModel.fbm(0.3), n=256, replications=6,
             schemes={"a": LagScheme(2, (1.0, 2.0, 4.0))}, master_seed=11,
             outputs=("estimates", "msd", "normalized"))
    d.update(kw)
    return ExperimentConfig(**d)


def test_seed_derivation_is_stable():
    assert derive_seed(0, "x", 0) == derive_seed(0, "x", 0)
    assert len({derive_seed(0, "x", r) for r in range(100)}) == 100
    assert derive_seed(0, "x", 0) != derive_seed(1, "x", 0)
    assert 0 <= derive_seed(5, "cell", 3) < 2**64


def test_records_identical_across_workers():
    a = run_experiment(_cfg(), workers=1)
    b = run_experiment(_cfg(), workers=3)
    assert records_csv(a.records) == records_csv(b.records)
    assert a.cells == b.cells


def test_summary_recomputable_from_csv():
    s = run_experiment(_cfg())
    recs = parse_records_csv(records_csv(s.records))
    assert recs == s.records
    again = summarize(recs, s.replications, s.master_seed)
    assert again.cells == s.cells
    v = s.values(next(iter(s.cells)), "a:alpha_hat")
    assert s.stat(next(iter(s.cells)), "a:alpha_hat")["mean"] == math.fsum(v) / v.size


def test_scale_invariance_of_alpha_hat():
    s1 = run_experiment(_cfg(cell_id="c"))
    s2 = run_experiment(_cfg(cell_id="c", model=ProcessModel.fbm(0.3, sigma2=4.0)))
    a1, a2 = s1.values("c", "a:alpha_hat"), s2.values("c", "a:alpha_hat")
    assert np.allclose(a1, a2, atol=1e-10)
    lt = s2.values("c", "a:log_theta_hat") - s1.values("c", "a:log_theta_hat")
    assert np.allclose(lt, math.log(4.0), atol=1e-10)
    assert np.allclose(s1.values("c", "a:norm_2"), s2.values("c", "a:norm_2") / 4.0)


def test_single_replication():
    s = run_experiment(_cfg(replications=1))
    st = s.stat(next(iter(s.cells)), "a:alpha_hat")
    assert st["count"] == 1 and st["sd"] == 0.0


def test_config_validation():
    with pytest.raises(DomainError):
        _cfg(replications=0)
    with pytest.raises(DomainError):
        _cfg(outputs=("bogus",))
    with pytest.raises(DomainError):
        _cfg(n=8, schemes={"a": LagScheme(4, (1.0, 2.0, 4.0))})
    with pytest.raises(DomainError):
        ExperimentConfig.from_dict({"n": 100})


def test_config_from_dict():
    c = ExperimentConfig.from_dict({"model": {"kind": "fbm", "H": 0.4}, "n": 128,
                                    "replications": 2, "master_seed": 1,
                                    "scheme": {"base": 2, "weights": [1, 2]}})
    assert c.schemes["scheme"].lags == (2, 4)


def test_summary_write(tmp_path):
    s = run_experiment(_cfg())
    s.write(tmp_path)
    d = json.loads((tmp_path / "summary.json").read_text())
    assert d["master_seed"] == 11 and "cells" in d
    assert (tmp_path / "records.csv").read_text() == records_csv(s.records)


def test_histogram_two_reps():
    hist, s = run_msd_histogram(ProcessModel.fbm(0.5), n=128, h=1, replications=2, bins=5)
    assert hist.counts.sum() == 2 and hist.raw.size == 2
    assert math.isnan(hist.skewness)


def test_limit_check_needs_two_reps():
    with pytest.raises(DomainError):
        run_limit_check(ProcessModel.fbm(0.3), 128, LagScheme(2, (1.0, 2.0)), 1)


def test_skewness_se():
    assert skewness_se(5000) == pytest.approx(math.sqrt(6 * 4998 / (5001 * 5003)))


def test_table_grids():
    t1 = table1_configs(3, 0)
    assert len(t1) == 8
    assert t1[0].schemes["consecutive"].lags == tuple(range(2, 129))
    assert t1[0].schemes["pair"].lags == (2, 128)
    t2 = table2_configs(3, 0)
    assert all(c.model.kind.value == "ifou" for c in t2)
    assert {s.lags for s in t2[0].schemes.values()} >= {(8, 16, 32), (64, 128, 256)}


def test_pair_study_low_lags_best_for_fbm():
    s = run_pair_study(ProcessModel.fbm(0.25), 2**10, (1, 4, 16, 64), 300, master_seed=2)
    mse = [r["mse"] for r in s.extra["pair_study"]]
    assert all(a < b for a, b in zip(mse, mse[1:]))
    r = s.extra["pair_study"][0]
    assert r["mse"] == pytest.approx(r["bias"] ** 2 + r["sd"] ** 2 * 299 / 300, rel=1e-9)
