import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdlimit.errors import DegenerateInputError, DomainError, RankError
from msdlimit.estimator import EstimateReport, Preset, design_constant, fit_loglog, lag_presets
from msdlimit.fractional_sim import SamplePath, simulate_fbm
from msdlimit.model import LagScheme, ProcessModel
from msdlimit.msd_core import MsdCurve, msd_curve


def _curve(lags, values, delta=1.0):
    lags = np.asarray(lags)
    return MsdCurve(lags, values, 1000 - lags, delta)


def test_exact_power_law():
    lags = np.array([2, 4, 8])
    r = fit_loglog(_curve(lags, 2.0 * lags**0.5))
    assert r.alpha_hat == pytest.approx(0.5, abs=1e-14)
    assert r.log_theta_hat == pytest.approx(math.log(2), abs=1e-14)
    assert r.hurst_hat == r.alpha_hat / 2


def test_errors():
    with pytest.raises(DegenerateInputError):
        fit_loglog(msd_curve(SamplePath(np.zeros(20)), LagScheme(1, (1, 2))))
    with pytest.raises(RankError):
        fit_loglog(_curve([4], [1.0]))
    with pytest.raises(RankError):
        fit_loglog(MsdCurve(np.array([3, 3]), np.array([1.0, 2.0]), np.array([5, 5])))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 100), min_size=3, max_size=8), st.floats(0.01, 100))
def test_scale_equivariance_and_orthogonality(vals, c):
    lags = np.arange(1, len(vals) + 1) * 3
    v = np.asarray(vals)
    r1 = fit_loglog(_curve(lags, v))
    r2 = fit_loglog(_curve(lags, c * v))
    assert r2.alpha_hat == pytest.approx(r1.alpha_hat, abs=1e-10)
    assert r2.log_theta_hat == pytest.approx(r1.log_theta_hat + math.log(c), abs=1e-10)
    res = r1.residuals
    scale = max(np.linalg.norm(res), 1e-300)
    assert abs(res.sum()) <= 1e-10 * max(scale, 1.0)
    assert abs(res @ np.log(lags)) <= 1e-10 * max(scale, 1.0) * np.log(lags).max()


def test_permutation_invariance():
    rng = np.random.default_rng(1)
    lags = np.array([2, 5, 9, 30])
    v = rng.uniform(1, 5, 4)
    r1 = fit_loglog(_curve(lags, v))
    perm = [2, 0, 3, 1]
    r2 = fit_loglog(MsdCurve(lags[perm], v[perm], (1000 - lags)[perm]))
    assert r2.alpha_hat == pytest.approx(r1.alpha_hat, abs=1e-12)
    assert r2.log_theta_hat == pytest.approx(r1.log_theta_hat, abs=1e-12)


def test_delta_in_design():
    lags = np.array([2, 4, 8])
    v = 3.0 * (0.01 * lags) ** 0.7
    r = fit_loglog(_curve(lags, v, delta=0.01))
    assert r.alpha_hat == pytest.approx(0.7) and r.theta_hat == pytest.approx(3.0)


def test_presets():
    assert lag_presets(Preset.CONSECUTIVE, 2, 128).m == 127
    assert lag_presets("pair", 2, 128).lags == (2, 128)
    assert lag_presets(Preset.DYADIC_TRIPLE, 32).lags == (32, 64, 128)
    with pytest.raises(DomainError):
        lag_presets("pair", 5, 5)
    with pytest.raises(ValueError):
        lag_presets("weird", 1, 2)


def test_design_constant():
    assert design_constant([1, math.e]) == pytest.approx(1.0)
    assert design_constant([1, 2, 4]) == pytest.approx(3 * 5 * math.log(2) ** 2 - 9 * math.log(2) ** 2)


def test_report_json_roundtrip():
    p = simulate_fbm(ProcessModel.fbm(0.3), 512, seed=0)
    r = fit_loglog(msd_curve(p, LagScheme(2, (1, 2, 4))))
    q = EstimateReport.from_dict(r.to_dict())
    assert q.alpha_hat == r.alpha_hat and q.lags == r.lags and q.n == 512
    assert "alpha_hat" in r.table()
    with pytest.raises(DomainError):
        EstimateReport.from_dict({"alpha_hat": 1})
