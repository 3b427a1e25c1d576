import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msdlimit import asymptotics as asy
from msdlimit.errors import DomainError, RankError, RegimeError
from msdlimit.estimator import fit_loglog
from msdlimit.fractional_sim import SamplePath, simulate_fbm
from msdlimit.inference import (
    DegenerateIntervalWarning,
    _intercept_weights,
    confidence_interval,
    estimator_limit_sd,
    ls_limit_coefficients,
)
from msdlimit.model import LagScheme, ProcessModel, Regime
from msdlimit.msd_core import msd_curve


def test_two_weight_oracle():
    c = ls_limit_coefficients([1.0, math.e], 1.0, 1.0, 10**4, 10)
    assert c.c_w == pytest.approx(1.0)
    assert np.allclose(c.u_vector, [1.0, -1.0])
    assert c.regime is Regime.SUBCRITICAL
    assert np.allclose(c.a_diag, [1.0, math.sqrt(math.e)])


def test_a_diag_and_rate():
    c = ls_limit_coefficients([1.0, 2.0], 2.0, 1.8, 1000, 5)
    assert np.allclose(c.a_diag, [1 / 2.0, 4 / (2.0 * 2**1.8)])
    assert c.rate_factor == pytest.approx(1000**0.8 * 25 / (1000 * 5**1.8))
    c = ls_limit_coefficients([1.0, 2.0], 1.0, 1.0, 10**4, 16)
    assert c.rate_factor == pytest.approx(4 / 100)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 50.0), min_size=2, max_size=8, unique=True))
def test_u_sums_to_zero_and_matches_pseudoinverse(w):
    w = np.sort(np.asarray(w))
    if np.min(np.diff(np.log(w))) < 1e-6:
        return
    c = ls_limit_coefficients(w, 1.0, 0.7, 1000, 1)
    assert abs(c.u_vector.sum()) < 1e-9 * np.abs(c.u_vector).max()
    x = np.log(2.0 * w)
    M = np.column_stack([np.ones_like(x), x])
    P = np.linalg.pinv(M)
    assert np.allclose(-c.u_vector, P[1], atol=1e-9)
    assert np.allclose(_intercept_weights(c, float(x.mean())), P[0], atol=1e-9)


def test_rank_errors():
    with pytest.raises(RankError):
        ls_limit_coefficients([1.0], 1.0, 1.0, 100, 1)
    with pytest.raises(RankError):
        ls_limit_coefficients([2.0, 2.0], 1.0, 1.0, 100, 1)
    with pytest.raises(DomainError):
        ls_limit_coefficients([1.0, 2.0], -1.0, 1.0, 100, 1)


class _Law:
    def __init__(self, S):
        self.regime = Regime.SUBCRITICAL
        self.sigma = type("S", (), {"entries": np.asarray(S, float)})()


def test_limit_sd_with_identity_stub():
    c = ls_limit_coefficients([1.0, math.e], 1.0, 1.0, 10**4, 10)
    sd = estimator_limit_sd(c, _Law(np.eye(2)))
    a, b = c.u_vector * c.a_diag
    assert sd == pytest.approx(math.hypot(a, b))


def test_zero_sd_warns():
    c = ls_limit_coefficients([1.0, 2.0], 1.0, 1.0, 10**4, 10)
    with pytest.warns(DegenerateIntervalWarning):
        assert estimator_limit_sd(c, _Law(np.zeros((2, 2)))) == 0.0


def test_critical_refused():
    c = ls_limit_coefficients([1.0, 2.0], 1.0, 1.5, 10**4, 10)
    law = asy.asymptotic_law(ProcessModel.fbm(0.75), [1.0, 2.0])
    with pytest.raises(RegimeError):
        estimator_limit_sd(c, law)


def _report(H, n=2**12, seed=1, scale=1.0, lags=(16, 32, 64)):
    p = simulate_fbm(ProcessModel.fbm(H), n, seed)
    p = SamplePath(p.values * scale, p.delta, p.seed, p.path_id)
    return fit_loglog(msd_curve(p, LagScheme.from_lags(lags))), p


def test_interval_contains_estimate_and_narrows():
    rep, p = _report(0.25)
    a95, t95 = confidence_interval(rep, p.n, level=0.95)
    a50, t50 = confidence_interval(rep, p.n, level=0.5)
    for ci in (a95, t95):
        assert ci.lower < (rep.alpha_hat if ci.parameter == "alpha" else rep.log_theta_hat) < ci.upper
        assert ci.quantile_source == "normal"
    assert a50.upper - a50.lower < a95.upper - a95.lower
    assert t50.upper - t50.lower < t95.upper - t95.lower
    assert (a95.upper - a95.lower) / (2 * a95.sd) == pytest.approx(1.959963984540054, rel=1e-9)


def test_scale_equivariance():
    r1, p = _report(0.3)
    r2, _ = _report(0.3, scale=3.0)
    assert r2.alpha_hat == pytest.approx(r1.alpha_hat, abs=1e-10)
    assert r2.log_theta_hat - r1.log_theta_hat == pytest.approx(2 * math.log(3.0), abs=1e-10)
    a1, t1 = confidence_interval(r1, p.n)
    a2, t2 = confidence_interval(r2, p.n)
    assert a2.lower == pytest.approx(a1.lower, abs=1e-8) and a2.upper == pytest.approx(a1.upper, abs=1e-8)
    assert t2.lower - t1.lower == pytest.approx(2 * math.log(3.0), abs=1e-8)


def test_supercritical_interval():
    rep, p = _report(0.9, n=2**11, seed=2)
    a, t = confidence_interval(rep, p.n)
    assert a.regime is Regime.SUPERCRITICAL and a.quantile_source == "rosenblatt"
    assert a.lower < rep.alpha_hat < a.upper


def test_interval_refused_near_three_halves():
    rep, p = _report(0.3)
    rep.alpha_hat = 1.505
    with pytest.raises(RegimeError):
        confidence_interval(rep, p.n)
    rep.alpha_hat = 1.505
    confidence_interval(rep, p.n, regime_tol=1e-3)
    with pytest.raises(DomainError):
        confidence_interval(rep, p.n, level=1.0)


def test_rosenblatt_quantiles_continuous_in_alpha():
    a = asy.rosenblatt_params(1.6)
    b = asy.rosenblatt_params(1.6 + 1e-4)
    for q in (0.025, 0.5, 0.975):
        assert abs(asy.rosenblatt_quantile(a, q, a.psi) - asy.rosenblatt_quantile(b, q, b.psi)) < 1e-2


def test_no_warnings_for_regular_interval():
    rep, p = _report(0.25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        confidence_interval(rep, p.n)
