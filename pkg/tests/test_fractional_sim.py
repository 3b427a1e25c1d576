import math

import numpy as np
import pytest
from scipy import integrate

from msdlimit.errors import DomainError, NumericalError, UnsupportedModelError
from msdlimit.fractional_sim import (
    SamplePath,
    build_sampler,
    fgn_autocov,
    fou_autocov,
    fou_autocov_detail,
    ifou_increment_cov_seq,
    increments,
    make_rng,
    simulate_fbm,
    simulate_fgn,
    simulate_ifou,
    simulate_path,
)
from msdlimit.model import ProcessModel
from msdlimit.msd_core import exact_msd_moment

FBM = ProcessModel.fbm


def test_fgn_autocov_examples():
    assert fgn_autocov(FBM(0.5), 0) == 1.0
    assert fgn_autocov(FBM(0.5), 2) == 0.0
    assert fgn_autocov(FBM(0.75), 1) == pytest.approx((2**1.5 - 2) / 2, rel=1e-14)
    with pytest.raises(UnsupportedModelError):
        fgn_autocov(ProcessModel.ifou(0.5), 1)


def test_fgn_brownian_moments():
    x = simulate_fgn(FBM(0.5), 10**5, seed=3)
    assert abs(x.mean()) < 4 / math.sqrt(1e5)
    assert abs(x.var() - 1) < 0.02


def test_fgn_single_point():
    x = simulate_fgn(FBM(0.3, sigma2=4.0), 1, seed=1)
    assert x.shape == (1,)
    draws = np.array([simulate_fgn(FBM(0.3, sigma2=4.0), 1, seed=s)[0] for s in range(2000)])
    assert abs(draws.var() / 4.0 - 1) < 0.15


def test_fgn_h075_lag1():
    # long memory inflates the sd of the sample autocovariance; band from 40 pilot seeds
    vals = []
    for s in range(8):
        x = simulate_fgn(FBM(0.75), 2**16, seed=s)
        vals.append(np.mean(x[1:] * x[:-1]) - x.mean() ** 2)
    assert abs(np.mean(vals) - 0.41421) < 0.03


@pytest.mark.parametrize("H", [0.25, 0.75])
def test_fgn_autocov_bands(H):
    R, n = 200, 2048
    m = FBM(H)
    ac = np.empty((R, 11))
    for r in range(R):
        x = simulate_fgn(m, n, seed=r)
        ac[r] = [np.mean(x[k:] * x[: n - k]) for k in range(11)]
    mean = ac.mean(axis=0)
    se = ac.std(axis=0, ddof=1) / math.sqrt(R)
    assert np.all(np.abs(mean - fgn_autocov(m, np.arange(11))) < 4 * se + 1e-12)


def test_fbm_zero_noise_and_start():
    p = simulate_fbm(FBM(0.3), 16, seed=0, _noise=np.zeros(16))
    assert np.all(p.values == 0)
    q = simulate_fbm(FBM(0.3), 16, seed=0)
    assert q.values[0] == 0.0 and q.n == 16


def test_fbm_increments_match_fgn():
    m = FBM(0.35)
    noise = simulate_fgn(m, 1000, seed=9, path_id=2)
    p = simulate_fbm(m, 1000, seed=9, path_id=2)
    # cumsum followed by differencing is exact only up to rounding
    assert np.allclose(np.diff(p.values), noise, rtol=0, atol=1e-12 * np.abs(p.values).max())
    assert np.diff(p.values)[0] == noise[0]


def test_brownian_endpoint_variance():
    n = 1024
    ends = np.array([simulate_fbm(FBM(0.5), n, seed=s).values[-1] for s in range(2000)])
    assert abs(np.mean(ends**2) / n - 1) < 4 * math.sqrt(2 / 2000)


def test_fbm_quarter_slope():
    hs = np.arange(1, 9)
    acc = np.zeros(hs.size)
    for s in range(1000):
        x = simulate_fbm(FBM(0.25), 1024, seed=s).values
        acc += (x[hs] - x[0]) ** 2
    slope = np.polyfit(np.log(hs), np.log(acc / 1000), 1)[0]
    assert abs(slope - 0.5) < 0.05


def test_determinism_and_streams():
    m = FBM(0.7)
    a = simulate_fbm(m, 500, seed=42, path_id=3).values
    b = simulate_fbm(m, 500, seed=42, path_id=3).values
    c = simulate_fbm(m, 500, seed=42, path_id=4).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert make_rng(1, 0, 0).random() != make_rng(1, 0, 1).random()
    with pytest.raises(DomainError):
        make_rng(None)


def test_fou_brownian_closed_form():
    m = ProcessModel.ifou(0.5)
    for s in np.linspace(0, 12, 20):
        assert abs(fou_autocov(m, s) - 0.5 * math.exp(-s)) < 1e-10


def test_fou_variance_matches_spectral_quadrature():
    m = ProcessModel.ifou(0.25)
    H = 0.25
    amp = math.gamma(2 * H + 1) * math.sin(math.pi * H)
    f = lambda x: amp * x ** (1 - 2 * H) / (1 + x * x) / math.pi  # noqa: E731
    ref = integrate.quad(f, 0, 1)[0] + integrate.quad(f, 1, np.inf)[0]
    assert fou_autocov(m, 0.0) > 0
    assert fou_autocov(m, 0.0) == pytest.approx(ref, rel=1e-8)


def test_fou_large_s_leading_term():
    m = ProcessModel.ifou(0.75)
    lead = 0.5 * 2 * 0.75 * (1.5 - 1) * 50 ** (1.5 - 2)
    assert fou_autocov(m, 50.0) == pytest.approx(lead, rel=0.05)


def test_fou_asymptotic_branch_agrees_with_quadrature():
    m = ProcessModel.ifou(0.3)
    d = fou_autocov_detail(m, 60.0)
    assert d.method.startswith("asymptotic")
    from msdlimit.fractional_sim import _cos_transform, _spectral_amp
    amp = _spectral_amp(m)
    q, _ = _cos_transform(lambda x: 1 / (1 + x * x), 60.0, 0.3, 1e-13)
    assert abs(d.value - amp * q) < 1e-9


def test_ifou_increment_cov_matches_time_domain():
    m = ProcessModel.ifou(0.25)
    g = ifou_increment_cov_seq(m, 3)
    # variance of a unit increment = E X(1)^2
    assert g[0] == pytest.approx(exact_msd_moment(m, 1.0000000001), rel=1e-6)
    ex2 = exact_msd_moment(m, 2)
    assert ex2 == pytest.approx(2 * g[0] + 2 * g[1], rel=1e-12)


def test_ifou_half_closed_form():
    m = ProcessModel.ifou(0.5)
    for h in (1, 3, 8, 20):
        assert exact_msd_moment(m, h) == pytest.approx(h - 1 + math.exp(-h), abs=1e-9 * h)


def _trapezoid_var(m, h, over):
    d = 1.0 / over
    k = h * over
    w = np.full(k + 1, d)
    w[0] = w[-1] = d / 2
    c = np.array([fou_autocov(m, j * d) for j in range(k + 1)])
    C = c[np.abs(np.arange(k + 1)[:, None] - np.arange(k + 1)[None, :])]
    return float(w @ C @ w)


def test_trapezoid_self_convergence_at_half():
    m = ProcessModel.ifou(0.5)
    exact = exact_msd_moment(m, 8)
    # second-order rule: the bias drops about fourfold per doubling
    errs = [_trapezoid_var(m, 8, o) / exact - 1 for o in (1, 2, 4)]
    assert errs[0] < 0.08 and errs[2] < 0.005
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_ifou_sim_exact_covariance():
    m = ProcessModel.ifou(0.25)
    R, n = 300, 512
    acc = np.zeros(4)
    acc2 = np.zeros(4)
    for s in range(R):
        dx = np.diff(simulate_ifou(m, n, seed=s).values)
        v = np.array([np.mean(dx[k:] * dx[: n - k]) for k in range(4)])
        acc += v
        acc2 += v * v
    mean = acc / R
    se = np.sqrt((acc2 / R - mean**2) / R)
    assert np.all(np.abs(mean - ifou_increment_cov_seq(m, 3)) < 4 * se)


def test_ifou_quarter_exact_slope():
    m = ProcessModel.ifou(0.25)
    slope = math.log(exact_msd_moment(m, 128) / exact_msd_moment(m, 32)) / math.log(4)
    assert abs(slope - 0.55) < 0.03


def test_ifou_trapezoid_method_runs():
    m = ProcessModel.ifou(0.7)
    p = simulate_ifou(m, 64, seed=1, method="trapezoid", oversample=2)
    assert p.n == 64 and p.values[0] == 0
    with pytest.raises(DomainError):
        simulate_ifou(m, 64, seed=1, method="euler")
    with pytest.raises(DomainError):
        simulate_ifou(m, 64, seed=1, oversample=0)
    with pytest.raises(UnsupportedModelError):
        simulate_ifou(FBM(0.3), 64, seed=1)


def test_increments_examples():
    lin = SamplePath(np.arange(11.0))
    inc = increments(lin, 3)
    assert np.all(inc.values == 3) and inc.values.size == 10 - 3
    assert np.all(increments(SamplePath(np.ones(8)), 2).values == 0)
    assert increments(lin, 9).values.size == 1
    with pytest.raises(DomainError):
        increments(lin, 10)
    with pytest.raises(DomainError):
        increments(lin, 0)


def test_io_roundtrip():
    p = simulate_path(FBM(0.4), 100, seed=5)
    q = SamplePath.from_bytes(p.to_bytes())
    assert np.array_equal(p.values, q.values) and q.delta == p.delta
    assert p.to_bytes()[:4] == b"MSDP"
    lines = p.to_csv().splitlines()
    assert lines[0] == "t,x" and len(lines) == 102
    assert float(lines[5].split(",")[1]) == p.values[4]
    with pytest.raises(DomainError):
        SamplePath.from_bytes(b"XXXX" + p.to_bytes()[4:])


def test_sampler_cholesky_fallback():
    cov = lambda L: np.cos(0.5 * np.arange(L + 1)) + 0.05 * (np.arange(L + 1) == 0)  # noqa: E731
    s = build_sampler(cov, 40)
    assert s.chol is not None
    rng = make_rng(0)
    x = np.array([s.sample(rng) for _ in range(4000)])
    C = cov(39)
    emp = np.mean(x[:, 0] * x[:, 1])
    assert abs(emp - C[1]) < 0.1


def test_sampler_total_failure():
    with pytest.raises(NumericalError):
        build_sampler(lambda L: np.cos(0.5 * np.arange(L + 1)), 40)
