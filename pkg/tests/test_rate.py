import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from sparsemix.boundary import catalog_specs
from sparsemix.errors import ComputationError, ParameterError, UnsupportedOperation
from sparsemix.rate import (LimitCGF, QuantileAsymptotics, analytic_cgf, analytic_rate,
                            cgf_convergence_gap, exponential_family_cgf, left_derivative,
                            legendre_transform, midpoint_convexity_violations,
                            rate_from_json, rate_from_quantile_asymptotics)
from sparsemix.specs import parse_spec


def spec(**kw):
    return parse_spec(kw)


# -- catalog values ---------------------------------------------------------

def test_idj_values():
    rate = analytic_rate(spec(family="idj", r=0.25))
    assert rate(0.25) == pytest.approx(0.25, abs=1e-15)
    assert rate(-0.25) == 0.0


def test_low_rank_is_infinite_left_of_zero():
    rate = analytic_rate(spec(family="low_rank", r=2.0, k=2, p=4))
    assert rate(-0.1) == math.inf
    assert rate(1.0) == pytest.approx(1.5)


def test_sbm_two_point_rate():
    rate = analytic_rate(spec(family="sbm_pair", r=0.7))
    assert rate(0.7) == pytest.approx(0.7)
    assert rate(-0.7) == 0.0
    assert rate(0.0) == math.inf
    assert not rate.is_convex


def test_side_info_both_branches_meet_at_zero():
    rate = analytic_rate(spec(family="side_info", r=0.2, rho=0.1))
    assert rate(0.0) == pytest.approx(0.225, abs=1e-12)


def test_rate_is_infinite_outside_domain():
    rate = analytic_rate(spec(family="heteroscedastic", r=0.25, sigma2=2.0))
    assert rate.domain_lo == pytest.approx(-0.25)
    assert rate(rate.domain_lo - 1e-6) == math.inf


@pytest.mark.parametrize("model", catalog_specs(), ids=lambda s: s.family)
def test_catalog_rates_are_nonnegative_and_attain_zero(model):
    rate = analytic_rate(model)
    grid = rate.grid()
    values = np.asarray(rate(grid))
    assert np.all(values >= 0)
    assert values.min() <= 1e-9


@pytest.mark.parametrize("model", [s for s in catalog_specs() if analytic_rate(s).is_convex],
                         ids=lambda s: s.family)
def test_convex_flags_hold_on_sampled_triples(model):
    assert midpoint_convexity_violations(analytic_rate(model), points=401, tol=1e-9) == 0


def test_nonconvex_flags_are_detected():
    assert midpoint_convexity_violations(analytic_rate(spec(family="side_info", r=0.2,
                                                            rho=0.1))) > 0


def _contracted_pair_rate(r, rho, y):
    """Inf-convolution of the sum-direction and difference-direction rates.

    The sum direction is a heteroscedastic shift with variance 1 + rho; the
    difference direction is a pure variance change 1 - rho, whose scaled
    log-LR has rate b s / (s - 1) on the side where b / (s - 1) >= 0.
    """
    along = analytic_rate(spec(family="heteroscedastic", r=r, sigma2=1 + rho))
    s = 1 - rho

    def across(b):
        b = np.asarray(b, dtype=float)
        return np.where(b / (s - 1) >= 0, b * s / (s - 1), np.inf)

    a = np.linspace(-12, 12, 240001)
    total = np.asarray(along(a)) + across(y - a)
    i = int(np.argmin(total))
    lo, hi = a[max(i - 1, 0)], a[min(i + 1, a.size - 1)]
    def penalised(x):
        value = float(along(x)) + float(across(y - x))
        return value if math.isfinite(value) else 1e300

    res = minimize_scalar(penalised, bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return min(float(total[i]), float(res.fun))


@pytest.mark.parametrize("rho", [0.2, -0.2, 0.5, -0.5, 0.8, -0.8])
def test_correlated_pairs_single_formula_covers_both_signs(rho):
    rate = analytic_rate(spec(family="correlated_pairs", r=0.3, rho=rho))
    for y in (-0.5, 0.0, 0.3, 1.0, 2.5):
        assert float(rate(y)) == pytest.approx(_contracted_pair_rate(0.3, rho, y), abs=1e-7)


@pytest.mark.parametrize("rho", [0.2, 0.5])
def test_correlated_pairs_match_heteroscedastic_on_positive_half(rho):
    pairs = analytic_rate(spec(family="correlated_pairs", r=0.3, rho=rho))
    # mean sqrt(r log n) on both coordinates becomes sqrt(2 r log n) along (1,1)/sqrt 2
    hetero = analytic_rate(spec(family="heteroscedastic", r=0.3, sigma2=1 + rho))
    t = np.linspace(0, 4, 201)
    assert np.max(np.abs(np.asarray(pairs(t)) - np.asarray(hetero(t)))) <= 1e-9


def test_invalid_parameters_name_the_field():
    with pytest.raises(ParameterError, match="r:"):
        spec(family="idj", r=-1.0)
    with pytest.raises(ParameterError, match="sigma2"):
        spec(family="heteroscedastic", r=0.1, sigma2=1.0)


def test_rate_json_round_trip():
    model = spec(family="correlated_pairs", r=0.25, rho=-0.5)
    rate = analytic_rate(model)
    again = rate_from_json(rate.to_json())
    t = np.linspace(-1, 3, 41)
    assert np.array_equal(np.asarray(rate(t)), np.asarray(again(t)))


# -- Legendre transform --------------------------------------------------------

def test_legendre_gaussian_cgf_at_one():
    cgf = LimitCGF(lambda lam: lam * lam - lam)
    assert legendre_transform(cgf)(1.0) == pytest.approx(1.0, abs=1e-9)


def test_legendre_of_linear_cgf_is_point_mass():
    rate = legendre_transform(LimitCGF(lambda lam: 0.7 * lam))
    assert rate(0.7) == pytest.approx(0.0, abs=1e-12)
    assert rate(0.0) == math.inf
    assert rate(1.5) == math.inf


def test_legendre_multivariate_scale():
    # r (lambda^2 - lambda) c with r c = 1 conjugates to (t + 1)^2 / 4
    r, c = 0.5, 2.0
    rate = legendre_transform(LimitCGF(lambda lam: r * c * (lam * lam - lam)))
    assert rate(0.0) == pytest.approx(0.25, abs=1e-9)


def test_legendre_rejects_minus_infinity():
    cgf = LimitCGF(lambda lam: -math.inf if lam > 0.5 else lam * lam)
    with pytest.raises(ComputationError):
        legendre_transform(cgf)


def test_legendre_requires_origin_in_interior():
    with pytest.raises(UnsupportedOperation):
        legendre_transform(LimitCGF(lambda lam: lam * lam, 0.0, 1.0))


@pytest.mark.parametrize("model", [
    {"family": "heteroscedastic", "r": 0.2, "sigma2": 2.0},
    {"family": "heteroscedastic", "r": 0.2, "sigma2": 0.5},
    {"family": "correlated_pairs", "r": 0.25, "rho": 0.5},
    {"family": "multivariate_gaussian", "r": 0.3, "u": [0.6, 0.8],
     "sigma": [[2.0, 0.5], [0.5, 1.0]]},
], ids=lambda d: d["family"])
def test_conjugate_round_trip_for_catalog_cgfs(model):
    model = parse_spec(model)
    exact = analytic_rate(model)
    numeric = legendre_transform(analytic_cgf(model))
    t = np.linspace(max(-5.0, exact.domain_lo), min(5.0, exact.domain_hi), 400)[1:-1]
    a, b = np.asarray(exact(t)), np.asarray(numeric(t))
    finite = np.isfinite(a)
    assert np.array_equal(finite, np.isfinite(b))
    assert np.max(np.abs(a[finite] - b[finite])) <= 1e-6


# -- exponential family CGF ---------------------------------------------------

def gaussian_log_c(theta):
    return -float(np.sum(np.asarray(theta) ** 2)) / 2


@pytest.mark.parametrize("n", [10.0, 1e3, 1e8])
def test_gaussian_exponential_family_cgf_is_exact(n):
    cgf = exponential_family_cgf(gaussian_log_c, 0.0, lambda m: math.sqrt(0.6 * math.log(m)), n)
    for lam in (-1.0, 0.0, 0.3, 1.0, 2.5):
        assert cgf(lam) == pytest.approx(0.3 * (lam * lam - lam), abs=1e-12)


def test_exponential_family_probe_reports_small_gap():
    gap = cgf_convergence_gap(gaussian_log_c, 0.0, lambda m: math.sqrt(0.6 * math.log(m)), 100.0,
                              [0.5, 2.0])
    assert gap <= 1e-12


# -- quantile asymptotics ------------------------------------------------------

def test_quantile_construction_matches_closed_form():
    r = 0.25
    qa = QuantileAsymptotics(lambda s: -2 * np.sqrt(r * s) - r, lambda s: 2 * np.sqrt(r * s) - r)
    rate = rate_from_quantile_asymptotics(qa, s_max=10.0)
    for t in (0.25, 0.0, -0.1, 1.0):
        assert rate(t) == pytest.approx((t + r) ** 2 / (4 * r), abs=1e-8)


def test_quantile_construction_constant_alphas():
    qa = QuantileAsymptotics(lambda s: np.full_like(s, 0.3), lambda s: np.full_like(s, 0.3))
    rate = rate_from_quantile_asymptotics(qa, s_max=1.0)
    assert rate(0.3) == 0.0
    assert rate(0.31) == math.inf


def test_quantile_construction_below_range_is_infinite():
    qa = QuantileAsymptotics(lambda s: s, lambda s: 2 * s)
    assert rate_from_quantile_asymptotics(qa, s_max=1.0)(-0.5) == math.inf


# -- left derivative ---------------------------------------------------------

def test_left_derivative_examples():
    idj = analytic_rate(spec(family="idj", r=0.25))
    assert left_derivative(idj, 0.0) == pytest.approx(0.5, abs=1e-7)
    low = analytic_rate(spec(family="low_rank", r=2.0, k=2, p=4))
    assert left_derivative(low, 0.7) == pytest.approx(1.5, abs=1e-7)
    assert left_derivative(low, -1.0) == -math.inf


def test_left_derivative_refuses_nonconvex():
    with pytest.raises(UnsupportedOperation):
        left_derivative(analytic_rate(spec(family="sbm_pair", r=0.5)), 0.1)


@pytest.mark.parametrize("model", [s for s in catalog_specs() if analytic_rate(s).is_convex][::4],
                         ids=lambda s: s.family)
def test_left_derivative_is_nondecreasing(model):
    rate = analytic_rate(model)
    lo = max(rate.domain_lo, -3.0)
    hi = min(rate.domain_hi, 3.0)
    grid = np.linspace(lo, hi, 60)[1:]
    slopes = np.array([left_derivative(rate, t) for t in grid])
    assert np.all(np.diff(slopes) >= -1e-7)


def test_cgf_at_zero_vanishes():
    for model in catalog_specs():
        try:
            cgf = analytic_cgf(model)
        except UnsupportedOperation:
            continue
        assert abs(cgf(0.0)) <= 1e-12
