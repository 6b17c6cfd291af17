import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from sparsemix import curie_weiss as cw
from sparsemix.errors import ParameterError
from sparsemix.models import (MONTE_CARLO_DRAWS, density_ratio_mean, draw, log_lr,
                              null_log_lr_draws, null_log_lr_tail, null_lr_tail,
                              curie_weiss_magnetization_law, sample_alternative, sample_null,
                              signal_strength, tail_condition_estimate)
from sparsemix.rate import analytic_rate
from sparsemix.rng import stream
from sparsemix.specs import parse_spec

N = 1e4
LOG_N = math.log(N)

SPECS = {
    "idj": {"family": "idj", "r": 0.3},
    "multivariate_gaussian": {"family": "multivariate_gaussian", "r": 0.3, "u": [0.6, 0.8],
                              "sigma": [[2.0, 0.5], [0.5, 1.0]]},
    "brownian_drift": {"family": "brownian_drift", "r": 0.3, "steps": 64},
    "heteroscedastic": {"family": "heteroscedastic", "r": 0.3, "sigma2": 2.0},
    "mixture_of_mixtures_1": {"family": "mixture_of_mixtures_1", "r": 0.3, "u1": [1.0, 0.0],
                              "u2": [0.6, 0.8]},
    "mixture_of_mixtures_2": {"family": "mixture_of_mixtures_2", "r": 0.3, "u": [1.0, 0.0],
                              "v": [0.0, 1.0]},
    "low_rank": {"family": "low_rank", "r": 2.0, "k": 2, "p": 4},
    "correlated_pairs": {"family": "correlated_pairs", "r": 0.3, "rho": -0.5},
    "sbm_pair": {"family": "sbm_pair", "r": 0.5},
    "sbm_parity": {"family": "sbm_parity", "r": 0.5},
    "side_info": {"family": "side_info", "r": 0.3, "rho": 0.2},
    "curie_weiss": {"family": "curie_weiss", "theta": 0.5, "mu": 0.4},
    "sparse_exponential": {"family": "sparse_exponential", "r": 0.5},
}
ONE_DIMENSIONAL = ("idj", "brownian_drift", "heteroscedastic", "low_rank", "sbm_pair",
                   "sbm_parity", "side_info", "curie_weiss", "sparse_exponential")


def spec(name):
    return parse_spec(SPECS[name])


def density_oracle(name, x):
    """log q - log p straight from scipy densities, independent of the reduced laws."""
    m = math.sqrt(2 * 0.3 * LOG_N)
    if name == "idj":
        return stats.norm.logpdf(x, m) - stats.norm.logpdf(x)
    if name == "heteroscedastic":
        return stats.norm.logpdf(x, m, math.sqrt(2.0)) - stats.norm.logpdf(x)
    if name == "multivariate_gaussian":
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        mean = m * np.array([0.6, 0.8])
        return (stats.multivariate_normal(mean, cov).logpdf(x)
                - stats.multivariate_normal(np.zeros(2), cov).logpdf(x))
    if name == "mixture_of_mixtures_1":
        a = stats.multivariate_normal(m * np.array([1.0, 0.0])).logpdf(x)
        b = stats.multivariate_normal(m * np.array([0.6, 0.8])).logpdf(x)
        return np.logaddexp(a, b) - math.log(2) - stats.multivariate_normal(np.zeros(2)).logpdf(x)
    if name == "mixture_of_mixtures_2":
        def sym(axis):
            c = m * np.asarray(axis)
            return np.logaddexp(stats.multivariate_normal(c).logpdf(x),
                                stats.multivariate_normal(-c).logpdf(x)) - math.log(2)
        return sym([0.0, 1.0]) - sym([1.0, 0.0])
    if name == "low_rank":
        cov = np.diag([3.0, 3.0, 1.0, 1.0])
        return stats.multivariate_normal(np.zeros(4), cov).logpdf(x) - \
            stats.multivariate_normal(np.zeros(4)).logpdf(x)
    if name == "correlated_pairs":
        cov = np.array([[1.0, -0.5], [-0.5, 1.0]])
        mean = math.sqrt(0.3 * LOG_N) * np.ones(2)
        return stats.multivariate_normal(mean, cov).logpdf(x) - \
            stats.multivariate_normal(np.zeros(2)).logpdf(x)
    if name == "side_info":
        p = N ** 0.3 / (1 + N ** 0.3)
        a, w = x[:, 0], x[:, 1]
        mu = math.sqrt(2 * 0.2 * LOG_N)
        signal = np.where(a == 1, math.log(p), math.log(1 - p)) + stats.norm.logpdf(w, mu)
        null = np.where(a == 1, math.log(1 - p), math.log(p)) + stats.norm.logpdf(w)
        return signal - null
    if name == "sparse_exponential":
        return stats.expon.logpdf(x, scale=1 + N ** 0.5) - stats.expon.logpdf(x)
    raise KeyError(name)


@pytest.mark.parametrize("name", ["idj", "heteroscedastic", "multivariate_gaussian",
                                  "mixture_of_mixtures_1", "mixture_of_mixtures_2", "low_rank",
                                  "correlated_pairs", "side_info", "sparse_exponential"])
def test_log_lr_matches_density_oracle(name):
    model = spec(name)
    rng = stream(7, "test", name)
    x = np.concatenate([draw(model, N, 200, rng), draw(model, N, 200, rng, signal=True)])
    np.testing.assert_allclose(log_lr(model, x, N), density_oracle(name, x), rtol=1e-9,
                               atol=1e-9)


def test_curie_weiss_log_lr_from_partition_functions():
    model = spec("curie_weiss")
    spins = model.spin_count(N)
    null = cw.magnetization_law(0.5, 0.0, spins)
    alt = cw.magnetization_law(0.5, 0.4, spins)
    totals = null.totals
    expected = alt.log_pmf - null.log_pmf
    np.testing.assert_allclose(log_lr(model, totals, N), expected, atol=1e-10)


def test_sbm_log_lr_examples():
    model = parse_spec({"family": "sbm_pair", "r": 1.0})
    assert log_lr(model, [0, 1], 10) == pytest.approx(math.log(5.05), abs=1e-12)
    assert log_lr(model, [1, 1], 10) <= 0
    p, q = 10 / 11, 1 / 11
    assert log_lr(model, [1, 1], 10) == pytest.approx(math.log(2 * p * q / (p * p + q * q)))


def test_idj_log_lr_at_origin():
    assert log_lr(parse_spec({"family": "idj", "r": 0.25}), 0.0, math.exp(4)) == \
        pytest.approx(-1.0, abs=1e-12)


def test_log_lr_rejects_wrong_dimension():
    with pytest.raises(ParameterError, match="observation"):
        log_lr(spec("correlated_pairs"), [1.0, 2.0, 3.0], N)


# -- normalization ---------------------------------------------------------------

@pytest.mark.parametrize("name", ONE_DIMENSIONAL)
def test_density_ratio_integrates_to_one(name):
    assert abs(density_ratio_mean(spec(name), N).value - 1.0) <= 1e-8


@pytest.mark.parametrize("name", ["multivariate_gaussian", "mixture_of_mixtures_1",
                                  "mixture_of_mixtures_2", "correlated_pairs"])
def test_density_ratio_mean_monte_carlo(name):
    model = spec(name)
    ell = null_log_lr_draws(model, N, MONTE_CARLO_DRAWS, seed=3)
    L = np.exp(ell)
    se = L.std() / math.sqrt(L.size)
    assert abs(L.mean() - 1.0) <= 3 * se
    assert abs(density_ratio_mean(model, N).value - 1.0) <= 1e-6


# -- null tails --------------------------------------------------------------------

def test_idj_tail_formula():
    r, n = 0.25, 1e4
    t = np.array([0.05, 0.5, 1.0, 3.0, 40.0])
    expected = stats.norm.sf((np.log(t) + r * math.log(n)) / math.sqrt(2 * r * math.log(n)))
    np.testing.assert_allclose(null_lr_tail(parse_spec({"family": "idj", "r": r}), t, n),
                               expected, rtol=1e-12)


def test_low_rank_tail_is_chi_square():
    model = parse_spec({"family": "low_rank", "r": 1.0, "k": 2, "p": 3})
    s = np.array([-0.5, 0.0, 0.4, 2.0])
    # log L = q r / (2 (1 + r)) - log(1 + r), so {log L > s} is {q > t'}
    t_prime = (s + math.log(2.0)) * 4.0
    expected = np.where(t_prime > 0, np.exp(-np.maximum(t_prime, 0) / 2), 1.0)
    np.testing.assert_allclose(null_log_lr_tail(model, N)(s), expected, rtol=1e-12)


def test_finite_support_tails():
    model = spec("sbm_pair")
    tail = null_log_lr_tail(model, N)
    assert tail(-1e3) == 1.0
    assert tail(1e3) == 0.0
    with pytest.raises(ParameterError):
        null_lr_tail(model, 0.0, N)


@pytest.mark.parametrize("name", ["idj", "heteroscedastic", "correlated_pairs",
                                  "mixture_of_mixtures_1", "side_info", "low_rank"])
def test_tail_agrees_with_monte_carlo(name):
    model = spec(name)
    draws = null_log_lr_draws(model, N, MONTE_CARLO_DRAWS, seed=11)
    tail = null_log_lr_tail(model, N)
    for s in np.quantile(draws, [0.1, 0.5, 0.9, 0.99]):
        p = float(tail(s))
        p_hat = float(np.mean(draws > s))
        assert abs(p_hat - p) <= 4 * math.sqrt(p * (1 - p) / draws.size) + 1e-12


def test_monte_carlo_tail_reports_stderr():
    tail = null_log_lr_tail(spec("idj"), N, method="monte_carlo", draws=10_000, seed=1)
    assert tail.method == "monte_carlo"
    assert 0 < float(tail.stderr(0.0)) < 0.01


# -- tail condition ------------------------------------------------------------------

def test_idj_tail_moment_is_constant():
    report = tail_condition_estimate(parse_spec({"family": "idj", "r": 0.3}), 2.0,
                                     [1e2, 1e3, 1e4, 1e5])
    np.testing.assert_allclose(report.estimates, 0.6, atol=1e-12)
    assert report.verdict == "bounded"


def test_sparse_exponential_tail_diverges():
    report = tail_condition_estimate(parse_spec({"family": "sparse_exponential", "r": 0.5}), 1.5,
                                     [1e2, 1e3, 1e4])
    assert report.verdict == "diverging"
    assert all(math.isinf(v) for v in report.estimates)


def test_heteroscedastic_tail_needs_small_gamma():
    model = parse_spec({"family": "heteroscedastic", "r": 0.25, "sigma2": 2.0})
    assert tail_condition_estimate(model, 3.0, [1e2, 1e3, 1e4]).verdict == "diverging"
    assert tail_condition_estimate(model, 1.5, [1e2, 1e3, 1e4]).verdict == "bounded"


def test_tail_condition_validates_inputs():
    with pytest.raises(ParameterError, match="gamma"):
        tail_condition_estimate(spec("idj"), 1.0, [1e2, 1e3, 1e4])
    with pytest.raises(ParameterError, match="n_list"):
        tail_condition_estimate(spec("idj"), 2.0, [1e2, 1e3])


# -- empirical large deviations ----------------------------------------------------

@pytest.mark.parametrize("name", ["idj", "heteroscedastic", "low_rank"])
def test_empirical_ldp_trends_to_rate(name):
    model = spec(name)
    rate = analytic_rate(model)
    lo = float(rate.minimizers[0]) if rate.minimizers else 0.0
    grid = lo + np.linspace(0.05, 0.45, 5)
    targets = np.array([-float(np.min(rate(np.linspace(t, t + 8, 4001)))) for t in grid])
    assert np.all(targets >= -2)
    gaps = []
    for n in (1e3, 1e4, 1e5):
        scaled = null_log_lr_draws(model, n, 400_000, seed=5) / math.log(n)
        with np.errstate(divide="ignore"):
            est = np.log([np.mean(scaled > t) for t in grid]) / math.log(n)
        gaps.append(np.abs(est - targets))
    gaps = np.array(gaps)
    assert np.all(np.isfinite(gaps))
    # each grid point moves towards the rate as n grows
    assert np.all(gaps[-1] < gaps[0])


# -- Curie-Weiss law --------------------------------------------------------------

def test_curie_weiss_free_spins_are_binomial():
    law = curie_weiss_magnetization_law(0.0, 0.0, 4)
    np.testing.assert_allclose(law.pmf, stats.binom.pmf(np.arange(5), 4, 0.5), atol=1e-15)


def test_curie_weiss_zero_field_symmetry():
    law = curie_weiss_magnetization_law(0.5, 0.0, 20)
    np.testing.assert_allclose(law.pmf, law.pmf[::-1], atol=1e-15)
    assert law.pmf.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("spins", [100, 1000, 5000])
def test_curie_weiss_partition_approaches_mean_field(spins):
    theta, mu = 0.5, 0.2
    value = cw.log_partition(theta, mu, spins) / spins
    target = cw.mean_field_max(theta, mu).value + cw.free_energy_offset(theta)
    assert abs(value - target) <= 2 * math.log(spins) / spins


def test_curie_weiss_partition_by_enumeration():
    theta, mu, spins = 0.8, 0.3, 10
    signs = np.array(np.meshgrid(*[[-1, 1]] * spins)).reshape(spins, -1).T
    s = signs.sum(axis=1)
    energy = theta * (s ** 2 - spins) / (2 * spins) + theta * mu * s
    assert cw.log_partition(theta, mu, spins) == pytest.approx(float(logsumexp(energy)),
                                                               abs=1e-12)


# -- sampling ----------------------------------------------------------------------

def test_null_sample_is_standard_normal():
    model = spec("idj")
    assert sample_null(model, 5, seed=1).observations.shape == (5,)
    big = sample_null(model, 10**6, seed=2).observations
    assert abs(big.mean()) <= 4 / 1000


def test_samples_are_reproducible():
    a = sample_alternative(spec("correlated_pairs"), 500, 0.5, seed=9)
    b = sample_alternative(spec("correlated_pairs"), 500, 0.5, seed=9)
    assert np.array_equal(a.observations, b.observations)
    assert a.to_csv() == b.to_csv()


def test_sbm_concordant_cell_probability():
    n = 10**4
    obs = sample_null(parse_spec({"family": "sbm_pair", "r": 1.0}), n, seed=4).observations
    p = n / (1 + n)
    q = 1 - p
    target = (p * p + q * q) / 2
    freq = float(np.mean((obs[:, 0] == 1) & (obs[:, 1] == 1)))
    assert abs(freq - target) <= 4 * math.sqrt(target * (1 - target) / n)


def test_curie_weiss_decoupled_spins_have_zero_mean():
    model = parse_spec({"family": "curie_weiss", "theta": 0.0, "mu": 0.0, "spins": 10})
    totals = sample_null(model, 20_000, seed=5).observations
    assert abs(totals.mean()) <= 4 * math.sqrt(10 / 20_000)


def test_alternative_signal_count():
    counts = [int(sample_alternative(spec("idj"), 100, 0.5, seed=s).signal.sum())
              for s in range(400)]
    # Binomial(100, 0.1): mean 10, sd 3, averaged over 400 batches
    assert abs(np.mean(counts) - 10) <= 4 * 3 / 20


def test_alternative_mean_shift():
    n, beta = 10**4, 0.5
    means = [sample_alternative(parse_spec({"family": "idj", "r": 1.0}), n, beta, seed=s)
             .observations.mean() for s in range(50)]
    target = n ** -beta * signal_strength(1.0, n)
    assert abs(np.mean(means) - target) <= 4 / math.sqrt(50 * n) + 4 * math.sqrt(
        target * signal_strength(1.0, n) / (50 * n))


def test_nearly_null_alternative():
    expected = 1000 ** (1 - 0.999)
    counts = [int(sample_alternative(spec("idj"), 1000, 0.999, seed=s).signal.sum())
              for s in range(2000)]
    assert abs(np.mean(counts) - expected) <= 4 * math.sqrt(expected / 2000)


def test_alternative_rejects_bad_beta():
    with pytest.raises(ParameterError, match="beta"):
        sample_alternative(spec("idj"), 10, 1.0, seed=0)


def test_brownian_statistic_has_unit_variance():
    model = parse_spec({"family": "brownian_drift", "r": 0.5, "steps": 1024})
    z = draw(model, 1e4, 10**5, stream(0, "test", "brownian"))
    assert abs(z.mean()) <= 4 / math.sqrt(10**5)
    assert abs(z.var() - 1.0) <= 0.02


def test_observation_csv_round_trip(tmp_path):
    from sparsemix.models import read_observations
    model = spec("mixture_of_mixtures_1")
    batch = sample_alternative(model, 64, 0.4, seed=3)
    path = tmp_path / "obs.csv"
    batch.to_csv(path)
    np.testing.assert_array_equal(read_observations(model, path), batch.observations)
