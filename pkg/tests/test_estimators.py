import csv
import math

import numpy as np
import pytest

from rbseq import dist, errors
from rbseq.direct import solve_renewal
from rbseq.estimators import (
    alpha_block_empirical,
    alpha_block_exact,
    alpha_mixing_bound,
    autocov_limit_variance,
    clt_standardize,
    cross_covariance_Cij,
    cross_covariance_t1_closed,
    empirical_mean,
    estimate_autocov,
    estimate_inverse_mean,
    estimate_waiting_time,
    observable_covariance,
    rho_series,
    second_moment_identity,
    sum_rho,
    variance_autocov,
    variance_waiting_time,
    waiting_time_counts,
    write_report_csv,
)
from rbseq.likelihood import all_probabilities, pattern_bits
from rbseq.sampler import generate, generate_replicas

GEO = dist.geometric(2.0)


def test_variance_examples():
    assert variance_waiting_time(GEO, 1) == pytest.approx(1.25, abs=1e-12)
    assert variance_waiting_time(dist.from_density([0, 0.5, 0, 0.5]), 1) == 0.0
    assert variance_autocov(GEO, 0) == pytest.approx(0.25, abs=1e-12)
    for tau in (1, 2, 7):
        assert variance_autocov(GEO, tau) == pytest.approx(5 / 16, abs=1e-12)
    assert autocov_limit_variance(GEO) == pytest.approx(5 / 16, abs=1e-12)
    assert variance_waiting_time(dist.polynomial_tail(0.8), 1) == math.inf


def test_variance_identity_at_lag_one(models):
    # p-hat(1) = mu (rho-hat_1 + c0^2) exactly, so the variances differ by mu^2
    for name, w in models.items():
        if not math.isfinite(w.second_moment) or w.second_moment == 1.0:
            continue
        assert variance_waiting_time(w, 1) == pytest.approx(
            w.mean**2 * variance_autocov(w, 1), rel=1e-10), name


def test_estimators_are_linked_at_lag_one():
    w = dist.polynomial_tail(4.0)
    seq = generate(w, 100_000, 3)
    a = estimate_waiting_time(seq, w, 1)
    b = estimate_autocov(seq, w, 1)
    t = len(seq)
    # p-hat uses t-1 windows and counts consecutive ones, the same as lag products
    assert a.estimate == pytest.approx(w.mean * (b.estimate + 1 / w.mean**2), rel=1e-12)
    assert a.half_width == pytest.approx(w.mean * b.half_width, rel=1e-10)
    assert a.sample_length == b.sample_length == t


def test_variance_converges_to_limit():
    w = dist.polynomial_tail(4.0, eps_tail=1e-30)
    sigma2 = autocov_limit_variance(w)
    cov = solve_renewal(w, 2000)
    assert variance_autocov(w, 2000, cov) == pytest.approx(sigma2, rel=1e-7)
    assert sigma2 > 0


def test_second_moment_identity():
    r = second_moment_identity(GEO)
    assert r.lhs == pytest.approx(6.0, abs=1e-12) and r.rhs == pytest.approx(6.0, abs=1e-12)
    det = second_moment_identity(dist.from_density([1.0]))
    assert det.lhs == 1.0 and det.rhs == pytest.approx(1.0, abs=1e-15)
    w = dist.polynomial_tail(4.0, eps_tail=1e-30)
    assert second_moment_identity(w).rel_gap < 1e-6
    assert sum_rho(w) == pytest.approx((w.second_moment - w.mean) / (2 * w.mean**3), rel=1e-12)
    with pytest.raises(errors.SecondMomentInfinite):
        second_moment_identity(dist.polynomial_tail(0.8))


def test_rho_series_refuses_slow_tails():
    with pytest.raises(errors.HorizonInsufficient):
        rho_series(dist.polynomial_tail(1.2), max_horizon=4096)


def test_empirical_mean_examples(gamma2_model):
    seq = generate(GEO, 10**6, 1)
    assert empirical_mean(seq, lambda x: x[:, 0]) == pytest.approx(0.5, abs=0.002)
    assert empirical_mean(seq, lambda x: np.ones(x.shape[0]), window=4) == 1.0
    seq = generate(gamma2_model, 10**6, 2)
    c2 = solve_renewal(gamma2_model, 2).c[2]
    band = 4 * math.sqrt(variance_autocov(gamma2_model, 2) / 10**6)
    assert abs(empirical_mean(seq, lambda x: x[:, 0] * x[:, 2], window=3) - c2) < band
    with pytest.raises(errors.WindowTooLarge):
        empirical_mean([0, 1], lambda x: x[:, 0], window=3)


def test_estimators_match_generic_observables():
    w = dist.polynomial_tail(2.0)
    seq = generate(w, 50_000, 4)
    for s in (1, 3, 6):
        def g(x, s=s):
            return w.mean * x[:, 0] * np.prod(1 - x[:, 1:s], axis=1) * x[:, s]
        assert estimate_waiting_time(seq, w, s).estimate == pytest.approx(
            empirical_mean(seq, g, window=s + 1), rel=1e-12)
    for tau in (0, 1, 5):
        def h(x, tau=tau):
            return x[:, 0] * x[:, tau] - 1 / w.mean**2
        assert estimate_autocov(seq, w, tau).estimate == pytest.approx(
            empirical_mean(seq, h, window=tau + 1), rel=1e-10, abs=1e-15)


def test_report_fields():
    seq = generate(GEO, 10_000, 0)
    r = estimate_waiting_time(seq, GEO, 1)
    assert r.true_value == 0.5 and r.variance_v == pytest.approx(1.25)
    assert r.half_width == 2 * math.sqrt(r.variance_v / 10_000)
    assert r.standardized() == pytest.approx((r.estimate - 0.5) / math.sqrt(1.25 / 10_000))
    m = estimate_inverse_mean(seq, GEO)
    assert m.true_value == 0.5 and m.variance_v == pytest.approx(0.25)
    assert estimate_inverse_mean(seq).true_value is None
    counts = waiting_time_counts(seq, 5)
    assert counts.shape == (6,) and counts[0] == 0
    with pytest.raises(errors.WindowTooLarge):
        estimate_waiting_time(seq, GEO, 10_000)


def test_iid_null_case():
    reps = generate_replicas(GEO, 20_000, 5, 60)
    for tau in (1, 3):
        z = np.array([estimate_autocov(s, GEO, tau).standardized() for s in reps])
        assert np.all(np.abs(z) < 4.5)


def test_degenerate_variance():
    with pytest.raises(errors.DegenerateVariance):
        clt_standardize([0.1], 0.0, 0.1, 100)


def test_report_csv(tmp_path):
    seq = generate(GEO, 1000, 0)
    path = tmp_path / "r.csv"
    write_report_csv(path, [estimate_waiting_time(seq, GEO, 1), estimate_inverse_mean(seq)])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["target", "index", "estimate", "truth", "v", "half_width", "t"]
    assert rows[2][3] == ""


def test_mixing_bound_geometric():
    b = alpha_mixing_bound(GEO, 20)
    assert b.at(1) == pytest.approx(4.0, abs=1e-12)
    assert np.all(np.abs(b.bounds[1:]) < 1e-12)


def test_mixing_bound_properties(models):
    for name, w in models.items():
        if name in ("polynomial2", "stretched_half", "periodic"):
            continue
        b = alpha_mixing_bound(w, 50)
        assert np.all(b.bounds >= 0), name
        assert np.all(np.diff(b.bounds) <= 1e-15), name


def test_mixing_bound_dominates_block_dependence():
    w = dist.polynomial_tail(4.0)
    b = alpha_mixing_bound(w, 6)
    for t in range(1, 7):
        assert alpha_block_exact(w, t) <= b.at(t) + 1e-15
    reps = generate_replicas(w, 8, 1, 20_000)
    assert alpha_block_empirical(reps, 3) == pytest.approx(alpha_block_exact(w, 3), abs=0.03)
    assert alpha_block_exact(GEO, 2) == pytest.approx(0.0, abs=1e-15)


def test_mixing_bound_horizon_checks():
    with pytest.raises(errors.HorizonInsufficient):
        alpha_mixing_bound(dist.polynomial_tail(2.0), 10, solver_horizon=200)
    with pytest.raises(errors.ModelError):
        alpha_mixing_bound(GEO, 0)


def test_cross_covariance_closed_form(models):
    for name, w in models.items():
        for i, j in ((1, 1), (2, 3), (4, 1)):
            assert cross_covariance_Cij(w, i, j, 1) == pytest.approx(
                cross_covariance_t1_closed(w, i, j), abs=1e-14), (name, i, j)
    with pytest.raises(errors.ModelError):
        cross_covariance_Cij(GEO, 0, 1, 1)


def enumerated_covariance(w, f, m, g, n, t):
    length = m + t + n - 1
    probs = all_probabilities(w, length)
    bits = pattern_bits(length)
    fv = np.array([f(r[:m]) for r in bits], dtype=float)
    gv = np.array([g(r[m + t - 1:]) for r in bits], dtype=float)
    return math.fsum((probs * fv * gv).tolist()) - (probs @ fv) * (probs @ gv)


@pytest.mark.parametrize("name", ["markov", "polynomial2", "table", "inverse_exp"])
def test_observable_covariance_expansion(name, models):
    w = models[name]
    f = lambda x: x[0] + 2.0 * x[-1] * (1 - x[0])  # noqa: E731
    g = lambda x: float(x.any()) - 0.5 * x[1] * x[2]  # noqa: E731
    for t in (1, 2, 4):
        assert observable_covariance(w, f, 3, g, 3, t) == pytest.approx(
            enumerated_covariance(w, f, 3, g, 3, t), abs=1e-13), t
    with pytest.raises(errors.ModelError):
        observable_covariance(w, lambda x: 1.0, 2, g, 3, 1)


def lag_product_long_run_variance(w, tau, k_max):
    """sum_k cov(Y_0, Y_k) for Y_k = x_k x_{k+tau}, from regeneration.

    For distinct ordered times the product moment is c_0 times the renewal
    probabilities c_gap / c_0 of consecutive gaps; repeated times collapse
    since x^2 = x.
    """
    c = solve_renewal(w, k_max + tau).c
    total = []
    for k in range(-k_max, k_max + 1):
        times = sorted({0, tau, k, k + tau})
        m = c[0] * math.prod(c[b - a] / c[0] for a, b in zip(times, times[1:]))
        total.append(m - c[tau] ** 2)
    return math.fsum(total)


@pytest.mark.parametrize("name", ["geometric", "markov", "polynomial4", "table", "inverse_exp"])
def test_variance_autocov_against_moment_oracle(name, models):
    w = models[name]
    for tau in (1, 2, 5):
        oracle = lag_product_long_run_variance(w, tau, 4000)
        assert variance_autocov(w, tau) == pytest.approx(oracle, rel=1e-8, abs=1e-14), tau
