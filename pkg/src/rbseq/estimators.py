"""Empirical means, the waiting-time and autocovariance estimators, their
CLT variances, and the alpha-mixing bound.

Every estimator takes the model as input: the mean ``mu`` is treated as known
and the model also supplies the truth and the theoretical variance.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import errors
from .direct import CovarianceSequence, solve_renewal
from .dist import WaitingTimeDistribution, stationary_delay
from .likelihood import all_probabilities
from .sampler import BinarySequence

SERIES_TOL = 1e-9
MAX_SERIES_HORIZON = 2**17
_CHUNK = 1 << 18


def _bits(sequence):
    if isinstance(sequence, BinarySequence):
        return sequence.bits
    return np.asarray(sequence, dtype=np.uint8)


# ---------------------------------------------------------------------------
# series of rho

@dataclass(frozen=True, eq=False)
class RhoSeries:
    """``rho_0..rho_H`` with a convergence diagnostic for ``sum rho``."""

    cov: CovarianceSequence
    horizon: int
    total: float
    # share of sum |rho| carried by the last decade (H/10, H]
    last_decade: float


def _last_decade_share(x):
    x = np.abs(np.asarray(x, dtype=float))
    h = x.shape[0] - 1
    tot = math.fsum(x.tolist())
    if tot == 0.0:
        return 0.0
    return math.fsum(x[h // 10 + 1:].tolist()) / tot


def rho_series(model: WaitingTimeDistribution, tol=SERIES_TOL, start=1024,
               max_horizon=MAX_SERIES_HORIZON) -> RhoSeries:
    """Solve the renewal equation on doubling horizons until ``sum rho`` settles.

    Raises :class:`HorizonInsufficient` when the last decade still holds more
    than ``tol`` of the total at ``max_horizon``.
    """
    h = int(start)
    while True:
        cov = solve_renewal(model, h)
        share = _last_decade_share(cov.rho)
        if share <= tol:
            return RhoSeries(cov, h, math.fsum(cov.rho.tolist()), share)
        if h >= max_horizon:
            raise errors.HorizonInsufficient(
                f"sum of rho has not converged at horizon {h} "
                f"(last decade carries {share:.2e} of the total)")
        h = min(2 * h, max_horizon)


def _second_moment(model):
    if not math.isfinite(model.second_moment):
        raise errors.SecondMomentInfinite("the waiting time has an infinite second moment")
    return model.second_moment


def sum_rho(model: WaitingTimeDistribution) -> float:
    """``sum_{t>=0} rho_t`` through the second-moment identity."""
    mu = model.mean
    return (_second_moment(model) - mu) / (2.0 * mu**3)


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    rel_gap: float
    horizon: int
    last_decade: float


def second_moment_identity(model: WaitingTimeDistribution, tol=SERIES_TOL,
                           max_horizon=MAX_SERIES_HORIZON) -> IdentityCheck:
    """``sum s^2 p(s)`` from the table against ``mu + 2 mu^3 sum rho_t`` from the solver."""
    lhs = _second_moment(model)
    s = rho_series(model, tol=tol, max_horizon=max_horizon)
    rhs = model.mean + 2.0 * model.mean**3 * s.total
    return IdentityCheck(lhs, rhs, abs(lhs - rhs) / lhs, s.horizon, s.last_decade)


# ---------------------------------------------------------------------------
# theoretical variances

def variance_waiting_time(model: WaitingTimeDistribution, s) -> float:
    """``v_s = mu p(s) - 2 s p(s)^2 + p(s)^2 sum n^2 p(n) / mu``."""
    mu = model.mean
    ps = float(model.p(s))
    if ps == 0.0:
        return 0.0
    if not math.isfinite(model.second_moment):
        return math.inf
    return mu * ps - 2.0 * s * ps**2 + ps**2 * model.second_moment / mu


def variance_autocov(model: WaitingTimeDistribution, tau, cov=None) -> float:
    """CLT variance of the ``rho_tau`` estimator.

    ``tau = 0``: ``mu^-3 sum n^2 p(n) - 1/mu``. ``tau >= 1``:
    ``2 sum_{n=0}^{tau-1} (mu^2 c_n^2 c_{tau-n} - c_tau^2) + c_tau^2 sum n^2 p(n) / mu - c_tau``.
    The lag ``n = tau`` is counted once, inside the ``sum n^2 p(n)`` term.
    """
    mu = model.mean
    if not math.isfinite(model.second_moment):
        return math.inf
    m2 = model.second_moment
    if tau == 0:
        return m2 / mu**3 - 1.0 / mu
    if cov is None or cov.horizon < tau:
        cov = solve_renewal(model, tau)
    c = cov.c[: tau + 1]
    ct = c[tau]
    n = np.arange(tau)
    terms = mu**2 * c[n] ** 2 * c[tau - n] - ct**2
    return 2.0 * math.fsum(terms.tolist()) + ct**2 * m2 / mu - ct


def autocov_limit_variance(model: WaitingTimeDistribution, tol=SERIES_TOL,
                           max_horizon=MAX_SERIES_HORIZON) -> float:
    """``sigma^2 = lim v_tau = c0^2 - 6 c0^3 + 5 c0^4 + 8 c0^2 sum_{t>=0} rho_t + 2 sum_{t>=1} rho_t^2``."""
    c0 = 1.0 / model.mean
    s = rho_series(model, tol=tol, max_horizon=max_horizon)
    r2 = math.fsum((s.cov.rho[1:] ** 2).tolist())
    return math.fsum([c0**2, -6 * c0**3, 5 * c0**4, 8 * c0**2 * sum_rho(model), 2 * r2])


# ---------------------------------------------------------------------------
# estimators

@dataclass(frozen=True)
class EstimationReport:
    target: str
    index: int
    estimate: float
    true_value: float | None
    variance_v: float
    half_width: float
    sample_length: int
    z: float = 2.0

    def standardized(self) -> float:
        """``(estimate - truth) sqrt(t / v)``."""
        return clt_standardize([self.estimate], self.variance_v, self.true_value,
                               self.sample_length)[0]


def _report(target, index, est, truth, v, t, z):
    hw = z * math.sqrt(v / t) if math.isfinite(v) else math.inf
    return EstimationReport(target, int(index), float(est), truth, float(v), hw, int(t), z)


def empirical_mean(sequence, observable, window=1) -> float:
    """Average of ``observable`` over the ``t - w + 1`` complete windows.

    ``observable`` receives a ``(n, w)`` uint8 array of windows and returns
    ``n`` values.
    """
    x = _bits(sequence)
    t = x.shape[0]
    w = int(window)
    if w < 1 or w > t:
        raise errors.WindowTooLarge(f"window {w} does not fit in a sequence of length {t}")
    n = t - w + 1
    views = sliding_window_view(x, w)
    parts = []
    for lo in range(0, n, _CHUNK):
        vals = np.asarray(observable(views[lo: lo + _CHUNK]), dtype=float)
        parts.append(math.fsum(vals.tolist()))
    return math.fsum(parts) / n


def waiting_time_counts(sequence, s_max) -> np.ndarray:
    """``counts[s]`` = number of consecutive 1-pairs at distance ``s``."""
    if isinstance(sequence, BinarySequence):
        ones = sequence.ones
    else:
        ones = np.flatnonzero(_bits(sequence)) + 1
    gaps = np.diff(ones)
    return np.bincount(gaps[gaps <= s_max], minlength=s_max + 1)


def estimate_waiting_time(sequence, model: WaitingTimeDistribution, s, z=2.0) -> EstimationReport:
    """Empirical mean of ``mu x_1 (1-x_2)...(1-x_s) x_{s+1}``.

    Each window holding the pattern is one gap of length ``s`` between
    consecutive ones, so the mean is ``mu * count / (t - s)``.
    """
    x = _bits(sequence)
    t = x.shape[0]
    s = int(s)
    if s < 1 or t <= s + 1:
        raise errors.WindowTooLarge(f"need t > s + 1, got t={t}, s={s}")
    count = waiting_time_counts(sequence, s)[s]
    est = model.mean * count / (t - s)
    return _report("p", s, est, float(model.p(s)), variance_waiting_time(model, s), t, z)


def lag_product_mean(sequence, tau) -> float:
    """``(1/(t-tau)) sum_n x_{n+1} x_{n+1+tau}``."""
    x = _bits(sequence)
    t = x.shape[0]
    if tau == 0:
        return int(np.count_nonzero(x)) / t
    return int(np.count_nonzero(x[:-tau] & x[tau:])) / (t - tau)


def estimate_autocov(sequence, model: WaitingTimeDistribution, tau, z=2.0, cov=None) -> EstimationReport:
    """Empirical mean of ``x_1 x_{tau+1} - 1/mu^2``."""
    x = _bits(sequence)
    t = x.shape[0]
    tau = int(tau)
    if tau < 0 or t <= tau + 1:
        raise errors.WindowTooLarge(f"need t > tau + 1, got t={t}, tau={tau}")
    if cov is None or cov.horizon < tau:
        cov = solve_renewal(model, tau)
    est = lag_product_mean(x, tau) - 1.0 / model.mean**2
    v = variance_autocov(model, tau, cov)
    return _report("rho", tau, est, float(cov.rho[tau]), v, t, z)


def estimate_inverse_mean(sequence, model: WaitingTimeDistribution | None = None, z=2.0):
    """Frequency of ones, an estimate of ``1/mu`` (variance ``v_0`` when a model is given)."""
    x = _bits(sequence)
    t = x.shape[0]
    est = int(np.count_nonzero(x)) / t
    if model is None:
        return _report("inv_mu", 0, est, None, math.nan, t, z)
    return _report("inv_mu", 0, est, 1.0 / model.mean, variance_autocov(model, 0), t, z)


def clt_standardize(means, v, true_value, t) -> np.ndarray:
    """``(mean - truth) sqrt(t / v)`` per replica."""
    if not v > 0:
        raise errors.DegenerateVariance(f"variance must be positive, got {v}")
    return (np.asarray(means, dtype=float) - true_value) * math.sqrt(t / v)


def write_report_csv(path, reports):
    """Columns ``target, index, estimate, truth, v, half_width, t``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["target", "index", "estimate", "truth", "v", "half_width", "t"])
        for r in reports:
            wr.writerow([r.target, r.index, repr(r.estimate),
                         "" if r.true_value is None else repr(r.true_value),
                         repr(r.variance_v), repr(r.half_width), r.sample_length])


# ---------------------------------------------------------------------------
# mixing

@dataclass(frozen=True, eq=False)
class MixingBoundSequence:
    """Upper bounds on ``alpha_t`` for ``t = 1..T``."""

    bounds: np.ndarray
    partial_sum: float
    solver_horizon: int
    last_decade: float

    def at(self, t):
        return float(self.bounds[t - 1])


def alpha_mixing_bound(model: WaitingTimeDistribution, horizon, tol=SERIES_TOL,
                       solver_horizon=None) -> MixingBoundSequence:
    """``3 mu^2 sum_{n>=t} |rho_{n+1}-rho_n| + 4 mu^2 sum_{n>=t} n |rho_{n+1}-2rho_n+rho_{n-1}|``.

    The infinite sums are cut at the solver horizon (default ``10 * horizon``,
    at least 4096). :class:`HorizonInsufficient` is raised when their last
    decade still carries more than ``tol`` of the value at ``t = 1``.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise errors.ModelError("horizon must be >= 1")
    h = int(solver_horizon or max(10 * horizon, 4096))
    if h < horizon + 1:
        raise errors.HorizonInsufficient("solver horizon must exceed the bound horizon")
    rho = solve_renewal(model, h).rho
    mu2 = model.mean**2
    n = np.arange(1, h)
    d1 = np.abs(rho[2:] - rho[1:-1])  # n = 1..h-1
    d2 = n * np.abs(rho[2:] - 2.0 * rho[1:-1] + rho[:-2])
    terms = 3.0 * mu2 * d1 + 4.0 * mu2 * d2
    share = _last_decade_share(np.concatenate(([0.0], terms)))
    if share > tol:
        raise errors.HorizonInsufficient(
            f"mixing-bound series not converged at solver horizon {h} (last decade {share:.2e})")
    tails = np.cumsum(terms[::-1])[::-1]
    bounds = tails[:horizon].copy()
    return MixingBoundSequence(bounds, math.fsum(bounds.tolist()), h, share)


def _block_alpha(joint):
    # sup over events A, B of |P(A x B) - P(A) P(B)| for a finite joint table
    d = joint - np.outer(joint.sum(1), joint.sum(0))
    k = d.shape[0]
    best = 0.0
    for mask in itertools.product((False, True), repeat=k):
        row = d[np.array(mask)].sum(0)
        best = max(best, row[row > 0].sum(), -row[row < 0].sum())
    return float(best)


def alpha_block_exact(model: WaitingTimeDistribution, t, block=3) -> float:
    """Dependence between ``X_1..X_b`` and ``X_{b+t}..X_{2b+t-1}`` over all events.

    A lower bound on ``alpha_t``, computed by enumeration.
    """
    length = 2 * block + t - 1
    probs = all_probabilities(model, length)
    idx = np.arange(probs.size)
    past = idx & ((1 << block) - 1)
    future = (idx >> (block + t - 1)) & ((1 << block) - 1)
    joint = np.zeros((2**block, 2**block))
    np.add.at(joint, (past, future), probs)
    return _block_alpha(joint)


def alpha_block_empirical(sequences, t, block=3) -> float:
    """Monte Carlo version of :func:`alpha_block_exact` over replica sequences."""
    joint = np.zeros((2**block, 2**block))
    w = 1 << np.arange(block)
    for seq in sequences:
        x = _bits(seq)[: 2 * block + t - 1].astype(np.int64)
        joint[int(x[:block] @ w), int(x[block + t - 1:] @ w)] += 1
    return _block_alpha(joint / joint.sum())


def cross_covariance_Cij(source, i, j, t) -> float:
    """``sum_{u<=i} sum_{v<=j} p(i-u) rho_{u+t+v-2} p(j-v)`` with ``p(0) = -1``.

    ``source`` is a model, or a ``(model, CovarianceSequence)`` pair to reuse
    a solved ``rho``.
    """
    i, j, t = int(i), int(j), int(t)
    if i < 1 or j < 1 or t < 1:
        raise errors.ModelError("i, j, t must be >= 1")
    if isinstance(source, tuple):
        model, cov = source
        if cov.horizon < i + j + t - 2:
            raise errors.HorizonInsufficient(f"rho needed up to {i + j + t - 2}")
    else:
        model = source
        cov = solve_renewal(model, i + j + t - 2)
    pu = model.p(i - np.arange(1, i + 1)).astype(float)
    pv = model.p(j - np.arange(1, j + 1)).astype(float)
    pu[-1] = -1.0
    pv[-1] = -1.0
    u = np.arange(1, i + 1)[:, None]
    v = np.arange(1, j + 1)[None, :]
    r = cov.rho[u + t + v - 2]
    return math.fsum((pu[:, None] * r * pv[None, :]).ravel().tolist())


def cross_covariance_t1_closed(model, i, j) -> float:
    """``P[S1=1] p(i+j-1) - P[S1=i] P[S1=j]``, the ``t = 1`` value of ``C_ij``."""
    d = stationary_delay(model)
    return float(d.p(1) * model.p(i + j - 1) - d.p(i) * d.p(j))


def _first_one_weights(model, h, width):
    # E[1{S1=i} h(x)] / P[S1=i] for i = 1..width, by enumeration over the block
    from .likelihood import pattern_bits

    bits = pattern_bits(width)
    probs = all_probabilities(model, width)
    vals = np.array([h(row) for row in bits], dtype=float)
    first = np.where(bits.any(1), bits.argmax(1) + 1, 0)
    d = stationary_delay(model)
    out = np.zeros(width + 1)
    for i in range(1, width + 1):
        pi = float(d.p(i))
        if pi > 0:
            sel = first == i
            out[i] = math.fsum((probs[sel] * vals[sel]).tolist()) / pi
    return out


def observable_covariance(model: WaitingTimeDistribution, f, m, g, n, t) -> float:
    """``cov[f(X_1..X_m), g(X_{m+t}..X_{m+t+n-1})]`` through ``C_ij(t)``.

    ``f`` and ``g`` take 0/1 arrays and must vanish on the all-zero block.
    ``f`` is weighted on the time-reversed block, as the expansion requires.
    """
    if f(np.zeros(m, dtype=np.uint8)) != 0 or g(np.zeros(n, dtype=np.uint8)) != 0:
        raise errors.ModelError("observables must vanish on the all-zero block")
    a = _first_one_weights(model, lambda x: f(x[::-1]), m)
    b = _first_one_weights(model, g, n)
    cov = solve_renewal(model, m + n + t)
    total = [cross_covariance_Cij((model, cov), i, j, t) * a[i] * b[j]
             for i in range(1, m + 1) for j in range(1, n + 1) if a[i] and b[j]]
    return math.fsum(total)
