"""Finite-dimensional law, conditional probabilities and entropies.

Histories are taken in natural time order ``x_1, ..., x_t`` (most recent
symbol last). The context length ``l`` is measured back from the end: ``l = 1``
when ``x_t = 1``, ``l = 2`` for a history ending ``1, 0``, and ``inf`` when the
history holds no 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .dist import WaitingTimeDistribution, geometric
from .sampler import BinarySequence

DEFAULT_PATTERN_CAP = 64
ENUMERATION_CAP = 24


def _as_pattern(x):
    x = np.asarray(x, dtype=np.int64).ravel()
    if x.size and not np.all((x == 0) | (x == 1)):
        raise errors.ModelError("pattern entries must be 0 or 1")
    return x


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def _log_tail_sum(model, t):
    # ln sum_{s >= t} Q(s)
    return float(_log(model.tail_sum(t)))


def log_joint_probability(model: WaitingTimeDistribution, pattern) -> float:
    """``ln pi_t(x_1..x_t)``; ``-inf`` for impossible patterns."""
    x = _as_pattern(pattern)
    t = x.size
    if t == 0:
        return 0.0
    ones = np.flatnonzero(x) + 1
    log_mu = math.log(model.mean)
    if ones.size == 0:
        return _log_tail_sum(model, t) - log_mu
    terms = [float(_log(model.Q(ones[0] - 1))) - log_mu]
    if ones.size > 1:
        terms.extend(_log(model.p(np.diff(ones))).tolist())
    terms.append(float(_log(model.Q(t - ones[-1]))))
    if any(v == -math.inf for v in terms):
        return -math.inf
    return math.fsum(terms)


def joint_probability(model, pattern, cap=DEFAULT_PATTERN_CAP) -> float:
    """``pi_t(x)`` by the gap factorisation, evaluated in log space.

    Raises :class:`PatternTooLong` past ``cap`` symbols; use
    :func:`log_likelihood` for long sequences.
    """
    x = _as_pattern(pattern)
    if x.size > cap:
        raise errors.PatternTooLong(f"pattern of length {x.size} exceeds cap {cap}")
    return math.exp(log_joint_probability(model, x))


def pattern_bits(t):
    """All ``2^t`` patterns as a ``(2^t, t)`` 0/1 array; row ``n`` has
    ``x_{k+1} = (n >> k) & 1``."""
    n = np.arange(2**t, dtype=np.int64)
    return ((n[:, None] >> np.arange(t)) & 1).astype(np.uint8)


def all_log_probabilities(model: WaitingTimeDistribution, t, cap=ENUMERATION_CAP):
    """``ln pi_t`` of every pattern, in the order of :func:`pattern_bits`."""
    if t < 1:
        raise errors.ModelError("t must be >= 1")
    if t > cap:
        raise errors.PatternTooLong(f"exhaustive enumeration of length {t} exceeds cap {cap}")
    n = np.arange(2**t, dtype=np.int64)
    # log p(0..t) and log Q(0..t), zero probability past the support
    lp = _log(model.p(np.arange(t + 1)))
    lq = _log(model.Q(np.arange(t + 1)))
    log_mu = math.log(model.mean)
    acc = np.zeros(n.size)
    last = np.zeros(n.size, dtype=np.int64)
    for k in range(1, t + 1):
        bit = ((n >> (k - 1)) & 1).astype(bool)
        first = bit & (last == 0)
        later = bit & (last > 0)
        acc[first] += lq[k - 1] - log_mu
        acc[later] += lp[k - last[later]]
        last[bit] = k
    none = last == 0
    acc[none] = _log_tail_sum(model, t) - log_mu
    acc[~none] += lq[t - last[~none]]
    return acc


def all_probabilities(model, t, cap=ENUMERATION_CAP):
    return np.exp(all_log_probabilities(model, t, cap))


@dataclass(frozen=True)
class LogLikelihood:
    value: float
    length: int
    mu: float

    @property
    def aep_statistic(self) -> float:
        """``-(mu/t) ln pi_t``."""
        return -self.mu / self.length * self.value


def _ones_and_length(sequence):
    if isinstance(sequence, BinarySequence):
        return sequence.ones, sequence.length
    x = _as_pattern(sequence)
    return np.flatnonzero(x) + 1, int(x.size)


def log_likelihood(model: WaitingTimeDistribution, sequence) -> LogLikelihood:
    """``ln pi_t`` of a whole observed sequence in one pass over its gaps.

    Raises
    ------
    ZeroProbability
        If the sequence is impossible; ``position`` is the first time index
        at which that becomes apparent.
    """
    ones, t = _ones_and_length(sequence)
    if t < 1:
        raise errors.ModelError("sequence must be non-empty")
    log_mu = math.log(model.mean)
    if ones.size == 0:
        v = _log_tail_sum(model, t)
        if v == -math.inf:
            raise errors.ZeroProbability(f"{t} zeros exceed the model support", position=t)
        return LogLikelihood(v - log_mu, t, model.mean)
    head = float(_log(model.Q(ones[0] - 1)))
    if head == -math.inf:
        raise errors.ZeroProbability("first renewal beyond the delay support",
                                     position=int(ones[0]))
    gaps = np.diff(ones)
    lg = model.log_density[np.clip(gaps, 0, model.t_max)]
    bad = (gaps > model.t_max) | (lg == -math.inf)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise errors.ZeroProbability(f"gap {int(gaps[k])} has zero probability",
                                     position=int(ones[k + 1]))
    end = float(_log(model.Q(t - ones[-1])))
    if end == -math.inf:
        raise errors.ZeroProbability("final run of zeros exceeds the support", position=t)
    v = math.fsum([head - log_mu, end]) + math.fsum(lg.tolist())
    return LogLikelihood(v, t, model.mean)


def context_length(history):
    """Distance from the end of ``history`` back to its most recent 1."""
    x = _as_pattern(history)
    ones = np.flatnonzero(x)
    if ones.size == 0:
        return math.inf
    return int(x.size - ones[-1])


def conditional_next_prob(model: WaitingTimeDistribution, history) -> float:
    """``P[X_{t+1} = 1 | X_1..X_t = history]``."""
    x = _as_pattern(history)
    t = x.size
    try:
        log_likelihood(model, x) if t else None
    except errors.ZeroProbability as exc:
        raise errors.ImpossibleHistory(str(exc)) from exc
    l = context_length(x)
    if l == math.inf:
        return float(model.Q(t) / model.tail_sum(t))
    return float(model.p(l) / model.Q(l - 1))


def _xlogx(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def shannon_entropy(model: WaitingTimeDistribution) -> float:
    """``H(p) = -sum p ln p`` with ``0 ln 0 = 0``."""
    return -math.fsum(_xlogx(model.density).tolist())


def max_entropy_bound(mu) -> float:
    """``mu ln mu + (1 - mu) ln(mu - 1)``, the largest ``H(p)`` at mean ``mu``."""
    if mu < 1:
        raise errors.InvalidMean(f"mean must be >= 1, got {mu}")
    if mu == 1:
        return 0.0
    return mu * math.log(mu) + (1.0 - mu) * math.log(mu - 1.0)


def block_entropy(model: WaitingTimeDistribution, t) -> float:
    """``H(pi_t)`` in closed form from the tables ``p``, ``Q``, ``A``."""
    t = int(t)
    if t < 1:
        raise errors.ModelError("t must be >= 1")
    mu = model.mean
    s = np.arange(1, t + 1)
    a_t = float(model.tail_sum(t))
    parts = [
        math.log(mu),
        -float(_xlogx(a_t)) / mu,
        -2.0 / mu * math.fsum(_xlogx(model.Q(s - 1)).tolist()),
        -1.0 / mu * math.fsum(((t - s) * _xlogx(model.p(s))).tolist()),
    ]
    return math.fsum(parts)


@dataclass(frozen=True)
class EntropySummary:
    H_p: float
    entropy_rate: float
    H_pi_t: float
    t: int
    bound: float


def entropy_summary(model: WaitingTimeDistribution, t) -> EntropySummary:
    hp = shannon_entropy(model)
    return EntropySummary(
        H_p=hp,
        entropy_rate=hp / model.mean,
        H_pi_t=block_entropy(model, t),
        t=int(t),
        bound=max_entropy_bound(model.mean),
    )


def max_entropy_distribution(mu) -> WaitingTimeDistribution:
    """Geometric law ``p(s) = mu^-s (mu-1)^(s-1)``, the entropy maximiser at mean ``mu``."""
    if mu < 1:
        raise errors.InvalidMean(f"mean must be >= 1, got {mu}")
    return geometric(mu)


@dataclass(frozen=True)
class TypicalSet:
    count: int
    mass: float
    t: int
    epsilon: float
    lower_bound: float


def typical_set_count(model: WaitingTimeDistribution, t, epsilon, cap=20) -> TypicalSet:
    """Count strings with ``|(mu/t) ln pi_t(x) + H(p)| <= epsilon`` exhaustively."""
    if t > cap:
        raise errors.PatternTooLong(f"t = {t} exceeds the enumeration cap {cap}")
    lp = all_log_probabilities(model, t, cap=cap)
    hp = shannon_entropy(model)
    stat = model.mean / t * lp + hp
    keep = np.isfinite(lp) & (np.abs(stat) <= epsilon)
    return TypicalSet(
        count=int(keep.sum()),
        mass=math.fsum(np.exp(lp[keep]).tolist()),
        t=int(t),
        epsilon=float(epsilon),
        lower_bound=math.exp(t / model.mean * (hp - epsilon)),
    )
