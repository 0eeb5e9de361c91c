"""Waiting-time distributions and the stationary delay law.

A :class:`WaitingTimeDistribution` is a finite table ``p(1..T_max)`` plus its
tail ``Q(t) = P[S > t]``. Infinite-support laws are truncated once the
remaining mass drops below ``eps_tail``. Where the exact mean of the
discarded tail is known (the analytic families and inverted correlation
sequences), the leftover mass is placed on two adjacent atoms past the
truncation point so that the mean is preserved; otherwise it is folded into
the last bin.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special

from . import errors

DEFAULT_EPS_TAIL = 1e-12
MARKOV_EPS_TAIL = 1e-18
MAX_SUPPORT = 10**6
_ATOM_LIMIT = 10**7


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)


@dataclass(frozen=True, eq=False)
class WaitingTimeDistribution:
    """Law of the inter-renewal times ``S_2, S_3, ...``.

    Attributes
    ----------
    density : ndarray
        ``density[s] = p(s)`` for ``s = 0..T_max``; ``density[0]`` is 0.
    tail : ndarray
        ``tail[t] = Q(t)`` for ``t = 0..T_max``; ``tail[T_max]`` is 0.
    mean : float
        ``mu = sum_s s p(s) = sum_t Q(t)``.
    second_moment : float
        ``sum_s s^2 p(s)``; ``inf`` when the declared analytic tail has an
        infinite second moment.
    residual : float
        Mass that was folded or moved to tail atoms at truncation.
    exact_bins : int
        Bins ``1..exact_bins`` hold the untouched density; bins after it may
        carry folded residual mass.
    aperiodic : bool
        True iff the gcd of the support is 1.
    descriptor : dict
        JSON-serialisable description of how the law was built.
    """

    density: np.ndarray
    tail: np.ndarray
    mean: float
    second_moment: float
    residual: float
    exact_bins: int
    aperiodic: bool
    descriptor: dict = field(default_factory=dict)

    @property
    def t_max(self) -> int:
        return self.density.shape[0] - 1

    @property
    def family(self) -> str:
        return self.descriptor.get("family", "table")

    def p(self, s):
        """Density at ``s`` (array-like), zero outside ``1..T_max``."""
        s = np.asarray(s)
        inside = (s >= 1) & (s <= self.t_max)
        return np.where(inside, self.density[np.clip(s, 0, self.t_max)], 0.0)

    def Q(self, t):
        """Tail ``P[S > t]`` (array-like), 1 for ``t < 0`` and 0 past ``T_max``."""
        t = np.asarray(t)
        val = self.tail[np.clip(t, 0, self.t_max)]
        return np.where(t < 0, 1.0, val)

    @cached_property
    def tail_sums(self) -> np.ndarray:
        """``A[t] = sum_{s >= t} Q(s)`` for ``t = 0..T_max+1``."""
        a = np.zeros(self.t_max + 2)
        a[:-1] = np.cumsum(self.tail[::-1])[::-1]
        a.flags.writeable = False
        return a

    def tail_sum(self, t):
        t = np.asarray(t)
        return self.tail_sums[np.clip(t, 0, self.t_max + 1)]

    @cached_property
    def log_density(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.log(self.density)
        out.flags.writeable = False
        return out

    @cached_property
    def log_tail(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            out = np.log(self.tail)
        out.flags.writeable = False
        return out

    @cached_property
    def model_id(self) -> str:
        h = hashlib.sha256()
        h.update(_canonical(self.descriptor).encode())
        h.update(self.density.tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, path, header_lines=()):
        """Write the density as two columns ``s, p``."""
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["s", "p"])
            for s in range(1, self.t_max + 1):
                w.writerow([s, repr(float(self.density[s]))])

    def __repr__(self):
        return (
            f"WaitingTimeDistribution(family={self.family!r}, T_max={self.t_max}, "
            f"mean={self.mean:.12g}, aperiodic={self.aperiodic})"
        )


@dataclass(frozen=True, eq=False)
class DelayDistribution:
    """Law of the first waiting time ``S_1`` making the sequence stationary."""

    density: np.ndarray

    @property
    def t_max(self) -> int:
        return self.density.shape[0] - 1

    def p(self, s):
        s = np.asarray(s)
        inside = (s >= 1) & (s <= self.t_max)
        return np.where(inside, self.density[np.clip(s, 0, self.t_max)], 0.0)


def _assemble(head, residual, descriptor, tail_qsum=None, infinite_second=False):
    """Build a distribution from ``head = p(1..T)`` and the mass beyond ``T``.

    ``tail_qsum`` is ``sum_{t >= T} Q(t)``, the exact mean contribution of the
    discarded tail measured from ``T``. When given, the residual is put on two
    adjacent atoms ``floor(s*)`` and ``floor(s*)+1`` with
    ``s* = T + tail_qsum / residual``, which keeps ``mu`` exact.
    """
    head = np.asarray(head, dtype=float)
    n = head.shape[0]
    total = math.fsum(head) + residual
    head = head / total
    residual = residual / total
    if tail_qsum is not None:
        tail_qsum = tail_qsum / total

    exact_bins = n
    density = np.concatenate(([0.0], head))
    if residual > 0.0:
        s_star = None
        if tail_qsum is not None and tail_qsum >= residual:
            s_star = n + tail_qsum / residual
            if not math.isfinite(s_star) or s_star + 1 > _ATOM_LIMIT:
                s_star = None
        if s_star is None:
            density[n] += residual
            exact_bins = n - 1
        else:
            lo = int(math.floor(s_star))
            frac = s_star - lo
            size = lo + 1 if frac > 0.0 else lo
            grown = np.zeros(size + 1)
            grown[: n + 1] = density
            grown[lo] += residual * (1.0 - frac)
            if frac > 0.0:
                grown[lo + 1] += residual * frac
            density = grown

    # trailing zero bins carry no information
    nz = np.flatnonzero(density)
    if nz.size == 0:
        raise errors.ZeroDistribution("distribution has no mass")
    density = density[: nz[-1] + 1]
    exact_bins = min(exact_bins, density.shape[0] - 1)

    tail = np.zeros_like(density)
    tail[:-1] = np.cumsum(density[:0:-1])[::-1]
    s = np.arange(density.shape[0], dtype=float)
    mean = math.fsum(tail)
    second = math.inf if infinite_second else math.fsum(s * s * density)
    support = np.flatnonzero(density)
    aperiodic = bool(np.gcd.reduce(support) == 1)
    return WaitingTimeDistribution(
        density=_readonly(density),
        tail=_readonly(tail),
        mean=mean,
        second_moment=second,
        residual=float(residual),
        exact_bins=int(exact_bins),
        aperiodic=aperiodic,
        descriptor=descriptor,
    )


def from_density(table, eps_tail=DEFAULT_EPS_TAIL, *, max_support=MAX_SUPPORT,
                 tail_exponent=None, descriptor=None) -> WaitingTimeDistribution:
    """Build a distribution from a probability table ``p(1), p(2), ...``.

    Parameters
    ----------
    table : array_like
        Non-negative masses for ``s = 1, 2, ...``. The total must lie in
        ``(0, 1 + 1e-9]``; the table is renormalised.
    eps_tail : float
        Truncate at the first ``T`` whose remaining mass is below this; the
        remainder is folded into ``p(T)``.
    tail_exponent : float, optional
        Declared power-law decay ``p(s) ~ s^-a`` of the table beyond its end.
        ``a <= 2`` means the mean diverges and raises :class:`InfiniteMean`.
    """
    arr = np.asarray(table, dtype=float).ravel()
    if arr.size == 0:
        raise errors.ZeroDistribution("empty table")
    if np.any(~np.isfinite(arr)):
        raise errors.ModelError("table contains non-finite entries")
    if np.any(arr < -1e-12):
        i = int(np.flatnonzero(arr < -1e-12)[0]) + 1
        raise errors.NegativeMass(f"negative mass {arr[i - 1]:.3g} at s={i}")
    if tail_exponent is not None and tail_exponent <= 2:
        raise errors.InfiniteMean(f"declared tail s^-{tail_exponent} has infinite mean")
    arr = np.clip(arr, 0.0, None)
    total = math.fsum(arr)
    if total <= 0.0:
        raise errors.ZeroDistribution("table has zero total mass")
    if total > 1.0 + 1e-9:
        raise errors.MassMismatch(f"table mass {total!r} exceeds 1")
    arr = arr / total
    if arr.size > max_support:
        arr = arr[:max_support]

    remaining = np.cumsum(arr[::-1])[::-1]  # remaining[k] = sum_{s >= k+1} p(s)
    beyond = np.append(remaining[1:], 0.0)  # mass strictly after s = k+1
    cut = int(np.argmax(beyond < eps_tail)) if np.any(beyond < eps_tail) else arr.size - 1
    head = arr[: cut + 1].copy()
    residual = float(math.fsum(arr[cut + 1:]))
    if not np.isfinite(math.fsum(np.arange(1, arr.size + 1) * arr)):
        raise errors.InfiniteMean("table mean is not finite")
    if descriptor is None:
        descriptor = {"family": "table", "density": [float(x) for x in head]}
    # fold into the last bin, as for any table of unknown continuation
    return _assemble(head, residual, descriptor)


def markov_family(order, head, lam, eps_tail=MARKOV_EPS_TAIL, *,
                  max_support=MAX_SUPPORT, descriptor=None) -> WaitingTimeDistribution:
    """Waiting-time law whose binary sequence is a Markov chain of ``order``.

    ``head`` gives ``p(1..order+1)`` and the rest is geometric:
    ``p(order+1+s) = lam**s * p(order+1)``.
    """
    head = np.asarray(head, dtype=float).ravel()
    if order < 0 or head.size != order + 1:
        raise errors.ModelError(f"head must have order+1 = {order + 1} entries")
    if not 0.0 <= lam < 1.0:
        raise errors.InvalidLambda(f"lambda must lie in [0, 1), got {lam}")
    if np.any(head < 0):
        raise errors.NegativeMass("head entries must be non-negative")
    last = head[-1]
    mass = math.fsum(head[:-1]) + last / (1.0 - lam)
    if abs(mass - 1.0) > 1e-9:
        raise errors.MassMismatch(f"total mass {mass!r} differs from 1")
    if last == 0.0 or lam == 0.0:
        n_geo = 0
    else:
        # residual last * lam**(k+1) / (1 - lam) < eps_tail
        k = math.log(eps_tail * (1.0 - lam) / last) / math.log(lam) - 1.0
        n_geo = max(0, int(math.ceil(k)))
        n_geo = min(n_geo, max_support - head.size)
    geo = last * lam ** np.arange(1, n_geo + 1, dtype=float)
    table = np.concatenate((head, geo))
    residual = last * lam ** (n_geo + 1) / (1.0 - lam) if last > 0 else 0.0
    if descriptor is None:
        descriptor = {"family": "markov", "order": int(order),
                      "head": [float(x) for x in head], "lambda": float(lam)}
    return _assemble(table, residual, descriptor)


def geometric(mu, eps_tail=MARKOV_EPS_TAIL) -> WaitingTimeDistribution:
    """``p(s) = mu^-s (mu-1)^(s-1)``: i.i.d. symbols with mean ``1/mu``."""
    if not mu >= 1.0:
        raise errors.InvalidMean(f"mean must be >= 1, got {mu}")
    desc = {"family": "geometric", "mu": float(mu)}
    return markov_family(0, [1.0 / mu], 1.0 - 1.0 / mu, eps_tail=eps_tail, descriptor=desc)


def _grid_cut(eps_tail, threshold, max_support):
    if eps_tail <= 0.0 or not math.isfinite(threshold):
        return max_support
    return int(min(max(1, math.ceil(threshold)), max_support))


def polynomial_tail(gamma, scale=1.0, eps_tail=DEFAULT_EPS_TAIL, *,
                    max_support=MAX_SUPPORT) -> WaitingTimeDistribution:
    """Regularly varying tail ``Q(t) = scale * (1+t)^-(gamma+1)`` for ``t >= 1``.

    The second moment is finite iff ``gamma > 1``.
    """
    if not gamma > 0:
        raise errors.InvalidExponent(f"gamma must be > 0, got {gamma}")
    if not scale > 0:
        raise errors.ModelError(f"scale must be > 0, got {scale}")
    if scale > 1.0:
        raise errors.TailExceedsOne(f"scale {scale} makes Q(0) exceed 1")
    a = gamma + 1.0
    cut = _grid_cut(eps_tail, (scale / eps_tail) ** (1.0 / a) - 1.0 if eps_tail > 0 else math.inf,
                    max_support)
    t = np.arange(1, cut + 1, dtype=float)
    # Q(t-1) - Q(t) = scale t^-a (1 - (1 + 1/t)^-a), without cancellation
    head = scale * t ** -a * -np.expm1(-a * np.log1p(1.0 / t))
    head[0] = 1.0 - scale * 2.0 ** -a
    residual = scale * (cut + 1.0) ** -a
    tail_qsum = scale * float(special.zeta(a, cut + 1.0))
    descriptor = {"family": "polynomial", "gamma": float(gamma), "scale": float(scale)}
    return _assemble(head, residual, descriptor, tail_qsum=tail_qsum,
                     infinite_second=gamma <= 1)


def _stretched_tail_sum(beta, kappa, start):
    """``sum_{t >= start} exp(-kappa t^beta)``."""
    total = 0.0
    lo = start
    chunk = max(1024, start)
    for _ in range(64):
        t = np.arange(lo, lo + chunk, dtype=float)
        vals = np.exp(-kappa * t**beta)
        total += math.fsum(vals)
        lo += chunk
        if vals[-1] <= 1e-17 * total or vals[-1] == 0.0:
            return total
        chunk *= 2
    # Euler-Maclaurin remainder from the integral of the continuous tail
    a = 1.0 / beta
    x = kappa * (lo - 0.5) ** beta
    return total + special.gamma(a) * special.gammaincc(a, x) / (beta * kappa**a)


def stretched_exp_tail(beta, kappa=1.0, eps_tail=DEFAULT_EPS_TAIL, *,
                       max_support=MAX_SUPPORT) -> WaitingTimeDistribution:
    """Weibull-type tail ``Q(t) = exp(-kappa t^beta)``, ``0 < beta <= 1``."""
    if not 0.0 < beta <= 1.0:
        raise errors.InvalidExponent(f"beta must lie in (0, 1], got {beta}")
    if not kappa > 0:
        raise errors.ModelError(f"kappa must be > 0, got {kappa}")
    thr = (-math.log(eps_tail) / kappa) ** (1.0 / beta) if eps_tail > 0 else math.inf
    cut = _grid_cut(eps_tail, thr, max_support)
    t = np.arange(1, cut + 1, dtype=float)
    tb = t**beta
    head = np.exp(-kappa * (t - 1.0) ** beta) * -np.expm1(-kappa * (tb - (t - 1.0) ** beta))
    residual = math.exp(-kappa * (cut**beta))
    tail_qsum = _stretched_tail_sum(beta, kappa, cut)
    descriptor = {"family": "stretched", "beta": float(beta), "kappa": float(kappa)}
    return _assemble(head, residual, descriptor, tail_qsum=tail_qsum)


def stationary_delay(w: WaitingTimeDistribution) -> DelayDistribution:
    """``P[S_1 = s] = Q(s-1) / mu``."""
    d = np.zeros(w.t_max + 1)
    d[1:] = w.tail[:-1] / w.mean
    return DelayDistribution(density=_readonly(d))


def from_descriptor(desc: dict) -> WaitingTimeDistribution:
    """Build a model from its JSON descriptor (see README for the schema)."""
    desc = dict(desc)
    fam = desc.get("family")
    eps = desc.get("eps_tail")
    kw = {} if eps is None else {"eps_tail": float(eps)}
    if fam == "geometric":
        return geometric(float(desc["mu"]), **kw)
    if fam == "markov":
        return markov_family(int(desc["order"]), desc["head"], float(desc["lambda"]), **kw)
    if fam == "polynomial":
        return polynomial_tail(float(desc["gamma"]), float(desc.get("scale", 1.0)), **kw)
    if fam == "stretched":
        return stretched_exp_tail(float(desc["beta"]), float(desc.get("kappa", 1.0)), **kw)
    if fam == "table":
        return from_density(desc["density"], **kw)
    if fam == "inverse":
        from .inverse import distribution_from_spec_descriptor

        return distribution_from_spec_descriptor(desc)
    raise errors.ModelError(f"unknown model family {fam!r}")


def read_density_csv(path) -> np.ndarray:
    """Read a two-column ``s, p`` CSV into a table starting at ``s = 1``."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            s, v = line.split(",")[:2]
            rows.append((int(float(s)), float(v)))
    n = max(s for s, _ in rows)
    out = np.zeros(n)
    for s, v in rows:
        out[s - 1] = v
    return out
