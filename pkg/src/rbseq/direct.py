"""Direct problem: from a waiting-time law to the autocovariance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import errors
from ._kernels import forward_renewal
from .dist import WaitingTimeDistribution


@dataclass(frozen=True, eq=False)
class CovarianceSequence:
    """Pair correlation ``c_t = E[X_1 X_{t+1}]`` and ``rho_t = c_t - c_0^2``.

    ``rho`` is stored separately rather than recomputed from ``c``: far in the
    tail ``rho_t`` is many orders of magnitude below ``c_0^2`` and subtracting
    would throw its digits away.
    """

    c: np.ndarray
    rho: np.ndarray

    @classmethod
    def from_c(cls, c):
        c = np.asarray(c, dtype=float)
        return cls(c=c, rho=c - c[0] ** 2)

    @property
    def horizon(self) -> int:
        return self.c.shape[0] - 1

    @property
    def c0(self) -> float:
        return float(self.c[0])


@dataclass(frozen=True, eq=False)
class TailProxySequence:
    """``(1/mu^3) sum_{n>t} Q(n)`` for ``t = 0..T``."""

    values: np.ndarray

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1


def solve_renewal(w: WaitingTimeDistribution, horizon: int) -> CovarianceSequence:
    """Solve ``c_t = sum_{s=1}^t p(s) c_{t-s}`` with ``c_0 = 1/mu``.

    Cost is ``O(horizon * min(horizon, T_max))``.
    """
    if horizon < 0:
        raise errors.ModelError("horizon must be >= 0")
    c, rho = forward_renewal(
        np.asarray(w.density), np.asarray(w.tail), np.asarray(w.tail_sums),
        1.0 / w.mean, int(horizon),
    )
    return CovarianceSequence(c=c, rho=rho)


def tail_proxy(w: WaitingTimeDistribution, horizon: int) -> TailProxySequence:
    """Leading-order subexponential comparator ``(1/mu^3) sum_{n>t} Q(n)``.

    The tail sums are accumulated from the far end of the table, which keeps
    relative precision when they are tiny.
    """
    if horizon < 0:
        raise errors.ModelError("horizon must be >= 0")
    sums = w.tail_sums  # sums[t] = sum_{n >= t} Q(n)
    t = np.arange(horizon + 1)
    vals = sums[np.minimum(t + 1, w.t_max + 1)] / w.mean**3
    return TailProxySequence(values=vals)


def asymptotic_autocov(w: WaitingTimeDistribution, t):
    """Leading asymptotics of ``rho_t`` for the built-in analytic tails.

    polynomial: ``scale / (gamma mu^3 t^gamma)``; stretched (``beta < 1``):
    ``t^(1-beta) / (mu^3 beta kappa) exp(-kappa t^beta)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise errors.ModelError("t must be >= 1")
    d = w.descriptor
    mu3 = w.mean**3
    if d.get("family") == "polynomial":
        g, ell = d["gamma"], d["scale"]
        return ell / (g * mu3 * t**g)
    if d.get("family") == "stretched" and d["beta"] < 1.0:
        b, ell = d["beta"], d["kappa"]
        return t ** (1.0 - b) / (mu3 * b * ell) * np.exp(-ell * t**b)
    raise errors.UnsupportedFamily(
        f"no asymptotic comparator for family {d.get('family')!r}"
        + (" with beta = 1" if d.get("family") == "stretched" else "")
    )


def markov_order_check(w: WaitingTimeDistribution, tol=1e-9):
    """Smallest order ``M`` with ``p(M+1+s) = lam^s p(M+1)``, ``0 <= lam < 1``.

    Only the untouched bins ``1..exact_bins`` are inspected. A truncated law
    needs at least three of them after the head to pin down ``lam``; a law
    with genuinely finite support has an exactly zero continuation. Returns
    ``None`` when no order fits.
    """
    p = np.asarray(w.density)
    truncated = w.exact_bins < w.t_max or w.residual > 0
    n = w.exact_bins
    for m in range(0, n):
        seg = p[m + 1: n + 1]
        lead = seg[0]
        if not truncated:
            # the continuation past T_max is exactly zero, so only lam = 0 fits
            if np.all(seg[1:] == 0.0):
                return m
            continue
        else:
            if seg.size < 3:
                return None
            if lead == 0.0:
                continue
            lam = seg[1] / lead
        if not 0.0 <= lam < 1.0:
            continue
        expected = lead * lam ** np.arange(seg.size, dtype=float)
        if np.all(np.abs(seg - expected) <= tol * expected + 1e-300):
            return m
    return None


def write_autocov_csv(path, cov: CovarianceSequence, proxy: TailProxySequence | None = None):
    """CSV columns ``t, c_t, rho_t, tail_proxy_t``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "c_t", "rho_t", "tail_proxy_t"])
        for t in range(cov.horizon + 1):
            px = "" if proxy is None or t > proxy.horizon else repr(float(proxy.values[t]))
            wr.writerow([t, repr(float(cov.c[t])), repr(float(cov.rho[t])), px])


def renewal_limit_gap(cov: CovarianceSequence) -> float:
    """``|c_T - c_0^2|``, the distance from the renewal-theorem limit."""
    return math.fabs(float(cov.rho[-1]))
