"""Inverse problem: from a prescribed pair correlation to a waiting-time law."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import errors
from ._kernels import density_from_pair_correlation, tail_from_autocov
from .direct import CovarianceSequence
from .dist import WaitingTimeDistribution, _assemble

DEFAULT_INVERSION_HORIZON = 20_000


class Phi:
    """Concave exponent ``phi`` with ``phi(0) = 0`` and ``phi -> inf``."""

    def __call__(self, t):
        raise NotImplementedError

    def decay(self, t):
        """``exp(-phi(t))``."""
        return np.exp(-self(t))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerLog(Phi):
    """``phi(t) = gamma ln(1+t)``: polynomial decay ``(1+t)^-gamma``."""

    gamma: float

    def __call__(self, t):
        return self.gamma * np.log1p(np.asarray(t, dtype=float))

    def decay(self, t):
        return (1.0 + np.asarray(t, dtype=float)) ** -self.gamma

    def describe(self):
        return {"kind": "power_log", "gamma": float(self.gamma)}


@dataclass(frozen=True)
class StretchedPower(Phi):
    """``phi(t) = kappa t^beta``: stretched-exponential decay."""

    kappa: float
    beta: float

    def __call__(self, t):
        return self.kappa * np.asarray(t, dtype=float) ** self.beta

    def describe(self):
        return {"kind": "stretched", "kappa": float(self.kappa), "beta": float(self.beta)}


def phi_from_descriptor(d: dict) -> Phi:
    kind = d.get("kind")
    if kind == "power_log":
        return PowerLog(float(d["gamma"]))
    if kind == "stretched":
        return StretchedPower(float(d.get("kappa", 1.0)), float(d["beta"]))
    raise errors.ModelError(f"unknown phi kind {kind!r}")


@dataclass(frozen=True)
class CovarianceSpec:
    """``c_0 = xi`` and ``c_t = xi^2 + m exp(-phi(t))`` for ``t >= 1``."""

    xi: float
    m: float
    phi: Phi

    def describe(self) -> dict:
        return {"xi": float(self.xi), "m": float(self.m), "phi": self.phi.describe()}


@dataclass(frozen=True, eq=False)
class InversionResult:
    distribution: WaitingTimeDistribution
    clipped_mass: float
    horizon: int
    # mass 1 - sum p(1..horizon) left over by the finite recursion
    missing_mass: float
    # 1/c_0 - sum_{t<horizon} Q(t): mean still owed by the unseen tail
    mean_deficit: float
    kaluza: bool
    limit_gap: float


def covariance_from_spec(spec: CovarianceSpec, horizon: int) -> CovarianceSequence:
    """Tabulate the correlation sequence of a spec for ``t = 0..horizon``."""
    xi, m = spec.xi, spec.m
    if not 0.0 < xi <= 1.0:
        raise errors.SpecViolation(f"xi must lie in (0, 1], got {xi}")
    if not 0.0 <= m <= xi * (1.0 - xi) * (1.0 + 1e-15):
        raise errors.SpecViolation(f"m = {m} outside [0, xi(1-xi)] = [0, {xi * (1 - xi)}]")
    t = np.arange(horizon + 1, dtype=float)
    phi = spec.phi(t)
    if abs(phi[0]) > 1e-15:
        raise errors.SpecViolation("phi(0) must be 0")
    if horizon >= 1 and np.any(np.diff(phi) < -1e-12):
        raise errors.SpecViolation("phi must be non-decreasing")
    if horizon >= 2:
        d2 = phi[2:] - 2.0 * phi[1:-1] + phi[:-2]
        if np.any(d2 > 1e-12):
            k = int(np.flatnonzero(d2 > 1e-12)[0]) + 1
            raise errors.SpecViolation(f"phi is not concave at t={k}")
    rho = m * spec.phi.decay(t)
    rho[0] = xi * (1.0 - xi)
    c = xi * xi + rho
    c[0] = xi
    return CovarianceSequence(c=c, rho=rho)


def kaluza_check(c, tol=0.0):
    """Check ``c_{t-1} c_{t+1} >= c_t^2 - tol`` for ``1 <= t <= T-1``.

    Returns ``(ok, first_violation)`` where ``first_violation`` is the first
    failing ``t`` or ``None``.
    """
    c = np.asarray(c.c if isinstance(c, CovarianceSequence) else c, dtype=float)
    if np.any(c <= 0):
        raise errors.NonPositiveEntry("Kaluza sequences are strictly positive")
    if c.size < 3:
        return True, None
    gap = c[:-2] * c[2:] - c[1:-1] ** 2
    bad = np.flatnonzero(gap < -tol)
    if bad.size:
        return False, int(bad[0]) + 1
    return True, None


def kaluza_check_ratio(c, tol=0.0):
    """Equivalent check via non-decreasing ratios ``c_t / c_{t-1}``."""
    c = np.asarray(c.c if isinstance(c, CovarianceSequence) else c, dtype=float)
    if np.any(c <= 0):
        raise errors.NonPositiveEntry("Kaluza sequences are strictly positive")
    r = c[1:] / c[:-1]
    bad = np.flatnonzero(np.diff(r) < -tol)
    if bad.size:
        return False, int(bad[0]) + 1
    return True, None


def invert_autocovariance(cov, clip_tol=1e-10, *, mass_tol=1e-8, limit_tol=1e-6,
                          eps_tail=0.0, method="tail", descriptor=None) -> InversionResult:
    """Waiting-time law whose stationary sequence has pair correlation ``c``.

    Parameters
    ----------
    cov : CovarianceSequence or array_like
        ``c_0..c_T``, all positive.
    clip_tol : float
        Negative masses down to ``-clip_tol * c_0`` are rounding noise and
        clipped to zero; anything below raises :class:`NotRenewable`.
    mass_tol : float
        :class:`HorizonTooShort` is raised when more than this much mass is
        still missing at ``T``.
    method : {"tail", "direct"}
        ``"tail"`` solves for ``Q`` from the increments of ``rho`` (all terms
        non-negative for Kaluza input, so tiny tails keep their digits).
        ``"direct"`` runs ``p(t+1) = c_{t+1}/c_0 - sum_s p(s) c_{t-s+1}/c_0``
        on ``c`` itself. Both define the same ``p``.

    Notes
    -----
    Mass beyond ``T`` is placed on tail atoms chosen so that the mean equals
    ``1 / c_0`` exactly.
    """
    if not isinstance(cov, CovarianceSequence):
        cov = CovarianceSequence.from_c(cov)
    c = np.asarray(cov.c, dtype=float)
    if np.any(c <= 0):
        raise errors.NonPositiveEntry("inversion needs c_t > 0 for all t")
    horizon = c.shape[0] - 1
    if horizon < 1:
        raise errors.HorizonTooShort("need at least c_0 and c_1")
    c0 = float(c[0])

    kaluza, where = kaluza_check(c, tol=1e-12)
    if not kaluza:
        warnings.warn(f"correlation sequence is not Kaluza (first violation at t={where}); "
                      "the inversion may not be a probability law", stacklevel=2)
    limit_gap = abs(float(cov.rho[-1]))
    if limit_gap > limit_tol:
        warnings.warn(f"|c_T - c_0^2| = {limit_gap:.3g} exceeds {limit_tol:g}; "
                      "the horizon may not reach the decorrelated regime", stacklevel=2)

    if method == "tail":
        q = tail_from_autocov(np.asarray(cov.rho, dtype=float), c0)
        p = np.empty(horizon)
        p[:] = q[:-1] - q[1:]
    elif method == "direct":
        p = density_from_pair_correlation(c)[1:]
        q = None
    else:
        raise errors.ModelError(f"unknown method {method!r}")

    neg = p < 0
    if np.any(p < -clip_tol * c0):
        k = int(np.flatnonzero(p < -clip_tol * c0)[0]) + 1
        raise errors.NotRenewable(
            f"p({k}) = {p[k - 1]:.3g} is negative beyond tolerance; "
            "no renewal law reproduces this correlation")
    clipped = float(-p[neg].sum()) + 0.0
    p = np.where(neg, 0.0, p)

    if q is None or clipped > 0.0:
        # rebuild the tail from the (clipped) density
        q = np.concatenate(([1.0], np.maximum(1.0 - np.cumsum(p), 0.0)))
    missing = float(q[-1])
    if missing > mass_tol:
        raise errors.HorizonTooShort(
            f"{missing:.3g} of the mass lies beyond T={horizon}; raise the horizon")
    deficit = 1.0 / c0 - math.fsum(q[:-1])

    cut = horizon
    if eps_tail > 0.0:
        below = np.flatnonzero(q[1:] < eps_tail)
        if below.size:
            cut = int(below[0]) + 1
    head = p[:cut]
    residual = float(q[cut])
    tail_qsum = 1.0 / c0 - math.fsum(q[:cut])
    if descriptor is None:
        descriptor = {"family": "inverse", "c": "table", "horizon": horizon}
    dist = _assemble(head, residual, descriptor,
                     tail_qsum=tail_qsum if residual > 0 else None)
    return InversionResult(
        distribution=dist,
        clipped_mass=clipped,
        horizon=horizon,
        missing_mass=missing,
        mean_deficit=deficit,
        kaluza=kaluza,
        limit_gap=limit_gap,
    )


def invert_spec(spec: CovarianceSpec, horizon=DEFAULT_INVERSION_HORIZON, **kw) -> InversionResult:
    """Tabulate ``spec`` to ``horizon`` and invert it."""
    cov = covariance_from_spec(spec, horizon)
    desc = {"family": "inverse", **spec.describe(), "horizon": int(horizon)}
    return invert_autocovariance(cov, descriptor=desc, **kw)


def distribution_from_spec_descriptor(desc: dict) -> WaitingTimeDistribution:
    spec = CovarianceSpec(float(desc["xi"]), float(desc["m"]), phi_from_descriptor(desc["phi"]))
    horizon = int(desc.get("horizon", DEFAULT_INVERSION_HORIZON))
    return invert_spec(spec, horizon).distribution


def figure_spec(kind: str, exponent: float) -> CovarianceSpec:
    """The correlation structures ``1/4 + (1/4)(1+t)^-gamma`` and ``1/4 + (1/4)e^{-t^beta}``."""
    if kind == "polynomial":
        return CovarianceSpec(0.5, 0.25, PowerLog(exponent))
    if kind == "stretched":
        return CovarianceSpec(0.5, 0.25, StretchedPower(1.0, exponent))
    raise errors.ModelError(f"unknown figure kind {kind!r}")


def read_covariance_csv(path) -> CovarianceSequence:
    """Read ``t, c_t`` (extra columns ignored) written by hand or by ``autocov``."""
    vals = {}
    with open(path) as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if not row or not row[0].strip() or row[0].strip()[0].isalpha():
                continue
            vals[int(float(row[0]))] = float(row[1])
    if not vals:
        raise errors.ConfigError(f"{path}: no (t, c_t) rows found")
    n = max(vals) + 1
    gaps = sorted(set(range(n)) - set(vals))
    if gaps:
        raise errors.ConfigError(f"{path}: missing c_t for t = {gaps[:5]}")
    c = np.array([vals[t] for t in range(n)])
    return CovarianceSequence.from_c(c)
