"""Compiled O(T^2) recursions.

Every convolution sum uses Neumaier compensated summation, so long horizons
do not drift. Arrays are indexed by time: ``p[s]`` is the mass at ``s`` and
``p[0]`` is ignored.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _neumaier_add(total, comp, x):
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@njit(cache=True)
def forward_renewal(p, tail, tail_sums, c0, horizon):
    """Return ``(c, rho)`` for ``t = 0..horizon``.

    ``c`` follows ``c_t = sum_s p(s) c_{t-s}`` literally. ``rho`` comes from
    ``rho_t = c0^2 A(t+1) - sum_{k>=1} Q(k) rho_{t-k}`` with
    ``A(n) = sum_{m>=n} Q(m)``. Rounding errors in that recursion are damped
    by the increments of the renewal sequence, so ``rho_t`` keeps its
    relative precision far below ``c0^2``. Propagating ``rho`` through the
    renewal kernel itself would carry early absolute errors forever.
    """
    n_p = p.shape[0] - 1
    n_q = tail.shape[0] - 1
    n_a = tail_sums.shape[0] - 1
    c = np.empty(horizon + 1)
    rho = np.empty(horizon + 1)
    c[0] = c0
    c0sq = c0 * c0
    for t in range(0, horizon + 1):
        if t > 0:
            a = 0.0
            ca = 0.0
            for s in range(1, min(t, n_p) + 1):
                ps = p[s]
                if ps != 0.0:
                    a, ca = _neumaier_add(a, ca, ps * c[t - s])
            c[t] = a + ca
        b = c0sq * tail_sums[t + 1] if t + 1 <= n_a else 0.0
        cb = 0.0
        for k in range(1, min(t, n_q) + 1):
            qk = tail[k]
            if qk != 0.0:
                b, cb = _neumaier_add(b, cb, -qk * rho[t - k])
        rho[t] = b + cb
    return c, rho


@njit(cache=True)
def tail_from_autocov(rho, c0):
    """Tail ``Q(0..T)`` of the waiting time law reproducing ``rho``.

    Uses ``c0 Q(t) = sum_{k=1..t} (rho_{k-1} - rho_k) Q(t-k)``, with
    ``Q(0) = 1``. For non-increasing ``rho`` every term is non-negative.
    """
    horizon = rho.shape[0] - 1
    w = np.empty(horizon + 1)
    w[0] = 0.0
    for k in range(1, horizon + 1):
        w[k] = rho[k - 1] - rho[k]
    q = np.empty(horizon + 1)
    q[0] = 1.0
    for t in range(1, horizon + 1):
        a = 0.0
        ca = 0.0
        for k in range(1, t + 1):
            a, ca = _neumaier_add(a, ca, w[k] * q[t - k])
        q[t] = (a + ca) / c0
    return q


@njit(cache=True)
def density_from_pair_correlation(c):
    """Direct inversion ``p(t+1) = c_{t+1}/c_0 - sum_s p(s) c_{t-s+1}/c_0``."""
    horizon = c.shape[0] - 1
    p = np.zeros(horizon + 1)
    c0 = c[0]
    for t in range(0, horizon):
        a = c[t + 1]
        ca = 0.0
        for s in range(1, t + 1):
            a, ca = _neumaier_add(a, ca, -p[s] * c[t - s + 1])
        p[t + 1] = (a + ca) / c0
    return p
