"""Distances between particle clouds and trajectory statistics."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ConfigError

_PERM_CACHE = {}
_ORACLE_MAX = 10


def w2_1d_exact(a, b):
    """Exact quadratic Wasserstein distance between equal-size 1d samples.

    In one dimension the optimal coupling is the monotone (sorted) pairing.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape[0] != b.shape[0]:
        raise ConfigError(
            f"clouds must have equal sample counts ({a.shape[0]} vs {b.shape[0]}); "
            "subsample the larger cloud first"
        )
    sa = np.sort(a)
    sb = np.sort(b)
    return float(np.sqrt(np.mean((sa - sb) ** 2)))


def _perms(n):
    if n not in _PERM_CACHE:
        _PERM_CACHE[n] = np.array(list(permutations(range(n))), dtype=np.int64)
    return _PERM_CACHE[n]


def w2_matching_oracle(a, b):
    """Brute-force W2 over all n! pairings; reference oracle for small clouds."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ConfigError(f"clouds must share a shape, got {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n > _ORACLE_MAX:
        raise ConfigError(
            f"matching oracle enumerates all n! pairings and is limited to "
            f"n <= {_ORACLE_MAX}, got n = {n}; use w2_1d_exact or sliced_w2"
        )
    cost = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    perms = _perms(n)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    return float(np.sqrt(totals.min() / n))


def sliced_w2(a, b, n_projections=64, seed=0):
    """Root-mean of squared 1d distances over random unit directions (d >= 2).

    Deterministic given `seed` (an int or a numpy Generator).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] < 2:
        raise ConfigError("sliced_w2 needs (N, d) clouds with d >= 2; "
                          "use w2_1d_exact in one dimension")
    if a.shape[0] != b.shape[0]:
        raise ConfigError(
            f"clouds must have equal sample counts ({a.shape[0]} vs {b.shape[0]}); "
            "subsample the larger cloud first"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(int(seed))
    d = a.shape[1]
    dirs = rng.standard_normal((int(n_projections), d))
    norms = np.sqrt((dirs * dirs).sum(axis=1, keepdims=True))
    dirs = dirs / np.where(norms == 0.0, 1.0, norms)
    total = 0.0
    for u in dirs:
        total += w2_1d_exact(a @ u, b @ u) ** 2
    return float(np.sqrt(total / len(dirs)))


def second_moment_sup(trajectory):
    """Mean over particles of the running maximum of |x|^2 over stored times.

    trajectory has shape (n_times, N, d).
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 3:
        raise ConfigError("trajectory must have shape (n_times, N, d)")
    sq = (traj * traj).sum(axis=2)  # (n_times, N)
    return float(sq.max(axis=0).mean())


def holder_curve(trajectory, dt_snapshot, lags):
    """Mean squared displacement per lag, averaged over particles and starts.

    Lags must be integer multiples of the snapshot spacing.
    """
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 3:
        raise ConfigError("trajectory must have shape (n_times, N, d)")
    n_times = traj.shape[0]
    lags = [float(l) for l in lags]
    msd = []
    for lag in lags:
        k = round(lag / dt_snapshot)
        if k < 1 or abs(k * dt_snapshot - lag) > 1e-9 * max(1.0, lag):
            raise ConfigError(
                f"lag {lag!r} is not a positive multiple of the snapshot "
                f"spacing {dt_snapshot!r}"
            )
        if k >= n_times:
            raise ConfigError(f"lag {lag!r} exceeds the stored horizon")
        diff = traj[k:] - traj[:-k]
        msd.append(float((diff * diff).sum(axis=2).mean()))
    return np.array(lags), np.array(msd)


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    r_squared: float


def order_fit(h, err):
    """Least-squares slope of log(err) against log(h)."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1 or h.size < 3:
        raise ConfigError("order_fit needs two 1d arrays with at least 3 points")
    if (h <= 0).any() or (err <= 0).any():
        raise ConfigError("order_fit needs strictly positive step sizes and errors")
    lx = np.log(h)
    ly = np.log(err)
    design = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    fitted = design @ coef
    ss_res = float(((ly - fitted) ** 2).sum())
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return OrderFit(slope=float(coef[0]), intercept=float(coef[1]), r_squared=r2)
