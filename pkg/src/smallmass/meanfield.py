"""Empirical-measure views of an ensemble and the averaged momentum pairing.

Everything here is a read-only reduction over particle arrays: binned
mass/momentum fields for inspection, smooth-bump test functions, the exact
particle pairing (1/N) sum_i psi(x_i) v_i, and the window-integrated
averaged momentum used by the small-mass diagnostic:

    integral over a window of length dt_w of <Y*, psi>, estimated as

    dt_w * [ (1/N) sum_i psi(x_i) gamma(x_i)^{-1} F_i
           + (1/N) sum_i psi(x_i) nid(x_i)
           - (1/N) sum_i psi'(x_i) (1/2) sum_k |sigma_k(x_i)|^2 gamma(x_i)^{-2} ]
    + sum_k dB^k_w (1/N) sum_i psi(x_i) sigma_k(x_i) gamma(x_i)^{-1}

with F_i the empirical interaction force, nid the friction-gradient drift,
and dB^k_w the common increments summed over the window.  The second-order
term is integrated by parts onto psi', and the white-noise term only ever
appears window-integrated (pointwise white noise is not a number).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import KineticEnsemble, OverdampedEnsemble, meanfield_force, noise_induced_drift
from .errors import ConfigError
from .model import ModelSpec
from .noise import BrownianGrid


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported bump centred at c with half-width a.

    psi(x) = exp(1 - 1/(1 - u^2)) with u = (x - c)/a for |u| < 1, else 0,
    so psi(c) = 1 and psi vanishes with all derivatives at c +/- a.
    """

    center: float = 0.0
    halfwidth: float = 1.0

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ConfigError(f"halfwidth must be positive, got {self.halfwidth!r}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.halfwidth
        inside = np.abs(u) < 1.0
        usafe = np.where(inside, u, 0.0)
        val = np.exp(1.0 - 1.0 / (1.0 - usafe**2))
        return np.where(inside, val, 0.0)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.halfwidth
        inside = np.abs(u) < 1.0
        usafe = np.where(inside, u, 0.0)
        one_minus = 1.0 - usafe**2
        val = np.exp(1.0 - 1.0 / one_minus)
        dval = val * (-2.0 * usafe / one_minus**2) / self.halfwidth
        return np.where(inside, dval, 0.0)

    @property
    def lip(self):
        """A Lipschitz bound for psi: max |psi'| on a fine grid of the support."""
        xs = np.linspace(self.center - self.halfwidth, self.center + self.halfwidth, 4001)
        return float(np.abs(self.grad(xs)).max())


@dataclass(frozen=True)
class BinnedField:
    """Per-bin empirical mass and momentum on a uniform 1d grid.

    mass_b = (count in bin b) / N; momentum_b = (sum of v_i over bin b) / N.
    Mass that falls outside [x_min, x_max] is tracked separately so the
    total (in-range counts plus out-of-range count) is conserved exactly
    as integers.
    """

    x_min: float
    x_max: float
    counts: np.ndarray
    momentum: np.ndarray
    out_of_range: int
    n_particles: int

    @property
    def n_bins(self):
        return self.counts.shape[0]

    @property
    def mass(self):
        return self.counts / self.n_particles

    @property
    def out_of_range_mass(self):
        return self.out_of_range / self.n_particles

    @property
    def centers(self):
        edges = np.linspace(self.x_min, self.x_max, self.n_bins + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def rows(self, time):
        """(time, bin_center, mass, momentum) tuples for CSV export."""
        mass = self.mass
        return [
            (float(time), float(c), float(m), float(p))
            for c, m, p in zip(self.centers, mass, self.momentum)
        ]


def local_fields(ens: KineticEnsemble, x_min, x_max, n_bins) -> BinnedField:
    """Bin a one-dimensional kinetic ensemble into mass and momentum fields."""
    if ens.d != 1:
        raise ConfigError(f"binned fields are one-dimensional only, got d = {ens.d}")
    x_min, x_max, n_bins = float(x_min), float(x_max), int(n_bins)
    if not (x_max > x_min and n_bins >= 1):
        raise ConfigError("need x_max > x_min and n_bins >= 1")
    x = ens.positions[:, 0]
    v = ens.velocities[:, 0]
    n = x.shape[0]
    width = (x_max - x_min) / n_bins
    idx = np.floor((x - x_min) / width).astype(np.int64)
    # A particle exactly on the right edge belongs to the last bin.
    on_right_edge = x == x_max
    idx[on_right_edge] = n_bins - 1
    in_range = (idx >= 0) & (idx < n_bins) & (x >= x_min) & (x <= x_max)
    counts = np.bincount(idx[in_range], minlength=n_bins)
    momentum = np.bincount(idx[in_range], weights=v[in_range], minlength=n_bins) / n
    return BinnedField(
        x_min=x_min,
        x_max=x_max,
        counts=counts,
        momentum=momentum,
        out_of_range=int(n - in_range.sum()),
        n_particles=n,
    )


def _positions_1d(positions):
    x = np.asarray(positions, dtype=float)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise ConfigError(f"this pairing is one-dimensional only, got d = {x.shape[1]}")
        x = x[:, 0]
    elif x.ndim != 1:
        raise ConfigError(f"positions must be (N,) or (N, 1), got shape {x.shape}")
    return x


def pair_momentum(ens: KineticEnsemble, psi: TestFunction) -> float:
    """Exact particle estimator (1/N) sum_i psi(x_i) v_i (one-dimensional)."""
    if ens.d != 1:
        raise ConfigError(f"pair_momentum is one-dimensional only, got d = {ens.d}")
    w = psi(ens.positions[:, 0])
    return float(np.mean(w * ens.velocities[:, 0]))


def binned_pair_momentum(field: BinnedField, psi: TestFunction) -> float:
    """Binned counterpart sum_b momentum_b * psi(center_b), an O(bin width)
    approximation of pair_momentum."""
    return float(np.sum(field.momentum * psi(field.centers)))


def pairing_coefficients(model: ModelSpec, positions, psi: TestFunction, force=None):
    """Coefficients of the averaged-momentum window integral at one cloud.

    Returns (deterministic_rate, noise_coeff) where the window integral is
    dt_window * deterministic_rate + noise_coeff @ dB_window.  `force` may
    pass precomputed interaction-force rows (N, d) to avoid recomputation.
    """
    if model.d != 1:
        raise ConfigError(f"the averaged pairing is one-dimensional only, got d = {model.d}")
    x = _positions_1d(positions)
    xp = x[:, None]
    if force is None:
        force = meanfield_force(model, xp)
    f = np.asarray(force, dtype=float).reshape(-1)

    w = psi(x)
    dw = psi.grad(x)
    gam = model.friction.value(xp)
    nid = noise_induced_drift(model, xp)[:, 0]
    sq = model.noise.sq_sum(xp)

    interaction = float(np.mean(w * f / gam))
    drift = float(np.mean(w * nid))
    flux = float(np.mean(dw * 0.5 * sq / gam**2))
    sig = model.noise.channels(xp)[:, :, 0]          # (N, m)
    noise_coeff = (w / gam) @ sig / x.shape[0]       # (m,)
    return interaction + drift - flux, noise_coeff


def averaged_momentum_pairing(model: ModelSpec, positions, psi: TestFunction,
                              common_slice, dt_window) -> float:
    """Window integral of the averaged momentum paired with psi.

    `positions` is the (N, 1) cloud at the window start; `common_slice`
    holds the per-channel common increments summed over the window
    (shape (m,)); `dt_window` is the window length.  Returns the four-term
    estimator described in the module docstring.
    """
    dt_window = float(dt_window)
    if dt_window <= 0:
        raise ConfigError(f"dt_window must be positive, got {dt_window!r}")
    db = np.asarray(common_slice, dtype=float).reshape(-1)
    if db.shape[0] != model.m:
        raise ConfigError(f"common_slice must have {model.m} channel entries, got {db.shape[0]}")
    det_rate, noise_coeff = pairing_coefficients(model, positions, psi)
    return dt_window * det_rate + float(noise_coeff @ db)


@dataclass(frozen=True)
class ConditionalReplica:
    """Everything one replica produced under a single common-noise draw.

    All member ensembles were stepped with exactly the increments of
    `common`; particle counts match across members.  `overdamped` maps the
    variant name (see dynamics.VARIANTS) to its terminal ensemble.
    """

    replica_id: int
    common: BrownianGrid
    kinetic: KineticEnsemble | None
    overdamped: dict[str, OverdampedEnsemble]

    def __post_init__(self):
        sizes = {name: ens.n_particles for name, ens in self.overdamped.items()}
        if self.kinetic is not None:
            sizes["kinetic"] = self.kinetic.n_particles
        if len(set(sizes.values())) > 1:
            raise ConfigError(f"member ensembles disagree on particle count: {sizes}")


def momentum_windows(s0, horizon, dt, eps, c_delta=10.0, floor_steps=10):
    """Partition [s0, horizon] into windows of length ~max(c_delta*eps^3, floor_steps*dt).

    Returns a list of (start_index, end_index) step-index pairs relative to
    a grid of step size dt starting at t = 0; the final window is allowed
    to be partial.  The window length respects the eps^3 averaging scale
    while staying resolvable by the step size.
    """
    s0, horizon, dt, eps = float(s0), float(horizon), float(dt), float(eps)
    if not 0 <= s0 < horizon:
        raise ConfigError("need 0 <= s0 < horizon")
    delta = max(c_delta * eps**3, floor_steps * dt)
    steps_per = max(int(round(delta / dt)), 1)
    i0 = int(round(s0 / dt))
    i1 = int(round(horizon / dt))
    if not math.isclose(i0 * dt, s0, rel_tol=0, abs_tol=1e-9):
        raise ConfigError(f"s0 = {s0!r} is not a multiple of dt = {dt!r}")
    windows = []
    lo = i0
    while lo < i1:
        hi = min(lo + steps_per, i1)
        windows.append((lo, hi))
        lo = hi
    return windows
