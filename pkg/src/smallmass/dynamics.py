"""Steppers for the kinetic particle system and its candidate overdamped limit.

Kinetic system (N particles, all driven by the same Brownian channels B^k):

    dX_i = V_i dt
    eps dV_i = (-gamma(X_i) V_i + F_i) dt + sum_k sigma_k(X_i) dB^k
    F_i = (1/N) sum_j K(X_i - X_j)        (self term included)

Candidate overdamped dynamics with switchable terms:

    dX_i = [ gamma^{-1} F_i
             + drift_flag * (1/2) sum_k |sigma_k|^2 grad(gamma) gamma^{-3} ] dt
           + sum_k sigma_k gamma^{-1} dB^k
           + indep_flag * gamma^{-1} sqrt((1/2) sum_k |sigma_k|^2) dW_i

where the W_i are idiosyncratic per-particle Brownian motions.  Which of
these term combinations the finite-mass system actually approaches is
measured by the harness, never assumed; see TermFlags and VARIANTS.

Two kinetic schemes are provided.  Euler-Maruyama:

    V <- V + (dt/eps) (F - gamma V) + (1/eps) sum_k sigma_k dB^k

stable only for dt < 2 eps / gamma_hi.  The exponential scheme freezes the
coefficients at the pre-step position and integrates the linear velocity
equation exactly, filtering the noise through phi1:

    a = gamma(x) dt / eps,   phi1(-a) = (1 - e^{-a}) / a
    V <- e^{-a} V + (1 - e^{-a}) F / gamma + (1/eps) phi1(-a) sum_k sigma_k dB^k

Both schemes then move positions with the post-update velocity:
X <- X + dt * V_new.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .model import ModelSpec

SCHEMES = ("euler_maruyama", "exponential")


@dataclass(frozen=True)
class TermFlags:
    """Switches for the two contested terms of the overdamped candidate."""

    noise_induced_drift: bool = True
    independent_noise: bool = True


#: The three term combinations the harness adjudicates between.
#: "full" carries both the friction-gradient drift and the idiosyncratic
#: noise; "drift_ablated" drops the drift; "common_only" drops the
#: idiosyncratic noise and keeps only the shared channels.
VARIANTS = {
    "full": TermFlags(noise_induced_drift=True, independent_noise=True),
    "drift_ablated": TermFlags(noise_induced_drift=False, independent_noise=True),
    "common_only": TermFlags(noise_induced_drift=True, independent_noise=False),
}

VARIANT_NAMES = tuple(VARIANTS)


def _as_ensemble_array(name, arr):
    a = np.asarray(arr, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1:
        raise ConfigError(f"{name} must be an (N, d) array with N >= 1, got shape {a.shape}")
    return a


def _check_finite(context, *arrays):
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericalError(f"non-finite values produced during {context}")


@dataclass(frozen=True)
class KineticEnsemble:
    """Positions and velocities of the finite-mass system at one time."""

    positions: np.ndarray
    velocities: np.ndarray
    t: float
    eps: float

    def __post_init__(self):
        x = _as_ensemble_array("positions", self.positions)
        v = _as_ensemble_array("velocities", self.velocities)
        if x.shape != v.shape:
            raise ConfigError(
                f"positions and velocities must share a shape, got {x.shape} vs {v.shape}"
            )
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps!r}")
        _check_finite("ensemble construction", x, v)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]


@dataclass(frozen=True)
class OverdampedEnsemble:
    """Positions of one overdamped variant at one time."""

    positions: np.ndarray
    t: float
    term_flags: TermFlags

    def __post_init__(self):
        x = _as_ensemble_array("positions", self.positions)
        _check_finite("ensemble construction", x)
        object.__setattr__(self, "positions", x)

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]


def meanfield_force(model: ModelSpec, positions, pair_dtype=np.float64, block=512):
    """Empirical interaction force: row i is (1/N) sum_j K(x_i - x_j).

    The self term j = i is included (K(0) contributes).  The O(N^2)
    displacement tensor is built in row blocks; `pair_dtype` lets the
    harness trade the pairwise pass down to float32 while the reduction
    stays in float64.
    """
    x = _as_ensemble_array("positions", positions)
    if x.shape[1] != model.d:
        raise ConfigError(f"positions have d={x.shape[1]} but model {model.name!r} has d={model.d}")
    n = x.shape[0]
    xp = np.asarray(x, dtype=pair_dtype)
    out = np.empty((n, x.shape[1]), dtype=np.float64)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        disp = xp[lo:hi, None, :] - xp[None, :, :]
        kv = model.kernel.value(disp)
        out[lo:hi] = kv.mean(axis=1, dtype=np.float64)
    return out


def _sigma_contract(model: ModelSpec, x, db):
    """sum_k sigma_k(x) db_k for every particle; db has shape (m,)."""
    ch = model.noise.channels(x)  # (N, m, d)
    want = x.shape[:-1] + (model.m, model.d)
    if ch.shape != want:
        # einsum would silently broadcast a unit axis here, so check first
        raise ConfigError(
            f"noise.channels returned shape {ch.shape}, expected {want}"
        )
    return np.einsum("nmd,m->nd", ch, np.asarray(db, dtype=float))


def _phi1m(a):
    """phi1(-a) = (1 - e^{-a}) / a, stable for small a (limit 1 at a = 0)."""
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-12
    safe = np.where(small, 1.0, a)
    out = np.where(small, 1.0 - a / 2.0, -np.expm1(-safe) / safe)
    return out


def euler_stability_bound(model: ModelSpec, eps):
    """Largest stable Euler-Maruyama step: 2 * eps / gamma_hi."""
    return 2.0 * float(eps) / model.friction.upper


def step_kinetic(model: ModelSpec, ens: KineticEnsemble, dt, common_incr,
                 scheme="exponential", force=None) -> KineticEnsemble:
    """Advance the kinetic ensemble one step under shared increments ΔB^k.

    `common_incr` has shape (m,) and multiplies every particle (common
    noise).  `force` may pass a precomputed meanfield_force row array to
    avoid recomputation when several systems share positions.
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    dt = float(dt)
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    x, v, eps = ens.positions, ens.velocities, ens.eps
    if force is None:
        force = meanfield_force(model, x)
    gam = model.friction.value(x)[..., None]  # (N, 1)
    noise = _sigma_contract(model, x, common_incr)
    if scheme == "euler_maruyama":
        bound = euler_stability_bound(model, eps)
        if dt >= bound:
            raise ConfigError(
                f"euler_maruyama requires dt < 2*eps/gamma_hi = {bound!r}, got dt = {dt!r}"
            )
        v_new = v + (dt / eps) * (force - gam * v) + noise / eps
    else:
        a = gam * dt / eps
        decay = np.exp(-a)
        v_new = decay * v + (-np.expm1(-a)) * force / gam + (_phi1m(a) / eps) * noise
    x_new = x + dt * v_new
    _check_finite("step_kinetic", x_new, v_new)
    return KineticEnsemble(positions=x_new, velocities=v_new, t=ens.t + dt, eps=eps)


def noise_induced_drift(model: ModelSpec, positions):
    """Friction-gradient drift (1/2) sum_k |sigma_k|^2 grad(gamma) gamma^{-3}."""
    x = _as_ensemble_array("positions", positions)
    sq = model.noise.sq_sum(x)[..., None]          # (N, 1)
    gam = model.friction.value(x)[..., None]       # (N, 1)
    grad = model.friction.grad(x)                  # (N, d)
    return 0.5 * sq * grad / gam**3


def step_overdamped(model: ModelSpec, ens: OverdampedEnsemble, dt, common_incr,
                    idio_incr=None, force=None) -> OverdampedEnsemble:
    """Euler-Maruyama step of the overdamped candidate selected by ens.term_flags.

    `idio_incr` carries the per-particle increments ΔW_i, shape (N, d);
    it must be present exactly when term_flags.independent_noise is set.
    """
    dt = float(dt)
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    flags = ens.term_flags
    x = ens.positions
    if force is None:
        force = meanfield_force(model, x)
    gam = model.friction.value(x)[..., None]
    drift = force / gam
    if flags.noise_induced_drift:
        drift = drift + noise_induced_drift(model, x)
    x_new = x + dt * drift + _sigma_contract(model, x, common_incr) / gam
    if flags.independent_noise:
        if idio_incr is None:
            raise ConfigError(
                "term_flags.independent_noise is set but no idiosyncratic increments were given"
            )
        idio = np.asarray(idio_incr, dtype=float)
        if idio.shape != x.shape:
            raise ConfigError(
                f"idiosyncratic increments must have shape {x.shape}, got {idio.shape}"
            )
        amp = np.sqrt(0.5 * model.noise.sq_sum(x))[..., None]
        x_new = x_new + amp * idio / gam
    elif idio_incr is not None:
        raise ConfigError(
            "idiosyncratic increments were given but term_flags.independent_noise is off"
        )
    _check_finite("step_overdamped", x_new)
    return OverdampedEnsemble(positions=x_new, t=ens.t + dt, term_flags=flags)


def frozen_velocity_moments(model: ModelSpec, x, force, eps, t,
                            v0_mean=None, v0_cov=None):
    """Exact mean and second moment of the velocity with coefficients frozen at x.

    With gamma = gamma(x) and F = force held fixed, the velocity solves a
    linear SDE whose Gaussian law is known in closed form:

        mean(t)  = e^{-gamma t/eps} v0_mean + (1 - e^{-gamma t/eps}) F / gamma
        cov(t)   = e^{-2 gamma t/eps} v0_cov
                   + S(x) (1 - e^{-2 gamma t/eps}) / (2 gamma eps)

    where S(x) = sum_k sigma_k sigma_k^T.  Returns (mean, second_moment)
    with second_moment = cov + mean mean^T, so eps * second_moment tends to
    S(x) / (2 gamma) as t/eps grows.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    force = np.asarray(force, dtype=float).reshape(-1)
    if v0_mean is None:
        v0_mean = model.initial_law.mean_v
    if v0_cov is None:
        v0_cov = np.eye(x.shape[1])
    v0_mean = np.asarray(v0_mean, dtype=float).reshape(-1)
    v0_cov = np.asarray(v0_cov, dtype=float)
    d = x.shape[1]
    if force.shape != (d,) or v0_mean.shape != (d,) or v0_cov.shape != (d, d):
        raise ConfigError("force, v0_mean, v0_cov must match the position dimension")
    if not (float(eps) > 0 and float(t) >= 0):
        raise ConfigError("need eps > 0 and t >= 0")
    gam = float(model.friction.value(x)[0])
    decay = np.exp(-gam * float(t) / float(eps))
    mean = decay * v0_mean + (1.0 - decay) * force / gam
    s_mat = model.noise.matrix(x[0])
    cov = decay**2 * v0_cov + s_mat * (1.0 - decay**2) / (2.0 * gam * float(eps))
    second = cov + np.outer(mean, mean)
    return mean, second


def frozen_velocity_sample(model: ModelSpec, x, force, eps, t, n, seed,
                           v0_mean=None, v0_cov=None):
    """Exact Gaussian velocity samples for the frozen-coefficient system.

    No time-stepping error: samples are drawn from the closed-form law of
    frozen_velocity_moments.  Deterministic given `seed` (an int or a
    numpy Generator).  v0 defaults to the model's initial velocity law
    (standard Gaussian).
    """
    if int(n) < 1:
        raise ConfigError(f"need n >= 1 samples, got {n!r}")
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.shape[0]
    if v0_mean is None:
        v0_mean = np.asarray(model.initial_law.mean_v, dtype=float)
    if v0_cov is None:
        v0_cov = np.eye(d)
    mean, second = frozen_velocity_moments(model, x, force, eps, t, v0_mean, v0_cov)
    cov = second - np.outer(mean, mean)
    # eigh handles the degenerate (rank-deficient) covariances that arise
    # at t = 0 with a deterministic start.
    evals, evecs = np.linalg.eigh(cov)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(int(seed))
    z = rng.standard_normal((int(n), d))
    return mean + z @ root.T
