"""Hand-built models shared across the tests.

Everything here follows the library's field conventions: friction returns a
scalar per particle (shape (...,)), the kernel acts on displacement vectors
(shape (..., d) -> (..., d)), and noise channels return (..., m, d).
"""
import numpy as np

from smallmass import Friction, InitialLaw, Kernel, ModelSpec, NoiseFamily


def constant_friction(level=2.0):
    return Friction(
        value=lambda x: np.full(x.shape[:-1], float(level)),
        grad=lambda x: np.zeros_like(x),
        lower=float(level),
        upper=float(level),
        grad_bound=0.0,
    )


def zero_kernel():
    return Kernel(value=lambda z: np.zeros_like(z), lipschitz=0.0)


def constant_kernel(value):
    """K(z) = value in every coordinate, so the pair average is a constant force."""

    def k(z):
        out = np.empty_like(z)
        out[...] = float(value)
        return out

    return Kernel(value=k, lipschitz=0.0)


def unit_noise(d=1):
    """One channel, sigma identically equal to the all-ones vector."""
    return NoiseFamily(
        channels=lambda x: np.ones(x.shape[:-1] + (1, d)),
        n_channels=1,
        sup_sum=float(np.sqrt(d)),
    )


def zero_noise(d=1):
    return NoiseFamily(
        channels=lambda x: np.zeros(x.shape[:-1] + (1, d)),
        n_channels=1,
        sup_sum=0.0,
    )


def gaussian_law(d=1):
    return InitialLaw(kind="standard-gaussian", mean_x=np.zeros(d), mean_v=np.zeros(d))


def point_law(d=1, mean_x=None, mean_v=None):
    return InitialLaw(
        kind="point",
        mean_x=np.zeros(d) if mean_x is None else np.asarray(mean_x, dtype=float),
        mean_v=np.zeros(d) if mean_v is None else np.asarray(mean_v, dtype=float),
    )


def frozen_model(gamma=2.0, d=1):
    """Constant friction, unit noise, no interaction: the exactly solvable case."""
    return ModelSpec(
        name="frozen-test",
        d=d,
        friction=constant_friction(gamma),
        kernel=zero_kernel(),
        noise=unit_noise(d),
        initial_law=gaussian_law(d),
    )


def resting_model():
    """No kernel, no noise, point start at rest: nothing ever moves."""
    return ModelSpec(
        name="rest",
        d=1,
        friction=constant_friction(2.0),
        kernel=zero_kernel(),
        noise=zero_noise(1),
        initial_law=point_law(1),
    )


def tiny_config(**overrides):
    """A seconds-scale experiment configuration for end-to-end tests."""
    from smallmass import ExperimentConfig

    base = dict(
        preset="1d-tanh-friction",
        eps_grid=(0.2, 0.1),
        n_particles=24,
        replicas=2,
        horizon=0.1,
        s0=0.05,
        dt_fine=1e-3,
        dt_overdamped=1e-2,
        checkpoint_times=(0.05, 0.1),
        snapshot_dt=0.05,
        holder_lags=(0.05,),
        frozen_eps=(0.1, 0.05, 0.025),
        threads=1,
    )
    base.update(overrides)
    return ExperimentConfig(**base)
