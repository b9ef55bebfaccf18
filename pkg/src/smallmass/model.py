"""Model descriptions for the interacting kinetic particle system.

The system under study is an ensemble of N particles (X_i, V_i) in R^d driven
by a shared ("common") Brownian motion B = (B^1, ..., B^m):

    dX_i = V_i dt
    eps dV_i = -gamma(X_i) V_i dt + (1/N) sum_j K(X_i - X_j) dt
               + sum_k sigma_k(X_i) dB^k

with state-dependent friction gamma, interaction kernel K, and noise fields
sigma_k.  The mass parameter eps is a runtime quantity, not part of the model.

Standing structural assumptions (checked by ``validate_model``):

  * K is globally Lipschitz,
  * 0 < gamma_lo <= gamma(x) <= gamma_hi with bounded gradient,
  * each sigma_k is divergence free, sum_k sigma_k(x) sigma_k(x)^T = I_d,
    and sum_k sup_x |sigma_k(x)| is finite.

All field callables are vectorized: they accept arrays shaped (..., d).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Friction:
    """State-dependent friction coefficient gamma with declared bounds."""

    value: callable          # (..., d) -> (...,)
    grad: callable           # (..., d) -> (..., d)
    lower: float             # gamma_lo > 0
    upper: float             # gamma_hi
    grad_bound: float        # sup |grad gamma|


@dataclass(frozen=True)
class Kernel:
    """Pairwise interaction kernel K acting on displacement vectors."""

    value: callable          # (..., d) -> (..., d)
    lipschitz: float


@dataclass(frozen=True)
class NoiseFamily:
    """The family sigma_1..sigma_m of common-noise coefficient fields.

    ``channels(x)`` maps positions (..., d) to coefficients (..., m, d).
    ``sup_sum`` is the declared value of sum_k sup_x |sigma_k(x)|.
    """

    channels: callable
    n_channels: int
    sup_sum: float

    def sq_sum(self, x):
        """sum_k |sigma_k(x)|^2, shape (...,)."""
        ch = self.channels(np.asarray(x, dtype=float))
        return np.sum(ch * ch, axis=(-2, -1))

    def matrix(self, x):
        """sum_k sigma_k(x) sigma_k(x)^T at a single point x, shape (d, d)."""
        ch = self.channels(np.asarray(x, dtype=float).reshape(-1))  # (m, d)
        return ch.T @ ch


@dataclass(frozen=True)
class InitialLaw:
    """Deterministic initial law for (X_0, V_0); sampled with a seeded generator."""

    kind: str
    mean_x: np.ndarray
    mean_v: np.ndarray

    def sample(self, n, rng):
        d = self.mean_x.shape[0]
        if self.kind == "standard-gaussian":
            x0 = self.mean_x + rng.standard_normal((n, d))
            v0 = self.mean_v + rng.standard_normal((n, d))
        elif self.kind == "point":
            # point mass: every particle starts exactly at (mean_x, mean_v)
            x0 = np.tile(self.mean_x, (n, 1))
            v0 = np.tile(self.mean_v, (n, 1))
        else:
            raise ConfigError(f"unknown initial law kind {self.kind!r}")
        return x0, v0


@dataclass(frozen=True)
class ModelSpec:
    """A complete particle-system description (dimension, fields, initial law)."""

    name: str
    d: int
    friction: Friction
    kernel: Kernel
    noise: NoiseFamily
    initial_law: InitialLaw

    @property
    def m(self):
        return self.noise.n_channels


def _tanh_friction(d):
    def value(x):
        x = np.asarray(x, dtype=float)
        return 2.0 + np.tanh(x[..., 0])

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., 0] = 1.0 / np.cosh(x[..., 0]) ** 2
        return g

    return Friction(value=value, grad=grad, lower=1.0, upper=3.0, grad_bound=1.0)


def _constant_friction(d, level=2.0):
    def value(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], level)

    def grad(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Friction(value=value, grad=grad, lower=level, upper=level, grad_bound=0.0)


def _tanh_kernel():
    return Kernel(value=lambda z: -np.tanh(z), lipschitz=1.0)


def _constant_noise(vectors):
    """Noise family with constant sigma_k given by the rows of ``vectors`` (m, d)."""
    vecs = np.asarray(vectors, dtype=float)
    m, d = vecs.shape

    def channels(x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape[:-1] + (m, d))
        out[...] = vecs
        return out

    sup_sum = float(np.sqrt((vecs * vecs).sum(axis=1)).sum())
    return NoiseFamily(channels=channels, n_channels=m, sup_sum=sup_sum)


def _standard_gaussian_law(d):
    return InitialLaw(kind="standard-gaussian", mean_x=np.zeros(d), mean_v=np.zeros(d))


def _preset_1d_tanh():
    return ModelSpec(
        name="1d-tanh-friction",
        d=1,
        friction=_tanh_friction(1),
        kernel=_tanh_kernel(),
        noise=_constant_noise([[1.0]]),
        initial_law=_standard_gaussian_law(1),
    )


def _preset_1d_constant():
    return ModelSpec(
        name="1d-constant-friction",
        d=1,
        friction=_constant_friction(1),
        kernel=_tanh_kernel(),
        noise=_constant_noise([[1.0]]),
        initial_law=_standard_gaussian_law(1),
    )


def _preset_2d_constant_sigma():
    return ModelSpec(
        name="2d-constant-sigma",
        d=2,
        friction=_tanh_friction(2),
        kernel=_tanh_kernel(),
        noise=_constant_noise([[1.0, 0.0], [0.0, 1.0]]),
        initial_law=_standard_gaussian_law(2),
    )


_PRESETS = {
    "1d-tanh-friction": _preset_1d_tanh,
    "1d-constant-friction": _preset_1d_constant,
    "2d-constant-sigma": _preset_2d_constant_sigma,
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def make_preset(name):
    """Build a named preset model; unknown names raise with the valid list."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; valid presets: {', '.join(sorted(_PRESETS))}"
        ) from None
    return factory()


def register_preset(name, factory):
    """Register a custom model factory under `name` (process-local).

    Lets experiments run on models beyond the built-ins, e.g. degenerate
    systems used as exact checks. Registration does not propagate to
    worker processes, so configs using a custom preset need threads=1.
    """
    if name in _PRESETS:
        raise ConfigError(f"preset {name!r} already registered")
    _PRESETS[name] = factory


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    worst: float
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    model_name: str
    n_samples: int
    box_halfwidth: float
    tolerance: float
    seed: int
    checks: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "model": self.model_name,
            "n_samples": self.n_samples,
            "box_halfwidth": self.box_halfwidth,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "worst": c.worst,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def validate_model(model, n_samples=10000, box_halfwidth=5.0, tol=1e-6, seed=0):
    """Check the structural assumptions on sampled points in a box.

    Failures are reported, not raised: every assumption becomes one
    ``ValidationCheck`` with the worst observed margin.  The report is a
    deterministic function of (model, n_samples, box_halfwidth, tol, seed).
    """
    rng = np.random.default_rng(seed)
    d = model.d
    x = rng.uniform(-box_halfwidth, box_halfwidth, size=(n_samples, d))
    y = rng.uniform(-box_halfwidth, box_halfwidth, size=(n_samples, d))
    checks = []

    def add(name, passed, worst, detail):
        checks.append(ValidationCheck(name, bool(passed), float(worst), detail))

    # friction positivity and declared range
    g = model.friction.value(x)
    add(
        "friction_positive",
        model.friction.lower > 0 and g.min() > 0,
        g.min(),
        f"min sampled gamma = {float(g.min())!r}, declared lower = {model.friction.lower!r}",
    )
    range_ok = (g.min() >= model.friction.lower - tol) and (
        g.max() <= model.friction.upper + tol
    )
    add(
        "friction_range",
        range_ok,
        max(model.friction.lower - g.min(), g.max() - model.friction.upper),
        f"sampled gamma in [{float(g.min())!r}, {float(g.max())!r}]",
    )

    # gradient agrees with central differences and respects its bound
    h = 1e-6
    fd = np.empty_like(x)
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        fd[:, j] = (model.friction.value(x + e) - model.friction.value(x - e)) / (2 * h)
    ga = model.friction.grad(x)
    gerr = np.abs(ga - fd).max()
    add(
        "friction_grad_consistent",
        gerr <= 100 * tol,
        gerr,
        "analytic gradient vs central differences",
    )
    gn = np.sqrt((ga * ga).sum(axis=1))
    add(
        "friction_grad_bound",
        gn.max() <= model.friction.grad_bound + tol,
        gn.max() - model.friction.grad_bound,
        f"max |grad gamma| = {float(gn.max())!r}",
    )

    # kernel Lipschitz constant on sampled pairs
    kx = model.kernel.value(x)
    ky = model.kernel.value(y)
    num = np.sqrt(((kx - ky) ** 2).sum(axis=1))
    den = np.sqrt(((x - y) ** 2).sum(axis=1))
    keep = den > 1e-12
    ratio = num[keep] / den[keep]
    add(
        "kernel_lipschitz",
        ratio.max() <= model.kernel.lipschitz + tol,
        ratio.max() - model.kernel.lipschitz,
        f"max sampled ratio = {float(ratio.max())!r}, declared = {model.kernel.lipschitz!r}",
    )

    # noise: divergence free channels, sum_j d sigma_k^j / dx_j = 0
    hs = 1e-5
    div = np.zeros((n_samples, model.m))
    for j in range(d):
        e = np.zeros(d)
        e[j] = hs
        cp = model.noise.channels(x + e)[..., :, j]
        cm = model.noise.channels(x - e)[..., :, j]
        div += (cp - cm) / (2 * hs)
    add(
        "noise_divergence_free",
        np.abs(div).max() <= 100 * tol,
        np.abs(div).max(),
        "central-difference divergence of each channel",
    )

    # noise: sum_k sigma_k sigma_k^T = identity
    ch = model.noise.channels(x)  # (n, m, d)
    qq = np.einsum("nmi,nmj->nij", ch, ch)
    qerr = np.abs(qq - np.eye(d)).max()
    add(
        "noise_covariance_identity",
        qerr <= tol,
        qerr,
        "sum_k sigma_k sigma_k^T vs identity",
    )

    # noise: summed sup bound
    norms = np.sqrt((ch * ch).sum(axis=2))  # (n, m)
    ssum = norms.max(axis=0).sum()
    add(
        "noise_sup_sum_bound",
        ssum <= model.noise.sup_sum + tol,
        ssum - model.noise.sup_sum,
        f"sum_k max sampled |sigma_k| = {float(ssum)!r}, declared = {model.noise.sup_sum!r}",
    )

    return ValidationReport(
        model_name=model.name,
        n_samples=n_samples,
        box_halfwidth=box_halfwidth,
        tolerance=tol,
        seed=seed,
        checks=tuple(checks),
    )
