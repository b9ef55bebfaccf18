"""Simulation and verification harness for an interacting kinetic particle
system with environmental (common) noise, state-dependent friction, and a
small mass parameter, together with candidate overdamped limits.

Layout:

* :mod:`smallmass.model` — model descriptions (friction, kernel, noise
  family, initial law), presets, and structural validation.
* :mod:`smallmass.noise` — reproducible Brownian grids keyed by
  (seed, role, indices), coarsening, and binary dump/load.
* :mod:`smallmass.dynamics` — kinetic and overdamped steppers, the
  noise-induced drift, and exact frozen-coefficient velocity statistics.
* :mod:`smallmass.meanfield` — empirical fields, bump test functions, and
  the window-averaged momentum pairing.
* :mod:`smallmass.metrics` — Wasserstein-2 distances, moment/Hölder
  estimators, and log-log order fits.
* :mod:`smallmass.config` / :mod:`smallmass.experiments` /
  :mod:`smallmass.reporting` / :mod:`smallmass.cli` — the config-driven
  experiment harness with deterministic CSV/JSON reports.
"""

from ._version import __version__
from .config import ExperimentConfig, THREADS_ENV_VAR
from .dynamics import (
    SCHEMES,
    VARIANT_NAMES,
    VARIANTS,
    KineticEnsemble,
    OverdampedEnsemble,
    TermFlags,
    euler_stability_bound,
    frozen_velocity_moments,
    frozen_velocity_sample,
    meanfield_force,
    noise_induced_drift,
    step_kinetic,
    step_overdamped,
)
from .errors import ConfigError, NumericalError
from .experiments import (
    frozen_residuals,
    run_ablation,
    run_all,
    run_convergence,
    run_lemma_checks,
    run_momentum_diagnostic,
    run_replica,
    run_simulation,
)
from .meanfield import (
    BinnedField,
    ConditionalReplica,
    TestFunction,
    averaged_momentum_pairing,
    binned_pair_momentum,
    local_fields,
    momentum_windows,
    pair_momentum,
    pairing_coefficients,
)
from .metrics import (
    OrderFit,
    holder_curve,
    order_fit,
    second_moment_sup,
    sliced_w2,
    w2_1d_exact,
    w2_matching_oracle,
)
from .model import (
    PRESET_NAMES,
    Friction,
    InitialLaw,
    Kernel,
    ModelSpec,
    NoiseFamily,
    ValidationCheck,
    ValidationReport,
    make_preset,
    register_preset,
    validate_model,
)
from .noise import (
    BrownianGrid,
    StreamRole,
    coarsen,
    derive_rng,
    generate_common,
    generate_idiosyncratic,
    read_grid,
    steps_for,
    write_grid,
)
from .reporting import ExperimentReport, Table

__all__ = [
    "__version__",
    "ConfigError",
    "NumericalError",
    "ExperimentConfig",
    "THREADS_ENV_VAR",
    "Friction",
    "Kernel",
    "NoiseFamily",
    "InitialLaw",
    "ModelSpec",
    "PRESET_NAMES",
    "make_preset",
    "register_preset",
    "validate_model",
    "ValidationCheck",
    "ValidationReport",
    "StreamRole",
    "BrownianGrid",
    "derive_rng",
    "generate_common",
    "generate_idiosyncratic",
    "coarsen",
    "read_grid",
    "write_grid",
    "steps_for",
    "SCHEMES",
    "VARIANTS",
    "VARIANT_NAMES",
    "TermFlags",
    "KineticEnsemble",
    "OverdampedEnsemble",
    "meanfield_force",
    "step_kinetic",
    "step_overdamped",
    "noise_induced_drift",
    "euler_stability_bound",
    "frozen_velocity_moments",
    "frozen_velocity_sample",
    "TestFunction",
    "BinnedField",
    "ConditionalReplica",
    "local_fields",
    "pair_momentum",
    "binned_pair_momentum",
    "pairing_coefficients",
    "averaged_momentum_pairing",
    "momentum_windows",
    "w2_1d_exact",
    "w2_matching_oracle",
    "sliced_w2",
    "second_moment_sup",
    "holder_curve",
    "order_fit",
    "OrderFit",
    "run_convergence",
    "run_ablation",
    "run_lemma_checks",
    "run_momentum_diagnostic",
    "run_simulation",
    "run_all",
    "run_replica",
    "frozen_residuals",
    "ExperimentReport",
    "Table",
]
