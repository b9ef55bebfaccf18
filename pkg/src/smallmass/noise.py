"""Seeded Brownian increment grids.

Every stream of randomness is keyed by (root seed, role, indices) through a
counter-style derivation: the key tuple feeds a SeedSequence driving a Philox
generator, so a stream's content depends only on its key, never on draw order
or worker count.  Roles separate common channels, idiosyncratic particle
channels, initial-condition sampling, and projection directions.

Grids are generated once at the finest step size an experiment needs and
coarsened by exact block sums, so every mass value and both dynamical systems
see the same realization of the common path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import IntEnum
import math
import struct

import numpy as np

from .errors import ConfigError


class StreamRole(IntEnum):
    COMMON = 1
    IDIOSYNCRATIC = 2
    INITIAL_LAW = 3
    PROJECTION = 4


def derive_rng(root_seed, role, *indices):
    """Independent generator for (root, role, indices); pure function of its key."""
    key = (int(root_seed), int(role)) + tuple(int(i) for i in indices)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def steps_for(horizon, dt):
    """Number of steps covering [0, horizon]; dt must divide the horizon."""
    if dt <= 0 or horizon <= 0:
        raise ConfigError(f"horizon and dt must be positive, got {horizon}, {dt}")
    n = math.ceil(horizon / dt - 1e-9)
    if abs(n * dt - horizon) > 1e-12 * max(1.0, abs(horizon)):
        raise ConfigError(
            f"dt={dt!r} does not divide horizon={horizon!r} "
            f"(n*dt deviates by {abs(n * dt - horizon)!r})"
        )
    return n


@dataclass(frozen=True)
class BrownianGrid:
    """Increments of one or many Brownian channels on a regular grid.

    increments has shape (n_steps, m) for common grids and
    (n_steps, n_particles, d) for idiosyncratic grids.
    """

    dt: float
    n_steps: int
    increments: np.ndarray
    role: StreamRole
    root_seed: int
    replica: int
    coarsened_by: tuple = ()

    @property
    def horizon(self):
        return self.n_steps * self.dt


def generate_common(m, horizon, dt, root_seed, replica):
    """Common-channel grid: one independent stream per channel index."""
    n = steps_for(horizon, dt)
    incr = np.empty((n, m))
    scale = math.sqrt(dt)
    for k in range(m):
        rng = derive_rng(root_seed, StreamRole.COMMON, replica, k)
        incr[:, k] = scale * rng.standard_normal(n)
    return BrownianGrid(
        dt=dt,
        n_steps=n,
        increments=incr,
        role=StreamRole.COMMON,
        root_seed=int(root_seed),
        replica=int(replica),
    )


def generate_idiosyncratic(n_particles, d, horizon, dt, root_seed, replica):
    """Per-particle grid: one independent stream per particle index.

    Keying streams by particle id means enlarging the ensemble leaves the
    paths of existing particles unchanged.
    """
    n = steps_for(horizon, dt)
    incr = np.empty((n, n_particles, d))
    scale = math.sqrt(dt)
    for i in range(n_particles):
        rng = derive_rng(root_seed, StreamRole.IDIOSYNCRATIC, replica, i)
        incr[:, i, :] = scale * rng.standard_normal((n, d))
    return BrownianGrid(
        dt=dt,
        n_steps=n,
        increments=incr,
        role=StreamRole.IDIOSYNCRATIC,
        root_seed=int(root_seed),
        replica=int(replica),
    )


def coarsen(grid, factor):
    """Merge consecutive increments in exact blocks of ``factor``."""
    factor = int(factor)
    if factor < 1:
        raise ConfigError(f"coarsening factor must be >= 1, got {factor}")
    if grid.n_steps % factor != 0:
        raise ConfigError(
            f"factor {factor} does not divide n_steps={grid.n_steps}"
        )
    if factor == 1:
        return grid
    starts = np.arange(0, grid.n_steps, factor)
    incr = np.add.reduceat(grid.increments, starts, axis=0)
    return replace(
        grid,
        dt=grid.dt * factor,
        n_steps=grid.n_steps // factor,
        increments=incr,
        coarsened_by=grid.coarsened_by + (factor,),
    )


_MAGIC = b"SMBG"
_VERSION = 1


def write_grid(grid, path):
    """Binary dump: fixed little-endian header, float64 increments body."""
    shape = grid.increments.shape
    header = struct.pack(
        "<4sIIqqdqI",
        _MAGIC,
        _VERSION,
        int(grid.role),
        int(grid.root_seed),
        int(grid.replica),
        float(grid.dt),
        int(grid.n_steps),
        len(shape),
    )
    dims = struct.pack(f"<{len(shape)}q", *shape)
    body = np.ascontiguousarray(grid.increments, dtype="<f8").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(body)


def read_grid(path):
    """Read a grid written by ``write_grid``; validates magic and version."""
    with open(path, "rb") as f:
        raw = f.read()
    head_size = struct.calcsize("<4sIIqqdqI")
    if raw[:4] != _MAGIC or len(raw) < head_size:
        raise ConfigError(f"not a Brownian grid file (magic {raw[:4]!r})")
    magic, version, role, root, replica, dt, n_steps, ndim = struct.unpack(
        "<4sIIqqdqI", raw[:head_size]
    )
    if version != _VERSION:
        raise ConfigError(f"unsupported grid format version {version}")
    dims = struct.unpack(f"<{ndim}q", raw[head_size : head_size + 8 * ndim])
    body = raw[head_size + 8 * ndim :]
    incr = np.frombuffer(body, dtype="<f8").reshape(dims).copy()
    return BrownianGrid(
        dt=dt,
        n_steps=n_steps,
        increments=incr,
        role=StreamRole(role),
        root_seed=root,
        replica=replica,
    )
