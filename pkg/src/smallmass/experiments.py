"""Config-driven experiments over replicas of the coupled particle systems.

One replica = one realization of the common noise.  Within a replica the
kinetic system (one run per mass eps) and the three overdamped variants all
consume the same common path — the kinetic runs at the fine step, the
overdamped runs at a coarsened step whose increments are exact block sums
of the fine ones.  That coupling is what makes the Wasserstein distances
meaningful conditionally on the environment, and it is audited: every
evolve loop hashes the increments it consumed, and the digests must match
the grids they were supposed to consume.

Replicas own disjoint RNG lineages and may run in separate processes;
results are reduced in replica order, so output bytes do not depend on the
worker count.  Wall-clock time is printed to stderr and never written to
files.
"""

from __future__ import annotations

import hashlib
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import reduce

import numpy as np

from .config import ExperimentConfig
from .dynamics import (
    VARIANTS,
    KineticEnsemble,
    OverdampedEnsemble,
    frozen_velocity_moments,
    meanfield_force,
    step_kinetic,
    step_overdamped,
)
from .errors import ConfigError
from .meanfield import (
    ConditionalReplica,
    TestFunction,
    local_fields,
    momentum_windows,
    pair_momentum,
    pairing_coefficients,
)
from .metrics import holder_curve, order_fit, sliced_w2, w2_1d_exact
from .model import make_preset
from .noise import StreamRole, coarsen, derive_rng, generate_common, generate_idiosyncratic
from .reporting import ExperimentReport, Table

_AUDIT_BYTES = 16

#: parts a replica pass can compute; experiments request subsets
PART_W2 = "w2"
PART_MOMENTS = "moments"
PART_MOMENTUM = "momentum"
PART_FIELDS = "fields"


def _ekey(eps):
    return repr(float(eps))


def _pair_dtype(cfg):
    return np.float32 if cfg.pair_precision == "single" else np.float64


def _digest(array):
    return hashlib.blake2b(array.tobytes(), digest_size=_AUDIT_BYTES).hexdigest()


def _refine_factor(cfg, model, eps):
    """How many sub-steps of dt_fine the kinetic run takes at this eps.

    The exponential scheme is unconditionally stable and always runs at
    dt_fine.  Euler-Maruyama aims at dt <= eps/(10*gamma_hi); the factor is
    chosen so the refined step divides dt_fine exactly and the shared noise
    grid can be generated once at the finest step and coarsened for every
    consumer.
    """
    if cfg.scheme == "exponential":
        return 1
    target = eps / (10.0 * model.friction.upper)
    return max(1, math.ceil(cfg.dt_fine / target - 1e-12))


def _mean_se(values):
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def _evolve_kinetic(model, cfg, eps, grid, x0, v0, psi, parts):
    """Run the kinetic system once, collecting whatever `parts` ask for."""
    dt = grid.dt
    incr = grid.increments
    n = grid.n_steps
    dtype = _pair_dtype(cfg)

    check_idx = {}
    for t in cfg.checkpoint_times:
        idx = round(t / dt)
        check_idx[idx] = t
    snap_every = round(cfg.snapshot_dt / dt)

    want_momentum = PART_MOMENTUM in parts
    want_moments = PART_MOMENTS in parts
    want_fields = PART_FIELDS in parts
    want_w2 = PART_W2 in parts

    windows, starts = [], {}
    pm = det = sigc = None
    if want_momentum:
        windows = momentum_windows(
            cfg.s0, cfg.horizon, dt, eps, cfg.delta_coeff, cfg.window_floor_steps
        )
        starts = {lo: k for k, (lo, hi) in enumerate(windows)}
        pm = np.empty(n + 1)
        det = np.empty(len(windows))
        sigc = np.empty((len(windows), model.m))

    ens = KineticEnsemble(positions=x0, velocities=v0, t=0.0, eps=eps)
    if want_momentum:
        pm[0] = pair_momentum(ens, psi)
    sup_sq = (ens.positions**2).sum(axis=1) if want_moments else None
    snaps = [ens.positions.copy()] if want_moments else None
    snap_times = [0.0] if want_moments else None
    field_rows = []
    if want_fields:
        field_rows.extend(
            local_fields(ens, cfg.fields_x_min, cfg.fields_x_max, cfg.fields_n_bins).rows(0.0)
        )
    checkpoints = {}
    audit = hashlib.blake2b(digest_size=_AUDIT_BYTES)

    for i in range(n):
        x = ens.positions
        force = meanfield_force(model, x, pair_dtype=dtype)
        if want_momentum and i in starts:
            k = starts[i]
            det[k], sigc[k] = pairing_coefficients(model, x, psi, force=force)
        db = incr[i]
        audit.update(db.tobytes())
        ens = step_kinetic(model, ens, dt, db, scheme=cfg.scheme, force=force)
        if want_momentum:
            pm[i + 1] = pair_momentum(ens, psi)
        if want_moments:
            np.maximum(sup_sq, (ens.positions**2).sum(axis=1), out=sup_sq)
        if (want_moments or want_fields) and (i + 1) % snap_every == 0:
            t_now = (i + 1) * dt
            if want_moments:
                snaps.append(ens.positions.copy())
                snap_times.append(t_now)
            if want_fields:
                field_rows.extend(
                    local_fields(
                        ens, cfg.fields_x_min, cfg.fields_x_max, cfg.fields_n_bins
                    ).rows(t_now)
                )
        if want_w2 and (i + 1) in check_idx:
            checkpoints[check_idx[i + 1]] = ens.positions.copy()

    out = {
        "audit": audit.hexdigest(),
        "audit_reference": _digest(incr),
        "final": ens,
    }
    if want_w2:
        out["checkpoints"] = checkpoints
    if want_moments:
        out["sup_moment"] = float(np.mean(sup_sq))
        times = np.asarray(snap_times)
        keep = times >= cfg.s0 - 1e-12
        traj = np.asarray(snaps)[keep]
        lags, msd = holder_curve(traj, cfg.snapshot_dt, cfg.holder_lags)
        out["msd"] = [(float(l), float(m)) for l, m in zip(lags, msd)]
    if want_momentum:
        gap_signed = 0.0
        for k, (lo, hi) in enumerate(windows):
            lhs = dt * (0.5 * pm[lo] + pm[lo + 1 : hi].sum() + 0.5 * pm[hi])
            db_w = incr[lo:hi].sum(axis=0)
            rhs = (hi - lo) * dt * det[k] + float(sigc[k] @ db_w)
            gap_signed += lhs - rhs
        out["momentum_gap"] = abs(gap_signed)
        out["n_windows"] = len(windows)
    if want_fields:
        out["field_rows"] = field_rows
    return out


def _evolve_overdamped(model, cfg, flags, x0, grid, idio_incr):
    """Run one overdamped variant along a coarse common grid."""
    dt = grid.dt
    incr = grid.increments
    n = grid.n_steps
    dtype = _pair_dtype(cfg)
    check_idx = {round(t / dt): t for t in cfg.checkpoint_times}

    ens = OverdampedEnsemble(positions=x0, t=0.0, term_flags=flags)
    checkpoints = {}
    audit = hashlib.blake2b(digest_size=_AUDIT_BYTES)
    for i in range(n):
        force = meanfield_force(model, ens.positions, pair_dtype=dtype)
        db = incr[i]
        audit.update(db.tobytes())
        idio = idio_incr[i] if flags.independent_noise else None
        ens = step_overdamped(model, ens, dt, db, idio_incr=idio, force=force)
        if (i + 1) in check_idx:
            checkpoints[check_idx[i + 1]] = ens.positions.copy()
    return {"checkpoints": checkpoints, "audit": audit.hexdigest(), "final": ens}


def _compare_clouds(cfg, model, replica, kin_cloud, over_cloud):
    if model.d == 1:
        return w2_1d_exact(kin_cloud[:, 0], over_cloud[:, 0])
    rng = derive_rng(cfg.seed, StreamRole.PROJECTION, replica)
    return sliced_w2(kin_cloud, over_cloud, n_projections=64, seed=rng)


def _replica_pass(cfg, replica, parts, keep_ensembles=False):
    """Everything one replica contributes, as plain picklable data."""
    model = make_preset(cfg.preset)
    if (PART_MOMENTUM in parts or PART_FIELDS in parts) and model.d != 1:
        raise ConfigError(
            "the momentum diagnostic and binned fields are one-dimensional only; "
            f"preset {cfg.preset!r} has d = {model.d}"
        )
    rng_init = derive_rng(cfg.seed, StreamRole.INITIAL_LAW, replica)
    x0, v0 = model.initial_law.sample(cfg.n_particles, rng_init)
    psi = TestFunction(center=cfg.bump_center, halfwidth=cfg.bump_halfwidth)

    factors = {eps: _refine_factor(cfg, model, eps) for eps in cfg.eps_grid}
    gen_factor = reduce(math.lcm, factors.values(), 1)
    dt_gen = cfg.dt_fine / gen_factor
    gen = generate_common(model.m, cfg.horizon, dt_gen, cfg.seed, replica)

    result = {"replica": replica}
    kinetic = {}
    kin_audit = {}
    for eps in cfg.eps_grid:
        c = gen_factor // factors[eps]
        kgrid = gen if c == 1 else coarsen(gen, c)
        kinetic[eps] = _evolve_kinetic(model, cfg, eps, kgrid, x0, v0, psi, parts)
        kin_audit[_ekey(eps)] = {
            "consumed": kinetic[eps]["audit"],
            "expected": kinetic[eps]["audit_reference"],
        }

    if PART_MOMENTS in parts:
        result["sup"] = {_ekey(eps): kinetic[eps]["sup_moment"] for eps in cfg.eps_grid}
        result["msd"] = {_ekey(eps): kinetic[eps]["msd"] for eps in cfg.eps_grid}
    if PART_MOMENTUM in parts:
        result["momentum"] = {
            _ekey(eps): (kinetic[eps]["momentum_gap"], kinetic[eps]["n_windows"])
            for eps in cfg.eps_grid
        }
    if PART_FIELDS in parts:
        result["fields"] = {_ekey(eps): kinetic[eps]["field_rows"] for eps in cfg.eps_grid}

    over = {}
    if PART_W2 in parts:
        over_factor = gen_factor * round(cfg.dt_overdamped / cfg.dt_fine)
        ogrid = gen if over_factor == 1 else coarsen(gen, over_factor)
        idio = generate_idiosyncratic(
            cfg.n_particles, model.d, cfg.horizon, cfg.dt_overdamped, cfg.seed, replica
        )
        for name, flags in VARIANTS.items():
            over[name] = _evolve_overdamped(model, cfg, flags, x0, ogrid, idio.increments)
        rows = []
        for eps in cfg.eps_grid:
            for t in cfg.checkpoint_times:
                kin_cloud = kinetic[eps]["checkpoints"][t]
                for name in VARIANTS:
                    w2 = _compare_clouds(cfg, model, replica, kin_cloud,
                                         over[name]["checkpoints"][t])
                    rows.append((float(eps), float(t), name, float(w2)))
        result["w2"] = rows
        coarse_reference = _digest(ogrid.increments)
        over_audits = {name: over[name]["audit"] for name in VARIANTS}
        match = all(d == coarse_reference for d in over_audits.values()) and all(
            a["consumed"] == a["expected"] for a in kin_audit.values()
        )
        result["audit"] = {
            "overdamped": over_audits,
            "overdamped_reference": coarse_reference,
            "kinetic": kin_audit,
            "match": bool(match),
        }
    else:
        result["audit"] = {
            "kinetic": kin_audit,
            "match": bool(all(a["consumed"] == a["expected"] for a in kin_audit.values())),
        }

    if keep_ensembles:
        result["_ensembles"] = {
            "kinetic": {eps: kinetic[eps]["final"] for eps in cfg.eps_grid},
            "overdamped": {name: over[name]["final"] for name in over},
            "common": gen,
        }
    return result


def _worker(payload):
    cfg, replica, parts = payload
    return _replica_pass(cfg, replica, frozenset(parts))


def _execute(cfg, parts):
    """Run all replicas, in parallel if asked, reducing in replica order."""
    parts = frozenset(parts)
    threads = cfg.resolved_threads()
    replicas = range(cfg.replicas)
    if threads <= 1 or cfg.replicas == 1:
        return [_replica_pass(cfg, r, parts) for r in replicas]
    payloads = [(cfg, r, tuple(sorted(parts))) for r in replicas]
    with ProcessPoolExecutor(max_workers=min(threads, cfg.replicas)) as pool:
        return list(pool.map(_worker, payloads))


_LINEAGE = {
    "generator": "Philox keyed by SeedSequence((root_seed, role, *indices))",
    "roles": {role.name.lower(): int(role) for role in StreamRole},
    "streams": {
        "common": "(root_seed, common, replica, channel)",
        "idiosyncratic": "(root_seed, idiosyncratic, replica, particle)",
        "initial_law": "(root_seed, initial_law, replica)",
        "projection": "(root_seed, projection, replica)",
    },
}


def _base_report(experiment, cfg, results):
    lineage = dict(_LINEAGE)
    lineage["root_seed"] = cfg.seed
    report = ExperimentReport(
        experiment=experiment,
        config=cfg.echo(),
        seed=cfg.seed,
        lineage=lineage,
        tables={},
        summary={},
    )
    report.summary["audit"] = [res["audit"] for res in results]
    report.summary["coupling_verified"] = bool(all(res["audit"]["match"] for res in results))
    return report


def _announce(report, started):
    report.wall_clock_seconds = time.perf_counter() - started
    print(
        f"[smallmass] {report.experiment}: wall-clock {report.wall_clock_seconds:.1f} s "
        "(not written to output files)",
        file=sys.stderr,
    )
    return report


def _convergence_table(cfg, results):
    rows = []
    for res in results:
        w2_by_key = {}
        for eps, t, name, w2 in res["w2"]:
            w2_by_key[(eps, t, name)] = w2
        for eps in cfg.eps_grid:
            for t in cfg.checkpoint_times:
                for name in VARIANTS:
                    rows.append(
                        (
                            float(eps),
                            res["replica"],
                            float(t),
                            name,
                            w2_by_key[(float(eps), float(t), name)],
                            cfg.n_particles,
                            cfg.seed,
                        )
                    )
    return Table(
        header=("epsilon", "replica", "time", "variant", "w2", "n_particles", "seed"),
        rows=rows,
    )


def _w2_stats(cfg, results):
    """means/ses keyed [variant][eps][time] plus per-replica finals."""
    stats = {}
    finals = {}
    t_final = cfg.checkpoint_times[-1]
    for name in VARIANTS:
        stats[name] = {}
        finals[name] = {}
        for eps in cfg.eps_grid:
            stats[name][_ekey(eps)] = {}
            vals_final = []
            for t in cfg.checkpoint_times:
                vals = []
                for res in results:
                    for e2, t2, n2, w2 in res["w2"]:
                        if (e2, t2, n2) == (float(eps), float(t), name):
                            vals.append(w2)
                mean, se = _mean_se(vals)
                stats[name][_ekey(eps)][repr(float(t))] = {"mean": mean, "se": se}
                if t == t_final:
                    vals_final = vals
            finals[name][_ekey(eps)] = vals_final
    return stats, finals


def _convergence_summary(cfg, results):
    stats, finals = _w2_stats(cfg, results)
    t_final = cfg.checkpoint_times[-1]
    summary = {"per_variant": {}, "final_time": float(t_final)}
    eps_keys = [_ekey(e) for e in cfg.eps_grid]
    for name in VARIANTS:
        means = [stats[name][k][repr(float(t_final))]["mean"] for k in eps_keys]
        entry = {
            "w2": stats[name],
            "final_means_by_eps": dict(zip(eps_keys, means)),
            "strictly_decreasing": bool(
                all(a > b for a, b in zip(means, means[1:]))
            ),
            "smallest_over_largest": float(means[-1] / means[0]) if means[0] > 0 else None,
        }
        if len(cfg.eps_grid) >= 3 and all(m > 0 for m in means):
            fit = order_fit(np.asarray(cfg.eps_grid), np.asarray(means))
            entry["order"] = {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
            }
        else:
            entry["order"] = None
        summary["per_variant"][name] = entry
    smallest = eps_keys[-1]
    final_by_variant = {
        name: summary["per_variant"][name]["final_means_by_eps"][smallest]
        for name in VARIANTS
    }
    # the adjudication is between the two candidate limits; the ablated
    # variant is a probe, not a candidate, so it does not compete here
    candidates = {k: v for k, v in final_by_variant.items() if k != "drift_ablated"}
    winner = min(candidates, key=candidates.get)
    ranked = sorted(candidates.values())
    summary["winner"] = {
        "variant": winner,
        "eps": float(cfg.eps_grid[-1]),
        "w2_mean": candidates[winner],
        "margin_over_runner_up": float(ranked[1] - ranked[0]) if len(ranked) > 1 else None,
        "final_w2_by_variant": final_by_variant,
    }
    return summary


def run_convergence(cfg: ExperimentConfig) -> ExperimentReport:
    """Small-mass convergence study: kinetic vs each overdamped variant."""
    started = time.perf_counter()
    results = _execute(cfg, {PART_W2})
    report = _base_report("convergence", cfg, results)
    report.tables["convergence"] = _convergence_table(cfg, results)
    report.summary.update(_convergence_summary(cfg, results))
    return _announce(report, started)


def run_ablation(cfg: ExperimentConfig) -> ExperimentReport:
    """Paired comparison of the drift-ablated variant at the smallest mass."""
    started = time.perf_counter()
    eps_small = (min(cfg.eps_grid),)
    cfg_small = cfg.replace(eps_grid=eps_small)
    results = _execute(cfg_small, {PART_W2})
    t_final = cfg_small.checkpoint_times[-1]

    per_replica = {name: [] for name in VARIANTS}
    for res in results:
        for eps, t, name, w2 in res["w2"]:
            if t == float(t_final):
                per_replica[name].append(w2)
    rows = [
        (
            res["replica"],
            per_replica["drift_ablated"][i],
            per_replica["full"][i],
            per_replica["common_only"][i],
        )
        for i, res in enumerate(results)
    ]
    report = _base_report("ablation", cfg_small, results)
    report.tables["ablation"] = Table(
        header=("replica", "w2_drift_ablated", "w2_full", "w2_common_only"), rows=rows
    )

    means = {name: _mean_se(vals)[0] for name, vals in per_replica.items()}
    winner = min(means, key=means.get)
    diffs_vs_full = np.asarray(per_replica["drift_ablated"]) - np.asarray(per_replica["full"])
    diffs_vs_winner = np.asarray(per_replica["drift_ablated"]) - np.asarray(per_replica[winner])
    mean_f, se_f = _mean_se(diffs_vs_full)
    mean_w, se_w = _mean_se(diffs_vs_winner)
    report.summary.update(
        {
            "eps": float(eps_small[0]),
            "final_time": float(t_final),
            "w2_means": means,
            "winner": winner,
            "paired_vs_full": {
                "mean_diff": mean_f,
                "se_diff": se_f,
                "positive": int((diffs_vs_full > 0).sum()),
                "negative": int((diffs_vs_full < 0).sum()),
                "zero": int((diffs_vs_full == 0).sum()),
            },
            "paired_vs_winner": {
                "mean_diff": mean_w,
                "se_diff": se_w,
                "positive": int((diffs_vs_winner > 0).sum()),
                "negative": int((diffs_vs_winner < 0).sum()),
                "zero": int((diffs_vs_winner == 0).sum()),
            },
        }
    )
    return _announce(report, started)


def frozen_residuals(cfg: ExperimentConfig):
    """Closed-form residual of eps * E[V V^T] against its claimed limit.

    The claimed limit is (1/2) sum_k |sigma_k|^2 gamma^{-1} I at the probe
    point; the residual is its distance from the exact frozen-coefficient
    second moment, evaluated per eps in frozen.eps_grid.  No sampling.
    """
    model = make_preset(cfg.preset)
    d = model.d
    x = np.zeros(d)
    x[0] = cfg.frozen_x
    force = np.zeros(d)
    force[0] = cfg.frozen_force
    gam = float(model.friction.value(x[None, :])[0])
    target = 0.5 * float(model.noise.sq_sum(x[None, :])[0]) / gam * np.eye(d)
    residuals = []
    for eps in cfg.frozen_eps:
        _, second = frozen_velocity_moments(
            model, x, force, eps, cfg.frozen_t, np.zeros(d), np.eye(d)
        )
        residuals.append(float(np.linalg.norm(eps * second - target, 2)))
    fit = order_fit(np.asarray(cfg.frozen_eps), np.asarray(residuals))
    return residuals, fit


def run_lemma_checks(cfg: ExperimentConfig) -> ExperimentReport:
    """Moment/Hölder estimates from simulation plus the closed-form residual order."""
    started = time.perf_counter()
    results = _execute(cfg, {PART_MOMENTS})
    report = _base_report("lemmas", cfg, results)

    sup_rows = []
    for eps in cfg.eps_grid:
        for res in results:
            sup_rows.append((float(eps), res["replica"], res["sup"][_ekey(eps)]))
    report.tables["moments"] = Table(
        header=("epsilon", "replica", "sup_second_moment"), rows=sup_rows
    )

    holder_rows = []
    for eps in cfg.eps_grid:
        for res in results:
            for lag, msd in res["msd"][_ekey(eps)]:
                holder_rows.append((float(eps), res["replica"], lag, msd))
    report.tables["holder"] = Table(
        header=("epsilon", "replica", "lag", "msd"), rows=holder_rows
    )

    residuals, fit = frozen_residuals(cfg)
    report.tables["frozen_residuals"] = Table(
        header=("eps", "residual"),
        rows=[(float(e), r) for e, r in zip(cfg.frozen_eps, residuals)],
    )

    sup_summary = {}
    for eps in cfg.eps_grid:
        mean, se = _mean_se([res["sup"][_ekey(eps)] for res in results])
        sup_summary[_ekey(eps)] = {"mean": mean, "se": se}
    sup_means = [sup_summary[_ekey(eps)]["mean"] for eps in cfg.eps_grid]

    holder_summary = {}
    for eps in cfg.eps_grid:
        mean_msd = []
        for j, lag in enumerate(cfg.holder_lags):
            mean_msd.append(
                float(np.mean([res["msd"][_ekey(eps)][j][1] for res in results]))
            )
        entry = {"lags": list(cfg.holder_lags), "mean_msd": mean_msd}
        if len(cfg.holder_lags) >= 3:
            hfit = order_fit(np.asarray(cfg.holder_lags), np.asarray(mean_msd))
            entry["slope"] = hfit.slope
            entry["r_squared"] = hfit.r_squared
        holder_summary[_ekey(eps)] = entry

    report.summary.update(
        {
            "sup_second_moment": sup_summary,
            "sup_ratio_max_over_min": float(max(sup_means) / min(sup_means)),
            "holder": holder_summary,
            "holder_smallest_eps": _ekey(cfg.eps_grid[-1]),
            "frozen_residuals": {
                "eps": list(cfg.frozen_eps),
                "residual": residuals,
                "slope": fit.slope,
                "intercept": fit.intercept,
                "constant": float(math.exp(fit.intercept)),
                "r_squared": fit.r_squared,
            },
        }
    )
    return _announce(report, started)


def run_momentum_diagnostic(cfg: ExperimentConfig) -> ExperimentReport:
    """Accumulated gap between the kinetic momentum pairing and its averaged form."""
    started = time.perf_counter()
    results = _execute(cfg, {PART_MOMENTUM})
    report = _base_report("momentum", cfg, results)

    rows = []
    for eps in cfg.eps_grid:
        for res in results:
            gap, n_windows = res["momentum"][_ekey(eps)]
            rows.append((float(eps), res["replica"], gap, n_windows))
    report.tables["momentum"] = Table(
        header=("epsilon", "replica", "gap", "n_windows"), rows=rows
    )

    gap_summary = {}
    means = []
    for eps in cfg.eps_grid:
        mean, se = _mean_se([res["momentum"][_ekey(eps)][0] for res in results])
        gap_summary[_ekey(eps)] = {"mean": mean, "se": se}
        means.append(mean)
    summary = {
        "gap": gap_summary,
        "first_to_last_ratio": float(means[0] / means[-1]) if means[-1] > 0 else None,
    }
    if len(cfg.eps_grid) >= 3 and all(m > 0 for m in means):
        fit = order_fit(np.asarray(cfg.eps_grid), np.asarray(means))
        summary["order"] = {"slope": fit.slope, "r_squared": fit.r_squared}
    else:
        summary["order"] = None
    report.summary["momentum"] = summary
    return _announce(report, started)


def run_simulation(cfg: ExperimentConfig) -> ExperimentReport:
    """Plain kinetic runs that export binned mass/momentum fields."""
    started = time.perf_counter()
    results = _execute(cfg, {PART_FIELDS})
    report = _base_report("simulate", cfg, results)
    for eps in cfg.eps_grid:
        for res in results:
            name = f"fields_eps{_ekey(eps)}_r{res['replica']}"
            report.tables[name] = Table(
                header=("time", "bin_center", "mass", "momentum"),
                rows=res["fields"][_ekey(eps)],
            )
    return _announce(report, started)


def run_all(cfg: ExperimentConfig) -> ExperimentReport:
    """One shared pass computing the convergence, ablation inputs, moment
    checks, and momentum diagnostic together (each kinetic trajectory is
    evolved once and re-used by every consumer)."""
    started = time.perf_counter()
    results = _execute(cfg, {PART_W2, PART_MOMENTS, PART_MOMENTUM})
    report = _base_report("all", cfg, results)

    report.tables["convergence"] = _convergence_table(cfg, results)
    report.summary.update(_convergence_summary(cfg, results))

    # paired ablation view at the smallest eps, reusing the same runs
    t_final = cfg.checkpoint_times[-1]
    eps_small = float(cfg.eps_grid[-1])
    per_replica = {name: [] for name in VARIANTS}
    for res in results:
        for eps, t, name, w2 in res["w2"]:
            if eps == eps_small and t == float(t_final):
                per_replica[name].append(w2)
    rows = [
        (
            res["replica"],
            per_replica["drift_ablated"][i],
            per_replica["full"][i],
            per_replica["common_only"][i],
        )
        for i, res in enumerate(results)
    ]
    report.tables["ablation"] = Table(
        header=("replica", "w2_drift_ablated", "w2_full", "w2_common_only"), rows=rows
    )
    diffs = np.asarray(per_replica["drift_ablated"]) - np.asarray(per_replica["full"])
    mean_d, se_d = _mean_se(diffs)
    report.summary["ablation"] = {
        "eps": eps_small,
        "final_time": float(t_final),
        "paired_vs_full": {
            "mean_diff": mean_d,
            "se_diff": se_d,
            "positive": int((diffs > 0).sum()),
            "negative": int((diffs < 0).sum()),
            "zero": int((diffs == 0).sum()),
        },
    }

    sup_rows, holder_rows = [], []
    sup_summary, holder_summary = {}, {}
    for eps in cfg.eps_grid:
        for res in results:
            sup_rows.append((float(eps), res["replica"], res["sup"][_ekey(eps)]))
            for lag, msd in res["msd"][_ekey(eps)]:
                holder_rows.append((float(eps), res["replica"], lag, msd))
        mean, se = _mean_se([res["sup"][_ekey(eps)] for res in results])
        sup_summary[_ekey(eps)] = {"mean": mean, "se": se}
        mean_msd = [
            float(np.mean([res["msd"][_ekey(eps)][j][1] for res in results]))
            for j in range(len(cfg.holder_lags))
        ]
        entry = {"lags": list(cfg.holder_lags), "mean_msd": mean_msd}
        if len(cfg.holder_lags) >= 3:
            hfit = order_fit(np.asarray(cfg.holder_lags), np.asarray(mean_msd))
            entry["slope"] = hfit.slope
            entry["r_squared"] = hfit.r_squared
        holder_summary[_ekey(eps)] = entry
    report.tables["moments"] = Table(
        header=("epsilon", "replica", "sup_second_moment"), rows=sup_rows
    )
    report.tables["holder"] = Table(
        header=("epsilon", "replica", "lag", "msd"), rows=holder_rows
    )
    sup_means = [sup_summary[_ekey(eps)]["mean"] for eps in cfg.eps_grid]
    report.summary["sup_second_moment"] = sup_summary
    report.summary["sup_ratio_max_over_min"] = float(max(sup_means) / min(sup_means))
    report.summary["holder"] = holder_summary
    report.summary["holder_smallest_eps"] = _ekey(cfg.eps_grid[-1])

    residuals, fit = frozen_residuals(cfg)
    report.tables["frozen_residuals"] = Table(
        header=("eps", "residual"),
        rows=[(float(e), r) for e, r in zip(cfg.frozen_eps, residuals)],
    )
    report.summary["frozen_residuals"] = {
        "eps": list(cfg.frozen_eps),
        "residual": residuals,
        "slope": fit.slope,
        "intercept": fit.intercept,
        "constant": float(math.exp(fit.intercept)),
        "r_squared": fit.r_squared,
    }

    mom_rows = []
    gap_summary = {}
    means = []
    for eps in cfg.eps_grid:
        for res in results:
            gap, n_windows = res["momentum"][_ekey(eps)]
            mom_rows.append((float(eps), res["replica"], gap, n_windows))
        mean, se = _mean_se([res["momentum"][_ekey(eps)][0] for res in results])
        gap_summary[_ekey(eps)] = {"mean": mean, "se": se}
        means.append(mean)
    report.tables["momentum"] = Table(
        header=("epsilon", "replica", "gap", "n_windows"), rows=mom_rows
    )
    report.summary["momentum"] = {
        "gap": gap_summary,
        "first_to_last_ratio": float(means[0] / means[-1]) if means[-1] > 0 else None,
    }
    return _announce(report, started)


def run_replica(cfg: ExperimentConfig, replica=0, eps=None) -> ConditionalReplica:
    """Evolve one replica and return its terminal coupled ensembles.

    Convenience API for interactive exploration; `eps` picks which kinetic
    run to include (default: the smallest mass in the grid).
    """
    if eps is None:
        eps = cfg.eps_grid[-1]
    if float(eps) not in {float(e) for e in cfg.eps_grid}:
        raise ConfigError(f"eps={eps} is not in the configured eps_grid {cfg.eps_grid}")
    res = _replica_pass(cfg, int(replica), frozenset({PART_W2}), keep_ensembles=True)
    ensembles = res["_ensembles"]
    return ConditionalReplica(
        replica_id=int(replica),
        common=ensembles["common"],
        kinetic=ensembles["kinetic"][float(eps)],
        overdamped=ensembles["overdamped"],
    )
