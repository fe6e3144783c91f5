"""Synthetic-experiment harness: phase transitions, convergence ablations,
landscape slices.

Every runner consumes an :class:`ExperimentConfig`, executes seeded and
cell-independent work units (optionally on a process pool), and returns an
:class:`ExperimentReport` whose CSV rows are byte-reproducible for a fixed
config: wall time lives only in the JSON manifest.
"""

import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conv import OpCounter
from .io import write_csv, write_manifest
from .objective import Problem, kernel_length, marginal_phi
from .pipeline import deconvolve, initial_state, random_kernel_init, recovery_error
from .rng import derive_seed
from .solvers import StepSizeError
from .synth import ActivationSpec, KernelSpec, NoiseSpec, gen_activation, gen_kernel, gen_observation

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "run_phase_transition",
    "run_convergence",
    "run_landscape_slice",
    "ALL_VARIANTS",
]

SUCCESS_THRESHOLD = 1e-2
FFT_OPS_PER_CONV = 3

ALL_VARIANTS = tuple(
    f"{solver}-{init}-{mode}"
    for solver in ("adm", "iadm")
    for init in ("dd", "rand")
    for mode in ("fixed", "homotopy")
)


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    experiment: str = "phase-transition"
    n0: tuple = (20,)
    theta: tuple = ()
    theta_exp: tuple = ()          # per-cell theta = n0 ** -exp
    kernel: str = "uniform-sphere"
    sigma: float = 0.5
    dist: str = "bernoulli-rademacher"
    noise: float = 0.0
    bias_value: float = 0.0
    m_factor: int = 100
    trials: int = 5
    seed: int = 0
    solver: str = "iadm"
    beta: float = 0.9
    lambda_star: float = None      # None: per-cell 1e-2/sqrt(theta*n0)
    lambda0: float = None
    eta: float = 0.9
    delta: float = 0.1
    homotopy: bool = True
    reweight: int = 0
    nonneg: bool = False
    fit_bias: bool = False
    max_iters: int = 500
    stage_max_iters: int = 200
    max_fft_ops: int = None
    inner_budget: int = 2000       # landscape inner Lasso budget
    grid_res: int = 8              # landscape polar resolution
    shifts: tuple = (0, 1, 2)
    variants: tuple = ALL_VARIANTS
    workers: int = 1
    out: str = None

    def __post_init__(self):
        for name in ("n0", "theta", "theta_exp", "shifts", "variants"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, tuple):
                setattr(self, name, tuple(value))
        if self.experiment not in ("phase-transition", "convergence", "landscape"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.n0:
            raise ValueError("need at least one window length")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        unknown = set(self.variants) - set(ALL_VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}")

    @classmethod
    def from_dict(cls, payload):
        known = {f.name for f in dataclasses.fields(cls)}
        bad = set(payload) - known
        if bad:
            raise ValueError(f"unknown config keys {sorted(bad)}")
        return cls(**payload)

    def to_dict(self):
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    def thetas_for(self, n0):
        values = list(self.theta) + [float(n0) ** -e for e in self.theta_exp]
        if not values:
            values = [float(n0) ** -0.75]
        return values


@dataclass
class ExperimentReport:
    """Rows ready for CSV plus the manifest payload."""

    kind: str
    config: dict
    tables: dict                   # name -> (header, rows)
    summary: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def write(self, outdir):
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = {}
        for name, (header, rows) in self.tables.items():
            path = outdir / f"{name}.csv"
            write_csv(path, header, rows)
            written[name] = path.name
        write_manifest(outdir / "manifest.json", {
            "kind": self.kind,
            "config": self.config,
            "summary": self.summary,
            "tables": written,
            "elapsed_seconds": self.elapsed,
            "toolkit_version": __version__,
            "conventions": {
                "fft_ops_per_convolution": FFT_OPS_PER_CONV,
                "success_threshold": SUCCESS_THRESHOLD,
                "recovery_window_sweep": "starts 0..2*n0-1",
            },
        })
        return outdir


def _cell_penalty(config, n0, theta):
    if config.lambda_star is not None:
        return config.lambda_star
    return 1e-2 / math.sqrt(theta * n0)


def _phase_cell(args):
    """All trials of one (n0, theta) grid cell; never raises."""
    config, cell_index, n0, theta = args
    m = config.m_factor * n0
    lam = _cell_penalty(config, n0, theta)
    rows = []
    for trial in range(config.trials):
        tseed = derive_seed(config.seed, cell_index, trial)
        row = dict(cell=cell_index, n0=n0, theta=theta, trial=trial, seed=tseed,
                   error=float("nan"), success=0, iterations=0, fft_ops=0,
                   status="ok")
        try:
            a0 = gen_kernel(KernelSpec(config.kernel, n0, sigma=config.sigma), tseed)
            x0 = gen_activation(ActivationSpec(config.dist, m, theta), tseed)
            y = gen_observation(a0, x0, NoiseSpec(config.noise, config.bias_value),
                                tseed)
            problem = Problem(y=y, window=n0, nonneg=config.nonneg,
                              fit_bias=config.fit_bias)
            result = deconvolve(
                problem, seed=tseed, solver=config.solver, beta=config.beta,
                lam=lam, homotopy=config.homotopy, lambda0=config.lambda0,
                eta=config.eta, delta=config.delta, reweight=config.reweight,
                max_iters=config.max_iters,
                stage_max_iters=config.stage_max_iters,
                max_fft_ops=config.max_fft_ops)
            rec = recovery_error(a0, result.state.kernels[0])
            row.update(error=rec.error, success=int(rec.success),
                       iterations=sum(t.n_iters for t in result.traces),
                       fft_ops=result.counter.fft_ops)
        except (StepSizeError, ValueError) as exc:
            row["status"] = f"failed:{type(exc).__name__}"
        rows.append(row)
    return cell_index, rows


def _run_units(units, worker, n_workers):
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(worker, units))
    else:
        results = [worker(unit) for unit in units]
    return [item for _, item in sorted(results, key=lambda r: r[0])]


def run_phase_transition(config):
    """Success fraction per (n0, theta) cell over seeded trials."""
    start = time.monotonic()
    cells = []
    index = 0
    for n0 in config.n0:
        for theta in config.thetas_for(n0):
            cells.append((config, index, int(n0), float(theta)))
            index += 1
    per_cell = _run_units(cells, _phase_cell, config.workers)

    trial_header = ["cell", "n0", "theta", "trial", "seed", "error", "success",
                    "iterations", "fft_ops", "status"]
    trial_rows = [row for rows in per_cell for row in rows]
    cell_header = ["cell", "n0", "theta", "trials", "successes",
                   "success_fraction", "median_error"]
    cell_rows = []
    for (_, idx, n0, theta), rows in zip(cells, per_cell):
        ok = [r for r in rows if r["status"] == "ok"]
        successes = sum(r["success"] for r in ok)
        errors = [r["error"] for r in ok]
        cell_rows.append(dict(
            cell=idx, n0=n0, theta=theta, trials=len(rows), successes=successes,
            success_fraction=successes / len(rows),
            median_error=float(np.median(errors)) if errors else float("nan")))

    report = ExperimentReport(
        kind="phase-transition",
        config=config.to_dict(),
        tables={"trials": (trial_header, trial_rows),
                "cells": (cell_header, cell_rows)},
        summary={"cells": len(cell_rows),
                 "overall_success_fraction":
                     sum(r["successes"] for r in cell_rows)
                     / max(1, sum(r["trials"] for r in cell_rows))},
        elapsed=time.monotonic() - start)
    return report


def _parse_variant(name):
    solver, init, mode = name.split("-")
    return solver, init, mode


def _convergence_unit(args):
    """All requested variants on one seeded instance."""
    config, seed_index = args
    n0 = int(config.n0[0])
    theta = config.thetas_for(n0)[0]
    m = config.m_factor * n0
    tseed = derive_seed(config.seed, seed_index)
    lam = _cell_penalty(config, n0, theta)

    a0 = gen_kernel(KernelSpec(config.kernel, n0, sigma=config.sigma), tseed)
    x0 = gen_activation(ActivationSpec(config.dist, m, theta), tseed)
    y = gen_observation(a0, x0, NoiseSpec(config.noise, config.bias_value), tseed)
    problem = Problem(y=y, window=n0, nonneg=config.nonneg,
                      fit_bias=config.fit_bias)
    n = kernel_length(n0)

    def watch(state):
        return {"recovery_error": recovery_error(a0, state.kernels[0]).error}

    rows = []
    for variant in config.variants:
        solver, init_kind, mode = _parse_variant(variant)
        if init_kind == "dd":
            init = initial_state(problem, seed=tseed)
        else:
            init = initial_state(
                problem, kernels=random_kernel_init(n, 1, tseed), seed=tseed)
        counter = OpCounter()
        result = deconvolve(
            problem, init=init, solver=solver,
            beta=config.beta if solver == "iadm" else 0.0, lam=lam,
            homotopy=(mode == "homotopy"), lambda0=config.lambda0,
            eta=config.eta, delta=config.delta, reweight=config.reweight,
            max_iters=config.max_iters, stage_max_iters=config.stage_max_iters,
            max_fft_ops=config.max_fft_ops, counter=counter, trace_fn=watch)
        iteration = 0
        for trace in result.traces:
            for row in trace.rows:
                iteration += 1
                rows.append(dict(variant=variant, seed=tseed,
                                 iteration=iteration, objective=row["obj"],
                                 recovery_error=row["recovery_error"],
                                 fft_ops=row["fft_ops"]))
    return seed_index, rows


def run_convergence(config):
    """Per-iteration traces for solver/init/penalty-schedule ablations."""
    start = time.monotonic()
    units = [(config, i) for i in range(config.trials)]
    per_seed = _run_units(units, _convergence_unit, config.workers)
    header = ["variant", "seed", "iteration", "objective", "recovery_error",
              "fft_ops"]
    rows = [row for rows in per_seed for row in rows]

    final = {}
    for row in rows:
        final[(row["variant"], row["seed"])] = row["recovery_error"]
    report = ExperimentReport(
        kind="convergence",
        config=config.to_dict(),
        tables={"traces": (header, rows)},
        summary={"variants": list(config.variants),
                 "final_recovery_error": {
                     f"{variant}": float(np.median(
                         [v for (vr, _), v in final.items() if vr == variant]))
                     for variant in config.variants}},
        elapsed=time.monotonic() - start)
    return report


def _embed_shift(a0, offset, n):
    out = np.zeros(n)
    out[offset:offset + a0.shape[0]] = a0
    return out


def run_landscape_slice(config):
    """Marginal objective on the subsphere spanned by three kernel shifts."""
    start = time.monotonic()
    n0 = int(config.n0[0])
    theta = config.thetas_for(n0)[0]
    m = config.m_factor * n0
    n = kernel_length(n0)
    lam = config.lambda_star if config.lambda_star is not None else 0.5
    tseed = derive_seed(config.seed, 0)

    offsets = tuple(int(v) for v in config.shifts)
    if len(offsets) != 3 or len(set(offsets)) != 3:
        raise ValueError("landscape slices need three distinct shift offsets")
    if any(not 0 <= off <= n - n0 for off in offsets):
        raise ValueError(f"shift offsets must lie in [0, {n - n0}]")

    a0 = gen_kernel(KernelSpec(config.kernel, n0, sigma=config.sigma), tseed)
    x0 = gen_activation(ActivationSpec(config.dist, m, theta), tseed)
    y = gen_observation(a0, x0, NoiseSpec(config.noise, config.bias_value), tseed)

    basis = np.stack([_embed_shift(a0, off, n) for off in offsets], axis=1)
    q, r = np.linalg.qr(basis)
    if np.min(np.abs(np.diag(r))) < 1e-10:
        raise ValueError("shift directions are linearly dependent")

    def evaluate(point, tag, iu, iv):
        res = marginal_phi(point, y, lam, inner_budget=config.inner_budget)
        coeff = q.T @ point
        return dict(tag=tag, seed=tseed, iu=iu, iv=iv, c1=coeff[0],
                    c2=coeff[1], c3=coeff[2], phi=res.value,
                    converged=int(res.converged))

    rows = []
    polar = np.linspace(0.0, np.pi, config.grid_res)
    azimuth = np.linspace(0.0, 2.0 * np.pi, 2 * config.grid_res, endpoint=False)
    for iu, u in enumerate(polar):
        for iv, v in enumerate(azimuth):
            c = np.array([np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u)])
            rows.append(evaluate(q @ c, "grid", iu, iv))
    for i, off in enumerate(offsets):
        rows.append(evaluate(_embed_shift(a0, off, n), f"shift{i}", -1, -1))
    balanced = basis.sum(axis=1)
    balanced /= np.linalg.norm(balanced)
    rows.append(evaluate(balanced, "balanced", -1, -1))

    header = ["tag", "seed", "iu", "iv", "c1", "c2", "c3", "phi", "converged"]
    shift_phis = [row["phi"] for row in rows if row["tag"].startswith("shift")]
    balanced_phi = rows[-1]["phi"]
    report = ExperimentReport(
        kind="landscape",
        config=config.to_dict(),
        tables={"grid": (header, rows)},
        summary={"phi_at_shifts": shift_phis,
                 "phi_at_balanced": balanced_phi,
                 "shifts_below_balanced":
                     bool(max(shift_phis) < balanced_phi)},
        elapsed=time.monotonic() - start)
    return report
