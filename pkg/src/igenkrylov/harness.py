"""Experiment drivers: problem assembly, sub-run scheduling, and file output.

Each command is a pure function of its configuration: observations, error
streams, and angle jitter all derive from the config seed through named
substreams, so identical configs produce byte-identical CSV output (timing
lives in a separate file). Independent sub-runs (beta sweeps, rule
comparisons) may execute concurrently up to IGENKRYLOV_THREADS workers
without changing any result.
"""

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bidiag, solve, tomo
from .linop import EXACT, InexactnessModel
from .prior import CovarianceOperator, Grid, MaternKernel, NoiseModel, PriorModel, identity_prior
from .regparam import RegRule

ORTH_GATE = 1e-10
RATIO_GATE = 0.10

RELATIONS_HEADER = "beta,err_adjoint,err_forward,err_Vorth,err_Uorth"
HISTORY_HEADER = "iter,relerr,lambda,proj_residual"


def max_workers(n_tasks):
    cap = os.environ.get("IGENKRYLOV_THREADS", "1")
    try:
        cap = max(1, int(cap))
    except ValueError:
        cap = 1
    return min(cap, n_tasks)


def _run_all(fn, items):
    workers = max_workers(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fmt(v):
    return f"{v:.17g}"


def write_csv(path, header, rows):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_json(path, payload):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class CTProblem:
    """Everything needed to run one reconstruction experiment."""

    geom: tomo.CTGeometry
    A: tomo.RadonOperator
    prior: PriorModel
    noise: NoiseModel
    s_true: np.ndarray
    d: np.ndarray
    b: np.ndarray
    noise_norm: float

    @property
    def weighted_noise_norm(self):
        # Noise norm in the residual's R^{-1} metric.
        return self.noise_norm / self.noise.sigma


def build_problem(cfg):
    """Assemble geometry, prior, observation, and right-hand side from a config."""
    g = cfg.geometry
    angles = tomo.default_angles(g.angle_start, g.angle_step, g.angle_count)
    geom = tomo.CTGeometry(n=g.n, angles=angles, nrays=g.nrays)
    A = tomo.RadonOperator(geom)
    s_true = tomo.make_phantom(g.n)
    d, noise_norm = tomo.synthesize_observation(geom, s_true, cfg.noise_level, cfg.seed)
    if cfg.mode in ("gengk", "igengk"):
        kernel = MaternKernel(nu=cfg.prior.nu, alpha=1.0 / cfg.prior.ell)
        Q = CovarianceOperator(Grid((g.n, g.n)), kernel)
        prior_model = PriorModel(mu=np.zeros(geom.ncols), Q=Q)
    else:
        prior_model = identity_prior(geom.ncols)
    noise = NoiseModel(sigma=cfg.noise_sigma, dimension=geom.nrows)
    b = d - A.apply(prior_model.mu) if np.any(prior_model.mu) else d
    return CTProblem(geom, A, prior_model, noise, s_true, d, b, noise_norm)


def inexactness_for(cfg, schedule=None):
    """Inexactness model implied by the solver mode and config."""
    if cfg.mode in ("gk", "gengk"):
        return EXACT
    seed = cfg.inexactness.seed if cfg.inexactness.seed is not None else cfg.seed
    if schedule is None and cfg.inexactness.mode == "angle-perturbation":
        start, end = cfg.angle_schedules[0]
        schedule = tomo.AngleSchedule(
            alpha_start=start, alpha_end=end, num_iters=cfg.max_iter, seed=seed
        )
    if schedule is not None:
        return InexactnessModel(
            mode="angle-perturbation", schedule=tuple(schedule.alphas), seed=schedule.seed
        )
    if cfg.inexactness.mode == "none":
        return EXACT
    return InexactnessModel(mode=cfg.inexactness.mode, beta=cfg.inexactness.beta, seed=seed)


def reg_rule_for(cfg, problem):
    r = cfg.reg
    if r.rule == "dp":
        return RegRule(
            kind="dp", nu_dp=r.nu_dp, noise_norm=problem.weighted_noise_norm
        )
    return RegRule(
        kind=r.rule,
        lambda_fixed=r.lambda_fixed,
        nu_dp=r.nu_dp,
        omega=r.omega,
        omega_mode=r.omega_mode,
    )


def run_reconstruction(cfg, problem, inexact=None, rule=None, snapshot_iters=()):
    if inexact is None:
        inexact = inexactness_for(cfg)
    if rule is None:
        rule = reg_rule_for(cfg, problem)
    sc = solve.SolveConfig(
        max_iter=cfg.max_iter, reg=rule, s_true=problem.s_true, snapshot_iters=snapshot_iters
    )
    return solve.run_iterative_solve(
        problem.A, inexact, problem.prior, problem.noise, problem.b, sc
    )


def _history_rows(record):
    rows = []
    for i in range(record.iterations):
        rel = record.relerr[i] if record.relerr else float("nan")
        rows.append((i + 1, float(rel), float(record.lambdas[i]), float(record.proj_residual[i])))
    return rows


def _summary(cfg, record):
    return {
        "schema_version": cfg.schema_version,
        "config": cfg.to_dict(),
        "final_relerr": record.final_relerr,
        "min_relerr": record.min_relerr,
        "argmin_iter": record.argmin_iter,
        "stop_reason": record.stop_reason,
        "lambda_final": record.lambdas[-1] if record.lambdas else None,
    }


def _outdir(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_verify_relations(cfg):
    """Factorization-relation residuals per beta, with linear-scaling gates."""
    cfg.validate()
    out = _outdir(cfg)
    problem = build_problem(cfg)
    seed = cfg.inexactness.seed if cfg.inexactness.seed is not None else cfg.seed

    def one_beta(beta):
        t0 = time.perf_counter()
        model = InexactnessModel(mode="gaussian-entry", beta=float(beta), seed=seed)
        state, reason = bidiag.igenGK_run(
            problem.A, model, problem.prior, problem.noise, problem.b, cfg.max_iter
        )
        rep = bidiag.relation_diagnostics(state, problem.A, problem.prior, problem.noise)
        return beta, rep, reason, time.perf_counter() - t0

    results = _run_all(one_beta, list(cfg.betas))
    rows = [
        (float(beta), rep.err_adjoint, rep.err_forward, rep.err_Vorth, rep.err_Uorth)
        for beta, rep, _, _ in results
    ]
    write_csv(out / "relations.csv", RELATIONS_HEADER, rows)

    ratios = []
    nonzero = [(b, rep) for b, rep, _, _ in results if b > 0]
    for (b1, r1), (b2, r2) in zip(nonzero, nonzero[1:]):
        expected = b1 / b2
        ratios.append(
            {
                "beta_pair": [b1, b2],
                "expected": expected,
                "adjoint_ratio": r1.err_adjoint / r2.err_adjoint,
                "forward_ratio": r1.err_forward / r2.err_forward,
            }
        )
    orth_ok = all(rep.err_Vorth <= ORTH_GATE and rep.err_Uorth <= ORTH_GATE for _, rep, _, _ in results)
    ratio_ok = all(
        abs(r["adjoint_ratio"] / r["expected"] - 1) <= RATIO_GATE
        and abs(r["forward_ratio"] / r["expected"] - 1) <= RATIO_GATE
        for r in ratios
    )
    write_json(
        out / "summary.json",
        {
            "schema_version": cfg.schema_version,
            "config": cfg.to_dict(),
            "relations": [dict(zip(RELATIONS_HEADER.split(","), row)) for row in rows],
            "scaling_ratios": ratios,
            "orthogonality_ok": orth_ok,
            "scaling_ok": ratio_ok,
        },
    )
    write_json(out / "timings.json", {f"beta_{b:g}_s": t for b, _, _, t in results})
    return 0 if (orth_ok and ratio_ok) else 1


def cmd_reconstruct(cfg):
    """One reconstruction run: history.csv, final.pgm, summary.json."""
    cfg.validate()
    out = _outdir(cfg)
    problem = build_problem(cfg)
    record = run_reconstruction(cfg, problem)
    write_csv(out / "history.csv", HISTORY_HEADER, _history_rows(record))
    tomo.write_pgm(out / "final.pgm", record.solution, problem.geom.n)
    write_json(out / "summary.json", _summary(cfg, record))
    write_json(out / "timings.json", record.timings)
    return 0


def cmd_compare_reg(cfg):
    """Optimal vs DP vs WGCV on the identical observation."""
    cfg.validate()
    out = _outdir(cfg)
    problem = build_problem(cfg)
    rules = {
        "optimal": RegRule(kind="optimal"),
        "dp": RegRule(kind="dp", nu_dp=cfg.reg.nu_dp, noise_norm=problem.weighted_noise_norm),
        "wgcv": RegRule(kind="wgcv", omega=cfg.reg.omega, omega_mode=cfg.reg.omega_mode),
    }

    def one_rule(item):
        name, rule = item
        t0 = time.perf_counter()
        record = run_reconstruction(cfg, problem, rule=rule)
        return name, record, time.perf_counter() - t0

    results = dict()
    timings = dict()
    for name, record, dt in _run_all(one_rule, list(rules.items())):
        results[name] = record
        timings[f"{name}_s"] = dt
        write_csv(out / f"history_{name}.csv", HISTORY_HEADER, _history_rows(record))

    iters = min(rec.iterations for rec in results.values())
    merged_header = "iter," + ",".join(
        f"relerr_{name},lambda_{name}" for name in rules
    )
    merged_rows = []
    for i in range(iters):
        row = [i + 1]
        for name in rules:
            rec = results[name]
            row.extend([float(rec.relerr[i]), float(rec.lambdas[i])])
        merged_rows.append(tuple(row))
    write_csv(out / "compare.csv", merged_header, merged_rows)
    write_json(
        out / "summary.json",
        {
            "schema_version": cfg.schema_version,
            "config": cfg.to_dict(),
            "final_relerr": {name: rec.final_relerr for name, rec in results.items()},
            "min_relerr": {name: rec.min_relerr for name, rec in results.items()},
            "argmin_iter": {name: rec.argmin_iter for name, rec in results.items()},
            "lambda_final": {name: rec.lambdas[-1] for name, rec in results.items()},
        },
    )
    write_json(out / "timings.json", timings)
    return 0


def cmd_inexact_angles(cfg):
    """Angle-jitter schedules against the exact-angle baseline."""
    cfg.validate()
    out = _outdir(cfg)
    problem = build_problem(cfg)
    runs = [("exact", None)]
    for idx, (start, end) in enumerate(cfg.angle_schedules):
        sched = tomo.AngleSchedule(
            alpha_start=start, alpha_end=end, num_iters=cfg.max_iter, seed=cfg.seed
        )
        runs.append((f"sched{idx}", sched))

    def one_run(item):
        name, sched = item
        t0 = time.perf_counter()
        inexact = EXACT if sched is None else inexactness_for(cfg, schedule=sched)
        record = run_reconstruction(cfg, problem, inexact=inexact)
        return name, sched, record, time.perf_counter() - t0

    results = []
    timings = {}
    for name, sched, record, dt in _run_all(one_run, runs):
        results.append((name, sched, record))
        timings[f"{name}_s"] = dt
        write_csv(out / f"history_{name}.csv", HISTORY_HEADER, _history_rows(record))

    iters = min(rec.iterations for _, _, rec in results)
    header = "iter," + ",".join(f"relerr_{name}" for name, _, _ in results)
    rows = [
        tuple([i + 1] + [float(rec.relerr[i]) for _, _, rec in results]) for i in range(iters)
    ]
    write_csv(out / "comparison.csv", header, rows)
    write_json(
        out / "summary.json",
        {
            "schema_version": cfg.schema_version,
            "config": cfg.to_dict(),
            "schedules": {
                name: (None if sched is None else [sched.alpha_start, sched.alpha_end])
                for name, sched, _ in results
            },
            "final_relerr": {name: rec.final_relerr for name, _, rec in results},
            "min_relerr": {name: rec.min_relerr for name, _, rec in results},
        },
    )
    write_json(out / "timings.json", timings)
    return 0


COMMANDS = {
    "verify-relations": cmd_verify_relations,
    "reconstruct": cmd_reconstruct,
    "compare-reg": cmd_compare_reg,
    "inexact-angles": cmd_inexact_angles,
}
