"""Batch front-end: run experiments and memory sweeps, emit traces, summaries,
and convergence plots; self-check the projection machinery.

Subcommands:
  run --config cfg.json          solve a configured problem for each memory value
  check-projection --trials N    compare the reduced projection against the
                                 direct QP on random instances
  gen --kind socp|lmi            write a seeded instance to a JSON file

Exit codes: 0 success, 1 solver failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import svgplot
from .problems import (
    build_lmi_feasibility,
    build_pd_feasibility,
    gen_lmi,
    gen_socp,
    gen_sharp_l1,
    instance_from_json,
    instance_to_json,
    ConeProgramInstance,
    LmiInstance,
)
from .projection import ProjectionProblem, project_dual, project_primal
from .solver import SolveResult, SolverConfig, blas_thread_context, pmm_solve

TRACE_COLUMNS = ["k", "violation", "step_norm", "cuts_total", "qp_iters",
                 "solve_ms", "cum_ms"]
SCHEMA_VERSION = 1
PLOT_FLOOR = 1e-12


class ConfigError(ValueError):
    pass


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _g17(v: float) -> str:
    return f"{float(v):.17g}"


def trace_csv(result: SolveResult) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    cum = 0.0
    for rec in result.trace:
        cum += rec.solve_ms
        lines.append(",".join([
            str(rec.k), _g17(rec.violation), _g17(rec.step_norm),
            str(rec.cuts_total), str(rec.qp_iterations),
            _g17(rec.solve_ms), _g17(cum),
        ]))
    return "\n".join(lines) + "\n"


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {SCHEMA_VERSION}")
    kind = cfg.get("problem")
    if kind not in ("socp", "lmi", "sharp-l1", "custom-from-file"):
        raise ConfigError(f"unknown problem kind {kind!r}")
    memory = cfg.get("memory")
    if not isinstance(memory, list) or not memory or \
            any((not isinstance(m, int)) or m < 0 for m in memory):
        raise ConfigError("memory must be a nonempty list of nonnegative integers")
    if not (isinstance(cfg.get("epsilon"), (int, float)) and cfg["epsilon"] > 0):
        raise ConfigError("epsilon must be positive")
    variant = cfg.get("variant", "standard")
    if variant not in ("standard", "alternating", "polyak-fast-path"):
        raise ConfigError(f"unknown variant {variant!r}")
    out = cfg.get("output_dir")
    if not out or not os.path.isdir(out):
        raise ConfigError(f"output directory {out!r} does not exist")
    return cfg


def _build_problem(cfg: dict):
    kind = cfg["problem"]
    dims = cfg.get("dims", {})
    seed = int(cfg.get("seed", 0))
    if kind == "socp":
        inst = gen_socp(seed, n=int(dims.get("n", 100)), p=int(dims.get("p", 40)),
                        l=int(dims.get("l", 5)))
        return build_pd_feasibility(inst), f"socp-n{inst.n}-p{inst.p}-seed{seed}"
    if kind == "lmi":
        inst = gen_lmi(seed, q=int(dims.get("q", 10)), k=int(dims.get("k", 5)))
        spec = build_lmi_feasibility(inst, r=int(cfg.get("rank", 2)))
        return spec, f"lmi-q{inst.q}-k{inst.k}-seed{seed}"
    if kind == "sharp-l1":
        spec, _ = gen_sharp_l1(int(dims.get("n", 20)))
        return spec, f"sharp-l1-n{spec.dim}"
    path = cfg.get("instance_file")
    if not path:
        raise ConfigError("custom-from-file requires instance_file")
    try:
        with open(path) as fh:
            inst = instance_from_json(fh.read())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load instance {path}: {exc}") from exc
    if isinstance(inst, ConeProgramInstance):
        return build_pd_feasibility(inst), f"custom-socp-seed{inst.seed}"
    return build_lmi_feasibility(inst, r=int(cfg.get("rank", 2))), \
        f"custom-lmi-seed{inst.seed}"


def _worker_slots(cfg: dict) -> int:
    slots = int(cfg.get("workers", 1))
    cap = os.environ.get("PMM_MAX_WORKERS")
    if cap is not None:
        slots = min(slots, max(1, int(cap)))
    return max(1, slots)


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    spec, label = _build_problem(cfg)
    out_dir = cfg["output_dir"]
    memories = cfg["memory"]

    def solve_one(mem: int) -> tuple[int, SolveResult, float]:
        solver_cfg = SolverConfig(
            memory=mem,
            epsilon=float(cfg["epsilon"]),
            max_iterations=int(cfg.get("max_iterations", 5000)),
            variant=cfg.get("variant", "standard"))
        t0 = time.perf_counter()
        res = pmm_solve(spec, solver_cfg)
        return mem, res, time.perf_counter() - t0

    slots = _worker_slots(cfg)
    if slots > 1:
        with ThreadPoolExecutor(max_workers=slots) as pool:
            results = list(pool.map(solve_one, memories))
    else:
        results = [solve_one(m) for m in memories]

    summary: dict = {"schema_version": SCHEMA_VERSION, "problem": label,
                     "epsilon": cfg["epsilon"], "runs": {}}
    iter_series: dict[str, tuple[list[float], list[float]]] = {}
    time_series: dict[str, tuple[list[float], list[float]]] = {}
    failed = False
    for mem, res, wall in results:
        name = f"M={mem}"
        _atomic_write(os.path.join(out_dir, f"trace_M{mem}.csv"), trace_csv(res))
        summary["runs"][str(mem)] = {
            "status": res.status,
            "iterations": len(res.trace) - 1,
            "final_violation": res.final_violation,
            "wall_seconds": wall,
            "message": res.message,
        }
        failed = failed or res.status == "numerical-failure"
        ks = [rec.k for rec in res.trace]
        vs = [max(rec.violation, PLOT_FLOOR) if np.isfinite(rec.violation)
              else PLOT_FLOOR for rec in res.trace]
        cum, ts = 0.0, []
        for rec in res.trace:
            cum += rec.solve_ms
            ts.append(cum / 1e3)
        iter_series[name] = (ks, vs)
        time_series[name] = (ts, vs)

    _atomic_write(os.path.join(out_dir, "summary.json"),
                  json.dumps(summary, indent=1) + "\n")
    _atomic_write(os.path.join(out_dir, "violation_vs_iteration.svg"),
                  svgplot.render_log_lines(iter_series, "iteration k",
                                           "max violation", label,
                                           floor=PLOT_FLOOR))
    _atomic_write(os.path.join(out_dir, "violation_vs_time.svg"),
                  svgplot.render_log_lines(time_series, "elapsed seconds",
                                           "max violation", label,
                                           floor=PLOT_FLOOR))
    for mem, res, wall in results:
        print(f"M={mem}: {res.status} after {len(res.trace) - 1} iterations, "
              f"final violation {res.final_violation:.3e}, {wall:.2f}s")
    return 1 if failed else 0


def random_projection_instance(rng: np.random.Generator) -> ProjectionProblem:
    """Small random feasible projection instance for the self-check."""
    n = int(rng.integers(2, 11))
    q = int(rng.integers(0, 6))
    p = int(rng.integers(0, min(n, 6)))
    x_feas = rng.standard_normal(n)
    F = rng.standard_normal((q, n))
    g = F @ x_feas + np.abs(rng.standard_normal(q))
    A = rng.standard_normal((p, n))
    b = A @ x_feas
    anchor = rng.standard_normal(n) * 2.0
    return ProjectionProblem(F=F, g=g, A=A.reshape(p, n), b=b,
                             anchor=anchor, lifts=[])


def cmd_check_projection(args) -> int:
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 2
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    worst_kkt = 0.0
    with blas_thread_context(1):
        done = 0
        while done < args.trials:
            P = random_projection_instance(rng)
            if P.q + P.p == 0:
                continue
            xd, sd = project_dual(P)
            xp, sp = project_primal(P)
            gap = float(np.linalg.norm(xd - xp)) / (1.0 + float(np.linalg.norm(P.anchor)))
            worst = max(worst, gap)
            worst_kkt = max(worst_kkt, sd.kkt_residual, sp.kkt_residual)
            done += 1
    print(f"check-projection: {args.trials} trials, "
          f"max dual/primal discrepancy {worst:.3e}, max KKT residual {worst_kkt:.3e}")
    return 0 if worst <= 1e-6 else 1


def cmd_gen(args) -> int:
    if args.kind == "socp":
        inst = gen_socp(args.seed, n=args.n, p=args.p, l=args.l)
    else:
        inst = gen_lmi(args.seed, q=args.q, k=args.k)
    _atomic_write(args.out, instance_to_json(inst) + "\n")
    print(f"wrote {args.kind} instance (seed {args.seed}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmm",
                                     description="Polyak minorant method solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment sweep")
    p_run.add_argument("--config", required=True, help="path to a JSON run config")

    p_chk = sub.add_parser("check-projection",
                           help="dual-reduced vs direct projection self-check")
    p_chk.add_argument("--trials", type=int, required=True)
    p_chk.add_argument("--seed", type=int, default=0)

    p_gen = sub.add_parser("gen", help="generate an instance JSON file")
    p_gen.add_argument("--kind", choices=("socp", "lmi"), required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--n", type=int, default=100)
    p_gen.add_argument("--p", type=int, default=40)
    p_gen.add_argument("--l", type=int, default=5)
    p_gen.add_argument("--q", type=int, default=10)
    p_gen.add_argument("--k", type=int, default=5)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "check-projection":
            return cmd_check_projection(args)
        return cmd_gen(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def script_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
