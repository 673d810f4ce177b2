"""Command-line entry point: ``warmnet {simulate,equilibrium,analyze,bootstrap,verify}``.

Every command resolves its configuration (file values, then flag overrides),
writes into ``<out>/<command>-<hash of resolved config>/`` and embeds the
resolved config in each JSON it emits. Exit codes: 0 ok, 2 bad config,
3 numerical non-convergence, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .artifacts import (
    read_json,
    read_mu,
    read_snapshots,
    write_deviation,
    write_json,
    write_limits,
    write_mu,
    write_snapshots,
)
from .config import (
    SCHEMA_VERSION,
    ConfigError,
    ExperimentConfig,
    build_graph,
    config_hash,
    load_config,
    parse_graph_spec,
)
from .dynamics import (
    EventStream,
    SimConfig,
    dyadic_schedule,
    init_state,
    load_checkpoint,
    run,
    save_checkpoint,
)
from .equilibrium import ConvergenceError, compact_set_bounds, multistart

log = logging.getLogger("warmnet")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_IO = 0, 2, 3, 4

SIM_KEYS = ("graph", "alpha", "t_max", "seeds", "t0", "ratio", "override_strong_alpha")
SOLVER_KEYS = ("graph", "alpha", "tol", "damping", "max_iter", "restarts", "restart_seed", "agree_tol")


def _out_dir(cfg: ExperimentConfig, command: str, resolved: dict) -> Path:
    path = Path(cfg.out) / f"{command}-{config_hash({'command': command, **resolved})}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _payload(command: str, resolved: dict, **body) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": resolved, **body}


# -- simulate -----------------------------------------------------------------

def _simulate_seed(resolved: dict, seed: int, out: str, stop_at, resume: bool) -> dict:
    out = Path(out)
    g = build_graph(resolved["graph"])
    schedule = dyadic_schedule(resolved["t0"], resolved["t_max"], resolved["ratio"])
    sim = SimConfig(
        alpha=resolved["alpha"],
        t_max=resolved["t_max"],
        seed=seed,
        snapshot_times=schedule,
        allow_strong=resolved["override_strong_alpha"],
    )
    ckpt = out / f"checkpoint_seed{seed}.json"
    if resume and ckpt.exists():
        state, stream, extra = load_checkpoint(ckpt)
        if extra.get("config_hash") != config_hash(resolved) or extra.get("seed") != seed:
            raise ConfigError(f"{ckpt} was written for a different configuration")
        prior = analysis.SnapshotSeries.from_weights(
            np.array(extra["times"], dtype=float),
            np.array(extra["weights"], dtype=np.int64).reshape(len(extra["times"]), g.edge_count),
        )
    else:
        state, stream = init_state(g), EventStream(g.vertex_count, seed)
        prior = analysis.SnapshotSeries.empty(g.edge_count)
    series = prior.concat(run(state, g, sim, stream, stop_at=stop_at))

    if state.t < sim.t_max:
        save_checkpoint(ckpt, state, stream, extra={
            "config_hash": config_hash(resolved),
            "seed": seed,
            "times": series.times.tolist(),
            "weights": series.weights.tolist(),
        })
        return {"seed": seed, "status": "checkpointed", "t": state.t}

    write_snapshots(out / f"snapshots_seed{seed}.csv", series)
    final = series.x[-1] if len(series) else np.zeros(0)
    summary = _payload(
        "simulate", resolved,
        seed=seed,
        alpha=sim.alpha,
        t_max=sim.t_max,
        event_count=int(state.event_count),
        max_x=float(final.max()) if final.size else None,
        min_x=float(final.min()) if final.size else None,
    )
    write_json(out / f"summary_seed{seed}.json", summary)
    return {"seed": seed, "status": "done", "t": state.t}


def cmd_simulate(cfg: ExperimentConfig, *, stop_at=None, resume=False, workers=1) -> Path:
    cfg.require_graph()
    cfg.check_alpha()
    if not cfg.seeds:
        raise ConfigError("simulate needs at least one seed (--seed or [sim] seeds)")
    if cfg.t_max <= 0:
        raise ConfigError(f"t_max must be positive, got {cfg.t_max}")
    resolved = cfg.resolved(SIM_KEYS)
    build_graph(resolved["graph"])  # fail early on an unbuildable graph
    out = _out_dir(cfg, "simulate", resolved)
    write_json(out / "config.json", _payload("simulate", resolved))
    jobs = [(resolved, seed, str(out), stop_at, resume) for seed in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_seed, *zip(*jobs)))
    else:
        results = [_simulate_seed(*job) for job in jobs]
    for r in results:
        log.info("seed %s: %s at t=%g", r["seed"], r["status"], r["t"])
    return out


# -- equilibrium --------------------------------------------------------------

def cmd_equilibrium(cfg: ExperimentConfig) -> Path:
    spec = cfg.require_graph()
    cfg.check_alpha()
    if cfg.alpha >= 1:
        raise ConfigError("the equilibrium solver only covers alpha < 1")
    resolved = cfg.resolved(SOLVER_KEYS)
    g = build_graph(spec)
    out = _out_dir(cfg, "equilibrium", resolved)
    try:
        res = multistart(
            g, cfg.alpha, cfg.restarts, seed=cfg.restart_seed,
            tol=cfg.tol, max_iter=cfg.max_iter, damping=cfg.damping,
        )
    except ConvergenceError as exc:
        write_json(out / "solver.json", _payload(
            "equilibrium", resolved,
            status="failed",
            message=str(exc),
            iterations=len(exc.residual_history),
            residual=exc.residual_history[-1] if exc.residual_history else None,
            residual_history_tail=exc.residual_history[-50:],
        ))
        write_mu(out / "mu_last_iterate.csv", exc.last_iterate)
        raise
    write_mu(out / "mu.csv", res.primary.mu)
    write_json(out / "solver.json", _payload(
        "equilibrium", resolved,
        status="converged",
        graph=g.summary(),
        compact_set=list(compact_set_bounds(max(g.max_degree, 1), cfg.alpha)),
        iterations=res.primary.iterations,
        residual=res.primary.residual,
        in_compact_set=res.primary.in_compact_set,
        restarts=cfg.restarts,
        max_pairwise_distance=res.max_pairwise_distance,
        restarts_agree=res.agree(cfg.agree_tol),
    ))
    return out


# -- analyze ------------------------------------------------------------------

def _rate_bound_violations(series) -> list[list[float]]:
    out = []
    for t, x in zip(series.times, series.x):
        if t >= 1e3 and x.max() > 2 + 10 * t**-0.5:
            out.append([float(t), float(x.max())])
    return out


def cmd_analyze(cfg: ExperimentConfig, run_dir, mu_path=None, mu_const=None) -> Path:
    run_dir = Path(run_dir)
    run_cfg = read_json(run_dir / "config.json")
    if run_cfg.get("command") != "simulate":
        raise ConfigError(f"{run_dir} is not a simulate output directory")
    sim_resolved = run_cfg["config"]
    g = build_graph(sim_resolved["graph"])
    if (mu_path is None) == (mu_const is None):
        raise ConfigError("give exactly one of --mu PATH or --mu-const VALUE")
    if mu_path is not None:
        mu = read_mu(mu_path)
        mu_source = {"file": str(mu_path), "sha256": hashlib.sha256(Path(mu_path).read_bytes()).hexdigest()}
    else:
        mu = np.full(g.edge_count, float(mu_const))
        mu_source = {"constant": float(mu_const)}
    if mu.shape != (g.edge_count,):
        raise ConfigError(f"mu covers {mu.size} edges but the run graph has {g.edge_count}")
    if np.any(mu <= 0):
        raise ConfigError("mu must be strictly positive")
    deltas = sorted(cfg.delta_threshold)
    resolved = {
        "run": config_hash(sim_resolved),
        "mu": mu_source,
        "window_fraction": cfg.window_fraction,
        "delta_threshold": deltas,
    }
    out = _out_dir(cfg, "analyze", resolved)
    runs = {}
    for seed in sim_resolved["seeds"]:
        series = read_snapshots(run_dir / f"snapshots_seed{seed}.csv")
        if series.n_edges != g.edge_count:
            raise ConfigError(f"snapshots for seed {seed} cover {series.n_edges} edges, graph has {g.edge_count}")
        dev = analysis.convergence_report(series, mu)
        write_deviation(out / f"deviation_seed{seed}.csv", series.times, dev)
        entry = {
            "deviation_series": [[float(t), float(d)] for t, d in zip(series.times, dev)],
            "rate_bound_violations": _rate_bound_violations(series),
        }
        try:
            est = analysis.estimate_limits(series, cfg.window_fraction)
        except ValueError as exc:
            entry["limit_estimate"] = {"error": str(exc)}
        else:
            write_limits(out / f"limits_seed{seed}.csv", est)
            entry["limit_estimate"] = {
                "window": list(est.window),
                "x_minus_min": float(est.x_minus.min()),
                "x_plus_max": float(est.x_plus.max()),
            }
            unstable = {}
            prev: set[int] = set()
            nested = True
            for d in deltas:
                edges = analysis.classify_stability(est, mu, g, d)
                nested &= prev <= edges
                prev = edges
                unstable[repr(d)] = {
                    "unstable_edges": len(edges),
                    "unstable_components": analysis.unstable_components(g, edges),
                }
            entry["unstable"] = unstable
            entry["unstable_sets_nested"] = nested
        runs[str(seed)] = entry
    write_json(out / "analysis.json", _payload("analyze", resolved, graph=g.summary(), runs=runs))
    return out


# -- bootstrap / verify -------------------------------------------------------

def cmd_bootstrap(cfg: ExperimentConfig, delta: int, a1=None, b1=None, auto=False,
                  max_iter: int = 1000, tol: float = 1e-8) -> Path:
    cfg.check_alpha()
    if cfg.alpha >= 1:
        raise ConfigError("bootstrap iteration needs alpha < 1")
    if delta < 2:
        raise ConfigError(f"bootstrap needs delta >= 2, got {delta}")
    if auto:
        a1, b1 = analysis.auto_bracket(cfg.alpha)
    if a1 is None or b1 is None:
        raise ConfigError("give --a1 and --b1, or --auto")
    if a1 > b1:
        raise ConfigError(f"a1={a1} exceeds b1={b1}")
    resolved = {"alpha": cfg.alpha, "delta": delta, "a1": a1, "b1": b1,
                "max_iter": max_iter, "tol": tol}
    try:
        seq = analysis.bootstrap_sequence(cfg.alpha, delta, a1, b1, max_iter=max_iter, tol=tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg, "bootstrap", resolved)
    write_json(out / "bootstrap.json", _payload("bootstrap", resolved, bound_sequence=seq.to_dict()))
    return out


def cmd_verify(cfg: ExperimentConfig, deltas, alphas, ab_step: float = 0.01, a_step: float = 0.001) -> Path:
    if not deltas or not alphas:
        raise ConfigError("verify needs nonempty --delta and --alphas grids")
    if any(d < 2 for d in deltas):
        raise ConfigError("verify needs delta >= 2")
    if any(not 0 <= a < 1 for a in alphas):
        raise ConfigError("verify alphas must lie in [0, 1)")
    resolved = {"delta": sorted(deltas), "alphas": sorted(alphas), "ab_step": ab_step, "a_step": a_step}
    report = []
    for d in sorted(deltas):
        improvement = analysis.alpha_max_pass(d, alphas, ab_step)
        lower = [analysis.lower_threshold_grid(a, d, a_step) for a in sorted(alphas)]
        report.append({
            "grid_check": {"delta": d, "alpha_max_pass": improvement["alpha_max_pass"]},
            "improvement": improvement["results"],
            "lower_threshold": lower,
        })
    out = _out_dir(cfg, "verify", resolved)
    write_json(out / "verify.json", _payload("verify", resolved, checks=report))
    return out


# -- argument parsing -----------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(s) for s in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file; flags override its values")
    common.add_argument("--out", help="output root directory (default: runs)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--override-strong-alpha", action="store_true",
                        help="allow alpha >= 1 (outside the weak-reinforcement results)")
    common.add_argument("-v", "--verbose", action="store_true")

    graph_opt = argparse.ArgumentParser(add_help=False)
    graph_opt.add_argument("--graph", help="e.g. torus:d=2,n=20  cycle:n=100  edgelist:path=g.txt")

    p = argparse.ArgumentParser(prog="warmnet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, graph_opt], help="run the urn dynamics")
    s.add_argument("--seed", type=int, action="append", help="repeatable")
    s.add_argument("--t-max", type=float)
    s.add_argument("--t0", type=float, help="first dyadic snapshot time")
    s.add_argument("--ratio", type=float, help="snapshot spacing factor")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--stop-at", type=float, help="halt at this time and write checkpoints")
    s.add_argument("--resume", action="store_true", help="continue from checkpoints in the output dir")

    e = sub.add_parser("equilibrium", parents=[common, graph_opt], help="solve the fixed-point equation")
    e.add_argument("--tol", type=float)
    e.add_argument("--damping", type=float)
    e.add_argument("--max-iter", type=int)
    e.add_argument("--restarts", type=int)
    e.add_argument("--restart-seed", type=int)

    a = sub.add_parser("analyze", parents=[common], help="deviation, limits and stability of a run")
    a.add_argument("--run", required=True, help="simulate output directory")
    a.add_argument("--mu", help="mu CSV from the equilibrium command")
    a.add_argument("--mu-const", type=float, help="use a constant equilibrium instead")
    a.add_argument("--delta", type=_floats, help="stability thresholds, e.g. 0.1,0.3,0.5")
    a.add_argument("--window-fraction", type=float)

    b = sub.add_parser("bootstrap", parents=[common], help="iterate the bracketing bounds")
    b.add_argument("--delta", type=int, required=True, help="vertex degree")
    b.add_argument("--a1", type=float)
    b.add_argument("--b1", type=float)
    b.add_argument("--auto", action="store_true", help="a1 = 2^(-alpha/(1-alpha)), b1 = 2")
    b.add_argument("--max-iter", type=int, default=1000)
    b.add_argument("--tol", type=float, default=1e-8)

    v = sub.add_parser("verify", parents=[common], help="grid checks of the bound inequalities")
    v.add_argument("--delta", type=_ints, required=True, help="degrees, e.g. 2,3,4")
    v.add_argument("--alphas", type=_floats, required=True, help="e.g. 0.3,0.5,0.51")
    v.add_argument("--ab-step", type=float, default=0.01)
    v.add_argument("--a-step", type=float, default=0.001)
    return p


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "graph", None):
        cfg.graph = parse_graph_spec(args.graph)
    overrides = {
        "out": args.out,
        "alpha": args.alpha,
        "t_max": getattr(args, "t_max", None),
        "seeds": getattr(args, "seed", None),
        "t0": getattr(args, "t0", None),
        "ratio": getattr(args, "ratio", None),
        "tol": getattr(args, "tol", None) if args.command == "equilibrium" else None,
        "damping": getattr(args, "damping", None),
        "max_iter": getattr(args, "max_iter", None) if args.command == "equilibrium" else None,
        "restarts": getattr(args, "restarts", None),
        "restart_seed": getattr(args, "restart_seed", None),
        "window_fraction": getattr(args, "window_fraction", None),
        "delta_threshold": getattr(args, "delta", None) if args.command == "analyze" else None,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if args.override_strong_alpha:
        cfg.override_strong_alpha = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "simulate":
            out = cmd_simulate(cfg, stop_at=args.stop_at, resume=args.resume, workers=args.workers)
        elif args.command == "equilibrium":
            out = cmd_equilibrium(cfg)
        elif args.command == "analyze":
            out = cmd_analyze(cfg, args.run, args.mu, args.mu_const)
        elif args.command == "bootstrap":
            out = cmd_bootstrap(cfg, args.delta, args.a1, args.b1, args.auto, args.max_iter, args.tol)
        else:
            out = cmd_verify(cfg, args.delta, args.alphas, args.ab_step, args.a_step)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
