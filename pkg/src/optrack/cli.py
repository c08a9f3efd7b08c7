"""Command-line front end: run, validate, plotdata, resume."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .graphs import GraphError, build_mixing
from .presets import RUN_PRESETS, STUDY_PRESETS, get_preset
from .scenarios import ScenarioError, scenario_from_spec
from .simulate import (
    CheckpointError,
    ConfigError,
    DivergenceError,
    SimConfig,
    read_metrics_csv,
    resume,
    run,
)
from .tracking import step_size_advisor

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

INT_FIELDS = {"N", "n", "T", "seed", "log_interval", "checkpoint_interval"}
FLOAT_FIELDS = {"alpha", "eta", "mu", "conservation_tol", "divergence_limit"}


def _load_config_dict(args) -> dict:
    if args.config is not None and args.preset is not None:
        raise ConfigError("give either --config or --preset, not both")
    if args.config is not None:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        return data
    if args.preset is not None:
        return get_preset(args.preset)
    raise ConfigError("a --config file or --preset name is required")


def _apply_overrides(data: dict, args) -> dict:
    if getattr(args, "scale", None):
        for item in args.scale.split(","):
            key, sep, value = item.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"--scale entries must look like key=value, got {item!r}")
            if key in INT_FIELDS:
                data[key] = int(float(value))
            elif key in FLOAT_FIELDS:
                data[key] = float(value)
            else:
                raise ConfigError(f"--scale cannot override {key!r}")
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "log_interval", None) is not None:
        data["log_interval"] = args.log_interval
    if getattr(args, "engine", None) is not None:
        data["engine"] = args.engine
    if getattr(args, "checkpoint_every", None) is not None:
        data["checkpoint_interval"] = args.checkpoint_every
    return data


def _run_study(name: str, args) -> int:
    from . import studies

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if name == "rls-rate":
        res = studies.rls_rate_study()
        lines = ["seed,error_half,error_full,ratio"]
        lines += [f"{k},{eh!r},{ef!r},{r!r}" for k, eh, ef, r in res.rows()]
        (out / "rates.csv").write_text("\n".join(lines) + "\n")
        ok = 1.2 <= res.median_ratio <= 3.2
        print(
            f"estimator rate study: median error ratio {res.median_ratio:.3f} "
            f"between t={res.t_half} and t={res.t_full} "
            f"(square-root decay predicts 2.0, accepted band [1.2, 3.2]): "
            f"{'pass' if ok else 'FAIL'}"
        )
        return EXIT_OK if ok else EXIT_FAIL
    if name == "conservation-audit":
        res = studies.conservation_audit()
        lines = ["index,topology,N,n,conservation_max,mean_dynamics_max"]
        lines += [f"{i},{topo},{N},{n},{c!r},{m!r}" for i, topo, N, n, c, m in res.rows()]
        (out / "audit.csv").write_text("\n".join(lines) + "\n")
        ok = res.max_conservation <= 1e-10 and res.max_mean_dynamics <= 1e-12
        print(
            f"conservation audit over {len(res.instances)} runs: "
            f"max tracker/gradient-average residual {res.max_conservation:.3e} "
            f"(tol 1e-10), max average-dynamics residual {res.max_mean_dynamics:.3e} "
            f"(tol 1e-12): {'pass' if ok else 'FAIL'}"
        )
        return EXIT_OK if ok else EXIT_FAIL
    raise ConfigError(f"unknown study preset {name!r}")


def cmd_run(args) -> int:
    if args.preset in STUDY_PRESETS:
        return _run_study(args.preset, args)
    data = _apply_overrides(_load_config_dict(args), args)
    config = SimConfig.from_dict(data)
    try:
        result = run(config, out_dir=args.out, stop_after=args.stop_after)
    except DivergenceError as exc:
        if exc.partial is not None and args.out is not None:
            exc.partial.write(args.out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    last = result.rows[-1] if result.rows else None
    if result.checkpoint_path and last is not None and last.t < config.T:
        print(f"checkpointed at t={last.t}; resume with: optrack resume {result.checkpoint_path}")
    elif last is not None:
        print(
            f"run complete: T={last.t}, avg_regret={last.avg_regret:.6g}, "
            f"consensus={last.consensus:.6g}, tracking_error={last.tracking_error:.6g}"
        )
    for w in result.metadata.get("warnings", []):
        print(f"note: {w}")
    if args.out is not None:
        print(f"artifacts in {Path(args.out).resolve()}")
    return EXIT_OK


def cmd_validate(args) -> int:
    data = _apply_overrides(_load_config_dict(args), args)
    failures = []
    lines = []
    try:
        config = SimConfig.from_dict(data)
    except ConfigError as exc:
        print(f"config: FAIL ({exc})")
        return EXIT_FAIL
    lines.append(f"config: ok (hash {config.config_hash()})")

    mixing = None
    try:
        mixing = build_mixing(config.topology, config.N, default_seed=config.seed)
        lines.append(
            f"communication graph: ok (doubly stochastic, strongly connected, "
            f"{mixing.directed_edge_count()} directed edges, sigma_w={mixing.sigma:.4f})"
        )
    except GraphError as exc:
        failures.append(f"communication graph: FAIL ({exc})")

    scenario = None
    try:
        scenario = scenario_from_spec(config.scenario, config.N, config.n, config.seed)
        lo = min(u.strong_convexity for u in scenario.user)
        hi = max(u.smoothness for u in scenario.user)
        lines.append(
            f"user costs: ok (curvature eigenvalues within [{lo:.4g}, {hi:.4g}], "
            f"strictly convex)"
        )
        lines.append(
            f"noise: ok (zero-mean gaussian, variance {scenario.noise.variance}, "
            f"std {scenario.noise.std:.4f})"
        )
    except ScenarioError as exc:
        failures.append(f"user costs: FAIL ({exc})")

    if scenario is not None:
        try:
            L, alpha_max = step_size_advisor(scenario, config.mu)
            comparison = "within" if config.alpha <= alpha_max else "above"
            lines.append(
                f"step size: alpha={config.alpha} is {comparison} the advisory bound "
                f"N/L={alpha_max:.6g} (L={L:.6g}, mu={config.mu}); the bound is advisory, "
                "convergence needs a small enough step"
            )
        except (ScenarioError, ValueError) as exc:
            lines.append(f"step size: advisory unavailable ({exc})")

    for line in lines:
        print(line)
    for line in failures:
        print(line)
    print("validation:", "pass" if not failures else "FAIL")
    return EXIT_OK if not failures else EXIT_FAIL


def cmd_plotdata(args) -> int:
    from .plots import export_plotdata

    run_dir = Path(args.run_dir)
    metrics = run_dir / "metrics.csv"
    if not metrics.is_file():
        print(f"error: {metrics} not found (incomplete run directory)", file=sys.stderr)
        return EXIT_FAIL
    try:
        columns = read_metrics_csv(metrics)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else run_dir / "plots"
    written = export_plotdata(columns, out, max_points=args.max_points, render=not args.no_render)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_resume(args) -> int:
    path = Path(args.checkpoint)
    if not path.is_file():
        print(f"error: checkpoint not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = resume(path, out_dir=args.out)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    last = result.rows[-1]
    print(f"resumed to T={last.t}, avg_regret={last.avg_regret:.6g}")
    if args.out is not None:
        print(f"artifacts in {Path(args.out).resolve()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optrack",
        description="Multi-agent online optimum tracking with learned user costs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured or preset experiment")
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument(
        "--preset",
        help=f"named preset: {', '.join(sorted(RUN_PRESETS) + sorted(STUDY_PRESETS))}",
    )
    p_run.add_argument("--out", help="run directory for metrics.csv and metadata.txt")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--log-interval", type=int, dest="log_interval")
    p_run.add_argument("--engine", choices=("message", "matrix"))
    p_run.add_argument("--scale", help="override numeric fields, e.g. N=10,T=100000")
    p_run.add_argument("--stop-after", type=int, dest="stop_after",
                       help="halt at this iteration and write a checkpoint")
    p_run.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a config against the problem requirements")
    p_val.add_argument("--config")
    p_val.add_argument("--preset")
    p_val.add_argument("--seed", type=int)
    p_val.add_argument("--scale")
    p_val.set_defaults(func=cmd_validate)

    p_plot = sub.add_parser("plotdata", help="derive figure-ready CSVs and figures from a run")
    p_plot.add_argument("run_dir")
    p_plot.add_argument("--out", help="output directory (default: RUN_DIR/plots)")
    p_plot.add_argument("--max-points", type=int, default=2000, dest="max_points")
    p_plot.add_argument("--no-render", action="store_true", dest="no_render",
                        help="skip PNG rendering, emit CSVs only")
    p_plot.set_defaults(func=cmd_plotdata)

    p_res = sub.add_parser("resume", help="continue a checkpointed run to its horizon")
    p_res.add_argument("checkpoint")
    p_res.add_argument("--out")
    p_res.set_defaults(func=cmd_resume)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("run",) and args.preset in STUDY_PRESETS and args.out is None:
        parser.error("study presets need --out for their artifacts")
    if args.command == "run" and args.stop_after is not None and args.out is None:
        parser.error("--stop-after needs --out to hold the checkpoint")
    try:
        return args.func(args)
    except (ConfigError, GraphError, ScenarioError, KeyError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
