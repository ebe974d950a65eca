"""Command-line entry point: ``cascadenet <command> [flags]``.

Exit codes: 0 on success (including flagged warnings), 2 on usage errors,
1 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from sklearn.utils import check_random_state

from . import diffusion, evaluation, graph
from .solver import SolverOptions, default_workers, infer_network

logger = logging.getLogger("cascadenet")


class UsageError(Exception):
    pass


def _dump(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _report_path(out, explicit):
    return explicit if explicit else str(out) + ".json"


def _parse_weights(spec: str):
    kind, _, params = spec.partition(":")
    if kind == "uniform":
        vals = [float(v) for v in params.split(",")] if params else [0.05, 1.0]
        if len(vals) != 2:
            raise UsageError(f"--weights uniform:lo,hi expects two numbers, got {spec!r}")
        return kind, vals
    if kind == "interactions":
        if not params:
            raise UsageError("--weights interactions:<counts.tsv> needs a file")
        return kind, params
    if kind == "none":
        return kind, None
    raise UsageError(f"unknown weight scheme {spec!r}")


def _read_counts(path) -> dict[tuple[int, int], int]:
    counts = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'src<TAB>dst<TAB>count'")
        counts[(int(parts[0]), int(parts[1]))] = int(parts[2])
    return counts


def _solver_options(args) -> SolverOptions:
    return SolverOptions(rho=float(args.rho or 0.0), grad_tol=args.grad_tol, max_iter=args.max_iter,
                         zero_threshold=args.zero_threshold, init_A=args.init_a,
                         diagonal_scaling=not args.plain_gradient)


def _threads(args) -> int:
    return args.threads if args.threads else default_workers()


# ---------------------------------------------------------------------------
# commands


def build_network(args) -> graph.Network:
    rng = check_random_state(args.seed)
    if args.model == "er":
        if args.edges is None:
            raise UsageError("--model er requires --edges")
        net = graph.generate_erdos_renyi(args.nodes, args.edges, rng)
    elif args.model == "pa":
        net = graph.generate_preferential_attachment(args.nodes, args.out_degree, rng)
    else:
        raise UsageError(f"unknown network model {args.model!r}")
    kind, params = _parse_weights(args.weights)
    if kind == "uniform":
        net = graph.assign_uniform_weights(net, params[0], params[1], rng)
    elif kind == "interactions":
        net = graph.weights_from_interactions(args.nodes, _read_counts(params), args.xi, args.phi)
    return net


def cmd_generate_network(args) -> int:
    net = build_network(args)
    graph.write_network(net, args.out)
    w = np.array([w for _, _, w in net]) if net.n_edges else np.zeros(1)
    sys.stdout.write(_dump({"nodes": net.n, "edges": net.n_edges, "weight_min": float(w.min()),
                            "weight_max": float(w.max()), "weight_mean": float(w.mean())}))
    return 0


def cmd_simulate(args) -> int:
    net = graph.read_network(args.net)
    model = diffusion.parse_model(args.w)
    cs, report = diffusion.generate_cascade_set(net, model, args.coverage, args.max_cascades,
                                                args.seed)
    diffusion.write_cascades(cs, args.out)
    d = report.to_dict()
    d["transmission"] = diffusion.format_model(model)
    sys.stdout.write(_dump(d, _report_path(args.out, args.report)))
    return 0


def cmd_perturb(args) -> int:
    cs = diffusion.read_cascades(args.cascades)
    noisy, ratio = diffusion.perturb_times(cs, args.sigma, args.seed)
    diffusion.write_cascades(noisy, args.out or args.cascades)
    sys.stdout.write(_dump({"sigma": args.sigma, "noise_to_signal": ratio}))
    return 0


def cmd_infer(args) -> int:
    cs = diffusion.read_cascades(args.cascades)
    model = diffusion.parse_model(args.w)
    net, report = infer_network(cs, model, _solver_options(args), n_jobs=_threads(args))
    graph.write_network(net, args.out)
    logger.info("inferred %d edges in %.2fs", net.n_edges, report.wall_time)
    d = report.to_dict(include_timing=args.timing)
    d["rho"] = float(args.rho or 0.0)
    text = _dump(d, _report_path(args.out, args.report))
    if args.verbose:
        sys.stdout.write(text)
    else:
        sys.stdout.write(_dump({"edges": net.n_edges, "converged": report.converged}))
    return 0


def _sweep(cs, truth, model, args) -> evaluation.EvalReport:
    grid = evaluation.parse_rho_grid(args.rho_grid) if args.rho_grid else evaluation.default_rho_grid()
    return evaluation.pr_sweep(cs, model, truth, grid, _solver_options(args), n_jobs=_threads(args))


def cmd_sweep(args) -> int:
    cs = diffusion.read_cascades(args.cascades)
    truth = graph.read_network(args.truth)
    model = diffusion.parse_model(args.w)
    report = _sweep(cs, truth, model, args)
    out = Path(args.out) if args.out else Path(args.cascades).with_suffix(".sweep")
    report.write_json(str(out) + ".json")
    report.write_csv(str(out) + ".csv")
    sys.stdout.write(_dump({"break_even": report.break_even, "extrapolated": report.extrapolated,
                            "mse_at_true_edge_count": report.mse_at_true_edge_count}))
    return 0


def cmd_evaluate(args) -> int:
    truth = graph.read_network(args.truth)
    inferred = graph.read_network(args.inferred)
    p, r = evaluation.precision_recall(truth, inferred)
    sys.stdout.write(_dump({"precision": p, "recall": r, "mse": evaluation.mse(truth, inferred)}))
    return 0


def cmd_run(args) -> int:
    """generate -> simulate -> (perturb) -> sweep, from a JSON config plus flag overrides."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).generate_state(3)
    if args.net:
        net = graph.read_network(args.net)
    else:
        net = build_network(argparse.Namespace(**{**vars(args), "seed": int(seeds[0])}))
    graph.write_network(net, out_dir / "network.tsv")
    model = diffusion.parse_model(args.w)
    cs, gen = diffusion.generate_cascade_set(net, model, args.coverage, args.max_cascades,
                                             int(seeds[1]))
    ratio = 0.0
    if args.sigma:
        cs, ratio = diffusion.perturb_times(cs, args.sigma, int(seeds[2]))
    diffusion.write_cascades(cs, out_dir / "cascades.tsv")
    report = _sweep(cs, net, model, args)
    report.write_json(out_dir / "sweep.json")
    report.write_csv(out_dir / "sweep.csv")
    summary = {"nodes": net.n, "edges": net.n_edges, "generation": gen.to_dict(),
               "noise_to_signal": ratio, "break_even": report.break_even,
               "extrapolated": report.extrapolated,
               "mse_at_true_edge_count": report.mse_at_true_edge_count}
    sys.stdout.write(_dump(summary, out_dir / "summary.json"))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_network_flags(p, required=True):
    p.add_argument("--model", choices=["er", "pa"], required=required)
    p.add_argument("--nodes", type=int, required=required)
    p.add_argument("--edges", type=int, help="edge count for --model er")
    p.add_argument("--out-degree", type=int, default=2, help="edges per new node for --model pa")
    p.add_argument("--weights", default="uniform:0.05,1.0",
                   help="uniform:lo,hi | interactions:<counts.tsv> | none")
    p.add_argument("--xi", type=float, default=0.001)
    p.add_argument("--phi", type=float, default=0.05)


def _add_solver_flags(p):
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--zero-threshold", type=float, default=1e-4)
    p.add_argument("--init-a", type=float, default=0.1)
    p.add_argument("--plain-gradient", action="store_true",
                   help="unscaled projected gradient with Barzilai-Borwein steps")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: $CONNIE_THREADS or CPU count)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascadenet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-network", help="build a synthetic weighted network")
    _add_network_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_network)

    p = sub.add_parser("simulate", help="simulate SI cascades up to an edge-coverage target")
    p.add_argument("--net", required=True)
    p.add_argument("--w", required=True, help="exp:rate | powerlaw:alpha[,t_min] | weibull:scale,shape")
    p.add_argument("--coverage", type=float, default=0.99)
    p.add_argument("--max-cascades", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("perturb", help="add Gaussian noise to infection times")
    p.add_argument("--cascades", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="defaults to rewriting --cascades")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("infer", help="infer a network at one rho")
    p.add_argument("--cascades", required=True)
    p.add_argument("--w", required=True)
    _add_solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--timing", action="store_true", help="include wall time in the JSON report")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep", help="precision/recall over a rho grid")
    p.add_argument("--cascades", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--w", required=True)
    p.add_argument("--rho-grid", help="log:lo,hi,k | comma list | default")
    _add_solver_flags(p)
    p.add_argument("--out", help="output prefix for <out>.json and <out>.csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="compare an inferred network to the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--inferred", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline from a JSON config")
    p.add_argument("--config")
    _add_network_flags(p, required=False)
    p.add_argument("--net", help="use an existing network file instead of generating one")
    p.add_argument("--w")
    p.add_argument("--coverage", type=float)
    p.add_argument("--max-cascades", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--rho-grid")
    _add_solver_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    # only flags typed on the command line may override the config file
    for action in p._actions:
        if action.dest not in ("help", "config"):
            action.default = argparse.SUPPRESS
    p.set_defaults(func=cmd_run)
    return parser


RUN_DEFAULTS = {"model": "pa", "nodes": 512, "edges": None, "out_degree": 2,
                "weights": "uniform:0.05,1.0", "xi": 0.001, "phi": 0.05, "net": None,
                "w": "exp:1.0", "coverage": 0.99, "max_cascades": 20000, "sigma": 0.0,
                "rho_grid": None, "rho": 0.0, "grad_tol": 1e-6, "max_iter": 5000,
                "zero_threshold": 1e-4, "init_a": 0.1, "plain_gradient": False, "threads": None,
                "timing": False, "seed": 0, "out_dir": "run-output"}


def _merge_config(args) -> argparse.Namespace:
    """Defaults, then the config file, then flags given on the command line."""
    config = {}
    if getattr(args, "config", None):
        config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    merged = dict(RUN_DEFAULTS)
    for key, value in config.items():
        key = key.replace("-", "_")
        if key not in RUN_DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        merged[key] = value
    merged.update({k: v for k, v in vars(args).items() if k != "config"})
    return argparse.Namespace(**merged)


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            args = _merge_config(args)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cascadenet: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.debug("failure", exc_info=True)
        print(f"cascadenet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
