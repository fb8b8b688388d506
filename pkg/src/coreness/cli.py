"""Command-line entry point: ``coreness <subcommand> ...``."""

from __future__ import annotations

import argparse
import ast
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import bp
from .centrality import Method, all_scores, bp_scores
from .errors import CorenessError
from .evaluation import evaluate_scores
from .experiments import (ExperimentConfig, config_from_dict, format_number, format_value,
                          load_edge_list, parse_config_text, read_labels, real_network_report,
                          run_experiment, write_edge_list, write_labels)
from .generators import BlockModelParams, power_law_corrections, sample_dc_sbm, sample_sbm

log = logging.getLogger("coreness")


def _matrix(text: str):
    return np.array(ast.literal_eval(text), dtype=float).reshape(2, 2)


def _common(p: argparse.ArgumentParser, out_default="."):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="random seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default {out_default})")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for replicates (default $CORENESS_THREADS or 1)")


def _cfg(args, **overrides) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        values.update(parse_config_text(args.config.read_text(encoding="utf-8"), str(args.config)))
    values.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None:
        values["seed"] = args.seed
    if args.out is not None:
        values["out"] = str(args.out)
    if args.threads is not None:
        values["threads"] = args.threads
    return config_from_dict(values)


def _node_ids(args):
    return range(args.nodes) if getattr(args, "nodes", None) else None


def cmd_generate(args):
    cfg = _cfg(args, model=args.model, n=args.n, gamma=args.gamma,
               c=_matrix(args.c).tolist() if args.c else None, alpha=args.alpha, i0=args.i0)
    params = cfg.params
    if cfg.model == "sbm":
        g, labels = sample_sbm(params, cfg.n, cfg.seed)
    else:
        corr = power_law_corrections(cfg.alpha, cfg.n, cfg.i0, c=params.c)
        g, labels = sample_dc_sbm(params, corr, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(g, out / "edges.txt")
    write_labels(labels, out / "labels.csv")
    print(f"wrote {g.n} nodes, {g.m} edges, core size {labels.core_size} to {out}")


def cmd_fit(args):
    cfg = _cfg(args)
    loaded = load_edge_list(args.edges, _node_ids(args))
    g = loaded.graph
    init = None
    if args.init_gamma is not None or args.init_c is not None:
        base = bp.default_init(g)
        init = BlockModelParams(args.init_gamma if args.init_gamma is not None else base.gamma,
                                _matrix(args.init_c) if args.init_c else base.c)
    params, marg = bp.fit_sbm(g, init, cfg.em_tol, cfg.max_rounds, cfg.seed, bp_tol=cfg.bp_tol,
                              max_sweeps=cfg.max_sweeps, damping=cfg.damping)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "marginals.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "q_core", "q_periphery"])
        for ext, (a, b) in zip(loaded.ids, marg.q):
            w.writerow([ext, format_number(float(a)), format_number(float(b))])
    text = (f"gamma = {params.gamma!r}\nc = {format_value(params.c.tolist())}\n"
            f"core_size = {bp.core_size_estimate(marg)}\nconverged = "
            f"{format_value(marg.converged)}\n")
    (out / "fit.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_centrality(args):
    cfg = _cfg(args)
    loaded = load_edge_list(args.edges, _node_ids(args))
    g = loaded.graph
    methods = [Method(m.upper()) for m in (args.methods.split(",") if args.methods
                                           else cfg.resolved_methods())]
    scores = all_scores(g, [m for m in methods if m is not Method.BP], pr_damping=cfg.pr_damping)
    if Method.BP in methods:
        _, marg = bp.fit_sbm(g, None, cfg.em_tol, cfg.max_rounds, cfg.seed)
        scores[Method.BP] = bp_scores(marg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [str(m) for m in methods])
        for i, ext in enumerate(loaded.ids):
            w.writerow([ext] + [format_number(float(scores[m].scores[i])) for m in methods])
    print(f"wrote {out / 'scores.csv'}")


def cmd_evaluate(args):
    with open(args.scores, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    truth = read_labels(args.labels)
    names = [k for k in rows[0] if k != "node"]
    by_id = {r["node"]: r for r in rows}
    missing = [i for i in range(truth.n) if str(i) not in by_id]
    if missing:
        raise CorenessError(f"{len(missing)} labeled nodes have no score (e.g. node {missing[0]}); "
                            "rerun centrality with --nodes to keep isolated nodes")
    scores = {name: np.array([float(by_id[str(i)][name]) for i in range(truth.n)])
              for name in names}
    report = evaluate_scores(scores, truth, gamma=args.gamma)
    w = csv.writer(sys.stdout)
    w.writerow(["method", "ipr", "agreement", "overlap"])
    for name, mm in report.methods.items():
        w.writerow([name, format_number(mm.ipr), format_number(mm.agreement), format_number(mm.overlap)])


def cmd_experiment(args):
    cfg = _cfg(args)
    result = run_experiment(cfg, out_dir=Path(cfg.out), threads=cfg.threads)
    name, values = cfg.sweep
    print(f"{cfg.kind}: {len(result.rows)} rows, {len(result.failures)} failed replicates, "
          f"valid={result.valid}; output in {result.out_dir}")
    for sv in values:
        parts = []
        for m in cfg.resolved_methods():
            try:
                parts.append(f"{m}={result.median(m, 'overlap', sv):.3f}")
            except KeyError:
                pass
        if parts:
            print(f"  {name}={sv} median overlap: " + " ".join(parts))
    return 0 if result.valid else 2


def cmd_report(args):
    cfg = _cfg(args, kind="real-network", edge_list=str(args.edges))
    grid = [float(x) for x in args.gamma_grid.split(",")] if args.gamma_grid else None
    rep = real_network_report(args.edges, grid, cfg=cfg, out_dir=Path(cfg.out),
                              nodes=_node_ids(args))
    print(f"nodes={rep.n} edges={rep.m} fitted_gamma={rep.fitted.gamma:.4f} "
          f"bp_core_size={rep.bp_core_size}")
    print("pearson:")
    print("       " + " ".join(f"{n:>7}" for n in rep.names))
    for n, row in zip(rep.names, rep.pearson):
        print(f"{n:>7}" + " ".join(f"{x:7.3f}" for x in row))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coreness", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an SBM or dc-SBM graph")
    _common(p)
    p.add_argument("--model", choices=["sbm", "dcsbm"])
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--c", help="affinity matrix, e.g. '[[10,6],[6,1]]'")
    p.add_argument("--alpha", type=float)
    p.add_argument("--i0", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit the two-block SBM by BP + EM")
    _common(p)
    p.add_argument("edges", type=Path)
    p.add_argument("--nodes", type=int, help="register ids 0..N-1 so isolated nodes are kept")
    p.add_argument("--init-gamma", type=float)
    p.add_argument("--init-c")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("centrality", help="compute centrality scores for an edge list")
    _common(p)
    p.add_argument("edges", type=Path)
    p.add_argument("--nodes", type=int, help="register ids 0..N-1 so isolated nodes are kept")
    p.add_argument("--methods", help="comma-separated subset of DEGREE,EC,MINRES,NBT,PR,BP")
    p.set_defaults(func=cmd_centrality)

    p = sub.add_parser("evaluate", help="score core recovery against planted labels")
    p.add_argument("scores", type=Path)
    p.add_argument("labels", type=Path)
    p.add_argument("--gamma", type=float, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a configured simulation study")
    _common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="analyze an observed network (e.g. an AS snapshot)")
    _common(p)
    p.add_argument("edges", type=Path)
    p.add_argument("--nodes", type=int, help="register ids 0..N-1 so isolated nodes are kept")
    p.add_argument("--gamma-grid", help="comma-separated core fractions")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = args.func(args)
    except (CorenessError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
