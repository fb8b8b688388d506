"""Configuration-driven experiments, edge-list ingestion and CSV output.

Config files are flat ``key = value`` text, one key per line, ``#`` starts a
comment and list values are bracketed (``n_values = [500, 1000]``,
``c = [[10, 6], [6, 1]]``).  Every run writes:

``replicates.csv``
    columns ``<sweep>, replicate, seed, method, metric, value``
``aggregate.csv``
    columns ``<sweep>, method, metric, median, q25, q75, count``
``manifest.txt``
    the fully resolved config in the same key-value format, enough to
    reproduce every CSV byte for byte.
"""

from __future__ import annotations

import ast
import concurrent.futures
import csv
import dataclasses
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import bp
from .centrality import Method, all_scores, bp_scores
from .errors import ConfigError, CorenessError, EmptyGraph, ParseError
from .evaluation import (agreement, evaluate_scores, pearson_matrix, spearman_matrix, summarize,
                         top_core_assignment)
from .generators import BlockModelParams, power_law_corrections, sample_dc_sbm, sample_sbm
from .graph import Graph, Labeling, build_graph, degrees

log = logging.getLogger(__name__)

KINDS = ("homogeneous-ranking", "ipr-scaling", "ec-minres-correlation", "alpha-sweep",
         "real-network")

DEFAULT_METHODS = {
    "homogeneous-ranking": ["BP", "DEGREE", "EC", "NBT", "PR"],
    "ipr-scaling": ["EC"],
    "ec-minres-correlation": ["EC", "MINRES"],
    "alpha-sweep": ["BP", "DEGREE", "EC", "MINRES", "NBT", "PR"],
    "real-network": ["BP", "DEGREE", "EC", "MINRES", "NBT", "PR"],
}

MAX_FAILED_FRACTION = 0.2


@dataclass
class ExperimentConfig:
    kind: str = "homogeneous-ranking"
    model: str = "sbm"
    n: int = 2000
    n_values: list = field(default_factory=lambda: [250, 500, 1000, 2000, 4000])
    gamma: float = 0.3
    c: list = field(default_factory=lambda: [[10.0, 6.0], [6.0, 1.0]])
    alpha: float = 3.0
    alpha_values: list = field(default_factory=lambda: [2.6, 3.0, 4.0, 6.0, 10.0])
    i0: int | None = None
    replicates: int = 20
    seed: int = 0
    methods: list | None = None
    bp_params: str = "fit"
    bp_tol: float = 1e-6
    max_sweeps: int = 1000
    em_tol: float = 1e-4
    max_rounds: int = 50
    damping: float = 0.0
    pr_damping: float = 0.85
    solver_tol: float = 1e-10
    edge_list: str | None = None
    gamma_grid: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.2, 0.3])
    subgraph_size: int = 1000
    out: str = "results"
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.model not in ("sbm", "dcsbm"):
            raise ConfigError(f"model must be 'sbm' or 'dcsbm', got {self.model!r}")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if self.bp_params not in ("fit", "planted"):
            raise ConfigError("bp_params must be 'fit' or 'planted'")
        if not 0 <= self.pr_damping < 1:
            raise ConfigError("pr_damping must lie in [0, 1)")
        if not 0 <= self.damping < 1:
            raise ConfigError("damping must lie in [0, 1)")
        try:
            BlockModelParams(self.gamma, self.c)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        for m in self.resolved_methods():
            Method(m)
        if self.kind == "real-network" and not self.edge_list:
            raise ConfigError("real-network experiments need edge_list")

    def resolved_methods(self) -> list:
        return [str(m).upper() for m in (self.methods or DEFAULT_METHODS[self.kind])]

    @property
    def params(self) -> BlockModelParams:
        return BlockModelParams(self.gamma, self.c)

    @property
    def sweep(self) -> tuple[str, list]:
        if self.kind == "alpha-sweep":
            return "alpha", list(self.alpha_values)
        if self.kind in ("ipr-scaling", "ec-minres-correlation"):
            return "n", list(self.n_values)
        return "n", [self.n]

    @property
    def effective_model(self) -> str:
        return "dcsbm" if self.kind == "alpha-sweep" else self.model


# -- key/value config ---------------------------------------------------------

def _parse_value(text: str):
    text = text.strip()
    if text.lower() in ("none", "null", ""):
        return None
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if text.startswith("["):
            # bare words inside brackets, e.g. [EC, MINRES]
            return [_parse_value(t) for t in text.strip("[]").split(",") if t.strip()]
        return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw!r}", lineno, source)
        key, value = line.split("=", 1)
        key = key.strip().replace("-", "_")
        if not key.isidentifier():
            raise ParseError(f"bad key {key!r}", lineno, source)
        out[key] = _parse_value(value)
    return out


def config_from_dict(values: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(parse_config_text(path.read_text(encoding="utf-8"), str(path)))


def format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return v
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(repr(x) if isinstance(x, str) else format_value(x) for x in v) + "]"
    return repr(v)


def dump_config(cfg: ExperimentConfig, extra: dict | None = None) -> str:
    d = dataclasses.asdict(cfg)
    d["methods"] = cfg.resolved_methods()
    lines = [f"{k} = {format_value(v)}" for k, v in d.items()]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {format_value(v)}")
    return "\n".join(lines) + "\n"


# -- edge lists ---------------------------------------------------------------

class LoadedGraph(NamedTuple):
    graph: Graph
    ids: list


def load_edge_list(path, nodes=None) -> LoadedGraph:
    """Read a whitespace-separated edge list with ``#`` comments.

    External ids (any token) are mapped to ``0..n-1`` in order of first
    appearance; ``ids[k]`` is the external id of node ``k``.  ``nodes``
    pre-registers ids (as strings) so isolated nodes survive the round trip.
    """
    path = Path(path)
    index: dict[str, int] = {}
    for tok in nodes or ():
        index.setdefault(str(tok), len(index))
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"expected two node ids, got {line!r}", lineno, str(path))
            pairs.append(tuple(index.setdefault(tok, len(index)) for tok in parts))
    if not pairs:
        raise EmptyGraph(f"{path}: no edges")
    return LoadedGraph(build_graph(len(index), pairs), list(index))


def write_edge_list(g: Graph, path, ids=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# nodes {g.n} edges {g.m}\n")
        for i, j in g.edges:
            a, b = (ids[i], ids[j]) if ids is not None else (i, j)
            fh.write(f"{a} {b}\n")


def write_labels(labels: Labeling, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "group"])
        for i, gr in enumerate(labels.groups):
            w.writerow([i, int(gr)])


def read_labels(path) -> Labeling:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    groups = np.zeros(len(rows), dtype=np.int8)
    for r in rows:
        groups[int(r["node"])] = int(r["group"])
    return Labeling(groups)


# -- replicates ---------------------------------------------------------------

def replicate_seed(base: int, sweep_index: int, replicate: int) -> int:
    return int(np.random.SeedSequence([base, sweep_index, replicate]).generate_state(1)[0])


def sample_graph(cfg: ExperimentConfig, sweep_value, seed: int) -> tuple[Graph, Labeling]:
    name, _ = cfg.sweep
    n = int(sweep_value) if name == "n" else cfg.n
    alpha = float(sweep_value) if name == "alpha" else cfg.alpha
    if cfg.effective_model == "sbm":
        return sample_sbm(cfg.params, n, seed)
    corr = power_law_corrections(alpha, n, cfg.i0, c=cfg.params.c)
    return sample_dc_sbm(cfg.params, corr, seed)


def score_graph(g: Graph, cfg: ExperimentConfig, methods, seed, planted=None):
    """All requested score vectors, in the requested order."""
    methods = [Method(m) for m in methods]
    marg = None
    fitted = None
    if Method.BP in methods:
        bp_kw = dict(bp_tol=cfg.bp_tol, max_sweeps=cfg.max_sweeps, damping=cfg.damping)
        if cfg.bp_params == "planted" and planted is not None:
            fitted = planted
            marg = bp.run_bp(g, planted, cfg.bp_tol, cfg.max_sweeps, seed, damping=cfg.damping)
        else:
            fitted, marg = bp.fit_sbm(g, None, cfg.em_tol, cfg.max_rounds, seed, **bp_kw)
    others = [m for m in methods if m is not Method.BP]
    scores = all_scores(g, others, pr_damping=cfg.pr_damping, tol=cfg.solver_tol)
    if marg is not None:
        scores[Method.BP] = bp_scores(marg)
    return {m: scores[m] for m in methods}, fitted, marg


def run_replicate(cfg: ExperimentConfig, sweep_index: int, sweep_value, replicate: int) -> list:
    """One independent replicate; returns rows ``(method, metric, value)``."""
    seed = replicate_seed(cfg.seed, sweep_index, replicate)
    g, truth = sample_graph(cfg, sweep_value, seed)
    methods = cfg.resolved_methods()
    scores, fitted, marg = score_graph(g, cfg, methods, seed + 1, planted=cfg.params)
    report = evaluate_scores(scores, truth, gamma=cfg.gamma)
    rows = [("GRAPH", "edges", float(g.m)), ("GRAPH", "core_size", float(truth.core_size))]
    for name, mm in report.methods.items():
        rows.append((name, "ipr", mm.ipr))
        rows.append((name, "agreement", mm.agreement))
        rows.append((name, "overlap", mm.overlap))
    if fitted is not None:
        rows.append(("BP", "fitted_gamma", fitted.gamma))
        rows.append(("BP", "core_size_estimate", float(bp.core_size_estimate(marg))))
        rows.append(("BP", "converged", float(marg.converged)))
    names = report.names
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            rows.append((f"{names[a]}|{names[b]}", "pearson", float(report.pearson[a, b])))
            rows.append((f"{names[a]}|{names[b]}", "spearman", float(report.spearman[a, b])))
    return [(seed, m, k, float(v)) for m, k, v in rows]


def _task(args):
    cfg, si, sv, rep = args
    try:
        return args[1:], run_replicate(cfg, si, sv, rep), None
    except (CorenessError, ValueError, ArithmeticError) as err:
        return args[1:], None, f"{type(err).__name__}: {err}"


def resolve_threads(threads: int | None = None) -> int:
    if threads:
        return max(1, int(threads))
    env = os.environ.get("CORENESS_THREADS")
    return max(1, int(env)) if env else 1


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    aggregate: list
    failures: list
    valid: bool
    out_dir: Path | None = None

    def median(self, method: str, metric: str, sweep_value=None) -> float:
        for r in self.aggregate:
            if r["method"] == method and r["metric"] == metric and (
                    sweep_value is None or r["sweep"] == sweep_value):
                return r["median"]
        raise KeyError((method, metric, sweep_value))

    def values(self, method: str, metric: str, sweep_value=None) -> list:
        return [r["value"] for r in self.rows if r["method"] == method and r["metric"] == metric
                and (sweep_value is None or r["sweep"] == sweep_value)]


def aggregate_rows(rows: list) -> list:
    groups = defaultdict(list)
    for r in rows:
        groups[(r["sweep"], r["method"], r["metric"])].append(r["value"])
    out = []
    for (sv, method, metric), vals in groups.items():
        out.append({"sweep": sv, "method": method, "metric": metric, **summarize(vals)})
    return out


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int | None = None) -> ExperimentResult:
    """Run every (sweep value, replicate) pair and aggregate medians/IQRs.

    A failed replicate is logged and skipped; the run is marked invalid when
    more than 20% of replicates fail.  CSVs are written when ``out_dir`` is
    given (or ``cfg.out`` when ``out_dir`` is True).
    """
    if cfg.kind == "real-network":
        raise ConfigError("use real_network_report for real-network configs")
    name, values = cfg.sweep
    tasks = [(cfg, si, sv, rep) for si, sv in enumerate(values) for rep in range(cfg.replicates)]
    workers = resolve_threads(threads or cfg.threads)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    rows, failures = [], []
    for (si, sv, rep), out, err in results:
        if err is not None:
            log.error("replicate %d at %s=%s failed: %s", rep, name, sv, err)
            failures.append({"sweep": sv, "replicate": rep, "error": err})
            continue
        for seed, method, metric, value in out:
            rows.append({"sweep": sv, "replicate": rep, "seed": seed, "method": method,
                         "metric": metric, "value": value})
    valid = len(failures) <= MAX_FAILED_FRACTION * len(tasks)
    if not valid:
        log.error("%d of %d replicates failed; report marked invalid", len(failures), len(tasks))
    result = ExperimentResult(cfg, rows, aggregate_rows(rows), failures, valid)
    if out_dir is not None:
        result.out_dir = write_experiment(result, Path(cfg.out if out_dir is True else out_dir))
    return result


def format_number(v) -> str:
    if isinstance(v, float):
        return "nan" if np.isnan(v) else repr(v)
    return str(v)


def write_experiment(result: ExperimentResult, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    sweep_name, _ = result.config.sweep
    with open(out / "replicates.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([sweep_name, "replicate", "seed", "method", "metric", "value"])
        for r in result.rows:
            w.writerow([format_number(r["sweep"]), r["replicate"], r["seed"], r["method"], r["metric"],
                        format_number(r["value"])])
    with open(out / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([sweep_name, "method", "metric", "median", "q25", "q75", "count"])
        for r in result.aggregate:
            w.writerow([format_number(r["sweep"]), r["method"], r["metric"], format_number(r["median"]),
                        format_number(r["q25"]), format_number(r["q75"]), r["count"]])
    if result.failures:
        with open(out / "failures.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([sweep_name, "replicate", "error"])
            for f in result.failures:
                w.writerow([format_number(f["sweep"]), f["replicate"], f["error"]])
    extra = {"valid": result.valid, "failed_replicates": len(result.failures)}
    (out / "manifest.txt").write_text(dump_config(result.config, extra), encoding="utf-8")
    return out


# -- real networks ------------------------------------------------------------

@dataclass
class NetworkReport:
    n: int
    m: int
    fitted: BlockModelParams
    bp_core_size: int
    scores: dict
    names: list
    pearson: np.ndarray
    spearman: np.ndarray
    converged: bool
    subgraph: "NetworkReport | None" = None


def analyze_network(g: Graph, cfg: ExperimentConfig, seed=None) -> NetworkReport:
    scores, fitted, marg = score_graph(g, cfg, cfg.resolved_methods(), seed)
    names = [str(m) for m in scores]
    vecs = list(scores.values())
    core = bp.core_size_estimate(marg) if marg is not None else -1
    return NetworkReport(n=g.n, m=g.m, fitted=fitted, bp_core_size=core, scores=scores,
                         names=names, pearson=pearson_matrix(vecs), spearman=spearman_matrix(vecs),
                         converged=bool(marg.converged) if marg is not None else True)


def real_network_report(path, gamma_grid=None, cfg: ExperimentConfig | None = None,
                        out_dir=None, seed=None, nodes=None) -> NetworkReport:
    """Fit the SBM to an observed network and compare all six measures.

    Writes (when ``out_dir`` is given) ``scores_by_degree.csv``,
    ``pearson.csv``, ``spearman.csv``, ``core_agreement.csv``, ``summary.txt``
    and the same set for the induced subgraph of the largest-degree nodes
    under ``subgraph/``.
    """
    if cfg is None:
        cfg = ExperimentConfig(kind="real-network", edge_list=str(path))
    if gamma_grid is None:
        gamma_grid = cfg.gamma_grid
    seed = cfg.seed if seed is None else seed
    loaded = load_edge_list(path, nodes)
    g = loaded.graph
    report = analyze_network(g, cfg, seed)

    k = degrees(g)
    top = np.lexsort((np.arange(g.n), -k))[: min(cfg.subgraph_size, g.n)]
    sub, kept = g.subgraph(top)
    try:
        report.subgraph = analyze_network(sub, cfg, seed)
    except CorenessError as err:
        log.warning("subgraph analysis failed: %s", err)
    if out_dir is not None:
        out = Path(out_dir)
        _write_network(report, g, loaded.ids, gamma_grid, out, cfg)
        if report.subgraph is not None:
            _write_network(report.subgraph, sub, [loaded.ids[i] for i in kept], gamma_grid,
                           out / "subgraph", cfg)
    return report


def _write_matrix(path, names, mat):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method"] + names)
        for name, row in zip(names, mat):
            w.writerow([name] + [format_number(float(x)) for x in row])


def _write_network(report: NetworkReport, g: Graph, ids, gamma_grid, out: Path, cfg):
    out.mkdir(parents=True, exist_ok=True)
    k = degrees(g)
    order = np.lexsort((np.arange(g.n), -k))
    with open(out / "scores_by_degree.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "node", "degree"] + report.names)
        for rank, i in enumerate(order):
            w.writerow([rank, ids[i], int(k[i])] + [format_number(float(s.scores[i]))
                                                   for s in report.scores.values()])
    _write_matrix(out / "pearson.csv", report.names, report.pearson)
    _write_matrix(out / "spearman.csv", report.names, report.spearman)
    if Method.BP in report.scores:
        bp_labels = Labeling.from_core_mask(report.scores[Method.BP].scores > 0.5)
        with open(out / "core_agreement.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "method", "agreement_with_bp"])
            for gam in gamma_grid:
                for name, s in report.scores.items():
                    t = top_core_assignment(s, gam)
                    w.writerow([format_number(float(gam)), str(name), format_number(agreement(t, bp_labels))])
    summary = {
        "nodes": report.n,
        "edges": report.m,
        "fitted_gamma": report.fitted.gamma if report.fitted else None,
        "fitted_c": report.fitted.c.tolist() if report.fitted else None,
        "bp_core_size": report.bp_core_size,
        "bp_converged": report.converged,
    }
    text = "".join(f"{key} = {format_value(v)}\n" for key, v in summary.items())
    (out / "summary.txt").write_text(text + dump_config(cfg), encoding="utf-8")
