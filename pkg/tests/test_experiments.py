import csv
import math
from pathlib import Path

import pytest

from coreness.errors import ConfigError, EmptyGraph, ParseError
from coreness.evaluation import summarize
from coreness.experiments import (ExperimentConfig, config_from_dict, dump_config, load_config,
                                  load_edge_list, parse_config_text, read_labels, real_network_report,
                                  replicate_seed, resolve_threads, run_experiment, write_edge_list,
                                  write_labels)
from coreness.generators import BlockModelParams, sample_sbm

HERE = Path(__file__).parent
STAR_RING = HERE / "data" / "star_ring.txt"
GOLDEN = HERE / "golden" / "star_ring"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_edge_list_path(tmp_path):
    loaded = load_edge_list(write(tmp_path / "e.txt", "0 1\n1 2\n"))
    assert loaded.graph.n == 3 and loaded.graph.m == 2
    assert loaded.ids == ["0", "1", "2"]


def test_edge_list_comments_duplicates_whitespace(tmp_path):
    text = "# header\n\nAS7 AS9  \n AS9\tAS7\n\n# trailing\nAS9 AS11\n   \n"
    loaded = load_edge_list(write(tmp_path / "e.txt", text))
    assert loaded.graph.m == 2
    assert loaded.ids == ["AS7", "AS9", "AS11"]
    assert loaded.graph.report.duplicates == 1


def test_edge_list_preregistered_nodes(tmp_path):
    loaded = load_edge_list(write(tmp_path / "e.txt", "0 3\n"), nodes=range(5))
    assert loaded.graph.n == 5
    assert loaded.graph.has_edge(0, 3)


def test_edge_list_malformed_line(tmp_path):
    with pytest.raises(ParseError) as err:
        load_edge_list(write(tmp_path / "e.txt", "0 1\n# ok\n1 2 3\n"))
    assert err.value.lineno == 3
    assert ":3:" in str(err.value)


def test_edge_list_empty(tmp_path):
    with pytest.raises(EmptyGraph):
        load_edge_list(write(tmp_path / "e.txt", "# nothing here\n\n"))


def test_edge_list_and_labels_round_trip(tmp_path):
    g, lab = sample_sbm(BlockModelParams(0.3, [[10, 6], [6, 1]]), 80, seed=1)
    write_edge_list(g, tmp_path / "e.txt")
    write_labels(lab, tmp_path / "l.csv")
    assert read_labels(tmp_path / "l.csv") == lab
    loaded = load_edge_list(tmp_path / "e.txt", nodes=range(g.n))
    assert loaded.graph == g


def test_config_parsing_and_round_trip(tmp_path):
    text = """# homogeneous ranking at small scale
kind = homogeneous-ranking
n = 300
c = [[10, 6], [6, 1]]   # affinity
methods = [DEGREE, PR]
i0 = none
"""
    values = parse_config_text(text)
    assert values["c"] == [[10, 6], [6, 1]]
    assert values["methods"] == ["DEGREE", "PR"]
    cfg = config_from_dict(values)
    again = load_config(write(tmp_path / "m.txt", dump_config(cfg)))
    assert again == cfg


def test_config_errors():
    with pytest.raises(ParseError) as err:
        parse_config_text("n = 3\nthis line is wrong\n", "cfg.txt")
    assert err.value.lineno == 2
    with pytest.raises(ConfigError):
        config_from_dict({"nonsense": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="unknown")
    with pytest.raises(ConfigError):
        ExperimentConfig(replicates=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(c=[[1, 2], [3, 1]])
    with pytest.raises(ConfigError):
        ExperimentConfig(kind="real-network")


def test_default_methods_mirror_experiment_kind():
    assert "MINRES" not in ExperimentConfig(kind="homogeneous-ranking").resolved_methods()
    assert ExperimentConfig(kind="ec-minres-correlation").resolved_methods() == ["EC", "MINRES"]


def test_replicate_seeds_distinct_and_stable():
    seeds = {replicate_seed(0, s, r) for s in range(3) for r in range(50)}
    assert len(seeds) == 150
    assert replicate_seed(5, 1, 2) == replicate_seed(5, 1, 2)


def test_threads_resolution(monkeypatch):
    monkeypatch.setenv("CORENESS_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    monkeypatch.delenv("CORENESS_THREADS")
    assert resolve_threads() == 1


def small_config(**kw):
    base = dict(kind="homogeneous-ranking", n=200, replicates=3, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_experiment_outputs_reproducible(tmp_path):
    cfg = small_config()
    run_experiment(cfg, out_dir=tmp_path / "a")
    # re-run from the manifest alone, in a worker pool
    cfg2 = load_config(tmp_path / "a" / "manifest.txt")
    run_experiment(cfg2, out_dir=tmp_path / "b", threads=2)
    for name in ("replicates.csv", "aggregate.csv", "manifest.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_aggregate_matches_replicates(tmp_path):
    cfg = small_config(kind="ec-minres-correlation", n_values=[100, 200], replicates=4)
    run_experiment(cfg, out_dir=tmp_path)
    reps = read_rows(tmp_path / "replicates.csv")
    assert list(reps[0]) == ["n", "replicate", "seed", "method", "metric", "value"]
    groups = {}
    for r in reps:
        groups.setdefault((r["n"], r["method"], r["metric"]), []).append(float(r["value"]))
    agg = read_rows(tmp_path / "aggregate.csv")
    assert len(agg) == len(groups)
    for r in agg:
        s = summarize(groups[(r["n"], r["method"], r["metric"])])
        assert float(r["median"]) == pytest.approx(s["median"], rel=1e-15, nan_ok=True)
        assert int(r["count"]) == s["count"]


def test_failed_replicates_mark_run_invalid(tmp_path):
    # an empty affinity matrix yields edgeless graphs, which have no spectrum
    cfg = small_config(kind="ipr-scaling", n_values=[50], c=[[0, 0], [0, 0]])
    result = run_experiment(cfg, out_dir=tmp_path)
    assert not result.valid
    assert len(result.failures) == 3
    assert "NoSpectrum" in read_rows(tmp_path / "failures.csv")[0]["error"]
    assert "# valid = false" in (tmp_path / "manifest.txt").read_text()


def test_experiment_rows_content():
    result = run_experiment(small_config(replicates=2))
    methods = {r["method"] for r in result.rows}
    assert {"BP", "DEGREE", "EC", "NBT", "PR", "GRAPH", "BP|DEGREE"} <= methods
    overlaps = result.values("BP", "overlap")
    assert len(overlaps) == 2 and all(o <= 1 for o in overlaps)


def _compare_csv(actual, expected):
    a, e = read_rows(actual), read_rows(expected)
    assert len(a) == len(e)
    for ra, re_ in zip(a, e):
        assert list(ra) == list(re_)
        for k in re_:
            try:
                x, y = float(re_[k]), float(ra[k])
            except ValueError:
                assert ra[k] == re_[k]
                continue
            assert (math.isnan(x) and math.isnan(y)) or y == pytest.approx(x, rel=1e-6, abs=1e-9)


def test_star_ring_golden_report(tmp_path):
    cfg = ExperimentConfig(kind="real-network", edge_list="tests/data/star_ring.txt",
                           subgraph_size=10, seed=7, gamma_grid=[0.1, 0.3])
    rep = real_network_report(STAR_RING, cfg=cfg, out_dir=tmp_path)
    assert rep.n == 15 and rep.m == 16
    for sub in ("", "subgraph"):
        for name in ("scores_by_degree.csv", "pearson.csv", "spearman.csv", "core_agreement.csv"):
            _compare_csv(tmp_path / sub / name, GOLDEN / sub / name)
        got = (tmp_path / sub / "summary.txt").read_text().splitlines()
        want = (GOLDEN / sub / "summary.txt").read_text().splitlines()
        assert [l.split(" = ")[0] for l in got] == [l.split(" = ")[0] for l in want]
        assert got[:2] == want[:2]


def test_real_network_report_is_deterministic(tmp_path):
    cfg = ExperimentConfig(kind="real-network", edge_list=str(STAR_RING), seed=3)
    real_network_report(STAR_RING, cfg=cfg, out_dir=tmp_path / "a")
    real_network_report(STAR_RING, cfg=cfg, out_dir=tmp_path / "b")
    for p in (tmp_path / "a").rglob("*.*"):
        assert p.read_bytes() == (tmp_path / "b" / p.relative_to(tmp_path / "a")).read_bytes()
