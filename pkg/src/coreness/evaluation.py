"""Localization and core-recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.stats

from .centrality import CentralityScores
from .errors import DegenerateTruth, UndefinedCorrelation, ZeroVector
from .generators import core_count
from .graph import Labeling


def _values(v) -> np.ndarray:
    return np.asarray(v.scores if isinstance(v, CentralityScores) else v, dtype=float)


def ipr(scores) -> float:
    """Inverse participation ratio ``sum v**4`` of the L2-normalized vector."""
    v = _values(scores)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ZeroVector("IPR of the zero vector is undefined")
    v = v / nrm
    return float(np.sum(v ** 4))


def top_core_assignment(scores, gamma: float) -> Labeling:
    """Label the ``round(gamma * n)`` highest-scoring nodes as core.

    Equal scores are resolved in favor of the lower node index.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie strictly between 0 and 1")
    v = _values(scores)
    n = v.shape[0]
    order = np.lexsort((np.arange(n), -v))
    core = np.zeros(n, dtype=bool)
    core[order[:core_count(gamma, n)]] = True
    return Labeling.from_core_mask(core)


def agreement(t: Labeling, truth: Labeling) -> float:
    if t.n != truth.n:
        raise ValueError(f"length mismatch: {t.n} vs {truth.n}")
    if t.n == 0:
        raise ValueError("empty labelings")
    return float(np.mean(t.groups == truth.groups))


def overlap(t: Labeling, truth: Labeling) -> float:
    """Agreement rescaled so the majority-group baseline scores 0 and a perfect labeling 1."""
    base = float(truth.fractions().max())
    if base >= 1.0:
        raise DegenerateTruth("truth contains a single group")
    return (agreement(t, truth) - base) / (1.0 - base)


def pearson(x, y) -> float:
    x, y = _values(x), _values(y)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if x.shape[0] < 2:
        raise UndefinedCorrelation("need at least two nodes")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelation("constant score vector")
    return float(np.clip(np.corrcoef(x, y)[0, 1], -1.0, 1.0))


def _pairwise(vectors, corr) -> np.ndarray:
    vals = [_values(v) for v in vectors]
    if len({v.shape for v in vals}) > 1:
        raise ValueError("score vectors differ in length")
    k = len(vals)
    out = np.full((k, k), np.nan)
    ok = [v.shape[0] >= 2 and np.ptp(v) > 0 for v in vals]
    for a in range(k):
        if not ok[a]:
            continue
        out[a, a] = 1.0
        for b in range(a + 1, k):
            if ok[b]:
                out[a, b] = out[b, a] = float(np.clip(corr(vals[a], vals[b]), -1.0, 1.0))
    return out


def pearson_matrix(score_vectors: Sequence) -> np.ndarray:
    """Pairwise Pearson correlations of raw scores.

    Rows and columns of constant vectors are NaN (undefined), never filled in.
    """
    return _pairwise(score_vectors, lambda x, y: np.corrcoef(x, y)[0, 1])


def spearman_matrix(score_vectors: Sequence) -> np.ndarray:
    return _pairwise(score_vectors, lambda x, y: scipy.stats.spearmanr(x, y)[0])


def random_overlap_expectation(n: int, k_true: int, k_assigned: int) -> float:
    """Exact mean overlap of a uniformly random assignment of ``k_assigned`` core labels.

    The number of correctly placed core labels is hypergeometric, so the
    expected agreement is ``(2*E[X] + n - k_true - k_assigned) / n`` with
    ``E[X] = k_assigned * k_true / n``.
    """
    ex = k_assigned * k_true / n
    agree = (2 * ex + n - k_true - k_assigned) / n
    base = max(k_true, n - k_true) / n
    return (agree - base) / (1 - base)


def summarize(values) -> dict:
    """Median and interquartile range of finite values."""
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"median": np.nan, "q25": np.nan, "q75": np.nan, "count": 0}
    q25, med, q75 = np.percentile(v, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75), "count": int(v.size)}


@dataclass
class MethodMetrics:
    ipr: float
    agreement: float | None = None
    overlap: float | None = None


@dataclass
class EvaluationReport:
    methods: dict = field(default_factory=dict)
    names: list = field(default_factory=list)
    pearson: np.ndarray | None = None
    spearman: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def pearson_of(self, a, b) -> float:
        i, j = self.names.index(str(a)), self.names.index(str(b))
        return float(self.pearson[i, j])


def evaluate_scores(scores: Mapping, truth: Labeling | None = None,
                    gamma: float | None = None) -> EvaluationReport:
    """IPR for every method, recovery metrics against ``truth`` and correlation matrices.

    The core size used for the top-scoring assignment is ``gamma`` if given,
    otherwise the truth's core fraction.
    """
    names = [str(m) for m in scores]
    vecs = list(scores.values())
    report = EvaluationReport(names=names)
    if truth is not None and gamma is None:
        gamma = float(truth.fractions()[0])
    for name, s in zip(names, vecs):
        mm = MethodMetrics(ipr=ipr(s))
        if truth is not None:
            t = top_core_assignment(s, gamma)
            mm.agreement = agreement(t, truth)
            mm.overlap = overlap(t, truth)
        report.methods[name] = mm
    report.pearson = pearson_matrix(vecs)
    report.spearman = spearman_matrix(vecs)
    return report
