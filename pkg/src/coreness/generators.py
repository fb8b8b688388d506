"""Planted core-periphery graphs: two-block SBM and its degree-corrected variant.

Edge probabilities are ``c[a, b] / n`` for the plain model and
``min(1, w_i * w_j * rho * c[a, b])`` with ``rho = 1 / sum(w)`` for the
degree-corrected one.  All sampling uses ``numpy.random.default_rng``
(PCG64) and walks the upper triangle row by row, so a seed fixes the graph.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidExponent, ProbabilityOverflow
from .graph import CORE, PERIPHERY, Graph, Labeling, build_graph

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockModelParams:
    gamma: float
    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(2, 2)
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise ValueError(f"affinity matrix must be symmetric, got {c.tolist()}")
        if (c < 0).any():
            raise ValueError("affinity entries must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        c = 0.5 * (c + c.T)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def fractions(self) -> np.ndarray:
        return np.array([self.gamma, 1.0 - self.gamma])

    def is_core_periphery(self) -> bool:
        c = self.c
        return bool(c[0, 0] > c[0, 1] > c[1, 1])

    def mean_degree(self) -> float:
        f = self.fractions
        return float(f @ self.c @ f)

    def swapped(self) -> "BlockModelParams":
        return BlockModelParams(1.0 - self.gamma, self.c[::-1, ::-1])

    def __eq__(self, other):
        if not isinstance(other, BlockModelParams):
            return NotImplemented
        return self.gamma == other.gamma and np.array_equal(self.c, other.c)

    def __repr__(self):
        return f"BlockModelParams(gamma={self.gamma:.6g}, c={np.round(self.c, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DegreeCorrections:
    w: np.ndarray
    alpha: float
    i0: int
    rho: float = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).copy()
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "rho", 1.0 / w.sum())

    @property
    def n(self) -> int:
        return int(self.w.shape[0])


def core_count(gamma: float, n: int) -> int:
    """Nearest integer to ``gamma * n``, halves rounded up (toward the core)."""
    return int(math.floor(gamma * n + 0.5))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _sample_pairs(prob_row, n: int, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli draw for every pair i < j, rows in increasing i.

    ``prob_row(i)`` returns link probabilities for ``j = i+1 .. n-1``.
    """
    chunks = []
    for i in range(n - 1):
        p = prob_row(i)
        hits = np.flatnonzero(rng.random(n - i - 1) < p)
        if hits.size:
            chunks.append(np.column_stack([np.full(hits.size, i), hits + i + 1]))
    if not chunks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(chunks)


def sample_sbm(params: BlockModelParams, n: int, seed=None) -> tuple[Graph, Labeling]:
    """Sample a plain two-block SBM with ``p_ab = c_ab / n``.

    Each node is core independently with probability ``gamma``.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    p = params.c / n
    if (p > 1).any():
        raise ProbabilityOverflow(f"c/n exceeds 1 for n={n}: {params.c.tolist()}")
    rng = _rng(seed)
    core = rng.random(n) < params.gamma
    block = np.where(core, 0, 1)
    edges = _sample_pairs(lambda i: p[block[i], block[i + 1:]], n, rng)
    return build_graph(n, edges), Labeling.from_core_mask(core)


def default_offset(alpha: float, n: int, c) -> int:
    """Smallest ``i0 >= 1`` for which the heaviest pair needs no capping.

    With unit-mean weights ``rho = 1/n``, so the condition is
    ``w_0**2 * max(c) / n <= 1``.
    """
    cmax = float(np.max(c))
    if cmax <= 0:
        return 1
    lo, hi = 1, 1
    while _heaviest(alpha, n, hi) ** 2 * cmax / n > 1:
        lo, hi = hi, hi * 2
        if hi > 10**12:
            raise ValueError("no offset avoids capping")
    if _heaviest(alpha, n, lo) ** 2 * cmax / n <= 1:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _heaviest(alpha, n, mid) ** 2 * cmax / n > 1:
            lo = mid
        else:
            hi = mid
    return hi


def _raw_weights(alpha: float, n: int, i0: int) -> np.ndarray:
    return (i0 + np.arange(n, dtype=float)) ** (-1.0 / (alpha - 1.0))


def _heaviest(alpha, n, i0):
    w = _raw_weights(alpha, n, i0)
    return w[0] / w.mean()


def power_law_corrections(alpha: float, n: int, i0: int | None = None, c=None) -> DegreeCorrections:
    """Chung-Lu style weights ``w_i ~ (i0 + i)**(-1/(alpha-1))`` with unit mean.

    When ``i0`` is omitted it is chosen by :func:`default_offset` for the
    affinity matrix ``c`` (or ``i0 = 1`` when no ``c`` is given).
    """
    if not alpha > 2:
        raise InvalidExponent(f"tail exponent must exceed 2 (mean diverges), got {alpha}")
    if i0 is None:
        i0 = default_offset(alpha, n, c) if c is not None else 1
    if i0 < 1:
        raise ValueError("offset i0 must be >= 1")
    w = _raw_weights(alpha, n, i0)
    w = w / w.mean()
    corr = DegreeCorrections(w=w, alpha=float(alpha), i0=int(i0))
    log.debug("power-law corrections alpha=%g n=%d i0=%d max/min=%.3g", alpha, n, i0, w[0] / w[-1])
    return corr


def sample_dc_sbm(params: BlockModelParams, corr: DegreeCorrections, seed=None,
                  info: dict | None = None) -> tuple[Graph, Labeling]:
    """Sample a degree-corrected SBM.

    The ``round(gamma * n)`` nodes with the largest weights form the core
    (ties by lower index).  Pairs whose probability exceeds 1 are capped;
    their count is logged and, if ``info`` is a dict, stored under
    ``"capped_pairs"``.
    """
    w = corr.w
    n = corr.n
    if n < 2:
        raise ValueError("need at least two nodes")
    k = core_count(params.gamma, n)
    if k < 1:
        raise ValueError(f"gamma*n rounds to zero core nodes (gamma={params.gamma}, n={n})")
    order = np.lexsort((np.arange(n), -w))
    core = np.zeros(n, dtype=bool)
    core[order[:k]] = True
    block = np.where(core, 0, 1)
    rho = corr.rho
    c = params.c
    capped = 0

    def row(i):
        nonlocal capped
        p = w[i] * w[i + 1:] * rho * c[block[i], block[i + 1:]]
        over = p > 1
        if over.any():
            capped += int(over.sum())
            p = np.minimum(p, 1.0)
        return p

    rng = _rng(seed)
    edges = _sample_pairs(row, n, rng)
    if capped:
        log.info("dc-SBM: capped %d pair probabilities at 1", capped)
    if info is not None:
        info["capped_pairs"] = capped
    labels = Labeling(np.where(core, CORE, PERIPHERY))
    return build_graph(n, edges), labels
