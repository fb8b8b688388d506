"""Node centrality scores: degree, eigenvector, MINRES, non-backtracking, PageRank.

The spectral measures use power iteration from the uniform positive vector.
Iterating ``M + I`` instead of ``M`` leaves the eigenvectors unchanged but
makes the Perron root strictly dominant in modulus, so bipartite graphs (a
star, an even cycle) converge instead of oscillating.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import NoSpectrum
from .graph import Graph, degrees, two_core

log = logging.getLogger(__name__)


class Method(str, enum.Enum):
    DEGREE = "DEGREE"
    EC = "EC"
    MINRES = "MINRES"
    NBT = "NBT"
    PR = "PR"
    BP = "BP"

    def __str__(self):
        return self.value


NORMS = {
    Method.DEGREE: "raw",
    Method.EC: "L2",
    Method.MINRES: "L2",
    Method.NBT: "L2",
    Method.PR: "L1",
    Method.BP: "prob",
}


@dataclass(frozen=True, eq=False)
class CentralityScores:
    method: Method
    scores: np.ndarray
    iterations: int = 0
    converged: bool = True
    eigenvalue: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).copy()
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "method", Method(self.method))

    @property
    def norm(self) -> str:
        return NORMS[self.method]

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])

    def __len__(self):
        return self.n


def degree_centrality(g: Graph) -> CentralityScores:
    return CentralityScores(Method.DEGREE, degrees(g).astype(float))


def _power(apply, x0: np.ndarray, tol: float, max_iter: int, watch: int | None = None):
    """Normalized power iteration.

    With ``watch`` set, the leading ``watch`` entries must move less than
    ``tol`` and the remaining ones less than ``sqrt(tol)``.
    """
    x = x0 / np.linalg.norm(x0)
    head = x[:watch] / np.linalg.norm(x[:watch])
    loose = np.sqrt(tol) if watch is not None else tol
    for it in range(1, max_iter + 1):
        y = apply(x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            raise NoSpectrum("iteration collapsed to the zero vector")
        y /= nrm
        new_head = y[:watch] / np.linalg.norm(y[:watch])
        if np.abs(new_head - head).max() < tol and np.abs(y - x).max() < loose:
            return y, it, True
        x, head = y, new_head
    return x, max_iter, False


def eigenvector_centrality(g: Graph, tol: float = 1e-10, max_iter: int = 100_000) -> CentralityScores:
    """Leading adjacency eigenvector, L2-normalized and non-negative.

    The leading eigenvalue is returned as ``eigenvalue``.  On disconnected
    graphs the mass concentrates on the component with the largest root.
    """
    if g.m == 0:
        raise NoSpectrum("edgeless graph has no Perron vector")
    a = g.adjacency_matrix()
    u, it, ok = _power(lambda x: a @ x + x, np.ones(g.n), tol, max_iter)
    u = _sign_fix(u)
    lam = float(u @ (a @ u))
    if not ok:
        log.warning("eigenvector centrality did not converge in %d iterations", max_iter)
    return CentralityScores(Method.EC, u, iterations=it, converged=ok, eigenvalue=lam)


def _sign_fix(u: np.ndarray) -> np.ndarray:
    if u.sum() < 0:
        u = -u
    u = np.where(u < 0, 0.0, u)
    return u / np.linalg.norm(u)


def minres_objective(g: Graph, u: np.ndarray) -> float:
    """Off-diagonal residual ``sum_{i != j} (A_ij - u_i u_j)**2`` over ordered pairs."""
    u = np.asarray(u, dtype=float)
    s = float(u @ u)
    quad = float(u @ (g.adjacency_matrix() @ u))
    return 2.0 * g.m - 2.0 * quad + s * s - float(np.sum(u ** 4))


def minres_stationarity(g: Graph, u: np.ndarray) -> np.ndarray:
    """Per-node residual ``u_i * sum_{j != i} u_j**2 - sum_j A_ij u_j``."""
    u = np.asarray(u, dtype=float)
    return u * (u @ u - u * u) - g.adjacency_matrix() @ u


@numba.njit(cache=True)
def _minres_cycles(indptr, indices, u, tol, max_iter):
    n = u.shape[0]
    s = 0.0
    for i in range(n):
        s += u[i] * u[i]
    for it in range(1, max_iter + 1):
        change = 0.0
        for i in range(n):
            num = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                num += u[indices[p]]
            den = s - u[i] * u[i]
            new = num / den if den > 0.0 else 0.0
            if new < 0.0:
                new = 0.0
            d = abs(new - u[i])
            if d > change:
                change = d
            s += new * new - u[i] * u[i]
            u[i] = new
        if change < tol:
            return it, True
    return max_iter, False


def minres_coreness(g: Graph, tol: float = 1e-8, max_iter: int = 10_000,
                    ec: CentralityScores | None = None) -> CentralityScores:
    """Minimize the off-diagonal residual by cyclic exact coordinate updates.

    Starts from the eigenvector-centrality direction at its optimal scale
    ``lambda_1 / (1 - sum u**4)``, so the objective at the returned vector
    never exceeds the objective anywhere along the EC ray.  Output is
    L2-normalized; ``meta`` holds the raw vector and objective values.

    On star-like graphs the infimum is approached only as the center's
    entry grows without bound; the iteration then stops at ``max_iter``
    with ``converged=False`` and a vector concentrated on the center.
    """
    if ec is None:
        ec = eigenvector_centrality(g)
    u0 = ec.scores
    denom = 1.0 - float(np.sum(u0 ** 4))
    scale = np.sqrt(max(ec.eigenvalue, 0.0) / denom) if denom > 0 else 1.0
    u = u0 * scale
    h_init = minres_objective(g, u)
    it, ok = _minres_cycles(g.indptr, g.indices, u, tol, max_iter)
    h_final = minres_objective(g, u)
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise NoSpectrum("MINRES collapsed to the zero vector")
    if not ok:
        log.warning("MINRES did not converge in %d cycles", max_iter)
    meta = {"raw": u, "raw_norm": float(nrm), "objective": h_final, "objective_init": h_init}
    return CentralityScores(Method.MINRES, u / nrm, iterations=it, converged=ok, meta=meta)


def nbt_centrality(g: Graph, tol: float = 1e-10, max_iter: int = 100_000) -> CentralityScores:
    """Non-backtracking centrality via the 2N x 2N companion operator.

    Power-iterates ``[[A, I - D], [I, 0]]`` matrix-free and keeps the first
    N entries; convergence is judged on that node block.  Leaves get a
    positive score (they receive from their neighbor); only forests are
    rejected.  ``eigenvalue`` is the leading non-backtracking eigenvalue.
    """
    if g.m == 0 or not two_core(g).any():
        raise NoSpectrum("graph is a forest: the non-backtracking operator is nilpotent")
    a = g.adjacency_matrix()
    one_minus_d = 1.0 - degrees(g)
    n = g.n

    def apply(z):
        x, y = z[:n], z[n:]
        return np.concatenate([a @ x + one_minus_d * y + x, x + y])

    # the all-ones 2N vector is itself an eigenvector (eigenvalue 1), so the
    # uniform start lives on the node block only.  When the 2-core is a union
    # of cycles, eigenvalue 1 is defective and the auxiliary block converges
    # only algebraically, hence the looser test on it.
    start = np.concatenate([np.ones(n), np.zeros(n)])
    z, it, ok = _power(apply, start, tol, max_iter, watch=n)
    x, y = z[:n], z[n:]
    top = a @ x + one_minus_d * y
    lam = float(top @ x / (x @ x))
    if not ok:
        log.warning("non-backtracking centrality did not converge in %d iterations", max_iter)
    return CentralityScores(Method.NBT, _sign_fix(x), iterations=it, converged=ok, eigenvalue=lam)


def pagerank(g: Graph, d: float = 0.85, tol: float = 1e-10, max_iter: int = 100_000,
             history: list | None = None) -> CentralityScores:
    """PageRank ``PR_i = (1-d)/N + d * sum_j A_ij PR_j / k_j``.

    Mass sitting on isolated nodes is redistributed uniformly.  Stops when
    the L1 change drops below ``tol``.  If ``history`` is a list, the total
    mass after every iteration is appended to it.
    """
    if not 0.0 <= d < 1.0:
        raise ValueError("damping d must lie in [0, 1)")
    n = g.n
    k = degrees(g).astype(float)
    dangling = k == 0
    inv_k = np.divide(1.0, k, out=np.zeros(n), where=~dangling)
    a = g.adjacency_matrix()
    pr = np.full(n, 1.0 / n)
    ok = False
    it = 0
    for it in range(1, max_iter + 1):
        new = (1.0 - d) / n + d * (a @ (pr * inv_k)) + d * pr[dangling].sum() / n
        if history is not None:
            history.append(float(new.sum()))
        delta = np.abs(new - pr).sum()
        pr = new
        if delta < tol:
            ok = True
            break
    return CentralityScores(Method.PR, pr, iterations=it, converged=ok)


def all_scores(g: Graph, methods=None, *, bp_marginals=None, pr_damping: float = 0.85,
               tol: float | None = None) -> dict:
    """Compute the requested non-BP measures (plus BP if marginals are given)."""
    methods = [Method(m) for m in (methods or [m for m in Method if m is not Method.BP])]
    kw = {} if tol is None else {"tol": tol}
    out = {}
    ec = None
    for m in methods:
        if m is Method.DEGREE:
            out[m] = degree_centrality(g)
        elif m is Method.EC:
            ec = ec or eigenvector_centrality(g, **kw)
            out[m] = ec
        elif m is Method.MINRES:
            ec = ec or eigenvector_centrality(g, **kw)
            out[m] = minres_coreness(g, ec=ec)
        elif m is Method.NBT:
            out[m] = nbt_centrality(g, **kw)
        elif m is Method.PR:
            out[m] = pagerank(g, pr_damping, **kw)
        elif m is Method.BP:
            if bp_marginals is None:
                raise ValueError("BP scores need fitted marginals")
            out[m] = bp_scores(bp_marginals)
    return out


def bp_scores(marg) -> CentralityScores:
    return CentralityScores(Method.BP, marg.core, iterations=marg.sweeps, converged=marg.converged)
