"""Loopy belief propagation and EM fitting for the two-block SBM.

Messages live on directed edges in CSR order (see :mod:`coreness.graph`);
``messages[p]`` is the two-vector ``eta^{i -> j}`` for ``i = source(p)``,
``j = indices[p]``.  Three treatments of non-adjacent pairs are offered:

``"field"``
    The sparse approximation: messages from non-neighbors are replaced by
    their node marginals, so the non-edge product acting on node ``i`` is
    ``H_a - f_a(q^i) - sum_{k ~ i} f_a(q^k)`` with
    ``f_a(q) = log sum_b q_b (1 - c_ab/n)`` and the global field
    ``H_a = sum_k f_a(q^k)`` refreshed incrementally as marginals change.
    O(m) per sweep.
``"dense"``
    The full product over non-neighbors with a message for every ordered
    pair.  O(n^2) per sweep and memory, so limited to ``n <= DENSE_LIMIT``.
``"edges"``
    Non-edge factors dropped altogether; the model is then the pairwise
    model on the graph's edges only, for which BP is exact on trees.

Updates are asynchronous, node by node in index order; all messages leaving
a node are refreshed together, which is the same as visiting directed edges
sorted by (source, target) because a node's outgoing messages do not feed
its own incoming ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import DegenerateGroup
from .generators import BlockModelParams
from .graph import Graph

log = logging.getLogger(__name__)

MODES = ("field", "dense", "edges")
DENSE_LIMIT = 500
_TINY = 1e-300


@dataclass
class BpState:
    """Mutable message-passing state confined to one worker."""

    params: BlockModelParams
    messages: np.ndarray
    q: np.ndarray
    field: np.ndarray
    mode: str = "field"
    damping: float = 0.0
    residual: float = np.inf
    sweeps: int = 0
    n: int = 0

    def copy(self) -> "BpState":
        return replace(self, messages=self.messages.copy(), q=self.q.copy(),
                       field=self.field.copy())


@dataclass
class Marginals:
    q: np.ndarray
    pair_q: np.ndarray
    converged: bool
    log_likelihood_proxy: float
    params: BlockModelParams
    messages: np.ndarray = field(repr=False)
    sweeps: int = 0
    residual: float = np.inf
    mode: str = "field"

    @property
    def core(self) -> np.ndarray:
        """Posterior core probability of every node (the BP coreness score)."""
        return self.q[:, 0]

    def swapped(self) -> "Marginals":
        return replace(self, q=self.q[:, ::-1].copy(), pair_q=self.pair_q[:, ::-1, ::-1].copy(),
                       messages=self.messages[..., ::-1].copy(), params=self.params.swapped())


def _log_tables(params: BlockModelParams, n: int):
    p = np.clip(params.c / n, 0.0, 1.0)
    prior = np.log(np.maximum(params.fractions, _TINY))
    return p, prior


def _dense_adjacency(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n), dtype=np.bool_)
    if g.m:
        a[g.edges[:, 0], g.edges[:, 1]] = True
        a[g.edges[:, 1], g.edges[:, 0]] = True
    return a


def init_bp(g: Graph, params: BlockModelParams, seed=None, *, noise: float = 0.1,
            mode: str = "field", damping: float = 0.0) -> BpState:
    """Initial messages ``eta_a ~ gamma_a + noise * U[0, 1)``, renormalized."""
    if mode not in MODES:
        raise ValueError(f"unknown BP mode {mode!r}")
    if mode == "dense" and g.n > DENSE_LIMIT:
        raise ValueError(f"dense mode is limited to n <= {DENSE_LIMIT}")
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    shape = (g.n, g.n, 2) if mode == "dense" else (g.indices.shape[0], 2)
    msg = params.fractions + noise * rng.random(shape)
    msg /= msg.sum(axis=-1, keepdims=True)
    q = np.tile(params.fractions, (g.n, 1))
    state = BpState(params=params, messages=msg, q=q, field=np.zeros(2), mode=mode,
                    damping=float(damping), n=g.n)
    _refresh_field(state)
    return state


def _refresh_field(state: BpState) -> None:
    if state.mode != "field":
        state.field = np.zeros(2)
        return
    p = np.clip(state.params.c / state.n, 0.0, 1.0)
    state.field = _nonedge_logs(state.q, p).sum(axis=0)


def _nonedge_logs(q, p):
    """``f_a(q^k) = log sum_b q_b^k (1 - p_ab)`` for every node ``k``."""
    return np.log(np.maximum(q @ (1.0 - p).T, _TINY))


@numba.njit(cache=True)
def _nonedge_term(q0, q1, pm, a):
    return np.log(max(q0 * (1.0 - pm[a, 0]) + q1 * (1.0 - pm[a, 1]), 1e-300))


@numba.njit(cache=True)
def _sweep_sparse(indptr, indices, reverse, msg, q, h, pm, prior, use_field, damping):
    n = indptr.shape[0] - 1
    resid = 0.0
    terms = np.empty((np.max(np.diff(indptr)) if n > 0 else 0, 2))
    for i in range(n):
        t0 = prior[0]
        t1 = prior[1]
        lo = indptr[i]
        hi = indptr[i + 1]
        if use_field:
            t0 += h[0] - _nonedge_term(q[i, 0], q[i, 1], pm, 0)
            t1 += h[1] - _nonedge_term(q[i, 0], q[i, 1], pm, 1)
            for p in range(lo, hi):
                k = indices[p]
                t0 -= _nonedge_term(q[k, 0], q[k, 1], pm, 0)
                t1 -= _nonedge_term(q[k, 0], q[k, 1], pm, 1)
        for p in range(lo, hi):
            r = reverse[p]
            e0 = msg[r, 0]
            e1 = msg[r, 1]
            a0 = e0 * pm[0, 0] + e1 * pm[0, 1]
            a1 = e0 * pm[1, 0] + e1 * pm[1, 1]
            l0 = np.log(max(a0, 1e-300))
            l1 = np.log(max(a1, 1e-300))
            terms[p - lo, 0] = l0
            terms[p - lo, 1] = l1
            t0 += l0
            t1 += l1
        for p in range(lo, hi):
            x0 = t0 - terms[p - lo, 0]
            x1 = t1 - terms[p - lo, 1]
            mx = max(x0, x1)
            y0 = np.exp(x0 - mx)
            y1 = np.exp(x1 - mx)
            s = y0 + y1
            y0 /= s
            y1 /= s
            if damping > 0.0:
                y0 = damping * msg[p, 0] + (1.0 - damping) * y0
                y1 = damping * msg[p, 1] + (1.0 - damping) * y1
            d = abs(y0 - msg[p, 0])
            if d > resid:
                resid = d
            msg[p, 0] = y0
            msg[p, 1] = y1
        mx = max(t0, t1)
        z0 = np.exp(t0 - mx)
        z1 = np.exp(t1 - mx)
        s = z0 + z1
        z0 /= s
        z1 /= s
        if use_field:
            h[0] += _nonedge_term(z0, z1, pm, 0) - _nonedge_term(q[i, 0], q[i, 1], pm, 0)
            h[1] += _nonedge_term(z0, z1, pm, 1) - _nonedge_term(q[i, 0], q[i, 1], pm, 1)
        q[i, 0] = z0
        q[i, 1] = z1
    return resid


@numba.njit(cache=True)
def _sweep_dense(adj, msg, q, pmat, prior, damping):
    n = adj.shape[0]
    resid = 0.0
    terms = np.empty((n, 2))
    for i in range(n):
        t0 = prior[0]
        t1 = prior[1]
        for k in range(n):
            if k == i:
                continue
            e0 = msg[k, i, 0]
            e1 = msg[k, i, 1]
            if adj[k, i]:
                a0 = e0 * pmat[0, 0] + e1 * pmat[0, 1]
                a1 = e0 * pmat[1, 0] + e1 * pmat[1, 1]
            else:
                a0 = e0 * (1.0 - pmat[0, 0]) + e1 * (1.0 - pmat[0, 1])
                a1 = e0 * (1.0 - pmat[1, 0]) + e1 * (1.0 - pmat[1, 1])
            l0 = np.log(max(a0, 1e-300))
            l1 = np.log(max(a1, 1e-300))
            terms[k, 0] = l0
            terms[k, 1] = l1
            t0 += l0
            t1 += l1
        for j in range(n):
            if j == i:
                continue
            x0 = t0 - terms[j, 0]
            x1 = t1 - terms[j, 1]
            mx = max(x0, x1)
            y0 = np.exp(x0 - mx)
            y1 = np.exp(x1 - mx)
            s = y0 + y1
            y0 /= s
            y1 /= s
            if damping > 0.0:
                y0 = damping * msg[i, j, 0] + (1.0 - damping) * y0
                y1 = damping * msg[i, j, 1] + (1.0 - damping) * y1
            d = abs(y0 - msg[i, j, 0])
            if d > resid:
                resid = d
            msg[i, j, 0] = y0
            msg[i, j, 1] = y1
        mx = max(t0, t1)
        z0 = np.exp(t0 - mx)
        z1 = np.exp(t1 - mx)
        s = z0 + z1
        q[i, 0] = z0 / s
        q[i, 1] = z1 / s
    return resid


def bp_sweep(state: BpState, g: Graph) -> float:
    """One asynchronous pass over every message; returns the max change."""
    p, prior = _log_tables(state.params, g.n)
    if state.mode == "dense":
        resid = _sweep_dense(_dense_adjacency(g), state.messages, state.q, p, prior, state.damping)
    else:
        use_field = state.mode == "field"
        if use_field:
            # full recompute once per sweep keeps incremental drift bounded
            _refresh_field(state)
        resid = _sweep_sparse(g.indptr, g.indices, g.reverse, state.messages, state.q,
                              state.field, p, prior, use_field, state.damping)
    state.residual = float(resid)
    state.sweeps += 1
    return state.residual


def _node_log_terms(g: Graph, state: BpState):
    """Unnormalized log node beliefs ``log gamma_a + field + sum_k log(...)``."""
    p, prior = _log_tables(state.params, g.n)
    if state.mode == "dense":
        adj = _dense_adjacency(g)
        inc = state.messages.transpose(1, 0, 2)  # inc[i, k] = eta^{k->i}
        fac = np.where(adj[:, :, None, None], p[None, None], 1.0 - p[None, None])
        vals = np.einsum("ikb,ikab->ika", inc, fac)
        logs = np.log(np.maximum(vals, _TINY))
        idx = np.arange(g.n)
        logs[idx, idx] = 0.0
        return prior + logs.sum(axis=1)
    inc = state.messages[g.reverse]
    logs = np.log(np.maximum(inc @ p.T, _TINY))
    tot = np.zeros((g.n, 2))
    np.add.at(tot, g.sources, logs)
    tot += prior
    if state.mode == "field":
        tot += _field_terms(g, state.q, p)
    return tot


def _field_terms(g: Graph, q, p):
    """Per-node non-edge log factor in field mode (global field minus self and neighbors)."""
    f = _nonedge_logs(q, p)
    nb = np.zeros((g.n, 2))
    np.add.at(nb, g.sources, f[g.indices])
    return f.sum(axis=0) - f - nb


def _logsumexp2(x):
    mx = x.max(axis=-1, keepdims=True)
    return (mx + np.log(np.exp(x - mx).sum(axis=-1, keepdims=True)))[..., 0]


def _edge_positions(g: Graph) -> np.ndarray:
    """CSR position of ``i -> j`` for each undirected edge ``(i, j)``, i < j."""
    return g.indptr[g.edges[:, 0]] + np.array(
        [np.searchsorted(g.neighbors(i), j) for i, j in g.edges], dtype=np.int64
    ) if g.m else np.empty(0, dtype=np.int64)


def marginals_from_state(g: Graph, state: BpState, converged: bool) -> Marginals:
    p = np.clip(state.params.c / g.n, 0.0, 1.0)
    tot = _node_log_terms(g, state)
    log_zi = _logsumexp2(tot)
    q = np.exp(tot - log_zi[:, None])

    if state.mode == "dense":
        ij = state.messages[g.edges[:, 0], g.edges[:, 1]]
        ji = state.messages[g.edges[:, 1], g.edges[:, 0]]
    else:
        pos = _edge_positions(g)
        ij = state.messages[pos]
        ji = state.messages[g.reverse[pos]]
    pair = ij[:, :, None] * ji[:, None, :] * p[None]
    zij = pair.sum(axis=(1, 2))
    pair = pair / np.maximum(zij, _TINY)[:, None, None]

    proxy = float(log_zi.sum() - np.log(np.maximum(zij, _TINY)).sum())
    if state.mode == "field":
        proxy -= 0.5 * float(np.sum(q * _field_terms(g, q, p)))
    elif state.mode == "dense":
        iu, ju = np.triu_indices(g.n, 1)
        adj = _dense_adjacency(g)
        nonedge = ~adj[iu, ju]
        a, b = iu[nonedge], ju[nonedge]
        z = np.einsum("pa,pb,ab->p", state.messages[a, b], state.messages[b, a], 1.0 - p)
        proxy -= float(np.log(np.maximum(z, _TINY)).sum())

    return Marginals(q=q, pair_q=pair, converged=converged, log_likelihood_proxy=proxy,
                     params=state.params, messages=state.messages.copy(), sweeps=state.sweeps,
                     residual=state.residual, mode=state.mode)


def _iterate(g: Graph, state: BpState, tol: float, max_sweeps: int) -> bool:
    for _ in range(max_sweeps):
        if bp_sweep(state, g) < tol:
            return True
    return False


def run_bp(g: Graph, params: BlockModelParams, tol: float = 1e-6, max_sweeps: int = 1000,
           seed=None, *, mode: str = "field", damping: float = 0.0,
           state: BpState | None = None) -> Marginals:
    """Iterate BP to convergence and assemble node and edge marginals.

    Non-convergence is reported through ``Marginals.converged``, never raised.
    Pass ``state`` to warm-start; its parameters are replaced by ``params``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if state is None:
        state = init_bp(g, params, seed, mode=mode, damping=damping)
    else:
        state.params = params
        state.sweeps = 0
        _refresh_field(state)
    converged = _iterate(g, state, tol, max_sweeps) if g.m or state.mode == "dense" else True
    if not converged:
        log.debug("BP did not converge in %d sweeps (residual %.3g)", max_sweeps, state.residual)
    return marginals_from_state(g, state, converged)


def em_update(g: Graph, marg: Marginals) -> BlockModelParams:
    """Closed-form M-step: block densities from pair marginals, fractions from node marginals."""
    q = marg.q
    n = g.n
    mass = q.sum(axis=0)
    if (mass < 1e-8).any():
        raise DegenerateGroup(f"group masses {mass.tolist()}")
    # ordered edges: (i, j) contributes q_ab^{ij}, (j, i) contributes its transpose
    num = marg.pair_q.sum(axis=0)
    num = num + num.T
    den = np.outer(mass, mass) - q.T @ q
    p = np.divide(num, den, out=np.zeros((2, 2)), where=den > 0)
    c = n * p
    return BlockModelParams(float(mass[0] / n), 0.5 * (c + c.T))


def default_init(g: Graph) -> BlockModelParams:
    d = 2.0 * g.m / g.n if g.n else 0.0
    return BlockModelParams(0.5, [[2 * d, d], [d, d / 2]])


def fit_sbm(g: Graph, init: BlockModelParams | None = None, tol: float = 1e-4,
            max_rounds: int = 50, seed=None, *, bp_tol: float = 1e-6, max_sweeps: int = 1000,
            mode: str = "field", damping: float = 0.0, restarts: int = 3
            ) -> tuple[BlockModelParams, Marginals]:
    """Alternate BP and the M-step until ``max |delta c| < tol``.

    The returned labels are aligned so that block 1 (core) has the larger
    within-block affinity.  A degenerate group triggers a restart from a
    fresh seed; after ``restarts`` retries the error propagates.
    """
    if init is None:
        init = default_init(g)
    ss = np.random.SeedSequence(seed)
    last_err = None
    for attempt in range(restarts + 1):
        sub_seed = ss.spawn(1)[0] if attempt else ss
        try:
            params, marg = _fit_once(g, init, tol, max_rounds, sub_seed, bp_tol, max_sweeps,
                                     mode, damping)
        except DegenerateGroup as err:
            last_err = err
            log.info("EM restart %d after degenerate group: %s", attempt + 1, err)
            continue
        if params.c[1, 1] > params.c[0, 0]:
            params, marg = params.swapped(), marg.swapped()
        return params, marg
    raise last_err


def _fit_once(g, init, tol, max_rounds, seed, bp_tol, max_sweeps, mode, damping):
    params = init
    state = init_bp(g, params, seed, mode=mode, damping=damping)
    marg = None
    for rnd in range(max_rounds):
        marg = run_bp(g, params, bp_tol, max_sweeps, state=state)
        new = em_update(g, marg)
        delta = float(np.abs(new.c - params.c).max())
        log.debug("EM round %d: %r (delta %.3g, converged=%s)", rnd, new, delta, marg.converged)
        params = new
        if delta < tol:
            break
    marg = run_bp(g, params, bp_tol, max_sweeps, state=state)
    return params, marg


def degree_odds_ratio(g: Graph, params: BlockModelParams, marg: Marginals, node: int) -> float:
    """Core/periphery posterior odds of ``node`` from the first-order expansion.

    ``(gamma_1/gamma_2) * exp(k_2 - k_1) * prod_k (eta_1 c11 + eta_2 c12) /
    (eta_1 c21 + eta_2 c22)`` over neighbors ``k``, using the messages
    ``eta^{k -> node}`` and ``k_a = sum_b c_ab gamma_b``.
    """
    c = params.c
    f = params.fractions
    k = c @ f
    if marg.mode == "dense":
        inc = marg.messages[g.neighbors(node), node]
    else:
        lo, hi = g.indptr[node], g.indptr[node + 1]
        inc = marg.messages[g.reverse[lo:hi]]
    num = inc @ c[0]
    den = inc @ c[1]
    log_odds = np.log(f[0]) - np.log(f[1]) - k[0] + k[1] + np.sum(np.log(num) - np.log(den))
    return float(np.exp(log_odds))


def hard_labels(marg: Marginals, threshold: float = 0.5) -> np.ndarray:
    """Core mask from thresholding the core marginal."""
    return marg.core > threshold


def core_size_estimate(marg: Marginals) -> int:
    return int(hard_labels(marg).sum())


__all__ = [
    "BpState", "Marginals", "init_bp", "bp_sweep", "run_bp", "em_update", "fit_sbm",
    "default_init", "degree_odds_ratio", "marginals_from_state", "core_size_estimate",
    "hard_labels",
]
