"""Recurrent-class structure of the counterfactual transition chain.

Policies whose admission rates are invariant to path-specific group swaps
must be constant on each recurrent class of the averaged transition matrix,
and on transient states they are absorption-weighted mixtures of the class
values. This module finds that structure and checks a policy against it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonStochasticError

__all__ = ["ChainAnalysis", "analyze", "check_pi_fair_structure"]


@dataclass
class ChainAnalysis:
    P: np.ndarray  # averaged transition matrix
    classes: tuple  # tuple of tuples: recurrent classes (state indices)
    transient: tuple  # transient state indices
    absorption: np.ndarray  # (n_states, n_classes)
    solve_residual: float = 0.0


def _sccs(adj):
    """Strongly connected components, iterative Tarjan.

    ``adj`` is a list of neighbor lists. Returns a list of components, each a
    sorted list of vertex indices, in reverse topological order of the
    condensation.
    """
    n = len(adj)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    comps = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for k in range(pi, len(adj[v])):
                w = adj[v][k]
                if index[w] == -1:
                    work[-1] = (v, k + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def analyze(matrices, tol: float = 1e-9) -> ChainAnalysis:
    """Classify states of the averaged chain and compute absorption odds.

    ``matrices`` is a non-empty collection of row-stochastic matrices of
    equal size. Edges with averaged probability above ``tol`` define the
    reachability graph; recurrent classes are its sink strongly connected
    components, and absorption probabilities for transient states solve
    (I - Q) X = R on the transient block.
    """
    mats = [np.asarray(m, dtype=np.float64) for m in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise NonStochasticError("matrices must be square and same size")
        if m.min() < -tol:
            raise NonStochasticError("negative transition probability")
        if np.max(np.abs(m.sum(axis=1) - 1.0)) > tol:
            raise NonStochasticError("rows must sum to 1")
    P = sum(mats) / len(mats)

    adj = [list(np.flatnonzero(P[i] > tol)) for i in range(n)]
    comps = _sccs(adj)
    comp_of = np.empty(n, dtype=np.int64)
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    sinks = []
    for ci, comp in enumerate(comps):
        if all(comp_of[w] == ci for v in comp for w in adj[v]):
            sinks.append(comp)
    sinks.sort(key=lambda comp: comp[0])
    recurrent_of = {}
    for k, comp in enumerate(sinks):
        for v in comp:
            recurrent_of[v] = k
    transient = tuple(v for v in range(n) if v not in recurrent_of)

    K = len(sinks)
    absorption = np.zeros((n, K))
    for v, k in recurrent_of.items():
        absorption[v, k] = 1.0
    residual = 0.0
    if transient:
        t = np.array(transient)
        Q = P[np.ix_(t, t)]
        R = np.zeros((len(t), K))
        for k, comp in enumerate(sinks):
            R[:, k] = P[np.ix_(t, comp)].sum(axis=1)
        A = np.eye(len(t)) - Q
        X = np.linalg.solve(A, R)
        residual = float(np.max(np.abs(A @ X - R)))
        absorption[t] = X

    return ChainAnalysis(
        P=P,
        classes=tuple(tuple(c) for c in sinks),
        transient=transient,
        absorption=absorption,
        solve_residual=residual,
    )


def check_pi_fair_structure(policy, analysis: ChainAnalysis, tol: float = 1e-9) -> dict:
    """How far a policy is from the class-constant-plus-absorption form.

    Reports the largest within-class spread of d over each recurrent class
    and the largest deviation of d from the reconstruction
    d_i = sum_k absorption(i, k) * p_k with p_k the class mean of d.
    """
    d = np.asarray(policy.d, dtype=np.float64)
    if len(d) != analysis.P.shape[0]:
        raise ValueError("policy dimension does not match chain dimension")
    class_means = np.array([d[list(c)].mean() for c in analysis.classes])
    within = [
        float(np.max(np.abs(d[list(c)] - mu)))
        for c, mu in zip(analysis.classes, class_means)
    ]
    recon = analysis.absorption @ class_means
    recon_dev = float(np.max(np.abs(d - recon))) if len(d) else 0.0
    return {
        "num_classes": len(analysis.classes),
        "class_sizes": [len(c) for c in analysis.classes],
        "transient_count": len(analysis.transient),
        "within_class_deviation": within,
        "max_within_class_deviation": max(within, default=0.0),
        "reconstruction_deviation": recon_dev,
        "max_policy_deviation": max(max(within, default=0.0), recon_dev),
        "structure_holds": max(max(within, default=0.0), recon_dev) <= tol,
    }
