"""Static discrete Bayesian networks over binary direction variables.

DAG representation, Laplace-smoothed CPT estimation, BIC scoring and a
restarted greedy hill-climbing structure search. Everything here is
slice-agnostic; the temporal layer composes two of these networks.

Parent configurations index CPT rows little-endian: the first parent in
the (sorted) parent list is the least significant bit.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTable,
    IncompleteAssignment,
    VariableMissing,
)
from .ingest import DirectionMatrix

DEFAULT_MAX_PARENTS = 3
DEFAULT_RESTARTS = 8
DEFAULT_ALPHA = 1.0

# a move is accepted only when it beats the incumbent by more than this
SCORE_EPS = 1e-12


@dataclass(frozen=True)
class DagStructure:
    """Directed acyclic graph over named binary variables.

    parent_sets[i] holds the sorted indices of node i's parents.
    """

    nodes: tuple[str, ...]
    parent_sets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.parent_sets) != len(self.nodes):
            raise ValueError("one parent set required per node")
        for child, parents in enumerate(self.parent_sets):
            if child in parents:
                raise ValueError(f"self-loop on {self.nodes[child]!r}")
            if list(parents) != sorted(set(parents)):
                raise ValueError("parent sets must be sorted and unique")
            if parents and not (0 <= min(parents) and max(parents) < len(self.nodes)):
                raise ValueError("parent index out of range")
        self.topological_order()  # raises on cycles

    @classmethod
    def empty(cls, nodes) -> "DagStructure":
        nodes = tuple(nodes)
        return cls(nodes, tuple(() for _ in nodes))

    def edges(self):
        for child, parents in enumerate(self.parent_sets):
            for parent in parents:
                yield parent, child

    def topological_order(self) -> list[int]:
        n = len(self.nodes)
        remaining_parents = [set(p) for p in self.parent_sets]
        children = [[] for _ in range(n)]
        for parent, child in self.edges():
            children[parent].append(child)
        ready = [i for i in range(n) if not remaining_parents[i]]
        order: list[int] = []
        while ready:
            node = min(ready)  # deterministic Kahn
            ready.remove(node)
            order.append(node)
            for child in children[node]:
                remaining_parents[child].discard(node)
                if not remaining_parents[child]:
                    ready.append(child)
        if len(order) != n:
            raise ValueError("graph contains a cycle")
        return order

    def edge_names(self) -> list[tuple[str, str]]:
        return sorted((self.nodes[u], self.nodes[v]) for u, v in self.edges())


@dataclass(frozen=True)
class Cpt:
    """One node's conditional distribution, one row per parent configuration."""

    node: int
    parents: tuple[int, ...]
    table: np.ndarray  # shape (2**len(parents), 2), rows sum to 1

    def __post_init__(self):
        expected = (2 ** len(self.parents), 2)
        if self.table.shape != expected:
            raise ValueError(f"cpt table shape {self.table.shape} != {expected}")
        if not np.allclose(self.table.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("cpt rows must sum to 1")

    def row_index(self, assignment: np.ndarray) -> int:
        idx = 0
        for k, parent in enumerate(self.parents):
            idx |= int(assignment[parent]) << k
        return idx


@dataclass(frozen=True)
class ScoredNetwork:
    """A fitted network: structure, CPTs, BIC score and provenance."""

    dag: DagStructure
    cpts: tuple[Cpt, ...]
    score: float
    sample_count: int
    seed: int


@dataclass(frozen=True)
class EdgeConstraints:
    """Search-space restriction by directed-edge name pairs.

    An edge may be added only when it appears in `allowed` (None means
    everything) and not in `forbidden`.
    """

    allowed: frozenset[tuple[str, str]] | None = None
    forbidden: frozenset[tuple[str, str]] = frozenset()

    def permits(self, parent: str, child: str) -> bool:
        edge = (parent, child)
        if edge in self.forbidden:
            return False
        return self.allowed is None or edge in self.allowed


def _column_map(nodes, data: DirectionMatrix) -> list[int]:
    columns = []
    for name in nodes:
        if name not in data.variables:
            raise VariableMissing(f"variable {name!r} not in data")
        columns.append(data.variables.index(name))
    return columns


def _family_counts(states: np.ndarray, node_col: int, parent_cols) -> np.ndarray:
    """(parent_config, child_state) tallies; config little-endian in parents."""
    idx = states[:, node_col].astype(np.int64)
    for k, col in enumerate(parent_cols):
        idx = idx + (states[:, col].astype(np.int64) << (k + 1))
    counts = np.bincount(idx, minlength=2 ** (len(parent_cols) + 1))
    return counts.reshape(-1, 2)


def _family_loglik(counts: np.ndarray) -> float:
    """Multinomial log-likelihood at the MLE, with 0*log(0) = 0."""
    totals = counts.sum(axis=1, keepdims=True)
    mask = counts > 0
    c = counts[mask].astype(float)
    t = np.broadcast_to(totals, counts.shape)[mask].astype(float)
    return float((c * np.log(c / t)).sum())


def fit_cpts(dag: DagStructure, data: DirectionMatrix, alpha: float = DEFAULT_ALPHA) -> tuple[Cpt, ...]:
    """Laplace-smoothed CPTs: P(x|pa) = (count + alpha) / (total + 2*alpha).

    Unseen parent configurations fall back to the uniform row.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    columns = _column_map(dag.nodes, data)
    cpts = []
    for node, parents in enumerate(dag.parent_sets):
        counts = _family_counts(data.states, columns[node],
                                [columns[p] for p in parents])
        table = (counts + alpha) / (counts.sum(axis=1, keepdims=True) + 2 * alpha)
        cpts.append(Cpt(node, parents, table))
    return tuple(cpts)


class _FamilyScorer:
    """Cached per-family BIC terms for one data matrix."""

    def __init__(self, data: DirectionMatrix, nodes):
        self.columns = _column_map(nodes, data)
        self.states = data.states
        self.rows = data.states.shape[0]
        if self.rows < 1:
            raise EmptyTable("scoring requires at least one row")
        self.penalty_unit = math.log(self.rows) / 2.0
        self._cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def family(self, node: int, parents: tuple[int, ...]) -> float:
        key = (node, parents)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        counts = _family_counts(self.states, self.columns[node],
                                [self.columns[p] for p in parents])
        score = _family_loglik(counts) - self.penalty_unit * (2 ** len(parents))
        self._cache[key] = score
        return score

    def total(self, parent_sets) -> float:
        return sum(self.family(node, parents)
                   for node, parents in enumerate(parent_sets))


def bic_score(dag: DagStructure, data: DirectionMatrix) -> float:
    """Decomposable BIC: per-family MLE log-likelihood minus (ln N / 2) * 2^|parents|."""
    return _FamilyScorer(data, dag.nodes).total(dag.parent_sets)


def _has_path(children: list[list[int]], src: int, dst: int) -> bool:
    if src == dst:
        return True
    seen = {src}
    stack = [src]
    while stack:
        node = stack.pop()
        for child in children[node]:
            if child == dst:
                return True
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return False


class _SearchState:
    """Mutable parent sets plus child adjacency during hill climbing."""

    def __init__(self, nodes, parent_sets=None):
        self.nodes = tuple(nodes)
        n = len(self.nodes)
        self.parents: list[set[int]] = [set(p) for p in parent_sets] if parent_sets \
            else [set() for _ in range(n)]
        self.children: list[list[int]] = [[] for _ in range(n)]
        for child, parents in enumerate(self.parents):
            for parent in parents:
                self.children[parent].append(child)

    def add(self, u: int, v: int) -> None:
        self.parents[v].add(u)
        self.children[u].append(v)

    def remove(self, u: int, v: int) -> None:
        self.parents[v].discard(u)
        self.children[u].remove(v)

    def creates_cycle_if_added(self, u: int, v: int) -> bool:
        return _has_path(self.children, v, u)

    def creates_cycle_if_reversed(self, u: int, v: int) -> bool:
        self.remove(u, v)
        try:
            return _has_path(self.children, u, v)
        finally:
            self.add(u, v)

    def frozen(self) -> DagStructure:
        return DagStructure(self.nodes,
                            tuple(tuple(sorted(p)) for p in self.parents))


def _sorted_parents(parents: set[int]) -> tuple[int, ...]:
    return tuple(sorted(parents))


def _best_move(state: _SearchState, scorer: _FamilyScorer,
               constraints: EdgeConstraints, max_parents: int):
    """Highest-gain legal move; ties fall to the first in (op, source, target) order."""
    nodes = state.nodes
    order = sorted(range(len(nodes)), key=lambda i: nodes[i])
    best = None  # (delta, op_rank, source_name, target_name, apply_fn)

    def consider(delta, op_rank, u, v, apply_fn):
        nonlocal best
        key = (-delta, op_rank, nodes[u], nodes[v])
        if best is None or key < best[0]:
            best = (key, delta, apply_fn)

    for v in order:
        base_v = scorer.family(v, _sorted_parents(state.parents[v]))
        for u in order:
            if u == v or u in state.parents[v]:
                continue
            if not constraints.permits(nodes[u], nodes[v]):
                continue
            if len(state.parents[v]) >= max_parents:
                continue
            if state.creates_cycle_if_added(u, v):
                continue
            gained = scorer.family(v, _sorted_parents(state.parents[v] | {u}))
            consider(gained - base_v, 0, u, v,
                     lambda u=u, v=v: state.add(u, v))

    for v in order:
        base_v = scorer.family(v, _sorted_parents(state.parents[v]))
        for u in sorted(state.parents[v], key=lambda i: nodes[i]):
            reduced = scorer.family(v, _sorted_parents(state.parents[v] - {u}))
            consider(reduced - base_v, 1, u, v,
                     lambda u=u, v=v: state.remove(u, v))

    for v in order:
        base_v = scorer.family(v, _sorted_parents(state.parents[v]))
        for u in sorted(state.parents[v], key=lambda i: nodes[i]):
            if not constraints.permits(nodes[v], nodes[u]):
                continue
            if len(state.parents[u]) >= max_parents:
                continue
            if state.creates_cycle_if_reversed(u, v):
                continue
            base_u = scorer.family(u, _sorted_parents(state.parents[u]))
            delta = (scorer.family(v, _sorted_parents(state.parents[v] - {u}))
                     - base_v
                     + scorer.family(u, _sorted_parents(state.parents[u] | {v}))
                     - base_u)

            def apply_reverse(u=u, v=v):
                state.remove(u, v)
                state.add(v, u)

            consider(delta, 2, u, v, apply_reverse)

    return best


def _climb(state: _SearchState, scorer: _FamilyScorer,
           constraints: EdgeConstraints, max_parents: int) -> None:
    while True:
        best = _best_move(state, scorer, constraints, max_parents)
        if best is None or best[1] <= SCORE_EPS:
            return
        best[2]()


def _random_start(nodes, rng: random.Random, constraints: EdgeConstraints,
                  max_parents: int) -> _SearchState:
    state = _SearchState(nodes)
    pairs = [(u, v) for u in range(len(nodes)) for v in range(len(nodes))
             if u != v and constraints.permits(nodes[u], nodes[v])]
    rng.shuffle(pairs)
    inserted = 0
    for u, v in pairs:
        if inserted >= len(nodes):
            break
        if rng.random() >= 0.5:
            continue
        if len(state.parents[v]) >= max_parents:
            continue
        if state.creates_cycle_if_added(u, v):
            continue
        state.add(u, v)
        inserted += 1
    return state


def hill_climb(data: DirectionMatrix, *, nodes=None,
               constraints: EdgeConstraints | None = None,
               max_parents: int = DEFAULT_MAX_PARENTS,
               restarts: int = DEFAULT_RESTARTS,
               seed: int = 0,
               alpha: float = DEFAULT_ALPHA) -> ScoredNetwork:
    """Greedy BIC search with restarts.

    Restart 0 climbs from the empty graph; each further restart climbs from
    a random DAG built by inserting edges in a seeded shuffled order. The
    best local optimum wins; exact score ties fall to the lexicographically
    smaller edge list.
    """
    nodes = tuple(nodes) if nodes is not None else tuple(data.variables)
    if len(nodes) < 2:
        raise ValueError("structure search needs at least 2 variables")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    constraints = constraints or EdgeConstraints()
    scorer = _FamilyScorer(data, nodes)

    best_dag = None
    best_score = -math.inf
    for restart in range(restarts):
        if restart == 0:
            state = _SearchState(nodes)
        else:
            rng = random.Random(seed * 1_000_003 + restart)
            state = _random_start(nodes, rng, constraints, max_parents)
        _climb(state, scorer, constraints, max_parents)
        dag = state.frozen()
        score = scorer.total(dag.parent_sets)
        if (score > best_score
                or (score == best_score and dag.edge_names() < best_dag.edge_names())):
            best_dag, best_score = dag, score

    cpts = fit_cpts(best_dag, data, alpha)
    return ScoredNetwork(best_dag, cpts, best_score, data.states.shape[0], seed)


def joint_probability(network: ScoredNetwork, assignment) -> float:
    """Product over nodes of P(x_i | parents_i) read from the CPTs."""
    states = np.asarray(assignment, dtype=np.int64)
    if states.shape != (len(network.dag.nodes),):
        raise IncompleteAssignment(
            f"assignment covers {states.shape[0] if states.ndim == 1 else 'bad'} "
            f"of {len(network.dag.nodes)} nodes")
    if not np.isin(states, (0, 1)).all():
        raise IncompleteAssignment("states must be 0 (Down) or 1 (Up)")
    prob = 1.0
    for cpt in network.cpts:
        prob *= float(cpt.table[cpt.row_index(states), states[cpt.node]])
    return prob


def network_to_document(network: ScoredNetwork) -> dict:
    dag = network.dag
    return {
        "nodes": list(dag.nodes),
        "parents": {dag.nodes[i]: [dag.nodes[p] for p in parents]
                    for i, parents in enumerate(dag.parent_sets)},
        "cpts": {dag.nodes[cpt.node]: [[float(p) for p in row] for row in cpt.table]
                 for cpt in network.cpts},
        "score": network.score,
        "sample_count": network.sample_count,
        "seed": network.seed,
    }


def network_from_document(doc: dict) -> ScoredNetwork:
    nodes = tuple(doc["nodes"])
    index = {name: i for i, name in enumerate(nodes)}
    parent_sets = tuple(tuple(sorted(index[p] for p in doc["parents"][name]))
                        for name in nodes)
    dag = DagStructure(nodes, parent_sets)
    cpts = tuple(Cpt(i, parent_sets[i], np.array(doc["cpts"][name], dtype=float))
                 for i, name in enumerate(nodes))
    return ScoredNetwork(dag, cpts, float(doc["score"]),
                         int(doc["sample_count"]), int(doc["seed"]))


def network_dumps(network: ScoredNetwork) -> str:
    return json.dumps(network_to_document(network), indent=2)


def network_loads(text: str) -> ScoredNetwork:
    return network_from_document(json.loads(text))
