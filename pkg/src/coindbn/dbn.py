"""Temporal layer: two-slice networks, unrolling and exact inference.

A model is the pair (prior, transition). The prior covers one slice; the
transition covers two consecutive slices, where a current-slice node may
depend on other current-slice nodes and on its own previous-slice copy
only. Unrolling stamps the transition's current-slice families onto
slices 1..T-1 unchanged, so the process is time-homogeneous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bn import (
    Cpt,
    DagStructure,
    EdgeConstraints,
    ScoredNetwork,
    bic_score,
    fit_cpts,
    hill_climb,
    network_from_document,
    network_to_document,
    DEFAULT_ALPHA,
    DEFAULT_MAX_PARENTS,
    DEFAULT_RESTARTS,
)
from .errors import (
    EvidenceOnQuery,
    TooFewRows,
    UnknownVariable,
    WindowLengthMismatch,
    ZeroProbabilityEvidence,
)
from .ingest import DOWN, UP, STATE_NAMES, DirectionMatrix

DEFAULT_T = 5
PREV_PREFIX = "prev."
MIN_ROWS_FLOOR = 50
MIN_ROWS_PER_VARIABLE = 10


@dataclass(frozen=True)
class TwoSliceBn:
    """(B0, B->): prior over one slice, transition over two."""

    prior: ScoredNetwork
    transition: ScoredNetwork
    variable_names: tuple[str, ...]
    feature_group: int
    t_slices: int = DEFAULT_T
    target: str = ""  # query variable; defaults to the first

    def __post_init__(self):
        n = len(self.variable_names)
        if not self.target:
            object.__setattr__(self, "target", self.variable_names[0])
        if self.target not in self.variable_names:
            raise ValueError(f"target {self.target!r} not a variable")
        expected = tuple(PREV_PREFIX + v for v in self.variable_names) + self.variable_names
        if self.prior.dag.nodes != self.variable_names:
            raise ValueError("prior nodes must equal variable_names")
        if self.transition.dag.nodes != expected:
            raise ValueError("transition nodes must be prev copies then current")
        for parent, child in self.transition.dag.edges():
            if child < n:
                raise ValueError("no arcs may enter the previous slice")
            if parent < n and parent != child - n:
                raise ValueError("inter-slice arcs must connect corresponding nodes")

    @property
    def target_name(self) -> str:
        return self.target

    @property
    def target_index(self) -> int:
        return self.variable_names.index(self.target)


@dataclass(frozen=True)
class UnrolledNetwork:
    """Prior + stamped transition slices flattened into one DAG."""

    t_slices: int
    variable_names: tuple[str, ...]
    dag: DagStructure
    cpts: tuple[Cpt, ...]

    def node_id(self, slice_index: int, variable: str) -> int:
        if not 0 <= slice_index < self.t_slices:
            raise UnknownVariable(
                f"slice {slice_index} outside 0..{self.t_slices - 1}")
        if variable not in self.variable_names:
            raise UnknownVariable(f"unknown variable {variable!r}")
        return slice_index * len(self.variable_names) + self.variable_names.index(variable)


@dataclass(frozen=True)
class Evidence:
    """Observed states per (slice, variable), plus the query node."""

    states: tuple[tuple[tuple[int, str], int], ...]
    query: tuple[int, str]

    @classmethod
    def build(cls, states: dict, query: tuple[int, str]) -> "Evidence":
        items = tuple(sorted(states.items()))
        for key, value in items:
            if value not in (DOWN, UP):
                raise ValueError(f"state for {key} must be 0 (Down) or 1 (Up)")
        if query in states:
            raise EvidenceOnQuery(f"evidence set on query node {query}")
        return cls(items, query)


@dataclass(frozen=True)
class Posterior:
    """Distribution over {Down, Up} for one query node."""

    probabilities: tuple[float, float]  # indexed by state: 0 Down, 1 Up

    def __post_init__(self):
        p = self.probabilities
        if abs(p[0] + p[1] - 1.0) > 1e-9 or min(p) < -1e-12:
            raise ValueError(f"not a distribution: {p}")

    @property
    def down(self) -> float:
        return self.probabilities[DOWN]

    @property
    def up(self) -> float:
        return self.probabilities[UP]

    @property
    def argmax(self) -> int:
        return UP if self.up >= self.down else DOWN


@dataclass(frozen=True)
class Prediction:
    direction: int  # DOWN or UP
    probability: float
    tie: bool

    @property
    def label(self) -> str:
        return STATE_NAMES[self.direction]


def lagged_matrix(train: DirectionMatrix) -> DirectionMatrix:
    """Pair each row with its predecessor: prev.* columns then current."""
    names = list(train.variables)
    return DirectionMatrix(
        train.dates[1:],
        [PREV_PREFIX + n for n in names] + names,
        np.hstack([train.states[:-1], train.states[1:]]),
        train.target_name,
    )


def transition_constraints(names) -> EdgeConstraints:
    """Current-slice nodes may draw on each other and on their own prev copy."""
    allowed = {(PREV_PREFIX + n, n) for n in names}
    allowed.update((a, b) for a in names for b in names if a != b)
    return EdgeConstraints(allowed=frozenset(allowed))


def _trivial_network(train: DirectionMatrix, nodes, alpha: float, seed: int) -> ScoredNetwork:
    dag = DagStructure.empty(nodes)
    return ScoredNetwork(dag, fit_cpts(dag, train, alpha),
                         bic_score(dag, train), train.states.shape[0], seed)


def learn_2tbn(train: DirectionMatrix, *, feature_group: int = 1,
               t_slices: int = DEFAULT_T,
               max_parents: int = DEFAULT_MAX_PARENTS,
               restarts: int = DEFAULT_RESTARTS,
               seed: int = 0,
               alpha: float = DEFAULT_ALPHA) -> TwoSliceBn:
    """Learn prior and transition structures from one training segment."""
    n_vars = len(train.variables)
    floor = max(MIN_ROWS_FLOOR, MIN_ROWS_PER_VARIABLE * n_vars)
    if train.states.shape[0] < floor:
        raise TooFewRows(
            f"{train.states.shape[0]} rows < required {floor} for {n_vars} variables")

    kwargs = dict(max_parents=max_parents, restarts=restarts, seed=seed, alpha=alpha)
    if n_vars == 1:
        prior = _trivial_network(train, tuple(train.variables), alpha, seed)
    else:
        prior = hill_climb(train, **kwargs)

    lagged = lagged_matrix(train)
    transition = hill_climb(lagged, constraints=transition_constraints(train.variables),
                            **kwargs)
    return TwoSliceBn(prior, transition, tuple(train.variables),
                      feature_group, t_slices, train.target_name)


def unroll(model: TwoSliceBn, t_slices: int | None = None) -> UnrolledNetwork:
    """Flatten to T slices: slice 0 from the prior, the rest stamped."""
    t = model.t_slices if t_slices is None else t_slices
    if t < 1:
        raise ValueError("need at least one slice")
    names = model.variable_names
    n = len(names)
    node_names = tuple(f"t{s}.{v}" for s in range(t) for v in names)

    parent_sets: list[tuple[int, ...]] = []
    tables: list[np.ndarray] = []
    for cpt in model.prior.cpts:
        parent_sets.append(cpt.parents)
        tables.append(cpt.table)
    for s in range(1, t):
        offset = s * n
        for cpt in model.transition.cpts[n:]:  # current-slice families only
            mapped = tuple(offset - n + p if p < n else offset + p - n
                           for p in cpt.parents)
            parent_sets.append(mapped)
            tables.append(cpt.table)

    dag = DagStructure(node_names, tuple(parent_sets))
    cpts = tuple(Cpt(i, parent_sets[i], tables[i]) for i in range(len(node_names)))
    return UnrolledNetwork(t, names, dag, cpts)


def _cpt_factor(cpt: Cpt) -> tuple[tuple[int, ...], np.ndarray]:
    """Factor with sorted variable axes from one CPT.

    Row index is little-endian in the parents, so the first parent is the
    fastest-varying (last) axis after a plain reshape; transpose restores
    parent order, then a final permutation sorts all axes by node id.
    """
    p = len(cpt.parents)
    full = cpt.table.reshape((2,) * p + (2,))
    full = np.transpose(full, tuple(range(p - 1, -1, -1)) + (p,))
    variables = cpt.parents + (cpt.node,)
    order = sorted(range(p + 1), key=lambda i: variables[i])
    return tuple(variables[i] for i in order), np.transpose(full, order)


def _expand(vars_, values, union):
    shape = []
    src = 0
    for v in union:
        if src < len(vars_) and vars_[src] == v:
            shape.append(2)
            src += 1
        else:
            shape.append(1)
    return values.reshape(shape)


def _multiply(a, b):
    a_vars, a_vals = a
    b_vars, b_vals = b
    union = tuple(sorted(set(a_vars) | set(b_vars)))
    return union, _expand(a_vars, a_vals, union) * _expand(b_vars, b_vals, union)


def _sum_out(factor, variable):
    vars_, values = factor
    axis = vars_.index(variable)
    return tuple(v for v in vars_ if v != variable), values.sum(axis=axis)


def _min_fill_variable(factors, remaining, node_names):
    adjacency: dict[int, set[int]] = {}
    for vars_, _ in factors:
        for v in vars_:
            adjacency.setdefault(v, set()).update(u for u in vars_ if u != v)
    best = None
    for v in sorted(remaining, key=lambda i: node_names[i]):
        neighbors = sorted(adjacency.get(v, ()))
        fill = sum(1 for i, a in enumerate(neighbors) for b in neighbors[i + 1:]
                   if b not in adjacency[a])
        if best is None or fill < best[0]:
            best = (fill, v)
    return best[1]


def _variable_elimination(cpts, evidence: dict[int, int], query: int,
                          node_names) -> np.ndarray:
    factors = []
    scalar = 1.0
    for cpt in cpts:
        vars_, values = _cpt_factor(cpt)
        for v in vars_:
            if v in evidence:
                axis = vars_.index(v)
                values = np.take(values, evidence[v], axis=axis)
                vars_ = tuple(u for u in vars_ if u != v)
        if vars_:
            factors.append((vars_, values))
        else:
            scalar *= float(values)

    remaining = {v for vars_, _ in factors for v in vars_} - {query}
    while remaining:
        v = _min_fill_variable(factors, remaining, node_names)
        bucket = [f for f in factors if v in f[0]]
        factors = [f for f in factors if v not in f[0]]
        product = bucket[0]
        for f in bucket[1:]:
            product = _multiply(product, f)
        vars_, values = _sum_out(product, v)
        if vars_:
            factors.append((vars_, values))
        else:
            scalar *= float(values)
        remaining.discard(v)

    result = np.full(2, scalar)
    for vars_, values in factors:  # every scope is now exactly (query,)
        result = result * values
    total = result.sum()
    if not total > 0:
        raise ZeroProbabilityEvidence("evidence has zero probability")
    return result / total


def posterior(network: UnrolledNetwork, evidence: Evidence) -> Posterior:
    """Exact P(query | evidence) by variable elimination, min-fill order."""
    query_id = network.node_id(*evidence.query)
    observed: dict[int, int] = {}
    for (slice_index, variable), state in evidence.states:
        node = network.node_id(slice_index, variable)
        if node == query_id:
            raise EvidenceOnQuery(f"evidence set on query node {evidence.query}")
        observed[node] = state
    dist = _variable_elimination(network.cpts, observed, query_id,
                                 network.dag.nodes)
    return Posterior((float(dist[DOWN]), float(dist[UP])))


def window_evidence(model: TwoSliceBn, window: DirectionMatrix) -> Evidence:
    """All variables on slices 0..T-2, non-target variables on the last slice."""
    t = model.t_slices
    if len(window) != t:
        raise WindowLengthMismatch(f"window has {len(window)} rows, need {t}")
    target = model.target_name
    states: dict[tuple[int, str], int] = {}
    for s in range(t):
        for j, name in enumerate(model.variable_names):
            if s == t - 1 and name == target:
                continue
            states[(s, name)] = int(window.states[s, window.variables.index(name)])
    return Evidence.build(states, (t - 1, target))


def predict_direction(model: TwoSliceBn, window: DirectionMatrix,
                      unrolled: UnrolledNetwork | None = None) -> Prediction:
    """Posterior of the final-slice target; exact ties go Up and are flagged."""
    evidence = window_evidence(model, window)
    network = unrolled if unrolled is not None else unroll(model)
    dist = posterior(network, evidence)
    if dist.up == dist.down:
        return Prediction(UP, dist.up, True)
    direction = UP if dist.up > dist.down else DOWN
    return Prediction(direction, dist.probabilities[direction], False)


def model_to_document(model: TwoSliceBn) -> dict:
    return {
        "prior": network_to_document(model.prior),
        "transition": network_to_document(model.transition),
        "variable_names": list(model.variable_names),
        "feature_group": model.feature_group,
        "T": model.t_slices,
        "target": model.target_name,
    }


def model_from_document(doc: dict) -> TwoSliceBn:
    return TwoSliceBn(
        network_from_document(doc["prior"]),
        network_from_document(doc["transition"]),
        tuple(doc["variable_names"]),
        int(doc["feature_group"]),
        int(doc["T"]),
        doc["target"],
    )


def model_dumps(model: TwoSliceBn) -> str:
    return json.dumps(model_to_document(model), indent=2)


def model_loads(text: str) -> TwoSliceBn:
    return model_from_document(json.loads(text))
