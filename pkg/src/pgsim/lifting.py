"""Lifting relations on states to relations on distributions.

Two liftings are decided exactly:

* the weight-function lifting of ``R ⊆ S × T`` (a coupling of the two
  distributions supported on ``R``), decided by an exact max-flow;
* the forward lifting of ``R ⊆ S × D(T)`` (a common convex decomposition
  into point distributions on the left and table distributions on the
  right), decided by an exact simplex phase one.

Every witness is re-checked by a separate checker before it is returned.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core import Distribution, ModelError, convex_combine
from .lp import LinearProgram

ZERO = Fraction(0)


class WitnessError(AssertionError):
    """A solver produced a certificate that fails independent re-checking."""


class RelationTable(frozenset):
    """A finite set of pairs ``(s, t)``."""

    def __new__(cls, pairs: Iterable = ()):
        return super().__new__(cls, (tuple(p) for p in pairs))

    @classmethod
    def identity(cls, states: Iterable) -> "RelationTable":
        return cls((s, s) for s in states)

    def inverse(self) -> "RelationTable":
        return RelationTable((t, s) for s, t in self)

    def image(self, s) -> list:
        return sorted(t for (x, t) in self if x == s)

    def sorted(self) -> list:
        return sorted(self)

    def restrict(self, left: Iterable, right: Iterable) -> "RelationTable":
        left, right = set(left), set(right)
        return RelationTable(p for p in self if p[0] in left and p[1] in right)

    def to_json(self) -> dict:
        return {"kind": "relation", "pairs": [list(p) for p in self.sorted()]}

    def __repr__(self):
        return f"RelationTable({self.sorted()!r})"


class ForwardRelationTable(tuple):
    """A finite list of pairs ``(s, Θ)`` with ``Θ`` a distribution (order kept, no duplicates)."""

    def __new__(cls, pairs: Iterable = ()):
        seen = {}
        for s, theta in pairs:
            theta = theta if isinstance(theta, Distribution) else Distribution(theta)
            seen.setdefault((s, theta), None)
        return super().__new__(cls, seen)

    def partners(self, s) -> list:
        return [theta for (x, theta) in self if x == s]

    def lefts(self) -> list:
        return list(dict.fromkeys(s for s, _ in self))

    def to_json(self) -> dict:
        return {"kind": "forward",
                "pairs": [[s, theta.to_json()] for s, theta in self]}

    def __repr__(self):
        return f"ForwardRelationTable({list(self)!r})"


def relation_from_json(data: Mapping | str):
    """Parse either kind of relation document."""
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("kind", "relation")
    pairs = data["pairs"]
    if kind == "relation":
        return RelationTable(tuple(p) for p in pairs)
    if kind == "forward":
        return ForwardRelationTable((s, Distribution.from_json(theta)) for s, theta in pairs)
    raise ModelError(f"unknown relation kind {kind!r}")


# ---------------------------------------------------------------------------
# weight-function lifting


@dataclass(frozen=True)
class WeightFunction:
    weights: Mapping  # (s, t) -> Fraction, positive entries only

    def __getitem__(self, st) -> Fraction:
        return self.weights.get(st, ZERO)

    def transpose(self) -> "WeightFunction":
        return WeightFunction({(t, s): w for (s, t), w in self.weights.items()})

    def to_json(self) -> list:
        return [[s, t, str(w)] for (s, t), w in self.weights.items()]


def check_weight_function(R: Iterable, delta: Mapping, theta: Mapping, w: WeightFunction) -> None:
    """Raise :class:`WitnessError` unless ``w`` couples ``delta`` and ``theta`` inside ``R``."""
    R = R if isinstance(R, (set, frozenset)) else set(R)
    rows: dict = {}
    cols: dict = {}
    for (s, t), x in w.weights.items():
        if x < 0:
            raise WitnessError(f"negative weight at {(s, t)}")
        if x and (s, t) not in R:
            raise WitnessError(f"positive weight on unrelated pair {(s, t)}")
        rows[s] = rows.get(s, ZERO) + x
        cols[t] = cols.get(t, ZERO) + x
    for s in set(rows) | set(delta):
        if rows.get(s, ZERO) != delta.get(s, ZERO):
            raise WitnessError(f"row {s!r} sums to {rows.get(s, ZERO)}, expected {delta.get(s, ZERO)}")
    for t in set(cols) | set(theta):
        if cols.get(t, ZERO) != theta.get(t, ZERO):
            raise WitnessError(f"column {t!r} sums to {cols.get(t, ZERO)}, expected {theta.get(t, ZERO)}")


def _max_flow(cap: dict, source, sink) -> tuple:
    """Edmonds-Karp on exact capacities; ``cap[u][v]`` is residual capacity."""
    flow = ZERO
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for v, c in cap[u].items():
                if c > 0 and v not in parent:
                    parent[v] = u
                    queue.append(v)
        if sink not in parent:
            return flow, cap
        path = []
        v = sink
        while parent[v] is not None:
            path.append((parent[v], v))
            v = parent[v]
        bottleneck = min(cap[u][v] for u, v in path)
        for u, v in path:
            cap[u][v] -= bottleneck
            cap[v][u] = cap[v].get(u, ZERO) + bottleneck
        flow += bottleneck


def lift_check(R: Iterable, delta: Mapping, theta: Mapping) -> WeightFunction | None:
    """Weight function witnessing ``delta R̄ theta``, or ``None`` if none exists."""
    R = R if isinstance(R, (set, frozenset)) else set(R)
    left = [s for s in delta if delta[s]]
    right = [t for t in theta if theta[t]]
    if sum(delta[s] for s in left) != sum(theta[t] for t in right):
        return None
    src, snk = ("src",), ("snk",)
    L = {s: ("L", s) for s in left}
    Rn = {t: ("R", t) for t in right}
    cap: dict = {src: {}, snk: {}}
    for s in left:
        cap[src][L[s]] = Fraction(delta[s])
        cap[L[s]] = {src: ZERO}
    for t in right:
        cap[Rn[t]] = {snk: Fraction(theta[t])}
        cap[snk][Rn[t]] = ZERO
    total = sum(cap[src].values(), ZERO)
    inf = total + 1
    for s in left:
        for t in right:
            if (s, t) in R:
                cap[L[s]][Rn[t]] = inf
                cap[Rn[t]].setdefault(L[s], ZERO)
    flow, cap = _max_flow(cap, src, snk)
    if flow != total:
        return None
    w = {}
    for s in left:
        for t in right:
            if (s, t) in R:
                f = inf - cap[L[s]][Rn[t]]
                if f:
                    w[(s, t)] = f
    wf = WeightFunction(w)
    check_weight_function(R, delta, theta, wf)
    return wf


def compose_relations(R1: Iterable, R2: Iterable) -> RelationTable:
    """Relational composition ``{(s, u) : s R1 t and t R2 u for some t}``."""
    by_mid: dict = {}
    for t, u in R2:
        by_mid.setdefault(t, []).append(u)
    return RelationTable((s, u) for s, t in R1 for u in by_mid.get(t, ()))


def mix_weight_functions(ws: Sequence[WeightFunction], weights: Sequence) -> WeightFunction:
    """``sum p_i w_i``: couples the mixtures of the coupled marginals."""
    out: dict = {}
    for w, p in zip(ws, weights):
        for k, x in w.weights.items():
            out[k] = out.get(k, ZERO) + Fraction(p) * x
    return WeightFunction({k: x for k, x in out.items() if x})


def split_lift(w: WeightFunction, theta: Mapping, parts: Sequence[Mapping]) -> list:
    """Split a coupling along a decomposition of its right marginal.

    Given ``w`` coupling ``delta`` with ``theta = sum p_i parts[i]``, returns
    ``(delta_i, w_i)`` with ``w_i(s,t) = w(s,t) * parts[i](t) / theta(t)``, so
    that ``w_i`` couples ``delta_i`` with ``parts[i]``.
    """
    out = []
    for part in parts:
        wi = {}
        di: dict = {}
        for (s, t), x in w.weights.items():
            y = x * part.get(t, ZERO) / theta[t]
            if y:
                wi[(s, t)] = y
                di[s] = di.get(s, ZERO) + y
        out.append((Distribution(di), WeightFunction(wi)))
    return out


def compose_weight_functions(w1: WeightFunction, w2: WeightFunction, middle: Mapping) -> WeightFunction:
    """``w(s,u) = sum_t w1(s,t) w2(t,u) / middle(t)``: couples through the middle marginal."""
    by_mid: dict = {}
    for (t, u), y in w2.weights.items():
        by_mid.setdefault(t, []).append((u, y))
    out: dict = {}
    for (s, t), x in w1.weights.items():
        for u, y in by_mid.get(t, ()):
            out[(s, u)] = out.get((s, u), ZERO) + x * y / middle[t]
    return WeightFunction({k: v for k, v in out.items() if v})


# ---------------------------------------------------------------------------
# forward lifting


@dataclass(frozen=True)
class ForwardLiftWitness:
    """Triples ``(p_i, s_i, Θ_i)``: ``Δ = Σ p_i s̄_i`` and ``Θ = Σ p_i Θ_i``."""

    triples: tuple

    def weights(self) -> list:
        return [p for p, _, _ in self.triples]

    def left(self) -> Distribution:
        return convex_combine([Distribution.point(s) for _, s, _ in self.triples], self.weights())

    def right(self) -> Distribution:
        return convex_combine([th for _, _, th in self.triples], self.weights())

    def to_json(self) -> list:
        return [[str(p), s, th.to_json()] for p, s, th in self.triples]


def check_forward_witness(table: Iterable, delta: Mapping, theta: Mapping,
                          witness: ForwardLiftWitness) -> None:
    pairs = set(table)
    ps = witness.weights()
    if any(p <= 0 for p in ps):
        raise WitnessError("nonpositive weight in forward witness")
    if sum(ps) != 1:
        raise WitnessError(f"forward witness weights sum to {sum(ps)}")
    for _, s, th in witness.triples:
        if (s, th) not in pairs:
            raise WitnessError(f"pair ({s!r}, {th!r}) not in the table")
    if witness.left() != Distribution(delta):
        raise WitnessError("forward witness does not decompose the left distribution")
    if witness.right() != Distribution(theta):
        raise WitnessError("forward witness does not decompose the right distribution")


def forward_lift_check(table: Iterable, delta: Mapping, theta: Mapping) -> ForwardLiftWitness | None:
    """Forward-lift witness for ``delta`` against ``theta``, or ``None``."""
    table = list(table)
    left = [s for s in delta if delta[s]]
    right = set(t for t in theta if theta[t])
    lp = LinearProgram()
    cands = []
    for s in left:
        for j, (x, th) in enumerate(table):
            if x == s and th.support <= right:
                cands.append((s, j))
                lp.var((s, j))
        lp.add_eq({(s, j): 1 for (x, j) in cands if x == s}, delta[s])
    for t in theta:
        if theta[t]:
            lp.add_eq({(s, j): table[j][1].get(t, ZERO) for (s, j) in cands}, theta[t])
    res = lp.solve()
    if not res.feasible:
        return None
    acc: dict = {}
    for (s, j) in cands:
        q = res[(s, j)]
        if q:
            key = (s, table[j][1])
            acc[key] = acc.get(key, ZERO) + q
    witness = ForwardLiftWitness(tuple((q, s, th) for (s, th), q in acc.items()))
    check_forward_witness(table, delta, theta, witness)
    return witness


def mix_forward_witnesses(witnesses: Sequence[ForwardLiftWitness], weights: Sequence) -> ForwardLiftWitness:
    acc: dict = {}
    for wit, p in zip(witnesses, weights):
        p = Fraction(p)
        for q, s, th in wit.triples:
            if p * q:
                acc[(s, th)] = acc.get((s, th), ZERO) + p * q
    return ForwardLiftWitness(tuple((q, s, th) for (s, th), q in acc.items()))


def split_forward_lift(witness: ForwardLiftWitness, delta: Mapping, parts: Sequence[Mapping]) -> list:
    """Split a forward lift along a decomposition ``delta = Σ r_i parts[i]``.

    Each triple ``(p, s, Θ)`` contributes ``p * parts[i](s) / delta(s)`` to
    part ``i``; returns ``(theta_i, witness_i)`` per part.
    """
    out = []
    for part in parts:
        triples = []
        for p, s, th in witness.triples:
            q = p * part.get(s, ZERO) / delta[s]
            if q:
                triples.append((q, s, th))
        wit = ForwardLiftWitness(tuple(triples))
        out.append((wit.right(), wit))
    return out


def compose_forward_tables(table1: Iterable, table2: Iterable, limit: int = 4096) -> ForwardRelationTable:
    """Pairs ``(s, Σ_t Θ(t) Θ_t)`` for ``(s, Θ)`` in ``table1`` and a choice of
    ``(t, Θ_t)`` in ``table2`` for every ``t`` in the support of ``Θ``."""
    partners: dict = {}
    for t, th in table2:
        partners.setdefault(t, []).append(th)
    out = []
    for s, th in table1:
        supp = list(th)
        if any(t not in partners for t in supp):
            continue
        choices = [partners[t] for t in supp]
        n = 1
        for c in choices:
            n *= len(c)
        if n > limit:
            raise ModelError(f"composition of ({s!r}, {th!r}) has {n} choice functions (limit {limit})")
        for pick in itertools.product(*choices):
            out.append((s, convex_combine(list(pick), [th[t] for t in supp])))
    return ForwardRelationTable(out)


def embed_relation(R: Iterable) -> ForwardRelationTable:
    """``(s, t) ↦ (s, t̄)``: a relation as a forward table of point distributions."""
    return ForwardRelationTable((s, Distribution.point(t)) for s, t in sorted(R))
