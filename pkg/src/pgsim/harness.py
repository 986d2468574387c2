"""Random models, random formulas and the preservation test runner."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import PGS, PLAYER_I, PLAYER_II, Distribution, validate_model
from .lifting import ForwardRelationTable, forward_lift_check
from .logic import (And, Next, Not, Or, Prop, Strategic, Until, in_a_patl, in_l_plus, subformulas,
                    to_text)
from .modelcheck import patl_sat
from .simcheck import (DEFAULT_SAMPLES, compute_bisimulation, compute_simulation, embed_sim_as_forward,
                       verify_forward_simulation)

MAX_DENOMINATOR = 16


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _random_dist(rng, targets: list, max_support: int = 3) -> Distribution:
    k = int(rng.integers(1, min(max_support, len(targets)) + 1))
    picks = sorted(rng.choice(len(targets), size=k, replace=False).tolist())
    d = int(rng.integers(k, MAX_DENOMINATOR + 1))
    # a random composition of d into k positive parts
    cuts = sorted(rng.choice(np.arange(1, d), size=k - 1, replace=False).tolist()) if k > 1 else []
    parts = [b - a for a, b in zip([0, *cuts], [*cuts, d])]
    return Distribution({targets[i]: Fraction(n, d) for i, n in zip(picks, parts)})


def random_model(states: int = 4, actions: int = 2, props: int = 1, seed: int = 0,
                 name: str | None = None, actions_II: int | None = None) -> PGS:
    """Total random structure with rational probabilities (denominators at most 16)."""
    if states < 1 or actions < 1 or props < 0:
        raise ValueError("need at least one state and one action")
    rng = _rng(seed)
    S = [f"s{i}" for i in range(states)]
    P = [chr(ord("p") + i) if i < 10 else f"p{i}" for i in range(props)]
    A1 = [f"a{i + 1}" for i in range(actions)]
    A2 = [f"b{i + 1}" for i in range(actions if actions_II is None else actions_II)]
    labels = {s: [p for p in P if rng.random() < 0.5] for s in S}
    trans = {(s, a, b): _random_dist(rng, S) for s in S for a in A1 for b in A2}
    return validate_model({"name": name or f"random-{states}-{actions}-{props}-{seed}", "states": S,
                           "initial": S[0], "props": P, "labels": labels,
                           "actions": {PLAYER_I: A1, PLAYER_II: A2}, "transitions": trans})


# ---------------------------------------------------------------------------
# formulas


def _threshold(rng) -> Fraction:
    return Fraction(int(rng.integers(1, 20)), 20)


def random_formula(rng, props: list, depth: int, *, fragment: str = "A-PATL",
                   coalitions=(frozenset(), frozenset({PLAYER_I}))):
    """Random state formula of modal depth at most ``depth``.

    ``fragment`` is ``"A-PATL"`` (negation on propositions, comparisons
    ``>``/``>=``, ``>`` for unbounded until) or ``"L+"`` (negation
    anywhere).
    """
    def atom():
        p = Prop(props[int(rng.integers(len(props)))])
        return Not(p) if rng.random() < 0.3 else p

    def state(d):
        r = rng.random()
        if d == 0 or r < 0.25:
            return atom()
        if r < 0.4:
            op = And if rng.random() < 0.5 else Or
            return op(state(d - 1), state(d - 1))
        if fragment == "L+" and r < 0.5:
            return Not(state(d))
        return modal(d)

    def modal(d):
        A = coalitions[int(rng.integers(len(coalitions)))]
        k = rng.random()
        if k < 0.3:
            path = Next(state(d - 1))
            cmp = _cmp()
        elif k < 0.6:
            path = Until(state(d - 1), state(d - 1), int(rng.integers(1, 5)))
            cmp = _cmp()
        else:
            path = Until(state(d - 1), state(d - 1))
            cmp = ">"
        return Strategic(A, cmp, _threshold(rng), path)

    def _cmp():
        if fragment == "L+":
            return [">", ">=", "<", "<="][int(rng.integers(4))]
        return ">" if rng.random() < 0.5 else ">="

    return state(depth)


# ---------------------------------------------------------------------------
# instances


@dataclass
class Instance:
    """A left and right structure with a relation and related distributions."""

    kind: str
    left: PGS
    right: PGS
    relation: object  # RelationTable or ForwardRelationTable
    pairs: list  # (Δ, Δ') pairs related by the relation
    seed: int = 0
    meta: dict = field(default_factory=dict)


def _rebuild(G: PGS, name: str, *, states=None, labels=None, acts_I=None, acts_II=None, trans=None) -> PGS:
    return validate_model({"name": name, "states": states or list(G.states), "initial": G.initial,
                           "props": list(G.props),
                           "labels": labels or {s: list(G.labels[s]) for s in G.states},
                           "actions": {PLAYER_I: acts_I or list(G.actions_I),
                                       PLAYER_II: acts_II or list(G.actions_II)},
                           "transitions": trans if trans is not None else dict(G.delta)})


def duplicate_states(G: PGS, rng) -> PGS:
    """Split one state into two identical copies; incoming mass is divided at random."""
    s = G.states[int(rng.integers(len(G.states)))]
    c = s + "c"
    trans = {}
    for (u, a, b), d in G.delta.items():
        out = {}
        for t, p in d.items():
            if t == s:
                r = Fraction(int(rng.integers(0, 5)), 4)
                if r:
                    out[c] = out.get(c, 0) + p * r
                if r != 1:
                    out[s] = out.get(s, 0) + p * (1 - r)
            else:
                out[t] = p
        trans[(u, a, b)] = Distribution(out)
        if u == s:
            trans[(c, a, b)] = trans[(u, a, b)]
    labels = {u: list(G.labels[u]) for u in G.states}
    labels[c] = list(G.labels[s])
    return _rebuild(G, G.name + "+dup", states=[*G.states, c], labels=labels, trans=trans)


def add_mixture_action(G: PGS, rng) -> PGS:
    """A new protagonist action that behaves like a fixed mix of two existing ones."""
    a1, a2 = G.actions_I[0], G.actions_I[-1]
    w = Fraction(int(rng.integers(1, 4)), 4)
    new = "m" + str(len(G.actions_I))
    trans = dict(G.delta)
    for s in G.states:
        for b in G.actions_II:
            d1, d2 = G.delta[(s, a1, b)], G.delta[(s, a2, b)]
            out = {}
            for t in dict.fromkeys([*d1, *d2]):
                out[t] = w * d1.get(t, 0) + (1 - w) * d2.get(t, 0)
            trans[(s, new, b)] = Distribution(out)
    return _rebuild(G, G.name + "+mix", acts_I=[*G.actions_I, new], trans=trans)


def drop_antagonist_action(G: PGS, rng) -> PGS:
    """Remove one antagonist action (if there is more than one)."""
    if len(G.actions_II) < 2:
        return G
    gone = G.actions_II[int(rng.integers(len(G.actions_II)))]
    keep = [b for b in G.actions_II if b != gone]
    trans = {k: d for k, d in G.delta.items() if k[2] != gone}
    return _rebuild(G, G.name + "-" + gone, acts_II=keep, trans=trans)


def extra_protagonist_action(G: PGS, rng) -> PGS:
    """A genuinely new protagonist action with fresh random behaviour."""
    new = "x" + str(len(G.actions_I))
    trans = dict(G.delta)
    for s in G.states:
        for b in G.actions_II:
            trans[(s, new, b)] = _random_dist(rng, list(G.states))
    return _rebuild(G, G.name + "+x", acts_I=[*G.actions_I, new], trans=trans)


def forward_split(G: PGS, rng, middle: int = 2) -> tuple:
    """Forward-simulation pair: a two-stage random prefix in front of ``G`` on the
    left, and on the right the same prefix with both coin flips resolved at
    once.  Returns ``(left, right, table, (Δ, Δ'))``.

    Left: ``r`` moves to middle states ``m_i`` with ``P(m_i)``, and ``m_i``
    moves to ``g`` with ``Q_i(g)``.  Right: ``r'`` moves to ``(i, g)`` with
    ``P(m_i) Q_i(g)`` and ``(i, g)`` moves to ``g`` for sure.  The forward
    table relates ``m_i`` to the ``(i, g)`` states weighted by ``Q_i``.
    """
    S = list(G.states)
    mids = [f"m{i}" for i in range(middle)]
    P = _random_dist(rng, mids, max_support=middle)
    Q = {m: _random_dist(rng, S) for m in mids}
    labels = {u: list(G.labels[u]) for u in S}
    mid_label = {m: [p for p in G.props if rng.random() < 0.5] for m in mids}
    root_label = [p for p in G.props if rng.random() < 0.5]
    acts = [(a, b) for a in G.actions_I for b in G.actions_II]

    left_trans = dict(G.delta)
    for a, b in acts:
        left_trans[("r", a, b)] = P
        for m in mids:
            left_trans[(m, a, b)] = Q[m]
    left = _rebuild(G, G.name + "+prefix", states=["r", *mids, *S],
                    labels={"r": root_label, **mid_label, **labels}, trans=left_trans)

    split = {m: {f"{m}_{g}": q for g, q in Q[m].items()} for m in mids}
    right_trans = dict(G.delta)
    right_labels = {"r": root_label, **labels}
    first: dict = {}
    for m, pm in P.items():
        for c, q in split[m].items():
            first[c] = pm * q
    for c in first:
        right_labels[c] = mid_label[c.split("_", 1)[0]]
    for a, b in acts:
        right_trans[("r", a, b)] = Distribution(first)
        for c in first:
            right_trans[(c, a, b)] = Distribution.point(c.split("_", 1)[1])
    right = _rebuild(G, G.name + "+resolved", states=["r", *first, *S], labels=right_labels,
                     trans=right_trans)
    base = compute_simulation(G, G, PLAYER_I, samples=0).relation
    pairs = [("r", Distribution.point("r"))]
    pairs += [(m, Distribution({f"{m}_{g}": q for g, q in Q[m].items()})) for m in P]
    pairs += [(s, Distribution.point(t)) for s, t in base.sorted()]
    return left, right, ForwardRelationTable(pairs), (Distribution.point("r"), Distribution.point("r"))


CONSTRUCTIONS = {
    "duplicate": duplicate_states,
    "mixture": add_mixture_action,
    "weaker-antagonist": drop_antagonist_action,
}


def _related_pairs(rng, R, k: int = 3) -> list:
    """Point pairs for every related pair plus one random convex combination."""
    pairs = [(Distribution.point(s), Distribution.point(t)) for s, t in R.sorted()]
    if len(pairs) >= 2:
        idx = rng.choice(len(pairs), size=min(k, len(pairs)), replace=False).tolist()
        ws = [int(rng.integers(1, 5)) for _ in idx]
        tot = sum(ws)
        left: dict = {}
        right: dict = {}
        for i, w in zip(idx, ws):
            s, t = R.sorted()[i]
            left[s] = left.get(s, 0) + Fraction(w, tot)
            right[t] = right.get(t, 0) + Fraction(w, tot)
        pairs.append((Distribution(left), Distribution(right)))
    return pairs


def simulation_instance(seed: int, states: int = 3, actions: int = 2, props: int = 1,
                        samples: int = DEFAULT_SAMPLES, kind: str | None = None) -> Instance:
    """Random structure, a construction applied to it and the greatest simulation between them."""
    rng = _rng([seed, 1])
    G = random_model(states, actions, props, seed)
    kinds = list(CONSTRUCTIONS)
    kind = kind or kinds[seed % len(kinds)]
    H = CONSTRUCTIONS[kind](G, rng)
    R = compute_simulation(G, H, PLAYER_I, samples=samples, seed=seed).relation
    table = embed_sim_as_forward(R)
    pairs = [(d, e) for d, e in _related_pairs(rng, R) if forward_lift_check(table, d, e) is not None]
    return Instance(kind, G, H, table, pairs, seed, {"relation_size": len(R)})


def forward_instance(seed: int, states: int = 3, actions: int = 2, props: int = 1,
                     samples: int = DEFAULT_SAMPLES) -> Instance:
    """A :func:`forward_split` pair whose table is checked before use."""
    rng = _rng([seed, 4])
    G = random_model(states, actions, props, seed)
    left, right, table, init = forward_split(G, rng)
    out = verify_forward_simulation(left, right, table, PLAYER_I, samples, seed)
    if not out["verified"]:
        raise RuntimeError(f"forward-split table rejected: {out}")
    pairs = [(Distribution.point(s), th) for s, th in table]
    return Instance("forward-split", left, right, table, pairs, seed, {"relation_size": len(table)})


INSTANCE_KINDS = ("duplicate", "mixture", "weaker-antagonist", "forward-split")


def preservation_instance(seed: int, **kw) -> Instance:
    """Instance ``seed`` of the preservation corpus; kinds rotate through :data:`INSTANCE_KINDS`."""
    kind = INSTANCE_KINDS[seed % len(INSTANCE_KINDS)]
    if kind == "forward-split":
        return forward_instance(seed, **kw)
    return simulation_instance(seed, kind=kind, **kw)


def bisimulation_instance(seed: int, states: int = 3, actions: int = 2, props: int = 1,
                          samples: int = DEFAULT_SAMPLES) -> Instance:
    rng = _rng([seed, 2])
    G = random_model(states, actions, props, seed)
    H = duplicate_states(G, rng) if seed % 2 else G
    R = compute_bisimulation(G, H, PLAYER_I, samples=samples, seed=seed).relation
    return Instance("duplicate" if seed % 2 else "identity", G, H, R,
                    [(Distribution.point(s), Distribution.point(t)) for s, t in R.sorted()], seed,
                    {"relation_size": len(R)})


# ---------------------------------------------------------------------------
# preservation


@dataclass
class PreservationReport:
    mode: str  # "forward" (one direction) or "bisimulation" (both directions)
    checks: int = 0
    holds: int = 0
    skipped: int = 0
    violations: list = field(default_factory=list)
    formulas: int = 0

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.checks if self.checks else 0.0

    def to_json(self) -> dict:
        return {"mode": self.mode, "checks": self.checks, "holds": self.holds,
                "skipped_uncertain": self.skipped, "skip_rate": self.skip_rate,
                "formulas": self.formulas, "violations": self.violations}


def _dist_json(d: Distribution) -> dict:
    return {k: str(v) for k, v in d.items()}


def check_preservation(G: PGS, H: PGS, pairs: list, formulas: list, *, bisim: bool = False,
                       report: PreservationReport | None = None, eps: float | None = None,
                       max_iters: int | None = None) -> PreservationReport:
    """``Δ ⊨ φ ⇒ Δ' ⊨ φ`` (or ``⇔`` with ``bisim``) for every pair and formula.

    Boundary-uncertain verdicts on either side are skipped and counted.
    """
    rep = report or PreservationReport("bisimulation" if bisim else "forward")
    kw = {}
    if eps is not None:
        kw["eps"] = eps
    if max_iters is not None:
        kw["max_iters"] = max_iters
    for phi in formulas:
        rep.formulas += 1
        left, right = patl_sat(G, phi, **kw), patl_sat(H, phi, **kw)
        for d, e in pairs:
            vl, vr = left.holds_on(d), right.holds_on(e)
            rep.checks += 1
            if "uncertain" in (vl, vr):
                rep.skipped += 1
                continue
            bad = (vl == "sat" and vr == "unsat") or (bisim and vl == "unsat" and vr == "sat")
            if bad:
                rep.violations.append({"formula": to_text(phi), "left": _dist_json(d),
                                       "right": _dist_json(e), "left_verdict": vl,
                                       "right_verdict": vr, "left_model": G.name,
                                       "right_model": H.name})
            else:
                rep.holds += 1
    return rep


def minimize_violation(G: PGS, H: PGS, d, e, phi, *, bisim: bool = False, fragment=None) -> object:
    """Smallest subformula of ``phi`` (inside ``fragment``) still violating on ``(d, e)``."""
    keep = fragment or (lambda f: True)
    state_nodes = (Prop, Not, And, Or, Strategic)
    cands = sorted((f for f in set(subformulas(phi)) if isinstance(f, state_nodes) and keep(f)),
                   key=lambda f: (len(to_text(f)), to_text(f)))
    for f in cands:
        vl, vr = patl_sat(G, f).holds_on(d), patl_sat(H, f).holds_on(e)
        if (vl == "sat" and vr == "unsat") or (bisim and vl == "unsat" and vr == "sat"):
            return f
    return phi


def formula_batch(seed: int, props: list, count: int, depth: int, fragment: str = "A-PATL") -> list:
    rng = _rng([seed, 3])
    out = []
    check = in_a_patl if fragment == "A-PATL" else in_l_plus
    while len(out) < count:
        phi = random_formula(rng, props, depth, fragment=fragment)
        if check(phi, frozenset({PLAYER_I})):
            out.append(phi)
    return out


__all__ = [
    "random_model", "random_formula", "formula_batch", "Instance", "simulation_instance",
    "bisimulation_instance", "duplicate_states", "add_mixture_action", "drop_antagonist_action",
    "extra_protagonist_action", "CONSTRUCTIONS", "PreservationReport", "check_preservation",
    "minimize_violation", "forward_split", "forward_instance", "preservation_instance",
    "INSTANCE_KINDS",
]
