"""Probabilistic alternating simulation, bisimulation and forward simulation.

For a pair ``(s, s')`` and a protagonist move ``μ`` at ``s`` the local
condition

    ∃π'₁ ∀π'₂ ∃π₂ :  δ(s, μ, π₂)  R̄  δ'(s', π'₁, π'₂)

is a single linear feasibility problem once the antagonist's universal
choice is restricted to pure moves (the set of antagonist moves answered
by a fixed ``π'₁`` is convex, so checking the vertices suffices).  The
problem has one block per pure antagonist move ``b'`` holding the
responding mixed move ``π₂^{b'}`` and a coupling ``w^{b'}``; the
protagonist move ``π'₁`` is shared by all blocks.

The protagonist's universal quantifier ranges over mixed moves.  We decide
it exactly for every pure move and then try to refute it on a seeded
sample of mixed moves; a refuted pair is dropped.  ``mode`` strings in the
results say which check was run.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import PGS, PLAYER_I, Distribution, joint_step
from .lifting import (ForwardLiftWitness, ForwardRelationTable, RelationTable, WeightFunction,
                      WitnessError, check_forward_witness, check_weight_function, embed_relation)
from .lp import LinearProgram

ZERO = Fraction(0)
DEFAULT_SAMPLES = 64
COMBO_LIMIT = 4096


def _oriented(G: PGS, protagonist: str) -> PGS:
    return G if protagonist == PLAYER_I else G.swap_players()


def check_mode(samples: int) -> str:
    if samples:
        return f"pure-protagonist exact + {samples} sampled mixed refutations"
    return "pure-protagonist exact"


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class LocalCertificate:
    """Answers to one protagonist move at a pair.

    ``response`` is the protagonist move in the right structure and
    ``blocks`` maps each pure antagonist move there to ``(π₂, w)``.
    """

    left: object
    right: object
    move: Distribution
    response: Distribution
    blocks: Mapping

    def check(self, G: PGS, H: PGS, R) -> None:
        for b2, (pi2, w) in self.blocks.items():
            delta = joint_step(G, self.left, self.move, pi2)
            theta = joint_step(H, self.right, self.response, Distribution.point(b2))
            check_weight_function(R, delta, theta, w)

    def to_json(self) -> dict:
        return {"move": self.move.to_json(), "response": self.response.to_json(),
                "blocks": {b: {"antagonist": pi2.to_json(), "weights": w.to_json()}
                           for b, (pi2, w) in self.blocks.items()}}


@dataclass
class LocalResult:
    ok: bool
    certificates: list = field(default_factory=list)
    failing_move: Distribution | None = None
    reason: str = ""


def _succ(G: PGS, s, mu_I: Mapping) -> dict:
    """Per antagonist action ``b``: the successor distribution of ``(mu_I, b)``."""
    return {b: joint_step(G, s, mu_I, Distribution.point(b)) for b in G.actions_II}


def local_move_certificate(G: PGS, H: PGS, s, t, R, move: Distribution) -> LocalCertificate | None:
    """Solve the local condition at ``(s, t)`` for one protagonist move (players already oriented)."""
    R = R if isinstance(R, (set, frozenset)) else set(R)
    left_steps = _succ(G, s, move)
    left_states = list(dict.fromkeys(u for d in left_steps.values() for u in d))
    right_steps = {(a, b): H.step(t, a, b) for a in H.actions_I for b in H.actions_II}
    lp = LinearProgram()
    x = {a: lp.var(("x", a)) for a in H.actions_I}
    lp.add_eq({x[a]: 1 for a in H.actions_I}, 1)
    wvars = {}
    for b2 in H.actions_II:
        right_states = list(dict.fromkeys(u for a in H.actions_I for u in right_steps[(a, b2)]))
        y = {b: lp.var(("y", b2, b)) for b in G.actions_II}
        lp.add_eq({y[b]: 1 for b in G.actions_II}, 1)
        w = {(u, v): lp.var(("w", b2, u, v)) for u in left_states for v in right_states if (u, v) in R}
        wvars[b2] = w
        for u in left_states:
            row = {w[k]: 1 for k in w if k[0] == u}
            for b in G.actions_II:
                c = left_steps[b].get(u, ZERO)
                if c:
                    row[y[b]] = row.get(y[b], ZERO) - c
            lp.add_eq(row, 0)
        for v in right_states:
            row = {w[k]: 1 for k in w if k[1] == v}
            for a in H.actions_I:
                c = right_steps[(a, b2)].get(v, ZERO)
                if c:
                    row[x[a]] = row.get(x[a], ZERO) - c
            lp.add_eq(row, 0)
    res = lp.solve()
    if not res.feasible:
        return None
    response = Distribution({a: res[x[a]] for a in H.actions_I})
    blocks = {}
    for b2 in H.actions_II:
        pi2 = Distribution({b: res[("y", b2, b)] for b in G.actions_II})
        wts = {k: res[name] for k, name in wvars[b2].items() if res[name]}
        blocks[b2] = (pi2, WeightFunction(wts))
    cert = LocalCertificate(s, t, move, response, blocks)
    cert.check(G, H, R)
    return cert


def _sample_moves(rng: np.random.Generator, actions: tuple, n: int) -> list:
    """Random mixed moves with small denominators, full support, deterministic in ``rng``."""
    if len(actions) < 2 or n <= 0:
        return []
    out = []
    for _ in range(n):
        ws = rng.integers(1, 9, size=len(actions))
        total = int(ws.sum())
        out.append(Distribution({a: Fraction(int(w), total) for a, w in zip(actions, ws)}))
    return out


def local_sim_condition(G: PGS, H: PGS, s, t, R, protagonist: str = PLAYER_I,
                        samples: int = 0, rng: np.random.Generator | None = None) -> LocalResult:
    """Second clause of the simulation definition at ``(s, t)``; labels are not checked here."""
    G, H = _oriented(G, protagonist), _oriented(H, protagonist)
    certs = []
    moves = [Distribution.point(a) for a in G.actions_I]
    for mu in moves:
        cert = local_move_certificate(G, H, s, t, R, mu)
        if cert is None:
            return LocalResult(False, certs, mu, "no answer to protagonist move")
        certs.append(cert)
    if samples:
        rng = rng if rng is not None else np.random.default_rng(0)
        for mu in _sample_moves(rng, G.actions_I, samples):
            if local_move_certificate(G, H, s, t, R, mu) is None:
                return LocalResult(False, certs, mu, "mixed protagonist move refuted")
    return LocalResult(True, certs)


# ---------------------------------------------------------------------------
# greatest fixed points


@dataclass
class SimulationResult:
    relation: RelationTable
    mode: str
    rounds: int
    removed: list  # (pair, round, reason) in deletion order
    seed: int | None = None

    def to_json(self) -> dict:
        return {"relation": self.relation.to_json()["pairs"], "mode": self.mode,
                "rounds": self.rounds, "seed": self.seed,
                "removed": [{"pair": list(p), "round": r, "reason": why}
                            for p, r, why in self.removed]}


def label_matching(G: PGS, H: PGS) -> RelationTable:
    return RelationTable((s, t) for s in G.states for t in H.states if G.label(s) == H.label(t))


def _refine(G, H, R, check_pair, samples, seed):
    """Drop failing pairs until nothing changes: pure pass to a fixpoint, then
    a sampled mixed pass; repeated while the mixed pass removes anything."""
    removed = []
    rounds = 0
    rng = np.random.default_rng(np.random.SeedSequence(seed if seed is not None else 0))
    while True:
        while True:
            rounds += 1
            bad = [p for p in sorted(R) if not check_pair(p, R, 0, None).ok]
            if not bad:
                break
            removed.extend((p, rounds, "pure") for p in bad)
            R = RelationTable(R - set(bad))
        if not samples:
            return R, rounds, removed
        rounds += 1
        bad = [p for p in sorted(R) if not check_pair(p, R, samples, rng).ok]
        if not bad:
            return R, rounds, removed
        removed.extend((p, rounds, "mixed") for p in bad)
        R = RelationTable(R - set(bad))


def compute_simulation(G: PGS, H: PGS, protagonist: str = PLAYER_I,
                       samples: int = DEFAULT_SAMPLES, seed: int | None = 0,
                       start: Iterable | None = None) -> SimulationResult:
    """Largest relation inside ``start`` (default: label-equal pairs) passing the local check."""
    R = label_matching(G, H) if start is None else RelationTable(
        p for p in start if G.label(p[0]) == H.label(p[1]))

    def check_pair(p, R, n, rng):
        return local_sim_condition(G, H, p[0], p[1], R, protagonist, n, rng)

    R, rounds, removed = _refine(G, H, R, check_pair, samples, seed)
    return SimulationResult(R, check_mode(samples), rounds, removed, seed)


def compute_bisimulation(G: PGS, H: PGS, protagonist: str = PLAYER_I,
                         samples: int = DEFAULT_SAMPLES, seed: int | None = 0) -> SimulationResult:
    """Largest relation whose pairs pass the local check in both directions."""
    R = label_matching(G, H)

    def check_pair(p, R, n, rng):
        fwd = local_sim_condition(G, H, p[0], p[1], R, protagonist, n, rng)
        if not fwd.ok:
            return fwd
        return local_sim_condition(H, G, p[1], p[0], R.inverse(), protagonist, n, rng)

    R, rounds, removed = _refine(G, H, R, check_pair, samples, seed)
    return SimulationResult(R, check_mode(samples), rounds, removed, seed)


def verify_simulation(G: PGS, H: PGS, R, protagonist: str = PLAYER_I,
                      samples: int = 0, seed: int = 0) -> dict:
    """Check that ``R`` itself is a simulation; returns ``{"verified": bool, ...}``."""
    R = RelationTable(R)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for s, t in sorted(R):
        if G.label(s) != H.label(t):
            return {"verified": False, "pair": [s, t], "reason": "labels differ"}
        res = local_sim_condition(G, H, s, t, R, protagonist, samples, rng)
        if not res.ok:
            return {"verified": False, "pair": [s, t], "reason": res.reason,
                    "move": res.failing_move.to_json()}
    return {"verified": True, "mode": check_mode(samples), "pairs": len(R)}


# ---------------------------------------------------------------------------
# forward simulation


@dataclass(frozen=True)
class ForwardCertificate:
    """Answer to one protagonist move at ``(s, Θ)``: a right-hand level-1
    response and, per pure antagonist profile on ``⌈Θ⌉``, ``(π₂, witness)``."""

    left: object
    right: Distribution
    move: Distribution
    response: Mapping  # right state -> Distribution over protagonist actions
    blocks: Mapping  # tuple of (state, action) -> (π₂, ForwardLiftWitness)

    def check(self, G: PGS, H: PGS, table) -> None:
        for profile, (pi2, wit) in self.blocks.items():
            delta = joint_step(G, self.left, self.move, pi2)
            theta = _lifted(H, self.right, self.response, dict(profile))
            check_forward_witness(table, delta, theta, wit)

    def to_json(self) -> dict:
        return {"move": self.move.to_json(),
                "response": {u: m.to_json() for u, m in self.response.items()},
                "blocks": [{"profile": [list(x) for x in profile], "antagonist": pi2.to_json(),
                            "witness": wit.to_json()}
                           for profile, (pi2, wit) in self.blocks.items()]}


def _lifted(H: PGS, theta: Mapping, response: Mapping, profile: Mapping) -> Distribution:
    out: dict = {}
    for u, pu in theta.items():
        for v, pv in joint_step(H, u, response[u], Distribution.point(profile[u])).items():
            out[v] = out.get(v, ZERO) + pu * pv
    return Distribution(out)


def _profiles(H: PGS, support: list) -> list:
    n = len(H.actions_II) ** len(support)
    if n > COMBO_LIMIT:
        raise ValueError(f"{n} antagonist profiles on a support of size {len(support)} "
                         f"(limit {COMBO_LIMIT})")
    return [tuple(zip(support, pick)) for pick in itertools.product(H.actions_II, repeat=len(support))]


def forward_move_certificate(G: PGS, H: PGS, s, theta: Distribution, table, move: Distribution):
    """One exact feasibility problem for a protagonist move at ``(s, theta)`` (players oriented)."""
    table = list(table)
    left_steps = _succ(G, s, move)
    left_states = list(dict.fromkeys(u for d in left_steps.values() for u in d))
    support = [u for u in theta if theta[u]]
    lp = LinearProgram()
    x = {(u, a): lp.var(("x", u, a)) for u in support for a in H.actions_I}
    for u in support:
        lp.add_eq({x[(u, a)]: 1 for a in H.actions_I}, 1)
    cand = {u: [j for j, (l, _) in enumerate(table) if l == u] for u in left_states}
    profiles = _profiles(H, support)
    for k, profile in enumerate(profiles):
        prof = dict(profile)
        y = {b: lp.var(("y", k, b)) for b in G.actions_II}
        lp.add_eq({y[b]: 1 for b in G.actions_II}, 1)
        q = {(u, j): lp.var(("q", k, u, j)) for u in left_states for j in cand[u]}
        for u in left_states:
            row = {q[(u, j)]: 1 for j in cand[u]}
            for b in G.actions_II:
                c = left_steps[b].get(u, ZERO)
                if c:
                    row[y[b]] = row.get(y[b], ZERO) - c
            lp.add_eq(row, 0)
        # right-hand mass at v: Σ_u θ(u) Σ_a x[u,a] δ'(u,a,prof[u])(v)
        right: dict = {}
        for u in support:
            for a in H.actions_I:
                for v, pv in H.step(u, a, prof[u]).items():
                    right.setdefault(v, {})
                    right[v][x[(u, a)]] = right[v].get(x[(u, a)], ZERO) - theta[u] * pv
        for (u, j) in q:
            for v in table[j][1]:
                right.setdefault(v, {})
        for v, row in right.items():
            row = dict(row)
            for (u, j), name in q.items():
                c = table[j][1].get(v, ZERO)
                if c:
                    row[name] = row.get(name, ZERO) + c
            lp.add_eq(row, 0)
    res = lp.solve()
    if not res.feasible:
        return None
    response = {u: Distribution({a: res[x[(u, a)]] for a in H.actions_I}) for u in support}
    blocks = {}
    for k, profile in enumerate(profiles):
        pi2 = Distribution({b: res[("y", k, b)] for b in G.actions_II})
        acc: dict = {}
        for u in left_states:
            for j in cand[u]:
                val = res[("q", k, u, j)]
                if val:
                    key = (u, table[j][1])
                    acc[key] = acc.get(key, ZERO) + val
        blocks[profile] = (pi2, ForwardLiftWitness(tuple((p, u, th) for (u, th), p in acc.items())))
    cert = ForwardCertificate(s, theta, move, response, blocks)
    cert.check(G, H, table)
    return cert


def local_forward_condition(G: PGS, H: PGS, s, theta: Mapping, table, protagonist: str = PLAYER_I,
                            samples: int = 0, rng: np.random.Generator | None = None) -> LocalResult:
    """Both clauses of the forward-simulation definition at ``(s, theta)``."""
    theta = Distribution(theta)
    for u in theta:
        if H.label(u) != G.label(s):
            return LocalResult(False, [], None, f"label mismatch at {u}")
    G, H = _oriented(G, protagonist), _oriented(H, protagonist)
    certs = []
    for a in G.actions_I:
        mu = Distribution.point(a)
        cert = forward_move_certificate(G, H, s, theta, table, mu)
        if cert is None:
            return LocalResult(False, certs, mu, "no answer to protagonist move")
        certs.append(cert)
    if samples:
        rng = rng if rng is not None else np.random.default_rng(0)
        for mu in _sample_moves(rng, G.actions_I, samples):
            if forward_move_certificate(G, H, s, theta, table, mu) is None:
                return LocalResult(False, certs, mu, "mixed protagonist move refuted")
    return LocalResult(True, certs)


def verify_forward_simulation(G: PGS, H: PGS, table, protagonist: str = PLAYER_I,
                              samples: int = 0, seed: int = 0) -> dict:
    """Check every pair of a candidate forward table against the table itself."""
    table = ForwardRelationTable(table)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for s, theta in table:
        res = local_forward_condition(G, H, s, theta, table, protagonist, samples, rng)
        if not res.ok:
            out = {"verified": False, "pair": [s, theta.to_json()], "reason": res.reason}
            if res.failing_move is not None:
                out["move"] = res.failing_move.to_json()
            return out
    return {"verified": True, "mode": check_mode(samples), "pairs": len(table)}


def compute_forward_simulation(G: PGS, H: PGS, candidates, protagonist: str = PLAYER_I,
                               samples: int = 0, seed: int | None = 0) -> tuple:
    """Largest sub-table of ``candidates`` that is a forward simulation.

    Returns ``(table, removed)``.  This only prunes; it does not invent
    new right-hand distributions.
    """
    table = ForwardRelationTable(candidates)
    removed = []
    rng = np.random.default_rng(np.random.SeedSequence(seed if seed is not None else 0))
    changed = True
    while changed:
        changed = False
        keep = []
        for s, theta in table:
            if local_forward_condition(G, H, s, theta, table, protagonist, samples, rng).ok:
                keep.append((s, theta))
            else:
                removed.append((s, theta))
                changed = True
        table = ForwardRelationTable(keep)
    return table, removed


def forward_candidates(G: PGS, H: PGS, depth: int = 1) -> ForwardRelationTable:
    """Label-consistent seed pairs: points, plus ``n``-step successor
    distributions of pure joint-action sequences for ``n <= depth``."""
    dists = {Distribution.point(t) for t in H.states}
    frontier = set(dists)
    for _ in range(depth):
        nxt = set()
        for d in frontier:
            for a in H.actions_I:
                for b in H.actions_II:
                    out: dict = {}
                    for u, pu in d.items():
                        for v, pv in H.step(u, a, b).items():
                            out[v] = out.get(v, ZERO) + pu * pv
                    nxt.add(Distribution(out))
        frontier = nxt - dists
        dists |= nxt
    pairs = []
    for s in G.states:
        for d in sorted(dists, key=lambda d: sorted((k, str(v)) for k, v in d.items())):
            if all(H.label(u) == G.label(s) for u in d):
                pairs.append((s, d))
    return ForwardRelationTable(pairs)


def embed_sim_as_forward(R) -> ForwardRelationTable:
    """``(s, t) ↦ (s, t̄)``."""
    return embed_relation(R)


__all__ = [
    "LocalCertificate", "LocalResult", "SimulationResult", "ForwardCertificate", "WitnessError",
    "local_move_certificate", "local_sim_condition", "compute_simulation", "compute_bisimulation",
    "verify_simulation", "forward_move_certificate", "local_forward_condition",
    "verify_forward_simulation", "compute_forward_simulation", "forward_candidates",
    "embed_sim_as_forward", "label_matching", "check_mode",
]
