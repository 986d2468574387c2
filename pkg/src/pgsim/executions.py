"""Probabilistic executions: finite unfoldings of a game under fixed strategies.

A history is a tuple of states.  The execution of a strategy pair from a
distribution ``Δ`` is the tree of histories whose root level is ``Δ`` and
where ``e`` moves to ``e + (t,)`` with the probability the two mixed moves
at ``e`` give to ``t``.

Path probabilities are computed from a level-by-level split of the
execution into histories still undecided (``0``), already satisfying the
path formula (``1``) and already violating it (``2``).  Only undecided
histories are extended, which keeps the frontier small.
"""
from __future__ import annotations

import bisect
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import PGS, PLAYER_I, Distribution, as_history_strategy, joint_step
from .lifting import (ForwardLiftWitness, ForwardRelationTable, WitnessError, check_forward_witness,
                      forward_lift_check)

ZERO = Fraction(0)
ONE = Fraction(1)
NODE_BUDGET = 10 ** 6


class BudgetError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# execution trees


@dataclass
class ExecutionTree:
    root: Distribution
    horizon: int
    levels: list  # levels[n]: history (length n+1) -> probability
    children: dict  # history -> Distribution over child histories

    def nodes(self):
        for lvl in self.levels:
            yield from lvl

    def size(self) -> int:
        return sum(len(lvl) for lvl in self.levels)

    def to_dot(self) -> str:
        lines = ["digraph execution {"]
        for lvl in self.levels:
            for h, p in lvl.items():
                lines.append(f'  "{".".join(h)}" [label="{h[-1]}\\n{p}"];')
        for h, ch in self.children.items():
            for c, p in ch.items():
                lines.append(f'  "{".".join(h)}" -> "{".".join(c)}" [label="{p}"];')
        lines.append("}")
        return "\n".join(lines)


def _history_step(G: PGS, h: tuple, pi_I, pi_II) -> Distribution:
    return joint_step(G, h[-1], pi_I(h), pi_II(h))


def build_execution(G: PGS, pi_I, pi_II, delta: Mapping, horizon: int,
                    node_budget: int = NODE_BUDGET) -> ExecutionTree:
    """Depth-``horizon`` unfolding with exact masses."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
    root = Distribution(delta)
    levels = [{(s,): p for s, p in root.items()}]
    children = {}
    count = len(levels[0])
    for n in range(horizon):
        nxt: dict = {}
        for h, p in levels[-1].items():
            step = _history_step(G, h, pi_I, pi_II)
            children[h] = Distribution({h + (t,): q for t, q in step.items()})
            for t, q in step.items():
                nxt[h + (t,)] = nxt.get(h + (t,), ZERO) + p * q
            count += len(step)
            if count > node_budget:
                raise BudgetError(f"execution exceeds node budget {node_budget} at depth {n + 1} "
                                  f"({count} nodes so far)")
        levels.append(nxt)
    return ExecutionTree(root, horizon, levels, children)


def cone_probability(tree: ExecutionTree, history) -> Fraction:
    """Probability of the cone of a history, by the product recursion."""
    h = tuple(history)
    if not h or len(h) > tree.horizon + 1:
        raise KeyError(f"history {h} not in the execution")
    p = tree.root.get(h[0], ZERO)
    if not p:
        raise KeyError(f"history {h} not in the execution")
    for n in range(1, len(h)):
        step = tree.children.get(h[:n])
        if step is None or h[:n + 1] not in step:
            raise KeyError(f"history {h} not in the execution")
        p *= step[h[:n + 1]]
    return p


# ---------------------------------------------------------------------------
# triple decomposition


@dataclass
class TripleLevel:
    """One level: masses ``α_ℓ`` and normalised history distributions ``Δ_ℓ``."""

    alphas: tuple  # (α₀, α₁, α₂)
    parts: tuple  # (Δ₀, Δ₁, Δ₂), None where α is zero

    def to_json(self) -> dict:
        return {"alpha": [str(a) for a in self.alphas],
                "support": [len(p) if p else 0 for p in self.parts]}


@dataclass
class TripleDecomposition:
    levels: list

    def satisfied(self) -> Fraction:
        """``Σ_i α_{i,1} · Π_{i'<i} α_{i',0}``."""
        total, carry = ZERO, ONE
        for lvl in self.levels:
            total += lvl.alphas[1] * carry
            carry *= lvl.alphas[0]
        return total

    def undecided(self) -> Fraction:
        carry = ONE
        for lvl in self.levels:
            carry *= lvl.alphas[0]
        return carry

    def check(self, G: PGS, pi_I, pi_II, delta: Mapping) -> None:
        """Bookkeeping identities and pairwise disjoint supports per level."""
        pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
        target = {(s,): p for s, p in Distribution(delta).items()}
        for lvl in self.levels:
            sups = [set(p) if p else set() for p in lvl.parts]
            if sups[0] & sups[1] or sups[0] & sups[2] or sups[1] & sups[2]:
                raise WitnessError("triple supports overlap")
            acc: dict = {}
            for a, part in zip(lvl.alphas, lvl.parts):
                if a:
                    for h, p in part.items():
                        acc[h] = acc.get(h, ZERO) + a * p
            if acc != target:
                raise WitnessError("triple masses do not recompose the level distribution")
            if not lvl.alphas[0]:
                break
            target = {}
            for h, p in lvl.parts[0].items():
                for t, q in _history_step(G, h, pi_I, pi_II).items():
                    target[h + (t,)] = target.get(h + (t,), ZERO) + p * q


@dataclass
class PathProbability:
    lower: Fraction
    upper: Fraction
    decomposition: TripleDecomposition | None = None
    horizon: int = 0

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def to_json(self) -> dict:
        return {"lower": str(self.lower), "upper": str(self.upper), "horizon": self.horizon}


def _split(dist: Mapping, classify) -> tuple:
    buckets = ({}, {}, {})
    for h, p in dist.items():
        buckets[classify(h[-1])][h] = p
    alphas = tuple(sum(b.values(), ZERO) for b in buckets)
    parts = tuple(Distribution({h: p / a for h, p in b.items()}) if a else None
                  for b, a in zip(buckets, alphas))
    return alphas, parts


def _can_reach(G: PGS, pi_I, pi_II, S1, S2) -> set:
    """States from which ``S2`` is reachable through ``S1`` in the induced chain
    (memoryless strategies only)."""
    pred: dict = {}
    for s in S1 - S2:
        for t in joint_step(G, s, pi_I((s,)), pi_II((s,))):
            pred.setdefault(t, set()).add(s)
    seen, todo = set(S2), list(S2)
    while todo:
        t = todo.pop()
        for s in pred.get(t, ()):
            if s not in seen:
                seen.add(s)
                todo.append(s)
    return seen


def triple_decomposition(G: PGS, pi_I, pi_II, delta: Mapping, S1, S2, levels: int,
                         node_budget: int = NODE_BUDGET) -> TripleDecomposition:
    """Split ``S1 U S2`` into undecided / satisfied / violated masses for ``levels`` levels.

    With two memoryless strategies, histories ending where ``S2`` is no
    longer reachable are counted as violated straight away.
    """
    pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
    S1, S2 = set(S1), set(S2)
    live = _can_reach(G, pi_I, pi_II, S1, S2) if pi_I.memoryless and pi_II.memoryless else None

    def classify(s):
        if s in S2:
            return 1
        return 0 if s in S1 and (live is None or s in live) else 2

    cur = {(s,): p for s, p in Distribution(delta).items()}
    out = []
    for n in range(levels + 1):
        alphas, parts = _split(cur, classify)
        out.append(TripleLevel(alphas, parts))
        if n == levels or not alphas[0]:
            break
        nxt: dict = {}
        for h, p in parts[0].items():
            for t, q in _history_step(G, h, pi_I, pi_II).items():
                nxt[h + (t,)] = nxt.get(h + (t,), ZERO) + p * q
        if len(nxt) > node_budget:
            raise BudgetError(f"undecided frontier exceeds node budget {node_budget} at level {n + 1}")
        cur = nxt
    return TripleDecomposition(out)


def exact_path_probability(G: PGS, pi_I, pi_II, delta: Mapping, kind: str, bound, S1, S2,
                           horizon: int | None = None, node_budget: int = NODE_BUDGET) -> PathProbability:
    """Probability of ``X S2``, ``S1 U S2`` or ``S1 R S2`` under fixed strategies.

    Bounded formulas are exact.  Unbounded ones are unfolded to ``horizon``
    and returned as an interval whose width is the undecided mass.
    """
    states = set(G.states)
    if kind == "X":
        pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
        p = ZERO
        for s, ps in Distribution(delta).items():
            p += ps * _history_step(G, (s,), pi_I, pi_II).mass(set(S2))
        return PathProbability(p, p, None, 1)
    if kind == "R":
        # φ₁ R φ₂ is the complement of ¬φ₁ U ¬φ₂
        dual = exact_path_probability(G, pi_I, pi_II, delta, "U", bound, states - set(S1),
                                      states - set(S2), horizon, node_budget)
        return PathProbability(1 - dual.upper, 1 - dual.lower, dual.decomposition, dual.horizon)
    if bound is not None:
        levels = bound
    elif horizon is None:
        raise ValueError("unbounded until needs a horizon")
    else:
        levels = horizon
    dec = triple_decomposition(G, pi_I, pi_II, delta, S1, S2, levels, node_budget)
    lo = dec.satisfied()
    # at a bound the undecided mass fails; without one it is still open
    gap = ZERO if bound is not None else dec.undecided()
    return PathProbability(lo, lo + gap, dec, levels)


def markov_chain_probability(G: PGS, pi_I, pi_II, delta: Mapping, kind: str, bound, S1, S2) -> Fraction:
    """Exact probability of ``X``/``U``/``R`` objectives under memoryless strategies.

    Unbounded until solves the absorption system of the induced chain after
    removing states that cannot reach ``S2``; bounded forms use the backward
    recursion.
    """
    from .lp import solve_square

    pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
    if not (pi_I.memoryless and pi_II.memoryless):
        raise ValueError("the Markov-chain evaluator needs memoryless strategies")
    states = list(G.states)
    S1, S2 = set(S1), set(S2)
    P = {s: joint_step(G, s, pi_I((s,)), pi_II((s,))) for s in states}
    delta = Distribution(delta)
    if kind == "X":
        return sum((p * P[s].mass(S2) for s, p in delta.items()), ZERO)
    if kind == "R":
        full = set(states)
        return 1 - markov_chain_probability(G, pi_I, pi_II, delta, "U", bound, full - S1, full - S2)
    if bound is not None:
        x = {s: ONE if s in S2 else ZERO for s in states}
        for _ in range(bound):
            x = {s: ONE if s in S2 else (sum((q * x[t] for t, q in P[s].items()), ZERO)
                                          if s in S1 else ZERO) for s in states}
    else:
        live = _can_reach(G, pi_I, pi_II, S1, S2)
        free = [s for s in states if s in live and s not in S2]
        idx = {s: i for i, s in enumerate(free)}
        A = [[ZERO] * len(free) for _ in free]
        b = [ZERO] * len(free)
        for s in free:
            i = idx[s]
            A[i][i] += 1
            for t, q in P[s].items():
                if t in idx:
                    A[i][idx[t]] -= q
                elif t in S2:
                    b[i] += q
        sol = solve_square(A, b) if free else []
        x = {s: ONE if s in S2 else ZERO for s in states}
        x.update({s: sol[idx[s]] for s in free})
    return sum((p * x[s] for s, p in delta.items()), ZERO)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MonteCarloResult:
    estimate: float
    low: float
    high: float
    samples: int
    hits: int
    undecided: int
    seed: int
    horizon: int

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "ci95": [self.low, self.high], "samples": self.samples,
                "hits": self.hits, "undecided": self.undecided, "seed": self.seed,
                "horizon": self.horizon, "rng": "numpy PCG64 via SeedSequence"}


def wilson_interval(hits: int, n: int, alpha: float = 0.05) -> tuple:
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(hits, n, alpha=alpha, method="wilson")
    return float(lo), float(hi)


class _Sampler:
    """Inverse-CDF sampling of mixed moves and successors with float weights."""

    def __init__(self):
        self.cache: dict = {}

    def table(self, dist: Distribution):
        hit = self.cache.get(dist)
        if hit is None:
            keys = list(dist)
            cum = np.cumsum([float(dist[k]) for k in keys])
            cum[-1] = 1.0
            hit = (keys, cum.tolist())
            self.cache[dist] = hit
        return hit

    def draw(self, dist: Distribution, u: float):
        keys, cum = self.table(dist)
        return keys[min(bisect.bisect_right(cum, u), len(keys) - 1)]


def monte_carlo_path_probability(G: PGS, pi_I, pi_II, delta: Mapping, kind: str, bound, S1, S2,
                                 samples: int, horizon: int, seed: int,
                                 chunk: int = 10_000) -> MonteCarloResult:
    """Sampled plays; undecided plays at the horizon count as misses and are reported."""
    if samples < 1:
        raise ValueError("need at least one sample")
    pi_I, pi_II = as_history_strategy(pi_I), as_history_strategy(pi_II)
    S1, S2 = set(S1), set(S2)
    root = Distribution(delta)
    depth = 1 if kind == "X" else (bound if bound is not None else horizon)
    sampler = _Sampler()
    streams = np.random.SeedSequence(seed).spawn(math.ceil(samples / chunk))
    hits = undecided = 0
    done = 0
    for ss in streams:
        m = min(chunk, samples - done)
        u = np.random.Generator(np.random.PCG64(ss)).random((m, 1 + 3 * depth))
        for row in u.tolist():
            s = sampler.draw(root, row[0])
            h = (s,)
            result = None
            for n in range(depth + 1):
                if kind == "U":
                    if s in S2:
                        result = True
                        break
                    if s not in S1 or n == depth:
                        result = False if (s not in S1 or bound is not None) else None
                        break
                elif kind == "R":
                    if s not in S2:
                        result = False
                        break
                    if s in S1:
                        result = True
                        break
                    if n == depth:
                        result = True if bound is not None else None
                        break
                elif n == 1:
                    result = s in S2
                    break
                k = 1 + 3 * n
                a = sampler.draw(pi_I(h), row[k])
                b = sampler.draw(pi_II(h), row[k + 1])
                s = sampler.draw(G.step(s, a, b), row[k + 2])
                h = h + (s,)
            if result is None:
                undecided += 1
            elif result:
                hits += 1
        done += m
    lo, hi = wilson_interval(hits, samples)
    return MonteCarloResult(hits / samples, lo, hi, samples, hits, undecided, seed, depth)


# ---------------------------------------------------------------------------
# strategy transfer


class TransferError(RuntimeError):
    """The local condition could not be met for a mixed protagonist move."""


@dataclass
class TransferResult:
    protagonist: object  # strategy for the protagonist in the right structure
    antagonist: object  # strategy for the antagonist in the left structure
    levels: list  # per level: history-level ForwardLiftWitness
    certificate: dict = field(default_factory=dict)


def _hist_dist(theta: Mapping) -> Distribution:
    return Distribution({(u,): p for u, p in theta.items()})


def _last(theta: Mapping) -> Distribution:
    out: dict = {}
    for h, p in theta.items():
        out[h[-1]] = out.get(h[-1], ZERO) + p
    return Distribution(out)


def _mix(moves: list) -> Distribution:
    """``Σ w_i m_i / Σ w_i`` for ``(w_i, m_i)`` pairs."""
    total = sum(w for w, _ in moves)
    acc: dict = {}
    for w, m in moves:
        for a, p in m.items():
            acc[a] = acc.get(a, ZERO) + w * p / total
    return Distribution(acc)


def transfer_strategies(G: PGS, H: PGS, table, delta: Mapping, theta: Mapping, pi1, pi2_right,
                        horizon: int, protagonist: str = PLAYER_I) -> TransferResult:
    """Build a protagonist strategy in ``H`` and an antagonist strategy in ``G``
    whose depth-``horizon`` executions are related level by level.

    ``pi1`` is the protagonist's strategy in ``G`` and ``pi2_right`` the
    antagonist's strategy in ``H``.  Off the reachable histories the built
    strategies repeat the move of the longest recorded prefix.
    """
    from .core import TableStrategy, Level1Strategy
    from .simcheck import _oriented, forward_move_certificate

    table = ForwardRelationTable(table)
    Go, Ho = _oriented(G, protagonist), _oriented(H, protagonist)
    pi1, pi2_right = as_history_strategy(pi1), as_history_strategy(pi2_right)
    wit0 = forward_lift_check(table, delta, theta)
    if wit0 is None:
        raise TransferError("initial distributions are not related by the forward lifting")
    triples = [(p, (s,), _hist_dist(th)) for p, s, th in wit0.triples]
    prot_table: dict = {}
    anta_table: dict = {}
    levels = [ForwardLiftWitness(tuple(triples))]
    cert_cache: dict = {}
    for _ in range(horizon):
        nxt = []
        prot_parts: dict = {}
        anta_parts: dict = {}
        pending = []
        for p, e, th in triples:
            s, Th = e[-1], _last(th)
            mu = pi1(e)
            key = (s, Th, mu)
            cert = cert_cache.get(key)
            if key not in cert_cache:
                cert = forward_move_certificate(Go, Ho, s, Th, table, mu)
                cert_cache[key] = cert
            if cert is None:
                raise TransferError(f"no answer in the right structure to move {mu} at ({s}, {Th})")
            # antagonist's effective per-state moves on ⌈Th⌉ under pi2_right
            beta = {u: _mix([(q, pi2_right(h)) for h, q in th.items() if h[-1] == u]) for u in Th}
            # mix the pure-profile blocks with product weights
            pi2_acc: list = []
            wit_acc: dict = {}
            for profile, (pi2, wit) in cert.blocks.items():
                w = ONE
                for u, b in profile:
                    w *= beta[u].get(b, ZERO)
                if not w:
                    continue
                pi2_acc.append((w, pi2))
                for q, t, Tt in wit.triples:
                    wit_acc[(t, Tt)] = wit_acc.get((t, Tt), ZERO) + w * q
            pi2_e = _mix(pi2_acc)
            anta_parts.setdefault(e, []).append((p, pi2_e))
            for h in th:
                prot_parts.setdefault(h, []).append((p * th[h], cert.response[h[-1]]))
            pending.append((p, e, th, mu, pi2_e, cert, wit_acc))
        for h, parts in prot_parts.items():
            prot_table[h] = _mix(parts)
        for e, parts in anta_parts.items():
            anta_table[e] = _mix(parts)
        for p, e, th, mu, pi2_e, cert, wit_acc in pending:
            # history-level successor of th with this triple's response and pi2_right
            succ: dict = {}
            for h, q in th.items():
                for v, r in joint_step(Ho, h[-1], cert.response[h[-1]], pi2_right(h)).items():
                    succ[h + (v,)] = succ.get(h + (v,), ZERO) + q * r
            proj = _last(succ)
            for (t, Tt), q in wit_acc.items():
                if not q:
                    continue
                th_new = Distribution({hv: Tt.get(hv[-1], ZERO) * m / proj[hv[-1]]
                                       for hv, m in succ.items() if Tt.get(hv[-1], ZERO)})
                nxt.append((p * q, e + (t,), th_new))
        acc: dict = {}
        for p, e, th in nxt:
            acc[(e, th)] = acc.get((e, th), ZERO) + p
        triples = [(p, e, th) for (e, th), p in acc.items()]
        levels.append(ForwardLiftWitness(tuple(triples)))
    default_p = Level1Strategy({u: Distribution.point(Ho.actions_I[0]) for u in Ho.states})
    default_a = Level1Strategy({s: Distribution.point(Go.actions_II[0]) for s in Go.states})
    prot = TableStrategy(prot_table, default_p, horizon)
    anta = TableStrategy(anta_table, default_a, horizon)
    res = TransferResult(prot, anta, levels, {"off_support": "repeat move of longest recorded prefix"})
    res.certificate = verify_transfer(G, H, table, delta, theta, pi1, pi2_right, res, horizon, protagonist)
    return res


def _execution_levels(G: PGS, pi_I, pi_II, delta, horizon):
    return build_execution(G, pi_I, pi_II, delta, horizon).levels


def verify_transfer(G: PGS, H: PGS, table, delta, theta, pi1, pi2_right, res: TransferResult,
                    horizon: int, protagonist: str = PLAYER_I) -> dict:
    """Re-check a transfer: both executions are rebuilt from the strategies and
    each level must be decomposed by the recorded history-level witness."""
    if protagonist == PLAYER_I:
        left = _execution_levels(G, pi1, res.antagonist, delta, horizon)
        right = _execution_levels(H, res.protagonist, pi2_right, theta, horizon)
    else:
        left = _execution_levels(G, res.antagonist, pi1, delta, horizon)
        right = _execution_levels(H, pi2_right, res.protagonist, theta, horizon)
    table = ForwardRelationTable(table)
    pairs = set(table)
    for n, wit in enumerate(res.levels):
        hist_table = [(e, th) for _, e, th in wit.triples]
        check_forward_witness(hist_table, left[n], right[n], wit)
        for _, e, th in wit.triples:
            if (e[-1], _last(th)) not in pairs:
                raise WitnessError(f"level {n}: ({e[-1]}, {_last(th)}) is not in the relation")
        if forward_lift_check(table, _last(left[n]), _last(right[n])) is None:
            raise WitnessError(f"level {n}: projected distributions are not forward related")
    return {"verified": True, "levels": len(res.levels), "horizon": horizon,
            "off_support": "repeat move of longest recorded prefix"}


__all__ = [
    "ExecutionTree", "build_execution", "cone_probability", "TripleLevel", "TripleDecomposition",
    "triple_decomposition", "PathProbability", "exact_path_probability", "markov_chain_probability", "MonteCarloResult",
    "monte_carlo_path_probability", "wilson_interval", "TransferError", "TransferResult",
    "transfer_strategies", "verify_transfer", "BudgetError", "NODE_BUDGET",
]
