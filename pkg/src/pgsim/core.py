"""Probabilistic game structures, exact distributions and level-1 strategies.

Everything in this module works over :class:`fractions.Fraction`; no floating
point is ever introduced here.  States, actions and propositions are plain
strings and every container preserves insertion order so that outputs are
reproducible.
"""
from __future__ import annotations

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

Number = Union[int, str, Fraction]

PLAYER_I = "I"
PLAYER_II = "II"
PLAYERS = (PLAYER_I, PLAYER_II)

#: Coalitions are restricted to the four subsets of the two players.
COALITIONS = (frozenset(), frozenset({PLAYER_I}), frozenset({PLAYER_II}),
              frozenset({PLAYER_I, PLAYER_II}))


class ModelError(ValueError):
    """Raised when a game structure or distribution is malformed."""


def as_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted here; pass a Fraction or 'num/den'")
    return Fraction(x)


class Distribution(Mapping):
    """Finite-support probability distribution with exact rational masses.

    Zero-mass entries are dropped at construction, so iteration yields the
    support.  Instances are immutable and hashable.
    """

    __slots__ = ("_p", "_hash")

    def __init__(self, entries: Mapping | Iterable = (), *, check: bool = True):
        items = entries.items() if isinstance(entries, Mapping) else entries
        p: dict = {}
        for k, v in items:
            v = as_fraction(v)
            if v < 0 or v > 1:
                raise ModelError(f"probability {v} of {k!r} outside [0,1]")
            if v:
                p[k] = p.get(k, Fraction(0)) + v
        if check and sum(p.values()) != 1:
            raise ModelError(f"distribution masses sum to {sum(p.values())}, not 1")
        self._p = p
        self._hash = None

    @classmethod
    def point(cls, x) -> "Distribution":
        return cls({x: Fraction(1)})

    @classmethod
    def uniform(cls, xs: Iterable) -> "Distribution":
        xs = list(dict.fromkeys(xs))
        if not xs:
            raise ModelError("uniform distribution over an empty set")
        return cls({x: Fraction(1, len(xs)) for x in xs})

    def __getitem__(self, k) -> Fraction:
        return self._p[k]

    def get(self, k, default=Fraction(0)):
        return self._p.get(k, default)

    def __iter__(self) -> Iterator:
        return iter(self._p)

    def __len__(self) -> int:
        return len(self._p)

    def __eq__(self, other) -> bool:
        if isinstance(other, Distribution):
            return self._p == other._p
        if isinstance(other, Mapping):
            return self._p == {k: v for k, v in other.items() if v}
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._p.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v}" for k, v in self._p.items())
        return f"Distribution({{{inner}}})"

    @property
    def support(self) -> frozenset:
        return frozenset(self._p)

    def mass(self, xs: Iterable) -> Fraction:
        return sum((self._p.get(x, Fraction(0)) for x in xs), Fraction(0))

    def is_point(self) -> bool:
        return len(self._p) == 1

    def map(self, f: Callable) -> "Distribution":
        """Push the distribution forward along ``f``."""
        out: dict = {}
        for k, v in self._p.items():
            fk = f(k)
            out[fk] = out.get(fk, Fraction(0)) + v
        return Distribution(out, check=False)

    def to_json(self) -> dict:
        return {str(k): str(v) for k, v in self._p.items()}

    @classmethod
    def from_json(cls, data: Mapping) -> "Distribution":
        return cls({k: Fraction(v) for k, v in data.items()})


MixedMove = Distribution


def convex_combine(distributions: Sequence[Mapping], weights: Sequence[Number]) -> Distribution:
    """Pointwise sum of ``weights[i] * distributions[i]``."""
    if len(distributions) != len(weights):
        raise ModelError("distributions and weights differ in length")
    ws = [as_fraction(w) for w in weights]
    if sum(ws) != 1:
        raise ModelError(f"weights sum to {sum(ws)}, not 1")
    if any(w < 0 for w in ws):
        raise ModelError("negative weight")
    out: dict = {}
    for d, w in zip(distributions, ws):
        if not w:
            continue
        for k, v in d.items():
            out[k] = out.get(k, Fraction(0)) + w * v
    return Distribution(out)


# ---------------------------------------------------------------------------
# game structures


@dataclass(frozen=True)
class ProbabilisticGameStructure:
    states: tuple
    initial: str
    props: tuple
    labels: Mapping  # state -> frozenset of props
    actions_I: tuple
    actions_II: tuple
    delta: Mapping  # (state, a, b) -> Distribution
    name: str = field(default="", compare=False)

    def label(self, s) -> frozenset:
        return self.labels[s]

    def step(self, s, a, b) -> Distribution:
        return self.delta[(s, a, b)]

    def actions(self, player: str) -> tuple:
        return self.actions_I if player == PLAYER_I else self.actions_II

    def sat(self, prop: str) -> frozenset:
        return frozenset(s for s in self.states if prop in self.labels[s])

    def swap_players(self) -> "ProbabilisticGameStructure":
        """The same game with the roles of players I and II exchanged."""
        delta = {(s, b, a): d for (s, a, b), d in self.delta.items()}
        return ProbabilisticGameStructure(
            self.states, self.initial, self.props, self.labels,
            self.actions_II, self.actions_I, delta, self.name)

    def is_deterministic(self) -> bool:
        return all(d.is_point() for d in self.delta.values())


PGS = ProbabilisticGameStructure


def validate_model(raw: Mapping) -> ProbabilisticGameStructure:
    """Build a structure from a plain description and check every invariant.

    ``raw`` has keys ``states``, ``initial``, ``props``, ``labels`` (state ->
    iterable of props), ``actions`` (``{"I": [...], "II": [...]}``) and
    ``transitions`` (mapping ``(s, a, b) -> {t: p}``).  Unavailable actions are
    expected to be aliased by the model author; totality is checked here.
    """
    states = tuple(dict.fromkeys(raw["states"]))
    if not states:
        raise ModelError("model has no states")
    props = tuple(dict.fromkeys(raw.get("props", ())))
    acts = raw["actions"]
    acts_I = tuple(dict.fromkeys(acts[PLAYER_I]))
    acts_II = tuple(dict.fromkeys(acts[PLAYER_II]))
    if not acts_I or not acts_II:
        raise ModelError("every player needs a nonempty action alphabet")
    initial = raw.get("initial", states[0])
    if initial not in states:
        raise ModelError(f"unknown initial state {initial!r}")

    state_set = set(states)
    prop_set = set(props)
    raw_labels = raw.get("labels", {})
    for s in raw_labels:
        if s not in state_set:
            raise ModelError(f"label given for unknown state {s!r}")
    labels = {}
    for s in states:
        ls = frozenset(raw_labels.get(s, ()))
        unknown = ls - prop_set
        if unknown:
            raise ModelError(f"state {s!r} labelled with unknown proposition {sorted(unknown)[0]!r}")
        labels[s] = ls

    delta = {}
    trans = raw["transitions"]
    for key, dist in trans.items():
        s, a, b = key
        if s not in state_set:
            raise ModelError(f"transition from unknown state {s!r}")
        if a not in acts_I:
            raise ModelError(f"unknown action {a!r} of player I")
        if b not in acts_II:
            raise ModelError(f"unknown action {b!r} of player II")
        try:
            d = dist if isinstance(dist, Distribution) else Distribution(dist)
        except ModelError as e:
            raise ModelError(f"transition {key}: {e}") from None
        for t in d:
            if t not in state_set:
                raise ModelError(f"transition {key} targets unknown state {t!r}")
        delta[key] = d
    for s in states:
        for a in acts_I:
            for b in acts_II:
                if (s, a, b) not in delta:
                    raise ModelError(f"missing transition ({s}, {a}, {b})")
    ordered = {(s, a, b): delta[(s, a, b)] for s in states for a in acts_I for b in acts_II}
    return ProbabilisticGameStructure(states, initial, props, labels, acts_I, acts_II,
                                      ordered, raw.get("name", ""))


# ---------------------------------------------------------------------------
# stepping


def joint_step(G: PGS, s, mu_I: Mapping, mu_II: Mapping) -> Distribution:
    """Successor distribution at ``s`` when both players play mixed moves."""
    out: dict = {}
    for a, pa in mu_I.items():
        if not pa:
            continue
        for b, pb in mu_II.items():
            if not pb:
                continue
            w = pa * pb
            for t, pt in G.delta[(s, a, b)].items():
                out[t] = out.get(t, Fraction(0)) + w * pt
    return Distribution(out)


def lifted_step(G: PGS, dist: Mapping, strat_I, strat_II) -> Distribution:
    """Successor distribution of a state distribution under level-1 strategies.

    ``strat_I``/``strat_II`` map each state to a mixed move.
    """
    out: dict = {}
    for s, ps in dist.items():
        if not ps:
            continue
        for t, pt in joint_step(G, s, strat_I[s], strat_II[s]).items():
            out[t] = out.get(t, Fraction(0)) + ps * pt
    return Distribution(out)


# ---------------------------------------------------------------------------
# strategies


class Level1Strategy(Mapping):
    """A per-state mixed move for one player (memoryless, depth one)."""

    __slots__ = ("_moves", "unconstrained")

    def __init__(self, moves: Mapping, unconstrained: Iterable = ()):
        self._moves = {s: m if isinstance(m, Distribution) else Distribution(m)
                       for s, m in moves.items()}
        # states where the move was chosen arbitrarily (see reweighted_mix)
        self.unconstrained = frozenset(unconstrained)

    @classmethod
    def pure(cls, G: PGS, player: str, choice: Mapping | str) -> "Level1Strategy":
        if isinstance(choice, str):
            return cls({s: Distribution.point(choice) for s in G.states})
        return cls({s: Distribution.point(choice[s]) for s in G.states})

    @classmethod
    def uniform(cls, G: PGS, player: str) -> "Level1Strategy":
        return cls({s: Distribution.uniform(G.actions(player)) for s in G.states})

    def __getitem__(self, s) -> Distribution:
        return self._moves[s]

    def __iter__(self):
        return iter(self._moves)

    def __len__(self):
        return len(self._moves)

    def __eq__(self, other):
        if isinstance(other, Level1Strategy):
            return self._moves == other._moves
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._moves.items()))

    def __repr__(self):
        return f"Level1Strategy({self._moves!r})"

    def defined_on(self, G: PGS) -> bool:
        return all(s in self._moves for s in G.states)


def mix_strategies(strategies: Sequence[Level1Strategy], weights: Sequence[Number]) -> Level1Strategy:
    """Pointwise convex combination of level-1 strategies."""
    if not strategies:
        raise ModelError("nothing to mix")
    return Level1Strategy({s: convex_combine([st[s] for st in strategies], weights)
                           for s in strategies[0]})


def reweighted_mix(strategies: Sequence[Level1Strategy], weights: Sequence[Number],
                   distributions: Sequence[Mapping]) -> Level1Strategy:
    """Mixture whose weight at state ``s`` is proportional to ``p_i * D_i(s)``.

    Stepping the combined distribution ``sum p_i D_i`` with the result gives
    the same successor distribution as stepping each ``D_i`` with its own
    strategy and mixing afterwards.  Where the combined mass is zero the
    first strategy's move is used and the state is recorded in
    ``unconstrained``.
    """
    ws = [as_fraction(w) for w in weights]
    if sum(ws) != 1:
        raise ModelError(f"weights sum to {sum(ws)}, not 1")
    moves = {}
    free = []
    for s in strategies[0]:
        local = [w * d.get(s, Fraction(0)) for w, d in zip(ws, distributions)]
        total = sum(local)
        if total == 0:
            moves[s] = strategies[0][s]
            free.append(s)
            continue
        moves[s] = convex_combine([st[s] for st in strategies], [x / total for x in local])
    return Level1Strategy(moves, free)


class HistoryStrategy:
    """A strategy reading finite nonempty state histories.

    ``horizon`` is the longest history length the strategy is guaranteed to
    be total on (``None`` for unbounded).
    """

    horizon: int | None = None
    memoryless = False

    def move(self, history: tuple) -> Distribution:
        raise NotImplementedError

    def __call__(self, history: tuple) -> Distribution:
        return self.move(tuple(history))


class MemorylessStrategy(HistoryStrategy):
    memoryless = True

    def __init__(self, level1: Level1Strategy):
        self.level1 = level1

    def move(self, history):
        return self.level1[history[-1]]

    def __repr__(self):
        return f"MemorylessStrategy({self.level1!r})"


class StagedStrategy(HistoryStrategy):
    """Plays ``stages[n-1]`` on histories of length ``n``; the last stage repeats."""

    def __init__(self, stages: Sequence[Level1Strategy]):
        if not stages:
            raise ModelError("staged strategy needs at least one stage")
        self.stages = list(stages)
        self.horizon = None

    def move(self, history):
        i = min(len(history), len(self.stages)) - 1
        return self.stages[i][history[-1]]


class TableStrategy(HistoryStrategy):
    """Explicit history table.

    Histories missing from the table take the move of their longest proper
    prefix in the table; failing that, ``default`` (a level-1 strategy).
    """

    def __init__(self, table: Mapping, default: Level1Strategy | None = None,
                 horizon: int | None = None):
        self.table = dict(table)
        self.default = default
        self.horizon = horizon if horizon is not None else max(
            (len(h) for h in self.table), default=0)

    def move(self, history):
        for n in range(len(history), 0, -1):
            m = self.table.get(history[:n])
            if m is not None:
                return m
        if self.default is None:
            raise KeyError(f"strategy undefined on history {history}")
        return self.default[history[-1]]


class FunctionStrategy(HistoryStrategy):
    def __init__(self, fn: Callable[[tuple], Mapping], horizon: int | None = None):
        self.fn = fn
        self.horizon = horizon

    def move(self, history):
        m = self.fn(history)
        return m if isinstance(m, Distribution) else Distribution(m)


def as_history_strategy(x) -> HistoryStrategy:
    if isinstance(x, HistoryStrategy):
        return x
    if isinstance(x, Level1Strategy):
        return MemorylessStrategy(x)
    if callable(x):
        return FunctionStrategy(x)
    return MemorylessStrategy(Level1Strategy(x))


# ---------------------------------------------------------------------------
# plays


@dataclass(frozen=True)
class Play:
    """Alternating sequence ``s0 (a1,b1) s1 (a2,b2) s2 ...``."""

    states: tuple
    actions: tuple = ()

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ModelError("a play has one more state than joint actions")

    def __len__(self) -> int:
        return len(self.actions)

    def state(self, i: int):
        return self.states[i]

    def segment(self, i: int, j: int) -> "Play":
        return Play(self.states[i:j + 1], self.actions[i:j])

    def check(self, G: PGS) -> None:
        for i, (a, b) in enumerate(self.actions):
            if G.step(self.states[i], a, b).get(self.states[i + 1]) == 0:
                raise ModelError(f"step {i} of play has probability zero")
