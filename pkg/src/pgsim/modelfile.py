"""The ``.pgs`` text format for game structures.

Example::

    name fig1
    actions I a1 a2
    actions II b1 b2
    props phi
    state s0
    state s1
    state s2 phi
    initial s0
    trans s0 a1 b1 -> s2
    trans s0 a1 b2 -> s0
    trans s0 a2 b1 -> s1:1
    trans s0 a2 b2 -> s2:1
    trans s1 * * -> s1
    trans s2 * * -> s2

``initial`` takes a state or a distribution ``s0:1/2 s1:1/2``.  ``*`` in a
``trans`` line ranges over the whole alphabet; a line with fewer wildcards
overrides a more general one.  Two lines of equal specificity covering the
same triple are an error unless a more specific line settles it.  ``#``
starts a comment.  A target without ``:p`` gets mass 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .core import PGS, PLAYER_I, PLAYER_II, Distribution, ModelError, validate_model


class ModelSyntaxError(ModelError):
    def __init__(self, msg: str, line: int, source: str = "<string>"):
        super().__init__(f"{source}:{line}: {msg}")
        self.line = line
        self.source = source


@dataclass(frozen=True)
class ModelDocument:
    game: PGS
    initial: Distribution


def _prob(text: str, lineno: int, source: str) -> Fraction:
    try:
        p = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ModelSyntaxError(f"bad probability {text!r}", lineno, source) from None
    if not 0 <= p <= 1:
        raise ModelSyntaxError(f"probability {text} outside [0, 1]", lineno, source)
    return p


def _dist(tokens: list, lineno: int, source: str) -> Distribution:
    out: dict = {}
    for tok in tokens:
        t, _, p = tok.partition(":")
        if not t:
            raise ModelSyntaxError(f"bad target {tok!r}", lineno, source)
        if t in out:
            raise ModelSyntaxError(f"target {t!r} listed twice", lineno, source)
        out[t] = _prob(p, lineno, source) if p else Fraction(1)
    if not out:
        raise ModelSyntaxError("empty distribution", lineno, source)
    try:
        return Distribution(out)
    except ModelError as e:
        raise ModelSyntaxError(str(e), lineno, source) from None


def parse_model(text: str, source: str = "<string>") -> ModelDocument:
    name = ""
    acts = {PLAYER_I: [], PLAYER_II: []}
    props: list = []
    states: list = []
    labels: dict = {}
    initial = None
    rules: dict = {}  # (s, a, b) pattern -> (dist, line)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "name":
            name = " ".join(rest)
        elif head == "actions":
            if not rest or rest[0] not in acts or len(rest) < 2:
                raise ModelSyntaxError("expected 'actions I|II <action>...'", lineno, source)
            acts[rest[0]].extend(rest[1:])
        elif head == "props":
            props.extend(rest)
        elif head == "state":
            if not rest:
                raise ModelSyntaxError("expected 'state <id> <prop>...'", lineno, source)
            if rest[0] in labels:
                raise ModelSyntaxError(f"state {rest[0]!r} declared twice", lineno, source)
            states.append(rest[0])
            labels[rest[0]] = rest[1:]
        elif head == "initial":
            if not rest:
                raise ModelSyntaxError("expected 'initial <state>' or a distribution", lineno, source)
            initial = _dist(rest, lineno, source)
        elif head == "trans":
            if "->" not in rest or rest.index("->") != 3:
                raise ModelSyntaxError("expected 'trans <s> <a> <b> -> <t>[:p] ...'", lineno, source)
            key = tuple(rest[:3])
            if key in rules:
                raise ModelSyntaxError(f"duplicate transition line for {' '.join(key)} "
                                       f"(first at line {rules[key][1]})", lineno, source)
            rules[key] = (_dist(rest[4:], lineno, source), lineno)
        else:
            raise ModelSyntaxError(f"unknown directive {head!r}", lineno, source)
    if not states:
        raise ModelSyntaxError("no states declared", 0, source)
    for key, (_, lineno) in rules.items():
        for x, pool, what in zip(key, (states, acts[PLAYER_I], acts[PLAYER_II]),
                                 ("state", "action of player I", "action of player II")):
            if x != "*" and x not in pool:
                raise ModelSyntaxError(f"unknown {what} {x!r}", lineno, source)
    # most specific line wins
    trans: dict = {}
    rank: dict = {}
    def wildness(key):
        return sum(x == "*" for x in key)

    # a tie only matters when no more specific line covers the triple
    for (s, a, b), (d, lineno) in sorted(rules.items(), key=lambda kv: (wildness(kv[0]), kv[1][1])):
        wild = wildness((s, a, b))
        for ss in (states if s == "*" else [s]):
            for aa in (acts[PLAYER_I] if a == "*" else [a]):
                for bb in (acts[PLAYER_II] if b == "*" else [b]):
                    k = (ss, aa, bb)
                    if k in rank:
                        if rank[k][0] == wild:
                            raise ModelSyntaxError(f"transition {ss} {aa} {bb} defined by two lines of "
                                                   f"equal specificity (lines {rank[k][1]} and "
                                                   f"{lineno})", lineno, source)
                        continue
                    rank[k] = (wild, lineno)
                    trans[k] = d
    if initial is None:
        initial = Distribution.point(states[0])
    raw = {"name": name, "states": states, "initial": max(initial, key=lambda s: (initial[s], -states.index(s)))
           if initial else states[0], "props": props, "labels": labels,
           "actions": acts, "transitions": trans}
    for s in initial:
        if s not in labels:
            raise ModelSyntaxError(f"unknown initial state {s!r}", 0, source)
    game = validate_model(raw)
    return ModelDocument(game, initial)


def load_model(path) -> ModelDocument:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path))


def format_model(G: PGS, initial: Distribution | None = None) -> str:
    """Canonical text; ``parse_model`` of the output gives back ``G``."""
    lines = []
    if G.name:
        lines.append(f"name {G.name}")
    lines.append("actions I " + " ".join(G.actions_I))
    lines.append("actions II " + " ".join(G.actions_II))
    if G.props:
        lines.append("props " + " ".join(G.props))
    for s in G.states:
        lab = [p for p in G.props if p in G.labels[s]]
        lines.append(" ".join(["state", s, *lab]))
    init = initial if initial is not None else Distribution.point(G.initial)
    if init.is_point():
        lines.append(f"initial {next(iter(init))}")
    else:
        lines.append("initial " + " ".join(f"{s}:{p}" for s, p in init.items()))
    for (s, a, b), d in G.delta.items():
        tgt = " ".join(t if p == 1 else f"{t}:{p}" for t, p in d.items())
        lines.append(f"trans {s} {a} {b} -> {tgt}")
    return "\n".join(lines) + "\n"


def data_path(name: str):
    """Path of a file shipped in the package corpus (``fig1.pgs``, ``random/r00.pgs``, ...)."""
    from importlib.resources import files

    return files("pgsim") / "data" / name


__all__ = ["ModelDocument", "ModelSyntaxError", "parse_model", "load_model", "format_model", "data_path"]
