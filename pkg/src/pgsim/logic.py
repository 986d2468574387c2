"""PATL syntax: AST, parser, printer, dualities and fragment classification.

Concrete syntax (ASCII canonical, Unicode aliases accepted)::

    state  ::= and ('|' and)*
    and    ::= unary ('&' unary)*
    unary  ::= '!' unary | 'true' | 'false' | PROP | '(' state ')' | strat
    strat  ::= '<<' [player (',' player)*] '>>' '[' cmp NUMBER ']' path
    path   ::= 'X' unary | 'F' [bound] unary | 'G' [bound] unary
             | unary ('U' | 'R') [bound] unary | '(' path ')'
    bound  ::= '<=' INT
    cmp    ::= '<' | '>' | '<=' | '>='
    NUMBER ::= decimal | INT '/' INT

``F`` and ``G`` are desugared into until/release, and a release under a
strategy modality is rewritten into an until with the comparison reversed
and the threshold complemented.  The AST therefore produced by
:func:`parse_formula` never contains :class:`Release`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Union

from .core import PLAYER_I, PLAYER_II

CMPS = ("<", ">", "<=", ">=")
FLIP = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int, text: str = ""):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos
        self.text = text


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Prop:
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    value: bool
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Not:
    arg: "StateFormula"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class And:
    left: "StateFormula"
    right: "StateFormula"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Or:
    left: "StateFormula"
    right: "StateFormula"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Next:
    arg: "StateFormula"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Until:
    left: "StateFormula"
    right: "StateFormula"
    bound: int | None = None  # None means unbounded
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Release:
    left: "StateFormula"
    right: "StateFormula"
    bound: int | None = None
    pos: int = field(default=-1, compare=False, repr=False)


PathFormula = Union[Next, Until, Release]


@dataclass(frozen=True)
class Strategic:
    coalition: frozenset
    cmp: str
    threshold: Fraction
    path: PathFormula
    pos: int = field(default=-1, compare=False, repr=False)

    def __post_init__(self):
        if self.cmp not in CMPS:
            raise ValueError(f"bad comparison {self.cmp!r}")
        if not 0 <= self.threshold <= 1:
            raise ValueError(f"threshold {self.threshold} outside [0,1]")
        if not self.coalition <= {PLAYER_I, PLAYER_II}:
            raise ValueError(f"bad coalition {set(self.coalition)}")


StateFormula = Union[Prop, Const, Not, And, Or, Strategic]

TRUE = Const(True)
FALSE = Const(False)


def negate(phi: StateFormula) -> StateFormula:
    """``¬phi`` with double negations and constants simplified."""
    if isinstance(phi, Not):
        return phi.arg
    if isinstance(phi, Const):
        return Const(not phi.value)
    return Not(phi)


def negate_path(psi: PathFormula) -> PathFormula:
    if isinstance(psi, Next):
        return Next(negate(psi.arg))
    if isinstance(psi, Until):
        return Release(negate(psi.left), negate(psi.right), psi.bound)
    return Until(negate(psi.left), negate(psi.right), psi.bound)


def dualize(cmp: str, threshold, psi: PathFormula) -> tuple:
    """``(⋈, α, ψ) ↦ (⋈̃, 1-α, ¬ψ)``; both sides define the same state formula."""
    return FLIP[cmp], 1 - Fraction(threshold), negate_path(psi)


def strategic(coalition, cmp: str, threshold, path: PathFormula) -> Strategic:
    """Build a modality, eliminating release in favour of until."""
    threshold = Fraction(threshold)
    if isinstance(path, Release):
        cmp, threshold, path = dualize(cmp, threshold, path)
    return Strategic(frozenset(coalition), cmp, threshold, path)


def subformulas(phi):
    """Post-order iteration over state and path subformulas."""
    if isinstance(phi, (Not, Next)):
        yield from subformulas(phi.arg)
    elif isinstance(phi, (And, Or, Until, Release)):
        yield from subformulas(phi.left)
        yield from subformulas(phi.right)
    elif isinstance(phi, Strategic):
        yield from subformulas(phi.path)
    yield phi


def modal_depth(phi) -> int:
    if isinstance(phi, (Prop, Const)):
        return 0
    if isinstance(phi, (Not, Next)):
        return modal_depth(phi.arg)
    if isinstance(phi, (And, Or, Until, Release)):
        return max(modal_depth(phi.left), modal_depth(phi.right))
    return 1 + modal_depth(phi.path)


def propositions(phi) -> set:
    return {f.name for f in subformulas(phi) if isinstance(f, Prop)}


# ---------------------------------------------------------------------------
# printing


def _num(x: Fraction) -> str:
    return str(Fraction(x))


def _coal(c: frozenset) -> str:
    return ",".join(p for p in (PLAYER_I, PLAYER_II) if p in c)


def _bound(k) -> str:
    return "" if k is None else f"<={k}"


def to_text(phi) -> str:
    """Canonical ASCII rendering; ``parse_formula(to_text(phi)) == phi``."""
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, Const):
        return "true" if phi.value else "false"
    if isinstance(phi, Not):
        return "!" + to_text(phi.arg)
    if isinstance(phi, And):
        return f"({to_text(phi.left)} & {to_text(phi.right)})"
    if isinstance(phi, Or):
        return f"({to_text(phi.left)} | {to_text(phi.right)})"
    if isinstance(phi, Strategic):
        return f"<<{_coal(phi.coalition)}>>[{phi.cmp}{_num(phi.threshold)}] {to_text(phi.path)}"
    if isinstance(phi, Next):
        return "X " + to_text(phi.arg)
    if isinstance(phi, Until):
        return f"({to_text(phi.left)} U{_bound(phi.bound)} {to_text(phi.right)})"
    if isinstance(phi, Release):
        return f"({to_text(phi.left)} R{_bound(phi.bound)} {to_text(phi.right)})"
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lcoal><<|⟨⟨|⟪)
  | (?P<rcoal>>>|⟩⟩|⟫)
  | (?P<cmp><=|>=|≤|≥|<|>)
  | (?P<num>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<punct>[\[\](),!&|¬∧∨◯○◇□])
""", re.VERBOSE)

_ALIASES = {"≤": "<=", "≥": ">=", "¬": "!", "∧": "&", "∨": "|", "◯": "X", "○": "X",
            "◇": "F", "□": "G", "⟨⟨": "<<", "⟩⟩": ">>", "⟪": "<<", "⟫": ">>"}
KEYWORDS = {"X", "F", "G", "U", "R", "true", "false"}


class _Tok(NamedTuple):
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[i]!r}", i, text)
        kind = m.lastgroup
        s = _ALIASES.get(m.group(), m.group())
        if kind == "punct" and s in ("X", "F", "G"):
            kind = "ident"
        if kind != "ws":
            toks.append(_Tok(kind, s, i))
        i = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise FormulaSyntaxError(msg, tok.pos, self.text)

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.text != text:
            self.error(f"expected {text!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def state(self):
        left = self.conj()
        while self.peek().text == "|":
            t = self.next()
            left = Or(left, self.conj(), pos=t.pos)
        return left

    def conj(self):
        left = self.unary()
        while self.peek().text == "&":
            t = self.next()
            left = And(left, self.unary(), pos=t.pos)
        return left

    def unary(self):
        t = self.peek()
        if t.text == "!":
            self.next()
            return negate_keep(self.unary(), t.pos)
        if t.kind == "lcoal":
            return self.strat()
        if t.text == "(":
            self.next()
            phi = self.state()
            self.expect(")")
            return phi
        if t.kind == "ident":
            if t.text == "true":
                self.next()
                return Const(True, pos=t.pos)
            if t.text == "false":
                self.next()
                return Const(False, pos=t.pos)
            if t.text in KEYWORDS:
                self.error(f"temporal operator {t.text!r} outside a strategy modality")
            self.next()
            return Prop(t.text, pos=t.pos)
        self.error(f"unexpected {t.text or 'end of input'!r}")

    def strat(self):
        start = self.next()
        coalition = set()
        while self.peek().kind != "rcoal":
            t = self.next()
            if t.text not in (PLAYER_I, PLAYER_II):
                self.error(f"unknown player {t.text!r}", t)
            coalition.add(t.text)
            if self.peek().text == ",":
                self.next()
            elif self.peek().kind != "rcoal":
                self.error("expected ',' or '>>'")
        self.next()
        self.expect("[")
        c = self.next()
        if c.kind != "cmp":
            self.error("expected a comparison", c)
        n = self.next()
        if n.kind != "num":
            self.error("expected a threshold", n)
        alpha = Fraction(n.text)
        if not 0 <= alpha <= 1:
            self.error(f"threshold {n.text} outside [0,1]", n)
        self.expect("]")
        path = self.path()
        cmp = c.text
        if isinstance(path, Release):
            cmp, alpha, path = dualize(cmp, alpha, path)
        return Strategic(frozenset(coalition), cmp, alpha, path, pos=start.pos)

    def bound(self):
        if self.peek().text == "<=":
            self.next()
            k = self.next()
            if k.kind != "num" or not k.text.isdigit():
                self.error("expected an integer bound", k)
            return int(k.text)
        return None

    def path(self):
        t = self.peek()
        if t.text == "X":
            self.next()
            return Next(self.unary(), pos=t.pos)
        if t.text == "F":
            self.next()
            k = self.bound()
            return Until(Const(True), self.unary(), k, pos=t.pos)
        if t.text == "G":
            self.next()
            k = self.bound()
            return Release(Const(False), self.unary(), k, pos=t.pos)
        if t.text == "(":
            save = self.i
            self.next()
            try:
                p = self.path()
                self.expect(")")
                return p
            except FormulaSyntaxError:
                self.i = save
        left = self.unary()
        op = self.peek()
        if op.text not in ("U", "R"):
            self.error("expected a path operator (X, F, G, U or R)")
        self.next()
        k = self.bound()
        right = self.unary()
        cls = Until if op.text == "U" else Release
        return cls(left, right, k, pos=op.pos)


def negate_keep(phi, pos):
    if isinstance(phi, Const):
        return Const(not phi.value, pos=pos)
    return Not(phi, pos=pos)


def parse_formula(text: str) -> StateFormula:
    p = _Parser(text)
    phi = p.state()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return phi


def parse_path(text: str) -> PathFormula:
    """Parse a bare path formula such as ``F<=3 phi`` or ``G !phi``."""
    p = _Parser(text)
    psi = p.path()
    if p.peek().kind != "eof":
        p.error(f"trailing input {p.peek().text!r}")
    return psi


def read_formula_file(text: str) -> list:
    """One formula per line; blank lines and ``#`` comments ignored."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_formula(line))
        except FormulaSyntaxError as e:
            raise FormulaSyntaxError(f"line {lineno}: {e}", e.pos, line) from None
    return out


# ---------------------------------------------------------------------------
# fragments


class Fragment(NamedTuple):
    kind: str  # "A-PATL", "L+" or "FULL"
    coalition: frozenset | None = None

    def __str__(self):
        if self.kind == "FULL":
            return "FULL"
        return f"{self.kind}({_coal(self.coalition) or '∅'})"


def _in_fragment(phi, coalition: frozenset, negation_anywhere: bool) -> bool:
    if isinstance(phi, (Prop, Const)):
        return True
    if isinstance(phi, Not):
        if negation_anywhere:
            return _in_fragment(phi.arg, coalition, True)
        return isinstance(phi.arg, (Prop, Const))
    if isinstance(phi, (And, Or)):
        return (_in_fragment(phi.left, coalition, negation_anywhere)
                and _in_fragment(phi.right, coalition, negation_anywhere))
    if isinstance(phi, Strategic):
        if not phi.coalition <= coalition:
            return False
        # the negation-closed fragment admits any comparison except on unbounded until
        if not negation_anywhere and phi.cmp not in (">", ">="):
            return False
        psi = phi.path
        if isinstance(psi, Next):
            return _in_fragment(psi.arg, coalition, negation_anywhere)
        if isinstance(psi, Until):
            if psi.bound is None and phi.cmp != ">":
                return False
            return (_in_fragment(psi.left, coalition, negation_anywhere)
                    and _in_fragment(psi.right, coalition, negation_anywhere))
        return False
    raise TypeError(f"not a state formula: {phi!r}")


def classify_fragment(phi: StateFormula, coalition=frozenset({PLAYER_I})) -> set:
    """Every fragment (relative to ``coalition``) that ``phi`` belongs to."""
    coalition = frozenset(coalition)
    tags = {Fragment("FULL")}
    if _in_fragment(phi, coalition, False):
        tags.add(Fragment("A-PATL", coalition))
    if _in_fragment(phi, coalition, True):
        tags.add(Fragment("L+", coalition))
    return tags


def in_a_patl(phi, coalition=frozenset({PLAYER_I})) -> bool:
    return _in_fragment(phi, frozenset(coalition), False)


def in_l_plus(phi, coalition=frozenset({PLAYER_I})) -> bool:
    return _in_fragment(phi, frozenset(coalition), True)
