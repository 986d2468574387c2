"""Quantitative model checking of PATL over probabilistic game structures.

Values ``⟨A⟩ψ`` are computed with the quantitative predecessor operator:
at each state the coalition ``A`` and its complement play a one-shot matrix
game whose payoffs are expected continuation values.  Next and bounded
operators unfold a fixed number of times and are evaluated in exact
rational arithmetic.  Unbounded until is the least fixed point (iterated
from below); unbounded release is the greatest (iterated from above); both
iterate in binary floating point and always report residual, iteration
count and whether the stopping rule fired before the cap.

Iterate ``n`` of either fixed point equals the bounded value with bound
``n``: iterate 0 is the indicator of the right-hand argument.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from .core import PGS, PLAYER_I, PLAYER_II, Distribution, Level1Strategy, StagedStrategy, MemorylessStrategy
from .logic import (And, Const, Next, Not, Or, Prop, Strategic, Until, dualize,
                    negate_path, to_text)

EPS_VI = 1e-9
MAX_ITERS = 100_000
BAND_FACTOR = 10
EXACT_BOUND_LIMIT = 64  # bounded operators above this bound are unfolded in floats
FLOAT_TOL = 1e-12
NOISE_FLOOR = 1e-14
# the geometric tail estimate undershoots power-law convergence (by 2x for
# harmonic residuals); reported error bounds carry this safety factor
TAIL_SAFETY = 4

NOTE_UNATTAINED = ("unbounded until with '>=': the value is a supremum and may not be "
                   "attained by any strategy")


# ---------------------------------------------------------------------------
# matrix games


@dataclass(frozen=True)
class GameSolution:
    value: object
    row: tuple  # row player's (maximiser's) mixed move
    col: tuple  # column player's (minimiser's) mixed move


def _payoffs(M, x, y):
    cols = [sum(x[i] * M[i][j] for i in range(len(M))) for j in range(len(M[0]))]
    rows = [sum(M[i][j] * y[j] for j in range(len(y))) for i in range(len(M))]
    return cols, rows


def _certify(M, sol: GameSolution, exact: bool) -> bool:
    cols, rows = _payoffs(M, sol.row, sol.col)
    tol = 0 if exact else FLOAT_TOL
    return min(cols) >= sol.value - tol and max(rows) <= sol.value + tol


def _tableau_game(M, exact: bool) -> GameSolution:
    """Solve via ``max Σv : (M+c) v <= 1, v >= 0`` with Bland's rule."""
    m, n = len(M), len(M[0])
    one = Fraction(1) if exact else 1.0
    zero = one - one
    tol = 0 if exact else FLOAT_TOL
    shift = one - min(min(r) for r in M)
    T = [[M[i][j] + shift for j in range(n)] + [one if k == i else zero for k in range(m)] + [one]
         for i in range(m)]
    c = [-one] * n + [zero] * m
    basis = [n + i for i in range(m)]
    while True:
        enter = next((j for j in range(n + m) if c[j] < -tol), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > tol:
                r = T[i][-1] / a
                if best is None or r < best[0] - tol or (abs(r - best[0]) <= tol and basis[i] < basis[best[1]]):
                    best = (r, i)
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [vi - f * vr for vi, vr in zip(T[i], T[r])]
        f = c[enter]
        c = [ci - f * vr for ci, vr in zip(c, T[r][:-1])]
        basis[r] = enter
    v = [zero] * n
    for i, b in enumerate(basis):
        if b < n:
            v[b] = T[i][-1]
    u = [c[n + i] for i in range(m)]
    if not exact:
        v = [max(x, 0.0) for x in v]
        u = [max(x, 0.0) for x in u]
    sv, su = sum(v), sum(u)
    value = one / sv - shift
    return GameSolution(value, tuple(x / su for x in u), tuple(x / sv for x in v))


def matrix_game_value(M, exact: bool | None = None) -> GameSolution:
    """Value and optimal mixed moves of the zero-sum game ``M`` (rows maximise).

    ``exact`` defaults to whether every entry is rational.  Float solutions
    that fail re-verification are recomputed exactly.
    """
    M = [list(r) for r in M]
    if not M or not M[0] or any(len(r) != len(M[0]) for r in M):
        raise ValueError("matrix game needs a nonempty rectangular matrix")
    if exact is None:
        exact = all(isinstance(v, (int, Fraction)) for r in M for v in r)
    if exact:
        M = [[Fraction(v) for v in r] for r in M]
    m, n = len(M), len(M[0])
    one = Fraction(1) if exact else 1.0
    zero = one - one

    def unit(k, i):
        return tuple(one if j == i else zero for j in range(k))

    rowmin = [min(r) for r in M]
    colmax = [max(M[i][j] for i in range(m)) for j in range(n)]
    lo, hi = max(rowmin), min(colmax)
    if hi - lo <= (0 if exact else 1e-15):
        sol = GameSolution(lo, unit(m, rowmin.index(lo)), unit(n, colmax.index(hi)))
    elif m == 2 and n == 2:
        (a, b), (c, d) = M
        den = a + d - b - c
        p, q = (d - c) / den, (d - b) / den
        sol = GameSolution((a * d - b * c) / den, (p, one - p), (q, one - q))
    else:
        sol = _tableau_game(M, exact)
    if _certify(M, sol, exact):
        return sol
    if exact:
        raise AssertionError("exact matrix game solution failed verification")
    ex = matrix_game_value([[Fraction(v) for v in r] for r in M], exact=True)
    return GameSolution(float(ex.value), tuple(map(float, ex.row)), tuple(map(float, ex.col)))


# ---------------------------------------------------------------------------
# coalition views


def complement(coalition) -> frozenset:
    return frozenset({PLAYER_I, PLAYER_II}) - frozenset(coalition)


class GameView:
    """A structure seen as a two-sided game between a coalition and the rest.

    ``rows`` are protagonist moves and ``cols`` antagonist moves.  For the
    full coalition the protagonist picks joint actions against a trivial
    antagonist; for the empty coalition it is the other way round.
    """

    def __init__(self, G: PGS, coalition):
        self.G = G
        self.coalition = frozenset(coalition)
        self.index = {s: i for i, s in enumerate(G.states)}
        A, B = G.actions_I, G.actions_II
        joint = [(a, b) for a in A for b in B]
        if self.coalition == {PLAYER_I}:
            self.rows, self.cols = list(A), list(B)
            key = lambda p, q: (p, q)  # noqa: E731
        elif self.coalition == {PLAYER_II}:
            self.rows, self.cols = list(B), list(A)
            key = lambda p, q: (q, p)  # noqa: E731
        elif self.coalition == {PLAYER_I, PLAYER_II}:
            self.rows, self.cols = joint, [()]
            key = lambda p, q: p  # noqa: E731
        elif not self.coalition:
            self.rows, self.cols = [()], joint
            key = lambda p, q: q  # noqa: E731
        else:
            raise ValueError(f"unsupported coalition {set(coalition)}")
        self.key = key
        self.exact = []
        self.approx = []
        for s in G.states:
            ex = [[[(self.index[t], pr) for t, pr in G.step(s, *key(p, q)).items()]
                   for q in self.cols] for p in self.rows]
            self.exact.append(ex)
            self.approx.append([[[(t, float(pr)) for t, pr in cell] for cell in row] for row in ex])

    def supports(self, i: int, p: int, q: int) -> list:
        return [t for t, _ in self.exact[i][p][q]]

    def matrix(self, i: int, f: list, exact: bool) -> list:
        cells = self.exact[i] if exact else self.approx[i]
        return [[sum(pr * f[t] for t, pr in cell) for cell in row] for row in cells]


_VIEWS: dict = {}


def game_view(G: PGS, coalition) -> GameView:
    key = (id(G), frozenset(coalition))
    hit = _VIEWS.get(key)
    if hit is None or hit[0] is not G:
        if len(_VIEWS) > 256:
            _VIEWS.clear()
        hit = (G, GameView(G, coalition))
        _VIEWS[key] = hit
    return hit[1]


def ppre(G: PGS, coalition, f: Mapping, exact: bool | None = None) -> dict:
    """Quantitative predecessor: per state, the matrix-game value of ``f`` after one step."""
    view = game_view(G, coalition)
    vec = [f[s] for s in G.states]
    if exact is None:
        exact = all(isinstance(v, (int, Fraction)) for v in vec)
    out = {}
    for i, s in enumerate(G.states):
        out[s] = matrix_game_value(view.matrix(i, vec, exact), exact).value
    return out


# ---------------------------------------------------------------------------
# value functions


@dataclass
class ValueFunction:
    values: dict
    exact: bool
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    error: float = 0.0  # bound (exact) or estimate (float) on |value - true value|
    kind: str = ""
    coalition: frozenset = frozenset()
    moves: list = field(default_factory=list)  # per iteration: state -> GameSolution
    trace: list = field(default_factory=list)  # per iteration: state -> value (if recorded)
    notes: list = field(default_factory=list)

    def __getitem__(self, s):
        return self.values[s]

    def status(self) -> str:
        if self.exact:
            return "exact"
        return "converged" if self.converged else "unconverged"

    def to_json(self) -> dict:
        return {"values": {s: _num(v) for s, v in self.values.items()},
                "exact": self.exact, "status": self.status(), "iterations": self.iterations,
                "residual": _num(self.residual), "error_bound": _num(self.error),
                "kind": self.kind, "notes": list(self.notes)}


def _num(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    if isinstance(x, int):
        return str(x)
    return float(x)


def _step(view: GameView, kind: str, x: list, S1: list, S2: list, exact: bool):
    """One unfolding of ``φ₂ ∨ (φ₁ ∧ Ppre x)`` (until) or ``φ₂ ∧ (φ₁ ∨ Ppre x)`` (release)."""
    one = Fraction(1) if exact else 1.0
    zero = one - one
    out = []
    sols = {}
    for i in range(len(x)):
        if kind == "U":
            if S2[i]:
                out.append(one)
                continue
            if not S1[i]:
                out.append(zero)
                continue
        else:
            if not S2[i]:
                out.append(zero)
                continue
            if S1[i]:
                out.append(one)
                continue
        sol = matrix_game_value(view.matrix(i, x, exact), exact)
        sols[i] = sol
        v = sol.value
        if not exact:
            v = min(1.0, max(0.0, v))
        out.append(v)
    return out, sols


def _solution_map(G, sols: dict) -> dict:
    return {G.states[i]: sol for i, sol in sols.items()}


def path_value(G: PGS, coalition, kind: str, bound: int | None, S1, S2, *,
               eps: float = EPS_VI, max_iters: int = MAX_ITERS, record: bool = False,
               exact: bool | None = None) -> ValueFunction:
    """Value of ``X S2`` (``kind='X'``), ``S1 U S2`` or ``S1 R S2`` for ``coalition``."""
    view = game_view(G, coalition)
    states = G.states
    S1 = [s in S1 for s in states]
    S2 = [s in S2 for s in states]
    coalition = frozenset(coalition)
    if kind == "X":
        ex = True if exact is None else exact
        ind = [Fraction(int(b)) if ex else float(b) for b in S2]
        sols = {i: matrix_game_value(view.matrix(i, ind, ex), ex) for i in range(len(states))}
        vals = {states[i]: sol.value for i, sol in sols.items()}
        return ValueFunction(vals, ex, 1, 0.0, True, 0.0, "X", coalition,
                             [_solution_map(G, sols)], [vals] if record else [])
    if kind not in ("U", "R"):
        raise ValueError(f"unknown path kind {kind!r}")
    if bound is not None:
        ex = bound <= EXACT_BOUND_LIMIT if exact is None else exact
        one = Fraction(1) if ex else 1.0
        x = [one if b else one - one for b in S2]
        moves = []
        trace = [dict(zip(states, x))] if record else []
        for _ in range(bound):
            x, sols = _step(view, kind, x, S1, S2, ex)
            moves.append(_solution_map(G, sols))
            if record:
                trace.append(dict(zip(states, x)))
        label = f"{kind}<={bound}"
        return ValueFunction(dict(zip(states, x)), ex, bound, 0.0, True, 0.0, label, coalition,
                             moves, trace)
    # unbounded: iterate 0 is the indicator of S2, iterate n the bound-n value
    x = [1.0 if b else 0.0 for b in S2]
    trace = [dict(zip(states, x))] if record else []
    if kind == "U":
        active = [i for i in range(len(states)) if S1[i] and not S2[i]]
    else:
        active = [i for i in range(len(states)) if S2[i] and not S1[i]]
    cells = [view.approx[i] for i in active]
    two = all(len(c) == 2 and len(c[0]) == 2 for c in cells)
    rs = []
    n = 0
    converged = False
    error = 1.0
    while n < max_iters:
        nx = list(x)
        for i, cell in zip(active, cells):
            if two:
                (c00, c01), (c10, c11) = cell
                a = sum(p * x[t] for t, p in c00)
                b = sum(p * x[t] for t, p in c01)
                c = sum(p * x[t] for t, p in c10)
                d = sum(p * x[t] for t, p in c11)
                lo = max(min(a, b), min(c, d))
                hi = min(max(a, c), max(b, d))
                v = lo if hi - lo <= 1e-15 else (a * d - b * c) / (a + d - b - c)
            else:
                v = matrix_game_value([[sum(p * x[t] for t, p in cl) for cl in row] for row in cell],
                                      False).value
            nx[i] = 1.0 if v > 1.0 else (0.0 if v < 0.0 else v)
        n += 1
        r = max((abs(nx[i] - x[i]) for i in active), default=0.0)
        x = nx
        rs.append(r)
        if record:
            trace.append(dict(zip(states, x)))
        if r <= NOISE_FLOOR:
            converged, error = True, BAND_FACTOR * NOISE_FLOOR
            break
        if len(rs) > 1 and r < eps and rs[-2] > 0:
            rho = r / rs[-2]
            if rho < 1 and TAIL_SAFETY * r * rho / (1 - rho) < eps:
                converged, error = True, max(TAIL_SAFETY * r * rho / (1 - rho), r)
                break
    r = rs[-1] if rs else 0.0
    if not converged and len(rs) > 1 and rs[-2] > 0:
        rho = r / rs[-2]
        error = 1.0 if rho >= 1 else min(1.0, TAIL_SAFETY * r * rho / (1 - rho))
    # strategies from one more exact game solve on the final iterate
    _, sols = _step(view, kind, x, S1, S2, False)
    vf = ValueFunction(dict(zip(states, x)), False, n, r, converged, error, kind, coalition,
                       [_solution_map(G, sols)], trace)
    if not converged:
        vf.notes.append(f"iteration cap {max_iters} reached; residual {r:.3g}, "
                        f"estimated remaining change {error:.3g}")
    return vf


# ---------------------------------------------------------------------------
# exact qualitative sets


def _exists_row(view, i, pred) -> bool:
    return any(all(pred(view.supports(i, p, q)) for q in range(len(view.cols)))
               for p in range(len(view.rows)))


def almost_sure_until(G: PGS, coalition, S1, S2) -> frozenset:
    """States where the coalition reaches ``S2`` through ``S1`` with probability one."""
    view = game_view(G, coalition)
    n = len(G.states)
    s1 = [s in S1 for s in G.states]
    s2 = [s in S2 for s in G.states]
    Y = set(range(n))
    while True:
        X = {i for i in range(n) if s2[i]}
        while True:
            add = set()
            for i in range(n):
                if i in X or not s1[i] or i not in Y:
                    continue
                stay = [p for p in range(len(view.rows))
                        if all(set(view.supports(i, p, q)) <= Y for q in range(len(view.cols)))]
                if stay and all(any(set(view.supports(i, p, q)) & X for p in stay)
                                for q in range(len(view.cols))):
                    add.add(i)
            if not add:
                break
            X |= add
        if X == Y:
            return frozenset(G.states[i] for i in Y)
        Y = X


def positive_until(G: PGS, coalition, S1, S2) -> frozenset:
    """States where the coalition reaches ``S2`` through ``S1`` with positive probability."""
    view = game_view(G, coalition)
    X = {i for i, s in enumerate(G.states) if s in S2}
    while True:
        add = {i for i, s in enumerate(G.states)
               if i not in X and s in S1
               and all(any(set(view.supports(i, p, q)) & X for p in range(len(view.rows)))
                       for q in range(len(view.cols)))}
        if not add:
            return frozenset(G.states[i] for i in X)
        X |= add


def sure_release(G: PGS, coalition, S1, S2) -> frozenset:
    """States where the coalition keeps ``S2`` until (and including) ``S1`` with certainty."""
    view = game_view(G, coalition)
    Y = {i for i, s in enumerate(G.states) if s in S2}
    while True:
        keep = {i for i in Y if G.states[i] in S1
                or _exists_row(view, i, lambda sup: set(sup) <= Y)}
        if keep == Y:
            return frozenset(G.states[i] for i in Y)
        Y = keep


# ---------------------------------------------------------------------------
# satisfaction


@dataclass
class SatResult:
    sat: frozenset
    unsat: frozenset
    uncertain: frozenset
    notes: list = field(default_factory=list)
    values: dict = field(default_factory=dict)  # canonical text of strategic subformula -> ValueFunction

    def verdict(self, s) -> str:
        if s in self.sat:
            return "sat"
        if s in self.unsat:
            return "unsat"
        return "uncertain"

    def holds_on(self, dist: Mapping) -> str:
        """Three-valued ``Δ ⊨ φ``: every state of the support must satisfy it."""
        supp = [s for s in dist if dist[s]]
        if all(s in self.sat for s in supp):
            return "sat"
        if any(s in self.unsat for s in supp):
            return "unsat"
        return "uncertain"


@dataclass
class CheckOptions:
    eps: float = EPS_VI
    max_iters: int = MAX_ITERS


def _decide(cmp: str, alpha: Fraction, lo, hi, err) -> tuple:
    """(definitely true, definitely false) for ``value ⋈ alpha`` with ``lo <= value <= hi``."""
    a = alpha if isinstance(lo, Fraction) and isinstance(hi, Fraction) and err == 0 else float(alpha)
    lo_, hi_ = lo - err, hi + err
    if cmp == ">":
        return lo_ > a, hi_ <= a
    if cmp == ">=":
        return lo_ >= a, hi_ < a
    if cmp == "<":
        return hi_ < a, lo_ >= a
    return hi_ <= a, lo_ > a


class _Checker:
    def __init__(self, G: PGS, opts: CheckOptions):
        self.G = G
        self.opts = opts
        self.all = frozenset(G.states)
        self.cache: dict = {}
        self.notes: list = []
        self.values: dict = {}

    def sets(self, phi) -> tuple:
        """``(lo, hi)``: definitely-satisfying and possibly-satisfying states."""
        hit = self.cache.get(phi)
        if hit is None:
            hit = self._sets(phi)
            self.cache[phi] = hit
        return hit

    def _sets(self, phi):
        G = self.G
        if isinstance(phi, Prop):
            if phi.name not in G.props:
                raise ValueError(f"unknown proposition {phi.name!r}")
            s = G.sat(phi.name)
            return s, s
        if isinstance(phi, Const):
            s = self.all if phi.value else frozenset()
            return s, s
        if isinstance(phi, Not):
            lo, hi = self.sets(phi.arg)
            return self.all - hi, self.all - lo
        if isinstance(phi, And):
            l1, h1 = self.sets(phi.left)
            l2, h2 = self.sets(phi.right)
            return l1 & l2, h1 & h2
        if isinstance(phi, Or):
            l1, h1 = self.sets(phi.left)
            l2, h2 = self.sets(phi.right)
            return l1 | l2, h1 | h2
        if isinstance(phi, Strategic):
            return self.strategic(phi)
        raise TypeError(f"not a state formula: {phi!r}")

    def path_sets(self, psi):
        if isinstance(psi, Next):
            lo, hi = self.sets(psi.arg)
            return "X", None, (self.all, self.all), (lo, hi)
        kind = "U" if isinstance(psi, Until) else "R"
        return kind, psi.bound, self.sets(psi.left), self.sets(psi.right)

    def strategic(self, phi: Strategic):
        cmp, alpha, psi = phi.cmp, phi.threshold, phi.path
        if cmp in ("<", "<="):
            cmp, alpha, psi = dualize(cmp, alpha, psi)
        A = phi.coalition
        kind, bound, (l1, h1), (l2, h2) = self.path_sets(psi)
        o = self.opts
        v_lo = path_value(self.G, A, kind, bound, l1, l2, eps=o.eps, max_iters=o.max_iters)
        if (l1, l2) == (h1, h2):
            v_hi = v_lo
        else:
            v_hi = path_value(self.G, A, kind, bound, h1, h2, eps=o.eps, max_iters=o.max_iters)
        self.values[to_text(phi)] = v_lo
        err = 0 if v_lo.exact else max(BAND_FACTOR * o.eps, v_lo.error, v_hi.error)
        sat, unsat = set(), set()
        for s in self.G.states:
            t, f = _decide(cmp, alpha, v_lo[s], v_hi[s], err)
            if t:
                sat.add(s)
            elif f:
                unsat.add(s)
        if bound is None and kind == "U" and cmp == ">=" and alpha == 1:
            lo = almost_sure_until(self.G, A, l1, l2)
            hi = almost_sure_until(self.G, A, h1, h2)
            sat, unsat = set(lo), set(self.all - hi)
            self.note(phi, NOTE_UNATTAINED)
            if any(v_hi[s] >= 1 - max(err, 1e-3) and s not in hi for s in self.G.states):
                self.note(phi, "value 1 is not attained: no strategy reaches the goal almost surely")
        elif bound is None and kind == "U" and cmp == ">" and alpha == 0:
            lo = positive_until(self.G, A, l1, l2)
            hi = positive_until(self.G, A, h1, h2)
            sat, unsat = set(lo), set(self.all - hi)
        elif bound is None and kind == "R" and cmp == ">=" and alpha == 1:
            lo = sure_release(self.G, A, l1, l2)
            hi = sure_release(self.G, A, h1, h2)
            sat, unsat = set(lo), set(self.all - hi)
        elif bound is None and kind == "U" and cmp == ">=":
            self.note(phi, NOTE_UNATTAINED)
        for vf in (v_lo, v_hi):
            for n in vf.notes:
                self.note(phi, n)
        return frozenset(sat), frozenset(self.all - unsat)

    def note(self, phi, text):
        entry = f"{to_text(phi)}: {text}"
        if entry not in self.notes:
            self.notes.append(entry)


def patl_sat(G: PGS, phi, *, eps: float = EPS_VI, max_iters: int = MAX_ITERS) -> SatResult:
    """Three-valued satisfaction sets of a state formula."""
    ch = _Checker(G, CheckOptions(eps, max_iters))
    lo, hi = ch.sets(phi)
    return SatResult(lo, frozenset(ch.all - hi), frozenset(hi - lo), ch.notes, ch.values)


def formula_sets(G: PGS, phi, **kw) -> frozenset:
    """Definitely-satisfying states (raises if any state is boundary-uncertain)."""
    res = patl_sat(G, phi, **kw)
    if res.uncertain:
        raise ValueError(f"boundary-uncertain states {sorted(res.uncertain)} for {to_text(phi)}")
    return res.sat


def value_of(G: PGS, coalition, psi, *, eps: float = EPS_VI, max_iters: int = MAX_ITERS,
             record: bool = False, exact: bool | None = None) -> ValueFunction:
    """``⟨A⟩ψ`` at every state; state arguments of ``psi`` must be decidable."""
    if isinstance(psi, Next):
        S2 = formula_sets(G, psi.arg, eps=eps, max_iters=max_iters)
        return path_value(G, coalition, "X", None, (), S2, record=record, exact=exact)
    S1 = formula_sets(G, psi.left, eps=eps, max_iters=max_iters)
    S2 = formula_sets(G, psi.right, eps=eps, max_iters=max_iters)
    kind = "U" if isinstance(psi, Until) else "R"
    return path_value(G, coalition, kind, psi.bound, S1, S2, eps=eps, max_iters=max_iters,
                      record=record, exact=exact)


# ---------------------------------------------------------------------------
# determinacy


def determinacy_check(G: PGS, coalition, psi, **kw) -> dict:
    """``⟨A⟩ψ + ⟨Ā⟩¬ψ`` at every state; reports the largest deviation from 1."""
    v = value_of(G, coalition, psi, **kw)
    w = value_of(G, complement(coalition), negate_path(psi), **kw)
    sums = {s: v[s] + w[s] for s in G.states}
    dev = max(abs(x - 1) for x in sums.values())
    return {"path": to_text(psi), "coalition": sorted(coalition),
            "deviation": float(dev), "exact": v.exact and w.exact,
            "value": v, "dual": w, "iterations": [v.iterations, w.iterations]}


# ---------------------------------------------------------------------------
# strategies


@dataclass
class StrategyCertificate:
    coalition: frozenset
    strategies: dict  # player -> HistoryStrategy (protagonists)
    counter: dict  # player -> HistoryStrategy (antagonists' optimal replies)
    guaranteed: dict  # state -> exact lower bound on what the strategies ensure
    value: ValueFunction
    kind: str  # "optimal" or "epsilon-optimal(<eps>)"
    memoryless: bool

    def to_json(self) -> dict:
        return {"coalition": sorted(self.coalition), "kind": self.kind,
                "memoryless": self.memoryless,
                "guaranteed": {s: _num(v) for s, v in self.guaranteed.items()},
                "value": self.value.to_json()}


def _rational_move(xs, denom: int = 10 ** 6) -> list:
    fr = [Fraction(x).limit_denominator(denom) if not isinstance(x, Fraction) else x for x in xs]
    fr = [max(f, Fraction(0)) for f in fr]
    total = sum(fr)
    return [f / total for f in fr]


def _split_moves(view: GameView, sol_map: Mapping, default_rows=None) -> tuple:
    """Per-player level-1 strategies from per-state game solutions."""
    G = view.G
    A = view.coalition
    row_moves, col_moves = {}, {}
    for s in G.states:
        sol = sol_map.get(s)
        if sol is None:
            row = [Fraction(1)] + [Fraction(0)] * (len(view.rows) - 1)
            col = [Fraction(1)] + [Fraction(0)] * (len(view.cols) - 1)
        else:
            row, col = _rational_move(sol.row), _rational_move(sol.col)
        row_moves[s] = dict(zip(view.rows, row))
        col_moves[s] = dict(zip(view.cols, col))

    def player_moves(moves, idx=None):
        out = {}
        for s, m in moves.items():
            d: dict = {}
            for act, p in m.items():
                a = act if idx is None else act[idx]
                d[a] = d.get(a, Fraction(0)) + p
            out[s] = Distribution(d)
        return Level1Strategy(out)

    prot, anta = {}, {}
    if A == {PLAYER_I}:
        prot[PLAYER_I], anta[PLAYER_II] = player_moves(row_moves), player_moves(col_moves)
    elif A == {PLAYER_II}:
        prot[PLAYER_II], anta[PLAYER_I] = player_moves(row_moves), player_moves(col_moves)
    elif A == {PLAYER_I, PLAYER_II}:
        # pick a pure joint action (the game has no opponent, so a pure optimum exists)
        pure = {s: max(m.items(), key=lambda kv: kv[1])[0] for s, m in row_moves.items()}
        prot[PLAYER_I] = Level1Strategy({s: Distribution.point(a) for s, (a, _) in pure.items()})
        prot[PLAYER_II] = Level1Strategy({s: Distribution.point(b) for s, (_, b) in pure.items()})
    else:
        pure = {s: max(m.items(), key=lambda kv: kv[1])[0] for s, m in col_moves.items()}
        anta[PLAYER_I] = Level1Strategy({s: Distribution.point(a) for s, (a, _) in pure.items()})
        anta[PLAYER_II] = Level1Strategy({s: Distribution.point(b) for s, (_, b) in pure.items()})
    return prot, anta


def _protagonist_rows(view: GameView, prot: Mapping, s) -> list:
    """The protagonist's move at ``s`` as a distribution over view rows."""
    A = view.coalition
    if A == {PLAYER_I}:
        m = prot[PLAYER_I][s]
        return [m.get(a, Fraction(0)) for a in view.rows]
    if A == {PLAYER_II}:
        m = prot[PLAYER_II][s]
        return [m.get(b, Fraction(0)) for b in view.rows]
    if A == {PLAYER_I, PLAYER_II}:
        m1, m2 = prot[PLAYER_I][s], prot[PLAYER_II][s]
        return [m1.get(a, Fraction(0)) * m2.get(b, Fraction(0)) for a, b in view.rows]
    return [Fraction(1)]


def _reply_matrix(view: GameView, i: int, rows: list) -> list:
    """Per antagonist column: exact successor distribution as ``{t: p}``."""
    out = []
    for q in range(len(view.cols)):
        d: dict = {}
        for p, w in enumerate(rows):
            if w:
                for t, pr in view.exact[i][p][q]:
                    d[t] = d.get(t, Fraction(0)) + w * pr
        out.append(d)
    return out


def guaranteed_value(G: PGS, coalition, kind: str, bound, S1, S2, stages: list) -> dict:
    """Exact probability the protagonists ensure with level-1 ``stages`` (the
    last stage repeating) against the worst antagonist reply."""
    from .lp import LinearProgram

    view = game_view(G, coalition)
    n = len(G.states)
    s1 = [s in S1 for s in G.states]
    s2 = [s in S2 for s in G.states]
    trans = [[_reply_matrix(view, i, _protagonist_rows(view, st, G.states[i])) for i in range(n)]
             for st in stages]

    def backup(T, x):
        out = []
        for i in range(n):
            if kind == "U" and (s2[i] or not s1[i]):
                out.append(Fraction(int(s2[i])))
            elif kind == "R" and (not s2[i] or s1[i]):
                out.append(Fraction(int(s2[i])))
            else:
                out.append(min(sum(p * x[t] for t, p in col.items()) for col in T[i]))
        return out

    if kind == "X":
        x = [Fraction(int(b)) for b in s2]
        T = trans[0]
        return {G.states[i]: min(sum(p * x[t] for t, p in col.items()) for col in T[i])
                for i in range(n)}
    if bound is not None:
        x = [Fraction(int(b)) for b in s2]
        for lvl in range(bound):
            # stage index: the move used with bound - lvl steps remaining
            T = trans[min(bound - lvl - 1, len(trans) - 1)]
            x = backup(T, x)
        return dict(zip(G.states, x))
    T = trans[-1]
    if kind == "U":
        goal = set(i for i in range(n) if s2[i])
        live = [i for i in range(n) if s1[i] and not s2[i]]
        # zero set: the antagonist can keep the play away from the goal forever
        Z = set(i for i in range(n) if not s2[i])
        while True:
            keep = {i for i in Z if not s1[i] or any(set(col) <= Z for col in T[i])}
            if keep == Z:
                break
            Z = keep
        rest = [i for i in live if i not in Z]
        lp = LinearProgram()
        for i in rest:
            for q, col in enumerate(T[i]):
                # x_i + slack = Σ p x_t + goal mass
                row = {("x", i): 1, ("sl", i, q): 1}
                rhs = Fraction(0)
                for t, p in col.items():
                    if t in goal:
                        rhs += p
                    elif t in rest:
                        row[("x", t)] = row.get(("x", t), 0) - p
                lp.add_eq(row, rhs)
        res = lp.solve(maximize={("x", i): 1 for i in rest})
        out = {}
        for i, s in enumerate(G.states):
            out[s] = Fraction(1) if i in goal else (res[("x", i)] if i in rest else Fraction(0))
        return out
    # release: 1 - max probability that the antagonist reaches a violation
    bad = set(i for i in range(n) if not s2[i])
    safe_done = set(i for i in range(n) if s2[i] and s1[i])
    live = [i for i in range(n) if i not in bad and i not in safe_done]
    reach = set(bad)
    while True:
        add = {i for i in live if i not in reach and any(set(col) & reach for col in T[i])}
        if not add:
            break
        reach |= add
    rest = [i for i in live if i in reach]
    lp = LinearProgram()
    for i in rest:
        for q, col in enumerate(T[i]):
            # x_i - slack = Σ p x_t + bad mass
            row = {("x", i): 1, ("sl", i, q): -1}
            rhs = Fraction(0)
            for t, p in col.items():
                if t in bad:
                    rhs += p
                elif t in rest:
                    row[("x", t)] = row.get(("x", t), 0) - p
            lp.add_eq(row, rhs)
    res = lp.solve(maximize={("x", i): -1 for i in rest})
    out = {}
    for i, s in enumerate(G.states):
        if i in bad:
            out[s] = Fraction(0)
        elif i in rest:
            out[s] = 1 - res[("x", i)]
        else:
            out[s] = Fraction(1)
    return out


def extract_strategy(G: PGS, coalition, psi, eps: float = 0.1, *, max_iters: int = MAX_ITERS,
                     vi_eps: float = EPS_VI) -> StrategyCertificate:
    """Strategies for the coalition (and optimal antagonist replies) with a certified guarantee."""
    coalition = frozenset(coalition)
    view = game_view(G, coalition)
    if isinstance(psi, Next):
        kind, bound = "X", None
        S1, S2 = frozenset(G.states), formula_sets(G, psi.arg)
    else:
        kind = "U" if isinstance(psi, Until) else "R"
        bound = psi.bound
        S1, S2 = formula_sets(G, psi.left), formula_sets(G, psi.right)
    vf = path_value(G, coalition, kind, bound, S1, S2, eps=vi_eps, max_iters=max_iters,
                    exact=True if (kind == "X" or bound is not None) else None)
    if kind == "X" or bound is not None:
        # stage n (history length n) plays the game with bound - n + 1 steps left
        sols = vf.moves[::-1] if kind != "X" else vf.moves
        if not sols:
            sols = [{}]
        pairs = [_split_moves(view, m) for m in sols]
        prot = {p: StagedStrategy([pr[p] for pr, _ in pairs]) for p in pairs[0][0]}
        anta = {p: StagedStrategy([an[p] for _, an in pairs]) for p in pairs[0][1]}
        stages = [pr for pr, _ in pairs]
        guar = guaranteed_value(G, coalition, kind, bound, S1, S2, stages if stages[0] else [{}])
        return StrategyCertificate(coalition, prot, anta, guar, vf, "optimal", False)
    if not vf.converged and kind == "R":
        raise ValueError("value iteration did not converge; refusing to extract a strategy")
    # unbounded: search iterates n = 1, 2, 4, ... for a memoryless strategy whose
    # exact guarantee is within eps of the computed value
    target = {s: vf[s] - eps for s in G.states}
    n = 1
    best = None
    while True:
        m = min(n, vf.iterations) if vf.iterations else 1
        it = path_value(G, coalition, kind, None, S1, S2, eps=0.0, max_iters=m)
        prot, anta = _split_moves(view, it.moves[0] if it.moves else {})
        guar = guaranteed_value(G, coalition, kind, None, S1, S2, [prot])
        best = (prot, anta, guar)
        if all(guar[s] >= target[s] for s in G.states):
            break
        if m >= vf.iterations:
            break
        n *= 2
    prot, anta, guar = best
    gap = max(float(vf[s] - guar[s]) for s in G.states)
    optimal = kind == "R" and gap <= BAND_FACTOR * vi_eps + vf.error
    kind_tag = "optimal" if optimal else f"epsilon-optimal({max(gap, 0.0):.3g})"
    return StrategyCertificate(coalition, {p: MemorylessStrategy(l) for p, l in prot.items()},
                               {p: MemorylessStrategy(l) for p, l in anta.items()},
                               guar, vf, kind_tag, True)


__all__ = [
    "EPS_VI", "MAX_ITERS", "GameSolution", "matrix_game_value", "GameView", "game_view", "ppre",
    "ValueFunction", "path_value", "value_of", "patl_sat", "SatResult", "formula_sets",
    "almost_sure_until", "positive_until", "sure_release", "determinacy_check",
    "StrategyCertificate", "extract_strategy", "guaranteed_value", "complement",
    "NOTE_UNATTAINED",
]
