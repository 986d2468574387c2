"""Exact rational linear programming.

A small two-phase simplex with Bland's anticycling rule, for problems of the form ``A x = b, x >= 0`` with an
optional linear objective to maximise.  Rows are kept as sparse dicts; the
systems produced by the lifting and simulation checks are small and very
sparse.  The pivoting runs on ``gmpy2.mpq`` rationals, which are much
faster than ``Fraction``; inputs and outputs stay ``Fraction``.
"""
from __future__ import annotations

from collections.abc import Hashable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq

ZERO = mpq(0)
ONE = mpq(1)


def _q(x) -> mpq:
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    return mpq(x)


def _frac(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    values: dict = field(default_factory=dict)
    objective: Fraction | None = None

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"

    def __getitem__(self, name) -> Fraction:
        return self.values.get(name, Fraction(0))


class LinearProgram:
    """Builder for ``{x >= 0 : A x = b}`` with named variables."""

    def __init__(self):
        self.names: list = []
        self.index: dict = {}
        self.rows: list = []

    def var(self, name: Hashable) -> Hashable:
        if name not in self.index:
            self.index[name] = len(self.names)
            self.names.append(name)
        return name

    def add_eq(self, coeffs: Mapping, rhs=0) -> None:
        row: dict = {}
        for name, c in coeffs.items():
            if c:
                j = self.index[name] if name in self.index else self.index[self.var(name)]
                row[j] = row.get(j, ZERO) + _q(c)
        row = {j: c for j, c in row.items() if c}
        rhs = _q(rhs)
        if not row:
            if rhs:
                # 0 = rhs with rhs != 0: record as an impossible row
                self.rows.append(({}, rhs))
            return
        self.rows.append((row, rhs))

    def solve(self, maximize: Mapping | None = None) -> LPResult:
        n = len(self.names)
        obj = None
        if maximize:
            obj = {self.index[k]: _q(v) for k, v in maximize.items() if v}
        res = _simplex(n, self.rows, obj)
        if res is None:
            return LPResult("infeasible")
        status, x, z = res
        values = {self.names[j]: _frac(v) for j, v in x.items() if v}
        return LPResult(status, values, None if z is None else _frac(z))


def _pivot(rows, rhs, basis, zrow, zval, r, j):
    prow = rows[r]
    piv = prow[j]
    if piv != ONE:
        inv = ONE / piv
        for k in prow:
            prow[k] *= inv
        rhs[r] *= inv
    prhs = rhs[r]
    for i, row in enumerate(rows):
        if i == r:
            continue
        f = row.get(j)
        if f is None:
            continue
        for k, v in prow.items():
            nv = row.get(k, ZERO) - f * v
            if nv:
                row[k] = nv
            else:
                row.pop(k, None)
        rhs[i] -= f * prhs
    f = zrow.get(j)
    if f is not None:
        for k, v in prow.items():
            nv = zrow.get(k, ZERO) - f * v
            if nv:
                zrow[k] = nv
            else:
                zrow.pop(k, None)
        zval += f * prhs
    basis[r] = j
    return zval


def _run(rows, rhs, basis, zrow, zval, allowed):
    """Maximise with Bland's rule.  Returns (status, zval)."""
    while True:
        entering = None
        for j in sorted(zrow):
            if zrow[j] > 0 and j < allowed:
                entering = j
                break
        if entering is None:
            return "optimal", zval
        best = None
        for i, row in enumerate(rows):
            a = row.get(entering)
            if a is not None and a > 0:
                ratio = rhs[i] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            return "unbounded", zval
        zval = _pivot(rows, rhs, basis, zrow, zval, best[1], entering)


def _simplex(n: int, input_rows: Sequence, objective: dict | None):
    rows = []
    rhs = []
    for row, b in input_rows:
        if not row:
            if b:
                return None
            continue
        if b < 0:
            rows.append({j: -c for j, c in row.items()})
            rhs.append(-b)
        else:
            rows.append(dict(row))
            rhs.append(b)
    m = len(rows)
    # phase 1: artificial n+i in row i; maximise -sum(artificials)
    basis = [n + i for i in range(m)]
    for i in range(m):
        rows[i][n + i] = ONE
    zrow: dict = {}
    for row in rows:
        for j, c in row.items():
            if j < n:
                zrow[j] = zrow.get(j, ZERO) + c
    zrow = {j: c for j, c in zrow.items() if c}
    zval = -sum(rhs, ZERO)
    # zval tracks the current objective value; pivots add f * rhs
    status, zval = _run(rows, rhs, basis, zrow, zval, n)
    if zval != 0:
        return None
    # drive remaining artificials out of the basis
    keep = []
    for i in range(m):
        if basis[i] >= n:
            j = next((k for k in sorted(rows[i]) if k < n), None)
            if j is None:
                continue  # redundant row
            zval = _pivot(rows, rhs, basis, {}, ZERO, i, j)
        keep.append(i)
    rows = [{k: v for k, v in rows[i].items() if k < n} for i in keep]
    rhs = [rhs[i] for i in keep]
    basis = [basis[i] for i in keep]

    status = "optimal"
    z = None
    if objective:
        zrow = dict(objective)
        zval = ZERO
        for i, bj in enumerate(basis):
            cb = objective.get(bj)
            if cb:
                for k, v in rows[i].items():
                    nv = zrow.get(k, ZERO) - cb * v
                    if nv:
                        zrow[k] = nv
                    else:
                        zrow.pop(k, None)
                zval += cb * rhs[i]
        status, zval = _run(rows, rhs, basis, zrow, zval, n)
        z = zval
    x = {bj: rhs[i] for i, bj in enumerate(basis)}
    if objective and status == "optimal":
        z = sum((objective.get(j, ZERO) * v for j, v in x.items()), ZERO)
    return status, x, z


def solve_square(A: Sequence[Sequence], b: Sequence) -> list:
    """Solve a nonsingular square system exactly by Gaussian elimination."""
    n = len(A)
    M = [[_q(v) for v in A[i]] + [_q(b[i])] for i in range(n)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            raise ZeroDivisionError("singular system")
        M[c], M[p] = M[p], M[c]
        pv = M[c][c]
        M[c] = [v / pv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [vr - f * vc for vr, vc in zip(M[r], M[c])]
    return [_frac(M[i][n]) for i in range(n)]
