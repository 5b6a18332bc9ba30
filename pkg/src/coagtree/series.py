"""Exact exponential tree series and the branching operator in matrix form.

A :class:`SeriesVector` holds coefficients ``h[tau]`` of the series

    sum_tau  h[tau] / |tau|!  * tau

so the coagulation solution has ``h[tau] = weight(tau) * t**|tau|``. In these
coordinates grading-then-branching is the plain multiplicity matrix of
:func:`coagtree.trees.branch`; the ungraded operator multiplies each row by the
grade of its target tree.

Everything here is exact (``int``/``Fraction``) and serves as the ground truth
for the floating point solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable, Mapping

from coagtree.trees import (
    LEAF,
    Tree,
    _check_cap,
    branch,
    enumerate_planar,
    graft,
    parse_word_code,
    weight,
)

__all__ = [
    "SeriesVector",
    "BranchMatrix",
    "grade_slice",
    "build_branch_matrix",
    "apply_matrix_power",
    "solution_coefficients",
    "exp_form_coefficients",
    "resolvent_solve",
    "solution_derivative",
    "graft_series",
    "check_grafting_identity",
    "GraftingReport",
    "convergence_diagnostic",
]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class SeriesVector:
    """Sparse exact coefficient vector over trees of grade <= ``max_grade``."""

    max_grade: int
    coeffs: Mapping[Tree, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for t, c in self.coeffs.items():
            t = parse_word_code(t)
            if t.grade > self.max_grade:
                raise ValueError(f"tree {t} exceeds max grade {self.max_grade}")
            c = _frac(c)
            if c:
                clean[t] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @classmethod
    def unit(cls, max_grade: int) -> "SeriesVector":
        """The vector ``e_0`` carried by the leaf."""
        return cls(max_grade, {LEAF: 1})

    def __getitem__(self, t) -> Fraction:
        return self.coeffs.get(parse_word_code(t), Fraction(0))

    def __iter__(self):
        return iter(self.coeffs.items())

    def __len__(self):
        return len(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, SeriesVector):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(tuple(self.coeffs.items()))

    def _combine(self, other, sign):
        out = dict(self.coeffs)
        for t, c in other.coeffs.items():
            out[t] = out.get(t, 0) + sign * c
        return SeriesVector(max(self.max_grade, other.max_grade), out)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scale(self, a) -> "SeriesVector":
        a = _frac(a)
        return SeriesVector(self.max_grade, {t: a * c for t, c in self.coeffs.items()})

    def restrict(self, grade: int) -> "SeriesVector":
        """Coefficients of a single grade."""
        return SeriesVector(self.max_grade, {t: c for t, c in self.coeffs.items() if t.grade == grade})

    def truncate(self, max_grade: int) -> "SeriesVector":
        return SeriesVector(max_grade, {t: c for t, c in self.coeffs.items() if t.grade <= max_grade})

    def dense(self, basis: Iterable[Tree]) -> list[Fraction]:
        return [self.coeffs.get(t, Fraction(0)) for t in basis]

    def to_json(self) -> str:
        payload = {
            "max_grade": self.max_grade,
            "coeffs": {str(t): [str(c.numerator), str(c.denominator)] for t, c in self.coeffs.items()},
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SeriesVector":
        payload = json.loads(text)
        coeffs = {
            parse_word_code(code): Fraction(int(num), int(den))
            for code, (num, den) in payload["coeffs"].items()
        }
        return cls(int(payload["max_grade"]), coeffs)


def tree_basis(max_grade: int) -> list[Tree]:
    """All planar trees of grade <= ``max_grade`` in tree order."""
    return [tt.tree for n in range(max_grade + 1) for tt in enumerate_planar(n)]


@dataclass(frozen=True)
class BranchMatrix:
    """Graded branching operator as a sparse integer matrix in tree order.

    ``entries[(row, col)]`` is the multiplicity of ``basis[row]`` in
    ``branch(basis[col])``; only grade ``n -> n+1`` blocks are populated.
    """

    max_grade: int
    basis: tuple[Tree, ...]
    entries: Mapping[tuple[int, int], int]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.basis), len(self.basis)

    def entry(self, row: Tree, col: Tree) -> int:
        index = self._index
        return self.entries.get((index[parse_word_code(row)], index[parse_word_code(col)]), 0)

    @property
    def _index(self) -> dict[Tree, int]:
        return {t: i for i, t in enumerate(self.basis)}

    def dense(self, rows: int | None = None, cols: int | None = None) -> list[list[int]]:
        rows = len(self.basis) if rows is None else rows
        cols = len(self.basis) if cols is None else cols
        return [[self.entries.get((i, j), 0) for j in range(cols)] for i in range(rows)]

    def apply(self, v: SeriesVector, graded: bool = True) -> SeriesVector:
        """Action on a coefficient vector; ``graded=False`` gives the ungraded operator."""
        index = self._index
        out: dict[Tree, Fraction] = {}
        by_col: dict[int, list[tuple[int, int]]] = {}
        for (i, j), m in self.entries.items():
            by_col.setdefault(j, []).append((i, m))
        for t, c in v.coeffs.items():
            j = index.get(t)
            if j is None:
                raise ValueError(f"tree {t} outside the matrix basis")
            for i, m in by_col.get(j, ()):
                target = self.basis[i]
                scale = m if graded else m * target.grade
                out[target] = out.get(target, 0) + scale * c
        return SeriesVector(self.max_grade, out)

    def power_is_zero(self, k: int) -> bool:
        """Whether the k-th matrix power vanishes (checked column by column)."""
        for t in self.basis:
            v = SeriesVector(self.max_grade, {t: 1})
            for _ in range(k):
                v = self.apply(v)
            if len(v):
                return False
        return True


def grade_slice(n: int, cap: int | None = None) -> SeriesVector:
    """Weighted sum of all trees of grade ``n``: coefficient ``weight(tau)``."""
    _check_cap(n, cap)
    return SeriesVector(n, {tt.tree: tt.weight for tt in enumerate_planar(n, cap)})


def build_branch_matrix(max_grade: int, cap: int | None = None) -> BranchMatrix:
    _check_cap(max_grade, cap)
    basis = tuple(tree_basis(max_grade))
    index = {t: i for i, t in enumerate(basis)}
    entries: dict[tuple[int, int], int] = {}
    for j, t in enumerate(basis):
        if t.grade == max_grade:
            continue
        for child in branch(t):
            key = (index[child], j)
            entries[key] = entries.get(key, 0) + 1
    return BranchMatrix(max_grade, basis, entries)


def apply_matrix_power(m: BranchMatrix, k: int, v: SeriesVector, graded: bool = True) -> SeriesVector:
    if k < 0:
        raise ValueError("power must be non-negative")
    for _ in range(k):
        v = m.apply(v, graded=graded)
    return v


def solution_coefficients(t, max_grade: int, cap: int | None = None) -> SeriesVector:
    """Truncated solution series: ``h[tau] = weight(tau) * t**|tau|``."""
    _check_cap(max_grade, cap)
    t = _frac(t)
    coeffs = {}
    for n in range(max_grade + 1):
        tn = t**n
        for tt in enumerate_planar(n, cap):
            coeffs[tt.tree] = tt.weight * tn
    return SeriesVector(max_grade, coeffs)


def solution_derivative(t, max_grade: int) -> SeriesVector:
    """Termwise time derivative of :func:`solution_coefficients`."""
    t = _frac(t)
    coeffs = {}
    for n in range(1, max_grade + 1):
        for tt in enumerate_planar(n):
            coeffs[tt.tree] = n * tt.weight * t ** (n - 1)
    return SeriesVector(max_grade, coeffs)


def exp_form_coefficients(t, max_grade: int, matrix: BranchMatrix | None = None) -> SeriesVector:
    """Matrix exponential form ``sum_k t^k/k! * B^k e_0`` with the ungraded operator."""
    t = _frac(t)
    m = matrix if matrix is not None else build_branch_matrix(max_grade)
    term = SeriesVector.unit(max_grade)
    total = term
    for k in range(1, max_grade + 1):
        term = m.apply(term, graded=False)
        total = total + term.scale(t**k / factorial(k))
    return total


def resolvent_solve(t, max_grade: int, matrix: BranchMatrix | None = None) -> SeriesVector:
    """Solve ``(I - t*B) x = e_0`` with the graded operator by forward substitution.

    The matrix is strictly block lower triangular by grade, so grade ``n`` of
    the solution is ``t * B`` applied to grade ``n-1``.
    """
    t = _frac(t)
    m = matrix if matrix is not None else build_branch_matrix(max_grade)
    block = SeriesVector.unit(max_grade)
    x = block
    for _ in range(max_grade):
        block = m.apply(block).scale(t)
        x = x + block
    return x


def graft_series(u: SeriesVector, v: SeriesVector, max_grade: int | None = None) -> SeriesVector:
    """Root grafting ``u * v`` extended bilinearly, in exponential-basis coordinates.

    With ``u = sum u_a/|a|! a`` and ``v = sum v_b/|b|! b`` the coefficient of
    ``graft(a, b)`` is ``u_a v_b (|a|+|b|+1)! / (|a|! |b|!)``. Terms above
    ``max_grade`` are dropped.
    """
    top = max_grade if max_grade is not None else u.max_grade + v.max_grade + 1
    out: dict[Tree, Fraction] = {}
    for a, ca in u:
        for b, cb in v:
            n = a.grade + b.grade + 1
            if n > top:
                continue
            t = graft(a, b)
            scale = Fraction(factorial(n), factorial(a.grade) * factorial(b.grade))
            out[t] = out.get(t, 0) + ca * cb * scale
    return SeriesVector(top, out)


@dataclass(frozen=True)
class GraftingReport:
    n: int
    ok: bool
    lhs: dict
    rhs: dict

    def weights(self) -> list[int]:
        """Grade n+1 coefficients produced by the grafting sum, in tree order."""
        return [int(self.rhs[t]) for t in sorted(self.rhs)]


def check_grafting_identity(n: int, cap: int | None = None) -> GraftingReport:
    """Compare ``g_{n+1}`` with ``sum_k C(n,k) graft(g_{n-k}, g_k)`` in the plain tree basis."""
    _check_cap(n + 1, cap)
    from math import comb

    slices = {k: grade_slice(k).coeffs for k in range(n + 1)}
    rhs: dict[Tree, int] = {}
    for k in range(n + 1):
        for a, ca in slices[n - k].items():
            for b, cb in slices[k].items():
                t = graft(a, b)
                rhs[t] = rhs.get(t, 0) + comb(n, k) * ca * cb
    lhs = dict(grade_slice(n + 1).coeffs)
    return GraftingReport(n, lhs == rhs, lhs, rhs)


@dataclass(frozen=True)
class ConvergenceDiagnostic:
    t: Fraction
    bound: float | None
    partial_sums: tuple[float, ...]
    tail_ratio: float | None


def convergence_diagnostic(t, max_grade: int, data_bound: float = 1.0) -> ConvergenceDiagnostic:
    """Partial sums of ``c * sum weight(tau)/|tau|! |t|^|tau|`` against ``c/(1-|t|)``.

    Reports the geometric bound (``None`` when ``|t| >= 1``) and the ratio of
    the last two grade contributions; no convergence claim is made.
    """
    t = _frac(t)
    grade_terms = []
    for n in range(max_grade + 1):
        total_weight = sum(tt.weight for tt in enumerate_planar(n))
        grade_terms.append(data_bound * float(Fraction(total_weight, factorial(n)) * abs(t) ** n))
    sums, acc = [], 0.0
    for term in grade_terms:
        acc += term
        sums.append(acc)
    lam = abs(float(t))
    bound = data_bound / (1 - lam) if lam < 1 else None
    ratio = grade_terms[-1] / grade_terms[-2] if max_grade >= 1 and grade_terms[-2] else None
    return ConvergenceDiagnostic(t, bound, tuple(sums), ratio)
