"""Rooted planar binary trees encoded by level word-codes.

A tree with at least one vertex is stored as the sequence of vertex levels read
left to right: the root is the unique ``1``, the left subtree's levels (each
shifted up by one) precede it and the right subtree's follow. The bare leaf is
the code ``(0,)``. Grafting two trees at a new root is therefore

    graft(a, b) = (a + 1) ++ [1] ++ (b + 1)

with the leaf contributing an empty segment, so ``0*0 = 1``, ``1*1 = 212`` and
``12*212 = 231323``.

Tree order (used for forests and coefficient vectors) is the order in which root
grafting produces the trees of a grade: by left subtree grade, then left
subtree, then right subtree, recursively. It coincides with the numeric order
of codes up to grade 3; at grade 4 it places ``3212`` before ``2341``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import lru_cache, total_ordering
from itertools import product
from math import comb
from typing import Iterable, Sequence

from coagtree.errors import InvalidCode, LeafTree, ResourceLimit

GRADE_CAP = 12

__all__ = [
    "GRADE_CAP",
    "LEAF",
    "Tree",
    "TreeTriple",
    "Forest",
    "parse_word_code",
    "graft",
    "split_root",
    "weight",
    "branch",
    "enumerate_planar",
    "canonical_nonplanar",
    "symmetry_count",
    "enumerate_nonplanar",
    "twist_orbit",
    "catalan",
    "FOREST_COLUMNS",
    "forests_to_csv",
    "forests_to_json",
]


@lru_cache(maxsize=None)
def _split(code: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Validate ``code`` and return the root split as (left, right) codes."""
    if code == (0,):
        raise LeafTree("the leaf tree has no root vertex")
    if not code:
        raise InvalidCode("empty word-code")
    ones = [i for i, d in enumerate(code) if d == 1]
    if len(ones) != 1 or any(d < 1 for d in code):
        raise InvalidCode(f"{_fmt(code)}: a segment must contain exactly one root digit 1")
    i = ones[0]
    left = tuple(d - 1 for d in code[:i]) or (0,)
    right = tuple(d - 1 for d in code[i + 1:]) or (0,)
    for part in (left, right):
        if part != (0,):
            try:
                _split(part)
            except InvalidCode:
                raise InvalidCode(f"{_fmt(code)}: levels are not contiguous") from None
    return left, right


def _fmt(code: Sequence[int]) -> str:
    if all(0 <= d <= 9 for d in code):
        return "".join(str(d) for d in code)
    return ".".join(str(d) for d in code)


@total_ordering
@dataclass(frozen=True)
class Tree:
    """A rooted planar binary tree, identified by its level word-code."""

    code: tuple[int, ...]

    def __post_init__(self):
        code = tuple(int(d) for d in self.code)
        object.__setattr__(self, "code", code)
        if code != (0,):
            _split(code)

    @property
    def grade(self) -> int:
        return 0 if self.code == (0,) else len(self.code)

    @property
    def is_leaf(self) -> bool:
        return self.code == (0,)

    @property
    def children(self) -> tuple["Tree", "Tree"]:
        left, right = _split(self.code)
        return Tree(left), Tree(right)

    def sort_key(self):
        return (self.grade, _order_key(self.code))

    def __lt__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return _fmt(self.code)

    def __repr__(self) -> str:
        return f"Tree({str(self)!r})"


LEAF = Tree((0,))


@lru_cache(maxsize=None)
def _order_key(code: tuple[int, ...]):
    if code == (0,):
        return ()
    left, right = _split(code)
    lg = 0 if left == (0,) else len(left)
    return (lg, _order_key(left), _order_key(right))


def parse_word_code(w) -> Tree:
    """Parse a word-code given as a string (``"212"``, ``"1.2.10"``) or digit sequence."""
    if isinstance(w, Tree):
        return w
    if isinstance(w, str):
        s = w.strip()
        if not s:
            raise InvalidCode("empty word-code")
        parts = s.split(".") if "." in s else list(s)
        try:
            digits = tuple(int(p) for p in parts)
        except ValueError:
            raise InvalidCode(f"{w!r}: non-digit characters") from None
    else:
        digits = tuple(int(d) for d in w)
    if not digits:
        raise InvalidCode("empty word-code")
    if any(d < 0 for d in digits):
        raise InvalidCode(f"{_fmt(digits)}: negative level")
    if 0 in digits and digits != (0,):
        raise InvalidCode(f"{_fmt(digits)}: level 0 only denotes the leaf")
    return Tree(digits)


def _shift(code: tuple[int, ...]) -> tuple[int, ...]:
    return () if code == (0,) else tuple(d + 1 for d in code)


def graft(a: Tree, b: Tree) -> Tree:
    """Join ``a`` (left) and ``b`` (right) at a new root vertex."""
    return Tree(_shift(a.code) + (1,) + _shift(b.code))


def split_root(t: Tree) -> tuple[Tree, Tree]:
    """Inverse of :func:`graft`."""
    if t.is_leaf:
        raise LeafTree("the leaf tree has no root vertex")
    return t.children


@lru_cache(maxsize=None)
def _weight(code: tuple[int, ...]) -> int:
    if code == (0,):
        return 1
    left, right = _split(code)
    gl = 0 if left == (0,) else len(left)
    gr = 0 if right == (0,) else len(right)
    return comb(gl + gr, gl) * _weight(left) * _weight(right)


def weight(t: Tree) -> int:
    """Weight character: product of Leibniz binomials over the root splits."""
    return _weight(t.code)


@lru_cache(maxsize=None)
def _branch(code: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    if code == (0,):
        return ((1,),)
    left, right = _split(code)
    out = [_shift(a) + (1,) + _shift(right) for a in _branch(left)]
    out += [_shift(left) + (1,) + _shift(b) for b in _branch(right)]
    return tuple(out)


def branch(t: Tree) -> list[Tree]:
    """Attach a single vertex at every free end of ``t``.

    Returns the grade+1 resulting trees as a list (a multiset: ``212`` arises
    from ``12`` and from ``21``), sorted in tree order.
    """
    return sorted(Tree(c) for c in _branch(t.code))


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def _check_cap(n: int, cap: int | None) -> None:
    cap = GRADE_CAP if cap is None else cap
    if n < 0:
        raise ValueError("grade must be non-negative")
    if n > cap:
        raise ResourceLimit(f"grade {n} exceeds the grade cap {cap}")


@lru_cache(maxsize=None)
def _planar_codes(n: int) -> tuple[tuple[int, ...], ...]:
    if n == 0:
        return ((0,),)
    out = []
    for gl in range(n):
        for a in _planar_codes(gl):
            for b in _planar_codes(n - 1 - gl):
                out.append(_shift(a) + (1,) + _shift(b))
    return tuple(out)


@lru_cache(maxsize=None)
def _canonical(code: tuple[int, ...]) -> tuple[int, ...]:
    if code == (0,):
        return code
    left, right = _split(code)
    a, b = _canonical(left), _canonical(right)
    return min(_shift(a) + (1,) + _shift(b), _shift(b) + (1,) + _shift(a))


def canonical_nonplanar(t: Tree) -> Tree:
    """Lowest word-code (lexicographic on levels) among all vertex twists of ``t``."""
    return Tree(_canonical(t.code))


@lru_cache(maxsize=None)
def _symmetry(code: tuple[int, ...]) -> int:
    if code == (0,):
        return 0
    left, right = _split(code)
    own = 0 if _canonical(left) == _canonical(right) else 1
    return own + _symmetry(left) + _symmetry(right)


def symmetry_count(t: Tree) -> int:
    """Number of vertices whose two subtrees differ as non-planar trees.

    ``2 ** symmetry_count(t)`` is the number of distinct planar trees reachable
    from ``t`` by twisting vertices.
    """
    return _symmetry(t.code)


def twist_orbit(t: Tree) -> set[Tree]:
    """All planar trees reachable by twisting any subset of vertices (brute force)."""

    def orbit(code):
        if code == (0,):
            return {code}
        left, right = _split(code)
        out = set()
        for a, b in product(orbit(left), orbit(right)):
            out.add(_shift(a) + (1,) + _shift(b))
            out.add(_shift(b) + (1,) + _shift(a))
        return out

    return {Tree(c) for c in orbit(t.code)}


@dataclass(frozen=True)
class TreeTriple:
    tree: Tree
    weight: int
    symmetry: int

    @classmethod
    def of(cls, t: Tree) -> "TreeTriple":
        return cls(t, weight(t), symmetry_count(t))

    def generation(self) -> str:
        """Root-graft decomposition ``left*right`` (empty for the leaf)."""
        if self.tree.is_leaf:
            return ""
        a, b = self.tree.children
        return f"{a}*{b}"


@dataclass(frozen=True)
class Forest:
    """Trees of one grade in tree order, with weights and symmetries."""

    grade: int
    trees: tuple[TreeTriple, ...]
    planar: bool = True

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]

    @property
    def codes(self) -> list[str]:
        return [str(tt.tree) for tt in self.trees]

    def rows(self) -> list[dict]:
        return [
            {
                "grade": self.grade,
                "code": str(tt.tree),
                "weight": tt.weight,
                "symmetry": tt.symmetry,
                "generation": tt.generation(),
            }
            for tt in self.trees
        ]


FOREST_COLUMNS = ("grade", "code", "weight", "symmetry", "generation")


def forests_to_csv(forests: Iterable[Forest]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FOREST_COLUMNS, lineterminator="\n")
    w.writeheader()
    for f in forests:
        w.writerows(f.rows())
    return buf.getvalue()


def forests_to_json(forests: Iterable[Forest]) -> str:
    rows = [r for f in forests for r in f.rows()]
    return json.dumps(rows, indent=1)


def enumerate_planar(n: int, cap: int | None = None) -> Forest:
    """All planar trees of grade ``n`` (Catalan many) in tree order."""
    _check_cap(n, cap)
    trees = tuple(TreeTriple.of(Tree(c)) for c in _planar_codes(n))
    return Forest(n, trees, planar=True)


@lru_cache(maxsize=None)
def _nonplanar_codes(n: int) -> tuple[tuple[int, ...], ...]:
    if n == 0:
        return ((0,),)
    reps = set()
    for ga in range(0, (n - 1) // 2 + 1):
        for a in _nonplanar_codes(ga):
            for b in _nonplanar_codes(n - 1 - ga):
                reps.add(_canonical(_shift(a) + (1,) + _shift(b)))
    return tuple(sorted(reps, key=_order_key))


def enumerate_nonplanar(n: int, cap: int | None = None) -> Forest:
    """Canonical representatives of the twist classes of grade ``n``, in tree order."""
    _check_cap(n, cap)
    trees = tuple(TreeTriple.of(Tree(c)) for c in _nonplanar_codes(n))
    return Forest(n, trees, planar=False)
