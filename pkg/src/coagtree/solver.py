"""Order-N time stepping by the truncated non-planar tree expansion.

One step of size ``dt`` replaces ``g`` by

    g + sum_{n=1..N} dt^n / n! * sum_{|tau| = n} weight(tau) 2^sigma(tau) g(tau)

where ``tau`` runs over non-planar representatives, ``g(leaf) = g`` and
``g(graft(a, b))`` is the physical-space star product of ``g(a)`` and ``g(b)``.
Below the top grade every ``g(tau)`` is needed in physical space anyway (it
feeds the next grade), so those grades are summed there; the top grade is
accumulated spectrally and inverted once.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from coagtree.errors import ConfigError, NonFiniteValue
from coagtree.spectral import (
    ENGINE,
    GridFunction,
    GridSpec,
    KernelSpec,
    TransformEngine,
    lift,
    star_lifted,
)
from coagtree.trees import LEAF, Tree, _check_cap, canonical_nonplanar, enumerate_nonplanar, graft, split_root

__all__ = [
    "PlanStep",
    "EvaluationPlan",
    "build_plan",
    "INITIAL_DATA",
    "SolverConfig",
    "Trajectory",
    "step",
    "run",
    "formal_step",
]


@dataclass(frozen=True)
class PlanStep:
    code: Tree
    left: Tree
    right: Tree
    weight: int
    symmetry: int

    @property
    def grade(self) -> int:
        return self.code.grade

    @property
    def multiplicity(self) -> int:
        """``weight * 2^symmetry``: total weight of the twist class."""
        return self.weight * 2**self.symmetry

    @property
    def coefficient(self) -> Fraction:
        return Fraction(self.multiplicity, math.factorial(self.grade))


@dataclass(frozen=True)
class EvaluationPlan:
    order: int
    steps: tuple[PlanStep, ...]

    def by_grade(self, n: int) -> tuple[PlanStep, ...]:
        return tuple(s for s in self.steps if s.grade == n)

    @property
    def codes(self) -> list[str]:
        return [str(s.code) for s in self.steps]


def build_plan(order: int, cap: int | None = None) -> EvaluationPlan:
    if order < 1:
        raise ValueError("order must be at least 1")
    _check_cap(order, cap)
    steps = []
    seen = {LEAF}
    for n in range(1, order + 1):
        for tt in enumerate_nonplanar(n, cap):
            left, right = (canonical_nonplanar(c) for c in split_root(tt.tree))
            assert left in seen and right in seen and graft(left, right) == tt.tree
            steps.append(PlanStep(tt.tree, left, right, tt.weight, tt.symmetry))
            seen.add(tt.tree)
    return EvaluationPlan(order, tuple(steps))


# ------------------------------------------------------------------ stepping


class _NumericOps:
    def __init__(self, grid: GridSpec, kernel: KernelSpec, engine: TransformEngine):
        self.grid = grid
        self.engine = engine
        self.factors = kernel.sampled_factors(grid)
        self.c = kernel.coefficient_matrix
        self.x = grid.nodes

    def lift(self, v):
        return lift(v, self.grid, self.factors, self.engine)

    def star(self, a, b):
        return star_lifted(a, b, self.c)

    def lower(self, spectral):
        return self.engine.inverse_array(self.grid, spectral).real / self.x

    def scalar(self, q: Fraction):
        return float(q)


def _generic_step(ops, g, dt, plan: EvaluationPlan):
    lifted = {LEAF: ops.lift(g)}
    out = g
    scale = 1
    N = plan.order
    for n in range(1, N + 1):
        scale = scale * dt / n
        acc = None
        for st in plan.by_grade(n):
            xi = ops.star(lifted[st.left], lifted[st.right])
            if n < N:
                p = ops.lower(xi)
                lifted[st.code] = ops.lift(p)
                term = st.multiplicity * p
            else:
                term = st.multiplicity * xi
            acc = term if acc is None else acc + term
        if n == N:
            acc = ops.lower(acc)
        out = out + ops.scalar(scale) * acc
    return out


def step(
    g: GridFunction,
    dt: float,
    plan: EvaluationPlan,
    kernel: KernelSpec,
    engine: TransformEngine | None = None,
) -> GridFunction:
    """Advance ``g`` by one step of size ``dt``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if dt == 0:
        return g
    ops = _NumericOps(g.grid, kernel, engine or ENGINE)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _generic_step(ops, g.values, Fraction(dt), plan)
    if not np.all(np.isfinite(out)):
        raise NonFiniteValue("non-finite values after step (blow-up or gelation proximity)")
    return GridFunction(g.grid, out)


# ------------------------------------------------------ formal (exact) check


class _Formal(dict):
    """Commutative grafting algebra over twist classes with rational coefficients."""

    def __add__(self, other):
        out = _Formal(self)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return out

    def __rmul__(self, a):
        return _Formal({k: a * v for k, v in self.items()})


class _FormalOps:
    def lift(self, v):
        return v

    def star(self, a, b):
        out = _Formal()
        for ta, ca in a.items():
            for tb, cb in b.items():
                t = canonical_nonplanar(graft(ta, tb))
                out[t] = out.get(t, 0) + ca * cb
        return out

    def lower(self, v):
        return v

    def scalar(self, q):
        return q


def formal_step(dt, plan: EvaluationPlan) -> dict[Tree, Fraction]:
    """Run one step symbolically from the leaf; returns class -> coefficient.

    The coefficient of class ``tau`` equals ``dt^|tau| / |tau|!`` times the
    total weight of all planar trees in the class, i.e. the exact series
    regrouped by twist classes.
    """
    out = _generic_step(_FormalOps(), _Formal({LEAF: Fraction(1)}), Fraction(dt), plan)
    return {t: Fraction(c) for t, c in out.items() if c}


# --------------------------------------------------------------------- runs


def _exp_over_x(x):
    return np.exp(-x) / x


def _exp(x):
    return np.exp(-x)


# name -> (sampler, analytic second moment)
INITIAL_DATA: Mapping[str, tuple[Callable[[np.ndarray], np.ndarray], float]] = {
    "exp_over_x": (_exp_over_x, 1.0),
    "exp": (_exp, 2.0),
}


@dataclass(frozen=True)
class SolverConfig:
    grid: GridSpec
    kernel: KernelSpec
    order: int
    steps: int
    horizon: float
    data: str = "exp_over_x"
    snapshots: tuple[int, ...] = ()
    gelation_time: float | None = None

    def __post_init__(self):
        if self.data not in INITIAL_DATA:
            raise ConfigError(f"unknown initial data {self.data!r}; known: {sorted(INITIAL_DATA)}", field="initial.data")
        if int(self.steps) < 1:
            raise ConfigError("step count must be >= 1", field="run.steps")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError("horizon must be positive", field="run.horizon")
        if int(self.order) < 1:
            raise ConfigError("order must be >= 1", field="run.order")
        for s in self.snapshots:
            if not 0 <= s <= self.steps:
                raise ConfigError(f"snapshot step {s} outside 0..{self.steps}", field="run.snapshots")
        tg = self.gelation_limit()
        if tg is not None and self.horizon >= tg:
            raise ConfigError(f"horizon {self.horizon} reaches the gelation time {tg:g}", field="run.horizon")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def gelation_limit(self) -> float | None:
        """Gelation time guarded against, or ``None`` for non-gelling kernels.

        For ``K = x y`` it is ``1 / M2`` of the initial data (analytic second
        moment for the named data). Other kernels are unguarded unless
        ``gelation_time`` is set.
        """
        if self.gelation_time is not None:
            return self.gelation_time
        if self.kernel.variant == "power" and self.kernel.lam == 2.0:
            return 1.0 / INITIAL_DATA[self.data][1]
        return None

    def initial(self) -> GridFunction:
        return GridFunction(self.grid, INITIAL_DATA[self.data][0](self.grid.nodes))


@dataclass
class Trajectory:
    config: SolverConfig
    times: list[float] = field(default_factory=list)
    m0: list[float] = field(default_factory=list)
    m1: list[float] = field(default_factory=list)
    fft_count: list[int] = field(default_factory=list)
    max_value: list[float] = field(default_factory=list)
    snapshots: dict[int, GridFunction] = field(default_factory=dict)
    m0_increases: list[int] = field(default_factory=list)
    final: GridFunction | None = None

    def record(self, t, g: GridFunction, ffts: int):
        h = g.grid.h
        x = g.grid.nodes
        self.times.append(t)
        self.m0.append(float(h * g.values.sum()))
        self.m1.append(float(h * (x * g.values).sum()))
        self.fft_count.append(ffts)
        self.max_value.append(float(np.max(g.values)))

    @property
    def m1_drift(self) -> float:
        """Largest relative deviation of the first moment from its initial value."""
        m = np.asarray(self.m1)
        return float(np.max(np.abs(m - m[0])) / abs(m[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "M0", "M1", "fft_count", "max_value"])
        for row in zip(self.times, self.m0, self.m1, self.fft_count, self.max_value):
            t, a, b, c, d = row
            w.writerow([repr(t), repr(a), repr(b), c, repr(d)])
        return buf.getvalue()


def run(config: SolverConfig, engine: TransformEngine | None = None, m0_tol: float = 1e-6) -> Trajectory:
    """Integrate from the sampled initial data over ``[0, horizon]`` in equal steps."""
    engine = engine or ENGINE
    plan = build_plan(config.order)
    g = config.initial()
    traj = Trajectory(config)
    traj.record(0.0, g, 0)
    if 0 in config.snapshots:
        traj.snapshots[0] = g
    dt = config.dt
    for m in range(1, config.steps + 1):
        before = engine.count
        try:
            g = step(g, dt, plan, config.kernel, engine)
        except NonFiniteValue as exc:
            raise NonFiniteValue(f"step {m}: {exc}", step=m) from None
        traj.record(m * dt, g, engine.count - before)
        if traj.m0[-1] > traj.m0[-2] * (1 + m0_tol):
            traj.m0_increases.append(m)
        if m in config.snapshots:
            traj.snapshots[m] = g
    traj.final = g
    return traj
