"""FFT realisation of the coagulation star product for separable kernels.

Grid functions live on the equispaced positive nodes ``x_v = (v+1) h`` with
``h = L/n``. The discrete transform is

    F_k = h * sum_v exp(2 pi i s_k x_v) f_v,      s_k = k / (n h),

computed with numpy's FFT. By default the phase uses the true node positions;
``GridSpec(phase_offset=False)`` drops the ``e^{2 pi i k/n}`` node-offset factor
and sums over ``v h`` instead. Frequencies are kept in FFT-native order:
index ``j`` holds integer frequency ``k = fftfreq(n)[j] * n``, so index 0 is the
zero frequency.

For ``K(y, z) = sum_ij c_ij k_i(y) k_j(z)`` the star product is

    S = 1/2 sum_ij c_ij [ F(x k_i g) (F(k_j f) - F_0(k_j f))
                         + (F(k_i g) - F_0(k_i g)) F(x k_j f) ]

which is the double sum of ``H(s, y, z) K(y, z) g(y) f(z)`` with
``H = 1/2 (y E_y (E_z - 1) + (E_y - 1) z E_z)`` and ``E_y = exp(2 pi i s y)``
factorised; :func:`direct_star_oracle` evaluates that double sum directly.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from coagtree.errors import GridMismatch, ResourceLimit, UnsupportedKernel

__all__ = [
    "GridSpec",
    "GridFunction",
    "SpectralFunction",
    "KernelSpec",
    "PowerFactor",
    "TransformEngine",
    "ENGINE",
    "forward_transform",
    "inverse_transform",
    "star_product",
    "direct_star_oracle",
    "moment",
    "sample",
]

ORACLE_MAX_NODES = 4096


@dataclass(frozen=True)
class GridSpec:
    L: float = 100.0
    n: int = 2**14
    phase_offset: bool = True

    def __post_init__(self):
        n = int(self.n)
        if n < 2 or n & (n - 1):
            raise ValueError(f"node count must be a power of two >= 2, got {self.n}")
        L = float(self.L)
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"domain length must be positive, got {self.L}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def nodes(self) -> np.ndarray:
        return ENGINE.plan(self).nodes

    @property
    def frequencies(self) -> np.ndarray:
        """``s_k`` in FFT-native order."""
        return ENGINE.plan(self).freqs

    @property
    def frequency_index(self) -> np.ndarray:
        """Signed integer ``k`` stored at each native index."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(int)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples ``g(x_v)`` on a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", _frozen(v))

    def _check(self, other):
        if other.grid != self.grid:
            raise GridMismatch(f"{other.grid} differs from {self.grid}")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def scale(self, a: float) -> "GridFunction":
        return GridFunction(self.grid, a * self.values)

    def norm(self) -> float:
        """Discrete L2 norm, ``sqrt(h * sum g^2)``."""
        return float(np.sqrt(self.grid.h * np.sum(self.values**2)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, v in zip(self.grid.nodes, self.values):
            w.writerow([repr(float(x)), repr(float(v))])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex transform values at ``s_k`` in FFT-native order."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def zero_value(self) -> complex:
        return complex(self.values[0])

    def __add__(self, other: "SpectralFunction") -> "SpectralFunction":
        if other.grid != self.grid:
            raise GridMismatch(f"{other.grid} differs from {self.grid}")
        return SpectralFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "SpectralFunction") -> "SpectralFunction":
        if other.grid != self.grid:
            raise GridMismatch(f"{other.grid} differs from {self.grid}")
        return SpectralFunction(self.grid, self.values - other.values)

    def scale(self, a) -> "SpectralFunction":
        return SpectralFunction(self.grid, a * self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "s_k", "re", "im"])
        for k, s, v in zip(self.grid.frequency_index, self.grid.frequencies, self.values):
            w.writerow([int(k), repr(float(s)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


@dataclass(frozen=True)
class _Plan:
    nodes: np.ndarray
    freqs: np.ndarray
    phase: np.ndarray | None
    phase_conj: np.ndarray | None
    positions: np.ndarray  # where the transform's exponential is evaluated


class TransformEngine:
    """Transforms with a per-grid plan cache and an atomic call counter.

    Every forward or inverse transform increments :attr:`count` by one.
    """

    def __init__(self):
        self._plans: dict[GridSpec, _Plan] = {}
        self._plan_lock = threading.Lock()
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def _tick(self):
        with self._count_lock:
            self._count += 1

    def plan(self, grid: GridSpec) -> _Plan:
        p = self._plans.get(grid)
        if p is not None:
            return p
        with self._plan_lock:
            p = self._plans.get(grid)
            if p is None:
                n, h = grid.n, grid.h
                nodes = _frozen((np.arange(n) + 1) * h)
                freqs = _frozen(np.fft.fftfreq(n, d=h))
                if grid.phase_offset:
                    phase = _frozen(np.exp(2j * np.pi * np.fft.fftfreq(n)))
                    p = _Plan(nodes, freqs, phase, _frozen(phase.conj()), nodes)
                else:
                    p = _Plan(nodes, freqs, None, None, _frozen(nodes - h))
                self._plans[grid] = p
            return p

    def forward_array(self, grid: GridSpec, f: np.ndarray) -> np.ndarray:
        p = self.plan(grid)
        self._tick()
        out = (grid.h * grid.n) * np.fft.ifft(f)
        return out * p.phase if p.phase is not None else out

    def inverse_array(self, grid: GridSpec, F: np.ndarray) -> np.ndarray:
        """Complex inverse; the real part is the physical function."""
        p = self.plan(grid)
        self._tick()
        if p.phase_conj is not None:
            F = F * p.phase_conj
        return np.fft.fft(F) / (grid.n * grid.h)


ENGINE = TransformEngine()


def forward_transform(f: GridFunction, engine: TransformEngine | None = None) -> SpectralFunction:
    engine = engine or ENGINE
    return SpectralFunction(f.grid, engine.forward_array(f.grid, f.values))


def inverse_transform(F: SpectralFunction, engine: TransformEngine | None = None) -> GridFunction:
    engine = engine or ENGINE
    return GridFunction(F.grid, engine.inverse_array(F.grid, F.values).real)


def sample(grid: GridSpec, fn: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    return GridFunction(grid, fn(grid.nodes))


def moment(g: GridFunction, k: int) -> float:
    """Riemann sum ``h * sum x^k g`` for the k-th moment."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    x = g.grid.nodes
    return float(g.grid.h * np.sum(x**k * g.values))


# ---------------------------------------------------------------- kernels

Factor = Callable[[np.ndarray], np.ndarray] | Sequence[float] | np.ndarray


def _one(x):
    return np.ones_like(x)


@dataclass(frozen=True)
class PowerFactor:
    """Picklable factor ``x -> x**exponent``."""

    exponent: float

    def __call__(self, x):
        return x**self.exponent


@dataclass(frozen=True)
class KernelSpec:
    """Separable-family kernel ``K(y, z) = sum_ij c_ij k_i(y) k_j(z)``.

    Build instances with the class methods; ``variant`` is one of
    ``constant``, ``power``, ``general``, ``sum``, ``additive``. Factors are
    callables of the node array or pre-sampled arrays of grid length.
    """

    variant: str
    factors: tuple = ()
    coefficients: tuple = ((1.0,),)
    lam: float | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        m = len(self.factors)
        if c.shape != (m, m):
            raise ValueError(f"coefficient matrix must be {m}x{m}, got {c.shape}")
        if not np.allclose(c, c.T, rtol=0, atol=0):
            raise ValueError("coefficient matrix must be symmetric")

    @classmethod
    def constant(cls) -> "KernelSpec":
        return cls("constant", (_one,))

    @classmethod
    def power(cls, lam: float) -> "KernelSpec":
        """``K(y, z) = (y z)^(lam/2)``."""
        lam = float(lam)
        if lam == 0:
            return cls("power", (_one,), lam=0.0)
        return cls("power", (PowerFactor(lam / 2),), lam=lam)

    @classmethod
    def general(cls, k: Factor) -> "KernelSpec":
        """``K(y, z) = k(y) k(z)`` for an arbitrary positive factor."""
        return cls("general", (k,))

    @classmethod
    def separable_sum(cls, factors: Sequence[Factor], coefficients) -> "KernelSpec":
        return cls("sum", tuple(factors), tuple(tuple(float(v) for v in row) for row in coefficients))

    @classmethod
    def additive(cls, k: Factor) -> "KernelSpec":
        """``K(y, z) = k(y) + k(z)``."""
        return cls("additive", (k, _one), ((0.0, 1.0), (1.0, 0.0)))

    @property
    def coefficient_matrix(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    def sampled_factors(self, grid: GridSpec) -> list[np.ndarray]:
        out = []
        x = grid.nodes
        for k in self.factors:
            v = np.asarray(k(x) if callable(k) else k, dtype=float)
            if v.shape != (grid.n,):
                raise GridMismatch(f"kernel factor has shape {v.shape}, grid has {grid.n} nodes")
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ValueError("kernel factor samples must be positive and finite")
            out.append(v)
        return out

    def matrix(self, grid: GridSpec) -> np.ndarray:
        """Dense ``K(x_mu, x_nu)`` on the nodes."""
        ks = self.sampled_factors(grid)
        c = self.coefficient_matrix
        K = np.zeros((grid.n, grid.n))
        for i, ki in enumerate(ks):
            for j, kj in enumerate(ks):
                if c[i, j]:
                    K += c[i, j] * np.outer(ki, kj)
        return K


def _require_kernel(k) -> KernelSpec:
    if not isinstance(k, KernelSpec):
        raise UnsupportedKernel(f"star product needs a separable KernelSpec, got {type(k).__name__}")
    return k


# ------------------------------------------------------------ star product


@dataclass(frozen=True)
class Lifted:
    """Transforms ``F(k_i g)`` and ``F(x k_i g)`` for every kernel factor."""

    plain: tuple[np.ndarray, ...]
    weighted: tuple[np.ndarray, ...]


def lift(values: np.ndarray, grid: GridSpec, factors: Sequence[np.ndarray], engine: TransformEngine) -> Lifted:
    x = grid.nodes
    plain = tuple(engine.forward_array(grid, k * values) for k in factors)
    weighted = tuple(engine.forward_array(grid, x * k * values) for k in factors)
    return Lifted(plain, weighted)


def star_lifted(a: Lifted, b: Lifted, c: np.ndarray) -> np.ndarray:
    out = 0
    for i in range(len(a.plain)):
        for j in range(len(b.plain)):
            if c[i, j]:
                fb = b.plain[j] - b.plain[j][0]
                ga = a.plain[i] - a.plain[i][0]
                out = out + c[i, j] * (a.weighted[i] * fb + ga * b.weighted[j])
    return 0.5 * out


def star_product(g: GridFunction, f: GridFunction, k: KernelSpec, engine: TransformEngine | None = None) -> SpectralFunction:
    k = _require_kernel(k)
    if g.grid != f.grid:
        raise GridMismatch(f"{g.grid} differs from {f.grid}")
    engine = engine or ENGINE
    grid = g.grid
    factors = k.sampled_factors(grid)
    a = lift(g.values, grid, factors, engine)
    b = lift(f.values, grid, factors, engine)
    return SpectralFunction(grid, star_lifted(a, b, k.coefficient_matrix))


def direct_star_oracle(g: GridFunction, f: GridFunction, K) -> SpectralFunction:
    """Double Riemann sum of ``H(s_k, y, z) K(y, z) g(y) f(z)`` at every frequency.

    ``K`` is a :class:`KernelSpec` or a vectorised callable ``K(y, z)``.
    Costs ``O(n^3)``; refuses grids above 4096 nodes.
    """
    if g.grid != f.grid:
        raise GridMismatch(f"{g.grid} differs from {f.grid}")
    grid = g.grid
    n = grid.n
    if n > ORACLE_MAX_NODES:
        raise ResourceLimit(f"oracle limited to {ORACLE_MAX_NODES} nodes, grid has {n}")
    x = grid.nodes
    pos = ENGINE.plan(grid).positions
    if isinstance(K, KernelSpec):
        Kmat = K.matrix(grid)
    else:
        Kmat = np.asarray(K(x[:, None], x[None, :]), dtype=float)
    W = Kmat * np.outer(g.values, f.values)
    out = np.empty(n, dtype=complex)
    for j, s in enumerate(grid.frequencies):
        E = np.exp(2j * np.pi * s * pos)
        # sum_yz 1/2 [y E_y (E_z - 1) + (E_y - 1) z E_z] W_yz
        out[j] = 0.5 * ((x * E) @ W @ (E - 1) + (E - 1) @ W @ (x * E))
    return SpectralFunction(grid, grid.h**2 * out)
