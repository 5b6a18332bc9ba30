"""Closed-form and characteristics oracles for the classical kernels.

* constant kernel: transform-side solution ``xi / (1 + t xi / 2)``;
* multiplicative kernel ``K = x y`` with data ``e^{-x}/x``: the Bessel solution
  ``exp(-(1+t) x) I1(2 x sqrt t) / (x^2 sqrt t)`` up to gelation at ``t = 1``;
* additive kernel via the time change from the multiplicative one (unit first
  moment assumed), and the Burgers characteristics ``h = s + t xi(h)``.

The modified Bessel function ``I1`` is implemented here: power series up to
argument 20, scaled asymptotic expansion beyond.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from coagtree.errors import DomainError, NoConvergence

__all__ = [
    "BernsteinFunction",
    "constant_kernel_solution",
    "bessel_i1",
    "bessel_i1e",
    "multiplicative_bessel",
    "additive_from_multiplicative",
    "multiplicative_from_additive",
    "burgers_characteristics",
    "curve_to_csv",
]

BESSEL_SEAM = 20.0


@dataclass(frozen=True)
class BernsteinFunction:
    """A function of ``s >= 0`` standing for ``int (1 - e^{-s x}) g(x) dx``."""

    evaluator: Callable[[float], float]

    def __call__(self, s):
        return self.evaluator(s)

    @classmethod
    def of_samples(cls, x: np.ndarray, g: np.ndarray, h: float) -> "BernsteinFunction":
        """Riemann-sum transform of sampled density values."""
        x = np.asarray(x, dtype=float)
        g = np.asarray(g, dtype=float)
        return cls(lambda s: float(h * np.sum(-np.expm1(-s * x) * g)))

    def is_nondecreasing(self, s_values: Iterable[float]) -> bool:
        vals = [self(s) for s in s_values]
        return all(b >= a for a, b in zip(vals, vals[1:]))


def exponential_data() -> BernsteinFunction:
    """Transform of ``e^{-x}``: ``s / (1 + s)``."""
    return BernsteinFunction(lambda s: s / (1 + s))


def constant_kernel_solution(xi: BernsteinFunction, t: float) -> BernsteinFunction:
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return BernsteinFunction(lambda s: (lambda v: v / (1 + t * v / 2))(xi(s)))


# ------------------------------------------------------------------- Bessel


def _i1_series(z: np.ndarray) -> np.ndarray:
    q = (z / 2) ** 2
    term = z / 2
    total = term.copy()
    for k in range(1, 200):
        term = term * q / (k * (k + 1))
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return total


def _i1e_asymptotic(z: np.ndarray) -> np.ndarray:
    """``e^{-z} I1(z)`` from the large-argument expansion (z > 20)."""
    total = np.ones_like(z)
    term = np.ones_like(z)
    prev = np.full_like(z, np.inf)
    for k in range(1, 60):
        term = -term * (4.0 - (2 * k - 1) ** 2) / (8.0 * k * z)
        # stop each entry at its smallest term; beyond it the series diverges
        active = np.abs(term) < prev
        if not np.any(active):
            break
        total = np.where(active, total + term, total)
        prev = np.where(active, np.abs(term), 0.0)
        if np.all(np.abs(term) <= 1e-17):
            break
    return total / np.sqrt(2 * np.pi * z)


def bessel_i1e(z):
    """Exponentially scaled ``e^{-|z|} I1(z)``."""
    z = np.asarray(z, dtype=float)
    sign = np.sign(z)
    a = np.abs(z)
    out = np.empty_like(a)
    small = a <= BESSEL_SEAM
    if np.any(small):
        out[small] = _i1_series(a[small]) * np.exp(-a[small])
    if np.any(~small):
        out[~small] = _i1e_asymptotic(a[~small])
    out = sign * out
    return out if out.ndim else float(out)


def bessel_i1(z):
    """Modified Bessel function of the first kind, order one."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    out = np.empty_like(a)
    small = a <= BESSEL_SEAM
    if np.any(small):
        out[small] = _i1_series(a[small])
    if np.any(~small):
        with np.errstate(over="ignore"):
            out[~small] = _i1e_asymptotic(a[~small]) * np.exp(a[~small])
    out = np.sign(z) * out
    return out if out.ndim else float(out)


def multiplicative_bessel(x, t: float):
    """Density of the ``K = x y`` solution from data ``e^{-x}/x`` at time ``0 <= t <= 1``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("mass must be positive")
    if t < 0 or t > 1:
        raise DomainError(f"time must lie in [0, 1], got {t}")
    if t == 0:
        out = np.exp(-x) / x
    else:
        r = math.sqrt(t)
        z = 2 * x * r
        out = np.exp(-((1 - r) ** 2) * x) * bessel_i1e(z) / (x * x * r)
    return out if np.ndim(out) else float(out)


# ----------------------------------------------------- additive / Burgers


def additive_from_multiplicative(gf: Callable[[float, float], float], t: float) -> Callable[[float], float]:
    """``s -> (1 - t)^{-1} gf(s, -log(1 - t))`` for ``0 <= t < 1``.

    Assumes data normalised to unit first moment.
    """
    if not 0 <= t < 1:
        raise DomainError(f"time must lie in [0, 1), got {t}")
    pref = 1 / (1 - t)
    tau = -math.log1p(-t)
    return lambda s: pref * gf(s, tau)


def multiplicative_from_additive(hf: Callable[[float, float], float], tau: float) -> Callable[[float], float]:
    """Inverse time change: ``s -> e^{-tau} hf(s, 1 - e^{-tau})``."""
    if tau < 0:
        raise DomainError(f"time must be non-negative, got {tau}")
    t = -math.expm1(-tau)
    damp = math.exp(-tau)
    return lambda s: damp * hf(s, t)


def burgers_characteristics(
    xi: Callable[[float], float],
    t: float,
    s: float,
    dxi: Callable[[float], float] | None = None,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> float:
    """Solve ``h = s + t xi(h)`` and return ``xi(h)``.

    Newton's method, falling back to a fixed-point update whenever the Newton
    step fails to reduce the residual. Raises :class:`NoConvergence` when the
    iteration stalls or the characteristics have crossed (``t xi'(h) >= 1``).
    """
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    if t == 0:
        return xi(s)
    if dxi is None:

        def dxi(v):
            d = 1e-6 * max(1.0, abs(v))
            return (xi(v + d) - xi(v - d)) / (2 * d)

    h = s + t * xi(s)
    for _ in range(max_iter):
        r = h - s - t * xi(h)
        slope = 1 - t * dxi(h)
        nxt = h - r / slope if slope > 0 else None
        if nxt is None or not math.isfinite(nxt) or abs(nxt - s - t * xi(nxt)) > abs(r):
            nxt = s + t * xi(h)
        if not math.isfinite(nxt):
            break
        done = abs(nxt - h) <= tol * max(1.0, abs(h))
        h = nxt
        if done:
            if 1 - t * dxi(h) <= 0:
                raise NoConvergence(f"characteristics cross at t={t}, s={s}")
            return xi(h)
    raise NoConvergence(f"no convergence at t={t}, s={s} after {max_iter} iterations")


def curve_to_csv(x: Iterable[float], y: Iterable[float], columns=("x", "value")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for a, b in zip(x, y):
        w.writerow([repr(float(a)), repr(float(b))])
    return buf.getvalue()
