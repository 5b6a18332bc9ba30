"""Convergence studies, the invariant suite and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from coagtree import __version__
from coagtree.errors import CoagTreeError
from coagtree.exact import (
    bessel_i1e,
    burgers_characteristics,
    constant_kernel_solution,
    exponential_data,
    multiplicative_bessel,
)
from coagtree.series import (
    build_branch_matrix,
    check_grafting_identity,
    exp_form_coefficients,
    resolvent_solve,
    solution_coefficients,
)
from coagtree.solver import SolverConfig, build_plan, run, step
from coagtree.spectral import (
    GridFunction,
    GridSpec,
    KernelSpec,
    TransformEngine,
    direct_star_oracle,
    star_product,
)
from coagtree.trees import (
    catalan,
    enumerate_nonplanar,
    enumerate_planar,
    forests_to_csv,
)

GOLDEN_DIR = Path(__file__).parent / "data" / "golden"

__all__ = [
    "GOLDEN_DIR",
    "error_norm",
    "Cell",
    "ConvergenceResult",
    "fit_slopes",
    "run_convergence",
    "verify_suite",
    "Manifest",
    "sha256_file",
]


def error_norm(a: np.ndarray, b: np.ndarray, h: float) -> float:
    """Discrete L2 distance ``sqrt(h * sum (a - b)^2)``."""
    return float(np.sqrt(h * np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


# --------------------------------------------------------------- convergence


@dataclass
class Cell:
    order: int
    steps: int
    error: float = math.nan
    rel_error: float = math.nan
    status: str = "ok"
    pre_floor: bool = False


@dataclass
class SlopeFit:
    order: int
    slope: float | None
    points: int
    last_local: float | None


@dataclass
class ConvergenceResult:
    cells: list[Cell]
    fits: dict[int, SlopeFit]
    plateau: float | None
    reference: str

    def errors_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "M", "error", "rel_error", "pre_floor", "status"])
        for c in self.cells:
            w.writerow([c.order, c.steps, repr(c.error), repr(c.rel_error), int(c.pre_floor), c.status])
        return buf.getvalue()

    def slopes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "slope", "points", "last_local_slope"])
        for n in sorted(self.fits):
            f = self.fits[n]
            w.writerow([n, "" if f.slope is None else repr(f.slope), f.points,
                        "" if f.last_local is None else repr(f.last_local)])
        return buf.getvalue()


def _local_slope(c0: Cell, c1: Cell) -> float:
    return -math.log(c1.error / c0.error) / math.log(c1.steps / c0.steps)


def fit_slopes(cells: list[Cell], floor_factor: float = 2.0, flat_slope: float = 0.5) -> tuple[dict[int, SlopeFit], float | None]:
    """Least-squares slope of ``-log error`` against ``log M`` per order, before the floor.

    A cell is on the floor when the error stopped decreasing (local slope below
    ``flat_slope``). The plateau level is the smallest such error; for each
    order the fit uses the leading run of cells that are not flat and whose
    error exceeds ``floor_factor`` times the plateau. At least two cells are
    needed for a slope.
    """
    by_order: dict[int, list[Cell]] = {}
    for c in cells:
        by_order.setdefault(c.order, []).append(c)
    flat = []
    for series in by_order.values():
        series.sort(key=lambda c: c.steps)
        for a, b in zip(series, series[1:]):
            if a.status == b.status == "ok" and a.error > 0 and b.error > 0 and _local_slope(a, b) < flat_slope:
                flat.append(b.error)
    plateau = min(flat) if flat else None
    fits = {}
    for n, series in sorted(by_order.items()):
        pre: list[Cell] = []
        for c in series:
            if c.status != "ok" or not c.error > 0:
                break
            if plateau is not None and c.error <= floor_factor * plateau:
                break
            if pre and _local_slope(pre[-1], c) < flat_slope:
                break
            pre.append(c)
        for c in series:
            c.pre_floor = c in pre
        if len(pre) >= 2:
            lx = np.log([c.steps for c in pre])
            ly = np.log([c.error for c in pre])
            slope = -float(np.polyfit(lx, ly, 1)[0])
            last = _local_slope(pre[-2], pre[-1])
        else:
            slope = last = None
        fits[n] = SlopeFit(n, slope, len(pre), last)
    return fits, plateau


def _solve_cell(args) -> tuple[int, int, np.ndarray | None, str]:
    cfg, order, steps = args
    try:
        sc = SolverConfig(cfg.grid, cfg.kernel, order, steps, cfg.horizon, cfg.data, (), cfg.gelation_time)
        traj = run(sc, engine=TransformEngine())
        return order, steps, np.asarray(traj.final.values), "ok"
    except (CoagTreeError, ValueError, ArithmeticError) as exc:
        return order, steps, None, f"failed: {type(exc).__name__}: {exc}"


def run_convergence(cfg, spec=None) -> ConvergenceResult:
    """Error table over ``orders x steps`` against the exact or a self reference.

    ``cfg`` is a :class:`coagtree.config.RunConfig`; ``spec`` defaults to its
    convergence section. A failing cell is recorded with its error message and
    the sweep continues.
    """
    spec = spec or cfg.convergence
    if spec is None:
        raise ValueError("no convergence section in the configuration")
    grid = cfg.grid
    jobs = [(cfg, n, m) for n in spec.orders for m in spec.steps]
    if spec.reference == "exact":
        ref = multiplicative_bessel(grid.nodes, cfg.horizon)
    else:
        jobs.append((cfg, spec.reference_order, spec.resolved_reference_steps))
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_solve_cell, jobs))
    else:
        results = [_solve_cell(j) for j in jobs]
    if spec.reference != "exact":
        *results, (_, _, ref, status) = results
        if ref is None:
            raise RuntimeError(f"reference run {status}")
    ref_norm = error_norm(ref, 0, grid.h)
    cells = []
    for order, steps, values, status in sorted(results, key=lambda r: (r[0], r[1])):
        c = Cell(order, steps, status=status)
        if values is not None:
            c.error = error_norm(values, ref, grid.h)
            c.rel_error = c.error / ref_norm
        cells.append(c)
    fits, plateau = fit_slopes(cells, spec.floor_factor)
    return ConvergenceResult(cells, fits, plateau, spec.reference)


# ------------------------------------------------------------------- verify


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def _golden_check(name: str, produced: str, path: Path) -> Check:
    try:
        expected = path.read_text()
    except OSError as exc:
        return Check(name, False, f"cannot read {path.name}: {exc.strerror}")
    if produced == expected:
        return Check(name, True, path.name)
    a, b = produced.splitlines(), expected.splitlines()
    for i, (x, y) in enumerate(zip(a, b), start=1):
        if x != y:
            return Check(name, False, f"{path.name} line {i}: expected {y!r}, produced {x!r}")
    return Check(name, False, f"{path.name}: {len(b)} lines expected, {len(a)} produced")


def verify_suite(golden_dir: Path | None = None) -> list[Check]:
    """Fast invariant checks across all modules."""
    golden = Path(golden_dir) if golden_dir else GOLDEN_DIR
    out: list[Check] = []

    out.append(_golden_check("golden.planar", forests_to_csv(enumerate_planar(n) for n in range(5)), golden / "planar.csv"))
    out.append(_golden_check("golden.nonplanar", forests_to_csv(enumerate_nonplanar(n) for n in range(7)), golden / "nonplanar.csv"))
    try:
        rows = [[int(v) for v in line.split()] for line in (golden / "branch_matrix.txt").read_text().splitlines() if line.strip()]
        dense = build_branch_matrix(4).dense(len(rows), len(rows[0]))
        out.append(Check("golden.branch_matrix", dense == rows, "branch_matrix.txt"))
    except (OSError, ValueError, IndexError) as exc:
        out.append(Check("golden.branch_matrix", False, str(exc)))

    for n in range(9):
        planar = enumerate_planar(n)
        out.append(Check(f"count.planar.{n}", len(planar) == catalan(n), f"{len(planar)}"))
        total = sum(tt.weight for tt in planar)
        out.append(Check(f"weight_sum.{n}", total == math.factorial(n), f"{total} vs {math.factorial(n)}"))
        orbit_total = sum(2**tt.symmetry for tt in enumerate_nonplanar(n))
        out.append(Check(f"orbit_sum.{n}", orbit_total == catalan(n), f"{orbit_total}"))

    for N in range(6):
        for t in (Fraction(1), Fraction(1, 2), Fraction(1, 3)):
            a = solution_coefficients(t, N)
            ok = a == exp_form_coefficients(t, N) == resolvent_solve(t, N)
            out.append(Check(f"solution_forms.N{N}.t{t}", ok))
    for n in range(7):
        out.append(Check(f"grafting_identity.{n}", check_grafting_identity(n).ok))

    grid = GridSpec(10.0, 64)
    rng = np.random.default_rng(7)
    g = GridFunction(grid, rng.random(grid.n))
    f = GridFunction(grid, rng.random(grid.n))
    for label, k in [("lambda2", KernelSpec.power(2)), ("additive", KernelSpec.additive(lambda x: x))]:
        a = star_product(g, f, k).values
        b = direct_star_oracle(g, f, k).values
        rel = float(np.linalg.norm(a - b) / np.linalg.norm(b))
        out.append(Check(f"star_oracle.{label}", rel <= 1e-10, f"{rel:.2e}"))

    eng = TransformEngine()
    g0 = GridFunction(GridSpec(100.0, 1024), np.exp(-GridSpec(100.0, 1024).nodes))
    before = eng.count
    step(g0, 0.01, build_plan(3), KernelSpec.power(2), eng)
    used = eng.count - before
    out.append(Check("fft_budget.N3", used <= 10, f"{used} transforms"))

    x = np.linspace(0.01, 100, 200)
    lim = float(np.max(np.abs(multiplicative_bessel(x, 1e-24) * x * np.exp(x) - 1)))
    out.append(Check("bessel.t0_limit", lim <= 1e-10, f"{lim:.2e}"))
    seam = abs(bessel_i1e(20.0) - bessel_i1e(np.nextafter(20.0, 21.0)))
    out.append(Check("bessel.seam", seam <= 1e-12 * bessel_i1e(20.0), f"{seam:.2e}"))

    xi = exponential_data()
    d1 = _forward_derivative(lambda t: burgers_characteristics(xi, t, 1.0), 1, 1e-3)
    out.append(Check("burgers.first_coefficient", abs(d1 - 0.125) <= 1e-6, f"{d1:.10f}"))
    d = 1e-3
    G = lambda t: constant_kernel_solution(xi, t)(1.0)
    fd = (G(0.5 - 2 * d) - 8 * G(0.5 - d) + 8 * G(0.5 + d) - G(0.5 + 2 * d)) / (12 * d)
    resid = abs(fd + 0.5 * G(0.5) ** 2)
    out.append(Check("constant_kernel.equation", resid <= 1e-8, f"{resid:.2e}"))
    return out


_FORWARD = {
    1: (-25 / 12, 4.0, -3.0, 4 / 3, -1 / 4),
    2: (35 / 12, -26 / 3, 19 / 2, -14 / 3, 11 / 12),
}


def _forward_derivative(f: Callable[[float], float], order: int, d: float) -> float:
    """One-sided five-point derivative at 0 (first or second)."""
    coeffs = _FORWARD[order]
    return sum(c * f(k * d) for k, c in enumerate(coeffs)) / d**order


# ----------------------------------------------------------------- manifest


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Manifest:
    """Record of a CLI run: config echo, version, timing and output checksums."""

    command: str
    config: dict = field(default_factory=dict)
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    outputs: list[Path] = field(default_factory=list)

    def add(self, path: Path, text: str) -> Path:
        path = Path(path)
        path.write_text(text)
        self.outputs.append(path)
        return path

    def write(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        payload = {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "started": self.started,
            "finished": datetime.now(timezone.utc).isoformat(),
            "outputs": [{"path": p.name, "sha256": sha256_file(p)} for p in self.outputs],
        }
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path
