"""Run configuration from TOML or JSON files.

Recognised sections and keys::

    [grid]        L, n
    [kernel]      type = "power" | "constant" | "additive", lambda (power),
                  exponent (additive factor x^exponent, default 1)
    [initial]     data = "exp_over_x" | "exp"
    [run]         order, steps, horizon, snapshots (step indices),
                  gelation_time (override of the x*y guard)
    [convergence] orders, steps, reference = "exact" | "self",
                  reference_order, reference_steps, floor_factor, workers

Every parameter is explicit. Unknown keys are rejected so typos surface as
errors naming the field and, for TOML, its line.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import tomli

from coagtree.errors import ConfigError
from coagtree.solver import INITIAL_DATA, SolverConfig
from coagtree.spectral import GridSpec, KernelSpec, PowerFactor

__all__ = ["RunConfig", "ConvergenceSpec", "load_config", "parse_config", "kernel_from_config"]

_KNOWN = {
    "grid": {"L", "n"},
    "kernel": {"type", "lambda", "exponent"},
    "initial": {"data"},
    "run": {"order", "steps", "horizon", "snapshots", "gelation_time"},
    "convergence": {"orders", "steps", "reference", "reference_order", "reference_steps", "floor_factor", "workers"},
}


@dataclass(frozen=True)
class ConvergenceSpec:
    orders: tuple[int, ...]
    steps: tuple[int, ...]
    reference: str = "self"
    reference_order: int = 6
    reference_steps: int | None = None
    floor_factor: float = 2.0
    workers: int = 1

    @property
    def resolved_reference_steps(self) -> int:
        return self.reference_steps if self.reference_steps is not None else max(self.steps)


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    grid: GridSpec
    kernel: KernelSpec
    kernel_desc: dict
    data: str
    horizon: float
    order: int | None = None
    steps: int | None = None
    snapshots: tuple[int, ...] = ()
    gelation_time: float | None = None
    convergence: ConvergenceSpec | None = None

    def solver_config(self, order: int | None = None, steps: int | None = None) -> SolverConfig:
        order = order if order is not None else self.order
        steps = steps if steps is not None else self.steps
        if order is None:
            raise ConfigError("missing run order", field="run.order")
        if steps is None:
            raise ConfigError("missing run step count", field="run.steps")
        return SolverConfig(
            self.grid, self.kernel, order, steps, self.horizon, self.data,
            self.snapshots, self.gelation_time,
        )


class _Locator:
    """Maps ``section.key`` to a line number in TOML source text."""

    def __init__(self, text: str | None):
        self.lines = {}
        if text is None:
            return
        section = ""
        for i, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            m = re.match(r"^\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                self.lines.setdefault(section, i)
                continue
            m = re.match(r"^([A-Za-z_][\w-]*)\s*=", s)
            if m:
                self.lines.setdefault(f"{section}.{m.group(1)}", i)

    def __call__(self, name: str) -> int | None:
        return self.lines.get(name) or self.lines.get(name.split(".")[0])


def _get(d: dict, section: str, key: str, kind, where: _Locator, required=True, default=None):
    name = f"{section}.{key}"
    sec = d.get(section, {})
    if key not in sec:
        if required:
            raise ConfigError("required field is missing", field=name, line=where(section))
        return default
    v = sec[key]
    try:
        if kind is int:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise TypeError
            return int(v)
        if kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise TypeError
            return float(v)
        if kind is str:
            if not isinstance(v, str):
                raise TypeError
            return v
        if kind == "ints":
            if not isinstance(v, list) or not v:
                raise TypeError
            out = []
            for e in v:
                if isinstance(e, bool) or not isinstance(e, (int, float)) or int(e) != e:
                    raise TypeError
                out.append(int(e))
            return tuple(out)
    except TypeError:
        raise ConfigError(f"invalid value {v!r}", field=name, line=where(name)) from None
    raise AssertionError(kind)


def kernel_from_config(desc: dict) -> KernelSpec:
    kind = desc["type"]
    if kind == "power":
        return KernelSpec.power(desc["lambda"])
    if kind == "constant":
        return KernelSpec.constant()
    if kind == "additive":
        e = desc.get("exponent", 1.0)
        return KernelSpec.additive(PowerFactor(e))
    raise ValueError(kind)


def parse_config(d: dict[str, Any], source_text: str | None = None) -> RunConfig:
    where = _Locator(source_text)
    for section, body in d.items():
        if section not in _KNOWN:
            raise ConfigError("unknown section", field=section, line=where(section))
        if not isinstance(body, dict):
            raise ConfigError("section must be a table", field=section, line=where(section))
        for key in body:
            if key not in _KNOWN[section]:
                raise ConfigError("unknown field", field=f"{section}.{key}", line=where(f"{section}.{key}"))

    L = _get(d, "grid", "L", float, where)
    n = _get(d, "grid", "n", int, where)
    try:
        grid = GridSpec(L, n)
    except ValueError as exc:
        raise ConfigError(str(exc), field="grid.n" if "node" in str(exc) else "grid.L", line=where("grid")) from None

    ktype = _get(d, "kernel", "type", str, where)
    desc: dict[str, Any] = {"type": ktype}
    if ktype == "power":
        desc["lambda"] = _get(d, "kernel", "lambda", float, where)
        if not 0 <= desc["lambda"] <= 2:
            raise ConfigError("lambda must lie in [0, 2]", field="kernel.lambda", line=where("kernel.lambda"))
    elif ktype == "additive":
        desc["exponent"] = _get(d, "kernel", "exponent", float, where, required=False, default=1.0)
    elif ktype != "constant":
        raise ConfigError(f"unknown kernel type {ktype!r}", field="kernel.type", line=where("kernel.type"))
    kernel = kernel_from_config(desc)

    data = _get(d, "initial", "data", str, where)
    if data not in INITIAL_DATA:
        raise ConfigError(f"unknown initial data {data!r}", field="initial.data", line=where("initial.data"))

    horizon = _get(d, "run", "horizon", float, where)
    if horizon <= 0:
        raise ConfigError("horizon must be positive", field="run.horizon", line=where("run.horizon"))
    order = _get(d, "run", "order", int, where, required=False)
    steps = _get(d, "run", "steps", int, where, required=False)
    snapshots = _get(d, "run", "snapshots", "ints", where, required=False, default=())
    gel = _get(d, "run", "gelation_time", float, where, required=False)

    conv = None
    if "convergence" in d:
        orders = _get(d, "convergence", "orders", "ints", where)
        csteps = _get(d, "convergence", "steps", "ints", where)
        ref = _get(d, "convergence", "reference", str, where, required=False, default="self")
        if ref not in ("exact", "self"):
            raise ConfigError(f"reference must be 'exact' or 'self', got {ref!r}", field="convergence.reference",
                              line=where("convergence.reference"))
        if ref == "exact" and not (ktype == "power" and desc["lambda"] == 2 and data == "exp_over_x"):
            raise ConfigError("exact reference needs kernel power lambda=2 with data exp_over_x",
                              field="convergence.reference", line=where("convergence.reference"))
        if any(v < 1 for v in orders):
            raise ConfigError("orders must be >= 1", field="convergence.orders", line=where("convergence.orders"))
        if any(v < 1 for v in csteps):
            raise ConfigError("step counts must be >= 1", field="convergence.steps", line=where("convergence.steps"))
        conv = ConvergenceSpec(
            orders=orders,
            steps=tuple(sorted(csteps)),
            reference=ref,
            reference_order=_get(d, "convergence", "reference_order", int, where, required=False, default=6),
            reference_steps=_get(d, "convergence", "reference_steps", int, where, required=False),
            floor_factor=_get(d, "convergence", "floor_factor", float, where, required=False, default=2.0),
            workers=_get(d, "convergence", "workers", int, where, required=False, default=1),
        )
        if conv.workers < 1:
            raise ConfigError("workers must be >= 1", field="convergence.workers", line=where("convergence.workers"))

    cfg = RunConfig(d, grid, kernel, desc, data, horizon, order, steps, snapshots, gel, conv)
    # surface solver-level checks (gelation guard, snapshot range) as config errors
    probe = (order, steps) if order is not None and steps is not None else None
    if probe is None and conv is not None:
        probe = (conv.orders[0], conv.steps[0])
    if probe is not None:
        try:
            cfg.solver_config(*probe)
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], field=exc.field, line=where(exc.field or "")) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".json":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
        return parse_config(d)
    try:
        d = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", line=int(m.group(1)) if m else None) from None
    return parse_config(d, text)
