"""Command line front end.

Exit codes: 0 success, 1 failed check or solver failure, 2 configuration or
usage error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

from coagtree import __version__
from coagtree.errors import ConfigError, NonFiniteValue, ResourceLimit

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _out_dir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_trees(args) -> int:
    from coagtree.bench import Manifest
    from coagtree.trees import enumerate_nonplanar, enumerate_planar, forests_to_csv, forests_to_json

    try:
        planar = [enumerate_planar(n) for n in range(args.max_grade + 1)]
        nonplanar = [enumerate_nonplanar(n) for n in range(args.max_grade + 1)]
    except (ResourceLimit, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args.out)
    man = Manifest("trees", {"max_grade": args.max_grade})
    man.add(out / "planar.csv", forests_to_csv(planar))
    man.add(out / "nonplanar.csv", forests_to_csv(nonplanar))
    if args.json:
        man.add(out / "planar.json", forests_to_json(planar) + "\n")
        man.add(out / "nonplanar.json", forests_to_json(nonplanar) + "\n")
    man.write(out)
    print(f"wrote {len(man.outputs)} tables to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from coagtree.bench import verify_suite

    checks = verify_suite(args.golden_dir)
    for c in checks:
        if args.json:
            print(json.dumps({"name": c.name, "ok": c.ok, "detail": c.detail}))
        else:
            print(f"{'PASS' if c.ok else 'FAIL'}\t{c.name}\t{c.detail}")
    failed = [c.name for c in checks if not c.ok]
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _load(args):
    from coagtree.config import load_config, parse_config

    cfg = load_config(args.config)
    overrides = {k: getattr(args, k, None) for k in ("order", "steps", "horizon")}
    if any(v is not None for v in overrides.values()):
        raw = copy.deepcopy(cfg.raw)
        run = raw.setdefault("run", {})
        for k, v in overrides.items():
            if v is not None:
                run[k] = v
        cfg = parse_config(raw)
    return cfg


def cmd_solve(args) -> int:
    from coagtree.bench import Manifest
    from coagtree.solver import run

    try:
        cfg = _load(args)
        sc = cfg.solver_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        traj = run(sc)
    except NonFiniteValue as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args.out)
    man = Manifest("solve", cfg.raw)
    man.add(out / "solution.csv", traj.final.to_csv())
    man.add(out / "diagnostics.csv", traj.to_csv())
    for m, g in sorted(traj.snapshots.items()):
        man.add(out / f"snapshot_{m:06d}.csv", g.to_csv())
    man.write(out)
    print(f"T={sc.horizon} N={sc.order} M={sc.steps}: M1 drift {traj.m1_drift:.3e}, "
          f"{sum(traj.fft_count)} transforms; output in {out}")
    if traj.m0_increases:
        print(f"note: M0 increased at steps {traj.m0_increases[:10]}", file=sys.stderr)
    return EXIT_OK


def cmd_convergence(args) -> int:
    from coagtree.bench import Manifest, run_convergence

    try:
        cfg = _load(args)
        if cfg.convergence is None:
            raise ConfigError("required section is missing", field="convergence")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_convergence(cfg)
    out = _out_dir(args.out)
    man = Manifest("convergence", cfg.raw)
    man.add(out / "errors.csv", result.errors_csv())
    man.add(out / "slopes.csv", result.slopes_csv())
    man.write(out)
    for n, fit in sorted(result.fits.items()):
        slope = "n/a" if fit.slope is None else f"{fit.slope:.3f}"
        print(f"N={n}: slope {slope} over {fit.points} pre-floor points")
    failed = [c for c in result.cells if c.status != "ok"]
    if failed:
        print(f"{len(failed)} cells failed", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coagtree", description="Coagulation by exponential tree series.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("trees", help="write planar and non-planar tree tables")
    t.add_argument("--max-grade", type=int, required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--json", action="store_true", help="also write JSON tables")
    t.set_defaults(func=cmd_trees)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--golden-dir", default=None)
    v.add_argument("--json", action="store_true", help="one JSON object per check")
    v.set_defaults(func=cmd_verify)

    for name, func, text in [
        ("solve", cmd_solve, "integrate one configuration"),
        ("convergence", cmd_convergence, "error table over orders and step counts"),
    ]:
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--order", type=int)
        s.add_argument("--steps", type=int)
        s.add_argument("--horizon", type=float)
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
