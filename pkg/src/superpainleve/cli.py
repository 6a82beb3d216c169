"""Command-line front end: ``superpainleve analyze|scan|atlas``."""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path
from typing import Sequence

import sympy

from . import atlas
from .dsl import DSLError, parse_expression
from .engine import exit_code, run_branch
from .kernel import Expression
from .report import verdict_text
from .system import BranchSeed, EvolutionSystem, SeriesModel, UsageError, load_system

USAGE_EXIT = 3


def _value(text, generators: Sequence[str]) -> Expression:
    try:
        return Expression.const(atlas.number(text))
    except (ValueError, TypeError, ZeroDivisionError):
        return parse_expression(str(text), generators=generators)


def load_seed(path) -> BranchSeed:
    """Read a seed file: TOML with exact strings for every number."""
    try:
        data = atlas.tomllib.loads(Path(path).read_text())
    except (OSError, atlas.tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read seed {path}: {exc}") from None
    gens = tuple(data.get("generators", ()))
    val = lambda v: _value(v, gens)
    return BranchSeed(
        label=data.get("label", Path(path).stem),
        params={k: val(v) for k, v in data.get("params", {}).items()},
        leading={k: val(v) for k, v in data.get("leading", {}).items()},
        r=data.get("r"),
        bosonic_only=data.get("bosonic_only", False),
        pins={(a, int(b)): val(v) for a, b, v in data.get("pins", [])},
        free_hints={int(k): tuple(v) for k, v in data.get("hints", {}).items()},
        forced_levels=tuple(data.get("forced_levels", (0,))),
        note=data.get("note", ""),
    )


def resolve_system(spec: str | None) -> EvolutionSystem:
    if spec is None:
        return atlas.bundled_system("skdv")
    if spec in atlas.SYSTEMS:
        return atlas.bundled_system(spec)
    try:
        return load_system(spec)
    except OSError as exc:
        raise UsageError(f"cannot read system {spec}: {exc}") from None


def _check_pins(system: EvolutionSystem, seed: BranchSeed):
    for (name, _), v in seed.pins.items():
        if name not in system:
            raise UsageError(f"pin on unknown field {name}")
        if v and v.parity() != system.field(name).parity:
            raise UsageError(f"pin on {name} has the wrong parity")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_analyze(args) -> int:
    if len(args.paths) > 2:
        raise UsageError("analyze takes at most SYSTEM and SEED")
    system_spec = args.system or (args.paths[0] if len(args.paths) == 2 else None)
    seed_path = args.seed or (args.paths[-1] if args.paths else None)
    if seed_path is None:
        raise UsageError("analyze needs a seed file")
    system = resolve_system(system_spec)
    seed = load_seed(seed_path)
    _check_pins(system, seed)
    verdict = run_branch(system, seed, max_level=args.max_level)
    if args.format == "json":
        _emit(json.dumps(verdict.to_json(), indent=2, sort_keys=True), args.out)
    else:
        _emit(verdict_text(verdict), args.out)
    return exit_code(verdict.status)


# ---------------------------------------------------------------------------
# scan


def _grid(spec: str) -> list:
    """``a,b,c`` or ``lo:hi:step`` (exact rationals)."""
    spec = spec.strip()
    if not spec:
        return []
    if ":" in spec:
        lo, hi, step = (sympy.Rational(x) for x in spec.split(":"))
        if step <= 0:
            raise UsageError("grid step must be positive")
        out, x = [], lo
        while x <= hi:
            out.append(x)
            x += step
        return out
    return [sympy.Rational(x) for x in spec.split(",")]


def leading_solutions(system: EvolutionSystem, params: dict) -> list[dict]:
    """Nonzero exact solutions (u0, w0) of the bosonic level-0 relations."""
    core = system.bosonic_core()
    model = SeriesModel(core, {k: Expression.const(atlas.number(v)) for k, v in params.items()})
    eqs = [atlas.to_sympy(model.relation(f.name, 0)) for f in core.bosonic]
    names = [sympy.Symbol(f"{f.name}0") for f in core.bosonic]
    out = []
    for sol in sympy.solve(eqs, names, dict=True):
        vals = [sympy.nsimplify(sol.get(s, s)) for s in names]
        if any(v.free_symbols for v in vals) or all(v == 0 for v in vals):
            continue
        try:
            g = [atlas._gaussian(v) for v in vals]
        except (TypeError, ValueError):
            continue   # irrational leading values are out of the exact ring
        out.append({f.name: x for f, x in zip(core.bosonic, g)})
    return sorted(out, key=lambda d: [str(v) for v in d.values()])


def _scan_point(job) -> dict:
    system_spec, c, alpha, beta = job
    system = resolve_system(system_spec)
    params = {"c": str(c), "alpha": str(alpha), "beta": str(beta)}
    branches = []
    for lead in leading_solutions(system, params):
        seed = BranchSeed(label=f"alpha={alpha},beta={beta}", params={k: atlas.number(v) for k, v in params.items()},
                          leading=lead, bosonic_only=True)
        try:
            v = run_branch(system, seed)
            branches.append({"leading": {k: str(x) for k, x in lead.items()}, "status": v.status,
                             "bosonic": list(v.bosonic_roots) if v.bosonic else None})
        except UsageError as exc:
            branches.append({"leading": {k: str(x) for k, x in lead.items()}, "status": "UsageError",
                             "error": str(exc)})
    hit = any(b["status"] == "PrincipalPass" for b in branches)
    return {"alpha": str(alpha), "beta": str(beta), "branches": branches, "principal": hit}


def cmd_scan(args) -> int:
    alphas, betas = _grid(args.alpha), _grid(args.beta)
    jobs = [(args.system, args.c, a, b) for a, b in itertools.product(alphas, betas)]
    if args.jobs > 1 and jobs:
        from multiprocessing import get_context
        with get_context("spawn").Pool(args.jobs) as pool:
            points = pool.map(_scan_point, jobs)
    else:
        points = [_scan_point(j) for j in jobs]
    points.sort(key=lambda p: (sympy.Rational(p["alpha"]), sympy.Rational(p["beta"])))
    report = {"c": str(args.c), "points": points,
              "hits": [[p["alpha"], p["beta"]] for p in points if p["principal"]]}
    if args.format == "json":
        _emit(json.dumps(report, indent=2, sort_keys=True), args.out)
    else:
        lines = [f"bosonic-core scan at c={args.c}: {len(points)} grid points, {len(report['hits'])} principal"]
        for p in points:
            statuses = ", ".join(f"{b['leading']}: {b['status']}" for b in p["branches"]) or "no singular branch"
            lines.append(f"{'*' if p['principal'] else ' '} alpha={p['alpha']:>6} beta={p['beta']:>6}  {statuses}")
        _emit("\n".join(lines), args.out)
    return 0


# ---------------------------------------------------------------------------
# atlas


def _perturbations(items: Sequence[str]) -> dict:
    out: dict = {}
    for item in items or ():
        try:
            label, rest = item.split(":", 1)
            key, value = rest.split("=", 1)
            atlas.number(value)
        except ValueError:
            raise UsageError(f"bad --perturb {item!r}; expected LABEL:param=p/q") from None
        out.setdefault(label, {})[key] = value
    return out


def cmd_atlas(args) -> int:
    report = atlas.full_reproduction(jobs=args.jobs, perturb=_perturbations(args.perturb),
                                     labels=args.only or None)
    if args.format == "json":
        _emit(json.dumps(report.to_json(), indent=2, sort_keys=True, default=str), args.out)
    else:
        _emit(report.to_text(), args.out)
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonnegative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "text"), default="text")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--jobs", type=_positive, default=1)

    p = _Parser(prog="superpainleve", description="Exact Painleve test for graded evolution systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common], help="run one branch")
    a.add_argument("paths", nargs="*", metavar="FILE", help="[SYSTEM] SEED")
    a.add_argument("--system", metavar="PATH", help="equation file or bundled name (skdv, osp22)")
    a.add_argument("--seed", metavar="PATH")
    a.add_argument("--max-level", type=_nonnegative)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("scan", parents=[common], help="bosonic-core grid over alpha, beta")
    s.add_argument("--c", type=sympy.Rational, default=sympy.Integer(3))
    s.add_argument("--alpha", required=True, help="comma list or lo:hi:step")
    s.add_argument("--beta", required=True, help="comma list or lo:hi:step")
    s.add_argument("--system", metavar="PATH")
    s.set_defaults(func=cmd_scan)

    t = sub.add_parser("atlas", parents=[common], help="reproduce the whole classification")
    t.add_argument("--perturb", action="append", metavar="LABEL:param=p/q")
    t.add_argument("--only", action="append", metavar="LABEL")
    t.set_defaults(func=cmd_atlas)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DSLError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return USAGE_EXIT
