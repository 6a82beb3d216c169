"""Executable fixtures for the N=2 super-KdV classification.

Seeds and printed outcomes live in ``data/atlas.toml``; printed resonance
polynomials in ``data/resonances.toml``. The enumerators rebuild the case
tables from their Diophantine conditions by bounded brute force (two routes
per case where the printed reasoning gives a second one), and
:func:`full_reproduction` pushes every entry through the engine.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Sequence

import sympy

from .dsl import param, parse_system
from .engine import (
    FermionCandidate,
    ResonancePolynomial,
    TestVerdict,
    fermionic_leading_candidates,
    run_branch,
    sector_polynomials,
)
from .kernel import Expression
from .ring import MPQ, QQ, GaussianRational, to_rational
from .system import BranchSeed, EvolutionSystem, SeriesModel, UsageError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BOX = 60
ROUTE_BOX = BOX + 12   # reductions use shifted variables; compared on the common box
SYSTEMS = ("skdv", "osp22", "c0_vi_limit")
FAIL_STATUSES = ("FailCompatibility", "FailNonIntegerResonance", "FailNonIntegerLead", "Degenerate")


# ---------------------------------------------------------------------------
# data access


def _data(name: str) -> str:
    return (resources.files("superpainleve") / "data" / name).read_text()


@lru_cache(maxsize=None)
def _toml(name: str) -> dict:
    return tomllib.loads(_data(name))


@lru_cache(maxsize=None)
def bundled_system(name: str) -> EvolutionSystem:
    """One of the bundled equation files, parameters left symbolic."""
    if name not in SYSTEMS:
        raise UsageError(f"unknown bundled system {name!r}")
    return EvolutionSystem.from_parsed(parse_system(_data(name + ".eqn"), name))


def number(text) -> GaussianRational:
    return GaussianRational.parse(str(text))


def _q(x):
    return to_rational(x)


# ---------------------------------------------------------------------------
# sympy bridge (fixture comparisons only)


def _sym_name(s) -> str:
    if s.level is not None and s.dt == 0 and s.chain is None and s.dx is None:
        return f"{s.name}{s.level}"
    return str(s)


def to_sympy(e: Expression):
    """Convert an even expression to sympy, with k as the imaginary unit."""
    out = sympy.Integer(0)
    for (even, odd, ring), c in e.items():
        if odd or ring >> 1:
            raise ValueError("odd terms have no sympy counterpart")
        t = sympy.Rational(int(c.numerator), int(c.denominator))
        if ring & 1:
            t *= sympy.I
        for s, x in even:
            t *= sympy.Symbol(_sym_name(s)) ** x
        out += t
    return sympy.expand(out)


def _gaussian(x) -> GaussianRational:
    re, im = sympy.nsimplify(x).as_real_imag()
    re, im = sympy.Rational(re), sympy.Rational(im)
    return GaussianRational(QQ(int(re.p), int(re.q)), QQ(int(im.p), int(im.q)))


def sympy_polynomial(expr, var: str = "n") -> ResonancePolynomial:
    """A univariate sympy polynomial with exact coefficients as a ResonancePolynomial."""
    p = sympy.Poly(sympy.expand(expr), sympy.Symbol(var))
    return ResonancePolynomial.from_coefficients([_gaussian(c) for c in reversed(p.all_coeffs())])


_LOCALS = {name: sympy.Symbol(name) for name in ("n", "alpha", "beta", "u0", "w0", "m", "c")}
_LOCALS["k"] = sympy.I


def _parse(text: str, extra: Mapping | None = None):
    return sympy.sympify(text, locals=dict(_LOCALS, **(extra or {})), rational=True)


# ---------------------------------------------------------------------------
# entries


@dataclass(frozen=True)
class Expectation:
    """Skeleton of a verdict; only fields that are set get compared."""

    status: str | None = None
    level: int | None = None
    bosonic: tuple[int, ...] | None = None
    fermionic: tuple[int, ...] | None = None
    ledger: tuple[str, ...] | None = None
    max_level: int | None = None
    k_relation: str | None = None
    deferred_to: tuple[tuple[int, int], ...] | None = None
    condition: str | None = None
    log_flag: bool | None = None

    @classmethod
    def from_toml(cls, d: Mapping | None) -> "Expectation":
        d = dict(d or {})
        for key in ("bosonic", "fermionic"):
            if key in d:
                d[key] = tuple(sorted(d[key]))
        if "ledger" in d:
            d["ledger"] = tuple(sorted(d["ledger"]))
        if "deferred_to" in d:
            d["deferred_to"] = tuple(sorted((int(a), int(b)) for a, b in d["deferred_to"].items()))
        return cls(**d)

    def as_dict(self) -> dict:
        out = {}
        for key in self.__dataclass_fields__:
            v = getattr(self, key)
            if v is not None:
                out[key] = list(v) if isinstance(v, tuple) else v
        return out

    def merged(self, other: "Expectation | None") -> "Expectation":
        if other is None:
            return self
        return Expectation(**{k: getattr(other, k) if getattr(other, k) is not None else getattr(self, k)
                              for k in self.__dataclass_fields__})


@dataclass(frozen=True)
class AtlasEntry:
    """A branch seed with its printed outcome and where that outcome is stated."""

    label: str
    system: str
    seed: BranchSeed | None
    expected: Expectation
    source: str
    family: str | None = None
    derived: Expectation | None = None
    deviation: str | None = None
    max_level: int | None = None
    analyze: bool = False
    printed: tuple = ()
    covers: tuple = ()

    @property
    def bosonic_core(self) -> bool:
        return self.seed is not None and self.seed.bosonic_only and self.system == "skdv"


def _seed_from_toml(label: str, d: Mapping) -> BranchSeed:
    return BranchSeed(
        label=label,
        params={k: Expression.const(number(v)) for k, v in d.get("params", {}).items()},
        leading={k: Expression.const(number(v)) for k, v in d.get("leading", {}).items()},
        r=d.get("r"),
        bosonic_only=d.get("bosonic_only", False),
        pins={(a, int(b)): Expression.const(number(v)) for a, b, v in d.get("pins", [])},
        free_hints={int(k): tuple(v) for k, v in d.get("hints", {}).items()},
        forced_levels=tuple(d.get("forced_levels", (0, 1) if d.get("bosonic_only") else (0,))),
    )


def _core_seed(label, c, alpha, beta, u0, w0, hints=None, forced=(0,)) -> BranchSeed:
    params = {"c": Expression.const(c), "alpha": Expression.const(GaussianRational(alpha))}
    if beta is not None:
        params["beta"] = Expression.const(GaussianRational(beta))
    return BranchSeed(label=label, params=params,
                      leading={"u": Expression.const(u0), "w": Expression.const(w0)},
                      bosonic_only=True, free_hints=hints or {}, forced_levels=forced)


def _branch_entries() -> list[AtlasEntry]:
    out = []
    for d in _toml("atlas.toml").get("branch", []):
        out.append(AtlasEntry(
            label=d["label"], system=d["system"], seed=_seed_from_toml(d["label"], d),
            expected=Expectation.from_toml(d.get("expect")), source=d["source"],
            family=d.get("family"), derived=Expectation.from_toml(d["derived"]) if "derived" in d else None,
            deviation=d.get("deviation"), max_level=d.get("max_level"),
            covers=tuple(sorted(d.get("covers", {}).items()))))
    return out


def printed_rows(case: str | None = None) -> list[dict]:
    rows = _toml("atlas.toml").get("row", [])
    return [r for r in rows if case is None or r["case"] == case]


def printed_families() -> list[dict]:
    return list(_toml("atlas.toml").get("family", []))


# ---------------------------------------------------------------------------
# Diophantine cases: Vieta scans and the printed parametrizations


@dataclass(frozen=True)
class Solution:
    """One integer point of a case's resonance condition with its parameters."""

    case: str
    point: tuple                 # ((name, int), ...) in Vieta variables
    roots: tuple[int, ...]       # the non-structural resonances
    u0: object
    alpha: object = None
    beta: object = None
    w0_over_u0: bool = True      # w0 = k*u0 (else w0 = 0)

    @property
    def vars(self) -> dict:
        return dict(self.point)

    @property
    def category(self) -> str:
        if self.u0 == 0:
            return "no-singularity"
        if any(r < 0 for r in self.roots):
            return "negative"
        if any(r in (0, 1) for r in self.roots):
            return "log"
        return "principal"

    def params(self) -> dict:
        out = {"u0": self.u0}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.beta is not None:
            out["beta"] = self.beta
        return out


def _rat(x):
    return x if type(x) is MPQ else to_rational(x)


def _c3_ii(j1):
    j2 = 3 - j1
    if j1 < j2:
        return None
    alpha = QQ(-j1 * j2, 2) - 1
    return Solution("c3.ii", (("j1", j1), ("j2", j2)), (j1, j2), QQ(2), alpha, None, False)


def _c3_vii(m, j1):
    j2 = 9 - m - j1
    if j1 > j2:
        return None
    u0 = 4 - m - QQ(j1 * j2, 6)
    if u0 == 0:
        return Solution("c3.vii", (("m", m), ("j1", j1), ("j2", j2)), (m, j1, j2), u0)
    alpha = QQ(4 - m) / u0 - 2
    beta = 3 * ((alpha + 2) * u0 - 2) / u0 ** 2
    return Solution("c3.vii", (("m", m), ("j1", j1), ("j2", j2)), (m, j1, j2), u0, alpha, beta)


def _c3_viii(j1):
    j2 = 8 - j1
    if j1 > j2:
        return None
    u0 = 3 - QQ(j1 * j2, 6)
    alpha = 3 / u0 - 2
    return Solution("c3.viii", (("j1", j1), ("j2", j2)), (j1, j2), u0, alpha, (alpha + 2) ** 2 / 3)


def _c3_ix(j1):
    j2 = 8 - j1
    u0 = QQ(5 * j2 - 24, 6)
    alpha = (4 / u0 - 4) / 5
    return Solution("c3.ix", (("j1", j1), ("j2", j2)), (j1, j2), u0, alpha, -9 * alpha * (5 * alpha + 4) / 8)


def _c0_ii(j1, j2, j3):
    if not (j1 <= j2 <= j3 and j1 + j2 + j3 == 6):
        return None
    alpha = QQ(-j1 * j2 * j3, 6)
    if j1 * j2 + (j1 + j2) * j3 != 1 - 2 * alpha:
        return None
    return Solution("c0.ii", (("j1", j1), ("j2", j2), ("j3", j3)), (j1, j2, j3), QQ(2), alpha, None, False)


def _c0_vi(j1, j2, j3, j4):
    k2 = j1 + j2 - 5
    k1 = 6 - j1 * j2
    if j3 + j4 != 7 - k2 or j3 * j4 != 12 + k1 - 3 * k2:
        return None
    u0 = QQ(k2, 2) + QQ(k1, 6)
    pt = (("j1", j1), ("j2", j2), ("j3", j3), ("j4", j4))
    if u0 == 0:
        return Solution("c0.vi", pt, (j1, j2, j3, j4), u0)
    beta = k1 / u0 ** 2
    alpha = ((beta * u0 - 3) * u0 + 6) / (3 * u0)
    return Solution("c0.vi", pt, (j1, j2, j3, j4), u0, alpha, beta)


def _c0_vii(j1, j2):
    if j1 > j2 or (8 - j1 - j2) % 3:
        return None
    u0 = QQ(8 - j1 - j2, 3)
    if j1 * j2 != 18 - 12 * u0 or u0 == 0:
        return None
    m = 3 * (u0 + 1)
    return Solution("c0.vii", (("m", int(m)), ("j1", j1), ("j2", j2)), (int(m), j1, j2), u0,
                    (3 - 2 * u0) / u0, -3 * (u0 - 1) / u0 ** 2)


def _c0_viii(j1, j2):
    if j1 > j2:
        return None
    m = 11 - j1 - j2
    if j1 * j2 != 2 * m:
        return None
    u0 = 4 - QQ(5 * m, 6)
    return Solution("c0.viii", (("m", m), ("j1", j1), ("j2", j2)), (m, j1, j2), u0,
                    (4 - u0) / (5 * u0), 6 * (2 * u0 - 3) / (5 * u0 ** 2))


def _c0_x(j1, j2):
    if j1 > j2 or j1 * j2 != 6:
        return None
    m = 9 - j1 - j2
    u0 = 2 - QQ(m, 2)
    pt = (("m", m), ("j1", j1), ("j2", j2))
    if u0 == 0:
        return Solution("c0.x", pt, (m, j1, j2), u0)
    return Solution("c0.x", pt, (m, j1, j2), u0, 2 / u0 - 1, QQ(0))


def _box(dim: int, lo: int = -BOX, hi: int = BOX):
    rng = range(lo, hi + 1)
    if dim == 1:
        for a in rng:
            yield (a,)
    else:
        for a in rng:
            for rest in _box(dim - 1, lo, hi):
                yield (a,) + rest


def _scan_c0_vi() -> list[Solution]:
    # j3, j4 from their sum and product by exact integer square roots
    out = []
    for j1, j2 in _box(2):
        if j1 > j2:
            continue
        k2, k1 = j1 + j2 - 5, 6 - j1 * j2
        s, p = 7 - k2, 12 + k1 - 3 * k2
        disc = s * s - 4 * p
        if disc < 0 or math.isqrt(disc) ** 2 != disc or (s + math.isqrt(disc)) % 2:
            continue
        r = math.isqrt(disc)
        j3, j4 = (s - r) // 2, (s + r) // 2
        if -BOX <= j3 and j4 <= BOX:
            sol = _c0_vi(j1, j2, j3, j4)
            if sol is not None:
                out.append(sol)
    return out


def _scan_c0_ii() -> list[Solution]:
    out = []
    for j1, j2 in _box(2):
        sol = _c0_ii(j1, j2, 6 - j1 - j2)
        if sol is not None and abs(6 - j1 - j2) <= BOX:
            out.append(sol)
    return out


VIETA_SCANS: dict[str, Callable[[], list[Solution]]] = {
    "c3.ii": lambda: [s for (a,) in _box(1) if (s := _c3_ii(a))],
    "c3.vii": lambda: [s for a, b in _box(2) if (s := _c3_vii(a, b)) and abs(s.vars["j2"]) <= BOX],
    "c3.viii": lambda: [s for (a,) in _box(1) if (s := _c3_viii(a))],
    "c3.ix": lambda: [s for (a,) in _box(1) if (s := _c3_ix(a)) and abs(s.vars["j2"]) <= BOX],
    "c0.ii": _scan_c0_ii,
    "c0.vi": _scan_c0_vi,
    "c0.vii": lambda: [s for a, b in _box(2) if (s := _c0_vii(a, b))],
    "c0.viii": lambda: [s for a, b in _box(2) if (s := _c0_viii(a, b))],
    "c0.x": lambda: [s for a, b in _box(2) if (s := _c0_x(a, b))],
}


def _divisors(n: int) -> list[int]:
    ds = [int(d) for d in sympy.divisors(abs(n))]
    return sorted(ds + [-d for d in ds])


def _printed_route(case: str) -> list[Solution]:
    """The same solution sets from the reductions stated alongside each case."""
    out: list = []
    if case == "c3.vii":
        # (k1, k2) lattice: m = 4-k1, j1 = 3+k2, j2 = 2+k1-k2, k1 >= 2k2+1
        out = [_c3_vii(4 - k1, 3 + k2) for k1, k2 in _box(2, -ROUTE_BOX, ROUTE_BOX) if k1 >= 2 * k2 + 1]
    elif case == "c3.viii":
        out = [_c3_viii(4 - k1) for (k1,) in _box(1, -ROUTE_BOX, ROUTE_BOX) if k1 >= 0]
    elif case == "c3.ix":
        out = [_c3_ix(2 - k1) for (k1,) in _box(1, -ROUTE_BOX, ROUTE_BOX)]
    elif case == "c3.ii":
        out = [_c3_ii(j1) for (j1,) in _box(1, -ROUTE_BOX, ROUTE_BOX)]
    elif case == "c0.ii":
        # j1 = 3m with (m-1) a divisor of 8; j2 j3 from the reduced equation
        for d in _divisors(8):
            m = d + 1
            j1 = 3 * m
            prod = (8 - 9 * m * (m - 1) + 9 * (m - 1)) // (m - 1)
            s = 6 - j1
            disc = s * s - 4 * prod
            if disc >= 0 and math.isqrt(disc) ** 2 == disc and (s + math.isqrt(disc)) % 2 == 0:
                r = math.isqrt(disc)
                out.append(_c0_ii(*sorted((j1, (s - r) // 2, (s + r) // 2))))
    elif case == "c0.vi":
        # k3 + k4 = k3^2 + k4^2, k2 (k3 + k4 + 1) = 0, third relation linear in k1;
        # ordering j1 <= j2 and j3 <= j4
        for k3, k4 in _box(2, -ROUTE_BOX, ROUTE_BOX):
            if k3 + k4 != k3 * k3 + k4 * k4:
                continue
            for k1, k2 in _box(2, -ROUTE_BOX, ROUTE_BOX):
                if k2 * (k3 + k4 + 1) or k4 * (k4 + k4 * k3 - k3 * k3 - 1) != k1 * (1 + k3 + k4):
                    continue
                j = (3 + k2 - k3, 2 + k3, 3 + k4 - k2, 4 - k4)
                if j[0] <= j[1] and j[2] <= j[3] and 6 - j[0] * j[1] == k1:
                    out.append(_c0_vi(*j))
    elif case == "c0.vii":
        # 9 u0^2 - 8 = k1^2 - 8 = k2^2 with u0 = k1/3
        for k1, k2 in _box(2, -ROUTE_BOX, ROUTE_BOX):
            if k1 * k1 - 8 == k2 * k2 and k2 >= 0:
                u0 = QQ(k1, 3)
                root = k2
                s = 8 - 3 * u0
                j1, j2 = (s - root) / 2, (s + root) / 2
                if j1.denominator == 1:
                    out.append(_c0_vii(int(j1), int(j2)))
    elif case == "c0.viii":
        for d in _divisors(26):
            out.append(_c0_viii(d - 2, 26 // d - 2))
    elif case == "c0.x":
        # (m - 9)^2 - 24 = k1^2
        for (m,) in _box(1, -ROUTE_BOX, ROUTE_BOX):
            q = (m - 9) ** 2 - 24
            if q >= 0 and math.isqrt(q) ** 2 == q:
                r = math.isqrt(q)
                out.append(_c0_x((9 - m - r) // 2, (9 - m + r) // 2))
    return sorted({s for s in out if s is not None}, key=lambda s: s.point)


def lattice_vars(sol: Solution) -> dict:
    """Printed integer parameters of a solution (k's for the lattice cases)."""
    v = sol.vars
    if sol.case == "c3.vii":
        return {"k1": 4 - v["m"], "k2": v["j1"] - 3}
    if sol.case == "c3.viii":
        return {"k1": 4 - v["j1"]}
    if sol.case == "c3.ix":
        return {"k1": 2 - v["j1"]}
    return dict(v)


def _from_lattice(case: str, k: Mapping) -> Solution | None:
    if case == "c3.vii":
        return _c3_vii(4 - k["k1"], 3 + k["k2"])
    if case == "c3.viii":
        return _c3_viii(4 - k["k1"])
    if case == "c3.ix":
        return _c3_ix(2 - k["k1"])
    if case == "c3.ii":
        return _c3_ii(k["j1"])
    raise UsageError(f"no lattice for {case}")


# scope of each printed list: "principal" lists only log-free nonnegative
# solutions, "all" claims the complete solution set of the condition
_SCOPE = {"c3.ii": "principal", "c3.vii": "principal", "c3.viii": "principal", "c3.ix": "principal",
          "c0.ii": "all", "c0.vi": "nonnegative", "c0.vii": "all", "c0.viii": "all", "c0.x": "all"}


# the printed reduction for (vi) assumes all four roots nonnegative
_ROUTE_IN_SCOPE = {"c0.vi"}


def _in_scope(case: str, sol: Solution) -> bool:
    scope = _SCOPE[case]
    if scope == "all":
        return True
    if scope == "nonnegative":
        return all(r >= 2 for r in sol.roots)
    return sol.category in ("principal", "no-singularity") and all(r >= 2 for r in sol.roots)


def _table_key(case: str, sol: Solution):
    v = sol.vars
    if case == "c0.viii":
        return -v["m"]
    if case == "c0.ii":
        return sol.alpha
    return sol.point


def _printed_points(case: str) -> list[dict]:
    """Printed solutions of a case, as dicts of their integer table columns."""
    rows = [dict(r["printed"], label=r["label"]) for r in printed_rows(case)]
    extra = _toml("atlas.toml").get("claims", {})
    return rows + [dict(p) for p in extra.get(case, [])]


def _matches(sol: Solution, printed: Mapping) -> bool:
    v = sol.vars
    for key, val in printed.items():
        if key == "label":
            continue
        if key in v:
            if v[key] != val:
                return False
        elif key in ("u0", "alpha", "beta"):
            got = getattr(sol, key) if key != "u0" else sol.u0
            if got is None or _rat(got) != _q(val):
                return False
    return True


def _column_mismatch(sol: Solution, printed: Mapping) -> list[str]:
    out = []
    v = sol.vars
    for key, val in printed.items():
        if key == "label":
            continue
        got = v.get(key) if key in v else (sol.u0 if key == "u0" else getattr(sol, key, None))
        if got is None:
            continue
        if (got != val) if key in v else (_rat(got) != _q(val)):
            out.append(f"{key}: printed {val}, enumerated {got}")
    return out


@dataclass
class ScanResult:
    case: str
    scope: str
    found: list[dict]
    printed: list[str]
    extras: list[dict]
    missing: list[str]
    routes_agree: bool
    outside_families: list[dict] = field(default_factory=list)   # negative points no printed window holds
    deviation: str | None = None

    @property
    def outcome(self) -> str:
        if not self.routes_agree or self.missing:
            return "mismatch"
        if self.extras:
            return "deviation" if self.deviation else "mismatch"
        return "match"

    def to_json(self) -> dict:
        return {"case": self.case, "scope": self.scope, "found": self.found, "printed": self.printed,
                "extras": self.extras, "missing": self.missing, "routes_agree": self.routes_agree,
                "outside_families": {"count": len(self.outside_families),
                                     "examples": self.outside_families[:5]}, "deviation": self.deviation,
                "outcome": self.outcome}


def _sol_json(sol: Solution) -> dict:
    d = dict(sol.vars)
    d.update({k: str(v) for k, v in sol.params().items()})
    d["category"] = sol.category
    return d


def _family_window(fam: Mapping, k: Mapping) -> bool:
    env = {n: sympy.Integer(v) for n, v in k.items()}
    return all(bool(_parse(part.replace("max(", "Max("), env)) for part in fam["window"].split(" and "))


def scan_case(case: str, covering: Mapping[tuple, str] | None = None,
              failing: set | None = None) -> ScanResult:
    """Brute-force one Diophantine condition over the +-60 box.

    ``covering`` maps (case, point) to the atlas label that runs that seed;
    a principal-scope extra is explained when its covering run fails.
    """
    vieta = sorted(set(VIETA_SCANS[case]()), key=lambda s: s.point)
    route = _printed_route(case)
    # the reduction routes may reach outside the Vieta box; compare on the common box
    inbox = lambda s: all(abs(x) <= BOX for _, x in s.point)
    keep = (lambda s: inbox(s) and _in_scope(case, s)) if case in _ROUTE_IN_SCOPE else inbox
    agree = {s for s in route if keep(s)} == {s for s in vieta if keep(s)}
    in_scope = sorted((s for s in vieta if _in_scope(case, s)), key=lambda s: _table_key(case, s))
    printed = _printed_points(case)
    covering = covering or {}
    failing = failing or set()
    extras, matched = [], set()
    for s in in_scope:
        hit = [p for p in printed if _matches(s, p)]
        if hit:
            matched.update(p["label"] for p in hit)
            continue
        label = covering.get((case, s.point))
        if label is not None and label in failing and _SCOPE[case] == "principal":
            continue
        d = _sol_json(s)
        if label:
            d["atlas"] = label
        extras.append(d)
    missing = [p["label"] for p in printed if p["label"] not in matched]
    fams = [f for f in printed_families() if f["case"] == case]
    outside = []
    if fams:
        for s in vieta:
            if s.category != "negative" or any(r in (0, 1) for r in s.roots):
                continue
            k = lattice_vars(s)
            if not any(_family_window(f, k) for f in fams):
                outside.append(dict(_sol_json(s), **{f"lattice_{a}": b for a, b in k.items()}))
    note = _toml("atlas.toml").get("scan_deviation", {}).get(case)
    return ScanResult(case, _SCOPE[case], [_sol_json(s) for s in in_scope],
                      [p["label"] for p in printed], extras, missing, agree, outside, note)


# ---------------------------------------------------------------------------
# enumerations


def _row_entry(row: Mapping, sol: Solution, c: int) -> AtlasEntry:
    if sol.u0 == 0:
        seed = None
    else:
        k_w0 = GaussianRational(0, 1) * GaussianRational(sol.u0) if sol.w0_over_u0 else GaussianRational(0)
        seed = _core_seed(row["label"], c, sol.alpha, sol.beta, GaussianRational(sol.u0), k_w0,
                          hints={int(a): tuple(b) for a, b in row.get("hints", {}).items()})
    derived = Expectation.from_toml(row["derived"]) if "derived" in row else None
    return AtlasEntry(label=row["label"], system="skdv", seed=seed, expected=Expectation.from_toml(row["expect"]),
                      source=f"c={c} core case ({row['case'].split('.')[1]}) table, row {row['label']}"
                      + (f"; {row['note']}" if "note" in row else ""),
                      family=row.get("family"), derived=derived, deviation=row.get("deviation"),
                      printed=tuple(sorted(row["printed"].items())),
                      covers=((row["case"], sol.point),))


def _rows_for(case: str, c: int, sols: Sequence[Solution]) -> list[AtlasEntry]:
    out = []
    for row in printed_rows(case):
        hit = [s for s in sols if _matches(s, row["printed"])]
        if len(hit) != 1:
            raise RuntimeError(f"{row['label']}: {len(hit)} enumerated solutions match the printed row")
        out.append(_row_entry(row, hit[0], c))
    return out


def _family_entries(case: str, c: int) -> list[AtlasEntry]:
    out = []
    for fam in printed_families():
        if fam["case"] != case:
            continue
        for sample in fam["samples"]:
            k = dict(zip(fam["vars"], sample))
            env = {n: sympy.Integer(v) for n, v in k.items()}
            u0 = _parse(fam["u0"], env)
            env["u0"] = u0
            alpha, beta = _parse(fam["alpha"], env), _parse(fam["beta"], env)
            w0 = _parse(fam["w0"], env)
            label = f"{fam['label']}[{','.join(f'{a}={b}' for a, b in k.items())}]"
            forced = (0, 1) if case == "c3.ii" else (0,)
            seed = _core_seed(label, c, _gaussian(alpha).re, _gaussian(beta).re, _gaussian(u0), _gaussian(w0),
                              forced=forced)
            sol = _from_lattice(case, k)
            out.append(AtlasEntry(
                label=label, system="skdv", seed=seed, expected=Expectation(status="NonPrincipal"),
                source=f"printed family ({fam['label']}), window {fam['window']}", family=fam["label"],
                printed=(("alpha", str(alpha)), ("beta", str(beta)), ("u0", str(u0))),
                covers=((case, sol.point),) if sol else ()))
    return out


def _c3_ii_conditions() -> list[AtlasEntry]:
    """Case (ii) with j1 >= 4 and beta symbolic: run through level 6 anyway."""
    out = []
    for j1 in (4, 5, 6, 7):
        sol = _c3_ii(j1)
        label = f"c3.ii[j1={j1}]"
        # u1 and w1 are fixed in this case, so a resonance at 0 or 1 would be a log
        seed = _core_seed(label, 3, sol.alpha, None, GaussianRational(2), GaussianRational(0), forced=(0, 1))
        out.append(AtlasEntry(label=label, system="skdv", seed=seed,
                              expected=Expectation(status="NonPrincipal", level=6, condition="beta=3*alpha"),
                              source="c=3 core case (ii), j1 >= 4: level-6 compatibility", family="VI",
                              analyze=True, covers=(("c3.ii", sol.point),)))
    return out


def enumerate_c3_branches() -> list[AtlasEntry]:
    """Table rows and family samples at c=3, seeds rebuilt from the conditions."""
    out = []
    for case in ("c3.vii", "c3.viii", "c3.ix"):
        out += _rows_for(case, 3, VIETA_SCANS[case]())
    out += _c3_ii_conditions()
    for case in ("c3.ii", "c3.vii", "c3.viii", "c3.ix"):
        out += _family_entries(case, 3)
    return out


def _c0_row_entries() -> list[AtlasEntry]:
    out = []
    out += _rows_for("c0.ii", 0, VIETA_SCANS["c0.ii"]())
    # (iii): the double root alpha = 1 of case (ii); seed given directly
    row = printed_rows("c0.iii")[0]
    seed = _core_seed(row["label"], 0, QQ(1), None, GaussianRational(2), GaussianRational(0))
    out.append(AtlasEntry(label=row["label"], system="skdv", seed=seed, expected=Expectation.from_toml(row["expect"]),
                          source="c=0 core case (iii)", family=row.get("family"),
                          printed=tuple(sorted(row["printed"].items()))))
    for case in ("c0.vii", "c0.viii", "c0.x"):
        out += _rows_for(case, 0, VIETA_SCANS[case]())
    return out


def enumerate_c0_branches() -> list[AtlasEntry]:
    """Table rows at c=0, seeds rebuilt from the conditions."""
    return _c0_row_entries()


@lru_cache(maxsize=None)
def atlas_entries() -> tuple[AtlasEntry, ...]:
    entries = _branch_entries() + enumerate_c3_branches() + enumerate_c0_branches()
    labels = [e.label for e in entries]
    dup = {x for x in labels if labels.count(x) > 1}
    if dup:
        raise RuntimeError(f"duplicate atlas labels {sorted(dup)}")
    return tuple(sorted(entries, key=lambda e: e.label))


def entry(label: str) -> AtlasEntry:
    for e in atlas_entries():
        if e.label == label:
            return e
    raise UsageError(f"no atlas entry {label!r}")


# ---------------------------------------------------------------------------
# running and comparing


def _symbolic_params(e: AtlasEntry) -> list[str]:
    system = bundled_system(e.system)
    return [p for p in system.params if e.seed is None or p not in e.seed.params]


def solve_condition(residual: Expression, name: str) -> list:
    """Values of the parameter ``name`` that make a residual vanish identically."""
    expr = to_sympy(residual)
    target = sympy.Symbol(name)
    others = sorted(expr.free_symbols - {target}, key=str)
    coeffs = sympy.Poly(expr, *others).coeffs() if others else [expr]
    g = coeffs[0]
    for c in coeffs[1:]:
        g = sympy.gcd(g, c)
    return sorted(sympy.solve(g, target), key=str)


def observe(verdict: TestVerdict | None, e: AtlasEntry) -> dict:
    if verdict is None:
        return {"status": "NoSingularity"}
    fail = verdict.failure or {}
    info = fail.get("analysis", fail)
    obs = {
        "status": verdict.status,
        "level": info.get("level"),
        "bosonic": sorted(verdict.bosonic_roots) if verdict.bosonic else None,
        "fermionic": sorted(verdict.fermionic_roots) if verdict.fermionic else None,
        "ledger": sorted(verdict.ledger_text()),
        "max_level": verdict.max_level_solved,
        "k_relation": verdict.k_relation,
        "deferred_to": sorted({(o, r) for o, _, r in verdict.deferred if o >= 0}),
        "log_flag": verdict.log_flag,
    }
    if e.expected.condition is not None:
        res = info.get("residual")
        names = _symbolic_params(e)
        if res is None or not res or len(names) != 1:
            obs["condition"] = None
        else:
            roots = solve_condition(res, names[0])
            obs["condition"] = f"{names[0]}={roots[0]}" if len(roots) == 1 else None
    return obs


def _condition_value(text: str, e: AtlasEntry):
    lhs, rhs = text.split("=", 1)
    env = {k: sympy.Rational(str(v.body().re)) for k, v in e.seed.params.items()}
    return lhs.strip(), sympy.nsimplify(_parse(rhs, {k: v for k, v in env.items()}))


def compare(expected: Expectation, observed: Mapping, e: AtlasEntry) -> list[str]:
    diffs = []
    for key, want in expected.as_dict().items():
        got = observed.get(key)
        if key == "deferred_to":
            want_set = {tuple(x) for x in want}
            got_set = {tuple(x) for x in (got or [])}
            ok = (not got_set) if not want_set else want_set <= got_set
        elif key == "condition":
            name, val = _condition_value(want, e)
            ok = got is not None and got.split("=")[0] == name and \
                sympy.nsimplify(_parse(got.split("=", 1)[1])) == val
            want = f"{name}={val}"
        elif key in ("bosonic", "fermionic", "ledger"):
            ok = got is not None and sorted(got) == sorted(want)
        else:
            ok = got == want
        if not ok:
            diffs.append(f"{key}: expected {want}, observed {got}")
    return diffs


@dataclass
class EntryResult:
    label: str
    source: str
    family: str | None
    expected: dict
    observed: dict
    outcome: str
    diffs: list
    deviation: str | None = None
    verdict: dict | None = None

    def to_json(self) -> dict:
        return {"label": self.label, "source": self.source, "family": self.family,
                "expected": self.expected, "observed": self.observed, "outcome": self.outcome,
                "diffs": self.diffs, "deviation": self.deviation, "verdict": self.verdict}


def _perturbed(e: AtlasEntry, changes: Mapping[str, str]) -> AtlasEntry:
    params = dict(e.seed.params)
    for k, v in changes.items():
        params[k] = Expression.const(number(v))
    seed = BranchSeed(label=e.seed.label, params=params, leading=e.seed.leading, r=e.seed.r,
                      bosonic_only=e.seed.bosonic_only, pins=e.seed.pins, free_hints=e.seed.free_hints,
                      forced_levels=e.seed.forced_levels, note="perturbed")
    return AtlasEntry(**{**e.__dict__, "seed": seed})


def run_entry(e: AtlasEntry) -> tuple[TestVerdict | None, dict]:
    if e.seed is None:
        return None, observe(None, e)
    v = run_branch(bundled_system(e.system), e.seed, max_level=e.max_level, analyze_nonprincipal=e.analyze)
    return v, observe(v, e)


def check_entry(e: AtlasEntry, perturb: Mapping[str, str] | None = None) -> EntryResult:
    if perturb:
        e = _perturbed(e, perturb)
    try:
        v, obs = run_entry(e)
    except UsageError as exc:
        v, obs = None, {"status": "UsageError", "error": str(exc)}
    diffs = compare(e.expected, obs, e)
    outcome = "match"
    if diffs:
        outcome = "mismatch"
        if e.derived is not None and not perturb and not compare(e.expected.merged(e.derived), obs, e):
            outcome = "deviation"
    return EntryResult(e.label, e.source, e.family, e.expected.as_dict(), obs, outcome, diffs,
                       e.deviation if outcome == "deviation" else None,
                       v.to_json() if v is not None else None)


def _check_label(args) -> dict:
    label, perturb = args
    return check_entry(entry(label), perturb).to_json()


# ---------------------------------------------------------------------------
# resonance polynomial fixtures


@dataclass
class PolyCheck:
    label: str
    kind: str                 # "A" (bosonic core) or "B" (fermionic)
    printed: str
    computed: str
    equal: bool
    claim: str | None = None
    claim_holds: bool | None = None
    formula_equal: bool | None = None   # generated == determinant of the entry formulas
    deviation: str | None = None

    @property
    def outcome(self) -> str:
        if self.claim_holds is False or self.formula_equal is False:
            return "mismatch"
        if self.equal:
            return "match"
        return "deviation" if self.deviation and self.formula_equal else "mismatch"

    @property
    def ok(self) -> bool:
        return self.outcome != "mismatch"

    def to_json(self) -> dict:
        return dict(self.__dict__, outcome=self.outcome)


@lru_cache(maxsize=None)
def _symbolic_core_det(c: int):
    system = bundled_system("skdv").substitute_params({"c": c}).bosonic_core()
    M = SeriesModel(system).symbolic_matrix(["u", "w"], ["u", "w"])
    return sympy.expand(sympy.Matrix(2, 2, [to_sympy(x) for row in M for x in row]).det())


def _claim_holds(claim: str, poly) -> bool:
    n = sympy.Symbol("n")
    if claim == "root-at-0":
        return sympy.simplify(poly.subs(n, 0)) == 0
    if claim == "free-u0":
        return sympy.Symbol("u0") not in sympy.simplify(poly).free_symbols
    if claim == "non-integer":
        roots = sympy.roots(sympy.Poly(poly, n), multiple=True)
        return any(not r.is_integer for r in roots) or len(roots) < sympy.degree(poly, n)
    raise UsageError(f"unknown claim {claim!r}")


def bosonic_polynomial_checks() -> list[PolyCheck]:
    """Every printed A(n) against the generated determinant under its relations."""
    out = []
    for d in _toml("resonances.toml")["bosonic"]:
        det = _symbolic_core_det(d["c"])
        rel = {_LOCALS[k]: _parse(v) for k, v in d["relations"].items()}
        defs = {_LOCALS[k]: _parse(v) for k, v in d.get("define", {}).items()}
        printed = _parse(d["printed"]).subs(defs, simultaneous=True).subs(rel, simultaneous=True)
        mech = det.subs(rel, simultaneous=True)
        ratio = sympy.simplify(sympy.cancel(sympy.together(mech / printed)))
        equal = ratio == 1
        claim = d.get("claim")
        out.append(PolyCheck(d["label"], "A", d["printed"], str(sympy.factor(mech)), bool(equal), claim,
                             _claim_holds(claim, sympy.expand(sympy.cancel(mech))) if claim else None))
    return out


def fermionic_B_polynomials(case: str, r: int) -> ResonancePolynomial:
    """The printed fermionic resonance polynomial of case (I)-(V) at lead r."""
    table = _toml("resonances.toml")["fermionic"]
    try:
        text = table[case][str(r)]
    except KeyError:
        raise UsageError(f"no printed B(n) for case {case!r}, r={r}") from None
    return sympy_polynomial(_parse(text))


def fermionic_cases() -> list[tuple[str, int]]:
    table = _toml("resonances.toml")["fermionic"]
    return [(case, int(r)) for case in table for r in table[case]]


def engine_B_polynomial(case: str, r: int) -> ResonancePolynomial:
    e = entry(case)
    system = bundled_system(e.system).with_fermion_lead(r)
    (_, _), (_, fpoly) = sector_polynomials(system, e.seed)
    return fpoly


def formula_B_polynomial(case: str, r: int) -> ResonancePolynomial:
    """det of the closed-form fermionic level matrix, written out in sympy."""
    e = entry(case)
    val = lambda name, default=0: sympy.nsimplify(
        to_sympy(e.seed.params[name]) if name in e.seed.params else default)
    c, alpha, beta = val("c"), val("alpha"), val("beta")
    u0 = to_sympy(e.seed.leading["u"])
    w0 = to_sympy(e.seed.leading.get("w", Expression.const(0)))
    d = sympy.Symbol("n") - r
    b11 = -d * (d - 1) * (d - 2) - 2 * c * u0 + (6 - c) * d * u0 + beta * (d - 2) * w0 ** 2
    b21 = (c * d * (d - 1) - (6 - c) * d + (alpha - 1) * (d - 1) * (d - 2)) * w0
    return sympy_polynomial(b11 ** 2 + b21 ** 2)


def fermionic_polynomial_checks() -> list[PolyCheck]:
    table = _toml("resonances.toml")
    dev = table.get("fermionic_deviation", {})
    out = []
    for case, r in fermionic_cases():
        printed = fermionic_B_polynomials(case, r)
        mech = engine_B_polynomial(case, r)
        equal = mech is not None and mech.monic().coeffs == printed.monic().coeffs
        formula = mech is not None and entry(case).system == "skdv" and \
            mech.monic().coeffs == formula_B_polynomial(case, r).monic().coeffs
        note = dev.get("note") if f"{case}:{r}" in dev.get("pairs", ()) else None
        out.append(PolyCheck(f"{case} r={r}", "B", str(printed), str(mech), equal,
                             formula_equal=formula, deviation=note))
    return out


@dataclass
class CandidateCheck:
    case: str
    printed: dict
    computed: dict

    @property
    def ok(self) -> bool:
        return self.printed == self.computed

    def to_json(self) -> dict:
        return {"case": self.case, "printed": self.printed, "computed": self.computed, "ok": self.ok}


def candidate_lists(case: str) -> dict:
    e = entry(case)
    cands: list[FermionCandidate] = fermionic_leading_candidates(bundled_system(e.system), e.seed)
    pick = lambda rel, k: sorted((c.r for c in cands if c.relation == rel and c.k_relation == k), reverse=True)
    return {"plus": pick("type-2", "k=+k0"), "minus": pick("type-2", "k=-k0"), "type1": pick("type-1", None)}


def candidate_checks() -> list[CandidateCheck]:
    out = []
    for case, d in _toml("resonances.toml")["candidates"].items():
        printed = {k: sorted(v, reverse=True) for k, v in d.items()}
        out.append(CandidateCheck(case, printed, candidate_lists(case)))
    return out


# ---------------------------------------------------------------------------
# printed family formulas against the enumeration


@dataclass
class FamilyCheck:
    family: str
    point: dict
    printed: dict
    enumerated: dict
    deviation: str | None = None

    @property
    def diffs(self) -> list[str]:
        return [k for k in self.enumerated if self.printed.get(k) != self.enumerated[k]]

    @property
    def outcome(self) -> str:
        if not self.diffs:
            return "match"
        return "deviation" if self.deviation else "mismatch"

    def to_json(self) -> dict:
        return {"family": self.family, "point": self.point, "printed": self.printed,
                "enumerated": self.enumerated, "diffs": self.diffs, "outcome": self.outcome,
                "deviation": self.deviation}


def family_checks() -> list[FamilyCheck]:
    """Printed (alpha, beta, u0) formulas at each sample against the condition."""
    out = []
    for fam in printed_families():
        for sample in fam["samples"]:
            k = dict(zip(fam["vars"], sample))
            env = {n: sympy.Integer(v) for n, v in k.items()}
            env["u0"] = _parse(fam["u0"], env)
            printed = {"u0": str(env["u0"]), "alpha": str(_parse(fam["alpha"], env)),
                       "beta": str(_parse(fam["beta"], env))}
            sol = _from_lattice(fam["case"], k)
            enum = {"u0": str(sympy.Rational(str(sol.u0))), "alpha": str(sympy.Rational(str(sol.alpha)))}
            if sol.beta is not None:
                enum["beta"] = str(sympy.Rational(str(sol.beta)))
            elif fam.get("beta_condition"):
                # beta fixed by a compatibility condition rather than by the resonances
                enum["beta"] = str(_parse(fam["beta_condition"], {"alpha": sympy.Rational(enum["alpha"])}))
            out.append(FamilyCheck(fam["label"], k, printed, enum, fam.get("deviation")))
    return out


# ---------------------------------------------------------------------------
# the full reproduction


CLASSIFICATION = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X", "XI",
                  "XII", "XIII", "XIV", "XV", "XVI", "XVII")


@dataclass
class Report:
    entries: list[EntryResult]
    scans: list[ScanResult]
    polynomials: list[PolyCheck]
    candidates: list[CandidateCheck]
    families: list[FamilyCheck] = field(default_factory=list)

    @property
    def mismatches(self) -> list[str]:
        out = [f"entry {r.label}: " + "; ".join(r.diffs) for r in self.entries if r.outcome == "mismatch"]
        out += [f"scan {s.case}: extras {s.extras} missing {s.missing} routes_agree={s.routes_agree}"
                for s in self.scans if s.outcome == "mismatch"]
        out += [f"{p.kind}(n) {p.label}: printed {p.printed}, computed {p.computed}"
                for p in self.polynomials if not p.ok]
        out += [f"candidates {c.case}: printed {c.printed}, computed {c.computed}"
                for c in self.candidates if not c.ok]
        out += [f"family {f.family} at {f.point}: printed {f.printed}, enumerated {f.enumerated}"
                for f in self.families if f.outcome == "mismatch"]
        return out

    @property
    def deviations(self) -> list[str]:
        out = [f"entry {r.label}: {r.deviation}" for r in self.entries if r.outcome == "deviation"]
        out += [f"scan {s.case}: {s.deviation}" for s in self.scans if s.outcome == "deviation"]
        out += [f"B(n) {p.label}: {p.deviation}" for p in self.polynomials if p.outcome == "deviation"]
        out += [f"family {f.family} at {f.point}: {f.deviation}" for f in self.families if f.outcome == "deviation"]
        return out

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def entry(self, label: str) -> EntryResult:
        for r in self.entries:
            if r.label == label:
                return r
        raise KeyError(label)

    def classification(self) -> list[dict]:
        """One row per listed case with the statuses of its atlas entries."""
        rows = []
        for fam in CLASSIFICATION:
            members = [r for r in self.entries if r.family == fam]
            rows.append({"case": fam, "entries": {r.label: r.observed.get("status") for r in members}})
        return rows

    def core_passes(self) -> list[str]:
        """Families of the bosonic-core runs that pass."""
        return sorted({entry(r.label).family or r.label for r in self.entries
                       if r.observed.get("status") == "PrincipalPass" and entry(r.label).bosonic_core})

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "entries": [r.to_json() for r in self.entries],
            "scans": [s.to_json() for s in self.scans],
            "polynomials": [p.to_json() for p in self.polynomials],
            "candidates": [c.to_json() for c in self.candidates],
            "families": [f.to_json() for f in self.families],
            "classification": self.classification(),
            "mismatches": self.mismatches,
            "deviations": self.deviations,
        }

    def to_text(self) -> str:
        from .report import atlas_text
        return atlas_text(self)


def run_scans(results: Sequence[EntryResult]) -> list[ScanResult]:
    covering, failing = {}, set()
    for r in results:
        e = entry(r.label)
        for c in e.covers:
            covering[tuple(c)] = r.label
        if r.observed.get("status") in FAIL_STATUSES:
            failing.add(r.label)
    for e in _branch_entries():
        d = dict(e.covers)
        if d:
            case = d.pop("case")
            for s in VIETA_SCANS[case]():
                if all(s.vars.get(k) == v for k, v in d.items()):
                    covering[(case, s.point)] = e.label
    return [scan_case(case, covering, failing) for case in VIETA_SCANS]


def full_reproduction(jobs: int = 1, perturb: Mapping[str, Mapping[str, str]] | None = None,
                      labels: Sequence[str] | None = None) -> Report:
    """Run every atlas entry, every printed polynomial and every scan.

    ``perturb`` maps an entry label to parameter overrides (the expected
    outcome is kept, so a perturbed pass shows up as a mismatch).
    """
    perturb = dict(perturb or {})
    for label in perturb:
        entry(label)
    chosen = [e.label for e in atlas_entries() if labels is None or e.label in labels]
    work = [(label, perturb.get(label)) for label in chosen]
    if jobs > 1:
        from multiprocessing import get_context
        with get_context("spawn").Pool(jobs) as pool:
            raw = pool.map(_check_label, work)
    else:
        raw = [_check_label(w) for w in work]
    results = sorted((EntryResult(**{k: v for k, v in d.items()}) for d in raw), key=lambda r: r.label)
    if labels is not None:
        # a subset run checks only its entries; scans need every covering run
        return Report(results, [], [], [])
    scans = run_scans(results)
    polys = bosonic_polynomial_checks() + fermionic_polynomial_checks()
    return Report(results, scans, polys, candidate_checks(), family_checks())
