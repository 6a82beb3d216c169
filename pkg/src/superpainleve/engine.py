"""The singularity test for one branch.

A branch is a system with fixed leads plus a seed (leading bosonic values,
fermionic lead, pins). The driver computes the resonance polynomials of
both parity sectors, then solves the level relations one level at a time.
Within a level both sectors are solved jointly by a Newton iteration whose
Jacobian is the (scalar) body of the level matrix: the couplings between
sectors are nilpotent, so the iteration stops after finitely many steps.
A compatibility residual that still mentions coefficients of later levels
is parked and re-evaluated once those are known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import sympy

from .kernel import (
    ZERO,
    Expression,
    NotScalarError,
    Symbol,
    choose_pivots,
    interpolate,
    sym,
)
from .dsl import param
from .ring import QQ, GaussianRational, K
from .system import (
    BranchSeed,
    EvolutionSystem,
    SeriesModel,
    UsageError,
    coef_symbol,
    level_symbol_n,
    residual_oracle,
)

__all__ = [
    "ResonancePolynomial",
    "LeadResult",
    "FermionCandidate",
    "TestVerdict",
    "STATUSES",
    "exit_code",
    "leading_exponents_bosonic",
    "fermionic_leading_candidates",
    "resonance_polynomial",
    "sector_polynomials",
    "run_branch",
    "movable_log_guard",
    "static_value",
    "oracle_check",
]

STATUSES = (
    "PrincipalPass",
    "FailNonIntegerLead",
    "FailNonIntegerResonance",
    "FailCompatibility",
    "NonPrincipal",
    "Inconclusive",
    "Degenerate",
)

_EXIT = {
    "PrincipalPass": 0,
    "FailNonIntegerLead": 1,
    "FailNonIntegerResonance": 1,
    "FailCompatibility": 1,
    "Degenerate": 1,
    "NonPrincipal": 2,
    "Inconclusive": 4,
}


def exit_code(status: str) -> int:
    """Process exit code for a verdict status."""
    return _EXIT[status]


# ---------------------------------------------------------------------------
# resonance polynomials


def _horner(coeffs: Sequence[GaussianRational], x) -> GaussianRational:
    acc = GaussianRational(0)
    for c in reversed(coeffs):
        acc = acc * GaussianRational(x) + c
    return acc


def _divide_root(coeffs: list[GaussianRational], r: int) -> list[GaussianRational]:
    # synthetic division by (n - r); caller guarantees r is a root
    out = [GaussianRational(0)] * (len(coeffs) - 1)
    carry = GaussianRational(0)
    for i in range(len(coeffs) - 1, 0, -1):
        carry = coeffs[i] + carry * GaussianRational(r)
        out[i - 1] = carry
    return out


def _trim(coeffs):
    coeffs = list(coeffs)
    while coeffs and coeffs[-1].is_zero():
        coeffs.pop()
    return coeffs


def _root_candidates(c0: GaussianRational, coeffs) -> list[int]:
    den = 1
    for c in coeffs:
        den = math.lcm(den, int(c.re.denominator), int(c.im.denominator))
    g = math.gcd(int(c0.re * den), int(c0.im * den))
    ds = sympy.divisors(g)
    return sorted({d for d in ds} | {-d for d in ds})


@dataclass(frozen=True)
class ResonancePolynomial:
    """A univariate polynomial in n with its integer roots split off.

    ``coeffs`` are ascending. ``roots`` is the sorted integer multiset and
    ``residual`` (ascending) the cofactor, which has no integer root:
    coeffs == prod(n - root) * residual.
    """

    coeffs: tuple[GaussianRational, ...]
    roots: tuple[int, ...]
    residual: tuple[GaussianRational, ...]

    @classmethod
    def from_coefficients(cls, coeffs: Sequence) -> "ResonancePolynomial":
        coeffs = _trim(GaussianRational.coerce(c) for c in coeffs)
        if not coeffs:
            raise ValueError("the zero polynomial has no root factorization")
        rest = list(coeffs)
        roots: list[int] = []
        while len(rest) > 1 and rest[0].is_zero():
            rest = rest[1:]
            roots.append(0)
        changed = True
        while changed and len(rest) > 1:
            changed = False
            for r in _root_candidates(rest[0], rest):
                if _horner(rest, r).is_zero():
                    rest = _divide_root(rest, r)
                    roots.append(r)
                    changed = True
                    break
        return cls(tuple(coeffs), tuple(sorted(roots)), tuple(rest))

    @classmethod
    def from_expression(cls, e: Expression, var: Symbol | None = None) -> "ResonancePolynomial":
        var = var or level_symbol_n()
        by_power: dict[int, GaussianRational] = {}
        for (even, odd, ring), c in e.items():
            if odd or ring >> 1 or any(s is not var for s, _ in even):
                raise NotScalarError(f"not a polynomial in {var} over Q(k): {e}")
            p = even[0][1] if even else 0
            v = GaussianRational(0, c) if ring & 1 else GaussianRational(c, 0)
            by_power[p] = by_power.get(p, GaussianRational(0)) + v
        if not by_power:
            raise ValueError("the zero polynomial has no root factorization")
        top = max(by_power)
        return cls.from_coefficients([by_power.get(i, GaussianRational(0)) for i in range(top + 1)])

    @classmethod
    def from_roots(cls, roots: Sequence[int], residual: Sequence = (1,)) -> "ResonancePolynomial":
        coeffs = [GaussianRational.coerce(c) for c in residual]
        for r in roots:
            nxt = [GaussianRational(0)] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                nxt[i + 1] = nxt[i + 1] + c
                nxt[i] = nxt[i] - c * GaussianRational(r)
            coeffs = nxt
        return cls.from_coefficients(coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def integer_rooted(self) -> bool:
        return len(self.residual) == 1

    def monic(self) -> "ResonancePolynomial":
        lead = self.coeffs[-1].inverse()
        return ResonancePolynomial(tuple(c * lead for c in self.coeffs), self.roots,
                                   tuple(c * lead for c in self.residual))

    def same_up_to_scale(self, other: "ResonancePolynomial") -> bool:
        return self.monic().coeffs == other.monic().coeffs

    def __call__(self, x) -> GaussianRational:
        return _horner(self.coeffs, x)

    def __str__(self) -> str:
        parts = []
        for r in sorted(set(self.roots), key=lambda v: (v >= 0, v)):
            m = self.roots.count(r)
            f = "n" if r == 0 else (f"(n+{-r})" if r < 0 else f"(n-{r})")
            parts.append(f + (f"^{m}" if m > 1 else ""))
        res = _poly_text(self.residual)
        if len(self.residual) > 1:
            parts.append(f"({res})")
        elif res != "1":
            parts.insert(0, res if res != "-1" else "-")
        return "".join(parts) or "1"

    def to_json(self) -> dict:
        return {
            "coefficients": [str(c) for c in self.coeffs],
            "roots": list(self.roots),
            "residual": [str(c) for c in self.residual],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ResonancePolynomial":
        return cls(tuple(GaussianRational.parse(c) for c in data["coefficients"]),
                   tuple(int(r) for r in data["roots"]),
                   tuple(GaussianRational.parse(c) for c in data["residual"]))


def _poly_text(coeffs) -> str:
    terms = []
    for p in range(len(coeffs) - 1, -1, -1):
        c = coeffs[p]
        if c.is_zero():
            continue
        cs = str(c)
        mon = "" if p == 0 else ("n" if p == 1 else f"n^{p}")
        if not mon:
            terms.append(cs)
        elif cs == "1":
            terms.append(mon)
        elif cs == "-1":
            terms.append("-" + mon)
        else:
            terms.append(f"({cs})*{mon}" if ("+" in cs or "-" in cs[1:]) else f"{cs}*{mon}")
    text = " + ".join(terms) if terms else "0"
    return text.replace("+ -", "- ")


def resonance_polynomial(matrix: Sequence[Sequence[Expression]]) -> ResonancePolynomial | None:
    """Determinant of a 1x1 or 2x2 level matrix in n; None if it vanishes identically."""
    if len(matrix) == 1:
        det = matrix[0][0]
    elif len(matrix) == 2:
        det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]
    else:
        raise UsageError("only sectors of one or two fields are supported")
    if not det:
        return None
    return ResonancePolynomial.from_expression(det)


# ---------------------------------------------------------------------------
# leading exponents


@dataclass(frozen=True)
class LeadResult:
    ok: bool
    leads: dict
    reason: str = ""


def leading_exponents_bosonic(system: EvolutionSystem) -> LeadResult:
    """Pole orders of the bosonic fields from degree homogeneity.

    Every monomial of a bosonic equation must carry the weight of the
    time-derivative term, with x of weight -1 and each field of weight
    equal to its pole order. Terms containing odd fields are ignored.
    """
    bos = [f.name for f in system.bosonic]
    d = {name: sympy.Symbol(f"d_{name}") for name in bos}
    eqs = []
    for f in system.bosonic:
        if system.is_static(f.name):
            continue
        T = system.dispersive_order(f.name)
        for (even, odd, _), _c in system.equations[f.name].items():
            if odd:
                continue
            w = sum((x * (d[s.name] + s.dx) for s, x in even if s.dx is not None), sympy.Integer(0))
            eqs.append(sympy.expand(w - d[f.name] - T))
    eqs = [e for e in set(eqs) if e != 0]
    unknowns = list(d.values())
    sol = sympy.linsolve(eqs, unknowns) if eqs else None
    if not sol:
        return LeadResult(False, {}, "no balance between nonlinear and dispersive terms")
    (vals,) = sol
    if any(v.free_symbols for v in vals):
        return LeadResult(False, {}, "balance does not fix every pole order")
    leads = {}
    for name, v in zip(bos, vals):
        if not v.is_integer:
            return LeadResult(False, {}, f"non-integer pole order {v} for {name}")
        leads[name] = int(v)
    if all(v <= 0 for v in leads.values()):
        return LeadResult(False, leads, "no field is singular")
    return LeadResult(True, leads)


# ---------------------------------------------------------------------------
# branch-level evaluation helpers


STATIC_PREFIX = "static:"


def static_value(system: EvolutionSystem, name: str, level: int) -> Expression:
    """Coefficient of a field with F_t = 0.

    Such a field is a regular function W(x); expanded about x = f(t) it
    contributes W^(j)(f)/j! at phi^j, and nothing at negative powers.
    """
    f = system.field(name)
    j = level - f.lead
    if j < 0:
        return ZERO
    s = sym(STATIC_PREFIX + name, f.parity, j, chain="f")
    return Expression.symbol(s).scale(QQ(1, math.factorial(j)))


def _seed_table(system: EvolutionSystem, seed: BranchSeed, bodies_only: bool) -> dict:
    table = {param(k): v for k, v in seed.params.items()}
    for name, v in seed.leading.items():
        f = system.field(name)
        table[coef_symbol(name, f.parity, 0)] = Expression.const(v.body()) if bodies_only else v
    return table


def _matrix_at(model: SeriesModel, rows, cols, table, static_names) -> list[list[Expression]]:
    M = model.symbolic_matrix(rows, cols)

    def look(s: Symbol):
        if s in table:
            return table[s]
        if s.level is not None and s.dx is None and not s.constant and s.chain is None:
            if s.name in static_names:
                return static_value(model.system, s.name, s.level)
            return ZERO
        return None

    return [[e.substitute(look) for e in row] for row in M]


def sector_polynomials(system: EvolutionSystem, seed: BranchSeed):
    """(bosonic, fermionic) level matrices in n and their resonance polynomials."""
    model = SeriesModel(system, seed.params)
    static = {f.name for f in model.static}
    table = _seed_table(system, seed, True)
    bos = [f.name for f in model.active if not f.odd]
    fer = [f.name for f in model.active if f.odd]
    out = []
    for names in (bos, fer):
        if not names:
            out.append((None, None))
            continue
        M = _matrix_at(model, names, names, table, static)
        out.append((M, resonance_polynomial(M)))
    return out


@dataclass(frozen=True)
class FermionCandidate:
    r: int
    relation: str           # "type-1" or "type-2"
    k_relation: str | None  # "k=+k0", "k=-k0" or None


def fermionic_leading_candidates(system: EvolutionSystem, seed: BranchSeed,
                                 sample: range = range(-6, 7)) -> list[FermionCandidate]:
    """Integer leads r for which the level-0 fermionic relations admit a
    nonzero leading coefficient.

    The level-0 matrix entries are polynomials in r; they are rebuilt by
    exact interpolation over ``sample`` (and checked on the spare points).
    Type 1 needs the whole matrix to vanish; type 2 ties the second odd
    field to k0 times the first, k0 = +k or -k.
    """
    fer = [f.name for f in system.fermionic]
    if len(fer) != 2:
        raise UsageError("fermionic candidates need exactly two odd fields")
    rs = sym("r")
    N = level_symbol_n()
    values = {}
    for r in sample:
        sys_r = system.with_fermion_lead(r)
        model = SeriesModel(sys_r, seed.params)
        static = {f.name for f in model.static}
        M = _matrix_at(model, fer, fer, _seed_table(sys_r, seed, True), static)
        values[r] = [[e.substitute({N: ZERO}) for e in row] for row in M]
    pts = list(sample)
    fit_pts, check_pts = pts[:5], pts[5:]
    polys = [[interpolate([(r, values[r][i][j]) for r in fit_pts], rs) for j in range(2)] for i in range(2)]
    for r in check_pts:
        for i in range(2):
            for j in range(2):
                if polys[i][j].substitute({rs: Expression.const(r)}) != values[r][i][j]:
                    raise RuntimeError("level-0 fermionic matrix is not cubic in r")

    def roots(e: Expression) -> set[int] | None:
        if not e:
            return None   # every r
        rp = ResonancePolynomial.from_expression(e, rs)
        return set(rp.roots)

    def common(es) -> set[int]:
        acc = None
        for e in es:
            rt = roots(e)
            if rt is None:
                continue
            acc = rt if acc is None else acc & rt
        return set(pts) if acc is None else acc

    out = []
    for r in sorted(common([polys[i][j] for i in range(2) for j in range(2)]), reverse=True):
        out.append(FermionCandidate(r, "type-1", None))
    for k0, label in ((Expression.const(K), "k=+k0"), (Expression.const(-K), "k=-k0")):
        rows = [polys[i][0] + polys[i][1] * k0 for i in range(2)]
        for r in sorted(common(rows), reverse=True):
            out.append(FermionCandidate(r, "type-2", label))
    return out


def movable_log_guard(bosonic_roots: Sequence[int], forced_levels: Sequence[int]) -> bool:
    """True when a bosonic resonance sits on a level whose coefficients the
    seed already fixed: the free function there cannot be arbitrary."""
    return any(lvl in bosonic_roots for lvl in forced_levels)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class TestVerdict:
    """Outcome of one branch run.

    ``arbitrary`` lists (field, level) pairs left free at resonances, with
    ("phi", None) for the singular manifold; ``pinned`` lists free slots
    that the seed fixed by ansatz. ``failure`` holds level, sector, reason
    and the offending residual for failing statuses.
    """

    __test__ = False

    label: str
    system: str
    seed: BranchSeed
    status: str
    leads: dict
    bosonic: ResonancePolynomial | None = None
    fermionic: ResonancePolynomial | None = None
    arbitrary: list = field(default_factory=list)
    pinned: list = field(default_factory=list)
    static_functions: list = field(default_factory=list)
    fermion_relation: str | None = None
    k_relation: str | None = None
    log_flag: bool = False
    deferred: list = field(default_factory=list)
    max_level_solved: int | None = None
    failure: dict | None = None
    values: dict = field(default_factory=dict, compare=False, repr=False)
    residuals: list = field(default_factory=list, compare=False, repr=False)

    @property
    def bosonic_roots(self) -> tuple[int, ...]:
        return self.bosonic.roots if self.bosonic else ()

    @property
    def fermionic_roots(self) -> tuple[int, ...]:
        return self.fermionic.roots if self.fermionic else ()

    @property
    def passed(self) -> bool:
        return self.status == "PrincipalPass"

    def ledger_text(self) -> list[str]:
        return [_slot_text(s) for s in self.arbitrary]

    def to_json(self) -> dict:
        fail = None
        if self.failure is not None:
            fail = dict(self.failure)
            if isinstance(fail.get("residual"), Expression):
                fail["residual"] = fail["residual"].to_json()
            if isinstance(fail.get("analysis"), dict):
                fail["analysis"] = dict(fail["analysis"])
                if isinstance(fail["analysis"].get("residual"), Expression):
                    fail["analysis"]["residual"] = fail["analysis"]["residual"].to_json()
        return {
            "label": self.label,
            "system": self.system,
            "seed": self.seed.to_json(),
            "status": self.status,
            "leads": dict(self.leads),
            "bosonic": self.bosonic.to_json() if self.bosonic else None,
            "fermionic": self.fermionic.to_json() if self.fermionic else None,
            "arbitrary": [list(s) for s in self.arbitrary],
            "pinned": [list(s) for s in self.pinned],
            "static_functions": list(self.static_functions),
            "fermion_relation": self.fermion_relation,
            "k_relation": self.k_relation,
            "log_flag": self.log_flag,
            "deferred": [list(d) for d in self.deferred],
            "max_level_solved": self.max_level_solved,
            "failure": fail,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "TestVerdict":
        fail = data.get("failure")
        if fail is not None:
            fail = dict(fail)
            if fail.get("residual") is not None:
                fail["residual"] = Expression.from_json(fail["residual"])
            if isinstance(fail.get("analysis"), dict) and fail["analysis"].get("residual") is not None:
                fail["analysis"] = dict(fail["analysis"],
                                        residual=Expression.from_json(fail["analysis"]["residual"]))
        return cls(
            label=data["label"],
            system=data["system"],
            seed=BranchSeed.from_json(data["seed"]),
            status=data["status"],
            leads=dict(data["leads"]),
            bosonic=ResonancePolynomial.from_json(data["bosonic"]) if data.get("bosonic") else None,
            fermionic=ResonancePolynomial.from_json(data["fermionic"]) if data.get("fermionic") else None,
            arbitrary=[tuple(s) for s in data["arbitrary"]],
            pinned=[tuple(s) for s in data["pinned"]],
            static_functions=list(data.get("static_functions", [])),
            fermion_relation=data.get("fermion_relation"),
            k_relation=data.get("k_relation"),
            log_flag=data.get("log_flag", False),
            deferred=[tuple(d) for d in data.get("deferred", [])],
            max_level_solved=data.get("max_level_solved"),
            failure=fail,
        )


def _slot_text(slot) -> str:
    name, level = slot
    return "phi" if name == "phi" else f"{name}_{level}"


# ---------------------------------------------------------------------------
# the level driver


class _Pending:
    __slots__ = ("level", "sector", "field", "expr")

    def __init__(self, level, sector, field_name, expr):
        self.level = level
        self.sector = sector
        self.field = field_name
        self.expr = expr


class _Run:
    def __init__(self, system: EvolutionSystem, seed: BranchSeed):
        self.system = system
        self.seed = seed
        self.model = SeriesModel(system, seed.params)
        self.order = {f.name: i for i, f in enumerate(system.fields)}
        self.active = [f for f in self.model.active]
        self.static = {f.name for f in self.model.static}
        self.values: dict[tuple[str, int], Expression] = {}
        self.free: set[tuple[str, int]] = set()
        self._dt_memo: dict = {}

    # symbol classification -------------------------------------------------
    def is_coef(self, s: Symbol) -> bool:
        return s.level is not None and s.dx is None and not s.constant and s.chain is None \
            and s.name in self.system

    def lookup(self, s: Symbol):
        if not self.is_coef(s):
            return None
        if s.level < 0:
            return ZERO
        if s.name in self.static:
            v = static_value(self.system, s.name, s.level)
            for _ in range(s.dt):
                v = v.formal_dt()
            return v
        key = (s.name, s.level)
        if key in self.free:
            return None
        v = self.values.get(key)
        if v is None:
            return None
        if s.dt == 0:
            return v
        mk = (key, s.dt)
        d = self._dt_memo.get(mk)
        if d is None:
            d = v
            for _ in range(s.dt):
                d = d.formal_dt()
            self._dt_memo[mk] = d
        return d

    def unresolved(self, e: Expression) -> list[Symbol]:
        out = []
        for s in e.free_symbols():
            if self.is_coef(s) and s.name not in self.static and s.level >= 0:
                key = (s.name, s.level)
                if key not in self.values and key not in self.free:
                    out.append(s)
        return out


def _sector(f) -> str:
    return "fermionic" if f.odd else "bosonic"


def run_branch(system: EvolutionSystem, seed: BranchSeed, max_level: int | None = None,
               analyze_nonprincipal: bool = False, label: str | None = None) -> TestVerdict:
    """Run the singularity test on one branch and return the verdict."""
    label = label or seed.label
    sys = system.bosonic_core() if seed.bosonic_only else system
    if seed.r is not None and sys.fermionic:
        sys = sys.with_fermion_lead(seed.r)
    leads = {f.name: f.lead for f in sys.fields}

    lr = leading_exponents_bosonic(sys)
    base = dict(label=label, system=system.name, seed=seed, leads=leads)
    if not lr.ok:
        return TestVerdict(status="FailNonIntegerLead", failure={"level": None, "sector": "bosonic",
                                                                  "reason": lr.reason}, **base)
    for name, p in lr.leads.items():
        if leads[name] != p:
            raise UsageError(f"lead of {name} is {leads[name]} but the balance gives {p}")

    run = _Run(sys, seed)
    model = run.model
    missing = [f.name for f in model.active if not f.odd and f.name not in seed.leading]
    if missing:
        raise UsageError(f"seed lacks leading values for {', '.join(missing)}")

    (_, bpoly), (_, fpoly) = sector_polynomials(sys, seed)
    has_fer = any(f.odd for f in model.active)
    verdict = TestVerdict(status="Inconclusive", bosonic=bpoly, fermionic=fpoly, **base)
    verdict.static_functions = sorted(f.name.upper() + "(x)" for f in model.static)
    if bpoly is None or (has_fer and fpoly is None):
        verdict.status = "Degenerate"
        verdict.failure = {"level": None, "sector": "bosonic" if bpoly is None else "fermionic",
                           "reason": "level determinant vanishes identically"}
        return verdict
    for poly, sector in ((bpoly, "bosonic"), (fpoly, "fermionic")):
        if poly is not None and not poly.integer_rooted:
            verdict.status = "FailNonIntegerResonance"
            verdict.failure = {"level": None, "sector": sector,
                               "reason": "resonance polynomial has non-integer roots"}
            return verdict

    broots = list(bpoly.roots)
    froots = list(fpoly.roots) if fpoly else []
    negative = [r for r in broots if r < 0]
    principal = negative == [-1] and all(r >= 0 for r in froots)
    verdict.log_flag = movable_log_guard(broots, seed.forced_levels)
    if not principal:
        verdict.status = "NonPrincipal"
        verdict.failure = {"level": None, "sector": None,
                           "reason": "negative resonances " + str(sorted(negative + [r for r in froots if r < 0]))}
        if not analyze_nonprincipal:
            return verdict

    last = max([r for r in broots + froots if r >= 0], default=0)
    limit = last + 2
    if max_level is not None:
        limit = min(limit, max_level)
    mult = {"bosonic": {}, "fermionic": {}}
    for r in broots:
        mult["bosonic"][r] = mult["bosonic"].get(r, 0) + 1
    for r in froots:
        mult["fermionic"][r] = mult["fermionic"].get(r, 0) + 1

    arbitrary: list = [("phi", None)] if -1 in broots else []
    pending: list[_Pending] = []
    start = min(model.start_level(f.name) for f in model.active)
    verdict.max_level_solved = None
    table0 = _seed_table(sys, seed, False)

    def fail(level, sector, reason, residual=None, status="FailCompatibility"):
        if verdict.status == "NonPrincipal":
            info = {"level": level, "sector": sector, "reason": reason}
            if residual is not None:
                info["residual"] = residual
            verdict.failure = dict(verdict.failure, analysis=info)
            verdict.arbitrary = arbitrary
            verdict.values = dict(run.values)
            return verdict
        verdict.status = status
        verdict.failure = {"level": level, "sector": sector, "reason": reason}
        if residual is not None:
            verdict.failure["residual"] = residual
        verdict.arbitrary = arbitrary
        verdict.values = dict(run.values)
        return verdict

    n = start
    while n <= limit:
        # relations at level n with lower levels substituted
        rels = {}
        for f in model.active:
            if n < model.start_level(f.name):
                continue
            rel = model.relation(f.name, n)
            if n == 0:
                rel = rel.substitute({k: v for k, v in table0.items() if k.constant})
            rels[f.name] = rel.substitute(run.lookup)
        unknowns = {f.name: coef_symbol(f.name, f.parity, n) for f in model.active if n >= 0}
        x: dict[Symbol, Expression] = {}
        for name, s in unknowns.items():
            if n == 0 and name in seed.leading:
                x[s] = seed.leading[name]
            else:
                x[s] = ZERO
        # body Jacobian per sector
        pivots = []       # (field row, symbol col)
        defects = []
        free_syms = []
        for odd in (False, True):
            names = [f.name for f in model.active if f.odd == odd and f.name in unknowns]
            if not names:
                continue
            J = []
            for rn in names:
                row = []
                for cn in names:
                    e = rels[rn].coefficient_of(unknowns[cn]).substitute(x)
                    b = e.body()
                    if not (e - Expression.const(b)).is_nilpotent():
                        raise UsageError(f"level-{n} matrix entry is not a number: {e}; "
                                         "fix the remaining parameters")
                    row.append(b)
                J.append(row)
            hint = None
            for h in seed.free_hints.get(n, ()):
                if h in names:
                    hint = names.index(h)
            try:
                piv, fr = choose_pivots(J, hint)
            except ValueError as exc:
                raise UsageError(f"free hint at level {n}: {exc}") from None
            sector = "fermionic" if odd else "bosonic"
            if len(fr) != mult[sector].get(n, 0):
                if len(fr) > mult[sector].get(n, 0):
                    raise RuntimeError(f"level {n}: rank drop in the {sector} sector off the resonances")
                defects.append((sector, f"resonance of multiplicity {mult[sector][n]} "
                                        f"leaves only {len(fr)} free function(s)"))
            for i, j in piv:
                pivots.append((names[i], unknowns[names[j]], J[i][j], sector, J, names, i, j))
            for j in fr:
                free_syms.append(unknowns[names[j]])
        # free unknowns: symbol, pin, or (level 0 with a seed) the seed value
        for s in free_syms:
            key = (s.name, n)
            if key in seed.pins:
                x[s] = seed.pins[key]
                verdict.pinned.append(key)
            elif n == 0 and s.name in seed.leading:
                verdict.log_flag = True
                return fail(0, _sector(sys.field(s.name)),
                            "resonance at a level fixed by the seed (movable logarithm)")
            else:
                x[s] = Expression.symbol(s)
                run.free.add(key)
                arbitrary.append(key)
        for key in list(seed.pins):
            if key[1] == n and key not in verdict.pinned:
                raise UsageError(f"pin {key[0]}_{key[1]} is not at a resonance of this branch")
        # Newton iteration on the pivot rows, sector by sector inverse
        solve_blocks = {}
        for rn, s, b, sector, J, names, i, j in pivots:
            solve_blocks.setdefault(sector, (J, names, []))[2].append((rn, s, i, j))
        for _ in range(200):
            moved = False
            for sector, (J, names, cells) in solve_blocks.items():
                rows = [rels[rn].substitute(x) for rn, *_ in cells]
                if not any(rows):
                    continue
                if len(cells) == 1:
                    (rn, s, i, j), = cells
                    inv = J[i][j].inverse()
                    delta = {s: rows[0] * Expression.const(-inv)}
                else:
                    sub = [[J[ci][cj] for (_, _, _, cj) in cells] for (_, _, ci, _) in cells]
                    det = sub[0][0] * sub[1][1] - sub[0][1] * sub[1][0]
                    di = det.inverse()
                    inv = [[sub[1][1] * di, -sub[0][1] * di], [-sub[1][0] * di, sub[0][0] * di]]
                    delta = {}
                    for a, (_, s, _, _) in enumerate(cells):
                        delta[s] = -(rows[0] * Expression.const(inv[a][0]) + rows[1] * Expression.const(inv[a][1]))
                for s, d in delta.items():
                    if d:
                        x[s] = x[s] + d
                        moved = True
            if not moved:
                break
        else:
            raise RuntimeError(f"level {n}: Newton iteration did not terminate")
        if n == 0:
            for name, v in seed.leading.items():
                s = unknowns[name]
                if (x[s] - v).body() != GaussianRational(0) or not (x[s] - v).is_nilpotent():
                    return fail(0, "bosonic", "seed does not solve the leading-order relations")
        # store solutions
        for s, v in x.items():
            key = (s.name, n)
            if key not in run.free:
                run.values[key] = v
        if n == 0:
            verdict.fermion_relation, verdict.k_relation = _fermion_relation(sys, x, seed)
        # residuals: non-pivot rows of this level plus pending ones
        pivot_rows = {rn for rn, *_ in pivots}
        for name, rel in rels.items():
            if name in pivot_rows:
                continue
            r = rel.substitute(x)
            if r:
                pending.append(_Pending(n, _sector(sys.field(name)), name, r))
        _refresh(run, n, pending)
        still = []
        for p in pending:
            if not p.expr:
                if p.level != n:
                    verdict.deferred.append((p.level, p.sector, n))
                continue
            if run.unresolved(p.expr):
                still.append(p)
                continue
            return fail(p.level, p.sector, f"compatibility condition at level {p.level} "
                                           f"({p.field} relation) is not satisfied", p.expr)
        pending = still
        if defects:
            # the compatibility conditions hold but too few functions are free
            return fail(n, defects[0][0], defects[0][1])
        verdict.max_level_solved = n
        if n >= last and not pending:
            break
        n += 1

    verdict.arbitrary = arbitrary
    verdict.values = dict(run.values)
    if pending:
        p = pending[0]
        return fail(p.level, p.sector, "compatibility condition still depends on unsolved "
                                       "coefficients at the last level", p.expr, status="Inconclusive")
    if verdict.max_level_solved is None or verdict.max_level_solved < last:
        verdict.status = "Inconclusive" if verdict.status != "NonPrincipal" else verdict.status
        if verdict.status == "Inconclusive":
            verdict.failure = {"level": verdict.max_level_solved, "sector": None,
                               "reason": f"stopped before the last resonance {last}"}
        return verdict
    if verdict.status == "NonPrincipal":
        return verdict
    total = len(broots) + len(froots)
    if len(arbitrary) + len(verdict.pinned) != total:
        return fail(None, None, f"{len(arbitrary)} free functions for {total} resonances")
    verdict.status = "PrincipalPass"
    verdict.failure = None
    return verdict


def _refresh(run: _Run, n: int, pending: list[_Pending]):
    """Push the level-n solutions into stored values and parked residuals."""
    run._dt_memo.clear()
    solved_now = {k for k in run.values if k[1] == n}
    if not solved_now:
        return

    def look(s: Symbol):
        if run.is_coef(s) and (s.name, s.level) in solved_now:
            return run.lookup(s)
        return None

    def touches(e: Expression) -> bool:
        return any(run.is_coef(s) and (s.name, s.level) in solved_now for s in e.free_symbols())

    for key, v in list(run.values.items()):
        if key[1] < n and touches(v):
            run.values[key] = v.substitute(look)
    run._dt_memo.clear()
    for p in pending:
        if touches(p.expr):
            p.expr = p.expr.substitute(look)
        else:
            p.expr = p.expr


def _fermion_relation(sys: EvolutionSystem, x: Mapping[Symbol, Expression], seed: BranchSeed):
    fer = [f for f in sys.fermionic]
    if len(fer) != 2:
        return None, None
    s1 = coef_symbol(fer[0].name, 1, 0)
    s2 = coef_symbol(fer[1].name, 1, 0)
    v1, v2 = x.get(s1), x.get(s2)
    if v1 is None or v2 is None:
        return None, None
    e1, e2 = Expression.symbol(s1), Expression.symbol(s2)
    if v1 == e1 and v2 == e2:
        return "type-1", None
    if v1 == e1:
        k0 = v2.coefficient_of(s1).substitute({s1: ZERO})
        if k0.is_scalar() and k0.body() in (K, -K):
            return "type-2", "k=+k0" if k0.body() == K else "k=-k0"
        return "type-2", None
    if not v1 and not v2:
        return "pinned", None
    return None, None


# ---------------------------------------------------------------------------
# independent cross-check


def oracle_check(system: EvolutionSystem, verdict: TestVerdict, N: int | None = None):
    """Substitute the solved series of a verdict into the PDEs directly."""
    seed = verdict.seed
    sys = system.bosonic_core() if seed.bosonic_only else system
    if seed.r is not None and sys.fermionic:
        sys = sys.with_fermion_lead(seed.r)
    N = verdict.max_level_solved if N is None else N
    solved = {k: v for k, v in verdict.values.items() if k[1] <= N}
    return residual_oracle(sys, seed.params, solved, N,
                           static_values=lambda name, m: static_value(sys, name, m))
