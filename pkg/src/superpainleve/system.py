"""Evolution systems and their Laurent-series recursion relations.

A system is a list of fields ``F`` with evolution equations ``F_t = RHS``
where RHS is a polynomial in jet variables ``d^k(G)`` and parameters.
Substituting ``F = sum_n F_n(t) phi^(n - p_F)`` with ``phi = x - f(t)``
turns each equation into one relation per power of phi. The relation of
equation ``F`` at *level* n is the coefficient of ``phi^(n - p_F - T_F)``
where ``T_F`` is the order of the linear dispersive term of ``F``.

Two independent routes compute these relations:

* :meth:`SeriesModel.relation` enumerates index tuples of each monomial
  directly (the recursion route);
* :func:`residual_oracle` multiplies truncated Laurent series and reads
  off coefficients (the oracle route).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .dsl import FieldDecl, ParsedSystem, jet, param, parse_system
from .kernel import ONE, ZERO, Expression, Symbol, sym
from .ring import QQ, GaussianRational, K

__all__ = [
    "FieldSpec",
    "EvolutionSystem",
    "BranchSeed",
    "SeriesModel",
    "LaurentSeries",
    "build_skdv",
    "build_osp22",
    "load_system",
    "total_dx",
    "coef_symbol",
    "fprime",
    "level_symbol_n",
    "residual_oracle",
    "OracleResult",
    "UsageError",
]


class UsageError(ValueError):
    """Bad arguments to a model operation (not a test outcome)."""


@dataclass(frozen=True)
class FieldSpec:
    name: str
    parity: int
    lead: int

    @property
    def odd(self) -> bool:
        return self.parity == 1


def coef_symbol(name: str, parity: int, level: int) -> Symbol:
    """The series coefficient ``name_level`` as a function of t."""
    return sym(name, parity, level)


def fprime() -> Symbol:
    """f'(t) for the singular manifold phi = x - f(t)."""
    return sym("f", 0, None, 1)


def level_symbol_n() -> Symbol:
    """The symbolic recursion level used for closed-form matrices."""
    return param("n")


def _jet_dx(s: Symbol) -> Expression:
    if s.dx is None:
        return ZERO
    return Expression.symbol(jet(s.name, s.parity, s.dx + 1))


def total_dx(e: Expression, times: int = 1) -> Expression:
    """Total x-derivative of a jet polynomial."""
    for _ in range(times):
        e = e.derivation(_jet_dx)
    return e


class EvolutionSystem:
    """Fields plus one evolution equation per field; immutable after construction."""

    def __init__(self, fields: Sequence[FieldSpec], equations: Mapping[str, Expression],
                 params: Sequence[str] = (), name: str = ""):
        self.fields = tuple(fields)
        self.name = name
        self.params = tuple(params)
        self._by_name = {f.name: f for f in self.fields}
        if set(equations) != set(self._by_name):
            raise UsageError("need exactly one equation per field")
        self.equations = {f.name: equations[f.name] for f in self.fields}
        for f in self.fields:
            eq = self.equations[f.name]
            if eq and eq.parity() != f.parity:
                raise UsageError(f"equation for {f.name} is not parity-homogeneous with the field")
            for s in eq.free_symbols():
                if s.dx is None and not s.constant:
                    raise UsageError(f"equation for {f.name} contains non-jet symbol {s}")
                if s.dx is not None and s.name not in self._by_name:
                    raise UsageError(f"equation for {f.name} uses undeclared field {s.name}")

    def field(self, name: str) -> FieldSpec:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def bosonic(self) -> list[FieldSpec]:
        return [f for f in self.fields if not f.odd]

    @property
    def fermionic(self) -> list[FieldSpec]:
        return [f for f in self.fields if f.odd]

    def is_static(self, name: str) -> bool:
        """A field whose evolution equation is ``F_t = 0``."""
        return not self.equations[name]

    def dispersive_order(self, name: str) -> int:
        """Highest k with ``d^k(F)`` appearing linearly in F's own equation."""
        best = None
        for (even, odd, _), _c in self.equations[name].items():
            jets = [(s, x) for s, x in even if s.dx is not None] + [(s, 1) for s in odd]
            if len(jets) == 1 and jets[0][1] == 1 and jets[0][0].name == name:
                k = jets[0][0].dx
                best = k if best is None else max(best, k)
        if best is None:
            raise UsageError(f"equation for {name} has no linear term in {name}")
        return best

    def jet(self, name: str, order: int = 0) -> Expression:
        f = self._by_name[name]
        return Expression.symbol(jet(name, f.parity, order))

    def substitute_params(self, values: Mapping[str, object]) -> "EvolutionSystem":
        """Fix some parameters to numbers or expressions."""
        table = {}
        for k, v in values.items():
            if k not in self.params:
                raise UsageError(f"unknown parameter {k}")
            table[param(k)] = v if isinstance(v, Expression) else Expression.const(v)
        eqs = {n: e.substitute(table) for n, e in self.equations.items()}
        rest = [p for p in self.params if p not in values]
        return EvolutionSystem(self.fields, eqs, rest, self.name)

    def with_leads(self, leads: Mapping[str, int]) -> "EvolutionSystem":
        fields = [FieldSpec(f.name, f.parity, leads.get(f.name, f.lead)) for f in self.fields]
        return EvolutionSystem(fields, self.equations, self.params, self.name)

    def with_fermion_lead(self, r: int) -> "EvolutionSystem":
        return self.with_leads({f.name: r for f in self.fermionic})

    def bosonic_core(self) -> "EvolutionSystem":
        """Drop the odd fields and set them to zero in the remaining equations."""
        zero = {}
        for e in self.equations.values():
            for s in e.free_symbols():
                if s.dx is not None and s.parity == 1:
                    zero[s] = ZERO
        eqs = {f.name: self.equations[f.name].substitute(zero) for f in self.bosonic}
        return EvolutionSystem(self.bosonic, eqs, self.params, self.name + " (bosonic core)")

    def __eq__(self, other) -> bool:
        return (isinstance(other, EvolutionSystem) and self.fields == other.fields
                and self.equations == other.equations and set(self.params) == set(other.params))

    def __hash__(self):
        return hash((self.fields, tuple(self.params)))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "params": list(self.params),
            "fields": [{"name": f.name, "parity": "odd" if f.odd else "even", "lead": f.lead}
                       for f in self.fields],
            "equations": {n: {"text": str(e), "terms": e.to_json()} for n, e in self.equations.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "EvolutionSystem":
        fields = [FieldSpec(f["name"], 1 if f["parity"] == "odd" else 0, int(f["lead"]))
                  for f in data["fields"]]
        eqs = {n: Expression.from_json(v["terms"]) for n, v in data["equations"].items()}
        return cls(fields, eqs, data.get("params", ()), data.get("name", ""))

    @classmethod
    def from_parsed(cls, parsed: ParsedSystem) -> "EvolutionSystem":
        fields = [FieldSpec(d.name, d.parity, d.lead) for d in parsed.fields]
        return cls(fields, parsed.equations, parsed.params, parsed.name)


def load_system(path) -> EvolutionSystem:
    with open(path) as fh:
        text = fh.read()
    return EvolutionSystem.from_parsed(parse_system(text, str(path)))


def _value(v) -> Expression:
    if v is None:
        return None
    return v if isinstance(v, Expression) else Expression.const(v)


def build_skdv(c=None, alpha=None, beta=None) -> EvolutionSystem:
    """The N=2 super-KdV component system with ``eps_12 = -eps_21 = 1``.

    Any of c, alpha, beta left as None stays a symbolic parameter. Odd
    fields ``xi1``, ``xi2`` get the placeholder lead 2 (reset per branch).
    """
    P = {}
    for name, v in (("c", c), ("alpha", alpha), ("beta", beta)):
        P[name] = Expression.symbol(param(name)) if v is None else _value(v)
    c_, a_, b_ = P["c"], P["alpha"], P["beta"]
    six_c = 6 - c_
    am1 = a_ - 1

    def J(name, k=0):
        return Expression.symbol(jet(name, 1 if name.startswith("xi") else 0, k))

    u, w = J("u"), J("w")
    xi = {1: J("xi1"), 2: J("xi2")}
    d = lambda name, k: J(name, k)
    eps = {(1, 2): 1, (2, 1): -1}

    eq_u = (-d("u", 3) + 6 * u * d("u", 1)
            - c_ * (xi[1] * d("xi1", 2) + xi[2] * d("xi2", 2))
            - c_ * w * d("w", 3) - six_c * d("w", 1) * d("w", 2)
            - am1 * Expression.const(QQ(1, 2)) * total_dx(w * w, 3)
            + b_ * total_dx(u * w * w)
            + 2 * b_ * total_dx(xi[2] * xi[1] * w))
    eq_xi = {}
    for i in (1, 2):
        j = 3 - i
        e = eps[(i, j)]
        xj = f"xi{j}"
        eq_xi[i] = (-d(f"xi{i}", 3) + c_ * d("u", 1) * xi[i] + six_c * u * d(f"xi{i}", 1)
                    - e * c_ * d(xj, 2) * w - e * six_c * d(xj, 1) * d("w", 1)
                    - e * am1 * total_dx(xi[j] * w, 2)
                    + b_ * total_dx(xi[i] * w * w))
    eq_w = (-d("w", 3) + c_ * d("u", 1) * w + six_c * u * d("w", 1)
            + am1 * total_dx(u * w + xi[2] * xi[1]) + b_ * w * w * d("w", 1))
    params = [n for n, v in (("c", c), ("alpha", alpha), ("beta", beta)) if v is None]
    fields = [FieldSpec("u", 0, 2), FieldSpec("xi1", 1, 2), FieldSpec("xi2", 1, 2), FieldSpec("w", 0, 1)]
    return EvolutionSystem(fields, {"u": eq_u, "xi1": eq_xi[1], "xi2": eq_xi[2], "w": eq_w},
                           params, "skdv")


def build_osp22() -> EvolutionSystem:
    """The O(2)-invariant osp(2,2) KdV system with static ``w``.

    ``w`` carries lead 1 (its leading coefficient vanishes for a static
    field) and the odd fields the placeholder lead 1.
    """
    def J(name, k=0):
        return Expression.symbol(jet(name, 1 if name.startswith("xi") else 0, k))

    u, w = J("u"), J("w")
    xi = {1: J("xi1"), 2: J("xi2")}
    wx = J("w", 1)
    inner = (-J("u", 2) + 3 * u * u
             - 12 * (xi[1] * J("xi1", 1) + xi[2] * J("xi2", 1))
             + 24 * xi[2] * xi[1] * w + 2 * wx * wx + 2 * w * J("w", 2)
             - 6 * u * w * w + 3 * w ** 4)
    eq_u = total_dx(inner)
    eps = {(1, 2): 1, (2, 1): -1}
    eq_xi = {}
    for i in (1, 2):
        j = 3 - i
        e = eps[(i, j)]
        xj = f"xi{j}"
        eq_xi[i] = (-4 * J(f"xi{i}", 3) + 3 * J("u", 1) * xi[i] + 6 * u * J(f"xi{i}", 1)
                    + 6 * w * w * J(f"xi{i}", 1) + 6 * w * wx * xi[i]
                    - e * 12 * J(xj, 2) * w - e * 12 * J(xj, 1) * wx - e * 4 * xi[j] * J("w", 2)
                    + e * 6 * u * xi[j] * w - e * 2 * xi[j] * w ** 3)
    fields = [FieldSpec("u", 0, 2), FieldSpec("xi1", 1, 1), FieldSpec("xi2", 1, 1), FieldSpec("w", 0, 1)]
    return EvolutionSystem(fields, {"u": eq_u, "xi1": eq_xi[1], "xi2": eq_xi[2], "w": ZERO},
                           (), "osp22")


# ---------------------------------------------------------------------------
# branch seeds


@dataclass(frozen=True)
class BranchSeed:
    """Leading-order data of one branch.

    ``leading`` holds the level-0 values of the bosonic fields (their
    bodies must solve the level-0 relations). ``r`` is the common lead of
    the odd fields; the relation between the two leading odd coefficients
    is derived from the level-0 fermionic matrix. ``pins`` fixes the value
    of functions left free at a resonance (an ansatz, not a solution).
    ``free_hints`` names, per level, which unknown stays arbitrary at a
    rank-one resonance when several choices are possible.
    """

    label: str
    params: Mapping[str, Expression] = field(default_factory=dict)
    leading: Mapping[str, Expression] = field(default_factory=dict)
    r: int | None = None
    bosonic_only: bool = False
    pins: Mapping[tuple[str, int], Expression] = field(default_factory=dict)
    free_hints: Mapping[int, tuple[str, ...]] = field(default_factory=dict)
    forced_levels: tuple[int, ...] = (0,)
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "params", {k: _value(v) for k, v in self.params.items()})
        object.__setattr__(self, "leading", {k: _value(v) for k, v in self.leading.items()})
        object.__setattr__(self, "pins", {tuple(k): _value(v) for k, v in self.pins.items()})
        object.__setattr__(self, "free_hints", {int(k): tuple(v) for k, v in self.free_hints.items()})
        for name, v in self.leading.items():
            if v.parity() != 0:
                raise UsageError(f"leading value of {name} must be even")

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "params": {k: v.to_json() for k, v in sorted(self.params.items())},
            "leading": {k: v.to_json() for k, v in sorted(self.leading.items())},
            "r": self.r,
            "bosonic_only": self.bosonic_only,
            "pins": [[k[0], k[1], v.to_json()] for k, v in sorted(self.pins.items())],
            "free_hints": {str(k): list(v) for k, v in sorted(self.free_hints.items())},
            "forced_levels": list(self.forced_levels),
            "note": self.note,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BranchSeed":
        return cls(
            label=data["label"],
            params={k: Expression.from_json(v) for k, v in data["params"].items()},
            leading={k: Expression.from_json(v) for k, v in data["leading"].items()},
            r=data.get("r"),
            bosonic_only=data.get("bosonic_only", False),
            pins={(a, int(b)): Expression.from_json(v) for a, b, v in data.get("pins", [])},
            free_hints={int(k): tuple(v) for k, v in data.get("free_hints", {}).items()},
            forced_levels=tuple(data.get("forced_levels", (0,))),
            note=data.get("note", ""),
        )

    def describe(self) -> str:
        parts = [f"{k}={v}" for k, v in sorted(self.params.items())]
        parts += [f"{k}0={v}" for k, v in self.leading.items()]
        if self.r is not None and not self.bosonic_only:
            parts.append(f"r={self.r}")
        return ", ".join(parts)


# ---------------------------------------------------------------------------
# the recursion route


def _falling(x, k: int):
    out = 1
    for i in range(k):
        out = out * (x - i)
    return out


@dataclass
class _Monomial:
    coef: Expression                 # parameters, k, generators
    factors: list[tuple[str, int, int, int]]   # (field, parity, lead, k) in product order


class SeriesModel:
    """A system with all leads fixed; caches level relations.

    Levels of every field start at 0; coefficients with negative index
    are zero.
    """

    def __init__(self, system: EvolutionSystem, param_values: Mapping[str, Expression] | None = None):
        self.system = system
        table = {param(k): v for k, v in (param_values or {}).items()}
        self.equations = {n: (e.substitute(table) if table else e) for n, e in system.equations.items()}
        self.active = [f for f in system.fields if not system.is_static(f.name)]
        self.static = [f for f in system.fields if system.is_static(f.name)]
        self.T = {f.name: system.dispersive_order(f.name) for f in self.active}
        self._monos = {f.name: self._decompose(self.equations[f.name]) for f in self.active}
        self._cache: dict = {}

    def _decompose(self, eq: Expression) -> list[_Monomial]:
        out = []
        for (even, odd, ring), c in eq.items():
            coef_even = tuple((s, x) for s, x in even if s.dx is None)
            factors = []
            for s, x in even:
                if s.dx is not None:
                    f = self.system.field(s.name)
                    factors.extend([(s.name, 0, f.lead, s.dx)] * x)
            for s in odd:
                if s.dx is None:
                    raise UsageError("odd parameters are not supported")
                f = self.system.field(s.name)
                factors.append((s.name, 1, f.lead, s.dx))
            out.append(_Monomial(Expression._raw({(coef_even, (), ring): c}), factors))
        return out

    def power(self, name: str, n: int) -> int:
        """The phi power whose coefficient is the level-n relation of ``name``."""
        return n - self.system.field(name).lead - self.T[name]

    def shift(self, name: str) -> int:
        """Largest (level of a single factor) - n over the relation of ``name``."""
        best = None
        L = -self.system.field(name).lead - self.T[name]
        for m in self._monos[name]:
            s = L + sum(p + k for _, _, p, k in m.factors)
            best = s if best is None else max(best, s)
        return 0 if best is None else best

    def start_level(self, name: str) -> int:
        """First level whose relation can be nonzero (never above 0)."""
        return min(0, -self.shift(name)) if self._monos[name] else 0

    def relation(self, name: str, n: int) -> Expression:
        """RHS - F_t at level n as a polynomial in the coefficient symbols."""
        key = (name, n)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        f = self.system.field(name)
        P = self.power(name, n)
        acc: dict = {}

        def add(e: Expression):
            for k, c in e.items():
                prev = acc.get(k)
                acc[k] = c if prev is None else prev + c

        for mono in self._monos[name]:
            M = P + sum(p + k for _, _, p, k in mono.factors)
            if M < 0:
                continue
            nf = len(mono.factors)
            for levels in _compositions(M, nf):
                scal = 1
                for (g, par, p, k), m in zip(mono.factors, levels):
                    scal *= _falling(m - p, k)
                    if not scal:
                        break
                if not scal:
                    continue
                term = mono.coef.scale(scal)
                for (g, par, p, k), m in zip(mono.factors, levels):
                    term = term * Expression.symbol(coef_symbol(g, par, m))
                    if not term:
                        break
                add(term)
        # minus F_t: F_t coefficient at power P is F'_{P+p} - (P+1) f' F_{P+p+1}
        m1 = P + f.lead
        if m1 >= 0:
            add(-Expression.symbol(coef_symbol(name, f.parity, m1).base).formal_dt())
        m2 = P + f.lead + 1
        if m2 >= 0:
            add((Expression.symbol(fprime()) * Expression.symbol(coef_symbol(name, f.parity, m2))).scale(P + 1))
        out = Expression._raw({k: c for k, c in acc.items() if c})
        self._cache[key] = out
        return out

    def symbolic_matrix(self, rows: Sequence[str], cols: Sequence[str]) -> list[list[Expression]]:
        """Level matrix with the level left as the symbol ``n``.

        Entry (F, G) is the right coefficient of G_n in the level-n relation
        of F, with every other factor at the fixed level that balances it.
        """
        N = Expression.symbol(level_symbol_n())
        out = []
        for F in rows:
            f = self.system.field(F)
            row = []
            for G in cols:
                g = self.system.field(G)
                holder = sym("__unknown" if not g.parity else "__unknown_odd", g.parity)
                total = ZERO
                for mono in self._monos[F]:
                    for j, (name, par, p, k) in enumerate(mono.factors):
                        if name != G:
                            continue
                        others = [fac for i, fac in enumerate(mono.factors) if i != j]
                        M0 = -f.lead - self.T[F] + p + k + sum(pp + kk for _, _, pp, kk in others)
                        if M0 < 0:
                            continue
                        for levels in _compositions(M0, len(others)):
                            scal = 1
                            for (g2, par2, p2, k2), m in zip(others, levels):
                                scal *= _falling(m - p2, k2)
                            if not scal:
                                continue
                            term = mono.coef.scale(scal) * _falling(N - p, k)
                            it = iter(levels)
                            for i, (g2, par2, p2, k2) in enumerate(mono.factors):
                                if i == j:
                                    term = term * Expression.symbol(holder)
                                else:
                                    term = term * Expression.symbol(coef_symbol(g2, par2, next(it)))
                            total = total + term
                row.append(total.coefficient_of(holder))
            out.append(row)
        return out


def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# the oracle route


class LaurentSeries:
    """Truncated Laurent series in phi with coefficients exact below ``prec``."""

    __slots__ = ("c", "prec")

    def __init__(self, coeffs: Mapping[int, Expression], prec: int):
        self.c = {p: v for p, v in coeffs.items() if p < prec and v}
        self.prec = prec

    def low(self) -> int:
        return min(self.c, default=self.prec)

    def __add__(self, other: "LaurentSeries") -> "LaurentSeries":
        prec = min(self.prec, other.prec)
        out = dict(self.c)
        for p, v in other.c.items():
            out[p] = out[p] + v if p in out else v
        return LaurentSeries(out, prec)

    def __neg__(self):
        return LaurentSeries({p: -v for p, v in self.c.items()}, self.prec)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other) -> "LaurentSeries":
        if isinstance(other, Expression):
            return LaurentSeries({p: v * other for p, v in self.c.items()}, self.prec)
        prec = min(self.low() + other.prec, other.low() + self.prec)
        out: dict[int, Expression] = {}
        for p1, v1 in self.c.items():
            for p2, v2 in other.c.items():
                p = p1 + p2
                if p >= prec:
                    continue
                prod = v1 * v2
                out[p] = out[p] + prod if p in out else prod
        return LaurentSeries(out, prec)

    def rmul(self, e: Expression) -> "LaurentSeries":
        return LaurentSeries({p: e * v for p, v in self.c.items()}, self.prec)

    def dx(self) -> "LaurentSeries":
        return LaurentSeries({p - 1: v.scale(p) for p, v in self.c.items() if p}, self.prec - 1)

    def dt(self) -> "LaurentSeries":
        fp = Expression.symbol(fprime())
        out: dict[int, Expression] = {}
        for p, v in self.c.items():
            d = v.formal_dt()
            if d:
                out[p] = out[p] + d if p in out else d
            if p:
                t = (fp * v).scale(-p)
                out[p - 1] = out[p - 1] + t if p - 1 in out else t
        return LaurentSeries(out, self.prec - 1)


@dataclass
class OracleResult:
    """Nonzero exact coefficients per field, keyed by level.

    ``window[F]`` is the first level of F's relation that the truncation
    no longer determines; every level below it was checked.
    """

    residuals: dict[str, dict[int, Expression]]
    window: dict[str, int]

    def is_zero(self) -> bool:
        return not any(self.residuals.values())

    def first_failure(self) -> tuple[str, int] | None:
        bad = [(lvl, name) for name, r in self.residuals.items() for lvl in r]
        if not bad:
            return None
        lvl, name = min(bad)
        return name, lvl


def residual_oracle(system: EvolutionSystem, param_values: Mapping[str, Expression],
                    solved: Mapping[tuple[str, int], Expression], N: int,
                    static_values: Callable[[str, int], Expression] | None = None,
                    ) -> OracleResult:
    """Substitute truncated series straight into the PDEs.

    ``solved`` maps (field, level) to the coefficient for levels 0..N
    (missing entries are taken as the bare symbol, i.e. arbitrary).
    Every phi power that the truncation determines is expanded; the
    result lists those whose coefficient does not vanish.
    """
    series: dict[str, LaurentSeries] = {}
    for f in system.fields:
        coeffs = {}
        for m in range(N + 1):
            if system.is_static(f.name) and static_values is not None:
                v = static_values(f.name, m)
            else:
                v = solved.get((f.name, m))
                if v is None:
                    v = Expression.symbol(coef_symbol(f.name, f.parity, m))
            coeffs[m - f.lead] = v
        series[f.name] = LaurentSeries(coeffs, N + 1 - f.lead)
    table = {param(k): v for k, v in param_values.items()}
    jets: dict[tuple[str, int], LaurentSeries] = {}

    def jet_series(name: str, k: int) -> LaurentSeries:
        key = (name, k)
        if key not in jets:
            jets[key] = series[name] if k == 0 else jet_series(name, k - 1).dx()
        return jets[key]

    residuals: dict[str, dict[int, Expression]] = {}
    window: dict[str, int] = {}
    for f in system.fields:
        eq = system.equations[f.name].substitute(table) if table else system.equations[f.name]
        total = None
        for (even, odd, ring), c in eq.items():
            coef = Expression._raw({(tuple((s, x) for s, x in even if s.dx is None), (), ring): c})
            factors = []
            for s, x in even:
                if s.dx is not None:
                    factors.extend([(s.name, s.dx)] * x)
            factors.extend((s.name, s.dx) for s in odd)
            prod = None
            for name, k in factors:
                js = jet_series(name, k)
                prod = js if prod is None else prod * js
            prod = LaurentSeries({0: coef}, 10 ** 9) if prod is None else prod.rmul(coef)
            total = prod if total is None else total + prod
        lhs = series[f.name].dt()
        res = lhs if total is None else total - lhs
        T = 0 if system.is_static(f.name) else system.dispersive_order(f.name)
        shift = f.lead + T
        residuals[f.name] = {p + shift: v for p, v in sorted(res.c.items())}
        window[f.name] = res.prec + shift
    return OracleResult(residuals, window)
