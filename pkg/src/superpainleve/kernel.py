"""Polynomial expressions over the Grassmann coefficient ring.

An :class:`Expression` is a finite sum of terms

    c * k^b * theta^mask * (even symbols) * (odd symbols)

with ``c`` rational, ``b`` in {0, 1}. Generators stand to the left of the
symbols; odd symbols are kept in canonical order with the reordering sign
absorbed into ``c``. Terms are stored in a flat dict keyed by
``(even, odd, ring)`` where ``ring = mask << 1 | b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .ring import (
    MPQ,
    QQ,
    GaussianRational,
    GrassmannScalar,
    NotInvertible,
    default_registry,
    mask_sign,
    popcount,
    to_rational,
)

__all__ = [
    "Symbol",
    "sym",
    "Expression",
    "ParityError",
    "NonLinearError",
    "NotScalarError",
    "LinearSystem",
    "Unique",
    "Resonance",
    "solve_level",
    "choose_pivots",
    "interpolate",
    "ZERO",
    "ONE",
]


class ParityError(ValueError):
    """A substitution or construction mixed even and odd objects."""


class NonLinearError(ValueError):
    """An expression was not linear in the requested unknowns."""


class NotScalarError(ValueError):
    """A matrix entry still depends on non-nilpotent symbols."""


# ---------------------------------------------------------------------------
# symbols


class Symbol:
    """Interned symbolic unknown.

    ``level`` is the series index (None for parameters, jets and f),
    ``dt`` the number of formal t-derivatives, ``dx`` the x-derivative order
    of a jet variable (None for non-jets).
    """

    __slots__ = ("name", "parity", "level", "dt", "dx", "constant", "chain", "key", "__weakref__")
    _table: dict = {}

    def __repr__(self) -> str:
        return f"Symbol({self})"

    def __str__(self) -> str:
        if self.dx is not None:
            return self.name if self.dx == 0 else f"d^{self.dx}({self.name})"
        if self.chain is not None:
            # j-th derivative of a function of x, evaluated on x = chain(t)
            base = self.name.rsplit(":", 1)[-1].upper()
            return f"{base}^({self.level})({self.chain})"
        s = self.name if self.level is None else f"{self.name}_{self.level}"
        return s + "'" * self.dt if self.dt <= 3 else f"{s}^({self.dt})"

    def __lt__(self, other: "Symbol") -> bool:
        return self.key < other.key

    @property
    def odd(self) -> bool:
        return self.parity == 1

    @property
    def base(self) -> "Symbol":
        """The underived symbol this one is a t-derivative of."""
        return self if self.dt == 0 else sym(self.name, self.parity, self.level, 0, self.dx,
                                              self.constant, self.chain)

    def derivative(self) -> "Expression":
        """Formal d/dt of this symbol as an expression."""
        if self.constant:
            return ZERO
        if self.chain is not None:
            # W^(j)(f(t)) -> W^(j+1)(f(t)) * f'
            nxt = sym(self.name, self.parity, self.level + 1, 0, None, False, self.chain)
            return Expression.symbol(nxt) * Expression.symbol(sym(self.chain, 0, None, 1))
        return Expression.symbol(sym(self.name, self.parity, self.level, self.dt + 1, self.dx))


def sym(name: str, parity: int = 0, level: int | None = None, dt: int = 0,
        dx: int | None = None, constant: bool = False, chain: str | None = None) -> Symbol:
    """Return the interned symbol with the given identity."""
    ident = (name, level, dt, dx)
    s = Symbol._table.get(ident)
    if s is not None:
        if s.parity != parity:
            raise ParityError(f"symbol {s} already registered with parity {s.parity}")
        return s
    s = object.__new__(Symbol)
    s.name = name
    s.parity = parity
    s.level = level
    s.dt = dt
    s.dx = dx
    s.constant = constant
    s.chain = chain
    s.key = (name, -10**6 if level is None else level, -1 if dx is None else dx, dt)
    Symbol._table[ident] = s
    return s


# ---------------------------------------------------------------------------
# monomial keys

_MUL_CACHE: dict = {}
_MUL_CACHE_LIMIT = 3_000_000


def _merge_even(e1, e2):
    if not e1:
        return e2
    if not e2:
        return e1
    out = []
    i = j = 0
    n1, n2 = len(e1), len(e2)
    while i < n1 and j < n2:
        s1, x1 = e1[i]
        s2, x2 = e2[j]
        if s1 is s2:
            out.append((s1, x1 + x2))
            i += 1
            j += 1
        elif s1.key < s2.key:
            out.append(e1[i])
            i += 1
        else:
            out.append(e2[j])
            j += 1
    if i < n1:
        out.extend(e1[i:])
    if j < n2:
        out.extend(e2[j:])
    return tuple(out)


def _merge_odd(o1, o2):
    """Return (merged, sign) for the product o1*o2; sign 0 if a symbol repeats."""
    if not o1:
        return o2, 1
    if not o2:
        return o1, 1
    swaps = 0
    for b in o2:
        bk = b.key
        for a in o1:
            if a is b:
                return None, 0
            if a.key > bk:
                swaps += 1
    merged = tuple(sorted(o1 + o2, key=_skey))
    return merged, (-1 if swaps & 1 else 1)


def _skey(s: Symbol):
    return s.key


def _mul_key(k1, k2):
    ck = (k1, k2)
    hit = _MUL_CACHE.get(ck)
    if hit is not None:
        return hit
    e1, o1, r1 = k1
    e2, o2, r2 = k2
    sign = 1
    if r1 or r2:
        m1, b1 = r1 >> 1, r1 & 1
        m2, b2 = r2 >> 1, r2 & 1
        if m2 and (len(o1) & 1) and (popcount(m2) & 1):
            sign = -sign
        if m1 and m2:
            s = mask_sign(m1, m2)
            if not s:
                _cache_put(ck, (None, 0))
                return None, 0
            sign *= s
        if b1 and b2:
            sign = -sign
        ring = ((m1 | m2) << 1) | (b1 ^ b2)
    else:
        ring = 0
    odd, s = _merge_odd(o1, o2)
    if not s:
        _cache_put(ck, (None, 0))
        return None, 0
    sign *= s
    res = ((_merge_even(e1, e2), odd, ring), sign)
    _cache_put(ck, res)
    return res


def _cache_put(k, v):
    if len(_MUL_CACHE) > _MUL_CACHE_LIMIT:
        _MUL_CACHE.clear()
    _MUL_CACHE[k] = v


_EMPTY = ((), (), 0)


def _key_parity(key) -> int:
    _, odd, ring = key
    return (len(odd) + popcount(ring >> 1)) & 1


# ---------------------------------------------------------------------------
# expressions


def _as_rational(v):
    return v if type(v) is MPQ else to_rational(v)


class Expression:
    """Normalized polynomial over Q(k) (x) Lambda in even and odd symbols."""

    __slots__ = ("_t", "_free", "__weakref__")

    def __init__(self, terms: Mapping | None = None):
        self._t = dict(terms) if terms else {}
        self._free = None

    @classmethod
    def _raw(cls, terms: dict) -> "Expression":
        e = cls.__new__(cls)
        e._t = terms
        e._free = None
        return e

    # -- constructors ----------------------------------------------------
    @classmethod
    def const(cls, value) -> "Expression":
        if isinstance(value, Expression):
            return value
        if isinstance(value, GrassmannScalar):
            return cls.from_scalar(value)
        if isinstance(value, GaussianRational) or isinstance(value, str):
            g = GaussianRational.coerce(value)
            t = {}
            if g.re:
                t[_EMPTY] = g.re
            if g.im:
                t[((), (), 1)] = g.im
            return cls._raw(t)
        q = _as_rational(value)
        return cls._raw({_EMPTY: q} if q else {})

    @classmethod
    def from_scalar(cls, value: GrassmannScalar) -> "Expression":
        if value.registry is not default_registry():
            raise ValueError("expressions use the default generator registry")
        t = {}
        for m, c in value.terms.items():
            if c.re:
                t[((), (), m << 1)] = c.re
            if c.im:
                t[((), (), (m << 1) | 1)] = c.im
        return cls._raw(t)

    @classmethod
    def symbol(cls, s: Symbol) -> "Expression":
        if s.parity:
            return cls._raw({((), (s,), 0): QQ(1)})
        return cls._raw({(((s, 1),), (), 0): QQ(1)})

    @classmethod
    def generator(cls, name: str) -> "Expression":
        i = default_registry().register(name)
        return cls._raw({((), (), (1 << i) << 1): QQ(1)})

    # -- inspection -------------------------------------------------------
    def __len__(self) -> int:
        return len(self._t)

    def items(self):
        return self._t.items()

    def is_zero(self) -> bool:
        return not self._t

    def __bool__(self) -> bool:
        return bool(self._t)

    def is_scalar(self) -> bool:
        """True if no symbol occurs (generators and k are allowed)."""
        return all(not e and not o for (e, o, _) in self._t)

    def scalar_value(self) -> GrassmannScalar:
        if not self.is_scalar():
            raise NotScalarError(f"not a scalar: {self}")
        terms: dict[int, GaussianRational] = {}
        for (_, _, ring), c in self._t.items():
            m = ring >> 1
            g = terms.get(m, GaussianRational(0))
            g = g + (GaussianRational(0, c) if ring & 1 else GaussianRational(c, 0))
            terms[m] = g
        return GrassmannScalar(terms, default_registry())

    def body(self) -> GaussianRational:
        """The part free of symbols and generators."""
        return GaussianRational(self._t.get(_EMPTY, QQ(0)), self._t.get(((), (), 1), QQ(0)))

    def soul(self) -> "Expression":
        return Expression._raw({k: c for k, c in self._t.items() if k != _EMPTY and k != ((), (), 1)})

    def is_nilpotent(self) -> bool:
        """Every term carries an odd symbol or an odd generator product."""
        return all(o or (r >> 1) for (_, o, r) in self._t)

    def parity(self) -> int | None:
        ps = {_key_parity(k) for k in self._t}
        if len(ps) > 1:
            return None
        return ps.pop() if ps else 0

    def free_symbols(self) -> frozenset:
        if self._free is None:
            out = set()
            for e, o, _ in self._t:
                for s, _x in e:
                    out.add(s)
                out.update(o)
            self._free = frozenset(out)
        return self._free

    def degree(self) -> int:
        return max((sum(x for _, x in e) + len(o) for e, o, _ in self._t), default=0)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Expression":
        if isinstance(other, Expression):
            return other
        return Expression.const(other)

    def __add__(self, other) -> "Expression":
        other = self._coerce(other)
        if not other._t:
            return self
        if not self._t:
            return other
        out = dict(self._t)
        for k, c in other._t.items():
            v = out.get(k)
            if v is None:
                out[k] = c
            else:
                v = v + c
                if v:
                    out[k] = v
                else:
                    del out[k]
        return Expression._raw(out)

    __radd__ = __add__

    def __neg__(self) -> "Expression":
        return Expression._raw({k: -c for k, c in self._t.items()})

    def __sub__(self, other) -> "Expression":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Expression":
        return self._coerce(other) - self

    def scale(self, q) -> "Expression":
        q = _as_rational(q)
        if not q:
            return ZERO
        if q == 1:
            return self
        return Expression._raw({k: c * q for k, c in self._t.items()})

    def __mul__(self, other) -> "Expression":
        if not isinstance(other, Expression):
            if isinstance(other, (int, MPQ)) or type(other).__name__ == "Fraction":
                return self.scale(other)
            other = Expression.const(other)
        a, b = self._t, other._t
        if not a or not b:
            return ZERO
        if len(b) == 1 and _EMPTY in b:
            return self.scale(b[_EMPTY])
        if len(a) == 1 and _EMPTY in a:
            return other.scale(a[_EMPTY])
        out: dict = {}
        get = out.get
        mk = _mul_key
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                k, s = mk(k1, k2)
                if not s:
                    continue
                v = c1 * c2
                if s < 0:
                    v = -v
                prev = get(k)
                out[k] = v if prev is None else prev + v
        return Expression._raw({k: c for k, c in out.items() if c})

    def __rmul__(self, other) -> "Expression":
        return Expression.const(other) * self

    def __pow__(self, e: int) -> "Expression":
        if e < 0:
            raise ValueError("negative powers are not polynomial")
        out = ONE
        base = self
        while e:
            if e & 1:
                out = out * base
            e >>= 1
            if e:
                base = base * base
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Expression):
            try:
                other = Expression.const(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self._t == other._t

    def __hash__(self) -> int:
        return hash(frozenset(self._t.items()))

    # -- calculus and substitution ---------------------------------------
    def substitute(self, bindings: Mapping[Symbol, "Expression"] | Callable[[Symbol], "Expression | None"],
                   check_parity: bool = True) -> "Expression":
        """Simultaneously replace symbols, then renormalize.

        ``bindings`` is a mapping or a callable returning None for symbols
        that stay put.
        """
        if isinstance(bindings, Mapping):
            if check_parity:
                for s, v in bindings.items():
                    v = v if isinstance(v, Expression) else Expression.const(v)
                    p = v.parity()
                    if v._t and p != s.parity:
                        raise ParityError(f"cannot bind {s} (parity {s.parity}) to {v}")
            table = {s: (v if isinstance(v, Expression) else Expression.const(v))
                     for s, v in bindings.items()}
            look = table.get
        else:
            look = bindings
        memo: dict = {}

        def val(s):
            if s in memo:
                return memo[s]
            v = look(s)
            memo[s] = v
            return v

        pow_memo: dict = {}
        out: dict = {}
        for key, c in self._t.items():
            even, odd, ring = key
            hit = False
            for s, _x in even:
                if val(s) is not None:
                    hit = True
                    break
            if not hit:
                for s in odd:
                    if val(s) is not None:
                        hit = True
                        break
            if not hit:
                prev = out.get(key)
                out[key] = c if prev is None else prev + c
                continue
            free_even = []
            prod = None
            for s, x in even:
                v = val(s)
                if v is None:
                    free_even.append((s, x))
                    continue
                pk = (s, x)
                p = pow_memo.get(pk)
                if p is None:
                    p = v ** x
                    pow_memo[pk] = p
                prod = p if prod is None else prod * p
            head = Expression._raw({(tuple(free_even), (), ring): c})
            prod = head if prod is None else head * prod
            for s in odd:
                v = val(s)
                prod = prod * (Expression.symbol(s) if v is None else v)
                if not prod._t:
                    break
            for k2, c2 in prod._t.items():
                prev = out.get(k2)
                out[k2] = c2 if prev is None else prev + c2
        return Expression._raw({k: c for k, c in out.items() if c})

    def derivation(self, rule: Callable[[Symbol], "Expression"]) -> "Expression":
        """Apply the even derivation that sends each symbol s to rule(s)."""
        out: dict = {}

        def acc(e: "Expression"):
            for k2, c2 in e._t.items():
                prev = out.get(k2)
                out[k2] = c2 if prev is None else prev + c2

        for (even, odd, ring), c in self._t.items():
            for i, (s, x) in enumerate(even):
                d = rule(s)
                if not d._t:
                    continue
                rest = even[:i] + ((s, x - 1),) + even[i + 1:] if x > 1 else even[:i] + even[i + 1:]
                acc(Expression._raw({(rest, odd, ring): c * x}) * d)
            for i, s in enumerate(odd):
                d = rule(s)
                if not d._t:
                    continue
                left = Expression._raw({(even, odd[:i], ring): c})
                right = Expression._raw({((), odd[i + 1:], 0): QQ(1)})
                acc(left * d * right)
        return Expression._raw({k: c for k, c in out.items() if c})

    def formal_dt(self) -> "Expression":
        """Formal d/dt: parameters are constant, every other symbol gains a prime."""
        return self.derivation(_dt_rule)

    def coefficient_of(self, s: Symbol) -> "Expression":
        """Right derivative: expr = (coefficient) * s + (terms free of s), for linear s.

        For even ``s`` this is the ordinary partial derivative.
        """
        out: dict = {}
        for (even, odd, ring), c in self._t.items():
            if s.parity:
                if s not in odd:
                    continue
                i = odd.index(s)
                sign = -1 if (len(odd) - 1 - i) & 1 else 1
                k = (even, odd[:i] + odd[i + 1:], ring)
                v = c if sign > 0 else -c
            else:
                for j, (t, x) in enumerate(even):
                    if t is s:
                        break
                else:
                    continue
                rest = even[:j] + ((s, x - 1),) + even[j + 1:] if x > 1 else even[:j] + even[j + 1:]
                k = (rest, odd, ring)
                v = c * x
            prev = out.get(k)
            out[k] = v if prev is None else prev + v
        return Expression._raw({k: c for k, c in out.items() if c})

    def split_linear(self, unknowns: Sequence[Symbol]) -> tuple[list["Expression"], "Expression"]:
        """Write expr = sum_k a_k * x_k + rest with rest free of the unknowns.

        Raises NonLinearError if some term holds two unknowns or a power.
        """
        uset = set(unknowns)
        parts: list[dict] = [{} for _ in unknowns]
        index = {u: i for i, u in enumerate(unknowns)}
        rest: dict = {}
        for (even, odd, ring), c in self._t.items():
            hits = [(j, t, x) for j, (t, x) in enumerate(even) if t in uset]
            ohits = [i for i, t in enumerate(odd) if t in uset]
            n = sum(x for _, _, x in hits) + len(ohits)
            if n == 0:
                rest[(even, odd, ring)] = c
                continue
            if n > 1:
                raise NonLinearError(f"term of degree {n} in the unknowns")
            if hits:
                j, t, _ = hits[0]
                k = (even[:j] + even[j + 1:], odd, ring)
                dest = parts[index[t]]
                v = c
            else:
                i = ohits[0]
                t = odd[i]
                sign = -1 if (len(odd) - 1 - i) & 1 else 1
                k = (even, odd[:i] + odd[i + 1:], ring)
                dest = parts[index[t]]
                v = c if sign > 0 else -c
            prev = dest.get(k)
            dest[k] = v if prev is None else prev + v
        coeffs = [Expression._raw({k: c for k, c in p.items() if c}) for p in parts]
        return coeffs, Expression._raw(rest)

    # -- text -------------------------------------------------------------
    def _term_text(self, key, c) -> str:
        even, odd, ring = key
        factors = []
        gens = default_registry().mask_names(ring >> 1)
        factors.extend(gens)
        for s, x in even:
            factors.append(str(s) if x == 1 else f"{s}^{x}")
        factors.extend(str(s) for s in odd)
        if ring & 1:
            factors.insert(0, "k")
        coeff = c
        if not factors:
            return str(coeff)
        body = "*".join(factors)
        if coeff == 1:
            return body
        if coeff == -1:
            return "-" + body
        return f"{coeff}*{body}"

    def sorted_terms(self):
        def order(item):
            (even, odd, ring), _c = item
            deg = sum(x for _, x in even) + len(odd)
            return (deg, [(s.key, x) for s, x in even], [s.key for s in odd], ring)
        return sorted(self._t.items(), key=order)

    def __str__(self) -> str:
        if not self._t:
            return "0"
        text = " + ".join(self._term_text(k, c) for k, c in self.sorted_terms())
        return text.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"Expression({self})"

    # -- serialization ----------------------------------------------------
    def to_json(self) -> list:
        rows = []
        for (even, odd, ring), c in self.sorted_terms():
            rows.append({
                "even": [[_sym_json(s), x] for s, x in even],
                "odd": [_sym_json(s) for s in odd],
                "ring": ring,
                "c": [int(c.numerator), int(c.denominator)],
            })
        return rows

    @classmethod
    def from_json(cls, rows) -> "Expression":
        out = ZERO
        for r in rows:
            term = Expression._raw({((), (), int(r["ring"])): QQ(r["c"][0], r["c"][1])})
            for sj, x in r["even"]:
                term = term * Expression.symbol(_sym_from_json(sj)) ** x
            for sj in r["odd"]:
                term = term * Expression.symbol(_sym_from_json(sj))
            out = out + term
        return out


def _sym_json(s: Symbol) -> list:
    return [s.name, s.parity, s.level, s.dt, s.dx, s.constant, s.chain]


def _sym_from_json(j) -> Symbol:
    name, parity, level, dt, dx, constant, chain = j
    return sym(name, parity, level, dt, dx, constant, chain)


_DT_CACHE: dict = {}


def _dt_rule(s: Symbol) -> Expression:
    d = _DT_CACHE.get(s)
    if d is None:
        d = s.derivative()
        _DT_CACHE[s] = d
    return d


ZERO = Expression._raw({})
ONE = Expression._raw({_EMPTY: QQ(1)})


def interpolate(points: Sequence[tuple[int, Expression]], var: Symbol) -> Expression:
    """Exact Lagrange interpolation of expression values in the even symbol ``var``."""
    X = Expression.symbol(var)
    out = ZERO
    xs = [p for p, _ in points]
    for i, (xi, yi) in enumerate(points):
        if not yi:
            continue
        basis = ONE
        denom = QQ(1)
        for j, xj in enumerate(xs):
            if j == i:
                continue
            basis = basis * (X - xj)
            denom *= (xi - xj)
        out = out + (basis * yi).scale(1 / denom)
    return out


# ---------------------------------------------------------------------------
# linear solving over the Grassmann ring


@dataclass
class LinearSystem:
    """Square system ``matrix * unknowns = rhs`` (1x1 or 2x2)."""

    unknowns: list[Symbol]
    matrix: list[list[Expression]]
    rhs: list[Expression]

    def __post_init__(self):
        n = len(self.unknowns)
        if n not in (1, 2) or len(self.matrix) != n or any(len(r) != n for r in self.matrix):
            raise ValueError("only 1x1 and 2x2 level systems are supported")

    def body_matrix(self) -> list[list[GaussianRational]]:
        out = []
        for row in self.matrix:
            brow = []
            for e in row:
                b = e.body()
                if not (e - Expression.const(b)).is_nilpotent():
                    raise NotScalarError(f"matrix entry {e} is not scalar")
                brow.append(b)
            out.append(brow)
        return out

    def residual(self, values: Sequence[Expression]) -> list[Expression]:
        return [self.rhs[i] - sum((self.matrix[i][j] * values[j] for j in range(len(values))), ZERO)
                for i in range(len(self.rhs))]


@dataclass
class Unique:
    solution: list[Expression]


@dataclass
class Resonance:
    """Singular level: ``free`` unknowns are arbitrary, ``solution`` gives
    the solved ones in terms of them, ``residual`` must vanish."""

    solution: dict[Symbol, Expression]
    free: list[Symbol]
    residual: list[Expression]
    cokernel: list[GaussianRational] = field(default_factory=list)


def choose_pivots(B: Sequence[Sequence[GaussianRational]], prefer_free: int | None = None):
    """Pivot cells and free columns for a 1x1 or 2x2 body matrix.

    Full rank: every unknown is solved. Rank one: the unknown with the
    largest body pivot is solved and the other is free; ties keep the
    earlier unknown free; ``prefer_free`` (a column index) overrides when
    admissible. Rank zero: all unknowns free. Returns (pivots, free).
    """
    n = len(B)
    if n == 1:
        return ([(0, 0)], []) if not B[0][0].is_zero() else ([], [0])
    if not _det2(B).is_zero():
        if not B[0][0].is_zero() and not B[1][1].is_zero():
            return [(0, 0), (1, 1)], []
        return [(0, 1), (1, 0)], []
    cells = [(i, j) for i in range(n) for j in range(n) if not B[i][j].is_zero()]
    if not cells:
        return [], list(range(n))
    if prefer_free is not None:
        allowed = [c for c in cells if c[1] != prefer_free]
        if not allowed:
            raise ValueError(f"unknown {prefer_free} cannot be left free at this resonance")
        cells = allowed
    best = max(B[i][j].norm() for i, j in cells)
    ties = [c for c in cells if B[c[0]][c[1]].norm() == best]
    i, j = max(ties, key=lambda c: (c[1], -c[0]))
    return [(i, j)], [1 - j]


def _det2(m):
    return m[0][0] * m[1][1] - m[0][1] * m[1][0]


def _nilpotent_fixpoint(step: Callable[[list[Expression]], list[Expression]],
                        start: list[Expression], limit: int = 200) -> list[Expression]:
    cur = start
    for _ in range(limit):
        nxt = step(cur)
        if all(a == b for a, b in zip(nxt, cur)):
            return nxt
        cur = nxt
    raise RuntimeError("soul iteration did not terminate")


def solve_level(system: LinearSystem, prefer_free: Symbol | None = None) -> Unique | Resonance:
    """Solve a level system over the Grassmann ring.

    The body matrix decides rank; soul parts of the matrix are moved to the
    right-hand side and iterated (finite by nilpotency). At a simple
    resonance the unknown with the largest body pivot is solved and the
    other stays free; ties keep the earlier unknown free. ``prefer_free``
    overrides the choice when admissible.
    """
    n = len(system.unknowns)
    B = system.body_matrix()
    S = [[system.matrix[i][j] - Expression.const(B[i][j]) for j in range(n)] for i in range(n)]
    g = system.rhs
    det = B[0][0] if n == 1 else _det2(B)

    if not det.is_zero():
        if n == 1:
            inv = [[det.inverse()]]
        else:
            di = det.inverse()
            inv = [[B[1][1] * di, -B[0][1] * di], [-B[1][0] * di, B[0][0] * di]]

        def step(x):
            r = [g[i] - sum((S[i][j] * x[j] for j in range(n)), ZERO) for i in range(n)]
            return [sum((Expression.const(inv[i][j]) * r[j] for j in range(n)), ZERO) for i in range(n)]

        return Unique(_nilpotent_fixpoint(step, [ZERO] * n))

    X = [Expression.symbol(u) for u in system.unknowns]
    if all(b.is_zero() for row in B for b in row):
        res = system.residual(X)
        return Resonance({}, list(system.unknowns), res, [])

    (i, j), = choose_pivots(B, None if prefer_free is None else system.unknowns.index(prefer_free))[0]
    jf = 1 - j
    other = 1 - i
    piv_inv = B[i][j].inverse()
    free = X[jf]

    def step(x):
        xj = x[0]
        r = g[i] - system.matrix[i][jf] * free - S[i][j] * xj
        return [Expression.const(piv_inv) * r]

    xj = _nilpotent_fixpoint(step, [ZERO])[0]
    values = [None, None]
    values[j] = xj
    values[jf] = free
    residual = system.rhs[other] - system.matrix[other][0] * values[0] - system.matrix[other][1] * values[1]
    cok = [GaussianRational(0), GaussianRational(0)]
    cok[i] = -B[other][j]
    cok[other] = B[i][j]
    return Resonance({system.unknowns[j]: xj}, [system.unknowns[jf]], [residual], cok)
