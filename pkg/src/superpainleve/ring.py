"""Exact coefficient ring: rationals, the unit ``k`` (k*k = -1) and a
finitely generated Grassmann algebra on top of them.

Rationals are ``gmpy2.mpq`` values. They hash and compare like
``fractions.Fraction``, so either may be passed in.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import gmpy2

QQ = gmpy2.mpq
MPQ = type(QQ(0))

MAX_GENERATORS = 64

__all__ = [
    "QQ",
    "MAX_GENERATORS",
    "GaussianRational",
    "GeneratorRegistry",
    "GrassmannScalar",
    "NotInvertible",
    "RegistryMismatch",
    "K",
    "to_rational",
    "mask_sign",
    "popcount",
    "default_registry",
]


class NotInvertible(ArithmeticError):
    """Raised when inverting an element whose body vanishes."""


class RegistryMismatch(ValueError):
    """Operands were built on different generator registries."""


def to_rational(value) -> "gmpy2.mpq":
    """Coerce int, Fraction, mpq or a ``"p/q"`` string to an exact rational."""
    if isinstance(value, str):
        return QQ(Fraction(value.strip()))
    if isinstance(value, float):
        raise TypeError("floating-point coefficients are not allowed")
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    return QQ(value)


def popcount(x: int) -> int:
    return bin(x).count("1")


def mask_sign(a: int, b: int) -> int:
    """Sign of theta^a * theta^b relative to theta^(a|b); 0 if they overlap.

    Both masks denote products of generators in ascending order.
    """
    if a & b:
        return 0
    if not a or not b:
        return 1
    swaps = 0
    rest = b
    while rest:
        low = rest & -rest
        j = low.bit_length() - 1
        swaps += popcount(a >> (j + 1))
        rest ^= low
    return -1 if swaps & 1 else 1


class GaussianRational:
    """An element re + im*k of Q(k), k*k = -1."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is MPQ else to_rational(re)
        self.im = im if type(im) is MPQ else to_rational(im)

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        return cls(value, 0)

    @classmethod
    def parse(cls, text: str) -> "GaussianRational":
        """Parse ``"3/2"``, ``"-k"``, ``"1/2*k"``, ``"1-2/3k"`` and similar."""
        s = text.replace(" ", "").replace("*", "")
        if not s:
            raise ValueError("empty number")
        re = QQ(0)
        im = QQ(0)
        pieces = []
        start = 0
        for i in range(1, len(s)):
            if s[i] in "+-" and s[i - 1] not in "/":
                pieces.append(s[start:i])
                start = i
        pieces.append(s[start:])
        for p in pieces:
            if p.endswith("k"):
                body = p[:-1]
                if body in ("", "+"):
                    im += 1
                elif body == "-":
                    im -= 1
                else:
                    im += to_rational(body)
            else:
                re += to_rational(p)
        return cls(re, im)

    def is_zero(self) -> bool:
        return not self.re and not self.im

    def is_real(self) -> bool:
        return not self.im

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GaussianRational):
            try:
                other = GaussianRational.coerce(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self) -> int:
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __add__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other):
        if isinstance(other, GrassmannScalar):
            return NotImplemented
        other = GaussianRational.coerce(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        return GaussianRational(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def norm(self):
        """re^2 + im^2 (the squared modulus, a rational)."""
        return self.re * self.re + self.im * self.im

    def inverse(self) -> "GaussianRational":
        n = self.norm()
        if not n:
            raise NotInvertible("division by zero in Q(k)")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * GaussianRational.coerce(other).inverse()

    def __rtruediv__(self, other):
        return GaussianRational.coerce(other) * self.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        out = GaussianRational(1)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __repr__(self) -> str:
        return f"GaussianRational({self})"

    def __str__(self) -> str:
        if not self.im:
            return _fmt(self.re)
        if not self.re:
            return _fmt_k(self.im)
        im = _fmt_k(self.im)
        sep = "" if im.startswith("-") else "+"
        return f"{_fmt(self.re)}{sep}{im}"


def _fmt(q) -> str:
    return str(q)


def _fmt_k(q) -> str:
    if q == 1:
        return "k"
    if q == -1:
        return "-k"
    return f"{q}*k"


K = GaussianRational(0, 1)


class GeneratorRegistry:
    """Ordered names of the odd constant generators of one session.

    Canonical generator order is registration order.
    """

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for n in names:
            self.register(n)

    def register(self, name: str) -> int:
        if name in self._index:
            return self._index[name]
        if len(self._names) >= MAX_GENERATORS:
            raise ValueError(f"generator cap {MAX_GENERATORS} exceeded")
        self._index[name] = len(self._names)
        self._names.append(name)
        return self._index[name]

    def index(self, name: str) -> int:
        return self._index[name]

    def name(self, i: int) -> str:
        return self._names[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def generator(self, name: str) -> "GrassmannScalar":
        i = self.register(name)
        return GrassmannScalar({1 << i: GaussianRational(1)}, self)

    def mask_names(self, mask: int) -> list[str]:
        return [self._names[i] for i in range(mask.bit_length()) if mask >> i & 1]


_DEFAULT_REGISTRY = GeneratorRegistry()


def default_registry() -> GeneratorRegistry:
    """The registry shared by every Expression of this process."""
    return _DEFAULT_REGISTRY


class GrassmannScalar:
    """Element of Q(k) (x) Lambda(theta_1..theta_M).

    ``terms`` maps a bitmask (generator subset, ascending order) to a
    nonzero GaussianRational.
    """

    __slots__ = ("terms", "registry")

    def __init__(self, terms: Mapping[int, GaussianRational] | None = None,
                 registry: GeneratorRegistry | None = None):
        self.registry = registry if registry is not None else _DEFAULT_REGISTRY
        self.terms = {m: c for m, c in (terms or {}).items() if not c.is_zero()}

    @classmethod
    def scalar(cls, value, registry: GeneratorRegistry | None = None) -> "GrassmannScalar":
        return cls({0: GaussianRational.coerce(value)}, registry)

    def _coerce(self, other) -> "GrassmannScalar":
        if isinstance(other, GrassmannScalar):
            if other.registry is not self.registry:
                if not other.terms.keys() - {0} and not self.terms.keys() - {0}:
                    return GrassmannScalar(other.terms, self.registry)
                raise RegistryMismatch("operands use different generator registries")
            return other
        return GrassmannScalar.scalar(other, self.registry)

    # -- structure -------------------------------------------------------
    def body(self) -> GaussianRational:
        return self.terms.get(0, GaussianRational(0))

    def soul(self) -> "GrassmannScalar":
        return GrassmannScalar({m: c for m, c in self.terms.items() if m}, self.registry)

    def is_zero(self) -> bool:
        return not self.terms

    def parity(self) -> int | None:
        """0 or 1 for homogeneous elements, None for mixed ones (zero is even)."""
        ps = {popcount(m) & 1 for m in self.terms}
        if len(ps) > 1:
            return None
        return ps.pop() if ps else 0

    def items(self) -> Iterator[tuple[int, GaussianRational]]:
        return iter(sorted(self.terms.items()))

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m)
            out[m] = c if s is None else s + c
        return GrassmannScalar(out, self.registry)

    __radd__ = __add__

    def __neg__(self):
        return GrassmannScalar({m: -c for m, c in self.terms.items()}, self.registry)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out: dict[int, GaussianRational] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                s = mask_sign(m1, m2)
                if not s:
                    continue
                c = c1 * c2
                if s < 0:
                    c = -c
                m = m1 | m2
                prev = out.get(m)
                out[m] = c if prev is None else prev + c
        return GrassmannScalar(out, self.registry)

    def __rmul__(self, other):
        return self._coerce(other) * self

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        out = GrassmannScalar.scalar(1, self.registry)
        for _ in range(e):
            out = out * self
        return out

    def inverse(self) -> "GrassmannScalar":
        b = self.body()
        if b.is_zero():
            raise NotInvertible("element has zero body")
        binv = GrassmannScalar.scalar(b.inverse(), self.registry)
        step = -(self.soul() * binv)
        total = GrassmannScalar.scalar(1, self.registry)
        power = total
        while True:
            power = power * step
            if power.is_zero():
                break
            total = total + power
        return binv * total

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrassmannScalar):
            try:
                other = GrassmannScalar.scalar(other, self.registry)
            except (TypeError, ValueError):
                return NotImplemented
        return self.terms == other.terms

    def __hash__(self) -> int:
        return hash(frozenset(self.terms.items()))

    # -- text / serialization -------------------------------------------
    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.items():
            gens = "*".join(self.registry.mask_names(m))
            if not m:
                parts.append(str(c))
            elif c == 1:
                parts.append(gens)
            elif c == -1:
                parts.append("-" + gens)
            elif c.re and c.im:
                parts.append(f"({c})*{gens}")
            else:
                parts.append(f"{c}*{gens}")
        text = " + ".join(parts)
        return text.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"GrassmannScalar({self})"

    def to_triples(self) -> list[list]:
        """Serialize as ``[mask, re_num, re_den, im_num, im_den]`` rows."""
        rows = []
        for m, c in self.items():
            rows.append([m, int(c.re.numerator), int(c.re.denominator),
                         int(c.im.numerator), int(c.im.denominator)])
        return rows

    @classmethod
    def from_triples(cls, rows, registry: GeneratorRegistry | None = None) -> "GrassmannScalar":
        terms = {}
        for m, rn, rd, inum, iden in rows:
            terms[int(m)] = GaussianRational(QQ(rn, rd), QQ(inum, iden))
        return cls(terms, registry)
