"""Randomized algebra laws for the coefficient ring and the expression kernel.

Every example that runs is counted; the last test checks the volume.
"""

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superpainleve.kernel import Expression, sym
from superpainleve.ring import GaussianRational, GrassmannScalar, GeneratorRegistry

EXAMPLES = 1100
RUN = Counter()

pytestmark = pytest.mark.criterion(8)

rationals = st.fractions(min_value=-40, max_value=40, max_denominator=8)
gaussians = st.builds(GaussianRational, rationals, rationals)
nonzero_gaussians = gaussians.filter(lambda g: not g.is_zero())

REG = GeneratorRegistry(["t1", "t2", "t3", "t4", "t5"])
masks = st.integers(min_value=0, max_value=31)
grassmann = st.dictionaries(masks, gaussians, max_size=5).map(lambda d: GrassmannScalar(d, REG))


@st.composite
def homogeneous_grassmann(draw):
    parity = draw(st.integers(0, 1))
    ms = [m for m in range(32) if bin(m).count("1") % 2 == parity]
    d = draw(st.dictionaries(st.sampled_from(ms), gaussians, max_size=4))
    return GrassmannScalar(d, REG)


# atoms of both parities: fields at two levels, a parameter and a constant generator
ATOMS = [
    Expression.symbol(sym("pu", 0, 0)),
    Expression.symbol(sym("pu", 0, 1)),
    Expression.symbol(sym("palpha", 0, None, constant=True)),
    Expression.symbol(sym("pxi", 1, 0)),
    Expression.symbol(sym("pxi", 1, 2)),
    Expression.generator("ptheta"),
    Expression.generator("pzeta"),
]
atoms = st.sampled_from(ATOMS)


@st.composite
def monomials(draw):
    out = Expression.const(draw(gaussians))
    for a in draw(st.lists(atoms, max_size=3)):
        out = out * a
    return out


expressions = st.lists(monomials(), max_size=4).map(lambda ms: sum(ms, Expression.const(0)))


def _tick(name):
    RUN[name] += 1


@settings(max_examples=EXAMPLES)
@given(gaussians, gaussians, gaussians)
def test_gaussian_field_laws(a, b, c):
    _tick("gaussian")
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


@settings(max_examples=EXAMPLES)
@given(nonzero_gaussians)
def test_gaussian_inverse(a):
    _tick("gaussian-inverse")
    assert a * a.inverse() == GaussianRational(1)


@settings(max_examples=EXAMPLES)
@given(grassmann, grassmann, grassmann)
def test_grassmann_ring_laws(a, b, c):
    _tick("grassmann")
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) * c == a * c + b * c


@settings(max_examples=EXAMPLES)
@given(homogeneous_grassmann(), homogeneous_grassmann())
def test_grassmann_supercommutative(a, b):
    _tick("supercommute")
    sign = -1 if a.parity() == 1 and b.parity() == 1 else 1
    assert a * b == (b * a) * sign
    if a.parity() == 1:
        assert (a * a).is_zero()


@settings(max_examples=EXAMPLES)
@given(grassmann, nonzero_gaussians)
def test_grassmann_inverse(soul, body):
    a = soul.soul() + GrassmannScalar.scalar(body, REG)
    _tick("grassmann-inverse")
    one = GrassmannScalar.scalar(1, REG)
    assert a * a.inverse() == one
    assert a.inverse() * a == one


@settings(max_examples=EXAMPLES)
@given(expressions, expressions, expressions)
def test_expression_ring_laws(a, b, c):
    _tick("expression")
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert (a + b) - b == a


@settings(max_examples=EXAMPLES)
@given(monomials(), monomials())
def test_expression_supercommutative(a, b):
    _tick("expression-supercommute")
    pa, pb = a.parity(), b.parity()
    sign = -1 if pa == 1 and pb == 1 else 1
    assert a * b == (b * a).scale(sign)


@settings(max_examples=EXAMPLES)
@given(expressions, expressions)
def test_leibniz(a, b):
    _tick("leibniz")
    assert (a * b).formal_dt() == a.formal_dt() * b + a * b.formal_dt()


@settings(max_examples=EXAMPLES)
@given(expressions)
def test_normal_form_round_trip(a):
    _tick("normal-form")
    assert Expression.from_json(a.to_json()) == a
    assert (a - a).is_zero()
    assert a.body() + a.soul().body() == a.body()


@settings(max_examples=EXAMPLES)
@given(expressions, expressions, monomials().filter(lambda m: m.parity() == 0))
def test_substitution_is_a_homomorphism(a, b, value):
    _tick("substitute")
    s = {sym("pu", 0, 0): value}
    assert (a * b).substitute(s) == a.substitute(s) * b.substitute(s)
    assert (a + b).substitute(s) == a.substitute(s) + b.substitute(s)


def test_volume():
    # runs after the property tests above in file order
    assert sum(RUN.values()) >= 10_000, dict(RUN)
