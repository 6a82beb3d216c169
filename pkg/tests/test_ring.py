import gmpy2
import pytest

from superpainleve.ring import (MAX_GENERATORS, GaussianRational, GeneratorRegistry, GrassmannScalar,
                                NotInvertible, RegistryMismatch, to_rational)


def test_parse_forms():
    assert GaussianRational.parse("1/2k") == GaussianRational(0, gmpy2.mpq(1, 2))
    assert GaussianRational.parse("-3") == GaussianRational(-3)
    assert GaussianRational.parse("k") * GaussianRational.parse("k") == GaussianRational(-1)


def test_to_rational_rejects_floats():
    with pytest.raises(TypeError):
        to_rational(0.5)
    assert to_rational("3/4") == gmpy2.mpq(3, 4)


def test_zero_not_invertible():
    with pytest.raises(NotInvertible):
        GaussianRational(0).inverse()


def test_odd_generators_anticommute():
    reg = GeneratorRegistry(["a", "b"])
    a, b = reg.generator("a"), reg.generator("b")
    assert a * b == -(b * a)
    assert (a * a).is_zero()
    assert (a * b).parity() == 0 and a.parity() == 1
    assert (a + a * b).parity() is None


def test_nilpotent_not_invertible():
    reg = GeneratorRegistry(["a"])
    with pytest.raises(NotInvertible):
        reg.generator("a").inverse()


def test_registries_do_not_mix():
    r1, r2 = GeneratorRegistry(["a"]), GeneratorRegistry(["a"])
    with pytest.raises(RegistryMismatch):
        r1.generator("a") * r2.generator("a")


def test_generator_cap():
    reg = GeneratorRegistry(f"g{i}" for i in range(MAX_GENERATORS))
    with pytest.raises(ValueError):
        reg.register("one-too-many")


def test_triples_round_trip():
    reg = GeneratorRegistry(["a", "b", "c"])
    x = reg.generator("a") * reg.generator("c") * GaussianRational(2, 3) + 5
    assert GrassmannScalar.from_triples(x.to_triples(), reg) == x
