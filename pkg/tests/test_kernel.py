import pytest

from superpainleve.kernel import (Expression, LinearSystem, ParityError, Resonance, Unique,
                                  solve_level, sym)
from superpainleve.ring import GaussianRational


def E(s):
    return Expression.symbol(s)


x, y = sym("kx", 0, 1), sym("ky", 0, 1)
p, q = sym("kp", 1, 1), sym("kq", 1, 1)


def test_interning_and_parity_clash():
    assert sym("kx", 0, 1) is x
    with pytest.raises(ParityError):
        sym("kx", 1, 1)


def test_odd_symbols_square_to_zero():
    assert (E(p) * E(p)).is_zero()
    assert E(p) * E(q) == -(E(q) * E(p))


def test_k_squared():
    k = Expression.const("k")
    assert k * k == Expression.const(-1)


def test_parity_and_mixed():
    assert (E(p) * E(x)).parity() == 1
    assert (E(p) + E(x)).parity() is None


def test_substitute_checks_parity():
    with pytest.raises(ParityError):
        E(x).substitute({x: E(p)})
    assert E(x).substitute({x: E(p)}, check_parity=False) == E(p)


def test_coefficient_of_odd_is_right_derivative():
    e = E(p) * E(q)
    assert e.coefficient_of(q) == E(p)
    assert e.coefficient_of(p) == -E(q)


def test_formal_dt_primes_symbols_not_params():
    a = sym("kalpha", 0, None, constant=True)
    e = E(a) * E(x) * E(x)
    assert e.formal_dt() == E(a) * E(x) * E(sym("kx", 0, 1, dt=1)) * 2


def test_solve_unique():
    # 2x + y = 3, x - y = 0
    sysm = LinearSystem([x, y], [[Expression.const(2), Expression.const(1)],
                                 [Expression.const(1), Expression.const(-1)]],
                        [Expression.const(3), Expression.const(0)])
    out = solve_level(sysm)
    assert isinstance(out, Unique)
    assert out.solution == [Expression.const(1), Expression.const(1)]


def test_solve_rank_deficient_reports_resonance():
    one = Expression.const(1)
    sysm = LinearSystem([x, y], [[one, one], [one, one]], [one, Expression.const(2)])
    out = solve_level(sysm)
    assert isinstance(out, Resonance)
    assert len(out.free) == 1
    assert any(r for r in out.residual)


def test_json_round_trip_with_generators():
    t = Expression.generator("ktheta")
    e = (E(x) * t + Expression.const(GaussianRational(1, 2))) * E(p)
    assert Expression.from_json(e.to_json()) == e
