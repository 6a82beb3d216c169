import pytest

from superpainleve import atlas
from superpainleve.engine import oracle_check
from superpainleve.kernel import Expression
from superpainleve.system import BranchSeed, SeriesModel, UsageError, build_skdv, coef_symbol, residual_oracle


def test_field_lookup():
    s = build_skdv(3, 1, 3)
    assert "xi1" in s and "v" not in s
    assert [f.name for f in s.bosonic] == ["u", "w"]
    assert [f.name for f in s.fermionic] == ["xi1", "xi2"]
    assert s.field("xi2").parity == 1


def test_bosonic_core_drops_odd_fields():
    core = build_skdv(3, 1, 3).bosonic_core()
    assert not core.fermionic
    for f in core.bosonic:
        assert all(not odd for (_, odd, _), _ in core.equations[f.name].items())


def test_level_zero_relation_at_case_II():
    core = build_skdv(3, 1, 3).bosonic_core()
    m = SeriesModel(core)
    vals = {coef_symbol("u", 0, 0): Expression.const(1), coef_symbol("w", 0, 0): Expression.const("k")}
    for name in ("u", "w"):
        assert not m.relation(name, 0).substitute(vals)


def test_leading_value_must_be_even():
    with pytest.raises(UsageError):
        BranchSeed("bad", leading={"u": Expression.generator("theta1")})


def test_oracle_detects_corruption():
    e = atlas.entry("II")
    v, _ = atlas.run_entry(e)
    system = atlas.bundled_system("skdv")
    assert oracle_check(system, v).is_zero()
    values = dict(v.values)
    values[("u", 2)] = values[("u", 2)] + 1
    res = residual_oracle(system.with_fermion_lead(e.seed.r), e.seed.params, values, v.max_level_solved)
    assert not res.is_zero()
    assert res.first_failure()[1] <= 4
