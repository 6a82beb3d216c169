import pytest

from superpainleve import atlas
from superpainleve.engine import (STATUSES, ResonancePolynomial, TestVerdict, exit_code, movable_log_guard,
                                  run_branch)


@pytest.fixture(scope="module")
def case_II():
    return atlas.run_entry(atlas.entry("II"))[0]


def test_json_round_trip(case_II):
    again = TestVerdict.from_json(case_II.to_json())
    assert again == case_II
    assert again.to_json() == case_II.to_json()


def test_failure_round_trip():
    v, _ = atlas.run_entry(atlas.entry("V"))
    again = TestVerdict.from_json(v.to_json())
    assert again.failure["residual"] == v.failure["residual"]


def test_deeper_run_is_stable(case_II):
    e = atlas.entry("II")
    deeper = run_branch(atlas.bundled_system("skdv"), e.seed, max_level=case_II.max_level_solved + 2)
    assert deeper.status == case_II.status
    assert deeper.ledger_text() == case_II.ledger_text()


@pytest.mark.parametrize("label", ["I", "II", "III", "IV", "osp22"])
def test_one_function_per_resonance(label):
    v, _ = atlas.run_entry(atlas.entry(label))
    assert len(v.arbitrary) + len(v.pinned) == len(v.bosonic_roots) + len(v.fermionic_roots)


def test_exit_codes():
    assert {s: exit_code(s) for s in STATUSES} == {
        "PrincipalPass": 0, "FailNonIntegerLead": 1, "FailNonIntegerResonance": 1,
        "FailCompatibility": 1, "Degenerate": 1, "NonPrincipal": 2, "Inconclusive": 4}


def test_log_guard():
    assert movable_log_guard([-1, 0, 3], (0,))
    assert movable_log_guard([-1, 1, 3], (0, 1))
    assert not movable_log_guard([-1, 2, 3], (0, 1))


def test_root_at_zero_flags_log():
    # case (v) of the c=0 core has a resonance at n=0, where u0 is already fixed
    obs = atlas.check_entry(atlas.entry("c0.viii.c")).observed
    assert obs["log_flag"] and obs["status"] == "FailCompatibility"


def test_polynomial_roots():
    p = ResonancePolynomial.from_roots([-1, 2, 2, 6])
    assert p.roots == (-1, 2, 2, 6)
    assert p.integer_rooted
    q = ResonancePolynomial.from_coefficients([1, 0, -2])   # n^2 - 2 or -2n^2 + 1
    assert not q.integer_rooted


def test_nonprincipal_is_analyzed():
    v, obs = atlas.run_entry(atlas.entry("c3.ii[j1=4]"))
    assert v.status == "NonPrincipal"
    assert "analysis" in v.failure and obs["level"] == 6
