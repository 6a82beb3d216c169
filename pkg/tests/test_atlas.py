import pytest

from superpainleve import atlas
from superpainleve.engine import ResonancePolynomial
from superpainleve.system import UsageError


def test_labels_unique_and_seeded():
    labels = [e.label for e in atlas.atlas_entries()]
    assert len(labels) == len(set(labels))
    assert {"I", "II", "III", "IV", "V", "osp22", "c3.iii", "c0.vi"} <= set(labels)


def test_c3_rows_enumerated():
    labels = {e.label for e in atlas.enumerate_c3_branches()}
    for lbl in ("c3.vii.a", "c3.vii.f", "c3.ix.a", "c3.ix.e", "c3.viii.a", "c3.viii.b"):
        assert lbl in labels


def test_c0_rows_enumerated():
    labels = {e.label for e in atlas.enumerate_c0_branches()}
    assert {"c0.ii.a", "c0.ii.b", "c0.vii", "c0.viii.a", "c0.x"} <= labels


@pytest.mark.parametrize("case", list(atlas.VIETA_SCANS))
def test_scan_routes_agree(case):
    # the second route reduces the same Diophantine condition independently
    assert atlas.scan_case(case).routes_agree


def test_unknown_printed_pair():
    with pytest.raises(UsageError):
        atlas.fermionic_B_polynomials("I", 7)
    with pytest.raises(UsageError):
        atlas.fermionic_B_polynomials("IX", 2)


@pytest.mark.parametrize("case", ["I", "II", "III", "IV", "V"])
def test_B_depends_on_n_minus_r(case):
    # every shift of the r = 2 polynomial is the generated one
    base = atlas.engine_B_polynomial(case, 2)
    for c, r in atlas.fermionic_cases():
        if c != case:
            continue
        shifted = atlas.engine_B_polynomial(case, r)
        assert sorted(shifted.roots) == sorted(x + r - 2 for x in base.roots)


def test_condition_solver():
    e = atlas.entry("c3.iii")
    v, obs = atlas.run_entry(e)
    assert obs["condition"] == "beta=-6"


def test_perturbation_is_localized():
    r = atlas.check_entry(atlas.entry("II"), {"alpha": "1001/1000"})
    assert r.outcome == "mismatch"


def test_unknown_label():
    with pytest.raises(UsageError):
        atlas.entry("no-such-entry")


def test_report_json(report):
    data = report.to_json()
    assert data["ok"] is True
    assert not data["mismatches"]
    assert len(data["deviations"]) == len(report.deviations)


def test_ix_subcase_is_recorded():
    assert "u1 arbitrary" in atlas.entry("c3.ix.c").source


def test_core_determinant_degree(report):
    # every super-KdV bosonic core has a degree-6 A(n); the static w of osp(2,2) leaves degree 3
    for r in report.entries:
        e = atlas.entry(r.label)
        if r.verdict is None or not r.verdict["bosonic"]:
            continue
        deg = ResonancePolynomial.from_json(r.verdict["bosonic"]).degree
        assert deg == (3 if e.system == "osp22" else 6), r.label
