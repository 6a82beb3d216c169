"""The eight acceptance criteria, exact.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion. Checks that contradict a printed value we
could not reproduce are strict xfails, so they count as FAIL in the summary
while the suite stays green.
"""

import pytest
import sympy
from superpainleve import atlas
from superpainleve.atlas import bundled_system, entry, run_entry, to_sympy
from superpainleve.engine import oracle_check
from superpainleve.kernel import Expression
from superpainleve.system import SeriesModel, coef_symbol

n, u0, w0, a, b, c = sympy.symbols("n u0 w0 alpha beta c")

CLOSED = {
    3: [[(-(n - 2) * (n - 3) + 6 * u0 + b * w0**2) * (n - 4),
         (-(a + 2) * n**2 + (5 * a + 4) * n - 6 * (a + 1) + 2 * b * u0) * (n - 4) * w0],
        [(a + 2) * (n - 3) * w0,
         (-(n - 1) * (n - 2) + (a + 2) * u0 + b * w0**2) * (n - 3)]],
    0: [[(-(n - 2) * (n - 3) + 6 * u0 + b * w0**2) * (n - 4),
         (-(a - 1) * n * (n + 1) + 6 * a * (n - 1) + 2 * b * u0) * (n - 4) * w0],
        [((a - 1) * (n - 3) - 6) * w0,
         -(n - 1) * (n - 2) * (n - 3) + (a - 1) * (n - 3) * u0 + 6 * (n - 1) * u0 + b * (n - 3) * w0**2]],
}

# the bosonic-core passes as listed with their leading values
STATED = {
    "I": (3, -2, -6, "-1", "k"),
    "II": (3, 1, 3, "1", "k"),
    "III": (3, 4, 12, "1/2", "1/2k"),
    "IV": (0, 1, 0, "1", "k"),
    "V": (3, -2, -6, "2", "0"),
}

DEVIATION = pytest.mark.xfail(strict=True, reason="documented deviation, see the decisions ledger")


# ---------------------------------------------------------------------------
# 1. matrix fidelity


@pytest.mark.criterion(1)
@pytest.mark.parametrize("cval", [3, 0])
def test_bosonic_matrix_closed_form(cval):
    core = bundled_system("skdv").substitute_params({"c": cval}).bosonic_core()
    M = SeriesModel(core).symbolic_matrix(["u", "w"], ["u", "w"])
    for i in range(2):
        for j in range(2):
            got = to_sympy(M[i][j])
            for lvl in range(11):
                assert sympy.expand(got.subs(n, lvl) - CLOSED[cval][i][j].subs(n, lvl)) == 0


@pytest.mark.criterion(1)
@pytest.mark.parametrize("cval", [3, 0])
def test_bosonic_matrix_from_level_relations(cval):
    # second route: coefficient of u_n, w_n in the generated level-n relation
    core = bundled_system("skdv").substitute_params({"c": cval}).bosonic_core()
    model = SeriesModel(core)
    for lvl in range(1, 11):
        cols = [coef_symbol("u", 0, lvl), coef_symbol("w", 0, lvl)]
        for i, row in enumerate(("u", "w")):
            rel = model.relation(row, lvl)
            for j, col in enumerate(cols):
                got = to_sympy(rel.coefficient_of(col))
                assert sympy.expand(got - CLOSED[cval][i][j].subs(n, lvl)) == 0, (lvl, row, j)


@pytest.mark.criterion(1)
@pytest.mark.parametrize("r", range(-5, 4))
def test_fermionic_matrix_closed_form(r):
    system = bundled_system("skdv").with_fermion_lead(r)
    names = [f.name for f in system.fermionic]
    M = SeriesModel(system).symbolic_matrix(names, names)
    d = n - r
    b11 = -d * (d - 1) * (d - 2) - 2 * c * u0 + (6 - c) * d * u0 + b * (d - 2) * w0**2
    b21 = (c * d * (d - 1) - (6 - c) * d + (a - 1) * (d - 1) * (d - 2)) * w0
    want = [[b11, -b21], [b21, b11]]
    for i in range(2):
        for j in range(2):
            assert sympy.expand(to_sympy(M[i][j]) - want[i][j]) == 0


# ---------------------------------------------------------------------------
# 2. resonance polynomials


@pytest.mark.criterion(2)
def test_bosonic_polynomials_printed(report):
    checks = [p for p in report.polynomials if p.kind == "A"]
    assert len(checks) == 20
    assert all(p.equal for p in checks), [p.label for p in checks if not p.equal]
    assert all(p.claim_holds is not False for p in checks)


_B_PAIRS = atlas.fermionic_cases()
_B_DEVIANT = set(atlas._toml("resonances.toml")["fermionic_deviation"]["pairs"])


@pytest.mark.criterion(2)
@pytest.mark.parametrize("case,r", [pytest.param(cs, r, marks=DEVIATION) if f"{cs}:{r}" in _B_DEVIANT
                                    else (cs, r) for cs, r in _B_PAIRS])
def test_fermionic_polynomial_printed(case, r):
    printed = atlas.fermionic_B_polynomials(case, r)
    assert atlas.engine_B_polynomial(case, r).monic().coeffs == printed.monic().coeffs


def test_fermionic_pair_count():
    assert len(_B_PAIRS) == 22


# ---------------------------------------------------------------------------
# 3. classification


@pytest.mark.criterion(3)
def test_core_passes_are_I_to_V(report):
    assert report.core_passes() == ["I", "II", "III", "IV", "V"]
    for r in report.entries:
        e = entry(r.label)
        if not (e.bosonic_core and r.observed["status"] == "PrincipalPass"):
            continue
        cval, alpha, beta, u, w = STATED[e.family]
        vals = {k: v.body() for k, v in e.seed.params.items()}
        assert (vals["c"], vals["alpha"], vals["beta"]) == tuple(atlas.number(x) for x in (cval, alpha, beta))
        assert e.seed.leading["u"] == Expression.const(atlas.number(u))
        assert e.seed.leading["w"] in (Expression.const(atlas.number(w)), -Expression.const(atlas.number(w)))


@pytest.mark.criterion(3)
def test_non_principal_families(report):
    rows = {row["case"]: row["entries"] for row in report.classification()}
    for fam in atlas.CLASSIFICATION[5:]:
        assert rows[fam], fam
        assert set(rows[fam].values()) == {"NonPrincipal"}, fam


@pytest.mark.criterion(3)
@pytest.mark.parametrize("fam", ["VII", "VIII", "IX", "X", "XI"])
def test_family_formulas(report, fam):
    assert all(f.outcome == "match" for f in report.families if f.family == fam)


@pytest.mark.criterion(3)
@DEVIATION
def test_family_VI_beta(report):
    assert all(f.outcome == "match" for f in report.families if f.family == "VI")


@pytest.mark.criterion(3)
@pytest.mark.parametrize("case", [c for c in atlas.VIETA_SCANS if c != "c0.x"])
def test_scan_no_extras(report, case):
    s = next(s for s in report.scans if s.case == case)
    assert s.routes_agree and not s.missing and not s.extras


@pytest.mark.criterion(3)
@DEVIATION
def test_scan_no_extras_c0_x(report):
    s = next(s for s in report.scans if s.case == "c0.x")
    assert s.routes_agree and not s.missing and not s.extras


# ---------------------------------------------------------------------------
# 4. bosonic failure sites


@pytest.mark.criterion(4)
@pytest.mark.parametrize("label,level", [
    ("c3.vii.a", 2), ("c3.vii.c", 3), ("c3.vii.d", 3), ("c3.vii.f", 2),
    ("c3.ix.a", 2), ("c3.ix.b", 3), ("c3.ix.c", 4), ("c3.ix.d", 3), ("c3.ix.e", 2),
])
def test_table_failure_levels(report, label, level):
    obs = report.entry(label).observed
    assert obs["status"] == "FailCompatibility" and obs["level"] == level


@pytest.mark.criterion(4)
@DEVIATION
def test_c0_vi_fails_at_level_3(report):
    obs = report.entry("c0.vi").observed
    assert obs["status"] == "FailCompatibility" and obs["level"] == 3


@pytest.mark.criterion(4)
def test_c3_iii_condition(report):
    obs = report.entry("c3.iii").observed
    assert obs["level"] == 6 and obs["condition"] == "beta=-6"


@pytest.mark.criterion(4)
@pytest.mark.parametrize("j1", [4, 5, 6, 7])
def test_c3_ii_condition(report, j1):
    obs = report.entry(f"c3.ii[j1={j1}]").observed
    alpha = sympy.Rational(j1 * (j1 - 3), 2) - 1
    assert obs["level"] == 6 and obs["condition"] == f"beta={3 * alpha}"


# ---------------------------------------------------------------------------
# 5. full fermionic verdicts


@pytest.mark.criterion(5)
def test_skdv1_lookahead(report):
    obs = report.entry("II").observed
    assert obs["status"] == "PrincipalPass" and obs["max_level"] == 7
    assert [6, 7] in [list(x) for x in obs["deferred_to"]]


@pytest.mark.criterion(5)
def test_skdv_minus2_through_5(report):
    obs = report.entry("I").observed
    assert obs["status"] == "PrincipalPass" and obs["max_level"] == 5


@pytest.mark.criterion(5)
def test_skdv4_double_resonance(report):
    obs = report.entry("III").observed
    assert obs["status"] == "PrincipalPass" and obs["max_level"] == 6
    assert 5 in obs["bosonic"] and 5 in obs["fermionic"]
    assert [5, 6] in [list(x) for x in obs["deferred_to"]]


@pytest.mark.criterion(5)
def test_skdv_o_decoupled(report):
    assert report.entry("IV").observed["status"] == "PrincipalPass"
    sys = bundled_system("skdv").substitute_params({"c": 0, "alpha": 1, "beta": 0})
    for f in sys.bosonic:
        # no odd field and no odd constant anywhere in the bosonic equations
        assert all(not odd and not ring >> 1 for (_, odd, ring), _ in sys.equations[f.name].items())


@pytest.mark.criterion(5)
def test_degenerate_case_fails_first_level(report):
    r = report.entry("V")
    assert r.observed["status"] == "FailCompatibility" and r.observed["level"] == -1
    res = Expression.from_json(r.verdict["failure"]["residual"])
    assert [tuple((s.name, s.level) for s in odd) for (_, odd, _), _ in res.items()] == [(("xi1", 0), ("xi2", 0))]


@pytest.mark.criterion(5)
@pytest.mark.parametrize("label", ["II", "III", "IV"])
def test_ledgers_verbatim(report, label):
    r = report.entry(label)
    assert r.observed["ledger"] == sorted(r.expected["ledger"])
    assert len(r.observed["ledger"]) == 12


@pytest.mark.criterion(5)
@DEVIATION
def test_ledger_verbatim_I(report):
    r = report.entry("I")
    assert r.observed["ledger"] == sorted(r.expected["ledger"])


@pytest.mark.criterion(5)
def test_ledger_I_count(report):
    assert len(report.entry("I").observed["ledger"]) == 12


# ---------------------------------------------------------------------------
# 6. osp(2,2)


@pytest.mark.criterion(6)
def test_osp22_passes(report):
    r = report.entry("osp22")
    assert r.observed["status"] == "PrincipalPass" and r.outcome == "match"


# ---------------------------------------------------------------------------
# 7. oracle equivalence


PASSES = ["I", "II", "III", "IV", "c3.vii.e", "c3.viii.a", "c3.viii.b", "c0.vii", "c3.iii.b6", "osp22"]


@pytest.mark.criterion(7)
@pytest.mark.parametrize("label", PASSES)
def test_oracle_vanishes(label):
    e = entry(label)
    v, obs = run_entry(e)
    assert obs["status"] == "PrincipalPass"
    res = oracle_check(bundled_system(e.system), v)
    assert res.is_zero(), res.first_failure()
    assert sum(res.window.values()) > 0


def test_every_pass_is_oracle_checked(report):
    assert sorted(r.label for r in report.entries if r.observed["status"] == "PrincipalPass") == sorted(PASSES)

# criterion 8 lives in test_properties.py


@pytest.mark.criterion(2)
@pytest.mark.parametrize("case,r", _B_PAIRS)
def test_fermionic_polynomial_two_routes(case, r):
    # engine level matrix against the determinant of the closed-form entries
    assert atlas.engine_B_polynomial(case, r).monic().coeffs == atlas.formula_B_polynomial(case, r).monic().coeffs
