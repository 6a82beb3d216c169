from pathlib import Path

import pytest

from superpainleve.atlas import _data
from superpainleve.dsl import DSLError, parse_expression, parse_system
from superpainleve.system import EvolutionSystem, build_osp22, build_skdv

DEMOS = Path(__file__).resolve().parent.parent / "demos"


def test_skdv_file_matches_hand_built():
    # the bundled equation file and the Python builder are independent routes
    parsed = EvolutionSystem.from_parsed(parse_system(_data("skdv.eqn")))
    built = build_skdv()
    for f in built.fields:
        assert parsed.field(f.name).parity == f.parity
        assert parsed.equations[f.name] == built.equations[f.name], f.name


def test_osp_file_matches_hand_built():
    parsed = EvolutionSystem.from_parsed(parse_system(_data("osp22.eqn")))
    built = build_osp22()
    for f in built.fields:
        assert parsed.equations[f.name] == built.equations[f.name], f.name


def test_error_has_position():
    with pytest.raises(DSLError) as exc:
        parse_system((DEMOS / "broken.eqn").read_text())
    assert exc.value.line > 0


@pytest.mark.parametrize("text", [
    "field u parity=even lead=2\nequation u =\n    d(v)\n",              # unknown field
    "field zq parity=odd lead=2\nequation zq =\n    d(zq) + 1\n",        # mixed parity right-hand side
    "field u parity=odd lead=2\nequation u =\n    d(u)\n",              # u is already an even field
    "field u parity=even lead=2\n",                                      # missing equation
    "field u parity=sideways lead=2\nequation u =\n    u\n",             # bad parity word
])
def test_rejects(text):
    with pytest.raises(DSLError):
        parse_system(text)


def test_expression_with_generators():
    e = parse_expression("1/2*k*theta1", generators=("theta1",))
    assert e.parity() == 1
