import numpy as np
import pytest

from linerating.network import (
    CaseError,
    CostCurve,
    Generator,
    Line,
    NetworkCase,
    bundled_case,
    load_matpower,
    parse_matpower,
    scale_limits,
    two_bus_case,
)

SMALL_CASE = """
function mpc = tiny
mpc.baseMVA = 100;
mpc.bus = [
    1   3   0   0   0 0 1 1 0 135 1 1.05 0.95;
    2   1   40  10  0 0 1 1 0 135 1 1.05 0.95;
    3   1   25  5   0 0 1 1 0 135 1 1.05 0.95;
];
mpc.gen = [
    1   0   0   50  -50 1 100 1 80  0;
    3   0   0   50  -50 1 100 1 40  0;
    2   0   0   50  -50 1 100 0 40  0;   % out of service
];
mpc.branch = [
    1   2   0.01  0.1   0 60  60  60  0 0 1 -360 360;
    2   3   0.01  0.2   0 40  40  40  0 0 1 -360 360;
    1   3   0.01  0.25  0 40  40  40  0 0 0 -360 360;
];
mpc.gencost = [
    2   0   0   3   0.02  20  0;
    2   0   0   3   0.04  25  10;
    2   0   0   3   0.04  25  10;
];
"""


def test_parse_small_case():
    case = parse_matpower(SMALL_CASE, "tiny")
    assert case.buses == [1, 2, 3]
    assert case.reference_bus == 1
    assert case.loads == {2: 40.0, 3: 25.0}
    assert [(l.from_bus, l.to_bus) for l in case.lines] == [(1, 2), (2, 3)]
    assert case.lines[0].susceptance == pytest.approx(10.0)
    assert case.base_limits.tolist() == [60.0, 40.0]
    assert len(case.generators) == 2
    assert case.generators[1].cost == CostCurve(0.04, 25.0, 10.0)
    assert case.generators[0].p_max == 80.0


def test_sidecar_names_lines(tmp_path):
    (tmp_path / "tiny.m").write_text(SMALL_CASE)
    (tmp_path / "tiny.json").write_text('{"name": "Tiny", "line_ids": ["A", "B"], "bus_labels": {"1": "north"}}')
    case = load_matpower(tmp_path / "tiny.m")
    assert case.name == "Tiny"
    assert case.line_ids == ["A", "B"]
    assert case.bus_labels == {1: "north"}


def test_bundled_30_bus_case():
    case = bundled_case("case30")
    assert case.n_bus == 30
    assert case.n_line == 41
    assert len(case.generators) == 6
    assert case.load_vector().sum() == pytest.approx(189.2)
    assert all(g.cost.a >= 0 for g in case.generators)
    assert all(g.p_min == 0 for g in case.generators)


def test_incidence_signs():
    case = parse_matpower(SMALL_CASE)
    C = case.incidence()
    assert C.tolist() == [[1, -1, 0], [0, 1, -1]]


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda t: t.replace("1   2   0.01  0.1   0 60", "1   9   0.01  0.1   0 60"), "unknown bus"),
        (lambda t: t.replace("0.02  20  0", "-0.02  20  0"), "not convex"),
        (lambda t: t.replace("0.1   0 60", "0.0   0 60"), "zero reactance"),
        (lambda t: t.replace("0.1   0 60  60", "0.1   0 0  60"), "rateA"),
        (lambda t: t.replace("mpc.gencost", "mpc.nocost"), "gencost"),
    ],
)
def test_parse_errors(mutate, message):
    with pytest.raises(CaseError, match=message):
        parse_matpower(mutate(SMALL_CASE))


def test_disconnected_case_rejected():
    with pytest.raises(CaseError, match="not connected"):
        NetworkCase([1, 2, 3], [Line(1, 2, 10.0, 50.0)], [], {3: 5.0})


def test_case_invariants():
    gen = Generator(1, CostCurve(0, 10, 0), 0.0, 10.0)
    with pytest.raises(CaseError):
        NetworkCase([1, 2], [Line(1, 2, 10.0, 0.0)], [gen], {})
    with pytest.raises(CaseError):
        NetworkCase([1, 2], [Line(1, 2, 10.0, 5.0)], [Generator(1, CostCurve(), 5.0, 1.0)], {})
    with pytest.raises(CaseError):
        NetworkCase([1, 2], [Line(1, 2, 10.0, 5.0)], [gen], {}, reference_bus=7)


def test_two_bus_helper_and_scaling():
    case = two_bus_case(limit=30.0)
    assert case.base_limits.tolist() == [30.0]
    assert scale_limits(case, 2.0).base_limits.tolist() == [60.0]
    assert np.array_equal(case.load_vector(), [0.0, 50.0])
    assert case.fingerprint() == two_bus_case(limit=30.0).fingerprint()
