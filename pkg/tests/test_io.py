import numpy as np
import pytest

from subreg.harness import build_instances
from subreg.objectives.io import InstanceFormatError, dumps, load, loads, save


@pytest.mark.parametrize("family", ["coverage", "nqp", "dopt"])
def test_round_trip_is_exact(family, tmp_path):
    inst = build_instances(family, 3, 5)
    text = dumps(family, 5, inst.polytope, inst.objectives)
    back = loads(text)
    assert back.family == family and back.seed == 5
    np.testing.assert_array_equal(back.polytope.a_matrix, inst.polytope.a_matrix)
    np.testing.assert_array_equal(back.polytope.box.lower, inst.polytope.box.lower)
    x = inst.polytope.feasible_point
    for a, b in zip(inst.objectives, back.objectives):
        assert a.value(x) == b.value(x)
        np.testing.assert_array_equal(a.gradient(x), b.gradient(x))
    assert dumps(family, 5, back.polytope, back.objectives) == text
    path = tmp_path / "x.inst"
    save(path, family, 5, inst.polytope, inst.objectives)
    assert path.read_text() == text
    assert len(load(path).objectives) == 3


def good_text():
    inst = build_instances("nqp", 1, 0, {"n": 2, "m": 1})
    return dumps("nqp", 0, inst.polytope, inst.objectives)


def test_comments_and_blank_lines_are_ignored():
    text = "# header comment\n\n" + good_text().replace("\nseed 0\n", "\n\nseed 0  # inline\n")
    assert loads(text).seed == 0


@pytest.mark.parametrize("mutate, line", [
    (lambda t: t.replace("subreg-instance 1", "subreg-instance 2"), 1),
    (lambda t: t.replace("rounds 1", "rounds x"), 9),
    (lambda t: t.replace("nqp 2 0.5", "nqp 3 0.5"), 11),
    (lambda t: t.replace("family nqp", "family dopt"), None),
    (lambda t: t + "extra 1\n", 14),
    (lambda t: "\n".join(t.splitlines()[:-1]) + "\n", None),
], ids=["version", "int", "width", "family", "trailing", "truncated"])
def test_malformed_files_report_lines(mutate, line):
    with pytest.raises(InstanceFormatError) as err:
        loads(mutate(good_text()))
    if line is not None:
        assert err.value.line == line
        assert f"line {line}" in str(err.value)


def test_bad_number_is_located():
    lines = good_text().splitlines()
    lines[4] = "abc " + lines[4].split(" ", 1)[1]
    with pytest.raises(InstanceFormatError) as err:
        loads("\n".join(lines))
    assert err.value.line == 5
