import json

import numpy as np
import pytest

from ppslab import fixtures
from ppslab.errors import ParseError
from ppslab.feasibility import VerdictKind, paradox_verdict
from ppslab.fileio import (
    dump_model,
    dump_scenario,
    eval_expression,
    parse_model,
    parse_scenario,
    resolve_model,
    resolve_scenario,
)
from ppslab.ontmodel import check_registered, reproduces_born
from ppslab.qcore import projector_equal

THREE_BOX = {
    "format_version": "1",
    "name": "three_box_file",
    "dim": 3,
    "pre": ["1/sqrt(3)", "1/sqrt(3)", "1/sqrt(3)"],
    "post": ["1/sqrt(3)", "1/sqrt(3)", "-1/sqrt(3)"],
    "generators": [
        {"label": "P1", "basis_projector": [0]},
        {"label": "I-P1", "basis_projector": [1, 2]},
        {"label": "P2", "basis_projector": [1]},
        {"label": "I-P2", "basis_projector": [0, 2]},
    ],
}


def same_scenario(a, b):
    return (a.dim == b.dim and a.labels == b.labels
            and abs(abs(a.pre.inner(b.pre)) - 1) < 1e-12 and abs(abs(a.post.inner(b.post)) - 1) < 1e-12
            and all(projector_equal(p, q) for p, q in zip(a.generators, b.generators)))


def test_expressions():
    assert eval_expression("1/3") == pytest.approx(1 / 3)
    assert eval_expression("-sqrt(2)/2") == pytest.approx(-np.sqrt(2) / 2)
    assert eval_expression("2*i") == 2j
    with pytest.raises(ParseError):
        eval_expression("__import__('os')")
    with pytest.raises(ParseError):
        eval_expression("1/0")


def test_parse_three_box_file(tmp_path):
    path = tmp_path / "tb.json"
    path.write_text(json.dumps(THREE_BOX))
    s = parse_scenario(path)
    assert same_scenario(s, fixtures.three_box())
    assert paradox_verdict(s).kind is VerdictKind.LOGICAL_PARADOX


def test_complex_pairs_and_normalize():
    data = dict(THREE_BOX, pre=[[1, 0], [1, 0], [1, 0]], normalize=True)
    s = parse_scenario(data)
    assert np.allclose(s.pre.amplitudes, np.ones(3) / np.sqrt(3))


@pytest.mark.parametrize("name", sorted(fixtures.SCENARIOS))
def test_scenario_round_trip(name):
    s = fixtures.scenario(name)
    back = parse_scenario(dump_scenario(s))
    assert same_scenario(s, back)
    for c1, c2 in zip(s.contexts, back.contexts):
        assert (c1 is None) == (c2 is None)
        if c1 is not None:
            assert all(projector_equal(p, q) for p, q in zip(c1, c2))


def test_fixture_reference():
    assert parse_scenario({"fixture": "cheshire_cat"}).name == "cheshire_cat"
    with pytest.raises(ParseError):
        parse_scenario({"fixture": "nope"})


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("dim"), "<root>"),
    (lambda d: d.update(dim=0), "dim"),
    (lambda d: d.update(pre=["1", "x"]), "pre[1]"),
    (lambda d: d["generators"][2].update(basis_projector=[7]), "generators[2].basis_projector"),
    (lambda d: d["generators"].__setitem__(1, {"label": "I-P1", "matrix": [[1, 0], [0, 1]]}), "generators[1]"),
    (lambda d: d.update(format_version="9"), "format_version"),
])
def test_parse_errors_carry_location(mutate, where):
    data = json.loads(json.dumps(THREE_BOX))
    mutate(data)
    with pytest.raises(ParseError) as exc:
        parse_scenario(data)
    assert exc.value.location.startswith(where)


def test_json_syntax_error_location():
    with pytest.raises(ParseError) as exc:
        parse_scenario('{"dim": 3,\n "pre": [1,, 0]}')
    assert exc.value.location.startswith("line 2")


def test_model_round_trip():
    m = fixtures.model("toy_bit")
    back = parse_model(dump_model(m))
    assert back.ontic_states == m.ontic_states
    for k, r in m.responses.items():
        assert np.array_equal(back.responses[k], r)
    assert reproduces_born(back, tol=1e-12).passed
    assert all(r.passed for r in check_registered(back))
    assert set(back.instruments) == set(m.instruments)


def test_model_file_with_exact_strings(tmp_path):
    data = {
        "dim": 2,
        "ontic_states": ["1", "2"],
        "states": {"0": {"amplitudes": [1, 0], "distribution": ["1/2", "1/2"]}},
        "effects": {"0": {"basis_projector": [0], "response": [1, 1]},
                    "1": {"basis_projector": [1], "response": [0, 0]}},
        "povms": {"Z": ["0", "1"]},
        "instruments": {"LZ": {"luders": True, "branches": {
            "0": {"kernel": [[1, 0], [0, 1]], "effect": "0"},
            "1": {"kernel": [[0, 0], [0, 0]], "effect": "1"}}}},
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    m = parse_model(path)
    assert m.instruments["LZ"].quantum is not None
    assert reproduces_born(m, tol=1e-12).passed


def test_corrupted_model_file():
    text = dump_model(fixtures.model("toy_bit"))
    data = json.loads(text)
    data["states"]["0"]["distribution"] = [0.5, 0.5, 0.5, 0.5]
    with pytest.raises(ParseError):
        parse_model(data)
    with pytest.raises(ParseError):
        parse_model(text[:-20])


def test_resolve_names():
    assert resolve_scenario("three_box").name == "three_box"
    assert resolve_model("toy_bit").name == "toy_bit"
    with pytest.raises(FileNotFoundError):
        resolve_scenario("/nonexistent/file.json")
