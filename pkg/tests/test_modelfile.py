from fractions import Fraction

import pytest

from pgsim.core import Distribution, ModelError
from pgsim.harness import random_model
from pgsim.modelfile import ModelSyntaxError, data_path, format_model, load_model, parse_model

BASE = """\
name tiny
actions I a b
actions II c
props p
state x
state y p   # labelled
trans * * * -> y
trans x a c -> x:1/2 y:1/2
"""


def test_wildcards_and_specificity():
    doc = parse_model(BASE)
    G = doc.game
    assert G.step("x", "a", "c") == {"x": Fraction(1, 2), "y": Fraction(1, 2)}
    assert G.step("x", "b", "c") == Distribution.point("y")
    assert G.step("y", "a", "c") == Distribution.point("y")
    assert doc.initial == Distribution.point("x")
    assert G.labels["y"] == {"p"}


def test_initial_distribution():
    doc = parse_model(BASE + "initial x:1/4 y:3/4\n")
    assert doc.initial == {"x": Fraction(1, 4), "y": Fraction(3, 4)}
    assert doc.game.initial == "y"


@pytest.mark.parametrize("extra, line, needle", [
    ("trans x a c -> y\n", 9, "duplicate"),
    ("trans x z c -> y\n", 9, "unknown action"),
    ("trans y a c -> y:2\n", 9, "outside"),
    ("trans y a c -> y:1/3\n", 9, "sum"),
    ("bogus\n", 9, "unknown directive"),
    ("state x\n", 9, "declared twice"),
    ("trans x a -> y\n", 9, "expected"),
])
def test_errors_carry_line_numbers(extra, line, needle):
    with pytest.raises(ModelSyntaxError) as e:
        parse_model(BASE + extra, "m.pgs")
    assert e.value.line == line
    assert needle in str(e.value)
    assert str(e.value).startswith(f"m.pgs:{line}:")


def test_equal_specificity_overlap_rejected():
    text = BASE + "trans y * c -> x\ntrans * a c -> y\n"
    with pytest.raises(ModelSyntaxError, match="equal specificity"):
        parse_model(text)
    # the same tie is harmless where a more specific line decides, in any order
    for extra in ("trans x * c -> x\ntrans * a c -> y\n", "trans * a c -> y\ntrans x * c -> x\n"):
        G = parse_model(BASE + extra).game
        assert G.step("x", "a", "c") == {"x": Fraction(1, 2), "y": Fraction(1, 2)}


def test_missing_transition_is_a_model_error():
    with pytest.raises(ModelError, match="missing transition"):
        parse_model("actions I a\nactions II b\nstate x\nstate y\ntrans x a b -> y\n")


@pytest.mark.parametrize("seed", range(8))
def test_format_parse_round_trip(seed):
    G = random_model(4, 2, 2, seed)
    H = parse_model(format_model(G)).game
    assert H.delta == G.delta
    assert H.labels == G.labels
    assert (H.states, H.actions_I, H.actions_II, H.props) == (G.states, G.actions_I, G.actions_II, G.props)
    assert format_model(H) == format_model(G)


def test_shipped_corpus_loads():
    for name in ["fig1.pgs", "fig2a.pgs", "fig2b.pgs"] + [f"random/r{i:02d}.pgs" for i in range(20)]:
        doc = load_model(data_path(name))
        assert doc.game.states


def test_shipped_random_models_match_generator():
    for i in range(20):
        G = load_model(data_path(f"random/r{i:02d}.pgs")).game
        assert G.delta == random_model(4, 2, 2, i).delta
