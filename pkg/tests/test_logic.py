from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgsim.harness import _rng, random_formula
from pgsim.logic import (And, Const, FormulaSyntaxError, Fragment, Next, Not, Prop, Release,
                         Strategic, Until, classify_fragment, dualize, in_a_patl, in_l_plus,
                         modal_depth, negate, negate_path, parse_formula, parse_path,
                         propositions, read_formula_file, to_text)

I = frozenset({"I"})


def test_parse_strategic_unbounded_until():
    phi = parse_formula("<<I>>[>0.9] (true U phi)")
    assert isinstance(phi, Strategic)
    assert (phi.coalition, phi.cmp, phi.threshold) == (I, ">", Fraction(9, 10))
    assert phi.path == Until(Const(True), Prop("phi"), None)


def test_parse_full_coalition_next():
    phi = parse_formula("<<I,II>>[>=1/2] X p")
    assert phi.coalition == {"I", "II"}
    assert phi.path == Next(Prop("p"))


def test_release_is_rewritten_into_until():
    assert parse_formula("<<I>>[>=0.5] (p R q)") == parse_formula("<<I>>[<=0.5] (!p U !q)")


def test_sugar():
    assert parse_formula("<<>>[>0] F<=3 p").path == Until(Const(True), Prop("p"), 3)
    # G is release from false, rewritten as its until dual
    g = parse_formula("<<II>>[>0] G !p")
    assert (g.cmp, g.threshold) == ("<", 1)
    assert g.path == Until(Const(True), Prop("p"), None)


def test_unicode_aliases():
    a = parse_formula("⟨⟨I⟩⟩[≥1/2] ◇ ¬p ∧ q")
    b = parse_formula("<<I>>[>=1/2] F !p & q")
    assert a == b


@pytest.mark.parametrize("text, pos", [
    ("<<I>>[>1.5] X p", 7),
    ("<<III>>[>0] X p", 2),
    ("p &", 3),
    ("<<I>>[>0] X p )", 14),
])
def test_syntax_errors_have_positions(text, pos):
    with pytest.raises(FormulaSyntaxError) as e:
        parse_formula(text)
    assert e.value.pos == pos


def test_dualize_examples():
    cmp, a, psi = dualize(">=", Fraction(3, 4), parse_path("F phi"))
    assert (cmp, a) == ("<=", Fraction(1, 4))
    assert psi == Release(Const(False), Not(Prop("phi")), None)  # G !phi
    assert dualize(">", 0, Next(Prop("p")))[:2] == ("<", 1)


@pytest.mark.parametrize("path", ["X p", "p U q", "p U<=3 !q", "G p", "F<=2 q"])
@pytest.mark.parametrize("cmp", ["<", ">", "<=", ">="])
def test_dualize_is_an_involution(path, cmp):
    psi = parse_path(path)
    once = dualize(cmp, Fraction(1, 3), psi)
    assert dualize(*once) == (cmp, Fraction(1, 3), psi)


def test_negate_path_involution():
    psi = parse_path("p U<=4 q")
    assert negate_path(negate_path(psi)) == psi
    assert negate(negate(Prop("p"))) == Prop("p")


@pytest.mark.parametrize("text, apatl, lplus", [
    ("<<I>>[>0.5](p U q)", True, True),
    ("<<I>>[>=0.5](p U q)", False, False),  # the negation-closed grammar also needs '>' here
    ("!(<<I>>[>0.5] X p)", False, True),
    ("<<I>>[<0.5] X p", False, True),
    ("<<II>>[>0.5] X p", False, False),
    ("<<>>[>=0.5] p U<=2 q", True, True),
    ("!p | <<I>>[>0] X !q", True, True),
])
def test_fragments(text, apatl, lplus):
    phi = parse_formula(text)
    assert in_a_patl(phi, I) is apatl
    assert in_l_plus(phi, I) is lplus
    tags = classify_fragment(phi, I)
    assert Fragment("FULL") in tags
    assert (Fragment("A-PATL", I) in tags) is apatl


def test_depth_and_props():
    phi = parse_formula("<<I>>[>0] X (<<>>[>=1] (p U<=2 q) & r)")
    assert modal_depth(phi) == 2
    assert propositions(phi) == {"p", "q", "r"}


def test_formula_file():
    fs = read_formula_file("# c\n<<I>>[>0] X p\n\n p & q # trailing\n")
    assert fs == [parse_formula("<<I>>[>0] X p"), And(Prop("p"), Prop("q"))]
    with pytest.raises(FormulaSyntaxError, match="line 2"):
        read_formula_file("p\n<<I>>[>]\n")


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6), st.sampled_from(["A-PATL", "L+"]),
       st.integers(min_value=0, max_value=3))
def test_print_parse_round_trip(seed, fragment, depth):
    phi = random_formula(_rng(seed), ["p", "q"], depth, fragment=fragment,
                         coalitions=(frozenset(), I, frozenset({"II"}), frozenset({"I", "II"})))
    text = to_text(phi)
    again = parse_formula(text)
    assert to_text(again) == text
    assert parse_formula(to_text(again)) == again
