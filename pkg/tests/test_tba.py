"""Timed automata: flat-formula translation, intersection, lasso acceptance."""

from fractions import Fraction

import numpy as np
import pytest

from mas import mitl
from mas.errors import NonPeriodicWord, UnsupportedNesting
from mas.mitl import TimedWord, evaluate, parse, word_from_lasso
from mas.tba import (accepts_lasso, canonical_letters, from_flat_mitl,
                     intersect, universal_acceptor)

from conftest import random_flat_formula, random_lasso_word

G = frozenset({"green"})
P = frozenset({"p"})
E = frozenset()


def test_translation_agrees_with_evaluation_on_window_boundaries():
    word = word_from_lasso([E, E, P], [E], 1)  # p exactly at t = 2
    for text, expect in [
        ("F[0,2] p", True),
        ("F[0,2) p", False),
        ("F(2,5] p", False),
        ("F[2,2.5] p", True),
        ("G[0,1] !p", True),
        ("G[0,2] !p", False),
    ]:
        auto = from_flat_mitl(parse(text), alphabet={"p"})
        assert accepts_lasso(auto, word) is expect, text
        assert evaluate(word, parse(text)) is expect, text


def test_deadline_met_example_word():
    r1 = TimedWord(
        prefix=((G, Fraction(0)), (E, Fraction(1)),
                (G, Fraction(3)), (E, Fraction(4))),
        cycle=((G, Fraction(2)), (E, Fraction(1))))
    auto = from_flat_mitl(parse("F[2,5] green"))
    assert accepts_lasso(auto, r1)
    assert evaluate(r1, parse("F[2,5] green"))


def test_safety_violated_example_word():
    r2 = TimedWord(
        prefix=((G, Fraction(0)), (E, Fraction(1)), (E, Fraction(5, 2)),
                (E, Fraction(3))),
        cycle=((E, Fraction(3, 2)), (E, Fraction(1))))
    auto = from_flat_mitl(parse("G[0,5] green"))
    assert not accepts_lasso(auto, r2)
    assert not evaluate(r2, parse("G[0,5] green"))


def test_largest_constant_drives_saturation():
    auto = from_flat_mitl(parse("F[2,5] p"))
    assert auto.c_max == Fraction(5)
    auto = from_flat_mitl(parse("G[0,3] p & F[1,7] q"))
    assert auto.c_max == Fraction(7)


def test_universal_acceptor_accepts_anything():
    rng = np.random.default_rng(5)
    auto = universal_acceptor({"p", "q"})
    for _ in range(20):
        assert accepts_lasso(auto, random_lasso_word(rng))


def test_intersection_with_universal_is_identity_on_language():
    rng = np.random.default_rng(17)
    base = from_flat_mitl(parse("F[1,4] p"), alphabet={"p", "q"})
    both = intersect(base, universal_acceptor({"p", "q"}))
    for _ in range(60):
        word = random_lasso_word(rng)
        assert accepts_lasso(base, word) == accepts_lasso(both, word)


def test_intersection_is_language_conjunction():
    rng = np.random.default_rng(23)
    f = parse("F[0,3] p")
    g = parse("G[1,4] q")
    auto = intersect(from_flat_mitl(f, alphabet={"p", "q"}),
                     from_flat_mitl(g, alphabet={"p", "q"}))
    for _ in range(60):
        word = random_lasso_word(rng, max_length=8)
        expect = evaluate(word, f) and evaluate(word, g)
        assert accepts_lasso(auto, word) == expect


def test_translation_rejects_nested_temporal_operands():
    with pytest.raises(UnsupportedNesting):
        from_flat_mitl(parse("F[0,1] (F[0,1] a)"))
    with pytest.raises(UnsupportedNesting):
        from_flat_mitl(parse("!(a U[0,1] b)"))


def test_alphabet_must_cover_formula_atoms():
    with pytest.raises(ValueError):
        from_flat_mitl(parse("F[0,1] a"), alphabet={"b"})


def test_lasso_acceptance_needs_a_timed_word():
    auto = universal_acceptor({"p"})
    with pytest.raises(NonPeriodicWord):
        accepts_lasso(auto, [({"p"}, 0)])


def test_canonical_letters_order():
    assert canonical_letters(frozenset({"b", "a"})) == [
        frozenset(), frozenset({"a"}), frozenset({"b"}),
        frozenset({"a", "b"})]


def test_negated_units_translate_via_duality():
    word = word_from_lasso([P, P, E], [P], 1)
    for text in ("!(F[0,1] p)", "!(G[0,5] p)"):
        auto = from_flat_mitl(parse(text), alphabet={"p"})
        assert accepts_lasso(auto, word) == evaluate(word, parse(text))


def test_next_and_until_templates():
    word = word_from_lasso([P, frozenset({"q"})], [E], 1)
    cases = [
        ("X[1,2] q", True),
        ("X[2,3] q", False),
        ("p U[0,2] q", True),
        ("p U[2,4] q", False),  # p fails at position 1 before any late q
    ]
    for text, expect in cases:
        auto = from_flat_mitl(parse(text), alphabet={"p", "q"})
        assert accepts_lasso(auto, word) is expect, text
        assert evaluate(word, parse(text)) is expect, text


def test_translation_agrees_with_evaluation_on_random_instances():
    rng = np.random.default_rng(20240821)
    for _ in range(120):
        formula = random_flat_formula(rng)
        word = random_lasso_word(rng, max_length=8)
        auto = from_flat_mitl(formula, alphabet={"p", "q"})
        assert accepts_lasso(auto, word) == evaluate(word, formula), \
            (mitl.formula_to_text(formula), word)


def test_fractional_step_words_agree_too():
    rng = np.random.default_rng(31)
    for _ in range(60):
        formula = random_flat_formula(rng)
        word = random_lasso_word(rng, max_length=6, dt=Fraction(1, 2))
        auto = from_flat_mitl(formula, alphabet={"p", "q"})
        assert accepts_lasso(auto, word) == evaluate(word, formula), \
            (mitl.formula_to_text(formula), word)
