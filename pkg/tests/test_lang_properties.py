import hypothesis.strategies as st
from hypothesis import given, settings

from actorcap.lang import (
    Alt,
    And,
    Cat,
    EMPTY,
    EPS,
    Shuffle,
    Star,
    Sym,
    alt,
    derivative,
    enumerate_words,
    equiv,
    includes,
    is_empty,
    member,
    normalize,
    shuffle,
    word_derivative,
)

from langgen import ALPHABET

A, B, C = ALPHABET

leaves = st.sampled_from([EMPTY, EPS, Sym(A), Sym(B), Sym(C), Sym(A), Sym(B)])
exprs = st.recursive(
    leaves,
    lambda ch: st.one_of(
        st.builds(Cat, ch, ch),
        st.builds(Alt, ch, ch),
        st.builds(Star, ch),
        st.builds(Shuffle, ch, ch),
        st.builds(And, ch, ch),
    ),
    max_leaves=8,
)
symbols = st.sampled_from(ALPHABET)
words = st.lists(symbols, max_size=4).map(tuple)


@settings(max_examples=120, deadline=None)
@given(exprs)
def test_member_agrees_with_enumeration_oracle(e):
    words_of_e = enumerate_words(e, 3, ALPHABET)
    import itertools

    for n in range(4):
        for cand in itertools.product(ALPHABET, repeat=n):
            assert member(cand, e) == (cand in words_of_e)


@settings(max_examples=150, deadline=None)
@given(symbols, exprs, words)
def test_derivative_soundness(s, e, rest):
    assert member(rest, derivative(s, e)) == member((s,) + rest, e)


@settings(max_examples=100, deadline=None)
@given(words, words, exprs)
def test_word_derivative_composition(w1, w2, e):
    assert equiv(
        word_derivative(w1 + w2, e),
        word_derivative(w2, word_derivative(w1, e)),
    )


@settings(max_examples=100, deadline=None)
@given(exprs, exprs)
def test_shuffle_commutative(e1, e2):
    assert equiv(shuffle(e1, e2), shuffle(e2, e1))


@settings(max_examples=80, deadline=None)
@given(exprs, exprs, exprs)
def test_shuffle_associative(e1, e2, e3):
    assert equiv(shuffle(shuffle(e1, e2), e3), shuffle(e1, shuffle(e2, e3)))


@settings(max_examples=100, deadline=None)
@given(exprs)
def test_shuffle_eps_unit(e):
    assert equiv(shuffle(e, EPS), e)
    assert equiv(shuffle(EPS, e), e)


@settings(max_examples=80, deadline=None)
@given(exprs, exprs, exprs)
def test_shuffle_distributes_over_union_both_sides(e1, e2, e3):
    assert equiv(shuffle(e1, alt(e2, e3)), alt(shuffle(e1, e2), shuffle(e1, e3)))
    assert equiv(shuffle(alt(e1, e2), e3), alt(shuffle(e1, e3), shuffle(e2, e3)))


@settings(max_examples=120, deadline=None)
@given(exprs)
def test_includes_reflexive(e):
    assert includes(e, e)


@settings(max_examples=100, deadline=None)
@given(exprs, exprs, exprs)
def test_includes_transitive_on_union_chain(e1, e2, e3):
    lo, mid, hi = e1, alt(e1, e2), alt(alt(e1, e2), e3)
    assert includes(lo, mid) and includes(mid, hi) and includes(lo, hi)


@settings(max_examples=100, deadline=None)
@given(exprs, exprs)
def test_includes_antisymmetric_up_to_equiv(e1, e2):
    if includes(e1, e2) and includes(e2, e1):
        assert equiv(e1, e2)


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_normalize_idempotent_and_denotation_preserving(e):
    n = normalize(e)
    assert normalize(n) == n
    assert enumerate_words(e, 3, ALPHABET) == enumerate_words(n, 3, ALPHABET)


@settings(max_examples=120, deadline=None)
@given(exprs)
def test_is_empty_consistent_with_enumeration(e):
    if is_empty(e):
        assert enumerate_words(e, 5, ALPHABET) == set()
    if enumerate_words(e, 3, ALPHABET):
        assert not is_empty(e)


@settings(max_examples=100, deadline=None)
@given(symbols, exprs, exprs)
def test_shuffle_derivative_rule(s, e1, e2):
    expected = alt(
        shuffle(derivative(s, e1), e2), shuffle(e1, derivative(s, e2))
    )
    assert equiv(derivative(s, shuffle(e1, e2)), expected)
