import itertools
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from femmir.lexicon import (LexiconError, UnknownConcept, bundled_taxonomy, cosine_sim, load_embeddings,
                            load_taxonomy, taxonomy_from_pairs, wpdist)

T = bundled_taxonomy()
CONCEPTS = T.concepts


def chain(t, c):
    """Independent ancestor walk straight off the parent table."""
    out = [c]
    while c in t.parent:
        c = t.parent[c]
        out.append(c)
    return out


def brute_lcs(t, a, b):
    shared = set(chain(t, a)) & set(chain(t, b))
    return max(shared, key=lambda c: len(chain(t, c)))


def test_lcs_matches_brute_force_on_all_pairs():
    start = time.perf_counter()
    chains = {c: chain(T, c) for c in CONCEPTS}
    for a, b in itertools.combinations_with_replacement(CONCEPTS, 2):
        shared = set(chains[a]) & set(chains[b])
        expect = max(shared, key=lambda c: len(chains[c]))
        assert T.lcs(a, b) == expect == T.lcs(b, a)
        assert wpdist(a, b, T) == 2 * len(chains[expect]) / (len(chains[a]) + len(chains[b]))
    assert time.perf_counter() - start < 5


def test_depth_is_path_length():
    assert T.depth[T.root] == 1
    for c in CONCEPTS:
        assert T.depth[c] == len(chain(T, c))


def test_known_distances():
    assert wpdist("upper-wear-color", "shirt-color", T) == pytest.approx(2 / 3)
    assert wpdist("shirt", "clothes", T) == pytest.approx(10 / 11)
    assert T.is_a("grey", "color") and T.is_a("color", "color")
    assert not T.is_a("jean", "color") and not T.is_a("plutonium", "color")


pairs = st.tuples(st.sampled_from(CONCEPTS), st.sampled_from(CONCEPTS))


@given(pairs)
def test_wpdist_symmetric_and_bounded(ab):
    a, b = ab
    assert wpdist(a, b, T) == wpdist(b, a, T)
    assert 0 < wpdist(a, b, T) <= 1
    assert wpdist(a, a, T) == 1.0


@given(st.sampled_from(CONCEPTS), st.sampled_from(CONCEPTS))
def test_lcs_is_common_ancestor(a, b):
    c = T.lcs(a, b)
    assert c in T.ancestors(a) and c in T.ancestors(b)
    assert c == brute_lcs(T, a, b)


def test_wpdist_monotone_in_lcs_depth():
    # same endpoint depths, deeper lcs -> larger similarity
    t = taxonomy_from_pairs([("a", "r"), ("b", "a"), ("c", "a"), ("x", "b"), ("y", "b"), ("z", "c")])
    assert t.depth["x"] == t.depth["y"] == t.depth["z"]
    assert wpdist("x", "y", t) > wpdist("x", "z", t)


def test_unknown_concept():
    with pytest.raises(UnknownConcept):
        wpdist("red", "plutonium", T)


@pytest.mark.parametrize("pairs, msg", [
    ([("a", "b"), ("b", "a")], "cycle"),
    ([("a", "r"), ("a", "s")], "duplicate child"),
    ([("a", "r"), ("b", "s")], "multiple roots"),
    ([("a", "a")], "cycle"),
])
def test_bad_taxonomies(pairs, msg):
    with pytest.raises(LexiconError, match=msg):
        taxonomy_from_pairs(pairs)


def test_load_taxonomy_file(tmp_path):
    p = tmp_path / "t.tsv"
    p.write_text("# comment\ncat\tanimal\nanimal\tthing\n")
    t = load_taxonomy(p)
    assert t.root == "thing" and t.depth["cat"] == 3
    p.write_text("cat animal\n")
    with pytest.raises(LexiconError, match="line 1"):
        load_taxonomy(p)


def test_embeddings(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("2 3\nRed 1 0 0\nshirt 0 1 0\n")
    store = load_embeddings(p)
    assert store.get("RED").tolist() == [1, 0, 0]
    assert store.get("blue") is None
    np.testing.assert_allclose(store.phrase("red shirt"), [0.5, 0.5, 0])
    assert cosine_sim(store.get("red"), store.phrase("red shirt")) == pytest.approx(2 ** -0.5)
    for body, msg in (("2 3\nred 1 0\nx 1 1 1\n", "ragged"), ("1 3\nred 1 a 0\n", "non-numeric"),
                      ("3 3\nred 1 0 0\n", "declares 3")):
        p.write_text(body)
        with pytest.raises(LexiconError, match=msg):
            load_embeddings(p)
    with pytest.raises(LexiconError):
        cosine_sim([0, 0], [1, 0])
    with pytest.raises(LexiconError):
        cosine_sim([1, 0], [1, 0, 0])
