import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nprobust.attacks import make_attack
from nprobust.classifiers import KnnModel
from nprobust.defense import (
    adversarial_prune, adversarial_training, build_conflict_graph, graph_from_edges, greedy_vertex_cover,
    hopcroft_karp, is_vertex_cover, min_vertex_cover_bipartite,
)
from nprobust.errors import InconsistencyError, NoAdversarialExampleError
from nprobust.harness import synth_dataset

from oracles import brute_max_matching, brute_min_cover, dataset

# A at 0.0 and 1.0, B at 0.1 and 2.0
FOUR = dataset([0.0, 1.0, 0.1, 2.0], [1, 1, 2, 2])
# a1=0, a2=1, b1=2, b2=3
PATH = graph_from_edges([1, 1, 2, 2], [(0, 2), (1, 2), (1, 3)])


def test_conflict_graph_examples():
    assert build_conflict_graph(FOUR, 0.3, math.inf).edges == ((0, 2),)
    assert build_conflict_graph(FOUR, 0.0, math.inf).edges == ()
    g = build_conflict_graph(FOUR, 100.0, math.inf)
    assert g.edges == ((0, 2), (0, 3), (1, 2), (1, 3))
    assert g.bipartite and g.left == (0, 1) and g.right == (2, 3)


def test_conflict_graph_radius_is_inclusive():
    ds = dataset([0.0, 0.6], [1, 2])
    assert build_conflict_graph(ds, 0.3, 2).n_edges == 1


def test_graph_rejects_same_label_edge():
    with pytest.raises(ValueError):
        graph_from_edges([1, 1], [(0, 1)])


def test_matching_and_cover_on_path():
    m = hopcroft_karp(PATH)
    assert len(m) == 2
    cover = min_vertex_cover_bipartite(PATH, m)
    # {a1, a2}: the matching is perfect, so no alternating path starts on the left
    assert cover == (0, 1)
    assert brute_min_cover(4, PATH.edges) == 2 and is_vertex_cover(PATH, cover)


def test_empty_and_single_edge():
    empty = graph_from_edges([1, 2], [])
    assert hopcroft_karp(empty) == ()
    assert min_vertex_cover_bipartite(empty, ()) == ()
    assert greedy_vertex_cover(empty) == ()
    one = graph_from_edges([1, 2], [(0, 1)])
    assert len(min_vertex_cover_bipartite(one, hopcroft_karp(one))) == 1
    assert greedy_vertex_cover(one) == (0, 1)


def test_cover_rejects_non_maximum_matching():
    with pytest.raises(InconsistencyError):
        min_vertex_cover_bipartite(PATH, ((1, 2),))


def test_hopcroft_karp_needs_two_labels():
    g = graph_from_edges([1, 2, 3], [(0, 1), (1, 2)])
    assert not g.bipartite
    with pytest.raises(ValueError):
        hopcroft_karp(g)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_hopcroft_karp_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    labels = rng.integers(1, 3, size=n)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if labels[i] != labels[j] and rng.uniform() < 0.4]
    g = graph_from_edges(labels, edges)
    m = hopcroft_karp(g)
    assert len(m) == brute_max_matching(n, g.edges)
    cover = min_vertex_cover_bipartite(g, m)
    assert is_vertex_cover(g, cover) and len(cover) == len(m)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_greedy_two_approximation(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 11))
    labels = rng.integers(1, 4, size=n)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if labels[i] != labels[j] and rng.uniform() < 0.35]
    g = graph_from_edges(labels, edges)
    cover = greedy_vertex_cover(g)
    assert is_vertex_cover(g, cover)
    assert len(cover) <= 2 * brute_min_cover(n, g.edges)


def test_prune_four_points():
    res = adversarial_prune(FOUR, 0.3, math.inf)
    assert res.pruned.n == 3 and res.exact
    assert len(res.removed) == 1 and res.removed[0] in (0, 2)
    i, j, d = res.pairs[0]
    assert {i, j} == {0, 2} and d == pytest.approx(0.1)


def test_prune_radius_zero_is_identity():
    res = adversarial_prune(FOUR, 0.0, math.inf)
    assert res.removed == () and np.array_equal(res.pruned.X, FOUR.X)


def test_prune_separation(rng):
    ds = synth_dataset("two-gaussians-overlap", 80, 0.3, seed=3)
    for p in (1, 2, math.inf):
        res = adversarial_prune(ds, 0.1, p)
        X, y = res.pruned.X, res.pruned.y
        D = np.linalg.norm(X[:, None] - X[None], ord=p, axis=2)
        assert np.all(D[y[:, None] != y[None, :]] > 0.2)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_prune_multiclass_uses_greedy():
    ds = dataset([0.0, 0.1, 0.2], [1, 2, 3])
    res = adversarial_prune(ds, 0.1, math.inf)
    assert not res.exact
    y = res.pruned.y
    assert len(set(y.tolist())) == res.pruned.n


def test_prune_warns_on_emptied_class():
    ds = dataset([0.0, 0.05, 0.1], [1, 2, 1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = adversarial_prune(ds, 0.3, math.inf)
    assert res.pruned.n == 2
    assert any("emptied class" in str(w.message) for w in caught)


def test_prune_far_gaussians_remove_nothing():
    ds = synth_dataset("two-gaussians-overlap", 100, 0.0, seed=0, separation=3.0)
    assert adversarial_prune(ds, 0.1, math.inf).removed == ()


def test_adversarial_training_examples():
    two = dataset([-1.0, 1.0], [1, 2])
    trainer = lambda ds: KnnModel(ds, 1)
    # the midpoint is 1 away from both points, beyond the 0.3 budget
    out = adversarial_training(trainer, two, make_attack("rba-exact", math.inf), 0.3)
    assert out is two

    def fails(f, x):
        raise NoAdversarialExampleError("nothing")

    assert adversarial_training(trainer, two, fails, 0.3) is two
    out = adversarial_training(trainer, two, make_attack("rba-exact", math.inf), 1.5)
    assert out.n == 4 and out.y.tolist() == [1, 2, 1, 2]
    with pytest.raises(ValueError):
        adversarial_training(trainer, two, fails, 0.0)
