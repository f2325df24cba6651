import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from statmix.model import (
    ChainSpec,
    RngStream,
    ValidationError,
    cycle_graph,
    enumerate_states,
    graph_from_edges,
    is_proper,
    make_initial_state,
    path_graph,
    proper_colourings,
    run_trials,
    stationary_method,
    uniform_stationary_sample,
)


def chi_square_ok(counts, n_cells, draws):
    # 99.9% quantile of chi-square is well under 3 * dof + 20 for small dof
    expected = draws / n_cells
    stat = sum((c - expected) ** 2 / expected for c in counts)
    return stat < 3 * (n_cells - 1) + 20


def test_identity_random_to_top():
    assert make_initial_state(ChainSpec.random_to_top(4)) == (1, 2, 3, 4)


def test_reversed_hypercube():
    assert make_initial_state(ChainSpec.hypercube(3), "reversed") == (1, 1, 1)


def test_explicit_state_kept():
    assert make_initial_state(ChainSpec.random_to_top(4), (3, 2, 1, 4)) == (3, 2, 1, 4)


@pytest.mark.parametrize("bad", [(1, 1, 2, 3), (1, 2, 3), (0, 1, 2, 3)])
def test_explicit_state_rejected(bad):
    with pytest.raises(ValidationError):
        make_initial_state(ChainSpec.random_to_top(4), bad)


def test_glauber_identity_is_greedy():
    chain = ChainSpec.glauber(path_graph(3), 4)
    assert make_initial_state(chain) == (1, 2, 1)
    with pytest.raises(ValidationError):
        make_initial_state(chain, (1, 1, 2))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="random-to-top", n=1),
        dict(kind="no-such-chain", n=4),
        dict(kind="sticky-random-to-top", n=4, q=0.0),
        dict(kind="sticky-random-to-top", n=4, q=1.5),
    ],
)
def test_chain_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        ChainSpec(**kwargs)


def test_glauber_needs_enough_colours():
    # cycle has max degree 2, so c = 3 is one short of irreducibility
    with pytest.raises(ValidationError):
        ChainSpec.glauber(cycle_graph(5), 3)
    ChainSpec.glauber(cycle_graph(5), 4)


def test_graph_from_edges_symmetric():
    g = graph_from_edges(3, [(1, 2), (2, 3)])
    assert g == path_graph(3)


def test_rng_stream_reproducible():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def _draw(rng):
    return float(rng.random())


def test_run_trials_independent_of_workers():
    one = run_trials(_draw, 2500, 11, workers=1, chunk=1000)
    many = run_trials(_draw, 2500, 11, workers=2, chunk=1000)
    assert one == many


def test_hypercube_sample_uniform():
    chain = ChainSpec.hypercube(2)
    rng = np.random.default_rng(0)
    counts = Counter(uniform_stationary_sample(chain, rng) for _ in range(10_000))
    assert len(counts) == 4
    assert chi_square_ok(counts.values(), 4, 10_000)


def test_permutation_sample_uniform():
    chain = ChainSpec.random_to_top(3)
    rng = np.random.default_rng(1)
    counts = Counter(uniform_stationary_sample(chain, rng) for _ in range(12_000))
    assert set(counts) == set(itertools.permutations((1, 2, 3)))
    assert chi_square_ok(counts.values(), 6, 12_000)


def test_glauber_sample_uniform_over_colourings():
    chain = ChainSpec.glauber(path_graph(3), 4)
    table = proper_colourings(chain.graph, 4)
    # 4 * 3 * 3 proper colourings of a path on three vertices
    assert len(table) == 36
    assert stationary_method(chain) == "exact-enumeration"
    rng = np.random.default_rng(2)
    counts = Counter(uniform_stationary_sample(chain, rng) for _ in range(18_000))
    assert len(counts) == 36
    assert all(is_proper(chain.graph, s) for s in counts)
    assert chi_square_ok(counts.values(), 36, 18_000)


def test_label_stuck_sticky_has_no_uniform_sample():
    with pytest.raises(ValidationError):
        uniform_stationary_sample(ChainSpec.sticky(4, stuck="label"), 0)


def test_enumerate_states_sizes():
    assert len(enumerate_states(ChainSpec.random_to_top(4))) == 24
    assert len(enumerate_states(ChainSpec.hypercube(5))) == 32


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), stream=st.integers(0, 1000))
def test_same_stream_same_draws(seed, stream):
    a = RngStream(seed, stream).generator().integers(0, 1 << 30, 4)
    b = RngStream(seed, stream).generator().integers(0, 1 << 30, 4)
    assert a.tolist() == b.tolist()
