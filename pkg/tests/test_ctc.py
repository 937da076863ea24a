import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from aplmdd import ctc
from aplmdd import numcore as nc
from oracles import random_posteriors


@st.composite
def instances(draw, max_T=6, max_C=4, max_L=3):
    C = draw(st.integers(2, max_C))
    T = draw(st.integers(1, max_T))
    blank = draw(st.integers(0, C - 1))
    symbols = [c for c in range(C) if c != blank]
    labels = draw(st.lists(st.sampled_from(symbols), max_size=max_L))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    lp = random_posteriors(np.random.default_rng(seed), T, C, draw(st.sampled_from([0.5, 1.0, 3.0])))
    return lp, labels, blank


# --- loss -------------------------------------------------------------------------------------

def test_single_frame_loss():
    lp = np.log([[0.6, 0.3, 0.1]])
    loss, _ = ctc.ctc_loss(lp, [0], blank=2)
    assert loss == pytest.approx(-math.log(0.6), abs=1e-12)


def test_uniform_two_frames_is_ln3():
    loss, _ = ctc.ctc_loss(np.log(np.full((2, 3), 1 / 3)), [0], blank=2)
    assert loss == pytest.approx(math.log(3), abs=1e-12)


def test_repeat_needs_separating_blank():
    lp = np.log(np.full((2, 3), 1 / 3))
    with pytest.raises(ctc.CTCError, match="target longer than input"):
        ctc.ctc_loss(lp, [0, 0], blank=2)
    assert ctc.required_frames([0, 0]) == 3
    assert ctc.required_frames([0, 1, 1, 1]) == 6


def test_empty_target_is_all_blank():
    lp = np.log([[0.2, 0.8], [0.5, 0.5]])
    loss, _ = ctc.ctc_loss(lp, [], blank=1)
    assert loss == pytest.approx(-math.log(0.4))


def test_rejects_blank_in_labels():
    with pytest.raises(ctc.CTCError):
        ctc.ctc_loss(np.log(np.full((3, 3), 1 / 3)), [2], blank=2)


@settings(max_examples=300, deadline=None)
@given(instances())
def test_loss_matches_path_enumeration(inst):
    lp, labels, blank = inst
    assume(ctc.required_frames(labels) <= lp.shape[0])
    loss, _ = ctc.ctc_loss(lp, labels, blank)
    assert abs(math.exp(-loss) - ctc.ctc_brute_force(lp, labels, blank)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(instances(max_T=12, max_C=6, max_L=5))
def test_forward_and_backward_agree(inst):
    lp, labels, blank = inst
    assume(ctc.required_frames(labels) <= lp.shape[0])
    fwd, bwd = ctc.log_likelihoods(lp, labels, blank)
    assert abs(fwd - bwd) < 1e-10


def test_long_input_stays_finite(rng):
    lp = random_posteriors(rng, 400, 10, sharpness=5.0)
    loss, grad = ctc.ctc_loss(lp, list(rng.integers(0, 9, 60)), blank=9)
    assert np.isfinite(loss) and np.all(np.isfinite(grad))


@pytest.mark.parametrize("seed", range(10))
def test_gradient_through_logits(seed):
    r = np.random.default_rng(seed)
    T, C = int(r.integers(3, 8)), int(r.integers(2, 5))
    labels = list(r.integers(0, C - 1, int(r.integers(0, 3))))
    if ctc.required_frames(labels) > T:
        labels = labels[:1]
    z = r.standard_normal((T, C))

    def loss():
        return ctc.ctc_loss(nc.log_softmax_forward(z, axis=1)[0], labels, C - 1)[0]

    lp, cache = nc.log_softmax_forward(z, axis=1)
    _, g = ctc.ctc_loss(lp, labels, C - 1)
    analytic = nc.log_softmax_backward(g, cache)
    assert nc.relative_error(analytic, nc.numeric_grad(loss, z)) < 1e-4
    # the familiar closed form on logits
    np.testing.assert_allclose(analytic, np.exp(lp) + g, atol=1e-12)


def test_gradient_wrt_free_log_probs(rng):
    lp = random_posteriors(rng, 5, 4)
    _, g = ctc.ctc_loss(lp, [0, 2], blank=3)
    num = nc.numeric_grad(lambda: ctc.ctc_loss(lp, [0, 2], blank=3)[0], lp)
    assert nc.relative_error(g, num) < 1e-6
    # occupancies sum to one per frame
    np.testing.assert_allclose(-g.sum(axis=1), 1.0, atol=1e-12)


# --- brute force and collapse -----------------------------------------------------------------

def test_brute_force_examples():
    lp = np.log([[0.6, 0.3, 0.1]])
    assert ctc.ctc_brute_force(lp, [1], blank=2) == pytest.approx(0.3)
    assert ctc.ctc_brute_force(lp, [0, 1], blank=2) == 0.0


def test_brute_force_guard():
    with pytest.raises(ctc.CTCError):
        ctc.ctc_brute_force(np.zeros((10, 5)), [0], blank=4)


def test_sequence_probabilities_sum_to_one(rng):
    probs = ctc.sequence_probabilities(random_posteriors(rng, 5, 3), blank=0)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("path,out", [([0, 0, 2, 1], [0, 1]), ([2, 2], []), ([0, 2, 0], [0, 0]), ([], [])])
def test_collapse(path, out):
    assert ctc.collapse(path, blank=2) == out


# --- decoding ---------------------------------------------------------------------------------

def test_single_blank_frame_decodes_empty():
    assert ctc.beam_search(np.log([[0.1, 0.2, 0.7]]), blank=2) == []


def test_beam_width_must_be_positive():
    with pytest.raises(ctc.CTCError):
        ctc.beam_search(np.zeros((2, 3)), blank=2, beam_width=0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_width_one_equals_greedy_on_confident_frames(T, C, seed):
    """Width 1 reduces to best-path decoding once every frame's argmax
    exceeds 1/sqrt(2): below that, the merged mass of the kept prefix can
    outrank a repeat that follows a blank frame."""
    r = np.random.default_rng(seed)
    probs = r.dirichlet(np.ones(C), T) * 0.25
    probs[np.arange(T), r.integers(0, C, T)] += 0.75
    lp = np.log(probs)
    assert ctc.beam_search(lp, C - 1, 1) == ctc.greedy_decode(lp, C - 1)


def test_width_one_repeat_after_blank_differs_from_greedy():
    lp = np.log([[0.8, 0.2], [0.3, 0.7], [0.6, 0.4]])
    assert ctc.greedy_decode(lp, blank=1) == [0, 0]
    assert ctc.beam_search(lp, blank=1, beam_width=1) == [0]


def test_width_one_can_differ_from_greedy():
    # frame 2 argmax is b (0.4), but staying on [a] keeps 0.3 + 0.3 of the mass
    lp = np.log([[0.9, 0.05, 0.05], [0.3, 0.4, 0.3]])
    assert ctc.greedy_decode(lp, blank=2) == [0, 1]
    assert ctc.beam_search(lp, blank=2, beam_width=1) == [0]
    probs = ctc.sequence_probabilities(lp, blank=2)
    assert probs[(0,)] > probs[(0, 1)]


def exhaustive_check(lp, blank):
    """Beam with every prefix kept must return a most probable sequence."""
    probs = ctc.sequence_probabilities(lp, blank)
    best = max(probs.values())
    got = tuple(ctc.beam_search(lp, blank, beam_width=3 ** 5))
    return probs.get(got, 0.0) >= best - 1e-12


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(2, 3), st.integers(0, 2 ** 32 - 1), st.sampled_from([0.5, 1.0, 3.0]))
def test_exhaustive_beam_is_optimal(T, C, seed, sharp):
    lp = random_posteriors(np.random.default_rng(seed), T, C, sharp)
    assert exhaustive_check(lp, blank=C - 1)


def test_exhaustive_beam_prefers_mass_over_best_path():
    # best path is blank-blank (0.36), but [a] collects 0.64
    lp = np.log([[0.4, 0.6], [0.4, 0.6]])
    assert ctc.greedy_decode(lp, blank=1) == []
    assert ctc.beam_search(lp, blank=1, beam_width=9) == [0]


def test_beam_search_tie_breaks_lexicographically():
    lp = np.log(np.array([[0.45, 0.45, 0.1]]))
    assert ctc.beam_search(lp, blank=2, beam_width=5) == [0]


def test_wider_beam_can_return_less_probable_sequence():
    """Prefix beam search is not monotone in the width: at width 2 the prefix
    [b] is pruned after frame 1 and never collects its full mass."""
    lp = np.log([[0.2, 0.17, 0.63], [0.35, 0.42, 0.23]])
    probs = ctc.sequence_probabilities(lp, blank=2)
    narrow = tuple(ctc.beam_search(lp, blank=2, beam_width=1))
    wide = tuple(ctc.beam_search(lp, blank=2, beam_width=2))
    assert narrow == (1,) and wide == (0,)
    assert probs[wide] < probs[narrow]
    assert tuple(ctc.beam_search(lp, blank=2, beam_width=9)) == max(probs, key=probs.get)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(2, 3), st.integers(0, 2 ** 32 - 1))
def test_beam_probability_nondecreasing_up_to_exhaustive(T, C, seed):
    """No finite beam beats the exhaustive one."""
    lp = random_posteriors(np.random.default_rng(seed), T, C)
    probs = ctc.sequence_probabilities(lp, blank=C - 1)
    for w in (1, 2, 4):
        got = probs.get(tuple(ctc.beam_search(lp, C - 1, w)), 0.0)
        assert got <= probs[tuple(ctc.beam_search(lp, C - 1, 3 ** 5))] + 1e-12
