import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aplmdd import scoring
from aplmdd.scoring import DELETED, UNDEFINED, EditCounts, MddCounts
from oracles import optimal_triples, replay

ALPHABET = list("abcde")
seqs = st.lists(st.sampled_from(ALPHABET), max_size=6)


# --- align ------------------------------------------------------------------------------------

def test_align_deletion_example():
    _, c = scoring.align(["aa", "b", "k"], ["aa", "k"])
    assert c == EditCounts(S=0, D=1, I=0, N=3)


def test_align_insertion_example():
    _, c = scoring.align(["aa", "b"], ["aa", "b", "k"])
    assert c == EditCounts(S=0, D=0, I=1, N=2)


@given(seqs)
def test_align_identity(x):
    ops, c = scoring.align(x, x)
    assert c == EditCounts(N=len(x)) and all(o[0] == "match" for o in ops)


def test_align_prefers_substitution_over_indel_pair():
    ops, c = scoring.align(["a"], ["b"])
    assert ops == [("sub", 0, 0)] and c == EditCounts(S=1, N=1)


@settings(max_examples=300, deadline=None)
@given(seqs, seqs)
def test_align_matches_exhaustive_oracle(ref, hyp):
    ops, c = scoring.align(ref, hyp)
    best, triples = optimal_triples(ref, hyp)
    assert c.errors == best
    assert (c.S, c.D, c.I) in triples
    replay(ops, ref, hyp)


def test_correctness_and_accuracy_example():
    c = EditCounts(S=1, D=1, I=1, N=10)
    assert scoring.correctness(c) == pytest.approx(0.8)
    assert scoring.accuracy(c) == pytest.approx(0.7)


def test_accuracy_may_go_negative():
    assert scoring.accuracy(EditCounts(I=3, N=2)) == -0.5


def test_perfect_match_rates():
    _, c = scoring.align(list("abc"), list("abc"))
    assert scoring.correctness(c) == scoring.accuracy(c) == 1.0


def test_rates_reject_empty_reference():
    with pytest.raises(ValueError):
        scoring.correctness(EditCounts())
    with pytest.raises(ValueError):
        scoring.accuracy(EditCounts())


@given(seqs.filter(bool), seqs)
def test_correctness_at_least_accuracy(ref, hyp):
    _, c = scoring.align(ref, hyp)
    assert scoring.correctness(c) >= scoring.accuracy(c)


# --- hierarchical evaluation ------------------------------------------------------------------

def test_true_rejection_correct_diagnosis():
    m = scoring.hierarchical_eval(["t", "aa", "k"], ["t", "ah", "k"], ["t", "ah", "k"])
    assert m == MddCounts(TA=2, TR=1, CD=1)


def test_false_acceptance():
    m = scoring.hierarchical_eval(["t", "aa", "k"], ["t", "ah", "k"], ["t", "aa", "k"])
    assert m == MddCounts(TA=2, FA=1)


def test_all_equal_is_all_true_acceptance():
    m = scoring.hierarchical_eval(list("abcd"), list("abcd"), list("abcd"))
    assert m == MddCounts(TA=4)


def test_matching_deletions_count_as_correct_diagnosis():
    m = scoring.hierarchical_eval(["a", "b", "c"], ["a", "c"], ["a", "c"])
    assert m == MddCounts(TA=2, TR=1, CD=1)


def test_deletion_versus_substitution_is_diagnosis_error():
    m = scoring.hierarchical_eval(["a", "b", "c"], ["a", "c"], ["a", "d", "c"])
    assert m == MddCounts(TA=2, TR=1, DE=1)


def test_insertions_are_excluded_and_counted():
    m = scoring.hierarchical_eval(["a", "b"], ["a", "x", "b"], ["a", "b", "y", "z"])
    assert (m.TA, m.FR, m.FA, m.TR) == (2, 0, 0, 0)
    assert (m.insertions_perceived, m.insertions_recognized) == (1, 2)


def test_project_marks_deletions_and_counts_insertions():
    assert scoring.project(["a", "b", "c"], ["a", "c"]) == (["a", DELETED, "c"], 0)
    assert scoring.project(["a", "b"], ["x", "a", "b"]) == (["a", "b"], 1)


triples = st.tuples(seqs.filter(bool), seqs, seqs)


@settings(max_examples=300, deadline=None)
@given(triples)
def test_taxonomy_partitions_canonical(t):
    can, per, rec = t
    m = scoring.hierarchical_eval(can, per, rec)
    assert m.TA + m.FR + m.FA + m.TR == len(can)
    assert m.TR == m.CD + m.DE


@settings(max_examples=200, deadline=None)
@given(triples)
def test_perfect_recognizer_has_no_false_outcomes(t):
    can, per, _ = t
    m = scoring.hierarchical_eval(can, per, per)
    assert m.FR == m.FA == m.DE == 0
    met = scoring.mdd_metrics(m)
    assert met["frr"] in (0.0, UNDEFINED) and met["far"] in (0.0, UNDEFINED) and met["der"] in (0.0, UNDEFINED)


@settings(max_examples=200, deadline=None)
@given(triples)
def test_canonical_recognizer_accepts_everything(t):
    can, per, _ = t
    m = scoring.hierarchical_eval(can, per, can)
    projected, _ = scoring.project(can, per)
    assert m.FR == m.TR == 0
    assert m.FA == sum(p != c for p, c in zip(projected, can))
    assert scoring.mdd_metrics(m)["recall"] in (0.0, UNDEFINED)


# --- metrics ----------------------------------------------------------------------------------

def test_metrics_for_correct_diagnosis_example():
    met = scoring.mdd_metrics(MddCounts(TA=2, TR=1, CD=1))
    assert met == {"frr": 0.0, "far": 0.0, "detection_accuracy": 1.0, "precision": 1.0,
                   "recall": 1.0, "f_measure": 1.0, "der": 0.0}


def test_metrics_for_false_acceptance_example():
    met = scoring.mdd_metrics(MddCounts(TA=2, FA=1))
    assert met["far"] == 1.0 and met["recall"] == 0.0
    assert met["detection_accuracy"] == pytest.approx(2 / 3)
    assert met["precision"] == UNDEFINED and met["f_measure"] == UNDEFINED and met["der"] == UNDEFINED


def test_zero_denominators_are_undefined():
    met = scoring.mdd_metrics(MddCounts())
    assert all(v == UNDEFINED for v in met.values())


counts = st.integers(0, 50)


@given(counts, counts, counts, counts, counts)
def test_recall_is_one_minus_far(ta, fr, fa, cd, de):
    m = MddCounts(TA=ta, FR=fr, FA=fa, TR=cd + de, CD=cd, DE=de)
    met = scoring.mdd_metrics(m, exact=True)
    if met["far"] == UNDEFINED:
        assert met["recall"] == UNDEFINED
    else:
        assert met["recall"] == 1 - met["far"]
        assert scoring.mdd_metrics(m)["recall"] == float(met["recall"])


@given(counts, counts, counts, counts, counts)
def test_f_measure_is_harmonic_mean(ta, fr, fa, cd, de):
    met = scoring.mdd_metrics(MddCounts(TA=ta, FR=fr, FA=fa, TR=cd + de, CD=cd, DE=de))
    p, r, f = met["precision"], met["recall"], met["f_measure"]
    if UNDEFINED in (p, r) or p + r == 0:
        assert f == UNDEFINED
    else:
        assert f == pytest.approx(2 * p * r / (p + r))
        assert min(p, r) - 1e-12 <= f <= max(p, r) + 1e-12


# --- corpus report ----------------------------------------------------------------------------

ITEMS = [
    ("u1", ["t", "aa", "k"], ["t", "ah", "k"], ["t", "ah", "k"]),
    ("u2", ["s", "iy"], ["s", "iy"], ["sh", "iy", "n"]),
    ("u3", ["b", "ae", "d"], ["b", "d"], ["b", "ae", "d"]),
]


def test_single_utterance_report_equals_its_row():
    rep = scoring.corpus_report(ITEMS[:1])
    assert rep["aggregate"]["edit"] == rep["per_utterance"][0]["edit"]
    assert rep["aggregate"]["mdd"] == rep["per_utterance"][0]["mdd"]


def test_duplicating_corpus_keeps_ratios():
    once = scoring.corpus_report(ITEMS)["aggregate"]
    twice = scoring.corpus_report(ITEMS + ITEMS)["aggregate"]
    for key in ("frr", "far", "detection_accuracy", "precision", "recall", "f_measure", "der"):
        assert once["mdd"][key] == pytest.approx(twice["mdd"][key])
    assert once["edit"]["accuracy"] == pytest.approx(twice["edit"]["accuracy"])
    assert twice["mdd"]["TA"] == 2 * once["mdd"]["TA"]


def test_disjoint_corpora_counts_add():
    a = scoring.corpus_report(ITEMS[:1])["aggregate"]
    b = scoring.corpus_report(ITEMS[1:])["aggregate"]
    ab = scoring.corpus_report(ITEMS)["aggregate"]
    for k in ("TA", "FR", "FA", "TR", "CD", "DE"):
        assert ab["mdd"][k] == a["mdd"][k] + b["mdd"][k]
    for k in ("S", "D", "I", "N"):
        assert ab["edit"][k] == a["edit"][k] + b["edit"][k]
    assert ab["insertions_excluded"] == a["insertions_excluded"] + b["insertions_excluded"]


def test_report_shape_and_json():
    rep = scoring.corpus_report(ITEMS)
    assert set(rep) == {"per_utterance", "aggregate"}
    assert set(rep["aggregate"]) == {"edit", "mdd", "insertions_excluded"}
    assert set(rep["aggregate"]["edit"]) == {"S", "D", "I", "N", "correctness", "accuracy"}
    assert set(rep["aggregate"]["mdd"]) == {"TA", "FR", "FA", "TR", "CD", "DE", "frr", "far",
                                            "detection_accuracy", "precision", "recall", "f_measure", "der"}
    assert json.loads(scoring.report_json(rep)) == rep


def test_report_rejects_empty():
    with pytest.raises(ValueError):
        scoring.corpus_report([])


def test_table_has_fixed_columns():
    row = scoring.table_row("APL", scoring.corpus_report(ITEMS))
    text = scoring.format_table([row])
    header = text.splitlines()[0].split()
    assert header == ["variant", "correctness", "accuracy", "FRR", "FAR", "detection_accuracy",
                      "precision", "recall", "f_measure", "DER"]
    assert text.splitlines()[2].split()[0] == "APL"
