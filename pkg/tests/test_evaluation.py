import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import oracle_f1, oracle_rand, oracle_token_counts
from logprompt.core import AnomalyVerdict, Label, Task
from logprompt.evaluation import (
    ConfusionCounts,
    EvalReport,
    anomaly_f1,
    group_sessions,
    parsing_f1,
    parsing_report,
    parsing_token_confusion,
    prompt_score,
    rand_index,
    rating_summary,
    session_report,
)

A, N = Label.ABNORMAL, Label.NORMAL


# examples -----------------------------------------------------------------

def test_token_confusion_examples():
    assert parsing_token_confusion("a <*> b", "a <*> b") == ConfusionCounts(tp=1, tn=2)
    assert parsing_token_confusion("a b c", "a <*> c") == ConfusionCounts(fn=1, tn=2)
    assert parsing_token_confusion("<*> <*> <*>", "a <*> c") == ConfusionCounts(tp=1, fp=2)


def test_token_confusion_padding():
    assert parsing_token_confusion("a <*>", "a <*> <*> b") == ConfusionCounts(tp=1, tn=2, fn=1)
    assert parsing_token_confusion("a <*> <*>", "a") == ConfusionCounts(tn=1, fp=2)


def test_parsing_f1_examples():
    assert parsing_f1([("a <*>", "a <*>"), ("x <*> y", "x <*> y")]).f1 == 1.0
    r = parsing_f1([("a b", "a <*>")])
    assert r.recall == 0.0 and r.f1 == 0.0 and r.precision is None


def test_parsing_f1_all_static_undefined():
    r = parsing_f1([("a b", "a b")])
    assert r.precision is None and r.recall is None and r.f1 is None
    assert r.to_dict()["f1"] is None


FIVE_PAIRS = [
    ("Connection from <*> closed", "Connection from <*> closed"),
    ("generating <*>", "generating core.<*>"),
    ("<*> <*> alignment exceptions", "<*> double-hummer alignment exceptions"),
    ("user root logged in", "user <*> logged in"),
    ("send <*> bytes to <*> port <*>", "send <*> bytes to <*>"),
]


def test_parsing_f1_five_pair_fixture():
    # by hand: tp=1+1+1+0+2=5, fp=0+0+1+0+1=2, fn=0+0+0+1+0=1
    r = parsing_f1(FIVE_PAIRS)
    assert (r.counts.tp, r.counts.fp, r.counts.fn) == (5, 2, 1)
    assert r.f1 == pytest.approx(10 / 13)
    totals = [sum(x) for x in zip(*(oracle_token_counts(p, g) for p, g in FIVE_PAIRS))]
    assert r.counts.to_dict() == dict(zip(("tp", "tn", "fp", "fn"), totals))


def test_rand_index_examples():
    assert rand_index(["x", "y", "x"], ["p", "q", "p"]) == 1.0
    assert rand_index(["x", "x"], ["p", "q"]) == 0.0
    pred = {"a": 1, "b": 1, "c": 2, "d": 2}
    gold = {"a": 1, "b": 1, "c": 1, "d": 2}
    assert rand_index(pred, gold) == 0.5


def test_rand_index_errors():
    with pytest.raises(ValueError):
        rand_index(["x"], ["y"])
    with pytest.raises(ValueError):
        rand_index({"a": 1, "b": 1}, {"a": 1, "c": 1})


def test_parsing_report_has_rand_index():
    r = parsing_report(["a <*>", "a <*>", "b"], ["a <*>", "a <*>", "b"])
    assert r.rand_index == 1.0 and r.f1 == 1.0
    assert prompt_score(r) == 1.0


def test_prompt_score():
    report = EvalReport(Task.PARSING, "token", ConfusionCounts(tp=3, fp=2, fn=2), 5, rand_index=0.8)
    assert report.f1 == pytest.approx(0.6)
    assert prompt_score(report) == pytest.approx(0.7)
    with pytest.raises(ValueError):
        prompt_score(EvalReport(Task.PARSING, "token", ConfusionCounts(tp=1), 1))


def _verdicts(labels):
    return [AnomalyVerdict(label) for label in labels]


def test_group_sessions_sizes():
    sessions = group_sessions(["t"] * 250, _verdicts([N] * 250), window=100)
    assert [len(s) for s in sessions] == [100, 100, 50]
    assert [s.start for s in sessions] == [0, 100, 200]


def test_group_sessions_any_abnormal():
    labels = [N] * 100
    labels[37] = A
    (session,) = group_sessions(["t"] * 100, _verdicts(labels), gold=[N] * 100)
    assert session.predicted is A and session.gold_label is N


def test_group_sessions_errors():
    with pytest.raises(ValueError):
        group_sessions([], [])
    with pytest.raises(ValueError):
        group_sessions(["t"], _verdicts([N]), window=0)
    with pytest.raises(ValueError):
        group_sessions(["t", "u"], _verdicts([N]))


def test_anomaly_f1_examples():
    gold = [A, N, N, A, N]
    assert anomaly_f1(gold, gold, "session").f1 == 1.0
    r = anomaly_f1([A] * 5, gold)
    assert r.recall == 1.0 and r.precision == pytest.approx(2 / 5)
    with pytest.raises(ValueError):
        anomaly_f1([A], [A, N])


def test_synthetic_stream_500():
    rng = random.Random(7)
    templates = [f"T{rng.randrange(40)}" for _ in range(500)]
    gold = [A if t in ("T3", "T17") else N for t in templates]
    pred = [A if t in ("T3", "T5") else N for t in templates]
    sessions = group_sessions(templates, _verdicts(pred), gold=gold, window=100)
    report = session_report(sessions)
    # brute force over windows
    tp = fp = fn = tn = 0
    for start in range(0, 500, 100):
        p = any(x is A for x in pred[start:start + 100])
        g = any(x is A for x in gold[start:start + 100])
        tp += p and g
        fp += p and not g
        fn += g and not p
        tn += not p and not g
    assert report.counts == ConfusionCounts(tp, tn, fp, fn)
    expected = oracle_f1(tp, fp, fn)
    assert report.f1 == pytest.approx(float(expected))
    t_report = anomaly_f1(pred, gold, "template")
    t_tp = sum(p is A and g is A for p, g in zip(pred, gold))
    t_fp = sum(p is A and g is N for p, g in zip(pred, gold))
    t_fn = sum(p is N and g is A for p, g in zip(pred, gold))
    assert t_report.f1 == pytest.approx(float(oracle_f1(t_tp, t_fp, t_fn)))


def test_rating_examples():
    assert rating_summary([5, 5, 5, 5]) == (5.0, 1.0)
    assert rating_summary([4, 4, 3, 5], threshold=4) == (4.0, 0.75)
    assert rating_summary([1, 2, 3])[1] == 0.0
    assert rating_summary([4, 4, 3, 5], mode="strict")[1] == 0.25


@pytest.mark.parametrize("bad", [[], [0, 3], [6], [3.5]])
def test_rating_errors(bad):
    with pytest.raises(ValueError):
        rating_summary(bad)


# properties ---------------------------------------------------------------

token = st.sampled_from(["<*>", "a", "b", "id=<*>", "x"])
template = st.lists(token, min_size=1, max_size=8).map(" ".join)


@given(st.lists(st.tuples(template, template), min_size=1, max_size=25))
def test_micro_f1_matches_brute_force(pairs):
    report = parsing_f1(pairs)
    tp = fp = fn = 0
    for p, g in pairs:
        c = oracle_token_counts(p, g)
        tp, fp, fn = tp + c[0], fp + c[2], fn + c[3]
    expected = oracle_f1(tp, fp, fn)
    if expected is None:
        assert report.f1 is None
    else:
        assert report.f1 == pytest.approx(float(expected))


@given(st.lists(st.tuples(template, template), min_size=1, max_size=15), st.randoms())
def test_f1_permutation_invariant(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert parsing_f1(pairs).counts == parsing_f1(shuffled).counts


labels = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=30)


@given(labels)
def test_rand_index_oracle_and_symmetry(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    ri = rand_index(pred, gold)
    assert ri == pytest.approx(float(oracle_rand(pred, gold)))
    assert 0.0 <= ri <= 1.0
    assert ri == rand_index(gold, pred)


@given(labels)
def test_rand_index_one_iff_same_partition(pairs):
    pred = [p for p, _ in pairs]
    gold = [g for _, g in pairs]
    same = all((pred[i] == pred[j]) == (gold[i] == gold[j]) for i, j in itertools.combinations(range(len(pred)), 2))
    assert (rand_index(pred, gold) == 1.0) == same


stream = st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60)


@given(stream, st.integers(1, 20), st.data())
def test_session_monotonicity(items, window, data):
    pred = [A if p else N for p, _ in items]
    before = group_sessions(["t"] * len(pred), _verdicts(pred), window=window)
    i = data.draw(st.integers(0, len(pred) - 1))
    flipped = list(pred)
    flipped[i] = A
    after = group_sessions(["t"] * len(pred), _verdicts(flipped), window=window)
    for s0, s1 in zip(before, after):
        if s0.predicted is A:
            assert s1.predicted is A


@given(stream)
def test_window_one_equals_template_level(items):
    pred = [A if p else N for p, _ in items]
    gold = [A if g else N for _, g in items]
    sessions = group_sessions(["t"] * len(pred), _verdicts(pred), gold=gold, window=1)
    assert session_report(sessions).counts == anomaly_f1(pred, gold, "template").counts


@given(st.lists(st.integers(1, 5), min_size=1, max_size=50), st.integers(1, 5))
def test_rating_bounds(scores, threshold):
    mean, hip = rating_summary(scores, threshold)
    assert 1 <= mean <= 5 and 0 <= hip <= 1
    assert rating_summary(scores, threshold, "strict")[1] <= hip
