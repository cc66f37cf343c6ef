import pytest
from hypothesis import given
from hypothesis import strategies as st

from logprompt.core import Label, ParsedAnswer, Task, TokenKind
from logprompt.responses import (
    VerdictError,
    normalize_template,
    normalize_verdict,
    parse_numbered_answers,
    response_validator,
    validate_coverage,
)


def test_parse_two_verdicts():
    answers, diag = parse_numbered_answers(
        "(1) normal - no alert present\n(2) abnormal - kernel error keyword", 2, Task.ANOMALY
    )
    assert [(a.ordinal, a.answer, a.reason) for a in answers] == [
        (1, "normal", "no alert present"),
        (2, "abnormal", "kernel error keyword"),
    ]
    assert [normalize_verdict(a.answer) for a in answers] == [Label.NORMAL, Label.ABNORMAL]
    assert diag.valid


def test_parse_omission():
    answers, diag = parse_numbered_answers("(1) ok - fine", 2)
    assert len(answers) == 1
    assert diag.missing_ordinals == [2]
    assert not diag.valid


def test_parse_tolerates_preamble():
    answers, diag = parse_numbered_answers("preamble text\n(1) A <*> B - variable is an id", 1)
    assert diag.extra_lines == ["preamble text"]
    assert answers == [ParsedAnswer(1, "A <*> B", "variable is an id")]
    assert diag.valid


def test_parse_first_separator_keeps_reason_hyphens():
    answers, _ = parse_numbered_answers("(1) job <*> done - the id - a number - varies", 1)
    assert answers[0].answer == "job <*> done"
    assert answers[0].reason == "the id - a number - varies"


def test_parse_template_hyphens_inside_tokens():
    answers, _ = parse_numbered_answers("(1) <*> double-hummer alignment exceptions - count varies", 1)
    assert answers[0].answer == "<*> double-hummer alignment exceptions"


def test_parse_anomaly_bare_hyphen():
    answers, _ = parse_numbered_answers("(1) abnormal-kernel panic - fatal", 1, Task.ANOMALY)
    assert answers[0].answer == "abnormal"
    assert answers[0].reason == "kernel panic - fatal"


def test_parse_duplicates_first_wins():
    answers, diag = parse_numbered_answers("(1) a - x\n(1) b - y\n(2) c - z", 2)
    assert [a.answer for a in answers] == ["a", "c"]
    assert diag.duplicate_ordinals == [1]


def test_parse_out_of_range_is_extra():
    answers, diag = parse_numbered_answers("(1) a - x\n(3) b - y\n(0) c", 1)
    assert len(answers) == 1
    assert diag.extra_lines == ["(3) b - y", "(0) c"]


def test_parse_sorted_by_ordinal():
    answers, _ = parse_numbered_answers("(2) b - y\n(1) a - x", 2)
    assert [a.ordinal for a in answers] == [1, 2]


def test_parse_requires_positive_n():
    with pytest.raises(ValueError):
        parse_numbered_answers("(1) a", 0)


def test_parse_leading_space_lines():
    answers, diag = parse_numbered_answers("(1) a - x\n (2) b - y", 2)
    assert diag.valid and answers[1].answer == "b"


def test_normalize_angle_wildcard():
    t = normalize_template("Connection from 〈*〉 closed")
    assert [tok.kind for tok in t.tokens] == [TokenKind.STATIC, TokenKind.STATIC, TokenKind.VARIABLE, TokenKind.STATIC]
    assert t.text == "Connection from <*> closed"


def test_normalize_identity():
    assert normalize_template("took <*> ms").text == "took <*> ms"


def test_normalize_rewrite_table():
    assert normalize_template("send [*] bytes  to {*}").text == "send <*> bytes to <*>"


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("user {{variable}} logged in", "user <*> logged in"),
        ("port <VAR> open", "port <*> open"),
        ("retry * of *", "retry <*> of <*>"),
        ("a*b stays", "a*b stays"),
        ("`quoted <*>`", "quoted <*>"),
        ('"quoted <*>"', "quoted <*>"),
        ("''nested''", "nested"),
        ("id=<*> done", "id=<*> done"),
    ],
)
def test_normalize_spellings(raw, expected):
    assert normalize_template(raw).text == expected


def test_normalize_mixed_token_is_variable():
    assert normalize_template("id=<*> done").n_variables == 1


def test_normalize_notes():
    notes = []
    normalize_template("a {*} b", notes)
    assert notes == ["{*} -> <*>"]


@pytest.mark.parametrize("raw", ["", "   ", "''"])
def test_normalize_empty(raw):
    with pytest.raises(ValueError):
        normalize_template(raw)


@pytest.mark.parametrize(
    "raw, label",
    [
        ("Abnormal", Label.ABNORMAL),
        ("0", Label.NORMAL),
        ("1", Label.ABNORMAL),
        ("the log is normal.", Label.NORMAL),
        ("ANOMALY detected", Label.ABNORMAL),
        ("anomalous", Label.ABNORMAL),
        ("normal, not abnormal", Label.NORMAL),
    ],
)
def test_normalize_verdict(raw, label):
    assert normalize_verdict(raw) is label


@pytest.mark.parametrize("raw", ["maybe", "", "10", "abnormally"])
def test_verdict_rejects_unknown(raw):
    with pytest.raises(VerdictError):
        normalize_verdict(raw)


def _answers(ordinals, answer="x"):
    return [ParsedAnswer(i, answer, "") for i in ordinals]


def test_coverage_examples():
    assert validate_coverage(_answers([1, 2, 3]), 3)
    assert not validate_coverage(_answers([1, 3]), 3)
    assert not validate_coverage([ParsedAnswer(1, "normal", ""), ParsedAnswer(2, "maybe", "")], 2, Task.ANOMALY)
    assert validate_coverage([ParsedAnswer(1, "normal", ""), ParsedAnswer(2, "1", "")], 2, Task.ANOMALY)


def test_coverage_rejects_blank_template():
    assert not validate_coverage(_answers([1], answer=" "), 1)


def test_response_validator():
    check = response_validator(2, "anomaly")
    assert check("(1) normal - a\n(2) abnormal - b")[2]
    assert not check("(1) normal - a")[2]
    assert not check("(1) normal - a\n(2) perhaps - b")[2]


@given(st.text(), st.integers(1, 50), st.sampled_from(list(Task)))
def test_parser_totality(text, n, task):
    answers, diag = parse_numbered_answers(text, n, task)
    ordinals = [a.ordinal for a in answers]
    assert ordinals == sorted(set(ordinals))
    assert sorted(ordinals + diag.missing_ordinals) == list(range(1, n + 1))
    assert diag.valid == (not diag.missing_ordinals)


@given(st.lists(st.sampled_from(["<*>", "〈*〉", "{*}", "[*]", "*", "<VAR>", "{{variable}}", "a", "b-c", "x=1", "  "]),
                min_size=1).map(" ".join).filter(str.strip))
def test_normalize_idempotent(text):
    once = normalize_template(text).text
    assert normalize_template(once).text == once


@given(st.text(min_size=1).filter(str.strip))
def test_normalize_idempotent_any_text(text):
    try:
        once = normalize_template(text).text
    except ValueError:
        return
    assert normalize_template(once).text == once


@given(st.text())
def test_verdict_total_or_explicit_error(text):
    try:
        label = normalize_verdict(text)
    except VerdictError:
        return
    assert label in (Label.ABNORMAL, Label.NORMAL)
