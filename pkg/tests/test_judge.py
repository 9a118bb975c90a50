from fractions import Fraction

import pytest

from surveygen.errors import ScoreParseError
from surveygen.fakes import OfflineChat, ScriptedChat
from surveygen.judge import (
    ASPECTS,
    Rubric,
    build_prompt,
    evaluate_batch,
    evaluate_survey,
    load_rubric,
    parse_score,
)


def toy_rubric():
    return Rubric(aspect="coverage", criterion="CRITERION-TEXT",
                  score_descriptions=("S1-TEXT", "S2-TEXT", "S3-TEXT",
                                      "S4-TEXT", "S5-TEXT"))


def test_prompt_is_exact_template():
    prompt = build_prompt("SURVEY-BODY", "Topic X", toy_rubric())
    assert prompt == (
        'Here is an academic survey about the topic "Topic X":\n'
        "---\n"
        "SURVEY-BODY\n"
        "---\n"
        'Please evaluate this survey about the topic "Topic X" based on the '
        "criteria above provided below, and give a score from 1 to 5 according "
        "to the score description:\n"
        "---\n"
        "Criterion Description: CRITERION-TEXT\n"
        "---\n"
        "Score 1 Description: S1-TEXT\n"
        "Score 2 Description: S2-TEXT\n"
        "Score 3 Description: S3-TEXT\n"
        "Score 4 Description: S4-TEXT\n"
        "Score 5 Description: S5-TEXT\n"
        "---\n"
        "Return the score without any other information:")


def test_prompt_assembly_is_pure():
    a = build_prompt("same {body} with braces", "t", toy_rubric())
    b = build_prompt("same {body} with braces", "t", toy_rubric())
    assert a == b
    assert "{body}" in a


@pytest.mark.parametrize("reply,score", [
    ("4", 4), (" 4 ", 4), ("\n5\n", 5), ("1", 1),
])
def test_parse_accepts_bare_integers(reply, score):
    assert parse_score(reply) == score


@pytest.mark.parametrize("reply", ["0", "6", "45", "4.0", "Score: 4/5", "four", ""])
def test_parse_rejects_everything_else(reply):
    with pytest.raises(ScoreParseError):
        parse_score(reply)


def test_evaluate_first_try():
    chat = ScriptedChat(sequence=["4"])
    result = evaluate_survey(chat, "body", "t", toy_rubric(), "j1")
    assert result.score == 4
    assert result.aspect == "coverage"
    assert result.judge == "j1"
    assert len(chat.calls) == 1


def test_evaluate_reprompts_once():
    chat = ScriptedChat(sequence=["Score: 4/5", "4"])
    result = evaluate_survey(chat, "body", "t", toy_rubric())
    assert result.score == 4
    assert len(chat.calls) == 2
    assert "only a single integer" in chat.calls[1].messages[-1].content


def test_evaluate_fails_after_two_bad_replies():
    chat = ScriptedChat(sequence=["four", "four again"])
    with pytest.raises(ScoreParseError):
        evaluate_survey(chat, "body", "t", toy_rubric())
    assert len(chat.calls) == 2


def test_bundled_rubrics_load():
    for aspect in ASPECTS:
        rubric = load_rubric(aspect)
        assert rubric.aspect == aspect
        assert rubric.criterion
        assert len(rubric.score_descriptions) == 5
        assert all(rubric.score_descriptions)
    with pytest.raises(ValueError):
        load_rubric("vibes")


def test_batch_degenerate_all_fives():
    judges = {"j1": ScriptedChat(rules=[(r".", "5")])}
    result = evaluate_batch([("s1", "topic", "text")], judges)
    assert len(result.cells) == 3
    assert result.means == {"coverage": Fraction(5), "structure": Fraction(5),
                            "relevance": Fraction(5)}


def test_batch_mean_is_exact_rational():
    judges = {
        "j4": ScriptedChat(rules=[(r".", "4")]),
        "j5": ScriptedChat(rules=[(r".", "5")]),
    }
    result = evaluate_batch([("s1", "t", "x")], judges, aspects=("coverage",))
    assert result.means["coverage"] == Fraction(9, 2)


def test_batch_cross_product_shape():
    judges = {"a": ScriptedChat(rules=[(r".", "3")]),
              "b": ScriptedChat(rules=[(r".", "3")])}
    surveys = [(f"s{i}", f"t{i}", "body") for i in range(4)]
    result = evaluate_batch(surveys, judges)
    assert len(result.cells) == 4 * 3 * 2
    keys = {(c.survey_id, c.aspect, c.judge) for c in result.cells}
    assert len(keys) == 24


def test_batch_partial_failure_recorded():
    judges = {
        "good": ScriptedChat(rules=[(r".", "4")]),
        "bad": ScriptedChat(rules=[(r".", "never a number")]),
    }
    result = evaluate_batch([("s1", "t", "x")], judges, aspects=("coverage",))
    by_judge = {c.judge: c for c in result.cells}
    assert by_judge["good"].score == 4
    assert by_judge["bad"].score is None
    assert by_judge["bad"].error
    assert result.means["coverage"] == Fraction(4)


def test_batch_requires_surveys():
    with pytest.raises(ValueError):
        evaluate_batch([], {"j": ScriptedChat()})


def test_offline_chat_judges_three():
    result = evaluate_survey(OfflineChat(), "body", "t", toy_rubric())
    assert result.score == 3


def test_delimited_table_layout():
    judges = {"j1": ScriptedChat(rules=[(r".", "2")])}
    result = evaluate_batch([("s1", "topic one", "x")], judges,
                            aspects=("coverage", "structure"))
    table = result.to_delimited()
    lines = table.splitlines()
    assert lines[0] == "survey\ttopic\taspect\tjudge\tscore\terror"
    assert "s1\ttopic one\tcoverage\tj1\t2\t" in lines
    assert any(line.startswith("mean\t\tcoverage") for line in lines)
