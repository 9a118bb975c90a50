"""Rubric-based scoring of generated surveys by an LLM judge.

The prompt is a fixed template with slots for the topic, the survey text, and
a rubric (criterion description plus five score descriptions). Rubrics live
in editable JSON files shipped as package data. Responses must be a bare
integer 1-5; anything else gets one re-prompt and then fails.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from . import providers
from .errors import ScoreParseError
from .providers import chat_request

ASPECTS = ("coverage", "structure", "relevance")

PROMPT_TEMPLATE = '''Here is an academic survey about the topic "{topic}":
---
{survey}
---
Please evaluate this survey about the topic "{topic}" based on the criteria above provided below, and give a score from 1 to 5 according to the score description:
---
Criterion Description: {criterion}
---
Score 1 Description: {score1}
Score 2 Description: {score2}
Score 3 Description: {score3}
Score 4 Description: {score4}
Score 5 Description: {score5}
---
Return the score without any other information:'''

RETRY_REMINDER = ("\n\nYour previous reply was not a bare integer. "
                  "Return only a single integer from 1 to 5.")


@dataclass(frozen=True)
class Rubric:
    aspect: str
    criterion: str
    score_descriptions: tuple[str, str, str, str, str]


def _rubric_from_dict(data: dict) -> Rubric:
    scores = data["scores"]
    return Rubric(aspect=data["aspect"], criterion=data["criterion"],
                  score_descriptions=tuple(scores[str(i)] for i in range(1, 6)))


def load_rubric(aspect: str) -> Rubric:
    if aspect not in ASPECTS:
        raise ValueError(f"unknown aspect {aspect!r}; expected one of {ASPECTS}")
    text = resources.files("surveygen.rubrics").joinpath(f"{aspect}.json").read_text(
        encoding="utf-8")
    return _rubric_from_dict(json.loads(text))


def load_rubric_file(path: str) -> Rubric:
    with open(path, encoding="utf-8") as fh:
        return _rubric_from_dict(json.load(fh))


def build_prompt(survey: str, topic: str, rubric: Rubric) -> str:
    s = rubric.score_descriptions
    return PROMPT_TEMPLATE.format(topic=topic, survey=survey,
                                  criterion=rubric.criterion,
                                  score1=s[0], score2=s[1], score3=s[2],
                                  score4=s[3], score5=s[4])


def parse_score(reply: str) -> int:
    value = reply.strip()
    if value in ("1", "2", "3", "4", "5"):
        return int(value)
    raise ScoreParseError(f"judge reply is not a bare 1-5 integer: {reply[:80]!r}")


@dataclass(frozen=True)
class JudgeScore:
    aspect: str
    judge: str
    score: int
    raw_response: str


def evaluate_survey(chat, survey: str, topic: str, rubric: Rubric,
                    judge_name: str = "judge") -> JudgeScore:
    prompt = build_prompt(survey, topic, rubric)
    reply = chat.complete(chat_request(prompt, providers.PURPOSE_JUDGE))
    try:
        score = parse_score(reply)
    except ScoreParseError:
        reply = chat.complete(chat_request(prompt + RETRY_REMINDER,
                                           providers.PURPOSE_JUDGE))
        score = parse_score(reply)
    return JudgeScore(aspect=rubric.aspect, judge=judge_name, score=score,
                      raw_response=reply)


@dataclass(frozen=True)
class BatchCell:
    survey_id: str
    topic: str
    aspect: str
    judge: str
    score: int | None
    error: str = ""


@dataclass(frozen=True)
class BatchResult:
    cells: tuple[BatchCell, ...]
    means: dict[str, Fraction]

    def to_delimited(self) -> str:
        lines = ["survey\ttopic\taspect\tjudge\tscore\terror"]
        for c in self.cells:
            score = "" if c.score is None else str(c.score)
            lines.append(f"{c.survey_id}\t{c.topic}\t{c.aspect}\t{c.judge}\t"
                         f"{score}\t{c.error}")
        lines.append("")
        for aspect in sorted(self.means):
            mean = self.means[aspect]
            lines.append(f"mean\t\t{aspect}\t\t{float(mean):.4f}\t")
        return "\n".join(lines) + "\n"


def evaluate_batch(surveys, judges, aspects=ASPECTS, rubrics=None,
                   max_workers: int = 4) -> BatchResult:
    """surveys: list of (survey_id, topic, text); judges: dict name -> chat.

    Every (survey, aspect, judge) cell is evaluated; failures are recorded in
    the cell and means are exact rationals over the successful cells.
    """
    if not surveys:
        raise ValueError("at least one survey required")
    rubrics = rubrics or {aspect: load_rubric(aspect) for aspect in aspects}
    tasks = [(sid, topic, text, aspect, judge_name)
             for sid, topic, text in surveys
             for aspect in aspects
             for judge_name in judges]

    def run(task):
        sid, topic, text, aspect, judge_name = task
        try:
            result = evaluate_survey(judges[judge_name], text, topic,
                                     rubrics[aspect], judge_name)
            return BatchCell(sid, topic, aspect, judge_name, result.score)
        except Exception as exc:
            return BatchCell(sid, topic, aspect, judge_name, None, str(exc)[:200])

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        cells = tuple(pool.map(run, tasks))
    means: dict[str, Fraction] = {}
    for aspect in aspects:
        scored = [c.score for c in cells if c.aspect == aspect and c.score is not None]
        if scored:
            means[aspect] = Fraction(sum(scored), len(scored))
    return BatchResult(cells=cells, means=means)
