"""Rubric-based answer grading through a generation backend.

The grading prompt is frozen: a fixed task description, a fixed five-level
correctness rubric, and three slots (instruction, response, reference
answer). The verdict is the integer after the last ``[RESULT]`` marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..backends import GenerationParams, Generator

JUDGE_PROMPT_TEMPLATE = """###Task Description:
An instruction (might include an Input inside it), a response to evaluate, a
reference answer that gets a score of 5, and a score rubric representing a
evaluation criteria are given.
1. Write detailed feedback that assesses the quality of the response strictly
based on the given score rubric, not evaluating in general.
2. After writing a feedback, write a score that is an integer between 1 and
5. You should refer to the score rubric.
3. The output format should look as follows: "Feedback: {{write a feedback
for criteria}} [RESULT] {{an integer number between 1 and 5}}"
4. Please do not generate any other opening, closing, and explanations. Be
sure to include [RESULT] in your output.

###The instruction to evaluate:
{instruction}

###Response to evaluate:
{response}

###Reference Answer (Score 5):
{reference_answer}

###Score Rubrics:
[Is the response correct, accurate, and factual based on the reference
answer?]
Score 1: The response is completely incorrect, inaccurate, and/or not factual.
Score 2: The response is mostly incorrect, inaccurate, and/or not factual.
Score 3: The response is somewhat correct, accurate, and/or factual.
Score 4: The response is mostly correct, accurate, and factual.
Score 5: The response is completely correct, accurate, and factual.
###Feedback:"""

_RESULT_RE = re.compile(r"\[RESULT\]\s*(\d+)")


class JudgeParseError(Exception):
    """No usable ``[RESULT] n`` marker in the judge output."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class JudgeVerdict:
    score: int
    feedback: str
    raw: str


def render_judge_prompt(instruction: str, response: str, reference_answer: str) -> str:
    # plain replacement: the template's literal {{...}} braces must survive
    return (
        JUDGE_PROMPT_TEMPLATE.replace("{instruction}", instruction)
        .replace("{response}", response)
        .replace("{reference_answer}", reference_answer)
    )


def parse_judge_output(raw: str) -> JudgeVerdict:
    found = list(_RESULT_RE.finditer(raw))
    if not found:
        raise JudgeParseError("no [RESULT] marker followed by an integer", raw)
    last = found[-1]
    score = int(last.group(1))
    if not 1 <= score <= 5:
        raise JudgeParseError(f"score {score} outside 1..5", raw)
    feedback = raw[: last.start()].strip()
    if feedback.lower().startswith("feedback:"):
        feedback = feedback[len("feedback:") :].strip()
    return JudgeVerdict(score=score, feedback=feedback, raw=raw)


def judge_rubric(
    instruction: str,
    response: str,
    reference_answer: str,
    generator: Generator,
    params: GenerationParams | None = None,
) -> JudgeVerdict:
    """Grade ``response`` against ``reference_answer`` on the fixed rubric."""
    prompt = render_judge_prompt(instruction, response, reference_answer)
    raw = generator.generate(prompt, params)
    return parse_judge_output(raw)
