"""Parsing and verification of six-step reasoning traces.

Canonical trace text (the model-output side of the chain-of-logic method;
the labeled rule/facts/issue block that precedes it belongs to the prompt):

    Rule elements:
    A. <element text span>
    B. <element text span>
    Logical expression: (A and B)
    Question (A): <element rephrased as a question>
    Rationale: <free text>
    Answer: true
    Question (B): ...
    Rationale: ...
    Answer: false
    Recomposition: (true and false)
    Final answer: false

Parsing is lenient about case, blank lines, surrounding chatter and
"Step N:" prefixes; the element list may be reconstructed from the
expression when the section header is missing entirely.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Mapping

from . import logic


class AnswerFormat(enum.Enum):
    YES_NO = "yes_no"
    TRUE_FALSE = "true_false"


class ErrorClass(enum.Enum):
    NONE = "none"
    PARSE_FAILURE = "parse_failure"
    INCOMPLETE_DECOMPOSITION = "incomplete_decomposition"
    LOGIC_ERROR = "logic_error"
    ELEMENT_ERROR = "element_error"
    AMBIGUOUS_ANSWER = "ambiguous_answer"


class TraceParseError(ValueError):
    """Raised by parse_trace, naming the first missing or malformed section."""

    def __init__(self, section: str, message: str):
        super().__init__(f"{section}: {message}")
        self.section = section
        self.reason = message


@dataclass(frozen=True)
class QaStep:
    variable: str
    question: str
    rationale: str
    answer: bool


@dataclass(frozen=True)
class ReasoningTrace:
    elements: tuple[tuple[str, str], ...]
    expression_text: str
    expression: logic.Expr
    qa: tuple[QaStep, ...]
    recomposition_text: str
    model_final: bool
    raw: str = field(compare=False, default="")

    def assignment(self) -> dict[str, bool]:
        """QA answers as a variable assignment; later answers win on duplicates."""
        return {step.variable: step.answer for step in self.qa}

    def is_complete(self) -> bool:
        return set(logic.variables(self.expression)) <= self.assignment().keys()

    def to_dict(self) -> dict:
        return {
            "elements": [list(pair) for pair in self.elements],
            "expression": self.expression_text,
            "qa": [
                {
                    "variable": s.variable,
                    "question": s.question,
                    "rationale": s.rationale,
                    "answer": s.answer,
                }
                for s in self.qa
            ],
            "recomposition": self.recomposition_text,
            "final": self.model_final,
            "complete": self.is_complete(),
        }


@dataclass(frozen=True)
class Verdict:
    independent_answer: bool | None
    faithful: bool
    error_class: ErrorClass
    correct: bool | None = None
    element_errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "independent_answer": self.independent_answer,
            "faithful": self.faithful,
            "error_class": self.error_class.value,
            "correct": self.correct,
            "element_errors": list(self.element_errors),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_STEP_PREFIX = r"(?:step\s*\d+\s*[:.\-]?\s*)?"
_VAR = r"[A-Za-z_][A-Za-z0-9_]*"
_ELEMENTS_HEADER_RE = re.compile(rf"^{_STEP_PREFIX}(?:rule\s+)?elements\s*:?\s*$", re.I)
_ELEMENT_LINE_RE = re.compile(rf"^({_VAR})[.):]\s+(\S.*?)\s*$")
_EXPRESSION_RE = re.compile(rf"^{_STEP_PREFIX}logical\s+expression\s*:\s*(.+?)\s*$", re.I)
_QUESTION_RE = re.compile(rf"^{_STEP_PREFIX}question\s*\(?\s*({_VAR})\s*\)?\s*:\s*(.*?)\s*$", re.I)
_RATIONALE_LABEL_RE = re.compile(r"^rationale\s*:\s*", re.I)
_ANSWER_RE = re.compile(rf"^answer\s*(?:\(\s*{_VAR}\s*\))?\s*:\s*(true|false)\b", re.I)
_RECOMPOSITION_RE = re.compile(rf"^{_STEP_PREFIX}recomposition\s*:\s*(.+?)\s*$", re.I)
_FINAL_RE = re.compile(rf"^{_STEP_PREFIX}final\s+answer\s*:\s*(true|false)\b", re.I)


def _parsable_expression(line: str) -> logic.Expr | None:
    """Best-effort: a bare line that parses and mentions at least one variable."""
    try:
        expr = logic.parse(line)
    except logic.ExpressionError:
        return None
    return expr if logic.variables(expr) else None


def parse_trace(text: str) -> ReasoningTrace:
    lines = [line.strip() for line in text.splitlines()]

    # Elements: a contiguous block of "X. span" lines after the header.
    elements: list[tuple[str, str]] = []
    seen: set[str] = set()
    header_idx = None
    for i, line in enumerate(lines):
        if _ELEMENTS_HEADER_RE.match(line):
            header_idx = i
            break
    elements_end = 0
    if header_idx is not None:
        elements_end = header_idx + 1
        for i in range(header_idx + 1, len(lines)):
            if not lines[i]:
                continue
            m = _ELEMENT_LINE_RE.match(lines[i])
            if m is None:
                break
            variable, span = m.group(1), m.group(2)
            if variable in seen:
                raise TraceParseError("elements", f"duplicate variable {variable!r}")
            seen.add(variable)
            elements.append((variable, span))
            elements_end = i + 1

    expr_idx = None
    expression: logic.Expr | None = None
    expression_text = ""
    for i in range(elements_end, len(lines)):
        m = _EXPRESSION_RE.match(lines[i])
        if m:
            expression_text = m.group(1)
            try:
                expression = logic.parse(expression_text)
            except logic.ExpressionError as exc:
                raise TraceParseError("expression", str(exc)) from exc
            expr_idx = i
            break
    if expression is None:
        # Recovery path: an unlabeled expression-like line after the elements.
        for i in range(elements_end, len(lines)):
            candidate = _parsable_expression(lines[i]) if lines[i] else None
            if candidate is not None:
                expression = candidate
                expression_text = lines[i]
                expr_idx = i
                break
    if expression is None or expr_idx is None:
        section = "expression" if elements else "elements"
        raise TraceParseError(section, f"no {section} section found")

    if not elements:
        elements = [(name, "") for name in logic.variables(expression)]
        seen = {name for name, _ in elements}
    for name in logic.variables(expression):
        if name not in seen:
            raise TraceParseError("expression", f"undeclared variable {name!r}")

    qa: list[QaStep] = []
    i = expr_idx + 1
    qa_end = expr_idx
    while i < len(lines):
        m = _QUESTION_RE.match(lines[i])
        if m is None:
            if _RECOMPOSITION_RE.match(lines[i]) or _FINAL_RE.match(lines[i]):
                break
            i += 1
            continue
        variable, question = m.group(1), m.group(2)
        rationale_lines: list[str] = []
        answer: bool | None = None
        i += 1
        while i < len(lines):
            if _QUESTION_RE.match(lines[i]) or _RECOMPOSITION_RE.match(lines[i]) or _FINAL_RE.match(lines[i]):
                break
            am = _ANSWER_RE.match(lines[i])
            if am:
                answer = am.group(1).lower() == "true"
                i += 1
                break
            if lines[i]:
                rationale_lines.append(_RATIONALE_LABEL_RE.sub("", lines[i]))
            i += 1
        if answer is None:
            raise TraceParseError("qa", f"question ({variable}) has no true/false answer")
        qa.append(QaStep(variable, question, " ".join(rationale_lines), answer))
        qa_end = i - 1
    if not qa:
        raise TraceParseError("qa", "no question/answer blocks found")

    recomposition = None
    rec_idx = qa_end
    for j in range(qa_end, len(lines)):
        m = _RECOMPOSITION_RE.match(lines[j])
        if m:
            recomposition = m.group(1)
            rec_idx = j
            break
    if recomposition is None:
        raise TraceParseError("recomposition", "no recomposition line found")

    final = None
    for j in range(rec_idx + 1, len(lines)):
        m = _FINAL_RE.match(lines[j])
        if m:
            final = m.group(1).lower() == "true"
            break
    if final is None:
        raise TraceParseError("final", "no final-answer line found")

    return ReasoningTrace(
        elements=tuple(elements),
        expression_text=expression_text,
        expression=expression,
        qa=tuple(qa),
        recomposition_text=recomposition,
        model_final=final,
        raw=text,
    )


def render_trace(trace: ReasoningTrace) -> str:
    """Canonical text for a trace; parse_trace(render_trace(t)) == t."""
    lines = ["Rule elements:"]
    lines += [f"{variable}. {span}" for variable, span in trace.elements]
    lines.append(f"Logical expression: {trace.expression_text}")
    for step in trace.qa:
        lines.append(f"Question ({step.variable}): {step.question}")
        if step.rationale:
            lines.append(f"Rationale: {step.rationale}")
        lines.append(f"Answer: {'true' if step.answer else 'false'}")
    lines.append(f"Recomposition: {trace.recomposition_text}")
    lines.append(f"Final answer: {'true' if trace.model_final else 'false'}")
    return "\n".join(lines)


_ANSWER_REGION_RE = re.compile(r"(?:final\s+answer|answer\s+is|answer)\s*[:\-]?", re.I)
_TOKENS = {
    AnswerFormat.TRUE_FALSE: (re.compile(r"\btrue\b", re.I), re.compile(r"\bfalse\b", re.I)),
    AnswerFormat.YES_NO: (re.compile(r"\byes\b", re.I), re.compile(r"\bno\b", re.I)),
}


def extract_answer(text: str, answer_format: AnswerFormat) -> bool | None:
    """Boolean read off the final-answer region, or None when absent/conflicting."""
    region = text
    last = None
    for m in _ANSWER_REGION_RE.finditer(text):
        last = m
    if last is not None:
        region = text[last.end():]
    elif "\n" in text.strip():
        region = text.strip().rsplit("\n", 1)[-1]
    positive, negative = _TOKENS[answer_format]
    has_pos = positive.search(region) is not None
    has_neg = negative.search(region) is not None
    if has_pos == has_neg:  # zero or conflicting tokens
        return None
    return has_pos


def verify(
    trace: ReasoningTrace,
    gold: bool | None = None,
    element_gold: Mapping[str, bool] | None = None,
) -> Verdict:
    """Re-resolve the trace's own expression under its own sub-answers."""
    assignment = trace.assignment()
    required = logic.variables(trace.expression)
    missing = [name for name in required if name not in assignment]
    correct = None if gold is None else trace.model_final == gold
    if missing:
        return Verdict(
            independent_answer=None,
            faithful=False,
            error_class=ErrorClass.INCOMPLETE_DECOMPOSITION,
            correct=correct,
        )

    independent = logic.evaluate(trace.expression, assignment)
    warnings: list[str] = []
    expected_recomposition = logic.substitute(trace.expression, assignment)
    try:
        stated = logic.parse(trace.recomposition_text)
    except logic.ExpressionError:
        stated = None
    if stated != logic.parse(expected_recomposition):
        warnings.append(f"recomposition mismatch: expected {expected_recomposition}")

    if trace.model_final != independent:
        return Verdict(
            independent_answer=independent,
            faithful=False,
            error_class=ErrorClass.LOGIC_ERROR,
            correct=correct,
            warnings=tuple(warnings),
        )

    element_errors: tuple[str, ...] = ()
    error_class = ErrorClass.NONE
    if element_gold:
        wrong = tuple(
            name for name in sorted(element_gold) if name in assignment and assignment[name] != element_gold[name]
        )
        if wrong:
            element_errors = wrong
            error_class = ErrorClass.ELEMENT_ERROR

    return Verdict(
        independent_answer=independent,
        faithful=True,
        error_class=error_class,
        correct=correct,
        element_errors=element_errors,
        warnings=tuple(warnings),
    )
