import dataclasses
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainlogic import logic, traces
from chainlogic.traces import AnswerFormat, ErrorClass, TraceParseError

from helpers import random_trace

WELL_FORMED = """\
Rule elements:
A. complete diversity between plaintiffs and defendants
B. the amount-in-controversy is greater than $75k
Logical expression: (A and B)
Question (A): Is there complete diversity?
Rationale: Both parties are from Arizona.
Answer: false
Question (B): Is the amount-in-controversy greater than $75k?
Rationale: The claim is for $64,000.
Answer: false
Recomposition: (false and false)
Final answer: false
"""


class TestParseTrace:
    def test_well_formed(self):
        trace = traces.parse_trace(WELL_FORMED)
        assert [v for v, _ in trace.elements] == ["A", "B"]
        assert trace.expression == logic.parse("A and B")
        assert trace.assignment() == {"A": False, "B": False}
        assert trace.recomposition_text == "(false and false)"
        assert trace.model_final is False
        assert trace.is_complete()

    def test_missing_recomposition_section(self):
        text = "\n".join(
            line for line in WELL_FORMED.splitlines() if not line.startswith("Recomposition")
        )
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace(text)
        assert exc.value.section == "recomposition"

    def test_missing_final_answer(self):
        text = "\n".join(
            line for line in WELL_FORMED.splitlines() if not line.startswith("Final answer")
        )
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace(text)
        assert exc.value.section == "final"

    def test_incomplete_qa_parses_with_completeness_flag(self):
        text = """\
Rule elements:
A. first condition
B. second condition
C. third condition
Logical expression: (A or (B and C))
Question (A): Does the first condition hold?
Answer: false
Question (B): Does the second condition hold?
Answer: true
Recomposition: (false or (true and C))
Final answer: true
"""
        trace = traces.parse_trace(text)
        assert not trace.is_complete()
        assert trace.assignment() == {"A": False, "B": True}

    def test_duplicate_element_variable_rejected(self):
        text = WELL_FORMED.replace("B. the amount", "A. the amount", 1)
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace(text)
        assert exc.value.section == "elements"

    def test_undeclared_expression_variable_rejected(self):
        text = WELL_FORMED.replace("(A and B)", "(A and B and D)")
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace(text)
        assert exc.value.section == "expression"

    def test_expression_syntax_error_is_parse_failure(self):
        text = WELL_FORMED.replace("(A and B)", "(A and or B)")
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace(text)
        assert exc.value.section == "expression"

    def test_no_qa_blocks(self):
        lines = [
            line
            for line in WELL_FORMED.splitlines()
            if not line.startswith(("Question", "Rationale", "Answer"))
        ]
        with pytest.raises(TraceParseError) as exc:
            traces.parse_trace("\n".join(lines))
        assert exc.value.section == "qa"

    def test_lenient_step_prefixes_and_case(self):
        text = """\
Step 2: Rule Elements
A. the only condition
Step 3 - Logical expression: A
Step 4: Question (A): does it hold?
rationale: yes it does.
answer: TRUE
Step 5: Recomposition: (true)
Step 6: FINAL ANSWER: True.
"""
        trace = traces.parse_trace(text)
        assert trace.model_final is True
        assert trace.assignment() == {"A": True}

    def test_leading_chatter_ignored(self):
        trace = traces.parse_trace("Sure, let me reason through this.\n" + WELL_FORMED)
        assert trace.model_final is False

    def test_missing_elements_header_recovers_from_expression(self):
        text = """\
Logical expression: (A and B)
Question (A): first?
Answer: true
Question (B): second?
Answer: true
Recomposition: (true and true)
Final answer: true
"""
        trace = traces.parse_trace(text)
        assert [v for v, _ in trace.elements] == ["A", "B"]
        assert trace.is_complete()

    def test_unlabeled_expression_line_recovers(self):
        text = WELL_FORMED.replace("Logical expression: (A and B)", "(A and B)")
        trace = traces.parse_trace(text)
        assert trace.expression == logic.parse("A and B")

    def test_garbage_input_is_parse_failure(self):
        with pytest.raises(TraceParseError):
            traces.parse_trace("The answer could be anything at all.")


class TestRenderRoundTrip:
    def test_demo_style_round_trip(self):
        trace = traces.parse_trace(WELL_FORMED)
        assert traces.parse_trace(traces.render_trace(trace)) == trace

    def test_random_traces_round_trip(self):
        rng = random.Random(5)
        for _ in range(100):
            trace = random_trace(rng)
            assert traces.parse_trace(traces.render_trace(trace)) == trace


class TestExtractAnswer:
    def test_final_answer_true(self):
        assert traces.extract_answer("...\nFinal answer: true", AnswerFormat.TRUE_FALSE) is True

    def test_answer_is_no(self):
        assert traces.extract_answer("The answer is no.", AnswerFormat.YES_NO) is False

    def test_ambiguous_returns_none(self):
        assert traces.extract_answer("It could be either.", AnswerFormat.TRUE_FALSE) is None

    def test_conflicting_tokens_return_none(self):
        text = "Final answer: true or false, hard to say"
        assert traces.extract_answer(text, AnswerFormat.TRUE_FALSE) is None

    def test_last_marker_wins(self):
        text = "Answer: yes\nOn reflection, the answer is no"
        assert traces.extract_answer(text, AnswerFormat.YES_NO) is False

    def test_format_vocabulary_is_respected(self):
        assert traces.extract_answer("Final answer: true", AnswerFormat.YES_NO) is None

    def test_bare_token_without_marker(self):
        assert traces.extract_answer(" true", AnswerFormat.TRUE_FALSE) is True


class TestVerify:
    def test_logic_error_detected(self):
        text = """\
Rule elements:
A. domiciled in the forum state
B. sufficient contacts
C. claim arises from the contacts
Logical expression: (A or (B and C))
Question (A): Is the defendant domiciled in the forum state?
Answer: true
Question (B): Are there sufficient contacts?
Answer: true
Question (C): Does the claim arise from those contacts?
Answer: false
Recomposition: (true or (true and false))
Final answer: false
"""
        verdict = traces.verify(traces.parse_trace(text))
        assert verdict.error_class is ErrorClass.LOGIC_ERROR
        assert verdict.independent_answer is True
        assert not verdict.faithful

    def test_faithful_trace(self):
        verdict = traces.verify(traces.parse_trace(WELL_FORMED), gold=False)
        assert verdict.error_class is ErrorClass.NONE
        assert verdict.faithful
        assert verdict.correct is True

    def test_incomplete_decomposition(self):
        trace = traces.parse_trace(WELL_FORMED)
        trimmed = dataclasses.replace(trace, qa=trace.qa[:1])
        verdict = traces.verify(trimmed)
        assert verdict.error_class is ErrorClass.INCOMPLETE_DECOMPOSITION
        assert verdict.independent_answer is None

    def test_recomposition_mismatch_is_warning_not_error(self):
        trace = traces.parse_trace(WELL_FORMED.replace("(false and false)", "(true and false)"))
        verdict = traces.verify(trace)
        assert verdict.error_class is ErrorClass.NONE
        assert verdict.warnings and "recomposition" in verdict.warnings[0]

    def test_element_error_names_variables(self):
        verdict = traces.verify(
            traces.parse_trace(WELL_FORMED), element_gold={"A": True, "B": False}
        )
        assert verdict.error_class is ErrorClass.ELEMENT_ERROR
        assert verdict.element_errors == ("A",)

    def test_element_gold_requires_labels(self):
        verdict = traces.verify(traces.parse_trace(WELL_FORMED), element_gold=None)
        assert verdict.error_class is ErrorClass.NONE

    def test_independent_answer_matches_truth_table(self):
        rng = random.Random(6)
        for _ in range(50):
            trace = random_trace(rng)
            verdict = traces.verify(trace)
            row = {
                tuple(sorted(assignment.items())): value
                for assignment, value in logic.truth_table(trace.expression)
            }
            key = tuple(sorted((v, trace.assignment()[v]) for v in logic.variables(trace.expression)))
            assert verdict.independent_answer == row[key]


class TestInjectionDetection:
    @settings(max_examples=150)
    @given(st.randoms(use_true_random=False))
    def test_flipping_final_yields_logic_error(self, rng):
        trace = random_trace(rng)
        flipped = dataclasses.replace(trace, model_final=not trace.model_final)
        assert traces.verify(flipped).error_class is ErrorClass.LOGIC_ERROR

    @settings(max_examples=150)
    @given(st.randoms(use_true_random=False), st.integers(min_value=0, max_value=10_000))
    def test_deleting_one_qa_yields_incomplete(self, rng, pick):
        trace = random_trace(rng)
        index = pick % len(trace.qa)
        trimmed = dataclasses.replace(trace, qa=trace.qa[:index] + trace.qa[index + 1 :])
        assert traces.verify(trimmed).error_class is ErrorClass.INCOMPLETE_DECOMPOSITION

    @settings(max_examples=150)
    @given(st.randoms(use_true_random=False))
    def test_unmodified_traces_are_clean(self, rng):
        verdict = traces.verify(random_trace(rng))
        assert verdict.error_class is ErrorClass.NONE
        assert verdict.faithful


class TestJsonExport:
    def test_trace_to_dict_round_trips_through_json(self):
        trace = traces.parse_trace(WELL_FORMED)
        payload = json.loads(json.dumps(trace.to_dict()))
        assert payload["final"] is False
        assert payload["complete"] is True
        assert payload["elements"][0] == ["A", "complete diversity between plaintiffs and defendants"]

    def test_verdict_json(self):
        verdict = traces.verify(traces.parse_trace(WELL_FORMED), gold=False)
        payload = json.loads(verdict.to_json())
        assert payload["error_class"] == "none"
        assert payload["correct"] is True
