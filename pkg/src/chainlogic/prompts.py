"""Prompt construction for the seven prompting methods.

A prompt is (optional preamble) + (optional one-shot demonstration) +
the test sample's labeled inputs + an answer cue. The demonstration must
apply a different rule than the test sample. Chain-of-logic prompts can
drop any one of the six reasoning steps from the demonstration; step 1
swaps the labeled input block for an unlabeled one in place, steps 2-6
remove one contiguous section.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from importlib import resources

from . import logic, traces
from .traces import AnswerFormat

FAMILY_KINDS = ("personal_jurisdiction", "diversity_jurisdiction", "jcrew_blocker", "other")

BASELINE_CUE = "Answer:"
CHAIN_CUE = "Final answer:"

FOLLOWUP_TRUE_FALSE = "Therefore the answer (true or false) is"
FOLLOWUP_YES_NO = "Therefore the answer (yes or no) is"


class PromptError(ValueError):
    """Invalid method/demonstration/sample combination."""


class Method(enum.Enum):
    ZERO_SHOT = "zero_shot"
    ZERO_SHOT_LR = "zero_shot_lr"
    ZERO_SHOT_LS = "zero_shot_ls"
    STANDARD = "standard"
    CHAIN_OF_THOUGHT = "chain_of_thought"
    SELF_ASK = "self_ask"
    CHAIN_OF_LOGIC = "chain_of_logic"

    @property
    def one_shot(self) -> bool:
        return self in _ONE_SHOT

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_ONE_SHOT = frozenset(
    {Method.STANDARD, Method.CHAIN_OF_THOUGHT, Method.SELF_ASK, Method.CHAIN_OF_LOGIC}
)
_DISPLAY_NAMES = {
    Method.ZERO_SHOT: "Zero-Shot",
    Method.ZERO_SHOT_LR: "Zero-Shot-LR",
    Method.ZERO_SHOT_LS: "Zero-Shot-LS",
    Method.STANDARD: "Standard Prompting",
    Method.CHAIN_OF_THOUGHT: "Chain of Thought",
    Method.SELF_ASK: "Self-Ask",
    Method.CHAIN_OF_LOGIC: "Chain of Logic",
}


@dataclass(frozen=True)
class RuleFamily:
    """Which rule a sample applies; diversity levels 1-6 share one family."""

    kind: str
    level: int | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown rule family kind {self.kind!r}")
        if self.level is not None and (self.kind != "diversity_jurisdiction" or not 1 <= self.level <= 6):
            raise ValueError("level applies to diversity_jurisdiction and must be 1-6")
        if self.kind == "other" and not self.name:
            raise ValueError("an 'other' family needs a name")

    @classmethod
    def personal_jurisdiction(cls) -> "RuleFamily":
        return cls("personal_jurisdiction")

    @classmethod
    def diversity(cls, level: int | None = None) -> "RuleFamily":
        return cls("diversity_jurisdiction", level=level)

    @classmethod
    def jcrew(cls) -> "RuleFamily":
        return cls("jcrew_blocker")

    @classmethod
    def other(cls, name: str) -> "RuleFamily":
        return cls("other", name=name)

    def key(self) -> tuple[str, str | None]:
        """Identity used for the different-rule constraint; levels collapse."""
        return (self.kind, self.name)

    def same_rule(self, other: "RuleFamily") -> bool:
        return self.key() == other.key()


@dataclass(frozen=True)
class Sample:
    id: str
    rule_text: str
    facts: str
    issue: str
    rule_family: RuleFamily
    gold: bool | None = None

    def __post_init__(self):
        for label, value in (("rule_text", self.rule_text), ("facts", self.facts), ("issue", self.issue)):
            if not value or not value.strip():
                raise ValueError(f"sample {self.id!r}: {label} must be non-empty")


@dataclass(frozen=True)
class ChainSolution:
    """Structured six-step worked solution; text is derived, never stored."""

    elements: tuple[tuple[str, str], ...]
    expression: str
    qa: tuple[traces.QaStep, ...]
    final: bool

    def trace(self) -> traces.ReasoningTrace:
        expr = logic.parse(self.expression)
        recomposition = logic.substitute(expr, {s.variable: s.answer for s in self.qa})
        return traces.ReasoningTrace(
            elements=self.elements,
            expression_text=logic.render(expr),
            expression=expr,
            qa=self.qa,
            recomposition_text=recomposition,
            model_final=self.final,
        )


@dataclass(frozen=True)
class Demonstration:
    sample: Sample
    method: Method
    worked_solution: str
    chain: ChainSolution | None = None

    def __post_init__(self):
        if self.method is Method.CHAIN_OF_LOGIC:
            if self.chain is None:
                raise PromptError("chain-of-logic demonstrations need a structured solution")
            verdict = traces.verify(self.chain.trace(), gold=self.sample.gold)
            if not verdict.faithful or verdict.correct is not True:
                raise PromptError(
                    f"demonstration {self.sample.id!r} is unfaithful or contradicts its gold label"
                )
        else:
            fmt = AnswerFormat.YES_NO
            extracted = traces.extract_answer(self.worked_solution, fmt)
            if extracted is None or extracted != self.sample.gold:
                raise PromptError(
                    f"demonstration {self.sample.id!r} answer does not match its gold label"
                )


@dataclass(frozen=True)
class MethodConfig:
    method: Method
    ablate: int | None = None
    answer_format: AnswerFormat | None = None

    def __post_init__(self):
        if self.ablate is not None:
            if self.method is not Method.CHAIN_OF_LOGIC:
                raise PromptError("ablation applies to chain of logic only")
            if not 1 <= self.ablate <= 6:
                raise PromptError(f"ablation step must be 1-6, got {self.ablate}")
        expected = (
            AnswerFormat.TRUE_FALSE if self.method is Method.CHAIN_OF_LOGIC else AnswerFormat.YES_NO
        )
        if self.answer_format is None:
            object.__setattr__(self, "answer_format", expected)
        elif self.answer_format is not expected:
            raise PromptError(
                f"{self.method.value} uses the {expected.value} answer format"
            )


def _template(name: str) -> str:
    return resources.files(__package__).joinpath("templates", name).read_text(encoding="utf-8").rstrip("\n")


def format_structured_input(sample: Sample) -> str:
    """Labeled Rule/Facts/Issue block, source text verbatim."""
    return _template("structured_input.txt").format(
        rule=sample.rule_text, facts=sample.facts, issue=sample.issue
    )


def format_unstructured_input(sample: Sample) -> str:
    """The same three texts without labels (step-1 ablation variant)."""
    return _template("unstructured_input.txt").format(
        rule=sample.rule_text, facts=sample.facts, issue=sample.issue
    )


def build_followup(answer_format: AnswerFormat) -> str:
    return FOLLOWUP_TRUE_FALSE if answer_format is AnswerFormat.TRUE_FALSE else FOLLOWUP_YES_NO


def chain_sections(demo: Demonstration, ablate: int | None = None) -> list[str]:
    """The demonstration's six step sections, minus the ablated one."""
    if demo.chain is None:
        raise PromptError("not a chain-of-logic demonstration")
    trace = demo.chain.trace()
    qa_lines: list[str] = []
    for step in trace.qa:
        qa_lines.append(f"Question ({step.variable}): {step.question}")
        if step.rationale:
            qa_lines.append(f"Rationale: {step.rationale}")
        qa_lines.append(f"Answer: {'true' if step.answer else 'false'}")
    input_block = (
        format_unstructured_input(demo.sample) if ablate == 1 else format_structured_input(demo.sample)
    )
    sections = [
        input_block,
        "Rule elements:\n" + "\n".join(f"{v}. {span}" for v, span in trace.elements),
        f"Logical expression: {trace.expression_text}",
        "\n".join(qa_lines),
        f"Recomposition: {trace.recomposition_text}",
        f"Final answer: {'true' if trace.model_final else 'false'}",
    ]
    if ablate is not None and ablate >= 2:
        del sections[ablate - 1]
    return sections


def _render_demonstration(cfg: MethodConfig, demo: Demonstration) -> str:
    if cfg.method is Method.CHAIN_OF_LOGIC:
        return "\n".join(chain_sections(demo, cfg.ablate))
    return format_structured_input(demo.sample) + f"\n{BASELINE_CUE} " + demo.worked_solution


def build_prompt(cfg: MethodConfig, demo: Demonstration | None, test: Sample) -> str:
    """Deterministic prompt text for one method, demonstration and test sample."""
    if cfg.method.one_shot and demo is None:
        raise PromptError(f"{cfg.method.value} requires a demonstration")
    if not cfg.method.one_shot and demo is not None:
        raise PromptError(f"{cfg.method.value} must not include a demonstration")
    if demo is not None:
        if demo.method is not cfg.method:
            raise PromptError(
                f"demonstration is for {demo.method.value}, not {cfg.method.value}"
            )
        if demo.sample.rule_family.same_rule(test.rule_family):
            raise PromptError(
                "demonstration and test sample apply the same rule "
                f"({test.rule_family.kind}); a different rule is required"
            )

    parts: list[str] = []
    if cfg.method is Method.ZERO_SHOT_LS:
        parts.append(_template("preamble_zero_shot_ls.txt"))
    if demo is not None:
        parts.append(_render_demonstration(cfg, demo))

    test_block = format_structured_input(test)
    if cfg.method is Method.ZERO_SHOT_LR:
        test_block += "\n" + _template("approach_zero_shot_lr.txt")
    cue = CHAIN_CUE if cfg.method is Method.CHAIN_OF_LOGIC else BASELINE_CUE
    parts.append(test_block + "\n" + cue)
    return "\n\n".join(parts)


def _load_demo_file(demo_id: str) -> dict:
    path = resources.files(__package__).joinpath("demos", f"{demo_id}.json")
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise PromptError(f"no shipped demonstration named {demo_id!r}") from None
    return json.loads(raw)


def available_demos() -> list[str]:
    demo_dir = resources.files(__package__).joinpath("demos")
    return sorted(p.name[: -len(".json")] for p in demo_dir.iterdir() if p.name.endswith(".json"))


def _sample_from_dict(data: dict) -> Sample:
    family = RuleFamily(data["family"], level=data.get("level"), name=data.get("family_name"))
    return Sample(
        id=data["id"],
        rule_text=data["rule"],
        facts=data["facts"],
        issue=data["issue"],
        rule_family=family,
        gold=data.get("answer"),
    )


def load_demonstration(demo_id: str, method: Method) -> Demonstration:
    """Materialize one shipped demonstration for a one-shot method."""
    if not method.one_shot:
        raise PromptError(f"{method.value} does not take a demonstration")
    data = _load_demo_file(demo_id)
    sample = _sample_from_dict(data["sample"])
    solutions = data["solutions"]
    if method is Method.CHAIN_OF_LOGIC:
        chain_data = solutions["chain_of_logic"]
        chain = ChainSolution(
            elements=tuple((v, span) for v, span in chain_data["elements"]),
            expression=chain_data["expression"],
            qa=tuple(traces.QaStep(*step) for step in chain_data["qa"]),
            final=chain_data["final"],
        )
        worked = traces.render_trace(chain.trace())
        return Demonstration(sample=sample, method=method, worked_solution=worked, chain=chain)
    return Demonstration(sample=sample, method=method, worked_solution=solutions[method.value])
