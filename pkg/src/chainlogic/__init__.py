"""Prompting, parsing and verification harness for compositional
rule-application tasks: propositional logic engine, prompt construction
for seven methods, reasoning-trace verification, model backends with a
replayable cache, synthetic task generation, and an evaluation harness."""

from .backends import (
    GenerationRequest,
    HttpBackend,
    ResponseCache,
    ScriptedBackend,
    cached_generate,
)
from .datasets import (
    AicPolicy,
    DjVerdict,
    FactPattern,
    dj_oracle,
    generate_dj,
    load_samples,
    parse_fact_pattern,
    render_fact_pattern,
)
from .harness import (
    EvalReport,
    RunConfig,
    Task,
    macro_average,
    render_report,
    run_ablation,
    run_eval,
)
from .logic import evaluate, parse, render, substitute, truth_table, variables
from .prompts import (
    ChainSolution,
    Demonstration,
    Method,
    MethodConfig,
    RuleFamily,
    Sample,
    build_followup,
    build_prompt,
    format_structured_input,
    load_demonstration,
)
from .traces import (
    AnswerFormat,
    ErrorClass,
    ReasoningTrace,
    Verdict,
    extract_answer,
    parse_trace,
    render_trace,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "AicPolicy", "AnswerFormat", "ChainSolution", "Demonstration", "DjVerdict",
    "ErrorClass", "EvalReport", "FactPattern", "GenerationRequest", "HttpBackend",
    "Method", "MethodConfig", "ReasoningTrace", "ResponseCache", "RuleFamily",
    "RunConfig", "Sample", "ScriptedBackend", "Task", "Verdict",
    "build_followup", "build_prompt", "cached_generate", "dj_oracle", "evaluate",
    "extract_answer", "format_structured_input", "generate_dj", "load_demonstration",
    "load_samples", "macro_average", "parse", "parse_fact_pattern", "parse_trace",
    "render", "render_fact_pattern", "render_report", "render_trace", "run_ablation",
    "run_eval", "substitute", "truth_table", "variables", "verify",
]
