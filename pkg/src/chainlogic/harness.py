"""Evaluation orchestration: method x model x task runs, ablations, and
accuracy reports with per-rule and macro-averaged aggregation.

Diversity-jurisdiction tasks share one rule family, so their per-task
accuracies are averaged (unweighted) into a single per-rule figure before
the macro average across families.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from . import backends, prompts, traces
from .backends import Backend, BackendError, GenerationRequest, ResponseCache
from .prompts import Demonstration, Method, MethodConfig, RuleFamily, Sample
from .traces import ErrorClass


class ConfigError(ValueError):
    """Invalid run configuration; raised before any backend call."""


@dataclass(frozen=True)
class Task:
    name: str
    family: RuleFamily
    samples: tuple[Sample, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))


@dataclass(frozen=True)
class RunConfig:
    method: MethodConfig
    backend: Backend
    model: str
    tasks: tuple[Task, ...]
    demo: Demonstration | None = None
    limit: int | None = None
    seed: int | None = None
    cache_dir: Path | str | None = None
    replay: bool = False
    out_dir: Path | str | None = None
    jobs: int = 1
    max_tokens: int = 1024
    element_gold: Mapping[str, Mapping[str, bool]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))


@dataclass(frozen=True)
class SampleRecord:
    task: str
    sample_id: str
    prompt_sha256: str
    response: str | None
    answer: bool | None
    gold: bool | None
    correct: bool
    skipped: bool
    skip_reason: str | None
    error_class: str
    faithful: bool | None
    independent_answer: bool | None
    element_errors: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    used_followup: bool = False
    cache_hit: bool | None = None


@dataclass
class EvalReport:
    config: dict
    records: list[SampleRecord]
    per_task: dict[str, dict]
    per_rule: dict[str, float]
    overall_accuracy: float
    macro_average_accuracy: float
    error_histogram: dict[str, int]
    ablation: dict | None = None
    created_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())


def family_label(family: RuleFamily) -> str:
    return family.kind if family.kind != "other" else f"other:{family.name}"


def macro_average(per_rule: Mapping[str, float]) -> float:
    """Unweighted mean over rule families."""
    if not per_rule:
        raise ValueError("macro average needs at least one rule family")
    return sum(per_rule.values()) / len(per_rule)


def _validate(cfg: RunConfig) -> None:
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.limit is not None and cfg.limit < 0:
        raise ConfigError("limit must be >= 0")
    if cfg.replay and cfg.cache_dir is None:
        raise ConfigError("replay mode requires a cache directory")
    if not cfg.tasks:
        raise ConfigError("at least one task is required")
    if cfg.method.method.one_shot and cfg.demo is None:
        raise ConfigError(f"{cfg.method.method.value} requires a demonstration")
    if not cfg.method.method.one_shot and cfg.demo is not None:
        raise ConfigError(f"{cfg.method.method.value} must not include a demonstration")
    for task in cfg.tasks:
        if cfg.demo is not None and cfg.demo.sample.rule_family.same_rule(task.family):
            raise ConfigError(
                f"demonstration and task {task.name!r} share the rule family "
                f"{family_label(task.family)}; the demonstration must apply a different rule"
            )
        for sample in task.samples:
            if sample.gold is None:
                raise ConfigError(f"sample {sample.id!r} in task {task.name!r} has no gold label")


def _selected_samples(cfg: RunConfig, task: Task) -> list[Sample]:
    samples = list(task.samples)
    if cfg.seed is not None:
        random.Random(cfg.seed).shuffle(samples)
    if cfg.limit is not None:
        samples = samples[: cfg.limit]
    return samples


class _Generator:
    """Backend access with optional disk cache/replay, shared across workers."""

    def __init__(self, cfg: RunConfig):
        self.backend = cfg.backend
        self.cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir is not None else None
        self.replay = cfg.replay

    def __call__(self, request: GenerationRequest) -> tuple[str, bool | None]:
        if self.cache is None:
            return self.backend.generate(request), None
        return backends.cached_generate(self.backend, request, self.cache, replay=self.replay)


def _evaluate_sample(
    cfg: RunConfig, generate: _Generator, task: Task, sample: Sample
) -> SampleRecord:
    prompt = prompts.build_prompt(cfg.method, cfg.demo, sample)
    digest = backends.prompt_digest(prompt)
    request = GenerationRequest(prompt=prompt, model_name=cfg.model, max_tokens=cfg.max_tokens)

    def skipped(reason: str) -> SampleRecord:
        return SampleRecord(
            task=task.name, sample_id=sample.id, prompt_sha256=digest, response=None,
            answer=None, gold=sample.gold, correct=False, skipped=True, skip_reason=reason,
            error_class=ErrorClass.NONE.value, faithful=None, independent_answer=None,
        )

    try:
        response, cache_hit = generate(request)
    except BackendError as exc:
        return skipped(str(exc))

    answer: bool | None = None
    used_followup = False
    verdict: traces.Verdict | None = None
    error_class = ErrorClass.NONE

    if cfg.method.method is Method.CHAIN_OF_LOGIC:
        element_gold = (cfg.element_gold or {}).get(sample.id)
        try:
            trace = traces.parse_trace(response)
        except traces.TraceParseError:
            trace = None
            error_class = ErrorClass.PARSE_FAILURE
        if trace is not None:
            verdict = traces.verify(trace, gold=sample.gold, element_gold=element_gold)
            answer = trace.model_final
            error_class = verdict.error_class

    if answer is None:
        answer = traces.extract_answer(response, cfg.method.answer_format)
        if answer is None:
            followup = prompts.build_followup(cfg.method.answer_format)
            followup_request = replace(request, prompt=f"{prompt}{response}\n{followup}")
            used_followup = True
            try:
                followup_response, _ = generate(followup_request)
            except BackendError as exc:
                return skipped(str(exc))
            answer = traces.extract_answer(followup_response, cfg.method.answer_format)
        if answer is None:
            error_class = ErrorClass.AMBIGUOUS_ANSWER

    return SampleRecord(
        task=task.name,
        sample_id=sample.id,
        prompt_sha256=digest,
        response=response,
        answer=answer,
        gold=sample.gold,
        correct=answer is not None and answer == sample.gold,
        skipped=False,
        skip_reason=None,
        error_class=error_class.value,
        faithful=verdict.faithful if verdict else None,
        independent_answer=verdict.independent_answer if verdict else None,
        element_errors=verdict.element_errors if verdict else (),
        warnings=verdict.warnings if verdict else (),
        used_followup=used_followup,
        cache_hit=cache_hit,
    )


def _aggregate(cfg: RunConfig, records: list[SampleRecord]) -> EvalReport:
    records = sorted(records, key=lambda r: (r.task, r.sample_id))
    per_task: dict[str, dict] = {}
    families: dict[str, RuleFamily] = {t.name: t.family for t in cfg.tasks}
    for task in cfg.tasks:
        rows = [r for r in records if r.task == task.name]
        if not rows:
            continue
        skipped = sum(r.skipped for r in rows)
        correct = sum(r.correct for r in rows)
        scored = len(rows) - skipped
        per_task[task.name] = {
            "family": family_label(task.family),
            "accuracy": correct / scored if scored else 0.0,
            "correct": correct,
            "incorrect": scored - correct,
            "skipped": skipped,
            "total": len(rows),
        }

    by_family: dict[str, list[float]] = {}
    for name, stats in per_task.items():
        by_family.setdefault(family_label(families[name]), []).append(stats["accuracy"])
    per_rule = {label: sum(values) / len(values) for label, values in sorted(by_family.items())}

    scored_total = sum(1 for r in records if not r.skipped)
    overall = sum(r.correct for r in records) / scored_total if scored_total else 0.0

    histogram: dict[str, int] = {}
    for record in records:
        if not record.skipped and record.error_class != ErrorClass.NONE.value:
            histogram[record.error_class] = histogram.get(record.error_class, 0) + 1

    config_summary = {
        "method": cfg.method.method.value,
        "ablate": cfg.method.ablate,
        "answer_format": cfg.method.answer_format.value,
        "model": cfg.model,
        "backend": cfg.backend.backend_id,
        "demo": cfg.demo.sample.id if cfg.demo else None,
        "tasks": [
            {"name": t.name, "family": family_label(t.family), "samples": len(t.samples)}
            for t in cfg.tasks
        ],
        "limit": cfg.limit,
        "seed": cfg.seed,
        "replay": cfg.replay,
        "jobs": cfg.jobs,
    }
    return EvalReport(
        config=config_summary,
        records=records,
        per_task=per_task,
        per_rule=per_rule,
        overall_accuracy=overall,
        macro_average_accuracy=macro_average(per_rule) if per_rule else 0.0,
        error_histogram=histogram,
    )


def run_eval(cfg: RunConfig) -> EvalReport:
    """Evaluate every task sample; backend failures skip samples, never the run."""
    _validate(cfg)
    generate = _Generator(cfg)
    work = [(task, sample) for task in cfg.tasks for sample in _selected_samples(cfg, task)]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            records = list(pool.map(lambda ts: _evaluate_sample(cfg, generate, *ts), work))
    else:
        records = [_evaluate_sample(cfg, generate, task, sample) for task, sample in work]
    report = _aggregate(cfg, records)
    if cfg.out_dir is not None:
        write_report(report, Path(cfg.out_dir) / "report.json")
    return report


def run_ablation(base: RunConfig, step: int) -> tuple[EvalReport, float]:
    """Full vs step-ablated run on identical samples; delta in percentage points."""
    if base.method.method is not Method.CHAIN_OF_LOGIC:
        raise ConfigError("ablation requires the chain-of-logic method")
    if not 1 <= step <= 6:
        raise ConfigError(f"ablation step must be 1-6, got {step}")
    full_cfg = replace(base, method=MethodConfig(Method.CHAIN_OF_LOGIC), out_dir=None)
    ablated_cfg = replace(base, method=MethodConfig(Method.CHAIN_OF_LOGIC, ablate=step), out_dir=None)
    full = run_eval(full_cfg)
    ablated = run_eval(ablated_cfg)
    delta = (ablated.overall_accuracy - full.overall_accuracy) * 100.0
    ablated.ablation = {
        "step": step,
        "full_accuracy": full.overall_accuracy,
        "ablated_accuracy": ablated.overall_accuracy,
        "delta_pp": delta,
    }
    if base.out_dir is not None:
        out = Path(base.out_dir)
        write_report(full, out / "report_full.json")
        write_report(ablated, out / f"report_ablate_step{step}.json")
    return ablated, delta


# --- serialization and rendering -------------------------------------------

def report_to_dict(report: EvalReport) -> dict:
    return {
        "created_at": report.created_at,
        "config": report.config,
        "records": [
            {
                "task": r.task,
                "sample_id": r.sample_id,
                "prompt_sha256": r.prompt_sha256,
                "response": r.response,
                "answer": r.answer,
                "gold": r.gold,
                "correct": r.correct,
                "skipped": r.skipped,
                "skip_reason": r.skip_reason,
                "error_class": r.error_class,
                "faithful": r.faithful,
                "independent_answer": r.independent_answer,
                "element_errors": list(r.element_errors),
                "warnings": list(r.warnings),
                "used_followup": r.used_followup,
                "cache_hit": r.cache_hit,
            }
            for r in report.records
        ],
        "per_task": report.per_task,
        "per_rule": report.per_rule,
        "overall_accuracy": report.overall_accuracy,
        "macro_average_accuracy": report.macro_average_accuracy,
        "error_histogram": report.error_histogram,
        "ablation": report.ablation,
    }


def report_from_dict(data: dict) -> EvalReport:
    records = [
        SampleRecord(
            task=r["task"],
            sample_id=r["sample_id"],
            prompt_sha256=r["prompt_sha256"],
            response=r["response"],
            answer=r["answer"],
            gold=r["gold"],
            correct=r["correct"],
            skipped=r["skipped"],
            skip_reason=r["skip_reason"],
            error_class=r["error_class"],
            faithful=r["faithful"],
            independent_answer=r["independent_answer"],
            element_errors=tuple(r["element_errors"]),
            warnings=tuple(r["warnings"]),
            used_followup=r["used_followup"],
            cache_hit=r["cache_hit"],
        )
        for r in data["records"]
    ]
    return EvalReport(
        config=data["config"],
        records=records,
        per_task=data["per_task"],
        per_rule=data["per_rule"],
        overall_accuracy=data["overall_accuracy"],
        macro_average_accuracy=data["macro_average_accuracy"],
        error_histogram=data["error_histogram"],
        ablation=data.get("ablation"),
        created_at=data["created_at"],
    )


def write_report(report: EvalReport, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
    tmp.write_text(render_report(report, "json") + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _pct(value: float) -> str:
    return f"{value * 100:.1f}"


def render_report(report: EvalReport, format: str = "text") -> str:
    if format == "json":
        return json.dumps(report_to_dict(report), indent=2, sort_keys=True)
    if format == "csv":
        lines = ["row,name,family,accuracy,correct,incorrect,skipped,total"]
        for name, stats in report.per_task.items():
            lines.append(
                f"task,{name},{stats['family']},{stats['accuracy']:.4f},"
                f"{stats['correct']},{stats['incorrect']},{stats['skipped']},{stats['total']}"
            )
        for label, accuracy in report.per_rule.items():
            lines.append(f"rule,{label},{label},{accuracy:.4f},,,,")
        lines.append(f"overall,,,{report.overall_accuracy:.4f},,,,")
        lines.append(f"macro_average,,,{report.macro_average_accuracy:.4f},,,,")
        return "\n".join(lines)
    if format == "text":
        lines = [
            f"method: {report.config['method']}"
            + (f" (ablate step {report.config['ablate']})" if report.config.get("ablate") else ""),
            f"model: {report.config['model']}  backend: {report.config['backend']}",
        ]
        for name, stats in report.per_task.items():
            lines.append(
                f"  task {name:<16} acc {_pct(stats['accuracy']):>5}  "
                f"({stats['correct']}/{stats['total'] - stats['skipped']}, {stats['skipped']} skipped)"
            )
        for label, accuracy in report.per_rule.items():
            lines.append(f"  rule {label:<24} acc {_pct(accuracy):>5}")
        lines.append(f"  macro average {_pct(report.macro_average_accuracy)}")
        if report.error_histogram:
            errors = ", ".join(f"{k}={v}" for k, v in sorted(report.error_histogram.items()))
            lines.append(f"  errors: {errors}")
        if report.ablation:
            lines.append(
                f"  ablation step {report.ablation['step']}: delta {report.ablation['delta_pp']:+.1f} pp"
            )
        return "\n".join(lines)
    raise ValueError(f"unknown report format {format!r}")


_METHOD_ORDER = [
    Method.ZERO_SHOT, Method.ZERO_SHOT_LR, Method.ZERO_SHOT_LS,
    Method.STANDARD, Method.CHAIN_OF_THOUGHT, Method.SELF_ASK, Method.CHAIN_OF_LOGIC,
]


def render_merged_table(reports: list[EvalReport]) -> str:
    """Methods x models grid of macro-averaged accuracies (percent, 1 decimal)."""
    models: list[str] = []
    cells: dict[tuple[str, str], float] = {}
    methods_present: set[str] = set()
    for report in reports:
        model = report.config["model"]
        if model not in models:
            models.append(model)
        method = report.config["method"]
        methods_present.add(method)
        cells[(method, model)] = report.macro_average_accuracy

    width = max(len(m) for m in models + ["model"]) + 2
    label_width = max(len(m.display_name) for m in _METHOD_ORDER) + 2
    header = " " * label_width + "".join(m.rjust(width) for m in models)
    lines = [header]
    for method in _METHOD_ORDER:
        if method.value not in methods_present:
            continue
        row = method.display_name.ljust(label_width)
        for model in models:
            value = cells.get((method.value, model))
            row += ("-" if value is None else _pct(value)).rjust(width)
        lines.append(row)
    return "\n".join(lines)
