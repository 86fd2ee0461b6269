"""Command-line interface.

Subcommands: eval, ablate, gen-dj, report, verify-trace. A JSON config
file can pre-fill any eval/ablate option; explicit flags win. Exit codes:
0 success, 1 configuration error, 2 run completed with skipped samples.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import datasets, harness, traces
from .backends import HttpBackend, ScriptedBackend
from .harness import ConfigError, RunConfig, Task
from .prompts import Method, MethodConfig, PromptError, RuleFamily, load_demonstration

_GEN_SPEC_RE = re.compile(r"^dj([1-6]):(\d+)$")
_DJ_NAME_RE = re.compile(r"(?:^|[^a-z])dj[\s_-]?([1-6])(?:[^0-9]|$)")


def infer_family(name: str) -> RuleFamily:
    lowered = name.lower()
    if "personal" in lowered or lowered.startswith("pj") or lowered.endswith("pj"):
        return RuleFamily.personal_jurisdiction()
    m = _DJ_NAME_RE.search(lowered)
    if m:
        return RuleFamily.diversity(int(m.group(1)))
    if "diversity" in lowered:
        digit = re.search(r"([1-6])\D*$", lowered)
        return RuleFamily.diversity(int(digit.group(1)) if digit else None)
    if "jcrew" in lowered or "j_crew" in lowered or "j-crew" in lowered:
        return RuleFamily.jcrew()
    return RuleFamily.other(name)


def _load_task(spec: str, seed: int) -> tuple[Task, dict | None]:
    m = _GEN_SPEC_RE.match(spec)
    if m:
        level, n = int(m.group(1)), int(m.group(2))
        rows = datasets.generate_dj(level, n, seed)
        element_gold = {sample.id: verdict.element_gold() for sample, _, verdict in rows}
        samples = tuple(sample for sample, _, _ in rows)
        return Task(f"dj{level}", RuleFamily.diversity(level), samples), element_gold
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"task {spec!r} is neither a file nor a djN:COUNT generator spec")
    family = infer_family(path.stem)
    samples = tuple(datasets.load_samples(path, family=family))
    return Task(path.stem, family, samples), None


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file pre-filling these options")
    parser.add_argument("--task", action="append", dest="tasks",
                        help="task file (jsonl/tsv) or generator spec djN:COUNT; repeatable")
    parser.add_argument("--method", choices=[m.value for m in Method])
    parser.add_argument("--backend", choices=["scripted", "http"])
    parser.add_argument("--script", type=Path, help="scripted backend responses (JSON)")
    parser.add_argument("--base-url", dest="base_url", help="HTTP backend base URL")
    parser.add_argument("--model")
    parser.add_argument("--demo", help="shipped demonstration id (e.g. dj1, pj)")
    parser.add_argument("--limit", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--cache-dir", dest="cache_dir", type=Path)
    parser.add_argument("--replay", action="store_true", default=None)
    parser.add_argument("--out", type=Path, help="directory for report.json")
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--max-tokens", dest="max_tokens", type=int)


_RUN_DEFAULTS = {
    "tasks": None, "method": None, "backend": "scripted", "script": None,
    "base_url": None, "model": None, "demo": None, "limit": None, "seed": 0,
    "cache_dir": None, "replay": False, "out": None, "jobs": 1, "max_tokens": 1024,
}


def _merge_config(args: argparse.Namespace) -> dict:
    merged = dict(_RUN_DEFAULTS)
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(loaded) - set(_RUN_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in _RUN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _build_run_config(args: argparse.Namespace, ablate: int | None = None) -> RunConfig:
    options = _merge_config(args)
    if not options["tasks"]:
        raise ConfigError("at least one --task is required")
    if options["method"] is None:
        raise ConfigError("--method is required")
    method = Method(options["method"])
    method_cfg = MethodConfig(method, ablate=ablate)

    if options["backend"] == "scripted":
        if options["script"] is None:
            raise ConfigError("scripted backend requires --script")
        try:
            responses = json.loads(Path(options["script"]).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read script file: {exc}") from exc
        backend = ScriptedBackend(responses)
        model = options["model"] or "scripted"
    else:
        backend = HttpBackend(base_url=options["base_url"])
        if options["model"] is None:
            raise ConfigError("http backend requires --model")
        model = options["model"]

    demo = load_demonstration(options["demo"], method) if options["demo"] else None

    tasks: list[Task] = []
    element_gold: dict[str, dict[str, bool]] = {}
    for spec in options["tasks"]:
        task, gold = _load_task(spec, options["seed"])
        tasks.append(task)
        if gold:
            element_gold.update(gold)

    return RunConfig(
        method=method_cfg,
        backend=backend,
        model=model,
        tasks=tuple(tasks),
        demo=demo,
        limit=options["limit"],
        seed=options["seed"],
        cache_dir=options["cache_dir"],
        replay=bool(options["replay"]),
        out_dir=options["out"],
        jobs=options["jobs"],
        max_tokens=options["max_tokens"],
        element_gold=element_gold or None,
    )


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    report = harness.run_eval(cfg)
    print(harness.render_report(report, "text"))
    return 2 if any(r.skipped for r in report.records) else 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    cfg = _build_run_config(args)
    report, delta = harness.run_ablation(cfg, args.step)
    print(harness.render_report(report, "text"))
    print(f"delta vs full chain: {delta:+.1f} pp")
    return 2 if any(r.skipped for r in report.records) else 0


def _cmd_gen_dj(args: argparse.Namespace) -> int:
    rows = datasets.generate_dj(args.level, args.n, args.seed)
    datasets.write_samples((sample for sample, _, _ in rows), args.out)
    sidecar = args.sidecar or args.out.with_suffix(args.out.suffix + ".sidecar.json")
    datasets.write_sidecar(rows, sidecar)
    print(f"wrote {len(rows)} samples to {args.out} (sidecar: {sidecar})")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    paths = list(args.reports) + list(args.merge or [])
    if not paths:
        raise ConfigError("no report files given")
    reports = []
    for path in paths:
        reports.append(harness.report_from_dict(json.loads(path.read_text(encoding="utf-8"))))
    if len(reports) == 1 or args.format != "text":
        if args.format == "json" and len(reports) > 1:
            output = json.dumps([harness.report_to_dict(r) for r in reports], indent=2, sort_keys=True)
        elif len(reports) > 1:
            raise ConfigError("csv output supports a single report")
        else:
            output = harness.render_report(reports[0], args.format)
    else:
        output = harness.render_merged_table(reports)
    if args.out is not None:
        args.out.write_text(output + "\n", encoding="utf-8")
    else:
        print(output)
    return 0


def _cmd_verify_trace(args: argparse.Namespace) -> int:
    text = args.file.read_text(encoding="utf-8") if args.file else sys.stdin.read()
    try:
        trace = traces.parse_trace(text)
    except traces.TraceParseError as exc:
        verdict = traces.Verdict(
            independent_answer=None, faithful=False, error_class=traces.ErrorClass.PARSE_FAILURE
        )
        print(json.dumps({"verdict": verdict.to_dict(), "trace": None, "detail": str(exc)},
                         indent=2, sort_keys=True))
        return 0
    verdict = traces.verify(trace)
    print(json.dumps({"verdict": verdict.to_dict(), "trace": trace.to_dict(), "detail": None},
                     indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainlogic",
                                     description="Rule-application prompting and verification harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="run one method over one or more tasks")
    _add_run_options(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_ablate = sub.add_parser("ablate", help="chain-of-logic step ablation")
    _add_run_options(p_ablate)
    p_ablate.add_argument("--step", type=int, required=True, help="reasoning step to remove (1-6)")
    p_ablate.set_defaults(func=_cmd_ablate)

    p_gen = sub.add_parser("gen-dj", help="generate synthetic diversity-jurisdiction samples")
    p_gen.add_argument("--level", type=int, required=True)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=Path, required=True)
    p_gen.add_argument("--sidecar", type=Path)
    p_gen.set_defaults(func=_cmd_gen_dj)

    p_report = sub.add_parser("report", help="render or merge report JSON files")
    p_report.add_argument("reports", nargs="*", type=Path)
    p_report.add_argument("--merge", nargs="+", type=Path,
                          help="additional report files to merge into one table")
    p_report.add_argument("--format", choices=["text", "csv", "json"], default="text")
    p_report.add_argument("--out", type=Path)
    p_report.set_defaults(func=_cmd_report)

    p_verify = sub.add_parser("verify-trace", help="parse and re-verify a reasoning trace")
    p_verify.add_argument("file", nargs="?", type=Path)
    p_verify.set_defaults(func=_cmd_verify_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PromptError, datasets.DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
