"""Task loading, synthetic diversity-jurisdiction generation, and the
symbolic oracle that labels generated fact patterns.

The canonical sample schema is JSONL rows of {id, rule, facts, issue,
answer}; TSV files load through a column mapping. Generated fact
patterns render to the benchmark's sentence style ("X is from S. X sues
Y for <cause> for $N.") and re-parse losslessly, which is what lets the
oracle double as element-level ground truth.
"""

from __future__ import annotations

import csv
import enum
import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .prompts import RuleFamily, Sample

AIC_THRESHOLD = 75_000

DJ_RULE_TEXT = (
    "Diversity jurisdiction exists when there is (1) complete diversity between "
    "plaintiffs and defendants, and (2) the amount-in-controversy (AiC) is "
    "greater than $75k."
)
DJ_ISSUE_TEXT = "Is there diversity jurisdiction?"

# (plaintiffs, defendants, causes of action per claim sentence); level 6 has
# two claim sentences, one per defendant.
_LEVELS = {
    1: (1, 1, 1),
    2: (1, 2, 1),
    3: (1, 1, 2),
    4: (2, 1, 1),
    5: (2, 1, 2),
    6: (2, 2, 2),
}

_NAMES = (
    "James", "Lucas", "Sophia", "Benjamin", "Noah", "William", "Theodore",
    "Emma", "Mia", "Evelyn", "Elijah", "Ava", "Amelia", "Olivia", "Henry",
    "Charlotte", "Jack", "Harper", "Leo", "Grace",
)

_STATES = (
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado",
    "Connecticut", "Delaware", "Florida", "Georgia", "Hawaii", "Idaho",
    "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky", "Louisiana", "Maine",
    "Maryland", "Massachusetts", "Michigan", "Minnesota", "Mississippi",
    "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire", "New Jersey",
    "New Mexico", "New York", "North Carolina", "North Dakota", "Ohio",
    "Oklahoma", "Oregon", "Pennsylvania", "Rhode Island", "South Carolina",
    "South Dakota", "Tennessee", "Texas", "Utah", "Vermont", "Virginia",
    "Washington", "West Virginia", "Wisconsin", "Wyoming",
)

_CAUSES = (
    "negligence", "defamation", "medical malpractice", "copyright infringement",
    "trademark infringement", "securities fraud", "breach of contract",
    "trespass", "battery", "false imprisonment",
)


class DatasetError(ValueError):
    """Base class for loading and generation failures."""


class UnparseableLabelError(DatasetError):
    def __init__(self, row: int, value: object):
        super().__init__(f"row {row}: cannot parse label {value!r} as a boolean")
        self.row = row


class FactPatternError(DatasetError):
    pass


class AicPolicy(enum.Enum):
    EVERY_PAIR_EXCEEDS = "every_pair_exceeds"
    ANY_PAIR_EXCEEDS = "any_pair_exceeds"
    PER_PLAINTIFF_AGGREGATE = "per_plaintiff_aggregate"


@dataclass(frozen=True)
class FactPattern:
    plaintiffs: tuple[tuple[str, str], ...]
    defendants: tuple[tuple[str, str], ...]
    claims: tuple[tuple[str, str, str, int], ...]  # (plaintiff, defendant, cause, USD)

    def __post_init__(self):
        object.__setattr__(self, "plaintiffs", tuple(tuple(p) for p in self.plaintiffs))
        object.__setattr__(self, "defendants", tuple(tuple(d) for d in self.defendants))
        object.__setattr__(self, "claims", tuple(tuple(c) for c in self.claims))
        if not self.plaintiffs or not self.defendants:
            raise FactPatternError("at least one plaintiff and one defendant required")
        names = [n for n, _ in self.plaintiffs] + [n for n, _ in self.defendants]
        if len(set(names)) != len(names):
            raise FactPatternError("party names must be unique")
        p_names = {n for n, _ in self.plaintiffs}
        d_names = {n for n, _ in self.defendants}
        for plaintiff, defendant, _, amount in self.claims:
            if plaintiff not in p_names:
                raise FactPatternError(f"claim references unknown plaintiff {plaintiff!r}")
            if defendant not in d_names:
                raise FactPatternError(f"claim references unknown defendant {defendant!r}")
            if amount <= 0:
                raise FactPatternError("claim amounts must be positive")


@dataclass(frozen=True)
class DjVerdict:
    complete_diversity: bool
    aic_satisfied: bool
    answer: bool
    per_pair_totals: Mapping[tuple[str, str], int]

    def element_gold(self) -> dict[str, bool]:
        """Gold sub-answers under the canonical A=diversity, B=AiC labeling."""
        return {"A": self.complete_diversity, "B": self.aic_satisfied}


def dj_oracle(pattern: FactPattern, policy: AicPolicy = AicPolicy.EVERY_PAIR_EXCEEDS) -> DjVerdict:
    """Mechanical application of the diversity-jurisdiction rule."""
    defendant_states = {state for _, state in pattern.defendants}
    complete_diversity = all(state not in defendant_states for _, state in pattern.plaintiffs)

    totals: dict[tuple[str, str], int] = {}
    for plaintiff, defendant, _, amount in pattern.claims:
        pair = (plaintiff, defendant)
        totals[pair] = totals.get(pair, 0) + amount

    if policy is AicPolicy.EVERY_PAIR_EXCEEDS:
        aic = bool(totals) and all(total > AIC_THRESHOLD for total in totals.values())
    elif policy is AicPolicy.ANY_PAIR_EXCEEDS:
        aic = any(total > AIC_THRESHOLD for total in totals.values())
    else:
        by_plaintiff: dict[str, int] = {}
        for (plaintiff, _), total in totals.items():
            by_plaintiff[plaintiff] = by_plaintiff.get(plaintiff, 0) + total
        aic = bool(by_plaintiff) and all(total > AIC_THRESHOLD for total in by_plaintiff.values())

    return DjVerdict(
        complete_diversity=complete_diversity,
        aic_satisfied=aic,
        answer=complete_diversity and aic,
        per_pair_totals=totals,
    )


# --- rendering and its inverse -------------------------------------------

_CITIZEN_RE = re.compile(r"^(?P<name>[A-Z][A-Za-z]*) is from (?P<state>[A-Z][A-Za-z ]*?)$")
_CLAIM_RE = re.compile(
    r"^(?P<plaintiffs>.+?) (?:both )?(?:sues|sue) (?P<defendants>.+?)(?: each)? for (?P<claims>.+)$"
)
_CAUSE_AMOUNT_RE = re.compile(r"^(?P<cause>.+?) for \$(?P<amount>[0-9][0-9,]*)$")


def render_fact_pattern(pattern: FactPattern) -> str:
    """Benchmark-style prose; parse_fact_pattern inverts it."""
    parts = [f"{name} is from {state}." for name, state in pattern.plaintiffs]
    parts += [f"{name} is from {state}." for name, state in pattern.defendants]

    # One claim sentence per defendant group: within a group all plaintiffs
    # bring the same cause/amount list (cross-product shape), and consecutive
    # defendants sharing plaintiffs and causes merge into "D1 and D2 each".
    order: list[str] = []
    by_defendant: dict[str, list[tuple[str, str, int]]] = {}
    for plaintiff, defendant, cause, amount in pattern.claims:
        if defendant not in by_defendant:
            by_defendant[defendant] = []
            order.append(defendant)
        by_defendant[defendant].append((plaintiff, cause, amount))

    merged: list[tuple[list[str], list[str], list[tuple[str, int]]]] = []
    for defendant in order:
        rows = by_defendant[defendant]
        suers: list[str] = []
        for plaintiff, _, _ in rows:
            if plaintiff not in suers:
                suers.append(plaintiff)
        causes = [(cause, amount) for plaintiff, cause, amount in rows if plaintiff == suers[0]]
        expected = [(p, cause, amount) for p in suers for cause, amount in causes]
        if rows != expected:
            raise FactPatternError("claims do not form renderable joint claim sentences")
        if merged and merged[-1][0] == suers and merged[-1][2] == causes:
            merged[-1][1].append(defendant)
        else:
            merged.append((suers, [defendant], causes))

    for suers, sued, causes in merged:
        claims_text = " and ".join(f"{cause} for ${amount:,}" for cause, amount in causes)
        subject = " and ".join(suers) + (" both" if len(suers) > 1 else "")
        verb = "sue" if len(suers) > 1 else "sues"
        objects = " and ".join(sued) + (" each" if len(sued) > 1 else "")
        parts.append(f"{subject} {verb} {objects} for {claims_text}.")
    return " ".join(parts)


def parse_fact_pattern(text: str) -> FactPattern:
    """Recover the structured pattern from rendered prose."""
    sentences = [s.strip() for s in re.findall(r"[^.]+\.", text)]
    states: dict[str, str] = {}
    claim_rows: list[tuple[list[str], list[str], list[tuple[str, int]]]] = []
    for sentence in sentences:
        body = sentence[:-1].strip()
        citizen = _CITIZEN_RE.match(body)
        if citizen:
            states[citizen.group("name")] = citizen.group("state")
            continue
        claim = _CLAIM_RE.match(body)
        if claim is None:
            raise FactPatternError(f"unrecognized sentence: {sentence!r}")
        plaintiffs = claim.group("plaintiffs").split(" and ")
        defendants = claim.group("defendants").split(" and ")
        causes: list[tuple[str, int]] = []
        for item in claim.group("claims").split(" and "):
            m = _CAUSE_AMOUNT_RE.match(item.strip())
            if m is None:
                raise FactPatternError(f"unrecognized claim item: {item!r}")
            causes.append((m.group("cause"), int(m.group("amount").replace(",", ""))))
        claim_rows.append((plaintiffs, defendants, causes))

    if not claim_rows:
        raise FactPatternError("no claim sentence found")

    plaintiff_order: list[str] = []
    defendant_order: list[str] = []
    claims: list[tuple[str, str, str, int]] = []
    for plaintiffs, defendants, causes in claim_rows:
        for name in plaintiffs:
            if name not in plaintiff_order:
                plaintiff_order.append(name)
        for name in defendants:
            if name not in defendant_order:
                defendant_order.append(name)
        for plaintiff in plaintiffs:
            for defendant in defendants:
                for cause, amount in causes:
                    claims.append((plaintiff, defendant, cause, amount))

    def with_state(name: str) -> tuple[str, str]:
        if name not in states:
            raise FactPatternError(f"no citizenship sentence for {name!r}")
        return (name, states[name])

    return FactPattern(
        plaintiffs=tuple(with_state(n) for n in plaintiff_order),
        defendants=tuple(with_state(n) for n in defendant_order),
        claims=tuple(claims),
    )


# --- generation ------------------------------------------------------------

def _random_pattern(rng: random.Random, level: int) -> FactPattern:
    n_plaintiffs, n_defendants, n_causes = _LEVELS[level]
    names = rng.sample(_NAMES, n_plaintiffs + n_defendants)
    plaintiff_names = names[:n_plaintiffs]
    defendant_names = names[n_plaintiffs:]

    plaintiff_states = [rng.choice(_STATES) for _ in plaintiff_names]
    defendant_states = []
    for _ in defendant_names:
        if rng.random() < 0.5:
            defendant_states.append(rng.choice(plaintiff_states))
        else:
            defendant_states.append(rng.choice([s for s in _STATES if s not in plaintiff_states]))

    sentence_count = n_defendants if level == 6 else 1
    causes = rng.sample(_CAUSES, n_causes * sentence_count)

    def amount() -> int:
        # Straddles the $75k threshold: single-claim pairs land either side,
        # multi-claim pair totals do too.
        if n_causes == 1:
            return rng.randrange(10, 141) * 1000
        return rng.randrange(5, 71) * 1000

    claims: list[tuple[str, str, str, int]] = []
    if level == 6:
        for i, defendant in enumerate(defendant_names):
            cause_list = [(causes[i * 2 + j], amount()) for j in range(n_causes)]
            for plaintiff in plaintiff_names:
                for cause, usd in cause_list:
                    claims.append((plaintiff, defendant, cause, usd))
    elif level == 2:
        cause, usd = causes[0], amount()
        for defendant in defendant_names:
            claims.append((plaintiff_names[0], defendant, cause, usd))
    else:
        cause_list = [(c, amount()) for c in causes]
        for plaintiff in plaintiff_names:
            for defendant in defendant_names:
                for cause, usd in cause_list:
                    claims.append((plaintiff, defendant, cause, usd))

    return FactPattern(
        plaintiffs=tuple(zip(plaintiff_names, plaintiff_states)),
        defendants=tuple(zip(defendant_names, defendant_states)),
        claims=tuple(claims),
    )


def generate_dj(
    level: int,
    n: int,
    seed: int,
    policy: AicPolicy = AicPolicy.EVERY_PAIR_EXCEEDS,
) -> list[tuple[Sample, FactPattern, DjVerdict]]:
    """Deterministic synthetic samples with ~50/50 labels via rejection sampling."""
    if level not in _LEVELS:
        raise DatasetError(f"diversity level must be 1-6, got {level}")
    rng = random.Random(f"dj:{level}:{seed}")
    out: list[tuple[Sample, FactPattern, DjVerdict]] = []
    for i in range(n):
        target = i % 2 == 0
        for _ in range(10_000):
            pattern = _random_pattern(rng, level)
            verdict = dj_oracle(pattern, policy)
            if verdict.answer == target:
                break
        else:
            raise DatasetError(f"could not generate a level-{level} sample with label {target}")
        sample = Sample(
            id=f"dj{level}-{i:04d}",
            rule_text=DJ_RULE_TEXT,
            facts=render_fact_pattern(pattern),
            issue=DJ_ISSUE_TEXT,
            rule_family=RuleFamily.diversity(level),
            gold=verdict.answer,
        )
        out.append((sample, pattern, verdict))
    return out


# --- loading ---------------------------------------------------------------

DEFAULT_MAPPING = {"rule": "rule", "facts": "facts", "issue": "issue", "answer": "answer"}

_TRUE_LABELS = {"yes", "true", "1"}
_FALSE_LABELS = {"no", "false", "0"}


def _normalize_label(value: object, row: int) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().strip(".").lower()
    if text in _TRUE_LABELS:
        return True
    if text in _FALSE_LABELS:
        return False
    raise UnparseableLabelError(row, value)


def _rows_from_jsonl(path: Path) -> Iterable[dict]:
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                yield json.loads(line)


def _rows_from_tsv(path: Path) -> Iterable[dict]:
    with path.open(encoding="utf-8", newline="") as handle:
        yield from csv.DictReader(handle, delimiter="\t")


def load_samples(
    path: str | Path,
    format: str | None = None,
    mapping: Mapping[str, str] | None = None,
    family: RuleFamily | None = None,
) -> list[Sample]:
    """Load a JSONL or TSV task file into Samples with normalized gold labels."""
    path = Path(path)
    fmt = format or ("tsv" if path.suffix.lower() in {".tsv", ".tab"} else "jsonl")
    if fmt not in {"jsonl", "tsv"}:
        raise DatasetError(f"unsupported format {fmt!r}")
    columns = dict(DEFAULT_MAPPING)
    columns.update(mapping or {})
    rows = list(_rows_from_jsonl(path) if fmt == "jsonl" else _rows_from_tsv(path))
    if not rows:
        raise DatasetError(f"{path}: file contains no samples")
    rule_family = family or RuleFamily.other(path.stem)

    samples: list[Sample] = []
    for index, row in enumerate(rows):
        for field in ("rule", "facts", "issue", "answer"):
            if columns[field] not in row:
                raise DatasetError(f"{path}: row {index} is missing column {columns[field]!r}")
        sample_id = str(row[columns["id"]]) if "id" in columns and columns["id"] in row else str(index)
        samples.append(
            Sample(
                id=sample_id,
                rule_text=str(row[columns["rule"]]),
                facts=str(row[columns["facts"]]),
                issue=str(row[columns["issue"]]),
                rule_family=rule_family,
                gold=_normalize_label(row[columns["answer"]], index),
            )
        )
    return samples


def write_samples(samples: Iterable[Sample], path: str | Path) -> None:
    """Write the canonical JSONL schema."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(
                json.dumps(
                    {
                        "id": sample.id,
                        "rule": sample.rule_text,
                        "facts": sample.facts,
                        "issue": sample.issue,
                        "answer": sample.gold,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def write_sidecar(
    rows: Iterable[tuple[Sample, FactPattern, DjVerdict]], path: str | Path
) -> None:
    """Structured fact patterns + verdicts for element-level audits."""
    payload = {
        "samples": [
            {
                "id": sample.id,
                "fact_pattern": {
                    "plaintiffs": [list(p) for p in pattern.plaintiffs],
                    "defendants": [list(d) for d in pattern.defendants],
                    "claims": [list(c) for c in pattern.claims],
                },
                "verdict": {
                    "complete_diversity": verdict.complete_diversity,
                    "aic_satisfied": verdict.aic_satisfied,
                    "answer": verdict.answer,
                    "per_pair_totals": [
                        {"plaintiff": p, "defendant": d, "total": total}
                        for (p, d), total in sorted(verdict.per_pair_totals.items())
                    ],
                },
                "element_gold": verdict.element_gold(),
            }
            for sample, pattern, verdict in rows
        ]
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def load_element_gold(path: str | Path) -> dict[str, dict[str, bool]]:
    """Per-sample element gold from a generator sidecar file."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return {row["id"]: row["element_gold"] for row in payload["samples"]}
