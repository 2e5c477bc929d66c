"""Four-level success annotations and their Average / Best@4 aggregation."""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

LEVELS = ("contact", "end_state", "task_complete", "perfect")
GENS_PER_PROMPT = 4


@dataclass(frozen=True)
class Annotation:
    prompt_id: str
    gen_idx: int
    level1: bool
    level2: bool
    level3: bool
    level4: bool

    @property
    def levels(self) -> tuple[bool, bool, bool, bool]:
        return (self.level1, self.level2, self.level3, self.level4)


@dataclass(frozen=True)
class Violation:
    prompt_id: str
    gen_idx: int | None
    rule: str

    def __str__(self) -> str:
        where = self.prompt_id if self.gen_idx is None else f"{self.prompt_id}#{self.gen_idx}"
        return f"{where}: {self.rule}"


class ValidationError(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(map(str, self.violations)))


def validate(annotations: Iterable[Annotation]) -> list[Violation]:
    """Every broken rule; an empty list means the set is consistent."""
    out: list[Violation] = []
    gens = defaultdict(list)
    for a in annotations:
        gens[a.prompt_id].append(a.gen_idx)
        if not 1 <= a.gen_idx <= GENS_PER_PROMPT:
            out.append(Violation(a.prompt_id, a.gen_idx, "gen_idx outside 1..4"))
        if a.level3 and not (a.level1 and a.level2):
            out.append(Violation(a.prompt_id, a.gen_idx, "level3 requires level1 and level2"))
        if a.level4 and not a.level3:
            out.append(Violation(a.prompt_id, a.gen_idx, "level4 requires level3"))
    for pid, idx in gens.items():
        if len(idx) != GENS_PER_PROMPT:
            out.append(Violation(pid, None, f"expected {GENS_PER_PROMPT} generations, got {len(idx)}"))
        elif len(set(idx)) != len(idx):
            out.append(Violation(pid, None, "duplicate gen_idx"))
    return out


@dataclass(frozen=True)
class LevelScore:
    average_pct: float
    best_at_4_pct: float


def aggregate(annotations: Sequence[Annotation], check: bool = True) -> list[LevelScore]:
    """Per-level Average (share of all videos) and Best@4 (share of prompts with any success)."""
    annotations = list(annotations)
    if not annotations:
        raise ValueError("no annotations to aggregate")
    if check:
        bad = validate(annotations)
        if bad:
            raise ValidationError(bad)
    by_prompt = defaultdict(list)
    for a in annotations:
        by_prompt[a.prompt_id].append(a.levels)
    n_videos, n_prompts = len(annotations), len(by_prompt)
    scores = []
    for lvl in range(4):
        hits = sum(lv[lvl] for a in by_prompt.values() for lv in a)
        best = sum(any(lv[lvl] for lv in a) for a in by_prompt.values())
        scores.append(LevelScore(100.0 * hits / n_videos, 100.0 * best / n_prompts))
    return scores


# --------------------------------------------------------------------------- I/O

CSV_FIELDS = ("prompt_id", "gen_idx", "l1", "l2", "l3", "l4")


def _flag(s: str, where: str) -> bool:
    s = s.strip()
    if s not in ("0", "1"):
        raise ValueError(f"{where}: level flags must be 0 or 1, got {s!r}")
    return s == "1"


def read_annotations(path) -> list[Annotation]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"annotation CSV lacks columns {sorted(missing)}")
        out = []
        for line, row in enumerate(reader, start=2):
            where = f"{path}:{line}"
            out.append(Annotation(row["prompt_id"], int(row["gen_idx"]),
                                  *(_flag(row[f"l{i}"], where) for i in range(1, 5))))
    return out


def write_annotations(path, annotations: Iterable[Annotation]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for a in annotations:
            w.writerow([a.prompt_id, a.gen_idx, *(int(v) for v in a.levels)])


def report(scores: Sequence[LevelScore]) -> tuple[str, str]:
    """``(plain-text table, JSON)`` renderings of an aggregate."""
    lines = [f"{'level':<16}{'Average':>9}{'Best@4':>9}"]
    rows = []
    for i, (name, s) in enumerate(zip(LEVELS, scores), start=1):
        lines.append(f"{i} {name:<14}{s.average_pct:>9.1f}{s.best_at_4_pct:>9.1f}")
        rows.append({"level": i, "name": name, "average_pct": s.average_pct,
                     "best_at_4_pct": s.best_at_4_pct})
    return "\n".join(lines), json.dumps({"levels": rows})
