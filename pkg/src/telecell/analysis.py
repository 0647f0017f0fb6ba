"""Evaluation kit: SUS scoring, Welch's t, Cohen's d, task metrics.

Works from published summary statistics and from annotated session logs;
p-values are deliberately out of scope (t, df, and d are what the summary
statistics support).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .session import read_session

# annotation classes recognized in session logs
ANNOTATION_COMPLETE = "complete"
ANNOTATION_MINOR = "minor"
ANNOTATION_MAJOR = "major"


@dataclass
class WelchResult:
    t: float
    df: float


@dataclass
class TaskMetrics:
    n_max: int
    e_minor: int
    e_major: int


def sus_score(items) -> float:
    """System Usability Scale score in [0, 100].

    Odd items (1-indexed, positive statements) normalize as rating - 1,
    even items (negative statements) as 5 - rating; the normalized sum
    is scaled by 2.5.
    """
    items = list(items)
    if len(items) != 10:
        raise ValueError(f"expected 10 Likert items, got {len(items)}")
    total = 0.0
    for i, r in enumerate(items, start=1):
        if not (isinstance(r, (int, float)) and 1 <= r <= 5):
            raise ValueError(f"item {i} must be in 1..5, got {r!r}")
        total += (r - 1) if i % 2 == 1 else (5 - r)
    return 2.5 * total


def welch_t(mean1: float, sd1: float, n1: int, mean2: float, sd2: float,
            n2: int) -> WelchResult:
    """Welch's t statistic with Welch-Satterthwaite degrees of freedom."""
    if n1 < 2 or n2 < 2:
        raise ValueError("group sizes must be >= 2")
    if sd1 <= 0 or sd2 <= 0:
        raise ValueError("standard deviations must be > 0")
    v1 = sd1 * sd1 / n1
    v2 = sd2 * sd2 / n2
    t = (mean1 - mean2) / math.sqrt(v1 + v2)
    df = (v1 + v2) ** 2 / (v1 * v1 / (n1 - 1) + v2 * v2 / (n2 - 1))
    return WelchResult(t, df)


def cohens_d(mean1: float, sd1: float, mean2: float, sd2: float) -> float:
    """Cohen's d with the pooled SD for equal group sizes."""
    if sd1 <= 0 or sd2 <= 0:
        raise ValueError("standard deviations must be > 0")
    pooled = math.sqrt((sd1 * sd1 + sd2 * sd2) / 2.0)
    return (mean1 - mean2) / pooled


def read_sus_file(path) -> list[list[int]]:
    """One response per line: 10 comma-separated integers in 1..5."""
    responses = []
    with open(path, "r", encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                items = [int(tok) for tok in line.split(",")]
            except ValueError as e:
                raise ValueError(f"line {n}: {e}") from e
            if len(items) != 10:
                raise ValueError(f"line {n}: expected 10 items, got {len(items)}")
            responses.append(items)
    return responses


def _annotation_class(text: str) -> str:
    return text.split(":", 1)[0].split()[0].strip().lower()


def task_metrics(session_path, limit_s: float) -> TaskMetrics:
    """Count task annotations that fall within the time limit.

    Records are sorted by timestamp first; the limit window starts at the
    first record.  n_max counts `complete` annotations, e_minor/e_major
    the `minor`/`major` classes.
    """
    _, records, _ = read_session(session_path)
    records = sorted(records, key=lambda r: r.t_us)
    if not records:
        return TaskMetrics(0, 0, 0)
    t0 = records[0].t_us
    limit_us = limit_s * 1e6
    n_max = e_minor = e_major = 0
    for r in records:
        if not r.annotation or (r.t_us - t0) > limit_us:
            continue
        cls = _annotation_class(r.annotation)
        if cls == ANNOTATION_COMPLETE:
            n_max += 1
        elif cls == ANNOTATION_MINOR:
            e_minor += 1
        elif cls == ANNOTATION_MAJOR:
            e_major += 1
    return TaskMetrics(n_max, e_minor, e_major)
