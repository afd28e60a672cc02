"""Run-merging smoothing of per-window label sequences.

A prediction sequence is viewed as maximal runs of identical labels. Passes
k = 1, 2, 3, ... sweep the sequence left to right; every run of length
exactly k whose two flanking runs agree is relabeled to the flanking label,
and a run at a sequence boundary is absorbed into its single neighbor. Runs
are re-derived immediately after every merge, so an absorbed run can never
trigger a further merge inside the same sweep.

Between passes the process stops once fewer than three runs remain, or once
every remaining run is longer than the mean run length of the original
sequence. (Stopping at three *or fewer* runs would freeze three-run inputs
and the canonical trace 1101 -> 1111 could never happen.)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class RunBlock:
    """Maximal streak of one label: [start, start + length)."""

    label: int
    start: int
    length: int


def runs(labels: Sequence[int]) -> list[RunBlock]:
    """Run-length decomposition; runs tile the sequence exactly."""
    if len(labels) == 0:
        raise ValueError("empty label sequence")
    out: list[RunBlock] = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append(RunBlock(label=int(labels[start]), start=start, length=i - start))
            start = i
    return out


def _format_runs(rs: list[RunBlock]) -> str:
    return " ".join(f"{r.label}x{r.length}" for r in rs)


def smooth_with_trace(labels: Sequence[int]) -> tuple[list[int], list[str]]:
    """Smooth a 0/1 sequence; also return one trace line per executed pass."""
    current = [int(v) for v in labels]
    original = runs(current)
    original_mean = len(current) / len(original)
    trace = [f"original: {_format_runs(original)}"]

    k = 0
    while True:
        k += 1
        rs = runs(current)
        if len(rs) <= 2:
            break
        if all(r.length > original_mean for r in rs):
            break
        if k > max(r.length for r in rs):
            break

        pos = 0
        while True:
            rs = runs(current)
            target = next((r for r in rs if r.length == k and r.start >= pos), None)
            if target is None:
                break
            idx = rs.index(target)
            left = rs[idx - 1] if idx > 0 else None
            right = rs[idx + 1] if idx < len(rs) - 1 else None
            if left is not None and right is not None:
                if left.label == right.label:
                    fill = left.label
                else:
                    pos = target.start + target.length  # flanks disagree: skip
                    continue
            elif left is not None or right is not None:
                fill = (left or right).label
            else:
                break  # single run spans the sequence
            current[target.start:target.start + target.length] = [fill] * target.length
            pos = target.start  # merged run grew past length k; scan onward
        trace.append(f"pass {k}: {_format_runs(runs(current))}")
    return current, trace


def smooth(labels: Sequence[int]) -> list[int]:
    """Smooth a per-window 0/1 prediction sequence into consecutive blocks."""
    smoothed, _ = smooth_with_trace(labels)
    return smoothed


def final_label(labels: Sequence[int]) -> int:
    """Label of the longest run. A cross-label tie goes to the label with
    the larger total count in the sequence, then to label 1."""
    rs = runs(labels)
    longest = max(r.length for r in rs)
    top_labels = {r.label for r in rs if r.length == longest}
    if len(top_labels) == 1:
        return top_labels.pop()
    ones = sum(1 for v in labels if v == 1)
    zeros = len(labels) - ones
    if ones > zeros:
        return 1
    if zeros > ones:
        return 0
    return 1


def majority_window_location(labels: Sequence[int], verdict: int) -> str:
    """Position (start/middle/end) of the longest run carrying the verdict
    label, judged by the third of the sequence its midpoint falls in."""
    rs = [r for r in runs(labels) if r.label == verdict]
    if not rs:
        raise ValueError("verdict label absent from the sequence")
    longest = max(rs, key=lambda r: r.length)  # first one wins ties
    midpoint = longest.start + (longest.length - 1) / 2.0
    n = len(labels)
    if midpoint < n / 3.0:
        return "start"
    if midpoint < 2.0 * n / 3.0:
        return "middle"
    return "end"


def location_summary(
    locations: Iterable[str],
    verdicts: Iterable[int],
    truths: Iterable[int],
) -> float | None:
    """Fraction of correctly-labeled biased participants whose majority
    window sits at the end. None (undefined) when there are none."""
    hits = [
        loc
        for loc, verdict, truth in zip(locations, verdicts, truths)
        if truth == 1 and verdict == 1
    ]
    if not hits:
        return None
    return sum(1 for loc in hits if loc == "end") / len(hits)
