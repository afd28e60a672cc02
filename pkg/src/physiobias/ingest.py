"""Empatica E4 session parsing, IAT label mapping, and session assembly.

E4 CSV layout: line 1 holds the initial unix timestamp, line 2 the sampling
rate, and every following line one sample. ACC.csv carries three
comma-separated columns (x, y, z) in device counts; 64 counts equal 1 g.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import EmptySignal, InsufficientData, LabelError, MissingChannel, ParseError
from .signals import Signal, TriaxialSignal

# Empatica convention; the device stores acceleration as signed counts.
ACC_COUNTS_PER_G = 64.0

# Sessions shorter than this after alignment carry too few windows to use.
MIN_SESSION_SECONDS = 30.0

CHANNEL_FILES = {
    "eda": "EDA.csv",
    "bvp": "BVP.csv",
    "hr": "HR.csv",
    "skt": "TEMP.csv",
    "acc": "ACC.csv",
}

_BIASED_TOKENS = frozenset({"strong", "moderate"})
_UNBIASED_TOKENS = frozenset({"slight", "no"})

#: The eight IAT result strings: four intensity levels crossed with the two
#: preference directions. The leading token alone decides the binary label.
CANONICAL_CATEGORIES = tuple(
    f"{level} preference for {direction}"
    for level in ("strong", "moderate", "slight", "no")
    for direction in ("White", "Black")
)


class Bias(IntEnum):
    UNBIASED = 0
    BIASED = 1


@dataclass(frozen=True)
class BiasLabel:
    """Binary bias label plus the IAT category it came from."""

    value: Bias
    source_category: str


@dataclass
class RawSession:
    """One participant's aligned raw recording with its label."""

    participant_id: str
    eda: Signal
    bvp: Signal
    hr: Signal
    skt: Signal
    acc: TriaxialSignal
    label: BiasLabel

    def channels(self) -> dict[str, Signal | TriaxialSignal]:
        return {"eda": self.eda, "bvp": self.bvp, "hr": self.hr, "skt": self.skt, "acc": self.acc}


def _parse_header_line(line: str, path: Path, lineno: int, ncols: int) -> float:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != ncols:
        raise ParseError(f"{path}:{lineno}: expected {ncols} header value(s), got {len(parts)}")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ParseError(f"{path}:{lineno}: non-numeric header {line!r}") from None
    if any(v != values[0] for v in values[1:]):
        raise ParseError(f"{path}:{lineno}: per-axis header values differ: {line!r}")
    if not np.isfinite(values[0]):
        raise ParseError(f"{path}:{lineno}: non-finite header value {line!r}")
    return values[0]


def parse_e4_csv(
    path: str | Path,
    channel: str,
    acc_counts_per_g: float = ACC_COUNTS_PER_G,
) -> Signal | TriaxialSignal:
    """Parse one E4 channel file.

    Args:
        path: CSV file in E4 layout.
        channel: one of EDA, BVP, HR, TEMP, ACC (case-insensitive).
        acc_counts_per_g: divisor converting ACC device counts to g.

    Returns:
        Signal for single-column channels, TriaxialSignal for ACC.

    Raises:
        ParseError: malformed header or non-numeric row (with line number).
        EmptySignal: header present but no data rows.
    """
    path = Path(path)
    channel = channel.upper()
    if channel not in {"EDA", "BVP", "HR", "TEMP", "ACC"}:
        raise ValueError(f"unknown channel {channel!r}")
    ncols = 3 if channel == "ACC" else 1

    lines = path.read_text().splitlines()
    if len(lines) < 2:
        raise ParseError(f"{path}: file has no header (need timestamp and rate lines)")
    start_time = _parse_header_line(lines[0], path, 1, ncols)
    rate = _parse_header_line(lines[1], path, 2, ncols)
    if rate <= 0:
        raise ParseError(f"{path}:2: sample rate must be > 0, got {rate}")

    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != ncols:
            raise ParseError(f"{path}:{lineno}: expected {ncols} column(s), got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: non-numeric row {line!r}") from None

    if not rows:
        raise EmptySignal(f"{path}: no data rows")

    data = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0, 0]) + 3
        raise ParseError(f"{path}:{bad}: non-finite sample")
    if channel == "ACC":
        return TriaxialSignal(start_time=start_time, rate=rate, samples=data / acc_counts_per_g)
    return Signal(start_time=start_time, rate=rate, samples=data[:, 0])


def write_e4_csv(
    signal: Signal | TriaxialSignal,
    path: str | Path,
    acc_counts_per_g: float = ACC_COUNTS_PER_G,
) -> None:
    """Write a signal back to E4 CSV layout (inverse of parse_e4_csv)."""
    path = Path(path)
    if isinstance(signal, TriaxialSignal):
        ncols = 3
        body = signal.samples * acc_counts_per_g
        lines = [",".join(repr(float(v)) for v in row) for row in body]
    else:
        ncols = 1
        lines = [repr(float(v)) for v in signal.samples]
    header = [
        ",".join([repr(float(signal.start_time))] * ncols),
        ",".join([repr(float(signal.rate))] * ncols),
    ]
    path.write_text("\n".join(header + lines) + "\n")


def map_iat_category(category: str) -> BiasLabel:
    """Map an IAT category string to the binary bias label.

    Strong and moderate preferences are biased; slight and no preferences
    are unbiased. Matching is case-insensitive on the leading token.

    Raises:
        LabelError: token outside the IAT vocabulary.
    """
    tokens = category.strip().split()
    if not tokens:
        raise LabelError("empty IAT category")
    head = tokens[0].lower()
    if head in _BIASED_TOKENS:
        return BiasLabel(value=Bias.BIASED, source_category=category)
    if head in _UNBIASED_TOKENS:
        return BiasLabel(value=Bias.UNBIASED, source_category=category)
    raise LabelError(f"unrecognized IAT category {category!r}")


def load_labels(path: str | Path) -> dict[str, BiasLabel]:
    """Read the labels CSV (header: participant_id,iat_category)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"participant_id", "iat_category"} <= set(reader.fieldnames):
            raise ParseError(f"{path}: expected header 'participant_id,iat_category'")
        labels: dict[str, BiasLabel] = {}
        for row in reader:
            pid = (row["participant_id"] or "").strip()
            if not pid:
                raise ParseError(f"{path}: row with empty participant_id")
            if pid in labels:
                raise LabelError(f"{path}: duplicate label for participant {pid!r}")
            labels[pid] = map_iat_category(row["iat_category"] or "")
    return labels


def _trim(sig: Signal | TriaxialSignal, t0: float, t1: float) -> Signal | TriaxialSignal:
    """Trim to samples whose timestamps lie in [t0, t1)."""
    n = sig.samples.shape[0]
    i0 = max(0, int(np.ceil((t0 - sig.start_time) * sig.rate - 1e-9)))
    i1 = min(n, int(np.ceil((t1 - sig.start_time) * sig.rate - 1e-9)))
    if i1 <= i0:
        raise InsufficientData("signal does not overlap the common interval")
    cls = type(sig)
    return cls(
        start_time=sig.start_time + i0 / sig.rate,
        rate=sig.rate,
        samples=sig.samples[i0:i1],
    )


def assemble_session(
    session_dir: str | Path,
    labels: dict[str, BiasLabel],
    min_duration: float = MIN_SESSION_SECONDS,
    acc_counts_per_g: float = ACC_COUNTS_PER_G,
) -> RawSession:
    """Parse one session directory into an aligned, labeled RawSession.

    The five channels are trimmed to their maximal common time interval;
    nothing is ever padded. The directory name is the participant id.

    Raises:
        MissingChannel: a channel file is absent.
        LabelError: the participant has no label.
        InsufficientData: the common interval is shorter than min_duration.
    """
    session_dir = Path(session_dir)
    participant_id = session_dir.name
    if participant_id not in labels:
        raise LabelError(f"no label for participant {participant_id!r}")

    parsed: dict[str, Signal | TriaxialSignal] = {}
    for name, filename in CHANNEL_FILES.items():
        fpath = session_dir / filename
        if not fpath.exists():
            raise MissingChannel(f"{participant_id}: missing {filename}")
        parsed[name] = parse_e4_csv(fpath, filename.removesuffix(".csv"), acc_counts_per_g)

    t0 = max(s.start_time for s in parsed.values())
    t1 = min(s.end_time for s in parsed.values())
    if t1 - t0 < min_duration:
        raise InsufficientData(
            f"{participant_id}: common interval {max(t1 - t0, 0.0):.1f}s "
            f"is below the {min_duration:.0f}s minimum"
        )
    trimmed = {name: _trim(s, t0, t1) for name, s in parsed.items()}

    return RawSession(
        participant_id=participant_id,
        eda=trimmed["eda"],
        bvp=trimmed["bvp"],
        hr=trimmed["hr"],
        skt=trimmed["skt"],
        acc=trimmed["acc"],
        label=labels[participant_id],
    )
