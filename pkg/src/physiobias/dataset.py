"""Feature matrix container shared by the learner and the evaluation harness.

Missing feature values are carried as NaN; the tree learner routes them
through per-split default branches, so no imputation happens anywhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Dataset:
    """Rows are 5-second windows; columns are named features."""

    X: np.ndarray                 # (n, d) float, NaN = missing
    y: np.ndarray                 # (n,) int labels in {0, 1}
    participant_ids: np.ndarray   # (n,) str
    window_indices: np.ndarray    # (n,) int, window ordinal within participant
    column_names: list[str]

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        self.participant_ids = np.asarray(self.participant_ids, dtype=object)
        self.window_indices = np.asarray(self.window_indices, dtype=int)
        n = self.X.shape[0]
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if self.X.shape[1] != len(self.column_names):
            raise ValueError("X width does not match column_names")
        if not (self.y.shape == (n,) == self.participant_ids.shape == self.window_indices.shape):
            raise ValueError("row metadata lengths disagree")
        if n and not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if any(not pid for pid in self.participant_ids):
            raise ValueError("participant ids must be non-empty")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    def participants(self) -> list[str]:
        seen: dict[str, None] = {}
        for pid in self.participant_ids:
            seen.setdefault(pid, None)
        return sorted(seen)

    def participant_label(self, pid: str) -> int:
        rows = np.flatnonzero(self.participant_ids == pid)
        if rows.size == 0:
            raise KeyError(pid)
        return int(self.y[rows[0]])

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            X=self.X[rows],
            y=self.y[rows],
            participant_ids=self.participant_ids[rows],
            window_indices=self.window_indices[rows],
            column_names=list(self.column_names),
        )

    def to_csv(self, path: str | Path, meta: dict | None = None) -> None:
        """Write the matrix with a `participant_id,window_index,label,...`
        header; missing cells are left empty. `meta` lands in a leading
        comment line so re-parsing can skip it."""
        path = Path(path)
        lines = []
        if meta is not None:
            lines.append("# " + json.dumps(meta, sort_keys=True))
        lines.append(",".join(["participant_id", "window_index", "label"] + self.column_names))
        for i in range(self.n_rows):
            cells = [str(self.participant_ids[i]), str(int(self.window_indices[i])), str(int(self.y[i]))]
            cells += ["" if np.isnan(v) else repr(float(v)) for v in self.X[i]]
            lines.append(",".join(cells))
        path.write_text("\n".join(lines) + "\n")


def from_csv(path: str | Path) -> Dataset:
    """Read a feature matrix written by Dataset.to_csv."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty feature file")
    header = lines[0].split(",")
    if header[:3] != ["participant_id", "window_index", "label"]:
        raise ValueError(f"{path}: unexpected header {header[:3]}")
    columns = header[3:]
    pids, widx, labels, rows = [], [], [], []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}: row width {len(cells)} != header width {len(header)}")
        pids.append(cells[0])
        widx.append(int(cells[1]))
        labels.append(int(cells[2]))
        rows.append([float(c) if c else np.nan for c in cells[3:]])
    return Dataset(
        X=np.asarray(rows, dtype=float).reshape(len(rows), len(columns)),
        y=np.asarray(labels),
        participant_ids=np.asarray(pids, dtype=object),
        window_indices=np.asarray(widx),
        column_names=columns,
    )


def concat(parts: list[Dataset]) -> Dataset:
    """Stack datasets that share a column vocabulary."""
    if not parts:
        raise ValueError("nothing to concatenate")
    cols = parts[0].column_names
    for p in parts[1:]:
        if p.column_names != cols:
            raise ValueError("column vocabularies differ")
    return Dataset(
        X=np.vstack([p.X for p in parts]),
        y=np.concatenate([p.y for p in parts]),
        participant_ids=np.concatenate([p.participant_ids for p in parts]),
        window_indices=np.concatenate([p.window_indices for p in parts]),
        column_names=list(cols),
    )
