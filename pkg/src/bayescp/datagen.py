"""Synthetic score sequences and CSV ingestion."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

KINDS = ("iid_uniform", "alternating", "scripted_shift", "csv")


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """``length`` rounds drawn uniformly from ``[low * R, high * R]``."""

    length: int
    low: float
    high: float


def default_shift_schedule(T: int) -> tuple[Segment, ...]:
    quarter = max(T // 4, 1)
    lengths = [quarter, quarter, quarter, max(T - 3 * quarter, 0)]
    bands = [(0.0, 0.3), (0.6, 1.0), (0.0, 0.3), (0.6, 1.0)]
    return tuple(Segment(n, lo, hi) for n, (lo, hi) in zip(lengths, bands) if n > 0)


@dataclass(frozen=True)
class SequenceSpec:
    kind: str = "iid_uniform"
    T: int = 1000
    seed: int = 0
    R: float = 1.0
    shifts: tuple[Segment, ...] | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SequenceError(f"unknown sequence kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "csv" and self.T < 1:
            raise SequenceError("sequence length T must be >= 1")
        if not self.R > 0:
            raise SequenceError("R must be positive")
        if self.kind == "csv" and not self.path:
            raise SequenceError("csv sequences need a path")

    @classmethod
    def from_dict(cls, data: dict) -> "SequenceSpec":
        data = dict(data)
        unknown = set(data) - {"kind", "T", "seed", "R", "shifts", "path"}
        if unknown:
            raise SequenceError(f"unknown sequence keys: {sorted(unknown)}")
        shifts = data.pop("shifts", None)
        if shifts is not None:
            shifts = tuple(Segment(int(s["length"]), float(s["low"]), float(s["high"])) for s in shifts)
        return cls(shifts=shifts, **data)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "T": self.T, "seed": self.seed, "R": self.R}
        if self.shifts is not None:
            out["shifts"] = [{"length": s.length, "low": s.low, "high": s.high} for s in self.shifts]
        if self.path is not None:
            out["path"] = self.path
        return out


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator; the same seed gives the same stream on every platform."""
    return np.random.Generator(np.random.Philox(seed))


def parse_csv(text: str, R: float = 1.0) -> np.ndarray:
    """One score per line; a non-numeric first line is treated as a header."""
    values = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not row[0].strip():
            continue
        cell = row[0].strip()
        try:
            x = float(cell)
        except ValueError:
            if lineno == 1 and not values:
                continue
            raise SequenceError(f"line {lineno}: cannot parse score {cell!r}") from None
        if not (0.0 <= x <= R):
            raise SequenceError(f"line {lineno}: score {x} outside [0, {R}]")
        values.append(x)
    if not values:
        raise SequenceError("csv contains no scores")
    return np.array(values, dtype=float)


def generate(spec: SequenceSpec) -> np.ndarray:
    """Scores in ``[0, R]``; deterministic for a fixed spec."""
    R = spec.R
    if spec.kind == "csv":
        return parse_csv(Path(spec.path).read_text(), R)
    if spec.kind == "alternating":
        return np.where(np.arange(spec.T) % 2 == 0, R, 0.0)
    rng = make_rng(spec.seed)
    if spec.kind == "iid_uniform":
        return rng.random(spec.T) * R
    shifts = spec.shifts or default_shift_schedule(spec.T)
    parts = []
    for seg in shifts:
        if not 0.0 <= seg.low <= seg.high <= 1.0:
            raise SequenceError(f"segment band [{seg.low}, {seg.high}] must lie within [0, 1]")
        parts.append((seg.low + (seg.high - seg.low) * rng.random(seg.length)) * R)
    out = np.concatenate(parts) if parts else np.empty(0)
    if len(out) < spec.T:
        raise SequenceError(f"shift schedule covers {len(out)} rounds, fewer than T = {spec.T}")
    return out[: spec.T]
