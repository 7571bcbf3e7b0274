"""Per-completion training logs, reward curves and log summaries.

Telemetry lines hold only values that are a deterministic function of the
seed, so two runs with the same configuration write byte-identical logs.
Wall-clock timings go to a separate sidecar file.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from .rewards import COMPONENTS

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CURVE_COLUMNS = ("step", "total", *COMPONENTS, "config_digest")


class TelemetryError(OSError):
    """Telemetry could not be written."""


class CorruptRecord(ValueError):
    pass


class MixedDigest(ValueError):
    def __init__(self, digests):
        self.digests = sorted(digests)
        super().__init__(f"telemetry mixes runs with config digests {', '.join(self.digests)}")


@dataclass(frozen=True)
class TelemetryRecord:
    schema_version: int
    config_digest: str
    step: int
    ev_id: str
    completion_index: int
    prompt_digest: str
    completion: str
    completion_length: int
    parsed_codes: list
    invalid_tokens: list
    correctness: float
    partial: float
    format: float
    validity: float
    judge: float
    total: float
    advantage: float
    objective: float
    learning_rate: float
    grad_norm: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TelemetryRecord":
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in d]
        if missing:
            raise CorruptRecord(f"missing fields {missing}")
        if d["schema_version"] != SCHEMA_VERSION:
            raise CorruptRecord(f"unsupported schema version {d['schema_version']}")
        rec = cls(**{n: d[n] for n in names})
        parts = sum(getattr(rec, c) for c in COMPONENTS)
        if not math.isclose(parts, rec.total, rel_tol=0.0, abs_tol=1e-9):
            raise CorruptRecord(f"step {rec.step}: total {rec.total} != component sum {parts}")
        return rec


def records_from_report(report, config_digest: str) -> list[TelemetryRecord]:
    """One record per completion of a training step."""
    out = []
    for i, text in enumerate(report.completions):
        r = report.rewards[i]
        out.append(TelemetryRecord(
            schema_version=SCHEMA_VERSION,
            config_digest=config_digest,
            step=report.step,
            ev_id=report.ev_id,
            completion_index=i,
            prompt_digest=report.prompt_digest,
            completion=text,
            completion_length=report.lengths[i],
            parsed_codes=list(report.parsed_codes[i]),
            invalid_tokens=list(report.invalid_tokens[i]),
            correctness=r.correctness,
            partial=r.partial,
            format=r.format,
            validity=r.validity,
            judge=r.judge,
            total=r.total,
            advantage=report.advantages[i],
            objective=report.objective,
            learning_rate=report.learning_rate,
            grad_norm=report.grad_norm,
        ))
    return out


class TelemetryWriter:
    """Append-only sink for StepReports; use as a ``train`` sink.

    Lines are flushed to disk at least every ``flush_every`` steps and on close.
    """

    def __init__(self, path: str | Path, config_digest: str, flush_every: int = 10,
                 timings_path: str | Path | None = None, clock=time.time):
        self.path = Path(path)
        self.config_digest = config_digest
        self.flush_every = flush_every
        self.clock = clock
        self.records_written = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self.path, "a", encoding="utf-8")
            self._timings = open(timings_path, "a", encoding="utf-8") if timings_path else None
        except OSError as e:
            raise TelemetryError(f"cannot open telemetry log {self.path}: {e}") from e

    def __call__(self, report) -> None:
        try:
            for rec in records_from_report(report, self.config_digest):
                self._fh.write(rec.to_json() + "\n")
                self.records_written += 1
            if self._timings is not None:
                row = {"step": report.step, "wall_clock": self.clock(), "config_digest": self.config_digest}
                self._timings.write(json.dumps(row) + "\n")
            if report.step % self.flush_every == 0:
                self.flush()
        except OSError as e:
            raise TelemetryError(f"writing {self.path} failed at step {report.step}: {e}") from e

    def flush(self) -> None:
        self._fh.flush()
        if self._timings is not None:
            self._timings.flush()

    def close(self) -> None:
        try:
            self.flush()
        finally:
            self._fh.close()
            if self._timings is not None:
                self._timings.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_telemetry(path: str | Path) -> tuple[list[TelemetryRecord], int]:
    """Parse a telemetry log, skipping corrupt lines. Returns (records, skipped)."""
    records, skipped = [], 0
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(TelemetryRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, CorruptRecord, TypeError, KeyError) as e:
                log.warning("%s:%d: skipping corrupt record (%s)", path, n, e)
                skipped += 1
    return records, skipped


def truncate_telemetry(path: str | Path, last_step: int) -> int:
    """Drop records after ``last_step`` (used when resuming). Returns records kept."""
    path = Path(path)
    if not path.exists():
        return 0
    kept = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            try:
                if json.loads(line)["step"] <= last_step:
                    kept.append(line if line.endswith("\n") else line + "\n")
            except (json.JSONDecodeError, KeyError, TypeError):
                continue
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(kept), encoding="utf-8")
    tmp.replace(path)
    return len(kept)


def _single_digest(records: Sequence[TelemetryRecord]) -> str | None:
    digests = {r.config_digest for r in records}
    if len(digests) > 1:
        raise MixedDigest(digests)
    return next(iter(digests), None)


def reward_curve(records: Sequence[TelemetryRecord]) -> list[dict]:
    """Per-step means of the total and of each reward component."""
    digest = _single_digest(records)
    by_step: dict[int, list[TelemetryRecord]] = {}
    for r in records:
        by_step.setdefault(r.step, []).append(r)
    rows = []
    for step in sorted(by_step):
        group = by_step[step]
        row = {"step": step, "total": sum(r.total for r in group) / len(group)}
        for c in COMPONENTS:
            row[c] = sum(getattr(r, c) for r in group) / len(group)
        row["config_digest"] = digest
        rows.append(row)
    return rows


def write_curve(path: str | Path, rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    mean_validity: float
    mean_length: float


@dataclass(frozen=True)
class TelemetrySummary:
    config_digest: str | None
    records: int
    skipped: int
    steps: int
    first_mean: float
    last_mean: float
    windows: tuple

    @property
    def delta(self) -> float:
        return self.last_mean - self.first_mean

    def render(self, head: int = 50) -> str:
        lines = [
            f"config digest   {self.config_digest}",
            f"records         {self.records} ({self.skipped} skipped)",
            f"steps           {self.steps}",
            f"first {head} mean   {self.first_mean:.4f}",
            f"last {head} mean    {self.last_mean:.4f}",
            f"delta           {self.delta:+.4f}",
            "",
            f"{'steps':>13}  {'validity':>9}  {'length':>7}",
        ]
        for w in self.windows:
            lines.append(f"{w.start:>6}-{w.end:<6}  {w.mean_validity:>9.4f}  {w.mean_length:>7.2f}")
        return "\n".join(lines)


def summarize(records: Sequence[TelemetryRecord], skipped: int = 0, head: int = 50,
              window: int = 100) -> TelemetrySummary:
    """Compare the first and last ``head`` steps and bucket validity/length by window."""
    digest = _single_digest(records)
    curve = reward_curve(records)
    totals = [row["total"] for row in curve]
    first = totals[:head]
    last = totals[-head:]
    windows = []
    if records:
        lo = min(r.step for r in records)
        hi = max(r.step for r in records)
        for start in range(lo, hi + 1, window):
            chunk = [r for r in records if start <= r.step < start + window]
            if chunk:
                windows.append(Window(
                    start, min(start + window - 1, hi),
                    sum(r.validity for r in chunk) / len(chunk),
                    sum(r.completion_length for r in chunk) / len(chunk),
                ))
    return TelemetrySummary(
        config_digest=digest,
        records=len(records),
        skipped=skipped,
        steps=len(curve),
        first_mean=sum(first) / len(first) if first else 0.0,
        last_mean=sum(last) / len(last) if last else 0.0,
        windows=tuple(windows),
    )
