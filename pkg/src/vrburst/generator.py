"""Burst generators: sources of (burst size, next period) pairs.

A burst is an application-layer unit (one encoded video frame for the VR
model) that the sender will fragment; ``next_period`` is the gap until the
following burst. Three generators are provided: arbitrary random variates
(:class:`SimpleBurstGenerator`), the fitted VR model
(:class:`VrBurstGenerator`), and CSV trace replay
(:class:`TraceFileBurstGenerator`).

Trace CSV grammar: optional ``# key: value`` metadata lines, then one
``burst_size_bytes,next_period_us`` row per burst (unsigned integers, LF or
CRLF line endings). Periods are stored as integer microseconds to keep files
round-trip exact; ``period_unit="s"`` accepts fractional seconds instead.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from .model import DEFAULT_CONSTANTS, VrModelConstants, VrStreamParams, sample_vr_frame, sample_vr_ifi
from .rv import RngStream

NS_PER_US = 1_000
NS_PER_S = 1_000_000_000


class GeneratorExhaustedError(RuntimeError):
    """generate_burst() was called after has_next_burst() turned false."""


class TraceParseError(ValueError):
    """A trace file failed to parse; the message names the offending line."""


@dataclass(frozen=True)
class BurstDescriptor:
    """One burst: size in bytes (>= 1) and the gap to the next burst in ns."""

    burst_size: int
    next_period_ns: int

    def __post_init__(self):
        if self.burst_size < 1:
            raise ValueError(f"burst size must be at least 1 byte, got {self.burst_size}")
        if self.next_period_ns < 0:
            raise ValueError(f"next period must be non-negative, got {self.next_period_ns}")


@dataclass
class TraceFile:
    """Parsed trace: ordered burst records plus the commented-header metadata."""

    records: list[BurstDescriptor]
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def duration_ns(self) -> int:
        return sum(r.next_period_ns for r in self.records)


class BurstGenerator(ABC):
    """Yields burst descriptors until exhausted (stochastic ones never are)."""

    @abstractmethod
    def has_next_burst(self) -> bool:
        """True iff generate_burst() may be called."""

    @abstractmethod
    def generate_burst(self) -> BurstDescriptor:
        """Return the next burst descriptor and advance the generator."""


class SimpleBurstGenerator(BurstGenerator):
    """Independent draws from arbitrary size/period distributions.

    ``size_dist`` samples are bytes (rounded, floored at 1); ``period_dist``
    samples are seconds (negative draws clamp to 0). Size is drawn before
    period, one draw each, with no correlation between them or across bursts.
    """

    def __init__(self, size_dist, period_dist, rng: RngStream):
        self.size_dist = size_dist
        self.period_dist = period_dist
        self.rng = rng

    def has_next_burst(self) -> bool:
        return True

    def generate_burst(self) -> BurstDescriptor:
        size = max(1, round(self.size_dist.sample(self.rng)))
        period_s = max(0.0, self.period_dist.sample(self.rng))
        return BurstDescriptor(size, round(period_s * NS_PER_S))


class VrBurstGenerator(BurstGenerator):
    """Bursts following the fitted VR model for a (rate, fps) stream."""

    def __init__(
        self,
        params: VrStreamParams,
        rng: RngStream,
        constants: VrModelConstants = DEFAULT_CONSTANTS,
    ):
        self.params = params
        self.constants = constants
        self.rng = rng

    def has_next_burst(self) -> bool:
        return True

    def generate_burst(self) -> BurstDescriptor:
        size = sample_vr_frame(self.params, self.constants, self.rng)
        period_s = sample_vr_ifi(self.params, self.constants, self.rng)
        return BurstDescriptor(size, round(period_s * NS_PER_S))


class TraceFileBurstGenerator(BurstGenerator):
    """Replays a trace record-by-record, exhausting after the last row.

    ``start_time_s`` skips the leading records whose burst times fall before
    it, so several generators over one file with disjoint start times replay
    disjoint parts of the trace. Records are skipped whole; bursts are atomic.
    """

    def __init__(self, trace: TraceFile | str | Path, start_time_s: float = 0.0):
        self.trace = load_trace(trace) if isinstance(trace, (str, Path)) else trace
        self._cursor = 0
        if start_time_s:
            self.seek_start_time(start_time_s)

    def has_next_burst(self) -> bool:
        return self._cursor < len(self.trace.records)

    def generate_burst(self) -> BurstDescriptor:
        if not self.has_next_burst():
            raise GeneratorExhaustedError("trace generator has yielded its last record")
        record = self.trace.records[self._cursor]
        self._cursor += 1
        return record

    def seek_start_time(self, start_time_s: float) -> None:
        """Position playback at the first burst occurring at or after t0.

        Burst i occurs at the cumulative sum of the periods before it (burst 0
        at time 0). Seeking past the end of the trace exhausts the generator.
        """
        if start_time_s < 0:
            raise ValueError(f"start time must be non-negative, got {start_time_s}")
        t0_ns = round(start_time_s * NS_PER_S)
        cursor = 0
        elapsed = 0
        records = self.trace.records
        while cursor < len(records) and elapsed < t0_ns:
            elapsed += records[cursor].next_period_ns
            cursor += 1
        self._cursor = cursor


def _parse_metadata_line(line: str) -> tuple[str, str] | None:
    body = line.lstrip("#").strip()
    if ":" not in body:
        return None
    key, _, value = body.partition(":")
    key = key.strip()
    if not key:
        return None
    return key, value.strip()


def _parse_uint(token: str, what: str, lineno: int) -> int:
    token = token.strip()
    if not token.isdigit():
        raise TraceParseError(f"line {lineno}: {what} must be an unsigned integer, got {token!r}")
    return int(token)


def load_trace(path, period_unit: str = "us") -> TraceFile:
    """Parse a trace CSV; raises :class:`TraceParseError` with line numbers.

    ``period_unit`` selects the period column format: ``"us"`` (default,
    unsigned integer microseconds) or ``"s"`` (fractional seconds).
    """
    if period_unit not in ("us", "s"):
        raise ValueError(f"period_unit must be 'us' or 's', got {period_unit!r}")
    records: list[BurstDescriptor] = []
    metadata: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parsed = _parse_metadata_line(line)
            if parsed:
                metadata[parsed[0]] = parsed[1]
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise TraceParseError(f"line {lineno}: expected 'burst_size,next_period', got {line!r}")
        size = _parse_uint(fields[0], "burst size", lineno)
        if period_unit == "us":
            period_ns = _parse_uint(fields[1], "next period", lineno) * NS_PER_US
        else:
            try:
                period_s = float(fields[1])
            except ValueError:
                raise TraceParseError(
                    f"line {lineno}: next period must be a number, got {fields[1]!r}"
                ) from None
            if period_s < 0:
                raise TraceParseError(f"line {lineno}: next period must be non-negative")
            period_ns = round(period_s * NS_PER_S)
        if size < 1:
            raise TraceParseError(f"line {lineno}: burst size must be at least 1 byte")
        if period_ns <= 0:
            # burst times must be strictly increasing along the trace
            raise TraceParseError(f"line {lineno}: next period must be positive")
        records.append(BurstDescriptor(size, period_ns))
    if not records:
        raise TraceParseError(f"{path}: no data rows")
    return TraceFile(records=records, metadata=metadata)


def save_trace(path, records, metadata: dict | None = None) -> None:
    """Write a trace CSV with a ``# key: value`` metadata header.

    Periods are rounded to integer microseconds and floored at 1 us so the
    written file always satisfies the strictly-increasing-time invariant.
    """
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key}: {value}")
    for record in records:
        period_us = max(1, round(record.next_period_ns / NS_PER_US))
        lines.append(f"{record.burst_size},{period_us}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


__all__ = [
    "BurstDescriptor",
    "BurstGenerator",
    "GeneratorExhaustedError",
    "SimpleBurstGenerator",
    "TraceFile",
    "TraceFileBurstGenerator",
    "TraceParseError",
    "VrBurstGenerator",
    "load_trace",
    "save_trace",
]
