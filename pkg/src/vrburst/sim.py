"""Deterministic discrete-event scenario runner.

N stations each run a burst generator and push every fragment of a burst at
its generation instant into a shared FIFO bottleneck link; the link serves
one fragment at a time at ``(wire + overhead) * 8 / link_rate`` (rounded up
to whole nanoseconds) and delivers to a per-station reassembler after the
propagation delay. Random losses corrupt fragments on the link (they still
consume link time); a finite queue tail-drops arrivals instead.

Time is integer nanoseconds end to end. Simultaneous events execute in
insertion order, so a (config, seed) pair always produces the same report.
Stations stop generating at the configured duration and the link then drains;
delivered stragglers still count toward the metrics.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .generator import (
    BurstGenerator,
    SimpleBurstGenerator,
    TraceFileBurstGenerator,
    VrBurstGenerator,
    load_trace,
)
from .model import DEFAULT_CONSTANTS, VrModelConstants, VrStreamParams
from .rv import RNG_ALGORITHM, ParameterError, RngStream, dist_from_spec
from .wire import DEFAULT_FRAGMENT_SIZE, BurstDiscarded, BurstReassembler, BurstReceived, fragment_burst

NS_PER_S = 1_000_000_000

# Stream ids carved out of one scenario seed: 0 for link losses, i+1 for
# station i's generator.
_LOSS_STREAM_ID = 0


def percentile(samples, p: float):
    """Nearest-rank percentile: the sorted sample at index ceil(p*n/100)."""
    n = len(samples)
    if n == 0:
        raise ValueError("percentile of an empty sample set is undefined")
    if not 0 < p <= 100:
        raise ValueError(f"percentile must lie in (0, 100], got {p}")
    rank = math.ceil(p * n / 100.0)
    return sorted(samples)[rank - 1]


@dataclass
class GeneratorConfig:
    """Which burst generator each station runs.

    ``model`` is one of ``vr`` (rate_mbps/fps), ``simple`` (size_dist/
    period_dist specs, see :func:`vrburst.rv.dist_from_spec`; sizes in bytes,
    periods in seconds) or ``trace`` (trace_path/start_time_s). With a trace
    and several stations, station i starts ``i * duration_s`` into the file so
    the stations replay disjoint parts of it.
    """

    model: str = "vr"
    rate_mbps: float = 50.0
    fps: float = 60.0
    size_dist: str | None = None
    period_dist: str | None = None
    trace_path: str | None = None
    start_time_s: float = 0.0

    def __post_init__(self):
        if self.model not in ("vr", "simple", "trace"):
            raise ParameterError(f"unknown generator model {self.model!r}")
        if self.model == "simple" and not (self.size_dist and self.period_dist):
            raise ParameterError("simple model needs both size_dist and period_dist")
        if self.model == "trace" and not self.trace_path:
            raise ParameterError("trace model needs trace_path")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScenarioConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    n_stations: int = 1
    link_rate_bps: float = 866e6
    propagation_delay_ns: int = 0
    overhead_bytes: int = 0
    loss_prob: float = 0.0
    queue_limit: int = 0  # waiting fragments; 0 = unbounded
    duration_s: float = 10.0
    seed: int = 1
    fragment_size: int = DEFAULT_FRAGMENT_SIZE
    station_start_offsets_ns: list[int] | None = None
    constants: VrModelConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.n_stations < 1:
            raise ParameterError(f"need at least one station, got {self.n_stations}")
        if self.link_rate_bps <= 0:
            raise ParameterError(f"link rate must be positive, got {self.link_rate_bps}")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ParameterError(f"loss probability must lie in [0, 1], got {self.loss_prob}")
        if self.queue_limit < 0:
            raise ParameterError(f"queue limit must be non-negative, got {self.queue_limit}")
        if self.duration_s <= 0:
            raise ParameterError(f"duration must be positive, got {self.duration_s}")
        if self.propagation_delay_ns < 0 or self.overhead_bytes < 0:
            raise ParameterError("propagation delay and overhead must be non-negative")
        if self.station_start_offsets_ns is not None and len(self.station_start_offsets_ns) != self.n_stations:
            raise ParameterError("station_start_offsets_ns must list one offset per station")

    def to_dict(self) -> dict:
        out = {
            "n_stations": self.n_stations,
            "generator": self.generator.to_dict(),
            "link_rate_bps": self.link_rate_bps,
            "propagation_delay_ns": self.propagation_delay_ns,
            "overhead_bytes": self.overhead_bytes,
            "loss_prob": self.loss_prob,
            "queue_limit": self.queue_limit,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "fragment_size": self.fragment_size,
            "station_start_offsets_ns": self.station_start_offsets_ns,
            "constants": self.constants.to_dict(),
        }
        return out


@dataclass
class StationLog:
    bursts_sent: int = 0
    bursts_received: int = 0
    bursts_discarded: int = 0
    fragments_sent: int = 0
    fragments_delivered: int = 0
    burst_delays_ns: list[int] = field(default_factory=list)


@dataclass
class SimulationLog:
    """Raw per-run samples and counters, aggregated by :func:`summarize`."""

    fragment_delays_ns: list[int] = field(default_factory=list)
    burst_delays_ns: list[int] = field(default_factory=list)
    stations: list[StationLog] = field(default_factory=list)
    fragments_sent: int = 0
    fragments_lost: int = 0
    fragments_queue_dropped: int = 0
    served_bytes: int = 0
    link_busy_ns: int = 0
    payload_bytes_received: int = 0
    end_time_ns: int = 0
    trace_metadata: dict | None = None

    @property
    def bursts_sent(self) -> int:
        return sum(s.bursts_sent for s in self.stations)

    @property
    def bursts_received(self) -> int:
        return sum(s.bursts_received for s in self.stations)

    @property
    def bursts_discarded(self) -> int:
        return sum(s.bursts_discarded for s in self.stations)


def _build_generators(cfg: ScenarioConfig) -> tuple[list[BurstGenerator], dict | None]:
    gen = cfg.generator
    if gen.model == "vr":
        params = VrStreamParams(gen.rate_mbps * 1e6, gen.fps)
        return [
            VrBurstGenerator(params, RngStream(cfg.seed, i + 1), cfg.constants)
            for i in range(cfg.n_stations)
        ], None
    if gen.model == "simple":
        size_dist = dist_from_spec(gen.size_dist)
        period_dist = dist_from_spec(gen.period_dist)
        return [
            SimpleBurstGenerator(size_dist, period_dist, RngStream(cfg.seed, i + 1))
            for i in range(cfg.n_stations)
        ], None
    trace = load_trace(gen.trace_path)
    gens = [
        TraceFileBurstGenerator(trace, start_time_s=gen.start_time_s + i * cfg.duration_s)
        for i in range(cfg.n_stations)
    ]
    return gens, dict(trace.metadata)


def _serialization_ns(wire_bytes: int, overhead: int, link_rate_bps: float) -> int:
    bits = (wire_bytes + overhead) * 8
    if float(link_rate_bps).is_integer():
        rate = int(link_rate_bps)
        return -(-(bits * NS_PER_S) // rate)
    return math.ceil(bits * NS_PER_S / link_rate_bps)


# event kinds, dequeued in (time, insertion sequence) order
_EV_BURST = 0
_EV_LINK_RX = 1
_EV_LINK_DONE = 2
_EV_SINK_RX = 3


def simulate(cfg: ScenarioConfig) -> SimulationLog:
    """Run the event loop and collect the raw log."""
    duration_ns = round(cfg.duration_s * NS_PER_S)
    generators, trace_metadata = _build_generators(cfg)
    loss_rng = RngStream(cfg.seed, _LOSS_STREAM_ID) if cfg.loss_prob > 0 else None
    reassemblers = [BurstReassembler() for _ in range(cfg.n_stations)]
    log = SimulationLog(stations=[StationLog() for _ in range(cfg.n_stations)])
    log.trace_metadata = trace_metadata

    heap: list = []
    next_event_id = 0

    def push(time_ns: int, kind: int, payload) -> None:
        nonlocal next_event_id
        heapq.heappush(heap, (time_ns, next_event_id, kind, payload))
        next_event_id += 1

    offsets = cfg.station_start_offsets_ns or [0] * cfg.n_stations
    for station, offset in enumerate(offsets):
        if offset < duration_ns and generators[station].has_next_burst():
            push(offset, _EV_BURST, station)

    burst_seq = [0] * cfg.n_stations
    link_busy = False
    queue: deque = deque()  # waiting fragments; the one in service is not queued

    while heap:
        now, _, kind, payload = heapq.heappop(heap)
        log.end_time_ns = now

        if kind == _EV_BURST:
            station = payload
            gen = generators[station]
            desc = gen.generate_burst()
            fragments = fragment_burst(
                burst_seq[station] % 2**32, desc.burst_size, now, cfg.fragment_size
            )
            burst_seq[station] += 1
            log.stations[station].bursts_sent += 1
            for frag in fragments:
                lost = loss_rng is not None and loss_rng.uniform() < cfg.loss_prob
                log.fragments_sent += 1
                log.stations[station].fragments_sent += 1
                push(now, _EV_LINK_RX, (station, frag, lost))
            # clamp zero periods to 1 ns so a pathological generator cannot
            # stall simulated time
            next_ns = now + max(1, desc.next_period_ns)
            if next_ns < duration_ns and gen.has_next_burst():
                push(next_ns, _EV_BURST, station)

        elif kind == _EV_LINK_RX:
            if link_busy:
                if cfg.queue_limit and len(queue) >= cfg.queue_limit:
                    log.fragments_queue_dropped += 1
                else:
                    queue.append(payload)
            else:
                link_busy = True
                ser = _serialization_ns(payload[1].wire_size, cfg.overhead_bytes, cfg.link_rate_bps)
                push(now + ser, _EV_LINK_DONE, (payload, ser))

        elif kind == _EV_LINK_DONE:
            item, ser = payload
            station, frag, lost = item
            log.served_bytes += frag.wire_size + cfg.overhead_bytes
            log.link_busy_ns += ser
            if lost:
                log.fragments_lost += 1
            else:
                push(now + cfg.propagation_delay_ns, _EV_SINK_RX, item)
            if queue:
                nxt = queue.popleft()
                ser = _serialization_ns(nxt[1].wire_size, cfg.overhead_bytes, cfg.link_rate_bps)
                push(now + ser, _EV_LINK_DONE, (nxt, ser))
            else:
                link_busy = False

        else:  # _EV_SINK_RX
            station, frag, _ = payload
            delay = now - frag.header.timestamp_ns
            log.fragment_delays_ns.append(delay)
            log.stations[station].fragments_delivered += 1
            for event in reassemblers[station].on_fragment(frag.header, now, frag.payload_len):
                if isinstance(event, BurstReceived):
                    log.burst_delays_ns.append(event.delay_ns)
                    log.stations[station].burst_delays_ns.append(event.delay_ns)
                    log.stations[station].bursts_received += 1
                    log.payload_bytes_received += event.payload_bytes
                elif isinstance(event, BurstDiscarded):
                    log.stations[station].bursts_discarded += 1

    return log


def _delay_summary(delays) -> dict:
    if not delays:
        return {"count": 0, "mean_delay_ns": None, "std_delay_ns": None, "p95_delay_ns": None}
    arr = np.asarray(delays, dtype=float)
    return {
        "count": len(delays),
        "mean_delay_ns": float(arr.mean()),
        "std_delay_ns": float(arr.std()),
        "p95_delay_ns": percentile(delays, 95),
    }


@dataclass
class MetricsReport:
    """Aggregated fragment- and burst-level metrics for one scenario run."""

    config: dict
    rng_algorithm: str
    fragment: dict
    burst: dict
    link: dict
    throughput_mbps: float | None
    per_station: list
    trace_metadata: dict | None = None

    def to_dict(self) -> dict:
        out = {
            "config": self.config,
            "rng_algorithm": self.rng_algorithm,
            "fragment": self.fragment,
            "burst": self.burst,
            "link": self.link,
            "throughput_mbps": self.throughput_mbps,
            "per_station": self.per_station,
        }
        if self.trace_metadata is not None:
            out["trace_metadata"] = self.trace_metadata
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def summarize(log: SimulationLog, cfg: ScenarioConfig) -> MetricsReport:
    """Aggregate a raw run log into a :class:`MetricsReport`.

    Burst delays are last-fragment arrival minus the burst timestamp and only
    successfully reassembled bursts contribute delay samples; fragment delays
    cover every delivered fragment.
    """
    sent = log.bursts_sent
    burst = _delay_summary(log.burst_delays_ns)
    burst = {
        "count": sent,
        "received": log.bursts_received,
        "failed": log.bursts_discarded,
        "mean_delay_ns": burst["mean_delay_ns"],
        "std_delay_ns": burst["std_delay_ns"],
        "p95_delay_ns": burst["p95_delay_ns"],
        "success_ratio": (log.bursts_received / sent) if sent else None,
    }
    per_station = []
    for idx, st in enumerate(log.stations):
        delays = st.burst_delays_ns
        per_station.append(
            {
                "station": idx,
                "bursts_sent": st.bursts_sent,
                "bursts_received": st.bursts_received,
                "bursts_discarded": st.bursts_discarded,
                "fragments_sent": st.fragments_sent,
                "fragments_delivered": st.fragments_delivered,
                "mean_burst_delay_ns": float(np.mean(delays)) if delays else None,
                "p95_burst_delay_ns": percentile(delays, 95) if delays else None,
            }
        )
    return MetricsReport(
        config=cfg.to_dict(),
        rng_algorithm=RNG_ALGORITHM,
        fragment=_delay_summary(log.fragment_delays_ns),
        burst=burst,
        link={
            "fragments_sent": log.fragments_sent,
            "fragments_lost": log.fragments_lost,
            "fragments_queue_dropped": log.fragments_queue_dropped,
            "served_bytes": log.served_bytes,
            "busy_ns": log.link_busy_ns,
        },
        throughput_mbps=log.payload_bytes_received * 8 / cfg.duration_s / 1e6,
        per_station=per_station,
        trace_metadata=log.trace_metadata,
    )


def run_scenario(cfg: ScenarioConfig) -> MetricsReport:
    """Simulate one scenario and return its metrics report."""
    return summarize(simulate(cfg), cfg)


__all__ = [
    "GeneratorConfig",
    "MetricsReport",
    "ScenarioConfig",
    "SimulationLog",
    "StationLog",
    "percentile",
    "run_scenario",
    "simulate",
    "summarize",
]
