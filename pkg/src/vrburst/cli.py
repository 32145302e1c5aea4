"""Command-line entry point.

Subcommands: generate (synthetic trace CSV), replay (window a trace into a
new trace), simulate (bottleneck-link scenario -> metrics JSON), fit (traces
-> model constants JSON), stats (trace summary JSON), send/recv (live UDP
using the 24-byte fragment header).

Exit codes: 0 success, 2 usage/parameter error, 3 data or parse error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import socket
import statistics
import sys
import time

from . import __version__
from .fit import fit_vr_model, group_traces
from .generator import (
    SimpleBurstGenerator,
    TraceFileBurstGenerator,
    TraceParseError,
    VrBurstGenerator,
    load_trace,
    save_trace,
)
from .model import DEFAULT_CONSTANTS, VrModelConstants, VrStreamParams
from .rv import ParameterError, RngStream, dist_from_spec
from .sim import GeneratorConfig, ScenarioConfig, percentile, run_scenario
from .wire import (
    HEADER_LEN,
    BurstDiscarded,
    BurstReassembler,
    BurstReceived,
    decode_header,
    encode_header,
    fragment_burst,
)

NS_PER_S = 1_000_000_000

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_IO = 4


def _load_constants(args) -> VrModelConstants:
    if getattr(args, "params", None):
        return VrModelConstants.load_json(args.params)
    return DEFAULT_CONSTANTS


def _build_generator(args, constants: VrModelConstants, rng: RngStream):
    if args.model == "vr":
        params = VrStreamParams(args.rate_mbps * 1e6, args.fps)
        return VrBurstGenerator(params, rng, constants)
    if args.model == "simple":
        if not (args.size_dist and args.period_dist):
            raise ParameterError("--model simple needs --size-dist and --period-dist")
        return SimpleBurstGenerator(
            dist_from_spec(args.size_dist), dist_from_spec(args.period_dist), rng
        )
    raise ParameterError(f"--model {args.model} is not a synthetic generator here; "
                         "use the replay command for traces")


def _collect_bursts(generator, duration_s: float):
    """Bursts whose generation times fall inside [0, duration)."""
    duration_ns = round(duration_s * NS_PER_S)
    elapsed = 0
    records = []
    while elapsed < duration_ns and generator.has_next_burst():
        desc = generator.generate_burst()
        records.append(desc)
        elapsed += max(1, desc.next_period_ns)
    return records


def cmd_generate(args) -> int:
    constants = _load_constants(args)
    generator = _build_generator(args, constants, RngStream(args.seed, 1))
    records = _collect_bursts(generator, args.duration_s)
    if not records:
        raise ValueError(f"no bursts generated in {args.duration_s} s; trace would be empty")
    metadata = {
        "source": "vrburst generate",
        "model": args.model,
        "seed": args.seed,
        "duration_s": args.duration_s,
        "period_unit": "us",
    }
    if args.model == "vr":
        metadata["target_rate_mbps"] = args.rate_mbps
        metadata["fps"] = args.fps
        metadata["constants"] = json.dumps(constants.to_dict())
    else:
        metadata["size_dist"] = args.size_dist
        metadata["period_dist"] = args.period_dist
    save_trace(args.out, records, metadata)
    mean_size = sum(r.burst_size for r in records) / len(records)
    print(f"wrote {len(records)} bursts to {args.out} (mean size {mean_size:.0f} B)")
    return EXIT_OK


def cmd_replay(args) -> int:
    trace = load_trace(args.trace)
    generator = TraceFileBurstGenerator(trace, start_time_s=args.start_time)
    if args.duration_s is not None:
        records = _collect_bursts(generator, args.duration_s)
    else:
        records = []
        while generator.has_next_burst():
            records.append(generator.generate_burst())
    if not records:
        raise ValueError("replay window contains no bursts")
    metadata = dict(trace.metadata)
    metadata.update(
        {
            "source": "vrburst replay",
            "replayed_from": str(args.trace),
            "start_time_s": args.start_time,
        }
    )
    if args.duration_s is not None:
        metadata["duration_s"] = args.duration_s
    save_trace(args.out, records, metadata)
    print(f"wrote {len(records)} bursts to {args.out}")
    return EXIT_OK


def _parse_stations(spec: str) -> list[int]:
    if ".." in spec:
        lo, _, hi = spec.partition("..")
        counts = list(range(int(lo), int(hi) + 1))
    else:
        counts = [int(spec)]
    if not counts or min(counts) < 1:
        raise ParameterError(f"bad --stations spec {spec!r}")
    return counts


def cmd_simulate(args) -> int:
    constants = _load_constants(args)
    generator = GeneratorConfig(
        model=args.model,
        rate_mbps=args.rate_mbps,
        fps=args.fps,
        size_dist=args.size_dist,
        period_dist=args.period_dist,
        trace_path=args.trace,
        start_time_s=args.start_time,
    )
    reports = []
    for n_stations in _parse_stations(args.stations):
        cfg = ScenarioConfig(
            generator=generator,
            n_stations=n_stations,
            link_rate_bps=args.link_mbps * 1e6,
            propagation_delay_ns=args.prop_delay_us * 1_000,
            overhead_bytes=args.overhead_bytes,
            loss_prob=args.loss,
            queue_limit=args.queue_limit,
            duration_s=args.duration_s,
            seed=args.seed,
            fragment_size=args.fragment_size,
            constants=constants,
        )
        reports.append(run_scenario(cfg).to_dict())
    payload = reports[0] if len(reports) == 1 else reports
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    trace = load_trace(args.trace)
    sizes = [r.burst_size for r in trace.records]
    periods = [r.next_period_ns for r in trace.records]
    total_s = sum(periods) / NS_PER_S

    def summary(values):
        return {
            "mean": statistics.fmean(values),
            "std": statistics.stdev(values) if len(values) > 1 else 0.0,
            "p95": percentile(values, 95),
        }

    out = {
        "source": str(args.trace),
        "metadata": trace.metadata,
        "bursts": len(trace.records),
        "size_bytes": summary(sizes),
        "period_ns": summary(periods),
        "data_rate_mbps": (sum(sizes) * 8 / total_s / 1e6) if total_s > 0 else None,
    }
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def cmd_fit(args) -> int:
    groups = group_traces(load_trace(path) for path in args.traces)
    report = fit_vr_model(
        groups,
        em_restarts=args.em_restarts,
        seed=args.seed,
        weighting="uniform" if args.uniform_weights else "rank",
    )
    if args.report:
        report.save_json(args.report)
    if not report.slopes_valid:
        print(
            "fitted mean slopes do not straddle 1 "
            f"(lo={report.pframe_mean_slope:.4f}, hi={report.iframe_mean_slope:.4f}); "
            "no constants emitted",
            file=sys.stderr,
        )
        return EXIT_DATA
    if args.out:
        report.constants.save_json(args.out)
        print(f"wrote model constants to {args.out}")
    else:
        sys.stdout.write(json.dumps(report.constants.to_dict(), indent=2) + "\n")
    return EXIT_OK


def _parse_addr(spec: str) -> tuple[str, int]:
    host, _, port = spec.rpartition(":")
    if not host or not port.isdigit():
        raise ParameterError(f"expected HOST:PORT, got {spec!r}")
    return host, int(port)


def send_bursts(
    dest: tuple[str, int],
    generator,
    fragment_size: int,
    pacing: bool = True,
    max_bursts: int | None = None,
    duration_s: float | None = None,
    sock: socket.socket | None = None,
) -> dict:
    """Send generator bursts as UDP fragments; returns send counters.

    Bursts are scheduled by wall clock from the generator periods; fragments
    within a burst go out back-to-back. Timestamps are the sender's
    monotonic clock, so receiver-side delays are only meaningful when both
    ends share a clock (e.g. loopback).
    """
    own_sock = sock is None
    if own_sock:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    bursts = fragments = payload_bytes = 0
    deadline = None if duration_s is None else time.monotonic() + duration_s
    try:
        burst_seq = 0
        next_send_ns = time.monotonic_ns()  # absolute schedule avoids sleep drift
        while generator.has_next_burst():
            if max_bursts is not None and bursts >= max_bursts:
                break
            if deadline is not None and time.monotonic() >= deadline:
                break
            desc = generator.generate_burst()
            stamp = time.monotonic_ns()
            for frag in fragment_burst(burst_seq % 2**32, desc.burst_size, stamp, fragment_size):
                sock.sendto(encode_header(frag.header) + b"\x00" * frag.payload_len, dest)
                fragments += 1
            payload_bytes += desc.burst_size
            bursts += 1
            burst_seq += 1
            if pacing:
                next_send_ns += desc.next_period_ns
                wait_ns = next_send_ns - time.monotonic_ns()
                if wait_ns > 0:
                    time.sleep(wait_ns / NS_PER_S)
    finally:
        if own_sock:
            sock.close()
    return {"bursts_sent": bursts, "fragments_sent": fragments, "payload_bytes": payload_bytes}


def receive_bursts(
    listen: tuple[str, int],
    out_path,
    duration_s: float,
    sock: socket.socket | None = None,
) -> dict:
    """Collect fragments for ``duration_s``, reassembling one flow per source.

    Writes one CSV row per burst outcome: ``burst_seq,outcome,delay_ns,size``
    (outcome is ``received`` or ``discarded``; discarded rows leave delay
    empty). Returns receive counters.
    """
    own_sock = sock is None
    if own_sock:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(listen)
    sock.settimeout(0.2)
    flows: dict = {}
    received = discarded = malformed = datagrams = 0
    deadline = time.monotonic() + duration_s
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("# source: vrburst recv\n")
        fh.write(f"# listen: {listen[0]}:{listen[1]}\n")
        fh.write("# clock: sender monotonic_ns; delays are only meaningful when "
                 "sender and receiver share a clock\n")
        fh.write("# columns: burst_seq,outcome,delay_ns,size\n")
        try:
            while time.monotonic() < deadline:
                try:
                    data, addr = sock.recvfrom(65535)
                except socket.timeout:
                    continue
                arrival = time.monotonic_ns()
                datagrams += 1
                try:
                    header = decode_header(data)
                except ValueError:
                    malformed += 1
                    continue
                flow = flows.setdefault(addr, BurstReassembler())
                for event in flow.on_fragment(header, arrival, len(data) - HEADER_LEN):
                    if isinstance(event, BurstReceived):
                        received += 1
                        fh.write(
                            f"{event.burst_seq},received,{event.delay_ns},{event.burst_size}\n"
                        )
                    elif isinstance(event, BurstDiscarded):
                        discarded += 1
                        fh.write(f"{event.burst_seq},discarded,,{event.burst_size}\n")
        finally:
            if own_sock:
                sock.close()
    return {
        "datagrams": datagrams,
        "malformed": malformed,
        "bursts_received": received,
        "bursts_discarded": discarded,
        "flows": len(flows),
    }


def cmd_send(args) -> int:
    constants = _load_constants(args)
    if args.model == "trace":
        if not args.trace:
            raise ParameterError("--model trace needs --trace")
        generator = TraceFileBurstGenerator(load_trace(args.trace), start_time_s=args.start_time)
    else:
        generator = _build_generator(args, constants, RngStream(args.seed, 1))
    counters = send_bursts(
        _parse_addr(args.dest),
        generator,
        fragment_size=args.fragment_size,
        pacing=not args.no_pacing,
        max_bursts=args.max_bursts,
        duration_s=args.duration_s,
    )
    print(json.dumps(counters))
    return EXIT_OK


def cmd_recv(args) -> int:
    counters = receive_bursts(_parse_addr(args.listen), args.out, args.duration_s)
    print(json.dumps(counters))
    return EXIT_OK


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=("vr", "simple", "trace"), default="vr",
                        help="burst source (default: vr)")
    parser.add_argument("--rate-mbps", type=float, default=50.0,
                        help="VR target data rate in Mbit/s (default: 50)")
    parser.add_argument("--fps", type=float, default=60.0,
                        help="VR frame rate (default: 60)")
    parser.add_argument("--size-dist", help="simple model: burst size spec, e.g. constant:10000")
    parser.add_argument("--period-dist", help="simple model: period spec in seconds, e.g. constant:0.01")
    parser.add_argument("--trace", help="trace CSV path (model=trace)")
    parser.add_argument("--start-time", type=float, default=0.0,
                        help="trace replay start offset in seconds (default: 0)")
    parser.add_argument("--params", help="model constants JSON overriding the built-in fit")
    parser.add_argument("--seed", type=int, default=1, help="RNG seed (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrburst",
        description="Bursty VR traffic toolkit: generate, replay, simulate, fit, measure.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic trace CSV")
    _add_model_flags(p)
    p.add_argument("--duration-s", type=float, required=True, help="trace duration in seconds")
    p.add_argument("--out", required=True, help="output trace CSV path")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("replay", help="re-window an existing trace into a new trace CSV")
    p.add_argument("--trace", required=True, help="input trace CSV")
    p.add_argument("--start-time", type=float, default=0.0,
                   help="skip bursts before this offset in seconds (default: 0)")
    p.add_argument("--duration-s", type=float, default=None,
                   help="cap the replay window in seconds (default: rest of the trace)")
    p.add_argument("--out", required=True, help="output trace CSV path")
    p.set_defaults(handler=cmd_replay)

    p = sub.add_parser("simulate", help="run a bottleneck-link scenario, emit metrics JSON")
    _add_model_flags(p)
    p.add_argument("--stations", default="1", help="station count N or sweep A..B (default: 1)")
    p.add_argument("--link-mbps", type=float, default=866.0,
                   help="bottleneck link rate in Mbit/s (default: 866)")
    p.add_argument("--prop-delay-us", type=int, default=0,
                   help="one-way propagation delay in microseconds (default: 0)")
    p.add_argument("--overhead-bytes", type=int, default=0,
                   help="per-fragment lower-layer overhead in bytes (default: 0)")
    p.add_argument("--loss", type=float, default=0.0,
                   help="independent per-fragment loss probability (default: 0)")
    p.add_argument("--queue-limit", type=int, default=0,
                   help="link queue limit in fragments, 0 = unbounded (default: 0)")
    p.add_argument("--duration-s", type=float, default=10.0,
                   help="traffic generation horizon in seconds (default: 10)")
    p.add_argument("--fragment-size", type=int, default=1278,
                   help="fragment size in bytes incl. header (default: 1278)")
    p.add_argument("--out", help="write the metrics JSON here instead of stdout")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("stats", help="summarize a trace CSV as JSON on stdout")
    p.add_argument("trace", help="trace CSV path")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("fit", help="fit model constants from grouped trace CSVs")
    p.add_argument("traces", nargs="+", help="trace CSVs carrying target_rate_mbps/fps metadata")
    p.add_argument("--out", help="write the fitted constants JSON here (default: stdout)")
    p.add_argument("--report", help="also write the full per-group fit report JSON")
    p.add_argument("--em-restarts", type=int, default=50,
                   help="random restarts per mixture fit (default: 50)")
    p.add_argument("--uniform-weights", action="store_true",
                   help="weight groups uniformly instead of by fit goodness")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for EM restarts (default: 0)")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("send", help="send bursts over UDP")
    _add_model_flags(p)
    p.add_argument("--dest", required=True, help="destination HOST:PORT")
    p.add_argument("--fragment-size", type=int, default=1278,
                   help="fragment size in bytes incl. header (default: 1278)")
    p.add_argument("--max-bursts", type=int, default=None, help="stop after this many bursts")
    p.add_argument("--duration-s", type=float, default=None, help="stop after this many seconds")
    p.add_argument("--no-pacing", action="store_true",
                   help="ignore generator periods and send as fast as possible")
    p.set_defaults(handler=cmd_send)

    p = sub.add_parser("recv", help="receive bursts over UDP, log outcomes to CSV")
    p.add_argument("--listen", required=True, help="bind address HOST:PORT")
    p.add_argument("--out", required=True, help="per-burst event CSV path")
    p.add_argument("--duration-s", type=float, default=10.0,
                   help="how long to listen in seconds (default: 10)")
    p.set_defaults(handler=cmd_recv)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except TraceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
