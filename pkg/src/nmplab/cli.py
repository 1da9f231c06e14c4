"""``nmplab`` command line.

Subcommands::

    nmplab budget  --bits 4096 --bw 5e6 --dist 1e6 --proc 20
    nmplab run     experiment.json [--out DIR]
    nmplab live    send|recv ...
    nmplab analyze sent.wav received.wav

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``NMPLAB_OUTPUT_DIR`` sets the default output directory of ``run``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiment
from .analysis import measure_latency_xcorr, spectral_compare
from .errors import NmpLabError, UnreliableMeasurementError
from .jitter import Concealment, JitterBufferConfig
from .latency import FIBER_SPEED_MPS, LinkParams, classify, total_latency
from .stream import HEADER_BYTES, StreamConfig
from .wavio import read_wav, write_wav

log = logging.getLogger("nmplab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def cmd_budget(args) -> int:
    bits = args.bits + (HEADER_BYTES * 8 if args.include_header else 0)
    try:
        params = LinkParams(bits, args.bw, args.dist, args.speed, args.proc)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    budget = total_latency(params)
    cls = classify(budget)
    if args.json:
        print(json.dumps({**budget.as_dict(), "class": cls.value}, sort_keys=True))
    else:
        print(f"transmission_ms  {_fmt(budget.transmission_ms)}")
        print(f"propagation_ms   {_fmt(budget.propagation_ms)}")
        print(f"processing_ms    {_fmt(budget.processing_ms)}")
        print(f"total_ms         {_fmt(budget.total_ms)}")
        print(f"class            {cls.value}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = experiment.load_config(args.config)
    except (OSError, ValueError, NmpLabError) as exc:
        raise UsageError(f"cannot load {args.config}: {exc}") from exc
    out = Path(args.out or cfg.output_dir or os.environ.get("NMPLAB_OUTPUT_DIR") or "nmplab-out")
    rows = experiment.run_experiment(cfg, out)
    print(f"{len(rows)} runs written to {out}")
    for row in rows:
        print(f"{row['run_id']}\t{row['profile']}\tmeasured={row['measured_one_way_ms']}\t"
              f"analytic={row['analytic_total_ms']}\tconcealed={row['concealed']}")
    return EXIT_OK


def _stream_from(args) -> StreamConfig:
    return StreamConfig(args.rate, args.bit_depth, args.channels, args.frames)


def cmd_live(args) -> int:
    from . import live

    stream = _stream_from(args)
    if args.role == "send":
        signal, _ = read_wav(args.wav)
        if signal.sample_rate_hz != stream.sample_rate_hz or signal.channels != stream.channels:
            stream = StreamConfig(signal.sample_rate_hz, args.bit_depth, signal.channels, args.frames)
        try:
            n = live.send_stream(signal, stream, args.address, args.port)
        except OSError as exc:
            log.error("send failed: %s", exc)
            return EXIT_RUNTIME
        print(f"sent {n} packets")
        return EXIT_OK

    buffer = JitterBufferConfig(args.depth, Concealment(args.concealment), args.prefetch)
    try:
        rx = live.Receiver(stream, buffer, args.address, args.port)
    except OSError as exc:
        log.error("bind failed: %s", exc)
        return EXIT_RUNTIME
    result = rx.run(args.timeout, args.duration)
    write_wav(args.out, result.received, stream.bit_depth)
    stats = {**result.stats.as_dict(), "protocol_errors": result.protocol_errors}
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    print(json.dumps(stats, sort_keys=True))
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        sent, _ = read_wav(args.sent)
        received, _ = read_wav(args.received)
    except (OSError, EOFError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    try:
        report = spectral_compare(sent, received, args.threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = report.as_dict()
    try:
        doc["xcorr_latency_ms"] = measure_latency_xcorr(sent, received)
    except UnreliableMeasurementError:
        doc["xcorr_latency_ms"] = None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        experiment.write_atomic(out / "spectrum.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        for which in ("sent", "received"):
            experiment.write_atomic(out / f"spectrum_{which}.tsv", experiment.plot_tsv(report.plot_rows(which)))
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmplab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("budget", help="closed-form one-way latency budget")
    b.add_argument("--bits", type=int, default=4096, help="packet size in bits (payload)")
    b.add_argument("--bw", type=float, default=5e6, help="bandwidth in bits/s")
    b.add_argument("--dist", type=float, default=1e6, help="distance in metres")
    b.add_argument("--proc", type=float, default=20.0, help="processing delay in ms")
    b.add_argument("--speed", type=float, default=FIBER_SPEED_MPS, help="propagation speed in m/s")
    b.add_argument("--include-header", action="store_true",
                   help=f"add the {HEADER_BYTES}-byte datagram header to the packet size")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_budget)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config, then $NMPLAB_OUTPUT_DIR)")
    r.set_defaults(func=cmd_run)

    lv = sub.add_parser("live", help="stream over real UDP sockets")
    lv.add_argument("role", choices=["send", "recv"])
    lv.add_argument("--address", default="127.0.0.1")
    lv.add_argument("--port", type=int, default=4464)
    lv.add_argument("--wav", help="file to send")
    lv.add_argument("--out", default="received.wav", help="received WAVE (recv)")
    lv.add_argument("--stats", help="write buffer stats JSON here (recv)")
    lv.add_argument("--rate", type=int, default=48000)
    lv.add_argument("--bit-depth", type=int, default=16, choices=[16, 24, 32])
    lv.add_argument("--channels", type=int, default=2)
    lv.add_argument("--frames", type=int, default=128, help="frames per packet")
    lv.add_argument("--depth", type=int, default=32, help="jitter buffer depth in packets")
    lv.add_argument("--prefetch", type=int, default=8, help="packets of playout delay")
    lv.add_argument("--concealment", choices=[c.value for c in Concealment], default="RepeatLast")
    lv.add_argument("--timeout", type=float, default=2.0, help="idle timeout in seconds")
    lv.add_argument("--duration", type=float, help="stop after this many seconds of playout")
    lv.set_defaults(func=cmd_live)

    a = sub.add_parser("analyze", help="octave-band comparison of two WAVE files")
    a.add_argument("sent")
    a.add_argument("received")
    a.add_argument("--threshold", type=float, default=-3.0, help="per-band preservation threshold (dB)")
    a.add_argument("--out", help="directory for JSON and plot data")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "live" and args.role == "send" and not args.wav:
        parser.error("live send needs --wav")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nmplab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, NmpLabError) as exc:
        print(f"nmplab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
