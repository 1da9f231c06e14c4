"""Best-effort live streaming over real UDP sockets.

One sender paces packets at the packet interval. The receiver runs a network
thread feeding a :class:`JitterBuffer` and a playout loop draining it on its own
clock.
"""
from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import DecodeError
from .jitter import JitterBuffer, JitterBufferConfig, JitterBufferStats, Provenance
from .stream import PcmSignal, StreamConfig, decode_pcm, deserialize, packet_interval, packetize, serialize

log = logging.getLogger(__name__)

MAX_DATAGRAM = 65535


def send_stream(signal: PcmSignal, stream: StreamConfig, host: str, port: int,
                pace: bool = True, sock: socket.socket | None = None) -> int:
    """Send ``signal`` as paced datagrams; returns the number of packets sent."""
    packets = packetize(signal, stream)
    interval_s = packet_interval(stream) / 1000.0
    own = sock is None
    sock = sock or socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        start = time.perf_counter()
        for k, packet in enumerate(packets):
            if pace:
                delay = start + k * interval_s - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
            sock.sendto(serialize(packet), (host, port))
    finally:
        if own:
            sock.close()
    log.info("sent %d packets to %s:%d", len(packets), host, port)
    return len(packets)


@dataclass
class ReceiveResult:
    received: PcmSignal
    stats: JitterBufferStats
    protocol_errors: int
    first_arrival: bool


class Receiver:
    def __init__(self, stream: StreamConfig, buffer: JitterBufferConfig | None = None,
                 bind: str = "127.0.0.1", port: int = 0):
        self.stream = stream
        self.buffer_config = buffer or JitterBufferConfig(depth_packets=32, prefetch_packets=8)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((bind, port))
        self.sock.settimeout(0.02)
        self.port = self.sock.getsockname()[1]
        self.jb = JitterBuffer(stream, self.buffer_config)
        self.protocol_errors = 0
        self._first = threading.Event()
        self._stop = threading.Event()
        self._last_arrival = None
        self._first_arrival = None

    def _net_loop(self) -> None:
        tag = self.stream.config_tag
        while not self._stop.is_set():
            try:
                data, _ = self.sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                continue
            except OSError:
                break
            now = time.perf_counter() * 1000.0
            try:
                packet = deserialize(data)
            except DecodeError as exc:
                self.protocol_errors += 1
                log.warning("dropping datagram: %s", exc)
                continue
            if packet.config_tag != tag or len(packet.payload) != self.stream.payload_bytes:
                self.protocol_errors += 1
                log.error("protocol error: config tag 0x%04x / %d-byte payload does not match stream, dropped",
                          packet.config_tag, len(packet.payload))
                continue
            self.jb.push(packet, now)
            self._last_arrival = now
            if self._first_arrival is None:
                self._first_arrival = now
                self._first.set()

    def run(self, timeout_s: float = 2.0, duration_s: float | None = None) -> ReceiveResult:
        """Receive until ``duration_s`` of audio is played or the peer is idle for ``timeout_s``."""
        net = threading.Thread(target=self._net_loop, daemon=True)
        net.start()
        interval = packet_interval(self.stream)
        try:
            got = self._first.wait(timeout_s)
            now = time.perf_counter() * 1000.0
            t0 = (self._first_arrival if got else now) + self.buffer_config.prefetch_packets * interval
            max_pops = None if duration_s is None else int(np.ceil(duration_s * 1000.0 / interval))
            blocks = []
            k = 0
            while max_pops is None or k < max_pops:
                t = t0 + k * interval
                delay = t / 1000.0 - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
                blocks.append(self.jb.pop(t))
                k += 1
                last = self._last_arrival if self._last_arrival is not None else t0
                if t - last > timeout_s * 1000.0 and len(self.jb) == 0:
                    break
        finally:
            self._stop.set()
            net.join()
            self.sock.close()

        stats = self.jb.stats()
        on_time = [i for i, b in enumerate(blocks) if b.provenance is Provenance.ON_TIME]
        if on_time:
            # drop the concealment tail played while waiting for the idle timeout
            tail = len(blocks) - (on_time[-1] + 1)
            blocks = blocks[: on_time[-1] + 1]
            stats = replace(stats, delivered=stats.delivered - tail, concealed=stats.concealed - tail,
                            underruns=stats.underruns - tail)
        payload = b"".join(b.payload for b in blocks)
        frames = decode_pcm(payload, self.stream.bit_depth, self.stream.channels)
        return ReceiveResult(PcmSignal(frames, self.stream.sample_rate_hz), stats,
                             self.protocol_errors, self._first_arrival is not None)
