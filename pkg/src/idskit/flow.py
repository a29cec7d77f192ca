"""Packet-to-flow aggregation.

Packets are grouped into flows by their 5-tuple within fixed collection
intervals; every flow gets a 6-tuple id (the 5-tuple plus the flow's
observed duration, quantized to milliseconds).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, from_matrix, kdd99_schema

PACKET_LOG_HEADER = "timestamp,src_ip,dst_ip,src_port,dst_port,protocol,bytes"

# Fixed protocol codes for flow-derived feature vectors.
PROTOCOL_CODES = {"tcp": 0, "udp": 1, "icmp": 2}
OTHER_PROTOCOL_CODE = 3

# KDD schema slots a header-only flow record can fill.
_F_DURATION = 0
_F_PROTOCOL = 1
_F_SRC_BYTES = 4
_F_COUNT = 22
_F_SRV_COUNT = 23


@dataclass(frozen=True)
class PacketRecord:
    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    protocol: str
    payload_bytes: int

    def __post_init__(self):
        if not (self.timestamp >= 0 and np.isfinite(self.timestamp)):
            raise ValueError(f"bad timestamp {self.timestamp}")
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 65535:
                raise ValueError(f"port {port} out of range")
        if self.payload_bytes < 0:
            raise ValueError("negative payload size")


@dataclass(frozen=True)
class FlowId:
    """6-tuple flow identity; duration_ms is the observed duration in ms."""

    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    duration_ms: int
    protocol: str


@dataclass(frozen=True)
class FlowRecord:
    id: FlowId
    interval_index: int
    packet_count: int
    total_bytes: int
    first_seen: float
    last_seen: float

    @property
    def duration(self) -> float:
        return self.last_seen - self.first_seen


def partition(packets, interval: float) -> list[FlowRecord]:
    """Group packets by (interval index, 5-tuple) into flow records.

    Input order does not matter: packets are stably sorted by timestamp
    first. Flows come out in interval order, then first-seen order.
    """
    if interval <= 0:
        raise ValueError("interval must be positive")
    ordered = sorted(packets, key=lambda p: p.timestamp)
    groups: dict[tuple, list[PacketRecord]] = {}
    for p in ordered:
        key = (
            int(p.timestamp // interval),
            p.src_ip,
            p.dst_ip,
            p.src_port,
            p.dst_port,
            p.protocol,
        )
        groups.setdefault(key, []).append(p)

    flows = []
    for key, members in groups.items():
        first = members[0].timestamp
        last = members[-1].timestamp
        flows.append(
            FlowRecord(
                id=FlowId(
                    src_ip=key[1],
                    dst_ip=key[2],
                    src_port=key[3],
                    dst_port=key[4],
                    duration_ms=round((last - first) * 1000),
                    protocol=key[5],
                ),
                interval_index=key[0],
                packet_count=len(members),
                total_bytes=sum(p.payload_bytes for p in members),
                first_seen=first,
                last_seen=last,
            )
        )
    flows.sort(key=lambda f: (f.interval_index, f.first_seen))
    return flows


def derive_features(flow: FlowRecord, interval_peers) -> np.ndarray:
    """Feature vector in the KDD schema width for one flow.

    Header-derivable basics (duration, protocol code, bytes) and interval
    traffic counts (flows to the same destination host / same service) are
    filled; content-feature slots stay 0 since payloads are not inspected.
    Counts include the flow itself.
    """
    width = kdd99_schema().width
    v = np.zeros(width, dtype=np.float64)
    v[_F_DURATION] = flow.duration
    v[_F_PROTOCOL] = PROTOCOL_CODES.get(flow.id.protocol, OTHER_PROTOCOL_CODE)
    v[_F_SRC_BYTES] = flow.total_bytes
    v[_F_COUNT] = sum(1 for f in interval_peers if f.id.dst_ip == flow.id.dst_ip)
    v[_F_SRV_COUNT] = sum(1 for f in interval_peers if f.id.dst_port == flow.id.dst_port)
    return v


def group_by_interval(flows) -> list[tuple[int, list[FlowRecord]]]:
    """Ordered (interval_index, flows) groups from interval-ordered flows."""
    groups: dict[int, list[FlowRecord]] = {}
    for f in flows:
        groups.setdefault(f.interval_index, []).append(f)
    return sorted(groups.items())


def flows_to_dataset(flows) -> Dataset:
    """Unlabeled dataset of derived feature vectors, one row per flow."""
    by_interval = group_by_interval(flows)
    rows = []
    for _, members in by_interval:
        for f in members:
            rows.append(derive_features(f, members))
    X = np.vstack(rows) if rows else np.empty((0, kdd99_schema().width))
    return from_matrix(X, schema=kdd99_schema())


def parse_packet_log(source: str | bytes) -> list[PacketRecord]:
    """Read the packet log CSV (header: timestamp,src_ip,...,bytes)."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    reader = csv.reader(io.StringIO(source))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty packet log") from None
    expected = PACKET_LOG_HEADER.split(",")
    if [h.strip() for h in header] != expected:
        raise ValueError(
            f"bad packet log header {','.join(header)!r}; expected {PACKET_LOG_HEADER!r}"
        )
    packets = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise ValueError(f"line {lineno}: expected {len(expected)} fields")
        try:
            packets.append(
                PacketRecord(
                    timestamp=float(row[0]),
                    src_ip=row[1],
                    dst_ip=row[2],
                    src_port=int(row[3]),
                    dst_port=int(row[4]),
                    protocol=row[5],
                    payload_bytes=int(row[6]),
                )
            )
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return packets
