"""Flow traces: scenario configs, receiver-side packet records, CSV/JSON storage."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

MTU_DEFAULT = 1500

WIRED_COLUMNS = ("rx_time", "tx_time", "size", "seq_end", "ack_sent")
WIRELESS_COLUMNS = WIRED_COLUMNS + ("rlc_buffer", "pdcp_delay")


class CcAlgorithm(IntEnum):
    """Congestion-control algorithms; enum values double as classifier class ids."""

    NEWRENO = 0
    CUBIC = 1
    VEGAS = 2
    HYBLA = 3
    BBR = 4
    WESTWOOD = 5

    @property
    def label(self) -> str:
        return _ALGO_LABELS[self]

    @classmethod
    def from_name(cls, name: str) -> "CcAlgorithm":
        key = name.strip().lower().replace("-", "").replace("_", "")
        try:
            return _ALGO_BY_KEY[key]
        except KeyError:
            raise ValueError(f"unknown congestion-control algorithm {name!r}") from None


_ALGO_LABELS = {
    CcAlgorithm.NEWRENO: "NewReno",
    CcAlgorithm.CUBIC: "Cubic",
    CcAlgorithm.VEGAS: "Vegas",
    CcAlgorithm.HYBLA: "Hybla",
    CcAlgorithm.BBR: "BBR",
    CcAlgorithm.WESTWOOD: "Westwood",
}
_ALGO_BY_KEY = {v.lower(): k for k, v in _ALGO_LABELS.items()}

ALL_ALGORITHMS = tuple(CcAlgorithm)


@dataclass(frozen=True)
class LinkConfig:
    """Bottleneck link parameters for one simulated flow.

    rate is in bits/s, prop_rtt in seconds (two-way propagation, no queueing),
    buffer in packets (drop-tail), random_loss is an i.i.d. drop probability
    applied at bottleneck egress, mtu in bytes.
    """

    rate: float
    prop_rtt: float
    buffer: int
    random_loss: float = 0.0
    mtu: int = MTU_DEFAULT

    def validate(self) -> None:
        if not self.rate > 0:
            raise ValueError(f"link rate must be positive, got {self.rate}")
        if not self.prop_rtt > 0:
            raise ValueError(f"prop_rtt must be positive, got {self.prop_rtt}")
        if self.buffer < 1:
            raise ValueError(f"buffer must be >= 1 packet, got {self.buffer}")
        if not 0.0 <= self.random_loss < 1.0:
            raise ValueError(f"random_loss must be in [0, 1), got {self.random_loss}")
        if self.mtu < 64:
            raise ValueError(f"mtu too small: {self.mtu}")

    @property
    def bdp_packets(self) -> float:
        """Bandwidth-delay product in packets of mtu bytes."""
        return self.rate * self.prop_rtt / (8.0 * self.mtu)


@dataclass(frozen=True)
class WirelessConfig:
    """Radio-link stage appended after the bottleneck.

    A single-server FIFO queue of rlc_cap packets; each transmission attempt
    takes air_delay seconds and fails i.i.d. with err_prob, with up to
    max_retx retransmissions before the packet is discarded.
    """

    err_prob: float
    rlc_cap: int
    air_delay: float = 0.003
    max_retx: int = 3

    def validate(self) -> None:
        if not 0.0 <= self.err_prob < 1.0:
            raise ValueError(f"err_prob must be in [0, 1), got {self.err_prob}")
        if self.rlc_cap < 1:
            raise ValueError(f"rlc_cap must be >= 1, got {self.rlc_cap}")
        if not self.air_delay > 0:
            raise ValueError(f"air_delay must be positive, got {self.air_delay}")
        if self.max_retx < 0:
            raise ValueError(f"max_retx must be >= 0, got {self.max_retx}")


class PacketRecord(NamedTuple):
    """One receiver-side observation of a delivered data packet."""

    rx_time: float
    tx_time: float
    size: int
    seq_end: int
    ack_sent: int
    rlc_buffer: Optional[int] = None
    pdcp_delay: Optional[float] = None


@dataclass
class SimStats:
    """Diagnostics collected while simulating one flow (not part of the trace proper)."""

    sent: int = 0                 # transmitted copies, retransmissions included
    delivered: int = 0            # copies that reached the receiver
    drop_queue: int = 0           # bottleneck drop-tail overflow
    drop_random: int = 0          # bottleneck egress random loss
    drop_rlc_cap: int = 0         # radio queue overflow
    drop_rlc_err: int = 0         # radio ARQ exhausted
    in_flight_end: int = 0        # copies still queued or propagating at cutoff
    queue_max: int = 0
    rlc_queue_max: int = 0
    retransmits: int = 0
    timeouts: int = 0
    loss_events: list = field(default_factory=list)   # (time, cwnd_before, cwnd_after, kind)
    cwnd_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    cwnd_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    inflight_true: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    rlc_arrivals: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def dropped(self) -> int:
        return self.drop_queue + self.drop_random + self.drop_rlc_cap + self.drop_rlc_err

    def summary(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "drop_queue": self.drop_queue,
            "drop_random": self.drop_random,
            "drop_rlc_cap": self.drop_rlc_cap,
            "drop_rlc_err": self.drop_rlc_err,
            "in_flight_end": self.in_flight_end,
            "queue_max": self.queue_max,
            "rlc_queue_max": self.rlc_queue_max,
            "retransmits": self.retransmits,
            "timeouts": self.timeouts,
            "loss_event_count": len(self.loss_events),
        }


@dataclass
class FlowTrace:
    """Receiver-side record of one flow: packet columns plus scenario metadata.

    Columns are parallel numpy arrays sorted by rx_time. Wireless traces carry
    the two extra radio columns; wired traces leave them as None.
    """

    rx_time: np.ndarray
    tx_time: np.ndarray
    size: np.ndarray
    seq_end: np.ndarray
    ack_sent: np.ndarray
    rlc_buffer: Optional[np.ndarray] = None
    pdcp_delay: Optional[np.ndarray] = None
    label: Optional[CcAlgorithm] = None
    link: Optional[LinkConfig] = None
    wireless: Optional[WirelessConfig] = None
    seed: Optional[int] = None
    duration: Optional[float] = None
    stats: Optional[SimStats] = None

    @property
    def is_wireless(self) -> bool:
        return self.rlc_buffer is not None

    @property
    def n_records(self) -> int:
        return int(self.rx_time.shape[0])

    def records(self) -> list[PacketRecord]:
        """Materialize rows as named tuples (intended for small traces and tests)."""
        if self.is_wireless:
            return [
                PacketRecord(*vals)
                for vals in zip(
                    self.rx_time, self.tx_time, self.size.tolist(),
                    self.seq_end.tolist(), self.ack_sent.tolist(),
                    self.rlc_buffer.tolist(), self.pdcp_delay,
                )
            ]
        return [
            PacketRecord(*vals)
            for vals in zip(
                self.rx_time, self.tx_time, self.size.tolist(),
                self.seq_end.tolist(), self.ack_sent.tolist(),
            )
        ]

    def validate(self) -> None:
        n = self.n_records
        for name in ("tx_time", "size", "seq_end", "ack_sent"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"column {name} length mismatch")
        if self.is_wireless and (
            self.rlc_buffer.shape[0] != n or self.pdcp_delay.shape[0] != n
        ):
            raise ValueError("radio column length mismatch")
        if n > 1 and not np.all(np.diff(self.rx_time) > 0):
            raise ValueError("rx_time must strictly increase")
        if np.any(self.tx_time > self.rx_time):
            raise ValueError("tx_time must not exceed rx_time")
        if np.any(np.diff(self.seq_end) < 0):
            raise ValueError("seq_end must be non-decreasing")

    # ---------------- disk format ----------------

    def to_csv(self, path: str | Path) -> None:
        """Write packet columns as CSV; times carry nine decimal places."""
        path = Path(path)
        cols = WIRELESS_COLUMNS if self.is_wireless else WIRED_COLUMNS
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            if self.is_wireless:
                for row in zip(self.rx_time, self.tx_time, self.size, self.seq_end,
                               self.ack_sent, self.rlc_buffer, self.pdcp_delay):
                    fh.write("%.9f,%.9f,%d,%d,%d,%d,%.9f\n" % row)
            else:
                for row in zip(self.rx_time, self.tx_time, self.size,
                               self.seq_end, self.ack_sent):
                    fh.write("%.9f,%.9f,%d,%d,%d\n" % row)

    def meta_dict(self) -> dict:
        meta = {
            "format_version": 1,
            "label": self.label.label if self.label is not None else None,
            "seed": self.seed,
            "duration": self.duration,
            "n_records": self.n_records,
            "wireless": self.is_wireless,
            "link": asdict(self.link) if self.link is not None else None,
            "radio": asdict(self.wireless) if self.wireless is not None else None,
            "stats": self.stats.summary() if self.stats is not None else None,
        }
        return meta

    def save(self, directory: str | Path, stem: str) -> tuple[Path, Path]:
        """Write <stem>.csv plus a <stem>.json sidecar; returns both paths."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.json"
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.meta_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path

    @classmethod
    def from_csv(cls, path: str | Path) -> "FlowTrace":
        """Load a trace from CSV, picking up the JSON sidecar when present."""
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if tuple(header) == WIRELESS_COLUMNS:
            wireless = True
        elif tuple(header) == WIRED_COLUMNS:
            wireless = False
        else:
            raise ValueError(f"{path}: unrecognized trace header {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
        if data.shape[0] == 0:
            data = data.reshape(0, len(header))
        kw = {
            "rx_time": data[:, 0],
            "tx_time": data[:, 1],
            "size": data[:, 2].astype(np.int64),
            "seq_end": data[:, 3].astype(np.int64),
            "ack_sent": data[:, 4].astype(np.int64),
        }
        if wireless:
            kw["rlc_buffer"] = data[:, 5].astype(np.int64)
            kw["pdcp_delay"] = data[:, 6]
        trace = cls(**kw)
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            with open(sidecar) as fh:
                meta = json.load(fh)
            if meta.get("label"):
                trace.label = CcAlgorithm.from_name(meta["label"])
            trace.seed = meta.get("seed")
            trace.duration = meta.get("duration")
            if meta.get("link"):
                trace.link = LinkConfig(**meta["link"])
            if meta.get("radio"):
                trace.wireless = WirelessConfig(**meta["radio"])
        return trace


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
