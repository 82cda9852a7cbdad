"""Receiver-side feature channels derived from a packet trace.

Each channel is evaluated on the flow's coalesced arrival instants: records
sharing an rx timestamp (segments batched by the capture) merge into one
observation whose size is the byte sum and whose remaining fields come from
the last record of the batch. Throughput needs an inter-arrival gap, so the
series starts at the second instant; all channels share that time base.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .ccsim.trace import CcAlgorithm, FlowTrace

WIRED_CHANNELS = ("throughput", "oneway_delay", "inflight", "packet_size")
WIRELESS_CHANNELS = ("throughput", "oneway_delay", "packet_size", "pdcp_delay", "rlc_buffer")


@dataclass
class FeatureSeries:
    """Per-flow feature channels on a shared, strictly increasing time base.

    values holds one row per channel in the order given by channels;
    throughput is in bit/s, oneway_delay and pdcp_delay in seconds, inflight
    and packet_size in bytes, rlc_buffer in packets.
    """

    t: np.ndarray
    channels: tuple[str, ...]
    values: np.ndarray          # shape (len(channels), len(t))
    label: Optional[CcAlgorithm] = None
    source: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return int(self.t.shape[0])

    @property
    def is_wireless(self) -> bool:
        return self.channels == WIRELESS_CHANNELS

    def channel(self, name: str) -> np.ndarray:
        return self.values[self.channels.index(name)]

    def validate(self) -> None:
        if self.values.shape != (len(self.channels), self.t.shape[0]):
            raise ValueError("values shape does not match channels x time")
        if self.n_samples > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("feature timestamps must strictly increase")

    def to_csv(self, path: str | Path) -> None:
        path = Path(path)
        with open(path, "w") as fh:
            fh.write("t," + ",".join(self.channels) + "\n")
            fmt = "%.9f," + ",".join(["%.9g"] * len(self.channels)) + "\n"
            for row in zip(self.t, *self.values):
                fh.write(fmt % row)

    def save(self, directory: str | Path, stem: str) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        json_path = directory / f"{stem}.json"
        self.to_csv(csv_path)
        meta = {
            "format_version": 1,
            "label": self.label.label if self.label is not None else None,
            "channels": list(self.channels),
            "n_samples": self.n_samples,
            "source": self.source,
        }
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path

    @classmethod
    def from_csv(cls, path: str | Path) -> "FeatureSeries":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if header[0] != "t":
            raise ValueError(f"{path}: expected a 't' column first, got {header}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        series = cls(t=data[:, 0], channels=tuple(header[1:]), values=data[:, 1:].T.copy())
        sidecar = path.with_suffix(".json")
        if sidecar.exists():
            with open(sidecar) as fh:
                meta = json.load(fh)
            if meta.get("label"):
                series.label = CcAlgorithm.from_name(meta["label"])
            series.source = meta.get("source")
        series.validate()
        return series


def extract_features(trace: FlowTrace) -> FeatureSeries:
    """Turn one packet trace into its feature channel series."""
    if trace.n_records < 3:
        raise ValueError("trace too short for feature extraction (need >= 3 records)")
    rx = trace.rx_time
    # coalesce records sharing an rx timestamp
    uniq, first = np.unique(rx, return_index=True)
    bytes_at = np.add.reduceat(trace.size, first)
    last = np.concatenate([first[1:], [rx.shape[0]]]) - 1

    owd_all = rx - trace.tx_time
    base_delay = owd_all.min()

    t = uniq[1:]
    throughput = bytes_at[1:] * 8.0 / np.diff(uniq)
    oneway = owd_all[last][1:] - base_delay
    pkt_size = bytes_at[1:].astype(np.float64)

    if trace.is_wireless:
        channels = WIRELESS_CHANNELS
        rows = [
            throughput,
            oneway,
            pkt_size,
            trace.pdcp_delay[last][1:],
            trace.rlc_buffer[last][1:].astype(np.float64),
        ]
    else:
        channels = WIRED_CHANNELS
        inflight = (trace.seq_end - trace.ack_sent)[last][1:].astype(np.float64)
        rows = [throughput, oneway, inflight, pkt_size]

    series = FeatureSeries(
        t=t,
        channels=channels,
        values=np.vstack(rows),
        label=trace.label,
        source=None,
    )
    series.validate()
    return series
