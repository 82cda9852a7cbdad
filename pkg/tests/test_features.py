"""Feature extraction against hand-computed values."""
import numpy as np
import pytest

from tcpid.ccsim import CcAlgorithm, FlowTrace, LinkConfig, WirelessConfig, simulate_flow
from tcpid.features import WIRED_CHANNELS, WIRELESS_CHANNELS, FeatureSeries, extract_features


def small_trace():
    return FlowTrace(
        rx_time=np.array([1.0, 1.1, 1.3]),
        tx_time=np.array([0.95, 1.08, 1.25]),
        size=np.array([1500, 1500, 1500]),
        seq_end=np.array([1500, 3000, 4500]),
        ack_sent=np.array([0, 1000, 1500]),
        label=CcAlgorithm.VEGAS,
    )


def test_wired_channels_hand_computed():
    fs = extract_features(small_trace())
    assert fs.channels == WIRED_CHANNELS
    assert fs.t == pytest.approx([1.1, 1.3])
    # size*8 over the inter-arrival gap
    assert fs.channel("throughput") == pytest.approx([120000.0, 60000.0])
    # delays: raw one-way [0.05, 0.02, 0.05] minus the per-flow floor 0.02
    assert fs.channel("oneway_delay") == pytest.approx([0.0, 0.03])
    # bytes the sender had exposed beyond the echoed cumulative ACK
    assert fs.channel("inflight") == pytest.approx([2000.0, 3000.0])
    assert fs.channel("packet_size") == pytest.approx([1500.0, 1500.0])
    assert fs.label is CcAlgorithm.VEGAS


def test_coalesces_equal_timestamps():
    tr = FlowTrace(
        rx_time=np.array([1.0, 1.0, 1.2]),
        tx_time=np.array([0.95, 0.96, 1.15]),
        size=np.array([1500, 1000, 1500]),
        seq_end=np.array([1500, 2500, 4000]),
        ack_sent=np.array([0, 0, 1500]),
    )
    fs = extract_features(tr)
    assert fs.t == pytest.approx([1.2])
    assert fs.channel("throughput") == pytest.approx([1500 * 8 / 0.2])
    assert fs.channel("packet_size") == pytest.approx([1500.0])
    # delay floor comes from the merged batch's last record: raw delays
    # [0.05, 0.04, 0.05], floor 0.04, last record of final instant 0.05
    assert fs.channel("oneway_delay") == pytest.approx([0.01])


def test_wireless_channel_set():
    link = LinkConfig(rate=8e6, prop_rtt=0.05, buffer=200, random_loss=0.01)
    radio = WirelessConfig(err_prob=0.1, rlc_cap=150)
    tr = simulate_flow(CcAlgorithm.HYBLA, link, 3.0, seed=5, wireless=radio)
    fs = extract_features(tr)
    assert fs.channels == WIRELESS_CHANNELS
    assert fs.n_samples == tr.n_records - 1
    assert np.all(fs.channel("pdcp_delay") >= radio.air_delay - 1e-12)
    assert np.all(fs.channel("rlc_buffer") >= 0)


def test_oneway_delay_floor_is_zero_on_sim_traces():
    tr = simulate_flow(CcAlgorithm.NEWRENO, LinkConfig(rate=8e6, prop_rtt=0.05, buffer=200), 3.0, 2)
    fs = extract_features(tr)
    owd = fs.channel("oneway_delay")
    assert owd.min() >= 0.0
    assert owd.min() < 1e-12 or np.isclose(owd.min(), 0.0)


def test_throughput_positive_and_bounded():
    link = LinkConfig(rate=6e6, prop_rtt=0.05, buffer=200)
    tr = simulate_flow(CcAlgorithm.CUBIC, link, 4.0, seed=3)
    fs = extract_features(tr)
    thr = fs.channel("throughput")
    assert np.all(thr > 0)
    # a single inter-arrival gap can never beat the bottleneck service rate
    assert thr.max() <= link.rate * (1 + 1e-9)


def test_feature_csv_roundtrip(tmp_path):
    fs = extract_features(small_trace())
    csv_path, _ = fs.save(tmp_path, "feat")
    with open(csv_path) as fh:
        assert fh.readline().strip() == "t,throughput,oneway_delay,inflight,packet_size"
    back = FeatureSeries.from_csv(csv_path)
    assert back.channels == fs.channels
    assert back.label is CcAlgorithm.VEGAS
    assert np.allclose(back.t, fs.t, atol=1e-9)
    assert np.allclose(back.values, fs.values, rtol=1e-6)


def test_too_short_trace_rejected():
    tr = FlowTrace(
        rx_time=np.array([1.0, 1.1]),
        tx_time=np.array([0.9, 1.0]),
        size=np.array([1500, 1500]),
        seq_end=np.array([1500, 3000]),
        ack_sent=np.array([0, 0]),
    )
    with pytest.raises(ValueError):
        extract_features(tr)
