"""Unit checks for the congestion-control state machines against hand-computed values."""
import math

import pytest
from hypothesis import given, strategies as st

from tcpid.ccsim import (
    AckInfo,
    CcAlgorithm,
    Phase,
    aimd_step,
    cc_on_ack,
    cc_on_loss,
    cc_on_timeout,
    cubic_window,
    make_state,
)
from tcpid.ccsim.cc import (
    BBR_PROBE_RTT_CWND,
    LOSS_BASED_PHASES,
    RATE_BASED_PHASES,
    _bbr_target_cwnd,
    pacing_rate_pps,
)

LOSS_BASED = [
    CcAlgorithm.NEWRENO,
    CcAlgorithm.CUBIC,
    CcAlgorithm.VEGAS,
    CcAlgorithm.HYBLA,
    CcAlgorithm.WESTWOOD,
]


def ack(now, acked, rtt, inflight=10, rate=None):
    return AckInfo(now, acked, rtt, inflight, rate)


# ---------------- aimd_step ----------------

def test_aimd_step_frozen_values():
    assert aimd_step(100.0, True, 1.0, 0.5) == 101.0
    assert aimd_step(100.0, False, 1.0, 0.5) == 50.0
    assert aimd_step(100.0, False, 1.0, 0.7) == pytest.approx(70.0)
    assert aimd_step(1.2, False, 1.0, 0.5) == 1.0  # floored at one packet


@given(
    w=st.floats(1.0, 1e4),
    alpha=st.floats(0.0, 10.0),
    beta=st.floats(0.1, 0.99),
)
def test_aimd_step_direction(w, alpha, beta):
    assert aimd_step(w, True, alpha, beta) >= w
    assert aimd_step(w, False, alpha, beta) <= max(w, 1.0)
    assert aimd_step(w, False, alpha, beta) >= 1.0


# ---------------- cubic_window ----------------

def test_cubic_window_frozen_values():
    k = 75.0 ** (1.0 / 3.0)  # (w_max*(1-beta)/C)**(1/3) for w_max=100
    assert cubic_window(k, 100.0) == pytest.approx(100.0, abs=1e-9)
    assert cubic_window(k + 1.0, 100.0) == pytest.approx(100.4, rel=1e-12)
    # at epoch start the target equals the post-loss window beta*w_max
    assert cubic_window(0.0, 100.0) == pytest.approx(70.0, abs=1e-9)


@given(
    w_max=st.floats(2.0, 2e3),
    t1=st.floats(0.0, 30.0),
    dt=st.floats(0.0, 10.0),
)
def test_cubic_window_monotone(w_max, t1, dt):
    assert cubic_window(t1 + dt, w_max) >= cubic_window(t1, w_max) - 1e-9
    assert cubic_window(t1, w_max) >= 1.0


# ---------------- per-algorithm ack growth ----------------

def test_newreno_slow_start_doubles_per_window():
    s = make_state(CcAlgorithm.NEWRENO)
    cc_on_ack(s, ack(0.1, 10, 0.1))
    assert s.cwnd == 20.0
    assert s.phase is Phase.SLOW_START


def test_newreno_congestion_avoidance_one_per_window():
    s = make_state(CcAlgorithm.NEWRENO)
    s.phase = Phase.CONG_AVOID
    cc_on_ack(s, ack(0.1, 10, 0.1))
    assert s.cwnd == 11.0


def test_hybla_scales_growth_by_rho_squared():
    s = make_state(CcAlgorithm.HYBLA)
    s.phase = Phase.CONG_AVOID
    cc_on_ack(s, ack(0.1, 10, 0.05))  # min_rtt 50ms -> rho = 2
    assert s.rho == 2.0
    assert s.cwnd == 14.0  # 10 + rho^2 * acked / cwnd


def test_hybla_slow_start_gain():
    s = make_state(CcAlgorithm.HYBLA)
    cc_on_ack(s, ack(0.1, 1, 0.05))
    assert s.cwnd == 13.0  # +(2^rho - 1) per acked packet


def test_hybla_rho_floors_at_one():
    s = make_state(CcAlgorithm.HYBLA)
    cc_on_ack(s, ack(0.1, 1, 0.01))
    assert s.rho == 1.0


def test_vegas_holds_inside_band():
    s = make_state(CcAlgorithm.VEGAS)
    s.phase = Phase.CONG_AVOID
    cc_on_ack(s, ack(0.1, 1, 0.1))   # first sample sets min_rtt, diff = 0 < alpha
    assert s.cwnd == pytest.approx(10.1)
    # rtt chosen so diff = cwnd*(1 - 0.05/0.1) > beta: back off
    s2 = make_state(CcAlgorithm.VEGAS)
    s2.phase = Phase.CONG_AVOID
    cc_on_ack(s2, ack(0.1, 1, 0.05))
    cc_on_ack(s2, ack(0.2, 1, 0.1))
    assert s2.cwnd < 10.1


def test_vegas_slow_start_exits_on_queueing_delay():
    s = make_state(CcAlgorithm.VEGAS)
    cc_on_ack(s, ack(0.1, 10, 0.05))
    assert s.phase is Phase.SLOW_START
    # diff = 20*(1 - 0.05/0.1) = 10 >= alpha 2: stop climbing, no loss needed
    cc_on_ack(s, ack(0.2, 10, 0.1))
    assert s.phase is Phase.CONG_AVOID
    assert s.cwnd == 20.0


def test_westwood_bandwidth_ewma():
    s = make_state(CcAlgorithm.WESTWOOD)
    s.phase = Phase.CONG_AVOID
    cc_on_ack(s, ack(0.1, 1, 0.06, rate=600.0))
    assert s.bw_estimate == 600.0
    cc_on_ack(s, ack(0.2, 1, 0.06, rate=400.0))
    assert s.bw_estimate == pytest.approx(580.0)  # 600 + 0.1*(400-600)


# ---------------- loss and timeout reactions ----------------

def test_loss_multiplicative_decrease_factors():
    for algo, factor in [
        (CcAlgorithm.NEWRENO, 0.5),
        (CcAlgorithm.VEGAS, 0.5),
        (CcAlgorithm.HYBLA, 0.5),
        (CcAlgorithm.CUBIC, 0.7),
    ]:
        s = make_state(algo)
        s.cwnd = 100.0
        s.phase = Phase.CONG_AVOID
        cc_on_loss(s, 1.0)
        assert s.cwnd == pytest.approx(100.0 * factor), algo
        assert s.phase is Phase.RECOVERY


def test_cubic_loss_records_w_max():
    s = make_state(CcAlgorithm.CUBIC)
    s.cwnd = 100.0
    s.phase = Phase.CONG_AVOID
    cc_on_loss(s, 1.0)
    assert s.w_max == 100.0
    assert s.epoch_start is None


def test_westwood_loss_tracks_bandwidth_delay_product():
    s = make_state(CcAlgorithm.WESTWOOD)
    s.cwnd = 100.0
    s.phase = Phase.CONG_AVOID
    s.bw_estimate = 500.0
    s.min_rtt = 0.06
    cc_on_loss(s, 1.0)
    assert s.cwnd == pytest.approx(30.0)  # bw * min_rtt, not a blind halving
    assert s.ssthresh == pytest.approx(30.0)


def test_bbr_ignores_loss():
    s = make_state(CcAlgorithm.BBR)
    s.cwnd = 80.0
    before = (s.cwnd, s.phase)
    cc_on_loss(s, 1.0)
    cc_on_timeout(s, 2.0)
    assert (s.cwnd, s.phase) == before


def test_timeout_collapses_to_one_packet():
    s = make_state(CcAlgorithm.NEWRENO)
    s.cwnd = 100.0
    s.phase = Phase.CONG_AVOID
    cc_on_timeout(s, 1.0)
    assert s.cwnd == 1.0
    assert s.ssthresh == 50.0
    assert s.phase is Phase.SLOW_START


# ---------------- BBR specifics ----------------

def test_bbr_target_cwnd_is_two_bdp():
    s = make_state(CcAlgorithm.BBR)
    s.phase = Phase.PROBE_BW
    s.bw_estimate = 500.0
    s.min_rtt = 0.08
    assert _bbr_target_cwnd(s) == pytest.approx(80.0)


def test_bbr_probe_rtt_clamps_cwnd():
    s = make_state(CcAlgorithm.BBR)
    s.phase = Phase.PROBE_RTT
    s.bw_estimate = 500.0
    s.min_rtt = 0.08
    assert _bbr_target_cwnd(s) == BBR_PROBE_RTT_CWND


def test_bbr_pacing_rate_follows_gain():
    s = make_state(CcAlgorithm.BBR)
    assert pacing_rate_pps(s) == 0.0  # unpaced until a bandwidth sample exists
    s.bw_estimate = 400.0
    s.pacing_gain = 1.25
    assert pacing_rate_pps(s) == pytest.approx(500.0)
    n = make_state(CcAlgorithm.NEWRENO)
    n.bw_estimate = 400.0
    assert pacing_rate_pps(n) == 0.0


def test_bbr_startup_exits_after_bandwidth_plateau():
    s = make_state(CcAlgorithm.BBR)
    assert s.phase is Phase.STARTUP
    t = 0.0
    rate = 100.0
    for _ in range(60):
        t += 0.05
        cc_on_ack(s, ack(t, 5, 0.05, inflight=40, rate=rate))
        if s.phase is not Phase.STARTUP:
            break
    assert s.phase in (Phase.DRAIN, Phase.PROBE_BW)


# ---------------- phase families never mix ----------------

def test_phase_families_stay_separate():
    for algo in LOSS_BASED:
        s = make_state(algo)
        t = 0.0
        for i in range(50):
            t += 0.05
            cc_on_ack(s, ack(t, 2, 0.05 + 0.001 * (i % 7), rate=300.0))
            assert s.phase in LOSS_BASED_PHASES, algo
        cc_on_loss(s, t)
        assert s.phase in LOSS_BASED_PHASES
        cc_on_timeout(s, t + 1)
        assert s.phase in LOSS_BASED_PHASES
    b = make_state(CcAlgorithm.BBR)
    t = 0.0
    for i in range(200):
        t += 0.02
        cc_on_ack(b, ack(t, 2, 0.05, inflight=20, rate=250.0))
        assert b.phase in RATE_BASED_PHASES
