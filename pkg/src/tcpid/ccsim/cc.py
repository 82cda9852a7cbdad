"""Per-algorithm congestion-control state machines.

Each algorithm is driven through three entry points: cc_on_ack for cumulative
ACK progress, cc_on_loss once per fast-recovery episode, and cc_on_timeout for
retransmission timeouts. The window unit is packets throughout; the transport
loop floors cwnd when deciding how many packets may be outstanding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

from .trace import CcAlgorithm

INIT_CWND = 10.0
MIN_CWND = 1.0

CUBIC_C = 0.4
CUBIC_BETA = 0.7
LOSS_BETA = 0.5            # NewReno, Vegas, Hybla multiplicative decrease

VEGAS_ALPHA = 2.0          # packets of tolerated queue backlog, lower bound
VEGAS_BETA = 4.0           # upper bound

HYBLA_RTT0 = 0.025         # reference RTT in seconds

WESTWOOD_GAIN = 0.1        # bandwidth EWMA weight for new samples

BBR_STARTUP_GAIN = 2.89    # 2/ln(2)
BBR_DRAIN_GAIN = 1.0 / BBR_STARTUP_GAIN
BBR_CWND_GAIN = 2.0
BBR_CYCLE = (1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
BBR_PROBE_RTT_INTERVAL = 10.0
BBR_PROBE_RTT_DURATION = 0.2
BBR_PROBE_RTT_CWND = 4.0
BBR_BW_WINDOW_ROUNDS = 10
BBR_FULL_BW_GROWTH = 1.25  # startup ends after 3 rounds below this growth
BBR_FULL_BW_ROUNDS = 3

SRTT_GAIN = 0.125          # smoothed RTT kept for Hybla's rho and BBR rounds


class Phase(Enum):
    SLOW_START = "slow_start"
    CONG_AVOID = "cong_avoid"
    RECOVERY = "recovery"
    STARTUP = "startup"
    DRAIN = "drain"
    PROBE_BW = "probe_bw"
    PROBE_RTT = "probe_rtt"


LOSS_BASED_PHASES = frozenset({Phase.SLOW_START, Phase.CONG_AVOID, Phase.RECOVERY})
RATE_BASED_PHASES = frozenset({Phase.STARTUP, Phase.DRAIN, Phase.PROBE_BW, Phase.PROBE_RTT})


class AckInfo(NamedTuple):
    """What the transport hands to the CC layer for one cumulative ACK.

    rtt_sample is None when the echoed segment was a retransmission, acked is
    the number of newly acknowledged packets, inflight the outstanding packet
    count after this ACK was absorbed. rate_sample is the delivery rate in
    packets per second measured over the echoed packet's flight window, or
    None when no valid sample exists.
    """

    now: float
    acked: int
    rtt_sample: Optional[float]
    inflight: int
    rate_sample: Optional[float] = None


@dataclass
class SenderState:
    """Mutable CC state for one flow."""

    algo: CcAlgorithm
    cwnd: float = INIT_CWND
    ssthresh: float = math.inf
    phase: Phase = Phase.SLOW_START
    min_rtt: float = math.inf
    srtt: float = 0.0
    # Cubic
    w_max: float = 0.0
    epoch_start: Optional[float] = None
    # Hybla
    rho: float = 1.0
    # Westwood and BBR share the bandwidth estimate (packets per second)
    bw_estimate: float = 0.0
    # BBR
    pacing_gain: float = BBR_STARTUP_GAIN
    full_bw: float = 0.0
    full_bw_rounds: int = 0
    filled_pipe: bool = False
    round_count: int = 0
    round_stamp: float = 0.0
    cycle_index: int = 0
    cycle_stamp: float = 0.0
    min_rtt_stamp: float = 0.0
    probe_rtt_done: float = 0.0
    bw_window: list = field(default_factory=list)   # (round, round-max bw) pairs

    def __post_init__(self) -> None:
        if self.algo == CcAlgorithm.BBR:
            self.phase = Phase.STARTUP


def make_state(algo: CcAlgorithm) -> SenderState:
    return SenderState(algo=algo)


def aimd_step(w: float, ack: bool, alpha: float = 1.0, beta: float = LOSS_BETA) -> float:
    """One additive-increase or multiplicative-decrease move, floored at 1 packet."""
    w = w + alpha if ack else w * beta
    return w if w > MIN_CWND else MIN_CWND


def cubic_window(t: float, w_max: float, c: float = CUBIC_C, beta: float = CUBIC_BETA) -> float:
    """Cubic target window t seconds into the current epoch."""
    k = (w_max * (1.0 - beta) / c) ** (1.0 / 3.0)
    w = c * (t - k) ** 3 + w_max
    return w if w > MIN_CWND else MIN_CWND


def _update_rtt(state: SenderState, sample: float) -> None:
    if sample < state.min_rtt:
        state.min_rtt = sample
    if state.srtt == 0.0:
        state.srtt = sample
    else:
        state.srtt += SRTT_GAIN * (sample - state.srtt)


def _slow_start_step(state: SenderState, acked: int, gain: float = 1.0) -> None:
    state.cwnd += gain * acked
    if state.cwnd >= state.ssthresh:
        state.cwnd = min(state.cwnd, max(state.ssthresh, MIN_CWND))
        state.phase = Phase.CONG_AVOID


def cc_on_ack(state: SenderState, ack: AckInfo) -> None:
    """Grow (or for Vegas possibly shrink) the window on new cumulative ACK."""
    if ack.rtt_sample is not None:
        _update_rtt(state, ack.rtt_sample)

    algo = state.algo
    if algo == CcAlgorithm.BBR:
        _bbr_on_ack(state, ack)
        return
    if state.phase == Phase.RECOVERY:
        return

    if algo == CcAlgorithm.NEWRENO:
        if state.phase == Phase.SLOW_START:
            _slow_start_step(state, ack.acked)
        else:
            state.cwnd = aimd_step(state.cwnd, True, ack.acked / state.cwnd)
    elif algo == CcAlgorithm.CUBIC:
        if state.phase == Phase.SLOW_START:
            _slow_start_step(state, ack.acked)
        else:
            _cubic_on_ack(state, ack)
    elif algo == CcAlgorithm.VEGAS:
        _vegas_on_ack(state, ack)
    elif algo == CcAlgorithm.HYBLA:
        if state.min_rtt != math.inf:
            state.rho = max(1.0, state.min_rtt / HYBLA_RTT0)
        if state.phase == Phase.SLOW_START:
            _slow_start_step(state, ack.acked, gain=2.0 ** state.rho - 1.0)
        else:
            state.cwnd = aimd_step(state.cwnd, True, state.rho * state.rho * ack.acked / state.cwnd)
    elif algo == CcAlgorithm.WESTWOOD:
        _westwood_sample_bw(state, ack)
        if state.phase == Phase.SLOW_START:
            _slow_start_step(state, ack.acked)
        else:
            state.cwnd = aimd_step(state.cwnd, True, ack.acked / state.cwnd)
    else:
        raise ValueError(f"unhandled algorithm {algo}")


def _cubic_on_ack(state: SenderState, ack: AckInfo) -> None:
    if state.epoch_start is None:
        state.epoch_start = ack.now
        if state.w_max < state.cwnd:
            state.w_max = state.cwnd
    t = ack.now - state.epoch_start
    rtt = ack.rtt_sample if ack.rtt_sample is not None else state.srtt
    target = cubic_window(t + rtt, state.w_max)
    if target > state.cwnd:
        state.cwnd += (target - state.cwnd) * ack.acked / state.cwnd


def _vegas_on_ack(state: SenderState, ack: AckInfo) -> None:
    rtt = ack.rtt_sample
    if rtt is None or state.min_rtt == math.inf:
        return
    diff = state.cwnd * (1.0 - state.min_rtt / rtt)
    if state.phase == Phase.SLOW_START:
        if diff >= VEGAS_ALPHA:
            state.phase = Phase.CONG_AVOID
            state.ssthresh = state.cwnd
        else:
            _slow_start_step(state, ack.acked)
        return
    if diff < VEGAS_ALPHA:
        state.cwnd = aimd_step(state.cwnd, True, ack.acked / state.cwnd)
    elif diff > VEGAS_BETA:
        state.cwnd = max(state.cwnd - ack.acked / state.cwnd, MIN_CWND)


def _westwood_sample_bw(state: SenderState, ack: AckInfo) -> None:
    if ack.rate_sample is None:
        return
    if state.bw_estimate == 0.0:
        state.bw_estimate = ack.rate_sample
    else:
        state.bw_estimate += WESTWOOD_GAIN * (ack.rate_sample - state.bw_estimate)


# ---------------- BBR ----------------

def _bbr_record_bw(state: SenderState, ack: AckInfo) -> None:
    if ack.rate_sample is None:
        return
    sample = ack.rate_sample
    win = state.bw_window
    if win and win[-1][0] == state.round_count:
        if sample > win[-1][1]:
            win[-1] = (state.round_count, sample)
    else:
        win.append((state.round_count, sample))
    while win and win[0][0] < state.round_count - BBR_BW_WINDOW_ROUNDS:
        win.pop(0)
    state.bw_estimate = max(v for _, v in win)


def _bbr_on_ack(state: SenderState, ack: AckInfo) -> None:
    now = ack.now
    # min-RTT window: keep the smallest sample, restart the window on expiry
    if ack.rtt_sample is not None:
        if ack.rtt_sample <= state.min_rtt or now - state.min_rtt_stamp > BBR_PROBE_RTT_INTERVAL:
            state.min_rtt = ack.rtt_sample
            state.min_rtt_stamp = now

    round_rtt = state.srtt if state.srtt > 0.0 else state.min_rtt
    new_round = round_rtt > 0.0 and now - state.round_stamp >= round_rtt
    if new_round:
        state.round_count += 1
        state.round_stamp = now
    _bbr_record_bw(state, ack)

    if state.phase == Phase.STARTUP:
        if new_round:
            if state.bw_estimate >= state.full_bw * BBR_FULL_BW_GROWTH:
                state.full_bw = state.bw_estimate
                state.full_bw_rounds = 0
            else:
                state.full_bw_rounds += 1
                if state.full_bw_rounds >= BBR_FULL_BW_ROUNDS:
                    state.filled_pipe = True
                    state.phase = Phase.DRAIN
                    state.pacing_gain = BBR_DRAIN_GAIN
    if state.phase == Phase.DRAIN:
        if ack.inflight <= _bbr_bdp(state):
            _bbr_enter_probe_bw(state, now)
    elif state.phase == Phase.PROBE_BW:
        if state.min_rtt > 0.0 and now - state.cycle_stamp > state.min_rtt:
            state.cycle_index = (state.cycle_index + 1) % len(BBR_CYCLE)
            state.cycle_stamp = now
            state.pacing_gain = BBR_CYCLE[state.cycle_index]

    if state.phase == Phase.PROBE_RTT:
        if now >= state.probe_rtt_done:
            state.min_rtt_stamp = now
            if state.filled_pipe:
                _bbr_enter_probe_bw(state, now)
            else:
                state.phase = Phase.STARTUP
                state.pacing_gain = BBR_STARTUP_GAIN
    elif state.filled_pipe and now - state.min_rtt_stamp > BBR_PROBE_RTT_INTERVAL:
        state.phase = Phase.PROBE_RTT
        state.pacing_gain = 1.0
        state.probe_rtt_done = now + BBR_PROBE_RTT_DURATION

    state.cwnd = _bbr_target_cwnd(state)


def _bbr_bdp(state: SenderState) -> float:
    if state.bw_estimate <= 0.0 or state.min_rtt == math.inf:
        return INIT_CWND
    return state.bw_estimate * state.min_rtt


def _bbr_enter_probe_bw(state: SenderState, now: float) -> None:
    state.phase = Phase.PROBE_BW
    state.cycle_index = 2  # start in a cruise slot, matching the reference pseudocode spirit
    state.cycle_stamp = now
    state.pacing_gain = BBR_CYCLE[state.cycle_index]


def _bbr_target_cwnd(state: SenderState) -> float:
    if state.phase == Phase.PROBE_RTT:
        return BBR_PROBE_RTT_CWND
    if state.bw_estimate <= 0.0 or state.min_rtt == math.inf:
        return max(state.cwnd, INIT_CWND)
    bdp = state.bw_estimate * state.min_rtt
    gain = BBR_STARTUP_GAIN if state.phase == Phase.STARTUP else BBR_CWND_GAIN
    return max(gain * bdp, BBR_PROBE_RTT_CWND)


def pacing_rate_pps(state: SenderState) -> float:
    """Packets per second the sender may emit; 0 means unpaced."""
    if state.algo != CcAlgorithm.BBR or state.bw_estimate <= 0.0:
        return 0.0
    return state.pacing_gain * state.bw_estimate


# ---------------- loss and timeout ----------------

def cc_on_loss(state: SenderState, now: float) -> None:
    """One multiplicative decrease per recovery episode. BBR ignores loss."""
    algo = state.algo
    if algo == CcAlgorithm.BBR:
        return
    if algo == CcAlgorithm.CUBIC:
        state.w_max = state.cwnd
        state.cwnd = max(state.cwnd * CUBIC_BETA, MIN_CWND)
        state.ssthresh = state.cwnd
        state.epoch_start = None
    elif algo == CcAlgorithm.WESTWOOD:
        if state.bw_estimate > 0.0 and state.min_rtt != math.inf:
            state.ssthresh = max(state.bw_estimate * state.min_rtt, 2.0)
        else:
            state.ssthresh = max(state.cwnd * LOSS_BETA, 2.0)
        state.cwnd = min(max(state.ssthresh, MIN_CWND), state.cwnd)
    else:
        state.cwnd = max(state.cwnd * LOSS_BETA, MIN_CWND)
        state.ssthresh = max(state.cwnd, 2.0)
    state.phase = Phase.RECOVERY


def cc_on_timeout(state: SenderState, now: float) -> None:
    """Retransmission timeout: collapse to one packet and re-enter slow start."""
    algo = state.algo
    if algo == CcAlgorithm.BBR:
        return
    if algo == CcAlgorithm.CUBIC:
        state.w_max = state.cwnd
        state.ssthresh = max(state.cwnd * CUBIC_BETA, 2.0)
        state.epoch_start = None
    elif algo == CcAlgorithm.WESTWOOD and state.bw_estimate > 0.0 and state.min_rtt != math.inf:
        state.ssthresh = max(state.bw_estimate * state.min_rtt, 2.0)
    else:
        state.ssthresh = max(state.cwnd * LOSS_BETA, 2.0)
    state.cwnd = MIN_CWND
    state.phase = Phase.SLOW_START


def exit_recovery(state: SenderState) -> None:
    """Called by the transport when the recovery point is fully acknowledged."""
    if state.phase == Phase.RECOVERY:
        state.phase = Phase.CONG_AVOID
