"""Event-driven simulation of one bulk TCP flow over a bottleneck link.

The sender keeps up to floor(cwnd) packets outstanding (BBR additionally paces),
the bottleneck serves mtu-sized packets at link.rate into a drop-tail queue,
delivered packets propagate prop_rtt/2 to the receiver and ACKs take another
prop_rtt/2 back. ACKs carry the cumulative count, the highest index seen and
the first holes below it, which lets the sender detect drops exactly on a
single FIFO path. An optional radio stage with a bounded FIFO queue, per-attempt
error probability and bounded retransmission sits between bottleneck and
receiver for wireless scenarios.

Identical (algo, link, duration, seed, wireless) inputs give bit-identical
traces; all randomness derives from numpy SeedSequence streams.
"""
from __future__ import annotations

import heapq
from bisect import bisect_left, insort
from collections import deque
from typing import NamedTuple, Optional

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

from .cc import (
    AckInfo,
    cc_on_ack,
    cc_on_loss,
    cc_on_timeout,
    exit_recovery,
    make_state,
    pacing_rate_pps,
)
from .trace import CcAlgorithm, FlowTrace, LinkConfig, SimStats, WirelessConfig

RTO_MIN = 0.2
RTO_MAX = 60.0
RTO_INIT = 1.0
ACK_HOLE_LIMIT = 64        # holes reported per ACK
CWND_SAMPLE_EVERY = 16     # keep every Nth cwnd sample for diagnostics

# event kinds; at equal timestamps lower kinds run first so that queue
# departures free their slot before same-instant arrivals are admitted
K_BN_DONE, K_RLC_DONE, K_RLC_ARRIVE, K_RX, K_ACK, K_PACE, K_RTO = range(7)


class SimulationStall(RuntimeError):
    """Raised when the event queue empties before the configured duration."""


def simulate_flow(
    algo: CcAlgorithm | int | str,
    link: LinkConfig,
    duration: float,
    seed: int,
    wireless: Optional[WirelessConfig] = None,
) -> FlowTrace:
    """Simulate one flow and return its receiver-side trace."""
    if isinstance(algo, str):
        algo = CcAlgorithm.from_name(algo)
    algo = CcAlgorithm(algo)
    link.validate()
    if wireless is not None:
        wireless.validate()
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    sim = _FlowSim(algo, link, duration, seed, wireless)
    return sim.run()


class _FlowSim:
    __slots__ = (
        "algo", "link", "duration", "seed", "wl", "state",
        "rng_link", "rng_rlc", "mtu", "st", "prop", "ploss", "qcap",
        "air", "errp", "rcap", "max_att",
        "heap", "serial",
        "snd_una", "snd_nxt", "last_sent", "lost", "lost_set", "sacked",
        "known_time", "in_recovery", "recovery_high",
        "srtt", "rttvar", "rto", "rto_armed", "last_progress", "hi_seen",
        "next_send", "pace_pending", "ack_seen",
        "bn_q", "bn_busy", "rq", "rlc_busy", "rlc_att", "rlc_held",
        "recv", "r_hi", "r_cum", "holes", "transit",
        "stats", "rx_l", "tx_l", "seq_l", "ack_l", "buf_l", "pdcp_l",
        "gt_l", "cw_t", "cw_v", "rlc_arr",
    )

    def __init__(self, algo, link, duration, seed, wireless):
        self.algo = algo
        self.link = link
        self.duration = float(duration)
        self.seed = seed
        self.wl = wireless
        self.state = make_state(algo)
        self.rng_link = Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(0,))))
        self.rng_rlc = Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(1,))))

        self.mtu = link.mtu
        self.st = link.mtu * 8.0 / link.rate
        self.prop = link.prop_rtt / 2.0
        self.ploss = link.random_loss
        self.qcap = link.buffer
        if wireless is not None:
            self.air = wireless.air_delay
            self.errp = wireless.err_prob
            self.rcap = wireless.rlc_cap
            self.max_att = wireless.max_retx + 1

        self.heap = []
        self.serial = 0

        self.snd_una = 0
        self.snd_nxt = 0
        self.last_sent = []
        self.lost = []
        self.lost_set = set()
        self.sacked = 0
        self.known_time = 0.0
        self.in_recovery = False
        self.recovery_high = 0
        self.srtt = 0.0
        self.rttvar = 0.0
        self.rto = RTO_INIT
        self.rto_armed = False
        self.last_progress = 0.0
        self.hi_seen = 0
        self.next_send = 0.0
        self.pace_pending = False
        self.ack_seen = 0

        self.bn_q = deque()
        self.bn_busy = False
        self.rq = deque()
        self.rlc_busy = False
        self.rlc_att = 0
        self.rlc_held = 0

        self.recv = bytearray()
        self.r_hi = 0
        self.r_cum = 0
        self.holes = []
        self.transit = 0

        self.stats = SimStats()
        self.rx_l = []
        self.tx_l = []
        self.seq_l = []
        self.ack_l = []
        self.buf_l = []
        self.pdcp_l = []
        self.gt_l = []
        self.cw_t = []
        self.cw_v = []
        self.rlc_arr = []

    def _push(self, t, kind, arg):
        self.serial += 1
        heapq.heappush(self.heap, (t, kind, self.serial, arg))

    # ---------------- sender ----------------

    def _try_send(self, now):
        state = self.state
        cwnd_i = int(state.cwnd + 1e-9)
        if cwnd_i < 1:
            cwnd_i = 1
        pipe = (self.snd_nxt - self.snd_una) - len(self.lost) - self.sacked
        if pipe < 0:
            pipe = 0
        paced = self.algo == CcAlgorithm.BBR
        mtu = self.mtu
        while pipe < cwnd_i:
            if paced:
                rate = pacing_rate_pps(state)
                if rate > 0.0 and now < self.next_send:
                    if not self.pace_pending:
                        self.pace_pending = True
                        self._push(self.next_send, K_PACE, None)
                    break
            else:
                rate = 0.0
            if self.lost:
                idx = self.lost.pop(0)
                self.lost_set.discard(idx)
                retx = True
                self.stats.retransmits += 1
                self.last_sent[idx] = now
            else:
                idx = self.snd_nxt
                self.snd_nxt += 1
                retx = False
                self.last_sent.append(now)
            gt = (self.snd_nxt - self.snd_una) * mtu
            known = self.snd_una + self.sacked
            pkt = (idx, now, self.snd_una * mtu, gt, retx, known, self.known_time)
            self.stats.sent += 1
            bn_q = self.bn_q
            if len(bn_q) >= self.qcap:
                self.stats.drop_queue += 1
            else:
                bn_q.append(pkt)
                if len(bn_q) > self.stats.queue_max:
                    self.stats.queue_max = len(bn_q)
                if not self.bn_busy:
                    self.bn_busy = True
                    self._push(now + self.st, K_BN_DONE, None)
            pipe += 1
            if rate > 0.0:
                self.next_send = max(self.next_send, now) + 1.0 / rate
            if not self.rto_armed:
                self.rto_armed = True
                self.last_progress = now
                self._push(now + self.rto, K_RTO, None)

    def _on_ack(self, t, payload):
        cum, hi, n_holes, miss, echo_tx, echo_retx, echo_known, echo_ktime = payload
        newly = cum - self.snd_una
        sample = None if echo_retx else t - echo_tx
        if sample is not None:
            if self.srtt == 0.0:
                self.srtt = sample
                self.rttvar = sample * 0.5
            else:
                self.rttvar += 0.25 * (abs(self.srtt - sample) - self.rttvar)
                self.srtt += 0.125 * (sample - self.srtt)
            self.rto = min(max(self.srtt + 4.0 * self.rttvar, RTO_MIN), RTO_MAX)
        self.sacked = max((hi - cum) - n_holes, 0)
        # delivery rate measured between known-received updates straddling the
        # echoed copy's flight; out-of-order arrivals cancel and idle gaps on
        # the send side cannot inflate the sample above the bottleneck rate
        dk = (cum + self.sacked) - echo_known
        dt = t - echo_ktime
        rate_sample = dk / dt if dk > 0 and dt > 0.0 else None
        if dk > 0:
            self.known_time = t
        if hi > self.hi_seen:
            # receiver keeps absorbing packets, so the path is alive: restart the
            # retransmission timer even while the cumulative point is stuck
            self.hi_seen = hi
            self.last_progress = t
        if newly > 0:
            self.snd_una = cum
            self.last_progress = t
            lost = self.lost
            while lost and lost[0] < cum:
                self.lost_set.discard(lost.pop(0))
            if self.in_recovery and cum >= self.recovery_high:
                self.in_recovery = False
                exit_recovery(self.state)
            inflight = max((self.snd_nxt - self.snd_una) - len(lost) - self.sacked, 0)
            before = self.state.cwnd
            cc_on_ack(self.state, AckInfo(t, newly, sample, inflight, rate_sample))
            self.ack_seen += 1
            if self.ack_seen % CWND_SAMPLE_EVERY == 0 or self.state.cwnd < before:
                self.cw_t.append(t)
                self.cw_v.append(self.state.cwnd)
        new_loss = False
        if miss:
            last_sent = self.last_sent
            lost_set = self.lost_set
            for i in miss:
                if i >= self.snd_una and i not in lost_set and last_sent[i] < echo_tx:
                    insort(self.lost, i)
                    lost_set.add(i)
                    new_loss = True
        if new_loss and not self.in_recovery:
            self.in_recovery = True
            self.recovery_high = self.snd_nxt
            before = self.state.cwnd
            cc_on_loss(self.state, t)
            self.stats.loss_events.append((t, before, self.state.cwnd, "fast"))
            self.cw_t.append(t)
            self.cw_v.append(self.state.cwnd)
        self._try_send(t)

    def _on_rto(self, t):
        if self.snd_una >= self.snd_nxt:
            self.rto_armed = False
            return
        if t - self.last_progress + 1e-12 < self.rto:
            self._push(self.last_progress + self.rto, K_RTO, None)
            return
        self.stats.timeouts += 1
        self.rto = min(self.rto * 2.0, RTO_MAX)
        self.lost = list(range(self.snd_una, self.snd_nxt))
        self.lost_set = set(self.lost)
        before = self.state.cwnd
        cc_on_timeout(self.state, t)
        self.stats.loss_events.append((t, before, self.state.cwnd, "timeout"))
        self.cw_t.append(t)
        self.cw_v.append(self.state.cwnd)
        self.in_recovery = True
        self.recovery_high = self.snd_nxt
        self.last_progress = t
        self._push(t + self.rto, K_RTO, None)
        self._try_send(t)

    # ---------------- links ----------------

    def _on_bn_done(self, t):
        pkt = self.bn_q.popleft()
        if self.ploss > 0.0 and self.rng_link.random() < self.ploss:
            self.stats.drop_random += 1
        else:
            self.transit += 1
            kind = K_RLC_ARRIVE if self.wl is not None else K_RX
            self._push(t + self.prop, kind, pkt)
        if self.bn_q:
            self._push(t + self.st, K_BN_DONE, None)
        else:
            self.bn_busy = False

    def _on_rlc_arrive(self, t, pkt):
        self.transit -= 1
        self.rlc_arr.append(t)
        if self.rlc_held >= self.rcap:
            self.stats.drop_rlc_cap += 1
            return
        self.rq.append((pkt, t, self.rlc_held))
        self.rlc_held += 1
        if self.rlc_held > self.stats.rlc_queue_max:
            self.stats.rlc_queue_max = self.rlc_held
        if not self.rlc_busy:
            self.rlc_busy = True
            self.rlc_att = 1
            self._push(t + self.air, K_RLC_DONE, None)

    def _on_rlc_done(self, t):
        pkt, enq_t, buf_seen = self.rq[0]
        if self.rng_rlc.random() < self.errp:
            if self.rlc_att >= self.max_att:
                self.rq.popleft()
                self.rlc_held -= 1
                self.stats.drop_rlc_err += 1
            else:
                self.rlc_att += 1
                self._push(t + self.air, K_RLC_DONE, None)
                return
        else:
            self.rq.popleft()
            self.rlc_held -= 1
            self._deliver(t, pkt, buf_seen, t - enq_t)
        if self.rq:
            self.rlc_att = 1
            self._push(t + self.air, K_RLC_DONE, None)
        else:
            self.rlc_busy = False

    # ---------------- receiver ----------------

    def _deliver(self, t, pkt, buf=None, pdcp=None):
        idx, tx_t, ack_at, gt, retx, known, ktime = pkt
        if idx >= self.r_hi:
            self.recv.extend(bytes(idx + 1 - len(self.recv)))
            holes = self.holes
            for j in range(self.r_hi, idx):
                holes.append(j)
            self.r_hi = idx + 1
        elif not self.recv[idx]:
            self.holes.pop(bisect_left(self.holes, idx))
        self.recv[idx] = 1
        recv = self.recv
        cum = self.r_cum
        hi = self.r_hi
        while cum < hi and recv[cum]:
            cum += 1
        self.r_cum = cum
        self.rx_l.append(t)
        self.tx_l.append(tx_t)
        self.seq_l.append(hi * self.mtu)
        self.ack_l.append(ack_at)
        self.gt_l.append(gt)
        if buf is not None:
            self.buf_l.append(buf)
            self.pdcp_l.append(pdcp)
        self.stats.delivered += 1
        holes = self.holes
        self._push(
            t + self.prop, K_ACK,
            (cum, hi, len(holes), tuple(holes[:ACK_HOLE_LIMIT]), tx_t, retx, known, ktime),
        )

    # ---------------- main loop ----------------

    def run(self) -> FlowTrace:
        self._try_send(0.0)
        heap = self.heap
        duration = self.duration
        wl = self.wl is not None
        pop = heapq.heappop
        finished = False
        while heap:
            t, kind, _, arg = pop(heap)
            if t > duration:
                finished = True
                break
            if kind == K_BN_DONE:
                self._on_bn_done(t)
            elif kind == K_RX:
                self.transit -= 1
                self._deliver(t, arg)
            elif kind == K_ACK:
                self._on_ack(t, arg)
            elif kind == K_RLC_DONE:
                self._on_rlc_done(t)
            elif kind == K_RLC_ARRIVE:
                self._on_rlc_arrive(t, arg)
            elif kind == K_PACE:
                self.pace_pending = False
                self._try_send(t)
            else:
                self._on_rto(t)
        if not finished:
            raise SimulationStall(
                f"event queue drained at t<{duration}s for {self.algo.label} seed {self.seed}"
            )

        stats = self.stats
        stats.in_flight_end = len(self.bn_q) + self.rlc_held + self.transit
        stats.cwnd_times = np.asarray(self.cw_t)
        stats.cwnd_values = np.asarray(self.cw_v)
        stats.inflight_true = np.asarray(self.gt_l, dtype=np.int64)
        stats.rlc_arrivals = np.asarray(self.rlc_arr)
        trace = FlowTrace(
            rx_time=np.asarray(self.rx_l),
            tx_time=np.asarray(self.tx_l),
            size=np.full(len(self.rx_l), self.mtu, dtype=np.int64),
            seq_end=np.asarray(self.seq_l, dtype=np.int64),
            ack_sent=np.asarray(self.ack_l, dtype=np.int64),
            rlc_buffer=np.asarray(self.buf_l, dtype=np.int64) if wl else None,
            pdcp_delay=np.asarray(self.pdcp_l) if wl else None,
            label=self.algo,
            link=self.link,
            wireless=self.wl,
            seed=self.seed,
            duration=self.duration,
            stats=stats,
        )
        trace.validate()
        return trace


class RadioResult(NamedTuple):
    """Outcome of one packet offered to the radio stage.

    depart_time is when the stage resolved the packet: delivery time on
    success, the moment the last attempt failed for ARQ drops, the arrival
    instant for capacity drops. pdcp_delay and rlc_buffer are None for
    packets that never occupied the queue.
    """

    depart_time: float
    pdcp_delay: Optional[float]
    rlc_buffer: Optional[int]
    dropped: bool
    attempts: int


def wireless_stage(
    arrival_times,
    wl: WirelessConfig,
    seed: int | None = None,
    rng: Generator | None = None,
) -> list[RadioResult]:
    """Run the radio queue in isolation over a fixed arrival sequence.

    Single-server FIFO of wl.rlc_cap packets; each attempt takes wl.air_delay
    and fails with wl.err_prob, up to wl.max_retx retransmissions before the
    packet is dropped. Mirrors the in-engine radio stage draw for draw, so a
    replay with the engine's arrival log and radio RNG stream reproduces its
    per-packet outcomes.
    """
    wl.validate()
    if rng is None:
        rng = Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(1,))))
    max_att = wl.max_retx + 1
    dep = deque()          # service-completion times of packets still occupying the queue
    free_t = 0.0
    out: list[RadioResult] = []
    prev = -np.inf
    for t in arrival_times:
        t = float(t)
        if t < prev:
            raise ValueError("arrival_times must be non-decreasing")
        prev = t
        while dep and dep[0] <= t:
            dep.popleft()
        occupancy = len(dep)
        if occupancy >= wl.rlc_cap:
            out.append(RadioResult(t, None, None, True, 0))
            continue
        # accumulate the completion time attempt by attempt, exactly like the
        # event-driven engine, so tie-breaking against arrivals is bit-identical
        attempts = 0
        ok = False
        done = t if t > free_t else free_t
        while attempts < max_att:
            attempts += 1
            done += wl.air_delay
            if not rng.random() < wl.err_prob:
                ok = True
                break
        free_t = done
        dep.append(done)
        if ok:
            out.append(RadioResult(done, done - t, occupancy, False, attempts))
        else:
            out.append(RadioResult(done, None, occupancy, True, attempts))
    return out
