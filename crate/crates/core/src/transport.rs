//! End-to-end TCP: sender-side congestion control (Reno and CUBIC variants),
//! NewReno loss recovery with fast retransmit and partial ACKs, a standard
//! retransmission timer, and receiver-side cumulative ACK generation with
//! timestamp echoes.
//!
//! The sender releases data while `in_flight < min(cwnd, rwnd)`; the
//! advertised window in every ACK comes from whatever controller the caller
//! attaches at the receiver. Timestamps flow both ways: data segments carry
//! the sender clock (`ts_val`) and echo the receiver clock (`ts_ecr`), so
//! both ends can measure RTT without extra machinery.

use std::collections::BTreeMap;

use crate::time::{SimDuration, SimTime};

pub const DEFAULT_MSS: u64 = 1400;
pub const INITIAL_CWND_SEGMENTS: u64 = 10;
pub const MIN_RTO: SimDuration = SimDuration::from_millis(200);
pub const MAX_RTO: SimDuration = SimDuration::from_secs(60);
pub const INITIAL_RTO: SimDuration = SimDuration::from_secs(1);
/// Timer granularity used in the RTO computation.
const RTO_GRANULARITY_SECS: f64 = 0.001;

pub const CUBIC_C: f64 = 0.4;
pub const CUBIC_BETA: f64 = 0.7;

pub type FlowId = u32;

/// A data segment in flight from sender to receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub flow: FlowId,
    /// Byte sequence number of the first byte carried.
    pub seq: u64,
    pub len: u64,
    /// Sender clock at transmission; echoed back in ACKs.
    pub ts_val: SimTime,
    /// Echo of the most recent receiver clock seen, enabling receiver-side
    /// RTT measurement.
    pub ts_ecr: Option<SimTime>,
}

/// A cumulative acknowledgment flowing back to the sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ack {
    pub flow: FlowId,
    /// Next byte expected (highest in-order byte + 1).
    pub ack: u64,
    /// Receiver clock at ACK emission.
    pub ts_val: SimTime,
    /// Echo of the acknowledged segment's `ts_val`.
    pub ts_ecr: SimTime,
    /// Receive window granted to the sender, in bytes.
    pub advertised: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcAlgorithm {
    Reno,
    Cubic,
}

/// What the caller should do with the flow's retransmission timer after
/// feeding an event to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerCmd {
    /// Leave any pending timer running.
    Keep,
    /// Cancel any pending timer and arm a fresh one at `now + rto()`.
    Restart,
    /// Cancel any pending timer; nothing is outstanding.
    Cancel,
}

#[derive(Debug)]
pub struct SenderOutput {
    pub segments: Vec<Segment>,
    pub timer: TimerCmd,
}

#[derive(Debug, Clone, Copy)]
struct CubicState {
    /// Window size (bytes) just before the last reduction.
    w_max: f64,
    epoch_start: Option<SimTime>,
    /// Time to the curve's origin point, seconds.
    k: f64,
}

impl CubicState {
    fn new() -> Self {
        CubicState { w_max: 0.0, epoch_start: None, k: 0.0 }
    }
}

/// Sender half of one TCP flow.
pub struct TcpSender {
    flow: FlowId,
    mss: u64,
    algo: CcAlgorithm,
    cwnd: f64,
    ssthresh: f64,
    snd_una: u64,
    snd_nxt: u64,
    /// Total bytes the application will ever send; `None` means an
    /// FTP-like unbounded source.
    app_limit: Option<u64>,
    rwnd: u64,
    dupacks: u32,
    /// `Some(recover)` while in NewReno fast recovery.
    fast_recovery: Option<u64>,
    srtt: Option<f64>,
    rttvar: f64,
    rto: SimDuration,
    rto_backoff: u32,
    latest_rx_tsval: Option<SimTime>,
    cubic: CubicState,
    retransmissions: u64,
    loss_events: u64,
    last_rtt_sample: Option<SimDuration>,
}

impl TcpSender {
    pub fn new(
        flow: FlowId,
        mss: u64,
        algo: CcAlgorithm,
        initial_cwnd: u64,
        initial_ssthresh: Option<u64>,
        app_limit: Option<u64>,
        initial_rwnd: u64,
    ) -> Self {
        TcpSender {
            flow,
            mss,
            algo,
            cwnd: initial_cwnd as f64,
            ssthresh: initial_ssthresh.map_or(f64::INFINITY, |s| s as f64),
            snd_una: 0,
            snd_nxt: 0,
            app_limit,
            rwnd: initial_rwnd,
            dupacks: 0,
            fast_recovery: None,
            srtt: None,
            rttvar: 0.0,
            rto: INITIAL_RTO,
            rto_backoff: 1,
            latest_rx_tsval: None,
            cubic: CubicState::new(),
            retransmissions: 0,
            loss_events: 0,
            last_rtt_sample: None,
        }
    }

    pub fn cwnd_bytes(&self) -> u64 {
        self.cwnd as u64
    }

    pub fn ssthresh_bytes(&self) -> u64 {
        if self.ssthresh.is_finite() { self.ssthresh as u64 } else { u64::MAX }
    }

    pub fn rwnd(&self) -> u64 {
        self.rwnd
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn srtt(&self) -> Option<SimDuration> {
        self.srtt.map(SimDuration::from_secs_f64)
    }

    pub fn last_rtt_sample(&self) -> Option<SimDuration> {
        self.last_rtt_sample
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }

    pub fn loss_events(&self) -> u64 {
        self.loss_events
    }

    pub fn in_fast_recovery(&self) -> bool {
        self.fast_recovery.is_some()
    }

    /// All application data sent and acknowledged.
    pub fn done(&self) -> bool {
        self.app_limit.is_some_and(|limit| self.snd_una >= limit)
    }

    /// Current retransmission timeout, exponential backoff applied.
    pub fn rto(&self) -> SimDuration {
        let backed_off = self.rto * self.rto_backoff as u64;
        backed_off.min(MAX_RTO)
    }

    fn gate(&self) -> u64 {
        (self.cwnd as u64).min(self.rwnd)
    }

    fn next_len(&self, seq: u64) -> u64 {
        match self.app_limit {
            Some(limit) if seq >= limit => 0,
            Some(limit) => self.mss.min(limit - seq),
            None => self.mss,
        }
    }

    fn make_segment(&self, seq: u64, len: u64, now: SimTime) -> Segment {
        Segment { flow: self.flow, seq, len, ts_val: now, ts_ecr: self.latest_rx_tsval }
    }

    /// Emits new segments while the window has room; each carries the
    /// current clock as its timestamp.
    fn maybe_send(&mut self, now: SimTime, out: &mut Vec<Segment>) {
        let gate = self.gate();
        while self.in_flight() < gate {
            let len = self.next_len(self.snd_nxt);
            if len == 0 {
                break;
            }
            out.push(self.make_segment(self.snd_nxt, len, now));
            self.snd_nxt += len;
            debug_assert!(self.in_flight() <= gate + self.mss);
        }
    }

    /// Opens the flow: releases the initial window.
    pub fn start(&mut self, now: SimTime) -> SenderOutput {
        let mut segments = Vec::new();
        self.maybe_send(now, &mut segments);
        let timer = if self.in_flight() > 0 { TimerCmd::Restart } else { TimerCmd::Cancel };
        SenderOutput { segments, timer }
    }

    fn retransmit_head(&mut self, now: SimTime, out: &mut Vec<Segment>) {
        let len = self.next_len(self.snd_una).min(self.in_flight()).max(1).min(self.mss);
        out.push(self.make_segment(self.snd_una, len, now));
        self.retransmissions += 1;
    }

    fn update_rtt(&mut self, sample: SimDuration) {
        self.last_rtt_sample = Some(sample);
        let r = sample.as_secs_f64();
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - r).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * r);
            }
        }
        let rto = self.srtt.unwrap() + (4.0 * self.rttvar).max(RTO_GRANULARITY_SECS);
        self.rto = SimDuration::from_secs_f64(rto).clamp(MIN_RTO, MAX_RTO);
        self.rto_backoff = 1;
    }

    fn reduce_on_loss(&mut self) {
        self.loss_events += 1;
        let floor = (2 * self.mss) as f64;
        match self.algo {
            CcAlgorithm::Reno => {
                self.ssthresh = (self.cwnd / 2.0).max(floor);
            }
            CcAlgorithm::Cubic => {
                self.cubic.w_max = self.cwnd;
                self.cubic.epoch_start = None;
                self.ssthresh = (self.cwnd * CUBIC_BETA).max(floor);
            }
        }
    }

    fn grow_cwnd(&mut self, acked: u64, prior_in_flight: u64, now: SimTime) {
        // Grow only if the congestion window was actually the limiting
        // factor; an rwnd- or application-limited sender must not bank
        // window it never used.
        if (prior_in_flight + self.mss) < self.cwnd as u64 {
            return;
        }
        if self.cwnd < self.ssthresh {
            // Slow start: one MSS per full MSS acknowledged.
            self.cwnd += acked.min(self.mss) as f64;
            return;
        }
        match self.algo {
            CcAlgorithm::Reno => {
                // About one MSS per RTT.
                self.cwnd += (self.mss as f64) * (self.mss as f64) / self.cwnd;
            }
            CcAlgorithm::Cubic => self.cubic_grow(now),
        }
    }

    fn cubic_grow(&mut self, now: SimTime) {
        let mss = self.mss as f64;
        if self.cubic.epoch_start.is_none() {
            self.cubic.epoch_start = Some(now);
            if self.cubic.w_max < self.cwnd {
                self.cubic.w_max = self.cwnd;
                self.cubic.k = 0.0;
            } else {
                let w_max_mss = self.cubic.w_max / mss;
                self.cubic.k = (w_max_mss * (1.0 - CUBIC_BETA) / CUBIC_C).cbrt();
            }
        }
        let t = (now - self.cubic.epoch_start.unwrap()).as_secs_f64();
        let rtt = self.srtt.unwrap_or(0.1);
        let w_max_mss = self.cubic.w_max / mss;
        let w_cubic = self.cubic_window_mss(t);
        // TCP-friendly region: never slower than an AIMD flow with the same
        // backoff factor.
        let w_est = w_max_mss * CUBIC_BETA
            + 3.0 * (1.0 - CUBIC_BETA) / (1.0 + CUBIC_BETA) * (t / rtt);
        let target = w_cubic.max(w_est);
        let cwnd_mss = self.cwnd / mss;
        if target > cwnd_mss {
            self.cwnd += mss * (target - cwnd_mss) / cwnd_mss;
        }
    }

    /// The cubic window function in MSS units at `t` seconds past the epoch.
    pub fn cubic_window_mss(&self, t: f64) -> f64 {
        let d = t - self.cubic.k;
        CUBIC_C * d * d * d + self.cubic.w_max / self.mss as f64
    }

    /// Time to the curve origin for the current epoch, seconds.
    pub fn cubic_k(&self) -> f64 {
        self.cubic.k
    }

    /// Processes one cumulative ACK: window update, RTT sampling, NewReno
    /// dupack/partial-ack handling, congestion-window growth, and any sends
    /// the updated window permits.
    pub fn on_ack(&mut self, ack: &Ack, now: SimTime) -> SenderOutput {
        let mut segments = Vec::new();
        self.latest_rx_tsval = Some(ack.ts_val);
        self.rwnd = ack.advertised;
        let sample = now.saturating_sub(ack.ts_ecr);
        if !sample.is_zero() {
            self.update_rtt(sample);
        }

        let mut progressed = false;
        if ack.ack > self.snd_una {
            let acked = ack.ack - self.snd_una;
            let prior_in_flight = self.in_flight();
            self.snd_una = ack.ack;
            progressed = true;
            match self.fast_recovery {
                Some(recover) if ack.ack >= recover => {
                    // Full ACK: recovery complete, deflate to ssthresh.
                    self.cwnd = self.ssthresh.max(self.mss as f64);
                    self.fast_recovery = None;
                    self.dupacks = 0;
                }
                Some(_) => {
                    // Partial ACK: the next hole is lost too. Retransmit it,
                    // deflate by the amount acknowledged, add back one MSS.
                    self.retransmit_head(now, &mut segments);
                    self.cwnd = (self.cwnd - acked as f64 + self.mss as f64)
                        .max(self.mss as f64);
                }
                None => {
                    self.dupacks = 0;
                    self.grow_cwnd(acked, prior_in_flight, now);
                }
            }
        } else if self.in_flight() > 0 && ack.ack == self.snd_una {
            self.dupacks += 1;
            if self.fast_recovery.is_some() {
                // Each further dupack signals a departure; inflate.
                self.cwnd += self.mss as f64;
            } else if self.dupacks == 3 {
                self.reduce_on_loss();
                self.fast_recovery = Some(self.snd_nxt);
                self.cwnd = self.ssthresh + 3.0 * self.mss as f64;
                self.retransmit_head(now, &mut segments);
                progressed = true;
            }
        }

        let retransmitted = !segments.is_empty();
        self.maybe_send(now, &mut segments);
        let timer = if self.in_flight() == 0 {
            TimerCmd::Cancel
        } else if progressed || retransmitted {
            TimerCmd::Restart
        } else {
            TimerCmd::Keep
        };
        SenderOutput { segments, timer }
    }

    /// Retransmission timer expiry: collapse to one segment and slow-start.
    pub fn on_rto(&mut self, now: SimTime) -> SenderOutput {
        let mut segments = Vec::new();
        if self.in_flight() == 0 {
            return SenderOutput { segments, timer: TimerCmd::Cancel };
        }
        self.reduce_on_loss();
        self.cwnd = self.mss as f64;
        self.fast_recovery = None;
        self.dupacks = 0;
        self.rto_backoff = (self.rto_backoff * 2).min(64);
        self.retransmit_head(now, &mut segments);
        SenderOutput { segments, timer: TimerCmd::Restart }
    }
}

/// Receiver half of one TCP flow: cumulative ACKs, out-of-order buffering,
/// immediate ACK per segment (delayed ACK disabled).
pub struct Receiver {
    flow: FlowId,
    rcv_next: u64,
    ooo: BTreeMap<u64, u64>,
}

impl Receiver {
    pub fn new(flow: FlowId) -> Self {
        Receiver { flow, rcv_next: 0, ooo: BTreeMap::new() }
    }

    /// In-order bytes delivered so far.
    pub fn delivered(&self) -> u64 {
        self.rcv_next
    }

    /// Receiver-side RTT measurement: the arriving segment echoes our clock.
    pub fn rtt_sample(seg: &Segment, now: SimTime) -> Option<SimDuration> {
        seg.ts_ecr.map(|ecr| now.saturating_sub(ecr))
    }

    /// Accepts one segment and returns the immediate ACK carrying the given
    /// advertised window. Out-of-order segments produce duplicate ACKs.
    pub fn on_segment(&mut self, seg: &Segment, now: SimTime, advertised: u64) -> Ack {
        if seg.seq <= self.rcv_next {
            self.rcv_next = self.rcv_next.max(seg.seq + seg.len);
            while let Some((&s, &l)) = self.ooo.first_key_value() {
                if s > self.rcv_next {
                    break;
                }
                self.ooo.pop_first();
                self.rcv_next = self.rcv_next.max(s + l);
            }
        } else {
            let entry = self.ooo.entry(seg.seq).or_insert(0);
            *entry = (*entry).max(seg.len);
        }
        Ack {
            flow: self.flow,
            ack: self.rcv_next,
            ts_val: now,
            ts_ecr: seg.ts_val,
            advertised,
        }
    }
}
