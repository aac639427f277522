//! Receiver-side advertised-window controllers.
//!
//! Three policies share one state machine:
//!
//! * `Static` always advertises a configured constant.
//! * `Abrwda` advertises the full link bandwidth times the minimum observed
//!   RTT, unconditionally.
//! * `Drw` picks its reference bandwidth by where the smoothed RTT sits: the
//!   full link bandwidth while inside the low-latency region
//!   `[rtt_min, rtt_min + delta]`, otherwise the bandwidth actually granted
//!   to this UE, estimated from transport-block sizes in recent scheduling
//!   grants. The advertisement is reference bandwidth x rtt_min, in bytes.
//!
//! RTT is measured at the receiver from timestamp echoes; the running
//! minimum stands in for the empty-buffer path RTT since the core-network
//! latency is stable.

use std::collections::VecDeque;

use crate::mac::DciGrant;
use crate::time::{SimDuration, SimTime};

pub const DEFAULT_DELTA: SimDuration = SimDuration::from_millis(10);
pub const DEFAULT_GRANT_WINDOW: SimDuration = SimDuration::from_millis(100);
/// Region test uses the median of this many recent samples so one stray
/// measurement cannot flap the reference bandwidth.
pub const DEFAULT_RTT_MEDIAN_SAMPLES: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RwndError {
    #[error("RTT sample must be positive")]
    NonPositiveSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwndPolicy {
    Static,
    Abrwda,
    Drw,
}

/// One receiver-side RTT measurement (timestamp-echo method).
#[derive(Debug, Clone, Copy)]
pub struct RttSample {
    pub value: SimDuration,
    pub taken_at: SimTime,
}

#[derive(Debug, Clone)]
pub struct RwndConfig {
    pub policy: RwndPolicy,
    /// Nominal full data bandwidth of this UE's link, bits/s.
    pub bw_total: u64,
    /// Width of the low-latency region above rtt_min.
    pub delta: SimDuration,
    /// Sliding window for the allocated-bandwidth estimate.
    pub grant_window: SimDuration,
    /// Advertisement for the Static policy and the fallback before any RTT
    /// sample exists.
    pub static_window: u64,
    pub mss: u64,
    /// Receive buffer cap; advertisements never exceed it.
    pub buffer_cap: u64,
    pub median_samples: usize,
}

/// Window controller attached 1:1 to a receiver.
pub struct RwndController {
    cfg: RwndConfig,
    rtt_min: Option<SimDuration>,
    last_rtt: Option<SimDuration>,
    recent: VecDeque<SimDuration>,
    grants: VecDeque<(SimTime, u64)>,
    grant_bits: u64,
}

/// Bandwidth-delay product in bytes: bits/s x seconds / 8, exact in integers.
pub fn bdp_bytes(bw_bps: u64, rtt: SimDuration) -> u64 {
    (bw_bps as u128 * rtt.as_nanos() as u128 / 8_000_000_000u128) as u64
}

impl RwndController {
    pub fn new(cfg: RwndConfig) -> Self {
        RwndController {
            cfg,
            rtt_min: None,
            last_rtt: None,
            recent: VecDeque::new(),
            grants: VecDeque::new(),
            grant_bits: 0,
        }
    }

    pub fn policy(&self) -> RwndPolicy {
        self.cfg.policy
    }

    pub fn rtt_min(&self) -> Option<SimDuration> {
        self.rtt_min
    }

    pub fn last_rtt(&self) -> Option<SimDuration> {
        self.last_rtt
    }

    pub fn bw_total(&self) -> u64 {
        self.cfg.bw_total
    }

    /// Records a receiver-side RTT sample; the running minimum only ever
    /// tightens.
    pub fn update_rtt_min(&mut self, sample: RttSample) -> Result<(), RwndError> {
        if sample.value.is_zero() {
            return Err(RwndError::NonPositiveSample);
        }
        self.last_rtt = Some(sample.value);
        self.rtt_min = Some(match self.rtt_min {
            None => sample.value,
            Some(m) => m.min(sample.value),
        });
        self.recent.push_back(sample.value);
        while self.recent.len() > self.cfg.median_samples.max(1) {
            self.recent.pop_front();
        }
        Ok(())
    }

    /// Records one scheduling grant addressed to this UE.
    pub fn observe_grant(&mut self, grant: &DciGrant) {
        self.grants.push_back((grant.slot_start, grant.tb_bits));
        self.grant_bits += grant.tb_bits;
        self.evict(grant.slot_start);
    }

    // Window is inclusive at both ends: a slot-cadence grant stream sums to
    // exactly rate x window.
    fn evict(&mut self, now: SimTime) {
        while let Some(&(t, bits)) = self.grants.front() {
            if t + self.cfg.grant_window < now {
                self.grants.pop_front();
                self.grant_bits -= bits;
            } else {
                break;
            }
        }
    }

    /// Allocated-bandwidth estimate over the grant window ending at `now`,
    /// clamped to the total link bandwidth.
    pub fn bw_alloc(&mut self, now: SimTime) -> u64 {
        self.evict(now);
        let est =
            (self.grant_bits as u128 * 1_000_000_000 / self.cfg.grant_window.as_nanos() as u128)
                as u64;
        est.min(self.cfg.bw_total)
    }

    /// Median of the recent samples (lower median for even counts).
    fn smoothed_rtt(&self) -> Option<SimDuration> {
        if self.recent.is_empty() {
            return None;
        }
        let mut v: Vec<SimDuration> = self.recent.iter().copied().collect();
        v.sort_unstable();
        Some(v[(v.len() - 1) / 2])
    }

    /// Whether the smoothed RTT sits inside `[rtt_min, rtt_min + delta]`.
    pub fn in_low_latency_region(&self) -> bool {
        match (self.rtt_min, self.smoothed_rtt()) {
            (Some(m), Some(r)) => r <= m + self.cfg.delta,
            _ => true,
        }
    }

    /// Advertised window, in bytes, for the next outgoing ACK. Pure function
    /// of the controller state and `now` (eviction of aged grants aside).
    pub fn compute_rw(&mut self, now: SimTime) -> u64 {
        let adv = match (self.cfg.policy, self.rtt_min) {
            (RwndPolicy::Static, _) | (_, None) => self.cfg.static_window,
            (RwndPolicy::Abrwda, Some(rtt_min)) => bdp_bytes(self.cfg.bw_total, rtt_min),
            (RwndPolicy::Drw, Some(rtt_min)) => {
                let b_ref = if self.in_low_latency_region() {
                    self.cfg.bw_total
                } else {
                    self.bw_alloc(now)
                };
                bdp_bytes(b_ref, rtt_min)
            }
        };
        adv.clamp(self.cfg.mss, self.cfg.buffer_cap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(policy: RwndPolicy, bw_total: u64) -> RwndConfig {
        RwndConfig {
            policy,
            bw_total,
            delta: DEFAULT_DELTA,
            grant_window: DEFAULT_GRANT_WINDOW,
            static_window: 30_000_000,
            mss: 1400,
            buffer_cap: 64_000_000,
            median_samples: DEFAULT_RTT_MEDIAN_SAMPLES,
        }
    }

    fn sample(ms: u64, at: SimTime) -> RttSample {
        RttSample { value: SimDuration::from_millis(ms), taken_at: at }
    }

    fn grant(t: SimTime, bits: u64) -> DciGrant {
        DciGrant { ue: 0, slot_start: t, tb_bits: bits }
    }

    #[test]
    fn rtt_min_is_running_minimum() {
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        c.update_rtt_min(sample(45, SimTime::ZERO)).unwrap();
        assert_eq!(c.rtt_min(), Some(SimDuration::from_millis(45)));
        for (i, ms) in [42, 40, 41].iter().enumerate() {
            c.update_rtt_min(sample(*ms, SimTime::from_millis(i as u64))).unwrap();
        }
        assert_eq!(c.rtt_min(), Some(SimDuration::from_millis(40)));
        assert_eq!(c.last_rtt(), Some(SimDuration::from_millis(41)));
    }

    #[test]
    fn non_positive_sample_rejected() {
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        let err = c.update_rtt_min(RttSample { value: SimDuration::ZERO, taken_at: SimTime::ZERO });
        assert_eq!(err, Err(RwndError::NonPositiveSample));
        assert_eq!(c.rtt_min(), None);
    }

    #[test]
    fn bw_alloc_is_grant_sum_over_window() {
        // Ten 100,000-bit grants inside a 1 ms window estimate 1 Gbps.
        let mut config = cfg(RwndPolicy::Drw, 3_000_000_000);
        config.grant_window = SimDuration::from_millis(1);
        let mut c = RwndController::new(config);
        for i in 0..10u64 {
            c.observe_grant(&grant(SimTime::from_nanos(i * 100_000), 100_000));
        }
        let now = SimTime::from_nanos(999_999);
        assert_eq!(c.bw_alloc(now), 1_000_000_000);
    }

    #[test]
    fn empty_grant_window_floors_at_one_mss() {
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        c.update_rtt_min(sample(40, SimTime::ZERO)).unwrap();
        // Force the region test out of the low-latency band.
        for i in 1..6 {
            c.update_rtt_min(sample(80, SimTime::from_millis(i))).unwrap();
        }
        let now = SimTime::from_secs(5);
        assert_eq!(c.bw_alloc(now), 0);
        assert_eq!(c.compute_rw(now), 1400, "clamped to one MSS");
    }

    #[test]
    fn saturated_grants_estimate_full_bandwidth() {
        // Full-link grants every 100 us: the estimate converges on bw_total.
        let cap = 3_000_000_000u64;
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, cap));
        let tb = 100_000 * cap / 1_000_000_000; // one slot's bits
        let mut t = SimTime::ZERO;
        for _ in 0..2_000 {
            c.observe_grant(&grant(t, tb));
            t += SimDuration::from_micros(100);
        }
        assert_eq!(c.bw_alloc(t), cap);
    }

    #[test]
    fn drw_in_region_is_total_bandwidth_bdp() {
        // 3 Gbps and 40 ms give exactly 15 MB.
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        c.update_rtt_min(sample(40, SimTime::ZERO)).unwrap();
        c.update_rtt_min(sample(45, SimTime::from_millis(1))).unwrap();
        assert!(c.in_low_latency_region(), "45 ms is inside [40, 50]");
        assert_eq!(c.compute_rw(SimTime::from_millis(2)), 15_000_000);
    }

    #[test]
    fn drw_out_of_region_uses_allocated_bandwidth() {
        // rtt_min 40 ms, smoothed RTT 60 ms (outside [40, 50]), 750 Mbps of
        // grants: 750e6 * 0.040 / 8 = 3.75 MB.
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        c.update_rtt_min(sample(40, SimTime::ZERO)).unwrap();
        for i in 1..6 {
            c.update_rtt_min(sample(60, SimTime::from_millis(i))).unwrap();
        }
        assert!(!c.in_low_latency_region());
        let base = SimTime::from_secs(1);
        for i in 0..750u64 {
            c.observe_grant(&grant(base + SimDuration::from_micros(i * 100), 100_000));
        }
        let now = base + SimDuration::from_micros(750 * 100);
        assert_eq!(c.bw_alloc(now), 750_000_000);
        assert_eq!(c.compute_rw(now), 3_750_000);
    }

    #[test]
    fn drw_equals_abrwda_when_allocation_saturates() {
        let cap = 2_000_000_000u64;
        let mut drw = RwndController::new(cfg(RwndPolicy::Drw, cap));
        let mut abrwda = RwndController::new(cfg(RwndPolicy::Abrwda, cap));
        let tb = 100_000 * cap / 1_000_000_000;
        let mut t = SimTime::ZERO;
        for i in 0..2_000u64 {
            drw.observe_grant(&grant(t, tb));
            if i % 400 == 0 {
                // Alternate far-out and near-min samples; the branch cannot
                // matter because bw_alloc == bw_total.
                let ms = if i % 800 == 0 { 40 } else { 90 };
                drw.update_rtt_min(sample(ms, t)).unwrap();
                abrwda.update_rtt_min(sample(ms, t)).unwrap();
            }
            t += SimDuration::from_micros(100);
        }
        assert_eq!(drw.compute_rw(t), abrwda.compute_rw(t));
    }

    #[test]
    fn static_policy_ignores_everything() {
        let mut c = RwndController::new(cfg(RwndPolicy::Static, 3_000_000_000));
        assert_eq!(c.compute_rw(SimTime::ZERO), 30_000_000);
        c.update_rtt_min(sample(40, SimTime::ZERO)).unwrap();
        c.observe_grant(&grant(SimTime::ZERO, 1_000_000));
        assert_eq!(c.compute_rw(SimTime::from_secs(1)), 30_000_000);
    }

    #[test]
    fn no_samples_falls_back_to_static_window() {
        let mut c = RwndController::new(cfg(RwndPolicy::Drw, 3_000_000_000));
        assert_eq!(c.compute_rw(SimTime::ZERO), 30_000_000);
    }

    proptest! {
        /// After clamping, a DRW advertisement always lies within
        /// [1 MSS, rtt_min x bw_total / 8], rtt_min never increases, and
        /// inside the region DRW matches ABRWDA exactly.
        #[test]
        fn drw_bounds_hold(
            rtts_ms in prop::collection::vec(1u64..500, 1..40),
            grants in prop::collection::vec(0u64..400_000, 0..200),
        ) {
            let cap = 2_000_000_000u64;
            let mut c = RwndController::new(cfg(RwndPolicy::Drw, cap));
            let mut a = RwndController::new(cfg(RwndPolicy::Abrwda, cap));
            let mut t = SimTime::ZERO;
            let mut prev_min = None;
            for (i, ms) in rtts_ms.iter().enumerate() {
                c.update_rtt_min(sample(*ms, t)).unwrap();
                a.update_rtt_min(sample(*ms, t)).unwrap();
                if let Some(bits) = grants.get(i) {
                    c.observe_grant(&grant(t, *bits));
                }
                t += SimDuration::from_millis(7);
                let rtt_min = c.rtt_min().unwrap();
                if let Some(prev) = prev_min {
                    prop_assert!(rtt_min <= prev);
                }
                prev_min = Some(rtt_min);
                let adv = c.compute_rw(t);
                let upper = bdp_bytes(cap, rtt_min).clamp(1400, 64_000_000);
                prop_assert!(adv >= 1400);
                prop_assert!(adv <= upper);
                if c.in_low_latency_region() {
                    prop_assert_eq!(adv, a.compute_rw(t));
                }
            }
        }
    }
}
