//! Per-UE time-varying link capacity built from parametric blockage events.
//!
//! Attenuation ramps linearly in dB across `ramp_down`/`ramp_up` and sits at
//! `depth_db` during `hold`, which gives the two qualitative shapes of
//! interest: a slow shallow fade (a person walking through the beam) and a
//! sharp deep transition held for seconds (a building edge). Capacity maps
//! from attenuation as `base * 10^(-A/10)` and never drops below a 1 Mbps
//! floor so service-time arithmetic stays finite.

use crate::time::{SimDuration, SimTime};

/// Capacity never reaches zero: link-layer retransmissions eventually get
/// packets through even in a deep fade.
pub const CAPACITY_FLOOR_BPS: u64 = 1_000_000;

/// Default human-blockage shape: slow fade, short hold, 25 dB deep.
pub const HUMAN_RAMP_DOWN: SimDuration = SimDuration::from_millis(200);
pub const HUMAN_HOLD: SimDuration = SimDuration::from_millis(300);
pub const HUMAN_RAMP_UP: SimDuration = SimDuration::from_millis(200);
pub const HUMAN_DEPTH_DB: f64 = 25.0;

/// Default edge sharpness for a LoS->NLoS transition.
pub const BUILDING_RAMP: SimDuration = SimDuration::from_millis(50);

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("blockage events overlap at {at}")]
    Overlap { at: SimTime },
    #[error("blockage duration must be positive")]
    EmptyDuration,
    #[error("capacities must satisfy base_los > base_nlos > 0")]
    BadCapacities,
    #[error("base capacity must be positive")]
    ZeroBase,
}

/// One attenuation episode: ramp down, hold at `depth_db`, ramp back up.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockageEvent {
    pub start: SimTime,
    pub ramp_down: SimDuration,
    pub hold: SimDuration,
    pub ramp_up: SimDuration,
    pub depth_db: f64,
}

impl BlockageEvent {
    pub fn end(&self) -> SimTime {
        self.start + self.ramp_down + self.hold + self.ramp_up
    }

    /// Attenuation in dB at time `t`, zero outside the event.
    fn attenuation_db(&self, t: SimTime) -> f64 {
        if t < self.start || t >= self.end() {
            return 0.0;
        }
        let into = t - self.start;
        if into < self.ramp_down {
            return self.depth_db * into.as_nanos() as f64 / self.ramp_down.as_nanos() as f64;
        }
        let after_down = into.saturating_sub(self.ramp_down);
        if after_down < self.hold {
            return self.depth_db;
        }
        let into_up = after_down.saturating_sub(self.hold);
        self.depth_db * (1.0 - into_up.as_nanos() as f64 / self.ramp_up.as_nanos() as f64)
    }

    /// Whether `t` falls in the fully-attenuated hold section.
    fn in_hold(&self, t: SimTime) -> bool {
        let hold_start = self.start + self.ramp_down;
        t >= hold_start && t < hold_start + self.hold
    }
}

/// Deterministic capacity-vs-time profile for one UE's radio link.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityTrace {
    base_capacity: u64,
    /// Exact capacity during the hold of a LoS->NLoS event; when set, holds
    /// return this value instead of the dB-derived one so configured NLoS
    /// levels are reproduced without round-trip error.
    nlos_capacity: Option<u64>,
    events: Vec<BlockageEvent>,
}

impl CapacityTrace {
    /// Constant, never-blocked link.
    pub fn constant(base: u64) -> Self {
        CapacityTrace { base_capacity: base, nlos_capacity: None, events: Vec::new() }
    }

    pub fn with_events(base: u64, mut events: Vec<BlockageEvent>) -> Result<Self, TraceError> {
        if base == 0 {
            return Err(TraceError::ZeroBase);
        }
        events.sort_by_key(|e| e.start);
        for pair in events.windows(2) {
            if pair[1].start < pair[0].end() {
                return Err(TraceError::Overlap { at: pair[1].start });
            }
        }
        Ok(CapacityTrace { base_capacity: base, nlos_capacity: None, events })
    }

    /// Trace with one shallow fade per start time, shaped like a person
    /// crossing the beam.
    pub fn human_blockage(base: u64, starts: &[SimTime]) -> Result<Self, TraceError> {
        Self::human_blockage_shaped(
            base,
            starts,
            HUMAN_RAMP_DOWN,
            HUMAN_HOLD,
            HUMAN_RAMP_UP,
            HUMAN_DEPTH_DB,
        )
    }

    pub fn human_blockage_shaped(
        base: u64,
        starts: &[SimTime],
        ramp_down: SimDuration,
        hold: SimDuration,
        ramp_up: SimDuration,
        depth_db: f64,
    ) -> Result<Self, TraceError> {
        let events = starts
            .iter()
            .map(|&start| BlockageEvent { start, ramp_down, hold, ramp_up, depth_db })
            .collect();
        Self::with_events(base, events)
    }

    /// LoS link that drops sharply to `base_nlos` for `duration`, then
    /// recovers to `base_los`.
    pub fn building_blockage(
        base_los: u64,
        base_nlos: u64,
        start: SimTime,
        duration: SimDuration,
        ramp: SimDuration,
    ) -> Result<Self, TraceError> {
        if duration.is_zero() {
            return Err(TraceError::EmptyDuration);
        }
        if base_nlos == 0 || base_los <= base_nlos {
            return Err(TraceError::BadCapacities);
        }
        let depth_db = 10.0 * (base_los as f64 / base_nlos as f64).log10();
        let mut trace = Self::with_events(
            base_los,
            vec![BlockageEvent { start, ramp_down: ramp, hold: duration, ramp_up: ramp, depth_db }],
        )?;
        trace.nlos_capacity = Some(base_nlos);
        Ok(trace)
    }

    pub fn base_capacity(&self) -> u64 {
        self.base_capacity
    }

    pub fn events(&self) -> &[BlockageEvent] {
        &self.events
    }

    /// Capacity in bits/s at time `t`. Pure function of the trace.
    pub fn capacity_at(&self, t: SimTime) -> u64 {
        for ev in &self.events {
            if t >= ev.start && t < ev.end() {
                if ev.in_hold(t) {
                    if let Some(nlos) = self.nlos_capacity {
                        return nlos.max(CAPACITY_FLOOR_BPS);
                    }
                }
                let atten = ev.attenuation_db(t);
                let cap = self.base_capacity as f64 * 10f64.powf(-atten / 10.0);
                return (cap as u64).clamp(CAPACITY_FLOOR_BPS, self.base_capacity);
            }
        }
        self.base_capacity
    }

    /// `(time, capacity)` breakpoints at every segment boundary; capacity is
    /// linear in dB between consecutive points inside an event.
    pub fn breakpoints(&self, t_end: SimTime) -> Vec<(SimTime, u64)> {
        let mut points = vec![(SimTime::ZERO, self.capacity_at(SimTime::ZERO))];
        for ev in &self.events {
            let marks = [
                ev.start,
                ev.start + ev.ramp_down,
                ev.start + ev.ramp_down + ev.hold,
                ev.end(),
            ];
            for m in marks {
                if m <= t_end {
                    points.push((m, self.capacity_at(m)));
                }
            }
        }
        points.push((t_end, self.capacity_at(t_end)));
        points.dedup();
        points
    }
}
