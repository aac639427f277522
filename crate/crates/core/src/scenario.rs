//! Scenario definitions: everything one run needs, serializable to and from
//! TOML, plus the builtin catalogue of experiments.

use serde::{Deserialize, Serialize};

use crate::channel::{CapacityTrace, TraceError};
use crate::time::{SimDuration, SimTime};

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: field.to_string(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    Reno,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Sender -> core pipe -> base-station queue -> scheduler -> UE.
    Radio,
    /// Sender -> fixed-delay pipe -> receiver; no queueing, no radio.
    FixedPipe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisciplineKind {
    DropTail,
    Codel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Static,
    Abrwda,
    Drw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TraceConfig {
    Constant {
        bps: u64,
    },
    /// Shallow slow fades at the given start times.
    Human {
        base_bps: u64,
        starts_s: Vec<f64>,
        #[serde(default = "defaults::human_ramp_down_s")]
        ramp_down_s: f64,
        #[serde(default = "defaults::human_hold_s")]
        hold_s: f64,
        #[serde(default = "defaults::human_ramp_up_s")]
        ramp_up_s: f64,
        #[serde(default = "defaults::human_depth_db")]
        depth_db: f64,
    },
    /// One sharp LoS -> NLoS -> LoS transition.
    Building {
        base_los_bps: u64,
        base_nlos_bps: u64,
        start_s: f64,
        duration_s: f64,
        #[serde(default = "defaults::building_ramp_s")]
        ramp_s: f64,
    },
}

impl TraceConfig {
    pub fn build(&self) -> Result<CapacityTrace, TraceError> {
        match self {
            TraceConfig::Constant { bps } => Ok(CapacityTrace::constant(*bps)),
            TraceConfig::Human { base_bps, starts_s, ramp_down_s, hold_s, ramp_up_s, depth_db } => {
                let starts: Vec<SimTime> =
                    starts_s.iter().map(|&s| SimTime::from_secs_f64(s)).collect();
                CapacityTrace::human_blockage_shaped(
                    *base_bps,
                    &starts,
                    SimDuration::from_secs_f64(*ramp_down_s),
                    SimDuration::from_secs_f64(*hold_s),
                    SimDuration::from_secs_f64(*ramp_up_s),
                    *depth_db,
                )
            }
            TraceConfig::Building { base_los_bps, base_nlos_bps, start_s, duration_s, ramp_s } => {
                CapacityTrace::building_blockage(
                    *base_los_bps,
                    *base_nlos_bps,
                    SimTime::from_secs_f64(*start_s),
                    SimDuration::from_secs_f64(*duration_s),
                    SimDuration::from_secs_f64(*ramp_s),
                )
            }
        }
    }

    /// Nominal unblocked capacity, used as the default `bw_total`.
    pub fn base_bps(&self) -> u64 {
        match self {
            TraceConfig::Constant { bps } => *bps,
            TraceConfig::Human { base_bps, .. } => *base_bps,
            TraceConfig::Building { base_los_bps, .. } => *base_los_bps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub trace: TraceConfig,
    #[serde(default = "defaults::discipline")]
    pub discipline: DisciplineKind,
    #[serde(default = "defaults::policy")]
    pub rwnd_policy: PolicyKind,
    /// Full data bandwidth the UE assumes for its link; defaults to the
    /// trace's unblocked capacity.
    #[serde(default)]
    pub bw_total_bps: Option<u64>,
    /// When the UE joins the cell; absent means attached from the start.
    #[serde(default)]
    pub attach_s: Option<f64>,
    #[serde(default)]
    pub detach_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FlowKind {
    /// FTP-like unbounded download.
    Long,
    /// Fixed-size transfer.
    Short { size_bytes: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    /// Destination UE index; absent only in the fixed-pipe topology.
    #[serde(default)]
    pub ue: Option<usize>,
    pub kind: FlowKind,
    #[serde(default)]
    pub start_s: f64,
}

/// Seed-driven generator placing short flows alongside the configured ones:
/// fixed-size transfers with exponential inter-arrival times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortFlowGen {
    pub ue: usize,
    #[serde(default = "defaults::short_mean_interarrival_s")]
    pub mean_interarrival_s: f64,
    #[serde(default = "defaults::short_size_bytes")]
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_s: f64,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::core_one_way_delay_s")]
    pub core_one_way_delay_s: f64,
    #[serde(default = "defaults::air_one_way_delay_s")]
    pub air_one_way_delay_s: f64,
    #[serde(default = "defaults::slot_duration_s")]
    pub slot_duration_s: f64,
    #[serde(default = "defaults::mss_bytes")]
    pub mss_bytes: u64,
    #[serde(default = "defaults::queue_capacity_packets")]
    pub queue_capacity_packets: usize,
    #[serde(default = "defaults::codel_target_s")]
    pub codel_target_s: f64,
    #[serde(default = "defaults::codel_interval_s")]
    pub codel_interval_s: f64,
    /// Width of the DRW low-latency region above the minimum RTT.
    #[serde(default = "defaults::delta_s")]
    pub delta_s: f64,
    #[serde(default = "defaults::grant_window_s")]
    pub grant_window_s: f64,
    #[serde(default = "defaults::rtt_median_samples")]
    pub rtt_median_samples: usize,
    /// Advertised window for the Static policy (and the fallback before the
    /// dynamic policies have an RTT sample).
    #[serde(default = "defaults::static_rwnd_bytes")]
    pub static_rwnd_bytes: u64,
    #[serde(default = "defaults::recv_buffer_cap_bytes")]
    pub recv_buffer_cap_bytes: u64,
    /// Defaults to 10 segments when absent.
    #[serde(default)]
    pub initial_cwnd_bytes: Option<u64>,
    /// Defaults to unbounded (pure slow start) when absent.
    #[serde(default)]
    pub initial_ssthresh_bytes: Option<u64>,
    #[serde(default = "defaults::controller")]
    pub controller: Controller,
    /// Fraction of each grant reserved for control signalling.
    #[serde(default)]
    pub mac_overhead_fraction: f64,
    #[serde(default = "defaults::topology")]
    pub topology: Topology,
    #[serde(default)]
    pub ues: Vec<UeConfig>,
    #[serde(default)]
    pub flows: Vec<FlowConfig>,
    #[serde(default)]
    pub short_flows: Option<ShortFlowGen>,
}

mod defaults {
    use super::{Controller, DisciplineKind, PolicyKind, Topology};

    pub fn seed() -> u64 {
        1
    }
    pub fn core_one_way_delay_s() -> f64 {
        0.020
    }
    pub fn air_one_way_delay_s() -> f64 {
        0.001
    }
    pub fn slot_duration_s() -> f64 {
        100e-6
    }
    pub fn mss_bytes() -> u64 {
        1400
    }
    pub fn queue_capacity_packets() -> usize {
        50_000
    }
    pub fn codel_target_s() -> f64 {
        0.005
    }
    pub fn codel_interval_s() -> f64 {
        0.100
    }
    pub fn delta_s() -> f64 {
        0.010
    }
    pub fn grant_window_s() -> f64 {
        0.100
    }
    pub fn rtt_median_samples() -> usize {
        5
    }
    pub fn static_rwnd_bytes() -> u64 {
        30_000_000
    }
    pub fn recv_buffer_cap_bytes() -> u64 {
        64_000_000
    }
    pub fn controller() -> Controller {
        Controller::Cubic
    }
    pub fn topology() -> Topology {
        Topology::Radio
    }
    pub fn discipline() -> DisciplineKind {
        DisciplineKind::DropTail
    }
    pub fn policy() -> PolicyKind {
        PolicyKind::Static
    }
    pub fn human_ramp_down_s() -> f64 {
        0.2
    }
    pub fn human_hold_s() -> f64 {
        0.3
    }
    pub fn human_ramp_up_s() -> f64 {
        0.2
    }
    pub fn human_depth_db() -> f64 {
        25.0
    }
    pub fn building_ramp_s() -> f64 {
        0.050
    }
    pub fn short_mean_interarrival_s() -> f64 {
        2.0
    }
    pub fn short_size_bytes() -> u64 {
        500_000
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0) {
            return Err(ConfigError::new("duration_s", "must be positive"));
        }
        if self.mss_bytes == 0 {
            return Err(ConfigError::new("mss_bytes", "must be positive"));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(ConfigError::new("slot_duration_s", "must be positive"));
        }
        if !(self.codel_target_s > 0.0) {
            return Err(ConfigError::new("codel_target_s", "must be positive"));
        }
        if !(self.codel_interval_s > 0.0) {
            return Err(ConfigError::new("codel_interval_s", "must be positive"));
        }
        if self.delta_s < 0.0 {
            return Err(ConfigError::new("delta_s", "must be non-negative"));
        }
        if !(self.grant_window_s > 0.0) {
            return Err(ConfigError::new("grant_window_s", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.mac_overhead_fraction) {
            return Err(ConfigError::new("mac_overhead_fraction", "must be in [0, 1)"));
        }
        if self.queue_capacity_packets == 0 {
            return Err(ConfigError::new("queue_capacity_packets", "must be positive"));
        }
        for (i, ue) in self.ues.iter().enumerate() {
            let field = format!("ues[{i}].trace");
            ue.trace
                .build()
                .map_err(|e| ConfigError { field, message: e.to_string() })?;
            if let (Some(a), Some(d)) = (ue.attach_s, ue.detach_s) {
                if d <= a {
                    return Err(ConfigError::new(
                        &format!("ues[{i}].detach_s"),
                        "must be after attach_s",
                    ));
                }
            }
        }
        for (i, flow) in self.flows.iter().enumerate() {
            match (self.topology, flow.ue) {
                (Topology::Radio, None) => {
                    return Err(ConfigError::new(
                        &format!("flows[{i}].ue"),
                        "radio topology requires a destination UE",
                    ));
                }
                (Topology::Radio, Some(ue)) if ue >= self.ues.len() => {
                    return Err(ConfigError::new(
                        &format!("flows[{i}].ue"),
                        format!("no such UE index {ue} (have {})", self.ues.len()),
                    ));
                }
                (Topology::FixedPipe, Some(_)) => {
                    return Err(ConfigError::new(
                        &format!("flows[{i}].ue"),
                        "fixed-pipe topology has no UEs",
                    ));
                }
                _ => {}
            }
            if flow.start_s < 0.0 {
                return Err(ConfigError::new(&format!("flows[{i}].start_s"), "must be >= 0"));
            }
            if let FlowKind::Short { size_bytes: 0 } = flow.kind {
                return Err(ConfigError::new(
                    &format!("flows[{i}].kind.size_bytes"),
                    "must be positive",
                ));
            }
        }
        if let Some(gen) = &self.short_flows {
            if self.topology == Topology::FixedPipe {
                return Err(ConfigError::new("short_flows", "fixed-pipe topology has no UEs"));
            }
            if gen.ue >= self.ues.len() {
                return Err(ConfigError::new(
                    "short_flows.ue",
                    format!("no such UE index {} (have {})", gen.ue, self.ues.len()),
                ));
            }
            if !(gen.mean_interarrival_s > 0.0) {
                return Err(ConfigError::new(
                    "short_flows.mean_interarrival_s",
                    "must be positive",
                ));
            }
            if gen.size_bytes == 0 {
                return Err(ConfigError::new("short_flows.size_bytes", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::new("<toml>", e.to_string()))
    }
}

fn variant(discipline: DisciplineKind, policy: PolicyKind) -> (DisciplineKind, PolicyKind) {
    (discipline, policy)
}

fn blockage_ue(trace: TraceConfig, v: (DisciplineKind, PolicyKind)) -> UeConfig {
    UeConfig {
        trace,
        discipline: v.0,
        rwnd_policy: v.1,
        bw_total_bps: None,
        attach_s: None,
        detach_s: None,
    }
}

fn long_flow(ue: usize) -> FlowConfig {
    FlowConfig { ue: Some(ue), kind: FlowKind::Long, start_s: 0.0 }
}

fn base_scenario(name: &str, duration_s: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        duration_s,
        seed: defaults::seed(),
        core_one_way_delay_s: defaults::core_one_way_delay_s(),
        air_one_way_delay_s: defaults::air_one_way_delay_s(),
        slot_duration_s: defaults::slot_duration_s(),
        mss_bytes: defaults::mss_bytes(),
        queue_capacity_packets: defaults::queue_capacity_packets(),
        codel_target_s: defaults::codel_target_s(),
        codel_interval_s: defaults::codel_interval_s(),
        delta_s: defaults::delta_s(),
        grant_window_s: defaults::grant_window_s(),
        rtt_median_samples: defaults::rtt_median_samples(),
        static_rwnd_bytes: defaults::static_rwnd_bytes(),
        recv_buffer_cap_bytes: defaults::recv_buffer_cap_bytes(),
        initial_cwnd_bytes: None,
        initial_ssthresh_bytes: None,
        controller: defaults::controller(),
        mac_overhead_fraction: 0.0,
        topology: defaults::topology(),
        ues: Vec::new(),
        flows: Vec::new(),
        short_flows: None,
    }
}

fn human_trace() -> TraceConfig {
    TraceConfig::Human {
        base_bps: 3_000_000_000,
        starts_s: vec![0.8, 4.0, 6.7],
        ramp_down_s: defaults::human_ramp_down_s(),
        hold_s: defaults::human_hold_s(),
        ramp_up_s: defaults::human_ramp_up_s(),
        depth_db: defaults::human_depth_db(),
    }
}

fn building_trace() -> TraceConfig {
    TraceConfig::Building {
        base_los_bps: 2_000_000_000,
        base_nlos_bps: 50_000_000,
        start_s: 4.0,
        duration_s: 2.0,
        ramp_s: defaults::building_ramp_s(),
    }
}

const VARIANTS: [(&str, DisciplineKind, PolicyKind); 3] = [
    ("droptail", DisciplineKind::DropTail, PolicyKind::Static),
    ("codel", DisciplineKind::Codel, PolicyKind::Static),
    ("drw", DisciplineKind::DropTail, PolicyKind::Drw),
];

/// Every scenario the binary ships with.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let mut out = Vec::new();

    for (suffix, disc, pol) in VARIANTS {
        let mut cfg = base_scenario(&format!("human-{suffix}"), 10.0);
        cfg.ues = vec![blockage_ue(human_trace(), variant(disc, pol))];
        cfg.flows = vec![long_flow(0)];
        out.push(cfg);
    }

    for (suffix, disc, pol) in VARIANTS {
        let mut cfg = base_scenario(&format!("building-{suffix}"), 12.0);
        cfg.ues = vec![blockage_ue(building_trace(), variant(disc, pol))];
        cfg.flows = vec![long_flow(0)];
        out.push(cfg);
    }

    for (suffix, disc, pol) in VARIANTS {
        let mut cfg = base_scenario(&format!("short-flows-{suffix}"), 15.0);
        cfg.ues = vec![blockage_ue(human_trace(), variant(disc, pol))];
        cfg.flows = vec![long_flow(0)];
        cfg.short_flows = Some(ShortFlowGen {
            ue: 0,
            mean_interarrival_s: defaults::short_mean_interarrival_s(),
            size_bytes: defaults::short_size_bytes(),
        });
        out.push(cfg);
    }

    for (suffix, disc, pol) in VARIANTS {
        let mut cfg = base_scenario(&format!("four-ue-{suffix}"), 10.0);
        let los = TraceConfig::Constant { bps: 2_000_000_000 };
        cfg.ues = vec![
            blockage_ue(los.clone(), variant(disc, pol)),
            blockage_ue(los, variant(disc, pol)),
            blockage_ue(building_trace(), variant(disc, pol)),
            blockage_ue(building_trace(), variant(disc, pol)),
        ];
        cfg.flows = (0..4).map(long_flow).collect();
        out.push(cfg);
    }

    {
        // One always-connected UE plus three churning ones; the interesting
        // output is flow 0's advertised-window series.
        let mut cfg = base_scenario("ue-churn-drw", 12.0);
        let trace = TraceConfig::Constant { bps: 400_000_000 };
        let churn = [(None, None), (Some(1.0), Some(7.0)), (Some(2.0), Some(8.0)), (Some(3.0), Some(9.0))];
        cfg.ues = churn
            .iter()
            .map(|&(attach_s, detach_s)| UeConfig {
                trace: trace.clone(),
                discipline: DisciplineKind::DropTail,
                rwnd_policy: PolicyKind::Drw,
                bw_total_bps: None,
                attach_s,
                detach_s,
            })
            .collect();
        cfg.flows = churn
            .iter()
            .enumerate()
            .map(|(i, &(attach_s, _))| FlowConfig {
                ue: Some(i),
                kind: FlowKind::Long,
                start_s: attach_s.unwrap_or(0.0),
            })
            .collect();
        out.push(cfg);
    }

    {
        // Pure AIMD ramp over a lossless 40 ms pipe: congestion avoidance
        // adds one 1 KB segment per RTT, so 10 MB -> 15 MB takes 200 s.
        let mut cfg = base_scenario("reno-ramp", 230.0);
        cfg.topology = Topology::FixedPipe;
        cfg.controller = Controller::Reno;
        cfg.mss_bytes = 1_000;
        cfg.initial_cwnd_bytes = Some(10_000_000);
        cfg.initial_ssthresh_bytes = Some(10_000_000);
        cfg.static_rwnd_bytes = 1_000_000_000;
        cfg.recv_buffer_cap_bytes = 1_000_000_000;
        cfg.flows = vec![FlowConfig { ue: None, kind: FlowKind::Long, start_s: 0.0 }];
        out.push(cfg);
    }

    out
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate_and_round_trip() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 14);
        for cfg in &all {
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            let round = ScenarioConfig::from_toml(&cfg.to_toml())
                .unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            assert_eq!(&round, cfg, "{}", cfg.name);
        }
    }

    #[test]
    fn four_ue_mixes_los_and_transition_traces() {
        let cfg = builtin("four-ue-drw").unwrap();
        let constant = cfg
            .ues
            .iter()
            .filter(|u| matches!(u.trace, TraceConfig::Constant { .. }))
            .count();
        let building = cfg
            .ues
            .iter()
            .filter(|u| matches!(u.trace, TraceConfig::Building { .. }))
            .count();
        assert_eq!((constant, building), (2, 2));
    }

    #[test]
    fn churn_detaches_at_seven_eight_nine() {
        let cfg = builtin("ue-churn-drw").unwrap();
        let detaches: Vec<f64> = cfg.ues.iter().filter_map(|u| u.detach_s).collect();
        assert_eq!(detaches, vec![7.0, 8.0, 9.0]);
        assert!(cfg.ues[0].detach_s.is_none());
    }

    #[test]
    fn reno_ramp_parameters() {
        let cfg = builtin("reno-ramp").unwrap();
        assert_eq!(cfg.mss_bytes, 1_000);
        assert_eq!(cfg.initial_cwnd_bytes, Some(10_000_000));
        assert_eq!(cfg.controller, Controller::Reno);
        assert_eq!(cfg.topology, Topology::FixedPipe);
        // 20 ms each way through the core: 40 ms RTT.
        assert_eq!(cfg.core_one_way_delay_s, 0.020);
    }

    #[test]
    fn validation_names_the_bad_field() {
        let mut cfg = builtin("human-codel").unwrap();
        cfg.flows[0].ue = Some(5);
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field, "flows[0].ue");

        let mut cfg = builtin("human-codel").unwrap();
        cfg.duration_s = 0.0;
        assert_eq!(cfg.validate().unwrap_err().field, "duration_s");

        let mut cfg = builtin("reno-ramp").unwrap();
        cfg.flows[0].ue = Some(0);
        assert_eq!(cfg.validate().unwrap_err().field, "flows[0].ue");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let toml = "name = \"x\"\nduration_s = 1.0\nbogus = 3\n";
        assert!(ScenarioConfig::from_toml(toml).is_err());
    }
}
