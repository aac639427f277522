//! Topology wiring and the event loop for one scenario run.
//!
//! Radio topology: sender -> core-network pipe (fixed delay) -> per-UE
//! base-station queue -> round-robin scheduler (slotted) -> air interface
//! (fixed delay) -> receiver; ACKs ride back over air + core. The fixed-pipe
//! topology connects sender and receiver through the core delay alone.
//!
//! Everything runs single-threaded over one event engine; re-running a
//! config with the same seed replays the identical event sequence.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::aqm::{CoDelQueue, Discipline, DropTailQueue, QueuedPacket};
use crate::engine::{Engine, EventHandle};
use crate::mac::{round_robin_allocate, serve_slot, SlotConfig, UeContext};
use crate::metrics::{
    FlowSample, FlowSeries, GrantRecord, MetricsLog, QueueSample, QueueSeries, RttPoint,
    RwndSample, RwndSeries, METRICS_CADENCE,
};
use crate::rwnd::{RttSample, RwndConfig, RwndController, RwndPolicy};
use crate::scenario::{
    ConfigError, Controller, DisciplineKind, FlowKind, PolicyKind, ScenarioConfig,
};
use crate::time::{SimDuration, SimTime};
use crate::transport::{Ack, CcAlgorithm, Receiver, Segment, SenderOutput, TcpSender, TimerCmd};

/// Trailing window for the goodput series.
const GOODPUT_WINDOW: SimDuration = SimDuration::from_millis(100);

enum Ev {
    FlowStart(usize),
    SegsToQueue { ue: usize, segs: Vec<Segment> },
    SegsToReceiver { segs: Vec<Segment> },
    AcksToSender { acks: Vec<Ack> },
    Rto { flow: usize },
    SlotTick,
    MetricsTick,
    Attach { ue: usize },
    Detach { ue: usize },
}

struct Flow {
    ue: Option<usize>,
    sender: TcpSender,
    receiver: Receiver,
    ctl: RwndController,
    started: bool,
    stopped: bool,
    rto_handle: Option<EventHandle>,
    start: SimTime,
    completed: Option<SimTime>,
    /// (time, delivered bytes) history backing the goodput estimate.
    delivered_history: VecDeque<(SimTime, u64)>,
}

struct Simulation {
    engine: Engine<Ev>,
    end: SimTime,
    core_delay: SimDuration,
    air_delay: SimDuration,
    slot: SlotConfig,
    ues: Vec<UeContext<Segment>>,
    /// Flow indices attached to each UE, for grant fan-out.
    ue_flows: Vec<Vec<usize>>,
    flows: Vec<Flow>,
    rr_cursor: usize,
    // metrics under construction
    flow_series: Vec<FlowSeries>,
    queue_series: Vec<QueueSeries>,
    rwnd_series: Vec<RwndSeries>,
    grants: Vec<GrantRecord>,
}

/// Runs a validated scenario to completion and returns its metrics.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<MetricsLog, ConfigError> {
    cfg.validate()?;
    let mut sim = Simulation::build(cfg);
    sim.run();
    Ok(sim.into_log(cfg))
}

impl Simulation {
    fn build(cfg: &ScenarioConfig) -> Simulation {
        let end = SimTime::from_secs_f64(cfg.duration_s);
        let slot = SlotConfig {
            slot_duration: SimDuration::from_secs_f64(cfg.slot_duration_s),
            overhead_fraction: cfg.mac_overhead_fraction,
        };
        let mut engine: Engine<Ev> = Engine::new();

        let mut ues = Vec::new();
        for (i, uc) in cfg.ues.iter().enumerate() {
            let trace = uc.trace.build().expect("validated trace");
            let queue = match uc.discipline {
                DisciplineKind::DropTail => {
                    Discipline::DropTail(DropTailQueue::new(cfg.queue_capacity_packets))
                }
                DisciplineKind::Codel => Discipline::CoDel(CoDelQueue::new(
                    SimDuration::from_secs_f64(cfg.codel_target_s),
                    SimDuration::from_secs_f64(cfg.codel_interval_s),
                    cfg.queue_capacity_packets,
                )),
            };
            let active = uc.attach_s.is_none();
            if let Some(at) = uc.attach_s {
                engine
                    .schedule_at(SimTime::from_secs_f64(at), Ev::Attach { ue: i })
                    .expect("attach in the future");
            }
            if let Some(at) = uc.detach_s {
                engine
                    .schedule_at(SimTime::from_secs_f64(at), Ev::Detach { ue: i })
                    .expect("detach in the future");
            }
            ues.push(UeContext { id: i as u32, queue, trace, active, pending_credit: 0 });
        }

        // Configured flows, then seed-generated short flows.
        let mut flow_defs: Vec<(Option<usize>, Option<u64>, f64)> = cfg
            .flows
            .iter()
            .map(|f| {
                let size = match f.kind {
                    FlowKind::Long => None,
                    FlowKind::Short { size_bytes } => Some(size_bytes),
                };
                (f.ue, size, f.start_s)
            })
            .collect();
        if let Some(gen) = &cfg.short_flows {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            let mut t = 0.0;
            loop {
                let u: f64 = rng.gen();
                t += -gen.mean_interarrival_s * (1.0 - u).ln();
                if t >= cfg.duration_s {
                    break;
                }
                flow_defs.push((Some(gen.ue), Some(gen.size_bytes), t));
            }
        }

        let algo = match cfg.controller {
            Controller::Reno => CcAlgorithm::Reno,
            Controller::Cubic => CcAlgorithm::Cubic,
        };
        let initial_cwnd = cfg.initial_cwnd_bytes.unwrap_or(10 * cfg.mss_bytes);

        let mut flows = Vec::new();
        let mut ue_flows = vec![Vec::new(); ues.len()];
        for (idx, (ue, size, start_s)) in flow_defs.iter().enumerate() {
            let policy = match ue {
                Some(u) => match cfg.ues[*u].rwnd_policy {
                    PolicyKind::Static => RwndPolicy::Static,
                    PolicyKind::Abrwda => RwndPolicy::Abrwda,
                    PolicyKind::Drw => RwndPolicy::Drw,
                },
                None => RwndPolicy::Static,
            };
            let bw_total = ue
                .map(|u| cfg.ues[u].bw_total_bps.unwrap_or_else(|| cfg.ues[u].trace.base_bps()))
                .unwrap_or(0);
            let ctl = RwndController::new(RwndConfig {
                policy,
                bw_total,
                delta: SimDuration::from_secs_f64(cfg.delta_s),
                grant_window: SimDuration::from_secs_f64(cfg.grant_window_s),
                static_window: cfg.static_rwnd_bytes,
                mss: cfg.mss_bytes,
                buffer_cap: cfg.recv_buffer_cap_bytes,
                median_samples: cfg.rtt_median_samples,
            });
            let sender = TcpSender::new(
                idx as u32,
                cfg.mss_bytes,
                algo,
                initial_cwnd,
                cfg.initial_ssthresh_bytes,
                *size,
                cfg.static_rwnd_bytes,
            );
            let start = SimTime::from_secs_f64(*start_s);
            engine.schedule_at(start, Ev::FlowStart(idx)).expect("flow start in the future");
            if let Some(u) = ue {
                ue_flows[*u].push(idx);
            }
            flows.push(Flow {
                ue: *ue,
                sender,
                receiver: Receiver::new(idx as u32),
                ctl,
                started: false,
                stopped: false,
                rto_handle: None,
                start,
                completed: None,
                delivered_history: VecDeque::new(),
            });
        }

        if !ues.is_empty() {
            engine.schedule(SimDuration::ZERO, Ev::SlotTick);
        }
        engine.schedule(METRICS_CADENCE, Ev::MetricsTick);

        let flow_series = flows
            .iter()
            .enumerate()
            .map(|(i, f)| FlowSeries {
                flow: i as u32,
                start: f.start,
                completed: None,
                samples: Default::default(),
                rtt_points: Default::default(),
            })
            .collect();
        let queue_series =
            ues.iter().map(|u| QueueSeries { ue: u.id, samples: Default::default() }).collect();
        let rwnd_series = flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.ue.is_some())
            .map(|(i, _)| RwndSeries { flow: i as u32, samples: Default::default() })
            .collect();

        Simulation {
            engine,
            end,
            core_delay: SimDuration::from_secs_f64(cfg.core_one_way_delay_s),
            air_delay: SimDuration::from_secs_f64(cfg.air_one_way_delay_s),
            slot,
            ues,
            ue_flows,
            flows,
            rr_cursor: 0,
            flow_series,
            queue_series,
            rwnd_series,
            grants: Vec::new(),
        }
    }

    fn run(&mut self) {
        while let Some((now, ev)) = self.engine.pop_due(self.end) {
            self.dispatch(now, ev);
        }
        self.engine.advance_to(self.end);
        let now = self.end;
        for i in 0..self.flows.len() {
            if self.flows[i].started {
                self.record_flow(i, now);
            }
        }
        for u in 0..self.ues.len() {
            self.record_queue(u, now);
        }
    }

    fn dispatch(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::FlowStart(i) => self.on_flow_start(i, now),
            Ev::SegsToQueue { ue, segs } => self.on_segs_to_queue(ue, segs, now),
            Ev::SegsToReceiver { segs } => self.on_segs_to_receiver(segs, now),
            Ev::AcksToSender { acks } => self.on_acks_to_sender(acks, now),
            Ev::Rto { flow } => self.on_rto(flow, now),
            Ev::SlotTick => self.on_slot_tick(now),
            Ev::MetricsTick => self.on_metrics_tick(now),
            Ev::Attach { ue } => {
                self.ues[ue].attach().expect("scheduled attach");
            }
            Ev::Detach { ue } => self.on_detach(ue, now),
        }
    }

    fn on_flow_start(&mut self, i: usize, now: SimTime) {
        if self.flows[i].stopped {
            return;
        }
        self.flows[i].started = true;
        let out = self.flows[i].sender.start(now);
        self.apply_sender_output(i, out);
        self.record_flow(i, now);
    }

    fn apply_sender_output(&mut self, i: usize, out: SenderOutput) {
        match out.timer {
            TimerCmd::Keep => {}
            TimerCmd::Restart => {
                if let Some(h) = self.flows[i].rto_handle.take() {
                    self.engine.cancel(h);
                }
                let rto = self.flows[i].sender.rto();
                self.flows[i].rto_handle = Some(self.engine.schedule(rto, Ev::Rto { flow: i }));
            }
            TimerCmd::Cancel => {
                if let Some(h) = self.flows[i].rto_handle.take() {
                    self.engine.cancel(h);
                }
            }
        }
        if out.segments.is_empty() {
            return;
        }
        match self.flows[i].ue {
            Some(ue) => {
                self.engine.schedule(self.core_delay, Ev::SegsToQueue { ue, segs: out.segments });
            }
            None => {
                self.engine
                    .schedule(self.core_delay, Ev::SegsToReceiver { segs: out.segments });
            }
        }
    }

    fn on_segs_to_queue(&mut self, ue: usize, segs: Vec<Segment>, now: SimTime) {
        for seg in segs {
            let pkt = QueuedPacket {
                bytes: seg.len,
                enqueue_time: now,
                flow: seg.flow,
                seq: seg.seq,
                payload: seg,
            };
            self.ues[ue].queue.enqueue(pkt);
        }
        self.record_queue(ue, now);
    }

    fn on_slot_tick(&mut self, now: SimTime) {
        let grants = round_robin_allocate(&self.ues, self.rr_cursor, now, &self.slot);
        if !self.ues.is_empty() {
            self.rr_cursor = (self.rr_cursor + 1) % self.ues.len();
        }
        for grant in grants {
            let ue = grant.ue as usize;
            // The UE reads its own DCI: grants reach the window controllers
            // of every flow terminating at this UE with zero delay.
            for &fi in &self.ue_flows[ue] {
                self.flows[fi].ctl.observe_grant(&grant);
            }
            self.grants.push(GrantRecord { t: now, ue: grant.ue, tb_bits: grant.tb_bits });
            let outcome = serve_slot(&mut self.ues[ue], &grant, now);
            if !outcome.delivered.is_empty() {
                let segs: Vec<Segment> =
                    outcome.delivered.into_iter().map(|p| p.payload).collect();
                self.engine.schedule(self.air_delay, Ev::SegsToReceiver { segs });
            }
            self.record_queue(ue, now);
        }
        let next = now + self.slot.slot_duration;
        if next <= self.end {
            self.engine.schedule_at(next, Ev::SlotTick).expect("future slot");
        }
    }

    fn on_segs_to_receiver(&mut self, segs: Vec<Segment>, now: SimTime) {
        let mut acks: Vec<Ack> = Vec::with_capacity(segs.len());
        let mut route_ue: Option<usize> = None;
        for seg in segs {
            let i = seg.flow as usize;
            if self.flows[i].stopped {
                continue;
            }
            route_ue = self.flows[i].ue;
            if let Some(value) = Receiver::rtt_sample(&seg, now) {
                if !value.is_zero() {
                    let _ = self.flows[i].ctl.update_rtt_min(RttSample { value, taken_at: now });
                }
            }
            let advertised = self.flows[i].ctl.compute_rw(now);
            let ack = self.flows[i].receiver.on_segment(&seg, now, advertised);
            acks.push(ack);
            if self.flows[i].ue.is_some() {
                self.record_rwnd(i, now, advertised);
            }
        }
        if acks.is_empty() {
            return;
        }
        // ACKs ride the uplink abstraction: air + core for radio flows, the
        // bare core pipe otherwise.
        let delay = match route_ue {
            Some(_) => self.air_delay + self.core_delay,
            None => self.core_delay,
        };
        self.engine.schedule(delay, Ev::AcksToSender { acks });
    }

    fn on_acks_to_sender(&mut self, acks: Vec<Ack>, now: SimTime) {
        for ack in acks {
            let i = ack.flow as usize;
            if self.flows[i].stopped {
                continue;
            }
            let out = self.flows[i].sender.on_ack(&ack, now);
            self.apply_sender_output(i, out);
            if let Some(rtt) = self.flows[i].sender.last_rtt_sample() {
                self.flow_series[i].rtt_points.push(now, RttPoint { t: now, rtt });
            }
            self.record_flow(i, now);
            if self.flows[i].sender.done() && self.flows[i].completed.is_none() {
                self.flows[i].completed = Some(now);
                self.flow_series[i].completed = Some(now);
                self.flows[i].stopped = true;
                if let Some(h) = self.flows[i].rto_handle.take() {
                    self.engine.cancel(h);
                }
            }
        }
    }

    fn on_rto(&mut self, flow: usize, now: SimTime) {
        self.flows[flow].rto_handle = None;
        if self.flows[flow].stopped {
            return;
        }
        let out = self.flows[flow].sender.on_rto(now);
        self.apply_sender_output(flow, out);
        self.record_flow(flow, now);
    }

    fn on_metrics_tick(&mut self, now: SimTime) {
        for i in 0..self.flows.len() {
            if self.flows[i].started && !self.flows[i].stopped {
                self.record_flow(i, now);
            }
        }
        for u in 0..self.ues.len() {
            self.record_queue(u, now);
        }
        let next = now + METRICS_CADENCE;
        if next <= self.end {
            self.engine.schedule_at(next, Ev::MetricsTick).expect("future tick");
        }
    }

    fn on_detach(&mut self, ue: usize, _now: SimTime) {
        self.ues[ue].detach().expect("scheduled detach");
        // Flows terminating at a departed UE freeze where they are.
        for &fi in &self.ue_flows[ue].clone() {
            self.flows[fi].stopped = true;
            if let Some(h) = self.flows[fi].rto_handle.take() {
                self.engine.cancel(h);
            }
        }
    }

    fn record_flow(&mut self, i: usize, now: SimTime) {
        let delivered = self.flows[i].receiver.delivered();
        let history = &mut self.flows[i].delivered_history;
        history.push_back((now, delivered));
        while history.len() > 1 {
            let second_age = history[1].0;
            if now.saturating_sub(second_age) >= GOODPUT_WINDOW {
                history.pop_front();
            } else {
                break;
            }
        }
        let goodput_bps = match history.front() {
            Some(&(t0, d0)) if now > t0 => {
                ((delivered - d0) as u128 * 8_000_000_000 / (now - t0).as_nanos() as u128) as u64
            }
            _ => 0,
        };
        let s = &self.flows[i].sender;
        let sample = FlowSample {
            t: now,
            cwnd: s.cwnd_bytes(),
            rwnd: s.rwnd(),
            in_flight: s.in_flight(),
            srtt: s.srtt().unwrap_or(SimDuration::ZERO),
            goodput_bps,
            retransmissions: s.retransmissions(),
            delivered,
        };
        self.flow_series[i].samples.push(now, sample);
    }

    fn record_queue(&mut self, ue: usize, now: SimTime) {
        let q = &self.ues[ue].queue;
        let sample = QueueSample {
            t: now,
            len_packets: q.len() as u64,
            head_sojourn: q.head_sojourn(now),
            cumulative_drops: q.drops(),
        };
        self.queue_series[ue].samples.push(now, sample);
    }

    fn record_rwnd(&mut self, flow: usize, now: SimTime, advertised: u64) {
        let ctl = &mut self.flows[flow].ctl;
        let sample = RwndSample {
            t: now,
            rtt_min: ctl.rtt_min().unwrap_or(SimDuration::ZERO),
            last_rtt: ctl.last_rtt().unwrap_or(SimDuration::ZERO),
            bw_alloc: ctl.bw_alloc(now),
            bw_total: ctl.bw_total(),
            advertised,
        };
        if let Some(series) = self.rwnd_series.iter_mut().find(|r| r.flow == flow as u32) {
            series.samples.push(now, sample);
        }
    }

    fn into_log(self, cfg: &ScenarioConfig) -> MetricsLog {
        let capacity = self
            .ues
            .iter()
            .map(|u| (u.id, u.trace.breakpoints(self.end)))
            .collect();
        MetricsLog {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            duration: self.end,
            flows: self.flow_series,
            queues: self.queue_series,
            rwnd: self.rwnd_series,
            grants: self.grants,
            capacity,
        }
    }
}
