//! Time-series collection and CSV export.
//!
//! Series are sampled on every relevant event plus a fixed 1 ms cadence;
//! samples landing on the same nanosecond are coalesced (last write wins) so
//! timestamps stay strictly increasing within each series and burst events
//! do not bloat the logs.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::time::{SimDuration, SimTime};

pub const METRICS_CADENCE: SimDuration = SimDuration::from_millis(1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub t: SimTime,
    pub cwnd: u64,
    pub rwnd: u64,
    pub in_flight: u64,
    /// Smoothed RTT; zero until the first sample.
    pub srtt: SimDuration,
    /// Goodput over the trailing 100 ms, receiver-side in-order bytes.
    pub goodput_bps: u64,
    pub retransmissions: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSample {
    pub t: SimTime,
    pub len_packets: u64,
    pub head_sojourn: SimDuration,
    pub cumulative_drops: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwndSample {
    pub t: SimTime,
    pub rtt_min: SimDuration,
    pub last_rtt: SimDuration,
    pub bw_alloc: u64,
    pub bw_total: u64,
    pub advertised: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrantRecord {
    pub t: SimTime,
    pub ue: u32,
    pub tb_bits: u64,
}

/// Append-only series with same-timestamp coalescing.
#[derive(Debug, Clone)]
pub struct Series<T> {
    samples: Vec<T>,
}

impl<T> Default for Series<T> {
    fn default() -> Self {
        Series { samples: Vec::new() }
    }
}

impl<T> Series<T> {
    pub fn push(&mut self, t: SimTime, sample: T)
    where
        T: SampleAt,
    {
        debug_assert_eq!(sample.at(), t);
        match self.samples.last_mut() {
            Some(last) if last.at() == t => *last = sample,
            Some(last) => {
                debug_assert!(last.at() < t, "series timestamps must increase");
                self.samples.push(sample);
            }
            None => self.samples.push(sample),
        }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub trait SampleAt {
    fn at(&self) -> SimTime;
}

impl SampleAt for FlowSample {
    fn at(&self) -> SimTime {
        self.t
    }
}
impl SampleAt for QueueSample {
    fn at(&self) -> SimTime {
        self.t
    }
}
impl SampleAt for RwndSample {
    fn at(&self) -> SimTime {
        self.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttPoint {
    pub t: SimTime,
    pub rtt: SimDuration,
}

impl SampleAt for RttPoint {
    fn at(&self) -> SimTime {
        self.t
    }
}

#[derive(Debug, Default, Clone)]
pub struct FlowSeries {
    pub flow: u32,
    pub start: SimTime,
    pub completed: Option<SimTime>,
    pub samples: Series<FlowSample>,
    /// Raw sender-side RTT measurements, one per (coalesced) ACK.
    pub rtt_points: Series<RttPoint>,
}

#[derive(Debug, Default, Clone)]
pub struct QueueSeries {
    pub ue: u32,
    pub samples: Series<QueueSample>,
}

#[derive(Debug, Default, Clone)]
pub struct RwndSeries {
    pub flow: u32,
    pub samples: Series<RwndSample>,
}

/// Everything one scenario run produced.
#[derive(Debug, Default, Clone)]
pub struct MetricsLog {
    pub scenario: String,
    pub seed: u64,
    pub duration: SimTime,
    pub flows: Vec<FlowSeries>,
    pub queues: Vec<QueueSeries>,
    pub rwnd: Vec<RwndSeries>,
    pub grants: Vec<GrantRecord>,
    /// Capacity breakpoints per UE, for plotting the channel.
    pub capacity: Vec<(u32, Vec<(SimTime, u64)>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSummary {
    pub flow: u32,
    pub delivered_bytes: u64,
    pub mean_goodput_bps: u64,
    pub mean_rtt: SimDuration,
    pub p95_rtt: SimDuration,
}

/// Nearest-rank percentile over an unsorted slice; `q` in (0, 1].
pub fn percentile(samples: &mut [SimDuration], q: f64) -> SimDuration {
    if samples.is_empty() {
        return SimDuration::ZERO;
    }
    samples.sort_unstable();
    let rank = ((q * samples.len() as f64).ceil() as usize).clamp(1, samples.len());
    samples[rank - 1]
}

impl MetricsLog {
    pub fn flow_summary(&self) -> Vec<FlowSummary> {
        self.flows
            .iter()
            .map(|f| {
                let delivered =
                    f.samples.samples().last().map_or(0, |s| s.delivered);
                let end = f.completed.unwrap_or(self.duration);
                let active = end.saturating_sub(f.start);
                let mean_goodput_bps = if active.is_zero() {
                    0
                } else {
                    (delivered as u128 * 8_000_000_000 / active.as_nanos() as u128) as u64
                };
                let mut rtts: Vec<SimDuration> =
                    f.rtt_points.samples().iter().map(|p| p.rtt).collect();
                let mean_rtt = if rtts.is_empty() {
                    SimDuration::ZERO
                } else {
                    let total: u128 = rtts.iter().map(|r| r.as_nanos() as u128).sum();
                    SimDuration::from_nanos((total / rtts.len() as u128) as u64)
                };
                let p95_rtt = percentile(&mut rtts, 0.95);
                FlowSummary {
                    flow: f.flow,
                    delivered_bytes: delivered,
                    mean_goodput_bps,
                    mean_rtt,
                    p95_rtt,
                }
            })
            .collect()
    }

    /// Writes one CSV per series plus a per-flow summary; returns the paths
    /// written. Re-running the same deterministic log produces byte-identical
    /// files.
    pub fn emit_csv(&self, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir)?;
        let mut written = Vec::new();

        for f in &self.flows {
            let path = out_dir.join(format!("flow_{}.csv", f.flow));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(
                w,
                "time_s,cwnd_bytes,rwnd_bytes,in_flight_bytes,srtt_s,goodput_bps,retransmissions,delivered_bytes"
            )?;
            for s in f.samples.samples() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.t, s.cwnd, s.rwnd, s.in_flight, s.srtt, s.goodput_bps,
                    s.retransmissions, s.delivered
                )?;
            }
            written.push(path);

            let path = out_dir.join(format!("rtt_{}.csv", f.flow));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "time_s,rtt_s")?;
            for p in f.rtt_points.samples() {
                writeln!(w, "{},{}", p.t, p.rtt)?;
            }
            written.push(path);
        }

        for q in &self.queues {
            let path = out_dir.join(format!("queue_{}.csv", q.ue));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "time_s,len_packets,head_sojourn_s,cumulative_drops")?;
            for s in q.samples.samples() {
                writeln!(w, "{},{},{},{}", s.t, s.len_packets, s.head_sojourn, s.cumulative_drops)?;
            }
            written.push(path);
        }

        for r in &self.rwnd {
            let path = out_dir.join(format!("rwnd_{}.csv", r.flow));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "time_s,rtt_min_s,last_rtt_s,bw_alloc_bps,bw_total_bps,advertised_bytes")?;
            for s in r.samples.samples() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    s.t, s.rtt_min, s.last_rtt, s.bw_alloc, s.bw_total, s.advertised
                )?;
            }
            written.push(path);
        }

        {
            let path = out_dir.join("grants.csv");
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "time_s,ue,tb_bits")?;
            for g in &self.grants {
                writeln!(w, "{},{},{}", g.t, g.ue, g.tb_bits)?;
            }
            written.push(path);
        }

        for (ue, points) in &self.capacity {
            let path = out_dir.join(format!("capacity_{ue}.csv"));
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "time_s,capacity_bps")?;
            for (t, c) in points {
                writeln!(w, "{t},{c}")?;
            }
            written.push(path);
        }

        {
            let path = out_dir.join("summary.csv");
            let mut w = BufWriter::new(fs::File::create(&path)?);
            writeln!(w, "flow,delivered_bytes,mean_goodput_bps,mean_rtt_s,p95_rtt_s")?;
            for s in self.flow_summary() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s.flow, s.delivered_bytes, s.mean_goodput_bps, s.mean_rtt, s.p95_rtt
                )?;
            }
            written.push(path);
        }

        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalesces_same_timestamp_samples() {
        let mut s: Series<RttPoint> = Series::default();
        let t = SimTime::from_millis(5);
        s.push(t, RttPoint { t, rtt: SimDuration::from_millis(40) });
        s.push(t, RttPoint { t, rtt: SimDuration::from_millis(41) });
        s.push(t + SimDuration::from_millis(1), RttPoint {
            t: t + SimDuration::from_millis(1),
            rtt: SimDuration::from_millis(42),
        });
        assert_eq!(s.samples().len(), 2);
        assert_eq!(s.samples()[0].rtt, SimDuration::from_millis(41));
    }

    #[test]
    fn percentile_nearest_rank() {
        let mut v: Vec<SimDuration> =
            (1..=100).map(SimDuration::from_millis).collect();
        assert_eq!(percentile(&mut v, 0.95), SimDuration::from_millis(95));
        assert_eq!(percentile(&mut v, 1.0), SimDuration::from_millis(100));
        assert_eq!(percentile(&mut [], 0.95), SimDuration::ZERO);
    }

    #[test]
    fn empty_log_writes_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let log = MetricsLog::default();
        let files = log.emit_csv(dir.path()).unwrap();
        assert!(files.iter().any(|p| p.ends_with("grants.csv")));
        let grants = fs::read_to_string(dir.path().join("grants.csv")).unwrap();
        assert_eq!(grants, "time_s,ue,tb_bits\n");
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1);
    }
}
