//! Deterministic discrete-event simulation of TCP downloads over an
//! intermittent, high-peak-rate cellular radio link, for comparing
//! bufferbloat mitigations: Drop-tail, CoDel, and dynamic receive-window
//! control driven by scheduling grants.

pub mod aqm;
pub mod channel;
pub mod engine;
pub mod mac;
pub mod metrics;
pub mod rwnd;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod transport;

pub use metrics::MetricsLog;
pub use scenario::{builtin, builtin_scenarios, ScenarioConfig};
pub use sim::run_scenario;
pub use time::{SimDuration, SimTime};
