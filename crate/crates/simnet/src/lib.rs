//! A deterministic discrete-event simulator for the voting engine, with
//! latency and CPU models, Byzantine behaviours, schedule exploration and
//! the performance sweeps.

pub mod adversary;
pub mod analysis;
pub mod explore;
pub mod model;
pub mod policy;
pub mod scenario;
pub mod secrecy;
pub mod sweep;
pub mod world;

pub use adversary::Behavior;
pub use analysis::{analyze, ElectionReport, Expectations, Violation};
pub use model::{CostModel, LatencyModel, NetworkModel};
pub use policy::Policy;
pub use scenario::{run_scenario, GroupChoice, RunMetrics, ScenarioSpec};
pub use world::{RunEnd, Stats, VoterSpec, World, WorldError};
