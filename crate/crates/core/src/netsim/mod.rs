//! Three-party network simulation: session scheduling, Charlie's
//! measurement and sifting, and the authenticated classical channel.

pub mod bus;
pub mod config;
pub mod run;
pub mod schedule;

pub use bus::{ClassicalChannel, Message};
pub use config::{
    key_outcome, simulate, KeyOutcome, Manifest, QdsSettings, RunConfig, RunReport, Simulation,
};
pub use run::{run_plan, run_plan_with, sift_mdi_event, LinkModels, RunOutput, ZPool};
pub use schedule::{schedule, Party, SessionPlan, SessionType, Slot, Weights};
