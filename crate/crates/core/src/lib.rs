//! Trajectory planning for a UAV relay on a mixed FSO/RF dual-hop link with a
//! finite buffer and an average-delay limit.
//!
//! The planner maximizes average end-to-end throughput by successive convex
//! approximation: each round replaces both link rates by concave lower
//! bounds that are tight at the current trajectory and solves the resulting
//! cone program.

pub mod baselines;
pub mod channel;
pub mod harness;
pub mod planner;
pub mod queue;
pub mod scenario;

pub use channel::{FsoLinkModel, RfLinkModel};
pub use planner::{Mode, PlanResult};
pub use queue::{QueueTrace, RatePlan};
pub use scenario::{Bound, ScenarioParams, Trajectory};
