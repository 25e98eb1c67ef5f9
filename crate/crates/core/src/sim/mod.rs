//! Discrete-event simulation of the finite system.

mod calendar;
pub mod coupling;
pub mod policy;
pub mod run;
pub mod state;
pub mod steady;
pub mod trajectory;

pub use coupling::{run_coupled, CoupledRun};
pub use policy::{assignment_class_pmf, gwsq_d_assign, jsq_d_assign, Policy};
pub use run::{run_jsq_d, simulate, RunOptions, RunOutput};
pub use state::{Counters, SimState};
pub use steady::{steady_state_estimate, SteadyEstimate};
pub use trajectory::{MismatchCurve, Trajectory, TrajectoryMeta};
