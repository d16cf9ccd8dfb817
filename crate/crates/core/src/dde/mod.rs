//! Delay differential equations: dynamics description, history storage and
//! a fixed-step RK4 integrator working by the method of steps.

mod dynamics;
mod history;
mod integrator;
mod trajectory;

pub use dynamics::{evaluate_rhs, DelayDynamics, DelayTerm, Nonlinearity};
pub use history::HistoryBuffer;
pub use integrator::{integrate, integrate_with, InitialCondition, IntegratorOptions};
pub use trajectory::{trajectory_segment_norm, Norm, Trajectory};
