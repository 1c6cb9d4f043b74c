//! Gaussian filtering machinery shared by both estimation stages.
//!
//! Everything here works on dynamically sized `nalgebra` vectors and
//! matrices: the stage-1 tracker uses a 6-state, the fusion filters an
//! 8 + L state whose size changes as access nodes come and go.

mod angle;
pub mod linalg;
mod state;
mod update;
mod ut;

pub use angle::{wrap, wrap_angle};
pub use state::{GaussianState, LinearTransition, StateTag};
pub use update::{ekf_update, predict_linear, statistical_linearization, ukf_update, Linearization};
pub use ut::{sigma_points, ut_weights, SigmaPointSet, UtParams, UtWeights};
