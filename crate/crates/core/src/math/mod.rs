//! Shared numerical building blocks.

mod phase;
mod quaternion;
mod rbf;

pub use phase::{PhaseState, DEFAULT_ALPHA_S};
pub use quaternion::UnitQuaternion;
pub use rbf::RbfBasis;
