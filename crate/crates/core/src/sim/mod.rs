//! Point-contact polishing environment: a felt wheel pressed onto a
//! workpiece by an impedance-controlled tool that tracks a DMP reference.

mod contact;
mod episode;
mod impedance;
mod surface;
mod sweep;

pub use contact::{contact_force, ContactConfig, SLIDING_REGULARIZATION};
pub use episode::{
    force_rmse, run_episode, sample_count, EnvPerturbation, EpisodeInputs, EpisodeSettings, EpisodeTrace, Scenario,
    DIVERGENCE_LIMIT,
};
pub use impedance::{impedance_step, ImpedanceGains, ImpedanceState};
pub use surface::{HeightField, SurfacePoint, WorkpieceSurface};
pub use sweep::{min_jerk, tool_down, SweepSpec};
