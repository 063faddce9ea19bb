//! Force-feedback skill adaptation for contact tasks.
//!
//! The crate is organised bottom-up:
//!
//! - [`math`]: unit quaternions, the canonical phase system and normalized
//!   radial basis functions.
//! - [`dmp`]: position and orientation dynamic movement primitives, fitting
//!   from demonstrations and rollout with an additive coupling term.
//! - [`net`]: the phase-modulated recurrent feedback network (PMDRNN), the
//!   feedforward baseline (PMNN), SSR training with backpropagation through
//!   time and finite-difference gradient checking.
//! - [`sim`]: a point-contact polishing environment driven by an impedance
//!   controlled tool.
//! - [`pipeline`]: episode recording, training-pair extraction, and the model
//!   comparison / closed-loop evaluation experiments.

pub mod dmp;
pub mod error;
pub mod math;
pub mod net;
pub mod pipeline;
pub mod record;
pub mod sim;

pub use dmp::{CouplingProvider, CouplingTerm, DmpState, OrientationDmp, PositionDmp, SkillModel};
pub use error::{Error, Result};
pub use math::{PhaseState, RbfBasis, UnitQuaternion};
pub use net::{FeedbackState, PmdrnnParams, PmnnParams, TrainConfig, Wrench};
pub use record::{EpisodeRecord, EpisodeRow};

/// Nominal sample period of recorded episodes (50 Hz).
pub const SAMPLE_DT: f64 = 0.02;
