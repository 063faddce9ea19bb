//! Dynamic movement primitives for Cartesian position and orientation.
//!
//! A [`SkillModel`] pairs a [`PositionDmp`] and an [`OrientationDmp`] that
//! share one canonical system. Online adaptation enters through a
//! [`CouplingTerm`] added to the transformation system; the forcing-weight
//! and action-space perturbation sites are available through [`Modulation`].

mod fit;
mod orientation;
mod position;

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use fit::RIDGE_LAMBDA;
pub use orientation::{orientation_error, OrientationDmp, OrientationState};
pub use position::{PositionDmp, PositionState};

use crate::error::{Error, Result};
use crate::math::{PhaseState, UnitQuaternion, DEFAULT_ALPHA_S};
use crate::net::Wrench;
use crate::record::{EpisodeRecord, EpisodeRow};

pub const DEFAULT_ALPHA: f64 = 25.0;
pub const DEFAULT_BASIS_COUNT: usize = 25;

/// Additive correction to the transformation systems, in forcing-term units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CouplingTerm {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

impl CouplingTerm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn position(c: Vector3<f64>) -> Self {
        CouplingTerm {
            position: c,
            orientation: Vector3::zeros(),
        }
    }

    /// Builds a coupling term from a network output of dimension 3
    /// (position only) or 6 (position then orientation).
    pub fn from_slice(c: &[f64]) -> Result<Self> {
        match c.len() {
            3 => Ok(Self::position(Vector3::new(c[0], c[1], c[2]))),
            6 => Ok(CouplingTerm {
                position: Vector3::new(c[0], c[1], c[2]),
                orientation: Vector3::new(c[3], c[4], c[5]),
            }),
            n => Err(Error::Shape(format!("coupling dimension must be 3 or 6, got {n}"))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.orientation.iter()).all(|v| v.is_finite())
    }
}

/// The three modulation sites of the transformation system. Only the
/// coupling term is driven online; the other two are test hooks.
#[derive(Debug, Clone, Default)]
pub struct Modulation {
    pub coupling: CouplingTerm,
    /// Added to the position forcing weights.
    pub forcing_weight_offset: Option<Vec<Vector3<f64>>>,
    /// Added directly to the position acceleration term.
    pub action_offset: Vector3<f64>,
}

impl From<CouplingTerm> for Modulation {
    fn from(coupling: CouplingTerm) -> Self {
        Modulation {
            coupling,
            ..Default::default()
        }
    }
}

/// Supplies a coupling term each control step from the wrench error and
/// the current phase.
pub trait CouplingProvider {
    fn coupling(&mut self, wrench_error: &Wrench, phase: &PhaseState) -> CouplingTerm;

    /// Called once before the first step of an episode.
    fn reset(&mut self) {}
}

/// No feedback.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCoupling;

impl CouplingProvider for NoCoupling {
    fn coupling(&mut self, _: &Wrench, _: &PhaseState) -> CouplingTerm {
        CouplingTerm::zero()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantCoupling(pub CouplingTerm);

impl CouplingProvider for ConstantCoupling {
    fn coupling(&mut self, _: &Wrench, _: &PhaseState) -> CouplingTerm {
        self.0
    }
}

/// Replays a precomputed coupling sequence, holding the last value.
#[derive(Debug, Clone)]
pub struct ScheduledCoupling {
    values: Vec<CouplingTerm>,
    next: usize,
}

impl ScheduledCoupling {
    pub fn new(values: Vec<CouplingTerm>) -> Self {
        ScheduledCoupling { values, next: 0 }
    }
}

impl CouplingProvider for ScheduledCoupling {
    fn coupling(&mut self, _: &Wrench, _: &PhaseState) -> CouplingTerm {
        let c = self
            .values
            .get(self.next)
            .or(self.values.last())
            .copied()
            .unwrap_or_default();
        self.next += 1;
        c
    }

    fn reset(&mut self) {
        self.next = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmpState {
    pub position: PositionState,
    pub orientation: OrientationState,
}

impl DmpState {
    pub fn p(&self) -> Vector3<f64> {
        self.position.p
    }

    pub fn q(&self) -> UnitQuaternion {
        self.orientation.q
    }
}

/// Position and orientation DMPs driven by one canonical system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillModel {
    pub alpha_s: f64,
    pub position: PositionDmp,
    pub orientation: OrientationDmp,
}

/// Current skill document format version.
pub const SKILL_FORMAT_VERSION: u32 = 1;
const SKILL_FORMAT: &str = "skilltune.skill";

#[derive(Serialize, Deserialize)]
struct SkillDocument {
    format: String,
    version: u32,
    skill: SkillModel,
}

impl SkillModel {
    pub fn new(position: PositionDmp, orientation: OrientationDmp) -> Result<Self> {
        let m = SkillModel {
            alpha_s: DEFAULT_ALPHA_S,
            position,
            orientation,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        self.position.validate()?;
        self.orientation.validate()?;
        if self.position.tau() != self.orientation.tau() {
            return Err(Error::InvalidArgument(format!(
                "position and orientation tau differ ({} vs {})",
                self.position.tau(),
                self.orientation.tau()
            )));
        }
        if !(self.alpha_s > 0.0) {
            return Err(Error::InvalidArgument("alpha_s must be positive".into()));
        }
        Ok(())
    }

    /// Fits both DMPs to a demonstration.
    pub fn fit(demo: &EpisodeRecord, basis_count: usize, alpha_p: f64, alpha_e: f64) -> Result<Self> {
        let times = demo.times();
        let position = PositionDmp::fit(&times, &demo.positions(), basis_count, alpha_p, DEFAULT_ALPHA_S)?;
        let orientation =
            OrientationDmp::fit(&times, &demo.orientations(), basis_count, alpha_e, DEFAULT_ALPHA_S)?;
        SkillModel::new(position, orientation)
    }

    /// Fits with the default gains and basis count.
    pub fn fit_default(demo: &EpisodeRecord) -> Result<Self> {
        Self::fit(demo, DEFAULT_BASIS_COUNT, DEFAULT_ALPHA, DEFAULT_ALPHA)
    }

    pub fn tau(&self) -> f64 {
        self.position.tau()
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Ok(SkillModel {
            alpha_s: self.alpha_s,
            position: self.position.with_tau(tau)?,
            orientation: self.orientation.with_tau(tau)?,
        })
    }

    pub fn initial_phase(&self) -> PhaseState {
        PhaseState::initial(self.alpha_s, self.tau())
    }

    pub fn initial_state(&self) -> DmpState {
        DmpState {
            position: self.position.initial_state(),
            orientation: self.orientation.initial_state(),
        }
    }

    /// One integration step with the coupling pathway active.
    pub fn step(&self, state: &DmpState, phase: &PhaseState, coupling: &CouplingTerm, dt: f64) -> Result<DmpState> {
        self.step_modulated(state, phase, &Modulation::from(*coupling), dt)
    }

    pub fn step_modulated(
        &self,
        state: &DmpState,
        phase: &PhaseState,
        modulation: &Modulation,
        dt: f64,
    ) -> Result<DmpState> {
        if !modulation.coupling.is_finite() {
            return Err(Error::NonFinite("coupling term"));
        }
        Ok(DmpState {
            position: self.position.step(&state.position, phase, modulation, dt)?,
            orientation: self
                .orientation
                .step(&state.orientation, phase, &modulation.coupling.orientation, dt)?,
        })
    }

    /// Open-loop rollout. The provider sees a zero wrench error; recorded
    /// wrenches are zero.
    pub fn rollout<P: CouplingProvider + ?Sized>(
        &self,
        provider: &mut P,
        duration: f64,
        dt: f64,
    ) -> Result<EpisodeRecord> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidStep(dt));
        }
        provider.reset();
        let steps = (duration / dt).round() as usize;
        let mut rows = Vec::with_capacity(steps + 1);
        let mut state = self.initial_state();
        let mut phase = self.initial_phase();
        let zero = [0.0; 6];
        for k in 0..=steps {
            rows.push(EpisodeRow {
                t: k as f64 * dt,
                p: state.p(),
                q: state.q(),
                f: zero,
            });
            if k == steps {
                break;
            }
            let c = provider.coupling(&zero, &phase);
            state = self.step(&state, &phase, &c, dt)?;
            phase = phase.step(self.alpha_s, dt)?;
        }
        Ok(EpisodeRecord::new(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SkillDocument {
            format: SKILL_FORMAT.into(),
            version: SKILL_FORMAT_VERSION,
            skill: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SkillDocument = serde_json::from_str(text)?;
        if doc.format != SKILL_FORMAT {
            return Err(Error::InvalidArgument(format!("not a skill document: {}", doc.format)));
        }
        if doc.version != SKILL_FORMAT_VERSION {
            return Err(Error::Version {
                found: doc.version,
                expected: SKILL_FORMAT_VERSION,
            });
        }
        doc.skill.validate()?;
        Ok(doc.skill)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
