use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::contact::{contact_force, ContactConfig};
use super::impedance::{impedance_step, ImpedanceGains, ImpedanceState};
use super::surface::WorkpieceSurface;
use crate::dmp::{CouplingProvider, CouplingTerm, SkillModel};
use crate::error::{Error, Result};
use crate::math::UnitQuaternion;
use crate::net::Wrench;
use crate::record::{EpisodeRecord, EpisodeRow};

/// Tool positions farther than this from the origin (m) abort an episode.
pub const DIVERGENCE_LIMIT: f64 = 10.0;

/// Changes to the workpiece relative to the nominal setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvPerturbation {
    /// Workpiece translation, m.
    pub offset: Vector3<f64>,
    /// Tilt axis; need not be normalized.
    pub tilt_axis: Vector3<f64>,
    /// Tilt about `tilt_axis` through the surface origin, rad.
    pub tilt_angle: f64,
    /// Factor applied to the contact stiffness.
    pub stiffness_scale: f64,
}

impl Default for EnvPerturbation {
    fn default() -> Self {
        EnvPerturbation {
            offset: Vector3::zeros(),
            tilt_axis: Vector3::y(),
            tilt_angle: 0.0,
            stiffness_scale: 1.0,
        }
    }
}

impl EnvPerturbation {
    pub fn offset(offset: Vector3<f64>) -> Self {
        EnvPerturbation {
            offset,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset.iter().chain(self.tilt_axis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("perturbation"));
        }
        if !(self.tilt_angle.abs() < 0.2) {
            return Err(Error::Config(format!("tilt angle must satisfy |angle| < 0.2 rad, got {}", self.tilt_angle)));
        }
        if self.tilt_angle != 0.0 && self.tilt_axis.norm() < 1e-12 {
            return Err(Error::Config("tilt axis must be nonzero".into()));
        }
        if !(0.25..=4.0).contains(&self.stiffness_scale) {
            return Err(Error::Config(format!(
                "stiffness scale must lie in [0.25, 4], got {}",
                self.stiffness_scale
            )));
        }
        Ok(())
    }

    pub fn is_nominal(&self) -> bool {
        self.offset == Vector3::zeros() && self.tilt_angle == 0.0 && self.stiffness_scale == 1.0
    }
}

/// Workpiece, contact model and perturbation of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub surface: WorkpieceSurface,
    #[serde(default)]
    pub contact: ContactConfig,
    #[serde(default)]
    pub perturbation: EnvPerturbation,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.surface.validate()?;
        self.contact.validate()?;
        self.perturbation.validate()
    }

    pub fn with_perturbation(&self, perturbation: EnvPerturbation) -> Self {
        Scenario {
            perturbation,
            ..self.clone()
        }
    }

    /// The surface after applying offset and tilt.
    pub fn effective_surface(&self) -> WorkpieceSurface {
        let p = &self.perturbation;
        let tilt = if p.tilt_angle == 0.0 {
            UnitQuaternion::IDENTITY
        } else {
            UnitQuaternion::from_axis_angle(&p.tilt_axis, p.tilt_angle)
        };
        self.surface.transformed(&p.offset, &tilt)
    }

    /// The contact model after stiffness scaling.
    pub fn effective_contact(&self) -> ContactConfig {
        ContactConfig {
            k_n: self.contact.k_n * self.perturbation.stiffness_scale,
            ..self.contact.clone()
        }
    }
}

/// Controller, integration and sensor settings of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeSettings {
    pub gains: ImpedanceGains,
    /// Control and recording period, s.
    pub dt: f64,
    /// Physics substeps per control period.
    pub substeps: usize,
    /// Standard deviation of force sensor noise, N.
    pub force_noise: f64,
    /// Standard deviation of torque sensor noise, N·m.
    pub torque_noise: f64,
    /// Seed of the sensor noise.
    pub seed: u64,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        EpisodeSettings {
            gains: ImpedanceGains::default(),
            dt: crate::SAMPLE_DT,
            substeps: 10,
            force_noise: 0.25,
            torque_noise: 0.005,
            seed: 0,
        }
    }
}

impl EpisodeSettings {
    pub fn noiseless(&self) -> Self {
        EpisodeSettings {
            force_noise: 0.0,
            torque_noise: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidStep(self.dt));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if !(self.force_noise >= 0.0 && self.torque_noise >= 0.0) {
            return Err(Error::Config("sensor noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Optional per-step signals fed into an episode.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeInputs<'a> {
    /// Expected wrench per recorded sample; the wrench error handed to the
    /// coupling provider is measured minus expected. Zero when absent.
    pub expected: Option<&'a [Wrench]>,
    /// Offset added to the DMP position to form the impedance reference.
    pub reference_offset: Option<&'a [Vector3<f64>]>,
}

/// Recorded episode plus simulator internals.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    /// Commanded pose and measured (noisy) wrench per sample.
    pub record: EpisodeRecord,
    /// Noise-free contact wrench per sample.
    pub clean: Vec<Wrench>,
    /// Actual tool position per sample, m.
    pub tool: Vec<Vector3<f64>>,
    /// Coupling term applied after each sample (zero after the last).
    pub coupling: Vec<CouplingTerm>,
}

/// Number of recorded samples for `duration` at period `dt`.
pub fn sample_count(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize + 1
}

/// Runs the skill against the scenario: DMP reference, impedance-tracked
/// tool, contact wrench, wrench error, coupling term back into the DMP.
pub fn run_episode(
    skill: &SkillModel,
    provider: &mut dyn CouplingProvider,
    scenario: &Scenario,
    settings: &EpisodeSettings,
    duration: f64,
    inputs: EpisodeInputs<'_>,
) -> Result<EpisodeTrace> {
    scenario.validate()?;
    settings.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let n = sample_count(duration, settings.dt);
    for len in [inputs.expected.map(<[_]>::len), inputs.reference_offset.map(<[_]>::len)]
        .into_iter()
        .flatten()
    {
        if len != n {
            return Err(Error::LengthMismatch(len, n));
        }
    }

    let surface = scenario.effective_surface();
    let contact = scenario.effective_contact();
    let h = settings.dt / settings.substeps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let force_noise = Normal::new(0.0, settings.force_noise).map_err(|e| Error::Config(e.to_string()))?;
    let torque_noise = Normal::new(0.0, settings.torque_noise).map_err(|e| Error::Config(e.to_string()))?;

    provider.reset();
    let mut dmp = skill.initial_state();
    let mut phase = skill.initial_phase();
    let reference = |k: usize, p: Vector3<f64>| p + inputs.reference_offset.map_or(Vector3::zeros(), |o| o[k]);
    let mut tool = ImpedanceState {
        x: reference(0, dmp.p()),
        v: Vector3::zeros(),
    };

    let mut trace = EpisodeTrace {
        record: EpisodeRecord::new(Vec::with_capacity(n)),
        clean: Vec::with_capacity(n),
        tool: Vec::with_capacity(n),
        coupling: Vec::with_capacity(n),
    };
    for k in 0..n {
        let t = k as f64 * settings.dt;
        let x_ref = reference(k, dmp.p());
        let clean = contact_force(&tool.x, &tool.v, &surface, &contact);
        let mut measured = clean;
        for (i, m) in measured.iter_mut().enumerate() {
            let noise = if i < 3 { &force_noise } else { &torque_noise };
            *m += noise.sample(&mut rng);
        }
        trace.record.rows.push(EpisodeRow {
            t,
            p: x_ref,
            q: dmp.q(),
            f: measured,
        });
        trace.clean.push(clean);
        trace.tool.push(tool.x);
        if k + 1 == n {
            trace.coupling.push(CouplingTerm::zero());
            break;
        }

        let mut error = measured;
        if let Some(expected) = inputs.expected {
            for (e, x) in error.iter_mut().zip(&expected[k]) {
                *e -= x;
            }
        }
        let c = provider.coupling(&error, &phase);
        trace.coupling.push(c);

        for _ in 0..settings.substeps {
            let w = contact_force(&tool.x, &tool.v, &surface, &contact);
            tool = impedance_step(&settings.gains, &x_ref, &Vector3::new(w[0], w[1], w[2]), &tool, h)?;
        }
        dmp = skill.step(&dmp, &phase, &c, settings.dt)?;
        phase = phase.step(skill.alpha_s, settings.dt)?;
        let norm = tool.x.norm().max(dmp.p().norm());
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(Error::SimulationDiverged {
                t: t + settings.dt,
                norm,
            });
        }
    }
    Ok(trace)
}

/// Root-mean-square difference of the normal force channel (`fz`) over
/// the samples in `range`.
pub fn force_rmse(actual: &[Wrench], desired: &[Wrench], range: std::ops::Range<usize>) -> Result<f64> {
    if actual.len() != desired.len() {
        return Err(Error::LengthMismatch(actual.len(), desired.len()));
    }
    if range.is_empty() || range.end > actual.len() {
        return Err(Error::InvalidArgument(format!(
            "sample range {range:?} outside 0..{}",
            actual.len()
        )));
    }
    let sum: f64 = range.clone().map(|k| (actual[k][2] - desired[k][2]).powi(2)).sum();
    Ok((sum / range.len() as f64).sqrt())
}
