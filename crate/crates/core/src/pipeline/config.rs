use std::collections::HashSet;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dmp::SkillModel;
use crate::error::{Error, Result};
use crate::net::TrainConfig;
use crate::record::EpisodeRecord;
use crate::sim::{ContactConfig, EnvPerturbation, EpisodeSettings, HeightField, Scenario, SweepSpec, WorkpieceSurface};

/// Sinusoidal ripple added to the workpiece plane along its first tangent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RippleSpec {
    /// Tangent coordinate range covered by the height grid, m.
    pub u_range: [f64; 2],
    /// Grid spacing, m.
    pub spacing: f64,
    /// Peak height, m.
    pub amplitude: f64,
    /// Wavelength, m.
    pub wavelength: f64,
}

impl Default for RippleSpec {
    fn default() -> Self {
        RippleSpec {
            u_range: [-0.1, 0.1],
            spacing: 0.001,
            amplitude: 0.000375,
            wavelength: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSpec {
    /// Point on the workpiece plane, m.
    pub origin: Vector3<f64>,
    /// Outward normal; normalized on build.
    pub normal: Vector3<f64>,
    pub ripple: Option<RippleSpec>,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec {
            origin: Vector3::new(0.5, 0.0, 0.2),
            normal: Vector3::z(),
            ripple: Some(RippleSpec::default()),
        }
    }
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<WorkpieceSurface> {
        let s = WorkpieceSurface::flat(self.origin, self.normal)?;
        match &self.ripple {
            Some(r) => s.with_height(HeightField::ripple(r.u_range, r.spacing, r.amplitude, r.wavelength)?),
            None => Ok(s),
        }
    }
}

/// Nominal workpiece, contact model, controller settings and episode length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub surface: SurfaceSpec,
    pub contact: ContactConfig,
    pub settings: EpisodeSettings,
    /// Episode length, s.
    pub duration: f64,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec {
            surface: SurfaceSpec::default(),
            contact: ContactConfig::default(),
            settings: EpisodeSettings::default(),
            duration: 25.0,
        }
    }
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        self.surface.build()?;
        self.contact.validate()?;
        self.settings.validate()?;
        if !(self.duration > self.settings.dt) || !self.duration.is_finite() {
            return Err(Error::Config(format!("duration must exceed dt, got {}", self.duration)));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let s = Scenario {
            surface: self.surface.build()?,
            contact: self.contact.clone(),
            perturbation: EnvPerturbation::default(),
        };
        s.validate()?;
        Ok(s)
    }
}

/// DMP settings of the demonstrated skills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkillSpec {
    pub basis_count: usize,
    /// Transformation-system gain for position and orientation; `β = α/4`.
    pub alpha: f64,
}

impl Default for SkillSpec {
    fn default() -> Self {
        SkillSpec {
            basis_count: 25,
            alpha: 100.0,
        }
    }
}

impl SkillSpec {
    pub fn fit(&self, demo: &EpisodeRecord) -> Result<SkillModel> {
        SkillModel::fit(demo, self.basis_count, self.alpha, self.alpha)
    }
}

/// Iterative depth correction that produces the corrected episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionConfig {
    /// Fraction of the normal-force error converted to depth per iteration.
    pub gain: f64,
    /// Stop once the noise-free force RMSE is below this, N.
    pub tolerance: f64,
    /// Fail if the RMSE is still above this after `max_iterations`, N.
    pub acceptance: f64,
    pub max_iterations: usize,
    /// Odd moving-average window applied to each update, samples.
    pub smoothing: usize,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            gain: 0.7,
            tolerance: 0.2,
            acceptance: 0.5,
            max_iterations: 100,
            smoothing: 5,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gain > 0.0
            && self.gain <= 1.0
            && self.tolerance > 0.0
            && self.acceptance >= self.tolerance
            && self.smoothing % 2 == 1;
        if !ok {
            return Err(Error::Config(format!("invalid correction settings: {self:?}")));
        }
        Ok(())
    }
}

/// Extraction of training pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairConfig {
    /// Basis count of the DMPs fitted to nominal and corrected episodes.
    pub basis_count: usize,
    /// Keep every n-th sample; the feedback model runs at this period.
    pub decimation: usize,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            basis_count: 100,
            decimation: 10,
        }
    }
}

impl PairConfig {
    pub fn validate(&self) -> Result<()> {
        if self.basis_count < 2 || self.decimation == 0 {
            return Err(Error::Config(format!("invalid pair settings: {self:?}")));
        }
        Ok(())
    }
}

/// One demonstrated skill executed under several perturbations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    #[serde(default)]
    pub sweep: SweepSpec,
    pub perturbations: Vec<EnvPerturbation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub groups: Vec<GroupSpec>,
}

impl DatasetSpec {
    pub fn group(&self, name: &str) -> Result<&GroupSpec> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::Config(format!("dataset {} has no group {name}", self.name)))
    }

    pub fn episode_count(&self) -> usize {
        self.groups.iter().map(|g| g.perturbations.len()).sum()
    }
}

/// Closed-loop test: which trained models run, where and how long.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    /// Dataset whose models are evaluated.
    pub dataset: String,
    /// Group whose skill is executed.
    pub group: String,
    pub perturbation: EnvPerturbation,
    /// Sensor-noise seed of the evaluation episodes.
    pub seed: u64,
    /// Length of the reported prefix window, s.
    pub prefix: f64,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        EvaluationSpec {
            dataset: "fixed-endpoints".into(),
            group: "sweep".into(),
            perturbation: EnvPerturbation::offset(Vector3::new(0.0, 0.0, 0.0008)),
            seed: 999,
            prefix: 12.5,
        }
    }
}

/// Everything needed to regenerate datasets, train and evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub skill: SkillSpec,
    pub correction: CorrectionConfig,
    pub pairs: PairConfig,
    pub train: TrainConfig,
    /// Training seeds of the model comparison.
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetSpec>,
    pub evaluation: EvaluationSpec,
}

/// Workpiece shifts used by both shipped datasets, m along the normal,
/// followed by two tilts about the sweep-normal axis, rad.
const OFFSETS: [f64; 6] = [1.0e-3, 0.6e-3, 0.3e-3, -0.3e-3, -0.6e-3, -1.0e-3];
const TILT: f64 = 0.008;

/// Gradient-norm cap of the shipped experiment. Without it the recurrent
/// model diverges on some seeds of the varied-endpoints dataset.
pub const EXPERIMENT_CLIP: f64 = 5.0;

fn training_perturbations() -> Vec<EnvPerturbation> {
    let mut v: Vec<EnvPerturbation> = OFFSETS
        .iter()
        .map(|&dz| EnvPerturbation::offset(Vector3::new(0.0, 0.0, dz)))
        .collect();
    for a in [TILT, -TILT] {
        v.push(EnvPerturbation {
            tilt_angle: a,
            ..Default::default()
        });
    }
    v
}

fn shipped_sweep() -> SweepSpec {
    SweepSpec {
        hover: 0.002,
        approach_time: 4.0,
        ..SweepSpec::default()
    }
}

/// Eight sweeps with distinct start and end points, one perturbation each.
fn varied_groups() -> Vec<GroupSpec> {
    let lines: [([f64; 2], f64); 8] = [
        ([-0.08, 0.0], 0.15),
        ([-0.07, 0.01], 0.13),
        ([-0.09, -0.01], 0.17),
        ([-0.06, 0.02], 0.12),
        ([-0.075, -0.02], 0.16),
        ([-0.085, 0.015], 0.14),
        ([-0.065, -0.015], 0.15),
        ([-0.08, 0.005], 0.16),
    ];
    lines
        .iter()
        .zip(training_perturbations())
        .enumerate()
        .map(|(i, ((start, length), p))| GroupSpec {
            name: format!("sweep-{}", i + 1),
            sweep: SweepSpec {
                start: *start,
                length: *length,
                ..shipped_sweep()
            },
            perturbations: vec![p],
        })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            environment: EnvironmentSpec::default(),
            skill: SkillSpec::default(),
            correction: CorrectionConfig::default(),
            pairs: PairConfig::default(),
            train: TrainConfig {
                clip_grad_norm: Some(EXPERIMENT_CLIP),
                ..TrainConfig::default()
            },
            seeds: (0..5).collect(),
            datasets: vec![
                DatasetSpec {
                    name: "varied-endpoints".into(),
                    groups: varied_groups(),
                },
                DatasetSpec {
                    name: "fixed-endpoints".into(),
                    groups: vec![GroupSpec {
                        name: "sweep".into(),
                        sweep: shipped_sweep(),
                        perturbations: training_perturbations(),
                    }],
                },
            ],
            evaluation: EvaluationSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        if self.skill.basis_count < 2 || !(self.skill.alpha > 0.0) {
            return Err(Error::Config(format!("invalid skill settings: {:?}", self.skill)));
        }
        self.correction.validate()?;
        self.pairs.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one training seed is required".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("at least one dataset is required".into()));
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if !valid_name(&d.name) || !names.insert(d.name.as_str()) {
                return Err(Error::Config(format!("dataset names must be unique file-safe words, got {:?}", d.name)));
            }
            if d.groups.is_empty() {
                return Err(Error::Config(format!("dataset {} has no groups", d.name)));
            }
            let mut groups = HashSet::new();
            for g in &d.groups {
                if !valid_name(&g.name) || !groups.insert(g.name.as_str()) {
                    return Err(Error::Config(format!("group names must be unique file-safe words, got {:?}", g.name)));
                }
                if g.perturbations.is_empty() {
                    return Err(Error::Config(format!("group {} needs at least one perturbation", g.name)));
                }
                if (g.sweep.duration - self.environment.duration).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "group {}: sweep duration {} differs from the episode duration {}",
                        g.name, g.sweep.duration, self.environment.duration
                    )));
                }
                g.sweep.validate()?;
                for p in &g.perturbations {
                    p.validate()?;
                }
            }
        }
        self.dataset(&self.evaluation.dataset)?.group(&self.evaluation.group)?;
        self.evaluation.perturbation.validate()?;
        if !(self.evaluation.prefix > 0.0) {
            return Err(Error::Config("evaluation prefix must be positive".into()));
        }
        Ok(())
    }

    pub fn dataset(&self, name: &str) -> Result<&DatasetSpec> {
        self.datasets
            .iter()
            .find(|d| d.name == name)
            .ok_or_else(|| Error::Config(format!("no dataset named {name}")))
    }

    /// Seconds between feedback-model evaluations.
    pub fn control_period(&self) -> f64 {
        self.environment.settings.dt * self.pairs.decimation as f64
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}
