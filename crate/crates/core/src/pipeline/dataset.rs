use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::config::{CorrectionConfig, DatasetSpec, EnvironmentSpec, ExperimentConfig, GroupSpec, PairConfig, SkillSpec};
use super::pairs::build_training_pairs;
use crate::dmp::{NoCoupling, SkillModel};
use crate::error::{Error, Result};
use crate::net::{Sequence, Wrench};
use crate::record::EpisodeRecord;
use crate::sim::{force_rmse, run_episode, sample_count, EnvPerturbation, EpisodeInputs, EpisodeSettings, EpisodeTrace, Scenario};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const DATASET_FORMAT: &str = "skilltune.dataset";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reference offsets that make a perturbed episode reproduce a desired
/// normal force.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    /// Added to the DMP position at each sample, m.
    pub offsets: Vec<Vector3<f64>>,
    pub iterations: usize,
    /// Noise-free force RMSE of the last iteration, N.
    pub rmse: f64,
}

/// Series stiffness of the contact and the impedance controller along `n`.
fn effective_stiffness(scenario: &Scenario, settings: &EpisodeSettings, n: &Vector3<f64>) -> f64 {
    let k_c = scenario.effective_contact().k_n;
    let k_d: f64 = (0..3).map(|i| settings.gains.stiffness[i] * n[i] * n[i]).sum();
    k_c * k_d / (k_c + k_d)
}

/// Iterative learning control of the reference depth: each noise-free run
/// shifts the reference along the nominal surface normal by a smoothed,
/// one-sample-ahead fraction of the force error divided by the effective
/// stiffness. The first offset stays zero so the corrected skill starts
/// where the nominal one does.
pub fn correct_reference(
    skill: &SkillModel,
    scenario: &Scenario,
    settings: &EpisodeSettings,
    duration: f64,
    desired: &[Wrench],
    cfg: &CorrectionConfig,
) -> Result<Correction> {
    cfg.validate()?;
    let quiet = settings.noiseless();
    let n = sample_count(duration, settings.dt);
    if desired.len() != n {
        return Err(Error::LengthMismatch(desired.len(), n));
    }
    let normal = scenario.surface.normal;
    let k_eff = effective_stiffness(scenario, settings, &normal);
    let half = cfg.smoothing / 2;
    let mut offsets = vec![Vector3::zeros(); n];
    let mut rmse = f64::INFINITY;
    let mut iterations = 0;
    while iterations <= cfg.max_iterations {
        let inputs = EpisodeInputs {
            expected: None,
            reference_offset: Some(&offsets),
        };
        let trace = run_episode(skill, &mut NoCoupling, scenario, &quiet, duration, inputs)?;
        rmse = force_rmse(&trace.clean, desired, 0..n)?;
        if rmse < cfg.tolerance || iterations == cfg.max_iterations {
            break;
        }
        let error: Vec<f64> = trace
            .clean
            .iter()
            .zip(desired)
            .map(|(a, d)| (0..3).map(|i| (a[i] - d[i]) * normal[i]).sum())
            .collect();
        let delta: Vec<f64> = (0..n).map(|k| cfg.gain * error[(k + 1).min(n - 1)] / k_eff).collect();
        for (k, o) in offsets.iter_mut().enumerate() {
            let window = (0..cfg.smoothing).map(|j| delta[(k + j).saturating_sub(half).min(n - 1)]);
            *o += normal * (window.sum::<f64>() / cfg.smoothing as f64);
        }
        offsets[0] = Vector3::zeros();
        iterations += 1;
    }
    if !(rmse <= cfg.acceptance) {
        return Err(Error::NotConverged(format!(
            "force RMSE {rmse:.3} N after {iterations} iterations exceeds {} N",
            cfg.acceptance
        )));
    }
    Ok(Correction {
        offsets,
        iterations,
        rmse,
    })
}

/// Sensor-noise seeds of a group's episodes.
fn seed_nominal(base: u64, group: usize) -> u64 {
    base + 1000 * group as u64
}

fn seed_perturbed(base: u64, group: usize, i: usize) -> u64 {
    seed_nominal(base, group) + 100 + i as u64
}

fn seed_corrected(base: u64, group: usize, i: usize) -> u64 {
    seed_nominal(base, group) + 200 + i as u64
}

/// A perturbed execution and its corrected counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedEpisode {
    pub perturbation: EnvPerturbation,
    pub perturbed: EpisodeTrace,
    pub corrected: EpisodeTrace,
    pub correction: Correction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecording {
    pub name: String,
    pub skill: SkillModel,
    pub nominal: EpisodeTrace,
    pub episodes: Vec<PerturbedEpisode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecording {
    pub name: String,
    pub groups: Vec<GroupRecording>,
}

/// Fits the group's skill to its sweep and runs it in the nominal scenario.
pub fn nominal_run(env: &EnvironmentSpec, skill: &SkillSpec, group: &GroupSpec, group_index: usize) -> Result<(SkillModel, EpisodeTrace)> {
    let scenario = env.scenario()?;
    let demo = group.sweep.demo(&scenario.surface, env.settings.dt)?;
    let model = skill.fit(&demo)?;
    let settings = EpisodeSettings {
        seed: seed_nominal(env.settings.seed, group_index),
        ..env.settings.clone()
    };
    let nominal = run_episode(&model, &mut NoCoupling, &scenario, &settings, env.duration, EpisodeInputs::default())?;
    Ok((model, nominal))
}

/// Records the nominal, perturbed and corrected episodes of one group.
pub fn record_group(
    env: &EnvironmentSpec,
    skill: &SkillSpec,
    correction: &CorrectionConfig,
    group: &GroupSpec,
    group_index: usize,
) -> Result<GroupRecording> {
    let (model, nominal) = nominal_run(env, skill, group, group_index)?;
    let base = env.scenario()?;
    let mut episodes = Vec::with_capacity(group.perturbations.len());
    for (i, p) in group.perturbations.iter().enumerate() {
        let scenario = base.with_perturbation(p.clone());
        scenario.validate()?;
        let run = |seed: u64, offsets: Option<&[Vector3<f64>]>| {
            let settings = EpisodeSettings {
                seed,
                ..env.settings.clone()
            };
            let inputs = EpisodeInputs {
                expected: None,
                reference_offset: offsets,
            };
            run_episode(&model, &mut NoCoupling, &scenario, &settings, env.duration, inputs)
        };
        let perturbed = run(seed_perturbed(env.settings.seed, group_index, i), None)?;
        let fix = correct_reference(&model, &scenario, &env.settings, env.duration, &nominal.clean, correction)?;
        let corrected = run(seed_corrected(env.settings.seed, group_index, i), Some(&fix.offsets))?;
        log::debug!(
            "{}: perturbation {} corrected to {:.3} N in {} iterations",
            group.name,
            i + 1,
            fix.rmse,
            fix.iterations
        );
        episodes.push(PerturbedEpisode {
            perturbation: p.clone(),
            perturbed,
            corrected,
            correction: fix,
        });
    }
    Ok(GroupRecording {
        name: group.name.clone(),
        skill: model,
        nominal,
        episodes,
    })
}

/// Records every group of a dataset.
pub fn record_dataset(cfg: &ExperimentConfig, spec: &DatasetSpec) -> Result<DatasetRecording> {
    let groups = spec
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| record_group(&cfg.environment, &cfg.skill, &cfg.correction, group, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetRecording {
        name: spec.name.clone(),
        groups,
    })
}

/// File index of a recorded dataset; paths are relative to its directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub name: String,
    /// Sample period of every episode, s.
    pub sample_dt: f64,
    /// DMP gain used for the skills and for training-pair extraction.
    pub skill_alpha: f64,
    pub pairs: PairConfig,
    pub groups: Vec<GroupEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupEntry {
    pub name: String,
    pub skill: PathBuf,
    /// Episode in the undisturbed environment; defines the expected force.
    pub nominal: PathBuf,
    pub episodes: Vec<EpisodeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeEntry {
    pub perturbation: EnvPerturbation,
    pub perturbed: PathBuf,
    pub corrected: PathBuf,
    pub correction_iterations: usize,
    /// Noise-free force RMSE reached by the correction, N.
    pub correction_rmse: f64,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(Error::InvalidArgument(format!("not a dataset manifest: {}", self.format)));
        }
        if self.version != DATASET_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: DATASET_FORMAT_VERSION,
            });
        }
        self.pairs.validate()?;
        if self.groups.is_empty() || self.groups.iter().any(|g| g.episodes.is_empty()) {
            return Err(Error::InvalidArgument("dataset manifest lists no perturbed episodes".into()));
        }
        Ok(())
    }

    /// Every file the manifest names, relative to its directory.
    pub fn files(&self) -> Vec<&Path> {
        let mut v = Vec::new();
        for g in &self.groups {
            v.push(g.skill.as_path());
            v.push(g.nominal.as_path());
            for e in &g.episodes {
                v.push(e.perturbed.as_path());
                v.push(e.corrected.as_path());
            }
        }
        v
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        m.validate()?;
        Ok(m)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

impl DatasetRecording {
    pub fn episode_count(&self) -> usize {
        self.groups.iter().map(|g| g.episodes.len()).sum()
    }

    /// Writes one directory per group holding the skill, the nominal and
    /// perturbed episodes and a `corrected/` subdirectory, plus the
    /// manifest at the top.
    pub fn write(&self, dir: &Path, skill_alpha: f64, pairs: &PairConfig, sample_dt: f64) -> Result<DatasetManifest> {
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let rel = PathBuf::from(&g.name);
            create_dir(&dir.join(&rel).join("corrected"))?;
            let skill = rel.join("skill.json");
            g.skill.save(&dir.join(&skill))?;
            let nominal = rel.join("nominal.csv");
            g.nominal.record.save(&dir.join(&nominal))?;
            let mut episodes = Vec::with_capacity(g.episodes.len());
            for (i, e) in g.episodes.iter().enumerate() {
                let perturbed = rel.join(format!("perturbed_{}.csv", i + 1));
                let corrected = rel.join("corrected").join(format!("corrected_{}.csv", i + 1));
                e.perturbed.record.save(&dir.join(&perturbed))?;
                e.corrected.record.save(&dir.join(&corrected))?;
                episodes.push(EpisodeEntry {
                    perturbation: e.perturbation.clone(),
                    perturbed,
                    corrected,
                    correction_iterations: e.correction.iterations,
                    correction_rmse: e.correction.rmse,
                });
            }
            groups.push(GroupEntry {
                name: g.name.clone(),
                skill,
                nominal,
                episodes,
            });
        }
        let manifest = DatasetManifest {
            format: DATASET_FORMAT.into(),
            version: DATASET_FORMAT_VERSION,
            name: self.name.clone(),
            sample_dt,
            skill_alpha,
            pairs: pairs.clone(),
            groups,
        };
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Training pairs of every perturbed episode, in manifest order.
    pub fn pairs(&self, cfg: &PairConfig, alpha: f64) -> Result<Vec<Sequence>> {
        let mut out = Vec::with_capacity(self.episode_count());
        for g in &self.groups {
            for e in &g.episodes {
                out.push(build_training_pairs(&g.nominal.record, &e.perturbed.record, &e.corrected.record, cfg, alpha)?);
            }
        }
        Ok(out)
    }
}

/// Episode records read back from a dataset directory.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub manifest: DatasetManifest,
    pub groups: Vec<LoadedGroup>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedGroup {
    pub skill: SkillModel,
    pub nominal: EpisodeRecord,
    pub perturbed: Vec<EpisodeRecord>,
    pub corrected: Vec<EpisodeRecord>,
}

impl LoadedDataset {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(dir)?;
        let groups = manifest
            .groups
            .iter()
            .map(|g| {
                let load = |p: &Path| {
                    let r = EpisodeRecord::load(&dir.join(p))?;
                    r.validate(manifest.sample_dt)?;
                    Ok(r)
                };
                Ok(LoadedGroup {
                    skill: SkillModel::load(&dir.join(&g.skill))?,
                    nominal: load(&g.nominal)?,
                    perturbed: g.episodes.iter().map(|e| load(&e.perturbed)).collect::<Result<_>>()?,
                    corrected: g.episodes.iter().map(|e| load(&e.corrected)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedDataset { manifest, groups })
    }

    /// Training pairs with the extraction settings stored in the manifest.
    pub fn pairs(&self) -> Result<Vec<Sequence>> {
        let mut out = Vec::new();
        for g in &self.groups {
            for (p, c) in g.perturbed.iter().zip(&g.corrected) {
                out.push(build_training_pairs(&g.nominal, p, c, &self.manifest.pairs, self.manifest.skill_alpha)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::ExperimentConfig;

    fn small() -> (ExperimentConfig, DatasetSpec) {
        let cfg = ExperimentConfig::default();
        let mut spec = cfg.dataset("fixed-endpoints").unwrap().clone();
        spec.groups[0].perturbations.truncate(2);
        (cfg, spec)
    }

    #[test]
    fn correction_meets_tolerance_and_keeps_start() {
        let (cfg, spec) = small();
        let rec = record_dataset(&cfg, &spec).unwrap();
        for e in &rec.groups[0].episodes {
            assert!(e.correction.rmse < cfg.correction.tolerance, "{}", e.correction.rmse);
            assert_eq!(e.correction.offsets[0], Vector3::zeros());
            let before = force_rmse(&e.perturbed.clean, &rec.groups[0].nominal.clean, 0..e.perturbed.clean.len()).unwrap();
            assert!(before > 1.0, "{before}");
        }
        // A raised workpiece needs the reference lifted.
        let lift = rec.groups[0].episodes[0].correction.offsets[800].z;
        assert!(lift > 0.0005 && lift < 0.0015, "{lift}");
    }

    #[test]
    fn unreachable_tolerance_is_an_error() {
        let (cfg, spec) = small();
        let (skill, nominal) = nominal_run(&cfg.environment, &cfg.skill, &spec.groups[0], 0).unwrap();
        let scenario = cfg.environment.scenario().unwrap().with_perturbation(spec.groups[0].perturbations[0].clone());
        let strict = CorrectionConfig {
            max_iterations: 1,
            tolerance: 1e-6,
            acceptance: 1e-6,
            ..Default::default()
        };
        let r = correct_reference(&skill, &scenario, &cfg.environment.settings, cfg.environment.duration, &nominal.clean, &strict);
        assert!(matches!(r, Err(Error::NotConverged(_))));
    }

    #[test]
    fn written_dataset_loads_back_to_identical_pairs() {
        let (cfg, spec) = small();
        let rec = record_dataset(&cfg, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = rec.write(dir.path(), cfg.skill.alpha, &cfg.pairs, cfg.environment.settings.dt).unwrap();
        for f in manifest.files() {
            assert!(dir.path().join(f).is_file(), "{}", f.display());
        }
        let loaded = LoadedDataset::load(dir.path()).unwrap();
        assert_eq!(loaded.groups[0].nominal, rec.groups[0].nominal.record);
        assert_eq!(loaded.groups[0].skill, rec.groups[0].skill);
        assert_eq!(loaded.pairs().unwrap(), rec.pairs(&cfg.pairs, cfg.skill.alpha).unwrap());
    }
}
