use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use skilltune_core::net::{random_case, write_loss_csv, Checkpoint, TrainConfig};
use skilltune_core::pipeline::svg::{Plot, Series};
use skilltune_core::pipeline::{
    evaluate_experiment, record_dataset, run_comparison, train_model, write_closed_loop, write_comparison, Candidate,
    ExperimentConfig, LoadedDataset, TrainingSet, MANIFEST_FILE,
};

use crate::args::{CompareArgs, DemoArgs, GradcheckArgs, RolloutArgs, TrainArgs};

const DEMO_CONFIG: &str = include_str!("../../../configs/demo.toml");
const EXPERIMENT_CONFIG: &str = include_str!("../../../configs/experiment.toml");

/// Finite-difference step of `gradcheck`.
pub const GRADCHECK_EPSILON: f64 = 1e-6;
/// Largest accepted relative gradient error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
/// Half-width of the uniform weights drawn by `gradcheck`.
pub const GRADCHECK_WEIGHT: f64 = 0.1;

/// What a command reports back for its run manifest.
#[derive(Debug)]
pub struct Outcome {
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
}

fn load_config(path: Option<&Path>, builtin: &str) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            if !p.is_file() {
                bail!("config file {} does not exist", p.display());
            }
            ExperimentConfig::load(p).with_context(|| format!("cannot load config {}", p.display()))
        }
        None => Ok(ExperimentConfig::from_toml(builtin)?),
    }
}

fn epochs(n: Option<u64>) -> Option<usize> {
    n.map(|e| e as usize)
}

fn write(path: PathBuf, bytes: &[u8], outputs: &mut Vec<PathBuf>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
    outputs.push(path);
    Ok(())
}

pub fn demo(a: &DemoArgs) -> Result<Outcome> {
    let mut cfg = load_config(a.config.as_deref(), DEMO_CONFIG)?;
    if let Some(s) = a.seed {
        cfg.environment.settings.seed = s;
    }
    cfg.validate()?;
    let out = &a.out.out;
    let mut outputs = Vec::new();
    for spec in &cfg.datasets {
        let rec = record_dataset(&cfg, spec).with_context(|| format!("recording dataset {}", spec.name))?;
        let dir = out.join(&spec.name);
        let manifest = rec.write(&dir, cfg.skill.alpha, &cfg.pairs, cfg.environment.settings.dt)?;
        for g in &rec.groups {
            for (i, e) in g.episodes.iter().enumerate() {
                info!(
                    "{}/{} perturbation {}: corrected in {} iterations to {:.3} N RMSE",
                    spec.name,
                    g.name,
                    i + 1,
                    e.correction.iterations,
                    e.correction.rmse
                );
            }
        }
        outputs.extend(manifest.files().into_iter().map(|f| dir.join(f)));
        outputs.push(dir.join(MANIFEST_FILE));
        println!("{}: {} groups, {} perturbed episodes in {}", spec.name, rec.groups.len(), rec.episode_count(), dir.display());
    }
    Ok(Outcome {
        config: serde_json::to_value(&cfg)?,
        seed: Some(cfg.environment.settings.seed),
        outputs,
    })
}

pub fn train(a: &TrainArgs) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(_) => load_config(a.config.as_deref(), EXPERIMENT_CONFIG)?.train,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs(a.epochs) {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let data = LoadedDataset::load(&a.data).with_context(|| format!("cannot load dataset {}", a.data.display()))?;
    let set = TrainingSet::new(&data.pairs()?)?;
    let period = data.manifest.sample_dt * data.manifest.pairs.decimation as f64;
    info!(
        "training {} on {} sequences of {} steps for {} epochs",
        a.model,
        set.sequences.len(),
        set.sequences[0].inputs.len(),
        cfg.epochs
    );
    let model = train_model(a.model, &set, &cfg, period)?;

    let out = &a.out.out;
    let stem = format!("{}_seed{}", a.model, cfg.seed);
    let mut outputs = Vec::new();
    write(out.join(format!("{stem}.json")), model.checkpoint.to_json()?.as_bytes(), &mut outputs)?;
    let mut csv = Vec::new();
    write_loss_csv(&mut csv, &model.loss_curve)?;
    write(out.join(format!("loss_{stem}.csv")), &csv, &mut outputs)?;
    let mut plot = Plot::new(&format!("Training loss, {} seed {}", a.model, cfg.seed), "epoch", "mean sequence SSR (normalized)");
    plot.log_y = true;
    let points = model.loss_curve.iter().enumerate().map(|(i, l)| ((i + 1) as f64, *l)).collect();
    plot.series.push(Series::new(a.model.to_string(), points, "#d62728"));
    write(out.join(format!("loss_{stem}.svg")), plot.to_svg().as_bytes(), &mut outputs)?;
    println!("{} seed {}: final SSR {:.6} after {} epochs", a.model, cfg.seed, model.checkpoint.final_ssr, cfg.epochs);
    Ok(Outcome {
        config: serde_json::json!({ "data": a.data, "model": a.model, "train": cfg }),
        seed: Some(cfg.seed),
        outputs,
    })
}

pub fn compare(a: &CompareArgs) -> Result<Outcome> {
    let mut cfg = load_config(a.config.as_deref(), EXPERIMENT_CONFIG)?;
    if let Some(s) = a.seed {
        cfg.seeds = vec![s];
    }
    if let Some(e) = epochs(a.epochs) {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let specs = if a.dataset.is_empty() {
        cfg.datasets.iter().collect()
    } else {
        a.dataset.iter().map(|n| cfg.dataset(n)).collect::<skilltune_core::Result<Vec<_>>>()?
    };
    let out = &a.out.out;
    let mut outputs = Vec::new();
    for spec in specs {
        info!("dataset {}: recording and training {} seeds", spec.name, cfg.seeds.len());
        let c = run_comparison(&cfg, spec).with_context(|| format!("comparison on {}", spec.name))?;
        outputs.extend(write_comparison(out, &c.report, &c.models, true)?);
        let r = &c.report;
        println!("{}: PMDRNN final SSR below PMNN on {}/{} seeds, mean reduction {:.1}%", r.dataset, r.pmdrnn_better, r.seeds, 100.0 * r.mean_reduction);
        for row in &r.rows {
            println!("  {:<7} seed {:<3} final SSR {:.6}", row.model, row.seed, row.final_ssr);
        }
    }
    Ok(Outcome {
        config: serde_json::to_value(&cfg)?,
        seed: a.seed,
        outputs,
    })
}

pub fn rollout(a: &RolloutArgs) -> Result<Outcome> {
    let mut cfg = load_config(a.config.as_deref(), EXPERIMENT_CONFIG)?;
    if let Some(s) = a.seed {
        cfg.evaluation.seed = s;
    }
    cfg.validate()?;
    let mut loaded: Vec<(String, Checkpoint)> = Vec::new();
    for f in a.feedback.iter().filter(|f| f.as_str() != "none") {
        let path = Path::new(f);
        let ck = Checkpoint::load(path).with_context(|| format!("cannot load checkpoint {}", path.display()))?;
        let label = path.file_stem().map_or_else(|| f.clone(), |s| s.to_string_lossy().into_owned());
        loaded.push((label, ck));
    }
    let candidates: Vec<Candidate<'_>> = loaded.iter().map(|(l, ck)| Candidate { label: l, checkpoint: ck }).collect();
    let (report, traces) = evaluate_experiment(&cfg, &candidates)?;
    let outputs = write_closed_loop(&a.out.out, &report, &traces)?;
    if let Some([lo, hi]) = report.desired_range {
        println!("desired normal force {lo:.2} to {hi:.2} N");
    }
    let b = &report.baseline;
    println!("{:<24} RMSE {:.3} N (first {} s: {:.3} N)", b.label, b.rmse_full, report.prefix, b.rmse_prefix);
    for r in &report.runs {
        println!(
            "{:<24} RMSE {:.3} N (first {} s: {:.3} N), {:.1}% below no feedback",
            r.label,
            r.rmse_full,
            report.prefix,
            r.rmse_prefix,
            100.0 * r.reduction_full
        );
    }
    Ok(Outcome {
        config: serde_json::json!({ "experiment": cfg, "feedback": a.feedback }),
        seed: Some(cfg.evaluation.seed),
        outputs,
    })
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<Outcome> {
    let dims = TrainConfig::default().dims();
    let (model, seq) = random_case(a.model, dims, a.steps as usize, GRADCHECK_WEIGHT, a.seed)?;
    let report = model.grad_check(&seq, GRADCHECK_EPSILON)?;
    let mut outputs = Vec::new();
    let path = a.out.out.join(format!("gradcheck_{}_seed{}.json", a.model, a.seed));
    write(path, serde_json::to_string_pretty(&report)?.as_bytes(), &mut outputs)?;
    println!(
        "{} max relative error {:.3e} over {} parameters (epsilon {:e}, worst {}[{}])",
        a.model, report.max_rel_error, report.parameters, report.epsilon, report.worst_tensor, report.worst_index
    );
    if !(report.max_rel_error < GRADCHECK_TOLERANCE) {
        bail!("max relative error {:.3e} exceeds {GRADCHECK_TOLERANCE:e}", report.max_rel_error);
    }
    Ok(Outcome {
        config: serde_json::json!({
            "model": a.model,
            "dims": dims,
            "steps": a.steps,
            "epsilon": GRADCHECK_EPSILON,
            "weight": GRADCHECK_WEIGHT,
        }),
        seed: Some(a.seed),
        outputs,
    })
}
