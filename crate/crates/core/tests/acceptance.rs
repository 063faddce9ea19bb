//! Acceptance suite: one PASS/FAIL line per criterion. Runs with a custom
//! harness so the lines are always printed; exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skilltune_core::dmp::{orientation_error, NoCoupling, OrientationDmp};
use skilltune_core::math::{PhaseState, DEFAULT_ALPHA_S};
use skilltune_core::net::{grad_check, Checkpoint, Dims, FeedbackState, ModelKind, Network, PmdrnnParams, PmnnParams, Sequence, TrainConfig};
use skilltune_core::pipeline::{
    evaluate_models, reference, run_comparison, train_model, training_set, record_dataset, DatasetComparison,
    ExperimentConfig,
};
use skilltune_core::{EpisodeRecord, EpisodeRow, SkillModel, UnitQuaternion};

type Outcome = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(format!("{detail}; {:.1} s", elapsed.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()))
    }
}

fn randomize<N: Network>(net: &mut N, rng: &mut ChaCha8Rng, scale: f64) {
    for (_, t) in net.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

fn random_sequence(rng: &mut ChaCha8Rng, steps: usize, output: usize) -> Sequence {
    let tau = rng.random_range(0.5..3.0);
    let phases = PhaseState::grid(DEFAULT_ALPHA_S, tau, tau / steps as f64, steps).unwrap();
    Sequence {
        inputs: (0..steps).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect(),
        phases,
        targets: (0..steps)
            .map(|_| (0..output).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    }
}

fn random_dims(rng: &mut ChaCha8Rng) -> Dims {
    Dims {
        hidden: rng.random_range(1..=20),
        output: if rng.random_bool(0.5) { 3 } else { 6 },
        phase_bases: rng.random_range(1..=25),
    }
}

/// Half-width of the uniform weight distribution in the gradient check.
const SMALL_WEIGHT: f64 = 0.1;

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_rnn, mut worst_nn) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let dims = random_dims(&mut rng);
        let steps = rng.random_range(5..=10);
        let mut p = PmdrnnParams::init(dims, false, &mut rng).unwrap();
        randomize(&mut p, &mut rng, SMALL_WEIGHT);
        let seq = random_sequence(&mut rng, steps, dims.output);
        worst_rnn = worst_rnn.max(grad_check(&p, &seq, 1e-6).unwrap().max_rel_error);

        let dims = random_dims(&mut rng);
        let steps = rng.random_range(5..=10);
        let mut p = PmnnParams::init(dims, &mut rng).unwrap();
        randomize(&mut p, &mut rng, SMALL_WEIGHT);
        let seq = random_sequence(&mut rng, steps, dims.output);
        worst_nn = worst_nn.max(grad_check(&p, &seq, 1e-6).unwrap().max_rel_error);
    }
    let detail = format!("50 + 50 networks, worst relative error PMDRNN {worst_rnn:.2e}, PMNN {worst_nn:.2e} (limit 1e-5)");
    if worst_rnn < 1e-5 && worst_nn < 1e-5 {
        within(start.elapsed(), Duration::from_secs(60), detail)
    } else {
        Err(detail)
    }
}

fn min_jerk(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

fn line_demo(duration: f64, dt: f64) -> EpisodeRecord {
    let n = (duration / dt).round() as usize + 1;
    EpisodeRecord::new(
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                EpisodeRow {
                    t,
                    p: Vector3::new(0.1 * min_jerk(t / duration), 0.0, 0.0),
                    q: UnitQuaternion::IDENTITY,
                    f: [0.0; 6],
                }
            })
            .collect(),
    )
}

fn dmp_fidelity() -> Outcome {
    let demo = line_demo(5.0, 0.02);
    let skill = SkillModel::fit_default(&demo).unwrap();
    let roll = skill.rollout(&mut NoCoupling, 5.0, 0.02).unwrap();
    let sq: f64 = demo.rows.iter().zip(&roll.rows).map(|(a, b)| (a.p - b.p).norm_squared()).sum();
    let rmse = (sq / demo.len() as f64).sqrt();
    let path = 0.1;

    let long = skill.rollout(&mut NoCoupling, 10.0, 0.02).unwrap();
    let goal_err = (long.rows.last().unwrap().p - skill.position.goal()).norm();

    // Same phase grid: (τ, dt) against (2τ, 2dt) sample by sample, and
    // against (2τ, dt) on every second sample.
    let slow_skill = skill.clone().with_tau(10.0).unwrap();
    let base = skill.rollout(&mut NoCoupling, 5.0, 0.002).unwrap();
    let coarse = slow_skill.rollout(&mut NoCoupling, 10.0, 0.004).unwrap();
    let fine = slow_skill.rollout(&mut NoCoupling, 10.0, 0.002).unwrap();
    let scaling = base
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| (r.p - coarse.rows[k].p).norm().max((r.p - fine.rows[2 * k].p).norm()))
        .fold(0.0, f64::max);

    let detail = format!(
        "fit RMSE {:.3}% of path, |p(2τ) − g| {:.2e}·range, temporal scaling {:.2e}·range",
        100.0 * rmse / path,
        goal_err / path,
        scaling / path
    );
    if rmse < 0.01 * path && goal_err < 1e-3 * path && scaling < 1e-3 * path {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phase_gate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonzero = 0;
    for i in 0..1000 {
        let dims = random_dims(&mut rng);
        let df = std::array::from_fn(|_| rng.random_range(-50.0..50.0));
        let phase = PhaseState {
            s: rng.random_range(1e-3..=1.0),
            u: 0.0,
            tau: rng.random_range(0.1..30.0),
        };
        let c = if i % 2 == 0 {
            let mut p = PmdrnnParams::init(dims, false, &mut rng).unwrap();
            randomize(&mut p, &mut rng, 3.0);
            let mut state = FeedbackState::zeros(dims);
            for v in state.h.iter_mut().chain(&mut state.c_prev1).chain(&mut state.c_prev2) {
                *v = rng.random_range(-1.0..1.0);
            }
            p.forward(&df, &state, &phase).unwrap().0
        } else {
            let mut p = PmnnParams::init(dims, &mut rng).unwrap();
            randomize(&mut p, &mut rng, 3.0);
            p.forward(&df, &phase)
        };
        if c.iter().any(|v| *v != 0.0) {
            nonzero += 1;
        }
    }
    let detail = format!("1000 random networks at u = 0, {nonzero} with nonzero output");
    if nonzero == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn training_ordering(cmp: &[DatasetComparison], elapsed: Duration) -> Outcome {
    let targets = format!(
        "targets {:.0}% / {:.0}%",
        100.0 * reference::VARIED_ENDPOINTS.reduction,
        100.0 * reference::FIXED_ENDPOINTS.reduction
    );
    let mut parts = Vec::new();
    let mut ok = true;
    for c in cmp {
        let r = &c.report;
        parts.push(format!(
            "{}: PMDRNN < PMNN on {}/{} seeds, mean reduction {:.0}%",
            r.dataset,
            r.pmdrnn_better,
            r.seeds,
            100.0 * r.mean_reduction
        ));
        let t = &r.train;
        ok &= r.seeds == 5
            && r.pmdrnn_better >= 4
            && t.learning_rate == 0.02
            && t.batch_size == 8
            && t.hidden == 20
            && t.epochs == 3000;
    }
    let detail = format!("{}; {targets}", parts.join("; "));
    if ok {
        within(elapsed, Duration::from_secs(15 * 60), detail)
    } else {
        Err(detail)
    }
}

fn closed_loop(cfg: &ExperimentConfig, cmp: &[DatasetComparison]) -> Outcome {
    let start = Instant::now();
    let eval = cmp.iter().find(|c| c.report.dataset == cfg.evaluation.dataset).unwrap();
    let (report, _) = evaluate_models(cfg, &eval.models).unwrap();
    let [lo, hi] = report.desired_range.unwrap();
    let mut reduced = 0;
    let mut ordered = 0;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        let a = report.run(ModelKind::Pmdrnn, seed).unwrap();
        let b = report.run(ModelKind::Pmnn, seed).unwrap();
        if a.reduction_full >= 0.3 {
            reduced += 1;
        }
        if a.rmse_full <= b.rmse_full {
            ordered += 1;
        }
        cells.push(format!("{:.2}/{:.2}", a.rmse_full, b.rmse_full));
    }
    let n = cfg.seeds.len();
    let detail = format!(
        "desired {lo:.1}–{hi:.1} N; no feedback {:.2} N; PMDRNN/PMNN RMSE per seed [{}] N; PMDRNN ≥30% better than no feedback on {reduced}/{n}, ≤ PMNN on {ordered}/{n}",
        report.baseline.rmse_full,
        cells.join(", ")
    );
    let band = lo >= 19.5 && hi <= 25.5;
    if band && n == 5 && reduced == n && ordered >= 3 {
        within(start.elapsed(), Duration::from_secs(5 * 60), detail)
    } else {
        Err(detail)
    }
}

fn dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::load(&config_path("demo.toml")).unwrap();
    let spec = &cfg.datasets[0];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let dt = cfg.environment.settings.dt;
    let rec = record_dataset(&cfg, spec).unwrap();
    rec.write(a.path(), cfg.skill.alpha, &cfg.pairs, dt).unwrap();
    record_dataset(&cfg, spec).unwrap().write(b.path(), cfg.skill.alpha, &cfg.pairs, dt).unwrap();
    let files = dir_bytes(a.path());
    let demo_identical = files == dir_bytes(b.path());

    let set = training_set(&cfg, &rec).unwrap();
    let train = TrainConfig { epochs: 25, ..cfg.train.clone() };
    let m1 = train_model(ModelKind::Pmdrnn, &set, &train, cfg.control_period()).unwrap();
    let m2 = train_model(ModelKind::Pmdrnn, &set, &train, cfg.control_period()).unwrap();
    let train_identical = m1.checkpoint.to_json().unwrap() == m2.checkpoint.to_json().unwrap() && m1.loss_curve == m2.loss_curve;

    let mut csv_ok = true;
    for (path, bytes) in files.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "csv")) {
        let r = EpisodeRecord::read_csv(bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        r.write_csv(&mut again).unwrap();
        let back = EpisodeRecord::read_csv(again.as_slice()).unwrap();
        if &again != bytes || back != r {
            csv_ok = false;
            eprintln!("round trip changed {}", path.display());
        }
    }
    let nominal = EpisodeRecord::read_csv(files.iter().find(|(p, _)| p.ends_with("nominal.csv")).unwrap().1.as_slice()).unwrap();
    csv_ok &= nominal == rec.groups[0].nominal.record;
    let ck_ok = Checkpoint::from_json(&m1.checkpoint.to_json().unwrap()).unwrap() == m1.checkpoint;

    let episodes = files.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "csv")).count();
    let detail = format!(
        "demo re-run byte-identical: {demo_identical} ({} files); train re-run byte-identical: {train_identical}; {episodes} episode CSVs round-trip: {csv_ok}; checkpoint round-trip: {ck_ok}",
        files.len()
    );
    if demo_identical && train_identical && csv_ok && ck_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quaternion_invariants() -> Outcome {
    let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
    let q0 = UnitQuaternion::from_axis_angle(&Vector3::z(), 0.3);
    let dt = 0.01;
    let demo = EpisodeRecord::new(
        (0..=400)
            .map(|k| {
                let t = k as f64 * dt;
                let q = UnitQuaternion::from_axis_angle(&axis, std::f64::consts::FRAC_PI_3 * min_jerk(t / 4.0)).mul(&q0);
                EpisodeRow {
                    t,
                    p: Vector3::zeros(),
                    q,
                    f: [0.0; 6],
                }
            })
            .collect(),
    );
    let skill = SkillModel::fit_default(&demo).unwrap();
    let roll = skill.rollout(&mut NoCoupling, 8.0, dt).unwrap();
    let worst = roll.rows.iter().map(|r| (r.q.norm() - 1.0).abs()).fold(0.0, f64::max);
    let goal = skill.orientation.goal();
    let terminal = roll.rows.last().unwrap().q.angle_to(&goal).to_degrees();
    let e_goal = orientation_error(&goal, &goal).norm();

    let hold = OrientationDmp::constant(goal, 2.0, 10, 25.0).unwrap();
    let state = hold.initial_state();
    let next = hold.step(&state, &PhaseState::initial(DEFAULT_ALPHA_S, 2.0), &Vector3::zeros(), dt).unwrap();
    let still = next == state;

    let detail = format!(
        "max |‖q‖ − 1| over {} steps {worst:.1e}; terminal error {terminal:.3}° for a 60° demo; |e_Q(q_g, q_g)| = {e_goal:.1e}; step at goal unchanged: {still}",
        roll.len()
    );
    if worst < 1e-9 && e_goal == 0.0 && still && terminal < 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let mut lines = Vec::new();
    let mut record = |n: usize, name: &str, o: Outcome| {
        let line = match &o {
            Ok(d) => format!("criterion {n} ({name}): PASS: {d}"),
            Err(d) => format!("criterion {n} ({name}): FAIL: {d}"),
        };
        println!("{line}");
        lines.push(o.is_ok());
    };
    record(1, "gradient correctness", gradient_correctness());
    record(2, "DMP fidelity", dmp_fidelity());
    record(3, "phase gate", phase_gate());

    let cfg = ExperimentConfig::load(&config_path("experiment.toml")).unwrap();
    let start = Instant::now();
    let comparisons: Vec<DatasetComparison> = cfg.datasets.iter().map(|d| run_comparison(&cfg, d).unwrap()).collect();
    record(4, "training ordering", training_ordering(&comparisons, start.elapsed()));
    record(5, "closed-loop improvement", closed_loop(&cfg, &comparisons));
    record(6, "determinism and round-trip", determinism());
    record(7, "quaternion invariants", quaternion_invariants());

    let passed = lines.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if passed != lines.len() {
        std::process::exit(1);
    }
}
