use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skilltune_bench::{evaluation_skill, network_case};
use skilltune_core::dmp::NoCoupling;
use skilltune_core::net::{FeedbackModel, ModelKind, Network};
use skilltune_core::sim::{run_episode, EpisodeInputs};
use skilltune_core::SkillModel;

fn networks(c: &mut Criterion) {
    for kind in ModelKind::ALL {
        let (model, seq) = network_case(kind);
        c.bench_function(&format!("{kind}/forward_126_steps"), |b| b.iter(|| model.predict(black_box(&seq)).unwrap()));
        c.bench_function(&format!("{kind}/gradient_126_steps"), |b| match &model {
            FeedbackModel::Pmdrnn(p) => b.iter(|| {
                let mut g = p.zeros_like();
                p.accumulate_gradient(black_box(&seq), &mut g).unwrap();
                g
            }),
            FeedbackModel::Pmnn(p) => b.iter(|| {
                let mut g = p.zeros_like();
                p.accumulate_gradient(black_box(&seq), &mut g).unwrap();
                g
            }),
        });
    }
}

fn skills(c: &mut Criterion) {
    let (cfg, skill, nominal) = evaluation_skill();
    let dt = cfg.environment.settings.dt;
    let duration = cfg.environment.duration;
    c.bench_function("dmp/fit_100_bases_1251_samples", |b| {
        b.iter(|| SkillModel::fit(black_box(&nominal.record), 100, cfg.skill.alpha, cfg.skill.alpha).unwrap())
    });
    c.bench_function("dmp/rollout_25s", |b| b.iter(|| skill.rollout(&mut NoCoupling, duration, dt).unwrap()));
    let scenario = cfg.environment.scenario().unwrap();
    c.bench_function("sim/episode_25s", |b| {
        b.iter(|| run_episode(&skill, &mut NoCoupling, &scenario, &cfg.environment.settings, duration, EpisodeInputs::default()).unwrap())
    });
}

criterion_group!(benches, networks, skills);
criterion_main!(benches);
