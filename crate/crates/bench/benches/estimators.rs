//! Estimator, reward-model and trial throughput.

use std::hint::black_box;

use augope::annotations::{annotate, assign_weights, augmented_behavior_policy, AnnotationModel, WeightScheme};
use augope::bandit::sample_dataset;
use augope::estimators::{estimate_dm_is_plus, estimate_dr, estimate_is};
use augope::harness::{run_trial, ExperimentConfig};
use augope::harness::verify::verification_problem;
use augope::reward_model::{fit_tabular_mean, rows_from_dataset};
use augope::EnvKind;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn estimators(c: &mut Criterion) {
    let p = verification_problem().unwrap();
    let mut group = c.benchmark_group("estimators");
    for n in [100usize, 1000, 10_000] {
        let d = sample_dataset(&p, n, 1).unwrap();
        let model = fit_tabular_mean(&rows_from_dataset(&d), p.env.shape()).unwrap();
        let ann = AnnotationModel::perfect(p.env.shape(), 1.0).unwrap();
        let scheme = WeightScheme::equal(&ann);
        let aug = assign_weights(&annotate(&d, &p.env, &ann, 2).unwrap(), &scheme).unwrap();
        let pib_plus = augmented_behavior_policy(&p.pi_b, &scheme).unwrap();
        group.bench_with_input(BenchmarkId::new("is", n), &d, |b, d| b.iter(|| estimate_is(black_box(d), &p).unwrap()));
        group.bench_with_input(BenchmarkId::new("dr", n), &d, |b, d| b.iter(|| estimate_dr(black_box(d), &model, &p).unwrap()));
        group.bench_with_input(BenchmarkId::new("dm_is_plus", n), &aug, |b, aug| {
            b.iter(|| estimate_dm_is_plus(black_box(aug), &model, &p.pi_e, &pib_plus).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fit_tabular", n), &d, |b, d| {
            b.iter(|| fit_tabular_mean(&rows_from_dataset(black_box(d)), p.env.shape()).unwrap())
        });
    }
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    group.sample_size(20);
    for kind in [EnvKind::TwoContext, EnvKind::Heartsteps, EnvKind::Sepsis] {
        let exp = ExperimentConfig::for_env(kind).resolve().unwrap();
        let pair = &exp.pairs[0];
        let mut t = 0;
        group.bench_function(BenchmarkId::new("all_estimators", kind.name()), |b| {
            b.iter(|| {
                t += 1;
                run_trial(&exp, pair, (0.0, 0.0), t).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, estimators, trials);
criterion_main!(benches);
