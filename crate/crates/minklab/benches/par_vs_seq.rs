//! Parallel vs sequential throughput of the ensemble-driven paths.
//!
//! Both execution modes are exercised from one binary: `ExecMode::Auto`
//! fans blocks out over rayon (when the `parallel` feature is on, which is
//! the default), `ExecMode::Sequential` forces the fallback loop. Outputs
//! are byte-identical either way; only the wall clock differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use minklab::distribution::estimate_phi;
use minklab::haar::HaarSampler;
use minklab::minima::partial_minima;
use minklab::parallel::ExecMode;
use minklab::siegel::{siegel_mc_check, DEFAULT_ENUM_BUDGET};

const MODES: [(&str, ExecMode); 2] = [
    ("parallel", ExecMode::Auto),
    ("sequential", ExecMode::Sequential),
];

fn bench_exact_ensemble(c: &mut Criterion) {
    let sampler = HaarSampler::exact_d2();
    let mut g = c.benchmark_group("exact_d2_ensemble_20k");
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| sampler.ensemble_with_mode(20_000, 7, mode).unwrap())
        });
    }
    g.finish();
}

fn bench_siegel_d3_minima(c: &mut Criterion) {
    let sampler = HaarSampler::siegel(3).unwrap();
    let mut g = c.benchmark_group("siegel_d3_lambda2_5k");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let sums = sampler
                    .reduce_blocks(5_000, 11, mode, |it| {
                        let mut acc = 0.0;
                        for s in it {
                            let (basis, w) = s?;
                            acc += w * partial_minima(&basis, 2)?.values[1];
                        }
                        Ok(acc)
                    })
                    .unwrap();
                sums.iter().sum::<f64>()
            })
        });
    }
    g.finish();
}

fn bench_phi_fit(c: &mut Criterion) {
    let sampler = HaarSampler::exact_d2();
    let deltas = [0.05, 0.1, 0.2, 0.3];
    let mut g = c.benchmark_group("phi_fit_d2_50k");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| estimate_phi(&sampler, 1, &deltas, 50_000, 3, (0.05, 0.3), mode).unwrap())
        });
    }
    g.finish();
}

fn bench_mean_value_check(c: &mut Criterion) {
    let sampler = HaarSampler::siegel(2).unwrap();
    let mut g = c.benchmark_group("mean_value_d2_20k");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                siegel_mc_check(&sampler, 1, 0.5, 20_000, 5, DEFAULT_ENUM_BUDGET, mode).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_exact_ensemble,
    bench_siegel_d3_minima,
    bench_phi_fit,
    bench_mean_value_check
);
criterion_main!(benches);
