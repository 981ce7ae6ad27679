use chrono::NaiveDate;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use epiforge_core::calibration::{fit, synthetic_history, FitConfig};
use epiforge_core::epi_model::{
    effective_contact_matrix, integrate, AgeSirdSystem, SirdSystem, AGE_CLASSES, DEFAULT_STEP,
};
use epiforge_core::stats::{kendall, pearson, spearman};
use epiforge_core::{
    AgeStructure, ContactMatrices, ContactMatrix, MixingCoefficients, ModelParams, PairedSample,
    ReinfectionSchedule, TransmissionForm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 3, 1).unwrap()
}

fn params() -> ModelParams {
    ModelParams { beta: 0.3, lambda_r: 0.08, lambda_d: 0.01, mu: 0.0, gamma: 0.0 }
}

fn rk4(c: &mut Criterion) {
    let n = 1e7;
    let scalar = SirdSystem::new(params(), ReinfectionSchedule::default(), n, TransmissionForm::Normalized).unwrap();
    let pops = vec![n / AGE_CLASSES as f64; AGE_CLASSES];
    let cm = ContactMatrices::new(
        ContactMatrix::filled(AGE_CLASSES, 0.05),
        ContactMatrix::filled(AGE_CLASSES, 0.02),
        ContactMatrix::filled(AGE_CLASSES, 0.03),
        ContactMatrix::filled(AGE_CLASSES, 0.01),
    )
    .unwrap();
    let mix = MixingCoefficients::new(1.0, 0.5, 0.5, 0.5).unwrap();
    let age = AgeSirdSystem::new(
        params(),
        effective_contact_matrix(&cm, &mix),
        AgeStructure::new(pops.clone()).unwrap(),
        ReinfectionSchedule::default(),
        TransmissionForm::Normalized,
    )
    .unwrap();
    let y_age: Vec<f64> = pops.iter().flat_map(|p| [p - 10.0, 10.0, 0.0, 0.0]).collect();

    let mut g = c.benchmark_group("rk4/integrate");
    for days in [60u32, 365] {
        g.bench_with_input(BenchmarkId::new("scalar", days), &days, |b, &d| {
            b.iter(|| integrate(&scalar, black_box(&[n - 100.0, 100.0, 0.0, 0.0]), start(), d, DEFAULT_STEP).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("age16", days), &days, |b, &d| {
            b.iter(|| integrate(&age, black_box(&y_age), start(), d, DEFAULT_STEP).unwrap())
        });
    }
    g.finish();
}

fn correlations(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = c.benchmark_group("correlations");
    for n in [30usize, 365, 2000] {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 + rng.random_range(0.0..50.0)).collect();
        let s = PairedSample::new(x, y).unwrap();
        g.bench_with_input(BenchmarkId::new("pearson", n), &s, |b, s| b.iter(|| pearson(s).unwrap()));
        g.bench_with_input(BenchmarkId::new("spearman", n), &s, |b, s| b.iter(|| spearman(s).unwrap()));
        g.bench_with_input(BenchmarkId::new("kendall", n), &s, |b, s| b.iter(|| kendall(s).unwrap()));
    }
    g.finish();
}

fn calibration(c: &mut Criterion) {
    let pop = 5e6;
    let h = synthetic_history("ZZ", params(), pop, 100.0, start(), 60, DEFAULT_STEP).unwrap();
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    g.bench_function("60 days", |b| b.iter(|| fit("ZZ", black_box(&h), pop, &FitConfig::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, rk4, correlations, calibration);
criterion_main!(benches);
