use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mesoscope_core::frame::{conjugate_hamiltonian, frame_rates, gif_evolve, GifState};
use mesoscope_core::linalg::{expm_multiply, SparseMatrix};
use mesoscope_core::phase_space::{default_wigner_axes, wigner};
use mesoscope_core::{FockVector, GaussianFrame, HamiltonianSpec, C64};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm_multiply");
    for dims in [[16usize, 16], [40, 40], [100, 100]] {
        let h = HamiltonianSpec::chi2(1.0, 0.5).poly();
        let m = SparseMatrix::from_poly(&h, &dims);
        let psi = FockVector::tensor(&FockVector::vacuum(&[dims[0]]), &FockVector::coherent(dims[1], C64::new(0.0, 2.0)).normalized().unwrap())
            .unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dims[0] * dims[1]), &psi, |b, psi| {
            b.iter(|| expm_multiply(&m, psi.amplitudes(), C64::new(0.0, -0.01)))
        });
    }
    group.finish();
}

fn bench_wigner(c: &mut Criterion) {
    let mut group = c.benchmark_group("wigner");
    group.sample_size(10);
    for dim in [10usize, 40, 100] {
        let state = FockVector::coherent(dim, C64::new(1.0, 0.5)).normalized().unwrap();
        let (xs, ps) = default_wigner_axes(&state, 5.0, 101).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &state, |b, s| b.iter(|| wigner(s, &xs, &ps).unwrap()));
    }
    group.finish();
}

fn bench_conjugation(c: &mut Criterion) {
    let spec = HamiltonianSpec::chi2(1.0, 3.0);
    let h = spec.poly();
    let frame = GaussianFrame::opa(C64::new(0.2, 0.1), C64::new(0.0, 10.0));
    let rates = frame_rates(&h, &frame).unwrap();
    c.bench_function("conjugate_hamiltonian", |b| b.iter(|| conjugate_hamiltonian(&h, &frame, &rates).unwrap()));
}

fn bench_gif_step(c: &mut Criterion) {
    let spec = HamiltonianSpec::chi2(1.0, 0.0);
    let initial = GifState { frame: GaussianFrame::opa(C64::default(), C64::new(0.0, 10.0)), residual: FockVector::vacuum(&[30, 30]) };
    let mut group = c.benchmark_group("gif_evolve");
    group.sample_size(10);
    group.bench_function("n100_dims30x30_10steps", |b| b.iter(|| gif_evolve(&spec, &initial, 0.05, 0.005, 1e-4).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_expm, bench_wigner, bench_conjugation, bench_gif_step);
criterion_main!(benches);
