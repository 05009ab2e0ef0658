//! Compares the parallel and sequential execution paths on the phase-grid
//! evaluation that dominates every experiment.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cocycle::lyapunov::per_site_profile_exec;
use cocycle::par::Exec;
use cocycle::potential::PotentialSpec;

fn bench_profiles(c: &mut Criterion) {
    let v = PotentialSpec::cosine(4.0);
    let omega = 0.618_033_988_749_894_9;
    let mut group = c.benchmark_group("per_site_profile");
    for &(n, m) in &[(1_000u64, 128usize), (10_000, 128), (10_000, 512)] {
        group.bench_with_input(
            BenchmarkId::new("parallel", format!("n{n}_m{m}")),
            &(n, m),
            |b, &(n, m)| {
                b.iter(|| per_site_profile_exec(&v, omega, 0.5, n, m, Exec::Parallel).unwrap())
            },
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", format!("n{n}_m{m}")),
            &(n, m),
            |b, &(n, m)| {
                b.iter(|| per_site_profile_exec(&v, omega, 0.5, n, m, Exec::Sequential).unwrap())
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_profiles);
criterion_main!(benches);
