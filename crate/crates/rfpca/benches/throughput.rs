//! Throughput benchmarks for the hot paths: pairwise distances, the
//! winsorized surface, and center-trajectory solving. Build once with the
//! default `parallel` feature and once with `--no-default-features` to
//! compare modes; the benchmark names carry the mode label.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use rfpca::covariance::{estimate_cutoff, pairwise_l2_distances, wpu_covariance};
use rfpca::simgen::{gen_network_sample, NetworkSimConfig};
use rfpca::trajectory::{
    compute_center_trajectory, compute_center_trajectory_cold_start, distance_trajectories,
    CenterKind, DistanceKind, DistanceTrajectories,
};
use rfpca::{SolverConfig, TimeGrid};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

fn synthetic_rows(n: usize, t_len: usize) -> DistanceTrajectories {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = TimeGrid::uniform(t_len).unwrap();
    let values = Array2::from_shape_fn((n, t_len), |_| 1.0 + rng.random::<f64>());
    DistanceTrajectories::from_values(grid, values, DistanceKind::MedianDistance).unwrap()
}

fn bench_pairwise(c: &mut Criterion) {
    let rows = synthetic_rows(200, 25);
    c.bench_function(&format!("pairwise_l2/{}/n200_t25", mode()), |b| {
        b.iter(|| pairwise_l2_distances(black_box(&rows)).unwrap())
    });
}

fn bench_wpu_surface(c: &mut Criterion) {
    let rows = synthetic_rows(200, 25);
    let cutoff = estimate_cutoff(&pairwise_l2_distances(&rows).unwrap(), 0.84).unwrap();
    c.bench_function(&format!("wpu_surface/{}/n200_t25", mode()), |b| {
        b.iter(|| wpu_covariance(black_box(&rows), black_box(&cutoff)).unwrap())
    });
}

fn bench_center_trajectory(c: &mut Criterion) {
    let cfg = NetworkSimConfig {
        nodes: 10,
        subjects_per_group: 20,
        t_len: 10,
        ..NetworkSimConfig::default()
    };
    let sample = gen_network_sample(&cfg, 99).unwrap();
    let solver = SolverConfig::default();
    c.bench_function(&format!("center_trajectory/{}/warm_start", mode()), |b| {
        b.iter(|| {
            compute_center_trajectory(black_box(&sample), CenterKind::Median, &solver).unwrap()
        })
    });
    c.bench_function(&format!("center_trajectory/{}/cold_start", mode()), |b| {
        b.iter(|| {
            compute_center_trajectory_cold_start(black_box(&sample), CenterKind::Median, &solver)
                .unwrap()
        })
    });
    let center = compute_center_trajectory(&sample, CenterKind::Median, &solver).unwrap();
    c.bench_function(&format!("distance_rows/{}/n60_t10", mode()), |b| {
        b.iter(|| distance_trajectories(black_box(&sample), black_box(&center)).unwrap())
    });
}

criterion_group!(benches, bench_pairwise, bench_wpu_surface, bench_center_trajectory);
criterion_main!(benches);
