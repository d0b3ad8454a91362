use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::barrier::{BarrierForm, BarrierParams, DlgpBarrier};
use crate::gp::{KernelParams, Point, TrainingSet, VelocitySet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub points: usize,
    pub repetitions: usize,
    /// Model build plus one `(h, grad h, dh/dt)` evaluation.
    pub mean_ms: f64,
    pub median_ms: f64,
    pub max_ms: f64,
}

/// Random obstacle-like dataset: distinct cells of a 0.2 m lattice inside
/// a 4 m square, velocities up to 0.5 m/s.
pub fn bench_dataset(n: usize, rng: &mut impl Rng) -> (TrainingSet, VelocitySet) {
    let mut cells: Vec<(i32, i32)> = (0..20).flat_map(|i| (0..20).map(move |j| (i, j))).collect();
    cells.shuffle(rng);
    let points = cells
        .iter()
        .cycle()
        .take(n)
        .enumerate()
        .map(|(k, &(i, j))| Point::new(1.0 + 0.2 * i as f64 + 4.0 * (k / 400) as f64, -2.0 + 0.2 * j as f64))
        .collect();
    let velocities = (0..n)
        .map(|_| Point::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
        .collect();
    (TrainingSet::new(points), VelocitySet::new(velocities))
}

pub fn bench_barrier(sizes: &[usize], repetitions: usize, seed: u64) -> Vec<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps = repetitions.max(1);
    sizes
        .iter()
        .map(|&n| {
            let mut samples = Vec::with_capacity(reps);
            for _ in 0..reps {
                let (training, velocities) = bench_dataset(n, &mut rng);
                let query = Point::new(rng.gen_range(-1.0..0.5), rng.gen_range(-2.0..2.0));
                let started = Instant::now();
                let barrier = DlgpBarrier::new(
                    training,
                    velocities,
                    KernelParams::default(),
                    BarrierParams::default(),
                    BarrierForm::Log,
                )
                .expect("benchmark dataset is well conditioned");
                let eval = barrier.evaluate_full(&query);
                samples.push(started.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(eval.ok());
            }
            samples.sort_by(f64::total_cmp);
            BenchRow {
                points: n,
                repetitions: reps,
                mean_ms: samples.iter().sum::<f64>() / reps as f64,
                median_ms: samples[reps / 2],
                max_ms: samples[reps - 1],
            }
        })
        .collect()
}
