//! The synthetic linear dataset: three relevant features, seven noisy copies
//! of them and twenty uniform distractors.

use dagbandit::oracle::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const LINEAR_ROWS: usize = 300;
pub const REDUNDANT: usize = 7;
pub const DISTRACTORS: usize = 20;
pub const REDUNDANT_NOISE: f64 = 0.05;

pub fn linear_label(x: f64, y: f64, z: f64) -> u8 {
    u8::from(0.1 * x - 0.8 * y + 0.6 * z > 0.0)
}

/// Column names in generation order.
pub fn linear_names() -> Vec<String> {
    let base = ["x", "y", "z"];
    let mut names: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    names.extend((0..REDUNDANT).map(|i| format!("{}_copy{}", base[i % 3], i / 3 + 1)));
    names.extend((0..DISTRACTORS).map(|i| format!("noise{}", i + 1)));
    names
}

/// 300 rows over 30 features; deterministic in `seed`.
pub fn gen_linear(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, REDUNDANT_NOISE).expect("positive sigma");
    let mut rows = Vec::with_capacity(LINEAR_ROWS);
    let mut labels = Vec::with_capacity(LINEAR_ROWS);
    for _ in 0..LINEAR_ROWS {
        let xyz: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let mut row = xyz.to_vec();
        for i in 0..REDUNDANT {
            row.push((xyz[i % 3] + noise.sample(&mut rng)).clamp(0.0, 1.0));
        }
        row.extend((0..DISTRACTORS).map(|_| rng.random::<f64>()));
        labels.push(linear_label(xyz[0], xyz[1], xyz[2]));
        rows.push(row);
    }
    Dataset::new(rows, labels, linear_names()).expect("both classes occur in 300 draws")
}
