//! Replica seeding, deterministic parallel maps and Monte Carlo estimates.
//!
//! Replica `r` of an experiment with base seed `s` always uses
//! `replica_seed(s, r)`, and results are collected in replica order, so
//! every reduction is independent of the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::pairwise_sum;

/// SplitMix64 finalizer of `base + (r+1)·γ`; distinct replicas get
/// decorrelated 64-bit seeds.
pub fn replica_seed(base: u64, replica: u64) -> u64 {
    let mut z = base.wrapping_add((replica + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `f(r, replica_seed(base, r))` for `r = 0..replicas`, in replica order.
pub fn map_replicas<T, F>(replicas: usize, base: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| f(r, replica_seed(base, r as u64)))
        .collect()
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                count: 0,
            };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        }
    }

    /// `(mean − target)/stderr`; zero when both the deviation and the
    /// standard error vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

/// Column estimates of a replica × observable table.
pub fn column_estimates(rows: &[Vec<f64>]) -> Vec<Estimate> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width)
        .into_par_iter()
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            Estimate::from_samples(&col)
        })
        .collect()
}
