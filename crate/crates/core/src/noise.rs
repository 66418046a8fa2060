//! Sampling of the Bessel-smoothed cylindrical Wiener process restricted to
//! `|n| ≤ N`.
//!
//! Every increment is a deterministic function of `(seed, n, step)`: each
//! free mode owns a ChaCha8 stream selected by its lattice coordinates and
//! each step consumes a fixed number of words. Paths at different cutoffs
//! are therefore nested, and sampling order never matters.
//!
//! Per step and mode we draw three complex standard normals and map them
//! through the Cholesky factor of the exact covariance of
//! `(ΔB_n, ξ_pos, ξ_vel)`, where
//!
//! ```text
//! ξ_pos = ∫₀ʰ sin((h−s)⟨n⟩) ⟨n⟩^{−1−α} dB_n(s)
//! ξ_vel = ∫₀ʰ cos((h−s)⟨n⟩) ⟨n⟩^{−α}   dB_n(s)
//! ```
//!
//! so the Brownian increment and the exact one-step stochastic convolution
//! come from the same path.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::{ball, Ball, FreqIndex};

/// Horizon `T₀` of every experiment.
pub const MAX_HORIZON: f64 = 1.0;

/// u64 draws consumed per (mode, step): six uniforms for three Box–Muller pairs.
const DRAWS_PER_STEP: u128 = 6;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("smoothing order must be finite and nonnegative, got {0}")]
    NegativeAlpha(f64),
    #[error("time step must be finite and positive, got {0}")]
    BadStep(f64),
    #[error("need at least one step")]
    NoSteps,
    #[error("cutoff must be positive")]
    ZeroCutoff,
    #[error("horizon {0} exceeds the maximal horizon {MAX_HORIZON}")]
    HorizonTooLong(f64),
    #[error("cannot project a path with cutoff {have} onto cutoff {want}")]
    ProjectBeyondCutoff { have: u32, want: u32 },
    #[error("{steps} steps cannot be grouped by {factor}")]
    NotDivisible { steps: usize, factor: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    pub alpha: f64,
    pub cutoff: u32,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(NoiseError::NegativeAlpha(self.alpha));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(NoiseError::BadStep(self.dt));
        }
        if self.steps == 0 {
            return Err(NoiseError::NoSteps);
        }
        if self.cutoff == 0 {
            return Err(NoiseError::ZeroCutoff);
        }
        if self.horizon() > MAX_HORIZON * (1.0 + 1e-12) {
            return Err(NoiseError::HorizonTooLong(self.horizon()));
        }
        Ok(())
    }
}

/// Exact covariance of `(ΔB, ξ_pos, ξ_vel)` over one step for a single
/// real component, in units where `E|ΔB|² = h` for a complex mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCovariance {
    pub omega: f64,
    pub alpha: f64,
    pub h: f64,
    matrix: [[f64; 3]; 3],
    chol: [[f64; 3]; 3],
}

/// `y − sin y`, accurate for small `y`.
pub(crate) fn y_minus_sin(y: f64) -> f64 {
    if y.abs() < 0.1 {
        let y2 = y * y;
        y * y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0 * (1.0 - y2 / 72.0)))
    } else {
        y - y.sin()
    }
}

impl StepCovariance {
    pub fn new(omega: f64, alpha: f64, h: f64) -> Self {
        let x = h * omega;
        let w = omega;
        let var_db = h;
        let s_half = (0.5 * x).sin();
        let db_pos = w.powf(-2.0 - alpha) * 2.0 * s_half * s_half;
        let db_vel = w.powf(-1.0 - alpha) * x.sin();
        let var_pos = w.powf(-3.0 - 2.0 * alpha) * y_minus_sin(2.0 * x) / 4.0;
        let var_vel = w.powf(-1.0 - 2.0 * alpha) * (2.0 * x + (2.0 * x).sin()) / 4.0;
        let pos_vel = w.powf(-2.0 - 2.0 * alpha) * x.sin().powi(2) / 2.0;
        let matrix = [
            [var_db, db_pos, db_vel],
            [db_pos, var_pos, pos_vel],
            [db_vel, pos_vel, var_vel],
        ];
        StepCovariance {
            omega,
            alpha,
            h,
            matrix,
            chol: cholesky3(&matrix),
        }
    }

    pub fn for_mode(n: FreqIndex, alpha: f64, h: f64) -> Self {
        Self::new(n.bracket(), alpha, h)
    }

    /// Covariance matrix of `(ΔB, ξ_pos, ξ_vel)` (complex-mode variances).
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.matrix
    }

    pub fn cholesky(&self) -> [[f64; 3]; 3] {
        self.chol
    }

    /// Maps three white complex normals (`E|z|² = 1`) to
    /// `(ΔB, ξ_pos, ξ_vel)`.
    #[inline]
    pub fn apply(&self, z: &[Complex64; 3]) -> [Complex64; 3] {
        let l = &self.chol;
        [
            z[0] * l[0][0],
            z[0] * l[1][0] + z[1] * l[1][1],
            z[0] * l[2][0] + z[1] * l[2][1] + z[2] * l[2][2],
        ]
    }
}

/// Cholesky factor of a 3×3 PSD matrix; pivots lost to cancellation are
/// clamped to zero.
fn cholesky3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][i] = s.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { s / l[j][j] } else { 0.0 };
            }
        }
    }
    l
}

/// Stream selector for the free mode `n`; injective for |components| < 2²⁰.
fn stream_id(n: FreqIndex) -> u64 {
    let enc = |c: i32| ((c + (1 << 20)) as u64) & 0x1f_ffff;
    (enc(n.0[0]) << 42) | (enc(n.0[1]) << 21) | enc(n.0[2])
}

fn mode_rng(seed: u64, n: FreqIndex) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(n));
    rng
}

#[inline]
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Three white normals for one step: complex with independent `N(0, ½)`
/// parts, or real `N(0, 1)` for the zero mode.
#[inline]
fn draw_step(rng: &mut ChaCha8Rng, zero_mode: bool) -> [Complex64; 3] {
    let mut g = [0.0; 6];
    for pair in g.chunks_mut(2) {
        let r = (-2.0 * uniform_open(rng).ln()).sqrt();
        let (s, c) = (2.0 * PI * uniform_open(rng)).sin_cos();
        pair[0] = r * c;
        pair[1] = r * s;
    }
    if zero_mode {
        [
            Complex64::new(g[0], 0.0),
            Complex64::new(g[2], 0.0),
            Complex64::new(g[4], 0.0),
        ]
    } else {
        [
            Complex64::new(g[0], g[1]) * FRAC_1_SQRT_2,
            Complex64::new(g[2], g[3]) * FRAC_1_SQRT_2,
            Complex64::new(g[4], g[5]) * FRAC_1_SQRT_2,
        ]
    }
}

/// White normals of a free mode at one step, by random access into its
/// stream.
pub fn white_normals(seed: u64, n: FreqIndex, step: usize) -> [Complex64; 3] {
    let mut rng = mode_rng(seed, n);
    rng.set_word_pos(2 * DRAWS_PER_STEP * step as u128);
    draw_step(&mut rng, n == FreqIndex::ZERO)
}

fn canonical(n: FreqIndex) -> (FreqIndex, bool) {
    if n.is_free() {
        (n, false)
    } else {
        (-n, true)
    }
}

/// One sample of `(ξ_pos, ξ_vel)` for mode `n` at `step`, drawn from the
/// stream of `(seed, n)`; non-free modes return the conjugate of their
/// mirror.
pub fn convolution_step_increments(
    n: FreqIndex,
    alpha: f64,
    h: f64,
    seed: u64,
    step: usize,
) -> (Complex64, Complex64) {
    let (owner, conj) = canonical(n);
    let z = white_normals(seed, owner, step);
    let [_, p, v] = StepCovariance::for_mode(owner, alpha, h).apply(&z);
    if conj {
        (p.conj(), v.conj())
    } else {
        (p, v)
    }
}

/// One-step increments `(ΔB_n, ξ_pos, ξ_vel)` for every free mode of the
/// ball `|n| ≤ N` and every step. Immutable once sampled.
#[derive(Clone, Debug)]
pub struct NoisePath {
    config: NoiseConfig,
    ball: Arc<Ball>,
    /// `[step][free slot]`
    increments: Vec<[Complex64; 3]>,
}

impl PartialEq for NoisePath {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.increments == other.increments
    }
}

impl NoisePath {
    /// Samples the path for `config`.
    pub fn sample(config: NoiseConfig) -> Result<Self, NoiseError> {
        config.validate()?;
        let ball = ball(config.cutoff);
        let table = StepCovarianceTable::new(&ball, config.alpha, config.dt);
        let nfree = ball.free().len();
        let zero = [Complex64::new(0.0, 0.0); 3];
        let mut increments = vec![zero; nfree * config.steps];
        for (slot, &i) in ball.free().iter().enumerate() {
            let n = ball.mode(i as usize);
            let mut rng = mode_rng(config.seed, n);
            let zero_mode = n == FreqIndex::ZERO;
            let cov = table.get(slot);
            for step in 0..config.steps {
                increments[step * nfree + slot] = cov.apply(&draw_step(&mut rng, zero_mode));
            }
        }
        Ok(NoisePath {
            config,
            ball,
            increments,
        })
    }

    /// The identically zero path (deterministic runs).
    pub fn zero(config: NoiseConfig) -> Result<Self, NoiseError> {
        config.validate()?;
        let ball = ball(config.cutoff);
        let increments = vec![[Complex64::new(0.0, 0.0); 3]; ball.free().len() * config.steps];
        Ok(NoisePath {
            config,
            ball,
            increments,
        })
    }

    pub fn config(&self) -> &NoiseConfig {
        &self.config
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn is_zero(&self) -> bool {
        self.increments
            .iter()
            .all(|z| z.iter().all(|c| c.re == 0.0 && c.im == 0.0))
    }

    /// `(ΔB, ξ_pos, ξ_vel)` over `[t_step, t_step + dt]` for the free slot
    /// `slot` (the `slot`-th entry of [`Ball::free`]).
    #[inline]
    pub fn step_increments(&self, step: usize, slot: usize) -> &[Complex64; 3] {
        &self.increments[step * self.ball.free().len() + slot]
    }

    /// Brownian increment `ΔB_n` over `[t_step, t_step + dt]`.
    pub fn increment(&self, step: usize, n: FreqIndex) -> Option<Complex64> {
        let (owner, conj) = canonical(n);
        let i = self.ball.index_of(owner)?;
        let slot = self.ball.free().binary_search(&(i as u32)).ok()?;
        let db = self.step_increments(step, slot)[0];
        Some(if conj { db.conj() } else { db })
    }

    /// The sub-path on `|n| ≤ cutoff`; bitwise equal to sampling that
    /// cutoff directly with the same seed.
    pub fn project(&self, cutoff: u32) -> Result<NoisePath, NoiseError> {
        if cutoff > self.config.cutoff {
            return Err(NoiseError::ProjectBeyondCutoff {
                have: self.config.cutoff,
                want: cutoff,
            });
        }
        let small = ball(cutoff);
        let nfree_big = self.ball.free().len();
        let slots: Vec<usize> = small
            .free()
            .iter()
            .map(|&i| {
                let n = small.mode(i as usize);
                let j = self.ball.index_of(n).expect("nested balls") as u32;
                self.ball.free().binary_search(&j).expect("free mode")
            })
            .collect();
        let mut increments = Vec::with_capacity(slots.len() * self.config.steps);
        for step in 0..self.config.steps {
            for &s in &slots {
                increments.push(self.increments[step * nfree_big + s]);
            }
        }
        Ok(NoisePath {
            config: NoiseConfig {
                cutoff,
                ..self.config
            },
            ball: small,
            increments,
        })
    }

    /// The same Brownian path on a grid `factor` times coarser. Increments
    /// over consecutive steps compose exactly: `ΔB` adds, and the one-step
    /// convolution pair is rotated by the linear flow before adding.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath, NoiseError> {
        if factor == 0 || self.config.steps % factor != 0 {
            return Err(NoiseError::NotDivisible {
                steps: self.config.steps,
                factor,
            });
        }
        let config = NoiseConfig {
            dt: self.config.dt * factor as f64,
            steps: self.config.steps / factor,
            ..self.config
        };
        let nfree = self.ball.free().len();
        let mut increments = Vec::with_capacity(nfree * config.steps);
        for big in 0..config.steps {
            for (slot, &i) in self.ball.free().iter().enumerate() {
                let (s, c) = (self.config.dt * self.ball.bracket(i as usize)).sin_cos();
                let w = self.ball.bracket(i as usize);
                let mut acc = [Complex64::new(0.0, 0.0); 3];
                for step in big * factor..(big + 1) * factor {
                    let [db, p, v] = self.increments[step * nfree + slot];
                    let (p0, v0) = (acc[1], acc[2]);
                    acc = [
                        acc[0] + db,
                        p0 * c + v0 * (s / w) + p,
                        v0 * c - p0 * (w * s) + v,
                    ];
                }
                increments.push(acc);
            }
        }
        config.validate()?;
        Ok(NoisePath {
            config,
            ball: self.ball.clone(),
            increments,
        })
    }
}

/// Per-step covariances for every distinct `|n|²` of a ball, indexed by
/// free slot.
#[derive(Clone, Debug)]
pub struct StepCovarianceTable {
    per_slot: Vec<u32>,
    table: Vec<StepCovariance>,
}

impl StepCovarianceTable {
    pub fn new(ball: &Ball, alpha: f64, h: f64) -> Self {
        let max_k2 = (ball.cutoff() as usize).pow(2);
        let mut index = vec![u32::MAX; max_k2 + 1];
        let mut table = Vec::new();
        let per_slot = ball
            .free()
            .iter()
            .map(|&i| {
                let k2 = ball.norm_sq(i as usize) as usize;
                if index[k2] == u32::MAX {
                    index[k2] = table.len() as u32;
                    table.push(StepCovariance::new(ball.bracket(i as usize), alpha, h));
                }
                index[k2]
            })
            .collect();
        StepCovarianceTable { per_slot, table }
    }

    #[inline]
    pub fn get(&self, slot: usize) -> &StepCovariance {
        &self.table[self.per_slot[slot] as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cutoff: u32, steps: usize, seed: u64) -> NoiseConfig {
        NoiseConfig {
            alpha: 0.25,
            cutoff,
            dt: 0.01,
            steps,
            seed,
        }
    }

    /// Itô isometry by a midpoint rule with `substeps` cells.
    fn riemann_covariance(omega: f64, alpha: f64, h: f64, substeps: usize) -> [[f64; 3]; 3] {
        let ds = h / substeps as f64;
        let mut c = [[0.0; 3]; 3];
        for k in 0..substeps {
            let s = (k as f64 + 0.5) * ds;
            let f = [
                1.0,
                ((h - s) * omega).sin() * omega.powf(-1.0 - alpha),
                ((h - s) * omega).cos() * omega.powf(-alpha),
            ];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] += f[i] * f[j] * ds;
                }
            }
        }
        c
    }

    #[test]
    fn closed_form_matches_riemann_oracle() {
        for &(omega, alpha, h) in &[
            (1.0, 0.3, PI),
            (2.0, 0.25, 0.1),
            (3f64.sqrt(), 0.5, 0.37),
            (7.0, 0.125, 1e-3),
        ] {
            let exact = StepCovariance::new(omega, alpha, h).matrix();
            let quad = riemann_covariance(omega, alpha, h, 10_000);
            for i in 0..3 {
                for j in 0..3 {
                    let scale = (exact[i][i] * exact[j][j]).sqrt();
                    assert!(
                        (exact[i][j] - quad[i][j]).abs() < 1e-6 * scale,
                        "entry {i}{j} at ω={omega}: {} vs {}",
                        exact[i][j],
                        quad[i][j]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_mode_half_period_variance() {
        let c = StepCovariance::new(1.0, 0.7, PI).matrix();
        assert!((c[1][1] - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn vanishing_window() {
        let c = StepCovariance::new(2.0, 0.25, 1e-9).matrix();
        assert!(c[1][1] < 1e-25 && c[2][2] < 1e-8);
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        for &(omega, h) in &[(1.0, 1e-3), (5.0, 0.02), (30.0, 0.5), (1.0, 1e-5)] {
            let sc = StepCovariance::new(omega, 0.25, h);
            let (a, l) = (sc.matrix(), sc.cholesky());
            for i in 0..3 {
                for j in 0..3 {
                    let r: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                    let scale = (a[i][i] * a[j][j]).sqrt();
                    assert!((r - a[i][j]).abs() <= 1e-9 * scale, "{i}{j} ω={omega} h={h}");
                }
            }
        }
    }

    #[test]
    fn nesting_across_cutoffs() {
        let small = NoisePath::sample(cfg(4, 7, 11)).unwrap();
        let big = NoisePath::sample(cfg(8, 7, 11)).unwrap();
        let proj = big.project(4).unwrap();
        assert_eq!(proj, small);
        let n = FreqIndex::new(1, -2, 3);
        for step in 0..7 {
            assert_eq!(small.increment(step, n), big.increment(step, n));
        }
    }

    #[test]
    fn random_access_matches_sequential_stream() {
        let c = cfg(3, 5, 99);
        let path = NoisePath::sample(c).unwrap();
        let table = StepCovarianceTable::new(path.ball(), c.alpha, c.dt);
        for (slot, &i) in path.ball().free().iter().enumerate() {
            let n = path.ball().mode(i as usize);
            for step in [0, 3, 4] {
                let z = white_normals(c.seed, n, step);
                assert_eq!(*path.step_increments(step, slot), table.get(slot).apply(&z));
                let [_, p, v] = *path.step_increments(step, slot);
                let (p2, v2) = convolution_step_increments(n, c.alpha, c.dt, c.seed, step);
                assert_eq!((p, v), (p2, v2));
                let (p3, v3) = convolution_step_increments(-n, c.alpha, c.dt, c.seed, step);
                assert_eq!((p3, v3), (p.conj(), v.conj()));
            }
        }
    }

    #[test]
    fn zero_mode_increments_are_real() {
        let path = NoisePath::sample(cfg(2, 50, 5)).unwrap();
        for step in 0..50 {
            assert_eq!(path.increment(step, FreqIndex::ZERO).unwrap().im, 0.0);
        }
        let n = FreqIndex::new(0, 1, -1);
        let a = path.increment(3, n).unwrap();
        assert_eq!(path.increment(3, -n).unwrap(), a.conj());
    }

    #[test]
    fn increment_variance_is_dt() {
        // 10⁵ draws of |ΔB_n|²/dt, an Exp(1) average: sd 1/√R
        let draws = 100_000;
        let n = FreqIndex::new(1, 2, 0);
        let mut rng = mode_rng(2024, n);
        let mut acc = 0.0;
        for _ in 0..draws {
            acc += draw_step(&mut rng, false)[0].norm_sqr();
        }
        let mean = acc / draws as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sampled_pair_covariance_matches_closed_form() {
        let (alpha, h) = (0.25, 0.1);
        let n = FreqIndex::new(1, 0, 0);
        let sc = StepCovariance::for_mode(n, alpha, h);
        let draws = 100_000usize;
        let mut rng = mode_rng(7, n);
        let (mut spp, mut svv, mut spv) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..draws {
            let [_, p, v] = sc.apply(&draw_step(&mut rng, false));
            // real parts: each carries half of the complex covariance
            spp.push(p.re * p.re);
            svv.push(v.re * v.re);
            spv.push(p.re * v.re);
        }
        let c = sc.matrix();
        for (xs, target) in [(spp, c[1][1] / 2.0), (svv, c[2][2] / 2.0), (spv, c[1][2] / 2.0)] {
            let m = xs.iter().sum::<f64>() / draws as f64;
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let se = (var / draws as f64).sqrt();
            assert!((m - target).abs() < 3.0 * se, "{m} vs {target} (se {se})");
        }
    }

    #[test]
    fn euler_maruyama_oracle_agrees() {
        // fine-step EM sums of the Itô integrals, compared to the closed form
        let (omega, alpha, h) = (2f64.sqrt(), 0.25, 0.1);
        let sub = 200;
        let ds = h / sub as f64;
        let draws = 20_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut acc = [0.0f64; 3];
        let mut sq = [0.0f64; 3];
        for _ in 0..draws {
            let (mut p, mut v) = (0.0, 0.0);
            for k in 0..sub {
                let s = k as f64 * ds;
                let r = (-2.0 * uniform_open(&mut rng).ln()).sqrt();
                let dw = r * (2.0 * PI * uniform_open(&mut rng)).cos() * ds.sqrt();
                p += ((h - s) * omega).sin() * omega.powf(-1.0 - alpha) * dw;
                v += ((h - s) * omega).cos() * omega.powf(-alpha) * dw;
            }
            let obs = [p * p, v * v, p * v];
            for i in 0..3 {
                acc[i] += obs[i];
                sq[i] += obs[i] * obs[i];
            }
        }
        let c = StepCovariance::new(omega, alpha, h).matrix();
        let target = [c[1][1], c[2][2], c[1][2]];
        for i in 0..3 {
            let m = acc[i] / draws as f64;
            let se = ((sq[i] / draws as f64 - m * m) / draws as f64).sqrt();
            // EM bias is O(ds) relative; far below 3 standard errors here
            assert!((m - target[i]).abs() < 3.0 * se + 0.01 * target[i].abs());
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(4, 100, 0);
        assert!(c.validate().is_ok());
        c.steps = 101;
        assert!(matches!(c.validate(), Err(NoiseError::HorizonTooLong(_))));
        c.steps = 0;
        assert_eq!(c.validate(), Err(NoiseError::NoSteps));
        c = cfg(4, 10, 0);
        c.alpha = -0.1;
        assert!(matches!(c.validate(), Err(NoiseError::NegativeAlpha(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = NoisePath::sample(cfg(5, 9, 123)).unwrap();
        let b = NoisePath::sample(cfg(5, 9, 123)).unwrap();
        assert_eq!(a, b);
        let c = NoisePath::sample(cfg(5, 9, 124)).unwrap();
        assert_ne!(a, c);
    }
}
