//! Norms, regularity fits, Cauchy tables, Wick-law statistics and discrete
//! `X^{s,b}` norms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::ensemble::{column_estimates, Estimate};
use crate::lattice::{fft_size_at_least, pairwise_sum, pairwise_sum_by, FreqIndex, SpectralField};
use crate::objects::Trajectory;
use crate::renorm::{covariance, mode_variance};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {need} annuli with {min_modes} modes each, found {found}")]
    InsufficientAnnuli {
        need: usize,
        min_modes: usize,
        found: usize,
    },
    #[error("moments must be positive and finite; mode {0:?} has {1}")]
    BadMoment(FreqIndex, f64),
    #[error("trajectory too short for a temporal transform")]
    ShortTrajectory,
}

/// `‖f‖_{H^s} = (Σ ⟨n⟩^{2s} |f̂(n)|²)^{1/2}`.
pub fn hs_norm(field: &SpectralField, s: f64) -> f64 {
    let b = field.ball();
    let terms: Vec<f64> = field
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| (1.0 + b.norm_sq(i) as f64).powf(s) * c.norm_sqr())
        .collect();
    pairwise_sum(&terms).sqrt()
}

/// `⟨∇⟩^s f`.
pub fn bessel(field: &SpectralField, s: f64) -> SpectralField {
    let b = field.ball().clone();
    SpectralField::from_free_fn(field.cutoff(), |n| {
        field.coeffs()[b.index_of(n).expect("same ball")] * n.bracket().powf(s)
    })
}

/// Default points per axis for grid maxima: `8N + 2`, rounded to a fast size.
pub fn default_sup_grid(cutoff: u32) -> usize {
    fft_size_at_least(8 * cutoff as usize + 2)
}

/// `max_x |⟨∇⟩^s f(x)|` over a uniform grid; a lower bound of the sup norm.
pub fn wsinf_norm(field: &SpectralField, s: f64, points_per_axis: Option<usize>) -> f64 {
    let m = points_per_axis
        .unwrap_or_else(|| default_sup_grid(field.cutoff()))
        .max(2 * field.cutoff() as usize + 1);
    bessel(field, s).to_grid(m).expect("grid fits").max_abs()
}

/// Ensemble second moment of one Fourier mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeMoment {
    pub n: [i32; 3],
    pub mean: f64,
    pub stderr: f64,
}

/// Per-mode `E|X̂(n)|²` over the free modes of `fields[r]`, one field per
/// replica, all at one cutoff.
pub fn mode_moments(per_replica: &[Vec<f64>], modes: &[FreqIndex]) -> Vec<ModeMoment> {
    column_estimates(per_replica)
        .into_iter()
        .zip(modes)
        .map(|(e, n)| ModeMoment {
            n: n.0,
            mean: e.mean,
            stderr: e.stderr,
        })
        .collect()
}

/// `|X̂(n)|²` on the free modes of `f`, in [`crate::lattice::Ball::free`] order.
pub fn free_mode_powers(f: &SpectralField) -> Vec<f64> {
    f.ball()
        .free()
        .iter()
        .map(|&i| f.coeffs()[i as usize].norm_sqr())
        .collect()
}

/// Free modes of the ball of radius `cutoff`.
pub fn free_modes(cutoff: u32) -> Vec<FreqIndex> {
    let b = crate::lattice::ball(cutoff);
    b.free().iter().map(|&i| b.mode(i as usize)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnuliSpec {
    pub min_annuli: usize,
    pub min_modes: usize,
}

impl Default for AnnuliSpec {
    fn default() -> Self {
        AnnuliSpec {
            min_annuli: 4,
            min_modes: 20,
        }
    }
}

/// One dyadic shell `lo < |n| ≤ hi`; `modes` counts lattice points, so
/// each conjugate pair contributes two.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Annulus {
    pub lo: f64,
    pub hi: f64,
    pub modes: usize,
    /// Geometric mean of `⟨n⟩` over the shell.
    pub center: f64,
    /// Geometric mean of the moments over the shell.
    pub value: f64,
    /// Standard error of `ln value` (zero without per-mode errors).
    pub log_stderr: f64,
}

/// Decay exponent of `E|X̂(n)|² ∼ ⟨n⟩^{slope}` and the implied regularity
/// `s₀ = (−slope − 3)/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityFit {
    pub annuli: Vec<Annulus>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub chi2_red: f64,
    pub s0: f64,
}

/// Weighted log-log fit over dyadic shells `(2^{j−1}, 2^j]`, `j ≥ 1`.
///
/// Per-shell values are geometric means, which makes an exact power law
/// fit exactly. With per-mode standard errors the weights are inverse
/// variances of the shell log-means and the slope error is inflated by
/// `√χ²_red` when that exceeds one; without them shells are weighted by
/// mode count and the error comes from the residuals.
pub fn fit_regularity(
    moments: &[ModeMoment],
    spec: AnnuliSpec,
) -> Result<RegularityFit, DiagnosticsError> {
    let mut shells: Vec<Vec<&ModeMoment>> = Vec::new();
    for m in moments {
        let n = FreqIndex(m.n);
        if !n.is_free() {
            continue;
        }
        let k2 = n.norm_sq();
        if k2 <= 1 {
            continue;
        }
        if !(m.mean.is_finite() && m.mean > 0.0) {
            return Err(DiagnosticsError::BadMoment(n, m.mean));
        }
        // j with 4^{j−1} < |n|² ≤ 4^j
        let mut j = 1usize;
        while 4i64.pow(j as u32) < k2 {
            j += 1;
        }
        if shells.len() < j {
            shells.resize(j, Vec::new());
        }
        shells[j - 1].push(m);
    }
    let annuli: Vec<Annulus> = shells
        .iter()
        .enumerate()
        .filter(|(_, s)| 2 * s.len() >= spec.min_modes)
        .map(|(j, s)| {
            let c = s.len() as f64;
            let log_w = pairwise_sum_by(s, |m| FreqIndex(m.n).bracket().ln()) / c;
            let log_v = pairwise_sum_by(s, |m| m.mean.ln()) / c;
            let var = pairwise_sum_by(s, |m| (m.stderr / m.mean).powi(2)) / (c * c);
            Annulus {
                lo: 2f64.powi(j as i32),
                hi: 2f64.powi(j as i32 + 1),
                modes: 2 * s.len(),
                center: log_w.exp(),
                value: log_v.exp(),
                log_stderr: var.sqrt(),
            }
        })
        .collect();
    if annuli.len() < spec.min_annuli {
        return Err(DiagnosticsError::InsufficientAnnuli {
            need: spec.min_annuli,
            min_modes: spec.min_modes,
            found: annuli.len(),
        });
    }
    let with_errors = annuli.iter().all(|a| a.log_stderr > 0.0);
    let w: Vec<f64> = annuli
        .iter()
        .map(|a| {
            if with_errors {
                a.log_stderr.powi(-2)
            } else {
                a.modes as f64 / 2.0
            }
        })
        .collect();
    let x: Vec<f64> = annuli.iter().map(|a| a.center.ln()).collect();
    let y: Vec<f64> = annuli.iter().map(|a| a.value.ln()).collect();
    let k = annuli.len();
    let sw: f64 = w.iter().sum();
    let xbar = (0..k).map(|i| w[i] * x[i]).sum::<f64>() / sw;
    let ybar = (0..k).map(|i| w[i] * y[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..k).map(|i| w[i] * (x[i] - xbar).powi(2)).sum();
    let sxy: f64 = (0..k).map(|i| w[i] * (x[i] - xbar) * (y[i] - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = (0..k)
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let chi2_red = rss / (k - 2) as f64;
    let stderr = if with_errors {
        (chi2_red.max(1.0) / sxx).sqrt()
    } else {
        (chi2_red / sxx).sqrt()
    };
    Ok(RegularityFit {
        annuli,
        slope,
        intercept,
        stderr,
        chi2_red,
        s0: (-slope - 3.0) / 2.0,
    })
}

/// One adjacent pair of a Cauchy table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyRow {
    pub n_lo: u32,
    pub n_hi: u32,
    /// `E‖X_{hi} − X_{lo}‖`.
    pub norm: Estimate,
    /// `E‖X_{hi} − X_{lo}‖²`.
    pub norm_sq: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyTable {
    pub object: String,
    pub s: f64,
    pub t: f64,
    pub rows: Vec<CauchyRow>,
}

impl CauchyTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].norm.mean < w[0].norm.mean)
    }
}

/// Ensemble Cauchy differences in `H^s`; `per_replica[r][i]` is the object
/// at level `levels[i]` on the nested path of replica `r`, already reduced
/// to `‖X_{levels[i+1]} − X_{levels[i]}‖` by [`cauchy_norms`].
pub fn cauchy_table(
    object: &str,
    s: f64,
    t: f64,
    levels: &[u32],
    per_replica: &[Vec<f64>],
) -> CauchyTable {
    let sq: Vec<Vec<f64>> = per_replica
        .iter()
        .map(|r| r.iter().map(|x| x * x).collect())
        .collect();
    let norms = column_estimates(per_replica);
    let norms_sq = column_estimates(&sq);
    let rows = levels
        .windows(2)
        .zip(norms.into_iter().zip(norms_sq))
        .map(|(w, (norm, norm_sq))| CauchyRow {
            n_lo: w[0],
            n_hi: w[1],
            norm,
            norm_sq,
        })
        .collect();
    CauchyTable {
        object: object.to_string(),
        s,
        t,
        rows,
    }
}

/// `‖X_{i+1} − X_i‖_{H^s}` for successive levels of one replica.
pub fn cauchy_norms(fields: &[SpectralField], s: f64) -> Vec<f64> {
    fields
        .windows(2)
        .map(|w| {
            let hi = w[1].cutoff().max(w[0].cutoff());
            hs_norm(
                &SpectralField::combination(hi, &[(1.0, &w[1]), (-1.0, &w[0])]),
                s,
            )
        })
        .collect()
}

/// `E‖⟨1⟩_{hi}(t) − ⟨1⟩_{lo}(t)‖²_{H^s} = Σ_{lo<|n|≤hi} ⟨n⟩^{2s} E|⟨1⟩̂(n,t)|²`.
pub fn conv1_tail_sum(lo: u32, hi: u32, s: f64, t: f64, alpha: f64) -> f64 {
    let b = crate::lattice::ball(hi);
    let lo2 = (lo as i64).pow(2);
    let terms: Vec<f64> = (0..b.len())
        .filter(|&i| b.norm_sq(i) > lo2)
        .map(|i| {
            let n = b.mode(i);
            n.bracket().powf(2.0 * s) * mode_variance(n, t, alpha)
        })
        .collect();
    pairwise_sum(&terms)
}

/// Deterministic `E|⟨30⟩̂(n, t)|²` for noise cutoff `N`:
///
/// `6 ∫₀ᵗ∫₀ᵗ S_n(t−a) S_n(t−b) Σ_{n₁+n₂+n₃=n, |n_j|≤N} Π_j Γ_{n_j}(a, b) da db`
///
/// with `S_n(τ) = sin(τ⟨n⟩)/⟨n⟩` and `Γ` the mode covariance. The kernel
/// has a kink on the diagonal, so the square is folded onto `b < a` and
/// each triangle is mapped to a square (`b = a·u`) before Gauss–Legendre
/// with `nodes` points per axis.
pub fn tree30_second_moment(n: FreqIndex, t: f64, cutoff: u32, alpha: f64, nodes: usize) -> f64 {
    let b = crate::lattice::ball(cutoff);
    let max_k2 = (cutoff as usize).pow(2);
    // multiplicities of (|n₁|², |n₂|², |n₃|²) over ordered triples
    let mut triples: std::collections::BTreeMap<[usize; 3], u64> = Default::default();
    for &n1 in b.modes() {
        for &n2 in b.modes() {
            let n3 = FreqIndex([n.0[0] - n1.0[0] - n2.0[0], n.0[1] - n1.0[1] - n2.0[1], n.0[2] - n1.0[2] - n2.0[2]]);
            if n3.norm_sq() as usize <= max_k2 {
                *triples
                    .entry([n1.norm_sq() as usize, n2.norm_sq() as usize, n3.norm_sq() as usize])
                    .or_default() += 1;
            }
        }
    }
    let omegas: Vec<f64> = (0..=max_k2).map(|k| (1.0 + k as f64).sqrt()).collect();
    let w = n.bracket();
    let s = |tau: f64| (tau * w).sin() / w;
    let rule = gauss_quad::GaussLegendre::new(nodes.try_into().expect("at least one node"));
    let pairs = rule.as_node_weight_pairs();
    let mut g = vec![0.0; max_k2 + 1];
    let mut total = 0.0;
    for &(xa, wa) in pairs {
        let a = 0.5 * t * (xa + 1.0);
        let mut inner = 0.0;
        for &(xu, wu) in pairs {
            let bb = a * 0.5 * (xu + 1.0);
            for (k, gk) in g.iter_mut().enumerate() {
                *gk = crate::renorm::mode_covariance(omegas[k], a, bb, alpha);
            }
            let c: f64 = triples
                .iter()
                .map(|(k, &m)| m as f64 * g[k[0]] * g[k[1]] * g[k[2]])
                .sum();
            inner += 0.5 * wu * s(t - bb) * c;
        }
        total += 0.5 * t * wa * s(t - a) * a * inner;
    }
    // 6 from the Wick pairings, 2 from folding the square
    12.0 * total
}

/// Temporal window applied before the time transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    pub fn weights(self, k: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; k],
            Window::Hann if k < 2 => vec![1.0; k],
            Window::Hann => (0..k)
                .map(|j| (PI * j as f64 / (k - 1) as f64).sin().powi(2))
                .collect(),
        }
    }
}

/// Discrete `X^{s,b}` norm of a trajectory:
/// `(Σ_n Σ_j ⟨n⟩^{2s} ⟨|τ_j| − ⟨n⟩⟩^{2b} |û(n, τ_j)|² Δτ)^{1/2}` with
/// `û(n, τ_j) = dt/√(2π) Σ_k w_k û(n, t_k) e^{−iτ_j t_k}`, `τ_j = 2πj/(K dt)`.
///
/// At `s = b = 0` this is `(dt Σ_k w_k² ‖u(t_k)‖²_{L²})^{1/2}`. The window
/// makes the value an upper bound proxy for the restriction norm.
pub fn xsb_norm(
    tr: &Trajectory,
    s: f64,
    b: f64,
    window: Window,
) -> Result<f64, DiagnosticsError> {
    let k = tr.len();
    if k < 2 {
        return Err(DiagnosticsError::ShortTrajectory);
    }
    let dt = tr.dt();
    let w = window.weights(k);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(k);
    let ball = tr.at(0).ball().clone();
    let dtau = 2.0 * PI / (k as f64 * dt);
    let taus: Vec<f64> = (0..k)
        .map(|j| {
            let jj = if j <= k / 2 { j as f64 } else { j as f64 - k as f64 };
            jj * dtau
        })
        .collect();
    let scale = dt / (2.0 * PI).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    let mut per_mode = Vec::with_capacity(ball.len());
    for i in 0..ball.len() {
        for (t, slot) in buf.iter_mut().enumerate() {
            *slot = tr.at(t).coeffs()[i] * w[t];
        }
        fft.process(&mut buf);
        let omega = ball.bracket(i);
        let terms: Vec<f64> = buf
            .iter()
            .zip(&taus)
            .map(|(c, &tau)| {
                let gap = 1.0 + (tau.abs() - omega).powi(2);
                gap.powf(b) * (c * scale).norm_sqr()
            })
            .collect();
        per_mode.push(omega.powf(2.0 * s) * pairwise_sum(&terms) * dtau);
    }
    Ok(pairwise_sum(&per_mode).sqrt())
}

/// Values of `⟨2⟩` and `⟨3⟩` at a fixed list of points for one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct WickSample {
    pub wick2: Vec<f64>,
    pub wick3: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WickCheck {
    pub quantity: String,
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub expected: f64,
    pub estimate: Estimate,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WickReport {
    pub replicas: usize,
    pub checks: Vec<WickCheck>,
}

impl WickReport {
    pub fn max_abs_z(&self) -> f64 {
        self.checks.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }
}

/// z-scores of `E⟨2⟩(x) = 0`, `E⟨3⟩(x) = 0`, `E[⟨2⟩(x)⟨2⟩(y)] = 2C(x−y)²`
/// and `E[⟨3⟩(x)⟨3⟩(y)] = 6C(x−y)³`, with `C` the exact covariance of
/// `⟨1⟩_N(·, t)`.
pub fn wick_identity_report(
    samples: &[WickSample],
    points: &[[f64; 3]],
    pairs: &[(usize, usize)],
    t: f64,
    cutoff: u32,
    alpha: f64,
) -> WickReport {
    let mut checks = Vec::new();
    let mut push = |quantity: &str, x, y, expected: f64, xs: Vec<f64>| {
        let estimate = Estimate::from_samples(&xs);
        checks.push(WickCheck {
            quantity: quantity.to_string(),
            x,
            y,
            expected,
            z: estimate.z_score(expected),
            estimate,
        });
    };
    for (p, &x) in points.iter().enumerate() {
        push("E<2>", x, x, 0.0, samples.iter().map(|s| s.wick2[p]).collect());
        push("E<3>", x, x, 0.0, samples.iter().map(|s| s.wick3[p]).collect());
    }
    for &(i, j) in pairs {
        let (x, y) = (points[i], points[j]);
        let z = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
        let c = covariance(z, t, cutoff, alpha);
        push(
            "E<2><2>",
            x,
            y,
            2.0 * c * c,
            samples.iter().map(|s| s.wick2[i] * s.wick2[j]).collect(),
        );
        push(
            "E<3><3>",
            x,
            y,
            6.0 * c * c * c,
            samples.iter().map(|s| s.wick3[i] * s.wick3[j]).collect(),
        );
    }
    WickReport {
        replicas: samples.len(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ball;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree30_oracle_converges_and_matches_a_plain_square_rule() {
        let (t, alpha) = (1.0, 0.25);
        for n in [FreqIndex([0, 0, 0]), FreqIndex([1, 1, 0])] {
            let a = tree30_second_moment(n, t, 1, alpha, 16);
            let b = tree30_second_moment(n, t, 1, alpha, 32);
            assert!((a - b).abs() <= 1e-10 * b, "{a} {b}");
            // midpoint rule over the whole square, with an ordered-triple loop
            let modes = ball(1).modes().to_vec();
            let k = 400;
            let h = t / k as f64;
            let w = n.bracket();
            let mut sum = 0.0;
            for i in 0..k {
                let x = (i as f64 + 0.5) * h;
                for j in 0..k {
                    let y = (j as f64 + 0.5) * h;
                    let mut c = 0.0;
                    for &n1 in &modes {
                        for &n2 in &modes {
                            let n3 = FreqIndex(std::array::from_fn(|d| n.0[d] - n1.0[d] - n2.0[d]));
                            if n3.norm_sq() <= 1 {
                                c += [n1, n2, n3]
                                    .iter()
                                    .map(|m| crate::renorm::mode_covariance(m.bracket(), x, y, alpha))
                                    .product::<f64>();
                            }
                        }
                    }
                    sum += ((t - x) * w).sin() * ((t - y) * w).sin() / (w * w) * c;
                }
            }
            let plain = 6.0 * sum * h * h;
            assert!((plain - b).abs() <= 1e-4 * b, "{plain} {b}");
        }
    }

    fn decaying_field(cutoff: u32, seed: u64, decay: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpectralField::from_free_fn(cutoff, |n| {
            let a = n.bracket().powf(-decay);
            Complex64::new(rng.random_range(-1.0..1.0) * a, rng.random_range(-1.0..1.0) * a)
        })
    }

    #[test]
    fn hs_norm_examples() {
        assert_eq!(hs_norm(&SpectralField::zeros(3), 1.0), 0.0);
        let f = SpectralField::single_mode(2, FreqIndex::new(1, 1, 1), Complex64::new(1.0, 0.0));
        assert!((hs_norm(&f, 1.0) - 8f64.sqrt()).abs() < 1e-14);
        let g = decaying_field(4, 1, 1.0);
        let grid = g.to_grid(12).unwrap();
        let l2 = grid.mean_sq().sqrt();
        assert!((hs_norm(&g, 0.0) - l2).abs() < 1e-12 * l2);
    }

    #[test]
    fn wsinf_examples() {
        assert_eq!(wsinf_norm(&SpectralField::zeros(2), 0.5, None), 0.0);
        let c = SpectralField::constant(3, -1.7);
        assert!((wsinf_norm(&c, 0.8, None) - 1.7).abs() < 1e-14);
        for seed in 0..3 {
            let f = decaying_field(6, seed, 1.6);
            let coarse = wsinf_norm(&f, -0.35, None);
            let fine = wsinf_norm(&f, -0.35, Some(8 * default_sup_grid(6)));
            assert!(coarse <= fine * (1.0 + 1e-12));
            assert!((fine - coarse) / fine < 0.02, "{coarse} {fine}");
        }
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let modes = free_modes(16);
        let moments: Vec<ModeMoment> = modes
            .iter()
            .map(|n| ModeMoment {
                n: n.0,
                mean: n.bracket().powf(-4.0),
                stderr: 0.0,
            })
            .collect();
        let fit = fit_regularity(&moments, AnnuliSpec::default()).unwrap();
        assert!((fit.slope + 4.0).abs() < 0.01, "{}", fit.slope);
        assert!((fit.s0 - 0.5).abs() < 0.005);
        assert_eq!(fit.annuli.len(), 4);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn fit_needs_enough_annuli() {
        let moments: Vec<ModeMoment> = free_modes(4)
            .iter()
            .map(|n| ModeMoment {
                n: n.0,
                mean: 1.0,
                stderr: 0.0,
            })
            .collect();
        assert!(matches!(
            fit_regularity(&moments, AnnuliSpec::default()),
            Err(DiagnosticsError::InsufficientAnnuli { found: 2, .. })
        ));
    }

    #[test]
    fn noisy_power_law_error_bars_cover_truth() {
        // log-normal multiplicative noise with known per-mode errors
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let moments: Vec<ModeMoment> = free_modes(16)
            .iter()
            .map(|n| {
                let rel = 0.1;
                let noise = 1.0 + rel * (rng.random::<f64>() - 0.5) * 12f64.sqrt();
                ModeMoment {
                    n: n.0,
                    mean: n.bracket().powf(-2.5) * noise,
                    stderr: n.bracket().powf(-2.5) * rel,
                }
            })
            .collect();
        let fit = fit_regularity(&moments, AnnuliSpec::default()).unwrap();
        assert!((fit.slope + 2.5).abs() < 4.0 * fit.stderr, "{fit:?}");
    }

    #[test]
    fn cauchy_of_identical_levels_is_zero() {
        let f = decaying_field(3, 4, 1.0);
        let d = cauchy_norms(&[f.clone(), f.clone(), f], 0.3);
        assert_eq!(d, vec![0.0, 0.0]);
        let table = cauchy_table("x", 0.3, 1.0, &[2, 4, 8], &[d.clone(), d]);
        assert_eq!(table.rows[0].norm.mean, 0.0);
    }

    #[test]
    fn tail_sum_is_difference_of_sigma_like_sums() {
        let (s, t, a) = (0.0, 0.7, 0.25);
        let d = conv1_tail_sum(3, 6, s, t, a);
        let direct = crate::renorm::sigma(t, 6, a) - crate::renorm::sigma(t, 3, a);
        assert!((d - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn xsb_of_zero_and_parseval() {
        let z = Trajectory::zeros(2, 0.1, 10).unwrap();
        assert_eq!(xsb_norm(&z, 0.5, 0.5, Window::Hann).unwrap(), 0.0);
        let dt = 0.05;
        let fields: Vec<SpectralField> = (0..21).map(|k| decaying_field(2, k, 1.0)).collect();
        let tr = Trajectory::new(dt, fields.clone()).unwrap();
        for window in [Window::Hann, Window::Rectangular] {
            let w = window.weights(21);
            let direct: f64 = fields
                .iter()
                .zip(&w)
                .map(|(f, wk)| dt * wk * wk * f.sum_sq())
                .sum();
            let x = xsb_norm(&tr, 0.0, 0.0, window).unwrap();
            assert!((x * x - direct).abs() < 1e-12 * direct);
        }
    }

    #[test]
    fn xsb_is_monotone_in_s_and_b() {
        let fields: Vec<SpectralField> = (0..16).map(|k| decaying_field(3, 100 + k, 1.0)).collect();
        let tr = Trajectory::new(0.05, fields).unwrap();
        let v = |s, b| xsb_norm(&tr, s, b, Window::Hann).unwrap();
        assert!(v(0.0, 0.0) < v(0.5, 0.0) && v(0.5, 0.0) < v(0.5, 0.5));
        assert!(v(0.0, 0.0) < v(0.0, 0.5));
    }

    #[test]
    fn xsb_of_free_wave_concentrates_on_the_cone() {
        // u = e^{i(n·x + ⟨n⟩t)} + c.c.; the windowed transform peaks at
        // |τ| = ⟨n⟩, so b barely matters and the norm is the window mass
        let n = FreqIndex::new(2, 1, 0);
        let w = n.bracket();
        let (dt, k) = (0.01, 1001);
        let fields: Vec<SpectralField> = (0..k)
            .map(|j| {
                let t = j as f64 * dt;
                SpectralField::single_mode(3, n, Complex64::from_polar(1.0, w * t))
            })
            .collect();
        let tr = Trajectory::new(dt, fields).unwrap();
        let hann = Window::Hann.weights(k);
        let mass = 2.0 * dt * hann.iter().map(|x| x * x).sum::<f64>();
        let s = 0.7;
        let x0 = xsb_norm(&tr, s, 0.0, Window::Hann).unwrap();
        assert!((x0 * x0 - w.powf(2.0 * s) * mass).abs() < 1e-10 * x0 * x0, "{} {}", x0 * x0, w.powf(2.0 * s) * mass);
        let xb = xsb_norm(&tr, s, 0.5, Window::Hann).unwrap();
        assert!(xb / x0 < 1.5, "{}", xb / x0);
    }

    #[test]
    fn degenerate_wick_ensemble_has_zero_scores() {
        let samples = vec![
            WickSample {
                wick2: vec![0.0, 0.0],
                wick3: vec![0.0, 0.0],
            };
            10
        ];
        let rep = wick_identity_report(&samples, &[[0.0; 3], [1.0, 0.0, 0.0]], &[(0, 1)], 0.0, 2, 0.25);
        assert!(rep.checks.iter().all(|c| c.estimate.mean == 0.0 && c.z == 0.0));
        // C vanishes at t = 0, so every law is exactly satisfied
        assert_eq!(rep.max_abs_z(), 0.0);
        assert_eq!(ball(2).len(), 33);
    }
}
