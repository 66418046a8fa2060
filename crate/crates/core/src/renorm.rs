//! Renormalization constants and Wick powers.
//!
//! `σ_N(t) = Σ_{|n|≤N} [ t / (2⟨n⟩^{2+2α}) − sin(2t⟨n⟩) / (4⟨n⟩^{3+2α}) ]`
//! is the pointwise variance of the truncated stochastic convolution, and
//! the Wick powers are `u² − σ` and `u³ − 3σu`.

use serde::Serialize;

use crate::lattice::{
    ball, dealiased_grid_size, pointwise_on_grid, FreqIndex, LatticeError, SpectralField,
};
use crate::noise::y_minus_sin;

/// `E|⟨1⟩̂_N(n, t)|² = ∫₀ᵗ [sin((t−t')⟨n⟩) / ⟨n⟩^{1+α}]² dt'` for `|n| ≤ N`.
pub fn mode_variance(n: FreqIndex, t: f64, alpha: f64) -> f64 {
    variance_for_bracket(n.bracket(), t, alpha)
}

/// [`mode_variance`] as a function of `ω = ⟨n⟩`.
pub fn variance_for_bracket(omega: f64, t: f64, alpha: f64) -> f64 {
    omega.powf(-3.0 - 2.0 * alpha) * y_minus_sin(2.0 * t * omega) / 4.0
}

/// `E[⟨1⟩̂(n, t₁) conj ⟨1⟩̂(n, t₂)]` for `ω = ⟨n⟩`; real and symmetric.
pub fn mode_covariance(omega: f64, t1: f64, t2: f64, alpha: f64) -> f64 {
    let (b, d) = (t1.min(t2), (t1 - t2).abs());
    // ½[b cos ωd − (sin ω(t₁+t₂) − sin ωd)/(2ω)] rewritten without cancellation
    let x = omega * b;
    let core = (omega * d).cos() * y_minus_sin(2.0 * x) / (2.0 * omega)
        + (omega * d).sin() * x.sin().powi(2) / omega;
    0.5 * omega.powf(-2.0 - 2.0 * alpha) * core
}

/// Compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Exact renormalization constant `σ_N(t)` by summation over the ball.
pub fn sigma(t: f64, cutoff: u32, alpha: f64) -> f64 {
    assert!(t >= 0.0, "σ_N(t) needs t ≥ 0");
    let b = ball(cutoff);
    // group modes by |n|² so each distinct bracket is evaluated once
    let max_k2 = (cutoff as usize).pow(2);
    let mut mult = vec![0u64; max_k2 + 1];
    for i in 0..b.len() {
        mult[b.norm_sq(i) as usize] += 1;
    }
    let mut acc = KahanSum::default();
    for (k2, &m) in mult.iter().enumerate() {
        if m > 0 {
            let omega = (1.0 + k2 as f64).sqrt();
            acc.add(m as f64 * variance_for_bracket(omega, t, alpha));
        }
    }
    acc.value()
}

/// `σ_N` tabulated on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaTable {
    pub alpha: f64,
    pub cutoff: u32,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SigmaTable {
    pub fn new(alpha: f64, cutoff: u32, times: Vec<f64>) -> Self {
        let values = times.iter().map(|&t| sigma(t, cutoff, alpha)).collect();
        SigmaTable {
            alpha,
            cutoff,
            times,
            values,
        }
    }

    /// Table on the uniform grid `t_k = k dt`, `k = 0..=steps`.
    pub fn uniform(alpha: f64, cutoff: u32, dt: f64, steps: usize) -> Self {
        Self::new(alpha, cutoff, (0..=steps).map(|k| k as f64 * dt).collect())
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Spatial covariance `C(z, t) = E[⟨1⟩_N(x, t) ⟨1⟩_N(x + z, t)]`.
pub fn covariance(z: [f64; 3], t: f64, cutoff: u32, alpha: f64) -> f64 {
    let b = ball(cutoff);
    let mut acc = KahanSum::default();
    for i in 0..b.len() {
        let n = b.mode(i);
        acc.add(variance_for_bracket(b.bracket(i), t, alpha) * n.phase(z).cos());
    }
    acc.value()
}

/// `⟨2⟩ = u² − σ`, kept up to `n_out` (the full support is `2N`).
pub fn wick_square_to(
    u: &SpectralField,
    sigma: f64,
    n_out: u32,
) -> Result<SpectralField, LatticeError> {
    wick_power(u, sigma, n_out, 2)
}

/// `⟨3⟩ = u³ − 3σu`, kept up to `n_out` (the full support is `3N`).
pub fn wick_cube_to(
    u: &SpectralField,
    sigma: f64,
    n_out: u32,
) -> Result<SpectralField, LatticeError> {
    wick_power(u, sigma, n_out, 3)
}

pub fn wick_square(u: &SpectralField, sigma: f64) -> SpectralField {
    wick_square_to(u, sigma, 2 * u.cutoff()).expect("full support is admissible")
}

pub fn wick_cube(u: &SpectralField, sigma: f64) -> SpectralField {
    wick_cube_to(u, sigma, 3 * u.cutoff()).expect("full support is admissible")
}

fn wick_power(
    u: &SpectralField,
    sigma: f64,
    n_out: u32,
    degree: u32,
) -> Result<SpectralField, LatticeError> {
    let support = degree * u.cutoff();
    if n_out > support {
        return Err(LatticeError::OutputBeyondSupport { n_out, support });
    }
    let m = dealiased_grid_size(support, n_out);
    let mut out = pointwise_on_grid(&[u], m, &[n_out], |x, y| {
        let v = x[0];
        y[0] = match degree {
            2 => v * v - sigma,
            _ => v * v * v - 3.0 * sigma * v,
        };
    });
    Ok(out.pop().expect("one output"))
}
