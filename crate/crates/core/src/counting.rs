//! Brute-force enumeration of the lattice counting estimates behind the
//! multilinear bounds, at small dyadic scales.
//!
//! `|n| ∼ 1` means `|n| < 2` and `|n| ∼ N` for `N ≥ 2` means `N ≤ |n| < 2N`.
//! All phases use `κ(n̄) = ε₀⟨n₁₂₃⟩ + ε₁⟨n₁⟩ + ε₂⟨n₂⟩ + ε₃⟨n₃⟩`, and the
//! constraint `|κ − m| ≤ 1` is resolved for every integer `m` at once by
//! histogramming.
//!
//! Sums are exact: every term is rounded once to a multiple of `2⁻⁸⁰` and
//! accumulated in `i128`, so the result does not depend on loop order,
//! symmetry reduction or worker count.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Raw inner iterations allowed per check.
pub const DEFAULT_BUDGET: u64 = 10_000_000_000;

const FIXED_SCALE: f64 = (1u128 << 80) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CountingError {
    #[error("enumeration needs {needed} iterations, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("scale {0} is not a power of two ≥ 1")]
    BadScale(u32),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("invalid pairing: {0}")]
    BadPairing(String),
}

fn to_fixed(x: f64) -> i128 {
    (x * FIXED_SCALE).round() as i128
}

fn from_fixed(v: i128) -> f64 {
    v as f64 / FIXED_SCALE
}

/// Which counting estimate a report refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Lemma {
    /// Weighted cubic sum, bound `N_max^{2(s−β)}`.
    CubicSum,
    /// Lattice count at fixed `(n, m)`, bound `med³·min²`.
    LatticeCount,
    /// Resonant `(m, n₁)` sum, bound `log(2+N₁)/⟨n₂₃⟩`.
    Resonant,
    /// Double sum at fixed `n₁`, bound `max(N₁,N₂)^{−β+ε}`.
    Quartic,
    /// Quintic sum at unit scales.
    Quintic,
    /// Septic paired sum at unit scales.
    Septic,
}

impl Lemma {
    pub fn id(self) -> &'static str {
        match self {
            Lemma::CubicSum => "cubic_sum",
            Lemma::LatticeCount => "lattice_count",
            Lemma::Resonant => "resonant",
            Lemma::Quartic => "quartic",
            Lemma::Quintic => "quintic",
            Lemma::Septic => "septic",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// `(ε₀, ε₁, ε₂, ε₃)`, each `±1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SignTuple(pub [i8; 4]);

impl SignTuple {
    /// All 16 tuples; bit `j` of the index set means `ε_j = −1`.
    pub fn all() -> Vec<SignTuple> {
        (0..16u8)
            .map(|b| {
                let mut e = [1i8; 4];
                for (j, ej) in e.iter_mut().enumerate() {
                    if b >> j & 1 == 1 {
                        *ej = -1;
                    }
                }
                SignTuple(e)
            })
            .collect()
    }

    fn f(self) -> [f64; 4] {
        self.0.map(f64::from)
    }
}

impl fmt::Display for SignTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|&e| if e > 0 { '+' } else { '-' }).collect();
        f.write_str(&s)
    }
}

/// One enumeration result.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingReport {
    pub lemma: Lemma,
    pub scales: Vec<u32>,
    pub signs: Vec<i8>,
    pub parameters: String,
    pub lhs: f64,
    pub bound_form: String,
    pub bound: f64,
    pub ratio: f64,
    /// Inner iterations actually performed.
    pub iterations: u64,
}

/// Points with `|n| ∼ N`.
pub fn dyadic_block(scale: u32) -> Result<Vec<[i32; 3]>, CountingError> {
    if scale == 0 || !scale.is_power_of_two() {
        return Err(CountingError::BadScale(scale));
    }
    let (lo, hi) = block_range(scale);
    let r = (2 * scale) as i32;
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let k = (a * a + b * b + c * c) as i64;
                if k >= lo && k < hi {
                    out.push([a, b, c]);
                }
            }
        }
    }
    Ok(out)
}

/// `[lo, hi)` in `|n|²`.
fn block_range(scale: u32) -> (i64, i64) {
    let n = scale as i64;
    if n == 1 {
        (0, 4)
    } else {
        (n * n, 4 * n * n)
    }
}

fn in_block(k2: i64, range: (i64, i64)) -> bool {
    k2 >= range.0 && k2 < range.1
}

/// Octahedral orbit representatives `0 ≤ a ≤ b ≤ c` with orbit sizes.
fn orbit_reps(points: &[[i32; 3]]) -> Vec<([i32; 3], u64)> {
    let mut map: BTreeMap<[i32; 3], u64> = BTreeMap::new();
    for p in points {
        let mut c = p.map(i32::abs);
        c.sort_unstable();
        *map.entry(c).or_default() += 1;
    }
    map.into_iter().collect()
}

fn norm_sq(n: [i32; 3]) -> i64 {
    n.iter().map(|&x| (x as i64) * (x as i64)).sum()
}

fn add(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [i32; 3], b: [i32; 3]) -> [i32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn max_norm_sq(points: &[[i32; 3]]) -> i64 {
    points.iter().map(|&p| norm_sq(p)).max().unwrap_or(0)
}

/// `⟨n⟩^p` tabulated by `|n|²`.
struct PowTable(Vec<f64>);

impl PowTable {
    fn new(max_k2: i64, p: f64) -> Self {
        PowTable((0..=max_k2).map(|k| (1.0 + k as f64).powf(p / 2.0)).collect())
    }

    fn at(&self, k2: i64) -> f64 {
        self.0[k2 as usize]
    }
}

/// Integers `m` with `|x − m| ≤ 1`.
fn admissible(x: f64) -> RangeInclusive<i64> {
    ((x - 1.0).ceil() as i64)..=((x + 1.0).floor() as i64)
}

fn jb_int(m: i64) -> f64 {
    (1.0 + (m * m) as f64).sqrt()
}

fn check_budget(needed: u64, budget: u64) -> Result<(), CountingError> {
    if needed > budget {
        Err(CountingError::BudgetExceeded { needed, budget })
    } else {
        Ok(())
    }
}

fn check_scales(scales: &[u32]) -> Result<(), CountingError> {
    match scales.iter().find(|&&s| s == 0 || !s.is_power_of_two()) {
        Some(&s) => Err(CountingError::BadScale(s)),
        None => Ok(()),
    }
}

/// Histograms over `m ∈ [−K, K]`, one per sign tuple.
#[derive(Clone)]
struct Histograms {
    offset: i64,
    width: usize,
    bins: Vec<i128>,
}

impl Histograms {
    fn new(signs: usize, kappa_max: f64) -> Self {
        let offset = kappa_max.ceil() as i64 + 2;
        let width = (2 * offset + 1) as usize;
        Histograms {
            offset,
            width,
            bins: vec![0; signs * width],
        }
    }

    fn add(&mut self, sign: usize, kappa: f64, v: i128) {
        for m in admissible(kappa) {
            self.bins[sign * self.width + (m + self.offset) as usize] += v;
        }
    }

    fn merge(mut self, other: Histograms) -> Histograms {
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
        self
    }

    fn sup(&self, sign: usize) -> i128 {
        self.bins[sign * self.width..(sign + 1) * self.width]
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    fn clear(&mut self) {
        self.bins.iter_mut().for_each(|b| *b = 0);
    }
}

fn kappa(e: [f64; 4], b: [f64; 4]) -> f64 {
    e[0] * b[0] + e[1] * b[1] + e[2] * b[2] + e[3] * b[3]
}

struct Blocks {
    pts: [Vec<[i32; 3]>; 3],
    ranges: [(i64, i64); 3],
    /// Largest possible `|n₁₂₃|²`.
    max_k2: i64,
}

impl Blocks {
    fn new(scales: [u32; 3]) -> Result<Self, CountingError> {
        check_scales(&scales)?;
        let pts = [
            dyadic_block(scales[0])?,
            dyadic_block(scales[1])?,
            dyadic_block(scales[2])?,
        ];
        let r: f64 = pts.iter().map(|p| (max_norm_sq(p) as f64).sqrt()).sum();
        Ok(Blocks {
            ranges: scales.map(block_range),
            max_k2: (r * r).ceil() as i64 + 1,
            pts,
        })
    }

    fn kappa_max(&self) -> f64 {
        4.0 * (1.0 + self.max_k2 as f64).sqrt()
    }
}

fn validate_sb(s: f64, beta: f64) -> Result<(), CountingError> {
    if !(s > 0.0 && s <= 0.5) {
        return Err(CountingError::BadParameter(format!("s = {s} not in (0, 1/2]")));
    }
    if !(0.0..=0.5).contains(&beta) {
        return Err(CountingError::BadParameter(format!("beta = {beta} not in [0, 1/2]")));
    }
    Ok(())
}

/// `sup_m Σ_{|n_j|∼N_j} ⟨n₁₂₃⟩^{2(s−1)} 1{|κ−m|≤1} / (⟨n₁₂⟩^{2β} ∏⟨n_j⟩²)`
/// against `N_max^{2(s−β)}`.
pub fn check_cubic_sum(
    s: f64,
    beta: f64,
    scales: [u32; 3],
    signs: &[SignTuple],
    budget: u64,
) -> Result<Vec<CountingReport>, CountingError> {
    validate_sb(s, beta)?;
    let bl = Blocks::new(scales)?;
    let reps = orbit_reps(&bl.pts[0]);
    let needed = reps.len() as u64 * bl.pts[1].len() as u64 * bl.pts[2].len() as u64;
    check_budget(needed, budget)?;
    let hist = cubic_sum_histograms(s, beta, &bl, &reps, signs);
    let n_max = *scales.iter().max().expect("three scales") as f64;
    let bound = n_max.powf(2.0 * (s - beta));
    Ok(signs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let lhs = from_fixed(hist.sup(i));
            CountingReport {
                lemma: Lemma::CubicSum,
                scales: scales.to_vec(),
                signs: e.0.to_vec(),
                parameters: format!("s={s};beta={beta}"),
                lhs,
                bound_form: "N_max^(2(s-beta))".into(),
                bound,
                ratio: lhs / bound,
                iterations: needed,
            }
        })
        .collect())
}

pub(crate) struct CubicWeights {
    w123: PowTable,
    w12: PowTable,
    inv2: PowTable,
    br: PowTable,
}

impl CubicWeights {
    fn new(s: f64, beta: f64, max_k2: i64) -> Self {
        CubicWeights {
            w123: PowTable::new(max_k2, 2.0 * (s - 1.0)),
            w12: PowTable::new(max_k2, -2.0 * beta),
            inv2: PowTable::new(max_k2, -2.0),
            br: PowTable::new(max_k2, 1.0),
        }
    }

    /// Rounded summand and the four brackets `(⟨n₁₂₃⟩, ⟨n₁⟩, ⟨n₂⟩, ⟨n₃⟩)`.
    fn term(&self, k: [i64; 3], k12: i64, k123: i64) -> (i128, [f64; 4]) {
        let t = self.w123.at(k123)
            * self.w12.at(k12)
            * self.inv2.at(k[0])
            * self.inv2.at(k[1])
            * self.inv2.at(k[2]);
        let b = [self.br.at(k123), self.br.at(k[0]), self.br.at(k[1]), self.br.at(k[2])];
        (to_fixed(t), b)
    }
}

fn cubic_sum_histograms(
    s: f64,
    beta: f64,
    bl: &Blocks,
    reps: &[([i32; 3], u64)],
    signs: &[SignTuple],
) -> Histograms {
    let w = CubicWeights::new(s, beta, bl.max_k2);
    let es: Vec<[f64; 4]> = signs.iter().map(|e| e.f()).collect();
    let empty = Histograms::new(signs.len(), bl.kappa_max());
    reps.par_iter()
        .map(|&(n1, mult)| {
            let mut h = empty.clone();
            let k1 = norm_sq(n1);
            for &n2 in &bl.pts[1] {
                let n12 = add(n1, n2);
                let (k2, k12) = (norm_sq(n2), norm_sq(n12));
                for &n3 in &bl.pts[2] {
                    let k3 = norm_sq(n3);
                    let (t, b) = w.term([k1, k2, k3], k12, norm_sq(add(n12, n3)));
                    let t = t * mult as i128;
                    for (i, &e) in es.iter().enumerate() {
                        h.add(i, kappa(e, b), t);
                    }
                }
            }
            h
        })
        .reduce(|| empty.clone(), Histograms::merge)
}

fn median3(mut v: [u32; 3]) -> (u32, u32) {
    v.sort_unstable();
    (v[1], v[0])
}

/// `sup_{m,n} #{(n₁,n₂,n₃): |n_j|∼N_j, n₁₂₃ = n, |κ−m| ≤ 1}` against
/// `med(N)³ min(N)²`.
pub fn check_lattice_count(
    scales: [u32; 3],
    signs: &[SignTuple],
    budget: u64,
) -> Result<Vec<CountingReport>, CountingError> {
    let bl = Blocks::new(scales)?;
    let r = (bl.max_k2 as f64).sqrt().floor() as i32;
    let mut ball = Vec::new();
    for a in 0..=r {
        for b in a..=r {
            for c in b..=r {
                if (a * a + b * b + c * c) as i64 <= bl.max_k2 {
                    ball.push([a, b, c]);
                }
            }
        }
    }
    let needed = ball.len() as u64 * bl.pts[0].len() as u64 * bl.pts[1].len() as u64;
    check_budget(needed, budget)?;
    let br = PowTable::new(bl.max_k2, 1.0);
    let es: Vec<[f64; 4]> = signs.iter().map(|e| e.f()).collect();
    let empty = Histograms::new(signs.len(), bl.kappa_max());
    let r23 = (max_norm_sq(&bl.pts[1]) as f64).sqrt() + (max_norm_sq(&bl.pts[2]) as f64).sqrt();
    let sups: Vec<i128> = ball
        .par_iter()
        .fold(
            || (empty.clone(), vec![0i128; signs.len()]),
            |(mut h, mut best), &n| {
                h.clear();
                let kn = norm_sq(n);
                for &n1 in &bl.pts[0] {
                    let d = sub(n, n1);
                    if (norm_sq(d) as f64).sqrt() > r23 + 1e-9 {
                        continue;
                    }
                    let k1 = norm_sq(n1);
                    for &n2 in &bl.pts[1] {
                        let n3 = sub(d, n2);
                        let k3 = norm_sq(n3);
                        if !in_block(k3, bl.ranges[2]) {
                            continue;
                        }
                        let b = [br.at(kn), br.at(k1), br.at(norm_sq(n2)), br.at(k3)];
                        for (i, &e) in es.iter().enumerate() {
                            h.add(i, kappa(e, b), 1);
                        }
                    }
                }
                for (i, slot) in best.iter_mut().enumerate() {
                    *slot = (*slot).max(h.sup(i));
                }
                (h, best)
            },
        )
        .map(|(_, best)| best)
        .reduce(
            || vec![0i128; signs.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| *x.max(y)).collect(),
        );
    let (med, min) = median3(scales);
    let bound = (med as f64).powi(3) * (min as f64).powi(2);
    Ok(signs
        .iter()
        .zip(sups)
        .map(|(e, c)| CountingReport {
            lemma: Lemma::LatticeCount,
            scales: scales.to_vec(),
            signs: e.0.to_vec(),
            parameters: String::new(),
            lhs: c as f64,
            bound_form: "med^3*min^2".into(),
            bound,
            ratio: c as f64 / bound,
            iterations: needed,
        })
        .collect())
}

/// `sup_{n₂,n₃} ⟨n₂₃⟩ Σ_m Σ_{|n₁|∼N₁} 1{|κ−m|≤1} / (⟨m⟩⟨n₁₂₃⟩⟨n₁⟩²)`
/// against `log(2+N₁)`; `n₂`, `n₃` range over their blocks.
pub fn check_resonant(
    scales: [u32; 3],
    signs: &[SignTuple],
    budget: u64,
) -> Result<Vec<CountingReport>, CountingError> {
    let bl = Blocks::new(scales)?;
    let reps = orbit_reps(&bl.pts[1]);
    let needed = reps.len() as u64 * bl.pts[2].len() as u64 * bl.pts[0].len() as u64;
    check_budget(needed, budget)?;
    let br = PowTable::new(bl.max_k2, 1.0);
    let inv2 = PowTable::new(bl.max_k2, -2.0);
    let es: Vec<[f64; 4]> = signs.iter().map(|e| e.f()).collect();
    let log_n1 = (2.0 + scales[0] as f64).ln();
    // per sign: (best ratio, lhs, ⟨n₂₃⟩)
    let worst = |a: Vec<(f64, f64, f64)>, b: Vec<(f64, f64, f64)>| {
        a.into_iter()
            .zip(b)
            .map(|(x, y)| if y.0 > x.0 { y } else { x })
            .collect::<Vec<_>>()
    };
    let init = vec![(f64::NEG_INFINITY, 0.0, 1.0); signs.len()];
    let best = reps
        .par_iter()
        .map(|&(n2, _)| {
            let mut best = init.clone();
            let mut acc = vec![0i128; signs.len()];
            for &n3 in &bl.pts[2] {
                acc.iter_mut().for_each(|a| *a = 0);
                let n23 = add(n2, n3);
                let (k2, k3) = (norm_sq(n2), norm_sq(n3));
                for &n1 in &bl.pts[0] {
                    let k1 = norm_sq(n1);
                    let k123 = norm_sq(add(n1, n23));
                    let base = inv2.at(k1) / br.at(k123);
                    let b = [br.at(k123), br.at(k1), br.at(k2), br.at(k3)];
                    for (i, &e) in es.iter().enumerate() {
                        let x = kappa(e, b);
                        let mut sm = 0.0;
                        for m in admissible(x) {
                            sm += 1.0 / jb_int(m);
                        }
                        acc[i] += to_fixed(base * sm);
                    }
                }
                let w23 = br.at(norm_sq(n23));
                for (i, a) in acc.iter().enumerate() {
                    let lhs = from_fixed(*a);
                    let ratio = lhs * w23 / log_n1;
                    if ratio > best[i].0 {
                        best[i] = (ratio, lhs, w23);
                    }
                }
            }
            best
        })
        .reduce(|| init.clone(), worst);
    Ok(signs
        .iter()
        .zip(best)
        .map(|(e, (ratio, lhs, w23))| CountingReport {
            lemma: Lemma::Resonant,
            scales: scales.to_vec(),
            signs: e.0.to_vec(),
            parameters: String::new(),
            lhs,
            bound_form: "log(2+N1)/<n23>".into(),
            bound: log_n1 / w23,
            ratio,
            iterations: needed,
        })
        .collect())
}

/// `sup_{m, |n₁|∼N₁} Σ_{|n₂|∼N₂, |n₃|∼N₃} 1{|κ₂−m|≤1} / (⟨n₁₂₃⟩⟨n₁₂⟩^β⟨n₂⟩²⟨n₃⟩²)`
/// against `max(N₁,N₂)^{−β+ε}`, with
/// `κ₂ = ε₁₂₃⟨n₁₂₃⟩ − ε₁⟨n₁⟩ − ε₂⟨n₂⟩ − ε₃⟨n₃⟩`; `signs` are `(ε₁₂₃, ε₁, ε₂, ε₃)`.
pub fn check_a5(
    beta: f64,
    eps: f64,
    scales: [u32; 3],
    signs: &[SignTuple],
    budget: u64,
) -> Result<Vec<CountingReport>, CountingError> {
    if !(beta > 0.0) || !(eps > 0.0) {
        return Err(CountingError::BadParameter(format!(
            "beta = {beta}, eps = {eps}: both must be positive"
        )));
    }
    let bl = Blocks::new(scales)?;
    let reps = orbit_reps(&bl.pts[0]);
    let needed = reps.len() as u64 * bl.pts[1].len() as u64 * bl.pts[2].len() as u64;
    check_budget(needed, budget)?;
    let br = PowTable::new(bl.max_k2, 1.0);
    let inv1 = PowTable::new(bl.max_k2, -1.0);
    let w12 = PowTable::new(bl.max_k2, -beta);
    let inv2 = PowTable::new(bl.max_k2, -2.0);
    // κ₂ in the κ form: (ε₀, ε₁, ε₂, ε₃) = (ε₁₂₃, −ε₁, −ε₂, −ε₃)
    let es: Vec<[f64; 4]> = signs
        .iter()
        .map(|e| {
            let f = e.f();
            [f[0], -f[1], -f[2], -f[3]]
        })
        .collect();
    let empty = Histograms::new(signs.len(), bl.kappa_max());
    let best = reps
        .par_iter()
        .map(|&(n1, _)| {
            let mut h = empty.clone();
            let k1 = norm_sq(n1);
            for &n2 in &bl.pts[1] {
                let n12 = add(n1, n2);
                let (k2, k12) = (norm_sq(n2), norm_sq(n12));
                for &n3 in &bl.pts[2] {
                    let k3 = norm_sq(n3);
                    let k123 = norm_sq(add(n12, n3));
                    let t = inv1.at(k123) * w12.at(k12) * inv2.at(k2) * inv2.at(k3);
                    let t = to_fixed(t);
                    let b = [br.at(k123), br.at(k1), br.at(k2), br.at(k3)];
                    for (i, &e) in es.iter().enumerate() {
                        h.add(i, kappa(e, b), t);
                    }
                }
            }
            (0..signs.len()).map(|i| h.sup(i)).collect::<Vec<i128>>()
        })
        .reduce(
            || vec![0i128; signs.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| *x.max(y)).collect(),
        );
    let bound = (scales[0].max(scales[1]) as f64).powf(-beta + eps);
    Ok(signs
        .iter()
        .zip(best)
        .map(|(e, v)| {
            let lhs = from_fixed(v);
            CountingReport {
                lemma: Lemma::Quartic,
                scales: scales.to_vec(),
                signs: e.0.to_vec(),
                parameters: format!("beta={beta};eps={eps}"),
                lhs,
                bound_form: "max(N1,N2)^(-beta+eps)".into(),
                bound,
                ratio: lhs / bound,
                iterations: needed,
            }
        })
        .collect())
}

/// Settings for the standard four-estimate suite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub s: f64,
    pub beta: f64,
    pub beta_a5: f64,
    pub eps: f64,
    pub budget: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            s: 0.25,
            beta: 0.25,
            beta_a5: 0.25,
            eps: 0.01,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// All four estimates on the diagonal ladder `(N, N, N)`, all sign tuples.
pub fn run_suite(ladder: &[u32], cfg: SuiteConfig) -> Result<Vec<CountingReport>, CountingError> {
    let signs = SignTuple::all();
    let mut out = Vec::new();
    for &n in ladder {
        let sc = [n, n, n];
        out.extend(check_cubic_sum(cfg.s, cfg.beta, sc, &signs, cfg.budget)?);
        out.extend(check_lattice_count(sc, &signs, cfg.budget)?);
        out.extend(check_resonant(sc, &signs, cfg.budget)?);
        out.extend(check_a5(cfg.beta_a5, cfg.eps, sc, &signs, cfg.budget)?);
    }
    Ok(out)
}

/// Spread `max ratio / min ratio` across scales for each (lemma, signs).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderSpread {
    pub lemma: Lemma,
    pub signs: Vec<i8>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub spread: f64,
}

pub fn ladder_spreads(reports: &[CountingReport]) -> Vec<LadderSpread> {
    let mut groups: BTreeMap<(Lemma, Vec<i8>), (f64, f64)> = BTreeMap::new();
    for r in reports {
        let g = groups
            .entry((r.lemma, r.signs.clone()))
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        g.0 = g.0.min(r.ratio);
        g.1 = g.1.max(r.ratio);
    }
    groups
        .into_iter()
        .map(|((lemma, signs), (lo, hi))| LadderSpread {
            lemma,
            signs,
            min_ratio: lo,
            max_ratio: hi,
            spread: hi / lo,
        })
        .collect()
}

fn unit_block() -> Vec<[i32; 3]> {
    dyadic_block(1).expect("unit scale")
}

/// Signs `(ε₁₂₃, ε₀, ε₁, …, ε₅)` of the quintic estimate.
pub type QuinticSigns = [i8; 7];

/// Quintic estimate at unit scales: `sup_{m,m'}` of
/// `Σ ⟨n₁₂₃₄₅⟩^{2(s−1)} / (⟨n₁₂₃₄⟩^{2β}⟨n₁₂⟩^{2β}⟨n₁₂₃⟩² ∏⟨n_j⟩²)
///  · 1{|κ₂−m|≤1} (1{|κ₃−m'|≤1} + 1{|κ₄−m'|≤1})`
/// with every `|n_j| < 2`; the bound is `1` at these scales.
pub fn check_quintic(
    s: f64,
    beta: f64,
    eta: f64,
    signs: &[QuinticSigns],
) -> Result<Vec<CountingReport>, CountingError> {
    if !(eta > 0.0 && s <= 0.5 - eta && beta > 0.0) {
        return Err(CountingError::BadParameter(format!(
            "need s ≤ 1/2 − eta, eta > 0, beta > 0 (s = {s}, eta = {eta}, beta = {beta})"
        )));
    }
    let pts = unit_block();
    let max_k2 = 5 * 5 * 3;
    let br = PowTable::new(max_k2, 1.0);
    let w5 = PowTable::new(max_k2, 2.0 * (s - 1.0));
    let wb = PowTable::new(max_k2, -2.0 * beta);
    let inv2 = PowTable::new(max_k2, -2.0);
    let reps = orbit_reps(&pts);
    let k_off: i64 = 16;
    let width = (2 * k_off + 1) as usize;
    let per_sign = width * width;
    let empty = vec![0i128; signs.len() * per_sign];
    let sgn: Vec<[f64; 7]> = signs.iter().map(|e| e.map(f64::from)).collect();
    let hist = reps
        .par_iter()
        .map(|&(n1, mult)| {
            let mut h = empty.clone();
            for &n2 in &pts {
                let n12 = add(n1, n2);
                for &n3 in &pts {
                    let n123 = add(n12, n3);
                    for &n4 in &pts {
                        let n1234 = add(n123, n4);
                        for &n5 in &pts {
                            let n12345 = add(n1234, n5);
                            let k = [n1, n2, n3, n4, n5].map(norm_sq);
                            let (k12, k123, k1234, k12345) =
                                (norm_sq(n12), norm_sq(n123), norm_sq(n1234), norm_sq(n12345));
                            let t = w5.at(k12345)
                                * wb.at(k1234)
                                * wb.at(k12)
                                * inv2.at(k123)
                                * inv2.at(k[0])
                                * inv2.at(k[1])
                                * inv2.at(k[2])
                                * inv2.at(k[3])
                                * inv2.at(k[4]);
                            let t = to_fixed(t) * mult as i128;
                            let b = k.map(|x| br.at(x));
                            let (b123, b5) = (br.at(k123), br.at(k12345));
                            for (i, e) in sgn.iter().enumerate() {
                                let k2 = e[0] * b123 - e[2] * b[0] - e[3] * b[1] - e[4] * b[2];
                                let k3 = e[1] * b5 + e[0] * b123 + e[5] * b[3] + e[6] * b[4];
                                let k4 = e[1] * b5
                                    + e[2] * b[0]
                                    + e[3] * b[1]
                                    + e[4] * b[2]
                                    + e[5] * b[3]
                                    + e[6] * b[4];
                                let base = i * per_sign;
                                for m in admissible(k2) {
                                    let row = base + (m + k_off) as usize * width;
                                    for mp in admissible(k3).chain(admissible(k4)) {
                                        h[row + (mp + k_off) as usize] += t;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            h
        })
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let iterations = reps.len() as u64 * (pts.len() as u64).pow(4);
    Ok(signs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let sup = hist[i * per_sign..(i + 1) * per_sign]
                .iter()
                .copied()
                .max()
                .unwrap_or(0);
            let lhs = from_fixed(sup);
            CountingReport {
                lemma: Lemma::Quintic,
                scales: vec![1; 5],
                signs: e.to_vec(),
                parameters: format!("s={s};beta={beta};eta={eta}"),
                lhs,
                bound_form: "max(N1..N4)^(-2beta+eps)*N5^(-eta)".into(),
                bound: 1.0,
                ratio: lhs,
                iterations,
            }
        })
        .collect())
}

/// A pairing on `{1, …, 7}` that never pairs two indices of the same block
/// of `{{1,2,3}, {4,5,6}, {7}}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing(Vec<(usize, usize)>);

impl Pairing {
    pub fn new(pairs: &[(usize, usize)]) -> Result<Self, CountingError> {
        if pairs.is_empty() {
            return Err(CountingError::BadPairing("empty pairing".into()));
        }
        let block = |j: usize| (j - 1) / 3;
        let mut used = [false; 8];
        for &(i, j) in pairs {
            if !(1..=7).contains(&i) || !(1..=7).contains(&j) || i == j {
                return Err(CountingError::BadPairing(format!("({i},{j})")));
            }
            if block(i) == block(j) {
                return Err(CountingError::BadPairing(format!("({i},{j}) inside one block")));
            }
            if used[i] || used[j] {
                return Err(CountingError::BadPairing(format!("index reused in ({i},{j})")));
            }
            used[i] = true;
            used[j] = true;
        }
        Ok(Pairing(pairs.to_vec()))
    }

    fn unpaired(&self) -> Vec<usize> {
        (1..=7)
            .filter(|j| !self.0.iter().any(|&(a, b)| a == *j || b == *j))
            .collect()
    }
}

/// Septic paired estimate at unit scales, every `|n_j| < 2` and all four
/// composite blocks at scale one:
/// `Σ_unpaired ⟨n_nr⟩^{2(s−1)} (Σ_paired 𝒦(n₁,n₂,n₃)𝒦(n₄,n₅,n₆)/⟨n₇⟩)²`,
/// `𝒦 = Σ_m 1{|κ₂−m|≤1} / (⟨m⟩⟨n₁₂₃⟩⟨n₁₂⟩^β ∏⟨n_j⟩)`; signs `(ε₁₂₃, ε₁, ε₂, ε₃)`.
pub fn check_septic(
    s: f64,
    beta: f64,
    pairing: &Pairing,
    signs: SignTuple,
) -> Result<CountingReport, CountingError> {
    if !(s > 0.5 && s < 1.0 && beta > 0.0) {
        return Err(CountingError::BadParameter(format!(
            "need 1/2 < s < 1 and beta > 0 (s = {s}, beta = {beta})"
        )));
    }
    let pts = unit_block();
    let np = pts.len();
    let max_k2 = 7 * 7 * 3;
    let br = PowTable::new(max_k2, 1.0);
    let e = signs.f();
    // 𝒦 on the unit block, indexed by point indices
    let mut k_table = vec![0.0; np * np * np];
    for (a, &n1) in pts.iter().enumerate() {
        for (b, &n2) in pts.iter().enumerate() {
            for (c, &n3) in pts.iter().enumerate() {
                let n12 = add(n1, n2);
                let n123 = add(n12, n3);
                let bj = [norm_sq(n1), norm_sq(n2), norm_sq(n3)].map(|k| br.at(k));
                let b123 = br.at(norm_sq(n123));
                let k2 = e[0] * b123 - e[1] * bj[0] - e[2] * bj[1] - e[3] * bj[2];
                let mut sm = 0.0;
                for m in admissible(k2) {
                    sm += 1.0 / jb_int(m);
                }
                k_table[(a * np + b) * np + c] = sm
                    / (b123 * br.at(norm_sq(n12)).powf(beta) * bj[0] * bj[1] * bj[2]);
            }
        }
    }
    let index: BTreeMap<[i32; 3], usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let unpaired = pairing.unpaired();
    let pairs = pairing.0.clone();
    let outer = np.pow(unpaired.len() as u32);
    let inner = np.pow(pairs.len() as u32);
    let w_nr = PowTable::new(max_k2, 2.0 * (s - 1.0));
    let unit = block_range(1);
    let total: i128 = (0..outer)
        .into_par_iter()
        .map(|o| {
            let mut idx = [0usize; 8];
            let mut rest = o;
            for &j in &unpaired {
                idx[j] = rest % np;
                rest /= np;
            }
            let n_nr = unpaired
                .iter()
                .fold([0, 0, 0], |acc, &j| add(acc, pts[idx[j]]));
            let mut acc: i128 = 0;
            for q in 0..inner {
                let mut rest = q;
                for &(i, j) in &pairs {
                    let p = pts[rest % np];
                    rest /= np;
                    idx[i] = index[&p];
                    idx[j] = index[&[-p[0], -p[1], -p[2]]];
                }
                let n = |j: usize| pts[idx[j]];
                let n1237 = add(add(add(n(1), n(2)), n(3)), n(7));
                let n456 = add(add(n(4), n(5)), n(6));
                let n_all = add(n1237, n456);
                if !in_block(norm_sq(n1237), unit)
                    || !in_block(norm_sq(n456), unit)
                    || !in_block(norm_sq(n_all), unit)
                {
                    continue;
                }
                let v = k_table[(idx[1] * np + idx[2]) * np + idx[3]]
                    * k_table[(idx[4] * np + idx[5]) * np + idx[6]]
                    / br.at(norm_sq(n(7)));
                acc += to_fixed(v);
            }
            let inner_sum = from_fixed(acc);
            to_fixed(w_nr.at(norm_sq(n_nr)) * inner_sum * inner_sum)
        })
        .sum();
    let lhs = from_fixed(total);
    let label: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}-{b}")).collect();
    Ok(CountingReport {
        lemma: Lemma::Septic,
        scales: vec![1; 4],
        signs: signs.0.to_vec(),
        parameters: format!("s={s};beta={beta};pairing={}", label.join("/")),
        lhs,
        bound_form: "N_max^(2s-1+eps)".into(),
        bound: 1.0,
        ratio: lhs,
        iterations: (outer * inner) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLUS: SignTuple = SignTuple([1, 1, 1, 1]);

    #[test]
    fn block_sizes() {
        assert_eq!(dyadic_block(1).unwrap().len(), 27);
        // 2 ≤ |n| < 4
        let b2 = dyadic_block(2).unwrap();
        assert!(b2.iter().all(|&p| (4..16).contains(&norm_sq(p))));
        let reps = orbit_reps(&b2);
        assert_eq!(reps.iter().map(|r| r.1).sum::<u64>(), b2.len() as u64);
        assert!(dyadic_block(3).is_err());
    }

    #[test]
    fn admissible_integers() {
        assert_eq!(admissible(0.0), -1..=1);
        assert_eq!(admissible(0.5), 0..=1);
        assert_eq!(admissible(-2.25), -3..=-2);
    }

    #[test]
    fn fixed_point_sums_are_exact() {
        let xs: Vec<f64> = (1..200).map(|k| 1.0 / (k as f64).sqrt()).collect();
        let fwd: i128 = xs.iter().map(|&x| to_fixed(x)).sum();
        let rev: i128 = xs.iter().rev().map(|&x| to_fixed(x)).sum();
        assert_eq!(fwd, rev);
        assert!((from_fixed(fwd) - xs.iter().sum::<f64>()).abs() < 1e-12);
    }

    /// Unreduced cubic sum with loops in the order `n₃, n₂, n₁`.
    fn cubic_brute(s: f64, beta: f64, scales: [u32; 3], e: SignTuple) -> f64 {
        let bl = Blocks::new(scales).unwrap();
        let w = CubicWeights::new(s, beta, bl.max_k2);
        let mut h = Histograms::new(1, bl.kappa_max());
        for &n3 in &bl.pts[2] {
            for &n2 in &bl.pts[1] {
                for &n1 in &bl.pts[0] {
                    let n12 = add(n1, n2);
                    let k = [norm_sq(n1), norm_sq(n2), norm_sq(n3)];
                    let (t, b) = w.term(k, norm_sq(n12), norm_sq(add(n12, n3)));
                    h.add(0, kappa(e.f(), b), t);
                }
            }
        }
        from_fixed(h.sup(0))
    }

    #[test]
    fn reduced_enumeration_equals_permuted_brute_force() {
        for e in [PLUS, SignTuple([1, -1, 1, -1]), SignTuple([-1, 1, 1, 1])] {
            for sc in [[1, 1, 1], [2, 1, 1], [1, 1, 2]] {
                let r = check_cubic_sum(0.25, 0.25, sc, &[e], DEFAULT_BUDGET).unwrap();
                assert_eq!(r[0].lhs, cubic_brute(0.25, 0.25, sc, e), "{sc:?} {e}");
            }
        }
    }

    #[test]
    fn cubic_sum_baseline_is_finite_and_positive() {
        let r = check_cubic_sum(0.25, 0.25, [1, 1, 1], &SignTuple::all(), DEFAULT_BUDGET).unwrap();
        assert_eq!(r.len(), 16);
        for x in &r {
            assert!(x.lhs > 0.0 && x.ratio.is_finite());
            assert_eq!(x.bound, 1.0);
        }
    }

    #[test]
    fn cubic_sum_vanishes_far_from_the_kappa_range() {
        let bl = Blocks::new([1, 1, 1]).unwrap();
        let reps = orbit_reps(&bl.pts[0]);
        let h = cubic_sum_histograms(0.25, 0.25, &bl, &reps, &[PLUS]);
        // κ ≥ 4 with all signs positive, so m ≤ 2 is never admissible
        let m = 2;
        assert_eq!(h.bins[(m + h.offset) as usize], 0);
        assert!(h.sup(0) > 0);
    }

    #[test]
    fn budget_is_enforced() {
        assert!(matches!(
            check_cubic_sum(0.25, 0.25, [2, 2, 2], &[PLUS], 10),
            Err(CountingError::BudgetExceeded { .. })
        ));
        assert!(check_cubic_sum(0.6, 0.25, [1, 1, 1], &[PLUS], DEFAULT_BUDGET).is_err());
    }

    /// `sup_{n,m}` count by direct enumeration over all triples.
    fn count_brute(scales: [u32; 3], e: SignTuple) -> f64 {
        let bl = Blocks::new(scales).unwrap();
        let br = |k: i64| (1.0 + k as f64).sqrt();
        let mut counts: BTreeMap<([i32; 3], i64), u64> = BTreeMap::new();
        for &n1 in &bl.pts[0] {
            for &n2 in &bl.pts[1] {
                for &n3 in &bl.pts[2] {
                    let n = add(add(n1, n2), n3);
                    let b = [norm_sq(n), norm_sq(n1), norm_sq(n2), norm_sq(n3)].map(br);
                    for m in admissible(kappa(e.f(), b)) {
                        *counts.entry((n, m)).or_default() += 1;
                    }
                }
            }
        }
        counts.values().copied().max().unwrap_or(0) as f64
    }

    fn jb(n: [i32; 3]) -> f64 {
        (1.0 + norm_sq(n) as f64).sqrt()
    }

    /// Weighted sums written straight from the bracket formulas, with a
    /// plain per-(sign, m) accumulator instead of the histogram.
    fn weighted_brute(
        scales: [u32; 3],
        e: [f64; 4],
        w: impl Fn([i32; 3], [i32; 3], [i32; 3]) -> f64,
        sup_n1: bool,
    ) -> f64 {
        let bl = Blocks::new(scales).unwrap();
        let mut best = 0.0f64;
        let outer: Vec<Vec<[i32; 3]>> = if sup_n1 {
            bl.pts[0].iter().map(|&p| vec![p]).collect()
        } else {
            vec![bl.pts[0].clone()]
        };
        for group in outer {
            let mut sums: BTreeMap<i64, f64> = BTreeMap::new();
            for &n1 in &group {
                for &n2 in &bl.pts[1] {
                    for &n3 in &bl.pts[2] {
                        let n = add(add(n1, n2), n3);
                        let x = e[0] * jb(n) + e[1] * jb(n1) + e[2] * jb(n2) + e[3] * jb(n3);
                        let v = w(n1, n2, n3);
                        for m in ((x - 1.0).ceil() as i64)..=((x + 1.0).floor() as i64) {
                            *sums.entry(m).or_default() += v;
                        }
                    }
                }
            }
            best = sums.values().fold(best, |a, &b| a.max(b));
        }
        best
    }

    #[test]
    fn weighted_sums_match_direct_formulas() {
        let (s, beta) = (0.25, 0.25);
        for e in [PLUS, SignTuple([-1, 1, -1, 1])] {
            for sc in [[1, 1, 1], [2, 1, 1], [1, 1, 2]] {
                let got = check_cubic_sum(s, beta, sc, &[e], DEFAULT_BUDGET).unwrap()[0].lhs;
                let want = weighted_brute(
                    sc,
                    e.f(),
                    |a, b, c| {
                        jb(add(add(a, b), c)).powf(2.0 * (s - 1.0))
                            / (jb(add(a, b)).powf(2.0 * beta)
                                * (jb(a) * jb(b) * jb(c)).powi(2))
                    },
                    false,
                );
                assert!((got - want).abs() <= 1e-12 * want, "cubic {sc:?} {e}: {got} vs {want}");

                let got = check_a5(beta, 0.01, sc, &[e], DEFAULT_BUDGET).unwrap()[0].lhs;
                let f = e.f();
                let want = weighted_brute(
                    sc,
                    [f[0], -f[1], -f[2], -f[3]],
                    |a, b, c| {
                        1.0 / (jb(add(add(a, b), c))
                            * jb(add(a, b)).powf(beta)
                            * (jb(b) * jb(c)).powi(2))
                    },
                    true,
                );
                assert!((got - want).abs() <= 1e-12 * want, "quartic {sc:?} {e}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn resonant_matches_direct_formula() {
        let sc = [2, 1, 1];
        let bl = Blocks::new(sc).unwrap();
        let e = SignTuple([1, -1, 1, -1]);
        let f = e.f();
        let mut best = 0.0f64;
        for &n2 in &bl.pts[1] {
            for &n3 in &bl.pts[2] {
                let mut sum = 0.0;
                for &n1 in &bl.pts[0] {
                    let n = add(add(n1, n2), n3);
                    let x = f[0] * jb(n) + f[1] * jb(n1) + f[2] * jb(n2) + f[3] * jb(n3);
                    for m in ((x - 1.0).ceil() as i64)..=((x + 1.0).floor() as i64) {
                        sum += 1.0 / ((1.0 + (m * m) as f64).sqrt() * jb(n) * jb(n1).powi(2));
                    }
                }
                best = best.max(sum * jb(add(n2, n3)) / 4f64.ln());
            }
        }
        let got = check_resonant(sc, &[e], DEFAULT_BUDGET).unwrap()[0].ratio;
        assert!((got - best).abs() <= 1e-12 * best, "{got} vs {best}");
    }

    #[test]
    fn lattice_count_matches_direct_enumeration() {
        for e in [PLUS, SignTuple([-1, 1, -1, 1])] {
            for sc in [[1, 1, 1], [1, 2, 1]] {
                let r = check_lattice_count(sc, &[e], DEFAULT_BUDGET).unwrap();
                assert_eq!(r[0].lhs, count_brute(sc, e), "{sc:?} {e}");
            }
        }
    }

    #[test]
    fn lattice_count_with_two_unit_scales_stays_bounded() {
        let signs = SignTuple::all();
        let c1 = check_lattice_count([1, 1, 1], &signs, DEFAULT_BUDGET).unwrap();
        let c4 = check_lattice_count([1, 1, 4], &signs, DEFAULT_BUDGET).unwrap();
        for (a, b) in c1.iter().zip(&c4) {
            assert_eq!(b.bound, 1.0);
            // n₁, n₂ range over 27 points each; n₃ is then fixed
            assert!(b.lhs <= 27.0 * 27.0 && b.lhs > 0.0);
            assert!(a.lhs <= 27.0 * 27.0);
        }
    }

    #[test]
    fn resonant_sum_is_finite_including_the_cancelling_pair() {
        let r = check_resonant([1, 1, 1], &SignTuple::all(), DEFAULT_BUDGET).unwrap();
        for x in &r {
            assert!(x.ratio.is_finite() && x.ratio > 0.0);
            assert!(x.lhs >= 0.0);
        }
        // n₂ = −n₃ is part of the enumeration: ⟨n₂₃⟩ = 1 must be attainable
        let bl = Blocks::new([1, 1, 1]).unwrap();
        assert!(bl.pts[1].iter().any(|&p| bl.pts[2].contains(&[-p[0], -p[1], -p[2]])));
    }

    #[test]
    fn a5_baseline_and_parameters() {
        let r = check_a5(0.25, 0.01, [1, 1, 1], &SignTuple::all(), DEFAULT_BUDGET).unwrap();
        assert!(r.iter().all(|x| x.lhs > 0.0 && x.ratio.is_finite()));
        assert!(check_a5(0.0, 0.01, [1, 1, 1], &[PLUS], DEFAULT_BUDGET).is_err());
    }

    #[test]
    fn suite_ladder_spread_on_small_ladder() {
        let reports = run_suite(&[1, 2], SuiteConfig::default()).unwrap();
        assert_eq!(reports.len(), 2 * 4 * 16);
        let spreads = ladder_spreads(&reports);
        assert_eq!(spreads.len(), 4 * 16);
        assert!(spreads.iter().all(|s| s.spread.is_finite() && s.spread >= 1.0));
    }

    #[test]
    fn quintic_at_unit_scales_is_finite() {
        let r = check_quintic(0.25, 0.25, 0.25, &[[1; 7], [1, -1, 1, -1, 1, -1, 1]]).unwrap();
        assert!(r.iter().all(|x| x.lhs > 0.0 && x.lhs.is_finite()));
        assert!(check_quintic(0.4, 0.25, 0.25, &[[1; 7]]).is_err());
    }

    #[test]
    fn septic_pairings_are_validated_and_finite() {
        assert!(Pairing::new(&[(1, 2)]).is_err());
        assert!(Pairing::new(&[(1, 4), (4, 7)]).is_err());
        assert!(Pairing::new(&[]).is_err());
        let p = Pairing::new(&[(1, 4), (2, 5), (3, 7)]).unwrap();
        let r = check_septic(0.75, 0.25, &p, PLUS).unwrap();
        assert!(r.lhs > 0.0 && r.lhs.is_finite());
    }
}
