//! Frequency lattice on ℤ³, real spectral fields stored with Hermitian
//! symmetry, and the bridge between spectral coefficients and physical
//! grids (alias-free products by zero padding).
//!
//! Conventions: `e_n(x) = exp(i n·x)` on the torus `[0, 2π)³` with the
//! normalized Lebesgue measure, so a field is `u(x) = Σ_n û(n) e_n(x)` and
//! Parseval reads `Σ_n |û(n)|² = mean_x |u(x)|²`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::ops::{Add, Neg, Sub};
use std::rc::Rc;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Magic bytes of the binary field dump.
pub const DUMP_MAGIC: &[u8; 4] = b"WWF1";

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("cannot project a field with cutoff {have} onto the larger cutoff {want}")]
    ProjectBeyondCutoff { have: u32, want: u32 },
    #[error("grid of {grid} points per axis aliases a product of support {support} kept up to {n_out}")]
    AliasedGrid { grid: usize, support: u32, n_out: u32 },
    #[error("output cutoff {n_out} exceeds the product support {support}")]
    OutputBeyondSupport { n_out: u32, support: u32 },
    #[error("product of an empty list of fields")]
    EmptyProduct,
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("coefficients violate Hermitian symmetry at mode {0:?}")]
    NotHermitian(FreqIndex),
    #[error("malformed field dump: {0}")]
    BadDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A Fourier mode `n ∈ ℤ³`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FreqIndex(pub [i32; 3]);

impl FreqIndex {
    pub const ZERO: FreqIndex = FreqIndex([0, 0, 0]);

    pub const fn new(a: i32, b: i32, c: i32) -> Self {
        FreqIndex([a, b, c])
    }

    pub fn norm_sq(self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn bracket(self) -> f64 {
        bracket(self)
    }

    /// Lexicographically nonnegative modes own their conjugate pair.
    pub fn is_free(self) -> bool {
        self >= FreqIndex::ZERO
    }

    pub fn phase(self, x: [f64; 3]) -> f64 {
        self.0[0] as f64 * x[0] + self.0[1] as f64 * x[1] + self.0[2] as f64 * x[2]
    }

    pub fn max_abs_component(self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }
}

impl Neg for FreqIndex {
    type Output = FreqIndex;
    fn neg(self) -> FreqIndex {
        FreqIndex([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Add for FreqIndex {
    type Output = FreqIndex;
    fn add(self, o: FreqIndex) -> FreqIndex {
        FreqIndex([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for FreqIndex {
    type Output = FreqIndex;
    fn sub(self, o: FreqIndex) -> FreqIndex {
        self + (-o)
    }
}

impl From<[i32; 3]> for FreqIndex {
    fn from(v: [i32; 3]) -> Self {
        FreqIndex(v)
    }
}

/// Japanese bracket `⟨n⟩ = √(1 + |n|²)`.
pub fn bracket(n: FreqIndex) -> f64 {
    bracket_from_norm_sq(n.norm_sq())
}

pub fn bracket_from_norm_sq(norm_sq: i64) -> f64 {
    (1.0 + norm_sq as f64).sqrt()
}

/// The index set `{n ∈ ℤ³ : |n| ≤ N}` with O(1) lookup through a dense
/// cube table. Modes are listed in lexicographic order.
#[derive(Debug)]
pub struct Ball {
    cutoff: u32,
    side: usize,
    modes: Vec<FreqIndex>,
    norm_sq: Vec<i64>,
    lookup: Vec<u32>,
    mirror: Vec<u32>,
    free: Vec<u32>,
}

const OUTSIDE: u32 = u32::MAX;

impl Ball {
    fn build(cutoff: u32) -> Ball {
        let n = cutoff as i32;
        let side = 2 * cutoff as usize + 1;
        let r2 = (cutoff as i64) * (cutoff as i64);
        let mut lookup = vec![OUTSIDE; side * side * side];
        let mut modes = Vec::new();
        let mut norm_sq = Vec::new();
        for a in -n..=n {
            for b in -n..=n {
                for c in -n..=n {
                    let m = FreqIndex([a, b, c]);
                    let k2 = m.norm_sq();
                    if k2 <= r2 {
                        lookup[cube_offset(side, cutoff, m)] = modes.len() as u32;
                        modes.push(m);
                        norm_sq.push(k2);
                    }
                }
            }
        }
        let mirror = modes
            .iter()
            .map(|&m| lookup[cube_offset(side, cutoff, -m)])
            .collect();
        let free = (0..modes.len() as u32)
            .filter(|&i| modes[i as usize].is_free())
            .collect();
        Ball {
            cutoff,
            side,
            modes,
            norm_sq,
            lookup,
            mirror,
            free,
        }
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[FreqIndex] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> FreqIndex {
        self.modes[i]
    }

    pub fn norm_sq(&self, i: usize) -> i64 {
        self.norm_sq[i]
    }

    pub fn bracket(&self, i: usize) -> f64 {
        bracket_from_norm_sq(self.norm_sq[i])
    }

    pub fn mirror(&self, i: usize) -> usize {
        self.mirror[i] as usize
    }

    /// Indices of the free modes (0 and the lexicographically positive half).
    pub fn free(&self) -> &[u32] {
        &self.free
    }

    pub fn index_of(&self, n: FreqIndex) -> Option<usize> {
        if n.max_abs_component() > self.cutoff {
            return None;
        }
        match self.lookup[cube_offset(self.side, self.cutoff, n)] {
            OUTSIDE => None,
            i => Some(i as usize),
        }
    }

    pub fn contains(&self, n: FreqIndex) -> bool {
        self.index_of(n).is_some()
    }
}

fn cube_offset(side: usize, cutoff: u32, n: FreqIndex) -> usize {
    let c = cutoff as i32;
    (((n.0[0] + c) as usize * side) + (n.0[1] + c) as usize) * side + (n.0[2] + c) as usize
}

/// Shared, cached ball of radius `cutoff`.
pub fn ball(cutoff: u32) -> Arc<Ball> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Ball>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("ball cache poisoned").get(&cutoff) {
        return b.clone();
    }
    let built = Arc::new(Ball::build(cutoff));
    cache
        .lock()
        .expect("ball cache poisoned")
        .entry(cutoff)
        .or_insert(built)
        .clone()
}

/// Number of lattice points with `|n| ≤ cutoff`.
pub fn mode_count(cutoff: u32) -> usize {
    ball(cutoff).len()
}

/// Complex Fourier coefficients of a real field on 𝕋³, restricted to the
/// ball `|n| ≤ N`. Coefficients of both members of each conjugate pair are
/// stored; every constructor enforces `û(−n) = conj(û(n))`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    ball: Arc<Ball>,
    coeffs: Vec<Complex64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.cutoff() == other.cutoff() && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(cutoff: u32) -> Self {
        let ball = ball(cutoff);
        let coeffs = vec![Complex64::new(0.0, 0.0); ball.len()];
        SpectralField { ball, coeffs }
    }

    pub fn constant(cutoff: u32, c: f64) -> Self {
        let mut f = Self::zeros(cutoff);
        let i0 = f.ball.index_of(FreqIndex::ZERO).expect("zero mode");
        f.coeffs[i0] = Complex64::new(c, 0.0);
        f
    }

    /// The real field `a e_n + conj(a) e_{−n}` (or `Re(a)` when `n = 0`).
    pub fn single_mode(cutoff: u32, n: FreqIndex, amplitude: Complex64) -> Self {
        let mut f = Self::zeros(cutoff);
        if let Some(i) = f.ball.index_of(n) {
            if n == FreqIndex::ZERO {
                f.coeffs[i] = Complex64::new(amplitude.re, 0.0);
            } else {
                let j = f.ball.mirror(i);
                f.coeffs[i] = amplitude;
                f.coeffs[j] = amplitude.conj();
            }
        }
        f
    }

    /// Builds a field from a function evaluated on the free modes only;
    /// mirrors are filled by conjugation and the zero mode is made real.
    pub fn from_free_fn(cutoff: u32, mut f: impl FnMut(FreqIndex) -> Complex64) -> Self {
        let mut out = Self::zeros(cutoff);
        let ball = out.ball.clone();
        for &i in ball.free() {
            let i = i as usize;
            let n = ball.mode(i);
            let v = f(n);
            out.set_pair(i, v);
        }
        out
    }

    /// Accepts coefficients in ball order, rejecting non-Hermitian input.
    pub fn from_coeffs(cutoff: u32, coeffs: Vec<Complex64>) -> Result<Self, LatticeError> {
        let ball = ball(cutoff);
        if coeffs.len() != ball.len() {
            return Err(LatticeError::LengthMismatch {
                got: coeffs.len(),
                expected: ball.len(),
            });
        }
        let f = SpectralField { ball, coeffs };
        for i in 0..f.coeffs.len() {
            if f.coeffs[f.ball.mirror(i)] != f.coeffs[i].conj() {
                return Err(LatticeError::NotHermitian(f.ball.mode(i)));
            }
        }
        Ok(f)
    }

    pub(crate) fn from_parts(ball: Arc<Ball>, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(ball.len(), coeffs.len());
        SpectralField { ball, coeffs }
    }

    /// Sets the free mode `i` and its mirror.
    pub(crate) fn set_pair(&mut self, i: usize, v: Complex64) {
        let j = self.ball.mirror(i);
        if i == j {
            self.coeffs[i] = Complex64::new(v.re, 0.0);
        } else {
            self.coeffs[i] = v;
            self.coeffs[j] = v.conj();
        }
    }

    /// Adds `v` to the free mode `i` and its conjugate to the mirror.
    pub(crate) fn add_to_pair(&mut self, i: usize, v: Complex64) {
        let c = self.coeffs[i];
        self.set_pair(i, c + v);
    }

    /// Mutable coefficients; callers must keep the field Hermitian.
    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn cutoff(&self) -> u32 {
        self.ball.cutoff()
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    /// Coefficients in ball order (see [`Ball::modes`]).
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of mode `n`, zero outside the ball.
    pub fn get(&self, n: FreqIndex) -> Complex64 {
        self.ball
            .index_of(n)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.coeffs.len()).all(|i| self.coeffs[self.ball.mirror(i)] == self.coeffs[i].conj())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Frequency projector `π_{N'}`: restriction to `|n| ≤ N'`.
    pub fn project(&self, cutoff: u32) -> Result<Self, LatticeError> {
        if cutoff > self.cutoff() {
            return Err(LatticeError::ProjectBeyondCutoff {
                have: self.cutoff(),
                want: cutoff,
            });
        }
        Ok(self.resize(cutoff))
    }

    /// Restriction or zero extension to the ball of radius `cutoff`.
    pub fn resize(&self, cutoff: u32) -> Self {
        if cutoff == self.cutoff() {
            return self.clone();
        }
        let target = ball(cutoff);
        let coeffs = target.modes().iter().map(|&n| self.get(n)).collect();
        SpectralField {
            ball: target,
            coeffs,
        }
    }

    /// `self += a · other` on the modes both fields share.
    pub fn add_scaled(&mut self, a: f64, other: &SpectralField) {
        if Arc::ptr_eq(&self.ball, &other.ball) {
            for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
                *x += y * a;
            }
            return;
        }
        let small = self.cutoff().min(other.cutoff());
        for &n in ball(small).modes() {
            let i = self.ball.index_of(n).expect("mode in smaller ball");
            self.coeffs[i] += other.get(n) * a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// Linear combination `Σ a_k f_k` at the given cutoff.
    pub fn combination(cutoff: u32, terms: &[(f64, &SpectralField)]) -> Self {
        let mut out = Self::zeros(cutoff);
        for (a, f) in terms {
            out.add_scaled(*a, f);
        }
        out
    }

    /// Point evaluation `u(x) = Σ_n û(n) e^{i n·x}`.
    pub fn eval_at(&self, x: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for &i in self.ball.free() {
            let i = i as usize;
            let n = self.ball.mode(i);
            let c = self.coeffs[i];
            if n == FreqIndex::ZERO {
                acc += c.re;
            } else {
                let (s, co) = n.phase(x).sin_cos();
                acc += 2.0 * (c.re * co - c.im * s);
            }
        }
        acc
    }

    /// `Σ_n |û(n)|²`, the squared L² norm for the normalized measure.
    pub fn sum_sq(&self) -> f64 {
        pairwise_sum_by(&self.coeffs, |c| c.norm_sqr())
    }

    /// Samples on the uniform grid with `m` points per axis.
    pub fn to_grid(&self, m: usize) -> Result<PhysicalGrid, LatticeError> {
        check_grid(m, self.cutoff(), self.cutoff())?;
        Ok(to_grids(&[self], m).pop().expect("one grid"))
    }

    /// Spectral coefficients of grid data, kept on `|n| ≤ cutoff`.
    pub fn from_grid(grid: &PhysicalGrid, cutoff: u32) -> Result<Self, LatticeError> {
        check_grid(grid.m, cutoff, cutoff)?;
        Ok(from_grids(&[grid], &[cutoff]).pop().expect("one field"))
    }

    /// Writes the binary dump: magic, `N` and `M` as u32, `t` as f64, then
    /// the cube `[−N, N]³` in row-major order as interleaved (re, im) f64
    /// pairs, zeros outside the ball. All values little-endian.
    pub fn write_dump<W: Write>(&self, mut w: W, grid_m: u32, t: f64) -> Result<(), LatticeError> {
        let n = self.cutoff();
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&grid_m.to_le_bytes())?;
        w.write_all(&t.to_le_bytes())?;
        let ni = n as i32;
        let mut buf = Vec::with_capacity((2 * n as usize + 1).pow(3) * 16);
        for a in -ni..=ni {
            for b in -ni..=ni {
                for c in -ni..=ni {
                    let v = self.get(FreqIndex([a, b, c]));
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a dump written by [`SpectralField::write_dump`], returning the
    /// field together with the recorded grid size and time.
    pub fn read_dump<R: Read>(mut r: R) -> Result<(Self, u32, f64), LatticeError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(LatticeError::BadDump("bad magic".into()));
        }
        let mut w4 = [0u8; 4];
        let mut w8 = [0u8; 8];
        r.read_exact(&mut w4)?;
        let n = u32::from_le_bytes(w4);
        r.read_exact(&mut w4)?;
        let m = u32::from_le_bytes(w4);
        r.read_exact(&mut w8)?;
        let t = f64::from_le_bytes(w8);
        let ni = n as i32;
        let mut f = SpectralField::zeros(n);
        for a in -ni..=ni {
            for b in -ni..=ni {
                for c in -ni..=ni {
                    r.read_exact(&mut w8)?;
                    let re = f64::from_le_bytes(w8);
                    r.read_exact(&mut w8)?;
                    let im = f64::from_le_bytes(w8);
                    let k = FreqIndex([a, b, c]);
                    match f.ball.index_of(k) {
                        Some(i) => f.coeffs[i] = Complex64::new(re, im),
                        None if re != 0.0 || im != 0.0 => {
                            return Err(LatticeError::BadDump(format!(
                                "nonzero coefficient outside the ball at {k:?}"
                            )))
                        }
                        None => {}
                    }
                }
            }
        }
        if !f.is_hermitian() {
            return Err(LatticeError::BadDump("coefficients are not Hermitian".into()));
        }
        Ok((f, m, t))
    }
}

/// Real samples of a field on the uniform grid `x_j = 2π j / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalGrid {
    m: usize,
    values: Vec<f64>,
}

impl PhysicalGrid {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self, LatticeError> {
        if values.len() != m * m * m {
            return Err(LatticeError::LengthMismatch {
                got: values.len(),
                expected: m * m * m,
            });
        }
        Ok(PhysicalGrid { m, values })
    }

    pub fn from_fn(m: usize, mut f: impl FnMut([f64; 3]) -> f64) -> Self {
        let h = 2.0 * PI / m as f64;
        let mut values = Vec::with_capacity(m * m * m);
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    values.push(f([a as f64 * h, b as f64 * h, c as f64 * h]));
                }
            }
        }
        PhysicalGrid { m, values }
    }

    pub fn points_per_axis(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.values[(a * self.m + b) * self.m + c]
    }

    pub fn mean_sq(&self) -> f64 {
        pairwise_sum_by(&self.values, |v| v * v) / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Smallest grid size `≥ min` whose prime factors are all in {2, 3, 5, 7}.
pub fn fft_size_at_least(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Grid size that keeps a product of per-axis support `support` exact up to
/// frequency `n_out`: `M ≥ support + n_out + 1`.
pub fn dealiased_grid_size(support: u32, n_out: u32) -> usize {
    fft_size_at_least(support as usize + n_out as usize + 1)
}

fn check_grid(m: usize, support: u32, n_out: u32) -> Result<(), LatticeError> {
    if m < support as usize + n_out as usize + 1 {
        return Err(LatticeError::AliasedGrid {
            grid: m,
            support,
            n_out,
        });
    }
    Ok(())
}

/// Exact frequency-truncated product `π_{N_out}(f_1 ⋯ f_k)` computed on a
/// zero-padded grid.
pub fn dealiased_product(
    fields: &[&SpectralField],
    n_out: u32,
) -> Result<SpectralField, LatticeError> {
    let support: u32 = fields.iter().map(|f| f.cutoff()).sum();
    dealiased_product_on_grid(fields, n_out, dealiased_grid_size(support, n_out))
}

/// As [`dealiased_product`] on an explicit grid, which must satisfy the
/// dealiasing condition.
pub fn dealiased_product_on_grid(
    fields: &[&SpectralField],
    n_out: u32,
    m: usize,
) -> Result<SpectralField, LatticeError> {
    if fields.is_empty() {
        return Err(LatticeError::EmptyProduct);
    }
    let support: u32 = fields.iter().map(|f| f.cutoff()).sum();
    if n_out > support {
        return Err(LatticeError::OutputBeyondSupport { n_out, support });
    }
    check_grid(m, support, n_out)?;
    let mut out = pointwise_on_grid(fields, m, &[n_out], |x, y| {
        y[0] = x.iter().product();
    });
    Ok(out.pop().expect("one output"))
}

/// Evaluates a pointwise map of several fields on a grid of `m` points per
/// axis and returns the spectral projections of its outputs.
///
/// The caller guarantees that `m` dealiases the map (for a polynomial of
/// per-axis support `S` kept up to `N_out`, `m ≥ S + N_out + 1`).
pub fn pointwise_on_grid<F>(
    inputs: &[&SpectralField],
    m: usize,
    output_cutoffs: &[u32],
    mut map: F,
) -> Vec<SpectralField>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let grids = to_grids(inputs, m);
    let npts = m * m * m;
    let mut outs: Vec<PhysicalGrid> = output_cutoffs
        .iter()
        .map(|_| PhysicalGrid {
            m,
            values: vec![0.0; npts],
        })
        .collect();
    let mut x = vec![0.0; inputs.len()];
    let mut y = vec![0.0; output_cutoffs.len()];
    for p in 0..npts {
        for (xi, g) in x.iter_mut().zip(&grids) {
            *xi = g.values[p];
        }
        map(&x, &mut y);
        for (o, &yi) in outs.iter_mut().zip(&y) {
            o.values[p] = yi;
        }
    }
    let refs: Vec<&PhysicalGrid> = outs.iter().collect();
    from_grids(&refs, output_cutoffs)
}

// ---------------------------------------------------------------------------
// Transforms

struct Plan {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: RefCell<Vec<Complex64>>,
    batch: RefCell<Vec<Complex64>>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static PLANS: RefCell<HashMap<usize, Rc<Plan>>> = RefCell::new(HashMap::new());
}

fn plan(m: usize) -> Rc<Plan> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(m)
            .or_insert_with(|| {
                let (fwd, inv) = PLANNER.with(|p| {
                    let mut p = p.borrow_mut();
                    (p.plan_fft_forward(m), p.plan_fft_inverse(m))
                });
                let len = fwd
                    .get_inplace_scratch_len()
                    .max(inv.get_inplace_scratch_len());
                Rc::new(Plan {
                    m,
                    fwd,
                    inv,
                    scratch: RefCell::new(vec![Complex64::new(0.0, 0.0); len]),
                    batch: RefCell::new(Vec::new()),
                })
            })
            .clone()
    })
}

/// Residues `{0..=N} ∪ {M−N..M−1}` of the frequencies `|k| ≤ N`.
fn residues(m: usize, n: u32) -> Vec<usize> {
    let n = n as usize;
    if 2 * n + 1 >= m {
        return (0..m).collect();
    }
    let mut v: Vec<usize> = (0..=n).collect();
    v.extend(m - n..m);
    v
}

#[derive(Clone, Copy)]
enum Dir {
    Forward,
    Inverse,
}

/// Transforms the lines starting at `bases` with the given stride.
fn fft_lines(buf: &mut [Complex64], p: &Plan, stride: usize, bases: &[usize], dir: Dir) {
    let m = p.m;
    let fft = match dir {
        Dir::Forward => &p.fwd,
        Dir::Inverse => &p.inv,
    };
    let mut scratch = p.scratch.borrow_mut();
    if stride == 1 {
        for &b in bases {
            fft.process_with_scratch(&mut buf[b..b + m], &mut scratch);
        }
        return;
    }
    const BATCH_LINES: usize = 64;
    let mut batch = p.batch.borrow_mut();
    batch.resize(BATCH_LINES * m, Complex64::new(0.0, 0.0));
    for chunk in bases.chunks(BATCH_LINES) {
        let used = chunk.len() * m;
        for (l, &b) in chunk.iter().enumerate() {
            let line = &mut batch[l * m..(l + 1) * m];
            for (k, v) in line.iter_mut().enumerate() {
                *v = buf[b + k * stride];
            }
        }
        fft.process_with_scratch(&mut batch[..used], &mut scratch);
        for (l, &b) in chunk.iter().enumerate() {
            let line = &batch[l * m..(l + 1) * m];
            for (k, v) in line.iter().enumerate() {
                buf[b + k * stride] = *v;
            }
        }
    }
}

fn wrap(k: i32, m: usize) -> usize {
    k.rem_euclid(m as i32) as usize
}

/// Inverse transform of `a + i b` where `a`, `b` are Hermitian; the real and
/// imaginary parts of the result are the grid values of `a` and `b`.
fn synthesize(a: &SpectralField, b: Option<&SpectralField>, m: usize) -> Vec<Complex64> {
    let p = plan(m);
    let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
    let mut put = |f: &SpectralField, scale: Complex64| {
        for (i, &n) in f.ball.modes().iter().enumerate() {
            let off = (wrap(n.0[0], m) * m + wrap(n.0[1], m)) * m + wrap(n.0[2], m);
            buf[off] += f.coeffs[i] * scale;
        }
    };
    put(a, Complex64::new(1.0, 0.0));
    let mut support = a.cutoff();
    if let Some(b) = b {
        put(b, Complex64::new(0.0, 1.0));
        support = support.max(b.cutoff());
    }
    let s = residues(m, support);
    // axis 2 on lines with both leading indices in the support
    let bases: Vec<usize> = s
        .iter()
        .flat_map(|&i0| s.iter().map(move |&i1| (i0 * m + i1) * m))
        .collect();
    fft_lines(&mut buf, &p, 1, &bases, Dir::Inverse);
    // axis 1
    let bases: Vec<usize> = s
        .iter()
        .flat_map(|&i0| (0..m).map(move |i2| i0 * m * m + i2))
        .collect();
    fft_lines(&mut buf, &p, m, &bases, Dir::Inverse);
    // axis 0
    let bases: Vec<usize> = (0..m * m).collect();
    fft_lines(&mut buf, &p, m * m, &bases, Dir::Inverse);
    buf
}

/// Forward transform of grid data, valid only on the residues of `cutoff`.
fn analyze(buf: &mut [Complex64], m: usize, cutoff: u32) {
    let p = plan(m);
    let s = residues(m, cutoff);
    let bases: Vec<usize> = (0..m * m).collect();
    fft_lines(buf, &p, m * m, &bases, Dir::Forward);
    let bases: Vec<usize> = s
        .iter()
        .flat_map(|&i0| (0..m).map(move |i2| i0 * m * m + i2))
        .collect();
    fft_lines(buf, &p, m, &bases, Dir::Forward);
    let bases: Vec<usize> = s
        .iter()
        .flat_map(|&i0| s.iter().map(move |&i1| (i0 * m + i1) * m))
        .collect();
    fft_lines(buf, &p, 1, &bases, Dir::Forward);
}

/// Grid values of several fields, two per complex transform.
pub fn to_grids(fields: &[&SpectralField], m: usize) -> Vec<PhysicalGrid> {
    let mut out = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        let buf = synthesize(pair[0], pair.get(1).copied(), m);
        out.push(PhysicalGrid {
            m,
            values: buf.iter().map(|c| c.re).collect(),
        });
        if pair.len() == 2 {
            out.push(PhysicalGrid {
                m,
                values: buf.iter().map(|c| c.im).collect(),
            });
        }
    }
    out
}

/// Spectral projections of several real grids, two per complex transform.
pub fn from_grids(grids: &[&PhysicalGrid], cutoffs: &[u32]) -> Vec<SpectralField> {
    assert_eq!(grids.len(), cutoffs.len());
    let mut out = Vec::with_capacity(grids.len());
    for (gpair, cpair) in grids.chunks(2).zip(cutoffs.chunks(2)) {
        let m = gpair[0].m;
        let norm = 1.0 / (m * m * m) as f64;
        let support = cpair.iter().copied().max().unwrap_or(0);
        let mut buf: Vec<Complex64> = match gpair.get(1) {
            Some(g1) => {
                assert_eq!(g1.m, m, "paired grids must share a size");
                gpair[0]
                    .values
                    .iter()
                    .zip(&g1.values)
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect()
            }
            None => gpair[0]
                .values
                .iter()
                .map(|&a| Complex64::new(a, 0.0))
                .collect(),
        };
        analyze(&mut buf, m, support);
        let at = |n: FreqIndex| {
            buf[(wrap(n.0[0], m) * m + wrap(n.0[1], m)) * m + wrap(n.0[2], m)] * norm
        };
        for (slot, &cutoff) in cpair.iter().enumerate() {
            let b = ball(cutoff);
            let mut coeffs = vec![Complex64::new(0.0, 0.0); b.len()];
            for &i in b.free() {
                let i = i as usize;
                let n = b.mode(i);
                let z = at(n);
                let zc = at(-n).conj();
                // Z = U + iV with U, V Hermitian
                let v = if gpair.len() == 1 {
                    (z + zc) * 0.5
                } else if slot == 0 {
                    (z + zc) * 0.5
                } else {
                    (z - zc) * Complex64::new(0.0, -0.5)
                };
                let j = b.mirror(i);
                if i == j {
                    coeffs[i] = Complex64::new(v.re, 0.0);
                } else {
                    coeffs[i] = v;
                    coeffs[j] = v.conj();
                }
            }
            out.push(SpectralField::from_parts(b, coeffs));
        }
    }
    out
}

/// Pairwise (cascade) summation of `f(x_i)`; the reduction tree depends
/// only on the length, so results are reproducible.
pub fn pairwise_sum_by<T>(xs: &[T], f: impl Fn(&T) -> f64 + Copy) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().map(f).sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_by(&xs[..mid], f) + pairwise_sum_by(&xs[mid..], f)
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs, |&x| x)
}
