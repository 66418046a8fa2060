//! Trajectories of the stochastic objects driving the residual equation.
//!
//! All objects live on the uniform grid `t_k = k·dt` of the noise path.
//! `⟨1⟩` is advanced by the exact mild recursion, `⟨2⟩` and `⟨3⟩` are its
//! Wick powers, and the Duhamel operator `I = (∂_t² + 1 − Δ)^{-1}` is
//! applied by product integration: exact linear phase over each step and
//! linear interpolation of the forcing between grid times.
//!
//! Cutoffs for noise level `N` and Galerkin cutoff `M`:
//!
//! | object        | cutoff  |
//! |---------------|---------|
//! | `⟨1⟩`          | `N`     |
//! | `⟨2⟩`          | `2N`    |
//! | `⟨3⟩`, `⟨30⟩`   | `M`     |
//! | `⟨30⟩⟨1⟩`       | `M + N` |
//! | `⟨320⟩`, `⟨70⟩` | `M`     |
//!
//! `⟨2⟩` and `⟨30⟩⟨1⟩` are kept at full support, so every product the
//! residual solver forms with them is exact after projection to `M`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lattice::{
    ball, dealiased_grid_size, pointwise_on_grid, Ball, LatticeError, SpectralField,
};
use crate::noise::{NoiseConfig, NoiseError, NoisePath};
use crate::renorm::SigmaTable;

#[derive(Debug, Error)]
pub enum ObjectsError {
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("trajectory has no time points")]
    EmptyTrajectory,
    #[error("cutoff must be positive")]
    ZeroCutoff,
    #[error("time step must be finite and positive, got {0}")]
    BadStep(f64),
}

/// Fields on the uniform time grid `t_k = k·dt`, `k = 0..=steps`, all at
/// one cutoff, optionally with velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dt: f64,
    positions: Vec<SpectralField>,
    velocities: Option<Vec<SpectralField>>,
}

impl Trajectory {
    pub fn new(dt: f64, positions: Vec<SpectralField>) -> Result<Self, ObjectsError> {
        Self::build(dt, positions, None)
    }

    pub fn with_velocities(
        dt: f64,
        positions: Vec<SpectralField>,
        velocities: Vec<SpectralField>,
    ) -> Result<Self, ObjectsError> {
        Self::build(dt, positions, Some(velocities))
    }

    fn build(
        dt: f64,
        positions: Vec<SpectralField>,
        velocities: Option<Vec<SpectralField>>,
    ) -> Result<Self, ObjectsError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ObjectsError::BadStep(dt));
        }
        let first = positions.first().ok_or(ObjectsError::EmptyTrajectory)?;
        let cutoff = first.cutoff();
        let same = |f: &SpectralField| f.cutoff() == cutoff;
        let mismatch = positions
            .iter()
            .chain(velocities.iter().flatten())
            .find(|f| !same(f));
        if let Some(f) = mismatch {
            return Err(LatticeError::LengthMismatch {
                got: f.mode_count(),
                expected: first.mode_count(),
            }
            .into());
        }
        if let Some(v) = &velocities {
            if v.len() != positions.len() {
                return Err(LatticeError::LengthMismatch {
                    got: v.len(),
                    expected: positions.len(),
                }
                .into());
            }
        }
        Ok(Trajectory {
            dt,
            positions,
            velocities,
        })
    }

    /// `steps + 1` zero fields.
    pub fn zeros(cutoff: u32, dt: f64, steps: usize) -> Result<Self, ObjectsError> {
        Self::new(dt, vec![SpectralField::zeros(cutoff); steps + 1])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn cutoff(&self) -> u32 {
        self.positions[0].cutoff()
    }

    pub fn at(&self, k: usize) -> &SpectralField {
        &self.positions[k]
    }

    pub fn last(&self) -> &SpectralField {
        self.positions.last().expect("nonempty")
    }

    pub fn velocity(&self, k: usize) -> Option<&SpectralField> {
        self.velocities.as_ref().map(|v| &v[k])
    }

    pub fn positions(&self) -> &[SpectralField] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[SpectralField]> {
        self.velocities.as_deref()
    }

    pub fn is_hermitian(&self) -> bool {
        self.positions
            .iter()
            .chain(self.velocities.iter().flatten())
            .all(SpectralField::is_hermitian)
    }

    pub fn is_zero(&self) -> bool {
        self.positions
            .iter()
            .chain(self.velocities.iter().flatten())
            .all(SpectralField::is_zero)
    }
}

/// Per-`|n|²` tables over a ball, indexed by mode.
pub(crate) fn per_norm_table<T: Clone>(b: &Ball, mut make: impl FnMut(f64) -> T) -> (Vec<u32>, Vec<T>) {
    let max_k2 = (b.cutoff() as usize).pow(2);
    let mut index = vec![u32::MAX; max_k2 + 1];
    let mut table = Vec::new();
    let per_mode = (0..b.len())
        .map(|i| {
            let k2 = b.norm_sq(i) as usize;
            if index[k2] == u32::MAX {
                index[k2] = table.len() as u32;
                table.push(make(b.bracket(i)));
            }
            index[k2]
        })
        .collect();
    (per_mode, table)
}

/// Exact linear propagator over one step for a mode of frequency `ω`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Rotation {
    c: f64,
    s_over_w: f64,
    w_s: f64,
}

impl Rotation {
    pub(crate) fn new(omega: f64, h: f64) -> Self {
        let (s, c) = (h * omega).sin_cos();
        Rotation {
            c,
            s_over_w: s / omega,
            w_s: omega * s,
        }
    }

    #[inline]
    pub(crate) fn apply(&self, pos: Complex64, vel: Complex64) -> (Complex64, Complex64) {
        (
            pos * self.c + vel * self.s_over_w,
            vel * self.c - pos * self.w_s,
        )
    }
}

/// Streaming exact recursion for `(⟨1⟩, ∂_t⟨1⟩)` on the free modes.
pub struct ConvolutionStepper<'a> {
    path: &'a NoisePath,
    ball: Arc<Ball>,
    rotations: Vec<Rotation>,
    rotation_of_slot: Vec<u32>,
    pos: Vec<Complex64>,
    vel: Vec<Complex64>,
    step: usize,
}

impl<'a> ConvolutionStepper<'a> {
    pub fn new(path: &'a NoisePath) -> Self {
        let cfg = path.config();
        let b = path.ball().clone();
        let (per_mode, rotations) = per_norm_table(&b, |w| Rotation::new(w, cfg.dt));
        let rotation_of_slot = b.free().iter().map(|&i| per_mode[i as usize]).collect();
        let nfree = b.free().len();
        ConvolutionStepper {
            path,
            ball: b,
            rotations,
            rotation_of_slot,
            pos: vec![Complex64::new(0.0, 0.0); nfree],
            vel: vec![Complex64::new(0.0, 0.0); nfree],
            step: 0,
        }
    }

    /// Index of the current time point.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step == self.path.steps()
    }

    /// Advances to the next grid time; returns false at the end of the path.
    pub fn advance(&mut self) -> bool {
        if self.is_done() {
            return false;
        }
        for slot in 0..self.pos.len() {
            let rot = &self.rotations[self.rotation_of_slot[slot] as usize];
            let (p, v) = rot.apply(self.pos[slot], self.vel[slot]);
            let [_, xp, xv] = *self.path.step_increments(self.step, slot);
            self.pos[slot] = p + xp;
            self.vel[slot] = v + xv;
        }
        self.step += 1;
        true
    }

    fn field(&self, values: &[Complex64]) -> SpectralField {
        let mut f = SpectralField::zeros(self.ball.cutoff());
        for (slot, &i) in self.ball.free().iter().enumerate() {
            f.set_pair(i as usize, values[slot]);
        }
        f
    }

    pub fn position(&self) -> SpectralField {
        self.field(&self.pos)
    }

    pub fn velocity(&self) -> SpectralField {
        self.field(&self.vel)
    }
}

/// The truncated stochastic convolution `⟨1⟩_N` with its velocity, sampled
/// exactly at the grid times of `path`.
pub fn stochastic_convolution(path: &NoisePath) -> Trajectory {
    let mut st = ConvolutionStepper::new(path);
    let mut pos = vec![st.position()];
    let mut vel = vec![st.velocity()];
    while st.advance() {
        pos.push(st.position());
        vel.push(st.velocity());
    }
    Trajectory::with_velocities(path.config().dt, pos, vel).expect("consistent by construction")
}

/// Product-integration weights of one step: with `F` linear between `F₀`
/// and `F₁`,
/// `pos' = c·pos + (s/ω)·vel + a0·F₀ + a1·F₁` and
/// `vel' = −ωs·pos + c·vel + b0·F₀ + b1·F₁`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DuhamelWeights {
    rot: [f64; 3],
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
}

impl DuhamelWeights {
    pub fn new(omega: f64, h: f64) -> Self {
        let x = h * omega;
        let x2 = x * x;
        // p = (sin x − x cos x)/x³, q = (1 − cos x)/x², r = (x sin x + cos x − 1)/x², g = sin x / x
        let (p, q, r, g) = if x < 0.1 {
            let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &k| acc * x2 + k);
            (
                horner(&[1.0 / 3.0, -1.0 / 30.0, 1.0 / 840.0, -1.0 / 45360.0, 1.0 / 3991680.0]),
                horner(&[0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0]),
                horner(&[0.5, -1.0 / 8.0, 1.0 / 144.0, -1.0 / 5760.0, 1.0 / 403200.0]),
                horner(&[1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0]),
            )
        } else {
            let (s, c) = x.sin_cos();
            ((s - x * c) / (x2 * x), (1.0 - c) / x2, (x * s + c - 1.0) / x2, s / x)
        };
        let (s, c) = x.sin_cos();
        let a0 = h * h * p;
        let b0 = h * r;
        DuhamelWeights {
            rot: [c, s / omega, omega * s],
            a0,
            a1: h * h * q - a0,
            b0,
            b1: h * g - b0,
        }
    }
}

/// Streaming Duhamel integral `I(F)` with zero initial data: feed the
/// forcing at successive grid times, read the solution at the same times.
pub struct DuhamelStepper {
    ball: Arc<Ball>,
    weights: Vec<DuhamelWeights>,
    weight_of_slot: Vec<u32>,
    pos: Vec<Complex64>,
    vel: Vec<Complex64>,
    prev: Option<Vec<Complex64>>,
}

impl DuhamelStepper {
    pub fn new(n_out: u32, dt: f64) -> Self {
        let b = ball(n_out);
        let (per_mode, weights) = per_norm_table(&b, |w| DuhamelWeights::new(w, dt));
        let weight_of_slot = b.free().iter().map(|&i| per_mode[i as usize]).collect();
        let nfree = b.free().len();
        DuhamelStepper {
            ball: b,
            weights,
            weight_of_slot,
            pos: vec![Complex64::new(0.0, 0.0); nfree],
            vel: vec![Complex64::new(0.0, 0.0); nfree],
            prev: None,
        }
    }

    pub fn cutoff(&self) -> u32 {
        self.ball.cutoff()
    }

    fn free_values(&self, f: &SpectralField) -> Vec<Complex64> {
        self.ball
            .free()
            .iter()
            .map(|&i| f.get(self.ball.mode(i as usize)))
            .collect()
    }

    /// Consumes the forcing at the next grid time (the first call gives
    /// `t = 0`) and returns the updated position.
    pub fn push(&mut self, forcing: &SpectralField) -> SpectralField {
        let next = self.free_values(forcing);
        if let Some(prev) = self.prev.take() {
            for slot in 0..self.pos.len() {
                let w = &self.weights[self.weight_of_slot[slot] as usize];
                let (p, v) = (self.pos[slot], self.vel[slot]);
                let (f0, f1) = (prev[slot], next[slot]);
                self.pos[slot] = p * w.rot[0] + v * w.rot[1] + f0 * w.a0 + f1 * w.a1;
                self.vel[slot] = v * w.rot[0] - p * w.rot[2] + f0 * w.b0 + f1 * w.b1;
            }
        }
        self.prev = Some(next);
        self.position()
    }

    fn field(&self, values: &[Complex64]) -> SpectralField {
        let mut f = SpectralField::zeros(self.ball.cutoff());
        for (slot, &i) in self.ball.free().iter().enumerate() {
            f.set_pair(i as usize, values[slot]);
        }
        f
    }

    pub fn position(&self) -> SpectralField {
        self.field(&self.pos)
    }

    pub fn velocity(&self) -> SpectralField {
        self.field(&self.vel)
    }
}

/// `I(F)` restricted to `|n| ≤ n_out`, with velocities.
pub fn duhamel(forcing: &Trajectory, n_out: u32) -> Result<Trajectory, ObjectsError> {
    if n_out == 0 {
        return Err(ObjectsError::ZeroCutoff);
    }
    let mut st = DuhamelStepper::new(n_out, forcing.dt());
    let mut pos = Vec::with_capacity(forcing.len());
    let mut vel = Vec::with_capacity(forcing.len());
    for f in forcing.positions() {
        pos.push(st.push(f));
        vel.push(st.velocity());
    }
    Trajectory::with_velocities(forcing.dt(), pos, vel)
}

/// Which objects a stepper computes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Depth {
    /// `⟨1⟩`, `⟨2⟩`, `⟨3⟩`, `⟨30⟩`.
    Cubic,
    /// Everything, including the resolved products and `⟨320⟩`, `⟨70⟩`.
    Full,
}

/// Objects at one grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSnapshot {
    pub t: f64,
    pub sigma: f64,
    pub conv1: SpectralField,
    pub conv1_velocity: SpectralField,
    pub wick2: SpectralField,
    pub wick3: SpectralField,
    pub tree30: SpectralField,
    pub tree30_velocity: SpectralField,
    pub tree30_conv1: Option<SpectralField>,
    pub tree320: Option<SpectralField>,
    pub tree320_velocity: Option<SpectralField>,
    pub tree70: Option<SpectralField>,
    pub tree70_velocity: Option<SpectralField>,
}

/// Streams the enhanced data set along a noise path, one grid time at a
/// time, without storing trajectories.
pub struct ObjectStepper<'a> {
    conv: ConvolutionStepper<'a>,
    sigma: SigmaTable,
    level: u32,
    galerkin: u32,
    depth: Depth,
    d30: DuhamelStepper,
    d320: Option<DuhamelStepper>,
    d70: Option<DuhamelStepper>,
    wick_grid: usize,
    product_grid: usize,
    started: bool,
}

impl<'a> ObjectStepper<'a> {
    pub fn new(path: &'a NoisePath, galerkin: u32, depth: Depth) -> Result<Self, ObjectsError> {
        if galerkin == 0 {
            return Err(ObjectsError::ZeroCutoff);
        }
        let cfg: NoiseConfig = *path.config();
        cfg.validate()?;
        let n = cfg.cutoff;
        let m = galerkin;
        let full = depth == Depth::Full;
        Ok(ObjectStepper {
            conv: ConvolutionStepper::new(path),
            sigma: SigmaTable::uniform(cfg.alpha, n, cfg.dt, cfg.steps),
            level: n,
            galerkin: m,
            depth,
            d30: DuhamelStepper::new(m, cfg.dt),
            d320: full.then(|| DuhamelStepper::new(m, cfg.dt)),
            d70: full.then(|| DuhamelStepper::new(m, cfg.dt)),
            // ⟨2⟩ at 2N and ⟨3⟩ at M from one grid of ⟨1⟩
            wick_grid: dealiased_grid_size(3 * n, m.max(2 * n)),
            // ⟨30⟩⟨1⟩ at M+N, ⟨30⟩⟨2⟩ and ⟨30⟩²⟨1⟩ at M
            product_grid: fft_grid_for_products(n, m),
            started: false,
        })
    }

    pub fn sigma_table(&self) -> &SigmaTable {
        &self.sigma
    }

    /// Objects at the next grid time (`t = 0` on the first call), or `None`
    /// past the end of the path.
    pub fn next_snapshot(&mut self) -> Option<ObjectSnapshot> {
        if self.started {
            if !self.conv.advance() {
                return None;
            }
        } else {
            self.started = true;
        }
        let k = self.conv.step();
        let t = self.sigma.times[k];
        let s = self.sigma.value(k);
        let (n, m) = (self.level, self.galerkin);
        let conv1 = self.conv.position();
        let mut wick = pointwise_on_grid(&[&conv1], self.wick_grid, &[2 * n, m], |x, y| {
            let u = x[0];
            let u2 = u * u;
            y[0] = u2 - s;
            y[1] = u * (u2 - 3.0 * s);
        });
        let wick3 = wick.pop().expect("two outputs");
        let wick2 = wick.pop().expect("two outputs");
        let tree30 = self.d30.push(&wick3);
        let (mut tree30_conv1, mut tree320, mut tree70) = (None, None, None);
        let (mut tree320_velocity, mut tree70_velocity) = (None, None);
        if self.depth == Depth::Full {
            let mut p = pointwise_on_grid(
                &[&tree30, &conv1, &wick2],
                self.product_grid,
                &[m + n, m, m],
                |x, y| {
                    let (w, z, q) = (x[0], x[1], x[2]);
                    y[0] = w * z;
                    y[1] = w * q;
                    y[2] = w * w * z;
                },
            );
            let w2z = p.pop().expect("three outputs");
            let wq = p.pop().expect("three outputs");
            let d70 = self.d70.as_mut().expect("full depth");
            tree70 = Some(d70.push(&w2z));
            tree70_velocity = Some(d70.velocity());
            let d320 = self.d320.as_mut().expect("full depth");
            tree320 = Some(d320.push(&wq));
            tree320_velocity = Some(d320.velocity());
            tree30_conv1 = p.pop();
        }
        Some(ObjectSnapshot {
            t,
            sigma: s,
            conv1_velocity: self.conv.velocity(),
            conv1,
            wick2,
            wick3,
            tree30_velocity: self.d30.velocity(),
            tree30,
            tree30_conv1,
            tree320,
            tree320_velocity,
            tree70,
            tree70_velocity,
        })
    }

    /// Runs to the end of the path and returns the final snapshot.
    pub fn run_to_end(mut self) -> ObjectSnapshot {
        let mut last = self.next_snapshot().expect("at least one time point");
        while let Some(s) = self.next_snapshot() {
            last = s;
        }
        last
    }
}

/// Grid size dealiasing `⟨30⟩⟨1⟩` at `M+N` and `⟨30⟩⟨2⟩`, `⟨30⟩²⟨1⟩` at `M`.
fn fft_grid_for_products(n: u32, m: u32) -> usize {
    let need = [
        (m + n, m + n),
        (m + 2 * n, m),
        (2 * m + n, m),
    ];
    need.iter()
        .map(|&(support, out)| dealiased_grid_size(support, out))
        .max()
        .expect("nonempty")
}

/// Trajectories of the enhanced data set at noise level `N` and Galerkin
/// cutoff `M`, all built from one noise path.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSet {
    pub alpha: f64,
    pub level: u32,
    pub galerkin: u32,
    pub sigma: SigmaTable,
    pub conv1: Trajectory,
    pub wick2: Trajectory,
    pub wick3: Trajectory,
    pub tree30: Trajectory,
    pub tree30_conv1: Trajectory,
    pub tree320: Trajectory,
    pub tree70: Trajectory,
}

impl ObjectSet {
    pub fn dt(&self) -> f64 {
        self.conv1.dt()
    }

    pub fn steps(&self) -> usize {
        self.conv1.steps()
    }

    /// Members by their short names.
    pub fn member(&self, name: &str) -> Option<&Trajectory> {
        Some(match name {
            "conv1" => &self.conv1,
            "wick2" => &self.wick2,
            "wick3" => &self.wick3,
            "tree30" => &self.tree30,
            "tree30x1" => &self.tree30_conv1,
            "tree320" => &self.tree320,
            "tree70" => &self.tree70,
            _ => return None,
        })
    }

    /// All members at grid time `k`.
    pub fn snapshot(&self, k: usize) -> ObjectSnapshot {
        let vel = |tr: &Trajectory| tr.velocity(k).expect("stored with velocities").clone();
        ObjectSnapshot {
            t: self.conv1.time(k),
            sigma: self.sigma.value(k),
            conv1: self.conv1.at(k).clone(),
            conv1_velocity: vel(&self.conv1),
            wick2: self.wick2.at(k).clone(),
            wick3: self.wick3.at(k).clone(),
            tree30: self.tree30.at(k).clone(),
            tree30_velocity: vel(&self.tree30),
            tree30_conv1: Some(self.tree30_conv1.at(k).clone()),
            tree320: Some(self.tree320.at(k).clone()),
            tree320_velocity: Some(vel(&self.tree320)),
            tree70: Some(self.tree70.at(k).clone()),
            tree70_velocity: Some(vel(&self.tree70)),
        }
    }

    pub const MEMBERS: [&'static str; 7] = [
        "conv1", "wick2", "wick3", "tree30", "tree30x1", "tree320", "tree70",
    ];
}

/// Builds every object along `path` with Galerkin cutoff `galerkin`.
pub fn build_objects(path: &NoisePath, galerkin: u32) -> Result<ObjectSet, ObjectsError> {
    let mut st = ObjectStepper::new(path, galerkin, Depth::Full)?;
    let cap = path.steps() + 1;
    let mut cols: [(Vec<SpectralField>, Vec<SpectralField>); 7] = Default::default();
    for c in cols.iter_mut() {
        c.0.reserve(cap);
    }
    let mut tree30_vel = Vec::with_capacity(cap);
    let mut tree320_vel = Vec::with_capacity(cap);
    let mut tree70_vel = Vec::with_capacity(cap);
    while let Some(s) = st.next_snapshot() {
        cols[0].0.push(s.conv1);
        cols[0].1.push(s.conv1_velocity);
        cols[1].0.push(s.wick2);
        cols[2].0.push(s.wick3);
        cols[3].0.push(s.tree30);
        tree30_vel.push(s.tree30_velocity);
        cols[4].0.push(s.tree30_conv1.expect("full depth"));
        cols[5].0.push(s.tree320.expect("full depth"));
        tree320_vel.push(s.tree320_velocity.expect("full depth"));
        cols[6].0.push(s.tree70.expect("full depth"));
        tree70_vel.push(s.tree70_velocity.expect("full depth"));
    }
    let dt = path.config().dt;
    let [c1, c2, c3, c30, c31, c320, c70] = cols;
    Ok(ObjectSet {
        alpha: path.config().alpha,
        level: path.config().cutoff,
        galerkin,
        sigma: st.sigma.clone(),
        conv1: Trajectory::with_velocities(dt, c1.0, c1.1)?,
        wick2: Trajectory::new(dt, c2.0)?,
        wick3: Trajectory::new(dt, c3.0)?,
        tree30: Trajectory::with_velocities(dt, c30.0, tree30_vel)?,
        tree30_conv1: Trajectory::new(dt, c31.0)?,
        tree320: Trajectory::with_velocities(dt, c320.0, tree320_vel)?,
        tree70: Trajectory::with_velocities(dt, c70.0, tree70_vel)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{dealiased_product, FreqIndex};
    use crate::renorm::{mode_variance, sigma};

    fn cfg(cutoff: u32, dt: f64, steps: usize, seed: u64) -> NoiseConfig {
        NoiseConfig {
            alpha: 0.25,
            cutoff,
            dt,
            steps,
            seed,
        }
    }

    #[test]
    fn zero_path_gives_zero_objects() {
        let path = NoisePath::zero(cfg(2, 0.1, 5, 0)).unwrap();
        assert!(stochastic_convolution(&path).is_zero());
        let set = build_objects(&path, 4).unwrap();
        for name in ObjectSet::MEMBERS {
            let tr = set.member(name).unwrap();
            if name == "wick2" {
                // ⟨2⟩ = −σ_N(t) on zero input
                for (k, f) in tr.positions().iter().enumerate() {
                    assert!((f.get(FreqIndex::ZERO).re + set.sigma.value(k)).abs() < 1e-15);
                }
            } else {
                assert!(tr.is_zero(), "{name}");
            }
        }
    }

    #[test]
    fn duhamel_of_zero_is_zero() {
        let f = Trajectory::zeros(3, 0.05, 10).unwrap();
        assert!(duhamel(&f, 3).unwrap().is_zero());
    }

    #[test]
    fn duhamel_weights_series_matches_closed_form() {
        // below the switch the weights come from series; check them against
        // the closed forms at points where cancellation is still mild
        for &(omega, h) in &[(1.0, 0.09), (3.0, 0.02), (0.5, 0.15)] {
            let w = DuhamelWeights::new(omega, h);
            let x: f64 = omega * h;
            let (s, c) = x.sin_cos();
            let a0 = (s - x * c) / (omega.powi(3) * h);
            let a1 = (1.0 - c) / (omega * omega) - a0;
            let b0 = (x * s + c - 1.0) / (omega * omega * h);
            let b1 = s / omega - b0;
            for (got, want) in [(w.a0, a0), (w.a1, a1), (w.b0, b0), (w.b1, b1)] {
                assert!((got - want).abs() < 1e-11 * want.abs(), "{got} {want}");
            }
        }
    }

    #[test]
    fn duhamel_of_constant_forcing() {
        // I(1) at mode n is (1 − cos tω)/ω²; linear interpolation of a
        // constant is exact
        let n = FreqIndex::new(1, 2, 0);
        let w = n.bracket();
        let dt = 0.01;
        let amp = Complex64::new(0.6, -0.2);
        let f = SpectralField::single_mode(3, n, amp);
        let forcing = Trajectory::new(dt, vec![f; 101]).unwrap();
        let out = duhamel(&forcing, 3).unwrap();
        assert!(out.is_hermitian());
        for k in [1, 17, 100] {
            let t = k as f64 * dt;
            let want = amp * (1.0 - (t * w).cos()) / (w * w);
            assert!((out.at(k).get(n) - want).norm() < 1e-13);
            let vwant = amp * (t * w).sin() / w;
            assert!((out.velocity(k).unwrap().get(n) - vwant).norm() < 1e-13);
        }
    }

    /// Manufactured `w(t) = sin²(t)`: `w(0) = w'(0) = 0` and
    /// `F = w'' + ω²w = 2cos 2t + ω² sin² t`.
    fn manufactured_error(dt: f64, n: FreqIndex) -> f64 {
        let w = n.bracket();
        let steps = (1.0 / dt).round() as usize;
        let forcing: Vec<SpectralField> = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let f = 2.0 * (2.0 * t).cos() + w * w * t.sin().powi(2);
                SpectralField::single_mode(2, n, Complex64::new(f, 0.0))
            })
            .collect();
        let out = duhamel(&Trajectory::new(dt, forcing).unwrap(), 2).unwrap();
        (out.last().get(n).re - 1f64.sin().powi(2)).abs()
    }

    #[test]
    fn duhamel_is_second_order() {
        let n = FreqIndex::new(1, 1, 0);
        let e: Vec<f64> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&dt| manufactured_error(dt, n))
            .collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "order {order}");
        }
    }

    #[test]
    fn streaming_matches_stored_trajectories() {
        let path = NoisePath::sample(cfg(3, 0.05, 8, 11)).unwrap();
        let set = build_objects(&path, 5).unwrap();
        let last = ObjectStepper::new(&path, 5, Depth::Full).unwrap().run_to_end();
        assert_eq!(&last.tree70.unwrap(), set.tree70.last());
        assert_eq!(&last.tree320.unwrap(), set.tree320.last());
        assert_eq!(&last.conv1, set.conv1.last());
        let cubic = ObjectStepper::new(&path, 5, Depth::Cubic).unwrap().run_to_end();
        assert_eq!(&cubic.tree30, set.tree30.last());
        // ⟨30⟩ is the Duhamel integral of ⟨3⟩
        assert_eq!(&duhamel(&set.wick3, 5).unwrap(), &set.tree30);
    }

    #[test]
    fn objects_are_hermitian_with_documented_cutoffs() {
        let path = NoisePath::sample(cfg(2, 0.1, 4, 3)).unwrap();
        let set = build_objects(&path, 4).unwrap();
        let want = [
            ("conv1", 2),
            ("wick2", 4),
            ("wick3", 4),
            ("tree30", 4),
            ("tree30x1", 6),
            ("tree320", 4),
            ("tree70", 4),
        ];
        for (name, cutoff) in want {
            let tr = set.member(name).unwrap();
            assert_eq!(tr.cutoff(), cutoff, "{name}");
            assert_eq!(tr.len(), 5);
            assert!(tr.is_hermitian(), "{name}");
        }
    }

    #[test]
    fn wick_cube_satisfies_hermite_identity() {
        let path = NoisePath::sample(cfg(3, 0.1, 5, 5)).unwrap();
        let set = build_objects(&path, 6).unwrap();
        for k in [1, 5] {
            let z = set.conv1.at(k);
            let mut rhs = dealiased_product(&[z, set.wick2.at(k)], 6).unwrap();
            rhs.add_scaled(-2.0 * set.sigma.value(k), z);
            let scale = rhs.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
            for (a, b) in set.wick3.at(k).coeffs().iter().zip(rhs.coeffs()) {
                assert!((a - b).norm() < 1e-13 * scale);
            }
        }
    }

    #[test]
    fn resolved_products_match_direct_products() {
        let path = NoisePath::sample(cfg(2, 0.1, 3, 9)).unwrap();
        let set = build_objects(&path, 3).unwrap();
        let k = 3;
        let p = dealiased_product(&[set.tree30.at(k), set.conv1.at(k)], 5).unwrap();
        let d = set.tree30_conv1.at(k);
        for (a, b) in p.coeffs().iter().zip(d.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn coarsened_path_gives_same_convolution() {
        // exact composition: ⟨1⟩ on the coarse grid equals ⟨1⟩ on the fine
        // grid at shared times
        let fine = NoisePath::sample(cfg(3, 0.05, 12, 4)).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.steps(), 3);
        let a = stochastic_convolution(&fine);
        let b = stochastic_convolution(&coarse);
        for k in 0..=3 {
            let d = SpectralField::combination(3, &[(1.0, a.at(4 * k)), (-1.0, b.at(k))]);
            assert!(d.sum_sq().sqrt() < 1e-14 * (1.0 + a.at(4 * k).sum_sq().sqrt()));
        }
        assert!(fine.coarsen(5).is_err());
    }

    #[test]
    fn mode_variance_by_monte_carlo() {
        // |û(n,t)|² is exponential with mean v for n ≠ 0: SE = v/√R
        let n = FreqIndex::new(1, 0, 0);
        let (t, dt, reps) = (0.5, 0.1, 4000);
        let mut acc = 0.0;
        for r in 0..reps {
            let path = NoisePath::sample(cfg(1, dt, 5, 1000 + r)).unwrap();
            let mut st = ConvolutionStepper::new(&path);
            while st.advance() {}
            acc += st.position().get(n).norm_sqr();
        }
        let v = mode_variance(n, t, 0.25);
        let mean = acc / reps as f64;
        assert!((mean - v).abs() < 3.0 * v / (reps as f64).sqrt(), "{mean} vs {v}");
    }

    #[test]
    fn pointwise_variance_is_sigma() {
        let (t, dt, reps) = (1.0, 0.25, 4000);
        let mut xs = Vec::with_capacity(reps);
        for r in 0..reps as u64 {
            let path = NoisePath::sample(cfg(2, dt, 4, 50_000 + r)).unwrap();
            let mut st = ConvolutionStepper::new(&path);
            while st.advance() {}
            xs.push(st.position().eval_at([0.0; 3]).powi(2));
        }
        let mean = xs.iter().sum::<f64>() / reps as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let s = sigma(t, 2, 0.25);
        assert!((mean - s).abs() < 3.0 * se, "{mean} vs {s} ± {se}");
    }

    #[test]
    fn object_means_vanish() {
        let reps = 600;
        let mut sums = [Vec::new(), Vec::new(), Vec::new()];
        for r in 0..reps as u64 {
            let path = NoisePath::sample(cfg(2, 0.1, 5, 7_000 + r)).unwrap();
            let s = ObjectStepper::new(&path, 3, Depth::Cubic).unwrap().run_to_end();
            sums[0].push(s.wick2.eval_at([0.0; 3]));
            sums[1].push(s.wick3.eval_at([0.0; 3]));
            sums[2].push(s.tree30.get(FreqIndex::ZERO).re);
        }
        for xs in sums {
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            assert!(mean.abs() < 4.0 * (var / reps as f64).sqrt(), "mean {mean}");
        }
    }
}
