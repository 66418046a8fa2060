//! Time stepping of the truncated renormalized equation, the residual
//! equation for `v = u − ⟨1⟩ + ⟨30⟩`, and the deterministic cubic wave
//! equation.
//!
//! Every solver uses the same kick–drift–kick trigonometric step of size
//! `h` on the Galerkin ball `|n| ≤ M`:
//!
//! ```text
//! v ← v + (h/2)·G(u_k, t_k)
//! (u, v) ← exact linear flow over h  (+ exact noise increments on |n| ≤ N)
//! v ← v + (h/2)·G(u_{k+1}, t_{k+1})
//! ```
//!
//! The linear part is propagated exactly, so there is no stability
//! constraint from `⟨n⟩`, and the step is second order for smooth forcing.
//! `G` is always an exact frequency-truncated product.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::hs_norm;
use crate::lattice::{ball, dealiased_grid_size, pointwise_on_grid, Ball, LatticeError, SpectralField};
use crate::noise::{NoiseConfig, NoiseError, NoisePath, MAX_HORIZON};
use crate::objects::{
    per_norm_table, DuhamelStepper, ObjectSet, ObjectSnapshot, ObjectStepper, ObjectsError,
    Rotation, Trajectory, Depth,
};
use crate::renorm::SigmaTable;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("noise path does not match the solver configuration: {0}")]
    PathMismatch(String),
    #[error("H¹ norm {h1:.3e} exceeded the ceiling at t = {t}")]
    BlowUp {
        t: f64,
        h1: f64,
        /// Solution up to and including the offending time.
        partial: Box<Trajectory>,
    },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Objects(#[from] ObjectsError),
}

/// Deterministic space-time forcing `f(t)` added to the right-hand side.
#[derive(Clone)]
pub struct Forcing(Arc<dyn Fn(f64) -> SpectralField + Send + Sync>);

impl Forcing {
    pub fn new(f: impl Fn(f64) -> SpectralField + Send + Sync + 'static) -> Self {
        Forcing(Arc::new(f))
    }

    pub fn at(&self, t: f64) -> SpectralField {
        (self.0)(t)
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Forcing(..)")
    }
}

/// Position and velocity at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub t: f64,
    pub u: SpectralField,
    pub ut: SpectralField,
}

impl WaveState {
    /// State `k` of a trajectory stored with velocities.
    pub fn from_trajectory(tr: &Trajectory, k: usize) -> Option<Self> {
        Some(WaveState {
            t: tr.time(k),
            u: tr.at(k).clone(),
            ut: tr.velocity(k)?.clone(),
        })
    }

    /// `Σ ⟨n⟩²|û|² + |û_t|²`, the conserved energy of the linear flow.
    pub fn linear_energy(&self) -> f64 {
        hs_norm(&self.u, 1.0).powi(2) + hs_norm(&self.ut, 0.0).powi(2)
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig {
    pub alpha: f64,
    /// Noise cutoff `N`.
    pub level: u32,
    /// Galerkin cutoff `M ≥ N`.
    pub galerkin: u32,
    pub dt: f64,
    pub steps: usize,
    /// Initial position, projected onto `|n| ≤ M`.
    pub u0: SpectralField,
    /// Initial velocity, projected onto `|n| ≤ M`.
    pub u1: SpectralField,
    /// Include the counterterm `3σ_N(t)u`.
    pub renormalize: bool,
    /// Include the cubic term; off gives the linear (stochastic) wave equation.
    pub cubic: bool,
    /// Abort when the H¹ norm of the position exceeds this value.
    pub h1_ceiling: f64,
    pub forcing: Option<Forcing>,
}

impl SolveConfig {
    /// Zero data, renormalized cubic equation, `M = 2N`.
    pub fn new(alpha: f64, level: u32, dt: f64, steps: usize) -> Self {
        SolveConfig {
            alpha,
            level,
            galerkin: 2 * level,
            dt,
            steps,
            u0: SpectralField::zeros(1),
            u1: SpectralField::zeros(1),
            renormalize: true,
            cubic: true,
            h1_ceiling: 1e8,
            forcing: None,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn noise_config(&self, seed: u64) -> NoiseConfig {
        NoiseConfig {
            alpha: self.alpha,
            cutoff: self.level,
            dt: self.dt,
            steps: self.steps,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::Config(m));
        if self.level == 0 {
            return bad("noise cutoff must be positive".into());
        }
        if self.galerkin < self.level {
            return bad(format!(
                "Galerkin cutoff {} is below the noise cutoff {}",
                self.galerkin, self.level
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        if self.steps == 0 {
            return bad("need at least one step".into());
        }
        if self.horizon() > MAX_HORIZON * (1.0 + 1e-12) {
            return bad(format!(
                "horizon {} exceeds the maximal horizon {MAX_HORIZON}",
                self.horizon()
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("smoothing order must be nonnegative, got {}", self.alpha));
        }
        if !(self.h1_ceiling > 0.0) {
            return bad("H¹ ceiling must be positive".into());
        }
        Ok(())
    }

    fn check_path(&self, path: &NoiseConfig) -> Result<(), SolveError> {
        let want = self.noise_config(path.seed);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if path.cutoff != want.cutoff
            || path.steps != want.steps
            || !close(path.dt, want.dt)
            || path.alpha != want.alpha
        {
            return Err(SolveError::PathMismatch(format!(
                "path (α={}, N={}, dt={}, steps={}) vs solver (α={}, N={}, dt={}, steps={})",
                path.alpha, path.cutoff, path.dt, path.steps, want.alpha, want.cutoff, want.dt,
                want.steps
            )));
        }
        Ok(())
    }
}

/// Exact linear flow over one step on a ball.
struct LinearFlow {
    per_mode: Vec<u32>,
    table: Vec<Rotation>,
}

impl LinearFlow {
    fn new(b: &Ball, h: f64) -> Self {
        let (per_mode, table) = per_norm_table(b, |w| Rotation::new(w, h));
        LinearFlow { per_mode, table }
    }

    fn apply(&self, u: &mut SpectralField, v: &mut SpectralField) {
        let (uc, vc) = (u.coeffs_mut(), v.coeffs_mut());
        for i in 0..uc.len() {
            let (a, b) = self.table[self.per_mode[i] as usize].apply(uc[i], vc[i]);
            uc[i] = a;
            vc[i] = b;
        }
    }
}

fn guard(
    cfg: &SolveConfig,
    t: f64,
    u: &SpectralField,
    history: &mut Option<(Vec<SpectralField>, Vec<SpectralField>)>,
) -> Result<(), SolveError> {
    let h1 = hs_norm(u, 1.0);
    if h1.is_finite() && h1 <= cfg.h1_ceiling {
        return Ok(());
    }
    let (pos, vel) = history.take().unwrap_or_default();
    let partial = if pos.is_empty() {
        Trajectory::new(cfg.dt, vec![u.clone()])?
    } else {
        Trajectory::with_velocities(cfg.dt, pos, vel)?
    };
    Err(SolveError::BlowUp {
        t,
        h1,
        partial: Box::new(partial),
    })
}

/// Stepper for `∂_t²u + (1−Δ)u = π_M(−u³ + 3σ_N(t)u) + f + ⟨∇⟩^{−α}ξ_N`.
pub struct TruncatedStepper<'a> {
    cfg: SolveConfig,
    path: Option<&'a NoisePath>,
    /// Galerkin index of each free noise mode.
    noise_slots: Vec<usize>,
    flow: LinearFlow,
    sigma: Option<SigmaTable>,
    grid: usize,
    u: SpectralField,
    ut: SpectralField,
    g: SpectralField,
    step: usize,
}

impl<'a> TruncatedStepper<'a> {
    pub fn new(cfg: &SolveConfig, path: Option<&'a NoisePath>) -> Result<Self, SolveError> {
        cfg.validate()?;
        if let Some(p) = path {
            cfg.check_path(p.config())?;
        }
        let m = cfg.galerkin;
        let gb = ball(m);
        let noise_slots = match path {
            Some(p) => p
                .ball()
                .free()
                .iter()
                .map(|&i| gb.index_of(p.ball().mode(i as usize)).expect("N ≤ M"))
                .collect(),
            None => Vec::new(),
        };
        let sigma = (cfg.renormalize && cfg.cubic)
            .then(|| SigmaTable::uniform(cfg.alpha, cfg.level, cfg.dt, cfg.steps));
        let mut st = TruncatedStepper {
            cfg: cfg.clone(),
            path,
            noise_slots,
            flow: LinearFlow::new(&gb, cfg.dt),
            sigma,
            grid: dealiased_grid_size(3 * m, m),
            u: cfg.u0.resize(m),
            ut: cfg.u1.resize(m),
            g: SpectralField::zeros(m),
            step: 0,
        };
        st.g = st.rhs();
        Ok(st)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn state(&self) -> WaveState {
        WaveState {
            t: self.time(),
            u: self.u.clone(),
            ut: self.ut.clone(),
        }
    }

    fn rhs(&self) -> SpectralField {
        let m = self.cfg.galerkin;
        let mut g = if self.cfg.cubic {
            let s = self.sigma.as_ref().map_or(0.0, |t| t.value(self.step));
            pointwise_on_grid(&[&self.u], self.grid, &[m], |x, y| {
                let u = x[0];
                y[0] = u * (3.0 * s - u * u);
            })
            .pop()
            .expect("one output")
        } else {
            SpectralField::zeros(m)
        };
        if let Some(f) = &self.cfg.forcing {
            g.add_scaled(1.0, &f.at(self.time()));
        }
        g
    }

    /// One step; false once the horizon is reached.
    pub fn advance(&mut self) -> bool {
        if self.step == self.cfg.steps {
            return false;
        }
        let h = self.cfg.dt;
        self.ut.add_scaled(0.5 * h, &self.g);
        self.flow.apply(&mut self.u, &mut self.ut);
        if let Some(p) = self.path {
            for (slot, &i) in self.noise_slots.iter().enumerate() {
                let [_, xp, xv] = *p.step_increments(self.step, slot);
                self.u.add_to_pair(i, xp);
                self.ut.add_to_pair(i, xv);
            }
        }
        self.step += 1;
        self.g = self.rhs();
        self.ut.add_scaled(0.5 * h, &self.g);
        true
    }
}

fn run<S>(
    cfg: &SolveConfig,
    mut st: S,
    advance: impl Fn(&mut S) -> bool,
    state: impl Fn(&S) -> WaveState,
) -> Result<Trajectory, SolveError> {
    let first = state(&st);
    let mut hist = Some((vec![first.u], vec![first.ut]));
    guard(cfg, 0.0, &hist.as_ref().expect("set").0[0], &mut None)?;
    while advance(&mut st) {
        let s = state(&st);
        let (pos, vel) = hist.as_mut().expect("set");
        pos.push(s.u);
        vel.push(s.ut);
        let last = pos.last().expect("nonempty").clone();
        guard(cfg, s.t, &last, &mut hist)?;
    }
    let (pos, vel) = hist.expect("set");
    Ok(Trajectory::with_velocities(cfg.dt, pos, vel)?)
}

/// Solves the truncated renormalized equation driven by `path`.
pub fn solve_truncated(cfg: &SolveConfig, path: &NoisePath) -> Result<Trajectory, SolveError> {
    let st = TruncatedStepper::new(cfg, Some(path))?;
    run(cfg, st, TruncatedStepper::advance, TruncatedStepper::state)
}

/// Deterministic `∂_t²u + (1−Δ)u + u³ = f` with the same integrator.
pub fn solve_nlw(cfg: &SolveConfig) -> Result<Trajectory, SolveError> {
    let det = SolveConfig {
        renormalize: false,
        ..cfg.clone()
    };
    let st = TruncatedStepper::new(&det, None)?;
    run(&det, st, TruncatedStepper::advance, TruncatedStepper::state)
}

/// Stepper for the residual `v = u − ⟨1⟩ + ⟨30⟩`.
///
/// `v = w + Φ` where `Φ = I(⟨30⟩³) − 3⟨70⟩ + 3⟨320⟩` collects the forcing
/// that does not involve `v`, integrated exactly like the other trees, and
/// `w` carries the data and the `v`-dependent terms
/// `−v³ + 3(⟨30⟩−⟨1⟩)v² − 3⟨30⟩²v + 6(⟨30⟩⟨1⟩)v − 3⟨2⟩v`, stepped by
/// kick–drift–kick.
pub struct ResidualStepper {
    cfg: SolveConfig,
    flow: LinearFlow,
    grid: usize,
    cube30: DuhamelStepper,
    w: SpectralField,
    wt: SpectralField,
    phi: SpectralField,
    phi_t: SpectralField,
    g: SpectralField,
    step: usize,
}

impl ResidualStepper {
    /// Starts from the objects at `t = 0`.
    pub fn new(cfg: &SolveConfig, first: &ObjectSnapshot) -> Result<Self, SolveError> {
        cfg.validate()?;
        let m = cfg.galerkin;
        let mut st = ResidualStepper {
            cfg: cfg.clone(),
            flow: LinearFlow::new(&ball(m), cfg.dt),
            grid: dealiased_grid_size(3 * m, m),
            cube30: DuhamelStepper::new(m, cfg.dt),
            w: cfg.u0.resize(m),
            wt: cfg.u1.resize(m),
            phi: SpectralField::zeros(m),
            phi_t: SpectralField::zeros(m),
            g: SpectralField::zeros(m),
            step: 0,
        };
        st.absorb(first)?;
        Ok(st)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    /// `(v, ∂_t v)` at the current time.
    pub fn state(&self) -> WaveState {
        let mut u = self.w.clone();
        u.add_scaled(1.0, &self.phi);
        let mut ut = self.wt.clone();
        ut.add_scaled(1.0, &self.phi_t);
        WaveState {
            t: self.time(),
            u,
            ut,
        }
    }

    fn need<'s>(f: &'s Option<SpectralField>, name: &str) -> Result<&'s SpectralField, SolveError> {
        f.as_ref()
            .ok_or_else(|| SolveError::Config(format!("object snapshot lacks {name}")))
    }

    /// Updates `Φ` and the right-hand side with the objects at the current
    /// time.
    fn absorb(&mut self, obj: &ObjectSnapshot) -> Result<(), SolveError> {
        let m = self.cfg.galerkin;
        let tree30 = obj.tree30.resize(m);
        let cube = pointwise_on_grid(&[&tree30], self.grid, &[m], |x, y| {
            y[0] = x[0] * x[0] * x[0];
        })
        .pop()
        .expect("one output");
        let i_cube = self.cube30.push(&cube);
        let t70 = Self::need(&obj.tree70, "⟨70⟩")?;
        let t320 = Self::need(&obj.tree320, "⟨320⟩")?;
        self.phi = SpectralField::combination(m, &[(1.0, &i_cube), (-3.0, t70), (3.0, t320)]);
        self.phi_t = SpectralField::combination(
            m,
            &[
                (1.0, &self.cube30.velocity()),
                (-3.0, Self::need(&obj.tree70_velocity, "∂_t⟨70⟩")?),
                (3.0, Self::need(&obj.tree320_velocity, "∂_t⟨320⟩")?),
            ],
        );
        let mut v = self.w.clone();
        v.add_scaled(1.0, &self.phi);
        let p = Self::need(&obj.tree30_conv1, "⟨30⟩⟨1⟩")?;
        let mut g = pointwise_on_grid(
            &[&v, &tree30, &obj.conv1, p, &obj.wick2],
            self.grid,
            &[m],
            |x, y| {
                let (v, w, z, p, q) = (x[0], x[1], x[2], x[3], x[4]);
                y[0] = v * (-v * v + 3.0 * (w - z) * v - 3.0 * w * w + 6.0 * p - 3.0 * q);
            },
        )
        .pop()
        .expect("one output");
        if let Some(f) = &self.cfg.forcing {
            g.add_scaled(1.0, &f.at(self.time()));
        }
        self.g = g;
        Ok(())
    }

    /// Steps to the time of `next`, which must be the following snapshot.
    pub fn advance(&mut self, next: &ObjectSnapshot) -> Result<(), SolveError> {
        let h = self.cfg.dt;
        self.wt.add_scaled(0.5 * h, &self.g);
        self.flow.apply(&mut self.w, &mut self.wt);
        self.step += 1;
        self.absorb(next)?;
        self.wt.add_scaled(0.5 * h, &self.g);
        Ok(())
    }
}

/// Solves the residual equation with objects read from `objects`.
pub fn solve_residual(cfg: &SolveConfig, objects: &ObjectSet) -> Result<Trajectory, SolveError> {
    cfg.validate()?;
    if objects.level != cfg.level
        || objects.galerkin != cfg.galerkin
        || objects.steps() != cfg.steps
        || (objects.dt() - cfg.dt).abs() > 1e-12 * cfg.dt
    {
        return Err(SolveError::PathMismatch(
            "object set was built for a different grid or cutoff".into(),
        ));
    }
    let mut st = ResidualStepper::new(cfg, &objects.snapshot(0))?;
    let first = st.state();
    let mut hist = Some((vec![first.u], vec![first.ut]));
    for k in 1..=cfg.steps {
        st.advance(&objects.snapshot(k))?;
        let s = st.state();
        let (pos, vel) = hist.as_mut().expect("set");
        pos.push(s.u);
        vel.push(s.ut);
        let last = pos.last().expect("nonempty").clone();
        guard(cfg, s.t, &last, &mut hist)?;
    }
    let (pos, vel) = hist.expect("set");
    Ok(Trajectory::with_velocities(cfg.dt, pos, vel)?)
}

/// Discrepancy between the truncated solution and `⟨1⟩ − ⟨30⟩ + v` on one
/// noise path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// Sobolev index of the norm, `α − ½ − 0.1`.
    pub s: f64,
    pub times: Vec<f64>,
    pub discrepancy: Vec<f64>,
    pub max: f64,
}

/// Runs both routes on `path` in lockstep and measures
/// `‖u − (⟨1⟩ − ⟨30⟩ + v)‖_{H^s}` at every grid time.
pub fn decomposition_check(
    cfg: &SolveConfig,
    path: &NoisePath,
) -> Result<DecompositionReport, SolveError> {
    let s = cfg.alpha - 0.5 - 0.1;
    let m = cfg.galerkin;
    let mut truncated = TruncatedStepper::new(cfg, Some(path))?;
    let mut objects = ObjectStepper::new(path, m, Depth::Full)?;
    let first = objects.next_snapshot().expect("time zero");
    let mut residual = ResidualStepper::new(cfg, &first)?;
    let measure = |u: &WaveState, obj: &ObjectSnapshot, v: &WaveState| {
        let d = SpectralField::combination(
            m,
            &[(1.0, &u.u), (-1.0, &obj.conv1), (1.0, &obj.tree30), (-1.0, &v.u)],
        );
        hs_norm(&d, s)
    };
    let mut times = vec![0.0];
    let mut discrepancy = vec![measure(&truncated.state(), &first, &residual.state())];
    while truncated.advance() {
        let obj = objects.next_snapshot().expect("same grid");
        residual.advance(&obj)?;
        let (u, v) = (truncated.state(), residual.state());
        for x in [&u, &v] {
            guard(cfg, x.t, &x.u, &mut None)?;
        }
        times.push(u.t);
        discrepancy.push(measure(&u, &obj, &v));
    }
    let max = discrepancy.iter().copied().fold(0.0, f64::max);
    Ok(DecompositionReport {
        s,
        times,
        discrepancy,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::FreqIndex;
    use crate::objects::build_objects;
    use num_complex::Complex64;

    fn smooth_data(m: u32, scale: f64) -> (SpectralField, SpectralField) {
        let u0 = SpectralField::from_free_fn(m, |n| {
            let k = n.norm_sq() as f64;
            Complex64::new(scale * (-k).exp(), 0.5 * scale * (-0.5 * k).exp() * n.0[0] as f64)
        });
        let u1 = SpectralField::from_free_fn(m, |n| {
            Complex64::new(0.0, scale * (-(n.norm_sq() as f64)).exp())
        });
        (u0, u1)
    }

    fn max_diff(a: &Trajectory, b: &Trajectory) -> f64 {
        a.positions()
            .iter()
            .zip(b.positions())
            .map(|(x, y)| {
                let d = SpectralField::combination(x.cutoff(), &[(1.0, x), (-1.0, y)]);
                hs_norm(&d, 0.0)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_everything_stays_zero() {
        let cfg = SolveConfig::new(0.25, 2, 0.05, 10);
        let path = NoisePath::zero(cfg.noise_config(0)).unwrap();
        assert!(solve_truncated(&cfg, &path).unwrap().is_zero());
        let set = build_objects(&path, cfg.galerkin).unwrap();
        assert!(solve_residual(&cfg, &set).unwrap().is_zero());
        let rep = decomposition_check(&cfg, &path).unwrap();
        assert_eq!(rep.max, 0.0);
    }

    #[test]
    fn linear_energy_is_conserved() {
        let mut cfg = SolveConfig::new(0.25, 3, 1e-4, 10_000);
        cfg.cubic = false;
        (cfg.u0, cfg.u1) = smooth_data(6, 1.0);
        let path = NoisePath::zero(cfg.noise_config(0)).unwrap();
        let tr = solve_truncated(&cfg, &path).unwrap();
        let e0 = WaveState::from_trajectory(&tr, 0).unwrap().linear_energy();
        let e1 = WaveState::from_trajectory(&tr, tr.steps()).unwrap().linear_energy();
        assert!(((e1 - e0) / e0).abs() < 1e-10, "{e0} {e1}");
    }

    #[test]
    fn linear_step_is_exact_rotation() {
        let n = FreqIndex::new(1, 1, 1);
        let mut cfg = SolveConfig::new(0.25, 1, 0.1, 7);
        cfg.cubic = false;
        cfg.u0 = SpectralField::single_mode(2, n, Complex64::new(1.0, 0.0));
        let tr = solve_nlw(&cfg).unwrap();
        let t: f64 = 0.7;
        assert!((tr.last().get(n).re - (2.0 * t).cos()).abs() < 1e-14);
    }

    fn manufactured_cfg(dt: f64) -> SolveConfig {
        let m = 3;
        let mut cfg = SolveConfig::new(0.25, 1, dt, (1.0 / dt).round() as usize);
        cfg.galerkin = m;
        (cfg.u0, cfg.u1) = smooth_data(m, 0.5);
        let n = FreqIndex::new(1, 0, 1);
        cfg.forcing = Some(Forcing::new(move |t| {
            let mut f = SpectralField::single_mode(m, n, Complex64::new(t.cos(), 0.3 * t));
            f.add_scaled((2.0 * t).sin(), &SpectralField::constant(m, 1.0));
            f
        }));
        cfg
    }

    #[test]
    fn truncated_solver_is_second_order() {
        // zero noise, cubic on, forcing on; errors against a dt/16 reference
        let base = 0.04;
        let solve = |dt: f64| {
            let cfg = manufactured_cfg(dt);
            let path = NoisePath::zero(cfg.noise_config(0)).unwrap();
            solve_truncated(&cfg, &path).unwrap().last().clone()
        };
        let reference = solve(base / 16.0);
        let err: Vec<f64> = [base, base / 2.0, base / 4.0]
            .iter()
            .map(|&dt| {
                let u = solve(dt);
                hs_norm(&SpectralField::combination(3, &[(1.0, &u), (-1.0, &reference)]), 0.0)
            })
            .collect();
        for w in err.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "order {order} from {err:?}");
        }
    }

    #[test]
    fn residual_with_zero_objects_is_nlw() {
        let mut cfg = SolveConfig::new(0.25, 2, 0.01, 50);
        (cfg.u0, cfg.u1) = smooth_data(4, 0.8);
        let path = NoisePath::zero(cfg.noise_config(0)).unwrap();
        let mut set = build_objects(&path, cfg.galerkin).unwrap();
        // zero noise leaves ⟨2⟩ = −σ; the residual equation sees only the trees
        set.wick2 = Trajectory::zeros(4, cfg.dt, cfg.steps).unwrap();
        let v = solve_residual(&cfg, &set).unwrap();
        let nlw = solve_nlw(&cfg).unwrap();
        assert!(max_diff(&v, &nlw) < 1e-10);
    }

    #[test]
    fn decomposition_discrepancy_is_small_and_shrinks() {
        let mut cfg = SolveConfig::new(0.25, 2, 0.01, 20);
        (cfg.u0, cfg.u1) = smooth_data(4, 0.2);
        let fine = NoisePath::sample(cfg.noise_config(17)).unwrap();
        let d_fine = decomposition_check(&cfg, &fine).unwrap().max;
        let mut coarse_cfg = cfg.clone();
        coarse_cfg.dt *= 2.0;
        coarse_cfg.steps /= 2;
        let coarse = fine.coarsen(2).unwrap();
        let d_coarse = decomposition_check(&coarse_cfg, &coarse).unwrap().max;
        assert!(d_fine < d_coarse && d_fine < 1e-3, "{d_fine} {d_coarse}");
    }

    #[test]
    fn blow_up_guard_aborts_with_partial_output() {
        let mut cfg = SolveConfig::new(0.25, 2, 0.01, 30);
        (cfg.u0, cfg.u1) = smooth_data(4, 1.0);
        cfg.h1_ceiling = hs_norm(&cfg.u0, 1.0) * 1.0001;
        cfg.u1 = cfg.u1.scaled(50.0);
        match solve_nlw(&cfg) {
            Err(SolveError::BlowUp { t, partial, .. }) => {
                assert!(t > 0.0);
                assert_eq!(partial.time(partial.steps()), t);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_given_path() {
        let mut cfg = SolveConfig::new(0.25, 2, 0.02, 10);
        (cfg.u0, cfg.u1) = smooth_data(4, 0.3);
        let path = NoisePath::sample(cfg.noise_config(5)).unwrap();
        let a = solve_truncated(&cfg, &path).unwrap();
        let b = solve_truncated(&cfg, &path).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_inconsistent_configuration() {
        let mut cfg = SolveConfig::new(0.25, 4, 0.01, 10);
        cfg.galerkin = 3;
        assert!(matches!(cfg.validate(), Err(SolveError::Config(_))));
        let cfg = SolveConfig::new(0.25, 2, 0.01, 10);
        let other = NoisePath::zero(NoiseConfig { steps: 11, ..cfg.noise_config(0) }).unwrap();
        assert!(matches!(solve_truncated(&cfg, &other), Err(SolveError::PathMismatch(_))));
    }
}
