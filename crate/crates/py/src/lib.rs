//! Python bindings: fields, noise paths, stochastic objects, solvers,
//! diagnostics, counting checks and the command-line entry point.

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use snlw::counting::{run_suite, CountingReport, SuiteConfig};
use snlw::diagnostics::{self, AnnuliSpec};
use snlw::lattice::{FreqIndex, SpectralField};
use snlw::noise::{NoiseConfig, NoisePath};
use snlw::objects::{ConvolutionStepper, Depth, ObjectStepper};
use snlw::solver::{self, SolveConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Real field on `|n| ≤ cutoff`, stored by Fourier coefficients.
#[pyclass(name = "Field", module = "snlw_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyField(SpectralField);

#[pymethods]
impl PyField {
    /// Field with coefficient `f(n)` on each free mode; mirrors are conjugated.
    #[staticmethod]
    fn from_modes(cutoff: u32, modes: BTreeMap<[i32; 3], Complex64>) -> Self {
        PyField(SpectralField::from_free_fn(cutoff, |n| {
            modes.get(&n.0).copied().unwrap_or_default()
        }))
    }

    #[staticmethod]
    fn zeros(cutoff: u32) -> Self {
        PyField(SpectralField::zeros(cutoff))
    }

    #[getter]
    fn cutoff(&self) -> u32 {
        self.0.cutoff()
    }

    fn __len__(&self) -> usize {
        self.0.mode_count()
    }

    fn get(&self, n: [i32; 3]) -> Complex64 {
        self.0.get(FreqIndex(n))
    }

    /// `[(n, coefficient)]` over the whole ball.
    fn coefficients(&self) -> Vec<([i32; 3], Complex64)> {
        let b = self.0.ball();
        (0..b.len()).map(|i| (b.mode(i).0, self.0.coeffs()[i])).collect()
    }

    fn eval_at(&self, x: [f64; 3]) -> f64 {
        self.0.eval_at(x)
    }

    /// Values on an `m³` grid, flattened row-major.
    fn to_grid(&self, m: usize) -> PyResult<Vec<f64>> {
        Ok(self.0.to_grid(m).map_err(value_err)?.values().to_vec())
    }

    fn hs_norm(&self, s: f64) -> f64 {
        diagnostics::hs_norm(&self.0, s)
    }

    #[pyo3(signature = (s, points_per_axis=None))]
    fn wsinf_norm(&self, s: f64, points_per_axis: Option<usize>) -> f64 {
        diagnostics::wsinf_norm(&self.0, s, points_per_axis)
    }

    fn project(&self, cutoff: u32) -> PyResult<Self> {
        Ok(PyField(self.0.project(cutoff).map_err(value_err)?))
    }

    fn __sub__(&self, other: &PyField) -> Self {
        let m = self.0.cutoff().max(other.0.cutoff());
        PyField(SpectralField::combination(m, &[(1.0, &self.0), (-1.0, &other.0)]))
    }

    fn __add__(&self, other: &PyField) -> Self {
        let m = self.0.cutoff().max(other.0.cutoff());
        PyField(SpectralField::combination(m, &[(1.0, &self.0), (1.0, &other.0)]))
    }

    /// Binary dump (see the README for the layout).
    fn dump<'py>(&self, py: Python<'py>, grid: u32, t: f64) -> PyResult<Bound<'py, PyBytes>> {
        let mut buf = Vec::new();
        self.0.write_dump(&mut buf, grid, t).map_err(value_err)?;
        Ok(PyBytes::new(py, &buf))
    }

    /// Inverse of [`PyField::dump`]; returns `(field, grid, t)`.
    #[staticmethod]
    fn load(data: &[u8]) -> PyResult<(Self, u32, f64)> {
        let (f, g, t) = SpectralField::read_dump(data).map_err(value_err)?;
        Ok((PyField(f), g, t))
    }

    fn __repr__(&self) -> String {
        format!("Field(cutoff={}, modes={})", self.0.cutoff(), self.0.mode_count())
    }
}

/// Exact per-mode noise increments on a uniform time grid.
#[pyclass(name = "NoisePath", module = "snlw_py", frozen)]
pub struct PyNoisePath(NoisePath);

#[pymethods]
impl PyNoisePath {
    #[new]
    #[pyo3(signature = (alpha, cutoff, dt, steps, seed, zero=false))]
    fn new(alpha: f64, cutoff: u32, dt: f64, steps: usize, seed: u64, zero: bool) -> PyResult<Self> {
        let cfg = NoiseConfig {
            alpha,
            cutoff,
            dt,
            steps,
            seed,
        };
        let p = if zero {
            NoisePath::zero(cfg)
        } else {
            NoisePath::sample(cfg)
        };
        Ok(PyNoisePath(p.map_err(value_err)?))
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.config().alpha
    }

    #[getter]
    fn cutoff(&self) -> u32 {
        self.0.config().cutoff
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.config().dt
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    /// The same path restricted to `|n| ≤ cutoff`.
    fn project(&self, cutoff: u32) -> PyResult<Self> {
        Ok(PyNoisePath(self.0.project(cutoff).map_err(value_err)?))
    }

    /// The same path on a grid `factor` times coarser.
    fn coarsen(&self, factor: usize) -> PyResult<Self> {
        Ok(PyNoisePath(self.0.coarsen(factor).map_err(value_err)?))
    }

    /// `⟨1⟩_N` at every grid time.
    fn stochastic_convolution(&self) -> Vec<PyField> {
        let mut st = ConvolutionStepper::new(&self.0);
        let mut out = vec![PyField(st.position())];
        while st.advance() {
            out.push(PyField(st.position()));
        }
        out
    }

    /// Final-time stochastic objects keyed by name; `full` adds the
    /// fifth- and seventh-order trees.
    #[pyo3(signature = (galerkin, full=true))]
    fn objects(&self, galerkin: u32, full: bool) -> PyResult<BTreeMap<String, PyField>> {
        let depth = if full { Depth::Full } else { Depth::Cubic };
        let snap = ObjectStepper::new(&self.0, galerkin, depth)
            .map_err(value_err)?
            .run_to_end();
        let mut out = BTreeMap::new();
        out.insert("conv1".into(), PyField(snap.conv1));
        out.insert("wick2".into(), PyField(snap.wick2));
        out.insert("wick3".into(), PyField(snap.wick3));
        out.insert("tree30".into(), PyField(snap.tree30));
        for (k, v) in [
            ("tree30x1", snap.tree30_conv1),
            ("tree320", snap.tree320),
            ("tree70", snap.tree70),
        ] {
            if let Some(f) = v {
                out.insert(k.into(), PyField(f));
            }
        }
        Ok(out)
    }
}

fn solve_config(path: &NoisePath, galerkin: Option<u32>, u0: Option<&PyField>, u1: Option<&PyField>) -> SolveConfig {
    let c = path.config();
    let mut cfg = SolveConfig::new(c.alpha, c.cutoff, c.dt, c.steps);
    if let Some(m) = galerkin {
        cfg.galerkin = m;
    }
    if let Some(u) = u0 {
        cfg.u0 = u.0.clone();
    }
    if let Some(u) = u1 {
        cfg.u1 = u.0.clone();
    }
    cfg
}

fn solve_err(e: solver::SolveError) -> PyErr {
    match e {
        solver::SolveError::BlowUp { .. } => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    }
}

/// Truncated renormalized equation on `path`; returns positions at every step.
#[pyfunction]
#[pyo3(signature = (path, galerkin=None, u0=None, u1=None))]
fn solve_truncated(
    path: &PyNoisePath,
    galerkin: Option<u32>,
    u0: Option<PyRef<'_, PyField>>,
    u1: Option<PyRef<'_, PyField>>,
) -> PyResult<Vec<PyField>> {
    let cfg = solve_config(&path.0, galerkin, u0.as_deref(), u1.as_deref());
    let tr = solver::solve_truncated(&cfg, &path.0).map_err(solve_err)?;
    Ok(tr.positions().iter().cloned().map(PyField).collect())
}

/// `(s, times, discrepancies)` between the truncated solution and the
/// second-order expansion on one path.
#[pyfunction]
#[pyo3(signature = (path, galerkin=None, u0=None, u1=None))]
fn decomposition_check(
    path: &PyNoisePath,
    galerkin: Option<u32>,
    u0: Option<PyRef<'_, PyField>>,
    u1: Option<PyRef<'_, PyField>>,
) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let cfg = solve_config(&path.0, galerkin, u0.as_deref(), u1.as_deref());
    let r = solver::decomposition_check(&cfg, &path.0).map_err(solve_err)?;
    Ok((r.s, r.times, r.discrepancy))
}

#[pyfunction]
fn sigma(t: f64, cutoff: u32, alpha: f64) -> f64 {
    snlw::renorm::sigma(t, cutoff, alpha)
}

#[pyfunction]
fn mode_variance(n: [i32; 3], t: f64, alpha: f64) -> f64 {
    snlw::renorm::mode_variance(FreqIndex(n), t, alpha)
}

#[pyfunction]
#[pyo3(signature = (n, t, cutoff, alpha, nodes=24))]
fn tree30_second_moment(n: [i32; 3], t: f64, cutoff: u32, alpha: f64, nodes: usize) -> f64 {
    diagnostics::tree30_second_moment(FreqIndex(n), t, cutoff, alpha, nodes)
}

#[pyfunction]
fn wick_square(u: &PyField, sigma: f64) -> PyField {
    PyField(snlw::renorm::wick_square(&u.0, sigma))
}

#[pyfunction]
fn wick_cube(u: &PyField, sigma: f64) -> PyField {
    PyField(snlw::renorm::wick_cube(&u.0, sigma))
}

/// Fits `E|X̂(n)|² ∼ ⟨n⟩^slope` from one field per replica; returns a dict
/// with `slope`, `stderr`, `s0`, `chi2_red` and `annuli`.
#[pyfunction]
fn fit_regularity(py: Python<'_>, replicas: Vec<PyRef<'_, PyField>>) -> PyResult<Py<PyAny>> {
    let first = replicas.first().ok_or_else(|| value_err("no replicas"))?;
    let cutoff = first.0.cutoff();
    let rows: Vec<Vec<f64>> = replicas.iter().map(|f| diagnostics::free_mode_powers(&f.0)).collect();
    if replicas.iter().any(|f| f.0.cutoff() != cutoff) {
        return Err(value_err("replicas must share one cutoff"));
    }
    let moments = diagnostics::mode_moments(&rows, &diagnostics::free_modes(cutoff));
    let fit = diagnostics::fit_regularity(&moments, AnnuliSpec::default()).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("slope", fit.slope)?;
    d.set_item("stderr", fit.stderr)?;
    d.set_item("intercept", fit.intercept)?;
    d.set_item("chi2_red", fit.chi2_red)?;
    d.set_item("s0", fit.s0)?;
    let annuli: Vec<(f64, f64, usize, f64, f64)> = fit
        .annuli
        .iter()
        .map(|a| (a.lo, a.hi, a.modes, a.center, a.value))
        .collect();
    d.set_item("annuli", annuli)?;
    Ok(d.into_any().unbind())
}

fn report_tuple(r: &CountingReport) -> (String, Vec<u32>, String, f64, f64, f64) {
    let signs: String = r.signs.iter().map(|&e| if e > 0 { '+' } else { '-' }).collect();
    (r.lemma.to_string(), r.scales.clone(), signs, r.lhs, r.bound, r.ratio)
}

/// The four counting estimates on a diagonal ladder of dyadic scales, as
/// `(lemma, scales, signs, lhs, bound, ratio)` tuples.
#[pyfunction]
#[pyo3(signature = (ladder, s=0.25, beta=0.25))]
fn counting_suite(
    py: Python<'_>,
    ladder: Vec<u32>,
    s: f64,
    beta: f64,
) -> PyResult<Vec<(String, Vec<u32>, String, f64, f64, f64)>> {
    let cfg = SuiteConfig {
        s,
        beta,
        beta_a5: beta,
        ..SuiteConfig::default()
    };
    let reports = py.detach(|| run_suite(&ladder, cfg)).map_err(value_err)?;
    Ok(reports.iter().map(report_tuple).collect())
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv = std::iter::once("snlw".to_string()).chain(args);
    py.detach(|| snlw::cli::main_with_args(argv))
}

#[pymodule]
fn snlw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_class::<PyNoisePath>()?;
    m.add_function(wrap_pyfunction!(solve_truncated, m)?)?;
    m.add_function(wrap_pyfunction!(decomposition_check, m)?)?;
    m.add_function(wrap_pyfunction!(sigma, m)?)?;
    m.add_function(wrap_pyfunction!(mode_variance, m)?)?;
    m.add_function(wrap_pyfunction!(tree30_second_moment, m)?)?;
    m.add_function(wrap_pyfunction!(wick_square, m)?)?;
    m.add_function(wrap_pyfunction!(wick_cube, m)?)?;
    m.add_function(wrap_pyfunction!(fit_regularity, m)?)?;
    m.add_function(wrap_pyfunction!(counting_suite, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
