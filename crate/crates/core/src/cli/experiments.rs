//! The subcommands. Every ensemble goes through [`map_replicas`], so each
//! table depends only on the configuration.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::config::{Command, ExperimentConfig, Method, NormSpec};
use super::output::{OutputDir, Table};
use super::CliError;
use crate::counting::{
    check_quintic, check_septic, ladder_spreads, run_suite, CountingError, CountingReport,
    Pairing, SignTuple, SuiteConfig,
};
use crate::diagnostics::{
    cauchy_norms, cauchy_table, conv1_tail_sum, fit_regularity, free_mode_powers, free_modes,
    hs_norm, mode_moments, wick_identity_report, wsinf_norm, xsb_norm, AnnuliSpec, WickSample,
};
use crate::ensemble::map_replicas;
use crate::lattice::{dealiased_grid_size, SpectralField};
use crate::noise::{NoiseConfig, NoisePath};
use crate::objects::{ConvolutionStepper, Depth, ObjectSnapshot, ObjectStepper, Trajectory};
use crate::renorm::{sigma, wick_cube, wick_square, SigmaTable};
use crate::solver::{ResidualStepper, SolveConfig, SolveError, TruncatedStepper, WaveState};

pub(super) fn dispatch(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    match cfg.command {
        Command::Sigma => sigma_table(cfg, out),
        Command::Simulate => simulate(cfg, out),
        Command::Objects => objects(cfg, out),
        Command::Regularity => regularity(cfg, out),
        Command::Converge => converge(cfg, out),
        Command::Counting => counting(cfg, out),
        Command::Wick => wick(cfg, out),
        Command::Xsb => xsb(cfg, out),
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn noise(cfg: &ExperimentConfig, cutoff: u32, seed: u64) -> Result<NoisePath, CliError> {
    NoisePath::sample(NoiseConfig {
        alpha: cfg.alpha,
        cutoff,
        dt: cfg.step_size(),
        steps: cfg.step_count(),
        seed,
    })
    .map_err(|e| CliError::Config(e.to_string()))
}

fn norm_of(f: &SpectralField, spec: NormSpec) -> f64 {
    match spec {
        NormSpec::Hs(s) => hs_norm(f, s),
        NormSpec::Winf(s) => wsinf_norm(f, s, None),
    }
}

fn norm_header<'a>(lead: &[&'a str], norms: &'a [String]) -> Vec<&'a str> {
    lead.iter().copied().chain(norms.iter().map(String::as_str)).collect()
}

fn recorded(k: usize, last: usize, every: usize) -> bool {
    k % every == 0 || k == last
}

fn sigma_table(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let tab = SigmaTable::uniform(cfg.alpha, cfg.n, cfg.step_size(), cfg.step_count());
    let mut t = Table::new(&["step", "t", "sigma"]);
    for (k, (time, v)) in tab.times.iter().zip(&tab.values).enumerate() {
        t.push(vec![k.to_string(), time.to_string(), v.to_string()]);
    }
    out.write_table("sigma.csv", &t)
}

fn solve_config(cfg: &ExperimentConfig, level: u32, galerkin: u32) -> SolveConfig {
    let a = cfg.amplitude;
    let mut s = SolveConfig::new(cfg.alpha, level, cfg.step_size(), cfg.step_count());
    s.galerkin = galerkin;
    s.u0 = SpectralField::from_free_fn(galerkin, |n| {
        Complex64::new(a * (-(n.norm_sq() as f64)).exp(), 0.0)
    });
    s.u1 = SpectralField::zeros(galerkin);
    s.h1_ceiling = cfg.h1_ceiling;
    s
}

/// Per-replica time series and final state; `Err` carries the blow-up time.
struct Run {
    rows: Vec<(usize, f64, Vec<f64>)>,
    last: Option<WaveState>,
    blow_up: Option<(f64, f64)>,
}

fn simulate(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (n, m) = (cfg.n, cfg.galerkin());
    let scfg = solve_config(cfg, n, m);
    scfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let last_step = cfg.step_count();
    let runs = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<Run, CliError> {
        let path = noise(cfg, n, seed)?;
        let mut run = Run {
            rows: Vec::new(),
            last: None,
            blow_up: None,
        };
        let record = |k: usize, st: WaveState, run: &mut Run| -> bool {
            let h1 = hs_norm(&st.u, 1.0);
            if recorded(k, last_step, cfg.every) || !(h1 <= cfg.h1_ceiling) {
                run.rows
                    .push((k, st.t, cfg.norms.iter().map(|&s| norm_of(&st.u, s)).collect()));
            }
            let ok = h1 <= cfg.h1_ceiling;
            if !ok {
                run.blow_up = Some((st.t, h1));
            }
            run.last = Some(st);
            ok
        };
        match cfg.method {
            Method::Truncated => {
                let mut st = TruncatedStepper::new(&scfg, Some(&path)).map_err(solve_err)?;
                let mut k = 0;
                if record(k, st.state(), &mut run) {
                    while st.advance() {
                        k += 1;
                        if !record(k, st.state(), &mut run) {
                            break;
                        }
                    }
                }
            }
            Method::Residual => {
                let mut objs = ObjectStepper::new(&path, m, Depth::Full).map_err(failed)?;
                let first = objs.next_snapshot().expect("time zero");
                let mut res = ResidualStepper::new(&scfg, &first).map_err(solve_err)?;
                let compose = |o: &ObjectSnapshot, v: &WaveState| WaveState {
                    t: v.t,
                    u: SpectralField::combination(
                        m,
                        &[(1.0, &o.conv1), (-1.0, &o.tree30), (1.0, &v.u)],
                    ),
                    ut: SpectralField::combination(
                        m,
                        &[(1.0, &o.conv1_velocity), (-1.0, &o.tree30_velocity), (1.0, &v.ut)],
                    ),
                };
                let mut k = 0;
                if record(k, compose(&first, &res.state()), &mut run) {
                    while let Some(o) = objs.next_snapshot() {
                        res.advance(&o).map_err(solve_err)?;
                        k += 1;
                        if !record(k, compose(&o, &res.state()), &mut run) {
                            break;
                        }
                    }
                }
            }
        }
        Ok(run)
    });
    let names: Vec<String> = cfg.norms.iter().map(|s| s.to_string()).collect();
    let mut t = Table::new(&norm_header(&["replica", "step", "t"], &names));
    let mut blow = Vec::new();
    let runs: Vec<Run> = runs.into_iter().collect::<Result<_, _>>()?;
    for (r, run) in runs.iter().enumerate() {
        for (k, time, vals) in &run.rows {
            let mut row = vec![r.to_string(), k.to_string(), time.to_string()];
            row.extend(vals.iter().map(f64::to_string));
            t.push(row);
        }
        if let Some((time, h1)) = run.blow_up {
            blow.push(format!("replica {r}: H1 norm {h1:e} at t = {time}"));
        }
    }
    out.write_table("timeseries.csv", &t)?;
    if cfg.dump {
        let grid = dealiased_grid_size(3 * m, m) as u32;
        for (r, run) in runs.iter().enumerate() {
            if let Some(st) = &run.last {
                out.write_dump(&format!("u_r{r:04}.bin"), &st.u, grid, st.t)?;
            }
        }
    }
    if blow.is_empty() {
        Ok(())
    } else {
        Err(CliError::BlowUp(blow.join("; ")))
    }
}

fn solve_err(e: SolveError) -> CliError {
    match e {
        SolveError::Config(m) | SolveError::PathMismatch(m) => CliError::Config(m),
        SolveError::BlowUp { t, h1, .. } => CliError::BlowUp(format!("H1 norm {h1:e} at t = {t}")),
        other => CliError::Failed(other.to_string()),
    }
}

fn member<'a>(s: &'a ObjectSnapshot, name: &str) -> Option<&'a SpectralField> {
    match name {
        "conv1" => Some(&s.conv1),
        "wick2" => Some(&s.wick2),
        "wick3" => Some(&s.wick3),
        "tree30" => Some(&s.tree30),
        "tree30x1" => s.tree30_conv1.as_ref(),
        "tree320" => s.tree320.as_ref(),
        "tree70" => s.tree70.as_ref(),
        _ => None,
    }
}

const MEMBERS: [&str; 7] = crate::objects::ObjectSet::MEMBERS;

fn depth_for(object: &str) -> Depth {
    if ["conv1", "wick2", "wick3", "tree30"].contains(&object) {
        Depth::Cubic
    } else {
        Depth::Full
    }
}

fn objects(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (n, m) = (cfg.n, cfg.galerkin());
    let last_step = cfg.step_count();
    type Rows = (Vec<(usize, f64, &'static str, Vec<f64>)>, ObjectSnapshot);
    let runs = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<Rows, CliError> {
        let path = noise(cfg, n, seed)?;
        let mut st = ObjectStepper::new(&path, m, Depth::Full).map_err(failed)?;
        let mut rows = Vec::new();
        let mut last = None;
        let mut k = 0;
        while let Some(s) = st.next_snapshot() {
            if recorded(k, last_step, cfg.every) {
                for name in MEMBERS {
                    let f = member(&s, name).expect("full depth");
                    rows.push((k, s.t, name, cfg.norms.iter().map(|&x| norm_of(f, x)).collect()));
                }
            }
            last = Some(s);
            k += 1;
        }
        Ok((rows, last.expect("at least one snapshot")))
    });
    let runs: Vec<Rows> = runs.into_iter().collect::<Result<_, _>>()?;
    let names: Vec<String> = cfg.norms.iter().map(|s| s.to_string()).collect();
    let mut t = Table::new(&norm_header(&["replica", "step", "t", "object"], &names));
    for (r, (rows, _)) in runs.iter().enumerate() {
        for (k, time, name, vals) in rows {
            let mut row = vec![r.to_string(), k.to_string(), time.to_string(), name.to_string()];
            row.extend(vals.iter().map(f64::to_string));
            t.push(row);
        }
    }
    out.write_table("objects.csv", &t)?;
    if cfg.dump {
        for (r, (_, snap)) in runs.iter().enumerate() {
            for name in MEMBERS {
                let f = member(snap, name).expect("full depth");
                let grid = dealiased_grid_size(3 * f.cutoff(), f.cutoff()) as u32;
                out.write_dump(&format!("{name}_r{r:04}.bin"), f, grid, snap.t)?;
            }
        }
    }
    Ok(())
}

/// Final-time field of `object` on one noise path.
fn final_object(path: &NoisePath, galerkin: u32, object: &str) -> Result<SpectralField, CliError> {
    if object == "conv1" {
        let mut st = ConvolutionStepper::new(path);
        while st.advance() {}
        return Ok(st.position());
    }
    let snap = ObjectStepper::new(path, galerkin, depth_for(object))
        .map_err(failed)?
        .run_to_end();
    member(&snap, object)
        .cloned()
        .ok_or_else(|| CliError::Config(format!("unknown object `{object}`")))
}

fn regularity(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (n, m) = (cfg.n, cfg.galerkin());
    let rows = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<(u32, Vec<f64>), CliError> {
        let path = noise(cfg, n, seed)?;
        let f = final_object(&path, m, &cfg.object)?;
        Ok((f.cutoff(), free_mode_powers(&f)))
    });
    let rows: Vec<(u32, Vec<f64>)> = rows.into_iter().collect::<Result<_, _>>()?;
    let cutoff = rows[0].0;
    let powers: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    let modes = free_modes(cutoff);
    let moments = mode_moments(&powers, &modes);
    let mut mt = Table::new(&["n1", "n2", "n3", "mean", "stderr"]);
    for mm in &moments {
        mt.push(vec![
            mm.n[0].to_string(),
            mm.n[1].to_string(),
            mm.n[2].to_string(),
            mm.mean.to_string(),
            mm.stderr.to_string(),
        ]);
    }
    out.write_table("moments.csv", &mt)?;
    let fit = fit_regularity(&moments, AnnuliSpec::default())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut at = Table::new(&["lo", "hi", "modes", "center", "value", "log_stderr"]);
    for a in &fit.annuli {
        at.push(vec![
            a.lo.to_string(),
            a.hi.to_string(),
            a.modes.to_string(),
            a.center.to_string(),
            a.value.to_string(),
            a.log_stderr.to_string(),
        ]);
    }
    out.write_table("annuli.csv", &at)?;
    let mut ft = Table::new(&[
        "object", "alpha", "N", "M", "t", "replicas", "annuli", "slope", "intercept", "stderr",
        "chi2_red", "s0",
    ]);
    ft.push(vec![
        cfg.object.clone(),
        cfg.alpha.to_string(),
        n.to_string(),
        m.to_string(),
        cfg.t_max.to_string(),
        cfg.replicas.to_string(),
        fit.annuli.len().to_string(),
        fit.slope.to_string(),
        fit.intercept.to_string(),
        fit.stderr.to_string(),
        fit.chi2_red.to_string(),
        fit.s0.to_string(),
    ]);
    out.write_table("fit.csv", &ft)
}

fn converge(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let levels = cfg.levels.clone();
    let top = *levels.last().expect("validated");
    let s = cfg.index();
    let rows = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<Vec<f64>, CliError> {
        let path = noise(cfg, top, seed)?;
        let mut fields = Vec::with_capacity(levels.len());
        for &l in &levels {
            let p = path.project(l).map_err(failed)?;
            let f = if cfg.object == "u" {
                let scfg = solve_config(cfg, l, 2 * l);
                let mut st = TruncatedStepper::new(&scfg, Some(&p)).map_err(solve_err)?;
                while st.advance() {}
                let u = st.state().u;
                let h1 = hs_norm(&u, 1.0);
                if !(h1 <= cfg.h1_ceiling) {
                    return Err(CliError::BlowUp(format!("N = {l}: H1 norm {h1:e}")));
                }
                u
            } else {
                final_object(&p, 2 * l, &cfg.object)?
            };
            fields.push(f);
        }
        Ok(cauchy_norms(&fields, s))
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_, _>>()?;
    let table = cauchy_table(&cfg.object, s, cfg.t_max, &levels, &rows);
    let mut t = Table::new(&[
        "object", "s", "t", "n_lo", "n_hi", "mean", "stderr", "mean_sq", "stderr_sq", "oracle_sq",
    ]);
    for r in &table.rows {
        let oracle = if cfg.object == "conv1" {
            conv1_tail_sum(r.n_lo, r.n_hi, s, cfg.t_max, cfg.alpha).to_string()
        } else {
            String::new()
        };
        t.push(vec![
            cfg.object.clone(),
            s.to_string(),
            cfg.t_max.to_string(),
            r.n_lo.to_string(),
            r.n_hi.to_string(),
            r.norm.mean.to_string(),
            r.norm.stderr.to_string(),
            r.norm_sq.mean.to_string(),
            r.norm_sq.stderr.to_string(),
            oracle,
        ]);
    }
    out.write_table("cauchy.csv", &t)
}

/// Evaluation points and the pairs whose covariance laws are checked.
pub const WICK_POINTS: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [PI / 4.0, 0.0, 0.0],
    [PI / 2.0, PI / 3.0, 0.0],
    [1.0, 2.0, 3.0],
];
pub const WICK_PAIRS: [(usize, usize); 5] = [(0, 0), (0, 1), (0, 2), (1, 3), (2, 3)];

fn wick(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let n = cfg.n;
    let sig = sigma(cfg.t_max, n, cfg.alpha);
    let samples = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<WickSample, CliError> {
        let path = noise(cfg, n, seed)?;
        let u = final_object(&path, 2 * n, "conv1")?;
        let w2 = wick_square(&u, sig);
        let w3 = wick_cube(&u, sig);
        Ok(WickSample {
            wick2: WICK_POINTS.iter().map(|&x| w2.eval_at(x)).collect(),
            wick3: WICK_POINTS.iter().map(|&x| w3.eval_at(x)).collect(),
        })
    });
    let samples: Vec<WickSample> = samples.into_iter().collect::<Result<_, _>>()?;
    let rep = wick_identity_report(&samples, &WICK_POINTS, &WICK_PAIRS, cfg.t_max, n, cfg.alpha);
    let pt = |x: [f64; 3]| format!("{} {} {}", x[0], x[1], x[2]);
    let mut t = Table::new(&["quantity", "x", "y", "expected", "mean", "stderr", "z"]);
    for c in &rep.checks {
        t.push(vec![
            c.quantity.clone(),
            pt(c.x),
            pt(c.y),
            c.expected.to_string(),
            c.estimate.mean.to_string(),
            c.estimate.stderr.to_string(),
            c.z.to_string(),
        ]);
    }
    out.write_table("wick.csv", &t)
}

fn xsb(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let (n, m) = (cfg.n, cfg.galerkin());
    let (s, b) = (cfg.index(), cfg.b);
    let values = map_replicas(cfg.replicas, cfg.seed, |_, seed| -> Result<f64, CliError> {
        let path = noise(cfg, n, seed)?;
        let mut st = ObjectStepper::new(&path, m, Depth::Full).map_err(failed)?;
        let mut fields = Vec::with_capacity(cfg.step_count() + 1);
        while let Some(snap) = st.next_snapshot() {
            fields.push(member(&snap, &cfg.object).expect("validated").clone());
        }
        let tr = Trajectory::new(cfg.step_size(), fields).map_err(failed)?;
        xsb_norm(&tr, s, b, cfg.window).map_err(failed)
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_, _>>()?;
    let mut t = Table::new(&["replica", "xsb"]);
    for (r, v) in values.iter().enumerate() {
        t.push(vec![r.to_string(), v.to_string()]);
    }
    out.write_table("xsb_replicas.csv", &t)?;
    let e = crate::ensemble::Estimate::from_samples(&values);
    let mut st = Table::new(&["object", "N", "M", "s", "b", "window", "mean", "stderr"]);
    st.push(vec![
        cfg.object.clone(),
        n.to_string(),
        m.to_string(),
        s.to_string(),
        b.to_string(),
        format!("{:?}", cfg.window).to_lowercase(),
        e.mean.to_string(),
        e.stderr.to_string(),
    ]);
    out.write_table("xsb.csv", &st)
}

fn counting_err(e: CountingError) -> CliError {
    match e {
        CountingError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

fn counting(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let suite = SuiteConfig {
        s: cfg.s.unwrap_or(0.25),
        beta: cfg.beta,
        beta_a5: cfg.beta,
        eps: 0.01,
        budget: cfg.budget,
    };
    let mut reports = run_suite(&cfg.ladder, suite).map_err(counting_err)?;
    let spreads = ladder_spreads(&reports);
    if cfg.extended {
        let mut signs7 = Vec::new();
        for bits in 0..128u8 {
            signs7.push(std::array::from_fn(|j| if bits >> j & 1 == 1 { -1 } else { 1 }));
        }
        reports.extend(check_quintic(0.25, cfg.beta, 0.25, &signs7).map_err(counting_err)?);
        for pairs in [&[(1, 4), (2, 5), (3, 6)][..], &[(1, 4), (2, 5)][..]] {
            let p = Pairing::new(pairs).map_err(counting_err)?;
            for e in SignTuple::all() {
                reports.push(check_septic(0.75, cfg.beta, &p, e).map_err(counting_err)?);
            }
        }
    }
    out.write_table("counting.csv", &report_table(&reports))?;
    let mut t = Table::new(&["lemma", "signs", "min_ratio", "max_ratio", "spread"]);
    for s in &spreads {
        t.push(vec![
            s.lemma.to_string(),
            sign_label(&s.signs),
            s.min_ratio.to_string(),
            s.max_ratio.to_string(),
            s.spread.to_string(),
        ]);
    }
    out.write_table("spreads.csv", &t)
}

fn sign_label(s: &[i8]) -> String {
    s.iter().map(|&e| if e > 0 { '+' } else { '-' }).collect()
}

fn report_table(reports: &[CountingReport]) -> Table {
    let mut t = Table::new(&[
        "lemma", "scales", "signs", "parameters", "lhs", "bound_form", "bound", "ratio",
        "iterations",
    ]);
    for r in reports {
        let scales: Vec<String> = r.scales.iter().map(u32::to_string).collect();
        t.push(vec![
            r.lemma.to_string(),
            scales.join("x"),
            sign_label(&r.signs),
            r.parameters.clone(),
            r.lhs.to_string(),
            r.bound_form.clone(),
            r.bound.to_string(),
            r.ratio.to_string(),
            r.iterations.to_string(),
        ]);
    }
    t
}
