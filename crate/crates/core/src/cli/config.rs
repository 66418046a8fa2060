//! Experiment configuration: defaults, `key = value` files and flag
//! overrides, validated before anything runs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::CliError;
use crate::diagnostics::Window;
use crate::noise::MAX_HORIZON;
use crate::objects::ObjectSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Objects,
    Sigma,
    Regularity,
    Converge,
    Counting,
    Wick,
    Xsb,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Objects => "objects",
            Command::Sigma => "sigma",
            Command::Regularity => "regularity",
            Command::Converge => "converge",
            Command::Counting => "counting",
            Command::Wick => "wick",
            Command::Xsb => "xsb",
        }
    }
}

/// A norm reported on time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec {
    Hs(f64),
    Winf(f64),
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Hs(s) => write!(f, "hs:{s}"),
            NormSpec::Winf(s) => write!(f, "winf:{s}"),
        }
    }
}

impl FromStr for NormSpec {
    type Err = String;

    fn from_str(v: &str) -> Result<Self, String> {
        let (kind, s) = v
            .split_once(':')
            .ok_or_else(|| format!("norm `{v}` is not of the form hs:<s> or winf:<s>"))?;
        let s: f64 = s.parse().map_err(|_| format!("bad index in norm `{v}`"))?;
        match kind {
            "hs" => Ok(NormSpec::Hs(s)),
            "winf" => Ok(NormSpec::Winf(s)),
            _ => Err(format!("unknown norm kind `{kind}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Truncated,
    Residual,
}

/// Every knob of every subcommand; irrelevant keys are ignored by the
/// subcommands that do not use them but still echoed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: f64,
    pub n: u32,
    pub m: Option<u32>,
    pub levels: Vec<u32>,
    pub dt: f64,
    pub t_max: f64,
    pub steps: Option<usize>,
    pub seed: u64,
    pub replicas: usize,
    pub object: String,
    pub s: Option<f64>,
    pub b: f64,
    pub beta: f64,
    pub window: Window,
    pub norms: Vec<NormSpec>,
    pub method: Method,
    pub amplitude: f64,
    pub every: usize,
    pub ladder: Vec<u32>,
    pub extended: bool,
    pub budget: u64,
    pub h1_ceiling: f64,
    pub dump: bool,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Keys accepted in config files and as `--key` flags.
pub const KEYS: [&str; 24] = [
    "alpha", "N", "M", "levels", "dt", "t-max", "steps", "seed", "replicas", "object", "s",
    "b", "beta", "window", "norms", "method", "amplitude", "every", "ladder", "extended",
    "budget", "h1-ceiling", "dump", "threads",
];

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        ExperimentConfig {
            command,
            alpha: 0.25,
            n: 8,
            m: None,
            levels: vec![4, 8, 16],
            dt: 0.01,
            t_max: 1.0,
            steps: None,
            seed: 0,
            replicas: 100,
            object: "conv1".into(),
            s: None,
            b: 0.5,
            beta: 0.25,
            window: Window::Hann,
            norms: vec![NormSpec::Hs(0.0), NormSpec::Hs(-0.6)],
            method: Method::Truncated,
            amplitude: 0.0,
            every: 1,
            ladder: vec![1, 2, 4],
            extended: false,
            budget: crate::counting::DEFAULT_BUDGET,
            h1_ceiling: 1e8,
            dump: false,
            threads: None,
            out: None,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = |what: &str| CliError::Config(format!("{key} = {value}: {what}"));
        fn num<T: FromStr>(v: &str) -> Option<T> {
            v.trim().parse().ok()
        }
        fn list<T: FromStr>(v: &str) -> Option<Vec<T>> {
            v.split(',').map(|x| x.trim().parse().ok()).collect()
        }
        fn flag(v: &str) -> Option<bool> {
            match v.trim() {
                "true" | "1" | "yes" => Some(true),
                "false" | "0" | "no" => Some(false),
                _ => None,
            }
        }
        match key {
            "alpha" => self.alpha = num(value).ok_or_else(|| bad("not a number"))?,
            "N" => self.n = num(value).ok_or_else(|| bad("not a cutoff"))?,
            "M" => self.m = Some(num(value).ok_or_else(|| bad("not a cutoff"))?),
            "levels" => self.levels = list(value).ok_or_else(|| bad("not a list of cutoffs"))?,
            "dt" => self.dt = num(value).ok_or_else(|| bad("not a number"))?,
            "t-max" => self.t_max = num(value).ok_or_else(|| bad("not a number"))?,
            "steps" => self.steps = Some(num(value).ok_or_else(|| bad("not a count"))?),
            "seed" => self.seed = num(value).ok_or_else(|| bad("not a seed"))?,
            "replicas" => self.replicas = num(value).ok_or_else(|| bad("not a count"))?,
            "object" => self.object = value.trim().to_string(),
            "s" => self.s = Some(num(value).ok_or_else(|| bad("not a number"))?),
            "b" => self.b = num(value).ok_or_else(|| bad("not a number"))?,
            "beta" => self.beta = num(value).ok_or_else(|| bad("not a number"))?,
            "window" => {
                self.window = match value.trim() {
                    "hann" => Window::Hann,
                    "rect" => Window::Rectangular,
                    _ => return Err(bad("expected hann or rect")),
                }
            }
            "norms" => {
                self.norms = value
                    .split(',')
                    .map(|x| x.trim().parse())
                    .collect::<Result<_, String>>()
                    .map_err(|e| bad(&e))?
            }
            "method" => {
                self.method = match value.trim() {
                    "truncated" => Method::Truncated,
                    "residual" => Method::Residual,
                    _ => return Err(bad("expected truncated or residual")),
                }
            }
            "amplitude" => self.amplitude = num(value).ok_or_else(|| bad("not a number"))?,
            "every" => self.every = num(value).ok_or_else(|| bad("not a count"))?,
            "ladder" => self.ladder = list(value).ok_or_else(|| bad("not a list of scales"))?,
            "extended" => self.extended = flag(value).ok_or_else(|| bad("not a boolean"))?,
            "budget" => {
                self.budget = value
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|b| *b >= 0.0)
                    .map(|b| b as u64)
                    .ok_or_else(|| bad("not a count"))?
            }
            "h1-ceiling" => self.h1_ceiling = num(value).ok_or_else(|| bad("not a number"))?,
            "dump" => self.dump = flag(value).ok_or_else(|| bad("not a boolean"))?,
            "threads" => self.threads = Some(num(value).ok_or_else(|| bad("not a count"))?),
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn galerkin(&self) -> u32 {
        self.m.unwrap_or(2 * self.n)
    }

    /// Number of time steps: `steps` if given, else `t-max / dt` rounded.
    pub fn step_count(&self) -> usize {
        self.steps
            .unwrap_or_else(|| (self.t_max / self.dt).round() as usize)
    }

    /// Step size consistent with [`Self::step_count`].
    pub fn step_size(&self) -> f64 {
        match self.steps {
            Some(k) => self.t_max / k as f64,
            None => self.dt,
        }
    }

    /// Sobolev index, defaulting per subcommand.
    pub fn index(&self) -> f64 {
        self.s.unwrap_or(match self.command {
            Command::Xsb => self.alpha + 0.4,
            _ => self.alpha - 0.5 - 0.1,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be nonnegative, got {}", self.alpha));
        }
        if self.n == 0 {
            return bad("N must be positive".into());
        }
        if self.galerkin() < self.n {
            return bad(format!("M = {} is below N = {}", self.galerkin(), self.n));
        }
        if !(self.t_max > 0.0 && self.t_max <= MAX_HORIZON) {
            return bad(format!("t-max must lie in (0, {MAX_HORIZON}], got {}", self.t_max));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let k = self.step_count();
        if k == 0 {
            return bad("need at least one time step".into());
        }
        if self.steps.is_none() && ((k as f64) * self.dt - self.t_max).abs() > 1e-9 * self.t_max {
            return bad(format!("t-max {} is not a multiple of dt {}", self.t_max, self.dt));
        }
        if self.every == 0 {
            return bad("every must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        let needs_replicas = matches!(
            self.command,
            Command::Regularity | Command::Converge | Command::Wick | Command::Xsb
        );
        if needs_replicas && self.replicas < 2 {
            return bad("ensemble statistics need at least 2 replicas".into());
        }
        if self.replicas == 0 {
            return bad("need at least one replica".into());
        }
        let object_ok = match self.command {
            Command::Converge => ["conv1", "tree30", "u"].contains(&self.object.as_str()),
            Command::Regularity | Command::Xsb => {
                ObjectSet::MEMBERS.contains(&self.object.as_str())
            }
            _ => true,
        };
        if !object_ok {
            return bad(format!("object `{}` is not available for {}", self.object, self.command.name()));
        }
        if self.command == Command::Converge {
            if self.levels.len() < 2 {
                return bad("converge needs at least two levels".into());
            }
            if self.levels.windows(2).any(|w| w[1] <= w[0]) || self.levels[0] == 0 {
                return bad("levels must be positive and increasing".into());
            }
        }
        if self.command == Command::Counting && self.ladder.is_empty() {
            return bad("ladder must not be empty".into());
        }
        if !(self.h1_ceiling > 0.0) {
            return bad("h1-ceiling must be positive".into());
        }
        Ok(())
    }

    /// Canonical `key = value` text: every key, sorted, one per line.
    pub fn canonical(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("alpha", self.alpha.to_string());
        kv.insert("N", self.n.to_string());
        kv.insert("M", self.galerkin().to_string());
        kv.insert("levels", join(&self.levels));
        kv.insert("dt", self.step_size().to_string());
        kv.insert("t-max", self.t_max.to_string());
        kv.insert("steps", self.step_count().to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("replicas", self.replicas.to_string());
        kv.insert("object", self.object.clone());
        kv.insert("s", self.index().to_string());
        kv.insert("b", self.b.to_string());
        kv.insert("beta", self.beta.to_string());
        kv.insert(
            "window",
            match self.window {
                Window::Hann => "hann",
                Window::Rectangular => "rect",
            }
            .into(),
        );
        kv.insert(
            "norms",
            self.norms.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        );
        kv.insert(
            "method",
            match self.method {
                Method::Truncated => "truncated",
                Method::Residual => "residual",
            }
            .into(),
        );
        kv.insert("amplitude", self.amplitude.to_string());
        kv.insert("every", self.every.to_string());
        kv.insert("ladder", join(&self.ladder));
        kv.insert("extended", self.extended.to_string());
        kv.insert("budget", self.budget.to_string());
        kv.insert("h1-ceiling", self.h1_ceiling.to_string());
        kv.insert("dump", self.dump.to_string());
        let mut out = format!("command = {}\n", self.command.name());
        for (k, v) in kv {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// SHA-256 of [`Self::canonical`]; thread count and output directory
    /// do not affect results and are excluded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
