//! Shared experiment parameters. Every flag can also be given as a
//! `key=value` line in a `--config` file using the flag's long name; flags
//! given on the command line take precedence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use koopman_core::predict::{EvalSpec, SampleSize};
use koopman_core::{Dictionary, DynamicalSystem, Measure};

use crate::CliError;

#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// key=value file with defaults for any of the flags below
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// logistic | identity | rotation:omega=<f> | affine:a=<f>,b=<f>
    #[arg(long, global = true)]
    pub system: Option<String>,

    /// legendre:<deg> | monomial:<deg> | fourier:<modes> | sine:<mode>
    #[arg(long, global = true)]
    pub dict: Option<String>,

    /// uniform:<lo>,<hi> | uniform:circle | gaussian:<mean>,<var>
    #[arg(long, global = true)]
    pub measure: Option<String>,

    /// Sample counts, comma separated (1e5 style accepted)
    #[arg(long = "M", global = true)]
    pub m: Option<String>,

    /// Dictionary sizes for size sweeps, comma separated
    #[arg(long = "N", global = true)]
    pub n: Option<String>,

    /// Single sampling seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Number of seeds; runs seeds 0..seeds
    #[arg(long, global = true)]
    pub seeds: Option<u64>,

    #[arg(long, global = true)]
    pub horizon: Option<usize>,

    /// Initial state, comma separated; drawn from the measure when absent
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<String>,

    /// Quadrature order of the analytic fit
    #[arg(long = "quad-order", global = true)]
    pub quad_order: Option<usize>,

    /// L2 evaluation: quadrature:<order> | mc:<samples>[,<seed>]
    #[arg(long, global = true)]
    pub eval: Option<String>,

    /// Use the analytic operator instead of a sampled one
    #[arg(long, global = true)]
    pub analytic: bool,

    /// Build snapshots from one trajectory starting at x0
    #[arg(long, global = true)]
    pub trajectory: bool,

    /// Matrix CSV to read instead of fitting
    #[arg(long, global = true)]
    pub matrix: Option<PathBuf>,

    /// Eigenpair index
    #[arg(long, global = true)]
    pub index: Option<usize>,

    #[arg(long, global = true)]
    pub tikhonov: Option<f64>,

    /// Output directory
    #[arg(long = "out-dir", env = "KOOPMAN_OUT_DIR", global = true)]
    pub out_dir: Option<PathBuf>,

    /// Omit the timestamp from output headers
    #[arg(long, global = true)]
    pub reproducible: bool,
}

const KEYS: &[&str] = &[
    "system", "dict", "measure", "M", "N", "seed", "seeds", "horizon", "x0", "quad-order", "eval",
    "analytic", "trajectory", "matrix", "index", "tikhonov", "out-dir", "reproducible",
];

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Config(format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_field<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("bad value `{v}` for `{key}`")))
}

impl Params {
    /// Fills unset fields from `self.config`, if given.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_config(&text)?;
        Ok(self)
    }

    pub fn merge_config(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            match key {
                "system" => fill(&mut self.system, value),
                "dict" => fill(&mut self.dict, value),
                "measure" => fill(&mut self.measure, value),
                "M" => fill(&mut self.m, value),
                "N" => fill(&mut self.n, value),
                "seed" => fill(&mut self.seed, parse_field(key, &value)?),
                "seeds" => fill(&mut self.seeds, parse_field(key, &value)?),
                "horizon" => fill(&mut self.horizon, parse_field(key, &value)?),
                "x0" => fill(&mut self.x0, value),
                "quad-order" => fill(&mut self.quad_order, parse_field(key, &value)?),
                "eval" => fill(&mut self.eval, value),
                "matrix" => fill(&mut self.matrix, PathBuf::from(value)),
                "index" => fill(&mut self.index, parse_field(key, &value)?),
                "tikhonov" => fill(&mut self.tikhonov, parse_field(key, &value)?),
                "out-dir" => fill(&mut self.out_dir, PathBuf::from(value)),
                "analytic" => self.analytic |= parse_bool(key, &value)?,
                "trajectory" => self.trajectory |= parse_bool(key, &value)?,
                "reproducible" => self.reproducible |= parse_bool(key, &value)?,
                _ => {
                    return Err(CliError::Config(format!(
                        "config line {}: unknown key `{key}` (known: {})",
                        lineno + 1,
                        KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<DynamicalSystem, CliError> {
        let spec = self.system.as_deref().ok_or_else(|| missing("system"))?;
        Ok(DynamicalSystem::parse(spec)?)
    }

    /// The given measure, or the uniform measure on the system's domain
    /// when that domain is bounded.
    pub fn measure(&self, system: &DynamicalSystem) -> Result<Measure, CliError> {
        match self.measure.as_deref() {
            Some(spec) => Ok(Measure::parse(spec)?),
            None => Measure::uniform_box(system.domain().clone()).map_err(|_| missing("measure")),
        }
    }

    pub fn dictionary(&self, measure: &Measure) -> Result<Dictionary, CliError> {
        let spec = self.dict.as_deref().ok_or_else(|| missing("dict"))?;
        Ok(Dictionary::parse(spec, Some(measure))?)
    }

    pub fn m_list(&self) -> Result<Vec<usize>, CliError> {
        parse_count_list("M", self.m.as_deref().ok_or_else(|| missing("M"))?)
    }

    pub fn n_list(&self) -> Result<Vec<usize>, CliError> {
        parse_count_list("N", self.n.as_deref().ok_or_else(|| missing("N"))?)
    }

    /// Sample sizes; `analytic` entries are allowed in the M list.
    pub fn sizes(&self) -> Result<Vec<SampleSize>, CliError> {
        let text = self.m.as_deref().ok_or_else(|| missing("M"))?;
        text.split(',')
            .map(|t| match t.trim() {
                "analytic" => Ok(SampleSize::Analytic),
                t => parse_count("M", t).map(SampleSize::Samples),
            })
            .collect()
    }

    /// `0..seeds` when `--seeds` is given, else the single `--seed` (default 0).
    pub fn seed_list(&self) -> Vec<u64> {
        match self.seeds {
            Some(k) => (0..k).collect(),
            None => vec![self.seed.unwrap_or(0)],
        }
    }

    pub fn horizon(&self, default: usize) -> usize {
        self.horizon.unwrap_or(default)
    }

    /// Parsed `--x0`, or one draw from `measure` with the first seed.
    pub fn x0(&self, measure: &Measure) -> Result<Vec<f64>, CliError> {
        match self.x0.as_deref() {
            Some(text) => text
                .split(',')
                .map(|t| parse_field::<f64>("x0", t.trim()))
                .collect(),
            None => Ok(measure.sample(1, self.seed_list()[0]).remove(0).0),
        }
    }

    pub fn eval(&self) -> Result<EvalSpec, CliError> {
        parse_eval(self.eval.as_deref().unwrap_or(DEFAULT_EVAL))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Canonical `key=value` echo of every set parameter, in flag order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                let _ = write!(s, " {k}={v}");
            }
        };
        put("system", self.system.clone());
        put("dict", self.dict.clone());
        put("measure", self.measure.clone());
        put("M", self.m.clone());
        put("N", self.n.clone());
        put("seed", self.seed.map(|v| v.to_string()));
        put("seeds", self.seeds.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("x0", self.x0.clone());
        put("quad-order", self.quad_order.map(|v| v.to_string()));
        put("eval", self.eval.clone());
        put("analytic", self.analytic.then(|| "true".into()));
        put("trajectory", self.trajectory.then(|| "true".into()));
        put("matrix", self.matrix.as_deref().map(path_str));
        put("index", self.index.map(|v| v.to_string()));
        put("tikhonov", self.tikhonov.map(|v| v.to_string()));
        s.trim_start().to_string()
    }
}

/// Default L2 evaluation rule; 1024 Gauss nodes integrate polynomial
/// errors exactly up to degree 2047.
pub const DEFAULT_EVAL: &str = "quadrature:1024";

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required parameter `--{key}`"))
}

pub fn parse_count(key: &str, t: &str) -> Result<usize, CliError> {
    if let Ok(v) = t.parse::<usize>() {
        return Ok(v);
    }
    let v: f64 = parse_field(key, t)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(CliError::Config(format!("`{key}` expects whole numbers, got `{t}`")))
    }
}

pub fn parse_count_list(key: &str, text: &str) -> Result<Vec<usize>, CliError> {
    let v: Vec<usize> = text
        .split(',')
        .map(|t| parse_count(key, t.trim()))
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.contains(&0) {
        return Err(CliError::Config(format!("`{key}` needs positive entries")));
    }
    Ok(v)
}

pub fn parse_eval(text: &str) -> Result<EvalSpec, CliError> {
    let bad = || CliError::Config(format!("bad eval spec `{text}`; use quadrature:<order> or mc:<samples>[,<seed>]"));
    let (kind, args) = text.split_once(':').ok_or_else(bad)?;
    match kind.trim() {
        "quadrature" => Ok(EvalSpec::Quadrature {
            order: args.trim().parse().map_err(|_| bad())?,
        }),
        "mc" => {
            let mut it = args.split(',');
            let samples = parse_count("eval", it.next().unwrap_or("").trim())?;
            let seed = match it.next() {
                Some(s) => s.trim().parse().map_err(|_| bad())?,
                None => 0,
            };
            Ok(EvalSpec::MonteCarlo { samples, seed })
        }
        _ => Err(bad()),
    }
}
