//! Run configuration: `key=value` file merged under command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use msrom_core::avf::AvfConfig;
use msrom_core::experiment::CaseConfig;
use msrom_core::pod::ModeRule;
use msrom_core::{Grid, ModelKind, ModelSpec};

/// Flags shared by every subcommand. Any of them may also come from the
/// `--config` file, using the long flag name as key.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// key=value file; flags given on the command line win
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// kdv, nls1d, zk or nls2d
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub nx: Option<usize>,
    /// 2D models only (defaults to nx)
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_max: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// fixed-point tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// POD singular-value tolerance (overrides pod-modes)
    #[arg(long, conflicts_with = "pod_modes")]
    pub pod_tol: Option<f64>,
    #[arg(long)]
    pub pod_modes: Option<usize>,
    /// DEIM singular-value tolerance (overrides deim-modes)
    #[arg(long, conflicts_with = "deim_modes")]
    pub deim_tol: Option<f64>,
    #[arg(long)]
    pub deim_modes: Option<usize>,
    /// output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// reserved; every run is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, field '{}': {}", self.key, self.message),
            None => write!(f, "field '{}': {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed `key=value` file: keys map to `(line, value)`.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

const KEYS: &[&str] = &[
    "model",
    "nx",
    "ny",
    "x-min",
    "x-max",
    "y-min",
    "y-max",
    "dt",
    "t-final",
    "tol",
    "max-iters",
    "pod-tol",
    "pod-modes",
    "deim-tol",
    "deim-modes",
    "out",
    "seed",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(i + 1),
                    key: line.to_string(),
                    message: "expected key=value".into(),
                });
            };
            let key = k.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError { line: Some(i + 1), key, message: "unknown key".into() });
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> std::io::Result<String> {
        std::fs::read_to_string(path)
    }

    fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>, ConfigError>
    where
        V::Err: fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e: V::Err| ConfigError {
                line: Some(*line),
                key: key.to_string(),
                message: e.to_string(),
            }),
        }
    }

    /// Fills every unset field of `args` from the file.
    pub fn apply(&self, args: &mut RunArgs) -> Result<(), ConfigError> {
        fn fill<V>(slot: &mut Option<V>, v: Option<V>) {
            if slot.is_none() {
                *slot = v;
            }
        }
        if args.model.is_none() {
            if let Some((line, v)) = self.entries.get("model") {
                args.model = Some(parse_model(v).map_err(|message| ConfigError {
                    line: Some(*line),
                    key: "model".into(),
                    message,
                })?);
            }
        }
        fill(&mut args.nx, self.get("nx")?);
        fill(&mut args.ny, self.get("ny")?);
        fill(&mut args.x_min, self.get("x-min")?);
        fill(&mut args.x_max, self.get("x-max")?);
        fill(&mut args.y_min, self.get("y-min")?);
        fill(&mut args.y_max, self.get("y-max")?);
        fill(&mut args.dt, self.get("dt")?);
        fill(&mut args.t_final, self.get("t-final")?);
        fill(&mut args.tol, self.get("tol")?);
        fill(&mut args.max_iters, self.get("max-iters")?);
        // A flag for either form of a mode rule shadows both file keys.
        if args.pod_tol.is_none() && args.pod_modes.is_none() {
            args.pod_tol = self.get("pod-tol")?;
            args.pod_modes = self.get("pod-modes")?;
        }
        if args.deim_tol.is_none() && args.deim_modes.is_none() {
            args.deim_tol = self.get("deim-tol")?;
            args.deim_modes = self.get("deim-modes")?;
        }
        fill(&mut args.out, self.get("out")?);
        fill(&mut args.seed, self.get("seed")?);
        Ok(())
    }
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub case: CaseConfig<f64>,
    pub x_bounds: Option<(f64, f64)>,
    pub y_bounds: Option<(f64, f64)>,
    pub out: PathBuf,
    pub seed: u64,
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line: None, key: key.to_string(), message: message.into() }
}

fn positive(key: &str, v: Option<f64>) -> Result<Option<f64>, ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(invalid(key, format!("must be positive, got {x}"))),
        _ => Ok(v),
    }
}

fn rule(
    tol: Option<f64>,
    modes: Option<usize>,
    default: ModeRule<f64>,
    key: &str,
) -> Result<ModeRule<f64>, ConfigError> {
    match (tol, modes) {
        (Some(_), Some(_)) => Err(invalid(key, "give either a tolerance or a mode count, not both")),
        (Some(t), None) if !(t > 0.0 && t < 1.0) => Err(invalid(&format!("{key}-tol"), "must lie in (0, 1)")),
        (Some(t), None) => Ok(ModeRule::Tolerance(t)),
        (None, Some(0)) => Err(invalid(&format!("{key}-modes"), "must be positive")),
        (None, Some(n)) => Ok(ModeRule::Fixed(n)),
        (None, None) => Ok(default),
    }
}

impl RunConfig {
    /// Reads the config file (if any) under the flags and fills the rest
    /// from the reference settings of the model.
    pub fn resolve(mut args: RunArgs) -> Result<Self, crate::CliError> {
        if let Some(path) = args.config.clone() {
            let text =
                ConfigFile::load(&path).map_err(|e| crate::CliError::Missing(format!("{}: {e}", path.display())))?;
            ConfigFile::parse(&text)?.apply(&mut args)?;
        }
        let kind = args.model.ok_or_else(|| invalid("model", "required (kdv, nls1d, zk, nls2d)"))?;
        Ok(Self::from_args(kind, &args)?)
    }

    pub fn from_args(kind: ModelKind, args: &RunArgs) -> Result<Self, ConfigError> {
        let mut case = CaseConfig::<f64>::reference(kind);
        for (key, v) in [("nx", args.nx), ("ny", args.ny)] {
            if v == Some(0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if let Some(nx) = args.nx {
            case.nx = nx;
            if kind.is_2d() {
                case.ny = nx;
            }
        }
        if kind.is_2d() {
            if let Some(ny) = args.ny {
                case.ny = ny;
            }
        }
        if let Some(dt) = positive("dt", args.dt)? {
            case.avf.dt = dt;
        }
        match args.t_final {
            Some(t) if !(t >= 0.0 && t.is_finite()) => return Err(invalid("t-final", "must be non-negative")),
            Some(t) => case.t_final = t,
            None => {}
        }
        if let Some(tol) = positive("tol", args.tol)? {
            case.avf.tol = tol;
        }
        match args.max_iters {
            Some(0) => return Err(invalid("max-iters", "must be positive")),
            Some(m) => case.avf.max_iters = m,
            None => {}
        }
        case.pod = rule(args.pod_tol, args.pod_modes, case.pod, "pod")?;
        case.deim = rule(args.deim_tol, args.deim_modes, case.deim, "deim")?;
        let pair = |lo: Option<f64>, hi: Option<f64>, name: &str| -> Result<Option<(f64, f64)>, ConfigError> {
            match (lo, hi) {
                (None, None) => Ok(None),
                (Some(a), Some(b)) if a < b => Ok(Some((a, b))),
                (Some(_), Some(_)) => Err(invalid(name, "lower bound must be below upper bound")),
                _ => Err(invalid(name, "give both bounds")),
            }
        };
        let x_bounds = pair(args.x_min, args.x_max, "x-min/x-max")?;
        let y_bounds = pair(args.y_min, args.y_max, "y-min/y-max")?;
        if y_bounds.is_some() && !kind.is_2d() {
            return Err(invalid("y-min/y-max", format!("{kind} is one-dimensional")));
        }
        Ok(Self {
            case,
            x_bounds,
            y_bounds,
            out: args.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            seed: args.seed.unwrap_or(0),
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.case.kind()
    }

    pub fn avf(&self) -> &AvfConfig<f64> {
        &self.case.avf
    }

    pub fn model(&self) -> msrom_core::Result<ModelSpec<f64>> {
        if self.x_bounds.is_none() && self.y_bounds.is_none() {
            return self.case.model();
        }
        let reference = self.case.params.reference_grid(self.case.nx, self.case.ny)?;
        let x = self.x_bounds.unwrap_or(reference.x_bounds());
        let grid = match reference.y_bounds() {
            Some(y) => Grid::rect(x, self.y_bounds.unwrap_or(y), self.case.nx, self.case.ny)?,
            None => Grid::line(x.0, x.1, self.case.nx)?,
        };
        msrom_core::models::build_model(self.case.params, grid)
    }
}
