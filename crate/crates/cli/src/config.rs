use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use sle_lab::estimators::MomentMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Spectrum,
    Simulate,
    Moment,
    Qdiff,
    Boxdim,
    Audit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Simulate => "simulate",
            Command::Moment => "moment",
            Command::Qdiff => "qdiff",
            Command::Boxdim => "boxdim",
            Command::Audit => "audit",
        }
    }

    pub fn default_t_max(self) -> f64 {
        match self {
            Command::Audit => 1.0,
            _ => 50.0,
        }
    }

    fn uses_exponent(self) -> bool {
        matches!(
            self,
            Command::Spectrum | Command::Moment | Command::Qdiff | Command::Boxdim
        )
    }
}

/// Fully resolved run configuration; echoed verbatim into summary.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub kappa: f64,
    pub rho: f64,
    pub x: f64,
    pub x_r: f64,
    pub zeta: Option<f64>,
    pub beta: Option<f64>,
    pub dt: f64,
    pub ds: f64,
    pub s_max: f64,
    /// Horizon in capacity time; each command has its own default.
    pub t_max: Option<f64>,
    pub n_paths: usize,
    pub n_terms: usize,
    pub n_grid: usize,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub method: MomentMethod,
    /// Time of the qdiff density table.
    pub t: f64,
    /// Start point of the qdiff density table; defaults to (x − x_R)/x.
    pub x0: Option<f64>,
    pub n_min: u32,
    pub n_max: u32,
}

impl RunConfig {
    pub fn horizon(&self) -> f64 {
        self.t_max.unwrap_or_else(|| self.command.default_t_max())
    }

    fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            kappa: 2.0,
            rho: -1.5,
            x: 1.0,
            x_r: 0.0,
            zeta: None,
            beta: None,
            dt: 1e-4,
            ds: 1e-3,
            s_max: 8.0,
            t_max: None,
            n_paths: 1000,
            n_terms: 64,
            n_grid: 101,
            seed: 0,
            workers: 0,
            out_dir: PathBuf::from("out"),
            method: MomentMethod::Exact,
            t: 1.0,
            x0: None,
            n_min: 3,
            n_max: 7,
        }
    }
}

/// Command-line flags; every flag overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file, either a bare config or a previous summary.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_r: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub zeta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub n_terms: Option<usize>,
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Moment estimator: exact, tilted or direct.
    #[arg(long)]
    pub method: Option<MomentMethod>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub n_min: Option<u32>,
    #[arg(long)]
    pub n_max: Option<u32>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

fn read_file(path: &Path, command: Command) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get("config") {
        value = inner.clone();
    }
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ConfigError(format!("{}: expected a JSON object", path.display())))?;
    let mut base = serde_json::to_value(RunConfig::defaults(command)).expect("defaults serialize");
    let base_obj = base.as_object_mut().expect("object");
    for (k, v) in std::mem::take(obj) {
        if !base_obj.contains_key(&k) {
            return Err(ConfigError(format!("unknown config field `{k}`")));
        }
        base_obj.insert(k, v);
    }
    base_obj.insert(
        "command".into(),
        serde_json::to_value(command).expect("command serializes"),
    );
    serde_json::from_value(base).map_err(|e| ConfigError(format!("config field: {e}")))
}

pub fn resolve(command: Command, f: &Flags) -> Result<RunConfig, ConfigError> {
    let mut c = match &f.config {
        Some(p) => read_file(p, command)?,
        None => RunConfig::defaults(command),
    };
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = f.$field.clone() { c.$field = v; })*
        };
    }
    take!(
        kappa, rho, x, x_r, dt, ds, s_max, n_paths, n_terms, n_grid, seed, workers, out_dir,
        method, t, n_min, n_max
    );
    if f.zeta.is_some() || f.beta.is_some() {
        c.zeta = f.zeta;
        c.beta = f.beta;
    }
    if f.x0.is_some() {
        c.x0 = f.x0;
    }
    if f.t_max.is_some() {
        c.t_max = f.t_max;
    }
    validate(&c)?;
    Ok(c)
}

fn validate(c: &RunConfig) -> Result<(), ConfigError> {
    let bad = |field: &str, why: &str| Err(ConfigError(format!("{field}: {why}")));
    if c.zeta.is_some() && c.beta.is_some() {
        return bad("zeta/beta", "supply only one of the two");
    }
    if c.command.uses_exponent() && c.zeta.is_none() && c.beta.is_none() {
        return bad("zeta/beta", "this command needs one of the two");
    }
    for (field, v) in [
        ("dt", c.dt),
        ("ds", c.ds),
        ("t_max", c.t_max.unwrap_or(1.0)),
        ("t", c.t),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return bad(field, "must be positive");
        }
    }
    if !(c.s_max.is_finite() && c.s_max >= 0.0) {
        return bad("s_max", "must be nonnegative");
    }
    if c.n_paths == 0 {
        return bad("n_paths", "must be at least 1");
    }
    if c.n_terms == 0 {
        return bad("n_terms", "must be at least 1");
    }
    if c.n_grid == 0 {
        return bad("n_grid", "must be at least 1");
    }
    if c.n_min > c.n_max {
        return bad("n_min", "must not exceed n_max");
    }
    Ok(())
}
