//! Run parameters merged from flags, the environment and an optional TOML
//! file. Flags win over `RTSVD_WORKERS`, which wins over the file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use rtsvd::{Iterations, Method, SketchConfig};

pub const WORKERS_ENV: &str = "RTSVD_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Tsvd,
    Rtsvd,
    #[value(name = "rtsvd-q")]
    #[serde(rename = "rtsvd-q")]
    RtsvdQ,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{WORKERS_ENV}={0:?} is not a positive integer")]
    Env(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Flags shared by every command.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// Truncation rank; comma-separated list where a command sweeps ranks.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Oversampling.
    #[arg(long)]
    pub p: Option<usize>,
    /// Subspace iterations. One value applies to every slice; for `decompose`
    /// a list gives per-slice counts, for `bench-error` a list is swept.
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    /// Target for the adaptive per-slice iteration rule (overrides --q).
    #[arg(long)]
    pub eps: Option<f64>,
    /// Failure probability for the tail bound.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for slice-parallel work.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Option<Vec<MethodArg>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file or directory, depending on the command.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Iteration cap for the adaptive rule.
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Divide mean-shifted pixels by their standard deviation.
    #[arg(long)]
    pub zscore: bool,
    /// Label file (one label per line) for tensor-file datasets.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// TOML file supplying defaults for any of the above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    k: Option<OneOrMany<usize>>,
    p: Option<usize>,
    q: Option<OneOrMany<usize>>,
    eps: Option<f64>,
    delta: Option<f64>,
    seed: Option<u64>,
    workers: Option<usize>,
    method: Option<OneOrMany<MethodArg>>,
    trials: Option<usize>,
    folds: Option<usize>,
    format: Option<Format>,
    out: Option<PathBuf>,
    q_max: Option<usize>,
    zscore: Option<bool>,
    labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub k: Vec<usize>,
    pub p: usize,
    pub q: Vec<usize>,
    pub eps: Option<f64>,
    pub delta: f64,
    pub seed: u64,
    pub workers: usize,
    pub methods: Vec<MethodArg>,
    pub trials: usize,
    pub folds: usize,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub q_max: usize,
    pub zscore: bool,
    pub labels: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: Vec::new(),
            p: 10,
            q: vec![0],
            eps: None,
            delta: 0.05,
            seed: 0,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            methods: vec![MethodArg::Tsvd, MethodArg::Rtsvd, MethodArg::RtsvdQ],
            trials: 20,
            folds: 10,
            format: Format::Csv,
            out: None,
            q_max: 50,
            zscore: false,
            labels: None,
        }
    }
}

fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

impl RunConfig {
    /// Merge flags, `env_workers` (the value of [`WORKERS_ENV`], if set) and
    /// the config file named by `--config`.
    pub fn resolve(args: &CommonArgs, env_workers: Option<&str>) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let env = env_workers
            .map(|s| s.trim().parse::<usize>().ok().filter(|&w| w > 0).ok_or_else(|| ConfigError::Env(s.into())))
            .transpose()?;
        let d = RunConfig::default();
        let cfg = RunConfig {
            k: args.k.clone().or(file.k.map(Into::into)).unwrap_or(d.k),
            p: args.p.or(file.p).unwrap_or(d.p),
            q: args.q.clone().or(file.q.map(Into::into)).unwrap_or(d.q),
            eps: args.eps.or(file.eps),
            delta: args.delta.or(file.delta).unwrap_or(d.delta),
            seed: args.seed.or(file.seed).unwrap_or(d.seed),
            workers: args.workers.or(env).or(file.workers).unwrap_or(d.workers),
            methods: args.method.clone().or(file.method.map(Into::into)).unwrap_or(d.methods),
            trials: args.trials.or(file.trials).unwrap_or(d.trials),
            folds: args.folds.or(file.folds).unwrap_or(d.folds),
            format: args.format.or(file.format).unwrap_or(d.format),
            out: args.out.clone().or(file.out),
            q_max: args.q_max.or(file.q_max).unwrap_or(d.q_max),
            zscore: args.zscore || file.zscore.unwrap_or(false),
            labels: args.labels.clone().or(file.labels),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`RunConfig::resolve`], reading the worker override from the
    /// process environment.
    pub fn from_env(args: &CommonArgs) -> Result<Self, ConfigError> {
        let env = std::env::var(WORKERS_ENV).ok();
        Self::resolve(args, env.as_deref())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.k.contains(&0) {
            return bad("k must be positive".into());
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return bad(format!("eps = {eps} is outside (0, 1)"));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} is outside (0, 1)", self.delta));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.folds < 2 {
            return bad("folds must be at least 2".into());
        }
        if self.q.is_empty() || self.methods.is_empty() {
            return bad("q and method lists must not be empty".into());
        }
        Ok(())
    }

    pub fn single_k(&self) -> Result<usize, ConfigError> {
        match self.k.as_slice() {
            [k] => Ok(*k),
            [] => Err(ConfigError::Invalid("--k is required".into())),
            _ => Err(ConfigError::Invalid("this command takes a single --k".into())),
        }
    }

    /// Iteration schedule for `rtsvd-q`: adaptive when `eps` is set, else
    /// uniform or per-slice from `q`.
    pub fn iterations(&self) -> Iterations {
        match (self.eps, self.q.as_slice()) {
            (Some(_), _) => Iterations::Adaptive,
            (None, [q]) => Iterations::Uniform(*q),
            (None, qs) => Iterations::PerSlice(qs.to_vec()),
        }
    }

    pub fn sketch(&self, k: usize) -> SketchConfig {
        SketchConfig {
            q: self.iterations(),
            eps: self.eps,
            seed: self.seed,
            q_max: self.q_max,
            delta: self.delta,
            ..SketchConfig::new(k, self.p)
        }
    }

    pub fn method(&self, m: MethodArg) -> Method {
        match m {
            MethodArg::Tsvd => Method::Tsvd,
            MethodArg::Rtsvd => Method::Rtsvd,
            MethodArg::RtsvdQ => Method::RtsvdSubspace(self.iterations()),
        }
    }
}
