//! Run configuration: defaults, a flat `key = value` file format, flag
//! overrides and round-tripping through output metadata.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use zerocorr::ensembles::{EnsembleKind, PullbackSpec};
use zerocorr::kacrice::IndexConvention;
use zerocorr::mc::{Budget, Estimator};
use zerocorr::validate::Level;

/// Metadata lines carrying the config use this key prefix.
pub const META_PREFIX: &str = "config.";
pub const THREADS_ENV: &str = "ZEROCORR_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub ensemble: String,
    pub n: usize,
    /// Kostlan degree; absent means the scaling limit where that applies.
    pub d: Option<u32>,
    /// Ambient dimension for the pull-back ensemble.
    pub k: usize,
    pub b: f64,
    pub b_list: Vec<f64>,
    pub psi: String,
    pub t_min: f64,
    pub t_max: f64,
    pub steps: usize,
    pub t: f64,
    pub d_list: Vec<u32>,
    pub fit_min: f64,
    pub fit_max: f64,
    pub fit_steps: usize,
    pub samples: u64,
    pub seed: u64,
    pub chunks: usize,
    pub estimator: Estimator,
    /// Moving-average window; 0 disables smoothing.
    pub smooth: usize,
    pub max_moment: u32,
    pub truncation: u32,
    pub half_width: f64,
    pub replicates: usize,
    pub bins: usize,
    pub r_max: f64,
    pub level: Level,
    pub omega_convention: IndexConvention,
    pub cases: usize,
    /// `-` writes to stdout.
    pub output: PathBuf,
    /// 0 means the rayon default (or the environment variable).
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: "curve".into(),
            ensemble: "isom".into(),
            n: 1,
            d: None,
            k: 2,
            b: 0.0,
            b_list: vec![0.0, 1.0, 2.0],
            psi: "1:2".into(),
            t_min: 0.02,
            t_max: 4.0,
            steps: 200,
            t: 1.0,
            d_list: vec![16, 64, 256],
            fit_min: 0.01,
            fit_max: 0.05,
            fit_steps: 9,
            samples: 1_000_000,
            seed: 42,
            chunks: zerocorr::rng::DEFAULT_CHUNK_COUNT,
            estimator: Estimator::Spherical,
            smooth: 15,
            max_moment: 3,
            truncation: 80,
            half_width: 3.0,
            replicates: 2000,
            bins: 20,
            r_max: 1.0,
            level: Level::Fast,
            omega_convention: IndexConvention::OneBased,
            cases: 200,
            output: PathBuf::from("-"),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e| ConfigError(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: Display,
{
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse(key, s)).collect()
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn convention_str(c: IndexConvention) -> &'static str {
    match c {
        IndexConvention::OneBased => "one-based",
        IndexConvention::ZeroBased => "zero-based",
    }
}

fn level_str(l: Level) -> &'static str {
    match l {
        Level::Fast => "fast",
        Level::Full => "full",
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "command" => self.command = v.into(),
            "ensemble" => self.ensemble = v.into(),
            "n" => self.n = parse(key, v)?,
            "d" => self.d = if v.is_empty() { None } else { Some(parse(key, v)?) },
            "k" => self.k = parse(key, v)?,
            "b" => self.b = parse(key, v)?,
            "b_list" => self.b_list = parse_list(key, v)?,
            "psi" => self.psi = v.into(),
            "t_min" => self.t_min = parse(key, v)?,
            "t_max" => self.t_max = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "t" => self.t = parse(key, v)?,
            "d_list" => self.d_list = parse_list(key, v)?,
            "fit_min" => self.fit_min = parse(key, v)?,
            "fit_max" => self.fit_max = parse(key, v)?,
            "fit_steps" => self.fit_steps = parse(key, v)?,
            "samples" => self.samples = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "chunks" => self.chunks = parse(key, v)?,
            "estimator" => self.estimator = parse(key, v)?,
            "smooth" => self.smooth = parse(key, v)?,
            "max_moment" => self.max_moment = parse(key, v)?,
            "truncation" => self.truncation = parse(key, v)?,
            "half_width" => self.half_width = parse(key, v)?,
            "replicates" => self.replicates = parse(key, v)?,
            "bins" => self.bins = parse(key, v)?,
            "r_max" => self.r_max = parse(key, v)?,
            "level" => self.level = v.parse().map_err(ConfigError)?,
            "omega_convention" => {
                self.omega_convention = match v {
                    "one-based" => IndexConvention::OneBased,
                    "zero-based" => IndexConvention::ZeroBased,
                    other => return Err(ConfigError(format!("omega_convention: unknown value '{other}'"))),
                }
            }
            "cases" => self.cases = parse(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "threads" => self.threads = parse(key, v)?,
            other => return Err(ConfigError(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// All keys with their current values, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("command", self.command.clone()),
            ("ensemble", self.ensemble.clone()),
            ("n", self.n.to_string()),
            ("d", self.d.map(|d| d.to_string()).unwrap_or_default()),
            ("k", self.k.to_string()),
            ("b", self.b.to_string()),
            ("b_list", join(&self.b_list)),
            ("psi", self.psi.clone()),
            ("t_min", self.t_min.to_string()),
            ("t_max", self.t_max.to_string()),
            ("steps", self.steps.to_string()),
            ("t", self.t.to_string()),
            ("d_list", join(&self.d_list)),
            ("fit_min", self.fit_min.to_string()),
            ("fit_max", self.fit_max.to_string()),
            ("fit_steps", self.fit_steps.to_string()),
            ("samples", self.samples.to_string()),
            ("seed", self.seed.to_string()),
            ("chunks", self.chunks.to_string()),
            ("estimator", self.estimator.as_str().into()),
            ("smooth", self.smooth.to_string()),
            ("max_moment", self.max_moment.to_string()),
            ("truncation", self.truncation.to_string()),
            ("half_width", self.half_width.to_string()),
            ("replicates", self.replicates.to_string()),
            ("bins", self.bins.to_string()),
            ("r_max", self.r_max.to_string()),
            ("level", level_str(self.level).into()),
            ("omega_convention", convention_str(self.omega_convention).into()),
            ("cases", self.cases.to_string()),
            ("output", self.output.display().to_string()),
            ("threads", self.threads.to_string()),
        ]
    }

    /// Apply a flat `key = value` file. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v).map_err(|e| ConfigError(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Metadata pairs for output files.
    pub fn metadata(&self) -> Vec<(String, String)> {
        self.entries().into_iter().map(|(k, v)| (format!("{META_PREFIX}{k}"), v)).collect()
    }

    /// Rebuild a config from parsed `# key = value` metadata.
    pub fn from_metadata(meta: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut c = RunConfig::default();
        for (k, v) in meta {
            if let Some(key) = k.strip_prefix(META_PREFIX) {
                c.set(key, v)?;
            }
        }
        Ok(c)
    }

    /// Parse the `#` metadata block at the top of an output file.
    pub fn from_output(text: &str) -> Result<Self, ConfigError> {
        let meta: Vec<(String, String)> = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self::from_metadata(&meta)
    }

    pub fn budget(&self) -> Budget {
        Budget::new(self.samples, self.seed).with_chunks(self.chunks)
    }

    pub fn grid(&self) -> Vec<f64> {
        zerocorr::asymptotics::linear_grid(self.t_min, self.t_max, self.steps)
    }

    pub fn pullback_spec(&self) -> Result<PullbackSpec, ConfigError> {
        PullbackSpec::parse(self.n, &self.psi).map_err(|e| ConfigError(format!("psi: {e}")))
    }

    pub fn kind(&self) -> Result<EnsembleKind, ConfigError> {
        let n = self.n;
        let d = || self.d.ok_or_else(|| ConfigError(format!("ensemble '{}' needs a degree d", self.ensemble)));
        let kind = match self.ensemble.as_str() {
            "kostlan" => EnsembleKind::KostlanAffine { n, d: d()? },
            "isom" => EnsembleKind::IsomGaf { n },
            "g" => EnsembleKind::NormalizedG { n },
            "parabola" => EnsembleKind::ParabolaDeg3 { b: self.b },
            "synthetic-identity" => EnsembleKind::SyntheticIdentity { n },
            "pullback" => {
                return EnsembleKind::pullback(self.k, n, d()?, self.pullback_spec()?).map_err(|e| ConfigError(e.to_string()))
            }
            other => return Err(ConfigError(format!("unknown ensemble '{other}'"))),
        };
        kind.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(kind)
    }

    /// Explicit setting, else the environment variable, else 0.
    pub fn effective_threads(&self) -> Result<usize, ConfigError> {
        if self.threads > 0 {
            return Ok(self.threads);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => parse(THREADS_ENV, &v),
            Err(_) => Ok(0),
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError(m.into()));
        if !(self.t_min > 0.0) || !(self.t_max > self.t_min) {
            return bad("need 0 < t_min < t_max");
        }
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if self.samples == 0 {
            return bad("samples must be positive");
        }
        if self.chunks == 0 {
            return bad("chunks must be positive");
        }
        if !(self.fit_min > 0.0) || !(self.fit_max > self.fit_min) {
            return bad("need 0 < fit_min < fit_max");
        }
        Ok(())
    }
}
