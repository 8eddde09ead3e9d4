use crate::config::{ConfigError, RunConfig};
use std::fmt::Write as _;
use std::io::Write as _;
use zerocorr::asymptotics::{
    compute_curve, dn_constant, fit_constant, fmt17, linear_grid, parallelotope_moment, short_range_constant,
    universality_gap_with,
};
use zerocorr::empirical::{
    pair_correlation_estimate, projective_to_affine, sample_gaf_roots, sample_kostlan_roots, sample_many, PairDomain,
};
use zerocorr::ensembles::EnsembleKind;
use zerocorr::kacrice::density_closed;
use zerocorr::mc::{density_mc_with, parallelotope_moment_mc};
use zerocorr::validate::{self, Options};
use zerocorr::Error;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(Error),
    Validation(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(Error::InvalidEnsemble(_) | Error::Domain(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numerical(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

/// Version and timestamp lines followed by the full config.
fn metadata(cfg: &RunConfig) -> Vec<(String, String)> {
    let mut m = vec![
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("timestamp".to_string(), timestamp()),
    ];
    m.extend(cfg.metadata());
    m
}

fn table(meta: &[(String, String)], header: &str, rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn emit(cfg: &RunConfig, text: &str) -> Result<()> {
    if cfg.output.as_os_str() == "-" {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        std::fs::write(&cfg.output, text)?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    cfg.check()?;
    match cfg.command.as_str() {
        "curve" => curve(cfg),
        "constants" => constants(cfg),
        "density" => density(cfg),
        "parabola" => parabola(cfg),
        "universality" => universality(cfg),
        "parallelotope" => parallelotope(cfg),
        "empirical" => empirical(cfg),
        "validate" => run_validate(cfg),
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}

fn curve(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind()?;
    let mut c = compute_curve(&kind, &cfg.grid(), cfg.budget(), cfg.estimator)?;
    if cfg.smooth > 0 {
        c.smooth(cfg.smooth);
    }
    emit(cfg, &c.to_csv(&metadata(cfg)))
}

fn constants(cfg: &RunConfig) -> Result<()> {
    let n = cfg.n;
    let a = short_range_constant(n, cfg.d)?;
    let (rho, dn) = match cfg.d {
        Some(d) => (density_closed(&EnsembleKind::KostlanAffine { n, d })?, Some(dn_constant(n, d)?)),
        None => (density_closed(&EnsembleKind::IsomGaf { n })?, None),
    };
    let row = vec![n.to_string(), cfg.d.map(|d| d.to_string()).unwrap_or_default(), fmt17(a), fmt17(rho), opt(dn)];
    emit(cfg, &table(&metadata(cfg), "n,d,A,rho,D_n", &[row]))
}

fn density(cfg: &RunConfig) -> Result<()> {
    let kind = cfg.kind()?;
    let est = density_mc_with(&kind, cfg.budget())?;
    let closed = match density_closed(&kind) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let row = vec![kind.label(), fmt17(est.mean), fmt17(est.stderr), opt(closed), est.n_samples.to_string()];
    emit(cfg, &table(&metadata(cfg), "ensemble,rho_mc,stderr,rho_closed,n_samples", &[row]))
}

fn parabola(cfg: &RunConfig) -> Result<()> {
    let ts = linear_grid(cfg.fit_min, cfg.fit_max, cfg.fit_steps);
    let base = std::f64::consts::PI / (2.0 * 3f64.sqrt());
    let mut rows = Vec::new();
    for &b in &cfg.b_list {
        let curve = compute_curve(&EnsembleKind::ParabolaDeg3 { b }, &ts, cfg.budget(), cfg.estimator)?;
        let fit = fit_constant(&curve, cfg.fit_min, cfg.fit_max, 1.0)?;
        rows.push(vec![b.to_string(), fmt17(fit.constant), fmt17(fit.stderr), fmt17(base * (1.0 + b * b))]);
    }
    emit(cfg, &table(&metadata(cfg), "b,constant,stderr,expected", &rows))
}

fn universality(cfg: &RunConfig) -> Result<()> {
    let psi = cfg.pullback_spec()?;
    let mut rows = Vec::new();
    for &d in &cfg.d_list {
        let g = universality_gap_with(d, &psi, cfg.t, cfg.budget())?;
        rows.push(vec![
            d.to_string(),
            fmt17(g.gap.mean),
            fmt17(g.gap.stderr),
            fmt17(g.pullback.mean),
            fmt17(g.isom.mean),
        ]);
    }
    emit(cfg, &table(&metadata(cfg), "d,gap,stderr,K_pullback,K_isom", &rows))
}

fn parallelotope(cfg: &RunConfig) -> Result<()> {
    let mut rows = Vec::new();
    for n in 1..=cfg.n {
        for k in 0..=cfg.max_moment {
            let est = parallelotope_moment_mc(n, k, cfg.samples, cfg.seed)?;
            rows.push(vec![
                n.to_string(),
                k.to_string(),
                fmt17(est.mean),
                fmt17(est.stderr),
                fmt17(parallelotope_moment(n, k)?),
            ]);
        }
    }
    emit(cfg, &table(&metadata(cfg), "n,k,mc,stderr,closed", &rows))
}

fn empirical(cfg: &RunConfig) -> Result<()> {
    if cfg.bins == 0 || !(cfg.r_max > 0.0) {
        return Err(CliError::Config("need bins > 0 and r_max > 0".into()));
    }
    let (samples, domain) = match cfg.ensemble.as_str() {
        "kostlan" => {
            let d = cfg.d.ok_or_else(|| CliError::Config("kostlan needs a degree d".into()))?;
            (sample_many(cfg.replicates, cfg.seed, |s| sample_kostlan_roots(d, s))?, PairDomain::Projective)
        }
        "isom" => {
            let hw = cfg.half_width;
            let s = sample_many(cfg.replicates, cfg.seed, |s| sample_gaf_roots(cfg.truncation, hw, s))?;
            (s, PairDomain::Window { half_width: hw })
        }
        other => return Err(CliError::Config(format!("empirical sampling supports kostlan and isom, not '{other}'"))),
    };
    if let Some(w) = samples.iter().flat_map(|s| &s.warnings).next() {
        eprintln!("warning: {w}");
    }
    let edges = linear_grid(0.0, cfg.r_max, cfg.bins + 1);
    let h = pair_correlation_estimate(&samples, domain, &edges)?;
    let mean_roots = samples.iter().map(|s| s.roots.len() as f64).sum::<f64>() / samples.len() as f64;
    let mut meta = metadata(cfg);
    meta.push(("mean_roots".into(), fmt17(mean_roots)));
    meta.push(("intensity".into(), fmt17(h.intensity)));
    let rows: Vec<Vec<String>> = h
        .centers()
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let t = if domain == PairDomain::Projective { projective_to_affine(c) } else { c };
            vec![
                fmt17(edges[i]),
                fmt17(edges[i + 1]),
                fmt17(t),
                h.counts[i].to_string(),
                fmt17(h.k_hat[i]),
                fmt17(h.stderr[i]),
            ]
        })
        .collect();
    emit(cfg, &table(&meta, "lo,hi,t,count,K,stderr", &rows))
}

fn run_validate(cfg: &RunConfig) -> Result<()> {
    let opts = Options { convention: cfg.omega_convention, cases: cfg.cases, samples: cfg.samples, seed: cfg.seed };
    let report = validate::run(cfg.level, &opts);
    let text = format!("{report}\n");
    emit(cfg, &text)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} check(s) failed", report.failures())))
    }
}

/// Run under the configured thread count.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let threads = cfg.effective_threads()?;
    if threads == 0 {
        return dispatch(cfg);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cfg))
}

