//! Invariant suites behind `zerocorr validate`.
//!
//! The fast suite checks closed-form identities only. The full suite adds the
//! Monte Carlo criteria. Each check reports a single pass/fail line.

use crate::asymptotics::{
    fit_constant, fit_power_law, linear_grid, parallelotope_moment, short_range_constant, universality_gap_with,
    compute_curve,
};
use crate::empirical::sample_kostlan_roots;
use crate::ensembles::{EnsembleKind, PullbackSpec};
use crate::kacrice::{
    assemble_pair_covariance, check_positive_definite, dense_reference_with, det_closed, diagonalizer, gaussian_factor,
    omega, prefactor_identity_check, spectrum, density_closed, IndexConvention,
};
use crate::mc::{
    correlation_mc_with, density_mc_with, gaussian_correlation_pair, parallelotope_moment_mc, perturbation_gap,
    Budget, Estimator,
};
use crate::rng::substream;
use crate::Result;
use rand::Rng;
use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

impl std::str::FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(format!("unknown validation level `{other}` (fast | full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Ω deletion convention fed to the dense route. `ZeroBased` must make
    /// the suite fail.
    pub convention: IndexConvention,
    pub cases: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options { convention: IndexConvention::OneBased, cases: 200, samples: 1_000_000, seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {} ({:.1}s)", self.name, self.detail, self.elapsed.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(f, "{} of {} checks passed", self.checks.len() - self.failures(), self.checks.len())
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name: name.into(), passed, detail, elapsed: start.elapsed() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn run(level: Level, opts: &Options) -> Report {
    let mut report = Report { checks: fast_checks(opts) };
    if level == Level::Full {
        for id in 1..=10 {
            if id != 8 {
                report.checks.push(criterion(id, opts));
            }
        }
    }
    report
}

fn fast_checks(opts: &Options) -> Vec<Check> {
    vec![
        timed("structural identities", || structural(opts)),
        timed("small-separation limits", small_t_limits),
        timed("theorem constants", constants),
        timed("parallelotope spot values", parallelotope_spots),
    ]
}

fn random_kind(rng: &mut impl Rng) -> EnsembleKind {
    match rng.random_range(0..4) {
        0 => EnsembleKind::KostlanAffine { n: rng.random_range(1..=3), d: rng.random_range(3..=12) },
        1 => EnsembleKind::IsomGaf { n: rng.random_range(1..=3) },
        2 => EnsembleKind::NormalizedG { n: rng.random_range(1..=3) },
        _ => EnsembleKind::ParabolaDeg3 { b: rng.random_range(-2.0..2.0) },
    }
}

/// Closed-form determinant, Ω, diagonalisation and prefactor identity
/// against dense references on randomised (ensemble, t) cases.
fn structural(opts: &Options) -> Result<(bool, String)> {
    let mut rng = substream(opts.seed, 8);
    let mut worst = [0.0f64; 4];
    for _ in 0..opts.cases {
        let kind = random_kind(&mut rng);
        let t = rng.random_range(0.05..4.0);
        let n = kind.dim();
        let e = kind.pair_entries(t)?;
        let pc = assemble_pair_covariance(&e, n)?;
        check_positive_definite(&pc).map_err(|err| err.at_t(t))?;
        let reference = dense_reference_with(&kind, t, opts.convention)?;
        worst[0] = worst[0].max(rel(det_closed(&e, n), reference.det));

        let closed = omega(&pc)?;
        let scale = closed.matrix.max_abs();
        let size = 2 * n * n;
        for i in 0..size {
            for j in 0..size {
                worst[1] = worst[1].max((closed.matrix[(i, j)] - reference.omega.matrix[(i, j)]).abs() / scale);
            }
        }

        let qp = diagonalizer(n);
        let lam = qp.transpose().mul(&closed.matrix).mul(&qp);
        let diag = spectrum(&e, n)?.diagonal();
        for i in 0..size {
            for j in 0..size {
                let want = if i == j { diag[i] } else { 0.0 };
                worst[2] = worst[2].max((lam[(i, j)] - want).abs() / scale);
            }
        }
        let (l, r) = prefactor_identity_check(&e, n)?;
        worst[3] = worst[3].max(rel(l, r));
    }
    let ok = worst[0] < 1e-9 && worst[1] < 1e-10 && worst[2] <= 1e-10 && worst[3] < 1e-10;
    Ok((
        ok,
        format!(
            "{} cases; det {:.1e}, Ω {:.1e}, diagonalisation {:.1e}, prefactor {:.1e}",
            opts.cases, worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn small_t_limits() -> Result<(bool, String)> {
    let t = 1e-3;
    let mut worst: f64 = 0.0;
    for d in [3u32, 5, 8] {
        let df = d as f64;
        let s = spectrum(&EnsembleKind::KostlanAffine { n: 2, d }.pair_entries(t)?, 2)?;
        let pairs = [
            (s.lambda1.unwrap_or(f64::NAN).powf(-0.5) / t, (df * (df - 1.0) / 2.0).sqrt()),
            (s.lambda2.unwrap_or(f64::NAN).powf(-0.5), (2.0 * df).sqrt()),
            (s.lambda3.powf(-0.5) / t, (df * (df - 1.0)).sqrt()),
            (s.lambda4.powf(-0.5) / (t * t), (df * (df - 1.0) * (df - 2.0) / 12.0).sqrt()),
        ];
        for (a, b) in pairs {
            worst = worst.max(rel(a, b));
        }
    }
    let s = spectrum(&EnsembleKind::IsomGaf { n: 2 }.pair_entries(t)?, 2)?;
    let pairs = [
        (s.lambda1.unwrap_or(f64::NAN).powf(-0.5) / t, 0.5f64.sqrt()),
        (s.lambda2.unwrap_or(f64::NAN).powf(-0.5), 2f64.sqrt()),
        (s.lambda3.powf(-0.5) / t, 1.0),
        (s.lambda4.powf(-0.5) / (t * t), 12f64.sqrt().recip()),
    ];
    for (a, b) in pairs {
        worst = worst.max(rel(a, b));
    }
    Ok((worst < 1e-4, format!("max relative deviation {worst:.2e} at t = 1e-3")))
}

fn constants() -> Result<(bool, String)> {
    let checks = [
        (short_range_constant(1, None)?, PI / 4.0),
        (short_range_constant(2, None)?, 1.0),
        (short_range_constant(3, None)?, 3.0 * PI / 8.0),
        (short_range_constant(1, Some(3))?, PI / (2.0 * 3f64.sqrt())),
        (density_closed(&EnsembleKind::IsomGaf { n: 2 })?, 1.0 / (2.0 * PI)),
        (density_closed(&EnsembleKind::IsomGaf { n: 1 })?, 1.0 / PI),
    ];
    let worst = checks.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max relative deviation {worst:.1e}")))
}

fn parallelotope_spots() -> Result<(bool, String)> {
    let checks = [
        (parallelotope_moment(2, 1)?, 2.0 / PI),
        (parallelotope_moment(2, 2)?, 0.5),
        (parallelotope_moment(3, 2)?, 2.0 / 9.0),
    ];
    let worst = checks.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max);
    Ok((worst < 1e-12, format!("max relative deviation {worst:.1e}")))
}

/// One acceptance criterion, numbered 1 to 10.
pub fn criterion(id: u32, opts: &Options) -> Check {
    let name = format!("criterion {id}");
    match id {
        1 => timed(&name, || short_range(opts)),
        2 => timed(&name, || finite_degree(opts)),
        3 => timed(&name, || curvature(opts)),
        4 => timed(&name, || long_range(opts)),
        5 => timed(&name, || densities(opts)),
        6 => timed(&name, || universality(opts)),
        7 => timed(&name, || parallelotope(opts)),
        8 => timed(&name, || structural(opts)),
        9 => timed(&name, || cross_agreement(opts)),
        10 => timed(&name, || perturbation(opts)),
        _ => Check { name, passed: false, detail: "no such criterion".into(), elapsed: Duration::ZERO },
    }
}

fn budget(opts: &Options) -> Budget {
    Budget::new(opts.samples, opts.seed)
}

fn short_range(opts: &Options) -> Result<(bool, String)> {
    let ts = linear_grid(0.05, 0.3, 11);
    let curve = |n| compute_curve(&EnsembleKind::IsomGaf { n }, &ts, budget(opts), Estimator::Spherical);
    let c1 = fit_constant(&curve(1)?, 0.05, 0.3, 1.0)?;
    let k2 = correlation_mc_with(&EnsembleKind::IsomGaf { n: 2 }, 0.05, budget(opts), Estimator::Spherical)?;
    let c3 = curve(3)?;
    let free = fit_power_law(&c3, 0.05, 0.3)?;
    let pinned = fit_constant(&c3, 0.05, 0.3, -1.0)?;
    let ok = rel(c1.constant, PI / 4.0) <= 0.10
        && (k2.mean - 1.0).abs() <= 0.02
        && (free.exponent + 1.0).abs() <= 0.1
        && rel(pinned.constant, 3.0 * PI / 8.0) <= 0.10;
    Ok((
        ok,
        format!(
            "n=1 constant {:.4}; n=2 K(0.05) {:.4}; n=3 exponent {:.3}, constant {:.4}",
            c1.constant, k2.mean, free.exponent, pinned.constant
        ),
    ))
}

fn small_t_constant(kind: &EnsembleKind, opts: &Options) -> Result<crate::asymptotics::ConstantFit> {
    let ts = linear_grid(0.01, 0.05, 9);
    fit_constant(&compute_curve(kind, &ts, budget(opts), Estimator::Spherical)?, 0.01, 0.05, 1.0)
}

fn finite_degree(opts: &Options) -> Result<(bool, String)> {
    let k = small_t_constant(&EnsembleKind::KostlanAffine { n: 1, d: 3 }, opts)?;
    let p = small_t_constant(&EnsembleKind::ParabolaDeg3 { b: 0.0 }, opts)?;
    let want = PI / (2.0 * 3f64.sqrt());
    let combined = k.stderr.hypot(p.stderr);
    let ok = rel(k.constant, want) <= 0.05 && (k.constant - p.constant).abs() <= combined;
    Ok((ok, format!("Kostlan d=3 {:.4} ± {:.4}; parabola b=0 {:.4} ± {:.4}", k.constant, k.stderr, p.constant, p.stderr)))
}

fn curvature(opts: &Options) -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [0.0, 1.0, 2.0] {
        let fit = small_t_constant(&EnsembleKind::ParabolaDeg3 { b }, opts)?;
        let want = PI / (2.0 * 3f64.sqrt()) * (1.0 + b * b);
        ok &= rel(fit.constant, want) <= 0.05;
        parts.push(format!("b={b}: {:.4} vs {want:.4}", fit.constant));
    }
    Ok((ok, parts.join("; ")))
}

fn long_range(opts: &Options) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for n in 1..=3 {
        for t in [4.0, 5.0] {
            let k = correlation_mc_with(&EnsembleKind::IsomGaf { n }, t, budget(opts), Estimator::Spherical)?;
            let dev = (k.mean - 1.0).abs();
            ok &= dev <= (3.0 * k.stderr).max(1e-2);
            worst = worst.max(dev);
        }
    }
    Ok((ok, format!("max |K − 1| = {worst:.4}")))
}

fn densities(opts: &Options) -> Result<(bool, String)> {
    let kinds = [
        EnsembleKind::IsomGaf { n: 1 },
        EnsembleKind::IsomGaf { n: 2 },
        EnsembleKind::IsomGaf { n: 3 },
        EnsembleKind::KostlanAffine { n: 1, d: 9 },
        EnsembleKind::KostlanAffine { n: 2, d: 4 },
    ];
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for kind in &kinds {
        let est = density_mc_with(kind, budget(opts))?;
        let z = (est.mean - density_closed(kind)?).abs() / est.stderr;
        ok &= z <= 3.0;
        worst = worst.max(z);
    }
    let mut counts = Vec::new();
    for d in [4u32, 25, 100] {
        let c: Vec<f64> = crate::empirical::sample_many(2000, opts.seed, |s| sample_kostlan_roots(d, s))?
            .iter()
            .map(|s| s.roots.len() as f64)
            .collect();
        let m = c.len() as f64;
        let mean = c.iter().sum::<f64>() / m;
        let se = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        ok &= (mean - (d as f64).sqrt()).abs() <= 3.0 * se;
        counts.push(format!("d={d}: {mean:.3} ± {se:.3}"));
    }
    Ok((ok, format!("density max z {worst:.2}; root counts {}", counts.join(", "))))
}

/// Log-log least-squares slope.
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn universality(opts: &Options) -> Result<(bool, String)> {
    let ds = [16u32, 64, 256];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, psi) in [("ψ=0", PullbackSpec::zero(1, 1)), ("ψ=x²", PullbackSpec::quadratic(1.0))] {
        let mut gaps = Vec::new();
        for &d in &ds {
            gaps.push(universality_gap_with(d, &psi, 1.0, budget(opts))?.gap.mean);
        }
        let slope = loglog_slope(&ds.map(f64::from), &gaps);
        ok &= gaps.windows(2).all(|w| w[1] < w[0]) && (slope + 0.5).abs() <= 0.3;
        parts.push(format!("{label}: slope {slope:.3}"));
    }
    Ok((ok, parts.join("; ")))
}

fn parallelotope(opts: &Options) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for k in 0..=3 {
            let est = parallelotope_moment_mc(n, k, opts.samples, opts.seed)?;
            let exact = parallelotope_moment(n, k)?;
            let dev = (est.mean - exact).abs();
            let z = if est.stderr > 0.0 { dev / est.stderr } else if dev < 1e-12 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    let (spots, detail) = parallelotope_spots()?;
    Ok((worst <= 3.0 && spots, format!("max z {worst:.2}; spot values {detail}")))
}

fn cross_agreement(opts: &Options) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let isom = EnsembleKind::IsomGaf { n };
            let s = correlation_mc_with(&isom, t, budget(opts), Estimator::Spherical)?;
            let g = correlation_mc_with(&isom, t, budget(opts).with_chunks(opts.seed as usize % 7 + 32), Estimator::Gaussian)?;
            worst = worst.max((s.mean - g.mean).abs() / s.stderr.hypot(g.stderr));
            let fi = gaussian_factor(&isom, t)?;
            let fg = gaussian_factor(&EnsembleKind::NormalizedG { n }, t)?;
            let [a, b, _] = gaussian_correlation_pair(&fi, &fg, Budget::new(opts.samples, opts.seed ^ 0x5a5a))?;
            worst = worst.max((a.mean - b.mean).abs() / a.stderr.hypot(b.stderr));
        }
    }
    Ok((worst <= 3.0, format!("12 grid points, max z {worst:.2}")))
}

/// Symmetric perturbation direction with unit sup norm.
fn perturbation_direction(size: usize) -> crate::dense::Matrix {
    crate::dense::Matrix::from_fn(size, |i, j| if i == j { 1.0 } else if i.abs_diff(j) == 1 { 0.5 } else { 0.0 })
}

fn perturbation(opts: &Options) -> Result<(bool, String)> {
    let n = 1;
    let a = omega(&crate::kacrice::pair_covariance(&EnsembleKind::IsomGaf { n }, 1.0)?)?.matrix;
    let dir = perturbation_direction(2 * n * n);
    let eps = [1e-2, 1e-3, 1e-4];
    let mut gaps = Vec::new();
    for &e in &eps {
        let b = crate::dense::Matrix::from_fn(a.dim(), |i, j| a[(i, j)] + e * dir[(i, j)]);
        gaps.push(perturbation_gap(n, &a, &b, opts.samples, opts.seed)?.mean);
    }
    let slope = loglog_slope(&eps, &gaps);
    Ok((slope <= 0.7, format!("fitted exponent {slope:.3}")))
}
