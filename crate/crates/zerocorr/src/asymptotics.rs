//! Short-range constants, computed correlation curves and power-law fits.

use crate::ensembles::{EnsembleKind, PullbackSpec};
use crate::kacrice::gaussian_factor;
use crate::mc::{correlation_mc_with, gaussian_correlation_pair, Budget, Estimator, McEstimate};
use crate::specfun::{double_factorial, gamma, ln_gamma};
use crate::{Error, Result};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Short-range constant: A_n = √π Γ((n+2)/2) / (2Γ((n+1)/2)), and
/// A_{n,d} = (d−1)/d^{n/2} · A_n for the degree-d Kostlan ensemble.
pub fn short_range_constant(n: usize, d: Option<u32>) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let nf = n as f64;
    let a = PI.sqrt() * gamma((nf + 2.0) / 2.0)? / (2.0 * gamma((nf + 1.0) / 2.0)?);
    match d {
        None => Ok(a),
        Some(d) if d < 3 => Err(Error::Domain(format!("degree must be >= 3, got {d}"))),
        Some(d) => {
            let df = d as f64;
            Ok((df - 1.0) / df.powf(nf / 2.0) * a)
        }
    }
}

/// (π^{⌈n/2⌉} 2^{⌊n/2⌋} n!! / (2n)!!)ⁿ.
pub fn dn_angular_part(n: usize) -> Result<f64> {
    let nf = n as f64;
    let base = PI.powi(n.div_ceil(2) as i32) * 2f64.powi((n / 2) as i32) * double_factorial(n as i64)?
        / double_factorial(2 * n as i64)?;
    Ok(base.powf(nf))
}

/// Γ(n+1) π^{n²/2} / Γ((n+2)/2)ⁿ.
pub fn dn_determinant_part(n: usize) -> Result<f64> {
    let nf = n as f64;
    Ok((ln_gamma(nf + 1.0)? + nf * nf / 2.0 * PI.ln() - nf * ln_gamma((nf + 2.0) / 2.0)?).exp())
}

/// D_n = (dⁿ(d−1)/2) · angular part · determinant part.
pub fn dn_constant(n: usize, d: u32) -> Result<f64> {
    if n == 0 || d < 3 {
        return Err(Error::Domain(format!("need n >= 1 and d >= 3, got n = {n}, d = {d}")));
    }
    let df = d as f64;
    Ok(df.powi(n as i32) * (df - 1.0) / 2.0 * dn_angular_part(n)? * dn_determinant_part(n)?)
}

/// E[Vᵏ] = (Γ(n/2)/Γ((n+k)/2))^{n−1} ∏_{i=1}^{n−1} Γ((i+k)/2)/Γ(i/2).
pub fn parallelotope_moment(n: usize, k: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let mut ln = (nf - 1.0) * (ln_gamma(nf / 2.0)? - ln_gamma((nf + kf) / 2.0)?);
    for i in 1..n {
        let fi = i as f64;
        ln += ln_gamma((fi + kf) / 2.0)? - ln_gamma(fi / 2.0)?;
    }
    Ok(ln.exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub k: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    pub ensemble: String,
    pub estimator: Estimator,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    /// Moving-average of K, when smoothing was requested.
    pub smoothed: Option<Vec<f64>>,
}

/// Seed for the i-th point of a curve.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Evaluate K on a grid. Point i uses seed `seed + i`.
pub fn compute_curve(kind: &EnsembleKind, ts: &[f64], budget: Budget, estimator: Estimator) -> Result<CorrelationCurve> {
    let mut points = Vec::with_capacity(ts.len());
    for (i, &t) in ts.iter().enumerate() {
        let b = Budget { seed: point_seed(budget.seed, i), ..budget };
        let est = correlation_mc_with(kind, t, b, estimator)?;
        points.push(CurvePoint { t, k: est.mean, stderr: est.stderr, n_samples: est.n_samples });
    }
    let curve = CorrelationCurve { ensemble: kind.label(), estimator, seed: budget.seed, points, smoothed: None };
    curve.validate()?;
    Ok(curve)
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => vec![],
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}

impl CorrelationCurve {
    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Domain(format!("t values must increase: {} then {}", w[0].t, w[1].t)));
            }
        }
        if let Some(p) = self.points.iter().find(|p| !p.k.is_finite()) {
            return Err(Error::NonFinite(format!("K at t = {}", p.t)));
        }
        Ok(())
    }

    /// Centred moving average over `window` consecutive points; near the ends
    /// the window is shifted inward so every point averages `window` values
    /// (fewer only when the curve is shorter than the window).
    pub fn smooth(&mut self, window: usize) {
        let n = self.points.len();
        let w = window.max(1).min(n.max(1));
        let half = w / 2;
        let out = (0..n)
            .map(|i| {
                let start = i.saturating_sub(half).min(n - w);
                self.points[start..start + w].iter().map(|p| p.k).sum::<f64>() / w as f64
            })
            .collect();
        self.smoothed = Some(out);
    }

    pub fn to_csv(&self, metadata: &[(String, String)]) -> String {
        let mut s = String::new();
        for (k, v) in metadata {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "# ensemble = {}", self.ensemble);
        let _ = writeln!(s, "# estimator = {}", self.estimator.as_str());
        let _ = writeln!(s, "# seed = {}", self.seed);
        let _ = writeln!(s, "# smoothed = {}", self.smoothed.is_some());
        s.push_str("t,K,stderr,n_samples");
        if self.smoothed.is_some() {
            s.push_str(",K_smoothed");
        }
        s.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(s, "{},{},{},{}", fmt17(p.t), fmt17(p.k), fmt17(p.stderr), p.n_samples);
            if let Some(sm) = &self.smoothed {
                let _ = write!(s, ",{}", fmt17(sm[i]));
            }
            s.push('\n');
        }
        s
    }

    /// Parse CSV written by [`to_csv`](Self::to_csv). Returns the curve and
    /// every `# key = value` line in order.
    pub fn from_csv(text: &str) -> Result<(Self, Vec<(String, String)>)> {
        let mut meta = Vec::new();
        let mut rows = Vec::new();
        let mut header: Option<Vec<String>> = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if header.is_none() {
                header = Some(line.split(',').map(str::to_string).collect());
                continue;
            }
            rows.push(line.split(',').map(str::to_string).collect::<Vec<_>>());
        }
        let header = header.ok_or_else(|| Error::Domain("missing CSV header".into()))?;
        if header.len() < 4 || header[..4] != ["t", "K", "stderr", "n_samples"] {
            return Err(Error::Domain(format!("unexpected CSV header {header:?}")));
        }
        let with_smooth = header.get(4).map(String::as_str) == Some("K_smoothed");
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Domain(format!("bad number '{s}': {e}")));
        let mut points = Vec::new();
        let mut smoothed = Vec::new();
        for r in &rows {
            if r.len() < header.len() {
                return Err(Error::Domain(format!("short CSV row {r:?}")));
            }
            points.push(CurvePoint {
                t: num(&r[0])?,
                k: num(&r[1])?,
                stderr: num(&r[2])?,
                n_samples: r[3].parse().map_err(|e| Error::Domain(format!("bad count '{}': {e}", r[3])))?,
            });
            if with_smooth {
                smoothed.push(num(&r[4])?);
            }
        }
        let get = |key: &str| meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone());
        let curve = CorrelationCurve {
            ensemble: get("ensemble").unwrap_or_default(),
            estimator: get("estimator").map(|s| s.parse()).transpose()?.unwrap_or(Estimator::Spherical),
            seed: get("seed").map(|s| s.parse().map_err(|e| Error::Domain(format!("bad seed: {e}")))).transpose()?.unwrap_or(0),
            points,
            smoothed: with_smooth.then_some(smoothed),
        };
        Ok((curve, meta))
    }

    fn window(&self, lo: f64, hi: f64) -> Result<Vec<CurvePoint>> {
        let pts: Vec<CurvePoint> = self.points.iter().copied().filter(|p| p.t >= lo && p.t <= hi).collect();
        if pts.len() < 5 {
            return Err(Error::InsufficientPoints { needed: 5, got: pts.len() });
        }
        if let Some(p) = pts.iter().find(|p| !(p.k > 0.0)) {
            return Err(Error::NonPositive { t: p.t, value: p.k });
        }
        Ok(pts)
    }
}

/// Shortest round-tripping form with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub points: usize,
    pub exponent_stderr: f64,
    /// Standard error of ln(constant).
    pub log_constant_stderr: f64,
}

fn weights(pts: &[CurvePoint]) -> Vec<f64> {
    let w: Vec<f64> = pts.iter().map(|p| (p.k / p.stderr).powi(2)).collect();
    if w.iter().all(|v| v.is_finite() && *v > 0.0) {
        w
    } else {
        vec![1.0; pts.len()]
    }
}

/// Weighted least-squares line through (ln t, ln K) on [t_lo, t_hi], with
/// weights (K/stderr)². Exact data (zero stderr) is fitted unweighted.
pub fn fit_power_law(curve: &CorrelationCurve, t_lo: f64, t_hi: f64) -> Result<FitResult> {
    let pts = curve.window(t_lo, t_hi)?;
    let w = weights(&pts);
    let x: Vec<f64> = pts.iter().map(|p| p.t.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.k.ln()).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (x - mx) * (y - my)).sum();
    let syy: f64 = w.iter().zip(&y).map(|(w, y)| w * (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Domain("fit window has no spread in t".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = w.iter().zip(x.iter().zip(&y)).map(|(w, (x, y))| w * (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(FitResult {
        exponent: slope,
        constant: intercept.exp(),
        r_squared,
        t_lo,
        t_hi,
        points: pts.len(),
        exponent_stderr: (1.0 / sxx).sqrt(),
        log_constant_stderr: (1.0 / sw + mx * mx / sxx).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFit {
    pub exponent: f64,
    pub constant: f64,
    /// Standard error of the constant.
    pub stderr: f64,
    pub points: usize,
}

/// Constant A in K ≈ A t^p with the exponent p held fixed: weighted mean of
/// ln(K/tᵖ) with weights (K/stderr)².
pub fn fit_constant(curve: &CorrelationCurve, t_lo: f64, t_hi: f64, exponent: f64) -> Result<ConstantFit> {
    let pts = curve.window(t_lo, t_hi)?;
    let w = weights(&pts);
    let sw: f64 = w.iter().sum();
    let mean = w.iter().zip(&pts).map(|(w, p)| w * (p.k.ln() - exponent * p.t.ln())).sum::<f64>() / sw;
    let constant = mean.exp();
    Ok(ConstantFit { exponent, constant, stderr: constant * (1.0 / sw).sqrt(), points: pts.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LongRangeReport {
    pub max_abs_deviation: f64,
    /// Largest stderr among the points considered.
    pub max_stderr: f64,
    /// (t, |K − 1|, |K − 1| / (t e^{−t²/2})) per point.
    pub rows: Vec<(f64, f64, f64)>,
}

/// |K − 1| over t ≥ t_lo, with the ratio against t e^{−t²/2} as a diagnostic.
pub fn long_range_residual(curve: &CorrelationCurve, t_lo: f64) -> Result<LongRangeReport> {
    let rows: Vec<(f64, f64, f64)> = curve
        .points
        .iter()
        .filter(|p| p.t >= t_lo)
        .map(|p| {
            let dev = (p.k - 1.0).abs();
            (p.t, dev, dev / (p.t * (-p.t * p.t / 2.0).exp()))
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientPoints { needed: 1, got: 0 });
    }
    let pts = curve.points.iter().filter(|p| p.t >= t_lo);
    Ok(LongRangeReport {
        max_abs_deviation: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        max_stderr: pts.map(|p| p.stderr).fold(0.0, f64::max),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalityGap {
    /// |K_pullback − K_isom|, standard error from the paired difference.
    pub gap: McEstimate,
    pub pullback: McEstimate,
    pub isom: McEstimate,
}

/// |K_{n,d,ψ}(x/√d, y/√d) − K_n(t)| for the Kostlan ensemble on R^k
/// restricted to the graph of ψ, k = n + codim ψ.
///
/// Both correlations use the Gaussian estimator on the same normal draws.
pub fn universality_gap(d: u32, psi: &PullbackSpec, t: f64, n_samples: u64, seed: u64) -> Result<UniversalityGap> {
    universality_gap_with(d, psi, t, Budget::new(n_samples, seed))
}

pub fn universality_gap_with(d: u32, psi: &PullbackSpec, t: f64, budget: Budget) -> Result<UniversalityGap> {
    let n = psi.n();
    let kind = EnsembleKind::pullback(n + psi.codim(), n, d, psi.clone())?;
    let pb = gaussian_factor(&kind, t).map_err(|e| e.at_t(t))?;
    let iso = gaussian_factor(&EnsembleKind::IsomGaf { n }, t).map_err(|e| e.at_t(t))?;
    let [isom, pullback, mut gap] = gaussian_correlation_pair(&iso, &pb, budget)?;
    gap.mean = gap.mean.abs();
    Ok(UniversalityGap { gap, pullback, isom })
}
