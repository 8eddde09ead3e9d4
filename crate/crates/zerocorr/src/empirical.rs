//! Direct simulation for n = 1: sample polynomials, find their real roots and
//! estimate the pair correlation from root positions.
//!
//! Projective distance between two affine roots x, y is the angle between the
//! lines through (1, x) and (1, y): |arctan x − arctan y| folded into
//! [0, π/2]. A symmetric pair ±t/2 sits at angle 2 arctan(t/2).

use crate::rng::{fill_normal, substream};
use crate::specfun::{binomial, ln_factorial};
use crate::{Error, Result};
use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{DMatrix, Schur};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct RootSample {
    pub ensemble: String,
    /// Real roots in the affine coordinate, sorted.
    pub roots: Vec<f64>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// p(x) and p'(x) for coefficients in increasing degree.
fn horner(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &a in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

/// Σ|cⱼ||x|ʲ, the natural size of p(x).
pub fn eval_scale(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x.abs() + a.abs())
}

/// One Newton step. Roots outside the unit interval are polished on the
/// reversed polynomial in 1/x. Steps longer than 1e-6 (1 + |x|) are
/// rejected: they signal an ill-conditioned root, not a refinement.
fn newton_polish(c: &[f64], x: f64) -> f64 {
    let accept = |x1: f64| if x1.is_finite() && (x1 - x).abs() <= 1e-6 * (1.0 + x.abs()) { x1 } else { x };
    if x.abs() <= 1.0 {
        let (p, dp) = horner(c, x);
        return accept(x - p / dp);
    }
    let rev: Vec<f64> = c.iter().rev().copied().collect();
    let y = 1.0 / x;
    let (q, dq) = horner(&rev, y);
    accept(1.0 / (y - q / dq))
}

/// Real roots of Σ cⱼ xʲ from the eigenvalues of the balanced companion
/// matrix. An eigenvalue is kept as real when |imag| ≤ 1e-10 (1 + |real|);
/// each kept root gets one Newton step. Vanishing leading coefficients lower
/// the degree.
pub fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|&v| v == 0.0) {
        c.pop();
    }
    // Zero roots at the origin.
    let zeros = c.iter().take_while(|&&v| v == 0.0).count();
    let c_nz = &c[zeros..];
    let m = c_nz.len().saturating_sub(1);
    let mut roots = vec![0.0; if c_nz.is_empty() { 0 } else { zeros }];
    if m == 1 {
        roots.push(-c_nz[0] / c_nz[1]);
    } else if m > 1 {
        let lead = c_nz[m];
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            comp[(0, j)] = -c_nz[m - 1 - j] / lead;
        }
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        balance_parlett_reinsch(&mut comp);
        let schur = Schur::try_new(comp, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::NonFinite("companion eigenvalue iteration did not converge".into()))?;
        for z in schur.complex_eigenvalues().iter() {
            if z.im.abs() <= 1e-10 * (1.0 + z.re.abs()) && z.re.is_finite() {
                roots.push(newton_polish(c_nz, z.re));
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// Number of distinct real roots in (a, b] by a Sturm sequence. Floating
/// point; intended as an independent check for modest degrees.
pub fn sturm_count(coeffs: &[f64], a: f64, b: f64) -> usize {
    let trim = |mut p: Vec<f64>| {
        let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while p.last().is_some_and(|v| v.abs() <= 1e-13 * scale) {
            p.pop();
        }
        p
    };
    let p0 = trim(coeffs.to_vec());
    if p0.len() <= 1 {
        return 0;
    }
    let p1: Vec<f64> = p0.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect();
    let mut seq = vec![p0, trim(p1)];
    loop {
        let (r0, r1) = (&seq[seq.len() - 2], &seq[seq.len() - 1]);
        if r1.len() <= 1 {
            break;
        }
        // Remainder of r0 / r1, negated.
        let mut rem = r0.clone();
        let d = r1.len() - 1;
        while rem.len() > d {
            let q = rem[rem.len() - 1] / r1[d];
            let shift = rem.len() - 1 - d;
            for (j, v) in r1.iter().enumerate() {
                rem[shift + j] -= q * v;
            }
            rem.pop();
        }
        let next = trim(rem.into_iter().map(|v| -v).collect());
        if next.is_empty() {
            break;
        }
        seq.push(next);
    }
    let changes = |x: f64| {
        let signs: Vec<f64> = seq.iter().map(|p| horner(p, x).0).filter(|v| *v != 0.0).collect();
        signs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    };
    changes(a).saturating_sub(changes(b))
}

/// Coefficients √binom(d, j) aⱼ of a degree-d Kostlan polynomial.
pub fn kostlan_coefficients(d: u32, rng: &mut impl Rng) -> Vec<f64> {
    let mut a = vec![0.0; d as usize + 1];
    fill_normal(rng, &mut a);
    a.iter_mut().enumerate().for_each(|(j, v)| *v *= binomial(d, j as u32).sqrt());
    a
}

pub fn sample_kostlan_roots(d: u32, seed: u64) -> Result<RootSample> {
    if d < 1 {
        return Err(Error::Domain("degree must be >= 1".into()));
    }
    let mut rng = substream(seed, 0);
    let c = kostlan_coefficients(d, &mut rng);
    Ok(RootSample { ensemble: format!("kostlan(d={d})"), roots: real_roots(&c)?, seed, warnings: vec![] })
}

/// Σ_{j>N} L^{2j}/j!, the covariance tail left out by truncating at degree N.
pub fn gaf_tail(n: u32, l: f64) -> f64 {
    let mut sum = 0.0;
    let ln_l2 = (l * l).ln();
    for j in (n + 1)..(n + 2000) {
        let term = (j as f64 * ln_l2 - ln_factorial(j)).exp();
        sum += term;
        if term < 1e-30 * sum.max(1e-300) && j as f64 > l * l {
            break;
        }
    }
    sum
}

/// Real roots in [−L, L] of Σ_{j≤N} aⱼ xʲ/√j!.
///
/// Truncations with N < 8L² or a covariance tail above 1e-12 are flagged in
/// `warnings`.
pub fn sample_gaf_roots(n: u32, l: f64, seed: u64) -> Result<RootSample> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::Domain(format!("window half-width must be positive, got {l}")));
    }
    let mut warnings = Vec::new();
    if (n as f64) < 8.0 * l * l {
        warnings.push(format!("truncation N = {n} is below 8L² = {}", 8.0 * l * l));
    }
    let tail = gaf_tail(n, l);
    if tail > 1e-12 {
        warnings.push(format!("covariance tail {tail:.3e} exceeds 1e-12"));
    }
    let mut rng = substream(seed, 0);
    let mut a = vec![0.0; n as usize + 1];
    fill_normal(&mut rng, &mut a);
    // Work in s = x/L so the window maps to [−1, 1].
    let scaled: Vec<f64> =
        a.iter().enumerate().map(|(j, v)| v * (j as f64 * l.ln() - 0.5 * ln_factorial(j as u32)).exp()).collect();
    let size = scaled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut reduced = scaled;
    while reduced.len() > 1 && reduced.last().is_some_and(|v| v.abs() < 1e-20 * size) {
        reduced.pop();
    }
    let roots = real_roots(&reduced)?.into_iter().filter(|s| s.abs() <= 1.0).map(|s| s * l).collect();
    Ok(RootSample { ensemble: format!("gaf(N={n},L={l})"), roots, seed, warnings })
}

/// Many independent samples; replicate i uses seed `seed + i`.
pub fn sample_many(count: usize, seed: u64, f: impl Fn(u64) -> Result<RootSample> + Sync) -> Result<Vec<RootSample>> {
    (0..count).into_par_iter().map(|i| f(seed.wrapping_add(i as u64))).collect()
}

/// Homogeneous Poisson control with the given intensity per unit length.
pub fn poisson_control(intensity: f64, domain: PairDomain, count: usize, seed: u64) -> Vec<RootSample> {
    (0..count)
        .map(|i| {
            let mut rng = substream(seed.wrapping_add(i as u64), 0);
            let (vol, map): (f64, Box<dyn Fn(f64) -> f64>) = match domain {
                PairDomain::Projective => (PI, Box::new(|u: f64| (PI * (u - 0.5)).tan())),
                PairDomain::Window { half_width } => (2.0 * half_width, Box::new(move |u: f64| half_width * (2.0 * u - 1.0))),
            };
            let k = rand_distr::Poisson::new(intensity * vol)
                .map(|p| rng.sample::<f64, _>(p) as usize)
                .unwrap_or(0);
            let mut roots: Vec<f64> = (0..k).map(|_| map(rng.random::<f64>())).collect();
            roots.sort_by(|a, b| a.total_cmp(b));
            RootSample { ensemble: "poisson".into(), roots, seed: seed.wrapping_add(i as u64), warnings: vec![] }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairDomain {
    /// RP¹ with the angle-between-lines metric; volume π.
    Projective,
    /// The interval [−W, W]. Reference points are taken from the eroded
    /// window [−W + r, W − r], r the largest bin edge; partners anywhere.
    Window { half_width: f64 },
}

/// Angle between the lines through (1, x) and (1, y), in [0, π/2].
pub fn projective_distance(x: f64, y: f64) -> f64 {
    let d = (x.atan() - y.atan()).abs();
    if d > PI / 2.0 { PI - d } else { d }
}

/// Affine separation t of a symmetric pair at projective distance θ.
pub fn projective_to_affine(theta: f64) -> f64 {
    2.0 * (theta / 2.0).tan()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairHistogram {
    pub edges: Vec<f64>,
    /// Ordered pair counts summed over replicates.
    pub counts: Vec<u64>,
    pub intensity: f64,
    /// Volume of the domain containing the reference points.
    pub volume: f64,
    pub k_hat: Vec<f64>,
    /// Infinite for empty bins.
    pub stderr: Vec<f64>,
    pub n_samples: usize,
}

impl PairHistogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// K̂(bin) = mean ordered-pair count / (ρ² · volume · 2Δ), ρ estimated as
/// mean root count per unit volume.
pub fn pair_correlation_estimate(samples: &[RootSample], domain: PairDomain, edges: &[f64]) -> Result<PairHistogram> {
    if samples.len() < 500 {
        return Err(Error::InsufficientPoints { needed: 500, got: samples.len() });
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(Error::Domain("bin edges must be increasing and nonnegative".into()));
    }
    let bins = edges.len() - 1;
    let r_max = edges[bins];
    let (full_volume, ref_volume, lo, hi) = match domain {
        PairDomain::Projective => {
            if r_max > PI / 2.0 {
                return Err(Error::Domain("projective distances are at most π/2".into()));
            }
            (PI, PI, f64::NEG_INFINITY, f64::INFINITY)
        }
        PairDomain::Window { half_width } => {
            if 2.0 * r_max >= 2.0 * half_width {
                return Err(Error::Domain("largest bin exceeds the window".into()));
            }
            (2.0 * half_width, 2.0 * (half_width - r_max), -half_width + r_max, half_width - r_max)
        }
    };
    let dist = |x: f64, y: f64| match domain {
        PairDomain::Projective => projective_distance(x, y),
        PairDomain::Window { .. } => (x - y).abs(),
    };
    let per_sample: Vec<Vec<u64>> = samples
        .par_iter()
        .map(|s| {
            let mut c = vec![0u64; bins];
            for (i, &x) in s.roots.iter().enumerate() {
                if x < lo || x > hi {
                    continue;
                }
                for (j, &y) in s.roots.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let r = dist(x, y);
                    if r < edges[0] || r >= r_max {
                        continue;
                    }
                    let b = edges.partition_point(|&e| e <= r) - 1;
                    c[b] += 1;
                }
            }
            c
        })
        .collect();
    let s = samples.len() as f64;
    let mean_count = samples.iter().map(|x| x.roots.len() as f64).sum::<f64>() / s;
    let intensity = mean_count / full_volume;
    let mut counts = vec![0u64; bins];
    let mut k_hat = vec![0.0; bins];
    let mut stderr = vec![f64::INFINITY; bins];
    for b in 0..bins {
        let vals: Vec<f64> = per_sample.iter().map(|c| c[b] as f64).collect();
        counts[b] = per_sample.iter().map(|c| c[b]).sum();
        let mean = vals.iter().sum::<f64>() / s;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1.0);
        let norm = intensity * intensity * ref_volume * 2.0 * (edges[b + 1] - edges[b]);
        k_hat[b] = mean / norm;
        if counts[b] > 0 {
            stderr[b] = (var / s).sqrt() / norm;
        }
    }
    Ok(PairHistogram { edges: edges.to_vec(), counts, intensity, volume: ref_volume, k_hat, stderr, n_samples: samples.len() })
}
