//! Monte Carlo evaluation of the Kac-Rice integrals.
//!
//! Two estimators of the two-point correlation K(t):
//!
//! * **spherical**: diagonalise Ω with the closed-form spectrum, integrate
//!   the radius of each uˢ analytically and average over uniform directions;
//! * **gaussian**: draw u ~ N(0, Ω⁻¹) using a dense Cholesky factor.
//!
//! Both return an [`McEstimate`] whose `stderr` is the naive iid one.

use crate::dense::{det_small, Matrix};
use crate::ensembles::EnsembleKind;
use crate::kacrice::{
    gaussian_factor, ln_det_closed, pair_covariance, point_density, spectrum, GaussianFactor,
};
use crate::kacrice::single_point_covariance;
use crate::rng::{fill_normal, fill_sphere, run_chunked, ChunkedRun, DEFAULT_CHUNK_COUNT};
use crate::specfun::{ln_factorial, ln_sphere_area};
use crate::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const MIN_CORRELATION_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Spherical,
    Gaussian,
    /// Plain average of a sampled quantity.
    Direct,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Spherical => "spherical",
            Estimator::Gaussian => "gaussian",
            Estimator::Direct => "direct",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spherical" => Ok(Estimator::Spherical),
            "gaussian" => Ok(Estimator::Gaussian),
            "direct" => Ok(Estimator::Direct),
            other => Err(Error::Domain(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub estimator: Estimator,
    pub chunk_count: usize,
    pub nonfinite: u64,
}

/// Sampling budget shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub n_samples: u64,
    pub seed: u64,
    pub chunk_count: usize,
}

impl Budget {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self { n_samples, seed, chunk_count: DEFAULT_CHUNK_COUNT }
    }

    pub fn with_chunks(self, chunk_count: usize) -> Self {
        Self { chunk_count: chunk_count.max(1), ..self }
    }

    fn estimate(&self, run: &ChunkedRun<1>, scale: f64, estimator: Estimator) -> McEstimate {
        self.estimate_moment(run, 0, scale, estimator)
    }

    fn estimate_moment<const M: usize>(&self, run: &ChunkedRun<M>, k: usize, scale: f64, estimator: Estimator) -> McEstimate {
        let m = &run.moments[k];
        McEstimate {
            mean: m.mean * scale,
            stderr: m.stderr() * scale.abs(),
            n_samples: self.n_samples,
            seed: self.seed,
            estimator,
            chunk_count: self.chunk_count,
            nonfinite: run.nonfinite,
        }
    }
}

/// ξ, η and the interleaved vector u = [ξ₁, η₁, …, ξₙ, ηₙ] for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub n: usize,
    /// Row-major n×n; row i is ξᵢ = ∇hᵢ(x).
    pub xi: Vec<f64>,
    /// Row-major n×n; row i is ηᵢ = ∇hᵢ(y).
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
}

impl JacobianPair {
    pub fn zeros(n: usize) -> Self {
        Self { n, xi: vec![0.0; n * n], eta: vec![0.0; n * n], u: vec![0.0; 2 * n * n] }
    }

    pub fn from_u(n: usize, u: &[f64]) -> Self {
        let mut p = Self::zeros(n);
        for i in 0..n {
            p.set_row_from_u(i, &u[2 * n * i..2 * n * (i + 1)]);
        }
        p
    }

    /// Set (ξᵢ, ηᵢ) from the 2n-vector uᵢ = [ξᵢ, ηᵢ].
    pub fn set_row_from_u(&mut self, i: usize, ui: &[f64]) {
        let n = self.n;
        self.xi[i * n..(i + 1) * n].copy_from_slice(&ui[..n]);
        self.eta[i * n..(i + 1) * n].copy_from_slice(&ui[n..2 * n]);
        self.u[2 * n * i..2 * n * (i + 1)].copy_from_slice(ui);
    }

    /// Set (ξᵢ, ηᵢ) from rotated coordinates τ (1-based pairs τ_{2j−1}, τ_{2j}):
    /// ξᵢⱼ = (−τ_{2j−1} + τ_{2j})/√2, ηᵢⱼ = (τ_{2j−1} + τ_{2j})/√2.
    pub fn set_row_from_tau(&mut self, i: usize, tau: &[f64]) {
        let n = self.n;
        for j in 0..n {
            let (a, b) = (tau[2 * j], tau[2 * j + 1]);
            let x = FRAC_1_SQRT_2 * (b - a);
            let y = FRAC_1_SQRT_2 * (a + b);
            self.xi[i * n + j] = x;
            self.eta[i * n + j] = y;
            self.u[2 * n * i + j] = x;
            self.u[2 * n * i + n + j] = y;
        }
    }

    pub fn abs_det_product(&self) -> f64 {
        (det_small(&self.xi, self.n) * det_small(&self.eta, self.n)).abs()
    }
}

fn check_budget(n_samples: u64) -> Result<()> {
    if n_samples < MIN_CORRELATION_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_CORRELATION_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

/// Monte Carlo estimate of K(t) with the default chunk count.
pub fn correlation_mc(kind: &EnsembleKind, t: f64, n_samples: u64, seed: u64, estimator: Estimator) -> Result<McEstimate> {
    correlation_mc_with(kind, t, Budget::new(n_samples, seed), estimator)
}

pub fn correlation_mc_with(kind: &EnsembleKind, t: f64, budget: Budget, estimator: Estimator) -> Result<McEstimate> {
    check_budget(budget.n_samples)?;
    match estimator {
        Estimator::Spherical => spherical_correlation(kind, t, budget),
        Estimator::Gaussian => {
            let f = gaussian_factor(kind, t).map_err(|e| e.at_t(t))?;
            Ok(gaussian_correlation(&f, budget))
        }
        Estimator::Direct => Err(Error::Unsupported("K(t) needs the spherical or gaussian estimator".into())),
    }
}

fn spherical_correlation(kind: &EnsembleKind, t: f64, budget: Budget) -> Result<McEstimate> {
    if !kind.is_structured() {
        return Err(Error::Unsupported("the spherical estimator needs the closed-form spectrum".into()));
    }
    let n = kind.dim();
    let pc = pair_covariance(kind, t)?;
    crate::kacrice::check_positive_definite(&pc)?;
    let e = pc.entries.expect("structured covariance");
    let s = spectrum(&e, n).map_err(|err| err.at_t(t))?;
    let rho = point_density(&e, n);
    let nf = n as f64;
    // Radial integral ∫ r^{2n+1} e^{−r²/2} dr = 2ⁿ n! per function.
    let ln_radial = nf * (nf * 2f64.ln() + ln_factorial(n as u32));
    let ln_scale = s.ln_prefactor() + ln_radial + nf * ln_sphere_area(2 * n as u32)?
        - nf * (nf + 1.0) * (2.0 * PI).ln()
        - 2.0 * rho.ln()
        - 0.5 * ln_det_closed(&e, n);
    let scale = ln_scale.exp();
    if !scale.is_finite() {
        return Err(Error::NonFinite(format!("spherical normalisation at t = {t}")));
    }
    let stretch: Vec<f64> = (1..=2 * n).map(|j| s.for_coordinate(j).powf(-0.5)).collect();
    let run = run_chunked(
        budget.n_samples,
        budget.seed,
        budget.chunk_count,
        || (JacobianPair::zeros(n), vec![0.0; 2 * n]),
        |(jp, w), rng| {
            for i in 0..n {
                fill_sphere(rng, w);
                for (wj, sj) in w.iter_mut().zip(&stretch) {
                    *wj *= sj;
                }
                jp.set_row_from_tau(i, w);
            }
            [jp.abs_det_product()]
        },
    );
    Ok(budget.estimate(&run, scale, Estimator::Spherical))
}

fn draw_gaussian_pair(f: &GaussianFactor, z: &[f64], ui: &mut [f64], jp: &mut JacobianPair) {
    let m = 2 * f.n;
    for i in 0..f.n {
        let zi = &z[m * i..m * (i + 1)];
        for a in 0..m {
            let mut s = 0.0;
            for b in 0..=a {
                s += f.chol[(a, b)] * zi[b];
            }
            ui[a] = s;
        }
        jp.set_row_from_u(i, ui);
    }
}

/// Gaussian estimator for a precomputed factor.
pub fn gaussian_correlation(f: &GaussianFactor, budget: Budget) -> McEstimate {
    let n = f.n;
    let scale = f.ln_scale().exp();
    let run = run_chunked(
        budget.n_samples,
        budget.seed,
        budget.chunk_count,
        || (JacobianPair::zeros(n), vec![0.0; 2 * n * n], vec![0.0; 2 * n]),
        |(jp, z, ui), rng| {
            fill_normal(rng, z);
            draw_gaussian_pair(f, z, ui, jp);
            [jp.abs_det_product()]
        },
    );
    budget.estimate(&run, scale, Estimator::Gaussian)
}

/// Gaussian estimates of two correlations from the same normal draws, and of
/// their difference `second − first`.
pub fn gaussian_correlation_pair(first: &GaussianFactor, second: &GaussianFactor, budget: Budget) -> Result<[McEstimate; 3]> {
    if first.n != second.n {
        return Err(Error::Domain("paired correlations need equal dimension".into()));
    }
    let n = first.n;
    let (s1, s2) = (first.ln_scale().exp(), second.ln_scale().exp());
    let run = run_chunked(
        budget.n_samples,
        budget.seed,
        budget.chunk_count,
        || (JacobianPair::zeros(n), vec![0.0; 2 * n * n], vec![0.0; 2 * n]),
        |(jp, z, ui), rng| {
            fill_normal(rng, z);
            draw_gaussian_pair(first, z, ui, jp);
            let a = s1 * jp.abs_det_product();
            draw_gaussian_pair(second, z, ui, jp);
            let b = s2 * jp.abs_det_product();
            [a, b, b - a]
        },
    );
    Ok([0, 1, 2].map(|k| budget.estimate_moment(&run, k, 1.0, Estimator::Gaussian)))
}

/// Monte Carlo zero density at a point (origin for non-stationary ensembles):
/// (2π)^{−n(n+1)/2} det(C)^{−1/2} ∫ |det ξ| e^{−(Ωξ,ξ)/2} dξ.
pub fn density_mc(kind: &EnsembleKind, n_samples: u64, seed: u64) -> Result<McEstimate> {
    density_mc_with(kind, Budget::new(n_samples, seed))
}

pub fn density_mc_with(kind: &EnsembleKind, budget: Budget) -> Result<McEstimate> {
    let n = kind.dim();
    let c = single_point_covariance(kind)?;
    let block = c.submatrix(&(0..=n).collect::<Vec<_>>());
    block.cholesky()?;
    let inv = block.spd_inverse()?;
    let omega = inv.submatrix(&(1..=n).collect::<Vec<_>>());
    let cov = omega.spd_inverse()?;
    let l = cov.cholesky()?;
    let nf = n as f64;
    let ln_det_c = nf * block.spd_ln_det()?;
    let ln_det_omega = nf * omega.spd_ln_det()?;
    let ln2pi = (2.0 * PI).ln();
    let scale = (-0.5 * nf * (nf + 1.0) * ln2pi - 0.5 * ln_det_c + 0.5 * nf * nf * ln2pi - 0.5 * ln_det_omega).exp();
    let run = run_chunked(
        budget.n_samples,
        budget.seed,
        budget.chunk_count,
        || (vec![0.0; n * n], vec![0.0; n * n]),
        |(z, xi), rng| {
            fill_normal(rng, z);
            for i in 0..n {
                for a in 0..n {
                    xi[i * n + a] = (0..=a).map(|b| l[(a, b)] * z[i * n + b]).sum();
                }
            }
            [det_small(xi, n).abs()]
        },
    );
    Ok(budget.estimate(&run, scale, Estimator::Gaussian))
}

fn uniform_columns_det(rng: &mut rand_chacha::ChaCha8Rng, n: usize, v: &mut [f64], m: &mut [f64]) -> f64 {
    for i in 0..n {
        fill_sphere(rng, v);
        m[i * n..(i + 1) * n].copy_from_slice(v);
    }
    det_small(m, n)
}

/// E[Vᵏ] for V the volume spanned by n iid uniform unit vectors in Rⁿ.
pub fn parallelotope_moment_mc(n: usize, k: u32, n_samples: u64, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let budget = Budget::new(n_samples, seed);
    let run = run_chunked(
        n_samples,
        seed,
        budget.chunk_count,
        || (vec![0.0; n], vec![0.0; n * n]),
        |(v, m), rng| [uniform_columns_det(rng, n, v, m).abs().powi(k as i32)],
    );
    Ok(budget.estimate(&run, 1.0, Estimator::Direct))
}

/// ∫_{(S^{n−1})ⁿ} |det ν|² dμⁿ: a uniform average scaled by area(S^{n−1})ⁿ.
pub fn sphere_det_integral_mc(n: usize, n_samples: u64, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let scale = (n as f64 * ln_sphere_area(n as u32)?).exp();
    let budget = Budget::new(n_samples, seed);
    let run = run_chunked(
        n_samples,
        seed,
        budget.chunk_count,
        || (vec![0.0; n], vec![0.0; n * n]),
        |(v, m), rng| [uniform_columns_det(rng, n, v, m).powi(2)],
    );
    Ok(budget.estimate(&run, scale, Estimator::Direct))
}

/// Cholesky factor of M⁻¹ and ln of (2π)^{n²} det(M)^{−1/2}.
fn integral_factor(m: &Matrix, n: usize) -> Result<(Matrix, f64)> {
    if m.dim() != 2 * n * n {
        return Err(Error::Domain(format!("matrix must be {0}×{0}", 2 * n * n)));
    }
    if m.asymmetry() > 1e-12 * m.max_abs() {
        return Err(Error::Domain("matrix must be symmetric".into()));
    }
    let l = m.spd_inverse()?.cholesky()?;
    let ln_c = (n * n) as f64 * (2.0 * PI).ln() - 0.5 * m.spd_ln_det()?;
    Ok((l, ln_c))
}

/// I(M) = ∫ |det ξ||det η| e^{−(Mu,u)/2} du over R^{2n²}.
pub fn jacobian_integral_mc(n: usize, m: &Matrix, n_samples: u64, seed: u64) -> Result<McEstimate> {
    let (l, ln_c) = integral_factor(m, n)?;
    let budget = Budget::new(n_samples, seed);
    let size = 2 * n * n;
    let run = run_chunked(
        n_samples,
        seed,
        budget.chunk_count,
        || (vec![0.0; size], vec![0.0; size]),
        |(z, u), rng| {
            fill_normal(rng, z);
            u.copy_from_slice(&l.mul_vec(z));
            [JacobianPair::from_u(n, u).abs_det_product()]
        },
    );
    Ok(budget.estimate(&run, ln_c.exp(), Estimator::Gaussian))
}

/// |I(B) − I(A)| with common normal draws for both integrals.
///
/// The standard error is that of the per-draw difference.
pub fn perturbation_gap(n: usize, a: &Matrix, b: &Matrix, n_samples: u64, seed: u64) -> Result<McEstimate> {
    let (la, ca) = integral_factor(a, n)?;
    let (lb, cb) = integral_factor(b, n)?;
    let (ca, cb) = (ca.exp(), cb.exp());
    let budget = Budget::new(n_samples, seed);
    let size = 2 * n * n;
    let run = run_chunked(
        n_samples,
        seed,
        budget.chunk_count,
        || (vec![0.0; size], JacobianPair::zeros(n)),
        |(z, jp), rng| {
            fill_normal(rng, z);
            *jp = JacobianPair::from_u(n, &la.mul_vec(z));
            let ia = ca * jp.abs_det_product();
            *jp = JacobianPair::from_u(n, &lb.mul_vec(z));
            let ib = cb * jp.abs_det_product();
            [ib - ia]
        },
    );
    let mut est = budget.estimate(&run, 1.0, Estimator::Gaussian);
    est.mean = est.mean.abs();
    Ok(est)
}
