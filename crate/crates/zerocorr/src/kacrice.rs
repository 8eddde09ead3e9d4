//! Kac-Rice building blocks: the pair covariance C, the matrix Ω, its
//! spectrum, closed-form densities and the deterministic prefactor of the
//! two-point formula.
//!
//! Vector layout for n functions h₁…hₙ at points x and y:
//!
//! ```text
//! [h₁(x), ∇h₁(x), h₁(y), ∇h₁(y), h₂(x), ∇h₂(x), …]
//! ```
//!
//! Each function contributes one (2n+2)-block, so C is block diagonal with n
//! identical blocks. Ω keeps the rows and columns of C⁻¹ whose 1-based index
//! is *not* ≡ 1 (mod n+1), i.e. it drops every function value and keeps the
//! gradients, leaving u = [ξ₁, η₁, ξ₂, η₂, …] where ξᵢ = ∇hᵢ(x), ηᵢ = ∇hᵢ(y).

use crate::dense::Matrix;
use crate::ensembles::{block_diag, entries_pullback, CovarianceEntries, EnsembleKind, PointScaling};
use crate::scalar::{Dd, Real};
use crate::specfun::{abs_det_gaussian_mean, gamma};
use crate::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

#[derive(Debug, Clone, PartialEq)]
pub struct PairCovariance {
    pub n: usize,
    pub matrix: Matrix,
    /// Present for ensembles with the eight-entry structure.
    pub entries: Option<CovarianceEntries>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    pub n: usize,
    /// Full 2n² × 2n² matrix.
    pub matrix: Matrix,
    /// One 2n × 2n diagonal block Ω̃ = [[Ω̃₁₁, Ω̃₁₂], [Ω̃₂₁, Ω̃₂₂]].
    pub tilde: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectrum {
    pub n: usize,
    /// Absent for n = 1.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: f64,
    pub lambda4: f64,
}

/// Which indices are deleted when forming Ω. `ZeroBased` is a deliberately
/// wrong convention kept only as a negative control for the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexConvention {
    OneBased,
    ZeroBased,
}

fn assemble_block<T: Real>(raw: [T; 8], n: usize) -> Matrix<T> {
    let [alpha, beta, gamma, delta, mu, nu, eta, tau] = raw;
    let m = 2 * n + 2;
    let y0 = n + 1;
    let mut b = Matrix::zeros(m);
    let mut set = |i: usize, j: usize, v: T| {
        b[(i, j)] = v;
        b[(j, i)] = v;
    };
    set(0, 0, alpha);
    set(y0, y0, alpha);
    set(0, y0, mu);
    for i in 1..n {
        set(i, i, beta);
        set(y0 + i, y0 + i, beta);
        set(i, y0 + i, eta);
    }
    set(n, n, gamma);
    set(y0 + n, y0 + n, gamma);
    set(n, y0 + n, tau);
    set(0, n, delta);
    set(y0, y0 + n, -delta);
    set(0, y0 + n, nu);
    set(n, y0, -nu);
    b
}

/// Lay the eight entries out as the 2n(n+1) pair covariance.
pub fn assemble_pair_covariance(entries: &CovarianceEntries, n: usize) -> Result<PairCovariance> {
    if n == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    if n > 1 && !entries.transverse {
        return Err(Error::Domain("entries carry no transverse covariances; only n = 1 is possible".into()));
    }
    let block = assemble_block(entries.raw(), n);
    Ok(PairCovariance { n, matrix: block_diag(&block, n), entries: Some(*entries), t: None })
}

/// Pair covariance of an ensemble at x = (0,…,−t/2), y = (0,…,t/2).
///
/// Pull-back ensembles are evaluated at tangent-scaled points x/√d.
pub fn pair_covariance(kind: &EnsembleKind, t: f64) -> Result<PairCovariance> {
    let n = kind.dim();
    if let EnsembleKind::Pullback(pb) = kind {
        kind.validate()?;
        let (x, y) = point_pair(n, t);
        let matrix = entries_pullback(pb, &x, &y, PointScaling::Tangent)?;
        return Ok(PairCovariance { n, matrix, entries: None, t: Some(t) });
    }
    let entries = kind.pair_entries(t)?;
    let mut pc = assemble_pair_covariance(&entries, n)?;
    pc.t = Some(t);
    Ok(pc)
}

/// The point pair (0,…,0,−t/2), (0,…,0,t/2).
pub fn point_pair(n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    x[n - 1] = -0.5 * t;
    y[n - 1] = 0.5 * t;
    (x, y)
}

/// 0-based indices kept in Ω.
pub fn omega_indices(n: usize, convention: IndexConvention) -> Vec<usize> {
    let size = 2 * n * (n + 1);
    (0..size)
        .filter(|&i| match convention {
            // 1-based index i+1 ≡ 1 (mod n+1) is dropped.
            IndexConvention::OneBased => i % (n + 1) != 0,
            IndexConvention::ZeroBased => i % (n + 1) != 1,
        })
        .collect()
}

fn unsigned_pivots(entries: &CovarianceEntries, n: usize) -> Vec<(f64, f64)> {
    // C̃ splits under x ↔ y reflection into: transverse pairs with
    // eigenvalues β ± η, and two 2×2 blocks
    //   even [[α+μ, δ−ν], [δ−ν, γ−τ]], odd [[α−μ, δ+ν], [δ+ν, γ+τ]].
    // Their Cholesky pivots (with the block's largest diagonal) decide
    // positive definiteness exactly as a Cholesky of C would.
    let c = &entries.combos;
    let mut piv = Vec::new();
    let g_minus = entries.gamma - entries.tau;
    let g_plus = entries.gamma + entries.tau;
    piv.push((c.alpha_plus_mu, c.alpha_plus_mu.max(g_minus)));
    piv.push((c.even_det / c.alpha_plus_mu, c.alpha_plus_mu.max(g_minus)));
    piv.push((c.alpha_minus_mu, c.alpha_minus_mu.max(g_plus)));
    piv.push((c.odd_det / c.alpha_minus_mu, c.alpha_minus_mu.max(g_plus)));
    if n > 1 {
        piv.push((c.beta_plus_eta, c.beta_plus_eta));
        piv.push((c.beta_minus_eta, c.beta_plus_eta));
    }
    piv
}

/// Positive-definiteness test. A Cholesky pivot below 1e-12 of the largest
/// diagonal entry fails. Structured covariances are factored in the
/// reflection-symmetric basis, where the pivots are available without
/// cancellation.
pub fn check_positive_definite(pc: &PairCovariance) -> Result<()> {
    let fail = |pivot| Error::NotPositiveDefinite { pivot, t: pc.t };
    match &pc.entries {
        Some(e) => {
            for (i, (p, scale)) in unsigned_pivots(e, pc.n).into_iter().enumerate() {
                if !(p > 1e-12 * scale) || !p.is_finite() {
                    return Err(fail(i));
                }
            }
            Ok(())
        }
        None => pc.matrix.cholesky().map(|_| ()).map_err(|e| match e {
            Error::NotPositiveDefinite { pivot, .. } => fail(pivot),
            other => other,
        }),
    }
}

/// det C from the factored closed form
/// (β²−η²)^{n(n−1)} · [(α+μ)(γ−τ)−(δ−ν)²]ⁿ · [(α−μ)(γ+τ)−(δ+ν)²]ⁿ.
pub fn det_closed(entries: &CovarianceEntries, n: usize) -> f64 {
    let c = &entries.combos;
    let n = n as i32;
    let transverse = if n > 1 { (c.beta_minus_eta * c.beta_plus_eta).powi(n * (n - 1)) } else { 1.0 };
    transverse * (c.even_det * c.odd_det).powi(n)
}

/// ln det C from the closed form, for use where det C under- or overflows.
pub fn ln_det_closed(entries: &CovarianceEntries, n: usize) -> f64 {
    let c = &entries.combos;
    let nf = n as f64;
    let transverse = if n > 1 { nf * (nf - 1.0) * (c.beta_minus_eta.ln() + c.beta_plus_eta.ln()) } else { 0.0 };
    transverse + nf * (c.even_det.ln() + c.odd_det.ln())
}

/// Eigenvalues of Ω from the closed forms
/// λ₁ = 1/(β−η), λ₂ = 1/(β+η), λ₃ = (α+μ)/even, λ₄ = (α−μ)/odd.
pub fn spectrum(entries: &CovarianceEntries, n: usize) -> Result<Spectrum> {
    let c = &entries.combos;
    let ratio = |num: f64, den: f64, what: &str| {
        let v = num / den;
        if den == 0.0 || !v.is_finite() || v <= 0.0 {
            Err(Error::DegenerateSpectrum(format!("{what} = {v}")))
        } else {
            Ok(v)
        }
    };
    let (lambda1, lambda2) = if n > 1 {
        if !entries.transverse {
            return Err(Error::DegenerateSpectrum("no transverse entries for n > 1".into()));
        }
        (Some(ratio(1.0, c.beta_minus_eta, "lambda1")?), Some(ratio(1.0, c.beta_plus_eta, "lambda2")?))
    } else {
        (None, None)
    };
    Ok(Spectrum {
        n,
        lambda1,
        lambda2,
        lambda3: ratio(c.alpha_plus_mu, c.even_det, "lambda3")?,
        lambda4: ratio(c.alpha_minus_mu, c.odd_det, "lambda4")?,
    })
}

impl Spectrum {
    /// Eigenvalue paired with coordinate j (1-based, 1 ≤ j ≤ 2n) of each
    /// sphere: odd j → λ₁, even j → λ₂, j = 2n−1 → λ₃, j = 2n → λ₄.
    pub fn for_coordinate(&self, j: usize) -> f64 {
        let n = self.n;
        if j == 2 * n - 1 {
            self.lambda3
        } else if j == 2 * n {
            self.lambda4
        } else if j % 2 == 1 {
            self.lambda1.expect("lambda1 exists for n > 1")
        } else {
            self.lambda2.expect("lambda2 exists for n > 1")
        }
    }

    /// Diagonal of Λ = (QP)ᵀ Ω (QP): (λ₁, λ₂)×(n−1), λ₃, λ₄, repeated n times.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(2 * self.n * self.n);
        for _ in 0..self.n {
            for j in 1..=2 * self.n {
                d.push(self.for_coordinate(j));
            }
        }
        d
    }

    /// (λ₁λ₂)^{−n(n−1)/2} (λ₃λ₄)^{−n/2}; the first factor is 1 when n = 1.
    pub fn prefactor(&self) -> f64 {
        self.ln_prefactor().exp()
    }

    pub fn ln_prefactor(&self) -> f64 {
        let nf = self.n as f64;
        let t = match (self.lambda1, self.lambda2) {
            (Some(a), Some(b)) => -0.5 * nf * (nf - 1.0) * (a.ln() + b.ln()),
            _ => 0.0,
        };
        t - 0.5 * nf * (self.lambda3.ln() + self.lambda4.ln())
    }
}

/// The orthogonal matrix QP with (QP)ᵀ Ω (QP) = Λ.
///
/// Column i·2n + 2(j−1) (0-based, function i, coordinate j) is
/// (−e_ξ + e_η)/√2 and the next column is (e_ξ + e_η)/√2, where e_ξ, e_η
/// are the u-positions of ξᵢⱼ and ηᵢⱼ.
pub fn diagonalizer(n: usize) -> Matrix {
    let size = 2 * n * n;
    let mut qp = Matrix::zeros(size);
    for i in 0..n {
        for j in 0..n {
            let xi = i * 2 * n + j;
            let eta = i * 2 * n + n + j;
            let c = i * 2 * n + 2 * j;
            qp[(xi, c)] = -FRAC_1_SQRT_2;
            qp[(eta, c)] = FRAC_1_SQRT_2;
            qp[(xi, c + 1)] = FRAC_1_SQRT_2;
            qp[(eta, c + 1)] = FRAC_1_SQRT_2;
        }
    }
    qp
}

fn omega_from_tilde(tilde: Matrix, n: usize) -> OmegaMatrix {
    let m = 2 * n;
    let mut full = Matrix::zeros(m * n);
    for c in 0..n {
        for a in 0..m {
            for b in 0..m {
                full[(c * m + a, c * m + b)] = tilde[(a, b)];
            }
        }
    }
    OmegaMatrix { n, matrix: full, tilde }
}

/// Ω̃ from the spectrum: diagonal blocks (λ_odd + λ_even)/2 and off-diagonal
/// blocks (λ_even − λ_odd)/2, coordinate by coordinate.
fn omega_closed(entries: &CovarianceEntries, n: usize) -> Result<OmegaMatrix> {
    let s = spectrum(entries, n)?;
    let mut tilde = Matrix::zeros(2 * n);
    for j in 0..n {
        let (lo, le) = if j + 1 == n { (s.lambda3, s.lambda4) } else { (s.lambda1.unwrap(), s.lambda2.unwrap()) };
        let diag = 0.5 * (lo + le);
        let off = 0.5 * (le - lo);
        tilde[(j, j)] = diag;
        tilde[(n + j, n + j)] = diag;
        tilde[(j, n + j)] = off;
        tilde[(n + j, j)] = off;
    }
    Ok(omega_from_tilde(tilde, n))
}

/// Ω for a pair covariance.
///
/// Structured covariances use the closed form; others fall back to
/// inverse-then-delete.
pub fn omega(pc: &PairCovariance) -> Result<OmegaMatrix> {
    check_positive_definite(pc)?;
    match &pc.entries {
        Some(e) => omega_closed(e, pc.n),
        None => omega_dense(pc, IndexConvention::OneBased),
    }
}

fn extract_tilde<T: Real>(om: &Matrix<T>, n: usize) -> Matrix<T> {
    Matrix::from_fn(2 * n, |a, b| om[(a, b)])
}

/// Ω by dense inversion of C and deletion of the function-value rows.
pub fn omega_dense(pc: &PairCovariance, convention: IndexConvention) -> Result<OmegaMatrix> {
    let inv = pc.matrix.inverse()?;
    let om = inv.submatrix(&omega_indices(pc.n, convention));
    let tilde = extract_tilde(&om, pc.n);
    Ok(OmegaMatrix { n: pc.n, matrix: om, tilde })
}

/// Dense reference quantities computed in double-double arithmetic from the
/// raw entry formulas: Ω by inverse-then-delete, det C by LU and λ₁…λ₄ read
/// off Ω̃.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseReference {
    pub omega: OmegaMatrix,
    pub det: f64,
    pub lambdas: [Option<f64>; 4],
}

pub fn dense_reference(kind: &EnsembleKind, t: f64) -> Result<DenseReference> {
    dense_reference_with(kind, t, IndexConvention::OneBased)
}

pub fn dense_reference_with(kind: &EnsembleKind, t: f64, convention: IndexConvention) -> Result<DenseReference> {
    let n = kind.dim();
    let raw = kind.raw_entries(Dd::from(t))?;
    let c = block_diag(&assemble_block(raw, n), n);
    let det = c.det().to_f64();
    let inv = c.inverse()?;
    let om = inv.submatrix(&omega_indices(n, convention));
    let tilde = extract_tilde(&om, n);
    let pair = |j: usize| (tilde[(j, j)] - tilde[(j, n + j)], tilde[(j, j)] + tilde[(j, n + j)]);
    let (l3, l4) = pair(n - 1);
    let (l1, l2) = if n > 1 {
        let (a, b) = pair(0);
        (Some(a.to_f64()), Some(b.to_f64()))
    } else {
        (None, None)
    };
    let om = om.to_f64();
    Ok(DenseReference {
        omega: OmegaMatrix { n, tilde: extract_tilde(&om, n), matrix: om },
        det,
        lambdas: [l1, l2, Some(l3.to_f64()), Some(l4.to_f64())],
    })
}

/// What the Gaussian estimator needs: the Cholesky factor of one Ω̃⁻¹ block,
/// log-determinants and the two point densities.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFactor {
    pub n: usize,
    /// Lower factor L with L Lᵀ = Ω̃⁻¹ (2n × 2n).
    pub chol: Matrix,
    /// ln det Ω (all n blocks).
    pub ln_det_omega: f64,
    pub ln_det_c: f64,
    pub densities: (f64, f64),
}

impl GaussianFactor {
    /// ln of (2π)^{n²} det(Ω)^{−1/2} / ((2π)^{n(n+1)} ρ(x)ρ(y) √det C).
    pub fn ln_scale(&self) -> f64 {
        let nf = self.n as f64;
        let ln2pi = (2.0 * PI).ln();
        nf * nf * ln2pi - 0.5 * self.ln_det_omega - nf * (nf + 1.0) * ln2pi
            - self.densities.0.ln()
            - self.densities.1.ln()
            - 0.5 * self.ln_det_c
    }
}

fn factor_from_block<T: Real>(block: &Matrix<T>, n: usize, tol: f64) -> Result<(Matrix, f64, f64)> {
    let inv = block.inverse()?;
    let keep: Vec<usize> = (1..=n).chain(n + 2..2 * n + 2).collect();
    let tilde = inv.submatrix(&keep);
    let cov = tilde.inverse()?;
    let chol = cov.cholesky_tol(tol)?;
    let ln_det_block = block.det().to_f64().ln();
    let ln_det_cov: f64 = (0..2 * n).map(|i| 2.0 * chol[(i, i)].to_f64().ln()).sum();
    Ok((chol.to_f64(), -ln_det_cov, ln_det_block))
}

/// Gaussian-estimator ingredients by dense inversion of one covariance block.
///
/// Structured ensembles are inverted in double-double from the raw entry
/// formulas, independently of the closed forms; pull-backs in f64.
pub fn gaussian_factor(kind: &EnsembleKind, t: f64) -> Result<GaussianFactor> {
    let n = kind.dim();
    let pc = pair_covariance(kind, t)?;
    check_positive_definite(&pc)?;
    let densities = pair_point_densities(&pc)?;
    let block_keep: Vec<usize> = (0..2 * n + 2).collect();
    let (chol, ln_det_tilde_one, ln_det_block) = if kind.is_structured() {
        let raw = kind.raw_entries(Dd::from(t))?;
        factor_from_block(&assemble_block(raw, n), n, 0.0)?
    } else {
        factor_from_block(&pc.matrix.submatrix(&block_keep), n, 1e-12)?
    };
    let nf = n as f64;
    let out = GaussianFactor { n, chol, ln_det_omega: nf * ln_det_tilde_one, ln_det_c: nf * ln_det_block, densities };
    if !out.ln_scale().is_finite() {
        return Err(Error::NonFinite(format!("Gaussian estimator normalisation at t = {t}")));
    }
    Ok(out)
}

/// Both sides of (λ₁λ₂)^{−n(n−1)/2}(λ₃λ₄)^{−n/2}/√det C = (α²−μ²)^{−n/2}.
pub fn prefactor_identity_check(entries: &CovarianceEntries, n: usize) -> Result<(f64, f64)> {
    let c = &entries.combos;
    if c.alpha_minus_mu == 0.0 {
        return Err(Error::DegenerateSpectrum("alpha = mu".into()));
    }
    let s = spectrum(entries, n)?;
    let lhs = (s.ln_prefactor() - 0.5 * ln_det_closed(entries, n)).exp();
    let rhs = (c.alpha_minus_mu * c.alpha_plus_mu).powf(-(n as f64) / 2.0);
    Ok((lhs, rhs))
}

fn density_constant(n: usize) -> f64 {
    let nf = n as f64;
    PI.powf(-(nf + 1.0) / 2.0) * gamma((nf + 1.0) / 2.0).expect("positive argument")
}

/// Constant zero density: π^{−(n+1)/2} Γ((n+1)/2), times d^{n/2} for Kostlan.
pub fn density_closed(kind: &EnsembleKind) -> Result<f64> {
    kind.validate()?;
    match kind {
        EnsembleKind::KostlanAffine { n, d } => Ok(density_constant(*n) * (*d as f64).powf(*n as f64 / 2.0)),
        EnsembleKind::IsomGaf { n } | EnsembleKind::NormalizedG { n } | EnsembleKind::SyntheticIdentity { n } => {
            Ok(density_constant(*n))
        }
        other => Err(Error::Unsupported(format!("no constant density for {}", other.label()))),
    }
}

/// Zero density at x = (0,…,−t/2) from the eight entries:
/// π^{−(n+1)/2} Γ((n+1)/2) α^{−n/2} β^{(n−1)/2} √(γ − δ²/α).
pub fn point_density(entries: &CovarianceEntries, n: usize) -> f64 {
    let nf = n as f64;
    let e = entries;
    density_constant(n)
        * e.alpha.powf(-nf / 2.0)
        * if n > 1 { e.beta.powf((nf - 1.0) / 2.0) } else { 1.0 }
        * (e.gamma - e.delta * e.delta / e.alpha).sqrt()
}

/// Zero density from a single-point (n+1)-block [h, ∇h]:
/// (2πa)^{−n/2} √det(G − ccᵀ/a) · E|det N| with N an n×n standard normal matrix.
pub fn point_density_block(block: &Matrix, n: usize) -> Result<f64> {
    let a = block[(0, 0)];
    if !(a > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 0, t: None });
    }
    let cond = Matrix::from_fn(n, |i, j| block[(1 + i, 1 + j)] - block[(0, 1 + i)] * block[(0, 1 + j)] / a);
    let det = cond.det();
    if !(det > 0.0) {
        return Err(Error::NotPositiveDefinite { pivot: 1, t: None });
    }
    let nf = n as f64;
    Ok((2.0 * PI * a).powf(-nf / 2.0) * det.sqrt() * abs_det_gaussian_mean(n as u32))
}

/// Densities ρ(x), ρ(y) at the pair points of a pair covariance.
pub fn pair_point_densities(pc: &PairCovariance) -> Result<(f64, f64)> {
    if let Some(e) = &pc.entries {
        let r = point_density(e, pc.n);
        return Ok((r, r));
    }
    let n = pc.n;
    let bx = pc.matrix.submatrix(&(0..=n).collect::<Vec<_>>());
    let by = pc.matrix.submatrix(&((n + 1)..(2 * n + 2)).collect::<Vec<_>>());
    Ok((point_density_block(&bx, n)?, point_density_block(&by, n)?))
}

/// ln det C: closed form when structured, Cholesky otherwise.
pub fn ln_det(pc: &PairCovariance) -> Result<f64> {
    match &pc.entries {
        Some(e) => Ok(ln_det_closed(e, pc.n)),
        None => pc.matrix.spd_ln_det(),
    }
}

/// Covariance of [h₁(p), ∇h₁(p), h₂(p), …] at a single point: the origin for
/// Kostlan-type ensembles, any point for the stationary ones.
pub fn single_point_covariance(kind: &EnsembleKind) -> Result<Matrix> {
    kind.validate()?;
    let n = kind.dim();
    let block: Matrix = match kind {
        EnsembleKind::KostlanAffine { d, .. } => {
            Matrix::from_fn(n + 1, |i, j| if i != j { 0.0 } else if i == 0 { 1.0 } else { *d as f64 })
        }
        EnsembleKind::IsomGaf { .. } | EnsembleKind::NormalizedG { .. } | EnsembleKind::SyntheticIdentity { .. } => {
            Matrix::identity(n + 1)
        }
        EnsembleKind::ParabolaDeg3 { .. } => Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 3.0]]),
        EnsembleKind::Pullback(pb) => {
            let zero = vec![0.0; n];
            let b = crate::ensembles::pullback_block(pb, &zero, &zero, PointScaling::Tangent)?;
            b.submatrix(&(0..=n).collect::<Vec<_>>())
        }
    };
    Ok(block_diag(&block, n))
}

/// Largest t on `grid` (ascending) up to which the pair covariance stays
/// positive definite, or `None` when it already fails at the first point.
pub fn positive_definite_up_to(kind: &EnsembleKind, grid: &[f64]) -> Option<f64> {
    let mut last = None;
    for &t in grid {
        match pair_covariance(kind, t).and_then(|pc| check_positive_definite(&pc)) {
            Ok(()) => last = Some(t),
            Err(_) => break,
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{entries_g, entries_isom, entries_kostlan, entries_parabola};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn identity_entries_give_identity() {
        let pc = assemble_pair_covariance(&CovarianceEntries::identity(), 2).unwrap();
        assert_eq!(pc.matrix, Matrix::identity(12));
        let om = omega(&pc).unwrap();
        assert_eq!(om.matrix, Matrix::identity(8));
        let s = spectrum(&CovarianceEntries::identity(), 2).unwrap();
        assert_eq!((s.lambda1, s.lambda2, s.lambda3, s.lambda4), (Some(1.0), Some(1.0), 1.0, 1.0));
        assert_eq!(det_closed(&CovarianceEntries::identity(), 3), 1.0);
        let (l, r) = prefactor_identity_check(&CovarianceEntries::identity(), 2).unwrap();
        assert!((l - 1.0).abs() < 1e-15 && (r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kostlan_layout_first_row() {
        let pc = assemble_pair_covariance(&entries_kostlan(1, 3, 1.0).unwrap(), 1).unwrap();
        let row: Vec<f64> = (0..4).map(|j| pc.matrix[(0, j)]).collect();
        assert_eq!(row, vec![1.953125, -2.34375, 0.421875, -0.84375]);
        assert_eq!(pc.matrix.asymmetry(), 0.0);
    }

    #[test]
    fn block_structure() {
        let pc = assemble_pair_covariance(&entries_isom(2, 1.0).unwrap(), 2).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(pc.matrix[(a, b)], pc.matrix[(6 + a, 6 + b)]);
                assert_eq!(pc.matrix[(a, 6 + b)], 0.0);
            }
        }
    }

    #[test]
    fn det_examples() {
        let e1 = 0.5f64.exp() - (-0.5f64).exp();
        assert!(rel(det_closed(&entries_isom(1, 1.0).unwrap(), 1), (e1 + 1.0) * (e1 - 1.0)) < 1e-14);
        let m = (-2.0f64).exp();
        let g = det_closed(&entries_g(1, 2.0).unwrap(), 1);
        assert!(rel(g, (1.0 + 4.0 * m - m * m) * (1.0 - 4.0 * m - m * m)) < 1e-12);
        let pc = assemble_pair_covariance(&entries_isom(1, 1.0).unwrap(), 1).unwrap();
        assert!(rel(pc.matrix.det(), (e1 + 1.0) * (e1 - 1.0)) < 1e-12);
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&entries_isom(2, 1.0).unwrap(), 2).unwrap();
        assert!(rel(s.lambda1.unwrap(), 1.0 / (0.25f64.exp() - (-0.25f64).exp())) < 1e-14);
        assert!(rel(s.lambda1.unwrap(), 1.9793) < 1e-4);
        assert!(rel(s.lambda2.unwrap(), 0.48477) < 1e-4);
        let t = 1e-3;
        let k = spectrum(&entries_kostlan(2, 3, t).unwrap(), 2).unwrap();
        assert!(rel(k.lambda1.unwrap().powf(-0.5) / t, 3f64.sqrt()) < 1e-4);
        assert!(spectrum(&entries_parabola(1.0, 0.5).unwrap(), 1).unwrap().lambda1.is_none());
    }

    #[test]
    fn omega_against_dense() {
        let pc = assemble_pair_covariance(&entries_isom(2, 1.0).unwrap(), 2).unwrap();
        let closed = omega(&pc).unwrap();
        let dense = omega_dense(&pc, IndexConvention::OneBased).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let (a, b) = (closed.matrix[(i, j)], dense.matrix[(i, j)]);
                assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-12), "({i},{j}) {a} {b}");
            }
        }
        let om1 = omega(&assemble_pair_covariance(&entries_isom(1, 1.0).unwrap(), 1).unwrap()).unwrap();
        assert_eq!(om1.tilde[(0, 0)], om1.tilde[(1, 1)]);
    }

    #[test]
    fn zero_based_deletion_differs() {
        let pc = assemble_pair_covariance(&entries_isom(2, 1.0).unwrap(), 2).unwrap();
        let good = omega_dense(&pc, IndexConvention::OneBased).unwrap();
        let bad = omega_dense(&pc, IndexConvention::ZeroBased).unwrap();
        assert!((good.matrix[(0, 0)] - bad.matrix[(0, 0)]).abs() > 1e-3);
        assert_eq!(omega_indices(1, IndexConvention::OneBased), vec![1, 3]);
    }

    #[test]
    fn diagonalizer_is_orthogonal_and_diagonalizes() {
        for n in 1..=3 {
            let qp = diagonalizer(n);
            let id = qp.transpose().mul(&qp);
            for i in 0..2 * n * n {
                for j in 0..2 * n * n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((id[(i, j)] - target).abs() < 1e-15);
                }
            }
            let e = entries_kostlan(n, 5, 0.7).unwrap();
            let om = omega(&assemble_pair_covariance(&e, n).unwrap()).unwrap();
            let lam = qp.transpose().mul(&om.matrix).mul(&qp);
            let diag = spectrum(&e, n).unwrap().diagonal();
            for i in 0..2 * n * n {
                for j in 0..2 * n * n {
                    if i == j {
                        assert!(rel(lam[(i, i)], diag[i]) < 1e-12);
                    } else {
                        assert!(lam[(i, j)].abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn prefactor_examples() {
        let (l, r) = prefactor_identity_check(&entries_isom(2, 1.0).unwrap(), 2).unwrap();
        let want = 1.0 / (0.5f64.exp() - (-0.5f64).exp());
        assert!(rel(l, want) < 1e-12 && rel(r, want) < 1e-12);
        assert!(rel(r, 0.959) < 1e-3);
        let (l, r) = prefactor_identity_check(&entries_kostlan(1, 3, 1.0).unwrap(), 1).unwrap();
        let want = (1.953125f64 * 1.953125 - 0.421875 * 0.421875).powf(-0.5);
        assert!(rel(l, want) < 1e-12 && rel(r, want) < 1e-12);
    }

    #[test]
    fn densities() {
        assert!(rel(density_closed(&EnsembleKind::IsomGaf { n: 1 }).unwrap(), 1.0 / PI) < 1e-14);
        assert!(rel(density_closed(&EnsembleKind::KostlanAffine { n: 1, d: 9 }).unwrap(), 3.0 / PI) < 1e-14);
        assert!(rel(density_closed(&EnsembleKind::KostlanAffine { n: 2, d: 4 }).unwrap(), 2.0 / PI) < 1e-14);
        assert!(rel(density_closed(&EnsembleKind::IsomGaf { n: 2 }).unwrap(), 0.159_154_9) < 1e-6);
        assert!(density_closed(&EnsembleKind::ParabolaDeg3 { b: 1.0 }).is_err());
        // Fubini-Study density in affine coordinates: ρ_d / (1 + |x|²)^{(n+1)/2}.
        for n in 1..=3 {
            let t = 0.8;
            let e = entries_kostlan(n, 6, t).unwrap();
            let want = density_closed(&EnsembleKind::KostlanAffine { n, d: 6 }).unwrap() / (1.0 + t * t / 4.0).powf((n as f64 + 1.0) / 2.0);
            assert!(rel(point_density(&e, n), want) < 1e-13);
        }
        let iso = entries_isom(3, 1.7).unwrap();
        assert!(rel(point_density(&iso, 3), density_closed(&EnsembleKind::IsomGaf { n: 3 }).unwrap()) < 1e-13);
        let pc = assemble_pair_covariance(&entries_kostlan(2, 4, 0.6).unwrap(), 2).unwrap();
        let (a, b) = pair_point_densities(&PairCovariance { entries: None, ..pc.clone() }).unwrap();
        let (c, d) = pair_point_densities(&pc).unwrap();
        assert!(rel(a, c) < 1e-13 && rel(b, d) < 1e-13);
    }

    #[test]
    fn single_point_blocks() {
        assert_eq!(single_point_covariance(&EnsembleKind::NormalizedG { n: 3 }).unwrap(), Matrix::identity(12));
        assert_eq!(single_point_covariance(&EnsembleKind::IsomGaf { n: 1 }).unwrap(), Matrix::identity(2));
        let k = single_point_covariance(&EnsembleKind::KostlanAffine { n: 2, d: 5 }).unwrap();
        let diag: Vec<f64> = (0..6).map(|i| k[(i, i)]).collect();
        assert_eq!(diag, vec![1.0, 5.0, 5.0, 1.0, 5.0, 5.0]);
    }

    #[test]
    fn positive_definiteness() {
        let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 0.02).collect();
        assert_eq!(positive_definite_up_to(&EnsembleKind::IsomGaf { n: 2 }, &grid), Some(4.0));
        let tmax = positive_definite_up_to(&EnsembleKind::KostlanAffine { n: 1, d: 3 }, &grid).unwrap();
        assert!(tmax >= 0.5);
        let pc = PairCovariance { n: 1, matrix: Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]), entries: None, t: Some(0.0) };
        assert!(matches!(omega(&pc), Err(Error::NotPositiveDefinite { t: Some(_), .. })));
        // Small separations stay admissible in the structured test.
        assert!(check_positive_definite(&pair_covariance(&EnsembleKind::IsomGaf { n: 3 }, 0.01).unwrap()).is_ok());
    }
}
