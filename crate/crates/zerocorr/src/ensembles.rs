//! Covariance structure of the ensembles.
//!
//! Every structured ensemble is evaluated at the point pair
//! x = (0, …, 0, −t/2), y = (0, …, 0, t/2). Its pair covariance is then
//! described by eight scalars:
//!
//! | entry | covariance |
//! |-------|------------|
//! | α | E h(x)h(x) = E h(x)h(y)|_{y=x} |
//! | β | E ∂ᵢh(x) ∂ᵢh(x), i < n |
//! | γ | E ∂ₙh(x) ∂ₙh(x) |
//! | δ | E h(x) ∂ₙh(x) |
//! | μ | E h(x)h(y) |
//! | ν | E h(x) ∂ₙh(y) |
//! | η | E ∂ᵢh(x) ∂ᵢh(y), i < n |
//! | τ | E ∂ₙh(x) ∂ₙh(y) |
//!
//! The remaining cross terms follow from the reflection xₙ ↦ −xₙ:
//! E h(y)∂ₙh(y) = −δ and E ∂ₙh(x) h(y) = −ν.
//!
//! Alongside the raw entries, each ensemble supplies cancellation-free
//! values of α ± μ, β ± η and the two 2×2 determinants
//! (α+μ)(γ−τ) − (δ−ν)² and (α−μ)(γ+τ) − (δ+ν)², which vanish like
//! powers of t and cannot be formed by subtraction at small separation.

use crate::dense::Matrix;
use crate::scalar::Real;
use crate::specfun::{binomial, ln_factorial};
use crate::{Error, Result};
use rayon::prelude::*;

/// Maximum number of multi-indices summed by [`entries_pullback`].
pub const PULLBACK_TERM_BUDGET: u64 = 60_000_000;

/// Polynomial graph map ψ: Rⁿ → R^{k−n}.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackSpec {
    n: usize,
    components: Vec<Vec<(Vec<u32>, f64)>>,
}

impl PullbackSpec {
    /// Each component is a list of (exponent multi-index, coefficient).
    pub fn new(n: usize, components: Vec<Vec<(Vec<u32>, f64)>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidEnsemble("pull-back needs n >= 1".into()));
        }
        for comp in &components {
            for (e, c) in comp {
                if e.len() != n {
                    return Err(Error::InvalidEnsemble(format!("multi-index {e:?} has wrong length for n = {n}")));
                }
                let deg: u32 = e.iter().sum();
                if deg > 4 {
                    return Err(Error::InvalidEnsemble(format!("ψ term of degree {deg} > 4")));
                }
                if deg < 2 && *c != 0.0 {
                    return Err(Error::InvalidEnsemble("ψ must satisfy ψ(0) = 0 and Dψ(0) = 0".into()));
                }
                if !c.is_finite() {
                    return Err(Error::InvalidEnsemble("non-finite ψ coefficient".into()));
                }
            }
        }
        Ok(Self { n, components })
    }

    pub fn zero(n: usize, codim: usize) -> Self {
        Self { n, components: vec![Vec::new(); codim] }
    }

    /// ψ(x) = c·x² for n = 1, k = 2.
    pub fn quadratic(c: f64) -> Self {
        Self { n: 1, components: vec![vec![(vec![2], c)]] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn codim(&self) -> usize {
        self.components.len()
    }

    /// Values ψⱼ(x) and gradients ∂ᵢψⱼ(x) (indexed `[j][i]`).
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut vals = Vec::with_capacity(self.codim());
        let mut grads = Vec::with_capacity(self.codim());
        for comp in &self.components {
            let mut v = 0.0;
            let mut g = vec![0.0; self.n];
            for (e, c) in comp {
                let mono: f64 = e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product();
                v += c * mono;
                for i in 0..self.n {
                    if e[i] == 0 {
                        continue;
                    }
                    let mut d = c * e[i] as f64;
                    for (l, (&p, &xl)) in e.iter().zip(x).enumerate() {
                        let p = if l == i { p - 1 } else { p };
                        d *= xl.powi(p as i32);
                    }
                    g[i] += d;
                }
            }
            vals.push(v);
            grads.push(g);
        }
        (vals, grads)
    }

    /// Textual form: components separated by `;`, terms by `+`, each term
    /// `coef:e1.e2…`. The zero component is `0`.
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let mut components = Vec::new();
        for comp in s.split(';') {
            let comp = comp.trim();
            let mut terms = Vec::new();
            if comp != "0" && !comp.is_empty() {
                for term in comp.split('+') {
                    let (c, e) = term
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidEnsemble(format!("bad ψ term '{term}', expected coef:exponents")))?;
                    let c: f64 = c.trim().parse().map_err(|_| Error::InvalidEnsemble(format!("bad coefficient '{c}'")))?;
                    let e = e
                        .trim()
                        .split('.')
                        .map(|p| p.parse::<u32>().map_err(|_| Error::InvalidEnsemble(format!("bad exponent '{p}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    terms.push((e, c));
                }
            }
            components.push(terms);
        }
        Self::new(n, components)
    }

    pub fn to_spec_string(&self) -> String {
        self.components
            .iter()
            .map(|comp| {
                if comp.is_empty() {
                    "0".to_string()
                } else {
                    comp.iter()
                        .map(|(e, c)| {
                            let e: Vec<String> = e.iter().map(|p| p.to_string()).collect();
                            format!("{c}:{}", e.join("."))
                        })
                        .collect::<Vec<_>>()
                        .join("+")
                }
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Restriction of the degree-d affine Kostlan ensemble on R^k to the graph of ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct Pullback {
    pub k: usize,
    pub n: usize,
    pub d: u32,
    pub psi: PullbackSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleKind {
    KostlanAffine { n: usize, d: u32 },
    IsomGaf { n: usize },
    NormalizedG { n: usize },
    ParabolaDeg3 { b: f64 },
    Pullback(Pullback),
    SyntheticIdentity { n: usize },
}

impl EnsembleKind {
    pub fn kostlan(n: usize, d: u32) -> Result<Self> {
        let k = Self::KostlanAffine { n, d };
        k.validate()?;
        Ok(k)
    }

    pub fn pullback(k: usize, n: usize, d: u32, psi: PullbackSpec) -> Result<Self> {
        let e = Self::Pullback(Pullback { k, n, d, psi });
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnsemble(m));
        match self {
            Self::KostlanAffine { n, d } => {
                if *n == 0 {
                    return bad("n must be >= 1".into());
                }
                if *d < 3 {
                    return bad(format!("Kostlan degree must be >= 3, got {d}"));
                }
            }
            Self::IsomGaf { n } | Self::NormalizedG { n } | Self::SyntheticIdentity { n } => {
                if *n == 0 {
                    return bad("n must be >= 1".into());
                }
            }
            Self::ParabolaDeg3 { b } => {
                if !b.is_finite() {
                    return bad("curvature must be finite".into());
                }
            }
            Self::Pullback(p) => {
                if p.k > 3 || p.n == 0 || p.n >= p.k {
                    return bad(format!("pull-back needs 1 <= n < k <= 3, got n = {}, k = {}", p.n, p.k));
                }
                if p.psi.n() != p.n || p.psi.codim() != p.k - p.n {
                    return bad("ψ shape does not match (n, k)".into());
                }
                if p.d < 1 || p.d > 512 {
                    return bad(format!("pull-back degree must be in 1..=512, got {}", p.d));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::KostlanAffine { n, .. }
            | Self::IsomGaf { n }
            | Self::NormalizedG { n }
            | Self::SyntheticIdentity { n } => *n,
            Self::ParabolaDeg3 { .. } => 1,
            Self::Pullback(p) => p.n,
        }
    }

    /// Short label used in output metadata.
    pub fn label(&self) -> String {
        match self {
            Self::KostlanAffine { n, d } => format!("kostlan(n={n},d={d})"),
            Self::IsomGaf { n } => format!("isom(n={n})"),
            Self::NormalizedG { n } => format!("g(n={n})"),
            Self::ParabolaDeg3 { b } => format!("parabola(b={b})"),
            Self::Pullback(p) => format!("pullback(k={},n={},d={},psi={})", p.k, p.n, p.d, p.psi.to_spec_string()),
            Self::SyntheticIdentity { n } => format!("synthetic-identity(n={n})"),
        }
    }

    /// Whether the pair covariance is described by eight entries.
    pub fn is_structured(&self) -> bool {
        !matches!(self, Self::Pullback(_))
    }

    pub fn pair_entries(&self, t: f64) -> Result<CovarianceEntries> {
        self.validate()?;
        match self {
            Self::KostlanAffine { n, d } => entries_kostlan(*n, *d, t),
            Self::IsomGaf { n } => entries_isom(*n, t),
            Self::NormalizedG { n } => entries_g(*n, t),
            Self::ParabolaDeg3 { b } => entries_parabola(*b, t),
            Self::SyntheticIdentity { .. } => Ok(CovarianceEntries::identity()),
            Self::Pullback(_) => Err(Error::Unsupported("pull-back covariance has no eight-entry form".into())),
        }
    }

    /// Raw entries [α, β, γ, δ, μ, ν, η, τ] in any [`Real`] type.
    pub fn raw_entries<T: Real>(&self, t: T) -> Result<[T; 8]> {
        self.validate()?;
        Ok(match self {
            Self::KostlanAffine { d, .. } => kostlan_raw(*d, t),
            Self::IsomGaf { .. } => isom_raw(t),
            Self::NormalizedG { .. } => g_raw(t),
            Self::ParabolaDeg3 { b } => parabola_raw(T::from_f64(*b), t),
            Self::SyntheticIdentity { .. } => {
                let (o, z) = (T::one(), T::zero());
                [o, o, o, z, z, z, z, z]
            }
            Self::Pullback(_) => return Err(Error::Unsupported("pull-back covariance has no eight-entry form".into())),
        })
    }
}

/// Cancellation-free combinations of the eight entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableCombos {
    pub alpha_plus_mu: f64,
    pub alpha_minus_mu: f64,
    pub beta_plus_eta: f64,
    pub beta_minus_eta: f64,
    /// (α+μ)(γ−τ) − (δ−ν)²
    pub even_det: f64,
    /// (α−μ)(γ+τ) − (δ+ν)²
    pub odd_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEntries {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub mu: f64,
    pub nu: f64,
    pub eta: f64,
    pub tau: f64,
    pub combos: StableCombos,
    /// False when the ensemble is one-dimensional and β, η are placeholders.
    pub transverse: bool,
}

impl CovarianceEntries {
    /// Entries from raw values, with the combinations formed directly.
    pub fn from_raw(raw: [f64; 8]) -> Self {
        let [alpha, beta, gamma, delta, mu, nu, eta, tau] = raw;
        Self {
            alpha,
            beta,
            gamma,
            delta,
            mu,
            nu,
            eta,
            tau,
            combos: StableCombos {
                alpha_plus_mu: alpha + mu,
                alpha_minus_mu: alpha - mu,
                beta_plus_eta: beta + eta,
                beta_minus_eta: beta - eta,
                even_det: (alpha + mu) * (gamma - tau) - (delta - nu) * (delta - nu),
                odd_det: (alpha - mu) * (gamma + tau) - (delta + nu) * (delta + nu),
            },
            transverse: true,
        }
    }

    /// α = β = γ = 1, everything else 0: the pair covariance is the identity.
    pub fn identity() -> Self {
        Self::from_raw([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn raw(&self) -> [f64; 8] {
        [self.alpha, self.beta, self.gamma, self.delta, self.mu, self.nu, self.eta, self.tau]
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("separation must be positive and finite, got {t}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("dimension must be >= 1".into()));
    }
    Ok(())
}

pub(crate) fn kostlan_raw<T: Real>(d: u32, t: T) -> [T; 8] {
    let half = t * T::from_f64(0.5);
    let s = half * half;
    let one = T::one();
    let (p, q) = (one + s, one - s);
    let df = T::from_f64(d as f64);
    let dd1 = T::from_f64(d as f64 * (d as f64 - 1.0));
    let d = d as i32;
    let alpha = p.powi(d);
    let beta = df * p.powi(d - 1);
    let gamma = beta + dd1 * s * p.powi(d - 2);
    let delta = -(df * half * p.powi(d - 1));
    let mu = q.powi(d);
    let eta = df * q.powi(d - 1);
    let tau = eta - dd1 * s * q.powi(d - 2);
    let nu = -(df * half * q.powi(d - 1));
    [alpha, beta, gamma, delta, mu, nu, eta, tau]
}

pub(crate) fn isom_raw<T: Real>(t: T) -> [T; 8] {
    let half = t * T::from_f64(0.5);
    let s = half * half;
    let e = s.exp();
    let f = (-s).exp();
    let one = T::one();
    [e, e, (one + s) * e, -(half * e), f, -(half * f), f, (one - s) * f]
}

pub(crate) fn g_raw<T: Real>(t: T) -> [T; 8] {
    let t2 = t * t;
    let m = (-(t2 * T::from_f64(0.5))).exp();
    let (o, z) = (T::one(), T::zero());
    [o, o, o, z, m, -(t * m), m, (o - t2) * m]
}

pub(crate) fn parabola_raw<T: Real>(b: T, t: T) -> [T; 8] {
    let c = T::from_f64;
    let k2 = b * b;
    let t2 = t * t;
    let t4 = t2 * t2;
    let t6 = t4 * t2;
    let plus = k2 * t4 + c(4.0) * t2 + c(16.0);
    let minus = k2 * t4 - c(4.0) * t2 + c(16.0);
    let alpha = plus * plus * plus / c(4096.0);
    let mu = minus * minus * minus / c(4096.0);
    let delta = -(c(3.0) * t * (k2 * t2 + c(2.0)) * plus * plus) / c(1024.0);
    // Stored as E h(x)∂h(y); the opposite sign of the tabulated ν.
    let nu = c(3.0) * t * (k2 * t2 - c(2.0)) * minus * minus / c(1024.0);
    let gamma = (c(3.0) * k2 * t4 + c(12.0) * t2 + c(48.0))
        * (c(3.0) * k2 * k2 * t6 + c(13.0) * k2 * t4 + c(16.0) * k2 * t2 + c(12.0) * t2 + c(16.0))
        / c(256.0);
    let tau = -((c(3.0) * k2 * t4 - c(12.0) * t2 + c(48.0))
        * (c(3.0) * k2 * k2 * t6 - c(13.0) * k2 * t4 + c(16.0) * k2 * t2 + c(12.0) * t2 - c(16.0)))
        / c(256.0);
    let one = T::one();
    [alpha, one, gamma, delta, mu, nu, one, tau]
}

/// sinh(x) − x without cancellation.
fn sinh_minus_x(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        let mut term = x * x2 / 6.0;
        let mut sum = term;
        let mut k = 3.0;
        while term.abs() > 1e-18 * sum.abs() {
            term *= x2 / ((2.0 * k - 2.0) * (2.0 * k - 1.0));
            sum += term;
            k += 1.0;
        }
        sum
    } else {
        x.sinh() - x
    }
}

/// Combinations from a feature expansion h(z) = Σ cⱼ aⱼ z^{pⱼ} along the
/// last axis, with weights wⱼ = cⱼ². Returns (plus, minus, even, odd).
fn feature_combos(features: &[(f64, u32)], t: f64) -> (f64, f64, f64, f64) {
    let h = 0.5 * t;
    let h2 = h * h;
    let a: Vec<f64> = features.iter().map(|&(w, p)| w * h2.powi(p as i32)).collect();
    let scale = a.iter().cloned().fold(0.0, f64::max);
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (&ai, &(_, p)) in a.iter().zip(features) {
        if p % 2 == 0 {
            plus += ai;
        } else {
            minus += ai;
        }
    }
    let mut even = 0.0;
    let mut odd = 0.0;
    for j in 0..features.len() {
        for k in (j + 1)..features.len() {
            let (pj, pk) = (features[j].1, features[k].1);
            if pj % 2 != pk % 2 || pj == pk {
                continue;
            }
            let dp = pj as f64 - pk as f64;
            let term = (a[j] / scale) * (a[k] / scale) * dp * dp;
            if pj % 2 == 0 {
                even += term;
            } else {
                odd += term;
            }
        }
    }
    let f = 4.0 * scale * scale / h2;
    (2.0 * plus, 2.0 * minus, f * even, f * odd)
}

/// Affine Kostlan ensemble of degree d at separation t.
pub fn entries_kostlan(n: usize, d: u32, t: f64) -> Result<CovarianceEntries> {
    check_n(n)?;
    check_t(t)?;
    if d < 3 {
        return Err(Error::InvalidEnsemble(format!("Kostlan degree must be >= 3, got {d}")));
    }
    let mut e = CovarianceEntries::from_raw(kostlan_raw(d, t));
    let axial: Vec<(f64, u32)> = (0..=d).map(|j| (binomial(d, j), j)).collect();
    let transverse: Vec<(f64, u32)> = (0..d).map(|j| (d as f64 * binomial(d - 1, j), j)).collect();
    let (ap, am, even, odd) = feature_combos(&axial, t);
    let (bp, bm, _, _) = feature_combos(&transverse, t);
    e.combos = StableCombos {
        alpha_plus_mu: ap,
        alpha_minus_mu: am,
        beta_plus_eta: bp,
        beta_minus_eta: bm,
        even_det: even,
        odd_det: odd,
    };
    Ok(e)
}

/// Isom(Rⁿ)-invariant Gaussian analytic function (kernel e^{x·y}).
pub fn entries_isom(n: usize, t: f64) -> Result<CovarianceEntries> {
    check_n(n)?;
    check_t(t)?;
    let mut e = CovarianceEntries::from_raw(isom_raw(t));
    let s = 0.25 * t * t;
    let x = 0.5 * t * t;
    e.combos = StableCombos {
        alpha_plus_mu: 2.0 * s.cosh(),
        alpha_minus_mu: 2.0 * s.sinh(),
        beta_plus_eta: 2.0 * s.cosh(),
        beta_minus_eta: 2.0 * s.sinh(),
        even_det: 2.0 * x.sinh() + t * t,
        odd_det: 2.0 * sinh_minus_x(x),
    };
    Ok(e)
}

/// The GAF multiplied by e^{−|x|²/2}: stationary kernel e^{−|x−y|²/2}.
pub fn entries_g(n: usize, t: f64) -> Result<CovarianceEntries> {
    check_n(n)?;
    check_t(t)?;
    let mut e = CovarianceEntries::from_raw(g_raw(t));
    let x = 0.5 * t * t;
    let m = (-x).exp();
    let one_minus = -(-x).exp_m1();
    e.combos = StableCombos {
        alpha_plus_mu: 1.0 + m,
        alpha_minus_mu: one_minus,
        beta_plus_eta: 1.0 + m,
        beta_minus_eta: one_minus,
        // Multiplying by the weight scales each 2×2 determinant by e^{−t²/2}.
        even_det: m * (2.0 * x.sinh() + t * t),
        odd_det: m * 2.0 * sinh_minus_x(x),
    };
    Ok(e)
}

/// Degree-3 Kostlan restricted to the parabola y = b x² (n = 1).
///
/// β and η do not exist in dimension one; they are set to 1 and
/// `transverse` is false.
pub fn entries_parabola(b: f64, t: f64) -> Result<CovarianceEntries> {
    check_t(t)?;
    if !b.is_finite() {
        return Err(Error::Domain("curvature must be finite".into()));
    }
    let mut e = CovarianceEntries::from_raw(parabola_raw(b, t));
    e.transverse = false;
    // Monomials x^β (b x²)^γ with |β| + |γ| ≤ 3, weighted by 3!/(β! γ! (3−β−γ)!).
    let b2 = b * b;
    let features = [
        (1.0, 0),
        (3.0, 1),
        (3.0 + 3.0 * b2, 2),
        (1.0 + 6.0 * b2, 3),
        (3.0 * b2 + 3.0 * b2 * b2, 4),
        (3.0 * b2 * b2, 5),
        (b2 * b2 * b2, 6),
    ];
    let (ap, am, even, odd) = feature_combos(&features, t);
    e.combos = StableCombos {
        alpha_plus_mu: ap,
        alpha_minus_mu: am,
        beta_plus_eta: 2.0,
        beta_minus_eta: 0.0,
        even_det: even,
        odd_det: odd,
    };
    Ok(e)
}

/// How tangent-space points are placed for the pull-back ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointScaling {
    /// Evaluate at x/√d and differentiate in the unscaled variable.
    Tangent,
    /// Evaluate at x as given.
    Raw,
}

struct PointData {
    xpow: Vec<Vec<f64>>,
    ppow: Vec<Vec<f64>>,
    pgrad: Vec<Vec<f64>>,
    gscale: f64,
}

impl PointData {
    fn new(pb: &Pullback, x: &[f64], scaling: PointScaling) -> Self {
        let d = pb.d as usize;
        let (xs, gscale): (Vec<f64>, f64) = match scaling {
            PointScaling::Tangent => {
                let r = (pb.d as f64).sqrt();
                (x.iter().map(|v| v / r).collect(), 1.0 / r)
            }
            PointScaling::Raw => (x.to_vec(), 1.0),
        };
        let pows = |v: f64| {
            let mut p = Vec::with_capacity(d + 1);
            let mut acc = 1.0;
            for _ in 0..=d {
                p.push(acc);
                acc *= v;
            }
            p
        };
        let (vals, grads) = pb.psi.eval(&xs);
        Self {
            xpow: xs.iter().map(|&v| pows(v)).collect(),
            ppow: vals.iter().map(|&v| pows(v)).collect(),
            pgrad: grads,
            gscale,
        }
    }

    /// Monomial value and gradient for exponents `e` (first n on x, rest on ψ).
    fn eval(&self, e: &[usize], out: &mut [f64]) {
        let n = self.xpow.len();
        let mut prod = 1.0;
        for i in 0..n {
            prod *= self.xpow[i][e[i]];
        }
        for j in 0..self.ppow.len() {
            prod *= self.ppow[j][e[n + j]];
        }
        out[0] = prod;
        for i in 0..n {
            let mut g = 0.0;
            if e[i] > 0 {
                let mut p = e[i] as f64 * self.xpow[i][e[i] - 1];
                for l in 0..n {
                    if l != i {
                        p *= self.xpow[l][e[l]];
                    }
                }
                for j in 0..self.ppow.len() {
                    p *= self.ppow[j][e[n + j]];
                }
                g += p;
            }
            for j in 0..self.ppow.len() {
                let f = e[n + j];
                if f == 0 || self.pgrad[j][i] == 0.0 {
                    continue;
                }
                let mut p = f as f64 * self.ppow[j][f - 1] * self.pgrad[j][i];
                for l in 0..n {
                    p *= self.xpow[l][e[l]];
                }
                for jj in 0..self.ppow.len() {
                    if jj != j {
                        p *= self.ppow[jj][e[n + jj]];
                    }
                }
                g += p;
            }
            out[1 + i] = g * self.gscale;
        }
    }
}

fn term_count(d: u64, k: u64) -> u64 {
    // C(d + k, k)
    let mut c: u64 = 1;
    for i in 1..=k {
        c = c.saturating_mul(d + i) / i;
    }
    c
}

/// Covariance block of [h(x), ∇h(x), h(y), ∇h(y)] for the pull-back ensemble,
/// by direct summation over multi-indices.
pub fn pullback_block(pb: &Pullback, x: &[f64], y: &[f64], scaling: PointScaling) -> Result<Matrix> {
    EnsembleKind::Pullback(pb.clone()).validate()?;
    if x.len() != pb.n || y.len() != pb.n {
        return Err(Error::Domain("points must have length n".into()));
    }
    let count = term_count(pb.d as u64, pb.k as u64);
    if count > PULLBACK_TERM_BUDGET {
        return Err(Error::TermBudget(format!("{count} multi-indices exceed {PULLBACK_TERM_BUDGET}")));
    }
    let px = PointData::new(pb, x, scaling);
    let py = PointData::new(pb, y, scaling);
    let n = pb.n;
    let k = pb.k;
    let d = pb.d as usize;
    let m = 2 * n + 2;
    let use_log = pb.d > 60;
    let lnf: Vec<f64> = (0..=d).map(|i| ln_factorial(i as u32)).collect();
    let fact: Vec<f64> = if use_log {
        Vec::new()
    } else {
        let mut f = vec![1.0; d + 1];
        for i in 1..=d {
            f[i] = f[i - 1] * i as f64;
        }
        f
    };

    let partials: Vec<Vec<f64>> = (0..=d)
        .into_par_iter()
        .map(|e0| {
            let mut acc = vec![0.0; m * m];
            let mut e = vec![0usize; k];
            e[0] = e0;
            let mut v = vec![0.0; m];
            let mut vx = vec![0.0; n + 1];
            let mut vy = vec![0.0; n + 1];
            loop {
                let total: usize = e.iter().sum();
                let sw = if use_log {
                    let lw = lnf[d] - e.iter().map(|&p| lnf[p]).sum::<f64>() - lnf[d - total];
                    (0.5 * lw).exp()
                } else {
                    let den: f64 = e.iter().map(|&p| fact[p]).product::<f64>() * fact[d - total];
                    (fact[d] / den).sqrt()
                };
                px.eval(&e, &mut vx);
                py.eval(&e, &mut vy);
                for i in 0..=n {
                    v[i] = sw * vx[i];
                    v[n + 1 + i] = sw * vy[i];
                }
                for a in 0..m {
                    if v[a] == 0.0 {
                        continue;
                    }
                    for b in 0..m {
                        acc[a * m + b] += v[a] * v[b];
                    }
                }
                // Advance the trailing indices (odometer with |e| ≤ d).
                let mut pos = k - 1;
                loop {
                    if pos == 0 {
                        return acc;
                    }
                    let s: usize = e.iter().sum();
                    if s < d {
                        e[pos] += 1;
                        break;
                    }
                    e[pos] = 0;
                    pos -= 1;
                }
            }
        })
        .collect();

    let mut out = Matrix::<f64>::zeros(m);
    for part in &partials {
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] += part[a * m + b];
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            if !out[(a, b)].is_finite() {
                return Err(Error::NonFinite("pull-back covariance accumulation".into()));
            }
        }
    }
    Ok(out)
}

/// Full 2n(n+1) pair covariance of the pull-back ensemble, in the layout
/// [h₁(x), ∇h₁(x), h₁(y), ∇h₁(y), h₂(x), …].
pub fn entries_pullback(pb: &Pullback, x: &[f64], y: &[f64], scaling: PointScaling) -> Result<Matrix> {
    let block = pullback_block(pb, x, y, scaling)?;
    Ok(block_diag(&block, pb.n))
}

/// n copies of `block` along the diagonal.
pub fn block_diag<T: Real>(block: &Matrix<T>, copies: usize) -> Matrix<T> {
    let m = block.dim();
    let mut out = Matrix::zeros(m * copies);
    for c in 0..copies {
        for a in 0..m {
            for b in 0..m {
                out[(c * m + a, c * m + b)] = block[(a, b)];
            }
        }
    }
    out
}
