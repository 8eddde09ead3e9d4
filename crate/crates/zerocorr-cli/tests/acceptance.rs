//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::time::Instant;
use zerocorr::asymptotics::parallelotope_moment;
use zerocorr::dense::Matrix;
use zerocorr::empirical::{sample_kostlan_roots, sample_many};
use zerocorr::ensembles::{EnsembleKind, PullbackSpec};
use zerocorr::kacrice::*;
use zerocorr::mc::*;
use zerocorr::rng::substream;
use rand::Rng;

const SAMPLES: u64 = 1_000_000;

type Outcome = Result<(bool, String), zerocorr::Error>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

/// K at each t, seed offset by the grid index.
fn curve(kind: &EnsembleKind, ts: &[f64], seed: u64) -> Result<Vec<McEstimate>, zerocorr::Error> {
    ts.iter().enumerate().map(|(i, &t)| correlation_mc(kind, t, SAMPLES, seed + i as u64, Estimator::Spherical)).collect()
}

/// Weighted least squares for K = A t^p with p fixed; returns (A, stderr A).
fn pinned_fit(ts: &[f64], ks: &[McEstimate], p: f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (t, k) in ts.iter().zip(ks) {
        let x = t.powf(p);
        let w = 1.0 / (k.stderr * k.stderr);
        num += w * x * k.mean;
        den += w * x * x;
    }
    (num / den, den.sqrt().recip())
}

/// Weighted least squares of ln K on ln t; returns (exponent, constant).
fn loglog_fit(ts: &[f64], ks: &[McEstimate]) -> (f64, f64) {
    let pts: Vec<(f64, f64, f64)> =
        ts.iter().zip(ks).map(|(t, k)| (t.ln(), k.mean.ln(), (k.mean / k.stderr).powi(2))).collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, (my - slope * mx).exp())
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn short_range() -> Outcome {
    let ts = grid(0.05, 0.3, 11);
    let (a1, _) = pinned_fit(&ts, &curve(&EnsembleKind::IsomGaf { n: 1 }, &ts, 100)?, 1.0);
    let k2 = correlation_mc(&EnsembleKind::IsomGaf { n: 2 }, 0.05, SAMPLES, 200, Estimator::Spherical)?;
    let c3 = curve(&EnsembleKind::IsomGaf { n: 3 }, &ts, 300)?;
    let (p3, _) = loglog_fit(&ts, &c3);
    let (a3, _) = pinned_fit(&ts, &c3, -1.0);
    let ok = rel(a1, PI / 4.0) <= 0.10 && (k2.mean - 1.0).abs() <= 0.02 && (p3 + 1.0).abs() <= 0.1 && rel(a3, 3.0 * PI / 8.0) <= 0.10;
    Ok((ok, format!("n=1 A={a1:.4} (π/4={:.4}); n=2 K(0.05)={:.4}; n=3 exponent {p3:.3}, A={a3:.4} (3π/8={:.4})", PI / 4.0, k2.mean, 3.0 * PI / 8.0)))
}

fn small_t_constant(kind: &EnsembleKind, seed: u64) -> Result<(f64, f64), zerocorr::Error> {
    let ts = grid(0.01, 0.05, 9);
    Ok(pinned_fit(&ts, &curve(kind, &ts, seed)?, 1.0))
}

fn finite_degree() -> Outcome {
    let want = PI / (2.0 * 3f64.sqrt());
    let (ak, sk) = small_t_constant(&EnsembleKind::KostlanAffine { n: 1, d: 3 }, 400)?;
    let (ap, sp) = small_t_constant(&EnsembleKind::ParabolaDeg3 { b: 0.0 }, 400)?;
    let ok = rel(ak, want) <= 0.05 && (ak - ap).abs() <= sk.hypot(sp);
    Ok((ok, format!("Kostlan d=3 A={ak:.4}±{sk:.4}, parabola b=0 A={ap:.4}±{sp:.4}, π/(2√3)={want:.4}")))
}

fn curvature() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in [0.0, 1.0, 2.0] {
        let want = PI / (2.0 * 3f64.sqrt()) * (1.0 + b * b);
        let (a, _) = small_t_constant(&EnsembleKind::ParabolaDeg3 { b }, 500)?;
        ok &= rel(a, want) <= 0.05;
        parts.push(format!("b={b}: {a:.4} vs {want:.4}"));
    }
    Ok((ok, parts.join(", ")))
}

fn long_range() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        for t in [4.0, 5.0] {
            let k = correlation_mc(&EnsembleKind::IsomGaf { n }, t, SAMPLES, 600 + n as u64, Estimator::Spherical)?;
            ok &= (k.mean - 1.0).abs() <= (3.0 * k.stderr).max(1e-2);
            parts.push(format!("n={n},t={t}: {:.4}", k.mean));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn densities() -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for kind in [
        EnsembleKind::IsomGaf { n: 1 },
        EnsembleKind::IsomGaf { n: 2 },
        EnsembleKind::IsomGaf { n: 3 },
        EnsembleKind::KostlanAffine { n: 1, d: 9 },
        EnsembleKind::KostlanAffine { n: 2, d: 4 },
    ] {
        let nf = kind.dim() as f64;
        let mut exact = PI.powf(-(nf + 1.0) / 2.0) * zerocorr::specfun::gamma((nf + 1.0) / 2.0)?;
        if let EnsembleKind::KostlanAffine { d, .. } = kind {
            exact *= (d as f64).powf(nf / 2.0);
        }
        let est = density_mc(&kind, SAMPLES, 700)?;
        let z = (est.mean - exact).abs() / est.stderr;
        ok &= z <= 3.0;
        worst = worst.max(z);
    }
    let mut parts = vec![format!("density max z {worst:.2}")];
    for d in [4u32, 25, 100] {
        let c: Vec<f64> =
            sample_many(2000, 800, |s| sample_kostlan_roots(d, s))?.iter().map(|s| s.roots.len() as f64).collect();
        let m = c.len() as f64;
        let mean = c.iter().sum::<f64>() / m;
        let se = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        ok &= (mean - (d as f64).sqrt()).abs() <= 3.0 * se;
        parts.push(format!("d={d} roots {mean:.3}±{se:.3}"));
    }
    Ok((ok, parts.join(", ")))
}

fn universality() -> Outcome {
    let ds = [16u32, 64, 256];
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, psi) in [("ψ=0", PullbackSpec::zero(1, 1)), ("ψ=x²", PullbackSpec::quadratic(1.0))] {
        let gaps: Vec<f64> = ds
            .iter()
            .map(|&d| zerocorr::asymptotics::universality_gap(d, &psi, 1.0, SAMPLES, 900).map(|g| g.gap.mean))
            .collect::<Result<_, _>>()?;
        let slope = ols_slope(&ds.map(|d| (d as f64).ln()), &gaps.iter().map(|g| g.ln()).collect::<Vec<_>>());
        ok &= gaps.windows(2).all(|w| w[1] < w[0]) && (slope + 0.5).abs() <= 0.3;
        parts.push(format!("{label}: gaps {:.2e},{:.2e},{:.2e} slope {slope:.3}", gaps[0], gaps[1], gaps[2]));
    }
    Ok((ok, parts.join("; ")))
}

fn parallelotope() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for k in 0..=3 {
            let est = parallelotope_moment_mc(n, k, SAMPLES, 1000)?;
            let exact = parallelotope_moment(n, k)?;
            let dev = (est.mean - exact).abs();
            worst = worst.max(if dev < 1e-12 { 0.0 } else { dev / est.stderr });
        }
    }
    let spots = [(parallelotope_moment(2, 1)?, 2.0 / PI), (parallelotope_moment(2, 2)?, 0.5), (parallelotope_moment(3, 2)?, 2.0 / 9.0)];
    let spot_err = spots.iter().map(|&(a, b)| rel(a, b)).fold(0.0, f64::max);
    Ok((worst <= 3.0 && spot_err < 1e-12, format!("max z {worst:.2}, spot values rel err {spot_err:.1e}")))
}

fn structural() -> Outcome {
    let mut rng = substream(1100, 0);
    let mut worst = [0.0f64; 4];
    for _ in 0..200 {
        let kind = match rng.random_range(0..4) {
            0 => EnsembleKind::KostlanAffine { n: rng.random_range(1..=3), d: rng.random_range(3..=12) },
            1 => EnsembleKind::IsomGaf { n: rng.random_range(1..=3) },
            2 => EnsembleKind::NormalizedG { n: rng.random_range(1..=3) },
            _ => EnsembleKind::ParabolaDeg3 { b: rng.random_range(-2.0..2.0) },
        };
        let t = rng.random_range(0.05..4.0);
        let n = kind.dim();
        let e = kind.pair_entries(t)?;
        let reference = dense_reference(&kind, t)?;
        worst[0] = worst[0].max(rel(det_closed(&e, n), reference.det));
        let om = omega(&assemble_pair_covariance(&e, n)?)?;
        let scale = om.matrix.max_abs();
        let size = 2 * n * n;
        let qp = diagonalizer(n);
        let lam = qp.transpose().mul(&om.matrix).mul(&qp);
        let diag = spectrum(&e, n)?.diagonal();
        for i in 0..size {
            for j in 0..size {
                worst[1] = worst[1].max((om.matrix[(i, j)] - reference.omega.matrix[(i, j)]).abs() / scale);
                let want = if i == j { diag[i] } else { 0.0 };
                worst[2] = worst[2].max((lam[(i, j)] - want).abs() / scale);
            }
        }
        let (l, r) = prefactor_identity_check(&e, n)?;
        worst[3] = worst[3].max(rel(l, r));
    }

    let t = 1e-3;
    let mut limit: f64 = 0.0;
    for d in [3u32, 6] {
        let df = d as f64;
        let s = spectrum(&EnsembleKind::KostlanAffine { n: 2, d }.pair_entries(t)?, 2)?;
        for (a, b) in [
            (s.lambda1.unwrap().powf(-0.5) / t, (df * (df - 1.0) / 2.0).sqrt()),
            (s.lambda2.unwrap().powf(-0.5), (2.0 * df).sqrt()),
            (s.lambda3.powf(-0.5) / t, (df * (df - 1.0)).sqrt()),
            (s.lambda4.powf(-0.5) / (t * t), (df * (df - 1.0) * (df - 2.0) / 12.0).sqrt()),
        ] {
            limit = limit.max(rel(a, b));
        }
    }
    let ok = worst[0] <= 1e-9 && worst[1] <= 1e-10 && worst[2] <= 1e-10 && worst[3] <= 1e-10 && limit <= 1e-4;
    Ok((
        ok,
        format!(
            "200 cases: det {:.1e}, Ω {:.1e}, diagonalisation {:.1e}, prefactor {:.1e}; small-t limits {limit:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    ))
}

fn cross_agreement() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut seed = 1200;
    for n in 1..=3 {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let mut run = |kind: EnsembleKind, est: Estimator| {
                seed += 1;
                correlation_mc(&kind, t, SAMPLES, seed, est)
            };
            let s = run(EnsembleKind::IsomGaf { n }, Estimator::Spherical)?;
            let g = run(EnsembleKind::IsomGaf { n }, Estimator::Gaussian)?;
            let w = run(EnsembleKind::NormalizedG { n }, Estimator::Spherical)?;
            worst = worst.max((s.mean - g.mean).abs() / s.stderr.hypot(g.stderr));
            worst = worst.max((s.mean - w.mean).abs() / s.stderr.hypot(w.stderr));
        }
    }
    Ok((worst <= 3.0, format!("12 (n, t) points, max z {worst:.2}")))
}

fn perturbation() -> Outcome {
    let n = 2;
    let a = omega(&pair_covariance(&EnsembleKind::IsomGaf { n }, 1.0)?)?.matrix;
    let eps = [1e-2, 1e-3, 1e-4];
    let mut gaps = Vec::new();
    for &e in &eps {
        let b = Matrix::from_fn(a.dim(), |i, j| a[(i, j)] + if i.abs_diff(j) <= 1 { e } else { 0.0 });
        gaps.push(perturbation_gap(n, &a, &b, SAMPLES, 1300)?.mean);
    }
    let p = ols_slope(&eps.map(f64::ln), &gaps.iter().map(|g| g.ln()).collect::<Vec<_>>());
    Ok((p <= 0.7, format!("gaps {:.2e},{:.2e},{:.2e}, fitted exponent {p:.3} (bound 0.5 + 0.2)", gaps[0], gaps[1], gaps[2])))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("short-range constants", short_range),
        ("finite-degree constant", finite_degree),
        ("curvature dependence", curvature),
        ("long range", long_range),
        ("densities", densities),
        ("universality", universality),
        ("parallelotope moments", parallelotope),
        ("structural identities", structural),
        ("estimator cross-agreement", cross_agreement),
        ("perturbation scaling", perturbation),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {} ({name}): {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
        if !ok {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
