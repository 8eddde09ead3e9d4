use std::f64::consts::PI;
use zerocorr::empirical::*;
use zerocorr::ensembles::EnsembleKind;
use zerocorr::mc::{correlation_mc, Estimator};

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn counts(samples: &[RootSample]) -> Vec<f64> {
    samples.iter().map(|s| s.roots.len() as f64).collect()
}

#[test]
fn kostlan_mean_root_count_is_sqrt_d() {
    for d in [4u32, 25, 100] {
        let s = sample_many(2000, 11, |seed| sample_kostlan_roots(d, seed)).unwrap();
        let (mean, se) = mean_and_stderr(&counts(&s));
        assert!((mean - (d as f64).sqrt()).abs() <= 3.0 * se, "d={d}: {mean} ± {se}");
        assert!(s.iter().all(|r| r.roots.windows(2).all(|w| w[0] <= w[1])));
    }
}

#[test]
fn kostlan_roots_are_polished() {
    for seed in 0..200 {
        let mut rng = zerocorr::rng::substream(seed, 0);
        let c = kostlan_coefficients(40, &mut rng);
        let roots = real_roots(&c).unwrap();
        for r in &roots {
            let p = c.iter().rev().fold(0.0, |acc, a| acc * r + a);
            assert!(p.abs() <= 1e-8 * eval_scale(&c, *r), "seed {seed} root {r}");
        }
        assert_eq!(roots, sample_kostlan_roots(40, seed).unwrap().roots);
    }
}

#[test]
fn gaf_mean_count_matches_density() {
    let s = sample_many(2000, 5, |seed| sample_gaf_roots(80, 3.0, seed)).unwrap();
    assert!(s.iter().all(|r| r.warnings.is_empty()));
    let (mean, se) = mean_and_stderr(&counts(&s));
    assert!((mean - 6.0 / PI).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn truncation_warnings() {
    let s = sample_gaf_roots(10, 3.0, 0).unwrap();
    assert_eq!(s.warnings.len(), 2);
    assert!(gaf_tail(80, 3.0) < 1e-12);
    assert!(gaf_tail(10, 3.0) > 1e-12);
}

#[test]
fn poisson_control_is_calibrated_on_the_projective_line() {
    let samples = poisson_control(10.0 / PI, PairDomain::Projective, 2000, 17);
    let edges: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
    let h = pair_correlation_estimate(&samples, PairDomain::Projective, &edges).unwrap();
    for b in 0..10 {
        assert!((h.k_hat[b] - 1.0).abs() <= 3.0 * h.stderr[b], "bin {b}: {} ± {}", h.k_hat[b], h.stderr[b]);
    }
    assert!(h.counts.iter().sum::<u64>() > 0);
}

#[test]
fn empty_bins_have_infinite_stderr() {
    let samples: Vec<RootSample> = (0..500)
        .map(|i| RootSample { ensemble: "two".into(), roots: vec![-0.05, 0.05], seed: i, warnings: vec![] })
        .collect();
    let h = pair_correlation_estimate(&samples, PairDomain::Window { half_width: 1.0 }, &[0.0, 0.05, 0.2, 0.3]).unwrap();
    assert_eq!(h.counts, vec![0, 1000, 0]);
    assert!(h.stderr[0].is_infinite() && h.stderr[2].is_infinite());
    assert!(h.stderr[1].is_finite());
}

/// Weighted least-squares slope of y = s x through the origin.
fn slope(xs: &[f64], ys: &[f64], se: &[f64]) -> f64 {
    let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
    let num: f64 = (0..xs.len()).map(|i| w[i] * xs[i] * ys[i]).sum();
    let den: f64 = (0..xs.len()).map(|i| w[i] * xs[i] * xs[i]).sum();
    num / den
}

#[test]
fn kostlan_repulsion_slope_matches_kac_rice() {
    let d = 100;
    let samples = sample_many(2000, 23, |seed| sample_kostlan_roots(d, seed)).unwrap();
    let edges: Vec<f64> = (0..=6).map(|i| 0.01 * i as f64).collect();
    let h = pair_correlation_estimate(&samples, PairDomain::Projective, &edges).unwrap();
    let centers = h.centers();
    // Skip the first bin: almost empty, stderr dominated by a handful of pairs.
    let emp = slope(&centers[1..], &h.k_hat[1..], &h.stderr[1..]);
    let kind = EnsembleKind::KostlanAffine { n: 1, d };
    let mc: Vec<_> = centers
        .iter()
        .map(|&c| correlation_mc(&kind, projective_to_affine(c), 200_000, 1, Estimator::Spherical).unwrap())
        .collect();
    let ks: Vec<f64> = mc.iter().map(|e| e.mean).collect();
    let ses: Vec<f64> = mc.iter().map(|e| e.stderr).collect();
    let theory = slope(&centers[1..], &ks[1..], &ses[1..]);
    assert!(h.k_hat[0] < h.k_hat[5]);
    assert!((emp / theory - 1.0).abs() <= 0.15, "empirical {emp}, Kac-Rice {theory}");
}

#[test]
fn gaf_pair_correlation_matches_kac_rice() {
    let hw = 4.0;
    let samples = sample_many(2000, 31, |seed| sample_gaf_roots(128, hw, seed)).unwrap();
    let edges: Vec<f64> = (0..=9).map(|i| 0.2 + 0.2 * i as f64).collect();
    let h = pair_correlation_estimate(&samples, PairDomain::Window { half_width: hw }, &edges).unwrap();
    for (b, &t) in h.centers().iter().enumerate() {
        let k = correlation_mc(&EnsembleKind::IsomGaf { n: 1 }, t, 200_000, 3, Estimator::Spherical).unwrap();
        let tol = 3.0 * h.stderr[b].hypot(k.stderr);
        assert!((h.k_hat[b] - k.mean).abs() <= tol, "t={t}: empirical {} ± {}, Kac-Rice {}", h.k_hat[b], h.stderr[b], k.mean);
    }
}

#[test]
fn gaf_long_range_is_uncorrelated() {
    let hw = 6.0;
    let samples = sample_many(1000, 41, |seed| sample_gaf_roots(288, hw, seed)).unwrap();
    let edges = [3.0, 4.0, 5.0];
    let h = pair_correlation_estimate(&samples, PairDomain::Window { half_width: hw }, &edges).unwrap();
    for b in 0..2 {
        assert!((h.k_hat[b] - 1.0).abs() <= 3.0 * h.stderr[b], "bin {b}: {} ± {}", h.k_hat[b], h.stderr[b]);
    }
}
