//! Special functions shared by every closed-form constant in the crate.

use crate::{Error, Result};
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (Γ(x + 1) form).
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires x > 0, got {x}")));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_pos(1.0 - x));
    }
    if x == x.floor() && x <= 23.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    // Split the power so that t^(z+1/2) does not overflow before e^(-t) tames it.
    let half = t.powf(0.5 * (z + 0.5));
    (2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(z)
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    if x < 20.0 {
        return gamma_pos(x).ln();
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// m!! as a float, exact while the product stays below 2^53.
///
/// (−1)!! = 0!! = 1. Values with m > 300 overflow double precision and are
/// reported as [`Error::Overflow`]; use [`ln_double_factorial`] there.
pub fn double_factorial(m: i64) -> Result<f64> {
    if m < -1 {
        return Err(Error::Domain(format!("double factorial of {m}")));
    }
    if m > 300 {
        return Err(Error::Overflow(format!("{m}!! exceeds double range; use ln_double_factorial")));
    }
    let mut acc = 1.0;
    let mut k = m;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    Ok(acc)
}

/// Exact m!! in 128-bit integers, `None` once it overflows.
pub fn double_factorial_exact(m: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut k = m as u128;
    while k > 1 {
        acc = acc.checked_mul(k)?;
        k -= 2;
    }
    Some(acc)
}

/// ln(m!!) for any m ≥ −1.
pub fn ln_double_factorial(m: i64) -> Result<f64> {
    if m < -1 {
        return Err(Error::Domain(format!("double factorial of {m}")));
    }
    if m <= 1 {
        return Ok(0.0);
    }
    let mf = m as f64;
    if m % 2 == 0 {
        // (2k)!! = 2^k k!
        let k = mf / 2.0;
        Ok(k * 2f64.ln() + ln_gamma_pos(k + 1.0))
    } else {
        // (2k−1)!! = (2k)! / (2^k k!)
        let k = (mf + 1.0) / 2.0;
        Ok(ln_gamma_pos(2.0 * k + 1.0) - k * 2f64.ln() - ln_gamma_pos(k + 1.0))
    }
}

/// Surface area of the unit sphere S^{m−1} ⊂ R^m.
pub fn sphere_area(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("sphere_area requires m >= 1".into()));
    }
    let h = m as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma_pos(h))
}

/// ln of [`sphere_area`].
pub fn ln_sphere_area(m: u32) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("sphere_area requires m >= 1".into()));
    }
    let h = m as f64 / 2.0;
    Ok(2f64.ln() + h * PI.ln() - ln_gamma_pos(h))
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// ln n!
pub fn ln_factorial(n: u32) -> f64 {
    ln_gamma_pos(n as f64 + 1.0)
}

/// E|det G| for an n×n matrix of iid standard normals.
pub fn abs_det_gaussian_mean(n: u32) -> f64 {
    let nf = n as f64;
    2f64.powf(nf / 2.0) * gamma_pos((nf + 1.0) / 2.0) / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_spot_values() {
        assert!(rel(gamma(0.5).unwrap(), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(1.5).unwrap(), PI.sqrt() / 2.0) < 1e-14);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
        assert!(rel(gamma(2.5).unwrap(), 1.329_340_388_179_137) < 1e-14);
    }

    #[test]
    fn gamma_against_factorials() {
        let mut f = 1.0f64;
        for k in 1..=49u32 {
            f *= k as f64;
            // Γ(k + 1) = k!, exact in f64 through 22!, rounded after.
            let x = k as f64 + 1.0;
            let g = gamma_pos(x);
            assert!(rel(g, f) < 1e-13, "k={k}");
            let shifted = gamma_pos(x - 0.5) * (x - 0.5);
            assert!(rel(shifted, gamma_pos(x + 0.5)) < 1e-13);
        }
    }

    #[test]
    fn gamma_rejects_nonpositive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(ln_gamma(0.0).is_err());
    }

    #[test]
    fn ln_gamma_matches_gamma() {
        for &x in &[0.3, 0.5, 1.0, 3.7, 19.9, 20.1, 50.0, 120.5] {
            assert!((ln_gamma(x).unwrap() - gamma_pos(x).ln()).abs() < 1e-12 * gamma_pos(x).ln().abs().max(1.0));
        }
        assert!(rel(ln_gamma(1000.0).unwrap(), 5_905.220_423_209_181) < 1e-14);
    }

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial(0).unwrap(), 1.0);
        assert_eq!(double_factorial(-1).unwrap(), 1.0);
        assert_eq!(double_factorial(5).unwrap(), 15.0);
        assert_eq!(double_factorial(6).unwrap(), 48.0);
        assert!(double_factorial(300).unwrap().is_finite());
        assert!(matches!(double_factorial(301), Err(Error::Overflow(_))));
        assert!(double_factorial(-2).is_err());
        assert_eq!(double_factorial_exact(9), Some(945));
        assert_eq!(double_factorial_exact(400), None);
    }

    #[test]
    fn ln_double_factorial_consistent() {
        for m in [2i64, 3, 10, 11, 57, 120, 299, 300] {
            let direct = double_factorial(m).unwrap().ln();
            assert!((ln_double_factorial(m).unwrap() - direct).abs() < 1e-11 * direct.max(1.0), "m={m}");
        }
        assert!(ln_double_factorial(1000).unwrap().is_finite());
    }

    #[test]
    fn sphere_area_values() {
        assert!(rel(sphere_area(1).unwrap(), 2.0) < 1e-15);
        assert!(rel(sphere_area(2).unwrap(), 2.0 * PI) < 1e-15);
        assert!(rel(sphere_area(3).unwrap(), 4.0 * PI) < 1e-15);
        assert!(rel(sphere_area(4).unwrap(), 2.0 * PI * PI) < 1e-15);
        assert!(sphere_area(0).is_err());
    }

    #[test]
    fn sphere_area_recursion() {
        for m in 3..40u32 {
            let rec = 2.0 * PI * sphere_area(m - 2).unwrap() / (m as f64 - 2.0);
            assert!(rel(sphere_area(m).unwrap(), rec) < 1e-13);
            assert!((ln_sphere_area(m).unwrap() - sphere_area(m).unwrap().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_and_abs_det() {
        assert_eq!(binomial(10, 3), 120.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert!(rel(abs_det_gaussian_mean(1), (2.0 / PI).sqrt()) < 1e-15);
        // E|det| for 2×2 standard normal is 1.
        assert!(rel(abs_det_gaussian_mean(2), 1.0) < 1e-15);
    }

    proptest! {
        #[test]
        fn gamma_recurrence(x in 0.5f64..40.0) {
            let lhs = gamma(x + 1.0).unwrap();
            let rhs = x * gamma(x).unwrap();
            prop_assert!(rel(lhs, rhs) < 1e-12);
        }

        #[test]
        fn reflection_formula(x in 0.01f64..0.99) {
            let lhs = gamma(x).unwrap() * gamma(1.0 - x).unwrap();
            prop_assert!(rel(lhs, PI / (PI * x).sin()) < 1e-13);
        }
    }
}
