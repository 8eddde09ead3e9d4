use std::f64::consts::PI;
use zerocorr::asymptotics::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let x = a + h * i as f64;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

fn sin_cos_integral(p: i32, q: i32) -> f64 {
    simpson(|x| x.sin().powi(p) * x.cos().powi(q), 0.0, PI / 2.0, 20_000)
}

#[test]
fn parallelotope_moment_matches_beta_quadrature() {
    for n in 1..=4usize {
        for k in 0..=3u32 {
            let mut want = 1.0;
            for i in 1..n as i32 {
                let s = n as i32 - i - 1;
                want *= sin_cos_integral(s, i - 1 + k as i32) / sin_cos_integral(s, i - 1);
            }
            let got = parallelotope_moment(n, k).unwrap();
            assert!((got - want).abs() < 1e-8, "n={n} k={k} {got} {want}");
        }
    }
}

#[test]
fn parallelotope_moment_product_forms_agree() {
    // ∏_{i=1}^{n−1} Γ((i+k)/2)/Γ(i/2) equals ∏_{i=1}^{k} Γ((n−1+i)/2)/Γ(i/2).
    use zerocorr::specfun::gamma;
    for n in 1..=5usize {
        for k in 0..=4u32 {
            let nf = n as f64;
            let mut alt = (gamma(nf / 2.0).unwrap() / gamma((nf + k as f64) / 2.0).unwrap()).powi(n as i32 - 1);
            for i in 1..=k {
                alt *= gamma((nf - 1.0 + i as f64) / 2.0).unwrap() / gamma(i as f64 / 2.0).unwrap();
            }
            assert!((parallelotope_moment(n, k).unwrap() - alt).abs() < 1e-12 * alt.max(1.0));
        }
    }
}

#[test]
fn angular_part_matches_quadrature() {
    for n in 1..=4usize {
        let mut prod = 1.0;
        for j in 1..=n as i32 {
            prod *= simpson(|x| x.sin().powi(2 * n as i32 + 1 - j), 0.0, PI, 20_000);
        }
        let want = prod.powi(n as i32);
        assert!((dn_angular_part(n).unwrap() - want).abs() < 1e-10 * want, "n={n}");
    }
}

#[test]
fn dn_chain_reproduces_short_range_constant() {
    use zerocorr::specfun::gamma;
    for n in 1..=4usize {
        for d in [3u32, 5, 12] {
            let nf = n as f64;
            let df = d as f64;
            let prefactor = (nf * nf * 2f64.ln() + (nf + 1.0) * PI.ln() + nf * gamma(nf + 1.0).unwrap().ln()
                - nf * (nf + 1.0) * (2.0 * PI).ln()
                - 2.0 * gamma((nf + 1.0) / 2.0).unwrap().ln()
                - 1.5 * nf * df.ln())
            .exp();
            let chain = prefactor * dn_constant(n, d).unwrap();
            let direct = short_range_constant(n, Some(d)).unwrap();
            assert!((chain / direct - 1.0).abs() < 1e-12, "n={n} d={d} {chain} {direct}");
        }
    }
}
