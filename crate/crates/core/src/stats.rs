//! Statistical test utilities shared by the experiment and acceptance layers:
//! Kolmogorov–Smirnov tests, chi-square goodness of fit for Poisson counts,
//! empirical characteristic functions, and a Chambers–Mallows–Stuck stable
//! sampler used as a synthetic oracle.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Survival function of the Kolmogorov distribution, `Q(x) = 2 Σ (-1)^{k-1} e^{-2 k^2 x^2}`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsTest> {
    if samples.len() < 8 {
        return Err(Error::DegenerateSample(
            "KS test needs at least 8 samples".to_string(),
        ));
    }
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - f).abs());
    }
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

/// Two-sample Kolmogorov–Smirnov test (asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.len() < 8 || b.len() < 8 {
        return Err(Error::DegenerateSample(
            "two-sample KS needs at least 8 samples each".to_string(),
        ));
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|u, v| u.total_cmp(v));
    ys.sort_by(|u, v| u.total_cmp(v));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n as f64 * m as f64) / (n as f64 + m as f64);
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_sf(n_eff.sqrt() * d),
    })
}

#[derive(Debug, Clone)]
pub struct GofTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square goodness-of-fit of integer counts against a Poisson law.
///
/// Bins `0..` are merged from the right until every bin has expected count
/// at least 5.
pub fn poisson_gof(samples: &[u64], mu: f64) -> Result<GofTest> {
    if samples.len() < 50 {
        return Err(Error::DegenerateSample(
            "Poisson GOF needs at least 50 samples".to_string(),
        ));
    }
    let n = samples.len() as f64;
    let max_x = *samples.iter().max().expect("non-empty") as usize;
    let mut observed = vec![0.0f64; max_x + 2];
    for &s in samples {
        observed[s as usize] += 1.0;
    }
    // expected[x] = n * pmf(x); last slot holds the right tail
    let mut expected: Vec<f64> = (0..=max_x)
        .map(|x| n * poisson_pmf(x as u64, mu))
        .collect();
    let tail = n - expected.iter().sum::<f64>();
    expected.push(tail.max(0.0));

    let mut obs_bins = Vec::new();
    let mut exp_bins = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (o, e) in observed.iter().zip(expected.iter()) {
        acc_o += o;
        acc_e += e;
        if acc_e >= 5.0 {
            obs_bins.push(acc_o);
            exp_bins.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        match exp_bins.last_mut() {
            Some(last) => {
                *last += acc_e;
                *obs_bins.last_mut().expect("paired") += acc_o;
            }
            None => {
                return Err(Error::DegenerateSample(
                    "Poisson GOF: all mass in one bin".to_string(),
                ))
            }
        }
    }
    if exp_bins.len() < 2 {
        return Err(Error::DegenerateSample(
            "Poisson GOF: fewer than 2 usable bins".to_string(),
        ));
    }
    let statistic: f64 = obs_bins
        .iter()
        .zip(exp_bins.iter())
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = exp_bins.len() - 1;
    Ok(GofTest {
        statistic,
        dof,
        p_value: gamma_ur(dof as f64 / 2.0, statistic / 2.0),
    })
}

/// Poisson pmf evaluated through log-gamma; `mu = 0` degenerates to a point mass at 0.
pub fn poisson_pmf(x: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if x == 0 { 1.0 } else { 0.0 };
    }
    poisson_ln_pmf(x, mu).exp()
}

pub fn poisson_ln_pmf(x: u64, mu: f64) -> f64 {
    let xf = x as f64;
    -mu + xf * mu.ln() - ln_gamma(xf + 1.0)
}

/// Empirical characteristic function `n^{-1} Σ exp(i θ x_j)`.
pub fn empirical_cf(samples: &[f64], theta: f64) -> Complex64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for &x in samples {
        let (s, c) = (theta * x).sin_cos();
        re += c;
        im += s;
    }
    let n = samples.len() as f64;
    Complex64::new(re / n, im / n)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn pearson_correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let n = a.len() as f64;
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1.0);
    cov / (sa * sb)
}

pub fn median_abs(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Chambers–Mallows–Stuck sampler for a standard stable law S(alpha, beta; 1)
/// with characteristic function
/// `exp(-|θ|^α (1 - i β sgn θ tan(πα/2)))`, for `alpha ∈ (0,2) \ {1}`.
///
/// Synthetic oracle for the tail-index and CF-distance checks.
pub fn sample_stable<R: Rng>(alpha: f64, beta: f64, n: usize, rng: &mut R) -> Vec<f64> {
    assert!(alpha > 0.0 && alpha < 2.0 && (alpha - 1.0).abs() > 1e-9);
    assert!((-1.0..=1.0).contains(&beta));
    let half_pi = std::f64::consts::FRAC_PI_2;
    let zeta = beta * (half_pi * alpha).tan();
    let b0 = zeta.atan() / alpha;
    let s0 = (1.0 + zeta * zeta).powf(0.5 / alpha);
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(-half_pi..half_pi);
            let w: f64 = -(1.0 - rng.gen::<f64>()).ln(); // Exp(1)
            let w = w.max(1e-300);
            s0 * (alpha * (u + b0)).sin() / u.cos().powf(1.0 / alpha)
                * ((u - alpha * (u + b0)).cos() / w).powf((1.0 - alpha) / alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn normal_cdf_symmetry() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn ks_accepts_uniform() {
        let mut rng = stream_rng(11, &[0]);
        let xs: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let t = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(t.p_value > 0.01, "p = {}", t.p_value);
    }

    #[test]
    fn ks_rejects_shifted() {
        let mut rng = stream_rng(11, &[1]);
        let xs: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>() + 0.08).collect();
        let t = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(t.p_value < 1e-4, "p = {}", t.p_value);
    }

    #[test]
    fn two_sample_ks_same_law() {
        let mut rng = stream_rng(12, &[0]);
        let xs: Vec<f64> = (0..1500).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let t = ks_two_sample(&xs, &ys).unwrap();
        assert!(t.p_value > 0.01, "p = {}", t.p_value);
    }

    #[test]
    fn poisson_gof_accepts_poisson() {
        use rand_distr::{Distribution, Poisson};
        let mut rng = stream_rng(13, &[0]);
        let pois = Poisson::new(3.0).unwrap();
        let xs: Vec<u64> = (0..10_000).map(|_| pois.sample(&mut rng) as u64).collect();
        let g = poisson_gof(&xs, 3.0).unwrap();
        assert!(g.p_value > 0.01, "p = {}", g.p_value);
    }

    #[test]
    fn poisson_gof_rejects_wrong_mean() {
        use rand_distr::{Distribution, Poisson};
        let mut rng = stream_rng(13, &[1]);
        let pois = Poisson::new(3.5).unwrap();
        let xs: Vec<u64> = (0..10_000).map(|_| pois.sample(&mut rng) as u64).collect();
        let g = poisson_gof(&xs, 3.0).unwrap();
        assert!(g.p_value < 1e-6, "p = {}", g.p_value);
    }

    #[test]
    fn empirical_cf_of_constant() {
        let xs = vec![2.0; 100];
        let v = empirical_cf(&xs, 0.7);
        assert!((v - Complex64::new((1.4f64).cos(), (1.4f64).sin())).norm() < 1e-12);
    }

    #[test]
    fn stable_sampler_matches_cf() {
        // Empirical CF of CMS draws vs the target stable CF at a few θ.
        let alpha = 1.5;
        let beta = 1.0;
        let mut rng = stream_rng(14, &[0]);
        let xs = sample_stable(alpha, beta, 60_000, &mut rng);
        for &theta in &[0.3_f64, 0.7, 1.3] {
            let target = (-theta.powf(alpha)
                * Complex64::new(
                    1.0,
                    -beta * (std::f64::consts::FRAC_PI_2 * alpha).tan(),
                ))
            .exp();
            let emp = empirical_cf(&xs, theta);
            assert!(
                (emp - target).norm() < 0.02,
                "theta {theta}: emp {emp}, target {target}"
            );
        }
    }
}
