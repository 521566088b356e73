//! Charlier polynomial calculus on Poisson distributions: evaluation by
//! recurrence, coefficient extraction for a subordinator, rank, the bivariate
//! Poisson Mehler expansion, subordinated covariance series with certified
//! remainder bounds, and the first Hermite coefficient.

use crate::error::{Error, Result};
use crate::quad::{gauss_hermite, KahanSum};
use crate::rng::stream_rng;
use crate::stats::{poisson_ln_pmf, poisson_pmf};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Tolerance below which a Charlier coefficient counts as zero for the rank,
/// relative to `sqrt(E G(N)^2)`.
const RANK_TOL: f64 = 1e-10;

/// Poisson sums are truncated where the remaining mass is below this.
const MASS_TOL: f64 = 1e-12;

/// Charlier basis for a Poisson(mu) marginal, truncated where the pmf mass
/// beyond `[x_lo, x_hi]` is below 1e-12.
#[derive(Debug, Clone, Copy)]
pub struct CharlierBasis {
    pub mu: f64,
    pub max_order: usize,
    x_lo: u64,
    x_hi: u64,
}

impl CharlierBasis {
    pub fn new(mu: f64, max_order: usize) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Charlier basis needs mu > 0, got {mu}"
            )));
        }
        if max_order == 0 {
            return Err(Error::InvalidParameter("max order must be >= 1".into()));
        }
        // x_hi = ceil(mu + 12 sqrt(mu) + 40) covers the right tail to < 1e-12;
        // the matching left band keeps large-mu sums affordable.
        let x_hi = (mu + 12.0 * mu.sqrt() + 40.0).ceil() as u64;
        let x_lo = (mu - 12.0 * mu.sqrt() - 40.0).floor().max(0.0) as u64;
        Ok(Self {
            mu,
            max_order,
            x_lo,
            x_hi,
        })
    }

    pub fn x_max(&self) -> u64 {
        self.x_hi
    }

    pub fn truncation_range(&self) -> (u64, u64) {
        (self.x_lo, self.x_hi)
    }

    /// `P_k(x; mu)` by the three-term recurrence
    /// `P_{k+1} = (x - mu - k) P_k - k mu P_{k-1}`, `P_0 = 1`, `P_1 = x - mu`.
    ///
    /// The recurrence follows from the generating-function identity
    /// `(1+u) ∂P/∂u = (x - (1+u)mu) P` and is gated against a direct
    /// Taylor-extraction oracle in the tests; the pmf-ratio definition is
    /// avoided because backward differences of the pmf cancel catastrophically
    /// at large x.
    pub fn poly(&self, k: usize, x: f64) -> f64 {
        charlier_poly(self.mu, k, x)
    }

    /// All rows `P_0(x), ..., P_K(x)` at once.
    fn poly_row(&self, x: f64, out: &mut [f64]) {
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = x - self.mu;
        for k in 1..out.len() - 1 {
            let kf = k as f64;
            out[k + 1] = (x - self.mu - kf) * out[k] - kf * self.mu * out[k - 1];
        }
    }

    /// Charlier coefficients `c_G(k; mu) = mu^{-k} E[G(N) P_k(N; mu)]`,
    /// k = 0..=K, by exact truncated summation over the Poisson pmf.
    pub fn coeffs_proj<G: Fn(u64) -> f64>(&self, g: G, max_k: usize) -> Result<Vec<f64>> {
        let mut acc: Vec<KahanSum> = vec![KahanSum::new(); max_k + 1];
        let mut row = vec![0.0; max_k + 1];
        for x in self.x_lo..=self.x_hi {
            let p = poisson_pmf(x, self.mu);
            if p == 0.0 {
                continue;
            }
            let gx = g(x);
            self.poly_row(x as f64, &mut row);
            for k in 0..=max_k {
                acc[k].add(gx * row[k] * p);
            }
        }
        let mut out = Vec::with_capacity(max_k + 1);
        for (k, a) in acc.iter().enumerate() {
            let v = a.value() * self.mu.powi(-(k as i32));
            if !v.is_finite() {
                return Err(Error::Numerical {
                    context: "charlier coefficients",
                    detail: format!("G·P_{k} overflowed the representable range"),
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Charlier coefficients by the forward-difference form
    /// `c_G(k; mu) = E[D_+^k G(N)]`.
    pub fn coeffs_diff<G: Fn(u64) -> f64>(&self, g: G, max_k: usize) -> Result<Vec<f64>> {
        // G on [x_lo, x_hi + K], differenced in place K times
        let n = (self.x_hi - self.x_lo) as usize + max_k + 1;
        let mut values: Vec<f64> = (0..n).map(|i| g(self.x_lo + i as u64)).collect();
        let mut out = Vec::with_capacity(max_k + 1);
        for k in 0..=max_k {
            if k > 0 {
                for i in 0..values.len() - 1 {
                    values[i] = values[i + 1] - values[i];
                }
                values.pop();
            }
            let mut acc = KahanSum::new();
            for (i, &dk) in values.iter().enumerate() {
                let x = self.x_lo + i as u64;
                if x > self.x_hi {
                    break;
                }
                acc.add(dk * poisson_pmf(x, self.mu));
            }
            let v = acc.value();
            if !v.is_finite() {
                return Err(Error::Numerical {
                    context: "charlier coefficients (difference form)",
                    detail: format!("D_+^{k} G overflowed"),
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Charlier rank `k*(G; mu) = min{k >= 1 : c_G(k; mu) != 0}`, with "zero"
    /// meaning `|c| <= 1e-10 sqrt(E G(N)^2)`.
    pub fn rank<G: Fn(u64) -> f64 + Copy>(&self, g: G) -> Result<usize> {
        let coeffs = self.coeffs_proj(g, self.max_order)?;
        let scale = self.second_moment(g).sqrt();
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            if c.abs() > RANK_TOL * scale {
                return Ok(k);
            }
        }
        Err(Error::UndefinedRank {
            max_order: self.max_order,
        })
    }

    /// `E G(N)^2` by truncated summation.
    pub fn second_moment<G: Fn(u64) -> f64>(&self, g: G) -> f64 {
        let mut acc = KahanSum::new();
        for x in self.x_lo..=self.x_hi {
            let gx = g(x);
            acc.add(gx * gx * poisson_pmf(x, self.mu));
        }
        acc.value()
    }

    /// `E G(N)` by truncated summation.
    pub fn mean<G: Fn(u64) -> f64>(&self, g: G) -> f64 {
        let mut acc = KahanSum::new();
        for x in self.x_lo..=self.x_hi {
            acc.add(g(x) * poisson_pmf(x, self.mu));
        }
        acc.value()
    }
}

/// Free-function form of the Charlier recurrence (see [`CharlierBasis::poly`]).
pub fn charlier_poly(mu: f64, k: usize, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x - mu;
    for j in 1..k {
        let jf = j as f64;
        let next = (x - mu - jf) * cur - jf * mu * prev;
        prev = cur;
        cur = next;
    }
    cur
}

// ---------------------------------------------------------------------------
// Bivariate Poisson
// ---------------------------------------------------------------------------

/// Bivariate Poisson pair `N_i = M_i + M_3` built from independent Poisson
/// components with means `mu1 - mu3`, `mu2 - mu3`, `mu3`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BivariatePoisson {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl BivariatePoisson {
    pub fn new(mu1: f64, mu2: f64, mu3: f64) -> Result<Self> {
        if !(mu1 > 0.0 && mu2 > 0.0) {
            return Err(Error::InvalidParameter(
                "bivariate Poisson needs mu1, mu2 > 0".into(),
            ));
        }
        if !(0.0..mu1.min(mu2)).contains(&mu3) {
            return Err(Error::InvalidParameter(format!(
                "mu3 must lie in [0, min(mu1, mu2)), got {mu3}"
            )));
        }
        Ok(Self { mu1, mu2, mu3 })
    }

    /// Correlation `rho_12 = mu3 / sqrt(mu1 mu2)`.
    pub fn rho(&self) -> f64 {
        self.mu3 / (self.mu1 * self.mu2).sqrt()
    }

    /// Joint pmf by the convolution sum
    /// `Σ_m p(m; mu3) p(x-m; mu1-mu3) p(y-m; mu2-mu3)`.
    pub fn pmf_direct(&self, x: u64, y: u64) -> f64 {
        let m_max = x.min(y);
        let mut acc = KahanSum::new();
        for m in 0..=m_max {
            acc.add(
                poisson_pmf(m, self.mu3)
                    * poisson_pmf(x - m, self.mu1 - self.mu3)
                    * poisson_pmf(y - m, self.mu2 - self.mu3),
            );
        }
        acc.value()
    }

    /// Truncated Mehler expansion
    /// `p(x;mu1) p(y;mu2) Σ_{k<=K} rho^k/k! P_k(x;mu1) P_k(y;mu2)`,
    /// together with a rigorous truncation bound from
    /// `|P_k(x;mu)| <= (x+mu)^k`.
    pub fn pmf_mehler(&self, x: u64, y: u64, max_k: usize) -> Result<(f64, f64)> {
        let rho = self.rho();
        if rho >= 1.0 - 1e-6 {
            return Err(Error::IllConditioned { rho });
        }
        let ln_px = poisson_ln_pmf(x, self.mu1);
        let ln_py = poisson_ln_pmf(y, self.mu2);
        let mut acc = KahanSum::new();
        let mut pk_x_prev = 1.0;
        let mut pk_y_prev = 1.0;
        let mut pk_x = x as f64 - self.mu1;
        let mut pk_y = y as f64 - self.mu2;
        let mut rho_k_over_fact = 1.0; // rho^k / k!
        acc.add(1.0);
        for k in 1..=max_k {
            let kf = k as f64;
            rho_k_over_fact *= rho / kf;
            acc.add(rho_k_over_fact * pk_x * pk_y);
            // advance both recurrences
            let next_x = (x as f64 - self.mu1 - kf) * pk_x - kf * self.mu1 * pk_x_prev;
            let next_y = (y as f64 - self.mu2 - kf) * pk_y - kf * self.mu2 * pk_y_prev;
            pk_x_prev = pk_x;
            pk_y_prev = pk_y;
            pk_x = next_x;
            pk_y = next_y;
        }
        let series = acc.value();
        let value = (ln_px + ln_py).exp() * series;
        // tail bound: |P_k(x;mu)| <= (x+mu)^k gives
        // Σ_{k>K} (rho A)^k / k! <= (rho A)^{K+1}/(K+1)! e^{rho A},
        // A = (x + mu1)(y + mu2)
        let a = (x as f64 + self.mu1) * (y as f64 + self.mu2);
        let ln_tail = if rho * a > 0.0 {
            ((max_k + 1) as f64) * (rho * a).ln() - ln_factorial(max_k + 1)
                + rho * a
                + ln_px
                + ln_py
        } else {
            f64::NEG_INFINITY
        };
        Ok((value, ln_tail.exp()))
    }

    /// Conditional transition pmf `p(y | x) = p(x, y)/p(x; mu)` of the
    /// stationary Poisson AR(1) chain (requires `mu1 = mu2`).
    pub fn inar1_transition(&self, x: u64, y: u64) -> Result<f64> {
        if (self.mu1 - self.mu2).abs() > 0.0 {
            return Err(Error::InvalidParameter(
                "INAR(1) transition needs mu1 = mu2".into(),
            ));
        }
        let px = poisson_pmf(x, self.mu1);
        if px <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "p(x; mu) vanishes at x = {x}"
            )));
        }
        Ok(self.pmf_direct(x, y) / px)
    }

    /// Samples `n` pairs `(M_1 + M_3, M_2 + M_3)`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<(u64, u64)> {
        let mut rng = stream_rng(seed, &[0xB1AA]);
        let draw = |mean: f64, rng: &mut rand_chacha::ChaCha8Rng| -> u64 {
            if mean == 0.0 {
                0
            } else {
                Poisson::new(mean).expect("positive mean").sample(rng) as u64
            }
        };
        (0..n)
            .map(|_| {
                let m1 = draw(self.mu1 - self.mu3, &mut rng);
                let m2 = draw(self.mu2 - self.mu3, &mut rng);
                let m3 = draw(self.mu3, &mut rng);
                (m1 + m3, m2 + m3)
            })
            .collect()
    }
}

fn ln_factorial(k: usize) -> f64 {
    statrs::function::gamma::ln_gamma(k as f64 + 1.0)
}

/// Subordinated covariance `E G1(N1) G2(N2) - E G1 E G2` through the series
/// `Σ_{k>=1} c_{G1}(k;mu1) c_{G2}(k;mu2) mu3^k / k!`.
#[derive(Debug, Clone)]
pub struct SubordinatedCovariance {
    /// Partial sum for k = 1..=K.
    pub value: f64,
    /// Geometric remainder bound after K.
    pub remainder_bound: f64,
    /// Leading term `c1(k*) c2(k*) mu3^{k*} / k*!`.
    pub leading_term: f64,
    /// Remainder bound after the leading index
    /// `rho^{k*+1}/(1-rho) sqrt(E G1^2 E G2^2)`.
    pub post_leading_bound: f64,
    pub k_star: usize,
}

/// Covariance of `(G1(N1), G2(N2))` under a bivariate Poisson dependence,
/// summed to order `max_k`, with the geometric remainder bounds.
pub fn covariance_subordinated<G1, G2>(
    biv: &BivariatePoisson,
    g1: G1,
    g2: G2,
    max_k: usize,
) -> Result<SubordinatedCovariance>
where
    G1: Fn(u64) -> f64 + Copy,
    G2: Fn(u64) -> f64 + Copy,
{
    let basis1 = CharlierBasis::new(biv.mu1, max_k)?;
    let basis2 = CharlierBasis::new(biv.mu2, max_k)?;
    let c1 = basis1.coeffs_proj(g1, max_k)?;
    let c2 = basis2.coeffs_proj(g2, max_k)?;
    let m1 = basis1.second_moment(g1);
    let m2 = basis2.second_moment(g2);
    let rho = biv.rho();
    let norm = (m1 * m2).sqrt();

    let scale1 = m1.sqrt();
    let scale2 = m2.sqrt();
    let mut k_star = 0usize;
    for k in 1..=max_k {
        if c1[k].abs() > RANK_TOL * scale1 || c2[k].abs() > RANK_TOL * scale2 {
            k_star = k;
            break;
        }
    }
    if k_star == 0 {
        return Err(Error::UndefinedRank { max_order: max_k });
    }

    let mut acc = KahanSum::new();
    let mut mu3_pow_over_fact = 1.0;
    let mut leading = 0.0;
    for k in 1..=max_k {
        mu3_pow_over_fact *= biv.mu3 / k as f64;
        let term = c1[k] * c2[k] * mu3_pow_over_fact;
        if k == k_star {
            leading = term;
        }
        acc.add(term);
    }
    let geo = |from: usize| -> f64 {
        if rho <= 0.0 {
            0.0
        } else {
            rho.powi(from as i32) / (1.0 - rho) * norm
        }
    };
    Ok(SubordinatedCovariance {
        value: acc.value(),
        remainder_bound: geo(max_k + 1),
        leading_term: leading,
        post_leading_bound: geo(k_star + 1),
        k_star,
    })
}

// ---------------------------------------------------------------------------
// Hermite side: the first coefficient and the coefficient limit
// ---------------------------------------------------------------------------

/// Gauss–Hermite node count for `hermite_h1`; 128 >= the required 64 and
/// keeps kinked subordinators (e.g. `min(x,1)`-type) below 1e-4 error.
const HERMITE_NODES: usize = 128;

/// First Hermite coefficient `h_{G,mu}(1) = mu^{-1} E[G(Z_mu) Z_mu]`,
/// `Z_mu ~ N(0, mu)`, by Gauss–Hermite quadrature.
pub fn hermite_h1<G: Fn(f64) -> f64>(g: G, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("hermite_h1 needs mu > 0".into()));
    }
    let (x, w) = gauss_hermite(HERMITE_NODES);
    let scale = (2.0 * mu).sqrt();
    let mut num = KahanSum::new();
    let mut sq = KahanSum::new();
    for (xi, wi) in x.iter().zip(w.iter()) {
        let z = scale * xi;
        let gz = g(z);
        num.add(wi * gz * z);
        sq.add(wi * gz * gz);
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let second_moment = sq.value() / sqrt_pi;
    if !second_moment.is_finite() {
        return Err(Error::Numerical {
            context: "hermite_h1",
            detail: "E G(Z)^2 diverged under the declared growth bound".into(),
        });
    }
    Ok(num.value() / sqrt_pi / mu)
}

/// One entry of the coefficient-limit sequence: `sqrt(M) c_{G,M}(1)` where
/// `c_{G,M}(1) = (mu M)^{-1} E[G((N - mu M)/sqrt(M)) (N - mu M)]`,
/// `N ~ Poisson(mu M)`, by exact truncated summation.
pub fn sqrt_m_c1<G: Fn(f64) -> f64>(g: G, mu: f64, m: f64) -> Result<f64> {
    let mu_m = mu * m;
    let basis = CharlierBasis::new(mu_m, 1)?;
    let (lo, hi) = basis.truncation_range();
    let mut acc = KahanSum::new();
    for x in lo..=hi {
        let centered = x as f64 - mu_m;
        acc.add(g(centered / m.sqrt()) * centered * poisson_pmf(x, mu_m));
    }
    let v = m.sqrt() / mu_m * acc.value();
    if !v.is_finite() {
        return Err(Error::Numerical {
            context: "sqrt_m_c1",
            detail: "coefficient sum overflowed".into(),
        });
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct CoeffLimit {
    /// `(M, sqrt(M) c_{G,M}(1))` along the requested ladder.
    pub sequence: Vec<(f64, f64)>,
    /// Gauss–Hermite value of `h_{G,mu}(1)`.
    pub h1: f64,
    /// `|sequence.last() - h1|`.
    pub final_gap: f64,
}

/// Tracks `sqrt(M) c_{G,M}(1) -> h_{G,mu}(1)` along an M ladder.
pub fn coeff_limit_check<G: Fn(f64) -> f64 + Copy>(
    g: G,
    mu: f64,
    m_list: &[f64],
) -> Result<CoeffLimit> {
    let h1 = hermite_h1(g, mu)?;
    let mut sequence = Vec::with_capacity(m_list.len());
    for &m in m_list {
        sequence.push((m, sqrt_m_c1(g, mu, m)?));
    }
    let final_gap = sequence
        .last()
        .map(|&(_, v)| (v - h1).abs())
        .unwrap_or(f64::NAN);
    Ok(CoeffLimit {
        sequence,
        h1,
        final_gap,
    })
}

// ---------------------------------------------------------------------------
// Subordinators
// ---------------------------------------------------------------------------

/// The closed set of subordinators the experiment layer accepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubordinatorKind {
    /// `G(x) = x`.
    Identity,
    /// `G(x) = exp(a x)`.
    Exp { a: f64 },
    /// `G(x) = min(x, 1)` (Boolean-model indicator).
    MinOne,
}

/// A subordinator with its declared exponential growth bound
/// `|G(x)| <= c1 exp(c2 |x|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subordinator {
    #[serde(flatten)]
    pub kind: SubordinatorKind,
    pub c1: f64,
    pub c2: f64,
}

impl Subordinator {
    pub fn identity() -> Self {
        Self {
            kind: SubordinatorKind::Identity,
            c1: 1.0,
            c2: 1.0,
        }
    }

    pub fn exp(a: f64) -> Self {
        Self {
            kind: SubordinatorKind::Exp { a },
            c1: 1.0,
            c2: a.abs(),
        }
    }

    pub fn min_one() -> Self {
        Self {
            kind: SubordinatorKind::MinOne,
            c1: 1.0,
            c2: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            SubordinatorKind::Identity => x,
            SubordinatorKind::Exp { a } => (a * x).exp(),
            SubordinatorKind::MinOne => x.min(1.0),
        }
    }

    /// Checks the declared bound on the truncation range of a basis.
    pub fn validate_growth(&self, basis: &CharlierBasis) -> Result<()> {
        let (lo, hi) = basis.truncation_range();
        for x in lo..=hi {
            let xf = x as f64;
            let bound = self.c1 * (self.c2 * xf.abs()).exp();
            if self.eval(xf).abs() > bound * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "subordinator violates its growth bound at x = {x}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson_correlation;

    /// Taylor-extraction oracle for the recurrence: the generating function
    /// `(1+u)^x e^{-u mu}` has `[u^k] = Σ_j C(x,j) (-mu)^{k-j}/(k-j)!`, so
    /// `P_k(x; mu) = Σ_j C(k,j) x(x-1)...(x-j+1) (-mu)^{k-j}` — an exact
    /// expansion independent of the recurrence path.
    fn charlier_taylor_oracle(mu: f64, k: usize, x: u64) -> f64 {
        let mut sum = 0.0;
        for j in 0..=k {
            let mut binom = 1.0;
            for i in 0..j {
                binom *= (k - i) as f64 / (i + 1) as f64;
            }
            let mut falling = 1.0;
            for i in 0..j {
                if x as usize >= i + 1 {
                    falling *= (x - i as u64) as f64;
                } else {
                    falling = 0.0;
                    break;
                }
            }
            sum += binom * falling * (-mu).powi((k - j) as i32);
        }
        sum
    }

    #[test]
    fn low_order_closed_forms() {
        let mu = 2.7;
        for x in 0..20 {
            let xf = x as f64;
            assert_eq!(charlier_poly(mu, 0, xf), 1.0);
            assert!((charlier_poly(mu, 1, xf) - (xf - mu)).abs() < 1e-12);
            let p2 = xf * xf - (2.0 * mu + 1.0) * xf + mu * mu;
            assert!((charlier_poly(mu, 2, xf) - p2).abs() < 1e-9);
        }
    }

    #[test]
    fn recurrence_matches_taylor_oracle() {
        let mu = 3.0;
        for k in 0..=8 {
            for x in (0..=40).step_by(4) {
                let rec = charlier_poly(mu, k, x as f64);
                let orc = charlier_taylor_oracle(mu, k, x);
                let scale = orc.abs().max(1.0);
                assert!(
                    (rec - orc).abs() < 1e-9 * scale,
                    "k={k} x={x}: {rec} vs {orc}"
                );
            }
        }
    }

    #[test]
    fn orthogonality_grid() {
        // |E P_k P_l - δ_{kl} k! mu^k| < 1e-8 k! mu^k for k,l <= 8
        for &mu in &[0.5, 3.0, 10.0] {
            let basis = CharlierBasis::new(mu, 8).unwrap();
            let (lo, hi) = basis.truncation_range();
            for k in 0..=8usize {
                for l in 0..=8usize {
                    let mut acc = KahanSum::new();
                    for x in lo..=hi {
                        acc.add(
                            basis.poly(k, x as f64)
                                * basis.poly(l, x as f64)
                                * poisson_pmf(x, mu),
                        );
                    }
                    let norm = (1..=k).map(|i| i as f64).product::<f64>() * mu.powi(k as i32);
                    let expect = if k == l { norm } else { 0.0 };
                    let tol = 1e-8 * norm.max(1.0);
                    assert!(
                        (acc.value() - expect).abs() < tol,
                        "mu={mu} k={k} l={l}: {} vs {expect}",
                        acc.value()
                    );
                }
            }
        }
    }

    #[test]
    fn coefficients_of_identity() {
        let basis = CharlierBasis::new(2.0, 6).unwrap();
        let c = basis.coeffs_proj(|x| x as f64, 6).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-10);
        assert!((c[1] - 1.0).abs() < 1e-10);
        for k in 2..=6 {
            assert!(c[k].abs() < 1e-10, "c[{k}] = {}", c[k]);
        }
    }

    #[test]
    fn coefficients_of_exponential() {
        // c_G(k) = (e^a - 1)^k e^{(e^a - 1) mu}
        let (a, mu) = (0.5, 3.0);
        let basis = CharlierBasis::new(mu, 6).unwrap();
        let c = basis.coeffs_proj(|x| (a * x as f64).exp(), 6).unwrap();
        let e = a.exp() - 1.0;
        for (k, &ck) in c.iter().enumerate() {
            let expect = e.powi(k as i32) * (e * mu).exp();
            assert!(
                (ck - expect).abs() < 1e-9 * expect.abs(),
                "k={k}: {ck} vs {expect}"
            );
        }
    }

    #[test]
    fn coefficients_of_boolean_indicator() {
        // G = min(x,1): c_G(0) = 1 - e^{-mu}, c_G(k>=1) = (-1)^{k+1} e^{-mu}
        let mu = 3.0;
        let basis = CharlierBasis::new(mu, 6).unwrap();
        let c = basis
            .coeffs_proj(|x| (x as f64).min(1.0), 6)
            .unwrap();
        assert!((c[0] - (1.0 - (-mu).exp())).abs() < 1e-12);
        for k in 1..=6 {
            let expect = if k % 2 == 1 { 1.0 } else { -1.0 } * (-mu).exp();
            assert!(
                (c[k] - expect).abs() < 1e-10 * expect.abs(),
                "k={k}: {} vs {expect}",
                c[k]
            );
        }
    }

    #[test]
    fn difference_form_matches_projection() {
        let mu = 3.0;
        let basis = CharlierBasis::new(mu, 6).unwrap();
        // exponential: D_+^k G = (e^a - 1)^k e^{ax} gives the same closed form
        let a = 0.5;
        let diff = basis.coeffs_diff(|x| (a * x as f64).exp(), 6).unwrap();
        let proj = basis.coeffs_proj(|x| (a * x as f64).exp(), 6).unwrap();
        for k in 0..=6 {
            assert!(
                (diff[k] - proj[k]).abs() < 1e-9 * proj[k].abs().max(1e-12),
                "k={k}: {} vs {}",
                diff[k],
                proj[k]
            );
        }
        // pseudo-random integer-valued G
        let g = |x: u64| ((x * 2654435761 + 13) % 17) as f64 - 8.0;
        let diff = basis.coeffs_diff(g, 6).unwrap();
        let proj = basis.coeffs_proj(g, 6).unwrap();
        for k in 0..=6 {
            let scale = proj[k].abs().max(1.0);
            assert!(
                (diff[k] - proj[k]).abs() < 1e-9 * scale,
                "k={k}: {} vs {}",
                diff[k],
                proj[k]
            );
        }
    }

    #[test]
    fn constant_function_has_no_higher_coefficients() {
        let basis = CharlierBasis::new(1.3, 5).unwrap();
        let c = basis.coeffs_diff(|_| 4.2, 5).unwrap();
        assert!((c[0] - 4.2).abs() < 1e-12);
        for k in 1..=5 {
            assert_eq!(c[k], 0.0);
        }
    }

    #[test]
    fn rank_examples() {
        let mu = 3.0;
        let basis = CharlierBasis::new(mu, 8).unwrap();
        assert_eq!(basis.rank(|x| x as f64).unwrap(), 1);
        assert_eq!(basis.rank(|x| (x as f64).min(1.0)).unwrap(), 1);
        // G = P_2 has rank 2 by orthogonality
        assert_eq!(basis.rank(|x| charlier_poly(mu, 2, x as f64)).unwrap(), 2);
        // constant: no k >= 1 coefficient
        assert!(matches!(
            basis.rank(|_| 1.0),
            Err(Error::UndefinedRank { .. })
        ));
    }

    #[test]
    fn parseval_for_bounded_g() {
        // Σ_k c_G(k)^2 mu^k / k! = E G^2 (the k=0 term is (E G)^2)
        let mu = 3.0;
        let basis = CharlierBasis::new(mu, 40).unwrap();
        let g = |x: u64| (x as f64).min(4.0);
        let c = basis.coeffs_proj(g, 40).unwrap();
        let mut sum = 0.0;
        let mut pow_over_fact = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                pow_over_fact *= mu / k as f64;
            }
            sum += ck * ck * pow_over_fact;
        }
        let target = basis.second_moment(g);
        assert!(
            (sum - target).abs() < 1e-6 * target,
            "parseval {sum} vs {target}"
        );
    }

    #[test]
    fn coefficient_bound() {
        // |c_G(k)| <= sqrt(k!/mu^k) sqrt(E G^2)
        let mu = 3.0;
        let basis = CharlierBasis::new(mu, 10).unwrap();
        let g = |x: u64| ((x as f64) - 2.0).tanh() * 3.0;
        let c = basis.coeffs_proj(g, 10).unwrap();
        let m2 = basis.second_moment(g).sqrt();
        let mut fact = 1.0;
        for (k, ck) in c.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let bound = (fact / mu.powi(k as i32)).sqrt() * m2;
            assert!(ck.abs() <= bound * (1.0 + 1e-9), "k={k}");
        }
    }

    #[test]
    fn bivariate_pmf_independence_and_marginals() {
        let biv = BivariatePoisson::new(3.0, 2.0, 0.0).unwrap();
        for x in 0..10 {
            for y in 0..10 {
                let p = biv.pmf_direct(x, y);
                let q = poisson_pmf(x, 3.0) * poisson_pmf(y, 2.0);
                assert!((p - q).abs() < 1e-14);
            }
        }
        // normalization and marginals for a correlated pair
        let biv = BivariatePoisson::new(3.0, 3.0, 1.5).unwrap();
        let x_max = 40u64;
        let mut total = 0.0;
        for x in 0..=x_max {
            let mut row = 0.0;
            for y in 0..=x_max {
                row += biv.pmf_direct(x, y);
            }
            total += row;
            assert!(
                (row - poisson_pmf(x, 3.0)).abs() < 1e-12,
                "marginal at x={x}"
            );
        }
        assert!((total - 1.0).abs() < 1e-11);
    }

    #[test]
    fn mehler_matches_direct_pmf() {
        let biv = BivariatePoisson::new(3.0, 3.0, 1.5).unwrap();
        let mut worst = 0.0f64;
        for x in 0..=30 {
            for y in 0..=30 {
                let direct = biv.pmf_direct(x, y);
                let (mehler, _bound) = biv.pmf_mehler(x, y, 60).unwrap();
                worst = worst.max((direct - mehler).abs());
            }
        }
        assert!(worst < 1e-10, "max Mehler error {worst}");
    }

    #[test]
    fn mehler_zeroth_term_is_product() {
        let biv = BivariatePoisson::new(2.0, 4.0, 1.0).unwrap();
        // with rho effectively zero only the product term survives
        let indep = BivariatePoisson::new(2.0, 4.0, 0.0).unwrap();
        let (m, _) = indep.pmf_mehler(3, 5, 0).unwrap();
        assert!((m - poisson_pmf(3, 2.0) * poisson_pmf(5, 4.0)).abs() < 1e-14);
        let (m0, _) = biv.pmf_mehler(3, 5, 0).unwrap();
        assert!((m0 - poisson_pmf(3, 2.0) * poisson_pmf(5, 4.0)).abs() < 1e-14);
    }

    #[test]
    fn mehler_rejects_near_unit_correlation() {
        let mu = 1.0;
        let biv = BivariatePoisson::new(mu, mu, mu * (1.0 - 1e-9)).unwrap();
        assert!(matches!(
            biv.pmf_mehler(1, 1, 10),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn cross_orthogonality_under_direct_pmf() {
        // E P_k(N1; mu1) P_l(N2; mu2) = δ_{kl} mu3^k k! to 1e-8
        let biv = BivariatePoisson::new(3.0, 3.0, 1.5).unwrap();
        let x_max = 60u64;
        for k in 0..=6usize {
            for l in 0..=6usize {
                let mut acc = KahanSum::new();
                for x in 0..=x_max {
                    for y in 0..=x_max {
                        let p = biv.pmf_direct(x, y);
                        if p > 0.0 {
                            acc.add(
                                charlier_poly(3.0, k, x as f64)
                                    * charlier_poly(3.0, l, y as f64)
                                    * p,
                            );
                        }
                    }
                }
                let expect = if k == l {
                    biv.mu3.powi(k as i32) * (1..=k).map(|i| i as f64).product::<f64>()
                } else {
                    0.0
                };
                let scale = expect.abs().max(1.0);
                assert!(
                    (acc.value() - expect).abs() < 1e-8 * scale,
                    "k={k} l={l}: {} vs {expect}",
                    acc.value()
                );
            }
        }
    }

    #[test]
    fn covariance_identity_pair() {
        let biv = BivariatePoisson::new(3.0, 2.0, 1.2).unwrap();
        let cov = covariance_subordinated(&biv, |x| x as f64, |x| x as f64, 20).unwrap();
        assert!((cov.value - 1.2).abs() < 1e-9);
        assert_eq!(cov.k_star, 1);
    }

    #[test]
    fn covariance_exponential_closed_form() {
        // Cov(e^{aN1}, e^{aN2}) = e^{2(e^a-1)mu} (e^{(e^a-1)^2 mu3} - 1)
        let (a, mu, mu3) = (0.4, 3.0, 1.5);
        let biv = BivariatePoisson::new(mu, mu, mu3).unwrap();
        let g = move |x: u64| (a * x as f64).exp();
        let cov = covariance_subordinated(&biv, g, g, 60).unwrap();
        let e = a.exp() - 1.0;
        let expect = (2.0 * e * mu).exp() * ((e * e * mu3).exp() - 1.0);
        assert!(
            (cov.value - expect).abs() < 1e-8 * expect,
            "{} vs {expect}",
            cov.value
        );
        assert!(cov.remainder_bound < 1e-8 * expect);
    }

    #[test]
    fn covariance_bounded_by_rho_power() {
        // |Cov| <= rho^{k*} sqrt(Var G1 Var G2)
        let biv = BivariatePoisson::new(3.0, 3.0, 1.5).unwrap();
        let g = |x: u64| (x as f64).min(1.0);
        let cov = covariance_subordinated(&biv, g, g, 40).unwrap();
        let basis = CharlierBasis::new(3.0, 1).unwrap();
        let var = basis.second_moment(g) - basis.mean(g).powi(2);
        let bound = biv.rho().powi(cov.k_star as i32) * var;
        assert!(cov.value.abs() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn covariance_extremal_for_linear() {
        // G_i = x / sqrt(mu_i) attains the correlation bound exactly
        let biv = BivariatePoisson::new(3.0, 2.0, 1.0).unwrap();
        let cov = covariance_subordinated(
            &biv,
            |x| x as f64 / 3.0f64.sqrt(),
            |x| x as f64 / 2.0f64.sqrt(),
            20,
        )
        .unwrap();
        assert!((cov.value - biv.rho()).abs() < 1e-10);
    }

    #[test]
    fn sampled_pairs_match_series() {
        let biv = BivariatePoisson::new(3.0, 3.0, 1.5).unwrap();
        let n = 200_000;
        let pairs = biv.sample(901, n);
        let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let corr = pearson_correlation(&xs, &ys);
        let se = 3.0 / (n as f64).sqrt();
        assert!((corr - biv.rho()).abs() < se, "corr {corr} vs {}", biv.rho());

        // empirical covariance of G = min(x,1) against the series value
        let g = |x: u64| (x as f64).min(1.0);
        let gx: Vec<f64> = pairs.iter().map(|p| g(p.0)).collect();
        let gy: Vec<f64> = pairs.iter().map(|p| g(p.1)).collect();
        let (mx, sx) = crate::stats::mean_std(&gx);
        let (my, sy) = crate::stats::mean_std(&gy);
        let emp_cov = gx
            .iter()
            .zip(&gy)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let series = covariance_subordinated(&biv, g, g, 40).unwrap().value;
        let se_cov = 3.0 * sx * sy / (n as f64).sqrt();
        assert!(
            (emp_cov - series).abs() < se_cov,
            "emp {emp_cov} vs series {series}"
        );

        // independent components at mu3 = 0
        let indep = BivariatePoisson::new(3.0, 3.0, 0.0).unwrap();
        let pairs0 = indep.sample(902, 100_000);
        let xs0: Vec<f64> = pairs0.iter().map(|p| p.0 as f64).collect();
        let ys0: Vec<f64> = pairs0.iter().map(|p| p.1 as f64).collect();
        let c0 = pearson_correlation(&xs0, &ys0);
        assert!(c0.abs() < 3.0 / (100_000f64).sqrt() * 1.5, "corr {c0}");
    }

    #[test]
    fn inar1_rows_sum_to_one_and_balance() {
        let mu = 3.0;
        let biv = BivariatePoisson::new(mu, mu, 1.2).unwrap();
        for x in 0..12u64 {
            let mut row = 0.0;
            for y in 0..80u64 {
                row += biv.inar1_transition(x, y).unwrap();
            }
            assert!((row - 1.0).abs() < 1e-11, "row sum at x={x}: {row}");
        }
        // detailed balance p(x) p(y|x) = p(y) p(x|y)
        for x in 0..10u64 {
            for y in 0..10u64 {
                let lhs = poisson_pmf(x, mu) * biv.inar1_transition(x, y).unwrap();
                let rhs = poisson_pmf(y, mu) * biv.inar1_transition(y, x).unwrap();
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
        // mu3 = 0 collapses to the stationary law
        let indep = BivariatePoisson::new(mu, mu, 0.0).unwrap();
        for x in 0..8u64 {
            for y in 0..20u64 {
                assert!(
                    (indep.inar1_transition(x, y).unwrap() - poisson_pmf(y, mu)).abs() < 1e-13
                );
            }
        }
    }

    #[test]
    fn hermite_h1_examples() {
        // exponential: a e^{a^2 mu/2}
        let (a, mu) = (0.5, 3.0);
        let h = hermite_h1(|z| (a * z).exp(), mu).unwrap();
        let expect = a * (a * a * mu / 2.0).exp();
        assert!((h - expect).abs() < 1e-10 * expect);
        // identity: 1
        assert!((hermite_h1(|z| z, mu).unwrap() - 1.0).abs() < 1e-12);
        // even function: 0
        assert!(hermite_h1(|z| z * z, mu).unwrap().abs() < 1e-12);
    }

    #[test]
    fn coeff_limit_exponential() {
        // closed form exp{(e^{a/√M}-1-a/√M) mu M} √M (e^{a/√M}-1) -> a e^{a^2 mu/2}
        let (a, mu) = (0.5, 3.0);
        let g = move |z: f64| (a * z).exp();
        let ms = [1e2, 1e3, 1e4, 1e5, 1e6];
        let out = coeff_limit_check(g, mu, &ms).unwrap();
        for &(m, v) in &out.sequence {
            let s = a / m.sqrt();
            let closed = ((s.exp() - 1.0 - s) * mu * m).exp() * m.sqrt() * (s.exp() - 1.0);
            assert!(
                (v - closed).abs() < 1e-6 * closed.abs(),
                "M={m}: {v} vs {closed}"
            );
        }
        assert!(out.final_gap < 1e-3, "gap {}", out.final_gap);
        // gaps shrink along the ladder
        let gaps: Vec<f64> = out
            .sequence
            .iter()
            .map(|&(_, v)| (v - out.h1).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0] * 1.05));
    }

    #[test]
    fn coeff_limit_identity_constant() {
        let out = coeff_limit_check(|z| z, 3.0, &[10.0, 100.0, 1000.0]).unwrap();
        for &(_, v) in &out.sequence {
            assert!((v - 1.0).abs() < 1e-9, "got {v}");
        }
    }

    #[test]
    fn coeff_limit_kinked_subordinator() {
        // centered-scale min-type: kinked at 1; Cauchy sequence, limit within
        // 1e-3 of the Gauss–Hermite value at M = 1e6
        let g = |z: f64| z.min(1.0);
        let ms = [1e3, 1e4, 1e5, 1e6];
        let out = coeff_limit_check(g, 3.0, &ms).unwrap();
        assert!(out.final_gap < 1e-3, "gap {}", out.final_gap);
        let diffs: Vec<f64> = out.sequence.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "not Cauchy: {diffs:?}");
    }

    #[test]
    fn subordinator_growth_validation() {
        let basis = CharlierBasis::new(3.0, 4).unwrap();
        Subordinator::exp(0.5).validate_growth(&basis).unwrap();
        Subordinator::min_one().validate_growth(&basis).unwrap();
        Subordinator::identity().validate_growth(&basis).unwrap();
        // a deliberately wrong declared bound fails
        let bad = Subordinator {
            kind: SubordinatorKind::Exp { a: 1.0 },
            c1: 1.0,
            c2: 0.1,
        };
        assert!(bad.validate_growth(&basis).is_err());
    }
}
