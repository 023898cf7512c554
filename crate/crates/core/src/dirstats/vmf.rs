//! von Mises–Fisher distribution on `S^{d-1}`: normalizer, Bessel ratio,
//! concentration estimators and a seeded sampler.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Finite stand-in for infinite concentration (`r̄ = 1`).
pub const KAPPA_MAX: f64 = 1e12;

const NEWTON_MAX_ITER: usize = 25;
const NEWTON_TOL: f64 = 1e-10;
/// Above this the Bessel ratio uses the large-argument expansion.
const RATIO_ASYMPTOTIC_FROM: f64 = 1e4;

/// `κ̂ ≈ r̄ (d - r̄²) / (1 - r̄²)`, capped at [`KAPPA_MAX`].
pub fn kappa_approx(r_bar: f64, d: usize) -> f64 {
    let r = r_bar.clamp(0.0, 1.0);
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return KAPPA_MAX;
    }
    let kappa = r * (d as f64 - r * r) / denom;
    if kappa.is_finite() {
        kappa.min(KAPPA_MAX)
    } else {
        KAPPA_MAX
    }
}

/// `A_d(κ) = I_{d/2}(κ) / I_{d/2-1}(κ)`, the expected `r̄` of a vMF in `R^d`.
pub fn bessel_ratio(d: usize, kappa: f64) -> f64 {
    let nu = d as f64 / 2.0;
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa >= RATIO_ASYMPTOTIC_FROM {
        return hankel_sum(nu, kappa) / hankel_sum(nu - 1.0, kappa);
    }
    // I_ν/I_{ν-1} = 1 / (2ν/κ + 1 / (2(ν+1)/κ + …)), modified Lentz.
    const TINY: f64 = 1e-300;
    let b = |j: usize| 2.0 * (nu + j as f64) / kappa;
    let mut f = b(0).max(TINY);
    let mut c = f;
    let mut dd = 0.0;
    for j in 1..200_000 {
        let bj = b(j);
        dd += bj;
        if dd.abs() < TINY {
            dd = TINY;
        }
        dd = 1.0 / dd;
        c = bj + 1.0 / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * dd;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// `Σ_k (-1)^k a_k(ν) / x^k` from the large-argument expansion
/// `I_ν(x) ~ eˣ/√(2πx) · Σ …`, summed until terms stop shrinking.
fn hankel_sum(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..64 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Maximum-likelihood concentration: solves `A_d(κ) = r̄` by Newton's method
/// from the closed-form approximation. Returns `(κ̂, capped)`.
pub fn kappa_mle(r_bar: f64, d: usize) -> (f64, bool) {
    let start = kappa_approx(r_bar, d);
    if start >= KAPPA_MAX || d < 2 {
        return (KAPPA_MAX, true);
    }
    if r_bar <= 0.0 {
        return (0.0, false);
    }
    let df = d as f64;
    let mut kappa = start.max(1e-12);
    for _ in 0..NEWTON_MAX_ITER {
        let a = bessel_ratio(d, kappa);
        let residual = a - r_bar;
        if residual.abs() < NEWTON_TOL {
            break;
        }
        let slope = 1.0 - a * a - (df - 1.0) / kappa * a;
        if !(slope > 0.0) {
            break;
        }
        let mut next = kappa - residual / slope;
        if next <= 0.0 {
            next = kappa / 2.0;
        }
        kappa = next;
    }
    if kappa >= KAPPA_MAX {
        (KAPPA_MAX, true)
    } else {
        (kappa, false)
    }
}

/// `ln I_ν(x)` for `ν ≥ 0`, `x > 0`.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    if x >= 40.0 + 2.0 * nu * nu {
        return x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + hankel_sum(nu, x).ln();
    }
    // Power series Σ (x/2)^{2j+ν} / (j! Γ(j+ν+1)), accumulated relative to the
    // j = 0 term.
    let half = x / 2.0;
    let ln_first = nu * half.ln() - ln_gamma(nu + 1.0);
    let q = half * half;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut scale = 0.0_f64;
    for j in 1..100_000 {
        let jf = j as f64;
        term *= q / (jf * (jf + nu));
        if term > 1e250 {
            scale += term.ln();
            sum /= term;
            term = 1.0;
        }
        sum += term;
        if term < 1e-17 * sum && jf > half {
            break;
        }
    }
    ln_first + scale + sum.ln()
}

/// Lanczos approximation (g = 7, n = 9).
pub(crate) fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// von Mises–Fisher distribution with mean direction `mu` and concentration
/// `kappa`.
///
/// Sampling draws the component along `mu` with Wood's envelope-rejection
/// scheme and the tangent part uniformly on the orthogonal sphere.
#[derive(Debug, Clone)]
pub struct VonMisesFisher {
    mu: DVector<f64>,
    kappa: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VonMisesFisher {
    pub fn new(mu: DVector<f64>, kappa: f64) -> Result<Self> {
        let d = mu.len();
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        if !(kappa >= 0.0) || kappa.is_infinite() {
            return Err(Error::InvalidParameter(format!("concentration must be finite and >= 0, got {kappa}")));
        }
        let norm = mu.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("mean direction must be a nonzero vector".into()));
        }
        let mu = mu / norm;
        let m1 = (d - 1) as f64;
        // b = (-2κ + √(4κ² + (d-1)²)) / (d-1), written without cancellation.
        let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(m1 / 2.0, m1 / 2.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(Self { mu, kappa, b, x0, c, beta })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean_direction(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `ln c_d(κ)` with `c_d(κ) = κ^{d/2-1} / ((2π)^{d/2} I_{d/2-1}(κ))`.
    pub fn ln_normalizer(&self) -> f64 {
        let d = self.dim() as f64;
        let nu = d / 2.0 - 1.0;
        if self.kappa == 0.0 {
            // Reciprocal surface area of S^{d-1}.
            return ln_gamma(d / 2.0) - std::f64::consts::LN_2 - (d / 2.0) * std::f64::consts::PI.ln();
        }
        nu * self.kappa.ln() - (d / 2.0) * (2.0 * std::f64::consts::PI).ln() - ln_bessel_i(nu, self.kappa)
    }

    pub fn ln_density(&self, x: &DVector<f64>) -> f64 {
        self.ln_normalizer() + self.kappa * self.mu.dot(x)
    }

    /// Component `w = μᵀx`, returned as `(w, 1 - w)` to keep precision near 1.
    fn sample_w<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let m1 = (self.dim() - 1) as f64;
        loop {
            let z: f64 = self.beta.sample(rng);
            let one_minus_w = 2.0 * self.b * z / (1.0 - (1.0 - self.b) * z);
            let w = 1.0 - one_minus_w;
            let u: f64 = rng.random::<f64>();
            if self.kappa * w + m1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return (w, one_minus_w);
            }
        }
    }
}

impl Distribution<DVector<f64>> for VonMisesFisher {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.dim();
        let (w, one_minus_w) = self.sample_w(rng);
        let tangent = loop {
            let g = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = &g - &self.mu * self.mu.dot(&g);
            let norm = t.norm();
            if norm > 1e-12 {
                break t / norm;
            }
        };
        let radial = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
        let x = &self.mu * w + tangent * radial;
        let norm = x.norm();
        x / norm
    }
}

/// `count` seeded draws from `vMF(mu, kappa)`.
pub fn vmf_sample(mu: &DVector<f64>, kappa: f64, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let dist = VonMisesFisher::new(mu.clone(), kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series for `I_ν(x)` in plain arithmetic, valid for moderate `x`.
    fn bessel_i_series(nu: f64, x: f64) -> f64 {
        let mut sum = 0.0;
        for j in 0..400 {
            let jf = j as f64;
            let ln_term = (2.0 * jf + nu) * (x / 2.0).ln() - ln_gamma(jf + 1.0) - ln_gamma(jf + nu + 1.0);
            sum += ln_term.exp();
        }
        sum
    }

    #[test]
    fn approximation_matches_hand_evaluation() {
        let got = kappa_approx(0.9, 3);
        assert!((got - 0.9 * (3.0 - 0.81) / (1.0 - 0.81)).abs() < 1e-12);
        assert!((got - 10.373_684_210_526).abs() < 1e-9);
    }

    #[test]
    fn approximation_caps_at_unit_resultant() {
        assert_eq!(kappa_approx(1.0, 3), KAPPA_MAX);
        assert_eq!(kappa_approx(1.0 + 1e-16, 3), KAPPA_MAX);
        assert_eq!(kappa_approx(0.0, 3), 0.0);
    }

    #[test]
    fn approximation_is_monotone() {
        for d in 2..8 {
            let mut prev = -1.0;
            for i in 0..1000 {
                let r = i as f64 / 1000.0;
                let k = kappa_approx(r, d);
                assert!(k > prev, "d={d} r={r}");
                prev = k;
            }
        }
    }

    #[test]
    fn ratio_matches_closed_form_in_three_dimensions() {
        // A_3(κ) = coth κ - 1/κ
        for &k in &[1e-3_f64, 0.1, 1.0, 5.0, 42.0, 100.0, 999.0, 5e3, 2e4, 1e6] {
            // Taylor series where the closed form cancels.
            let exact = if k < 0.05 {
                k / 3.0 - k.powi(3) / 45.0 + 2.0 * k.powi(5) / 945.0
            } else {
                1.0 / k.tanh() - 1.0 / k
            };
            let got = bessel_ratio(3, k);
            assert!((got - exact).abs() < 1e-12 * exact.max(1e-3), "κ={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn ratio_matches_series_oracle() {
        for d in [2usize, 4, 5, 7] {
            let nu = d as f64 / 2.0;
            for &k in &[0.5, 3.0, 12.0, 30.0] {
                let exact = bessel_i_series(nu, k) / bessel_i_series(nu - 1.0, k);
                let got = bessel_ratio(d, k);
                assert!((got - exact).abs() < 1e-11, "d={d} κ={k}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn ratio_is_continuous_across_asymptotic_switch() {
        for d in [2usize, 3, 6] {
            let below = bessel_ratio(d, RATIO_ASYMPTOTIC_FROM * (1.0 - 1e-9));
            let above = bessel_ratio(d, RATIO_ASYMPTOTIC_FROM);
            assert!((below - above).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_bessel_matches_series() {
        for &nu in &[0.0, 0.5, 1.0, 2.5] {
            for &x in &[0.1, 2.0, 20.0, 60.0] {
                let exact = bessel_i_series(nu, x).ln();
                assert!((ln_bessel_i(nu, x) - exact).abs() < 1e-10 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mle_inverts_ratio() {
        for d in [2usize, 3, 5] {
            for &k in &[0.3, 4.0, 100.0, 2500.0] {
                let r = bessel_ratio(d, k);
                let (est, capped) = kappa_mle(r, d);
                assert!(!capped);
                assert!((est - k).abs() / k < 1e-6, "d={d} κ={k} est={est}");
            }
        }
        assert_eq!(kappa_mle(1.0, 3), (KAPPA_MAX, true));
    }

    #[test]
    fn density_integrates_to_one_on_circle_and_sphere() {
        use std::f64::consts::PI;
        for &k in &[0.0, 1.0, 10.0, 100.0] {
            let circle = VonMisesFisher::new(DVector::from_vec(vec![1.0, 0.0]), k).unwrap();
            let steps = 20_000;
            let h = 2.0 * PI / steps as f64;
            let total: f64 = (0..steps)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    circle.ln_density(&DVector::from_vec(vec![t.cos(), t.sin()])).exp() * h
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-9, "circle κ={k}: {total}");

            // On S^2 the density depends only on u = cos(polar angle), and the
            // surface element is 2π du.
            let sphere = VonMisesFisher::new(DVector::from_vec(vec![0.0, 0.0, 1.0]), k).unwrap();
            let h = 2.0 / steps as f64;
            let f = |u: f64| {
                let x = DVector::from_vec(vec![(1.0 - u * u).max(0.0).sqrt(), 0.0, u]);
                sphere.ln_density(&x).exp() * 2.0 * PI
            };
            // Composite Simpson.
            let total: f64 = (0..=steps)
                .map(|i| {
                    let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * f(-1.0 + i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((total - 1.0).abs() < 1e-7, "sphere κ={k}: {total}");
        }
    }

    #[test]
    fn sampler_rejects_bad_parameters() {
        assert!(matches!(
            vmf_sample(&DVector::from_vec(vec![1.0]), 1.0, 3, 0),
            Err(Error::InvalidDimension(1))
        ));
        assert!(vmf_sample(&DVector::from_vec(vec![1.0, 0.0]), -1.0, 3, 0).is_err());
    }

    #[test]
    fn samples_are_unit_and_seeded() {
        let mu = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let a = vmf_sample(&mu, 7.0, 200, 11).unwrap();
        let b = vmf_sample(&mu, 7.0, 200, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sample_mean_cosine_matches_bessel_ratio() {
        // E[μᵀx] = A_d(κ)
        for d in [2usize, 3, 6] {
            let mut mu = DVector::zeros(d);
            mu[d - 1] = 1.0;
            for &k in &[0.5, 5.0, 50.0] {
                let xs = vmf_sample(&mu, k, 40_000, 3).unwrap();
                let mean = xs.iter().map(|x| mu.dot(x)).sum::<f64>() / xs.len() as f64;
                let expected = bessel_ratio(d, k);
                assert!((mean - expected).abs() < 0.01, "d={d} κ={k}: {mean} vs {expected}");
            }
        }
    }
}
