use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::special::{factorial, kummer_coeffs};
use crate::error::{invalid, Result};

/// Probability tolerance of the inverse-CDF sampler.
const INVERSE_TOL: f64 = 1e-10;

/// Shadowed-Rician fading: `b` is half the multipath power, `m` the
/// (integer) shadowing severity and `omega` the mean line-of-sight power.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowedRicianParams {
    b: f64,
    m: u32,
    omega: f64,
    mu: f64,
    beta: f64,
    delta: f64,
    /// `c_i δ^i` with the Kummer coefficients `c_i`.
    kappa: Vec<f64>,
}

impl ShadowedRicianParams {
    pub fn new(b: f64, m: u32, omega: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("b", format!("{b} must be positive")));
        }
        if m < 1 {
            return Err(invalid("m", "must be an integer >= 1"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("{omega} must be positive")));
        }
        let two_b = 2.0 * b;
        let fm = f64::from(m);
        let mu = (two_b * fm / (two_b * fm + omega)).powi(m as i32) / two_b;
        let beta = 1.0 / two_b;
        let delta = omega / (two_b * (two_b * fm + omega));
        let kappa = kummer_coeffs(m)
            .into_iter()
            .enumerate()
            .map(|(i, c)| c * delta.powi(i as i32))
            .collect();
        Ok(Self {
            b,
            m,
            omega,
            mu,
            beta,
            delta,
            kappa,
        })
    }

    /// Builds from the total multipath power `2b`.
    pub fn from_multipath_power(two_b: f64, m: u32, omega: f64) -> Result<Self> {
        Self::new(0.5 * two_b, m, omega)
    }

    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn m(&self) -> u32 {
        self.m
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `E|λ|² = 2b + Ω`.
    pub fn mean(&self) -> f64 {
        2.0 * self.b + self.omega
    }

    /// Draws a complex channel coefficient from the physical model:
    /// Nakagami-m line of sight with uniform phase plus circular Gaussian
    /// multipath of power `2b`. Independent of the closed-form CDF.
    pub fn sample_coefficient<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        // Integer m: Gamma(m, Ω/m) as a sum of m exponentials.
        let mut los_power = 0.0;
        for _ in 0..self.m {
            let u: f64 = rng.random();
            los_power -= (1.0 - u).ln();
        }
        los_power *= self.omega / f64::from(self.m);
        let phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let s = self.b.sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::from_polar(los_power.sqrt(), phase) + Complex64::new(s * re, s * im)
    }

    /// `|λ|²` from the physical model (see [`Self::sample_coefficient`]).
    pub fn sample_physical<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_coefficient(rng).norm_sqr()
    }
}

/// Density `μ e^{−βx} 1F1(m; 1; δx)`.
pub fn sr_pdf(x: f64, p: &ShadowedRicianParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    // e^{−βx}·e^{δx}·Σ c_i (δx)^i, folded to avoid overflow at large x.
    let poly = p.kappa.iter().rev().fold(0.0, |acc, &k| acc * x + k);
    p.mu * (-(p.beta - p.delta) * x).exp() * poly
}

/// Closed-form CDF
/// `1 − μ e^{−(β−δ)x} Σ_i κ_i Σ_{j≤i} (i!/j!) x^j (β−δ)^{−(i−j+1)}`.
pub fn sr_cdf(x: f64, p: &ShadowedRicianParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = p.beta - p.delta;
    let mut total = 0.0;
    for (i, &k) in p.kappa.iter().enumerate() {
        let fi = factorial(i as u32);
        let mut inner = 0.0;
        for j in 0..=i {
            inner += fi / factorial(j as u32) * x.powi(j as i32) * a.powi(-((i - j + 1) as i32));
        }
        total += k * inner;
    }
    (1.0 - p.mu * (-a * x).exp() * total).clamp(0.0, 1.0)
}

/// Draws `|λ|²` by numerically inverting [`sr_cdf`] (safeguarded Newton on
/// a monotone bracket).
pub fn sr_sample<R: Rng + ?Sized>(p: &ShadowedRicianParams, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    sr_quantile(u, p)
}

pub(crate) fn sr_quantile(u: f64, p: &ShadowedRicianParams) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = p.mean();
    while sr_cdf(hi, p) < u {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = sr_cdf(x, p) - u;
        if f.abs() <= INVERSE_TOL {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-15 * hi {
            return x;
        }
        let d = sr_pdf(x, p);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}
