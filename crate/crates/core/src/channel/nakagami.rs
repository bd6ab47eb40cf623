use super::special::factorial;
use crate::error::{invalid, Result};

/// Nakagami-m power statistics (integer `m`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiParams {
    m: u32,
    omega: f64,
}

impl NakagamiParams {
    pub fn new(m: u32, omega: f64) -> Result<Self> {
        if m < 1 {
            return Err(invalid("m", "must be an integer >= 1"));
        }
        if !(omega > 0.0) {
            return Err(invalid("omega", "must be positive"));
        }
        Ok(Self { m, omega })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// Gamma density `(m/Ω)^m x^{m−1} e^{−mx/Ω} / Γ(m)` of the channel power.
pub fn nakagami_pdf(x: f64, p: &NakagamiParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let r = f64::from(p.m) / p.omega;
    r.powi(p.m as i32) * x.powi(p.m as i32 - 1) * (-r * x).exp() / factorial(p.m - 1)
}

/// Regularized lower incomplete gamma `1 − Σ_{n<m} y^n e^{−y} / n!`,
/// `y = m x / Ω`.
pub fn nakagami_cdf(x: f64, p: &NakagamiParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = f64::from(p.m) * x / p.omega;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..p.m {
        term *= y / f64::from(n);
        sum += term;
    }
    (1.0 - (-y).exp() * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m1_is_exponential() {
        let p = NakagamiParams::new(1, 2.0).unwrap();
        for x in [0.1, 1.0, 5.0] {
            assert!((nakagami_cdf(x, &p) - (1.0 - (-x / 2.0).exp())).abs() < 1e-15);
            assert!((nakagami_pdf(x, &p) - 0.5 * (-x / 2.0).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn limits() {
        let p = NakagamiParams::new(3, 0.8).unwrap();
        assert_eq!(nakagami_cdf(0.0, &p), 0.0);
        assert!((nakagami_cdf(100.0, &p) - 1.0).abs() < 1e-12);
        assert!(NakagamiParams::new(0, 1.0).is_err());
    }
}
