//! Special functions: Bessel functions of the first kind of integer order and
//! the terminating confluent hypergeometric series for integer shape.

/// Below this argument the ascending series is accurate to ~1e-15.
const SERIES_LIMIT: f64 = 12.0;

/// `n!` as a float (exact for n ≤ 22).
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * f64::from(k))
}

/// Bessel function of the first kind `J_n(x)` for integer order `n`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        bessel_series(n, x)
    } else {
        bessel_miller(n, x)
    }
}

fn bessel_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half.powi(n as i32) / factorial(n);
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + f64::from(n)));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && k > half {
            return sum;
        }
        if k > 200.0 {
            return sum;
        }
    }
}

/// Miller's backward recurrence normalized by J0 + 2·Σ J_{2k} = 1.
fn bessel_miller(n: u32, x: f64) -> f64 {
    let big = f64::from(n).max(x);
    let mut start = (big + 30.0 + 3.0 * big.sqrt()) as u32;
    start += start % 2;
    let (mut jp1, mut j) = (0.0_f64, 1e-280_f64);
    let mut norm = 0.0;
    let mut want = 0.0;
    for k in (1..=start).rev() {
        // J_{k-1} = (2k/x) J_k - J_{k+1}
        let jm1 = 2.0 * f64::from(k) / x * j - jp1;
        jp1 = j;
        j = jm1;
        let idx = k - 1;
        if idx == n {
            want = j;
        }
        if idx % 2 == 0 && idx > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            want *= 1e-250;
        }
    }
    norm += j;
    want / norm
}

/// `1F1(m; 1; z)` for integer `m ≥ 1` via Kummer's transformation, which
/// turns it into `e^z` times a polynomial of degree `m − 1`:
/// `e^z · Σ_{i<m} (−1)^i (1−m)_i z^i / (i!)²`.
pub fn hyp1f1_finite(m: u32, z: f64) -> f64 {
    assert!(m >= 1, "hyp1f1_finite requires m >= 1");
    z.exp() * kummer_poly(m, z)
}

/// Coefficients `c_i = (−1)^i (1−m)_i / (i!)²`, all nonnegative.
pub(crate) fn kummer_coeffs(m: u32) -> Vec<f64> {
    let mut c = Vec::with_capacity(m as usize);
    let mut ci = 1.0;
    for i in 0..m {
        c.push(ci);
        let fi = f64::from(i);
        ci *= -(1.0 - f64::from(m) + fi) / ((fi + 1.0) * (fi + 1.0));
    }
    c
}

fn kummer_poly(m: u32, z: f64) -> f64 {
    kummer_coeffs(m)
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * z + c)
}
