mod common;

use common::{adaptive_simpson, bessel_integral, hyp1f1_series, ks_statistic};
use leofl_core::channel::special::bessel_j;
use leofl_core::channel::{
    hyp1f1_finite, nakagami_cdf, nakagami_pdf, sr_cdf, sr_pdf, NakagamiParams, ShadowedRicianParams,
};
use leofl_core::seed::rng_for;

#[test]
fn bessel_matches_integral_form() {
    for n in 0..6 {
        for i in 0..60 {
            let x = 0.37 * i as f64;
            let want = bessel_integral(n, x);
            let got = bessel_j(n, x);
            assert!(
                (got - want).abs() < 1e-12,
                "J_{n}({x}) = {got}, integral {want}"
            );
        }
    }
}

#[test]
fn kummer_form_matches_plain_series() {
    for m in 1..=6 {
        for z in [-3.0, -0.5, 0.0, 0.7, 2.0, 6.5] {
            let want = hyp1f1_series(f64::from(m), 1.0, z);
            let got = hyp1f1_finite(m, z);
            assert!(
                (got - want).abs() <= 1e-11 * want.abs().max(1.0),
                "1F1({m};1;{z})"
            );
        }
    }
}

#[test]
fn sr_cdf_is_integral_of_pdf_for_several_shapes() {
    for (two_b, m, omega) in [
        (0.279, 1, 0.251),
        (0.279, 2, 0.251),
        (0.158, 3, 1.29),
        (0.063, 5, 0.000_897),
    ] {
        let p = ShadowedRicianParams::from_multipath_power(two_b, m, omega).unwrap();
        let f = |x: f64| sr_pdf(x, &p);
        for x in [0.01, 0.1, 0.5, 1.0, 2.0, 4.0] {
            let q = adaptive_simpson(&f, 0.0, x, 1e-12);
            assert!((sr_cdf(x, &p) - q).abs() < 1e-8, "m={m} x={x}");
        }
        let tail = 80.0 * (two_b + omega);
        assert!((adaptive_simpson(&f, 0.0, tail, 1e-12) - 1.0).abs() < 1e-7);
    }
}

#[test]
fn physical_sampler_follows_the_cdf() {
    let p = ShadowedRicianParams::from_multipath_power(0.279, 2, 0.251).unwrap();
    let mut rng = rng_for(17, "ks-physical", &[]);
    let samples: Vec<f64> = (0..200_000).map(|_| p.sample_physical(&mut rng)).collect();
    // 1.63/sqrt(n) is the 1% critical value.
    let ks = ks_statistic(samples, |x| sr_cdf(x, &p));
    assert!(ks < 1.63 / (200_000f64).sqrt(), "KS = {ks}");
}

#[test]
fn nakagami_cdf_is_integral_of_pdf() {
    for m in 1..=4 {
        let p = NakagamiParams::new(m, 1.7).unwrap();
        let f = |x: f64| nakagami_pdf(x, &p);
        for x in [0.2, 0.9, 1.5, 3.0] {
            let q = adaptive_simpson(&f, 0.0, x, 1e-12);
            assert!((nakagami_cdf(x, &p) - q).abs() < 1e-9, "m={m} x={x}");
        }
    }
}
