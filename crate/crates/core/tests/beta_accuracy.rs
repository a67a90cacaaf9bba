mod support;

use rcv_core::exhaustion_models::{beta_cdf, BetaParams};
use support::quadrature::beta_cdf_quadrature;

#[test]
fn quadrature_oracle_sanity() {
    assert!((beta_cdf_quadrature(0.3, 1.0, 1.0) - 0.3).abs() < 1e-13);
    assert!((beta_cdf_quadrature(0.5, 7.0, 7.0) - 0.5).abs() < 1e-13);
    // Beta(2, 1) has cdf x^2.
    assert!((beta_cdf_quadrature(0.6, 2.0, 1.0) - 0.36).abs() < 1e-13);
    // Beta(0.5, 0.5) is the arcsine law.
    let arcsine = 2.0 / std::f64::consts::PI * 0.2f64.sqrt().asin();
    assert!((beta_cdf_quadrature(0.2, 0.5, 0.5) - arcsine).abs() < 1e-12);
}

#[test]
fn beta_cdf_matches_quadrature_on_grid() {
    let params = [0.5, 1.0, 10.0, 50.0, 100.0];
    let mut worst: f64 = 0.0;
    for &a in &params {
        for &b in &params {
            for i in 1..=9 {
                let x = i as f64 / 10.0;
                let got = beta_cdf(x, BetaParams::new(a, b).unwrap()).unwrap();
                let want = beta_cdf_quadrature(x, a, b);
                worst = worst.max((got - want).abs());
                assert!((got - want).abs() <= 1e-8, "a={a} b={b} x={x}: {got} vs {want}");
            }
        }
    }
    assert!(worst <= 1e-8);
}

#[test]
fn beta_cdf_at_model_point() {
    let got = beta_cdf(0.5548, BetaParams::new(49.2, 50.8).unwrap()).unwrap();
    let want = beta_cdf_quadrature(0.5548, 49.2, 50.8);
    assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
}

#[test]
fn beta_cdf_edges() {
    let p = BetaParams::new(3.0, 3.0).unwrap();
    assert_eq!(beta_cdf(0.5, p).unwrap(), 0.5);
    assert_eq!(beta_cdf(0.0, p).unwrap(), 0.0);
    assert_eq!(beta_cdf(1.0, p).unwrap(), 1.0);
    assert!(BetaParams::new(0.0, 1.0).is_err());
    assert!(beta_cdf(1.5, p).is_err());
}
