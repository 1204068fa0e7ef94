use proptest::prelude::*;
use surrogate_core::volsurface::{term_factor, SurfaceParams, SviSlice};

/// Fourth-order central differences: Richardson on steps `h` and `2h`.
fn d1(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * c(h) - c(2.0 * h)) / 3.0
}

fn d2(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let c = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    (4.0 * c(h) - c(2.0 * h)) / 3.0
}

fn surface() -> impl Strategy<Value = SurfaceParams> {
    (0.0f64..0.02, 0.0f64..0.3, -0.4f64..0.8, -0.2f64..0.6, 0.01f64..1.0, 0.0f64..1.0).prop_map(
        |(a, b, rho, m, sigma, lambda)| SurfaceParams::new(SviSlice::new(a, b, rho, m, sigma).unwrap(), lambda).unwrap(),
    )
}

fn close(fd: f64, analytic: f64, scale: f64) -> bool {
    (fd - analytic).abs() <= 1e-6 * analytic.abs().max(scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn analytic_derivatives_match_finite_differences(
        p in surface(),
        k in -1.0f64..1.0,
        t in 0.05f64..0.95,
    ) {
        let s = p.slice();
        let d = p.derivatives(k, t);
        let w_k = |k: f64| p.total_variance(k, t).unwrap();
        let w_t = |t: f64| p.total_variance(k, t).unwrap();
        // Steps follow the curvature scale of the hyperbola around its vertex.
        let h = 1e-3 * ((k - s.m()).powi(2) + s.sigma().powi(2)).sqrt();
        // Natural magnitude of the k-derivatives, used as a floor near their zeros.
        let scale = s.b() * (1.0 + 1.0 / s.sigma()) * term_factor(t, p.lambda()).unwrap();
        prop_assert!(close(d1(&w_k, k, h), d.dw_dk, scale), "dw/dk {} vs {}", d1(&w_k, k, h), d.dw_dk);
        prop_assert!(close(d2(&w_k, k, h), d.d2w_dk2, scale), "d2w/dk2 {} vs {}", d2(&w_k, k, h), d.d2w_dk2);
        prop_assert!(close(d1(&w_t, t, 1e-3), d.dw_dt, d.w), "dw/dT {} vs {}", d1(&w_t, t, 1e-3), d.dw_dt);
    }

    #[test]
    fn total_variance_never_decreases_in_maturity(
        p in surface(),
        k in -1.0f64..1.0,
        t1 in 0.0f64..1.0,
        t2 in 0.0f64..1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(p.total_variance(k, lo).unwrap() <= p.total_variance(k, hi).unwrap());
    }
}
