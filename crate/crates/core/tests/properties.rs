use proptest::prelude::*;

use qfrac::gronwall::{check_sart, sart_bound};
use qfrac::operators::{build_kernel, fractional_integral, nabla_derivative};
use qfrac::qcore::{gamma_q, q_bracket, q_factorial_power};
use qfrac::{FracOrder, GridFn, QGrid, Tolerance};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn base() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.3), Just(0.5), Just(0.9), 0.2f64..0.95]
}

proptest! {
    #[test]
    fn exponent_splitting(q in base(), m in 1i32..12, t in 0.2f64..3.0, b in 0.05f64..2.0, g in 0.05f64..2.0) {
        let s = t * q.powi(m);
        let whole = q_factorial_power(t, s, b + g, q, &tol()).unwrap();
        let split = q_factorial_power(t, s, b, q, &tol()).unwrap()
            * q_factorial_power(t, q.powf(b) * s, g, q, &tol()).unwrap();
        prop_assert!(rel(whole, split) <= 1e-10);
    }

    #[test]
    fn homogeneity(q in base(), m in 1i32..12, t in 0.2f64..3.0, b in 0.05f64..2.0, c in 0.1f64..5.0) {
        let s = t * q.powi(m);
        let lhs = q_factorial_power(c * t, c * s, b, q, &tol()).unwrap();
        let rhs = c.powf(b) * q_factorial_power(t, s, b, q, &tol()).unwrap();
        prop_assert!(rel(lhs, rhs) <= 1e-10);
    }

    #[test]
    fn derivative_in_t(q in base(), n in 2i32..8, m in 1i32..6, b in 0.1f64..2.0) {
        let g = QGrid::new(q, n + m, (n + m + 1) as usize).unwrap();
        let s = g.point(0);
        let f = GridFn::from_fn(&g, |t| q_factorial_power(t, s, b, q, &tol()).unwrap()).unwrap();
        let i = m as usize + 1;
        let t = g.point(i);
        let got = nabla_derivative(&f, i).unwrap();
        let want = q_bracket(b, q).unwrap() * q_factorial_power(t, s, b - 1.0, q, &tol()).unwrap();
        prop_assert!(rel(got, want) <= 1e-10, "{got} vs {want}");
    }

    #[test]
    fn gamma_recurrence_holds(q in base(), a in 0.1f64..6.0) {
        let lhs = gamma_q(a + 1.0, q, &tol()).unwrap();
        let rhs = q_bracket(a, q).unwrap() * gamma_q(a, q, &tol()).unwrap();
        prop_assert!(rel(lhs, rhs) <= 1e-10);
    }

    #[test]
    fn integral_is_positive_and_linear(q in base(), alpha in 0.1f64..2.0, c in -3.0f64..3.0) {
        let g = QGrid::new(q, 6, 8).unwrap();
        let k = build_kernel(&g, 0, FracOrder::new(alpha).unwrap(), &tol()).unwrap();
        let f = GridFn::from_fn(&g, |t| 1.0 + t * t).unwrap();
        let i1 = fractional_integral(&f, &k).unwrap();
        let i2 = fractional_integral(&f.map(|v| c * v).unwrap(), &k).unwrap();
        for i in 1..8 {
            prop_assert!(i1.get(i) > 0.0);
            prop_assert!((i2.get(i) - c * i1.get(i)).abs() <= 1e-13 * i1.get(i).abs().max(1.0));
        }
    }

    #[test]
    fn sart_strict_implies_non_strict(q in base(), alpha in 0.1f64..1.0, scale in 0.0f64..1.5) {
        let g = QGrid::new(q, 4, 8).unwrap();
        let x = GridFn::from_fn(&g, |t| scale * sart_bound(t, alpha, q)).unwrap();
        let order = FracOrder::new(alpha).unwrap();
        let strict = check_sart(&x, order, true);
        let loose = check_sart(&x, order, false);
        for (s, l) in strict.iter().zip(&loose) {
            prop_assert!(!s || *l);
        }
    }
}
