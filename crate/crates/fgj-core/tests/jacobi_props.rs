use std::sync::Arc;

use fgj_core::gapset::{band_integral, solve_equilibrium, BandPoint, Measure};
use fgj_core::jacobi::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn backgrounds() -> impl Strategy<Value = Arc<PeriodicBackground>> {
    prop_oneof![
        Just(Arc::new(PeriodicBackground::free())),
        Just(Arc::new(period2_from_bands(1.0, 2.0).unwrap())),
        Just(Arc::new(PeriodicBackground::new(vec![1.0, 0.7, 1.2], vec![0.3, -0.2, 0.0]).unwrap())),
    ]
}

fn operators() -> impl Strategy<Value = JacobiCoeffs> {
    (backgrounds(), proptest::collection::vec((0.3f64..2.5, -1.5f64..1.5), 0..6), 0usize..3).prop_map(|(bg, head, ph)| {
        let (a, b): (Vec<f64>, Vec<f64>) = head.into_iter().unzip();
        let phase = ph % bg.period();
        JacobiCoeffs::with_head(a, b, bg, phase).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn herglotz(j in operators(), re in -4.0f64..4.0, im in 1e-3f64..3.0) {
        let m = m_function(&j, Energy::At(C64::new(re, im))).unwrap();
        prop_assert!(m.im > 0.0, "{m}");
    }

    #[test]
    fn stripping_identity(j in operators(), re in -4.0f64..4.0, im in 1e-2f64..3.0) {
        prop_assume!(j.head_len() > 0);
        let z = C64::new(re, im);
        let m = m_function(&j, Energy::At(z)).unwrap();
        let m1 = m_function(&j.strip(1), Energy::At(z)).unwrap();
        let a1 = j.a(1);
        let rhs = -z + j.b(1) - a1 * a1 * m1;
        prop_assert!((m.inv() - rhs).norm() < 1e-12 * m.inv().norm());
    }

    #[test]
    fn leading_coefficient(j in operators(), n in 1usize..40) {
        let z = C64::new(1e12, 0.0);
        let p = opoly_scaled(&j, n, z);
        let expected: f64 = -(1..=n).map(|k| j.a(k).ln()).sum::<f64>();
        let got = p.ln_abs(n) - n as f64 * z.re.ln();
        prop_assert!((got - expected).abs() < 1e-10 * (1.0 + expected.abs()), "{} vs {}", got, expected);
    }
}

#[test]
fn band_interiors_have_positive_weight_and_unit_mass() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    for (a, b, ph) in [(vec![1.3, 0.6], vec![0.4, -0.9], 0), (vec![2.1], vec![1.2], 1), (vec![], vec![], 1)] {
        let j = JacobiCoeffs::with_head(a, b, bg.clone(), ph).unwrap();
        let g = j.gapset().clone();
        let eq = solve_equilibrium(&g, 1e-12).unwrap();
        for k in 0..g.bands().len() {
            for i in 1..20 {
                let p = BandPoint::new(&g, k, std::f64::consts::PI * i as f64 / 20.0);
                assert!(m_function_at(&j, &p).unwrap().im > 0.0);
            }
        }
        let ac = band_integral(&eq, |p: &BandPoint| spectral_weight_at(&j, p).unwrap(), Measure::Lebesgue, 1e-13).unwrap().value;
        let masses: f64 = gap_eigenvalues(&j, 1e-10).unwrap().iter().map(|e| e.1).sum();
        assert!((ac + masses - 1.0).abs() < 1e-9, "{ac} + {masses}");
    }
}

#[test]
fn stieltjes_round_trip() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    let cases = [
        JacobiCoeffs::with_head(vec![1.3, 0.6, 0.9], vec![0.4, -0.9, 0.1], bg.clone(), 0).unwrap(),
        JacobiCoeffs::with_head(vec![0.8, 1.1], vec![2.5, 0.0], Arc::new(PeriodicBackground::free()), 0).unwrap(),
        JacobiCoeffs::background(bg, 1),
    ];
    for j in &cases {
        let mu = SpectralMeasure::of_operator(j, 1e-12).unwrap();
        let n = 40;
        let rec = stieltjes_from_measure(&mu, n, None).unwrap();
        let upto = rec.trust_horizon.min(n);
        assert!(upto >= 30, "trust horizon {}", rec.trust_horizon);
        for k in 0..upto {
            assert!((rec.a[k] - j.a(k + 1)).abs() < 1e-8, "a_{} {} vs {}", k + 1, rec.a[k], j.a(k + 1));
            assert!((rec.b[k] - j.b(k + 1)).abs() < 1e-8, "b_{} {} vs {}", k + 1, rec.b[k], j.b(k + 1));
        }
    }
}
