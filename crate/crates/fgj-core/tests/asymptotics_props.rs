use std::sync::Arc;

use fgj_core::asymptotics::*;
use fgj_core::gapset::solve_equilibrium;
use fgj_core::jacobi::*;
use fgj_core::sumrule::{entropy_z_op, rebuilt_tail_identity, verify_step_sumrule};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn period2() -> Arc<PeriodicBackground> {
    Arc::new(period2_from_bands(1.0, 2.0).unwrap())
}

fn operators() -> impl Strategy<Value = JacobiCoeffs> {
    (any::<bool>(), proptest::collection::vec((0.3f64..2.5, -1.5f64..1.5), 0..6), 0usize..2).prop_map(|(p2, head, ph)| {
        let bg = if p2 { period2() } else { Arc::new(PeriodicBackground::free()) };
        let (a, b): (Vec<f64>, Vec<f64>) = head.into_iter().unzip();
        let phase = ph % bg.period();
        JacobiCoeffs::with_head(a, b, bg, phase).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jost_solves_recurrence(j in operators(), k in 0usize..28) {
        let z = standard_grid(j.gapset())[k];
        let u = jost_solution(&j, Energy::At(z), 400);
        // grid points sitting on an eigenvalue are legitimately refused
        if let Ok(u) = u {
            prop_assert!(u.recurrence_residual(&j) < 1e-10);
        }
    }

    #[test]
    fn green_methods_agree(j in operators(), k in 0usize..28, n in 1usize..60) {
        let z = standard_grid(j.gapset())[k];
        let ev = gap_eigenvalues(&j, 1e-10).unwrap();
        prop_assume!(ev.iter().all(|&(x, _)| (z - x).norm() > 1e-3));
        // errors on Wronskian spread > 1e-10 or method disagreement > 1e-8
        let g = green_diag(&j, z, n);
        prop_assert!(g.is_ok(), "{:?}", g);
    }

    #[test]
    fn band_reconstruction(j in operators()) {
        prop_assert!(reconstruction_residual(&j, 6, 300).unwrap() < 1e-8);
    }
}

#[test]
fn szego_ratio_limits_period2() {
    for seed_head in [(vec![1.3, 0.6], vec![0.4, -0.9]), (vec![0.7, 2.0, 1.1], vec![1.5, 0.0, -0.2])] {
        let j = JacobiCoeffs::with_head(seed_head.0, seed_head.1, period2(), 1).unwrap();
        let grid = real_grid(j.gapset());
        let r = szego_ratio(&j, &j.asymptotic_background(), &grid, 200).unwrap();
        let n0 = r.n0.expect("Cauchy from some N0");
        assert!(r.sup_delta[n0 - 1..].iter().all(|&d| d < 1e-8));
        assert!(r.max_limit_error < 1e-8);
    }
}

#[test]
fn decomposition_reproduces_polynomials() {
    let j = JacobiCoeffs::with_head(vec![1.3, 0.6], vec![0.4, -0.9], period2(), 0).unwrap();
    for x in [2.7, 3.5, -3.1] {
        let d = band_decomposition(&j, x, 40).unwrap();
        assert!(d.max_rel_error < 1e-8, "{d:?}");
    }
}

#[test]
fn l2_error_decreases() {
    // 1/n² perturbation over 300 sites, so n = 25..200 stays inside the head
    let bg = Arc::new(PeriodicBackground::free());
    let a = (1..=300).map(|n| 1.0 + 0.5 / (n * n) as f64).collect();
    let b = (1..=300).map(|n| 0.4 / (n * n) as f64).collect();
    let j = JacobiCoeffs::with_head(a, b, bg, 0).unwrap();
    let eq = solve_equilibrium(j.gapset(), 1e-12).unwrap();
    let errs: Vec<f64> = [25, 50, 100, 200].iter().map(|&n| l2_szego_error(&j, &eq, n, 1e-13).unwrap().ac_error).collect();
    for w in errs.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{errs:?}");
    }
    assert!(2.0 * errs[3] <= errs[0] && errs[3] < 1e-3);
}

#[test]
fn background_wronskian_and_arcsine_identity() {
    for (bg, ph) in [(period2(), 0), (period2(), 1), (Arc::new(PeriodicBackground::new(vec![1.0, 0.7, 1.2], vec![0.3, -0.2, 0.0]).unwrap()), 2)] {
        let j = JacobiCoeffs::background(bg, ph);
        let eq = solve_equilibrium(j.gapset(), 1e-12).unwrap();
        let r = background_identities(&j, &eq, 15, 1e-13).unwrap();
        assert!(r.identity_error < 1e-8, "{r:?}");
        assert!(r.wr_min_real > 0.0 && r.wr_max_imag_rel < 1e-10 && r.wr_ratio_error < 1e-8, "{r:?}");
    }
}

#[test]
fn oscillatory_indicator_is_order_one_over_n() {
    let eq = solve_equilibrium(&fgj_core::gapset::GapSet::interval(-2.0, 2.0).unwrap(), 1e-12).unwrap();
    let ind = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
    let v = oscillatory_decay(&eq, &ind, &[1, 3, 5, 9], 1e-11).unwrap();
    for (n, i) in v {
        // (1/π)∫₀^{π/2} cos nθ dθ = sin(nπ/2)/(nπ)
        let exact = (n as f64 * std::f64::consts::FRAC_PI_2).sin() / (n as f64 * std::f64::consts::PI);
        assert!((i - exact).abs() < 1e-8, "n {n}: {i} vs {exact}");
    }
}

#[test]
fn entropy_nonnegative_and_telescoping() {
    let eq = solve_equilibrium(period2().bands(), 1e-12).unwrap();
    for (a, b) in [(vec![1.3, 0.6], vec![0.4, -0.9]), (vec![2.2], vec![1.4]), (vec![], vec![])] {
        let j = JacobiCoeffs::with_head(a, b, period2(), 0).unwrap();
        for n in 0..4 {
            assert!(entropy_z_op(&j.strip(n), &eq, 1e-12).unwrap().value >= -1e-8);
        }
        let r = verify_step_sumrule(&j, 3, &eq, 1e-8).unwrap();
        assert!(r.log_k_n <= r.log_a_n + r.z_j + 1e-8);
    }
}

#[test]
fn rebuilt_tail_identity_small_n() {
    let eq = Arc::new(solve_equilibrium(period2().bands(), 1e-12).unwrap());
    let j = JacobiCoeffs::with_head(vec![1.3, 0.6], vec![0.4, -0.9], period2(), 0).unwrap();
    for n in 1..=3 {
        let r = rebuilt_tail_identity(&j, n, &eq, 1e-8).unwrap();
        assert!(r.residual.abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn weyl_solution_against_section() {
    let j = JacobiCoeffs::with_head(vec![1.3, 0.6], vec![0.4, -0.9], period2(), 1).unwrap();
    let z = C64::new(0.2, 0.5);
    let col = section_resolvent_column(&j, z, 600, 1);
    assert!((weyl_solution(&j, z, 1).unwrap() + m_function(&j, Energy::At(z)).unwrap()).norm() < 1e-13);
    for n in 1..10 {
        assert!((weyl_solution(&j, z, n).unwrap() + col[n - 1]).norm() < 1e-10);
    }
}
