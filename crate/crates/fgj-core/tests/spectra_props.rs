use std::sync::Arc;

use fgj_core::gapset::solve_equilibrium;
use fgj_core::jacobi::*;
use fgj_core::spectra::*;
use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_head(seed: u64, bg: &Arc<PeriodicBackground>) -> JacobiCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..=6);
    let a = (0..len).map(|_| rng.gen_range(0.3..2.5)).collect();
    let b = (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect();
    JacobiCoeffs::with_head(a, b, bg.clone(), rng.gen_range(0..bg.period())).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sturm_matches_dense(n in 1usize..200, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let a: Vec<f64> = (1..n).map(|_| rng.gen_range(0.05..2.0)).collect();
        let t = TruncatedOperator::new(b, a).unwrap();
        let mut dense: Vec<f64> = SymmetricEigen::new(t.to_dense()).eigenvalues.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        let sturm = t.eigenvalues_in(-10.0, 10.0, 1e-13);
        prop_assert_eq!(sturm.len(), n);
        for (x, y) in sturm.iter().zip(&dense) {
            prop_assert!((x - y).abs() < 1e-10, "{} vs {}", x, y);
        }
    }

    #[test]
    fn interlacing_holds(seed in 0u64..100_000) {
        let bg = if seed % 2 == 0 { Arc::new(PeriodicBackground::free()) } else { Arc::new(period2_from_bands(1.0, 2.0).unwrap()) };
        let j = random_head(seed, &bg);
        for gap in spectral_regions(&j) {
            let r = check_interlacing(&j, gap, 1e-10).unwrap();
            prop_assert!(r.violations.is_empty(), "{:?}", r);
        }
    }
}

#[test]
fn rank_bounds_hold() {
    let j = random_head(9, &Arc::new(period2_from_bands(1.0, 2.0).unwrap()));
    let a = j.truncate(30);
    for (k, kind) in [RankKind::Additive(1), RankKind::Additive(3), RankKind::Projection(1), RankKind::Projection(2)].into_iter().enumerate() {
        let r = verify_rank_bound(&a, kind, (-1.0, 1.0), 60, 100 * k as u64);
        assert!(r.violations.is_empty(), "{kind:?}: {:?}", r.violations);
    }
}

#[test]
fn stripping_energy_and_uniform_smallness() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    let allowance = stripping_energy_allowance(bg.bands());
    for seed in 0..5 {
        let j = random_head(500 + seed, &bg);
        let p = stripped_eig_profile(&j, 0, 1e-3, 15, 1e-10).unwrap();
        for &e in &p.energies {
            assert!(e <= p.energies[0] + allowance + 1e-12);
        }
        assert!(p.min_edge_margin >= -1e-12);
        // the reported δ keeps the near-edge sums below ε/2 for every n
        let eps = 0.2;
        if let Some(d) = p.delta_for(eps) {
            let (_, l, r) = p.ladder.iter().find(|t| t.0 == d).copied().unwrap();
            assert!(l <= 0.5 * eps && r <= 0.5 * eps);
        }
    }
}

#[test]
fn alternating_green_sum_matches_blaschke_factor() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    let eq = solve_equilibrium(bg.bands(), 1e-12).unwrap();
    for seed in 0..8 {
        let j = random_head(900 + seed, &bg);
        let total: f64 = spectral_regions(&j)
            .into_iter()
            .map(|gap| alternating_sum(&check_interlacing(&j, gap, 1e-10).unwrap(), |x| eq.green(x).unwrap()))
            .sum();
        let log_k = fgj_core::sumrule::log_blaschke_k(&j, 1, &eq, 1e-10).unwrap();
        assert!((total - log_k).abs() < 1e-10, "seed {seed}: {total} vs {log_k}");
    }
}

#[test]
fn splice_lattice_margin() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    let j = random_head(41, &bg);
    let jt = random_head(42, &bg);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..12 {
        let (m, q) = (rng.gen_range(0..8), rng.gen_range(0..8));
        let (_, rep) = splice(&j, &jt, m, q, 1e-10).unwrap();
        assert!(rep.margin >= 0.0, "m {m} q {q}: {rep:?}");
    }
}
