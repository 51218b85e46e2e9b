use std::sync::Arc;

use fgj_core::gapset::{solve_equilibrium, BandPoint};
use fgj_core::jacobi::{period2_from_bands, JacobiCoeffs, SpectralMeasure};
use fgj_core::sumrule::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_head(seed: u64, bg: &Arc<fgj_core::jacobi::PeriodicBackground>) -> JacobiCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..=6);
    let a = (0..len).map(|_| rng.gen_range(0.3..2.5)).collect();
    let b = (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect();
    JacobiCoeffs::with_head(a, b, bg.clone(), rng.gen_range(0..2)).unwrap()
}

#[test]
fn random_period2_heads_satisfy_sum_rule() {
    let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
    let eq = solve_equilibrium(bg.bands(), 1e-12).unwrap();
    for seed in 0..10 {
        let j = random_head(seed, &bg);
        let zj = entropy_z_op(&j, &eq, 1e-11).unwrap().value;
        assert!(zj >= -1e-8);
        let mut one_step = 0.0;
        for n in 1..=10 {
            let r = verify_step_sumrule(&j, n, &eq, 1e-8).unwrap();
            assert!(r.residual.abs() < 1e-6, "seed {seed} n {n}: {}", r.residual);
            // K_n ≤ A_n e^{Z(J)}
            assert!(r.log_k_n <= r.log_a_n + r.z_j + 1e-8);
            let s = verify_step_sumrule(&j.strip(n - 1), 1, &eq, 1e-8).unwrap();
            one_step += s.residual;
            assert!((one_step - r.residual).abs() < 1e-8, "telescoping at seed {seed} n {n}");
        }
    }
}

#[test]
fn log_divergent_vanishing_is_classified() {
    let g = fgj_core::gapset::GapSet::interval(-2.0, 2.0).unwrap();
    let eq = solve_equilibrium(&g, 1e-12).unwrap();
    let w = Arc::new(|p: &BandPoint| (-1.0 / p.dist()).exp() * (p.d_lo * p.d_hi).sqrt());
    let norm = fgj_core::gapset::band_integral(&eq, |p| w(p), fgj_core::gapset::Measure::Lebesgue, 1e-13).unwrap().value;
    let mu = SpectralMeasure::new(g, Arc::new(move |p: &BandPoint| w(p) / norm), vec![]).unwrap();
    let flags = classify_measure(&mu, &eq, 80, 1e-8).unwrap();
    println!("{flags:#?}");
    assert!(!flags.szego.holds);
    assert!(flags.blaschke.holds);
    assert!(!flags.widom.holds);
    assert!(flags.consistent);
}
