use fgj_core::gapset::*;
use proptest::prelude::*;

/// Random sorted gap sets with ℓ ≤ 3 and edges kept apart.
fn gapsets() -> impl Strategy<Value = GapSet> {
    (0usize..=3, proptest::collection::vec(0.05f64..1.5, 8)).prop_map(|(ell, steps)| {
        let mut x = -3.0;
        let mut bands = Vec::new();
        for k in 0..=ell {
            let a = x;
            let b = a + steps[2 * k];
            bands.push((a, b));
            x = b + steps[2 * k + 1];
        }
        GapSet::new(bands).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_sum_to_one(g in gapsets()) {
        let eq = solve_equilibrium(&g, 1e-12).unwrap();
        let s: f64 = eq.band_weights().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-10, "{}", s);
        prop_assert!(eq.band_weights().iter().all(|&w| w > 0.0));
        prop_assert!(eq.capacity() > 0.0 && eq.capacity() <= 0.25 * g.span() + 1e-12);
    }

    #[test]
    fn green_nonnegative_and_zero_at_edges(g in gapsets(), t in 0.0f64..1.0) {
        let eq = solve_equilibrium(&g, 1e-12).unwrap();
        let x = g.lower() - 1.0 + t * (g.span() + 2.0);
        prop_assert!(eq.green(x).unwrap() >= 0.0);
        for e in g.edges() {
            for s in [-1e-6, 1e-6] {
                let v = eq.green(e + s).unwrap();
                prop_assert!(v >= 0.0 && v < 1e-2, "G({}) = {}", e + s, v);
            }
        }
    }

    #[test]
    fn density_envelope_is_positive(g in gapsets()) {
        let eq = solve_equilibrium(&g, 1e-12).unwrap();
        for (lo, hi) in eq.density_envelope(200) {
            prop_assert!(lo > 0.0 && hi.is_finite() && lo <= hi);
        }
    }
}

#[test]
fn edge_constant_bounds_green() {
    let g = GapSet::new(vec![(-2.0, -0.5), (0.2, 1.0), (1.4, 2.5)]).unwrap();
    let eq = solve_equilibrium(&g, 1e-12).unwrap();
    let c1 = eq.green_edge_constant(0.5, 80).unwrap();
    for e in g.edges() {
        for d in [1e-9, 1e-6, 1e-3] {
            for x in [e - d, e + d] {
                if !g.contains(x) {
                    assert!(eq.green(x).unwrap() <= c1 * dist_to_set(&g, x).sqrt() * (1.0 + 1e-6));
                }
            }
        }
    }
}

#[test]
fn symmetric_sets_mirror() {
    let g = GapSet::new(vec![(-2.5, -1.2), (-0.4, 0.4), (1.2, 2.5)]).unwrap();
    assert!(g.is_symmetric());
    let eq = solve_equilibrium(&g, 1e-12).unwrap();
    let z = eq.gap_zeros();
    assert!((z[0] + z[1]).abs() < 1e-12, "{z:?}");
    for i in 0..40 {
        let x = 0.05 + 3.0 * i as f64 / 40.0;
        assert!((eq.green(x).unwrap() - eq.green(-x).unwrap()).abs() < 1e-12);
        if g.contains(x) && !g.is_edge(x) {
            assert!((eq.density(x).unwrap() - eq.density(-x).unwrap()).abs() < 1e-12 * eq.density(x).unwrap().max(1.0));
        }
    }
}

#[test]
fn square_preimage_capacity() {
    // {x : x² ∈ [c, d]} has capacity √cap([c, d]) = √((d − c)/4)
    for (c, d) in [(1.0f64, 4.0f64), (0.25, 2.0), (0.5, 5.0)] {
        let g = GapSet::new(vec![(-d.sqrt(), -c.sqrt()), (c.sqrt(), d.sqrt())]).unwrap();
        let eq = solve_equilibrium(&g, 1e-12).unwrap();
        assert!((eq.capacity() - (0.25 * (d - c)).sqrt()).abs() < 1e-8);
    }
}
