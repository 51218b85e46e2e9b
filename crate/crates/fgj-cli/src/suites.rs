//! The registered verification suites.

use fgj_core::asymptotics::{
    background_identities, coeff_convergence, compare_green, green_diag, l2_szego_error, real_grid, reconstruction_residual,
    standard_grid, szego_ratio, an_ratio,
};
use fgj_core::diskmodel::verify_nonlocal_sumrule;
use fgj_core::gapset::{solve_equilibrium, EquilibriumData};
use fgj_core::jacobi::{spectral_regions, JacobiCoeffs};
use fgj_core::spectra::{check_interlacing, verify_rank_bound, RankKind};
use fgj_core::sumrule::{classify_szego, verify_step_sumrule, widom_sequence};
use fgj_core::FgjError;
use serde_json::{json, Value};

use crate::output::{to_value, Series};
use crate::scenario::{InputError, Scenario};

pub struct Outcome {
    pub pass: bool,
    pub summary: Value,
    pub series: Vec<Series>,
}

#[derive(Debug)]
pub enum SuiteError {
    Input(InputError),
    Core(FgjError),
}

impl From<InputError> for SuiteError {
    fn from(e: InputError) -> Self {
        SuiteError::Input(e)
    }
}

impl From<FgjError> for SuiteError {
    fn from(e: FgjError) -> Self {
        SuiteError::Core(e)
    }
}

type SuiteResult = Result<Outcome, SuiteError>;

const EQ_TOL: f64 = 1e-12;

fn equilibrium(sc: &Scenario) -> Result<EquilibriumData, FgjError> {
    solve_equilibrium(&sc.gapset, EQ_TOL)
}

pub fn run_suite(sc: &Scenario, suite: &str) -> SuiteResult {
    let tol = sc.tol(suite);
    match suite {
        "equilibrium" => run_equilibrium(sc, tol),
        "sumrule" => run_sumrule(sc, sc.operator(suite)?, tol),
        "widom" => run_widom(sc, sc.operator(suite)?),
        "szego_ratio" => run_szego(sc, sc.operator(suite)?, tol),
        "green" => run_green(sc, sc.operator(suite)?, tol),
        "l2" => run_l2(sc, sc.operator(suite)?, tol),
        "background" => run_background(sc, sc.operator(suite)?, tol),
        "interlacing" => run_interlacing(sc.operator(suite)?, tol),
        "rank" => run_rank(sc, sc.operator(suite)?, tol),
        "disk" => run_disk(sc, sc.operator(suite)?, tol),
        "oscillatory" => run_oscillatory(sc, tol),
        "coeff" => run_coeff(sc, sc.operator(suite)?, tol),
        other => Err(InputError::new("suite.unknown", format!("unknown suite {other:?}")).into()),
    }
}

fn run_equilibrium(sc: &Scenario, tol: f64) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let weight_sum: f64 = eq.band_weights().iter().sum();
    let c1 = eq.green_edge_constant(1.0, 60)?;
    let rows = fgj_core::asymptotics::band_grid(&sc.gapset, 50)
        .into_iter()
        .map(|(_, x)| Ok(vec![x, eq.density(x)?]))
        .collect::<Result<Vec<_>, FgjError>>()?;
    Ok(Outcome {
        pass: (weight_sum - 1.0).abs() <= tol,
        summary: json!({
            "equilibrium": to_value(&eq.report()),
            "weight_sum_error": to_value(&(weight_sum - 1.0)),
            "green_edge_constant": to_value(&c1),
        }),
        series: vec![Series::new("density", &["x", "density"], rows)],
    })
}

fn run_sumrule(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let n_max = sc.params.n_max.unwrap_or(10);
    let reports = (1..=n_max).map(|n| verify_step_sumrule(j, n, &eq, tol)).collect::<Result<Vec<_>, _>>()?;
    let first = &reports[0];
    let (pass, max_res) = if first.entropy_divergent {
        (first.flags.consistent, f64::NAN)
    } else {
        let m = reports.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        (m < tol, m)
    };
    let rows = reports.iter().map(|r| vec![r.n as f64, r.log_a_n.exp(), r.k_n, r.z_jn, r.residual]).collect();
    Ok(Outcome {
        pass,
        summary: json!({
            "max_abs_residual_log": to_value(&max_res),
            "witness_A1": to_value(&first.log_a_n.exp()),
            "witness_K1": to_value(&first.k_n),
            "z_j": to_value(&first.z_j),
            "first": to_value(first),
        }),
        series: vec![Series::new("series", &["n", "A_n", "K_n", "Z_n", "residual_log"], rows)],
    })
}

fn run_widom(sc: &Scenario, j: &JacobiCoeffs) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let n_max = sc.params.n_max.unwrap_or(200);
    let w = widom_sequence(j, &eq, n_max);
    let flags = classify_szego(j, &eq, n_max, 1e-8)?;
    let rows = w.values().iter().enumerate().map(|(k, &a)| vec![(k + 1) as f64, a]).collect();
    Ok(Outcome {
        pass: flags.consistent,
        summary: json!({ "min": to_value(&w.min), "max": to_value(&w.max), "flags": to_value(&flags) }),
        series: vec![Series::new("A_n", &["n", "A_n"], rows)],
    })
}

fn run_szego(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let bg = j.asymptotic_background();
    let n_max = sc.params.n_check.unwrap_or(200);
    let r = szego_ratio(j, &bg, &real_grid(&sc.gapset), n_max)?;
    let tail_sup = r.sup_delta[n_max / 2 - 1..].iter().copied().fold(0.0, f64::max);
    let rows = r.sup_delta.iter().enumerate().map(|(k, &d)| vec![(k + 1) as f64, d]).collect();
    Ok(Outcome {
        pass: tail_sup < tol && r.max_limit_error < tol,
        summary: json!({ "N0": r.n0, "sup_delta_second_half": to_value(&tail_sup), "report": to_value(&r) }),
        series: vec![Series::new("sup_grid_delta", &["n", "sup_grid_delta"], rows)],
    })
}

fn run_green(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let bg = j.asymptotic_background();
    let n = sc.params.n_check.unwrap_or(200);
    let grid = standard_grid(&sc.gapset);
    let c = compare_green(j, &bg, &grid, n)?;
    let (d, r) = (c.sup_diff[n - 1], c.sup_ratio_dev[n - 1]);
    // both Green's function methods at the check site, first grid point
    let cross = green_diag(j, grid[0], n)?;
    let diff_rows = c.sup_diff.iter().enumerate().map(|(k, &v)| vec![(k + 1) as f64, v]).collect();
    let ratio_rows = c.sup_ratio_dev.iter().enumerate().map(|(k, &v)| vec![(k + 1) as f64, v]).collect();
    Ok(Outcome {
        pass: d < tol && r < tol,
        summary: json!({
            "n": n,
            "sup_diff": to_value(&d),
            "sup_ratio_dev": to_value(&r),
            "decay_rate": to_value(&c.decay_rate),
            "excluded": to_value(&c.excluded),
            "methods": to_value(&cross),
        }),
        series: vec![
            Series::new("sup_diff", &["n", "sup_diff"], diff_rows),
            Series::new("ratio_dev", &["n", "sup_ratio_dev"], ratio_rows),
        ],
    })
}

/// Below this, ac_error is rounding noise and the halving test is vacuous.
const AC_FLOOR: f64 = 1e-24;

fn run_l2(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let ns = [25usize, 50, 100, 200];
    let reps = ns.iter().map(|&n| l2_szego_error(j, &eq, n, 1e-13)).collect::<Result<Vec<_>, _>>()?;
    let recon = reconstruction_residual(j, 10, 300)?;
    let (e25, e200) = (reps[0].ac_error, reps[3].ac_error);
    let halved = 2.0 * e200 <= e25 || e25 <= AC_FLOOR;
    let rows = reps.iter().map(|r| vec![r.n as f64, r.ac_error, r.mass_error]).collect();
    Ok(Outcome {
        pass: e200 < tol && halved && recon < 1e-8,
        summary: json!({
            "ac_error_25": to_value(&e25),
            "ac_error_200": to_value(&e200),
            "reconstruction_residual": to_value(&recon),
            "reports": to_value(&reps),
        }),
        series: vec![Series::new("error", &["n", "ac_error", "mass_error"], rows)],
    })
}

fn run_background(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let r = background_identities(&j.asymptotic_background(), &eq, 20, 1e-13)?;
    Ok(Outcome {
        pass: r.identity_error < tol && r.wr_min_real > 0.0 && r.wr_max_imag_rel < 1e-10 && r.wr_ratio_error < 1e-8,
        summary: to_value(&r),
        series: vec![],
    })
}

fn run_interlacing(j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let reports = spectral_regions(j).into_iter().map(|gap| check_interlacing(j, gap, tol)).collect::<Result<Vec<_>, _>>()?;
    let violations: usize = reports.iter().map(|r| r.violations.len()).sum();
    Ok(Outcome { pass: violations == 0, summary: json!({ "violations": violations, "regions": to_value(&reports) }), series: vec![] })
}

fn run_rank(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let seed = sc.seed.expect("validated: randomized suites carry a seed");
    let trials = sc.params.trials.unwrap_or(100);
    let a = j.truncate(60);
    let g = j.gapset();
    let interval = g.gaps().first().copied().unwrap_or((g.upper(), g.upper() + 1.0));
    let mut reports = Vec::new();
    for kind in [RankKind::Additive(1), RankKind::Additive(2), RankKind::Projection(1)] {
        reports.push(verify_rank_bound(&a, kind, interval, trials, seed));
    }
    let violations: usize = reports.iter().map(|r| r.violations.iter().filter(|v| v.margin < -tol).count()).sum();
    Ok(Outcome { pass: violations == 0, summary: json!({ "violations": violations, "reports": to_value(&reports) }), series: vec![] })
}

fn run_disk(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let r = verify_nonlocal_sumrule(j, 0.5, 64, 5, 1e-10)?;
    let eq = equilibrium(sc)?;
    let step = verify_step_sumrule(j, 1, &eq, 1e-8)?;
    let z0 = (r.log_rhs_at_0 - step.rhs_log).abs();
    Ok(Outcome {
        pass: r.max_residual < tol && r.jost_identity_residual < 1e-8 && z0 < tol,
        summary: json!({ "nonlocal": to_value(&r), "sumrule_rhs_log": to_value(&step.rhs_log), "z0_mismatch": to_value(&z0) }),
        series: vec![],
    })
}

fn run_oscillatory(sc: &Scenario, tol: f64) -> SuiteResult {
    let eq = equilibrium(sc)?;
    let ns = [1usize, 2, 4, 8, 16, 32, 64];
    let flat = fgj_core::asymptotics::oscillatory_decay(&eq, &|_| 1.0, &ns, 1e-12)?;
    let smooth = fgj_core::asymptotics::oscillatory_decay(&eq, &|x: f64| x.exp(), &ns, 1e-12)?;
    let at = |v: &[(usize, f64)], n: usize| v.iter().find(|p| p.0 == n).unwrap().1.abs();
    let drop = at(&smooth, 4) / at(&smooth, 64);
    let pass = if sc.gapset.ell() == 0 { flat.iter().all(|p| p.1.abs() < tol) } else { drop >= 10.0 };
    let rows = |v: &[(usize, f64)]| v.iter().map(|&(n, x)| vec![n as f64, x]).collect();
    Ok(Outcome {
        pass,
        summary: json!({ "drop_4_to_64": to_value(&drop), "max_abs_constant": to_value(&flat.iter().map(|p| p.1.abs()).fold(0.0, f64::max)) }),
        series: vec![Series::new("constant", &["n", "I_n"], rows(&flat)), Series::new("exp", &["n", "I_n"], rows(&smooth))],
    })
}

fn run_coeff(sc: &Scenario, j: &JacobiCoeffs, tol: f64) -> SuiteResult {
    let bg = j.asymptotic_background();
    let n_max = sc.params.n_max.unwrap_or(j.head_len() + 50);
    let diff = coeff_convergence(j, &bg, n_max);
    let ratio = an_ratio(j, &bg, n_max);
    let beyond = diff.iter().skip(j.head_len()).copied().fold(0.0, f64::max);
    let rows = |v: &[f64]| v.iter().enumerate().map(|(k, &x)| vec![(k + 1) as f64, x]).collect();
    Ok(Outcome {
        pass: beyond < tol,
        summary: json!({ "max_diff_beyond_head": to_value(&beyond), "an_ratio_limit": to_value(ratio.last().unwrap_or(&1.0)) }),
        series: vec![Series::new("diff", &["n", "coeff_diff"], rows(&diff)), Series::new("an_ratio", &["n", "an_ratio"], rows(&ratio))],
    })
}
