//! Floquet and Jost solutions, Green's functions and the large-n comparisons
//! between an eventually periodic operator and its periodic background.
//!
//! Solutions live on sites n ≥ 0 with a_0 = 1, so the Wronskian
//! Wr(f, g) = a_n (f_n g_{n+1} − f_{n+1} g_n) is n-independent and
//! Wr(p_{·−1}, u) = −u_0.
//!
//! Jost solutions are tail-matched: the operator and its background share the
//! same Floquet values beyond the head, with the background block normalised
//! by ũ_1 = 1. Any other common normalisation rescales both by the same factor,
//! so ratios and the band reconstruction of p_n are unchanged.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{FgjError, Result};
use crate::gapset::{band_integral, BandPoint, EquilibriumData, GapSet, Measure};
use crate::jacobi::{gap_eigenvalues, m_sequence, opoly_eval, opoly_scaled, spectral_weight_at, Energy, Floquet, JacobiCoeffs, PeriodicBackground};

type C64 = Complex64;

/// Number stored as mant · e^{scale}.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub mant: C64,
    pub scale: f64,
}

impl Scaled {
    pub fn value(&self) -> C64 {
        self.mant * self.scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mant.norm().ln() + self.scale
    }

    fn mul(self, o: Scaled) -> Scaled {
        Scaled { mant: self.mant * o.mant, scale: self.scale + o.scale }
    }
}

/// Decaying (or +i0) Floquet solution of a periodic half-line.
#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub energy: Energy,
    pub lambda: C64,
    /// u_1..u_{p+1} with u_1 = 1 and u_{p+1} = λ u_1.
    pub block: Vec<C64>,
    /// u_0 with a_0 = 1.
    pub u0: C64,
    pub phase: usize,
    pub period: usize,
}

impl FloquetSolution {
    /// u_n for n ≥ 1.
    pub fn at(&self, n: usize) -> Scaled {
        let k = (n - 1) / self.period;
        let i = (n - 1) % self.period;
        let r = self.lambda.norm();
        let unit = self.lambda / r;
        Scaled { mant: self.block[i] * unit.powi(k as i32), scale: k as f64 * r.ln() }
    }
}

fn solution_from_floquet(bg: &PeriodicBackground, phase: usize, e: Energy, fl: Floquet) -> Result<FloquetSolution> {
    let p = bg.period();
    if fl.v[0].norm() <= 1e-14 * fl.v[1].norm() {
        return Err(FgjError::Domain(format!("Floquet solution vanishes at site 1 for {:?}", e)));
    }
    let z = e.z();
    let (a, b) = (bg.a(), bg.b());
    // state (ψ_n, a_{n−1}ψ_{n−1}) with ψ_1 = 1
    let mut state = [C64::new(1.0, 0.0), fl.v[1] / fl.v[0]];
    let mut block = vec![state[0]];
    for i in 0..p {
        let k = (phase + i) % p;
        let next = ((z - b[k]) * state[0] - state[1]) / a[k];
        state = [next, a[k] * state[0]];
        block.push(next);
    }
    // u_0 with a_0 = 1 from the recurrence at site 1
    let k0 = phase % p;
    let u0 = (z - b[k0]) * block[0] - a[k0] * block[1];
    Ok(FloquetSolution { energy: e, lambda: fl.lambda, block, u0, phase, period: p })
}

/// Floquet solution of the background started at `phase`.
pub fn floquet_solution(bg: &PeriodicBackground, phase: usize, e: Energy) -> Result<FloquetSolution> {
    let fl = bg.floquet(phase, e)?;
    solution_from_floquet(bg, phase, e, fl)
}

/// Same, on a band at x + i0 given through a band point of the background's bands.
pub fn floquet_solution_at(bg: &PeriodicBackground, phase: usize, pt: &BandPoint) -> Result<FloquetSolution> {
    let fl = bg.floquet_band(phase, pt)?;
    solution_from_floquet(bg, phase, Energy::Above(pt.x), fl)
}

/// Tail-matched Jost solution u_0..u_{n_max}.
#[derive(Debug, Clone)]
pub struct JostSolutionSeq {
    pub energy: Energy,
    pub values: Vec<Scaled>,
    pub head_len: usize,
}

impl JostSolutionSeq {
    pub fn at(&self, n: usize) -> Scaled {
        self.values[n]
    }

    /// Largest relative residual of the recurrence over interior sites.
    pub fn recurrence_residual(&self, j: &JacobiCoeffs) -> f64 {
        let z = self.energy.z();
        let mut worst: f64 = 0.0;
        for n in 1..self.values.len() - 1 {
            let s = self.values[n].scale;
            let v = |k: usize| self.values[k].mant * (self.values[k].scale - s).exp();
            let anm1 = if n > 1 { j.a(n - 1) } else { 1.0 };
            let terms = [anm1 * v(n - 1), j.b(n) * v(n), j.a(n) * v(n + 1), -z * v(n)];
            let sum: C64 = terms.iter().sum();
            let size: f64 = terms.iter().map(|t| t.norm()).sum();
            if size > 0.0 {
                worst = worst.max(sum.norm() / size);
            }
        }
        worst
    }
}

/// Backward recurrence from the matched tail values at sites N+1, N+2.
fn jost_from_tail(j: &JacobiCoeffs, z: C64, tail: &FloquetSolution, n_max: usize) -> Vec<Scaled> {
    let nh = j.head_len();
    let top = n_max.max(nh + 2);
    let mut vals: Vec<Scaled> = vec![Scaled { mant: C64::new(0.0, 0.0), scale: 0.0 }; top + 1];
    for n in (nh + 1)..=top {
        vals[n] = tail.at(n);
    }
    let s = vals[nh + 1].scale;
    let mut hi = vals[nh + 2].mant * (vals[nh + 2].scale - s).exp();
    let mut cur = vals[nh + 1].mant;
    let mut scale = s;
    for n in (1..=nh + 1).rev() {
        let anm1 = if n > 1 { j.a(n - 1) } else { 1.0 };
        let prev = ((z - j.b(n)) * cur - j.a(n) * hi) / anm1;
        hi = cur;
        cur = prev;
        let r = cur.norm();
        if r > 1e150 || (r < 1e-150 && r > 0.0) {
            cur /= r;
            hi /= r;
            scale += r.ln();
        }
        vals[n - 1] = Scaled { mant: cur, scale };
    }
    vals.truncate(n_max + 1);
    vals
}

fn background_solution(j: &JacobiCoeffs, e: Energy) -> Result<FloquetSolution> {
    let bg = j.asymptotic_background();
    floquet_solution(bg.tail(), bg.phase(), e)
}

/// Jost solution of J, equal to the background Floquet solution beyond the head.
pub fn jost_solution(j: &JacobiCoeffs, e: Energy, n_max: usize) -> Result<JostSolutionSeq> {
    let tail = background_solution(j, e)?;
    let values = jost_from_tail(j, e.z(), &tail, n_max.max(1));
    let u0 = values[0];
    let u1 = values[1];
    if u0.mant.norm() == 0.0 || u0.ln_abs() - u1.ln_abs() < (1e-10f64).ln() - j.norm_bound().ln().max(0.0) {
        return Err(FgjError::Domain(format!("u_0 vanishes: {:?} is an eigenvalue of J", e.z())));
    }
    Ok(JostSolutionSeq { energy: e, values, head_len: j.head_len() })
}

/// Jost pair on a band, via a band point of the background bands.
fn jost_at_point(j: &JacobiCoeffs, pt: &BandPoint, n_max: usize) -> Result<(Vec<Scaled>, FloquetSolution)> {
    let bg = j.asymptotic_background();
    let tail = floquet_solution_at(bg.tail(), bg.phase(), pt)?;
    Ok((jost_from_tail(j, C64::new(pt.x, 0.0), &tail, n_max), tail))
}

/// W_n(z) = −⟨δ_n, (J − z)⁻¹ δ_1⟩ = M(a₁M⁽¹⁾)⋯(a_{n−1}M⁽ⁿ⁻¹⁾), M⁽ᵏ⁾ = −m⁽ᵏ⁾.
pub fn weyl_solution(j: &JacobiCoeffs, z: C64, n: usize) -> Result<C64> {
    if z.im == 0.0 {
        return Err(FgjError::Domain("Weyl solution requested on the real axis".into()));
    }
    let ms = m_sequence(j, Energy::At(z), n)?;
    let mut w = -ms[0];
    for k in 1..n {
        w *= -j.a(k) * ms[k];
    }
    Ok(w)
}

/// Column k of (J_N − z)⁻¹ for the N-site section, by a tridiagonal solve.
pub fn section_resolvent_column(j: &JacobiCoeffs, z: C64, size: usize, k: usize) -> Vec<C64> {
    let n = size;
    let diag: Vec<C64> = (1..=n).map(|i| j.b(i) - z).collect();
    let off: Vec<f64> = (1..n).map(|i| j.a(i)).collect();
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    rhs[k - 1] = C64::new(1.0, 0.0);
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut d = vec![C64::new(0.0, 0.0); n];
    c[0] = if n > 1 { off[0] / diag[0] } else { C64::new(0.0, 0.0) };
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = off[i] / den;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / den;
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Decay per site of the Jost solution at z.
fn decay_rate(j: &JacobiCoeffs, z: C64) -> Result<f64> {
    let fl = j.tail().floquet(j.phase(), Energy::At(z))?;
    Ok(-fl.lambda.norm().ln() / j.tail().period() as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenValue {
    pub n: usize,
    pub jost: (f64, f64),
    pub section: (f64, f64),
    pub wronskian_spread: f64,
}

impl GreenValue {
    pub fn value(&self) -> C64 {
        C64::new(self.jost.0, self.jost.1)
    }
}

/// Scaled p_{k−1}, k = 0..=n, as a Scaled vector (index k holds p_{k−1}, p_{−1} = 0).
fn shifted_opoly(j: &JacobiCoeffs, n: usize, z: C64) -> Vec<Scaled> {
    let seq = opoly_scaled(j, n, z);
    let mut out = vec![Scaled { mant: C64::new(0.0, 0.0), scale: 0.0 }];
    out.extend(seq.mant.iter().zip(&seq.log_scale).map(|(&m, &s)| Scaled { mant: m, scale: s }));
    out
}

/// Wr(p_{·−1}, u) sampled at sites 0..=5: (value at 0, max relative spread).
fn wronskian_pu(j: &JacobiCoeffs, p: &[Scaled], u: &[Scaled]) -> (C64, f64) {
    let w0 = -u[0].value();
    let top = 5.min(p.len() - 2).min(u.len() - 2);
    let mut spread: f64 = 0.0;
    for k in 1..=top {
        let w = j.a(k) * (p[k].mul(u[k + 1]).value() - p[k + 1].mul(u[k]).value());
        spread = spread.max((w - w0).norm() / w0.norm());
    }
    (w0, spread)
}

/// G_nn(z) two ways: p_{n−1}u_n / Wr from the Jost solution, and a section solve.
pub fn green_diag(j: &JacobiCoeffs, z: C64, n: usize) -> Result<GreenValue> {
    let jost = jost_solution(j, Energy::At(z), n + 6)?;
    let p = shifted_opoly(j, n + 6, z);
    let (wr, spread) = wronskian_pu(j, &p, &jost.values);
    if spread > 1e-10 {
        return Err(FgjError::Consistency(format!("Wronskian varies with the site by {spread:e}")));
    }
    let ga = p[n].mul(jost.at(n)).value() / wr;
    let gamma = decay_rate(j, z)?;
    let extra = ((40.0 / gamma).ceil() as usize).clamp(60, 200_000);
    let gb = section_resolvent_column(j, z, n + extra, n)[n - 1];
    if (ga - gb).norm() > 1e-8 * ga.norm() {
        return Err(FgjError::Consistency(format!("Green's function methods disagree at n = {n}: {ga} vs {gb}")));
    }
    Ok(GreenValue { n, jost: (ga.re, ga.im), section: (gb.re, gb.im), wronskian_spread: spread })
}

/// G_nn for n = 1..=n_max from one Jost solution.
fn green_series(j: &JacobiCoeffs, z: C64, n_max: usize) -> Result<Vec<C64>> {
    let jost = jost_solution(j, Energy::At(z), n_max + 6)?;
    let p = shifted_opoly(j, n_max + 6, z);
    let (wr, _) = wronskian_pu(j, &p, &jost.values);
    Ok((1..=n_max).map(|n| p[n].mul(jost.at(n)).value() / wr).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenComparison {
    /// sup over the grid of |G_nn − G̃_nn|, n = 1..=n_max.
    pub sup_diff: Vec<f64>,
    /// sup over the grid of |G_nn / G̃_nn − 1|.
    pub sup_ratio_dev: Vec<f64>,
    /// Fitted geometric rate of sup_diff per site.
    pub decay_rate: f64,
    pub excluded: Vec<(f64, f64)>,
}

/// Grid points within 1e-3 of an eigenvalue are excluded.
fn usable_grid(j: &JacobiCoeffs, grid: &[C64]) -> Result<(Vec<C64>, Vec<(f64, f64)>)> {
    let ev = gap_eigenvalues(j, 1e-10)?;
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for &z in grid {
        if ev.iter().any(|&(x, _)| (z - x).norm() < 1e-3) {
            excluded.push((z.re, z.im));
        } else {
            keep.push(z);
        }
    }
    Ok((keep, excluded))
}

pub fn compare_green(j: &JacobiCoeffs, bg: &JacobiCoeffs, grid: &[C64], n_max: usize) -> Result<GreenComparison> {
    let (grid, excluded) = usable_grid(j, grid)?;
    let mut sup_diff = vec![0.0f64; n_max];
    let mut sup_ratio = vec![0.0f64; n_max];
    for &z in &grid {
        let g = green_series(j, z, n_max)?;
        let gt = green_series(bg, z, n_max)?;
        for n in 0..n_max {
            sup_diff[n] = sup_diff[n].max((g[n] - gt[n]).norm());
            sup_ratio[n] = sup_ratio[n].max((g[n] / gt[n] - 1.0).norm());
        }
    }
    Ok(GreenComparison { decay_rate: fitted_rate(&sup_diff), sup_diff, sup_ratio_dev: sup_ratio, excluded })
}

/// Least-squares slope of log(series) per index over its resolvable part.
fn fitted_rate(series: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-14)
        .map(|(i, &v)| (i as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct SzegoRatioReport {
    /// sup over the grid of |r_{n+1} − r_n|, n = 1..n_max−1.
    pub sup_delta: Vec<f64>,
    /// First n beyond which every sup_delta stays below 1e-8.
    pub n0: Option<usize>,
    /// r_{n_max} per grid point.
    pub limits: Vec<(f64, f64)>,
    /// u_0(x; μ)/u_0(x; μ̃) per grid point.
    pub jost_limits: Vec<(f64, f64)>,
    pub max_limit_error: f64,
    pub excluded: Vec<(f64, f64)>,
}

/// r_n(x) = p_n(x; J)/p_n(x; J̃) off the convex hull of 𝔢.
pub fn szego_ratio(j: &JacobiCoeffs, bg: &JacobiCoeffs, grid: &[C64], n_max: usize) -> Result<SzegoRatioReport> {
    let g = j.gapset();
    if let Some(z) = grid.iter().find(|z| z.im == 0.0 && z.re >= g.lower() && z.re <= g.upper()) {
        return Err(FgjError::Domain(format!("grid point {z} inside the convex hull of the essential spectrum")));
    }
    let (grid, excluded) = usable_grid(j, grid)?;
    let mut sup_delta = vec![0.0f64; n_max.saturating_sub(1)];
    let mut limits = Vec::new();
    let mut jost_limits = Vec::new();
    let mut max_limit_error: f64 = 0.0;
    for &z in &grid {
        let p = opoly_scaled(j, n_max, z);
        let pt = opoly_scaled(bg, n_max, z);
        let r: Vec<C64> = (0..=n_max)
            .map(|n| {
                if pt.mant[n].norm() == 0.0 {
                    return Err(FgjError::Domain(format!("background polynomial vanishes at {z}")));
                }
                Ok(p.mant[n] / pt.mant[n] * (p.log_scale[n] - pt.log_scale[n]).exp())
            })
            .collect::<Result<_>>()?;
        for n in 1..n_max {
            sup_delta[n - 1] = sup_delta[n - 1].max((r[n + 1] - r[n]).norm());
        }
        let e = Energy::At(z);
        let u0 = jost_solution(j, e, 1)?.at(0);
        let ut0 = jost_solution(bg, e, 1)?.at(0);
        let lim = u0.mant / ut0.mant * (u0.scale - ut0.scale).exp();
        max_limit_error = max_limit_error.max((r[n_max] - lim).norm());
        limits.push((r[n_max].re, r[n_max].im));
        jost_limits.push((lim.re, lim.im));
    }
    let n0 = (1..n_max).find(|&n0| sup_delta[n0 - 1..].iter().all(|&d| d < 1e-8));
    Ok(SzegoRatioReport { sup_delta, n0, limits, jost_limits, max_limit_error, excluded })
}

/// (min, max) over n ≤ n_max of |p̃_{n−1}(x)| e^{−n G(x)} at a real x.
pub fn background_growth_band(bg: &JacobiCoeffs, eq: &EquilibriumData, x: f64, n_max: usize) -> Result<(f64, f64)> {
    let g = eq.green(x)?;
    let p = opoly_scaled(bg, n_max, C64::new(x, 0.0));
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for n in 1..=n_max {
        let v = (p.ln_abs(n - 1) - n as f64 * g).exp();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// a₁⋯a_n / (ã₁⋯ã_n) for n = 1..=N.
pub fn an_ratio(j: &JacobiCoeffs, bg: &JacobiCoeffs, n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=n)
        .map(|k| {
            acc += j.a(k).ln() - bg.a(k).ln();
            acc.exp()
        })
        .collect()
}

/// |a_n − ã_n| + |b_n − b̃_n| for n = 1..=N.
pub fn coeff_convergence(j: &JacobiCoeffs, bg: &JacobiCoeffs, n: usize) -> Vec<f64> {
    (1..=n).map(|k| (j.a(k) - bg.a(k)).abs() + (j.b(k) - bg.b(k)).abs()).collect()
}

/// Pieces of the band decomposition p_n = k_n⁺ + k_n⁻ at x + i0.
struct BandJost {
    u0: C64,
    wr: C64,
    tail: FloquetSolution,
}

fn band_jost(j: &JacobiCoeffs, pt: &BandPoint, n_max: usize) -> Result<BandJost> {
    let (jost, tail) = jost_at_point(j, pt, n_max)?;
    let u0 = jost[0].value();
    // Wr(ũ⁻, ũ⁺) from the background block at site 1
    let bgop = j.asymptotic_background();
    let (u1, u2) = (tail.block[0], tail.block[1]);
    let wr = bgop.a(1) * (u1.conj() * u2 - u2.conj() * u1);
    Ok(BandJost { u0, wr, tail })
}

impl BandJost {
    /// k_n⁺ = conj(u_0) ũ⁺_{n+1} / Wr(ũ⁻, ũ⁺).
    fn k_plus(&self, n: usize) -> C64 {
        self.u0.conj() * self.tail.at(n + 1).value() / self.wr
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Report {
    pub n: usize,
    pub ac_error: f64,
    pub mass_error: f64,
    pub quad_error: f64,
}

/// ∫_𝔢 |p_n − (k_n⁺ + k_n⁻)|² w dx and Σ_k μ_k p_n(x_k)².
pub fn l2_szego_error(j: &JacobiCoeffs, eq: &EquilibriumData, n: usize, quad_tol: f64) -> Result<L2Report> {
    let integrand = |pt: &BandPoint| -> f64 {
        let Ok(bj) = band_jost(j, pt, 1) else { return f64::NAN };
        let p = opoly_eval(j, n, C64::new(pt.x, 0.0))[n].re;
        let k = bj.k_plus(n);
        let w = spectral_weight_at(j, pt).unwrap_or(f64::NAN);
        (p - 2.0 * k.re).powi(2) * w
    };
    let r = band_integral(eq, integrand, Measure::Lebesgue, quad_tol)?;
    let mass_error = gap_eigenvalues(j, 1e-10)?
        .iter()
        .map(|&(x, mu)| mu * opoly_eval(j, n, C64::new(x, 0.0))[n].re.powi(2))
        .sum();
    Ok(L2Report { n, ac_error: r.value, mass_error, quad_error: r.error })
}

/// Twenty real points on [β + 1, β + 3] above the spectrum.
pub fn real_grid(g: &GapSet) -> Vec<C64> {
    (0..20).map(|k| C64::new(g.upper() + 1.0 + 2.0 * k as f64 / 19.0, 0.0)).collect()
}

/// The real grid plus eight points on a circle around the convex hull of 𝔢.
pub fn standard_grid(g: &GapSet) -> Vec<C64> {
    let centre = 0.5 * (g.lower() + g.upper());
    let radius = 0.5 * g.span() + 1.0;
    let mut grid = real_grid(g);
    grid.extend((0..8).map(|k| centre + C64::from_polar(radius, PI * (k as f64 + 0.5) / 4.0)));
    grid
}

/// Band-interior grid with a 1e-3·bandwidth margin at each edge.
pub fn band_grid(g: &GapSet, per_band: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for (k, &(a, b)) in g.bands().iter().enumerate() {
        let margin = 1e-3 * (b - a);
        for i in 0..per_band {
            let t = (i as f64 + 0.5) / per_band as f64;
            out.push((k, a + margin + t * (b - a - 2.0 * margin)));
        }
    }
    out
}

/// max over grid and n ≤ n_max of |p_n − (u⁺_0 u⁻_{n+1} − u⁻_0 u⁺_{n+1})/Wr(u⁺,u⁻)|,
/// relative to the size 2|u_0||u_{n+1}|/|Wr| of the two terms.
pub fn reconstruction_residual(j: &JacobiCoeffs, per_band: usize, n_max: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (k, x) in band_grid(j.gapset(), per_band) {
        let pt = BandPoint::from_x(j.gapset(), k, x);
        let (jost, _) = jost_at_point(j, &pt, n_max + 1)?;
        let u: Vec<C64> = jost.iter().map(|s| s.value()).collect();
        // Wr(u⁺, u⁻) at site 1
        let wr = j.a(1) * (u[1] * u[2].conj() - u[2] * u[1].conj());
        let p = opoly_eval(j, n_max, C64::new(x, 0.0));
        for n in 0..=n_max {
            let rebuilt = (u[0] * u[n + 1].conj() - u[0].conj() * u[n + 1]) / wr;
            let size = 2.0 * u[0].norm() * u[n + 1].norm() / wr.norm();
            worst = worst.max((rebuilt - p[n]).norm() / size);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct BackgroundIdentities {
    pub phase: usize,
    pub a0: f64,
    /// ∫_𝔢 dx / w̃.
    pub inverse_weight_integral: f64,
    /// 2π² ã₀².
    pub expected: f64,
    pub identity_error: f64,
    /// Wr(ũ⁺, ũ⁻)/(2πi): (max imaginary part relative, min real part).
    pub wr_max_imag_rel: f64,
    pub wr_min_real: f64,
    /// max relative deviation of Wr/(2πi w̃) from |ã₀ψ₀|², the factor set by ψ₁ = 1.
    pub wr_ratio_error: f64,
}

/// Identities of the periodic background at a given phase.
pub fn background_identities(bg: &JacobiCoeffs, eq: &EquilibriumData, per_band: usize, tol: f64) -> Result<BackgroundIdentities> {
    if bg.head_len() != 0 {
        return Err(FgjError::Domain("background identities need an operator without head".into()));
    }
    let a0 = bg.a0_two_sided();
    let inv = band_integral(eq, |p| 1.0 / spectral_weight_at(bg, p).unwrap_or(f64::NAN), Measure::Lebesgue, tol)?;
    let expected = 2.0 * PI * PI * a0 * a0;
    let mut max_imag: f64 = 0.0;
    let mut min_real = f64::INFINITY;
    let mut ratio_err: f64 = 0.0;
    for (k, x) in band_grid(bg.gapset(), per_band) {
        let pt = BandPoint::from_x(bg.gapset(), k, x);
        let fl = bg.tail().floquet_band(bg.phase(), &pt)?;
        let sol = solution_from_floquet(bg.tail(), bg.phase(), Energy::Above(x), fl)?;
        let (u1, u2) = (sol.block[0], sol.block[1]);
        let wr = bg.a(1) * (u1 * u2.conj() - u2 * u1.conj()) / C64::new(0.0, 2.0 * PI);
        max_imag = max_imag.max(wr.im.abs() / wr.norm());
        min_real = min_real.min(wr.re);
        // two-sided ψ₀ from the Floquet vector (ψ₁, ã₀ψ₀)
        let a0psi0 = fl.v[1] / fl.v[0];
        let w = spectral_weight_at(bg, &pt)?;
        ratio_err = ratio_err.max((wr.re / w - a0psi0.norm_sqr()).abs() / a0psi0.norm_sqr());
    }
    Ok(BackgroundIdentities {
        phase: bg.phase(),
        a0,
        inverse_weight_integral: inv.value,
        expected,
        identity_error: (inv.value - expected).abs(),
        wr_max_imag_rel: max_imag,
        wr_min_real: min_real,
        wr_ratio_error: ratio_err,
    })
}

/// I_n = ∫_𝔢 cos(n Ĝ(x)) f(x) dρ(x), the average of e^{∓inĜ} over both lips.
pub fn oscillatory_decay(eq: &EquilibriumData, f: &dyn Fn(f64) -> f64, ns: &[usize], tol: f64) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| {
            let g = |p: &BandPoint| match eq.phase_at(p) {
                Ok(ph) => (n as f64 * ph).cos() * f(p.x),
                Err(_) => f64::NAN,
            };
            Ok((n, band_integral(eq, g, Measure::Equilibrium, tol)?.value))
        })
        .collect()
}

/// p_{n−1} = α u⁻_n + β u⁺_n at real x off the hull, with u⁺ the Jost solution
/// and u⁻ its growing partner continuing the background's growing Floquet solution.
#[derive(Debug, Clone, Serialize)]
pub struct BandDecomposition {
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub max_rel_error: f64,
}

pub fn band_decomposition(j: &JacobiCoeffs, x: f64, n_test: usize) -> Result<BandDecomposition> {
    let z = C64::new(x, 0.0);
    let plus = jost_solution(j, Energy::At(z), n_test + 1)?;
    // growing partner: backward recurrence from the background's growing Floquet values
    let bg = j.asymptotic_background();
    let fl = bg.tail().floquet_off(bg.phase(), z)?;
    let t = fl.transfer;
    let lam = fl.lambda.inv();
    let v = if t[1][0].norm() >= (t[0][0] - lam).norm() { [lam - t[1][1], t[1][0]] } else { [-t[0][1], t[0][0] - lam] };
    let grow = FloquetSolution { lambda: lam, ..solution_from_floquet(bg.tail(), bg.phase(), Energy::At(z), Floquet { lambda: lam, v, m: -v[0] / v[1], transfer: t })? };
    let minus = jost_from_tail(j, z, &grow, n_test + 1);
    let up: Vec<f64> = plus.values.iter().map(|s| s.value().re).collect();
    let um: Vec<f64> = minus.iter().map(|s| s.value().re).collect();
    // Wr(f, g) at site 0 with a_0 = 1
    let wr = |f: &[f64], g: &[f64]| f[0] * g[1] - f[1] * g[0];
    let wr_mp = wr(&um, &up);
    // Wr(p_{·−1}, g) = −g_0
    let alpha = -up[0] / wr_mp;
    let beta = um[0] / wr_mp;
    let p = opoly_eval(j, n_test, z);
    let mut worst: f64 = 0.0;
    for n in 1..=n_test {
        let rebuilt = alpha * um[n] + beta * up[n];
        let size = (alpha * um[n]).abs() + (beta * up[n]).abs();
        worst = worst.max((rebuilt - p[n - 1].re).abs() / size);
    }
    Ok(BandDecomposition { x, alpha, beta, max_rel_error: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapset::solve_equilibrium;
    use crate::jacobi::period2_from_bands;
    use std::sync::Arc;

    fn head_b() -> JacobiCoeffs {
        JacobiCoeffs::with_head(vec![1.0], vec![2.0], Arc::new(PeriodicBackground::free()), 0).unwrap()
    }

    #[test]
    fn floquet_examples() {
        let free = PeriodicBackground::free();
        let s = floquet_solution(&free, 0, Energy::real(2.5)).unwrap();
        assert!((s.lambda - 0.5).norm() < 1e-15);
        assert!((s.at(4).value() - 0.125).norm() < 1e-15);
        let s0 = floquet_solution(&free, 0, Energy::Above(0.0)).unwrap();
        assert!((s0.lambda - C64::new(0.0, -1.0)).norm() < 1e-15);
        let bg = period2_from_bands(1.0, 2.0).unwrap();
        assert!(floquet_solution(&bg, 0, Energy::real(3.0)).unwrap().lambda.norm() < 1.0);
    }

    #[test]
    fn jost_examples() {
        assert!(jost_solution(&head_b(), Energy::real(2.5), 5).is_err());
        let u = jost_solution(&head_b(), Energy::real(3.0), 50).unwrap();
        assert!(u.recurrence_residual(&head_b()) < 1e-12);
    }

    #[test]
    fn green_free_at_three() {
        let g = green_diag(&JacobiCoeffs::free(), C64::new(3.0, 0.0), 1).unwrap();
        assert!((g.value() - (-3.0 + 5f64.sqrt()) / 2.0).norm() < 1e-14);
        assert!(g.wronskian_spread < 1e-12);
        assert!(green_diag(&head_b(), C64::new(2.5, 0.0), 1).is_err());
    }

    #[test]
    fn weyl_matches_resolvent() {
        let j = head_b();
        let z = C64::new(0.4, 0.3);
        let col = section_resolvent_column(&j, z, 400, 1);
        for n in 1..6 {
            assert!((weyl_solution(&j, z, n).unwrap() + col[n - 1]).norm() < 1e-10);
        }
    }

    #[test]
    fn band_reconstruction_background() {
        let bg = JacobiCoeffs::background(Arc::new(period2_from_bands(1.0, 2.0).unwrap()), 1);
        assert!(reconstruction_residual(&bg, 10, 300).unwrap() < 1e-8);
        assert!(reconstruction_residual(&JacobiCoeffs::free(), 10, 300).unwrap() < 1e-8);
    }

    #[test]
    fn arcsine_identity_free() {
        let eq = solve_equilibrium(&GapSet::interval(-2.0, 2.0).unwrap(), 1e-12).unwrap();
        let r = background_identities(&JacobiCoeffs::free(), &eq, 20, 1e-12).unwrap();
        assert!(r.identity_error < 1e-8, "{r:?}");
        assert!(r.wr_min_real > 0.0 && r.wr_ratio_error < 1e-10);
    }

    #[test]
    fn decomposition_off_hull() {
        let d = band_decomposition(&head_b(), 3.0, 40).unwrap();
        assert!(d.max_rel_error < 1e-8, "{d:?}");
    }
}
