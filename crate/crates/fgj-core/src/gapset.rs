//! Finite gap sets and their potential theory.
//!
//! The equilibrium density is carried analytically as |Q(x)| / (π √|R(x)|) with
//! R(x) = ∏ (x − α_j)(x − β_j) and Q monic of degree ℓ, one zero per gap.
//! Band integrals use x = m + h cos θ per band so that inverse square root
//! edge behaviour becomes smooth in θ.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FgjError, Result};
use crate::quad::{self, QuadOptions, QuadResult};

/// Disjoint closed bands α_1 < β_1 < α_2 < … < β_{ℓ+1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GapSetJson", into = "GapSetJson")]
pub struct GapSet {
    bands: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct GapSetJson {
    bands: Vec<[f64; 2]>,
}

impl TryFrom<GapSetJson> for GapSet {
    type Error = FgjError;
    fn try_from(j: GapSetJson) -> Result<Self> {
        GapSet::new(j.bands.into_iter().map(|[a, b]| (a, b)).collect())
    }
}

impl From<GapSet> for GapSetJson {
    fn from(g: GapSet) -> Self {
        GapSetJson { bands: g.bands.iter().map(|&(a, b)| [a, b]).collect() }
    }
}

impl GapSet {
    pub fn new(bands: Vec<(f64, f64)>) -> Result<Self> {
        if bands.is_empty() {
            return Err(FgjError::GapSet("no bands".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for &(a, b) in &bands {
            if !a.is_finite() || !b.is_finite() {
                return Err(FgjError::GapSet("non-finite band edge".into()));
            }
            if !(prev < a && a < b) {
                return Err(FgjError::GapSet(format!(
                    "band edges must be strictly increasing, got [{a}, {b}] after {prev}"
                )));
            }
            prev = b;
        }
        let span = bands[bands.len() - 1].1 - bands[0].0;
        if let Some(&(a, b)) = bands.iter().find(|(a, b)| b - a < 1e-9 * span) {
            return Err(FgjError::GapSet(format!("band [{a}, {b}] is degenerate")));
        }
        Ok(Self { bands })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    /// Number of gaps.
    pub fn ell(&self) -> usize {
        self.bands.len() - 1
    }

    /// Open gaps (β_j, α_{j+1}).
    pub fn gaps(&self) -> Vec<(f64, f64)> {
        self.bands.windows(2).map(|w| (w[0].1, w[1].0)).collect()
    }

    pub fn lower(&self) -> f64 {
        self.bands[0].0
    }

    pub fn upper(&self) -> f64 {
        self.bands[self.bands.len() - 1].1
    }

    pub fn span(&self) -> f64 {
        self.upper() - self.lower()
    }

    /// All 2ℓ+2 edges in increasing order.
    pub fn edges(&self) -> Vec<f64> {
        self.bands.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.bands.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Index of the band containing x (closed bands).
    pub fn band_of(&self, x: f64) -> Option<usize> {
        self.bands.iter().position(|&(a, b)| a <= x && x <= b)
    }

    pub fn is_edge(&self, x: f64) -> bool {
        self.bands.iter().any(|&(a, b)| x == a || x == b)
    }

    /// Symmetric under x ↦ −x (to relative 1e-14).
    pub fn is_symmetric(&self) -> bool {
        let e = self.edges();
        let s = self.span();
        e.iter().zip(e.iter().rev()).all(|(x, y)| (x + y).abs() <= 1e-14 * s)
    }
}

/// Euclidean distance from x to the set.
pub fn dist_to_set(gapset: &GapSet, x: f64) -> f64 {
    gapset
        .bands
        .iter()
        .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

/// Distance from x to ℝ∖𝔢 (zero off the set).
pub fn dist_to_complement(gapset: &GapSet, x: f64) -> f64 {
    match gapset.band_of(x) {
        Some(k) => {
            let (a, b) = gapset.bands[k];
            (x - a).min(b - x)
        }
        None => 0.0,
    }
}

/// A quadrature node on band `band` at angle θ, with edge offsets computed
/// without cancellation: d_lo = x − α, d_hi = β − x.
#[derive(Debug, Clone, Copy)]
pub struct BandPoint {
    pub band: usize,
    pub theta: f64,
    pub x: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl BandPoint {
    pub fn new(gapset: &GapSet, band: usize, theta: f64) -> Self {
        let (a, b) = gapset.bands[band];
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        let s = (0.5 * theta).sin();
        let c = (0.5 * theta).cos();
        let d_hi = 2.0 * h * s * s;
        let d_lo = 2.0 * h * c * c;
        let x = if d_hi < d_lo { b - d_hi } else { a + d_lo };
        let x = if theta == 0.0 { b } else { x };
        let _ = m;
        Self { band, theta, x, d_lo, d_hi }
    }

    /// Point for a given x inside band `band`.
    pub fn from_x(gapset: &GapSet, band: usize, x: f64) -> Self {
        let (a, b) = gapset.bands[band];
        let d_lo = x - a;
        let d_hi = b - x;
        let theta = 2.0 * d_hi.max(0.0).sqrt().atan2(d_lo.max(0.0).sqrt());
        Self { band, theta, x, d_lo, d_hi }
    }

    /// Distance to ℝ∖𝔢.
    pub fn dist(&self) -> f64 {
        self.d_lo.min(self.d_hi)
    }
}

/// Which measure [`band_integral`] integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Lebesgue,
    Equilibrium,
}

/// Equilibrium measure data of a gap set.
#[derive(Debug, Clone)]
pub struct EquilibriumData {
    gapset: GapSet,
    gap_zeros: Vec<f64>,
    log_capacity: f64,
    band_weights: Vec<f64>,
    quad_tol: f64,
    // |x| above which the exterior Green's function uses the tail expansion
    tail_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EquilibriumReport {
    pub gap_zeros: Vec<f64>,
    pub capacity: f64,
    pub band_weights: Vec<f64>,
}

fn quad_opts(tol: f64) -> QuadOptions {
    QuadOptions { abs_tol: tol, rel_tol: tol, max_intervals: 4000 }
}

/// ∏ |x − r| over the given roots.
fn abs_prod(x: f64, roots: impl IntoIterator<Item = f64>) -> f64 {
    roots.into_iter().map(|r| (x - r).abs()).product()
}

/// Solve for the equilibrium measure of `gapset`.
pub fn solve_equilibrium(gapset: &GapSet, tol: f64) -> Result<EquilibriumData> {
    if !(tol > 0.0) {
        return Err(FgjError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let ell = gapset.ell();
    let qtol = tol.min(1e-13);
    let center = 0.5 * (gapset.lower() + gapset.upper());
    let scale = 0.5 * gapset.span();
    let edges = gapset.edges();
    let gaps = gapset.gaps();

    let mut gap_zeros = Vec::with_capacity(ell);
    if ell > 0 {
        // I[j][k] = ∫_{gap j} y^k / √R dx with y = (x − center)/scale, k = 0..=ell
        let mut mat = DMatrix::<f64>::zeros(ell, ell);
        let mut rhs = DVector::<f64>::zeros(ell);
        for (j, &(g0, g1)) in gaps.iter().enumerate() {
            let gm = 0.5 * (g0 + g1);
            let gh = 0.5 * (g1 - g0);
            let others: Vec<f64> = edges.iter().copied().filter(|&e| e != g0 && e != g1).collect();
            for k in 0..=ell {
                let r = quad::integrate(
                    |t| {
                        let x = gm + gh * t.cos();
                        let y = (x - center) / scale;
                        y.powi(k as i32) / abs_prod(x, others.iter().copied()).sqrt()
                    },
                    0.0,
                    PI,
                    quad_opts(qtol),
                )?;
                if k < ell {
                    mat[(j, k)] = r.value;
                } else {
                    rhs[j] = -r.value;
                }
            }
        }
        let coeffs = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| FgjError::GapSet("singular equilibrium system (degenerate bands)".into()))?;
        let qy = |y: f64| {
            let mut v = 1.0;
            for k in (0..ell).rev() {
                v = v * y + coeffs[k];
            }
            v
        };
        for &(g0, g1) in &gaps {
            let f = |x: f64| qy((x - center) / scale);
            let (f0, f1) = (f(g0), f(g1));
            if f0.signum() == f1.signum() || f0 == 0.0 || f1 == 0.0 {
                return Err(FgjError::Consistency(format!(
                    "density polynomial has no sign change on gap ({g0}, {g1})"
                )));
            }
            gap_zeros.push(quad::brent(f, g0, g1, 1e-16 * scale, 200)?);
        }
    }

    let mut eq = EquilibriumData {
        gapset: gapset.clone(),
        gap_zeros,
        log_capacity: 0.0,
        band_weights: vec![],
        quad_tol: tol,
        tail_radius: edges.iter().fold(0.0f64, |m, e| m.max(e.abs())) + gapset.span(),
    };

    let mut weights = Vec::with_capacity(ell + 1);
    for k in 0..=ell {
        let r = quad::integrate(
            |t| {
                let p = BandPoint::new(gapset, k, t);
                eq.density_theta(&p)
            },
            0.0,
            PI,
            quad_opts(qtol),
        )?;
        weights.push(r.value);
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol.max(1e-12) {
        return Err(FgjError::Consistency(format!("equilibrium density integrates to {total}")));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(FgjError::Consistency("nonpositive band weight".into()));
    }
    eq.band_weights = weights;

    // −log cap = ∫_β^X Q/√R − log X + ∫_0^{1/X} (e^{L(s)} − 1)/s ds on either side
    let x0 = eq.tail_radius;
    let mut robin = [0.0; 2];
    for (i, sigma) in [1.0f64, -1.0].into_iter().enumerate() {
        let near = eq.exterior_direct(sigma * x0)?;
        let tail = eq.exterior_tail(sigma, 1.0 / x0)?;
        robin[i] = near - x0.ln() + tail;
    }
    if (robin[0] - robin[1]).abs() > 1e-9 {
        return Err(FgjError::Consistency(format!(
            "Robin constant differs between the two exterior paths: {} vs {}",
            robin[0], robin[1]
        )));
    }
    eq.log_capacity = if ell == 0 {
        // a single interval has cap = length/4 in closed form
        (0.25 * (edges[1] - edges[0])).ln()
    } else {
        -0.5 * (robin[0] + robin[1])
    };
    Ok(eq)
}

impl EquilibriumData {
    pub fn gapset(&self) -> &GapSet {
        &self.gapset
    }

    pub fn gap_zeros(&self) -> &[f64] {
        &self.gap_zeros
    }

    pub fn log_capacity(&self) -> f64 {
        self.log_capacity
    }

    pub fn capacity(&self) -> f64 {
        self.log_capacity.exp()
    }

    pub fn band_weights(&self) -> &[f64] {
        &self.band_weights
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn report(&self) -> EquilibriumReport {
        EquilibriumReport {
            gap_zeros: self.gap_zeros.clone(),
            capacity: self.capacity(),
            band_weights: self.band_weights.clone(),
        }
    }

    /// Q(x) = ∏ (x − c_j).
    pub fn q(&self, x: f64) -> f64 {
        self.gap_zeros.iter().map(|c| x - c).product()
    }

    /// Density times the θ-Jacobian h sin θ: |Q| / (π √|R_other|). Smooth in θ.
    fn density_theta(&self, p: &BandPoint) -> f64 {
        let (a, b) = self.gapset.bands[p.band];
        let others = self.gapset.edges().into_iter().filter(move |&e| e != a && e != b);
        self.q(p.x).abs() / (PI * abs_prod(p.x, others).sqrt())
    }

    /// dρ/dx at a band point, edge offsets used directly.
    pub fn density_at(&self, p: &BandPoint) -> f64 {
        let (a, b) = self.gapset.bands[p.band];
        let others = self.gapset.edges().into_iter().filter(move |&e| e != a && e != b);
        self.q(p.x).abs() / (PI * (p.d_lo * p.d_hi * abs_prod(p.x, others)).sqrt())
    }

    /// Mass of ρ on (x, β_band) for a band point.
    fn mass_right_in_band(&self, p: &BandPoint) -> Result<f64> {
        if p.theta == 0.0 {
            return Ok(0.0);
        }
        let g = &self.gapset;
        let r = quad::integrate(|t| self.density_theta(&BandPoint::new(g, p.band, t)), 0.0, p.theta, quad_opts(1e-14))?;
        Ok(r.value)
    }

    /// ρ((x, ∞)).
    pub fn mass_right_of(&self, x: f64) -> Result<f64> {
        let g = &self.gapset;
        let mut m = 0.0;
        for (k, &(a, b)) in g.bands.iter().enumerate() {
            if x < a {
                m += self.band_weights[k];
            } else if x < b {
                m += self.mass_right_in_band(&BandPoint::from_x(g, k, x))?;
            }
        }
        Ok(m)
    }

    /// Harmonic conjugate phase Ĝ(x+i0) = π ρ((x, ∞)) on the band point.
    pub fn phase_at(&self, p: &BandPoint) -> Result<f64> {
        let right: f64 = self.band_weights[p.band + 1..].iter().sum();
        Ok(PI * (right + self.mass_right_in_band(p)?))
    }

    /// ∫ from the edge e to x = e + σ u of Q/√R, with t = e + σ s² removing the edge root.
    fn edge_integral(&self, e: f64, x: f64) -> Result<f64> {
        let sigma = if x >= e { 1.0 } else { -1.0 };
        let smax = (x - e).abs().sqrt();
        if smax == 0.0 {
            return Ok(0.0);
        }
        let others: Vec<f64> = self.gapset.edges().into_iter().filter(|&r| r != e).collect();
        let r = quad::integrate(
            |s| {
                let t = e + sigma * s * s;
                2.0 * self.q(t) / abs_prod(t, others.iter().copied()).sqrt()
            },
            0.0,
            smax,
            quad_opts(1e-15),
        )?;
        Ok(r.value)
    }

    /// Direct exterior integral from the nearest hull edge to x (x outside the hull).
    fn exterior_direct(&self, x: f64) -> Result<f64> {
        let g = &self.gapset;
        let e = if x > g.upper() { g.upper() } else { g.lower() };
        Ok(self.edge_integral(e, x)?.abs())
    }

    /// ∫_0^{s1} (e^{L(s)} − 1)/s ds, L(s) = Σ log(1 − σ c s) − ½ Σ log(1 − σ r s).
    fn exterior_tail(&self, sigma: f64, s1: f64) -> Result<f64> {
        let edges = self.gapset.edges();
        let l = |s: f64| {
            let mut v = 0.0;
            for &c in &self.gap_zeros {
                v += (-sigma * c * s).ln_1p();
            }
            for &r in &edges {
                v -= 0.5 * (-sigma * r * s).ln_1p();
            }
            v
        };
        let r = quad::integrate(|s| l(s).exp_m1() / s, 0.0, s1, quad_opts(1e-15))?;
        Ok(r.value)
    }

    /// Green's function with pole at infinity.
    pub fn green(&self, x: f64) -> Result<f64> {
        let g = &self.gapset;
        if x.is_nan() {
            return Err(FgjError::Domain("NaN argument".into()));
        }
        if g.contains(x) {
            return Ok(0.0);
        }
        if x > g.upper() || x < g.lower() {
            let sigma = x.signum();
            if x.abs() >= self.tail_radius {
                let tail = self.exterior_tail(sigma, 1.0 / x.abs())?;
                return Ok(x.abs().ln() - self.log_capacity - tail);
            }
            return self.exterior_direct(x);
        }
        // in a gap: integrate from the nearer edge
        let (g0, g1) = g.gaps().into_iter().find(|&(a, b)| a < x && x < b).expect("x lies in a gap");
        let e = if x - g0 <= g1 - x { g0 } else { g1 };
        Ok(self.edge_integral(e, x)?.abs())
    }

    /// G + iĜ, analytic in the upper half plane, conjugate-symmetric, Ĝ → 0 at +∞.
    /// Real arguments are read as boundary values from above.
    pub fn complex_green(&self, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 {
            return Ok(self.complex_green(z.conj())?.conj());
        }
        let g = &self.gapset;
        let xb = z.re;
        let base = match g.band_of(xb) {
            Some(k) => {
                let p = BandPoint::from_x(g, k, xb);
                Complex64::new(0.0, self.phase_at(&p)?)
            }
            None => Complex64::new(self.green(xb)?, PI * self.mass_right_of(xb)?),
        };
        if z.im == 0.0 {
            return Ok(base);
        }
        // vertical path xb → xb + iy with s = σ²
        let edges = g.edges();
        let deriv = |s: f64| -> Complex64 {
            let t = Complex64::new(xb, s);
            let q: Complex64 = self.gap_zeros.iter().map(|&c| t - c).product();
            let sr: Complex64 = edges.iter().map(|&r| (t - r).sqrt()).product();
            q / sr
        };
        let smax = z.im.sqrt();
        let opts = quad_opts(1e-14);
        let re = quad::integrate(|u| (Complex64::i() * deriv(u * u) * 2.0 * u).re, 0.0, smax, opts)?;
        let im = quad::integrate(|u| (Complex64::i() * deriv(u * u) * 2.0 * u).im, 0.0, smax, opts)?;
        Ok(base + Complex64::new(re.value, im.value))
    }

    /// Equilibrium density at x (band interior).
    pub fn density(&self, x: f64) -> Result<f64> {
        match self.gapset.band_of(x) {
            Some(k) if !self.gapset.is_edge(x) => Ok(self.density_at(&BandPoint::from_x(&self.gapset, k, x))),
            _ => Err(FgjError::Domain(format!("density requested at {x}, not a band interior point"))),
        }
    }

    /// Grid-scanned bounds of density · dist^{1/2} per band: (min, max).
    pub fn density_envelope(&self, grid: usize) -> Vec<(f64, f64)> {
        let g = &self.gapset;
        (0..g.bands.len())
            .map(|k| {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for i in 1..grid {
                    let p = BandPoint::new(g, k, PI * i as f64 / grid as f64);
                    let v = self.density_at(&p) * p.dist().sqrt();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            })
            .collect()
    }

    /// Grid-fitted C with G(x) ≤ C dist(x, 𝔢)^{1/2} for points within `reach` of an edge.
    pub fn green_edge_constant(&self, reach: f64, grid: usize) -> Result<f64> {
        let g = &self.gapset;
        let mut c = 0.0f64;
        let lo = g.lower();
        let hi = g.upper();
        let gaps = g.gaps();
        for i in 0..grid {
            // geometric distances from 1e-10 · reach up to reach
            let d = reach * 10f64.powf(-10.0 * (1.0 - i as f64 / (grid - 1) as f64));
            let mut pts = vec![lo - d, hi + d];
            for &(a, b) in &gaps {
                let w = 0.5 * (b - a);
                if d < w {
                    pts.push(a + d);
                    pts.push(b - d);
                }
            }
            for x in pts {
                let v = self.green(x)? / dist_to_set(g, x).sqrt();
                c = c.max(v);
            }
        }
        Ok(c)
    }
}

/// Integrate f over 𝔢 against Lebesgue or equilibrium measure.
///
/// Each band is split at θ = π/2 so the kink of dist(x, ℝ∖𝔢) sits on a panel boundary.
pub fn band_integral<F: Fn(&BandPoint) -> f64>(eq: &EquilibriumData, f: F, measure: Measure, tol: f64) -> Result<QuadResult> {
    let g = eq.gapset();
    let nb = g.bands.len();
    let mut total = QuadResult { value: 0.0, error: 0.0, evaluations: 0 };
    let opts = QuadOptions { abs_tol: tol / (2 * nb) as f64, rel_tol: tol, max_intervals: 4000 };
    for k in 0..nb {
        let (a, b) = g.bands[k];
        let h = 0.5 * (b - a);
        let integrand = |t: f64| {
            let p = BandPoint::new(g, k, t);
            let fx = f(&p);
            match measure {
                Measure::Lebesgue => fx * h * t.sin(),
                Measure::Equilibrium => fx * eq.density_theta(&p),
            }
        };
        for (t0, t1) in [(0.0, 0.5 * PI), (0.5 * PI, PI)] {
            let r = quad::integrate(integrand, t0, t1, opts).map_err(|e| match e {
                FgjError::Quadrature { message, estimate } => FgjError::Quadrature { message, estimate: total.value + estimate },
                other => other,
            })?;
            total.value += r.value;
            total.error += r.error;
            total.evaluations += r.evaluations;
        }
    }
    Ok(total)
}

/// Convenience wrapper for integrands that only need x.
pub fn band_integral_x<F: Fn(f64) -> f64>(eq: &EquilibriumData, f: F, measure: Measure, tol: f64) -> Result<QuadResult> {
    band_integral(eq, |p| f(p.x), measure, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> EquilibriumData {
        solve_equilibrium(&GapSet::interval(-2.0, 2.0).unwrap(), 1e-12).unwrap()
    }

    fn sym() -> EquilibriumData {
        solve_equilibrium(&GapSet::new(vec![(-2.0, -1.0), (1.0, 2.0)]).unwrap(), 1e-12).unwrap()
    }

    #[test]
    fn rejects_bad_bands() {
        assert!(GapSet::new(vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(GapSet::new(vec![(1.0, 0.0)]).is_err());
        assert!(GapSet::new(vec![]).is_err());
        assert!(GapSet::new(vec![(0.0, 1e-12), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn free_capacity_and_density() {
        let eq = free();
        assert!(eq.log_capacity().abs() < 1e-12);
        assert!((eq.density(0.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-14);
        assert!(eq.density(2.0).is_err());
    }

    #[test]
    fn symmetric_two_band() {
        let eq = sym();
        assert!(eq.gap_zeros()[0].abs() < 1e-14);
        assert!((eq.capacity() - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((eq.band_weights()[0] - 0.5).abs() < 1e-13);
        for x in [1.1, 1.5, 1.9] {
            assert!((eq.density(x).unwrap() - eq.density(-x).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn green_joukowski() {
        let eq = free();
        for x in [2.000001f64, 2.5, 3.0, 10.0, 1e3, 1e6, -2.5, -7.0] {
            let exact = ((x.abs() + (x * x - 4.0f64).sqrt()) / 2.0).ln();
            let g = eq.green(x).unwrap();
            assert!((g - exact).abs() < 1e-12 * (1.0 + exact), "x={x}: {g} vs {exact}");
        }
        assert_eq!(eq.green(1.0).unwrap(), 0.0);
    }

    #[test]
    fn phases() {
        let eq = free();
        let ph0 = eq.complex_green(Complex64::new(0.0, 0.0)).unwrap();
        assert!((ph0.im - PI / 2.0).abs() < 1e-13);
        for x in [-1.9, -0.7, 0.3, 1.5] {
            let v = eq.complex_green(Complex64::new(x, 0.0)).unwrap();
            assert!((v.im - (x / 2.0f64).acos()).abs() < 1e-12);
            assert_eq!(v.re, 0.0);
        }
        assert!(eq.complex_green(Complex64::new(2.0, 0.0)).unwrap().im.abs() < 1e-15);
        let s = sym();
        assert!((s.complex_green(Complex64::new(-2.0, 0.0)).unwrap().im - PI).abs() < 1e-12);
        assert!((s.complex_green(Complex64::new(0.0, 0.0)).unwrap().im - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_green_matches_joukowski_off_axis() {
        let eq = free();
        for z in [Complex64::new(0.3, 0.5), Complex64::new(-1.0, 2.0), Complex64::new(2.0, 0.1), Complex64::new(3.0, -1.0)] {
            // w = (z + √(z²−4))/2 with |w| > 1, g = log w
            let s = (z - 2.0).sqrt() * (z + 2.0).sqrt();
            let w = (z + s) / 2.0;
            let g = w.ln();
            let v = eq.complex_green(z).unwrap();
            assert!((v - g).norm() < 1e-11, "{z}: {v} vs {g}");
        }
    }

    #[test]
    fn arcsine_integral() {
        let eq = free();
        let r = band_integral(&eq, |p| 2.0 * PI / (p.d_lo * p.d_hi).sqrt(), Measure::Lebesgue, 1e-12).unwrap();
        assert!((r.value - 2.0 * PI * PI).abs() < 1e-10);
        let one = band_integral_x(&eq, |_| 1.0, Measure::Equilibrium, 1e-12).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dist() {
        let g = GapSet::new(vec![(-2.0, -1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(dist_to_set(&g, 0.0), 1.0);
        assert_eq!(dist_to_set(&g, 1.5), 0.0);
        assert_eq!(dist_to_set(&GapSet::interval(-2.0, 2.0).unwrap(), 2.5), 0.5);
    }

    #[test]
    fn json_round_trip() {
        let g: GapSet = serde_json::from_str(r#"{"bands":[[-2,-1],[1,2]]}"#).unwrap();
        assert_eq!(g.ell(), 1);
        assert!(serde_json::from_str::<GapSet>(r#"{"bands":[[0,2],[1,3]]}"#).is_err());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<GapSet>(&s).unwrap(), g);
    }
}
