//! The single-interval case 𝔢 = [−2, 2] through its covering map x(z) = z + 1/z.
//!
//! Here B(z) = z, the Blaschke factors are elementary and the Szegő part is a
//! power series whose coefficients are Fourier coefficients of a log-ratio on
//! the circle. Boundary point e^{−iθ} corresponds to x = 2cos θ + i0.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{FgjError, Result};
use crate::gapset::{BandPoint, GapSet};
use crate::jacobi::{gap_eigenvalues, m_function, spectral_weight_at, Energy, JacobiCoeffs};

type C64 = Complex64;

/// x(z) = z + 1/z.
pub fn cover0(z: C64) -> C64 {
    z + z.inv()
}

/// The preimage of x in the open unit disk (x off [−2, 2]).
pub fn cover0_inv(x: C64) -> Result<C64> {
    if x.im == 0.0 && x.re.abs() <= 2.0 {
        return Err(FgjError::Domain(format!("{} lies on [−2, 2]; use a boundary value", x.re)));
    }
    let s = (x - 2.0).sqrt() * (x + 2.0).sqrt();
    let (z1, z2) = ((x - s) * 0.5, (x + s) * 0.5);
    // pick the small root without cancellation: z_small = 1 / z_big
    Ok(if z1.norm() <= z2.norm() { z2.inv() } else { z1.inv() })
}

/// Boundary preimage of x + i0 for x ∈ (−2, 2): e^{−iθ} with x = 2cos θ.
pub fn cover0_inv_above(x: f64) -> Result<C64> {
    if x.abs() >= 2.0 {
        return Err(FgjError::Domain(format!("{x} is not inside (−2, 2)")));
    }
    Ok(C64::from_polar(1.0, -(0.5 * x).acos()))
}

fn check_single_interval(j: &JacobiCoeffs) -> Result<()> {
    let g = j.gapset();
    if g.ell() != 0 || (g.lower() + 2.0).abs() > 1e-12 || (g.upper() - 2.0).abs() > 1e-12 {
        return Err(FgjError::Domain("the disk model needs essential spectrum [−2, 2]".into()));
    }
    Ok(())
}

/// M(z) = −m(x(z)).
#[allow(non_snake_case)]
pub fn M_of(j: &JacobiCoeffs, z: C64) -> Result<C64> {
    check_single_interval(j)?;
    if z.norm() >= 1.0 {
        return Err(FgjError::Domain(format!("{z} is not in the open unit disk")));
    }
    if z == C64::new(0.0, 0.0) {
        return Ok(z);
    }
    let x = cover0(z);
    let x = if x.im == 0.0 { Energy::real(x.re) } else { Energy::At(x) };
    Ok(-m_function(j, x)?)
}

/// Disk Blaschke factor vanishing at p, positive at 0.
pub fn blaschke_factor(z: C64, p: f64) -> C64 {
    if p == 0.0 {
        return z;
    }
    p.signum() * (p - z) / (1.0 - p * z)
}

/// Π b(z, zero) / Π b(z, pole); poles and zeros must alternate on (−1, 0) and on (0, 1).
pub fn alternating_blaschke(poles: &[f64], zeros: &[f64], z: C64) -> Result<C64> {
    for side in [-1.0, 1.0] {
        let mut pts: Vec<(f64, bool)> = poles
            .iter()
            .map(|&p| (p, true))
            .chain(zeros.iter().map(|&q| (q, false)))
            .filter(|&(p, _)| p * side > 0.0)
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[0].1 == w[1].1) {
            return Err(FgjError::Domain("poles and zeros do not interlace".into()));
        }
    }
    if let Some(p) = poles.iter().chain(zeros).find(|p| !(p.abs() < 1.0 && **p != 0.0)) {
        return Err(FgjError::Domain(format!("Blaschke point {p} outside (−1, 1)∖{{0}}")));
    }
    let num: C64 = zeros.iter().map(|&q| blaschke_factor(z, q)).product();
    let den: C64 = poles.iter().map(|&p| blaschke_factor(z, p)).product();
    Ok(num / den)
}

/// Even function f(θ) = g(2cos θ) on the circle, stored as Taylor data of the
/// analytic function with real part f on the boundary: ½c₀ + Σ c_k z^k.
#[derive(Debug, Clone)]
pub struct CircleSeries {
    pub coeffs: Vec<f64>,
    pub nodes: usize,
}

impl CircleSeries {
    /// Fourier coefficients c_k = (1/2π)∫ f e^{−ikθ} dθ by midpoint trapezoid with node
    /// doubling until the coefficients stabilise.
    pub fn build(f: &dyn Fn(f64) -> f64, tol: f64) -> Result<Self> {
        let mut n = 256;
        let mut prev: Option<Vec<f64>> = None;
        while n <= 1 << 17 {
            let c = fourier_even(f, n);
            if c.iter().any(|v| !v.is_finite()) {
                return Err(FgjError::Quadrature {
                    message: "log-ratio not finite on the circle (Szegő integral diverges)".into(),
                    estimate: f64::NAN,
                });
            }
            if let Some(p) = &prev {
                let diff = p.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let tail = c[c.len() * 3 / 4..].iter().map(|v| v.abs()).fold(0.0, f64::max);
                if diff < tol && tail < tol {
                    return Ok(CircleSeries { coeffs: c, nodes: n });
                }
            }
            prev = Some(c);
            n *= 2;
        }
        Err(FgjError::Quadrature {
            message: "circle Fourier coefficients did not settle".into(),
            estimate: prev.map_or(f64::NAN, |c| c[0]),
        })
    }

    /// ½c₀ + Σ_{k≥1} c_k z^k.
    pub fn eval(&self, z: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs[1..].iter().rev() {
            acc = (acc + c) * z;
        }
        acc + 0.5 * self.coeffs[0]
    }
}

fn fourier_even(f: &dyn Fn(f64) -> f64, n: usize) -> Vec<f64> {
    let h = 2.0 * PI / n as f64;
    let mut buf: Vec<C64> = (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) * h;
            C64::new(f(if t > PI { 2.0 * PI - t } else { t }), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // midpoint nodes carry a phase e^{−ikh/2}
    (0..n / 2).map(|k| (buf[k] * C64::from_polar(1.0, -0.5 * k as f64 * h)).re / n as f64).collect()
}

/// Weight evaluated at x = 2cos θ, θ ∈ (0, π), with exact edge offsets.
fn weight_on_circle(j: &JacobiCoeffs, theta: f64) -> f64 {
    let g = j.gapset();
    spectral_weight_at(j, &BandPoint::new(g, 0, theta)).unwrap_or(f64::NAN)
}

/// √(4 − x²)/(2π) at x = 2cos θ: the reference weight.
fn free_weight(theta: f64) -> f64 {
    theta.sin() / PI
}

/// Weight, Blaschke points and Szegő series of an operator with 𝔢 = [−2, 2].
#[derive(Debug, Clone)]
pub struct DiskMeasure {
    pub zk: Vec<f64>,
    pub szego: CircleSeries,
}

impl DiskMeasure {
    pub fn of_operator(j: &JacobiCoeffs, tol: f64) -> Result<Self> {
        check_single_interval(j)?;
        let zk = gap_eigenvalues(j, 1e-10)?
            .iter()
            .map(|&(x, _)| cover0_inv(C64::new(x, 0.0)).map(|z| z.re))
            .collect::<Result<Vec<_>>>()?;
        let jj = j.clone();
        let f = move |t: f64| (free_weight(t) / weight_on_circle(&jj, t)).ln();
        Ok(DiskMeasure { zk, szego: CircleSeries::build(&f, tol)? })
    }

    /// u(z; μ) = Π b(z, z_k) · exp(Szegő part).
    pub fn jost(&self, z: C64) -> C64 {
        let b: C64 = self.zk.iter().map(|&p| blaschke_factor(z, p)).product();
        b * self.szego.eval(z).exp()
    }
}

/// Jost function u(z; μ_J) with the free weight as reference.
pub fn jost0(j: &JacobiCoeffs, z: C64, tol: f64) -> Result<C64> {
    if z.norm() >= 1.0 {
        return Err(FgjError::Domain(format!("{z} is not in the open unit disk")));
    }
    Ok(DiskMeasure::of_operator(j, tol)?.jost(z))
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlocalReport {
    pub grid: usize,
    pub nodes: usize,
    /// max |log(a₁M / (B B_∞ e^{…}))| over the grid.
    pub max_residual: f64,
    pub b_inf_at_0: f64,
    /// log B_∞(0) + ½c₀, which the sum rule at z → 0 equates with log(a₁/cap).
    pub log_rhs_at_0: f64,
    pub log_a1: f64,
    /// max over the grid and n ≤ n_max of |a_n u_n z^{−n} − u(z; μ_n)| / |u(z; μ_n)|.
    pub jost_identity_residual: f64,
}

/// The nonlocal one-step sum rule and the Jost identity a_n u_n(z) = z^n u(z; μ_n).
pub fn verify_nonlocal_sumrule(j: &JacobiCoeffs, radius: f64, grid: usize, n_max: usize, tol: f64) -> Result<NonlocalReport> {
    check_single_interval(j)?;
    let j1 = j.strip(1);
    let to_z = |x: f64| cover0_inv(C64::new(x, 0.0)).map(|z| z.re);
    let poles = gap_eigenvalues(j, 1e-10)?.iter().map(|e| to_z(e.0)).collect::<Result<Vec<_>>>()?;
    let zeros = gap_eigenvalues(&j1, 1e-10)?.iter().map(|e| to_z(e.0)).collect::<Result<Vec<_>>>()?;
    let (jj, jj1) = (j.clone(), j1.clone());
    let ratio = move |t: f64| (weight_on_circle(&jj, t) / weight_on_circle(&jj1, t)).ln();
    let series = CircleSeries::build(&ratio, tol * 1e-3)?;
    let a1 = j.a(1);
    let mut max_residual: f64 = 0.0;
    let zs: Vec<C64> = (0..grid).map(|k| C64::from_polar(radius, 2.0 * PI * (k as f64 + 0.5) / grid as f64)).collect();
    for &z in &zs {
        let lhs = a1 * M_of(j, z)?;
        let rhs = z * alternating_blaschke(&poles, &zeros, z)? * series.eval(z).exp();
        max_residual = max_residual.max((lhs / rhs).ln().norm());
    }
    let b0 = alternating_blaschke(&poles, &zeros, C64::new(0.0, 0.0))?.re;

    // a_n u(z; μ) W_n(z) z^{−n} = u(z; μ_n)
    let disk = DiskMeasure::of_operator(j, tol * 1e-3)?;
    let stripped: Vec<DiskMeasure> = (1..=n_max).map(|n| DiskMeasure::of_operator(&j.strip(n), tol * 1e-3)).collect::<Result<_>>()?;
    let mut jost_res: f64 = 0.0;
    for &z in &zs {
        let u = disk.jost(z);
        let mut w = M_of(j, z)?;
        for n in 1..=n_max {
            if n > 1 {
                w *= j.a(n - 1) * M_of(&j.strip(n - 1), z)?;
            }
            let lhs = j.a(n) * u * w / z.powi(n as i32);
            let rhs = stripped[n - 1].jost(z);
            jost_res = jost_res.max((lhs - rhs).norm() / rhs.norm());
        }
    }
    Ok(NonlocalReport {
        grid,
        nodes: series.nodes,
        max_residual,
        b_inf_at_0: b0,
        log_rhs_at_0: b0.ln() + 0.5 * series.coeffs[0],
        log_a1: a1.ln(),
        jost_identity_residual: jost_res,
    })
}

/// |a₁M(re^{iθ})|² Im M⁽¹⁾ / Im M at radius r; tends to 1 as r ↑ 1.
pub fn boundary_modulus_ratio(j: &JacobiCoeffs, r: f64, theta: f64) -> Result<f64> {
    let z = C64::from_polar(r, theta);
    let m = M_of(j, z)?;
    let m1 = M_of(&j.strip(1), z)?;
    Ok((j.a(1) * m).norm_sqr() * m1.im / m.im)
}

/// |u(re^{−iθ})|² w(2cos θ)/v(2cos θ), which tends to 1 as r ↑ 1.
pub fn boundary_jost_ratio(j: &JacobiCoeffs, disk: &DiskMeasure, r: f64, theta: f64) -> f64 {
    let u = disk.jost(C64::from_polar(r, -theta));
    u.norm_sqr() * weight_on_circle(j, theta) / free_weight(theta)
}

/// The free operator's gap set.
pub fn free_set() -> Arc<GapSet> {
    Arc::new(GapSet::interval(-2.0, 2.0).expect("valid interval"))
}
