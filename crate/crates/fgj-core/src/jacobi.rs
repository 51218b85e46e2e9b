//! Half-line Jacobi operators with a finite head and an exactly periodic tail.
//!
//! Transfer matrices act on (ψ_n, a_{n−1} ψ_{n−1}) so they are unimodular and
//! never need the coupling in front of the first site.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FgjError, Result};
use crate::gapset::{BandPoint, GapSet};
use crate::quad;
use crate::spectra::TruncatedOperator;

type C64 = Complex64;

/// Where a function of the spectral parameter is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Energy {
    /// A point of ℂ off the spectrum (real points only off the bands).
    At(C64),
    /// Boundary value x + i0 on a band interior.
    Above(f64),
}

impl Energy {
    pub fn real(x: f64) -> Self {
        Energy::At(C64::new(x, 0.0))
    }

    pub fn z(&self) -> C64 {
        match *self {
            Energy::At(z) => z,
            Energy::Above(x) => C64::new(x, 0.0),
        }
    }
}

/// Exactly periodic coefficients ã_1..ã_p, b̃_1..b̃_p.
#[derive(Debug, Clone)]
pub struct PeriodicBackground {
    a: Vec<f64>,
    b: Vec<f64>,
    disc_coeffs: Vec<f64>,
    // all 2p roots of Δ² = 4, sorted, closed gaps appear as equal pairs
    roots: Vec<f64>,
    bands: GapSet,
}

impl PartialEq for PeriodicBackground {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len() + q.len() - 1];
    for (i, x) in p.iter().enumerate() {
        for (j, y) in q.iter().enumerate() {
            r[i + j] += x * y;
        }
    }
    r
}

fn poly_add(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; p.len().max(q.len())];
    for (i, x) in p.iter().enumerate() {
        r[i] += x;
    }
    for (i, x) in q.iter().enumerate() {
        r[i] += x;
    }
    r
}

impl PeriodicBackground {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let p = a.len();
        if p == 0 {
            return Err(FgjError::Tail("period must be at least 1".into()));
        }
        if b.len() != p {
            return Err(FgjError::Tail(format!("tail a has {} entries but b has {}", p, b.len())));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(FgjError::Tail("non-finite tail coefficient".into()));
        }
        if a.iter().any(|&v| v <= 0.0) {
            return Err(FgjError::Tail("tail a entries must be positive".into()));
        }
        // discriminant polynomial from the polynomial transfer matrix product
        let mut m = [vec![1.0], vec![0.0], vec![0.0], vec![1.0]];
        for n in 0..p {
            let t = [vec![-b[n] / a[n], 1.0 / a[n]], vec![-1.0 / a[n]], vec![a[n]], vec![0.0]];
            m = [
                poly_add(&poly_mul(&t[0], &m[0]), &poly_mul(&t[1], &m[2])),
                poly_add(&poly_mul(&t[0], &m[1]), &poly_mul(&t[1], &m[3])),
                poly_add(&poly_mul(&t[2], &m[0]), &poly_mul(&t[3], &m[2])),
                poly_add(&poly_mul(&t[2], &m[1]), &poly_mul(&t[3], &m[3])),
            ];
        }
        let mut disc_coeffs = poly_add(&m[0], &m[3]);
        disc_coeffs.truncate(p + 1);

        let mut roots = Vec::with_capacity(2 * p);
        if p == 1 {
            roots.push(b[0] - 2.0 * a[0]);
            roots.push(b[0] + 2.0 * a[0]);
        } else {
            for sign in [1.0, -1.0] {
                let mut h = DMatrix::<f64>::zeros(p, p);
                for i in 0..p {
                    h[(i, i)] = b[i];
                }
                for i in 0..p - 1 {
                    h[(i, i + 1)] += a[i];
                    h[(i + 1, i)] += a[i];
                }
                h[(p - 1, 0)] += sign * a[p - 1];
                h[(0, p - 1)] += sign * a[p - 1];
                roots.extend(SymmetricEigen::new(h).eigenvalues.iter().copied());
            }
        }
        roots.sort_by(f64::total_cmp);
        let span = roots[2 * p - 1] - roots[0];
        let mut bands: Vec<(f64, f64)> = Vec::new();
        for i in 0..p {
            let (lo, hi) = (roots[2 * i], roots[2 * i + 1]);
            match bands.last_mut() {
                Some(last) if lo - last.1 <= 1e-10 * span => {
                    last.1 = hi;
                }
                _ => bands.push((lo, hi)),
            }
        }
        let bands = GapSet::new(bands).map_err(|e| FgjError::Tail(format!("discriminant bands invalid: {e}")))?;
        Ok(Self { a, b, disc_coeffs, roots, bands })
    }

    pub fn free() -> Self {
        Self::new(vec![1.0], vec![0.0]).expect("free background is valid")
    }

    pub fn period(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn discriminant_coeffs(&self) -> &[f64] {
        &self.disc_coeffs
    }

    /// Δ⁻¹([−2, 2]) as a gap set.
    pub fn bands(&self) -> &GapSet {
        &self.bands
    }

    /// One-period transfer matrix for the half-line starting at background site `phase + 1`.
    pub fn transfer(&self, phase: usize, z: C64) -> [[C64; 2]; 2] {
        let p = self.period();
        let mut m = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
        for i in 0..p {
            let n = (phase + i) % p;
            let (an, bn) = (self.a[n], self.b[n]);
            let t00 = (z - bn) / an;
            let t01 = C64::new(-1.0 / an, 0.0);
            let t10 = C64::new(an, 0.0);
            m = [
                [t00 * m[0][0] + t01 * m[1][0], t00 * m[0][1] + t01 * m[1][1]],
                [t10 * m[0][0], t10 * m[0][1]],
            ];
        }
        m
    }

    pub fn discriminant(&self, x: f64) -> f64 {
        let t = self.transfer(0, C64::new(x, 0.0));
        (t[0][0] + t[1][1]).re
    }

    /// 4 − Δ(x)² at a band point, with the two edges of that band entering through
    /// their cancellation-free offsets.
    pub fn four_minus_disc_sq(&self, pt: &BandPoint) -> f64 {
        let (lo, hi) = self.bands.bands()[pt.band];
        let k: f64 = self.a.iter().map(|a| a.recip()).product::<f64>().powi(2);
        let mut used_lo = false;
        let mut used_hi = false;
        let mut prod = k;
        for &r in &self.roots {
            if r == lo && !used_lo {
                used_lo = true;
                prod *= pt.d_lo;
            } else if r == hi && !used_hi {
                used_hi = true;
                prod *= pt.d_hi;
            } else {
                prod *= (pt.x - r).abs();
            }
        }
        prod
    }

    /// Decaying Floquet data for the tail starting at `phase`.
    ///
    /// Off the bands the multiplier with |λ| < 1 is taken; on a band at +i0 the
    /// root is the one making the tail m-function Herglotz (Im m > 0).
    pub fn floquet(&self, phase: usize, e: Energy) -> Result<Floquet> {
        match e {
            Energy::At(z) => self.floquet_off(phase, z),
            Energy::Above(x) => {
                let k = self.band_interior(x)?;
                self.floquet_band(phase, &BandPoint::from_x(&self.bands, k, x))
            }
        }
    }

    fn band_interior(&self, x: f64) -> Result<usize> {
        match self.bands.band_of(x) {
            Some(k) if !self.bands.is_edge(x) => Ok(k),
            Some(_) => Err(FgjError::Domain(format!("x = {x} is a band edge"))),
            None => Err(FgjError::Domain(format!("x = {x} + i0 requested off the bands"))),
        }
    }

    pub(crate) fn floquet_off(&self, phase: usize, z: C64) -> Result<Floquet> {
        if z.im == 0.0 && self.bands.contains(z.re) {
            return Err(FgjError::Domain(format!(
                "real energy {} lies on the spectrum; use a +i0 boundary value",
                z.re
            )));
        }
        let t = self.transfer(phase, z);
        let d = t[0][0] + t[1][1];
        let s = (d * d - 4.0).sqrt();
        let big = if (d + s).norm() >= (d - s).norm() { (d + s) * 0.5 } else { (d - s) * 0.5 };
        let lambda = big.inv();
        Ok(Floquet::from_matrix(t, lambda))
    }

    pub(crate) fn floquet_band(&self, phase: usize, pt: &BandPoint) -> Result<Floquet> {
        let t = self.transfer(phase, C64::new(pt.x, 0.0));
        let d = (t[0][0] + t[1][1]).re;
        let s = self.four_minus_disc_sq(pt).max(0.0).sqrt();
        if s == 0.0 {
            return Err(FgjError::Domain(format!("x = {} is a band edge of the background", pt.x)));
        }
        let c = t[1][0].re;
        let lambda = C64::new(0.5 * d, -0.5 * s * c.signum());
        let fl = Floquet::from_matrix(t, lambda);
        // Im m = s / (2|C|) exactly; pin it to avoid cancellation in D − λ
        let m = C64::new(fl.m.re, 0.5 * s / c.abs());
        Ok(Floquet { m, ..fl })
    }

    /// m-function of the periodic half-line operator starting at `phase`.
    pub fn tail_m(&self, phase: usize, e: Energy) -> Result<C64> {
        Ok(self.floquet(phase, e)?.m)
    }
}

/// Decaying Floquet data: multiplier, eigenvector (ψ_1, a_0 ψ_0) and tail m = −ψ_1/(a_0 ψ_0).
#[derive(Debug, Clone, Copy)]
pub struct Floquet {
    pub lambda: C64,
    pub v: [C64; 2],
    pub m: C64,
    pub transfer: [[C64; 2]; 2],
}

impl Floquet {
    fn from_matrix(t: [[C64; 2]; 2], lambda: C64) -> Self {
        let (a, b, c, d) = (t[0][0], t[0][1], t[1][0], t[1][1]);
        // eigenvector from whichever row is better conditioned
        let (v, m) = if c.norm() >= (a - lambda).norm() {
            ([lambda - d, c], (d - lambda) / c)
        } else {
            ([-b, a - lambda], b / (a - lambda))
        };
        Floquet { lambda, v, m, transfer: t }
    }
}

/// Head coefficients followed by a periodic tail entered at `phase`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiCoeffs {
    head_a: Vec<f64>,
    head_b: Vec<f64>,
    tail: Arc<PeriodicBackground>,
    phase: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HeadJson {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TailJson {
    pub period: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub phase: usize,
}

/// JSON form {"head": {"a", "b"}, "tail": {"period", "a", "b", "phase"}}.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OperatorJson {
    #[serde(default = "empty_head")]
    pub head: HeadJson,
    pub tail: TailJson,
}

fn empty_head() -> HeadJson {
    HeadJson { a: vec![], b: vec![] }
}

impl OperatorJson {
    pub fn build(&self) -> Result<JacobiCoeffs> {
        let t = &self.tail;
        if t.period == 0 || t.a.len() != t.period || t.b.len() != t.period {
            return Err(FgjError::Tail(format!(
                "period {} with {} a-entries and {} b-entries",
                t.period,
                t.a.len(),
                t.b.len()
            )));
        }
        if t.phase >= t.period {
            return Err(FgjError::Tail(format!("phase {} not below period {}", t.phase, t.period)));
        }
        let bg = PeriodicBackground::new(t.a.clone(), t.b.clone())?;
        build_eventually_periodic(self.head.a.clone(), self.head.b.clone(), Arc::new(bg), t.phase)
    }
}

/// Validated eventually periodic operator.
pub fn build_eventually_periodic(head_a: Vec<f64>, head_b: Vec<f64>, tail: Arc<PeriodicBackground>, phase: usize) -> Result<JacobiCoeffs> {
    if head_a.len() != head_b.len() {
        return Err(FgjError::Construction(format!(
            "head a has {} entries, head b has {}",
            head_a.len(),
            head_b.len()
        )));
    }
    if head_a.iter().chain(&head_b).any(|v| !v.is_finite()) {
        return Err(FgjError::Construction("non-finite head coefficient".into()));
    }
    if let Some(v) = head_a.iter().find(|&&v| v <= 0.0) {
        return Err(FgjError::Construction(format!("nonpositive off-diagonal coefficient {v}")));
    }
    if phase >= tail.period() {
        return Err(FgjError::Tail(format!("phase {phase} not below period {}", tail.period())));
    }
    Ok(JacobiCoeffs { head_a, head_b, tail, phase })
}

impl JacobiCoeffs {
    pub fn free() -> Self {
        Self::background(Arc::new(PeriodicBackground::free()), 0)
    }

    /// The periodic operator itself (empty head).
    pub fn background(tail: Arc<PeriodicBackground>, phase: usize) -> Self {
        let phase = phase % tail.period();
        JacobiCoeffs { head_a: vec![], head_b: vec![], tail, phase }
    }

    pub fn with_head(head_a: Vec<f64>, head_b: Vec<f64>, tail: Arc<PeriodicBackground>, phase: usize) -> Result<Self> {
        build_eventually_periodic(head_a, head_b, tail, phase)
    }

    pub fn head_len(&self) -> usize {
        self.head_a.len()
    }

    pub fn head_a(&self) -> &[f64] {
        &self.head_a
    }

    pub fn head_b(&self) -> &[f64] {
        &self.head_b
    }

    pub fn tail(&self) -> &Arc<PeriodicBackground> {
        &self.tail
    }

    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn gapset(&self) -> &GapSet {
        self.tail.bands()
    }

    /// a_n for n ≥ 1.
    pub fn a(&self, n: usize) -> f64 {
        assert!(n >= 1, "coefficients are indexed from 1");
        let nh = self.head_a.len();
        if n <= nh {
            self.head_a[n - 1]
        } else {
            self.tail.a[(n - nh - 1 + self.phase) % self.tail.period()]
        }
    }

    /// b_n for n ≥ 1.
    pub fn b(&self, n: usize) -> f64 {
        assert!(n >= 1, "coefficients are indexed from 1");
        let nh = self.head_b.len();
        if n <= nh {
            self.head_b[n - 1]
        } else {
            self.tail.b[(n - nh - 1 + self.phase) % self.tail.period()]
        }
    }

    /// J⁽ⁿ⁾: the first n rows and columns removed.
    pub fn strip(&self, n: usize) -> JacobiCoeffs {
        let nh = self.head_len();
        if n <= nh {
            JacobiCoeffs {
                head_a: self.head_a[n..].to_vec(),
                head_b: self.head_b[n..].to_vec(),
                tail: self.tail.clone(),
                phase: self.phase,
            }
        } else {
            JacobiCoeffs {
                head_a: vec![],
                head_b: vec![],
                tail: self.tail.clone(),
                phase: (self.phase + n - nh) % self.tail.period(),
            }
        }
    }

    /// The periodic operator J̃ with ã_n = a_n(J) for every n beyond the head.
    pub fn asymptotic_background(&self) -> JacobiCoeffs {
        let p = self.tail.period();
        let nh = self.head_len() % p;
        JacobiCoeffs::background(self.tail.clone(), (self.phase + p - nh) % p)
    }

    /// Coupling between site 0 and site 1 of the two-sided periodic extension (empty head only).
    pub fn a0_two_sided(&self) -> f64 {
        let p = self.tail.period();
        self.tail.a[(self.phase + p - 1) % p]
    }

    /// Gershgorin enclosure [lo, hi] of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let n = self.head_len() + 2 * self.tail.period() + 1;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 1..=n {
            let off = self.a(k) + if k > 1 { self.a(k - 1) } else { 0.0 };
            lo = lo.min(self.b(k) - off);
            hi = hi.max(self.b(k) + off);
        }
        (lo, hi)
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.spectral_bounds();
        lo.abs().max(hi.abs())
    }

    pub fn truncate(&self, n: usize) -> TruncatedOperator {
        TruncatedOperator::new((1..=n).map(|k| self.b(k)).collect(), (1..n).map(|k| self.a(k)).collect())
            .expect("coefficients are validated")
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson {
            head: HeadJson { a: self.head_a.clone(), b: self.head_b.clone() },
            tail: TailJson {
                period: self.tail.period(),
                a: self.tail.a.clone(),
                b: self.tail.b.clone(),
                phase: self.phase,
            },
        }
    }

    /// Is x + i0 on a band interior of the essential spectrum?
    pub fn in_band_interior(&self, x: f64) -> bool {
        self.gapset().contains(x) && !self.gapset().is_edge(x)
    }
}

/// Unwind the head: given m of J⁽ᴺ⁾ return m of J via m_{k−1} = 1/(−z + b_k − a_k² m_k).
fn unwind(j: &JacobiCoeffs, z: C64, mut m: C64) -> C64 {
    for k in (1..=j.head_len()).rev() {
        let a = j.a(k);
        m = (-z + j.b(k) - a * a * m).inv();
    }
    m
}

/// m(z, J) = ⟨δ₁, (J − z)⁻¹ δ₁⟩.
pub fn m_function(j: &JacobiCoeffs, e: Energy) -> Result<C64> {
    let mt = j.tail.tail_m(j.phase, e)?;
    let m = unwind(j, e.z(), mt);
    if !m.re.is_finite() || !m.im.is_finite() {
        return Err(FgjError::Domain(format!("m-function has a pole at {}", e.z())));
    }
    Ok(m)
}

/// m(x + i0) at a band point of the background bands, edge offsets honoured.
pub fn m_function_at(j: &JacobiCoeffs, pt: &BandPoint) -> Result<C64> {
    let mt = j.tail.floquet_band(j.phase, pt)?.m;
    let z = C64::new(pt.x, 0.0);
    // propagate Im m multiplicatively so tiny imaginary parts keep relative accuracy
    let mut m = mt;
    for k in (1..=j.head_len()).rev() {
        let a = j.a(k);
        let den = -z + j.b(k) - a * a * m;
        let im = a * a * m.im / den.norm_sqr();
        m = C64::new(den.inv().re, im);
    }
    Ok(m)
}

/// m of J, J⁽¹⁾, …, J⁽ⁿ⁾ in one backward sweep.
pub fn m_sequence(j: &JacobiCoeffs, e: Energy, n: usize) -> Result<Vec<C64>> {
    let deep = n.max(j.head_len());
    let jd = j.strip(deep);
    let mut out = vec![C64::new(0.0, 0.0); deep + 1];
    out[deep] = jd.tail.tail_m(jd.phase, e)?;
    let z = e.z();
    for k in (1..=deep).rev() {
        let a = j.a(k);
        out[k - 1] = (-z + j.b(k) - a * a * out[k]).inv();
    }
    out.truncate(n + 1);
    if out.iter().any(|m| !m.re.is_finite() || !m.im.is_finite()) {
        return Err(FgjError::Domain(format!("pole of a stripped m-function at {z}")));
    }
    Ok(out)
}

/// w(x) = Im m(x + i0) / π on band interiors.
pub fn spectral_weight(j: &JacobiCoeffs, x: f64) -> Result<f64> {
    let k = j.tail.band_interior(x)?;
    spectral_weight_at(j, &BandPoint::from_x(j.gapset(), k, x))
}

pub fn spectral_weight_at(j: &JacobiCoeffs, pt: &BandPoint) -> Result<f64> {
    Ok(m_function_at(j, pt)?.im / PI)
}

/// Orthonormal polynomials p_0..p_n at z.
pub fn opoly_eval(j: &JacobiCoeffs, n: usize, z: C64) -> Vec<C64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(C64::new(1.0, 0.0));
    let mut prev = C64::new(0.0, 0.0);
    for k in 1..=n {
        let ak = j.a(k);
        let akm1 = if k > 1 { j.a(k - 1) } else { 0.0 };
        let next = ((z - j.b(k)) * p[k - 1] - akm1 * prev) / ak;
        prev = p[k - 1];
        p.push(next);
    }
    p
}

/// p_k = mant_k · e^{log_scale_k}; survives e^{nG} growth.
#[derive(Debug, Clone)]
pub struct ScaledSeq {
    pub mant: Vec<C64>,
    pub log_scale: Vec<f64>,
}

impl ScaledSeq {
    pub fn ln_abs(&self, k: usize) -> f64 {
        self.mant[k].norm().ln() + self.log_scale[k]
    }

    pub fn value(&self, k: usize) -> C64 {
        self.mant[k] * self.log_scale[k].exp()
    }
}

/// Log-scaled orthonormal polynomials.
pub fn opoly_scaled(j: &JacobiCoeffs, n: usize, z: C64) -> ScaledSeq {
    let mut mant = Vec::with_capacity(n + 1);
    let mut log_scale = Vec::with_capacity(n + 1);
    let mut cur = C64::new(1.0, 0.0);
    let mut prev = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    mant.push(cur);
    log_scale.push(0.0);
    for k in 1..=n {
        let ak = j.a(k);
        let akm1 = if k > 1 { j.a(k - 1) } else { 0.0 };
        let next = ((z - j.b(k)) * cur - akm1 * prev) / ak;
        prev = cur;
        cur = next;
        let r = cur.norm().max(prev.norm());
        if r > 1e100 || (r < 1e-100 && r > 0.0) {
            cur /= r;
            prev /= r;
            scale += r.ln();
        }
        mant.push(cur);
        log_scale.push(scale);
    }
    ScaledSeq { mant, log_scale }
}

/// Periodic background for 𝔢 = [−β, −α] ∪ [α, β].
pub fn period2_from_bands(alpha: f64, beta: f64) -> Result<PeriodicBackground> {
    if !(0.0 < alpha && alpha < beta) {
        return Err(FgjError::Tail(format!("need 0 < alpha < beta, got ({alpha}, {beta})")));
    }
    PeriodicBackground::new(vec![0.5 * (beta + alpha), 0.5 * (beta - alpha)], vec![0.0, 0.0])
}

pub fn discriminant_bands(bg: &PeriodicBackground) -> GapSet {
    bg.bands().clone()
}

/// Decaying solution ψ_0..ψ_{n_max} of J at a real gap energy, normalised by ψ at the
/// first tail site, plus the tail sum Σ_{k>N} |ψ_k|² in closed form.
fn decaying_real(j: &JacobiCoeffs, x: f64) -> Result<(Vec<f64>, f64)> {
    let nh = j.head_len();
    let p = j.tail.period();
    let fl = j.tail.floquet_off(j.phase, C64::new(x, 0.0))?;
    let lambda = fl.lambda.re;
    // tail block ψ_{N+1..N+p+1}
    let mut state = [fl.v[0].re, fl.v[1].re];
    let mut block = vec![state[0]];
    for i in 0..p {
        let n = nh + 1 + i;
        let a = j.a(n);
        let next = ((x - j.b(n)) * state[0] - state[1]) / a;
        state = [next, a * state[0]];
        block.push(next);
    }
    let tail_sum: f64 = block[..p].iter().map(|v| v * v).sum::<f64>() / (1.0 - lambda * lambda);
    let mut psi = vec![0.0; nh + 3];
    psi[nh + 1] = block[0];
    psi[nh + 2] = block[1];
    for n in (1..=nh + 1).rev() {
        let an = j.a(n);
        let anm1 = if n >= 2 { j.a(n - 1) } else { 1.0 };
        psi[n - 1] = ((x - j.b(n)) * psi[n] - an * psi[n + 1]) / anm1;
    }
    Ok((psi, tail_sum))
}

/// Residue weight μ = 1 / Σ_{n≥1} p_{n−1}(x)² at an eigenvalue x.
fn eigen_weight(j: &JacobiCoeffs, x: f64) -> Result<f64> {
    let nh = j.head_len();
    let (psi, tail_sum) = decaying_real(j, x)?;
    let head_sum: f64 = psi[1..=nh].iter().map(|v| v * v).sum();
    Ok(psi[1] * psi[1] / (head_sum + tail_sum))
}

/// 1/m(x) at real x off the bands, infinite values allowed (no error at poles).
fn inv_m_real(j: &JacobiCoeffs, x: f64) -> f64 {
    match j.tail.floquet_off(j.phase, C64::new(x, 0.0)) {
        Ok(fl) => {
            let mut f = fl.m.re.recip();
            for k in (1..=j.head_len()).rev() {
                let a = j.a(k);
                f = -x + j.b(k) - a * a / f;
            }
            f
        }
        Err(_) => f64::NAN,
    }
}

/// Intervals of ℝ∖𝔢 that can hold eigenvalues: gaps and the two bounded exterior pieces.
pub fn spectral_regions(j: &JacobiCoeffs) -> Vec<(f64, f64)> {
    let g = j.gapset();
    let (lo, hi) = j.spectral_bounds();
    let mut v = vec![(lo.min(g.lower()) - 1.0, g.lower())];
    v.extend(g.gaps());
    v.push((g.upper(), hi.max(g.upper()) + 1.0));
    v
}

fn scan_poles(j: &JacobiCoeffs, grid: usize) -> Result<Vec<f64>> {
    let mut poles = Vec::new();
    for (l, r) in spectral_regions(j) {
        let xs: Vec<f64> = (0..=grid)
            .map(|i| l + (r - l) * 0.5 * (1.0 - (PI * i as f64 / grid as f64).cos()))
            .collect();
        let f: Vec<f64> = xs.iter().map(|&x| if x == l || x == r { f64::NAN } else { inv_m_real(j, x) }).collect();
        for i in 1..grid - 1 {
            let (fa, fb) = (f[i], f[i + 1]);
            if fa > 0.0 && fb < 0.0 && fa.is_finite() && fb.is_finite() {
                let x = quad::brent(|x| inv_m_real(j, x), xs[i], xs[i + 1], 1e-15 * (1.0 + xs[i].abs()), 200)?;
                poles.push(x);
            } else if fa == 0.0 {
                poles.push(xs[i]);
            }
        }
    }
    Ok(poles)
}

/// Eigenvalues of J off 𝔢 with their spectral weights, sorted increasingly.
///
/// Poles of m are located by sign changes of 1/m and then confirmed against
/// Sturm bisection on two finite sections whose cut positions differ by one site,
/// which filters out states localised at the artificial cut.
pub fn gap_eigenvalues(j: &JacobiCoeffs, tol: f64) -> Result<Vec<(f64, f64)>> {
    let mut grid = 2000;
    let mut last_err = None;
    for _ in 0..2 {
        let mut poles = scan_poles(j, grid)?;
        let outcome = cross_check(j, &poles, tol).and_then(|missing| {
            // poles with tiny residue can fall between grid points; look next to the section eigenvalue
            for y in missing {
                let x = local_pole(j, y).ok_or_else(|| {
                    FgjError::Consistency(format!("section eigenvalue {y} has no matching pole of m"))
                })?;
                poles.push(x);
            }
            poles.sort_by(f64::total_cmp);
            match cross_check(j, &poles, tol)?.first() {
                Some(y) => Err(FgjError::Consistency(format!("section eigenvalue {y} has no matching pole of m"))),
                None => Ok(()),
            }
        });
        match outcome {
            Ok(()) => {
                return poles.into_iter().map(|x| Ok((x, eigen_weight(j, x)?))).collect();
            }
            Err(e) => last_err = Some(e),
        }
        grid *= 8;
    }
    Err(last_err.expect("loop ran"))
}

/// Sign change of 1/m from + to − in widening windows around y.
fn local_pole(j: &JacobiCoeffs, y: f64) -> Option<f64> {
    for k in [9, 7, 5, 3] {
        let w = 10f64.powi(-k) * (1.0 + y.abs());
        let xs: Vec<f64> = (0..=400).map(|i| y - w + 2.0 * w * i as f64 / 400.0).collect();
        let f: Vec<f64> = xs.iter().map(|&x| inv_m_real(j, x)).collect();
        for i in 0..400 {
            if f[i] == 0.0 {
                return Some(xs[i]);
            }
            if f[i] > 0.0 && f[i + 1] < 0.0 && f[i].is_finite() && f[i + 1].is_finite() {
                return quad::brent(|x| inv_m_real(j, x), xs[i], xs[i + 1], 1e-15 * (1.0 + y.abs()), 200).ok();
            }
        }
    }
    None
}

const EDGE_CLEARANCE: f64 = 1e-4;

/// Errors on poles without a section counterpart; returns genuine section eigenvalues without a pole.
fn cross_check(j: &JacobiCoeffs, poles: &[f64], tol: f64) -> Result<Vec<f64>> {
    let g = j.gapset();
    let regions = spectral_regions(j);
    // decay rate per site at each pole fixes the section length
    let p = j.tail.period() as f64;
    let mut gamma_min = f64::INFINITY;
    for &x in poles {
        if let Ok(fl) = j.tail.floquet_off(j.phase, C64::new(x, 0.0)) {
            gamma_min = gamma_min.min(-fl.lambda.norm().ln() / p);
        }
    }
    let mut n = 500usize.max(50 * j.head_len());
    if gamma_min.is_finite() && gamma_min > 0.0 {
        n = n.max((20.0 / gamma_min).ceil() as usize);
    }
    let n = n.min(40_000);
    let match_tol = tol.max(1e-7);
    let t1 = j.truncate(n);
    let t2 = j.truncate(n + 1);
    let dist = |x: f64| crate::gapset::dist_to_set(g, x);
    let mut missing = Vec::new();
    for &(l, r) in &regions {
        let (lo, hi) = (l + EDGE_CLEARANCE, r - EDGE_CLEARANCE);
        if lo >= hi {
            continue;
        }
        let e1 = t1.eigenvalues_in(lo, hi, 1e-13);
        let e2 = t2.eigenvalues_in(lo, hi, 1e-13);
        let genuine: Vec<f64> = e1
            .iter()
            .copied()
            .filter(|x| e2.iter().any(|y| (x - y).abs() <= match_tol))
            .collect();
        for &x in poles.iter().filter(|&&x| x > l && x < r && dist(x) >= 2.0 * EDGE_CLEARANCE) {
            if !genuine.iter().any(|y| (x - y).abs() <= match_tol) {
                return Err(FgjError::Consistency(format!(
                    "pole of m at {x} has no counterpart in the {n}-site section"
                )));
            }
        }
        for &y in genuine.iter().filter(|&&y| dist(y) >= 2.0 * EDGE_CLEARANCE) {
            if !poles.iter().any(|x| (x - y).abs() <= match_tol) {
                missing.push(y);
            }
        }
    }
    Ok(missing)
}

/// Spectral measure: a.c. weight on 𝔢 plus finitely many point masses off 𝔢.
#[derive(Clone)]
pub struct SpectralMeasure {
    pub gapset: GapSet,
    pub weight: Arc<dyn Fn(&BandPoint) -> f64 + Send + Sync>,
    pub masses: Vec<(f64, f64)>,
    pub normalized: bool,
}

impl std::fmt::Debug for SpectralMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralMeasure")
            .field("gapset", &self.gapset)
            .field("masses", &self.masses)
            .field("normalized", &self.normalized)
            .finish()
    }
}

impl SpectralMeasure {
    pub fn new(gapset: GapSet, weight: Arc<dyn Fn(&BandPoint) -> f64 + Send + Sync>, masses: Vec<(f64, f64)>) -> Result<Self> {
        if let Some(&(x, mu)) = masses.iter().find(|(x, mu)| gapset.contains(*x) || !(*mu > 0.0)) {
            return Err(FgjError::Domain(format!("point mass ({x}, {mu}) must sit off the set with positive weight")));
        }
        Ok(Self { gapset, weight, masses, normalized: true })
    }

    /// Spectral measure of an eventually periodic operator.
    pub fn of_operator(j: &JacobiCoeffs, tol: f64) -> Result<Self> {
        let masses = gap_eigenvalues(j, tol)?;
        let jj = j.clone();
        let w = Arc::new(move |p: &BandPoint| spectral_weight_at(&jj, p).unwrap_or(f64::NAN));
        Self::new(j.gapset().clone(), w, masses)
    }

    pub fn weight_at(&self, p: &BandPoint) -> f64 {
        (self.weight)(p)
    }
}

/// Output of [`stieltjes_from_measure`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub total_mass: f64,
    /// Largest n up to which a coarser discretization agrees to 1e-10.
    pub trust_horizon: usize,
}

impl Reconstruction {
    /// Head of length N followed by the given background.
    pub fn as_operator(&self, tail: Arc<PeriodicBackground>, phase: usize) -> Result<JacobiCoeffs> {
        build_eventually_periodic(self.a.clone(), self.b.clone(), tail, phase)
    }
}

fn discretize(mu: &SpectralMeasure, per_band: usize) -> (Vec<f64>, Vec<f64>) {
    // each half band separately: dist(x, ℝ∖𝔢) has a kink at θ = π/2
    let (t, w) = quad::gauss_legendre(per_band.div_ceil(2));
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for (k, &(lo, hi)) in mu.gapset.bands().iter().enumerate() {
        let h = 0.5 * (hi - lo);
        for half in [0.0, 0.5 * PI] {
            for (ti, wi) in t.iter().zip(&w) {
                let theta = half + 0.25 * PI * (ti + 1.0);
                let p = BandPoint::new(&mu.gapset, k, theta);
                let v = mu.weight_at(&p) * h * theta.sin() * 0.25 * PI * wi;
                if v > 0.0 {
                    xs.push(p.x);
                    ws.push(v);
                }
            }
        }
    }
    for &(x, m) in &mu.masses {
        xs.push(x);
        ws.push(m);
    }
    (xs, ws)
}

/// Lanczos on diag(x) with start vector √w and full reorthogonalization.
fn lanczos(xs: &[f64], ws: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let total: f64 = ws.iter().sum();
    let dim = xs.len();
    if n > dim {
        return Err(FgjError::Truncation { index: dim + 1 });
    }
    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    qs.push(ws.iter().map(|w| (w / total).sqrt()).collect());
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 0..n {
        let q = &qs[k];
        let mut r: Vec<f64> = xs.iter().zip(q).map(|(x, q)| x * q).collect();
        let bk: f64 = r.iter().zip(q).map(|(r, q)| r * q).sum();
        b.push(bk);
        for _ in 0..2 {
            for qj in &qs {
                let c: f64 = r.iter().zip(qj).map(|(r, q)| r * q).sum();
                for (ri, qi) in r.iter_mut().zip(qj) {
                    *ri -= c * qi;
                }
            }
        }
        let ak = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(ak > 1e-13) {
            return Err(FgjError::Truncation { index: k + 1 });
        }
        a.push(ak);
        qs.push(r.into_iter().map(|v| v / ak).collect());
    }
    Ok((a, b, total))
}

/// Jacobi parameters a_1..a_N, b_1..b_N of a measure, from a banded Gauss–Legendre
/// discretization (θ-variable per band) plus the point masses.
pub fn stieltjes_from_measure(mu: &SpectralMeasure, n: usize, nodes_per_band: Option<usize>) -> Result<Reconstruction> {
    let per_band = nodes_per_band.unwrap_or(20 * n.max(1));
    let (xs, ws) = discretize(mu, per_band);
    let (a, b, total) = lanczos(&xs, &ws, n)?;
    let coarse = discretize(mu, (per_band / 2).max(n + 1));
    let trust_horizon = match lanczos(&coarse.0, &coarse.1, n) {
        Ok((ac, bc, _)) => (0..n)
            .take_while(|&k| (ac[k] - a[k]).abs() <= 1e-10 && (bc[k] - b[k]).abs() <= 1e-10)
            .count(),
        Err(FgjError::Truncation { index }) => index - 1,
        Err(e) => return Err(e),
    };
    Ok(Reconstruction { a, b, total_mass: total, trust_horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapset::solve_equilibrium;

    fn free_tail() -> Arc<PeriodicBackground> {
        Arc::new(PeriodicBackground::free())
    }

    #[test]
    fn free_m_at_i() {
        let m = m_function(&JacobiCoeffs::free(), Energy::At(C64::new(0.0, 1.0))).unwrap();
        assert!((m - C64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-14);
        let m0 = m_function(&JacobiCoeffs::free(), Energy::Above(0.0)).unwrap();
        assert!((m0 - C64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn free_weight() {
        let j = JacobiCoeffs::free();
        assert!((spectral_weight(&j, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        for x in [-1.9f64, -1.5, 0.3, 1.5, 1.999] {
            let exact = (4.0 - x * x).sqrt() / (2.0 * PI);
            assert!((spectral_weight(&j, x).unwrap() - exact).abs() < 1e-14);
        }
        assert!(spectral_weight(&j, 2.0).is_err());
        assert!(spectral_weight(&j, 2.5).is_err());
    }

    #[test]
    fn period2_bands() {
        let bg = period2_from_bands(1.0, 2.0).unwrap();
        assert_eq!(bg.a(), &[1.5, 0.5]);
        let e = bg.bands().edges();
        for (x, y) in e.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        // Δ(x) = (x² − ã₁² − ã₂²)/(ã₁ã₂)
        for x in [0.3, 1.7, 3.0] {
            let d: f64 = (x * x - 2.25 - 0.25) / 0.75;
            assert!((bg.discriminant(x) - d).abs() < 1e-13);
        }
        let disguised = PeriodicBackground::new(vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(disguised.bands().ell(), 0);
    }

    #[test]
    fn strip_and_accessors() {
        let bg = Arc::new(period2_from_bands(1.0, 2.0).unwrap());
        let j = JacobiCoeffs::with_head(vec![2.0], vec![0.5], bg.clone(), 1).unwrap();
        assert_eq!(j.a(1), 2.0);
        assert_eq!(j.a(2), 0.5);
        assert_eq!(j.a(3), 1.5);
        let s = j.strip(2);
        assert_eq!(s.phase(), 0);
        assert_eq!(s.a(1), 1.5);
        for n in 1..10 {
            assert_eq!(j.strip(3).a(n), j.a(n + 3));
            assert_eq!(j.strip(3).b(n), j.b(n + 3));
        }
        let bgj = j.asymptotic_background();
        for n in 2..10 {
            assert_eq!(bgj.a(n), j.a(n));
        }
    }

    #[test]
    fn eigenvalues_of_exemplars() {
        let jb = JacobiCoeffs::with_head(vec![1.0], vec![2.0], free_tail(), 0).unwrap();
        let ev = gap_eigenvalues(&jb, 1e-10).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].0 - 2.5).abs() < 1e-12);
        // residue: m = 1/(−z + 2 − m₀) near 2.5; weight μ = 1 − 1/λ² = 3/4
        assert!((ev[0].1 - 0.75).abs() < 1e-12, "{}", ev[0].1);

        let ja = JacobiCoeffs::with_head(vec![2.0], vec![0.0], free_tail(), 0).unwrap();
        let ev = gap_eigenvalues(&ja, 1e-10).unwrap();
        let x = 4.0 / 3f64.sqrt();
        assert_eq!(ev.len(), 2);
        assert!((ev[0].0 + x).abs() < 1e-12 && (ev[1].0 - x).abs() < 1e-12);
        assert!(gap_eigenvalues(&JacobiCoeffs::free(), 1e-10).unwrap().is_empty());
    }

    #[test]
    fn weight_normalization_head_a() {
        let ja = JacobiCoeffs::with_head(vec![2.0], vec![0.0], free_tail(), 0).unwrap();
        let eq = solve_equilibrium(ja.gapset(), 1e-12).unwrap();
        let ac = crate::gapset::band_integral(&eq, |p| spectral_weight_at(&ja, p).unwrap(), crate::gapset::Measure::Lebesgue, 1e-12).unwrap();
        let pm: f64 = gap_eigenvalues(&ja, 1e-10).unwrap().iter().map(|e| e.1).sum();
        assert!((ac.value + pm - 1.0).abs() < 1e-10, "{} + {}", ac.value, pm);
    }

    #[test]
    fn chebyshev_values() {
        let p = opoly_eval(&JacobiCoeffs::free(), 2, C64::new(2.5, 0.0));
        assert!((p[2].re - 5.25).abs() < 1e-14);
        assert_eq!(p[1].re, 2.5);
    }

    #[test]
    fn stieltjes_equilibrium_free() {
        let g = GapSet::interval(-2.0, 2.0).unwrap();
        let eq = Arc::new(solve_equilibrium(&g, 1e-12).unwrap());
        let e2 = eq.clone();
        let mu = SpectralMeasure::new(g, Arc::new(move |p: &BandPoint| e2.density_at(p)), vec![]).unwrap();
        let r = stieltjes_from_measure(&mu, 20, None).unwrap();
        assert!((r.a[0] - 2f64.sqrt()).abs() < 1e-12);
        for k in 1..20 {
            assert!((r.a[k] - 1.0).abs() < 1e-12);
            assert!(r.b[k].abs() < 1e-12);
        }
    }

    #[test]
    fn continued_fraction_identity() {
        let bg = Arc::new(period2_from_bands(0.5, 2.0).unwrap());
        let j = JacobiCoeffs::with_head(vec![0.7, 1.3, 0.9], vec![0.2, -0.4, 1.0], bg, 1).unwrap();
        let z = C64::new(0.37, 0.21);
        let m = m_function(&j, Energy::At(z)).unwrap();
        let m1 = m_function(&j.strip(1), Energy::At(z)).unwrap();
        let lhs = m.inv();
        let rhs = -z + j.b(1) - j.a(1) * j.a(1) * m1;
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm());
        assert!(m.im > 0.0);
    }
}
