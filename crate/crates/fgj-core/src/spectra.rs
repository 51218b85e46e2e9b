//! Finite sections, Sturm bisection, and numerical checks of the eigenvalue
//! inequalities for gap eigenvalues: interlacing under stripping, rank-r bounds,
//! near-edge smallness and splicing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{FgjError, Result};
use crate::gapset::{dist_to_set, GapSet};
use crate::jacobi::{build_eventually_periodic, gap_eigenvalues, JacobiCoeffs, OperatorJson};

/// Symmetric tridiagonal N×N section.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl TruncatedOperator {
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.len() + 1 != b.len() {
            return Err(FgjError::Construction(format!(
                "section needs N ≥ 1 diagonal and N − 1 off-diagonal entries, got {} and {}",
                b.len(),
                a.len()
            )));
        }
        if a.iter().any(|&v| !(v > 0.0)) || b.iter().any(|v| !v.is_finite()) {
            return Err(FgjError::Construction("section entries must be finite with a > 0".into()));
        }
        Ok(Self { b, a })
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.b
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.a
    }

    /// Number of eigenvalues strictly below x.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.b[0] - x;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
        for k in 1..self.b.len() {
            let a = self.a[k - 1];
            q = self.b[k] - x - a * a / q;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Eigenvalues in (lo, hi) to absolute accuracy `tol`, sorted.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
        if !(lo < hi) {
            return vec![];
        }
        let c_lo = self.sturm_count(lo);
        let c_hi = self.sturm_count(hi);
        let mut out = Vec::with_capacity(c_hi.saturating_sub(c_lo));
        let mut left = lo;
        for k in c_lo..c_hi {
            // k-th eigenvalue (0-based): smallest x with count(x) > k
            let (mut l, mut r) = (left, hi);
            while r - l > tol.max(4.0 * f64::EPSILON * l.abs().max(r.abs())) {
                let mid = 0.5 * (l + r);
                if self.sturm_count(mid) > k {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            let x = 0.5 * (l + r);
            out.push(x);
            left = l;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.b[i];
        }
        for i in 0..n - 1 {
            m[(i, i + 1)] = self.a[i];
            m[(i + 1, i)] = self.a[i];
        }
        m
    }
}

/// Eigenvalues of a section inside an interval.
pub fn trunc_eigs(t: &TruncatedOperator, interval: (f64, f64), tol: f64) -> Vec<f64> {
    t.eigenvalues_in(interval.0, interval.1, tol)
}

/// Eigenvalue summary on an interval avoiding the essential spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct EigReport {
    pub interval: (f64, f64),
    /// (value, multiplicity) after merging at 1e-9·span.
    pub eigenvalues: Vec<(f64, usize)>,
    /// Σ dist(x, ℝ∖(a,b))^{1/2} with multiplicity.
    pub sigma: f64,
    /// Σ dist(x, 𝔢)^{1/2} with multiplicity (only when a set is supplied).
    pub distance_sum: f64,
}

/// Merge eigenvalues closer than `thr` into (value, multiplicity).
pub fn cluster(sorted: &[f64], thr: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &x in sorted {
        match out.last_mut() {
            Some((v, m)) if (x - *v).abs() <= thr => {
                *v = (*v * *m as f64 + x) / (*m as f64 + 1.0);
                *m += 1;
            }
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Σ_{(a,b)}: sum of dist(x, ℝ∖(a,b))^{1/2} over eigenvalues in (a,b).
pub fn sigma_interval(eigs: &[f64], interval: (f64, f64)) -> f64 {
    let (a, b) = interval;
    eigs.iter()
        .filter(|&&x| x > a && x < b)
        .map(|&x| (x - a).min(b - x).sqrt())
        .sum()
}

pub fn eig_report(eigs: &[f64], interval: (f64, f64), set: Option<&GapSet>, span: f64) -> EigReport {
    let mut inside: Vec<f64> = eigs.iter().copied().filter(|&x| x > interval.0 && x < interval.1).collect();
    inside.sort_by(f64::total_cmp);
    EigReport {
        interval,
        eigenvalues: cluster(&inside, 1e-9 * span),
        sigma: sigma_interval(&inside, interval),
        distance_sum: set.map_or(0.0, |g| inside.iter().map(|&x| dist_to_set(g, x).sqrt()).sum()),
    }
}

/// ℰ(J) = Σ_k dist(x_k, 𝔢)^{1/2} over the eigenvalues off 𝔢.
#[allow(non_snake_case)]
pub fn eig_sum_E(j: &JacobiCoeffs, tol: f64) -> Result<f64> {
    let ev = gap_eigenvalues(j, tol)?;
    Ok(ev.iter().map(|&(x, _)| dist_to_set(j.gapset(), x).sqrt()).sum())
}

fn eig_values(j: &JacobiCoeffs, tol: f64) -> Result<Vec<f64>> {
    Ok(gap_eigenvalues(j, tol)?.into_iter().map(|e| e.0).collect())
}

/// Which of the two alternation orders holds (largest element first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InterlacePattern {
    /// x_1(J) > x_1(J⁽¹⁾) > x_2(J) > …
    OperatorFirst,
    /// x_1(J⁽¹⁾) > x_1(J) > x_2(J⁽¹⁾) > …
    StrippedFirst,
    /// Both lists empty.
    Vacuous,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterlaceReport {
    pub gap: (f64, f64),
    pub eig_j: Vec<f64>,
    pub eig_stripped: Vec<f64>,
    pub pattern: Option<InterlacePattern>,
    pub violations: Vec<String>,
    pub inconclusive: bool,
}

/// Eigenvalues of J and J⁽¹⁾ in a gap must strictly alternate.
pub fn check_interlacing(j: &JacobiCoeffs, gap: (f64, f64), tol: f64) -> Result<InterlaceReport> {
    let g = j.gapset();
    let mid = 0.5 * (gap.0 + gap.1);
    if g.contains(mid) || g.edges().iter().any(|&e| e > gap.0 && e < gap.1) {
        return Err(FgjError::Domain(format!("({}, {}) meets the essential spectrum", gap.0, gap.1)));
    }
    let pick = |v: Vec<f64>| -> Vec<f64> {
        let mut v: Vec<f64> = v.into_iter().filter(|&x| x > gap.0 && x < gap.1).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let ej = pick(eig_values(j, tol)?);
    let es = pick(eig_values(&j.strip(1), tol)?);
    let mut merged: Vec<(f64, bool)> = ej.iter().map(|&x| (x, true)).chain(es.iter().map(|&x| (x, false))).collect();
    merged.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut violations = Vec::new();
    let mut inconclusive = false;
    for w in merged.windows(2) {
        if (w[0].0 - w[1].0).abs() <= tol {
            inconclusive = true;
        } else if w[0].1 == w[1].1 {
            let who = if w[0].1 { "J" } else { "J(1)" };
            violations.push(format!("consecutive eigenvalues of {who} at {} and {} with nothing between", w[0].0, w[1].0));
        }
    }
    let pattern = match merged.first() {
        None => Some(InterlacePattern::Vacuous),
        Some(_) if !violations.is_empty() => None,
        Some(&(_, true)) => Some(InterlacePattern::OperatorFirst),
        Some(&(_, false)) => Some(InterlacePattern::StrippedFirst),
    };
    Ok(InterlaceReport { gap, eig_j: ej, eig_stripped: es, pattern, violations, inconclusive })
}

/// Σ_k [f(x_k(J)) − f(x_k(J⁽¹⁾))] over a gap, summed in interlaced order.
pub fn alternating_sum(report: &InterlaceReport, f: impl Fn(f64) -> f64) -> f64 {
    let mut merged: Vec<(f64, f64)> = report
        .eig_j
        .iter()
        .map(|&x| (x, 1.0))
        .chain(report.eig_stripped.iter().map(|&x| (x, -1.0)))
        .collect();
    merged.sort_by(|a, b| b.0.total_cmp(&a.0));
    merged.iter().map(|&(x, s)| s * f(x)).sum()
}

/// Kind of perturbation in the rank-bound experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankKind {
    /// B = A + Σ_{i≤r} c_i v_i v_iᵀ.
    Additive(usize),
    /// B = PAP on ran P, P deleting r random coordinates.
    Projection(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct RankViolation {
    pub trial: usize,
    pub inequality: &'static str,
    pub margin: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankBoundReport {
    pub theorem: &'static str,
    pub trials: usize,
    pub violations: Vec<RankViolation>,
    pub min_margin: f64,
    pub min_margin_near_edge: f64,
}

fn dense_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn edge_sum(eigs: &[f64], edge: f64, delta: f64, from_left: bool) -> f64 {
    eigs.iter()
        .filter_map(|&x| {
            let d = if from_left { x - edge } else { edge - x };
            (d > 0.0 && d < delta).then(|| d.sqrt())
        })
        .sum()
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.max();
    sv.iter().filter(|&&s| s > 1e-12 * top.max(1.0)).count()
}

/// Randomized check of Σ_{(a,b)}(B) ≤ Σ_{(a,b)}(A) + r((b−a)/2)^{1/2} and its
/// near-edge form Σ_{x∈(a,a+δ)} (x−a)^{1/2} ≤ rδ^{1/2} + Σ_{x∈(a,a+2δ)} (x−a)^{1/2}.
pub fn verify_rank_bound(a_op: &TruncatedOperator, kind: RankKind, interval: (f64, f64), trials: usize, seed: u64) -> RankBoundReport {
    let (lo, hi) = interval;
    let a = a_op.to_dense();
    let n = a.nrows();
    let eig_a = dense_eigs(&a);
    let sig_a = sigma_interval(&eig_a, interval);
    let deltas: Vec<f64> = (0..6).map(|k| 0.24 * (hi - lo) * 0.5f64.powi(k)).collect();
    let mut violations = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut min_near = f64::INFINITY;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let (eig_b, r) = match kind {
            RankKind::Additive(r) => {
                let mut b = a.clone();
                for _ in 0..r {
                    // localized random vector so the perturbation reaches the interval
                    let centre = rng.gen_range(0..n);
                    let width = rng.gen_range(1..=4.min(n));
                    let mut v = DVector::<f64>::zeros(n);
                    for k in centre.saturating_sub(width)..(centre + width).min(n) {
                        v[k] = rng.gen_range(-1.0..1.0);
                    }
                    let nv = v.norm();
                    if nv == 0.0 {
                        continue;
                    }
                    v /= nv;
                    let c = rng.gen_range(-4.0..4.0);
                    b += c * &v * v.transpose();
                }
                (dense_eigs(&b), r)
            }
            RankKind::Projection(k) => {
                let mut removed: Vec<usize> = Vec::new();
                while removed.len() < k.min(n - 1) {
                    let i = rng.gen_range(0..n);
                    if !removed.contains(&i) {
                        removed.push(i);
                    }
                }
                let kept: Vec<usize> = (0..n).filter(|i| !removed.contains(i)).collect();
                let b = DMatrix::from_fn(kept.len(), kept.len(), |i, j| a[(kept[i], kept[j])]);
                let coupling = DMatrix::from_fn(kept.len(), removed.len(), |i, j| a[(kept[i], removed[j])]);
                (dense_eigs(&b), numerical_rank(&coupling))
            }
        };
        let rf = r as f64;
        let margin = sig_a + rf * (0.5 * (hi - lo)).sqrt() - sigma_interval(&eig_b, interval);
        min_margin = min_margin.min(margin);
        if margin < -1e-12 {
            violations.push(RankViolation { trial, inequality: "sigma", margin, rank: r });
        }
        for &d in &deltas {
            let m_lo = rf * d.sqrt() + edge_sum(&eig_a, lo, 2.0 * d, true) - edge_sum(&eig_b, lo, d, true);
            let m_hi = rf * d.sqrt() + edge_sum(&eig_a, hi, 2.0 * d, false) - edge_sum(&eig_b, hi, d, false);
            for m in [m_lo, m_hi] {
                min_near = min_near.min(m);
                if m < -1e-12 {
                    violations.push(RankViolation { trial, inequality: "near-edge", margin: m, rank: r });
                }
            }
        }
    }
    RankBoundReport { theorem: "3.5", trials, violations, min_margin, min_margin_near_edge: min_near }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrippedProfile {
    pub gap: (f64, f64),
    pub eps: f64,
    /// Eigenvalue counts of J⁽ⁿ⁾ in (β+eps, α−eps), n = 0..=n_max.
    pub counts: Vec<usize>,
    /// First n from which all counts are ≤ 1.
    pub threshold: Option<usize>,
    /// δ ladder with sup_n of the near-edge sums at both gap edges.
    pub ladder: Vec<(f64, f64, f64)>,
    /// Near-edge comparison with J itself (compression of rank one): minimal margin.
    pub min_edge_margin: f64,
    /// ℰ(J⁽ⁿ⁾) for n = 0..=n_max.
    pub energies: Vec<f64>,
}

impl StrippedProfile {
    /// Largest ladder δ whose near-edge sums stay below ε/2 for every n tested.
    pub fn delta_for(&self, eps_sum: f64) -> Option<f64> {
        self.ladder
            .iter()
            .filter(|(_, l, r)| *l <= 0.5 * eps_sum && *r <= 0.5 * eps_sum)
            .map(|t| t.0)
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
    }
}

/// Gap-eigenvalue statistics of J⁽ⁿ⁾ as n grows.
pub fn stripped_eig_profile(j: &JacobiCoeffs, gap_index: usize, eps: f64, n_max: usize, tol: f64) -> Result<StrippedProfile> {
    let gaps = j.gapset().gaps();
    let &(beta, alpha) = gaps
        .get(gap_index)
        .ok_or_else(|| FgjError::Domain(format!("gap index {gap_index} out of range ({} gaps)", gaps.len())))?;
    let width = alpha - beta;
    let deltas: Vec<f64> = (0..8).map(|k| 0.24 * width * 0.5f64.powi(k)).collect();
    let mut counts = Vec::with_capacity(n_max + 1);
    let mut energies = Vec::with_capacity(n_max + 1);
    let mut ladder: Vec<(f64, f64, f64)> = deltas.iter().map(|&d| (d, 0.0, 0.0)).collect();
    let base = eig_values(j, tol)?;
    let mut min_edge_margin = f64::INFINITY;
    for n in 0..=n_max {
        let jn = j.strip(n);
        let ev = if n == 0 { base.clone() } else { eig_values(&jn, tol)? };
        counts.push(ev.iter().filter(|&&x| x > beta + eps && x < alpha - eps).count());
        energies.push(ev.iter().map(|&x| dist_to_set(j.gapset(), x).sqrt()).sum());
        for (slot, &d) in ladder.iter_mut().zip(&deltas) {
            let l = edge_sum(&ev, beta, d, true);
            let r = edge_sum(&ev, alpha, d, false);
            slot.1 = slot.1.max(l);
            slot.2 = slot.2.max(r);
            let ml = d.sqrt() + edge_sum(&base, beta, 2.0 * d, true) - l;
            let mr = d.sqrt() + edge_sum(&base, alpha, 2.0 * d, false) - r;
            min_edge_margin = min_edge_margin.min(ml).min(mr);
        }
    }
    let threshold = (0..=n_max).find(|&n0| counts[n0..].iter().all(|&c| c <= 1));
    Ok(StrippedProfile { gap: (beta, alpha), eps, counts, threshold, ladder, min_edge_margin, energies })
}

/// Bound ℰ(J⁽ⁿ⁾) ≤ ℰ(J) + ℓ·max_j (½|α_{j+1} − β_j|)^{1/2}; returns the additive constant.
pub fn stripping_energy_allowance(g: &GapSet) -> f64 {
    let gamma = g.gaps().iter().map(|(b, a)| (0.5 * (a - b)).sqrt()).fold(0.0, f64::max);
    g.ell() as f64 * gamma
}

#[derive(Debug, Clone, Serialize)]
pub struct SpliceReport {
    pub operator: OperatorJson,
    pub energy: f64,
    pub energy_j: f64,
    pub energy_jt: f64,
    pub k_const: f64,
    pub margin: f64,
}

fn same_set(g: &GapSet, h: &GapSet) -> bool {
    let span = g.span().max(h.span());
    g.ell() == h.ell() && g.edges().iter().zip(h.edges()).all(|(x, y)| (x - y).abs() <= 1e-12 * span)
}

/// The constant K for ℰ(J_{m,q}) ≤ ℰ(J) + ℰ(J̃) + K.
///
/// Each gap contributes 5γ (rank-two difference, two compressions, one stripping).
/// The exterior pieces use κ below every spectrum involved, moved far enough that
/// the distance to ℝ∖(κ, α₁) equals the distance to α₁ for all such eigenvalues.
pub fn splice_constant(g: &GapSet, norm_j: f64, norm_jt: f64) -> f64 {
    let gamma = g.gaps().iter().map(|(b, a)| (0.5 * (a - b)).sqrt()).fold(0.0, f64::max);
    let reach = 2.0 * norm_j + norm_jt + 1.0;
    let kappa_lo = 2.0 * (-reach) - g.lower();
    let kappa_hi = 2.0 * reach - g.upper();
    5.0 * (g.ell() as f64 * gamma + (0.5 * (g.lower() - kappa_lo)).sqrt() + (0.5 * (kappa_hi - g.upper())).sqrt())
}

/// J_{m,q}: first m coefficients of J, then J̃ stripped q times.
pub fn splice(j: &JacobiCoeffs, jt: &JacobiCoeffs, m: usize, q: usize, tol: f64) -> Result<(JacobiCoeffs, SpliceReport)> {
    if !same_set(j.gapset(), jt.gapset()) {
        return Err(FgjError::Domain("splice needs equal essential spectra".into()));
    }
    let jq = jt.strip(q);
    let mut ha: Vec<f64> = (1..=m).map(|n| j.a(n)).collect();
    let mut hb: Vec<f64> = (1..=m).map(|n| j.b(n)).collect();
    ha.extend_from_slice(jq.head_a());
    hb.extend_from_slice(jq.head_b());
    let spliced = build_eventually_periodic(ha, hb, Arc::clone(jq.tail()), jq.phase())?;
    let energy = eig_sum_E(&spliced, tol)?;
    let energy_j = eig_sum_E(j, tol)?;
    let energy_jt = eig_sum_E(jt, tol)?;
    let k_const = splice_constant(j.gapset(), j.norm_bound(), jt.norm_bound());
    let margin = energy_j + energy_jt + k_const - energy;
    let report = SpliceReport { operator: spliced.to_json(), energy, energy_j, energy_jt, k_const, margin };
    Ok((spliced, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::PeriodicBackground;

    #[test]
    fn single_site() {
        let t = TruncatedOperator::new(vec![5.0], vec![]).unwrap();
        assert_eq!(trunc_eigs(&t, (4.0, 6.0), 1e-14).len(), 1);
        assert!((trunc_eigs(&t, (4.0, 6.0), 1e-14)[0] - 5.0).abs() < 1e-13);
    }

    #[test]
    fn free_section_has_nothing_outside() {
        let t = JacobiCoeffs::free().truncate(100);
        assert!(trunc_eigs(&t, (2.001, 10.0), 1e-12).is_empty());
        let all = trunc_eigs(&t, (-3.0, 3.0), 1e-13);
        assert_eq!(all.len(), 100);
        for (k, x) in all.iter().enumerate() {
            let exact = -2.0 * (std::f64::consts::PI * (k + 1) as f64 / 101.0).cos();
            assert!((x - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_bump_section() {
        let j = JacobiCoeffs::with_head(vec![1.0], vec![2.0], Arc::new(PeriodicBackground::free()), 0).unwrap();
        let e = trunc_eigs(&j.truncate(2000), (2.1, 3.0), 1e-13);
        assert_eq!(e.len(), 1);
        assert!((e[0] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn sums() {
        assert_eq!(sigma_interval(&[], (0.0, 1.0)), 0.0);
        assert!((sigma_interval(&[2.5], (2.0, 3.0)) - 0.5f64.sqrt()).abs() < 1e-15);
        let j = JacobiCoeffs::with_head(vec![1.0], vec![2.0], Arc::new(PeriodicBackground::free()), 0).unwrap();
        assert!((eig_sum_E(&j, 1e-10).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
