//! Random diagonal unitaries: moment maps, diagonal designs and frame potentials.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{guard, Result, ShadowError};
use crate::qmatrix::{ComplexMatrix, C64, ZERO};
use crate::rng::{substream, StreamRng};

/// Default tolerance for exact linear relations among energies (2π·MHz).
pub const DEFAULT_RESOLUTION: f64 = 1e-9;
pub const DESIGN_ENUMERATION_LIMIT: u64 = 1 << 24;
pub const FRAME_POTENTIAL_TERM_LIMIT: f64 = 1e8;

/// Phases of `Λ = diag(e^{iθ_1}, …, e^{iθ_d})`, wrapped into `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector {
    phases: Vec<f64>,
}

impl PhaseVector {
    pub fn new(phases: Vec<f64>) -> Self {
        Self { phases: phases.into_iter().map(wrap_phase).collect() }
    }

    /// `θ_k = -E_k t`.
    pub fn from_time(energies: &[f64], t: f64) -> Self {
        Self::new(energies.iter().map(|e| -e * t).collect())
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn diagonal(&self) -> Vec<C64> {
        self.phases.iter().map(|&t| C64::cis(t)).collect()
    }
}

fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[derive(Clone, Debug)]
pub struct DegeneracySpec {
    pub energies: Vec<f64>,
    pub resolution: f64,
}

/// `E_a1 + E_a2 = E_b1 + E_b2` with `{a1,a2} ≠ {b1,b2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resonance {
    pub left: (usize, usize),
    pub right: (usize, usize),
}

impl DegeneracySpec {
    pub fn new(energies: Vec<f64>) -> Self {
        Self { energies, resolution: DEFAULT_RESOLUTION }
    }

    pub fn with_resolution(energies: Vec<f64>, resolution: f64) -> Self {
        Self { energies, resolution }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn is_zero(&self, omega: f64) -> bool {
        omega.abs() <= self.resolution
    }

    /// Pairs `a < b` with `E_a = E_b`.
    pub fn first_order_pairs(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| self.energies[a].total_cmp(&self.energies[b]));
        let mut out = Vec::new();
        for i in 0..d {
            for j in i + 1..d {
                let (a, b) = (order[i], order[j]);
                if self.energies[b] - self.energies[a] > self.resolution {
                    break;
                }
                out.push((a.min(b), a.max(b)));
            }
        }
        out.sort_unstable();
        out
    }

    /// Second-order resonances, at most `limit` of them.
    pub fn second_order_resonances(&self, limit: usize) -> Vec<Resonance> {
        let d = self.dim();
        let mut sums: Vec<(f64, usize, usize)> = Vec::with_capacity(d * (d + 1) / 2);
        for a in 0..d {
            for b in a..d {
                sums.push((self.energies[a] + self.energies[b], a, b));
            }
        }
        sums.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out = Vec::new();
        'outer: for i in 0..sums.len() {
            for j in i + 1..sums.len() {
                if sums[j].0 - sums[i].0 > self.resolution {
                    break;
                }
                let (l, r) = ((sums[i].1, sums[i].2), (sums[j].1, sums[j].2));
                out.push(Resonance { left: l.min(r), right: l.max(r) });
                if out.len() >= limit {
                    break 'outer;
                }
            }
        }
        out.sort_unstable_by_key(|r| (r.left, r.right));
        out
    }
}

fn integer_root(n: usize, k: u32) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / k as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|&d| d > 0 && d.pow(k) == n)
}

fn digits(mut index: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn check_order(k: usize) -> Result<()> {
    if !(1..=3).contains(&k) {
        return Err(ShadowError::InvalidInput(format!("moment order k={k} must be 1, 2 or 3")));
    }
    Ok(())
}

/// Average of `Λ^{⊗k} m Λ̄^{⊗k}` over independent uniform phases: keeps
/// element `(i_1…i_k, j_1…j_k)` iff the two index multisets agree.
pub fn phi_k_diagonal(m: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    check_order(k)?;
    let n = m.nrows();
    let d = match (m.is_square(), integer_root(n, k as u32)) {
        (true, Some(d)) => d,
        _ => {
            return Err(ShadowError::DimensionMismatch(format!(
                "{:?} is not a d^{k} x d^{k} matrix",
                m.shape()
            )))
        }
    };
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for idx in 0..n {
        let mut key = digits(idx, d, k);
        key.sort_unstable();
        groups.entry(key).or_default().push(idx);
    }
    let mut out = ComplexMatrix::zeros(n, n);
    for members in groups.values() {
        for &r in members {
            for &c in members {
                out[(r, c)] = m[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Second-moment map for a quench with the given spectrum: keeps element
/// `(ij, kl)` iff `E_i + E_j − E_k − E_l = 0` within the resolution.
pub fn phi2_with_energies(m: &ComplexMatrix, spec: &DegeneracySpec) -> Result<ComplexMatrix> {
    let d = spec.dim();
    if m.shape() != (d * d, d * d) {
        return Err(ShadowError::DimensionMismatch(format!(
            "{:?} does not act on two copies of dimension {d}",
            m.shape()
        )));
    }
    let e = &spec.energies;
    Ok(ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let omega = e[r / d] + e[r % d] - e[c / d] - e[c % d];
        if spec.is_zero(omega) {
            m[(r, c)]
        } else {
            ZERO
        }
    }))
}

/// `Λ^{⊗k} m Λ̄^{⊗k}` for `Λ = diag(e^{iθ})`.
pub fn conjugate_tensor_power(m: &ComplexMatrix, phases: &[f64], k: usize) -> ComplexMatrix {
    let d = phases.len();
    let total = |idx: usize| digits(idx, d, k).iter().map(|&i| phases[i]).sum::<f64>();
    let row_phase: Vec<f64> = (0..m.nrows()).map(total).collect();
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * C64::cis(row_phase[r] - row_phase[c]))
}

/// Product set `{2πm/(k+1)}^d`, a diagonal unitary k-design.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiagonalDesign {
    k: usize,
    d: usize,
}

impl DiagonalDesign {
    pub fn new(k: usize, d: usize) -> Result<Self> {
        check_order(k)?;
        if d == 0 {
            return Err(ShadowError::InvalidInput("design dimension must be positive".into()));
        }
        Ok(Self { k, d })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `(k+1)^d`, saturating.
    pub fn size(&self) -> u64 {
        ((self.k + 1) as u64).checked_pow(self.d as u32).unwrap_or(u64::MAX)
    }

    pub fn is_enumerable(&self) -> bool {
        self.size() <= DESIGN_ENUMERATION_LIMIT
    }

    /// Element with the given mixed-radix index (first coordinate most significant).
    pub fn element(&self, index: u64) -> PhaseVector {
        let base = (self.k + 1) as u64;
        let step = TAU / base as f64;
        let mut phases = vec![0.0; self.d];
        let mut rest = index;
        for slot in phases.iter_mut().rev() {
            *slot = (rest % base) as f64 * step;
            rest /= base;
        }
        PhaseVector { phases }
    }

    pub fn enumerate(&self) -> Result<Vec<PhaseVector>> {
        guard("diagonal design enumeration", self.size() as f64, DESIGN_ENUMERATION_LIMIT as f64)?;
        Ok((0..self.size()).map(|i| self.element(i)).collect())
    }

    pub fn sample(&self, rng: &mut StreamRng) -> PhaseVector {
        let step = TAU / (self.k + 1) as f64;
        PhaseVector { phases: (0..self.d).map(|_| rng.random_range(0..=self.k) as f64 * step).collect() }
    }
}

pub enum DesignSet {
    Enumerated(Vec<PhaseVector>),
    Sampler(DiagonalDesign),
}

/// The full design when `(k+1)^d ≤ 2²⁴`, otherwise a uniform sampler over it.
pub fn diagonal_design(k: usize, d: usize) -> Result<DesignSet> {
    let design = DiagonalDesign::new(k, d)?;
    if design.is_enumerable() {
        Ok(DesignSet::Enumerated(design.enumerate()?))
    } else {
        Ok(DesignSet::Sampler(design))
    }
}

/// Integer partitions of `k` in non-increasing order.
fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn go(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=rest.min(max)).rev() {
            cur.push(p);
            go(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(k, k, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `Σ_n binom(k; n_1…n_d)²` over compositions of `k` into `d` parts.
pub fn frame_potential_rdu_exact(k: usize, d: usize) -> Result<f64> {
    check_order(k)?;
    let mut total = 0.0;
    for parts in partitions(k) {
        let len = parts.len();
        if len > d {
            continue;
        }
        let falling: f64 = (0..len).map(|i| (d - i) as f64).product();
        let mut mult: HashMap<usize, usize> = HashMap::new();
        for &p in &parts {
            *mult.entry(p).or_default() += 1;
        }
        let placements = falling / mult.values().map(|&m| factorial(m)).product::<f64>();
        let multinomial = factorial(k) / parts.iter().map(|&p| factorial(p)).product::<f64>();
        total += placements * multinomial * multinomial;
    }
    Ok(total)
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).map(|i| (n - i) as f64 / (i + 1) as f64).product()
}

/// `|E_t e^{-iωt}|²` for `t` uniform on a window of length `dt`.
pub fn sinc_sq_weight(omega: f64, dt: f64, resolution: f64) -> f64 {
    if omega.abs() < resolution {
        return 1.0;
    }
    let x = omega * dt / 2.0;
    let s = x.sin() / x;
    s * s
}

/// Multisets of size `k` over `0..d`, as `(Σ E, multinomial coefficient)`.
fn multiset_terms(energies: &[f64], k: usize) -> Vec<(f64, f64)> {
    let d = energies.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let sum: f64 = idx.iter().map(|&i| energies[i]).sum();
        let mut denom = 1.0;
        let mut run = 1;
        for w in 1..k {
            if idx[w] == idx[w - 1] {
                run += 1;
            } else {
                denom *= factorial(run);
                run = 1;
            }
        }
        denom *= factorial(run);
        out.push((sum, factorial(k) / denom));
        // next non-decreasing tuple
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] + 1 < d {
                let v = idx[pos] + 1;
                for slot in &mut idx[pos..] {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// `E_{t_1,t_2} |Tr(Λ̄_{t_1} Λ_{t_2})|^{2k}` for times uniform on `[t_min, t_max]`.
pub fn frame_potential_finite_time(spec: &DegeneracySpec, k: usize, t_min: f64, t_max: f64) -> Result<f64> {
    check_order(k)?;
    if !(t_max > t_min) {
        return Err(ShadowError::InvalidInput(format!("time window [{t_min}, {t_max}] is empty")));
    }
    let count = binomial(spec.dim() + k - 1, k);
    guard("finite-time frame potential", count * count, FRAME_POTENTIAL_TERM_LIMIT)?;
    let dt = t_max - t_min;
    let terms = multiset_terms(&spec.energies, k);
    let total: f64 = terms
        .par_iter()
        .map(|&(s1, c1)| {
            terms.iter().map(|&(s2, c2)| c1 * c2 * sinc_sq_weight(s1 - s2, dt, spec.resolution)).sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total)
}

/// A distribution over diagonal unitaries.
pub trait PhaseSampler: Sync {
    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut StreamRng) -> PhaseVector;
}

/// Independent uniform phases.
pub struct IdealRdu {
    pub dim: usize,
}

impl PhaseSampler for IdealRdu {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample(&self, rng: &mut StreamRng) -> PhaseVector {
        PhaseVector::new((0..self.dim).map(|_| rng.random::<f64>() * TAU).collect())
    }
}

impl PhaseSampler for DiagonalDesign {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, rng: &mut StreamRng) -> PhaseVector {
        DiagonalDesign::sample(self, rng)
    }
}

/// `θ = -E t` with `t` uniform on `[t_min, t_max]`.
pub struct FiniteTimeSampler {
    pub energies: Vec<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

impl PhaseSampler for FiniteTimeSampler {
    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn sample(&self, rng: &mut StreamRng) -> PhaseVector {
        let t = self.t_min + (self.t_max - self.t_min) * rng.random::<f64>();
        PhaseVector::from_time(&self.energies, t)
    }
}

/// Always the same diagonal unitary.
pub struct PointSampler(pub PhaseVector);

impl PhaseSampler for PointSampler {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&self, _rng: &mut StreamRng) -> PhaseVector {
        self.0.clone()
    }
}

/// Pair-sample estimate of `E|Tr(U†V)|^{2k}` and its standard error.
pub fn frame_potential_mc(sampler: &dyn PhaseSampler, k: usize, num_samples: usize, seed: u64) -> Result<(f64, f64)> {
    check_order(k)?;
    if num_samples < 2 {
        return Err(ShadowError::TooFewSamples { needed: 2, got: num_samples });
    }
    let values: Vec<f64> = (0..num_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let u = sampler.sample(&mut rng);
            let v = sampler.sample(&mut rng);
            let tr: C64 = u.phases.iter().zip(&v.phases).map(|(a, b)| C64::cis(b - a)).sum();
            tr.norm_sqr().powi(k as i32)
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
