//! Observable estimates from snapshot sets.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Result, ShadowError};
use crate::qmatrix::{
    hermiticity_deviation, quad_form, swap_operator, trace_product, ComplexMatrix, DensityMatrix, C64, STRUCTURAL_TOL, ZERO,
};
use crate::rng::{substream, StreamRng};
use crate::sampler::SnapshotSet;
use crate::shadowmap::{ShadowInverter, Snapshot};

/// Snapshots per parallel work unit; partial sums are combined in index order.
const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Structure {
    Generic,
    Identity,
    Swap,
}

#[derive(Clone, Debug)]
pub struct Observable {
    name: String,
    matrix: ComplexMatrix,
    copies: usize,
    patch_support: Option<Vec<usize>>,
    structure: Structure,
}

impl Observable {
    /// `matrix` acts on `d` dimensions for one copy or `d²` for two.
    pub fn new(name: impl Into<String>, matrix: ComplexMatrix, copies: usize) -> Result<Self> {
        if !(1..=2).contains(&copies) {
            return Err(ShadowError::InvalidInput(format!("observables act on 1 or 2 copies, not {copies}")));
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > STRUCTURAL_TOL {
            return Err(ShadowError::NotHermitian(dev));
        }
        if copies == 2 {
            let d = (matrix.nrows() as f64).sqrt().round() as usize;
            if d * d != matrix.nrows() {
                return Err(ShadowError::DimensionMismatch(format!("{:?} is not a two-copy operator", matrix.shape())));
            }
        }
        Ok(Self { name: name.into(), matrix, copies, patch_support: None, structure: Structure::Generic })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            name: "identity".into(),
            matrix: ComplexMatrix::identity(d, d),
            copies: 1,
            patch_support: None,
            structure: Structure::Generic,
        }
    }

    /// `I ⊗ I` on two copies.
    pub fn identity_pair(d: usize) -> Self {
        Self {
            name: "identity-pair".into(),
            matrix: ComplexMatrix::identity(d * d, d * d),
            copies: 2,
            patch_support: None,
            structure: Structure::Identity,
        }
    }

    /// Two-copy swap; its expectation on `ρ⊗ρ` is the purity.
    pub fn swap(d: usize) -> Self {
        Self { name: "purity".into(), matrix: swap_operator(d), copies: 2, patch_support: None, structure: Structure::Swap }
    }

    pub fn with_patch_support(mut self, patches: Vec<usize>) -> Self {
        self.patch_support = Some(patches);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn patch_support(&self) -> Option<&[usize]> {
        self.patch_support.as_deref()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    /// Single-copy dimension.
    pub fn dim(&self) -> usize {
        if self.copies == 2 {
            (self.matrix.nrows() as f64).sqrt().round() as usize
        } else {
            self.matrix.nrows()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mean,
    /// `dropped` trailing values did not fill a batch.
    MedianOfMeans { batches: usize, dropped: usize },
    UStatistic,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Mean => "mean".into(),
            Method::MedianOfMeans { batches, dropped } => format!("median-of-means({batches},dropped={dropped})"),
            Method::UStatistic => "u-statistic".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub std_error: f64,
    pub num_snapshots: usize,
    pub method: Method,
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { f64::NAN };
    (mean, var)
}

/// Plain mean with standard error `sd/√K` (infinite for a single value).
pub fn mean_report(values: &[f64]) -> Result<EstimateReport> {
    if values.is_empty() {
        return Err(ShadowError::TooFewSamples { needed: 1, got: 0 });
    }
    let (mean, var) = mean_and_var(values);
    let std_error = if values.len() > 1 { (var / values.len() as f64).sqrt() } else { f64::INFINITY };
    Ok(EstimateReport { value: mean, std_error, num_snapshots: values.len(), method: Method::Mean })
}

/// Median of contiguous batch means. Standard error is `√(π/2)·sd(means)/√B`.
pub fn median_of_means(values: &[f64], num_batches: usize) -> Result<EstimateReport> {
    if values.is_empty() {
        return Err(ShadowError::TooFewSamples { needed: 1, got: 0 });
    }
    if num_batches == 0 || num_batches > values.len() {
        return Err(ShadowError::InvalidInput(format!("{num_batches} batches for {} values", values.len())));
    }
    let size = values.len() / num_batches;
    let dropped = values.len() - size * num_batches;
    let method = Method::MedianOfMeans { batches: num_batches, dropped };
    if num_batches == 1 {
        let plain = mean_report(&values[..size])?;
        return Ok(EstimateReport { method, ..plain });
    }
    let mut means: Vec<f64> = values[..size * num_batches].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let (_, var) = mean_and_var(&means);
    means.sort_by(f64::total_cmp);
    let b = means.len();
    let median = if b % 2 == 1 { means[b / 2] } else { 0.5 * (means[b / 2 - 1] + means[b / 2]) };
    let std_error = (std::f64::consts::FRAC_PI_2 * var / b as f64).sqrt();
    Ok(EstimateReport { value: median, std_error, num_snapshots: size * num_batches, method })
}

fn check_linear(inv: &ShadowInverter, o: &Observable) -> Result<()> {
    if o.copies != 1 {
        return Err(ShadowError::UnsupportedObservable(format!("{} acts on two copies", o.name)));
    }
    if o.dim() != inv.dim() {
        return Err(ShadowError::DimensionMismatch(format!("observable dim {} for inverter dim {}", o.dim(), inv.dim())));
    }
    Ok(())
}

/// Per-snapshot `ô = x† B x` with `B` the transformed observable.
pub fn per_snapshot_linear(inv: &ShadowInverter, snaps: &[Snapshot], o: &Observable) -> Result<Vec<f64>> {
    check_linear(inv, o)?;
    let b = inv.transformed_observable(&o.matrix)?;
    snaps.par_iter().map(|s| inv.single_shot_value(&b, s)).collect()
}

/// Per-snapshot `Tr(O ρ̂)` through explicit estimators.
pub fn per_snapshot_linear_slow(inv: &ShadowInverter, snaps: &[Snapshot], o: &Observable) -> Result<Vec<f64>> {
    check_linear(inv, o)?;
    snaps.iter().map(|s| Ok(trace_product(&o.matrix, &inv.build_estimator(s)?).re)).collect()
}

pub fn estimate_linear(inv: &ShadowInverter, set: &SnapshotSet, o: &Observable) -> Result<EstimateReport> {
    set.check_fingerprint(inv.fingerprint())?;
    mean_report(&per_snapshot_linear(inv, &set.snapshots, o)?)
}

pub fn estimate_linear_mom(inv: &ShadowInverter, set: &SnapshotSet, o: &Observable, batches: usize) -> Result<EstimateReport> {
    set.check_fingerprint(inv.fingerprint())?;
    median_of_means(&per_snapshot_linear(inv, &set.snapshots, o)?, batches)
}

/// `Tr[O (A ⊗ B)]` for a two-copy operator `O`.
pub fn two_copy_trace(o: &Observable, a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    match o.structure {
        Structure::Swap => trace_product(a, b),
        Structure::Identity => a.trace() * b.trace(),
        Structure::Generic => {
            let d = a.nrows();
            let m = &o.matrix;
            let mut acc = ZERO;
            for i in 0..d {
                for j in 0..d {
                    let aij = a[(i, j)];
                    for k in 0..d {
                        for l in 0..d {
                            acc += m[(j * d + l, i * d + k)] * aij * b[(k, l)];
                        }
                    }
                }
            }
            acc
        }
    }
}

/// Sum of `f(i)` over `0..n`, computed in parallel chunks and combined in index order.
fn ordered_sum<T, F>(n: usize, zero: T, f: F) -> Result<T>
where
    T: Send + Sync + Clone + std::ops::AddAssign,
    F: Fn(usize) -> Result<T> + Sync,
{
    let partials = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = zero.clone();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                acc += f(i)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<T>>>()?;
    let mut total = zero;
    for p in partials {
        total += p;
    }
    Ok(total)
}

/// U-statistic `(1/K(K−1)) Σ_{i≠j} Tr[O(ρ̂_i⊗ρ̂_j)]` with a delete-one jackknife
/// standard error.
pub fn estimate_nonlinear(inv: &ShadowInverter, set: &SnapshotSet, o: &Observable) -> Result<EstimateReport> {
    set.check_fingerprint(inv.fingerprint())?;
    estimate_nonlinear_snapshots(inv, &set.snapshots, o)
}

pub fn estimate_nonlinear_snapshots(inv: &ShadowInverter, snaps: &[Snapshot], o: &Observable) -> Result<EstimateReport> {
    if o.copies != 2 {
        return Err(ShadowError::UnsupportedObservable(format!("{} acts on one copy", o.name)));
    }
    if o.dim() != inv.dim() {
        return Err(ShadowError::DimensionMismatch(format!("observable dim {} for inverter dim {}", o.dim(), inv.dim())));
    }
    let k = snaps.len();
    if k < 2 {
        return Err(ShadowError::TooFewSamples { needed: 2, got: k });
    }
    inv.require_invertible()?;
    let d = inv.dim();
    let kf = k as f64;

    // Pass 1: R = Σ ρ̂_i and Σ_i Tr[O(ρ̂_i⊗ρ̂_i)].
    let Moments(r, diag) = ordered_sum(k, Moments(ComplexMatrix::zeros(d, d), ZERO), |i| {
        let est = inv.build_estimator(&snaps[i])?;
        let self_term = two_copy_trace(o, &est, &est);
        Ok(Moments(est, self_term))
    })?;
    let total = (two_copy_trace(o, &r, &r) - diag).re;
    let value = total / (kf * (kf - 1.0));

    if k < 3 {
        return Ok(EstimateReport { value, std_error: f64::INFINITY, num_snapshots: k, method: Method::UStatistic });
    }
    // Pass 2: leave-one-out statistics T_{-i}.
    let loo = (0..k)
        .into_par_iter()
        .map(|i| {
            let est = inv.build_estimator(&snaps[i])?;
            let rest = &r - &est;
            let cross = (two_copy_trace(o, &est, &rest) + two_copy_trace(o, &rest, &est)).re;
            Ok((total - cross) / ((kf - 1.0) * (kf - 2.0)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean_loo, _) = mean_and_var(&loo);
    let ss: f64 = loo.iter().map(|t| (t - mean_loo).powi(2)).sum();
    let std_error = ((kf - 1.0) / kf * ss).sqrt();
    Ok(EstimateReport { value, std_error, num_snapshots: k, method: Method::UStatistic })
}

/// `(Σ ρ̂_i, Σ Tr[O(ρ̂_i⊗ρ̂_i)])`.
#[derive(Clone)]
struct Moments(ComplexMatrix, C64);

impl std::ops::AddAssign for Moments {
    fn add_assign(&mut self, other: Self) {
        self.0 += other.0;
        self.1 += other.1;
    }
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn haar_unitary(d: usize, rng: &mut StreamRng) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..d {
        let z = r[(c, c)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(c);
        col *= phase;
    }
    q
}

/// Per-shot `(d+1)⟨b|U O U†|b⟩ − Tr O` with Haar-random `U` applied as `U ρ U†`.
pub fn global_shadow_values(rho: &DensityMatrix, num_shots: usize, seed: u64, o: &Observable) -> Result<Vec<f64>> {
    let d = rho.dim();
    if o.copies != 1 || o.dim() != d {
        return Err(ShadowError::DimensionMismatch(format!("observable dim {} for state dim {d}", o.dim())));
    }
    let components = rho.pure_components();
    let tr_o = o.matrix.trace().re;
    (0..num_shots as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let u = haar_unitary(d, &mut rng);
            let mut p = vec![0.0; d];
            for (lambda, psi) in &components {
                let amp = &u * psi;
                for (b, pb) in p.iter_mut().enumerate() {
                    *pb += lambda * amp[b].norm_sqr();
                }
            }
            let total: f64 = p.iter().sum();
            let x: f64 = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut outcome = d - 1;
            for (b, pb) in p.iter().enumerate() {
                acc += pb;
                if x < acc {
                    outcome = b;
                    break;
                }
            }
            let y: Vec<C64> = (0..d).map(|k| u[(outcome, k)].conj()).collect();
            Ok((d as f64 + 1.0) * quad_form(&o.matrix, &y).re - tr_o)
        })
        .collect()
}

/// Global-shadow baseline with Haar-random unitaries.
pub fn baseline_global_shadow(rho: &DensityMatrix, num_shots: usize, seed: u64, o: &Observable) -> Result<EstimateReport> {
    mean_report(&global_shadow_values(rho, num_shots, seed, o)?)
}

/// Biased: treats Hamiltonian-quench data as if it came from global
/// random unitaries, `ρ̂ = (d+1) U†|b⟩⟨b|U − I`.
pub fn wrong_postprocessing_values(inv: &ShadowInverter, snaps: &[Snapshot], o: &Observable) -> Result<Vec<f64>> {
    check_linear(inv, o)?;
    let d = inv.dim();
    let v = inv.hamiltonian().eigenbasis();
    let tr_o = o.matrix.trace().re;
    snaps
        .par_iter()
        .map(|s| {
            let x = inv.frame_vector(s)?;
            let y: Vec<C64> = (0..d).map(|r| (0..d).map(|k| v[(r, k)] * x[k]).sum()).collect();
            Ok((d as f64 + 1.0) * quad_form(&o.matrix, &y).re - tr_o)
        })
        .collect()
}
