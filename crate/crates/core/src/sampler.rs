//! Simulated quench-and-measure experiments.

use std::f64::consts::TAU;
use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, ShadowError};
use crate::qmatrix::{tensor_all, ComplexMatrix, DensityMatrix, SpectralHamiltonian, C64, ZERO};
use crate::rdu::{DiagonalDesign, PhaseVector};
use crate::rng::{substream, StreamRng, RNG_DESCRIPTION};
use crate::shadowmap::{fingerprint, shared_time_warnings, Setting, Snapshot};

pub const SNAPSHOT_FORMAT_HEADER: &str = "# hshadow-snapshots v1";
/// Largest accepted deviation of the Born vector's sum from 1.
pub const BORN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeModel {
    /// `t` uniform on `[t_min, t_max]` μs.
    UniformWindow { t_min: f64, t_max: f64 },
    /// Phases iid uniform on `[0, 2π)`.
    IdealRdu,
    /// Phases uniform over the diagonal `k`-design.
    Design { k: usize },
}

impl TimeModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeModel::UniformWindow { t_min, t_max } if !(t_max > t_min && t_min >= 0.0 && t_max.is_finite()) => {
                Err(ShadowError::InvalidInput(format!("time window needs t_max > t_min ≥ 0, got [{t_min}, {t_max}]")))
            }
            TimeModel::Design { k } if !(1..=3).contains(&k) => {
                Err(ShadowError::InvalidInput(format!("design order {k} must be 1, 2 or 3")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TimeModel::UniformWindow { t_min, t_max } => format!("uniform-window {t_min} {t_max}"),
            TimeModel::IdealRdu => "ideal-rdu".into(),
            TimeModel::Design { k } => format!("design {k}"),
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        let parts: Vec<&str> = label.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|e| ShadowError::InvalidInput(format!("{s:?}: {e}")));
        let tm = match parts.as_slice() {
            ["uniform-window", a, b] => TimeModel::UniformWindow { t_min: num(a)?, t_max: num(b)? },
            ["ideal-rdu"] => TimeModel::IdealRdu,
            ["design", k] => TimeModel::Design {
                k: k.parse().map_err(|e| ShadowError::InvalidInput(format!("design order {k:?}: {e}")))?,
            },
            _ => return Err(ShadowError::InvalidInput(format!("unknown time model {label:?}"))),
        };
        tm.validate()?;
        Ok(tm)
    }

    pub fn uses_times(&self) -> bool {
        matches!(self, TimeModel::UniformWindow { .. })
    }

    fn draw_time(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            TimeModel::UniformWindow { t_min, t_max } => t_min + (t_max - t_min) * rng.random::<f64>(),
            _ => unreachable!("time drawn for a phase model"),
        }
    }

    fn draw_phases(&self, d: usize, rng: &mut StreamRng) -> PhaseVector {
        match *self {
            TimeModel::IdealRdu => PhaseVector::new((0..d).map(|_| rng.random::<f64>() * TAU).collect()),
            TimeModel::Design { k } => DiagonalDesign::new(k, d).expect("validated design").sample(rng),
            TimeModel::UniformWindow { .. } => unreachable!("phases drawn for a time window"),
        }
    }

    fn draw_setting(&self, h: &SpectralHamiltonian, rng: &mut StreamRng) -> Setting {
        if self.uses_times() {
            Setting::Time(self.draw_time(rng))
        } else {
            Setting::Phases(self.draw_phases(h.dim(), rng))
        }
    }
}

/// Born sampler for `U = V diag(e^{iθ}) V†` applied to a fixed state.
struct BornSampler {
    v: ComplexMatrix,
    /// `(λ_r, V†|r⟩)` for the pure components of `ρ`.
    components: Vec<(f64, Vec<C64>)>,
}

impl BornSampler {
    fn new(v: ComplexMatrix, rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != v.nrows() {
            return Err(ShadowError::DimensionMismatch(format!(
                "state of dimension {} for a Hamiltonian of dimension {}",
                rho.dim(),
                v.nrows()
            )));
        }
        let vd = v.adjoint();
        let components =
            rho.pure_components().into_iter().map(|(lambda, psi)| (lambda, (&vd * psi).iter().copied().collect())).collect();
        Ok(Self { v, components })
    }

    fn probabilities(&self, phases: &[f64]) -> Result<Vec<f64>> {
        let d = self.v.nrows();
        let lam: Vec<C64> = phases.iter().map(|&t| C64::cis(t)).collect();
        let mut p = vec![0.0; d];
        for (weight, w) in &self.components {
            let lw: Vec<C64> = w.iter().zip(&lam).map(|(a, b)| a * b).collect();
            for (b, pb) in p.iter_mut().enumerate() {
                let mut amp = ZERO;
                for k in 0..d {
                    amp += self.v[(b, k)] * lw[k];
                }
                *pb += weight * amp.norm_sqr();
            }
        }
        for pb in p.iter_mut() {
            *pb = pb.max(0.0);
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() >= BORN_TOL {
            return Err(ShadowError::BornNormalization(total - 1.0));
        }
        for pb in p.iter_mut() {
            *pb /= total;
        }
        Ok(p)
    }

    fn draw(&self, phases: &[f64], rng: &mut StreamRng) -> Result<usize> {
        let p = self.probabilities(phases)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (b, pb) in p.iter().enumerate() {
            acc += pb;
            if u < acc {
                return Ok(b);
            }
        }
        Ok(p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1))
    }
}

/// Repeated single-shot sampling from one Hamiltonian and state.
pub struct Simulator<'a> {
    h: &'a SpectralHamiltonian,
    born: BornSampler,
    tm: TimeModel,
}

impl<'a> Simulator<'a> {
    pub fn new(h: &'a SpectralHamiltonian, rho: &DensityMatrix, tm: TimeModel) -> Result<Self> {
        tm.validate()?;
        Ok(Self { h, born: BornSampler::new(h.eigenbasis().clone(), rho)?, tm })
    }

    /// Exact Born distribution after the quench with the given setting.
    pub fn probabilities(&self, setting: &Setting) -> Result<Vec<f64>> {
        let phases = match setting {
            Setting::Time(t) => self.h.phases_at(*t),
            Setting::Phases(p) => p.phases().to_vec(),
        };
        self.born.probabilities(&phases)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> Result<Snapshot> {
        let setting = self.tm.draw_setting(self.h, rng);
        let phases = match &setting {
            Setting::Time(t) => self.h.phases_at(*t),
            Setting::Phases(p) => p.phases().to_vec(),
        };
        let outcome = self.born.draw(&phases, rng)?;
        Ok(Snapshot { setting, outcome })
    }
}

pub fn sample_snapshot(h: &SpectralHamiltonian, rho: &DensityMatrix, tm: TimeModel, rng: &mut StreamRng) -> Result<Snapshot> {
    Simulator::new(h, rho, tm)?.sample(rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub snapshots: Vec<Snapshot>,
    pub fingerprint: String,
    pub seed: u64,
    pub time_model: TimeModel,
    pub dim: usize,
}

/// `num_shots` snapshots; shot `i` uses substream `i` of `seed`.
pub fn run_batch(
    h: &SpectralHamiltonian,
    rho: &DensityMatrix,
    tm: TimeModel,
    num_shots: usize,
    seed: u64,
) -> Result<SnapshotSet> {
    if num_shots == 0 {
        return Err(ShadowError::TooFewSamples { needed: 1, got: 0 });
    }
    let sim = Simulator::new(h, rho, tm)?;
    let snapshots = (0..num_shots as u64)
        .into_par_iter()
        .map(|i| sim.sample(&mut substream(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SnapshotSet { snapshots, fingerprint: fingerprint(h), seed, time_model: tm, dim: h.dim() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchTiming {
    /// One evolution time for all patches.
    Shared,
    /// An independent time per patch.
    PerPatch,
}

pub struct LocalBatch {
    pub sets: Vec<SnapshotSet>,
    pub warnings: Vec<String>,
}

/// Joint sampling of `⊗_p V_p Λ_p V_p†` on the full state; per-patch records.
/// Phase models always draw independent phases per patch.
pub fn run_local_batch(
    patch_hs: &[SpectralHamiltonian],
    rho: &DensityMatrix,
    tm: TimeModel,
    timing: PatchTiming,
    num_shots: usize,
    seed: u64,
) -> Result<LocalBatch> {
    tm.validate()?;
    if num_shots == 0 {
        return Err(ShadowError::TooFewSamples { needed: 1, got: 0 });
    }
    let dims: Vec<usize> = patch_hs.iter().map(|h| h.dim()).collect();
    let total: usize = dims.iter().product();
    if patch_hs.is_empty() || total != rho.dim() {
        return Err(ShadowError::DimensionMismatch(format!("patch dims {dims:?} for a state of dimension {}", rho.dim())));
    }
    let mut warnings = Vec::new();
    if tm.uses_times() && timing == PatchTiming::Shared {
        warnings = shared_time_warnings(&patch_hs.iter().collect::<Vec<_>>());
        for w in &warnings {
            log::warn!("{w}");
        }
    }
    let v = tensor_all(&patch_hs.iter().map(|h| h.eigenbasis().clone()).collect::<Vec<_>>());
    let born = BornSampler::new(v, rho)?;
    let strides: Vec<usize> = (0..dims.len()).map(|p| dims[p + 1..].iter().product()).collect();

    let records = (0..num_shots as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let shared = if tm.uses_times() && timing == PatchTiming::Shared { Some(tm.draw_time(&mut rng)) } else { None };
            let settings: Vec<Setting> = patch_hs
                .iter()
                .map(|h| match shared {
                    Some(t) => Setting::Time(t),
                    None => tm.draw_setting(h, &mut rng),
                })
                .collect();
            let patch_phases: Vec<Vec<f64>> = settings
                .iter()
                .zip(patch_hs)
                .map(|(s, h)| match s {
                    Setting::Time(t) => h.phases_at(*t),
                    Setting::Phases(p) => p.phases().to_vec(),
                })
                .collect();
            let joint: Vec<f64> = (0..total)
                .map(|idx| (0..dims.len()).map(|p| patch_phases[p][(idx / strides[p]) % dims[p]]).sum())
                .collect();
            let outcome = born.draw(&joint, &mut rng)?;
            Ok(settings
                .into_iter()
                .enumerate()
                .map(|(p, setting)| Snapshot { setting, outcome: (outcome / strides[p]) % dims[p] })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let sets = patch_hs
        .iter()
        .enumerate()
        .map(|(p, h)| SnapshotSet {
            snapshots: records.iter().map(|r| r[p].clone()).collect(),
            fingerprint: fingerprint(h),
            seed,
            time_model: tm,
            dim: h.dim(),
        })
        .collect();
    Ok(LocalBatch { sets, warnings })
}

fn parse_err(line: usize, msg: impl Into<String>) -> ShadowError {
    ShadowError::Parse { line, msg: msg.into() }
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Error unless the set was generated by a Hamiltonian with this fingerprint.
    pub fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.fingerprint != expected {
            return Err(ShadowError::FingerprintMismatch { expected: expected.into(), found: self.fingerprint.clone() });
        }
        Ok(())
    }

    pub fn manifest(&self) -> String {
        format!(
            "format = hshadow-snapshots v1\nseed = {}\ntime_model = {}\nfingerprint = {}\nshots = {}\ndim = {}\nrng = {}\nversion = {}\n",
            self.seed,
            self.time_model.label(),
            self.fingerprint,
            self.len(),
            self.dim,
            RNG_DESCRIPTION,
            env!("CARGO_PKG_VERSION"),
        )
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SNAPSHOT_FORMAT_HEADER}")?;
        writeln!(w, "# fingerprint {}", self.fingerprint)?;
        writeln!(w, "# seed {}", self.seed)?;
        writeln!(w, "# time_model {}", self.time_model.label())?;
        writeln!(w, "# dim {}", self.dim)?;
        writeln!(w, "# rng {RNG_DESCRIPTION}")?;
        writeln!(w, "{}", if self.time_model.uses_times() { "t_us b" } else { "phases b" })?;
        for s in &self.snapshots {
            match &s.setting {
                Setting::Time(t) => writeln!(w, "{t} {}", s.outcome)?,
                Setting::Phases(p) => {
                    let joined: Vec<String> = p.phases().iter().map(|x| x.to_string()).collect();
                    writeln!(w, "{} {}", joined.join(","), s.outcome)?
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(parse_err(0, format!("missing {want}"))),
            }
        };
        let (n, first) = next("header")?;
        if first.trim() != SNAPSHOT_FORMAT_HEADER {
            return Err(parse_err(n, format!("expected {SNAPSHOT_FORMAT_HEADER:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, l) = next(key)?;
            let prefix = format!("# {key} ");
            l.strip_prefix(&prefix).map(|v| (n, v.trim().to_string())).ok_or_else(|| parse_err(n, format!("expected {prefix:?}")))
        };
        let fingerprint = field("fingerprint")?.1;
        let (n, seed) = field("seed")?;
        let seed = seed.parse().map_err(|e| parse_err(n, format!("seed: {e}")))?;
        let (n, tm) = field("time_model")?;
        let time_model = TimeModel::parse(&tm).map_err(|e| parse_err(n, e.to_string()))?;
        let (n, dim) = field("dim")?;
        let dim: usize = dim.parse().map_err(|e| parse_err(n, format!("dim: {e}")))?;
        field("rng")?;
        let (n, columns) = next("column header")?;
        let expected = if time_model.uses_times() { "t_us b" } else { "phases b" };
        if columns.trim() != expected {
            return Err(parse_err(n, format!("expected column header {expected:?}")));
        }
        let mut snapshots = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(first), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(n, "expected two fields"));
            };
            let outcome: usize = b.parse().map_err(|e| parse_err(n, format!("outcome: {e}")))?;
            if outcome >= dim {
                return Err(parse_err(n, format!("outcome {outcome} ≥ dim {dim}")));
            }
            let setting = if time_model.uses_times() {
                Setting::Time(first.parse().map_err(|e| parse_err(n, format!("time: {e}")))?)
            } else {
                let phases = first
                    .split(',')
                    .map(|x| x.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(n, format!("phase: {e}")))?;
                if phases.len() != dim {
                    return Err(parse_err(n, format!("{} phases for dim {dim}", phases.len())));
                }
                Setting::Phases(PhaseVector::new(phases))
            };
            snapshots.push(Snapshot { setting, outcome });
        }
        Ok(SnapshotSet { snapshots, fingerprint, seed, time_model, dim })
    }
}
