use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use hshadow::estimators::{estimate_linear, estimate_linear_mom, estimate_nonlinear, per_snapshot_linear, EstimateReport};
use hshadow::qmatrix::SpectralHamiltonian;
use hshadow::rdu::{
    frame_potential_finite_time, frame_potential_mc, frame_potential_rdu_exact, DegeneracySpec, DiagonalDesign,
    FiniteTimeSampler, IdealRdu, PhaseSampler,
};
use hshadow::reproduce::{reproduce, Figure, FigureSeries, ReproduceOptions};
use hshadow::rng::derive_seed;
use hshadow::sampler::{run_batch, SnapshotSet, TimeModel};
use hshadow::shadowmap::{build_inverter, InverterMode, ShadowInverter};
use hshadow::variance::variance_report;

use crate::config::{EstimatorMethod, ExperimentConfig, LoadedConfig};
use crate::error::CliError;

/// Seed used by `reproduce` when neither `--seed` nor a config supplies one.
pub const DEFAULT_SEED: u64 = 7;

/// Command-line settings shared by all subcommands.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub shots: Option<usize>,
    pub out: Option<PathBuf>,
    pub allow_incomplete: bool,
    pub finite_time: bool,
}

impl RunOptions {
    /// Loads the config and applies command-line overrides.
    fn load(&self) -> Result<LoadedConfig, CliError> {
        let path = self.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
        let mut loaded = LoadedConfig::load(path)?;
        if let Some(seed) = self.seed {
            loaded.config.seed = seed;
        }
        if let Some(shots) = self.shots {
            loaded.config.shots = shots;
        }
        loaded.config.validate().map_err(CliError::Config)?;
        Ok(loaded)
    }

    fn out_dir(&self, config: Option<&ExperimentConfig>) -> Result<PathBuf, CliError> {
        let dir = match (&self.out, config) {
            (Some(d), _) => d.clone(),
            (None, Some(c)) => c.output.dir.clone(),
            (None, None) => PathBuf::from("hshadow-out"),
        };
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

fn comment_line(seed: u64, digest: &str) -> String {
    format!("# seed={seed} config_sha256={digest}\n")
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn csv_bytes(comment: &str, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut buf = comment.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let runtime = |e: csv::Error| CliError::Runtime(e.to_string());
        w.write_record(header).map_err(runtime)?;
        for r in rows {
            w.write_record(r).map_err(runtime)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

/// Shortest round-trip text; scientific notation outside `[1e-4, 1e6)`.
fn num(x: f64) -> String {
    if x == 0.0 || (1e-4..1e6).contains(&x.abs()) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn mode_for(opts: &RunOptions, tm: TimeModel) -> Result<InverterMode, CliError> {
    if !opts.finite_time {
        return Ok(InverterMode::IdealRdu);
    }
    match tm {
        TimeModel::UniformWindow { t_min, t_max } => Ok(InverterMode::FiniteTime { t_min, t_max }),
        other => Err(CliError::Config(format!("--finite-time needs a uniform-window time model, got {}", other.label()))),
    }
}

/// Inverter for `mode`; an incomplete map aborts unless `--allow-incomplete`,
/// which falls back to the pseudo-inverse.
fn checked_inverter(h: &SpectralHamiltonian, mode: InverterMode, allow_incomplete: bool) -> Result<ShadowInverter, CliError> {
    let inv = build_inverter(h.clone(), mode)?;
    if inv.diagnosis().is_complete() {
        return Ok(inv);
    }
    if !allow_incomplete {
        return Err(CliError::Incomplete(inv.diagnosis().to_string()));
    }
    log::warn!("incomplete Hamiltonian, continuing with the pseudo-inverse: {}", inv.diagnosis().summary());
    Ok(build_inverter(h.clone(), InverterMode::PseudoInverse)?)
}

fn manifest(lines: &[(&str, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn simulate(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let loaded = opts.load()?;
    let cfg = &loaded.config;
    let h = loaded.hamiltonian()?;
    let rho = loaded.state(&h)?;
    loaded.observables(&rho)?;
    let tm = cfg.time.time_model();
    let inv = checked_inverter(&h, mode_for(opts, tm)?, opts.allow_incomplete)?;
    let set = run_batch(&h, &rho, tm, cfg.shots, cfg.seed)?;
    let digest = loaded.digest()?;

    let dir = opts.out_dir(Some(cfg))?;
    let snap_path = dir.join("snapshots.txt");
    let file = File::create(&snap_path).map_err(|e| CliError::Runtime(format!("{}: {e}", snap_path.display())))?;
    let mut w = BufWriter::new(file);
    set.write_to(&mut w)?;
    w.flush()?;
    let mut text = set.manifest();
    text.push_str(&manifest(&[
        ("command", "simulate".into()),
        ("config_sha256", digest),
        ("diagnosis", inv.diagnosis().summary()),
        ("snapshots", "snapshots.txt".into()),
    ]));
    write_file(&dir.join("manifest.txt"), text.as_bytes())?;
    write_file(&dir.join("config.toml"), cfg.canonical().as_bytes())?;
    Ok(snap_path)
}

fn linear_report(cfg: &ExperimentConfig, inv: &ShadowInverter, set: &SnapshotSet, o: &hshadow::estimators::Observable) -> Result<EstimateReport, CliError> {
    Ok(match cfg.estimator.method {
        EstimatorMethod::Mean => estimate_linear(inv, set, o)?,
        EstimatorMethod::MedianOfMeans => estimate_linear_mom(inv, set, o, cfg.estimator.batches)?,
    })
}

pub fn estimate(opts: &RunOptions, snapshots: Option<&Path>) -> Result<PathBuf, CliError> {
    let loaded = opts.load()?;
    let cfg = &loaded.config;
    let h = loaded.hamiltonian()?;
    let rho = loaded.state(&h)?;
    let observables = loaded.observables(&rho)?;
    let dir = opts.out_dir(Some(cfg))?;
    let snap_path = snapshots.map(Path::to_path_buf).unwrap_or_else(|| dir.join("snapshots.txt"));
    let file = File::open(&snap_path).map_err(|e| CliError::Runtime(format!("{}: {e}", snap_path.display())))?;
    let set = SnapshotSet::read_from(BufReader::new(file))?;
    set.check_fingerprint(&hshadow::shadowmap::fingerprint(&h))?;
    let inv = checked_inverter(&h, mode_for(opts, set.time_model)?, opts.allow_incomplete)?;

    let mut rows = Vec::new();
    for o in &observables {
        let r = if o.copies() == 2 { estimate_nonlinear(&inv, &set, o)? } else { linear_report(cfg, &inv, &set, o)? };
        rows.push(vec![
            o.name().to_string(),
            r.method.label(),
            inv.mode().label(),
            num(r.value),
            num(r.std_error),
            r.num_snapshots.to_string(),
        ]);
    }
    let digest = loaded.digest()?;
    let header = ["observable", "method", "inverter", "value", "std_error", "num_snapshots"];
    let out = dir.join("estimates.csv");
    write_file(&out, &csv_bytes(&comment_line(set.seed, &digest), &header, &rows)?)?;
    let text = manifest(&[
        ("command", "estimate".into()),
        ("version", env!("CARGO_PKG_VERSION").into()),
        ("seed", set.seed.to_string()),
        ("config_sha256", digest),
        ("fingerprint", set.fingerprint.clone()),
        ("snapshots", snap_path.display().to_string()),
        ("inverter", inv.mode().label()),
        ("report", "estimates.csv".into()),
    ]);
    write_file(&dir.join("estimates.manifest.txt"), text.as_bytes())?;
    Ok(out)
}

pub fn variance(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let loaded = opts.load()?;
    let cfg = &loaded.config;
    let h = loaded.hamiltonian()?;
    let rho = loaded.state(&h)?;
    let observables = loaded.observables(&rho)?;
    let tm = cfg.time.time_model();
    let inv = checked_inverter(&h, mode_for(opts, tm)?, opts.allow_incomplete)?;
    let set = run_batch(&h, &rho, tm, cfg.shots, cfg.seed)?;

    let mut rows = Vec::new();
    for o in &observables {
        let values = if o.copies() == 1 && set.len() > 1 { Some(per_snapshot_linear(&inv, &set.snapshots, o)?) } else { None };
        let report = variance_report(&inv, o, Some(&rho), values.as_deref())?;
        let truth = if o.copies() == 1 { Some(rho.expectation(o.matrix())) } else { None };
        let exact = report.exact_second_moment.zip(truth).map(|(m2, t)| m2 - t * t);
        rows.push(vec![
            o.name().to_string(),
            o.copies().to_string(),
            cell(truth),
            cell(exact),
            cell(report.shadow_norm_sq),
            num(report.approx_f),
            cell(report.empirical_variance),
            set.len().to_string(),
        ]);
    }
    let digest = loaded.digest()?;
    let header =
        ["observable", "copies", "truth", "variance_exact", "shadow_norm_sq", "approx_f", "empirical_variance", "shots"];
    let out = dir_file(opts, cfg, "variance.csv")?;
    write_file(&out, &csv_bytes(&comment_line(cfg.seed, &digest), &header, &rows)?)?;
    Ok(out)
}

fn dir_file(opts: &RunOptions, cfg: &ExperimentConfig, name: &str) -> Result<PathBuf, CliError> {
    Ok(opts.out_dir(Some(cfg))?.join(name))
}

pub fn frame_potential(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let loaded = opts.load()?;
    let cfg = &loaded.config;
    let h = loaded.hamiltonian()?;
    let d = h.dim();
    let tm = cfg.time.time_model();
    let sampler: Box<dyn PhaseSampler> = match tm {
        TimeModel::IdealRdu => Box::new(IdealRdu { dim: d }),
        TimeModel::Design { k } => Box::new(DiagonalDesign::new(k, d)?),
        TimeModel::UniformWindow { t_min, t_max } => Box::new(FiniteTimeSampler { energies: h.energies().to_vec(), t_min, t_max }),
    };
    let mut rows = Vec::new();
    for k in 1..=3 {
        let exact = frame_potential_rdu_exact(k, d)?;
        let finite = match tm {
            TimeModel::UniformWindow { t_min, t_max } => {
                Some(frame_potential_finite_time(&DegeneracySpec::new(h.energies().to_vec()), k, t_min, t_max)?)
            }
            _ => None,
        };
        let (mean, se) = frame_potential_mc(sampler.as_ref(), k, cfg.shots, derive_seed(cfg.seed, k as u64))?;
        rows.push(vec![
            k.to_string(),
            tm.label(),
            num(exact),
            cell(finite),
            num(mean),
            num(se),
            cfg.shots.to_string(),
        ]);
    }
    let digest = loaded.digest()?;
    let header = ["k", "time_model", "rdu_exact", "finite_time_exact", "mc_mean", "mc_std_error", "samples"];
    let out = dir_file(opts, cfg, "frame_potential.csv")?;
    write_file(&out, &csv_bytes(&comment_line(cfg.seed, &digest), &header, &rows)?)?;
    Ok(out)
}

pub fn diagnose(opts: &RunOptions) -> Result<String, CliError> {
    let loaded = opts.load()?;
    let h = loaded.hamiltonian()?;
    let mode = mode_for(opts, loaded.config.time.time_model())?;
    let inv = build_inverter(h.clone(), mode)?;
    let mut text = format!("dim: {}\nfingerprint: {}\ninverter: {}\n", h.dim(), inv.fingerprint(), mode.label());
    text.push_str(&inv.diagnosis().to_string());
    Ok(text)
}

fn reproduce_digest(figure: Figure, seed: u64, shots: Option<usize>) -> String {
    let canonical = format!(
        "figure = \"{figure}\"\nscale = \"desk\"\nseed = {seed}\nshots = {}\n",
        shots.map(|k| k.to_string()).unwrap_or_else(|| "default".into())
    );
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn write_series(dir: &Path, s: &FigureSeries, seed: u64, shots: Option<usize>) -> Result<PathBuf, CliError> {
    let digest = reproduce_digest(s.figure, seed, shots);
    let mut buf = comment_line(seed, &digest).into_bytes();
    s.write_csv(&mut buf)?;
    let out = dir.join(format!("{}.csv", s.figure));
    write_file(&out, &buf)?;
    let mut text = manifest(&[
        ("command", "reproduce".into()),
        ("figure", s.figure.to_string()),
        ("scale", "desk".into()),
        ("version", env!("CARGO_PKG_VERSION").into()),
        ("seed", seed.to_string()),
        ("shots", shots.map(|k| k.to_string()).unwrap_or_else(|| s.figure.default_shots().to_string())),
        ("config_sha256", digest),
        ("data", format!("{}.csv", s.figure)),
    ]);
    for note in &s.notes {
        text.push_str(&format!("note = {note}\n"));
    }
    write_file(&dir.join(format!("{}.manifest.txt", s.figure)), text.as_bytes())?;
    Ok(out)
}

/// `figure` is a figure key or `all`.
pub fn reproduce_figures(opts: &RunOptions, figure: &str) -> Result<Vec<PathBuf>, CliError> {
    let figures = if figure == "all" {
        Figure::ALL.to_vec()
    } else {
        vec![Figure::parse(figure).map_err(|e| CliError::Config(e.to_string()))?]
    };
    let config_seed = match &opts.config {
        Some(p) => Some(LoadedConfig::load(p)?.config.seed),
        None => None,
    };
    let seed = opts.seed.or(config_seed).unwrap_or(DEFAULT_SEED);
    let dir = opts.out_dir(None)?;
    let mut written = Vec::new();
    for f in figures {
        let series = reproduce(f, &ReproduceOptions { seed, shots: opts.shots }).map_err(|e| match e {
            hshadow::ShadowError::GuardExceeded { .. } => CliError::Config(e.to_string()),
            other => other.into(),
        })?;
        written.push(write_series(&dir, &series, seed, opts.shots)?);
    }
    Ok(written)
}

