//! Experiment configuration: a versioned TOML document with strict keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hshadow::estimators::Observable;
use hshadow::models::{
    conditioned_chain, exp_family_hamiltonian, gue_hamiltonian, ladder_positions, prepare_state, projector,
    random_positions, rydberg_hamiltonian, single_qubit_theta, RydbergParams, StateSpec, JITTER, LADDER_SEPARATION,
    LAYOUT_MAX_CONDITION, SPACING,
};
use hshadow::qmatrix::{basis_ket, hermitian_spectral, pauli_string, ComplexMatrix, DensityMatrix, SpectralHamiltonian};
use hshadow::sampler::TimeModel;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub shots: usize,
    pub model: ModelSpec,
    pub state: StateConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Gue {
        dim: usize,
        seed: u64,
    },
    Rydberg {
        atoms: usize,
        #[serde(default)]
        layout: Layout,
        #[serde(default)]
        position_seed: u64,
        /// Explicit coordinates in μm; overrides `layout`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positions: Option<Vec<[f64; 2]>>,
        /// CSV with columns `x` and optionally `y` in μm; relative to the config file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        positions_csv: Option<PathBuf>,
    },
    /// `V = e^{iPθ}` with GUE `P` and generic energies.
    ExpFamily {
        qubits: usize,
        theta: f64,
        p_seed: u64,
        energy_seed: u64,
    },
    SingleQubitTheta {
        theta: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Jittered chain at the blockade spacing.
    Chain,
    /// Jittered chain, redrawn until `X_H` is well conditioned.
    #[default]
    ConditionedChain,
    /// Two unjittered legs; the first half of the atoms forms the lower leg.
    Ladder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Ghz { qubits: usize },
    Cluster { qubits: usize },
    Ladder { n_down: usize, n_up: usize },
    RandomPure { seed: u64 },
    /// Gibbs state of the model Hamiltonian.
    Thermal { beta: f64 },
    Basis { index: usize },
    MaximallyMixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeConfig {
    IdealRdu,
    UniformWindow { t_min: f64, t_max: f64 },
    Design { k: usize },
}

impl TimeConfig {
    pub fn time_model(&self) -> TimeModel {
        match *self {
            TimeConfig::IdealRdu => TimeModel::IdealRdu,
            TimeConfig::UniformWindow { t_min, t_max } => TimeModel::UniformWindow { t_min, t_max },
            TimeConfig::Design { k } => TimeModel::Design { k },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMethod {
    #[default]
    Mean,
    MedianOfMeans,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// `identity`, `fidelity`, `purity`, or sums of Pauli strings such as `XZX` or `X+Y+Z`.
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    #[serde(default)]
    pub method: EstimatorMethod,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_observables() -> Vec<String> {
    vec!["identity".into()]
}

fn default_batches() -> usize {
    10
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { observables: default_observables(), method: EstimatorMethod::default(), batches: default_batches() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("hshadow-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Deserialize)]
struct PositionRow {
    x: f64,
    #[serde(default)]
    y: f64,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A validated configuration together with the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let config = ExperimentConfig::parse(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    fn positions(&self) -> Result<Option<Vec<[f64; 2]>>, CliError> {
        let ModelSpec::Rydberg { positions, positions_csv, .. } = &self.config.model else { return Ok(None) };
        if let Some(p) = positions {
            return Ok(Some(p.clone()));
        }
        let Some(csv_path) = positions_csv else { return Ok(None) };
        let path = self.base_dir.join(csv_path);
        let mut reader = csv::Reader::from_path(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let rows = reader
            .deserialize::<PositionRow>()
            .map(|r| r.map(|p| [p.x, p.y]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Ok(Some(rows))
    }

    /// SHA-256 of the canonical config text and any coordinates loaded from disk.
    pub fn digest(&self) -> Result<String, CliError> {
        let mut hasher = Sha256::new();
        hasher.update(self.config.canonical().as_bytes());
        if let ModelSpec::Rydberg { positions_csv: Some(_), .. } = &self.config.model {
            for [x, y] in self.positions()?.unwrap_or_default() {
                hasher.update(format!("{x:e},{y:e};").as_bytes());
            }
        }
        Ok(hex::encode(hasher.finalize()))
    }

    pub fn hamiltonian(&self) -> Result<SpectralHamiltonian, CliError> {
        let shadow = |e: hshadow::ShadowError| config_err(format!("model: {e}"));
        match &self.config.model {
            ModelSpec::Gue { dim, seed } => gue_hamiltonian(*dim, *seed).map_err(shadow),
            ModelSpec::ExpFamily { qubits, theta, p_seed, energy_seed } => {
                exp_family_hamiltonian(1 << qubits, *p_seed, *theta, *energy_seed).map_err(shadow)
            }
            ModelSpec::SingleQubitTheta { theta } => hermitian_spectral(&single_qubit_theta(*theta)).map_err(shadow),
            ModelSpec::Rydberg { atoms, layout, position_seed, .. } => {
                let params = match self.positions()? {
                    Some(p) => {
                        if p.len() != *atoms {
                            return Err(config_err(format!("{} positions given for {atoms} atoms", p.len())));
                        }
                        RydbergParams::with_positions(p)
                    }
                    None => match layout {
                        Layout::Chain => {
                            RydbergParams::with_positions(random_positions(*atoms, SPACING, JITTER, *position_seed).map_err(shadow)?)
                        }
                        Layout::ConditionedChain => {
                            conditioned_chain(*atoms, *position_seed, LAYOUT_MAX_CONDITION).map_err(shadow)?.0
                        }
                        Layout::Ladder => {
                            if atoms % 2 != 0 {
                                return Err(config_err(format!("a ladder needs an even atom count, got {atoms}")));
                            }
                            RydbergParams::with_positions(
                                ladder_positions(atoms / 2, LADDER_SEPARATION, LADDER_SEPARATION, 0.0, *position_seed)
                                    .map_err(shadow)?,
                            )
                        }
                    },
                };
                rydberg_hamiltonian(&params).map_err(shadow)
            }
        }
    }

    pub fn state(&self, h: &SpectralHamiltonian) -> Result<DensityMatrix, CliError> {
        let d = h.dim();
        let spec = match &self.config.state {
            StateConfig::Ghz { qubits } => StateSpec::Ghz(*qubits),
            StateConfig::Cluster { qubits } => StateSpec::Cluster(*qubits),
            StateConfig::Ladder { n_down, n_up } => StateSpec::Ladder { n_down: *n_down, n_up: *n_up },
            StateConfig::RandomPure { seed } => StateSpec::RandomPure { dim: d, seed: *seed },
            StateConfig::Thermal { beta } => StateSpec::Thermal { hamiltonian: h.clone(), beta: *beta },
            StateConfig::Basis { index } => {
                if *index >= d {
                    return Err(config_err(format!("basis index {index} out of range for dimension {d}")));
                }
                return DensityMatrix::from_pure(&basis_ket(d, *index)).map_err(|e| config_err(format!("state: {e}")));
            }
            StateConfig::MaximallyMixed => return Ok(DensityMatrix::maximally_mixed(d)),
        };
        let rho = prepare_state(&spec).map_err(|e| config_err(format!("state: {e}")))?;
        if rho.dim() != d {
            return Err(config_err(format!("state dimension {} does not match model dimension {d}", rho.dim())));
        }
        Ok(rho)
    }

    pub fn observables(&self, rho: &DensityMatrix) -> Result<Vec<Observable>, CliError> {
        self.config.estimator.observables.iter().map(|name| parse_observable(name, rho)).collect()
    }
}

/// `identity`, `purity`, `fidelity` (projector onto a pure state) or a `+`-separated sum of Pauli strings.
pub fn parse_observable(name: &str, rho: &DensityMatrix) -> Result<Observable, CliError> {
    let d = rho.dim();
    let invalid = |e: hshadow::ShadowError| config_err(format!("observable {name:?}: {e}"));
    match name {
        "identity" => Ok(Observable::identity(d)),
        "purity" => Ok(Observable::swap(d)),
        "fidelity" => {
            let components = rho.pure_components();
            let pure: Vec<_> = components.iter().filter(|(p, _)| *p > 1e-10).collect();
            if pure.len() != 1 {
                return Err(config_err("observable \"fidelity\" needs a pure state"));
            }
            Observable::new(name, projector(&pure[0].1), 1).map_err(invalid)
        }
        _ => {
            let mut total = ComplexMatrix::zeros(d, d);
            for term in name.split('+').map(str::trim) {
                if term.is_empty() || !term.chars().all(|c| "IXYZ".contains(c)) || 1usize << term.len() != d {
                    return Err(config_err(format!(
                        "observable {name:?}: expected identity, fidelity, purity or Pauli strings of length log2({d})"
                    )));
                }
                total += pauli_string(term);
            }
            Observable::new(name, total, 1).map_err(invalid)
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.shots == 0 {
            return Err("shots must be positive".into());
        }
        if self.estimator.batches == 0 {
            return Err("estimator.batches must be positive".into());
        }
        if let ModelSpec::Rydberg { positions: Some(_), positions_csv: Some(_), .. } = &self.model {
            return Err("give either positions or positions_csv, not both".into());
        }
        self.time.time_model().validate().map_err(|e| e.to_string())
    }

    /// Deterministic TOML rendering; parsing it yields an equal config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
