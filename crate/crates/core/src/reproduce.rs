//! Desk-scale data series for the benchmark figures.
//!
//! Every series is a table of rows plus notes that declare any substitution
//! made relative to the full-scale experiment. Sizes are capped at eight
//! qubits and `10⁵` shots.

use std::fmt;
use std::io::Write;

use crate::error::{Result, ShadowError};
use crate::estimators::{
    estimate_nonlinear_snapshots, global_shadow_values, mean_report, per_snapshot_linear, two_copy_trace,
    wrong_postprocessing_values, Observable,
};
use crate::models::{
    cluster_vector, conditioned_chain, exp_family_hamiltonian, ghz_vector, hadamard_hamiltonian, ladder_positions,
    prepare_state, projector, rydberg_hamiltonian, single_qubit_theta, RydbergParams, StateSpec, LADDER_SEPARATION,
    LAYOUT_MAX_CONDITION,
};
use crate::qmatrix::{
    evolve, hermitian_spectral, partial_trace, pauli, pauli_string, ComplexMatrix, DensityMatrix, SpectralHamiltonian,
};
use crate::rdu::{frame_potential_finite_time, frame_potential_rdu_exact, DegeneracySpec};
use crate::rng::derive_seed;
use crate::sampler::{run_batch, run_local_batch, PatchTiming, TimeModel};
use crate::shadowmap::{build_inverter, finite_time_forward, local_product_value, InverterMode, ShadowInverter};
use crate::variance::{empirical_variance, variance_approx_linear, variance_approx_purity, variance_exact, ApproxForm};

pub const DESK_MAX_QUBITS: usize = 8;
pub const DESK_MAX_SHOTS: usize = 100_000;
/// Independent `P` draws per point in the `e^{iPθ}` sweeps; points report medians.
pub const SWEEP_DRAWS: u64 = 10;
/// Earliest evolution time of the Rydberg demos, μs.
pub const T_MIN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig3a,
    Fig3b,
    Fig4b,
    Fig4c,
    Fig4d,
    Fig6,
    Fig8,
    Fig10,
    Fig12,
    Fig13,
}

impl Figure {
    pub const ALL: [Figure; 10] = [
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig4b,
        Figure::Fig4c,
        Figure::Fig4d,
        Figure::Fig6,
        Figure::Fig8,
        Figure::Fig10,
        Figure::Fig12,
        Figure::Fig13,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig4b => "fig4b",
            Figure::Fig4c => "fig4c",
            Figure::Fig4d => "fig4d",
            Figure::Fig6 => "fig6",
            Figure::Fig8 => "fig8",
            Figure::Fig10 => "fig10",
            Figure::Fig12 => "fig12",
            Figure::Fig13 => "fig13",
        }
    }

    pub fn parse(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.key() == key)
            .ok_or_else(|| ShadowError::InvalidInput(format!("unknown figure key {key:?}")))
    }

    /// Shot count used when none is given.
    pub fn default_shots(&self) -> usize {
        match self {
            Figure::Fig3a | Figure::Fig3b | Figure::Fig10 | Figure::Fig12 | Figure::Fig13 => 1_000,
            Figure::Fig8 => 0,
            _ => 10_000,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureSeries {
    pub figure: Figure,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Setup and substitutions, one line each.
    pub notes: Vec<String>,
}

impl FigureSeries {
    fn new(figure: Figure, columns: &[&str]) -> Self {
        Self { figure, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column values; text and missing cells are skipped.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|r| match &r[c] {
                Cell::Num(v) => Some(*v),
                Cell::Int(v) => Some(*v as f64),
                Cell::Text(_) => None,
            })
            .collect()
    }

    /// Comma-separated rows with a header; notes are not included.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproduceOptions {
    pub seed: u64,
    /// Overrides the figure's default shot count.
    pub shots: Option<usize>,
}

impl ReproduceOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, shots: None }
    }

    fn shots(&self, figure: Figure) -> Result<usize> {
        let k = self.shots.unwrap_or_else(|| figure.default_shots());
        if k > DESK_MAX_SHOTS {
            return Err(ShadowError::GuardExceeded { what: "desk shot count".into(), size: k as f64, limit: DESK_MAX_SHOTS as f64 });
        }
        Ok(k)
    }
}

pub fn reproduce(figure: Figure, opts: &ReproduceOptions) -> Result<FigureSeries> {
    let k = opts.shots(figure)?;
    let seed = opts.seed;
    match figure {
        Figure::Fig3a => fig3a(4, &[0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0], k, seed),
        Figure::Fig3b => fig3b(&[2, 3, 4, 5], &[0.5, 1.0, 2.0], k, seed),
        Figure::Fig4b => fig4b(&[3, 4, 5], &[5.0, 10.0, 20.0, 40.0], k, seed),
        Figure::Fig4c => fig4c(&[5.0, 10.0, 20.0, 40.0], k, seed),
        Figure::Fig4d => fig4d(&(0..=15).map(|i| 0.2 * i as f64).collect::<Vec<_>>(), k, seed),
        Figure::Fig6 => fig6(3, &[100, 300, 1_000, 3_000, k.max(1)], seed),
        Figure::Fig8 => fig8(&[2, 3, 4, 5], 20.0, seed),
        Figure::Fig10 => fig10(&(0..=24).map(|i| std::f64::consts::PI * i as f64 / 24.0).collect::<Vec<_>>(), k, seed),
        Figure::Fig12 => fig12(&[1, 2, 3, 4, 5], k, seed),
        Figure::Fig13 => fig13(4, &[0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0], k, seed),
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > DESK_MAX_QUBITS {
        return Err(ShadowError::GuardExceeded { what: "desk qubit count".into(), size: n as f64, limit: DESK_MAX_QUBITS as f64 });
    }
    Ok(())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn ghz_state(n: usize) -> Result<(DensityMatrix, Observable)> {
    let psi = ghz_vector(n)?;
    Ok((DensityMatrix::from_pure(&psi)?, Observable::new("fidelity", projector(&psi), 1)?))
}

/// Exact variance, approximation and empirical variance for one `(h, ρ, O)`.
struct VariancePoint {
    exact: f64,
    approx: f64,
    approx_main: f64,
    empirical: f64,
}

fn variance_point(h: SpectralHamiltonian, rho: &DensityMatrix, o: &Observable, k: usize, seed: u64) -> Result<VariancePoint> {
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
    inv.require_invertible()?;
    let empirical = if k >= 2 {
        let set = run_batch(&h, rho, TimeModel::IdealRdu, k, seed)?;
        empirical_variance(&per_snapshot_linear(&inv, &set.snapshots, o)?)?
    } else {
        f64::NAN
    };
    Ok(VariancePoint {
        exact: variance_exact(&inv, o, rho)?,
        approx: variance_approx_linear(&inv, o, ApproxForm::Appendix)?,
        approx_main: variance_approx_linear(&inv, o, ApproxForm::MainText)?,
        empirical,
    })
}

/// Medians over [`SWEEP_DRAWS`] draws of `P` for `V = e^{iPθ}`.
fn exp_family_medians(n: usize, theta: f64, rho: &DensityMatrix, o: &Observable, k: usize, seed: u64) -> Result<[f64; 4]> {
    let d = 1 << n;
    let mut cols: [Vec<f64>; 4] = Default::default();
    for draw in 0..SWEEP_DRAWS {
        let h = exp_family_hamiltonian(d, derive_seed(seed, draw), theta, derive_seed(seed, 1000 + draw))?;
        let p = variance_point(h, rho, o, k, derive_seed(seed, 2000 + draw))?;
        for (c, v) in cols.iter_mut().zip([p.exact, p.approx, p.approx_main, p.empirical]) {
            c.push(v);
        }
    }
    Ok(cols.map(|mut c| median(&mut c)))
}

pub fn fig3a(n: usize, thetas: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    check_qubits(n)?;
    let mut s = FigureSeries::new(
        Figure::Fig3a,
        &["n", "theta", "variance_exact", "approx_f", "approx_f_main_text", "empirical_variance", "shots"],
    );
    s.note(format!("V = e^(iP theta), P GUE; GHZ state; O = X^{n}; medians over {SWEEP_DRAWS} draws of P"));
    s.note("approx_f carries the 1/d prefactor; approx_f_main_text omits it");
    let (rho, _) = ghz_state(n)?;
    let o = Observable::new("X^N", pauli_string(&"X".repeat(n)), 1)?;
    for &theta in thetas {
        let [exact, approx, main, emp] = exp_family_medians(n, theta, &rho, &o, k, seed)?;
        s.push(vec![n.into(), theta.into(), exact.into(), approx.into(), main.into(), emp.into(), k.into()]);
    }
    Ok(s)
}

pub fn fig3b(ns: &[usize], thetas: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(Figure::Fig3b, &["n", "theta", "variance_exact", "approx_f", "empirical_variance", "shots"]);
    s.note(format!("GHZ fidelity; V = e^(iP theta); medians over {SWEEP_DRAWS} draws of P"));
    for &n in ns {
        check_qubits(n)?;
        let (rho, o) = ghz_state(n)?;
        for &theta in thetas {
            let [exact, approx, _, emp] = exp_family_medians(n, theta, &rho, &o, k, seed)?;
            s.push(vec![n.into(), theta.into(), exact.into(), approx.into(), emp.into(), k.into()]);
        }
    }
    Ok(s)
}

fn chain(n: usize, seed: u64, s: &mut FigureSeries) -> Result<(RydbergParams, SpectralHamiltonian)> {
    let (params, attempt) = conditioned_chain(n, seed, LAYOUT_MAX_CONDITION)?;
    let xs: Vec<String> = params.positions.iter().map(|p| format!("{:.4}", p[0])).collect();
    s.note(format!("{n}-atom chain (draw {attempt}): x = [{}] um", xs.join(", ")));
    let h = rydberg_hamiltonian(&params)?;
    Ok((params, h))
}

/// Fidelity of Rydberg-chain GHZ states against the window length `Δt`.
pub fn fig4b(ns: &[usize], windows: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(Figure::Fig4b, &["n", "delta_t", "estimate", "std_error", "exact_mean", "shots"]);
    s.note(format!("Rydberg chain with paper parameters; times uniform on [{T_MIN}, {T_MIN}+delta_t] us; ideal inverter"));
    s.note(format!("layouts redrawn until cond(X_H) <= {LAYOUT_MAX_CONDITION:e}"));
    s.note("exact_mean is the noiseless expectation of the estimator under the finite window");
    for &n in ns {
        check_qubits(n)?;
        let (_, h) = chain(n, derive_seed(seed, n as u64), &mut s)?;
        let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
        let (rho, o) = ghz_state(n)?;
        let b = inv.transformed_observable(o.matrix())?;
        let v = h.eigenbasis();
        let sigma = v.adjoint() * rho.matrix() * v;
        for (w, &dt) in windows.iter().enumerate() {
            let tm = TimeModel::UniformWindow { t_min: T_MIN, t_max: T_MIN + dt };
            let set = run_batch(&h, &rho, tm, k, derive_seed(seed, 100 * n as u64 + w as u64))?;
            let r = mean_report(&per_snapshot_linear(&inv, &set.snapshots, &o)?)?;
            let exact = (&b * finite_time_forward(&h, &sigma, T_MIN, T_MIN + dt)?).trace().re;
            s.push(vec![n.into(), dt.into(), r.value.into(), r.std_error.into(), exact.into(), k.into()]);
        }
    }
    Ok(s)
}

/// `⟨Z₀X₁Z₂⟩` of a six-qubit cluster state with two three-atom patches.
pub fn fig4c(windows: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(Figure::Fig4c, &["delta_t", "estimate", "std_error", "truth", "shots"]);
    s.note("6-qubit open-chain cluster state; two 3-atom patches evolved for one shared time");
    s.note("observable Z X Z on the first patch, identity on the second");
    let (_, h1) = chain(3, derive_seed(seed, 1), &mut s)?;
    let (_, h2) = chain(3, derive_seed(seed, 2), &mut s)?;
    let rho = DensityMatrix::from_pure(&cluster_vector(6)?)?;
    let inv1 = build_inverter(h1.clone(), InverterMode::IdealRdu)?;
    let inv2 = build_inverter(h2.clone(), InverterMode::IdealRdu)?;
    let zxz = pauli_string("ZXZ");
    let truth = rho.expectation(&zxz.kronecker(&ComplexMatrix::identity(8, 8)));
    let factors = [inv1.transformed_observable(&zxz)?, inv2.transformed_observable(&ComplexMatrix::identity(8, 8))?];
    let patches = [h1, h2];
    for (w, &dt) in windows.iter().enumerate() {
        let tm = TimeModel::UniformWindow { t_min: T_MIN, t_max: T_MIN + dt };
        let batch = run_local_batch(&patches, &rho, tm, PatchTiming::Shared, k, derive_seed(seed, 10 + w as u64))?;
        for warning in &batch.warnings {
            s.note(format!("delta_t={dt}: {warning}"));
        }
        let values = (0..k)
            .map(|i| {
                let snaps = [batch.sets[0].snapshots[i].clone(), batch.sets[1].snapshots[i].clone()];
                local_product_value(&[&inv1, &inv2], &factors, &snaps)
            })
            .collect::<Result<Vec<f64>>>()?;
        let r = mean_report(&values)?;
        s.push(vec![dt.into(), r.value.into(), r.std_error.into(), truth.into(), k.into()]);
    }
    Ok(s)
}

/// Lower-leg purity of a three-plus-three Rydberg ladder after evolving for `τ`.
pub fn fig4d(taus: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    const LEG: usize = 3;
    const T_MAX: f64 = 60.0;
    let mut s = FigureSeries::new(Figure::Fig4d, &["tau", "purity_exact", "estimate", "std_error", "shots"]);
    s.note("desk substitution: 12-atom ladder (6+6) -> 6-atom ladder (3+3); purity of the 3-atom lower leg");
    s.note(format!("ladder spacing and leg separation {LADDER_SEPARATION} um; initial |0>^3 (lower) x |1>^3 (upper)"));
    s.note(format!("after evolution the upper leg is traced out and the lower leg is re-measured as a fresh {LEG}-atom random chain; times on [{T_MIN}, {T_MAX}] us; U-statistic"));
    let ladder = RydbergParams::with_positions(ladder_positions(LEG, LADDER_SEPARATION, LADDER_SEPARATION, 0.0, seed)?);
    let h_ladder = rydberg_hamiltonian(&ladder)?;
    let rho0 = prepare_state(&StateSpec::Ladder { n_down: LEG, n_up: LEG })?;
    let (_, h) = chain(LEG, derive_seed(seed, 1), &mut s)?;
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
    let swap = Observable::swap(1 << LEG);
    let keep: Vec<usize> = (0..LEG).collect();
    for (i, &tau) in taus.iter().enumerate() {
        let full = evolve(&h_ladder, tau, &rho0);
        let reduced = DensityMatrix::new(partial_trace(full.matrix(), &[2; 2 * LEG], &keep)?)?;
        let set = run_batch(&h, &reduced, TimeModel::UniformWindow { t_min: T_MIN, t_max: T_MAX }, k, derive_seed(seed, 100 + i as u64))?;
        let r = estimate_nonlinear_snapshots(&inv, &set.snapshots, &swap)?;
        s.push(vec![tau.into(), reduced.purity().into(), r.value.into(), r.std_error.into(), k.into()]);
    }
    Ok(s)
}

/// Running estimates of GHZ fidelity from GUE-quench data, post-processed two ways.
pub fn fig6(n: usize, shot_counts: &[usize], seed: u64) -> Result<FigureSeries> {
    check_qubits(n)?;
    let k_max = shot_counts.iter().copied().max().unwrap_or(0);
    if k_max > DESK_MAX_SHOTS {
        return Err(ShadowError::GuardExceeded { what: "desk shot count".into(), size: k_max as f64, limit: DESK_MAX_SHOTS as f64 });
    }
    let mut s = FigureSeries::new(Figure::Fig6, &["shots", "method", "estimate", "std_error", "truth"]);
    s.note(format!("{n}-qubit GHZ fidelity; one GUE Hamiltonian; ideal random phases; prefixes of one data set"));
    s.note("global-shadow-formula: (d+1) U^dag|b><b|U - I applied to the same quench data");
    let h = crate::models::gue_hamiltonian(1 << n, derive_seed(seed, 1))?;
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
    inv.require_invertible()?;
    let (rho, o) = ghz_state(n)?;
    let set = run_batch(&h, &rho, TimeModel::IdealRdu, k_max, derive_seed(seed, 2))?;
    let right = per_snapshot_linear(&inv, &set.snapshots, &o)?;
    let wrong = wrong_postprocessing_values(&inv, &set.snapshots, &o)?;
    for &kk in shot_counts {
        for (label, values) in [("hamiltonian-shadow", &right), ("global-shadow-formula", &wrong)] {
            let r = mean_report(&values[..kk])?;
            s.push(vec![kk.into(), label.into(), r.value.into(), r.std_error.into(), 1.0.into()]);
        }
    }
    Ok(s)
}

/// Finite-time frame potentials of Rydberg chains against the ideal value.
pub fn fig8(ns: &[usize], window: f64, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(Figure::Fig8, &["n", "k", "frame_potential_finite", "frame_potential_rdu", "log_gap"]);
    s.note(format!("Rydberg chain, paper parameters, window {window} us, k = 1..3"));
    for &n in ns {
        check_qubits(n)?;
        let positions = crate::models::random_positions(n, crate::models::SPACING, crate::models::JITTER, derive_seed(seed, n as u64))?;
        let h = rydberg_hamiltonian(&RydbergParams::with_positions(positions))?;
        let spec = DegeneracySpec::new(h.energies().to_vec());
        for k in 1..=3 {
            let finite = frame_potential_finite_time(&spec, k, T_MIN, T_MIN + window)?;
            let ideal = frame_potential_rdu_exact(k, h.dim())?;
            s.push(vec![n.into(), k.into(), finite.into(), ideal.into(), (finite.ln() - ideal.ln()).into()]);
        }
    }
    Ok(s)
}

/// Single-qubit sweep of `H = cosθ Z + sinθ X` for `O = X + Y + Z`.
pub fn fig10(thetas: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(
        Figure::Fig10,
        &["theta", "complete", "variance_exact", "empirical_variance", "baseline_variance", "shots"],
    );
    s.note("random pure single-qubit state; ideal random phases; baseline is the Haar global shadow (empirical)");
    let rho = prepare_state(&StateSpec::RandomPure { dim: 2, seed: derive_seed(seed, 1) })?;
    let o = Observable::new("X+Y+Z", pauli('X') + pauli('Y') + pauli('Z'), 1)?;
    let baseline = if k >= 2 { empirical_variance(&global_shadow_values(&rho, k, derive_seed(seed, 2), &o)?)? } else { f64::NAN };
    for (i, &theta) in thetas.iter().enumerate() {
        let h = hermitian_spectral(&single_qubit_theta(theta))?;
        let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
        let complete = inv.diagnosis().is_complete();
        let (exact, emp) = if complete {
            let set = run_batch(&h, &rho, TimeModel::IdealRdu, k.max(2), derive_seed(seed, 10 + i as u64))?;
            let emp = empirical_variance(&per_snapshot_linear(&inv, &set.snapshots, &o)?)?;
            (Cell::Num(variance_exact(&inv, &o, &rho)?), Cell::Num(emp))
        } else {
            (Cell::Text("incomplete".into()), Cell::Text("incomplete".into()))
        };
        s.push(vec![theta.into(), complete.into(), exact, emp, baseline.into(), k.into()]);
    }
    Ok(s)
}

fn inverter_values(inv: &ShadowInverter, h: &SpectralHamiltonian, rho: &DensityMatrix, o: &Observable, k: usize, seed: u64) -> Result<Vec<f64>> {
    let set = run_batch(h, rho, TimeModel::IdealRdu, k, seed)?;
    per_snapshot_linear(inv, &set.snapshots, o)
}

/// Hadamard-frame shadow against the global shadow for `X^{⊗N}`.
pub fn fig12(ns: &[usize], k: usize, seed: u64) -> Result<FigureSeries> {
    let mut s = FigureSeries::new(Figure::Fig12, &["n", "method", "variance_exact", "empirical_variance", "bound_3_tr_o2", "shots"]);
    s.note("Hadamard eigenbasis with generic energies, pseudo-inverse on the zero-diagonal part; random pure state");
    s.note("X^N is taken in the Hadamard frame, i.e. the lab observable is V X^N V^dag");
    for &n in ns {
        check_qubits(n)?;
        let d = 1 << n;
        let h = hadamard_hamiltonian(n, derive_seed(seed, n as u64))?;
        let v = h.eigenbasis().clone();
        let inv = build_inverter(h.clone(), InverterMode::PseudoInverse)?;
        let lab = &v * pauli_string(&"X".repeat(n)) * v.adjoint();
        let o = Observable::new("X^N", lab.clone(), 1)?;
        let rho = prepare_state(&StateSpec::RandomPure { dim: d, seed: derive_seed(seed, 100 + n as u64) })?;
        let bound = 3.0 * (&lab * &lab).trace().re;
        let hv = inverter_values(&inv, &h, &rho, &o, k.max(2), derive_seed(seed, 200 + n as u64))?;
        s.push(vec![
            n.into(),
            "hadamard-shadow".into(),
            variance_exact(&inv, &o, &rho)?.into(),
            empirical_variance(&hv)?.into(),
            bound.into(),
            k.into(),
        ]);
        let gv = global_shadow_values(&rho, k.max(2), derive_seed(seed, 300 + n as u64), &o)?;
        s.push(vec![
            n.into(),
            "global-shadow".into(),
            Cell::Text(String::new()),
            empirical_variance(&gv)?.into(),
            bound.into(),
            k.into(),
        ]);
    }
    Ok(s)
}

/// Second moment of the two-snapshot purity estimate against the leading-order form.
pub fn fig13(n: usize, thetas: &[f64], k: usize, seed: u64) -> Result<FigureSeries> {
    check_qubits(n)?;
    let d = 1 << n;
    let mut s = FigureSeries::new(Figure::Fig13, &["n", "theta", "approx_purity", "empirical_second_moment", "shots"]);
    s.note(format!("V = e^(iP theta); GHZ state; medians over {SWEEP_DRAWS} draws of P"));
    s.note("empirical_second_moment averages Tr(rho_i rho_j)^2 over disjoint snapshot pairs");
    let (rho, _) = ghz_state(n)?;
    let swap = Observable::swap(d);
    for &theta in thetas {
        let mut approx = Vec::new();
        let mut emp = Vec::new();
        for draw in 0..SWEEP_DRAWS {
            let h = exp_family_hamiltonian(d, derive_seed(seed, draw), theta, derive_seed(seed, 1000 + draw))?;
            let inv = build_inverter(h.clone(), InverterMode::IdealRdu)?;
            inv.require_invertible()?;
            approx.push(variance_approx_purity(&inv)?);
            let set = run_batch(&h, &rho, TimeModel::IdealRdu, k.max(2), derive_seed(seed, 2000 + draw))?;
            let ests = set.snapshots.iter().map(|sn| inv.build_estimator(sn)).collect::<Result<Vec<_>>>()?;
            let squares: Vec<f64> = ests.chunks_exact(2).map(|p| two_copy_trace(&swap, &p[0], &p[1]).re.powi(2)).collect();
            emp.push(squares.iter().sum::<f64>() / squares.len() as f64);
        }
        s.push(vec![n.into(), theta.into(), median(&mut approx).into(), median(&mut emp).into(), k.into()]);
    }
    Ok(s)
}
