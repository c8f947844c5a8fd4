//! Physics-level diagnostics built on the solvers: how close a steady state
//! is to thermal, effective mode temperatures, and the condition for an
//! empty system to stay empty under continuous resetting.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{build_custom, diagonalize, Partition, QuadraticModel, Spectra};
use crate::reset::{build_map, ResetMode, ResetProtocol, StroboscopicMap};
use crate::state::{self, Spdm};
use crate::steadystate::{
    continuous_generator, fixed_point_continuous, fixed_point_discrete, map_spectrum, Classification, SolverConfig,
};

/// Energies below this are treated as zero when inverting the Fermi function.
pub const ZERO_ENERGY_TOL: f64 = 1e-12;
/// Occupation·coupling products below this do not count as violations.
pub const VIOLATION_TOL: f64 = 1e-12;
/// Residual below which the infinite-temperature identity is taken to hold.
pub const INFINITE_TEMPERATURE_TOL: f64 = 1e-10;

/// `max_{α,β,γ,δ∈S} |Σ_n ψ*_{nα} ψ_{nβ} ψ_{nγ} ψ*_{nδ}|`
///
/// Small values mean the long-time system state forgets its initial
/// condition. The value depends on the basis chosen inside degenerate
/// eigenspaces, so it is only meaningful for the basis `diagonalize`
/// produces (symmetry-adapted when the model carries a symmetry).
pub fn pseudo_thermal_metric(spectra: &Spectra, system: &[usize]) -> Result<f64> {
    let n = spectra.len();
    if system.is_empty() {
        return Err(Error::invalid("system index set is empty"));
    }
    if let Some(&bad) = system.iter().find(|&&a| a >= n) {
        return Err(Error::invalid(format!("site {bad} out of range for {n} sites")));
    }
    let psi = spectra.modes();
    let s = system.len();
    // pair[(a, b)][n] = ψ*_{nα} ψ_{nβ}; the metric is max |Σ_n pair(α,β)_n conj(pair(δ,γ)_n)|
    let pairs: Vec<Vec<Complex64>> = (0..s * s)
        .map(|ab| {
            let (a, b) = (system[ab / s], system[ab % s]);
            (0..n).map(|k| psi[(k, a)].conj() * psi[(k, b)]).collect()
        })
        .collect();
    let mut best = 0.0f64;
    for x in &pairs {
        for y in &pairs {
            let v: Complex64 = x.iter().zip(y).map(|(p, q)| p * q.conj()).sum();
            best = best.max(v.norm());
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct ThermalityReport {
    pub diag_sum: f64,
    pub offdiag_sum: f64,
    /// Effective inverse temperature per system mode; `None` where undefined.
    pub betas: Vec<Option<f64>>,
}

impl ThermalityReport {
    pub fn defined_betas(&self) -> impl Iterator<Item = f64> + '_ {
        self.betas.iter().flatten().copied()
    }

    pub fn mean_beta(&self) -> Option<f64> {
        let (sum, count) = self.defined_betas().fold((0.0, 0usize), |(s, c), b| (s + b, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// `max β_α − min β_α` over the defined entries.
    pub fn beta_spread(&self) -> Option<f64> {
        let mut it = self.defined_betas();
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), b| (lo.min(b), hi.max(b)));
        Some(hi - lo)
    }
}

/// Inverse temperature reproducing occupation `n` at energy `e`, if any.
pub fn effective_beta(occupation: f64, energy: f64) -> Option<f64> {
    if !(occupation > 0.0 && occupation < 1.0) || energy.abs() < ZERO_ENERGY_TOL {
        return None;
    }
    let beta = (1.0 / occupation - 1.0).ln() / energy;
    beta.is_finite().then_some(beta)
}

/// Compare a system block against the eigenbasis of the system Hamiltonian.
pub fn thermality_report(rho_system: &Spdm, system_spectra: &Spectra) -> Result<ThermalityReport> {
    let tilde = state::to_eigenbasis(rho_system, system_spectra)?;
    let t = tilde.matrix();
    let s = t.nrows();
    let mut diag_sum = 0.0;
    let mut offdiag_sum = 0.0;
    for a in 0..s {
        for b in 0..s {
            if a == b {
                diag_sum += t[(a, a)].norm();
            } else {
                offdiag_sum += t[(a, b)].norm();
            }
        }
    }
    let betas = (0..s).map(|a| effective_beta(t[(a, a)].re, system_spectra.energies()[a])).collect();
    Ok(ThermalityReport { diag_sum, offdiag_sum, betas })
}

/// Environment-system pairs `(α_E, β_S)` with `|n_{α_E} M_{β_S α_E}| > 1e-12`.
///
/// `env_occupations` follows the order of `partition.environment()`, and the
/// model must be written in the basis where the environment reset state is
/// diagonal. An empty result means the empty system is a fixed point of the
/// continuous evolving-correlations dynamics.
pub fn qubit_init_check(
    model: &QuadraticModel,
    partition: &Partition,
    env_occupations: &[f64],
) -> Result<Vec<(usize, usize)>> {
    let env = partition.environment();
    if model.n_sites() != partition.n_sites() {
        return Err(Error::invalid("model and partition sizes differ"));
    }
    if env_occupations.len() != env.len() {
        return Err(Error::invalid(format!(
            "expected {} environment occupations, got {}",
            env.len(),
            env_occupations.len()
        )));
    }
    if let Some(bad) = env_occupations.iter().find(|n| !(0.0..=1.0).contains(*n)) {
        return Err(Error::invalid(format!("occupation {bad} outside [0, 1]")));
    }
    let m = model.coupling();
    let mut violations = Vec::new();
    for (&alpha, &occ) in env.iter().zip(env_occupations) {
        for &beta in partition.system() {
            if (m[(beta, alpha)] * occ).norm() > VIOLATION_TOL {
                violations.push((alpha, beta));
            }
        }
    }
    Ok(violations)
}

/// EC protocol resetting the environment to `diag(env_occupations)`.
pub fn occupation_protocol(partition: &Partition, env_occupations: &[f64], period: f64) -> Result<ResetProtocol> {
    let k = env_occupations.len();
    let block = CMat::from_fn(k, k, |i, j| Complex64::new(if i == j { env_occupations[i] } else { 0.0 }, 0.0));
    ResetProtocol::with_env_block(partition, ResetMode::EvolvingCorrelations, &block, period)
}

/// A model rewritten in the eigenbasis of a (possibly non-diagonal)
/// environment reset block.
#[derive(Clone, Debug)]
pub struct EnvironmentBasis {
    pub model: QuadraticModel,
    pub occupations: Vec<f64>,
    /// Columns are the eigenvectors of the reset block, in environment order.
    pub rotation: CMat,
    /// Largest off-diagonal magnitude of the original block.
    pub off_diagonal: f64,
}

/// Diagonalise the environment reset block `B = V diag(n) V†` and rotate the
/// environment modes so that `B` becomes `diag(n)`. The coupling transforms
/// as `M → Wᵀ M W*` with `W = 1 ⊕ V` (system sites untouched).
pub fn to_environment_basis(model: &QuadraticModel, partition: &Partition, block: &CMat) -> Result<EnvironmentBasis> {
    let env = partition.environment();
    let k = env.len();
    if block.nrows() != k || block.ncols() != k {
        return Err(Error::invalid(format!("environment block must be {k}x{k}")));
    }
    if model.n_sites() != partition.n_sites() {
        return Err(Error::invalid("model and partition sizes differ"));
    }
    if linalg::hermiticity_defect(block.as_ref()) > state::SPDM_HERMITIAN_TOL {
        return Err(Error::invalid("environment block is not Hermitian"));
    }
    let mut off_diagonal = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                off_diagonal = off_diagonal.max(block[(i, j)].norm());
            }
        }
    }
    let (occupations, rotation) = linalg::hermitian_eigen(linalg::hermitian_part(block.as_ref()).as_ref())?;
    if let Some(bad) = occupations.iter().find(|&&x| !(-1e-9..=1.0 + 1e-9).contains(&x)) {
        return Err(Error::invalid(format!("environment block has occupation {bad} outside [0, 1]")));
    }
    let occupations = occupations.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let n = model.n_sites();
    let mut w = CMat::identity(n, n);
    for (i, &a) in env.iter().enumerate() {
        for (j, &b) in env.iter().enumerate() {
            w[(a, b)] = rotation[(i, j)];
        }
    }
    let rotated = w.transpose() * model.coupling() * linalg::conj(w.as_ref());
    let model = build_custom(linalg::hermitian_part(rotated.as_ref()), model.statistics())?;
    Ok(EnvironmentBasis { model, occupations, rotation, off_diagonal })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InfiniteTemperatureCheck {
    pub holds: bool,
    pub residual: f64,
}

/// `‖D V½ + C − V½‖∞` with `V½_i = ½ δ_{α_i β_i}`.
pub fn verify_infinite_temperature(map: &StroboscopicMap) -> InfiniteTemperatureCheck {
    let half = CVec::from_fn(map.dim(), |i| {
        let (a, b) = map.index().pairs()[i];
        Complex64::new(if a == b { 0.5 } else { 0.0 }, 0.0)
    });
    let image = map.d() * &half + map.c();
    let residual = linalg::max_abs_diff_col(&image, &half);
    InfiniteTemperatureCheck { holds: residual <= INFINITE_TEMPERATURE_TOL, residual }
}

/// Outcome of solving for the long-time state of one protocol.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub classification: Classification,
    /// `max |λ|` for a period `τ > 0`, `max Re σ` in the continuous limit.
    pub stability_margin: f64,
    pub continuous: bool,
    pub rho: Spdm,
    pub residual: f64,
    pub kernel_dim: usize,
}

/// Steady state of `model` under `protocol`; a zero period selects the
/// continuous-limit solver.
pub fn steady_state(model: &QuadraticModel, protocol: &ResetProtocol, cfg: &SolverConfig) -> Result<SteadyState> {
    if protocol.period() == 0.0 {
        let gen = continuous_generator(model, protocol)?;
        let spectrum = map_spectrum(&gen, cfg)?;
        let fp = fixed_point_continuous(&gen, cfg)?;
        Ok(SteadyState {
            classification: spectrum.classification,
            stability_margin: spectrum.max_re_sigma(),
            continuous: true,
            rho: gen.unpack(&fp.vector)?,
            residual: fp.residual,
            kernel_dim: fp.kernel_dim,
        })
    } else {
        let map = build_map(model, protocol)?;
        let fp = fixed_point_discrete(&map, cfg)?;
        Ok(SteadyState {
            classification: fp.spectrum.classification,
            stability_margin: fp.spectrum.max_abs_lambda(),
            continuous: false,
            rho: map.unpack(&fp.vector)?,
            residual: fp.residual,
            kernel_dim: 0,
        })
    }
}

/// One `(β, mode)` point of a thermalisation sweep.
#[derive(Clone, Debug)]
pub struct ThermalisationPoint {
    pub beta_env: f64,
    pub mode: ResetMode,
    pub classification: Option<Classification>,
    pub report: Option<ThermalityReport>,
    /// Machine-readable error code when no steady state could be produced.
    pub failure: Option<&'static str>,
}

/// Reset the environment to its thermal state at `beta_env`, solve for the
/// steady state and compare the system block against the system Hamiltonian.
pub fn thermalisation_point(
    model: &QuadraticModel,
    partition: &Partition,
    mode: ResetMode,
    beta_env: f64,
    period: f64,
    cfg: &SolverConfig,
) -> Result<ThermalisationPoint> {
    let protocol = ResetProtocol::thermal(model, partition, mode, beta_env, period)?;
    let system_spectra = diagonalize(&model.restrict(partition.system())?)?;
    match steady_state(model, &protocol, cfg) {
        Ok(ss) => {
            let block = state::restrict(&ss.rho, partition.system())?;
            Ok(ThermalisationPoint {
                beta_env,
                mode,
                classification: Some(ss.classification),
                report: Some(thermality_report(&block, &system_spectra)?),
                failure: None,
            })
        }
        Err(e @ (Error::InvalidArgument(_) | Error::ResourceLimit(_))) => Err(e),
        Err(e) => {
            log::warn!("no steady state at beta {beta_env} ({}): {e}", mode.label());
            let classification = match &e {
                Error::SingularMap { .. } => Some(Classification::Marginal),
                _ => None,
            };
            Ok(ThermalisationPoint { beta_env, mode, classification, report: None, failure: Some(e.code()) })
        }
    }
}
