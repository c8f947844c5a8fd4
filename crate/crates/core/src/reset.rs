//! Periodically reset environments and the stroboscopic affine map
//! `V[n+1] = D V[n] + C` on the entries of ρ that are not reset.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::{diagonalize, evolution_operator, Partition, QuadraticModel, Spectra};
use crate::state::{self, Spdm};

/// Tolerance on fermionic admissibility of a fully reset block.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResetMode {
    /// Everything except the system-system block is reset; cross blocks go to zero.
    #[serde(rename = "RI")]
    RepeatedInteractions,
    /// Only the environment-environment block is reset.
    #[serde(rename = "EC")]
    EvolvingCorrelations,
}

impl ResetMode {
    pub fn label(self) -> &'static str {
        match self {
            ResetMode::RepeatedInteractions => "RI",
            ResetMode::EvolvingCorrelations => "EC",
        }
    }
}

impl std::str::FromStr for ResetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RI" | "ri" => Ok(ResetMode::RepeatedInteractions),
            "EC" | "ec" => Ok(ResetMode::EvolvingCorrelations),
            other => Err(Error::invalid(format!("unknown reset mode {other:?} (expected RI or EC)"))),
        }
    }
}

/// Pairs of indices reset by `mode`, in row-major order.
pub fn reset_set(partition: &Partition, mode: ResetMode) -> Vec<(usize, usize)> {
    let n = partition.n_sites();
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let keep = match mode {
                ResetMode::RepeatedInteractions => partition.is_system(a) && partition.is_system(b),
                ResetMode::EvolvingCorrelations => partition.is_system(a) || partition.is_system(b),
            };
            if !keep {
                out.push((a, b));
            }
        }
    }
    out
}

/// Reset values for an environment thermalised at `beta`.
///
/// The environment block is the thermal state of the decoupled environment
/// Hamiltonian `M|E×E`; in RI mode the system-environment blocks are zero.
pub fn reset_values_thermal(
    model: &QuadraticModel,
    partition: &Partition,
    beta: f64,
    mode: ResetMode,
) -> Result<BTreeMap<(usize, usize), Complex64>> {
    let env = partition.environment();
    let env_spectra = diagonalize(&model.restrict(env)?)?;
    let block = state::thermal_spdm(&env_spectra, beta);
    Ok(fill_reset_values(partition, mode, |i, j| block.get(i, j)))
}

/// Reset values with the environment set to `occupation·δ` (½ is infinite temperature).
pub fn reset_values_uniform(
    partition: &Partition,
    mode: ResetMode,
    occupation: f64,
) -> BTreeMap<(usize, usize), Complex64> {
    fill_reset_values(
        partition,
        mode,
        |i, j| {
            if i == j {
                Complex64::new(occupation, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        },
    )
}

/// `env_block(i, j)` is indexed by position within the environment list.
fn fill_reset_values(
    partition: &Partition,
    mode: ResetMode,
    env_block: impl Fn(usize, usize) -> Complex64,
) -> BTreeMap<(usize, usize), Complex64> {
    let n = partition.n_sites();
    let mut env_pos = vec![usize::MAX; n];
    for (k, &e) in partition.environment().iter().enumerate() {
        env_pos[e] = k;
    }
    reset_set(partition, mode)
        .into_iter()
        .map(|(a, b)| {
            let v = if partition.is_system(a) || partition.is_system(b) {
                Complex64::new(0.0, 0.0)
            } else {
                env_block(env_pos[a], env_pos[b])
            };
            ((a, b), v)
        })
        .collect()
}

/// Which entries of ρ are reset, what they are reset to, and how often.
#[derive(Clone, Debug)]
pub struct ResetProtocol {
    n_sites: usize,
    values: BTreeMap<(usize, usize), Complex64>,
    period: f64,
}

impl ResetProtocol {
    /// Checks index ranges, Hermitian closure of the reset set and, where the
    /// reset set contains a full diagonal block, fermionic admissibility of it.
    pub fn new(n_sites: usize, values: BTreeMap<(usize, usize), Complex64>, period: f64) -> Result<Self> {
        if !(period.is_finite() && period >= 0.0) {
            return Err(Error::invalid(format!("reset period must be finite and nonnegative, got {period}")));
        }
        for (&(a, b), &v) in &values {
            if a >= n_sites || b >= n_sites {
                return Err(Error::invalid(format!("reset pair ({a}, {b}) out of range for {n_sites} sites")));
            }
            match values.get(&(b, a)) {
                None => {
                    return Err(Error::invalid(format!("reset set contains ({a}, {b}) but not ({b}, {a})")));
                }
                Some(w) if (v - w.conj()).norm() > 1e-12 * (1.0 + v.norm()) => {
                    return Err(Error::invalid(format!("reset values at ({a}, {b}) and ({b}, {a}) are not conjugate")));
                }
                _ => {}
            }
        }
        let protocol = ResetProtocol { n_sites, values, period };
        protocol.check_admissible()?;
        Ok(protocol)
    }

    pub fn thermal(
        model: &QuadraticModel,
        partition: &Partition,
        mode: ResetMode,
        beta: f64,
        period: f64,
    ) -> Result<Self> {
        let values = reset_values_thermal(model, partition, beta, mode)?;
        ResetProtocol::new(partition.n_sites(), values, period)
    }

    pub fn uniform(partition: &Partition, mode: ResetMode, occupation: f64, period: f64) -> Result<Self> {
        ResetProtocol::new(partition.n_sites(), reset_values_uniform(partition, mode, occupation), period)
    }

    /// Environment reset to an arbitrary Hermitian block, indexed in the
    /// order of `partition.environment()`.
    pub fn with_env_block(partition: &Partition, mode: ResetMode, block: &CMat, period: f64) -> Result<Self> {
        let k = partition.environment().len();
        if block.nrows() != k || block.ncols() != k {
            return Err(Error::invalid(format!("environment block must be {k}x{k}")));
        }
        let values = fill_reset_values(partition, mode, |i, j| block[(i, j)]);
        ResetProtocol::new(partition.n_sites(), values, period)
    }

    /// No entries are reset: plain unitary dynamics sampled every `period`.
    pub fn unitary(n_sites: usize, period: f64) -> Result<Self> {
        ResetProtocol::new(n_sites, BTreeMap::new(), period)
    }

    fn check_admissible(&self) -> Result<()> {
        let diag: Vec<usize> = (0..self.n_sites).filter(|&a| self.values.contains_key(&(a, a))).collect();
        let full_block = diag.iter().all(|&a| diag.iter().all(|&b| self.values.contains_key(&(a, b))));
        if !full_block {
            log::warn!("reset set has no full diagonal block; fermionic admissibility not checked");
            return Ok(());
        }
        if diag.is_empty() {
            return Ok(());
        }
        let k = diag.len();
        let block = CMat::from_fn(k, k, |i, j| self.values[&(diag[i], diag[j])]);
        let (occ, _) = linalg::hermitian_eigen(block.as_ref())?;
        if let Some(bad) = occ.iter().find(|&&x| !(-ADMISSIBILITY_TOL..=1.0 + ADMISSIBILITY_TOL).contains(&x)) {
            return Err(Error::invalid(format!("reset block has occupation {bad} outside [0, 1]")));
        }
        let outside_nonzero =
            self.values.iter().any(|(&(a, b), v)| !(diag.contains(&a) && diag.contains(&b)) && v.norm() != 0.0);
        if outside_nonzero {
            log::warn!("reset set extends beyond its diagonal block; admissibility checked on the block only");
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period.is_finite() && period >= 0.0) {
            return Err(Error::invalid(format!("reset period must be finite and nonnegative, got {period}")));
        }
        self.period = period;
        Ok(self)
    }

    pub fn values(&self) -> &BTreeMap<(usize, usize), Complex64> {
        &self.values
    }

    pub fn is_reset(&self, a: usize, b: usize) -> bool {
        self.values.contains_key(&(a, b))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ρ⁰` on the reset set, zero elsewhere.
    pub fn reset_matrix(&self) -> CMat {
        let mut r = CMat::zeros(self.n_sites, self.n_sites);
        for (&(a, b), &v) in &self.values {
            r[(a, b)] = v;
        }
        r
    }

    /// Overwrite the reset entries of `rho` in place.
    pub fn apply(&self, rho: &mut CMat) {
        for (&(a, b), &v) in &self.values {
            rho[(a, b)] = v;
        }
    }
}

/// Enumeration `i ↔ (α_i, β_i)` of the entries carried in the state vector.
#[derive(Clone, Debug)]
pub struct PairIndex {
    n_sites: usize,
    pairs: Vec<(usize, usize)>,
    position: Vec<Option<usize>>,
}

impl PairIndex {
    /// All pairs not reset by `protocol`, row-major.
    pub fn complement_of(protocol: &ResetProtocol) -> PairIndex {
        let n = protocol.n_sites();
        let pairs =
            (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|&(a, b)| !protocol.is_reset(a, b)).collect();
        PairIndex::from_pairs_unchecked(n, pairs)
    }

    /// Arbitrary ordering of the same pairs (used to check order independence).
    pub fn from_pairs(n_sites: usize, pairs: Vec<(usize, usize)>) -> Result<PairIndex> {
        let mut seen = vec![false; n_sites * n_sites];
        for &(a, b) in &pairs {
            if a >= n_sites || b >= n_sites {
                return Err(Error::invalid(format!("pair ({a}, {b}) out of range")));
            }
            if std::mem::replace(&mut seen[a * n_sites + b], true) {
                return Err(Error::invalid(format!("pair ({a}, {b}) listed twice")));
            }
        }
        Ok(PairIndex::from_pairs_unchecked(n_sites, pairs))
    }

    fn from_pairs_unchecked(n_sites: usize, pairs: Vec<(usize, usize)>) -> PairIndex {
        let mut position = vec![None; n_sites * n_sites];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            position[a * n_sites + b] = Some(i);
        }
        PairIndex { n_sites, pairs, position }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn position(&self, a: usize, b: usize) -> Option<usize> {
        self.position[a * self.n_sites + b]
    }

    /// Index `i*` of the transposed pair `(β_i, α_i)`, if carried.
    pub fn partner(&self, i: usize) -> Option<usize> {
        let (a, b) = self.pairs[i];
        self.position(b, a)
    }

    /// `V_i = ρ_{α_i β_i}`.
    pub fn pack(&self, rho: &CMat) -> Result<CVec> {
        if rho.nrows() != self.n_sites || rho.ncols() != self.n_sites {
            return Err(Error::invalid("matrix dimension does not match pair enumeration"));
        }
        Ok(CVec::from_fn(self.len(), |i| {
            let (a, b) = self.pairs[i];
            rho[(a, b)]
        }))
    }

    /// Full ρ from the carried entries plus the protocol's reset values.
    pub fn unpack(&self, v: &CVec, protocol: &ResetProtocol) -> Result<CMat> {
        if v.nrows() != self.len() {
            return Err(Error::invalid(format!("state vector has length {}, expected {}", v.nrows(), self.len())));
        }
        let mut rho = protocol.reset_matrix();
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            rho[(a, b)] = v[i];
        }
        Ok(rho)
    }
}

/// One period of unitary evolution followed by the reset, as an affine map
/// on the non-reset entries.
#[derive(Clone, Debug)]
pub struct StroboscopicMap {
    index: PairIndex,
    protocol: ResetProtocol,
    unitary: CMat,
    d: CMat,
    c: CVec,
}

impl StroboscopicMap {
    pub fn index(&self) -> &PairIndex {
        &self.index
    }

    pub fn protocol(&self) -> &ResetProtocol {
        &self.protocol
    }

    /// `U(τ)`
    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    /// `D_ij = U*_{α_i α_j}(τ) U_{β_i β_j}(τ)`
    pub fn d(&self) -> &CMat {
        &self.d
    }

    /// `C_i = Σ_{(α',β')∈R} U*_{α_i α'}(τ) U_{β_i β'}(τ) ρ⁰_{α'β'}`
    pub fn c(&self) -> &CVec {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn pack(&self, rho: &CMat) -> Result<CVec> {
        self.index.pack(rho)
    }

    pub fn unpack(&self, v: &CVec) -> Result<Spdm> {
        Ok(Spdm::from_raw(self.index.unpack(v, &self.protocol)?))
    }
}

pub fn build_map(model: &QuadraticModel, protocol: &ResetProtocol) -> Result<StroboscopicMap> {
    let spectra = diagonalize(model)?;
    build_map_from_spectra(&spectra, protocol)
}

pub fn build_map_from_spectra(spectra: &Spectra, protocol: &ResetProtocol) -> Result<StroboscopicMap> {
    build_map_with_index(spectra, protocol, PairIndex::complement_of(protocol))
}

/// Like [`build_map_from_spectra`] with a caller-chosen enumeration of the
/// non-reset pairs.
pub fn build_map_with_index(spectra: &Spectra, protocol: &ResetProtocol, index: PairIndex) -> Result<StroboscopicMap> {
    let n = spectra.len();
    if protocol.n_sites() != n || index.n_sites() != n {
        return Err(Error::invalid("protocol, enumeration and model sizes differ"));
    }
    if index.len() + protocol.len() != n * n || index.pairs().iter().any(|&(a, b)| protocol.is_reset(a, b)) {
        return Err(Error::invalid("pair enumeration must cover exactly the non-reset entries"));
    }
    let tau = protocol.period();
    if tau <= 0.0 {
        return Err(Error::invalid(format!(
            "stroboscopic map needs a positive period (got {tau}); use the continuous generator for τ = 0"
        )));
    }
    let unitary = evolution_operator(spectra, tau);
    let uc = linalg::conj(unitary.as_ref());
    let pairs = index.pairs();
    let k = pairs.len();
    let d = CMat::from_fn(k, k, |i, j| {
        let (ai, bi) = pairs[i];
        let (aj, bj) = pairs[j];
        uc[(ai, aj)] * unitary[(bi, bj)]
    });
    // C_i = (U* R Uᵀ)_{α_i β_i} with R the reset values
    let full = &uc * protocol.reset_matrix() * unitary.transpose();
    let c = CVec::from_fn(k, |i| {
        let (a, b) = pairs[i];
        full[(a, b)]
    });
    Ok(StroboscopicMap { index, protocol: protocol.clone(), unitary, d, c })
}

/// `V' = D V + C`
pub fn step(map: &StroboscopicMap, v: &CVec) -> Result<CVec> {
    if v.nrows() != map.dim() {
        return Err(Error::invalid(format!("state vector has length {}, expected {}", v.nrows(), map.dim())));
    }
    Ok(map.d() * v + map.c())
}

/// Stroboscopic trajectory `ρ(0), ρ(τ), …, ρ(n τ)` by alternating unitary
/// evolution over one period with the reset.
pub fn simulate(model: &QuadraticModel, protocol: &ResetProtocol, rho0: &Spdm, n_steps: usize) -> Result<Vec<Spdm>> {
    if rho0.n_sites() != model.n_sites() || protocol.n_sites() != model.n_sites() {
        return Err(Error::invalid("model, protocol and initial state sizes differ"));
    }
    let spectra = diagonalize(model)?;
    let u = evolution_operator(&spectra, protocol.period());
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(rho0.clone());
    let mut current = rho0.clone();
    for _ in 0..n_steps {
        let mut next = state::evolve(&current, &u)?.into_matrix();
        protocol.apply(&mut next);
        current = Spdm::from_raw(next);
        out.push(current.clone());
    }
    Ok(out)
}
