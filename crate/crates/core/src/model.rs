//! Quadratic Hamiltonians `H = Σ a†_α M_αβ a_β`, their single-particle
//! spectra and exact evolution operators.
//!
//! Units: ħ = 1, energies in units of the hopping J, times in ħ/J.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Relative tolerance for accepting a user-supplied coupling matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    #[serde(alias = "Fermionic")]
    Fermionic,
    #[serde(alias = "Bosonic")]
    Bosonic,
}

/// A number-conserving quadratic model on `n_sites` single-particle modes.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    coupling: CMat,
    statistics: Statistics,
    /// Hermitian operator commuting with the coupling matrix. When present,
    /// degenerate eigenspaces are resolved in its eigenbasis.
    symmetry: Option<CMat>,
}

impl QuadraticModel {
    pub fn n_sites(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn symmetry(&self) -> Option<&CMat> {
        self.symmetry.as_ref()
    }

    /// Attach a Hermitian operator that commutes with `M`, used to pick a
    /// definite basis inside degenerate eigenspaces.
    pub fn with_symmetry(mut self, generator: CMat) -> Result<Self> {
        let n = self.n_sites();
        if generator.nrows() != n || generator.ncols() != n {
            return Err(Error::invalid("symmetry generator has wrong dimension"));
        }
        let scale = linalg::max_abs(generator.as_ref()).max(1.0);
        if linalg::hermiticity_defect(generator.as_ref()) > HERMITIAN_TOL * scale {
            return Err(Error::invalid("symmetry generator is not Hermitian"));
        }
        let comm = &self.coupling * &generator - &generator * &self.coupling;
        let mscale = linalg::max_abs(self.coupling.as_ref()).max(1.0);
        if linalg::max_abs(comm.as_ref()) > 1e-10 * scale * mscale {
            return Err(Error::invalid("symmetry generator does not commute with the coupling matrix"));
        }
        self.symmetry = Some(generator);
        Ok(self)
    }

    /// Principal sub-model on `indices` (e.g. the decoupled system or
    /// environment Hamiltonian). The symmetry is dropped.
    pub fn restrict(&self, indices: &[usize]) -> Result<QuadraticModel> {
        let n = self.n_sites();
        if indices.is_empty() {
            return Err(Error::invalid("cannot restrict to an empty index set"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::invalid(format!("index {bad} out of range for {n} sites")));
        }
        let k = indices.len();
        let coupling = CMat::from_fn(k, k, |i, j| self.coupling[(indices[i], indices[j])]);
        Ok(QuadraticModel { coupling, statistics: self.statistics, symmetry: None })
    }
}

/// Periodic hopping ring `H = -J Σ_ℓ (a†_ℓ a_{ℓ+1} + h.c.)`.
///
/// The model carries the lattice-momentum generator `(T - T†)/2i` so that
/// degenerate `±k` pairs diagonalise to plane waves.
pub fn build_ring(n: usize, hopping: f64) -> Result<QuadraticModel> {
    if n < 3 {
        return Err(Error::invalid(format!("ring needs at least 3 sites, got {n}")));
    }
    if !hopping.is_finite() {
        return Err(Error::invalid("hopping must be finite"));
    }
    let mut m = CMat::zeros(n, n);
    let mut g = CMat::zeros(n, n);
    let half_i = Complex64::new(0.0, 0.5);
    for l in 0..n {
        let r = (l + 1) % n;
        m[(l, r)] = Complex64::new(-hopping, 0.0);
        m[(r, l)] = Complex64::new(-hopping, 0.0);
        // T_{l,l+1} = 1, so (T - T†)/2i has -i/2 above and +i/2 below.
        g[(l, r)] = -half_i;
        g[(r, l)] = half_i;
    }
    Ok(QuadraticModel { coupling: m, statistics: Statistics::Fermionic, symmetry: Some(g) })
}

/// Open chain with uniform hopping and per-site energies.
pub fn build_open_chain(onsite: &[f64], hopping: f64) -> Result<QuadraticModel> {
    let n = onsite.len();
    if n == 0 {
        return Err(Error::invalid("chain needs at least one site"));
    }
    if !hopping.is_finite() || onsite.iter().any(|e| !e.is_finite()) {
        return Err(Error::invalid("chain parameters must be finite"));
    }
    let mut m = CMat::zeros(n, n);
    for (l, &e) in onsite.iter().enumerate() {
        m[(l, l)] = Complex64::new(e, 0.0);
        if l + 1 < n {
            m[(l, l + 1)] = Complex64::new(-hopping, 0.0);
            m[(l + 1, l)] = Complex64::new(-hopping, 0.0);
        }
    }
    Ok(QuadraticModel { coupling: m, statistics: Statistics::Fermionic, symmetry: None })
}

/// Random Hermitian coupling with real and imaginary parts of `A` drawn
/// uniformly from `[-1, 1]`, symmetrised as `(A + A†)/2`. Reproducible for a
/// given seed.
pub fn build_random(n: usize, seed: u64) -> Result<QuadraticModel> {
    if n == 0 {
        return Err(Error::invalid("random model needs at least one site"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    build_custom(linalg::hermitian_part(a.as_ref()), Statistics::Fermionic)
}

/// Validate an arbitrary coupling matrix. Small anti-Hermitian noise within
/// tolerance is projected away.
pub fn build_custom(coupling: CMat, statistics: Statistics) -> Result<QuadraticModel> {
    let n = coupling.nrows();
    if n == 0 || coupling.ncols() != n {
        return Err(Error::invalid(format!(
            "coupling matrix must be square and nonempty, got {}x{}",
            coupling.nrows(),
            coupling.ncols()
        )));
    }
    for j in 0..n {
        for i in 0..n {
            let z = coupling[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::invalid(format!("non-finite coupling at ({i}, {j})")));
            }
        }
    }
    let scale = linalg::max_abs(coupling.as_ref());
    let defect = linalg::hermiticity_defect(coupling.as_ref());
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::invalid(format!("coupling matrix is not Hermitian (max |M - M†| = {defect:e})")));
    }
    Ok(QuadraticModel { coupling: linalg::hermitian_part(coupling.as_ref()), statistics, symmetry: None })
}

/// Split of the lattice into a system `S` and its environment `E`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    n_sites: usize,
    system: Vec<usize>,
    environment: Vec<usize>,
    in_system: Vec<bool>,
}

impl Partition {
    /// The environment is the complement of `system`. Both must be nonempty.
    pub fn new(n_sites: usize, system: &[usize]) -> Result<Partition> {
        let mut in_system = vec![false; n_sites];
        for &i in system {
            if i >= n_sites {
                return Err(Error::invalid(format!("system index {i} out of range for {n_sites} sites")));
            }
            if in_system[i] {
                return Err(Error::invalid(format!("system index {i} repeated")));
            }
            in_system[i] = true;
        }
        let environment: Vec<usize> = (0..n_sites).filter(|&i| !in_system[i]).collect();
        if system.is_empty() || environment.is_empty() {
            return Err(Error::invalid("system and environment must both be nonempty"));
        }
        Ok(Partition { n_sites, system: system.to_vec(), environment, in_system })
    }

    /// `len` consecutive sites starting at `start`, wrapping around.
    pub fn segment(n_sites: usize, start: usize, len: usize) -> Result<Partition> {
        if n_sites == 0 {
            return Err(Error::invalid("empty lattice"));
        }
        let system: Vec<usize> = (0..len).map(|k| (start + k) % n_sites).collect();
        Partition::new(n_sites, &system)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn system(&self) -> &[usize] {
        &self.system
    }

    pub fn environment(&self) -> &[usize] {
        &self.environment
    }

    pub fn is_system(&self, site: usize) -> bool {
        self.in_system[site]
    }
}

/// Single-particle energies and modes. Row `n` of `modes` is the
/// eigenvector `ψ_n`, so `Σ_β M_αβ ψ_nβ = ε_n ψ_nα`.
#[derive(Clone, Debug)]
pub struct Spectra {
    energies: Vec<f64>,
    modes: CMat,
}

impl Spectra {
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `ψ_{nα}` with mode index `n` on rows.
    pub fn modes(&self) -> &CMat {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |acc, e| acc.max(e.abs()))
    }

    /// `Σ_n ε_n ψ_n ψ_n†`, which equals the coupling matrix.
    pub fn reconstruct(&self) -> CMat {
        let n = self.len();
        let psi = &self.modes;
        let scaled = CMat::from_fn(n, n, |alpha, k| psi[(k, alpha)] * self.energies[k]);
        scaled * psi.conjugate()
    }

    /// Largest entry of `M ψ_n − ε_n ψ_n` over all modes.
    pub fn eigen_residual(&self, model: &QuadraticModel) -> f64 {
        let psi_cols = self.modes.transpose().to_owned();
        let applied = model.coupling() * &psi_cols;
        let n = self.len();
        let mut out = 0.0f64;
        for k in 0..n {
            for a in 0..n {
                out = out.max((applied[(a, k)] - psi_cols[(a, k)] * self.energies[k]).norm());
            }
        }
        out
    }

    /// Partition mode indices into groups with energies closer than `tol`
    /// (chained through consecutive sorted energies).
    pub fn degenerate_blocks(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        group_levels(&self.energies, tol)
    }

    /// Rebuild spectra from explicit parts; rows of `modes` must be orthonormal.
    pub fn from_parts(energies: Vec<f64>, modes: CMat) -> Result<Spectra> {
        let n = energies.len();
        if modes.nrows() != n || modes.ncols() != n {
            return Err(Error::invalid("modes matrix does not match number of energies"));
        }
        let defect = linalg::unitarity_defect(modes.as_ref());
        if defect > 1e-10 {
            return Err(Error::invalid(format!("modes are not orthonormal (defect {defect:e})")));
        }
        Ok(Spectra { energies, modes })
    }
}

fn group_levels(sorted: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || sorted[k] - sorted[k - 1] > tol {
            blocks.push(start..k);
            start = k;
        }
    }
    blocks
}

/// Energy window used to group numerically degenerate levels.
fn degeneracy_window(energies: &[f64]) -> f64 {
    let radius = energies.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    1e-10 * radius.max(1.0)
}

/// Diagonalise the coupling matrix.
///
/// Energies come out ascending. Inside each degenerate block the basis is
/// rotated onto the eigenbasis of the model's symmetry generator (if any)
/// and then re-orthonormalised.
pub fn diagonalize(model: &QuadraticModel) -> Result<Spectra> {
    let n = model.n_sites();
    let (energies, mut vecs) = linalg::hermitian_eigen(model.coupling().as_ref())?;

    for block in group_levels(&energies, degeneracy_window(&energies)) {
        if block.len() < 2 {
            continue;
        }
        if let Some(g) = model.symmetry() {
            let sub = vecs.as_ref().subcols(block.start, block.len()).to_owned();
            let projected = linalg::hermitian_part((sub.adjoint() * g * &sub).as_ref());
            let (_, rot) = linalg::hermitian_eigen(projected.as_ref())?;
            let rotated = &sub * &rot;
            vecs.as_mut().subcols_mut(block.start, block.len()).copy_from(&rotated);
        }
        orthonormalize_columns(&mut vecs, block.clone());
    }

    let spectra = Spectra { energies, modes: vecs.transpose().to_owned() };

    let unit_defect = linalg::unitarity_defect(spectra.modes.as_ref());
    let residual = spectra.eigen_residual(model);
    let radius = spectra.spectral_radius();
    if unit_defect > 1e-10 || residual > 1e-10 * radius {
        return Err(Error::NumericalFailure {
            what: format!("eigendecomposition of {n}-site model failed validation (unitarity defect {unit_defect:e})"),
            residual,
        });
    }
    Ok(spectra)
}

/// Modified Gram–Schmidt on a contiguous range of columns.
fn orthonormalize_columns(vecs: &mut CMat, cols: std::ops::Range<usize>) {
    let n = vecs.nrows();
    for k in cols.clone() {
        for prev in cols.start..k {
            let overlap: Complex64 = (0..n).map(|a| vecs[(a, prev)].conj() * vecs[(a, k)]).sum();
            for a in 0..n {
                let v = vecs[(a, prev)];
                vecs[(a, k)] -= overlap * v;
            }
        }
        let norm = (0..n).map(|a| vecs[(a, k)].norm_sqr()).sum::<f64>().sqrt();
        for a in 0..n {
            vecs[(a, k)] /= norm;
        }
    }
}

/// `U_αβ(t) = Σ_n e^{−iε_n t} ψ_nα ψ*_nβ = (e^{−iMt})_αβ`.
pub fn evolution_operator(spectra: &Spectra, t: f64) -> CMat {
    let n = spectra.len();
    let psi = spectra.modes();
    let phases: Vec<Complex64> = spectra.energies().iter().map(|&e| Complex64::from_polar(1.0, -e * t)).collect();
    let left = CMat::from_fn(n, n, |alpha, k| psi[(k, alpha)] * phases[k]);
    left * psi.conjugate()
}
