//! Brute-force many-body reference for small fermionic models.
//!
//! States live in the full `2^N` Fock space. Basis index bit `α` is the
//! occupation of site `α` (little-endian); operator ordering follows the
//! Jordan–Wigner string with site 0 leftmost, so `a†_α` picks up a sign
//! `(-1)^{#occupied sites below α}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{QuadraticModel, Statistics};

pub const MAX_FOCK_SITES: usize = 12;

#[derive(Clone, Debug)]
pub struct FockState {
    n_sites: usize,
    amplitudes: Vec<Complex64>,
}

fn check_sites(n: usize) -> Result<()> {
    if n > MAX_FOCK_SITES {
        return Err(Error::ResourceLimit(format!("Fock space of {n} sites exceeds the {MAX_FOCK_SITES}-site limit")));
    }
    Ok(())
}

impl FockState {
    pub fn from_amplitudes(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<FockState> {
        check_sites(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::invalid(format!(
                "expected {} amplitudes for {n_sites} sites, got {}",
                1usize << n_sites,
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("state norm {norm} is not 1")));
        }
        Ok(FockState { n_sites, amplitudes })
    }

    /// Occupation-number basis state.
    pub fn product(occupied: &[bool]) -> Result<FockState> {
        let n = occupied.len();
        check_sites(n)?;
        let index = occupied.iter().enumerate().filter(|(_, &o)| o).fold(0usize, |acc, (i, _)| acc | (1 << i));
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(FockState { n_sites: n, amplitudes })
    }

    /// One particle in the single-particle orbital `Σ_α φ_α a†_α |0⟩`.
    pub fn single_particle(orbital: &[Complex64]) -> Result<FockState> {
        let n = orbital.len();
        check_sites(n)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (alpha, &c) in orbital.iter().enumerate() {
            amplitudes[1 << alpha] = c;
        }
        FockState::from_amplitudes(n, amplitudes)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

fn parity_below(state: usize, site: usize) -> f64 {
    if (state & ((1 << site) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Apply `a†_α a_β` to basis state `s`: returns the target state and sign.
fn hop(s: usize, alpha: usize, beta: usize) -> Option<(usize, f64)> {
    if s & (1 << beta) == 0 {
        return None;
    }
    let sign_b = parity_below(s, beta);
    let mid = s & !(1 << beta);
    if mid & (1 << alpha) != 0 {
        return None;
    }
    let sign_a = parity_below(mid, alpha);
    Some((mid | (1 << alpha), sign_a * sign_b))
}

/// Dense many-body Hamiltonian `Σ a†_α M_αβ a_β`.
pub fn fock_hamiltonian(model: &QuadraticModel) -> Result<CMat> {
    if model.statistics() != Statistics::Fermionic {
        return Err(Error::invalid("Fock oracle supports fermionic models only"));
    }
    let n = model.n_sites();
    check_sites(n)?;
    let dim = 1usize << n;
    let m = model.coupling();
    let mut h = CMat::zeros(dim, dim);
    for s in 0..dim {
        for alpha in 0..n {
            for beta in 0..n {
                let amp = m[(alpha, beta)];
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((t, sign)) = hop(s, alpha, beta) {
                    h[(t, s)] += amp * sign;
                }
            }
        }
    }
    Ok(h)
}

/// `⟨a†_α a_β⟩` in the given state.
pub fn fock_two_point(state: &FockState) -> CMat {
    let n = state.n_sites;
    let psi = &state.amplitudes;
    let mut rho = CMat::zeros(n, n);
    for (s, &amp) in psi.iter().enumerate() {
        if amp == Complex64::new(0.0, 0.0) {
            continue;
        }
        for alpha in 0..n {
            for beta in 0..n {
                if let Some((t, sign)) = hop(s, alpha, beta) {
                    rho[(alpha, beta)] += psi[t].conj() * amp * sign;
                }
            }
        }
    }
    rho
}

/// `e^{−iHt} |state⟩` through a full eigendecomposition of the Fock Hamiltonian.
pub fn fock_evolve(state: &FockState, model: &QuadraticModel, t: f64) -> Result<FockState> {
    if state.n_sites != model.n_sites() {
        return Err(Error::invalid("state and model have different numbers of sites"));
    }
    let h = fock_hamiltonian(model)?;
    let (energies, vecs) = linalg::hermitian_eigen(h.as_ref())?;
    let dim = energies.len();
    let coeffs: Vec<Complex64> = (0..dim)
        .map(|k| {
            let overlap: Complex64 = (0..dim).map(|s| vecs[(s, k)].conj() * state.amplitudes[s]).sum();
            overlap * Complex64::from_polar(1.0, -energies[k] * t)
        })
        .collect();
    let amplitudes = (0..dim).map(|s| (0..dim).map(|k| vecs[(s, k)] * coeffs[k]).sum()).collect();
    Ok(FockState { n_sites: state.n_sites, amplitudes })
}
