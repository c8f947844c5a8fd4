//! Single-particle density matrices `ρ_αβ = ⟨a†_α a_β⟩`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::Spectra;

/// Hermiticity tolerance for accepting external density matrices.
pub const SPDM_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Spdm {
    rho: CMat,
}

impl Spdm {
    /// Validate a square Hermitian matrix as a density matrix.
    /// Fermionic admissibility is checked separately by [`Spdm::is_fermionic`].
    pub fn new(rho: CMat) -> Result<Spdm> {
        let n = rho.nrows();
        if n == 0 || rho.ncols() != n {
            return Err(Error::invalid("density matrix must be square and nonempty"));
        }
        let defect = linalg::hermiticity_defect(rho.as_ref());
        if !(defect <= SPDM_HERMITIAN_TOL) {
            return Err(Error::invalid(format!("density matrix is not Hermitian (defect {defect:e})")));
        }
        Ok(Spdm { rho })
    }

    pub(crate) fn from_raw(rho: CMat) -> Spdm {
        Spdm { rho }
    }

    pub fn from_occupations(occupations: &[f64]) -> Result<Spdm> {
        if occupations.is_empty() {
            return Err(Error::invalid("no occupations given"));
        }
        if let Some((i, x)) = occupations.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("occupation {x} at index {i} is outside [0, 1]")));
        }
        let n = occupations.len();
        Ok(Spdm {
            rho: CMat::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(occupations[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.rho
    }

    pub fn into_matrix(self) -> CMat {
        self.rho
    }

    pub fn get(&self, alpha: usize, beta: usize) -> Complex64 {
        self.rho[(alpha, beta)]
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(self.rho.as_ref())
    }

    /// Eigenvalues of ρ, ascending (mode occupations in its natural basis).
    pub fn occupation_spectrum(&self) -> Result<Vec<f64>> {
        let h = linalg::hermitian_part(self.rho.as_ref());
        Ok(linalg::hermitian_eigen(h.as_ref())?.0)
    }

    /// All eigenvalues lie in `[-tol, 1 + tol]`.
    pub fn is_fermionic(&self, tol: f64) -> Result<bool> {
        let spec = self.occupation_spectrum()?;
        Ok(spec.iter().all(|&x| x >= -tol && x <= 1.0 + tol))
    }
}

/// Fermi–Dirac occupation at zero chemical potential.
///
/// Modes with `ε = 0` at `β = ±∞` get occupation ½.
pub fn fermi_occupation(beta: f64, energy: f64) -> f64 {
    if energy == 0.0 {
        return 0.5;
    }
    let x = beta * energy;
    if x.is_nan() {
        return 0.5;
    }
    1.0 / (x.exp() + 1.0)
}

/// Thermal state of the model at inverse temperature `beta`
/// (`f64::INFINITY` for the ground state), zero chemical potential.
pub fn thermal_spdm(spectra: &Spectra, beta: f64) -> Spdm {
    // energies this close to zero are treated as exact zero modes, which only
    // matters in the β → ∞ limit
    let zero_tol = 1e-12 * spectra.spectral_radius().max(1.0);
    let occ: Vec<f64> = spectra
        .energies()
        .iter()
        .map(|&e| if e.abs() <= zero_tol && beta.is_infinite() { 0.5 } else { fermi_occupation(beta, e) })
        .collect();
    let n = occ.len();
    let tilde = CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(occ[i], 0.0) } else { Complex64::new(0.0, 0.0) });
    from_eigenbasis_raw(&tilde, spectra)
}

fn check_dim(rho: &CMat, n: usize, what: &str) -> Result<()> {
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::invalid(format!("{what}: dimension mismatch ({}x{} vs {n})", rho.nrows(), rho.ncols())));
    }
    Ok(())
}

/// `ρ'_αβ = Σ U*_αα' U_ββ' ρ_α'β'`, i.e. `ρ' = U* ρ Uᵀ`.
pub fn evolve(rho: &Spdm, unitary: &CMat) -> Result<Spdm> {
    check_dim(unitary, rho.n_sites(), "evolve")?;
    let left = unitary.conjugate() * &rho.rho;
    Ok(Spdm::from_raw(left * unitary.transpose()))
}

/// `ρ̃_nm = Σ ψ_nα ψ*_mβ ρ_αβ`.
pub fn to_eigenbasis(rho: &Spdm, spectra: &Spectra) -> Result<Spdm> {
    check_dim(&rho.rho, spectra.len(), "to_eigenbasis")?;
    let psi = spectra.modes();
    Ok(Spdm::from_raw(psi * &rho.rho * psi.adjoint()))
}

/// Inverse of [`to_eigenbasis`]: `ρ_αβ = Σ ψ*_nα ψ_mβ ρ̃_nm`.
pub fn from_eigenbasis(rho_tilde: &Spdm, spectra: &Spectra) -> Result<Spdm> {
    check_dim(&rho_tilde.rho, spectra.len(), "from_eigenbasis")?;
    Ok(from_eigenbasis_raw(&rho_tilde.rho, spectra))
}

fn from_eigenbasis_raw(tilde: &CMat, spectra: &Spectra) -> Spdm {
    let psi = spectra.modes();
    Spdm::from_raw(psi.adjoint() * tilde * psi)
}

/// Default energy window for [`diagonal_ensemble`].
pub fn default_degeneracy_tol(spectra: &Spectra) -> f64 {
    1e-9 * spectra.spectral_radius()
}

/// Infinite-time average of `ρ(t)`: eigenbasis coherences between levels
/// further apart than `degeneracy_tol` average out, the rest are kept.
pub fn diagonal_ensemble(rho0: &Spdm, spectra: &Spectra, degeneracy_tol: f64) -> Result<Spdm> {
    let tilde = to_eigenbasis(rho0, spectra)?;
    let e = spectra.energies();
    let n = e.len();
    let kept = CMat::from_fn(n, n, |i, j| {
        if (e[i] - e[j]).abs() <= degeneracy_tol {
            tilde.rho[(i, j)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(from_eigenbasis_raw(&kept, spectra))
}

/// Principal sub-block of ρ on `indices`.
pub fn restrict(rho: &Spdm, indices: &[usize]) -> Result<Spdm> {
    let n = rho.n_sites();
    if indices.is_empty() {
        return Err(Error::invalid("cannot restrict to an empty index set"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("index {bad} out of range for {n} sites")));
    }
    let k = indices.len();
    Ok(Spdm::from_raw(CMat::from_fn(k, k, |i, j| rho.rho[(indices[i], indices[j])])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_custom, build_ring, diagonalize, evolution_operator, Statistics};
    use crate::oracle::{fock_evolve, fock_two_point, FockState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        linalg::hermitian_part(a.as_ref())
    }

    /// Taylor-series exponential `exp(-i M dt)`, independent of any eigensolver.
    fn taylor_propagator(m: &CMat, dt: f64) -> CMat {
        let n = m.nrows();
        let gen = faer::Scale(Complex64::new(0.0, -dt)) * m;
        let mut term = CMat::identity(n, n);
        let mut sum = CMat::identity(n, n);
        for k in 1..40 {
            term = (1.0 / k as f64) * (&term * &gen);
            sum += &term;
        }
        sum
    }

    /// Simpson time average of ρ(t) over [0, T].
    fn quadrature_average(m: &CMat, rho0: &CMat, horizon: f64, steps: usize) -> CMat {
        let dt = horizon / steps as f64;
        let u = taylor_propagator(m, dt);
        let uc = u.conjugate().to_owned();
        let ut = u.transpose().to_owned();
        let mut rho = rho0.clone();
        let n = m.nrows();
        let mut acc = CMat::zeros(n, n);
        for k in 0..=steps {
            let w = if k == 0 || k == steps {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * &rho;
            rho = &uc * &rho * &ut;
        }
        (dt / 3.0 / horizon) * acc
    }

    #[test]
    fn occupations() {
        let r = Spdm::from_occupations(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.get(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(r.get(1, 1), Complex64::new(0.0, 0.0));
        let half = Spdm::from_occupations(&[0.5; 5]).unwrap();
        assert!(linalg::max_abs_diff(half.matrix().as_ref(), (0.5 * CMat::identity(5, 5)).as_ref()) == 0.0);
        let r = Spdm::from_occupations(&[0.3, 0.7]).unwrap();
        assert_eq!(r.get(1, 1).re, 0.7);
        assert!(Spdm::from_occupations(&[0.5, 1.2]).is_err());
        assert!(Spdm::from_occupations(&[-0.1]).is_err());
        assert!(Spdm::from_occupations(&[f64::NAN]).is_err());
    }

    #[test]
    fn thermal_infinite_temperature_is_half_identity() {
        let s = diagonalize(&build_custom(random_hermitian(6, 1), Statistics::Fermionic).unwrap()).unwrap();
        let r = thermal_spdm(&s, 0.0);
        let half = 0.5 * CMat::identity(6, 6);
        assert!(linalg::max_abs_diff(r.matrix().as_ref(), half.as_ref()) < 1e-14);
    }

    #[test]
    fn thermal_single_mode() {
        let m = CMat::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0));
        let s = diagonalize(&build_custom(m, Statistics::Fermionic).unwrap()).unwrap();
        let r = thermal_spdm(&s, 1.0);
        let expected = 1.0 / (std::f64::consts::E + 1.0);
        assert!((r.get(0, 0).re - expected).abs() < 1e-15);
        assert!((expected - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn thermal_ground_state_ring() {
        let s = diagonalize(&build_ring(4, 1.0).unwrap()).unwrap();
        let r = thermal_spdm(&s, f64::INFINITY);
        let tilde = to_eigenbasis(&r, &s).unwrap();
        let expected = [1.0, 0.5, 0.5, 0.0];
        for (k, x) in expected.iter().enumerate() {
            assert!((tilde.get(k, k).re - x).abs() < 1e-14, "mode {k}");
        }
        assert!((r.trace().re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn thermal_commutes_with_real_coupling() {
        let ring = build_ring(12, 1.0).unwrap();
        let s = diagonalize(&ring).unwrap();
        for beta in [0.1, 1.0, 5.0] {
            let r = thermal_spdm(&s, beta);
            let comm = r.matrix() * ring.coupling() - ring.coupling() * r.matrix();
            assert!(linalg::max_abs(comm.as_ref()) < 1e-10);
        }
        // for complex M the site-basis SPDM commutes with M* (ρ = f(M)ᵀ)
        let m = random_hermitian(5, 2);
        let s = diagonalize(&build_custom(m.clone(), Statistics::Fermionic).unwrap()).unwrap();
        let r = thermal_spdm(&s, 0.8);
        let mc = linalg::conj(m.as_ref());
        let comm = r.matrix() * &mc - &mc * r.matrix();
        assert!(linalg::max_abs(comm.as_ref()) < 1e-10);
    }

    #[test]
    fn evolve_identity_and_half() {
        let rho = Spdm::new(random_hermitian(4, 3)).unwrap();
        let same = evolve(&rho, &CMat::identity(4, 4)).unwrap();
        assert!(linalg::max_abs_diff(same.matrix().as_ref(), rho.matrix().as_ref()) == 0.0);
        let s = diagonalize(&build_custom(random_hermitian(4, 4), Statistics::Fermionic).unwrap()).unwrap();
        let u = evolution_operator(&s, 1.3);
        let half = Spdm::from_occupations(&[0.5; 4]).unwrap();
        let out = evolve(&half, &u).unwrap();
        assert!(linalg::max_abs_diff(out.matrix().as_ref(), half.matrix().as_ref()) < 1e-14);
        assert!(evolve(&half, &CMat::identity(3, 3)).is_err());
    }

    #[test]
    fn evolve_matches_fock_oracle() {
        let ring = build_ring(6, 1.0).unwrap();
        let s = diagonalize(&ring).unwrap();
        let u = evolution_operator(&s, 1.0);
        let rho0 = Spdm::from_occupations(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let single = evolve(&rho0, &u).unwrap();
        let fock = FockState::product(&[true, false, false, false, false, false]).unwrap();
        let many = fock_two_point(&fock_evolve(&fock, &ring, 1.0).unwrap());
        assert!(linalg::max_abs_diff(single.matrix().as_ref(), many.as_ref()) < 1e-10);
    }

    #[test]
    fn eigenbasis_transforms() {
        let s = diagonalize(&build_custom(random_hermitian(5, 6), Statistics::Fermionic).unwrap()).unwrap();
        let half = Spdm::from_occupations(&[0.5; 5]).unwrap();
        let t = to_eigenbasis(&half, &s).unwrap();
        assert!(linalg::max_abs_diff(t.matrix().as_ref(), half.matrix().as_ref()) < 1e-14);

        // ρ_αβ = ψ*_0α ψ_0β is the occupied mode 0
        let psi = s.modes();
        let proj = Spdm::new(CMat::from_fn(5, 5, |a, b| psi[(0, a)].conj() * psi[(0, b)])).unwrap();
        let t = to_eigenbasis(&proj, &s).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let x = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((t.get(i, j) - Complex64::new(x, 0.0)).norm() < 1e-14);
            }
        }

        let rho = Spdm::new(random_hermitian(5, 7)).unwrap();
        let back = from_eigenbasis(&to_eigenbasis(&rho, &s).unwrap(), &s).unwrap();
        assert!(linalg::max_abs_diff(back.matrix().as_ref(), rho.matrix().as_ref()) < 1e-12);
        assert!(to_eigenbasis(&rho, &diagonalize(&build_ring(4, 1.0).unwrap()).unwrap()).is_err());
    }

    #[test]
    fn diagonal_ensemble_keeps_diagonal_states() {
        let s = diagonalize(&build_custom(random_hermitian(5, 8), Statistics::Fermionic).unwrap()).unwrap();
        let rho = thermal_spdm(&s, 0.7);
        let avg = diagonal_ensemble(&rho, &s, default_degeneracy_tol(&s)).unwrap();
        assert!(linalg::max_abs_diff(avg.matrix().as_ref(), rho.matrix().as_ref()) < 1e-13);
    }

    #[test]
    fn diagonal_ensemble_matches_quadrature_nondegenerate() {
        // well separated levels so that the finite-T average converges
        let mut m = CMat::zeros(4, 4);
        let diag = [-1.5, -0.4, 0.6, 1.8];
        for i in 0..4 {
            m[(i, i)] = Complex64::new(diag[i], 0.0);
        }
        let pert = 0.2 * random_hermitian(4, 9);
        let m = m + pert;
        let model = build_custom(m.clone(), Statistics::Fermionic).unwrap();
        let s = diagonalize(&model).unwrap();
        assert!(s.energies().windows(2).all(|w| w[1] - w[0] > 0.5));
        let rho0 = Spdm::new(random_hermitian(4, 10)).unwrap();
        let avg = diagonal_ensemble(&rho0, &s, 0.0).unwrap();
        let oracle = quadrature_average(&m, rho0.matrix(), 1e4, 400_000);
        let err = linalg::max_abs_diff(avg.matrix().as_ref(), oracle.as_ref());
        assert!(err < 1e-3, "diagonal ensemble vs quadrature: {err:e}");
    }

    #[test]
    fn diagonal_ensemble_keeps_degenerate_coherences() {
        let ring = build_ring(4, 1.0).unwrap();
        let s = diagonalize(&ring).unwrap();
        let rho0 = Spdm::from_occupations(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let windowed = diagonal_ensemble(&rho0, &s, default_degeneracy_tol(&s)).unwrap();
        // keep only n = m, ignoring the degenerate zero-mode pair
        let t = to_eigenbasis(&rho0, &s).unwrap();
        let kept = CMat::from_fn(4, 4, |i, j| if i == j { t.get(i, j) } else { Complex64::new(0.0, 0.0) });
        let naive = from_eigenbasis(&Spdm::from_raw(kept), &s).unwrap();
        let oracle = quadrature_average(ring.coupling(), rho0.matrix(), 2e3, 80_000);
        let err_window = linalg::max_abs_diff(windowed.matrix().as_ref(), oracle.as_ref());
        let err_naive = linalg::max_abs_diff(naive.matrix().as_ref(), oracle.as_ref());
        assert!(err_window < 1e-3, "windowed: {err_window:e}");
        assert!(err_naive > 0.05, "naive form should miss the zero-mode coherence: {err_naive:e}");

        let t = to_eigenbasis(&windowed, &s).unwrap();
        let orig = to_eigenbasis(&rho0, &s).unwrap();
        assert!((t.get(1, 2) - orig.get(1, 2)).norm() < 1e-14);
    }

    #[test]
    fn diagonal_ensemble_idempotent() {
        let s = diagonalize(&build_ring(6, 1.0).unwrap()).unwrap();
        let rho = Spdm::new(random_hermitian(6, 12)).unwrap();
        let tol = default_degeneracy_tol(&s);
        let once = diagonal_ensemble(&rho, &s, tol).unwrap();
        let twice = diagonal_ensemble(&once, &s, tol).unwrap();
        assert!(linalg::max_abs_diff(once.matrix().as_ref(), twice.matrix().as_ref()) < 1e-13);
    }

    #[test]
    fn restrict_blocks() {
        let id = Spdm::from_occupations(&[1.0; 4]).unwrap();
        let b = restrict(&id, &[1, 3]).unwrap();
        assert_eq!(b.matrix().nrows(), 2);
        assert_eq!(b.get(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(b.get(0, 1), Complex64::new(0.0, 0.0));
        let rho = Spdm::new(random_hermitian(4, 13)).unwrap();
        let all = restrict(&rho, &[0, 1, 2, 3]).unwrap();
        assert_eq!(linalg::max_abs_diff(all.matrix().as_ref(), rho.matrix().as_ref()), 0.0);
        let sub = restrict(&rho, &[0, 2]).unwrap();
        assert_eq!(sub.get(0, 1), rho.get(0, 2));
        assert_eq!(sub.get(1, 0), rho.get(2, 0));
        assert_eq!(sub.get(1, 1), rho.get(2, 2));
        assert!(restrict(&rho, &[4]).is_err());
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(Spdm::new(m).is_err());
    }
}
