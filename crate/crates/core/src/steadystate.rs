//! Fixed points and closed-form solutions of the affine dynamics
//! `V[n+1] = D V[n] + C` (stroboscopic) and `dV/dt = 𝒟 V + 𝒞` (continuous
//! resetting limit).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use faer::Scale;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::model::QuadraticModel;
use crate::reset::{PairIndex, ResetProtocol, StroboscopicMap};
use crate::state::Spdm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DynamicsKind {
    Discrete,
    Continuous,
}

/// Anything of the form "matrix plus constant drive".
pub trait AffineSystem {
    fn kind(&self) -> DynamicsKind;
    fn matrix(&self) -> &CMat;
    fn offset(&self) -> &CVec;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }
}

impl AffineSystem for StroboscopicMap {
    fn kind(&self) -> DynamicsKind {
        DynamicsKind::Discrete
    }
    fn matrix(&self) -> &CMat {
        self.d()
    }
    fn offset(&self) -> &CVec {
        self.c()
    }
}

/// Bare affine system, not tied to a lattice model.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub kind: DynamicsKind,
    pub matrix: CMat,
    pub offset: CVec,
}

impl AffineMap {
    pub fn new(kind: DynamicsKind, matrix: CMat, offset: CVec) -> Result<AffineMap> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != offset.nrows() {
            return Err(Error::invalid("affine map needs a square matrix and a matching offset"));
        }
        Ok(AffineMap { kind, matrix, offset })
    }
}

impl AffineSystem for AffineMap {
    fn kind(&self) -> DynamicsKind {
        self.kind
    }
    fn matrix(&self) -> &CMat {
        &self.matrix
    }
    fn offset(&self) -> &CVec {
        &self.offset
    }
}

/// Numerical thresholds used by the solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// `|λ − 1|` (discrete) or `|σ|` (continuous) below this counts as a unit/zero mode.
    pub tol_unit: f64,
    /// Margin around `|λ| = 1` / `Re σ = 0` for the stability classification.
    pub classification_tol: f64,
    /// Eigenvector condition number above which a matrix is treated as defective.
    pub max_condition: f64,
    /// Singular values below this fraction of the largest span the kernel.
    pub singular_rel: f64,
    /// Residual above which a singular continuous system is inconsistent.
    pub consistency_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_unit: 1e-9,
            classification_tol: 1e-9,
            max_condition: 1e8,
            singular_rel: 1e-10,
            consistency_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Attractive,
    Marginal,
    Unphysical,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::Attractive => "attractive",
            Classification::Marginal => "marginal",
            Classification::Unphysical => "unphysical",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MapSpectrum {
    pub kind: DynamicsKind,
    pub eigenvalues: Vec<Complex64>,
    pub classification: Classification,
}

impl MapSpectrum {
    pub fn max_abs_lambda(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.norm()))
    }

    pub fn max_re_sigma(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::NEG_INFINITY, |acc, s| acc.max(s.re))
    }

    /// The stability figure of merit for this kind of dynamics.
    pub fn stability_margin(&self) -> f64 {
        match self.kind {
            DynamicsKind::Discrete => self.max_abs_lambda(),
            DynamicsKind::Continuous => self.max_re_sigma(),
        }
    }

    /// Eigenvalues ordered by decreasing `|λ|` (or `Re σ`), ties broken by
    /// imaginary then real part.
    pub fn sorted(&self) -> Vec<Complex64> {
        let key = |z: &Complex64| match self.kind {
            DynamicsKind::Discrete => z.norm(),
            DynamicsKind::Continuous => z.re,
        };
        let mut out = self.eigenvalues.clone();
        out.sort_by(|a, b| key(b).total_cmp(&key(a)).then(a.im.total_cmp(&b.im)).then(a.re.total_cmp(&b.re)));
        out
    }

    /// Eigenvalues within `tol` of the fixed-point-obstructing value (1 or 0).
    pub fn critical_eigenvalues(&self, tol: f64) -> Vec<Complex64> {
        let target = match self.kind {
            DynamicsKind::Discrete => Complex64::new(1.0, 0.0),
            DynamicsKind::Continuous => Complex64::new(0.0, 0.0),
        };
        self.eigenvalues.iter().copied().filter(|l| (l - target).norm() <= tol).collect()
    }
}

/// Eigenvalues of `D` (or `𝒟`) and the resulting stability class.
pub fn map_spectrum<S: AffineSystem>(system: &S, cfg: &SolverConfig) -> Result<MapSpectrum> {
    let kind = system.kind();
    let eigenvalues =
        if system.dim() == 0 { Vec::new() } else { linalg::general_eigenvalues(system.matrix().as_ref())? };
    let tol = cfg.classification_tol;
    let classification = match kind {
        DynamicsKind::Discrete => {
            let r = eigenvalues.iter().fold(0.0f64, |acc, l| acc.max(l.norm()));
            if r > 1.0 + tol {
                Classification::Unphysical
            } else if r < 1.0 - tol {
                Classification::Attractive
            } else {
                Classification::Marginal
            }
        }
        DynamicsKind::Continuous => {
            let r = eigenvalues.iter().fold(f64::NEG_INFINITY, |acc, s| acc.max(s.re));
            if r > tol {
                Classification::Unphysical
            } else if r < -tol {
                Classification::Attractive
            } else {
                Classification::Marginal
            }
        }
    };
    Ok(MapSpectrum { kind, eigenvalues, classification })
}

#[derive(Clone, Debug)]
pub struct DiscreteFixedPoint {
    pub vector: CVec,
    pub spectrum: MapSpectrum,
    /// `‖(I − D) V* − C‖∞`
    pub residual: f64,
}

fn discrete_residual(d: &CMat, c: &CVec, v: &CVec) -> CVec {
    v - d * v - c
}

/// Solve `(I − D) V* = C` directly.
///
/// Fails with [`Error::SingularMap`] when `D` has eigenvalues within
/// `tol_unit` of 1.
pub fn fixed_point_discrete<S: AffineSystem>(map: &S, cfg: &SolverConfig) -> Result<DiscreteFixedPoint> {
    let spectrum = map_spectrum(map, cfg)?;
    let near_unit = spectrum.critical_eigenvalues(cfg.tol_unit);
    if !near_unit.is_empty() {
        return Err(Error::SingularMap { near_unit });
    }
    let (d, c) = (map.matrix(), map.offset());
    let k = map.dim();
    let a = CMat::identity(k, k) - d;
    let lu = a.partial_piv_lu();
    use faer::linalg::solvers::Solve;
    let mut v = lu.solve(c);
    // one round of iterative refinement
    let r = discrete_residual(d, c, &v);
    v -= lu.solve(&r);
    let residual = linalg::max_abs_col(&discrete_residual(d, c, &v));
    let bound = 1e-10 * (1.0 + linalg::max_abs_col(c));
    if !(residual <= bound) {
        return Err(Error::NumericalFailure { what: "discrete fixed point failed residual check".into(), residual });
    }
    Ok(DiscreteFixedPoint { vector: v, spectrum, residual })
}

struct EigenBasis {
    values: Vec<Complex64>,
    vectors: CMat,
}

impl EigenBasis {
    fn new(m: &CMat, cfg: &SolverConfig) -> Result<EigenBasis> {
        let (values, vectors) = linalg::general_eigen(m.as_ref())?;
        let condition = linalg::condition_number(vectors.as_ref())?;
        if !(condition < cfg.max_condition) {
            return Err(Error::NotDiagonalisable { condition });
        }
        Ok(EigenBasis { values, vectors })
    }

    /// `P x` with `P` the inverse eigenvector matrix.
    fn to_modes(&self, x: &CVec) -> CVec {
        linalg::lu_solve(self.vectors.as_ref(), x)
    }

    fn to_pairs(&self, x: &CVec) -> CVec {
        &self.vectors * x
    }
}

/// Fixed point through the eigenbasis of `D`: `Ṽ_i = −C̃_i / (λ_i − 1)`.
///
/// Independent of [`fixed_point_discrete`]; only valid for diagonalisable `D`.
pub fn fixed_point_spectral<S: AffineSystem>(map: &S, cfg: &SolverConfig) -> Result<CVec> {
    let basis = EigenBasis::new(map.matrix(), cfg)?;
    let near_unit: Vec<Complex64> = basis.values.iter().copied().filter(|l| (l - 1.0).norm() <= cfg.tol_unit).collect();
    if !near_unit.is_empty() {
        return Err(Error::SingularMap { near_unit });
    }
    let ct = basis.to_modes(map.offset());
    let vt = CVec::from_fn(ct.nrows(), |i| -ct[i] / (basis.values[i] - 1.0));
    Ok(basis.to_pairs(&vt))
}

/// `(e^z − 1) / z`, accurate near zero.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-3 {
        // 1 + z/2 + z²/6 + …
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..10 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `ln(1 + x)` without cancellation for small `x`.
fn ln_1p(x: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * x.re + x.norm_sqr()).ln_1p();
    let im = x.im.atan2(1.0 + x.re);
    Complex64::new(re, im)
}

/// `(λ^n, Σ_{k<n} λ^k)`
fn power_and_geometric_sum(lambda: Complex64, n: u64) -> (Complex64, Complex64) {
    if n == 0 {
        return (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let x = lambda - 1.0;
    if x.norm() > 0.5 {
        let p = lambda.powf(n as f64);
        let p = if lambda.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { p };
        return (p, (p - 1.0) / x);
    }
    let w = ln_1p(x) * n as f64;
    let p = w.exp();
    // (λ^n − 1)/(λ − 1) = (e^w − 1)/w · w/x
    let ratio = if x.norm() == 0.0 { Complex64::new(n as f64, 0.0) } else { w / x };
    (p, phi1(w) * ratio)
}

/// Closed-form `V[n]` through the eigenbasis of `D`.
///
/// Modes with `λ_i = 1` (within `tol_unit`) grow linearly, `Ṽ_i[0] + n C̃_i`.
pub fn trajectory_closed_form<S: AffineSystem>(map: &S, v0: &CVec, n: u64, cfg: &SolverConfig) -> Result<CVec> {
    if v0.nrows() != map.dim() {
        return Err(Error::invalid("initial vector has the wrong length"));
    }
    if n == 0 {
        return Ok(v0.clone());
    }
    let basis = EigenBasis::new(map.matrix(), cfg)?;
    let vt0 = basis.to_modes(v0);
    let ct = basis.to_modes(map.offset());
    let vt = CVec::from_fn(vt0.nrows(), |i| {
        let lambda = basis.values[i];
        if (lambda - 1.0).norm() <= cfg.tol_unit {
            vt0[i] + ct[i] * n as f64
        } else {
            // (Ṽ0 + C̃/(λ−1)) λⁿ − C̃/(λ−1), rearranged to avoid cancellation
            let (pow, geo) = power_and_geometric_sum(lambda, n);
            vt0[i] * pow + ct[i] * geo
        }
    });
    Ok(basis.to_pairs(&vt))
}

/// Generator of the continuous resetting limit `τ → 0`.
#[derive(Clone, Debug)]
pub struct ContinuousGenerator {
    index: PairIndex,
    protocol: ResetProtocol,
    dcal: CMat,
    ccal: CVec,
}

impl ContinuousGenerator {
    pub fn index(&self) -> &PairIndex {
        &self.index
    }

    /// `𝒟_ij = i (M*_{α_i α_j} δ_{β_i β_j} − δ_{α_i α_j} M_{β_i β_j})`
    pub fn dcal(&self) -> &CMat {
        &self.dcal
    }

    /// `𝒞_i = i Σ_{(α',β')∈R} ρ⁰_{α'β'} (M*_{α_i α'} δ_{β_i β'} − δ_{α_i α'} M_{β_i β'})`
    pub fn ccal(&self) -> &CVec {
        &self.ccal
    }

    pub fn protocol(&self) -> &ResetProtocol {
        &self.protocol
    }

    pub fn unpack(&self, v: &CVec) -> Result<Spdm> {
        Spdm::new(linalg::hermitian_part(self.index.unpack(v, &self.protocol)?.as_ref()))
    }
}

impl AffineSystem for ContinuousGenerator {
    fn kind(&self) -> DynamicsKind {
        DynamicsKind::Continuous
    }
    fn matrix(&self) -> &CMat {
        &self.dcal
    }
    fn offset(&self) -> &CVec {
        &self.ccal
    }
}

/// The protocol's period is ignored.
pub fn continuous_generator(model: &QuadraticModel, protocol: &ResetProtocol) -> Result<ContinuousGenerator> {
    continuous_generator_with_index(model, protocol, PairIndex::complement_of(protocol))
}

pub fn continuous_generator_with_index(
    model: &QuadraticModel,
    protocol: &ResetProtocol,
    index: PairIndex,
) -> Result<ContinuousGenerator> {
    let n = model.n_sites();
    if protocol.n_sites() != n || index.n_sites() != n {
        return Err(Error::invalid("protocol, enumeration and model sizes differ"));
    }
    if index.len() + protocol.len() != n * n || index.pairs().iter().any(|&(a, b)| protocol.is_reset(a, b)) {
        return Err(Error::invalid("pair enumeration must cover exactly the non-reset entries"));
    }
    let m = model.coupling();
    let i = Complex64::new(0.0, 1.0);
    let zero = Complex64::new(0.0, 0.0);
    let pairs = index.pairs();
    let k = pairs.len();
    let dcal = CMat::from_fn(k, k, |r, s| {
        let (ar, br) = pairs[r];
        let (as_, bs) = pairs[s];
        let mut out = zero;
        if br == bs {
            out += m[(ar, as_)].conj();
        }
        if ar == as_ {
            out -= m[(br, bs)];
        }
        i * out
    });
    let reset = protocol.reset_matrix();
    // i (M* R − R Mᵀ)
    let full = Scale(i) * (linalg::conj(m.as_ref()) * &reset - &reset * m.transpose());
    let ccal = CVec::from_fn(k, |r| {
        let (a, b) = pairs[r];
        full[(a, b)]
    });
    Ok(ContinuousGenerator { index, protocol: protocol.clone(), dcal, ccal })
}

#[derive(Clone, Debug)]
pub struct ContinuousFixedPoint {
    pub vector: CVec,
    /// `𝒟` is numerically singular; `vector` is the minimum-norm solution.
    pub degenerate: bool,
    pub kernel_dim: usize,
    /// `‖𝒟 𝒱 + 𝒞‖∞`
    pub residual: f64,
}

/// Solve `𝒟 𝒱 = −𝒞`, falling back to the minimum-norm least-squares
/// solution when `𝒟` is singular.
pub fn fixed_point_continuous<S: AffineSystem>(generator: &S, cfg: &SolverConfig) -> Result<ContinuousFixedPoint> {
    let (dm, c) = (generator.matrix(), generator.offset());
    let k = generator.dim();
    let rhs = -c;
    let svd = dm
        .svd()
        .map_err(|e| Error::NumericalFailure { what: format!("svd did not converge: {e:?}"), residual: f64::NAN })?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let smax = s.first().copied().unwrap_or(0.0);
    let threshold = cfg.singular_rel * smax;
    let kernel_dim = s.iter().filter(|&&x| !(x > threshold)).count();
    let vector = if kernel_dim == 0 {
        let mut v = linalg::lu_solve(dm.as_ref(), &rhs);
        let r = dm * &v - &rhs;
        v -= linalg::lu_solve(dm.as_ref(), &r);
        v
    } else {
        // V S⁺ Uᴴ b
        let ub = svd.U().adjoint() * &rhs;
        let scaled = CVec::from_fn(k, |i| if s[i] > threshold { ub[i] / s[i] } else { Complex64::new(0.0, 0.0) });
        svd.V() * scaled
    };
    let residual = linalg::max_abs_col(&(dm * &vector + c));
    let scale = 1.0 + linalg::max_abs_col(c);
    if kernel_dim > 0 && !(residual <= cfg.consistency_tol * scale) {
        return Err(Error::NoSteadyState { residual });
    }
    if kernel_dim == 0 && !(residual <= 1e-10 * scale) {
        return Err(Error::NumericalFailure { what: "continuous fixed point failed residual check".into(), residual });
    }
    Ok(ContinuousFixedPoint { vector, degenerate: kernel_dim > 0, kernel_dim, residual })
}

/// `V(t)` for `dV/dt = 𝒟 V + 𝒞` from the eigenbasis of `𝒟`, with the
/// linear-growth branch for `σ_i = 0`. Defective generators are integrated
/// with fixed-step RK4 instead.
pub fn ode_evolve<S: AffineSystem>(generator: &S, v0: &CVec, t: f64, cfg: &SolverConfig) -> Result<CVec> {
    if v0.nrows() != generator.dim() {
        return Err(Error::invalid("initial vector has the wrong length"));
    }
    if !t.is_finite() {
        return Err(Error::invalid("time must be finite"));
    }
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let basis = match EigenBasis::new(generator.matrix(), cfg) {
        Ok(b) => b,
        Err(Error::NotDiagonalisable { condition }) => {
            log::debug!("generator is defective (condition {condition:e}); integrating with RK4");
            return Ok(ode_evolve_rk4(generator, v0, t));
        }
        Err(e) => return Err(e),
    };
    let vt0 = basis.to_modes(v0);
    let ct = basis.to_modes(generator.offset());
    let vt = CVec::from_fn(vt0.nrows(), |i| {
        let sigma = basis.values[i];
        if sigma.norm() <= cfg.tol_unit {
            vt0[i] + ct[i] * t
        } else {
            // e^{σt}(Ṽ0 + C̃/σ) − C̃/σ = e^{σt} Ṽ0 + C̃ t φ(σt)
            let z = sigma * t;
            vt0[i] * z.exp() + ct[i] * t * phi1(z)
        }
    });
    Ok(basis.to_pairs(&vt))
}

/// Classic RK4 with a step small enough that `h ‖𝒟‖∞ ≤ 0.01`.
pub fn ode_evolve_rk4<S: AffineSystem>(generator: &S, v0: &CVec, t: f64) -> CVec {
    let (dm, c) = (generator.matrix(), generator.offset());
    let norm = (0..dm.nrows()).map(|i| (0..dm.ncols()).map(|j| dm[(i, j)].norm()).sum::<f64>()).fold(0.0f64, f64::max);
    let steps = ((t.abs() * norm / 0.01).ceil() as usize).max(1);
    let h = t / steps as f64;
    let f = |v: &CVec| -> CVec { dm * v + c };
    let mut v = v0.clone();
    for _ in 0..steps {
        let k1 = f(&v);
        let k2 = f(&(&v + (h / 2.0) * &k1));
        let k3 = f(&(&v + (h / 2.0) * &k2));
        let k4 = f(&(&v + h * &k3));
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    v
}
