//! JSON file formats: sparse entry lists for matrices, model and protocol
//! descriptions, and steady-state reports.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::analysis::SteadyState;
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{build_custom, Partition, QuadraticModel, Statistics};
use crate::reset::{ResetMode, ResetProtocol};
use crate::state::Spdm;

/// `[row, col, re, im]`
pub type Entry = (usize, usize, f64, f64);

/// Tolerance for a pair of entries given in both triangles to disagree.
const CONJUGATE_TOL: f64 = 1e-12;

/// Dense Hermitian matrix from an entry list. Entries may be given in either
/// triangle; the mirror entry is filled by conjugation. Entries given in both
/// triangles must agree.
pub fn hermitian_from_entries(n: usize, entries: &[Entry]) -> Result<CMat> {
    let mut seen: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for &(r, c, re, im) in entries {
        if r >= n || c >= n {
            return Err(Error::invalid(format!("entry ({r}, {c}) out of range for dimension {n}")));
        }
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::invalid(format!("entry ({r}, {c}) is not finite")));
        }
        let z = Complex64::new(re, im);
        let (key, val) = if r <= c { ((r, c), z) } else { ((c, r), z.conj()) };
        if let Some(prev) = seen.insert(key, val) {
            if (prev - val).norm() > CONJUGATE_TOL * (1.0 + val.norm()) {
                return Err(Error::invalid(format!("conflicting entries for ({}, {})", key.0, key.1)));
            }
        }
    }
    let mut m = CMat::zeros(n, n);
    for (&(r, c), &z) in &seen {
        if r == c && z.im.abs() > CONJUGATE_TOL * (1.0 + z.re.abs()) {
            return Err(Error::invalid(format!("diagonal entry ({r}, {r}) has imaginary part {}", z.im)));
        }
        m[(r, c)] = z;
        m[(c, r)] = z.conj();
    }
    Ok(m)
}

/// Upper-triangle entry list of a Hermitian matrix; exact zeros are skipped.
pub fn entries_upper(m: &CMat) -> Vec<Entry> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((r, c, z.re, z.im));
            }
        }
    }
    out
}

/// Every nonzero entry, row-major; for matrices without Hermitian symmetry.
pub fn entries_full(m: &CMat) -> Vec<Entry> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                out.push((r, c, z.re, z.im));
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_sites: usize,
    #[serde(default = "default_statistics")]
    pub statistics: Statistics,
    pub entries: Vec<Entry>,
}

fn default_statistics() -> Statistics {
    Statistics::Fermionic
}

impl ModelFile {
    pub fn from_model(model: &QuadraticModel) -> ModelFile {
        ModelFile { n_sites: model.n_sites(), statistics: model.statistics(), entries: entries_upper(model.coupling()) }
    }

    pub fn to_model(&self) -> Result<QuadraticModel> {
        if self.n_sites == 0 {
            return Err(Error::invalid("model needs at least one site"));
        }
        build_custom(hermitian_from_entries(self.n_sites, &self.entries)?, self.statistics)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpdmFile {
    pub n_sites: usize,
    pub entries: Vec<Entry>,
}

impl SpdmFile {
    pub fn from_spdm(rho: &Spdm) -> SpdmFile {
        SpdmFile { n_sites: rho.n_sites(), entries: entries_upper(rho.matrix()) }
    }

    pub fn to_spdm(&self) -> Result<Spdm> {
        Spdm::new(hermitian_from_entries(self.n_sites, &self.entries)?)
    }
}

/// Inverse temperature: a number, or `"inf"` for the ground state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beta(pub f64);

impl Beta {
    pub const INFINITE: Beta = Beta(f64::INFINITY);
}

impl std::str::FromStr for Beta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Beta> {
        match s.trim() {
            "inf" | "Inf" | "infinity" | "+inf" => Ok(Beta::INFINITE),
            other => {
                let v: f64 = other.parse().map_err(|_| Error::invalid(format!("cannot parse beta {other:?}")))?;
                Beta::checked(v)
            }
        }
    }
}

impl Beta {
    pub fn checked(v: f64) -> Result<Beta> {
        if v.is_nan() || v < 0.0 || v == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("beta must be nonnegative, got {v}")));
        }
        Ok(Beta(v))
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Beta, D::Error> {
        struct BetaVisitor;

        impl Visitor<'_> for BetaVisitor {
            type Value = Beta;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Beta, E> {
                Beta::checked(v).map_err(E::custom)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Beta, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Beta, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Beta, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(BetaVisitor)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolMode {
    #[serde(rename = "RI")]
    RepeatedInteractions,
    #[serde(rename = "EC")]
    EvolvingCorrelations,
    #[serde(rename = "custom")]
    Custom,
}

impl From<ResetMode> for ProtocolMode {
    fn from(m: ResetMode) -> Self {
        match m {
            ResetMode::RepeatedInteractions => ProtocolMode::RepeatedInteractions,
            ResetMode::EvolvingCorrelations => ProtocolMode::EvolvingCorrelations,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub mode: ProtocolMode,
    pub tau: f64,
    #[serde(default)]
    pub beta: Option<Beta>,
    /// Reset pairs and their values for `custom`; mirrored pairs are added
    /// by conjugation.
    #[serde(default)]
    pub custom_pairs: Option<Vec<Entry>>,
}

impl ProtocolConfig {
    /// Thermal RI/EC resets need a model and partition; custom resets use
    /// the listed values verbatim.
    pub fn to_protocol(&self, model: &QuadraticModel, partition: Option<&Partition>) -> Result<ResetProtocol> {
        let mode = match self.mode {
            ProtocolMode::RepeatedInteractions => ResetMode::RepeatedInteractions,
            ProtocolMode::EvolvingCorrelations => ResetMode::EvolvingCorrelations,
            ProtocolMode::Custom => {
                let pairs = self
                    .custom_pairs
                    .as_ref()
                    .ok_or_else(|| Error::invalid("custom protocol requires custom_pairs"))?;
                return custom_protocol(model.n_sites(), pairs, self.tau);
            }
        };
        let partition = partition.ok_or_else(|| Error::invalid("RI/EC protocols require a system partition"))?;
        let beta = self.beta.ok_or_else(|| Error::invalid("RI/EC protocols require beta"))?;
        ResetProtocol::thermal(model, partition, mode, beta.0, self.tau)
    }
}

/// Reset protocol from an explicit entry list.
pub fn custom_protocol(n_sites: usize, pairs: &[Entry], period: f64) -> Result<ResetProtocol> {
    let mut values = BTreeMap::new();
    for &(r, c, re, im) in pairs {
        if r >= n_sites || c >= n_sites {
            return Err(Error::invalid(format!("reset pair ({r}, {c}) out of range for {n_sites} sites")));
        }
        let z = Complex64::new(re, im);
        for (key, val) in [((r, c), z), ((c, r), z.conj())] {
            if let Some(prev) = values.insert(key, val) {
                if (prev - val).norm() > CONJUGATE_TOL * (1.0 + val.norm()) {
                    return Err(Error::invalid(format!("conflicting reset values for ({}, {})", key.0, key.1)));
                }
            }
        }
    }
    ResetProtocol::new(n_sites, values, period)
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyStateReport {
    pub classification: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_re_sigma: Option<f64>,
    pub residual: f64,
    pub kernel_dim: usize,
    pub degenerate: bool,
    pub rho_star: SpdmFile,
}

impl From<&SteadyState> for SteadyStateReport {
    fn from(ss: &SteadyState) -> Self {
        let (max_abs_lambda, max_re_sigma) =
            if ss.continuous { (None, Some(ss.stability_margin)) } else { (Some(ss.stability_margin), None) };
        SteadyStateReport {
            classification: ss.classification.label().to_string(),
            max_abs_lambda,
            max_re_sigma,
            residual: ss.residual,
            kernel_dim: ss.kernel_dim,
            degenerate: ss.kernel_dim > 0,
            rho_star: SpdmFile::from_spdm(&ss.rho),
        }
    }
}
