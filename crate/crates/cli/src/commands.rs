use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use quadratic_reset::analysis::{
    self, occupation_protocol, qubit_init_check, thermalisation_point, to_environment_basis, ThermalisationPoint,
    VIOLATION_TOL,
};
use quadratic_reset::io::{entries_full, hermitian_from_entries, Entry, SteadyStateReport};
use quadratic_reset::linalg;
use quadratic_reset::steadystate::map_spectrum;
use quadratic_reset::{build_map, build_ring, continuous_generator, diagonalize, Partition, ResetMode};

use crate::config::{parse_beta_list, ExperimentConfig, SpectrumTarget};
use crate::output::{emit, num, opt_num};
use crate::{CliError, CommonArgs};

const DEFAULT_RING_SITES: usize = 100;
const DEFAULT_SEGMENT: usize = 8;
const DEFAULT_PERIOD: f64 = 0.01;
const DEFAULT_BETAS: [f64; 3] = [0.01, 0.1, 1.0];

fn output_path<'a>(args: &'a CommonArgs, cfg: &'a ExperimentConfig) -> Option<&'a Path> {
    args.output.as_deref().or(cfg.output.as_deref())
}

fn betas(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<Option<Vec<f64>>, CliError> {
    if let Some(s) = &args.beta {
        return Ok(Some(parse_beta_list(s)?.values()));
    }
    Ok(cfg.beta.as_ref().map(|b| b.values()))
}

fn sweep_modes(name: Option<&str>) -> Result<Vec<ResetMode>, CliError> {
    match name {
        None | Some("both") => Ok(vec![ResetMode::RepeatedInteractions, ResetMode::EvolvingCorrelations]),
        Some(m) => Ok(vec![m.parse()?]),
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Invalid("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Invalid(format!("cannot start thread pool: {e}")))
}

fn sweep_csv(points: &[ThermalisationPoint], n_system: usize) -> String {
    let mut out = String::from("beta_env,mode,diag_sum,offdiag_sum");
    for a in 0..n_system {
        write!(out, ",beta_alpha_{a}").unwrap();
    }
    out.push_str(",classification\n");
    for p in points {
        write!(out, "{},{}", num(p.beta_env), p.mode.label()).unwrap();
        match &p.report {
            Some(r) => {
                write!(out, ",{},{}", num(r.diag_sum), num(r.offdiag_sum)).unwrap();
                for b in &r.betas {
                    write!(out, ",{}", opt_num(*b)).unwrap();
                }
            }
            None => out.push_str(&",".repeat(2 + n_system)),
        }
        let status = match (p.classification, p.failure) {
            (_, Some(code)) => code,
            (Some(c), None) => c.label(),
            (None, None) => "",
        };
        writeln!(out, ",{status}").unwrap();
    }
    out
}

pub fn ring_thermalisation(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let model = match cfg.model()? {
        Some(m) => m,
        None => build_ring(DEFAULT_RING_SITES, 1.0)?,
    };
    let n = model.n_sites();
    let partition = match cfg.partition(n)? {
        Some(p) => p,
        None => Partition::segment(n, 0, DEFAULT_SEGMENT.min(n - 1))?,
    };
    let tau = args.tau.or(cfg.tau).unwrap_or(DEFAULT_PERIOD);
    let modes = sweep_modes(args.mode.as_deref().or(cfg.mode.as_deref()))?;
    let betas = betas(args, cfg)?.unwrap_or_else(|| DEFAULT_BETAS.to_vec());
    let solver = cfg.solver()?;
    let jobs: Vec<(f64, ResetMode)> = betas.iter().flat_map(|&b| modes.iter().map(move |&m| (b, m))).collect();
    log::info!("{} sweep points on {} threads", jobs.len(), args.threads.unwrap_or(0));
    let pool = thread_pool(args.threads)?;
    // collect() keeps job order, so the output does not depend on scheduling
    let points: Vec<ThermalisationPoint> = pool.install(|| {
        jobs.par_iter()
            .map(|&(beta, mode)| thermalisation_point(&model, &partition, mode, beta, tau, &solver))
            .collect::<Result<_, _>>()
    })?;
    emit(output_path(args, cfg), &sweep_csv(&points, partition.system().len()))
}

pub fn steady_state(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let model = cfg.require_model()?;
    let partition = cfg.partition(model.n_sites())?;
    let proto_cfg = cfg.protocol(args.mode.as_deref(), args.tau, betas(args, cfg)?)?;
    let protocol = proto_cfg.to_protocol(&model, partition.as_ref())?;
    let ss = analysis::steady_state(&model, &protocol, &cfg.solver()?)?;
    let report = SteadyStateReport::from(&ss);
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    emit(output_path(args, cfg), &(text + "\n"))
}

#[derive(Serialize)]
struct Violation {
    environment: usize,
    system: usize,
}

#[derive(Serialize)]
struct QubitInitReport {
    violations: Vec<Violation>,
    /// `‖𝒞‖∞` of the continuous evolving-correlations drive.
    drive_norm: f64,
    occupations: Vec<f64>,
    rotated: bool,
    /// Eigenvectors of the reset block (columns), when it was not diagonal.
    #[serde(skip_serializing_if = "Option::is_none")]
    rotation: Option<Vec<Entry>>,
}

pub fn qubit_init(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let model = cfg.require_model()?;
    let partition =
        cfg.partition(model.n_sites())?.ok_or_else(|| CliError::Invalid("qubit-init requires a system".into()))?;
    let k = partition.environment().len();
    let (model, occupations, rotation) = match (&cfg.env_occupations, &cfg.reset_block) {
        (Some(occ), None) => (model, occ.clone(), None),
        (None, Some(entries)) => {
            let block = hermitian_from_entries(k, entries)?;
            let eb = to_environment_basis(&model, &partition, &block)?;
            if eb.off_diagonal > VIOLATION_TOL {
                log::warn!(
                    "reset block is not diagonal (max off-diagonal {:e}); checking in its eigenbasis",
                    eb.off_diagonal
                );
                (eb.model, eb.occupations, Some(entries_full(&eb.rotation)))
            } else {
                let diag = (0..k).map(|i| block[(i, i)].re).collect();
                (model, diag, None)
            }
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Invalid("give either env_occupations or reset_block, not both".into()));
        }
        (None, None) => return Err(CliError::Invalid("qubit-init requires env_occupations or reset_block".into())),
    };
    let violations = qubit_init_check(&model, &partition, &occupations)?;
    let generator = continuous_generator(&model, &occupation_protocol(&partition, &occupations, 0.0)?)?;
    let report = QubitInitReport {
        violations: violations.iter().map(|&(environment, system)| Violation { environment, system }).collect(),
        drive_norm: linalg::max_abs_col(generator.ccal()),
        occupations,
        rotated: rotation.is_some(),
        rotation,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    emit(output_path(args, cfg), &(text + "\n"))?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!("{} environment-system pair(s) feed the system", violations.len())))
    }
}

pub fn spectrum(args: &CommonArgs, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let model = cfg.require_model()?;
    let mut out = String::new();
    match cfg.target.unwrap_or_default() {
        SpectrumTarget::Model => {
            out.push_str("index,energy\n");
            for (i, e) in diagonalize(&model)?.energies().iter().enumerate() {
                writeln!(out, "{i},{}", num(*e)).unwrap();
            }
        }
        SpectrumTarget::Map => {
            let proto_cfg = cfg.protocol(args.mode.as_deref(), args.tau, betas(args, cfg)?)?;
            let partition = cfg.partition(model.n_sites())?;
            let protocol = proto_cfg.to_protocol(&model, partition.as_ref())?;
            let solver = cfg.solver()?;
            let spec = if protocol.period() == 0.0 {
                let generator = continuous_generator(&model, &protocol)?;
                map_spectrum(&generator, &solver)?
            } else {
                let map = build_map(&model, &protocol)?;
                log::info!("map dimension {}", map.dim());
                map_spectrum(&map, &solver)?
            };
            out.push_str("index,re,im,abs\n");
            for (i, z) in spec.sorted().iter().enumerate() {
                writeln!(out, "{i},{},{},{}", num(z.re), num(z.im), num(z.norm())).unwrap();
            }
        }
    }
    emit(output_path(args, cfg), &out)
}
