use std::path::Path;

use qst_core::hermitian::CMatrix;
use qst_core::io::{matrix_to_pairs, render_matrix, write_atomic, ComplexPair, MultistartDoc, RecordFile, ResultDoc};
use qst_core::measurement::{normalize, simulate_counts};
use qst_core::param::SignPattern;
use qst_core::{
    equivalence_check, linear_invert, multistart, pauli_basis, EquivalenceReport, MeasurementRecord, MultistartConfig,
    ObjectiveModel, OptimizationResult, Solver, StopConfig, StopReason,
};
use serde::Serialize;

use crate::args::{CompareArgs, Method, ReconstructArgs, SimulateArgs, VerifyArgs};
use crate::error::{exit, CliError, CliResult};
use crate::inputs::{load_povm, load_record, load_state, parse_start};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Everything needed to repeat a run; embedded in every output document.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub input_path: Option<String>,
    pub seed: u64,
    pub solver: Option<String>,
    pub stop_config: Option<StopConfig>,
    pub output_path: Option<String>,
    pub tool_version: String,
    /// The full argument set of the command.
    pub options: serde_json::Value,
}

impl RunManifest {
    fn new<A: Serialize>(command: &str, args: &A, seed: u64, out: Option<&Path>) -> CliResult<Self> {
        Ok(Self {
            command: command.into(),
            input_path: None,
            seed,
            solver: None,
            stop_config: None,
            output_path: out.map(|p| p.display().to_string()),
            tool_version: TOOL_VERSION.into(),
            options: serde_json::to_value(args).map_err(qst_core::Error::from)?,
        })
    }
}

/// Serializes `doc` and writes it to `out` atomically, or to stdout.
fn emit<T: Serialize>(doc: &T, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc).map_err(qst_core::Error::from)? + "\n";
    match out {
        Some(path) => write_atomic(path, &text).map_err(|source| CliError::Unwritable {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn model_for(record: &MeasurementRecord, kind: qst_core::LikelihoodKind) -> CliResult<ObjectiveModel> {
    Ok(ObjectiveModel::new(kind, record.operators.clone(), normalize(record))?)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<i32> {
    let povm = load_povm(&args.povm)?;
    let rho = load_state(&args.state, povm[0].dim())?;
    let record = simulate_counts(&rho, &povm, args.shots, args.noise.into(), args.seed)?;
    let mut file = RecordFile::from_record(&record);
    let manifest = RunManifest::new("simulate", args, args.seed, args.out.as_deref())?;
    file.manifest = Some(serde_json::to_value(&manifest).map_err(qst_core::Error::from)?);
    emit(&file, args.out.as_deref())?;
    let labels: Vec<_> = record.operators.iter().map(|o| o.label()).collect();
    eprintln!("simulated {} outcomes [{}]: {:?}", record.len(), labels.join(" "), record.counts);
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
pub struct LinearDoc {
    pub matrix: Vec<Vec<ComplexPair>>,
    pub matrix_display: Vec<String>,
    pub stokes: Vec<f64>,
    pub is_physical: bool,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub purity: f64,
    pub condition_estimate: f64,
}

#[derive(Debug, Serialize)]
pub struct ReconstructionReport {
    pub manifest: RunManifest,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle: Option<ResultDoc>,
}

fn print_matrix(m: &CMatrix) {
    for row in render_matrix(m) {
        eprintln!("  {row}");
    }
}

pub fn reconstruct(args: &ReconstructArgs) -> CliResult<i32> {
    let record = load_record(&args.record)?;
    let dim = record.dim();
    let mut manifest = RunManifest::new("reconstruct", args, args.seed, args.out.as_deref())?;
    manifest.input_path = Some(args.record.clone());
    match args.method {
        Method::Linear => {
            let n_qubits = dim.trailing_zeros() as usize;
            if 1usize << n_qubits != dim {
                return Err(CliError::Input(format!("linear inversion needs a qubit system, got dimension {dim}")));
            }
            let rep = linear_invert(&normalize(&record), &record.operators, &pauli_basis(n_qubits)?)?;
            let m = rep.matrix.matrix();
            let doc = LinearDoc {
                matrix: matrix_to_pairs(m),
                matrix_display: render_matrix(m),
                stokes: rep.stokes.0.clone(),
                is_physical: rep.is_physical,
                min_eigenvalue: rep.min_eigenvalue,
                trace: rep.trace,
                purity: m.iter().map(|z| z.norm_sqr()).sum(),
                condition_estimate: rep.condition_estimate,
            };
            eprintln!("linear inversion ({}):", if rep.is_physical { "physical" } else { "not a density matrix" });
            print_matrix(m);
            eprintln!("  min eigenvalue {:.4e}, purity {:.4}", doc.min_eigenvalue, doc.purity);
            let report = ReconstructionReport { manifest, method: args.method, linear: Some(doc), mle: None };
            emit(&report, args.out.as_deref())?;
            Ok(exit::OK)
        }
        Method::Mle => {
            let model = model_for(&record, args.likelihood.into())?;
            let t0 = parse_start(&args.start, dim, args.seed)?;
            let cfg = args.stop.config(dim * dim, args.stop.grad_tol.unwrap_or(1e-6));
            cfg.validate();
            let solver = Solver::from(args.solver);
            manifest.solver = Some(solver.name());
            manifest.stop_config = Some(cfg.clone());
            log::info!("{} from {:?} with {cfg:?}", solver.name(), t0.as_slice());
            let res = solver.run(&model, &t0, &cfg)?;
            let doc = ResultDoc::new(&res)?;
            eprintln!("{} stopped: {} ({:?})", solver.name(), res.reason, res.reason);
            print_matrix(res.rho_final.matrix());
            eprintln!(
                "  F = {:.6e}, |grad F| = {:.4e}, purity {:.4}, {} iterations, {} evaluations",
                doc.f_final, doc.grad_norm, doc.purity, doc.iters, doc.fevals
            );
            let report = ReconstructionReport { manifest, method: args.method, linear: None, mle: Some(doc) };
            emit(&report, args.out.as_deref())?;
            Ok(if res.reason == StopReason::GradientTolerance { exit::OK } else { exit::NOT_STATIONARY })
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SectorReport {
    /// Diagonal sign pattern the solve was restricted to, if any.
    pub pattern: Option<String>,
    pub report: MultistartDoc,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub manifest: RunManifest,
    pub screen_tol: f64,
    pub rho_tol: f64,
    pub f_tol: f64,
    pub runs: Vec<SectorReport>,
    pub equivalence: EquivalenceReport,
}

pub fn verify_minima(args: &VerifyArgs) -> CliResult<i32> {
    if args.starts == 0 {
        return Err(CliError::Input("--starts must be at least 1".into()));
    }
    let record = load_record(&args.record)?;
    let dim = record.dim();
    let model = model_for(&record, args.likelihood.into())?;
    let screen_tol = args.stop.grad_tol.unwrap_or(1e-6);
    let mut cfg = args.stop.config(dim * dim, 1e-3 * screen_tol);
    cfg.step_tol = args.stop.step_tol.unwrap_or(screen_tol * screen_tol);
    cfg.fun_tol = args.stop.fun_tol.unwrap_or(screen_tol * screen_tol);

    let solvers: Vec<(Option<String>, Solver)> = if args.constrain_signs {
        SignPattern::all(dim)
            .into_iter()
            .map(|p| (Some(p.label()), Solver::ConstrainedSign(p)))
            .collect()
    } else {
        vec![(None, args.solver.into())]
    };

    let mut manifest = RunManifest::new("verify-minima", args, args.seed, args.out.as_deref())?;
    manifest.input_path = Some(args.record.clone());
    manifest.solver = Some(if args.constrain_signs { "constrained-sign".into() } else { solvers[0].1.name() });
    manifest.stop_config = Some(cfg.clone());

    let mut runs = Vec::new();
    let mut all: Vec<OptimizationResult> = Vec::new();
    for (k, (pattern, solver)) in solvers.into_iter().enumerate() {
        let seed = args.seed.wrapping_add((k * args.starts) as u64);
        let ms = MultistartConfig::new(args.starts, seed, solver, cfg.clone())
            .with_screen_tol(screen_tol)
            .with_dedup_tol(args.dedup_tol);
        log::info!("multistart: {} starts, seed {seed}, {}", args.starts, ms.solver.name());
        let rep = multistart(&model, &ms)?;
        eprintln!(
            "{}{} of {} runs stationary, {} distinct parameter vector(s), max state distance {:.3e}",
            pattern.as_ref().map(|p| format!("[{p}] ")).unwrap_or_default(),
            rep.retained_count,
            args.starts,
            rep.distinct_t_count,
            rep.max_pairwise_rho_distance
        );
        all.extend(rep.solutions.iter().cloned());
        runs.push(SectorReport { pattern, report: MultistartDoc::new(&rep)? });
    }

    let equivalence = equivalence_check(&all, args.rho_tol, args.f_tol);
    eprintln!(
        "all stationary points {}: max state distance {:.3e}, max objective spread {:.3e}",
        if equivalence.equivalent { "agree" } else { "DISAGREE" },
        equivalence.max_rho_distance,
        equivalence.max_f_spread
    );
    if let Some(best) = all.first() {
        print_matrix(best.rho_final.matrix());
    }
    let code = if equivalence.equivalent { exit::OK } else { exit::MINIMA_DISAGREE };
    let report = VerifyReport {
        manifest,
        screen_tol,
        rho_tol: args.rho_tol,
        f_tol: args.f_tol,
        runs,
        equivalence,
    };
    emit(&report, args.out.as_deref())?;
    Ok(code)
}

#[derive(Debug, Serialize)]
pub struct CompareRow {
    pub solver: String,
    pub f_final: f64,
    pub grad_norm: f64,
    pub purity: f64,
    pub iters: usize,
    pub fevals: usize,
    pub reason: StopReason,
    pub rho_display: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub manifest: RunManifest,
    pub start: Vec<f64>,
    pub rows: Vec<CompareRow>,
}

pub fn compare(args: &CompareArgs) -> CliResult<i32> {
    if args.solver.is_empty() {
        return Err(CliError::Input("no solvers given".into()));
    }
    let record = load_record(&args.record)?;
    let dim = record.dim();
    let model = model_for(&record, args.likelihood.into())?;
    let t0 = parse_start(&args.start, dim, args.seed)?;
    let cfg = args.stop.config(dim * dim, args.stop.grad_tol.unwrap_or(1e-6));
    cfg.validate();

    let mut manifest = RunManifest::new("compare", args, args.seed, args.out.as_deref())?;
    manifest.input_path = Some(args.record.clone());
    manifest.stop_config = Some(cfg.clone());
    let solvers: Vec<Solver> = args.solver.iter().map(|&s| s.into()).collect();
    manifest.solver = Some(solvers.iter().map(Solver::name).collect::<Vec<_>>().join(","));

    let mut rows = Vec::new();
    for solver in &solvers {
        log::info!("{} from {:?}", solver.name(), t0.as_slice());
        let res = solver.run(&model, &t0, &cfg)?;
        let doc = ResultDoc::new(&res)?;
        rows.push(CompareRow {
            solver: solver.name(),
            f_final: doc.f_final,
            grad_norm: doc.grad_norm,
            purity: doc.purity,
            iters: doc.iters,
            fevals: doc.fevals,
            reason: doc.reason,
            rho_display: doc.rho_display,
        });
    }
    eprintln!(
        "{:<18} {:>14} {:>12} {:>8} {:>7} {:>7}  reason",
        "solver", "F", "|grad F|", "purity", "iters", "fevals"
    );
    for r in &rows {
        eprintln!(
            "{:<18} {:>14.6e} {:>12.4e} {:>8.4} {:>7} {:>7}  {:?}",
            r.solver, r.f_final, r.grad_norm, r.purity, r.iters, r.fevals, r.reason
        );
    }
    let report = CompareReport { manifest, start: t0.into_vec(), rows };
    emit(&report, args.out.as_deref())?;
    Ok(exit::OK)
}
