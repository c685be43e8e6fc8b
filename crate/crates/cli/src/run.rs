use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::Path;

use dplbfgs::cluster::{ClusterSim, CommLedger};
use dplbfgs::datasets::{parse_libsvm, synthetic, LabeledDataset};
use dplbfgs::problems::{H0Mode, L1Logistic, Problem, SquaredHingeDual};
use dplbfgs::solver::{
    bda_run, catalyst_run, dplbfgs_run, reference_solve, sparsa_direct_run, BdaConfig, CatalystConfig, CatalystPreset,
    RunOutcome, SolverConfig, SparsaDirectConfig, StopReason, StoppingRule, Variant,
};
use dplbfgs::Error;

use crate::args::{
    Algorithm, Cli, Command, DataArgs, GenerateArgs, GenerateKind, PresetArg, ProblemKind, ReferenceArgs, RunArgs,
    VariantArg,
};
use crate::format::{sci, trace};
use crate::Failure;

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Reference(args) => reference(&args),
        Command::Generate(args) => generate(&args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::data(format!("cannot write to stdout: {e}")))
        }
    }
}

fn load(args: &DataArgs) -> Result<LabeledDataset, Failure> {
    if args.workers == 0 {
        return Err(Failure::usage("--workers must be at least 1"));
    }
    if !(args.c > 0.0 && args.c.is_finite()) {
        return Err(Failure::usage(format!("--c-param must be positive, got {}", args.c)));
    }
    let file =
        File::open(&args.data).map_err(|e| Failure::data(format!("cannot open {}: {e}", args.data.display())))?;
    parse_libsvm(BufReader::new(file), None).map_err(|e| Failure::data(format!("{}: {e}", args.data.display())))
}

/// Errors from building a problem: bad sizes are usage errors, the rest
/// are data errors.
fn build_failure(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::Partition(_) => Failure::usage(e.to_string()),
        _ => Failure::data(e.to_string()),
    }
}

fn read_reference(source: &str) -> Result<f64, Failure> {
    let path = Path::new(source);
    if !path.exists() {
        return source.parse().map_err(|_| Failure::data(format!("reference {source} is neither a file nor a number")));
    }
    let text = fs::read_to_string(path).map_err(|e| Failure::data(format!("cannot read {source}: {e}")))?;
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| Failure::data(format!("{source} holds no reference objective")))
}

fn stopping(args: &RunArgs) -> Result<StoppingRule, Failure> {
    let reference = args.ref_obj.as_deref().map(read_reference).transpose()?;
    if args.target.is_some() && reference.is_none() {
        return Err(Failure::usage("--target needs --ref-obj"));
    }
    Ok(StoppingRule { reference, target_rel_err: args.target, stationarity_tol: None })
}

fn variant(args: &RunArgs) -> Result<Variant, Failure> {
    let v = match (args.algorithm, args.variant) {
        (Algorithm::Dplbfgs, None | Some(VariantArg::Ls)) | (Algorithm::DplbfgsLs, None | Some(VariantArg::Ls)) => {
            Variant::LineSearch
        }
        (Algorithm::Dplbfgs, Some(VariantArg::Tr)) | (Algorithm::DplbfgsTr, None | Some(VariantArg::Tr)) => {
            Variant::TrustRegion
        }
        (Algorithm::DplbfgsLs | Algorithm::DplbfgsTr, Some(_)) => {
            return Err(Failure::usage("--variant contradicts --algorithm"));
        }
        _ => unreachable!("only DPLBFGS algorithms reach here"),
    };
    Ok(v)
}

fn solver_config(args: &RunArgs, stopping: StoppingRule, dual: bool) -> Result<SolverConfig, Failure> {
    let variant = variant(args)?;
    let mut cfg = SolverConfig {
        variant,
        memory: args.memory,
        max_iters: args.max_iter,
        stopping,
        seed: args.seed,
        exact_linesearch: dual,
        h0: if dual { H0Mode::BlockDiagonal } else { H0Mode::ScaledIdentity },
        ..SolverConfig::default()
    };
    cfg.sparsa.eps1 = args.eps1;
    cfg.sparsa.max_iters = args.max_sparsa;
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(cfg)
}

fn finish(outcome: RunOutcome, comm_dim: usize, out: Option<&Path>) -> Result<(), Failure> {
    emit(out, &trace(&outcome, comm_dim))?;
    match outcome.stop {
        StopReason::Failed(e) => Err(Failure::solver(format!("solver aborted: {e}"))),
        _ => Ok(()),
    }
}

fn run_generic<P: Problem>(problem: &P, args: &RunArgs, stopping: StoppingRule, dual: bool) -> Result<(), Failure> {
    let cluster = ClusterSim::new(args.data.workers).map_err(|e| Failure::usage(e.to_string()))?;
    let mut ledger = CommLedger::new();
    let outcome = match args.algorithm {
        Algorithm::SparsaDirect => {
            let cfg = SparsaDirectConfig { max_iters: args.max_iter, stopping, ..SparsaDirectConfig::default() };
            sparsa_direct_run(problem, &cfg, &cluster, &mut ledger)
        }
        _ => {
            let cfg = solver_config(args, stopping, dual)?;
            dplbfgs_run(problem, &cfg, &cluster, &mut ledger)
        }
    }
    .map_err(|e| Failure::solver(e.to_string()))?;
    finish(outcome, problem.comm_dim(), args.out.as_deref())
}

fn preset(p: PresetArg) -> CatalystPreset {
    match p {
        PresetArg::News => CatalystPreset::News,
        PresetArg::Epsilon => CatalystPreset::Epsilon,
        PresetArg::Webspam => CatalystPreset::Webspam,
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    if args.memory == 0 {
        return Err(Failure::usage("--memory must be at least 1"));
    }
    let block_only = matches!(args.algorithm, Algorithm::Bda | Algorithm::BdaCatalyst);
    if block_only && args.data.problem != ProblemKind::DualSqhingeSvm {
        return Err(Failure::usage("bda and bda-catalyst need --problem dual-sqhinge-svm"));
    }
    let quasi_newton = matches!(args.algorithm, Algorithm::Dplbfgs | Algorithm::DplbfgsLs | Algorithm::DplbfgsTr);
    if args.variant.is_some() && !quasi_newton {
        return Err(Failure::usage("--variant applies to DPLBFGS only"));
    }
    let catalyst_flags = args.kappa.is_some() || args.preset.is_some() || args.warmup.is_some() || args.inner.is_some();
    if catalyst_flags && args.algorithm != Algorithm::BdaCatalyst {
        return Err(Failure::usage("--kappa, --preset, --warmup and --inner apply to bda-catalyst only"));
    }
    let stopping = stopping(args)?;
    let data = load(&args.data)?;
    match args.data.problem {
        ProblemKind::PrimalL1Logistic => {
            let problem = L1Logistic::new(&data, args.data.c, args.data.workers).map_err(build_failure)?;
            run_generic(&problem, args, stopping, false)
        }
        ProblemKind::DualSqhingeSvm => {
            let problem = SquaredHingeDual::new(&data, args.data.c, args.data.workers).map_err(build_failure)?;
            match args.algorithm {
                Algorithm::Bda => {
                    let cluster = ClusterSim::new(args.data.workers).map_err(|e| Failure::usage(e.to_string()))?;
                    let mut ledger = CommLedger::new();
                    let cfg = BdaConfig { seed: args.seed, max_iters: args.max_iter, stopping, ..BdaConfig::default() };
                    let outcome =
                        bda_run(&problem, &cfg, &cluster, &mut ledger).map_err(|e| Failure::solver(e.to_string()))?;
                    finish(outcome, problem.comm_dim(), args.out.as_deref())
                }
                Algorithm::BdaCatalyst => {
                    let workers = args.data.workers;
                    let mut cfg = match (args.kappa, args.preset) {
                        (Some(_), Some(_)) => return Err(Failure::usage("give either --kappa or --preset")),
                        (Some(k), None) => CatalystConfig::new(&problem, k, workers),
                        (None, Some(p)) => CatalystConfig::with_preset(&problem, preset(p), workers),
                        (None, None) => return Err(Failure::usage("bda-catalyst needs --kappa or --preset")),
                    };
                    cfg.warmup = args.warmup.unwrap_or(cfg.warmup);
                    cfg.inner_iters = args.inner.unwrap_or(cfg.inner_iters);
                    cfg.max_iters = args.max_iter;
                    cfg.seed = args.seed;
                    cfg.stopping = stopping;
                    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
                    let cluster = ClusterSim::new(workers).map_err(|e| Failure::usage(e.to_string()))?;
                    let mut ledger = CommLedger::new();
                    let outcome = catalyst_run(&problem, &cfg, &cluster, &mut ledger)
                        .map_err(|e| Failure::solver(e.to_string()))?;
                    finish(outcome, problem.comm_dim(), args.out.as_deref())
                }
                _ => run_generic(&problem, args, stopping, true),
            }
        }
    }
}

fn reference(args: &ReferenceArgs) -> Result<(), Failure> {
    let data = load(&args.data)?;
    let cluster = ClusterSim::new(args.data.workers).map_err(|e| Failure::usage(e.to_string()))?;
    let text = match args.data.problem {
        ProblemKind::PrimalL1Logistic => {
            let problem = L1Logistic::new(&data, args.data.c, args.data.workers).map_err(build_failure)?;
            let sol =
                reference_solve(&problem, args.iterations, &cluster).map_err(|e| Failure::solver(e.to_string()))?;
            format!("{}\n", sci(sol.objective, 14))
        }
        ProblemKind::DualSqhingeSvm => {
            let problem = SquaredHingeDual::new(&data, args.data.c, args.data.workers).map_err(build_failure)?;
            let sol =
                reference_solve(&problem, args.iterations, &cluster).map_err(|e| Failure::solver(e.to_string()))?;
            let mut scratch = CommLedger::new();
            let state =
                problem.init_state(&sol.x, &cluster, &mut scratch).map_err(|e| Failure::solver(e.to_string()))?;
            let w = problem.primal_recovery(&state);
            let primal =
                problem.primal_objective(&w, &cluster, &mut scratch).map_err(|e| Failure::solver(e.to_string()))?;
            format!("{}\n# primal {}\n", sci(sol.objective, 14), sci(primal, 14))
        }
    };
    emit(args.out.as_deref(), &text)
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    if args.instances == 0 || args.features == 0 {
        return Err(Failure::usage("--instances and --features must be positive"));
    }
    let data = match args.kind {
        GenerateKind::Logistic => {
            if !(args.density > 0.0 && args.density <= 1.0) {
                return Err(Failure::usage("--density must lie in (0, 1]"));
            }
            synthetic::logistic(args.instances, args.features, args.density, args.seed)
        }
        GenerateKind::Correlated => {
            synthetic::correlated(args.instances, args.features, args.factors, args.strength, args.seed)
        }
    };
    emit(args.out.as_deref(), &data.to_libsvm_string())
}
