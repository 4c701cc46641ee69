use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use smm_core::admm::{self, AdmmConfig};
use smm_core::alm::{self, AlmConfig, WarmStart};
use smm_core::data::{
    self, accuracy, confusion, gen_synthetic, load_dataset, load_model, save_dataset, save_model,
    Confusion, DatasetFormat, Model, SynthSpec,
};
use smm_core::model::default_classify_tol;
use smm_core::report::{Solution, SolveReport};
use smm_core::sieving::{self, InitialModel, PathConfig, PathResult};
use smm_core::{classify_samples, relobj, Dataset, Hyperparams};

use crate::output::{parse_reference, write_json, Environment, SolutionDump, SCHEMA};
use crate::{
    BenchArgs, Failure, FormatArg, GenArgs, PathArgs, PredictArgs, SolverArg, StrategyArg,
    TrainArgs, EXIT_NOT_CONVERGED, EXIT_OK,
};

type CmdResult = Result<u8, Failure>;

fn load(path: &Path) -> Result<Dataset, Failure> {
    load_dataset(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

fn io_err(path: &Path) -> impl Fn(smm_core::SmmError) -> Failure + '_ {
    move |e| Failure::io(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct GenSummary<'a> {
    schema: u32,
    command: &'static str,
    config: &'a SynthSpec,
    format: DatasetFormat,
    environment: Environment,
    train: PathBuf,
    test: PathBuf,
    w_true: PathBuf,
    n_train: usize,
    n_test: usize,
    train_positive_fraction: f64,
}

pub fn gen(a: &GenArgs) -> CmdResult {
    let spec = SynthSpec {
        n: a.n,
        p: a.p,
        q: a.q,
        r: a.r,
        noise_delta: a.noise,
        seed: a.seed,
        train_fraction: a.train_frac,
    };
    spec.validate()?;
    let env = Environment::current(Some(a.seed))?;
    let d = gen_synthetic(&spec)?;
    ensure_dir(&a.out)?;
    let (format, ext) = match a.format {
        FormatArg::Binary => (DatasetFormat::Binary, "bin"),
        FormatArg::Csv => (DatasetFormat::Csv, "csv"),
    };
    let train = a.out.join(format!("train.{ext}"));
    let test = a.out.join(format!("test.{ext}"));
    let w_true = a.out.join("w_true.model");
    save_dataset(&d.train, &train, format).map_err(io_err(&train))?;
    save_dataset(&d.test, &test, format).map_err(io_err(&test))?;
    save_model(&Model::new(d.w_true.clone(), 0.0)?, &w_true).map_err(io_err(&w_true))?;
    let summary = GenSummary {
        schema: SCHEMA,
        command: "gen",
        config: &spec,
        format,
        environment: env,
        train,
        test,
        w_true,
        n_train: d.train.n_samples(),
        n_test: d.test.n_samples(),
        train_positive_fraction: d.train.positive_fraction(),
    };
    let summary_path = a.out.join("gen.json");
    write_json(&summary_path, &summary)?;
    println!(
        "wrote {} train and {} test samples ({}x{}, rank {}, seed {}) to {}",
        summary.n_train,
        summary.n_test,
        a.p,
        a.q,
        a.r,
        a.seed,
        a.out.display()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Counts {
    support: usize,
    active_support: usize,
    non_support: usize,
    tol: f64,
}

fn counts(sol: &Solution, c: f64) -> Counts {
    let cls = classify_samples(&sol.dual.lambda, c, default_classify_tol(c));
    Counts {
        support: cls.support.len(),
        active_support: cls.active_support.len(),
        non_support: cls.non_support.len(),
        tol: cls.tol,
    }
}

#[derive(Serialize)]
struct TrainConfig<'a> {
    data: &'a Path,
    c: f64,
    tau: f64,
    solver: SolverArg,
    tol: f64,
    warm_start_iters: usize,
    reference: Option<f64>,
    alm: Option<AlmConfig>,
    admm: Option<AdmmConfig>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    schema: u32,
    command: &'static str,
    config: TrainConfig<'a>,
    environment: Environment,
    report: &'a SolveReport,
    classification: Counts,
    train_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    solution: Option<SolutionDump>,
}

fn alm_config(tol: f64, max_iter: Option<usize>, time_limit: Option<f64>) -> AlmConfig {
    let mut cfg = AlmConfig::with_tol(tol);
    if let Some(m) = max_iter {
        cfg.max_outer_iter = m;
    }
    cfg.time_limit = time_limit;
    cfg
}

fn admm_config(tol: Option<f64>, max_iter: Option<usize>, time_limit: Option<f64>) -> AdmmConfig {
    let mut cfg = AdmmConfig {
        kkt_tol: tol,
        time_limit,
        ..AdmmConfig::default()
    };
    if let Some(m) = max_iter {
        cfg.max_iter = m;
    }
    cfg
}

pub fn train(a: &TrainArgs) -> CmdResult {
    let hyper = Hyperparams::new(a.c, a.tau)?;
    if !(a.tol > 0.0) {
        return Err(Failure::usage("--tol must be positive"));
    }
    let reference = a.reference.as_deref().map(parse_reference).transpose()?;
    let env = Environment::current(None)?;
    let ds = load(&a.data)?;

    let (alm_cfg, admm_cfg) = match a.solver {
        SolverArg::Alm => (Some(alm_config(a.tol, a.max_iter, a.time_limit)), None),
        _ => (None, Some(admm_config(Some(a.tol), a.max_iter, a.time_limit))),
    };
    let init: Option<WarmStart> = if a.warm_start_iters > 0 {
        Some(admm::warm_start(
            &ds,
            &hyper,
            a.warm_start_iters,
            &AdmmConfig::default(),
        )?)
    } else {
        None
    };
    let mut sol = match a.solver {
        SolverArg::Alm => alm::solve(&ds, &hyper, alm_cfg.as_ref().unwrap(), init.as_ref())?,
        SolverArg::Ispadmm => {
            admm::solve_ispadmm(&ds, &hyper, admm_cfg.as_ref().unwrap(), init.as_ref())?
        }
        SolverArg::Sgs => {
            admm::solve_sgs_ispadmm(&ds, &hyper, admm_cfg.as_ref().unwrap(), init.as_ref())?
        }
    };
    if let Some(r) = reference {
        sol.report.relobj = Some(relobj(sol.report.primal_objective, r));
    }
    let model = Model::new(sol.primal.w.clone(), sol.primal.b)?;
    let train_accuracy = accuracy(&model, &ds)?;
    if let Some(path) = &a.model {
        save_model(&model, path).map_err(io_err(path))?;
    }
    let r = &sol.report;
    println!(
        "{} C={} tau={}: converged={} iters={} eta_kkt={:.3e} obj={:.10e} |SM|={} |ASM|={} rank={} acc={:.4} time={:.3}s",
        r.solver,
        a.c,
        a.tau,
        r.converged,
        r.iterations,
        r.eta_kkt,
        r.primal_objective,
        r.n_support,
        r.n_active_support,
        r.rank_w,
        train_accuracy,
        r.wall_time_s
    );
    if let Some(rel) = r.relobj {
        println!("relobj={rel:.3e}");
    }
    if let Some(path) = &a.report {
        let report = TrainReport {
            schema: SCHEMA,
            command: "train",
            config: TrainConfig {
                data: &a.data,
                c: a.c,
                tau: a.tau,
                solver: a.solver,
                tol: a.tol,
                warm_start_iters: a.warm_start_iters,
                reference,
                alm: alm_cfg,
                admm: admm_cfg,
            },
            environment: env,
            report: &sol.report,
            classification: counts(&sol, a.c),
            train_accuracy,
            solution: (!a.no_solution).then(|| SolutionDump::new(&sol.primal, &sol.dual)),
        };
        write_json(path, &report)?;
    }
    Ok(if sol.report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct PathPointOut {
    c: f64,
    converged: bool,
    eta_kkt: f64,
    primal_objective: f64,
    n_support: usize,
    n_active_support: usize,
    rank_w: usize,
    iterations: usize,
    sieving_rounds: usize,
    active_set_sizes: Vec<usize>,
    full_raw_kkt_max: f64,
    time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
}

#[derive(Serialize)]
struct PathReport<'a> {
    schema: u32,
    command: &'static str,
    config: &'a PathConfig,
    strategy: StrategyArg,
    warm_tol: Option<f64>,
    data: &'a Path,
    environment: Environment,
    init_time_s: f64,
    total_time_s: f64,
    points: Vec<PathPointOut>,
}

pub fn path(a: &PathArgs) -> CmdResult {
    let grid = sieving::c_grid(a.c_min, a.c_max, a.grid_points, a.log_scale)?;
    let mut cfg = PathConfig::new(grid, a.tau);
    cfg.initial = a.c0.map_or(InitialModel::AllSamples, InitialModel::SolveAt);
    cfg.eps = a.eps;
    cfg.eps_hat = a.eps_hat;
    cfg.d_max = a.dmax;
    cfg.validate()?;
    let env = Environment::current(None)?;
    let ds = load(&a.data)?;
    let result: PathResult = match a.strategy {
        StrategyArg::As => sieving::solve_path(&ds, &cfg)?,
        StrategyArg::Warm => sieving::solve_path_warm(&ds, &cfg, a.tol)?,
    };
    if let Some(dir) = &a.models_dir {
        ensure_dir(dir)?;
    }
    let mut points = Vec::with_capacity(result.points.len());
    let mut all_converged = true;
    println!(
        "{:>12} {:>6} {:>11} {:>18} {:>6} {:>5} {:>6} {:>9}",
        "C", "conv", "eta_kkt", "objective", "|SM|", "|ASM|", "rounds", "time_s"
    );
    for (i, pt) in result.points.iter().enumerate() {
        let r = &pt.solution.report;
        all_converged &= r.converged;
        let model = match &a.models_dir {
            Some(dir) => {
                let file = dir.join(format!("model_{i:03}.model"));
                save_model(&Model::new(pt.solution.primal.w.clone(), pt.solution.primal.b)?, &file)
                    .map_err(io_err(&file))?;
                Some(file)
            }
            None => None,
        };
        println!(
            "{:>12.6e} {:>6} {:>11.3e} {:>18.10e} {:>6} {:>5} {:>6} {:>9.3}",
            pt.c,
            r.converged,
            r.eta_kkt,
            r.primal_objective,
            r.n_support,
            r.n_active_support,
            pt.sieving_rounds,
            pt.time_s
        );
        points.push(PathPointOut {
            c: pt.c,
            converged: r.converged,
            eta_kkt: r.eta_kkt,
            primal_objective: r.primal_objective,
            n_support: r.n_support,
            n_active_support: r.n_active_support,
            rank_w: r.rank_w,
            iterations: r.iterations,
            sieving_rounds: pt.sieving_rounds,
            active_set_sizes: pt.active_set_sizes.clone(),
            full_raw_kkt_max: pt.full_raw_kkt.max(),
            time_s: pt.time_s,
            model,
        });
    }
    println!("total {:.3}s", result.total_time_s);
    if let Some(path) = &a.report {
        write_json(
            path,
            &PathReport {
                schema: SCHEMA,
                command: "path",
                config: &cfg,
                strategy: a.strategy,
                warm_tol: (a.strategy == StrategyArg::Warm).then_some(a.tol),
                data: &a.data,
                environment: env,
                init_time_s: result.init_time_s,
                total_time_s: result.total_time_s,
                points,
            },
        )?;
    }
    Ok(if all_converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Serialize)]
struct PredictReport<'a> {
    schema: u32,
    command: &'static str,
    model: &'a Path,
    data: &'a Path,
    environment: Environment,
    n_samples: usize,
    accuracy: f64,
    confusion: Confusion,
}

pub fn predict(a: &PredictArgs) -> CmdResult {
    let env = Environment::current(None)?;
    let model = load_model(&a.model).map_err(io_err(&a.model))?;
    let ds = load(&a.data)?;
    let acc = data::accuracy(&model, &ds)?;
    let conf = confusion(&model, &ds)?;
    println!("accuracy {acc:.6} ({} samples)", ds.n_samples());
    println!(
        "tp {} fp {} tn {} fn {}",
        conf.true_pos, conf.false_pos, conf.true_neg, conf.false_neg
    );
    if let Some(path) = &a.report {
        write_json(
            path,
            &PredictReport {
                schema: SCHEMA,
                command: "predict",
                model: &a.model,
                data: &a.data,
                environment: env,
                n_samples: ds.n_samples(),
                accuracy: acc,
                confusion: conf,
            },
        )?;
    }
    Ok(EXIT_OK)
}

/// Parses `C:tau,C:tau,…`.
pub fn parse_scenarios(s: &str) -> Result<Vec<Hyperparams>, Failure> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (c, tau) = t
                .split_once(':')
                .ok_or_else(|| Failure::usage(format!("scenario {t:?} is not C:tau")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Failure::usage(format!("scenario {t:?}: bad number {x:?}")))
            };
            Ok(Hyperparams::new(parse(c)?, parse(tau)?)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum RunStatus {
    Ok,
    Timeout,
    NotConverged,
}

#[derive(Serialize)]
struct BenchRow {
    c: f64,
    tau: f64,
    solver: SolverArg,
    status: RunStatus,
    relobj: f64,
    eta_kkt: f64,
    iterations: usize,
    time_s: f64,
    time_per_iter_s: f64,
}

#[derive(Serialize)]
struct BenchScenario {
    c: f64,
    tau: f64,
    reference_objective: f64,
    reference_eta_kkt: f64,
    reference_time_s: f64,
}

#[derive(Serialize)]
struct BenchConfig<'a> {
    data: Option<&'a Path>,
    synthetic: Option<SynthSpec>,
    eps: f64,
    reference_tol: f64,
    time_limit: f64,
    solvers: &'a [SolverArg],
}

#[derive(Serialize)]
struct BenchReport<'a> {
    schema: u32,
    command: &'static str,
    config: BenchConfig<'a>,
    environment: Environment,
    scenarios: Vec<BenchScenario>,
    rows: Vec<BenchRow>,
}

pub fn bench(a: &BenchArgs) -> CmdResult {
    let scenarios = parse_scenarios(&a.scenarios)?;
    if scenarios.is_empty() {
        return Err(Failure::usage("no scenarios given"));
    }
    if !(a.eps > 0.0 && a.reference_tol > 0.0 && a.time_limit > 0.0) {
        return Err(Failure::usage(
            "--eps, --reference-tol and --time-limit must be positive",
        ));
    }
    let (ds, synthetic) = match &a.data {
        Some(path) => (load(path)?, None),
        None => {
            let spec = SynthSpec {
                n: a.n,
                p: a.p,
                q: a.q,
                r: a.r,
                seed: a.seed,
                ..SynthSpec::default()
            };
            (gen_synthetic(&spec)?.train, Some(spec))
        }
    };
    let env = Environment::current(synthetic.as_ref().map(|s| s.seed))?;

    let mut rows = Vec::new();
    let mut refs = Vec::new();
    println!(
        "{:>6} {:>6} {:>8} {:>13} {:>10} {:>7} {:>9} {:>11}",
        "C", "tau", "solver", "status", "relobj", "iters", "time_s", "s/iter"
    );
    for hyper in &scenarios {
        let t0 = Instant::now();
        let reference = alm::solve(&ds, hyper, &AlmConfig::with_tol(a.reference_tol), None)?;
        let ref_obj = reference.report.primal_objective;
        refs.push(BenchScenario {
            c: hyper.c,
            tau: hyper.tau,
            reference_objective: ref_obj,
            reference_eta_kkt: reference.report.eta_kkt,
            reference_time_s: t0.elapsed().as_secs_f64(),
        });
        for &solver in &a.solvers {
            let stop = Some((ref_obj, a.eps));
            let t = Instant::now();
            let sol = match solver {
                SolverArg::Alm => {
                    let mut cfg = alm_config(a.reference_tol, None, Some(a.time_limit));
                    cfg.relobj_stop = stop;
                    alm::solve(&ds, hyper, &cfg, None)?
                }
                SolverArg::Ispadmm | SolverArg::Sgs => {
                    let mut cfg = admm_config(None, None, Some(a.time_limit));
                    cfg.relobj_stop = stop;
                    if solver == SolverArg::Ispadmm {
                        admm::solve_ispadmm(&ds, hyper, &cfg, None)?
                    } else {
                        admm::solve_sgs_ispadmm(&ds, hyper, &cfg, None)?
                    }
                }
            };
            let time_s = t.elapsed().as_secs_f64();
            let rel = relobj(sol.report.primal_objective, ref_obj);
            let status = if rel <= a.eps {
                RunStatus::Ok
            } else if time_s >= a.time_limit {
                RunStatus::Timeout
            } else {
                RunStatus::NotConverged
            };
            let iterations = sol.report.iterations;
            let row = BenchRow {
                c: hyper.c,
                tau: hyper.tau,
                solver,
                status,
                relobj: rel,
                eta_kkt: sol.report.eta_kkt,
                iterations,
                time_s,
                time_per_iter_s: time_s / iterations.max(1) as f64,
            };
            println!(
                "{:>6} {:>6} {:>8} {:>13} {:>10.2e} {:>7} {:>9.3} {:>11.3e}",
                row.c,
                row.tau,
                solver.name(),
                format!("{:?}", row.status),
                row.relobj,
                row.iterations,
                row.time_s,
                row.time_per_iter_s
            );
            rows.push(row);
        }
    }
    let failed = rows.iter().any(|r| r.status == RunStatus::NotConverged);
    if let Some(path) = &a.report {
        write_json(
            path,
            &BenchReport {
                schema: SCHEMA,
                command: "bench",
                config: BenchConfig {
                    data: a.data.as_deref(),
                    synthetic,
                    eps: a.eps,
                    reference_tol: a.reference_tol,
                    time_limit: a.time_limit,
                    solvers: &a.solvers,
                },
                environment: env,
                scenarios: refs,
                rows,
            },
        )?;
    }
    Ok(if failed { EXIT_NOT_CONVERGED } else { EXIT_OK })
}
