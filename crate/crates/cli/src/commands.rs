use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use sptucker::dense::{dense_hooi, densify, DenseCaps, DenseMatrix};
use sptucker::engine::{init_factors, Executor, HooiConfig, HooiEngine, Stopping};
use sptucker::metrics::{compute_metrics, predict_vs_measured, MetricsReport, CSV_HEADER};
use sptucker::model::{write_model, ModelManifest, MANIFEST_SCHEMA};
use sptucker::schemes::{load_external_policy, write_policies, CoarseVariant, DistributionScheme, SchemeKind};
use sptucker::tensor::SparseTensor;
use sptucker::tns::read_tns_file;

use crate::{CompareArgs, DecomposeArgs, DistributeArgs, OracleArgs, SchemeArgs};

pub const RUN_SCHEMA: &str = "sptucker.run/1";
pub const ORACLE_SCHEMA: &str = "sptucker.oracle/1";
const ORACLE_FIT_TOL: f64 = 1e-8;

#[derive(Debug)]
pub enum CliError {
    Core { context: Option<PathBuf>, error: sptucker::Error },
    Io { path: PathBuf, error: std::io::Error },
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use sptucker::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Numerical(_) => 5,
            CliError::Core { error, .. } => match error {
                E::Config(_) | E::Shape(_) | E::ModeOutOfRange { .. } | E::CapExceeded { .. } => 2,
                E::Parse { .. } | E::Domain { .. } | E::PolicyLength { .. } | E::RankOutOfRange { .. } => 3,
                E::Io { .. } => 4,
                E::MissingFactorRow { .. } | E::Json(_) => 1,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core { context: Some(p), error } => write!(f, "{}: {error}", p.display()),
            CliError::Core { context: None, error } => write!(f, "{error}"),
            CliError::Io { path, error } => write!(f, "{}: {error}", path.display()),
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Numerical(m) => write!(f, "numerical check failed: {m}"),
        }
    }
}

impl From<sptucker::Error> for CliError {
    fn from(error: sptucker::Error) -> Self {
        CliError::Core { context: None, error }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn in_file<T>(path: &Path, r: sptucker::Result<T>) -> Result<T> {
    r.map_err(|error| CliError::Core {
        context: Some(path.to_path_buf()),
        error,
    })
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|error| CliError::Io {
        path: path.to_path_buf(),
        error,
    })
}

fn to_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

fn load_tensor(path: &Path) -> Result<SparseTensor> {
    in_file(path, read_tns_file(path))
}

fn tensor_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// `k` for every mode, or one comma-separated value per mode.
pub fn parse_core(spec: &str, order: usize) -> Result<Vec<usize>> {
    let values = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>().ok().filter(|&k| k >= 1))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Config(format!("--core expects positive integers, got {spec:?}")))?;
    match values.len() {
        1 => Ok(vec![values[0]; order]),
        n if n == order => Ok(values),
        n => Err(CliError::Config(format!("--core lists {n} lengths for a {order}-mode tensor"))),
    }
}

fn check_ranks(ranks: usize) -> Result<()> {
    if ranks == 0 {
        return Err(CliError::Config("-P must be at least 1".into()));
    }
    Ok(())
}

fn build(kind: SchemeKind, t: &SparseTensor, ranks: usize, seed: u64, variant: CoarseVariant) -> Result<DistributionScheme> {
    check_ranks(ranks)?;
    Ok(match kind {
        SchemeKind::Coarse => DistributionScheme::coarse(t, ranks, seed, variant)?,
        other => DistributionScheme::build(other, t, ranks, seed)?,
    })
}

fn build_scheme(args: &SchemeArgs, t: &SparseTensor) -> Result<DistributionScheme> {
    check_ranks(args.ranks)?;
    match (args.scheme, &args.policy_file) {
        (SchemeKind::External, Some(path)) => {
            let file = File::open(path).map_err(|error| CliError::Io {
                path: path.clone(),
                error,
            })?;
            in_file(path, load_external_policy(BufReader::new(file), t, args.ranks))
        }
        (SchemeKind::External, None) => Err(CliError::Config("--scheme external needs --policy-file".into())),
        (_, Some(_)) => Err(CliError::Config("--policy-file is only used with --scheme external".into())),
        (kind, None) => build(kind, t, args.ranks, args.seed, args.coarse_variant),
    }
}

fn print_summary(report: &MetricsReport) {
    println!(
        "scheme {} on {} ranks, nnz {}, dims {:?}{}",
        report.scheme,
        report.ranks,
        report.nnz,
        report.dims,
        report.grid.as_ref().map(|g| format!(", grid {g}")).unwrap_or_default()
    );
    for m in &report.modes {
        println!(
            "mode {}: Emax {} Rsum {} Rmax {} nonempty {} of {} (E-imbalance {:.3})",
            m.mode, m.emax, m.rsum, m.rmax, m.nonempty, m.mode_len, m.e_imbalance
        );
        if let Some(v) = m.theorem1 {
            let mark = |ok: bool| if ok { "ok" } else { "VIOLATED" };
            println!(
                "  theorem 1: Emax {} <= {} {}, Rsum {} <= {} {}, Rmax {} <= {} {}",
                m.emax,
                v.emax_bound,
                mark(v.emax_holds),
                m.rsum,
                v.rsum_bound,
                mark(v.rsum_holds),
                m.rmax,
                v.rmax_bound,
                mark(v.rmax_holds)
            );
        }
    }
}

fn metrics_csv(name: &str, reports: &[MetricsReport]) -> String {
    let mut body = String::from(CSV_HEADER);
    for r in reports {
        r.csv_rows(name, &mut body);
    }
    body
}

pub fn distribute(args: &DistributeArgs) -> Result<()> {
    let t = load_tensor(&args.scheme.input)?;
    let core = parse_core(&args.scheme.core, t.order())?;
    let start = Instant::now();
    let scheme = build_scheme(&args.scheme, &t)?;
    let elapsed = start.elapsed();
    let report = compute_metrics(&t, &scheme, &core)?;
    print_summary(&report);
    if let Some(held) = report.theorem1_holds() {
        println!("theorem 1 verdicts: {}", if held { "all hold" } else { "VIOLATED" });
    }
    println!("distribution time: {:.3} ms", elapsed.as_secs_f64() * 1e3);
    if let Some(path) = &args.policy_out {
        let mut buf = Vec::new();
        write_policies(scheme.policies(), &mut buf).expect("writing to memory");
        fs::write(path, buf).map_err(|error| CliError::Io {
            path: path.clone(),
            error,
        })?;
    }
    if let Some(path) = &args.report {
        write_text(path, &(report.to_json()? + "\n"))?;
    }
    if let Some(path) = &args.csv {
        write_text(path, &metrics_csv(&tensor_name(&args.scheme.input), &[report]))?;
    }
    Ok(())
}

pub fn decompose(args: &DecomposeArgs) -> Result<()> {
    if args.invocations == 0 {
        return Err(CliError::Config("--invocations must be at least 1".into()));
    }
    let t = load_tensor(&args.scheme.input)?;
    let core = parse_core(&args.scheme.core, t.order())?;
    let scheme = build_scheme(&args.scheme, &t)?;
    let metrics = compute_metrics(&t, &scheme, &core)?;
    let config = HooiConfig {
        budget: args.lanczos,
        update: args.update,
        stopping: match args.fit_tol {
            Some(tol) => Stopping::FitDelta {
                tol,
                max: args.invocations,
            },
            None => Stopping::Invocations(args.invocations),
        },
        ..HooiConfig::new(core.clone(), args.scheme.seed)
    };
    let init = init_factors(t.dims(), &core, args.scheme.seed)?;
    let start = Instant::now();
    let engine = HooiEngine::new(&t, &scheme, config, Executor::pooled(args.threads)?)?;
    let run = engine.run(init.clone())?;
    let elapsed = start.elapsed();
    let reconciliation = predict_vs_measured(&metrics, &run.ledger)?;

    let mut problems = Vec::new();
    for r in &run.reports {
        for (n, f) in r.flags.iter().enumerate() {
            if f.raised() {
                problems.push(format!(
                    "invocation {} mode {}: {} restarts, {} padded columns",
                    r.invocation,
                    n + 1,
                    f.breakdown_restarts,
                    f.padded_columns
                ));
            }
        }
    }
    let oracle = if args.oracle_check {
        let caps = DenseCaps::from_env()?;
        let d = densify(&t, &caps)?;
        let dense_init: Vec<DenseMatrix> = init.iter().map(DenseMatrix::from).collect();
        let reference = dense_hooi(&d, &core, &dense_init, run.fit_history.len(), &caps)?;
        let delta = run
            .fit_history
            .iter()
            .zip(&reference.fit_history)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let ok = delta <= ORACLE_FIT_TOL;
        if !ok {
            problems.push(format!("fit differs from the dense reference by {delta:e}"));
        }
        println!("oracle check: max fit delta {delta:e} ({})", if ok { "ok" } else { "FAILED" });
        Some(json!({
            "fit_history": reference.fit_history,
            "max_fit_delta": delta,
            "tolerance": ORACLE_FIT_TOL,
            "within_tolerance": ok,
        }))
    } else {
        None
    };

    print_summary(&metrics);
    for (i, f) in run.fit_history.iter().enumerate() {
        println!("invocation {}: fit {f:.6e}", i + 1);
    }
    println!(
        "reconciliation: {}",
        if reconciliation.all_exact() { "all predictions exact" } else { "MISMATCH" }
    );
    println!("decomposition time: {:.3} ms", elapsed.as_secs_f64() * 1e3);

    if let Some(dir) = &args.model_dir {
        let manifest = ModelManifest {
            schema: MANIFEST_SCHEMA.into(),
            dims: t.dims().to_vec(),
            core: core.clone(),
            scheme: scheme.kind.to_string(),
            ranks: scheme.ranks(),
            seed: args.scheme.seed,
            invocations: run.fit_history.len(),
            fit_history: run.fit_history.clone(),
        };
        write_model(dir, &run.model, &manifest)?;
    }
    if let Some(path) = &args.report {
        let ledger: Value = serde_json::from_str(&run.ledger.to_json().map_err(sptucker::Error::from)?)
            .map_err(sptucker::Error::from)?;
        let report = json!({
            "schema": RUN_SCHEMA,
            "tensor": tensor_name(&args.scheme.input),
            "config": {
                "ranks": scheme.ranks(),
                "core": core,
                "scheme": scheme.kind,
                "seed": args.scheme.seed,
                "invocations": args.invocations,
                "lanczos": args.lanczos,
                "update": args.update,
            },
            "fit_history": run.fit_history,
            "final_fit": run.final_fit(),
            "invocations": run.reports,
            "flags_raised": run.flags_raised(),
            "metrics": metrics,
            "ledger": ledger,
            "reconciliation": reconciliation,
            "oracle": oracle,
        });
        write_text(path, &to_json(&report))?;
    }
    if let Some(path) = &args.csv {
        write_text(path, &metrics_csv(&tensor_name(&args.scheme.input), &[metrics]))?;
    }
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("warning: {p}");
        }
        if args.strict {
            return Err(CliError::Numerical(problems.join("; ")));
        }
    }
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let mut body = String::from(CSV_HEADER);
    for input in &args.input {
        let t = load_tensor(input)?;
        let core = parse_core(&args.core, t.order())?;
        let name = tensor_name(input);
        for &ranks in &args.ranks {
            for &kind in &args.schemes {
                if kind == SchemeKind::External {
                    return Err(CliError::Config("compare does not take external policies".into()));
                }
                let scheme = build(kind, &t, ranks, args.seed, args.coarse_variant)?;
                compute_metrics(&t, &scheme, &core)?.csv_rows(&name, &mut body);
            }
        }
    }
    match &args.csv {
        Some(path) => write_text(path, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    if args.invocations == 0 {
        return Err(CliError::Config("--invocations must be at least 1".into()));
    }
    let t = load_tensor(&args.input)?;
    let core = parse_core(&args.core, t.order())?;
    let caps = DenseCaps::from_env()?;
    let d = densify(&t, &caps)?;
    let init: Vec<DenseMatrix> = init_factors(t.dims(), &core, args.seed)?.iter().map(DenseMatrix::from).collect();
    let out = dense_hooi(&d, &core, &init, args.invocations, &caps)?;
    for (i, f) in out.fit_history.iter().enumerate() {
        println!("invocation {}: fit {f:.6e}", i + 1);
    }
    if let Some(path) = &args.report {
        let report = json!({
            "schema": ORACLE_SCHEMA,
            "tensor": tensor_name(&args.input),
            "core": core,
            "seed": args.seed,
            "fit_history": out.fit_history,
            "singular_values": out.singular_values,
        });
        write_text(path, &to_json(&report))?;
    }
    Ok(())
}
