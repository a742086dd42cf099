//! Command-line front end. Every command writes one artifact (CSV or JSON)
//! to `--out` or standard output and a one-line summary to standard output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::contour::{self, ContourSpec};
use crate::error::{LabError, Result};
use crate::generator;
use crate::lab::{self, GeneratorSequence};
use crate::linalg::{self, c, CMatrix};
use crate::operator::{self, parse_complex, parse_real, MatrixFile, OperatorHandle, OperatorSource};
use crate::report::{format_sci, CheckReport, ConvergenceTable};
use crate::resolvent::{self, PseudoResolventFamily};
use crate::semigroup::{self, ChernoffFamily, EvalMethod, LimitMethod, LimitProblem, SemigroupEvaluator};
use crate::spectral::{self, MultisetMatch};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const THREADS_ENV: &str = "SEMIGROUP_LAB_THREADS";

/// Each library operation and a command line that exercises it.
pub const COVERAGE: &[(&str, &str)] = &[
    ("make_operator", "expm --op zero:n=3 --t 5 --method taylor"),
    ("operator_norm", "check operator --op rotation2"),
    ("spectrum", "check operator --op jordan:lambda=-1,n=3"),
    ("estimate_growth_envelope", "check operator --op random_dissipative:n=6"),
    ("resolvent", "resolvent --op diag:-1,-2 --lambda 1,2+i"),
    ("check_resolvent_identity", "check resolvent-identity --op random_dissipative:n=6 --lambda 1+i --mu 2"),
    ("neumann_resolvent", "resolvent --op nilpotent_shift:n=3 --lambda 1 --method neumann"),
    ("check_pseudo_resolvent", "check pseudo-resolvent --op diag:-1,-2"),
    ("check_hille_yosida_bounds", "check hille-yosida --op laplacian1d:n=6,h=1"),
    ("expm_oracle", "expm --op rotation2 --t 0.5,1"),
    ("expm_taylor", "expm --op rotation2 --t 1 --method taylor"),
    ("yosida_generator", "expm --op diag:-1,-2 --t 1 --method yosida --lambda 64"),
    ("yosida_semigroup_error", "converge --method yosida --op diag:-1,-2 --t 0.5,1 --n 8,16,32,64"),
    ("exp_formula", "expm --op diag:-1 --t 1 --method exp-formula --n 10"),
    ("euler_product", "converge --method euler --op diag:-1 --t 1 --n 10,20,40"),
    ("lie_trotter", "converge --method trotter --op dense:0,1;0,0 --op2 dense:0,0;1,0 --t 1 --n 4,8,16,32"),
    ("chernoff_product", "expm --op rotation2 --t 1 --method chernoff --n 32"),
    ("chernoff_lemma_bound", "check chernoff-lemma --op laplacian1d:n=6,h=1 --t 0.1 --n 8"),
    ("taylor_remainder_check", "check taylor-remainder --op jordan:lambda=-1,n=3 --t 1 --n 3"),
    ("converge_table", "converge --method exp-formula --op diag:-1 --t 1 --n 10,20,40,80"),
    ("dunford_exp", "dunford --op jordan:lambda=-1,n=3 --t 1 --contour circle:r=3,n=64,c=-1"),
    ("bromwich_exp", "bromwich --op diag:-1,-2 --t 1"),
    ("bromwich_time_integral", "bromwich --op diag:-1,-2 --t 1 --time-integral"),
    ("b_lambda", "check b-lambda --op rotation2 --lambda 2 --t 1"),
    ("check_dissipative", "check dissipative --op rotation2"),
    ("check_lumer_phillips", "check lumer-phillips --op laplacian1d:n=16,h=0.0588"),
    ("check_contraction_hy", "check contraction-hy --op laplacian1d:n=8,h=0.1111"),
    ("check_sectorial", "check sectorial --op laplacian1d:n=32,h=0.0303"),
    ("check_differentiable_identities", "check differentiable --op diag:-1,-2 --t 1 --n 3"),
    ("check_commuting_bounded", "check commuting --op nilpotent_shift:n=2 --op2 diag:1,2"),
    ("spectral_mapping_check", "spectrum-map --op jordan:lambda=-1,n=3 --t 2"),
    ("derivative_spectral_mapping_check", "spectrum-map --op rotation2 --t 3.14159 --n 2"),
    ("resolvent_spectrum_check", "spectrum-map --op diag:1,3 --t 1 --lambda 5"),
    ("resolvent_convergence_table", "lab trotter-kato --family perturb:p=1"),
    ("semigroup_convergence_table", "lab trotter-kato --family yosida"),
    ("check_tk_equivalence", "lab trotter-kato --family perturb:p=2,seed=2"),
    ("bridge_identity_check", "lab bridge --op random_dissipative:n=5,seed=9 --op2 random_dissipative:n=5,seed=10 --lambda 1+0.5i --t 0.8"),
];

#[derive(Parser, Debug)]
#[command(name = "semigroup-lab", version, about = "Numerical laboratory for operator semigroups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Artifact path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for random generators and probe vectors.
    #[arg(long, global = true, default_value_t = operator::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OpArgs {
    /// Operator spec (`diag:-1,-2`, `laplacian1d:n=16,h=0.0588`, `file:m.json`, ...).
    #[arg(long)]
    pub op: Option<String>,
    /// Second operator: `A2` for trotter, `B` for bridge, `F` for commuting.
    #[arg(long)]
    pub op2: Option<String>,
    /// Comma-separated times.
    #[arg(long)]
    pub t: Option<String>,
    /// Comma-separated counts (products, shifts or orders).
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub method: Option<String>,
    /// Comma-separated complex shifts such as `1`, `2+i`, `1+0.5i`.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub quad: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate e^{tA} with a chosen method.
    Expm(OpArgs),
    /// Resolvent norms and conditioning at shifts.
    Resolvent(OpArgs),
    /// Convergence table of a limit formula.
    Converge(OpArgs),
    /// Run a structural check; exit 2 when it fails.
    Check {
        #[arg(value_enum)]
        kind: CheckKind,
        #[command(flatten)]
        args: OpArgs,
    },
    /// Spectral mapping matches.
    SpectrumMap(OpArgs),
    /// Inverse Laplace transform along a vertical line.
    Bromwich {
        #[command(flatten)]
        args: OpArgs,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        /// Integrate `int_0^t T(s)x ds` for a seeded probe instead.
        #[arg(long)]
        time_integral: bool,
    },
    /// Cauchy integral over a closed contour.
    Dunford {
        #[command(flatten)]
        args: OpArgs,
        /// `circle:r=3,n=64[,c=-1]`; defaults to a circle enclosing the spectrum.
        #[arg(long)]
        contour: Option<String>,
    },
    /// Convergence experiments.
    Lab {
        #[arg(value_enum)]
        experiment: LabExperiment,
        #[command(flatten)]
        args: OpArgs,
        /// `perturb:p=1,seed=2`, `yosida`, `constant`, `adversarial`, `laplacian-refine:levels=5`.
        #[arg(long)]
        family: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Operator,
    ResolventIdentity,
    PseudoResolvent,
    HilleYosida,
    Dissipative,
    LumerPhillips,
    ContractionHy,
    Sectorial,
    Differentiable,
    Commuting,
    ChernoffLemma,
    TaylorRemainder,
    BLambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LabExperiment {
    TrotterKato,
    Bridge,
}

/// What a command produced.
struct Outcome {
    artifact: String,
    summary: String,
    pass: bool,
}

impl Outcome {
    fn ok(artifact: String, summary: String) -> Self {
        Outcome { artifact, summary, pass: true }
    }
}

/// Parse `args` (including the program name) and execute, writing summaries
/// to `stdout`. Returns the process exit code.
pub fn run_with<I, T, W>(args: I, stdout: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &outcome.artifact).map_err(LabError::from),
                None => stdout.write_all(outcome.artifact.as_bytes()).map_err(LabError::from),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
            let _ = writeln!(stdout, "{}", outcome.summary);
            if outcome.pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock())
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            // the global pool can only be built once per process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let seed = cli.seed;
    let fmt = cli.format;
    match &cli.command {
        Command::Expm(args) => cmd_expm(args, seed, fmt.unwrap_or(Format::Json)),
        Command::Resolvent(args) => cmd_resolvent(args, seed, fmt.unwrap_or(Format::Json)),
        Command::Converge(args) => cmd_converge(args, seed, fmt.unwrap_or(Format::Csv)),
        Command::Check { kind, args } => cmd_check(*kind, args, seed, fmt.unwrap_or(Format::Json)),
        Command::SpectrumMap(args) => cmd_spectrum_map(args, seed, fmt.unwrap_or(Format::Json)),
        Command::Bromwich { args, a, y, nodes, time_integral } => {
            cmd_bromwich(args, seed, fmt.unwrap_or(Format::Json), (*a, *y, *nodes), *time_integral)
        }
        Command::Dunford { args, contour } => cmd_dunford(args, seed, fmt.unwrap_or(Format::Json), contour.as_deref()),
        Command::Lab { experiment, args, family } => cmd_lab(*experiment, args, seed, fmt.unwrap_or(Format::Json), family.as_deref()),
    }
}

fn usage(msg: impl Into<String>) -> LabError {
    LabError::Parse(msg.into())
}

fn load(spec: &str, seed: u64) -> Result<OperatorHandle> {
    operator::make_operator(&OperatorSource::parse(spec, seed)?)
}

impl OpArgs {
    fn op(&self, seed: u64) -> Result<OperatorHandle> {
        load(self.op.as_deref().ok_or_else(|| usage("missing --op"))?, seed)
    }

    fn op2(&self, seed: u64) -> Result<Option<OperatorHandle>> {
        self.op2.as_deref().map(|s| load(s, seed)).transpose()
    }

    fn times(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.t {
            Some(s) => split(s).map(parse_real).collect(),
            None => Ok(default.to_vec()),
        }
    }

    fn time(&self, default: f64) -> Result<f64> {
        Ok(self.times(&[default])?[0])
    }

    fn counts(&self) -> Result<Option<Vec<f64>>> {
        self.n.as_deref().map(|s| split(s).map(parse_real).collect()).transpose()
    }

    fn count(&self, default: usize) -> Result<usize> {
        match self.counts()? {
            Some(v) => {
                let x = v[0];
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x as usize)
                } else {
                    Err(usage(format!("--n must be a nonnegative integer, got {x}")))
                }
            }
            None => Ok(default),
        }
    }

    fn lambdas(&self) -> Result<Option<Vec<Complex64>>> {
        self.lambda.as_deref().map(|s| split(s).map(parse_complex).collect()).transpose()
    }

    fn lambda(&self, default: Complex64) -> Result<Complex64> {
        Ok(self.lambdas()?.map(|v| v[0]).unwrap_or(default))
    }
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn matrix_csv(out: &mut String, t: f64, m: &CMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(out, "{},{i},{j},{},{}", format_sci(t), format_sci(z.re), format_sci(z.im));
        }
    }
}

fn matrices_artifact(fmt: Format, header: Value, results: &[(f64, CMatrix, Value)]) -> String {
    match fmt {
        Format::Csv => {
            let mut out = String::from("t,row,col,re,im\n");
            for (t, m, _) in results {
                matrix_csv(&mut out, *t, m);
            }
            out
        }
        Format::Json => {
            let items: Vec<Value> = results
                .iter()
                .map(|(t, m, extra)| {
                    let mut v = json!({ "t": t, "matrix": MatrixFile::from_matrix(m) });
                    if let (Value::Object(dst), Value::Object(src)) = (&mut v, extra) {
                        dst.extend(src.clone());
                    }
                    v
                })
                .collect();
            let mut doc = header;
            doc["results"] = Value::Array(items);
            json_string(&doc)
        }
    }
}

fn report_outcome(report: &CheckReport, fmt: Format) -> Outcome {
    let artifact = match fmt {
        Format::Csv => report.to_csv(),
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
    };
    let summary = format!(
        "{}: {} (worst residual/tolerance {})",
        report.name,
        if report.pass { "pass" } else { "FAIL" },
        format_sci(report.worst_ratio())
    );
    Outcome { artifact, summary, pass: report.pass }
}

fn table_artifact(table: &ConvergenceTable, fmt: Format) -> String {
    match fmt {
        Format::Csv => table.to_csv(),
        Format::Json => json_string(table),
    }
}

fn cmd_expm(args: &OpArgs, seed: u64, fmt: Format) -> Result<Outcome> {
    let a = args.op(seed)?;
    let ts = args.times(&[1.0])?;
    let method_id = args.method.as_deref().unwrap_or("oracle");
    let n = args.count(64)?;
    let method = match method_id {
        "oracle" => EvalMethod::Oracle,
        "taylor" => EvalMethod::Taylor { tol: 1e-15 },
        "yosida" => EvalMethod::Yosida { lambda: args.lambda(c(100.0))? },
        "exp-formula" => EvalMethod::ExpFormula { n },
        "euler" => EvalMethod::Euler { n },
        "chernoff" => EvalMethod::Chernoff { family: Arc::new(semigroup::CrankNicolson::new(&a)?), n },
        "trotter" => EvalMethod::Trotter {
            second: args.op2(seed)?.ok_or_else(|| usage("trotter needs --op2"))?,
            n,
        },
        "dunford" => EvalMethod::Dunford { contour: default_circle(&a)? },
        "bromwich" => EvalMethod::Oracle,
        other => return Err(usage(format!("unknown method '{other}'"))),
    };
    let evaluator = SemigroupEvaluator::new(a.clone(), method);
    let mut results = Vec::new();
    for &t in &ts {
        let m = if method_id == "bromwich" {
            contour::bromwich_auto(&a, t)?.value
        } else {
            evaluator.evaluate(t)?
        };
        results.push((t, m, json!({})));
    }
    let header = json!({ "operator": a.label(), "method": method_id });
    let summary = format!("expm: {} via {method_id} at {} time(s)", a.label(), ts.len());
    Ok(Outcome::ok(matrices_artifact(fmt, header, &results), summary))
}

fn cmd_resolvent(args: &OpArgs, seed: u64, fmt: Format) -> Result<Outcome> {
    let a = args.op(seed)?;
    let lambdas = args.lambdas()?.ok_or_else(|| usage("missing --lambda"))?;
    let neumann = match args.method.as_deref().unwrap_or("lu") {
        "lu" => false,
        "neumann" => true,
        other => return Err(usage(format!("unknown resolvent method '{other}'"))),
    };
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let s = if neumann {
            resolvent::neumann_resolvent(&a, lambda, 1e-12)?
        } else {
            resolvent::resolvent(&a, lambda)
        };
        rows.push(json!({
            "lambda_re": lambda.re,
            "lambda_im": lambda.im,
            "norm": s.norm_estimate,
            "condition": s.condition,
            "in_resolvent_set": s.in_resolvent_set,
            "terms": s.terms,
        }));
    }
    let artifact = match fmt {
        Format::Json => json_string(&json!({ "operator": a.label(), "samples": rows })),
        Format::Csv => {
            let mut out = String::from("lambda_re,lambda_im,norm,condition,in_resolvent_set\n");
            for r in &rows {
                let f = |k: &str| r[k].as_f64().map(format_sci).unwrap_or_else(|| "inf".into());
                let _ = writeln!(out, "{},{},{},{},{}", f("lambda_re"), f("lambda_im"), f("norm"), f("condition"), r["in_resolvent_set"]);
            }
            out
        }
    };
    Ok(Outcome::ok(artifact, format!("resolvent: {} at {} shift(s)", a.label(), lambdas.len())))
}

fn cmd_converge(args: &OpArgs, seed: u64, fmt: Format) -> Result<Outcome> {
    let method: LimitMethod = args.method.as_deref().ok_or_else(|| usage("missing --method"))?.parse()?;
    let a = args.op(seed)?;
    let problem = match method {
        LimitMethod::Euler => LimitProblem::Euler(a),
        LimitMethod::ExpFormula => LimitProblem::ExpFormula(a),
        LimitMethod::Yosida => LimitProblem::Yosida(a),
        LimitMethod::Trotter => LimitProblem::Trotter(a, args.op2(seed)?.ok_or_else(|| usage("trotter needs --op2"))?),
        LimitMethod::Chernoff => {
            let family: Arc<dyn ChernoffFamily> = Arc::new(semigroup::CrankNicolson::new(&a)?);
            LimitProblem::Chernoff(family, a)
        }
    };
    let ts = args.times(&[1.0])?;
    let ns = args.counts()?.ok_or_else(|| usage("missing --n"))?;
    let table = semigroup::converge_table(&problem, &ts, &ns)?;
    let summary = format!("converge: {} order {}", method.id(), table.order_label());
    Ok(Outcome::ok(table_artifact(&table, fmt), summary))
}

fn default_circle(a: &OperatorHandle) -> Result<ContourSpec> {
    let norm = operator::operator_norm(a)?.value;
    ContourSpec::circle(2.0 * norm.max(0.5), 64)
}

fn cmd_check(kind: CheckKind, args: &OpArgs, seed: u64, fmt: Format) -> Result<Outcome> {
    let a = args.op(seed)?;
    let report = match kind {
        CheckKind::Operator => {
            let norm = operator::operator_norm(&a)?;
            let spec = operator::spectrum(&a)?;
            let env = operator::estimate_growth_envelope(&a, 5.0, 64)?;
            let mut r = CheckReport::new("operator");
            r.metric("dim", a.dim() as f64)
                .metric("norm", norm.value)
                .metric("spectral_radius", spec.spectral_radius)
                .metric("spectral_abscissa", spec.spectral_abscissa)
                .metric("envelope_m", env.m)
                .metric("envelope_omega", env.omega);
            for (k, z) in spec.eigenvalues.iter().enumerate() {
                r.note(format!("eigenvalue {k}: {} {}", format_sci(z.re), format_sci(z.im)));
            }
            r
        }
        CheckKind::ResolventIdentity => {
            let lambda = args.lambda(c(1.0))?;
            let mu = args.mu.as_deref().map(parse_complex).transpose()?.unwrap_or(c(2.0));
            resolvent::check_resolvent_identity(&a, lambda, mu)?
        }
        CheckKind::PseudoResolvent => {
            let shifts = match args.lambdas()? {
                Some(v) => v,
                None => {
                    let omega = linalg::spectral_abscissa(&a.to_dense()?)?.max(0.0);
                    resolvent::default_shift_grid(omega)
                }
            };
            resolvent::check_pseudo_resolvent(&PseudoResolventFamily::from_operator(&a, &shifts)?)?
        }
        CheckKind::HilleYosida => {
            let env = operator::estimate_growth_envelope(&a, 5.0, 64)?;
            let shifts = match args.lambdas()? {
                Some(v) => v,
                None => resolvent::default_shift_grid(env.omega),
            };
            resolvent::check_hille_yosida_bounds(&a, &env, &shifts, args.count(6)?)?
        }
        CheckKind::Dissipative => {
            let norm = operator::operator_norm(&a)?.value;
            generator::check_dissipative(&a, generator::DISSIPATIVITY_PROBES, &generator::default_alpha_grid(norm))?.to_check_report()
        }
        CheckKind::LumerPhillips => {
            let ts = match &args.t {
                Some(_) => args.times(&[])?,
                None => (0..=50).map(|k| k as f64 * 0.1).collect(),
            };
            generator::check_lumer_phillips(&a, &ts)?
        }
        CheckKind::ContractionHy => {
            let shifts = match args.lambdas()? {
                Some(v) => v.iter().map(|z| z.re).collect(),
                None => vec![0.5, 1.0, 2.0, 4.0],
            };
            generator::check_contraction_hy(&a, &shifts, args.count(6)?)?
        }
        CheckKind::Sectorial => {
            let etas = generator::log_grid(1e-2, 1e4, 4);
            let gammas = [1e-3, 1e-2, 1e-1, 1.0];
            let ts = generator::log_grid(1e-4, 1.0, 10);
            generator::check_sectorial(&a, &etas, &gammas, &ts)?.to_check_report()
        }
        CheckKind::Differentiable => generator::check_differentiable_identities(&a, args.time(1.0)?, args.count(3)?)?,
        CheckKind::Commuting => {
            let f = match args.op2(seed)? {
                Some(f) => f.to_dense()?,
                None => {
                    let m = a.to_dense()?;
                    &m * &m + linalg::identity(m.nrows())
                }
            };
            let ts = args.times(&[0.1, 0.5, 1.0, 2.0])?;
            generator::check_commuting_bounded(&a, &f, &ts)?
        }
        CheckKind::ChernoffLemma => {
            let h = args.time(0.1)?;
            let step = semigroup::BackwardEuler::new(&a).step(h)?;
            let probes = linalg::probe_vectors(a.dim(), 50, seed);
            semigroup::check_chernoff_lemma(&step, 1.0, 1.0, args.count(8)?, &probes)?
        }
        CheckKind::TaylorRemainder => {
            semigroup::taylor_remainder_check(&a, args.time(1.0)?, args.count(3)?, args.quad.unwrap_or(32), seed)?
        }
        CheckKind::BLambda => {
            let lambda = args.lambda(c(1.0))?;
            let t = args.time(1.0)?;
            let q = args.quad.unwrap_or(32);
            let (identity, commutation) = contour::b_lambda_residuals(&a, lambda, t, q)?;
            let mut r = CheckReport::new("b_lambda");
            r.at_most("identity", identity, 1e-8).at_most("commutation", commutation, 1e-8);
            r
        }
    };
    Ok(report_outcome(&report, fmt))
}

fn match_artifact(label: &str, matches: &[(&str, MultisetMatch)], fmt: Format) -> String {
    match fmt {
        Format::Json => {
            let items: Vec<Value> = matches.iter().map(|(k, m)| json!({ "kind": k, "match": m })).collect();
            json_string(&json!({ "operator": label, "matches": items }))
        }
        Format::Csv => {
            let mut out = String::from("kind,left_re,left_im,right_re,right_im,distance\n");
            for (kind, m) in matches {
                for &(i, j) in &m.pairing {
                    let (l, r) = (m.left[i], m.right[j]);
                    let _ = writeln!(
                        out,
                        "{kind},{},{},{},{},{}",
                        format_sci(l.re),
                        format_sci(l.im),
                        format_sci(r.re),
                        format_sci(r.im),
                        format_sci((l - r).norm())
                    );
                }
            }
            out
        }
    }
}

fn cmd_spectrum_map(args: &OpArgs, seed: u64, fmt: Format) -> Result<Outcome> {
    let a = args.op(seed)?;
    let t = args.time(1.0)?;
    let mut matches = vec![("semigroup", spectral::spectral_mapping_check(&a, t)?)];
    if args.n.is_some() {
        matches.push(("derivative", spectral::derivative_spectral_mapping_check(&a, t, args.count(1)?)?));
    }
    if let Some(lambdas) = args.lambdas()? {
        for lambda in lambdas {
            matches.push(("resolvent", spectral::resolvent_spectrum_check(&a, lambda)?));
            matches.push(("recovery", spectral::recover_spectrum(&a, lambda)?));
        }
    }
    let pass = matches.iter().all(|(_, m)| m.pass);
    let worst = matches.iter().map(|(_, m)| m.max_pair_distance).fold(0.0, f64::max);
    let summary = format!(
        "spectrum-map: {} {} (max pair distance {})",
        a.label(),
        if pass { "pass" } else { "FAIL" },
        format_sci(worst)
    );
    Ok(Outcome { artifact: match_artifact(a.label(), &matches, fmt), summary, pass })
}

fn cmd_bromwich(
    args: &OpArgs,
    seed: u64,
    fmt: Format,
    params: (Option<f64>, Option<f64>, Option<usize>),
    time_integral: bool,
) -> Result<Outcome> {
    let a_op = args.op(seed)?;
    let ts = args.times(&[1.0])?;
    let mut results = Vec::new();
    let mut pass = true;
    for &t in &ts {
        let (a, y, nodes) = match params {
            (Some(a), Some(y), Some(nodes)) => (a, y, nodes),
            (None, None, None) => contour::bromwich_parameters(&a_op, t)?,
            _ => return Err(usage("give all of --a, --y, --nodes or none")),
        };
        if time_integral {
            let x = linalg::probe_vectors(a_op.dim(), 1, seed).remove(0);
            let a = if a > 0.0 { a } else { 1.0 };
            let r = contour::bromwich_time_integral(&a_op, &x, t, a, y, nodes)?;
            pass &= r.discrepancy <= 1e-6 * r.value.norm().max(1.0);
            let col = CMatrix::from_column_slice(x.len(), 1, r.value.as_slice());
            results.push((t, col, json!({ "tail_estimate": r.tail_estimate, "discrepancy": r.discrepancy, "a": a, "y": y, "nodes": nodes })));
        } else {
            let r = contour::bromwich_exp(&a_op, t, a, y, nodes)?;
            pass &= r.validated;
            results.push((t, r.value.clone(), json!({ "tail_estimate": r.tail_estimate, "validated": r.validated, "a": a, "y": y, "nodes": nodes })));
        }
    }
    let header = json!({ "operator": a_op.label(), "method": if time_integral { "bromwich-time-integral" } else { "bromwich" } });
    let summary = format!(
        "bromwich: {} at {} time(s), {}",
        a_op.label(),
        ts.len(),
        if pass { "validated" } else { "NOT validated" }
    );
    Ok(Outcome { artifact: matrices_artifact(fmt, header, &results), summary, pass })
}

fn cmd_dunford(args: &OpArgs, seed: u64, fmt: Format, contour_spec: Option<&str>) -> Result<Outcome> {
    let a = args.op(seed)?;
    let spec: ContourSpec = match contour_spec {
        Some(s) => s.parse()?,
        None => default_circle(&a)?,
    };
    let ts = args.times(&[1.0])?;
    let results = ts
        .iter()
        .map(|&t| Ok((t, contour::dunford_exp(&a, t, &spec)?, json!({}))))
        .collect::<Result<Vec<_>>>()?;
    let header = json!({ "operator": a.label(), "method": "dunford", "nodes": spec.nodes() });
    let summary = format!("dunford: {} at {} time(s) with {} nodes", a.label(), ts.len(), spec.nodes());
    Ok(Outcome::ok(matrices_artifact(fmt, header, &results), summary))
}

fn cmd_lab(experiment: LabExperiment, args: &OpArgs, seed: u64, fmt: Format, family: Option<&str>) -> Result<Outcome> {
    match experiment {
        LabExperiment::TrotterKato => {
            let base = args.op.as_deref().map(|s| load(s, seed)).transpose()?;
            let seq = GeneratorSequence::parse(family.unwrap_or("perturb:p=1"), base.as_ref())?;
            let lambda = args.lambda(c(1.0))?;
            let t0 = args.time(1.0)?;
            let rt = lab::resolvent_convergence_table(&seq, lambda, 4)?;
            let st = lab::semigroup_convergence_table(&seq, t0, lab::T_GRID_SIZE, 4)?;
            let report = lab::check_tk_equivalence(&seq, lambda, t0)?;
            let artifact = match fmt {
                Format::Json => json_string(&json!({ "resolvent": rt, "semigroup": st, "report": report })),
                Format::Csv => {
                    let mut out = String::from("n,resolvent_error,semigroup_error\n");
                    for (r, s) in rt.rows.iter().zip(&st.rows) {
                        let _ = writeln!(out, "{},{},{}", r.n, format_sci(r.error), format_sci(s.error));
                    }
                    out
                }
            };
            let summary = format!(
                "trotter-kato: {} (resolvent order {}, semigroup order {})",
                if report.pass { "pass" } else { "FAIL" },
                rt.order_label(),
                st.order_label()
            );
            Ok(Outcome { artifact, summary, pass: report.pass })
        }
        LabExperiment::Bridge => {
            let a = args.op(seed)?;
            let b = args.op2(seed)?.ok_or_else(|| usage("bridge needs --op2"))?;
            let report = lab::bridge_identity_check(&a, &b, args.lambda(c(1.0))?, args.time(1.0)?, args.quad.unwrap_or(16))?;
            Ok(report_outcome(&report, fmt))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(line: &str) -> (i32, String) {
        let mut out = Vec::new();
        let args = std::iter::once("semigroup-lab").chain(line.split_whitespace());
        let code = run_with(args, &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args("check dissipative --op identity:n=2").0, EXIT_CHECK_FAILED);
        assert_eq!(run_args("check dissipative --op rotation2").0, EXIT_OK);
        assert_eq!(run_args("expm --op nonsense").0, EXIT_USAGE);
        assert_eq!(run_args("expm").0, EXIT_USAGE);
        assert_eq!(run_args("frobnicate").0, EXIT_USAGE);
        assert_eq!(run_args("converge --method exp-formula --op diag:-1 --t 1").0, EXIT_USAGE);
    }

    #[test]
    fn taylor_expm_of_zero_is_identity() {
        let (code, out) = run_args("expm --op zero:n=3 --t 5 --method taylor --format csv");
        assert_eq!(code, 0);
        let mut lines = out.lines().skip(1);
        for i in 0..3 {
            for j in 0..3 {
                let line = lines.next().unwrap();
                let fields: Vec<&str> = line.split(',').collect();
                let re: f64 = fields[3].parse().unwrap();
                assert_eq!(re, if i == j { 1.0 } else { 0.0 }, "{line}");
            }
        }
    }

    #[test]
    fn converge_first_row() {
        let (code, out) = run_args("converge --method exp-formula --op diag:-1 --t 1 --n 10,20,40,80");
        assert_eq!(code, 0);
        let first = out.lines().nth(1).unwrap();
        let err: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
        assert!((err - 1.77e-2).abs() < 5e-5, "{first}");
    }
}
