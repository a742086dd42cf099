//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semigroup_lab::cli;
use semigroup_lab::contour::{self, ContourSpec};
use semigroup_lab::generator;
use semigroup_lab::lab::{self, GeneratorSequence};
use semigroup_lab::linalg::{self, c, CMatrix};
use semigroup_lab::operator::{self, builtin_dissipative, builtin_suite, GeneratorSpec, OperatorHandle};
use semigroup_lab::resolvent;
use semigroup_lab::semigroup::{self, BackwardEuler, ChernoffFamily, LimitProblem, SemigroupStep};
use semigroup_lab::spectral;

const IDENTITY_TOL: f64 = 1e-9;
const NEUMANN_TOL: f64 = 1e-9;
const EXPM_AGREEMENT: f64 = 1e-6;
const RATE_BAND: f64 = 0.02;
/// `|(1 + 1/40)^{-40} - e^{-1}|`, from a 40-digit scalar evaluation.
const EXP_FORMULA_N40: f64 = 4.55118252636274e-3;
const HY_SLACK: f64 = 1e-8;
const BRIDGE_TOL: f64 = 1e-8;
const RESIDUAL_FLOOR: f64 = 1e-10;
const SECTORIAL_BUDGET: Duration = Duration::from_secs(60);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn op(s: &str) -> OperatorHandle {
    operator::parse_operator(s).unwrap()
}

fn rel_diff(x: &CMatrix, y: &CMatrix) -> f64 {
    linalg::spectral_norm(&(x - y)) / linalg::spectral_norm(y).max(1.0)
}

fn order_of(problem: &LimitProblem, ns: &[f64]) -> f64 {
    semigroup::converge_table(problem, &[1.0], ns).unwrap().empirical_order.unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_identity: f64 = 0.0;
    let mut worst_neumann: f64 = 0.0;
    for k in 0..20 {
        let n = rng.random_range(2..=16);
        let a = if k % 2 == 0 {
            GeneratorSpec::RandomDissipative { n, seed: k }.build().unwrap()
        } else {
            GeneratorSpec::RandomBounded { n, seed: k, norm_cap: 2.0 }.build().unwrap()
        };
        let abscissa = linalg::spectral_abscissa(&a.to_dense().unwrap()).unwrap();
        let mut shift = || Complex64::new(abscissa + rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0));
        let (lambda, mu) = (shift(), shift());
        let report = resolvent::check_resolvent_identity(&a, lambda, mu).unwrap();
        ensure(report.pass, || format!("identity failed for triple {k}: {}", report.to_json()))?;
        worst_identity = worst_identity.max(report.worst_ratio() * IDENTITY_TOL);

        let norm = operator::operator_norm(&a).unwrap().value;
        let far = Complex64::from_polar(1.01 * norm * rng.random_range(1.0..2.0), rng.random_range(0.0..6.28));
        let series = resolvent::neumann_resolvent(&a, far, 1e-13).unwrap().matrix().unwrap();
        let direct = resolvent::resolvent_matrix(&a, far).unwrap();
        let err = rel_diff(&series, &direct);
        ensure(err <= NEUMANN_TOL, || format!("Neumann mismatch {err:e} for triple {k}"))?;
        worst_neumann = worst_neumann.max(err);
    }
    Ok(format!("20 triples, identity residual <= {worst_identity:.2e}, Neumann gap {worst_neumann:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in builtin_suite() {
        let norm = operator::operator_norm(&a).unwrap().value;
        let circle = ContourSpec::circle(2.0 * norm.max(0.5), 64).unwrap();
        for t in [0.1, 1.0, 2.0] {
            let oracle = semigroup::expm_oracle(&a, t).unwrap();
            let taylor = semigroup::expm_taylor(&a, t, 1e-15).unwrap();
            let dunford = contour::dunford_exp(&a, t, &circle).unwrap();
            let bromwich = contour::bromwich_auto(&a, t).unwrap();
            ensure(bromwich.validated, || format!("{} t={t}: Bromwich not validated", a.label()))?;
            for (name, m) in [("taylor", &taylor), ("dunford", &dunford), ("bromwich", &bromwich.value)] {
                let e = rel_diff(m, &oracle);
                ensure(e <= EXPM_AGREEMENT, || format!("{} t={t} {name}: {e:e}", a.label()))?;
                worst = worst.max(e);
            }
        }
    }
    Ok(format!("6 operators x 3 times, worst relative gap {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let a = op("diag:-1");
    let ns = [10.0, 20.0, 40.0, 80.0];
    let table = semigroup::converge_table(&LimitProblem::ExpFormula(a), &[1.0], &ns).unwrap();
    let e = table.errors();
    for (got, want) in [(e[0], 1.77e-2), (e[1], 8.95e-3), (e[2], EXP_FORMULA_N40)] {
        ensure((got / want - 1.0).abs() <= RATE_BAND, || format!("error {got:e} vs {want:e}"))?;
    }
    let p = table.empirical_order.unwrap();
    ensure((p - 1.0).abs() <= 0.1, || format!("order {p}"))?;
    for s in ["rotation2", "random_dissipative:n=6,seed=42"] {
        let q = order_of(&LimitProblem::ExpFormula(op(s)), &ns);
        ensure((q - 1.0).abs() <= 0.1, || format!("{s}: order {q}"))?;
    }
    Ok(format!("errors {:.4e}, {:.4e}, {:.4e}; order {p:.3}", e[0], e[1], e[2]))
}

fn criterion_4() -> Outcome {
    let a1 = op("dense:0,1;0,0");
    let a2 = op("dense:0,0;1,0");
    let t: f64 = 1.0;
    let target = CMatrix::from_fn(2, 2, |i, j| c(if i == j { t.cosh() } else { t.sinh() }));
    let ns: Vec<usize> = (2..=8).map(|k| 1 << k).collect();
    let rows = ns
        .iter()
        .map(|&n| semigroup_lab::ConvergenceRow {
            n: n as f64,
            error: linalg::spectral_norm(&(semigroup::lie_trotter(&a1, &a2, t, n).unwrap() - &target)),
        })
        .collect();
    let table = semigroup_lab::ConvergenceTable::new("shift/transpose", rows);
    let p = table.empirical_order.unwrap();
    ensure((p - 1.0).abs() <= 0.15, || format!("order {p}"))?;
    let d1 = op("diag:-1,-2");
    let d2 = op("diag:0.5,-3");
    let sum = op("diag:-0.5,-5");
    let mut worst: f64 = 0.0;
    for n in [1, 4, 64] {
        let e = linalg::spectral_norm(&(semigroup::lie_trotter(&d1, &d2, t, n).unwrap() - semigroup::expm_oracle(&sum, t).unwrap()));
        worst = worst.max(e);
    }
    ensure(worst <= 1e-13, || format!("commuting pair error {worst:e}"))?;
    Ok(format!("order {p:.3} over n = 4..256; commuting error {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let a = op("diag:-1,-2");
    let ts: Vec<f64> = (0..=32).map(|k| k as f64 / 32.0).collect();
    let lambdas: Vec<f64> = (3..=8).map(|k| 2f64.powi(k)).collect();
    let table = semigroup::yosida_semigroup_error(&a, &ts, &lambdas).unwrap();
    let p = table.empirical_order.unwrap();
    ensure((p - 1.0).abs() <= 0.2, || format!("order {p}"))?;
    Ok(format!("order {p:.3} along lambda = 8..256"))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in builtin_dissipative() {
        let env = operator::estimate_growth_envelope(&a, 5.0, 64).unwrap();
        let shifts = resolvent::default_shift_grid(env.omega);
        ensure(shifts.len() == 12, || "shift grid size".into())?;
        let report = resolvent::check_hille_yosida_bounds(&a, &env, &shifts, 6).unwrap();
        let ratio = report.residual("worst_ratio").unwrap().value;
        ensure(ratio <= 1.0 + HY_SLACK, || format!("{}: ratio {ratio}", a.label()))?;
        worst = worst.max(ratio);
    }
    Ok(format!("8 operators, worst ratio {worst:.9}"))
}

fn criterion_7() -> Outcome {
    let ts: Vec<f64> = (0..=100).map(|k| k as f64 * 0.05).collect();
    let lap = op("laplacian1d:n=16,h=0.058823529411764705");
    let report = generator::check_lumer_phillips(&lap, &ts).unwrap();
    ensure(report.pass && report.metrics["m_dissipative"] == 1.0, || report.to_json())?;
    let max_norm = report.metrics["max_semigroup_norm"];
    ensure(max_norm <= 1.0 + 1e-9, || format!("laplacian norm {max_norm}"))?;

    let counter = op("dense:-1,3;0,-1");
    let short: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
    let report = generator::check_lumer_phillips(&counter, &short).unwrap();
    let margin = report.metrics["inner_product_margin"];
    let growth = report.metrics["max_semigroup_norm"];
    ensure(margin > 1e-10, || format!("counterexample passed the inner-product test: {margin}"))?;
    ensure(growth > 1.0 + 1e-6, || format!("counterexample did not grow: {growth}"))?;
    Ok(format!("laplacian max norm {max_norm:.12}; counterexample margin {margin:.3}, growth {growth:.4}"))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in builtin_suite() {
        for t in [0.5, 1.0, 2.0] {
            let m = spectral::spectral_mapping_check(&a, t).unwrap();
            ensure(m.pass, || format!("{} t={t}: {}", a.label(), m.to_json()))?;
            worst = worst.max(m.max_pair_distance);
        }
        let abscissa = linalg::spectral_abscissa(&a.to_dense().unwrap()).unwrap();
        let rec = spectral::recover_spectrum(&a, Complex64::new(abscissa + 1.0, 0.5)).unwrap();
        ensure(rec.pass, || format!("{} recovery: {}", a.label(), rec.to_json()))?;
    }
    Ok(format!("all built-ins matched, bottleneck {worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let lambdas = [c(1.0), c(2.0), Complex64::new(1.0, 1.0)];
    let ts = [0.5, 1.0, 2.0];
    let mut worst_b: f64 = 0.0;
    let mut worst_bridge: f64 = 0.0;
    for a in builtin_suite() {
        let n = a.dim();
        let pert = GeneratorSpec::RandomBounded { n, seed: 7, norm_cap: 0.5 }.build().unwrap().to_dense().unwrap();
        let b = a.map_dense("perturbed", |m| m + pert).unwrap();
        for &lambda in &lambdas {
            for &t in &ts {
                let op_b = contour::b_lambda(&a, lambda, t, 32).unwrap();
                ensure(op_b.report.pass, || format!("{} B_lambda: {}", a.label(), op_b.report.to_json()))?;
                worst_b = worst_b.max(op_b.report.worst_ratio() * 1e-8);
                let report = lab::bridge_identity_check(&a, &b, lambda, t, 32).unwrap();
                ensure(report.pass, || format!("{} bridge: {}", a.label(), report.to_json()))?;
                worst_bridge = worst_bridge.max(report.residual("residual").unwrap().value);
                ensure(worst_bridge <= BRIDGE_TOL, || format!("{} bridge residual {worst_bridge:e}", a.label()))?;
            }
        }
        let mut prev: Option<(f64, f64)> = None;
        for q in [2, 4, 8, 16, 32] {
            let (id, _) = contour::b_lambda_residuals(&a, c(1.0), 1.0, q).unwrap();
            let br = lab::bridge_residual(&a, &b, c(1.0), 1.0, q).unwrap();
            if let Some((pid, pbr)) = prev {
                ensure(id <= RESIDUAL_FLOOR || id * 4.0 <= pid, || format!("{} B_lambda q={q}: {pid:e} -> {id:e}", a.label()))?;
                ensure(br <= RESIDUAL_FLOOR || br * 4.0 <= pbr, || format!("{} bridge q={q}: {pbr:e} -> {br:e}", a.label()))?;
            }
            prev = Some((id, br));
        }
    }
    Ok(format!("B_lambda residual <= {worst_b:.2e}, bridge residual <= {worst_bridge:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut orders = Vec::new();
    for p in [1, 2] {
        let seq = GeneratorSequence::parse(&format!("perturb:p={p}"), None).unwrap();
        let report = lab::check_tk_equivalence(&seq, c(1.0), 1.0).unwrap();
        ensure(report.pass, || report.to_json())?;
        let (r, s) = (report.metrics["resolvent_order"], report.metrics["semigroup_order"]);
        ensure((r - s).abs() <= 0.3, || format!("p={p}: orders {r} vs {s}"))?;
        orders.push(format!("p={p}: {r:.3}/{s:.3}"));
    }
    let mut violations = 0.0;
    let ops = builtin_dissipative();
    ensure(ops.len() == 8, || "expected 8 contractive operators".into())?;
    for (k, a) in ops.iter().enumerate() {
        let probes = linalg::probe_vectors(a.dim(), 50, 100 + k as u64);
        for step in [BackwardEuler::new(a).step(0.1).unwrap(), SemigroupStep::new(a).unwrap().step(0.1).unwrap()] {
            let report = semigroup::check_chernoff_lemma(&step, 1.0, 1.0, 8, &probes).unwrap();
            ensure(report.pass, || format!("{}: {}", a.label(), report.to_json()))?;
            violations += report.residual("violations").unwrap().value;
        }
    }
    Ok(format!("orders {}; Chernoff violations {violations}", orders.join(", ")))
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let lap = op("laplacian1d:n=32,h=0.030303030303030304");
    let etas = generator::log_grid(1e-2, 1e4, 4);
    let gammas = [1e-3, 1e-2, 1e-1, 1.0];
    let ts = generator::log_grid(1e-4, 1.0, 10);
    let rep = generator::check_sectorial(&lap, &etas, &gammas, &ts).unwrap();
    ensure(rep.k.is_finite() && rep.c_line.is_finite() && rep.l.is_finite(), || format!("{rep:?}"))?;
    ensure(rep.l_stable, || format!("L per decade {:?}", rep.l_by_decade))?;
    let rot = generator::check_sectorial(&op("rotation2"), &etas, &gammas, &ts).unwrap();
    ensure(rot.c_line_diverges && !rot.sectorial, || format!("rotation2 not flagged: {rot:?}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed <= SECTORIAL_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("K {:.4}, C_line {:.4}, L {:.4}; rotation2 diverges; {:.1}s", rep.k, rep.c_line, rep.l, elapsed.as_secs_f64()))
}

fn run_suite(dir: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for (k, (name, line)) in cli::COVERAGE.iter().enumerate() {
        for fmt in ["csv", "json"] {
            let path = dir.join(format!("{k:02}_{name}.{fmt}"));
            let args: Vec<String> = ["semigroup-lab"]
                .into_iter()
                .map(String::from)
                .chain(line.split_whitespace().map(String::from))
                .chain(["--seed", "42", "--format", fmt, "--out"].into_iter().map(String::from))
                .chain([path.display().to_string()])
                .collect();
            let mut sink = Vec::new();
            let code = cli::run_with(args, &mut sink);
            if code == cli::EXIT_USAGE {
                return Err(format!("'{line}' exited with {code}"));
            }
            files.push((path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap()));
        }
    }
    Ok(files)
}

fn criterion_12() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = run_suite(first.path())?;
    let b = run_suite(second.path())?;
    ensure(a.len() == b.len(), || "file count differs".into())?;
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        ensure(na == nb && da == db, || format!("{na} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("resolvent identity and Neumann series", criterion_1),
        ("exponential oracle cross-validation", criterion_2),
        ("exponential formula rate", criterion_3),
        ("Lie-Trotter rate", criterion_4),
        ("Yosida approximation", criterion_5),
        ("Hille-Yosida power bounds", criterion_6),
        ("Lumer-Phillips", criterion_7),
        ("spectral mapping", criterion_8),
        ("B_lambda and bridge identities", criterion_9),
        ("Trotter-Kato equivalence and Chernoff lemma", criterion_10),
        ("sectorial suite", criterion_11),
        ("determinism", criterion_12),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{name}] {detail} ({secs:.1}s)", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL [{name}] {detail} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
