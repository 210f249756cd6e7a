//! Acceptance suite. Runs every criterion in order and prints one PASS/FAIL
//! line per criterion.
//!
//! Failing criteria are reported but only turn into a nonzero exit status
//! with `DECONF_ACCEPTANCE_STRICT=1`, so the rest of `cargo test` still runs.
//! `DECONF_ACCEPTANCE=1,10` restricts the run to the listed criteria.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{gauss_solve, gaussian, gaussian_vec, to_rows};
use deconf::confound::*;
use deconf::evaluation::{pauc, MethodSummary, MetricsSummary, PrecisionCurve};
use deconf::harness::*;
use deconf::rng::seeded;
use deconf::solvers::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let e = start.elapsed();
    (e < budget, format!("{:.2}s of {}s budget", e.as_secs_f64(), budget.as_secs()))
}

/// `(max - min) / max`.
fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

// ---------------------------------------------------------------- 1

const TABLE1: [(usize, f64, f64, f64, f64); 4] = [
    (10, 0.0, 0.00, 0.00, 0.43),
    (10, 0.5, 0.02, 3.46, 0.61),
    (10, 1.5, 0.05, 2.83, 0.62),
    (10, 3.0, 0.09, 2.65, 0.63),
];

const TABLE2: [(usize, f64, f64, f64, f64); 9] = [
    (2, 1.5, 0.01, 14.14, 0.61),
    (3, 1.5, 0.01, 9.43, 0.61),
    (5, 1.5, 0.02, 5.66, 0.61),
    (6, 1.5, 0.03, 4.71, 0.62),
    (10, 1.5, 0.05, 2.83, 0.62),
    (20, 1.5, 0.09, 1.41, 0.61),
    (60, 1.5, 0.23, 0.47, 0.63),
    (100, 1.5, 0.33, 0.28, 0.64),
    (150, 1.5, 0.43, 0.19, 0.61),
];

fn scenario_tables() -> Outcome {
    let start = Instant::now();
    let mut matching = Vec::new();
    let mut notes = Vec::new();
    for conv in [Convention::Standardized, Convention::Raw] {
        let mut worst: f64 = 0.0;
        let mut worst_b: f64 = 0.0;
        for &(q, bnr, rho, r, b) in TABLE1.iter().chain(TABLE2.iter()) {
            let spec = ScenarioSpec { q, bnr, convention: conv, ..ScenarioSpec::default() };
            let sol = solve_scenario(&spec).unwrap();
            worst = worst.max((sol.rho - rho).abs()).max((sol.r - r).abs());
            worst_b = worst_b.max((sol.b - b).abs());
        }
        let ok = worst <= 0.01 && worst_b <= 0.03;
        notes.push(format!("{}: max|rho,r| dev {worst:.4}, max|b| dev {worst_b:.4}", conv.name()));
        if ok {
            matching.push(conv.name());
        }
    }
    let (fast, budget) = within_budget(start, Duration::from_secs(1));
    println!("    convention: {}", if matching.is_empty() { "none".to_string() } else { matching.join(", ") });
    Outcome::new(!matching.is_empty() && fast, format!("{}; {budget}", notes.join("; ")))
}

// ---------------------------------------------------------------- 2

fn bias_oracle() -> Outcome {
    let start = Instant::now();
    let (n, p, q, s, reps) = (5000, 40, 4, 4, 200);
    let params = solve_scenario(&ScenarioSpec { p, q, n, s, bnr: 1.5, snr: 1.5, ..ScenarioSpec::default() }).unwrap();
    let mut covered = vec![0usize; p];
    for rep in 0..reps {
        let data = generate_dataset(&params, n, s, 1.0, 20_000 + rep as u64).unwrap();
        let t = data.truth.unwrap();
        let yc = data.y.add_scalar(-data.y.mean());
        let chol = data.x.tr_mul(&data.x).cholesky().unwrap();
        let bh = chol.solve(&data.x.tr_mul(&yc));
        let resid = &yc - &data.x * &bh;
        let s2 = resid.norm_squared() / (n - p - 1) as f64;
        let inv = chol.inverse();
        let target = &t.beta + t.tau.as_ref().unwrap();
        for j in 0..p {
            if (bh[j] - target[j]).abs() <= 3.0 * (s2 * inv[(j, j)]).sqrt() {
                covered[j] += 1;
            }
        }
    }
    let worst = *covered.iter().min().unwrap();
    let pooled = covered.iter().sum::<usize>() as f64 / (p * reps) as f64;
    let (fast, budget) = within_budget(start, Duration::from_secs(120));
    Outcome::new(
        worst as f64 >= 0.95 * reps as f64 && fast,
        format!("worst component covered in {worst}/{reps}, pooled coverage {:.4}; {budget}", pooled),
    )
}

// ---------------------------------------------------------------- 3

fn mc_var_psi(a: &DMatrix<f64>, gamma: &DVector<f64>, tau: &DVector<f64>, scale: Option<&DVector<f64>>, seed: u64) -> f64 {
    let (p, q) = a.shape();
    let draws = 1_000_000;
    let mut rng = seeded(seed);
    let mut z = vec![0.0; q];
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut psi: f64 = z.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
        for j in 0..p {
            let d: f64 = rng.sample(StandardNormal);
            let az: f64 = (0..q).map(|c| a[(j, c)] * z[c]).sum();
            psi -= scale.map_or(1.0, |s| s[j]) * (d + az) * tau[j];
        }
        s1 += psi;
        s2 += psi * psi;
    }
    let n = draws as f64;
    (s2 - s1 * s1 / n) / (n - 1.0)
}

fn decomposition_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst_rel: f64 = 0.0;
    for d in 0..5u64 {
        let (p, q) = (6 + d as usize, 2 + (d as usize % 2));
        let a = gaussian(p, q, 300 + d) * 0.7;
        let gamma = gaussian_vec(q, 400 + d);
        let scale = DVector::from_fn(p, |j, _| 1.0 / (1.0 + a.row(j).norm_squared()).sqrt());
        let sc = (d % 2 == 0).then_some(&scale);
        let tau = compute_tau(&a, &gamma, sc).unwrap();
        let v = compute_var_psi(&a, &gamma, &tau, sc).unwrap();
        let mc = mc_var_psi(&a, &gamma, &tau, sc, 500 + d);
        worst_rel = worst_rel.max((mc / v - 1.0).abs());
    }
    let mut worst_tau: f64 = 0.0;
    for d in 0..20u64 {
        let (p, q) = (3 + (d as usize % 9), 1 + (d as usize % 4));
        let a = gaussian(p, q, 600 + d) * (0.2 + 0.15 * d as f64);
        let gamma = gaussian_vec(q, 700 + d);
        let tau = compute_tau(&a, &gamma, None).unwrap();
        let m = DMatrix::identity(p, p) + &a * a.transpose();
        let oracle = gauss_solve(&to_rows(&m), (&a * &gamma).as_slice());
        for j in 0..p {
            worst_tau = worst_tau.max((tau[j] - oracle[j]).abs());
        }
    }
    let (fast, budget) = within_budget(start, Duration::from_secs(60));
    Outcome::new(
        worst_rel < 0.01 && worst_tau < 1e-10 && fast,
        format!("max Var(psi) relative deviation {worst_rel:.5}, max tau deviation {worst_tau:.2e}; {budget}"),
    )
}

// ---------------------------------------------------------------- 4

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let (n, p) = (100, 200);
    let params = solve_scenario(&ScenarioSpec { p, q: 10, n, s: 8, bnr: 1.5, ..ScenarioSpec::default() }).unwrap();
    let opts = LassoOptions { track_objective: true, ..LassoOptions::default() };
    let mut worst_kkt: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    for fit in 0..50u64 {
        let data = generate_dataset(&params, n, 8, 1.0, 30_000 + fit).unwrap();
        let (x, y) = (&data.x, &data.y);
        let (xe, ye, u, path) = match fit % 3 {
            0 => (x.clone(), y.clone(), with_intercept_column(n, None), lasso_path(x, y, &opts).unwrap()),
            1 => {
                let f = pc_lasso_fit(x, y, 10, &opts).unwrap();
                let u = with_intercept_column(n, Some(&f.basis.unwrap().scores));
                (x.clone(), y.clone(), u, f.path)
            }
            _ => {
                let f = plmm_fit(x, y, &opts).unwrap();
                let rot = rotate(x, y, &f.decomp).unwrap();
                let u = DMatrix::from_column_slice(n, 1, rot.intercept.as_slice());
                (rot.x, rot.y, u, f.path)
            }
        };
        for l in 0..path.len() {
            worst_kkt = worst_kkt.max(kkt_violation(&xe, &ye, &u, &path, l, None));
        }
        for trace in path.objective_trace.as_ref().unwrap() {
            for w in trace.windows(2) {
                worst_rise = worst_rise.max((w[1] - w[0]) / w[0].abs().max(1e-300));
            }
        }
    }
    let (fast, budget) = within_budget(start, Duration::from_secs(120));
    Outcome::new(
        worst_kkt < 1e-6 && worst_rise <= 1e-12 && fast,
        format!("max KKT residual {worst_kkt:.2e}, max relative objective rise per sweep {worst_rise:.2e}; {budget}"),
    )
}

// ---------------------------------------------------------------- 5

fn variance_components() -> Outcome {
    let (n, p, reps) = (500, 1000, 100);
    let base = gaussian(n, p, 51);
    let shift = gaussian(5, p, 52);
    let x = DMatrix::from_fn(n, p, |i, j| base[(i, j)] + shift[(i % 5, j)]);
    let x = deconf::linalg::standardize_columns(&x, None).unwrap().0;
    let k = estimate_kinship(&x).unwrap();
    let truth = PlmmDecomposition::with_components(k.clone(), 2.0 / 3.0, 3.0).unwrap();
    let (mut s_sum, mut e_sum) = (0.0, 0.0);
    let mut worst_equiv: f64 = 0.0;
    for rep in 0..reps {
        let mut rng = seeded(40_000 + rep as u64);
        let z = DVector::from_fn(n, |i, _| {
            let v: f64 = rng.sample(StandardNormal);
            v * (2.0 * truth.eigvals[i] + 1.0).sqrt()
        });
        let y = &truth.eigvecs * z;
        let vc = fit_null_variance_components(&y, &k).unwrap();
        s_sum += vc.sigma_s2;
        e_sum += vc.sigma_e2;
        if rep < 5 {
            let c = 3.7;
            let scaled = fit_null_variance_components(&(&y * c), &k).unwrap();
            worst_equiv = worst_equiv
                .max((scaled.eta - vc.eta).abs())
                .max((scaled.sigma_s2 / (c * c * vc.sigma_s2) - 1.0).abs())
                .max((scaled.sigma_e2 / (c * c * vc.sigma_e2) - 1.0).abs());
        }
    }
    let (ms, me) = (s_sum / reps as f64, e_sum / reps as f64);
    Outcome::new(
        (ms / 2.0 - 1.0).abs() < 0.1 && (me - 1.0).abs() < 0.1 && worst_equiv < 1e-6,
        format!("mean sigma_s2 {ms:.3} (target 2), mean sigma_e2 {me:.3} (target 1), scale equivariance deviation {worst_equiv:.2e}"),
    )
}

// ---------------------------------------------------------------- 6, 7

struct GridRun {
    /// Scenario spec and summary per grid point, in grid order.
    points: Vec<(ScenarioSpec, MetricsSummary)>,
    failures: usize,
    elapsed: Duration,
}

fn run_grid(grid: Grid, base_seed: u64) -> GridRun {
    let cfg = ExperimentConfig {
        name: "acceptance".into(),
        replications: 100,
        base_seed,
        grid,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let threads = resolve_threads(None).unwrap();
    let result = run_experiment_with(&cfg, threads, &EvalSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let sums: BTreeMap<usize, MetricsSummary> = result.summaries().unwrap();
    let points = result.scenarios.iter().map(|s| (s.params.spec.clone(), sums[&s.index].clone())).collect();
    GridRun { points, failures: result.failures.len(), elapsed }
}

fn method<'a>(s: &'a MetricsSummary, prefix: &str) -> &'a MethodSummary {
    s.methods.iter().find(|m| m.method.starts_with(prefix)).unwrap()
}

fn figure2_run() -> &'static GridRun {
    static RUN: OnceLock<GridRun> = OnceLock::new();
    RUN.get_or_init(|| {
        run_grid(
            Grid {
                bnr: vec![0.0, 1.5, 3.0],
                snr: vec![1.5],
                q: vec![10],
                p: vec![300],
                n: vec![150],
                s: 8,
                k: vec![KValue::Fixed(10)],
                ..Grid::default()
            },
            1,
        )
    })
}

fn figure2_pattern() -> Outcome {
    let run = figure2_run();
    let col = |prefix: &str, f: fn(&MethodSummary) -> f64| -> Vec<f64> {
        run.points.iter().map(|(_, s)| f(method(s, prefix))).collect()
    };
    let lasso = col("lasso", |m| m.pauc50);
    let pc = col("pc_lasso", |m| m.pauc50);
    let plmm = col("plmm", |m| m.pauc50);
    let pc_size = col("pc_lasso", |m| m.model_size);
    let plmm_size = col("plmm", |m| m.model_size);
    let decreasing = lasso.windows(2).all(|w| w[1] < w[0]);
    let decline = 1.0 - lasso[2] / lasso[0];
    let compact = plmm_size.iter().zip(&pc_size).all(|(a, b)| a < b);
    let budget = run.elapsed < Duration::from_secs(1800);
    let checks = [
        ("lasso strictly decreasing", decreasing),
        ("lasso decline >= 20%", decline >= 0.2),
        ("pc_lasso spread < 15%", spread(&pc) < 0.15),
        ("plmm spread < 15%", spread(&plmm) < 0.15),
        ("plmm size < pc_lasso size", compact),
        ("runtime < 30 min", budget),
        ("no failed replications", run.failures == 0),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome::new(
        failed.is_empty(),
        format!(
            "pauc50 lasso {} (decline {:.1}%), pc_lasso {} (spread {:.1}%), plmm {} (spread {:.1}%); size pc_lasso {} plmm {}; {:.0}s{}",
            fmt(&lasso),
            100.0 * decline,
            fmt(&pc),
            100.0 * spread(&pc),
            fmt(&plmm),
            100.0 * spread(&plmm),
            fmt(&pc_size),
            fmt(&plmm_size),
            run.elapsed.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn figure3_pattern() -> Outcome {
    let run = figure2_run();
    let rel = |i: usize, prefix: &str| {
        let m = method(&run.points[i].1, prefix);
        (m.relative_mse.unwrap(), m.relative_mae.unwrap())
    };
    let (pc3, plmm3) = (rel(2, "pc_lasso"), rel(2, "plmm"));
    let (pc0, plmm0) = (rel(0, "pc_lasso"), rel(0, "plmm"));
    let strong = pc3.0 < 0.7 && pc3.1 < 0.7 && plmm3.0 < 0.7 && plmm3.1 < 0.7;
    let none = pc0.0 >= 0.9 && plmm0.0 >= 0.9;
    Outcome::new(
        strong && none,
        format!(
            "BNR 3 rel (mse, mae): pc_lasso ({:.3}, {:.3}), plmm ({:.3}, {:.3}); BNR 0 rel mse: pc_lasso {:.3}, plmm {:.3}",
            pc3.0, pc3.1, plmm3.0, plmm3.1, pc0.0, plmm0.0
        ),
    )
}

// ---------------------------------------------------------------- 8

fn figure4_pattern() -> Outcome {
    let run = run_grid(
        Grid {
            bnr: vec![1.5],
            snr: vec![1.5],
            q: vec![10],
            p: vec![50, 150, 300, 600],
            n: vec![150],
            s: 8,
            k: vec![KValue::Fixed(10)],
            block_signs: BlockSigns::Alternating,
            ..Grid::default()
        },
        1,
    );
    let rel = |prefix: &str| -> Vec<f64> {
        run.points.iter().map(|(_, s)| method(s, prefix).relative_mse.unwrap()).collect()
    };
    let (pc, plmm) = (rel("pc_lasso"), rel("plmm"));
    let ok = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]) && v[3] < 1.0 && v[0] >= 1.0;
    Outcome::new(
        ok(&pc) && ok(&plmm) && run.failures == 0,
        format!("rel mse over p = 50, 150, 300, 600: pc_lasso {}, plmm {}; {:.0}s", fmt(&pc), fmt(&plmm), run.elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 9

fn figure5_pattern() -> Outcome {
    let run = run_grid(
        Grid {
            bnr: vec![1.5],
            snr: vec![1.5],
            q: vec![5, 20, 100],
            p: vec![300],
            n: vec![150],
            s: 8,
            k: vec![KValue::Q],
            block_signs: BlockSigns::Alternating,
            ..Grid::default()
        },
        1,
    );
    let rel = |prefix: &str| -> Vec<f64> {
        run.points.iter().map(|(_, s)| method(s, prefix).relative_mse.unwrap()).collect()
    };
    let (pc, plmm) = (rel("pc_lasso"), rel("plmm"));
    let stable = spread(&plmm) < 0.25;
    let pc_grows = pc[2] >= 1.5 * pc[0] && pc[2] > 1.0;
    Outcome::new(
        stable && pc_grows && run.failures == 0,
        format!(
            "rel mse over q = 5, 20, 100: plmm {} (spread {:.1}%), pc_lasso k=q {} (q=100 / q=5 = {:.2}); {:.0}s",
            fmt(&plmm),
            100.0 * spread(&plmm),
            fmt(&pc),
            pc[2] / pc[0],
            run.elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 10

fn pauc_definition() -> Outcome {
    let mut curve = PrecisionCurve::default();
    for size in 1..=50usize {
        curve.visited.insert(size, if size <= 8 { 1.0 } else { 8.0 / size as f64 });
    }
    let harmonic = |m: usize| (1..=m).map(|i| 1.0 / i as f64).sum::<f64>();
    let expected = 8.0 + 8.0 * (harmonic(50) - harmonic(8));
    let got = pauc(&curve, 50);
    Outcome::new((got - expected).abs() < 1e-10, format!("pauc {got:.12}, expected {expected:.12} (reported unconfounded lasso value 22.6)"))
}

// ---------------------------------------------------------------- 11

fn determinism() -> Outcome {
    let cfg = ExperimentConfig::parse(
        "[experiment]\nname = determinism\nreplications = 3\nbase_seed = 17\nmethods = lasso, pc_lasso, plmm\n\
         [grid]\nbnr = 0, 3\nq = 5\np = 60\nn = 60\ns = 4\nk = q\n",
    )
    .unwrap();
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([1, 8, 8]) {
        let cfg = ExperimentConfig { threads: Some(threads), ..cfg.clone() };
        run_to_dir(&cfg, dir.path()).unwrap();
    }
    let mut files: Vec<String> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f.ends_with(".csv"))
        .collect();
    files.sort();
    let mut identical = files.iter().any(|f| f == "replications.csv");
    for f in &files {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        for d in &dirs[1..] {
            identical &= a == std::fs::read(d.path().join(f)).unwrap();
        }
    }
    Outcome::new(identical, format!("{} compared across runs at 1, 8 and 8 threads", files.join(", ")))
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("DECONF_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "scenario tables", scenario_tables),
        (2, "bias oracle", bias_oracle),
        (3, "decomposition oracle", decomposition_oracle),
        (4, "solver correctness", solver_correctness),
        (5, "variance components", variance_components),
        (6, "figure 2 pattern", figure2_pattern),
        (7, "figure 3 pattern", figure3_pattern),
        (8, "figure 4 pattern", figure4_pattern),
        (9, "figure 5 pattern", figure5_pattern),
        (10, "pauc definition", pauc_definition),
        (11, "determinism", determinism),
    ];
    println!("acceptance: {} worker thread(s)", resolve_threads(None).unwrap());
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} [{name}] ({:.1}s) {}", start.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: FAILED criteria {failed:?} of {}", criteria.len());
        if std::env::var("DECONF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
        return;
    }
    println!("acceptance: all criteria passed");
}
