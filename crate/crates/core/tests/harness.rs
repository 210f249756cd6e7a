mod common;

use std::fs;

use deconf::confound::{BlockSigns, Convention};
use deconf::evaluation::{MethodSpec, PcHandling};
use deconf::harness::io::{feature_names, is_cache, CACHE_MAGIC};
use deconf::harness::*;
use deconf::linalg::standardize_columns;
use deconf::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

const SMALL: &str = "\
# two scenarios
[experiment]
name = small
replications = 2
base_seed = 5
methods = lasso, pc_lasso, plmm
folds = 3

[grid]
bnr = 0, 1.5
q = 2
n = 30
p = 24
s = 3
k = q, 3
";

#[test]
fn config_parses_every_key() {
    let text = "[experiment]\nname = full\nreplications = 3\nseed = 9\nmethods = plmm\noutput_dir = out\n\
                threads = 2\nfolds = 5\npc_handling = full_data\n[grid]\nbnr = 1\nsnr = 1, 2\nq = 5\np = 50\n\
                n = 40\ns = 4\nk = factors, 7\nhybrid = yes\nconvention = raw\nblock_signs = alternating\n\
                sigma_e = 0.5\nvar_psi = 2\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.base_seed, 9);
    assert_eq!(cfg.threads, Some(2));
    assert_eq!(cfg.pc_handling, PcHandling::FullData);
    assert_eq!(cfg.grid.snr, vec![1.0, 2.0]);
    assert_eq!(cfg.grid.k, vec![KValue::Factors, KValue::Fixed(7)]);
    assert!(cfg.grid.hybrid);
    assert_eq!(cfg.grid.convention, Convention::Raw);
    assert_eq!(cfg.grid.block_signs, BlockSigns::Alternating);
    let specs = cfg.grid.scenarios();
    assert_eq!(specs.len(), 2);
    assert_eq!(specs[0].factors(), 10);
    assert_eq!(method_specs(&cfg.methods, &cfg.grid.k, &specs[0]), vec![MethodSpec::Plmm]);
    let pcs = method_specs(&[MethodKind::PcLasso], &cfg.grid.k, &specs[0]);
    assert_eq!(pcs, vec![MethodSpec::PcLasso { k: 10 }, MethodSpec::PcLasso { k: 7 }]);
}

#[test]
fn config_errors() {
    for (text, line) in [("[grid]\nq = 2, x\n", 2), ("[nope]\n", 1), ("[experiment]\n\nfoo = 1\n", 3), ("junk\n", 1)] {
        match ExperimentConfig::parse(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    assert!(matches!(ExperimentConfig::parse("replications = 0\n"), Err(Error::Config(_))));
}

#[test]
fn grid_nesting_order() {
    let cfg = ExperimentConfig::parse("[grid]\np = 40, 80\nq = 2, 4\nbnr = 0, 1\n").unwrap();
    let keys: Vec<(usize, usize, f64)> = cfg.grid.scenarios().iter().map(|s| (s.p, s.q, s.bnr)).collect();
    assert_eq!(keys[0], (40, 2, 0.0));
    assert_eq!(keys[1], (40, 2, 1.0));
    assert_eq!(keys[2], (40, 4, 0.0));
    assert_eq!(keys[4], (80, 2, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn csv_and_cache_round_trip(n in 1usize..12, p in 1usize..8, seed in 0u64..1000) {
        let dir = tempfile::tempdir().unwrap();
        let x = common::gaussian(n, p, seed) * 1e3;
        let names = feature_names(p);
        let csv = dir.path().join("m.csv");
        write_matrix_csv(&csv, &names, &x).unwrap();
        let (n2, x2) = load_matrix(&csv, &[]).unwrap();
        prop_assert_eq!(&n2, &names);
        prop_assert_eq!(&x2, &x);
        let bin = dir.path().join("m.dcnf");
        write_cache(&bin, &names, &x).unwrap();
        prop_assert!(is_cache(&bin).unwrap());
        prop_assert!(!is_cache(&csv).unwrap());
        prop_assert_eq!(&fs::read(&bin).unwrap()[..5], &CACHE_MAGIC[..]);
        let (n3, x3) = load_matrix(&bin, &[]).unwrap();
        prop_assert_eq!(n3, names);
        prop_assert_eq!(x3, x);
    }
}

#[test]
fn missing_values_are_rejected() {
    for cell in ["", "NA", "NaN"] {
        let t = Table::from_reader(format!("a,b\n1,2\n3,{cell}\n").as_bytes()).unwrap();
        assert!(t.numeric_matrix(&[]).is_err(), "{cell:?}");
    }
}

#[test]
fn experiment_outputs_round_trip_through_ingestion() {
    let cfg = ExperimentConfig::parse(SMALL).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let result = run_to_dir(&cfg, dir.path()).unwrap();
    assert!(result.failures.is_empty());
    // 2 scenarios x 2 replications x (lasso, pc k=2, pc k=3, plmm)
    assert_eq!(result.records.len(), 16);
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let t = Table::read(&path).unwrap();
            assert!(!t.rows.is_empty() || path.ends_with("failures.csv"), "{}", path.display());
            assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
        }
    }
    let reps = Table::read(&dir.path().join("replications.csv")).unwrap();
    for col in ["scenario", "replication", "seed", "lambda_min", "model_size", "se2", "ae", "pauc50", "pe"] {
        assert_eq!(reps.numeric_column(col).unwrap().len(), 16);
    }
    let back = read_records(dir.path()).unwrap();
    assert_eq!(back.len(), 16);
    for ((s1, a), (s2, b)) in result.records.iter().zip(&back) {
        assert_eq!(s1, s2);
        assert_eq!(a.method, b.method);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.se2, b.se2);
        assert_eq!(a.curve, b.curve);
    }
    let agg_before = fs::read(dir.path().join("aggregate.csv")).unwrap();
    report(dir.path()).unwrap();
    assert_eq!(fs::read(dir.path().join("aggregate.csv")).unwrap(), agg_before);
}

#[test]
fn replication_seeds_and_thread_invariance() {
    let cfg = ExperimentConfig::parse(SMALL).unwrap();
    let settings = EvalSettings { folds: 3, ..EvalSettings::default() };
    let one = run_experiment_with(&cfg, 1, &settings).unwrap();
    let four = run_experiment_with(&cfg, 4, &settings).unwrap();
    assert_eq!(one.records, four.records);
    for (_, r) in &one.records {
        assert_eq!(r.seed, 5 + r.replication as u64);
    }
    let a = one.summaries().unwrap();
    let b = four.summaries().unwrap();
    for (k, s) in &a {
        assert_eq!(s.methods.len(), b[k].methods.len());
        for (x, y) in s.methods.iter().zip(&b[k].methods) {
            assert_eq!(x.mse, y.mse);
            assert_eq!(x.precision_curve, y.precision_curve);
        }
        assert_eq!(s.get("lasso").unwrap().relative_mse, Some(1.0));
    }
}

#[test]
fn unsolvable_grid_is_rejected_before_running() {
    let cfg = ExperimentConfig::parse("[grid]\np = 24\nq = 2\nbnr = 1e15\nn = 30\ns = 3\n").unwrap();
    assert!(matches!(solve_grid(&cfg), Err(Error::NoBracket { .. })));
}

#[test]
fn thread_resolution() {
    assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
    assert!(resolve_threads(Some(0)).is_err());
    assert!(resolve_threads(None).unwrap() >= 1);
}

fn batch_matrix(n: usize, p: usize, levels: usize, seed: u64) -> (DMatrix<f64>, Vec<String>) {
    let base = common::gaussian(n, p, seed);
    let shift = common::gaussian(levels, p, seed + 1);
    let labels: Vec<String> = (0..n).map(|i| format!("batch{}", i % levels)).collect();
    let x = DMatrix::from_fn(n, p, |i, j| base[(i, j)] + shift[(i % levels, j)]);
    (standardize_columns(&x, None).unwrap().0, labels)
}

#[test]
fn semisynth_writes_summary_and_reuses_seeds_across_g() {
    let (x, labels) = batch_matrix(60, 40, 3, 1);
    let cfg = SemisynthConfig {
        g_values: vec![0.0, 1.0],
        s: 3,
        replications: 2,
        methods: vec![MethodSpec::Lasso, MethodSpec::Plmm],
        folds: 3,
        ..SemisynthConfig::default()
    };
    let res = run_semisynth(&x, &labels, &cfg, 1).unwrap();
    assert_eq!(res.records.len(), 2 * 2 * 2);
    let seeds = |g: usize| -> Vec<u64> { res.records.iter().filter(|(i, _)| *i == g).map(|(_, r)| r.seed).collect() };
    assert_eq!(seeds(0), seeds(1));
    let dir = tempfile::tempdir().unwrap();
    let sums = write_semisynth(dir.path(), &res).unwrap();
    let t = Table::read(&dir.path().join("summary.csv")).unwrap();
    assert_eq!(t.header, ["g", "method", "relative_mse", "relative_mae", "pauc50", "model_size"]);
    assert_eq!(t.rows.len(), 4);
    let table = format_summary_table(&res.g_values, &sums);
    assert!(table.contains("Relative MSE") && table.contains("plmm"));
}

#[test]
fn fit_report_has_null_row_and_one_row_per_k() {
    let x = common::standardized(60, 30, 3);
    let y = x.column(0) * 2.0 + common::gaussian_vec(60, 4);
    let names = feature_names(30);
    let methods = vec![
        MethodSpec::Lasso,
        MethodSpec::PcLasso { k: 3 },
        MethodSpec::PcLasso { k: 10 },
        MethodSpec::PcLasso { k: 20 },
        MethodSpec::Plmm,
    ];
    let opts = deconf::evaluation::CvOptions { n_folds: 4, seed: 1, ..Default::default() };
    let rep = fit_report(&x, &names, &y, &methods, &opts).unwrap();
    assert_eq!(rep.rows[0].method, "null");
    assert_eq!(rep.rows[0].model_size, 0);
    assert_eq!(rep.rows.len(), 6);
    assert!(rep.rows[1..].iter().all(|r| r.pe <= rep.rows[0].pe));
    assert!(rep.rows[1].selected.contains(&"x1".to_string()));
    let dir = tempfile::tempdir().unwrap();
    write_fit_report(dir.path(), &rep, &names).unwrap();
    let t = Table::read(&dir.path().join("fit_report.csv")).unwrap();
    assert_eq!(t.rows.len(), 6);
    let coefs = Table::read(&dir.path().join("path_lasso_coefs.csv")).unwrap();
    assert!(coefs.numeric_column("coefficient").unwrap().iter().all(|v| *v != 0.0));
}
