use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use deconf::confound::{generate_dataset, solve_scenario, BlockSigns, Convention, ScenarioParams, ScenarioSpec};
use deconf::evaluation::{CvOptions, MethodSpec};
use deconf::harness::{
    self, format_fit_table, format_summary_table, load_matrix, resolve_threads, run_semisynth, write_cache,
    write_dataset, write_fit_report, write_semisynth, ExperimentConfig, KValue, MethodKind, SemisynthConfig, Table,
};
use deconf::linalg::standardize_columns;

#[derive(Parser)]
#[command(name = "deconf", version, about = "Penalized regression under unobserved confounding")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Experiment config file (key = value with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; replication r uses seed + r.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides DECONF_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Var(x) convention used when solving scenarios.
    #[arg(long, global = true, value_enum)]
    convention: Option<ConventionArg>,
    /// Output format for printed tables.
    #[arg(long, global = true, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Standardized,
    Raw,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Standardized => Convention::Standardized,
            ConventionArg::Raw => Convention::Raw,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignsArg {
    Strict,
    Alternating,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Confounders entering the outcome (comma list allowed).
    #[arg(long, value_delimiter = ',', default_value = "10")]
    q: Vec<usize>,
    /// Bias-to-noise ratio (comma list allowed).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    bnr: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    snr: f64,
    #[arg(long, default_value_t = 600)]
    p: usize,
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    var_psi: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_e: f64,
    /// Latent factors loading on X (defaults to q).
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long, value_enum, default_value = "strict")]
    block_signs: SignsArg,
}

impl ScenarioArgs {
    fn specs(&self, convention: Convention) -> Vec<ScenarioSpec> {
        let mut out = Vec::new();
        for &q in &self.q {
            for &bnr in &self.bnr {
                out.push(ScenarioSpec {
                    p: self.p,
                    q,
                    n: self.n,
                    s: self.s,
                    snr: self.snr,
                    bnr,
                    var_psi_target: self.var_psi,
                    sigma_e: self.sigma_e,
                    convention,
                    block_signs: match self.block_signs {
                        SignsArg::Strict => BlockSigns::Strict,
                        SignsArg::Alternating => BlockSigns::Alternating,
                    },
                    latent_factors: self.factors,
                });
            }
        }
        out
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve generator parameters (rho, r, b) for target ratios.
    SolveScenario(ScenarioArgs),
    /// Generate one synthetic dataset and its truth.
    Simulate(ScenarioArgs),
    /// Run an experiment config.
    Run,
    /// Semi-synthetic study on a real feature matrix.
    Semisynth(SemisynthArgs),
    /// Fit each method on user data and report PE and model size.
    Fit(FitArgs),
    /// Recompute aggregates and plot tables from a result directory.
    Report,
}

#[derive(Args)]
struct SemisynthArgs {
    /// Feature matrix: CSV with header, or a DCNF1 cache.
    #[arg(long)]
    matrix: PathBuf,
    /// Name of the confounder column.
    #[arg(long)]
    label: String,
    /// CSV holding the label column, when it is not in the matrix file.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2")]
    g: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    s: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma_e: f64,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    #[arg(long, value_delimiter = ',', default_value = "lasso,pc_lasso,plmm")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Also write the ingested matrix as a DCNF1 cache.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header holding features and the outcome, or a DCNF1 cache
    /// of features together with --y-file.
    #[arg(long)]
    matrix: PathBuf,
    /// Outcome column name.
    #[arg(long)]
    y: String,
    /// CSV holding the outcome column, when it is not in the matrix file.
    #[arg(long)]
    y_file: Option<PathBuf>,
    /// Further columns to leave out of the features.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "lasso,pc_lasso,plmm")]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.chain().find_map(|c| c.downcast_ref::<deconf::Error>()).map_or(1, |d| d.exit_code());
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let g = cli.global;
    match cli.command {
        Command::SolveScenario(a) => solve_cmd(&g, &a),
        Command::Simulate(a) => simulate_cmd(&g, &a),
        Command::Run => run_cmd(&g),
        Command::Semisynth(a) => semisynth_cmd(&g, &a),
        Command::Fit(a) => fit_cmd(&g, &a),
        Command::Report => report_cmd(&g),
    }
}

fn input(path: &Path) -> Result<&Path> {
    if !path.exists() {
        return Err(deconf::Error::Config(format!("input file {} not found", path.display())).into());
    }
    Ok(path)
}

fn out_dir(g: &Global) -> Result<PathBuf> {
    g.out.clone().ok_or_else(|| deconf::Error::Config("--out is required".into()).into())
}

fn convention(g: &Global) -> Convention {
    g.convention.map_or(Convention::Standardized, Convention::from)
}

/// Scenario flags the solver rejects are input errors, not runtime failures.
fn solve_input(spec: &ScenarioSpec) -> deconf::Result<ScenarioParams> {
    solve_scenario(spec).map_err(|e| match e {
        deconf::Error::Domain(m) | deconf::Error::Dimension(m) => deconf::Error::Config(m),
        other => other,
    })
}

fn solve_cmd(g: &Global, a: &ScenarioArgs) -> Result<u8> {
    let conv = convention(g);
    let solved: Vec<ScenarioParams> = a.specs(conv).iter().map(solve_input).collect::<deconf::Result<_>>()?;
    if g.format == Format::Csv {
        println!("q,bnr,bsr,snr,rho,r,b,a,g,var_psi,convention");
        for s in &solved {
            let sp = &s.spec;
            println!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                sp.q,
                sp.bnr,
                sp.bsr(),
                sp.snr,
                s.rho,
                s.r,
                s.b,
                s.a,
                s.g,
                s.var_psi,
                conv.name()
            );
        }
    } else {
        println!("{:>6} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "q", "BNR", "BSR", "SNR", "rho", "r", "b");
        for s in &solved {
            let sp = &s.spec;
            println!(
                "{:>6} {:>6.2} {:>6.2} {:>6.2} {:>8.2} {:>8.2} {:>8.2}",
                sp.q,
                sp.bnr,
                sp.bsr(),
                sp.snr,
                s.rho,
                s.r,
                s.b
            );
        }
        println!("(convention: {})", conv.name());
    }
    Ok(0)
}

fn simulate_cmd(g: &Global, a: &ScenarioArgs) -> Result<u8> {
    let out = out_dir(g)?;
    let specs = a.specs(convention(g));
    if specs.len() != 1 {
        return Err(deconf::Error::Config("simulate takes a single q and bnr".into()).into());
    }
    let params = solve_input(&specs[0])?;
    let data = generate_dataset(&params, a.n, a.s, a.sigma_e, g.seed.unwrap_or(1))?;
    write_dataset(&out, &data).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} rows x {} features to {}", data.n(), data.p(), out.display());
    Ok(0)
}

fn run_cmd(g: &Global) -> Result<u8> {
    let path = g.config.as_deref().ok_or_else(|| deconf::Error::Config("run needs --config".into()))?;
    let mut cfg = ExperimentConfig::from_file(input(path)?)?;
    if let Some(s) = g.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = g.threads {
        cfg.threads = Some(t);
    }
    if let Some(c) = g.convention {
        cfg.grid.convention = c.into();
    }
    let out = g.out.clone().or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
        deconf::Error::Config("no output directory: pass --out or set output_dir in the config".into())
    })?;
    let result = harness::run_to_dir(&cfg, &out)?;
    let summaries = result.summaries().unwrap_or_default();
    println!("{}: {} scenarios, {} records -> {}", cfg.name, result.scenarios.len(), result.records.len(), out.display());
    for (s, sum) in &summaries {
        for m in &sum.methods {
            println!(
                "  scenario {s} {:<14} rel_mse {:>6} pauc50 {:>6.2} size {:>6.1}",
                m.method,
                m.relative_mse.map_or("-".into(), |v| format!("{v:.3}")),
                m.pauc50,
                m.model_size
            );
        }
    }
    if !result.failures.is_empty() {
        eprintln!("{} replication(s) failed:", result.failures.len());
        for f in &result.failures {
            eprintln!("  scenario {} replication {}: {}", f.scenario, f.replication, f.message);
        }
        return Ok(1);
    }
    Ok(0)
}

fn method_list(names: &[String], ks: &[usize]) -> Result<Vec<MethodSpec>> {
    let kinds: Vec<MethodKind> = names.iter().map(|m| m.parse()).collect::<deconf::Result<_>>()?;
    let ks: Vec<KValue> = ks.iter().map(|&k| KValue::Fixed(k)).collect();
    Ok(harness::method_specs(&kinds, &ks, &ScenarioSpec::default()))
}

fn semisynth_cmd(g: &Global, a: &SemisynthArgs) -> Result<u8> {
    let out = out_dir(g)?;
    let matrix = input(&a.matrix)?;
    let label_table = match &a.labels {
        Some(p) => Table::read(input(p)?)?,
        None if harness::io::is_cache(matrix)? => {
            return Err(deconf::Error::Config("a DCNF1 matrix needs --labels".into()).into())
        }
        None => Table::read(matrix)?,
    };
    let labels = label_table.column(&a.label)?;
    let exclude = if a.labels.is_none() { vec![a.label.as_str()] } else { vec![] };
    let (names, raw) = load_matrix(matrix, &exclude)?;
    if let Some(c) = &a.cache {
        write_cache(c, &names, &raw)?;
    }
    let (x, _) = standardize_columns(&raw, Some(&names))?;
    let cfg = SemisynthConfig {
        g_values: a.g.clone(),
        s: a.s,
        sigma_e: a.sigma_e,
        replications: a.replications,
        base_seed: g.seed.unwrap_or(1),
        methods: method_list(&a.methods, &a.k)?,
        folds: a.folds,
    };
    let threads = resolve_threads(g.threads)?;
    let result = run_semisynth(&x, &labels, &cfg, threads)?;
    let summaries = write_semisynth(&out, &result)?;
    if g.format == Format::Csv {
        print!("{}", std::fs::read_to_string(out.join("summary.csv"))?);
    } else {
        print!("{}", format_summary_table(&result.g_values, &summaries));
    }
    if !result.failures.is_empty() {
        eprintln!("{} replication(s) failed; see failures.csv", result.failures.len());
        return Ok(1);
    }
    Ok(0)
}

fn fit_cmd(g: &Global, a: &FitArgs) -> Result<u8> {
    let out = out_dir(g)?;
    let matrix = input(&a.matrix)?;
    let y = match &a.y_file {
        Some(p) => Table::read(input(p)?)?.numeric_column(&a.y)?,
        None => Table::read(matrix)?.numeric_column(&a.y)?,
    };
    let mut exclude: Vec<&str> = a.exclude.iter().map(String::as_str).collect();
    if a.y_file.is_none() {
        exclude.push(&a.y);
    }
    let (names, raw) = load_matrix(matrix, &exclude)?;
    if raw.nrows() != y.len() {
        return Err(deconf::Error::Config(format!("{} feature rows but {} outcomes", raw.nrows(), y.len())).into());
    }
    let (x, _) = standardize_columns(&raw, Some(&names))?;
    let opts = CvOptions { n_folds: a.folds, seed: g.seed.unwrap_or(1), ..CvOptions::default() };
    let methods = method_list(&a.methods, &a.k)?;
    let threads = resolve_threads(g.threads)?;
    let report = harness::experiment::with_pool(threads, || harness::fit_report(&x, &names, &y, &methods, &opts))??;
    write_fit_report(&out, &report, &names)?;
    if g.format == Format::Csv {
        print!("{}", std::fs::read_to_string(out.join("fit_report.csv"))?);
    } else {
        print!("{}", format_fit_table(&report.rows));
    }
    Ok(0)
}

fn report_cmd(g: &Global) -> Result<u8> {
    let dir = out_dir(g)?;
    input(&dir.join(harness::output::REPLICATIONS_FILE))?;
    let summaries = harness::report(&dir)?;
    println!("re-aggregated {} scenario(s) in {}", summaries.len(), dir.display());
    Ok(0)
}
