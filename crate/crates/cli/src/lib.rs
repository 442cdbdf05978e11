//! Command-line driver: surrogate fitting, ground truth, benchmark runs,
//! scoring, summaries, meta-analysis and self-checks.

pub mod report;
pub mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use mcbench::density::{save_density, BUNDLED_NAMES};
use mcbench::harness::{
    self, generate_ground_truth, ground_truth_seed, read_json, read_matrix, resolve_example, score_and_write, summarize,
    write_json, Budget, ChainHeader, RunArtifacts, RunConfig, DEFAULT_GROUND_TRUTH_DRAWS, DIAGNOSTICS_FILE, SCORES_FILE,
    SUMMARY_FILE,
};
use mcbench::meta::{meta_analyze, MetaConfig, MetaReport};
use mcbench::metrics::ScoreTable;
use mcbench::samplers::InitMode;
use mcbench::surrogate::{fit_surrogate, FitConfig};
use mcbench::SampleMatrix;

pub use report::{emit_report, Format};

pub const META_JSON: &str = "meta.json";
pub const META_CSV: &str = "meta.csv";

#[derive(Debug, Parser)]
#[command(name = "mcbench", version, about = "Ground-truth benchmark for MCMC samplers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a Gaussian-mixture surrogate density to stored chain draws.
    FitSurrogate(FitSurrogateArgs),
    /// Draw exact samples for each example.
    GroundTruth(GroundTruthArgs),
    /// Run every sampler on every example, then score and report.
    Run(RunArgs),
    /// Rescore a stored run.
    Score(ScoreArgs),
    /// Summarize a stored score table.
    Summarize(ScoreArgs),
    /// Relate the traditional diagnostics to the real estimation error.
    MetaAnalyze(MetaArgs),
    /// List the bundled example densities.
    ListExamples,
    /// Run the built-in numerical oracles.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FitSurrogate(_) => "fit-surrogate",
            Command::GroundTruth(_) => "ground-truth",
            Command::Run(_) => "run",
            Command::Score(_) => "score",
            Command::Summarize(_) => "summarize",
            Command::MetaAnalyze(_) => "meta-analyze",
            Command::ListExamples => "list-examples",
            Command::Selftest(_) => "selftest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BudgetMode {
    Wallclock,
    Evals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Exact,
    Approx,
}

#[derive(Debug, Args)]
pub struct FitSurrogateArgs {
    /// Chain files: stored chain headers (`.json`, with the `.bin` beside
    /// them) or CSV with one draw per line. Rows are concatenated in order.
    #[arg(long = "chain", required = true)]
    pub chains: Vec<PathBuf>,
    /// Name of the fitted density.
    #[arg(long)]
    pub name: String,
    /// Run configuration supplying the seed when `--seed` is absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output density file; the fit report goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GroundTruthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Examples to draw for (bundled names or density files); overrides the
    /// config's list.
    #[arg(long = "example")]
    pub examples: Vec<String>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub budget_mode: Option<BudgetMode>,
    /// Evaluations or thread CPU seconds per chain.
    #[arg(long)]
    pub budget: Option<f64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub checkpoints: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table-text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "table-text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MetaArgs {
    /// Directory holding the score and diagnostics tables.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "table-text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or missing inputs named on the command line (exit 1).
    Usage(String),
    /// The command itself failed (exit 2).
    Exec(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Exec(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            let mut cmd = Cli::command();
            cmd.build();
            let usage = match cmd.find_subcommand_mut(name) {
                Some(sub) => sub.render_usage(),
                None => cmd.render_usage(),
            };
            eprintln!("error: {msg}\n\n{usage}");
            1
        }
        Err(CliError::Exec(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::FitSurrogate(a) => cmd_fit_surrogate(a),
        Command::GroundTruth(a) => cmd_ground_truth(a),
        Command::Run(a) => cmd_run(a),
        Command::Score(a) => cmd_score(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::MetaAnalyze(a) => cmd_meta(a),
        Command::ListExamples => {
            for name in BUNDLED_NAMES {
                let d = mcbench::density::bundled_by_name(name).map_err(anyhow::Error::from)?;
                println!("{name}\t{}", d.dim());
            }
            Ok(())
        }
        Command::Selftest(a) => {
            let checks = selftest::run_checks(a.seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Exec(anyhow::anyhow!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    if !path.is_file() {
        return Err(usage(format!("config file {} not found", path.display())));
    }
    RunConfig::load(path).map_err(|e| usage(e.to_string()))
}

fn config_dir(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

/// Applies command-line overrides to a loaded configuration.
pub fn apply_overrides(config: &mut RunConfig, a: &RunArgs) -> Result<(), CliError> {
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if a.budget_mode.is_some() || a.budget.is_some() {
        let amount = a.budget.unwrap_or(config.budget.amount());
        let mode = a.budget_mode.unwrap_or(if config.budget.is_deterministic() {
            BudgetMode::Evals
        } else {
            BudgetMode::Wallclock
        });
        config.budget = match mode {
            BudgetMode::Evals => {
                if !(amount >= 1.0 && amount.fract() == 0.0) {
                    return Err(usage(format!("evaluation budget must be a positive integer, got {amount}")));
                }
                Budget::Evaluations { amount: amount as u64 }
            }
            BudgetMode::Wallclock => Budget::WallClock { amount },
        };
    }
    if let Some(k) = a.chains {
        config.k = k;
    }
    if let Some(c) = a.checkpoints {
        config.checkpoints = c;
    }
    if let Some(init) = a.init {
        config.init_mode = match init {
            InitArg::Exact => InitMode::Exact,
            InitArg::Approx => InitMode::Approx,
        };
    }
    if let Some(out) = &a.out {
        config.output_dir = out.clone();
    }
    config.validate().map_err(|e| usage(e.to_string()))
}

fn report(summary: &harness::Summary, table: &ScoreTable, format: Format, dir: &Path) -> Result<(), CliError> {
    let files = emit_report(summary, table, format, dir)?;
    if format == Format::TableText {
        print!("{}", report::render_table(summary));
    }
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let mut config = load_config(&a.config)?;
    apply_overrides(&mut config, &a)?;
    let (_, table, summary) = harness::execute(&config, config_dir(&a.config)).context("run failed")?;
    report(&summary, &table, a.format, &config.output_dir)
}

fn require_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("directory {} not found", dir.display())))
    }
}

fn cmd_score(a: ScoreArgs) -> Result<(), CliError> {
    require_dir(&a.out)?;
    let artifacts = RunArtifacts::load(&a.out).context("loading run")?;
    let (table, summary) = score_and_write(&artifacts, &a.out).context("scoring")?;
    report(&summary, &table, a.format, &a.out)
}

fn cmd_summarize(a: ScoreArgs) -> Result<(), CliError> {
    require_dir(&a.out)?;
    let table = ScoreTable::load(a.out.join(SCORES_FILE)).map_err(anyhow::Error::from)?;
    let summary = summarize(&table);
    write_json(&a.out.join(SUMMARY_FILE), &summary).map_err(anyhow::Error::from)?;
    report(&summary, &table, a.format, &a.out)
}

/// Text rendering of the meta-analysis results.
pub fn render_meta(report: &MetaReport) -> String {
    let p = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "train rows {} ({} examples), test rows {} ({} examples)\n",
        report.n_train,
        report.train_examples.len(),
        report.n_test,
        report.test_examples.len()
    );
    out.push_str(&format!(
        "{:<8} {:>10} {:>10} {:>10} {:>8} {:>8}\n",
        "method", "MSE", "NLL", "dNLL", "p(NLL)", "p(MSE)"
    ));
    for r in &report.results {
        out.push_str(&format!(
            "{:<8} {:>10.4} {:>10.4} {:>10.4} {:>8} {:>8}\n",
            r.method,
            r.mse,
            r.nll,
            r.delta_nll,
            p(r.p_nll),
            p(r.p_mse)
        ));
    }
    out
}

fn write_meta_csv(path: &Path, report: &MetaReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["method", "features", "mse", "nll", "delta_nll", "p_nll", "p_mse"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.results {
        w.write_record([
            r.method.clone(),
            r.features.join(" "),
            r.mse.to_string(),
            r.nll.to_string(),
            r.delta_nll.to_string(),
            opt(r.p_nll),
            opt(r.p_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_meta(a: MetaArgs) -> Result<(), CliError> {
    require_dir(&a.out)?;
    let table = ScoreTable::load(a.out.join(SCORES_FILE)).map_err(anyhow::Error::from)?;
    let diagnostics = harness::read_diagnostics(&a.out.join(DIAGNOSTICS_FILE)).map_err(anyhow::Error::from)?;
    let config = MetaConfig {
        seed: a.seed,
        ..MetaConfig::default()
    };
    let (data, report) = meta_analyze(&table, &diagnostics, &config).context("meta-analysis")?;
    let doc = serde_json::json!({
        "rows": data.len(),
        "excluded_flagged": data.excluded_flagged,
        "excluded_nonfinite": data.excluded_nonfinite,
        "config": config,
        "report": report,
    });
    write_json(&a.out.join(META_JSON), &doc).map_err(anyhow::Error::from)?;
    match a.format {
        Format::TableText => print!("{}", render_meta(&report)),
        Format::Delimited => write_meta_csv(&a.out.join(META_CSV), &report)?,
    }
    Ok(())
}

fn cmd_ground_truth(a: GroundTruthArgs) -> Result<(), CliError> {
    let config = a.config.as_deref().map(load_config).transpose()?;
    let base = a.config.as_deref().and_then(config_dir);
    let examples = if !a.examples.is_empty() {
        a.examples.clone()
    } else if let Some(c) = &config {
        c.examples.clone()
    } else {
        return Err(usage("ground-truth needs --config or at least one --example"));
    };
    let seed = a.seed.or(config.as_ref().map(|c| c.seed)).unwrap_or(0);
    let draws = a
        .draws
        .or(config.as_ref().map(|c| c.ground_truth_draws))
        .unwrap_or(DEFAULT_GROUND_TRUTH_DRAWS);
    if draws < 2 {
        return Err(usage("ground truth needs at least 2 draws"));
    }
    let out = a
        .out
        .clone()
        .or(config.as_ref().map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("mcbench-out"));
    let dir = harness::ground_truth_dir(&out);
    std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    for e in &examples {
        let density = resolve_example(e, base).map_err(|err| usage(err.to_string()))?;
        let gt = generate_ground_truth(&density, draws, ground_truth_seed(seed, density.name()));
        gt.save(&dir).map_err(anyhow::Error::from)?;
        println!("{}\t{} draws", density.name(), draws);
    }
    Ok(())
}

/// Reads draws from a stored chain (header `.json` plus `.bin`) or a CSV
/// file with one draw per line and an optional header line.
pub fn read_chain_file(path: &Path) -> Result<SampleMatrix> {
    if path.extension().is_some_and(|e| e == "json") {
        let header: ChainHeader = read_json(path)?;
        return Ok(read_matrix(&path.with_extension("bin"), header.dim, header.rows)?);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| path.display().to_string())?;
    let mut out: Option<SampleMatrix> = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| path.display().to_string())?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(r) => r,
            Err(_) if i == 0 => continue,
            Err(e) => bail!("{}: line {}: {e}", path.display(), i + 1),
        };
        let m = out.get_or_insert_with(|| SampleMatrix::new(row.len()));
        if row.len() != m.dim() {
            bail!("{}: line {} has {} columns, expected {}", path.display(), i + 1, row.len(), m.dim());
        }
        m.push_row(&row);
    }
    out.with_context(|| format!("{}: no draws", path.display()))
}

fn cmd_fit_surrogate(a: FitSurrogateArgs) -> Result<(), CliError> {
    for p in &a.chains {
        if !p.is_file() {
            return Err(usage(format!("chain file {} not found", p.display())));
        }
    }
    let config_seed = a.config.as_deref().map(load_config).transpose()?.map(|c| c.seed);
    let mut draws: Option<SampleMatrix> = None;
    for p in &a.chains {
        let m = read_chain_file(p)?;
        match &mut draws {
            None => draws = Some(m),
            Some(d) if d.dim() == m.dim() => m.rows().for_each(|r| d.push_row(r)),
            Some(d) => return Err(usage(format!("{} has dimension {}, expected {}", p.display(), m.dim(), d.dim()))),
        }
    }
    let draws = draws.expect("at least one chain file");
    let fit = FitConfig {
        seed: a.seed.or(config_seed).unwrap_or(0),
        ..FitConfig::default()
    };
    let (density, fit_report) = fit_surrogate(&draws, &fit, &a.name).context("surrogate fit")?;
    if let Some(parent) = config_dir(&a.out) {
        std::fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    save_density(&density, &a.out).map_err(anyhow::Error::from)?;
    let report_path = a.out.with_extension("report.json");
    write_json(&report_path, &fit_report).map_err(anyhow::Error::from)?;
    println!(
        "{}: {} components, held-out log-likelihood {:.4} nats per point",
        a.name, fit_report.chosen_components, fit_report.heldout_loglik_per_point
    );
    Ok(())
}
