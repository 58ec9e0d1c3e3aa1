use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use calibkit::binning::uniform_mass;
use calibkit::calibrators::{fit_base_scorer, fit_isotonic, fit_platt, fit_tree, CalibratorModel, Input, TreeParams};
use calibkit::dataset::{read_score_csv, LabeledDataset};
use calibkit::empirical::{auc_roc, auc_v_knn, ece, pde, rmse, zero_one_loss, MetricParams, MetricReport};
use calibkit::Partition;
use calibkit_cli::config::{Method, MetricName};
use calibkit_cli::{bias_sweep, datasets, experiment, popcheck, results, tradeoff, CliError, Config, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calibkit", version, about = "Calibration metrics, calibrators and experiments")]
struct Cli {
    /// TOML configuration; every field is optional.
    #[arg(long, global = true, env = "CALIBKIT_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// DT/IR/PS comparison over repeated splits; writes results and win counts.
    Experiment(ExperimentArgs),
    /// Bias of ECE and PDE against the true calibration error.
    Bias(OutArgs),
    /// PDE and 0/1 loss of trees with growing leaf budgets.
    Tradeoff(TradeoffArgs),
    /// Exact checks of the population identities and constructions.
    Popcheck(PopcheckArgs),
    /// Fits one calibrator and writes it as JSON.
    Calibrate(CalibrateArgs),
    /// Applies a fitted calibrator to a dataset.
    Predict(PredictArgs),
    /// Sample metrics of a score file against labels.
    Eval(EvalArgs),
    /// Lists the bundled datasets, or writes them as CSV.
    Datasets(DatasetsArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated dataset names (default: config, else all bundled).
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Per-run results CSV.
    #[arg(long, default_value = "results.csv")]
    results: PathBuf,
    /// Win-count table CSV.
    #[arg(long, default_value = "wins.csv")]
    wins: PathBuf,
}

#[derive(Args)]
struct TradeoffArgs {
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    /// Rows drawn for bundled datasets.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PopcheckArgs {
    /// Random instances per suite.
    #[arg(long)]
    instances: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset name (bundled or `<data_dir>/<name>.csv`) or a CSV path.
    #[arg(long)]
    data: String,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Column with base scores for IR/PS; a logistic scorer is fitted otherwise.
    #[arg(long)]
    score_column: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// DT, IR or PS.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON from `calibrate`.
    #[arg(long)]
    model: PathBuf,
    /// Output `row,score` CSV.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// `row,score` CSV.
    #[arg(long)]
    scores: PathBuf,
    /// CSV with the label column.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Comma-separated metrics: rmse, zero_one, auc, ece, pde, auc_v.
    #[arg(long, value_delimiter = ',', value_parser = parse_metric, default_value = "rmse,zero_one,auc,ece,pde,auc_v")]
    metrics: Vec<MetricName>,
    #[arg(long, default_value_t = 32)]
    bins: usize,
    #[arg(long, default_value_t = 1)]
    p: u32,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// `index,bin` CSV used for ECE/PDE instead of uniform-mass bins.
    #[arg(long)]
    partition: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetsArgs {
    /// Directory to write every bundled dataset into.
    #[arg(long)]
    write: Option<PathBuf>,
    #[arg(long, default_value_t = datasets::DEFAULT_BUNDLED_SIZE)]
    size: usize,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (expected DT, IR or PS)"))
}

fn parse_metric(s: &str) -> std::result::Result<MetricName, String> {
    MetricName::parse(s).ok_or_else(|| format!("unknown metric `{s}`"))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_data(cfg: &Config, args: &DataArgs) -> Result<LabeledDataset> {
    let path = Path::new(&args.data);
    if path.extension().is_some_and(|e| e == "csv") || path.is_file() {
        return LabeledDataset::read_csv(File::open(path)?, &args.label_column, args.score_column.as_deref())
            .map_err(|source| CliError::Dataset { name: args.data.clone(), source });
    }
    datasets::load(&args.data, cfg.resolved_data_dir().as_deref(), &args.label_column, args.score_column.as_deref(), None)
}

fn base_scores(cfg: &Config, data: &LabeledDataset) -> Result<Vec<f64>> {
    match data.base_scores() {
        Some(s) => Ok(s.to_vec()),
        None => {
            log::info!("no score column; fitting a logistic base scorer on the same data");
            Ok(fit_base_scorer(data, &cfg.experiment.logistic)?.score_all(data)?)
        }
    }
}

fn run_experiment(cfg: &mut Config, args: ExperimentArgs) -> Result<()> {
    if !args.datasets.is_empty() {
        cfg.experiment.datasets = args.datasets;
    }
    if let Some(r) = args.repetitions {
        cfg.experiment.repetitions = r;
    }
    cfg.validate()?;
    let e = &cfg.experiment;
    let dir = cfg.resolved_data_dir();
    let data = datasets::selection(&e.datasets)
        .into_iter()
        .map(|name| {
            let d = datasets::load(&name, dir.as_deref(), &e.label_column, e.score_column.as_deref(), None)?;
            Ok((name, d))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = experiment::run(e, cfg.seed, &data)?;
    results::write_results(&rows, BufWriter::new(File::create(&args.results)?))?;
    let table = experiment::win_table(e, &rows)?;
    table.write_csv(BufWriter::new(File::create(&args.wins)?))?;
    table.write_csv(io::stdout().lock())?;
    eprintln!("wrote {} and {}", args.results.display(), args.wins.display());
    Ok(())
}

fn run_bias(cfg: &Config, args: OutArgs) -> Result<()> {
    let sweep = bias_sweep::run(&cfg.bias, cfg.seed)?;
    eprintln!("predictor: tree with {} leaves", sweep.tree_leaves);
    for binning in &cfg.bias.binnings {
        let t = sweep.tally(*binning, 50.0);
        eprintln!(
            "{}: |bias(PDE)| <= |bias(ECE)| in {} of {} configurations with >= 50 samples per bin",
            binning.name(),
            t.pde_not_worse,
            t.eligible
        );
    }
    sweep.write_csv(output(args.out.as_deref())?)
}

fn run_tradeoff(cfg: &mut Config, args: TradeoffArgs) -> Result<()> {
    if !args.datasets.is_empty() {
        cfg.tradeoff.datasets = args.datasets;
    }
    if args.size.is_some() {
        cfg.tradeoff.size = args.size;
    }
    cfg.validate()?;
    let t = &cfg.tradeoff;
    let dir = cfg.resolved_data_dir();
    let mut all = Vec::new();
    for name in datasets::selection(&t.datasets) {
        let data = datasets::load(&name, dir.as_deref(), &t.label_column, None, t.size)?;
        let r = tradeoff::run_dataset(t, cfg.seed, &name, &data)?;
        eprintln!("{name}: Spearman(leaves, PDE) = {:.3}", r.spearman);
        all.push(r);
    }
    tradeoff::write_csv(&all, output(args.out.as_deref())?)
}

fn run_popcheck(cfg: &mut Config, args: PopcheckArgs) -> Result<bool> {
    if let Some(n) = args.instances {
        cfg.popcheck.instances = n;
    }
    let checks = popcheck::run(&cfg.popcheck, cfg.seed);
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn run_calibrate(cfg: &Config, args: CalibrateArgs) -> Result<()> {
    let data = load_data(cfg, &args.data)?;
    let model = match args.method {
        Method::Tree => CalibratorModel::Tree(fit_tree(&data, &TreeParams { seed: cfg.seed, ..cfg.experiment.tree.clone() })?),
        Method::Isotonic => CalibratorModel::Isotonic(fit_isotonic(&base_scores(cfg, &data)?, data.labels())?),
        Method::Platt => CalibratorModel::Platt(fit_platt(&base_scores(cfg, &data)?, data.labels(), &cfg.experiment.platt)?),
    };
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", model.to_json()?)?;
    Ok(())
}

fn run_predict(cfg: &Config, args: PredictArgs) -> Result<()> {
    let model = CalibratorModel::from_json(&std::fs::read_to_string(&args.model)?)?;
    let data = load_data(cfg, &args.data)?;
    let scores: Vec<f64> = match model {
        CalibratorModel::Tree(_) => (0..data.len()).map(|i| model.predict(Input::Features(data.row(i)))).collect::<calibkit::Result<_>>()?,
        _ => base_scores(cfg, &data)?.into_iter().map(|s| model.predict(Input::Score(s))).collect::<calibkit::Result<_>>()?,
    };
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    w.write_record(["row", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        w.write_record([i.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let scores = read_score_csv(File::open(&args.scores)?)?;
    let labels = LabeledDataset::read_csv(File::open(&args.labels)?, &args.label_column, None)
        .map_err(|source| CliError::Dataset { name: args.labels.display().to_string(), source })?;
    let labels = labels.labels();
    let partition = match &args.partition {
        Some(p) => Partition::read_csv(File::open(p)?)?,
        None => uniform_mass(&scores, args.bins.min(scores.len()))?,
    };
    let partition_name = args.partition.as_ref().map_or_else(|| "uniform_mass".to_string(), |p| p.display().to_string());
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["metric", "value", "params", "partition"])?;
    for metric in &args.metrics {
        let (value, params, part) = match metric {
            MetricName::Rmse => (rmse(&scores, labels), MetricParams::default(), None),
            MetricName::ZeroOne => (
                zero_one_loss(&scores, labels, args.theta),
                MetricParams { theta: Some(args.theta), ..Default::default() },
                None,
            ),
            MetricName::Auc => (auc_roc(&scores, labels), MetricParams::default(), None),
            MetricName::Ece => (
                ece(&scores, labels, &partition, args.p),
                MetricParams { bins: Some(partition.len()), p: Some(args.p), ..Default::default() },
                Some(partition_name.clone()),
            ),
            MetricName::Pde => (
                pde(&scores, labels, &partition, args.p),
                MetricParams { bins: Some(partition.len()), p: Some(args.p), ..Default::default() },
                Some(partition_name.clone()),
            ),
            MetricName::AucV => (
                auc_v_knn(&scores, labels, args.k.min(scores.len())).map(|r| r.auc),
                MetricParams { k: Some(args.k.min(scores.len())), ..Default::default() },
                None,
            ),
        };
        match value {
            Ok(v) => {
                let r = MetricReport::new(metric.name(), v, params, part.as_deref())?;
                w.write_record([r.metric.clone(), r.value.to_string(), r.params.label(), r.partition.clone().unwrap_or_default()])?;
            }
            Err(calibkit::Error::UndefinedMetric(why)) => log::warn!("{}: {why}", metric.name()),
            Err(e) => return Err(e.into()),
        }
    }
    w.flush()?;
    Ok(())
}

fn run_datasets(args: DatasetsArgs) -> Result<()> {
    for b in datasets::BUNDLED {
        match &args.write {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.csv", b.name));
                let data = datasets::bundled(b.name, args.size).expect("listed")?;
                data.write_csv(BufWriter::new(File::create(&path)?), None)?;
                eprintln!("wrote {}", path.display());
            }
            None => println!("{}\t{}", b.name, b.description),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = (|| -> Result<bool> {
        let mut cfg = Config::load(cli.config.as_deref())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        match cli.command {
            Command::Experiment(a) => run_experiment(&mut cfg, a)?,
            Command::Bias(a) => run_bias(&cfg, a)?,
            Command::Tradeoff(a) => run_tradeoff(&mut cfg, a)?,
            Command::Popcheck(a) => return run_popcheck(&mut cfg, a),
            Command::Calibrate(a) => run_calibrate(&cfg, a)?,
            Command::Predict(a) => run_predict(&cfg, a)?,
            Command::Eval(a) => run_eval(a)?,
            Command::Datasets(a) => run_datasets(a)?,
        }
        Ok(true)
    })();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
