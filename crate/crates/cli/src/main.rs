use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use codabank::coda::{plr_label, PlrGraph, SpanningPlrGraph};
use codabank::diagnostics::{diagnostics_table, iqr_outlier_count};
use codabank::evaluation::{
    generate_synthetic, run_experiment_grid, FeatureKind, FittedModel, GridConfig, Method, SyntheticSignal,
};
use codabank::features::{FeatureMatrix, FeatureSet};
use codabank::ingest::{parse_records, prepare, write_records, ParseReport, Prepared, Schema, DEFAULT_DELTA_FRACTION};
use codabank::models::knn::default_k_grid;
use codabank::{Error, ErrorCategory, Part, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "codabank",
    version,
    about = "Standard ratios versus log-ratios for bankruptcy prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Skewness, kurtosis and outlier counts of both predictor families.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        /// Directory for diagnostics.json, diagnostics.tsv and rejections.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split, downsample, fit every method on every feature set and score.
    Run(RunArgs),
    /// Write a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Check that an edge list of log-ratios is a spanning tree over the seven parts.
    ValidatePlr {
        /// Edges as NUM/DEN separated by commas; defaults to the standard set.
        #[arg(long)]
        edges: Option<String>,
    },
}

#[derive(Args, Clone, Serialize)]
struct InputArgs {
    /// Delimited text file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Field delimiter (a single byte).
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Column override KEY=NAME, KEY being id, year, bankrupt or a part code.
    #[arg(long = "column", value_name = "KEY=NAME")]
    columns: Vec<String>,
    /// Zero replacement as a fraction of each part's smallest positive value.
    #[arg(long, default_value_t = DEFAULT_DELTA_FRACTION)]
    delta_fraction: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodChoice {
    Logit,
    Knn,
    Rf,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FeatureChoice {
    Standard,
    Compositional,
    Both,
}

#[derive(Args, Serialize)]
struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value_t = MethodChoice::All)]
    methods: MethodChoice,
    #[arg(long, value_enum, default_value_t = FeatureChoice::Both)]
    features: FeatureChoice,
    /// Candidate neighbour counts, comma separated; odd values 1 to 25 by default.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Features tried per split; a third of the feature count, rounded up, by default.
    #[arg(long)]
    mtry: Option<usize>,
    /// Probability at or above which logistic regression predicts bankruptcy.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long)]
    knn_zscore: bool,
    #[arg(long)]
    stratified: bool,
    /// Spanning log-ratio set for the compositional logistic model.
    #[arg(long)]
    edges: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.03)]
    rate: f64,
    /// Signal coefficient on one default log-ratio, as NUM/DEN=COEF; repeatable.
    #[arg(long, value_name = "NUM/DEN=COEF")]
    signal: Vec<String>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(category: ErrorCategory) -> u8 {
    match category {
        ErrorCategory::Config => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Diagnose { input, out } => diagnose(&input, out.as_deref()),
        Command::Run(args) => run(&args),
        Command::Synth(args) => synth(&args),
        Command::ValidatePlr { edges } => validate_plr(edges.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error ({}): {e}", category_name(category));
            ExitCode::from(exit_code(category))
        }
    }
}

fn category_name(c: ErrorCategory) -> &'static str {
    match c {
        ErrorCategory::Config => "config",
        ErrorCategory::Data => "data",
        ErrorCategory::Numeric => "numeric",
    }
}

fn schema(input: &InputArgs) -> Result<Schema> {
    let mut schema = Schema::default();
    if !input.delimiter.is_ascii() {
        return Err(Error::Config(format!(
            "delimiter {:?} is not a single byte",
            input.delimiter
        )));
    }
    schema.delimiter = input.delimiter as u8;
    for entry in &input.columns {
        let (key, name) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--column expects KEY=NAME, got `{entry}`")))?;
        schema.set_column(key.trim(), name.trim())?;
    }
    Ok(schema)
}

fn load(input: &InputArgs) -> Result<(ParseReport, Prepared<f64>)> {
    let schema = schema(input)?;
    let file = File::open(&input.input).map_err(|e| Error::from(e).context(input.input.display().to_string()))?;
    let (records, report) = parse_records::<f64, _>(io::BufReader::new(file), &schema)?;
    let prepared = prepare(records, input.delta_fraction)?;
    if prepared.dataset.is_empty() {
        return Err(Error::InsufficientData("no usable records after preprocessing".into()));
    }
    Ok((report, prepared))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn write_json<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ParseSummary {
    rows_read: usize,
    accepted: usize,
    rejected: usize,
}

impl From<&ParseReport> for ParseSummary {
    fn from(r: &ParseReport) -> Self {
        Self {
            rows_read: r.rows_read,
            accepted: r.accepted,
            rejected: r.rejections.len(),
        }
    }
}

fn diagnose(input: &InputArgs, out: Option<&Path>) -> Result<()> {
    let (parse, prepared) = load(input)?;
    let standard = FeatureSet::Standard.build(&prepared.dataset);
    let compositional = FeatureSet::FullPlr.build(&prepared.dataset);
    let table = diagnostics_table(&standard, &compositional)?;
    let outliers_standard = iqr_outlier_count(&standard);
    let outliers_compositional = iqr_outlier_count(&compositional);

    let mut text = parse.render().lines().take(3).collect::<Vec<_>>().join("\n");
    text.push_str(&format!(
        "\ninactive firms removed: {} ({})\n",
        prepared.inactive_removed, prepared.inactive_rule
    ));
    text.push_str(&prepared.zeros.render());
    text.push('\n');
    text.push_str(&table.render());
    text.push_str("\nIQR outliers, standard ratios\n");
    text.push_str(&outliers_standard.render());
    text.push_str("\nIQR outliers, log-ratios\n");
    text.push_str(&outliers_compositional.render());

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        #[derive(Serialize)]
        struct Report<'a> {
            input: &'a InputArgs,
            parse: ParseSummary,
            preprocessing: &'a Prepared<f64>,
            diagnostics: &'a codabank::diagnostics::DiagnosticsTable,
            outliers_standard: &'a codabank::diagnostics::OutlierCounts,
            outliers_compositional: &'a codabank::diagnostics::OutlierCounts,
        }
        write_json(
            dir,
            "diagnostics.json",
            &Report {
                input,
                parse: (&parse).into(),
                preprocessing: &prepared,
                diagnostics: &table,
                outliers_standard: &outliers_standard,
                outliers_compositional: &outliers_compositional,
            },
        )?;
        write_text(dir, "diagnostics.tsv", &table.to_tsv())?;
        write_text(dir, "rejections.txt", &parse.render())?;
    }
    emit(&text)
}

/// Writes to standard output; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn graph_from(edges: Option<&str>) -> Result<SpanningPlrGraph> {
    match edges {
        None => Ok(SpanningPlrGraph::default()),
        Some(text) => Ok(SpanningPlrGraph::try_new(PlrGraph::parse(text)?)?),
    }
}

fn grid_config(args: &RunArgs) -> Result<GridConfig<f64>> {
    let mut config = GridConfig::new(args.seed);
    config.train_fraction = args.train_fraction;
    config.methods = match args.methods {
        MethodChoice::Logit => vec![Method::Logistic],
        MethodChoice::Knn => vec![Method::Knn],
        MethodChoice::Rf => vec![Method::Forest],
        MethodChoice::All => Method::ALL.to_vec(),
    };
    config.features = match args.features {
        FeatureChoice::Standard => vec![FeatureKind::Standard],
        FeatureChoice::Compositional => vec![FeatureKind::Compositional],
        FeatureChoice::Both => FeatureKind::ALL.to_vec(),
    };
    config.k_grid = args.k_grid.clone().unwrap_or_else(default_k_grid);
    config.n_trees = args.trees;
    config.mtry = args.mtry;
    config.threshold = args.threshold;
    config.knn_zscore = args.knn_zscore;
    config.stratified = args.stratified;
    config.graph = graph_from(args.edges.as_deref())?;
    Ok(config)
}

fn write_features(dir: &Path, name: &str, x: &FeatureMatrix<f64>, ids: &[String], labels: &[bool]) -> Result<()> {
    let mut w = create(dir, name)?;
    x.write_csv(&mut w, Some(ids), Some(labels))?;
    w.flush()?;
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let config = grid_config(args)?;
    let (parse, prepared) = load(&args.input)?;
    let dataset = &prepared.dataset;
    let result = run_experiment_grid(dataset, &config)?;

    let dir = args.out.as_path();
    fs::create_dir_all(dir)?;
    #[derive(Serialize)]
    struct Report<'a> {
        arguments: &'a RunArgs,
        config: &'a GridConfig<f64>,
        parse: ParseSummary,
        preprocessing: &'a Prepared<f64>,
        result: &'a codabank::GridResult64,
    }
    write_json(
        dir,
        "report.json",
        &Report {
            arguments: args,
            config: &config,
            parse: (&parse).into(),
            preprocessing: &prepared,
            result: &result,
        },
    )?;
    let text = result.render();
    write_text(dir, "metrics.txt", &text)?;
    write_text(dir, "rejections.txt", &parse.render())?;

    let ids: Vec<String> = dataset.firms.iter().map(|f| f.id.clone()).collect();
    let labels = dataset.labels();
    write_features(
        dir,
        "features_standard.csv",
        &FeatureSet::Standard.build(dataset),
        &ids,
        &labels,
    )?;
    write_features(
        dir,
        "features_compositional.csv",
        &FeatureSet::FullPlr.build(dataset),
        &ids,
        &labels,
    )?;

    for cell in &result.cells {
        let stem = format!("{}_{}", cell.report.method.tag(), cell.report.features.name());
        match &cell.model {
            FittedModel::Logistic(m) => write_json(dir, &format!("model_{stem}.json"), m)?,
            FittedModel::Knn(m) => write_json(dir, &format!("model_{stem}.json"), m)?,
            FittedModel::Forest(m) => write_json(dir, &format!("model_{stem}.json"), m)?,
        }
        if let Some(summary) = &cell.logistic {
            let mut t = String::from("predictor\testimate\tstd_error\tz\tp_value\tsignificant_5pct\n");
            for r in &summary.coefficients {
                let sig = r.significant_5pct.map_or("n/a".to_string(), |s| s.to_string());
                t.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{sig}\n",
                    r.name, r.estimate, r.std_error, r.z, r.p_value
                ));
            }
            write_text(dir, &format!("coefficients_{stem}.tsv"), &t)?;
        }
        if let Some(tuning) = &cell.knn {
            let mut t = String::from("k,accuracy\n");
            for row in &tuning.table {
                t.push_str(&format!("{},{}\n", row.k, row.accuracy));
            }
            write_text(dir, &format!("knn_tuning_{stem}.csv"), &t)?;
        }
        if let Some(importance) = &cell.importance {
            let mut t = String::from("rank,feature,mean_decrease_gini\n");
            for (i, row) in importance.iter().enumerate() {
                t.push_str(&format!("{},\"{}\",{}\n", i + 1, row.feature, row.mean_decrease_gini));
            }
            write_text(dir, &format!("importance_{stem}.csv"), &t)?;
        }
    }
    emit(&text)
}

fn parse_signal(entries: &[String]) -> Result<SyntheticSignal<f64>> {
    let mut signal = SyntheticSignal::none();
    for entry in entries {
        let (edge, coef) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--signal expects NUM/DEN=COEF, got `{entry}`")))?;
        let (num, den) = edge
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("--signal edge `{edge}` is not NUM/DEN")))?;
        let (num, den): (Part, Part) = (num.trim().parse()?, den.trim().parse()?);
        let coef: f64 = coef
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--signal coefficient `{coef}` is not a number")))?;
        let one = SyntheticSignal::single(num, den, coef)?;
        for (c, o) in signal.coefficients.iter_mut().zip(&one.coefficients) {
            *c += o;
        }
    }
    Ok(signal)
}

fn synth(args: &SynthArgs) -> Result<()> {
    let signal = parse_signal(&args.signal)?;
    let data = generate_synthetic(args.seed, args.n, args.rate, &signal)?;
    let records = data.dataset.to_records(2000);
    let schema = Schema::default();
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(File::create(path)?);
            write_records(&mut w, &records, &schema)?;
            w.flush()?;
            eprintln!(
                "{} firms, {} bankrupt, intercept {:.4}, {}",
                records.len(),
                data.dataset.bankrupt_count(),
                data.intercept,
                path.display()
            );
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_records(&mut w, &records, &schema)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn validate_plr(edges: Option<&str>) -> Result<()> {
    let graph = graph_from(edges)?;
    let list: Vec<String> = graph.edges().iter().map(|&(a, b)| plr_label(a, b)).collect();
    emit(&format!("valid spanning tree: {}\n", list.join(", ")))
}
