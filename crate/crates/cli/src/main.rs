use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tango_core::annotation::{
    parse_annotation_file, parse_flat_file, serialize_annotation, serialize_flat,
};
use tango_core::metrics::ScoreReport;
use tango_core::sst::{sst_segment, CountPolicy, DtsExtremum};
use tango_core::synth::{Generator, Lexicon, SynthConfig};
use tango_core::trainer::{train_sst_with, train_tango_with, Criterion, SstGrid, TangoGrid};
use tango_core::{
    build_table, BigramStats, CharFilter, Corpus, Estimator, NGramTable, Sequence, SstParams,
    Tango, TangoParams,
};

/// Word segmentation from character n-gram statistics.
#[derive(Parser, Debug)]
#[command(name = "tango", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count n-grams in a raw corpus and write the table.
    BuildIndex(BuildIndexArgs),
    /// Segment one sequence per input line into pipe format.
    Segment(SegmentArgs),
    /// Grid-search parameters on an annotated training file.
    Train(TrainArgs),
    /// Score pipe-format predictions against bracketed gold annotations.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus and gold annotations from a toy lexicon.
    Synth(SynthArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Tango,
    Sst,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Tsv,
}

#[derive(Args, Debug)]
struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    orders: Vec<usize>,
    /// Character classes, e.g. `han` or `katakana,U+30FC`; sequences become maximal runs.
    #[arg(long)]
    filter: Option<String>,
}

/// Raw text from which SST gathers bigram statistics.
#[derive(Args, Debug)]
struct SstStatsArgs {
    /// Raw corpus for bigram statistics (sst only).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Character filter applied to the statistics corpus.
    #[arg(long)]
    filter: Option<String>,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long, value_enum, default_value_t = Algorithm::Tango)]
    algorithm: Algorithm,
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// N-gram table (tango only).
    #[arg(long)]
    index: Option<PathBuf>,
    #[command(flatten)]
    stats: SstStatsArgs,
    /// Parameter file written by `train`.
    #[arg(long, conflicts_with_all = ["orders", "threshold", "theta", "extremum"])]
    params: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Disable the local-maximum condition.
    #[arg(long)]
    no_local_max: bool,
    /// Disable the threshold condition.
    #[arg(long)]
    no_threshold: bool,
    #[arg(long)]
    theta: Option<f64>,
    /// Six comma-separated extremum thresholds.
    #[arg(long, value_delimiter = ',')]
    extremum: Option<Vec<f64>>,
    #[arg(long)]
    estimator: Option<String>,
    /// `minima` or `maxima` of the t-score difference.
    #[arg(long)]
    sst_rule: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = Algorithm::Tango)]
    algorithm: Algorithm,
    /// Bracketed training annotations, one per line.
    #[arg(long)]
    gold: PathBuf,
    /// Where to write the best parameters.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "word-f")]
    criterion: String,
    /// Also dump every grid point and its score.
    #[arg(long)]
    grid_tsv: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    #[command(flatten)]
    stats: SstStatsArgs,
    #[arg(long)]
    no_local_max: bool,
    #[arg(long)]
    no_threshold: bool,
    #[arg(long, default_value = "mle")]
    estimator: String,
    #[arg(long, default_value = "minima")]
    sst_rule: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Gold annotation file; repeat once per test set.
    #[arg(long, required = true)]
    gold: Vec<PathBuf>,
    /// Prediction file, paired with the `--gold` at the same position.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Raw corpus output; standard output when absent.
    #[arg(long)]
    corpus_out: Option<PathBuf>,
    /// Gold annotations for every corpus line.
    #[arg(long)]
    gold_out: Option<PathBuf>,
    /// Lexicon file (`word<TAB>weight<TAB>stem|suffix`); a toy lexicon is generated when absent.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Write the lexicon actually used.
    #[arg(long)]
    lexicon_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    chars: usize,
    #[arg(long, default_value_t = 50)]
    stems: usize,
    #[arg(long, default_value_t = 10)]
    suffixes: usize,
    #[arg(long, default_value_t = 0.3)]
    suffix_rate: f64,
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    String::from_utf8(bytes).map_err(|e| {
        anyhow::anyhow!(
            "{}: invalid UTF-8 at byte offset {}",
            path.display(),
            e.utf8_error().valid_up_to()
        )
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn parse_filter(filter: Option<&str>) -> Result<Option<CharFilter>> {
    filter
        .map(|f| f.parse::<CharFilter>().map_err(Into::into))
        .transpose()
}

fn load_table(index: Option<&Path>) -> Result<NGramTable> {
    let path = index.context("--index is required for the tango algorithm")?;
    NGramTable::load_from_path(path)
        .with_context(|| format!("cannot load table {}", path.display()))
}

fn load_stats(args: &SstStatsArgs) -> Result<BigramStats> {
    let path = args
        .corpus
        .as_deref()
        .context("--corpus is required for the sst algorithm")?;
    let raw = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let corpus = Corpus::from_text(&raw, parse_filter(args.filter.as_deref())?)
        .with_context(|| format!("cannot decode {}", path.display()))?;
    Ok(BigramStats::from_corpus(&corpus, CountPolicy::FloorAtOne))
}

fn build_index(args: BuildIndexArgs) -> Result<()> {
    let filter = parse_filter(args.filter.as_deref())?;
    let raw =
        fs::read(&args.corpus).with_context(|| format!("cannot read {}", args.corpus.display()))?;
    let corpus = Corpus::from_text(&raw, filter)
        .with_context(|| format!("cannot decode {}", args.corpus.display()))?;
    let table = build_table(&corpus, &args.orders)?;
    table
        .save_to_path(&args.out)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let mut report = format!("corpus_size\t{}\n", table.corpus_size());
    for &n in table.orders() {
        report.push_str(&format!("order_{n}_distinct\t{}\n", table.distinct(n)));
    }
    write_text(None, &report)
}

fn tango_params(args: &SegmentArgs) -> Result<TangoParams> {
    let base = match &args.params {
        Some(path) => read_text(path)?
            .parse::<TangoParams>()
            .with_context(|| format!("bad parameter file {}", path.display()))?,
        None => {
            let orders = args
                .orders
                .as_deref()
                .context("give --params or both --orders and --threshold")?;
            let t = args
                .threshold
                .context("give --params or both --orders and --threshold")?;
            TangoParams::new(orders, t)?
        }
    };
    Ok(TangoParams::with_conditions(
        base.orders(),
        base.threshold(),
        base.use_local_max() && !args.no_local_max,
        base.use_threshold() && !args.no_threshold,
    )?)
}

fn sst_params(args: &SegmentArgs) -> Result<SstParams> {
    let mut params = match &args.params {
        Some(path) => read_text(path)?
            .parse::<SstParams>()
            .with_context(|| format!("bad parameter file {}", path.display()))?,
        None => {
            let theta = args
                .theta
                .context("give --params or --theta with --extremum")?;
            let e = args
                .extremum
                .as_deref()
                .context("give --params or --theta with --extremum")?;
            let e: [f64; 6] = e.try_into().map_err(|_| {
                anyhow::anyhow!("--extremum needs exactly six values, got {}", e.len())
            })?;
            SstParams::new(theta, e, Estimator::Mle)?
        }
    };
    if let Some(est) = &args.estimator {
        let v = params.vector();
        let e = [v[1], v[2], v[3], v[4], v[5], v[6]];
        params = SstParams::new(v[0], e, est.parse()?)?.with_rule(params.rule());
    }
    if let Some(rule) = &args.sst_rule {
        params = params.with_rule(rule.parse()?);
    }
    Ok(params)
}

fn segment(args: SegmentArgs) -> Result<()> {
    // Validate everything before touching the input.
    enum Segmenter {
        Tango(NGramTable, TangoParams),
        Sst(BigramStats, SstParams),
    }
    let segmenter = match args.algorithm {
        Algorithm::Tango => {
            if args.theta.is_some()
                || args.extremum.is_some()
                || args.sst_rule.is_some()
                || args.estimator.is_some()
            {
                bail!(
                    "--theta, --extremum, --estimator and --sst-rule apply to --algorithm sst only"
                );
            }
            let params = tango_params(&args)?;
            Segmenter::Tango(load_table(args.index.as_deref())?, params)
        }
        Algorithm::Sst => {
            if args.orders.is_some()
                || args.threshold.is_some()
                || args.no_local_max
                || args.no_threshold
            {
                bail!("--orders, --threshold, --no-local-max and --no-threshold apply to --algorithm tango only");
            }
            let params = sst_params(&args)?;
            Segmenter::Sst(load_stats(&args.stats)?, params)
        }
    };
    if let Segmenter::Tango(table, params) = &segmenter {
        Tango::new(table, params.clone())?;
    }
    let segment_line = |seq: &Sequence| match &segmenter {
        Segmenter::Tango(table, params) => tango_core::tango::segment(seq, params, table),
        Segmenter::Sst(stats, params) => sst_segment(seq, params, stats),
    };

    let input = read_text(&args.input)?;
    let mut out = String::with_capacity(input.len() * 2);
    for (i, line) in input.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            out.push('\n');
            continue;
        }
        let seg = segment_line(&Sequence::from(line))
            .with_context(|| format!("{} line {}", args.input.display(), i + 1))?;
        out.push_str(
            &serialize_flat(&seg)
                .with_context(|| format!("{} line {}", args.input.display(), i + 1))?,
        );
        out.push('\n');
    }
    write_text(args.out.as_deref(), &out)
}

fn train(args: TrainArgs) -> Result<()> {
    let criterion: Criterion = args.criterion.parse()?;
    let gold_text = read_text(&args.gold)?;
    let gold = parse_annotation_file(&gold_text)
        .with_context(|| format!("bad annotation file {}", args.gold.display()))?;
    let (params_text, best_text, score, grid_tsv) = match args.algorithm {
        Algorithm::Tango => {
            let grid = TangoGrid::with_conditions(!args.no_local_max, !args.no_threshold);
            if args.no_local_max && args.no_threshold {
                bail!("--no-local-max and --no-threshold together leave no placement condition");
            }
            let table = load_table(args.index.as_deref())?;
            let result = train_tango_with(&gold, &table, criterion, &grid)?;
            (
                result.best.to_key_values(),
                result.best.to_string(),
                result.best_score,
                result.to_tsv(),
            )
        }
        Algorithm::Sst => {
            let estimator: Estimator = args.estimator.parse()?;
            let rule: DtsExtremum = args.sst_rule.parse()?;
            let stats = load_stats(&args.stats)?;
            let grid = SstGrid {
                estimator,
                rule,
                ..SstGrid::default()
            };
            let result = train_sst_with(&gold, &stats, criterion, &grid)?;
            (
                result.best.to_key_values(),
                result.best.to_string(),
                result.best_score,
                result.to_tsv(),
            )
        }
    };
    write_text(Some(&args.out), &params_text)?;
    if let Some(path) = &args.grid_tsv {
        write_text(Some(path), &grid_tsv)?;
    }
    write_text(
        None,
        &format!("best\t{best_text}\n{criterion}\t{score:.2}\n"),
    )
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    if args.gold.len() != args.pred.len() {
        bail!(
            "{} --gold files but {} --pred files; give them in pairs",
            args.gold.len(),
            args.pred.len()
        );
    }
    let mut sets = Vec::new();
    for (gold_path, pred_path) in args.gold.iter().zip(&args.pred) {
        let gold = parse_annotation_file(&read_text(gold_path)?)
            .with_context(|| format!("bad annotation file {}", gold_path.display()))?;
        let pred = parse_flat_file(&read_text(pred_path)?)
            .with_context(|| format!("bad prediction file {}", pred_path.display()))?;
        if gold.len() != pred.len() {
            bail!(
                "{} has {} sequences but {} has {}",
                gold_path.display(),
                gold.len(),
                pred_path.display(),
                pred.len()
            );
        }
        sets.push(pred.into_iter().zip(gold).collect::<Vec<_>>());
    }
    let report = ScoreReport::evaluate(&sets)?;
    let text = match args.format {
        ReportFormat::Table => report.to_string(),
        ReportFormat::Tsv => report.to_tsv(),
    };
    write_text(None, &text)
}

fn synth(args: SynthArgs) -> Result<()> {
    let lexicon = match &args.lexicon {
        Some(path) => read_text(path)?
            .parse::<Lexicon>()
            .with_context(|| format!("bad lexicon {}", path.display()))?,
        None => Lexicon::toy(args.stems, args.suffixes, args.seed)?,
    };
    let config = SynthConfig {
        seed: args.seed,
        target_chars: args.chars,
        suffix_rate: args.suffix_rate,
        ..SynthConfig::default()
    };
    let annotations = Generator::new(&lexicon, config)?.corpus();
    let mut raw = String::new();
    let mut gold = String::new();
    for a in &annotations {
        raw.push_str(&a.sequence().to_string());
        raw.push('\n');
        gold.push_str(&serialize_annotation(a)?);
        gold.push('\n');
    }
    if let Some(path) = &args.lexicon_out {
        write_text(Some(path), &lexicon.to_text())?;
    }
    if let Some(path) = &args.gold_out {
        write_text(Some(path), &gold)?;
    }
    write_text(args.corpus_out.as_deref(), &raw)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildIndex(a) => build_index(a),
        Command::Segment(a) => segment(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.chain().any(|c| {
                c.downcast_ref::<std::io::Error>()
                    .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            }) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
