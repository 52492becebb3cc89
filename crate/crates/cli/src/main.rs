//! Command-line front end: corpus conversion, training, parsing,
//! evaluation and rendering.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use muparse::decoder::DecoderMode;
use muparse::io::corpus::{
    load_corpus, load_corpus_any, load_tree_records, save_corpus, save_tree_records, Piece,
    TreeRecord,
};
use muparse::io::dot::{render_constituent, render_dependency};
use muparse::io::weights::{load_model, save_model};
use muparse::metrics::{constituent_of, MetricReport};
use muparse::synthetic::generate_corpus;
use muparse::training::{fit_with_callback, leave_one_out_splits, LossMode, TrainConfig};
use muparse::tree::DependencyTree;
use muparse::{EventSequence, ModelConfig, SequenceKind};

#[derive(Parser)]
#[command(name = "muparse", version, about = "Dependency parsing of symbolic music")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Switch tree files between dependency and constituent form.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Target form; by default every record switches form.
        #[arg(long, value_enum)]
        to: Option<Form>,
    },
    /// Train a model on a corpus and write a weight file.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-epoch loss log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Parse every piece of a corpus with a trained model.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Decoder::Eisner)]
        decoder: Decoder,
        /// Fail on durations missing from the model's vocabulary.
        #[arg(long)]
        strict_durations: bool,
        /// Directory for one DOT file per piece.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Score predicted trees against gold trees, or run leave-one-out.
    Eval {
        #[arg(long, required_unless_present = "loo")]
        pred: Option<PathBuf>,
        #[arg(long, required_unless_present = "loo")]
        gold: Option<PathBuf>,
        /// Leave-one-out training and evaluation on the corpus given by --corpus.
        #[arg(long, requires = "corpus")]
        loo: bool,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Decoder::Eisner)]
        decoder: Decoder,
        /// Write the per-piece report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Render one record of a tree file as DOT.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Draw the constituent tree instead of dependency arcs.
        #[arg(long)]
        constituent: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic melody corpus with rule-based trees.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 8)]
        min_len: usize,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Dependency,
    Constituent,
}

#[derive(Clone, Copy, ValueEnum)]
enum Decoder {
    Greedy,
    Eisner,
    Cle,
}

impl From<Decoder> for DecoderMode {
    fn from(d: Decoder) -> Self {
        match d {
            Decoder::Greedy => DecoderMode::Greedy,
            Decoder::Eisner => DecoderMode::Eisner,
            Decoder::Cle => DecoderMode::Cle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Loss {
    Both,
    Bce,
    Ce,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Chords,
    Melody,
}

#[derive(Args, Clone)]
struct TrainOpts {
    /// TOML file with optional [train] and [model] tables; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus kind; detected from the file when omitted.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long, value_enum)]
    loss: Option<Loss>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Skip transposition augmentation.
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    strict_durations: bool,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    train: TrainConfig,
    #[serde(default)]
    model: ModelConfig,
}

impl TrainOpts {
    fn resolve(&self) -> Result<(TrainConfig, ModelConfig), CliError> {
        let file = match &self.config {
            None => ConfigFile::default(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading --config {}", path.display()))?;
                toml::from_str(&text).map_err(|e| {
                    CliError::Data(anyhow!("--config {}: {}", path.display(), e))
                })?
            }
        };
        let mut train = file.train;
        if let Some(v) = self.seed {
            train.seed = v;
        }
        if let Some(v) = self.epochs {
            train.epochs = v;
        }
        if let Some(v) = self.lr {
            train.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            train.weight_decay = v;
        }
        if let Some(v) = self.warmup {
            train.warmup_steps = v;
        }
        if let Some(v) = self.batch_size {
            train.batch_size = v;
        }
        if let Some(loss) = self.loss {
            train.loss_mode = match loss {
                Loss::Both => LossMode::Both,
                Loss::Bce => LossMode::BceOnly,
                Loss::Ce => LossMode::CeOnly,
            };
        }
        if self.no_augment {
            train.augment = false;
        }
        if !(train.learning_rate > 0.0) {
            return Err(CliError::Usage(format!("--lr must be positive, got {}", train.learning_rate)));
        }
        if train.weight_decay < 0.0 {
            return Err(CliError::Usage(format!(
                "--weight-decay must be non-negative, got {}",
                train.weight_decay
            )));
        }
        if train.batch_size == 0 {
            return Err(CliError::Usage("--batch-size must be at least 1".into()));
        }
        Ok((train, file.model))
    }

    fn load(&self, path: &Path) -> anyhow::Result<Vec<Piece>> {
        Ok(match self.kind {
            Some(Kind::Chords) => load_corpus(path, SequenceKind::Chords)?,
            Some(Kind::Melody) => load_corpus(path, SequenceKind::Notes)?,
            None => load_corpus_any(path)?,
        })
    }
}

enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

fn labelled_pairs(pieces: &[Piece]) -> anyhow::Result<Vec<(EventSequence, DependencyTree)>> {
    pieces
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let tree = p
                .tree
                .clone()
                .ok_or_else(|| anyhow!("[{}] ({}): piece has no tree", i, p.title))?;
            Ok((p.seq.clone(), tree))
        })
        .collect()
}

#[derive(Serialize)]
struct LogLine<'a> {
    #[serde(flatten)]
    record: &'a muparse::training::LossRecord,
}

fn convert(input: &Path, output: &Path, to: Option<Form>) -> anyhow::Result<()> {
    let records = load_tree_records(input)?;
    let converted = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let path = format!("[{}]", i);
            let target = to.unwrap_or(if r.tree.is_some() {
                Form::Dependency
            } else {
                Form::Constituent
            });
            match target {
                Form::Dependency => r.to_dependency_form(&path),
                Form::Constituent => r.to_constituent_form(&path),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    save_tree_records(output, &converted)?;
    Ok(())
}

fn train(corpus: &Path, output: &Path, log: Option<&Path>, opts: &TrainOpts) -> Result<(), CliError> {
    let (train_cfg, model_cfg) = opts.resolve()?;
    let pieces = opts.load(corpus)?;
    let data = labelled_pairs(&pieces)?;
    let mut lines = String::new();
    let result = fit_with_callback(&data, &train_cfg, &model_cfg, |r| {
        let line = serde_json::to_string(&LogLine { record: r }).expect("log records serialize");
        eprintln!("{}", line);
        lines.push_str(&line);
        lines.push('\n');
    })
    .map_err(anyhow::Error::from)?;
    save_model(&result.model, output).map_err(anyhow::Error::from)?;
    if let Some(path) = log {
        fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn parse(
    model: &Path,
    input: &Path,
    output: &Path,
    decoder: Decoder,
    strict: bool,
    dot: Option<&Path>,
) -> anyhow::Result<()> {
    let model = load_model(model)?;
    let pieces = load_corpus(input, model.kind)?;
    let mut records = Vec::with_capacity(pieces.len());
    for (i, p) in pieces.iter().enumerate() {
        let d = model
            .parse(&p.seq, decoder.into(), strict)
            .with_context(|| format!("[{}] ({})", i, p.title))?;
        let labels = p.seq.labels();
        if let Some(dir) = dot {
            fs::create_dir_all(dir)?;
            let file = dir.join(format!("{:04}.dot", i));
            fs::write(&file, render_dependency(&d.heads, &labels))
                .with_context(|| format!("writing {}", file.display()))?;
        }
        let mut rec = TreeRecord::from_heads(&p.title, d.heads, Some(labels));
        rec.valid = Some(d.valid);
        records.push(rec);
    }
    save_tree_records(output, &records)?;
    Ok(())
}

#[derive(Serialize)]
struct PieceReport {
    title: String,
    #[serde(flatten)]
    metrics: MetricReport,
}

#[derive(Serialize)]
struct Report {
    pieces: Vec<PieceReport>,
    mean: MetricReport,
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map(|x| format!("{:.4}", x)).unwrap_or_else(|| "-".into())
}

fn print_report(report: &Report) {
    println!("{:<32} {:>7} {:>7} {:>7} {:>7}", "piece", "head", "arc", "span", "node");
    let row = |title: &str, m: &MetricReport| {
        let mut t: String = title.chars().take(32).collect();
        if t.is_empty() {
            t = "-".into();
        }
        println!(
            "{:<32} {:>7} {:>7} {:>7} {:>7}",
            t,
            fmt_metric(Some(m.head_accuracy)),
            fmt_metric(Some(m.arc_accuracy)),
            fmt_metric(m.span_accuracy),
            fmt_metric(Some(m.node_accuracy))
        );
    };
    for p in &report.pieces {
        row(&p.title, &p.metrics);
    }
    row("mean", &report.mean);
}

fn finish_report(pieces: Vec<PieceReport>, out: Option<&Path>) -> anyhow::Result<()> {
    let metrics: Vec<MetricReport> = pieces.iter().map(|p| p.metrics).collect();
    let report = Report {
        mean: MetricReport::mean(&metrics),
        pieces,
    };
    print_report(&report);
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn eval(pred: &Path, gold: &Path, report: Option<&Path>) -> anyhow::Result<()> {
    let pred = load_tree_records(pred).with_context(|| format!("--pred {}", pred.display()))?;
    let gold = load_tree_records(gold).with_context(|| format!("--gold {}", gold.display()))?;
    if pred.len() != gold.len() {
        bail!("{} predicted records but {} gold records", pred.len(), gold.len());
    }
    let mut pieces = Vec::with_capacity(gold.len());
    for (i, (p, g)) in pred.iter().zip(&gold).enumerate() {
        let path = format!("[{}]", i);
        let heads = p.head_sequence(&path).context("--pred")?;
        let tree = g.dependency_tree(&path).context("--gold")?;
        let metrics = MetricReport::compare(&heads, &tree).with_context(|| path.clone())?;
        pieces.push(PieceReport {
            title: if g.title.is_empty() { p.title.clone() } else { g.title.clone() },
            metrics,
        });
    }
    finish_report(pieces, report)
}

fn leave_one_out(
    corpus: &Path,
    decoder: Decoder,
    opts: &TrainOpts,
    report: Option<&Path>,
) -> Result<(), CliError> {
    let (train_cfg, model_cfg) = opts.resolve()?;
    let pieces = opts.load(corpus)?;
    let data = labelled_pairs(&pieces)?;
    if data.len() < 2 {
        return Err(CliError::Data(anyhow!("leave-one-out needs at least two pieces")));
    }
    let folds = leave_one_out_splits(data.len());
    let results: Vec<anyhow::Result<PieceReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = folds
            .iter()
            .map(|(train_idx, test)| {
                let data = &data;
                let pieces = &pieces;
                let (train_cfg, model_cfg) = (&train_cfg, &model_cfg);
                s.spawn(move || -> anyhow::Result<PieceReport> {
                    let train: Vec<_> = train_idx.iter().map(|&i| data[i].clone()).collect();
                    let model = fit_with_callback(&train, train_cfg, model_cfg, |_| {})?.model;
                    let (seq, gold) = &data[*test];
                    let d = model.parse(seq, decoder.into(), opts.strict_durations)?;
                    Ok(PieceReport {
                        title: pieces[*test].title.clone(),
                        metrics: MetricReport::compare(&d.heads, gold)?,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("fold thread panicked")).collect()
    });
    let pieces = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    finish_report(pieces, report)?;
    Ok(())
}

fn render(input: &Path, index: usize, constituent: bool, output: Option<&Path>) -> Result<(), CliError> {
    let records = load_tree_records(input).map_err(anyhow::Error::from)?;
    let rec = records.get(index).ok_or_else(|| {
        CliError::Usage(format!("--index {} out of range ({} records)", index, records.len()))
    })?;
    let path = format!("[{}]", index);
    let labels = rec.labels.clone().unwrap_or_default();
    let dot = if constituent {
        let tree = rec.dependency_tree(&path).map_err(anyhow::Error::from)?;
        let (stripped, kept) = tree.strip_rests();
        let c = constituent_of(&tree).map_err(|e| anyhow!("{}: {}", path, e))?;
        let kept_labels: Vec<String> = kept
            .iter()
            .map(|&i| labels.get(i).cloned().unwrap_or_else(|| i.to_string()))
            .collect();
        debug_assert_eq!(stripped.len(), kept_labels.len());
        render_constituent(&c, &kept_labels)
    } else {
        render_dependency(&rec.head_sequence(&path).map_err(anyhow::Error::from)?, &labels)
    };
    match output {
        Some(path) => fs::write(path, dot).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", dot),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convert { input, output, to } => convert(&input, &output, to)?,
        Command::Train {
            corpus,
            output,
            log,
            opts,
        } => train(&corpus, &output, log.as_deref(), &opts)?,
        Command::Parse {
            model,
            input,
            output,
            decoder,
            strict_durations,
            dot,
        } => parse(&model, &input, &output, decoder, strict_durations, dot.as_deref())?,
        Command::Eval {
            pred,
            gold,
            loo,
            corpus,
            decoder,
            report,
            opts,
        } => {
            if loo {
                let corpus = corpus.expect("clap enforces --corpus with --loo");
                leave_one_out(&corpus, decoder, &opts, report.as_deref())?
            } else {
                let (pred, gold) = pred.zip(gold).expect("clap enforces --pred and --gold");
                eval(&pred, &gold, report.as_deref())?
            }
        }
        Command::Render {
            input,
            index,
            constituent,
            output,
        } => render(&input, index, constituent, output.as_deref())?,
        Command::Synth {
            output,
            count,
            min_len,
            max_len,
            seed,
        } => {
            if min_len == 0 || min_len > max_len {
                return Err(CliError::Usage("need 1 <= --min-len <= --max-len".into()));
            }
            save_corpus(&output, &generate_corpus(count, min_len, max_len, seed))
                .map_err(anyhow::Error::from)?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {}", msg);
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
