use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use expect_core::align::extract_span_edit;
use expect_core::corpus::{
    corpus_stats, load_corpus, load_corpus_with_warnings, save_corpus, type_histogram, EditRecord, SchemaVersion,
};
use expect_core::harness::{
    self, compare_syntax_ablation, load_parses, predict_instances, predict_pairs, Checkpoint, RawPair, RunConfig,
    TrainData,
};
use expect_core::metrics::evaluate;
use expect_core::models::{Prediction, PredictionRecord};
use expect_core::par::Parallelism;
use expect_core::syntax::{order_coverage_stats, syntax_vectors, write_parse_records, CommandBackend, FixtureBackend, ParserBackend};
use expect_core::synthesize::{generate_with, Mix};

#[derive(Parser)]
#[command(name = "expect", version, about = "Explainable grammatical error correction: evidence words and error types")]
struct Cli {
    /// Emit machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics and type histogram.
    Stats { file: PathBuf },
    /// Check a corpus file; exits 2 when any record is invalid.
    Validate { file: PathBuf },
    /// Minimal span edit for raw source/target pairs.
    Align {
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dependency-order vectors for each instance, plus coverage.
    ParseFeatures {
        corpus: PathBuf,
        #[arg(long)]
        parses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model from a config file.
    Train(TrainArgs),
    /// Predict evidence and type with a checkpoint.
    Predict(PredictArgs),
    /// Score predictions against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Print per-type scores in the text report.
        #[arg(long)]
        per_type: bool,
    },
    /// Generate a rule-based synthetic corpus.
    Synthesize {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// e.g. `sva:0.3,number:0.2,gerund:0.2,preposition:0.2,others:0.1`
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the gold dependency trees of the corrected sentences.
        #[arg(long)]
        parses: Option<PathBuf>,
    },
    /// Paired runs with and without syntactic features.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `data.train`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Overrides `data.dev`.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Overrides `data.parses`.
    #[arg(long)]
    parses: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Corpus JSONL, or raw pairs with `--pairs`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `--data` holds `{"id","source","target"}` pairs, e.g. system output.
    #[arg(long)]
    pairs: bool,
    /// Parse fixtures for the corrected sentences.
    #[arg(long)]
    parses: Option<PathBuf>,
    /// External parser speaking JSONL on stdin/stdout; used when no fixture
    /// file is given.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    parser_cmd: Option<Vec<String>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let code = match err.downcast_ref::<expect_core::Error>() {
                Some(expect_core::Error::Validation(_) | expect_core::Error::Parse { .. }) => 2,
                _ => 1,
            };
            if json {
                println!("{}", json!({ "ok": false, "error": format!("{err:#}") }));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}

fn mode(cli: &Cli) -> Parallelism {
    if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::Parallel
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let json = cli.json;
    let mode = mode(&cli);
    match cli.command {
        Command::Stats { file } => stats(&file, json)?,
        Command::Validate { file } => return validate(&file, json),
        Command::Align { pairs, out } => align(&pairs, out.as_deref(), json)?,
        Command::ParseFeatures { corpus, parses, out } => parse_features(&corpus, &parses, out.as_deref(), json)?,
        Command::Train(args) => train(args, json)?,
        Command::Predict(args) => predict(args, mode, json)?,
        Command::Evaluate { gold, pred, per_type } => evaluate_cmd(&gold, &pred, per_type, json)?,
        Command::Synthesize { n, seed, mix, out, parses } => synthesize(n, seed, mix.as_deref(), &out, parses.as_deref(), mode, json)?,
        Command::Ablate { config, seeds } => ablate(&config, &seeds, json)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn stats(file: &Path, json: bool) -> Result<()> {
    let loaded = load_corpus_with_warnings(file, SchemaVersion::V1)?;
    let s = corpus_stats(&loaded.instances)?;
    let hist = type_histogram(&loaded.instances)?;
    if json {
        let hist: serde_json::Map<String, serde_json::Value> = hist.iter().map(|(t, p)| (t.name().to_string(), json!(p))).collect();
        return print_json(&json!({ "ok": true, "stats": s, "types": hist, "warnings": loaded.warnings.len() }));
    }
    println!("{:<24}{:>10}", "sentences", s.n_sentences);
    println!("{:<24}{:>10}", "words", s.n_words);
    println!("{:<24}{:>10.2}", "avg words/sentence", s.avg_wps);
    println!("{:<24}{:>9.2}%", "with evidence", s.with_evidence_rate);
    println!("{:<24}{:>10}", "evidence words", s.total_evidence_words);
    println!("{:<24}{:>10.2}", "avg evidence/sentence", s.avg_evidence_wps);
    println!();
    let mut rows: Vec<_> = hist.into_iter().filter(|(_, p)| *p > 0.0).collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (t, p) in rows {
        println!("{:<30}{:>8.2}%", t.name(), p);
    }
    if !loaded.warnings.is_empty() {
        println!("\n{} warnings (see `expect validate`)", loaded.warnings.len());
    }
    Ok(())
}

fn validate(file: &Path, json: bool) -> Result<ExitCode> {
    match load_corpus_with_warnings(file, SchemaVersion::V1) {
        Ok(loaded) => {
            if json {
                print_json(&json!({ "ok": true, "instances": loaded.instances.len(), "warnings": loaded.warnings }))?;
            } else {
                for w in &loaded.warnings {
                    println!("warning  line {:>6}  {:<20} {}", w.line, w.id, w.message);
                }
                println!("ok: {} instances, {} warnings", loaded.instances.len(), loaded.warnings.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(expect_core::Error::Validation(issues)) => {
            if json {
                print_json(&json!({ "ok": false, "issues": issues }))?;
            } else {
                for i in &issues {
                    println!("invalid  line {:>6}  {:<20} {:<10} {}", i.line, i.id.as_deref().unwrap_or("-"), i.field, i.message);
                }
                println!("{} invalid records", issues.len());
            }
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

/// A pair line; tokens may be given as an array or a whitespace-separated
/// string.
#[derive(Deserialize)]
struct PairLine {
    id: String,
    source: Tokens,
    target: Tokens,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Tokens {
    List(Vec<String>),
    Text(String),
}

impl Tokens {
    fn into_vec(self) -> Vec<String> {
        match self {
            Tokens::List(v) => v,
            Tokens::Text(s) => s.split_whitespace().map(String::from).collect(),
        }
    }
}

fn read_pairs(path: &Path) -> Result<Vec<RawPair>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: PairLine = serde_json::from_str(&line).map_err(|e| expect_core::Error::Parse {
            line: k + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(RawPair { id: p.id, source: p.source.into_vec(), target: p.target.into_vec() });
    }
    Ok(out)
}

fn align(pairs: &Path, out: Option<&Path>, json: bool) -> Result<()> {
    let pairs = read_pairs(pairs)?;
    let mut w = writer(out)?;
    let mut failures = 0;
    for p in &pairs {
        match extract_span_edit(&p.source, &p.target) {
            Ok(e) => {
                let edit = EditRecord { src: [e.x_span.start, e.x_span.end], tgt: [e.y_span.start, e.y_span.end] };
                writeln!(w, "{}", json!({ "id": p.id, "edit": edit }))?;
            }
            Err(err) => {
                failures += 1;
                log::warn!("{}: {err}", p.id);
            }
        }
    }
    w.flush()?;
    drop(w);
    if out.is_some() {
        if json {
            print_json(&json!({ "ok": true, "pairs": pairs.len(), "skipped": failures }))?;
        } else {
            println!("aligned {} pairs, skipped {failures} without a difference", pairs.len() - failures);
        }
    }
    Ok(())
}

fn parse_features(corpus: &Path, parses: &Path, out: Option<&Path>, json: bool) -> Result<()> {
    let instances = load_corpus(corpus, SchemaVersion::V1)?;
    let parses = load_parses(parses)?;
    let mut w = writer(out)?;
    for inst in &instances {
        let parse = parses.get(&inst.id).ok_or_else(|| expect_core::Error::MissingParse(inst.id.clone()))?;
        let (d_x, d_y) = syntax_vectors(&inst.x_tokens, &inst.y_tokens, &inst.edit, parse)?;
        writeln!(w, "{}", json!({ "id": inst.id, "x": d_x, "y": d_y }))?;
    }
    w.flush()?;
    drop(w);
    let cov = order_coverage_stats(&instances, &parses)?;
    if json && out.is_some() {
        print_json(&json!({ "ok": true, "coverage": cov }))?;
    } else {
        let to = |s: String| if out.is_some() { println!("{s}") } else { eprintln!("{s}") };
        to(format!("instances            {}", cov.instances));
        to(format!("exist in 1st order   {:6.2}%", cov.exist_in_first_pct));
        to(format!("exist in 2nd order   {:6.2}%", cov.exist_in_second_pct));
        to(format!("all in 1st order     {:6.2}%", cov.all_in_first_pct));
        to(format!("all in 2nd order     {:6.2}%", cov.all_in_second_pct));
    }
    Ok(())
}

fn load_run_config(path: &Path) -> Result<RunConfig> {
    let mut config = RunConfig::from_file(path)?;
    config.apply_env()?;
    Ok(config)
}

fn train(args: TrainArgs, json: bool) -> Result<()> {
    let mut config = load_run_config(&args.config)?;
    if let Some(p) = args.data {
        config.data.train = Some(p);
    }
    if let Some(p) = args.dev {
        config.data.dev = Some(p);
    }
    if let Some(p) = args.parses {
        config.data.parses = Some(p);
    }
    if let Some(p) = args.out_dir {
        config.output.dir = Some(p);
    }
    if let Some(e) = args.epochs {
        config.train.epochs = e;
    }
    if let Some(s) = args.seed {
        config.train.seed = s;
    }
    if config.output.dir.is_none() {
        log::warn!("output.dir is not set; no checkpoint will be written");
    }
    let (_, report) = harness::train(&config)?;
    if json {
        return print_json(&json!({ "ok": true, "report": report }));
    }
    println!("{:>5} {:>10} {:>8} {:>8} {:>8} {:>7} {:>7}", "epoch", "loss", "P", "R", "F0.5", "EM", "acc");
    let row = |e: usize, loss: Option<f64>, r: &expect_core::metrics::EvalReport| {
        let loss = loss.map_or("-".to_string(), |l| format!("{l:.4}"));
        println!(
            "{e:>5} {loss:>10} {:>8.4} {:>8.4} {:>8.4} {:>7.2} {:>7.2}",
            r.precision, r.recall, r.f05, r.exact_match, r.label_accuracy
        );
    };
    row(0, None, &report.initial);
    for e in &report.epochs {
        row(e.epoch, Some(e.train_loss), &e.dev);
    }
    println!("best epoch {} (dev F0.5 {:.4}), {:.1}s", report.best_epoch, report.best_dev_f05, report.wall_clock_secs);
    if let Some(p) = &report.best_checkpoint {
        println!("checkpoint {}", p.display());
    }
    Ok(())
}

fn predict(args: PredictArgs, mode: Parallelism, json: bool) -> Result<()> {
    let model = Checkpoint::load(&args.ckpt)?.into_model()?;
    let preds = if args.pairs {
        let pairs = read_pairs(&args.data)?;
        let backend: Option<Box<dyn ParserBackend>> = match (&args.parses, &args.parser_cmd) {
            (Some(p), _) => Some(Box::new(FixtureBackend::from_file(p)?)),
            (None, Some(cmd)) if !cmd.is_empty() => Some(Box::new(CommandBackend::new(&cmd[0], cmd[1..].to_vec()))),
            _ => None,
        };
        predict_pairs(&model, &pairs, backend.as_deref(), mode)?
    } else {
        if args.parser_cmd.is_some() {
            bail!("--parser-cmd applies to --pairs input; give --parses for a corpus");
        }
        let instances = load_corpus(&args.data, SchemaVersion::V1)?;
        let parses = args.parses.as_deref().map(load_parses).transpose()?;
        predict_instances(&model, &instances, parses.as_ref(), mode)?
    };
    let mut w = writer(Some(&args.out))?;
    for p in &preds {
        writeln!(w, "{}", serde_json::to_string(&PredictionRecord::from(p))?)?;
    }
    w.flush()?;
    if json {
        print_json(&json!({ "ok": true, "predictions": preds.len(), "out": args.out }))?;
    } else {
        println!("wrote {} predictions to {}", preds.len(), args.out.display());
    }
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| expect_core::Error::Parse {
            line: k + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(Prediction::try_from(rec).with_context(|| format!("{}:{}", path.display(), k + 1))?);
    }
    Ok(out)
}

fn evaluate_cmd(gold: &Path, pred: &Path, per_type: bool, json: bool) -> Result<()> {
    let golds = load_corpus(gold, SchemaVersion::V1)?;
    let preds = read_predictions(pred)?;
    let ev = harness::breakdown(&preds, &golds, Parallelism::default())?;
    debug_assert_eq!(ev.report, evaluate(&preds, &golds)?);
    if json {
        return print_json(&json!({ "ok": true, "report": ev.report, "length_buckets": ev.length_buckets }));
    }
    let r = &ev.report;
    println!("instances       {}", r.instances);
    println!("precision       {:.4}", r.precision);
    println!("recall          {:.4}", r.recall);
    println!("F1              {:.4}", r.f1);
    println!("F0.5            {:.4}", r.f05);
    println!("exact match     {:.2}", r.exact_match);
    println!("label accuracy  {:.2}", r.label_accuracy);
    println!("TP/FP/FN        {}/{}/{}", r.counts.tp, r.counts.fp, r.counts.fn_);
    if per_type {
        println!("\n{:<30}{:>8}{:>8}{:>8}{:>9}", "type", "P", "R", "F0.5", "support");
        for (t, s) in &r.per_type {
            println!("{:<30}{:>8.4}{:>8.4}{:>8.4}{:>9}", t.name(), s.precision, s.recall, s.f05, s.support);
        }
    }
    println!("\n{:<8}{:>7}{:>8}{:>8}", "length", "count", "F0.5", "EM");
    for b in &ev.length_buckets {
        match &b.report {
            Some(r) => println!("{:<8}{:>7}{:>8.4}{:>8.2}", b.label, b.count, r.f05, r.exact_match),
            None => println!("{:<8}{:>7}{:>8}{:>8}", b.label, 0, "-", "-"),
        }
    }
    Ok(())
}

fn synthesize(
    n: usize,
    seed: u64,
    mix: Option<&str>,
    out: &Path,
    parses: Option<&Path>,
    mode: Parallelism,
    json: bool,
) -> Result<()> {
    let mix = match mix {
        Some(m) => m.parse::<Mix>()?,
        None => Mix::default(),
    };
    let corpus = generate_with(n, seed, &mix, mode)?;
    save_corpus(out, &corpus.instances)?;
    if let Some(p) = parses {
        let mut w = writer(Some(p))?;
        write_parse_records(&mut w, &corpus.parses)?;
        w.flush()?;
    }
    if json {
        print_json(&json!({ "ok": true, "instances": corpus.instances.len(), "mix": mix.to_string(), "out": out }))?;
    } else {
        println!("wrote {} instances ({mix}) to {}", corpus.instances.len(), out.display());
    }
    Ok(())
}

fn ablate(config: &Path, seeds: &[u64], json: bool) -> Result<()> {
    let config = load_run_config(config)?;
    let train_path = config.data.train.as_ref().context("data.train is not set")?;
    let train = load_corpus(train_path, SchemaVersion::V1)?;
    let dev = config.data.dev.as_ref().map(|p| load_corpus(p, SchemaVersion::V1)).transpose()?;
    let parses = config.data.parses.as_ref().context("ablation needs data.parses")?;
    let parses = load_parses(parses)?;
    let report = compare_syntax_ablation(&config, TrainData { train: &train, dev: dev.as_deref(), parses: Some(&parses) }, seeds)?;
    if json {
        return print_json(&json!({ "ok": true, "ablation": report }));
    }
    println!("{:<30}{:>10}{:>10}{:>10}", "type", "plain", "syntax", "delta");
    for (t, d) in &report.per_type {
        println!("{:<30}{:>10.4}{:>10.4}{:>+10.4}", t.name(), d.without_syntax, d.with_syntax, d.delta);
    }
    let o = report.overall;
    println!("{:<30}{:>10.4}{:>10.4}{:>+10.4}", "overall", o.without_syntax, o.with_syntax, o.delta);
    println!("seeds {:?}; syntax helps on {} types", report.seeds, report.syntax_helps.len());
    Ok(())
}
