use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::load_model;
use super::config::RunConfig;
use super::train::{load_parses, train_on, TrainData};
use crate::align::extract_span_edit;
use crate::corpus::{load_corpus, AnnotatedInstance, ErrorType, SchemaVersion};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_with, EvalReport};
use crate::models::{Example, Model, Prediction};
use crate::par::{self, Parallelism};
use crate::syntax::{self, DependencyParse, ParserBackend};

/// Builds model inputs with gold targets.
pub fn prepare_all(
    model: &Model,
    instances: &[AnnotatedInstance],
    parses: Option<&HashMap<String, DependencyParse>>,
    mode: Parallelism,
) -> Result<Vec<Example>> {
    let use_syntax = model.config().use_syntax;
    par::try_map(instances, mode, |inst| {
        let parse = match parses.and_then(|p| p.get(&inst.id)) {
            Some(p) => Some(p),
            None if use_syntax => {
                return Err(Error::Config(format!("model uses syntax but no parse was supplied for {:?}", inst.id)))
            }
            None => None,
        };
        model.prepare(inst, parse)
    })
}

pub fn predict_examples(model: &Model, examples: &[Example], mode: Parallelism) -> Result<Vec<Prediction>> {
    par::try_map(examples, mode, |ex| model.predict(ex))
}

pub fn predict_instances(
    model: &Model,
    instances: &[AnnotatedInstance],
    parses: Option<&HashMap<String, DependencyParse>>,
    mode: Parallelism,
) -> Result<Vec<Prediction>> {
    let examples = prepare_all(model, instances, parses, mode)?;
    predict_examples(model, &examples, mode)
}

/// A raw source/hypothesis pair, e.g. from an upstream correction system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPair {
    pub id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Runs align, then syntax (when the model wants it), then the model.
/// Pairs without any difference are reported as errors.
pub fn predict_pairs(
    model: &Model,
    pairs: &[RawPair],
    parser: Option<&dyn ParserBackend>,
    mode: Parallelism,
) -> Result<Vec<Prediction>> {
    let use_syntax = model.config().use_syntax;
    if use_syntax && parser.is_none() {
        return Err(Error::Config("model uses syntax; supply parses or a parser command".into()));
    }
    let prepared: Vec<Result<Example>> = pairs
        .iter()
        .map(|p| {
            let edit = extract_span_edit(&p.source, &p.target)?;
            let parse = match parser.filter(|_| use_syntax) {
                Some(b) => Some(syntax::parse(b, &p.id, &p.target)?),
                None => None,
            };
            model.prepare_pair(&p.id, &p.source, &p.target, &edit, parse.as_ref())
        })
        .collect();
    let examples = prepared.into_iter().collect::<Result<Vec<_>>>()?;
    predict_examples(model, &examples, mode)
}

/// Upper bounds in tokens (exclusive); the last bucket is open.
pub const LENGTH_BUCKETS: [(usize, Option<usize>, &str); 6] = [
    (0, Some(10), "<10"),
    (10, Some(20), "10-20"),
    (20, Some(30), "20-30"),
    (30, Some(40), "30-40"),
    (40, Some(60), "40-60"),
    (60, None, ">60"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthBucket {
    pub label: String,
    pub count: usize,
    /// `None` for empty buckets.
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvaluation {
    pub report: EvalReport,
    /// By source-sentence length.
    pub length_buckets: Vec<LengthBucket>,
}

pub fn length_bucket(len: usize) -> usize {
    LENGTH_BUCKETS.iter().position(|&(lo, hi, _)| len >= lo && hi.is_none_or(|h| len < h)).expect("buckets cover all lengths")
}

/// Overall report plus per-length-bucket reports.
pub fn breakdown(preds: &[Prediction], golds: &[AnnotatedInstance], mode: Parallelism) -> Result<RunEvaluation> {
    let report = evaluate_with(preds, golds, mode)?;
    let pairs = crate::metrics::align_by_id(preds, golds)?;
    let mut split: Vec<(Vec<Prediction>, Vec<AnnotatedInstance>)> = vec![Default::default(); LENGTH_BUCKETS.len()];
    for (p, g) in pairs {
        let b = &mut split[length_bucket(g.x_tokens.len())];
        b.0.push(p.clone());
        b.1.push(g.clone());
    }
    let length_buckets = split
        .into_iter()
        .zip(LENGTH_BUCKETS)
        .map(|((p, g), (_, _, label))| {
            let report = if g.is_empty() { None } else { Some(evaluate_with(&p, &g, mode)?) };
            Ok(LengthBucket { label: label.to_string(), count: g.len(), report })
        })
        .collect::<Result<_>>()?;
    Ok(RunEvaluation { report, length_buckets })
}

pub fn evaluate_model(
    model: &Model,
    instances: &[AnnotatedInstance],
    parses: Option<&HashMap<String, DependencyParse>>,
    mode: Parallelism,
) -> Result<RunEvaluation> {
    let preds = predict_instances(model, instances, parses, mode)?;
    breakdown(&preds, instances, mode)
}

/// Loads a checkpoint and evaluates it on a corpus file.
pub fn evaluate_run(ckpt: &Path, data: &Path, parses: Option<&Path>) -> Result<RunEvaluation> {
    let model = load_model(ckpt)?;
    let instances = load_corpus(data, SchemaVersion::V1)?;
    let parses = parses.map(load_parses).transpose()?;
    evaluate_model(&model, &instances, parses.as_ref(), Parallelism::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeDelta {
    pub without_syntax: f64,
    pub with_syntax: f64,
    pub delta: f64,
}

/// Per-type F0.5 with and without syntax, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub per_type: BTreeMap<ErrorType, TypeDelta>,
    pub overall: TypeDelta,
    /// Types where syntax raised F0.5.
    pub syntax_helps: Vec<ErrorType>,
}

/// Errors unless the two configs differ in `model.use_syntax` and nothing
/// else.
pub fn check_ablation_pair(without: &RunConfig, with: &RunConfig) -> Result<()> {
    if without.model.use_syntax || !with.model.use_syntax {
        return Err(Error::Config("ablation needs one run without syntax and one with".into()));
    }
    let mut a = without.clone();
    a.model.use_syntax = true;
    a.output = with.output.clone();
    if a != *with {
        return Err(Error::Config("ablation configs differ beyond model.use_syntax".into()));
    }
    Ok(())
}

/// Pairs per-type F0.5 over the types present in both reports.
pub fn compare_reports(without: &[EvalReport], with: &[EvalReport], seeds: Vec<u64>) -> AblationReport {
    let mean = |rs: &[EvalReport], f: &dyn Fn(&EvalReport) -> Option<f64>| {
        let v: Vec<f64> = rs.iter().filter_map(f).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let types_in = |rs: &[EvalReport]| -> std::collections::BTreeSet<ErrorType> {
        rs.iter().flat_map(|r| r.per_type.keys().copied()).collect()
    };
    let delta = |a: f64, b: f64| TypeDelta { without_syntax: a, with_syntax: b, delta: b - a };
    let per_type: BTreeMap<ErrorType, TypeDelta> = types_in(without)
        .intersection(&types_in(with))
        .map(|&t| {
            let f = move |r: &EvalReport| r.per_type.get(&t).map(|s| s.f05);
            (t, delta(mean(without, &f), mean(with, &f)))
        })
        .collect();
    let overall = delta(mean(without, &|r| Some(r.f05)), mean(with, &|r| Some(r.f05)));
    let syntax_helps = per_type.iter().filter(|(_, d)| d.delta > 0.0).map(|(t, _)| *t).collect();
    AblationReport { seeds, per_type, overall, syntax_helps }
}

/// Trains with and without syntax for every seed and compares dev F0.5 by
/// type. `config.model.use_syntax` is ignored.
pub fn compare_syntax_ablation(config: &RunConfig, data: TrainData<'_>, seeds: &[u64]) -> Result<AblationReport> {
    if data.parses.is_none() {
        return Err(Error::Config("syntax ablation needs parses".into()));
    }
    let dev = data.dev.unwrap_or(data.train);
    let (mut without, mut with) = (Vec::new(), Vec::new());
    for &seed in seeds {
        let mut a = config.clone();
        a.train.seed = seed;
        a.model.use_syntax = false;
        a.output.dir = config.output.dir.as_ref().map(|d| d.join(format!("seed{seed}-plain")));
        let mut b = a.clone();
        b.model.use_syntax = true;
        b.output.dir = config.output.dir.as_ref().map(|d| d.join(format!("seed{seed}-syntax")));
        check_ablation_pair(&a, &b)?;
        for (cfg, out) in [(&a, &mut without), (&b, &mut with)] {
            let (model, _) = train_on(cfg, data)?;
            out.push(evaluate_model(&model, dev, data.parses, cfg.train.parallelism)?.report);
        }
    }
    Ok(compare_reports(&without, &with, seeds.to_vec()))
}
