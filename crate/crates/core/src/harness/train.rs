use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::evaluate::{predict_examples, prepare_all};
use crate::corpus::{load_corpus, AnnotatedInstance, SchemaVersion};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_with, EvalReport};
use crate::models::{Example, Model};
use crate::nn::{Adam, Gradients};
use crate::par;
use crate::syntax::{read_parse_records, DependencyParse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-instance training loss over the epoch.
    pub train_loss: f64,
    pub dev: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Dev evaluation of the untrained model.
    pub initial: EvalReport,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch beat the untrained model.
    pub best_epoch: usize,
    pub best_dev_f05: f64,
    pub best_checkpoint: Option<PathBuf>,
    pub stopped_early: bool,
    pub wall_clock_secs: f64,
    pub config_fingerprint: String,
}

impl RunReport {
    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> RunReport {
        RunReport { wall_clock_secs: 0.0, ..self.clone() }
    }

    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

/// In-memory training inputs. Without a dev set, selection uses the train
/// set.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a [AnnotatedInstance],
    pub dev: Option<&'a [AnnotatedInstance]>,
    pub parses: Option<&'a HashMap<String, DependencyParse>>,
}

pub fn load_parses(path: &std::path::Path) -> Result<HashMap<String, DependencyParse>> {
    read_parse_records(path)?.into_iter().map(|r| Ok((r.id.clone(), r.to_parse()?))).collect()
}

/// Loads the data named in the config and trains.
pub fn train(config: &RunConfig) -> Result<(Model, RunReport)> {
    let train_path = config.data.train.as_ref().ok_or_else(|| Error::Config("data.train is not set".into()))?;
    let train = load_corpus(train_path, SchemaVersion::V1)?;
    let dev = config.data.dev.as_ref().map(|p| load_corpus(p, SchemaVersion::V1)).transpose()?;
    let parses = config.data.parses.as_ref().map(|p| load_parses(p)).transpose()?;
    train_on(config, TrainData { train: &train, dev: dev.as_deref(), parses: parses.as_ref() })
}

/// Sum of per-example gradients. Deterministic mode adds them in example
/// order; throughput mode lets the reduction tree pick the order.
fn batch_gradients(model: &Model, batch: &[&Example], config: &RunConfig) -> Result<(f64, Gradients)> {
    let mode = config.train.parallelism;
    if config.train.deterministic {
        let per = par::try_map(batch, mode, |ex| model.loss_and_grads(ex))?;
        let mut total = Gradients::empty(model.params().len());
        let mut loss = 0.0;
        for (l, g) in per {
            loss += l;
            total = total.merge(&g);
        }
        Ok((loss, total))
    } else {
        let n = model.params().len();
        let (loss, grads, err) = par::map_reduce_unordered(
            batch,
            mode,
            |ex| match model.loss_and_grads(ex) {
                Ok((l, g)) => (l, g, None),
                Err(e) => (0.0, Gradients::empty(n), Some(e.to_string())),
            },
            (0.0, Gradients::empty(n), None),
            |a, b| (a.0 + b.0, a.1.merge(&b.1), a.2.or(b.2)),
        );
        match err {
            Some(e) => Err(Error::Backend(e)),
            None => Ok((loss, grads)),
        }
    }
}

fn eval(model: &Model, examples: &[Example], golds: &[AnnotatedInstance], config: &RunConfig) -> Result<EvalReport> {
    let preds = predict_examples(model, examples, config.train.parallelism)?;
    evaluate_with(&preds, golds, config.train.parallelism)
}

pub fn train_on(config: &RunConfig, data: TrainData<'_>) -> Result<(Model, RunReport)> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    let started = Instant::now();
    let fingerprint = config.fingerprint();
    let mode = config.train.parallelism;
    let mut model = Model::new(config.model_config(), config.train.seed)?;
    let train_ex = prepare_all(&model, data.train, data.parses, mode)?;
    let dev_golds = data.dev.unwrap_or(data.train);
    let dev_ex = match data.dev {
        Some(dev) => prepare_all(&model, dev, data.parses, mode)?,
        None => train_ex.clone(),
    };
    let out_dir = config.output.dir.clone();
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let initial = eval(&model, &dev_ex, dev_golds, config)?;
    let mut best_params = model.params().clone();
    let mut best_epoch = 0;
    let mut best_f05 = initial.f05;
    let mut best_checkpoint = None;
    if let Some(dir) = &out_dir {
        let path = dir.join("best.json");
        Checkpoint::of(&model, &fingerprint, 0).save(&path)?;
        best_checkpoint = Some(path);
    }

    let mut adam = Adam::new(model.params(), config.lr());
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut epochs = Vec::new();
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 1..=config.train.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size()) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train_ex[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch, config)?;
            epoch_loss += loss;
            grads.scale(1.0 / batch.len() as f64);
            if config.train.clip > 0.0 {
                grads.clip(config.train.clip);
            }
            adam.step(model.params_mut(), &grads);
        }
        let train_loss = epoch_loss / train_ex.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Backend(format!("training loss diverged at epoch {epoch}")));
        }
        let dev = eval(&model, &dev_ex, dev_golds, config)?;
        log::info!(
            "epoch {epoch}: loss {train_loss:.4} dev P {:.3} R {:.3} F0.5 {:.3} EM {:.1}",
            dev.precision,
            dev.recall,
            dev.f05,
            dev.exact_match
        );
        if let Some(dir) = &out_dir {
            Checkpoint::of(&model, &fingerprint, epoch).save(&dir.join(format!("epoch-{epoch}.json")))?;
        }
        // ties with the untrained model go to the trained one
        let improved = dev.f05 > best_f05 || (best_epoch == 0 && dev.f05 >= best_f05);
        epochs.push(EpochRecord { epoch, train_loss, dev });
        if improved {
            best_f05 = epochs.last().unwrap().dev.f05;
            best_epoch = epoch;
            best_params = model.params().clone();
            since_best = 0;
            if let Some(dir) = &out_dir {
                let path = dir.join("best.json");
                Checkpoint::of(&model, &fingerprint, epoch).save(&path)?;
                best_checkpoint = Some(path);
            }
        } else {
            since_best += 1;
            if config.train.patience > 0 && since_best >= config.train.patience {
                stopped_early = true;
                break;
            }
        }
    }
    model.load_params(best_params)?;
    let report = RunReport {
        initial,
        epochs,
        best_epoch,
        best_dev_f05: best_f05,
        best_checkpoint,
        stopped_early,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        config_fingerprint: fingerprint,
    };
    if let Some(dir) = &out_dir {
        std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    }
    Ok((model, report))
}
