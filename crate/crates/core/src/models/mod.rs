//! The two prediction heads over a shared encoder, gold construction, and
//! decoding.

mod decode;
mod gold;
mod heads;

pub use decode::{decode_interaction, decode_labeling, Prediction, PredictionRecord, PredictionScores};
pub use gold::{
    make_interaction_gold, make_labeling_gold, CellLabel, InteractionTarget, Tag, TokenLabelSequence, NUM_CELL_LABELS,
    NUM_TAGS,
};
pub use heads::{
    interaction_forward, interaction_logits, interaction_logits_on, interaction_loss, interaction_loss_weighted,
    labeling_forward, labeling_logits_on, labeling_loss, syn_onehot, InteractionParams, InteractionVars, SynMlpParams,
    SynMlpVars,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::SpanEdit;
use crate::corpus::{AnnotatedInstance, ErrorType};
use crate::encoder::{apply_linear, EncodedInput, Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::nn::{normal, softmax_rows, xavier, Gradients, Mat, ParamId, ParamStore, Tape, Var};
use crate::syntax::{build_syntactic_matrix, syntax_vectors, DependencyParse, SyntacticCategory, SyntacticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    #[default]
    Labeling,
    Interaction,
}

impl std::str::FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeling" => Ok(HeadKind::Labeling),
            "interaction" => Ok(HeadKind::Interaction),
            other => Err(Error::Config(format!("unknown model head {other:?} (expected labeling|interaction)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub head: HeadKind,
    pub use_syntax: bool,
    /// Hidden width of the syntactic-matrix MLP.
    pub syn_hidden: usize,
    /// Loss weight of `none` cells in the interaction grid.
    pub none_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            head: HeadKind::Labeling,
            use_syntax: false,
            syn_hidden: 16,
            none_weight: 1.0,
        }
    }
}

/// Gold targets attached to an [`Example`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleGold {
    pub error_type: ErrorType,
    pub evidence: Vec<usize>,
    pub tags: TokenLabelSequence,
    pub cells: InteractionTarget,
}

/// A sentence pair turned into model input.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub x_len: usize,
    pub y_len: usize,
    pub edit: SpanEdit,
    pub input: EncodedInput,
    pub syn_matrix: Option<SyntacticMatrix>,
    pub gold: Option<ExampleGold>,
}

#[derive(Debug, Clone)]
enum HeadParams {
    Labeling { w: ParamId, b: ParamId },
    Interaction { q: (ParamId, ParamId), k: (ParamId, ParamId), u: ParamId, bu: ParamId, syn: Option<[ParamId; 4]> },
}

/// Encoder plus one prediction head plus the sentence-type fallback head on
/// `[CLS]`.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    encoder: Encoder,
    head: HeadParams,
    type_head: (ParamId, ParamId),
}

/// Tape variables produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    /// Labeling: `len x NUM_TAGS`. Interaction: `(|Y|*|X|) x NUM_CELL_LABELS`.
    pub logits: Var,
    /// `1 x 15` sentence-type logits.
    pub type_logits: Var,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoder = Encoder::new(&config.encoder, config.use_syntax, &mut params, &mut rng)?;
        let h = config.encoder.hidden;
        let head = match config.head {
            HeadKind::Labeling => HeadParams::Labeling {
                w: params.add("labeling.w", xavier(&mut rng, h, NUM_TAGS)),
                b: params.add("labeling.b", Mat::zeros((1, NUM_TAGS))),
            },
            HeadKind::Interaction => {
                let q = (params.add("interaction.query.w", xavier(&mut rng, h, h)), params.add("interaction.query.b", Mat::zeros((1, h))));
                let k = (params.add("interaction.key.w", xavier(&mut rng, h, h)), params.add("interaction.key.b", Mat::zeros((1, h))));
                let u = params.add("interaction.u", normal(&mut rng, NUM_CELL_LABELS * h, h, 1.0 / h as f64));
                let bu = params.add("interaction.bu", Mat::zeros((1, NUM_CELL_LABELS)));
                let syn = config.use_syntax.then(|| {
                    let s = config.syn_hidden;
                    [
                        params.add("interaction.syn.w1", xavier(&mut rng, SyntacticCategory::COUNT, s)),
                        params.add("interaction.syn.b1", Mat::zeros((1, s))),
                        params.add("interaction.syn.w2", xavier(&mut rng, s, NUM_CELL_LABELS)),
                        params.add("interaction.syn.b2", Mat::zeros((1, NUM_CELL_LABELS))),
                    ]
                });
                HeadParams::Interaction { q, k, u, bu, syn }
            }
        };
        let type_head = (
            params.add("type.w", xavier(&mut rng, h, ErrorType::ALL.len())),
            params.add("type.b", Mat::zeros((1, ErrorType::ALL.len()))),
        );
        Ok(Model { config, params, encoder, head, type_head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces all parameters; names and shapes must match this model's.
    pub fn load_params(&mut self, params: ParamStore) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Format(format!("checkpoint has {} parameters, model expects {}", params.len(), self.params.len())));
        }
        for id in self.params.ids() {
            if params.name(id) != self.params.name(id) || params.get(id).dim() != self.params.get(id).dim() {
                return Err(Error::Format(format!("parameter {} does not match the model layout", self.params.name(id))));
            }
        }
        self.params = params;
        Ok(())
    }

    /// Builds model input for a raw pair. `parse` is the dependency tree of
    /// `y` and is required when the model uses syntax.
    pub fn prepare_pair(
        &self,
        id: &str,
        x: &[String],
        y: &[String],
        edit: &SpanEdit,
        parse: Option<&DependencyParse>,
    ) -> Result<Example> {
        let syntax = match (self.config.use_syntax, parse) {
            (true, Some(p)) => Some(syntax_vectors(x, y, edit, p)?),
            (true, None) => return Err(Error::Config(format!("model uses syntax but {id:?} has no parse"))),
            (false, _) => None,
        };
        let input = EncodedInput::build(self.encoder.vocab(), x, y, edit, syntax.as_ref().map(|(a, b)| (a, b)))?;
        let syn_matrix = match (&syntax, self.config.head) {
            (Some((d_x, d_y)), HeadKind::Interaction) => Some(build_syntactic_matrix(d_x, d_y, edit)?),
            _ => None,
        };
        Ok(Example { id: id.to_string(), x_len: x.len(), y_len: y.len(), edit: edit.clone(), input, syn_matrix, gold: None })
    }

    /// Builds model input with gold targets for an annotated instance.
    pub fn prepare(&self, inst: &AnnotatedInstance, parse: Option<&DependencyParse>) -> Result<Example> {
        let mut ex = self.prepare_pair(&inst.id, &inst.x_tokens, &inst.y_tokens, &inst.edit, parse)?;
        let (n, m) = (inst.x_tokens.len(), inst.y_tokens.len());
        ex.gold = Some(ExampleGold {
            error_type: inst.error_type,
            evidence: inst.evidence.clone(),
            tags: make_labeling_gold(n, m, &inst.evidence, inst.error_type)?,
            cells: make_interaction_gold(n, m, &inst.edit, &inst.evidence, inst.error_type)?,
        });
        Ok(ex)
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, ex: &Example) -> Result<ForwardVars> {
        let h = self.encoder.forward(tape, &ex.input)?;
        let cls = tape.slice_rows(h, 0, 1);
        let type_logits = apply_linear(tape, cls, self.type_head);
        let logits = match &self.head {
            HeadParams::Labeling { w, b } => {
                let (w, b) = (tape.param(*w), tape.param(*b));
                labeling_logits_on(tape, h, w, b)
            }
            HeadParams::Interaction { q, k, u, bu, syn } => {
                let (xr, yr) = (ex.input.x_range, ex.input.y_range);
                let h_e = tape.slice_rows(h, xr.start, xr.end);
                let h_c = tape.slice_rows(h, yr.start, yr.end);
                let vars = InteractionVars {
                    wq: tape.param(q.0),
                    bq: tape.param(q.1),
                    wk: tape.param(k.0),
                    bk: tape.param(k.1),
                    u: tape.param(*u),
                    bu: tape.param(*bu),
                    syn: syn.map(|[w1, b1, w2, b2]| SynMlpVars {
                        w1: tape.param(w1),
                        b1: tape.param(b1),
                        w2: tape.param(w2),
                        b2: tape.param(b2),
                    }),
                };
                let onehot = match (&vars.syn, &ex.syn_matrix) {
                    (Some(_), Some(m)) => Some(tape.constant(syn_onehot(m))),
                    (Some(_), None) => return Err(Error::Config(format!("{:?} lacks a syntactic matrix", ex.id))),
                    _ => None,
                };
                interaction_logits_on(tape, h_e, h_c, &vars, onehot)
            }
        };
        Ok(ForwardVars { logits, type_logits })
    }

    /// Head loss plus the sentence-type loss, on the tape.
    pub fn loss_on<'a>(&'a self, tape: &mut Tape<'a>, ex: &Example) -> Result<Var> {
        let gold = ex.gold.as_ref().ok_or_else(|| Error::Contract(format!("{:?} has no gold targets", ex.id)))?;
        let out = self.forward(tape, ex)?;
        let head_loss = match self.config.head {
            HeadKind::Labeling => {
                let targets: Vec<usize> = gold.tags.tags.iter().map(|t| t.index()).collect();
                let weights: Vec<f64> = (0..targets.len()).map(|p| if gold.tags.scored(p) { 1.0 } else { 0.0 }).collect();
                tape.softmax_cross_entropy(out.logits, &targets, &weights)
            }
            HeadKind::Interaction => {
                let targets: Vec<usize> = gold.cells.cells.iter().map(|c| c.index()).collect();
                let weights: Vec<f64> =
                    targets.iter().map(|&t| if t == 0 { self.config.none_weight } else { 1.0 }).collect();
                tape.softmax_cross_entropy(out.logits, &targets, &weights)
            }
        };
        let type_loss = tape.softmax_cross_entropy(out.type_logits, &[gold.error_type.index()], &[1.0]);
        Ok(tape.add(head_loss, type_loss))
    }

    pub fn loss(&self, ex: &Example) -> Result<f64> {
        let mut tape = Tape::new(&self.params);
        let loss = self.loss_on(&mut tape, ex)?;
        Ok(tape.scalar(loss))
    }

    pub fn loss_and_grads(&self, ex: &Example) -> Result<(f64, Gradients)> {
        let mut tape = Tape::new(&self.params);
        let loss = self.loss_on(&mut tape, ex)?;
        Ok((tape.scalar(loss), tape.backward(loss)))
    }

    /// Head distributions and the fallback type distribution.
    pub fn distributions(&self, ex: &Example) -> Result<(Mat, Vec<f64>)> {
        let mut tape = Tape::new(&self.params);
        let out = self.forward(&mut tape, ex)?;
        let dist = softmax_rows(tape.value(out.logits));
        let types = softmax_rows(tape.value(out.type_logits)).row(0).to_vec();
        Ok((dist, types))
    }

    pub fn predict(&self, ex: &Example) -> Result<Prediction> {
        let (dist, types) = self.distributions(ex)?;
        let mut pred = match self.config.head {
            HeadKind::Labeling => decode_labeling(&dist, ex.input.x_range, &types),
            HeadKind::Interaction => decode_interaction(&dist, ex.y_len, ex.x_len, &ex.edit, &types),
        };
        pred.id = ex.id.clone();
        Ok(pred)
    }
}

/// One-hot head distributions for an example's gold, for checking that
/// decoding inverts gold construction.
pub fn gold_distributions(ex: &Example, head: HeadKind) -> Option<Mat> {
    let gold = ex.gold.as_ref()?;
    Some(match head {
        HeadKind::Labeling => {
            let mut d = Mat::zeros((gold.tags.len(), NUM_TAGS));
            for (p, t) in gold.tags.tags.iter().enumerate() {
                d[[p, t.index()]] = 1.0;
            }
            d
        }
        HeadKind::Interaction => {
            let mut d = Mat::zeros((gold.cells.cells.len(), NUM_CELL_LABELS));
            for (r, c) in gold.cells.cells.iter().enumerate() {
                d[[r, c.index()]] = 1.0;
            }
            d
        }
    })
}

/// Decodes one-hot gold distributions; the result should equal the gold.
pub fn decode_gold(ex: &Example, head: HeadKind) -> Option<Prediction> {
    let dist = gold_distributions(ex, head)?;
    let uniform = vec![1.0 / ErrorType::ALL.len() as f64; ErrorType::ALL.len()];
    let mut p = match head {
        HeadKind::Labeling => decode_labeling(&dist, ex.input.x_range, &uniform),
        HeadKind::Interaction => decode_interaction(&dist, ex.y_len, ex.x_len, &ex.edit, &uniform),
    };
    p.id = ex.id.clone();
    Some(p)
}
