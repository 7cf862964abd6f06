//! Input assembly (`[CLS] X [SEP] Y [SEP]` with correction and syntactic
//! channels), the summed input embeddings, and the reference contextual
//! encoder.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::align::{Span, SpanEdit};
use crate::error::{Error, Result};
use crate::nn::{normal, xavier, Mat, ParamId, ParamStore, Tape, Var};
use crate::syntax::{SyntacticCategory, SyntacticVector};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;
const RESERVED: usize = 4;

/// How whitespace tokens map to embedding rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VocabSpec {
    /// FNV-1a hash into a fixed number of buckets.
    Hashed { buckets: usize },
    /// Explicit word list; anything else maps to the unknown id.
    Closed { tokens: Vec<String> },
}

impl Default for VocabSpec {
    fn default() -> Self {
        VocabSpec::Hashed { buckets: 2048 }
    }
}

#[derive(Debug, Clone)]
pub struct Vocab {
    spec: VocabSpec,
    index: HashMap<String, usize>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Vocab {
    pub fn new(spec: VocabSpec) -> Self {
        let index = match &spec {
            VocabSpec::Hashed { .. } => HashMap::new(),
            VocabSpec::Closed { tokens } => {
                let mut index = HashMap::new();
                for t in tokens {
                    let next = RESERVED + index.len();
                    index.entry(t.clone()).or_insert(next);
                }
                index
            }
        };
        Vocab { spec, index }
    }

    pub fn size(&self) -> usize {
        match &self.spec {
            VocabSpec::Hashed { buckets } => RESERVED + buckets,
            VocabSpec::Closed { .. } => RESERVED + self.index.len(),
        }
    }

    pub fn id(&self, token: &str) -> usize {
        if token.is_empty() {
            return UNK_ID;
        }
        match &self.spec {
            VocabSpec::Hashed { buckets } => RESERVED + (fnv1a(token.as_bytes()) % *buckets as u64) as usize,
            VocabSpec::Closed { .. } => self.index.get(token).copied().unwrap_or(UNK_ID),
        }
    }
}

/// Positions of X and Y inside `[CLS] X [SEP] Y [SEP]`, plus the total
/// length.
pub fn concat_layout(n: usize, m: usize) -> (Span, Span, usize) {
    (Span::new(1, 1 + n), Span::new(n + 2, n + 2 + m), n + m + 3)
}

/// One concatenated model input.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub token_ids: Vec<usize>,
    /// 1 on edit-span tokens of both X and Y.
    pub correction_mask: Vec<u8>,
    pub syntactic: Vec<SyntacticCategory>,
    /// Positions of X tokens in the concatenated sequence.
    pub x_range: Span,
    /// Positions of Y tokens in the concatenated sequence.
    pub y_range: Span,
}

impl EncodedInput {
    /// Lays out `[CLS] X [SEP] Y [SEP]`. Without syntax the syntactic
    /// channel is all `None`.
    pub fn build(
        vocab: &Vocab,
        x: &[String],
        y: &[String],
        edit: &SpanEdit,
        syntax: Option<(&SyntacticVector, &SyntacticVector)>,
    ) -> Result<Self> {
        let (n, m) = (x.len(), y.len());
        if let Some((d_x, d_y)) = syntax {
            if d_x.len() != n {
                return Err(Error::Dimension { what: "X syntactic vector", expected: n, got: d_x.len() });
            }
            if d_y.len() != m {
                return Err(Error::Dimension { what: "Y syntactic vector", expected: m, got: d_y.len() });
            }
        }
        let (x_range, y_range, total) = concat_layout(n, m);
        let mut token_ids = Vec::with_capacity(total);
        token_ids.push(CLS_ID);
        token_ids.extend(x.iter().map(|t| vocab.id(t)));
        token_ids.push(SEP_ID);
        token_ids.extend(y.iter().map(|t| vocab.id(t)));
        token_ids.push(SEP_ID);

        let mut correction_mask = vec![0u8; total];
        for j in edit.x_span.iter() {
            correction_mask[x_range.start + j] = 1;
        }
        for i in edit.y_span.iter() {
            correction_mask[y_range.start + i] = 1;
        }

        let mut syntactic = vec![SyntacticCategory::None; total];
        if let Some((d_x, d_y)) = syntax {
            syntactic[x_range.iter()].copy_from_slice(d_x.as_slice());
            syntactic[y_range.iter()].copy_from_slice(d_y.as_slice());
        }
        Ok(EncodedInput { token_ids, correction_mask, syntactic, x_range, y_range })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Whether position `p` is `[CLS]` or `[SEP]`.
    pub fn is_special(&self, p: usize) -> bool {
        !self.x_range.contains(p) && !self.y_range.contains(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncoderBackend {
    /// Small trainable bidirectional self-attention stack.
    #[default]
    SelfAttention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub backend: EncoderBackend,
    pub hidden: usize,
    pub layers: usize,
    pub heads: usize,
    /// Width of the feed-forward sublayer.
    pub ffn: usize,
    pub max_positions: usize,
    pub vocab: VocabSpec,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            backend: EncoderBackend::SelfAttention,
            hidden: 64,
            layers: 2,
            heads: 4,
            ffn: 128,
            max_positions: 256,
            vocab: VocabSpec::default(),
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "encoder.hidden ({}) must be a positive multiple of encoder.heads ({})",
                self.hidden, self.heads
            )));
        }
        if self.max_positions < 4 {
            return Err(Error::Config("encoder.max_positions must be at least 4".into()));
        }
        if let VocabSpec::Hashed { buckets: 0 } = self.vocab {
            return Err(Error::Config("hashed vocabulary needs at least one bucket".into()));
        }
        Ok(())
    }
}

/// Embedding tables: token, position, correction (2 rows), and optionally
/// syntactic (4 rows). All share the hidden width.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub token: ParamId,
    pub position: ParamId,
    pub correction: ParamId,
    pub syntactic: Option<ParamId>,
    max_positions: usize,
}

impl Embeddings {
    pub fn new<R: Rng>(
        config: &EncoderConfig,
        vocab_size: usize,
        use_syntax: bool,
        params: &mut ParamStore,
        rng: &mut R,
    ) -> Self {
        let h = config.hidden;
        let token = params.add("embed.token", normal(rng, vocab_size, h, 0.1));
        let position = params.add("embed.position", sinusoidal(config.max_positions, h));
        let correction = params.add("embed.correction", normal(rng, 2, h, 0.1));
        let syntactic = use_syntax.then(|| params.add("embed.syntactic", normal(rng, SyntacticCategory::COUNT, h, 0.1)));
        Embeddings { token, position, correction, syntactic, max_positions: config.max_positions }
    }

    /// `e = e_t + e_p + e_c (+ e_s)` for every position.
    pub fn embed(&self, tape: &mut Tape<'_>, input: &EncodedInput) -> Result<Var> {
        let len = input.len();
        if len == 0 {
            return Err(Error::EmptyInput("encoded input"));
        }
        if len > self.max_positions {
            return Err(Error::Truncation { len, max: self.max_positions });
        }
        if input.correction_mask.len() != len || input.syntactic.len() != len {
            return Err(Error::Contract("channel lengths differ from the token sequence".into()));
        }
        let table = tape.param(self.token);
        let vocab = tape.value(table).nrows();
        let ids: Vec<usize> = input.token_ids.iter().map(|&i| if i < vocab { i } else { UNK_ID }).collect();
        let mut e = tape.gather(table, &ids);

        let pos_table = tape.param(self.position);
        let positions: Vec<usize> = (0..len).collect();
        let ep = tape.gather(pos_table, &positions);
        e = tape.add(e, ep);

        let corr_table = tape.param(self.correction);
        let mask: Vec<usize> = input.correction_mask.iter().map(|&c| c as usize).collect();
        let ec = tape.gather(corr_table, &mask);
        e = tape.add(e, ec);

        if let Some(syn) = self.syntactic {
            let syn_table = tape.param(syn);
            let cats: Vec<usize> = input.syntactic.iter().map(|c| c.index()).collect();
            let es = tape.gather(syn_table, &cats);
            e = tape.add(e, es);
        }
        Ok(e)
    }
}

/// Sinusoidal table used to initialize the learned position embeddings.
fn sinusoidal(rows: usize, dim: usize) -> Mat {
    Mat::from_shape_fn((rows, dim), |(p, i)| {
        let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
        let angle = p as f64 * rate;
        0.1 * if i % 2 == 0 { angle.sin() } else { angle.cos() }
    })
}

/// A contextual encoder over summed input embeddings.
pub trait ContextEncoder: Send + Sync {
    fn hidden(&self) -> usize;

    /// Maps `len x hidden` embeddings to `len x hidden` hidden states.
    fn encode(&self, tape: &mut Tape<'_>, embeddings: Var) -> Result<Var>;
}

#[derive(Debug, Clone)]
struct AttentionLayer {
    ln1: (ParamId, ParamId),
    wq: (ParamId, ParamId),
    wk: (ParamId, ParamId),
    wv: (ParamId, ParamId),
    wo: (ParamId, ParamId),
    ln2: (ParamId, ParamId),
    ff1: (ParamId, ParamId),
    ff2: (ParamId, ParamId),
}

/// Pre-norm transformer encoder without masking (every position attends to
/// every other).
#[derive(Debug, Clone)]
pub struct SelfAttentionEncoder {
    hidden: usize,
    heads: usize,
    layers: Vec<AttentionLayer>,
    final_ln: (ParamId, ParamId),
}

fn linear<R: Rng>(params: &mut ParamStore, rng: &mut R, name: &str, fan_in: usize, fan_out: usize) -> (ParamId, ParamId) {
    (
        params.add(format!("{name}.w"), xavier(rng, fan_in, fan_out)),
        params.add(format!("{name}.b"), Mat::zeros((1, fan_out))),
    )
}

fn layer_norm_params(params: &mut ParamStore, name: &str, dim: usize) -> (ParamId, ParamId) {
    (params.add(format!("{name}.gain"), Mat::ones((1, dim))), params.add(format!("{name}.bias"), Mat::zeros((1, dim))))
}

pub(crate) fn apply_linear(tape: &mut Tape<'_>, x: Var, (w, b): (ParamId, ParamId)) -> Var {
    let w = tape.param(w);
    let b = tape.param(b);
    let y = tape.matmul(x, w);
    tape.add_row(y, b)
}

fn apply_ln(tape: &mut Tape<'_>, x: Var, (g, b): (ParamId, ParamId)) -> Var {
    let g = tape.param(g);
    let b = tape.param(b);
    tape.layer_norm(x, g, b)
}

impl SelfAttentionEncoder {
    pub fn new<R: Rng>(config: &EncoderConfig, params: &mut ParamStore, rng: &mut R) -> Self {
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|l| {
                let p = format!("encoder.layer{l}");
                AttentionLayer {
                    ln1: layer_norm_params(params, &format!("{p}.ln1"), h),
                    wq: linear(params, rng, &format!("{p}.query"), h, h),
                    wk: linear(params, rng, &format!("{p}.key"), h, h),
                    wv: linear(params, rng, &format!("{p}.value"), h, h),
                    wo: linear(params, rng, &format!("{p}.out"), h, h),
                    ln2: layer_norm_params(params, &format!("{p}.ln2"), h),
                    ff1: linear(params, rng, &format!("{p}.ff1"), h, config.ffn),
                    ff2: linear(params, rng, &format!("{p}.ff2"), config.ffn, h),
                }
            })
            .collect();
        let final_ln = layer_norm_params(params, "encoder.final_ln", h);
        SelfAttentionEncoder { hidden: h, heads: config.heads, layers, final_ln }
    }

    fn attention(&self, tape: &mut Tape<'_>, x: Var, layer: &AttentionLayer) -> Var {
        let q = apply_linear(tape, x, layer.wq);
        let k = apply_linear(tape, x, layer.wk);
        let v = apply_linear(tape, x, layer.wv);
        let head_dim = self.hidden / self.heads;
        let scale = 1.0 / (head_dim as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for hd in 0..self.heads {
            let (a, b) = (hd * head_dim, (hd + 1) * head_dim);
            let qh = tape.slice_cols(q, a, b);
            let kh = tape.slice_cols(k, a, b);
            let vh = tape.slice_cols(v, a, b);
            let kt = tape.transpose(kh);
            let scores = tape.matmul(qh, kt);
            let scores = tape.scale(scores, scale);
            let weights = tape.softmax_rows(scores);
            outs.push(tape.matmul(weights, vh));
        }
        let joined = if outs.len() == 1 { outs[0] } else { tape.concat_cols(&outs) };
        apply_linear(tape, joined, layer.wo)
    }
}

impl ContextEncoder for SelfAttentionEncoder {
    fn hidden(&self) -> usize {
        self.hidden
    }

    fn encode(&self, tape: &mut Tape<'_>, embeddings: Var) -> Result<Var> {
        let (len, width) = tape.value(embeddings).dim();
        if len == 0 {
            return Err(Error::EmptyInput("embedding sequence"));
        }
        if width != self.hidden {
            return Err(Error::Contract(format!("embedding width {width} differs from encoder hidden size {}", self.hidden)));
        }
        let mut h = embeddings;
        for layer in &self.layers {
            let normed = apply_ln(tape, h, layer.ln1);
            let att = self.attention(tape, normed, layer);
            h = tape.add(h, att);
            let normed = apply_ln(tape, h, layer.ln2);
            let ff = apply_linear(tape, normed, layer.ff1);
            let ff = tape.relu(ff);
            let ff = apply_linear(tape, ff, layer.ff2);
            h = tape.add(h, ff);
        }
        Ok(apply_ln(tape, h, self.final_ln))
    }
}

/// Embedding layer plus contextual encoder.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub embeddings: Embeddings,
    pub context: SelfAttentionEncoder,
    vocab: Vocab,
}

impl Encoder {
    pub fn new<R: Rng>(config: &EncoderConfig, use_syntax: bool, params: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let vocab = Vocab::new(config.vocab.clone());
        let embeddings = Embeddings::new(config, vocab.size(), use_syntax, params, rng);
        let context = match config.backend {
            EncoderBackend::SelfAttention => SelfAttentionEncoder::new(config, params, rng),
        };
        Ok(Encoder { embeddings, context, vocab })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn hidden(&self) -> usize {
        self.context.hidden()
    }

    /// Hidden states for every position of `input`.
    pub fn forward(&self, tape: &mut Tape<'_>, input: &EncodedInput) -> Result<Var> {
        let e = self.embeddings.embed(tape, input)?;
        self.context.encode(tape, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::extract_span_edit;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn toy_config(hidden: usize, layers: usize) -> EncoderConfig {
        EncoderConfig { hidden, layers, heads: 2, ffn: 2 * hidden, max_positions: 64, vocab: VocabSpec::Hashed { buckets: 16 }, ..Default::default() }
    }

    fn toy_input(vocab: &Vocab, syntax: bool) -> EncodedInput {
        use SyntacticCategory::*;
        let x = toks("He go home");
        let y = toks("He goes home");
        let edit = extract_span_edit(&x, &y).unwrap();
        let d_x = SyntacticVector::new(vec![First, Correction, First]);
        let d_y = SyntacticVector::new(vec![First, Correction, First]);
        EncodedInput::build(vocab, &x, &y, &edit, syntax.then_some((&d_x, &d_y))).unwrap()
    }

    #[test]
    fn layout_and_masks() {
        let vocab = Vocab::new(VocabSpec::Hashed { buckets: 16 });
        let inp = toy_input(&vocab, true);
        assert_eq!(inp.len(), 3 + 3 + 3);
        assert_eq!(inp.token_ids[0], CLS_ID);
        assert_eq!(inp.token_ids[4], SEP_ID);
        assert_eq!(inp.token_ids[8], SEP_ID);
        assert_eq!(inp.correction_mask, vec![0, 0, 1, 0, 0, 0, 1, 0, 0]);
        assert_eq!(inp.x_range, Span::new(1, 4));
        assert_eq!(inp.y_range, Span::new(5, 8));
        for p in [0, 4, 8] {
            assert!(inp.is_special(p));
            assert_eq!(inp.syntactic[p], SyntacticCategory::None);
        }
        assert_eq!(inp.syntactic[2], SyntacticCategory::Correction);
    }

    #[test]
    fn closed_vocab_unknowns() {
        let v = Vocab::new(VocabSpec::Closed { tokens: vec!["a".into(), "b".into(), "a".into()] });
        assert_eq!(v.size(), RESERVED + 2);
        assert_eq!(v.id("b"), RESERVED + 1);
        assert_eq!(v.id("zzz"), UNK_ID);
        let h = Vocab::new(VocabSpec::Hashed { buckets: 8 });
        assert_eq!(h.id("word"), h.id("word"));
        assert!(h.id("word") >= RESERVED && h.id("word") < h.size());
    }

    fn embeddings_for(config: &EncoderConfig, syntax: bool) -> (ParamStore, Embeddings) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = ParamStore::new();
        let emb = Embeddings::new(config, Vocab::new(config.vocab.clone()).size(), syntax, &mut params, &mut rng);
        (params, emb)
    }

    fn run_embed(params: &ParamStore, emb: &Embeddings, input: &EncodedInput) -> Mat {
        let mut tape = Tape::new(params);
        let v = emb.embed(&mut tape, input).unwrap();
        tape.value(v).clone()
    }

    #[test]
    fn zero_tables_embed_to_zero() {
        let config = toy_config(8, 1);
        let (mut params, emb) = embeddings_for(&config, true);
        for id in params.ids().collect::<Vec<_>>() {
            params.get_mut(id).fill(0.0);
        }
        let input = toy_input(&Vocab::new(config.vocab.clone()), true);
        assert!(run_embed(&params, &emb, &input).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mask_off_uses_only_the_off_row() {
        let config = toy_config(8, 1);
        let (params, emb) = embeddings_for(&config, false);
        let mut input = toy_input(&Vocab::new(config.vocab.clone()), false);
        input.correction_mask.fill(0);
        let out = run_embed(&params, &emb, &input);
        let (t, p, c) = (params.get(emb.token), params.get(emb.position), params.get(emb.correction));
        for (pos, &id) in input.token_ids.iter().enumerate() {
            for d in 0..8 {
                let expected = t[[id, d]] + p[[pos, d]] + c[[0, d]];
                assert_eq!(out[[pos, d]], expected);
            }
        }
    }

    #[test]
    fn orthogonal_tables_decompose() {
        // Each table lives on its own block of coordinates, so inner
        // products with each block's one-hots recover the looked-up rows.
        let config = EncoderConfig { vocab: VocabSpec::Closed { tokens: toks("He go goes home") }, ..toy_config(32, 1) };
        let (mut params, emb) = embeddings_for(&config, true);
        let vocab = Vocab::new(config.vocab.clone());
        let blocks = [(emb.token, 0usize), (emb.position, 12), (emb.correction, 24), (emb.syntactic.unwrap(), 26)];
        for &(id, offset) in &blocks {
            let rows = params.get(id).nrows().min(12);
            let table = params.get_mut(id);
            table.fill(0.0);
            for r in 0..rows {
                table[[r, offset + r]] = 1.0;
            }
        }
        let input = toy_input(&vocab, true);
        let out = run_embed(&params, &emb, &input);
        for pos in 0..input.len() {
            let row = out.row(pos);
            let hot = |offset: usize, width: usize| -> Vec<usize> {
                (0..width).filter(|&k| row[offset + k] != 0.0).collect()
            };
            assert_eq!(hot(0, 12), vec![input.token_ids[pos]]);
            assert_eq!(hot(12, 12), if pos < 12 { vec![pos] } else { vec![] });
            assert_eq!(hot(24, 2), vec![input.correction_mask[pos] as usize]);
            assert_eq!(hot(26, 4), vec![input.syntactic[pos].index()]);
            assert_eq!(row.iter().filter(|&&v| v != 0.0).count(), if pos < 12 { 4 } else { 3 });
        }
    }

    #[test]
    fn correction_table_is_linear() {
        let config = toy_config(8, 1);
        let (mut params, emb) = embeddings_for(&config, true);
        let input = toy_input(&Vocab::new(config.vocab.clone()), true);
        let base = run_embed(&params, &emb, &input);
        let contribution = {
            let c = params.get(emb.correction).clone();
            params.get_mut(emb.correction).fill(0.0);
            let without = run_embed(&params, &emb, &input);
            *params.get_mut(emb.correction) = c;
            &base - &without
        };
        let alpha = 2.0;
        params.get_mut(emb.correction).mapv_inplace(|v| v * alpha);
        let scaled = run_embed(&params, &emb, &input);
        let diff = &scaled - &base;
        for (d, c) in diff.iter().zip(contribution.iter()) {
            assert!((d - (alpha - 1.0) * c).abs() < 1e-12);
        }
    }

    #[test]
    fn overlong_input_is_an_error() {
        let config = EncoderConfig { max_positions: 8, ..toy_config(8, 1) };
        let (params, emb) = embeddings_for(&config, false);
        let input = toy_input(&Vocab::new(config.vocab.clone()), false);
        let mut tape = Tape::new(&params);
        assert!(matches!(emb.embed(&mut tape, &input), Err(Error::Truncation { len: 9, max: 8 })));
    }

    fn encoder(hidden: usize, layers: usize) -> (ParamStore, Encoder) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamStore::new();
        let enc = Encoder::new(&toy_config(hidden, layers), true, &mut params, &mut rng).unwrap();
        (params, enc)
    }

    #[test]
    fn encode_preserves_length_and_is_deterministic() {
        let (params, enc) = encoder(8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let len = rng.gen_range(1..40);
            let e = normal(&mut rng, len, 8, 1.0);
            let run = || {
                let mut tape = Tape::new(&params);
                let v = tape.constant(e.clone());
                let h = enc.context.encode(&mut tape, v).unwrap();
                tape.value(h).clone()
            };
            let a = run();
            assert_eq!(a.dim(), (len, 8));
            assert_eq!(a, run());
        }
        let mut tape = Tape::new(&params);
        let bad = tape.constant(Array2::zeros((3, 5)));
        assert!(matches!(enc.context.encode(&mut tape, bad), Err(Error::Contract(_))));
    }

    #[test]
    fn permutation_equivariance_without_positions() {
        let (params, enc) = encoder(8, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let len = 7;
        let e = normal(&mut rng, len, 8, 1.0);
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let permuted = Mat::from_shape_fn((len, 8), |(r, c)| e[[perm[r], c]]);
        let run = |m: &Mat| {
            let mut tape = Tape::new(&params);
            let v = tape.constant(m.clone());
            let h = enc.context.encode(&mut tape, v).unwrap();
            tape.value(h).clone()
        };
        let (a, b) = (run(&e), run(&permuted));
        for r in 0..len {
            for c in 0..8 {
                assert!((b[[r, c]] - a[[perm[r], c]]).abs() < 1e-12);
            }
        }
    }
}
