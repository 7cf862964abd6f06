//! Token-labeling and bi-affine interaction heads.
//!
//! The same tape routines back both the trainable model and the
//! matrix-level functions exposed here, so tests of one cover the other.

use ndarray::Array2;

use super::gold::{InteractionTarget, TokenLabelSequence, NUM_CELL_LABELS};
use crate::error::{Error, Result};
use crate::nn::{softmax_rows, Mat, ParamStore, Tape, Var};
use crate::syntax::{SyntacticCategory, SyntacticMatrix};

/// `softmax(W h_i + b)` logits before the softmax, for every row of `h`.
pub fn labeling_logits_on(tape: &mut Tape<'_>, h: Var, w: Var, b: Var) -> Var {
    let z = tape.matmul(h, w);
    tape.add_row(z, b)
}

/// Variables of the interaction head on a tape.
#[derive(Debug, Clone, Copy)]
pub struct InteractionVars {
    pub wq: Var,
    pub bq: Var,
    pub wk: Var,
    pub bk: Var,
    pub u: Var,
    pub bu: Var,
    pub syn: Option<SynMlpVars>,
}

#[derive(Debug, Clone, Copy)]
pub struct SynMlpVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

/// Cell logits, rows ordered `i * |X| + j` for Y position `i` and X
/// position `j`.
///
/// `H^q = H^e W^q + b^q`, `H^k = H^c W^k + b^k`, then the bilinear score per
/// label. When `syn_onehot` (one row per cell, one column per syntactic
/// category) and the MLP are present, the MLP output is added before the
/// label bias.
pub fn interaction_logits_on(tape: &mut Tape<'_>, h_e: Var, h_c: Var, vars: &InteractionVars, syn_onehot: Option<Var>) -> Var {
    let q = tape.matmul(h_e, vars.wq);
    let q = tape.add_row(q, vars.bq);
    let k = tape.matmul(h_c, vars.wk);
    let k = tape.add_row(k, vars.bk);
    let mut scores = tape.biaffine(q, k, vars.u);
    if let (Some(mlp), Some(d)) = (vars.syn, syn_onehot) {
        let hidden = tape.matmul(d, mlp.w1);
        let hidden = tape.add_row(hidden, mlp.b1);
        let hidden = tape.relu(hidden);
        let out = tape.matmul(hidden, mlp.w2);
        let out = tape.add_row(out, mlp.b2);
        scores = tape.add(scores, out);
    }
    tape.add_row(scores, vars.bu)
}

/// One-hot encoding of the syntactic matrix, one row per cell.
pub fn syn_onehot(matrix: &SyntacticMatrix) -> Mat {
    let cells = matrix.cells();
    let mut out = Array2::zeros((cells.len(), SyntacticCategory::COUNT));
    for (r, c) in cells.iter().enumerate() {
        out[[r, c.index()]] = 1.0;
    }
    out
}

fn check_shape(what: &'static str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.dim() != (rows, cols) {
        return Err(Error::Contract(format!("{what} has shape {:?}, expected ({rows}, {cols})", m.dim())));
    }
    Ok(())
}

/// Per-position tag distributions for hidden states `h` (`len x |H|`).
pub fn labeling_forward(h: &Mat, w: &Mat, b: &Mat) -> Result<Mat> {
    check_shape("labeling weight", w, h.ncols(), w.ncols())?;
    check_shape("labeling bias", b, 1, w.ncols())?;
    let empty = ParamStore::new();
    let mut tape = Tape::new(&empty);
    let (hv, wv, bv) = (tape.constant(h.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let z = labeling_logits_on(&mut tape, hv, wv, bv);
    Ok(softmax_rows(tape.value(z)))
}

/// Sum of `-ln p(gold)` over the scored positions of one sentence.
pub fn labeling_loss(dist: &Mat, gold: &TokenLabelSequence) -> Result<f64> {
    if dist.nrows() != gold.len() {
        return Err(Error::Contract(format!("{} distributions for {} gold tags", dist.nrows(), gold.len())));
    }
    let mut loss = 0.0;
    for (p, tag) in gold.tags.iter().enumerate() {
        if gold.scored(p) {
            loss -= dist[[p, tag.index()]].ln();
        }
    }
    Ok(loss)
}

/// Dense parameters of the syntactic MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct SynMlpParams {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

/// Dense parameters of the interaction head.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionParams {
    pub wq: Mat,
    pub bq: Mat,
    pub wk: Mat,
    pub bk: Mat,
    /// `L` stacked `|H| x |H|` blocks.
    pub u: Mat,
    pub bu: Mat,
    pub syn: Option<SynMlpParams>,
}

impl InteractionParams {
    pub fn labels(&self) -> usize {
        self.bu.ncols()
    }

    fn validate(&self, hidden: usize) -> Result<()> {
        let proj = self.wq.ncols();
        check_shape("W^q", &self.wq, hidden, proj)?;
        check_shape("b^q", &self.bq, 1, proj)?;
        check_shape("W^k", &self.wk, hidden, proj)?;
        check_shape("b^k", &self.bk, 1, proj)?;
        let labels = self.labels();
        check_shape("U", &self.u, labels * proj, proj)?;
        if let Some(s) = &self.syn {
            let width = s.w1.ncols();
            check_shape("W^syn_1", &s.w1, SyntacticCategory::COUNT, width)?;
            check_shape("b^syn_1", &s.b1, 1, width)?;
            check_shape("W^syn_2", &s.w2, width, labels)?;
            check_shape("b^syn_2", &s.b2, 1, labels)?;
        }
        Ok(())
    }
}

/// Cell logits for `h_e` (X states) and `h_c` (Y states).
pub fn interaction_logits(h_e: &Mat, h_c: &Mat, params: &InteractionParams, syn: Option<&SyntacticMatrix>) -> Result<Mat> {
    if h_e.ncols() != h_c.ncols() {
        return Err(Error::Contract("query and key states differ in width".into()));
    }
    params.validate(h_e.ncols())?;
    if let Some(s) = syn {
        if s.rows() != h_c.nrows() || s.cols() != h_e.nrows() {
            return Err(Error::Contract(format!(
                "syntactic matrix is {}x{}, expected {}x{}",
                s.rows(),
                s.cols(),
                h_c.nrows(),
                h_e.nrows()
            )));
        }
    }
    let empty = ParamStore::new();
    let mut tape = Tape::new(&empty);
    let mut c = |m: &Mat| tape.constant(m.clone());
    let he = c(h_e);
    let hc = c(h_c);
    let vars = InteractionVars {
        wq: c(&params.wq),
        bq: c(&params.bq),
        wk: c(&params.wk),
        bk: c(&params.bk),
        u: c(&params.u),
        bu: c(&params.bu),
        syn: params.syn.as_ref().map(|s| SynMlpVars { w1: c(&s.w1), b1: c(&s.b1), w2: c(&s.w2), b2: c(&s.b2) }),
    };
    let onehot = syn.map(|s| tape.constant(syn_onehot(s)));
    let z = interaction_logits_on(&mut tape, he, hc, &vars, onehot);
    Ok(tape.value(z).clone())
}

/// Cell label distributions.
pub fn interaction_forward(h_e: &Mat, h_c: &Mat, params: &InteractionParams, syn: Option<&SyntacticMatrix>) -> Result<Mat> {
    interaction_logits(h_e, h_c, params, syn).map(|z| softmax_rows(&z))
}

/// Sum of `-ln p(gold)` over every cell, with `none` cells weighted by
/// `none_weight`.
pub fn interaction_loss_weighted(cells: &Mat, gold: &InteractionTarget, none_weight: f64) -> Result<f64> {
    if cells.nrows() != gold.cells.len() || cells.ncols() != NUM_CELL_LABELS {
        return Err(Error::Contract(format!(
            "cell grid has shape {:?}, gold has {} cells over {NUM_CELL_LABELS} labels",
            cells.dim(),
            gold.cells.len()
        )));
    }
    Ok(gold
        .cells
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let w = if label.index() == 0 { none_weight } else { 1.0 };
            -w * cells[[r, label.index()]].ln()
        })
        .sum())
}

pub fn interaction_loss(cells: &Mat, gold: &InteractionTarget) -> Result<f64> {
    interaction_loss_weighted(cells, gold, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gold::{make_labeling_gold, CellLabel, NUM_TAGS};
    use crate::corpus::ErrorType;
    use crate::nn::normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, h: usize, syn: bool) -> InteractionParams {
        InteractionParams {
            wq: normal(rng, h, h, 0.5),
            bq: normal(rng, 1, h, 0.5),
            wk: normal(rng, h, h, 0.5),
            bk: normal(rng, 1, h, 0.5),
            u: normal(rng, NUM_CELL_LABELS * h, h, 0.5),
            bu: normal(rng, 1, NUM_CELL_LABELS, 0.5),
            syn: syn.then(|| SynMlpParams {
                w1: normal(rng, 4, 5, 0.5),
                b1: normal(rng, 1, 5, 0.5),
                w2: normal(rng, 5, NUM_CELL_LABELS, 0.5),
                b2: normal(rng, 1, NUM_CELL_LABELS, 0.5),
            }),
        }
    }

    #[test]
    fn zero_labeling_weights_give_uniform() {
        let h = normal(&mut ChaCha8Rng::seed_from_u64(0), 6, 8, 1.0);
        let d = labeling_forward(&h, &Mat::zeros((8, NUM_TAGS)), &Mat::zeros((1, NUM_TAGS))).unwrap();
        assert!(d.iter().all(|&p| (p - 1.0 / NUM_TAGS as f64).abs() < 1e-15));
        assert!(labeling_forward(&h, &Mat::zeros((7, NUM_TAGS)), &Mat::zeros((1, NUM_TAGS))).is_err());
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let z = normal(&mut rng, 1, NUM_TAGS, 3.0);
            let c: f64 = rng.gen_range(-50.0..50.0);
            let a = crate::nn::argmax(softmax_rows(&z).iter().copied());
            let b = crate::nn::argmax(softmax_rows(&(&z + c)).iter().copied());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn labeling_loss_closed_forms() {
        let gold = make_labeling_gold(3, 4, &[1], ErrorType::Gerund).unwrap();
        let uniform = Mat::from_elem((gold.len(), NUM_TAGS), 1.0 / NUM_TAGS as f64);
        let expected = (3 + 4 + 1) as f64 * (NUM_TAGS as f64).ln();
        assert!((labeling_loss(&uniform, &gold).unwrap() - expected).abs() < 1e-12);
        let mut perfect = Mat::zeros((gold.len(), NUM_TAGS));
        for (p, t) in gold.tags.iter().enumerate() {
            perfect[[p, t.index()]] = 1.0;
        }
        assert_eq!(labeling_loss(&perfect, &gold).unwrap(), 0.0);
        assert!(labeling_loss(&perfect.slice(ndarray::s![..3, ..]).to_owned(), &gold).is_err());
    }

    #[test]
    fn interaction_zero_params_uniform_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (he, hc) = (normal(&mut rng, 5, 6, 1.0), normal(&mut rng, 4, 6, 1.0));
        let mut p = random_params(&mut rng, 6, false);
        p.u.fill(0.0);
        p.bu.fill(0.0);
        let d = interaction_forward(&he, &hc, &p, None).unwrap();
        assert_eq!(d.dim(), (20, NUM_CELL_LABELS));
        assert!(d.iter().all(|&v| (v - 1.0 / NUM_CELL_LABELS as f64).abs() < 1e-15));
        let p = random_params(&mut rng, 6, false);
        let d = interaction_forward(&he, &hc, &p, None).unwrap();
        for row in d.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        let mut bad = p.clone();
        bad.u = Mat::zeros((NUM_CELL_LABELS * 6 - 1, 6));
        assert!(matches!(interaction_forward(&he, &hc, &bad, None), Err(Error::Contract(_))));
    }

    #[test]
    fn syn_path_alone_is_the_mlp_by_hand() {
        use crate::align::extract_span_edit;
        use crate::syntax::{build_syntactic_matrix, SyntacticVector};
        use SyntacticCategory::*;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = random_params(&mut rng, 4, true);
        for m in [&mut p.wq, &mut p.bq, &mut p.wk, &mut p.bk, &mut p.u, &mut p.bu] {
            m.fill(0.0);
        }
        let x: Vec<String> = "a b c".split(' ').map(String::from).collect();
        let y: Vec<String> = "a B c".split(' ').map(String::from).collect();
        let edit = extract_span_edit(&x, &y).unwrap();
        let d = SyntacticVector::new(vec![First, Correction, Second]);
        let matrix = build_syntactic_matrix(&d, &d, &edit).unwrap();
        let (he, hc) = (normal(&mut rng, 3, 4, 1.0), normal(&mut rng, 3, 4, 1.0));
        let probs = interaction_forward(&he, &hc, &p, Some(&matrix)).unwrap();

        let mlp = p.syn.as_ref().unwrap();
        let by_hand = |cat: usize| -> Vec<f64> {
            let hidden: Vec<f64> = (0..5).map(|k| (mlp.w1[[cat, k]] + mlp.b1[[0, k]]).max(0.0)).collect();
            let logits: Vec<f64> =
                (0..NUM_CELL_LABELS).map(|l| (0..5).map(|k| hidden[k] * mlp.w2[[k, l]]).sum::<f64>() + mlp.b2[[0, l]]).collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|v| (v - max).exp()).sum();
            logits.iter().map(|v| (v - max).exp() / z).collect()
        };
        let expected: Vec<Vec<f64>> = (0..4).map(by_hand).collect();
        for (r, cat) in matrix.cells().iter().enumerate() {
            for l in 0..NUM_CELL_LABELS {
                assert!((probs[[r, l]] - expected[cat.index()][l]).abs() < 1e-12);
            }
        }
        let distinct: std::collections::HashSet<Vec<u64>> =
            expected.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn zero_mlp_leaves_logits_unchanged() {
        use crate::align::extract_span_edit;
        use crate::syntax::{build_syntactic_matrix, SyntacticVector};
        use SyntacticCategory::*;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut with = random_params(&mut rng, 4, true);
        let s = with.syn.as_mut().unwrap();
        for m in [&mut s.w1, &mut s.b1, &mut s.w2, &mut s.b2] {
            m.fill(0.0);
        }
        let without = InteractionParams { syn: Option::None, ..with.clone() };
        let x: Vec<String> = "a b c".split(' ').map(String::from).collect();
        let y: Vec<String> = "a B c".split(' ').map(String::from).collect();
        let edit = extract_span_edit(&x, &y).unwrap();
        let d = SyntacticVector::new(vec![First, Correction, Second]);
        let matrix = build_syntactic_matrix(&d, &d, &edit).unwrap();
        let (he, hc) = (normal(&mut rng, 3, 4, 1.0), normal(&mut rng, 3, 4, 1.0));
        let a = interaction_logits(&he, &hc, &with, Some(&matrix)).unwrap();
        let b = interaction_logits(&he, &hc, &without, Option::None).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn interaction_loss_closed_forms() {
        let gold = InteractionTarget { rows: 4, cols: 5, cells: vec![CellLabel::None; 20] };
        let uniform = Mat::from_elem((20, NUM_CELL_LABELS), 1.0 / NUM_CELL_LABELS as f64);
        let expected = 20.0 * (NUM_CELL_LABELS as f64).ln();
        assert!((interaction_loss(&uniform, &gold).unwrap() - expected).abs() < 1e-12);
        let mut perfect = Mat::zeros((20, NUM_CELL_LABELS));
        perfect.column_mut(0).fill(1.0);
        assert_eq!(interaction_loss(&perfect, &gold).unwrap(), 0.0);
        assert!(interaction_loss(&perfect.slice(ndarray::s![..19, ..]).to_owned(), &gold).is_err());
    }
}
