//! Minimal reverse-mode autodiff over dense `f64` matrices, enough to train
//! the reference encoder and both prediction heads.

mod optim;
mod params;
mod tape;

pub use optim::Adam;
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub type Mat = Array2<f64>;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Mat) -> Mat {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Index of the largest entry; the first one wins on ties.
pub fn argmax(row: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in row.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn normal<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Mat {
    let dist = Normal::new(0.0, std).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// Glorot-uniform initialization.
pub fn xavier<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}
