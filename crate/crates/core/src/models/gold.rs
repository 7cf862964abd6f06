//! Gold supervision for both heads.

use std::fmt;

use crate::align::{Span, SpanEdit};
use crate::corpus::ErrorType;
use crate::encoder::concat_layout;
use crate::error::{Error, Result};

/// Typed BIO tag over the concatenated input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    O,
    B(ErrorType),
    I(ErrorType),
}

/// `O` plus a B and I tag per evidence-bearing type.
pub const NUM_TAGS: usize = 1 + 2 * ErrorType::EVIDENCE_BEARING.len();

impl Tag {
    pub fn index(self) -> usize {
        match self {
            Tag::O => 0,
            Tag::B(t) => 1 + 2 * t.evidence_index().expect("evidence-bearing type"),
            Tag::I(t) => 2 + 2 * t.evidence_index().expect("evidence-bearing type"),
        }
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        match i {
            0 => Some(Tag::O),
            i if i < NUM_TAGS => {
                let t = ErrorType::EVIDENCE_BEARING[(i - 1) / 2];
                Some(if i % 2 == 1 { Tag::B(t) } else { Tag::I(t) })
            }
            _ => None,
        }
    }

    pub fn error_type(self) -> Option<ErrorType> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(t),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::O => f.write_str("O"),
            Tag::B(t) => write!(f, "B-{t}"),
            Tag::I(t) => write!(f, "I-{t}"),
        }
    }
}

/// Per-position tags over `[CLS] X [SEP] Y [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenLabelSequence {
    pub tags: Vec<Tag>,
    pub x_range: Span,
    pub y_range: Span,
}

impl TokenLabelSequence {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Positions that enter the loss: `[CLS]`, X and Y (`m + n + 1` in
    /// total). The two `[SEP]` positions are skipped.
    pub fn scored(&self, p: usize) -> bool {
        p == 0 || self.x_range.contains(p) || self.y_range.contains(p)
    }

    pub fn num_scored(&self) -> usize {
        1 + self.x_range.len() + self.y_range.len()
    }

    /// No `I-t` after `O` or after a tag of a different type, and no
    /// non-`O` tags on special positions.
    pub fn is_well_formed(&self) -> bool {
        let mut prev = Tag::O;
        for (p, &tag) in self.tags.iter().enumerate() {
            let special = !self.x_range.contains(p) && !self.y_range.contains(p);
            if special && tag != Tag::O {
                return false;
            }
            if let Tag::I(t) = tag {
                if prev.error_type() != Some(t) {
                    return false;
                }
            }
            prev = tag;
        }
        true
    }
}

/// Tags evidence tokens of X with `B-t`/`I-t` for the instance type; every
/// other position is `O`.
pub fn make_labeling_gold(
    x_len: usize,
    y_len: usize,
    evidence: &[usize],
    error_type: ErrorType,
) -> Result<TokenLabelSequence> {
    let (x_range, y_range, total) = concat_layout(x_len, y_len);
    let mut tags = vec![Tag::O; total];
    if error_type != ErrorType::Others {
        for (k, &j) in evidence.iter().enumerate() {
            if j >= x_len {
                return Err(Error::Contract(format!("evidence index {j} falls on a special position")));
            }
            let continues = k > 0 && evidence[k - 1] + 1 == j;
            tags[x_range.start + j] = if continues { Tag::I(error_type) } else { Tag::B(error_type) };
        }
    }
    Ok(TokenLabelSequence { tags, x_range, y_range })
}

/// Cell label for the interaction grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    None,
    Evidence(ErrorType),
}

/// `none` plus one label per evidence-bearing type.
pub const NUM_CELL_LABELS: usize = 1 + ErrorType::EVIDENCE_BEARING.len();

impl CellLabel {
    pub fn index(self) -> usize {
        match self {
            CellLabel::None => 0,
            CellLabel::Evidence(t) => 1 + t.evidence_index().expect("evidence-bearing type"),
        }
    }

    pub fn from_index(i: usize) -> Option<CellLabel> {
        match i {
            0 => Some(CellLabel::None),
            i if i < NUM_CELL_LABELS => Some(CellLabel::Evidence(ErrorType::EVIDENCE_BEARING[i - 1])),
            _ => None,
        }
    }

    pub fn error_type(self) -> Option<ErrorType> {
        match self {
            CellLabel::None => None,
            CellLabel::Evidence(t) => Some(t),
        }
    }
}

/// `|Y| x |X|` grid of gold cell labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionTarget {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<CellLabel>,
}

impl InteractionTarget {
    pub fn get(&self, i: usize, j: usize) -> CellLabel {
        self.cells[i * self.cols + j]
    }
}

/// Marks `(edit row, evidence column)` cells with the instance type. Edit
/// rows are the Y edit span, or the flanking Y tokens for a deletion.
pub fn make_interaction_gold(
    x_len: usize,
    y_len: usize,
    edit: &SpanEdit,
    evidence: &[usize],
    error_type: ErrorType,
) -> Result<InteractionTarget> {
    let mut cells = vec![CellLabel::None; x_len * y_len];
    if error_type != ErrorType::Others {
        for &j in evidence {
            if j >= x_len {
                return Err(Error::Contract(format!("evidence index {j} out of range for {x_len} source tokens")));
            }
            for i in edit.y_anchor_rows(y_len) {
                cells[i * x_len + j] = CellLabel::Evidence(error_type);
            }
        }
    }
    Ok(InteractionTarget { rows: y_len, cols: x_len, cells })
}
