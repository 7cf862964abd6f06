//! Span-edit extraction between an erroneous sentence and its correction,
//! and the token alignment outside the edit.

use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{SyntacticCategory, SyntacticVector};

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn iter(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// The single contiguous difference between X and Y: `X[x_span]` is
/// replaced by `s_y` to obtain Y.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanEdit {
    pub x_span: Span,
    pub y_span: Span,
    pub s_x: Vec<String>,
    pub s_y: Vec<String>,
}

impl SpanEdit {
    /// Builds an edit from spans, copying the replaced tokens out of both
    /// sentences.
    pub fn from_spans(x: &[String], y: &[String], x_span: Span, y_span: Span) -> Result<Self> {
        if x_span.start > x_span.end || x_span.end > x.len() {
            return Err(Error::InvalidEdit(format!("x span {x_span} out of range for {} tokens", x.len())));
        }
        if y_span.start > y_span.end || y_span.end > y.len() {
            return Err(Error::InvalidEdit(format!("y span {y_span} out of range for {} tokens", y.len())));
        }
        if x_span.is_empty() && y_span.is_empty() {
            return Err(Error::InvalidEdit("both sides of the edit are empty".into()));
        }
        Ok(SpanEdit {
            x_span,
            y_span,
            s_x: x[x_span.iter()].to_vec(),
            s_y: y[y_span.iter()].to_vec(),
        })
    }

    /// Length change from X to Y.
    pub fn offset(&self) -> isize {
        self.s_y.len() as isize - self.s_x.len() as isize
    }

    /// Whether applying this edit to `x` produces exactly `y`.
    pub fn reproduces(&self, x: &[String], y: &[String]) -> bool {
        self.x_span.end <= x.len()
            && x[self.x_span.iter()] == self.s_x[..]
            && self.y_span.start == self.x_span.start
            && self.y_span.len() == self.s_y.len()
            && apply_edit(x, self).map(|out| out == y).unwrap_or(false)
    }

    /// Y rows that anchor the edit on the corrected side. For a pure deletion
    /// (empty Y span) these are the Y tokens on either side of the deletion
    /// site.
    pub fn y_anchor_rows(&self, y_len: usize) -> Vec<usize> {
        if !self.y_span.is_empty() {
            return self.y_span.iter().collect();
        }
        let site = self.y_span.start;
        let mut rows = Vec::with_capacity(2);
        if site > 0 {
            rows.push(site - 1);
        }
        if site < y_len {
            rows.push(site);
        }
        rows
    }
}

/// Replaces `x[edit.x_span]` with `edit.s_y`.
pub fn apply_edit(x: &[String], edit: &SpanEdit) -> Result<Vec<String>> {
    if edit.x_span.end > x.len() || edit.x_span.start > edit.x_span.end {
        return Err(Error::InvalidEdit(format!("x span {} out of range for {} tokens", edit.x_span, x.len())));
    }
    let mut out = Vec::with_capacity(x.len() + edit.s_y.len());
    out.extend_from_slice(&x[..edit.x_span.start]);
    out.extend_from_slice(&edit.s_y);
    out.extend_from_slice(&x[edit.x_span.end..]);
    Ok(out)
}

/// Finds the minimal contiguous token diff between `x` and `y`.
///
/// Among all single contiguous replacements that turn `x` into `y`, picks
/// the one with the fewest replaced tokens, breaking ties by leftmost start.
/// Because the length difference between the sides is fixed, minimizing
/// `|s_x|` also minimizes `|s_y|`, so shortest-x is implied.
pub fn extract_span_edit(x: &[String], y: &[String]) -> Result<SpanEdit> {
    if x == y {
        return Err(Error::NoEdit);
    }
    let (n, m) = (x.len(), y.len());
    let prefix = x.iter().zip(y).take_while(|(a, b)| a == b).count();
    let suffix = x.iter().rev().zip(y.iter().rev()).take_while(|(a, b)| a == b).count();
    let shrink = n.saturating_sub(m);
    let grow = m.saturating_sub(n);

    // A start `a` is feasible when a <= prefix; the x end must satisfy
    // n - end <= suffix and leave room for the y side.
    let mut best: Option<(usize, usize)> = None;
    for a in 0..=prefix.min(n).min(m) {
        let x_end = (n - suffix.min(n)).max(a + shrink).max(a);
        let y_end = x_end + grow - shrink;
        if x_end > n || y_end > m || y_end < a {
            continue;
        }
        let len = x_end - a;
        if best.is_none_or(|(_, l)| len < l) {
            best = Some((a, len));
        }
    }
    let (a, len) = best.ok_or(Error::NoEdit)?;
    let x_span = Span::new(a, a + len);
    let y_span = Span::new(a, a + len + grow - shrink);
    SpanEdit::from_spans(x, y, x_span, y_span)
}

/// Token correspondence between X and Y outside the edit spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordAlignment {
    pub pairs: Vec<(usize, usize)>,
    pub x_len: usize,
    pub y_len: usize,
    pub x_span: Span,
    pub y_span: Span,
}

impl WordAlignment {
    /// Y index aligned to X index `j`, if any.
    pub fn y_of(&self, j: usize) -> Option<usize> {
        if j >= self.x_len || self.x_span.contains(j) {
            return None;
        }
        if j < self.x_span.start {
            Some(j)
        } else {
            Some(j - self.x_span.end + self.y_span.end)
        }
    }

    /// X index aligned to Y index `i`, if any.
    pub fn x_of(&self, i: usize) -> Option<usize> {
        if i >= self.y_len || self.y_span.contains(i) {
            return None;
        }
        if i < self.y_span.start {
            Some(i)
        } else {
            Some(i - self.y_span.end + self.x_span.end)
        }
    }

    /// The same alignment read from the Y side.
    pub fn inverse(&self) -> WordAlignment {
        WordAlignment {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
            x_len: self.y_len,
            y_len: self.x_len,
            x_span: self.y_span,
            y_span: self.x_span,
        }
    }
}

/// Builds the monotone alignment between non-edit tokens.
pub fn build_alignment(x: &[String], y: &[String], edit: &SpanEdit) -> Result<WordAlignment> {
    if !edit.reproduces(x, y) {
        return Err(Error::InvalidEdit(format!(
            "edit {} -> {} does not transform the source into the target",
            edit.x_span, edit.y_span
        )));
    }
    let mut pairs = Vec::with_capacity(x.len() - edit.x_span.len());
    pairs.extend((0..edit.x_span.start).map(|j| (j, j)));
    pairs.extend((edit.x_span.end..x.len()).map(|j| (j, j - edit.x_span.end + edit.y_span.end)));
    Ok(WordAlignment { pairs, x_len: x.len(), y_len: y.len(), x_span: edit.x_span, y_span: edit.y_span })
}

/// Maps a Y-side syntactic vector onto X. Edit-span tokens of X get
/// [`SyntacticCategory::Correction`].
pub fn project_vector(d_y: &SyntacticVector, alignment: &WordAlignment) -> Result<SyntacticVector> {
    if d_y.len() != alignment.y_len {
        return Err(Error::Dimension { what: "Y syntactic vector", expected: alignment.y_len, got: d_y.len() });
    }
    let mut d_x = vec![SyntacticCategory::Correction; alignment.x_len];
    for &(j, i) in &alignment.pairs {
        d_x[j] = d_y[i];
    }
    Ok(SyntacticVector::new(d_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    /// Enumerates every contiguous replacement and keeps the smallest,
    /// leftmost one.
    fn brute_force(x: &[String], y: &[String]) -> Option<(Span, Span)> {
        let mut best: Option<(usize, usize, Span, Span)> = None;
        for a in 0..=x.len() {
            for b in a..=x.len() {
                for c in a..=y.len() {
                    if a > y.len() {
                        continue;
                    }
                    let mut out = x[..a].to_vec();
                    out.extend_from_slice(&y[a..c]);
                    out.extend_from_slice(&x[b..]);
                    if out != y || (b == a && c == a) {
                        continue;
                    }
                    let key = ((b - a) + (c - a), a);
                    if best.as_ref().is_none_or(|(s, st, _, _)| key < (*s, *st)) {
                        best = Some((key.0, key.1, Span::new(a, b), Span::new(a, c)));
                    }
                }
            }
        }
        best.map(|(_, _, xs, ys)| (xs, ys))
    }

    #[test]
    fn gerund_substitution() {
        let x = toks("As a result , I enjoy study accounting .");
        let y = toks("As a result , I enjoy studying accounting .");
        let e = extract_span_edit(&x, &y).unwrap();
        assert_eq!(e.s_x, toks("study"));
        assert_eq!(e.s_y, toks("studying"));
        assert_eq!(e.x_span, Span::new(6, 7));
    }

    #[test]
    fn agreement_substitution() {
        let e = extract_span_edit(&toks("Evidence words are important"), &toks("Evidence words is important")).unwrap();
        assert_eq!(e.s_x, toks("are"));
        assert_eq!(e.s_y, toks("is"));
    }

    #[test]
    fn pure_insertion_matches_brute_force() {
        let x = toks("He going home");
        let y = toks("He is going home");
        let e = extract_span_edit(&x, &y).unwrap();
        assert_eq!(e.x_span, Span::new(1, 1));
        assert_eq!(e.s_y, toks("is"));
        assert_eq!(brute_force(&x, &y), Some((e.x_span, e.y_span)));
    }

    #[test]
    fn repeated_tokens_break_ties_leftmost() {
        let x = toks("a a b");
        let y = toks("a b");
        let e = extract_span_edit(&x, &y).unwrap();
        assert_eq!(e.x_span, Span::new(0, 1));
        assert_eq!(brute_force(&x, &y), Some((e.x_span, e.y_span)));
    }

    #[test]
    fn identical_sequences_have_no_edit() {
        let x = toks("same words");
        assert!(matches!(extract_span_edit(&x, &x), Err(Error::NoEdit)));
    }

    #[test]
    fn alignment_offsets() {
        let x = toks("a b c d");
        let y = toks("a b X c d");
        let e = extract_span_edit(&x, &y).unwrap();
        let al = build_alignment(&x, &y, &e).unwrap();
        assert_eq!(al.pairs, vec![(0, 0), (1, 1), (2, 3), (3, 4)]);

        let x = toks("I enjoy study accounting");
        let y = toks("I enjoy studying accounting");
        let e = extract_span_edit(&x, &y).unwrap();
        let al = build_alignment(&x, &y, &e).unwrap();
        assert_eq!(al.pairs, vec![(0, 0), (1, 1), (3, 3)]);
        for &(a, b) in &al.pairs {
            assert_eq!(al.y_of(a), Some(b));
            assert_eq!(al.inverse().y_of(b), Some(a));
        }
        assert_eq!(al.y_of(2), None);
    }

    #[test]
    fn inconsistent_edit_is_rejected() {
        let x = toks("a b c");
        let y = toks("a d c");
        let mut e = extract_span_edit(&x, &y).unwrap();
        e.s_y = toks("e");
        assert!(matches!(build_alignment(&x, &y, &e), Err(Error::InvalidEdit(_))));
    }

    #[test]
    fn projection_marks_deleted_tokens() {
        use SyntacticCategory::*;
        let x = toks("I can to go home");
        let y = toks("I can go home");
        let e = extract_span_edit(&x, &y).unwrap();
        assert!(e.s_y.is_empty());
        let al = build_alignment(&x, &y, &e).unwrap();
        let d_y = SyntacticVector::new(vec![None, First, First, Second]);
        let d_x = project_vector(&d_y, &al).unwrap();
        // the oracle: walk the alignment by hand
        let expected: Vec<_> = (0..x.len()).map(|j| al.y_of(j).map_or(Correction, |i| d_y[i])).collect();
        assert_eq!(d_x.as_slice(), &expected[..]);
        assert_eq!(d_x[e.x_span.start], Correction);
        assert!(project_vector(&SyntacticVector::new(vec![None]), &al).is_err());
    }

    #[test]
    fn anchors_for_deletion() {
        let x = toks("I can to go home");
        let y = toks("I can go home");
        let e = extract_span_edit(&x, &y).unwrap();
        assert_eq!(e.y_anchor_rows(y.len()), vec![1, 2]);
        let e = extract_span_edit(&toks("a b"), &toks("a")).unwrap();
        assert_eq!(e.y_anchor_rows(1), vec![0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sentence() -> impl Strategy<Value = Vec<String>> {
            prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..7)
                .prop_map(|v| v.into_iter().map(String::from).collect())
        }

        proptest! {
            #[test]
            fn extraction_round_trips_and_is_minimal(x in sentence(), y in sentence()) {
                prop_assume!(x != y);
                let e = extract_span_edit(&x, &y).unwrap();
                prop_assert_eq!(apply_edit(&x, &e).unwrap(), y.clone());
                let (bx, by) = brute_force(&x, &y).unwrap();
                prop_assert_eq!((e.x_span, e.y_span), (bx, by));
                let al = build_alignment(&x, &y, &e).unwrap();
                let inv = al.inverse();
                for &(a, b) in &al.pairs {
                    prop_assert_eq!(inv.y_of(b), Some(a));
                }
                prop_assert!(al.pairs.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
            }
        }
    }
}
