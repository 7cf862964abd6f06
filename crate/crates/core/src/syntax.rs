//! Dependency-parse ingestion and the first/second-order neighborhood
//! features around the correction.

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::ops::Index;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::align::{build_alignment, project_vector, Span, SpanEdit};
use crate::corpus::AnnotatedInstance;
use crate::error::{Error, Result};

/// Dependency-order category of a token relative to the correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SyntacticCategory {
    #[default]
    None = 0,
    First = 1,
    Second = 2,
    Correction = 3,
}

impl SyntacticCategory {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SyntacticVector(Vec<SyntacticCategory>);

impl SyntacticVector {
    pub fn new(categories: Vec<SyntacticCategory>) -> Self {
        SyntacticVector(categories)
    }

    pub fn none(len: usize) -> Self {
        SyntacticVector(vec![SyntacticCategory::None; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[SyntacticCategory] {
        &self.0
    }

    pub fn indices_of(&self, cat: SyntacticCategory) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &c)| c == cat).map(|(i, _)| i).collect()
    }
}

impl Index<usize> for SyntacticVector {
    type Output = SyntacticCategory;

    fn index(&self, i: usize) -> &SyntacticCategory {
        &self.0[i]
    }
}

/// A dependency tree over a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyParse {
    heads: Vec<Option<usize>>,
    relations: Vec<String>,
}

impl DependencyParse {
    /// Validates that `heads` (root marked `-1`) forms a single-rooted tree.
    pub fn from_heads(heads: &[i64], relations: Vec<String>) -> Result<Self> {
        let n = heads.len();
        if n == 0 {
            return Err(Error::Contract("empty head array".into()));
        }
        if !relations.is_empty() && relations.len() != n {
            return Err(Error::Contract(format!("{} relations for {n} heads", relations.len())));
        }
        let mut parsed = Vec::with_capacity(n);
        for (i, &h) in heads.iter().enumerate() {
            parsed.push(match h {
                -1 => None,
                h if h >= 0 && (h as usize) < n && h as usize != i => Some(h as usize),
                h => return Err(Error::Contract(format!("token {i} has invalid head {h}"))),
            });
        }
        let roots = parsed.iter().filter(|h| h.is_none()).count();
        if roots != 1 {
            return Err(Error::Contract(format!("expected exactly one root, found {roots}")));
        }
        // Every token must reach the root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(h) = parsed[cur] {
                cur = h;
                steps += 1;
                if steps > n {
                    return Err(Error::Contract(format!("head array contains a cycle through token {start}")));
                }
            }
        }
        Ok(DependencyParse { heads: parsed, relations })
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn head(&self, i: usize) -> Option<usize> {
        self.heads[i]
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    /// Heads in interchange form, root as `-1`.
    pub fn heads_signed(&self) -> Vec<i64> {
        self.heads.iter().map(|h| h.map_or(-1, |h| h as i64)).collect()
    }

    /// Undirected adjacency lists (head plus children).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for (i, h) in self.heads.iter().enumerate() {
            if let Some(h) = *h {
                adj[i].push(h);
                adj[h].push(i);
            }
        }
        adj
    }

    /// Multi-source undirected BFS distances, capped at `max_depth`.
    fn distances_from(&self, sources: &[usize], max_depth: usize) -> Vec<Option<usize>> {
        let adj = self.neighbors();
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            if d == max_depth {
                continue;
            }
            for &v in &adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Parse fixture line: `{"id": str, "heads": [int], "rels": [str]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseRecord {
    pub id: String,
    pub heads: Vec<i64>,
    #[serde(default)]
    pub rels: Vec<String>,
}

impl ParseRecord {
    pub fn to_parse(&self) -> Result<DependencyParse> {
        DependencyParse::from_heads(&self.heads, self.rels.clone())
    }

    pub fn from_parse(id: impl Into<String>, parse: &DependencyParse) -> Self {
        ParseRecord { id: id.into(), heads: parse.heads_signed(), rels: parse.relations.clone() }
    }
}

pub fn read_parse_records(path: &Path) -> Result<Vec<ParseRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_parse_records<W: Write>(mut w: W, records: &[ParseRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// A dependency parser for corrected sentences. Implementations must keep
/// the given tokenization.
pub trait ParserBackend: Send + Sync {
    fn parse(&self, id: &str, tokens: &[String]) -> Result<DependencyParse>;
}

/// Checks a backend result against the input it was asked to parse.
fn checked(parse: DependencyParse, tokens: &[String]) -> Result<DependencyParse> {
    if parse.len() != tokens.len() {
        return Err(Error::Contract(format!(
            "parser returned {} heads for {} tokens",
            parse.len(),
            tokens.len()
        )));
    }
    Ok(parse)
}

/// Serves stored trees keyed by instance id.
#[derive(Debug, Clone, Default)]
pub struct FixtureBackend {
    records: HashMap<String, ParseRecord>,
}

impl FixtureBackend {
    pub fn new(records: impl IntoIterator<Item = ParseRecord>) -> Self {
        FixtureBackend { records: records.into_iter().map(|r| (r.id.clone(), r)).collect() }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(read_parse_records(path)?))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ParserBackend for FixtureBackend {
    fn parse(&self, id: &str, tokens: &[String]) -> Result<DependencyParse> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence"));
        }
        let rec = self.records.get(id).ok_or_else(|| Error::MissingParse(id.to_string()))?;
        checked(rec.to_parse()?, tokens)
    }
}

/// Runs an external parser process per sentence. The process receives one
/// JSON line `{"id", "tokens"}` on stdin and must answer with one
/// [`ParseRecord`] line on stdout.
#[derive(Debug, Clone)]
pub struct CommandBackend {
    program: PathBuf,
    args: Vec<String>,
}

impl CommandBackend {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        CommandBackend { program: program.into(), args }
    }
}

impl ParserBackend for CommandBackend {
    fn parse(&self, id: &str, tokens: &[String]) -> Result<DependencyParse> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence"));
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start {}: {e}", self.program.display())))?;
        let request = serde_json::json!({ "id": id, "tokens": tokens });
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            writeln!(stdin, "{request}").map_err(|e| Error::Backend(e.to_string()))?;
        }
        let output = child.wait_with_output().map_err(|e| Error::Backend(e.to_string()))?;
        if !output.status.success() {
            return Err(Error::Backend(format!(
                "parser exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let line = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| Error::Backend("empty parser output".into()))?;
        let rec: ParseRecord = serde_json::from_str(line).map_err(|e| Error::Backend(format!("bad parser output: {e}")))?;
        checked(rec.to_parse()?, tokens)
    }
}

/// Parses a corrected sentence through `backend`.
pub fn parse(backend: &dyn ParserBackend, id: &str, y_tokens: &[String]) -> Result<DependencyParse> {
    backend.parse(id, y_tokens)
}

fn categories_from_distances(dist: &[Option<usize>], offset: usize) -> Vec<SyntacticCategory> {
    dist.iter()
        .map(|d| match d.map(|d| d + offset) {
            Some(1) => SyntacticCategory::First,
            Some(2) => SyntacticCategory::Second,
            _ => SyntacticCategory::None,
        })
        .collect()
}

/// Marks tree neighbors of the span at undirected distance 1 and 2. Span
/// tokens themselves are `Correction`.
pub fn neighborhood_orders(parse: &DependencyParse, span: Span) -> Result<SyntacticVector> {
    if span.is_empty() {
        return Err(Error::EmptySpan);
    }
    if span.end > parse.len() {
        return Err(Error::Dimension { what: "span end", expected: parse.len(), got: span.end });
    }
    let sources: Vec<usize> = span.iter().collect();
    let dist = parse.distances_from(&sources, 2);
    let mut cats = categories_from_distances(&dist, 0);
    for i in span.iter() {
        cats[i] = SyntacticCategory::Correction;
    }
    Ok(SyntacticVector(cats))
}

/// Y-side vector for an edit. A pure deletion has no Y tokens to start
/// from, so the tokens flanking the deletion site count as its first-order
/// neighbors and distances grow from there.
pub fn y_syntax_vector(parse: &DependencyParse, edit: &SpanEdit) -> Result<SyntacticVector> {
    if !edit.y_span.is_empty() {
        return neighborhood_orders(parse, edit.y_span);
    }
    let anchors = edit.y_anchor_rows(parse.len());
    if anchors.is_empty() {
        return Err(Error::EmptySpan);
    }
    let dist = parse.distances_from(&anchors, 1);
    Ok(SyntacticVector(categories_from_distances(&dist, 1)))
}

/// Feature pair `(d_x, d_y)` for an instance given the parse of its
/// corrected sentence.
pub fn syntax_vectors(
    x: &[String],
    y: &[String],
    edit: &SpanEdit,
    parse: &DependencyParse,
) -> Result<(SyntacticVector, SyntacticVector)> {
    if parse.len() != y.len() {
        return Err(Error::Dimension { what: "parse length", expected: y.len(), got: parse.len() });
    }
    let d_y = y_syntax_vector(parse, edit)?;
    let alignment = build_alignment(x, y, edit)?;
    let d_x = project_vector(&d_y, &alignment)?;
    Ok((d_x, d_y))
}

/// `|Y| x |X|` grid of categories. Y-edit rows carry `d_x`; X-edit
/// columns carry `d_y`; their crossings are `Correction`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntacticMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<SyntacticCategory>,
}

impl SyntacticMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> SyntacticCategory {
        self.cells[i * self.cols + j]
    }

    /// Row-major cells.
    pub fn cells(&self) -> &[SyntacticCategory] {
        &self.cells
    }

    pub fn nonzero(&self) -> usize {
        self.cells.iter().filter(|&&c| c != SyntacticCategory::None).count()
    }
}

pub fn build_syntactic_matrix(d_x: &SyntacticVector, d_y: &SyntacticVector, edit: &SpanEdit) -> Result<SyntacticMatrix> {
    let (rows, cols) = (d_y.len(), d_x.len());
    if edit.x_span.end > cols {
        return Err(Error::Dimension { what: "X syntactic vector", expected: edit.x_span.end, got: cols });
    }
    if edit.y_span.end > rows {
        return Err(Error::Dimension { what: "Y syntactic vector", expected: edit.y_span.end, got: rows });
    }
    let mut cells = vec![SyntacticCategory::None; rows * cols];
    for i in edit.y_span.iter() {
        cells[i * cols..(i + 1) * cols].copy_from_slice(d_x.as_slice());
    }
    for j in edit.x_span.iter() {
        for i in 0..rows {
            cells[i * cols + j] = if edit.y_span.contains(i) { SyntacticCategory::Correction } else { d_y[i] };
        }
    }
    Ok(SyntacticMatrix { rows, cols, cells })
}

/// Share of instances whose evidence falls in the correction's first- and
/// second-order dependency neighborhoods (evaluated on the X side after
/// projection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub instances: usize,
    pub exist_in_first: usize,
    pub exist_in_second: usize,
    pub all_in_first: usize,
    pub all_in_second: usize,
    pub exist_in_first_pct: f64,
    pub exist_in_second_pct: f64,
    pub all_in_first_pct: f64,
    pub all_in_second_pct: f64,
}

pub fn order_coverage_stats(
    instances: &[AnnotatedInstance],
    parses: &HashMap<String, DependencyParse>,
) -> Result<CoverageReport> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let (mut e1, mut e2, mut a1, mut a2) = (0, 0, 0, 0);
    for inst in instances {
        let parse = parses.get(&inst.id).ok_or_else(|| Error::MissingParse(inst.id.clone()))?;
        if inst.evidence.is_empty() {
            continue;
        }
        let (d_x, _) = syntax_vectors(&inst.x_tokens, &inst.y_tokens, &inst.edit, parse)?;
        let first = |i: &usize| d_x[*i] == SyntacticCategory::First;
        let within_second = |i: &usize| matches!(d_x[*i], SyntacticCategory::First | SyntacticCategory::Second);
        e1 += inst.evidence.iter().any(first) as usize;
        e2 += inst.evidence.iter().any(within_second) as usize;
        a1 += inst.evidence.iter().all(first) as usize;
        a2 += inst.evidence.iter().all(within_second) as usize;
    }
    let n = instances.len();
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(CoverageReport {
        instances: n,
        exist_in_first: e1,
        exist_in_second: e2,
        all_in_first: a1,
        all_in_second: a2,
        exist_in_first_pct: pct(e1),
        exist_in_second_pct: pct(e2),
        all_in_first_pct: pct(a1),
        all_in_second_pct: pct(a2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::extract_span_edit;
    use SyntacticCategory::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    /// "Evidence words are important for learners" with the copula
    /// attached to the predicate adjective.
    pub(crate) fn figure_tree() -> (Vec<String>, DependencyParse) {
        let y = toks("Evidence words are important for learners");
        let parse = DependencyParse::from_heads(&[1, 3, 3, -1, 3, 4], vec![]).unwrap();
        (y, parse)
    }

    #[test]
    fn figure_example_orders() {
        let (y, parse) = figure_tree();
        let v = neighborhood_orders(&parse, Span::new(2, 3)).unwrap();
        let words = |cat| v.indices_of(cat).into_iter().map(|i| y[i].as_str()).collect::<Vec<_>>();
        assert_eq!(words(First), vec!["important"]);
        assert_eq!(words(Second), vec!["words", "for"]);
        assert_eq!(words(Correction), vec!["are"]);
    }

    #[test]
    fn figure_example_projects_to_source() {
        let (y, parse) = figure_tree();
        let x = toks("Evidence words is important for learners");
        let edit = extract_span_edit(&x, &y).unwrap();
        let (d_x, d_y) = syntax_vectors(&x, &y, &edit, &parse).unwrap();
        for w in ["important", "words", "for"] {
            let jx = x.iter().position(|t| t == w).unwrap();
            let jy = y.iter().position(|t| t == w).unwrap();
            assert_eq!(d_x[jx], d_y[jy]);
        }
        assert_eq!(d_x[2], Correction);
    }

    #[test]
    fn chain_orders() {
        // a <- b <- c <- d : heads point down the chain toward d
        let parse = DependencyParse::from_heads(&[1, 2, 3, -1], vec![]).unwrap();
        let v = neighborhood_orders(&parse, Span::new(0, 1)).unwrap();
        assert_eq!(v.as_slice(), &[Correction, First, Second, None]);
    }

    #[test]
    fn single_token() {
        let parse = DependencyParse::from_heads(&[-1], vec![]).unwrap();
        assert_eq!(parse.heads_signed(), vec![-1]);
        assert_eq!(neighborhood_orders(&parse, Span::new(0, 1)).unwrap().as_slice(), &[Correction]);
        assert!(matches!(neighborhood_orders(&parse, Span::new(0, 0)), Err(Error::EmptySpan)));
    }

    #[test]
    fn invalid_trees_are_contract_errors() {
        assert!(matches!(DependencyParse::from_heads(&[1, 2, 0], vec![]), Err(Error::Contract(_))));
        assert!(matches!(DependencyParse::from_heads(&[-1, 2, 1], vec![]), Err(Error::Contract(_))));
        assert!(matches!(DependencyParse::from_heads(&[-1, -1], vec![]), Err(Error::Contract(_))));
        assert!(matches!(DependencyParse::from_heads(&[-1, 5], vec![]), Err(Error::Contract(_))));
    }

    #[test]
    fn fixture_backend_round_trip_and_mismatch() {
        let (y, parse) = figure_tree();
        let backend = FixtureBackend::new([ParseRecord::from_parse("fig", &parse)]);
        assert_eq!(super::parse(&backend, "fig", &y).unwrap(), parse);
        assert!(matches!(backend.parse("fig", &y[..3]), Err(Error::Contract(_))));
        assert!(matches!(backend.parse("nope", &y), Err(Error::MissingParse(_))));
        let cyclic = FixtureBackend::new([ParseRecord { id: "c".into(), heads: vec![1, 0], rels: vec![] }]);
        assert!(matches!(cyclic.parse("c", &toks("a b")), Err(Error::Contract(_))));
    }

    #[test]
    fn command_backend_unavailable() {
        let backend = CommandBackend::new("/nonexistent/parser-binary", vec![]);
        assert!(matches!(backend.parse("a", &toks("a b")), Err(Error::Backend(_))));
    }

    #[test]
    fn command_backend_speaks_jsonl() {
        // A right-branching "parser": every token hangs off its successor.
        let script = r#"read line; n=$(printf '%s' "$line" | grep -o '"tokens":\[.*\]' | tr -cd ',' | wc -c); n=$((n+1)); heads=""; i=1; while [ $i -lt $n ]; do heads="$heads$i,"; i=$((i+1)); done; printf '{"id":"x","heads":[%s-1]}\n' "$heads""#;
        let backend = CommandBackend::new("sh", vec!["-c".into(), script.into()]);
        let p = backend.parse("x", &toks("a b c")).unwrap();
        assert_eq!(p.heads_signed(), vec![1, 2, -1]);
    }

    #[test]
    fn deletion_vector_uses_flanking_tokens() {
        let x = toks("I can to go home");
        let y = toks("I can go home");
        let parse = DependencyParse::from_heads(&[2, 2, -1, 2], vec![]).unwrap();
        let edit = extract_span_edit(&x, &y).unwrap();
        let (d_x, d_y) = syntax_vectors(&x, &y, &edit, &parse).unwrap();
        assert_eq!(d_y.as_slice(), &[Second, First, First, Second]);
        assert_eq!(d_x.as_slice(), &[Second, First, Correction, First, Second]);
    }

    #[test]
    fn matrix_layout() {
        let (y, parse) = figure_tree();
        let x = toks("Evidence words is important for learners");
        let edit = extract_span_edit(&x, &y).unwrap();
        let (d_x, d_y) = syntax_vectors(&x, &y, &edit, &parse).unwrap();
        let m = build_syntactic_matrix(&d_x, &d_y, &edit).unwrap();
        for j in 0..x.len() {
            let expected = if j == 2 { Correction } else { d_x[j] };
            assert_eq!(m.get(2, j), expected);
        }
        for i in 0..y.len() {
            let expected = if i == 2 { Correction } else { d_y[i] };
            assert_eq!(m.get(i, 2), expected);
        }
        for i in 0..y.len() {
            for j in 0..x.len() {
                if i != 2 && j != 2 {
                    assert_eq!(m.get(i, j), None);
                }
            }
        }
    }

    #[test]
    fn matrix_nonzero_count_by_enumeration() {
        // Every cell on an edit row or column carries a non-None category
        // when both vectors are fully non-None.
        let x = toks("a b c d e");
        let y = toks("a X Y d e");
        let edit = extract_span_edit(&x, &y).unwrap();
        let d_x = SyntacticVector::new(vec![First, Correction, Correction, Second, First]);
        let d_y = SyntacticVector::new(vec![Second, Correction, Correction, First, First]);
        let m = build_syntactic_matrix(&d_x, &d_y, &edit).unwrap();
        let mut expected = 0;
        for i in 0..y.len() {
            for j in 0..x.len() {
                if edit.y_span.contains(i) || edit.x_span.contains(j) {
                    expected += 1;
                }
            }
        }
        let (ys, xs) = (edit.y_span.len(), edit.x_span.len());
        assert_eq!(expected, ys * x.len() + xs * y.len() - xs * ys);
        assert_eq!(m.nonzero(), expected);
        assert!(build_syntactic_matrix(&SyntacticVector::none(1), &d_y, &edit).is_err());
    }

    #[test]
    fn coverage_buckets() {
        let (y, parse) = figure_tree();
        let x = toks("Evidence words is important for learners");
        let edit = extract_span_edit(&x, &y).unwrap();
        let mk = |id: &str, evidence: Vec<usize>| AnnotatedInstance {
            id: id.into(),
            x_tokens: x.clone(),
            y_tokens: y.clone(),
            edit: edit.clone(),
            error_type: crate::corpus::ErrorType::SubjectVerbAgreement,
            evidence,
            meta: Default::default(),
        };
        let parses: HashMap<_, _> = ["first", "far"].iter().map(|id| (id.to_string(), parse.clone())).collect();
        // exactly the first-order set
        let r = order_coverage_stats(&[mk("first", vec![3])], &parses).unwrap();
        assert_eq!((r.exist_in_first, r.exist_in_second, r.all_in_first, r.all_in_second), (1, 1, 1, 1));
        // "learners" sits at distance 3
        let r = order_coverage_stats(&[mk("far", vec![5])], &parses).unwrap();
        assert_eq!((r.exist_in_first, r.exist_in_second, r.all_in_first, r.all_in_second), (0, 0, 0, 0));
        assert!(matches!(order_coverage_stats(&[mk("missing", vec![1])], &parses), Err(Error::MissingParse(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random tree: each node i > 0 attaches to a random earlier node,
        /// then node labels are shuffled through a permutation.
        fn tree() -> impl Strategy<Value = Vec<i64>> {
            (2usize..=60)
                .prop_flat_map(|n| {
                    (
                        prop::collection::vec(any::<prop::sample::Index>(), n),
                        Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                    )
                })
                .prop_map(|(picks, perm)| {
                    let n = perm.len();
                    let mut heads = vec![-1i64; n];
                    for i in 1..n {
                        let parent = picks[i].index(i);
                        heads[perm[i]] = perm[parent] as i64;
                    }
                    heads
                })
        }

        /// Floyd-Warshall distances; independent of the BFS in the
        /// implementation.
        fn all_pairs(heads: &[i64]) -> Vec<Vec<usize>> {
            let n = heads.len();
            let inf = usize::MAX / 4;
            let mut d = vec![vec![inf; n]; n];
            for i in 0..n {
                d[i][i] = 0;
                if heads[i] >= 0 {
                    let h = heads[i] as usize;
                    d[i][h] = 1;
                    d[h][i] = 1;
                }
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if d[i][k] + d[k][j] < d[i][j] {
                            d[i][j] = d[i][k] + d[k][j];
                        }
                    }
                }
            }
            d
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]
            #[test]
            fn orders_match_distance_oracle(heads in tree(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
                let n = heads.len();
                let parse = DependencyParse::from_heads(&heads, vec![]).unwrap();
                let (s, e) = { let (p, q) = (a.index(n), b.index(n)); (p.min(q), p.max(q) + 1) };
                let v = neighborhood_orders(&parse, Span::new(s, e)).unwrap();
                let d = all_pairs(&heads);
                for t in 0..n {
                    let dist = (s..e).map(|u| d[u][t]).min().unwrap();
                    let expected = match dist { 0 => Correction, 1 => First, 2 => Second, _ => None };
                    prop_assert_eq!(v[t], expected);
                }
            }
        }
    }
}
