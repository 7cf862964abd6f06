//! Annotated instances, the error-type taxonomy, the JSONL interchange
//! format, and corpus statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::{Span, SpanEdit};
use crate::error::{Error, RecordIssue, Result};

/// Grammatical error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorType {
    Infinitives,
    Gerund,
    Participle,
    SubjectVerbAgreement,
    AuxiliaryVerb,
    VerbTense,
    PronounAntecedentAgreement,
    Possessive,
    Collocation,
    Preposition,
    PosConfusion,
    Article,
    Number,
    TransitiveVerb,
    Others,
}

impl ErrorType {
    pub const ALL: [ErrorType; 15] = [
        ErrorType::Infinitives,
        ErrorType::Gerund,
        ErrorType::Participle,
        ErrorType::SubjectVerbAgreement,
        ErrorType::AuxiliaryVerb,
        ErrorType::VerbTense,
        ErrorType::PronounAntecedentAgreement,
        ErrorType::Possessive,
        ErrorType::Collocation,
        ErrorType::Preposition,
        ErrorType::PosConfusion,
        ErrorType::Article,
        ErrorType::Number,
        ErrorType::TransitiveVerb,
        ErrorType::Others,
    ];

    /// The 14 categories that carry evidence words.
    pub const EVIDENCE_BEARING: [ErrorType; 14] = [
        ErrorType::Infinitives,
        ErrorType::Gerund,
        ErrorType::Participle,
        ErrorType::SubjectVerbAgreement,
        ErrorType::AuxiliaryVerb,
        ErrorType::VerbTense,
        ErrorType::PronounAntecedentAgreement,
        ErrorType::Possessive,
        ErrorType::Collocation,
        ErrorType::Preposition,
        ErrorType::PosConfusion,
        ErrorType::Article,
        ErrorType::Number,
        ErrorType::TransitiveVerb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ErrorType> {
        Self::ALL.get(i).copied()
    }

    /// Position among [`Self::EVIDENCE_BEARING`]; `None` for `Others`.
    pub fn evidence_index(self) -> Option<usize> {
        (self != ErrorType::Others).then_some(self as usize)
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::Infinitives => "infinitives",
            ErrorType::Gerund => "gerund",
            ErrorType::Participle => "participle",
            ErrorType::SubjectVerbAgreement => "subject-verb-agreement",
            ErrorType::AuxiliaryVerb => "auxiliary-verb",
            ErrorType::VerbTense => "verb-tense",
            ErrorType::PronounAntecedentAgreement => "pronoun-antecedent-agreement",
            ErrorType::Possessive => "possessive",
            ErrorType::Collocation => "collocation",
            ErrorType::Preposition => "preposition",
            ErrorType::PosConfusion => "pos-confusion",
            ErrorType::Article => "article",
            ErrorType::Number => "number",
            ErrorType::TransitiveVerb => "transitive-verb",
            ErrorType::Others => "others",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let alias = match lower.as_str() {
            "sva" => Some(ErrorType::SubjectVerbAgreement),
            "paa" => Some(ErrorType::PronounAntecedentAgreement),
            "pos" => Some(ErrorType::PosConfusion),
            "transition" | "transitive" => Some(ErrorType::TransitiveVerb),
            "participles" => Some(ErrorType::Participle),
            "infinitive" => Some(ErrorType::Infinitives),
            _ => None,
        };
        alias
            .or_else(|| ErrorType::ALL.iter().copied().find(|t| t.name() == lower))
            .ok_or_else(|| Error::Config(format!("unknown error type {s:?}")))
    }
}

/// One erroneous/corrected sentence pair with its gold explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedInstance {
    pub id: String,
    pub x_tokens: Vec<String>,
    pub y_tokens: Vec<String>,
    pub edit: SpanEdit,
    pub error_type: ErrorType,
    /// Sorted, deduplicated indices into `x_tokens`.
    pub evidence: Vec<usize>,
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl AnnotatedInstance {
    pub fn has_evidence(&self) -> bool {
        !self.evidence.is_empty()
    }

    /// Checks the instance invariants. Returns (field, message) for the
    /// first violation.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.x_tokens.is_empty() {
            return Err(("source", "empty token list".into()));
        }
        if self.y_tokens.is_empty() {
            return Err(("target", "empty token list".into()));
        }
        if !self.edit.reproduces(&self.x_tokens, &self.y_tokens) {
            return Err(("edit", "applying the edit to source does not reproduce target".into()));
        }
        if self.edit.s_x.is_empty() && self.edit.s_y.is_empty() {
            return Err(("edit", "both sides of the edit are empty".into()));
        }
        if let Some(&bad) = self.evidence.iter().find(|&&i| i >= self.x_tokens.len()) {
            return Err(("evidence", format!("index {bad} out of range for {} source tokens", self.x_tokens.len())));
        }
        if self.evidence.windows(2).any(|w| w[0] >= w[1]) {
            return Err(("evidence", "indices must be strictly increasing".into()));
        }
        if self.error_type == ErrorType::Others && !self.evidence.is_empty() {
            return Err(("evidence", "instances of type \"others\" carry no evidence".into()));
        }
        Ok(())
    }

    /// Evidence indices that fall inside the edit span.
    pub fn evidence_in_edit(&self) -> Vec<usize> {
        self.evidence.iter().copied().filter(|&i| self.edit.x_span.contains(i)).collect()
    }
}

/// Interchange format version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemaVersion {
    #[default]
    V1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub src: [usize; 2],
    pub tgt: [usize; 2],
}

/// JSONL line layout. Field order here is the canonical output order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub edit: EditRecord,
    #[serde(rename = "type")]
    pub error_type: String,
    #[serde(default)]
    pub evidence: Vec<usize>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl From<&AnnotatedInstance> for InstanceRecord {
    fn from(inst: &AnnotatedInstance) -> Self {
        InstanceRecord {
            id: inst.id.clone(),
            source: inst.x_tokens.clone(),
            target: inst.y_tokens.clone(),
            edit: EditRecord {
                src: [inst.edit.x_span.start, inst.edit.x_span.end],
                tgt: [inst.edit.y_span.start, inst.edit.y_span.end],
            },
            error_type: inst.error_type.name().to_string(),
            evidence: inst.evidence.clone(),
            meta: inst.meta.clone(),
        }
    }
}

impl InstanceRecord {
    pub fn into_instance(self) -> std::result::Result<AnnotatedInstance, (&'static str, String)> {
        let error_type = self.error_type.parse::<ErrorType>().map_err(|e| ("type", e.to_string()))?;
        let [xs, xe] = self.edit.src;
        let [ys, ye] = self.edit.tgt;
        if xs > xe || ys > ye {
            return Err(("edit", "span start exceeds end".into()));
        }
        let edit = SpanEdit::from_spans(&self.source, &self.target, Span::new(xs, xe), Span::new(ys, ye))
            .map_err(|e| ("edit", e.to_string()))?;
        let inst = AnnotatedInstance {
            id: self.id,
            x_tokens: self.source,
            y_tokens: self.target,
            edit,
            error_type,
            evidence: self.evidence,
            meta: self.meta,
        };
        inst.check()?;
        Ok(inst)
    }
}

/// Non-fatal observations made while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadWarning {
    pub line: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOutcome {
    pub instances: Vec<AnnotatedInstance>,
    pub warnings: Vec<LoadWarning>,
}

/// Reads and validates a JSONL corpus. Malformed JSON aborts with a
/// positioned parse error; invariant violations are collected across the
/// whole file and reported together.
pub fn read_corpus<R: BufRead>(reader: R, _schema: SchemaVersion) -> Result<LoadOutcome> {
    let mut outcome = LoadOutcome::default();
    let mut issues = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: InstanceRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            column: e.column(),
            message: e.to_string(),
        })?;
        let id = record.id.clone();
        if !seen.insert(id.clone()) {
            issues.push(RecordIssue { line: line_no, id: Some(id), field: "id", message: "duplicate id".into() });
            continue;
        }
        match record.into_instance() {
            Ok(inst) => {
                let overlap = inst.evidence_in_edit();
                if !overlap.is_empty() {
                    let message = format!("evidence {overlap:?} overlaps the edit span {}", inst.edit.x_span);
                    log::warn!("line {line_no} ({}): {message}", inst.id);
                    outcome.warnings.push(LoadWarning { line: line_no, id: inst.id.clone(), message });
                }
                outcome.instances.push(inst);
            }
            Err((field, message)) => issues.push(RecordIssue { line: line_no, id: Some(id), field, message }),
        }
    }
    if issues.is_empty() {
        Ok(outcome)
    } else {
        Err(Error::Validation(issues))
    }
}

pub fn load_corpus_with_warnings(path: &Path, schema: SchemaVersion) -> Result<LoadOutcome> {
    let file = std::fs::File::open(path)?;
    read_corpus(BufReader::new(file), schema)
}

/// Loads a JSONL corpus, rejecting it if any record is invalid.
pub fn load_corpus(path: &Path, schema: SchemaVersion) -> Result<Vec<AnnotatedInstance>> {
    load_corpus_with_warnings(path, schema).map(|o| o.instances)
}

/// Serializes one instance in canonical form (no trailing newline).
pub fn to_json_line(inst: &AnnotatedInstance) -> String {
    serde_json::to_string(&InstanceRecord::from(inst)).expect("instance records always serialize")
}

pub fn write_corpus<W: Write>(mut w: W, instances: &[AnnotatedInstance]) -> Result<()> {
    for inst in instances {
        writeln!(w, "{}", to_json_line(inst))?;
    }
    Ok(())
}

pub fn save_corpus(path: &Path, instances: &[AnnotatedInstance]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_corpus(&mut w, instances)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sentences: usize,
    /// Source-side token count.
    pub n_words: usize,
    pub avg_wps: f64,
    pub with_evidence_rate: f64,
    pub total_evidence_words: usize,
    /// Averaged over instances that have evidence.
    pub avg_evidence_wps: f64,
}

pub fn corpus_stats(instances: &[AnnotatedInstance]) -> Result<CorpusStats> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let n_sentences = instances.len();
    let n_words: usize = instances.iter().map(|i| i.x_tokens.len()).sum();
    let with_evidence = instances.iter().filter(|i| i.has_evidence()).count();
    let total_evidence_words: usize = instances.iter().map(|i| i.evidence.len()).sum();
    Ok(CorpusStats {
        n_sentences,
        n_words,
        avg_wps: n_words as f64 / n_sentences as f64,
        with_evidence_rate: 100.0 * with_evidence as f64 / n_sentences as f64,
        total_evidence_words,
        avg_evidence_wps: if with_evidence == 0 { 0.0 } else { total_evidence_words as f64 / with_evidence as f64 },
    })
}

/// Percentage of instances per error type. Every type is present in the
/// map, with 0 for unseen ones.
pub fn type_histogram(instances: &[AnnotatedInstance]) -> Result<BTreeMap<ErrorType, f64>> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("corpus"));
    }
    let mut counts = [0usize; 15];
    for inst in instances {
        counts[inst.error_type.index()] += 1;
    }
    let total = instances.len() as f64;
    Ok(ErrorType::ALL.iter().map(|&t| (t, 100.0 * counts[t.index()] as f64 / total)).collect())
}
