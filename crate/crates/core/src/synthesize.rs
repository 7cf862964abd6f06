//! Rule-based synthetic corpus.
//!
//! Every rule builds a grammatical sentence Y from small closed word lists,
//! together with its dependency tree, then corrupts one span to get X. The
//! evidence positions are known by construction.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::extract_span_edit;
use crate::corpus::{AnnotatedInstance, ErrorType};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::syntax::{DependencyParse, ParseRecord};

/// Types the generator has rules for.
pub const SUPPORTED: [ErrorType; 8] = [
    ErrorType::SubjectVerbAgreement,
    ErrorType::Number,
    ErrorType::Preposition,
    ErrorType::Gerund,
    ErrorType::Infinitives,
    ErrorType::Article,
    ErrorType::VerbTense,
    ErrorType::Others,
];

/// Sampling weights over error types, e.g. `sva:0.3,number:0.2,others:0.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mix {
    weights: Vec<(ErrorType, f64)>,
}

impl Mix {
    pub fn new(weights: Vec<(ErrorType, f64)>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("empty type mix".into()));
        }
        let mut seen = BTreeMap::new();
        for &(t, w) in &weights {
            if !SUPPORTED.contains(&t) {
                return Err(Error::Config(format!("no synthesis rule for type {t}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("bad weight {w} for {t}")));
            }
            if seen.insert(t, w).is_some() {
                return Err(Error::Config(format!("type {t} listed twice in mix")));
            }
        }
        if weights.iter().map(|w| w.1).sum::<f64>() <= 0.0 {
            return Err(Error::Config("type mix has zero total weight".into()));
        }
        Ok(Mix { weights })
    }

    pub fn only(t: ErrorType) -> Result<Self> {
        Mix::new(vec![(t, 1.0)])
    }

    pub fn weights(&self) -> &[(ErrorType, f64)] {
        &self.weights
    }
}

impl Default for Mix {
    /// SVA, number, gerund, preposition and others.
    fn default() -> Self {
        Mix {
            weights: vec![
                (ErrorType::SubjectVerbAgreement, 0.3),
                (ErrorType::Number, 0.2),
                (ErrorType::Gerund, 0.2),
                (ErrorType::Preposition, 0.2),
                (ErrorType::Others, 0.1),
            ],
        }
    }
}

impl FromStr for Mix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut weights = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, w) = match part.split_once(':') {
                Some((n, w)) => {
                    let w = w.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad weight in {part:?}")))?;
                    (n, w)
                }
                None => (part, 1.0),
            };
            weights.push((name.parse::<ErrorType>()?, w));
        }
        Mix::new(weights)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (t, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}:{w}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub instances: Vec<AnnotatedInstance>,
    /// Gold trees of the corrected sentences, keyed by instance id.
    pub parses: Vec<ParseRecord>,
}

pub fn generate(n: usize, seed: u64, mix: &Mix) -> Result<SyntheticCorpus> {
    generate_with(n, seed, mix, Parallelism::default())
}

/// Instance `i` draws from its own ChaCha stream, so the corpus does not
/// depend on the execution strategy.
pub fn generate_with(n: usize, seed: u64, mix: &Mix, mode: Parallelism) -> Result<SyntheticCorpus> {
    if n == 0 {
        return Err(Error::EmptyInput("synthesis size"));
    }
    let dist = WeightedIndex::new(mix.weights.iter().map(|w| w.1)).map_err(|e| Error::Config(e.to_string()))?;
    let made = par::map_range(n, mode, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let t = mix.weights[dist.sample(&mut rng)].0;
        build(format!("syn-{seed}-{i:06}"), t, &mut rng)
    });
    let mut instances = Vec::with_capacity(n);
    let mut parses = Vec::with_capacity(n);
    for r in made {
        let (inst, parse) = r?;
        instances.push(inst);
        parses.push(parse);
    }
    Ok(SyntheticCorpus { instances, parses })
}

/// Parses as a lookup table for feature extraction.
pub fn parse_map(parses: &[ParseRecord]) -> Result<std::collections::HashMap<String, DependencyParse>> {
    parses.iter().map(|r| Ok((r.id.clone(), r.to_parse()?))).collect()
}

/// A corrected sentence with its tree and one designated corruption.
#[derive(Debug, Default)]
struct Draft {
    toks: Vec<String>,
    /// -1 = root, -2 = not yet attached.
    heads: Vec<i64>,
    /// `[start, end)` in Y replaced by `replacement` to form X.
    site: (usize, usize),
    replacement: Vec<String>,
    /// Evidence positions in Y, outside the site.
    evidence: Vec<usize>,
    rule: &'static str,
}

impl Draft {
    fn w(&mut self, s: &str) -> usize {
        self.toks.push(s.to_string());
        self.heads.push(-2);
        self.toks.len() - 1
    }

    fn att(&mut self, dep: usize, head: usize) {
        self.heads[dep] = head as i64;
    }

    fn root(&mut self, i: usize) {
        self.heads[i] = -1;
    }

    /// Attaches every still-unattached token to `root`.
    fn attach_rest(&mut self, root: usize) {
        for h in &mut self.heads {
            if *h == -2 {
                *h = root as i64;
            }
        }
    }
}

fn pick<'a, T, R: Rng>(rng: &mut R, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty word list")
}

fn cap(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Optional sentence adverbial; its tokens are attached to the root later.
fn prefix<R: Rng>(d: &mut Draft, rng: &mut R) {
    match rng.gen_range(0..4) {
        0 => {
            d.w("However");
            d.w(",");
        }
        1 => {
            let i = d.w("In");
            let f = d.w("fact");
            d.att(f, i);
            d.w(",");
        }
        _ => {}
    }
}

// singular, plural
const NOUNS: [(&str, &str); 10] = [
    ("dog", "dogs"),
    ("cat", "cats"),
    ("child", "children"),
    ("student", "students"),
    ("teacher", "teachers"),
    ("box", "boxes"),
    ("city", "cities"),
    ("book", "books"),
    ("bird", "birds"),
    ("car", "cars"),
];
const ATTRACTORS: [&str; 6] = ["farmer", "neighbors", "school", "village", "teachers", "house"];
const ADJS: [&str; 8] = ["loud", "happy", "small", "quiet", "tired", "busy", "old", "clean"];
const SUBJECTS: [(&str, bool); 6] = [("I", false), ("we", false), ("they", false), ("you", false), ("she", true), ("he", true)];

/// Determiner for the SVA subject: (word, is quantifier).
#[derive(Debug, Clone, Copy)]
struct Det(&'static str, bool);

const SG_DETS: [Det; 5] = [Det("the", false), Det("this", false), Det("that", false), Det("each", true), Det("every", true)];
const PL_DETS: [Det; 7] =
    [Det("the", false), Det("these", false), Det("those", false), Det("many", true), Det("all", true), Det("some", true), Det("several", true)];

#[derive(Debug, Clone, Copy)]
enum SvaVerb {
    /// present copula + adjective
    Copula(&'static str),
    /// past copula + adjective
    PastCopula(&'static str),
    /// (3sg, base) + adverb
    Lexical(&'static str, &'static str, &'static str),
}

const LEXICAL: [(&str, &str); 5] = [("runs", "run"), ("sleeps", "sleep"), ("works", "work"), ("waits", "wait"), ("sings", "sing")];
const ADVERBS: [&str; 5] = ["quickly", "here", "often", "outside", "later"];

/// Subject-verb agreement. Evidence: the subject head noun and its
/// quantifier, if any. The verb heads the clause so both are within two
/// arcs of the edit.
fn sva_draft(
    det: Det,
    noun: &str,
    plural: bool,
    attractor: Option<&str>,
    verb: SvaVerb,
    d: &mut Draft,
) {
    let det_i = d.w(&if d.toks.is_empty() { cap(det.0) } else { det.0.to_string() });
    let n_i = d.w(noun);
    d.att(det_i, n_i);
    if let Some(a) = attractor {
        let of = d.w("of");
        let the = d.w("the");
        let an = d.w(a);
        d.att(of, n_i);
        d.att(the, an);
        d.att(an, of);
    }
    let (right, wrong, tail) = match verb {
        SvaVerb::Copula(adj) => (if plural { "are" } else { "is" }, if plural { "is" } else { "are" }, adj),
        SvaVerb::PastCopula(adj) => (if plural { "were" } else { "was" }, if plural { "was" } else { "were" }, adj),
        SvaVerb::Lexical(sg, pl, adv) => (if plural { pl } else { sg }, if plural { sg } else { pl }, adv),
    };
    let v = d.w(right);
    let t = d.w(tail);
    d.att(n_i, v);
    d.att(t, v);
    d.root(v);
    d.site = (v, v + 1);
    d.replacement = vec![wrong.to_string()];
    d.evidence = if det.1 { vec![det_i, n_i] } else { vec![n_i] };
    d.rule = "sva";
}

fn sva<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let plural = rng.gen_bool(0.5);
    let det = *pick(rng, if plural { &PL_DETS[..] } else { &SG_DETS[..] });
    let (sg, pl) = *pick(rng, &NOUNS);
    let attractor = rng.gen_bool(0.3).then(|| *pick(rng, &ATTRACTORS));
    let verb = match rng.gen_range(0..3) {
        0 => SvaVerb::Copula(pick(rng, &ADJS)),
        1 => SvaVerb::PastCopula(pick(rng, &ADJS)),
        _ => {
            let (a, b) = *pick(rng, &LEXICAL);
            SvaVerb::Lexical(a, b, pick(rng, &ADVERBS))
        }
    };
    sva_draft(det, if plural { pl } else { sg }, plural, attractor, verb, &mut d);
    let root = d.site.0;
    finish(&mut d, root);
    d
}

fn subject<R: Rng>(d: &mut Draft, rng: &mut R) -> (usize, bool) {
    let (s, third) = *pick(rng, &SUBJECTS);
    let cap_it = d.toks.is_empty();
    let i = d.w(&if cap_it || s == "I" { cap(s) } else { s.to_string() });
    (i, third)
}

fn finish(d: &mut Draft, root: usize) {
    d.w(".");
    d.attach_rest(root);
}

/// Plural noun after a numeral. Evidence: the numeral.
fn number<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let (s, _) = subject(&mut d, rng);
    let v = d.w(pick(rng, &["have", "saw", "bought", "need", "found", "want"]));
    let num = d.w(pick(rng, &["two", "three", "four", "five", "several", "ten"]));
    let adj = rng.gen_bool(0.4).then(|| d.w(pick(rng, &["big", "small", "new", "old", "red"])));
    let (sg, pl) = *pick(rng, &NOUNS);
    let n = d.w(pl);
    d.att(s, v);
    d.root(v);
    d.att(num, n);
    if let Some(a) = adj {
        d.att(a, n);
    }
    d.att(n, v);
    d.site = (n, n + 1);
    d.replacement = vec![sg.to_string()];
    d.evidence = vec![num];
    d.rule = "number";
    finish(&mut d, v);
    d
}

// (3sg, base, preposition)
const PREP_VERBS: [(&str, &str, &str); 8] = [
    ("depends", "depend", "on"),
    ("relies", "rely", "on"),
    ("listens", "listen", "to"),
    ("believes", "believe", "in"),
    ("waits", "wait", "for"),
    ("looks", "look", "at"),
    ("talks", "talk", "about"),
    ("agrees", "agree", "with"),
];
const PREPS: [&str; 8] = ["on", "to", "in", "for", "at", "about", "with", "of"];
const PREP_OBJECTS: [(&str, &str); 6] =
    [("the", "teacher"), ("her", "friends"), ("his", "parents"), ("the", "news"), ("my", "brother"), ("the", "music")];

/// Verb-governed preposition. Evidence: the governing verb.
fn preposition<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let (s, third) = subject(&mut d, rng);
    let (sg, base, p) = *pick(rng, &PREP_VERBS);
    let v = d.w(if third { sg } else { base });
    let pi = d.w(p);
    let (det, obj) = *pick(rng, &PREP_OBJECTS);
    let di = d.w(det);
    let oi = d.w(obj);
    d.att(s, v);
    d.root(v);
    d.att(pi, v);
    d.att(di, oi);
    d.att(oi, pi);
    let wrong: Vec<&str> = PREPS.iter().copied().filter(|q| *q != p).collect();
    d.site = (pi, pi + 1);
    d.replacement = vec![pick(rng, &wrong).to_string()];
    d.evidence = vec![v];
    d.rule = "preposition";
    finish(&mut d, v);
    d
}

const GERUND_VERBS: [(&str, &str); 7] = [
    ("enjoys", "enjoy"),
    ("avoids", "avoid"),
    ("finishes", "finish"),
    ("considers", "consider"),
    ("practices", "practice"),
    ("keeps", "keep"),
    ("minds", "mind"),
];
// (gerund, base, objects)
const ACTIVITIES: [(&str, &str, &[&str]); 7] = [
    ("studying", "study", &["English", "math", "history"]),
    ("reading", "read", &["books", "novels"]),
    ("playing", "play", &["football", "chess"]),
    ("writing", "write", &["letters", "poems"]),
    ("cooking", "cook", &["dinner", "pasta"]),
    ("running", "run", &[]),
    ("swimming", "swim", &[]),
];

/// Verb that takes a gerund complement. Evidence: the governing verb.
fn gerund<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let (s, third) = subject(&mut d, rng);
    let (sg, base) = *pick(rng, &GERUND_VERBS);
    let v = d.w(if third { sg } else { base });
    let (ing, bare, objs) = *pick(rng, &ACTIVITIES);
    let g = d.w(ing);
    if let Some(o) = objs.choose(rng) {
        let oi = d.w(o);
        d.att(oi, g);
    }
    d.att(s, v);
    d.root(v);
    d.att(g, v);
    d.site = (g, g + 1);
    d.replacement = if rng.gen_bool(0.5) { vec![bare.to_string()] } else { vec!["to".to_string(), bare.to_string()] };
    d.evidence = vec![v];
    d.rule = "gerund";
    finish(&mut d, v);
    d
}

const TO_VERBS: [(&str, &str); 6] =
    [("wants", "want"), ("hopes", "hope"), ("plans", "plan"), ("decides", "decide"), ("needs", "need"), ("tries", "try")];
const MODALS: [&str; 5] = ["can", "must", "should", "will", "may"];
const BARE: [(&str, &str); 6] =
    [("go", "home"), ("leave", "early"), ("study", "abroad"), ("sleep", "now"), ("travel", "alone"), ("eat", "outside")];

/// `to` missing after a to-infinitive verb, or inserted after a modal.
/// Evidence: the verb or modal that selects the form.
fn infinitives<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let (s, third) = subject(&mut d, rng);
    let (verb, adv) = *pick(rng, &BARE);
    if rng.gen_bool(0.5) {
        let (sg, base) = *pick(rng, &TO_VERBS);
        let v = d.w(if third { sg } else { base });
        let to = d.w("to");
        let b = d.w(verb);
        let a = d.w(adv);
        d.att(s, v);
        d.root(v);
        d.att(to, b);
        d.att(b, v);
        d.att(a, b);
        d.site = (to, to + 1);
        d.replacement = vec![];
        d.evidence = vec![v];
        finish(&mut d, v);
    } else {
        let m = d.w(pick(rng, &MODALS));
        let b = d.w(verb);
        let a = d.w(adv);
        d.att(s, b);
        d.att(m, b);
        d.root(b);
        d.att(a, b);
        d.site = (b, b);
        d.replacement = vec!["to".to_string()];
        d.evidence = vec![m];
        finish(&mut d, b);
    }
    d.rule = "infinitives";
    d
}

// (noun, takes "an")
const ARTICLE_NOUNS: [(&str, bool); 12] = [
    ("apple", true),
    ("egg", true),
    ("orange", true),
    ("umbrella", true),
    ("hour", true),
    ("idea", true),
    ("book", false),
    ("car", false),
    ("house", false),
    ("pen", false),
    ("university", false),
    ("dog", false),
];

/// a/an agreement. Evidence: the noun whose sound selects the article.
fn article<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    prefix(&mut d, rng);
    let (s, _) = subject(&mut d, rng);
    let v = d.w(pick(rng, &["bought", "saw", "want", "need", "found", "have"]));
    let (noun, an) = *pick(rng, &ARTICLE_NOUNS);
    let a = d.w(if an { "an" } else { "a" });
    let n = d.w(noun);
    d.att(s, v);
    d.root(v);
    d.att(a, n);
    d.att(n, v);
    d.site = (a, a + 1);
    d.replacement = vec![(if an { "a" } else { "an" }).to_string()];
    d.evidence = vec![n];
    d.rule = "article";
    finish(&mut d, v);
    d
}

// (past, 3sg present, base, objects)
const PAST_VERBS: [(&str, &str, &str, &[(&str, &str)]); 5] = [
    ("visited", "visits", "visit", &[("the", "museum"), ("the", "zoo")]),
    ("cleaned", "cleans", "clean", &[("the", "kitchen"), ("the", "house")]),
    ("watched", "watches", "watch", &[("a", "movie"), ("the", "game")]),
    ("cooked", "cooks", "cook", &[("the", "dinner"), ("a", "cake")]),
    ("played", "plays", "play", &[("the", "piano"), ("a", "game")]),
];

/// Present form with a past time adverbial. Evidence: the adverbial.
fn verb_tense<R: Rng>(rng: &mut R) -> Draft {
    let mut d = Draft::default();
    let time: Vec<usize> = match rng.gen_range(0..3) {
        0 => vec![d.w("Yesterday")],
        1 => {
            let l = d.w("Last");
            let n = d.w("night");
            d.att(l, n);
            vec![l, n]
        }
        _ => {
            let l = d.w("Last");
            let n = d.w("week");
            d.att(l, n);
            vec![l, n]
        }
    };
    d.w(",");
    let (s, third) = subject(&mut d, rng);
    let (past, sg, base, objs) = *pick(rng, &PAST_VERBS);
    let v = d.w(past);
    let (det, obj) = *pick(rng, objs);
    let di = d.w(det);
    let oi = d.w(obj);
    d.att(s, v);
    d.root(v);
    d.att(*time.last().unwrap(), v);
    d.att(di, oi);
    d.att(oi, v);
    d.site = (v, v + 1);
    d.replacement = vec![(if third { sg } else { base }).to_string()];
    d.evidence = time;
    d.rule = "verb-tense";
    finish(&mut d, v);
    d
}

/// Spelling slip or duplicated word on an otherwise clean sentence. No
/// evidence.
fn others<R: Rng>(rng: &mut R) -> Draft {
    let mut d = number(rng);
    d.evidence.clear();
    d.rule = "others";
    // candidate content words: alphabetic, at least 4 letters
    let cands: Vec<usize> = (0..d.toks.len()).filter(|&i| d.toks[i].len() >= 4 && d.toks[i].chars().all(char::is_alphabetic)).collect();
    match cands.choose(rng) {
        Some(&i) if rng.gen_bool(0.6) => {
            let mut cs: Vec<char> = d.toks[i].chars().collect();
            let k = rng.gen_range(1..cs.len() - 2);
            cs.swap(k, k + 1);
            if cs[k] == cs[k + 1] {
                cs.remove(k);
            }
            d.site = (i, i + 1);
            d.replacement = vec![cs.into_iter().collect()];
        }
        _ => {
            // "I have have ..." : X repeats the verb, Y drops it
            let root = d.heads.iter().position(|&h| h == -1).unwrap();
            d.site = (root, root);
            d.replacement = vec![d.toks[root].clone()];
        }
    }
    d
}

fn draft<R: Rng>(t: ErrorType, rng: &mut R) -> Draft {
    match t {
        ErrorType::SubjectVerbAgreement => sva(rng),
        ErrorType::Number => number(rng),
        ErrorType::Preposition => preposition(rng),
        ErrorType::Gerund => gerund(rng),
        ErrorType::Infinitives => infinitives(rng),
        ErrorType::Article => article(rng),
        ErrorType::VerbTense => verb_tense(rng),
        ErrorType::Others => others(rng),
        other => unreachable!("no rule for {other}; Mix::new rejects it"),
    }
}

fn build<R: Rng>(id: String, t: ErrorType, rng: &mut R) -> Result<(AnnotatedInstance, ParseRecord)> {
    realize(id, t, draft(t, rng))
}

fn realize(id: String, t: ErrorType, d: Draft) -> Result<(AnnotatedInstance, ParseRecord)> {
    let (s, e) = d.site;
    let y = d.toks;
    let mut x: Vec<String> = y[..s].to_vec();
    x.extend(d.replacement.iter().cloned());
    x.extend_from_slice(&y[e..]);
    let shift = |k: usize| if k < s { k } else { k - (e - s) + d.replacement.len() };
    let mut evidence: Vec<usize> = d.evidence.iter().map(|&k| shift(k)).collect();
    evidence.sort_unstable();
    let edit = extract_span_edit(&x, &y)?;
    let parse = DependencyParse::from_heads(&d.heads, Vec::new())?;
    let mut meta = serde_json::Map::new();
    meta.insert("rule".into(), d.rule.into());
    let inst = AnnotatedInstance { id: id.clone(), x_tokens: x, y_tokens: y, edit, error_type: t, evidence, meta };
    inst.check().map_err(|(field, msg)| Error::Contract(format!("generated {id} invalid in {field}: {msg}")))?;
    Ok((inst, ParseRecord::from_parse(id, &parse)))
}
