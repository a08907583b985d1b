//! Discriminative-lexicon comprehension: triphone form vectors, a linear
//! form-to-meaning map, seen-stem train/test splits, evaluation against a
//! restricted candidate pool, and a three-way error taxonomy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fracss::{fit_linear_map, fit_pairs, Direction, LinearMap};
use crate::knn::{csv_err, topn_from_ranks, CandidatePool, Metric, Searcher, TopN};
use crate::scalar::Real;
use crate::shifts::{class_avg_shifts, PairSet};
use crate::vecspace::{add, Embeddings};

pub const BOUNDARY: &str = "#";
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

/// Uppercases a phone and strips a trailing stress digit (`AH0` → `AH`).
fn normalize_phone(raw: &str) -> String {
    raw.trim_end_matches(|c: char| c.is_ascii_digit()).to_uppercase()
}

/// Word → distinct pronunciations, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PronLexicon {
    entries: BTreeMap<String, Vec<Vec<String>>>,
}

impl PronLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pronunciation; returns false if the word already had it.
    pub fn insert<S: AsRef<str>>(&mut self, word: &str, phones: &[S]) -> Result<bool> {
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("bad lexicon word {word:?}")));
        }
        let phones: Vec<String> = phones.iter().map(|p| normalize_phone(p.as_ref())).collect();
        if phones.is_empty() || phones.iter().any(|p| p.is_empty() || p.contains(char::is_whitespace)) {
            return Err(Error::invalid(format!("bad pronunciation for {word}")));
        }
        let prons = self.entries.entry(word.to_owned()).or_default();
        if prons.contains(&phones) {
            return Ok(false);
        }
        prons.push(phones);
        Ok(true)
    }

    /// `WORD<TAB>PHONE PHONE ...`; repeated words add variants. Blank lines
    /// and `#` comments are skipped.
    pub fn parse<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lex = Self::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, phones) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n + 1, "expected WORD<TAB>PHONES"))?;
            let phones: Vec<&str> = phones.split_whitespace().collect();
            lex.insert(word.trim(), &phones).map_err(|e| Error::parse(n + 1, e.to_string()))?;
        }
        Ok(lex)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(f))
    }

    pub fn pronunciations(&self, word: &str) -> Option<&[Vec<String>]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, prons) in &self.entries {
            for p in prons {
                writeln!(out, "{w}\t{}", p.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Boundary-padded phone 3-grams in order of first appearance, duplicates
/// removed. A single phone yields `#-P-#`.
pub fn triphones_of<S: AsRef<str>>(phones: &[S]) -> Result<Vec<String>> {
    if phones.is_empty() {
        return Err(Error::Empty("phone list"));
    }
    let padded: Vec<&str> = std::iter::once(BOUNDARY)
        .chain(phones.iter().map(AsRef::as_ref))
        .chain(std::iter::once(BOUNDARY))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for w in padded.windows(3) {
        let t = w.join("-");
        if seen.insert(t.clone()) {
            out.push(t);
        }
    }
    Ok(out)
}

pub fn triphone_set<S: AsRef<str>>(phones: &[S]) -> Result<BTreeSet<String>> {
    Ok(triphones_of(phones)?.into_iter().collect())
}

/// `(|t∩p| / |p|, |t∩p| / min(|t|, |p|))` for target `t` and predicted `p`.
pub fn recall_overlap(target: &BTreeSet<String>, predicted: &BTreeSet<String>) -> Result<(f64, f64)> {
    if target.is_empty() || predicted.is_empty() {
        return Err(Error::Empty("triphone set"));
    }
    let shared = target.intersection(predicted).count() as f64;
    Ok((
        shared / predicted.len() as f64,
        shared / target.len().min(predicted.len()) as f64,
    ))
}

/// One pronunciation of one word type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Token {
    pub word: String,
    pub variant: usize,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.variant == 0 {
            f.write_str(&self.word)
        } else {
            write!(f, "{}#{}", self.word, self.variant + 1)
        }
    }
}

/// Every pronunciation of every listed word, in the given word order.
pub fn tokens_for<S: AsRef<str>>(lexicon: &PronLexicon, words: &[S]) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for w in words {
        let w = w.as_ref();
        let prons = lexicon
            .pronunciations(w)
            .ok_or_else(|| Error::Miss(format!("no pronunciation for {w}")))?;
        out.extend((0..prons.len()).map(|variant| Token {
            word: w.to_owned(),
            variant,
        }));
    }
    Ok(out)
}

/// Triphone → dense column index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TriphoneSpace {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TriphoneSpace {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, triphone: &str) -> Option<usize> {
        self.index.get(triphone).copied()
    }

    pub fn name(&self, col: usize) -> &str {
        &self.names[col]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Binary token × triphone matrix stored as sorted column lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormMatrix {
    tokens: Vec<Token>,
    rows: Vec<Vec<usize>>,
    cols: usize,
}

impl FormMatrix {
    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn row_triphones(&self, i: usize, space: &TriphoneSpace) -> BTreeSet<String> {
        self.rows[i].iter().map(|&c| space.name(c).to_owned()).collect()
    }

    /// Dense 0/1 matrix of the selected rows.
    pub fn dense<T: Real>(&self, rows: &[usize]) -> DMatrix<T> {
        let mut m = DMatrix::zeros(rows.len(), self.cols);
        for (r, &i) in rows.iter().enumerate() {
            for &c in &self.rows[i] {
                m[(r, c)] = T::one();
            }
        }
        m
    }
}

/// Builds `C` over `tokens`. Columns are numbered by first appearance
/// scanning rows in order; triphones new to the same row are numbered in
/// lexicographic order.
pub fn build_form_matrix(lexicon: &PronLexicon, tokens: &[Token]) -> Result<(FormMatrix, TriphoneSpace)> {
    let sets = tokens
        .par_iter()
        .map(|t| {
            let phones = lexicon
                .pronunciations(&t.word)
                .and_then(|p| p.get(t.variant))
                .ok_or_else(|| Error::Miss(format!("no pronunciation for token {t}")))?;
            triphone_set(phones)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut space = TriphoneSpace::default();
    let mut rows = Vec::with_capacity(sets.len());
    for set in &sets {
        let mut row = Vec::with_capacity(set.len());
        for t in set {
            let next = space.names.len();
            let c = *space.index.entry(t.clone()).or_insert(next);
            if c == next {
                space.names.push(t.clone());
            }
            row.push(c);
        }
        row.sort_unstable();
        rows.push(row);
    }
    Ok((
        FormMatrix {
            tokens: tokens.to_vec(),
            rows,
            cols: space.len(),
        },
        space,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Singular,
    Plural,
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "singular" => Ok(Role::Singular),
            "plural" => Ok(Role::Plural),
            _ => Err(Error::invalid(format!("unknown role {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Singular,
    SeenStemPlural,
    UnseenStemPlural,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Singular, Category::SeenStemPlural, Category::UnseenStemPlural];

    pub fn name(self) -> &'static str {
        match self {
            Category::Singular => "singular",
            Category::SeenStemPlural => "seen-stem-plural",
            Category::UnseenStemPlural => "unseen-stem-plural",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairInfoEntry {
    pub role: Role,
    pub partner: Option<String>,
}

/// Per-word role and number partner.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairInfo {
    entries: BTreeMap<String, PairInfoEntry>,
}

impl PairInfo {
    pub fn insert(&mut self, word: &str, role: Role, partner: Option<&str>) -> Result<()> {
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("bad word {word:?}")));
        }
        let entry = PairInfoEntry {
            role,
            partner: partner.map(str::to_owned),
        };
        if self.entries.insert(word.to_owned(), entry).is_some() {
            return Err(Error::Duplicate(word.to_owned()));
        }
        Ok(())
    }

    /// `word<TAB>{singular|plural}<TAB>partner-or-dash`.
    pub fn parse<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut info = Self::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::parse(n + 1, format!("expected 3 columns, got {}", cols.len())));
            }
            let role: Role = cols[1].parse().map_err(|e: Error| Error::parse(n + 1, e.to_string()))?;
            let partner = (cols[2] != "-" && !cols[2].is_empty()).then_some(cols[2]);
            info.insert(cols[0], role, partner)
                .map_err(|e| Error::parse(n + 1, e.to_string()))?;
        }
        Ok(info)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(f))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, e) in &self.entries {
            let role = match e.role {
                Role::Singular => "singular",
                Role::Plural => "plural",
            };
            writeln!(out, "{w}\t{role}\t{}", e.partner.as_deref().unwrap_or("-"))?;
        }
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&PairInfoEntry> {
        self.entries.get(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The listed singular of a plural, if that singular is itself listed.
    pub fn singular_of(&self, word: &str) -> Option<&str> {
        let e = self.entries.get(word)?;
        if e.role != Role::Plural {
            return None;
        }
        let p = e.partner.as_deref()?;
        matches!(self.entries.get(p), Some(s) if s.role == Role::Singular).then_some(p)
    }

    pub fn category(&self, word: &str) -> Option<Category> {
        let e = self.entries.get(word)?;
        Some(match e.role {
            Role::Singular => Category::Singular,
            Role::Plural if self.singular_of(word).is_some() => Category::SeenStemPlural,
            Role::Plural => Category::UnseenStemPlural,
        })
    }

    /// Keeps only words accepted by `keep`; partners that are dropped make
    /// their plurals unseen-stem.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(w, _)| keep(w))
                .map(|(w, e)| (w.clone(), e.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Train,
    Test,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Train => "train",
            Side::Test => "test",
        }
    }
}

/// Type-level train/test assignment; all tokens of a type share its side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    assignment: BTreeMap<String, Side>,
}

impl SplitSpec {
    pub fn side(&self, word: &str) -> Option<Side> {
        self.assignment.get(word).copied()
    }

    pub fn words(&self, side: Side) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == side)
            .map(|(w, _)| w.as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// `word<TAB>category<TAB>side`.
    pub fn write_tsv<W: Write>(&self, mut out: W, info: &PairInfo) -> Result<()> {
        for (w, s) in &self.assignment {
            let cat = info.category(w).map(Category::name).unwrap_or("-");
            writeln!(out, "{w}\t{cat}\t{}", s.name())?;
        }
        Ok(())
    }
}

/// Singulars and unseen-stem plurals go to train; `round(fraction · n)` of
/// the `n` seen-stem plural types, drawn uniformly with `seed`, join them.
pub fn make_split(info: &PairInfo, seed: u64, train_fraction: f64) -> Result<SplitSpec> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::invalid("train fraction must lie in (0, 1]"));
    }
    let mut assignment = BTreeMap::new();
    let mut seen_stem = Vec::new();
    for w in info.words() {
        match info.category(w).expect("listed word") {
            Category::SeenStemPlural => seen_stem.push(w),
            _ => {
                assignment.insert(w.to_owned(), Side::Train);
            }
        }
    }
    if seen_stem.is_empty() {
        return Err(Error::Empty("seen-stem plurals"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    seen_stem.shuffle(&mut rng);
    let n_train = (train_fraction * seen_stem.len() as f64).round() as usize;
    for (i, w) in seen_stem.into_iter().enumerate() {
        let side = if i < n_train { Side::Train } else { Side::Test };
        assignment.insert(w.to_owned(), side);
    }
    Ok(SplitSpec {
        seed,
        train_fraction,
        assignment,
    })
}

/// Where plural semantic targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticSource {
    /// The embedding of every word as given.
    Raw,
    /// Seen-stem plurals become `singular + class shift`.
    CosClassAvg,
    /// Seen-stem plurals become `singular · B` for a map fitted on the pairs.
    Fracss,
}

impl SemanticSource {
    pub const ALL: [SemanticSource; 3] = [SemanticSource::Raw, SemanticSource::CosClassAvg, SemanticSource::Fracss];

    pub fn name(self) -> &'static str {
        match self {
            SemanticSource::Raw => "raw",
            SemanticSource::CosClassAvg => "cosclassavg",
            SemanticSource::Fracss => "fracss",
        }
    }
}

impl fmt::Display for SemanticSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemanticSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(SemanticSource::Raw),
            "cosclassavg" => Ok(SemanticSource::CosClassAvg),
            "fracss" => Ok(SemanticSource::Fracss),
            _ => Err(Error::invalid(format!("unknown semantic source {s:?}"))),
        }
    }
}

/// Semantic table over the listed words plus how many plurals kept their
/// raw vector because no constructed target was available.
#[derive(Debug, Clone)]
pub struct SemanticTargets<T: Real> {
    pub source: SemanticSource,
    pub table: Embeddings<T>,
    pub raw_fallbacks: usize,
}

/// Builds one semantic row per word in `info`. `pairs` (over `embeddings`)
/// supplies the class labels or the map training data.
pub fn semantic_targets<T: Real>(
    source: SemanticSource,
    info: &PairInfo,
    embeddings: &Embeddings<T>,
    pairs: Option<&PairSet>,
    min_members: usize,
    ridge: T,
) -> Result<SemanticTargets<T>> {
    let words: Vec<String> = info.words().map(str::to_owned).collect();
    let raw = |w: &str| embeddings.vector(w).map(<[T]>::to_vec);
    let mut fallbacks = 0;
    let rows: Vec<Vec<T>> = match source {
        SemanticSource::Raw => words.iter().map(|w| raw(w)).collect::<Result<_>>()?,
        SemanticSource::CosClassAvg => {
            let pairs = pairs.ok_or_else(|| Error::invalid("cosclassavg targets need labelled pairs"))?;
            let classes = class_avg_shifts(pairs, embeddings, min_members)?;
            let class_of = crate::analogy::class_assignment(pairs, embeddings);
            let mut rows = Vec::with_capacity(words.len());
            for w in &words {
                let built = info
                    .singular_of(w)
                    .and_then(|sg| class_of.get(sg).map(|c| (sg, c)))
                    .and_then(|(sg, c)| classes.usable(c).ok().map(|s| (sg, s)));
                match built {
                    Some((sg, shift)) => rows.push(add(embeddings.vector(sg)?, shift)?),
                    None => {
                        if info.category(w) != Some(Category::Singular) {
                            fallbacks += 1;
                        }
                        rows.push(raw(w)?);
                    }
                }
            }
            rows
        }
        SemanticSource::Fracss => {
            let pairs = pairs.ok_or_else(|| Error::invalid("fracss targets need pairs"))?;
            let map = fit_pairs(pairs, embeddings, ridge, Direction::Forward)?;
            let mut rows = Vec::with_capacity(words.len());
            for w in &words {
                match info.singular_of(w) {
                    Some(sg) => rows.push(crate::fracss::apply_map(&map, embeddings.vector(sg)?)?),
                    None => {
                        if info.category(w) != Some(Category::Singular) {
                            fallbacks += 1;
                        }
                        rows.push(raw(w)?);
                    }
                }
            }
            rows
        }
    };
    Ok(SemanticTargets {
        source,
        table: Embeddings::from_rows(words, rows)?,
        raw_fallbacks: fallbacks,
    })
}

/// Semantic matrix `S` whose row `r` is the vector of `tokens[rows[r]]`.
pub fn semantic_rows<T: Real>(form: &FormMatrix, rows: &[usize], semantics: &Embeddings<T>) -> Result<DMatrix<T>> {
    let mut s = DMatrix::zeros(rows.len(), semantics.dim());
    for (r, &i) in rows.iter().enumerate() {
        let v = semantics.vector(&form.tokens[i].word)?;
        s.row_mut(r).copy_from_slice(v);
    }
    Ok(s)
}

/// Least-squares `F` with `C·F ≈ S`.
pub fn fit_comprehension<T: Real>(c_train: &DMatrix<T>, s_train: &DMatrix<T>, ridge: T) -> Result<LinearMap<T>> {
    fit_linear_map(c_train, s_train, ridge)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenOutcome {
    pub token: Token,
    pub category: Category,
    pub rank: usize,
    pub candidate_count: usize,
    /// Best-scoring candidate (the gold word when `rank == 1`). Empty when
    /// the predicted vector has no direction, which ranks the gold last.
    pub predicted: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAccuracy {
    pub category: Category,
    pub tokens: usize,
    pub top1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompReport {
    pub label: String,
    pub metric: Metric,
    /// Pool size before the gold item is added.
    pub pool_size: usize,
    pub outcomes: Vec<TokenOutcome>,
    pub topn: Vec<TopN>,
    /// Per word type: hit if any of its pronunciations is within n.
    pub type_topn: Vec<TopN>,
    pub per_category: Vec<CategoryAccuracy>,
}

impl CompReport {
    /// Top-1 accuracy of a uniform guess among `pool + gold`.
    pub fn chance_percent(&self) -> f64 {
        let extra = self
            .outcomes
            .iter()
            .map(|o| o.candidate_count)
            .max()
            .unwrap_or(self.pool_size);
        100.0 / extra.max(1) as f64
    }

    pub fn errors(&self) -> impl Iterator<Item = &TokenOutcome> {
        self.outcomes.iter().filter(|o| o.rank > 1)
    }

    pub fn write_tokens_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["token", "word", "category", "rank", "candidates", "predicted"])
            .map_err(csv_err)?;
        for o in &self.outcomes {
            w.write_record([
                o.token.to_string(),
                o.token.word.clone(),
                o.category.name().to_owned(),
                o.rank.to_string(),
                o.candidate_count.to_string(),
                o.predicted.clone(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ranks the gold meaning of each selected token among the `pool` rows of
/// `semantics` plus the gold row itself.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_comprehension<T: Real>(
    label: &str,
    map: &LinearMap<T>,
    form: &FormMatrix,
    rows: &[usize],
    semantics: &Embeddings<T>,
    info: &PairInfo,
    pool: &CandidatePool,
    metric: Metric,
    ns: &[usize],
) -> Result<CompReport> {
    if map.d_in() != form.cols() || map.d_out() != semantics.dim() {
        return Err(Error::DimensionMismatch {
            expected: form.cols(),
            got: map.d_in(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("evaluation tokens"));
    }
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    let c = form.dense::<T>(rows);
    let predicted = &c * &map.matrix;
    let searcher = Searcher::new(semantics, metric);
    let outcomes = rows
        .par_iter()
        .enumerate()
        .map(|(r, &i)| {
            let token = &form.tokens[i];
            let gold = semantics.id(&token.word)?;
            let q: Vec<T> = predicted.row(r).iter().copied().collect();
            let category = info
                .category(&token.word)
                .ok_or_else(|| Error::Miss(format!("pair info for {}", token.word)))?;
            let (rank, candidate_count, best) = match searcher.rank_of(&q, gold, pool, &[gold]) {
                Ok(ranked) if ranked.rank == 1 => (ranked.rank, ranked.candidate_count, token.word.clone()),
                Ok(ranked) => {
                    let top = searcher.top_k(&q, 1, pool)?;
                    let best = semantics.word(top.entries[0].id).to_owned();
                    (ranked.rank, ranked.candidate_count, best)
                }
                // no trained cue fired: the prediction has no direction
                Err(Error::ZeroVector) => {
                    let count = pool.len() + usize::from(!pool.contains(gold));
                    (count, count, String::new())
                }
                Err(e) => return Err(e),
            };
            Ok(TokenOutcome {
                token: token.clone(),
                category,
                rank,
                candidate_count,
                predicted: best,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ranks: Vec<Option<usize>> = outcomes.iter().map(|o| Some(o.rank)).collect();
    let mut best_by_type: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &outcomes {
        let e = best_by_type.entry(&o.token.word).or_insert(o.rank);
        *e = (*e).min(o.rank);
    }
    let type_ranks: Vec<Option<usize>> = best_by_type.values().map(|&r| Some(r)).collect();
    let per_category = Category::ALL
        .iter()
        .filter_map(|&cat| {
            let sel: Vec<&TokenOutcome> = outcomes.iter().filter(|o| o.category == cat).collect();
            (!sel.is_empty()).then(|| CategoryAccuracy {
                category: cat,
                tokens: sel.len(),
                top1: 100.0 * sel.iter().filter(|o| o.rank == 1).count() as f64 / sel.len() as f64,
            })
        })
        .collect();
    Ok(CompReport {
        label: label.to_owned(),
        metric,
        pool_size: pool.len(),
        topn: topn_from_ranks(&ranks, ns)?,
        type_topn: topn_from_ranks(&type_ranks, ns)?,
        per_category,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    SingularConfusion,
    SimilarSounding,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 3] = [
        ErrorCategory::SingularConfusion,
        ErrorCategory::SimilarSounding,
        ErrorCategory::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::SingularConfusion => "singular-confusion",
            ErrorCategory::SimilarSounding => "similar-sounding",
            ErrorCategory::Other => "other",
        }
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const SIMILAR_OVERLAP: f64 = 0.3;
pub const SIMILAR_RECALL: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub token: Token,
    pub predicted: String,
    pub category: ErrorCategory,
    pub recall: f64,
    pub overlap: f64,
}

/// Categorises a misrecognised token. When the predicted word has several
/// pronunciations, the one with the highest (overlap, recall) is compared.
pub fn classify_error(token: &Token, predicted: &str, info: &PairInfo, lexicon: &PronLexicon) -> Result<ErrorRecord> {
    let target = lexicon
        .pronunciations(&token.word)
        .and_then(|p| p.get(token.variant))
        .ok_or_else(|| Error::Miss(format!("no pronunciation for token {token}")))?;
    let target = triphone_set(target)?;
    let mut best: Option<(f64, f64)> = None;
    for pron in lexicon
        .pronunciations(predicted)
        .ok_or_else(|| Error::Miss(format!("no pronunciation for {predicted}")))?
    {
        let (recall, overlap) = recall_overlap(&target, &triphone_set(pron)?)?;
        if best.is_none_or(|(r, o)| (overlap, recall) > (o, r)) {
            best = Some((recall, overlap));
        }
    }
    let (recall, overlap) = best.expect("at least one pronunciation");
    let category = if info.singular_of(&token.word) == Some(predicted) {
        ErrorCategory::SingularConfusion
    } else if overlap > SIMILAR_OVERLAP && recall > SIMILAR_RECALL {
        ErrorCategory::SimilarSounding
    } else {
        ErrorCategory::Other
    };
    Ok(ErrorRecord {
        token: token.clone(),
        predicted: predicted.to_owned(),
        category,
        recall,
        overlap,
    })
}

pub fn error_records(report: &CompReport, info: &PairInfo, lexicon: &PronLexicon) -> Result<Vec<ErrorRecord>> {
    report
        .errors()
        .map(|o| {
            if o.predicted.is_empty() {
                return Ok(ErrorRecord {
                    token: o.token.clone(),
                    predicted: String::new(),
                    category: ErrorCategory::Other,
                    recall: 0.0,
                    overlap: 0.0,
                });
            }
            classify_error(&o.token, &o.predicted, info, lexicon)
        })
        .collect()
}

pub fn error_counts(records: &[ErrorRecord]) -> BTreeMap<ErrorCategory, usize> {
    let mut counts: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
    for r in records {
        *counts.get_mut(&r.category).expect("all categories present") += 1;
    }
    counts
}

/// `token,gold,predicted,category,recall,overlap`.
pub fn write_errors_csv<W: Write>(out: W, records: &[ErrorRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["token", "gold", "predicted", "category", "recall", "overlap"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.token.to_string(),
            r.token.word.clone(),
            r.predicted.clone(),
            r.category.name().to_owned(),
            format!("{:.6}", r.recall),
            format!("{:.6}", r.overlap),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Form side of an experiment, shared by every semantic source so that only
/// `S` varies between runs.
#[derive(Debug, Clone)]
pub struct DlSetup {
    pub form: FormMatrix,
    pub space: TriphoneSpace,
    pub split: SplitSpec,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Tokens for every word in `info` (word order, then variant order), the
/// form matrix over all of them, and the seeded split.
pub fn prepare(lexicon: &PronLexicon, info: &PairInfo, seed: u64, train_fraction: f64) -> Result<DlSetup> {
    let words: Vec<&str> = info.words().collect();
    let tokens = tokens_for(lexicon, &words)?;
    let (form, space) = build_form_matrix(lexicon, &tokens)?;
    let split = make_split(info, seed, train_fraction)?;
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
        (0..form.len()).partition(|&i| split.side(&form.tokens[i].word) == Some(Side::Train));
    Ok(DlSetup {
        form,
        space,
        split,
        train_rows,
        test_rows,
    })
}

#[derive(Debug, Clone)]
pub struct DlRun<T: Real> {
    pub source: SemanticSource,
    pub map: LinearMap<T>,
    pub train: CompReport,
    pub test: CompReport,
    pub train_errors: Vec<ErrorRecord>,
    pub test_errors: Vec<ErrorRecord>,
}

/// Fits `F` on the training tokens and evaluates both splits against the
/// training word types (plus each token's own meaning).
#[allow(clippy::too_many_arguments)]
pub fn run_comprehension<T: Real>(
    setup: &DlSetup,
    targets: &SemanticTargets<T>,
    info: &PairInfo,
    lexicon: &PronLexicon,
    metric: Metric,
    ns: &[usize],
    ridge: T,
) -> Result<DlRun<T>> {
    let sem = &targets.table;
    let c = setup.form.dense::<T>(&setup.train_rows);
    let s = semantic_rows(&setup.form, &setup.train_rows, sem)?;
    let map = fit_comprehension(&c, &s, ridge)?;
    let pool = CandidatePool::from_ids(
        setup
            .split
            .words(Side::Train)
            .into_iter()
            .map(|w| sem.id(w))
            .collect::<Result<Vec<_>>>()?,
    );
    let eval = |label: &str, rows: &[usize]| {
        evaluate_comprehension(label, &map, &setup.form, rows, sem, info, &pool, metric, ns)
    };
    let train = eval("train", &setup.train_rows)?;
    let test = eval("test", &setup.test_rows)?;
    let train_errors = error_records(&train, info, lexicon)?;
    let test_errors = error_records(&test, info, lexicon)?;
    Ok(DlRun {
        source: targets.source,
        map,
        train,
        test,
        train_errors,
        test_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn triphone_examples() {
        assert_eq!(
            triphones_of(&["S", "IH", "T", "IY", "Z"]).unwrap(),
            ["#-S-IH", "S-IH-T", "IH-T-IY", "T-IY-Z", "IY-Z-#"]
        );
        assert_eq!(triphones_of(&["T", "UW"]).unwrap(), ["#-T-UW", "T-UW-#"]);
        assert_eq!(triphones_of(&["AE"]).unwrap(), ["#-AE-#"]);
        assert!(triphones_of::<&str>(&[]).is_err());
        // repeated 3-gram collapses
        assert_eq!(triphones_of(&["A", "A", "A", "A"]).unwrap().len(), 3);
        assert_eq!(triphones_of(&["A", "B", "A", "B", "A"]).unwrap().len(), 4);
    }

    #[test]
    fn recall_overlap_examples() {
        let bribes = triphone_set(&["B", "R", "AY", "B", "Z"]).unwrap();
        let tribes = triphone_set(&["T", "R", "AY", "B", "Z"]).unwrap();
        assert_eq!(
            bribes.intersection(&tribes).cloned().collect::<BTreeSet<_>>(),
            set(&["R-AY-B", "AY-B-Z", "B-Z-#"])
        );
        assert_eq!(recall_overlap(&bribes, &tribes).unwrap(), (0.6, 0.6));
        assert_eq!(recall_overlap(&bribes, &bribes).unwrap(), (1.0, 1.0));
        assert_eq!(recall_overlap(&set(&["a"]), &set(&["b"])).unwrap(), (0.0, 0.0));
        assert!(recall_overlap(&set(&[]), &set(&["b"])).is_err());
        let (r, o) = recall_overlap(&set(&["a", "b"]), &set(&["a", "c", "d", "e"])).unwrap();
        assert_eq!((r, o), (0.25, 0.5));
    }

    #[test]
    fn lexicon_parsing() {
        let text = "desk\tD EH1 S K\ndesk\tD EH S K\ndesk\tD IH S K\n# c\n\ncat\tk ae t\n";
        let lex = PronLexicon::parse(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(lex.pronunciations("desk").unwrap().len(), 2);
        assert_eq!(lex.pronunciations("cat").unwrap()[0], ["K", "AE", "T"]);
        assert!(PronLexicon::parse(BufReader::new("desk\t\n".as_bytes())).is_err());
        assert!(PronLexicon::parse(BufReader::new("desk D EH S K\n".as_bytes())).is_err());
    }

    #[test]
    fn form_matrix_rows_match_triphones() {
        let mut lex = PronLexicon::new();
        lex.insert("desk", &["D", "EH", "S", "K"]).unwrap();
        lex.insert("desk", &["D", "IH", "S", "K"]).unwrap();
        lex.insert("desks", &["D", "EH", "S", "K", "S"]).unwrap();
        let tokens = tokens_for(&lex, &["desk", "desks"]).unwrap();
        assert_eq!(tokens.len(), 3);
        let (fm, space) = build_form_matrix(&lex, &tokens).unwrap();
        assert_eq!(fm.cols(), space.len());
        for (i, t) in tokens.iter().enumerate() {
            let phones = &lex.pronunciations(&t.word).unwrap()[t.variant];
            assert_eq!(fm.row_triphones(i, &space), triphone_set(phones).unwrap());
        }
        let dense = fm.dense::<f64>(&[0, 1, 2]);
        assert_eq!(dense.row(0).sum(), 4.0);
        assert_eq!(dense.row(2).sum(), 5.0);
        // first row numbered lexicographically
        assert_eq!(&space.names()[..4], ["#-D-EH", "D-EH-S", "EH-S-K", "S-K-#"]);
    }

    fn info() -> PairInfo {
        let text = "cat\tsingular\tcats\ncats\tplural\tcat\npants\tplural\t-\n";
        PairInfo::parse(BufReader::new(text.as_bytes())).unwrap()
    }

    #[test]
    fn pair_info_categories() {
        let i = info();
        assert_eq!(i.category("cat"), Some(Category::Singular));
        assert_eq!(i.category("cats"), Some(Category::SeenStemPlural));
        assert_eq!(i.category("pants"), Some(Category::UnseenStemPlural));
        assert_eq!(i.singular_of("cats"), Some("cat"));
        let r = i.restrict(|w| w != "cat");
        assert_eq!(r.category("cats"), Some(Category::UnseenStemPlural));
        assert!(PairInfo::parse(BufReader::new("a\tsingular\n".as_bytes())).is_err());
        assert!(PairInfo::parse(BufReader::new("a\tdual\t-\n".as_bytes())).is_err());
    }

    #[test]
    fn split_counts() {
        let mut info = PairInfo::default();
        for i in 0..10 {
            info.insert(&format!("s{i}"), Role::Singular, Some(&format!("p{i}"))).unwrap();
            info.insert(&format!("p{i}"), Role::Plural, Some(&format!("s{i}"))).unwrap();
        }
        info.insert("u", Role::Plural, None).unwrap();
        let s = make_split(&info, 3, 0.7).unwrap();
        let test = s.words(Side::Test);
        assert_eq!(test.len(), 3);
        assert!(test.iter().all(|w| w.starts_with('p')));
        assert_eq!(s.side("u"), Some(Side::Train));
        assert_eq!(s, make_split(&info, 3, 0.7).unwrap());
        assert!(make_split(&PairInfo::default(), 3, 0.7).is_err());
    }

    #[test]
    fn error_taxonomy() {
        let mut lex = PronLexicon::new();
        lex.insert("bribes", &["B", "R", "AY", "B", "Z"]).unwrap();
        lex.insert("bribe", &["B", "R", "AY", "B"]).unwrap();
        lex.insert("tribes", &["T", "R", "AY", "B", "Z"]).unwrap();
        lex.insert("ox", &["AA", "K", "S"]).unwrap();
        let mut info = PairInfo::default();
        info.insert("bribe", Role::Singular, Some("bribes")).unwrap();
        info.insert("bribes", Role::Plural, Some("bribe")).unwrap();
        let tok = Token {
            word: "bribes".into(),
            variant: 0,
        };
        let e = classify_error(&tok, "bribe", &info, &lex).unwrap();
        assert_eq!(e.category, ErrorCategory::SingularConfusion);
        let e = classify_error(&tok, "tribes", &info, &lex).unwrap();
        assert_eq!((e.category, e.recall, e.overlap), (ErrorCategory::SimilarSounding, 0.6, 0.6));
        assert_eq!(classify_error(&tok, "ox", &info, &lex).unwrap().category, ErrorCategory::Other);
    }
}
