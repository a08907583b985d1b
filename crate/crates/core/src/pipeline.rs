//! End-to-end experiment runners. Each returns a [`ReportBundle`]: named
//! CSV/JSON texts that carry a provenance header (tool version, command,
//! seed, config echo, SHA-256 of every input) and no timestamps, so equal
//! inputs give byte-identical reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analogy::{
    class_assignment, dataset_pool, evaluate_pluralizer, write_topn_csv, EvalReport, Method, Pluralizer,
};
use crate::dlcomp::{
    error_counts, prepare, run_comprehension, semantic_targets, write_errors_csv, Category, DlRun,
    PairInfo, PronLexicon, SemanticSource, DEFAULT_TRAIN_FRACTION,
};
use crate::error::{Error, Result};
use crate::fracss::{
    approximation_residuals, diagonal_profile, evaluate_map, fit_pairs, rows_matrix, split_indices, Direction,
    MapEvalReport,
};
use crate::knn::{CandidatePool, Metric, TopN};
use crate::scalar::Real;
use crate::shifts::{avg_shift, class_avg_shifts, PairSet};
use crate::vecspace::Embeddings;

pub const DEFAULT_TOPN: [usize; 4] = [2, 3, 10, 20];
pub const DEFAULT_MIN_CLASS_SIZE: usize = 5;
pub const FRACSS_TEST_FRACTION: f64 = 0.1;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: format!("plurvec {}", env!("CARGO_PKG_VERSION")),
            command: command.to_owned(),
            seed,
            inputs: Vec::new(),
            config: serde_json::to_value(config).map_err(|e| Error::invalid(e.to_string()))?,
        })
    }

    pub fn with_file(mut self, name: &str, path: impl AsRef<Path>) -> Result<Self> {
        self.inputs.push(InputDigest {
            name: name.to_owned(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn with_bytes(mut self, name: &str, bytes: &[u8]) -> Self {
        self.inputs.push(InputDigest {
            name: name.to_owned(),
            sha256: sha256_bytes(bytes),
        });
        self
    }

    /// `# key: value` lines.
    pub fn header(&self) -> String {
        let mut h = format!("# tool: {}\n# command: {}\n", self.tool, self.command);
        if let Some(s) = self.seed {
            h.push_str(&format!("# seed: {s}\n"));
        }
        for i in &self.inputs {
            h.push_str(&format!("# input: {} sha256={}\n", i.name, i.sha256));
        }
        h.push_str(&format!("# config: {}\n", self.config));
        h
    }
}

/// Drops leading `#` provenance lines from a report text.
pub fn strip_provenance(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            files: BTreeMap::new(),
        }
    }

    pub fn add_csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut body = Vec::new();
        write(&mut body)?;
        let body = String::from_utf8(body).map_err(|e| Error::invalid(e.to_string()))?;
        self.files.insert(name.to_owned(), format!("{}{body}", self.provenance.header()));
        Ok(())
    }

    pub fn add_text(&mut self, name: &str, text: String) {
        self.files.insert(name.to_owned(), text);
    }

    /// `report.json` with the provenance under `"provenance"`.
    pub fn set_summary(&mut self, results: Value) -> Result<()> {
        let doc = json!({ "provenance": self.provenance, "results": results });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))?;
        self.files.insert("report.json".into(), text + "\n");
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in &self.files {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn to_json(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::invalid(e.to_string()))
}

fn method_slug(m: Method) -> &'static str {
    match m {
        Method::OnlyB => "only-b",
        Method::ThreeCosAdd => "3cosadd",
        Method::ThreeCosAvg => "3cosavg",
        Method::CosClassAvg => "cosclassavg",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalogyConfig {
    pub methods: Vec<Method>,
    pub metric: Metric,
    pub topn: Vec<usize>,
    pub min_class_size: usize,
    pub filter_singulars: bool,
    /// `(singular, plural)` prime for 3CosAdd.
    pub prime: Option<(String, String)>,
}

impl Default for AnalogyConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::OnlyB, Method::ThreeCosAvg, Method::CosClassAvg],
            metric: Metric::Cosine,
            topn: DEFAULT_TOPN.to_vec(),
            min_class_size: DEFAULT_MIN_CLASS_SIZE,
            filter_singulars: false,
            prime: None,
        }
    }
}

/// Top-n table for each configured method over one pair set.
pub fn pipeline_analogy<T: Real>(
    table: &Embeddings<T>,
    pairs: &PairSet,
    config: &AnalogyConfig,
    provenance: Provenance,
) -> Result<ReportBundle> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    if config.methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    let pool = dataset_pool(pairs, config.filter_singulars);
    let mut bundle = ReportBundle::new(provenance);
    let mut reports: Vec<EvalReport> = Vec::new();
    for &method in &config.methods {
        let pluralizer = match method {
            Method::OnlyB => Pluralizer::OnlyB,
            Method::ThreeCosAdd => {
                let (sg, pl) = config
                    .prime
                    .as_ref()
                    .ok_or_else(|| Error::invalid("3CosAdd needs an explicit prime pair"))?;
                Pluralizer::ThreeCosAdd {
                    prime_singular: table.vector(sg)?.to_vec(),
                    prime_plural: table.vector(pl)?.to_vec(),
                }
            }
            Method::ThreeCosAvg => Pluralizer::ThreeCosAvg {
                shift: avg_shift(pairs, table)?,
            },
            Method::CosClassAvg => {
                let classes = class_avg_shifts(pairs, table, config.min_class_size)?;
                bundle.add_csv("classes.csv", |w| classes.write_csv(w))?;
                Pluralizer::CosClassAvg {
                    classes,
                    class_of: class_assignment(pairs, table),
                }
            }
        };
        let report = evaluate_pluralizer(&pluralizer, pairs, table, &pool, config.metric, &config.topn)?;
        bundle.add_csv(&format!("ranks_{}.csv", method_slug(method)), |w| report.write_ranks_csv(w))?;
        reports.push(report);
    }
    bundle.add_csv("topn.csv", |w| write_topn_csv(w, &reports))?;
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "method": r.method.label(),
                "metric": r.metric,
                "candidates": r.candidate_count,
                "failures": r.failures(),
                "topn": r.topn,
            })
        })
        .collect();
    bundle.set_summary(json!({ "pairs": pairs.len(), "methods": summary }))?;
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FracssConfig {
    pub seed: u64,
    pub metric: Metric,
    pub topn: Vec<usize>,
    pub ridge: f64,
    pub test_fraction: f64,
    /// Drop source-side words from the candidate pool.
    pub filter_sources: bool,
}

impl Default for FracssConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            metric: Metric::Cosine,
            topn: vec![1, 2, 3, 10, 20],
            ridge: 0.0,
            test_fraction: FRACSS_TEST_FRACTION,
            filter_sources: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    pub direction: Direction,
    pub split: String,
    pub pairs: usize,
    pub candidates: usize,
    pub topn: Vec<TopN>,
    pub shorter_fraction: f64,
}

fn map_pool(pairs: &PairSet, direction: Direction, filter_sources: bool) -> CandidatePool {
    let pool = CandidatePool::from_ids(pairs.word_ids());
    if !filter_sources {
        return pool;
    }
    let sources = pairs
        .pairs()
        .iter()
        .map(|p| match direction {
            Direction::Forward => p.singular,
            Direction::Inverse => p.plural,
        })
        .collect();
    pool.excluding(&sources)
}

/// Seeded train/test split of the pairs, forward and inverse fits on the
/// training part, the forward map's diagonal profile and residuals against
/// `diag_mean · I`, and rank evaluation of both maps on both parts.
pub fn pipeline_fracss<T: Real>(
    table: &Embeddings<T>,
    pairs: &PairSet,
    config: &FracssConfig,
    provenance: Provenance,
) -> Result<ReportBundle> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let (train_idx, test_idx) = split_indices(pairs.len(), config.test_fraction, config.seed)?;
    let train = pairs.select(&train_idx);
    let test = pairs.select(&test_idx);
    let ridge = T::lit(config.ridge);
    let mut bundle = ReportBundle::new(provenance);
    let mut summaries = Vec::new();
    let mut evals: Vec<(String, MapEvalReport)> = Vec::new();
    for direction in [Direction::Forward, Direction::Inverse] {
        let map = fit_pairs(&train, table, ridge, direction)?;
        let pool = map_pool(pairs, direction, config.filter_sources);
        let dir = match direction {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        };
        if direction == Direction::Forward {
            let profile = diagonal_profile(&map)?;
            let sg: Vec<usize> = train.pairs().iter().map(|p| p.singular).collect();
            let resid = approximation_residuals(&map, &rows_matrix(table, &sg), profile.diag_mean)?;
            bundle.add_csv("diagonal.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["index", "value"]).map_err(crate::knn::csv_err)?;
                for i in 0..map.d_in() {
                    c.write_record([i.to_string(), format!("{:.6e}", map.matrix[(i, i)].as_f64())])
                        .map_err(crate::knn::csv_err)?;
                }
                c.flush()?;
                Ok(())
            })?;
            bundle.add_csv("profile.csv", |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["statistic", "value"]).map_err(crate::knn::csv_err)?;
                let rows = [
                    ("diag_mean", profile.diag_mean),
                    ("diag_sd", profile.diag_sd),
                    ("offdiag_mean", profile.offdiag_mean),
                    ("offdiag_sd", profile.offdiag_sd),
                    ("residual_scale", resid.scale),
                    ("residual_elementwise_mean", resid.elementwise_mean),
                    ("residual_elementwise_sd", resid.elementwise_sd),
                    ("residual_rowwise_mean_of_means", resid.rowwise_mean_of_means),
                    ("residual_rowwise_mean_of_sds", resid.rowwise_mean_of_sds),
                ];
                for (k, v) in rows {
                    c.write_record([k.to_owned(), format!("{v:.6e}")]).map_err(crate::knn::csv_err)?;
                }
                c.flush()?;
                Ok(())
            })?;
            bundle.add_text("map_forward.txt", {
                let mut buf = Vec::new();
                map.write(&mut buf)?;
                String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))?
            });
        }
        for (split, set) in [("train", &train), ("test", &test)] {
            if set.is_empty() {
                continue;
            }
            let r = evaluate_map(&map, set, table, &pool, config.metric, &config.topn, direction)?;
            summaries.push(MapSummary {
                direction,
                split: split.to_owned(),
                pairs: set.len(),
                candidates: r.candidate_count,
                topn: r.topn.clone(),
                shorter_fraction: r.shorter_fraction,
            });
            evals.push((format!("outcomes_{dir}_{split}.csv"), r));
        }
    }
    for (name, r) in &evals {
        bundle.add_csv(name, |w| r.write_csv(w))?;
    }
    bundle.add_csv("evaluation.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["direction".to_owned(), "split".into(), "pairs".into(), "candidates".into()];
        header.extend(config.topn.iter().map(|n| format!("top{n}")));
        header.push("shorter_fraction".into());
        c.write_record(&header).map_err(crate::knn::csv_err)?;
        for s in &summaries {
            let mut row = vec![
                to_json(&s.direction)?.as_str().unwrap_or_default().to_owned(),
                s.split.clone(),
                s.pairs.to_string(),
                s.candidates.to_string(),
            ];
            row.extend(s.topn.iter().map(|t| format!("{:.2}", t.percent)));
            row.push(format!("{:.4}", s.shorter_fraction));
            c.write_record(&row).map_err(crate::knn::csv_err)?;
        }
        c.flush()?;
        Ok(())
    })?;
    bundle.set_summary(json!({
        "train_pairs": train.len(),
        "test_pairs": test.len(),
        "evaluations": to_json(&summaries)?,
    }))?;
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DlConfig {
    pub seed: u64,
    pub metric: Metric,
    pub topn: Vec<usize>,
    pub ridge: f64,
    pub train_fraction: f64,
    pub min_class_size: usize,
    pub sources: Vec<SemanticSource>,
}

impl Default for DlConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            metric: Metric::Pearson,
            topn: vec![1, 2, 3, 4, 5],
            ridge: 0.0,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            min_class_size: DEFAULT_MIN_CLASS_SIZE,
            sources: SemanticSource::ALL.to_vec(),
        }
    }
}

/// Words of `info` with a pronunciation and an embedding, and the rest.
pub fn dl_dataset<T: Real>(info: &PairInfo, lexicon: &PronLexicon, table: &Embeddings<T>) -> (PairInfo, Vec<String>) {
    let keep = |w: &str| lexicon.contains(w) && table.lookup(w).is_some();
    let dropped = info.words().filter(|w| !keep(w)).map(str::to_owned).collect();
    (info.restrict(keep), dropped)
}

fn rows_csv<S: AsRef<str>>(out: &mut Vec<u8>, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    let mut c = csv::Writer::from_writer(out);
    c.write_record(header.iter().map(AsRef::as_ref)).map_err(crate::knn::csv_err)?;
    for r in rows {
        c.write_record(r).map_err(crate::knn::csv_err)?;
    }
    c.flush()?;
    Ok(())
}

fn push_accuracy_rows(rows: &mut Vec<Vec<String>>, run: &DlRun<impl Real>, ns: &[usize]) {
    for rep in [&run.train, &run.test] {
        let mut row = vec![
            run.source.name().to_owned(),
            rep.label.clone(),
            rep.metric.name().to_owned(),
            rep.outcomes.len().to_string(),
            rep.pool_size.to_string(),
            format!("{:.4}", rep.chance_percent()),
        ];
        row.extend(rep.topn.iter().map(|t| format!("{:.2}", t.percent)));
        row.extend(rep.type_topn.iter().map(|t| format!("{:.2}", t.percent)));
        debug_assert_eq!(rep.topn.len(), ns.len());
        rows.push(row);
    }
}

/// Comprehension runs for each semantic source over one shared form
/// matrix and split.
pub fn pipeline_dl<T: Real>(
    info: &PairInfo,
    lexicon: &PronLexicon,
    table: &Embeddings<T>,
    pairs: Option<&PairSet>,
    config: &DlConfig,
    provenance: Provenance,
) -> Result<ReportBundle> {
    if config.sources.is_empty() {
        return Err(Error::invalid("no semantic sources selected"));
    }
    let (info, dropped) = dl_dataset(info, lexicon, table);
    if info.is_empty() {
        return Err(Error::Empty("words with both a pronunciation and an embedding"));
    }
    let setup = prepare(lexicon, &info, config.seed, config.train_fraction)?;
    let ridge = T::lit(config.ridge);
    let mut bundle = ReportBundle::new(provenance);
    bundle.add_text("split.tsv", {
        let mut buf = Vec::new();
        setup.split.write_tsv(&mut buf, &info)?;
        String::from_utf8(buf).map_err(|e| Error::invalid(e.to_string()))?
    });

    let mut accuracy = Vec::new();
    let mut categories = Vec::new();
    let mut counts = Vec::new();
    let mut summary = Vec::new();
    for &source in &config.sources {
        let targets = semantic_targets(source, &info, table, pairs, config.min_class_size, ridge)?;
        let run = run_comprehension(&setup, &targets, &info, lexicon, config.metric, &config.topn, ridge)?;
        push_accuracy_rows(&mut accuracy, &run, &config.topn);
        for (rep, errs) in [(&run.train, &run.train_errors), (&run.test, &run.test_errors)] {
            for cat in Category::ALL {
                let c = rep.per_category.iter().find(|c| c.category == cat);
                categories.push(vec![
                    source.name().to_owned(),
                    rep.label.clone(),
                    cat.name().to_owned(),
                    c.map_or(0, |c| c.tokens).to_string(),
                    c.map_or(String::new(), |c| format!("{:.2}", c.top1)),
                ]);
            }
            for (cat, n) in error_counts(errs) {
                counts.push(vec![
                    source.name().to_owned(),
                    rep.label.clone(),
                    cat.name().to_owned(),
                    n.to_string(),
                ]);
            }
            bundle.add_csv(&format!("errors_{}_{}.csv", source.name(), rep.label), |w| {
                write_errors_csv(w, errs)
            })?;
            bundle.add_csv(&format!("tokens_{}_{}.csv", source.name(), rep.label), |w| rep.write_tokens_csv(w))?;
        }
        summary.push(json!({
            "source": source.name(),
            "raw_fallbacks": targets.raw_fallbacks,
            "train": { "tokens": run.train.outcomes.len(), "topn": run.train.topn, "type_topn": run.train.type_topn,
                       "per_category": run.train.per_category },
            "test": { "tokens": run.test.outcomes.len(), "topn": run.test.topn, "type_topn": run.test.type_topn,
                      "per_category": run.test.per_category, "chance_percent": run.test.chance_percent() },
            "test_error_counts": error_counts(&run.test_errors)
                .into_iter()
                .map(|(c, n)| (c.name().to_owned(), n))
                .collect::<BTreeMap<_, _>>(),
        }));
    }

    let mut header: Vec<String> = ["source", "split", "metric", "tokens", "pool", "chance"]
        .map(String::from)
        .to_vec();
    header.extend(config.topn.iter().map(|n| format!("top{n}")));
    header.extend(config.topn.iter().map(|n| format!("type_top{n}")));
    bundle.add_csv("accuracy.csv", |w| rows_csv(w, &header, &accuracy))?;
    bundle.add_csv("categories.csv", |w| {
        rows_csv(w, &["source", "split", "category", "tokens", "top1"], &categories)
    })?;
    bundle.add_csv("error_counts.csv", |w| {
        rows_csv(w, &["source", "split", "category", "count"], &counts)
    })?;
    bundle.set_summary(json!({
        "words": info.len(),
        "dropped_words": dropped,
        "tokens": setup.form.len(),
        "triphones": setup.space.len(),
        "train_tokens": setup.train_rows.len(),
        "test_tokens": setup.test_rows.len(),
        "runs": summary,
    }))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_synth, SynthSpec};

    #[test]
    fn provenance_header_and_strip() {
        let p = Provenance::new("x", Some(3), &json!({"a": 1}))
            .unwrap()
            .with_bytes("in", b"abc");
        let h = p.header();
        assert!(h.contains("# seed: 3\n"));
        assert!(h.contains("sha256=ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        let text = format!("{h}a,b\n1,2\n");
        assert_eq!(strip_provenance(&text), "a,b\n1,2\n");
    }

    #[test]
    fn analogy_pipeline_is_deterministic_and_rejects_empty() {
        let data = gen_synth::<f64>(&SynthSpec {
            classes: 4,
            lexemes_per_class: 6,
            dim: 10,
            seed: 2,
            ..SynthSpec::default()
        })
        .unwrap();
        let cfg = AnalogyConfig::default();
        let prov = || Provenance::new("analogy", None, &cfg).unwrap();
        let a = pipeline_analogy(&data.table, &data.pairs, &cfg, prov()).unwrap();
        let b = pipeline_analogy(&data.table, &data.pairs, &cfg, prov()).unwrap();
        assert_eq!(a, b);
        let topn = strip_provenance(a.get("topn.csv").unwrap());
        assert_eq!(topn.lines().count(), 4);
        let empty = data.pairs.select(&[]);
        assert!(pipeline_analogy(&data.table, &empty, &cfg, prov()).is_err());
    }
}
