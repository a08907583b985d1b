//! Multiclass linear discriminant analysis, a most-frequent-class baseline,
//! weighted-average F-scores, and seeded stratified k-fold cross-validation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::csv_err;
use crate::scalar::{from_usize, Real};
use crate::stats::mean_sd;

/// Default trace-scaled shrinkage weight γ.
pub const DEFAULT_SHRINKAGE: f64 = 1e-3;

/// Fitted LDA model. Classes are held in ascending label order, which is
/// also the tie-break order for predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel<T: Real> {
    pub labels: Vec<String>,
    pub means: Vec<Vec<T>>,
    /// Shrunk pooled within-class covariance
    /// `(1 − γ)·Σ + γ·(tr Σ / d)·I`.
    pub covariance: DMatrix<T>,
    pub priors: Vec<T>,
    pub shrinkage: T,
    weights: Vec<DVector<T>>,
    biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaPrediction<T> {
    pub label: String,
    pub index: usize,
    /// Linear discriminant score per class, in model label order.
    pub scores: Vec<T>,
}

pub fn fit_lda<T: Real, S: AsRef<str>>(vectors: &[Vec<T>], labels: &[S], shrinkage: T) -> Result<LdaModel<T>> {
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: labels.len(),
        });
    }
    if !(T::zero()..=T::one()).contains(&shrinkage) {
        return Err(Error::invalid("shrinkage must lie in [0, 1]"));
    }
    let d = vectors.first().map(Vec::len).ok_or(Error::Empty("training vectors"))?;
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        members.entry(l.as_ref()).or_default().push(i);
    }
    if members.len() < 2 {
        return Err(Error::invalid("LDA needs at least two classes"));
    }
    if let Some((l, m)) = members.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::invalid(format!("class {l} has {} sample(s); need at least 2", m.len())));
    }

    let n_total = vectors.len();
    let mut means = Vec::with_capacity(members.len());
    let mut scatter = DMatrix::<T>::zeros(d, d);
    for idx in members.values() {
        let mut mu = vec![T::zero(); d];
        for &i in idx {
            mu.iter_mut().zip(&vectors[i]).for_each(|(m, &x)| *m += x);
        }
        let cnt: T = from_usize(idx.len());
        mu.iter_mut().for_each(|m| *m /= cnt);
        for &i in idx {
            let dev = DVector::from_iterator(d, vectors[i].iter().zip(&mu).map(|(&x, &m)| x - m));
            scatter.ger(T::one(), &dev, &dev, T::one());
        }
        means.push(mu);
    }
    let pooled = scatter / from_usize::<T>(n_total - members.len());
    let avg_var = pooled.trace() / from_usize::<T>(d);
    let covariance = &pooled * (T::one() - shrinkage) + DMatrix::identity(d, d) * (shrinkage * avg_var);
    let priors: Vec<T> = members
        .values()
        .map(|m| from_usize::<T>(m.len()) / from_usize::<T>(n_total))
        .collect();

    let weights: Vec<DVector<T>> = if shrinkage == T::one() {
        if avg_var <= T::zero() {
            return Err(Error::Degenerate("zero within-class variance".into()));
        }
        means.iter().map(|mu| DVector::from_iterator(d, mu.iter().map(|&m| m / avg_var))).collect()
    } else {
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("pooled covariance is not positive definite; increase shrinkage".into()))?;
        means.iter().map(|mu| chol.solve(&DVector::from_column_slice(mu))).collect()
    };
    let half = T::lit(0.5);
    let biases = means
        .iter()
        .zip(&weights)
        .zip(&priors)
        .map(|((mu, w), &p)| -half * DVector::from_column_slice(mu).dot(w) + p.ln())
        .collect();
    Ok(LdaModel {
        labels: members.keys().map(|s| s.to_string()).collect(),
        means,
        covariance,
        priors,
        shrinkage,
        weights,
        biases,
    })
}

impl<T: Real> LdaModel<T> {
    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn predict(&self, x: &[T]) -> Result<LdaPrediction<T>> {
        predict_lda(self, x)
    }
}

/// Argmax of `xᵀΣ⁻¹μ_c − ½μ_cᵀΣ⁻¹μ_c + ln π_c`; ties go to the first label.
pub fn predict_lda<T: Real>(model: &LdaModel<T>, x: &[T]) -> Result<LdaPrediction<T>> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let scores: Vec<T> = model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, &b)| w.iter().zip(x).fold(b, |acc, (&wi, &xi)| acc + wi * xi))
        .collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(LdaPrediction {
        label: model.labels[best].clone(),
        index: best,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScore {
    pub label: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FScores {
    pub accuracy: f64,
    /// Per-class F1 weighted by gold support.
    pub weighted_f: f64,
    pub per_class: Vec<ClassScore>,
}

pub fn weighted_f<S: AsRef<str>, G: AsRef<str>>(predicted: &[S], gold: &[G]) -> Result<FScores> {
    if predicted.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            got: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::Empty("label lists"));
    }
    let labels: BTreeSet<&str> = gold.iter().map(AsRef::as_ref).chain(predicted.iter().map(AsRef::as_ref)).collect();
    let n = gold.len() as f64;
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    let mut per_class = Vec::with_capacity(labels.len());
    let mut weighted = 0.0;
    for label in labels {
        let tp = predicted
            .iter()
            .zip(gold)
            .filter(|(p, g)| p.as_ref() == label && g.as_ref() == label)
            .count() as f64;
        let pred_n = predicted.iter().filter(|p| p.as_ref() == label).count() as f64;
        let support = gold.iter().filter(|g| g.as_ref() == label).count();
        let precision = if pred_n > 0.0 { tp / pred_n } else { 0.0 };
        let recall = if support > 0 { tp / support as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted += f1 * support as f64;
        per_class.push(ClassScore {
            label: label.to_owned(),
            support,
            precision,
            recall,
            f1,
        });
    }
    Ok(FScores {
        accuracy: correct as f64 / n,
        weighted_f: weighted / n,
        per_class,
    })
}

/// Constant classifier predicting the modal training label (ties to the
/// lexicographically first label).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MostFrequent {
    pub label: String,
}

pub fn baseline_most_frequent<S: AsRef<str>>(labels: &[S]) -> Result<MostFrequent> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref()).or_default() += 1;
    }
    let max = counts.values().copied().max().ok_or(Error::Empty("training labels"))?;
    let label = counts
        .iter()
        .find(|(_, &c)| c == max)
        .map(|(l, _)| l.to_string())
        .expect("max exists");
    Ok(MostFrequent { label })
}

impl MostFrequent {
    pub fn predict(&self, n: usize) -> Vec<String> {
        vec![self.label.clone(); n]
    }
}

/// Ratio of a model's weighted F to the baseline's; `None` when the baseline
/// scores zero.
pub fn f_ratio(model_f: f64, baseline_f: f64) -> Option<f64> {
    (baseline_f > 0.0).then(|| model_f / baseline_f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingEval {
    pub lda: FScores,
    pub baseline: FScores,
    pub baseline_label: String,
    pub ratio: Option<f64>,
}

/// Fits on all points and scores on the same points.
pub fn evaluate_on_training<T: Real, S: AsRef<str>>(vectors: &[Vec<T>], labels: &[S], shrinkage: T) -> Result<TrainingEval> {
    let model = fit_lda(vectors, labels, shrinkage)?;
    let predicted = vectors
        .iter()
        .map(|v| predict_lda(&model, v).map(|p| p.label))
        .collect::<Result<Vec<_>>>()?;
    let lda = weighted_f(&predicted, labels)?;
    let base = baseline_most_frequent(labels)?;
    let baseline = weighted_f(&base.predict(labels.len()), labels)?;
    Ok(TrainingEval {
        ratio: f_ratio(lda.weighted_f, baseline.weighted_f),
        lda,
        baseline,
        baseline_label: base.label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CvSpec {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            stratified: true,
        }
    }
}

/// What to do with classes smaller than the fold count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SmallClassPolicy {
    /// Refuse to run.
    Strict,
    /// Remove those classes' samples before folding; the count is reported.
    Drop,
}

/// Fold index per sample. Stratified assignment shuffles each class (in
/// label order) and deals its members round-robin, continuing the rotation
/// across classes, so per-class fold sizes differ by at most one.
pub fn assign_folds<S: AsRef<str>>(labels: &[S], spec: &CvSpec) -> Result<Vec<usize>> {
    if spec.k < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    if labels.len() < spec.k {
        return Err(Error::invalid(format!("{} samples for {} folds", labels.len(), spec.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut folds = vec![0; labels.len()];
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            members.entry(l.as_ref()).or_default().push(i);
        }
        members.into_values().collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            folds[i] = next % spec.k;
            next += 1;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub train_accuracy: f64,
    pub train_f: f64,
    pub test_accuracy: f64,
    pub test_f: f64,
    pub baseline_train_f: f64,
    pub baseline_test_f: f64,
    pub train_ratio: Option<f64>,
    pub test_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(values: &[f64]) -> Self {
        let (mean, sd) = mean_sd(values);
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub spec: CvSpec,
    pub dropped_samples: usize,
    pub folds: Vec<FoldResult>,
    pub train_accuracy: MeanSd,
    pub train_f: MeanSd,
    pub test_accuracy: MeanSd,
    pub test_f: MeanSd,
    pub baseline_test_f: MeanSd,
    pub train_ratio: Option<MeanSd>,
    pub test_ratio: Option<MeanSd>,
}

pub fn stratified_cv<T: Real, S: AsRef<str> + Sync>(
    vectors: &[Vec<T>],
    labels: &[S],
    spec: CvSpec,
    shrinkage: T,
    policy: SmallClassPolicy,
) -> Result<CvReport> {
    if vectors.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: labels.len(),
        });
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref()).or_default() += 1;
    }
    let small: BTreeSet<&str> = counts.iter().filter(|(_, &c)| c < spec.k).map(|(l, _)| *l).collect();
    if !small.is_empty() && policy == SmallClassPolicy::Strict {
        return Err(Error::invalid(format!(
            "{} class(es) have fewer than {} samples (e.g. {})",
            small.len(),
            spec.k,
            small.iter().next().expect("nonempty")
        )));
    }
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| !small.contains(labels[i].as_ref())).collect();
    let vectors: Vec<Vec<T>> = keep.iter().map(|&i| vectors[i].clone()).collect();
    let labels: Vec<&str> = keep.iter().map(|&i| labels[i].as_ref()).collect();
    let folds = assign_folds(&labels, &spec)?;

    let results = (0..spec.k)
        .into_par_iter()
        .map(|fold| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| folds[i] != fold);
            let pick_v = |idx: &[usize]| idx.iter().map(|&i| vectors[i].clone()).collect::<Vec<_>>();
            let pick_l = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
            let (train_v, train_l) = (pick_v(&train), pick_l(&train));
            let (test_v, test_l) = (pick_v(&test), pick_l(&test));
            let model = fit_lda(&train_v, &train_l, shrinkage)?;
            let predict_all = |vs: &[Vec<T>]| {
                vs.iter()
                    .map(|v| predict_lda(&model, v).map(|p| p.label))
                    .collect::<Result<Vec<_>>>()
            };
            let train_scores = weighted_f(&predict_all(&train_v)?, &train_l)?;
            let test_scores = weighted_f(&predict_all(&test_v)?, &test_l)?;
            let base = baseline_most_frequent(&train_l)?;
            let base_train = weighted_f(&base.predict(train_l.len()), &train_l)?;
            let base_test = weighted_f(&base.predict(test_l.len()), &test_l)?;
            Ok(FoldResult {
                fold,
                train_n: train.len(),
                test_n: test.len(),
                train_accuracy: train_scores.accuracy,
                train_f: train_scores.weighted_f,
                test_accuracy: test_scores.accuracy,
                test_f: test_scores.weighted_f,
                baseline_train_f: base_train.weighted_f,
                baseline_test_f: base_test.weighted_f,
                train_ratio: f_ratio(train_scores.weighted_f, base_train.weighted_f),
                test_ratio: f_ratio(test_scores.weighted_f, base_test.weighted_f),
            })
        })
        .collect::<Result<Vec<FoldResult>>>()?;

    let col = |f: fn(&FoldResult) -> f64| MeanSd::of(&results.iter().map(f).collect::<Vec<_>>());
    let ratio = |f: fn(&FoldResult) -> Option<f64>| {
        let v: Option<Vec<f64>> = results.iter().map(f).collect();
        v.map(|v| MeanSd::of(&v))
    };
    Ok(CvReport {
        spec,
        dropped_samples: counts.values().sum::<usize>() - keep.len(),
        train_accuracy: col(|r| r.train_accuracy),
        train_f: col(|r| r.train_f),
        test_accuracy: col(|r| r.test_accuracy),
        test_f: col(|r| r.test_f),
        baseline_test_f: col(|r| r.baseline_test_f),
        train_ratio: ratio(|r| r.train_ratio),
        test_ratio: ratio(|r| r.test_ratio),
        folds: results,
    })
}

impl CvReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "fold",
            "train_n",
            "test_n",
            "train_accuracy",
            "train_f",
            "test_accuracy",
            "test_f",
            "baseline_train_f",
            "baseline_test_f",
            "train_ratio",
            "test_ratio",
        ])
        .map_err(csv_err)?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.train_n.to_string(),
                f.test_n.to_string(),
                format!("{:.6}", f.train_accuracy),
                format!("{:.6}", f.train_f),
                format!("{:.6}", f.test_accuracy),
                format!("{:.6}", f.test_f),
                format!("{:.6}", f.baseline_train_f),
                format!("{:.6}", f.baseline_test_f),
                opt(f.train_ratio),
                opt(f.test_ratio),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows of a tab-separated table: column 1 is an id, `label_column`
/// (1-based) holds the class label, every other column is a feature.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVectors<T> {
    pub ids: Vec<String>,
    pub labels: Vec<String>,
    pub vectors: Vec<Vec<T>>,
}

pub fn parse_labeled_vectors<T: Real, R: std::io::Read>(
    reader: std::io::BufReader<R>,
    label_column: usize,
) -> Result<LabeledVectors<T>> {
    use std::io::BufRead;
    if label_column < 2 {
        return Err(Error::invalid("label column must be 2 or greater (column 1 is the id)"));
    }
    let mut out = LabeledVectors {
        ids: Vec::new(),
        labels: Vec::new(),
        vectors: Vec::new(),
    };
    let mut width = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if *width.get_or_insert(cols.len()) != cols.len() {
            return Err(Error::parse(n + 1, format!("expected {} columns, got {}", width.unwrap_or(0), cols.len())));
        }
        if cols.len() < 3 || label_column > cols.len() {
            return Err(Error::parse(n + 1, format!("label column {label_column} out of range")));
        }
        let mut v = Vec::with_capacity(cols.len() - 2);
        for (c, field) in cols.iter().enumerate().skip(1) {
            if c + 1 == label_column {
                continue;
            }
            let x: T = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("bad number {field:?} in column {}", c + 1)))?;
            if !x.is_finite_value() {
                return Err(Error::NonFinite(format!("line {}", n + 1)));
            }
            v.push(x);
        }
        out.ids.push(cols[0].to_owned());
        out.labels.push(cols[label_column - 1].to_owned());
        out.vectors.push(v);
    }
    if out.ids.is_empty() {
        return Err(Error::Empty("labeled vectors"));
    }
    Ok(out)
}

pub fn read_labeled_vectors<T: Real>(path: impl AsRef<std::path::Path>, label_column: usize) -> Result<LabeledVectors<T>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_vectors(std::io::BufReader::new(f), label_column)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs() -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let offsets = [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)];
        let mut v = Vec::new();
        let mut l = Vec::new();
        for (c, label) in [(0.0, "A"), (10.0, "B")] {
            for (dx, dy) in offsets {
                v.push(vec![c + dx, c + dy]);
                l.push(label);
            }
        }
        (v, l)
    }

    #[test]
    fn spherical_classes_split_at_bisector() {
        let (v, l) = two_blobs();
        let m = fit_lda(&v, &l, 0.0).unwrap();
        assert_eq!(m.labels, ["A", "B"]);
        assert_eq!(predict_lda(&m, &[1.0, 1.0]).unwrap().label, "A");
        assert_eq!(predict_lda(&m, &[9.0, 9.0]).unwrap().label, "B");
        assert_eq!(predict_lda(&m, &[0.0, 0.0]).unwrap().label, "A");
        let mid = predict_lda(&m, &[5.0, 5.0]).unwrap();
        assert!((mid.scores[0] - mid.scores[1]).abs() < 1e-12);
        assert!((m.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(predict_lda(&m, &[1.0]).is_err());
    }

    #[test]
    fn exact_ties_go_to_first_label() {
        let v = vec![vec![-1.0], vec![-3.0], vec![1.0], vec![3.0]];
        let m = fit_lda(&v, &["B", "B", "A", "A"], 0.0).unwrap();
        let p = predict_lda(&m, &[0.0]).unwrap();
        assert_eq!(p.scores[0], p.scores[1]);
        assert_eq!(p.label, "A");
    }

    #[test]
    fn fit_errors() {
        let v = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(fit_lda(&v, &["A", "A", "A"], 0.1).is_err());
        assert!(fit_lda(&v, &["A", "A", "B"], 0.1).is_err());
        assert!(fit_lda(&v, &["A", "A"], 0.1).is_err());
        assert!(fit_lda(&v, &["A", "B", "B"], 1.5).is_err());
    }

    #[test]
    fn weighted_f_examples() {
        let r = weighted_f(&["A", "B"], &["A", "B"]).unwrap();
        assert_eq!((r.accuracy, r.weighted_f), (1.0, 1.0));
        let r = weighted_f(&["A", "A", "A"], &["A", "A", "B"]).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        // F1(A) = 0.8 with support 2, F1(B) = 0 with support 1
        assert!((r.weighted_f - 1.6 / 3.0).abs() < 1e-15);
        let r = weighted_f(&["C", "C"], &["A", "B"]).unwrap();
        assert_eq!(r.weighted_f, 0.0);
        assert!(weighted_f(&["A"], &["A", "B"]).is_err());
        assert!(weighted_f::<&str, &str>(&[], &[]).is_err());
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(baseline_most_frequent(&["A", "A", "B"]).unwrap().label, "A");
        assert_eq!(baseline_most_frequent(&["B", "A", "B", "A"]).unwrap().label, "A");
        assert_eq!(f_ratio(0.5, 0.25).unwrap(), 2.0);
        assert_eq!(f_ratio(0.6, 0.0), None);
    }

    #[test]
    fn folds_are_balanced_per_class_and_reproducible() {
        let labels: Vec<String> = (0..53).map(|i| format!("c{}", i % 4)).collect();
        let spec = CvSpec { k: 5, seed: 9, stratified: true };
        let f = assign_folds(&labels, &spec).unwrap();
        assert_eq!(f, assign_folds(&labels, &spec).unwrap());
        for c in 0..4 {
            let mut sizes = [0usize; 5];
            for (i, l) in labels.iter().enumerate() {
                if *l == format!("c{c}") {
                    sizes[f[i]] += 1;
                }
            }
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
        assert!(assign_folds(&labels, &CvSpec { k: 1, ..spec }).is_err());
    }

    #[test]
    fn labeled_vector_parsing() {
        let text = "# header\nw1\tA\t1\t2\nw2\tB\t3\t4\n";
        let lv: LabeledVectors<f64> = parse_labeled_vectors(std::io::BufReader::new(text.as_bytes()), 2).unwrap();
        assert_eq!(lv.labels, ["A", "B"]);
        assert_eq!(lv.vectors[1], [3.0, 4.0]);
        let lv: LabeledVectors<f64> =
            parse_labeled_vectors(std::io::BufReader::new("w\t1\tA\n".as_bytes()), 3).unwrap();
        assert_eq!((lv.labels[0].as_str(), lv.vectors[0][0]), ("A", 1.0));
        assert!(parse_labeled_vectors::<f64, _>(std::io::BufReader::new("w\tA\tx\n".as_bytes()), 2).is_err());
        assert!(parse_labeled_vectors::<f64, _>(std::io::BufReader::new("w\tA\t1\n".as_bytes()), 1).is_err());
    }

    #[test]
    fn cv_small_class_policy() {
        let (mut v, mut l) = two_blobs();
        v.extend([vec![50.0, 50.0], vec![51.0, 50.0]]);
        l.extend(["C", "C"]);
        let spec = CvSpec { k: 3, seed: 1, stratified: true };
        assert!(stratified_cv(&v, &l, spec, 0.1, SmallClassPolicy::Strict).is_err());
        let r = stratified_cv(&v, &l, spec, 0.1, SmallClassPolicy::Drop).unwrap();
        assert_eq!(r.dropped_samples, 2);
        assert_eq!(r.folds.len(), 3);
    }
}
