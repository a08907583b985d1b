//! Analogy-based plural predictors and the top-n evaluation harness.
//!
//! * Only-B returns the singular vector unchanged.
//! * 3CosAdd adds the shift of one prime pair (`pens − pen + table`).
//! * 3CosAvg adds the global average shift.
//! * CosClassAvg adds the average shift of the singular's semantic class.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::{csv_err, topn_from_ranks, CandidatePool, Metric, Searcher, TopN};
use crate::scalar::Real;
use crate::shifts::{ClassShiftTable, PairSet};
use crate::vecspace::{add, cosine, euclidean, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    #[serde(rename = "Only-B")]
    OnlyB,
    #[serde(rename = "3CosAdd")]
    ThreeCosAdd,
    #[serde(rename = "3CosAvg")]
    ThreeCosAvg,
    #[serde(rename = "CosClassAvg")]
    CosClassAvg,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::OnlyB, Method::ThreeCosAdd, Method::ThreeCosAvg, Method::CosClassAvg];

    pub fn label(self) -> &'static str {
        match self {
            Method::OnlyB => "Only-B",
            Method::ThreeCosAdd => "3CosAdd",
            Method::ThreeCosAvg => "3CosAvg",
            Method::CosClassAvg => "CosClassAvg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "only-b" | "onlyb" => Ok(Method::OnlyB),
            "3cosadd" => Ok(Method::ThreeCosAdd),
            "3cosavg" => Ok(Method::ThreeCosAvg),
            "cosclassavg" => Ok(Method::CosClassAvg),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

pub fn only_b<T: Real>(singular: &[T]) -> Vec<T> {
    singular.to_vec()
}

/// `prime_pl − prime_sg + singular`.
pub fn three_cos_add<T: Real>(prime_sg: &[T], prime_pl: &[T], singular: &[T]) -> Result<Vec<T>> {
    if prime_sg.len() != prime_pl.len() || prime_sg.len() != singular.len() {
        return Err(Error::DimensionMismatch {
            expected: singular.len(),
            got: if prime_sg.len() != singular.len() { prime_sg.len() } else { prime_pl.len() },
        });
    }
    Ok(prime_pl
        .iter()
        .zip(prime_sg)
        .zip(singular)
        .map(|((&p, &s), &b)| p - s + b)
        .collect())
}

/// `singular + average shift`.
pub fn three_cos_avg<T: Real>(avg_shift: &[T], singular: &[T]) -> Result<Vec<T>> {
    add(singular, avg_shift)
}

/// `singular + shift of the word's class`; the class must exist and be at or
/// above the table's member minimum.
pub fn cos_class_avg<T: Real>(
    classes: &ClassShiftTable<T>,
    class_of: &HashMap<String, String>,
    word: &str,
    singular: &[T],
) -> Result<Vec<T>> {
    let class = class_of
        .get(word)
        .ok_or_else(|| Error::Miss(format!("class assignment for {word}")))?;
    add(singular, classes.usable(class)?)
}

/// Singular word → class label, taken from a labelled pair set.
pub fn class_assignment<T: Real>(pairs: &PairSet, table: &Embeddings<T>) -> HashMap<String, String> {
    pairs
        .pairs()
        .iter()
        .filter_map(|p| p.class.as_ref().map(|c| (table.word(p.singular).to_owned(), c.clone())))
        .collect()
}

/// A configured predictor with all of its parameters.
#[derive(Debug, Clone)]
pub enum Pluralizer<T> {
    OnlyB,
    ThreeCosAdd {
        prime_singular: Vec<T>,
        prime_plural: Vec<T>,
    },
    ThreeCosAvg {
        shift: Vec<T>,
    },
    CosClassAvg {
        classes: ClassShiftTable<T>,
        class_of: HashMap<String, String>,
    },
}

impl<T: Real> Pluralizer<T> {
    pub fn method(&self) -> Method {
        match self {
            Pluralizer::OnlyB => Method::OnlyB,
            Pluralizer::ThreeCosAdd { .. } => Method::ThreeCosAdd,
            Pluralizer::ThreeCosAvg { .. } => Method::ThreeCosAvg,
            Pluralizer::CosClassAvg { .. } => Method::CosClassAvg,
        }
    }

    /// Checks parameter dimensions against an embedding dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |len: usize| {
            if len == dim {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected: dim, got: len })
            }
        };
        match self {
            Pluralizer::OnlyB => Ok(()),
            Pluralizer::ThreeCosAdd {
                prime_singular,
                prime_plural,
            } => check(prime_singular.len()).and(check(prime_plural.len())),
            Pluralizer::ThreeCosAvg { shift } => check(shift.len()),
            Pluralizer::CosClassAvg { classes, .. } => {
                classes.classes.values().try_for_each(|c| check(c.shift.len()))
            }
        }
    }

    pub fn predict(&self, word: &str, singular: &[T]) -> Result<Vec<T>> {
        match self {
            Pluralizer::OnlyB => Ok(only_b(singular)),
            Pluralizer::ThreeCosAdd {
                prime_singular,
                prime_plural,
            } => three_cos_add(prime_singular, prime_plural, singular),
            Pluralizer::ThreeCosAvg { shift } => three_cos_avg(shift, singular),
            Pluralizer::CosClassAvg { classes, class_of } => cos_class_avg(classes, class_of, word, singular),
        }
    }
}

/// Candidate pool for evaluation: every word of the pair set, optionally
/// without the singulars.
pub fn dataset_pool(pairs: &PairSet, filter_singulars: bool) -> CandidatePool {
    let pool = CandidatePool::from_ids(pairs.word_ids());
    if filter_singulars {
        pool.excluding(&pairs.singular_ids())
    } else {
        pool
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairOutcome {
    pub singular: String,
    pub plural: String,
    /// Rank of the gold plural; `None` when no prediction could be made.
    pub rank: Option<usize>,
    pub failure: Option<String>,
    pub cos_to_plural: Option<f64>,
    pub dist_to_plural: Option<f64>,
    pub cos_to_singular: Option<f64>,
    pub dist_to_singular: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub method: Method,
    pub metric: Metric,
    pub candidate_count: usize,
    pub outcomes: Vec<PairOutcome>,
    pub topn: Vec<TopN>,
}

impl EvalReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.rank.is_none()).count()
    }

    pub fn write_ranks_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "singular",
            "plural",
            "rank",
            "failure",
            "cos_to_plural",
            "dist_to_plural",
            "cos_to_singular",
            "dist_to_singular",
        ])
        .map_err(csv_err)?;
        let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        for o in &self.outcomes {
            w.write_record([
                o.singular.clone(),
                o.plural.clone(),
                o.rank.map(|r| r.to_string()).unwrap_or_default(),
                o.failure.clone().unwrap_or_default(),
                f(o.cos_to_plural),
                f(o.dist_to_plural),
                f(o.cos_to_singular),
                f(o.dist_to_singular),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes one row per report: `method,metric,candidates,failures,top<n>...`.
pub fn write_topn_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ns: Vec<usize> = reports
        .first()
        .map(|r| r.topn.iter().map(|t| t.n).collect())
        .unwrap_or_default();
    let mut header = vec!["method".to_owned(), "metric".into(), "candidates".into(), "failures".into()];
    header.extend(ns.iter().map(|n| format!("top{n}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in reports {
        let mut row = vec![
            r.method.label().to_owned(),
            r.metric.name().to_owned(),
            r.candidate_count.to_string(),
            r.failures().to_string(),
        ];
        row.extend(r.topn.iter().map(|t| format!("{:.2}", t.percent)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Predicts a plural for every pair and ranks the gold plural within
/// `pool` (the gold plural always competes, even if the pool omits it).
/// Pairs whose prediction fails are recorded and count as misses.
pub fn evaluate_pluralizer<T: Real>(
    pluralizer: &Pluralizer<T>,
    pairs: &PairSet,
    table: &Embeddings<T>,
    pool: &CandidatePool,
    metric: Metric,
    ns: &[usize],
) -> Result<EvalReport> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    pluralizer.validate(table.dim())?;
    let searcher = Searcher::new(table, metric);
    let outcomes: Vec<PairOutcome> = pairs
        .pairs()
        .par_iter()
        .map(|p| {
            let sg_word = table.word(p.singular);
            let (sg, pl) = (table.row(p.singular), table.row(p.plural));
            let mut outcome = PairOutcome {
                singular: sg_word.to_owned(),
                plural: table.word(p.plural).to_owned(),
                rank: None,
                failure: None,
                cos_to_plural: None,
                dist_to_plural: None,
                cos_to_singular: None,
                dist_to_singular: None,
            };
            let ranked = pluralizer.predict(sg_word, sg).and_then(|pred| {
                outcome.cos_to_plural = cosine(&pred, pl).ok().map(Real::as_f64);
                outcome.dist_to_plural = euclidean(&pred, pl).ok().map(Real::as_f64);
                outcome.cos_to_singular = cosine(&pred, sg).ok().map(Real::as_f64);
                outcome.dist_to_singular = euclidean(&pred, sg).ok().map(Real::as_f64);
                searcher.rank_of(&pred, p.plural, pool, &[p.plural])
            });
            match ranked {
                Ok(r) => outcome.rank = Some(r.rank),
                Err(e) => outcome.failure = Some(e.to_string()),
            }
            outcome
        })
        .collect();
    let ranks: Vec<Option<usize>> = outcomes.iter().map(|o| o.rank).collect();
    Ok(EvalReport {
        method: pluralizer.method(),
        metric,
        candidate_count: pool.len(),
        topn: topn_from_ranks(&ranks, ns)?,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shifts::{class_avg_shifts, PairRecord};

    fn table(rows: &[(&str, &[f64])]) -> Embeddings<f64> {
        Embeddings::from_rows(
            rows.iter().map(|(w, _)| w.to_string()).collect(),
            rows.iter().map(|(_, v)| v.to_vec()).collect(),
        )
        .unwrap()
    }

    fn recs(spec: &[(&str, &str, &str)]) -> Vec<PairRecord> {
        spec.iter()
            .map(|(s, p, c)| PairRecord {
                singular: s.to_string(),
                plural: p.to_string(),
                class: Some(c.to_string()),
            })
            .collect()
    }

    #[test]
    fn predictor_arithmetic() {
        assert_eq!(only_b(&[1.0, 2.0]), vec![1.0, 2.0]);
        assert_eq!(only_b(&[0.0, 0.0]), vec![0.0, 0.0]);
        let v = [0.1f64, -3.7e-9];
        assert!(only_b(&v).iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));

        assert_eq!(three_cos_add(&[1.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]).unwrap(), vec![2.0, 1.0]);
        assert_eq!(three_cos_add(&[4.0, 4.0], &[4.0, 4.0], &[2.0, 7.0]).unwrap(), vec![2.0, 7.0]);
        let banana = three_cos_add(&[0.0, 3.0], &[1.0, 5.0], &[2.0, 0.0]).unwrap();
        let pen = three_cos_add(&[1.0, 0.0], &[1.0, 1.0], &[2.0, 0.0]).unwrap();
        assert_ne!(banana, pen);
        assert!(three_cos_add(&[1.0], &[1.0, 1.0], &[2.0, 0.0]).is_err());

        let p = three_cos_avg::<f64>(&[2.0 / 3.0, 1.0], &[5.0, 5.0]).unwrap();
        assert!((p[0] - 17.0 / 3.0).abs() < 1e-15 && p[1] == 6.0);
        assert_eq!(three_cos_avg(&[0.0, 0.0], &[5.0, 5.0]).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn class_predictions() {
        let t = table(&[
            ("a", &[0.0, 0.0]),
            ("as", &[1.0, 0.0]),
            ("b", &[5.0, 5.0]),
            ("bs", &[6.0, 5.0]),
            ("c", &[5.0, 5.0]),
            ("cs", &[5.0, 6.0]),
        ]);
        let (p, _) = PairSet::resolve(&t, &recs(&[("a", "as", "A"), ("b", "bs", "A"), ("c", "cs", "B")]), "t").unwrap();
        let ct = class_avg_shifts(&p, &t, 1).unwrap();
        let map = class_assignment(&p, &t);
        assert_eq!(cos_class_avg(&ct, &map, "b", &[5.0, 5.0]).unwrap(), vec![6.0, 5.0]);
        assert_eq!(cos_class_avg(&ct, &map, "c", &[5.0, 5.0]).unwrap(), vec![5.0, 6.0]);
        assert!(cos_class_avg(&ct, &map, "zzz", &[5.0, 5.0]).is_err());
        let strict = class_avg_shifts(&p, &t, 2).unwrap();
        assert!(cos_class_avg(&strict, &map, "c", &[5.0, 5.0]).is_err());
    }

    #[test]
    fn only_b_perfect_when_plurals_are_nearest() {
        let t = table(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("as", &[1.0, 0.1, 0.0]),
            ("b", &[0.0, 0.0, 1.0]),
            ("bs", &[0.0, 0.1, 1.0]),
        ]);
        let (p, _) = PairSet::resolve(&t, &recs(&[("a", "as", "X"), ("b", "bs", "X")]), "t").unwrap();
        // filtering singulars leaves each plural as its singular's nearest candidate
        let pool = dataset_pool(&p, true);
        let r = evaluate_pluralizer(&Pluralizer::OnlyB, &p, &t, &pool, Metric::Cosine, &[1]).unwrap();
        assert_eq!(r.topn[0].percent, 100.0);
        let honest = dataset_pool(&p, false);
        let r = evaluate_pluralizer(&Pluralizer::OnlyB, &p, &t, &honest, Metric::Cosine, &[1, 2]).unwrap();
        assert_eq!(r.topn[0].percent, 0.0);
        assert_eq!(r.topn[1].percent, 100.0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let t = table(&[("a", &[1.0, 0.0]), ("as", &[1.0, 1.0]), ("b", &[0.0, 1.0]), ("bs", &[1.0, 2.0])]);
        let (p, _) = PairSet::resolve(&t, &recs(&[("a", "as", "X"), ("b", "bs", "Y")]), "t").unwrap();
        let mut ct = class_avg_shifts(&p, &t, 1).unwrap();
        ct.classes.remove("Y");
        let pl = Pluralizer::CosClassAvg {
            classes: ct,
            class_of: class_assignment(&p, &t),
        };
        let r = evaluate_pluralizer(&pl, &p, &t, &dataset_pool(&p, false), Metric::Cosine, &[1, 4]).unwrap();
        assert_eq!(r.failures(), 1);
        assert_eq!(r.topn[1].percent, 50.0);
        assert!(r.outcomes[1].failure.is_some());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert!("lrcos".parse::<Method>().is_err());
    }
}
