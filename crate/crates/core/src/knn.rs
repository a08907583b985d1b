//! Exact nearest-neighbour search and rank-of-target evaluation.
//!
//! Scores are cosine similarity, Pearson correlation (cosine of mean-centred
//! vectors) or Euclidean distance. Ties are broken by ascending word string,
//! so every list and rank is deterministic.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};
use crate::vecspace::{dot, norm, Embeddings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
    Pearson,
}

impl Metric {
    /// Similarities rank high-to-low, distances low-to-high.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Euclidean)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::Pearson => "pearson",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            "pearson" => Ok(Metric::Pearson),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// Pearson correlation, computed as the cosine of the mean-centred vectors.
pub fn pearson<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    crate::vecspace::cosine(&centered(u), &centered(v))
}

fn centered<T: Real>(v: &[T]) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mean = v.iter().fold(T::zero(), |a, &b| a + b) / from_usize(v.len());
    v.iter().map(|&x| x - mean).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QueryRef {
    Word(usize),
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor<T> {
    pub id: usize,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborList<T> {
    pub query: QueryRef,
    pub metric: Metric,
    pub entries: Vec<Neighbor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub target: usize,
    /// 1 = nearest.
    pub rank: usize,
    pub candidate_count: usize,
}

/// Sorted, duplicate-free set of candidate word ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    ids: Vec<usize>,
}

impl CandidatePool {
    pub fn all(n: usize) -> Self {
        Self { ids: (0..n).collect() }
    }

    pub fn from_ids(ids: impl IntoIterator<Item = usize>) -> Self {
        let mut ids: Vec<usize> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self { ids }
    }

    pub fn excluding(&self, exclude: &HashSet<usize>) -> Self {
        Self {
            ids: self.ids.iter().copied().filter(|i| !exclude.contains(i)).collect(),
        }
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A query vector preprocessed for one metric.
#[derive(Debug, Clone)]
pub struct PreparedQuery<T> {
    raw: Vec<T>,
    // unit-length (centred for Pearson) copy; unused for Euclidean
    unit: Vec<T>,
}

/// Read-only search structure over an embedding table with cached per-row
/// norms (centred norms for Pearson).
pub struct Searcher<'a, T> {
    table: &'a Embeddings<T>,
    metric: Metric,
    row_norms: Vec<T>,
}

impl<'a, T: Real> Searcher<'a, T> {
    pub fn new(table: &'a Embeddings<T>, metric: Metric) -> Self {
        let row_norms = match metric {
            Metric::Cosine => table.rows().map(norm).collect(),
            Metric::Pearson => table.rows().map(|r| norm(&centered(r))).collect(),
            Metric::Euclidean => Vec::new(),
        };
        Self {
            table,
            metric,
            row_norms,
        }
    }

    pub fn table(&self) -> &'a Embeddings<T> {
        self.table
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn prepare(&self, query: &[T]) -> Result<PreparedQuery<T>> {
        if query.len() != self.table.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.table.dim(),
                got: query.len(),
            });
        }
        let unit = match self.metric {
            Metric::Euclidean => Vec::new(),
            Metric::Cosine | Metric::Pearson => {
                let base = if self.metric == Metric::Pearson {
                    centered(query)
                } else {
                    query.to_vec()
                };
                let n = norm(&base);
                if n == T::zero() {
                    return Err(Error::ZeroVector);
                }
                base.into_iter().map(|x| x / n).collect()
            }
        };
        Ok(PreparedQuery {
            raw: query.to_vec(),
            unit,
        })
    }

    /// Score of one row; `None` when the row has no direction (zero or
    /// constant vector under an angular metric) and so ranks last.
    pub fn score(&self, query: &PreparedQuery<T>, id: usize) -> Option<T> {
        let row = self.table.row(id);
        match self.metric {
            Metric::Euclidean => Some(
                query
                    .raw
                    .iter()
                    .zip(row)
                    .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
                    .sqrt(),
            ),
            Metric::Cosine | Metric::Pearson => {
                let n = self.row_norms[id];
                if n == T::zero() {
                    None
                } else {
                    // centring the row is unnecessary: the unit query sums to zero
                    Some((dot(&query.unit, row) / n).clamp(-T::one(), T::one()))
                }
            }
        }
    }

    /// Total order on (score, word): `Less` means `a` ranks ahead of `b`.
    fn order(&self, a: (usize, Option<T>), b: (usize, Option<T>)) -> Ordering {
        let by_score = match (a.1, b.1) {
            (Some(x), Some(y)) => {
                let o = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
                if self.metric.higher_is_better() {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_score.then_with(|| self.table.word(a.0).cmp(self.table.word(b.0)))
    }

    pub fn top_k(&self, query: &[T], k: usize, pool: &CandidatePool) -> Result<NeighborList<T>> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if k > pool.len() {
            return Err(Error::invalid(format!(
                "k = {k} exceeds {} candidates",
                pool.len()
            )));
        }
        let q = self.prepare(query)?;
        let mut scored: Vec<(usize, Option<T>)> =
            pool.ids().iter().map(|&id| (id, self.score(&q, id))).collect();
        let cmp = |a: &(usize, Option<T>), b: &(usize, Option<T>)| self.order(*a, *b);
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        let worst = if self.metric.higher_is_better() {
            -T::one() - T::one()
        } else {
            T::max_value().unwrap_or_else(T::one)
        };
        Ok(NeighborList {
            query: QueryRef::External,
            metric: self.metric,
            entries: scored
                .into_iter()
                .map(|(id, s)| Neighbor {
                    id,
                    score: s.unwrap_or(worst),
                })
                .collect(),
        })
    }

    /// 1-based rank of `target` among `pool ∪ extra`.
    pub fn rank_of(
        &self,
        query: &[T],
        target: usize,
        pool: &CandidatePool,
        extra: &[usize],
    ) -> Result<RankResult> {
        let q = self.prepare(query)?;
        self.rank_prepared(&q, target, pool, extra)
    }

    fn rank_prepared(
        &self,
        q: &PreparedQuery<T>,
        target: usize,
        pool: &CandidatePool,
        extra: &[usize],
    ) -> Result<RankResult> {
        let mut extra: Vec<usize> = extra.iter().copied().filter(|&i| !pool.contains(i)).collect();
        extra.sort_unstable();
        extra.dedup();
        if !pool.contains(target) && extra.binary_search(&target).is_err() {
            return Err(Error::Miss(format!(
                "target {} not in candidate pool",
                self.table.word(target)
            )));
        }
        let t = (target, self.score(q, target));
        let mut ahead = 0usize;
        for &id in pool.ids().iter().chain(&extra) {
            if id != target && self.order((id, self.score(q, id)), t) == Ordering::Less {
                ahead += 1;
            }
        }
        Ok(RankResult {
            target,
            rank: ahead + 1,
            candidate_count: pool.len() + extra.len(),
        })
    }

    /// Ranks a batch of (query, target) pairs in parallel; output order
    /// follows input order and each result is independent of the batching.
    pub fn rank_batch(
        &self,
        queries: &[(Vec<T>, usize)],
        pool: &CandidatePool,
    ) -> Vec<Result<RankResult>> {
        queries
            .par_iter()
            .map(|(q, target)| self.rank_of(q, *target, pool, &[]))
            .collect()
    }
}

/// The `k` best candidates over the whole table minus `exclude`.
pub fn top_k<T: Real>(
    query: &[T],
    table: &Embeddings<T>,
    k: usize,
    metric: Metric,
    exclude: Option<&HashSet<usize>>,
) -> Result<NeighborList<T>> {
    let pool = CandidatePool::all(table.len());
    let pool = match exclude {
        Some(ex) => pool.excluding(ex),
        None => pool,
    };
    Searcher::new(table, metric).top_k(query, k, &pool)
}

/// Rank of `target` among `pool ∪ extra`, e.g. training types plus the
/// current test item.
pub fn rank_of<T: Real>(
    query: &[T],
    target: usize,
    table: &Embeddings<T>,
    metric: Metric,
    pool: &CandidatePool,
    extra: &[usize],
) -> Result<RankResult> {
    Searcher::new(table, metric).rank_of(query, target, pool, extra)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopN {
    pub n: usize,
    pub percent: f64,
}

/// Percentage of results with rank ≤ n, for each n.
pub fn topn_table(results: &[RankResult], ns: &[usize]) -> Result<Vec<TopN>> {
    let ranks: Vec<Option<usize>> = results.iter().map(|r| Some(r.rank)).collect();
    topn_from_ranks(&ranks, ns)
}

/// Like [`topn_table`]; `None` entries are failed predictions and count as
/// misses at every n.
pub fn topn_from_ranks(ranks: &[Option<usize>], ns: &[usize]) -> Result<Vec<TopN>> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank results"));
    }
    if ns.contains(&0) {
        return Err(Error::invalid("top-n cut-offs must be positive"));
    }
    let total = ranks.len() as f64;
    Ok(ns
        .iter()
        .map(|&n| {
            let hits = ranks.iter().filter(|r| matches!(r, Some(k) if *k <= n)).count();
            TopN {
                n,
                percent: 100.0 * hits as f64 / total,
            }
        })
        .collect())
}

/// Writes `query,rank,word,score` rows, scores with six decimals.
pub fn write_neighbors_csv<T: Real, W: Write>(
    out: W,
    table: &Embeddings<T>,
    lists: &[(String, NeighborList<T>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query", "rank", "word", "score"]).map_err(csv_err)?;
    for (label, list) in lists {
        for (i, e) in list.entries.iter().enumerate() {
            w.write_record([
                label.clone(),
                (i + 1).to_string(),
                table.word(e.id).to_owned(),
                format!("{:.6}", e.score),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Stream(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Embeddings<f64> {
        Embeddings::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    fn words(t: &Embeddings<f64>, l: &NeighborList<f64>) -> Vec<String> {
        l.entries.iter().map(|e| t.word(e.id).to_owned()).collect()
    }

    #[test]
    fn top_k_examples() {
        let t = toy();
        let l = top_k(&[1.0, 1.0], &t, 3, Metric::Cosine, None).unwrap();
        assert_eq!(words(&t, &l), ["c", "a", "b"]);
        let l = top_k(&[0.9, 0.1], &t, 1, Metric::Cosine, None).unwrap();
        assert_eq!(words(&t, &l), ["a"]);
        let ex: HashSet<usize> = [2].into();
        let l = top_k(&[1.0, 1.0], &t, 1, Metric::Cosine, Some(&ex)).unwrap();
        assert_eq!(words(&t, &l), ["a"]);
        assert!(top_k(&[1.0, 1.0], &t, 3, Metric::Cosine, Some(&ex)).is_err());
        assert!(matches!(
            top_k(&[0.0, 0.0], &t, 1, Metric::Cosine, None),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn rank_examples() {
        let t = toy();
        let pool = CandidatePool::from_ids([0, 1]);
        let r = rank_of(&[0.6, 0.8], 0, &t, Metric::Cosine, &pool, &[]).unwrap();
        assert_eq!(r.rank, 2);
        assert_eq!(r.candidate_count, 2);
        let r = rank_of(&[1.0, 1.0], 2, &t, Metric::Euclidean, &pool, &[2]).unwrap();
        assert_eq!((r.rank, r.candidate_count), (1, 3));
        assert!(rank_of(&[1.0, 1.0], 2, &t, Metric::Cosine, &pool, &[]).is_err());
    }

    #[test]
    fn topn_examples() {
        let r = |rank| RankResult {
            target: 0,
            rank,
            candidate_count: 10,
        };
        let t = topn_table(&[r(1), r(1), r(3)], &[1, 2, 3]).unwrap();
        let p: Vec<f64> = t.iter().map(|x| x.percent).collect();
        assert!((p[0] - 66.666_666).abs() < 1e-3 && (p[1] - 66.666_666).abs() < 1e-3);
        assert_eq!(p[2], 100.0);
        assert!(topn_table(&[r(1), r(1)], &[1, 5]).unwrap().iter().all(|x| x.percent == 100.0));
        assert_eq!(topn_table(&[r(5)], &[1]).unwrap()[0].percent, 0.0);
        assert!(topn_table(&[], &[1]).is_err());
        assert_eq!(topn_from_ranks(&[None, Some(1)], &[1]).unwrap()[0].percent, 50.0);
    }

    #[test]
    fn pearson_equals_centered_cosine_and_searcher() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t = Embeddings::from_rows((0..40).map(|i| format!("w{i}")).collect(), rows).unwrap();
        let q: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = Searcher::new(&t, Metric::Pearson);
        let pq = s.prepare(&q).unwrap();
        for id in 0..t.len() {
            let direct = pearson(&q, t.row(id)).unwrap();
            assert!((direct - s.score(&pq, id).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbor_csv_format() {
        let t = toy();
        let l = top_k(&[1.0, 1.0], &t, 2, Metric::Cosine, None).unwrap();
        let mut buf = Vec::new();
        write_neighbors_csv(&mut buf, &t, &[("q".into(), l)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "query,rank,word,score\nq,1,c,1.000000\nq,2,a,0.707107\n");
    }
}
