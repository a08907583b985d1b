//! Linear maps between semantic spaces fitted by (ridge) least squares.
//!
//! `B` minimises `‖XB − Y‖_F² + λ‖B‖_F²` where rows of `X` are inputs (e.g.
//! singular vectors) and rows of `Y` targets (plural vectors). The solve goes
//! through the SVD of `X`, never through an explicit `(XᵀX)⁻¹`; with `λ = 0`
//! and a rank-deficient `X` it returns the minimum-norm solution, dropping
//! singular values at or below the rank tolerance.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::{csv_err, topn_from_ranks, CandidatePool, Metric, Searcher, TopN};
use crate::scalar::{from_usize, Real};
use crate::shifts::PairSet;
use crate::stats::mean_sd;
use crate::vecspace::{norm, Embeddings};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitMeta {
    pub rows: usize,
    pub rank: usize,
    pub residual: f64,
}

/// Dense `d_in × d_out` map applied as `v ↦ vB`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap<T: Real> {
    pub matrix: DMatrix<T>,
    pub ridge: T,
    pub rank_tolerance: T,
    /// Present for fitted maps; absent for maps read from disk.
    pub meta: Option<FitMeta>,
}

impl<T: Real> LinearMap<T> {
    pub fn new(matrix: DMatrix<T>) -> Self {
        Self {
            matrix,
            ridge: T::zero(),
            rank_tolerance: T::zero(),
            meta: None,
        }
    }

    pub fn d_in(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.matrix.ncols()
    }

    /// Text form: `d_in d_out ridge` header, then `d_in` rows of `d_out`
    /// values in shortest round-trip decimal.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.d_in(), self.d_out(), self.ridge)?;
        for i in 0..self.d_in() {
            let row: Vec<String> = (0..self.d_out()).map(|j| self.matrix[(i, j)].to_string()).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn parse<R: Read>(reader: BufReader<R>) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        let bad = || Error::parse(1, format!("malformed map header {header:?}"));
        if h.len() != 3 {
            return Err(bad());
        }
        let d_in: usize = h[0].parse().map_err(|_| bad())?;
        let d_out: usize = h[1].parse().map_err(|_| bad())?;
        let ridge: T = h[2].parse().map_err(|_| bad())?;
        let mut data = Vec::with_capacity(d_in * d_out);
        let mut rows = 0;
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for f in line.split_whitespace() {
                let x: T = f.parse().map_err(|_| Error::parse(n + 2, format!("bad number {f:?}")))?;
                if !x.is_finite_value() {
                    return Err(Error::NonFinite(f.to_owned()));
                }
                data.push(x);
            }
            if data.len() - before != d_out {
                return Err(Error::parse(n + 2, format!("expected {d_out} values")));
            }
            rows += 1;
        }
        if rows != d_in {
            return Err(Error::parse(0, format!("expected {d_in} rows, found {rows}")));
        }
        Ok(Self {
            matrix: DMatrix::from_row_slice(d_in, d_out, &data),
            ridge,
            rank_tolerance: T::zero(),
            meta: None,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file))
    }
}

/// Stacks table rows into a `len(ids) × dim` matrix.
pub fn rows_matrix<T: Real>(table: &Embeddings<T>, ids: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(ids.len(), table.dim(), |i, j| table.row(ids[i])[j])
}

fn check_finite<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite_value()) {
        return Err(Error::NonFinite(format!("entry of {what}")));
    }
    Ok(())
}

/// Default rank tolerance: `ε · max(t, d) · σ_max`.
pub fn default_rank_tolerance<T: Real>(rows: usize, cols: usize, sigma_max: T) -> T {
    T::eps() * from_usize::<T>(rows.max(cols)) * sigma_max
}

pub fn fit_linear_map<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>, ridge: T) -> Result<LinearMap<T>> {
    fit_linear_map_with(x, y, ridge, None)
}

/// As [`fit_linear_map`] with an explicit rank tolerance.
pub fn fit_linear_map_with<T: Real>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    ridge: T,
    rank_tolerance: Option<T>,
) -> Result<LinearMap<T>> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
        return Err(Error::Empty("design matrix"));
    }
    if ridge < T::zero() || !ridge.is_finite_value() {
        return Err(Error::invalid("ridge weight must be finite and nonnegative"));
    }
    check_finite(x, "X")?;
    check_finite(y, "Y")?;

    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("Vᵀ requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let tol = rank_tolerance.unwrap_or_else(|| default_rank_tolerance(x.nrows(), x.ncols(), sigma_max));

    let mut rank = 0;
    let factors = DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|&s| {
            if s > tol {
                rank += 1;
            }
            if ridge > T::zero() {
                s / (s * s + ridge)
            } else if s > tol {
                T::one() / s
            } else {
                T::zero()
            }
        }),
    );
    // B = V · diag(f(σ)) · Uᵀ Y
    let mut uty = u.transpose() * y;
    for (mut row, &f) in uty.row_iter_mut().zip(factors.iter()) {
        row *= f;
    }
    let b = v_t.transpose() * uty;
    let residual = (x * &b - y).norm();
    Ok(LinearMap {
        matrix: b,
        ridge,
        rank_tolerance: tol,
        meta: Some(FitMeta {
            rows: x.nrows(),
            rank,
            residual: residual.as_f64(),
        }),
    })
}

/// Fits the map in the opposite direction (targets → inputs).
pub fn fit_inverse<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>, ridge: T) -> Result<LinearMap<T>> {
    fit_linear_map(y, x, ridge)
}

/// `v · B`, i.e. output `j` is `Σ_i b_ij · v_i`.
pub fn apply_map<T: Real>(map: &LinearMap<T>, v: &[T]) -> Result<Vec<T>> {
    if v.len() != map.d_in() {
        return Err(Error::DimensionMismatch {
            expected: map.d_in(),
            got: v.len(),
        });
    }
    Ok((0..map.d_out())
        .map(|j| {
            map.matrix
                .column(j)
                .iter()
                .zip(v)
                .fold(T::zero(), |acc, (&b, &x)| acc + b * x)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalProfile {
    pub diag_mean: f64,
    pub diag_sd: f64,
    pub offdiag_mean: f64,
    pub offdiag_sd: f64,
}

/// Mean and sample sd of the `d` diagonal and `d² − d` off-diagonal entries.
pub fn diagonal_profile<T: Real>(map: &LinearMap<T>) -> Result<DiagonalProfile> {
    let d = map.d_in();
    if d != map.d_out() {
        return Err(Error::invalid(format!("map is {d}×{}, not square", map.d_out())));
    }
    let mut diag = Vec::with_capacity(d);
    let mut off = Vec::with_capacity(d * d - d);
    for i in 0..d {
        for j in 0..d {
            let x = map.matrix[(i, j)].as_f64();
            if i == j {
                diag.push(x);
            } else {
                off.push(x);
            }
        }
    }
    let (diag_mean, diag_sd) = mean_sd(&diag);
    let (offdiag_mean, offdiag_sd) = if off.is_empty() { (0.0, 0.0) } else { mean_sd(&off) };
    Ok(DiagonalProfile {
        diag_mean,
        diag_sd,
        offdiag_mean,
        offdiag_sd,
    })
}

/// Residuals of the scalar approximation `XB ≈ c·X + ε`, summarised both over
/// all entries and per row (mean of per-row means and sds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationResiduals {
    pub scale: f64,
    pub elementwise_mean: f64,
    pub elementwise_sd: f64,
    pub rowwise_mean_of_means: f64,
    pub rowwise_mean_of_sds: f64,
    /// `ε` rows, for external normality checks.
    pub rows: Vec<Vec<f64>>,
}

pub fn approximation_residuals<T: Real>(map: &LinearMap<T>, x: &DMatrix<T>, scale: f64) -> Result<ApproximationResiduals> {
    if x.ncols() != map.d_in() || map.d_in() != map.d_out() {
        return Err(Error::DimensionMismatch {
            expected: map.d_in(),
            got: x.ncols(),
        });
    }
    let pred = x * &map.matrix;
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .map(|i| {
            (0..x.ncols())
                .map(|j| pred[(i, j)].as_f64() - scale * x[(i, j)].as_f64())
                .collect()
        })
        .collect();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let (elementwise_mean, elementwise_sd) = mean_sd(&flat);
    let per_row: Vec<(f64, f64)> = rows.iter().map(|r| mean_sd(r)).collect();
    let means: Vec<f64> = per_row.iter().map(|p| p.0).collect();
    let sds: Vec<f64> = per_row.iter().map(|p| p.1).collect();
    Ok(ApproximationResiduals {
        scale,
        elementwise_mean,
        elementwise_sd,
        rowwise_mean_of_means: mean_sd(&means).0,
        rowwise_mean_of_sds: mean_sd(&sds).0,
        rows,
    })
}

/// Seeded uniform split of `n` items into (train, test) index lists, with
/// `round(n · test_fraction)` test items. Both lists are ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid("test fraction must lie in [0, 1)"));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Singular → plural.
    Forward,
    /// Plural → singular.
    Inverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapOutcome {
    pub source: String,
    pub target: String,
    pub rank: Option<usize>,
    pub input_len: f64,
    pub predicted_len: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEvalReport {
    pub direction: Direction,
    pub metric: Metric,
    pub candidate_count: usize,
    pub topn: Vec<TopN>,
    /// Fraction of predictions shorter than their input vector.
    pub shorter_fraction: f64,
    pub outcomes: Vec<MapOutcome>,
}

impl MapEvalReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "rank", "input_len", "predicted_len"])
            .map_err(csv_err)?;
        for o in &self.outcomes {
            w.write_record([
                o.source.clone(),
                o.target.clone(),
                o.rank.map(|r| r.to_string()).unwrap_or_default(),
                format!("{:.6}", o.input_len),
                format!("{:.6}", o.predicted_len),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps every pair's source vector and ranks the gold target in `pool`.
pub fn evaluate_map<T: Real>(
    map: &LinearMap<T>,
    pairs: &PairSet,
    table: &Embeddings<T>,
    pool: &CandidatePool,
    metric: Metric,
    ns: &[usize],
    direction: Direction,
) -> Result<MapEvalReport> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let searcher = Searcher::new(table, metric);
    let outcomes: Vec<MapOutcome> = pairs
        .pairs()
        .par_iter()
        .map(|p| {
            let (src, tgt) = match direction {
                Direction::Forward => (p.singular, p.plural),
                Direction::Inverse => (p.plural, p.singular),
            };
            let input = table.row(src);
            let (rank, predicted_len) = match apply_map(map, input) {
                Ok(pred) => (
                    searcher.rank_of(&pred, tgt, pool, &[tgt]).ok().map(|r| r.rank),
                    norm(&pred).as_f64(),
                ),
                Err(_) => (None, f64::NAN),
            };
            MapOutcome {
                source: table.word(src).to_owned(),
                target: table.word(tgt).to_owned(),
                rank,
                input_len: norm(input).as_f64(),
                predicted_len,
            }
        })
        .collect();
    let ranks: Vec<Option<usize>> = outcomes.iter().map(|o| o.rank).collect();
    let shorter = outcomes.iter().filter(|o| o.predicted_len < o.input_len).count();
    Ok(MapEvalReport {
        direction,
        metric,
        candidate_count: pool.len(),
        topn: topn_from_ranks(&ranks, ns)?,
        shorter_fraction: shorter as f64 / outcomes.len() as f64,
        outcomes,
    })
}

/// Fits a map on a pair set: singular → plural, or the reverse.
pub fn fit_pairs<T: Real>(pairs: &PairSet, table: &Embeddings<T>, ridge: T, direction: Direction) -> Result<LinearMap<T>> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let sg: Vec<usize> = pairs.pairs().iter().map(|p| p.singular).collect();
    let pl: Vec<usize> = pairs.pairs().iter().map(|p| p.plural).collect();
    let (x, y) = (rows_matrix(table, &sg), rows_matrix(table, &pl));
    match direction {
        Direction::Forward => fit_linear_map(&x, &y, ridge),
        Direction::Inverse => fit_inverse(&x, &y, ridge),
    }
}
