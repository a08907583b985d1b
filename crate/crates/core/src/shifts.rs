//! Singular/plural pair sets, individual / average / class-conditional shift
//! vectors, and their length and angle statistics.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::csv_err;
use crate::scalar::{from_usize, Real};
use crate::stats::Summary;
use crate::vecspace::{angle_to_axis, mean_vector, norm, sub, AxisRef, Embeddings};

/// One line of a pairs file before resolution against a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub singular: String,
    pub plural: String,
    pub class: Option<String>,
}

/// Parses `singular<TAB>plural[<TAB>class]` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs_tsv<R: Read>(reader: BufReader<R>) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let class = match fields.len() {
            2 => None,
            3 if fields[2].is_empty() => None,
            3 => Some(fields[2].to_owned()),
            k => return Err(Error::parse(n + 1, format!("expected 2 or 3 tab-separated fields, got {k}"))),
        };
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::parse(n + 1, "empty word field"));
        }
        out.push(PairRecord {
            singular: fields[0].to_owned(),
            plural: fields[1].to_owned(),
            class,
        });
    }
    Ok(out)
}

pub fn read_pairs_tsv(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_pairs_tsv(BufReader::new(file))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Pair {
    pub singular: usize,
    pub plural: usize,
    pub class: Option<String>,
}

/// A record whose words are missing from the embedding table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unresolved {
    pub record: PairRecord,
    pub missing: Vec<String>,
}

/// Singular/plural pairs bound to the ids of one embedding table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pairs: Vec<Pair>,
    source: String,
}

impl PairSet {
    pub fn new(pairs: Vec<Pair>, source: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert((p.singular, p.plural)) {
                return Err(Error::Duplicate(format!("pair ({}, {})", p.singular, p.plural)));
            }
            if matches!(&p.class, Some(c) if c.trim().is_empty()) {
                return Err(Error::invalid("empty class label"));
            }
        }
        Ok(Self {
            pairs,
            source: source.into(),
        })
    }

    /// Resolves records against `table`. Records with missing words are
    /// returned separately rather than dropped silently.
    pub fn resolve<T: Real>(
        table: &Embeddings<T>,
        records: &[PairRecord],
        source: impl Into<String>,
    ) -> Result<(Self, Vec<Unresolved>)> {
        let mut pairs = Vec::with_capacity(records.len());
        let mut misses = Vec::new();
        for r in records {
            match (table.lookup(&r.singular), table.lookup(&r.plural)) {
                (Some(singular), Some(plural)) => pairs.push(Pair {
                    singular,
                    plural,
                    class: r.class.clone(),
                }),
                (s, p) => misses.push(Unresolved {
                    record: r.clone(),
                    missing: [(s, &r.singular), (p, &r.plural)]
                        .into_iter()
                        .filter(|(id, _)| id.is_none())
                        .map(|(_, w)| w.clone())
                        .collect(),
                }),
            }
        }
        Ok((Self::new(pairs, source)?, misses))
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sub-set by pair indices, keeping the source tag.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            source: self.source.clone(),
        }
    }

    /// Every word id appearing in the set, ascending.
    pub fn word_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.pairs.iter().flat_map(|p| [p.singular, p.plural]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn singular_ids(&self) -> HashSet<usize> {
        self.pairs.iter().map(|p| p.singular).collect()
    }
}

/// `v_pl − v_sg`.
pub fn shift_vector<T: Real>(pair: &Pair, table: &Embeddings<T>) -> Vec<T> {
    table
        .row(pair.plural)
        .iter()
        .zip(table.row(pair.singular))
        .map(|(&p, &s)| p - s)
        .collect()
}

/// Mean of the plural vectors minus mean of the singular vectors.
pub fn avg_shift<T: Real>(pairs: &PairSet, table: &Embeddings<T>) -> Result<Vec<T>> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let plurals: Vec<usize> = pairs.pairs.iter().map(|p| p.plural).collect();
    let singulars: Vec<usize> = pairs.pairs.iter().map(|p| p.singular).collect();
    avg_shift_sets(&plurals, &singulars, table)
}

/// Average shift between a plural set of size m and a singular set of size n
/// (m and n need not agree).
pub fn avg_shift_sets<T: Real>(plurals: &[usize], singulars: &[usize], table: &Embeddings<T>) -> Result<Vec<T>> {
    let mp = mean_vector(plurals.iter().map(|&i| table.row(i)))?;
    let ms = mean_vector(singulars.iter().map(|&i| table.row(i)))?;
    sub(&mp, &ms)
}

/// Mean of the individual shift vectors.
pub fn mean_of_shifts<T: Real>(pairs: &PairSet, table: &Embeddings<T>) -> Result<Vec<T>> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let shifts: Vec<Vec<T>> = pairs.pairs.iter().map(|p| shift_vector(p, table)).collect();
    mean_vector(shifts.iter().map(Vec::as_slice))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassShift<T> {
    pub shift: Vec<T>,
    pub count: usize,
    /// Fewer members than the table's minimum; not usable for prediction.
    pub under_threshold: bool,
}

/// Per-class average shift vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassShiftTable<T> {
    pub min_members: usize,
    pub classes: BTreeMap<String, ClassShift<T>>,
}

impl<T: Real> ClassShiftTable<T> {
    pub fn get(&self, class: &str) -> Option<&ClassShift<T>> {
        self.classes.get(class)
    }

    /// The class's shift if present and at or above the member minimum.
    pub fn usable(&self, class: &str) -> Result<&[T]> {
        match self.classes.get(class) {
            None => Err(Error::Miss(format!("class {class}"))),
            Some(c) if c.under_threshold => Err(Error::invalid(format!(
                "class {class} has {} members, fewer than {}",
                c.count, self.min_members
            ))),
            Some(c) => Ok(&c.shift),
        }
    }

    pub fn under_threshold(&self) -> impl Iterator<Item = (&str, usize)> {
        self.classes
            .iter()
            .filter(|(_, c)| c.under_threshold)
            .map(|(k, c)| (k.as_str(), c.count))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "count", "under_threshold", "shift_length"])
            .map_err(csv_err)?;
        for (label, c) in &self.classes {
            w.write_record([
                label.clone(),
                c.count.to_string(),
                c.under_threshold.to_string(),
                format!("{:.6}", norm(&c.shift)),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-class mean of individual shifts. Every pair must carry a label.
pub fn class_avg_shifts<T: Real>(
    pairs: &PairSet,
    table: &Embeddings<T>,
    min_members: usize,
) -> Result<ClassShiftTable<T>> {
    if min_members == 0 {
        return Err(Error::invalid("minimum class size must be positive"));
    }
    let mut sums: BTreeMap<String, (Vec<T>, usize)> = BTreeMap::new();
    for p in &pairs.pairs {
        let label = p.class.as_ref().ok_or_else(|| {
            Error::invalid(format!(
                "unlabeled pair ({}, {})",
                table.word(p.singular),
                table.word(p.plural)
            ))
        })?;
        let shift = shift_vector(p, table);
        let entry = sums
            .entry(label.clone())
            .or_insert_with(|| (vec![T::zero(); table.dim()], 0));
        entry.0.iter_mut().zip(&shift).for_each(|(a, &b)| *a += b);
        entry.1 += 1;
    }
    let classes = sums
        .into_iter()
        .map(|(label, (mut sum, count))| {
            let n: T = from_usize(count);
            sum.iter_mut().for_each(|x| *x /= n);
            (
                label,
                ClassShift {
                    shift: sum,
                    count,
                    under_threshold: count < min_members,
                },
            )
        })
        .collect();
    Ok(ClassShiftTable {
        min_members,
        classes,
    })
}

/// Lengths and angles for one pair; angles are `None` for zero vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairStat {
    pub singular_len: f64,
    pub plural_len: f64,
    pub shift_len: f64,
    pub singular_angle: Option<f64>,
    pub plural_angle: Option<f64>,
    pub shift_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftStats {
    pub per_pair: Vec<PairStat>,
    pub singular_len: Summary,
    pub plural_len: Summary,
    pub shift_len: Summary,
    pub singular_angle: Option<Summary>,
    pub plural_angle: Option<Summary>,
    pub shift_angle: Option<Summary>,
    /// Pairs whose shift is the zero vector (angle undefined).
    pub undefined_shift_angles: usize,
}

fn angle_or_none<T: Real>(v: &[T], axis: AxisRef) -> Result<Option<f64>> {
    match angle_to_axis(v, axis) {
        Ok(a) => Ok(Some(a.as_f64())),
        Err(Error::ZeroVector) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn shift_stats<T: Real>(pairs: &PairSet, table: &Embeddings<T>, axis: AxisRef) -> Result<ShiftStats> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair set"));
    }
    let per_pair = pairs
        .pairs
        .iter()
        .map(|p| {
            let (s, pl) = (table.row(p.singular), table.row(p.plural));
            let shift = shift_vector(p, table);
            Ok(PairStat {
                singular_len: norm(s).as_f64(),
                plural_len: norm(pl).as_f64(),
                shift_len: norm(&shift).as_f64(),
                singular_angle: angle_or_none(s, axis)?,
                plural_angle: angle_or_none(pl, axis)?,
                shift_angle: angle_or_none(&shift, axis)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&PairStat) -> f64| -> Vec<f64> { per_pair.iter().map(f).collect() };
    let angles = |f: fn(&PairStat) -> Option<f64>| -> Option<Summary> {
        let v: Vec<f64> = per_pair.iter().filter_map(f).collect();
        Summary::of(&v).ok()
    };
    Ok(ShiftStats {
        singular_len: Summary::of(&col(|r| r.singular_len))?,
        plural_len: Summary::of(&col(|r| r.plural_len))?,
        shift_len: Summary::of(&col(|r| r.shift_len))?,
        singular_angle: angles(|r| r.singular_angle),
        plural_angle: angles(|r| r.plural_angle),
        shift_angle: angles(|r| r.shift_angle),
        undefined_shift_angles: per_pair.iter().filter(|r| r.shift_angle.is_none()).count(),
        per_pair,
    })
}

impl ShiftStats {
    /// One row per pair: the (angle, length) and (‖sg‖, ‖pl‖), (‖sg‖, ‖shift‖)
    /// scatter coordinates. Undefined angles are written as empty fields.
    pub fn write_pairs_csv<T: Real, W: Write>(&self, out: W, pairs: &PairSet, table: &Embeddings<T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "singular",
            "plural",
            "class",
            "singular_len",
            "plural_len",
            "shift_len",
            "singular_angle",
            "plural_angle",
            "shift_angle",
        ])
        .map_err(csv_err)?;
        let fmt_opt = |a: Option<f64>| a.map(|x| format!("{x:.6}")).unwrap_or_default();
        for (p, r) in pairs.pairs().iter().zip(&self.per_pair) {
            w.write_record([
                table.word(p.singular).to_owned(),
                table.word(p.plural).to_owned(),
                p.class.clone().unwrap_or_default(),
                format!("{:.6}", r.singular_len),
                format!("{:.6}", r.plural_len),
                format!("{:.6}", r.shift_len),
                fmt_opt(r.singular_angle),
                fmt_opt(r.plural_angle),
                fmt_opt(r.shift_angle),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["group", "n", "median", "mean", "sd", "min", "max"])
            .map_err(csv_err)?;
        let rows = [
            ("singular_length", Some(&self.singular_len)),
            ("plural_length", Some(&self.plural_len)),
            ("shift_length", Some(&self.shift_len)),
            ("singular_angle", self.singular_angle.as_ref()),
            ("plural_angle", self.plural_angle.as_ref()),
            ("shift_angle", self.shift_angle.as_ref()),
        ];
        for (name, s) in rows {
            if let Some(s) = s {
                w.write_record([
                    name.to_owned(),
                    s.n.to_string(),
                    format!("{:.6}", s.median),
                    format!("{:.6}", s.mean),
                    format!("{:.6}", s.sd),
                    format!("{:.6}", s.min),
                    format!("{:.6}", s.max),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `singular<TAB>plural[<TAB>class]`, the format read by
/// [`parse_pairs_tsv`].
pub fn write_pairs_tsv<T: Real, W: Write>(mut out: W, pairs: &PairSet, table: &Embeddings<T>) -> Result<()> {
    for p in pairs.pairs() {
        write!(out, "{}\t{}", table.word(p.singular), table.word(p.plural))?;
        if let Some(c) = &p.class {
            write!(out, "\t{c}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Which vector of a pair to export for external projection (e.g. t-SNE).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Shift,
    Singular,
    Plural,
}

/// Writes `word<TAB>class<TAB>v1..vd`, one line per pair, labelled by the
/// singular word (plural word for [`ExportKind::Plural`]).
pub fn export_labeled_vectors<T: Real, W: Write>(
    mut out: W,
    pairs: &PairSet,
    table: &Embeddings<T>,
    kind: ExportKind,
) -> Result<()> {
    for p in pairs.pairs() {
        let (word, vector) = match kind {
            ExportKind::Shift => (p.singular, shift_vector(p, table)),
            ExportKind::Singular => (p.singular, table.row(p.singular).to_vec()),
            ExportKind::Plural => (p.plural, table.row(p.plural).to_vec()),
        };
        write!(out, "{}\t{}", table.word(word), p.class.as_deref().unwrap_or(""))?;
        for x in vector {
            write!(out, "\t{x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Singular, plural and shift lengths as three matched samples, in that order.
pub fn length_groups(stats: &ShiftStats) -> [Vec<f64>; 3] {
    [
        stats.per_pair.iter().map(|r| r.singular_len).collect(),
        stats.per_pair.iter().map(|r| r.plural_len).collect(),
        stats.per_pair.iter().map(|r| r.shift_len).collect(),
    ]
}
