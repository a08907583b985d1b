//! Dense word-embedding tables and the elementary vector measurements
//! (cosine, Euclidean distance, length, angle to a basis axis, mean).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Real};

/// Immutable word → vector table in the word2vec text layout.
///
/// Row `i` holds the vector of `words[i]`; ids are stable for the lifetime
/// of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings<T> {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<T>,
}

impl<T: Real> Embeddings<T> {
    /// Builds a table from words and equally sized rows.
    pub fn from_rows(words: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self> {
        if words.len() != rows.len() {
            return Err(Error::invalid(format!(
                "{} words but {} rows",
                words.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty("embedding rows"))?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for (word, row) in words.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite_value()) {
                return Err(Error::NonFinite(format!("{x} in row of {word}")));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(words, dim, data)
    }

    fn from_flat(words: Vec<String>, dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid word token {w:?}")));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Duplicate(w.clone()));
            }
        }
        Ok(Self {
            dim,
            words,
            index,
            data,
        })
    }

    /// Loads the text format: a `count dim` header followed by `count` rows of
    /// `word v1 .. vdim`.
    pub fn load(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(BufReader::new(file), expected_dim)
    }

    pub fn parse<R: Read>(reader: BufReader<R>, expected_dim: Option<usize>) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = loop {
            let Some((n, line)) = lines.next() else {
                return Err(Error::parse(1, "missing header"));
            };
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some((c, d)) if d > 0 => break (c, d),
                _ => return Err(Error::parse(n + 1, format!("malformed header {line:?}"))),
            }
        };
        if let Some(expected) = expected_dim {
            if expected != dim {
                return Err(Error::DimensionMismatch { expected, got: dim });
            }
        }

        let mut words = Vec::with_capacity(count);
        let mut seen = std::collections::HashSet::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (n, line) in lines {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            if !seen.insert(word.to_owned()) {
                return Err(Error::Duplicate(format!("{word} (line {})", n + 1)));
            }
            if words.len() == count {
                return Err(Error::parse(n + 1, format!("more than {count} rows")));
            }
            let start = data.len();
            for field in fields {
                let x: T = field
                    .parse()
                    .map_err(|_| Error::parse(n + 1, format!("bad number {field:?}")))?;
                if !x.is_finite_value() {
                    return Err(Error::NonFinite(format!("{field} in row of {word} (line {})", n + 1)));
                }
                data.push(x);
            }
            if data.len() - start != dim {
                return Err(Error::parse(
                    n + 1,
                    format!("row arity: expected {dim} values, got {}", data.len() - start),
                ));
            }
            words.push(word.to_owned());
        }
        if words.len() != count {
            return Err(Error::parse(
                0,
                format!("header declares {count} rows, found {}", words.len()),
            ));
        }
        Self::from_flat(words, dim, data)
    }

    /// Writes the text format. Values use the shortest decimal form that
    /// parses back to the same bits, so save/load/save is byte-stable.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, w) in self.words.iter().enumerate() {
            write!(out, "{w}")?;
            for x in self.row(i) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn lookup(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Like [`lookup`](Self::lookup) but a miss is an error naming the word.
    pub fn id(&self, word: &str) -> Result<usize> {
        self.lookup(word).ok_or_else(|| Error::Miss(word.to_owned()))
    }

    pub fn row(&self, id: usize) -> &[T] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn vector(&self, word: &str) -> Result<&[T]> {
        self.id(word).map(|id| self.row(id))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Returns a copy with every nonzero row scaled to unit length; zero rows
    /// stay zero.
    pub fn normalized(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.dim) {
            let n = norm(row);
            if n > T::zero() {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        Self {
            dim: self.dim,
            words: self.words.clone(),
            index: self.index.clone(),
            data,
        }
    }

    /// Builds a table restricted to the given ids, in the given order.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let words = ids.iter().map(|&i| self.words[i].clone()).collect();
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        Self::from_flat(words, self.dim, data)
    }
}

/// Reference to one standard basis axis `e_index` of a `dim`-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisRef {
    dim: usize,
    index: usize,
}

impl AxisRef {
    pub fn new(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::invalid(format!("axis {index} outside dimension {dim}")));
        }
        Ok(Self { dim, index })
    }

    /// The last axis, `e_dim`.
    pub fn last(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("axis dimension must be positive"));
        }
        Ok(Self { dim, index: dim - 1 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

fn check_dims(u: usize, v: usize) -> Result<()> {
    if u != v {
        return Err(Error::DimensionMismatch { expected: u, got: v });
    }
    Ok(())
}

pub fn dot<T: Real>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn norm<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

pub fn sub<T: Real>(u: &[T], v: &[T]) -> Result<Vec<T>> {
    check_dims(u.len(), v.len())?;
    Ok(u.iter().zip(v).map(|(&a, &b)| a - b).collect())
}

pub fn add<T: Real>(u: &[T], v: &[T]) -> Result<Vec<T>> {
    check_dims(u.len(), v.len())?;
    Ok(u.iter().zip(v).map(|(&a, &b)| a + b).collect())
}

pub fn scale<T: Real>(v: &[T], alpha: T) -> Vec<T> {
    v.iter().map(|&x| x * alpha).collect()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    check_dims(u.len(), v.len())?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == T::zero() || nv == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(clamp_unit(dot(u, v) / (nu * nv)))
}

/// Euclidean distance; computed as `norm(u - v)`.
pub fn euclidean<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    Ok(norm(&sub(u, v)?))
}

/// Angle in degrees between `v` and the basis axis, via the clamped arccos
/// of `v[axis] / |v|`.
pub fn angle_to_axis<T: Real>(v: &[T], axis: AxisRef) -> Result<T> {
    check_dims(axis.dim, v.len())?;
    let n = norm(v);
    if n == T::zero() {
        return Err(Error::ZeroVector);
    }
    let c = clamp_unit(v[axis.index] / n);
    Ok(c.acos() * T::lit(180.0) / T::pi())
}

/// Elementwise arithmetic mean of a nonempty set of equal-length vectors.
pub fn mean_vector<'a, T: Real, I>(rows: I) -> Result<Vec<T>>
where
    I: IntoIterator<Item = &'a [T]>,
{
    let mut rows = rows.into_iter();
    let first = rows.next().ok_or(Error::Empty("mean of no vectors"))?;
    let mut acc = first.to_vec();
    let mut count = 1usize;
    for row in rows {
        check_dims(acc.len(), row.len())?;
        acc.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
        count += 1;
    }
    let n: T = from_usize(count);
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

fn clamp_unit<T: Real>(x: T) -> T {
    x.clamp(-T::one(), T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Embeddings<f64>> {
        Embeddings::parse(BufReader::new(Cursor::new(text.to_owned())), None)
    }

    #[test]
    fn parses_minimal_file() {
        let t = parse("2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.words(), ["a", "b"]);
        assert_eq!(t.vector("b").unwrap(), &[0.0, 1.0, 0.0]);
        assert!(matches!(t.vector("c"), Err(Error::Miss(_))));
    }

    #[test]
    fn rejects_duplicates_arity_and_headers() {
        assert!(matches!(parse("1 2\na 1 0\na 0 1"), Err(Error::Duplicate(_))));
        assert!(matches!(parse("2 2\na 1 0\na 0 1"), Err(Error::Duplicate(_))));
        assert!(matches!(parse("2 3\na 1 0\nb 0 1 0"), Err(Error::Parse { .. })));
        assert!(matches!(parse("two 3\na 1 0 0"), Err(Error::Parse { .. })));
        assert!(matches!(parse("2 2\na 1 0"), Err(Error::Parse { .. })));
        assert!(matches!(parse("1 2\na 1 NaN"), Err(Error::NonFinite(_))));
        assert!(matches!(
            Embeddings::<f64>::parse(BufReader::new(Cursor::new("1 2\na 1 0")), Some(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn save_load_is_byte_stable() {
        let t = parse("3 2\nx 0.1 -2.5e-7\ny 1 3.0000000000000004\nz 12345.678 0\n").unwrap();
        let mut first = Vec::new();
        t.write(&mut first).unwrap();
        let back = parse(std::str::from_utf8(&first).unwrap()).unwrap();
        let mut second = Vec::new();
        back.write(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(t, back);
    }

    #[test]
    fn elementary_measurements() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - s).abs() < 1e-15);
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroVector)));
        assert!(matches!(cosine(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 2f64.sqrt());
        assert_eq!(norm(&[0.0; 3]), 0.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(norm(&[0.0, 1.0, 0.0]), 1.0);
    }

    #[test]
    fn angles_to_last_axis() {
        let axis = AxisRef::last(4).unwrap();
        assert_eq!(angle_to_axis(&[0.0, 0.0, 0.0, 1.0], axis).unwrap(), 0.0);
        assert!((angle_to_axis::<f64>(&[1.0, 2.0, 3.0, 0.0], axis).unwrap() - 90.0).abs() < 1e-9);
        assert!((angle_to_axis::<f64>(&[0.0, 0.0, 1.0, 1.0], axis).unwrap() - 45.0).abs() < 1e-9);
        assert!((angle_to_axis::<f64>(&[0.0, 0.0, 0.0, -2.0], axis).unwrap() - 180.0).abs() < 1e-9);
        assert!(matches!(angle_to_axis(&[0.0; 4], axis), Err(Error::ZeroVector)));
        assert!(AxisRef::new(3, 3).is_err());
    }

    #[test]
    fn means() {
        let rows: [&[f64]; 2] = [&[0.0, 0.0], &[2.0, 2.0]];
        assert_eq!(mean_vector(rows).unwrap(), vec![1.0, 1.0]);
        let one: [&[f64]; 1] = [&[3.0, -1.0]];
        assert_eq!(mean_vector(one).unwrap(), vec![3.0, -1.0]);
        let opposite: [&[f64]; 2] = [&[1.5, -2.0], &[-1.5, 2.0]];
        assert_eq!(mean_vector(opposite).unwrap(), vec![0.0, 0.0]);
        assert!(mean_vector::<f64, Vec<&[f64]>>(vec![]).is_err());
    }

    #[test]
    fn normalization_is_explicit() {
        let t = parse("2 2\na 3 4\nb 0 0\n").unwrap();
        let n = t.normalized();
        assert_eq!(n.vector("a").unwrap(), &[0.6, 0.8]);
        assert_eq!(n.vector("b").unwrap(), &[0.0, 0.0]);
        assert_eq!(t.vector("a").unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn works_in_single_precision() {
        let t: Embeddings<f32> =
            Embeddings::parse(BufReader::new(Cursor::new("1 2\na 3 4")), Some(2)).unwrap();
        assert_eq!(norm(t.row(0)), 5.0f32);
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0..10.0f64, d),
                prop::collection::vec(-10.0..10.0f64, d),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant((u, v) in vec_pair(), alpha in 0.01..100.0f64) {
            prop_assume!(norm(&u) > 1e-6 && norm(&v) > 1e-6);
            let c = cosine(&u, &v).unwrap();
            prop_assert_eq!(c, cosine(&v, &u).unwrap());
            prop_assert!((cosine(&scale(&u, alpha), &v).unwrap() - c).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn angle_scale_invariant((u, _v) in vec_pair(), alpha in 0.01..100.0f64) {
            prop_assume!(norm(&u) > 1e-6);
            let axis = AxisRef::last(u.len()).unwrap();
            let a = angle_to_axis(&u, axis).unwrap();
            prop_assert!((angle_to_axis(&scale(&u, alpha), axis).unwrap() - a).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&a));
        }

        #[test]
        fn euclidean_is_norm_of_difference((u, v) in vec_pair()) {
            prop_assert_eq!(euclidean(&u, &v).unwrap(), norm(&sub(&u, &v).unwrap()));
        }
    }
}
