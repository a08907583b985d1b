//! Seeded synthetic data: class-structured singular/plural embeddings, noisy
//! linear maps, and a small pronunciation lexicon with pair information.
//!
//! Noise scales are expected vector norms: a draw with scale `s` in `d`
//! dimensions has independent `N(0, s²/d)` coordinates.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Serialize;

use crate::dlcomp::{PairInfo, PronLexicon, Role};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::shifts::{Pair, PairSet};
use crate::vecspace::Embeddings;

/// Parameters of `v_pl = v_sg + shift[class] + ε_lexeme + ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub classes: usize,
    pub lexemes_per_class: usize,
    pub dim: usize,
    /// Norm of each class centroid.
    pub centroid_scale: f64,
    /// Spread of singulars around their class centroid.
    pub singular_spread: f64,
    /// Norm of each class shift.
    pub shift_scale: f64,
    /// Weight of a direction shared by all class shifts, in [0, 1].
    pub shared_shift_weight: f64,
    pub sigma_lexeme: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 20,
            lexemes_per_class: 50,
            dim: 50,
            centroid_scale: 1.0,
            singular_spread: 0.5,
            shift_scale: 1.0,
            shared_shift_weight: 0.0,
            sigma_lexeme: 0.05,
            sigma: 0.01,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.lexemes_per_class == 0 {
            return Err(Error::invalid("class and lexeme counts must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::Degenerate("dimension must be at least 1".into()));
        }
        let scales = [
            self.centroid_scale,
            self.singular_spread,
            self.shift_scale,
            self.sigma_lexeme,
            self.sigma,
        ];
        if scales.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("scales must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.shared_shift_weight) {
            return Err(Error::invalid("shared shift weight must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn pair_count(&self) -> usize {
        self.classes * self.lexemes_per_class
    }
}

pub fn class_label(k: usize) -> String {
    format!("class{k:03}")
}

pub fn singular_word(k: usize, i: usize) -> String {
    format!("c{k:03}w{i:04}")
}

pub fn plural_word(k: usize, i: usize) -> String {
    format!("{}s", singular_word(k, i))
}

#[derive(Debug, Clone)]
pub struct SynthData<T: Real> {
    pub table: Embeddings<T>,
    pub pairs: PairSet,
    /// Generator class shifts by class label.
    pub shifts: BTreeMap<String, Vec<T>>,
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    let sd = scale / (d as f64).sqrt();
    (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random direction with norm exactly `scale` (zero when `scale` is zero).
fn sphere(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x * scale / n).collect();
        }
    }
}

fn to_t<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

/// Draws class centroids and shifts, then every lexeme's singular and
/// plural. Rows are ordered class by class, singular before plural.
pub fn gen_synth<T: Real>(spec: &SynthSpec) -> Result<SynthData<T>> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = sphere(&mut rng, d, 1.0);
    let mut words = Vec::with_capacity(2 * spec.pair_count());
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(2 * spec.pair_count());
    let mut pairs = Vec::with_capacity(spec.pair_count());
    let mut shifts = BTreeMap::new();
    for k in 0..spec.classes {
        let centroid = sphere(&mut rng, d, spec.centroid_scale);
        let own = sphere(&mut rng, d, 1.0);
        let w = spec.shared_shift_weight;
        let mixed: Vec<f64> = own.iter().zip(&shared).map(|(o, s)| (1.0 - w) * o + w * s).collect();
        let mn = mixed.iter().map(|x| x * x).sum::<f64>().sqrt();
        let shift: Vec<f64> = mixed.iter().map(|x| x * spec.shift_scale / mn).collect();
        for i in 0..spec.lexemes_per_class {
            let sg: Vec<f64> = centroid
                .iter()
                .zip(gaussian(&mut rng, d, spec.singular_spread))
                .map(|(c, e)| c + e)
                .collect();
            let lex = gaussian(&mut rng, d, spec.sigma_lexeme);
            let meas = gaussian(&mut rng, d, spec.sigma);
            let pl: Vec<f64> = (0..d).map(|j| sg[j] + shift[j] + lex[j] + meas[j]).collect();
            pairs.push(Pair {
                singular: rows.len(),
                plural: rows.len() + 1,
                class: Some(class_label(k)),
            });
            words.push(singular_word(k, i));
            rows.push(to_t(&sg));
            words.push(plural_word(k, i));
            rows.push(to_t(&pl));
        }
        shifts.insert(class_label(k), to_t(&shift));
    }
    Ok(SynthData {
        table: Embeddings::from_rows(words, rows)?,
        pairs: PairSet::new(pairs, format!("synth:seed={}", spec.seed))?,
        shifts,
    })
}

/// Parameters of `Y = scale·X + E` with `X` standard normal and `E`
/// elementwise `N(noise_mean, noise_sd²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearSpec {
    pub rows: usize,
    pub dim: usize,
    pub scale: f64,
    pub noise_mean: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for LinearSpec {
    fn default() -> Self {
        Self {
            rows: 2000,
            dim: 50,
            scale: 0.57,
            noise_mean: -0.001,
            noise_sd: 0.08,
            seed: 0,
        }
    }
}

pub fn gen_linear<T: Real>(spec: &LinearSpec) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if spec.rows == 0 || spec.dim == 0 {
        return Err(Error::Degenerate("rows and dimension must be positive".into()));
    }
    let noise = Normal::new(spec.noise_mean, spec.noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DMatrix::zeros(spec.rows, spec.dim);
    let mut y = DMatrix::zeros(spec.rows, spec.dim);
    for r in 0..spec.rows {
        for c in 0..spec.dim {
            let xv: f64 = rng.sample(StandardNormal);
            x[(r, c)] = T::lit(xv);
            y[(r, c)] = T::lit(spec.scale * xv + noise.sample(&mut rng));
        }
    }
    Ok((x, y))
}

/// Packs row-paired matrices into an embedding table (`s00000`/`p00000`)
/// and the pair set linking them.
pub fn pairs_from_matrices<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<(Embeddings<T>, PairSet)> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    let mut words = Vec::with_capacity(2 * x.nrows());
    let mut rows = Vec::with_capacity(2 * x.nrows());
    let mut pairs = Vec::with_capacity(x.nrows());
    for r in 0..x.nrows() {
        pairs.push(Pair {
            singular: 2 * r,
            plural: 2 * r + 1,
            class: None,
        });
        words.push(format!("s{r:05}"));
        rows.push(x.row(r).iter().copied().collect());
        words.push(format!("p{r:05}"));
        rows.push(y.row(r).iter().copied().collect());
    }
    Ok((Embeddings::from_rows(words, rows)?, PairSet::new(pairs, "linear")?))
}

const CONSONANTS: &[&str] = &[
    "P", "B", "T", "D", "K", "G", "F", "V", "TH", "DH", "S", "Z", "SH", "CH", "JH", "M", "N", "L", "R", "W", "Y", "HH",
    "NG",
];
const VOWELS: &[&str] = &["AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW"];
const SIBILANTS: &[&str] = &["S", "Z", "SH", "ZH", "CH", "JH"];
const VOICELESS: &[&str] = &["P", "T", "K", "F", "TH"];

/// Regular English plural allomorph for a stem ending in `last`.
pub fn plural_suffix(last: &str) -> &'static [&'static str] {
    if SIBILANTS.contains(&last) {
        &["IH", "Z"]
    } else if VOICELESS.contains(&last) {
        &["S"]
    } else {
        &["Z"]
    }
}

/// A pronunciation lexicon with pair information and class-structured
/// embeddings for every word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconSpec {
    pub semantics: SynthSpec,
    /// Plurals without a listed singular.
    pub unseen_plurals: usize,
    /// Probability that a word gets a second pronunciation.
    pub variant_rate: f64,
}

impl Default for LexiconSpec {
    fn default() -> Self {
        Self {
            semantics: SynthSpec {
                classes: 10,
                lexemes_per_class: 22,
                shared_shift_weight: 0.5,
                ..SynthSpec::default()
            },
            unseen_plurals: 60,
            variant_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LexiconData<T: Real> {
    pub lexicon: PronLexicon,
    pub info: PairInfo,
    pub embeddings: Embeddings<T>,
    /// Labelled pairs over `embeddings` (seen-stem pairs only).
    pub pairs: PairSet,
}

fn random_stem(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let syllables = rng.random_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..syllables {
        if rng.random_bool(0.8) {
            out.push(*CONSONANTS.choose(rng).expect("nonempty"));
        }
        out.push(*VOWELS.choose(rng).expect("nonempty"));
    }
    if rng.random_bool(0.85) {
        out.push(*CONSONANTS.choose(rng).expect("nonempty"));
    }
    out
}

fn variant_of(rng: &mut ChaCha8Rng, phones: &[&'static str]) -> Vec<&'static str> {
    let vowels: Vec<usize> = (0..phones.len()).filter(|&i| VOWELS.contains(&phones[i])).collect();
    let mut v = phones.to_vec();
    let &i = vowels.choose(rng).expect("every stem has a vowel");
    v[i] = if v[i] == "AH" { "IH" } else { "AH" };
    v
}

/// Generates distinct random stems, the regular plural of each, extra
/// unseen-stem plurals, and occasional vowel-reduced variants.
pub fn gen_lexicon<T: Real>(spec: &LexiconSpec) -> Result<LexiconData<T>> {
    if !(0.0..=1.0).contains(&spec.variant_rate) {
        return Err(Error::invalid("variant rate must lie in [0, 1]"));
    }
    let sem = &spec.semantics;
    let base = gen_synth::<f64>(&SynthSpec {
        lexemes_per_class: sem.lexemes_per_class + spec.unseen_plurals.div_ceil(sem.classes.max(1)),
        ..sem.clone()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(sem.seed ^ 0x5eed_1e71);
    let mut stems: BTreeSet<Vec<&str>> = BTreeSet::new();
    let mut lexicon = PronLexicon::new();
    let mut info = PairInfo::default();
    let mut words = Vec::new();
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut pairs = Vec::new();
    let mut unseen_left = spec.unseen_plurals;

    let mut fresh_stem = |rng: &mut ChaCha8Rng| loop {
        let s = random_stem(rng);
        let mut plural = s.clone();
        plural.extend(plural_suffix(s.last().expect("nonempty")));
        if stems.contains(&s) || stems.contains(&plural) {
            continue;
        }
        stems.insert(s.clone());
        stems.insert(plural.clone());
        return (s, plural);
    };
    let add_word = |lexicon: &mut PronLexicon, rng: &mut ChaCha8Rng, w: &str, phones: &[&'static str]| -> Result<()> {
        lexicon.insert(w, phones)?;
        if rng.random_bool(spec.variant_rate) {
            lexicon.insert(w, &variant_of(rng, phones))?;
        }
        Ok(())
    };

    let per_class = base.pairs.len() / sem.classes;
    for (n, p) in base.pairs.pairs().iter().enumerate() {
        let (k, i) = (n / per_class, n % per_class);
        let (stem, plural) = fresh_stem(&mut rng);
        let sg = singular_word(k, i);
        let pl = plural_word(k, i);
        if i < sem.lexemes_per_class {
            add_word(&mut lexicon, &mut rng, &sg, &stem)?;
            add_word(&mut lexicon, &mut rng, &pl, &plural)?;
            info.insert(&sg, Role::Singular, Some(&pl))?;
            info.insert(&pl, Role::Plural, Some(&sg))?;
            pairs.push(Pair {
                singular: rows.len(),
                plural: rows.len() + 1,
                class: p.class.clone(),
            });
            words.push(sg);
            rows.push(to_t(base.table.row(p.singular)));
            words.push(pl);
            rows.push(to_t(base.table.row(p.plural)));
        } else if unseen_left > 0 {
            unseen_left -= 1;
            add_word(&mut lexicon, &mut rng, &pl, &plural)?;
            info.insert(&pl, Role::Plural, None)?;
            words.push(pl);
            rows.push(to_t(base.table.row(p.plural)));
        }
    }
    Ok(LexiconData {
        lexicon,
        info,
        embeddings: Embeddings::from_rows(words, rows)?,
        pairs: PairSet::new(pairs, format!("synth-lexicon:seed={}", sem.seed))?,
    })
}
