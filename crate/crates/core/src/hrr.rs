//! Holographic reduced representations.
//!
//! Vectors are real-valued with fixed dimension `d`. Binding is circular
//! convolution
//!
//! ```text
//! c_j = Σ_k a_k · b_{(j − k) mod d}
//! ```
//!
//! and unbinding convolves with the involution `a*_j = a_{(−j) mod d}`, the
//! approximate inverse. Superposition is element-wise addition and
//! permutation is a cyclic shift. Symbols are drawn i.i.d. from
//! `Normal(0, 1/d)` so their expected squared norm is one.

use std::cell::RefCell;
use std::fmt::Write as _;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::error::{CogError, Result};

/// Below this dimension binding uses the direct convolution sum.
const DIRECT_BIND_MAX_DIM: usize = 32;

/// A fixed-dimension real vector with finite components.
#[derive(Clone, Debug, PartialEq)]
pub struct HrrVector {
    components: Vec<f64>,
}

impl HrrVector {
    /// Wraps `components`, rejecting empty or non-finite input.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(CogError::InvalidDimension("d must be at least 1".into()));
        }
        Self::checked(components, "HrrVector::new")
    }

    pub fn zeros(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(CogError::InvalidDimension("d must be at least 1".into()));
        }
        Ok(Self { components: vec![0.0; d] })
    }

    /// The convolution identity `[1, 0, …, 0]`.
    pub fn identity(d: usize) -> Result<Self> {
        let mut v = Self::zeros(d)?;
        v.components[0] = 1.0;
        Ok(v)
    }

    fn checked(components: Vec<f64>, what: &str) -> Result<Self> {
        if components.iter().all(|x| x.is_finite()) {
            Ok(Self { components })
        } else {
            Err(CogError::NonFinite(what.to_string()))
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.components
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&x| x == 0.0)
    }

    pub fn dot(&self, other: &HrrVector) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn scale(&self, c: f64) -> Result<HrrVector> {
        Self::checked(self.components.iter().map(|x| x * c).collect(), "scale")
    }

    /// `self + c · other`, in place.
    pub fn add_scaled(&mut self, other: &HrrVector, c: f64) -> Result<()> {
        check_dims(self, other)?;
        let next: Vec<f64> = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a + c * b)
            .collect();
        *self = Self::checked(next, "add_scaled")?;
        Ok(())
    }

    /// Unit-norm copy; errors on the zero vector.
    pub fn normalized(&self) -> Result<HrrVector> {
        let n = self.norm();
        if n == 0.0 {
            return Err(CogError::ZeroNorm("normalize"));
        }
        self.scale(1.0 / n)
    }
}

impl std::ops::Neg for &HrrVector {
    type Output = HrrVector;

    fn neg(self) -> HrrVector {
        HrrVector {
            components: self.components.iter().map(|x| -x).collect(),
        }
    }
}

fn check_dims(a: &HrrVector, b: &HrrVector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CogError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

fn symbol_rng(name: &str, seed: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(name.as_bytes());
    hasher.update([0u8]);
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(digest.as_slice());
    ChaCha8Rng::from_seed(key)
}

/// Deterministic random symbol for `(name, seed)` with components drawn from
/// `Normal(0, 1/d)`.
pub fn random_symbol(name: &str, d: usize, seed: u64) -> Result<HrrVector> {
    if d == 0 {
        return Err(CogError::InvalidDimension("d must be at least 1".into()));
    }
    let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt())
        .map_err(|e| CogError::InvalidParameter(e.to_string()))?;
    let mut rng = symbol_rng(name, seed);
    Ok(HrrVector {
        components: (0..d).map(|_| normal.sample(&mut rng)).collect(),
    })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn bind_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    let mut out = vec![0.0; d];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &ak) in a.iter().enumerate() {
            acc += ak * b[(j + d - k) % d];
        }
        *slot = acc;
    }
    out
}

fn bind_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(d), p.plan_fft_inverse(d))
    });
    let mut fa: Vec<Complex<f64>> = a.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut fb: Vec<Complex<f64>> = b.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / d as f64;
    fa.iter().map(|c| c.re * scale).collect()
}

/// Circular convolution of `a` and `b`.
pub fn bind(a: &HrrVector, b: &HrrVector) -> Result<HrrVector> {
    check_dims(a, b)?;
    let out = if a.dim() <= DIRECT_BIND_MAX_DIM {
        bind_direct(&a.components, &b.components)
    } else {
        bind_fft(&a.components, &b.components)
    };
    HrrVector::checked(out, "bind")
}

/// Index reversal `a*_j = a_{(−j) mod d}`.
pub fn involution(a: &HrrVector) -> HrrVector {
    let d = a.dim();
    HrrVector {
        components: (0..d).map(|j| a.components[(d - j) % d]).collect(),
    }
}

/// Approximately recovers the partner of `b` from `c = bind(x, b)`.
pub fn unbind(c: &HrrVector, b: &HrrVector) -> Result<HrrVector> {
    bind(c, &involution(b))
}

/// Element-wise sum, optionally scaled to unit norm.
pub fn superpose<'a, I>(vs: I, normalize: bool) -> Result<HrrVector>
where
    I: IntoIterator<Item = &'a HrrVector>,
{
    let mut iter = vs.into_iter();
    let mut acc = iter.next().ok_or(CogError::Empty("superpose"))?.clone();
    for v in iter {
        acc.add_scaled(v, 1.0)?;
    }
    if normalize {
        acc.normalized()
    } else {
        Ok(acc)
    }
}

/// Cyclic right shift by `shift` positions (negative shifts rotate left).
pub fn permute(a: &HrrVector, shift: i64) -> HrrVector {
    let d = a.dim();
    let s = shift.rem_euclid(d as i64) as usize;
    let mut out = vec![0.0; d];
    for (j, &x) in a.components.iter().enumerate() {
        out[(j + s) % d] = x;
    }
    HrrVector { components: out }
}

pub fn cosine(a: &HrrVector, b: &HrrVector) -> Result<f64> {
    let dot = a.dot(b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(CogError::ZeroNorm("cosine"));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Top-`k` lexicon entries by descending cosine; ties keep insertion order.
pub fn cleanup(v: &HrrVector, lex: &SymbolLexicon, k: usize) -> Result<Vec<(String, f64)>> {
    if lex.is_empty() {
        return Err(CogError::Empty("cleanup lexicon"));
    }
    if v.dim() != lex.dim() {
        return Err(CogError::DimensionMismatch {
            expected: lex.dim(),
            actual: v.dim(),
        });
    }
    let mut scored = lex
        .iter()
        .map(|(name, sym)| Ok((name.to_string(), cosine(v, sym)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k);
    Ok(scored)
}

/// Named random symbols sharing one dimension and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolLexicon {
    d: usize,
    seed: u64,
    entries: IndexMap<String, HrrVector>,
}

impl SymbolLexicon {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(CogError::InvalidDimension("d must be at least 1".into()));
        }
        Ok(Self {
            d,
            seed,
            entries: IndexMap::new(),
        })
    }

    pub fn with_names<S: AsRef<str>>(names: &[S], d: usize, seed: u64) -> Result<Self> {
        let mut lex = Self::new(d, seed)?;
        for name in names {
            lex.insert(name.as_ref())?;
        }
        Ok(lex)
    }

    /// Adds a freshly generated symbol. Names must be unique.
    pub fn insert(&mut self, name: &str) -> Result<&HrrVector> {
        if self.entries.contains_key(name) {
            return Err(CogError::DuplicateSymbol(name.to_string()));
        }
        self.validate_name(name)?;
        let v = random_symbol(name, self.d, self.seed)?;
        self.entries.insert(name.to_string(), v);
        Ok(&self.entries[name])
    }

    /// Returns the symbol for `name`, generating it on first use.
    pub fn get_or_insert(&mut self, name: &str) -> Result<&HrrVector> {
        if !self.entries.contains_key(name) {
            self.insert(name)?;
        }
        Ok(&self.entries[name])
    }

    fn validate_name(&self, name: &str) -> Result<()> {
        if name.is_empty() || name.contains(['\t', '\n', '\r']) {
            return Err(CogError::InvalidParameter(format!(
                "symbol name {name:?} must be non-empty and free of tabs/newlines"
            )));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&HrrVector> {
        self.entries.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&HrrVector> {
        self.get(name)
            .ok_or_else(|| CogError::UnknownSymbol(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &HrrVector)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Text export: one `name<TAB>d<TAB>seed` line per symbol.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in self.entries.keys() {
            let _ = writeln!(out, "{name}\t{}\t{}", self.d, self.seed);
        }
        out
    }

    /// Rebuilds a lexicon from [`SymbolLexicon::to_text`] output by
    /// regenerating every vector.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lex: Option<SymbolLexicon> = None;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| {
                CogError::InvalidParameter(format!("lexicon line {}: {msg}", lineno + 1))
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected name<TAB>d<TAB>seed"));
            }
            let d: usize = fields[1].parse().map_err(|_| bad("bad dimension"))?;
            let seed: u64 = fields[2].parse().map_err(|_| bad("bad seed"))?;
            let lex = match &mut lex {
                Some(l) => l,
                None => lex.insert(SymbolLexicon::new(d, seed)?),
            };
            if lex.d != d || lex.seed != seed {
                return Err(bad("dimension and seed must match the first entry"));
            }
            lex.insert(fields[0])?;
        }
        lex.ok_or(CogError::Empty("lexicon text"))
    }
}
