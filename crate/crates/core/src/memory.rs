//! Working memory and declarative memory built on holographic vectors.
//!
//! The working-memory buffer is a single vector. Item `n` (1-based) is
//! marked by the cyclic shift `permute(item, n)` and older contents decay
//! geometrically by `rho` on every encode, which produces recency.
//!
//! Declarative memory keeps one unnormalized trace per concept; each store
//! adds a superposition of position-shifted context symbols so that
//! frequency information survives in the trace magnitude.

use indexmap::IndexMap;

use crate::error::{CogError, Result};
use crate::hrr::{cleanup, cosine, permute, HrrVector, SymbolLexicon};

/// Default softmax temperature for retrieval strengths.
pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct WorkingMemoryBuffer {
    m: HrrVector,
    rho: f64,
    position: usize,
}

impl WorkingMemoryBuffer {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(CogError::InvalidParameter(format!(
                "decay rho must be in (0, 1], got {rho}"
            )));
        }
        Ok(Self {
            m: HrrVector::zeros(d)?,
            rho,
            position: 0,
        })
    }

    /// Rebuilds a buffer from stored parts (used by snapshot restore).
    pub fn from_parts(m: HrrVector, rho: f64, position: usize) -> Result<Self> {
        let mut buf = Self::new(m.dim(), rho)?;
        buf.m = m;
        buf.position = position;
        Ok(buf)
    }

    pub fn contents(&self) -> &HrrVector {
        &self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// `m ← rho·m + permute(item, position + 1)`.
    pub fn encode(&mut self, item: &HrrVector) -> Result<()> {
        if item.dim() != self.dim() {
            return Err(CogError::DimensionMismatch {
                expected: self.dim(),
                actual: item.dim(),
            });
        }
        let mut next = self.m.scale(self.rho)?;
        next.add_scaled(&permute(item, self.position as i64 + 1), 1.0)?;
        self.m = next;
        self.position += 1;
        Ok(())
    }

    /// Unshifts by `p` and returns the nearest lexicon symbol.
    pub fn recall(&self, p: usize, lex: &SymbolLexicon) -> Result<(String, f64)> {
        let probe = self.probe(p)?;
        let mut best = cleanup(&probe, lex, 1)?;
        Ok(best.remove(0))
    }

    /// The unshifted buffer for serial position `p` (1-based).
    pub fn probe(&self, p: usize) -> Result<HrrVector> {
        if p == 0 || p > self.position {
            return Err(CogError::PositionOutOfRange {
                position: p,
                len: self.position,
            });
        }
        Ok(permute(&self.m, -(p as i64)))
    }

    pub fn clear(&mut self) {
        self.m = HrrVector::zeros(self.dim()).expect("dimension already validated");
        self.position = 0;
    }
}

/// Ranked cue matches plus a retrieval-strength distribution.
///
/// `ranked` holds the top-k concepts. `strengths` covers every stored
/// concept in the same descending order, so `strengths[i]` belongs to
/// `ranked[i]` for `i < k` and the whole vector sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalResult {
    pub ranked: Vec<(String, f64)>,
    pub strengths: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeclarativeMemory {
    lexicon: SymbolLexicon,
    traces: IndexMap<String, HrrVector>,
    store_count: IndexMap<String, u64>,
    tau: f64,
}

impl DeclarativeMemory {
    pub fn new(lexicon: SymbolLexicon, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(CogError::InvalidParameter(format!(
                "retrieval temperature must be positive, got {tau}"
            )));
        }
        Ok(Self {
            lexicon,
            traces: IndexMap::new(),
            store_count: IndexMap::new(),
            tau,
        })
    }

    pub fn lexicon(&self) -> &SymbolLexicon {
        &self.lexicon
    }

    pub fn lexicon_mut(&mut self) -> &mut SymbolLexicon {
        &mut self.lexicon
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn trace(&self, concept: &str) -> Option<&HrrVector> {
        self.traces.get(concept)
    }

    pub fn traces(&self) -> impl Iterator<Item = (&str, &HrrVector)> {
        self.traces.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn store_count(&self, concept: &str) -> u64 {
        self.store_count.get(concept).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&str, u64)> {
        self.store_count.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Concepts that currently hold a trace.
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Adds `Σ_j permute(lex[context_j], j)` (j from 1) to the concept's
    /// trace. An empty context leaves the trace untouched but still counts
    /// as a store.
    pub fn store(&mut self, concept: &str, context: &[&str]) -> Result<()> {
        self.lexicon.require(concept)?;
        let mut sum: Option<HrrVector> = None;
        for (j, name) in context.iter().enumerate() {
            let shifted = permute(self.lexicon.require(name)?, j as i64 + 1);
            match &mut sum {
                Some(acc) => acc.add_scaled(&shifted, 1.0)?,
                None => sum = Some(shifted),
            }
        }
        self.accumulate(concept, sum.as_ref())
    }

    /// Adds an arbitrary vector to the concept's trace.
    pub fn store_vector(&mut self, concept: &str, item: &HrrVector) -> Result<()> {
        self.lexicon.require(concept)?;
        if item.dim() != self.lexicon.dim() {
            return Err(CogError::DimensionMismatch {
                expected: self.lexicon.dim(),
                actual: item.dim(),
            });
        }
        self.accumulate(concept, Some(item))
    }

    fn accumulate(&mut self, concept: &str, item: Option<&HrrVector>) -> Result<()> {
        if let Some(item) = item.filter(|v| !v.is_zero()) {
            match self.traces.get_mut(concept) {
                Some(trace) => trace.add_scaled(item, 1.0)?,
                None => {
                    self.traces.insert(concept.to_string(), item.clone());
                }
            }
        }
        *self.store_count.entry(concept.to_string()).or_insert(0) += 1;
        Ok(())
    }

    /// Cosine match of `cue` against every trace.
    pub fn retrieve(&self, cue: &HrrVector, k: usize) -> Result<RetrievalResult> {
        if self.traces.is_empty() {
            return Err(CogError::Empty("declarative memory"));
        }
        if cue.is_zero() {
            return Err(CogError::ZeroNorm("retrieval cue"));
        }
        let mut scored = self
            .traces
            .iter()
            .map(|(name, trace)| Ok((name.clone(), cosine(cue, trace)?)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let strengths = softmax(scored.iter().map(|(_, s)| s / self.tau));
        scored.truncate(k);
        Ok(RetrievalResult {
            ranked: scored,
            strengths,
        })
    }

    /// Rebuilds memory contents from stored parts (used by snapshot restore).
    pub fn restore_parts(
        &mut self,
        traces: Vec<(String, HrrVector)>,
        counts: Vec<(String, u64)>,
    ) -> Result<()> {
        self.traces.clear();
        self.store_count.clear();
        for (name, v) in traces {
            self.lexicon.require(&name)?;
            self.traces.insert(name, v);
        }
        for (name, c) in counts {
            self.store_count.insert(name, c);
        }
        Ok(())
    }
}

fn softmax<I: IntoIterator<Item = f64>>(logits: I) -> Vec<f64> {
    let logits: Vec<f64> = logits.into_iter().collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(names: &[&str], d: usize) -> SymbolLexicon {
        SymbolLexicon::with_names(names, d, 42).unwrap()
    }

    #[test]
    fn single_item_recall() {
        let lex = lex(&["A", "B", "C"], 256);
        let mut wm = WorkingMemoryBuffer::new(256, 1.0).unwrap();
        wm.encode(lex.get("A").unwrap()).unwrap();
        assert_eq!(wm.contents(), &permute(lex.get("A").unwrap(), 1));
        let (name, score) = wm.recall(1, &lex).unwrap();
        assert_eq!(name, "A");
        assert!(score >= 0.99);
    }

    #[test]
    fn two_items_without_decay_is_plain_sum() {
        let lex = lex(&["A", "B"], 16);
        let mut wm = WorkingMemoryBuffer::new(16, 1.0).unwrap();
        wm.encode(lex.get("A").unwrap()).unwrap();
        wm.encode(lex.get("B").unwrap()).unwrap();
        let mut expected = permute(lex.get("A").unwrap(), 1);
        expected
            .add_scaled(&permute(lex.get("B").unwrap(), 2), 1.0)
            .unwrap();
        assert_eq!(wm.contents(), &expected);
        assert_eq!(wm.position(), 2);
    }

    #[test]
    fn recall_out_of_range_and_clear() {
        let lex = lex(&["A"], 32);
        let mut wm = WorkingMemoryBuffer::new(32, 0.9).unwrap();
        assert!(matches!(
            wm.recall(1, &lex),
            Err(CogError::PositionOutOfRange { .. })
        ));
        wm.encode(lex.get("A").unwrap()).unwrap();
        assert!(wm.recall(2, &lex).is_err());
        assert!(wm.recall(0, &lex).is_err());
        wm.clear();
        let once = wm.clone();
        wm.clear();
        assert_eq!(wm, once);
        assert_eq!(wm.rho(), 0.9);
        assert_eq!(wm.dim(), 32);
        assert!(wm.contents().is_zero());
        assert!(wm.recall(1, &lex).is_err());
    }

    #[test]
    fn encode_rejects_wrong_dimension() {
        let mut wm = WorkingMemoryBuffer::new(8, 1.0).unwrap();
        let item = HrrVector::identity(4).unwrap();
        assert!(wm.encode(&item).is_err());
        assert_eq!(wm.position(), 0);
    }

    #[test]
    fn rho_must_be_in_unit_interval() {
        assert!(WorkingMemoryBuffer::new(8, 0.0).is_err());
        assert!(WorkingMemoryBuffer::new(8, 1.5).is_err());
    }

    #[test]
    fn single_context_store_is_shifted_symbol() {
        let mut dm = DeclarativeMemory::new(lex(&["X", "A"], 128), DEFAULT_TAU).unwrap();
        dm.store("X", &["A"]).unwrap();
        let expected = permute(dm.lexicon().get("A").unwrap(), 1);
        assert!((cosine(dm.trace("X").unwrap(), &expected).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(dm.store_count("X"), 1);
    }

    #[test]
    fn frequency_dominates_trace() {
        let mut dm = DeclarativeMemory::new(lex(&["X", "A", "B"], 512), DEFAULT_TAU).unwrap();
        for _ in 0..50 {
            dm.store("X", &["A"]).unwrap();
        }
        dm.store("X", &["B"]).unwrap();
        let trace = dm.trace("X").unwrap();
        let a = cosine(trace, &permute(dm.lexicon().get("A").unwrap(), 1)).unwrap();
        let b = cosine(trace, &permute(dm.lexicon().get("B").unwrap(), 1)).unwrap();
        assert!(a > b);
    }

    #[test]
    fn empty_context_counts_without_trace() {
        let mut dm = DeclarativeMemory::new(lex(&["X"], 16), DEFAULT_TAU).unwrap();
        dm.store("X", &[]).unwrap();
        assert_eq!(dm.store_count("X"), 1);
        assert!(dm.trace("X").is_none());
        assert!(dm.is_empty());
    }

    #[test]
    fn unknown_names_error() {
        let mut dm = DeclarativeMemory::new(lex(&["X"], 16), DEFAULT_TAU).unwrap();
        assert!(matches!(
            dm.store("Y", &[]),
            Err(CogError::UnknownSymbol(_))
        ));
        assert!(matches!(
            dm.store("X", &["nope"]),
            Err(CogError::UnknownSymbol(_))
        ));
        assert_eq!(dm.store_count("X"), 0);
    }

    #[test]
    fn retrieval_strength_edge_cases() {
        let mut dm = DeclarativeMemory::new(lex(&["X", "Y", "A"], 64), DEFAULT_TAU).unwrap();
        let cue = dm.lexicon().get("A").unwrap().clone();
        assert!(matches!(dm.retrieve(&cue, 1), Err(CogError::Empty(_))));
        dm.store("X", &["A"]).unwrap();
        let single = dm.retrieve(&cue, 3).unwrap();
        assert_eq!(single.strengths, vec![1.0]);
        dm.store("Y", &["A"]).unwrap();
        let pair = dm.retrieve(&cue, 2).unwrap();
        assert_eq!(pair.strengths, vec![0.5, 0.5]);
        let zero = HrrVector::zeros(64).unwrap();
        assert!(dm.retrieve(&zero, 1).is_err());
    }
}
