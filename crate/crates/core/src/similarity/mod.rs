//! Embedding providers, cosine similarity, action extraction, the weighted
//! event score and deterministic top-k selection.

mod actions;
mod reference;
#[cfg(feature = "remote")]
mod remote;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use thiserror::Error;

pub use actions::{ActionExtractor, LexiconExtractor};
pub use reference::{fnv1a_64, ReferenceEmbedder, REFERENCE_DIM};
#[cfg(feature = "remote")]
pub use remote::{RemoteEmbedder, EMBED_URL_ENV};

/// Tolerance on `w1 + w2 = 1`.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimilarityError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("weights must be non-negative and sum to 1, got w1={w1}, w2={w2}")]
    InvalidWeights { w1: f64, w2: f64 },
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },
    #[error("provider returned dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("provider returned {got} vectors for {expected} texts")]
    Count { expected: usize, got: usize },
    #[error("embedding service: {0}")]
    Service(String),
}

/// Fixed-length vector of finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbedError> {
        if let Some(index) = components.iter().position(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite { index });
        }
        Ok(Embedding(components))
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Embedding {
        Embedding(self.0.iter().map(|x| x * factor).collect())
    }
}

/// Deterministic text-to-vector function of fixed dimension. Implementations
/// are shared across threads.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        (**self).embed(text)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        (**self).embed_batch(texts)
    }
}

/// Counts `embed` calls passed through to the inner provider.
#[derive(Debug, Default)]
pub struct CountingEmbedder<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P> CountingEmbedder<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(AtomicOrdering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, AtomicOrdering::Relaxed);
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CountingEmbedder<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        self.inner.embed(text)
    }
}

/// Memoizes embeddings by text. Useful in front of a remote provider.
#[derive(Debug, Default)]
pub struct CachedEmbedder<P> {
    inner: P,
    cache: Mutex<HashMap<String, Embedding>>,
}

impl<P> CachedEmbedder<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if let Some(hit) = self.cache.lock().expect("embedding cache poisoned").get(text) {
            return Ok(hit.clone());
        }
        let value = self.inner.embed(text)?;
        self.cache
            .lock()
            .expect("embedding cache poisoned")
            .insert(text.to_string(), value.clone());
        Ok(value)
    }
}

/// Cosine similarity. A zero-norm operand yields 0.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, SimilarityError> {
    if u.dim() != v.dim() {
        return Err(SimilarityError::DimensionMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.0.iter().zip(&v.0) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    // sqrt of the product keeps cosine(v, v) at exactly 1 for any scale
    let product = nu * nv;
    let denom = if product.is_finite() && product > 0.0 {
        product.sqrt()
    } else {
        nu.sqrt() * nv.sqrt()
    };
    Ok((dot / denom).clamp(-1.0, 1.0))
}

pub fn check_weights(w1: f64, w2: f64) -> Result<(), SimilarityError> {
    let ok = w1.is_finite() && w2.is_finite() && w1 >= 0.0 && w2 >= 0.0 && (w1 + w2 - 1.0).abs() <= WEIGHT_TOLERANCE;
    if ok {
        Ok(())
    } else {
        Err(SimilarityError::InvalidWeights { w1, w2 })
    }
}

/// Weighted event score `w1 * action + w2 * semantic`.
pub fn event_score(action: f64, semantic: f64, w1: f64, w2: f64) -> Result<f64, SimilarityError> {
    check_weights(w1, w2)?;
    Ok(w1 * action + w2 * semantic)
}

/// Descending score, ties by ascending id.
pub fn rank_order<I: Ord>(a: &(I, f64), b: &(I, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// The `k` highest-scoring items, descending, ties broken by ascending id.
pub fn top_k<I: Ord + Clone>(scored: &[(I, f64)], k: usize) -> Vec<(I, f64)> {
    let mut ranked = scored.to_vec();
    if k < ranked.len() {
        ranked.select_nth_unstable_by(k, rank_order);
        ranked.truncate(k);
    }
    ranked.sort_by(rank_order);
    ranked
}
