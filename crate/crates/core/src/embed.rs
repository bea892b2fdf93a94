//! Text embedders. The shipped embedder is a seeded feature hash over token
//! unigrams and bigrams, L2-normalized, so similarity is bit-stable across
//! runs and platforms.

use crate::text::tokenize;

pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    /// Unit-length vector for `text`.
    fn embed(&self, text: &str) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashEmbedder {
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    fn slot(&self, feature: &str) -> (usize, f64) {
        let h = fnv1a64(self.seed, feature.as_bytes());
        let idx = (h % self.dimension as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        (idx, sign)
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION, 0)
    }
}

impl Embedder for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize(text);
        let mut v = vec![0.0; self.dimension];
        for token in &tokens {
            let (i, s) = self.slot(&format!("u:{token}"));
            v[i] += s;
        }
        for pair in tokens.windows(2) {
            let (i, s) = self.slot(&format!("b:{} {}", pair[0], pair[1]));
            v[i] += 0.5 * s;
        }
        let norm = l2(&v);
        if norm == 0.0 {
            // empty text or fully cancelled features
            let (i, _) = self.slot(&format!("t:{text}"));
            v.iter_mut().for_each(|x| *x = 0.0);
            v[i] = 1.0;
            return v;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

fn fnv1a64(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    // final avalanche so the sign bit is well mixed
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2(a);
    let nb = l2(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
