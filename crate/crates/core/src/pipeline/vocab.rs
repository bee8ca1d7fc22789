//! Seeded stand-in for a text encoder.
//!
//! Every label gets a unit vector. The first `dim` labels are made exactly
//! orthonormal by Gram-Schmidt; later ones are rejection-sampled so that
//! every pair stays below [`MAX_LABEL_COHERENCE`] in absolute dot product.
//! Text that is not a label is split into lowercase alphanumeric words and
//! embedded as the normalized sum of the word vectors; words that are not
//! labels get a random vector seeded from the word itself.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::providers::{normalize_text, EmbeddingProvider, ProviderError};
use crate::memory::CLASS_QUERIES;

pub const DEFAULT_VOCAB_DIM: usize = 64;
pub const DEFAULT_VOCAB_SEED: u64 = 0x5eed;
pub const MAX_LABEL_COHERENCE: f64 = 0.3;

const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVocabulary {
    dim: usize,
    seed: u64,
    labels: Vec<String>,
    vectors: Vec<Vec<f64>>,
    lookup: HashMap<String, usize>,
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

impl SyntheticVocabulary {
    /// Builds a vocabulary over `labels` (deduplicated after normalizing
    /// case and whitespace; first occurrence keeps its slot).
    ///
    /// Panics if `dim` is zero or the coherence bound cannot be met, which
    /// only happens for very small `dim` relative to the label count.
    pub fn new<'a>(dim: usize, seed: u64, labels: impl IntoIterator<Item = &'a str>) -> Self {
        assert!(dim > 0, "vocabulary dimension must be positive");
        let mut vocab = Self { dim, seed, labels: Vec::new(), vectors: Vec::new(), lookup: HashMap::new() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for label in labels {
            let key = normalize_text(label);
            if key.is_empty() || vocab.lookup.contains_key(&key) {
                continue;
            }
            let v = if vocab.vectors.len() < dim {
                vocab.orthonormal_draw(&mut rng)
            } else {
                vocab.incoherent_draw(&mut rng)
            };
            vocab.lookup.insert(key.clone(), vocab.labels.len());
            vocab.labels.push(key);
            vocab.vectors.push(v);
        }
        vocab
    }

    /// The default detector label set at the default dimension and seed.
    pub fn default_labels() -> Self {
        Self::new(DEFAULT_VOCAB_DIM, DEFAULT_VOCAB_SEED, CLASS_QUERIES.iter().copied())
    }

    fn orthonormal_draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        loop {
            let mut v = gaussian_unit(rng, self.dim);
            // Two passes keep the result orthogonal to machine precision.
            for _ in 0..2 {
                for b in &self.vectors {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let n = norm(&v);
            if n > 1e-3 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    }

    fn incoherent_draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        for _ in 0..MAX_REJECTIONS {
            let v = gaussian_unit(rng, self.dim);
            if self.vectors.iter().all(|b| dot(&v, b).abs() < MAX_LABEL_COHERENCE) {
                return v;
            }
        }
        panic!(
            "could not place label {} below coherence {MAX_LABEL_COHERENCE} in dimension {}",
            self.labels.len(),
            self.dim
        );
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn contains(&self, label: &str) -> bool {
        self.lookup.contains_key(&normalize_text(label))
    }

    /// Vector for a single word or label. Unknown entries get a vector
    /// seeded from the vocabulary seed and the text.
    fn entry_vector(&self, key: &str) -> Vec<f64> {
        match self.lookup.get(key) {
            Some(&i) => self.vectors[i].clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(key.as_bytes()));
                gaussian_unit(&mut rng, self.dim)
            }
        }
    }

    /// Unit embedding of `text`.
    pub fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let key = normalize_text(text);
        if let Some(&i) = self.lookup.get(&key) {
            return Ok(self.vectors[i].iter().map(|&x| x as f32).collect());
        }
        let tokens = words(&key);
        if tokens.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let mut sum = vec![0.0; self.dim];
        for w in &tokens {
            sum.iter_mut().zip(self.entry_vector(w)).for_each(|(s, x)| *s += x);
        }
        let n = norm(&sum);
        if n < 1e-9 {
            // Words cancelled out exactly; fall back to the phrase itself.
            sum = self.entry_vector(&key);
        } else {
            sum.iter_mut().for_each(|x| *x /= n);
        }
        Ok(sum.into_iter().map(|x| x as f32).collect())
    }
}

impl EmbeddingProvider for SyntheticVocabulary {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        self.embed(text)
    }
}
