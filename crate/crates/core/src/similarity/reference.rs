use super::{EmbedError, Embedding, EmbeddingProvider};

pub const REFERENCE_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Character-trigram feature hashing into 256 buckets, L2-normalized.
///
/// Trigrams are taken over the characters of the text as given (no case
/// folding). Text of one or two characters counts as a single gram, and
/// whitespace-only text embeds to the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceEmbedder;

impl ReferenceEmbedder {
    pub fn embed_text(text: &str) -> Embedding {
        let mut buckets = vec![0.0f64; REFERENCE_DIM];
        if text.trim().is_empty() {
            return Embedding(buckets);
        }
        let chars: Vec<char> = text.chars().collect();
        let mut gram = String::new();
        let mut add = |window: &[char]| {
            gram.clear();
            gram.extend(window);
            let idx = (fnv1a_64(gram.as_bytes()) % REFERENCE_DIM as u64) as usize;
            buckets[idx] += 1.0;
        };
        if chars.len() < 3 {
            add(&chars);
        } else {
            chars.windows(3).for_each(&mut add);
        }
        let norm = buckets.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut buckets {
            *x /= norm;
        }
        Embedding(buckets)
    }
}

impl EmbeddingProvider for ReferenceEmbedder {
    fn dim(&self) -> usize {
        REFERENCE_DIM
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        Ok(Self::embed_text(text))
    }
}
