use serde::{Deserialize, Serialize};

/// Precision, recall and F1 (β = 1).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(matched: f64, cand: usize, reference: usize) -> Self {
        if cand == 0 || reference == 0 || matched == 0.0 {
            return Self::default();
        }
        let precision = matched / cand as f64;
        let recall = matched / reference as f64;
        Self {
            precision,
            recall,
            f1: 2.0 * precision * recall / (precision + recall),
        }
    }
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Rouge-L over whitespace-separated words. Two empty strings score zero.
pub fn rouge_l(candidate: &str, reference: &str) -> Prf {
    let c: Vec<&str> = candidate.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    Prf::from_counts(lcs_len(&c, &r) as f64, c.len(), r.len())
}

/// Mean Rouge-L over candidate/reference pairs.
pub fn rouge_l_mean<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Option<Prf> {
    let mut sum = Prf::default();
    let mut n = 0usize;
    for (c, r) in pairs {
        let s = rouge_l(c, r);
        sum.precision += s.precision;
        sum.recall += s.recall;
        sum.f1 += s.f1;
        n += 1;
    }
    (n > 0).then(|| Prf {
        precision: sum.precision / n as f64,
        recall: sum.recall / n as f64,
        f1: sum.f1 / n as f64,
    })
}

/// Supplies contextual token embeddings for an embedding-similarity score.
/// No implementation ships; plug in an external encoder.
pub trait EmbeddingProvider {
    fn embed(&self, text: &str) -> Vec<Vec<f64>>;
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Greedy-matching embedding similarity (BERTScore-style) between two texts.
pub fn embedding_score(provider: &dyn EmbeddingProvider, candidate: &str, reference: &str) -> Prf {
    let c = provider.embed(candidate);
    let r = provider.embed(reference);
    if c.is_empty() || r.is_empty() {
        return Prf::default();
    }
    let best = |xs: &[Vec<f64>], ys: &[Vec<f64>]| {
        xs.iter()
            .map(|x| ys.iter().map(|y| cosine(x, y)).fold(f64::NEG_INFINITY, f64::max))
            .sum::<f64>()
            / xs.len() as f64
    };
    let precision = best(&c, &r);
    let recall = best(&r, &c);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
    }
}
