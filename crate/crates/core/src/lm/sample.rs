use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::SamplerConfig;
use super::kernels::{axpy, dot, gelu, layer_norm, linear, softmax_in_place};
use super::model::{LmError, Model};
use crate::scalar::Scalar;

/// Incremental decoder holding per-layer key/value caches.
/// Each `push` returns exactly the logits row the full forward would give.
pub struct Decoder<'a, T> {
    model: &'a Model<T>,
    keys: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
    len: usize,
}

impl<'a, T: Scalar> Decoder<'a, T> {
    pub fn new(model: &'a Model<T>) -> Self {
        let l = model.config.n_layers;
        Self {
            model,
            keys: vec![Vec::new(); l],
            values: vec![Vec::new(); l],
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, token: u32) -> Result<Vec<T>, LmError> {
        let cfg = &self.model.config;
        let p = &self.model.params;
        if self.len >= cfg.context {
            return Err(LmError::OverLength {
                len: self.len + 1,
                max: cfg.context,
            });
        }
        if token as usize >= cfg.vocab_size {
            return Err(LmError::TokenOutOfVocab {
                id: token,
                vocab: cfg.vocab_size,
            });
        }
        let (d, hd) = (cfg.d_model, cfg.head_dim());
        let i = self.len;
        let scale = T::one() / T::from_usize(hd).unwrap().sqrt();

        let e = p.tok_emb.row(token as usize);
        let pe = p.pos_emb.row(i);
        let mut x: Vec<T> = (0..d).map(|j| e[j] + pe[j]).collect();

        for (li, lp) in p.layers.iter().enumerate() {
            let mut h1 = vec![T::zero(); d];
            layer_norm(&x, &lp.ln1_g.data, &lp.ln1_b.data, &mut h1);
            let mut qkv = vec![T::zero(); 3 * d];
            linear(&h1, &lp.w_qkv.data, &lp.b_qkv.data, d, 3 * d, &mut qkv);
            self.keys[li].extend_from_slice(&qkv[d..2 * d]);
            self.values[li].extend_from_slice(&qkv[2 * d..]);
            let (ks, vs) = (&self.keys[li], &self.values[li]);
            let mut y = vec![T::zero(); d];
            let mut row = vec![T::zero(); i + 1];
            for h in 0..cfg.n_heads {
                let q = &qkv[h * hd..(h + 1) * hd];
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(q, &ks[j * d + h * hd..j * d + (h + 1) * hd]) * scale;
                }
                softmax_in_place(&mut row);
                let out = &mut y[h * hd..(h + 1) * hd];
                for (j, &pj) in row.iter().enumerate() {
                    axpy(pj, &vs[j * d + h * hd..j * d + (h + 1) * hd], out);
                }
            }
            let mut a = vec![T::zero(); d];
            linear(&y, &lp.w_o.data, &lp.b_o.data, d, d, &mut a);
            x.iter_mut().zip(&a).for_each(|(v, &r)| *v += r);

            let mut h2 = vec![T::zero(); d];
            layer_norm(&x, &lp.ln2_g.data, &lp.ln2_b.data, &mut h2);
            let mut f = vec![T::zero(); cfg.d_ff];
            linear(&h2, &lp.w_fc.data, &lp.b_fc.data, d, cfg.d_ff, &mut f);
            f.iter_mut().for_each(|v| *v = gelu(*v));
            let mut m = vec![T::zero(); d];
            linear(&f, &lp.w_proj.data, &lp.b_proj.data, cfg.d_ff, d, &mut m);
            x.iter_mut().zip(&m).for_each(|(v, &r)| *v += r);
        }
        let mut hf = vec![T::zero(); d];
        layer_norm(&x, &p.lnf_g.data, &p.lnf_b.data, &mut hf);
        let mut logits = vec![T::zero(); cfg.vocab_size];
        linear(&hf, &p.head_w.data, &p.head_b.data, d, cfg.vocab_size, &mut logits);
        self.len += 1;
        Ok(logits)
    }
}

/// Why generation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EndToken,
    MaxNewTokens,
    ContextFull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Prefix followed by the generated ids (the end token included when emitted).
    pub tokens: Vec<u32>,
    pub stop: StopReason,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Draws one id from `logits / temperature`, restricted to the `top_k` largest.
pub fn draw<T: Scalar>(logits: &[T], cfg: &SamplerConfig, rng: &mut ChaCha8Rng) -> usize {
    if cfg.top_k == Some(1) {
        return argmax(logits);
    }
    let mut idx: Vec<usize> = (0..logits.len()).collect();
    if let Some(k) = cfg.top_k {
        if k < logits.len() {
            idx.sort_by(|&a, &b| {
                logits[b]
                    .partial_cmp(&logits[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx.truncate(k);
            idx.sort_unstable();
        }
    }
    let mut scaled: Vec<f64> = idx
        .iter()
        .map(|&i| logits[i].to_f64_lossy() / cfg.temperature)
        .collect();
    softmax_in_place(&mut scaled);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in scaled.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx[k];
        }
    }
    *idx.last().expect("non-empty vocabulary")
}

fn generate<T: Scalar>(
    model: &Model<T>,
    prefix: &[u32],
    max_new_tokens: usize,
    end_id: u32,
    mut pick: impl FnMut(&[T]) -> usize,
) -> Result<Generation, LmError> {
    if prefix.is_empty() {
        return Err(LmError::EmptyPrefix);
    }
    let mut dec = Decoder::new(model);
    let mut tokens = prefix.to_vec();
    let mut logits = Vec::new();
    for &t in prefix {
        logits = dec.push(t)?;
    }
    let mut produced = 0;
    loop {
        if produced >= max_new_tokens {
            return Ok(Generation {
                tokens,
                stop: StopReason::MaxNewTokens,
            });
        }
        let next = pick(&logits) as u32;
        tokens.push(next);
        produced += 1;
        if next == end_id {
            return Ok(Generation {
                tokens,
                stop: StopReason::EndToken,
            });
        }
        if dec.len() >= model.config.context {
            return Ok(Generation {
                tokens,
                stop: StopReason::ContextFull,
            });
        }
        logits = dec.push(next)?;
    }
}

/// Temperature / top-k sampling continuing `prefix` until `end_id`.
pub fn sample<T: Scalar>(
    model: &Model<T>,
    prefix: &[u32],
    cfg: &SamplerConfig,
    end_id: u32,
) -> Result<Generation, LmError> {
    cfg.check().map_err(LmError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate(model, prefix, cfg.max_new_tokens, end_id, |l| {
        draw(l, cfg, &mut rng)
    })
}

/// Sampling with an externally owned stream, for drawing many samples from one seed.
pub fn sample_with_rng<T: Scalar>(
    model: &Model<T>,
    prefix: &[u32],
    cfg: &SamplerConfig,
    end_id: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Generation, LmError> {
    cfg.check().map_err(LmError::Config)?;
    generate(model, prefix, cfg.max_new_tokens, end_id, |l| draw(l, cfg, rng))
}

/// Argmax decoding.
pub fn greedy<T: Scalar>(
    model: &Model<T>,
    prefix: &[u32],
    max_new_tokens: usize,
    end_id: u32,
) -> Result<Generation, LmError> {
    generate(model, prefix, max_new_tokens, end_id, argmax)
}
