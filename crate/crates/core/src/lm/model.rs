//! Pre-norm causal transformer decoder with hand-written backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::ModelConfig;
use super::kernels::{
    axpy, dot, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward,
    softmax_in_place, LayerNormCache,
};
use super::params::{LayerParams, Params};
use crate::scalar::Scalar;

/// Targets equal to this id (the `<pad>` word) carry no loss.
pub const PAD_ID: u32 = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error("sequence of {len} tokens exceeds context window {max}")]
    OverLength { len: usize, max: usize },
    #[error("need at least two tokens with one non-pad target")]
    TooShort,
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfVocab { id: u32, vocab: usize },
    #[error("loss became non-finite ({loss}) at iteration {iteration}")]
    Diverged { iteration: usize, loss: f64 },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty prefix")]
    EmptyPrefix,
}

/// `n × vocab` row-major logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<T> {
    pub n: usize,
    pub vocab: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Logits<T> {
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.vocab..(i + 1) * self.vocab]
    }
}

struct LayerCache<T> {
    ln1: LayerNormCache<T>,
    h1: Vec<T>,
    qkv: Vec<T>,
    /// Per head, lower-triangular attention probabilities (row i has i+1 entries).
    att: Vec<Vec<T>>,
    y: Vec<T>,
    drop_attn: Option<Vec<T>>,
    ln2: LayerNormCache<T>,
    h2: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
    drop_mlp: Option<Vec<T>>,
}

struct Cache<T> {
    drop_emb: Option<Vec<T>>,
    layers: Vec<LayerCache<T>>,
    lnf: LayerNormCache<T>,
    hf: Vec<T>,
    logits: Vec<T>,
}

#[inline]
fn tri(i: usize) -> usize {
    i * (i + 1) / 2
}

fn dropout_mask<T: Scalar>(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    let keep = T::from_f64_lossy(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
        .collect()
}

/// Decoder-only language model over token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
}

impl<T: Scalar> Model<T> {
    /// Random initialization, weights ~ N(0, 0.02²).
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, LmError> {
        Self::with_init_std(config, 0.02, seed)
    }

    pub fn with_init_std(config: ModelConfig, std: f64, seed: u64) -> Result<Self, LmError> {
        config.check(1).map_err(LmError::Config)?;
        let params = Params::init(&config, std, seed);
        Ok(Self { config, params })
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<(), LmError> {
        if tokens.len() > self.config.context {
            return Err(LmError::OverLength {
                len: tokens.len(),
                max: self.config.context,
            });
        }
        if let Some(&id) = tokens.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(LmError::TokenOutOfVocab {
                id,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    /// Attention for all heads; returns the concatenated head outputs.
    fn attention(&self, qkv: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
        let d = self.config.d_model;
        let hd = self.config.head_dim();
        let scale = T::one() / T::from_usize(hd).unwrap().sqrt();
        let mut y = vec![T::zero(); n * d];
        let mut att = Vec::with_capacity(self.config.n_heads);
        for h in 0..self.config.n_heads {
            let mut probs = vec![T::zero(); tri(n)];
            for i in 0..n {
                let q = &qkv[i * 3 * d + h * hd..i * 3 * d + (h + 1) * hd];
                let row = &mut probs[tri(i)..tri(i) + i + 1];
                for (j, s) in row.iter_mut().enumerate() {
                    let k = &qkv[j * 3 * d + d + h * hd..j * 3 * d + d + (h + 1) * hd];
                    *s = dot(q, k) * scale;
                }
                softmax_in_place(row);
                let out = &mut y[i * d + h * hd..i * d + (h + 1) * hd];
                for (j, &p) in row.iter().enumerate() {
                    let v = &qkv[j * 3 * d + 2 * d + h * hd..j * 3 * d + 2 * d + (h + 1) * hd];
                    axpy(p, v, out);
                }
            }
            att.push(probs);
        }
        (y, att)
    }

    fn forward_cached(
        &self,
        tokens: &[u32],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Cache<T>, LmError> {
        self.check_tokens(tokens)?;
        let cfg = &self.config;
        let p = &self.params;
        let (n, d) = (tokens.len(), cfg.d_model);
        let drop = cfg.dropout;
        let mut mask = |len: usize| -> Option<Vec<T>> {
            match rng.as_deref_mut() {
                Some(r) if drop > 0.0 => Some(dropout_mask(len, drop, r)),
                _ => None,
            }
        };

        let mut x = vec![T::zero(); n * d];
        for (i, &t) in tokens.iter().enumerate() {
            let xr = &mut x[i * d..(i + 1) * d];
            let e = p.tok_emb.row(t as usize);
            let pe = p.pos_emb.row(i);
            for j in 0..d {
                xr[j] = e[j] + pe[j];
            }
        }
        let drop_emb = mask(n * d);
        if let Some(m) = &drop_emb {
            x.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
        }

        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lp in &p.layers {
            let mut h1 = vec![T::zero(); n * d];
            let ln1 = layer_norm(&x, &lp.ln1_g.data, &lp.ln1_b.data, &mut h1);
            let mut qkv = vec![T::zero(); n * 3 * d];
            linear(&h1, &lp.w_qkv.data, &lp.b_qkv.data, d, 3 * d, &mut qkv);
            let (y, att) = self.attention(&qkv, n);
            let mut a = vec![T::zero(); n * d];
            linear(&y, &lp.w_o.data, &lp.b_o.data, d, d, &mut a);
            let drop_attn = mask(n * d);
            if let Some(m) = &drop_attn {
                a.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
            }
            x.iter_mut().zip(&a).for_each(|(v, &r)| *v += r);

            let mut h2 = vec![T::zero(); n * d];
            let ln2 = layer_norm(&x, &lp.ln2_g.data, &lp.ln2_b.data, &mut h2);
            let mut pre_act = vec![T::zero(); n * cfg.d_ff];
            linear(&h2, &lp.w_fc.data, &lp.b_fc.data, d, cfg.d_ff, &mut pre_act);
            let act: Vec<T> = pre_act.iter().map(|&v| gelu(v)).collect();
            let mut m_out = vec![T::zero(); n * d];
            linear(&act, &lp.w_proj.data, &lp.b_proj.data, cfg.d_ff, d, &mut m_out);
            let drop_mlp = mask(n * d);
            if let Some(m) = &drop_mlp {
                m_out.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
            }
            x.iter_mut().zip(&m_out).for_each(|(v, &r)| *v += r);

            layers.push(LayerCache {
                ln1,
                h1,
                qkv,
                att,
                y,
                drop_attn,
                ln2,
                h2,
                pre_act,
                act,
                drop_mlp,
            });
        }

        let mut hf = vec![T::zero(); n * d];
        let lnf = layer_norm(&x, &p.lnf_g.data, &p.lnf_b.data, &mut hf);
        let mut logits = vec![T::zero(); n * cfg.vocab_size];
        linear(&hf, &p.head_w.data, &p.head_b.data, d, cfg.vocab_size, &mut logits);
        Ok(Cache {
            drop_emb,
            layers,
            lnf,
            hf,
            logits,
        })
    }

    /// Unnormalized next-token scores for every position (dropout off).
    pub fn forward(&self, tokens: &[u32]) -> Result<Logits<T>, LmError> {
        let cache = self.forward_cached(tokens, None)?;
        Ok(Logits {
            n: tokens.len(),
            vocab: self.config.vocab_size,
            data: cache.logits,
        })
    }

    /// Summed negative log-likelihood of the non-pad targets and their count.
    pub fn nll_sum(&self, tokens: &[u32]) -> Result<(f64, usize), LmError> {
        if tokens.len() < 2 {
            return Err(LmError::TooShort);
        }
        let logits = self.forward(tokens)?;
        let v = self.config.vocab_size;
        let mut total = 0.0;
        let mut count = 0;
        for i in 0..tokens.len() - 1 {
            let target = tokens[i + 1];
            if target == PAD_ID {
                continue;
            }
            let mut row = logits.data[i * v..(i + 1) * v].to_vec();
            let (max, lse) = softmax_in_place(&mut row);
            let logit = logits.data[i * v + target as usize];
            total += -(logit - max - lse).to_f64_lossy();
            count += 1;
        }
        if count == 0 {
            return Err(LmError::TooShort);
        }
        Ok((total, count))
    }

    /// Mean next-token negative log-likelihood over non-pad targets.
    pub fn nll_loss(&self, tokens: &[u32]) -> Result<f64, LmError> {
        let (s, c) = self.nll_sum(tokens)?;
        Ok(s / c as f64)
    }

    /// Token-weighted mean NLL over a set of sequences.
    pub fn corpus_nll(&self, corpus: &[&[u32]]) -> Result<f64, LmError> {
        if corpus.is_empty() {
            return Err(LmError::EmptyCorpus);
        }
        let mut total = 0.0;
        let mut count = 0;
        for seq in corpus {
            let (s, c) = self.nll_sum(seq)?;
            total += s;
            count += c;
        }
        Ok(total / count as f64)
    }

    /// Gradient of the mean batch loss with respect to each logit.
    pub fn logits_gradient(&self, tokens: &[u32]) -> Result<Logits<T>, LmError> {
        let cache = self.forward_cached(tokens, None)?;
        let count = target_count(tokens);
        if count == 0 {
            return Err(LmError::TooShort);
        }
        let (_, dlogits) = self.loss_rows(&cache.logits, tokens, count);
        Ok(Logits {
            n: tokens.len(),
            vocab: self.config.vocab_size,
            data: dlogits,
        })
    }

    /// Returns (summed NLL, d(sum/norm)/dlogits).
    fn loss_rows(&self, logits: &[T], tokens: &[u32], norm: usize) -> (f64, Vec<T>) {
        let v = self.config.vocab_size;
        let n = tokens.len();
        let inv = T::one() / T::from_usize(norm).unwrap();
        let mut dlogits = vec![T::zero(); n * v];
        let mut total = 0.0;
        for i in 0..n.saturating_sub(1) {
            let target = tokens[i + 1] as usize;
            if target == PAD_ID as usize {
                continue;
            }
            let row = &mut dlogits[i * v..(i + 1) * v];
            row.copy_from_slice(&logits[i * v..(i + 1) * v]);
            let (max, lse) = softmax_in_place(row);
            total += -(logits[i * v + target] - max - lse).to_f64_lossy();
            row[target] -= T::one();
            for g in row.iter_mut() {
                *g *= inv;
            }
        }
        (total, dlogits)
    }

    /// Mean NLL over all non-pad targets of the batch and its gradient.
    /// With `rng` set, dropout is active.
    pub fn loss_and_grad(
        &self,
        batch: &[&[u32]],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Params<T>), LmError> {
        let norm: usize = batch.iter().map(|s| target_count(s)).sum();
        if norm == 0 {
            return Err(LmError::TooShort);
        }
        let mut grads = self.params.zeros_like();
        let mut total = 0.0;
        for seq in batch {
            if seq.len() < 2 {
                continue;
            }
            let cache = self.forward_cached(seq, rng.as_deref_mut())?;
            let (nll, dlogits) = self.loss_rows(&cache.logits, seq, norm);
            total += nll;
            self.backward(&cache, seq, &dlogits, &mut grads);
        }
        Ok((total / norm as f64, grads))
    }

    fn backward(&self, cache: &Cache<T>, tokens: &[u32], dlogits: &[T], grads: &mut Params<T>) {
        let cfg = &self.config;
        let p = &self.params;
        let (n, d) = (tokens.len(), cfg.d_model);

        let mut dhf = vec![T::zero(); n * d];
        linear_backward(
            &cache.hf,
            &p.head_w.data,
            dlogits,
            d,
            cfg.vocab_size,
            &mut grads.head_w.data,
            &mut grads.head_b.data,
            Some(&mut dhf),
        );
        let mut dx = vec![T::zero(); n * d];
        layer_norm_backward(
            &cache.lnf,
            &p.lnf_g.data,
            &dhf,
            &mut grads.lnf_g.data,
            &mut grads.lnf_b.data,
            &mut dx,
        );

        for (li, lc) in cache.layers.iter().enumerate().rev() {
            let lp = &p.layers[li];
            let lg = &mut grads.layers[li];
            self.layer_backward(lc, lp, lg, &mut dx, n);
        }

        if let Some(m) = &cache.drop_emb {
            dx.iter_mut().zip(m).for_each(|(g, &k)| *g *= k);
        }
        for (i, &t) in tokens.iter().enumerate() {
            let g = &dx[i * d..(i + 1) * d];
            axpy(T::one(), g, grads.tok_emb.row_mut(t as usize));
            axpy(T::one(), g, grads.pos_emb.row_mut(i));
        }
    }

    fn layer_backward(
        &self,
        lc: &LayerCache<T>,
        lp: &LayerParams<T>,
        lg: &mut LayerParams<T>,
        dx: &mut [T],
        n: usize,
    ) {
        let cfg = &self.config;
        let d = cfg.d_model;

        // MLP branch.
        let mut dm: Vec<T> = dx.to_vec();
        if let Some(m) = &lc.drop_mlp {
            dm.iter_mut().zip(m).for_each(|(g, &k)| *g *= k);
        }
        let mut dact = vec![T::zero(); n * cfg.d_ff];
        linear_backward(
            &lc.act,
            &lp.w_proj.data,
            &dm,
            cfg.d_ff,
            d,
            &mut lg.w_proj.data,
            &mut lg.b_proj.data,
            Some(&mut dact),
        );
        for (g, &z) in dact.iter_mut().zip(&lc.pre_act) {
            *g *= gelu_grad(z);
        }
        let mut dh2 = vec![T::zero(); n * d];
        linear_backward(
            &lc.h2,
            &lp.w_fc.data,
            &dact,
            d,
            cfg.d_ff,
            &mut lg.w_fc.data,
            &mut lg.b_fc.data,
            Some(&mut dh2),
        );
        let mut dln2 = vec![T::zero(); n * d];
        layer_norm_backward(
            &lc.ln2,
            &lp.ln2_g.data,
            &dh2,
            &mut lg.ln2_g.data,
            &mut lg.ln2_b.data,
            &mut dln2,
        );
        dx.iter_mut().zip(&dln2).for_each(|(g, &r)| *g += r);

        // Attention branch.
        let mut da: Vec<T> = dx.to_vec();
        if let Some(m) = &lc.drop_attn {
            da.iter_mut().zip(m).for_each(|(g, &k)| *g *= k);
        }
        let mut dy = vec![T::zero(); n * d];
        linear_backward(
            &lc.y,
            &lp.w_o.data,
            &da,
            d,
            d,
            &mut lg.w_o.data,
            &mut lg.b_o.data,
            Some(&mut dy),
        );
        let dqkv = self.attention_backward(&lc.qkv, &lc.att, &dy, n);
        let mut dh1 = vec![T::zero(); n * d];
        linear_backward(
            &lc.h1,
            &lp.w_qkv.data,
            &dqkv,
            d,
            3 * d,
            &mut lg.w_qkv.data,
            &mut lg.b_qkv.data,
            Some(&mut dh1),
        );
        let mut dln1 = vec![T::zero(); n * d];
        layer_norm_backward(
            &lc.ln1,
            &lp.ln1_g.data,
            &dh1,
            &mut lg.ln1_g.data,
            &mut lg.ln1_b.data,
            &mut dln1,
        );
        dx.iter_mut().zip(&dln1).for_each(|(g, &r)| *g += r);
    }

    fn attention_backward(&self, qkv: &[T], att: &[Vec<T>], dy: &[T], n: usize) -> Vec<T> {
        let d = self.config.d_model;
        let hd = self.config.head_dim();
        let scale = T::one() / T::from_usize(hd).unwrap().sqrt();
        let mut dqkv = vec![T::zero(); n * 3 * d];
        let mut dp = vec![T::zero(); n];
        for (h, probs) in att.iter().enumerate() {
            let qo = h * hd;
            let ko = d + h * hd;
            let vo = 2 * d + h * hd;
            for i in 0..n {
                let p = &probs[tri(i)..tri(i) + i + 1];
                let dyi = &dy[i * d + h * hd..i * d + (h + 1) * hd];
                let mut s = T::zero();
                for j in 0..=i {
                    let v = &qkv[j * 3 * d + vo..j * 3 * d + vo + hd];
                    dp[j] = dot(dyi, v);
                    s += p[j] * dp[j];
                    axpy(p[j], dyi, &mut dqkv[j * 3 * d + vo..j * 3 * d + vo + hd]);
                }
                let qi: Vec<T> = qkv[i * 3 * d + qo..i * 3 * d + qo + hd].to_vec();
                for j in 0..=i {
                    let ds = p[j] * (dp[j] - s) * scale;
                    if ds == T::zero() {
                        continue;
                    }
                    let (lo, hi) = dqkv.split_at_mut(i.max(j) * 3 * d);
                    // q_i and k_j may live in the same row when i == j.
                    if i == j {
                        let row = &mut hi[..3 * d];
                        let kj: Vec<T> = qkv[j * 3 * d + ko..j * 3 * d + ko + hd].to_vec();
                        axpy(ds, &kj, &mut row[qo..qo + hd]);
                        axpy(ds, &qi, &mut row[ko..ko + hd]);
                    } else {
                        let kj = &qkv[j * 3 * d + ko..j * 3 * d + ko + hd];
                        axpy(ds, kj, &mut hi[qo..qo + hd]);
                        axpy(ds, &qi, &mut lo[j * 3 * d + ko..j * 3 * d + ko + hd]);
                    }
                }
            }
        }
        dqkv
    }
}

/// Number of positions with a non-pad next token.
pub fn target_count(tokens: &[u32]) -> usize {
    tokens.iter().skip(1).filter(|&&t| t != PAD_ID).count()
}
