use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::scalar::Scalar;

/// Row-major dense tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    fn normal(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("valid std");
        Self {
            shape: shape.to_vec(),
            data: (0..shape.iter().product::<usize>())
                .map(|_| T::from_f64_lossy(dist.sample(rng)))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn row(&self, r: usize) -> &[T] {
        let w = self.shape[1];
        &self.data[r * w..(r + 1) * w]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let w = self.shape[1];
        &mut self.data[r * w..(r + 1) * w]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub ln1_g: Tensor<T>,
    pub ln1_b: Tensor<T>,
    pub w_qkv: Tensor<T>,
    pub b_qkv: Tensor<T>,
    pub w_o: Tensor<T>,
    pub b_o: Tensor<T>,
    pub ln2_g: Tensor<T>,
    pub ln2_b: Tensor<T>,
    pub w_fc: Tensor<T>,
    pub b_fc: Tensor<T>,
    pub w_proj: Tensor<T>,
    pub b_proj: Tensor<T>,
}

/// All trainable tensors of the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub tok_emb: Tensor<T>,
    pub pos_emb: Tensor<T>,
    pub layers: Vec<LayerParams<T>>,
    pub lnf_g: Tensor<T>,
    pub lnf_b: Tensor<T>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

impl<T: Scalar> Params<T> {
    /// Weights and embeddings ~ N(0, std²); biases zero; norm gains one.
    pub fn init(cfg: &ModelConfig, std: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let tok_emb = Tensor::normal(&[cfg.vocab_size, d], std, &mut rng);
        let pos_emb = Tensor::normal(&[cfg.context, d], std, &mut rng);
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                ln1_g: Tensor::filled(&[d], T::one()),
                ln1_b: Tensor::zeros(&[d]),
                w_qkv: Tensor::normal(&[d, 3 * d], std, &mut rng),
                b_qkv: Tensor::zeros(&[3 * d]),
                w_o: Tensor::normal(&[d, d], std, &mut rng),
                b_o: Tensor::zeros(&[d]),
                ln2_g: Tensor::filled(&[d], T::one()),
                ln2_b: Tensor::zeros(&[d]),
                w_fc: Tensor::normal(&[d, cfg.d_ff], std, &mut rng),
                b_fc: Tensor::zeros(&[cfg.d_ff]),
                w_proj: Tensor::normal(&[cfg.d_ff, d], std, &mut rng),
                b_proj: Tensor::zeros(&[d]),
            })
            .collect();
        Self {
            tok_emb,
            pos_emb,
            layers,
            lnf_g: Tensor::filled(&[d], T::one()),
            lnf_b: Tensor::zeros(&[d]),
            head_w: Tensor::normal(&[d, cfg.vocab_size], std, &mut rng),
            head_b: Tensor::zeros(&[cfg.vocab_size]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor<T>| t.zeros_like();
        Self {
            tok_emb: z(&self.tok_emb),
            pos_emb: z(&self.pos_emb),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_g: z(&l.ln1_g),
                    ln1_b: z(&l.ln1_b),
                    w_qkv: z(&l.w_qkv),
                    b_qkv: z(&l.b_qkv),
                    w_o: z(&l.w_o),
                    b_o: z(&l.b_o),
                    ln2_g: z(&l.ln2_g),
                    ln2_b: z(&l.ln2_b),
                    w_fc: z(&l.w_fc),
                    b_fc: z(&l.b_fc),
                    w_proj: z(&l.w_proj),
                    b_proj: z(&l.b_proj),
                })
                .collect(),
            lnf_g: z(&self.lnf_g),
            lnf_b: z(&self.lnf_b),
            head_w: z(&self.head_w),
            head_b: z(&self.head_b),
        }
    }

    /// Named tensors in a fixed order (the checkpoint order).
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("tok_emb".to_string(), &self.tok_emb),
            ("pos_emb".to_string(), &self.pos_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            for (n, t) in [
                ("ln1_g", &l.ln1_g),
                ("ln1_b", &l.ln1_b),
                ("w_qkv", &l.w_qkv),
                ("b_qkv", &l.b_qkv),
                ("w_o", &l.w_o),
                ("b_o", &l.b_o),
                ("ln2_g", &l.ln2_g),
                ("ln2_b", &l.ln2_b),
                ("w_fc", &l.w_fc),
                ("b_fc", &l.b_fc),
                ("w_proj", &l.w_proj),
                ("b_proj", &l.b_proj),
            ] {
                out.push((format!("layers.{i}.{n}"), t));
            }
        }
        out.push(("lnf_g".into(), &self.lnf_g));
        out.push(("lnf_b".into(), &self.lnf_b));
        out.push(("head_w".into(), &self.head_w));
        out.push(("head_b".into(), &self.head_b));
        out
    }

    /// Mutable tensors in the same order as [`Params::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.tok_emb, &mut self.pos_emb];
        for l in &mut self.layers {
            out.extend([
                &mut l.ln1_g,
                &mut l.ln1_b,
                &mut l.w_qkv,
                &mut l.b_qkv,
                &mut l.w_o,
                &mut l.b_o,
                &mut l.ln2_g,
                &mut l.ln2_b,
                &mut l.w_fc,
                &mut l.b_fc,
                &mut l.w_proj,
                &mut l.b_proj,
            ]);
        }
        out.extend([
            &mut self.lnf_g,
            &mut self.lnf_b,
            &mut self.head_w,
            &mut self.head_b,
        ]);
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named()
            .iter()
            .all(|(_, t)| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flat view of parameter `flat` (in [`Params::named`] order).
    pub fn get_flat(&self, mut flat: usize) -> T {
        for (_, t) in self.named() {
            if flat < t.data.len() {
                return t.data[flat];
            }
            flat -= t.data.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut flat: usize, v: T) {
        for t in self.tensors_mut() {
            if flat < t.data.len() {
                t.data[flat] = v;
                return;
            }
            flat -= t.data.len();
        }
        panic!("flat index out of range")
    }
}
