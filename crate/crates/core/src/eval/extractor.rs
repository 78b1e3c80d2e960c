//! Small feed-forward classifier over layout encodings whose penultimate
//! activations serve as FID features.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoding::ENCODING_DIM;
use super::EvalError;
use crate::lm::kernels::{linear, linear_backward, softmax_in_place};
use crate::lm::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    pub hidden: usize,
    pub feature_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            feature_dim: 32,
            epochs: 60,
            batch_size: 32,
            learning_rate: 3e-3,
            seed: 0,
        }
    }
}

/// Two tanh layers then a linear classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutFeatureExtractor<T> {
    pub classes: Vec<String>,
    mean: Vec<T>,
    scale: Vec<T>,
    w1: Tensor<T>,
    b1: Tensor<T>,
    w2: Tensor<T>,
    b2: Tensor<T>,
    w3: Tensor<T>,
    b3: Tensor<T>,
}

#[derive(Serialize, Deserialize)]
struct ExtractorFile {
    classes: Vec<String>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    tensors: Vec<(Vec<usize>, Vec<f64>)>,
}

struct Acts<T> {
    x: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    logits: Vec<T>,
}

fn tanh_all<T: Scalar>(v: &mut [T]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

impl<T: Scalar> LayoutFeatureExtractor<T> {
    pub fn feature_dim(&self) -> usize {
        self.b2.data.len()
    }

    fn prepare(&self, enc: &[f64]) -> Vec<T> {
        enc.iter()
            .enumerate()
            .map(|(i, &v)| (T::from_f64_lossy(v.max(0.0).ln_1p()) - self.mean[i]) * self.scale[i])
            .collect()
    }

    fn forward(&self, x: Vec<T>) -> Acts<T> {
        let n = x.len() / ENCODING_DIM;
        let (h, f, c) = (self.b1.data.len(), self.b2.data.len(), self.b3.data.len());
        let mut h1 = vec![T::zero(); n * h];
        linear(&x, &self.w1.data, &self.b1.data, ENCODING_DIM, h, &mut h1);
        tanh_all(&mut h1);
        let mut h2 = vec![T::zero(); n * f];
        linear(&h1, &self.w2.data, &self.b2.data, h, f, &mut h2);
        tanh_all(&mut h2);
        let mut logits = vec![T::zero(); n * c];
        linear(&h2, &self.w3.data, &self.b3.data, f, c, &mut logits);
        Acts { x, h1, h2, logits }
    }

    /// Penultimate-layer activations.
    pub fn features(&self, encoding: &[f64]) -> Vec<f64> {
        let a = self.forward(self.prepare(encoding));
        a.h2.iter().map(|v| v.to_f64_lossy()).collect()
    }

    /// Predicted class index.
    pub fn classify(&self, encoding: &[f64]) -> usize {
        let a = self.forward(self.prepare(encoding));
        crate::lm::argmax(&a.logits)
    }

    /// Trains on `(encoding, label)` pairs; classes are the sorted distinct labels.
    pub fn fit(data: &[(Vec<f64>, String)], cfg: &ExtractorConfig) -> Result<Self, EvalError> {
        if data.len() < 2 {
            return Err(EvalError::TooFewSamples(data.len()));
        }
        if data.iter().any(|(e, _)| e.len() != ENCODING_DIM) {
            return Err(EvalError::DimensionMismatch);
        }
        let mut classes: Vec<String> = data.iter().map(|(_, l)| l.clone()).collect();
        classes.sort();
        classes.dedup();
        let labels: Vec<usize> = data
            .iter()
            .map(|(_, l)| classes.binary_search(l).unwrap())
            .collect();

        let logged: Vec<Vec<f64>> = data
            .iter()
            .map(|(e, _)| e.iter().map(|v| v.max(0.0).ln_1p()).collect())
            .collect();
        let n = logged.len() as f64;
        let mean: Vec<f64> = (0..ENCODING_DIM)
            .map(|i| logged.iter().map(|r| r[i]).sum::<f64>() / n)
            .collect();
        let scale: Vec<f64> = (0..ENCODING_DIM)
            .map(|i| {
                let var = logged.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / n;
                if var > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = |shape: &[usize], rng: &mut ChaCha8Rng| {
            use rand_distr::{Distribution, Normal};
            let dist = Normal::new(0.0, (1.0 / shape[0] as f64).sqrt()).unwrap();
            Tensor {
                shape: shape.to_vec(),
                data: (0..shape[0] * shape[1])
                    .map(|_| T::from_f64_lossy(dist.sample(rng)))
                    .collect(),
            }
        };
        let (h, f, c) = (cfg.hidden, cfg.feature_dim, classes.len());
        let mut model = Self {
            classes,
            mean: mean.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            scale: scale.iter().map(|&v| T::from_f64_lossy(v)).collect(),
            w1: init(&[ENCODING_DIM, h], &mut rng),
            b1: Tensor::zeros(&[h]),
            w2: init(&[h, f], &mut rng),
            b2: Tensor::zeros(&[f]),
            w3: init(&[f, c], &mut rng),
            b3: Tensor::zeros(&[c]),
        };
        let inputs: Vec<Vec<T>> = data.iter().map(|(e, _)| model.prepare(e)).collect();

        let mut m1: Vec<Vec<T>> = model.tensors().iter().map(|t| vec![T::zero(); t.data.len()]).collect();
        let mut m2 = m1.clone();
        let (b1, b2) = (0.9f64, 0.999f64);
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let mut x = Vec::with_capacity(chunk.len() * ENCODING_DIM);
                for &i in chunk {
                    x.extend_from_slice(&inputs[i]);
                }
                let tgt: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
                let grads = model.gradients(x, &tgt);
                step += 1;
                let lr = cfg.learning_rate * (1.0 - b2.powi(step)).sqrt() / (1.0 - b1.powi(step));
                for (((t, g), m), v) in model.tensors_mut().into_iter().zip(&grads).zip(&mut m1).zip(&mut m2) {
                    for i in 0..t.data.len() {
                        let gi = g[i].to_f64_lossy();
                        let mi = b1 * m[i].to_f64_lossy() + (1.0 - b1) * gi;
                        let vi = b2 * v[i].to_f64_lossy() + (1.0 - b2) * gi * gi;
                        m[i] = T::from_f64_lossy(mi);
                        v[i] = T::from_f64_lossy(vi);
                        t.data[i] -= T::from_f64_lossy(lr * mi / (vi.sqrt() + 1e-8));
                    }
                }
            }
        }
        Ok(model)
    }

    fn tensors(&self) -> [&Tensor<T>; 6] {
        [&self.w1, &self.b1, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    fn tensors_mut(&mut self) -> [&mut Tensor<T>; 6] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    /// Mean cross-entropy gradients, in [`Self::tensors`] order.
    fn gradients(&self, x: Vec<T>, targets: &[usize]) -> Vec<Vec<T>> {
        let a = self.forward(x);
        let n = targets.len();
        let (h, f, c) = (self.b1.data.len(), self.b2.data.len(), self.b3.data.len());
        let inv = T::one() / T::from_usize(n).unwrap();
        let mut dlogits = a.logits.clone();
        for (r, &t) in targets.iter().enumerate() {
            let row = &mut dlogits[r * c..(r + 1) * c];
            softmax_in_place(row);
            row[t] -= T::one();
            row.iter_mut().for_each(|v| *v *= inv);
        }
        let mut g: Vec<Vec<T>> = self.tensors().iter().map(|t| vec![T::zero(); t.data.len()]).collect();
        let mut dh2 = vec![T::zero(); n * f];
        let (g01, rest) = g.split_at_mut(2);
        let (g23, g45) = rest.split_at_mut(2);
        let (gw3, gb3) = g45.split_at_mut(1);
        linear_backward(&a.h2, &self.w3.data, &dlogits, f, c, &mut gw3[0], &mut gb3[0], Some(&mut dh2));
        for (d, &y) in dh2.iter_mut().zip(&a.h2) {
            *d *= T::one() - y * y;
        }
        let mut dh1 = vec![T::zero(); n * h];
        let (gw2, gb2) = g23.split_at_mut(1);
        linear_backward(&a.h1, &self.w2.data, &dh2, h, f, &mut gw2[0], &mut gb2[0], Some(&mut dh1));
        for (d, &y) in dh1.iter_mut().zip(&a.h1) {
            *d *= T::one() - y * y;
        }
        let (gw1, gb1) = g01.split_at_mut(1);
        linear_backward(&a.x, &self.w1.data, &dh1, ENCODING_DIM, h, &mut gw1[0], &mut gb1[0], None);
        g
    }

    pub fn to_json(&self) -> String {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        serde_json::to_string(&ExtractorFile {
            classes: self.classes.clone(),
            mean: f(&self.mean),
            scale: f(&self.scale),
            tensors: self.tensors().iter().map(|t| (t.shape.clone(), f(&t.data))).collect(),
        })
        .expect("extractor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let file: ExtractorFile =
            serde_json::from_str(text).map_err(|e| EvalError::Malformed(e.to_string()))?;
        let bad = || EvalError::Malformed("unexpected tensor shapes".into());
        if file.tensors.len() != 6 || file.mean.len() != ENCODING_DIM || file.scale.len() != ENCODING_DIM {
            return Err(bad());
        }
        let t: Vec<Tensor<T>> = file
            .tensors
            .into_iter()
            .map(|(shape, data)| Tensor {
                shape,
                data: data.into_iter().map(T::from_f64_lossy).collect(),
            })
            .collect();
        let [w1, b1, w2, b2, w3, b3]: [Tensor<T>; 6] = t.try_into().map_err(|_| bad())?;
        let ok = w1.shape == [ENCODING_DIM, b1.data.len()]
            && w2.shape == [b1.data.len(), b2.data.len()]
            && w3.shape == [b2.data.len(), b3.data.len()]
            && b3.data.len() == file.classes.len();
        if !ok {
            return Err(bad());
        }
        let conv = |v: Vec<f64>| v.into_iter().map(T::from_f64_lossy).collect();
        Ok(Self {
            classes: file.classes,
            mean: conv(file.mean),
            scale: conv(file.scale),
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        })
    }
}
