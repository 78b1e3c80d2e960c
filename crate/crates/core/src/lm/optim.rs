use super::config::TrainConfig;
use super::params::Params;
use crate::scalar::Scalar;

/// Adam with decoupled weight decay, applied to matrices only.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    m: Params<T>,
    v: Params<T>,
    step: u32,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &Params<T>, cfg: &TrainConfig) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn steps_taken(&self) -> u32 {
        self.step
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let b1 = T::from_f64_lossy(self.beta1);
        let b2 = T::from_f64_lossy(self.beta2);
        let one = T::one();
        let step_size = T::from_f64_lossy(lr / bc1);
        let inv_sqrt_bc2 = T::from_f64_lossy(1.0 / bc2.sqrt());
        let eps = T::from_f64_lossy(self.eps);
        let decay = T::from_f64_lossy(1.0 - lr * self.weight_decay);

        let g_all = grads.named();
        let ps = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, m), v), (_, g)) in ps.into_iter().zip(ms).zip(vs).zip(g_all) {
            let decayed = p.shape.len() == 2;
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (one - b1) * gi;
                v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
                if decayed {
                    p.data[i] *= decay;
                }
                let denom = v.data[i].sqrt() * inv_sqrt_bc2 + eps;
                p.data[i] -= step_size * m.data[i] / denom;
            }
        }
    }
}

/// Global L2 norm of all gradients.
pub fn grad_norm<T: Scalar>(grads: &Params<T>) -> f64 {
    grads
        .named()
        .iter()
        .flat_map(|(_, t)| t.data.iter())
        .map(|v| {
            let f = v.to_f64_lossy();
            f * f
        })
        .sum::<f64>()
        .sqrt()
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm<T: Scalar>(grads: &mut Params<T>, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = T::from_f64_lossy(max_norm / norm);
        for t in grads.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::config::ModelConfig;

    fn cfg() -> ModelConfig {
        ModelConfig {
            n_layers: 1,
            n_heads: 1,
            d_model: 2,
            d_ff: 2,
            context: 2,
            vocab_size: 3,
            dropout: 0.0,
        }
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p: Params<f64> = Params::init(&cfg(), 0.5, 0);
        let before = p.clone();
        let mut g = p.zeros_like();
        g.head_b.data = vec![0.3, -2.0, 0.0];
        let tc = TrainConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(&p, &tc);
        opt.step(&mut p, &g, 0.1);
        let d: Vec<f64> = (0..3).map(|i| p.head_b.data[i] - before.head_b.data[i]).collect();
        assert!((d[0] + 0.1).abs() < 1e-6);
        assert!((d[1] - 0.1).abs() < 1e-6);
        assert_eq!(d[2], 0.0);
        assert_eq!(p.tok_emb, before.tok_emb);
    }

    #[test]
    fn decay_applies_to_matrices_only() {
        let mut p: Params<f64> = Params::init(&cfg(), 0.5, 0);
        p.lnf_g.data = vec![2.0, 2.0];
        let before = p.clone();
        let g = p.zeros_like();
        let tc = TrainConfig {
            weight_decay: 0.5,
            ..Default::default()
        };
        AdamW::new(&p, &tc).step(&mut p, &g, 0.1);
        assert_eq!(p.lnf_g, before.lnf_g);
        for (a, b) in p.head_w.data.iter().zip(&before.head_w.data) {
            assert!((a - b * 0.95).abs() < 1e-15);
        }
    }

    #[test]
    fn clipping_caps_norm() {
        let p: Params<f64> = Params::init(&cfg(), 0.5, 0);
        let mut g = p.clone();
        let n = clip_grad_norm(&mut g, 0.1);
        assert!(n > 0.1);
        assert!((grad_norm(&g) - 0.1).abs() < 1e-12);
    }
}
