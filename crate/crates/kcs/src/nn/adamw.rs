//! Adam with decoupled weight decay, plus the linear warmup/decay
//! learning-rate schedule used for selector training.

use ndarray::Array2;

use super::layers::ParamSet;

#[derive(Clone, Debug)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Optional global-norm gradient clip.
    pub clip_norm: Option<f64>,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            clip_norm: Some(1.0),
        }
    }
}

pub struct AdamW {
    cfg: AdamWConfig,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamW {
    pub fn new(params: &ParamSet, cfg: AdamWConfig) -> Self {
        let m = params.ids().map(|id| Array2::zeros(params.value(id).raw_dim())).collect();
        let v = params.ids().map(|id| Array2::zeros(params.value(id).raw_dim())).collect();
        AdamW { cfg, step: 0, m, v }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. `lr_scale` multiplies the base learning rate (schedule
    /// hook); weight decay is decoupled and scaled the same way.
    pub fn step(&mut self, params: &mut ParamSet, grads: &mut [Array2<f64>], lr_scale: f64) {
        assert_eq!(grads.len(), params.len(), "gradient/parameter count mismatch");
        if let Some(max_norm) = self.cfg.clip_norm {
            let total: f64 = grads.iter().map(|g| g.iter().map(|&v| v * v).sum::<f64>()).sum();
            let norm = total.sqrt();
            if norm > max_norm {
                let scale = max_norm / norm;
                for g in grads.iter_mut() {
                    *g *= scale;
                }
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let lr = self.cfg.lr * lr_scale;
        let bc1 = 1.0 - self.cfg.beta1.powf(t);
        let bc2 = 1.0 - self.cfg.beta2.powf(t);
        for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = &grads[i];
            self.m[i] = &self.m[i] * self.cfg.beta1 + &(g * (1.0 - self.cfg.beta1));
            self.v[i] = &self.v[i] * self.cfg.beta2 + &(g.mapv(|x| x * x) * (1.0 - self.cfg.beta2));
            let p = params.value_mut(id);
            for ((slot, &m), &v) in p.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                let mhat = m / bc1;
                let vhat = v / bc2;
                *slot -= lr * (mhat / (vhat.sqrt() + self.cfg.eps) + self.cfg.weight_decay * *slot);
            }
        }
    }
}

/// Linear warmup to 1.0 over `warmup_ratio` of `total_steps`, then linear
/// decay to 0 at the final step. Returns the multiplier for the base lr.
pub fn warmup_linear(step: u64, total_steps: u64, warmup_ratio: f64) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    let warmup = ((total_steps as f64) * warmup_ratio).ceil().max(1.0);
    let s = step as f64;
    if s < warmup {
        s / warmup
    } else {
        let remaining = (total_steps as f64 - s).max(0.0);
        let span = (total_steps as f64 - warmup).max(1.0);
        remaining / span
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::xavier;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn adamw_descends_a_quadratic() {
        // Minimize ||p||^2; gradient is 2p. Expect monotone norm shrink.
        let mut ps = ParamSet::new();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let id = ps.add("p", xavier(&mut rng, 4, 4));
        let cfg = AdamWConfig { lr: 0.05, weight_decay: 0.0, clip_norm: None, ..Default::default() };
        let mut opt = AdamW::new(&ps, cfg);
        let norm = |ps: &ParamSet| ps.value(id).iter().map(|&v| v * v).sum::<f64>();
        let start = norm(&ps);
        for _ in 0..200 {
            let mut grads = vec![ps.value(id) * 2.0];
            opt.step(&mut ps, &mut grads, 1.0);
        }
        assert!(norm(&ps) < start * 1e-3);
    }

    #[test]
    fn weight_decay_shrinks_params_without_gradient() {
        let mut ps = ParamSet::new();
        let id = ps.add("p", Array2::from_elem((2, 2), 1.0));
        let cfg = AdamWConfig { lr: 0.1, weight_decay: 0.5, clip_norm: None, ..Default::default() };
        let mut opt = AdamW::new(&ps, cfg);
        let mut grads = vec![Array2::zeros((2, 2))];
        opt.step(&mut ps, &mut grads, 1.0);
        let v = ps.value(id)[[0, 0]];
        assert!((v - 0.95).abs() < 1e-12, "decoupled decay: 1 - lr*wd*1 = 0.95, got {v}");
    }

    #[test]
    fn clip_rescales_large_gradients() {
        let mut ps = ParamSet::new();
        let _ = ps.add("p", Array2::zeros((1, 2)));
        let cfg = AdamWConfig { clip_norm: Some(1.0), ..Default::default() };
        let mut opt = AdamW::new(&ps, cfg);
        let mut grads = vec![Array2::from_shape_vec((1, 2), vec![3.0, 4.0]).unwrap()];
        opt.step(&mut ps, &mut grads, 1.0);
        let norm = grads[0].iter().map(|&v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_warms_up_then_decays_to_zero() {
        let total = 100;
        assert_eq!(warmup_linear(0, total, 0.1), 0.0);
        assert!((warmup_linear(5, total, 0.1) - 0.5).abs() < 1e-12);
        assert_eq!(warmup_linear(10, total, 0.1), 1.0);
        let mid = warmup_linear(55, total, 0.1);
        assert!(mid < 1.0 && mid > 0.0);
        assert_eq!(warmup_linear(100, total, 0.1), 0.0);
        // Monotone decay after warmup.
        let a = warmup_linear(20, total, 0.1);
        let b = warmup_linear(80, total, 0.1);
        assert!(a > b);
    }
}
