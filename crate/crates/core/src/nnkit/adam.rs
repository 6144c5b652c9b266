//! Adam with bias correction. One step updates every parameter in a
//! set from its accumulated gradient, then zeroes the gradients.

use super::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// One Adam step over the whole set. The set's own step counter drives
/// bias correction.
pub fn adam_step(ps: &mut ParamSet, cfg: &AdamConfig) {
    ps.step += 1;
    let t = ps.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for (_, p) in ps.iter_mut() {
        for i in 0..p.value.data.len() {
            let g = p.grad.data[i];
            p.m.data[i] = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * g;
            p.v.data[i] = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = p.m.data[i] / bc1;
            let vhat = p.v.data[i] / bc2;
            p.value.data[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
        p.grad.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::Tensor;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::from_vec(&[2], vec![1.5, -2.5]));
        adam_step(&mut ps, &AdamConfig::default());
        assert_eq!(ps.value("w").data, vec![1.5, -2.5]);
    }

    #[test]
    fn first_step_moves_by_lr_for_unit_gradient() {
        // g = 1, step 1: mhat = 1, vhat = 1, update = -lr / (1 + eps).
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::from_vec(&[1], vec![0.0]));
        ps.param_mut("w").grad.data[0] = 1.0;
        let cfg = AdamConfig::default();
        adam_step(&mut ps, &cfg);
        let expect = -cfg.lr / (1.0 + cfg.eps);
        assert!((ps.value("w").data[0] - expect).abs() < 1e-15);
        assert!((ps.value("w").data[0] + 0.001).abs() < 1e-10);
        // Gradients are cleared by the step.
        assert_eq!(ps.param_mut("w").grad.data[0], 0.0);
    }

    #[test]
    fn constant_gradient_descends() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::from_vec(&[1], vec![0.0]));
        let cfg = AdamConfig::default();
        for _ in 0..100 {
            ps.param_mut("w").grad.data[0] = 2.0;
            adam_step(&mut ps, &cfg);
        }
        assert!(ps.value("w").data[0] < -0.05);
    }

    #[test]
    fn step_counter_advances() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::zeros(&[1]));
        adam_step(&mut ps, &AdamConfig::default());
        adam_step(&mut ps, &AdamConfig::default());
        assert_eq!(ps.step, 2);
    }
}
