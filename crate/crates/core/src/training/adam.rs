use crate::networks::{ConvLayer, NetworkParams};
use crate::training::schedule::lr_at_step;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam over one network, with the step-decay schedule spread over
/// `total_steps` updates.
#[derive(Clone, Debug)]
pub struct Optimizer {
    cfg: AdamConfig,
    lr0: f64,
    total_steps: usize,
    step: usize,
    m: Vec<ConvLayer>,
    v: Vec<ConvLayer>,
}

impl Optimizer {
    pub fn new(params: &NetworkParams, cfg: AdamConfig, lr0: f64, total_steps: usize) -> Self {
        Optimizer {
            cfg,
            lr0,
            total_steps: total_steps.max(1),
            step: 0,
            m: params.zeros_like(),
            v: params.zeros_like(),
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        lr_at_step(self.step, self.total_steps, self.lr0)
    }

    /// Applies one update and returns the learning rate used.
    pub fn apply(&mut self, params: &mut NetworkParams, grads: &[ConvLayer]) -> f64 {
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((layer, g), m), v) in params.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let pairs = [
                (&mut layer.weight, &g.weight, &mut m.weight, &mut v.weight),
                (&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias),
            ];
            for (p, g, m, v) in pairs {
                for k in 0..p.len() {
                    m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                    v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                    let mh = m[k] / c1;
                    let vh = v[k] / c2;
                    p[k] -= lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::networks::Role;

    #[test]
    fn first_step_moves_each_parameter_by_lr() {
        let mut p = NetworkParams::zeros(Role::Alpha1, 2);
        let mut g = p.zeros_like();
        g[0].weight[0] = 3.0;
        g[0].weight[1] = -0.01;
        let mut opt = Optimizer::new(&p, AdamConfig::default(), 1e-3, 10);
        let lr = opt.apply(&mut p, &g);
        assert_eq!(lr, 1e-3);
        assert!((p.layers[0].weight[0] + 1e-3).abs() < 1e-9);
        assert!((p.layers[0].weight[1] - 1e-3).abs() < 1e-9);
        assert_eq!(p.layers[0].weight[2], 0.0);
    }

    #[test]
    fn schedule_applies_over_total_steps() {
        let mut p = NetworkParams::zeros(Role::Alpha1, 1);
        let g = p.zeros_like();
        let mut opt = Optimizer::new(&p, AdamConfig::default(), 1e-4, 5);
        let lrs: Vec<f64> = (0..5).map(|_| opt.apply(&mut p, &g)).collect();
        assert_eq!(lrs, vec![1e-4, 1e-4, 1e-4, 5e-5, 2.5e-5]);
    }
}
