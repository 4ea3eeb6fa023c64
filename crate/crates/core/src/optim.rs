//! AdamW with decoupled weight decay and a linear warmup schedule.

use alloc::vec::Vec;

use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWConfig {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        Self { learning_rate, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Linear ramp from 0 to the base rate over `warmup_steps`, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarmupSchedule {
    pub warmup_steps: usize,
}

impl WarmupSchedule {
    pub fn from_fraction(total_steps: usize, fraction: f64) -> Self {
        let warmup_steps = libm::ceil(total_steps as f64 * fraction.clamp(0.0, 1.0)) as usize;
        Self { warmup_steps }
    }

    /// Multiplier for 0-based step `step`.
    pub fn factor(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            1.0
        } else {
            (step + 1) as f64 / self.warmup_steps as f64
        }
    }
}

/// Per-parameter-group optimizer state. Every group shares `config` except
/// for its learning-rate multiplier.
#[derive(Clone, Debug)]
pub struct AdamW {
    config: AdamWConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let first: Vec<Matrix> = shapes.into_iter().map(|(r, c)| Matrix::zeros(r, c)).collect();
        let second = first.clone();
        Self { config, first, second, step: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. `lr_scales[i]` multiplies the (scheduled) rate for
    /// parameter `i`; a scale of 0 freezes it entirely, decay included.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[Matrix], lr: f64, lr_scales: &[f64]) {
        assert_eq!(params.len(), self.first.len(), "parameter count changed");
        assert_eq!(grads.len(), params.len());
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(c.beta1, f64::from(t));
        let bc2 = 1.0 - libm::pow(c.beta2, f64::from(t));
        for (i, p) in params.iter_mut().enumerate() {
            let rate = lr * lr_scales[i];
            if rate == 0.0 {
                continue;
            }
            let g = grads[i].as_slice();
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            for (j, w) in p.as_mut_slice().iter_mut().enumerate() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= rate * c.weight_decay * *w;
                *w -= rate * m_hat / (libm::sqrt(v_hat) + c.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = Matrix::from_vec(1, 2, vec![1.0, -1.0]);
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0), [(1, 2)]);
        opt.step(&mut [&mut p], &[Matrix::from_vec(1, 2, vec![3.0, -0.5])], 0.1, &[1.0]);
        // bias-corrected first step is lr * sign(g)
        assert!((p.get(0, 0) - 0.9).abs() < 1e-6);
        assert!((p.get(0, 1) + 0.9).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut p = Matrix::from_vec(1, 1, vec![2.0]);
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.01), [(1, 1)]);
        opt.step(&mut [&mut p], &[Matrix::zeros(1, 1)], 0.1, &[1.0]);
        assert_eq!(p.get(0, 0), 2.0 - 0.1 * 0.01 * 2.0);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = Matrix::from_vec(1, 1, vec![5.0]);
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.0), [(1, 1)]);
        for _ in 0..500 {
            let g = p.scale(2.0);
            opt.step(&mut [&mut p], &[g], 0.1, &[1.0]);
        }
        assert!(p.get(0, 0).abs() < 0.05);
    }

    #[test]
    fn warmup_ramps_linearly() {
        let s = WarmupSchedule::from_fraction(100, 0.1);
        assert_eq!(s.warmup_steps, 10);
        assert!((s.factor(0) - 0.1).abs() < 1e-12);
        assert_eq!(s.factor(9), 1.0);
        assert_eq!(s.factor(50), 1.0);
        assert_eq!(WarmupSchedule::from_fraction(100, 0.0).factor(0), 1.0);
    }
}
