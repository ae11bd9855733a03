use super::{shape_err, NnError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam. Moment buffers are allocated on the first step and
/// the parameter layout must stay fixed afterwards.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<T>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(shape_err("adam_step", format!("{} grad tensors", params.len()), grads.len()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(shape_err("adam_step", format!("tensor {i}: {}", p.len()), g.len()));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(shape_err("adam_step", "parameter layout of the first step", "a different layout"));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::lit(1.0 - c.beta2.powi(self.step as i32));
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::<f64>::new(AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![0.3, -7.0, 1e-3];
        opt.step(&mut [&mut p], &[&g]).unwrap();
        let start = [1.0, -2.0, 0.5];
        for i in 0..3 {
            let expected = 1e-4 * g[i].abs() / (g[i].abs() + 1e-8);
            assert!(((start[i] - p[i]).abs() - expected).abs() < 1e-15);
            assert!(((start[i] - p[i]).abs() - 1e-4).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut opt = Adam::<f64>::new(AdamConfig::default());
        let mut p = vec![0.25; 4];
        for _ in 0..50 {
            opt.step(&mut [&mut p], &[&[0.0; 4]]).unwrap();
        }
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut opt = Adam::<f64>::new(cfg);
        let mut p = vec![0.0];
        opt.step(&mut [&mut p], &[&[1.0]]).unwrap();
        // m1 = 0.1, v1 = 0.001, m̂ = 1, v̂ = 1
        let p1 = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - p1).abs() < 1e-15);
        opt.step(&mut [&mut p], &[&[-1.0]]).unwrap();
        // m2 = 0.09 - 0.1 = -0.01, v2 = 0.000999 + 0.001 = 0.001999
        let m2: f64 = -0.01;
        let v2: f64 = 0.001999;
        assert!((opt.first_moment()[0][0] - m2).abs() < 1e-15);
        assert!((opt.second_moment()[0][0] - v2).abs() < 1e-15);
        let m_hat = m2 / (1.0 - 0.81);
        let v_hat = v2 / (1.0 - 0.999f64.powi(2));
        let p2 = p1 - 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - p2).abs() < 1e-15);
        assert!(p[0] > p1, "second step moves back toward the start");
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut opt = Adam::<f64>::new(AdamConfig::default());
        let mut p = vec![0.0; 3];
        assert!(opt.step(&mut [&mut p], &[&[1.0, 2.0]]).is_err());
        opt.step(&mut [&mut p], &[&[1.0, 2.0, 3.0]]).unwrap();
        let mut q = vec![0.0; 2];
        assert!(opt.step(&mut [&mut q], &[&[1.0, 2.0]]).is_err());
    }
}
