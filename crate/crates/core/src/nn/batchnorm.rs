//! Per-channel batch normalization over the time axis (and the batch).
//!
//! Training mode normalizes with statistics pooled over every time step of
//! every sequence in the batch. Inference mode applies the frozen running
//! statistics as a per-channel affine map, so each output column depends on
//! its own input column only.

use super::{shape_err, NnError, Tensor2D};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

/// Values the backward pass needs from a training-mode forward.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub x_hat: Vec<Tensor2D<T>>,
    pub mean: Vec<T>,
    /// Biased batch variance.
    pub var: Vec<T>,
    pub inv_std: Vec<T>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnGrad<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Real> BnGrad<T> {
    pub fn zeros(channels: usize) -> Self {
        Self {
            gamma: vec![T::zero(); channels],
            beta: vec![T::zero(); channels],
        }
    }
}

impl<T: Real> BatchNorm<T> {
    /// gamma 1, beta 0, running stats (0, 1), momentum 0.1, eps 1e-5.
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, op: &'static str, x: &Tensor2D<T>) -> Result<(), NnError> {
        if x.channels() != self.channels() {
            return Err(shape_err(op, format!("{} channels", self.channels()), x.channels()));
        }
        if x.time() == 0 {
            return Err(NnError::Argument {
                op,
                reason: "zero-length time axis".into(),
            });
        }
        Ok(())
    }

    /// Frozen inference transform as `(scale, shift)` per channel.
    pub fn infer_affine(&self) -> (Vec<T>, Vec<T>) {
        let scale: Vec<T> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(&g, &v)| g / (v + self.eps).sqrt())
            .collect();
        let shift = self
            .beta
            .iter()
            .zip(&self.running_mean)
            .zip(&scale)
            .map(|((&b, &m), &s)| b - m * s)
            .collect();
        (scale, shift)
    }

    pub fn forward_infer(&self, x: &Tensor2D<T>) -> Result<Tensor2D<T>, NnError> {
        self.check("batchnorm_forward", x)?;
        let (scale, shift) = self.infer_affine();
        let mut y = x.clone();
        for c in 0..self.channels() {
            for v in y.row_mut(c) {
                *v = *v * scale[c] + shift[c];
            }
        }
        Ok(y)
    }

    /// Normalizes with batch statistics. Running statistics are left
    /// untouched; apply [`BatchNorm::update_running_stats`] with the returned
    /// cache to advance them.
    pub fn forward_train(
        &self,
        xs: &[Tensor2D<T>],
    ) -> Result<(Vec<Tensor2D<T>>, BnCache<T>), NnError> {
        if xs.is_empty() {
            return Err(NnError::Argument {
                op: "batchnorm_forward",
                reason: "empty batch".into(),
            });
        }
        for x in xs {
            if x.channels() != self.channels() {
                return Err(shape_err("batchnorm_forward", self.channels(), x.channels()));
            }
        }
        let count: usize = xs.iter().map(|x| x.time()).sum();
        if count == 0 {
            return Err(NnError::Argument {
                op: "batchnorm_forward",
                reason: "zero-length time axis".into(),
            });
        }
        let n = T::lit(count as f64);
        let c_len = self.channels();
        let mut mean = vec![T::zero(); c_len];
        let mut var = vec![T::zero(); c_len];
        for c in 0..c_len {
            let s: T = xs.iter().map(|x| x.row(c).iter().copied().sum::<T>()).sum();
            mean[c] = s / n;
            let ss: T = xs
                .iter()
                .map(|x| x.row(c).iter().map(|&v| (v - mean[c]) * (v - mean[c])).sum::<T>())
                .sum();
            var[c] = ss / n;
        }
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
        let mut x_hat = Vec::with_capacity(xs.len());
        let mut ys = Vec::with_capacity(xs.len());
        for x in xs {
            let mut xh = x.clone();
            let mut y = x.clone();
            for c in 0..c_len {
                for (h, yv) in xh.row_mut(c).iter_mut().zip(y.row_mut(c)) {
                    *h = (*h - mean[c]) * inv_std[c];
                    *yv = self.gamma[c] * *h + self.beta[c];
                }
            }
            x_hat.push(xh);
            ys.push(y);
        }
        Ok((
            ys,
            BnCache {
                x_hat,
                mean,
                var,
                inv_std,
                count,
            },
        ))
    }

    /// Exponential moving average update; variance uses the unbiased estimate.
    pub fn update_running_stats(&mut self, cache: &BnCache<T>) {
        let m = self.momentum;
        let correction = if cache.count > 1 {
            T::lit(cache.count as f64 / (cache.count - 1) as f64)
        } else {
            T::one()
        };
        for c in 0..self.channels() {
            self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * cache.mean[c];
            self.running_var[c] =
                (T::one() - m) * self.running_var[c] + m * cache.var[c] * correction;
        }
    }

    pub fn backward(
        &self,
        cache: &BnCache<T>,
        grad_out: &[Tensor2D<T>],
    ) -> Result<(Vec<Tensor2D<T>>, BnGrad<T>), NnError> {
        if grad_out.len() != cache.x_hat.len() {
            return Err(shape_err("batchnorm_backward", cache.x_hat.len(), grad_out.len()));
        }
        for (g, xh) in grad_out.iter().zip(&cache.x_hat) {
            xh.check_same_shape("batchnorm_backward", g)?;
        }
        let c_len = self.channels();
        let n = T::lit(cache.count as f64);
        let mut grads = BnGrad::zeros(c_len);
        for c in 0..c_len {
            for (g, xh) in grad_out.iter().zip(&cache.x_hat) {
                for (&gv, &hv) in g.row(c).iter().zip(xh.row(c)) {
                    grads.beta[c] += gv;
                    grads.gamma[c] += gv * hv;
                }
            }
        }
        let mut gxs = Vec::with_capacity(grad_out.len());
        for (g, xh) in grad_out.iter().zip(&cache.x_hat) {
            let mut gx = g.clone();
            for c in 0..c_len {
                let k = self.gamma[c] * cache.inv_std[c] / n;
                for (out, (&gv, &hv)) in gx.row_mut(c).iter_mut().zip(g.row(c).iter().zip(xh.row(c))) {
                    *out = k * (n * gv - grads.beta[c] - hv * grads.gamma[c]);
                }
            }
            gxs.push(gx);
        }
        Ok((gxs, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::test_rng;
    use rand::Rng;

    fn rand_t(c: usize, t: usize, rng: &mut impl Rng) -> Tensor2D<f64> {
        Tensor2D::from_vec(c, t, (0..c * t).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap()
    }

    #[test]
    fn train_mode_standardizes() {
        let mut rng = test_rng(21);
        let bn = BatchNorm::<f64>::new(3);
        let xs = vec![rand_t(3, 50, &mut rng), rand_t(3, 30, &mut rng)];
        let (ys, _) = bn.forward_train(&xs).unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = ys.iter().flat_map(|y| y.row(c).to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn infer_identity_with_default_stats() {
        let mut rng = test_rng(22);
        let mut bn = BatchNorm::<f64>::new(2);
        bn.eps = 0.0;
        let x = rand_t(2, 6, &mut rng);
        assert!(bn.forward_infer(&x).unwrap().max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn infer_mode_is_columnwise() {
        let mut rng = test_rng(23);
        let mut bn = BatchNorm::<f64>::new(2);
        bn.running_mean = vec![0.3, -1.0];
        bn.running_var = vec![2.0, 0.5];
        bn.gamma = vec![1.5, -0.7];
        let x = rand_t(2, 8, &mut rng);
        let y = bn.forward_infer(&x).unwrap();
        let mut xp = x.clone();
        xp.set(0, 5, 10.0);
        xp.set(1, 5, -10.0);
        let yp = bn.forward_infer(&xp).unwrap();
        for t in (0..8).filter(|&t| t != 5) {
            assert_eq!(y.column(t), yp.column(t));
        }
    }

    #[test]
    fn zero_length_is_an_error() {
        let bn = BatchNorm::<f64>::new(2);
        assert!(matches!(bn.forward_infer(&Tensor2D::zeros(2, 0)), Err(NnError::Argument { .. })));
        assert!(bn.forward_train(&[Tensor2D::zeros(2, 0)]).is_err());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor2D::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (_, cache) = bn.forward_train(std::slice::from_ref(&x)).unwrap();
        bn.update_running_stats(&cache);
        assert!((bn.running_mean[0] - 0.25).abs() < 1e-15);
        // unbiased var of 1..4 is 5/3
        assert!((bn.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-5;
        let mut rng = test_rng(24);
        for _ in 0..5 {
            let mut bn = BatchNorm::<f64>::new(3);
            bn.gamma = (0..3).map(|_| rng.gen_range(0.5..1.5)).collect();
            bn.beta = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let xs = vec![rand_t(3, 4, &mut rng), rand_t(3, 3, &mut rng)];
            let proj = vec![rand_t(3, 4, &mut rng), rand_t(3, 3, &mut rng)];
            let loss = |bn: &BatchNorm<f64>, xs: &[Tensor2D<f64>]| -> f64 {
                let (ys, _) = bn.forward_train(xs).unwrap();
                ys.iter()
                    .zip(&proj)
                    .map(|(y, p)| y.data().iter().zip(p.data()).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            };
            let (_, cache) = bn.forward_train(&xs).unwrap();
            let (gxs, g) = bn.backward(&cache, &proj).unwrap();
            let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            for c in 0..3 {
                let (mut p, mut m) = (bn.clone(), bn.clone());
                p.gamma[c] += h;
                m.gamma[c] -= h;
                assert!(rel(g.gamma[c], (loss(&p, &xs) - loss(&m, &xs)) / (2.0 * h)) < 1e-6);
                let (mut p, mut m) = (bn.clone(), bn.clone());
                p.beta[c] += h;
                m.beta[c] -= h;
                assert!(rel(g.beta[c], (loss(&p, &xs) - loss(&m, &xs)) / (2.0 * h)) < 1e-6);
            }
            for b in 0..2 {
                for i in 0..xs[b].data().len() {
                    let (mut p, mut m) = (xs.clone(), xs.clone());
                    p[b].data_mut()[i] += h;
                    m[b].data_mut()[i] -= h;
                    let num = (loss(&bn, &p) - loss(&bn, &m)) / (2.0 * h);
                    assert!(rel(gxs[b].data()[i], num) < 1e-6);
                }
            }
        }
    }
}
