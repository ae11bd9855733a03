use super::{shape_err, NnError, Tensor2D};
use crate::Real;

/// Fully connected layer, `y = W x + b` with `W` stored `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward_vec(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        if x.len() != self.in_dim {
            return Err(shape_err("linear_forward", self.in_dim, x.len()));
        }
        Ok((0..self.out_dim)
            .map(|o| {
                let w = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                self.bias[o] + w.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>()
            })
            .collect())
    }

    /// Applies the layer independently at every time step of `x` (`in × T`).
    pub fn forward_seq(&self, x: &Tensor2D<T>) -> Result<Tensor2D<T>, NnError> {
        if x.channels() != self.in_dim {
            return Err(shape_err("linear_forward", self.in_dim, x.channels()));
        }
        let mut y = Tensor2D::zeros(self.out_dim, x.time());
        for t in 0..x.time() {
            let col = self.forward_vec(&x.column(t))?;
            y.set_column(t, &col)?;
        }
        Ok(y)
    }

    pub fn backward_seq(
        &self,
        x: &Tensor2D<T>,
        grad_out: &Tensor2D<T>,
    ) -> Result<(Tensor2D<T>, LinearGrad<T>), NnError> {
        if x.channels() != self.in_dim || grad_out.channels() != self.out_dim || grad_out.time() != x.time() {
            return Err(shape_err(
                "linear_backward",
                format!("x {}xT, grad {}xT", self.in_dim, self.out_dim),
                format!("x {}x{}, grad {}x{}", x.channels(), x.time(), grad_out.channels(), grad_out.time()),
            ));
        }
        let mut g = LinearGrad {
            weight: vec![T::zero(); self.weight.len()],
            bias: vec![T::zero(); self.out_dim],
        };
        let mut gx = Tensor2D::zeros(self.in_dim, x.time());
        for o in 0..self.out_dim {
            let go = grad_out.row(o);
            g.bias[o] = go.iter().copied().sum();
            for i in 0..self.in_dim {
                let w = self.weight[o * self.in_dim + i];
                let xr = x.row(i);
                let mut acc = T::zero();
                for (gxv, (&gv, &xv)) in gx.row_mut(i).iter_mut().zip(go.iter().zip(xr)) {
                    acc += gv * xv;
                    *gxv += w * gv;
                }
                g.weight[o * self.in_dim + i] = acc;
            }
        }
        Ok((gx, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::test_rng;
    use rand::Rng;

    #[test]
    fn zero_weight_returns_bias() {
        let mut l = Linear::<f64>::zeros(4, 1);
        l.bias[0] = 0.3;
        assert_eq!(l.forward_vec(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.3]);
    }

    #[test]
    fn identity_weight_adds_bias() {
        let mut l = Linear::<f64>::zeros(3, 3);
        for i in 0..3 {
            l.weight[i * 3 + i] = 1.0;
        }
        l.bias = vec![0.1, 0.2, 0.3];
        assert_eq!(l.forward_vec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.1, 2.2, 3.3]);
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-5;
        let mut rng = test_rng(40);
        for _ in 0..5 {
            let mut l = Linear::<f64>::zeros(3, 2);
            l.weight.iter_mut().chain(&mut l.bias).for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let x = Tensor2D::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let p = Tensor2D::from_vec(2, 4, (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let loss = |l: &Linear<f64>, x: &Tensor2D<f64>| -> f64 {
                l.forward_seq(x).unwrap().data().iter().zip(p.data()).map(|(a, b)| a * b).sum()
            };
            let (gx, g) = l.backward_seq(&x, &p).unwrap();
            let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
            for i in 0..l.weight.len() {
                let (mut a, mut b) = (l.clone(), l.clone());
                a.weight[i] += h;
                b.weight[i] -= h;
                assert!(rel(g.weight[i], (loss(&a, &x) - loss(&b, &x)) / (2.0 * h)) < 1e-6);
            }
            for i in 0..2 {
                let (mut a, mut b) = (l.clone(), l.clone());
                a.bias[i] += h;
                b.bias[i] -= h;
                assert!(rel(g.bias[i], (loss(&a, &x) - loss(&b, &x)) / (2.0 * h)) < 1e-6);
            }
            for i in 0..12 {
                let (mut a, mut b) = (x.clone(), x.clone());
                a.data_mut()[i] += h;
                b.data_mut()[i] -= h;
                assert!(rel(gx.data()[i], (loss(&l, &a) - loss(&l, &b)) / (2.0 * h)) < 1e-6);
            }
        }
    }
}
