use super::{NnError, Tensor2D};
use crate::Real;

pub fn relu_forward<T: Real>(x: &Tensor2D<T>) -> Tensor2D<T> {
    x.map(|v| v.max(T::zero()))
}

pub fn relu_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad_out` where the pre-activation was `<= 0`.
pub fn relu_backward<T: Real>(
    pre: &Tensor2D<T>,
    grad_out: &Tensor2D<T>,
) -> Result<Tensor2D<T>, NnError> {
    pre.check_same_shape("relu_backward", grad_out)?;
    let data = pre
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor2D::from_vec(pre.channels(), pre.time(), data)
}

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid_inplace<T: Real>(x: &mut [T]) {
    for v in x {
        *v = sigmoid(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::test_rng;
    use rand::Rng;

    #[test]
    fn relu_values_and_mask() {
        let x = Tensor2D::from_vec(1, 3, vec![-1.0f64, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor2D::from_vec(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn relu_all_negative() {
        let x = Tensor2D::from_vec(2, 2, vec![-1.0f64, -2.0, -0.1, -5.0]).unwrap();
        assert!(relu_forward(&x).data().iter().all(|&v| v == 0.0));
        let g = Tensor2D::from_vec(2, 2, vec![3.0; 4]).unwrap();
        assert!(relu_backward(&x, &g).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relu_gradient_check_away_from_kink() {
        let mut rng = test_rng(11);
        let h = 1e-5;
        for _ in 0..5 {
            let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let xt = Tensor2D::from_vec(4, 5, x.clone()).unwrap();
            let gt = Tensor2D::from_vec(4, 5, w.clone()).unwrap();
            let ga = relu_backward(&xt, &gt).unwrap();
            for i in 0..20 {
                if x[i].abs() <= 1e-3 {
                    continue;
                }
                let f = |v: f64| v.max(0.0) * w[i];
                let num = (f(x[i] + h) - f(x[i] - h)) / (2.0 * h);
                let a = ga.data()[i];
                assert!((a - num).abs() / a.abs().max(num.abs()).max(1e-3) < 1e-6);
            }
        }
    }

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(40.0f64) - 1.0).abs() <= 1e-15);
        for &x in &[1000.0f64, -1000.0] {
            assert!(sigmoid(x).is_finite());
        }
        assert!(sigmoid(1000.0f32).is_finite() && sigmoid(-1000.0f32).is_finite());
        for &x in &[0.1f64, 1.0, 3.7, 12.0, 36.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() <= 1e-12);
        }
    }
}
