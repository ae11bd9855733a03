use super::{ModelError, ModelGrads, ModelWeights};
use crate::features::{normalize, FeatureMatrix};
use crate::nn::{relu_backward, relu_forward, sigmoid, BnCache, BnMode, Conv1dGrad, Tensor2D};
use crate::Real;

/// Activations kept by [`ModelWeights::forward_train`] for the backward pass.
#[derive(Debug, Clone)]
pub struct TrainCache<T> {
    /// Input of every conv unit, per sequence.
    unit_inputs: Vec<Vec<Tensor2D<T>>>,
    bn: Vec<BnCache<T>>,
    /// Batch-norm outputs, i.e. ReLU pre-activations for ReLU units.
    pre_act: Vec<Vec<Tensor2D<T>>>,
    gru: Vec<crate::nn::GruCache<T>>,
    gru_out: Vec<Tensor2D<T>>,
}

impl<T: Real> TrainCache<T> {
    /// True when every ReLU input has the same sign in both caches, i.e. no
    /// perturbation between the two runs crossed a kink.
    pub fn same_relu_pattern(&self, other: &TrainCache<T>, weights: &ModelWeights<T>) -> bool {
        weights
            .units
            .iter()
            .zip(self.pre_act.iter().zip(&other.pre_act))
            .filter(|(u, _)| u.relu)
            .all(|(_, (a, b))| {
                a.iter()
                    .zip(b)
                    .all(|(x, y)| x.data().iter().zip(y.data()).all(|(&p, &q)| (p > T::zero()) == (q > T::zero())))
            })
    }
}

impl<T: Real> ModelWeights<T> {
    fn check_input(&self, x: &Tensor2D<T>) -> Result<(), ModelError> {
        if x.channels() != self.config.n_mels {
            return Err(crate::nn::NnError::Shape {
                op: "model_forward",
                expected: format!("{} feature channels", self.config.n_mels),
                found: format!("{}", x.channels()),
            }
            .into());
        }
        Ok(())
    }

    /// Conv stack output (`width × steps`) for one normalized sequence.
    pub fn conv_stack(&self, x: &Tensor2D<T>, mode: BnMode) -> Result<Tensor2D<T>, ModelError> {
        self.check_input(x)?;
        let mut inputs: Vec<Tensor2D<T>> = Vec::with_capacity(self.units.len());
        let mut h = x.clone();
        for (i, u) in self.units.iter().enumerate() {
            inputs.push(h);
            let z = u.conv.forward(&inputs[i])?;
            let mut y = match mode {
                BnMode::Infer => u.bn.forward_infer(&z)?,
                BnMode::Train => u.bn.forward_train(std::slice::from_ref(&z))?.0.remove(0),
            };
            if u.relu {
                y = relu_forward(&y);
            }
            if let Some(s) = u.skip_from {
                y.add_assign(&inputs[s])?;
            }
            h = y;
        }
        Ok(h)
    }

    /// Per-step logits for one normalized sequence (`n_mels × T`).
    pub fn forward_logits(&self, x: &Tensor2D<T>, mode: BnMode) -> Result<Vec<T>, ModelError> {
        let h = self.conv_stack(x, mode)?;
        let (y, _) = self.gru.forward(&h, None)?;
        Ok(self.fc.forward_seq(&y)?.into_vec())
    }

    /// Speech probabilities, one per output step, for normalized features.
    pub fn forward_batch(&self, x: &Tensor2D<T>, mode: BnMode) -> Result<Vec<T>, ModelError> {
        Ok(self.forward_logits(x, mode)?.into_iter().map(sigmoid).collect())
    }

    /// Normalizes raw log-mel features with the bundled statistics and runs
    /// inference.
    pub fn predict(&self, feats: &FeatureMatrix<T>) -> Result<Vec<T>, ModelError> {
        let x = normalize(feats, &self.norm)?;
        self.forward_batch(&x.data, BnMode::Infer)
    }

    /// Training-mode forward over a batch of normalized sequences. Batch norm
    /// statistics are pooled over every step of every sequence.
    pub fn forward_train(&self, xs: &[Tensor2D<T>]) -> Result<(Vec<Vec<T>>, TrainCache<T>), ModelError> {
        for x in xs {
            self.check_input(x)?;
        }
        let n_units = self.units.len();
        let mut cache = TrainCache {
            unit_inputs: Vec::with_capacity(n_units),
            bn: Vec::with_capacity(n_units),
            pre_act: Vec::with_capacity(n_units),
            gru: Vec::with_capacity(xs.len()),
            gru_out: Vec::with_capacity(xs.len()),
        };
        let mut h: Vec<Tensor2D<T>> = xs.to_vec();
        for (i, u) in self.units.iter().enumerate() {
            let z = h.iter().map(|x| u.conv.forward(x)).collect::<Result<Vec<_>, _>>()?;
            cache.unit_inputs.push(h);
            let (ys, bn_cache) = u.bn.forward_train(&z)?;
            let mut out = Vec::with_capacity(ys.len());
            for (s, y) in ys.iter().enumerate() {
                let mut a = if u.relu { relu_forward(y) } else { y.clone() };
                if let Some(from) = u.skip_from {
                    a.add_assign(&cache.unit_inputs[from][s])?;
                }
                out.push(a);
            }
            cache.bn.push(bn_cache);
            cache.pre_act.push(ys);
            h = out;
            debug_assert_eq!(cache.unit_inputs.len(), i + 1);
        }
        let mut logits = Vec::with_capacity(xs.len());
        for x in &h {
            let (y, _, gc) = self.gru.forward_cached(x, None)?;
            logits.push(self.fc.forward_seq(&y)?.into_vec());
            cache.gru.push(gc);
            cache.gru_out.push(y);
        }
        Ok((logits, cache))
    }

    /// Gradients of a loss given its gradient with respect to every logit.
    pub fn backward(&self, cache: &TrainCache<T>, grad_logits: &[Vec<T>]) -> Result<ModelGrads<T>, ModelError> {
        if grad_logits.len() != cache.gru_out.len() {
            return Err(crate::nn::NnError::Shape {
                op: "model_backward",
                expected: format!("{} sequences", cache.gru_out.len()),
                found: format!("{}", grad_logits.len()),
            }
            .into());
        }
        let mut fc_grad = crate::nn::LinearGrad {
            weight: vec![T::zero(); self.fc.weight.len()],
            bias: vec![T::zero(); self.fc.bias.len()],
        };
        let mut gru_grad: Option<crate::nn::GruGrad<T>> = None;
        let mut g: Vec<Tensor2D<T>> = Vec::with_capacity(grad_logits.len());
        for ((gl, y), gc) in grad_logits.iter().zip(&cache.gru_out).zip(&cache.gru) {
            let gl = Tensor2D::from_vec(1, gl.len(), gl.clone())?;
            let (gy, fg) = self.fc.backward_seq(y, &gl)?;
            add(&mut fc_grad.weight, &fg.weight);
            add(&mut fc_grad.bias, &fg.bias);
            let (gx, gg, _) = self.gru.backward(gc, &gy, None)?;
            match gru_grad.as_mut() {
                None => gru_grad = Some(gg),
                Some(acc) => {
                    for (a, b) in acc.layers.iter_mut().zip(&gg.layers) {
                        add(&mut a.w_ih, &b.w_ih);
                        add(&mut a.w_hh, &b.w_hh);
                        add(&mut a.b_ih, &b.b_ih);
                        add(&mut a.b_hh, &b.b_hh);
                    }
                }
            }
            g.push(gx);
        }
        let gru_grad = match gru_grad {
            Some(gg) => gg,
            None => {
                return Err(crate::nn::NnError::Argument {
                    op: "model_backward",
                    reason: "empty batch".into(),
                }
                .into())
            }
        };

        let n_units = self.units.len();
        let mut pending_skip: Vec<Option<Vec<Tensor2D<T>>>> = vec![None; n_units];
        let mut unit_grads: Vec<(Conv1dGrad<T>, crate::nn::BnGrad<T>)> = Vec::with_capacity(n_units);
        for u_idx in (0..n_units).rev() {
            let u = &self.units[u_idx];
            if let Some(from) = u.skip_from {
                pending_skip[from] = Some(g.clone());
            }
            if u.relu {
                g = g
                    .iter()
                    .zip(&cache.pre_act[u_idx])
                    .map(|(gv, pre)| relu_backward(pre, gv))
                    .collect::<Result<_, _>>()?;
            }
            let (g_bn, bn_grad) = u.bn.backward(&cache.bn[u_idx], &g)?;
            let mut conv_grad = Conv1dGrad::zeros(&u.conv.spec);
            let mut next = Vec::with_capacity(g_bn.len());
            for (gz, x) in g_bn.iter().zip(&cache.unit_inputs[u_idx]) {
                let (gx, cg) = u.conv.backward(x, gz)?;
                add(&mut conv_grad.weight, &cg.weight);
                add(&mut conv_grad.bias, &cg.bias);
                next.push(gx);
            }
            if let Some(skip) = pending_skip[u_idx].take() {
                for (a, b) in next.iter_mut().zip(&skip) {
                    a.add_assign(b)?;
                }
            }
            unit_grads.push((conv_grad, bn_grad));
            g = next;
        }
        unit_grads.reverse();
        Ok(ModelGrads {
            units: unit_grads,
            gru: gru_grad,
            fc: fc_grad,
        })
    }

    /// Advances every batch-norm running average with the batch statistics
    /// recorded in `cache`.
    pub fn update_running_stats(&mut self, cache: &TrainCache<T>) {
        for (u, c) in self.units.iter_mut().zip(&cache.bn) {
            u.bn.update_running_stats(c);
        }
    }
}

fn add<T: Real>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}
