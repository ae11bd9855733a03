//! Causal grouped 1-D convolution.
//!
//! The input is left-padded with `kernel - 1` zeros and nothing on the right,
//! so output step `t` reads input positions `stride*t - (kernel-1) ..= stride*t`.
//! Output length is `ceil(time / stride)`. Tap `k` multiplies the input at
//! `stride*t - (kernel-1) + k`, i.e. the last tap sees the newest sample.

use super::{shape_err, NnError, Tensor2D};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub groups: usize,
}

impl ConvSpec {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
    ) -> Result<Self, NnError> {
        let bad = |reason: String| NnError::Argument {
            op: "ConvSpec::new",
            reason,
        };
        if kernel == 0 || stride == 0 || groups == 0 || in_ch == 0 || out_ch == 0 {
            return Err(bad(format!(
                "all sizes must be >= 1 (in {in_ch}, out {out_ch}, kernel {kernel}, stride {stride}, groups {groups})"
            )));
        }
        if !in_ch.is_multiple_of(groups) || !out_ch.is_multiple_of(groups) {
            return Err(bad(format!(
                "channels {in_ch}->{out_ch} not divisible by groups {groups}"
            )));
        }
        Ok(Self {
            in_ch,
            out_ch,
            kernel,
            stride,
            groups,
        })
    }

    /// Depthwise convolution: one filter per channel.
    pub fn depthwise(channels: usize, kernel: usize, stride: usize) -> Result<Self, NnError> {
        Self::new(channels, channels, kernel, stride, channels)
    }

    pub fn pointwise(in_ch: usize, out_ch: usize) -> Result<Self, NnError> {
        Self::new(in_ch, out_ch, 1, 1, 1)
    }

    #[inline]
    pub fn in_per_group(&self) -> usize {
        self.in_ch / self.groups
    }

    #[inline]
    pub fn out_per_group(&self) -> usize {
        self.out_ch / self.groups
    }

    /// Left padding applied before the first input sample.
    #[inline]
    pub fn causal_pad(&self) -> usize {
        self.kernel - 1
    }

    #[inline]
    pub fn out_len(&self, in_len: usize) -> usize {
        in_len.div_ceil(self.stride)
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_per_group() * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.out_ch
    }

    /// Weight dims as stored: `[out_ch, in_ch / groups, kernel]`.
    pub fn weight_dims(&self) -> [usize; 3] {
        [self.out_ch, self.in_per_group(), self.kernel]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    pub spec: ConvSpec,
    /// `[out_ch][in_ch/groups][kernel]`, flattened.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Conv1dGrad<T> {
    pub fn zeros(spec: &ConvSpec) -> Self {
        Self {
            weight: vec![T::zero(); spec.weight_len()],
            bias: vec![T::zero(); spec.out_ch],
        }
    }
}

impl<T: Real> Conv1d<T> {
    pub fn zeros(spec: ConvSpec) -> Self {
        Self {
            spec,
            weight: vec![T::zero(); spec.weight_len()],
            bias: vec![T::zero(); spec.out_ch],
        }
    }

    pub fn new(spec: ConvSpec, weight: Vec<T>, bias: Vec<T>) -> Result<Self, NnError> {
        if weight.len() != spec.weight_len() {
            return Err(shape_err("Conv1d::new weight", spec.weight_len(), weight.len()));
        }
        if bias.len() != spec.out_ch {
            return Err(shape_err("Conv1d::new bias", spec.out_ch, bias.len()));
        }
        Ok(Self { spec, weight, bias })
    }

    #[inline]
    fn w(&self, o: usize, j: usize, k: usize) -> T {
        self.weight[(o * self.spec.in_per_group() + j) * self.spec.kernel + k]
    }

    fn check_input(&self, op: &'static str, x: &Tensor2D<T>) -> Result<(), NnError> {
        if x.channels() != self.spec.in_ch {
            return Err(shape_err(op, format!("{} input channels", self.spec.in_ch), x.channels()));
        }
        Ok(())
    }

    /// Output index range `[t_lo, t_hi)` for which tap `k` reads a real
    /// (non-padding) input sample.
    #[inline]
    fn valid_range(&self, k: usize, in_len: usize, out_len: usize) -> (usize, usize, usize) {
        let s = self.spec.stride;
        let shift = self.spec.kernel - 1 - k;
        if in_len == 0 {
            return (0, 0, shift);
        }
        // need s*t >= shift and s*t - shift < in_len
        let t_lo = shift.div_ceil(s);
        let t_hi = ((in_len + shift - 1) / s + 1).min(out_len);
        (t_lo, t_hi, shift)
    }

    pub fn forward(&self, x: &Tensor2D<T>) -> Result<Tensor2D<T>, NnError> {
        self.check_input("causal_conv1d_forward", x)?;
        let spec = &self.spec;
        let in_len = x.time();
        let out_len = spec.out_len(in_len);
        let s = spec.stride;
        let mut y = Tensor2D::zeros(spec.out_ch, out_len);
        for o in 0..spec.out_ch {
            let g = o / spec.out_per_group();
            let row = y.row_mut(o);
            row.iter_mut().for_each(|v| *v = self.bias[o]);
            for j in 0..spec.in_per_group() {
                let xr = x.row(g * spec.in_per_group() + j);
                for k in 0..spec.kernel {
                    let w = self.w(o, j, k);
                    let (t_lo, t_hi, shift) = self.valid_range(k, in_len, out_len);
                    for t in t_lo..t_hi {
                        row[t] += w * xr[s * t - shift];
                    }
                }
            }
        }
        Ok(y)
    }

    /// Gradients of the forward map given the forward input `x`.
    pub fn backward(
        &self,
        x: &Tensor2D<T>,
        grad_out: &Tensor2D<T>,
    ) -> Result<(Tensor2D<T>, Conv1dGrad<T>), NnError> {
        self.check_input("causal_conv1d_backward", x)?;
        let spec = &self.spec;
        let in_len = x.time();
        let out_len = spec.out_len(in_len);
        if grad_out.channels() != spec.out_ch || grad_out.time() != out_len {
            return Err(shape_err(
                "causal_conv1d_backward grad_out",
                format!("{}x{}", spec.out_ch, out_len),
                format!("{}x{}", grad_out.channels(), grad_out.time()),
            ));
        }
        let s = spec.stride;
        let ipg = spec.in_per_group();
        let mut gx = Tensor2D::zeros(spec.in_ch, in_len);
        let mut grads = Conv1dGrad::zeros(spec);
        for o in 0..spec.out_ch {
            let g = o / spec.out_per_group();
            let gr = grad_out.row(o);
            grads.bias[o] = gr.iter().copied().sum();
            for j in 0..ipg {
                let ic = g * ipg + j;
                let xr = x.row(ic);
                for k in 0..spec.kernel {
                    let w = self.w(o, j, k);
                    let (t_lo, t_hi, shift) = self.valid_range(k, in_len, out_len);
                    let mut gw = T::zero();
                    let gxr = gx.row_mut(ic);
                    for t in t_lo..t_hi {
                        let idx = s * t - shift;
                        gw += gr[t] * xr[idx];
                        gxr[idx] += w * gr[t];
                    }
                    grads.weight[(o * ipg + j) * spec.kernel + k] += gw;
                }
            }
        }
        Ok((gx, grads))
    }

    /// Single output column from a full input window.
    ///
    /// `window` is `in_ch × kernel`, channel-major, oldest sample first; the
    /// last column is the current input.
    pub fn forward_window(&self, window: &[T], out: &mut [T]) {
        let spec = &self.spec;
        let k_len = spec.kernel;
        let ipg = spec.in_per_group();
        for (o, slot) in out.iter_mut().enumerate().take(spec.out_ch) {
            let g = o / spec.out_per_group();
            let mut acc = self.bias[o];
            for j in 0..ipg {
                let ic = g * ipg + j;
                let wrow = &self.weight[(o * ipg + j) * k_len..(o * ipg + j + 1) * k_len];
                let xrow = &window[ic * k_len..(ic + 1) * k_len];
                for (&w, &v) in wrow.iter().zip(xrow) {
                    acc += w * v;
                }
            }
            *slot = acc;
        }
    }
}
