//! Stacked unidirectional GRU with backpropagation through time.
//!
//! Gate rows are ordered `[r, z, n]` in both weight matrices:
//!
//! ```text
//! r  = σ(W_r x + b_ir + U_r h + b_hr)
//! z  = σ(W_z x + b_iz + U_z h + b_hz)
//! n  = tanh(W_n x + b_in + r ∘ (U_n h + b_hn))
//! h' = (1 − z) ∘ n + z ∘ h
//! ```

use super::activation::sigmoid;
use super::{shape_err, NnError, Tensor2D};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruSpec {
    pub layers: usize,
    pub input: usize,
    pub hidden: usize,
}

impl GruSpec {
    pub fn new(layers: usize, input: usize, hidden: usize) -> Result<Self, NnError> {
        if layers == 0 || input == 0 || hidden == 0 {
            return Err(NnError::Argument {
                op: "GruSpec::new",
                reason: format!("layers {layers}, input {input}, hidden {hidden} must all be >= 1"),
            });
        }
        Ok(Self {
            layers,
            input,
            hidden,
        })
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    /// `3·(H·I + H·H + 2·H)` summed over layers.
    pub fn param_count(&self) -> usize {
        (0..self.layers)
            .map(|l| 3 * (self.hidden * self.layer_input(l) + self.hidden * self.hidden + 2 * self.hidden))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer<T> {
    pub input: usize,
    pub hidden: usize,
    /// `[3H][input]`
    pub w_ih: Vec<T>,
    /// `[3H][hidden]`
    pub w_hh: Vec<T>,
    pub b_ih: Vec<T>,
    pub b_hh: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayerGrad<T> {
    pub w_ih: Vec<T>,
    pub w_hh: Vec<T>,
    pub b_ih: Vec<T>,
    pub b_hh: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruGrad<T> {
    pub layers: Vec<GruLayerGrad<T>>,
}

/// Per-layer activations recorded during a cached forward, all time-major.
#[derive(Debug, Clone)]
struct LayerTrace<T> {
    input: Vec<T>,
    h_prev: Vec<T>,
    r: Vec<T>,
    z: Vec<T>,
    n: Vec<T>,
    /// `U_n h + b_hn`, before the reset gate is applied.
    hn: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct GruCache<T> {
    time: usize,
    traces: Vec<LayerTrace<T>>,
}

struct StepTrace<'a, T> {
    r: &'a mut [T],
    z: &'a mut [T],
    n: &'a mut [T],
    hn: &'a mut [T],
}

impl<T: Real> GruLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w_ih: vec![T::zero(); 3 * hidden * input],
            w_hh: vec![T::zero(); 3 * hidden * hidden],
            b_ih: vec![T::zero(); 3 * hidden],
            b_hh: vec![T::zero(); 3 * hidden],
        }
    }

    /// One time step. `gates` is scratch space of length `6H`.
    fn cell(&self, x: &[T], h: &[T], h_out: &mut [T], gates: &mut [T], trace: Option<StepTrace<'_, T>>) {
        let hd = self.hidden;
        let (gi, gh) = gates.split_at_mut(3 * hd);
        for (row, g) in gi.iter_mut().enumerate() {
            let w = &self.w_ih[row * self.input..(row + 1) * self.input];
            *g = self.b_ih[row] + w.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        }
        for (row, g) in gh.iter_mut().enumerate() {
            let w = &self.w_hh[row * hd..(row + 1) * hd];
            *g = self.b_hh[row] + w.iter().zip(h).map(|(&a, &b)| a * b).sum::<T>();
        }
        let mut trace = trace;
        for j in 0..hd {
            let r = sigmoid(gi[j] + gh[j]);
            let z = sigmoid(gi[hd + j] + gh[hd + j]);
            let hn = gh[2 * hd + j];
            let n = (gi[2 * hd + j] + r * hn).tanh();
            h_out[j] = (T::one() - z) * n + z * h[j];
            if let Some(t) = trace.as_mut() {
                t.r[j] = r;
                t.z[j] = z;
                t.n[j] = n;
                t.hn[j] = hn;
            }
        }
    }
}

impl<T: Real> GruLayerGrad<T> {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: vec![T::zero(); 3 * hidden * input],
            w_hh: vec![T::zero(); 3 * hidden * hidden],
            b_ih: vec![T::zero(); 3 * hidden],
            b_hh: vec![T::zero(); 3 * hidden],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gru<T> {
    pub spec: GruSpec,
    pub layers: Vec<GruLayer<T>>,
}

impl<T: Real> Gru<T> {
    pub fn zeros(spec: GruSpec) -> Self {
        let layers = (0..spec.layers)
            .map(|l| GruLayer::zeros(spec.layer_input(l), spec.hidden))
            .collect();
        Self { spec, layers }
    }

    pub fn zero_state(&self) -> Vec<Vec<T>> {
        vec![vec![T::zero(); self.spec.hidden]; self.spec.layers]
    }

    fn check_h0(&self, h0: Option<&[Vec<T>]>) -> Result<Vec<Vec<T>>, NnError> {
        match h0 {
            None => Ok(self.zero_state()),
            Some(h) => {
                if h.len() != self.spec.layers || h.iter().any(|v| v.len() != self.spec.hidden) {
                    return Err(shape_err(
                        "gru_forward h0",
                        format!("{}x{}", self.spec.layers, self.spec.hidden),
                        format!("{} layers", h.len()),
                    ));
                }
                Ok(h.to_vec())
            }
        }
    }

    /// Runs the whole sequence. Returns the top layer's hidden sequence and
    /// the final hidden state of every layer.
    pub fn forward(
        &self,
        x: &Tensor2D<T>,
        h0: Option<&[Vec<T>]>,
    ) -> Result<(Tensor2D<T>, Vec<Vec<T>>), NnError> {
        let (y, h_t, _) = self.run(x, h0, false)?;
        Ok((y, h_t))
    }

    pub fn forward_cached(
        &self,
        x: &Tensor2D<T>,
        h0: Option<&[Vec<T>]>,
    ) -> Result<(Tensor2D<T>, Vec<Vec<T>>, GruCache<T>), NnError> {
        let (y, h_t, cache) = self.run(x, h0, true)?;
        Ok((y, h_t, cache.expect("cache requested")))
    }

    #[allow(clippy::type_complexity)]
    fn run(
        &self,
        x: &Tensor2D<T>,
        h0: Option<&[Vec<T>]>,
        keep: bool,
    ) -> Result<(Tensor2D<T>, Vec<Vec<T>>, Option<GruCache<T>>), NnError> {
        if x.channels() != self.spec.input {
            return Err(shape_err("gru_forward", format!("{} input channels", self.spec.input), x.channels()));
        }
        let time = x.time();
        let hd = self.spec.hidden;
        let mut state = self.check_h0(h0)?;
        let mut seq = x.to_time_major();
        let mut traces = Vec::new();
        let mut gates = vec![T::zero(); 6 * hd];
        for (l, layer) in self.layers.iter().enumerate() {
            let in_dim = layer.input;
            let mut out = vec![T::zero(); time * hd];
            let mut tr = keep.then(|| LayerTrace {
                input: Vec::new(),
                h_prev: vec![T::zero(); time * hd],
                r: vec![T::zero(); time * hd],
                z: vec![T::zero(); time * hd],
                n: vec![T::zero(); time * hd],
                hn: vec![T::zero(); time * hd],
            });
            let mut h = state[l].clone();
            for t in 0..time {
                let xt = &seq[t * in_dim..(t + 1) * in_dim];
                let span = t * hd..(t + 1) * hd;
                let step = tr.as_mut().map(|tr| {
                    tr.h_prev[span.clone()].copy_from_slice(&h);
                    StepTrace {
                        r: &mut tr.r[span.clone()],
                        z: &mut tr.z[span.clone()],
                        n: &mut tr.n[span.clone()],
                        hn: &mut tr.hn[span.clone()],
                    }
                });
                layer.cell(xt, &h, &mut out[span.clone()], &mut gates, step);
                h.copy_from_slice(&out[span]);
            }
            state[l] = h;
            if let Some(mut tr) = tr {
                tr.input = std::mem::take(&mut seq);
                traces.push(tr);
            }
            seq = out;
        }
        let y = Tensor2D::from_time_major(hd, time, &seq)?;
        Ok((y, state, keep.then_some(GruCache { time, traces })))
    }

    /// Advances every layer by one step and returns the top hidden vector.
    /// `scratch` must hold at least `6·hidden` values.
    pub fn step(&self, x: &[T], state: &mut [Vec<T>], scratch: &mut [T], out: &mut [T]) {
        let hd = self.spec.hidden;
        let mut input: Vec<T> = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h_new = vec![T::zero(); hd];
            layer.cell(&input, &state[l], &mut h_new, &mut scratch[..6 * hd], None);
            state[l].copy_from_slice(&h_new);
            input = h_new;
        }
        out[..hd].copy_from_slice(&input);
    }

    /// BPTT over a cached forward. `grad_y` is the gradient on the top
    /// layer's output sequence; `grad_h_t` optionally adds gradient on the
    /// final states. Returns `(grad_x, grads, grad_h0)`.
    #[allow(clippy::type_complexity)]
    pub fn backward(
        &self,
        cache: &GruCache<T>,
        grad_y: &Tensor2D<T>,
        grad_h_t: Option<&[Vec<T>]>,
    ) -> Result<(Tensor2D<T>, GruGrad<T>, Vec<Vec<T>>), NnError> {
        let hd = self.spec.hidden;
        let time = cache.time;
        if grad_y.channels() != hd || grad_y.time() != time {
            return Err(shape_err(
                "gru_backward grad_y",
                format!("{hd}x{time}"),
                format!("{}x{}", grad_y.channels(), grad_y.time()),
            ));
        }
        if cache.traces.len() != self.layers.len() {
            return Err(shape_err("gru_backward cache", self.layers.len(), cache.traces.len()));
        }
        let grad_h_t = self.check_h0(grad_h_t)?;
        let mut upstream = grad_y.to_time_major();
        let mut grads: Vec<GruLayerGrad<T>> = Vec::with_capacity(self.layers.len());
        let mut grad_h0 = self.zero_state();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let tr = &cache.traces[l];
            let in_dim = layer.input;
            let mut g = GruLayerGrad::zeros(in_dim, hd);
            let mut gx = vec![T::zero(); time * in_dim];
            let mut dh = grad_h_t[l].clone();
            let mut dgi = vec![T::zero(); 3 * hd];
            let mut dgh = vec![T::zero(); 3 * hd];
            for t in (0..time).rev() {
                let o = t * hd;
                for j in 0..hd {
                    dh[j] += upstream[o + j];
                }
                let mut dh_prev = vec![T::zero(); hd];
                for j in 0..hd {
                    let (r, z, n, hn, hp) = (tr.r[o + j], tr.z[o + j], tr.n[o + j], tr.hn[o + j], tr.h_prev[o + j]);
                    let dz = dh[j] * (hp - n);
                    let dn = dh[j] * (T::one() - z);
                    dh_prev[j] = dh[j] * z;
                    let dan = dn * (T::one() - n * n);
                    let dr = dan * hn;
                    let dar = dr * r * (T::one() - r);
                    let daz = dz * z * (T::one() - z);
                    dgi[j] = dar;
                    dgi[hd + j] = daz;
                    dgi[2 * hd + j] = dan;
                    dgh[j] = dar;
                    dgh[hd + j] = daz;
                    dgh[2 * hd + j] = dan * r;
                }
                let xt = &tr.input[t * in_dim..(t + 1) * in_dim];
                let hp = &tr.h_prev[o..o + hd];
                let gxt = &mut gx[t * in_dim..(t + 1) * in_dim];
                for row in 0..3 * hd {
                    let a = dgi[row];
                    g.b_ih[row] += a;
                    let wrow = &layer.w_ih[row * in_dim..(row + 1) * in_dim];
                    let grow = &mut g.w_ih[row * in_dim..(row + 1) * in_dim];
                    for i in 0..in_dim {
                        grow[i] += a * xt[i];
                        gxt[i] += wrow[i] * a;
                    }
                    let b = dgh[row];
                    g.b_hh[row] += b;
                    let wrow = &layer.w_hh[row * hd..(row + 1) * hd];
                    let grow = &mut g.w_hh[row * hd..(row + 1) * hd];
                    for i in 0..hd {
                        grow[i] += b * hp[i];
                        dh_prev[i] += wrow[i] * b;
                    }
                }
                dh = dh_prev;
            }
            grad_h0[l] = dh;
            grads.push(g);
            upstream = gx;
        }
        grads.reverse();
        let gx = Tensor2D::from_time_major(self.spec.input, time, &upstream)?;
        Ok((gx, GruGrad { layers: grads }, grad_h0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::test_rng;
    use rand::Rng;

    fn random_gru(spec: GruSpec, rng: &mut impl Rng) -> Gru<f64> {
        let mut g = Gru::zeros(spec);
        for l in &mut g.layers {
            for v in l.w_ih.iter_mut().chain(&mut l.w_hh).chain(&mut l.b_ih).chain(&mut l.b_hh) {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        g
    }

    fn rand_t(c: usize, t: usize, rng: &mut impl Rng) -> Tensor2D<f64> {
        Tensor2D::from_vec(c, t, (0..c * t).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let gru = Gru::<f64>::zeros(GruSpec::new(1, 2, 3).unwrap());
        let h0 = vec![vec![0.4, -1.0, 2.0]];
        let (y, h_t) = gru.forward(&Tensor2D::zeros(2, 3), Some(&h0)).unwrap();
        let expect = [[0.2, -0.5, 1.0], [0.1, -0.25, 0.5], [0.05, -0.125, 0.25]];
        for t in 0..3 {
            for j in 0..3 {
                assert!((y.get(j, t) - expect[t][j]).abs() < 1e-15);
            }
        }
        assert_eq!(h_t[0], y.column(2));
    }

    #[test]
    fn zero_weights_zero_state_stay_zero() {
        let gru = Gru::<f64>::zeros(GruSpec::new(2, 4, 3).unwrap());
        let mut rng = test_rng(30);
        let (y, _) = gru.forward(&rand_t(4, 6, &mut rng), None).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    /// Scalar per-step evaluation of the GRU equations, written out
    /// independently of the layer implementation.
    fn oracle(layer: &GruLayer<f64>, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let hd = layer.hidden;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; hd];
        let mut out = Vec::new();
        for x in xs {
            let dot = |w: &[f64], row: usize, v: &[f64]| -> f64 {
                (0..v.len()).map(|i| w[row * v.len() + i] * v[i]).sum()
            };
            let mut hn = vec![0.0; hd];
            for j in 0..hd {
                let r = sig(dot(&layer.w_ih, j, x) + layer.b_ih[j] + dot(&layer.w_hh, j, &h) + layer.b_hh[j]);
                let z = sig(dot(&layer.w_ih, hd + j, x) + layer.b_ih[hd + j] + dot(&layer.w_hh, hd + j, &h) + layer.b_hh[hd + j]);
                let n = (dot(&layer.w_ih, 2 * hd + j, x)
                    + layer.b_ih[2 * hd + j]
                    + r * (dot(&layer.w_hh, 2 * hd + j, &h) + layer.b_hh[2 * hd + j]))
                    .tanh();
                hn[j] = (1.0 - z) * n + z * h[j];
            }
            h = hn;
            out.push(h.clone());
        }
        out
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = test_rng(31);
        let gru = random_gru(GruSpec::new(1, 2, 3).unwrap(), &mut rng);
        let x = rand_t(2, 4, &mut rng);
        let cols: Vec<Vec<f64>> = (0..4).map(|t| x.column(t)).collect();
        let expect = oracle(&gru.layers[0], &cols);
        let (y, _) = gru.forward(&x, None).unwrap();
        for t in 0..4 {
            for j in 0..3 {
                assert!((y.get(j, t) - expect[t][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_matches_sequence() {
        let mut rng = test_rng(32);
        let gru = random_gru(GruSpec::new(2, 3, 4).unwrap(), &mut rng);
        let x = rand_t(3, 7, &mut rng);
        let (y, _) = gru.forward(&x, None).unwrap();
        let mut state = gru.zero_state();
        let mut scratch = vec![0.0; 24];
        let mut out = vec![0.0; 4];
        for t in 0..7 {
            gru.step(&x.column(t), &mut state, &mut scratch, &mut out);
            assert_eq!(out, y.column(t));
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = test_rng(33);
        let gru = random_gru(GruSpec::new(2, 2, 3).unwrap(), &mut rng);
        let x = rand_t(2, 4, &mut rng);
        let (_, _, cache) = gru.forward_cached(&x, None).unwrap();
        let (gx, g, gh0) = gru.backward(&cache, &Tensor2D::zeros(3, 4), None).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(gh0.iter().flatten().all(|&v| v == 0.0));
        for l in &g.layers {
            assert!(l.w_ih.iter().chain(&l.w_hh).chain(&l.b_ih).chain(&l.b_hh).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
        let mut rng = test_rng(34);
        for &layers in &[1usize, 2, 1, 2, 2] {
            let spec = GruSpec::new(layers, 2, 3).unwrap();
            let gru = random_gru(spec, &mut rng);
            let x = rand_t(2, 4, &mut rng);
            let h0: Vec<Vec<f64>> = (0..layers).map(|_| (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
            let py = rand_t(3, 4, &mut rng);
            let ph: Vec<Vec<f64>> = (0..layers).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let loss = |g: &Gru<f64>, x: &Tensor2D<f64>, h0: &[Vec<f64>]| -> f64 {
                let (y, ht) = g.forward(x, Some(h0)).unwrap();
                let a: f64 = y.data().iter().zip(py.data()).map(|(a, b)| a * b).sum();
                let b: f64 = ht.iter().flatten().zip(ph.iter().flatten()).map(|(a, b)| a * b).sum();
                a + b
            };
            let (_, _, cache) = gru.forward_cached(&x, Some(&h0)).unwrap();
            let (gx, grads, gh0) = gru.backward(&cache, &py, Some(&ph)).unwrap();
            for l in 0..layers {
                for which in 0..4 {
                    let len = match which {
                        0 => gru.layers[l].w_ih.len(),
                        1 => gru.layers[l].w_hh.len(),
                        _ => gru.layers[l].b_ih.len(),
                    };
                    for i in 0..len {
                        let bump = |d: f64| {
                            let mut g = gru.clone();
                            let v = match which {
                                0 => &mut g.layers[l].w_ih,
                                1 => &mut g.layers[l].w_hh,
                                2 => &mut g.layers[l].b_ih,
                                _ => &mut g.layers[l].b_hh,
                            };
                            v[i] += d;
                            loss(&g, &x, &h0)
                        };
                        let num = (bump(h) - bump(-h)) / (2.0 * h);
                        let gl = &grads.layers[l];
                        let ana = [&gl.w_ih, &gl.w_hh, &gl.b_ih, &gl.b_hh][which][i];
                        assert!(rel(ana, num) < 1e-6, "layer {l} tensor {which} idx {i}: {ana} vs {num}");
                    }
                }
                for j in 0..3 {
                    let mut p = h0.clone();
                    let mut m = h0.clone();
                    p[l][j] += h;
                    m[l][j] -= h;
                    let num = (loss(&gru, &x, &p) - loss(&gru, &x, &m)) / (2.0 * h);
                    assert!(rel(gh0[l][j], num) < 1e-6);
                }
            }
            for i in 0..x.data().len() {
                let (mut p, mut m) = (x.clone(), x.clone());
                p.data_mut()[i] += h;
                m.data_mut()[i] -= h;
                let num = (loss(&gru, &p, &h0) - loss(&gru, &m, &h0)) / (2.0 * h);
                assert!(rel(gx.data()[i], num) < 1e-6);
            }
        }
    }

    #[test]
    fn gradients_finite_for_large_inputs() {
        let mut rng = test_rng(35);
        let gru = random_gru(GruSpec::new(2, 2, 3).unwrap(), &mut rng);
        let x = rand_t(2, 6, &mut rng).map(|v| v * 10.0);
        let (_, _, cache) = gru.forward_cached(&x, None).unwrap();
        let (gx, g, _) = gru.backward(&cache, &rand_t(3, 6, &mut rng), None).unwrap();
        assert!(gx.data().iter().all(|v| v.is_finite()));
        assert!(g.layers.iter().all(|l| l.w_ih.iter().chain(&l.w_hh).all(|v| v.is_finite())));
    }

    #[test]
    fn rejects_wrong_input_width() {
        let gru = Gru::<f64>::zeros(GruSpec::new(1, 2, 3).unwrap());
        assert!(matches!(gru.forward(&Tensor2D::zeros(3, 2), None), Err(NnError::Shape { .. })));
    }
}
