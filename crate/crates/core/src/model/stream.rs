use super::{ModelError, ModelWeights};
use crate::nn::{sigmoid, NnError};
use crate::Real;

/// Left context of one conv: the last `kernel - 1` input columns.
#[derive(Debug, Clone)]
struct Ring<T> {
    channels: usize,
    cap: usize,
    /// `channels × cap`, channel-major; `head` is the oldest column.
    data: Vec<T>,
    head: usize,
}

impl<T: Real> Ring<T> {
    fn new(channels: usize, cap: usize) -> Self {
        Self {
            channels,
            cap,
            data: vec![T::zero(); channels * cap],
            head: 0,
        }
    }

    /// Oldest-to-newest history of channel `c` as two contiguous runs.
    #[inline]
    fn history(&self, c: usize) -> (&[T], &[T]) {
        let row = &self.data[c * self.cap..(c + 1) * self.cap];
        (&row[self.head..], &row[..self.head])
    }

    fn push(&mut self, column: &[T]) {
        if self.cap == 0 {
            return;
        }
        for (c, &v) in column.iter().enumerate().take(self.channels) {
            self.data[c * self.cap + self.head] = v;
        }
        self.head = (self.head + 1) % self.cap;
    }

    fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
        self.head = 0;
    }
}

/// Per-stream inference memory. One state serves one audio stream; several
/// streams may share a weight bundle, each with its own state.
#[derive(Debug, Clone)]
pub struct StreamState<T> {
    rings: Vec<Ring<T>>,
    phase: Vec<usize>,
    /// Batch-norm inference affine per unit, folded once at construction.
    affine: Vec<(Vec<T>, Vec<T>)>,
    /// Input column of each unit for the current frame.
    acts: Vec<Vec<T>>,
    out: Vec<T>,
    hidden: Vec<Vec<T>>,
    gru_scratch: Vec<T>,
    gru_out: Vec<T>,
    frames_in: usize,
    frames_out: usize,
}

impl<T: Real> StreamState<T> {
    /// Zero initial state for `weights`. Running statistics are read once
    /// here, so build a new state after changing the weights.
    pub fn new(weights: &ModelWeights<T>) -> Self {
        let units = &weights.units;
        let mut acts: Vec<Vec<T>> = units.iter().map(|u| vec![T::zero(); u.conv.spec.in_ch]).collect();
        acts.push(vec![T::zero(); weights.config.width]);
        Self {
            rings: units
                .iter()
                .map(|u| Ring::new(u.conv.spec.in_ch, u.conv.spec.kernel - 1))
                .collect(),
            phase: vec![0; units.len()],
            affine: units.iter().map(|u| u.bn.infer_affine()).collect(),
            acts,
            out: Vec::with_capacity(units.iter().map(|u| u.conv.spec.out_ch).max().unwrap_or(0)),
            hidden: weights.gru.zero_state(),
            gru_scratch: vec![T::zero(); 6 * weights.gru.spec.hidden],
            gru_out: vec![T::zero(); weights.gru.spec.hidden],
            frames_in: 0,
            frames_out: 0,
        }
    }

    pub fn reset(&mut self) {
        self.rings.iter_mut().for_each(Ring::clear);
        self.phase.iter_mut().for_each(|p| *p = 0);
        self.hidden.iter_mut().flatten().for_each(|v| *v = T::zero());
        self.frames_in = 0;
        self.frames_out = 0;
    }

    pub fn frames_in(&self) -> usize {
        self.frames_in
    }

    pub fn frames_out(&self) -> usize {
        self.frames_out
    }

    /// Left-context capacity of every conv, in columns.
    pub fn ring_capacities(&self) -> Vec<usize> {
        self.rings.iter().map(|r| r.cap).collect()
    }
}

impl<T: Real> ModelWeights<T> {
    /// Feeds one normalized feature frame. Returns a speech probability when
    /// this frame completes an output step.
    pub fn stream_push(&self, state: &mut StreamState<T>, frame: &[T]) -> Result<Option<T>, ModelError> {
        if frame.len() != self.config.n_mels {
            return Err(NnError::Shape {
                op: "stream_push",
                expected: format!("{} features", self.config.n_mels),
                found: format!("{}", frame.len()),
            }
            .into());
        }
        state.frames_in += 1;
        state.acts[0].copy_from_slice(frame);
        for (i, u) in self.units.iter().enumerate() {
            let spec = &u.conv.spec;
            let emit = state.phase[i] == 0;
            state.phase[i] = (state.phase[i] + 1) % spec.stride;
            if emit {
                let (scale, shift) = &state.affine[i];
                let ring = &state.rings[i];
                let input = &state.acts[i];
                let ipg = spec.in_per_group();
                let opg = spec.out_per_group();
                let k_len = spec.kernel;
                state.out.clear();
                for o in 0..spec.out_ch {
                    let g = o / opg;
                    let mut acc = u.conv.bias[o];
                    for j in 0..ipg {
                        let ic = g * ipg + j;
                        let w = &u.conv.weight[(o * ipg + j) * k_len..(o * ipg + j + 1) * k_len];
                        let (old, new) = ring.history(ic);
                        let (w_old, rest) = w.split_at(old.len());
                        let (w_new, w_cur) = rest.split_at(new.len());
                        for (&a, &b) in w_old.iter().zip(old) {
                            acc += a * b;
                        }
                        for (&a, &b) in w_new.iter().zip(new) {
                            acc += a * b;
                        }
                        acc += w_cur[0] * input[ic];
                    }
                    let mut y = acc * scale[o] + shift[o];
                    if u.relu && y < T::zero() {
                        y = T::zero();
                    }
                    state.out.push(y);
                }
                if let Some(from) = u.skip_from {
                    for (y, &s) in state.out.iter_mut().zip(&state.acts[from]) {
                        *y += s;
                    }
                }
            }
            state.rings[i].push(&state.acts[i]);
            if !emit {
                return Ok(None);
            }
            let next = &mut state.acts[i + 1];
            next.clear();
            next.extend_from_slice(&state.out);
        }
        let last = state.acts.last().expect("at least one activation slot");
        self.gru.step(last, &mut state.hidden, &mut state.gru_scratch, &mut state.gru_out);
        let logit = self.fc.forward_vec(&state.gru_out)?[0];
        state.frames_out += 1;
        Ok(Some(sigmoid(logit)))
    }

    /// Streams every column of `x` and collects the emitted probabilities.
    pub fn stream_sequence(&self, state: &mut StreamState<T>, x: &crate::nn::Tensor2D<T>) -> Result<Vec<T>, ModelError> {
        let mut out = Vec::new();
        for t in 0..x.time() {
            if let Some(p) = self.stream_push(state, &x.column(t))? {
                out.push(p);
            }
        }
        Ok(out)
    }
}
