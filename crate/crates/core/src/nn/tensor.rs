use super::{shape_err, NnError};
use crate::Real;

/// Dense `channels × time` matrix stored channel-major (each channel's time
/// series is contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D<T> {
    channels: usize,
    time: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor2D<T> {
    pub fn zeros(channels: usize, time: usize) -> Self {
        Self {
            channels,
            time,
            data: vec![T::zero(); channels * time],
        }
    }

    pub fn from_vec(channels: usize, time: usize, data: Vec<T>) -> Result<Self, NnError> {
        if data.len() != channels * time {
            return Err(shape_err(
                "Tensor2D::from_vec",
                format!("{} values ({channels}x{time})", channels * time),
                data.len(),
            ));
        }
        Ok(Self {
            channels,
            time,
            data,
        })
    }

    /// Builds a tensor from per-time column vectors.
    pub fn from_columns(channels: usize, columns: &[Vec<T>]) -> Result<Self, NnError> {
        let mut out = Self::zeros(channels, columns.len());
        for (t, col) in columns.iter().enumerate() {
            out.set_column(t, col)?;
        }
        Ok(out)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> T {
        self.data[c * self.time + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: T) {
        self.data[c * self.time + t] = v;
    }

    #[inline]
    pub fn row(&self, c: usize) -> &[T] {
        &self.data[c * self.time..(c + 1) * self.time]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.time..(c + 1) * self.time]
    }

    pub fn column(&self, t: usize) -> Vec<T> {
        (0..self.channels).map(|c| self.get(c, t)).collect()
    }

    pub fn set_column(&mut self, t: usize, values: &[T]) -> Result<(), NnError> {
        if values.len() != self.channels {
            return Err(shape_err("Tensor2D::set_column", self.channels, values.len()));
        }
        for (c, &v) in values.iter().enumerate() {
            self.set(c, t, v);
        }
        Ok(())
    }

    /// Time-major copy: `out[t * channels + c]`.
    pub fn to_time_major(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.data.len()];
        for c in 0..self.channels {
            for (t, &v) in self.row(c).iter().enumerate() {
                out[t * self.channels + c] = v;
            }
        }
        out
    }

    pub fn from_time_major(channels: usize, time: usize, values: &[T]) -> Result<Self, NnError> {
        if values.len() != channels * time {
            return Err(shape_err(
                "Tensor2D::from_time_major",
                channels * time,
                values.len(),
            ));
        }
        let mut out = Self::zeros(channels, time);
        for t in 0..time {
            for c in 0..channels {
                out.data[c * time + t] = values[t * channels + c];
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            channels: self.channels,
            time: self.time,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<(), NnError> {
        self.check_same_shape("Tensor2D::add_assign", other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn check_same_shape(&self, op: &'static str, other: &Self) -> Result<(), NnError> {
        if self.channels != other.channels || self.time != other.time {
            return Err(shape_err(
                op,
                format!("{}x{}", self.channels, self.time),
                format!("{}x{}", other.channels, other.time),
            ));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Converts element precision.
    pub fn cast<U: Real>(&self) -> Tensor2D<U> {
        Tensor2D {
            channels: self.channels,
            time: self.time,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_channel_major() {
        let t = Tensor2D::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(t.column(2), vec![3.0, 6.0]);
        let tm = t.to_time_major();
        assert_eq!(tm, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(Tensor2D::from_time_major(2, 3, &tm).unwrap(), t);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(Tensor2D::<f32>::from_vec(2, 3, vec![0.0; 5]).is_err());
    }
}
