//! Three-dimensional complex FFT over x-fastest arrays, with pruning for
//! zero-padded inputs and truncated outputs.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::scalar::Real;

/// Columns gathered together when transforming along z.
const Z_BLOCK: usize = 16;

pub(crate) struct Fft3<T: Real> {
    pub dims: [usize; 3],
    forward: [Arc<dyn Fft<T>>; 3],
    inverse: [Arc<dyn Fft<T>>; 3],
}

impl<T: Real> Fft3<T> {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let f = |p: &mut FftPlanner<T>, n: usize, d: FftDirection| p.plan_fft(n, d);
        Self {
            dims,
            forward: [
                f(&mut planner, dims[0], FftDirection::Forward),
                f(&mut planner, dims[1], FftDirection::Forward),
                f(&mut planner, dims[2], FftDirection::Forward),
            ],
            inverse: [
                f(&mut planner, dims[0], FftDirection::Inverse),
                f(&mut planner, dims[1], FftDirection::Inverse),
                f(&mut planner, dims[2], FftDirection::Inverse),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Forward transform of data that is zero outside `[0, support)` per axis.
    pub fn forward_pruned(&self, buf: &mut [Complex<T>], support: [usize; 3]) {
        self.x_pass(buf, &self.forward[0], support[1], support[2]);
        self.y_pass(buf, &self.forward[1], support[2]);
        self.z_pass(buf, &self.forward[2], self.dims[1]);
    }

    /// Unnormalized inverse transform; only `[0, keep)` per axis is valid afterwards.
    pub fn inverse_pruned(&self, buf: &mut [Complex<T>], keep: [usize; 3]) {
        let m1 = self.dims[1];
        self.z_pass(buf, &self.inverse[2], m1);
        self.y_pass(buf, &self.inverse[1], keep[2]);
        self.x_pass(buf, &self.inverse[0], keep[1], keep[2]);
    }

    pub fn forward(&self, buf: &mut [Complex<T>]) {
        self.forward_pruned(buf, self.dims);
    }

    #[cfg(test)]
    pub fn inverse(&self, buf: &mut [Complex<T>]) {
        self.inverse_pruned(buf, self.dims);
    }

    fn x_pass(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>, rows: usize, planes: usize) {
        let [m0, m1, _] = self.dims;
        buf.par_chunks_mut(m0 * m1).take(planes).for_each(|plane| {
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(&mut plane[..rows * m0], &mut scratch);
        });
    }

    fn y_pass(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>, planes: usize) {
        let [m0, m1, _] = self.dims;
        buf.par_chunks_mut(m0 * m1).take(planes).for_each(|plane| {
            let mut tmp = vec![Complex::new(T::zero(), T::zero()); m0 * m1];
            let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
            for j in 0..m1 {
                for i in 0..m0 {
                    tmp[i * m1 + j] = plane[j * m0 + i];
                }
            }
            plan.process_with_scratch(&mut tmp, &mut scratch);
            for j in 0..m1 {
                for i in 0..m0 {
                    plane[j * m0 + i] = tmp[i * m1 + j];
                }
            }
        });
    }

    /// Transforms along z for every column `(i, j)` with `j < rows`.
    fn z_pass(&self, buf: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>, rows: usize) {
        let [m0, m1, m2] = self.dims;
        let stride = m0 * m1;
        let columns = m0 * rows;
        let blocks: Vec<usize> = (0..columns).step_by(Z_BLOCK).collect();
        // Bounded batches keep the gathered copies small.
        let batch = (rayon::current_num_threads() * 4).max(1);
        for group in blocks.chunks(batch) {
            let done: Vec<(usize, Vec<Complex<T>>)> = group
                .par_iter()
                .map(|&start| {
                    let width = Z_BLOCK.min(columns - start);
                    let mut tmp = vec![Complex::new(T::zero(), T::zero()); width * m2];
                    let mut scratch =
                        vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
                    for k in 0..m2 {
                        let base = k * stride + start;
                        for b in 0..width {
                            tmp[b * m2 + k] = buf[base + b];
                        }
                    }
                    plan.process_with_scratch(&mut tmp, &mut scratch);
                    (start, tmp)
                })
                .collect();
            for (start, tmp) in done {
                let width = tmp.len() / m2;
                for k in 0..m2 {
                    let base = k * stride + start;
                    for b in 0..width {
                        buf[base + b] = tmp[b * m2 + k];
                    }
                }
            }
        }
    }
}

/// Smallest `m >= n` whose prime factors are all in {2, 3, 5, 7}.
pub(crate) fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}
