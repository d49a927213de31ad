//! Zero-padded FFT convolution on Cartesian grids.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Linear convolution `y[o] = Σ_i K(o - off - i) f[i]` of an `M^N` input with a
/// tabulated kernel, evaluated on a `Q^N` output window centred on the input.
pub(crate) struct PaddedConvolver {
    dim: usize,
    m_in: usize,
    q_out: usize,
    size: usize,
    table: Vec<f64>,
    spectrum: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl PaddedConvolver {
    /// `kernel` receives the integer offset vector `d` (in units of `h`).
    pub fn new(dim: usize, m_in: usize, q_out: usize, kernel: impl Fn(&[i64]) -> f64) -> Self {
        assert!(q_out >= m_in && (q_out - m_in).is_multiple_of(2));
        let offset = ((q_out - m_in) / 2) as i64;
        let size = q_out + m_in;
        let total = size.pow(dim as u32);
        let mut table = vec![0.0; total];
        let mut d = [0i64; 3];
        for (k, t) in table.iter_mut().enumerate() {
            let mut rem = k;
            for axis in (0..dim).rev() {
                let kk = (rem % size) as i64;
                rem /= size;
                let j = if kk < q_out as i64 { kk } else { kk - size as i64 };
                d[axis] = j - offset;
            }
            *t = kernel(&d[..dim]);
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        let ifft = planner.plan_fft_inverse(size);
        let mut spectrum: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        transform(&mut spectrum, dim, size, fft.as_ref());
        Self {
            dim,
            m_in,
            q_out,
            size,
            table,
            spectrum,
            fft,
            ifft,
        }
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn padded_size(&self) -> usize {
        self.size
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let (dim, m, q, s) = (self.dim, self.m_in, self.q_out, self.size);
        debug_assert_eq!(input.len(), m.pow(dim as u32));
        let mut buf = vec![Complex64::new(0.0, 0.0); s.pow(dim as u32)];
        for (i, &v) in input.iter().enumerate() {
            buf[remap(i, dim, m, s)] = Complex64::new(v, 0.0);
        }
        transform(&mut buf, dim, s, self.fft.as_ref());
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        transform(&mut buf, dim, s, self.ifft.as_ref());
        let norm = 1.0 / buf.len() as f64;
        (0..q.pow(dim as u32))
            .map(|o| buf[remap(o, dim, q, s)].re * norm)
            .collect()
    }
}

/// Flat index in an `n^dim` array to the flat index of the same multi-index in
/// an `s^dim` array.
fn remap(flat: usize, dim: usize, n: usize, s: usize) -> usize {
    let mut rem = flat;
    let mut out = 0;
    let mut scale = 1;
    for _ in 0..dim {
        out += (rem % n) * scale;
        rem /= n;
        scale *= s;
    }
    out
}

/// In-place `dim`-dimensional transform of an `s^dim` row-major array.
fn transform(data: &mut [Complex64], dim: usize, s: usize, fft: &dyn Fft<f64>) {
    // Last axis is contiguous: rustfft handles a batch of consecutive lines.
    fft.process(data);
    let mut line = vec![Complex64::new(0.0, 0.0); s];
    for axis in 0..dim.saturating_sub(1) {
        let stride = s.pow((dim - 1 - axis) as u32);
        let block = stride * s;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (k, l) in line.iter_mut().enumerate() {
                    *l = data[start + k * stride];
                }
                fft.process(&mut line);
                for (k, l) in line.iter().enumerate() {
                    data[start + k * stride] = *l;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(dim: usize, m: usize, q: usize, k: &dyn Fn(&[i64]) -> f64, f: &[f64]) -> Vec<f64> {
        let off = ((q - m) / 2) as i64;
        (0..q.pow(dim as u32))
            .map(|o| {
                let oi = multi(o, dim, q);
                (0..f.len())
                    .map(|i| {
                        let ii = multi(i, dim, m);
                        let d: Vec<i64> = (0..dim).map(|a| oi[a] as i64 - off - ii[a] as i64).collect();
                        k(&d) * f[i]
                    })
                    .sum()
            })
            .collect()
    }

    fn multi(flat: usize, dim: usize, n: usize) -> Vec<usize> {
        let mut v = vec![0; dim];
        let mut r = flat;
        for a in (0..dim).rev() {
            v[a] = r % n;
            r /= n;
        }
        v
    }

    #[test]
    fn matches_direct_sum() {
        let kernel = |d: &[i64]| 1.0 / (1.0 + d.iter().map(|x| (x * x) as f64).sum::<f64>());
        for (dim, m, q) in [(1usize, 9usize, 9usize), (1, 8, 24), (2, 5, 5), (2, 4, 12), (3, 3, 5)] {
            let f: Vec<f64> = (0..m.pow(dim as u32))
                .map(|i| ((i * 7 + 3) % 11) as f64 - 4.0)
                .collect();
            let c = PaddedConvolver::new(dim, m, q, kernel);
            let fast = c.apply(&f);
            let slow = direct(dim, m, q, &kernel, &f);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "dim {dim}: {a} vs {b}");
            }
        }
    }
}
