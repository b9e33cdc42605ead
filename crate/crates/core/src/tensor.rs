//! Channel×time tensors and the deterministic numeric kernels on them.
//!
//! Layout is row-major by channel: each channel's time series is
//! contiguous. All convolutions use zero "same" padding
//! (`pad_left = (k - 1) / 2`, `pad_right = k / 2`) so the frame count is
//! preserved; reductions accumulate in `f64`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real-valued matrix with channel×time semantics.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D<F: Real = f32> {
    channels: usize,
    frames: usize,
    data: Vec<F>,
}

impl<F: Real> Tensor2D<F> {
    pub fn new(channels: usize, frames: usize, data: Vec<F>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape {
                axis: "channels",
                expected: 1,
                got: 0,
            });
        }
        if frames == 0 {
            return Err(Error::Shape {
                axis: "frames",
                expected: 1,
                got: 0,
            });
        }
        if data.len() != channels * frames {
            return Err(Error::Shape {
                axis: "data length",
                expected: channels * frames,
                got: data.len(),
            });
        }
        Ok(Self {
            channels,
            frames,
            data,
        })
    }

    pub fn zeros(channels: usize, frames: usize) -> Self {
        Self {
            channels,
            frames,
            data: vec![F::zero(); channels * frames],
        }
    }

    /// Build from per-channel rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let channels = rows.len();
        let frames = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(channels * frames);
        for row in rows {
            if row.len() != frames {
                return Err(Error::Shape {
                    axis: "frames",
                    expected: frames,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(channels, frames, data)
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> F {
        debug_assert!(c < self.channels && t < self.frames);
        self.data[c * self.frames + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: F) {
        debug_assert!(c < self.channels && t < self.frames);
        self.data[c * self.frames + t] = v;
    }

    #[inline]
    pub fn row(&self, c: usize) -> &[F] {
        &self.data[c * self.frames..(c + 1) * self.frames]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize) -> &mut [F] {
        &mut self.data[c * self.frames..(c + 1) * self.frames]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            channels: self.channels,
            frames: self.frames,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.channels != other.channels {
            return Err(Error::Shape {
                axis: "channels",
                expected: self.channels,
                got: other.channels,
            });
        }
        if self.frames != other.frames {
            return Err(Error::Shape {
                axis: "frames",
                expected: self.frames,
                got: other.frames,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            channels: self.channels,
            frames: self.frames,
            data,
        })
    }

    /// Stack tensors along the channel axis, in argument order.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Shape {
            axis: "channels",
            expected: 1,
            got: 0,
        })?;
        let frames = first.frames;
        let mut channels = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.frames != frames {
                return Err(Error::Shape {
                    axis: "frames",
                    expected: frames,
                    got: p.frames,
                });
            }
            channels += p.channels;
            data.extend_from_slice(&p.data);
        }
        Self::new(channels, frames, data)
    }
}

/// Dense row-major matrix used for pointwise / depthwise weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F: Real = f32> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn new(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                axis: "matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    /// Square identity, handy in tests and masking setups.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> F {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }
}

/// Rank-3 kernel for a full (cross-channel) 1D convolution,
/// laid out `[out_ch][in_ch][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<F: Real = f32> {
    out_ch: usize,
    in_ch: usize,
    k: usize,
    data: Vec<F>,
}

impl<F: Real> ConvKernel<F> {
    pub fn new(out_ch: usize, in_ch: usize, k: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != out_ch * in_ch * k {
            return Err(Error::Shape {
                axis: "kernel data length",
                expected: out_ch * in_ch * k,
                got: data.len(),
            });
        }
        Ok(Self {
            out_ch,
            in_ch,
            k,
            data,
        })
    }

    #[inline]
    pub fn out_ch(&self) -> usize {
        self.out_ch
    }

    #[inline]
    pub fn in_ch(&self) -> usize {
        self.in_ch
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, j: usize) -> F {
        self.data[(o * self.in_ch + i) * self.k + j]
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }
}

#[inline]
fn same_pad_left(k: usize) -> usize {
    (k - 1) / 2
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Point-wise (1×1) convolution: per frame, a linear map across channels.
///
/// `y[o,t] = bias[o] + Σ_i weight[o,i]·x[i,t]`
pub fn pconv1d<F: Real>(x: &Tensor2D<F>, weight: &Matrix<F>, bias: &[F]) -> Result<Tensor2D<F>> {
    if weight.cols() != x.channels() {
        return Err(Error::Shape {
            axis: "input channels",
            expected: weight.cols(),
            got: x.channels(),
        });
    }
    if bias.len() != weight.rows() {
        return Err(Error::Shape {
            axis: "bias length",
            expected: weight.rows(),
            got: bias.len(),
        });
    }
    let t_len = x.frames();
    let mut out = Tensor2D::zeros(weight.rows(), t_len);
    let mut acc = vec![0f64; t_len];
    for (o, &bias_o) in bias.iter().enumerate() {
        let b = bias_o.into_f64();
        for a in acc.iter_mut() {
            *a = b;
        }
        for i in 0..x.channels() {
            let w = weight.get(o, i).into_f64();
            if w == 0.0 {
                continue;
            }
            let row = x.row(i);
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += w * v.into_f64();
            }
        }
        let out_row = out.row_mut(o);
        for (y, &a) in out_row.iter_mut().zip(acc.iter()) {
            *y = F::from_f64_lossy(a);
        }
    }
    Ok(out)
}

/// Depth-wise convolution: each channel convolved with its own kernel,
/// zero same-padding, frames preserved.
pub fn dconv1d<F: Real>(x: &Tensor2D<F>, kernels: &Matrix<F>, bias: &[F]) -> Result<Tensor2D<F>> {
    if kernels.rows() != x.channels() {
        return Err(Error::Shape {
            axis: "channels",
            expected: x.channels(),
            got: kernels.rows(),
        });
    }
    if bias.len() != x.channels() {
        return Err(Error::Shape {
            axis: "bias length",
            expected: x.channels(),
            got: bias.len(),
        });
    }
    let k = kernels.cols();
    let t_len = x.frames();
    let pad_left = same_pad_left(k) as isize;
    let mut out = Tensor2D::zeros(x.channels(), t_len);
    for (c, &bias_c) in bias.iter().enumerate() {
        let row = x.row(c);
        let kern = kernels.row(c);
        let b = bias_c.into_f64();
        let out_row = out.row_mut(c);
        for (t, y) in out_row.iter_mut().enumerate() {
            let mut acc = b;
            for (j, &w) in kern.iter().enumerate() {
                let src = t as isize + j as isize - pad_left;
                if src >= 0 && (src as usize) < t_len {
                    acc += w.into_f64() * row[src as usize].into_f64();
                }
            }
            *y = F::from_f64_lossy(acc);
        }
    }
    Ok(out)
}

/// Full cross-channel 1D convolution, stride 1, zero same-padding.
pub fn conv1d_general<F: Real>(
    x: &Tensor2D<F>,
    weight: &ConvKernel<F>,
    bias: &[F],
) -> Result<Tensor2D<F>> {
    if weight.in_ch() != x.channels() {
        return Err(Error::Shape {
            axis: "input channels",
            expected: weight.in_ch(),
            got: x.channels(),
        });
    }
    if bias.len() != weight.out_ch() {
        return Err(Error::Shape {
            axis: "bias length",
            expected: weight.out_ch(),
            got: bias.len(),
        });
    }
    let k = weight.k();
    let t_len = x.frames();
    let pad_left = same_pad_left(k) as isize;
    let mut out = Tensor2D::zeros(weight.out_ch(), t_len);
    for (o, &bias_o) in bias.iter().enumerate() {
        let b = bias_o.into_f64();
        let out_row = out.row_mut(o);
        for (t, y) in out_row.iter_mut().enumerate() {
            let mut acc = b;
            for i in 0..x.channels() {
                let row = x.row(i);
                for j in 0..k {
                    let src = t as isize + j as isize - pad_left;
                    if src >= 0 && (src as usize) < t_len {
                        acc += weight.get(o, i, j).into_f64() * row[src as usize].into_f64();
                    }
                }
            }
            *y = F::from_f64_lossy(acc);
        }
    }
    Ok(out)
}

/// Layer normalization over the channel axis, per frame.
pub fn layer_norm<F: Real>(
    x: &Tensor2D<F>,
    gamma: &[F],
    beta: &[F],
    eps: f64,
) -> Result<Tensor2D<F>> {
    let c_len = x.channels();
    if gamma.len() != c_len {
        return Err(Error::Shape {
            axis: "gamma length",
            expected: c_len,
            got: gamma.len(),
        });
    }
    if beta.len() != c_len {
        return Err(Error::Shape {
            axis: "beta length",
            expected: c_len,
            got: beta.len(),
        });
    }
    let t_len = x.frames();
    let mut out = Tensor2D::zeros(c_len, t_len);
    for t in 0..t_len {
        let mut mean = 0f64;
        for c in 0..c_len {
            mean += x.get(c, t).into_f64();
        }
        mean /= c_len as f64;
        let mut var = 0f64;
        for c in 0..c_len {
            let d = x.get(c, t).into_f64() - mean;
            var += d * d;
        }
        var /= c_len as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for c in 0..c_len {
            let v = (x.get(c, t).into_f64() - mean) * inv;
            out.set(
                c,
                t,
                F::from_f64_lossy(gamma[c].into_f64() * v + beta[c].into_f64()),
            );
        }
    }
    Ok(out)
}

/// GELU with the exact normal CDF: `x·Φ(x)`, `Φ` erf-based.
pub fn gelu<F: Real>(x: &Tensor2D<F>) -> Tensor2D<F> {
    x.map(gelu_scalar)
}

#[inline]
pub fn gelu_scalar<F: Real>(v: F) -> F {
    let x = v.into_f64();
    let phi = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    F::from_f64_lossy(x * phi)
}

/// Row-wise softmax over the time axis, max-subtracted for stability.
pub fn softmax_time<F: Real>(x: &Tensor2D<F>) -> Tensor2D<F> {
    let mut out = Tensor2D::zeros(x.channels(), x.frames());
    let mut exps = vec![0f64; x.frames()];
    for c in 0..x.channels() {
        let row = x.row(c);
        let max = row
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v.into_f64()));
        let mut sum = 0f64;
        for (e, &v) in exps.iter_mut().zip(row) {
            *e = (v.into_f64() - max).exp();
            sum += *e;
        }
        let out_row = out.row_mut(c);
        for (y, &e) in out_row.iter_mut().zip(exps.iter()) {
            *y = F::from_f64_lossy(e / sum);
        }
    }
    out
}

/// Elementwise tanh.
pub fn tanh<F: Real>(x: &Tensor2D<F>) -> Tensor2D<F> {
    x.map(|v| F::from_f64_lossy(v.into_f64().tanh()))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // oracles mirror the index math on purpose
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    // -- independent naive-loop oracles ------------------------------------

    pub fn oracle_pconv(x: &Tensor2D<f32>, w: &Matrix<f32>, b: &[f32]) -> Tensor2D<f32> {
        let mut y = Tensor2D::zeros(w.rows(), x.frames());
        for o in 0..w.rows() {
            for t in 0..x.frames() {
                let mut acc = b[o] as f64;
                for i in 0..x.channels() {
                    acc += w.get(o, i) as f64 * x.get(i, t) as f64;
                }
                y.set(o, t, acc as f32);
            }
        }
        y
    }

    pub fn oracle_dconv(x: &Tensor2D<f32>, kern: &Matrix<f32>, b: &[f32]) -> Tensor2D<f32> {
        let k = kern.cols();
        let pad = ((k - 1) / 2) as isize;
        let mut y = Tensor2D::zeros(x.channels(), x.frames());
        for c in 0..x.channels() {
            for t in 0..x.frames() {
                let mut acc = b[c] as f64;
                for j in 0..k {
                    let src = t as isize + j as isize - pad;
                    if src >= 0 && (src as usize) < x.frames() {
                        acc += kern.get(c, j) as f64 * x.get(c, src as usize) as f64;
                    }
                }
                y.set(c, t, acc as f32);
            }
        }
        y
    }

    pub fn oracle_conv_general(
        x: &Tensor2D<f32>,
        w: &ConvKernel<f32>,
        b: &[f32],
    ) -> Tensor2D<f32> {
        let pad = ((w.k() - 1) / 2) as isize;
        let mut y = Tensor2D::zeros(w.out_ch(), x.frames());
        for o in 0..w.out_ch() {
            for t in 0..x.frames() {
                let mut acc = b[o] as f64;
                for i in 0..x.channels() {
                    for j in 0..w.k() {
                        let src = t as isize + j as isize - pad;
                        if src >= 0 && (src as usize) < x.frames() {
                            acc += w.get(o, i, j) as f64 * x.get(i, src as usize) as f64;
                        }
                    }
                }
                y.set(o, t, acc as f32);
            }
        }
        y
    }

    pub fn max_rel_err(a: &Tensor2D<f32>, b: &Tensor2D<f32>) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| {
                let denom = (y as f64).abs().max(1.0);
                ((x as f64) - (y as f64)).abs() / denom
            })
            .fold(0.0, f64::max)
    }

    fn random_tensor(rng: &mut StdRng, c: usize, t: usize) -> Tensor2D<f32> {
        let data = (0..c * t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor2D::new(c, t, data).unwrap()
    }

    fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> Matrix<f32> {
        let data = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::new(r, c, data).unwrap()
    }

    fn random_vec(rng: &mut StdRng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    // -- pconv1d ------------------------------------------------------------

    #[test]
    fn pconv_hand_example() {
        // x=[[1,2],[3,4]], weight=[[1,1]], bias=[0] -> [[4,6]]
        let x = Tensor2D::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]]).unwrap();
        let w = Matrix::new(1, 2, vec![1.0, 1.0]).unwrap();
        let y = pconv1d(&x, &w, &[0.0]).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0]);
    }

    #[test]
    fn pconv_identity() {
        let mut rng = StdRng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 4, 6);
        let y = pconv1d(&x, &Matrix::identity(4), &[0.0; 4]).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn pconv_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..50 {
            let (ci, co, t) = (
                rng.gen_range(1..=8),
                rng.gen_range(1..=8),
                rng.gen_range(1..=32),
            );
            let x = random_tensor(&mut rng, ci, t);
            let w = random_matrix(&mut rng, co, ci);
            let b = random_vec(&mut rng, co);
            let got = pconv1d(&x, &w, &b).unwrap();
            let want = oracle_pconv(&x, &w, &b);
            assert!(max_rel_err(&got, &want) < 1e-6);
        }
    }

    #[test]
    fn pconv_shape_error_names_axis() {
        let x = Tensor2D::<f32>::zeros(3, 4);
        let w = Matrix::zeros(2, 5);
        let err = pconv1d(&x, &w, &[0.0; 2]).unwrap_err();
        assert!(err.to_string().contains("input channels"));
    }

    // -- dconv1d ------------------------------------------------------------

    #[test]
    fn dconv_hand_example() {
        // x=[[1,2,3]], kernel=[[1,1,1]] -> [[3,6,5]]
        let x = Tensor2D::from_rows(&[vec![1.0f32, 2.0, 3.0]]).unwrap();
        let k = Matrix::new(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        let y = dconv1d(&x, &k, &[0.0]).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn dconv_centered_delta_is_identity() {
        let mut rng = StdRng::seed_from_u64(3);
        for &k in &[1usize, 3, 7, 65] {
            let x = random_tensor(&mut rng, 3, 20);
            let mut data = vec![0.0f32; 3 * k];
            for c in 0..3 {
                data[c * k + (k - 1) / 2] = 1.0;
            }
            let kern = Matrix::new(3, k, data).unwrap();
            let y = dconv1d(&x, &kern, &[0.0; 3]).unwrap();
            assert_eq!(y.data(), x.data(), "k={k}");
        }
    }

    #[test]
    fn dconv_matches_oracle_large_kernel() {
        let mut rng = StdRng::seed_from_u64(4);
        let x = random_tensor(&mut rng, 4, 9);
        let k = random_matrix(&mut rng, 4, 65);
        let b = random_vec(&mut rng, 4);
        let got = dconv1d(&x, &k, &b).unwrap();
        let want = oracle_dconv(&x, &k, &b);
        assert!(max_rel_err(&got, &want) < 1e-6);
    }

    #[test]
    fn dconv_channel_mismatch() {
        let x = Tensor2D::<f32>::zeros(3, 4);
        let k = Matrix::zeros(2, 3);
        assert!(dconv1d(&x, &k, &[0.0; 3]).is_err());
    }

    // -- conv1d_general -----------------------------------------------------

    #[test]
    fn conv_general_k1_reduces_to_pconv() {
        let mut rng = StdRng::seed_from_u64(5);
        let x = random_tensor(&mut rng, 5, 7);
        let w2 = random_matrix(&mut rng, 3, 5);
        let b = random_vec(&mut rng, 3);
        let w3 = ConvKernel::new(3, 5, 1, w2.data().to_vec()).unwrap();
        let a = conv1d_general(&x, &w3, &b).unwrap();
        let p = pconv1d(&x, &w2, &b).unwrap();
        assert_eq!(a.data(), p.data());
    }

    #[test]
    fn conv_general_single_channel_reduces_to_dconv() {
        let mut rng = StdRng::seed_from_u64(6);
        let x = random_tensor(&mut rng, 1, 9);
        let kern = random_matrix(&mut rng, 1, 7);
        let b = random_vec(&mut rng, 1);
        let w3 = ConvKernel::new(1, 1, 7, kern.data().to_vec()).unwrap();
        let a = conv1d_general(&x, &w3, &b).unwrap();
        let d = dconv1d(&x, &kern, &b).unwrap();
        assert_eq!(a.data(), d.data());
    }

    #[test]
    fn conv_general_matches_oracle_k4() {
        let mut rng = StdRng::seed_from_u64(7);
        let x = random_tensor(&mut rng, 5, 7);
        let data = (0..3 * 5 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = ConvKernel::new(3, 5, 4, data).unwrap();
        let b = random_vec(&mut rng, 3);
        let got = conv1d_general(&x, &w, &b).unwrap();
        let want = oracle_conv_general(&x, &w, &b);
        assert!(max_rel_err(&got, &want) < 1e-6);
        assert_eq!(got.frames(), x.frames());
    }

    // -- layer_norm -----------------------------------------------------------

    #[test]
    fn layer_norm_two_channel_frame() {
        let x = Tensor2D::from_rows(&[vec![1.0f32], vec![3.0]]).unwrap();
        let y = layer_norm(&x, &[1.0, 1.0], &[0.0, 0.0], 1e-6).unwrap();
        assert!((y.get(0, 0) + 1.0).abs() < 1e-3);
        assert!((y.get(1, 0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn layer_norm_constant_frame_is_zero() {
        let x = Tensor2D::from_rows(&[vec![5.0f32], vec![5.0], vec![5.0]]).unwrap();
        let y = layer_norm(&x, &[1.0; 3], &[0.0; 3], 1e-6).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn layer_norm_affine_collapse() {
        let mut rng = StdRng::seed_from_u64(8);
        let x = random_tensor(&mut rng, 4, 5);
        let y = layer_norm(&x, &[0.0; 4], &[2.5; 4], 1e-6).unwrap();
        assert!(y.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn layer_norm_standardizes() {
        let mut rng = StdRng::seed_from_u64(9);
        let x = random_tensor(&mut rng, 16, 10);
        let y = layer_norm(&x, &[1.0; 16], &[0.0; 16], 1e-6).unwrap();
        for t in 0..10 {
            let mut mean = 0f64;
            let mut var = 0f64;
            for c in 0..16 {
                mean += y.get(c, t) as f64;
            }
            mean /= 16.0;
            for c in 0..16 {
                let d = y.get(c, t) as f64 - mean;
                var += d * d;
            }
            var /= 16.0;
            assert!(mean.abs() < 1e-5);
            assert!((var - 1.0).abs() < 1e-3);
        }
    }

    // -- gelu -----------------------------------------------------------------

    #[test]
    fn gelu_reference_points() {
        let x = Tensor2D::from_rows(&[vec![0.0f32, 2.0, -10.0]]).unwrap();
        let y = gelu(&x);
        assert_eq!(y.get(0, 0), 0.0);
        assert!((y.get(0, 1) - 1.9545).abs() < 1e-4);
        assert!(y.get(0, 2).abs() < 1e-6);
    }

    // -- softmax_time -----------------------------------------------------------

    #[test]
    fn softmax_uniform_row() {
        let x = Tensor2D::from_rows(&[vec![0.0f32, 0.0, 0.0]]).unwrap();
        let y = softmax_time(&x);
        for t in 0..3 {
            assert!((y.get(0, t) - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_large_inputs_stable() {
        // f64 carrier so the +ln2 shift is exactly representable
        let x =
            Tensor2D::<f64>::from_rows(&[vec![1000.0, 1000.0 + std::f64::consts::LN_2]]).unwrap();
        let y = softmax_time(&x);
        assert!((y.get(0, 0) - 1.0 / 3.0).abs() < 1e-6);
        assert!((y.get(0, 1) - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_rows_normalized_and_shift_invariant() {
        let mut rng = StdRng::seed_from_u64(10);
        let x32 = random_tensor(&mut rng, 5, 17);
        let y32 = softmax_time(&x32);
        for c in 0..5 {
            let sum: f64 = y32.row(c).iter().map(|&v| v as f64).sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(y32.row(c).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        // per-row constant shifts leave the result unchanged (exact in f64)
        let x = Tensor2D::<f64>::new(5, 17, x32.data().iter().map(|&v| v as f64).collect())
            .unwrap();
        let y = softmax_time(&x);
        let mut shifted = x.clone();
        for c in 0..5 {
            let delta = rng.gen_range(-3.0..3.0);
            for v in shifted.row_mut(c) {
                *v += delta;
            }
        }
        let y2 = softmax_time(&shifted);
        for (a, b) in y2.data().iter().zip(y.data()) {
            assert!((a - b).abs() / b.abs().max(1.0) < 1e-6);
        }
    }

    // -- shared utilities ---------------------------------------------------

    #[test]
    fn concat_channels_orders_parts() {
        let a = Tensor2D::from_rows(&[vec![1.0f32, 2.0]]).unwrap();
        let b = Tensor2D::from_rows(&[vec![3.0f32, 4.0], vec![5.0, 6.0]]).unwrap();
        let c = Tensor2D::concat_channels(&[&a, &b]).unwrap();
        assert_eq!(c.channels(), 3);
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn frames_preserved_in_all_ops() {
        let mut rng = StdRng::seed_from_u64(11);
        for &t in &[1usize, 7, 31] {
            let x = random_tensor(&mut rng, 4, t);
            assert_eq!(
                pconv1d(&x, &random_matrix(&mut rng, 6, 4), &random_vec(&mut rng, 6))
                    .unwrap()
                    .frames(),
                t
            );
            for &k in &[1usize, 3, 4, 7, 65] {
                let kern = random_matrix(&mut rng, 4, k);
                assert_eq!(dconv1d(&x, &kern, &random_vec(&mut rng, 4)).unwrap().frames(), t);
            }
        }
    }

    #[test]
    fn f64_path_agrees_with_f32() {
        let mut rng = StdRng::seed_from_u64(12);
        let x32 = random_tensor(&mut rng, 3, 5);
        let w32 = random_matrix(&mut rng, 2, 3);
        let b32 = random_vec(&mut rng, 2);
        let x64 = Tensor2D::<f64>::new(
            3,
            5,
            x32.data().iter().map(|&v| v as f64).collect(),
        )
        .unwrap();
        let w64 = Matrix::<f64>::new(2, 3, w32.data().iter().map(|&v| v as f64).collect()).unwrap();
        let b64: Vec<f64> = b32.iter().map(|&v| v as f64).collect();
        let y32 = pconv1d(&x32, &w32, &b32).unwrap();
        let y64 = pconv1d(&x64, &w64, &b64).unwrap();
        for (a, b) in y32.data().iter().zip(y64.data()) {
            assert!(((*a as f64) - b).abs() < 1e-6);
        }
    }
}
