//! TS-ConvNeXt backbone blocks: global response normalization, the
//! multi-scale convolution module, the frame-wise feed-forward network,
//! and the two-step residual block built from them.
//!
//! A block computes
//!
//! ```text
//! x̃ = x + Temporal(LN₁(x))        // MSC, or a single DConv1D (light)
//! y  = x̃ + FFN(LN₂(x̃))
//! ```
//!
//! with pre-norm placement and an independent LN parameter set per
//! sub-module.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{dconv1d, gelu, layer_norm, pconv1d, Matrix, Tensor2D};

/// Layer-norm epsilon used everywhere in the network.
pub const LN_EPS: f64 = 1e-6;

/// Pointwise conv layer: cross-channel linear map per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PConv<F: Real = f32> {
    pub weight: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> PConv<F> {
    pub fn forward(&self, x: &Tensor2D<F>) -> Result<Tensor2D<F>> {
        pconv1d(x, &self.weight, &self.bias)
    }

    pub fn out_ch(&self) -> usize {
        self.weight.rows()
    }

    pub fn in_ch(&self) -> usize {
        self.weight.cols()
    }
}

/// Depthwise conv layer: one kernel per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DConv<F: Real = f32> {
    /// `channels × k` kernel taps.
    pub kernels: Matrix<F>,
    pub bias: Vec<F>,
}

impl<F: Real> DConv<F> {
    pub fn forward(&self, x: &Tensor2D<F>) -> Result<Tensor2D<F>> {
        dconv1d(x, &self.kernels, &self.bias)
    }
}

/// Per-channel affine layer-norm parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams<F: Real = f32> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
}

impl<F: Real> LayerNormParams<F> {
    /// gamma = 1, beta = 0.
    pub fn identity(c: usize) -> Self {
        Self {
            gamma: vec![F::one(); c],
            beta: vec![F::zero(); c],
        }
    }

    pub fn forward(&self, x: &Tensor2D<F>) -> Result<Tensor2D<F>> {
        layer_norm(x, &self.gamma, &self.beta, LN_EPS)
    }
}

/// Multi-scale convolution module: `s` parallel depthwise branches on
/// reduced-width projections, concatenated and re-projected.
#[derive(Debug, Clone, PartialEq)]
pub struct MscParams<F: Real = f32> {
    /// `C → C'` projection per branch.
    pub in_proj: Vec<PConv<F>>,
    /// Depthwise conv per branch, kernel size from the kernel set.
    pub dconv: Vec<DConv<F>>,
    /// `s·C' → C` output projection.
    pub out_proj: PConv<F>,
}

/// Temporal sub-module of a block.
#[derive(Debug, Clone, PartialEq)]
pub enum Temporal<F: Real = f32> {
    Msc(MscParams<F>),
    /// Light variant: a single depthwise conv over all `C` channels,
    /// no projections, no activation.
    SingleDConv(DConv<F>),
}

/// Feed-forward network parameters: expansion factor 4 with GRN after
/// the activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams<F: Real = f32> {
    pub up: PConv<F>,
    pub grn_gamma: Vec<F>,
    pub grn_beta: Vec<F>,
    pub down: PConv<F>,
}

/// One backbone block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<F: Real = f32> {
    pub norm1: LayerNormParams<F>,
    pub temporal: Temporal<F>,
    pub norm2: LayerNormParams<F>,
    pub ffn: FfnParams<F>,
}

/// Global response normalization.
///
/// Aggregates per-channel L2 energy over time,
/// `ḡ[c] = sqrt(Σ_t G[c,t]²)`, normalizes by the mean channel energy
/// (`N(ḡ) = Ch·ḡ / Σ_c ḡ`), and recalibrates with a skip connection:
/// `y = G + γ⊙N(ḡ)⊙G + β`. An all-zero input bypasses (`N := 0`).
pub fn grn<F: Real>(g: &Tensor2D<F>, gamma: &[F], beta: &[F]) -> Result<Tensor2D<F>> {
    let ch = g.channels();
    if gamma.len() != ch {
        return Err(Error::Shape {
            axis: "gamma length",
            expected: ch,
            got: gamma.len(),
        });
    }
    if beta.len() != ch {
        return Err(Error::Shape {
            axis: "beta length",
            expected: ch,
            got: beta.len(),
        });
    }
    let mut norms = vec![0f64; ch];
    let mut total = 0f64;
    for (c, n) in norms.iter_mut().enumerate() {
        let mut acc = 0f64;
        for &v in g.row(c) {
            let x = v.into_f64();
            acc += x * x;
        }
        *n = acc.sqrt();
        total += *n;
    }
    let mut out = Tensor2D::zeros(ch, g.frames());
    for c in 0..ch {
        let scaled = if total == 0.0 {
            F::zero()
        } else {
            F::from_f64_lossy(ch as f64 * norms[c] / total)
        };
        let gain = gamma[c] * scaled;
        let row = g.row(c);
        let out_row = out.row_mut(c);
        for (y, &v) in out_row.iter_mut().zip(row) {
            *y = v + gain * v + beta[c];
        }
    }
    Ok(out)
}

/// Multi-scale convolution: branch outputs concatenated in kernel-set
/// order, GELU, then the output projection.
pub fn msc<F: Real>(x: &Tensor2D<F>, p: &MscParams<F>) -> Result<Tensor2D<F>> {
    if p.in_proj.len() != p.dconv.len() || p.in_proj.is_empty() {
        return Err(Error::Shape {
            axis: "msc branches",
            expected: p.in_proj.len().max(1),
            got: p.dconv.len(),
        });
    }
    let mut branches = Vec::with_capacity(p.in_proj.len());
    for (proj, dc) in p.in_proj.iter().zip(&p.dconv) {
        branches.push(dc.forward(&proj.forward(x)?)?);
    }
    let refs: Vec<&Tensor2D<F>> = branches.iter().collect();
    let cat = Tensor2D::concat_channels(&refs)?;
    p.out_proj.forward(&gelu(&cat))
}

/// Feed-forward network: up-projection, GELU, GRN, down-projection.
pub fn ffn<F: Real>(x: &Tensor2D<F>, p: &FfnParams<F>) -> Result<Tensor2D<F>> {
    let hidden = gelu(&p.up.forward(x)?);
    let calibrated = grn(&hidden, &p.grn_gamma, &p.grn_beta)?;
    p.down.forward(&calibrated)
}

fn temporal_forward<F: Real>(x: &Tensor2D<F>, t: &Temporal<F>) -> Result<Tensor2D<F>> {
    match t {
        Temporal::Msc(p) => msc(x, p),
        Temporal::SingleDConv(d) => d.forward(x),
    }
}

/// Full two-step block with residual connections around both sub-modules.
pub fn block_forward<F: Real>(x: &Tensor2D<F>, p: &BlockParams<F>) -> Result<Tensor2D<F>> {
    let mid = x.add(&temporal_forward(&p.norm1.forward(x)?, &p.temporal)?)?;
    let out = mid.add(&ffn(&p.norm2.forward(&mid)?, &p.ffn)?)?;
    Ok(out)
}
