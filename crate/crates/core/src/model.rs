//! Full network assembly: stem → 3 stages × B blocks → MFA → ASP →
//! linear head, plus the canonical parameter naming scheme used by the
//! checkpoint format, the random initializer, and the cost accounting.

use std::collections::HashMap;

use crate::blocks::{
    block_forward, BlockParams, DConv, FfnParams, LayerNormParams, MscParams, PConv, Temporal,
};
use crate::config::{BlockVariant, ModelConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{conv1d_general, softmax_time, tanh, ConvKernel, Matrix, Tensor2D};

/// Utterance-level speaker embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<F: Real = f32> {
    values: Vec<F>,
}

impl<F: Real> Embedding<F> {
    pub const DIM: usize = 192;

    pub fn new(values: Vec<F>) -> Result<Self> {
        if values.len() != Self::DIM {
            return Err(Error::Shape {
                axis: "embedding length",
                expected: Self::DIM,
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("embedding"));
        }
        Ok(Self { values })
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<F> {
        self.values
    }
}

/// Stem: standard 1D convolution, kernel 4, mel bins → latent channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StemConv<F: Real = f32> {
    pub weight: ConvKernel<F>,
    pub bias: Vec<F>,
}

/// A loaded, immutable NeXt-TDNN network.
#[derive(Debug, Clone)]
pub struct Model<F: Real = f32> {
    config: ModelConfig,
    stem: StemConv<F>,
    stages: Vec<Vec<BlockParams<F>>>,
    mfa_proj: PConv<F>,
    mfa_norm: LayerNormParams<F>,
    asp_att1: PConv<F>,
    asp_att2: PConv<F>,
    head_weight: Matrix<F>,
    head_bias: Vec<F>,
}

/// Variance threshold below which the pooled σ is treated as exactly 0;
/// negative rounding residue in `Σα⊙h⊙h − μ⊙μ` snaps to zero instead of
/// producing NaN.
pub const ASP_VAR_FLOOR: f64 = 1e-10;

impl<F: Real> Model<F> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Stem plus the three block stages; returns every stage output for
    /// the aggregation layer.
    pub fn forward_backbone(
        &self,
        features: &Tensor2D<F>,
    ) -> Result<(Tensor2D<F>, Tensor2D<F>, Tensor2D<F>)> {
        if features.channels() != self.config.c_mel {
            return Err(Error::Shape {
                axis: "mel channels",
                expected: self.config.c_mel,
                got: features.channels(),
            });
        }
        let f0 = conv1d_general(features, &self.stem.weight, &self.stem.bias)?;
        let f1 = run_stage(&f0, &self.stages[0])?;
        let f2 = run_stage(&f1, &self.stages[1])?;
        let f3 = run_stage(&f2, &self.stages[2])?;
        Ok((f1, f2, f3))
    }

    /// Multi-layer feature aggregation: concat the stage outputs in stage
    /// order, project, layer-normalize.
    pub fn mfa(
        &self,
        f1: &Tensor2D<F>,
        f2: &Tensor2D<F>,
        f3: &Tensor2D<F>,
    ) -> Result<Tensor2D<F>> {
        let cat = Tensor2D::concat_channels(&[f1, f2, f3])?;
        self.mfa_norm.forward(&self.mfa_proj.forward(&cat)?)
    }

    /// Attentive statistics pooling: channel-dependent attention over
    /// time, then the weighted mean and standard deviation, concatenated.
    pub fn asp_pool(&self, h: &Tensor2D<F>) -> Result<Vec<F>> {
        let logits = self.asp_att2.forward(&tanh(&self.asp_att1.forward(h)?))?;
        let alpha = softmax_time(&logits);
        let c_len = h.channels();
        let mut stats = vec![F::zero(); 2 * c_len];
        for c in 0..c_len {
            let h_row = h.row(c);
            let a_row = alpha.row(c);
            let mut mean = 0f64;
            let mut power = 0f64;
            for (&a, &v) in a_row.iter().zip(h_row) {
                let af = a.into_f64();
                let vf = v.into_f64();
                mean += af * vf;
                power += af * vf * vf;
            }
            let mut var = power - mean * mean;
            if var < ASP_VAR_FLOOR {
                var = 0.0;
            }
            stats[c] = F::from_f64_lossy(mean);
            stats[c_len + c] = F::from_f64_lossy(var.sqrt());
        }
        Ok(stats)
    }

    /// Full pipeline: features → backbone → MFA → ASP → linear head.
    pub fn embed(&self, features: &Tensor2D<F>) -> Result<Embedding<F>> {
        let (f1, f2, f3) = self.forward_backbone(features)?;
        let h = self.mfa(&f1, &f2, &f3)?;
        let stats = self.asp_pool(&h)?;
        let mut out = Vec::with_capacity(self.config.d_embed);
        for o in 0..self.config.d_embed {
            let mut acc = self.head_bias[o].into_f64();
            for (i, &v) in stats.iter().enumerate() {
                acc += self.head_weight.get(o, i).into_f64() * v.into_f64();
            }
            out.push(F::from_f64_lossy(acc));
        }
        Embedding::new(out)
    }

    /// Tensors in canonical order, aligned with [`param_specs`].
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let cfg = &self.config;
        let mut out: Vec<(String, Vec<usize>, &[F])> = Vec::new();
        out.push((
            "stem.weight".into(),
            vec![cfg.c, cfg.c_mel, STEM_KERNEL],
            self.stem.weight.data(),
        ));
        out.push(("stem.bias".into(), vec![cfg.c], &self.stem.bias));
        for (n, stage) in self.stages.iter().enumerate() {
            for (b, block) in stage.iter().enumerate() {
                let p = |leaf: &str| format!("stages.{n}.blocks.{b}.{leaf}");
                out.push((p("norm1.gamma"), vec![cfg.c], &block.norm1.gamma));
                out.push((p("norm1.beta"), vec![cfg.c], &block.norm1.beta));
                match &block.temporal {
                    Temporal::Msc(m) => {
                        let cp = cfg.c_prime();
                        for (i, proj) in m.in_proj.iter().enumerate() {
                            out.push((
                                p(&format!("msc.in_proj.{i}.weight")),
                                vec![cp, cfg.c],
                                proj.weight.data(),
                            ));
                            out.push((p(&format!("msc.in_proj.{i}.bias")), vec![cp], &proj.bias));
                        }
                        for (i, dc) in m.dconv.iter().enumerate() {
                            out.push((
                                p(&format!("msc.dconv.{i}.weight")),
                                vec![cp, cfg.kernel_set[i]],
                                dc.kernels.data(),
                            ));
                            out.push((p(&format!("msc.dconv.{i}.bias")), vec![cp], &dc.bias));
                        }
                        out.push((
                            p("msc.out_proj.weight"),
                            vec![cfg.c, cfg.s * cp],
                            m.out_proj.weight.data(),
                        ));
                        out.push((p("msc.out_proj.bias"), vec![cfg.c], &m.out_proj.bias));
                    }
                    Temporal::SingleDConv(d) => {
                        out.push((
                            p("dconv.weight"),
                            vec![cfg.c, cfg.kernel_set[0]],
                            d.kernels.data(),
                        ));
                        out.push((p("dconv.bias"), vec![cfg.c], &d.bias));
                    }
                }
                out.push((p("norm2.gamma"), vec![cfg.c], &block.norm2.gamma));
                out.push((p("norm2.beta"), vec![cfg.c], &block.norm2.beta));
                out.push((
                    p("ffn.up.weight"),
                    vec![4 * cfg.c, cfg.c],
                    block.ffn.up.weight.data(),
                ));
                out.push((p("ffn.up.bias"), vec![4 * cfg.c], &block.ffn.up.bias));
                out.push((p("ffn.grn.gamma"), vec![4 * cfg.c], &block.ffn.grn_gamma));
                out.push((p("ffn.grn.beta"), vec![4 * cfg.c], &block.ffn.grn_beta));
                out.push((
                    p("ffn.down.weight"),
                    vec![cfg.c, 4 * cfg.c],
                    block.ffn.down.weight.data(),
                ));
                out.push((p("ffn.down.bias"), vec![cfg.c], &block.ffn.down.bias));
            }
        }
        out.push((
            "mfa.proj.weight".into(),
            vec![cfg.c_mfa, 3 * cfg.c],
            self.mfa_proj.weight.data(),
        ));
        out.push(("mfa.proj.bias".into(), vec![cfg.c_mfa], &self.mfa_proj.bias));
        out.push(("mfa.norm.gamma".into(), vec![cfg.c_mfa], &self.mfa_norm.gamma));
        out.push(("mfa.norm.beta".into(), vec![cfg.c_mfa], &self.mfa_norm.beta));
        out.push((
            "asp.att1.weight".into(),
            vec![cfg.d_att, cfg.c_mfa],
            self.asp_att1.weight.data(),
        ));
        out.push(("asp.att1.bias".into(), vec![cfg.d_att], &self.asp_att1.bias));
        out.push((
            "asp.att2.weight".into(),
            vec![cfg.c_mfa, cfg.d_att],
            self.asp_att2.weight.data(),
        ));
        out.push(("asp.att2.bias".into(), vec![cfg.c_mfa], &self.asp_att2.bias));
        out.push((
            "head.weight".into(),
            vec![cfg.d_embed, 2 * cfg.c_mfa],
            self.head_weight.data(),
        ));
        out.push(("head.bias".into(), vec![cfg.d_embed], &self.head_bias));
        out
    }

    /// Assemble a model from `name → (shape, data)`, validating the name
    /// set and every shape against the config's canonical scheme.
    pub fn from_tensor_map(
        config: ModelConfig,
        mut tensors: HashMap<String, (Vec<usize>, Vec<F>)>,
    ) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if tensors.len() != specs.len() {
            return Err(Error::CkptSchema(format!(
                "expected {} tensors for this config, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<F>> {
            let (got_shape, data) = tensors
                .remove(name)
                .ok_or_else(|| Error::CkptSchema(format!("missing tensor '{name}'")))?;
            if got_shape != shape {
                return Err(Error::CkptSchema(format!(
                    "tensor '{name}': expected shape {shape:?}, found {got_shape:?}"
                )));
            }
            Ok(data)
        };

        let cfg = &config;
        let stem = StemConv {
            weight: ConvKernel::new(
                cfg.c,
                cfg.c_mel,
                STEM_KERNEL,
                take("stem.weight", &[cfg.c, cfg.c_mel, STEM_KERNEL])?,
            )?,
            bias: take("stem.bias", &[cfg.c])?,
        };

        let mut stages = Vec::with_capacity(3);
        for n in 0..3 {
            let mut blocks = Vec::with_capacity(cfg.b);
            for b in 0..cfg.b {
                let p = |leaf: &str| format!("stages.{n}.blocks.{b}.{leaf}");
                let norm1 = LayerNormParams {
                    gamma: take(&p("norm1.gamma"), &[cfg.c])?,
                    beta: take(&p("norm1.beta"), &[cfg.c])?,
                };
                let temporal = match cfg.variant {
                    BlockVariant::TsConvNext => {
                        let cp = cfg.c_prime();
                        let mut in_proj = Vec::with_capacity(cfg.s);
                        let mut dconv = Vec::with_capacity(cfg.s);
                        for i in 0..cfg.s {
                            in_proj.push(PConv {
                                weight: Matrix::new(
                                    cp,
                                    cfg.c,
                                    take(&p(&format!("msc.in_proj.{i}.weight")), &[cp, cfg.c])?,
                                )?,
                                bias: take(&p(&format!("msc.in_proj.{i}.bias")), &[cp])?,
                            });
                        }
                        for i in 0..cfg.s {
                            let k = cfg.kernel_set[i];
                            dconv.push(DConv {
                                kernels: Matrix::new(
                                    cp,
                                    k,
                                    take(&p(&format!("msc.dconv.{i}.weight")), &[cp, k])?,
                                )?,
                                bias: take(&p(&format!("msc.dconv.{i}.bias")), &[cp])?,
                            });
                        }
                        Temporal::Msc(MscParams {
                            in_proj,
                            dconv,
                            out_proj: PConv {
                                weight: Matrix::new(
                                    cfg.c,
                                    cfg.s * cp,
                                    take(&p("msc.out_proj.weight"), &[cfg.c, cfg.s * cp])?,
                                )?,
                                bias: take(&p("msc.out_proj.bias"), &[cfg.c])?,
                            },
                        })
                    }
                    BlockVariant::TsConvNextLight => {
                        let k = cfg.kernel_set[0];
                        Temporal::SingleDConv(DConv {
                            kernels: Matrix::new(
                                cfg.c,
                                k,
                                take(&p("dconv.weight"), &[cfg.c, k])?,
                            )?,
                            bias: take(&p("dconv.bias"), &[cfg.c])?,
                        })
                    }
                };
                let norm2 = LayerNormParams {
                    gamma: take(&p("norm2.gamma"), &[cfg.c])?,
                    beta: take(&p("norm2.beta"), &[cfg.c])?,
                };
                let ffn = FfnParams {
                    up: PConv {
                        weight: Matrix::new(
                            4 * cfg.c,
                            cfg.c,
                            take(&p("ffn.up.weight"), &[4 * cfg.c, cfg.c])?,
                        )?,
                        bias: take(&p("ffn.up.bias"), &[4 * cfg.c])?,
                    },
                    grn_gamma: take(&p("ffn.grn.gamma"), &[4 * cfg.c])?,
                    grn_beta: take(&p("ffn.grn.beta"), &[4 * cfg.c])?,
                    down: PConv {
                        weight: Matrix::new(
                            cfg.c,
                            4 * cfg.c,
                            take(&p("ffn.down.weight"), &[cfg.c, 4 * cfg.c])?,
                        )?,
                        bias: take(&p("ffn.down.bias"), &[cfg.c])?,
                    },
                };
                blocks.push(BlockParams {
                    norm1,
                    temporal,
                    norm2,
                    ffn,
                });
            }
            stages.push(blocks);
        }

        let mfa_proj = PConv {
            weight: Matrix::new(
                cfg.c_mfa,
                3 * cfg.c,
                take("mfa.proj.weight", &[cfg.c_mfa, 3 * cfg.c])?,
            )?,
            bias: take("mfa.proj.bias", &[cfg.c_mfa])?,
        };
        let mfa_norm = LayerNormParams {
            gamma: take("mfa.norm.gamma", &[cfg.c_mfa])?,
            beta: take("mfa.norm.beta", &[cfg.c_mfa])?,
        };
        let asp_att1 = PConv {
            weight: Matrix::new(
                cfg.d_att,
                cfg.c_mfa,
                take("asp.att1.weight", &[cfg.d_att, cfg.c_mfa])?,
            )?,
            bias: take("asp.att1.bias", &[cfg.d_att])?,
        };
        let asp_att2 = PConv {
            weight: Matrix::new(
                cfg.c_mfa,
                cfg.d_att,
                take("asp.att2.weight", &[cfg.c_mfa, cfg.d_att])?,
            )?,
            bias: take("asp.att2.bias", &[cfg.c_mfa])?,
        };
        let head_weight = Matrix::new(
            cfg.d_embed,
            2 * cfg.c_mfa,
            take("head.weight", &[cfg.d_embed, 2 * cfg.c_mfa])?,
        )?;
        let head_bias = take("head.bias", &[cfg.d_embed])?;

        Ok(Self {
            config,
            stem,
            stages,
            mfa_proj,
            mfa_norm,
            asp_att1,
            asp_att2,
            head_weight,
            head_bias,
        })
    }
}

/// Apply a stage's blocks sequentially.
pub fn run_stage<F: Real>(x: &Tensor2D<F>, blocks: &[BlockParams<F>]) -> Result<Tensor2D<F>> {
    let mut cur = x.clone();
    for b in blocks {
        cur = block_forward(&cur, b)?;
    }
    Ok(cur)
}

/// Stem kernel size.
pub const STEM_KERNEL: usize = 4;

/// How a parameter tensor is filled by the seeded initializer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Zero-mean normal, std 0.02.
    Normal,
    Zero,
    One,
}

/// One entry of the canonical parameter scheme.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Cost-table grouping key.
    pub group: &'static str,
    pub init: InitKind,
}

impl ParamSpec {
    pub fn elem_count(&self) -> usize {
        self.shape.iter().product()
    }
}

/// The canonical parameter list for a config: names, shapes, init rules,
/// in serialization order. Single source of truth for the checkpoint
/// schema, the initializer, and the parameter accounting.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let mut push = |name: String, shape: Vec<usize>, group: &'static str, init: InitKind| {
        specs.push(ParamSpec {
            name,
            shape,
            group,
            init,
        });
    };
    use InitKind::{Normal, One, Zero};

    push(
        "stem.weight".into(),
        vec![cfg.c, cfg.c_mel, STEM_KERNEL],
        "stem",
        Normal,
    );
    push("stem.bias".into(), vec![cfg.c], "stem", Normal);
    for n in 0..3 {
        for b in 0..cfg.b {
            let p = |leaf: &str| format!("stages.{n}.blocks.{b}.{leaf}");
            push(p("norm1.gamma"), vec![cfg.c], "blocks.norm", One);
            push(p("norm1.beta"), vec![cfg.c], "blocks.norm", Zero);
            match cfg.variant {
                BlockVariant::TsConvNext => {
                    let cp = cfg.c_prime();
                    for i in 0..cfg.s {
                        push(
                            p(&format!("msc.in_proj.{i}.weight")),
                            vec![cp, cfg.c],
                            "blocks.msc.in_proj",
                            Normal,
                        );
                        push(
                            p(&format!("msc.in_proj.{i}.bias")),
                            vec![cp],
                            "blocks.msc.in_proj",
                            Normal,
                        );
                    }
                    for i in 0..cfg.s {
                        push(
                            p(&format!("msc.dconv.{i}.weight")),
                            vec![cp, cfg.kernel_set[i]],
                            "blocks.msc.dconv",
                            Normal,
                        );
                        push(
                            p(&format!("msc.dconv.{i}.bias")),
                            vec![cp],
                            "blocks.msc.dconv",
                            Normal,
                        );
                    }
                    push(
                        p("msc.out_proj.weight"),
                        vec![cfg.c, cfg.s * cp],
                        "blocks.msc.out_proj",
                        Normal,
                    );
                    push(
                        p("msc.out_proj.bias"),
                        vec![cfg.c],
                        "blocks.msc.out_proj",
                        Normal,
                    );
                }
                BlockVariant::TsConvNextLight => {
                    push(
                        p("dconv.weight"),
                        vec![cfg.c, cfg.kernel_set[0]],
                        "blocks.dconv",
                        Normal,
                    );
                    push(p("dconv.bias"), vec![cfg.c], "blocks.dconv", Normal);
                }
            }
            push(p("norm2.gamma"), vec![cfg.c], "blocks.norm", One);
            push(p("norm2.beta"), vec![cfg.c], "blocks.norm", Zero);
            push(
                p("ffn.up.weight"),
                vec![4 * cfg.c, cfg.c],
                "blocks.ffn.up",
                Normal,
            );
            push(p("ffn.up.bias"), vec![4 * cfg.c], "blocks.ffn.up", Normal);
            push(p("ffn.grn.gamma"), vec![4 * cfg.c], "blocks.ffn.grn", Zero);
            push(p("ffn.grn.beta"), vec![4 * cfg.c], "blocks.ffn.grn", Zero);
            push(
                p("ffn.down.weight"),
                vec![cfg.c, 4 * cfg.c],
                "blocks.ffn.down",
                Normal,
            );
            push(p("ffn.down.bias"), vec![cfg.c], "blocks.ffn.down", Normal);
        }
    }
    push(
        "mfa.proj.weight".into(),
        vec![cfg.c_mfa, 3 * cfg.c],
        "mfa.proj",
        Normal,
    );
    push("mfa.proj.bias".into(), vec![cfg.c_mfa], "mfa.proj", Normal);
    push("mfa.norm.gamma".into(), vec![cfg.c_mfa], "mfa.norm", One);
    push("mfa.norm.beta".into(), vec![cfg.c_mfa], "mfa.norm", Zero);
    push(
        "asp.att1.weight".into(),
        vec![cfg.d_att, cfg.c_mfa],
        "asp.att1",
        Normal,
    );
    push("asp.att1.bias".into(), vec![cfg.d_att], "asp.att1", Normal);
    push(
        "asp.att2.weight".into(),
        vec![cfg.c_mfa, cfg.d_att],
        "asp.att2",
        Normal,
    );
    push("asp.att2.bias".into(), vec![cfg.c_mfa], "asp.att2", Normal);
    push(
        "head.weight".into(),
        vec![cfg.d_embed, 2 * cfg.c_mfa],
        "head",
        Normal,
    );
    push("head.bias".into(), vec![cfg.d_embed], "head", Normal);
    specs
}
