//! Architecture hyperparameters and the on-disk config file format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backbone block flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockVariant {
    /// Two-step block with the multi-scale convolution module.
    #[serde(rename = "ts-convnext")]
    TsConvNext,
    /// Light block: a single depthwise convolution in place of the MSC.
    #[serde(rename = "ts-convnext-l")]
    TsConvNextLight,
}

/// All architecture hyperparameters.
///
/// `c_mfa` is pinned to `3·c` (the aggregation keeps its input width) and
/// the embedding is 192-dimensional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Latent channel width of every stage.
    pub c: usize,
    /// Blocks per stage (three stages always).
    pub b: usize,
    pub variant: BlockVariant,
    /// MSC scale factor: number of parallel depthwise branches.
    pub s: usize,
    /// Depthwise kernel sizes, one per branch (single entry for the
    /// light variant).
    pub kernel_set: Vec<usize>,
    /// Input mel bins.
    pub c_mel: usize,
    /// Aggregation output width.
    pub c_mfa: usize,
    /// Embedding size.
    pub d_embed: usize,
    /// Attention bottleneck width in the pooling layer.
    pub d_att: usize,
}

pub const DEFAULT_C_MEL: usize = 80;
pub const DEFAULT_D_EMBED: usize = 192;
pub const DEFAULT_D_ATT: usize = 128;
/// Default depthwise kernel for the light variant.
pub const DEFAULT_LIGHT_KERNEL: usize = 65;
/// Default kernel set for the full variant (s = 2).
pub const DEFAULT_KERNEL_SET: [usize; 2] = [7, 65];

impl ModelConfig {
    /// Full-variant config with the default kernel set `[7, 65]`, `s = 2`.
    pub fn next_tdnn(c: usize, b: usize) -> Self {
        Self {
            c,
            b,
            variant: BlockVariant::TsConvNext,
            s: 2,
            kernel_set: DEFAULT_KERNEL_SET.to_vec(),
            c_mel: DEFAULT_C_MEL,
            c_mfa: 3 * c,
            d_embed: DEFAULT_D_EMBED,
            d_att: DEFAULT_D_ATT,
        }
    }

    /// Light-variant config with a single K = 65 depthwise kernel.
    pub fn next_tdnn_light(c: usize, b: usize) -> Self {
        Self {
            c,
            b,
            variant: BlockVariant::TsConvNextLight,
            s: 1,
            kernel_set: vec![DEFAULT_LIGHT_KERNEL],
            c_mel: DEFAULT_C_MEL,
            c_mfa: 3 * c,
            d_embed: DEFAULT_D_EMBED,
            d_att: DEFAULT_D_ATT,
        }
    }

    /// Reduced branch width `C' = C/s`.
    pub fn c_prime(&self) -> usize {
        self.c / self.s
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 || self.b == 0 || self.s == 0 || self.c_mel == 0 {
            return Err(Error::Config(
                "c, b, s and c_mel must all be positive".into(),
            ));
        }
        if !self.c.is_multiple_of(self.s) {
            return Err(Error::Config(format!(
                "channel width {} not divisible by scale factor {}",
                self.c, self.s
            )));
        }
        if self.kernel_set.len() != self.s {
            return Err(Error::Config(format!(
                "kernel_set has {} entries, expected s = {}",
                self.kernel_set.len(),
                self.s
            )));
        }
        if self.kernel_set.contains(&0) {
            return Err(Error::Config("kernel sizes must be positive".into()));
        }
        if self.variant == BlockVariant::TsConvNextLight && self.s != 1 {
            return Err(Error::Config(format!(
                "light variant uses a single depthwise kernel, got s = {}",
                self.s
            )));
        }
        if self.c_mfa != 3 * self.c {
            return Err(Error::Config(format!(
                "c_mfa must equal 3·c = {}, got {}",
                3 * self.c,
                self.c_mfa
            )));
        }
        if self.d_embed != DEFAULT_D_EMBED {
            return Err(Error::Config(format!(
                "embedding size is fixed at {DEFAULT_D_EMBED}, got {}",
                self.d_embed
            )));
        }
        if self.d_att == 0 {
            return Err(Error::Config("d_att must be positive".into()));
        }
        Ok(())
    }

    /// Parse the flat key-value (TOML) config file format.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Format {
            what: "config file",
            detail: e.to_string(),
        })?;
        let cfg = Self {
            c: raw.c,
            b: raw.b,
            variant: raw.variant,
            s: raw.s,
            kernel_set: raw.kernel_set,
            c_mel: raw.c_mel.unwrap_or(DEFAULT_C_MEL),
            c_mfa: raw.c_mfa.unwrap_or(3 * raw.c),
            d_embed: raw.d_embed.unwrap_or(DEFAULT_D_EMBED),
            d_att: raw.d_att.unwrap_or(DEFAULT_D_ATT),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Render as the same flat key-value format `from_toml_str` accepts.
    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig {
            variant: self.variant,
            c: self.c,
            b: self.b,
            s: self.s,
            kernel_set: self.kernel_set.clone(),
            c_mel: Some(self.c_mel),
            c_mfa: Some(self.c_mfa),
            d_embed: Some(self.d_embed),
            d_att: Some(self.d_att),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

/// File schema: required architecture knobs plus optional defaults.
#[derive(Serialize, Deserialize)]
struct RawConfig {
    variant: BlockVariant,
    c: usize,
    b: usize,
    s: usize,
    kernel_set: Vec<usize>,
    c_mel: Option<usize>,
    c_mfa: Option<usize>,
    d_embed: Option<usize>,
    d_att: Option<usize>,
}
