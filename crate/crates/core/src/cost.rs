//! Parameter and multiply-accumulate accounting.
//!
//! Parameter totals are derived from the canonical parameter scheme, so
//! `count_params(cfg)` always equals the element count of a serialized
//! checkpoint for the same config. MACs count the multiply-accumulates
//! of convolution and affine layers only (one MAC = one multiply + one
//! add); biases, normalization, activations, softmax, and the GRN's
//! elementwise work are excluded.

use crate::config::{BlockVariant, ModelConfig};
use crate::model::{param_specs, STEM_KERNEL};

/// One line of a cost breakdown table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostRow {
    pub name: String,
    pub count: u64,
}

/// Per-layer breakdown plus the total.
#[derive(Debug, Clone)]
pub struct CostReport {
    pub rows: Vec<CostRow>,
    pub total: u64,
}

/// Trainable-parameter breakdown grouped by layer class.
pub fn param_report(cfg: &ModelConfig) -> CostReport {
    let mut rows: Vec<CostRow> = Vec::new();
    for spec in param_specs(cfg) {
        let n = spec.elem_count() as u64;
        match rows.iter_mut().find(|r| r.name == spec.group) {
            Some(row) => row.count += n,
            None => rows.push(CostRow {
                name: spec.group.to_string(),
                count: n,
            }),
        }
    }
    let total = rows.iter().map(|r| r.count).sum();
    CostReport { rows, total }
}

/// Exact trainable-parameter total.
pub fn count_params(cfg: &ModelConfig) -> u64 {
    param_specs(cfg)
        .iter()
        .map(|s| s.elem_count() as u64)
        .sum()
}

/// Multiply-accumulate breakdown at sequence length `frames`.
pub fn mac_report(cfg: &ModelConfig, frames: usize) -> CostReport {
    let t = frames as u64;
    let c = cfg.c as u64;
    let cp = cfg.c_prime() as u64;
    let c_mfa = cfg.c_mfa as u64;
    let d_att = cfg.d_att as u64;
    let d_embed = cfg.d_embed as u64;
    let blocks = 3 * cfg.b as u64;
    let kernel_sum: u64 = cfg.kernel_set.iter().map(|&k| k as u64).sum();

    let mut rows = Vec::new();
    rows.push(CostRow {
        name: "stem".into(),
        count: c * cfg.c_mel as u64 * STEM_KERNEL as u64 * t,
    });
    match cfg.variant {
        BlockVariant::TsConvNext => {
            rows.push(CostRow {
                name: "blocks.msc.in_proj".into(),
                count: blocks * (cfg.s as u64) * cp * c * t,
            });
            rows.push(CostRow {
                name: "blocks.msc.dconv".into(),
                count: blocks * cp * kernel_sum * t,
            });
            rows.push(CostRow {
                name: "blocks.msc.out_proj".into(),
                count: blocks * c * (cfg.s as u64) * cp * t,
            });
        }
        BlockVariant::TsConvNextLight => {
            rows.push(CostRow {
                name: "blocks.dconv".into(),
                count: blocks * c * kernel_sum * t,
            });
        }
    }
    rows.push(CostRow {
        name: "blocks.ffn.up".into(),
        count: blocks * 4 * c * c * t,
    });
    rows.push(CostRow {
        name: "blocks.ffn.down".into(),
        count: blocks * c * 4 * c * t,
    });
    rows.push(CostRow {
        name: "mfa.proj".into(),
        count: c_mfa * 3 * c * t,
    });
    rows.push(CostRow {
        name: "asp.att1".into(),
        count: d_att * c_mfa * t,
    });
    rows.push(CostRow {
        name: "asp.att2".into(),
        count: c_mfa * d_att * t,
    });
    // the head sees one pooled statistics vector per utterance
    rows.push(CostRow {
        name: "head".into(),
        count: d_embed * 2 * c_mfa,
    });
    let total = rows.iter().map(|r| r.count).sum();
    CostReport { rows, total }
}

/// Total multiply-accumulates at sequence length `frames`.
pub fn count_macs(cfg: &ModelConfig, frames: usize) -> u64 {
    mac_report(cfg, frames).total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// |got/published − 1| as a fraction.
    fn rel_to(published: f64, got: u64) -> f64 {
        (got as f64 / published - 1.0).abs()
    }

    const T_3S: usize = 298;

    #[test]
    fn param_counts_match_published_table() {
        // (config, published params)
        let cases: [(ModelConfig, f64); 8] = [
            (ModelConfig::next_tdnn_light(192, 1), 1.6e6),
            (ModelConfig::next_tdnn_light(128, 3), 1.6e6),
            (ModelConfig::next_tdnn_light(384, 1), 5.9e6),
            (ModelConfig::next_tdnn_light(256, 3), 6.0e6),
            (ModelConfig::next_tdnn(192, 1), 1.8e6),
            (ModelConfig::next_tdnn(128, 3), 1.9e6),
            (ModelConfig::next_tdnn(384, 1), 6.7e6),
            (ModelConfig::next_tdnn(256, 3), 7.1e6),
        ];
        for (cfg, published) in cases {
            let got = count_params(&cfg);
            assert!(
                rel_to(published, got) < 0.10,
                "params for C={}, B={}, {:?}: got {got}, published {published}",
                cfg.c,
                cfg.b,
                cfg.variant
            );
        }
    }

    #[test]
    fn mac_counts_match_published_table() {
        let cases: [(ModelConfig, f64); 8] = [
            (ModelConfig::next_tdnn_light(192, 1), 0.417e9),
            (ModelConfig::next_tdnn_light(128, 3), 0.441e9),
            (ModelConfig::next_tdnn_light(384, 1), 1.609e9),
            (ModelConfig::next_tdnn_light(256, 3), 1.695e9),
            (ModelConfig::next_tdnn(192, 1), 0.478e9),
            (ModelConfig::next_tdnn(128, 3), 0.519e9),
            (ModelConfig::next_tdnn(384, 1), 1.862e9),
            (ModelConfig::next_tdnn(256, 3), 2.027e9),
        ];
        for (cfg, published) in cases {
            let got = count_macs(&cfg, T_3S);
            assert!(
                rel_to(published, got) < 0.15,
                "MACs for C={}, B={}, {:?}: got {got}, published {published}",
                cfg.c,
                cfg.b,
                cfg.variant
            );
        }
    }

    #[test]
    fn doubling_width_scales_rows_analytically() {
        let base = ModelConfig::next_tdnn(128, 3);
        let double = ModelConfig::next_tdnn(256, 3);
        let a = mac_report(&base, T_3S);
        let b = mac_report(&double, T_3S);
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.name, rb.name);
            let factor = rb.count as f64 / ra.count as f64;
            let expected = match ra.name.as_str() {
                // pointwise layers scale with C², depthwise and the
                // fixed-input stem with C
                "blocks.msc.in_proj" | "blocks.msc.out_proj" | "blocks.ffn.up"
                | "blocks.ffn.down" | "mfa.proj" => 4.0,
                _ => 2.0,
            };
            assert_eq!(factor, expected, "row {}", ra.name);
        }
    }

    #[test]
    fn light_variant_has_no_projection_rows() {
        let cfg = ModelConfig::next_tdnn_light(192, 1);
        let report = mac_report(&cfg, T_3S);
        assert!(report.rows.iter().any(|r| r.name == "blocks.dconv"));
        assert!(!report.rows.iter().any(|r| r.name.contains("in_proj")));
        let params = param_report(&cfg);
        assert!(!params.rows.iter().any(|r| r.name.contains("msc")));
    }

    #[test]
    fn report_totals_are_row_sums() {
        let cfg = ModelConfig::next_tdnn(192, 1);
        let p = param_report(&cfg);
        assert_eq!(p.total, p.rows.iter().map(|r| r.count).sum::<u64>());
        assert_eq!(p.total, count_params(&cfg));
        let m = mac_report(&cfg, 100);
        assert_eq!(m.total, m.rows.iter().map(|r| r.count).sum::<u64>());
    }
}
