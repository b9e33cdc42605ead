//! Verification-trial scoring and metrics: cosine similarity, adaptive
//! s-norm with a top-K cohort, EER, and minDCF.
//!
//! Threshold conventions, fixed for reproducibility: `P_miss` counts
//! targets with score strictly below the threshold, `P_fa` nontargets at
//! or above it. The sweep visits `-∞`, the midpoints between adjacent
//! sorted unique scores, and `+∞`; EER interpolates linearly between the
//! two sweep points bracketing the sign change of `P_miss − P_fa`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One verification trial: same-speaker (`target`) or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub target: bool,
    pub enroll_id: String,
    pub test_id: String,
}

/// A trial with its raw cosine score and, once s-norm ran, the
/// normalized one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub trial: TrialRecord,
    pub raw_score: f64,
    pub normalized_score: Option<f64>,
}

/// Metrics summary over a scored trial list.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_dcf: f64,
    pub dcf_threshold: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

pub const DEFAULT_TOP_K: usize = 300;
pub const DEFAULT_P_TARGET: f64 = 0.01;

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

/// Cosine similarity of two embeddings, in `[-1, 1]`.
pub fn cosine_score<F: Real>(a: &[F], b: &[F]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            axis: "embedding length",
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.into_f64(), y.into_f64());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormEmbedding);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Adaptive s-norm: centers the raw score with the mean/std of the
/// `top_k` largest imposter-cohort scores on each side.
///
/// `½[(raw−μ_e)/σ_e + (raw−μ_t)/σ_t]`, population standard deviation.
pub fn adaptive_snorm(
    raw: f64,
    enroll_cohort: &[f64],
    test_cohort: &[f64],
    top_k: usize,
) -> Result<f64> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let (mu_e, sigma_e) = top_k_stats(enroll_cohort, top_k, "enroll")?;
    let (mu_t, sigma_t) = top_k_stats(test_cohort, top_k, "test")?;
    Ok(0.5 * ((raw - mu_e) / sigma_e + (raw - mu_t) / sigma_t))
}

fn top_k_stats(cohort: &[f64], top_k: usize, side: &'static str) -> Result<(f64, f64)> {
    if cohort.len() < top_k {
        return Err(Error::InsufficientCohort {
            got: cohort.len(),
            need: top_k,
        });
    }
    let mut sorted = cohort.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
    let top = &sorted[..top_k];
    let mean = top.iter().sum::<f64>() / top_k as f64;
    let var = top.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / top_k as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateCohort { side });
    }
    Ok((mean, sigma))
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Miss/false-alarm rates at each sweep threshold.
struct Sweep {
    thresholds: Vec<f64>,
    p_miss: Vec<f64>,
    p_fa: Vec<f64>,
}

fn sweep(scores: &[f64], targets: &[bool]) -> Result<Sweep> {
    if scores.len() != targets.len() {
        return Err(Error::Shape {
            axis: "labels length",
            expected: scores.len(),
            got: targets.len(),
        });
    }
    let n_t = targets.iter().filter(|&&t| t).count();
    let n_n = targets.len() - n_t;
    if n_t == 0 || n_n == 0 {
        return Err(Error::UndefinedMetric(
            "need at least one target and one nontarget trial",
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("trial scores"));
    }

    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(targets.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite scores"));

    // unique scores with per-class counts
    let mut uniq: Vec<(f64, usize, usize)> = Vec::new();
    for (s, t) in pairs {
        match uniq.last_mut() {
            Some((u, tc, nc)) if *u == s => {
                if t {
                    *tc += 1;
                } else {
                    *nc += 1;
                }
            }
            _ => uniq.push((s, usize::from(t), usize::from(!t))),
        }
    }

    let mut thresholds = vec![f64::NEG_INFINITY];
    let mut p_miss = vec![0.0];
    let mut p_fa = vec![1.0];
    let mut below_t = 0usize;
    let mut below_n = 0usize;
    for i in 1..uniq.len() {
        below_t += uniq[i - 1].1;
        below_n += uniq[i - 1].2;
        thresholds.push(0.5 * (uniq[i - 1].0 + uniq[i].0));
        p_miss.push(below_t as f64 / n_t as f64);
        p_fa.push((n_n - below_n) as f64 / n_n as f64);
    }
    thresholds.push(f64::INFINITY);
    p_miss.push(1.0);
    p_fa.push(0.0);
    Ok(Sweep {
        thresholds,
        p_miss,
        p_fa,
    })
}

/// Equal error rate and the threshold achieving it.
pub fn compute_eer(scores: &[f64], targets: &[bool]) -> Result<(f64, f64)> {
    let sw = sweep(scores, targets)?;
    // d = P_miss − P_fa is nondecreasing, from −1 to +1
    let cross = sw
        .p_miss
        .iter()
        .zip(&sw.p_fa)
        .position(|(m, f)| m - f >= 0.0)
        .expect("d reaches +1");
    let d_hi = sw.p_miss[cross] - sw.p_fa[cross];
    if d_hi == 0.0 {
        return Ok((sw.p_miss[cross], sw.thresholds[cross]));
    }
    let lo = cross - 1;
    let d_lo = sw.p_miss[lo] - sw.p_fa[lo];
    let t = -d_lo / (d_hi - d_lo);
    let eer = sw.p_miss[lo] + t * (sw.p_miss[cross] - sw.p_miss[lo]);
    let threshold = match (
        sw.thresholds[lo].is_finite(),
        sw.thresholds[cross].is_finite(),
    ) {
        (true, true) => sw.thresholds[lo] + t * (sw.thresholds[cross] - sw.thresholds[lo]),
        (true, false) => sw.thresholds[lo],
        (false, true) => sw.thresholds[cross],
        (false, false) => 0.0,
    };
    Ok((eer, threshold))
}

/// Minimum normalized detection cost over the sweep; ties go to the
/// smaller threshold.
pub fn compute_mindcf(
    scores: &[f64],
    targets: &[bool],
    p_target: f64,
    c_fa: f64,
    c_miss: f64,
) -> Result<(f64, f64)> {
    if !(0.0 < p_target && p_target < 1.0) || c_fa <= 0.0 || c_miss <= 0.0 {
        return Err(Error::Config(format!(
            "invalid DCF parameters: p_target={p_target}, c_fa={c_fa}, c_miss={c_miss}"
        )));
    }
    let sw = sweep(scores, targets)?;
    let denom = (c_miss * p_target).min(c_fa * (1.0 - p_target));
    let mut best = f64::INFINITY;
    let mut best_threshold = f64::NEG_INFINITY;
    for i in 0..sw.thresholds.len() {
        let dcf = (c_miss * p_target * sw.p_miss[i] + c_fa * (1.0 - p_target) * sw.p_fa[i]) / denom;
        if dcf < best {
            best = dcf;
            best_threshold = sw.thresholds[i];
        }
    }
    Ok((best, best_threshold))
}

/// EER and minDCF (at the default operating point) in one pass.
pub fn evaluate(scores: &[f64], targets: &[bool]) -> Result<EvalReport> {
    let (eer, eer_threshold) = compute_eer(scores, targets)?;
    let (min_dcf, dcf_threshold) = compute_mindcf(scores, targets, DEFAULT_P_TARGET, 1.0, 1.0)?;
    let n_target = targets.iter().filter(|&&t| t).count();
    Ok(EvalReport {
        eer,
        eer_threshold,
        min_dcf,
        dcf_threshold,
        n_target,
        n_nontarget: targets.len() - n_target,
    })
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Parse `LABEL ENROLL_ID TEST_ID` lines, label ∈ {0,1}.
pub fn parse_trial_list(text: &str) -> Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Format {
                what: "trial list",
                detail: format!("line {}: expected 3 fields, got {}", lineno + 1, fields.len()),
            });
        }
        let target = match fields[0] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Format {
                    what: "trial list",
                    detail: format!("line {}: label must be 0 or 1, got '{other}'", lineno + 1),
                })
            }
        };
        out.push(TrialRecord {
            target,
            enroll_id: fields[1].to_string(),
            test_id: fields[2].to_string(),
        });
    }
    if out.is_empty() {
        return Err(Error::Format {
            what: "trial list",
            detail: "no trials found".into(),
        });
    }
    Ok(out)
}

/// Parse `ENROLL_ID TEST_ID SCORE` lines.
pub fn parse_score_file(text: &str) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Format {
                what: "score file",
                detail: format!("line {}: expected 3 fields, got {}", lineno + 1, fields.len()),
            });
        }
        let score: f64 = fields[2].parse().map_err(|_| Error::Format {
            what: "score file",
            detail: format!("line {}: bad score '{}'", lineno + 1, fields[2]),
        })?;
        out.push((fields[0].to_string(), fields[1].to_string(), score));
    }
    if out.is_empty() {
        return Err(Error::Format {
            what: "score file",
            detail: "no scores found".into(),
        });
    }
    Ok(out)
}

/// Render one score line, 6 decimal places.
pub fn format_score_line(enroll_id: &str, test_id: &str, score: f64) -> String {
    format!("{enroll_id} {test_id} {score:.6}")
}
