//! Subcommand implementations. Each takes parsed arguments plus the
//! output writer and returns a [`CliError`] that the dispatcher maps to
//! an exit code.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nexttdnn::ckpt::{load_checkpoint_from_bytes, save_checkpoint, EmbeddingStore};
use nexttdnn::config::ModelConfig;
use nexttdnn::cost::{count_params, mac_report, param_report, CostReport};
use nexttdnn::error::Error;
use nexttdnn::eval::{
    adaptive_snorm, cosine_score, evaluate, format_score_line, parse_score_file, parse_trial_list,
};
use nexttdnn::features::{frame_count, MelConfig, SAMPLE_RATE};
use nexttdnn::init::random_model;

use crate::batch::{embed_batch, parse_wav_list};
use crate::manifest::RunManifest;
use crate::CliError;

type CmdResult = Result<(), CliError>;

fn read_config(path: &Path) -> Result<ModelConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    ModelConfig::from_toml_str(&text)
}

pub fn init_random(config: &Path, seed: u64, out: &Path, w: &mut dyn Write) -> CmdResult {
    let cfg = read_config(config)?;
    let model = random_model(&cfg, seed)?;
    save_checkpoint(&model, out)?;
    writeln!(
        w,
        "wrote checkpoint to {} ({} params, seed {seed})",
        out.display(),
        count_params(&cfg)
    )
    .map_err(Error::from)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn embed(
    ckpt: &Path,
    wav_list: &Path,
    offset_sec: f64,
    dur_sec: Option<f64>,
    out: &Path,
    workers: Option<usize>,
    w: &mut dyn Write,
) -> CmdResult {
    let ckpt_bytes = std::fs::read(ckpt).map_err(Error::from)?;
    let model = load_checkpoint_from_bytes(&ckpt_bytes)?;
    let jobs = parse_wav_list(&std::fs::read_to_string(wav_list).map_err(Error::from)?)?;
    let mel = MelConfig::default();
    let workers = workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });

    let started = Instant::now();
    let embeddings = embed_batch(&model, &mel, &jobs, offset_sec, dur_sec, workers)?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut store = EmbeddingStore::new(model.config().clone());
    for (job, emb) in jobs.iter().zip(embeddings) {
        store.insert(&job.id, emb)?;
    }
    store.save(out)?;
    RunManifest::for_embed_run(model.config(), &ckpt_bytes, &mel).write(out)?;

    writeln!(
        w,
        "embedded {} utterances in {elapsed:.3} s ({:.4} s/segment, {workers} workers)",
        jobs.len(),
        elapsed / jobs.len() as f64
    )
    .map_err(Error::from)?;
    writeln!(w, "wrote embeddings to {}", out.display()).map_err(Error::from)?;
    Ok(())
}

pub fn score(emb: &Path, trials: &Path, out: &Path, w: &mut dyn Write) -> CmdResult {
    let store = EmbeddingStore::load(emb)?;
    let trials = parse_trial_list(&std::fs::read_to_string(trials).map_err(Error::from)?)?;
    let mut lines = String::new();
    for trial in &trials {
        let enroll = store.get(&trial.enroll_id).ok_or_else(|| Error::Format {
            what: "trial list",
            detail: format!("unknown utterance id '{}'", trial.enroll_id),
        })?;
        let test = store.get(&trial.test_id).ok_or_else(|| Error::Format {
            what: "trial list",
            detail: format!("unknown utterance id '{}'", trial.test_id),
        })?;
        let raw = cosine_score(enroll.as_slice(), test.as_slice())?;
        lines.push_str(&format_score_line(&trial.enroll_id, &trial.test_id, raw));
        lines.push('\n');
    }
    std::fs::write(out, lines).map_err(Error::from)?;
    writeln!(w, "scored {} trials -> {}", trials.len(), out.display()).map_err(Error::from)?;
    Ok(())
}

pub fn snorm(
    scores: &Path,
    emb: &Path,
    cohort_emb: &Path,
    top_k: usize,
    out: &Path,
    w: &mut dyn Write,
) -> CmdResult {
    let raw_scores = parse_score_file(&std::fs::read_to_string(scores).map_err(Error::from)?)?;
    let store = EmbeddingStore::load(emb)?;
    let cohort = EmbeddingStore::load(cohort_emb)?;

    // raw cosine of each trial utterance against the whole imposter
    // cohort, computed once per utterance
    let mut cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut lines = String::new();
    for (enroll_id, test_id, raw) in &raw_scores {
        for id in [enroll_id, test_id] {
            if !cache.contains_key(id.as_str()) {
                let utt = store.get(id).ok_or_else(|| Error::Format {
                    what: "score file",
                    detail: format!("unknown utterance id '{id}'"),
                })?;
                let against_cohort: Result<Vec<f64>, Error> = cohort
                    .iter()
                    .map(|(_, c)| cosine_score(utt.as_slice(), c.as_slice()))
                    .collect();
                cache.insert(id.clone(), against_cohort?);
            }
        }
        let normalized = adaptive_snorm(
            *raw,
            &cache[enroll_id.as_str()],
            &cache[test_id.as_str()],
            top_k,
        )?;
        lines.push_str(&format_score_line(enroll_id, test_id, normalized));
        lines.push('\n');
    }
    std::fs::write(out, lines).map_err(Error::from)?;
    writeln!(
        w,
        "normalized {} scores (top-{top_k} of {} cohort utterances) -> {}",
        raw_scores.len(),
        cohort.len(),
        out.display()
    )
    .map_err(Error::from)?;
    Ok(())
}

pub fn eval(scores: &Path, trials: &Path, w: &mut dyn Write) -> CmdResult {
    let score_lines = parse_score_file(&std::fs::read_to_string(scores).map_err(Error::from)?)?;
    let trials = parse_trial_list(&std::fs::read_to_string(trials).map_err(Error::from)?)?;

    let mut by_pair: HashMap<(String, String), f64> = HashMap::new();
    for (e, t, s) in score_lines {
        if by_pair.insert((e.clone(), t.clone()), s).is_some() {
            return Err(Error::Format {
                what: "score file",
                detail: format!("duplicate score for pair ({e}, {t})"),
            }
            .into());
        }
    }
    let mut values = Vec::with_capacity(trials.len());
    let mut targets = Vec::with_capacity(trials.len());
    for trial in &trials {
        let key = (trial.enroll_id.clone(), trial.test_id.clone());
        let score = by_pair.get(&key).ok_or_else(|| Error::Format {
            what: "score file",
            detail: format!("no score for trial ({}, {})", trial.enroll_id, trial.test_id),
        })?;
        values.push(*score);
        targets.push(trial.target);
    }

    let report = evaluate(&values, &targets)?;
    writeln!(
        w,
        "trials: {} ({} target, {} nontarget)",
        trials.len(),
        report.n_target,
        report.n_nontarget
    )
    .map_err(Error::from)?;
    writeln!(
        w,
        "EER(%): {:.6} (threshold {:.6})",
        report.eer * 100.0,
        report.eer_threshold
    )
    .map_err(Error::from)?;
    writeln!(
        w,
        "minDCF(p_target=0.01): {:.6} (threshold {:.6})",
        report.min_dcf, report.dcf_threshold
    )
    .map_err(Error::from)?;
    Ok(())
}

fn write_table(w: &mut dyn Write, report: &CostReport, unit: &str) -> Result<(), Error> {
    writeln!(w, "{:<24} {:>14}", "layer", unit).map_err(Error::from)?;
    for row in &report.rows {
        writeln!(w, "{:<24} {:>14}", row.name, row.count).map_err(Error::from)?;
    }
    Ok(())
}

fn describe(cfg: &ModelConfig) -> String {
    format!(
        "{:?} C={} B={} s={} kernels={:?}",
        cfg.variant, cfg.c, cfg.b, cfg.s, cfg.kernel_set
    )
}

pub fn params(config: &Path, w: &mut dyn Write) -> CmdResult {
    let cfg = read_config(config)?;
    let report = param_report(&cfg);
    writeln!(w, "parameter counts for {}", describe(&cfg)).map_err(Error::from)?;
    write_table(w, &report, "params")?;
    writeln!(
        w,
        "total params: {} ({:.2}M)",
        report.total,
        report.total as f64 / 1e6
    )
    .map_err(Error::from)?;
    Ok(())
}

pub fn macs(config: &Path, seconds: f64, w: &mut dyn Write) -> CmdResult {
    let cfg = read_config(config)?;
    let mel = MelConfig::default();
    let samples = (seconds * SAMPLE_RATE as f64).round() as usize;
    let frames = frame_count(samples, &mel)?;
    let report = mac_report(&cfg, frames);
    writeln!(
        w,
        "MAC counts for {} on {seconds} s segments ({frames} frames)",
        describe(&cfg)
    )
    .map_err(Error::from)?;
    write_table(w, &report, "MACs")?;
    writeln!(
        w,
        "total MACs: {} ({:.3}G)",
        report.total,
        report.total as f64 / 1e9
    )
    .map_err(Error::from)?;
    Ok(())
}
