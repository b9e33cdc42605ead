//! Batch embedding over a WAV list with a bounded worker pool.
//!
//! Workers pull jobs from a shared cursor and write each result into its
//! input slot, so output order matches list order regardless of the
//! pool degree.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nexttdnn::error::Error;
use nexttdnn::features::{frame_count, log_mel, AudioBuffer, MelConfig, SAMPLE_RATE};
use nexttdnn::model::{Embedding, Model};
use nexttdnn::wav::read_wav;

/// One utterance to embed.
#[derive(Debug, Clone)]
pub struct EmbedJob {
    pub id: String,
    pub path: PathBuf,
}

/// A batch failure, tagged with the utterance that caused it.
#[derive(Debug)]
pub enum BatchError {
    Setup(Error),
    Job { id: String, source: Error },
}

impl BatchError {
    pub fn source(&self) -> &Error {
        match self {
            BatchError::Setup(e) => e,
            BatchError::Job { source, .. } => source,
        }
    }
}

impl std::fmt::Display for BatchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BatchError::Setup(e) => write!(f, "{e}"),
            BatchError::Job { id, source } => write!(f, "utterance '{id}': {source}"),
        }
    }
}

impl std::error::Error for BatchError {}

/// Crop `[offset, offset+dur)` out of the file and embed it.
fn embed_one(
    model: &Model<f32>,
    mel: &MelConfig,
    job: &EmbedJob,
    offset_sec: f64,
    dur_sec: Option<f64>,
) -> Result<Embedding<f32>, Error> {
    let audio: AudioBuffer<f32> = read_wav(&job.path)?;
    let samples = audio.samples();
    let start = (offset_sec * SAMPLE_RATE as f64).round() as usize;
    let end = match dur_sec {
        Some(d) => start + (d * SAMPLE_RATE as f64).round() as usize,
        None => samples.len(),
    };
    if end > samples.len() {
        return Err(Error::InputTooShort {
            got: samples.len(),
            need: end,
        });
    }
    let segment = AudioBuffer::new(SAMPLE_RATE, samples[start..end].to_vec())?;
    let feats = log_mel(&segment, mel)?;
    model.embed(&feats)
}

/// Embed every job; results come back in job order.
pub fn embed_batch(
    model: &Model<f32>,
    mel: &MelConfig,
    jobs: &[EmbedJob],
    offset_sec: f64,
    dur_sec: Option<f64>,
    workers: usize,
) -> Result<Vec<Embedding<f32>>, BatchError> {
    if model.config().c_mel != mel.n_mels {
        return Err(BatchError::Setup(Error::Config(format!(
            "model expects {} mel bins, front end produces {}",
            model.config().c_mel,
            mel.n_mels
        ))));
    }
    if let Some(d) = dur_sec {
        // reject degenerate crops up front
        let samples = (d * SAMPLE_RATE as f64).round() as usize;
        if frame_count(samples, mel).is_err() {
            return Err(BatchError::Setup(Error::InputTooShort {
                got: samples,
                need: mel.win_length,
            }));
        }
    }
    let workers = workers.max(1).min(jobs.len().max(1));

    type Slots = Vec<Option<Result<Embedding<f32>, Error>>>;
    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Slots> = Mutex::new((0..jobs.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let result = embed_one(model, mel, &jobs[idx], offset_sec, dur_sec);
                slots.lock().expect("pool lock")[idx] = Some(result);
            });
        }
    });

    let slots = slots.into_inner().expect("pool lock");
    let mut out = Vec::with_capacity(jobs.len());
    for (job, slot) in jobs.iter().zip(slots) {
        match slot.expect("every slot filled") {
            Ok(embedding) => out.push(embedding),
            Err(source) => {
                return Err(BatchError::Job {
                    id: job.id.clone(),
                    source,
                })
            }
        }
    }
    Ok(out)
}

/// Parse a WAV list: one utterance per line, either `ID PATH` or a bare
/// path (which then serves as the id).
pub fn parse_wav_list(text: &str) -> Result<Vec<EmbedJob>, Error> {
    let mut jobs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let job = match fields.as_slice() {
            [path] => EmbedJob {
                id: path.to_string(),
                path: PathBuf::from(path),
            },
            [id, path] => EmbedJob {
                id: id.to_string(),
                path: PathBuf::from(path),
            },
            _ => {
                return Err(Error::Format {
                    what: "wav list",
                    detail: format!(
                        "line {}: expected 'PATH' or 'ID PATH', got {} fields",
                        lineno + 1,
                        fields.len()
                    ),
                })
            }
        };
        jobs.push(job);
    }
    if jobs.is_empty() {
        return Err(Error::Format {
            what: "wav list",
            detail: "no entries found".into(),
        });
    }
    Ok(jobs)
}
