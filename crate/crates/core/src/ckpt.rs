//! Binary container for named f32 tensors, used both for model
//! checkpoints and embedding stores.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic   4 bytes "NXTD"
//! version u32 (currently 1)
//! config  variant u8, c u32, b u32, s u32,
//!         n_kernels u32, kernel u32 × n,
//!         c_mel u32, c_mfa u32, d_embed u32, d_att u32
//! table   count u32, then per tensor:
//!         name_len u16, name bytes, rank u8, shape u32 × rank,
//!         payload byte offset u64
//! payload payload_len u64, then f32 data
//! ```
//!
//! Offsets are relative to the payload start, 4-byte aligned,
//! non-overlapping. Model checkpoints additionally validate the tensor
//! name set and shapes against the config's canonical parameter scheme,
//! which makes the payload element count equal `count_params(config)`
//! exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::config::{BlockVariant, ModelConfig};
use crate::error::{Error, Result};
use crate::model::{Embedding, Model};

pub const MAGIC: [u8; 4] = *b"NXTD";
pub const VERSION: u32 = 1;

/// One tensor as stored in a container.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

/// A parsed container: config plus tensors in table order.
#[derive(Debug, Clone)]
pub struct Container {
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn encode_config(out: &mut Vec<u8>, cfg: &ModelConfig) {
    out.push(match cfg.variant {
        BlockVariant::TsConvNext => 0,
        BlockVariant::TsConvNextLight => 1,
    });
    for v in [cfg.c, cfg.b, cfg.s] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(cfg.kernel_set.len() as u32).to_le_bytes());
    for &k in &cfg.kernel_set {
        out.extend_from_slice(&(k as u32).to_le_bytes());
    }
    for v in [cfg.c_mel, cfg.c_mfa, cfg.d_embed, cfg.d_att] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
}

/// Serialize tensors in the given order.
pub fn write_container<'a, W, I>(writer: &mut W, config: &ModelConfig, tensors: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [usize], &'a [f32])>,
{
    let tensors: Vec<(&str, &[usize], &[f32])> = tensors.into_iter().collect();

    let mut header = Vec::new();
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    encode_config(&mut header, config);

    header.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    let mut offset = 0u64;
    for (name, shape, data) in &tensors {
        let elems: usize = shape.iter().product();
        if elems != data.len() {
            return Err(Error::Shape {
                axis: "tensor data length",
                expected: elems,
                got: data.len(),
            });
        }
        if name.len() > u16::MAX as usize {
            return Err(Error::Format {
                what: "tensor name",
                detail: format!("name of {} bytes is too long", name.len()),
            });
        }
        header.extend_from_slice(&(name.len() as u16).to_le_bytes());
        header.extend_from_slice(name.as_bytes());
        header.push(shape.len() as u8);
        for &dim in *shape {
            header.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        header.extend_from_slice(&offset.to_le_bytes());
        offset += 4 * elems as u64;
    }
    header.extend_from_slice(&offset.to_le_bytes()); // payload_len
    writer.write_all(&header)?;

    let mut payload = Vec::with_capacity(offset as usize);
    for (_, _, data) in &tensors {
        for v in *data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    writer.write_all(&payload)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CkptCorrupt(format!(
                "unexpected end of file at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode_config(cur: &mut Cursor) -> Result<ModelConfig> {
    let variant = match cur.u8()? {
        0 => BlockVariant::TsConvNext,
        1 => BlockVariant::TsConvNextLight,
        other => {
            return Err(Error::CkptCorrupt(format!(
                "unknown block variant tag {other}"
            )))
        }
    };
    let c = cur.u32()? as usize;
    let b = cur.u32()? as usize;
    let s = cur.u32()? as usize;
    let n_kernels = cur.u32()? as usize;
    if n_kernels > 64 {
        return Err(Error::CkptCorrupt(format!(
            "implausible kernel count {n_kernels}"
        )));
    }
    let mut kernel_set = Vec::with_capacity(n_kernels);
    for _ in 0..n_kernels {
        kernel_set.push(cur.u32()? as usize);
    }
    let c_mel = cur.u32()? as usize;
    let c_mfa = cur.u32()? as usize;
    let d_embed = cur.u32()? as usize;
    let d_att = cur.u32()? as usize;
    Ok(ModelConfig {
        c,
        b,
        variant,
        s,
        kernel_set,
        c_mel,
        c_mfa,
        d_embed,
        d_att,
    })
}

/// Parse a container from raw bytes, with full structural validation.
pub fn parse_container(bytes: &[u8]) -> Result<Container> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::CkptMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::CkptVersion(version));
    }
    let config = decode_config(&mut cur)?;

    let count = cur.u32()? as usize;
    let mut entries: Vec<(String, Vec<usize>, u64, usize)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| {
            Error::CkptCorrupt("tensor name is not valid UTF-8".into())
        })?;
        let rank = cur.u8()? as usize;
        if rank == 0 || rank > 3 {
            return Err(Error::CkptCorrupt(format!(
                "tensor '{name}': unsupported rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let offset = cur.u64()?;
        let elems: usize = shape.iter().product();
        entries.push((name, shape, offset, elems));
    }
    let payload_len = cur.u64()?;
    let payload = cur.take(payload_len as usize)?;
    if cur.pos != bytes.len() {
        return Err(Error::CkptCorrupt(format!(
            "{} trailing bytes after payload",
            bytes.len() - cur.pos
        )));
    }

    // offset validation: aligned, in bounds, non-overlapping, unique names
    let mut seen = HashMap::new();
    let mut spans: Vec<(u64, u64)> = Vec::with_capacity(count);
    for (name, _, offset, elems) in &entries {
        if seen.insert(name.clone(), ()).is_some() {
            return Err(Error::CkptCorrupt(format!("duplicate tensor name '{name}'")));
        }
        if offset % 4 != 0 {
            return Err(Error::CkptCorrupt(format!(
                "tensor '{name}': offset {offset} not 4-byte aligned"
            )));
        }
        let len = 4 * *elems as u64;
        if offset.checked_add(len).is_none_or(|end| end > payload_len) {
            return Err(Error::CkptCorrupt(format!(
                "tensor '{name}': bytes {offset}..{} exceed payload of {payload_len}",
                offset.saturating_add(len)
            )));
        }
        spans.push((*offset, len));
    }
    spans.sort_unstable();
    for w in spans.windows(2) {
        if w[0].0 + w[0].1 > w[1].0 {
            return Err(Error::CkptCorrupt("overlapping tensor payloads".into()));
        }
    }

    let tensors = entries
        .into_iter()
        .map(|(name, shape, offset, elems)| {
            let start = offset as usize;
            let data = payload[start..start + 4 * elems]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            NamedTensor { name, shape, data }
        })
        .collect();
    Ok(Container { config, tensors })
}

pub fn read_container(path: &Path) -> Result<Container> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_container(&bytes)
}

// ---------------------------------------------------------------------------
// Model checkpoints
// ---------------------------------------------------------------------------

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    let named = model.named_tensors();
    let mut writer = BufWriter::new(File::create(path)?);
    write_container(
        &mut writer,
        model.config(),
        named
            .iter()
            .map(|(name, shape, data)| (name.as_str(), shape.as_slice(), *data)),
    )?;
    writer.flush()?;
    Ok(())
}

/// Load and validate a model checkpoint; every canonical parameter must
/// be present with the right shape, and nothing else.
pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    load_checkpoint_from_bytes(&bytes)
}

/// Same as [`load_checkpoint`] for an in-memory file image.
pub fn load_checkpoint_from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    let container = parse_container(bytes)?;
    container.config.validate().map_err(|e| match e {
        Error::Config(msg) => Error::CkptSchema(msg),
        other => other,
    })?;
    let map: HashMap<String, (Vec<usize>, Vec<f32>)> = container
        .tensors
        .into_iter()
        .map(|t| (t.name, (t.shape, t.data)))
        .collect();
    Model::from_tensor_map(container.config, map)
}

// ---------------------------------------------------------------------------
// Embedding stores
// ---------------------------------------------------------------------------

/// Embeddings keyed by utterance id, in insertion order. Same container
/// format as checkpoints: one rank-1 tensor of length 192 per utterance,
/// config = the model that produced them.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    config: ModelConfig,
    ids: Vec<String>,
    by_id: HashMap<String, Embedding<f32>>,
}

impl EmbeddingStore {
    pub fn new(config: ModelConfig) -> Self {
        Self {
            config,
            ids: Vec::new(),
            by_id: HashMap::new(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn insert(&mut self, id: &str, embedding: Embedding<f32>) -> Result<()> {
        if self.by_id.contains_key(id) {
            return Err(Error::Format {
                what: "embedding store",
                detail: format!("duplicate utterance id '{id}'"),
            });
        }
        self.ids.push(id.to_string());
        self.by_id.insert(id.to_string(), embedding);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Embedding<f32>> {
        self.by_id.get(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding<f32>)> {
        self.ids.iter().map(|id| (id.as_str(), &self.by_id[id]))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let shape = [Embedding::<f32>::DIM];
        let mut writer = BufWriter::new(File::create(path)?);
        write_container(
            &mut writer,
            &self.config,
            self.ids
                .iter()
                .map(|id| (id.as_str(), shape.as_slice(), self.by_id[id].as_slice())),
        )?;
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let container = read_container(path)?;
        let mut store = Self::new(container.config);
        for t in container.tensors {
            if t.shape != [Embedding::<f32>::DIM] {
                return Err(Error::CkptSchema(format!(
                    "embedding '{}': expected shape [{}], found {:?}",
                    t.name,
                    Embedding::<f32>::DIM,
                    t.shape
                )));
            }
            let emb = Embedding::new(t.data)?;
            store.insert(&t.name, emb)?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::count_params;
    use crate::init::random_model;
    use crate::tensor::Tensor2D;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn small_config() -> ModelConfig {
        let mut cfg = ModelConfig::next_tdnn(8, 1);
        cfg.kernel_set = vec![3, 7];
        cfg
    }

    fn save_to_vec(model: &Model<f32>) -> Vec<u8> {
        let named = model.named_tensors();
        let mut out = Vec::new();
        write_container(
            &mut out,
            model.config(),
            named
                .iter()
                .map(|(name, shape, data)| (name.as_str(), shape.as_slice(), *data)),
        )
        .unwrap();
        out
    }

    #[test]
    fn roundtrip_is_bitwise_and_idempotent() {
        let cfg = small_config();
        let model = random_model(&cfg, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        for ((na, sa, da), (nb, sb, db)) in
            model.named_tensors().iter().zip(loaded.named_tensors().iter())
        {
            assert_eq!(na, nb);
            assert_eq!(sa, sb);
            assert_eq!(da, db, "tensor {na} not bitwise equal");
        }
        // save → load → save: byte-identical files
        let bytes_a = std::fs::read(&path).unwrap();
        let bytes_b = save_to_vec(&loaded);
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn payload_element_count_equals_count_params() {
        for cfg in [small_config(), {
            let mut c = ModelConfig::next_tdnn_light(6, 2);
            c.kernel_set = vec![5];
            c
        }] {
            let model = random_model(&cfg, 5).unwrap();
            let bytes = save_to_vec(&model);
            let container = parse_container(&bytes).unwrap();
            let elems: usize = container.tensors.iter().map(|t| t.data.len()).sum();
            assert_eq!(elems as u64, count_params(&cfg));
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let cfg = small_config();
        let mut bytes = save_to_vec(&random_model(&cfg, 1).unwrap());
        bytes[0] = b'X';
        assert!(matches!(parse_container(&bytes), Err(Error::CkptMagic)));
    }

    #[test]
    fn unsupported_version_rejected() {
        let cfg = small_config();
        let mut bytes = save_to_vec(&random_model(&cfg, 1).unwrap());
        bytes[4] = 9;
        assert!(matches!(
            parse_container(&bytes),
            Err(Error::CkptVersion(9))
        ));
    }

    #[test]
    fn truncated_payload_rejected() {
        let cfg = small_config();
        let bytes = save_to_vec(&random_model(&cfg, 1).unwrap());
        let truncated = &bytes[..bytes.len() - 10];
        assert!(matches!(
            parse_container(truncated),
            Err(Error::CkptCorrupt(_))
        ));
    }

    #[test]
    fn corrupt_table_offset_fails_bounds_check() {
        let cfg = small_config();
        let model = random_model(&cfg, 2).unwrap();
        let mut bytes = save_to_vec(&model);
        // the final 8 bytes before the payload-length field belong to the
        // last table entry's offset; blow up its most significant byte
        let payload = 4 * count_params(&cfg) as usize;
        let pos = bytes.len() - payload - 8 - 1;
        bytes[pos] = 0xFF;
        match parse_container(&bytes) {
            Err(Error::CkptCorrupt(msg)) => assert!(msg.contains("exceed"), "{msg}"),
            other => panic!("expected bounds error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_payload_byte_changes_embedding() {
        let cfg = small_config();
        let model = random_model(&cfg, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&model, &path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x01; // exponent bit of head.bias[191]
        let tampered_path = dir.path().join("t.ckpt");
        std::fs::write(&tampered_path, &bytes).unwrap();

        let tampered = load_checkpoint(&tampered_path).unwrap(); // structurally fine
        let mut rng = StdRng::seed_from_u64(70);
        let feats = Tensor2D::new(
            cfg.c_mel,
            20,
            (0..cfg.c_mel * 20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let a = model.embed(&feats).unwrap();
        let b = tampered.embed(&feats).unwrap();
        assert_ne!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn tampered_config_fails_schema_check() {
        let cfg = small_config();
        let model = random_model(&cfg, 4).unwrap();
        let mut bytes = save_to_vec(&model);
        // config block starts at byte 8 with the variant tag; c follows
        let c_pos = 9;
        bytes[c_pos..c_pos + 4].copy_from_slice(&16u32.to_le_bytes());
        let container = parse_container(&bytes).unwrap();
        assert_eq!(container.config.c, 16);
        // building a model from it must fail schema validation
        let map: HashMap<String, (Vec<usize>, Vec<f32>)> = container
            .tensors
            .into_iter()
            .map(|t| (t.name, (t.shape, t.data)))
            .collect();
        match Model::<f32>::from_tensor_map(container.config, map) {
            Err(Error::CkptSchema(_)) | Err(Error::Config(_)) => {}
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn embedding_store_roundtrip_keeps_order() {
        let cfg = small_config();
        let mut store = EmbeddingStore::new(cfg);
        let mut rng = StdRng::seed_from_u64(71);
        for id in ["spk1/a.wav", "spk2/b.wav", "spk1/c.wav"] {
            let v: Vec<f32> = (0..192).map(|_| rng.gen_range(-1.0..1.0)).collect();
            store.insert(id, Embedding::new(v).unwrap()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        store.save(&path).unwrap();
        let loaded = EmbeddingStore::load(&path).unwrap();
        assert_eq!(loaded.ids(), store.ids());
        for (id, emb) in store.iter() {
            assert_eq!(loaded.get(id).unwrap(), emb);
        }
        // duplicate ids rejected
        let mut dup = EmbeddingStore::new(small_config());
        dup.insert("x", Embedding::new(vec![1.0; 192]).unwrap()).unwrap();
        assert!(dup.insert("x", Embedding::new(vec![1.0; 192]).unwrap()).is_err());
    }
}
