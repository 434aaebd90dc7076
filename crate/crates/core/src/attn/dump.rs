use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, Staging};

pub const DUMP_FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const BLOB_FILE: &str = "atts.f32";

/// Row sums may exceed 1 by this much (float accumulation in the producer).
pub const ROW_SUM_TOLERANCE: f32 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpInstance {
    pub sample_id: String,
    pub prompt_len: usize,
    /// Half-open token range `[start, end)` of the entity name.
    pub name_span: (usize, usize),
    /// Offset into the blob, in `f32` elements.
    pub blob_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpMeta {
    pub format_version: u32,
    pub n_layers: usize,
    pub instances: Vec<DumpInstance>,
}

/// Head-averaged attention rows, one `n_layers × prompt_len` block per
/// instance, taken at the position that generates the first knowledge token.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDump {
    pub meta: DumpMeta,
    pub blob: Vec<f32>,
    index: HashMap<String, usize>,
}

impl AttentionDump {
    /// Validates and indexes a dump.
    pub fn new(meta: DumpMeta, blob: Vec<f32>) -> Result<Self> {
        let mut d = Self {
            meta,
            blob,
            index: HashMap::new(),
        };
        d.validate()?;
        d.index = d
            .meta
            .instances
            .iter()
            .enumerate()
            .map(|(i, x)| (x.sample_id.clone(), i))
            .collect();
        Ok(d)
    }

    /// Builds a dump from per-instance blocks laid out back to back.
    pub fn from_blocks(n_layers: usize, blocks: Vec<(String, (usize, usize), Vec<f32>)>) -> Result<Self> {
        let mut instances = Vec::with_capacity(blocks.len());
        let mut blob = Vec::new();
        for (sample_id, name_span, atts) in blocks {
            if n_layers == 0 || atts.len() % n_layers != 0 {
                return Err(Error::InvalidDump(format!(
                    "{sample_id}: {} values do not split into {n_layers} layers",
                    atts.len()
                )));
            }
            instances.push(DumpInstance {
                sample_id,
                prompt_len: atts.len() / n_layers,
                name_span,
                blob_offset: blob.len(),
            });
            blob.extend(atts);
        }
        Self::new(
            DumpMeta {
                format_version: DUMP_FORMAT_VERSION,
                n_layers,
                instances,
            },
            blob,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDump(m));
        let m = &self.meta;
        if m.format_version != DUMP_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", m.format_version));
        }
        if m.n_layers == 0 {
            return bad("n_layers must be positive".into());
        }
        let mut expected = 0usize;
        let mut seen = HashMap::new();
        for (i, inst) in m.instances.iter().enumerate() {
            if let Some(j) = seen.insert(inst.sample_id.as_str(), i) {
                return bad(format!("instances {j} and {i} share sample id {}", inst.sample_id));
            }
            let (start, end) = inst.name_span;
            if !(start < end && end <= inst.prompt_len) {
                return bad(format!(
                    "{}: name span [{start}, {end}) invalid for prompt length {}",
                    inst.sample_id, inst.prompt_len
                ));
            }
            let size = m.n_layers * inst.prompt_len;
            if inst.blob_offset + size > self.blob.len() {
                return bad(format!("{}: block runs past the end of the blob", inst.sample_id));
            }
            expected += size;
            for layer in 0..m.n_layers {
                let row = &self.blob[inst.blob_offset + layer * inst.prompt_len..][..inst.prompt_len];
                if let Some(v) = row.iter().find(|v| v.is_nan() || **v < 0.0) {
                    return bad(format!("{} layer {layer}: negative or NaN weight {v}", inst.sample_id));
                }
                let sum: f32 = row.iter().sum();
                if sum > 1.0 + ROW_SUM_TOLERANCE {
                    return bad(format!("{} layer {layer}: row sums to {sum}", inst.sample_id));
                }
            }
        }
        if expected != self.blob.len() {
            return bad(format!("blob holds {} values, instances need {expected}", self.blob.len()));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.meta.n_layers
    }

    pub fn instance(&self, sample_id: &str) -> Result<&DumpInstance> {
        self.index
            .get(sample_id)
            .map(|&i| &self.meta.instances[i])
            .ok_or_else(|| Error::MissingSample(sample_id.to_owned()))
    }

    pub fn row(&self, inst: &DumpInstance, layer: usize) -> &[f32] {
        &self.blob[inst.blob_offset + layer * inst.prompt_len..][..inst.prompt_len]
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta: DumpMeta = read_json(&dir.join(META_FILE))?;
        let path = dir.join(BLOB_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::InvalidDump(format!("{}: length {} is not a multiple of 4", path.display(), bytes.len())));
        }
        let blob = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(meta, blob)
    }

    pub fn stage_files(&self, dir: &Path, staging: &mut Staging) -> Result<()> {
        let bytes: Vec<u8> = self.blob.iter().flat_map(|v| v.to_le_bytes()).collect();
        staging.add_json(dir.join(META_FILE), &self.meta)?;
        staging.add_bytes(dir.join(BLOB_FILE), &bytes)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut s = Staging::new();
        self.stage_files(dir, &mut s)?;
        s.commit().map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(id: &str, span: (usize, usize), vals: &[f32]) -> (String, (usize, usize), Vec<f32>) {
        (id.to_owned(), span, vals.to_vec())
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vals = [0.1f32, 0.2, 0.3, 1.0 / 3.0, f32::MIN_POSITIVE, 0.0];
        let d = AttentionDump::from_blocks(2, vec![block("a", (0, 2), &vals), block("b", (1, 3), &vals)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        let back = AttentionDump::read(dir.path()).unwrap();
        assert_eq!(back.meta, d.meta);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.blob), bits(&d.blob));
        assert_eq!(back.instance("b").unwrap().blob_offset, 6);
    }

    #[test]
    fn rejects_bad_dumps() {
        let ok = [0.5f32, 0.5];
        assert!(AttentionDump::from_blocks(1, vec![block("a", (1, 1), &ok)]).is_err());
        assert!(AttentionDump::from_blocks(1, vec![block("a", (0, 3), &ok)]).is_err());
        assert!(AttentionDump::from_blocks(1, vec![block("a", (0, 1), &[0.9, 0.2])]).is_err());
        assert!(AttentionDump::from_blocks(1, vec![block("a", (0, 1), &[-0.1, 0.2])]).is_err());
        assert!(AttentionDump::from_blocks(1, vec![block("a", (0, 1), &ok), block("a", (0, 1), &ok)]).is_err());
        assert!(AttentionDump::from_blocks(1, vec![block("a", (0, 1), &[0.5, 0.50005])]).is_ok());

        let d = AttentionDump::from_blocks(1, vec![block("a", (0, 1), &ok)]).unwrap();
        let mut meta = d.meta.clone();
        meta.format_version = 9;
        assert!(AttentionDump::new(meta, d.blob.clone()).is_err());
        let mut blob = d.blob.clone();
        blob.push(0.0);
        assert!(AttentionDump::new(d.meta.clone(), blob).is_err());
    }

    #[test]
    fn truncated_blob_file() {
        let d = AttentionDump::from_blocks(1, vec![block("a", (0, 1), &[0.5, 0.5])]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        fs::write(dir.path().join(BLOB_FILE), [0u8; 7]).unwrap();
        assert!(matches!(AttentionDump::read(dir.path()), Err(Error::InvalidDump(_))));
    }
}
