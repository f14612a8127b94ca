//! Binary checkpoint container.
//!
//! ```text
//! b"FKANCKPT" | version: u32 LE | header_len: u64 LE | header (JSON) | vectors (f64 LE)
//! ```
//!
//! The JSON header carries the model config, the parameter layout, an optional
//! round index and the name/length of each vector that follows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelState, ParamBlock};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FKANCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelState,
    pub round_index: Option<u64>,
    /// Extra vectors aligned with the parameters (e.g. server momentum).
    pub extras: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    layout: Vec<ParamBlock>,
    round_index: Option<u64>,
    vectors: Vec<VectorEntry>,
}

#[derive(Serialize, Deserialize)]
struct VectorEntry {
    name: String,
    len: usize,
}

impl Checkpoint {
    pub fn from_model(model: ModelState) -> Self {
        Checkpoint {
            model,
            round_index: None,
            extras: Vec::new(),
        }
    }

    pub fn extra(&self, name: &str) -> Option<&[f64]> {
        self.extras
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut vectors = vec![VectorEntry {
            name: "params".into(),
            len: self.model.len(),
        }];
        vectors.extend(self.extras.iter().map(|(n, v)| VectorEntry {
            name: n.clone(),
            len: v.len(),
        }));
        let header = Header {
            config: self.model.config().clone(),
            layout: self.model.layout().to_vec(),
            round_index: self.round_index,
            vectors,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let payload: usize =
            self.model.len() + self.extras.iter().map(|(_, v)| v.len()).sum::<usize>();
        let mut out = Vec::with_capacity(20 + header.len() + 8 * payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        let all = std::iter::once(self.model.params())
            .chain(self.extras.iter().map(|(_, v)| v.as_slice()));
        for v in all {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let take = |at: usize, n: usize| -> Result<&[u8]> {
            bytes
                .get(at..at + n)
                .ok_or_else(|| Error::data_at("checkpoint truncated", at as u64))
        };
        if take(0, 8)? != MAGIC {
            return Err(Error::data_at("bad checkpoint magic", 0));
        }
        let version = u32::from_le_bytes(take(8, 4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::data_at(
                format!("unsupported checkpoint version {version}"),
                8,
            ));
        }
        let header_len = u64::from_le_bytes(take(12, 8)?.try_into().expect("8 bytes")) as usize;
        let header: Header = serde_json::from_slice(take(20, header_len)?)
            .map_err(|e| Error::data_at(format!("bad checkpoint header: {e}"), 20))?;
        let mut at = 20 + header_len;
        let mut vectors = Vec::with_capacity(header.vectors.len());
        for entry in &header.vectors {
            let raw = take(at, entry.len * 8)?;
            vectors.push((
                entry.name.clone(),
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect::<Vec<_>>(),
            ));
            at += entry.len * 8;
        }
        if at != bytes.len() {
            return Err(Error::data_at(
                "trailing bytes after checkpoint payload",
                at as u64,
            ));
        }
        let mut vectors = vectors.into_iter();
        let (name, params) = vectors
            .next()
            .ok_or_else(|| Error::data("checkpoint has no parameter vector"))?;
        if name != "params" {
            return Err(Error::data(format!(
                "first checkpoint vector is `{name}`, not `params`"
            )));
        }
        let model = ModelState::new(header.config, params)?;
        if model.layout() != header.layout.as_slice() {
            return Err(Error::data("checkpoint layout does not match its config"));
        }
        Ok(Checkpoint {
            model,
            round_index: header.round_index,
            extras: vectors.collect(),
        })
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        std::fs::write(&tmp, self.encode()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}
