//! Versioned structured-text checkpoints.
//!
//! ```text
//! gazegraph-checkpoint 1
//! meta <key> <value...>
//! param <name> <rank> <dim>...
//! <values>
//! end
//! ```
//!
//! Values are written in shortest round-trip exponent form, so a
//! save/load cycle is bit-exact and identical parameters give identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use super::param::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &str = "gazegraph-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, meta: Vec<(String, String)>) -> Self {
        Checkpoint {
            meta,
            tensors: store
                .iter()
                .map(|p| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Copies tensors into `store`, requiring an exact name and shape match.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.tensors.len() != store.len() {
            return Err(Error::format(
                "checkpoint",
                format!(
                    "{} tensors in file, model expects {}",
                    self.tensors.len(),
                    store.len()
                ),
            ));
        }
        for (name, tensor) in &self.tensors {
            let id = store
                .id(name)
                .ok_or_else(|| Error::MissingKey(format!("parameter `{name}` not in model")))?;
            let p = store.get_mut(id);
            if p.value.shape() != tensor.shape() {
                return Err(Error::Dimension {
                    op: "checkpoint load",
                    lhs: p.value.shape().to_vec(),
                    rhs: tensor.shape().to_vec(),
                });
            }
            p.value = tensor.clone();
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, t) in &self.tensors {
            let _ = write!(out, "param {name} {}", t.shape().len());
            for d in t.shape() {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
            let mut first = true;
            for v in t.data() {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let loc = |n: usize| format!("checkpoint line {}", n + 1);
        let (n, header) = lines
            .next()
            .ok_or_else(|| Error::format("checkpoint", "empty file"))?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MAGIC) {
            return Err(Error::format(loc(n), "not a checkpoint file"));
        }
        let version: u32 = head
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::format(loc(n), "missing version"))?;
        if version != VERSION {
            return Err(Error::format(
                loc(n),
                format!("unsupported version {version}, expected {VERSION}"),
            ));
        }

        let mut ckpt = Checkpoint {
            meta: Vec::new(),
            tensors: Vec::new(),
        };
        while let Some((n, line)) = lines.next() {
            if line == "end" {
                return Ok(ckpt);
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                ckpt.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("param ") {
                let mut fields = rest.split_whitespace();
                let name = fields
                    .next()
                    .ok_or_else(|| Error::format(loc(n), "missing name"))?;
                let rank: usize = fields
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::format(loc(n), "missing rank"))?;
                let shape: Vec<usize> = fields
                    .map(|d| d.parse().map_err(|_| Error::format(loc(n), "bad dimension")))
                    .collect::<Result<_>>()?;
                if shape.len() != rank {
                    return Err(Error::format(loc(n), "rank does not match dimensions"));
                }
                let (vn, values) = lines
                    .next()
                    .ok_or_else(|| Error::format(loc(n), "missing values"))?;
                let data: Vec<f64> = values
                    .split_whitespace()
                    .map(|v| v.parse().map_err(|_| Error::format(loc(vn), "bad value")))
                    .collect::<Result<_>>()?;
                let tensor = Tensor::new(shape, data)
                    .map_err(|_| Error::format(loc(vn), format!("value count wrong for `{name}`")))?;
                ckpt.tensors.push((name.to_string(), tensor));
            } else {
                return Err(Error::format(loc(n), format!("unexpected line `{line}`")));
            }
        }
        Err(Error::format("checkpoint", "missing end marker"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
