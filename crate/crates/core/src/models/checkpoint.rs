//! Versioned model checkpoints: magic `GGDM`, `u32` version, a JSON header
//! describing the layers and kind, the raw little-endian `f64` parameters,
//! and a trailing CRC-32.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureSelector, GroupSource, Model, ModelKind, StaticTable};
use crate::diff::{Layer, LayerKind, Tensor};
use crate::error::{GgdError, Result};

const MAGIC: &[u8; 4] = b"GGDM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
enum KindHeader {
    Base,
    LowCapacity,
    ExplicitFeature { selector: FeatureSelector },
    SelfEnsemble { of: Box<KindHeader> },
    StaticDistribution { source: GroupSource, groups: Vec<usize> },
}

impl KindHeader {
    fn of(kind: &ModelKind) -> Self {
        match kind {
            ModelKind::Base => KindHeader::Base,
            ModelKind::LowCapacity => KindHeader::LowCapacity,
            ModelKind::ExplicitFeature { selector } => KindHeader::ExplicitFeature {
                selector: selector.clone(),
            },
            ModelKind::SelfEnsemble { of } => KindHeader::SelfEnsemble {
                of: Box::new(KindHeader::of(of)),
            },
            ModelKind::StaticDistribution(t) => KindHeader::StaticDistribution {
                source: t.source,
                groups: t.groups.keys().copied().collect(),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerHeader {
    kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    shapes: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: KindHeader,
    num_classes: usize,
    input_signature: Vec<usize>,
    layers: Vec<LayerHeader>,
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let header = Header {
        kind: KindHeader::of(model.kind()),
        num_classes: model.num_classes(),
        input_signature: model.input_signature().to_vec(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerHeader {
                kind: l.kind(),
                stride: match l {
                    Layer::Conv2d { stride, .. } => Some(*stride),
                    _ => None,
                },
                shapes: l.params().iter().map(|p| p.shape().to_vec()).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut put = |values: &[f64]| {
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for p in model.params() {
        put(p.data());
    }
    if let ModelKind::StaticDistribution(t) = model.kind() {
        put(&[t.epsilon]);
        put(&t.prior);
        for row in t.groups.values() {
            put(row);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| GgdError::Truncated("checkpoint ends early".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| GgdError::Format("size overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor> {
        let data = self.f64s(shape.iter().product())?;
        Tensor::new(shape.to_vec(), data).map_err(|e| GgdError::Format(e.to_string()))
    }
}

fn rebuild_kind(h: KindHeader, r: &mut Reader, classes: usize) -> Result<ModelKind> {
    Ok(match h {
        KindHeader::Base => ModelKind::Base,
        KindHeader::LowCapacity => ModelKind::LowCapacity,
        KindHeader::ExplicitFeature { selector } => ModelKind::ExplicitFeature { selector },
        KindHeader::SelfEnsemble { of } => ModelKind::SelfEnsemble {
            of: Box::new(rebuild_kind(*of, r, classes)?),
        },
        KindHeader::StaticDistribution { source, groups } => {
            let epsilon = r.f64s(1)?[0];
            let prior = r.f64s(classes)?;
            let mut rows = BTreeMap::new();
            for g in groups {
                rows.insert(g, r.f64s(classes)?);
            }
            ModelKind::StaticDistribution(StaticTable {
                source,
                epsilon,
                groups: rows,
                prior,
            })
        }
    })
}

fn rebuild_layer(h: &LayerHeader, r: &mut Reader) -> Result<Layer> {
    let want = match h.kind {
        LayerKind::Linear | LayerKind::Conv2d | LayerKind::ChannelAffine => 2,
        LayerKind::Relu | LayerKind::GlobalAvgPool => 0,
    };
    if h.shapes.len() != want {
        return Err(GgdError::Format(format!(
            "{:?} layer lists {} parameter shapes",
            h.kind,
            h.shapes.len()
        )));
    }
    Ok(match h.kind {
        LayerKind::Linear => Layer::Linear {
            weight: r.tensor(&h.shapes[0])?,
            bias: r.tensor(&h.shapes[1])?,
        },
        LayerKind::Conv2d => Layer::Conv2d {
            weight: r.tensor(&h.shapes[0])?,
            bias: r.tensor(&h.shapes[1])?,
            stride: h
                .stride
                .filter(|&s| s > 0)
                .ok_or_else(|| GgdError::Format("conv layer without stride".into()))?,
        },
        LayerKind::ChannelAffine => Layer::ChannelAffine {
            scale: r.tensor(&h.shapes[0])?,
            shift: r.tensor(&h.shapes[1])?,
        },
        LayerKind::Relu => Layer::Relu,
        LayerKind::GlobalAvgPool => Layer::GlobalAvgPool,
    })
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 16 {
        return Err(GgdError::Format("checkpoint too short".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(GgdError::Format("not a model checkpoint (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
        return Err(GgdError::Format("checkpoint checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(GgdError::Format(format!(
            "checkpoint version {version}, expected {VERSION}"
        )));
    }
    let header_len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| GgdError::Format(format!("checkpoint header: {e}")))?;
    let layers = header
        .layers
        .iter()
        .map(|h| rebuild_layer(h, &mut r))
        .collect::<Result<Vec<_>>>()?;
    let kind = rebuild_kind(header.kind, &mut r, header.num_classes)?;
    if r.pos != body.len() {
        return Err(GgdError::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok(Model::from_parts(
        layers,
        kind,
        header.input_signature,
        header.num_classes,
    ))
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_bytes(&fs::read(path)?)
}
