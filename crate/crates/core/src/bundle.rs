//! Model bundles: a directory with `model.json` and `model.bin`.
//!
//! `model.bin` is the magic `MEKRR1\0`, the `T` coefficients as
//! little-endian `f64`, then the retained training feature sets in the FEAT1
//! frame layout. `model.json` carries everything else plus the SHA-256 of
//! the blob.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, SpeciesId, SpeciesTable};
use crate::error::{Error, Result};
use crate::feat1::{decode_frames, encode_frames, sha256_hex};
use crate::featurize::DescriptorParams;
use crate::kernels::KernelSpec;
use crate::krr::FittedModel;
use crate::transform::LabelTransform;

pub const MODEL_MAGIC: &[u8; 7] = b"MEKRR1\0";
pub const MODEL_VERSION: u32 = 1;
pub const MODEL_JSON: &str = "model.json";
pub const MODEL_BIN: &str = "model.bin";

/// A fitted model together with the descriptor that produced its features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: FittedModel,
    pub descriptor: Option<DescriptorParams>,
    pub provenance: String,
}

impl ModelBundle {
    pub fn new(model: FittedModel, descriptor: Option<DescriptorParams>, provenance: impl Into<String>) -> Self {
        ModelBundle {
            model,
            descriptor,
            provenance: provenance.into(),
        }
    }
}

/// On-disk metadata; public so tools can inspect a bundle without decoding the blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format: String,
    pub version: u32,
    pub spec: KernelSpec,
    pub lambda: f64,
    pub effective_lambda: f64,
    pub sigma: Option<f64>,
    pub label_transform: LabelTransform,
    pub species: SpeciesTable,
    pub n_train: usize,
    pub d: usize,
    pub atom_counts: Vec<usize>,
    pub train_species: Vec<Vec<SpeciesId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptor: Option<DescriptorParams>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub provenance: String,
    pub sha256: String,
}

fn encode_blob(m: &FittedModel) -> Vec<u8> {
    let mut out = MODEL_MAGIC.to_vec();
    for c in &m.coefficients {
        out.extend_from_slice(&c.to_le_bytes());
    }
    encode_frames(&m.train_sets, &mut out);
    out
}

pub fn save_model(bundle: &ModelBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let m = &bundle.model;
    let blob = encode_blob(m);
    let meta = ModelMeta {
        format: "MEKRR1".into(),
        version: MODEL_VERSION,
        spec: m.spec,
        lambda: m.lambda,
        effective_lambda: m.effective_lambda,
        sigma: m.sigma(),
        label_transform: m.label_transform.clone(),
        species: m.species.clone(),
        n_train: m.n_train(),
        d: m.feature_dim(),
        atom_counts: m.train_sets.iter().map(FeatureSet::n_atoms).collect(),
        train_species: m.train_sets.iter().map(|s| s.species().to_vec()).collect(),
        descriptor: bundle.descriptor.clone(),
        warnings: m.warnings.clone(),
        provenance: bundle.provenance.clone(),
        sha256: sha256_hex(&blob),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bin = dir.join(MODEL_BIN);
    std::fs::write(&bin, &blob).map_err(|e| Error::io(&bin, e))?;
    let json = dir.join(MODEL_JSON);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    std::fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))
}

/// Read and validate `model.json` only.
pub fn read_meta(dir: impl AsRef<Path>) -> Result<ModelMeta> {
    let path = dir.as_ref().join(MODEL_JSON);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        None => return Err(Error::Format("model.json has no version".into())),
        Some(v) if v != u64::from(MODEL_VERSION) => {
            return Err(Error::VersionMismatch {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                supported: MODEL_VERSION,
            })
        }
        Some(_) => {}
    }
    let meta: ModelMeta =
        serde_json::from_value(value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if meta.format != "MEKRR1" {
        return Err(Error::Format(format!("unexpected format tag `{}`", meta.format)));
    }
    if meta.atom_counts.len() != meta.n_train || meta.train_species.len() != meta.n_train {
        return Err(Error::Format("training frame counts disagree".into()));
    }
    Ok(meta)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<ModelBundle> {
    let dir = dir.as_ref();
    let meta = read_meta(dir)?;
    let bin = dir.join(MODEL_BIN);
    let blob = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if !blob.starts_with(MODEL_MAGIC) {
        return Err(Error::Format("missing MEKRR1 magic".into()));
    }
    let t = meta.n_train;
    let coef_end = MODEL_MAGIC.len() + 8 * t;
    let coef_bytes = blob
        .get(MODEL_MAGIC.len()..coef_end)
        .ok_or_else(|| Error::Format("blob truncated in coefficients".into()))?;
    let (frames, used) = decode_frames(&blob[coef_end..], &meta.atom_counts, meta.d)?;
    if coef_end + used != blob.len() {
        return Err(Error::Format("trailing bytes after last frame".into()));
    }
    let computed = sha256_hex(&blob);
    if computed != meta.sha256 {
        return Err(Error::Checksum {
            expected: meta.sha256,
            computed,
        });
    }
    let coefficients = coef_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let train_sets = frames
        .into_iter()
        .zip(meta.train_species)
        .map(|(f, s)| FeatureSet::new(f, meta.d, s))
        .collect::<Result<Vec<_>>>()?;
    meta.spec.validate()?;
    let model = FittedModel {
        coefficients,
        train_sets,
        spec: meta.spec,
        species: meta.species,
        lambda: meta.lambda,
        effective_lambda: meta.effective_lambda,
        label_transform: meta.label_transform,
        warnings: meta.warnings,
    };
    Ok(ModelBundle {
        model,
        descriptor: meta.descriptor,
        provenance: meta.provenance,
    })
}
