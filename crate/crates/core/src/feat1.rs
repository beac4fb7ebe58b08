//! FEAT1 feature bundles.
//!
//! A bundle is a directory holding `index.json` and `features.bin`. The blob
//! is the magic `FEAT1\0` followed, per frame, by a little-endian `u32` atom
//! count and `n·d` little-endian `f64` values in row-major order. The index
//! records the species table, `d`, per-frame atom counts and the SHA-256 of
//! the blob; per-atom species, energies and provenance are optional extras.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{FeatureSet, LabeledDataset, Samples, SpeciesId, SpeciesTable};
use crate::error::{Error, Result};

pub const FEAT1_MAGIC: &[u8; 6] = b"FEAT1\0";
pub const FEAT1_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";
pub const BLOB_FILE: &str = "features.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feat1Index {
    pub format: String,
    pub version: u32,
    pub species: SpeciesTable,
    pub d: usize,
    pub atom_counts: Vec<usize>,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_species: Option<Vec<Vec<SpeciesId>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub provenance: String,
}

/// Decoded contents of a FEAT1 bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub species: SpeciesTable,
    pub dim: usize,
    /// Row-major `n × d` values per frame.
    pub frames: Vec<Vec<f64>>,
    pub frame_species: Option<Vec<Vec<SpeciesId>>>,
    pub energies: Option<Vec<Option<f64>>>,
    pub provenance: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Append the frame section (no magic) for `sets` to `out`.
pub(crate) fn encode_frames(sets: &[FeatureSet], out: &mut Vec<u8>) {
    for s in sets {
        out.extend_from_slice(&(s.n_atoms() as u32).to_le_bytes());
        for x in s.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

/// Read `counts.len()` frames of width `dim` from `bytes`, returning the frames
/// and the number of bytes consumed.
pub(crate) fn decode_frames(bytes: &[u8], counts: &[usize], dim: usize) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut pos = 0;
    let mut frames = Vec::with_capacity(counts.len());
    for (t, &expected) in counts.iter().enumerate() {
        let head = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| Error::Format(format!("blob truncated at frame {t} header")))?;
        let n = u32::from_le_bytes(head.try_into().unwrap()) as usize;
        pos += 4;
        if n != expected {
            return Err(Error::Format(format!(
                "frame {t}: blob has {n} atoms, index says {expected}"
            )));
        }
        let len = n * dim * 8;
        let body = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::Format(format!("blob truncated in frame {t}")))?;
        frames.push(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
        pos += len;
    }
    Ok((frames, pos))
}

impl FeatureBundle {
    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        let sets = ds.feature_sets()?;
        let mut b = FeatureBundle::from_sets(ds.species().clone(), &sets, ds.provenance.clone());
        b.energies = Some(ds.configurations().map(|c| c.energy).collect());
        Ok(b)
    }

    pub fn from_sets(species: SpeciesTable, sets: &[FeatureSet], provenance: String) -> Self {
        FeatureBundle {
            species,
            dim: sets.first().map_or(0, FeatureSet::dim),
            frames: sets.iter().map(|s| s.data().to_vec()).collect(),
            frame_species: Some(sets.iter().map(|s| s.species().to_vec()).collect()),
            energies: None,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn atom_counts(&self) -> Vec<usize> {
        self.frames
            .iter()
            .map(|f| f.len().checked_div(self.dim).unwrap_or(0))
            .collect()
    }

    pub fn blob(&self) -> Vec<u8> {
        let mut out = FEAT1_MAGIC.to_vec();
        for f in &self.frames {
            let n = f.len().checked_div(self.dim).unwrap_or(0);
            out.extend_from_slice(&(n as u32).to_le_bytes());
            for x in f {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn index(&self, blob: &[u8]) -> Feat1Index {
        Feat1Index {
            format: "FEAT1".into(),
            version: FEAT1_VERSION,
            species: self.species.clone(),
            d: self.dim,
            atom_counts: self.atom_counts(),
            sha256: sha256_hex(blob),
            frame_species: self.frame_species.clone(),
            energies: self.energies.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let blob = self.blob();
        let index = serde_json::to_string_pretty(&self.index(&blob)).expect("index serializes");
        let blob_path = dir.join(BLOB_FILE);
        std::fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
        let index_path = dir.join(INDEX_FILE);
        std::fs::write(&index_path, index + "\n").map_err(|e| Error::io(&index_path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let index_path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
        let index: Feat1Index =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", index_path.display())))?;
        if index.format != "FEAT1" {
            return Err(Error::Format(format!("unexpected format tag `{}`", index.format)));
        }
        if index.version > FEAT1_VERSION {
            return Err(Error::VersionMismatch {
                found: index.version,
                supported: FEAT1_VERSION,
            });
        }
        let blob_path = dir.join(BLOB_FILE);
        let blob = std::fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        if !blob.starts_with(FEAT1_MAGIC) {
            return Err(Error::Format("missing FEAT1 magic".into()));
        }
        let (frames, used) = decode_frames(&blob[FEAT1_MAGIC.len()..], &index.atom_counts, index.d)?;
        if FEAT1_MAGIC.len() + used != blob.len() {
            return Err(Error::Format("trailing bytes after last frame".into()));
        }
        let computed = sha256_hex(&blob);
        if computed != index.sha256 {
            return Err(Error::Checksum {
                expected: index.sha256,
                computed,
            });
        }
        let n = index.atom_counts.len();
        if let Some(fs) = &index.frame_species {
            if fs.len() != n {
                return Err(Error::Format("frame_species length differs from frame count".into()));
            }
            for (s, &c) in fs.iter().zip(&index.atom_counts) {
                if s.len() != c {
                    return Err(Error::Format("frame_species entry differs from atom count".into()));
                }
                if let Some(bad) = s.iter().find(|id| !index.species.contains(**id)) {
                    return Err(Error::UnknownSpecies {
                        id: bad.0,
                        count: index.species.len(),
                    });
                }
            }
        }
        if index.energies.as_ref().is_some_and(|e| e.len() != n) {
            return Err(Error::Format("energies length differs from frame count".into()));
        }
        Ok(FeatureBundle {
            species: index.species,
            dim: index.d,
            frames,
            frame_species: index.frame_species,
            energies: index.energies,
            provenance: index.provenance,
        })
    }

    /// Feature sets using the species lists recorded in the bundle.
    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>> {
        let species = self
            .frame_species
            .as_ref()
            .ok_or_else(|| Error::Format("bundle has no per-atom species; attach it to configurations".into()))?;
        self.frames
            .iter()
            .zip(species)
            .map(|(f, s)| FeatureSet::new(f.clone(), self.dim, s.clone()))
            .collect()
    }

    /// Labeled samples straight from the bundle (requires species and energies).
    pub fn samples(&self) -> Result<Samples> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let energies = self
            .energies
            .as_ref()
            .ok_or_else(|| Error::Format("bundle carries no energies".into()))?
            .iter()
            .enumerate()
            .map(|(index, e)| e.ok_or(Error::MissingEnergy { index }))
            .collect::<Result<Vec<_>>>()?;
        Samples::new(self.species.clone(), self.feature_sets()?, energies)
    }

    /// Attach these features to `ds`, checking frame and atom counts.
    pub fn attach(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        if self.len() != ds.len() {
            return Err(Error::DimensionMismatch {
                expected: ds.len(),
                found: self.len(),
            });
        }
        let ds = if self.species != *ds.species() {
            ds.remap_species(&self.species.union(ds.species()))?
        } else {
            ds.clone()
        };
        let mut sets = Vec::with_capacity(self.len());
        for (t, (f, e)) in self.frames.iter().zip(ds.entries()).enumerate() {
            let n = f.len().checked_div(self.dim).unwrap_or(0);
            if n != e.config.n_atoms() {
                return Err(Error::DimensionMismatch {
                    expected: e.config.n_atoms(),
                    found: n,
                });
            }
            if let Some(fs) = &self.frame_species {
                if fs[t] != e.config.species {
                    return Err(Error::Format(format!("frame {t}: species disagree with configuration")));
                }
            }
            sets.push(FeatureSet::new(f.clone(), self.dim, e.config.species.clone())?);
        }
        ds.with_features(sets)
    }
}

/// Write a featurized dataset as a FEAT1 bundle.
pub fn write_features(ds: &LabeledDataset, dir: impl AsRef<Path>) -> Result<()> {
    if ds.is_empty() {
        return FeatureBundle {
            species: ds.species().clone(),
            dim: 0,
            frames: vec![],
            frame_species: Some(vec![]),
            energies: Some(vec![]),
            provenance: ds.provenance.clone(),
        }
        .write(dir);
    }
    FeatureBundle::from_dataset(ds)?.write(dir)
}

/// Load a FEAT1 bundle and attach it to the matching configurations.
pub fn load_features(dir: impl AsRef<Path>, configs: &LabeledDataset) -> Result<LabeledDataset> {
    FeatureBundle::read(dir)?.attach(configs)
}
