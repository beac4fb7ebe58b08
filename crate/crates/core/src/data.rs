//! Configurations, species tables, per-atom feature sets and datasets.
//!
//! Species are dense integer ids `1..=S` backed by a [`SpeciesTable`] of
//! chemical symbols. Energies are stored in eV; lengths in Å.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-based species identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeciesId(pub u32);

impl SpeciesId {
    /// Zero-based slot, for indexing per-species arrays.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

#[derive(Serialize, Deserialize)]
struct SpeciesEntry {
    id: u32,
    symbol: String,
}

/// Ordered list of chemical symbols; symbol `k` (zero-based) has id `k + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SpeciesTable {
    symbols: Vec<String>,
}

impl SpeciesTable {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate species symbol `{s}`")));
            }
        }
        Ok(SpeciesTable { symbols })
    }

    /// Sorted, deduplicated table built from arbitrary symbols.
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v: Vec<String> = symbols.into_iter().map(|s| s.as_ref().to_string()).collect();
        v.sort();
        v.dedup();
        SpeciesTable { symbols: v }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<SpeciesId> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .map(|k| SpeciesId(k as u32 + 1))
    }

    pub fn symbol(&self, id: SpeciesId) -> Option<&str> {
        if id.0 == 0 {
            return None;
        }
        self.symbols.get(id.index()).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn ids(&self) -> impl Iterator<Item = SpeciesId> {
        (1..=self.symbols.len() as u32).map(SpeciesId)
    }

    pub fn contains(&self, id: SpeciesId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.symbols.len()
    }

    /// Table containing every symbol of `self` followed by any new ones from `other`.
    pub fn union(&self, other: &SpeciesTable) -> SpeciesTable {
        let mut symbols = self.symbols.clone();
        for s in &other.symbols {
            if !symbols.contains(s) {
                symbols.push(s.clone());
            }
        }
        SpeciesTable { symbols }
    }
}

impl Serialize for SpeciesTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<SpeciesEntry> = self
            .symbols
            .iter()
            .enumerate()
            .map(|(k, s)| SpeciesEntry {
                id: k as u32 + 1,
                symbol: s.clone(),
            })
            .collect();
        entries.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpeciesTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let mut entries = Vec::<SpeciesEntry>::deserialize(deserializer)?;
        entries.sort_by_key(|e| e.id);
        for (k, e) in entries.iter().enumerate() {
            if e.id as usize != k + 1 {
                return Err(serde::de::Error::custom("species ids must be 1..S without gaps"));
            }
        }
        SpeciesTable::new(entries.into_iter().map(|e| e.symbol).collect()).map_err(serde::de::Error::custom)
    }
}

/// Simulation cell: three lattice vectors (rows) and per-axis periodicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub vectors: [[f64; 3]; 3],
    pub pbc: [bool; 3],
}

impl Default for Cell {
    fn default() -> Self {
        Cell::vacuum()
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl Cell {
    pub fn vacuum() -> Self {
        Cell {
            vectors: [[0.0; 3]; 3],
            pbc: [false; 3],
        }
    }

    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Self {
        Cell {
            vectors: [[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]],
            pbc: [true; 3],
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.pbc.iter().any(|&p| p)
    }

    pub fn determinant(&self) -> f64 {
        let [a, b, c] = self.vectors;
        dot(a, cross(b, c))
    }

    /// True when the lattice vectors span 3-space (relative tolerance 1e-12).
    pub fn is_nonsingular(&self) -> bool {
        let [a, b, c] = self.vectors;
        let scale = norm(a) * norm(b) * norm(c);
        scale > 0.0 && self.determinant().abs() > 1e-12 * scale
    }

    /// Distance between opposite faces along each lattice direction.
    pub fn perpendicular_widths(&self) -> [f64; 3] {
        let [a, b, c] = self.vectors;
        let vol = self.determinant().abs();
        let w = |u: [f64; 3], v: [f64; 3]| {
            let area = norm(cross(u, v));
            if area > 0.0 {
                vol / area
            } else {
                0.0
            }
        };
        [w(b, c), w(c, a), w(a, b)]
    }

    /// Inverse of the row-vector lattice matrix, so that `frac = cart · inv`.
    pub(crate) fn inverse(&self) -> Option<[[f64; 3]; 3]> {
        if !self.is_nonsingular() {
            return None;
        }
        let [a, b, c] = self.vectors;
        let det = self.determinant();
        let bc = cross(b, c);
        let ca = cross(c, a);
        let ab = cross(a, b);
        // columns of the inverse are the reciprocal vectors
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            inv[i][0] = bc[i] / det;
            inv[i][1] = ca[i] / det;
            inv[i][2] = ab[i] / det;
        }
        Some(inv)
    }
}

/// One atomic snapshot: positions, species, cell and an optional energy label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub positions: Vec<[f64; 3]>,
    pub species: Vec<SpeciesId>,
    pub cell: Cell,
    pub energy: Option<f64>,
}

impl Configuration {
    pub fn new(positions: Vec<[f64; 3]>, species: Vec<SpeciesId>, cell: Cell, energy: Option<f64>) -> Self {
        Configuration {
            positions,
            species,
            cell,
            energy,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    /// Per-species atom counts, indexed by zero-based species slot.
    pub fn composition(&self, species_count: usize) -> Vec<usize> {
        composition(&self.species, species_count)
    }
}

pub(crate) fn composition(species: &[SpeciesId], species_count: usize) -> Vec<usize> {
    let mut counts = vec![0usize; species_count];
    for s in species {
        if let Some(c) = counts.get_mut(s.index()) {
            *c += 1;
        }
    }
    counts
}

/// Check every structural invariant of `c` against the species table.
pub fn validate_configuration(c: &Configuration, table: &SpeciesTable) -> Result<()> {
    if c.positions.is_empty() {
        return Err(Error::InvalidParameter("configuration has no atoms".into()));
    }
    if c.species.len() != c.positions.len() {
        return Err(Error::DimensionMismatch {
            expected: c.positions.len(),
            found: c.species.len(),
        });
    }
    for &s in &c.species {
        if !table.contains(s) {
            return Err(Error::UnknownSpecies {
                id: s.0,
                count: table.len(),
            });
        }
    }
    for (atom, p) in c.positions.iter().enumerate() {
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteCoordinate { atom });
        }
    }
    if c.cell.is_periodic() && !c.cell.is_nonsingular() {
        return Err(Error::SingularCell);
    }
    Ok(())
}

/// Per-atom representation: an `n × d` row-major matrix aligned with species ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    data: Vec<f64>,
    dim: usize,
    species: Vec<SpeciesId>,
}

impl FeatureSet {
    pub fn new(data: Vec<f64>, dim: usize, species: Vec<SpeciesId>) -> Result<Self> {
        if data.len() != dim * species.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * species.len(),
                found: data.len(),
            });
        }
        Ok(FeatureSet { data, dim, species })
    }

    pub fn from_rows(rows: &[Vec<f64>], species: Vec<SpeciesId>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.len() != species.len() {
            return Err(Error::DimensionMismatch {
                expected: species.len(),
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureSet { data, dim, species })
    }

    pub fn n_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn species(&self) -> &[SpeciesId] {
        &self.species
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_atoms()).map(move |i| self.row(i))
    }

    /// Number of rows carrying species `s`.
    pub fn count_of(&self, s: SpeciesId) -> usize {
        self.species.iter().filter(|&&x| x == s).count()
    }

    /// Rows reordered so that output row `i` is input row `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FeatureSet {
        let mut data = Vec::with_capacity(self.data.len());
        let mut species = Vec::with_capacity(self.species.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
            species.push(self.species[p]);
        }
        FeatureSet {
            data,
            dim: self.dim,
            species,
        }
    }

    /// Concatenation of `k` copies, the features of `k` non-interacting replicas.
    pub fn repeated(&self, k: usize) -> FeatureSet {
        FeatureSet {
            data: self.data.repeat(k),
            dim: self.dim,
            species: self.species.repeat(k),
        }
    }

    /// Row-wise concatenation of several sets with a common dimension.
    pub fn concat(sets: &[&FeatureSet]) -> Result<FeatureSet> {
        let dim = sets.first().map_or(0, |s| s.dim);
        let mut data = Vec::new();
        let mut species = Vec::new();
        for s in sets {
            if s.dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim,
                });
            }
            data.extend_from_slice(&s.data);
            species.extend_from_slice(&s.species);
        }
        Ok(FeatureSet { data, dim, species })
    }
}

/// A configuration together with its (optional) per-atom features.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub config: Configuration,
    pub features: Option<FeatureSet>,
}

/// A list of configurations sharing one species table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    entries: Vec<Entry>,
    species: SpeciesTable,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(entries: Vec<Entry>, species: SpeciesTable, provenance: impl Into<String>) -> Result<Self> {
        let featurized = entries.iter().filter(|e| e.features.is_some()).count();
        if featurized != 0 && featurized != entries.len() {
            return Err(Error::InvalidParameter(
                "features must be present for all entries or none".into(),
            ));
        }
        let mut dim = None;
        for e in &entries {
            validate_configuration(&e.config, &species)?;
            if let Some(f) = &e.features {
                if f.n_atoms() != e.config.n_atoms() {
                    return Err(Error::DimensionMismatch {
                        expected: e.config.n_atoms(),
                        found: f.n_atoms(),
                    });
                }
                match dim {
                    None => dim = Some(f.dim()),
                    Some(d) if d != f.dim() => {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            found: f.dim(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(LabeledDataset {
            entries,
            species,
            provenance: provenance.into(),
        })
    }

    pub fn from_configurations(
        configs: Vec<Configuration>,
        species: SpeciesTable,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let entries = configs
            .into_iter()
            .map(|config| Entry { config, features: None })
            .collect();
        LabeledDataset::new(entries, species, provenance)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn species(&self) -> &SpeciesTable {
        &self.species
    }

    pub fn is_featurized(&self) -> bool {
        !self.entries.is_empty() && self.entries[0].features.is_some()
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        self.entries.iter().map(|e| &e.config)
    }

    pub fn energies(&self) -> Result<Vec<f64>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(index, e)| e.config.energy.ok_or(Error::MissingEnergy { index }))
            .collect()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            species: self.species.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Replace every entry's features; lengths and atom counts must match.
    pub fn with_features(&self, features: Vec<FeatureSet>) -> Result<LabeledDataset> {
        if features.len() != self.entries.len() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.len(),
                found: features.len(),
            });
        }
        let entries = self
            .entries
            .iter()
            .zip(features)
            .map(|(e, f)| Entry {
                config: e.config.clone(),
                features: Some(f),
            })
            .collect();
        LabeledDataset::new(entries, self.species.clone(), self.provenance.clone())
    }

    /// Re-express species ids against `table`, matching by chemical symbol.
    pub fn remap_species(&self, table: &SpeciesTable) -> Result<LabeledDataset> {
        let map: Vec<SpeciesId> = self
            .species
            .symbols()
            .iter()
            .map(|s| table.id(s).ok_or_else(|| Error::UnknownSymbol(s.clone())))
            .collect::<Result<_>>()?;
        let remap = |ids: &[SpeciesId]| ids.iter().map(|s| map[s.index()]).collect::<Vec<_>>();
        let entries = self
            .entries
            .iter()
            .map(|e| {
                let mut config = e.config.clone();
                config.species = remap(&config.species);
                let features = e.features.as_ref().map(|f| FeatureSet {
                    data: f.data.clone(),
                    dim: f.dim,
                    species: remap(&f.species),
                });
                Entry { config, features }
            })
            .collect();
        LabeledDataset::new(entries, table.clone(), self.provenance.clone())
    }

    /// Labeled feature sets ready for regression.
    pub fn samples(&self) -> Result<Samples> {
        if self.entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let sets = self.feature_sets()?;
        Ok(Samples {
            species: self.species.clone(),
            sets,
            energies: self.energies()?,
        })
    }

    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>> {
        self.entries
            .iter()
            .map(|e| {
                e.features
                    .clone()
                    .ok_or_else(|| Error::InvalidParameter("dataset is not featurized".into()))
            })
            .collect()
    }
}

/// Feature sets with energy labels: the regression-side view of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub species: SpeciesTable,
    pub sets: Vec<FeatureSet>,
    pub energies: Vec<f64>,
}

impl Samples {
    pub fn new(species: SpeciesTable, sets: Vec<FeatureSet>, energies: Vec<f64>) -> Result<Self> {
        if sets.len() != energies.len() {
            return Err(Error::LengthMismatch {
                left: energies.len(),
                right: sets.len(),
            });
        }
        Ok(Samples {
            species,
            sets,
            energies,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Samples {
        Samples {
            species: self.species.clone(),
            sets: indices.iter().map(|&i| self.sets[i].clone()).collect(),
            energies: indices.iter().map(|&i| self.energies[i]).collect(),
        }
    }
}

/// Train/validation/test fractions.
pub type SplitRatios = [f64; 3];

/// Default train/validation/test split: 60/20/20.
pub const DEFAULT_SPLIT: SplitRatios = [0.6, 0.2, 0.2];

/// Seeded random partition of `0..len` into three sorted index lists.
///
/// Validation and test receive `floor(ratio · len)` items; the remainder goes
/// to train.
pub fn split_indices(len: usize, ratios: SplitRatios, seed: u64) -> Result<[Vec<usize>; 3]> {
    if len == 0 {
        return Err(Error::EmptyDataset);
    }
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| !(r > 0.0) || !r.is_finite()) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadRatios(ratios));
    }
    let alloc = |r: f64| ((r * len as f64) + 1e-9).floor() as usize;
    let n_val = alloc(ratios[1]);
    let n_test = alloc(ratios[2]);
    let n_train = len - n_val - n_test;

    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok([train, val, test])
}

/// Split a dataset into (train, validation, test).
pub fn split_dataset(
    ds: &LabeledDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, LabeledDataset)> {
    let [a, b, c] = split_indices(ds.len(), ratios, seed)?;
    Ok((ds.select(&a), ds.select(&b), ds.select(&c)))
}
