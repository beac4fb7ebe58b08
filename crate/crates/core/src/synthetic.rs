//! Synthetic datasets: a two-species toy potential on random periodic
//! configurations, and a two-regime trajectory for clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Cell, Configuration, LabeledDataset, SpeciesId, SpeciesTable};
use crate::error::{Error, Result};
use crate::featurize::{cosine_cutoff, Images};

/// Species-pair Morse terms with a cosine cutoff plus per-species self energies.
///
/// `E = Σ_i ε_{z_i} + Σ_{i<j} D_{z_i z_j} [(1 − e^{−a(r_ij − r_0)})² − 1] f_c(r_ij)`
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPotential {
    pub self_energy: [f64; 2],
    pub depth: [[f64; 2]; 2],
    pub stiffness: f64,
    pub r0: f64,
    pub cutoff: f64,
}

impl Default for ToyPotential {
    fn default() -> Self {
        ToyPotential {
            self_energy: [-3.2, -1.7],
            depth: [[0.35, 0.5], [0.5, 0.2]],
            stiffness: 1.4,
            r0: 2.4,
            cutoff: 4.0,
        }
    }
}

impl ToyPotential {
    pub fn species_table() -> SpeciesTable {
        SpeciesTable::new(vec!["A".into(), "B".into()]).expect("two distinct symbols")
    }

    pub fn pair(&self, a: SpeciesId, b: SpeciesId, r: f64) -> f64 {
        let m = 1.0 - (-self.stiffness * (r - self.r0)).exp();
        self.depth[a.index()][b.index()] * (m * m - 1.0) * cosine_cutoff(r, self.cutoff)
    }

    pub fn energy(&self, c: &Configuration) -> Result<f64> {
        let images = Images::new(&c.cell, self.cutoff)?;
        let mut e: f64 = c.species.iter().map(|s| self.self_energy[s.index()]).sum();
        for i in 0..c.n_atoms() {
            for j in i + 1..c.n_atoms() {
                let r = images.distance(c.positions[i], c.positions[j]);
                e += self.pair(c.species[i], c.species[j], r);
            }
        }
        Ok(e)
    }
}

/// Random configurations in a fixed orthorhombic periodic cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFamily {
    pub lengths: [f64; 3],
    pub atoms: usize,
    /// Probability that an atom is species B.
    pub fraction_b: f64,
    pub min_distance: f64,
}

impl CellFamily {
    pub fn small() -> Self {
        CellFamily {
            lengths: [8.5, 8.5, 8.5],
            atoms: 12,
            fraction_b: 0.4,
            min_distance: 1.9,
        }
    }

    /// Twice the small cell along x with twice the atoms.
    pub fn doubled(self) -> Self {
        CellFamily {
            lengths: [2.0 * self.lengths[0], self.lengths[1], self.lengths[2]],
            atoms: 2 * self.atoms,
            ..self
        }
    }

    fn cell(&self) -> Cell {
        Cell::orthorhombic(self.lengths[0], self.lengths[1], self.lengths[2])
    }
}

const MAX_PLACEMENT_TRIES: usize = 10_000;

pub fn random_configuration(rng: &mut impl Rng, family: &CellFamily) -> Result<Configuration> {
    let cell = family.cell();
    let wrap = |a: [f64; 3], b: [f64; 3]| {
        let mut d2 = 0.0;
        for k in 0..3 {
            let l = family.lengths[k];
            let x = b[k] - a[k];
            let x = x - l * (x / l).round();
            d2 += x * x;
        }
        d2.sqrt()
    };
    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(family.atoms);
    let mut tries = 0;
    while positions.len() < family.atoms {
        tries += 1;
        if tries > MAX_PLACEMENT_TRIES * family.atoms {
            return Err(Error::InvalidParameter(
                "could not place atoms at the requested minimum distance".into(),
            ));
        }
        let p = [
            rng.random_range(0.0..family.lengths[0]),
            rng.random_range(0.0..family.lengths[1]),
            rng.random_range(0.0..family.lengths[2]),
        ];
        if positions.iter().all(|&q| wrap(p, q) >= family.min_distance) {
            positions.push(p);
        }
    }
    let species = (0..family.atoms)
        .map(|_| SpeciesId(if rng.random_bool(family.fraction_b) { 2 } else { 1 }))
        .collect();
    Ok(Configuration::new(positions, species, cell, None))
}

/// `count` labeled configurations from `family`, energies from `potential`.
pub fn generate_family(
    potential: &ToyPotential,
    family: &CellFamily,
    count: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = (0..count)
        .map(|_| {
            let mut c = random_configuration(&mut rng, family)?;
            c.energy = Some(potential.energy(&c)?);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::from_configurations(
        configs,
        ToyPotential::species_table(),
        format!(
            "toy potential, {} atoms in {:?} cell, seed {seed}",
            family.atoms, family.lengths
        ),
    )
}

/// A vacuum trajectory of a B₂ molecule over a planar A cluster. The
/// molecule is bound for frames `< switch` and dissociated afterwards; all
/// positions carry Gaussian thermal noise.
pub fn reactive_trajectory(frames: usize, switch: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut surface = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            surface.push([2.5 * i as f64, 2.5 * j as f64, 0.0]);
        }
    }
    let configs = (0..frames)
        .map(|t| {
            let half = if t < switch { 0.55 } else { 1.6 };
            let height = if t < switch { 3.0 } else { 1.8 };
            let mut positions = surface.clone();
            positions.push([2.5 - half, 2.5, height]);
            positions.push([2.5 + half, 2.5, height]);
            for p in positions.iter_mut() {
                for x in p.iter_mut() {
                    *x += normal.sample(&mut rng);
                }
            }
            let mut species = vec![SpeciesId(1); surface.len()];
            species.extend([SpeciesId(2), SpeciesId(2)]);
            Configuration::new(positions, species, Cell::vacuum(), None)
        })
        .collect();
    LabeledDataset::from_configurations(
        configs,
        ToyPotential::species_table(),
        format!("two-regime trajectory, switch at {switch}, seed {seed}"),
    )
}
