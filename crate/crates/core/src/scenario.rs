//! Static environment: terrain heightmap, forest and tower placement.
//!
//! Everything here is a pure function of [`ScenarioConfig`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::noise::GradientNoise;
use crate::rng::{self, tag};
use crate::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_WORLD_EXTENT: f64 = 1000.0;
/// Terrain amplitude per difficulty level, in meters.
pub const AMPLITUDE_PER_LEVEL: f64 = 20.0;
/// Tree line as a fraction of the maximum possible height.
pub const TREE_LINE_FRACTION: f64 = 0.6;
/// Side of one forest placement slot; at most one tree per slot.
pub const TREE_SLOT: f64 = 8.0;
/// Density at the tree line relative to sea level.
const DENSITY_AT_TREE_LINE: f64 = 0.8;
/// Trees sit within this fraction of the slot around its centre.
const TREE_JITTER: f64 = 0.5;
/// Terrain features per world side at the base octave.
const TERRAIN_FEATURES: f64 = 4.0;
/// Radius within which fire may jump between trees, in meters.
pub const SPREAD_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub difficulty: u8,
    pub grid_size: usize,
    pub world_extent: f64,
}

impl ScenarioConfig {
    pub fn new(seed: u64, difficulty: u8) -> Result<Self> {
        let config = Self {
            seed,
            difficulty,
            grid_size: DEFAULT_GRID_SIZE,
            world_extent: DEFAULT_WORLD_EXTENT,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.difficulty) {
            return Err(Error::InvalidDifficulty(self.difficulty));
        }
        if self.grid_size == 0 {
            return Err(Error::Config("grid_size must be positive".into()));
        }
        if !(self.world_extent.is_finite() && self.world_extent > 0.0) {
            return Err(Error::Config("world_extent must be positive".into()));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> f64 {
        self.world_extent / self.grid_size as f64
    }

    /// Maximum terrain height for this difficulty.
    pub fn amplitude(&self) -> f64 {
        AMPLITUDE_PER_LEVEL * f64::from(self.difficulty)
    }

    pub fn tree_line(&self) -> f64 {
        TREE_LINE_FRACTION * self.amplitude()
    }
}

/// Row-major heightmap; `heights[iz * size + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    pub size: usize,
    pub cell_size: f64,
    pub heights: Vec<f64>,
}

impl TerrainGrid {
    pub fn flat(size: usize, cell_size: f64, height: f64) -> Self {
        Self {
            size,
            cell_size,
            heights: vec![height; size * size],
        }
    }

    pub fn extent(&self) -> f64 {
        self.size as f64 * self.cell_size
    }

    /// Cell containing world point `(x, z)`, clamped to the grid.
    pub fn cell_of(&self, x: f64, z: f64) -> (usize, usize) {
        cell_of(self.size, self.cell_size, x, z)
    }

    pub fn height(&self, ix: usize, iz: usize) -> f64 {
        self.heights[iz * self.size + ix]
    }

    pub fn height_at(&self, x: f64, z: f64) -> f64 {
        let (ix, iz) = self.cell_of(x, z);
        self.height(ix, iz)
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(0.0, f64::max)
    }

    /// FNV-1a over the grid size and the height bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut hash = Fnv1a::new();
        hash.write(&(self.size as u64).to_le_bytes());
        hash.write(&self.cell_size.to_bits().to_le_bytes());
        for h in &self.heights {
            hash.write(&h.to_bits().to_le_bytes());
        }
        hash.finish()
    }
}

pub(crate) fn cell_of(size: usize, cell_size: f64, x: f64, z: f64) -> (usize, usize) {
    let clamp = |v: f64| {
        let i = libm::floor(v / cell_size);
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(size - 1)
        }
    };
    (clamp(x), clamp(z))
}

struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeState {
    Alive,
    Burning,
    Burned,
}

/// A tree. `position` is `(x, y, z)` with `y` the elevation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tree {
    pub position: [f64; 3],
    pub state: TreeState,
    pub burn_timer: u8,
}

/// Trees plus a precomputed list of spread candidates per tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestMap {
    pub trees: Vec<Tree>,
    neighbor_offsets: Vec<u32>,
    neighbor_indices: Vec<u32>,
}

impl ForestMap {
    pub fn from_trees(trees: Vec<Tree>) -> Self {
        let (neighbor_offsets, neighbor_indices) = spread_neighbors(&trees);
        Self {
            trees,
            neighbor_offsets,
            neighbor_indices,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Trees within [`SPREAD_RADIUS`] of tree `i` (3-D distance), ascending.
    pub fn spread_candidates(&self, i: usize) -> &[u32] {
        let lo = self.neighbor_offsets[i] as usize;
        let hi = self.neighbor_offsets[i + 1] as usize;
        &self.neighbor_indices[lo..hi]
    }
}

pub fn distance3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    libm::sqrt(dx * dx + dy * dy + dz * dz)
}

pub fn horizontal_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dz = a[2] - b[2];
    libm::sqrt(dx * dx + dz * dz)
}

/// Buckets trees into `SPREAD_RADIUS` cells and collects, per tree, every
/// other tree within the radius.
fn spread_neighbors(trees: &[Tree]) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = Vec::with_capacity(trees.len() + 1);
    offsets.push(0u32);
    if trees.is_empty() {
        return (offsets, Vec::new());
    }
    let max_x = trees.iter().map(|t| t.position[0]).fold(0.0, f64::max);
    let max_z = trees.iter().map(|t| t.position[2]).fold(0.0, f64::max);
    let nx = (libm::floor(max_x / SPREAD_RADIUS) as usize) + 1;
    let nz = (libm::floor(max_z / SPREAD_RADIUS) as usize) + 1;
    let bucket = |p: &[f64; 3]| {
        let bx = (libm::floor(p[0].max(0.0) / SPREAD_RADIUS) as usize).min(nx - 1);
        let bz = (libm::floor(p[2].max(0.0) / SPREAD_RADIUS) as usize).min(nz - 1);
        (bx, bz)
    };
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * nz];
    for (i, t) in trees.iter().enumerate() {
        let (bx, bz) = bucket(&t.position);
        buckets[bz * nx + bx].push(i as u32);
    }

    let mut indices = Vec::new();
    let mut found = Vec::new();
    for (i, t) in trees.iter().enumerate() {
        found.clear();
        let (bx, bz) = bucket(&t.position);
        for z in bz.saturating_sub(1)..=(bz + 1).min(nz - 1) {
            for x in bx.saturating_sub(1)..=(bx + 1).min(nx - 1) {
                for &j in &buckets[z * nx + x] {
                    if j as usize != i
                        && distance3(&t.position, &trees[j as usize].position) <= SPREAD_RADIUS
                    {
                        found.push(j);
                    }
                }
            }
        }
        found.sort_unstable();
        indices.extend_from_slice(&found);
        offsets.push(indices.len() as u32);
    }
    (offsets, indices)
}

/// Seeded heightmap: fractal noise scaled by the difficulty amplitude.
pub fn generate_terrain(config: &ScenarioConfig) -> Result<TerrainGrid> {
    config.validate()?;
    let noise = GradientNoise::new(rng::derive_seed(config.seed, tag::TERRAIN, 0));
    let size = config.grid_size;
    let amplitude = config.amplitude();
    let scale = TERRAIN_FEATURES / size as f64;
    let mut heights = Vec::with_capacity(size * size);
    for iz in 0..size {
        for ix in 0..size {
            let base = noise.fbm2((ix as f64 + 0.5) * scale, (iz as f64 + 0.5) * scale);
            heights.push(base * amplitude);
        }
    }
    Ok(TerrainGrid {
        size,
        cell_size: config.cell_size(),
        heights,
    })
}

/// Relative tree density at elevation `height`: linear from 1 at sea level to
/// [`DENSITY_AT_TREE_LINE`] at the tree line, zero above it.
pub fn tree_density(height: f64, tree_line: f64) -> f64 {
    if height > tree_line || tree_line <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 - DENSITY_AT_TREE_LINE) * (height / tree_line)
}

/// Places at most one tree per [`TREE_SLOT`] square, jittered inside the
/// slot and kept with probability [`tree_density`].
pub fn place_forest(terrain: &TerrainGrid, config: &ScenarioConfig) -> ForestMap {
    let mut rng = rng::derived_stream(config.seed, tag::FOREST, 0);
    let extent = terrain.extent();
    let slots = libm::floor(extent / TREE_SLOT) as usize;
    let tree_line = config.tree_line();
    let mut trees = Vec::new();
    for sz in 0..slots {
        for sx in 0..slots {
            // three draws per slot whatever the outcome
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let keep: f64 = rng.random();
            let x = (sx as f64 + 0.5 + TREE_JITTER * (u - 0.5)) * TREE_SLOT;
            let z = (sz as f64 + 0.5 + TREE_JITTER * (v - 0.5)) * TREE_SLOT;
            let h = terrain.height_at(x, z);
            if keep < tree_density(h, tree_line) {
                trees.push(Tree {
                    position: [x, h, z],
                    state: TreeState::Alive,
                    burn_timer: 0,
                });
            }
        }
    }
    ForestMap::from_trees(trees)
}

/// Expected tree count for a flat terrain at `height`; the Monte-Carlo
/// reference for [`place_forest`].
pub fn expected_tree_count(extent: f64, height: f64, tree_line: f64) -> f64 {
    let slots = libm::floor(extent / TREE_SLOT);
    slots * slots * tree_density(height, tree_line)
}
