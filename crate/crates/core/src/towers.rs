//! The 3x3 lookout-tower grid, its neighbourhood graph and local sensing.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fire::FireState;
use crate::scenario::{horizontal_distance, ForestMap, TerrainGrid};
use crate::weather::WeatherState;
use crate::{Error, Result};

pub const TOWER_COUNT: usize = 9;
pub const NEIGHBOR_COUNT: usize = 3;
const GRID_SIDE: usize = 3;
/// Squared distances are compared in units of 1e-6 m^2.
const DISTANCE_QUANTUM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub id: usize,
    pub position: [f64; 3],
    pub observation_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerGrid {
    pub towers: Vec<Tower>,
}

impl TowerGrid {
    /// Towers at the centres of a 3x3 partition of the map, standing on the
    /// terrain. Ids are row-major: `id = row * 3 + col` with columns along x.
    pub fn new(terrain: &TerrainGrid) -> Self {
        let extent = terrain.extent();
        let spacing = extent / GRID_SIDE as f64;
        let radius = 0.5 * spacing * core::f64::consts::SQRT_2;
        let towers = (0..TOWER_COUNT)
            .map(|id| {
                let col = id % GRID_SIDE;
                let row = id / GRID_SIDE;
                let x = (col as f64 + 0.5) * spacing;
                let z = (row as f64 + 0.5) * spacing;
                Tower {
                    id,
                    position: [x, terrain.height_at(x, z), z],
                    observation_radius: radius,
                }
            })
            .collect();
        Self { towers }
    }

    pub fn len(&self) -> usize {
        self.towers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty()
    }

    pub fn get(&self, id: usize) -> &Tower {
        &self.towers[id]
    }
}

/// Directed graph: each tower lists its `n` nearest others.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub edges: Vec<Vec<usize>>,
}

impl NeighborGraph {
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.edges[id]
    }

    pub fn is_neighbor(&self, from: usize, to: usize) -> bool {
        self.edges[from].contains(&to)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Towers whose neighbour list contains `id`.
    pub fn in_neighbors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(move |&u| self.edges[u].contains(&id))
    }
}

/// `n` nearest neighbours by horizontal distance; ties go to the lower id.
pub fn build_neighborhoods(grid: &TowerGrid, n: usize) -> Result<NeighborGraph> {
    let points: Vec<[f64; 2]> = grid
        .towers
        .iter()
        .map(|t| [t.position[0], t.position[2]])
        .collect();
    nearest_neighbors(&points, n)
}

/// Same as [`build_neighborhoods`] over bare `(x, z)` points.
pub fn nearest_neighbors(points: &[[f64; 2]], n: usize) -> Result<NeighborGraph> {
    if points.len() < n + 1 {
        return Err(Error::TooFewTowers {
            towers: points.len(),
            neighbors: n,
            needed: n + 1,
        });
    }
    let edges = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut others: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| {
                    let dx = p[0] - q[0];
                    let dz = p[1] - q[1];
                    // quantised so grid distances equal up to rounding tie exactly
                    (libm::round((dx * dx + dz * dz) * DISTANCE_QUANTUM), j)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(n).map(|(_, j)| j).collect()
        })
        .collect();
    Ok(NeighborGraph { edges })
}

/// What a tower senses about its surroundings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalObservation {
    /// Closest observed burning tree, if any.
    pub cof_pos: Option<[f64; 3]>,
    pub temp: f64,
    pub hum: f64,
    pub prep: f64,
    pub oc: f64,
}

impl LocalObservation {
    /// Fixed-width form: `[x, y, z, valid, temp, hum, prep, oc]` with a zero
    /// position and `valid = 0` when no fire is observed.
    pub fn to_array(&self) -> [f64; 8] {
        let (p, v) = match self.cof_pos {
            Some(p) => (p, 1.0),
            None => ([0.0; 3], 0.0),
        };
        [p[0], p[1], p[2], v, self.temp, self.hum, self.prep, self.oc]
    }
}

/// Nearest burning tree inside the observation region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedFire {
    pub tree: usize,
    pub position: [f64; 3],
    pub distance: f64,
}

/// Nearest burning tree with horizontal distance `<= observation_radius`;
/// ties go to the lower tree index.
pub fn closest_observed_fire(
    tower: &Tower,
    fire: &FireState,
    forest: &ForestMap,
) -> Option<ObservedFire> {
    let mut best: Option<ObservedFire> = None;
    for &i in fire.burning() {
        let pos = forest.trees[i as usize].position;
        let d = horizontal_distance(&tower.position, &pos);
        if d > tower.observation_radius {
            continue;
        }
        // burning() is ascending, so strict < keeps the lower index on ties
        if best.is_none_or(|b| d < b.distance) {
            best = Some(ObservedFire {
                tree: i as usize,
                position: pos,
                distance: d,
            });
        }
    }
    best
}

/// Local reading at the tower's cell plus its current support value.
pub fn observe_local(
    tower: &Tower,
    weather: &WeatherState,
    fire: &FireState,
    forest: &ForestMap,
    support: f64,
) -> LocalObservation {
    let [x, _, z] = tower.position;
    let cell = weather.cell_index(x, z);
    LocalObservation {
        cof_pos: closest_observed_fire(tower, fire, forest).map(|f| f.position),
        temp: weather.temperature[cell],
        hum: weather.humidity[cell],
        prep: support,
        oc: weather.overcast[cell],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Tree, TreeState};

    fn unit_grid() -> Vec<[f64; 2]> {
        (0..9).map(|id| [(id % 3) as f64, (id / 3) as f64]).collect()
    }

    /// Brute-force reference: full sort of all other towers by (distance, id).
    fn brute(points: &[[f64; 2]], i: usize, n: usize) -> Vec<usize> {
        let mut all: Vec<usize> = (0..points.len()).filter(|&j| j != i).collect();
        let d = |j: usize| {
            let dx = points[i][0] - points[j][0];
            let dz = points[i][1] - points[j][1];
            libm::sqrt(dx * dx + dz * dz)
        };
        all.sort_by(|&a, &b| d(a).partial_cmp(&d(b)).unwrap().then(a.cmp(&b)));
        all.truncate(n);
        all
    }

    #[test]
    fn corner_and_centre_neighbourhoods() {
        let g = nearest_neighbors(&unit_grid(), 3).unwrap();
        // corner (0,0) = id 0 -> (1,0)=1, (0,1)=3, (1,1)=4
        assert_eq!(g.neighbors(0), &[1, 3, 4]);
        // centre: four at distance 1 (ids 1,3,5,7), the three lowest
        assert_eq!(g.neighbors(4), &[1, 3, 5]);
        for i in 0..9 {
            assert_eq!(g.neighbors(i), brute(&unit_grid(), i, 3).as_slice());
            assert_eq!(g.neighbors(i).len(), 3);
            assert!(!g.neighbors(i).contains(&i));
        }
    }

    #[test]
    fn too_few_towers() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(
            nearest_neighbors(&pts, 3),
            Err(Error::TooFewTowers { towers: 3, .. })
        ));
    }

    #[test]
    fn world_grid_layout() {
        let terrain = TerrainGrid::flat(100, 10.0, 5.0);
        let grid = TowerGrid::new(&terrain);
        assert_eq!(grid.len(), TOWER_COUNT);
        let t0 = grid.get(0);
        assert!((t0.position[0] - 1000.0 / 6.0).abs() < 1e-9);
        assert_eq!(t0.position[1], 5.0);
        assert!((t0.observation_radius - 235.702).abs() < 1e-3);
        let g = build_neighborhoods(&grid, 3).unwrap();
        assert_eq!(g, build_neighborhoods(&grid, 3).unwrap());
        assert_eq!(g.neighbors(0), &[1, 3, 4]);
        assert_eq!(g.neighbors(4), &[1, 3, 5]);
        assert_eq!(g.neighbors(8), &[5, 7, 4]);
        assert_eq!(g.in_neighbors(4).count(), 8);
    }

    fn burning_forest(points: &[[f64; 3]], burning: &[usize]) -> (ForestMap, FireState) {
        let forest = ForestMap::from_trees(
            points
                .iter()
                .map(|p| Tree {
                    position: *p,
                    state: TreeState::Alive,
                    burn_timer: 0,
                })
                .collect(),
        );
        let mut fire = FireState::new(&forest);
        for &b in burning {
            fire.ignite(b, 0);
        }
        (forest, fire)
    }

    fn tower_at_origin(radius: f64) -> Tower {
        Tower {
            id: 0,
            position: [100.0, 0.0, 100.0],
            observation_radius: radius,
        }
    }

    #[test]
    fn region_boundary_is_inclusive() {
        let t = tower_at_origin(50.0);
        let (f, fire) = burning_forest(&[[150.0, 3.0, 100.0]], &[0]);
        assert_eq!(closest_observed_fire(&t, &fire, &f).unwrap().tree, 0);
        let (f, fire) = burning_forest(&[[151.0, 3.0, 100.0]], &[0]);
        assert!(closest_observed_fire(&t, &fire, &f).is_none());
    }

    #[test]
    fn nearest_in_region_wins_with_index_tie_break() {
        let t = tower_at_origin(50.0);
        let pts = [
            [100.0, 0.0, 300.0], // burning, outside
            [130.0, 0.0, 100.0], // burning, 30 m
            [100.0, 0.0, 120.0], // burning, 20 m
            [80.0, 0.0, 100.0],  // alive, 20 m
        ];
        let (f, fire) = burning_forest(&pts, &[0, 1, 2]);
        let got = closest_observed_fire(&t, &fire, &f).unwrap();
        assert_eq!(got.tree, 2);
        assert_eq!(got.position, pts[2]);

        let tied = [[120.0, 0.0, 100.0], [100.0, 0.0, 80.0]];
        let (f, fire) = burning_forest(&tied, &[1, 0]);
        assert_eq!(closest_observed_fire(&t, &fire, &f).unwrap().tree, 0);
    }

    #[test]
    fn observe_local_echoes_weather_and_support() {
        let t = tower_at_origin(50.0);
        let w = WeatherState::uniform(20, 10.0, [1.0, 0.0], 0.25, 27.0, 0.4);
        let (f, fire) = burning_forest(&[[110.0, 0.0, 100.0]], &[]);
        let o = observe_local(&t, &w, &fire, &f, 0.3);
        assert_eq!(o.cof_pos, None);
        assert_eq!((o.temp, o.hum, o.prep, o.oc), (27.0, 0.4, 0.3, 0.25));
        assert_eq!(o.to_array()[..4], [0.0, 0.0, 0.0, 0.0]);
        let (f, fire) = burning_forest(&[[110.0, 2.0, 100.0]], &[0]);
        let o = observe_local(&t, &w, &fire, &f, 0.3);
        assert_eq!(o.cof_pos, Some([110.0, 2.0, 100.0]));
        assert_eq!(o, observe_local(&t, &w, &fire, &f, 0.3));
    }
}
