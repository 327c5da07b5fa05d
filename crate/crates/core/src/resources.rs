//! Per-tower resource reserves, support values and ownership of placed
//! support, all stored as integer tenths.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::towers::NeighborGraph;

/// Every tower starts with this many tenths in reserve.
pub const INITIAL_RESERVE_TENTHS: u32 = 10;

/// Why a transfer was refused. Refusals never change the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum Rejection {
    #[error("reserve below 0.1")]
    InsufficientReserve,
    #[error("target is neither self nor a neighbour")]
    InvalidTarget,
    #[error("reserve not empty")]
    ReserveNotEmpty,
    #[error("no own allocation at target")]
    NoAllocation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceLedger {
    n: usize,
    reserve: Vec<u32>,
    support: Vec<u32>,
    /// `allocation[owner * n + target]`
    allocation: Vec<u32>,
    /// Targets of each owner's placed tenths, oldest first.
    placed: Vec<VecDeque<usize>>,
}

#[inline]
fn tenths(v: u32) -> f64 {
    f64::from(v) / 10.0
}

impl ResourceLedger {
    pub fn new(towers: usize) -> Self {
        Self {
            n: towers,
            reserve: vec![INITIAL_RESERVE_TENTHS; towers],
            support: vec![0; towers],
            allocation: vec![0; towers * towers],
            placed: vec![VecDeque::new(); towers],
        }
    }

    pub fn towers(&self) -> usize {
        self.n
    }

    pub fn reserve(&self, tower: usize) -> f64 {
        tenths(self.reserve[tower])
    }

    pub fn support(&self, tower: usize) -> f64 {
        tenths(self.support[tower])
    }

    pub fn allocation(&self, owner: usize, target: usize) -> f64 {
        tenths(self.allocation[owner * self.n + target])
    }

    pub fn reserve_tenths(&self, tower: usize) -> u32 {
        self.reserve[tower]
    }

    pub fn support_tenths(&self, tower: usize) -> u32 {
        self.support[tower]
    }

    pub fn allocation_tenths(&self, owner: usize, target: usize) -> u32 {
        self.allocation[owner * self.n + target]
    }

    /// Sum of all reserves and supports in tenths; constant at `10 * n`.
    pub fn total_tenths(&self) -> u32 {
        self.reserve.iter().sum::<u32>() + self.support.iter().sum::<u32>()
    }

    /// Checks global and per-owner conservation.
    pub fn is_consistent(&self) -> bool {
        if self.total_tenths() != INITIAL_RESERVE_TENTHS * self.n as u32 {
            return false;
        }
        for owner in 0..self.n {
            let placed: u32 = (0..self.n).map(|t| self.allocation_tenths(owner, t)).sum();
            if placed + self.reserve[owner] != INITIAL_RESERVE_TENTHS
                || placed as usize != self.placed[owner].len()
            {
                return false;
            }
        }
        (0..self.n).all(|t| {
            (0..self.n).map(|o| self.allocation_tenths(o, t)).sum::<u32>() == self.support[t]
        })
    }

    fn valid_target(graph: &NeighborGraph, owner: usize, target: usize) -> bool {
        target == owner || graph.is_neighbor(owner, target)
    }

    /// Moves 0.1 from `owner`'s reserve to `target`'s support.
    pub fn distribute(
        &mut self,
        graph: &NeighborGraph,
        owner: usize,
        target: usize,
    ) -> Result<(), Rejection> {
        if target >= self.n || !Self::valid_target(graph, owner, target) {
            return Err(Rejection::InvalidTarget);
        }
        if self.reserve[owner] < 1 {
            return Err(Rejection::InsufficientReserve);
        }
        self.reserve[owner] -= 1;
        self.support[target] += 1;
        self.allocation[owner * self.n + target] += 1;
        self.placed[owner].push_back(target);
        Ok(())
    }

    /// Takes 0.1 of `owner`'s own support back from `from_target`; only
    /// allowed once the reserve is empty.
    pub fn deduct(
        &mut self,
        graph: &NeighborGraph,
        owner: usize,
        from_target: usize,
    ) -> Result<(), Rejection> {
        if from_target >= self.n || !Self::valid_target(graph, owner, from_target) {
            return Err(Rejection::InvalidTarget);
        }
        if self.reserve[owner] >= 1 {
            return Err(Rejection::ReserveNotEmpty);
        }
        if self.allocation[owner * self.n + from_target] < 1 {
            return Err(Rejection::NoAllocation);
        }
        self.support[from_target] -= 1;
        self.allocation[owner * self.n + from_target] -= 1;
        self.reserve[owner] += 1;
        let queue = &mut self.placed[owner];
        if let Some(pos) = queue.iter().position(|&t| t == from_target) {
            queue.remove(pos);
        }
        Ok(())
    }

    /// Target of `owner`'s oldest still-placed tenth.
    pub fn oldest_allocation(&self, owner: usize) -> Option<usize> {
        self.placed[owner].front().copied()
    }

    /// [`deduct`](Self::deduct) from the oldest own allocation.
    pub fn reclaim_oldest(&mut self, graph: &NeighborGraph, owner: usize) -> Result<usize, Rejection> {
        if self.reserve[owner] >= 1 {
            return Err(Rejection::ReserveNotEmpty);
        }
        let target = self.oldest_allocation(owner).ok_or(Rejection::NoAllocation)?;
        self.deduct(graph, owner, target).map(|()| target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::towers::nearest_neighbors;
    use proptest::prelude::*;

    fn graph() -> NeighborGraph {
        let pts: Vec<[f64; 2]> = (0..9).map(|i| [(i % 3) as f64, (i / 3) as f64]).collect();
        nearest_neighbors(&pts, 3).unwrap()
    }

    #[test]
    fn first_distribution() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        l.distribute(&g, 0, 0).unwrap();
        assert_eq!(l.reserve(0), 0.9);
        assert_eq!(l.support(0), 0.1);
        assert_eq!(l.total_tenths(), 90);
        assert!(l.is_consistent());
    }

    #[test]
    fn reserve_exhausts_after_ten() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        for _ in 0..10 {
            l.distribute(&g, 0, 0).unwrap();
        }
        assert_eq!(l.reserve(0), 0.0);
        assert_eq!(l.support(0), 1.0);
        let before = l.clone();
        assert_eq!(l.distribute(&g, 0, 0), Err(Rejection::InsufficientReserve));
        assert_eq!(l, before);
    }

    #[test]
    fn non_neighbour_target_rejected() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        let before = l.clone();
        // 8 is the far corner from 0
        assert_eq!(l.distribute(&g, 0, 8), Err(Rejection::InvalidTarget));
        assert_eq!(l, before);
        assert_eq!(l.distribute(&g, 0, 42), Err(Rejection::InvalidTarget));
    }

    #[test]
    fn deduct_rules() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        for _ in 0..10 {
            l.distribute(&g, 0, 0).unwrap();
        }
        l.deduct(&g, 0, 0).unwrap();
        assert_eq!(l.reserve(0), 0.1);
        assert_eq!(l.support(0), 0.9);

        let mut m = ResourceLedger::new(9);
        for _ in 0..5 {
            m.distribute(&g, 0, 0).unwrap();
        }
        let before = m.clone();
        assert_eq!(m.deduct(&g, 0, 0), Err(Rejection::ReserveNotEmpty));
        assert_eq!(m, before);

        let mut k = ResourceLedger::new(9);
        for _ in 0..10 {
            k.distribute(&g, 0, 0).unwrap();
        }
        let before = k.clone();
        assert_eq!(k.deduct(&g, 0, 1), Err(Rejection::NoAllocation));
        assert_eq!(k, before);
    }

    #[test]
    fn reclaim_takes_oldest_first() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        l.distribute(&g, 0, 1).unwrap();
        for _ in 0..9 {
            l.distribute(&g, 0, 0).unwrap();
        }
        assert_eq!(l.reclaim_oldest(&g, 0), Ok(1));
        assert_eq!(l.allocation(0, 1), 0.0);
        assert_eq!(l.reclaim_oldest(&g, 0), Err(Rejection::ReserveNotEmpty));
        l.distribute(&g, 0, 3).unwrap();
        assert_eq!(l.reclaim_oldest(&g, 0), Ok(0));
        assert!(l.is_consistent());
    }

    #[test]
    fn someone_elses_support_cannot_be_taken() {
        let g = graph();
        let mut l = ResourceLedger::new(9);
        // 1 lists 0 as neighbour; 0 lists 1 as neighbour as well
        for _ in 0..10 {
            l.distribute(&g, 1, 0).unwrap();
        }
        for _ in 0..10 {
            l.distribute(&g, 0, 3).unwrap();
        }
        assert_eq!(l.deduct(&g, 0, 0), Err(Rejection::NoAllocation));
        assert_eq!(l.support(0), 1.0);
    }

    proptest! {
        #[test]
        fn conservation_under_random_operations(
            ops in proptest::collection::vec((0usize..9, 0usize..9, any::<bool>()), 0..400)
        ) {
            let g = graph();
            let mut l = ResourceLedger::new(9);
            for (owner, target, give) in ops {
                let before = l.clone();
                let r = if give { l.distribute(&g, owner, target) } else { l.deduct(&g, owner, target) };
                if r.is_err() {
                    prop_assert_eq!(&l, &before);
                }
                prop_assert_eq!(l.total_tenths(), 90);
                prop_assert!(l.is_consistent());
            }
        }
    }
}
