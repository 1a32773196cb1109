//! Block construction: `N = ⌈D/ε⌉` stamped copies of the instance over `d_i`
//! copies of each variable, every copy used exactly `N` times.
//!
//! Copy `j` of variable `i` serves blocks `[j·s, (j+1)·s)` with `s = ⌊N/d_i⌋`.
//! In each of the remaining `N - d_i·s` blocks the `o`-th occurrence of `i`
//! uses copy `o`, which is the round-robin fill over copies in copy order.

use serde::{Deserialize, Serialize};

use super::{RegularityError, MAX_OUTPUT_CONSTRAINTS};
use crate::csp::{degrees, Assignment, Constraint, Instance, Value};
use crate::solvers::Goal;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockEntry {
    /// Every occurrence in the block uses this copy.
    Single(usize),
    /// Copy used by each occurrence, in constraint order.
    Mixed(Vec<usize>),
    /// The variable occurs in no constraint.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMap {
    pub epsilon: f64,
    pub n_blocks: usize,
    pub d_max: usize,
    pub original_variables: usize,
    pub original_constraints: usize,
    /// Degree of each original variable, which is also its copy count.
    pub copies: Vec<usize>,
    /// First variable of `G` holding a copy of each original variable.
    pub first_copy: Vec<usize>,
    /// `blocks[b][i]`: copies of variable `i` used in block `b`.
    pub blocks: Vec<Vec<BlockEntry>>,
    pub good_blocks: Vec<usize>,
}

impl BlockMap {
    pub fn num_copies(&self) -> usize {
        self.copies.iter().sum()
    }

    /// Original variable and copy number of every variable of `G`.
    pub fn copy_of(&self) -> Vec<(usize, usize)> {
        self.copies
            .iter()
            .enumerate()
            .flat_map(|(i, &d)| (0..d).map(move |j| (i, j)))
            .collect()
    }

    /// `G`-variable used by the `o`-th occurrence of `i` in block `b`.
    pub fn occurrence(&self, b: usize, i: usize, o: usize) -> Option<usize> {
        match &self.blocks[b][i] {
            BlockEntry::Single(j) => Some(self.first_copy[i] + j),
            BlockEntry::Mixed(list) => list.get(o).map(|j| self.first_copy[i] + j),
            BlockEntry::Absent => None,
        }
    }

    /// How often each copy is used according to the map alone.
    pub fn usage(&self) -> Vec<usize> {
        let mut usage = vec![0usize; self.num_copies()];
        for row in &self.blocks {
            for (i, entry) in row.iter().enumerate() {
                match entry {
                    BlockEntry::Single(j) => {
                        if let Some(u) = usage.get_mut(self.first_copy[i] + j) {
                            *u += self.copies[i];
                        }
                    }
                    BlockEntry::Mixed(list) => {
                        for j in list {
                            if let Some(u) = usage.get_mut(self.first_copy[i] + j) {
                                *u += 1;
                            }
                        }
                    }
                    BlockEntry::Absent => {}
                }
            }
        }
        usage
    }

    /// Restriction of `ζ` to block `b`, valid for good blocks.
    pub fn read_block(&self, b: usize, zeta: &[Value]) -> Assignment {
        Assignment(
            (0..self.original_variables)
                .map(|i| match &self.blocks[b][i] {
                    BlockEntry::Single(j) => zeta[self.first_copy[i] + j],
                    BlockEntry::Mixed(list) => zeta[self.first_copy[i] + list[0]],
                    BlockEntry::Absent => 0,
                })
                .collect(),
        )
    }

    /// The assignment of `G` giving every copy of `i` the value `chi[i]`.
    pub fn lift(&self, chi: &[Value]) -> Assignment {
        Assignment(
            self.copy_of()
                .into_iter()
                .map(|(i, _)| chi[i])
                .collect(),
        )
    }
}

pub fn regularize_deterministic(
    instance: &Instance,
    epsilon: f64,
) -> Result<(Instance, BlockMap), RegularityError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(RegularityError::InvalidEpsilon(epsilon));
    }
    if instance.is_weighted() {
        return Err(RegularityError::Weighted);
    }
    let m = instance.num_constraints();
    if m == 0 {
        return Err(RegularityError::NoConstraints);
    }
    let n = instance.num_variables();
    let copies = degrees(instance).degrees;
    let d_max = copies.iter().copied().max().unwrap_or(0);
    let n_raw = (d_max as f64 / epsilon).ceil();
    let size = n_raw * m as f64;
    if size > MAX_OUTPUT_CONSTRAINTS as f64 {
        return Err(RegularityError::TooLarge {
            what: "block construction",
            size: size as u128,
            limit: MAX_OUTPUT_CONSTRAINTS as u128,
        });
    }
    let n_blocks = n_raw as usize;

    let mut first_copy = Vec::with_capacity(n);
    let mut offset = 0;
    for &d in &copies {
        first_copy.push(offset);
        offset += d;
    }

    let blocks: Vec<Vec<BlockEntry>> = (0..n_blocks)
        .map(|b| {
            copies
                .iter()
                .map(|&d| {
                    if d == 0 {
                        return BlockEntry::Absent;
                    }
                    let s = n_blocks / d;
                    if b < d * s {
                        BlockEntry::Single(b / s)
                    } else if d == 1 {
                        BlockEntry::Single(0)
                    } else {
                        BlockEntry::Mixed((0..d).collect())
                    }
                })
                .collect()
        })
        .collect();
    let good_blocks: Vec<usize> = (0..n_blocks)
        .filter(|&b| blocks[b].iter().all(|e| !matches!(e, BlockEntry::Mixed(_))))
        .collect();

    let map = BlockMap {
        epsilon,
        n_blocks,
        d_max,
        original_variables: n,
        original_constraints: m,
        copies,
        first_copy,
        blocks,
        good_blocks,
    };

    let mut constraints = Vec::with_capacity(n_blocks * m);
    let mut seen = vec![0usize; n];
    for b in 0..n_blocks {
        seen.iter_mut().for_each(|s| *s = 0);
        for c in instance.constraints() {
            let scope = c.scope.iter().map(|&i| {
                let v = map.occurrence(b, i, seen[i]).expect("variable occurs");
                seen[i] += 1;
                v
            });
            constraints.push(Constraint::new(c.predicate, scope.collect::<Vec<_>>()));
        }
    }
    let g = Instance::unweighted(instance.language_arc().clone(), map.num_copies(), constraints)?;
    Ok((g, map))
}

/// Reads `ζ` off the good block of highest (Max) or lowest (Min) value, ties to
/// the lowest block index. Isolated variables get value 0.
pub fn pullback_deterministic(
    g: &Instance,
    map: &BlockMap,
    zeta: &[Value],
    goal: Goal,
) -> Result<Assignment, RegularityError> {
    check_map(g, map, zeta)?;
    let m = map.original_constraints;
    let mut best: Option<(usize, usize)> = None;
    for &b in &map.good_blocks {
        let count = (b * m..(b + 1) * m).filter(|&r| g.satisfied(r, zeta)).count();
        let better = match (best, goal) {
            (None, _) => true,
            (Some((_, c)), Goal::Max) => count > c,
            (Some((_, c)), Goal::Min) => count < c,
        };
        if better {
            best = Some((b, count));
        }
    }
    let (b, _) = best.ok_or(RegularityError::NoGoodBlocks)?;
    Ok(map.read_block(b, zeta))
}

fn check_map(g: &Instance, map: &BlockMap, zeta: &[Value]) -> Result<(), RegularityError> {
    if g.num_variables() != map.num_copies() || g.num_constraints() != map.n_blocks * map.original_constraints {
        return Err(RegularityError::MapMismatch(format!(
            "map describes {} variables and {} constraints, instance has {} and {}",
            map.num_copies(),
            map.n_blocks * map.original_constraints,
            g.num_variables(),
            g.num_constraints()
        )));
    }
    if zeta.len() != g.num_variables() {
        return Err(RegularityError::MapMismatch(format!(
            "assignment has {} values, instance has {} variables",
            zeta.len(),
            g.num_variables()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::csp::{evaluate, CspLanguage, Predicate};

    fn or2_path() -> Instance {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::or(2)]).unwrap());
        let id = l.id("OR2").unwrap();
        Instance::unweighted(l, 3, vec![Constraint::new(id, [0, 1]), Constraint::new(id, [1, 2])]).unwrap()
    }

    #[test]
    fn or2_path_blocks() {
        let (g, map) = regularize_deterministic(&or2_path(), 0.5).unwrap();
        assert_eq!(map.d_max, 2);
        assert_eq!(map.n_blocks, 4);
        assert_eq!(g.num_constraints(), 8);
        assert_eq!(g.num_variables(), 4);
        let report = degrees(&g);
        assert!(report.is_regular);
        assert_eq!(report.common_degree, Some(4));
        assert_eq!(map.good_blocks, vec![0, 1, 2, 3]);
        assert!(map.usage().iter().all(|&u| u == 4));
    }

    #[test]
    fn mixed_blocks_use_every_copy_once() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let id = l.id("NEQ").unwrap();
        // degrees (3, 1, 1, 1); N = ⌈3/0.4⌉ = 8, s = 2, blocks 6 and 7 mixed
        let f = Instance::unweighted(
            l,
            4,
            vec![Constraint::new(id, [0, 1]), Constraint::new(id, [0, 2]), Constraint::new(id, [0, 3])],
        )
        .unwrap();
        let (g, map) = regularize_deterministic(&f, 0.4).unwrap();
        assert_eq!(map.n_blocks, 8);
        assert_eq!(map.good_blocks, (0..6).collect::<Vec<_>>());
        assert_eq!(map.blocks[7][0], BlockEntry::Mixed(vec![0, 1, 2]));
        assert!(degrees(&g).is_regular);
        assert!(map.usage().iter().all(|&u| u == 8));
        assert!(map.good_blocks.len() >= map.n_blocks - map.d_max);
    }

    #[test]
    fn consistent_zeta_pulls_back_exactly() {
        let f = or2_path();
        let (g, map) = regularize_deterministic(&f, 0.5).unwrap();
        let chi = [0, 1, 0];
        let zeta = map.lift(&chi);
        let back = pullback_deterministic(&g, &map, &zeta, Goal::Max).unwrap();
        assert_eq!(back.0, chi);
        assert_eq!(evaluate(&f, &back).unwrap(), evaluate(&g, &zeta).unwrap());
    }

    #[test]
    fn extremal_block_selection() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::neq(2)]).unwrap());
        let id = l.id("NEQ").unwrap();
        let f = Instance::unweighted(l, 3, vec![Constraint::new(id, [0, 1]), Constraint::new(id, [0, 2])])
            .unwrap();
        let (g, map) = regularize_deterministic(&f, 1.0).unwrap();
        assert_eq!(map.n_blocks, 2);
        // copy 0 of x0 serves block 0, copy 1 serves block 1; only block 0 is disturbed
        let zeta = [1, 0, 0, 0];
        let min = pullback_deterministic(&g, &map, &zeta, Goal::Min).unwrap();
        assert_eq!(min.0, vec![0, 0, 0]);
        let max = pullback_deterministic(&g, &map, &zeta, Goal::Max).unwrap();
        assert_eq!(max.0, vec![1, 0, 0]);
        assert_eq!(evaluate(&f, &max).unwrap(), 1.0);
    }

    #[test]
    fn isolated_variables_get_zero() {
        let l = Arc::new(CspLanguage::new(2, vec![Predicate::or(1)]).unwrap());
        let id = l.id("OR1").unwrap();
        let f = Instance::unweighted(l, 3, vec![Constraint::new(id, [1])]).unwrap();
        let (g, map) = regularize_deterministic(&f, 0.5).unwrap();
        assert_eq!(g.num_variables(), 1);
        let back = pullback_deterministic(&g, &map, &[1], Goal::Max).unwrap();
        assert_eq!(back.0, vec![0, 1, 0]);
    }

    #[test]
    fn rejects_bad_input() {
        let f = or2_path();
        assert!(matches!(regularize_deterministic(&f, 0.0), Err(RegularityError::InvalidEpsilon(_))));
        assert!(matches!(
            regularize_deterministic(&f.to_weighted(), 0.5),
            Err(RegularityError::Weighted)
        ));
    }
}
