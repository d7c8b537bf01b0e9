//! Location partition, the bijection between original and duplicate
//! locations, and instruction duplication.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instruction, Loc};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DupMapError {
    #[error("location count {0} must be even and at least 2")]
    BadLocationCount(usize),
    #[error("location {0} is out of range")]
    OutOfRange(u8),
    #[error("location {0} is both original and duplicate")]
    Overlap(u8),
    #[error("{originals} original locations but {duplicates} duplicate locations")]
    SizeMismatch { originals: usize, duplicates: usize },
    #[error("original location {0} is mapped more than once or not at all")]
    NotFunction(u8),
    #[error("duplicate location {0} is the image of more than one original")]
    NotInjective(u8),
    #[error("location {0} is neither original nor duplicate")]
    Uncovered(u8),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DupError {
    #[error("location {loc} of instruction at index {index} is not an original location")]
    NotOriginal { index: usize, loc: u8 },
    #[error("location {loc} of instruction at index {index} is not a duplicate location")]
    NotDuplicate { index: usize, loc: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrClass {
    Original,
    Duplicate,
    Mixed,
}

/// Partition `L = O_L + D_L` with a bijection `d : O_L -> D_L`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "DupMapRepr", try_from = "DupMapRepr")]
pub struct DupMap {
    forward: Vec<Option<Loc>>,
    backward: Vec<Option<Loc>>,
}

#[derive(Serialize, Deserialize)]
struct DupMapRepr {
    locations: usize,
    pairs: Vec<(u8, u8)>,
}

impl From<DupMap> for DupMapRepr {
    fn from(m: DupMap) -> Self {
        DupMapRepr { locations: m.locations(), pairs: m.pairs().map(|(o, d)| (o.0, d.0)).collect() }
    }
}

impl TryFrom<DupMapRepr> for DupMap {
    type Error = DupMapError;

    fn try_from(r: DupMapRepr) -> Result<Self, Self::Error> {
        let originals: Vec<Loc> = r.pairs.iter().map(|&(o, _)| Loc(o)).collect();
        let pairs: Vec<(Loc, Loc)> = r.pairs.iter().map(|&(o, d)| (Loc(o), Loc(d))).collect();
        make_dup_map(r.locations, &originals, &pairs)
    }
}

/// Validates a partition and bijection over `locations` locations.
pub fn make_dup_map(
    locations: usize,
    originals: &[Loc],
    mapping: &[(Loc, Loc)],
) -> Result<DupMap, DupMapError> {
    if locations < 2 || locations % 2 != 0 || locations > 256 {
        return Err(DupMapError::BadLocationCount(locations));
    }
    let in_range = |l: Loc| if l.index() < locations { Ok(l) } else { Err(DupMapError::OutOfRange(l.0)) };
    let originals: BTreeSet<Loc> = originals.iter().map(|&l| in_range(l)).collect::<Result<_, _>>()?;
    let mut forward = vec![None; locations];
    let mut backward = vec![None; locations];
    for &(o, d) in mapping {
        in_range(o)?;
        in_range(d)?;
        if !originals.contains(&o) {
            return Err(DupMapError::Uncovered(o.0));
        }
        if originals.contains(&d) {
            return Err(DupMapError::Overlap(d.0));
        }
        if forward[o.index()].is_some() {
            return Err(DupMapError::NotFunction(o.0));
        }
        if backward[d.index()].is_some() {
            return Err(DupMapError::NotInjective(d.0));
        }
        forward[o.index()] = Some(d);
        backward[d.index()] = Some(o);
    }
    let duplicates = backward.iter().filter(|x| x.is_some()).count();
    if originals.len() != duplicates || originals.len() * 2 != locations {
        return Err(DupMapError::SizeMismatch { originals: originals.len(), duplicates });
    }
    if let Some(o) = originals.iter().find(|o| forward[o.index()].is_none()) {
        return Err(DupMapError::NotFunction(o.0));
    }
    Ok(DupMap { forward, backward })
}

impl DupMap {
    /// `O_L = {0..n/2}`, `d(k) = k + n/2`.
    pub fn halves(locations: usize) -> Result<DupMap, DupMapError> {
        let half = locations / 2;
        let originals: Vec<Loc> = (0..half).map(|k| Loc(k as u8)).collect();
        let pairs: Vec<(Loc, Loc)> = originals.iter().map(|&o| (o, Loc(o.0 + half as u8))).collect();
        make_dup_map(locations, &originals, &pairs)
    }

    /// `O_L = {0, 2, 4, ...}`, `d(k) = k + 1`.
    pub fn parity(locations: usize) -> Result<DupMap, DupMapError> {
        let originals: Vec<Loc> = (0..locations).step_by(2).map(|k| Loc(k as u8)).collect();
        let pairs: Vec<(Loc, Loc)> = originals.iter().map(|&o| (o, Loc(o.0 + 1))).collect();
        make_dup_map(locations, &originals, &pairs)
    }

    /// Every partition into equal halves together with every bijection
    /// between them, in a fixed order. Only practical for a handful of
    /// locations.
    pub fn enumerate_all(locations: usize) -> Vec<DupMap> {
        if locations < 2 || locations % 2 != 0 || locations > 8 {
            return Vec::new();
        }
        let half = locations / 2;
        let mut maps = Vec::new();
        for mask in 0u32..(1 << locations) {
            if mask.count_ones() as usize != half {
                continue;
            }
            let originals: Vec<Loc> = (0..locations).filter(|k| mask & (1 << k) != 0).map(|k| Loc(k as u8)).collect();
            let duplicates: Vec<Loc> = (0..locations).filter(|k| mask & (1 << k) == 0).map(|k| Loc(k as u8)).collect();
            for perm in permutations(half) {
                let pairs: Vec<(Loc, Loc)> = originals.iter().zip(&perm).map(|(&o, &p)| (o, duplicates[p])).collect();
                if let Ok(m) = make_dup_map(locations, &originals, &pairs) {
                    maps.push(m);
                }
            }
        }
        maps
    }

    pub fn locations(&self) -> usize {
        self.forward.len()
    }

    pub fn originals(&self) -> impl Iterator<Item = Loc> + '_ {
        self.forward.iter().enumerate().filter(|(_, d)| d.is_some()).map(|(o, _)| Loc(o as u8))
    }

    pub fn duplicates(&self) -> impl Iterator<Item = Loc> + '_ {
        self.backward.iter().enumerate().filter(|(_, o)| o.is_some()).map(|(d, _)| Loc(d as u8))
    }

    /// `(l, d(l))` for every original `l`, ascending by `l`.
    pub fn pairs(&self) -> impl Iterator<Item = (Loc, Loc)> + '_ {
        self.forward.iter().enumerate().filter_map(|(o, d)| d.map(|d| (Loc(o as u8), d)))
    }

    pub fn is_original(&self, l: Loc) -> bool {
        self.forward.get(l.index()).is_some_and(|d| d.is_some())
    }

    pub fn is_duplicate(&self, l: Loc) -> bool {
        self.backward.get(l.index()).is_some_and(|o| o.is_some())
    }

    /// `d(l)`, defined on original locations.
    pub fn dup(&self, l: Loc) -> Option<Loc> {
        self.forward.get(l.index()).copied().flatten()
    }

    /// `d^-1(l)`, defined on duplicate locations.
    pub fn undup(&self, l: Loc) -> Option<Loc> {
        self.backward.get(l.index()).copied().flatten()
    }

    /// The partner of `l` in its `(original, duplicate)` pair.
    pub fn partner(&self, l: Loc) -> Option<Loc> {
        self.dup(l).or_else(|| self.undup(l))
    }

    /// The same partition read the other way round.
    pub fn inverse(&self) -> DupMap {
        DupMap { forward: self.backward.clone(), backward: self.forward.clone() }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

pub fn classify_instr(m: &DupMap, i: &Instruction) -> InstrClass {
    let locs = i.locations();
    if locs.iter().all(|&l| m.is_original(l)) {
        InstrClass::Original
    } else if locs.iter().all(|&l| m.is_duplicate(l)) {
        InstrClass::Duplicate
    } else {
        InstrClass::Mixed
    }
}

/// Maps an original instruction to its duplicate.
pub fn dup_instr(m: &DupMap, i: &Instruction) -> Result<Instruction, DupError> {
    dup_at(m, i, 0)
}

fn dup_at(m: &DupMap, i: &Instruction, index: usize) -> Result<Instruction, DupError> {
    if let Some(bad) = i.locations().into_iter().find(|&l| !m.is_original(l)) {
        return Err(DupError::NotOriginal { index, loc: bad.0 });
    }
    Ok(i.map_locations(|l| m.dup(l).expect("checked original")))
}

/// Maps a duplicate instruction back to its original.
pub fn undup_instr(m: &DupMap, i: &Instruction) -> Result<Instruction, DupError> {
    if let Some(bad) = i.locations().into_iter().find(|&l| !m.is_duplicate(l)) {
        return Err(DupError::NotDuplicate { index: 0, loc: bad.0 });
    }
    Ok(i.map_locations(|l| m.undup(l).expect("checked duplicate")))
}

/// Elementwise [`dup_instr`], order preserved.
pub fn dup_seq(m: &DupMap, seq: &[Instruction]) -> Result<Vec<Instruction>, DupError> {
    seq.iter().enumerate().map(|(k, i)| dup_at(m, i, k)).collect()
}
