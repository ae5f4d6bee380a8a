use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use num_traits::Zero;

use crate::distr::Distribution;
use crate::rational::Rational;
use crate::terms::NTerm;

/// A partition of states into blocks, numbered by their least member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatePartition {
    blocks: Vec<Vec<NTerm>>,
    index: BTreeMap<NTerm, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PartitionError {
    #[error("state `{0}` is not covered by the partition")]
    Uncovered(NTerm),
}

impl StatePartition {
    pub fn from_blocks<I>(blocks: I) -> Self
    where
        I: IntoIterator<Item = BTreeSet<NTerm>>,
    {
        let mut blocks: Vec<Vec<NTerm>> =
            blocks.into_iter().filter(|b| !b.is_empty()).map(|b| b.into_iter().collect()).collect();
        blocks.sort();
        let mut index = BTreeMap::new();
        for (i, b) in blocks.iter().enumerate() {
            for e in b {
                index.insert(e.clone(), i);
            }
        }
        StatePartition { blocks, index }
    }

    /// Groups states by a key; equal keys share a block.
    pub fn by_key<'a, K: Ord, I: IntoIterator<Item = &'a NTerm>>(states: I, key: impl Fn(&NTerm) -> K) -> Self {
        let mut groups: BTreeMap<K, BTreeSet<NTerm>> = BTreeMap::new();
        for e in states {
            groups.entry(key(e)).or_default().insert(e.clone());
        }
        StatePartition::from_blocks(groups.into_values())
    }

    pub fn blocks(&self) -> &[Vec<NTerm>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_of(&self, e: &NTerm) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn same_block(&self, a: &NTerm, b: &NTerm) -> bool {
        match (self.block_of(a), self.block_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn states(&self) -> impl Iterator<Item = &NTerm> {
        self.index.keys()
    }
}

/// Probability per block, `μ[C]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClassVector {
    entries: BTreeMap<usize, Rational>,
}

impl ClassVector {
    pub fn get(&self, block: usize) -> Rational {
        self.entries.get(&block).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&usize, &Rational)> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &BTreeMap<usize, Rational> {
        &self.entries
    }
}

impl fmt::Display for ClassVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (b, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "C{}: {}", b, v)?;
        }
        f.write_str("]")
    }
}

pub fn class_vector(mu: &Distribution, pi: &StatePartition) -> Result<ClassVector, PartitionError> {
    let mut entries: BTreeMap<usize, Rational> = BTreeMap::new();
    for (e, w) in mu.iter() {
        let b = pi.block_of(e).ok_or_else(|| PartitionError::Uncovered(e.clone()))?;
        *entries.entry(b).or_insert_with(Rational::zero) += w;
    }
    Ok(ClassVector { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::terms::{parse_distribution, parse_nterm};

    #[test]
    fn vectors() {
        let a = parse_nterm("a.D(0)").unwrap();
        let b = parse_nterm("b.D(0)").unwrap();
        let pi = StatePartition::from_blocks([BTreeSet::from([b.clone()]), BTreeSet::from([a.clone()])]);
        assert_eq!(pi.block_of(&a), Some(0));
        let mu = parse_distribution("{1/3: a.D(0), 2/3: b.D(0)}").unwrap();
        let v = class_vector(&mu, &pi).unwrap();
        assert_eq!(v.get(0), rat(1, 3));
        assert_eq!(v.get(1), rat(2, 3));
        let d = Distribution::dirac(parse_nterm("0").unwrap());
        assert!(class_vector(&d, &pi).is_err());
    }
}
