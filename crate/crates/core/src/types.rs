//! Domain types shared by every module.

use std::num::NonZeroU64;

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Size of the element universe `{0, .., D-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UniverseConfig {
    /// `D = 2^64`: every `u64` is a valid element.
    #[default]
    Full,
    Bounded(NonZeroU64),
}

impl UniverseConfig {
    pub fn bounded(d: u64) -> Result<Self> {
        NonZeroU64::new(d)
            .map(UniverseConfig::Bounded)
            .ok_or_else(|| Error::param("universe size must be at least 1"))
    }

    pub fn contains(&self, id: u64) -> bool {
        match self {
            UniverseConfig::Full => true,
            UniverseConfig::Bounded(d) => id < d.get(),
        }
    }

    pub fn size_f64(&self) -> f64 {
        match self {
            UniverseConfig::Full => 18_446_744_073_709_551_616.0,
            UniverseConfig::Bounded(d) => d.get() as f64,
        }
    }
}

/// A non-empty set of element IDs, stored strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetRecord {
    id: String,
    elements: Vec<u64>,
}

impl SetRecord {
    /// Takes elements that are already strictly ascending.
    pub fn new(id: impl Into<String>, elements: Vec<u64>) -> Result<Self> {
        let id = id.into();
        if elements.is_empty() {
            return Err(Error::EmptySet(id));
        }
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param(format!(
                "elements of set {id:?} are not strictly ascending"
            )));
        }
        Ok(SetRecord { id, elements })
    }

    /// Sorts and deduplicates arbitrary input.
    pub fn from_unsorted(id: impl Into<String>, elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut elements: Vec<u64> = elements.into_iter().collect();
        elements.sort_unstable();
        elements.dedup();
        SetRecord::new(id, elements)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn check_universe(&self, universe: &UniverseConfig) -> Result<()> {
        match self.elements.last() {
            Some(&max) if !universe.contains(max) => Err(Error::param(format!(
                "set {:?} has element {max} outside the universe",
                self.id
            ))),
            _ => Ok(()),
        }
    }

    /// Exact `(|A|, |B|, |A ∩ B|)` by merging the sorted element lists.
    pub fn ground_truth(&self, other: &SetRecord) -> PairGroundTruth {
        let (mut i, mut j, mut a) = (0, 0, 0u64);
        let (x, y) = (&self.elements, &other.elements);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    a += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        PairGroundTruth {
            f1: x.len() as u64,
            f2: y.len() as u64,
            a,
        }
    }
}

/// Cardinalities `f1 = |S1|`, `f2 = |S2|` and intersection size `a`.
///
/// Orientation is not canonicalised; `f1 < f2` is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairGroundTruth {
    f1: u64,
    f2: u64,
    a: u64,
}

/// Validates raw (possibly negative) caller input.
pub fn validate_ground_truth(f1: i64, f2: i64, a: i64) -> Result<PairGroundTruth> {
    if f1 < 0 || f2 < 0 || a < 0 {
        return Err(Error::InvalidGroundTruth(format!(
            "negative value in (f1={f1}, f2={f2}, a={a})"
        )));
    }
    PairGroundTruth::new(f1 as u64, f2 as u64, a as u64)
}

impl PairGroundTruth {
    pub fn new(f1: u64, f2: u64, a: u64) -> Result<Self> {
        if f1 == 0 || f2 == 0 {
            return Err(Error::InvalidGroundTruth(format!(
                "set sizes must be positive (f1={f1}, f2={f2})"
            )));
        }
        if a > f1.min(f2) {
            return Err(Error::InvalidGroundTruth(format!(
                "intersection a={a} exceeds min(f1, f2)={}",
                f1.min(f2)
            )));
        }
        Ok(PairGroundTruth { f1, f2, a })
    }

    pub fn f1(&self) -> u64 {
        self.f1
    }

    pub fn f2(&self) -> u64 {
        self.f2
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    /// `|S1 ∪ S2| = f1 + f2 - a`.
    pub fn union(&self) -> u64 {
        self.f1 + self.f2 - self.a
    }

    /// The same pair with the roles of the two sets exchanged.
    pub fn swapped(&self) -> Self {
        PairGroundTruth {
            f1: self.f2,
            f2: self.f1,
            a: self.a,
        }
    }

    pub fn resemblance<T: Scalar>(&self) -> T {
        T::from_count(self.a) / T::from_count(self.union())
    }

    /// Containment against the smaller set, `a / min(f1, f2)`.
    pub fn containment<T: Scalar>(&self) -> T {
        T::from_count(self.a) / T::from_count(self.f1.min(self.f2))
    }
}

/// Observed 3-cell counts from comparing two full minwise sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PairCounts3 {
    pub k_eq: u64,
    pub k_lt: u64,
    pub k_gt: u64,
}

impl PairCounts3 {
    pub fn new(k_eq: u64, k_lt: u64, k_gt: u64) -> Result<Self> {
        let c = PairCounts3 { k_eq, k_lt, k_gt };
        if c.k() == 0 {
            return Err(Error::param("pair counts must total at least 1"));
        }
        Ok(c)
    }

    pub fn k(&self) -> u64 {
        self.k_eq + self.k_lt + self.k_gt
    }

    /// Counts as seen with the two sketches exchanged.
    pub fn swapped(&self) -> Self {
        PairCounts3 {
            k_eq: self.k_eq,
            k_lt: self.k_gt,
            k_gt: self.k_lt,
        }
    }

    pub fn as_array(&self) -> [u64; 3] {
        [self.k_eq, self.k_lt, self.k_gt]
    }
}

/// Largest `b` for which the full `2^b x 2^b` table is materialised.
pub const MAX_TABLE_BITS: u32 = 8;

/// `2^b x 2^b` joint counts of b-bit values; entry `(t, d)` counts
/// permutations with `u1 = t` and `u2 = d`. Stored row-major by `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    b: u32,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(b: u32, counts: Vec<u64>) -> Result<Self> {
        if !(1..=MAX_TABLE_BITS).contains(&b) {
            return Err(Error::param(format!(
                "contingency tables need 1 <= b <= {MAX_TABLE_BITS}, got {b}"
            )));
        }
        let n = 1usize << b;
        if counts.len() != n * n {
            return Err(Error::param(format!(
                "expected {} table entries for b={b}, got {}",
                n * n,
                counts.len()
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::param("contingency table must total at least 1"));
        }
        Ok(ContingencyTable { b, counts })
    }

    pub(crate) fn from_parts_unchecked(b: u32, counts: Vec<u64>) -> Self {
        ContingencyTable { b, counts }
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    /// Side length `2^b`.
    pub fn side(&self) -> usize {
        1 << self.b
    }

    pub fn get(&self, t: usize, d: usize) -> u64 {
        self.counts[t * self.side() + d]
    }

    /// Row-major entries.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Diagonal sum, `t < d` sum and `t > d` sum.
    pub fn collapse(&self) -> PairCounts3 {
        let n = self.side();
        let mut c = PairCounts3::default();
        for t in 0..n {
            for d in 0..n {
                let v = self.counts[t * n + d];
                match t.cmp(&d) {
                    std::cmp::Ordering::Equal => c.k_eq += v,
                    std::cmp::Ordering::Less => c.k_lt += v,
                    std::cmp::Ordering::Greater => c.k_gt += v,
                }
            }
        }
        c
    }
}
