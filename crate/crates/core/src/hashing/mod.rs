//! Seeded hash family standing in for random permutations, and the minwise
//! and b-bit sketches built from it.
//!
//! `hash_j(x) = finalize(x ^ subkey_j)` with `subkey_j = finalize(seed + j)`,
//! where `finalize` is the SplitMix64 output function. Everything is pure
//! integer arithmetic with wrapping semantics, so sketches are identical on
//! every platform.

pub mod file;
pub mod pack;

use std::cmp::Ordering;

use crate::bbit::{GroupingScheme, SchemeTag};
use crate::minwise::{estimate_mle3, estimate_simple, EstimateResult, EstimatorTag, SimpleEstimator};
use crate::mle::estimate_bbit;
use crate::types::{ContingencyTable, PairCounts3, SetRecord, UniverseConfig, MAX_TABLE_BITS};
use crate::{Error, Result};

pub use file::Sketch;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (increment by the golden gamma, then the
/// multiply-xor-shift avalanche).
#[inline]
pub fn finalize(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed, e.g. one per replication.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    finalize(master ^ finalize(index))
}

/// `k` seeded hash functions `hash_0 .. hash_{k-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashFamily {
    master_seed: u64,
    subkeys: Vec<u64>,
}

impl HashFamily {
    pub fn new(master_seed: u64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k must be at least 1"));
        }
        if k > u32::MAX as usize {
            return Err(Error::param("k must fit in 32 bits"));
        }
        let subkeys = (0..k as u64)
            .map(|j| finalize(master_seed.wrapping_add(j)))
            .collect();
        Ok(HashFamily {
            master_seed,
            subkeys,
        })
    }

    pub fn seed(&self) -> u64 {
        self.master_seed
    }

    pub fn k(&self) -> usize {
        self.subkeys.len()
    }

    #[inline]
    pub fn hash(&self, j: usize, x: u64) -> u64 {
        finalize(x ^ self.subkeys[j])
    }
}

/// `k` minimum hash values of one set, plus its exact cardinality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinwiseSketch {
    f: u64,
    seed: u64,
    mins: Vec<u64>,
}

impl MinwiseSketch {
    pub fn from_parts(f: u64, seed: u64, mins: Vec<u64>) -> Result<Self> {
        if f == 0 {
            return Err(Error::param("sketched set must be non-empty"));
        }
        if mins.is_empty() || mins.len() > u32::MAX as usize {
            return Err(Error::param("sketch must hold between 1 and 2^32-1 values"));
        }
        Ok(MinwiseSketch { f, seed, mins })
    }

    pub fn f(&self) -> u64 {
        self.f
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[u64] {
        &self.mins
    }
}

/// The lowest `b` bits of each minimum, bit-packed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BBitSketch {
    f: u64,
    seed: u64,
    k: usize,
    b: u32,
    packed: Vec<u8>,
}

impl BBitSketch {
    pub fn from_values(f: u64, seed: u64, b: u32, values: &[u32]) -> Result<Self> {
        check_bits(b)?;
        if f == 0 || values.is_empty() || values.len() > u32::MAX as usize {
            return Err(Error::param("b-bit sketch needs f >= 1 and 1 <= k < 2^32"));
        }
        Ok(BBitSketch {
            f,
            seed,
            k: values.len(),
            b,
            packed: pack::pack(values, b),
        })
    }

    pub(crate) fn from_packed(f: u64, seed: u64, k: usize, b: u32, packed: Vec<u8>) -> Result<Self> {
        check_bits(b)?;
        if packed.len() != pack::packed_len(k, b) {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {}",
                packed.len(),
                pack::packed_len(k, b)
            )));
        }
        Ok(BBitSketch { f, seed, k, b, packed })
    }

    pub fn f(&self) -> u64 {
        self.f
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn packed(&self) -> &[u8] {
        &self.packed
    }

    pub fn value(&self, j: usize) -> u32 {
        assert!(j < self.k, "index {j} out of range for k={}", self.k);
        pack::get(&self.packed, self.b, j)
    }

    pub fn values(&self) -> Vec<u32> {
        pack::unpack(&self.packed, self.b, self.k)
    }

    /// Keeps only the lowest `b` bits, `b <= self.b()`.
    pub fn reduce_bits(&self, b: u32) -> Result<BBitSketch> {
        check_bits(b)?;
        if b > self.b {
            return Err(Error::param(format!(
                "cannot widen a {}-bit sketch to {b} bits",
                self.b
            )));
        }
        BBitSketch::from_values(self.f, self.seed, b, &self.values())
    }
}

fn check_bits(b: u32) -> Result<()> {
    if (1..=32).contains(&b) {
        Ok(())
    } else {
        Err(Error::param(format!("b must be in 1..=32, got {b}")))
    }
}

/// Minwise sketch with 64-bit hash values (`D = 2^64`).
pub fn sketch_minwise(set: &SetRecord, family: &HashFamily) -> MinwiseSketch {
    let mut mins = vec![u64::MAX; family.k()];
    for &x in set.elements() {
        for (j, m) in mins.iter_mut().enumerate() {
            let h = family.hash(j, x);
            if h < *m {
                *m = h;
            }
        }
    }
    MinwiseSketch {
        f: set.len() as u64,
        seed: family.seed(),
        mins,
    }
}

/// Minwise sketches over a bounded universe `{0, .., D-1}`.
///
/// Hash function `j` induces a permutation of the universe: elements are
/// ordered by `(hash_j(y), y)` and `π_j(y)` is the rank in that order. The
/// stored minimum is `min π_j(S)`, so values are ranks in `[0, D)` with no
/// collisions. Cost is `O(D)` per hash function, so this is meant for tests
/// and simulations on modest universes.
pub fn sketch_minwise_in_universe(
    sets: &[SetRecord],
    family: &HashFamily,
    universe: u64,
) -> Result<Vec<MinwiseSketch>> {
    if universe == 0 {
        return Err(Error::param("universe size must be at least 1"));
    }
    let d = usize::try_from(universe).map_err(|_| Error::param("universe too large"))?;
    for s in sets {
        if s.elements().last().is_some_and(|&m| m >= universe) {
            return Err(Error::param(format!(
                "set {:?} has an element outside the universe of size {universe}",
                s.id()
            )));
        }
    }
    let mut mins = vec![Vec::with_capacity(family.k()); sets.len()];
    let mut hashes = vec![0u64; d];
    for j in 0..family.k() {
        for (y, h) in hashes.iter_mut().enumerate() {
            *h = family.hash(j, y as u64);
        }
        for (s, out) in sets.iter().zip(mins.iter_mut()) {
            let argmin = s
                .elements()
                .iter()
                .map(|&x| (hashes[x as usize], x))
                .min()
                .expect("non-empty set");
            let rank = hashes
                .iter()
                .enumerate()
                .filter(|&(y, &h)| (h, y as u64) < argmin)
                .count();
            out.push(rank as u64);
        }
    }
    Ok(sets
        .iter()
        .zip(mins)
        .map(|(s, m)| MinwiseSketch {
            f: s.len() as u64,
            seed: family.seed(),
            mins: m,
        })
        .collect())
}

/// Keeps the lowest `b` bits of every minimum, `1 <= b <= 32`.
pub fn truncate_to_bbit(sketch: &MinwiseSketch, b: u32) -> Result<BBitSketch> {
    check_bits(b)?;
    let mask = (1u64 << b) - 1;
    let values: Vec<u32> = sketch.mins.iter().map(|&z| (z & mask) as u32).collect();
    BBitSketch::from_values(sketch.f, sketch.seed, b, &values)
}

/// 3-cell comparison of two aligned value sequences.
pub fn three_cell_counts<V: Ord>(z1: &[V], z2: &[V]) -> PairCounts3 {
    let mut c = PairCounts3::default();
    for (x, y) in z1.iter().zip(z2) {
        match x.cmp(y) {
            Ordering::Equal => c.k_eq += 1,
            Ordering::Less => c.k_lt += 1,
            Ordering::Greater => c.k_gt += 1,
        }
    }
    c
}

fn check_alignment(seed: (u64, u64), k: (usize, usize)) -> Result<()> {
    if seed.0 != seed.1 {
        return Err(Error::Mismatch(format!("seed {:#x} vs {:#x}", seed.0, seed.1)));
    }
    if k.0 != k.1 {
        return Err(Error::Mismatch(format!("k = {} vs {}", k.0, k.1)));
    }
    Ok(())
}

pub fn compare_minwise(s1: &MinwiseSketch, s2: &MinwiseSketch) -> Result<PairCounts3> {
    check_alignment((s1.seed, s2.seed), (s1.k(), s2.k()))?;
    Ok(three_cell_counts(&s1.mins, &s2.mins))
}

fn check_bbit_alignment(s1: &BBitSketch, s2: &BBitSketch) -> Result<()> {
    check_alignment((s1.seed, s2.seed), (s1.k, s2.k))?;
    if s1.b != s2.b {
        return Err(Error::Mismatch(format!("b = {} vs {}", s1.b, s2.b)));
    }
    Ok(())
}

/// Full `2^b x 2^b` contingency table, `b <= 8`.
pub fn compare_bbit(s1: &BBitSketch, s2: &BBitSketch) -> Result<ContingencyTable> {
    check_bbit_alignment(s1, s2)?;
    if s1.b > MAX_TABLE_BITS {
        return Err(Error::param(format!(
            "full contingency table needs b <= {MAX_TABLE_BITS}; use compare_bbit_grouped"
        )));
    }
    let n = 1usize << s1.b;
    let mut counts = vec![0u64; n * n];
    for (t, d) in s1.values().into_iter().zip(s2.values()) {
        counts[t as usize * n + d as usize] += 1;
    }
    Ok(ContingencyTable::from_parts_unchecked(s1.b, counts))
}

/// Observed counts grouped as `scheme` prescribes, without materialising
/// the full table (so coarse schemes work for `b` up to 32).
pub fn compare_bbit_grouped(
    s1: &BBitSketch,
    s2: &BBitSketch,
    scheme: &GroupingScheme,
) -> Result<Vec<u64>> {
    check_bbit_alignment(s1, s2)?;
    if scheme.b() != s1.b {
        return Err(Error::Mismatch(format!(
            "scheme expects b = {}, sketches have b = {}",
            scheme.b(),
            s1.b
        )));
    }
    if scheme.tag() == SchemeTag::Full {
        return Ok(compare_bbit(s1, s2)?.counts().to_vec());
    }
    Ok(grouped_value_counts(&s1.values(), &s2.values(), scheme))
}

/// Estimates the intersection of the two sets behind `s1` and `s2`.
///
/// Three-cell estimators need full sketches and `bbit-*` estimators need
/// b-bit sketches; `universe` only matters for the latter.
pub fn estimate_from_sketches(
    s1: &Sketch,
    s2: &Sketch,
    estimator: EstimatorTag,
    universe: &UniverseConfig,
) -> Result<EstimateResult<f64>> {
    match (s1, s2, estimator) {
        (Sketch::Full(a), Sketch::Full(b), EstimatorTag::Mle) => estimate_mle3(&compare_minwise(a, b)?, a.f(), b.f()),
        (Sketch::Full(a), Sketch::Full(b), EstimatorTag::Equal) => {
            estimate_simple(&compare_minwise(a, b)?, a.f(), b.f(), SimpleEstimator::Equal)
        }
        (Sketch::Full(a), Sketch::Full(b), EstimatorTag::Less) => {
            estimate_simple(&compare_minwise(a, b)?, a.f(), b.f(), SimpleEstimator::Less)
        }
        (Sketch::Full(a), Sketch::Full(b), EstimatorTag::Greater) => {
            estimate_simple(&compare_minwise(a, b)?, a.f(), b.f(), SimpleEstimator::Greater)
        }
        (Sketch::BBit(a), Sketch::BBit(b), EstimatorTag::BBit(tag)) => {
            let scheme = GroupingScheme::new(tag, a.b())?;
            let counts = compare_bbit_grouped(a, b, &scheme)?;
            estimate_bbit(scheme, &counts, a.f(), b.f(), universe.size_f64())
        }
        (Sketch::Full(_), Sketch::Full(_), EstimatorTag::BBit(_)) => {
            Err(Error::Mismatch(format!("{estimator} needs b-bit sketches")))
        }
        (Sketch::BBit(_), Sketch::BBit(_), _) => Err(Error::Mismatch(format!("{estimator} needs full sketches"))),
        _ => Err(Error::Mismatch("one full and one b-bit sketch".into())),
    }
}

/// Groups aligned b-bit value pairs into the cells of `scheme`. Values must
/// be below `2^scheme.b()`.
pub fn grouped_value_counts(v1: &[u32], v2: &[u32], scheme: &GroupingScheme) -> Vec<u64> {
    let n = 1usize << scheme.b();
    let c3 = three_cell_counts(v1, v2);
    let diag = || {
        let mut diag = vec![0u64; n];
        for (&t, &d) in v1.iter().zip(v2) {
            if t == d {
                diag[t as usize] += 1;
            }
        }
        diag
    };
    match scheme.tag() {
        SchemeTag::Full => {
            let mut counts = vec![0u64; n * n];
            for (&t, &d) in v1.iter().zip(v2) {
                counts[t as usize * n + d as usize] += 1;
            }
            counts
        }
        SchemeTag::DiagOff => {
            let mut v = diag();
            v.extend([c3.k_lt, c3.k_gt]);
            v
        }
        SchemeTag::Diag => {
            let mut v = diag();
            v.push(c3.k_lt + c3.k_gt);
            v
        }
        SchemeTag::Three => c3.as_array().to_vec(),
        SchemeTag::Equal => vec![c3.k_eq, c3.k_lt + c3.k_gt],
    }
}
