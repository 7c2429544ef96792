//! Reference probabilities computed independently of the estimators.
//!
//! Two families:
//! - exact, finite-`D`: brute-force enumeration of all `D!` permutations
//!   (`D <= 7`) and the product formula for `P(z1 = z2 = i)`, both in
//!   rational arithmetic;
//! - large-`D` limit: the geometric joint law of `(z1, z2)` and its
//!   residue-class sums, which give the b-bit cells without any closed form.

use itertools::Itertools;
use num_traits::{One, Zero};

use crate::bbit::RateTriple;
use crate::minwise::ThreeCell;
use crate::scalar::{neumaier_sum, Scalar};
use crate::types::{PairGroundTruth, MAX_TABLE_BITS};
use crate::{Error, Exact, Result};

/// Largest universe for exhaustive permutation enumeration.
pub const MAX_ENUMERATION_UNIVERSE: u64 = 7;

/// Bound on the truncated tail of every limit-law sum.
pub const TAIL_BOUND: f64 = 1e-15;

/// `P(z1 = z2 = i)` under a uniform random permutation of `{0, .., D-1}`:
/// `(a/D) Π_{t<i} (D - u - t) / (D - 1 - t)` with `u = f1 + f2 - a`.
/// Zero for `i > D - u`.
pub fn exact_equal_min_prob(d: u64, gt: &PairGroundTruth, i: u64) -> Result<Exact> {
    let u = gt.union();
    if u > d {
        return Err(Error::param(format!("union {u} exceeds universe {d}")));
    }
    if i > d - u {
        return Ok(Exact::zero());
    }
    let mut p = Exact::from_count(gt.a()) / Exact::from_count(d);
    for t in 0..i {
        p = p * Exact::from_count(d - u - t) / Exact::from_count(d - 1 - t);
    }
    Ok(p)
}

fn factorial(d: u64) -> u64 {
    (1..=d).product()
}

fn mask_of(d: u64, set: &[u64]) -> Result<u32> {
    let mut m = 0u32;
    for &x in set {
        if x >= d {
            return Err(Error::param(format!("element {x} outside universe {d}")));
        }
        m |= 1 << x;
    }
    if m == 0 {
        return Err(Error::EmptySet("enumeration input".into()));
    }
    Ok(m)
}

/// Position of the first element of every subset under one permutation:
/// `out[mask] = min_{x in mask} pos[x]`.
fn min_positions(pos: &[usize], out: &mut [u8]) {
    out[0] = u8::MAX;
    for mask in 1..out.len() {
        let low = mask.trailing_zeros() as usize;
        out[mask] = out[mask & (mask - 1)].min(pos[low] as u8);
    }
}

/// Exact joint law of `(z1, z2)` over all `D!` permutations, `D <= 7`.
#[derive(Debug, Clone)]
pub struct JointMinDistribution {
    d: u64,
    gt: PairGroundTruth,
    /// `counts[i * D + j]` permutations with `z1 = i`, `z2 = j`.
    counts: Vec<u64>,
}

impl JointMinDistribution {
    pub fn enumerate(d: u64, s1: &[u64], s2: &[u64]) -> Result<Self> {
        if d == 0 || d > MAX_ENUMERATION_UNIVERSE {
            return Err(Error::param(format!(
                "enumeration needs 1 <= D <= {MAX_ENUMERATION_UNIVERSE}, got {d}"
            )));
        }
        let (m1, m2) = (mask_of(d, s1)?, mask_of(d, s2)?);
        let gt = PairGroundTruth::new(
            u64::from(m1.count_ones()),
            u64::from(m2.count_ones()),
            u64::from((m1 & m2).count_ones()),
        )?;
        let n = d as usize;
        let mut counts = vec![0u64; n * n];
        let mut mins = vec![0u8; 1 << n];
        for pos in (0..n).permutations(n) {
            min_positions(&pos, &mut mins);
            counts[mins[m1 as usize] as usize * n + mins[m2 as usize] as usize] += 1;
        }
        Ok(JointMinDistribution { d, gt, counts })
    }

    pub fn universe(&self) -> u64 {
        self.d
    }

    pub fn ground_truth(&self) -> PairGroundTruth {
        self.gt
    }

    /// Exact `P(z1 = i, z2 = j)`.
    pub fn prob(&self, i: u64, j: u64) -> Exact {
        if i >= self.d || j >= self.d {
            return Exact::zero();
        }
        let n = self.d as usize;
        Exact::from_count(self.counts[i as usize * n + j as usize]) / Exact::from_count(factorial(self.d))
    }

    /// Exact `(P(z1 = z2), P(z1 < z2), P(z1 > z2))`.
    pub fn three_cell(&self) -> ThreeCell<Exact> {
        let n = self.d as usize;
        let mut c = [0u64; 3];
        for i in 0..n {
            for j in 0..n {
                let slot = match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 0,
                    std::cmp::Ordering::Less => 1,
                    std::cmp::Ordering::Greater => 2,
                };
                c[slot] += self.counts[i * n + j];
            }
        }
        let total = Exact::from_count(factorial(self.d));
        ThreeCell {
            eq: Exact::from_count(c[0]) / total.clone(),
            lt: Exact::from_count(c[1]) / total.clone(),
            gt: Exact::from_count(c[2]) / total,
        }
    }
}

/// 3-cell outcome counts for one ordered pair of subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEnumeration {
    pub mask1: u32,
    pub mask2: u32,
    /// Permutations with `z1 = z2`, `z1 < z2`, `z1 > z2`; they sum to `D!`.
    pub counts: [u64; 3],
}

impl PairEnumeration {
    pub fn ground_truth(&self) -> PairGroundTruth {
        PairGroundTruth::new(
            u64::from(self.mask1.count_ones()),
            u64::from(self.mask2.count_ones()),
            u64::from((self.mask1 & self.mask2).count_ones()),
        )
        .expect("non-empty masks")
    }
}

/// Enumerates every permutation of `{0, .., D-1}` once and tallies the
/// 3-cell outcome for every ordered pair of non-empty subsets.
pub fn enumerate_all_pairs(d: u64) -> Result<Vec<PairEnumeration>> {
    if d == 0 || d > MAX_ENUMERATION_UNIVERSE {
        return Err(Error::param(format!(
            "enumeration needs 1 <= D <= {MAX_ENUMERATION_UNIVERSE}, got {d}"
        )));
    }
    let n = d as usize;
    let subsets = (1usize << n) - 1;
    let mut counts = vec![[0u64; 3]; subsets * subsets];
    let mut mins = vec![0u8; 1 << n];
    for pos in (0..n).permutations(n) {
        min_positions(&pos, &mut mins);
        for m1 in 1..=subsets {
            let z1 = mins[m1];
            let row = &mut counts[(m1 - 1) * subsets..m1 * subsets];
            for (m2, cell) in (1..=subsets).zip(row.iter_mut()) {
                let z2 = mins[m2];
                let slot = match z1.cmp(&z2) {
                    std::cmp::Ordering::Equal => 0,
                    std::cmp::Ordering::Less => 1,
                    std::cmp::Ordering::Greater => 2,
                };
                cell[slot] += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(idx, counts)| PairEnumeration {
            mask1: (idx / subsets + 1) as u32,
            mask2: (idx % subsets + 1) as u32,
            counts,
        })
        .collect())
}

/// Large-`D` limit of `P(z1 = i, z2 = j)`:
///
/// ```text
/// i < j: r2 (r1 - s) (1 - r2)^(j-i-1) (1 - u)^i
/// i > j: r1 (r2 - s) (1 - r1)^(i-j-1) (1 - u)^j
/// i = j: s (1 - u)^i
/// ```
pub fn limit_joint_prob(rates: &RateTriple<f64>, i: u64, j: u64) -> f64 {
    let (r1, r2, s) = (rates.r1(), rates.r2(), rates.s());
    let q = (1.0 - rates.union()).max(0.0);
    let pow = |x: f64, e: u64| if e == 0 { 1.0 } else { x.powf(e as f64) };
    match i.cmp(&j) {
        std::cmp::Ordering::Less => r2 * (r1 - s) * pow(1.0 - r2, j - i - 1) * pow(q, i),
        std::cmp::Ordering::Greater => r1 * (r2 - s) * pow(1.0 - r1, i - j - 1) * pow(q, j),
        std::cmp::Ordering::Equal => s * pow(q, i),
    }
}

/// Mass of the limit law outside `[0, m)^2`: at most
/// `P(z1 >= m) + P(z2 >= m) = (1 - r1)^m + (1 - r2)^m`.
pub fn limit_tail_bound(rates: &RateTriple<f64>, m: u64) -> f64 {
    (1.0 - rates.r1()).powf(m as f64) + (1.0 - rates.r2()).powf(m as f64)
}

/// Smallest `m` with `limit_tail_bound(rates, m) <= TAIL_BOUND`.
pub fn truncation_point(rates: &RateTriple<f64>) -> u64 {
    let r = rates.r1().min(rates.r2());
    let mut m = ((TAIL_BOUND / 2.0).ln() / (-r).ln_1p()).ceil().max(1.0) as u64;
    while limit_tail_bound(rates, m) > TAIL_BOUND {
        m += 1;
    }
    m
}

/// `P(u1 = t, u2 = d)` by summing the limit law over `z1 ≡ t`, `z2 ≡ d`
/// modulo `2^b`, truncated at [`truncation_point`].
pub fn bbit_cell_prob_by_summation(b: u32, rates: &RateTriple<f64>, t: u64, d: u64) -> f64 {
    let n = 1u64 << b;
    let m = truncation_point(rates);
    let terms = (t..m)
        .step_by(n as usize)
        .flat_map(|i| (d..m).step_by(n as usize).map(move |j| (i, j)))
        .map(|(i, j)| limit_joint_prob(rates, i, j));
    neumaier_sum(terms)
}

/// All `2^b x 2^b` cells at once (row-major by `t`), `b <= 8`.
pub fn bbit_matrix_by_summation(b: u32, rates: &RateTriple<f64>) -> Result<Vec<f64>> {
    if !(1..=MAX_TABLE_BITS).contains(&b) {
        return Err(Error::param(format!("summation oracle needs 1 <= b <= {MAX_TABLE_BITS}")));
    }
    let n = 1usize << b;
    let m = truncation_point(rates) as usize;
    let (r1, r2, s) = (rates.r1(), rates.r2(), rates.s());
    let q = (1.0 - rates.union()).max(0.0);
    let powers = |x: f64| -> Vec<f64> {
        let mut v = Vec::with_capacity(m);
        let mut p = 1.0;
        for _ in 0..m {
            v.push(p);
            p *= x;
        }
        v
    };
    let (pw1, pw2, pq) = (powers(1.0 - r1), powers(1.0 - r2), powers(q));
    let mut sums = vec![0.0f64; n * n];
    let mut comps = vec![0.0f64; n * n];
    let mut add = |cell: usize, x: f64| {
        let t = sums[cell] + x;
        if sums[cell].abs() >= x.abs() {
            comps[cell] += (sums[cell] - t) + x;
        } else {
            comps[cell] += (x - t) + sums[cell];
        }
        sums[cell] = t;
    };
    for (i, &p_i) in pq.iter().enumerate().take(m) {
        add((i % n) * n + i % n, s * p_i);
        for j in (i + 1)..m {
            let gap = j - i - 1;
            add((i % n) * n + j % n, r2 * (r1 - s) * pw2[gap] * p_i);
            add((j % n) * n + i % n, r1 * (r2 - s) * pw1[gap] * p_i);
        }
    }
    Ok(sums.iter().zip(&comps).map(|(x, c)| x + c).collect())
}

/// Exact 3-cell probabilities for a pair, as rationals that sum to one.
pub fn exact_three_cell(gt: &PairGroundTruth) -> ThreeCell<Exact> {
    let u = Exact::from_count(gt.union());
    ThreeCell {
        eq: Exact::from_count(gt.a()) / u.clone(),
        lt: Exact::from_count(gt.f1() - gt.a()) / u.clone(),
        gt: Exact::from_count(gt.f2() - gt.a()) / u,
    }
}

/// `Σ_i P(z1 = z2 = i)` from the product formula.
pub fn exact_equal_probability(d: u64, gt: &PairGroundTruth) -> Result<Exact> {
    let mut total = Exact::zero();
    for i in 0..=d {
        total += exact_equal_min_prob(d, gt, i)?;
    }
    Ok(total)
}

/// True when the rationals sum to exactly one.
pub fn is_distribution(p: &ThreeCell<Exact>) -> bool {
    p.sum().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bbit::cell_matrix;

    fn gt(f1: u64, f2: u64, a: u64) -> PairGroundTruth {
        PairGroundTruth::new(f1, f2, a).unwrap()
    }

    fn rates(r1: f64, r2: f64, s: f64) -> RateTriple<f64> {
        RateTriple::new(r1, r2, s).unwrap()
    }

    #[test]
    fn product_formula_examples() {
        let g = gt(2, 2, 1);
        assert_eq!(exact_equal_min_prob(6, &g, 0).unwrap(), Exact::new(1.into(), 6.into()));
        assert_eq!(exact_equal_probability(6, &g).unwrap(), Exact::new(1.into(), 3.into()));
        assert!(exact_equal_min_prob(6, &g, 4).unwrap().is_zero());
        assert!(exact_equal_min_prob(2, &g, 0).is_err());
    }

    #[test]
    fn enumeration_matches_product_formula() {
        let dist = JointMinDistribution::enumerate(6, &[0, 1], &[1, 2]).unwrap();
        for i in 0..6 {
            assert_eq!(dist.prob(i, i), exact_equal_min_prob(6, &dist.ground_truth(), i).unwrap());
        }
        let p = dist.three_cell();
        assert!(is_distribution(&p));
        assert_eq!(p, exact_three_cell(&gt(2, 2, 1)));
    }

    #[test]
    fn enumeration_input_validation() {
        assert!(JointMinDistribution::enumerate(8, &[0], &[1]).is_err());
        assert!(JointMinDistribution::enumerate(4, &[], &[1]).is_err());
        assert!(JointMinDistribution::enumerate(4, &[4], &[1]).is_err());
        assert!(enumerate_all_pairs(0).is_err());
    }

    #[test]
    fn all_pairs_on_a_small_universe() {
        let d = 4;
        let pairs = enumerate_all_pairs(d).unwrap();
        assert_eq!(pairs.len(), 15 * 15);
        let total = Exact::from_count(factorial(d));
        for p in pairs {
            let expect = exact_three_cell(&p.ground_truth());
            let got: Vec<Exact> = p.counts.iter().map(|&c| Exact::from_count(c) / total.clone()).collect();
            assert_eq!(got, expect.to_vec(), "{:b} {:b}", p.mask1, p.mask2);
        }
    }

    #[test]
    fn limit_law_sums() {
        let r = rates(0.5, 0.25, 0.2);
        let m = truncation_point(&r);
        assert!(limit_tail_bound(&r, m) <= TAIL_BOUND);
        let diag = neumaier_sum((0..m).map(|i| limit_joint_prob(&r, i, i)));
        assert!((diag - r.resemblance()).abs() < 1e-14);
        let all = neumaier_sum((0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| limit_joint_prob(&r, i, j)));
        assert!((all - 1.0).abs() < 1e-12);
        let lower = neumaier_sum((0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).map(|(i, j)| limit_joint_prob(&r, i, j)));
        assert!((lower - (0.5 - 0.2) / 0.55).abs() < 1e-12);
    }

    #[test]
    fn summation_oracle_examples() {
        let same = rates(0.3, 0.3, 0.3);
        let m = bbit_matrix_by_summation(2, &same).unwrap();
        for t in 0..4 {
            for d in 0..4 {
                if t != d {
                    assert_eq!(m[t * 4 + d], 0.0);
                }
            }
        }
        let r = rates(0.5, 0.25, 0.2);
        let fwd = bbit_matrix_by_summation(3, &r).unwrap();
        let rev = bbit_matrix_by_summation(3, &r.swapped()).unwrap();
        for t in 0..8 {
            for d in 0..8 {
                assert!((fwd[t * 8 + d] - rev[d * 8 + t]).abs() < 1e-15);
                let single = bbit_cell_prob_by_summation(3, &r, t as u64, d as u64);
                assert!((single - fwd[t * 8 + d]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn summation_oracle_agrees_with_closed_cells() {
        for r in [rates(0.5, 0.25, 0.2), rates(0.2, 0.02, 0.0), rates(0.8, 0.2, 0.198), rates(0.6, 0.4, 0.0)] {
            for b in [1, 2, 4, 8] {
                let oracle = bbit_matrix_by_summation(b, &r).unwrap();
                let model = cell_matrix(b, &r).unwrap();
                for (x, y) in oracle.iter().zip(&model) {
                    assert!((x - y).abs() < 1e-12, "{r:?} b={b}: {x} vs {y}");
                }
            }
        }
    }
}
