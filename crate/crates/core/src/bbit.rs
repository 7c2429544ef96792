//! Large-universe probability model for the lowest `b` bits of two minimums.
//!
//! With rates `r1 = f1/D`, `r2 = f2/D`, `s = a/D`, `u = r1 + r2 - s`,
//! `n = 2^b` and `q = 1 - u`, the joint distribution of `(u1, u2)` is
//!
//! ```text
//! geo(t)   = u q^t / (1 - q^n)
//! P(t, d)  = Pl r2 (1-r2)^(d-t-1) / g2 geo(t) + Pg r1 (1-r1)^(t+n-d-1) / g1 geo(d)   t < d
//! P(t, d)  = Pg r1 (1-r1)^(t-d-1) / g1 geo(d) + Pl r2 (1-r2)^(d+n-t-1) / g2 geo(t)   t > d
//! P(t, t)  = (R + Pl C2 + Pg C1) geo(t)
//! ```
//!
//! where `Pl = (r1-s)/u`, `Pg = (r2-s)/u`, `R = s/u`, `g_i = 1 - (1-r_i)^n`
//! and `C_i = r_i (1-r_i)^(n-1) / g_i`. All powers go through
//! `exp(e * ln_1p(-x))` so that tiny rates (`D = 2^64`) keep full relative
//! precision.

use std::fmt;
use std::str::FromStr;

use crate::scalar::{neumaier_sum, Real};
use crate::types::{ContingencyTable, PairGroundTruth, UniverseConfig, MAX_TABLE_BITS};
use crate::{Error, Result};

/// Largest supported `b`.
pub const MAX_BITS: u32 = 32;
/// Largest `b` for the schemes that keep one cell per diagonal value.
pub const MAX_DIAG_BITS: u32 = 16;
/// Below this many bits `P_lt` may be summed term by term.
const SERIES_MAX_BITS: u32 = 16;

/// Rates `(r1, r2, s)` with `0 <= s <= min(r1, r2)`, `r1, r2 > 0` and
/// `r1 + r2 - s <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateTriple<T> {
    r1: T,
    r2: T,
    s: T,
}

impl<T: Real> RateTriple<T> {
    pub fn new(r1: T, r2: T, s: T) -> Result<Self> {
        let ok = r1.is_finite()
            && r2.is_finite()
            && s.is_finite()
            && r1 > T::zero()
            && r2 > T::zero()
            && r1 <= T::one()
            && r2 <= T::one()
            && s >= T::zero()
            && s <= r1.min(r2)
            && r1 + r2 - s <= T::one() + Self::slack();
        if !ok {
            return Err(Error::param(format!(
                "infeasible rates (r1={r1:?}, r2={r2:?}, s={s:?})"
            )));
        }
        Ok(RateTriple { r1, r2, s })
    }

    fn slack() -> T {
        T::lit(1e-12).max(T::epsilon() * T::lit(8.0))
    }

    pub(crate) fn new_unchecked(r1: T, r2: T, s: T) -> Self {
        RateTriple { r1, r2, s }
    }

    /// Rates of a concrete pair in a universe of the given size.
    pub fn from_ground_truth(gt: &PairGroundTruth, universe: &UniverseConfig) -> Result<Self> {
        let d = universe.size_f64();
        if (gt.union() as f64) > d {
            return Err(Error::param("union exceeds the universe size"));
        }
        let rate = |x: u64| T::lit(x as f64 / d);
        RateTriple::new(rate(gt.f1()), rate(gt.f2()), rate(gt.a()))
    }

    pub fn r1(&self) -> T {
        self.r1
    }

    pub fn r2(&self) -> T {
        self.r2
    }

    pub fn s(&self) -> T {
        self.s
    }

    /// `u = r1 + r2 - s`.
    pub fn union(&self) -> T {
        self.r1 + self.r2 - self.s
    }

    pub fn resemblance(&self) -> T {
        self.s / self.union()
    }

    pub fn swapped(&self) -> Self {
        RateTriple {
            r1: self.r2,
            r2: self.r1,
            s: self.s,
        }
    }

    /// Same `(r1, r2)` with a different `s`.
    pub fn with_s(&self, s: T) -> Result<Self> {
        RateTriple::new(self.r1, self.r2, s)
    }

    /// Feasible range of `s` for these `(r1, r2)`.
    pub fn s_domain(&self) -> (T, T) {
        s_domain(self.r1, self.r2)
    }
}

/// `[max(0, r1 + r2 - 1), min(r1, r2)]`.
pub fn s_domain<T: Real>(r1: T, r2: T) -> (T, T) {
    ((r1 + r2 - T::one()).max(T::zero()), r1.min(r2))
}

/// The five ways of grouping the `2^b x 2^b` table into multinomial cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    /// Every `(t, d)` cell.
    Full,
    /// Diagonal cells plus the two off-diagonal triangles.
    DiagOff,
    /// Diagonal cells plus the whole off-diagonal.
    Diag,
    /// Diagonal, lower and upper triangle.
    Three,
    /// Diagonal versus off-diagonal.
    Equal,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 5] = [
        SchemeTag::Full,
        SchemeTag::DiagOff,
        SchemeTag::Diag,
        SchemeTag::Three,
        SchemeTag::Equal,
    ];

    pub fn max_bits(self) -> u32 {
        match self {
            SchemeTag::Full => MAX_TABLE_BITS,
            SchemeTag::DiagOff | SchemeTag::Diag => MAX_DIAG_BITS,
            SchemeTag::Three | SchemeTag::Equal => MAX_BITS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Full => "full",
            SchemeTag::DiagOff => "do",
            SchemeTag::Diag => "d",
            SchemeTag::Three => "3",
            SchemeTag::Equal => "eq",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "f" => Ok(SchemeTag::Full),
            "do" | "diag-off" => Ok(SchemeTag::DiagOff),
            "d" | "diag" => Ok(SchemeTag::Diag),
            "3" | "three" => Ok(SchemeTag::Three),
            "eq" | "=" => Ok(SchemeTag::Equal),
            other => Err(Error::param(format!("unknown grouping scheme {other:?}"))),
        }
    }
}

/// A scheme tag together with the number of bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupingScheme {
    tag: SchemeTag,
    b: u32,
}

impl GroupingScheme {
    pub fn new(tag: SchemeTag, b: u32) -> Result<Self> {
        if b == 0 || b > tag.max_bits() {
            return Err(Error::param(format!(
                "scheme {tag} supports 1 <= b <= {}, got {b}",
                tag.max_bits()
            )));
        }
        Ok(GroupingScheme { tag, b })
    }

    pub fn tag(&self) -> SchemeTag {
        self.tag
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn num_cells(&self) -> usize {
        let n = 1usize << self.b;
        match self.tag {
            SchemeTag::Full => n * n,
            SchemeTag::DiagOff => n + 2,
            SchemeTag::Diag => n + 1,
            SchemeTag::Three => 3,
            SchemeTag::Equal => 2,
        }
    }
}

fn check_bits(b: u32) -> Result<()> {
    if (1..=MAX_BITS).contains(&b) {
        Ok(())
    } else {
        Err(Error::param(format!("b must be in 1..={MAX_BITS}, got {b}")))
    }
}

/// Quantities shared by every cell for fixed `(b, rates)`.
#[derive(Debug, Clone, Copy)]
struct Terms<T> {
    n: T,
    r1: T,
    r2: T,
    s: T,
    /// `min(u, 1)`
    u: T,
    /// `1 - q^n`
    big_q: T,
    g1: T,
    g2: T,
    pl: T,
    pg: T,
    /// Total diagonal mass `R + Pl C2 + Pg C1`.
    diag: T,
}

impl<T: Real> Terms<T> {
    fn new(b: u32, rates: &RateTriple<T>) -> Self {
        let n = T::from_count(1u64 << b);
        let (r1, r2, s) = (rates.r1, rates.r2, rates.s);
        let u_raw = rates.union();
        let u = u_raw.min(T::one());
        let g1 = T::one_minus_pow_one_minus(r1, n);
        let g2 = T::one_minus_pow_one_minus(r2, n);
        let nm1 = n - T::one();
        let c1 = r1 * T::pow_one_minus(r1, nm1) / g1;
        let c2 = r2 * T::pow_one_minus(r2, nm1) / g2;
        let pl = ((r1 - s) / u_raw).max(T::zero());
        let pg = ((r2 - s) / u_raw).max(T::zero());
        Terms {
            n,
            r1,
            r2,
            s,
            u,
            big_q: T::one_minus_pow_one_minus(u, n),
            g1,
            g2,
            pl,
            pg,
            diag: s / u_raw + pl * c2 + pg * c1,
        }
    }

    fn geo(&self, t: T) -> T {
        self.u * T::pow_one_minus(self.u, t) / self.big_q
    }

    fn cell(&self, t: u64, d: u64) -> T {
        let n = self.n;
        let (tf, df) = (T::from_count(t), T::from_count(d));
        let one = T::one();
        let from_lt = |gap: T, at: T| {
            if self.pl == T::zero() {
                T::zero()
            } else {
                self.pl * self.r2 * T::pow_one_minus(self.r2, gap) / self.g2 * self.geo(at)
            }
        };
        let from_gt = |gap: T, at: T| {
            if self.pg == T::zero() {
                T::zero()
            } else {
                self.pg * self.r1 * T::pow_one_minus(self.r1, gap) / self.g1 * self.geo(at)
            }
        };
        match t.cmp(&d) {
            std::cmp::Ordering::Less => from_lt(df - tf - one, tf) + from_gt(tf + n - df - one, df),
            std::cmp::Ordering::Greater => from_gt(tf - df - one, df) + from_lt(df + n - tf - one, tf),
            std::cmp::Ordering::Equal => self.diag * self.geo(tf),
        }
    }

    /// `P_lt` from the closed form. Loses relative precision when `n u` is
    /// small, where both halves of each difference approach `(n-1) (r - s)`.
    fn p_lt_closed(&self) -> T {
        let one = T::one();
        let nm1 = self.n - one;
        let q = one - self.u;
        // 1 - q^(n-1)
        let e_q = T::one_minus_pow_one_minus(self.u, nm1);
        let d1 = self.r1 - self.s;
        let d2 = self.r2 - self.s;
        let first = if d1 <= T::zero() {
            T::zero()
        } else {
            // (1-r2)^(n-1) - q^(n-1) = (1-r2)^(n-1) E(n-1, (r1-s)/(1-r2))
            let tail = if self.r2 >= one {
                T::zero()
            } else {
                let x = (d1 / (one - self.r2)).min(one);
                (one - self.r2) * T::pow_one_minus(self.r2, nm1) * T::one_minus_pow_one_minus(x, nm1)
            };
            (d1 * e_q / self.u - tail) / (self.g2 * self.big_q)
        };
        let second = if d2 <= T::zero() || self.r1 >= one {
            T::zero()
        } else {
            let x = (d2 / (one - self.r1)).min(one);
            let scaled = q * T::one_minus_pow_one_minus(x, nm1) - d2 * q * e_q / self.u;
            T::pow_one_minus(self.r1, nm1) * scaled / (self.g1 * self.big_q)
        };
        first + second
    }

    /// `P_lt` as a sum of `O(n)` positive terms.
    fn p_lt_series(&self) -> T {
        let n = self.n.to_u64().expect("n fits in u64");
        let d1 = (self.r1 - self.s).max(T::zero());
        let d2 = (self.r2 - self.s).max(T::zero());
        // Every power goes through ln1p/expm1: products of rounded (1 - r)
        // factors drift once r is below the unit roundoff.
        // S_A = sum_{t=0}^{n-2} q^t E(n-1-t, r2)
        let s_a = neumaier_sum((0..n - 1).map(|t| {
            T::pow_one_minus(self.u, T::from_count(t)) * T::one_minus_pow_one_minus(self.r2, T::from_count(n - 1 - t))
        }));
        // S_B = sum_{d=1}^{n-1} q^d (1-r1)^(n-1-d) E(d, r1)
        let s_b = neumaier_sum((1..n).map(|d| {
            let df = T::from_count(d);
            T::pow_one_minus(self.u, df)
                * T::pow_one_minus(self.r1, T::from_count(n - 1 - d))
                * T::one_minus_pow_one_minus(self.r1, df)
        }));
        d1 / (self.g2 * self.big_q) * s_a + d2 / (self.g1 * self.big_q) * s_b
    }

    fn p_lt(&self, b: u32) -> T {
        let small = self.n * self.r1.min(self.r2) < T::one();
        if b <= SERIES_MAX_BITS && small {
            self.p_lt_series()
        } else {
            self.p_lt_closed()
        }
    }
}

/// `P(u1 = t, u2 = d)` for `0 <= t, d < 2^b`.
pub fn cell_prob<T: Real>(b: u32, rates: &RateTriple<T>, t: u64, d: u64) -> Result<T> {
    check_bits(b)?;
    let n = 1u64 << b;
    if t >= n || d >= n {
        return Err(Error::param(format!("cell ({t}, {d}) outside a {b}-bit table")));
    }
    Ok(Terms::new(b, rates).cell(t, d))
}

/// All `2^b x 2^b` cells, row-major by `t`. Requires `b <= 8`.
pub fn cell_matrix<T: Real>(b: u32, rates: &RateTriple<T>) -> Result<Vec<T>> {
    if !(1..=MAX_TABLE_BITS).contains(&b) {
        return Err(Error::param(format!(
            "the full cell matrix needs 1 <= b <= {MAX_TABLE_BITS}, got {b}"
        )));
    }
    let terms = Terms::new(b, rates);
    let n = 1usize << b;
    let pow_table = |r: T| -> Vec<T> { (0..n).map(|m| T::pow_one_minus(r, T::from_count(m as u64))).collect() };
    let pw1 = pow_table(rates.r1);
    let pw2 = pow_table(rates.r2);
    let geo: Vec<T> = (0..n).map(|t| terms.geo(T::from_count(t as u64))).collect();
    let lt = terms.pl * rates.r2 / terms.g2;
    let gt = terms.pg * rates.r1 / terms.g1;
    let mut out = Vec::with_capacity(n * n);
    for t in 0..n {
        for d in 0..n {
            let p = match t.cmp(&d) {
                std::cmp::Ordering::Less => lt * pw2[d - t - 1] * geo[t] + gt * pw1[t + n - d - 1] * geo[d],
                std::cmp::Ordering::Greater => gt * pw1[t - d - 1] * geo[d] + lt * pw2[d + n - t - 1] * geo[t],
                std::cmp::Ordering::Equal => terms.diag * geo[t],
            };
            out.push(p);
        }
    }
    Ok(out)
}

/// The diagonal cells `P(t, t)`, `t < 2^b`. Requires `b <= 16`.
pub fn diagonal_probs<T: Real>(b: u32, rates: &RateTriple<T>) -> Result<Vec<T>> {
    if !(1..=MAX_DIAG_BITS).contains(&b) {
        return Err(Error::param(format!(
            "per-value diagonal cells need 1 <= b <= {MAX_DIAG_BITS}, got {b}"
        )));
    }
    let terms = Terms::new(b, rates);
    Ok((0..1u64 << b)
        .map(|t| terms.diag * terms.geo(T::from_count(t)))
        .collect())
}

/// `P(u1 = u2)`, `P(u1 < u2)`, `P(u1 > u2)` for b-bit values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryProbs<T> {
    pub eq: T,
    pub lt: T,
    pub gt: T,
}

impl<T: Real> SummaryProbs<T> {
    pub fn sum(&self) -> T {
        self.eq + self.lt + self.gt
    }
}

/// Summary probabilities. `eq` is the diagonal mass `R + Pl C2 + Pg C1`;
/// `lt` uses the closed form (or the positive series where the closed form
/// cancels); `gt` is `lt` with the two sets exchanged.
pub fn summary_probs<T: Real>(b: u32, rates: &RateTriple<T>) -> Result<SummaryProbs<T>> {
    check_bits(b)?;
    let terms = Terms::new(b, rates);
    let swapped = Terms::new(b, &rates.swapped());
    Ok(SummaryProbs {
        eq: terms.diag,
        lt: terms.p_lt(b),
        gt: swapped.p_lt(b),
    })
}

/// `P(u1 < u2)` from the closed form alone, whatever the regime.
pub fn p_lt_closed_form<T: Real>(b: u32, rates: &RateTriple<T>) -> Result<T> {
    check_bits(b)?;
    Ok(Terms::new(b, rates).p_lt_closed())
}

/// `P(u1 < u2)` as a compensated sum of `O(2^b)` positive terms, `b <= 16`.
pub fn p_lt_series<T: Real>(b: u32, rates: &RateTriple<T>) -> Result<T> {
    if !(1..=SERIES_MAX_BITS).contains(&b) {
        return Err(Error::param(format!(
            "series evaluation needs 1 <= b <= {SERIES_MAX_BITS}, got {b}"
        )));
    }
    Ok(Terms::new(b, rates).p_lt_series())
}

/// Cell probabilities in the order used by [`grouped_counts`].
pub fn grouped_probs<T: Real>(scheme: &GroupingScheme, rates: &RateTriple<T>) -> Result<Vec<T>> {
    let b = scheme.b();
    match scheme.tag() {
        SchemeTag::Full => cell_matrix(b, rates),
        SchemeTag::DiagOff => {
            let sp = summary_probs(b, rates)?;
            let mut v = diagonal_probs(b, rates)?;
            v.extend([sp.lt, sp.gt]);
            Ok(v)
        }
        SchemeTag::Diag => {
            let sp = summary_probs(b, rates)?;
            let mut v = diagonal_probs(b, rates)?;
            v.push(sp.lt + sp.gt);
            Ok(v)
        }
        SchemeTag::Three => {
            let sp = summary_probs(b, rates)?;
            Ok(vec![sp.eq, sp.lt, sp.gt])
        }
        SchemeTag::Equal => {
            let sp = summary_probs(b, rates)?;
            Ok(vec![sp.eq, sp.lt + sp.gt])
        }
    }
}

/// Observed counts grouped exactly like [`grouped_probs`].
pub fn grouped_counts(table: &ContingencyTable, scheme: &GroupingScheme) -> Result<Vec<u64>> {
    if table.b() != scheme.b() {
        return Err(Error::Mismatch(format!(
            "table has b = {}, scheme expects b = {}",
            table.b(),
            scheme.b()
        )));
    }
    let n = table.side();
    let c3 = table.collapse();
    let diag = || (0..n).map(|t| table.get(t, t)).collect::<Vec<u64>>();
    Ok(match scheme.tag() {
        SchemeTag::Full => table.counts().to_vec(),
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
    })
}
