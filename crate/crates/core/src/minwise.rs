//! Estimators of the intersection size `a` from full minwise sketches.
//!
//! The three counts `(k_eq, k_lt, k_gt)` follow a 3-cell multinomial with
//! probabilities `a/u`, `(f1-a)/u`, `(f2-a)/u` where `u = f1 + f2 - a`.
//! The classic estimator only uses `k_eq`; the maximum-likelihood estimator
//! uses all three and is never worse asymptotically.

use std::fmt;

use crate::bbit::SchemeTag;
use crate::scalar::{Real, Scalar};
use crate::types::{PairCounts3, PairGroundTruth};
use crate::{Error, Result};

/// `(P_eq, P_lt, P_gt)`: probabilities of `z1 = z2`, `z1 < z2`, `z1 > z2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeCell<T> {
    pub eq: T,
    pub lt: T,
    pub gt: T,
}

impl<T: Scalar> ThreeCell<T> {
    pub fn sum(&self) -> T {
        self.eq.clone() + self.lt.clone() + self.gt.clone()
    }

    pub fn to_vec(&self) -> Vec<T> {
        vec![self.eq.clone(), self.lt.clone(), self.gt.clone()]
    }
}

/// Exact in any field; `ThreeCell<Exact>` sums to exactly one.
pub fn three_cell_probs<T: Scalar>(gt: &PairGroundTruth) -> ThreeCell<T> {
    three_cell_probs_at(
        T::from_count(gt.f1()),
        T::from_count(gt.f2()),
        T::from_count(gt.a()),
    )
}

/// The same probabilities at real-valued `(f1, f2, a)`.
pub fn three_cell_probs_at<T: Scalar>(f1: T, f2: T, a: T) -> ThreeCell<T> {
    let u = f1.clone() + f2.clone() - a.clone();
    ThreeCell {
        eq: a.clone() / u.clone(),
        lt: (f1 - a.clone()) / u.clone(),
        gt: (f2 - a) / u,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimpleEstimator {
    /// `â_= = (f1 + f2) k_eq / (k + k_eq)`
    Equal,
    /// `â_< = f1 - f2 k_lt / (k - k_lt)`
    Less,
    /// `â_> = f2 - f1 k_gt / (k - k_gt)`
    Greater,
}

impl SimpleEstimator {
    pub const ALL: [SimpleEstimator; 3] = [Self::Equal, Self::Less, Self::Greater];

    fn name(self) -> &'static str {
        match self {
            Self::Equal => "equal",
            Self::Less => "less",
            Self::Greater => "greater",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarianceKind {
    Equal,
    Less,
    Greater,
    /// Variance of the resemblance estimate `k_eq / k` itself.
    ClassicResemblance,
}

impl From<SimpleEstimator> for VarianceKind {
    fn from(e: SimpleEstimator) -> Self {
        match e {
            SimpleEstimator::Equal => VarianceKind::Equal,
            SimpleEstimator::Less => VarianceKind::Less,
            SimpleEstimator::Greater => VarianceKind::Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorTag {
    Equal,
    Less,
    Greater,
    Mle,
    BBit(SchemeTag),
}

impl From<SimpleEstimator> for EstimatorTag {
    fn from(e: SimpleEstimator) -> Self {
        match e {
            SimpleEstimator::Equal => EstimatorTag::Equal,
            SimpleEstimator::Less => EstimatorTag::Less,
            SimpleEstimator::Greater => EstimatorTag::Greater,
        }
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorTag::Equal => f.write_str("standard"),
            EstimatorTag::Less => f.write_str("less"),
            EstimatorTag::Greater => f.write_str("greater"),
            EstimatorTag::Mle => f.write_str("mle"),
            EstimatorTag::BBit(s) => write!(f, "bbit-{s}"),
        }
    }
}

impl std::str::FromStr for EstimatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "eq" => Ok(EstimatorTag::Equal),
            "less" | "lt" => Ok(EstimatorTag::Less),
            "greater" | "gt" => Ok(EstimatorTag::Greater),
            "mle" => Ok(EstimatorTag::Mle),
            other => match other.strip_prefix("bbit-") {
                Some(tag) => Ok(EstimatorTag::BBit(tag.parse()?)),
                None => Err(Error::param(format!("unknown estimator {other:?}"))),
            },
        }
    }
}

/// An intersection estimate and the quantities derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult<T> {
    /// Clamped to `[0, min(f1, f2)]`.
    pub a_hat: T,
    /// Value before clamping (diagnostic).
    pub a_unclamped: T,
    pub r_hat: T,
    pub t_hat: T,
    /// Leading `O(1/k)` variance of `a_hat`, evaluated at `a_hat`.
    pub var_asymptotic: T,
    pub estimator: EstimatorTag,
    pub at_boundary: bool,
}

impl<T: Real> EstimateResult<T> {
    pub(crate) fn from_intersection(
        a_unclamped: T,
        f1: T,
        f2: T,
        var_asymptotic: T,
        estimator: EstimatorTag,
        at_boundary: bool,
    ) -> Self {
        let m = f1.min(f2);
        let a_hat = a_unclamped.max(T::zero()).min(m);
        EstimateResult {
            a_hat,
            a_unclamped,
            r_hat: a_hat / (f1 + f2 - a_hat),
            t_hat: a_hat / m,
            var_asymptotic,
            estimator,
            at_boundary,
        }
    }

    pub fn std_error(&self) -> T {
        self.var_asymptotic.max(T::zero()).sqrt()
    }
}

fn check_inputs(counts: &PairCounts3, f1: u64, f2: u64) -> Result<()> {
    if counts.k() == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    if f1 == 0 || f2 == 0 {
        return Err(Error::param("set sizes must be positive"));
    }
    Ok(())
}

/// One of the three moment estimators, clamped to the feasible range.
///
/// Fails with [`Error::Boundary`] when the formula divides by zero
/// (`k_lt = k` for `Less`, `k_gt = k` for `Greater`).
pub fn estimate_simple<T: Real>(
    counts: &PairCounts3,
    f1: u64,
    f2: u64,
    which: SimpleEstimator,
) -> Result<EstimateResult<T>> {
    check_inputs(counts, f1, f2)?;
    let k = T::from_count(counts.k());
    let (f1r, f2r) = (T::from_count(f1), T::from_count(f2));
    let raw = match which {
        SimpleEstimator::Equal => {
            let ke = T::from_count(counts.k_eq);
            (f1r + f2r) * ke / (k + ke)
        }
        SimpleEstimator::Less => {
            if counts.k_lt == counts.k() {
                return Err(Error::Boundary(which.name()));
            }
            let kl = T::from_count(counts.k_lt);
            f1r - f2r * kl / (k - kl)
        }
        SimpleEstimator::Greater => {
            if counts.k_gt == counts.k() {
                return Err(Error::Boundary(which.name()));
            }
            let kg = T::from_count(counts.k_gt);
            f2r - f1r * kg / (k - kg)
        }
    };
    let m = f1r.min(f2r);
    let clamped = raw.max(T::zero()).min(m);
    let var = simple_variance_at(f1r, f2r, clamped, counts.k(), which.into());
    Ok(EstimateResult::from_intersection(
        raw,
        f1r,
        f2r,
        var,
        which.into(),
        clamped <= T::zero() || clamped >= m,
    ))
}

/// Leading-order variance of a simple estimator at real-valued parameters.
pub fn simple_variance_at<T: Scalar>(f1: T, f2: T, a: T, k: u64, kind: VarianceKind) -> T {
    let k = T::from_count(k);
    let sum = f1.clone() + f2.clone();
    let u = sum.clone() - a.clone();
    let u2 = u.clone() * u.clone();
    match kind {
        VarianceKind::Equal => {
            let two_a = a.clone() + a.clone();
            u2 * a * (sum.clone() - two_a) / (sum.clone() * sum) / k
        }
        VarianceKind::Less => u2 * (f1 - a) / f2 / k,
        VarianceKind::Greater => u2 * (f2 - a) / f1 / k,
        VarianceKind::ClassicResemblance => {
            let r = a / u;
            r.clone() * (T::one() - r) / k
        }
    }
}

pub fn variance_simple<T: Scalar>(gt: &PairGroundTruth, k: u64, kind: VarianceKind) -> T {
    simple_variance_at(
        T::from_count(gt.f1()),
        T::from_count(gt.f2()),
        T::from_count(gt.a()),
        k,
        kind,
    )
}

/// A variance that is zero when the parameter sits on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedVariance<T> {
    pub value: T,
    /// True when `a = 0` or `a = min(f1, f2)` (information diverges).
    pub at_boundary: bool,
}

/// Asymptotic variance of the 3-cell MLE at real-valued parameters.
pub fn mle3_variance_at<T: Scalar>(f1: T, f2: T, a: T, k: u64) -> BoundedVariance<T> {
    let zero = T::zero();
    if a <= zero || f1.clone() - a.clone() <= zero || f2.clone() - a.clone() <= zero {
        return BoundedVariance {
            value: zero,
            at_boundary: true,
        };
    }
    let sum = f1.clone() + f2.clone();
    let u = sum.clone() - a.clone();
    let info = sum / a.clone() + f2.clone() / (f1.clone() - a.clone()) + f1 / (f2 - a);
    BoundedVariance {
        value: u.clone() * u / info / T::from_count(k),
        at_boundary: false,
    }
}

pub fn variance_mle3<T: Scalar>(gt: &PairGroundTruth, k: u64) -> BoundedVariance<T> {
    mle3_variance_at(
        T::from_count(gt.f1()),
        T::from_count(gt.f2()),
        T::from_count(gt.a()),
        k,
    )
}

/// Derivative of the 3-cell log-likelihood in `a` (up to a positive
/// factor): `k_eq (f1+f2)/a - k_lt f2/(f1-a) - k_gt f1/(f2-a)`.
/// Strictly decreasing on `(0, min(f1, f2))`.
pub fn mle3_score<T: Real>(counts: &PairCounts3, f1: T, f2: T, a: T) -> T {
    let term = |k: u64, num: T, den: T| {
        if k == 0 {
            T::zero()
        } else {
            T::from_count(k) * num / den
        }
    };
    term(counts.k_eq, f1 + f2, a) - term(counts.k_lt, f2, f1 - a) - term(counts.k_gt, f1, f2 - a)
}

const MLE3_MAX_ITER: usize = 200;

/// Maximum-likelihood estimate of `a` from 3-cell counts.
///
/// Bisection on [`mle3_score`]; degenerate count vectors resolve to the
/// boundary where the likelihood is larger.
pub fn estimate_mle3<T: Real>(counts: &PairCounts3, f1: u64, f2: u64) -> Result<EstimateResult<T>> {
    check_inputs(counts, f1, f2)?;
    let (f1r, f2r) = (T::from_count(f1), T::from_count(f2));
    let m = f1r.min(f2r);
    let rel = T::lit(1e-12).max(T::epsilon() * T::lit(4.0));
    let eps = m * rel;

    let a_star = if counts.k_eq == 0 {
        T::zero()
    } else if counts.k_lt == 0 && counts.k_gt == 0 {
        m
    } else {
        let (mut lo, mut hi) = (eps, m - eps);
        if mle3_score(counts, f1r, f2r, lo) <= T::zero() {
            T::zero()
        } else if mle3_score(counts, f1r, f2r, hi) >= T::zero() {
            m
        } else {
            let mut iter = 0;
            while hi - lo > eps && iter < MLE3_MAX_ITER {
                let mid = (lo + hi) / T::lit(2.0);
                if mle3_score(counts, f1r, f2r, mid) > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                iter += 1;
            }
            (lo + hi) / T::lit(2.0)
        }
    };
    let var = mle3_variance_at(f1r, f2r, a_star, counts.k());
    Ok(EstimateResult::from_intersection(
        a_star,
        f1r,
        f2r,
        var.value,
        EstimatorTag::Mle,
        var.at_boundary,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use proptest::prelude::*;

    fn gt(f1: u64, f2: u64, a: u64) -> PairGroundTruth {
        PairGroundTruth::new(f1, f2, a).unwrap()
    }

    fn close(x: f64, y: f64, tol: f64) -> bool {
        (x - y).abs() <= tol
    }

    #[test]
    fn three_cell_examples() {
        let p = three_cell_probs::<f64>(&gt(4, 2, 1));
        assert!(close(p.eq, 0.2, 1e-15) && close(p.lt, 0.6, 1e-15) && close(p.gt, 0.2, 1e-15));
        let p = three_cell_probs::<f64>(&gt(3, 3, 3));
        assert_eq!(p.to_vec(), vec![1.0, 0.0, 0.0]);
        let p = three_cell_probs::<f64>(&gt(5, 5, 0));
        assert_eq!(p.to_vec(), vec![0.0, 0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn exact_three_cell_sums_to_one(f1 in 1u64..500, f2 in 1u64..500, frac in 0.0f64..=1.0) {
            let a = (frac * f1.min(f2) as f64).floor() as u64;
            let p = three_cell_probs::<Exact>(&gt(f1, f2, a));
            prop_assert_eq!(p.sum(), Exact::from_integer(1.into()));
        }
    }

    #[test]
    fn simple_estimator_examples() {
        let c = PairCounts3::new(2, 6, 2).unwrap();
        for which in SimpleEstimator::ALL {
            let e = estimate_simple::<f64>(&c, 4, 2, which).unwrap();
            assert!(close(e.a_hat, 1.0, 1e-15), "{which:?}: {}", e.a_hat);
            assert!(close(e.r_hat, 0.2, 1e-15));
            assert!(close(e.t_hat, 0.5, 1e-15));
        }
    }

    #[test]
    fn simple_estimator_boundaries() {
        let all_lt = PairCounts3::new(0, 5, 0).unwrap();
        assert!(matches!(
            estimate_simple::<f64>(&all_lt, 4, 2, SimpleEstimator::Less),
            Err(Error::Boundary(_))
        ));
        let all_gt = PairCounts3::new(0, 0, 5).unwrap();
        assert!(estimate_simple::<f64>(&all_gt, 4, 2, SimpleEstimator::Greater).is_err());
        // â_< exits the feasible range and is clamped; the raw value is kept.
        let c = PairCounts3::new(0, 9, 1).unwrap();
        let e = estimate_simple::<f64>(&c, 4, 2, SimpleEstimator::Less).unwrap();
        assert!(e.a_unclamped < 0.0);
        assert_eq!(e.a_hat, 0.0);
        assert!(e.at_boundary);
    }

    #[test]
    fn closed_form_variances_at_small_pair() {
        let g = gt(4, 2, 1);
        assert!(close(variance_simple::<f64>(&g, 100, VarianceKind::Equal), 1.0 / 36.0, 1e-15));
        assert!(close(variance_simple::<f64>(&g, 100, VarianceKind::Greater), 0.0625, 1e-15));
        assert!(close(variance_simple::<f64>(&g, 100, VarianceKind::Less), 0.375, 1e-15));
        assert!(close(variance_mle3::<f64>(&g, 100).value, 0.0234375, 1e-15));
        // Exact arithmetic gives the same rationals.
        assert_eq!(
            variance_mle3::<Exact>(&g, 100).value,
            Exact::new(3.into(), 128.into())
        );
        let disjoint = gt(5, 7, 0);
        assert_eq!(
            variance_simple::<f64>(&disjoint, 10, VarianceKind::ClassicResemblance),
            0.0
        );
        assert!(variance_mle3::<f64>(&disjoint, 10).at_boundary);
        assert!(variance_mle3::<f64>(&gt(5, 7, 5), 10).at_boundary);
    }

    #[test]
    fn high_containment_ratio_exceeds_ten() {
        let g = gt(1_000_000, 200_000, 190_000);
        let ratio = variance_simple::<f64>(&g, 1, VarianceKind::Equal) / variance_mle3::<f64>(&g, 1).value;
        assert!(close(ratio, 11.53, 0.01), "{ratio}");
    }

    #[test]
    fn equal_sizes_make_the_standard_estimator_optimal() {
        for f in [10u64, 1000, 123_457] {
            for a in [1, f / 3, f / 2, f - 1] {
                let g = gt(f, f, a);
                let ratio = variance_simple::<f64>(&g, 1, VarianceKind::Equal) / variance_mle3::<f64>(&g, 1).value;
                assert!(close(ratio, 1.0, 1e-12), "{f} {a} {ratio}");
            }
        }
        // ratio shrinks towards 1 as f2/f1 -> 1 at fixed small containment
        let mut prev = f64::INFINITY;
        for f2 in [100_000.0, 300_000.0, 600_000.0, 900_000.0, 999_000.0] {
            let a = 0.05 * f2;
            let r = simple_variance_at(1e6, f2, a, 1, VarianceKind::Equal) / mle3_variance_at(1e6, f2, a, 1).value;
            assert!(r >= 1.0 - 1e-12 && r <= prev + 1e-12, "{f2} {r}");
            prev = r;
        }
        assert!(prev < 1.0 + 1e-3);
    }

    #[test]
    fn mle_examples() {
        let c = PairCounts3::new(2, 6, 2).unwrap();
        let e = estimate_mle3::<f64>(&c, 4, 2).unwrap();
        assert!(close(e.a_hat, 1.0, 1e-10), "{}", e.a_hat);
        assert!(!e.at_boundary);
        assert!(close(e.var_asymptotic, 25.0 / (6.0 + 2.0 / 3.0 + 4.0) / 10.0, 1e-9));

        let e = estimate_mle3::<f64>(&PairCounts3::new(9, 0, 0).unwrap(), 4, 2).unwrap();
        assert_eq!(e.a_hat, 2.0);
        assert!(e.at_boundary);
        assert_eq!(e.t_hat, 1.0);

        let e = estimate_mle3::<f64>(&PairCounts3::new(0, 3, 4).unwrap(), 4, 2).unwrap();
        assert_eq!(e.a_hat, 0.0);
        assert!(e.at_boundary);
    }

    #[test]
    fn mle_works_in_single_precision() {
        let c = PairCounts3::new(2, 6, 2).unwrap();
        let e = estimate_mle3::<f32>(&c, 4, 2).unwrap();
        assert!((e.a_hat - 1.0).abs() < 1e-5, "{}", e.a_hat);
    }

    #[test]
    fn mle_one_empty_off_cell_can_stay_interior() {
        // f1 = f2 with k_gt = 0 still has an interior root.
        let e = estimate_mle3::<f64>(&PairCounts3::new(5, 5, 0).unwrap(), 10, 10).unwrap();
        assert!(e.a_hat > 0.0 && e.a_hat < 10.0);
        assert!(mle3_score(&PairCounts3::new(5, 5, 0).unwrap(), 10.0, 10.0, e.a_hat).abs() < 1e-6);
        // f1 > f2 with k_gt = 0 and many matches pins a at f2.
        let e = estimate_mle3::<f64>(&PairCounts3::new(50, 1, 0).unwrap(), 10, 5).unwrap();
        assert_eq!(e.a_hat, 5.0);
    }

    proptest! {
        #[test]
        fn score_is_strictly_decreasing(k_eq in 1u64..200, k_lt in 0u64..200, k_gt in 0u64..200,
                                        f1 in 1u64..10_000, f2 in 1u64..10_000,
                                        x in 0.001f64..0.998, dx in 0.0005f64..0.001) {
            let c = PairCounts3::new(k_eq, k_lt, k_gt).unwrap();
            let m = f1.min(f2) as f64;
            let (a, b) = (x * m, (x + dx) * m);
            prop_assert!(mle3_score(&c, f1 as f64, f2 as f64, a) > mle3_score(&c, f1 as f64, f2 as f64, b));
        }

        #[test]
        fn mle_is_orientation_symmetric(k_eq in 0u64..100, k_lt in 0u64..100, k_gt in 0u64..100,
                                        f1 in 1u64..5_000, f2 in 1u64..5_000) {
            prop_assume!(k_eq + k_lt + k_gt > 0);
            let c = PairCounts3::new(k_eq, k_lt, k_gt).unwrap();
            let e = estimate_mle3::<f64>(&c, f1, f2).unwrap();
            let s = estimate_mle3::<f64>(&c.swapped(), f2, f1).unwrap();
            prop_assert!((e.a_hat - s.a_hat).abs() <= 1e-9 * f1.min(f2) as f64);
        }
    }

    #[test]
    fn mle_variance_is_never_worse_than_simple_estimators() {
        for f1 in [10.0, 100.0, 1e4, 1e6] {
            for ratio in [0.01, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.9, 0.99, 1.0] {
                let f2: f64 = f1 * ratio;
                for t in [0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99, 0.999] {
                    let a = f2 * t;
                    let mle = mle3_variance_at(f1, f2, a, 1).value;
                    for kind in [VarianceKind::Equal, VarianceKind::Less, VarianceKind::Greater] {
                        let v = simple_variance_at(f1, f2, a, 1, kind);
                        assert!(mle <= v * (1.0 + 1e-12), "{f1} {f2} {a} {kind:?}");
                    }
                }
            }
        }
    }
}
