//! One-parameter multinomial maximum likelihood.
//!
//! A [`CellModel`] maps a scalar parameter to cell probabilities `q_i(θ)`.
//! The engine maximises `Σ k_i ln q_i(θ)` over the model's closed domain and
//! reports the Fisher information `k Σ q_i'^2 / q_i` at the optimum.

use crate::bbit::{grouped_probs, s_domain, GroupingScheme, RateTriple};
use crate::minwise::{three_cell_probs_at, EstimateResult, EstimatorTag};
use crate::scalar::Real;
use crate::{Error, Result};

/// A one-parameter family of multinomial cell probabilities.
///
/// Invariant: `probs(θ)` is non-negative and sums to one on `domain()`.
/// Implementations must be re-entrant.
pub trait CellModel<T: Real>: Sync {
    fn num_cells(&self) -> usize;

    /// Closed parameter interval `[lo, hi]`.
    fn domain(&self) -> (T, T);

    fn probs(&self, theta: T) -> Vec<T>;

    /// Exact `dq_i/dθ`, when the model knows it. Numeric differences are
    /// used otherwise.
    fn prob_derivs(&self, _theta: T) -> Option<Vec<T>> {
        None
    }
}

/// `q = (θ, 1 - θ)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinomialModel;

impl<T: Real> CellModel<T> for BinomialModel {
    fn num_cells(&self) -> usize {
        2
    }

    fn domain(&self) -> (T, T) {
        (T::zero(), T::one())
    }

    fn probs(&self, theta: T) -> Vec<T> {
        vec![theta, T::one() - theta]
    }

    fn prob_derivs(&self, _theta: T) -> Option<Vec<T>> {
        Some(vec![T::one(), -T::one()])
    }
}

/// The 3-cell minwise model in `θ = a` with known `(f1, f2)`.
#[derive(Debug, Clone, Copy)]
pub struct MinwiseModel<T> {
    pub f1: T,
    pub f2: T,
    /// Use exact derivatives (default) or numeric differences.
    pub analytic: bool,
}

impl<T: Real> MinwiseModel<T> {
    pub fn new(f1: T, f2: T) -> Self {
        MinwiseModel { f1, f2, analytic: true }
    }

    pub fn numeric(f1: T, f2: T) -> Self {
        MinwiseModel { f1, f2, analytic: false }
    }
}

impl<T: Real> CellModel<T> for MinwiseModel<T> {
    fn num_cells(&self) -> usize {
        3
    }

    fn domain(&self) -> (T, T) {
        (T::zero(), self.f1.min(self.f2))
    }

    fn probs(&self, a: T) -> Vec<T> {
        three_cell_probs_at(self.f1, self.f2, a).to_vec()
    }

    fn prob_derivs(&self, a: T) -> Option<Vec<T>> {
        if !self.analytic {
            return None;
        }
        let u = self.f1 + self.f2 - a;
        let u2 = u * u;
        Some(vec![(self.f1 + self.f2) / u2, -self.f2 / u2, -self.f1 / u2])
    }
}

/// A b-bit grouping scheme in `θ = s` with known `(r1, r2)`.
#[derive(Debug, Clone, Copy)]
pub struct BBitModel<T> {
    pub scheme: GroupingScheme,
    pub r1: T,
    pub r2: T,
}

impl<T: Real> BBitModel<T> {
    pub fn new(scheme: GroupingScheme, r1: T, r2: T) -> Result<Self> {
        // validates r1, r2 through the widest feasible s
        RateTriple::new(r1, r2, s_domain(r1, r2).1)?;
        Ok(BBitModel { scheme, r1, r2 })
    }
}

impl<T: Real> CellModel<T> for BBitModel<T> {
    fn num_cells(&self) -> usize {
        self.scheme.num_cells()
    }

    fn domain(&self) -> (T, T) {
        s_domain(self.r1, self.r2)
    }

    fn probs(&self, s: T) -> Vec<T> {
        let rates = RateTriple::new_unchecked(self.r1, self.r2, s);
        grouped_probs(&self.scheme, &rates).expect("scheme validated at construction")
    }
}

/// Default finite-difference step: `0.1 ε^(1/5)` of the domain width,
/// balancing the `h^4` truncation of 5-point stencils against rounding.
pub fn default_step<T: Real>(lo: T, hi: T) -> T {
    T::lit(0.1) * T::epsilon().powf(T::lit(0.2)) * (hi - lo)
}

/// `dq_i/dθ`: the model's exact derivatives if it has them, otherwise
/// 5-point stencils with [`default_step`].
pub fn cell_derivatives<T: Real, M: CellModel<T> + ?Sized>(model: &M, theta: T) -> Vec<T> {
    if let Some(d) = model.prob_derivs(theta) {
        return d;
    }
    let (lo, hi) = model.domain();
    numeric_derivatives(model, theta, default_step(lo, hi))
}

/// Fourth-order differences with step `h`: central where `θ ± 2h` stays in
/// the domain, one-sided otherwise.
pub fn numeric_derivatives<T: Real, M: CellModel<T> + ?Sized>(model: &M, theta: T, h: T) -> Vec<T> {
    let (lo, hi) = model.domain();
    let at = |k: i32| model.probs(theta + T::lit(f64::from(k)) * h);
    let two = T::lit(2.0);
    let weights: &[(i32, f64)] = if theta - two * h >= lo && theta + two * h <= hi {
        &[(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)]
    } else if theta - two * h < lo {
        &[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)]
    } else {
        &[(0, 25.0), (-1, -48.0), (-2, 36.0), (-3, -16.0), (-4, 3.0)]
    };
    let mut out = vec![T::zero(); model.num_cells()];
    for &(k, w) in weights {
        let p = at(k);
        let w = T::lit(w);
        for (o, x) in out.iter_mut().zip(p) {
            *o = *o + w * x;
        }
    }
    let denom = T::lit(12.0) * h;
    out.into_iter().map(|x| x / denom).collect()
}

fn check_counts<T: Real, M: CellModel<T> + ?Sized>(model: &M, counts: &[u64]) -> Result<u64> {
    if counts.len() != model.num_cells() {
        return Err(Error::param(format!(
            "model has {} cells, got {} counts",
            model.num_cells(),
            counts.len()
        )));
    }
    Ok(counts.iter().sum())
}

/// `Σ k_i ln q_i(θ)`; cells with `k_i = 0` contribute nothing, and a
/// positive count on a zero-probability cell gives `-∞`.
pub fn log_likelihood<T: Real, M: CellModel<T> + ?Sized>(model: &M, counts: &[u64], theta: T) -> T {
    log_lik_of(&model.probs(theta), counts)
}

fn log_lik_of<T: Real>(probs: &[T], counts: &[u64]) -> T {
    let mut total = T::zero();
    for (&k, &q) in counts.iter().zip(probs) {
        if k == 0 {
            continue;
        }
        if q <= T::zero() {
            return T::neg_infinity();
        }
        total = total + T::from_count(k) * q.ln();
    }
    total
}

/// `l'(θ) = Σ k_i q_i'(θ) / q_i(θ)`.
pub fn score<T: Real, M: CellModel<T> + ?Sized>(model: &M, counts: &[u64], theta: T) -> T {
    let q = model.probs(theta);
    let dq = cell_derivatives(model, theta);
    let mut total = T::zero();
    for ((&k, &qi), &di) in counts.iter().zip(&q).zip(&dq) {
        if k > 0 {
            total = total + T::from_count(k) * di / qi;
        }
    }
    total
}

/// Fisher information and whether it diverges at this `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInfo<T> {
    /// `k Σ q_i'^2 / q_i`, capped at `T::max_value()`.
    pub value: T,
    /// A cell with `q_i ≈ 0` still has a non-negligible slope.
    pub diverging: bool,
}

const TINY_PROB: f64 = 1e-300;

/// `I(θ) = k Σ q_i'(θ)^2 / q_i(θ)`. Cells with `q_i < 1e-300` are skipped;
/// if such a cell has a non-negligible slope the information is flagged as
/// diverging and capped.
pub fn fisher_info<T: Real, M: CellModel<T> + ?Sized>(model: &M, theta: T, k: u64) -> FisherInfo<T> {
    let q = model.probs(theta);
    let dq = cell_derivatives(model, theta);
    let (lo, hi) = model.domain();
    let width = (hi - lo).max(T::min_positive_value());
    let tiny = T::lit(TINY_PROB).max(T::min_positive_value());
    let mut sum = T::zero();
    let mut diverging = false;
    for (&qi, &di) in q.iter().zip(&dq) {
        if qi < tiny {
            // a slope that is not rounding noise makes d(ln q)/dθ unbounded
            if di.abs() * width > T::lit(1e-12) {
                diverging = true;
            }
            continue;
        }
        sum = sum + di * di / qi;
    }
    let value = sum * T::from_count(k);
    if diverging || !value.is_finite() {
        return FisherInfo {
            value: T::max_value(),
            diverging: true,
        };
    }
    FisherInfo { value, diverging }
}

/// Result of [`solve_mle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleSolution<T> {
    pub theta_hat: T,
    pub log_lik: T,
    /// Total information `I(θ̂)` for all `k` observations.
    pub fisher_info: T,
    /// `1 / I(θ̂)`.
    pub var_asymptotic: T,
    pub at_boundary: bool,
}

const PRESCAN_POINTS: usize = 65;
const FALLBACK_POINTS: usize = 4096;
const GOLDEN_MAX_ITER: usize = 300;
const POLISH_MAX_ITER: usize = 200;

fn linspace<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    let last = T::from_count(points as u64 - 1);
    (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + (hi - lo) * T::from_count(i as u64) / last
            }
        })
        .collect()
}

/// True when the scanned values rise to their maximum and then fall.
fn is_unimodal<T: Real>(values: &[T], argmax: usize) -> bool {
    let slack = |a: T, b: T| T::lit(1e-12) * (a.abs().max(b.abs()) + T::one());
    let rising = values[..=argmax]
        .windows(2)
        .all(|w| w[0] == T::neg_infinity() || w[1] >= w[0] - slack(w[0], w[1]));
    let falling = values[argmax..]
        .windows(2)
        .all(|w| w[1] == T::neg_infinity() || w[1] <= w[0] + slack(w[0], w[1]));
    rising && falling
}

fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn golden_max<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Maximum-likelihood estimate of `θ` over the model's domain.
///
/// A 65-point scan brackets the maximum; if the scanned log-likelihood is
/// not unimodal the scan is refined to 4096 points. Golden-section search
/// narrows the bracket and a bisection on the score polishes the root.
/// Maximisers within `1e-9` of the domain width from an end are reported
/// as boundary solutions, with information evaluated one step inside.
pub fn solve_mle<T: Real, M: CellModel<T> + ?Sized>(model: &M, counts: &[u64]) -> Result<MleSolution<T>> {
    let k = check_counts(model, counts)?;
    if k == 0 {
        return Err(Error::param("counts must total at least 1"));
    }
    let (lo, hi) = model.domain();
    if lo.is_nan() || hi.is_nan() || hi <= lo {
        let info = fisher_info(model, lo, k);
        return Ok(MleSolution {
            theta_hat: lo,
            log_lik: log_likelihood(model, counts, lo),
            fisher_info: info.value,
            var_asymptotic: T::zero(),
            at_boundary: true,
        });
    }
    let width = hi - lo;

    let mut grid = linspace(lo, hi, PRESCAN_POINTS);
    let probs: Vec<Vec<T>> = grid.iter().map(|&t| model.probs(t)).collect();
    let flat = probs.iter().all(|p| {
        p.iter()
            .zip(&probs[0])
            .all(|(&x, &y)| (x - y).abs() <= T::lit(1e-14).max(T::epsilon() * T::lit(4.0)))
    });
    if flat {
        return Err(Error::FlatLikelihood);
    }
    let mut values: Vec<T> = probs.iter().map(|p| log_lik_of(p, counts)).collect();
    let mut best = argmax(&values);
    if !is_unimodal(&values, best) {
        grid = linspace(lo, hi, FALLBACK_POINTS);
        values = grid.iter().map(|&t| log_likelihood(model, counts, t)).collect();
        best = argmax(&values);
    }
    let left = grid[best.saturating_sub(1)];
    let right = grid[(best + 1).min(grid.len() - 1)];
    let ll = |t: T| log_likelihood(model, counts, t);
    let tol = (T::lit(1e-12) * width).max(T::epsilon() * hi.abs().max(lo.abs()) * T::lit(4.0));
    let mut theta = golden_max(ll, left, right, tol);
    // keep whichever end of the domain beats the interior candidate
    for end in [lo, hi] {
        if ll(end) > ll(theta) {
            theta = end;
        }
    }

    let edge = T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) * width;
    let at_boundary = theta - lo <= edge || hi - theta <= edge;
    if !at_boundary {
        theta = polish(model, counts, theta, width, lo, hi);
    }

    let step = default_step(lo, hi);
    let eval_at = if at_boundary {
        theta.max(lo + step).min(hi - step)
    } else {
        theta
    };
    let info = fisher_info(model, eval_at, k);
    let var = if info.value > T::zero() && info.value < T::max_value() {
        T::one() / info.value
    } else if info.diverging {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(MleSolution {
        theta_hat: theta,
        log_lik: ll(theta),
        fisher_info: info.value,
        var_asymptotic: var,
        at_boundary,
    })
}

/// Intersection estimate from grouped b-bit counts, for sets of sizes
/// `f1`, `f2` in a universe of `d` elements. Solves for `s` with
/// `r_i = f_i / d` known and reports `a = s d` with variance `d^2 / I(s)`.
pub fn estimate_bbit<T: Real>(
    scheme: GroupingScheme,
    counts: &[u64],
    f1: u64,
    f2: u64,
    d: T,
) -> Result<EstimateResult<T>> {
    if f1 == 0 || f2 == 0 {
        return Err(Error::param("set sizes must be positive"));
    }
    let (f1t, f2t) = (T::from_count(f1), T::from_count(f2));
    let model = BBitModel::new(scheme, f1t / d, f2t / d)?;
    let sol = solve_mle(&model, counts)?;
    Ok(EstimateResult::from_intersection(
        sol.theta_hat * d,
        f1t,
        f2t,
        sol.var_asymptotic * d * d,
        EstimatorTag::BBit(scheme.tag()),
        sol.at_boundary,
    ))
}

/// Bisection on the score within `±1e-6` of the domain width, if the score
/// changes sign there.
fn polish<T: Real, M: CellModel<T> + ?Sized>(
    model: &M,
    counts: &[u64],
    theta: T,
    width: T,
    lo: T,
    hi: T,
) -> T {
    let delta = T::lit(1e-6) * width;
    let (mut a, mut b) = ((theta - delta).max(lo), (theta + delta).min(hi));
    let (sa, sb) = (score(model, counts, a), score(model, counts, b));
    if !(sa > T::zero() && sb < T::zero()) {
        return theta;
    }
    let tol = T::epsilon() * T::lit(4.0) * theta.abs().max(width);
    for _ in 0..POLISH_MAX_ITER {
        if b - a <= tol {
            break;
        }
        let mid = (a + b) / T::lit(2.0);
        if score(model, counts, mid) > T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a + b) / T::lit(2.0)
}
