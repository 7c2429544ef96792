//! Monte Carlo mean, bias and MSE of intersection estimators on a
//! synthetic pair with known `(f1, f2, a)`.
//!
//! Replication `r` draws everything from `derive_seed(seed, r)`, so each
//! replication is reproducible on its own and the output does not depend on
//! thread scheduling. Within a replication the `k` values are nested: the
//! estimate at `k` uses the first `k` samples.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::format_float;
use crate::bbit::{GroupingScheme, RateTriple, SchemeTag};
use crate::hashing::{
    derive_seed, grouped_value_counts, sketch_minwise, sketch_minwise_in_universe, HashFamily,
};
use crate::minwise::{estimate_mle3, estimate_simple, variance_mle3, variance_simple, SimpleEstimator};
use crate::mle::{fisher_info, solve_mle, BBitModel};
use crate::types::{PairCounts3, PairGroundTruth, SetRecord, UniverseConfig};
use crate::{Error, Result};

/// How the minimums of the two sets are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Draw from the probability model directly: the 3-cell outcome is the
    /// class of a uniformly chosen union element (exact for any `D`);
    /// b-bit values follow the large-`D` geometric joint law of the
    /// minimums. Cost is `O(k)` per replication.
    #[default]
    Model,
    /// Build the sets and sketch them with the hash family. With a bounded
    /// universe the minimums are ranks in the hash-induced permutation
    /// (`O(D k)` per replication); otherwise 64-bit hash values.
    Hashed,
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(SamplingMode::Model),
            "hashed" | "hash" => Ok(SamplingMode::Hashed),
            other => Err(Error::param(format!("unknown sampling mode {other:?}"))),
        }
    }
}

/// An estimator under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimEstimator {
    Simple(SimpleEstimator),
    Mle,
    /// b-bit MLE of `s` under a grouping scheme, reported as `a = s D`.
    BBit(SchemeTag),
}

impl FromStr for SimEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" | "eq" => Ok(SimEstimator::Simple(SimpleEstimator::Equal)),
            "less" | "lt" => Ok(SimEstimator::Simple(SimpleEstimator::Less)),
            "greater" | "gt" => Ok(SimEstimator::Simple(SimpleEstimator::Greater)),
            "mle" => Ok(SimEstimator::Mle),
            other => match other.strip_prefix("bbit-") {
                Some(tag) => Ok(SimEstimator::BBit(tag.parse()?)),
                None => Err(Error::param(format!("unknown estimator {other:?}"))),
            },
        }
    }
}

impl fmt::Display for SimEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimEstimator::Simple(SimpleEstimator::Equal) => f.write_str("standard"),
            SimEstimator::Simple(SimpleEstimator::Less) => f.write_str("less"),
            SimEstimator::Simple(SimpleEstimator::Greater) => f.write_str("greater"),
            SimEstimator::Mle => f.write_str("mle"),
            SimEstimator::BBit(tag) => write!(f, "bbit-{tag}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub ground_truth: PairGroundTruth,
    pub universe: UniverseConfig,
    pub k_values: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<SimEstimator>,
    /// Bits for the b-bit estimators.
    pub bits: u32,
    pub mode: SamplingMode,
}

impl SimulationSpec {
    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::param("replications must be at least 1"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::param("k values must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::param("at least one estimator is required"));
        }
        if (self.ground_truth.union() as f64) > self.universe.size_f64() {
            return Err(Error::InvalidGroundTruth("union exceeds the universe size".into()));
        }
        for e in &self.estimators {
            if let SimEstimator::BBit(tag) = e {
                GroupingScheme::new(*tag, self.bits)?;
            }
        }
        Ok(())
    }

    fn rates(&self) -> Result<RateTriple<f64>> {
        RateTriple::from_ground_truth(&self.ground_truth, &self.universe)
    }
}

/// Summary for one `(estimator, k)` cell. Simple estimators are scored
/// before clamping; the MLEs are feasible by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub estimator: SimEstimator,
    pub k: usize,
    /// Replications that produced an estimate.
    pub used: usize,
    /// Replications where the estimator was undefined (e.g. `k_lt = k`).
    pub failures: usize,
    pub mean: f64,
    pub bias: f64,
    pub mse: f64,
    /// Leading-order variance at the true parameters.
    pub var_theory: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "estimator", "k", "used", "failures", "mean", "bias", "mse", "var_theory", "mse_over_theory",
];

impl SimRow {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.estimator.to_string(),
            self.k.to_string(),
            self.used.to_string(),
            self.failures.to_string(),
            format_float(self.mean),
            format_float(self.bias),
            format_float(self.mse),
            format_float(self.var_theory),
            format_float(self.mse / self.var_theory),
        ]
    }
}

/// Per-replication draws: 3-cell outcomes and, if needed, b-bit values.
struct Draws {
    cells: Vec<u8>,
    low1: Vec<u32>,
    low2: Vec<u32>,
}

const EQ: u8 = 0;
const LT: u8 = 1;
const GT: u8 = 2;

/// `X mod 2^bits` for `X ~ Geometric(p)` on `{0, 1, ..}`, by inversion of
/// the truncated law `P(r) ∝ (1-p)^r`, from a uniform `v` in `[0, 1)`.
/// Quotient and remainder of a geometric variable are independent, and the
/// inversion stays exact for `p` far below the unit roundoff.
fn geometric_remainder(p: f64, bits: u32, v: f64) -> u64 {
    let n = (1u64 << bits) as f64;
    if p >= 1.0 || bits == 0 {
        return 0;
    }
    let lq = (-p).ln_1p();
    // 1 - (1-p)^n
    let mass = -(n * lq).exp_m1();
    let r = ((-v * mass).ln_1p() / lq).floor();
    (r.max(0.0) as u64).min((1u64 << bits) - 1)
}

fn draw_model(spec: &SimulationSpec, rates: &RateTriple<f64>, k: usize, rng: &mut ChaCha8Rng, need_bits: bool) -> Draws {
    let gt = spec.ground_truth;
    let union = gt.union();
    let mut cells = Vec::with_capacity(k);
    let (mut low1, mut low2) = (Vec::new(), Vec::new());
    let bits = spec.bits.min(32);
    let mask = (1u64 << bits) - 1;
    for _ in 0..k {
        let x = rng.random_range(0..union);
        let cell = if x < gt.a() {
            EQ
        } else if x < gt.f1() {
            LT
        } else {
            GT
        };
        cells.push(cell);
        if need_bits {
            // only the low bits are kept, so wrapping sums of remainders suffice
            let z = geometric_remainder(rates.union(), bits, rng.random());
            let (z1, z2) = match cell {
                EQ => (z, z),
                LT => (z, z.wrapping_add(1).wrapping_add(geometric_remainder(rates.r2(), bits, rng.random()))),
                _ => (z.wrapping_add(1).wrapping_add(geometric_remainder(rates.r1(), bits, rng.random())), z),
            };
            low1.push((z1 & mask) as u32);
            low2.push((z2 & mask) as u32);
        }
    }
    Draws { cells, low1, low2 }
}

fn synthetic_sets(gt: &PairGroundTruth) -> (SetRecord, SetRecord) {
    let (a, f1, f2) = (gt.a(), gt.f1(), gt.f2());
    let s1 = SetRecord::new("s1", (0..f1).collect()).expect("f1 >= 1");
    let s2 = SetRecord::from_unsorted("s2", (0..a).chain(f1..f1 + f2 - a)).expect("f2 >= 1");
    (s1, s2)
}

fn draw_hashed(spec: &SimulationSpec, k: usize, seed: u64, sets: &(SetRecord, SetRecord)) -> Result<Draws> {
    let family = HashFamily::new(seed, k)?;
    let (m1, m2) = match spec.universe {
        UniverseConfig::Bounded(d) => {
            let sk = sketch_minwise_in_universe(&[sets.0.clone(), sets.1.clone()], &family, d.get())?;
            (sk[0].mins().to_vec(), sk[1].mins().to_vec())
        }
        UniverseConfig::Full => (
            sketch_minwise(&sets.0, &family).mins().to_vec(),
            sketch_minwise(&sets.1, &family).mins().to_vec(),
        ),
    };
    let mask = if spec.bits >= 64 { u64::MAX } else { (1u64 << spec.bits) - 1 };
    let cells = m1
        .iter()
        .zip(&m2)
        .map(|(x, y)| match x.cmp(y) {
            std::cmp::Ordering::Equal => EQ,
            std::cmp::Ordering::Less => LT,
            std::cmp::Ordering::Greater => GT,
        })
        .collect();
    Ok(Draws {
        cells,
        low1: m1.iter().map(|z| (z & mask) as u32).collect(),
        low2: m2.iter().map(|z| (z & mask) as u32).collect(),
    })
}

fn counts_prefix(cells: &[u8]) -> PairCounts3 {
    let mut c = PairCounts3::default();
    for &x in cells {
        match x {
            EQ => c.k_eq += 1,
            LT => c.k_lt += 1,
            _ => c.k_gt += 1,
        }
    }
    c
}

fn estimate(
    spec: &SimulationSpec,
    rates: &RateTriple<f64>,
    est: SimEstimator,
    draws: &Draws,
    k: usize,
) -> Option<f64> {
    let (f1, f2) = (spec.ground_truth.f1(), spec.ground_truth.f2());
    match est {
        // The delta-method variance describes the raw estimator; clamping
        // to [0, min(f1, f2)] would cut the upper tail near full containment.
        SimEstimator::Simple(which) => estimate_simple::<f64>(&counts_prefix(&draws.cells[..k]), f1, f2, which)
            .ok()
            .map(|e| e.a_unclamped),
        SimEstimator::Mle => estimate_mle3::<f64>(&counts_prefix(&draws.cells[..k]), f1, f2)
            .ok()
            .map(|e| e.a_hat),
        SimEstimator::BBit(tag) => {
            let scheme = GroupingScheme::new(tag, spec.bits).ok()?;
            let counts = grouped_value_counts(&draws.low1[..k], &draws.low2[..k], &scheme);
            let model = BBitModel::new(scheme, rates.r1(), rates.r2()).ok()?;
            let sol = solve_mle(&model, &counts).ok()?;
            Some(sol.theta_hat * spec.universe.size_f64())
        }
    }
}

fn theory(spec: &SimulationSpec, rates: &RateTriple<f64>, est: SimEstimator, k: usize) -> f64 {
    let gt = &spec.ground_truth;
    match est {
        SimEstimator::Simple(which) => variance_simple(gt, k as u64, which.into()),
        SimEstimator::Mle => variance_mle3::<f64>(gt, k as u64).value,
        SimEstimator::BBit(tag) => {
            let d = spec.universe.size_f64();
            let scheme = GroupingScheme::new(tag, spec.bits).expect("validated");
            match BBitModel::new(scheme, rates.r1(), rates.r2()) {
                Ok(model) => {
                    let info = fisher_info(&model, rates.s(), k as u64);
                    if info.diverging {
                        0.0
                    } else {
                        d * d / info.value
                    }
                }
                Err(_) => f64::NAN,
            }
        }
    }
}

/// Runs the experiment. Rows are ordered by estimator (spec order), then by
/// `k` (spec order).
pub fn run_simulation(spec: &SimulationSpec) -> Result<Vec<SimRow>> {
    spec.validate()?;
    let rates = spec.rates()?;
    let max_k = *spec.k_values.iter().max().expect("non-empty");
    let need_bits = spec.estimators.iter().any(|e| matches!(e, SimEstimator::BBit(_)));
    let sets = (spec.mode == SamplingMode::Hashed).then(|| synthetic_sets(&spec.ground_truth));

    let per_rep: Vec<Vec<Option<f64>>> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Option<f64>>> {
            let seed = derive_seed(spec.seed, r);
            let draws = match &sets {
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    draw_model(spec, &rates, max_k, &mut rng, need_bits)
                }
                Some(sets) => draw_hashed(spec, max_k, seed, sets)?,
            };
            let mut out = Vec::with_capacity(spec.estimators.len() * spec.k_values.len());
            for &e in &spec.estimators {
                for &k in &spec.k_values {
                    out.push(estimate(spec, &rates, e, &draws, k));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let a = spec.ground_truth.a() as f64;
    let mut rows = Vec::new();
    let mut idx = 0;
    for &e in &spec.estimators {
        for &k in &spec.k_values {
            let vals: Vec<f64> = per_rep.iter().filter_map(|v| v[idx]).collect();
            idx += 1;
            let used = vals.len();
            let (mean, mse) = if used == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let n = used as f64;
                (
                    vals.iter().sum::<f64>() / n,
                    vals.iter().map(|x| (x - a) * (x - a)).sum::<f64>() / n,
                )
            };
            rows.push(SimRow {
                estimator: e,
                k,
                used,
                failures: spec.replications - used,
                mean,
                bias: mean - a,
                mse,
                var_theory: theory(spec, &rates, e, k),
            });
        }
    }
    Ok(rows)
}

/// The pair sketched in hashed mode: `S1 = {0, .., f1-1}` and `S2` made of
/// the first `a` elements of `S1` plus `f2 - a` fresh IDs.
pub fn synthetic_pair(gt: &PairGroundTruth) -> (SetRecord, SetRecord) {
    synthetic_sets(gt)
}
