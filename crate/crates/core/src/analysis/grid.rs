//! Variance-ratio grids over `(r2/r1, s/r2)`.
//!
//! For plain minwise hashing (`b = 0`) the variances are the closed forms
//! with `f1 = 1`, `f2 = r2/r1`, `a = (s/r2) f2`; they are scale-free, so
//! `r1` is irrelevant. For `b >= 1` each scheme's variance is `1 / I(s)` of
//! its cell model. All values are per sample (`k = 1`), so ratios do not
//! depend on `k`.

use std::fmt;

use rayon::prelude::*;

use super::linspace;
use crate::bbit::{GroupingScheme, RateTriple, SchemeTag};
use crate::minwise::{mle3_variance_at, simple_variance_at, VarianceKind};
use crate::mle::{fisher_info, BBitModel};
use crate::{Error, Result};

/// Bits of the standard test grid.
pub const STANDARD_BITS: [u32; 5] = [1, 2, 4, 6, 8];
/// Base rates of the standard test grid.
pub const STANDARD_R1: [f64; 3] = [0.2, 0.5, 0.8];

/// `r2/r1 = 0.1, 0.2, .., 1.0`.
pub fn standard_ratio_axis() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 10.0).collect()
}

/// `s/r2 = 0, 0.11, .., 0.99`.
pub fn standard_containment_axis() -> Vec<f64> {
    linspace(0.0, 0.99, 10)
}

/// Every feasible `(r1, r2, s)` of the standard grid; points with
/// `r1 + r2 - s > 1` are skipped.
pub fn standard_rate_grid() -> Vec<RateTriple<f64>> {
    let mut out = Vec::new();
    for r1 in STANDARD_R1 {
        for ratio in standard_ratio_axis() {
            for c in standard_containment_axis() {
                let r2 = ratio * r1;
                if let Ok(r) = RateTriple::new(r1, r2, c * r2) {
                    out.push(r);
                }
            }
        }
    }
    out
}

/// One side of a variance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarianceTerm {
    /// `â_=`, `â_<` or `â_>` (plain minwise).
    Simple(VarianceKind),
    /// The 3-cell MLE (plain minwise).
    Mle3,
    /// A b-bit grouping scheme.
    Scheme(SchemeTag),
}

impl VarianceTerm {
    fn parse(s: &str, b: u32) -> Result<Self> {
        if b == 0 {
            match s {
                "eq" | "standard" | "=" => Ok(VarianceTerm::Simple(VarianceKind::Equal)),
                "lt" | "less" | "<" => Ok(VarianceTerm::Simple(VarianceKind::Less)),
                "gt" | "greater" | ">" => Ok(VarianceTerm::Simple(VarianceKind::Greater)),
                "mle" => Ok(VarianceTerm::Mle3),
                other => Err(Error::param(format!("unknown minwise estimator {other:?}"))),
            }
        } else {
            Ok(VarianceTerm::Scheme(s.parse()?))
        }
    }
}

impl fmt::Display for VarianceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceTerm::Simple(VarianceKind::Equal) => f.write_str("eq"),
            VarianceTerm::Simple(VarianceKind::Less) => f.write_str("lt"),
            VarianceTerm::Simple(VarianceKind::Greater) => f.write_str("gt"),
            VarianceTerm::Simple(VarianceKind::ClassicResemblance) => f.write_str("classic"),
            VarianceTerm::Mle3 => f.write_str("mle"),
            VarianceTerm::Scheme(t) => write!(f, "{t}"),
        }
    }
}

/// `Var(numerator) / Var(denominator)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Comparison {
    pub numerator: VarianceTerm,
    pub denominator: VarianceTerm,
}

impl Comparison {
    /// Parses `"num/den"`, e.g. `"eq/mle"` for `b = 0` or `"do/full"` for
    /// `b >= 1`.
    pub fn parse(s: &str, b: u32) -> Result<Self> {
        let (num, den) = s
            .split_once('/')
            .ok_or_else(|| Error::param(format!("comparison {s:?} is not of the form num/den")))?;
        Ok(Comparison {
            numerator: VarianceTerm::parse(num.trim(), b)?,
            denominator: VarianceTerm::parse(den.trim(), b)?,
        })
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.numerator, self.denominator)
    }

    /// The comparisons shown for each panel family.
    pub fn defaults(b: u32) -> Vec<Comparison> {
        let names: &[&str] = if b == 0 {
            &["eq/mle", "lt/mle", "gt/mle", "gt/lt"]
        } else {
            &["do/full", "d/full", "3/full", "eq/full"]
        };
        names.iter().map(|n| Comparison::parse(n, b).expect("built-in")).collect()
    }
}

/// Grid definition. `b = 0` means plain minwise hashing.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceGridSpec {
    pub b: u32,
    pub r1: f64,
    pub ratio_axis: Vec<f64>,
    pub containment_axis: Vec<f64>,
    pub comparisons: Vec<Comparison>,
}

impl VarianceGridSpec {
    /// `resolution x resolution` points over `r2/r1 in [0.02, 1]`,
    /// `s/r2 in [0, 0.99]`, with the default comparisons.
    pub fn standard(b: u32, r1: f64, resolution: usize) -> Self {
        VarianceGridSpec {
            b,
            r1,
            ratio_axis: linspace(0.02, 1.0, resolution),
            containment_axis: linspace(0.0, 0.99, resolution),
            comparisons: Comparison::defaults(b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 <= 1.0) {
            return Err(Error::param(format!("r1 must be in (0, 1], got {}", self.r1)));
        }
        if self.ratio_axis.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::param("r2/r1 values must be in (0, 1]"));
        }
        if self.containment_axis.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::param("s/r2 values must be in [0, 1]"));
        }
        if self.comparisons.is_empty() {
            return Err(Error::param("at least one comparison is required"));
        }
        for c in &self.comparisons {
            for t in [c.numerator, c.denominator] {
                match (t, self.b) {
                    (VarianceTerm::Scheme(_), 0) | (VarianceTerm::Simple(_) | VarianceTerm::Mle3, 1..) => {
                        return Err(Error::param(format!(
                            "comparison {} does not apply to b = {}",
                            c.label(),
                            self.b
                        )))
                    }
                    (VarianceTerm::Scheme(tag), b) => {
                        GroupingScheme::new(tag, b)?;
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Why a grid cell carries no ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFlag {
    Ok,
    /// A variance is zero because the parameter is on the boundary.
    Boundary,
    /// `r1 + r2 - s > 1`.
    Infeasible,
}

impl GridFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            GridFlag::Ok => "ok",
            GridFlag::Boundary => "boundary",
            GridFlag::Infeasible => "infeasible",
        }
    }
}

/// One grid point; `ratios[i]` is `NaN` unless `flags[i] == Ok`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub ratio: f64,
    pub containment: f64,
    pub ratios: Vec<f64>,
    pub flags: Vec<GridFlag>,
}

/// A per-sample variance and whether it sits on a boundary.
fn term_variance(term: VarianceTerm, b: u32, r1: f64, ratio: f64, c: f64) -> std::result::Result<f64, GridFlag> {
    match term {
        VarianceTerm::Simple(kind) => {
            let f2 = ratio;
            let v = simple_variance_at(1.0, f2, c * f2, 1, kind);
            if v > 0.0 {
                Ok(v)
            } else {
                Err(GridFlag::Boundary)
            }
        }
        VarianceTerm::Mle3 => {
            let f2 = ratio;
            let v = mle3_variance_at(1.0, f2, c * f2, 1);
            if v.at_boundary {
                Err(GridFlag::Boundary)
            } else {
                Ok(v.value)
            }
        }
        VarianceTerm::Scheme(tag) => {
            let r2 = ratio * r1;
            let s = c * r2;
            if RateTriple::new(r1, r2, s).is_err() {
                return Err(GridFlag::Infeasible);
            }
            let scheme = GroupingScheme::new(tag, b).map_err(|_| GridFlag::Infeasible)?;
            let model = BBitModel::new(scheme, r1, r2).map_err(|_| GridFlag::Infeasible)?;
            let info = fisher_info(&model, s, 1);
            if info.diverging || info.value.is_nan() || info.value <= 0.0 {
                Err(GridFlag::Boundary)
            } else {
                Ok(1.0 / info.value)
            }
        }
    }
}

/// Evaluates every comparison at every `(ratio, containment)` point, in
/// row-major order (ratio outer). Points are computed in parallel.
pub fn variance_ratio_grid(spec: &VarianceGridSpec) -> Result<Vec<GridRow>> {
    spec.validate()?;
    let points: Vec<(f64, f64)> = spec
        .ratio_axis
        .iter()
        .flat_map(|&r| spec.containment_axis.iter().map(move |&c| (r, c)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(ratio, c)| {
            let mut ratios = Vec::with_capacity(spec.comparisons.len());
            let mut flags = Vec::with_capacity(spec.comparisons.len());
            let mut cache: Vec<(VarianceTerm, std::result::Result<f64, GridFlag>)> = Vec::new();
            let mut var = |t: VarianceTerm| {
                if let Some((_, v)) = cache.iter().find(|(k, _)| *k == t) {
                    return *v;
                }
                let v = term_variance(t, spec.b, spec.r1, ratio, c);
                cache.push((t, v));
                v
            };
            for cmp in &spec.comparisons {
                match (var(cmp.numerator), var(cmp.denominator)) {
                    (Ok(n), Ok(d)) => {
                        ratios.push(n / d);
                        flags.push(GridFlag::Ok);
                    }
                    (Err(f), _) | (_, Err(f)) => {
                        ratios.push(f64::NAN);
                        flags.push(f);
                    }
                }
            }
            GridRow {
                ratio,
                containment: c,
                ratios,
                flags,
            }
        })
        .collect();
    Ok(rows)
}

/// CSV header for a grid: axes, then a value and a flag column per
/// comparison.
pub fn grid_csv_header(spec: &VarianceGridSpec) -> Vec<String> {
    let mut h = vec!["r2_over_r1".to_string(), "s_over_r2".to_string()];
    for c in &spec.comparisons {
        h.push(c.label());
        h.push(format!("{}_flag", c.label()));
    }
    h
}

pub fn grid_csv_fields(row: &GridRow) -> Vec<String> {
    let mut f = vec![super::format_float(row.ratio), super::format_float(row.containment)];
    for (v, flag) in row.ratios.iter().zip(&row.flags) {
        f.push(super::format_float(*v));
        f.push(flag.as_str().to_string());
    }
    f
}
