//! Corpus ingestion and size statistics.
//!
//! Two line-oriented formats:
//!
//! - `lines`: `[id:] x1 x2 ...`, whitespace-separated element IDs;
//! - `sparse-index`: `label idx:val idx:val ...`; every index with a
//!   non-zero value is a member.
//!
//! Blank lines and lines starting with `#` are ignored. Sets without an
//! explicit id are named after their 1-based line number.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::SetRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Lines,
    SparseIndex,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" => Ok(InputFormat::Lines),
            "sparse-index" | "sparse" | "libsvm" => Ok(InputFormat::SparseIndex),
            other => Err(Error::param(format!("unknown input format {other:?}"))),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_lines_record(line_no: usize, text: &str) -> Result<SetRecord> {
    let mut tokens = text.split_whitespace().peekable();
    let mut id = line_no.to_string();
    if let Some(first) = tokens.peek() {
        if let Some(name) = first.strip_suffix(':') {
            if name.is_empty() {
                return Err(parse_err(line_no, "empty set id"));
            }
            id = name.to_string();
            tokens.next();
        }
    }
    let mut elements = Vec::new();
    for tok in tokens {
        let x = tok
            .parse::<u64>()
            .map_err(|_| parse_err(line_no, format!("{tok:?} is not a non-negative integer")))?;
        elements.push(x);
    }
    if elements.is_empty() {
        return Err(parse_err(line_no, format!("set {id:?} is empty")));
    }
    SetRecord::from_unsorted(id, elements)
}

fn parse_sparse_record(line_no: usize, text: &str) -> Result<SetRecord> {
    let mut tokens = text.split_whitespace();
    let label = tokens.next().ok_or_else(|| parse_err(line_no, "missing label"))?;
    if label.contains(':') {
        return Err(parse_err(line_no, "line must start with a label"));
    }
    let mut elements = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| parse_err(line_no, format!("{tok:?} is not idx:val")))?;
        let idx = idx
            .parse::<u64>()
            .map_err(|_| parse_err(line_no, format!("bad index {idx:?}")))?;
        let val = val
            .parse::<f64>()
            .map_err(|_| parse_err(line_no, format!("bad value {val:?}")))?;
        if val != 0.0 {
            elements.push(idx);
        }
    }
    if elements.is_empty() {
        return Err(parse_err(line_no, "set has no non-zero entries"));
    }
    SetRecord::from_unsorted(line_no.to_string(), elements)
}

/// Parses a whole corpus; the first malformed line aborts with its number.
pub fn parse_corpus(reader: impl BufRead, format: InputFormat) -> Result<Vec<SetRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        out.push(match format {
            InputFormat::Lines => parse_lines_record(i + 1, text)?,
            InputFormat::SparseIndex => parse_sparse_record(i + 1, text)?,
        });
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>, format: InputFormat) -> Result<Vec<SetRecord>> {
    parse_corpus(BufReader::new(File::open(path)?), format)
}

/// Equal-width histogram of set sizes over `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeHistogram {
    /// `(lo, hi, count)`; the last bin is closed on the right.
    pub bins: Vec<(f64, f64, u64)>,
}

pub fn size_histogram(sizes: &[u64], bins: usize) -> Result<SizeHistogram> {
    if bins == 0 {
        return Err(Error::param("need at least one bin"));
    }
    let (Some(&min), Some(&max)) = (sizes.iter().min(), sizes.iter().max()) else {
        return Ok(SizeHistogram { bins: Vec::new() });
    };
    let (lo, hi) = (min as f64, max as f64);
    let width = if max > min { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; bins];
    for &f in sizes {
        let idx = (((f as f64 - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(SizeHistogram {
        bins: counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + width * i as f64, lo + width * (i + 1) as f64, c))
            .collect(),
    })
}

/// Mean and population standard deviation of `max(fi, fj) / min(fi, fj)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioStats {
    pub pairs: u64,
    pub mean: f64,
    pub std: f64,
    /// `std / sqrt(pairs)`.
    pub std_error: f64,
    pub exhaustive: bool,
}

#[derive(Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    // Welford's update
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn finish(self, exhaustive: bool) -> RatioStats {
        let std = if self.n > 0 { (self.m2 / self.n as f64).sqrt() } else { f64::NAN };
        RatioStats {
            pairs: self.n,
            mean: if self.n > 0 { self.mean } else { f64::NAN },
            std,
            std_error: std / (self.n as f64).sqrt(),
            exhaustive,
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    a.max(b) as f64 / a.min(b) as f64
}

/// Over all unordered pairs of distinct sets.
pub fn pair_ratio_stats_exhaustive(sizes: &[u64]) -> RatioStats {
    let mut m = Moments::default();
    for (i, &a) in sizes.iter().enumerate() {
        for &b in &sizes[i + 1..] {
            m.push(ratio(a, b));
        }
    }
    m.finish(true)
}

/// Over `samples` pairs of distinct sets drawn uniformly with replacement.
pub fn pair_ratio_stats_sampled(sizes: &[u64], samples: u64, seed: u64) -> Result<RatioStats> {
    if sizes.len() < 2 {
        return Err(Error::param("need at least two sets for pair statistics"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sizes.len();
    let mut m = Moments::default();
    for _ in 0..samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        m.push(ratio(sizes[i], sizes[j]));
    }
    Ok(m.finish(false))
}
