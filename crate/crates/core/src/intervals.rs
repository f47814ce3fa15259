//! Finite unions of closed intervals, effective gaps and good/bad partitions.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(LabError::Domain(format!("bad interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Separation between disjoint intervals; `None` when they overlap.
    pub fn distance(&self, other: &Interval) -> Option<f64> {
        if self.hi < other.lo {
            Some(other.lo - self.hi)
        } else if other.hi < self.lo {
            Some(self.lo - other.hi)
        } else {
            None
        }
    }
}

/// Sorted, pairwise separated closed intervals inside `[0, λ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFamily {
    intervals: Vec<Interval>,
    lambda: f64,
}

impl IntervalFamily {
    /// Validating constructor: input must already be sorted with positive gaps.
    pub fn new(intervals: Vec<Interval>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(LabError::Domain(format!("bad ambient length {lambda}")));
        }
        for w in intervals.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(LabError::Domain(format!(
                    "intervals [{}, {}] and [{}, {}] are not separated",
                    w[0].lo, w[0].hi, w[1].lo, w[1].hi
                )));
            }
        }
        if let (Some(f), Some(l)) = (intervals.first(), intervals.last()) {
            if f.lo < 0.0 || l.hi > lambda {
                return Err(LabError::Domain(format!(
                    "intervals leave the ambient [0, {lambda}]"
                )));
            }
        }
        Ok(Self { intervals, lambda })
    }

    /// Sorts, clips to `[0, λ]` and merges overlapping or touching pieces.
    pub fn from_unsorted(mut raw: Vec<Interval>, lambda: f64) -> Result<Self> {
        raw.retain(|i| i.hi >= 0.0 && i.lo <= lambda);
        for i in raw.iter_mut() {
            i.lo = i.lo.max(0.0);
            i.hi = i.hi.min(lambda);
        }
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for i in raw {
            match out.last_mut() {
                Some(last) if i.lo <= last.hi => last.hi = last.hi.max(i.hi),
                _ => out.push(i),
            }
        }
        Self::new(out, lambda)
    }

    pub fn empty(lambda: f64) -> Self {
        Self {
            intervals: Vec::new(),
            lambda,
        }
    }

    pub fn full(lambda: f64) -> Self {
        Self {
            intervals: vec![Interval { lo: 0.0, hi: lambda }],
            lambda,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    /// Measure of the part inside `window`.
    pub fn measure_in(&self, window: &Interval) -> f64 {
        self.intervals
            .iter()
            .filter_map(|i| i.intersect(window))
            .map(|i| i.len())
            .sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let k = self.intervals.partition_point(|i| i.hi < x);
        self.intervals.get(k).is_some_and(|i| i.contains(x))
    }

    /// Gaps between consecutive intervals.
    pub fn gaps(&self) -> Vec<Interval> {
        self.intervals
            .windows(2)
            .map(|w| Interval {
                lo: w[0].hi,
                hi: w[1].lo,
            })
            .collect()
    }

    /// Complement inside `[0, λ]` as closed pieces (endpoints shared).
    pub fn complement(&self) -> Vec<Interval> {
        let mut out = Vec::new();
        let mut cur = 0.0;
        for i in &self.intervals {
            if i.lo > cur {
                out.push(Interval { lo: cur, hi: i.lo });
            }
            cur = i.hi;
        }
        if cur < self.lambda {
            out.push(Interval {
                lo: cur,
                hi: self.lambda,
            });
        }
        out
    }

    /// Restriction to a window, keeping the ambient length.
    pub fn restrict(&self, window: &Interval) -> Self {
        Self {
            intervals: self
                .intervals
                .iter()
                .filter_map(|i| i.intersect(window))
                .collect(),
            lambda: self.lambda,
        }
    }

    /// Largest point of the family inside `window`.
    pub fn sup_in(&self, window: &Interval) -> Option<f64> {
        self.intervals
            .iter()
            .rev()
            .find_map(|i| i.intersect(window))
            .map(|i| i.hi)
    }

    /// Smallest point of the family that is `>= x`.
    pub fn next_at_or_after(&self, x: f64) -> Option<f64> {
        let k = self.intervals.partition_point(|i| i.hi < x);
        self.intervals.get(k).map(|i| i.lo.max(x))
    }
}

/// Pairwise intersection of two families on the same ambient.
pub fn intersect_families(a: &IntervalFamily, b: &IntervalFamily) -> Result<IntervalFamily> {
    if a.lambda != b.lambda {
        return Err(LabError::Domain(format!(
            "ambient mismatch: {} vs {}",
            a.lambda, b.lambda
        )));
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.intervals.len() && j < b.intervals.len() {
        let (x, y) = (a.intervals[i], b.intervals[j]);
        if let Some(z) = x.intersect(&y) {
            out.push(z);
        }
        if x.hi < y.hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(IntervalFamily {
        intervals: out,
        lambda: a.lambda,
    })
}

/// Whether `d(I, J) >= min(|I|, |J|)^(1+η)`.
pub fn effective_gap(i: &Interval, j: &Interval, eta: f64) -> Result<bool> {
    let d = i
        .distance(j)
        .ok_or_else(|| LabError::Domain("effective gap of overlapping intervals".into()))?;
    Ok(d >= i.len().min(j.len()).powf(1.0 + eta))
}

/// First pair `(i, j)` of a sorted list without an effective gap, or `None` if all pairs have one.
///
/// Sweeps left to right keeping only earlier intervals whose threshold
/// `|I|^(1+η)` still exceeds the current distance; distances only grow.
pub fn all_pairs_effective_gap(intervals: &[Interval], eta: f64) -> Option<(usize, usize)> {
    let mut active: Vec<usize> = Vec::new();
    for (k, cur) in intervals.iter().enumerate() {
        active.retain(|&p| {
            let prev = &intervals[p];
            prev.len().powf(1.0 + eta) > cur.lo - prev.hi
        });
        for &p in &active {
            let prev = &intervals[p];
            let d = cur.lo - prev.hi;
            if d < prev.len().min(cur.len()).powf(1.0 + eta) {
                return Some((p, k));
            }
        }
        active.push(k);
    }
    None
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(LabError::Domain(format!("{name} = {x} must lie in (0,1)")));
    }
    Ok(())
}

/// `θ(ζ,η) = ∏_{k>=0} (1 + C ζ^{kη})^{-1}`, truncated once the tail bound drops below `tol`.
///
/// Tail bound: `Σ_{k>=K} log(1+Cζ^{kη}) <= C ζ^{Kη} / (1 − ζ^η)`.
pub fn theta(zeta: f64, eta: f64, c: f64, tol: f64) -> Result<f64> {
    check_unit("zeta", zeta)?;
    check_unit("eta", eta)?;
    if !(c > 0.0) {
        return Err(LabError::Domain(format!("C = {c} must be positive")));
    }
    let q = zeta.powf(eta);
    let mut log_sum = 0.0;
    let mut term = c;
    loop {
        if term / (1.0 - q) < tol {
            break;
        }
        log_sum += term.ln_1p();
        term *= q;
    }
    Ok((-log_sum).exp())
}

/// `θ̄ = 1 − θ`.
pub fn theta_bar(zeta: f64, eta: f64, c: f64) -> Result<f64> {
    Ok(1.0 - theta(zeta, eta, c, 1e-14)?)
}

/// The constant that makes the Solovay bound provable for every valid partition.
pub fn solovay_constant(zeta: f64, eta: f64) -> f64 {
    2.0 * zeta.powf(-1.0 - 2.0 * eta)
}

/// Which partition invariant failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PartitionViolation {
    NotTiling { at: f64 },
    GoodGapTooSmall { first: usize, second: usize },
    GoodTooLong { index: usize, length: f64 },
    BadTooShort { index: usize, length: f64 },
}

impl PartitionViolation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::NotTiling { .. } => "NotTiling",
            Self::GoodGapTooSmall { .. } => "GoodGapTooSmall",
            Self::GoodTooLong { .. } => "GoodTooLong",
            Self::BadTooShort { .. } => "BadTooShort",
        }
    }
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotTiling { at } => write!(f, "NotTiling near {at}"),
            Self::GoodGapTooSmall { first, second } => {
                write!(f, "GoodGapTooSmall between good #{first} and #{second}")
            }
            Self::GoodTooLong { index, length } => {
                write!(f, "GoodTooLong: good #{index} has length {length}")
            }
            Self::BadTooShort { index, length } => {
                write!(f, "BadTooShort: bad #{index} has length {length}")
            }
        }
    }
}

/// A tiling of `[0, λ]` into good and bad intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodBadPartition {
    pub good: IntervalFamily,
    pub bad: IntervalFamily,
    pub zeta: f64,
    pub eta: f64,
}

const TILE_TOL: f64 = 1e-9;

impl GoodBadPartition {
    pub fn lambda(&self) -> f64 {
        self.good.lambda
    }

    pub fn validate(&self) -> std::result::Result<(), PartitionViolation> {
        let lambda = self.lambda();
        let mut all: Vec<Interval> = self
            .good
            .intervals
            .iter()
            .chain(self.bad.intervals.iter())
            .copied()
            .collect();
        all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut cur = 0.0;
        for i in &all {
            if (i.lo - cur).abs() > TILE_TOL * lambda.max(1.0) {
                return Err(PartitionViolation::NotTiling { at: cur });
            }
            cur = i.hi;
        }
        if self.bad.lambda != lambda || (cur - lambda).abs() > TILE_TOL * lambda.max(1.0) {
            return Err(PartitionViolation::NotTiling { at: cur });
        }
        for (k, b) in self.bad.intervals.iter().enumerate() {
            if b.len() < 1.0 {
                return Err(PartitionViolation::BadTooShort {
                    index: k,
                    length: b.len(),
                });
            }
        }
        for (k, g) in self.good.intervals.iter().enumerate() {
            if g.len() > self.zeta * lambda {
                return Err(PartitionViolation::GoodTooLong {
                    index: k,
                    length: g.len(),
                });
            }
        }
        if let Some((first, second)) = all_pairs_effective_gap(&self.good.intervals, self.eta) {
            return Err(PartitionViolation::GoodGapTooSmall { first, second });
        }
        Ok(())
    }
}

/// Outcome of a Solovay check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolovayReport {
    pub lambda: f64,
    pub zeta: f64,
    pub eta: f64,
    pub ratio: f64,
    pub theta: f64,
    pub holds: bool,
    /// Set when `λ < 1/ζ`, outside the large-λ regime; `holds` is then vacuous.
    pub vacuous: bool,
}

/// Compares `|bad|/λ` with `θ(ζ,η,C)`.
pub fn verify_solovay(p: &GoodBadPartition, c: f64) -> Result<SolovayReport> {
    p.validate().map_err(LabError::InvalidPartition)?;
    let lambda = p.lambda();
    let th = theta(p.zeta, p.eta, c, 1e-10)?;
    let ratio = p.bad.measure() / lambda;
    let vacuous = lambda < 1.0 / p.zeta;
    Ok(SolovayReport {
        lambda,
        zeta: p.zeta,
        eta: p.eta,
        ratio,
        theta: th,
        holds: vacuous || ratio >= th,
        vacuous,
    })
}

/// Random valid partition of `[0, λ]`.
///
/// Alternates bad pieces (length >= 1) with good pieces whose length is
/// capped by `ζλ` and by the gap condition against every earlier good piece.
pub fn random_partition<R: Rng>(
    rng: &mut R,
    lambda: f64,
    zeta: f64,
    eta: f64,
) -> Result<GoodBadPartition> {
    check_unit("zeta", zeta)?;
    check_unit("eta", eta)?;
    if lambda < 1.0 {
        return Err(LabError::Domain(format!("λ = {lambda} below 1")));
    }
    let mut good: Vec<Interval> = Vec::new();
    let mut bad: Vec<Interval> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let max_bad = 1.0 + rng.gen_range(0.0..4.0f64).exp();
    let mut x = 0.0;
    loop {
        let blen = rng.gen_range(1.0..max_bad);
        if x + blen + 1.0 >= lambda {
            bad.push(Interval { lo: x, hi: lambda });
            break;
        }
        bad.push(Interval { lo: x, hi: x + blen });
        x += blen;
        let room = lambda - x - 1.0;
        active.retain(|&p| good[p].len().powf(1.0 + eta) > x - good[p].hi);
        let mut cap = (zeta * lambda).min(room);
        for &p in &active {
            let d = x - good[p].hi;
            if good[p].len().powf(1.0 + eta) > d {
                cap = cap.min(d.powf(1.0 / (1.0 + eta)));
            }
        }
        // Stay strictly inside the gap condition despite rounding in `powf`.
        cap *= 1.0 - 1e-9;
        if cap <= 1e-9 {
            continue;
        }
        let len = if rng.gen_bool(0.5) {
            cap
        } else {
            cap * rng.gen_range(0.0f64..1.0).powi(2)
        };
        if len <= 1e-9 {
            continue;
        }
        good.push(Interval { lo: x, hi: x + len });
        active.push(good.len() - 1);
        x += len;
    }
    let bad = merge_touching(bad);
    Ok(GoodBadPartition {
        good: IntervalFamily::new(good, lambda)?,
        bad: IntervalFamily::new(bad, lambda)?,
        zeta,
        eta,
    })
}

fn merge_touching(v: Vec<Interval>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::with_capacity(v.len());
    for i in v {
        match out.last_mut() {
            Some(last) if i.lo <= last.hi => last.hi = i.hi,
            _ => out.push(i),
        }
    }
    out
}
