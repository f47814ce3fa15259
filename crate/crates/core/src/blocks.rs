//! ε-blocks along matched pairs of horocycle orbits, their merging, shifting
//! detection through the lattice, and the non-shifting selection loop.
//!
//! Matched time `r` pairs `x_r = u^{s(r)} x` with `y_r = u^{t(r)} y`.
//! Closeness is measured in the quotient, so the lattice element that
//! realises it may change between blocks; that change is a shifting.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::intervals::{theta_bar, Interval, IntervalFamily};
use crate::quotient::{
    best_match, distance, frame_distance, injectivity_proxy, reduce, word_ball, Lattice2,
    QuotientPoint,
};
use crate::shear::Sl2Matrix;

/// Hölder window for the time maps: `|(t(r′)−t(r)) − (r′−r)| <= C|r′−r|^{1−κ}` once `|r′−r| >= R0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderWindow {
    pub r0: f64,
    pub kappa: f64,
    pub c: f64,
}

/// Two base frames with tabulated, strictly increasing time maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedOrbitData {
    pub gx: Sl2Matrix,
    pub gy: Sl2Matrix,
    r: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    pub holder: HolderWindow,
    pub admissible: IntervalFamily,
}

/// Largest table size used for the all-pairs Hölder check.
const HOLDER_NODES: usize = 1500;

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

impl MatchedOrbitData {
    pub fn new(
        gx: Sl2Matrix,
        gy: Sl2Matrix,
        r: Vec<f64>,
        s: Vec<f64>,
        t: Vec<f64>,
        holder: HolderWindow,
        admissible: IntervalFamily,
    ) -> Result<Self> {
        if r.len() < 2 || s.len() != r.len() || t.len() != r.len() {
            return Err(LabError::Domain("time tables need matching lengths >= 2".into()));
        }
        for (name, v) in [("r", &r), ("s", &s), ("t", &t)] {
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(LabError::Domain(format!("{name} table is not strictly increasing")));
            }
        }
        let data = Self {
            gx,
            gy,
            r,
            s,
            t,
            holder,
            admissible,
        };
        if let Some((a, b)) = data.holder_violation() {
            return Err(LabError::Hypothesis(format!(
                "Hölder inequality fails between r = {a} and r = {b}"
            )));
        }
        Ok(data)
    }

    /// `s(r) = t(r) = r` on `[0, λ]` with every time admissible.
    pub fn identity_times(gx: Sl2Matrix, gy: Sl2Matrix, lambda: f64) -> Result<Self> {
        let r = vec![0.0, lambda];
        let holder = HolderWindow {
            r0: 1.0,
            kappa: 0.5,
            c: 1.0,
        };
        Self::new(
            gx,
            gy,
            r.clone(),
            r.clone(),
            r,
            holder,
            IntervalFamily::full(lambda),
        )
    }

    /// Same orbits and time maps with a different admissible set.
    pub fn with_admissible(&self, admissible: IntervalFamily) -> Self {
        Self {
            admissible,
            ..self.clone()
        }
    }

    /// First pair of table nodes breaking the Hölder window, for `s` or `t`.
    pub fn holder_violation(&self) -> Option<(f64, f64)> {
        let stride = self.r.len().div_ceil(HOLDER_NODES).max(1);
        let idx: Vec<usize> = (0..self.r.len())
            .step_by(stride)
            .chain(std::iter::once(self.r.len() - 1))
            .collect();
        let HolderWindow { r0, kappa, c } = self.holder;
        for (p, &i) in idx.iter().enumerate() {
            for &j in &idx[p + 1..] {
                let dr = self.r[j] - self.r[i];
                if dr < r0 {
                    continue;
                }
                let bound = c * dr.powf(1.0 - kappa) * (1.0 + 1e-12);
                let ds = (self.s[j] - self.s[i] - dr).abs();
                let dt = (self.t[j] - self.t[i] - dr).abs();
                if ds > bound || dt > bound {
                    return Some((self.r[i], self.r[j]));
                }
            }
        }
        None
    }

    pub fn range(&self) -> (f64, f64) {
        (self.r[0], self.r[self.r.len() - 1])
    }

    pub fn s_at(&self, r: f64) -> f64 {
        interp(&self.r, &self.s, r)
    }

    pub fn t_at(&self, r: f64) -> f64 {
        interp(&self.r, &self.t, r)
    }

    /// Largest slope of either time map.
    pub fn lipschitz(&self) -> f64 {
        (1..self.r.len())
            .map(|k| {
                let dr = self.r[k] - self.r[k - 1];
                ((self.s[k] - self.s[k - 1]) / dr).max((self.t[k] - self.t[k - 1]) / dr)
            })
            .fold(0.0, f64::max)
    }

    /// Reduced points `(x_r, y_r)`.
    pub fn points(&self, r: f64) -> Result<(QuotientPoint, QuotientPoint)> {
        Ok((
            reduce(&Sl2Matrix::u(self.s_at(r)).mul(&self.gx))?,
            reduce(&Sl2Matrix::u(self.t_at(r)).mul(&self.gy))?,
        ))
    }

    /// Quotient distance between `x_r` and `y_r`.
    pub fn distance_at(&self, r: f64, word_cap: usize) -> Result<f64> {
        let (x, y) = self.points(r)?;
        Ok(distance(&x, &y, word_cap))
    }
}

/// Numerical knobs for block construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    pub eps: f64,
    pub word_cap: usize,
    /// Scan step; defaults to `ε / (10 (1 + lip))`.
    pub step: Option<f64>,
}

impl BlockParams {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            word_cap: 4,
            step: None,
        }
    }

    fn step_for(&self, data: &MatchedOrbitData) -> f64 {
        self.step
            .unwrap_or(self.eps / (10.0 * (1.0 + data.lipschitz())))
    }
}

/// One end of an ε-block with lifts matched so that `d(gx, gy) <= ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEnd {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub gx: Sl2Matrix,
    pub gy: Sl2Matrix,
    pub x: QuotientPoint,
    pub y: QuotientPoint,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonBlock {
    pub start: BlockEnd,
    pub end: BlockEnd,
    /// `gy·gx⁻¹` at the start.
    pub h: Sl2Matrix,
    /// Number of β₁ blocks merged into this one.
    pub merged: usize,
    /// Reached the end of the requested horizon.
    pub truncated: bool,
    /// Merging stopped because no later block exists.
    pub merge_stopped: bool,
}

impl EpsilonBlock {
    pub fn r(&self) -> f64 {
        self.start.r
    }

    pub fn r_bar(&self) -> f64 {
        self.end.r
    }

    pub fn len(&self) -> f64 {
        self.end.r - self.start.r
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0.0
    }

    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.start.r,
            hi: self.end.r,
        }
    }

    /// A block on identical identity frames with `s = t = r`, for profile-level work.
    pub fn synthetic(r: f64, r_bar: f64) -> Result<Self> {
        if !(r <= r_bar) {
            return Err(LabError::Domain(format!("block [{r}, {r_bar}] is reversed")));
        }
        let id = Sl2Matrix::identity();
        let p = reduce(&id)?;
        let end = |r| BlockEnd {
            r,
            s: r,
            t: r,
            gx: id,
            gy: id,
            x: p,
            y: p,
            distance: 0.0,
        };
        Ok(Self {
            start: end(r),
            end: end(r_bar),
            h: id,
            merged: 1,
            truncated: false,
            merge_stopped: false,
        })
    }

    /// Block on `[r, r_bar]`: lifts matched at `r` and carried continuously to `r_bar`.
    pub fn from_data(
        data: &MatchedOrbitData,
        r: f64,
        r_bar: f64,
        params: &BlockParams,
    ) -> Result<Self> {
        let (x, y) = data.points(r)?;
        let (gamma, d0) = best_match(&x.rep, &y.rep, params.word_cap);
        let (gx, gy) = (x.rep, y.rep.mul(&gamma.to_sl2()));
        let (s0, t0) = (data.s_at(r), data.t_at(r));
        let (s1, t1) = (data.s_at(r_bar), data.t_at(r_bar));
        let gx1 = Sl2Matrix::u(s1 - s0).mul(&gx);
        let gy1 = Sl2Matrix::u(t1 - t0).mul(&gy);
        let d1 = frame_distance(&gx1, &gy1);
        let slack = params.eps * (1.0 + 1e-9) + 1e-12;
        if d0 > slack || d1 > slack {
            return Err(LabError::Matching {
                eps: params.eps,
                best: d0.max(d1),
            });
        }
        Ok(Self {
            start: BlockEnd {
                r,
                s: s0,
                t: t0,
                gx,
                gy,
                x,
                y,
                distance: d0,
            },
            end: BlockEnd {
                r: r_bar,
                s: s1,
                t: t1,
                gx: gx1,
                gy: gy1,
                x: reduce(&gx1)?,
                y: reduce(&gy1)?,
                distance: d1,
            },
            h: gy.mul(&gx.inv()),
            merged: 1,
            truncated: false,
            merge_stopped: false,
        })
    }
}

/// Last point where `pred` holds, given `pred(good)` and `!pred(bad)`.
fn last_true(pred: &mut dyn FnMut(f64) -> Result<bool>, mut good: f64, mut bad: f64) -> Result<f64> {
    for _ in 0..60 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(good)
}

/// Greedy β₁ blocks on `[0, λ]`.
///
/// Each block starts at an admissible time where `x_r, y_r` are ε-close in the
/// quotient, fixes the matching lifts there, and runs to the sup of admissible
/// time inside the component of `{r : d(lifted x_r, lifted y_r) <= ε}`. The next
/// start is the first later admissible time that is ε-close in the quotient.
pub fn build_beta1(
    data: &MatchedOrbitData,
    lambda: f64,
    params: &BlockParams,
) -> Result<Vec<EpsilonBlock>> {
    let (lo, hi) = data.range();
    if lo > 0.0 || hi < lambda {
        return Err(LabError::Precondition(format!(
            "λ = {lambda} outside the table range [{lo}, {hi}]"
        )));
    }
    let a = &data.admissible;
    if !a.contains(0.0) {
        return Err(LabError::Precondition("0 is not admissible".into()));
    }
    let step = params.step_for(data);
    let mut close = |r: f64| -> Result<bool> { Ok(data.distance_at(r, params.word_cap)? <= params.eps) };
    let mut blocks = Vec::new();
    let mut start = if close(0.0)? {
        Some(0.0)
    } else {
        next_start(data, &mut close, 0.0, lambda, step)?
    };
    while let Some(r) = start {
        let (x, y) = data.points(r)?;
        let (gamma, _) = best_match(&x.rep, &y.rep, params.word_cap);
        let (gx, gy) = (x.rep, y.rep.mul(&gamma.to_sl2()));
        let (s0, t0) = (data.s_at(r), data.t_at(r));
        let mut lifted = |q: f64| -> Result<bool> {
            let ex = Sl2Matrix::u(data.s_at(q) - s0).mul(&gx);
            let ey = Sl2Matrix::u(data.t_at(q) - t0).mul(&gy);
            Ok(frame_distance(&ex, &ey) <= params.eps)
        };
        let mut cur = r;
        let comp_end = loop {
            let nxt = (cur + step).min(lambda);
            if !lifted(nxt)? {
                break last_true(&mut lifted, cur, nxt)?;
            }
            if nxt >= lambda {
                break lambda;
            }
            cur = nxt;
        };
        let r_bar = a
            .sup_in(&Interval { lo: r, hi: comp_end })
            .unwrap_or(r);
        let mut block = EpsilonBlock::from_data(data, r, r_bar, params)?;
        block.truncated = comp_end >= lambda;
        blocks.push(block);
        if comp_end >= lambda {
            break;
        }
        start = next_start(data, &mut close, comp_end, lambda, step)?;
    }
    Ok(blocks)
}

fn next_start(
    data: &MatchedOrbitData,
    close: &mut dyn FnMut(f64) -> Result<bool>,
    from: f64,
    lambda: f64,
    step: f64,
) -> Result<Option<f64>> {
    let a = &data.admissible;
    let mut prev = from;
    let mut r = from;
    loop {
        r += step;
        let Some(next) = a.next_at_or_after(r) else {
            return Ok(None);
        };
        if next > lambda {
            return Ok(None);
        }
        if next > r {
            // Jumped over a gap; the admissible piece starts at `next`.
            prev = next;
            r = next;
            if close(r)? {
                return Ok(Some(r));
            }
            continue;
        }
        if close(r)? {
            let mut ok = |q: f64| -> Result<bool> { Ok(!(a.contains(q) && close(q)?)) };
            // First admissible close time in (prev, r].
            let first = last_true(&mut ok, prev, r)?;
            // Strictly after `from`, so consecutive blocks stay disjoint.
            let pick = first.max(from.next_up());
            let pick = if a.contains(pick) && close(pick)? { pick } else { r };
            return Ok(Some(pick));
        }
        prev = r;
    }
}

/// `max{r0, R0, m}^{1+e}` threshold used by the β₂ rule and its contract.
fn gap_threshold(floor: f64, len: f64, exponent: f64) -> f64 {
    floor.max(len).powf(exponent)
}

/// Merges consecutive β₁ blocks while the gap is below `max{r0, R0, |current|}^{1+2η}`.
///
/// With `max{r0, R0} >= 1` every pair of output blocks is separated by at
/// least `max{r0, R0, min length}^{1+η}`.
pub fn build_beta2(
    beta1: &[EpsilonBlock],
    eta: f64,
    r0: f64,
    big_r0: f64,
) -> Result<Vec<EpsilonBlock>> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(LabError::Domain(format!("η = {eta} must lie in (0,1)")));
    }
    let floor = r0.max(big_r0);
    if !(floor >= 1.0) {
        return Err(LabError::Parameter(format!(
            "max{{r0, R0}} = {floor} must be at least 1"
        )));
    }
    if beta1
        .windows(2)
        .any(|w| w[1].start.r < w[0].end.r)
    {
        return Err(LabError::Precondition("β₁ blocks overlap or are unsorted".into()));
    }
    let mut out: Vec<EpsilonBlock> = Vec::new();
    for b in beta1 {
        match out.last_mut() {
            Some(cur) if b.start.r - cur.end.r < gap_threshold(floor, cur.len(), 1.0 + 2.0 * eta) => {
                cur.end = b.end;
                cur.merged += b.merged;
                cur.truncated = b.truncated;
            }
            _ => out.push(b.clone()),
        }
    }
    if let Some(last) = out.last_mut() {
        last.merge_stopped = !last.truncated;
    }
    if let Some((i, j)) = beta2_violation(
        &out.iter().map(|b| b.interval()).collect::<Vec<_>>(),
        eta,
        floor,
    ) {
        return Err(LabError::Numerical(format!(
            "β₂ output blocks {i} and {j} lack an effective gap"
        )));
    }
    Ok(out)
}

/// First pair with `d(I, J) < max{floor, min(|I|, |J|)}^{1+η}`.
pub fn beta2_violation(blocks: &[Interval], eta: f64, floor: f64) -> Option<(usize, usize)> {
    for (i, a) in blocks.iter().enumerate() {
        let cap = gap_threshold(floor, a.len(), 1.0 + eta);
        for (j, b) in blocks.iter().enumerate().skip(i + 1) {
            let d = b.lo - a.hi;
            if d >= cap {
                break;
            }
            if d < gap_threshold(floor, a.len().min(b.len()), 1.0 + eta) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Lattice element relating the continued lifts at the start of the next block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shifting {
    pub gamma: Lattice2,
    pub trivial: bool,
    pub match_distance: f64,
    pub proxy: f64,
}

/// Continues block1's matched lifts to block2's start times and finds `γ` with `g_x″ ≈ g_y″·γ`.
pub fn detect_shifting(
    block1: &EpsilonBlock,
    block2: &EpsilonBlock,
    word_cap: usize,
    eps: f64,
) -> Result<Shifting> {
    if block2.start.r < block1.end.r && block2 != block1 {
        return Err(LabError::Precondition("second block starts before the first ends".into()));
    }
    let (s0, t0) = if block2 == block1 {
        (block1.end.s, block1.end.t)
    } else {
        (block2.start.s, block2.start.t)
    };
    let gx = Sl2Matrix::u(s0 - block1.end.s).mul(&block1.end.gx);
    let gy = Sl2Matrix::u(t0 - block1.end.t).mul(&block1.end.gy);
    let (px, py) = (reduce(&gx)?, reduce(&gy)?);
    // gx = rep_x δx, gy = rep_y δy, rep_x ≈ rep_y γ″  ⇒  gx ≈ gy · δy⁻¹ γ″ δx.
    let ranked = ranked_matches(&px.rep, &py.rep, word_cap);
    let (g2, best) = ranked[0];
    if best > eps {
        return Err(LabError::Matching { eps, best });
    }
    let proxy = injectivity_proxy(&px, word_cap);
    if let Some(&(_, second)) = ranked.get(1) {
        if second <= eps && proxy <= best {
            return Err(LabError::CuspAmbiguity(format!(
                "two lattice elements within ε = {eps} ({best:.3e}, {second:.3e}), proxy {proxy:.3e}"
            )));
        }
    }
    let gamma = py.witness.inv().mul(&g2).mul(&px.witness).projective();
    Ok(Shifting {
        gamma,
        trivial: gamma.is_identity_projective(),
        match_distance: best,
        proxy,
    })
}

fn ranked_matches(g1: &Sl2Matrix, g2: &Sl2Matrix, word_cap: usize) -> Vec<(Lattice2, f64)> {
    let mut v: Vec<(Lattice2, f64)> = word_ball(word_cap)
        .iter()
        .map(|(gam, _)| (*gam, frame_distance(g1, &g2.mul(&gam.to_sl2()))))
        .collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1));
    v
}

/// Measure of `{r ∈ A ∩ block : d(x_r, y_r) > ε}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    pub measure: f64,
    pub ratio: f64,
    pub step: f64,
}

/// Midpoint grid over the admissible part of the block, step `ε / (10 (1 + lip))`.
pub fn shifting_sparsity(
    block: &EpsilonBlock,
    data: &MatchedOrbitData,
    params: &BlockParams,
) -> Result<Sparsity> {
    let step = params.step_for(data);
    let window = block.interval();
    let mut measure = 0.0;
    for piece in data.admissible.restrict(&window).intervals() {
        let cells = (piece.len() / step).ceil() as usize;
        if cells == 0 {
            continue;
        }
        let h = piece.len() / cells as f64;
        for k in 0..cells {
            let r = piece.lo + (k as f64 + 0.5) * h;
            if data.distance_at(r, params.word_cap)? > params.eps {
                measure += h;
            }
        }
    }
    Ok(Sparsity {
        measure,
        ratio: measure / data.admissible.lambda(),
        step,
    })
}

/// Lists consecutive shifting pairs whose gap fails `min length^{1+η}`.
///
/// Used as a falsification harness: any entry is a finding to report.
pub fn shifting_gap_findings(
    blocks: &[EpsilonBlock],
    word_cap: usize,
    eps: f64,
    eta: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (k, w) in blocks.windows(2).enumerate() {
        let sh = detect_shifting(&w[0], &w[1], word_cap, eps)?;
        if !sh.trivial {
            let (a, b) = (w[0].interval(), w[1].interval());
            if b.lo - a.hi < a.len().min(b.len()).powf(1.0 + eta) {
                out.push((k, k + 1));
            }
        }
    }
    Ok(out)
}

/// Inputs to the non-shifting selection beyond the families themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonshiftingParams {
    pub sigma: f64,
    pub eta: f64,
    /// Constant inside `θ`.
    pub c: f64,
    pub r0: f64,
    pub big_r0: f64,
}

/// How the shifting part of a block is accounted for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SelectMode {
    /// Abstract sparsity bound `θ̄((ζ₂λ^{−η})^{1/(1+η)})·|W|`.
    Synthetic,
    /// Measured shifting set for each family.
    Measured(Vec<IntervalFamily>),
}

/// All numeric thresholds of the selection, for audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub zeta1: f64,
    pub zeta2: f64,
    pub theta_bar_zeta1: f64,
    pub theta_bar_zeta2: f64,
    pub sigma0: f64,
    pub vartheta: f64,
    pub lambda0: f64,
    /// `θ̄((ζ₂λ^{−η})^{1/(1+η)})` at the requested `λ`.
    pub shift_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectStep {
    pub family: usize,
    pub window: Interval,
    pub block: Interval,
    pub density: f64,
    /// The block is a densest window rather than a β₂ block.
    pub window_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Zero-based family index.
    pub index: usize,
    pub window: Interval,
    pub block: Interval,
    pub nonshifting: f64,
    pub thresholds: Thresholds,
    pub steps: Vec<SelectStep>,
    pub lambda_below_lambda0: bool,
    pub synthetic: bool,
}

impl Selection {
    /// `|block| > ϑλ` and non-shifting measure `> ϑλ`.
    pub fn contract_holds(&self, lambda: f64) -> bool {
        let bound = self.thresholds.vartheta * lambda;
        self.block.len() > bound && self.nonshifting > bound
    }
}

/// Root of an increasing function on `(lo, hi)` by bisection in `x`.
fn increasing_root(f: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-15 * mid.abs().max(1e-300) {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Thresholds for `n` families at horizon `λ`.
pub fn nonshifting_thresholds(n: usize, lambda: f64, p: &NonshiftingParams) -> Result<Thresholds> {
    if n == 0 {
        return Err(LabError::Domain("need at least one family".into()));
    }
    let (eta, c) = (p.eta, p.c);
    let tb = |z: f64| theta_bar(z.clamp(1e-300, 1.0 - 1e-16), eta, c);
    let floor = c / (1.0 + c);
    let nf = n as f64;
    let target1 = 1.0 / (nf + 1.0);
    if target1 <= floor {
        return Err(LabError::Parameter(format!(
            "θ̄ > C/(1+C) = {floor:.6} never reaches 1/(n+1) = {target1:.6}; need C < 1/n"
        )));
    }
    let zeta1 = increasing_root(&|z| Ok(tb(z)? - target1), 0.0, 1.0)?;
    let bound2 = (1.0 / zeta1 - 1.0) / (2.0 * (zeta1.powf(-nf) - 1.0));
    let target2 = 0.5 * bound2;
    if target2 <= floor {
        return Err(LabError::Parameter(format!(
            "ζ₂ infeasible: θ̄(ζ₂) must be below {bound2:.6e} but θ̄ >= {floor:.6e}"
        )));
    }
    let zeta2 = increasing_root(&|z| Ok(tb(z)? - target2), 0.0, 1.0)?;
    let tb2 = tb(zeta2)?;
    let sigma0 = (zeta1.powf(nf) / 4.0).min(1.0 / (2.0 * (nf + 1.0)));
    let vartheta = 0.5 * tb2 * zeta1.powf(nf);
    let rate = |lam: f64| tb((zeta2 * lam.powf(-eta)).powf(1.0 / (1.0 + eta)));
    let margin = |lam: f64| -> Result<f64> { Ok(0.5 * tb2 * zeta1 - rate(lam)?) };
    let lambda0 = if margin(1.0)? > 0.0 {
        1.0
    } else {
        let mut hi = 2.0f64;
        while margin(hi)? <= 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(LabError::Parameter(
                    "no λ₀: the shifting rate never drops below ½θ̄(ζ₂)ζ₁".into(),
                ));
            }
        }
        let l = increasing_root(&|x| margin(x.exp()), 0.0, hi.ln())?;
        l.exp()
    };
    Ok(Thresholds {
        zeta1,
        zeta2,
        theta_bar_zeta1: tb(zeta1)?,
        theta_bar_zeta2: tb2,
        sigma0,
        vartheta,
        lambda0,
        shift_rate: rate(lambda.max(1.0))?,
    })
}

/// Densest window of length `len` inside `w` for a family.
fn densest_window(fam: &IntervalFamily, w: &Interval, len: f64) -> Interval {
    let mut best = Interval { lo: w.lo, hi: w.lo + len };
    let mut best_m = fam.measure_in(&best);
    let clip = |lo: f64| lo.clamp(w.lo, w.hi - len);
    for i in fam.restrict(w).intervals() {
        for lo in [clip(i.lo), clip(i.hi - len)] {
            let cand = Interval { lo, hi: lo + len };
            let m = fam.measure_in(&cand);
            if m > best_m {
                best_m = m;
                best = cand;
            }
        }
    }
    best
}

/// Longest β₂ block of the family inside `w`.
fn longest_beta2(fam: &IntervalFamily, w: &Interval, eta: f64, r0: f64, big_r0: f64) -> Result<Option<Interval>> {
    let beta1: Vec<EpsilonBlock> = fam
        .restrict(w)
        .intervals()
        .iter()
        .map(|i| EpsilonBlock::synthetic(i.lo, i.hi))
        .collect::<Result<_>>()?;
    Ok(build_beta2(&beta1, eta, r0, big_r0)?
        .iter()
        .map(|b| b.interval())
        .max_by(|a, b| a.len().total_cmp(&b.len())))
}

/// Iterative selection of a family and a long block where it is dense and non-shifting.
pub fn nonshifting_select(
    families: &[IntervalFamily],
    lambda: f64,
    params: &NonshiftingParams,
    mode: &SelectMode,
) -> Result<Selection> {
    let n = families.len();
    let th = nonshifting_thresholds(n, lambda, params)?;
    if params.sigma > th.sigma0 {
        return Err(LabError::Parameter(format!(
            "σ = {} exceeds σ₀ = {:.6}",
            params.sigma, th.sigma0
        )));
    }
    let full = Interval { lo: 0.0, hi: lambda };
    let union: f64 = families.iter().map(|f| f.measure_in(&full)).sum();
    for (i, a) in families.iter().enumerate() {
        for b in &families[i + 1..] {
            if crate::intervals::intersect_families(a, b)?.measure() > 0.0 {
                return Err(LabError::Domain("families are not disjoint".into()));
            }
        }
    }
    if !(union > (1.0 - 2.0 * params.sigma) * lambda) {
        return Err(LabError::Hypothesis(format!(
            "covered measure {union} is not above (1−2σ)λ = {}",
            (1.0 - 2.0 * params.sigma) * lambda
        )));
    }
    if let SelectMode::Measured(sets) = mode {
        if sets.len() != n {
            return Err(LabError::Domain("one shifting set per family is required".into()));
        }
    }
    let mut w = full;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut steps = Vec::new();
    loop {
        let &i = remaining
            .iter()
            .max_by(|a, b| {
                families[**a]
                    .measure_in(&w)
                    .total_cmp(&families[**b].measure_in(&w))
                    .then(b.cmp(a))
            })
            .expect("non-empty");
        let fam = &families[i];
        let need = th.zeta1 * w.len();
        let window = densest_window(fam, &w, need);
        let long = longest_beta2(fam, &w, params.eta, params.r0, params.big_r0)?
            .filter(|b| b.len() >= need);
        let last = remaining.len() == 1;
        let density = |b: &Interval| fam.measure_in(b) / b.len();
        let (block, fallback) = match long {
            Some(b) if !(last && density(&window) > density(&b)) => (b, false),
            _ => (window, true),
        };
        let dens = density(&block);
        steps.push(SelectStep {
            family: i,
            window: w,
            block,
            density: dens,
            window_fallback: fallback,
        });
        if last || dens >= th.theta_bar_zeta2 {
            let shifting = match mode {
                SelectMode::Synthetic => th.shift_rate * w.len(),
                SelectMode::Measured(sets) => sets[i].measure_in(&block),
            };
            return Ok(Selection {
                index: i,
                window: w,
                block,
                nonshifting: fam.measure_in(&block) - shifting,
                thresholds: th,
                steps,
                lambda_below_lambda0: lambda < th.lambda0,
                synthetic: matches!(mode, SelectMode::Synthetic),
            });
        }
        w = block;
        remaining.retain(|&k| k != i);
    }
}
