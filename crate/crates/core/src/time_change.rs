//! Time changes of the horocycle flow on `X` and their cocycles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quotient::{
    frame_distance, frame_from_tag, injectivity_proxy, reduce, reduce_upper_half, Lattice2,
    QuotientPoint,
};
use crate::shear::{delta_r, Sl2Matrix};

/// Orbit quadrature restarts from a freshly reduced frame every `PIECE` time units.
pub const PIECE: f64 = 0.25;
/// Non-flat pieces are split this many ways before adaptive quadrature.
const SUBPIECES: usize = 16;
/// Absolute quadrature tolerance per unit time.
pub const QUAD_TOL: f64 = 1e-10;

/// Bump profile `exp(1 − 1/(1−r²))` on `[0,1)`, zero beyond; equals 1 at the centre.
pub fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// A bump on SL(2,R) summed over lattice translates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeBump {
    pub center: Sl2Matrix,
    pub radius: f64,
    /// Every `γ` whose translate `center·γ⁻¹` can meet a reduced frame.
    translates: Vec<Lattice2>,
    /// `γ·w0` for each translate; the tag of `rep·γ` sits at hyperbolic distance `d(tag, γ·w0)` from `w0`.
    images: Vec<(f64, f64)>,
    /// Frame distance below which `translates` contains every nearby copy of the centre.
    reach: f64,
}

impl LatticeBump {
    /// Bump of radius `rho` around the frame with tag `w0` and rotation `theta`.
    pub fn new(w0: (f64, f64), theta: f64, rho: f64) -> Result<Self> {
        let center = frame_from_tag(w0.0, w0.1, theta);
        let here = reduce(&center)?;
        if here.witness != Lattice2::I && !here.witness.is_identity_projective() {
            return Err(LabError::Precondition(
                "bump centre must lie over the fundamental domain".into(),
            ));
        }
        if rho >= injectivity_proxy(&here, 8) {
            return Err(LabError::Precondition(format!(
                "radius {rho} exceeds the injectivity proxy at the centre"
            )));
        }
        // Frame distance bounds a third of the tag distance, so tags within 3ρ matter.
        let outer = 3.0 * rho + 0.3;
        let translates = covering_translates(w0, outer)?;
        let images = translates.iter().map(|g| g.to_sl2().mobius(w0)).collect();
        Ok(Self {
            center,
            radius: rho,
            translates,
            images,
            reach: outer / 3.0,
        })
    }

    /// `Σ_γ φ(rep·γ)` where `φ(g) = bump(d(g, centre)/ρ)`.
    pub fn value(&self, x: &QuotientPoint) -> f64 {
        // Frame distance is at least a third of the tag distance.
        let cut = (3.0 * self.radius).cosh();
        self.translates
            .iter()
            .zip(&self.images)
            .filter(|(_, w)| cosh_tag_distance(x.tag_z, **w) < cut)
            .map(|(g, _)| {
                bump(frame_distance(&x.rep.mul(&g.to_sl2()), &self.center) / self.radius)
            })
            .sum()
    }

    /// Lower bound on the distance from `x` to the support.
    pub fn clearance(&self, x: &QuotientPoint) -> f64 {
        let mut best = self.reach;
        for (g, w) in self.translates.iter().zip(&self.images) {
            if cosh_tag_distance(x.tag_z, *w) >= (3.0 * best).cosh() {
                continue;
            }
            best = best.min(frame_distance(&x.rep.mul(&g.to_sl2()), &self.center));
        }
        best - self.radius
    }
}

/// `cosh` of the hyperbolic distance between two points of the upper half-plane.
fn cosh_tag_distance(z: (f64, f64), w: (f64, f64)) -> f64 {
    1.0 + ((z.0 - w.0).powi(2) + (z.1 - w.1).powi(2)) / (2.0 * z.1 * w.1)
}

/// Lattice elements `γ` such that `γ⁻¹F` meets the hyperbolic ball of radius `outer` about `w0`.
///
/// Found by reducing a dense sample of the ball, then closing under one
/// generator step on each side.
fn covering_translates(w0: (f64, f64), outer: f64) -> Result<Vec<Lattice2>> {
    let mut set = std::collections::BTreeSet::new();
    let rings = 120;
    let spokes = 240;
    for i in 0..=rings {
        let r = outer * i as f64 / rings as f64;
        for k in 0..spokes {
            let phi = std::f64::consts::TAU * k as f64 / spokes as f64;
            let z = hyperbolic_offset(w0, r, phi);
            let (_, delta) = reduce_upper_half(z)?;
            set.insert(delta.projective().0);
        }
    }
    let base: Vec<Lattice2> = set.into_iter().map(Lattice2).collect();
    let mut out = std::collections::BTreeSet::new();
    for d in &base {
        for gen in [Lattice2::I, Lattice2::T, Lattice2::T_INV, Lattice2::S] {
            out.insert(gen.mul(d).projective().0);
            out.insert(d.mul(&gen).projective().0);
        }
    }
    Ok(out.into_iter().map(Lattice2).collect())
}

/// Point at hyperbolic distance `r` from `w0` in direction `phi`.
fn hyperbolic_offset(w0: (f64, f64), r: f64, phi: f64) -> (f64, f64) {
    // Geodesic from i in direction phi, then moved to w0.
    let t = (r / 2.0).tanh();
    let (dx, dy) = (t * phi.cos(), t * phi.sin());
    // Disc point (dx, dy) to the half-plane: z = i(1+ζ)/(1−ζ).
    let (nr, ni) = (1.0 + dx, dy);
    let (dr, di) = (1.0 - dx, -dy);
    let den = dr * dr + di * di;
    let (qr, qi) = ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den);
    let z = (-qi, qr);
    let s = w0.1.sqrt();
    Sl2Matrix::raw(s, w0.0 / s, 0.0, 1.0 / s).mobius(z)
}

/// `τ = scale · (1 + amplitude · Σ_γ φ(rep·γ))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeChangeFn {
    pub amplitude: f64,
    pub scale: f64,
    pub bump: Option<LatticeBump>,
    pub inf: f64,
    pub sup: f64,
}

/// Monte Carlo estimate of a mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl TimeChangeFn {
    /// `τ ≡ 1`.
    pub fn constant() -> Self {
        Self {
            amplitude: 0.0,
            scale: 1.0,
            bump: None,
            inf: 1.0,
            sup: 1.0,
        }
    }

    /// The default bump, centred at tag `0.15 + 1.25i`, angle `1`, radius `0.2`.
    pub fn default_bump(amplitude: f64) -> Result<Self> {
        Self::with_bump(amplitude, LatticeBump::new((0.15, 1.25), 1.0, 0.2)?)
    }

    /// Requires `amplitude >= −1/2` so that `inf τ >= 1/2`.
    pub fn with_bump(amplitude: f64, bump: LatticeBump) -> Result<Self> {
        if !(amplitude >= -0.5 && amplitude.is_finite()) {
            return Err(LabError::Precondition(format!(
                "amplitude {amplitude} would push inf τ below 1/2"
            )));
        }
        // The radius is below the injectivity proxy, so translates have disjoint supports.
        let (inf, sup) = if amplitude >= 0.0 {
            (1.0, 1.0 + amplitude)
        } else {
            (1.0 + amplitude, 1.0)
        };
        Ok(Self {
            amplitude,
            scale: 1.0,
            bump: (amplitude != 0.0).then_some(bump),
            inf,
            sup,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.bump.is_none()
    }

    pub fn evaluate(&self, x: &QuotientPoint) -> f64 {
        match &self.bump {
            None => self.scale,
            Some(b) => self.scale * (1.0 + self.amplitude * b.value(x)),
        }
    }

    pub fn evaluate_frame(&self, g: &Sl2Matrix) -> Result<f64> {
        Ok(self.evaluate(&reduce(g)?))
    }

    /// Mean of `τ` over Haar measure.
    pub fn mean_estimate(&self, samples: usize, seed: u64) -> Result<MeanEstimate> {
        let vals: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = trial_rng(seed, k as u64);
                let g = sample_haar(&mut rng, None);
                self.evaluate_frame(&g)
            })
            .collect::<Result<_>>()?;
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok(MeanEstimate {
            mean,
            std_error: (var / n).sqrt(),
            samples,
        })
    }

    /// Rescaled copy with Monte Carlo mean 1.
    pub fn normalized(&self, samples: usize, seed: u64) -> Result<(Self, MeanEstimate)> {
        let est = self.mean_estimate(samples, seed)?;
        let mut out = self.clone();
        out.scale /= est.mean;
        out.inf /= est.mean;
        out.sup /= est.mean;
        Ok((out, est))
    }

    /// Whether `τ` is constant along `u^σ x` for `σ ∈ [0, len]`.
    fn flat_on(&self, x: &QuotientPoint, len: f64) -> bool {
        match &self.bump {
            None => true,
            Some(b) => b.clearance(x) > horocycle_drift(len),
        }
    }
}

/// Upper bound on `d(u^σ g, g)` for `|σ| <= len`.
pub fn horocycle_drift(len: f64) -> f64 {
    frame_distance(&Sl2Matrix::identity(), &Sl2Matrix::u(len.abs())) * 1.01 + 1e-12
}

/// Independent stream for trial `k` under `seed`.
pub fn trial_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Frame with tag distributed by `dx dy / y²` on the fundamental domain, angle uniform.
///
/// With `y_max` the sample is restricted to heights `<= y_max`.
pub fn sample_haar<R: Rng>(rng: &mut R, y_max: Option<f64>) -> Sl2Matrix {
    loop {
        let x: f64 = rng.gen_range(-0.5..0.5);
        let y_min = (1.0 - x * x).sqrt();
        // Height with density ∝ 1/y² on [y_min, y_max], accepted with prob. ∝ 1/y_min.
        let u: f64 = rng.gen_range(0.0..1.0);
        let y = match y_max {
            None => y_min / (1.0 - u),
            Some(top) => 1.0 / (1.0 / y_min - u * (1.0 / y_min - 1.0 / top)),
        };
        let weight = match y_max {
            None => 1.0 / y_min,
            Some(top) => 1.0 / y_min - 1.0 / top,
        };
        let max_weight = match y_max {
            None => 1.0 / 0.75f64.sqrt(),
            Some(top) => 1.0 / 0.75f64.sqrt() - 1.0 / top,
        };
        if rng.gen_range(0.0..max_weight) > weight || !y.is_finite() {
            continue;
        }
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        return frame_from_tag(x, y, theta);
    }
}

fn simpson_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    if depth == 0 {
        return Err(LabError::Quadrature(format!(
            "no convergence on [{a}, {b}], last correction {diff:.3e}"
        )));
    }
    Ok(simpson_adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + simpson_adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_adaptive(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `∫_0^t f(u^s g) ds` for a function on the quotient, restarting every [`PIECE`].
///
/// `flat(x, len)` may report that `f` equals `f(x)` along `u^σ x`, `σ ∈ [0,len]`.
pub fn orbit_integral(
    f: &dyn Fn(&QuotientPoint) -> f64,
    flat: &dyn Fn(&QuotientPoint, f64) -> bool,
    g: &Sl2Matrix,
    t: f64,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let sign = t.signum();
    let total = t.abs();
    let pieces = (total / PIECE).ceil() as usize;
    let mut acc = 0.0;
    for k in 0..pieces {
        let s0 = k as f64 * PIECE;
        let len = (total - s0).min(PIECE);
        let start = reduce(&Sl2Matrix::u(sign * s0).mul(g))?;
        if flat(&start, len) {
            acc += f(&start) * len;
            continue;
        }
        // Short sub-pieces keep Simpson's first samples from straddling a narrow bump.
        let sub = len / SUBPIECES as f64;
        for j in 0..SUBPIECES {
            let a = s0 + j as f64 * sub;
            let here = reduce(&Sl2Matrix::u(sign * a).mul(g))?;
            if flat(&here, sub) {
                acc += f(&here) * sub;
                continue;
            }
            let rep = here.rep;
            let h = |s: f64| {
                reduce(&Sl2Matrix::u(sign * s).mul(&rep)).map_or(f64::NAN, |p| f(&p))
            };
            let v = simpson(&h, 0.0, sub, QUAD_TOL * sub)?;
            if !v.is_finite() {
                return Err(LabError::Quadrature("integrand is not finite".into()));
            }
            acc += v;
        }
    }
    Ok(sign * acc)
}

/// `z(y,t) = ∫_0^t τ(u^s y) ds`.
pub fn z_cocycle(tau: &TimeChangeFn, y: &QuotientPoint, t: f64) -> Result<f64> {
    if tau.is_constant() {
        return Ok(tau.scale * t);
    }
    orbit_integral(
        &|x| tau.evaluate(x),
        &|x, len| tau.flat_on(x, len),
        &y.rep,
        t,
    )
}

/// Solves `z(y, ξ) = t`.
pub fn xi_inverse(tau: &TimeChangeFn, y: &QuotientPoint, t: f64) -> Result<f64> {
    if tau.is_constant() {
        return Ok(t / tau.scale);
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    // z is increasing with slope in [inf, sup].
    let (mut lo, mut hi) = if t > 0.0 {
        (t / tau.sup, t / tau.inf)
    } else {
        (t / tau.inf, t / tau.sup)
    };
    let horizon = 1e9;
    if hi.abs().max(lo.abs()) > horizon {
        return Err(LabError::Horizon { horizon });
    }
    let g = |s: f64| z_cocycle(tau, y, s).map(|z| z - t);
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo > 0.0 || ghi < 0.0 {
        // Widen once to absorb quadrature error at the bracket ends.
        let pad = 1e-6 * (1.0 + t.abs());
        lo -= pad;
        hi += pad;
        if g(lo)? > 0.0 || g(hi)? < 0.0 {
            return Err(LabError::Horizon { horizon: hi });
        }
    }
    let mut x = t / (0.5 * (tau.inf + tau.sup));
    for _ in 0..200 {
        if x <= lo || x >= hi {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x)?;
        if gx.abs() < 1e-11 || hi - lo < 1e-13 * (1.0 + x.abs()) {
            return Ok(x);
        }
        // g is increasing, so its sign alone locates the root.
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = tau.evaluate_frame(&Sl2Matrix::u(x).mul(&y.rep))?;
        x -= gx / slope;
    }
    Ok(0.5 * (lo + hi))
}

/// Deviation curve `|t − z(y,t)|` with a fitted power law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationCurve {
    pub t: Vec<f64>,
    pub deviation: Vec<f64>,
    pub slope: f64,
    pub slope_lo: f64,
    pub slope_hi: f64,
}

pub fn birkhoff_deviation(
    tau: &TimeChangeFn,
    y: &QuotientPoint,
    t_grid: &[f64],
) -> Result<DeviationCurve> {
    let deviation = t_grid
        .iter()
        .map(|&t| z_cocycle(tau, y, t).map(|z| (t - z).abs()))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&deviation)
        .filter(|(t, d)| **t > 0.0 && **d > 0.0)
        .map(|(t, d)| (t.ln(), d.ln()))
        .collect();
    let (slope, se) = least_squares_slope(&pts);
    Ok(DeviationCurve {
        t: t_grid.to_vec(),
        deviation,
        slope,
        slope_lo: slope - 1.96 * se,
        slope_hi: slope + 1.96 * se,
    })
}

/// Ordinary least-squares slope and its standard error.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, f64::INFINITY);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if pts.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let rss: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

/// `Δ^τ_r(y,t) = ∫_0^t τ(u^s ū^r y) ds − ∫_0^{t/(1+rt)} τ(u^s y) ds`.
pub fn delta_tau(tau: &TimeChangeFn, y: &QuotientPoint, r: f64, t: f64) -> Result<f64> {
    let den = 1.0 + r * t;
    if den <= 0.0 {
        return Err(LabError::Singularity { value: den });
    }
    if tau.is_constant() {
        return Ok(tau.scale * delta_r(r, t)?);
    }
    let shifted = reduce(&Sl2Matrix::ubar(r).mul(&y.rep))?;
    Ok(z_cocycle(tau, &shifted, t)? - z_cocycle(tau, y, t / den)?)
}

/// Empirical distribution of `|Δ^τ − Δ| / |Δ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyReport {
    pub amplitude: f64,
    pub samples: usize,
    pub excluded: usize,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub fraction_below: f64,
    pub eps_target: f64,
    pub seed: u64,
    /// Per-sample `(t, r, relative error)` in sample order; excluded samples omitted.
    pub records: Vec<(f64, f64, f64)>,
}

/// Samples thick-part `y`, `t` log-uniform in `t_range`, `r` uniform with `|rt| <= rt_max`.
pub fn ratner_estimate_survey(
    tau: &TimeChangeFn,
    eps_target: f64,
    sample_size: usize,
    t_range: (f64, f64),
    rt_max: f64,
    seed: u64,
) -> Result<SurveyReport> {
    if !(rt_max > 0.0 && rt_max < 1.0) {
        return Err(LabError::Precondition(format!("|rt| window {rt_max} outside (0,1)")));
    }
    let rows: Vec<Option<(f64, f64, f64)>> = (0..sample_size)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let g = sample_haar(&mut rng, Some(2.0));
            let y = reduce(&g)?;
            let t = (rng.gen_range(t_range.0.ln()..=t_range.1.ln())).exp();
            let r = rng.gen_range(-rt_max..=rt_max) / t;
            let d = delta_r(r, t)?;
            if d.abs() < 1e-12 {
                return Ok(None);
            }
            let dt = delta_tau(tau, &y, r, t)?;
            Ok(Some((t, r, (dt - d).abs() / d.abs())))
        })
        .collect::<Result<_>>()?;
    let records: Vec<(f64, f64, f64)> = rows.iter().flatten().copied().collect();
    let excluded = sample_size - records.len();
    let mut errs: Vec<f64> = records.iter().map(|r| r.2).collect();
    errs.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if errs.is_empty() {
            f64::NAN
        } else {
            errs[((p * (errs.len() - 1) as f64).round() as usize).min(errs.len() - 1)]
        }
    };
    let below = errs.iter().filter(|e| **e < eps_target).count();
    Ok(SurveyReport {
        amplitude: tau.amplitude,
        samples: sample_size,
        excluded,
        p50: q(0.5),
        p90: q(0.9),
        p99: q(0.99),
        fraction_below: below as f64 / errs.len().max(1) as f64,
        eps_target,
        seed,
        records,
    })
}

/// `|∫_0^T (τ₁−τ₂)(u^t y) dt − (F(u^T y) − F(y))|` for each `T` in the grid.
pub fn coboundary_residual(
    tau1: &dyn Fn(&QuotientPoint) -> f64,
    tau2: &dyn Fn(&QuotientPoint) -> f64,
    f: &dyn Fn(&QuotientPoint) -> f64,
    y: &QuotientPoint,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    let diff = |x: &QuotientPoint| tau1(x) - tau2(x);
    let never = |_: &QuotientPoint, _: f64| false;
    let f0 = f(y);
    t_grid
        .iter()
        .map(|&t| {
            let integral = orbit_integral(&diff, &never, &y.rep, t)?;
            let end = reduce(&Sl2Matrix::u(t).mul(&y.rep))?;
            Ok((integral - (f(&end) - f0)).abs())
        })
        .collect()
}
