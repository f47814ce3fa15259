//! Closed-form shearing in SL(2,R) and the polynomial estimates around it.
//!
//! Conventions: `u^t = [[1,0],[t,1]]`, `ū^r = [[1,r],[0,1]]`,
//! `a^ω = diag(e^{ω/2}, e^{-ω/2})`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{S_MAX, TOL};
use crate::error::{LabError, Result};
use crate::intervals::{effective_gap, intersect_families, Interval, IntervalFamily};
use crate::weight::adjoint_a;

/// A 2×2 real matrix `[[a,b],[c,d]]`, unimodular when built through [`Sl2Matrix::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sl2Matrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Sl2Matrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Self { a, b, c, d };
        if (m.det() - 1.0).abs() > TOL.group * m.max_abs().powi(2).max(1.0) {
            return Err(LabError::Domain(format!("det = {} is not 1", m.det())));
        }
        Ok(m)
    }

    /// Unchecked constructor for products of unimodular factors.
    pub const fn raw(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub const fn identity() -> Self {
        Self::raw(1.0, 0.0, 0.0, 1.0)
    }

    pub fn u(t: f64) -> Self {
        Self::raw(1.0, 0.0, t, 1.0)
    }

    pub fn ubar(r: f64) -> Self {
        Self::raw(1.0, r, 0.0, 1.0)
    }

    pub fn a_flow(omega: f64) -> Self {
        let e = (omega / 2.0).exp();
        Self::raw(e, 0.0, 0.0, 1.0 / e)
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::raw(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::raw(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// Inverse of a unimodular matrix.
    pub fn inv(&self) -> Self {
        Self::raw(self.d, -self.b, -self.c, self.a)
    }

    pub fn neg(&self) -> Self {
        Self::raw(-self.a, -self.b, -self.c, -self.d)
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::raw(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    /// Largest entrywise difference.
    pub fn max_diff(&self, o: &Self) -> f64 {
        self.sub(o).max_abs()
    }

    /// Möbius action on the upper half-plane, `z ↦ (az+b)/(cz+d)`.
    pub fn mobius(&self, z: (f64, f64)) -> (f64, f64) {
        let (x, y) = z;
        let (nr, ni) = (self.a * x + self.b, self.a * y);
        let (dr, di) = (self.c * x + self.d, self.c * y);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    /// Whether every entry of `self − I` is below `eps`.
    pub fn near_identity(&self, eps: f64) -> bool {
        self.max_diff(&Self::identity()) < eps
    }
}

/// `u^t h u^{-s}` in closed form. The (1,2) entry is `b` for all `(t,s)`.
pub fn relative_motion(h: &Sl2Matrix, t: f64, s: f64) -> Sl2Matrix {
    let top = h.a - h.b * s;
    Sl2Matrix::raw(top, h.b, h.c - h.d * s + t * top, h.d + h.b * t)
}

/// `Δ_r(t) = t − t/(1+rt) = rt²/(1+rt)`.
pub fn delta_r(r: f64, t: f64) -> Result<f64> {
    let den = 1.0 + r * t;
    if den <= 0.0 {
        return Err(LabError::Singularity { value: den });
    }
    Ok(r * t * t / den)
}

/// Parameters of `u^t ū^r = ū^{r'} a^{ω} u^{t'}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commutation {
    pub r_prime: f64,
    pub omega: f64,
    pub t_prime: f64,
}

impl Commutation {
    /// The right-hand side product.
    pub fn product(&self) -> Sl2Matrix {
        Sl2Matrix::ubar(self.r_prime)
            .mul(&Sl2Matrix::a_flow(self.omega))
            .mul(&Sl2Matrix::u(self.t_prime))
    }
}

pub fn commutation_uubar(t: f64, r: f64) -> Result<Commutation> {
    let den = 1.0 + r * t;
    if den <= 0.0 {
        return Err(LabError::Singularity { value: den });
    }
    Ok(Commutation {
        r_prime: r / den,
        omega: -2.0 * den.ln(),
        t_prime: t / den,
    })
}

/// Measured constants `B_i` with `|v_i| <= B_i R0 l̄1^{1−i−κ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffBounds {
    /// Coefficients `v_0..v_k` recovered from samples.
    pub recovered: Vec<f64>,
    pub constants: Vec<f64>,
    pub condition: f64,
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Recovers coefficient bounds for `p(t) = Σ v_i t^i` from its values.
///
/// Hypothesis: `|p(t)| <= C max{R0, t^{1−κ}}` on `[0, l̄1]`.
/// Samples `F(x) = (p(l̄1 x) − p(0)) (l̄1 x)^{κ−1}` at `x = m/k` and solves
/// the power system `M[m][i] = (m/k)^{i−1+κ}`.
pub fn poly_coeff_bounds(
    coeffs: &[f64],
    r0: f64,
    kappa: f64,
    l_bar1: f64,
    c: f64,
) -> Result<CoeffBounds> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LabError::Domain(format!("κ = {kappa} outside (0,1]")));
    }
    if !(l_bar1 > 1.0 && r0 > 0.0) {
        return Err(LabError::Domain("need l̄1 > 1 and R0 > 0".into()));
    }
    let grid = 2048;
    for g in 0..=grid {
        let t = l_bar1 * g as f64 / grid as f64;
        let bound = c * r0.max(t.powf(1.0 - kappa));
        if horner(coeffs, t).abs() > bound * (1.0 + 1e-9) {
            return Err(LabError::Precondition(format!(
                "|p({t})| exceeds C·max(R0, t^(1−κ))"
            )));
        }
    }
    let k = coeffs.len().saturating_sub(1);
    let v0 = horner(coeffs, 0.0);
    let mut recovered = vec![v0];
    let mut condition = 1.0;
    if k > 0 {
        let m = DMatrix::from_fn(k, k, |row, col| {
            ((row + 1) as f64 / k as f64).powf(col as f64 + kappa)
        });
        condition = condition_number(&m);
        if condition > 1e12 {
            return Err(LabError::Conditioning { condition });
        }
        let rhs = DVector::from_fn(k, |row, _| {
            let x = (row + 1) as f64 / k as f64;
            let t = l_bar1 * x;
            (horner(coeffs, t) - v0) * t.powf(kappa - 1.0)
        });
        let w = m
            .lu()
            .solve(&rhs)
            .ok_or(LabError::Conditioning { condition })?;
        for i in 1..=k {
            recovered.push(w[i - 1] / l_bar1.powf(i as f64 - 1.0 + kappa));
        }
    }
    let constants = recovered
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() / (r0 * l_bar1.powf(1.0 - i as f64 - kappa)))
        .collect();
    Ok(CoeffBounds {
        recovered,
        constants,
        condition,
    })
}

/// Output of the SO(2,1)-coefficient interval solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sl2Closeness {
    pub family: IntervalFamily,
    /// Right end of the first interval.
    pub l_bar1: f64,
    /// `|b| l̄1^{1+κ}`.
    pub b_const: f64,
    /// `|a−d| l̄1^{κ}`.
    pub ad_const: f64,
}

/// Bisection to relative width `1e-13` on a sign change of `f`.
pub(crate) fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-13 * mid.abs().max(1e-300) {
            break;
        }
        let fm = f(mid);
        if (fm <= 0.0) == (flo <= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed set `{s ∈ [0, s_max] : f(s) <= 0}` from sign changes on a grid.
fn sublevel_set(
    f: &dyn Fn(f64) -> f64,
    mandatory: &[f64],
    s_max: f64,
    grid: usize,
) -> Result<IntervalFamily> {
    let s_min = 1e-9 * s_max.max(1.0);
    let ratio = (s_max / s_min).powf(1.0 / grid as f64);
    let mut pts: Vec<f64> = std::iter::once(0.0)
        .chain((0..=grid).map(|k| s_min * ratio.powi(k as i32)))
        .chain(mandatory.iter().copied().filter(|x| x.is_finite() && *x > 0.0 && *x < s_max))
        .collect();
    pts.push(s_max);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::new();
    let mut start = if f(0.0) <= 0.0 { Some(0.0) } else { None };
    let mut prev = (pts[0], f(pts[0]) <= 0.0);
    for &s in &pts[1..] {
        let inside = f(s) <= 0.0;
        if inside != prev.1 {
            let root = bisect(f, prev.0, s);
            if inside {
                start = Some(root);
            } else if let Some(lo) = start.take() {
                out.push(Interval { lo, hi: root });
            }
        }
        prev = (s, inside);
    }
    if let Some(lo) = start {
        out.push(Interval { lo, hi: s_max });
    }
    IntervalFamily::from_unsorted(out, s_max)
}

/// Solves `|−bs² + (a−d)s| <= C max{R0, s^{1−κ}}` on `[0, s_max]`.
#[allow(clippy::too_many_arguments)]
pub fn closeness_intervals_sl2(
    h: &Sl2Matrix,
    eps: f64,
    kappa: f64,
    r0: f64,
    c: f64,
    s_max: f64,
    grid: usize,
) -> Result<Sl2Closeness> {
    if !(h.b.abs() < eps && h.c.abs() < eps && (h.a - 1.0).abs() < eps && (h.d - 1.0).abs() < eps)
    {
        return Err(LabError::Precondition(format!(
            "h is not within {eps} of the identity"
        )));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LabError::Domain(format!("κ = {kappa} outside (0,1]")));
    }
    let (b, ad) = (h.b, h.a - h.d);
    let f = move |s: f64| (ad * s - b * s * s).abs() - c * r0.max(s.powf(1.0 - kappa));
    let mut special = Vec::new();
    if b != 0.0 {
        special.push(ad / b);
        special.push(ad / (2.0 * b));
        special.push(ad * kappa / (b * (1.0 + kappa)));
    }
    if kappa < 1.0 {
        special.push(r0.powf(1.0 / (1.0 - kappa)));
    }
    let family = sublevel_set(&f, &special, s_max, grid)?;
    let l_bar1 = family.intervals().first().map_or(0.0, |i| i.hi);
    Ok(Sl2Closeness {
        l_bar1,
        b_const: b.abs() * l_bar1.powf(1.0 + kappa),
        ad_const: ad.abs() * l_bar1.powf(kappa),
        family,
    })
}

/// Default-grid variant with horizon [`S_MAX`].
pub fn closeness_intervals_sl2_default(
    h: &Sl2Matrix,
    eps: f64,
    kappa: f64,
    r0: f64,
    c: f64,
) -> Result<Sl2Closeness> {
    closeness_intervals_sl2(h, eps, kappa, r0, c, S_MAX, 4096)
}

/// Real roots of a polynomial given by ascending coefficients.
pub(crate) fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last() == Some(&0.0) {
        c.pop();
    }
    match c.len() {
        0 | 1 => vec![],
        2 => vec![-c[0] / c[1]],
        3 => {
            let (p0, p1, p2) = (c[0], c[1], c[2]);
            let disc = p1 * p1 - 4.0 * p2 * p0;
            if disc < 0.0 {
                return vec![];
            }
            // Stable form avoiding cancellation.
            let sgn = if p1 >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (p1 + sgn * disc.sqrt());
            let mut out = Vec::new();
            if q != 0.0 {
                out.push(q / p2);
                out.push(p0 / q);
            } else {
                out.push(0.0);
            }
            out
        }
        deg1 => {
            let deg = deg1 - 1;
            let lead = c[deg];
            let comp = DMatrix::from_fn(deg, deg, |i, j| {
                if j == deg - 1 {
                    -c[i] / lead
                } else if i == j + 1 {
                    1.0
                } else {
                    0.0
                }
            });
            comp.complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= 1e-9 * z.re.abs().max(1.0))
                .map(|z| z.re)
                .collect()
        }
    }
}

/// Ascending coefficients (in `s`) of each `c_j(s) = Σ_{i<=j} b_i C(j,i) s^{j−i}`.
fn string_polys(b: &[f64]) -> Vec<Vec<f64>> {
    (0..b.len())
        .map(|j| {
            let mut p = vec![0.0; j + 1];
            for (i, bi) in b.iter().enumerate().take(j + 1) {
                p[j - i] += bi * binom(j, i);
            }
            p
        })
        .collect()
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `{s : max_j |c_j(s)| <= Cε}` for one V^⊥ string, with exact polynomial breakpoints.
pub fn closeness_intervals_vperp(
    b: &[f64],
    eps: f64,
    c: f64,
    s_max: f64,
) -> Result<IntervalFamily> {
    let norm = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm >= eps {
        return Err(LabError::Precondition(format!(
            "coefficient size {norm} is not below ε = {eps}"
        )));
    }
    let polys = string_polys(b);
    let level = c * eps;
    let mut cuts = vec![0.0, s_max];
    for p in &polys {
        for sign in [-1.0, 1.0] {
            let mut q = p.clone();
            q[0] -= sign * level;
            cuts.extend(real_roots(&q).into_iter().filter(|r| *r > 0.0 && *r < s_max));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let ok = |s: f64| polys.iter().all(|p| horner(p, s).abs() <= level);
    let pieces: Vec<Interval> = cuts
        .windows(2)
        .filter(|w| ok(0.5 * (w[0] + w[1])))
        .map(|w| Interval { lo: w[0], hi: w[1] })
        .collect();
    IntervalFamily::from_unsorted(pieces, s_max)
}

/// One V^⊥ string: highest weight and coefficients on `v_0..v_ς`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VperpPart {
    pub highest_weight: usize,
    pub coeffs: Vec<f64>,
}

/// Intersected closeness intervals plus measured coefficient constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearProfile {
    pub intervals: IntervalFamily,
    /// Count bound `2 · Π (per-part counts)`.
    pub count_bound: usize,
    pub bounds: Vec<(String, f64)>,
}

/// Intersects the SO(2,1) family with every V^⊥ family.
///
/// `t_map` is checked to be increasing with `|t(s) − s| <= C max{R0, s^{1−κ}}`.
#[allow(clippy::too_many_arguments)]
pub fn closeness_intervals_full(
    h: &Sl2Matrix,
    parts: &[VperpPart],
    eps: f64,
    kappa: f64,
    r0: f64,
    c: f64,
    eta: f64,
    t_map: &dyn Fn(f64) -> f64,
    s_max: f64,
) -> Result<ShearProfile> {
    let grid = 2000;
    let mut prev = t_map(0.0);
    for g in 1..=grid {
        let s = s_max * (g as f64 / grid as f64).powi(3);
        let t = t_map(s);
        if t < prev {
            return Err(LabError::Precondition("time map is not monotone".into()));
        }
        if (t - s).abs() > c * r0.max(s.powf(1.0 - kappa)) * (1.0 + 1e-9) {
            return Err(LabError::Precondition(format!(
                "time map drifts too far at s = {s}"
            )));
        }
        prev = t;
    }
    let sl2 = closeness_intervals_sl2(h, eps, kappa, r0, c, s_max, 4096)?;
    let mut family = sl2.family.clone();
    let mut count_bound = 2usize;
    let mut bounds = vec![
        ("sl2.b".to_string(), sl2.b_const),
        ("sl2.a_minus_d".to_string(), sl2.ad_const),
    ];
    for (k, part) in parts.iter().enumerate() {
        let fam = closeness_intervals_vperp(&part.coeffs, eps, c, s_max)?;
        count_bound = count_bound.saturating_mul(fam.len().max(1));
        family = intersect_families(&family, &fam)?;
        let l1 = fam.intervals().first().map_or(0.0, |i| i.hi);
        let sig = part.highest_weight;
        let worst = part
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, b)| b.abs() * l1.powi((sig - i) as i32) / eps)
            .fold(0.0, f64::max);
        bounds.push((format!("vperp{k}.coeff"), worst));
    }
    // Chains of consecutive intervals without an effective gap push the
    // estimate further out with exponent ξ = (1+η)^{-(k−1)}.
    let ivs = family.intervals();
    let mut chain = 1;
    for w in 1..ivs.len() {
        if effective_gap(&ivs[w - 1], &ivs[w], eta)? {
            chain = 1;
            continue;
        }
        chain += 1;
        let xi = (1.0 + eta).powi(-(chain - 1));
        let l_k = ivs[w].hi;
        bounds.push((
            format!("strengthened{w}.b"),
            h.b.abs() * l_k.powf((1.0 + kappa) * xi),
        ));
        bounds.push((
            format!("strengthened{w}.a_minus_d"),
            (h.a - h.d).abs() * l_k.powf(kappa * xi),
        ));
    }
    Ok(ShearProfile {
        intervals: family,
        count_bound,
        bounds,
    })
}

/// Before/after magnitudes of one conjugated quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleEntry {
    pub name: String,
    pub before: f64,
    pub after: f64,
}

impl ScaleEntry {
    pub fn factor(&self) -> f64 {
        if self.before == 0.0 {
            1.0
        } else {
            self.after / self.before
        }
    }
}

/// Effect of conjugation by `a^ω` on each piece of a shearing configuration.
pub fn renormalize_report(
    h: &Sl2Matrix,
    parts: &[VperpPart],
    omega: f64,
    s: f64,
    t: f64,
) -> Result<Vec<ScaleEntry>> {
    if omega.abs() > 700.0 {
        return Err(LabError::Range(format!("|ω| = {} overflows", omega.abs())));
    }
    let a = Sl2Matrix::a_flow(omega);
    let conj = a.mul(h).mul(&a.inv());
    let mut out = vec![
        ScaleEntry {
            name: "b".into(),
            before: h.b,
            after: conj.b,
        },
        ScaleEntry {
            name: "c".into(),
            before: h.c,
            after: conj.c,
        },
        ScaleEntry {
            name: "a".into(),
            before: h.a,
            after: conj.a,
        },
        ScaleEntry {
            name: "d".into(),
            before: h.d,
            after: conj.d,
        },
    ];
    for (label, time) in [("s", s), ("t", t)] {
        let m = a.mul(&Sl2Matrix::u(-time)).mul(&a.inv());
        out.push(ScaleEntry {
            name: format!("shear_{label}"),
            before: -time,
            after: m.c,
        });
    }
    for (k, p) in parts.iter().enumerate() {
        let scaled = adjoint_a(omega, &p.coeffs)?;
        for (j, (b, c)) in p.coeffs.iter().zip(scaled).enumerate() {
            out.push(ScaleEntry {
                name: format!("vperp{k}.{j}"),
                before: *b,
                after: c,
            });
        }
    }
    Ok(out)
}

/// Values of one centralizer coordinate at `0`, `s1`, `s2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralizerTrack {
    pub at0: f64,
    pub at_s1: f64,
    pub at_s2: f64,
}

/// Recovered coefficient constants and sup bounds for the shearing comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearComparison {
    /// `B[j][i]` with `|coefficient of t^i| = B ε s2^{-i}`.
    pub coeff_constants: Vec<[f64; 3]>,
    /// Lagrange bound on `sup_{[0,s2]} |p_j|` in units of `ε`.
    pub sup_bound: Vec<f64>,
    /// Exact `sup_{[0,s2]} |p_j|` from the recovered quadratic.
    pub sup_measured: Vec<f64>,
}

/// Quadratic through three centralizer samples, with bounds in units of `ε`.
pub fn shear_compare(
    tracks: &[CentralizerTrack],
    eps: f64,
    s1: f64,
    s2: f64,
) -> Result<ShearComparison> {
    if !(s2 > 0.0 && s1 >= s2 / 3.0 && s1 <= 2.0 * s2 / 3.0) {
        return Err(LabError::Precondition(format!(
            "s1 = {s1} must lie in [s2/3, 2 s2/3] with s2 = {s2}"
        )));
    }
    let nodes = [0.0, s1, s2];
    // Lebesgue constant of the nodes on [0, s2], from a dense scan of Σ|ℓ_k|.
    let lebesgue = (0..=2000)
        .map(|g| {
            let t = s2 * g as f64 / 2000.0;
            (0..3).map(|k| lagrange(&nodes, k, t).abs()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    let mut out = ShearComparison {
        coeff_constants: Vec::new(),
        sup_bound: Vec::new(),
        sup_measured: Vec::new(),
    };
    for tr in tracks {
        let vals = [tr.at0, tr.at_s1, tr.at_s2];
        if vals.iter().any(|v| v.abs() >= eps) {
            return Err(LabError::Precondition(
                "centralizer samples must be below ε at 0, s1, s2".into(),
            ));
        }
        // Ascending coefficients of the interpolant.
        let c0 = tr.at0;
        let d1 = (tr.at_s1 - c0) / s1;
        let d2 = (tr.at_s2 - c0) / s2;
        let c2 = (d2 - d1) / (s2 - s1);
        let c1 = d1 - c2 * s1;
        let coeffs = [c0, c1, c2];
        out.coeff_constants.push([
            c0.abs() / eps,
            c1.abs() * s2 / eps,
            c2.abs() * s2 * s2 / eps,
        ]);
        let max_node = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        out.sup_bound.push(lebesgue * max_node / eps);
        let mut sup = tr.at0.abs().max(tr.at_s2.abs());
        if c2 != 0.0 {
            let v = -c1 / (2.0 * c2);
            if v > 0.0 && v < s2 {
                sup = sup.max(horner(&coeffs, v).abs());
            }
        }
        out.sup_measured.push(sup / eps);
    }
    Ok(out)
}

fn lagrange(nodes: &[f64; 3], k: usize, t: f64) -> f64 {
    (0..3)
        .filter(|&m| m != k)
        .map(|m| (t - nodes[m]) / (nodes[k] - nodes[m]))
        .product()
}
