//! The quotient `X = SL(2,R)/SL(2,Z)`: flows act on the left, the lattice on the right.
//!
//! A coset `gΓ` is labelled by `w = g⁻¹·i`, which the lattice moves by Möbius
//! maps. Reducing `w` into the standard fundamental domain by `δ ∈ Γ` gives the
//! canonical representative `rep = g δ⁻¹` and witness `δ`, so `g = rep·δ`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::config::TOL;
use crate::error::{LabError, Result};
use crate::shear::Sl2Matrix;

/// An integral unimodular matrix `[[a,b],[c,d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice2(pub [[i64; 2]; 2]);

impl Lattice2 {
    pub const I: Self = Self([[1, 0], [0, 1]]);
    pub const T: Self = Self([[1, 1], [0, 1]]);
    pub const T_INV: Self = Self([[1, -1], [0, 1]]);
    pub const S: Self = Self([[0, -1], [1, 0]]);

    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn inv(&self) -> Self {
        let m = self.0;
        Self([[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]])
    }

    pub fn neg(&self) -> Self {
        let m = self.0;
        Self([[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]])
    }

    pub fn det(&self) -> i64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Representative of `±γ` with a positive first nonzero entry.
    pub fn projective(&self) -> Self {
        let m = self.0;
        let first = [m[0][0], m[0][1], m[1][0], m[1][1]]
            .into_iter()
            .find(|x| *x != 0)
            .unwrap_or(1);
        if first < 0 {
            self.neg()
        } else {
            *self
        }
    }

    pub fn is_identity_projective(&self) -> bool {
        self.projective() == Self::I
    }

    pub fn to_sl2(&self) -> Sl2Matrix {
        let m = self.0;
        Sl2Matrix::raw(m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64)
    }

    /// Rounds a nearly integral matrix; `None` if any entry is off by more than the tolerance.
    pub fn from_sl2_rounded(m: &Sl2Matrix) -> Option<Self> {
        let r = |x: f64| (x - x.round()).abs() < TOL.integral;
        if ![m.a, m.b, m.c, m.d].into_iter().all(r) {
            return None;
        }
        let l = Self([
            [m.a.round() as i64, m.b.round() as i64],
            [m.c.round() as i64, m.d.round() as i64],
        ]);
        (l.det() == 1).then_some(l)
    }

    pub fn word_product(word: &[Lattice2]) -> Self {
        word.iter().fold(Self::I, |acc, g| acc.mul(g))
    }
}

/// A point of `X` with its canonical frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientPoint {
    pub rep: Sl2Matrix,
    /// `original = rep · witness`.
    pub witness: Lattice2,
    /// `rep⁻¹·i`, inside the fundamental domain.
    pub tag_z: (f64, f64),
}

const REDUCE_CAP: usize = 100_000;

/// Reduces `w` into `{|Re w| <= 1/2, |w| >= 1}` and returns `(w', δ)` with `δ·w = w'`.
pub fn reduce_upper_half(w: (f64, f64)) -> Result<((f64, f64), Lattice2)> {
    let (mut x, mut y) = w;
    if !(y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(LabError::Domain(format!("{w:?} is not in the upper half-plane")));
    }
    let mut delta = Lattice2::I;
    let mut steps = 0;
    loop {
        steps += 1;
        if steps > REDUCE_CAP {
            return Err(LabError::Numerical("fundamental-domain reduction did not terminate".into()));
        }
        let k = x.round();
        if k != 0.0 {
            x -= k;
            let ki = k as i64;
            delta = Lattice2([[1, -ki], [0, 1]]).mul(&delta);
        }
        let r2 = x * x + y * y;
        if r2 < 1.0 - 1e-14 {
            x = -x / r2;
            y /= r2;
            delta = Lattice2::S.mul(&delta);
        } else {
            break;
        }
    }
    // Canonical side of the boundary: Re ∈ [−1/2, 1/2), and Re <= 0 on the unit circle.
    if x >= 0.5 - TOL.boundary {
        x -= 1.0;
        delta = Lattice2::T_INV.mul(&delta);
    }
    let r2 = x * x + y * y;
    if (r2 - 1.0).abs() <= TOL.boundary && x > TOL.boundary {
        x = -x / r2;
        y /= r2;
        delta = Lattice2::S.mul(&delta);
    }
    Ok(((x, y), delta))
}

/// Canonical point of the coset `gΓ`.
///
/// Over the elliptic points `i` and `e^{2πi/3}` the frame is canonical only up
/// to their finite stabilizers.
pub fn reduce(g: &Sl2Matrix) -> Result<QuotientPoint> {
    if (g.det() - 1.0).abs() > TOL.unimodular * g.max_abs().powi(2).max(1.0) {
        return Err(LabError::Domain(format!("det = {} is not 1", g.det())));
    }
    let w = g.inv().mobius((0.0, 1.0));
    let (_, delta) = reduce_upper_half(w)?;
    let mut rep = g.mul(&delta.inv().to_sl2());
    let mut witness = delta;
    if rep.a < 0.0 || (rep.a == 0.0 && rep.c < 0.0) {
        rep = rep.neg();
        witness = witness.neg();
    }
    let tag_z = rep.inv().mobius((0.0, 1.0));
    Ok(QuotientPoint {
        rep,
        witness,
        tag_z,
    })
}

impl QuotientPoint {
    /// The point `g·Γ` for a representative already in canonical form.
    pub fn from_rep(g: &Sl2Matrix) -> Result<Self> {
        reduce(g)
    }

    /// The original frame `rep · witness`.
    pub fn original(&self) -> Sl2Matrix {
        self.rep.mul(&self.witness.to_sl2())
    }

    pub fn height(&self) -> f64 {
        self.tag_z.1
    }
}

/// Which one-parameter subgroup to flow along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    U,
    A,
    Ubar,
}

pub fn flow_matrix(which: FlowKind, t: f64) -> Sl2Matrix {
    match which {
        FlowKind::U => Sl2Matrix::u(t),
        FlowKind::A => Sl2Matrix::a_flow(t),
        FlowKind::Ubar => Sl2Matrix::ubar(t),
    }
}

/// `exp(t X)·x`.
pub fn flow(x: &QuotientPoint, which: FlowKind, t: f64) -> Result<QuotientPoint> {
    reduce(&flow_matrix(which, t).mul(&x.rep))
}

/// Hyperbolic distance in the upper half-plane.
pub fn hyperbolic_distance(z: (f64, f64), w: (f64, f64)) -> f64 {
    let dx = z.0 - w.0;
    let dy = z.1 - w.1;
    2.0 * ((dx * dx + dy * dy).sqrt() / (2.0 * (z.1 * w.1).sqrt())).asinh()
}

const BASE_POINTS: [(f64, f64); 2] = [(0.0, 1.0), (0.0, 2.0)];

/// Right-invariant frame metric on PSL(2,R).
///
/// `d(g,h) = (d_H(g⁻¹i, h⁻¹i) + d_H(g⁻¹2i, h⁻¹2i)) / 3`. An element of PSL(2,R)
/// fixing two points is trivial, so this is a genuine metric; the factor 1/3
/// makes `d(I, u^c) = |c| + O(c²)`.
pub fn frame_distance(g: &Sl2Matrix, h: &Sl2Matrix) -> f64 {
    let (gi, hi) = (g.inv(), h.inv());
    BASE_POINTS
        .iter()
        .map(|p| hyperbolic_distance(gi.mobius(*p), hi.mobius(*p)))
        .sum::<f64>()
        / 3.0
}

type Ball = Arc<Vec<(Lattice2, usize)>>;

/// Distinct elements of PSL(2,Z) with word length `<= cap` in `{T, T⁻¹, S}`.
pub fn word_ball(cap: usize) -> Ball {
    static CACHE: OnceLock<Mutex<HashMap<usize, Ball>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("cache lock").get(&cap) {
        return b.clone();
    }
    let mut seen: HashSet<Lattice2> = HashSet::new();
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    seen.insert(Lattice2::I);
    out.push((Lattice2::I, 0));
    queue.push_back((Lattice2::I, 0usize));
    while let Some((g, len)) = queue.pop_front() {
        if len == cap {
            continue;
        }
        for gen in [Lattice2::T, Lattice2::T_INV, Lattice2::S] {
            let next = g.mul(&gen).projective();
            if seen.insert(next) {
                out.push((next, len + 1));
                queue.push_back((next, len + 1));
            }
        }
    }
    let ball = Arc::new(out);
    cache
        .lock()
        .expect("cache lock")
        .insert(cap, ball.clone());
    ball
}

/// Minimizer of `d(rep1, rep2·γ)` over the word ball.
pub fn best_match(g1: &Sl2Matrix, g2: &Sl2Matrix, word_cap: usize) -> (Lattice2, f64) {
    word_ball(word_cap)
        .iter()
        .map(|(gam, _)| (*gam, frame_distance(g1, &g2.mul(&gam.to_sl2()))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("ball contains the identity")
}

/// Quotient distance upper bound `min_γ d(rep1, rep2·γ)`.
pub fn distance(x1: &QuotientPoint, x2: &QuotientPoint, word_cap: usize) -> f64 {
    let a = best_match(&x1.rep, &x2.rep, word_cap).1;
    let b = best_match(&x2.rep, &x1.rep, word_cap).1;
    a.min(b)
}

/// Half the shortest nontrivial lattice displacement at `x`.
pub fn injectivity_proxy(x: &QuotientPoint, word_cap: usize) -> f64 {
    0.5 * word_ball(word_cap)
        .iter()
        .filter(|(g, _)| !g.is_identity_projective())
        .map(|(g, _)| frame_distance(&x.rep, &x.rep.mul(&g.to_sl2())))
        .fold(f64::INFINITY, f64::min)
}

/// Frame with `g⁻¹·i = x + iy` and rotation angle `θ`.
pub fn frame_from_tag(x: f64, y: f64, theta: f64) -> Sl2Matrix {
    let sy = y.sqrt();
    let ginv = Sl2Matrix::raw(sy, x / sy, 0.0, 1.0 / sy).mul(&Sl2Matrix::rotation(theta));
    ginv.inv()
}
