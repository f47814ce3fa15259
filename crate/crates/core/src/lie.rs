//! The Lie algebra so(n,1), its structured basis and the embedded sl2-triple.
//!
//! Matrices are `(n+1)×(n+1)` and preserve the form `J = diag(I_n, -1)`.
//! Coordinates always follow the basis order `Y_1..Y_n, Θ_12, Θ_13, .., Θ_{n-1,n}`.

use nalgebra::{DMatrix, DVector};

use crate::config::TOL;
use crate::error::{LabError, Result};
use crate::shear::Sl2Matrix;

/// An element of so(n,1), kept both as a matrix and as basis coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    n: usize,
    mat: DMatrix<f64>,
    coords: DVector<f64>,
}

/// An element of SO(n,1).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    n: usize,
    mat: DMatrix<f64>,
}

/// `U`, `H = Y_n`, `Ū` with `[H,U] = -U`, `[H,Ū] = Ū`, `[U,Ū] = -2H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sl2Triple {
    pub u: LieElement,
    pub h: LieElement,
    pub ubar: LieElement,
}

/// Dimension of so(n,1).
pub fn dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// The form `J = diag(I_n, -1)`.
pub fn j_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n + 1, n + 1);
    j[(n, n)] = -1.0;
    j
}

fn check_rank(n: usize) -> Result<()> {
    if n < 2 {
        return Err(LabError::Domain(format!("rank n must be >= 2, got {n}")));
    }
    Ok(())
}

/// Index pairs `(i, j)` with `i < j`, zero-based, in basis order.
fn theta_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn coords_of(n: usize, mat: &DMatrix<f64>) -> DVector<f64> {
    let mut c = DVector::zeros(dim(n));
    for k in 0..n {
        c[k] = mat[(k, n)];
    }
    for (idx, (i, j)) in theta_pairs(n).enumerate() {
        c[n + idx] = mat[(j, i)];
    }
    c
}

fn matrix_of(n: usize, coords: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        m[(k, n)] += coords[k];
        m[(n, k)] += coords[k];
    }
    for (idx, (i, j)) in theta_pairs(n).enumerate() {
        m[(j, i)] += coords[n + idx];
        m[(i, j)] -= coords[n + idx];
    }
    m
}

impl LieElement {
    /// Builds an element from a matrix, checking `J mᵀ J = -m`.
    pub fn from_matrix(n: usize, mat: DMatrix<f64>) -> Result<Self> {
        check_rank(n)?;
        if mat.nrows() != n + 1 || mat.ncols() != n + 1 {
            return Err(LabError::Domain(format!(
                "expected a {0}x{0} matrix, got {1}x{2}",
                n + 1,
                mat.nrows(),
                mat.ncols()
            )));
        }
        let j = j_form(n);
        let resid = (&j * mat.transpose() * &j + &mat).amax();
        let scale = mat.amax().max(1.0);
        if resid > 1e-9 * scale {
            return Err(LabError::Domain(format!(
                "matrix is not in so({n},1): residual {resid:.3e}"
            )));
        }
        let coords = coords_of(n, &mat);
        Ok(Self { n, mat, coords })
    }

    /// Builds an element from basis coordinates.
    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        check_rank(n)?;
        if coords.len() != dim(n) {
            return Err(LabError::Domain(format!(
                "expected {} coordinates, got {}",
                dim(n),
                coords.len()
            )));
        }
        let coords = DVector::from_column_slice(coords);
        let mat = matrix_of(n, &coords);
        Ok(Self { n, mat, coords })
    }

    pub(crate) fn from_coord_vector(n: usize, coords: DVector<f64>) -> Self {
        let mat = matrix_of(n, &coords);
        Self { n, mat, coords }
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::from_coords(n, &vec![0.0; dim(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coord_vector(self.n, &self.coords * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_rank(self, other)?;
        Ok(Self::from_coord_vector(self.n, &self.coords + &other.coords))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_rank(self, other)?;
        Ok(Self::from_coord_vector(self.n, &self.coords - &other.coords))
    }

    /// Trace form `tr(x yᵀ)`.
    pub fn inner(&self, other: &Self) -> f64 {
        // Basis elements are orthogonal with `tr(e eᵀ) = 2`.
        2.0 * self.coords.dot(&other.coords)
    }

    /// Norm induced by the trace form.
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Row-major matrix entries.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..=self.n)
            .map(|i| (0..=self.n).map(|j| self.mat[(i, j)]).collect())
            .collect()
    }
}

fn same_rank(a: &LieElement, b: &LieElement) -> Result<()> {
    if a.n != b.n {
        return Err(LabError::Domain(format!(
            "rank mismatch: {} vs {}",
            a.n, b.n
        )));
    }
    Ok(())
}

/// The structured basis `Y_1..Y_n, Θ_ij`.
pub fn make_basis(n: usize) -> Result<Vec<LieElement>> {
    check_rank(n)?;
    let d = dim(n);
    Ok((0..d)
        .map(|k| {
            let mut c = DVector::zeros(d);
            c[k] = 1.0;
            LieElement::from_coord_vector(n, c)
        })
        .collect())
}

/// `Y_k` for `1 <= k <= n`.
pub fn y_elem(n: usize, k: usize) -> Result<LieElement> {
    check_rank(n)?;
    if k == 0 || k > n {
        return Err(LabError::Domain(format!("Y_{k} undefined for n = {n}")));
    }
    let mut c = vec![0.0; dim(n)];
    c[k - 1] = 1.0;
    LieElement::from_coords(n, &c)
}

/// The sl2-triple spanning so(2,1) inside so(n,1).
pub fn make_sl2_triple(n: usize) -> Result<Sl2Triple> {
    check_rank(n)?;
    let (p, q, r) = (n - 2, n - 1, n);
    let mut u = DMatrix::zeros(n + 1, n + 1);
    u[(p, q)] = 1.0;
    u[(q, p)] = -1.0;
    u[(p, r)] = 1.0;
    u[(r, p)] = 1.0;
    let ubar = {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(p, q)] = -1.0;
        m[(q, p)] = 1.0;
        m[(p, r)] = 1.0;
        m[(r, p)] = 1.0;
        m
    };
    Ok(Sl2Triple {
        u: LieElement::from_matrix(n, u)?,
        h: y_elem(n, n)?,
        ubar: LieElement::from_matrix(n, ubar)?,
    })
}

/// Matrix commutator `ab - ba`.
pub fn bracket(a: &LieElement, b: &LieElement) -> Result<LieElement> {
    same_rank(a, b)?;
    let m = &a.mat * &b.mat - &b.mat * &a.mat;
    let coords = coords_of(a.n, &m);
    Ok(LieElement {
        n: a.n,
        mat: m,
        coords,
    })
}

/// Matrix of `ad(x)` acting on coordinate vectors.
pub fn ad_matrix(x: &LieElement) -> DMatrix<f64> {
    let n = x.n;
    let d = dim(n);
    let mut m = DMatrix::zeros(d, d);
    for (k, e) in make_basis(n).expect("rank checked").iter().enumerate() {
        let col = bracket(x, e).expect("same rank");
        m.set_column(k, col.coords());
    }
    m
}

impl GroupElement {
    /// Builds a group element, checking `J gᵀ J g = I` and `det g = 1`.
    pub fn from_matrix(n: usize, mat: DMatrix<f64>) -> Result<Self> {
        check_rank(n)?;
        if mat.nrows() != n + 1 || mat.ncols() != n + 1 {
            return Err(LabError::Domain("group matrix has wrong shape".into()));
        }
        let g = Self { n, mat };
        let resid = g.membership_residual();
        let scale = g.mat.amax().powi(2).max(1.0);
        if resid > TOL.group * scale {
            return Err(LabError::Domain(format!(
                "matrix is not in SO({n},1): residual {resid:.3e}"
            )));
        }
        Ok(g)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            mat: DMatrix::identity(n + 1, n + 1),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `max(‖J gᵀ J g − I‖_max, |det g − 1|)`.
    pub fn membership_residual(&self) -> f64 {
        let j = j_form(self.n);
        let id = DMatrix::<f64>::identity(self.n + 1, self.n + 1);
        let orth = (&j * self.mat.transpose() * &j * &self.mat - id).amax();
        let det = (self.mat.determinant() - 1.0).abs();
        orth.max(det)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            mat: &self.mat * &other.mat,
        }
    }

    /// `g⁻¹ = J gᵀ J`.
    pub fn inverse(&self) -> Self {
        let j = j_form(self.n);
        Self {
            n: self.n,
            mat: &j * self.mat.transpose() * &j,
        }
    }

    /// Adjoint action `g x g⁻¹`.
    pub fn conjugate(&self, x: &LieElement) -> LieElement {
        let m = &self.mat * x.matrix() * self.inverse().mat;
        let coords = coords_of(self.n, &m);
        LieElement {
            n: self.n,
            mat: m,
            coords,
        }
    }
}

/// Smallest `k <= limit` with `‖a^k‖ < tol`, if any.
pub fn nilpotency_index(a: &DMatrix<f64>, limit: usize, tol: f64) -> Option<usize> {
    let mut p = a.clone();
    for k in 1..=limit {
        if p.amax() < tol {
            return Some(k);
        }
        p = &p * a;
    }
    None
}

fn exp_nilpotent(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = a.nrows();
    let mut out = DMatrix::identity(d, d);
    let mut term = DMatrix::identity(d, d);
    for j in 1..k {
        term = &term * a / j as f64;
        out += &term;
    }
    out
}

const PADE6: [f64; 7] = [
    1.0,
    0.5,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

/// Scaling-and-squaring with a diagonal (6,6) Padé approximant.
pub fn expm_pade(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let x = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(d, d);
    let mut num = id.clone() * PADE6[0];
    let mut den = id.clone() * PADE6[0];
    let mut pw = id;
    for (k, c) in PADE6.iter().enumerate().skip(1) {
        pw = &pw * &x;
        num += &pw * *c;
        den += &pw * (if k % 2 == 0 { *c } else { -*c });
    }
    let mut r = den.lu().solve(&num).expect("Padé denominator is invertible for ‖x‖ <= 0.5");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(t a)`; exact truncated series when `a` is nilpotent.
pub fn exp_group(a: &LieElement, t: f64) -> GroupElement {
    let m = a.matrix() * t;
    let mat = match nilpotency_index(&m, a.n + 2, TOL.nilpotent) {
        Some(k) => exp_nilpotent(&m, k),
        None => expm_pade(&m),
    };
    GroupElement { n: a.n, mat }
}

/// The isogeny SL(2,R) → SO(2,1) ⊂ SO(n,1).
///
/// Uses the Iwasawa factorization `h = k_θ · a^ω · ū^x` and maps each factor
/// along `N₋ ↦ U`, `diag(1/2,-1/2) ↦ Y_n`, `N₊ ↦ Ū`.
pub fn iota_sl2(n: usize, h: &Sl2Matrix) -> Result<GroupElement> {
    check_rank(n)?;
    let det = h.det();
    if (det - 1.0).abs() > TOL.group {
        return Err(LabError::Domain(format!("det h = {det} is not 1")));
    }
    let triple = make_sl2_triple(n)?;
    let r1 = h.a.hypot(h.c);
    let theta = h.c.atan2(h.a);
    let (cs, sn) = (theta.cos(), theta.sin());
    // R = Qᵀ h is upper triangular with positive diagonal.
    let r12 = cs * h.b + sn * h.d;
    let omega = 2.0 * r1.ln();
    let x = r12 / r1;
    let rot = triple.u.sub(&triple.ubar)?;
    let k = exp_group(&rot, theta);
    let a = exp_group(&triple.h, omega);
    let nb = exp_group(&triple.ubar, x);
    Ok(k.mul(&a).mul(&nb))
}
