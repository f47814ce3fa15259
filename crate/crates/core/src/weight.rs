//! sl2 weight decomposition of so(n,1) under the adjoint action of the triple.
//!
//! Every string `v_0..v_ς` satisfies `ad(U) v_i = (i+1) v_{i+1}` and
//! `ad(Y_n) v_i = ((ς−2i)/2) v_i`. The top vectors `v_ς` are orthonormal
//! in the trace form and span the centralizer of `U`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::TOL;
use crate::error::{LabError, Result};
use crate::lie::{ad_matrix, bracket, dim, LieElement, Sl2Triple};
use crate::shear::{binom, bisect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleTag {
    Sl2,
    Vperp,
}

/// One irreducible summand with basis `v_0..v_ς`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModule {
    pub highest_weight: usize,
    pub basis: Vec<LieElement>,
    pub tag: ModuleTag,
}

impl WeightModule {
    pub fn dim(&self) -> usize {
        self.highest_weight + 1
    }

    /// The top vector `v_ς`, fixed by `ad(U)`.
    pub fn top(&self) -> &LieElement {
        &self.basis[self.highest_weight]
    }
}

/// `C_𝔤(U) = RU ⊕ 𝔨 ⊕ 𝔫`.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizerSplit {
    pub u_axis: LieElement,
    pub k_part: Vec<LieElement>,
    pub n_part: Vec<LieElement>,
}

impl CentralizerSplit {
    pub fn dim(&self) -> usize {
        1 + self.k_part.len() + self.n_part.len()
    }
}

/// Full decomposition with the change of basis to weight coordinates.
#[derive(Debug, Clone)]
pub struct Decomposition {
    n: usize,
    triple: Sl2Triple,
    modules: Vec<WeightModule>,
    /// Columns are all module vectors, module by module.
    from_weight: DMatrix<f64>,
    to_weight: DMatrix<f64>,
}

/// Orthonormal kernel basis (columns) of `m`, singular values below `tol` counted as zero.
fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    // Pad to a square system so the SVD returns a full right basis.
    let mut sq = DMatrix::zeros(m.nrows().max(ncols), ncols);
    sq.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s < tol)
        .map(|(k, _)| vt.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(ncols, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Minimum-norm solution of `m x = rhs` with small singular values dropped.
fn min_norm_solve(m: &DMatrix<f64>, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let svd = m.clone().svd(true, true);
    let x = svd
        .solve(rhs, tol)
        .map_err(|e| LabError::Grading(e.to_string()))?;
    let resid = (m * &x - rhs).amax();
    if resid > TOL.weight {
        return Err(LabError::Grading(format!(
            "string completion residual {resid:.3e}"
        )));
    }
    Ok(x)
}

// Coordinates carry the trace form up to the factor 2.
fn trace_norm(v: &DVector<f64>) -> f64 {
    (2.0 * v.dot(v)).sqrt()
}

/// Splits so(n,1) into sl2-irreducibles: the triple's own module first,
/// then ς=2 complements, then ς=0 complements.
pub fn decompose(n: usize, triple: &Sl2Triple) -> Result<Decomposition> {
    let d = dim(n);
    let ad_y = ad_matrix(&triple.h);
    let ad_u = ad_matrix(&triple.u);
    let id = DMatrix::<f64>::identity(d, d);

    let k_minus = null_space(&stack(&(&ad_y + &id), &ad_u), TOL.kernel);
    let k_zero = null_space(&stack(&ad_y, &ad_u), TOL.kernel);
    let k_plus = null_space(&stack(&(&ad_y - &id), &ad_u), TOL.kernel);
    if k_plus.ncols() != 0 || 3 * k_minus.ncols() + k_zero.ncols() != d {
        let resid = (&ad_u * &ad_y - &ad_y * &ad_u + &ad_u).amax();
        return Err(LabError::Grading(format!(
            "kernel dimensions ({}, {}, {}) do not fill dimension {d}; [ad Y, ad U] + ad U residual {resid:.3e}",
            k_minus.ncols(),
            k_zero.ncols(),
            k_plus.ncols()
        )));
    }

    // Top vectors of weight −1, starting from U itself.
    let mut tops: Vec<DVector<f64>> = Vec::new();
    let u_coords = triple.u.coords().clone();
    let mut candidates = vec![u_coords];
    candidates.extend(k_minus.column_iter().map(|c| c.into_owned()));
    for mut v in candidates {
        for t in &tops {
            let proj = v.dot(t) / t.dot(t);
            v -= t * proj;
        }
        let nv = trace_norm(&v);
        if nv > 1e-8 {
            tops.push(v / nv);
        }
        if tops.len() == k_minus.ncols() {
            break;
        }
    }

    let mut modules = Vec::new();
    for (k, top) in tops.iter().enumerate() {
        let v1 = min_norm_solve(&ad_u, &(top * 2.0), TOL.kernel)?;
        let v0 = min_norm_solve(&ad_u, &v1, TOL.kernel)?;
        modules.push(WeightModule {
            highest_weight: 2,
            basis: vec![
                LieElement::from_coord_vector(n, v0),
                LieElement::from_coord_vector(n, v1),
                LieElement::from_coord_vector(n, top.clone()),
            ],
            tag: if k == 0 {
                ModuleTag::Sl2
            } else {
                ModuleTag::Vperp
            },
        });
    }
    for col in k_zero.column_iter() {
        let v = col.into_owned();
        let v = &v / trace_norm(&v);
        modules.push(WeightModule {
            highest_weight: 0,
            basis: vec![LieElement::from_coord_vector(n, v)],
            tag: ModuleTag::Vperp,
        });
    }

    let cols: Vec<DVector<f64>> = modules
        .iter()
        .flat_map(|m| m.basis.iter().map(|b| b.coords().clone()))
        .collect();
    let from_weight = DMatrix::from_columns(&cols);
    let to_weight = from_weight
        .clone()
        .try_inverse()
        .ok_or_else(|| LabError::Grading("weight basis is singular".into()))?;

    let dec = Decomposition {
        n,
        triple: triple.clone(),
        modules,
        from_weight,
        to_weight,
    };
    dec.check_relations()?;
    Ok(dec)
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn triple(&self) -> &Sl2Triple {
        &self.triple
    }

    pub fn modules(&self) -> &[WeightModule] {
        &self.modules
    }

    /// Largest residual of the string relations over all modules.
    pub fn relation_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in &self.modules {
            let sig = m.highest_weight;
            for (i, v) in m.basis.iter().enumerate() {
                let uv = bracket(&self.triple.u, v).expect("same rank");
                let target = if i < sig {
                    m.basis[i + 1].scale((i + 1) as f64)
                } else {
                    v.scale(0.0)
                };
                worst = worst.max((uv.coords() - target.coords()).amax());
                let hv = bracket(&self.triple.h, v).expect("same rank");
                let w = (sig as f64 - 2.0 * i as f64) / 2.0;
                worst = worst.max((hv.coords() - v.coords() * w).amax());
            }
        }
        worst
    }

    fn check_relations(&self) -> Result<()> {
        let r = self.relation_residual();
        if r > TOL.weight {
            return Err(LabError::Grading(format!("string relation residual {r:.3e}")));
        }
        Ok(())
    }

    /// Coefficients of `x` on every module basis.
    pub fn weight_coords(&self, x: &LieElement) -> Vec<Vec<f64>> {
        let w = &self.to_weight * x.coords();
        let mut out = Vec::with_capacity(self.modules.len());
        let mut k = 0;
        for m in &self.modules {
            out.push(w.rows(k, m.dim()).iter().copied().collect());
            k += m.dim();
        }
        out
    }

    /// Inverse of [`Decomposition::weight_coords`].
    pub fn from_weight_coords(&self, b: &[Vec<f64>]) -> Result<LieElement> {
        if b.len() != self.modules.len()
            || b.iter().zip(&self.modules).any(|(v, m)| v.len() != m.dim())
        {
            return Err(LabError::Domain("weight coordinates have the wrong shape".into()));
        }
        let flat = DVector::from_iterator(dim(self.n), b.iter().flatten().copied());
        Ok(LieElement::from_coord_vector(self.n, &self.from_weight * flat))
    }

    /// `π_{C(U)}`: keep the `v_ς` coefficient of every module.
    pub fn project_centralizer(&self, x: &LieElement) -> LieElement {
        let mut b = self.weight_coords(x);
        for v in b.iter_mut() {
            let last = v.len() - 1;
            for c in v[..last].iter_mut() {
                *c = 0.0;
            }
        }
        self.from_weight_coords(&b).expect("shape preserved")
    }

    /// Top coefficients `p_j(L)` of `π Ad(exp LU) v`, one per module.
    pub fn top_coefficients(&self, v: &LieElement, l: f64) -> Vec<f64> {
        self.weight_coords(v)
            .iter()
            .map(|b| *adjoint_u(l, b).last().expect("nonempty string"))
            .collect()
    }

    /// `q(L) = π_{C(U)} Ad(exp LU) v`, and `q'` with ς=0 modules dropped.
    pub fn fastest_motion(&self, v: &LieElement, l: f64) -> FastestMotion {
        let p = self.top_coefficients(v, l);
        let mut full = Vec::with_capacity(self.modules.len());
        let mut prime = Vec::with_capacity(self.modules.len());
        for (m, pj) in self.modules.iter().zip(&p) {
            let mut b = vec![0.0; m.dim()];
            b[m.highest_weight] = *pj;
            full.push(b.clone());
            if m.highest_weight == 0 {
                b[0] = 0.0;
            }
            prime.push(b);
        }
        FastestMotion {
            q: self.from_weight_coords(&full).expect("shape preserved"),
            q_prime: self.from_weight_coords(&prime).expect("shape preserved"),
        }
    }

    /// `‖q(L)‖`; top vectors are orthonormal so this is `sqrt(Σ p_j²)`.
    pub fn motion_norm(&self, v: &LieElement, l: f64) -> f64 {
        self.top_coefficients(v, l)
            .iter()
            .map(|p| p * p)
            .sum::<f64>()
            .sqrt()
    }

    /// First `t >= 0` with `‖q(t)‖ = λ`.
    pub fn first_time_norm(&self, v: &LieElement, lambda: f64) -> Result<f64> {
        // Round-off on lower weights would be amplified by t^ς over the horizon.
        let mut b = self.weight_coords(v);
        let scale = b.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for x in b.iter_mut().flatten() {
            if x.abs() < 1e-12 * scale {
                *x = 0.0;
            }
        }
        let f = |t: f64| {
            b.iter()
                .map(|s| adjoint_u(t, s).last().expect("nonempty string").powi(2))
                .sum::<f64>()
                .sqrt()
                - lambda
        };
        let f0 = f(0.0);
        if f0 == 0.0 {
            return Ok(0.0);
        }
        let grid = 1500;
        let (lo, hi) = (-6.0f64, 9.0f64);
        let mut prev = (0.0, f0);
        for k in 0..=grid {
            let t = 10f64.powf(lo + (hi - lo) * k as f64 / grid as f64);
            let ft = f(t);
            if ft == 0.0 {
                return Ok(t);
            }
            if (ft > 0.0) != (prev.1 > 0.0) {
                return Ok(bisect(&f, prev.0, t));
            }
            prev = (t, ft);
        }
        Err(LabError::NoCrossing(format!(
            "‖q(t)‖ never reaches {lambda} on [0, 1e9]"
        )))
    }

    /// `C(U) = RU ⊕ 𝔨 ⊕ 𝔫` read off the module tops.
    pub fn centralizer_split(&self) -> CentralizerSplit {
        let mut u_axis = None;
        let mut k_part = Vec::new();
        let mut n_part = Vec::new();
        for m in &self.modules {
            match (m.tag, m.highest_weight) {
                (ModuleTag::Sl2, _) => u_axis = Some(m.top().clone()),
                (_, 0) => k_part.push(m.top().clone()),
                _ => n_part.push(m.top().clone()),
            }
        }
        CentralizerSplit {
            u_axis: u_axis.expect("sl2 module is always present"),
            k_part,
            n_part,
        }
    }
}

/// Output of [`Decomposition::fastest_motion`].
#[derive(Debug, Clone, PartialEq)]
pub struct FastestMotion {
    pub q: LieElement,
    pub q_prime: LieElement,
}

/// `c_j = Σ_{i<=j} b_i C(j,i) t^{j−i}`, the action of `Ad(exp tU)` on a string.
pub fn adjoint_u(t: f64, b: &[f64]) -> Vec<f64> {
    (0..b.len())
        .map(|j| {
            (0..=j)
                .map(|i| b[i] * binom(j, i) * t.powi((j - i) as i32))
                .sum()
        })
        .collect()
}

/// `c_j = b_j e^{(ς−2j)ω/2}`, the action of `Ad(exp ωY_n)` on a string.
pub fn adjoint_a(omega: f64, b: &[f64]) -> Result<Vec<f64>> {
    let sig = b.len().saturating_sub(1) as f64;
    if omega.abs() * sig / 2.0 > 700.0 {
        return Err(LabError::Range(format!(
            "exponent {} overflows",
            omega.abs() * sig / 2.0
        )));
    }
    Ok(b.iter()
        .enumerate()
        .map(|(j, bj)| bj * ((sig - 2.0 * j as f64) * omega / 2.0).exp())
        .collect())
}
