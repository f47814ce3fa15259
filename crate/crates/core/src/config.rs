//! Numerical tolerances shared by the whole crate.

use serde::{Deserialize, Serialize};

/// Every tolerance the library checks against lives here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Entrywise tolerance for Lie-algebra identities (brackets, membership).
    pub algebra: f64,
    /// Group membership (`J gᵀ J g = I`, `det g = 1`).
    pub group: f64,
    /// Weight-module relations `ad(U)v_i = (i+1)v_{i+1}` and grading.
    pub weight: f64,
    /// Singular values below this count as zero in kernel computations.
    pub kernel: f64,
    /// `‖a^k‖` below this marks `a` as nilpotent of index `k`.
    pub nilpotent: f64,
    /// Determinant tolerance for 2×2 unimodular input.
    pub unimodular: f64,
    /// Absolute endpoint tolerance for interval solvers.
    pub endpoint: f64,
    /// Integer-ness tolerance for lattice witnesses.
    pub integral: f64,
    /// Fundamental-domain boundary slack.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            algebra: 1e-12,
            group: 1e-10,
            weight: 1e-9,
            kernel: 1e-10,
            nilpotent: 1e-14,
            unimodular: 1e-8,
            endpoint: 1e-6,
            integral: 1e-6,
            boundary: 1e-9,
        }
    }
}

pub const TOL: Tolerances = Tolerances {
    algebra: 1e-12,
    group: 1e-10,
    weight: 1e-9,
    kernel: 1e-10,
    nilpotent: 1e-14,
    unimodular: 1e-8,
    endpoint: 1e-6,
    integral: 1e-6,
    boundary: 1e-9,
};

/// Default horizon for interval solvers.
pub const S_MAX: f64 = 1e6;
