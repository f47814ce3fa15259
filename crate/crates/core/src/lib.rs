//! Numerics for unipotent shearing on `so(n,1)` and for horocycle flows on
//! `SL(2,R)/SL(2,Z)`: Lie algebra bookkeeping, weight decompositions, closeness
//! intervals, effective-gap combinatorics, time-change cocycles and ε-blocks.

pub mod blocks;
pub mod config;
pub mod error;
pub mod intervals;
pub mod lie;
pub mod quotient;
pub mod shear;
pub mod time_change;
pub mod weight;

pub use config::{Tolerances, S_MAX, TOL};
pub use error::{LabError, Result};
pub use intervals::{GoodBadPartition, Interval, IntervalFamily, PartitionViolation};
pub use lie::{GroupElement, LieElement, Sl2Triple};
pub use quotient::{Lattice2, QuotientPoint};
pub use shear::Sl2Matrix;
pub use time_change::TimeChangeFn;
pub use weight::Decomposition;

/// Library version stamped into experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
