//! Bounds on `||XX^T - E XX^T||` for Gaussian matrices with a variance
//! profile, with an exact moment engine and a seeded simulator to test them.

pub mod bounds;
pub mod error;
pub mod montecarlo;
pub mod numeric;
pub mod oracle;
pub mod params;
pub mod profile;
pub mod shapes;
pub mod verify;

pub use bounds::{BoundConfig, BoundKind, BoundReport, Case, LogMode};
pub use error::{Error, Result};
pub use montecarlo::{MomentEstimate, NormMethod, SimConfig, Target};
pub use numeric::MomentValue;
pub use oracle::{ExactMoment, MomentKind};
pub use params::{compute_params, compute_schatten_params, ProfileParams, SchattenParams};
pub use profile::{generate, load_profile, Entry, Exactness, ProfileFamily, ProfileFormat, VarianceProfile};
pub use shapes::{Shape, ShapeGraph};
