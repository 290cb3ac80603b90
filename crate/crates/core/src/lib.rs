//! Pseudospectral laboratory for the radius of analyticity of solutions to
//! semilinear symmetric hyperbolic systems and magnetic Schrodinger equations.

pub mod analytic;
pub mod bounds;
pub mod evolution;
pub mod expr;
pub mod oracles;
pub mod spectral;
pub mod system;

pub use analytic::{analytic_profile, energy_term, radius_from_spectrum, AnalyticProfile, FitOptions, RadiusEstimate, RadiusMethod};
pub use expr::{parse_expr, Expr};
pub use spectral::{PeriodicGrid, SpectralField};
pub use system::{SystemSpec, ValidationReport};
