//! Numerical checks of the structure equations: Monge-Ampere residuals,
//! the inter-sign implicit equation, the double Legendre system and
//! preservation of fractal structure under the transport map.

mod legendre;
mod ma;
mod preservation;

pub use legendre::{legendre_iterate, legendre_system_residual, perturb_target_dual, LegendreReport, LEGENDRE_TOL};
pub use ma::{
    implicit_equation_residual, ma_residual_inter, ma_residual_intra, refinement_ratios, sign_condition, InterResidual,
    ResidualField, DENSITY_FLOOR,
};
pub use preservation::{fractal_preservation_report, LipschitzRatios, PreservationOptions, PreservationReport};
