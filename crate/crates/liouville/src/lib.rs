//! Numerical toolkit for singular Liouville systems on the flat unit torus:
//! the Lambda coercivity criterion, the Moser-Trudinger energy functional
//! and its minimization, and the blow-up / concentration diagnostics.

pub mod blowup;
pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod lambda;
pub mod minimize;
pub mod model;
pub mod spectral;

pub use blowup::{
    detect_blowup_set, estimate_sigma, phi_asymptotics_check, phi_component, pohozaev_check,
    synthetic_bubble, u_lambda_family, ConcentrationReport, PhiAsymptotics, SlopeEstimate,
};
pub use energy::{el_residual, evaluate_j, l2_gradient, normalize_v, EnergyReport, SystemField};
pub use error::{Error, Result};
pub use grid::{torus_distance, Point, ScalarField, TorusGrid};
pub use lambda::{
    classify_region_sweep, epsilon_lambda, lambda_min, lambda_subset_at, rho_critical,
    ArgminPoint, Classification, LambdaReport, RhoVector,
};
pub use minimize::{
    continuation, minimize, residual_norm, InitialGuess, MinimizeResult, SolverOptions,
    Termination,
};
pub use model::{CouplingMatrix, SingularModel, SingularSource};
