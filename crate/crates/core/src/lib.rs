//! Dose design for monotone bilinear positive systems.
//!
//! This crate models controlled dynamics of the form
//!
//! ```text
//! x'(t) = (A + diag(D_u u)) x(t) + B d(t)
//! z(t)  = [Q^(1/2) x(t); R^(1/2) u(t)]
//! ```
//!
//! where `A` is Metzler (nonnegative off-diagonal), `B` is nonnegative,
//! and a constant nonnegative dose `u` acts multiplicatively on the state
//! through the diagonal gain `diag(D_u u)`. The design problem is to pick
//! a constant dose that minimizes the worst-case amplification of
//! persistent disturbances plus a quadratic dose cost,
//!
//! ```text
//! J(u) = sigma_max(-Q^(1/2) (A + diag(D_u u))^(-1) B)^2 + u^T R u,
//! ```
//!
//! exploiting the fact that for internally positive loops the disturbance
//! gain peaks at zero frequency, so a single real matrix captures the
//! worst case over all frequencies.
//!
//! Module map:
//!
//! - [`system`]: the model type, stability certificates, structural
//!   checks (Metzler pattern, strong connectivity), adjoint helpers.
//! - [`models`]: ready-made instances — a one-directional chain with
//!   optional wrap-around coupling, and seeded random positive systems.
//! - [`performance`]: DC gain, the dose objective, its active singular
//!   triplets, worst-case disturbance direction, and a closed-form oracle
//!   for the chain family.
//! - [`optimizer`]: subgradient/gradient descent on the objective with
//!   stability-safeguarded steps, plus a scalar-chain optimality oracle.
//! - [`robust`]: entrywise drift uncertainty and dose under-delivery —
//!   robustified designs, perturbed loops, and sampling checks of the
//!   worst-case property.
//! - [`simulate`]: fixed-step integration, output-power estimation, the
//!   second-order variation experiment, impulse responses with CSV
//!   output.
//! - [`io`]: the JSON system-file schema.
//!
//! All randomized constructions take explicit seeds and are reproducible
//! across runs and platforms.

pub mod error;
pub mod io;
pub mod models;
pub mod optimizer;
pub mod performance;
pub mod robust;
pub mod simulate;
pub mod system;

pub use error::{Error, Result};
pub use models::{make_chain_system, make_random_positive_system, ChainModelParams};
pub use optimizer::{
    quartic_nominal_optimum, solve, subdifferential_element, ModeUsed, SolveMode, SolveOptions,
    SolveResult,
};
pub use performance::{
    chain_instability_threshold, closed_form_chain_objective, dc_gain, dc_peak_check, objective,
    worst_case_disturbance, ObjectiveValue,
};
pub use robust::{
    perturbed_closed_loop, perturbed_objective, robustify, sample_perturbation, solve_robust,
    worst_case_monotonicity_check, MonotonicityReport, PerturbationSample, UncertaintySpec,
};
pub use simulate::{
    default_dt, default_horizon, impulse_response, integrate, positivity_check,
    power_seminorm_estimate, variation_scaling_experiment, ImpulseResponse, SignalSpec,
    SinusoidTerm, Trajectory, VariationScaling,
};
pub use system::{
    hurwitz_certificate, is_strongly_connected, spectral_abscissa, BilinearPositiveSystem,
    ControlInput, StabilityCertificate,
};
