//! Bayesian inference engine for hierarchical ODE-based pharmacometric models.
//!
//! The pipeline: a block-structured model source (`.pmodel`) is parsed ([`dsl`]),
//! compiled to a differentiable log-joint over an unconstrained parameter space
//! ([`model`], [`dist`]), sampled with a multinomial No-U-Turn sampler ([`nuts`]),
//! and post-processed with convergence diagnostics ([`diagnostics`]), posterior
//! queries and simulations ([`posterior`]), and crossvalidation-based model
//! comparison ([`cv`]). Dynamics are integrated with an adaptive Dormand-Prince
//! solver ([`ode`]) that is generic over the scalar type so forward-mode dual
//! numbers ([`autodiff`]) flow through the whole evaluation.

pub mod autodiff;
pub mod cli;
pub mod corpus;
pub mod cv;
pub mod diagnostics;
pub mod dist;
pub mod dsl;
pub mod linalg;
pub mod model;
pub mod nuts;
pub mod ode;
pub mod posterior;
