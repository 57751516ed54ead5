//! Differentiation-integration observers.
//!
//! A differentiation-integration observer is a linear singularly perturbed
//! chain that estimates several running integrals and derivatives of a
//! measured signal at once, with a built-in low-pass characteristic that
//! keeps non-zero-mean measurement noise from accumulating into drift.
//! This crate provides:
//!
//! - [`poly`]: Routh tables, Hurwitz tests, a companion-matrix root oracle,
//!   observer gain sets and eigenvalue-placement gain synthesis;
//! - [`observer`]: the generalized observer as a steppable state machine,
//!   with the explicit presets (differentiator, onefold/double integrator,
//!   differentiation-integration variants) and time-varying perturbation
//!   schedules;
//! - [`freq`]: transfer functions and Bode-style frequency response,
//!   including comparison against the ideal operators s^(j-p);
//! - [`signals`]: reference signals plus deterministic, seeded noise models;
//! - [`ekf`]: a linear kinematic-chain Kalman filter used as the drift
//!   baseline;
//! - [`quadrotor`]: a quadrotor rigid-body simulation with observer banks
//!   and tracking controllers in closed loop;
//! - [`harness`]: scenario runner with CSV/SVG export and metrics;
//! - [`record`]: the labeled time-series container shared by all runs.
//!
//! All numerics are generic over [`scalar::Float`] (`f32` or `f64`); the
//! aliases below pin the common types to `f64`, which is what the harness
//! and CLI use.

pub mod ekf;
pub mod freq;
pub mod harness;
pub mod observer;
pub mod poly;
pub mod quadrotor;
pub mod record;
pub mod scalar;
pub mod signals;

pub use scalar::Float;

/// Scalar type used by the harness and CLI.
pub type Real = f64;

pub type RealPoly = poly::RealPoly<Real>;
pub type RouthTable = poly::RouthTable<Real>;
pub type ObserverGainSet = poly::ObserverGainSet<Real>;
pub type ObserverSpec = observer::ObserverSpec<Real>;
pub type ObserverState = observer::ObserverState<Real>;
pub type EpsSchedule = observer::EpsSchedule<Real>;
pub type RationalTF = freq::RationalTF<Real>;
pub type FrequencyResponse = freq::FrequencyResponse<Real>;
pub type SignalSource = signals::SignalSource<Real>;
pub type NoiseSpec = signals::NoiseSpec<Real>;
pub type KfModel = ekf::KfModel<Real>;
pub type KfState = ekf::KfState<Real>;
pub type QuadParams = quadrotor::QuadParams<Real>;
pub type QuadState = quadrotor::QuadState<Real>;
pub type RunRecord = record::RunRecord<Real>;
