//! Stability certification for inverter-based power networks.
//!
//! Each bus of a power network is a frequency-response model (swing dynamics
//! plus an inverter control law, possibly behind a measurement delay). The
//! central result implemented here is a *decentralized* stability test: a
//! bus that passes a strict-positive-realness check against a shared filter
//! at budget `gamma` may connect to any network that keeps its aggregate
//! line susceptance below `1 / gamma`, and a network in which every bus
//! passes is stable as a whole — no global model required.
//!
//! The crate provides:
//!
//! - rational transfer functions, frequency grids, and positive-realness
//!   checks ([`tf`], [`cert`]);
//! - bus models with droop, virtual-inertia, and dynamic-droop controllers,
//!   including delay-aware internal stability scans ([`bus`]);
//! - the per-bus certificate, the plug-and-play admission rule, and a
//!   closed-form first-order design shortcut ([`cert`]);
//! - network assembly, a spectral oracle for the delay-free case, and a
//!   frequency-domain loop scan that remains valid under delays
//!   ([`network`]);
//! - a delay-aware time-domain simulator for empirical cross-checks
//!   ([`sim`]).
//!
//! # Example
//!
//! Certify a bus and admit it against a susceptance budget:
//!
//! ```
//! use gridcert_core::{admit, certify_bus, min_gamma, BusModel, Controller,
//!                     FrequencyGrid, HFilter, DEFAULT_GAMMA_TOL};
//!
//! let grid = FrequencyGrid::default_grid();
//! let h = HFilter::canonical(30.0).unwrap();
//! let bus = BusModel::new(1.0, 0.1, 0.0, Controller::Droop { k: 1.0 }).unwrap();
//!
//! let gamma = min_gamma(&h, &bus, &grid, DEFAULT_GAMMA_TOL).unwrap();
//! let margin = certify_bus(&h, &bus, gamma, &grid).unwrap();
//! assert!(margin.passes());
//! // The bus may join any network whose lines at this bus sum below 1/gamma.
//! assert!(admit(gamma, 0.9 / gamma));
//! ```

pub mod bus;
pub mod cert;
pub mod error;
pub mod network;
pub mod sim;
pub mod tf;

mod winding;

pub use bus::{BusModel, BusStability, Controller};
pub use cert::{
    admit, certify_bus, choose_h, envelope_check, first_order_protocol, is_pr, is_spr, min_gamma,
    min_gamma_first_order, Certificate, EnvelopeReport, FirstOrderDesign, HFilter, SprMargin,
    DEFAULT_GAMMA_TOL, DEFAULT_SPR_SHIFT, GAMMA_CAP, GAMMA_FLOOR,
};
pub use error::{Error, Result};
pub use network::{
    assemble_state_space, diag_susceptance, laplacian, nyquist_global_check,
    protocol_certify_network, spectral_stability, GlobalVerdict, LaplacianMatrix, Line,
    NetworkModel, ProtocolReport, SpectralVerdict, StateSpaceModel, StateVar, SPECTRAL_TOL,
};
pub use sim::{
    detect_stability, frequency_metrics, simulate, FrequencyMetrics, SimConfig, SimVerdict,
    Trajectory, DEFAULT_DERIVATIVE_FILTER_ETA, MIN_SAMPLES, OVERFLOW_CAP,
};
pub use tf::{FrequencyGrid, Polynomial, RationalTF};

pub use num_complex::Complex64;
