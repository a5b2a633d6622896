//! Search-aware cold-start recommendation engine.
//!
//! The crate is organised around the pipeline it implements:
//!
//! * [`catalog`] normalises vehicle features and derives per-vehicle margins.
//! * [`clustering`] groups vehicles with Ward-initialised k-means and scores each K
//!   by silhouette.
//! * [`clickstream`] holds the session model, cluster recoding, the synthetic
//!   ground-truth generator and status-quo matrix extraction.
//! * [`staterec`] encodes the recommendation state `(t, a, A, R)` and its simplex
//!   lattice discretisation.
//! * [`policy`] estimates the consumer's search/convert/exit policy and scores fits.
//! * [`dpsolver`] solves the seller's finite-horizon Bellman problem and evaluates
//!   arbitrary recommendation policies.
//! * [`counterfactual`] runs the recommendation regimes with bootstrap uncertainty.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled. The
//! `parallel` feature (default) distributes independent work with rayon; results
//! never depend on the number of worker threads.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod catalog;
pub mod clickstream;
pub mod clustering;
pub mod counterfactual;
pub mod dpsolver;
pub mod linalg;
pub(crate) mod par;
pub mod policy;
pub mod rng;
pub mod staterec;

pub use clickstream::{Action, Event, Session, Terminal};
pub use dpsolver::{RecAction, RecPolicy, ValueTable};
pub use policy::{ChoiceModel, ConsumerPolicy, FitReport};
pub use staterec::{FreqVector, RecState, SimplexLattice};

/// Default number of consumer clicks covered by the planning horizon.
pub const DEFAULT_HORIZON: usize = 22;

/// Default simplex lattice granularity for the `A` and `R` state variables.
pub const DEFAULT_GRID: u32 = 4;

/// Number of recommendation slots shown after every click.
pub const REC_SLOTS: usize = 3;
