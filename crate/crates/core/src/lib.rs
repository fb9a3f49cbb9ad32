//! NOMA resource allocation for far-field users sharing near-field ZF beams
//! of an extremely large ULA.
//!
//! Pipeline: [`geometry`] drops users, [`channel`] builds spherical and planar
//! wave channels, [`precoder`] forms ZF beams toward the near users,
//! [`scheduler`] hands those beams out to far users, [`rates`] evaluates an
//! allocation, and [`sca`] / [`exact`] optimize the far-field coefficients.
//! [`sim`] drives Monte Carlo and deterministic experiments.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod precoder;
pub mod rates;
pub mod sca;
pub mod sim;
pub mod scheduler;

pub use error::{Error, Result};
