//! Link-level Monte Carlo simulator for remote interference between two
//! distant TDD cellular systems coupled through a tropospheric duct.
//!
//! The pipeline per coherence block is: realize the world
//! ([`scenario::build_scenario`]), estimate duct angles from guard-period
//! samples ([`doa`]), design aggressor precoders ([`precoding`]), run the
//! victim pilot phase and LMMSE estimation ([`estimation`]), build receive
//! combiners ([`combining`]) and evaluate achievable rates ([`rates`]).
//! [`engine`] drives trials and sweeps; [`io`] writes the result tables.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod combining;
pub mod config;
pub mod doa;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod io;
pub mod linalg;
pub mod pilots;
pub mod precoding;
pub mod rates;
pub mod rng;
pub mod scenario;

pub use config::SystemConfig;
pub use error::{Error, Result};
