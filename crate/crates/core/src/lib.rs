//! Load-adaptive antenna scaling for a multi-cell massive-MIMO downlink.
//!
//! The pipeline: a wrap-around hexagonal layout yields large-scale coupling
//! coefficients ([`geometry`]), which feed a closed-form rate and power model
//! ([`radio`]). Per-cell user occupancy follows a loss queue with
//! state-dependent service ([`queue`]), and the antenna policy of each cell is
//! a best response to the expected interference of the others
//! ([`optimizer`]). [`runner`] ties the stages together over a daily load
//! profile and compares against an all-antennas-on baseline.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod optimizer;
pub mod queue;
pub mod radio;
pub mod runner;
