//! Dynamic graph collaborative filtering.
//!
//! Users and items of a timestamped interaction stream carry embeddings that
//! are updated together at every interaction from three signals: the entity's
//! own history (zero order), its current partner (first order) and the
//! partner's recent neighbors (second order). A time projection of the user
//! predicts the next item, and items are ranked by distance to that
//! prediction.
//!
//! This crate is `no_std` + `alloc`: dense tensors with a reverse-mode tape,
//! Adam, the model kernels, t-batch scheduling, metrics and the training
//! loop. File formats and the command line live in the `dgcf` crate.
#![no_std]

extern crate alloc;

pub mod adam;
pub mod autodiff;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod store;
pub mod tbatch;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
