//! Lifelong kernelized bandit optimization.
//!
//! A sequence of bandit tasks shares an unknown kernel that is a sparse uniform
//! average of `p` known base kernels. This crate meta-learns that sparse
//! combination from pooled task data with a group lasso ([`meta_kgl`]), wraps a
//! base bandit solver with forced exploration and kernel handoff ([`lifelong`]),
//! and offers a federated variant in which clients only uplink index votes
//! ([`federated`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the experiment runner live in the `libo-harness` companion crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bandit;
pub mod environment;
pub mod error;
pub mod features;
pub mod federated;
pub mod lifelong;
pub mod linalg;
pub mod meta_kgl;
pub mod rng;

pub use error::{Error, Result};
