//! Core logic for a CV-parsing microservice stack: framework selection via
//! the analytic hierarchy process, load-test metric aggregation, sentence
//! sectioning, stub entity extraction, section routing and merging, upstream
//! failover state, and timing statistics.
//!
//! Everything in this crate is pure computation over in-memory data. Network
//! servers, process management and file formats live in the companion
//! `cvparse` crate. The crate is `no_std`-compatible (with `alloc`); the
//! `std` feature (default) only forwards to serde.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ahp;
pub mod benchstat;
pub mod ner;
pub mod routing;
pub mod segmenter;
pub mod stats;
pub mod upstream;
