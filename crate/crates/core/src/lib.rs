//! Water-quality state-space models of drinking-water networks and
//! controllability-driven chlorine booster placement.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod controllability;
pub mod hydraulics;
pub mod matching;
pub mod network;
pub mod placement;
pub mod sparse;
pub mod structural;
pub mod wq;
