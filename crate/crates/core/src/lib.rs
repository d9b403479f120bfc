//! Deterministic 2-D social-navigation simulator with a joint communication
//! and motion planner.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod commplanner;
pub mod dynamics;
pub mod geom;
pub mod harness;
pub mod human;
pub mod safety;
pub mod search;
pub mod tbrrt;
pub mod verify;
pub mod world;
