//! Layered semantic cognition engine for an embodied agent in a simulated
//! household gridworld.
//!
//! Perception binds temporal, spatial and conceptual features into objects,
//! reasoning derives new facts per dimension, cognition merges the three
//! dimension graphs and flags hazards and contradictions, and metacognition
//! watches the whole pipeline and retunes it. A memory-backed decision loop
//! turns tasks into plans and executes them against the world.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod canon;
pub mod cognition;
pub mod config;
pub mod decide;
pub mod kb;
pub mod memory;
pub mod metacog;
pub mod perceive;
pub mod reason;
pub mod rules;
pub mod trace;
pub mod world;
