//! Oracles and generated-case checks shared by several test targets.
#![allow(dead_code)]

pub mod metrics;
pub mod pairing;
pub mod props;
