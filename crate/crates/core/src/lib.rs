//! Memristive spiking neural networks with two unsupervised learning
//! mechanisms: STDP driven by a spike response model, and a pulse-area rule
//! that drives devices directly. Both run on feedforward and crossbar
//! topologies; an operation-count cost model compares their hardware
//! footprint.

pub mod coding;
pub mod costmodel;
pub mod device;
pub mod error;
pub mod experiment;
pub mod ops;
pub mod par;
pub mod patterns;
pub mod plasticity;
pub mod report;
pub mod srm;
pub mod topology;

pub use error::{Error, Result};
