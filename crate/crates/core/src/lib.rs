//! Joint offloading, resource allocation and device association for a
//! UAV that charges IoT devices over RF and computes their offloaded tasks.

pub mod channel;
pub mod energy;
pub mod error;
pub mod gjra;
pub mod model;
pub mod subsolvers;
pub mod verify;

pub use error::{Constraint, Error, Result};
