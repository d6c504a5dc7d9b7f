//! Discrete-event simulation of a fragmented equity market.

pub mod agent;
pub mod analysis;
pub mod calendar;
pub mod config;
pub mod engine;
pub mod error;
pub mod exchange;
pub mod message;
pub mod network;
pub mod observer;
pub mod quotes;
pub mod scenario;
pub mod sip;
pub mod traders;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
