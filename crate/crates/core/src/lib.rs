//! Plant digital twins from labeled point clouds.
//!
//! The crate turns cluster-labeled plant point clouds into an indexed
//! component model ([`twin::DigitalTwin`]), measures leaf phenotypes
//! ([`metrics`]), handles turntable capture pose math ([`capture`]) and plans
//! lift/push inspection motions that maximize the visible leaf area seen by a
//! fixed camera ([`inspect`]), using a kinematic plant simulator ([`sim`]) as
//! the rollout model.

pub mod capture;
pub mod cli;
pub mod detect;
pub mod error;
pub mod geom;
pub mod inspect;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod sim;
pub mod twin;

pub use error::{Error, Result};
