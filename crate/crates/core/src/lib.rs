//! Trajectory groups as treatments in marginal structural models.
//!
//! The pipeline summarizes binary longitudinal treatment histories into a few
//! latent-class growth trajectories ([`lcga`]) and then estimates the causal
//! effect of those trajectory groups on an outcome with inverse probability
//! weighting, g-computation or pooled longitudinal TMLE ([`msm`]). The
//! history-restricted variant ([`hrmsm`]) repeats the analysis over sliding
//! windows of the follow-up so that time-dependent outcomes can be used.
//!
//! [`sim`] generates data with treatment-confounder feedback and computes
//! the exact counterfactual quantities implied by its data-generating
//! process, which the test suites use as ground truth.

pub mod cli;
pub mod error;
pub mod glm;
pub mod hrmsm;
pub mod lcga;
pub mod linalg;
pub mod msm;
pub mod paneldata;
pub mod sim;
pub mod weights;

pub use error::{Error, Result, Warning};
pub use lcga::{fit_lcga, LcgaConfig, LcgaModel};
pub use paneldata::{Cohort, IntervalSet, Layout, PanelData, Roles};
