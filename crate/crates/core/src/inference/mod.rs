//! Degrees of freedom, treatment effects, and the unknown-modifier extension.

pub mod df;
pub mod hte;
pub mod unknown_z;

pub use df::{bootstrap_df, covariance_df, pilot_lambda_grid, DfEstimate};
pub use hte::{effect_r2, hte_replicate, treatment_effect, HteReplicate};
pub use unknown_z::{fit_unknown_z, LambdaChoice, UnknownZConfig, UnknownZFit};
