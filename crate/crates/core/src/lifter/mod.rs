//! Synthetic global models and the inductive lifting of their local images.

pub mod model;
pub mod run;
pub mod trace;

use thiserror::Error;

use crate::groups::GroupsError;
use crate::linalg::LinalgError;
use crate::localdims::LocalDimsError;
use crate::tame::TameError;
use crate::zmod::ZmodError;

pub use model::{generate_model, GeneratorConfig, GlobalModel, ValidatedModel};
pub use run::{run, LiftState, RepairOrder, RunOutput};
pub use trace::{from_jsonl, to_jsonl, verify_chain, TraceRecord, VerifyReport, Violation, ViolationKind};

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("invalid model: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("repair class is null at its own prime {l}")]
    NullRepair { l: u64 },
    #[error("prime {l} is not special after the repair pass at level {level}")]
    NotSpecialAfterRepair { l: u64, level: u32 },
    #[error("forced adjustment at prime {l} is zero")]
    ZeroForcedAdjustment { l: u64 },
    #[error(transparent)]
    Zmod(#[from] ZmodError),
    #[error(transparent)]
    Tame(#[from] TameError),
    #[error(transparent)]
    LocalDims(#[from] LocalDimsError),
    #[error(transparent)]
    Groups(#[from] GroupsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
