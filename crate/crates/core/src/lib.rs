//! Difficulty-based selection of preference data.
//!
//! Each (prompt, chosen, rejected) pair is scored by its DPO implicit reward
//! gap under a policy/reference model pair. Pairs with the smallest gaps are
//! the hardest and are kept first. The crate covers the whole path from a
//! line-delimited dataset to a selected subset:
//!
//! - [`dataset`]: streaming parse and emission of pair files
//! - [`logprob`]: per-token log-probability backends with call accounting
//! - [`gap`]: implicit rewards, gap records, caching and the loss-side scalars
//! - [`selector`]: ranking, ratio/threshold selection and baselines
//! - [`analytics`]: overlap, length, sweep and histogram reports
//! - [`pipeline`]: file-level score/select/stats steps used by the CLI

pub mod analytics;
pub mod dataset;
pub mod error;
pub mod gap;
pub mod logprob;
pub mod pipeline;
pub mod selector;
pub mod synthetic;

pub use dataset::{DatasetManifest, PreferencePair};
pub use error::{Error, ErrorKind, Result};
pub use gap::{GapCache, RewardGapRecord};
pub use logprob::{BackendSpec, ModelRole, Scorer, Side, TokenLogProbs};
pub use selector::{Mode, SelectionConfig, SelectionResult, Variant};
