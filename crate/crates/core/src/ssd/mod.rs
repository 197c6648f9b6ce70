//! Prior boxes, offset coding, matching and the multi-box loss.

pub mod coding;
pub mod loss;
pub mod matching;
pub mod priors;

pub use coding::{decode_box, encode_box};
pub use loss::{mine_hard_negatives, multibox_loss, LossConfig, LossReport};
pub use matching::{match_priors, MatchResult};
pub use priors::{generate_priors, generate_priors_for, scale_schedule, PriorBox, PriorSet};
