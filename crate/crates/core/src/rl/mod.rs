//! Masked actor-critic training.

pub mod buffer;
pub mod checkpoint;
pub mod gae;
pub mod net;
pub mod ppo;
pub mod train;

pub use buffer::RolloutBuffer;
pub use gae::compute_gae;
pub use net::{NetSpec, PolicyNet};
pub use ppo::{ppo_update, PpoConfig, UpdateStats};
pub use train::{train, MetricsRow, TrainConfig, TrainReport};
