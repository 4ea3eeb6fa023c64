//! Journal classification heads, downstream training and Top-K ranking.

mod heads;
mod rank;
mod train;

pub use heads::{forward_p, forward_ps, scope_cosines, ForwardMode, Head, HeadPParams, HeadPSParams};
pub use rank::{rank_scores, recommend_top_k, RankedItem, RankedRecommendations};
pub use train::{train_downstream, HeadConfig, TrainedModel};
