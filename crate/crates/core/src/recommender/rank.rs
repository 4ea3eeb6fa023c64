use alloc::vec::Vec;

/// One ranked journal: its index in the journal table and its score.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankedItem {
    pub journal: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedRecommendations {
    pub items: Vec<RankedItem>,
    pub k: usize,
}

impl RankedRecommendations {
    pub fn journals(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|i| i.journal)
    }
}

/// Top `k` scores, descending; equal scores keep ascending journal order.
pub fn rank_scores(scores: &[f64], k: usize) -> RankedRecommendations {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    RankedRecommendations { items: idx.into_iter().map(|j| RankedItem { journal: j, score: scores[j] }).collect(), k }
}

/// Top-K journals for a probability vector. `k > J` returns all `J`.
pub fn recommend_top_k(probs: &[f64], k: usize) -> RankedRecommendations {
    debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-4 || probs.is_empty(), "probabilities must sum to 1");
    rank_scores(probs, k)
}
