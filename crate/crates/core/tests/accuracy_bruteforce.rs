use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simrec_core::eval::accuracy_at_k;
use simrec_core::recommender::rank_scores;

/// Hit if fewer than `k` journals outrank the label, ties going to the lower index.
fn brute(scores: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let mut hits = 0;
    for (row, &label) in scores.iter().zip(labels) {
        let ahead = (0..row.len())
            .filter(|&j| row[j] > row[label] || (row[j] == row[label] && j < label))
            .count();
        if ahead < k {
            hits += 1;
        }
    }
    hits as f64 / scores.len() as f64
}

#[test]
fn matches_brute_force_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let n = rng.random_range(1..20);
        let j = rng.random_range(1..15);
        // coarse values so ties occur
        let scores: Vec<Vec<f64>> =
            (0..n).map(|_| (0..j).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..j)).collect();
        let rankings: Vec<_> = scores.iter().map(|s| rank_scores(s, j)).collect();
        let mut prev = 0.0;
        for k in [1, 3, 5, 10] {
            let got = accuracy_at_k(&rankings, &labels, k).unwrap();
            assert_eq!(got, brute(&scores, &labels, k), "case {case}, k {k}");
            assert!(got >= prev);
            prev = got;
        }
    }
}

#[test]
fn strictly_monotone_transform_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let scores: Vec<Vec<f64>> = (0..50).map(|_| (0..7).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..7)).collect();
    let warped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|v| (3.0 * v).exp() - 1.0).collect()).collect();
    for k in 1..=7 {
        let a: Vec<_> = scores.iter().map(|s| rank_scores(s, 7)).collect();
        let b: Vec<_> = warped.iter().map(|s| rank_scores(s, 7)).collect();
        assert_eq!(accuracy_at_k(&a, &labels, k).unwrap(), accuracy_at_k(&b, &labels, k).unwrap());
    }
}
