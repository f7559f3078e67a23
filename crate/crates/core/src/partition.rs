//! Splitting a realized population into delivery rounds.
//!
//! Round `j` takes `min(remaining[λ], base[λ])` users from every cache `λ`,
//! so no round ever has more users at a cache than that cache has virtual
//! caches. The number of rounds is `max_λ ⌈v_λ / base[λ]⌉`.

use crate::model::CacheLayout;

/// Ordered round vectors whose sum is the original population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    rounds: Vec<Vec<u64>>,
}

impl RoundPlan {
    pub fn rounds(&self) -> &[Vec<u64>] {
        &self.rounds
    }

    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Elementwise sum of all rounds.
    pub fn total(&self, caches: usize) -> Vec<u64> {
        let mut total = vec![0; caches];
        for round in &self.rounds {
            for (acc, v) in total.iter_mut().zip(round) {
                *acc += v;
            }
        }
        total
    }
}

/// Greedy per-cache fill, one round at a time.
///
/// Panics if `population` does not have one entry per cache.
pub fn partition_population(population: &[u64], layout: &CacheLayout) -> RoundPlan {
    assert_eq!(population.len(), layout.caches(), "population length");
    let base = layout.base();
    let mut remaining = population.to_vec();
    let mut rounds = Vec::with_capacity(round_count(population, layout));
    while remaining.iter().any(|&v| v > 0) {
        let round: Vec<u64> = remaining
            .iter_mut()
            .zip(base)
            .map(|(rem, &seats)| {
                let take = (*rem).min(seats);
                *rem -= take;
                take
            })
            .collect();
        rounds.push(round);
    }
    RoundPlan { rounds }
}

/// `max_λ ⌈v_λ / base[λ]⌉`, zero for an empty population.
pub fn round_count(population: &[u64], layout: &CacheLayout) -> usize {
    population
        .iter()
        .zip(layout.base())
        .map(|(&v, &b)| v.div_ceil(b))
        .max()
        .unwrap_or(0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundKind {
    /// Every virtual cache is occupied.
    Full,
    /// At least one cache has fewer users than virtual caches.
    Deficit,
}

/// Classifies a round and returns the caches with unoccupied virtual caches.
pub fn classify_round(round: &[u64], layout: &CacheLayout) -> (RoundKind, Vec<usize>) {
    let deficit: Vec<usize> = round
        .iter()
        .zip(layout.base())
        .enumerate()
        .filter(|(_, (&v, &b))| v < b)
        .map(|(cache, _)| cache)
        .collect();
    let kind = if deficit.is_empty() {
        RoundKind::Full
    } else {
        RoundKind::Deficit
    };
    (kind, deficit)
}
