//! Network configuration, expected/base population structure and user
//! populations.
//!
//! A [`SystemConfig`] fixes the number of users `K`, files `N`, caches `Λ`,
//! the normalized cumulative cache budget `t` and the population intensities
//! `p`. From it, [`CacheLayout`] derives the expected population `K·p`, its GCD
//! `α`, the base vector `K·p/α` and the virtual caches: cache `λ` owns a
//! contiguous block of `base[λ]` virtual caches, in cache order.
//!
//! Cache, virtual-cache, user and file indices are 0-based in the API and
//! printed 1-based.

use std::ops::Range;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemConfig {
    users: u64,
    files: u64,
    budget: usize,
    intensities: Vec<Rational>,
}

impl SystemConfig {
    /// Validates raw parameters. `caches` must equal `intensities.len()`.
    pub fn new(
        users: u64,
        files: u64,
        caches: usize,
        budget: usize,
        intensities: Vec<Rational>,
    ) -> Result<Self> {
        if users == 0 {
            return Err(Error::InvalidParameter {
                field: "K",
                reason: "need at least one user".into(),
            });
        }
        if files == 0 {
            return Err(Error::InvalidParameter {
                field: "N",
                reason: "need at least one file".into(),
            });
        }
        if caches != intensities.len() {
            return Err(Error::BadIntensities(format!(
                "{} intensities given for {caches} caches",
                intensities.len()
            )));
        }
        if caches == 0 {
            return Err(Error::BadIntensities("no caches".into()));
        }
        if let Some(pos) = intensities.iter().position(|p| !p.is_positive()) {
            return Err(Error::BadIntensities(format!(
                "p[{}] = {} is not positive",
                pos + 1,
                exact::format_fraction(&intensities[pos])
            )));
        }
        let total: Rational = intensities.iter().sum();
        if !total.is_one() {
            return Err(Error::BadIntensities(format!(
                "intensities sum to {}, not 1",
                exact::format_fraction(&total)
            )));
        }
        if let Some(pos) = intensities.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::BadIntensities(format!(
                "intensities must be non-increasing, but p[{}] < p[{}]",
                pos + 1,
                pos + 2
            )));
        }
        if budget == 0 || budget >= caches {
            return Err(Error::BadBudget { budget, caches });
        }
        let k = Rational::from_integer(BigInt::from(users));
        for (cache, p) in intensities.iter().enumerate() {
            let load = &k * p;
            if !load.is_integer() {
                return Err(Error::NonIntegerExpectedLoad {
                    cache: cache + 1,
                    load: exact::format_significant(&load, 12),
                });
            }
        }
        Ok(SystemConfig {
            users,
            files,
            budget,
            intensities,
        })
    }

    /// Parses intensities written as `"num/den"` or exact decimals.
    pub fn from_strs(users: u64, files: u64, budget: usize, intensities: &[&str]) -> Result<Self> {
        let parsed = intensities
            .iter()
            .enumerate()
            .map(|(i, s)| {
                exact::parse_rational(s).ok_or_else(|| {
                    Error::BadIntensities(format!("p[{}] = {s:?} is not a rational", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(users, files, parsed.len(), budget, parsed)
    }

    /// Configuration whose intensities are `expected / K` with `K = Σ expected`.
    pub fn from_expected(files: u64, budget: usize, expected: &[u64]) -> Result<Self> {
        let users: u64 = expected.iter().sum();
        let p = expected
            .iter()
            .map(|&v| Rational::new(BigInt::from(v), BigInt::from(users.max(1))))
            .collect::<Vec<_>>();
        Self::new(users, files, expected.len(), budget, p)
    }

    pub fn with_budget(&self, budget: usize) -> Result<Self> {
        Self::new(
            self.users,
            self.files,
            self.caches(),
            budget,
            self.intensities.clone(),
        )
    }

    pub fn users(&self) -> u64 {
        self.users
    }

    pub fn files(&self) -> u64 {
        self.files
    }

    pub fn caches(&self) -> usize {
        self.intensities.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn intensities(&self) -> &[Rational] {
        &self.intensities
    }

    /// `K·p`, integral by construction.
    pub fn expected_population(&self) -> Vec<u64> {
        let k = Rational::from_integer(BigInt::from(self.users));
        self.intensities
            .iter()
            .map(|p| {
                (&k * p)
                    .to_integer()
                    .to_u64()
                    .expect("validated integral load")
            })
            .collect()
    }

    pub fn layout(&self) -> CacheLayout {
        CacheLayout::from_expected(&self.expected_population())
            .expect("validated config has positive loads")
    }
}

/// Expected and base population vectors with the virtual-cache map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheLayout {
    expected: Vec<u64>,
    alpha: u64,
    base: Vec<u64>,
    offsets: Vec<usize>,
    owner_of: Vec<usize>,
}

impl CacheLayout {
    /// Builds the layout for an expected population vector.
    ///
    /// Entries must be positive; they need not be sorted, but the virtual
    /// cache numbering follows the given cache order.
    pub fn from_expected(expected: &[u64]) -> Result<Self> {
        if expected.is_empty() {
            return Err(Error::InvalidParameter {
                field: "expected population",
                reason: "no caches".into(),
            });
        }
        if let Some(pos) = expected.iter().position(|&v| v == 0) {
            return Err(Error::InvalidParameter {
                field: "expected population",
                reason: format!("cache {} has zero expected load", pos + 1),
            });
        }
        let alpha = exact::gcd_all(expected);
        let base: Vec<u64> = expected.iter().map(|&v| v / alpha).collect();
        let mut offsets = Vec::with_capacity(base.len() + 1);
        let mut owner_of = Vec::new();
        offsets.push(0);
        for (cache, &b) in base.iter().enumerate() {
            owner_of.extend(std::iter::repeat_n(cache, b as usize));
            offsets.push(owner_of.len());
        }
        Ok(CacheLayout {
            expected: expected.to_vec(),
            alpha,
            base,
            offsets,
            owner_of,
        })
    }

    pub fn caches(&self) -> usize {
        self.expected.len()
    }

    pub fn expected(&self) -> &[u64] {
        &self.expected
    }

    /// GCD of the expected population.
    pub fn alpha(&self) -> u64 {
        self.alpha
    }

    pub fn base(&self) -> &[u64] {
        &self.base
    }

    /// Total number of virtual caches, `Σ base`.
    pub fn virtual_count(&self) -> usize {
        self.owner_of.len()
    }

    /// Physical cache owning virtual cache `v`.
    pub fn owner_of(&self, virtual_cache: usize) -> usize {
        self.owner_of[virtual_cache]
    }

    /// Virtual caches of physical cache `cache`, as a contiguous range.
    pub fn virtual_range(&self, cache: usize) -> Range<usize> {
        self.offsets[cache]..self.offsets[cache + 1]
    }

    pub(crate) fn check_population(&self, population: &[u64]) -> Result<()> {
        if population.len() != self.caches() {
            return Err(Error::PopulationMismatch {
                population: population.to_vec(),
                reason: format!("expected {} entries", self.caches()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandMode {
    /// Every user requests a different file (user `k` requests file `k`).
    WorstCase,
    /// Requests drawn independently and uniformly from the library.
    Random,
}

/// A realized population vector and the demand of every user.
///
/// Users are numbered cache by cache: the first `population[0]` users sit at
/// cache 0, the next `population[1]` at cache 1, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationInstance {
    population: Vec<u64>,
    demands: Vec<usize>,
}

impl PopulationInstance {
    pub fn new(population: Vec<u64>, demands: Vec<usize>) -> Result<Self> {
        let users: u64 = population.iter().sum();
        if demands.len() as u64 != users {
            return Err(Error::PopulationMismatch {
                population,
                reason: format!("{} demands for {users} users", demands.len()),
            });
        }
        Ok(PopulationInstance {
            population,
            demands,
        })
    }

    /// Worst-case instance: user `k` requests file `k`.
    pub fn worst_case(population: Vec<u64>) -> Self {
        let users: u64 = population.iter().sum();
        let demands = (0..users as usize).collect();
        PopulationInstance {
            population,
            demands,
        }
    }

    pub fn population(&self) -> &[u64] {
        &self.population
    }

    pub fn demands(&self) -> &[usize] {
        &self.demands
    }

    pub fn users(&self) -> usize {
        self.demands.len()
    }

    /// Users associated with each cache, in user order.
    pub fn users_by_cache(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.population
            .iter()
            .map(|&v| {
                let range = start..start + v as usize;
                start = range.end;
                range
            })
            .collect()
    }

    pub fn cache_of(&self, user: usize) -> usize {
        self.users_by_cache()
            .iter()
            .position(|r| r.contains(&user))
            .expect("user index out of range")
    }
}

/// Draws a population vector as `K` independent categorical draws over `p`,
/// then the demands. Deterministic for a fixed seed.
pub fn sample_population(
    cfg: &SystemConfig,
    seed: u64,
    mode: DemandMode,
) -> Result<PopulationInstance> {
    if mode == DemandMode::WorstCase && cfg.files() < cfg.users() {
        return Err(Error::WorstCaseNeedsEnoughFiles {
            users: cfg.users(),
            files: cfg.files(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = PopulationSampler::new(cfg);
    let population = sampler.draw(&mut rng);
    let demands = match mode {
        DemandMode::WorstCase => (0..cfg.users() as usize).collect(),
        DemandMode::Random => (0..cfg.users())
            .map(|_| rng.random_range(0..cfg.files()) as usize)
            .collect(),
    };
    Ok(PopulationInstance {
        population,
        demands,
    })
}

/// Multinomial sampler over a validated configuration.
///
/// Since `p_λ = K·p_λ / K` with integral numerators, one categorical draw is a
/// uniform integer in `[0, K)` mapped through the cumulative expected loads,
/// which is exact.
#[derive(Debug, Clone)]
pub struct PopulationSampler {
    users: u64,
    cumulative: Vec<u64>,
}

impl PopulationSampler {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self::from_expected(&cfg.expected_population())
    }

    /// Sampler with `p = expected / Σ expected`.
    pub fn from_expected(expected: &[u64]) -> Self {
        let cumulative: Vec<u64> = expected
            .iter()
            .scan(0u64, |acc, &v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        PopulationSampler {
            users: cumulative.last().copied().unwrap_or(0),
            cumulative,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut population = vec![0u64; self.cumulative.len()];
        for _ in 0..self.users {
            population[self.categorical(rng)] += 1;
        }
        population
    }

    fn categorical<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random_range(0..self.users);
        self.cumulative.partition_point(|&c| c <= u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> SystemConfig {
        SystemConfig::from_strs(10, 10, 2, &["0.4", "0.2", "0.2", "0.2"]).unwrap()
    }

    #[test]
    fn validates_worked_example() {
        let cfg = example();
        assert_eq!(cfg.expected_population(), vec![4, 2, 2, 2]);
        assert_eq!(cfg.caches(), 4);
    }

    #[test]
    fn rejects_fractional_expected_load() {
        let err = SystemConfig::from_strs(10, 10, 2, &["0.35", "0.25", "0.2", "0.2"]).unwrap_err();
        match err {
            Error::NonIntegerExpectedLoad { cache, load } => {
                assert_eq!(cache, 1);
                assert!(load.starts_with("3.5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_full_budget() {
        let err = SystemConfig::from_strs(2, 2, 2, &["1/2", "1/2"]).unwrap_err();
        assert!(matches!(
            err,
            Error::BadBudget {
                budget: 2,
                caches: 2
            }
        ));
        let err = SystemConfig::from_strs(2, 2, 0, &["1/2", "1/2"]).unwrap_err();
        assert!(matches!(err, Error::BadBudget { .. }));
    }

    #[test]
    fn rejects_bad_intensities() {
        for p in [
            &["0.5", "0.6"][..],
            &["0.25", "0.75"][..],
            &["1", "0"][..],
            &["3/2", "-1/2"][..],
        ] {
            let err = SystemConfig::from_strs(4, 4, 1, p).unwrap_err();
            assert!(matches!(err, Error::BadIntensities(_)), "{p:?}: {err:?}");
        }
    }

    #[test]
    fn derives_worked_example_layout() {
        let layout = example().layout();
        assert_eq!(layout.alpha(), 2);
        assert_eq!(layout.base(), &[2, 1, 1, 1]);
        assert_eq!(layout.virtual_count(), 5);
        assert_eq!(layout.virtual_range(0), 0..2);
        assert_eq!(layout.virtual_range(1), 2..3);
        assert_eq!(layout.virtual_range(2), 3..4);
        assert_eq!(layout.virtual_range(3), 4..5);
        assert_eq!(
            (0..5).map(|v| layout.owner_of(v)).collect::<Vec<_>>(),
            vec![0, 0, 1, 2, 3]
        );
    }

    #[test]
    fn uniform_loads_collapse() {
        let layout = CacheLayout::from_expected(&[3, 3, 3]).unwrap();
        assert_eq!(layout.alpha(), 3);
        assert_eq!(layout.base(), &[1, 1, 1]);
        assert_eq!(layout.virtual_count(), 3);
    }

    #[test]
    fn subpacketization_comparison_layout() {
        let layout = CacheLayout::from_expected(&[8, 6, 6, 4, 2, 2]).unwrap();
        assert_eq!(layout.alpha(), 2);
        assert_eq!(layout.base(), &[4, 3, 3, 2, 1, 1]);
        assert_eq!(layout.virtual_count(), 14);
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = example();
        let a = sample_population(&cfg, 42, DemandMode::Random).unwrap();
        let b = sample_population(&cfg, 42, DemandMode::Random).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.population().iter().sum::<u64>(), 10);
        assert!(a.demands().iter().all(|&d| d < 10));
        let w = sample_population(&cfg, 7, DemandMode::WorstCase).unwrap();
        assert_eq!(w.demands(), &(0..10).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn single_cache_takes_everyone() {
        let sampler = PopulationSampler::from_expected(&[7]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(sampler.draw(&mut rng), vec![7]);
        }
    }

    #[test]
    fn worst_case_needs_enough_files() {
        let cfg = SystemConfig::from_strs(10, 5, 2, &["0.4", "0.2", "0.2", "0.2"]).unwrap();
        assert!(matches!(
            sample_population(&cfg, 1, DemandMode::WorstCase),
            Err(Error::WorstCaseNeedsEnoughFiles {
                users: 10,
                files: 5
            })
        ));
        assert!(sample_population(&cfg, 1, DemandMode::Random).is_ok());
    }

    #[test]
    fn users_grouped_by_cache() {
        let inst = PopulationInstance::worst_case(vec![6, 2, 1, 1]);
        assert_eq!(inst.users_by_cache(), vec![0..6, 6..8, 8..9, 9..10]);
        assert_eq!(inst.cache_of(7), 1);
        assert_eq!(inst.cache_of(9), 3);
    }
}
