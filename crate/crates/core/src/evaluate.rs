//! Average-delay evaluation.
//!
//! The average delay is the expectation of the delivery time over the
//! multinomial population distribution. It is computed either exactly, by
//! enumerating every weak composition of `K` into `Λ` parts, or by sampling
//! population vectors (SBN). Sampling is split into fixed-size chunks, each
//! with its own RNG stream derived from the master seed, and per-chunk sums
//! are exact integers, so the result does not depend on the worker count.
//!
//! Every sample is evaluated for both the proposed scheme and the uniform
//! cache-size baseline, and for every budget of a sweep, on the same drawn
//! populations.

use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::delivery::{self, TransmissionCounter};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::model::{CacheLayout, PopulationSampler, SystemConfig};
use crate::placement;

/// Default cap on the number of compositions enumerated for exact averages.
pub const DEFAULT_MAX_COMPOSITIONS: u64 = 10_000_000;

/// Samples per RNG stream. Fixed so results do not depend on parallelism.
pub const SAMPLES_PER_CHUNK: u64 = 4096;

/// `K! / Π v_λ! · Π p_λ^{v_λ}` with `K = Σ v_λ`.
pub fn multinomial_probability(population: &[u64], intensities: &[Rational]) -> Rational {
    assert_eq!(population.len(), intensities.len(), "population length");
    let users: u64 = population.iter().sum();
    let coefficient = population
        .iter()
        .fold(exact::factorial(users), |acc, &v| acc / exact::factorial(v));
    population.iter().zip(intensities).fold(
        Rational::from_integer(BigInt::from(coefficient)),
        |acc, (&v, p)| acc * num_traits::pow(p.clone(), v as usize),
    )
}

/// Iterates every weak composition of `total` into `parts` parts exactly
/// once, starting from `[total, 0, …, 0]`.
#[derive(Debug, Clone)]
pub struct CompositionCursor {
    current: Vec<u64>,
    exhausted: bool,
}

impl CompositionCursor {
    pub fn new(total: u64, parts: usize) -> Self {
        let mut current = vec![0; parts];
        if let Some(first) = current.first_mut() {
            *first = total;
        }
        CompositionCursor {
            exhausted: parts == 0,
            current,
        }
    }
}

impl Iterator for CompositionCursor {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.exhausted {
            return None;
        }
        let out = self.current.clone();
        let n = self.current.len();
        let last = std::mem::take(&mut self.current[n - 1]);
        match (0..n - 1).rev().find(|&i| self.current[i] > 0) {
            Some(i) => {
                self.current[i] -= 1;
                self.current[i + 1] = last + 1;
            }
            None => self.exhausted = true,
        }
        Some(out)
    }
}

/// Number of weak compositions of `total` into `parts` parts.
pub fn composition_count(total: u64, parts: usize) -> BigUint {
    if parts == 0 {
        return BigUint::from(u8::from(total == 0));
    }
    exact::binomial(total + parts as u64 - 1, parts as u64 - 1)
}

fn check_enumeration(cfg: &SystemConfig, max_compositions: u64) -> Result<()> {
    let count = composition_count(cfg.users(), cfg.caches());
    match count.to_u64() {
        Some(c) if c <= max_compositions => Ok(()),
        _ => Err(Error::EnumerationTooLarge {
            what: "exact averaging over population vectors (use sampling instead)",
            count,
            cap: max_compositions,
        }),
    }
}

/// Exact average delay of the scheme, `Σ_V P(V)·T(V)`.
pub fn exact_average_delay(cfg: &SystemConfig, max_compositions: u64) -> Result<Rational> {
    let layout = cfg.layout();
    let counter = TransmissionCounter::new(&layout, cfg.budget());
    exact_average(cfg, max_compositions, |v| {
        exact::ratio(counter.count(v), counter.subpacketization().clone())
    })
}

/// Exact average of the uniform cache-size baseline.
pub fn exact_uniform_baseline(cfg: &SystemConfig, max_compositions: u64) -> Result<Rational> {
    let baseline = UniformBaseline::new(cfg.caches(), cfg.budget());
    exact_average(cfg, max_compositions, |v| baseline.delay(v))
}

fn exact_average(
    cfg: &SystemConfig,
    max_compositions: u64,
    delay: impl Fn(&[u64]) -> Rational,
) -> Result<Rational> {
    check_enumeration(cfg, max_compositions)?;
    Ok(CompositionCursor::new(cfg.users(), cfg.caches())
        .map(|v| multinomial_probability(&v, cfg.intensities()) * delay(&v))
        .sum())
}

/// Delay of the uniform cache-size baseline for one population:
/// `Σ_{λ=1}^{Λ-t} L(λ)·C(Λ-λ, t) / C(Λ, t)` with `L` the loads sorted in
/// descending order.
pub fn uniform_baseline_delay(population: &[u64], caches: usize, t: usize) -> Rational {
    UniformBaseline::new(caches, t).delay(population)
}

#[derive(Debug, Clone)]
struct UniformBaseline {
    // weights[λ] = C(Λ-1-λ, t) for 0-based λ
    weights: Vec<BigUint>,
    denominator: BigUint,
}

impl UniformBaseline {
    fn new(caches: usize, t: usize) -> Self {
        let weights = (0..caches)
            .map(|l| exact::binomial((caches - 1 - l) as u64, t as u64))
            .collect();
        UniformBaseline {
            weights,
            denominator: exact::binomial(caches as u64, t as u64),
        }
    }

    fn numerator(&self, population: &[u64]) -> BigUint {
        let mut sorted = population.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        sorted
            .iter()
            .zip(&self.weights)
            .map(|(&load, w)| w * load)
            .sum()
    }

    fn delay(&self, population: &[u64]) -> Rational {
        exact::ratio(self.numerator(population), self.denominator.clone())
    }
}

/// Exact running sums of per-sample values `numerator / denominator`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbnEstimate {
    samples: u64,
    denominator: BigUint,
    sum: BigUint,
    sum_sq: BigUint,
}

impl SbnEstimate {
    fn empty(denominator: BigUint) -> Self {
        SbnEstimate {
            samples: 0,
            denominator,
            sum: BigUint::zero(),
            sum_sq: BigUint::zero(),
        }
    }

    fn push(&mut self, numerator: BigUint) {
        self.samples += 1;
        self.sum_sq += &numerator * &numerator;
        self.sum += numerator;
    }

    fn merge(mut self, other: SbnEstimate) -> Self {
        debug_assert_eq!(self.denominator, other.denominator);
        self.samples += other.samples;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Sample mean, exact.
    pub fn mean(&self) -> Rational {
        if self.samples == 0 {
            return Rational::zero();
        }
        exact::ratio(self.sum.clone(), &self.denominator * self.samples)
    }

    /// Unbiased sample variance, exact.
    pub fn variance(&self) -> Rational {
        if self.samples < 2 {
            return Rational::zero();
        }
        let m = BigInt::from(self.samples);
        let spread = &m * BigInt::from(self.sum_sq.clone()) - BigInt::from(&self.sum * &self.sum);
        let d = BigInt::from(self.denominator.clone());
        Rational::new(spread, &m * (&m - 1) * &d * &d)
    }

    /// `sqrt(variance / samples)`.
    pub fn std_error(&self) -> f64 {
        if self.samples < 2 {
            return 0.0;
        }
        let v = self.variance() / Rational::from_integer(BigInt::from(self.samples));
        exact::to_f64(&v).sqrt()
    }
}

/// The population vectors used by sampling, in sample order. The same
/// vectors are drawn for a given `(cfg, samples, seed)` by every SBN routine.
pub fn sample_vectors(cfg: &SystemConfig, samples: u64, seed: u64) -> Vec<Vec<u64>> {
    let sampler = PopulationSampler::new(cfg);
    (0..samples.div_ceil(SAMPLES_PER_CHUNK))
        .flat_map(|chunk| {
            let mut rng = chunk_rng(seed, chunk);
            let n = chunk_len(samples, chunk);
            (0..n).map(|_| sampler.draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_len(samples: u64, chunk: u64) -> u64 {
    (samples - chunk * SAMPLES_PER_CHUNK).min(SAMPLES_PER_CHUNK)
}

/// SBN estimates of the scheme and the uniform baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SbnPair {
    pub ours: SbnEstimate,
    pub uniform: SbnEstimate,
}

/// SBN estimates for every budget in `budgets`, all on the same populations.
///
/// `workers` caps the thread count; `None` uses the default pool.
pub fn sbn_sweep(
    cfg: &SystemConfig,
    budgets: &[usize],
    samples: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<SbnPair>> {
    if samples == 0 {
        return Err(Error::InvalidParameter {
            field: "samples",
            reason: "need at least one sample".into(),
        });
    }
    for &t in budgets {
        cfg.with_budget(t)?;
    }
    let layout = cfg.layout();
    let counters: Vec<TransmissionCounter> = budgets
        .iter()
        .map(|&t| TransmissionCounter::new(&layout, t))
        .collect();
    let baselines: Vec<UniformBaseline> = budgets
        .iter()
        .map(|&t| UniformBaseline::new(cfg.caches(), t))
        .collect();
    let sampler = PopulationSampler::new(cfg);

    let empty = || -> Vec<SbnPair> {
        counters
            .iter()
            .zip(&baselines)
            .map(|(c, b)| SbnPair {
                ours: SbnEstimate::empty(c.subpacketization().clone()),
                uniform: SbnEstimate::empty(b.denominator.clone()),
            })
            .collect()
    };
    let run_chunk = |chunk: u64| -> Vec<SbnPair> {
        let mut acc = empty();
        let mut rng = chunk_rng(seed, chunk);
        for _ in 0..chunk_len(samples, chunk) {
            let v = sampler.draw(&mut rng);
            for ((pair, counter), baseline) in acc.iter_mut().zip(&counters).zip(&baselines) {
                pair.ours.push(counter.count(&v));
                pair.uniform.push(baseline.numerator(&v));
            }
        }
        acc
    };
    let merge = |a: Vec<SbnPair>, b: Vec<SbnPair>| -> Vec<SbnPair> {
        a.into_iter()
            .zip(b)
            .map(|(x, y)| SbnPair {
                ours: x.ours.merge(y.ours),
                uniform: x.uniform.merge(y.uniform),
            })
            .collect()
    };

    let chunks = samples.div_ceil(SAMPLES_PER_CHUNK);
    let compute = || {
        (0..chunks)
            .into_par_iter()
            .map(run_chunk)
            .reduce(empty, merge)
    };
    let result = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter {
                field: "workers",
                reason: e.to_string(),
            })?
            .install(compute),
        None => compute(),
    };
    Ok(result)
}

/// SBN estimate of the scheme's average delay at the configured budget.
pub fn sbn_average_delay(
    cfg: &SystemConfig,
    samples: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<SbnEstimate> {
    let mut pairs = sbn_sweep(cfg, &[cfg.budget()], samples, seed, workers)?;
    Ok(pairs.remove(0).ours)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Sbn,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub method: Method,
    pub samples: u64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub max_compositions: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            method: Method::Sbn,
            samples: 10_000,
            seed: 0,
            workers: None,
            max_compositions: DEFAULT_MAX_COMPOSITIONS,
        }
    }
}

/// A mean delay with its standard error (zero for exact values).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDelay {
    pub mean: Rational,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub budget: usize,
    pub method: Method,
    /// Zero for exact evaluation.
    pub samples: u64,
    pub ours: MeanDelay,
    pub uniform: MeanDelay,
    pub subpacketization_ours: BigUint,
    /// Subpacketization of the same formula on the expected (not base)
    /// population.
    pub subpacketization_soa: BigUint,
    pub alpha: u64,
    /// `α^t`.
    pub alpha_gain: BigUint,
}

/// Evaluates the scheme against the uniform baseline for every budget.
pub fn evaluate_sweep(
    cfg: &SystemConfig,
    budgets: &[usize],
    options: &EvalOptions,
) -> Result<Vec<EvaluationReport>> {
    let layout = cfg.layout();
    let estimates: Vec<(MeanDelay, MeanDelay, u64)> = match options.method {
        Method::Sbn => sbn_sweep(cfg, budgets, options.samples, options.seed, options.workers)?
            .into_iter()
            .map(|pair| {
                (
                    MeanDelay {
                        mean: pair.ours.mean(),
                        std_error: pair.ours.std_error(),
                    },
                    MeanDelay {
                        mean: pair.uniform.mean(),
                        std_error: pair.uniform.std_error(),
                    },
                    pair.ours.samples(),
                )
            })
            .collect(),
        Method::Exact => budgets
            .iter()
            .map(|&t| {
                let cfg_t = cfg.with_budget(t)?;
                let exact_mean = |mean| MeanDelay {
                    mean,
                    std_error: 0.0,
                };
                Ok((
                    exact_mean(exact_average_delay(&cfg_t, options.max_compositions)?),
                    exact_mean(exact_uniform_baseline(&cfg_t, options.max_compositions)?),
                    0,
                ))
            })
            .collect::<Result<_>>()?,
    };
    Ok(budgets
        .iter()
        .zip(estimates)
        .map(|(&t, (ours, uniform, samples))| EvaluationReport {
            budget: t,
            method: options.method,
            samples,
            ours,
            uniform,
            subpacketization_ours: placement::subpacketization(&layout, t),
            subpacketization_soa: exact::elementary_symmetric(layout.expected(), t),
            alpha: layout.alpha(),
            alpha_gain: num_traits::pow(BigUint::from(layout.alpha()), t),
        })
        .collect())
}

/// Report for the configured budget alone.
pub fn compare_report(cfg: &SystemConfig, options: &EvalOptions) -> Result<EvaluationReport> {
    Ok(evaluate_sweep(cfg, &[cfg.budget()], options)?.remove(0))
}

const DECIMAL_DIGITS: usize = 12;

/// CSV with header
/// `t,mean_ours,stderr_ours,mean_uniform,stderr_uniform,S_ours,S_soa,alpha`.
pub fn write_csv<W: Write>(reports: &[EvaluationReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer
        .write_record([
            "t",
            "mean_ours",
            "stderr_ours",
            "mean_uniform",
            "stderr_uniform",
            "S_ours",
            "S_soa",
            "alpha",
        ])
        .map_err(io)?;
    for r in reports {
        writer
            .write_record([
                r.budget.to_string(),
                exact::format_significant(&r.ours.mean, DECIMAL_DIGITS),
                exact::format_float(r.ours.std_error, DECIMAL_DIGITS),
                exact::format_significant(&r.uniform.mean, DECIMAL_DIGITS),
                exact::format_float(r.uniform.std_error, DECIMAL_DIGITS),
                r.subpacketization_ours.to_string(),
                r.subpacketization_soa.to_string(),
                r.alpha.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ExactValue {
    fraction: String,
    decimal: String,
}

impl From<&Rational> for ExactValue {
    fn from(r: &Rational) -> Self {
        ExactValue {
            fraction: exact::format_fraction(r),
            decimal: exact::format_significant(r, DECIMAL_DIGITS),
        }
    }
}

#[derive(Serialize)]
struct ReportRecord {
    t: usize,
    method: Method,
    samples: u64,
    mean_ours: ExactValue,
    stderr_ours: String,
    mean_uniform: ExactValue,
    stderr_uniform: String,
    #[serde(rename = "S_ours")]
    s_ours: String,
    #[serde(rename = "S_soa")]
    s_soa: String,
    alpha: u64,
    alpha_gain: String,
}

/// JSON array with one object per report.
pub fn write_json<W: Write>(reports: &[EvaluationReport], mut out: W) -> Result<()> {
    let records: Vec<ReportRecord> = reports
        .iter()
        .map(|r| ReportRecord {
            t: r.budget,
            method: r.method,
            samples: r.samples,
            mean_ours: (&r.ours.mean).into(),
            stderr_ours: exact::format_float(r.ours.std_error, DECIMAL_DIGITS),
            mean_uniform: (&r.uniform.mean).into(),
            stderr_uniform: exact::format_float(r.uniform.std_error, DECIMAL_DIGITS),
            s_ours: r.subpacketization_ours.to_string(),
            s_soa: r.subpacketization_soa.to_string(),
            alpha: r.alpha,
            alpha_gain: r.alpha_gain.to_string(),
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &records).map_err(|e| Error::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

/// Effect of adding virtual users to the expected population.
#[derive(Debug, Clone, PartialEq)]
pub struct Tradeoff {
    pub budget: usize,
    pub alpha_before: u64,
    pub alpha_after: u64,
    pub subpacketization_before: BigUint,
    pub subpacketization_after: BigUint,
    /// `subpacketization_before / subpacketization_after`.
    pub subpacketization_ratio: Rational,
    /// Growth of the `α`-attributable reduction,
    /// `(α_after / α_before)^t`, measured as the change in
    /// `S(expected) / S(base)` between the two populations.
    pub alpha_reduction: Rational,
    pub delay_before: Rational,
    pub delay_after: Rational,
}

/// Recomputes `α`, `S` and the deterministic delivery time after adding
/// `augment` virtual users per cache.
pub fn virtual_user_tradeoff(expected: &[u64], augment: &[u64], t: usize) -> Result<Tradeoff> {
    if augment.len() != expected.len() {
        return Err(Error::InvalidParameter {
            field: "augment",
            reason: format!("{} entries for {} caches", augment.len(), expected.len()),
        });
    }
    if t == 0 || t >= expected.len() {
        return Err(Error::BadBudget {
            budget: t,
            caches: expected.len(),
        });
    }
    let augmented: Vec<u64> = expected.iter().zip(augment).map(|(a, b)| a + b).collect();
    let before = CacheLayout::from_expected(expected)?;
    let after = CacheLayout::from_expected(&augmented)?;
    let s_before = placement::subpacketization(&before, t);
    let s_after = placement::subpacketization(&after, t);
    let reduction = |layout: &CacheLayout, s: &BigUint| {
        exact::ratio(exact::elementary_symmetric(layout.expected(), t), s.clone())
    };
    Ok(Tradeoff {
        budget: t,
        alpha_before: before.alpha(),
        alpha_after: after.alpha(),
        subpacketization_ratio: exact::ratio(s_before.clone(), s_after.clone()),
        alpha_reduction: reduction(&after, &s_after) / reduction(&before, &s_before),
        delay_before: delivery::deterministic_delivery_time(&before, t),
        delay_after: delivery::deterministic_delivery_time(&after, t),
        subpacketization_before: s_before,
        subpacketization_after: s_after,
    })
}
