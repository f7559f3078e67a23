//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shardcache::codec::verify_instance;
use shardcache::delivery::{self, deliver, deterministic_delivery_time, Scheme};
use shardcache::evaluate::{
    self, exact_average_delay, multinomial_probability, sbn_average_delay, virtual_user_tradeoff,
    CompositionCursor, EvalOptions, Method,
};
use shardcache::exact::{self, Rational};
use shardcache::model::{
    sample_population, CacheLayout, DemandMode, PopulationInstance, PopulationSampler, SystemConfig,
};
use shardcache::partition::partition_population;
use shardcache::placement::{self, storage_allocation, DEFAULT_MAX_TUPLES};

// Pinned limits and tolerances.
const WORKED_EXAMPLE_LIMIT: Duration = Duration::from_secs(1);
const EQUIVALENCE_LIMIT: Duration = Duration::from_secs(120);
const SBN_AGREEMENT_LIMIT: Duration = Duration::from_secs(60);
const EQUIVALENCE_INSTANCES: usize = 10_000;
const VERIFY_INSTANCES: usize = 1_000;
const VERIFY_PAYLOAD_BYTES: usize = 512;
const RANDOM_LAYOUTS: usize = 20;
const SBN_AGREEMENT_SAMPLES: u64 = 1_000_000;
const SBN_AGREEMENT_SIGMAS: f64 = 3.0;
const DESK_SAMPLES: u64 = 10_000;
const CLI_SAMPLES: &str = "20000";

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed <= limit, || {
        format!("took {elapsed:.2?}, limit {limit:.0?}")
    })
}

fn worked_example() -> SystemConfig {
    SystemConfig::from_strs(10, 10, 2, &["2/5", "1/5", "1/5", "1/5"]).unwrap()
}

fn scenario(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn c1_worked_example() -> Outcome {
    let start = Instant::now();
    let cfg = worked_example();
    let layout = cfg.layout();
    ensure(layout.alpha() == 2, || {
        format!("alpha = {}", layout.alpha())
    })?;
    ensure(layout.base() == [2, 1, 1, 1], || {
        format!("base = {:?}", layout.base())
    })?;
    let s = placement::subpacketization(&layout, 2);
    ensure(s == BigUint::from(9u32), || format!("S = {s}"))?;
    let gamma = storage_allocation(&layout, 2);
    let want = [frac(2, 3), frac(4, 9), frac(4, 9), frac(4, 9)];
    ensure(gamma.fractions() == want, || {
        format!("gamma = {:?}", gamma.fractions())
    })?;
    ensure(gamma.total() == Rational::from_integer(2.into()), || {
        "gamma does not sum to t".into()
    })?;

    let plan = partition_population(&[6, 2, 1, 1], &layout);
    let rounds: Vec<Vec<u64>> = plan.rounds().to_vec();
    ensure(
        rounds == vec![vec![2, 1, 1, 1], vec![2, 1, 0, 0], vec![2, 0, 0, 0]],
        || format!("rounds = {rounds:?}"),
    )?;

    let scheme =
        Scheme::new(layout.clone(), 2, 10, DEFAULT_MAX_TUPLES).map_err(|e| e.to_string())?;
    let trace = deliver(&PopulationInstance::worst_case(vec![6, 2, 1, 1]), &scheme)
        .map_err(|e| e.to_string())?;
    let per_round: Vec<usize> = trace
        .rounds()
        .iter()
        .map(|r| r.transmissions.len())
        .collect();
    ensure(per_round == [7, 7, 6], || {
        format!("transmissions per round = {per_round:?}")
    })?;
    let last = &trace.rounds()[2];
    let used: Vec<usize> = last.transmissions.iter().map(|t| t.coded_tuple).collect();
    let pruned: Vec<String> = (0..scheme.coded_tuples().len())
        .filter(|i| !used.contains(i))
        .map(|i| scheme.coded_tuples()[i].to_string())
        .collect();
    ensure(pruned == ["3-4-5"], || {
        format!("pruned in round 3 = {pruned:?}")
    })?;
    ensure(trace.delay() == frac(20, 9), || {
        format!("T = {}", trace.delay())
    })?;
    let formula = delivery::delay_formula(&[6, 2, 1, 1], &layout, 2);
    ensure(formula == frac(20, 9), || format!("formula T = {formula}"))?;
    within(WORKED_EXAMPLE_LIMIT, start)?;
    Ok(format!(
        "T = 20/9, rounds 7/7/6, in {:.2?}",
        start.elapsed()
    ))
}

/// `(expected population, t)` pairs used by the randomized checks.
const EQUIVALENCE_CONFIGS: &[(&[u64], usize)] = &[
    (&[4, 2, 2, 2], 2),
    (&[6, 4, 2], 1),
    (&[3, 3, 3, 3, 3], 2),
    (&[12, 8, 8, 4, 4, 4], 3),
    (&[10, 10, 5, 5, 5, 5, 5, 5], 4),
    (&[24, 12, 12, 6, 6], 3),
];

fn c2_formula_equivalence() -> Outcome {
    let start = Instant::now();
    let per_config = EQUIVALENCE_INSTANCES.div_ceil(EQUIVALENCE_CONFIGS.len());
    let mut checked = 0usize;
    for (c, &(expected, t)) in EQUIVALENCE_CONFIGS.iter().enumerate() {
        let users: u64 = expected.iter().sum();
        ensure(expected.len() <= 8 && users <= 60 && t <= 4, || {
            "config out of range".into()
        })?;
        let layout = CacheLayout::from_expected(expected).map_err(|e| e.to_string())?;
        let scheme =
            Scheme::new(layout.clone(), t, users, DEFAULT_MAX_TUPLES).map_err(|e| e.to_string())?;
        let sampler = PopulationSampler::from_expected(expected);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + c as u64);
        for i in 0..per_config {
            let population = sampler.draw(&mut rng);
            let demands = (0..users)
                .map(|_| rng.random_range(0..users) as usize)
                .collect();
            let instance =
                PopulationInstance::new(population.clone(), demands).map_err(|e| e.to_string())?;
            let simulated = deliver(&instance, &scheme)
                .map_err(|e| e.to_string())?
                .delay();
            let formula = delivery::delay_formula(&population, &layout, t);
            ensure(simulated == formula, || {
                format!("config {expected:?} t={t} sample {i} V={population:?}: simulated {simulated} vs formula {formula}")
            })?;
            checked += 1;
        }
    }
    within(EQUIVALENCE_LIMIT, start)?;
    Ok(format!(
        "{checked} instances over {} configs, in {:.2?}",
        EQUIVALENCE_CONFIGS.len(),
        start.elapsed()
    ))
}

fn c3_decoding() -> Outcome {
    let configs = [
        SystemConfig::from_expected(10, 2, &[4, 2, 2, 2]),
        SystemConfig::from_expected(12, 1, &[6, 4, 2]),
        SystemConfig::from_expected(15, 2, &[3, 3, 3, 3, 3]),
        SystemConfig::from_expected(12, 2, &[4, 4, 2, 2]),
    ];
    let per_mode = VERIFY_INSTANCES.div_ceil(2 * configs.len());
    let mut instances = 0usize;
    let mut users = 0usize;
    for (c, cfg) in configs.into_iter().enumerate() {
        let cfg = cfg.map_err(|e| e.to_string())?;
        let scheme = Scheme::new(cfg.layout(), cfg.budget(), cfg.files(), DEFAULT_MAX_TUPLES)
            .map_err(|e| e.to_string())?;
        for mode in [DemandMode::WorstCase, DemandMode::Random] {
            for i in 0..per_mode {
                let seed = (c * 100_000 + i) as u64;
                let instance = sample_population(&cfg, seed, mode).map_err(|e| e.to_string())?;
                let report = verify_instance(&instance, &scheme, seed, VERIFY_PAYLOAD_BYTES)
                    .map_err(|e| e.to_string())?;
                ensure(report.all_decoded(), || {
                    format!(
                        "{:?} {mode:?} V={:?}: {} users failed",
                        cfg.expected_population(),
                        instance.population(),
                        report.failures()
                    )
                })?;
                instances += 1;
                users += instance.users();
            }
        }
    }
    Ok(format!("{instances} instances, {users} users decoded"))
}

fn c4_deterministic_case() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 0..RANDOM_LAYOUTS {
        let caches = rng.random_range(2..=6usize);
        let alpha = rng.random_range(1..=3u64);
        let base: Vec<u64> = (0..caches).map(|_| rng.random_range(1..=4)).collect();
        let expected: Vec<u64> = base.iter().map(|b| b * alpha).collect();
        let layout = CacheLayout::from_expected(&expected).map_err(|e| e.to_string())?;
        for t in 1..caches {
            let det = deterministic_delivery_time(&layout, t);
            let formula = delivery::delay_formula(&expected, &layout, t);
            ensure(det == formula, || {
                format!("layout {i} {expected:?} t={t}: {det} vs {formula}")
            })?;
            let a = layout.alpha();
            let s_expected = exact::elementary_symmetric(&expected, t);
            let s_base = placement::subpacketization(&layout, t);
            ensure(
                s_expected == s_base * num_traits::pow(BigUint::from(a), t),
                || format!("layout {expected:?} t={t}: S ratio is not alpha^t"),
            )?;
        }
    }
    let layout = CacheLayout::from_expected(&[8, 6, 6, 4, 2, 2]).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for t in 1..=3 {
        let r = exact::ratio(
            exact::elementary_symmetric(layout.expected(), t),
            placement::subpacketization(&layout, t),
        );
        ratios.push(r.to_string());
    }
    ensure(ratios == ["2", "4", "8"], || {
        format!("[8,6,6,4,2,2] ratios = {ratios:?}")
    })?;
    Ok(format!(
        "{RANDOM_LAYOUTS} layouts; [8,6,6,4,2,2] ratios 2/4/8"
    ))
}

fn c5_exact_vs_sbn() -> Outcome {
    let start = Instant::now();
    let cfg = worked_example();
    let vectors: Vec<Vec<u64>> = CompositionCursor::new(cfg.users(), cfg.caches()).collect();
    ensure(vectors.len() == 286, || {
        format!("{} compositions", vectors.len())
    })?;
    let total: Rational = vectors
        .iter()
        .map(|v| multinomial_probability(v, cfg.intensities()))
        .fold(Rational::zero(), |a, b| a + b);
    ensure(total.is_one(), || format!("weights sum to {total}"))?;
    let exact_mean =
        exact_average_delay(&cfg, evaluate::DEFAULT_MAX_COMPOSITIONS).map_err(|e| e.to_string())?;
    let sbn = sbn_average_delay(&cfg, SBN_AGREEMENT_SAMPLES, 5, None).map_err(|e| e.to_string())?;
    let gap = (exact::to_f64(&sbn.mean()) - exact::to_f64(&exact_mean)).abs();
    let se = sbn.std_error();
    ensure(gap <= SBN_AGREEMENT_SIGMAS * se, || {
        format!("|sbn - exact| = {gap:.3e} > {SBN_AGREEMENT_SIGMAS} * {se:.3e}")
    })?;
    within(SBN_AGREEMENT_LIMIT, start)?;
    Ok(format!(
        "exact {} vs sbn {} (gap {:.2} se), in {:.2?}",
        exact::format_significant(&exact_mean, 9),
        exact::format_significant(&sbn.mean(), 9),
        gap / se,
        start.elapsed()
    ))
}

fn c6_two_users() -> Outcome {
    let cfg = SystemConfig::from_strs(2, 2, 1, &["1/2", "1/2"]).map_err(|e| e.to_string())?;
    let mean =
        exact_average_delay(&cfg, evaluate::DEFAULT_MAX_COMPOSITIONS).map_err(|e| e.to_string())?;
    ensure(mean == frac(3, 4), || format!("mean = {mean}"))?;
    Ok("E[T] = 3/4".into())
}

fn c7_desk_scale() -> Outcome {
    let cfg = shardcache::config::load_scenario(scenario("desk_scale.toml").as_ref())
        .map_err(|e| e.to_string())?;
    let options = EvalOptions {
        method: Method::Sbn,
        samples: DESK_SAMPLES,
        seed: 0,
        ..EvalOptions::default()
    };
    let reports =
        evaluate::evaluate_sweep(&cfg, &[1, 2, 3, 4, 5], &options).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for r in &reports {
        ensure(r.ours.mean <= r.uniform.mean, || {
            format!(
                "t={}: ours {} > uniform {}",
                r.budget, r.ours.mean, r.uniform.mean
            )
        })?;
        rows.push(format!(
            "t={}: {:.3} <= {:.3}",
            r.budget,
            exact::to_f64(&r.ours.mean),
            exact::to_f64(&r.uniform.mean)
        ));
    }
    Ok(rows.join(", "))
}

fn c8_virtual_users() -> Outcome {
    let mut rows = Vec::new();
    for t in 1..=3usize {
        let tr = virtual_user_tradeoff(&[20, 15, 15, 5, 5, 4], &[0, 0, 0, 0, 0, 1], t)
            .map_err(|e| e.to_string())?;
        ensure(tr.alpha_before == 1 && tr.alpha_after == 5, || {
            format!("alpha {} -> {}", tr.alpha_before, tr.alpha_after)
        })?;
        let five_t = Rational::from_integer(BigInt::from(5u32.pow(t as u32)));
        ensure(tr.alpha_reduction == five_t, || {
            format!("t={t}: reduction {} != 5^{t}", tr.alpha_reduction)
        })?;
        ensure(tr.delay_after >= tr.delay_before, || {
            format!(
                "t={t}: delay decreased {} -> {}",
                tr.delay_before, tr.delay_after
            )
        })?;
        rows.push(format!(
            "t={t}: x{} (S {}->{})",
            tr.alpha_reduction, tr.subpacketization_before, tr.subpacketization_after
        ));
    }
    Ok(rows.join(", "))
}

fn c9_thread_determinism() -> Outcome {
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_shardcache"))
            .args(["evaluate", "--config", &scenario("desk_scale.toml")])
            .args(["--t", "1..5", "--samples", CLI_SAMPLES, "--seed", "11"])
            .env("SHARDCACHE_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            format!(
                "exit {:?}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr)
            )
        })?;
        Ok(out.stdout)
    };
    let one = run("1")?;
    let four = run("4")?;
    ensure(!one.is_empty(), || "empty output".into())?;
    ensure(one == four, || "CSV differs between 1 and 4 threads".into())?;
    Ok(format!("{} identical bytes", one.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("worked example", c1_worked_example),
        (
            "simulation matches closed-form delay",
            c2_formula_equivalence,
        ),
        ("every user decodes", c3_decoding),
        ("deterministic population case", c4_deterministic_case),
        ("exact average vs sampling", c5_exact_vs_sbn),
        ("two users, two caches", c6_two_users),
        ("beats uniform caches at desk scale", c7_desk_scale),
        ("virtual-user trade-off", c8_virtual_users),
        ("thread-count determinism", c9_thread_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name} ({elapsed:.2?}): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
