use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shardcache::codec::{self, UserOutcome, DEFAULT_PAYLOAD_BYTES};
use shardcache::config;
use shardcache::delivery::{self, Scheme};
use shardcache::evaluate::{self, EvalOptions, Method, DEFAULT_MAX_COMPOSITIONS};
use shardcache::exact::{self, Rational};
use shardcache::model::{self, DemandMode, PopulationInstance, SystemConfig};
use shardcache::partition::RoundKind;
use shardcache::placement::{self, DEFAULT_MAX_TUPLES};
use shardcache::{Error, Result};

const THREADS_ENV: &str = "SHARDCACHE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "shardcache",
    version,
    about = "Coded caching with load-proportional shared caches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML with K, N, lambda, t, p)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Number of sampled population vectors
    #[arg(long, global = true, default_value_t = 10_000)]
    samples: u64,

    /// Budgets, e.g. `2`, `1,3,4` or `1..5` (inclusive); defaults to the
    /// scenario's t
    #[arg(long = "t", global = true, value_name = "LIST")]
    budgets: Option<String>,

    /// Fixed population vector, e.g. `6,2,1,1`
    #[arg(long = "v", global = true, value_name = "LIST")]
    population: Option<String>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write the command's table, trace or report here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Cap on enumerated tuples and population vectors
    #[arg(long, global = true, value_name = "INT")]
    max_enum: Option<u64>,

    #[arg(long, global = true, default_value_t = DEFAULT_PAYLOAD_BYTES)]
    payload_bytes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print expected and base populations and the virtual caches
    Layout,
    /// Print the storage allocation and subpacketization
    Place {
        /// Also print the tuple table (index,tuple,owning-caches)
        #[arg(long)]
        table: bool,
    },
    /// Run one delivery and print its rounds and delivery time
    Simulate {
        /// Draw requests uniformly instead of one distinct file per user
        #[arg(long)]
        random_demands: bool,
    },
    /// Run one delivery over real bytes and check every user's file
    Verify {
        #[arg(long)]
        random_demands: bool,
    },
    /// Average delay against the uniform cache-size baseline
    Evaluate {
        /// Enumerate every population vector instead of sampling
        #[arg(long)]
        exact: bool,
    },
    /// Effect of adding virtual users on alpha, subpacketization and delay
    Tradeoff {
        /// Users added per cache, e.g. `0,0,0,0,0,1`
        #[arg(long, value_name = "LIST")]
        augment: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let cfg = config::load_scenario(path)?;
    let max_enum = cli.max_enum;
    match &cli.command {
        Command::Layout => layout(&cfg),
        Command::Place { table } => {
            place(cli, &cfg, *table, max_enum.unwrap_or(DEFAULT_MAX_TUPLES))
        }
        Command::Simulate { random_demands } => simulate(
            cli,
            &cfg,
            *random_demands,
            max_enum.unwrap_or(DEFAULT_MAX_TUPLES),
        ),
        Command::Verify { random_demands } => verify(
            cli,
            &cfg,
            *random_demands,
            max_enum.unwrap_or(DEFAULT_MAX_TUPLES),
        ),
        Command::Evaluate { exact } => evaluate(
            cli,
            &cfg,
            *exact,
            max_enum.unwrap_or(DEFAULT_MAX_COMPOSITIONS),
        ),
        Command::Tradeoff { augment } => tradeoff(cli, &cfg, augment),
    }
}

fn show(r: &Rational) -> String {
    format!(
        "{} ({})",
        exact::format_fraction(r),
        exact::format_significant(r, 12)
    )
}

fn one_based(items: &[usize]) -> String {
    let parts: Vec<String> = items.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", parts.join(", "))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_list(text: &str, what: &'static str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidParameter {
                    field: what,
                    reason: format!("{s:?} is not a non-negative integer"),
                })
        })
        .collect()
}

fn parse_budgets(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let bounds = parse_list(&format!("{lo},{hi}"), "--t")?;
        return Ok((bounds[0] as usize..=bounds[1] as usize).collect());
    }
    Ok(parse_list(text, "--t")?
        .into_iter()
        .map(|t| t as usize)
        .collect())
}

fn budgets(cli: &Cli, cfg: &SystemConfig) -> Result<Vec<usize>> {
    let budgets = match &cli.budgets {
        Some(text) => parse_budgets(text)?,
        None => vec![cfg.budget()],
    };
    if budgets.is_empty() {
        return Err(Error::InvalidParameter {
            field: "--t",
            reason: "empty budget list".into(),
        });
    }
    for &t in &budgets {
        cfg.with_budget(t)?;
    }
    Ok(budgets)
}

/// The single budget used by place/simulate/verify.
fn single_budget(cli: &Cli, cfg: &SystemConfig) -> Result<SystemConfig> {
    let list = budgets(cli, cfg)?;
    if list.len() != 1 {
        return Err(Error::InvalidParameter {
            field: "--t",
            reason: "this command takes a single budget".into(),
        });
    }
    cfg.with_budget(list[0])
}

fn workers() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::InvalidParameter {
                field: THREADS_ENV,
                reason: format!("{v:?} is not a positive integer"),
            }),
        Err(_) => Ok(None),
    }
}

fn layout(cfg: &SystemConfig) -> Result<ExitCode> {
    let layout = cfg.layout();
    println!("expected population = {:?}", layout.expected());
    println!("alpha = {}", layout.alpha());
    println!("base population = {:?}", layout.base());
    println!("virtual caches = {}", layout.virtual_count());
    for cache in 0..layout.caches() {
        let range = layout.virtual_range(cache);
        let members: Vec<usize> = range.collect();
        println!("  cache {} -> {}", cache + 1, one_based(&members));
    }
    Ok(ExitCode::SUCCESS)
}

fn place(cli: &Cli, cfg: &SystemConfig, table: bool, max_tuples: u64) -> Result<ExitCode> {
    let cfg = single_budget(cli, cfg)?;
    let layout = cfg.layout();
    let t = cfg.budget();
    let gamma = placement::storage_allocation(&layout, t);
    println!("t = {t}");
    println!("S = {}", placement::subpacketization(&layout, t));
    for (cache, g) in gamma.fractions().iter().enumerate() {
        println!("gamma[{}] = {}", cache + 1, show(g));
    }
    println!("sum gamma = {}", show(&gamma.total()));
    if table {
        let map = placement::build_placement(&layout, t, cfg.files(), max_tuples)?;
        let mut out = output(cli.out.as_deref())?;
        map.write_table(&mut out)?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn instance(cli: &Cli, cfg: &SystemConfig, random_demands: bool) -> Result<PopulationInstance> {
    let mode = if random_demands {
        DemandMode::Random
    } else {
        DemandMode::WorstCase
    };
    let Some(text) = &cli.population else {
        return model::sample_population(cfg, cli.seed, mode);
    };
    let population = parse_list(text, "--v")?;
    let users: u64 = population.iter().sum();
    if population.len() != cfg.caches() || users != cfg.users() {
        return Err(Error::PopulationMismatch {
            population,
            reason: format!(
                "need {} entries summing to K = {}",
                cfg.caches(),
                cfg.users()
            ),
        });
    }
    match mode {
        DemandMode::WorstCase if cfg.files() < users => Err(Error::WorstCaseNeedsEnoughFiles {
            users,
            files: cfg.files(),
        }),
        DemandMode::WorstCase => Ok(PopulationInstance::worst_case(population)),
        DemandMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let demands = (0..users)
                .map(|_| rng.random_range(0..cfg.files()) as usize)
                .collect();
            PopulationInstance::new(population, demands)
        }
    }
}

fn simulate(
    cli: &Cli,
    cfg: &SystemConfig,
    random_demands: bool,
    max_tuples: u64,
) -> Result<ExitCode> {
    let cfg = single_budget(cli, cfg)?;
    let instance = instance(cli, &cfg, random_demands)?;
    let scheme = Scheme::new(cfg.layout(), cfg.budget(), cfg.files(), max_tuples)?;
    let trace = delivery::simulate_delivery(&instance, &scheme)?;

    println!("V = {:?}", instance.population());
    println!("rounds = {}", trace.rounds().len());
    for (j, round) in trace.rounds().iter().enumerate() {
        let kind = match round.kind {
            RoundKind::Full => "full".to_string(),
            RoundKind::Deficit => format!("deficit A = {}", one_based(&round.deficit)),
        };
        println!(
            "round {}: V^j = {:?}, {kind}, {} transmissions, {} pruned",
            j + 1,
            round.population,
            round.transmissions.len(),
            round.pruned
        );
    }
    println!("transmissions = {}", trace.total_transmissions());
    println!("S = {}", trace.subpacketization());
    println!("T = {}", show(&trace.delay()));
    if let Some(path) = &cli.out {
        let mut out = output(Some(path))?;
        trace.write_dump(&mut out)?;
        out.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(
    cli: &Cli,
    cfg: &SystemConfig,
    random_demands: bool,
    max_tuples: u64,
) -> Result<ExitCode> {
    let cfg = single_budget(cli, cfg)?;
    let instance = instance(cli, &cfg, random_demands)?;
    let scheme = Scheme::new(cfg.layout(), cfg.budget(), cfg.files(), max_tuples)?;
    let report = codec::verify_instance(&instance, &scheme, cli.seed, cli.payload_bytes)?;
    println!("V = {:?}", instance.population());
    for (user, outcome) in report.outcomes.iter().enumerate() {
        let status = match outcome {
            UserOutcome::Decoded => "ok".to_string(),
            UserOutcome::Corrupted => "FAIL: decoded bytes differ".to_string(),
            UserOutcome::Failed(e) => format!("FAIL: {e}"),
        };
        println!(
            "user {} (cache {}, file {}): {status}",
            user + 1,
            instance.cache_of(user) + 1,
            instance.demands()[user] + 1
        );
    }
    if report.all_decoded() {
        println!("all {} users decoded", report.outcomes.len());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} of {} users failed",
            report.failures(),
            report.outcomes.len()
        );
        Ok(ExitCode::from(2))
    }
}

fn evaluate(cli: &Cli, cfg: &SystemConfig, exact: bool, max_compositions: u64) -> Result<ExitCode> {
    let budgets = budgets(cli, cfg)?;
    let options = EvalOptions {
        method: if exact { Method::Exact } else { Method::Sbn },
        samples: cli.samples,
        seed: cli.seed,
        workers: workers()?,
        max_compositions,
    };
    let reports = evaluate::evaluate_sweep(cfg, &budgets, &options)?;
    let mut out = output(cli.out.as_deref())?;
    match cli.format {
        Format::Csv => evaluate::write_csv(&reports, &mut out)?,
        Format::Json => evaluate::write_json(&reports, &mut out)?,
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn tradeoff(cli: &Cli, cfg: &SystemConfig, augment: &str) -> Result<ExitCode> {
    let augment = parse_list(augment, "--augment")?;
    let expected = cfg.expected_population();
    let augmented: Vec<u64> = expected.iter().zip(&augment).map(|(a, b)| a + b).collect();
    println!("expected population = {expected:?}");
    println!("augmented population = {augmented:?}");
    for t in budgets(cli, cfg)? {
        let r = evaluate::virtual_user_tradeoff(&expected, &augment, t)?;
        println!("t = {t}");
        println!("  alpha: {} -> {}", r.alpha_before, r.alpha_after);
        println!(
            "  S: {} -> {} (ratio {})",
            r.subpacketization_before,
            r.subpacketization_after,
            show(&r.subpacketization_ratio)
        );
        println!("  alpha reduction factor = {}", show(&r.alpha_reduction));
        println!("  T: {} -> {}", show(&r.delay_before), show(&r.delay_after));
    }
    Ok(ExitCode::SUCCESS)
}
