use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use linucb::evaluator::{run_replay, RejectionFilter, ReplayOptions, ReplayPlan};
use linucb::eventlog::{read_events, write_events};
use linucb::harness::{
    read_rows, run_sweep_files, summarize, tuned_table, write_rows, PolicyEnv, PolicySpec,
    SweepSpec,
};
use linucb::policies::OffsetTable;
use linucb::synthworld::{
    gen_stream, reduce_features, synthetic_profiles, FeatureConfig, ProfileSet, WorldSpec,
};
use linucb::RngSeed;

#[derive(Parser)]
#[command(
    name = "linucb",
    version,
    about = "Contextual bandit experiments on logged data"
)]
struct Cli {
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a synthetic world and write a uniformly logged event stream.
    Generate {
        /// World configuration (TOML).
        #[arg(long)]
        world: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        events: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the world's true coefficients as JSON.
        #[arg(long)]
        world_out: Option<PathBuf>,
        /// Also write warm-start offsets fitted on a separate stream.
        #[arg(long)]
        offsets_out: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        offset_events: usize,
    },
    /// Replay one policy over a stream.
    Evaluate {
        #[arg(long)]
        stream: PathBuf,
        /// `name` or `name:param`, e.g. `linucb-disjoint:2.36`.
        #[arg(long)]
        policy: String,
        /// Retained events to collect (both buckets together).
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_fraction: f64,
        #[arg(long, default_value_t = 1.0)]
        data_fraction: f64,
        /// Rejection-sample a non-uniform log; without a value, uses the
        /// stream's smallest propensity.
        #[arg(long, num_args = 0..=1, default_missing_value = "auto")]
        rejection: Option<String>,
        #[arg(long)]
        warm_offsets: Option<PathBuf>,
    },
    /// Run a sweep spec and write one CSV row per point and bucket.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use only `--seed` instead of the spec's seed list.
        #[arg(long)]
        single_seed: bool,
    },
    /// Reduce raw user/article profiles to 6-dim membership features.
    Features {
        /// Profile set (JSON); a synthetic one is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Feature configuration (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate sweep CSVs over seeds.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the parameter chosen per algorithm and fraction.
        #[arg(long)]
        tuned: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let seed = RngSeed(cli.seed);
    match cli.command {
        Command::Generate {
            world,
            events,
            out,
            world_out,
            offsets_out,
            offset_events,
        } => {
            let spec = WorldSpec::read(&world)
                .with_context(|| format!("reading world spec {}", world.display()))?;
            let world = spec.build()?;
            let stream = gen_stream(&world, events, &mut seed.rng())?;
            write_events(&out, &stream)?;
            if let Some(p) = world_out {
                std::fs::write(&p, serde_json::to_string_pretty(&world)?)?;
            }
            if let Some(p) = offsets_out {
                let prior = gen_stream(&world, offset_events, &mut seed.derive(1).rng())?;
                let table = OffsetTable::from_logged(&prior)?;
                std::fs::write(&p, table.to_lines().join("\n") + "\n")?;
            }
            eprintln!("wrote {events} events to {}", out.display());
        }
        Command::Evaluate {
            stream,
            policy,
            trials,
            learning_fraction,
            data_fraction,
            rejection,
            warm_offsets,
        } => {
            let events = read_events(&stream)?;
            let offsets = warm_offsets.map(OffsetTable::read).transpose()?;
            let mut env = PolicyEnv::from_stream(&events)?;
            env.offsets = offsets.as_ref();
            let spec = PolicySpec::parse(&policy)?;
            let mut p = spec.build(&env)?;
            let rejection = match rejection.as_deref() {
                None => None,
                Some("auto") => Some(RejectionFilter::from_stream(&events)?),
                Some(v) => Some(RejectionFilter::new(
                    v.parse()
                        .with_context(|| format!("bad --rejection value {v}"))?,
                )?),
            };
            let plan = ReplayPlan::new(trials)
                .learning_fraction(learning_fraction)
                .data_fraction(data_fraction)
                .options(ReplayOptions {
                    rejection,
                    ..ReplayOptions::default()
                });
            let report = run_replay(&mut p, &events, &plan, &mut seed.rng())?;
            let bucket = |r: &linucb::ReplayResult| {
                serde_json::json!({
                    "ctr": r.ctr(),
                    "standard_error": r.standard_error(),
                    "retained": r.retained,
                    "consumed": r.consumed,
                    "updates": r.updates,
                    "exhausted": r.exhausted,
                })
            };
            let summary = serde_json::json!({
                "policy": spec.to_string(),
                "seed": cli.seed,
                "learning": bucket(&report.learning),
                "deployment": bucket(&report.deployment),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Sweep {
            spec,
            out,
            single_seed,
        } => {
            let mut sweep = SweepSpec::read(&spec)
                .with_context(|| format!("reading sweep spec {}", spec.display()))?;
            if single_seed {
                sweep.seeds = vec![cli.seed];
            }
            let result = run_sweep_files(&sweep)?;
            write_rows(&result.rows, output(out.as_ref())?)?;
            if let Some(p) = &sweep.payoff_dump {
                write_rows(&result.payoffs, output(Some(p))?)?;
            }
            let flagged = result.rows.iter().filter(|r| r.exhausted).count();
            if flagged > 0 {
                eprintln!(
                    "warning: {flagged} rows ran out of stream before reaching {} trials",
                    sweep.trials
                );
            }
        }
        Command::Features { input, config, out } => {
            let set: ProfileSet = match input {
                Some(p) => serde_json::from_reader(io::BufReader::new(
                    File::open(&p).with_context(|| format!("opening {}", p.display()))?,
                ))?,
                None => synthetic_profiles(500, 50, 5, 10_000, &mut seed.derive(1).rng()),
            };
            let cfg: FeatureConfig = match config {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => FeatureConfig::default(),
            };
            let reduced = reduce_features(&set, &cfg, &mut seed.rng())?;
            let mut w = output(out.as_ref())?;
            serde_json::to_writer_pretty(&mut w, &reduced)?;
            writeln!(w)?;
        }
        Command::Report { inputs, out, tuned } => {
            let mut rows = Vec::new();
            for p in &inputs {
                rows.extend(read_rows(p).with_context(|| format!("reading {}", p.display()))?);
            }
            if rows.is_empty() {
                bail!("no rows in the given files");
            }
            let summary = summarize(&rows);
            write_rows(&summary, output(out.as_ref())?)?;
            if let Some(p) = tuned {
                write_rows(&tuned_table(&summary), output(Some(&p))?)?;
            }
        }
    }
    Ok(())
}
