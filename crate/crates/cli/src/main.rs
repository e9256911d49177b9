mod chat;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hdial::acts::{DomainId, SystemUtterance};
use hdial::config::{ExperimentConfig, ExperimentMode};
use hdial::harness::{
    adapt_experiment, adapted_policies, compare_curves, env_mode_of, evaluate, policy_domains,
    train, LearningCurve,
};
use hdial::policy::GpPolicies;
use hdial::rng::{stream_rng, Stream};
use hdial::smdp::{run_episode, RunMode};
use hdial::user::sample_goal;
use hdial::world::World;

const MANIFEST_FORMAT: &str = "hdial-manifest";
const MANIFEST_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "hdial",
    version,
    about = "Hierarchical GP dialogue policies: train, evaluate, compare, adapt, chat"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML); unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// A seed or a comma-separated list of seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// hier or flat.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Venue databases written by `gen-db` instead of the built-in ones.
    #[arg(long, global = true)]
    world: Option<PathBuf>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train policies from the prior and write learning curves.
    Train,
    /// Greedy evaluation of saved policies on fresh simulated users.
    Evaluate {
        /// Directory holding one model file per domain.
        #[arg(long)]
        policies: PathBuf,
        /// Number of dialogues; defaults to the per-point count of the config.
        #[arg(long)]
        dialogues: Option<usize>,
    },
    /// Paired-seed hierarchical versus flat training.
    Compare,
    /// Pretrained-then-adapted versus from-scratch training, or with
    /// `--policies`, adapt saved master models to the option action set.
    Adapt {
        #[arg(long)]
        policies: Option<PathBuf>,
    },
    /// Play the user against saved policies.
    Chat {
        #[arg(long)]
        policies: PathBuf,
    },
    /// Write the generated venue databases.
    GenDb,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    version: u32,
    command: &'a str,
    build: &'static str,
    dictionary_cap: usize,
    config: &'a ExperimentConfig,
}

struct Ctx {
    config: ExperimentConfig,
    world: World,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn new(c: &Common) -> anyhow::Result<Self> {
        let mut config = match &c.config {
            Some(p) => {
                ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(m) = &c.mode {
            config.mode = match m.parse()? {
                ExperimentMode::Adapt => bail!("--mode takes hier or flat"),
                m => m,
            };
        }
        if !c.seed.is_empty() {
            config.seeds = c.seed.clone();
        }
        config.validate()?;
        let world = match &c.world {
            Some(p) => World::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => World::builtin(config.world_seed)?,
        };
        let out = c
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("hdial-out"));
        Ok(Self {
            config,
            world,
            out,
            quiet: c.quiet,
        })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn prepare_out(&self, command: &str) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        let manifest = Manifest {
            format: MANIFEST_FORMAT,
            version: MANIFEST_VERSION,
            command,
            build: env!("HDIAL_BUILD"),
            dictionary_cap: self.config.gp.dictionary_cap,
            config: &self.config,
        };
        std::fs::write(self.out.join("manifest.toml"), toml::to_string(&manifest)?)?;
        Ok(())
    }

    fn save_curves(&self, prefix: &str, curves: &[LearningCurve]) -> anyhow::Result<()> {
        for c in curves {
            c.save(&self.out.join(format!("{prefix}-seed{}.csv", c.seed)))?;
        }
        Ok(())
    }
}

/// A gnuplot script plotting success against dialogues for each curve file.
fn gnuplot_script(files: &[String]) -> String {
    let plots: Vec<String> = files
        .iter()
        .map(|f| {
            format!(
                "'{f}' using 1:2 with linespoints title '{}'",
                f.trim_end_matches(".csv")
            )
        })
        .collect();
    format!(
        "set datafile separator ','\nset key bottom right\nset xlabel 'training dialogues'\nset ylabel 'success rate'\nset yrange [0:1]\nplot {}\n",
        plots.join(", \\\n     ")
    )
}

fn write_plot(ctx: &Ctx, files: Vec<String>) -> anyhow::Result<()> {
    std::fs::write(ctx.out.join("curves.gp"), gnuplot_script(&files))?;
    Ok(())
}

fn cmd_train(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.prepare_out("train")?;
    let env_mode = env_mode_of(ctx.config.mode);
    let runs = train(&ctx.world, &ctx.config, env_mode)?;
    let mut files = Vec::new();
    for r in &runs {
        r.policies
            .save_dir(&ctx.out.join(format!("policies-seed{}", r.seed)))?;
        let name = format!("curve-seed{}.csv", r.seed);
        r.curve.save(&ctx.out.join(&name))?;
        files.push(name);
        if let Some(p) = r.curve.last() {
            ctx.say(format!(
                "seed {}: success {:.3} (master {:.3}, sub {:.3}), mean return {:.2} after {} dialogues",
                r.seed, p.success_rate, p.master_success_rate, p.sub_success_rate, p.mean_return, p.dialogues_seen
            ));
        }
    }
    write_plot(ctx, files)?;
    ctx.say(format!("wrote {}", ctx.out.display()));
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, dir: &Path, dialogues: Option<usize>) -> anyhow::Result<()> {
    let env_mode = env_mode_of(ctx.config.mode);
    let policies = GpPolicies::load_dir(dir, &policy_domains(env_mode))
        .with_context(|| format!("loading policies from {}", dir.display()))?;
    let n = dialogues.unwrap_or(ctx.config.eval_dialogues_per_point);
    let c = &ctx.config;
    for &seed in &c.seeds {
        let r = evaluate(
            &policies,
            &ctx.world,
            env_mode,
            &c.hierarchy,
            &c.user,
            true,
            n,
            seed,
        )?;
        println!(
            "{}",
            format_args!(
                "seed {seed}: {} dialogues, success {:.3}, master {:.3}, sub {:.3}, mean return {:.2}",
                r.dialogues, r.success_rate, r.master_success_rate, r.sub_success_rate, r.mean_return
            )
        );
    }
    Ok(())
}

fn cmd_compare(ctx: &Ctx) -> anyhow::Result<()> {
    ctx.prepare_out("compare")?;
    let curves = |mode| -> anyhow::Result<Vec<LearningCurve>> {
        let cfg = ExperimentConfig {
            mode,
            ..ctx.config.clone()
        };
        Ok(train(&ctx.world, &cfg, env_mode_of(mode))?
            .into_iter()
            .map(|t| t.curve)
            .collect())
    };
    let hier = curves(ExperimentMode::Hierarchical)?;
    let flat = curves(ExperimentMode::Flat)?;
    ctx.save_curves("hier", &hier)?;
    ctx.save_curves("flat", &flat)?;
    let report = compare_curves(hier, flat)?;
    report.write_csv(std::fs::File::create(ctx.out.join("compare.csv"))?)?;
    write_plot(ctx, curve_files(&ctx.config.seeds, &["hier", "flat"]))?;
    ctx.say(format!("hierarchical minus flat {}", report.summary()));
    Ok(())
}

fn curve_files(seeds: &[u64], prefixes: &[&str]) -> Vec<String> {
    prefixes
        .iter()
        .flat_map(|p| seeds.iter().map(move |s| format!("{p}-seed{s}.csv")))
        .collect()
}

fn cmd_adapt(ctx: &Ctx, pretrained: Option<&Path>) -> anyhow::Result<()> {
    ctx.prepare_out("adapt")?;
    if let Some(dir) = pretrained {
        let masters = GpPolicies::load_dir(dir, &[DomainId::Restaurant, DomainId::Hotel])
            .with_context(|| format!("loading policies from {}", dir.display()))?;
        let adapted = adapted_policies(&ctx.world, &ctx.config, &masters)?;
        let dest = ctx.out.join("policies");
        adapted.save_dir(&dest)?;
        ctx.say(format!("wrote adapted policies to {}", dest.display()));
        return Ok(());
    }
    let outcome = adapt_experiment(&ctx.world, &ctx.config)?;
    ctx.save_curves("adapted", &outcome.pretrained)?;
    ctx.save_curves("scratch", &outcome.scratch)?;
    write_plot(ctx, curve_files(&ctx.config.seeds, &["adapted", "scratch"]))?;
    for (a, s) in outcome.pretrained.iter().zip(&outcome.scratch) {
        ctx.say(format!(
            "seed {}: mean success up to 1000 dialogues {:.3} adapted vs {:.3} scratch; final {:.3} vs {:.3}",
            a.seed,
            a.mean_success_upto(1000),
            s.mean_success_upto(1000),
            a.last().map_or(0.0, |p| p.success_rate),
            s.last().map_or(0.0, |p| p.success_rate)
        ));
    }
    Ok(())
}

fn cmd_chat(ctx: &Ctx, dir: &Path) -> anyhow::Result<()> {
    let env_mode = env_mode_of(ctx.config.mode);
    let policies = GpPolicies::load_dir(dir, &policy_domains(env_mode))
        .with_context(|| format!("loading policies from {}", dir.display()))?;
    let seed = ctx.config.seeds[0];
    let goal = sample_goal(
        &ctx.world,
        &ctx.config.user,
        true,
        &mut stream_rng(seed, Stream::Misc, 0),
    )?;
    let stdin = std::io::stdin();
    let mut user = chat::HumanUser::new(goal.clone(), stdin.lock(), std::io::stdout());
    writeln!(
        user.output(),
        "{}\nType `help` for the act grammar.",
        chat::describe_goal(&goal)
    )?;
    let mut rng = stream_rng(seed, Stream::EvalPolicy, 0);
    let log = run_episode(
        env_mode,
        &policies,
        &ctx.world,
        &mut user,
        &ctx.config.hierarchy,
        &mut rng,
        RunMode::Eval,
    )?;
    if log.turns.last().is_some_and(|t| t.user_act.is_none()) {
        writeln!(
            user.output(),
            "system: {}",
            chat::render(&SystemUtterance::Bye)
        )?;
    }
    writeln!(
        user.output(),
        "{} after {} turns, return {}",
        if log.success.overall {
            "success"
        } else {
            "failure"
        },
        log.length,
        log.total_return
    )?;
    Ok(())
}

fn cmd_gen_db(ctx: &Ctx, seed_given: bool) -> anyhow::Result<()> {
    let world = if seed_given {
        World::builtin(ctx.config.seeds[0])?
    } else {
        ctx.world.clone()
    };
    std::fs::create_dir_all(&ctx.out)?;
    let path = ctx.out.join("world.json");
    world.save(&path)?;
    for d in [DomainId::Restaurant, DomainId::Hotel] {
        ctx.say(format!("{d}: {} venues", world.db(d)?.entities.len()));
    }
    ctx.say(format!("wrote {}", path.display()));
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx::new(&cli.common)?;
    match &cli.command {
        Command::Train => cmd_train(&ctx),
        Command::Evaluate {
            policies,
            dialogues,
        } => cmd_evaluate(&ctx, policies, *dialogues),
        Command::Compare => cmd_compare(&ctx),
        Command::Adapt { policies } => cmd_adapt(&ctx, policies.as_deref()),
        Command::Chat { policies } => cmd_chat(&ctx, policies),
        Command::GenDb => cmd_gen_db(&ctx, !cli.common.seed.is_empty()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 for numerical failures anywhere in the chain, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e.chain().any(|c| {
        c.downcast_ref::<hdial::Error>()
            .is_some_and(hdial::Error::is_numerical)
    });
    if numerical {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_exit_with_two() {
        let e = anyhow::Error::new(hdial::Error::Numerical("singular gram block".into()))
            .context("training");
        assert_eq!(exit_code(&e), 2);
        assert_eq!(
            exit_code(&anyhow::Error::new(hdial::Error::Config("bad".into()))),
            1
        );
    }

    #[test]
    fn plot_script_lists_every_file() {
        let s = gnuplot_script(&["a-seed1.csv".into(), "b-seed1.csv".into()]);
        assert!(s.contains("'a-seed1.csv' using 1:2"));
        assert!(s.contains("title 'b-seed1'"));
    }
}
