//! Experiment orchestration: training with periodic greedy evaluation,
//! flat-versus-hierarchical comparison, and the adaptation experiment.
//!
//! Every random stream is derived from `(seed, stream, dialogue index)`, so
//! curves are a pure function of the configuration. Independent seeds run on
//! separate threads.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acts::{ActionId, DomainId};
use crate::adapt::{adapt_policy, PolicyTransferSpec};
use crate::config::{ExperimentConfig, ExperimentMode};
use crate::env::EnvMode;
use crate::error::{Error, Result};
use crate::policy::{GpPolicies, Policy};
use crate::rng::{stream_rng, Stream};
use crate::smdp::{run_episode, EpisodeLog, HierarchyConfig, RunMode};
use crate::user::{UserConfig, UserSimulator};
use crate::world::World;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub dialogues_seen: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub sub_success_rate: f64,
    pub master_success_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearningCurve {
    pub seed: u64,
    pub points: Vec<EvalPoint>,
}

impl LearningCurve {
    pub fn last(&self) -> Option<&EvalPoint> {
        self.points.last()
    }

    pub fn at(&self, dialogues_seen: usize) -> Option<&EvalPoint> {
        self.points
            .iter()
            .find(|p| p.dialogues_seen == dialogues_seen)
    }

    /// Mean success over the evaluation points with `dialogues_seen <= upto`.
    pub fn mean_success_upto(&self, upto: usize) -> f64 {
        let pts: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.dialogues_seen <= upto)
            .map(|p| p.success_rate)
            .collect();
        if pts.is_empty() {
            0.0
        } else {
            pts.iter().sum::<f64>() / pts.len() as f64
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.points {
            out.serialize(p)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(seed: u64, r: R) -> Result<Self> {
        let mut points = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize() {
            points.push(row?);
        }
        Ok(Self { seed, points })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Pointwise mean of several curves sampled at the same points.
pub fn mean_curve(curves: &[LearningCurve]) -> Result<Vec<EvalPoint>> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Config("no curves to average".into()))?;
    let n = curves.len() as f64;
    first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut acc = EvalPoint {
                dialogues_seen: p.dialogues_seen,
                success_rate: 0.0,
                mean_return: 0.0,
                sub_success_rate: 0.0,
                master_success_rate: 0.0,
            };
            for c in curves {
                let q = c
                    .points
                    .get(i)
                    .filter(|q| q.dialogues_seen == p.dialogues_seen)
                    .ok_or_else(|| {
                        Error::Config("curves are sampled at different points".into())
                    })?;
                acc.success_rate += q.success_rate / n;
                acc.mean_return += q.mean_return / n;
                acc.sub_success_rate += q.sub_success_rate / n;
                acc.master_success_rate += q.master_success_rate / n;
            }
            Ok(acc)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dialogues: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub master_success_rate: f64,
    pub sub_success_rate: f64,
}

impl EvalReport {
    fn from_logs<'a>(logs: impl Iterator<Item = &'a EpisodeLog>) -> Self {
        let mut r = EvalReport::default();
        for log in logs {
            r.dialogues += 1;
            r.success_rate += f64::from(u8::from(log.success.overall));
            r.master_success_rate += f64::from(u8::from(log.success.master_part));
            r.sub_success_rate += f64::from(u8::from(log.success.sub_part));
            r.mean_return += log.total_return;
        }
        if r.dialogues > 0 {
            let n = r.dialogues as f64;
            r.success_rate /= n;
            r.master_success_rate /= n;
            r.sub_success_rate /= n;
            r.mean_return /= n;
        }
        r
    }

    fn point(&self, dialogues_seen: usize) -> EvalPoint {
        EvalPoint {
            dialogues_seen,
            success_rate: self.success_rate,
            mean_return: self.mean_return,
            sub_success_rate: self.sub_success_rate,
            master_success_rate: self.master_success_rate,
        }
    }
}

/// Where the user goals and exploration noise for one dialogue come from.
#[derive(Clone, Copy, Debug)]
pub struct DialogueSeeds {
    pub seed: u64,
    pub user: Stream,
    pub policy: Stream,
    pub index: u64,
}

/// Runs one dialogue with a fresh simulated user.
#[allow(clippy::too_many_arguments)]
pub fn run_dialogue(
    policy: &dyn Policy,
    world: &World,
    env_mode: EnvMode,
    hierarchy: &HierarchyConfig,
    user_config: &UserConfig,
    with_sub_task: bool,
    seeds: DialogueSeeds,
    mode: RunMode,
) -> Result<EpisodeLog> {
    let user_rng = stream_rng(seeds.seed, seeds.user, seeds.index);
    let mut policy_rng = stream_rng(seeds.seed, seeds.policy, seeds.index);
    let mut user = UserSimulator::sampled(world, user_config.clone(), with_sub_task, user_rng)?;
    run_episode(
        env_mode,
        policy,
        world,
        &mut user,
        hierarchy,
        &mut policy_rng,
        mode,
    )
}

/// Greedy evaluation on `n` fresh users. The users depend only on `seed`, so
/// every evaluation point of a run sees the same goals.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    policy: &dyn Policy,
    world: &World,
    env_mode: EnvMode,
    hierarchy: &HierarchyConfig,
    user_config: &UserConfig,
    with_sub_task: bool,
    n: usize,
    seed: u64,
) -> Result<EvalReport> {
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        let seeds = DialogueSeeds {
            seed,
            user: Stream::EvalUser,
            policy: Stream::EvalPolicy,
            index: i as u64,
        };
        logs.push(run_dialogue(
            policy,
            world,
            env_mode,
            hierarchy,
            user_config,
            with_sub_task,
            seeds,
            RunMode::Eval,
        )?);
    }
    Ok(EvalReport::from_logs(logs.iter()))
}

/// Domains whose policies a mode trains.
pub fn policy_domains(env_mode: EnvMode) -> Vec<DomainId> {
    match env_mode {
        EnvMode::Hierarchical => vec![
            DomainId::Restaurant,
            DomainId::Hotel,
            DomainId::Booking,
            DomainId::Payment,
        ],
        EnvMode::Flat => vec![DomainId::RestaurantFlat, DomainId::HotelFlat],
    }
}

/// Feeds every transition episode of a dialogue to its policy.
pub fn learn_from(policies: &mut GpPolicies, log: &EpisodeLog) -> Result<()> {
    for (domain, episodes) in &log.transitions {
        let model = policies.get_mut(*domain)?;
        for ep in episodes {
            model.gptd_update(ep)?;
        }
    }
    Ok(())
}

/// Settings for one training run of one seed.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub env_mode: EnvMode,
    pub hierarchy: HierarchyConfig,
    pub user: UserConfig,
    pub with_sub_task: bool,
    pub n_dialogues: usize,
    pub eval_every: usize,
    pub eval_dialogues: usize,
    pub seed: u64,
    /// Training streams start here, so a continued run does not replay users.
    pub first_index: u64,
    /// Training stream for the users; pretraining uses its own.
    pub user_stream: Stream,
}

impl RunSpec {
    pub fn from_config(config: &ExperimentConfig, env_mode: EnvMode, seed: u64) -> Self {
        Self {
            env_mode,
            hierarchy: config.hierarchy.clone(),
            user: config.user.clone(),
            with_sub_task: true,
            n_dialogues: config.n_train_dialogues,
            eval_every: config.eval_every,
            eval_dialogues: config.eval_dialogues_per_point,
            seed,
            first_index: 0,
            user_stream: Stream::TrainUser,
        }
    }
}

/// Trains `policies` in place, evaluating before the first dialogue and after
/// every `eval_every` dialogues. `eval_every = 0` skips evaluation.
pub fn train_run(
    world: &World,
    spec: &RunSpec,
    policies: &mut GpPolicies,
) -> Result<LearningCurve> {
    let eval = |p: &GpPolicies| {
        evaluate(
            p,
            world,
            spec.env_mode,
            &spec.hierarchy,
            &spec.user,
            spec.with_sub_task,
            spec.eval_dialogues,
            spec.seed,
        )
    };
    let mut points = Vec::new();
    if spec.eval_every > 0 {
        points.push(eval(policies)?.point(0));
    }
    for i in 0..spec.n_dialogues {
        let seeds = DialogueSeeds {
            seed: spec.seed,
            user: spec.user_stream,
            policy: Stream::TrainPolicy,
            index: spec.first_index + i as u64,
        };
        let log = run_dialogue(
            policies,
            world,
            spec.env_mode,
            &spec.hierarchy,
            &spec.user,
            spec.with_sub_task,
            seeds,
            RunMode::Train,
        )?;
        learn_from(policies, &log)?;
        let seen = i + 1;
        if spec.eval_every > 0 && seen % spec.eval_every == 0 {
            points.push(eval(policies)?.point(seen));
        }
    }
    Ok(LearningCurve {
        seed: spec.seed,
        points,
    })
}

/// Fresh prior policies for a mode.
pub fn fresh_policies(
    world: &World,
    config: &ExperimentConfig,
    env_mode: EnvMode,
) -> Result<GpPolicies> {
    GpPolicies::fresh(
        &world.ontology,
        &policy_domains(env_mode),
        &config.kernel,
        &config.gp,
    )
}

/// Runs `f` for every seed, one thread per seed, and returns the results in
/// seed order.
pub fn for_each_seed<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let f = &f;
                s.spawn(move || f(seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

pub struct TrainedSeed {
    pub seed: u64,
    pub policies: GpPolicies,
    pub curve: LearningCurve,
}

/// Trains every seed of `config` in the given mode from the prior.
pub fn train(
    world: &World,
    config: &ExperimentConfig,
    env_mode: EnvMode,
) -> Result<Vec<TrainedSeed>> {
    config.validate()?;
    for_each_seed(&config.seeds, |seed| {
        let mut policies = fresh_policies(world, config, env_mode)?;
        let curve = train_run(
            world,
            &RunSpec::from_config(config, env_mode, seed),
            &mut policies,
        )?;
        Ok(TrainedSeed {
            seed,
            policies,
            curve,
        })
    })
}

pub fn env_mode_of(mode: ExperimentMode) -> EnvMode {
    match mode {
        ExperimentMode::Flat => EnvMode::Flat,
        ExperimentMode::Hierarchical | ExperimentMode::Adapt => EnvMode::Hierarchical,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub dialogues_seen: usize,
    pub left_success: f64,
    pub right_success: f64,
    pub delta_success: f64,
    pub delta_master: f64,
    pub delta_sub: f64,
}

pub struct CompareReport {
    pub left: Vec<LearningCurve>,
    pub right: Vec<LearningCurve>,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn final_row(&self) -> Option<&CompareRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        match self.final_row() {
            Some(r) => format!(
                "at {} dialogues: success {:.3} vs {:.3} (delta {:+.3}), master delta {:+.3}, sub delta {:+.3}",
                r.dialogues_seen, r.left_success, r.right_success, r.delta_success, r.delta_master, r.delta_sub
            ),
            None => "no evaluation points".into(),
        }
    }
}

/// Paired-seed comparison of two configurations: `left - right` per point.
pub fn compare(
    world: &World,
    left: &ExperimentConfig,
    right: &ExperimentConfig,
) -> Result<CompareReport> {
    let l: Vec<LearningCurve> = train(world, left, env_mode_of(left.mode))?
        .into_iter()
        .map(|t| t.curve)
        .collect();
    let r: Vec<LearningCurve> = train(world, right, env_mode_of(right.mode))?
        .into_iter()
        .map(|t| t.curve)
        .collect();
    compare_curves(l, r)
}

pub fn compare_curves(
    left: Vec<LearningCurve>,
    right: Vec<LearningCurve>,
) -> Result<CompareReport> {
    let lm = mean_curve(&left)?;
    let rm = mean_curve(&right)?;
    let rows = lm
        .iter()
        .filter_map(|a| {
            rm.iter()
                .find(|b| b.dialogues_seen == a.dialogues_seen)
                .map(|b| (a, b))
        })
        .map(|(a, b)| CompareRow {
            dialogues_seen: a.dialogues_seen,
            left_success: a.success_rate,
            right_success: b.success_rate,
            delta_success: a.success_rate - b.success_rate,
            delta_master: a.master_success_rate - b.master_success_rate,
            delta_sub: a.sub_success_rate - b.sub_success_rate,
        })
        .collect();
    Ok(CompareReport { left, right, rows })
}

/// Master-only pretraining: masters without options on goals without
/// sub-tasks. Returns the pretrained master models.
pub fn pretrain_masters(world: &World, config: &ExperimentConfig, seed: u64) -> Result<GpPolicies> {
    let masters = [DomainId::Restaurant, DomainId::Hotel];
    let mut policies = GpPolicies::fresh(&world.ontology, &masters, &config.kernel, &config.gp)?;
    let spec = RunSpec {
        env_mode: EnvMode::Hierarchical,
        hierarchy: HierarchyConfig {
            options_enabled: false,
            ..config.hierarchy.clone()
        },
        user: config.user.clone(),
        with_sub_task: false,
        n_dialogues: config.pretrain_dialogues,
        eval_every: 0,
        eval_dialogues: 0,
        seed,
        first_index: 0,
        user_stream: Stream::Pretrain,
    };
    train_run(world, &spec, &mut policies)?;
    Ok(policies)
}

/// Turns pretrained masters into the starting point for hierarchical training:
/// masters adapted to the action set with options, sub-domains fresh.
pub fn adapted_policies(
    world: &World,
    config: &ExperimentConfig,
    pretrained: &GpPolicies,
) -> Result<GpPolicies> {
    let mut policies = fresh_policies(world, config, EnvMode::Hierarchical)?;
    for master in [DomainId::Restaurant, DomainId::Hotel] {
        let spec = world.ontology.get(master)?;
        let target: Vec<ActionId> = spec.all_actions();
        let source: Vec<ActionId> = spec.without_options().all_actions();
        let transfer = PolicyTransferSpec::new(source, target, spec.belief_dim());
        let adapted = adapt_policy(pretrained.get(master)?, &transfer)?;
        policies.models.insert(master, adapted);
    }
    Ok(policies)
}

pub struct AdaptOutcome {
    pub pretrained: Vec<LearningCurve>,
    pub scratch: Vec<LearningCurve>,
}

/// Pretrained-then-adapted versus from-scratch hierarchical training, per seed.
pub fn adapt_experiment(world: &World, config: &ExperimentConfig) -> Result<AdaptOutcome> {
    config.validate()?;
    let pairs = for_each_seed(&config.seeds, |seed| {
        let spec = RunSpec::from_config(config, EnvMode::Hierarchical, seed);
        let mut scratch = fresh_policies(world, config, EnvMode::Hierarchical)?;
        let scratch_curve = train_run(world, &spec, &mut scratch)?;
        let pre = pretrain_masters(world, config, seed)?;
        let mut adapted = adapted_policies(world, config, &pre)?;
        let adapted_curve = train_run(world, &spec, &mut adapted)?;
        Ok((adapted_curve, scratch_curve))
    })?;
    let (pretrained, scratch) = pairs.into_iter().unzip();
    Ok(AdaptOutcome {
        pretrained,
        scratch,
    })
}
