mod common;

use common::{actions3, k_lin, random_belief, random_episode, DenseOracle};
use hdial::acts::ActionId;
use hdial::gp::{EpisodeTransitions, GPQModel, GpParams};
use hdial::kernel::{JointPoint, KernelSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NOISE: f64 = 5.0;
const GAMMA: f64 = 0.99;

fn dense_model(dim: usize) -> GPQModel {
    let kernel = KernelSpec {
        noise_variance: NOISE,
        ..KernelSpec::default()
    };
    GPQModel::new(kernel, GpParams::dense(GAMMA), dim).unwrap()
}

fn max_gap(model: &GPQModel, oracle: &DenseOracle, queries: &[JointPoint]) -> f64 {
    let mut worst = 0.0f64;
    for x in queries {
        let got = &model
            .q_posterior(&x.belief, std::slice::from_ref(&x.action))
            .unwrap()[0];
        let (mean, var) = oracle.posterior(x);
        worst = worst
            .max((got.mean - mean).abs())
            .max((got.variance - var.max(0.0)).abs());
    }
    worst
}

fn queries_for(episodes: &[EpisodeTransitions], rng: &mut ChaCha8Rng) -> Vec<JointPoint> {
    let mut q: Vec<JointPoint> = episodes
        .iter()
        .flat_map(|e| e.steps.iter().map(|s| s.point.clone()))
        .collect();
    for a in actions3() {
        q.push(JointPoint::new(random_belief(4, rng), a));
    }
    q
}

#[test]
fn single_episodes_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let ep = random_episode(4, 6, GAMMA, &mut rng);
        let mut m = dense_model(4);
        m.gptd_update(&ep).unwrap();
        let oracle = DenseOracle::new(std::slice::from_ref(&ep), NOISE);
        let gap = max_gap(
            &m,
            &oracle,
            &queries_for(std::slice::from_ref(&ep), &mut rng),
        );
        assert!(gap < 1e-8, "gap {gap:e}");
    }
}

#[test]
fn sequential_episodes_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let mut m = dense_model(4);
        let mut eps = Vec::new();
        for _ in 0..8 {
            let ep = random_episode(4, 6, GAMMA, &mut rng);
            m.gptd_update(&ep).unwrap();
            eps.push(ep);
        }
        let oracle = DenseOracle::new(&eps, NOISE);
        let gap = max_gap(&m, &oracle, &queries_for(&eps, &mut rng));
        assert!(gap < 1e-8, "gap {gap:e}");
    }
}

#[test]
fn one_point_regression() {
    let x = JointPoint::new(vec![1.0, 2.0, 0.0, 0.5], ActionId::Offer);
    let mut ep = EpisodeTransitions::new();
    ep.push(x.clone(), 12.0, GAMMA);
    ep.close();
    let mut m = dense_model(4);
    m.gptd_update(&ep).unwrap();
    let k = k_lin(&x, &x);
    let p = &m.q_posterior(&x.belief, &[ActionId::Offer]).unwrap()[0];
    assert!((p.mean - k / (k + NOISE) * 12.0).abs() < 1e-12);
    assert!((p.variance - (k - k * k / (k + NOISE))).abs() < 1e-12);
}

#[test]
fn two_step_episode() {
    let a = JointPoint::new(vec![1.0, 0.0, 0.0, 0.0], ActionId::Offer);
    let b = JointPoint::new(vec![0.0, 1.0, 0.0, 0.0], ActionId::Offer);
    let mut ep = EpisodeTransitions::new();
    ep.push(a.clone(), -1.0, GAMMA);
    ep.push(b.clone(), 19.0, GAMMA);
    ep.close();
    let mut m = dense_model(4);
    m.gptd_update(&ep).unwrap();
    // Orthogonal points: the MC form gives independent regressions on
    // returns-to-go -1 + 0.99 * 19 and 19.
    let shrink = 1.0 / (1.0 + NOISE);
    let qa = m.q_posterior(&a.belief, &[ActionId::Offer]).unwrap()[0].mean;
    let qb = m.q_posterior(&b.belief, &[ActionId::Offer]).unwrap()[0].mean;
    assert!((qa - shrink * (-1.0 + GAMMA * 19.0)).abs() < 1e-12);
    assert!((qb - shrink * 19.0).abs() < 1e-12);
}

#[test]
fn empty_model_is_prior() {
    let m = dense_model(4);
    let b = vec![0.5, 0.5, 0.0, 1.0];
    for p in m.q_posterior(&b, &actions3()).unwrap() {
        assert_eq!(p.mean, 0.0);
        assert!((p.variance - 1.5).abs() < 1e-15);
    }
}

#[test]
fn posterior_contracts_with_repetition() {
    let x = JointPoint::new(vec![0.3, -0.2, 0.9, 0.1], ActionId::Inform);
    let mut m = dense_model(4);
    let mut last = m.q_posterior(&x.belief, &[ActionId::Inform]).unwrap()[0].variance;
    for _ in 0..20 {
        let mut ep = EpisodeTransitions::new();
        ep.push(x.clone(), 7.0, GAMMA);
        ep.close();
        m.gptd_update(&ep).unwrap();
        let v = m.q_posterior(&x.belief, &[ActionId::Inform]).unwrap()[0].variance;
        assert!(v < last, "{v} !< {last}");
        last = v;
    }
}

#[test]
fn sparsified_model_stays_close() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let eps: Vec<_> = (0..5)
            .map(|_| random_episode(4, 6, GAMMA, &mut rng))
            .collect();
        let mut dense = dense_model(4);
        let mut sparse = GPQModel::new(
            dense.kernel().clone(),
            GpParams {
                discount: GAMMA,
                ..GpParams::default()
            },
            4,
        )
        .unwrap();
        for e in &eps {
            dense.gptd_update(e).unwrap();
            sparse.gptd_update(e).unwrap();
        }
        for x in sparse.dictionary() {
            let a = std::slice::from_ref(&x.action);
            let d = dense.q_posterior(&x.belief, a).unwrap()[0].mean;
            let s = sparse.q_posterior(&x.belief, a).unwrap()[0].mean;
            assert!((d - s).abs() <= 0.05 * d.abs().max(1.0), "{d} vs {s}");
        }
    }
}

#[test]
fn selection_is_fair_between_equal_actions() {
    let m = dense_model(2);
    let b = [1.0, 0.0];
    let acts = [ActionId::Offer, ActionId::Inform];
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let first = (0..10_000)
        .filter(|_| m.sample_action(&b, &acts, 1.0, &mut rng).unwrap() == ActionId::Offer)
        .count();
    let freq = first as f64 / 10_000.0;
    assert!((freq - 0.5).abs() < 0.02, "{freq}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reward_scaling_scales_means(seed in 0u64..1000, c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps: Vec<_> = (0..3).map(|_| random_episode(4, 6, GAMMA, &mut rng)).collect();
        let mut base = dense_model(4);
        let mut scaled = dense_model(4);
        for e in &eps {
            base.gptd_update(e).unwrap();
            let mut s = e.clone();
            for step in &mut s.steps {
                step.reward *= c;
            }
            scaled.gptd_update(&s).unwrap();
        }
        let b = random_belief(4, &mut rng);
        let acts = actions3();
        let pb = base.q_posterior(&b, &acts).unwrap();
        let ps = scaled.q_posterior(&b, &acts).unwrap();
        for (x, y) in pb.iter().zip(&ps) {
            prop_assert!((y.mean - c * x.mean).abs() < 1e-8 * (1.0 + c * x.mean.abs()));
        }
        let mut r = ChaCha8Rng::seed_from_u64(0);
        prop_assert_eq!(
            base.sample_action(&b, &acts, 0.0, &mut r).unwrap(),
            scaled.sample_action(&b, &acts, 0.0, &mut r).unwrap()
        );
    }

    #[test]
    fn variances_are_non_negative(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = dense_model(4);
        for _ in 0..4 {
            m.gptd_update(&random_episode(4, 6, GAMMA, &mut rng)).unwrap();
        }
        for p in m.q_posterior(&random_belief(4, &mut rng), &actions3()).unwrap() {
            prop_assert!(p.variance >= 0.0);
        }
    }
}
