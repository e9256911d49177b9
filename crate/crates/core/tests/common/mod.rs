#![allow(dead_code)]

use hdial::acts::ActionId;
use hdial::gp::EpisodeTransitions;
use hdial::kernel::JointPoint;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

pub fn actions3() -> Vec<ActionId> {
    vec![
        ActionId::Offer,
        ActionId::Inform,
        ActionId::Request("area".into()),
    ]
}

/// Linear belief kernel times a Kronecker delta on actions, written out
/// independently of the crate's kernel code.
pub fn k_lin(x: &JointPoint, y: &JointPoint) -> f64 {
    if x.action != y.action {
        return 0.0;
    }
    x.belief.iter().zip(&y.belief).map(|(a, b)| a * b).sum()
}

pub fn random_belief<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// A random closed episode of 1..=max_len steps; every discount is
/// `gamma^tau` for a random `tau` in 1..=3.
pub fn random_episode<R: Rng>(
    dim: usize,
    max_len: usize,
    gamma: f64,
    rng: &mut R,
) -> EpisodeTransitions {
    let acts = actions3();
    let len = rng.random_range(1..=max_len);
    let mut ep = EpisodeTransitions::new();
    for _ in 0..len {
        let a = acts[rng.random_range(0..acts.len())].clone();
        let tau = rng.random_range(1..=3);
        ep.push(
            JointPoint::new(random_belief(dim, rng), a),
            rng.random_range(-5.0..20.0),
            gamma.powi(tau),
        );
    }
    ep.close();
    ep
}

/// Dense GPTD posterior from every transition of every episode at once:
/// mean(x) = k_x' H' (H K H' + s2 H H')^-1 r, variance k(x,x) - k_x' H' (..)^-1 H k_x.
pub struct DenseOracle {
    points: Vec<JointPoint>,
    weights: DVector<f64>,
    inner: DMatrix<f64>,
}

impl DenseOracle {
    pub fn new(episodes: &[EpisodeTransitions], noise: f64) -> Self {
        let points: Vec<JointPoint> = episodes
            .iter()
            .flat_map(|e| e.steps.iter().map(|s| s.point.clone()))
            .collect();
        let n = points.len();
        let mut h = DMatrix::zeros(n, n);
        let mut r = DVector::zeros(n);
        let mut row = 0;
        for e in episodes {
            for (t, s) in e.steps.iter().enumerate() {
                h[(row, row)] = 1.0;
                if t + 1 < e.steps.len() {
                    h[(row, row + 1)] = -s.discount_to_next;
                }
                r[row] = s.reward;
                row += 1;
            }
        }
        let k = DMatrix::from_fn(n, n, |i, j| k_lin(&points[i], &points[j]));
        let s = &h * &k * h.transpose() + noise * &h * h.transpose();
        let s_inv = s.try_inverse().expect("oracle system is singular");
        let weights = h.transpose() * &s_inv * r;
        let inner = h.transpose() * s_inv * h;
        Self {
            points,
            weights,
            inner,
        }
    }

    pub fn posterior(&self, x: &JointPoint) -> (f64, f64) {
        let kx = DVector::from_iterator(self.points.len(), self.points.iter().map(|p| k_lin(x, p)));
        let mean = kx.dot(&self.weights);
        let var = k_lin(x, x) - (&self.inner * &kx).dot(&kx);
        (mean, var)
    }
}

/// A user that replays a fixed list of acts, then repeats `affirm`.
pub struct ScriptUser {
    pub goal: hdial::user::UserGoal,
    pub opening: hdial::acts::UserAct,
    pub replies: std::collections::VecDeque<hdial::acts::UserAct>,
    pub heard: Vec<hdial::acts::SystemUtterance>,
}

impl ScriptUser {
    pub fn new(
        goal: hdial::user::UserGoal,
        opening: hdial::acts::UserAct,
        replies: Vec<hdial::acts::UserAct>,
    ) -> Self {
        Self {
            goal,
            opening,
            replies: replies.into(),
            heard: Vec::new(),
        }
    }
}

impl hdial::user::UserModel for ScriptUser {
    fn goal(&self) -> &hdial::user::UserGoal {
        &self.goal
    }

    fn start(&mut self) -> hdial::Result<hdial::acts::UserAct> {
        Ok(self.opening.clone())
    }

    fn respond(&mut self, u: &hdial::acts::SystemUtterance) -> hdial::Result<hdial::acts::UserAct> {
        self.heard.push(u.clone());
        Ok(self
            .replies
            .pop_front()
            .unwrap_or(hdial::acts::UserAct::Affirm))
    }
}

pub fn goal_from(
    master: hdial::acts::DomainId,
    constraints: &[(&str, &str)],
    requestables: &[&str],
    sub_task: Option<hdial::acts::SubTask>,
    sub: &[(&str, &str)],
) -> hdial::user::UserGoal {
    let map = |kv: &[(&str, &str)]| {
        kv.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    };
    hdial::user::UserGoal {
        master_domain: master,
        constraints: map(constraints),
        requestables: requestables.iter().map(|s| s.to_string()).collect(),
        sub_task,
        sub_constraints: map(sub),
    }
}
