//! Product kernels over (belief, action) pairs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acts::ActionId;
use crate::error::{Error, Result};

/// A point in the joint belief-action space: the `(b, a)` of `Q(b, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub belief: Vec<f64>,
    pub action: ActionId,
}

impl JointPoint {
    pub fn new(belief: Vec<f64>, action: ActionId) -> Self {
        Self { belief, action }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BeliefKernel {
    Linear,
    /// `exp(-|x - y|^2 / (2 width^2))`
    Gaussian {
        width: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ActionKernel {
    Delta,
    /// Delta kernel supported only on `shared` (and on `novel`, the actions
    /// introduced after a transfer, which start from an unconstrained prior).
    /// Any pair involving an action outside the support evaluates to 0.
    RestrictedDelta {
        shared: BTreeSet<ActionId>,
        #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
        novel: BTreeSet<ActionId>,
    },
}

impl ActionKernel {
    /// Whether `k(a, a)` is non-zero.
    pub fn supports(&self, a: &ActionId) -> bool {
        match self {
            ActionKernel::Delta => true,
            ActionKernel::RestrictedDelta { shared, novel } => {
                shared.contains(a) || novel.contains(a)
            }
        }
    }

    pub fn eval(&self, a: &ActionId, b: &ActionId) -> f64 {
        if a == b && self.supports(a) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub belief_kernel: BeliefKernel,
    pub action_kernel: ActionKernel,
    /// Observation noise variance of the temporal-difference model.
    pub noise_variance: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            belief_kernel: BeliefKernel::Linear,
            action_kernel: ActionKernel::Delta,
            noise_variance: 5.0,
        }
    }
}

impl KernelSpec {
    /// The GP prior over Q is zero-mean.
    pub const PRIOR_MEAN: f64 = 0.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise_variance must be positive, got {}",
                self.noise_variance
            )));
        }
        if let BeliefKernel::Gaussian { width } = self.belief_kernel {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::Config(format!(
                    "gaussian width must be positive, got {width}"
                )));
            }
        }
        Ok(())
    }

    /// Belief part only. Callers must have checked the lengths.
    pub fn belief_value(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self.belief_kernel {
            BeliefKernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            BeliefKernel::Gaussian { width } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn eval(&self, x: &JointPoint, y: &JointPoint) -> Result<f64> {
        kernel_eval(x, y, self)
    }
}

/// `k((b_x, a_x), (b_y, a_y)) = k_belief(b_x, b_y) * k_action(a_x, a_y)`.
pub fn kernel_eval(x: &JointPoint, y: &JointPoint, spec: &KernelSpec) -> Result<f64> {
    if x.belief.len() != y.belief.len() {
        return Err(Error::DimensionMismatch {
            left: x.belief.len(),
            right: y.belief.len(),
        });
    }
    let ka = spec.action_kernel.eval(&x.action, &y.action);
    if ka == 0.0 {
        return Ok(0.0);
    }
    Ok(ka * spec.belief_value(&x.belief, &y.belief))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn pt(b: &[f64], a: ActionId) -> JointPoint {
        JointPoint::new(b.to_vec(), a)
    }

    #[test]
    fn linear_same_action() {
        let spec = KernelSpec::default();
        let x = pt(&[0.5, 0.5], ActionId::Inform);
        assert_eq!(kernel_eval(&x, &x, &spec).unwrap(), 0.5);
    }

    #[test]
    fn delta_different_actions() {
        let spec = KernelSpec::default();
        let x = pt(&[0.3, 0.9], ActionId::Inform);
        let y = pt(&[0.3, 0.9], ActionId::Request("area".into()));
        assert_eq!(kernel_eval(&x, &y, &spec).unwrap(), 0.0);
    }

    #[test]
    fn restricted_delta_outside_shared() {
        let spec = KernelSpec {
            action_kernel: ActionKernel::RestrictedDelta {
                shared: [ActionId::Inform, ActionId::Request("area".into())]
                    .into_iter()
                    .collect(),
                novel: BTreeSet::new(),
            },
            ..KernelSpec::default()
        };
        let book = ActionId::Option(crate::acts::SubTask::Booking);
        let x = pt(&[1.0, 0.0], book.clone());
        assert_eq!(kernel_eval(&x, &x, &spec).unwrap(), 0.0);
        let y = pt(&[1.0, 0.0], ActionId::Inform);
        assert_eq!(kernel_eval(&y, &y, &spec).unwrap(), 1.0);
        assert_eq!(kernel_eval(&x, &y, &spec).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_names_both() {
        let spec = KernelSpec::default();
        let err = kernel_eval(
            &pt(&[1.0], ActionId::Bye),
            &pt(&[1.0, 2.0], ActionId::Bye),
            &spec,
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "belief dimension mismatch: 1 vs 2");
    }

    fn action_strategy() -> impl Strategy<Value = ActionId> {
        prop_oneof![
            Just(ActionId::Inform),
            Just(ActionId::Offer),
            Just(ActionId::Request("area".into())),
        ]
    }

    fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
        prop_oneof![
            Just(KernelSpec::default()),
            (0.2f64..3.0).prop_map(|w| KernelSpec {
                belief_kernel: BeliefKernel::Gaussian { width: w },
                ..KernelSpec::default()
            }),
            Just(KernelSpec {
                action_kernel: ActionKernel::RestrictedDelta {
                    shared: [ActionId::Inform, ActionId::Offer].into_iter().collect(),
                    novel: BTreeSet::new(),
                },
                ..KernelSpec::default()
            }),
        ]
    }

    proptest! {
        #[test]
        fn symmetric(
            spec in kernel_strategy(),
            a in action_strategy(), b in action_strategy(),
            x in prop::collection::vec(-2.0f64..2.0, 4),
            y in prop::collection::vec(-2.0f64..2.0, 4),
        ) {
            let p = JointPoint::new(x, a);
            let q = JointPoint::new(y, b);
            prop_assert_eq!(kernel_eval(&p, &q, &spec).unwrap(), kernel_eval(&q, &p, &spec).unwrap());
        }

        #[test]
        fn gram_is_psd(
            spec in kernel_strategy(),
            pts in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 3), action_strategy()), 1..8),
        ) {
            let pts: Vec<JointPoint> = pts.into_iter().map(|(b, a)| JointPoint::new(b, a)).collect();
            let n = pts.len();
            let gram = DMatrix::from_fn(n, n, |i, j| kernel_eval(&pts[i], &pts[j], &spec).unwrap());
            let eig = gram.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e >= -1e-9), "eigenvalues {:?}", eig);
        }
    }
}
