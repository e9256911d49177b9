//! Reusing pretrained master policies once options are added.
//!
//! A master policy pretrained without sub-tasks knows nothing about the new
//! option actions. Restricting the action kernel to the actions both action
//! sets share keeps everything learnt for them, while the options start from
//! the prior. The belief space is unchanged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::acts::ActionId;
use crate::error::{Error, Result};
use crate::gp::GPQModel;
use crate::kernel::{ActionKernel, KernelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyTransferSpec {
    pub source_action_set: Vec<ActionId>,
    pub target_action_set: Vec<ActionId>,
    pub belief_dim: usize,
}

impl PolicyTransferSpec {
    pub fn new(
        source_action_set: Vec<ActionId>,
        target_action_set: Vec<ActionId>,
        belief_dim: usize,
    ) -> Self {
        Self {
            source_action_set,
            target_action_set,
            belief_dim,
        }
    }

    pub fn shared_set(&self) -> BTreeSet<ActionId> {
        let target: BTreeSet<&ActionId> = self.target_action_set.iter().collect();
        self.source_action_set
            .iter()
            .filter(|a| target.contains(a))
            .cloned()
            .collect()
    }

    /// Target actions the source never had.
    pub fn novel_set(&self) -> BTreeSet<ActionId> {
        let source: BTreeSet<&ActionId> = self.source_action_set.iter().collect();
        self.target_action_set
            .iter()
            .filter(|a| !source.contains(a))
            .cloned()
            .collect()
    }
}

/// `k(a, a') = 1` iff `a = a'` and `a` is shared; the belief kernel and noise
/// are taken from `base`.
pub fn restrict_action_kernel(spec: &PolicyTransferSpec, base: &KernelSpec) -> Result<KernelSpec> {
    let shared = spec.shared_set();
    if shared.is_empty() {
        return Err(Error::Transfer("source and target share no actions".into()));
    }
    Ok(KernelSpec {
        action_kernel: ActionKernel::RestrictedDelta {
            shared,
            novel: BTreeSet::new(),
        },
        ..base.clone()
    })
}

/// Carries a pretrained model over to the target action set. Shared actions
/// keep their posterior exactly. New actions get the prior: their kernel
/// value is opened up (`novel`) so retraining can learn them, and since no
/// dictionary point carries them their posterior starts at mean 0 with
/// variance `k_belief(b, b)`. Source-only actions are dropped.
pub fn adapt_policy(pretrained: &GPQModel, spec: &PolicyTransferSpec) -> Result<GPQModel> {
    if pretrained.belief_dim() != spec.belief_dim {
        return Err(Error::DimensionMismatch {
            left: pretrained.belief_dim(),
            right: spec.belief_dim,
        });
    }
    let source: BTreeSet<&ActionId> = spec.source_action_set.iter().collect();
    if let Some(stray) = pretrained.actions().find(|a| !source.contains(a)) {
        return Err(Error::Transfer(format!(
            "pretrained model has action `{stray}` outside the source action set"
        )));
    }
    let mut kernel = restrict_action_kernel(spec, pretrained.kernel())?;
    if let ActionKernel::RestrictedDelta { novel, .. } = &mut kernel.action_kernel {
        *novel = spec.novel_set();
    }
    pretrained.restrict_to_kernel(kernel)
}
