//! Sparse Gaussian-process model of the Q-function.
//!
//! The model keeps a dictionary of representative joint points `D` and a
//! Gaussian posterior `N(mu, P)` over the Q-values at those points. Points that
//! are not admitted to the dictionary are represented by their kernel
//! projection `a(x) = K_DD^-1 k_D(x)`. Episodes are absorbed with the
//! temporal-difference observation model
//!
//! ```text
//! r_t = Q(x_t) - g_t Q(x_{t+1}) + n_t,    n ~ N(0, s2 H H^T)
//! ```
//!
//! where `H` is the bidiagonal TD matrix. Because `H` is invertible this is
//! the same as regressing the discounted returns-to-go `H^-1 r` on Q with iid
//! noise, so each episode is a single batch Bayesian linear update.
//!
//! Queries use `mean(x) = k_D(x)^T alpha` and
//! `var(x) = k(x,x) - k_D(x)^T C k_D(x)` with `alpha = K^-1 mu` and
//! `C = K^-1 - K^-1 P K^-1`.
//!
//! Action kernels are delta-like, so `K_DD` is block diagonal by action and
//! every query only touches the block of its own action.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acts::ActionId;
use crate::error::{Error, Result};
use crate::kernel::{JointPoint, KernelSpec};

/// Diagonal regulariser used when a Gram block has to be inverted from scratch.
pub const JITTER: f64 = 1e-8;

/// Posterior variances in `[-VARIANCE_TOLERANCE, 0)` are clamped to zero.
pub const VARIANCE_TOLERANCE: f64 = 1e-9;

/// Residuals below this fraction of `k(x, x)` are rounding noise of an exactly
/// dependent point; admitting them would make the Gram block singular.
const RELATIVE_RESIDUAL_FLOOR: f64 = 1e-10;

const MODEL_FORMAT: &str = "hdial-gpq";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpParams {
    /// Admission threshold on the squared projection residual.
    pub sparsify_threshold: f64,
    pub dictionary_cap: usize,
    pub discount: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            sparsify_threshold: 0.001,
            dictionary_cap: 1000,
            discount: 0.99,
        }
    }
}

impl GpParams {
    /// Every point is admitted unless exactly representable.
    pub fn dense(discount: f64) -> Self {
        Self {
            sparsify_threshold: 0.0,
            dictionary_cap: usize::MAX,
            discount,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..).contains(&self.sparsify_threshold) {
            return Err(Error::Config("sparsify_threshold must be >= 0".into()));
        }
        if self.dictionary_cap == 0 {
            return Err(Error::Config("dictionary_cap must be positive".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::Config(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub point: JointPoint,
    pub reward: f64,
    /// `gamma^tau`, with `tau` the environment steps until the next transition.
    pub discount_to_next: f64,
    pub is_terminal: bool,
}

/// One episode of transitions for a single policy, in time order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTransitions {
    pub steps: Vec<Transition>,
}

impl EpisodeTransitions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, point: JointPoint, reward: f64, discount_to_next: f64) {
        self.steps.push(Transition {
            point,
            reward,
            discount_to_next,
            is_terminal: false,
        });
    }

    /// Marks the last transition terminal.
    pub fn close(&mut self) {
        if let Some(last) = self.steps.last_mut() {
            last.is_terminal = true;
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Discounted return from every step to the end: `H^-1 r`.
    pub fn returns_to_go(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.steps.len()];
        let mut acc = 0.0;
        for (t, step) in self.steps.iter().enumerate().rev() {
            acc = if step.is_terminal {
                step.reward
            } else {
                step.reward + step.discount_to_next * acc
            };
            out[t] = acc;
        }
        out
    }

    pub fn validate(&self, belief_dim: usize) -> Result<()> {
        let n = self.steps.len();
        if n == 0 {
            return Err(Error::InvalidEpisode("episode is empty".into()));
        }
        for (t, step) in self.steps.iter().enumerate() {
            if step.point.belief.len() != belief_dim {
                return Err(Error::DimensionMismatch {
                    left: step.point.belief.len(),
                    right: belief_dim,
                });
            }
            if !step.reward.is_finite() {
                return Err(Error::InvalidEpisode(format!(
                    "non-finite reward at step {t}"
                )));
            }
            if step.point.belief.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidEpisode(format!(
                    "non-finite belief at step {t}"
                )));
            }
            if step.is_terminal != (t + 1 == n) {
                return Err(Error::InvalidEpisode(format!(
                    "only the final step may be terminal (step {t})"
                )));
            }
            if !step.is_terminal && !(step.discount_to_next > 0.0 && step.discount_to_next <= 1.0) {
                return Err(Error::InvalidEpisode(format!(
                    "discount {} at step {t} outside (0, 1]",
                    step.discount_to_next
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Admission {
    Admit { residual: f64 },
    RepresentByExisting { residual: f64 },
}

impl Admission {
    pub fn admitted(&self) -> bool {
        matches!(self, Admission::Admit { .. })
    }

    pub fn residual(&self) -> f64 {
        match *self {
            Admission::Admit { residual } | Admission::RepresentByExisting { residual } => residual,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

/// Dictionary entries sharing one action, with the inverse of their Gram
/// block and the matching diagonal block of the covariance factor.
#[derive(Clone, Debug)]
struct ActionBlock {
    indices: Vec<usize>,
    gram_inv: DMatrix<f64>,
    cov: DMatrix<f64>,
}

/// Kernel projection of a point onto its action block.
struct Projection {
    k_self: f64,
    coeffs: DVector<f64>,
    residual: f64,
}

#[derive(Clone, Debug)]
pub struct GPQModel {
    kernel: KernelSpec,
    params: GpParams,
    belief_dim: usize,
    dictionary: Vec<JointPoint>,
    posterior_mean: DVector<f64>,
    posterior_cov: DMatrix<f64>,
    alpha: DVector<f64>,
    blocks: BTreeMap<ActionId, ActionBlock>,
}

impl GPQModel {
    pub fn new(kernel: KernelSpec, params: GpParams, belief_dim: usize) -> Result<Self> {
        kernel.validate()?;
        params.validate()?;
        Ok(Self {
            kernel,
            params,
            belief_dim,
            dictionary: Vec::new(),
            posterior_mean: DVector::zeros(0),
            posterior_cov: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            blocks: BTreeMap::new(),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn params(&self) -> &GpParams {
        &self.params
    }

    pub fn belief_dim(&self) -> usize {
        self.belief_dim
    }

    pub fn dictionary(&self) -> &[JointPoint] {
        &self.dictionary
    }

    pub fn len(&self) -> usize {
        self.dictionary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dictionary.is_empty()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean of Q at the dictionary points.
    pub fn posterior_mean(&self) -> &DVector<f64> {
        &self.posterior_mean
    }

    /// Posterior covariance of Q at the dictionary points.
    pub fn posterior_cov(&self) -> &DMatrix<f64> {
        &self.posterior_cov
    }

    /// Actions that have at least one dictionary point.
    pub fn actions(&self) -> impl Iterator<Item = &ActionId> {
        self.blocks.keys()
    }

    /// Full `|D| x |D|` covariance factor `C = K^-1 - K^-1 P K^-1`.
    pub fn cov_factor(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut c = DMatrix::zeros(n, n);
        for (a, ba) in &self.blocks {
            for (b, bb) in &self.blocks {
                let block = if a == b {
                    ba.cov.clone()
                } else {
                    let p = gather(&self.posterior_cov, &ba.indices, &bb.indices);
                    -(&ba.gram_inv * p * &bb.gram_inv)
                };
                scatter(&mut c, &ba.indices, &bb.indices, &block);
            }
        }
        c
    }

    fn check_dim(&self, belief: &[f64]) -> Result<()> {
        if belief.len() != self.belief_dim {
            return Err(Error::DimensionMismatch {
                left: belief.len(),
                right: self.belief_dim,
            });
        }
        Ok(())
    }

    fn self_kernel(&self, belief: &[f64], action: &ActionId) -> f64 {
        self.kernel.action_kernel.eval(action, action) * self.kernel.belief_value(belief, belief)
    }

    /// Kernel vector between `belief` and the dictionary points of `block`.
    fn kernel_column(&self, belief: &[f64], block: &ActionBlock) -> DVector<f64> {
        DVector::from_iterator(
            block.indices.len(),
            block
                .indices
                .iter()
                .map(|&i| self.kernel.belief_value(belief, &self.dictionary[i].belief)),
        )
    }

    fn project(&self, x: &JointPoint) -> Projection {
        let k_self = self.self_kernel(&x.belief, &x.action);
        if k_self == 0.0 {
            return Projection {
                k_self,
                coeffs: DVector::zeros(0),
                residual: 0.0,
            };
        }
        let Some(block) = self.blocks.get(&x.action) else {
            return Projection {
                k_self,
                coeffs: DVector::zeros(0),
                residual: k_self,
            };
        };
        // An exact duplicate is represented by its own unit vector.
        if let Some(pos) = block
            .indices
            .iter()
            .position(|&i| self.dictionary[i].belief == x.belief)
        {
            let mut coeffs = DVector::zeros(block.indices.len());
            coeffs[pos] = 1.0;
            return Projection {
                k_self,
                coeffs,
                residual: 0.0,
            };
        }
        let k = self.kernel_column(&x.belief, block);
        let coeffs = &block.gram_inv * &k;
        let residual = k_self - k.dot(&coeffs);
        Projection {
            k_self,
            coeffs,
            residual,
        }
    }

    fn decide(&self, proj: &Projection) -> Admission {
        let residual = proj.residual;
        if residual > self.params.sparsify_threshold
            && residual > RELATIVE_RESIDUAL_FLOOR * proj.k_self
            && self.len() < self.params.dictionary_cap
        {
            Admission::Admit { residual }
        } else {
            Admission::RepresentByExisting { residual }
        }
    }

    /// Linear-independence test for a candidate point. Does not modify the model.
    pub fn dictionary_admit(&self, x: &JointPoint) -> Result<Admission> {
        self.check_dim(&x.belief)?;
        Ok(self.decide(&self.project(x)))
    }

    /// Appends `x` to the dictionary. The prior of the new value given the old
    /// ones is `N(a^T Q_D, residual)`, so the posterior extends in closed form.
    fn admit(&mut self, x: JointPoint, proj: Projection) -> usize {
        let n = self.len();
        let delta = proj.residual;
        let indices = self
            .blocks
            .get(&x.action)
            .map(|b| b.indices.clone())
            .unwrap_or_default();
        let a = &proj.coeffs;

        let mut cross = DVector::zeros(n);
        let mut mean = 0.0;
        for (j, &idx) in indices.iter().enumerate() {
            cross.axpy(a[j], &self.posterior_cov.column(idx), 1.0);
            mean += a[j] * self.posterior_mean[idx];
        }
        let mut corner = delta;
        for (j, &idx) in indices.iter().enumerate() {
            corner += a[j] * cross[idx];
        }

        let mut cov = std::mem::replace(&mut self.posterior_cov, DMatrix::zeros(0, 0)).resize(
            n + 1,
            n + 1,
            0.0,
        );
        for i in 0..n {
            cov[(i, n)] = cross[i];
            cov[(n, i)] = cross[i];
        }
        cov[(n, n)] = corner;
        self.posterior_cov = cov;
        self.posterior_mean = std::mem::replace(&mut self.posterior_mean, DVector::zeros(0))
            .resize_vertically(n + 1, mean);

        let block = self
            .blocks
            .entry(x.action.clone())
            .or_insert_with(|| ActionBlock {
                indices: Vec::new(),
                gram_inv: DMatrix::zeros(0, 0),
                cov: DMatrix::zeros(0, 0),
            });
        let m = block.indices.len();
        let mut inv =
            std::mem::replace(&mut block.gram_inv, DMatrix::zeros(0, 0)).resize(m + 1, m + 1, 0.0);
        for i in 0..m {
            for j in 0..m {
                inv[(i, j)] += a[i] * a[j] / delta;
            }
            inv[(i, m)] = -a[i] / delta;
            inv[(m, i)] = -a[i] / delta;
        }
        inv[(m, m)] = 1.0 / delta;
        block.gram_inv = inv;
        block.indices.push(n);
        self.dictionary.push(x);
        n
    }

    /// Absorbs one episode. On error the model is left unchanged.
    pub fn gptd_update(&mut self, episode: &EpisodeTransitions) -> Result<()> {
        episode.validate(self.belief_dim)?;

        // Sparse rows of the projection matrix A, one per step.
        let mut rows: Vec<(Vec<usize>, Vec<f64>)> = Vec::with_capacity(episode.len());
        let mut staged = self.clone();
        for step in &episode.steps {
            let proj = staged.project(&step.point);
            if staged.decide(&proj).admitted() {
                let idx = staged.admit(step.point.clone(), proj);
                rows.push((vec![idx], vec![1.0]));
            } else if let Some(block) = staged.blocks.get(&step.point.action) {
                rows.push((block.indices.clone(), proj.coeffs.iter().copied().collect()));
            } else {
                rows.push((Vec::new(), Vec::new()));
            }
        }
        staged.absorb(&rows, &episode.returns_to_go())?;
        *self = staged;
        Ok(())
    }

    fn absorb(&mut self, rows: &[(Vec<usize>, Vec<f64>)], targets: &[f64]) -> Result<()> {
        let n = self.len();
        let t = rows.len();
        let noise = self.kernel.noise_variance;

        // P A^T
        let mut pa = DMatrix::zeros(n, t);
        for (col, (idx, coef)) in rows.iter().enumerate() {
            let mut c = pa.column_mut(col);
            for (&i, &w) in idx.iter().zip(coef) {
                c.axpy(w, &self.posterior_cov.column(i), 1.0);
            }
        }
        // A P A^T + noise I
        let mut s = DMatrix::zeros(t, t);
        for (r, (idx, coef)) in rows.iter().enumerate() {
            for c in 0..t {
                let mut acc = 0.0;
                for (&i, &w) in idx.iter().zip(coef) {
                    acc += w * pa[(i, c)];
                }
                s[(r, c)] = acc;
            }
        }
        let s = (&s + s.transpose()) * 0.5 + DMatrix::identity(t, t) * noise;
        let chol = s.cholesky().ok_or_else(|| {
            Error::Numerical("innovation covariance is not positive definite".into())
        })?;

        let mut innovation = DVector::from_column_slice(targets);
        for (r, (idx, coef)) in rows.iter().enumerate() {
            for (&i, &w) in idx.iter().zip(coef) {
                innovation[r] -= w * self.posterior_mean[i];
            }
        }
        let weights = chol.solve(&innovation);
        self.posterior_mean.gemv(1.0, &pa, &weights, 1.0);

        let gain_t = chol.solve(&pa.transpose());
        self.posterior_cov.gemm(-1.0, &pa, &gain_t, 1.0);
        symmetrize(&mut self.posterior_cov);
        self.refresh();
        Ok(())
    }

    /// Recomputes `alpha` and the diagonal covariance-factor blocks.
    fn refresh(&mut self) {
        let n = self.len();
        let mut alpha = DVector::zeros(n);
        for block in self.blocks.values_mut() {
            let mu = DVector::from_iterator(
                block.indices.len(),
                block.indices.iter().map(|&i| self.posterior_mean[i]),
            );
            let local = &block.gram_inv * mu;
            for (j, &i) in block.indices.iter().enumerate() {
                alpha[i] = local[j];
            }
            let p = gather(&self.posterior_cov, &block.indices, &block.indices);
            let mut cov = &block.gram_inv - &block.gram_inv * p * &block.gram_inv;
            symmetrize(&mut cov);
            block.cov = cov;
        }
        self.alpha = alpha;
    }

    /// Posterior mean and variance of `Q(belief, a)` for every `a` in `actions`.
    pub fn q_posterior(&self, belief: &[f64], actions: &[ActionId]) -> Result<Vec<Posterior>> {
        if actions.is_empty() {
            return Err(Error::NoActions);
        }
        self.check_dim(belief)?;
        actions
            .iter()
            .map(|a| self.posterior_at(belief, a))
            .collect()
    }

    fn posterior_at(&self, belief: &[f64], action: &ActionId) -> Result<Posterior> {
        let k_self = self.self_kernel(belief, action);
        let Some(block) = self.blocks.get(action).filter(|_| k_self != 0.0) else {
            return Ok(Posterior {
                mean: 0.0,
                variance: k_self,
            });
        };
        let k = self.kernel_column(belief, block);
        let mean = block
            .indices
            .iter()
            .zip(k.iter())
            .map(|(&i, kv)| kv * self.alpha[i])
            .sum();
        let variance = k_self - (&block.cov * &k).dot(&k);
        if variance < -VARIANCE_TOLERANCE {
            return Err(Error::Numerical(format!(
                "negative posterior variance {variance:e} for {action}"
            )));
        }
        Ok(Posterior {
            mean,
            variance: variance.max(0.0),
        })
    }

    /// Posterior sampling: draws `q_a ~ N(mean_a, scale^2 var_a)` for every
    /// action and returns the argmax. `scale = 0` is greedy on the means.
    /// Ties go to the lowest index.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        belief: &[f64],
        actions: &[ActionId],
        exploration_scale: f64,
        rng: &mut R,
    ) -> Result<ActionId> {
        let post = self.q_posterior(belief, actions)?;
        if actions.len() == 1 {
            return Ok(actions[0].clone());
        }
        let values: Vec<f64> = if exploration_scale == 0.0 {
            post.iter().map(|p| p.mean).collect()
        } else {
            post.iter()
                .map(|p| {
                    let z: f64 = StandardNormal.sample(rng);
                    p.mean + exploration_scale * p.variance.sqrt() * z
                })
                .collect()
        };
        Ok(actions[argmax(&values)].clone())
    }

    /// Removes every dictionary point whose action the new kernel does not
    /// support and swaps the kernel. Dropping points marginalises the Gaussian
    /// posterior, so the remaining blocks keep their exact values.
    pub(crate) fn restrict_to_kernel(&self, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| kernel.action_kernel.supports(&self.dictionary[i].action))
            .collect();
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let blocks = self
            .blocks
            .iter()
            .filter(|(a, _)| kernel.action_kernel.supports(a))
            .map(|(a, b)| {
                let block = ActionBlock {
                    indices: b.indices.iter().map(|&i| remap[i]).collect(),
                    gram_inv: b.gram_inv.clone(),
                    cov: b.cov.clone(),
                };
                (a.clone(), block)
            })
            .collect();
        Ok(Self {
            kernel,
            params: self.params.clone(),
            belief_dim: self.belief_dim,
            dictionary: keep.iter().map(|&i| self.dictionary[i].clone()).collect(),
            posterior_mean: DVector::from_iterator(
                keep.len(),
                keep.iter().map(|&i| self.posterior_mean[i]),
            ),
            posterior_cov: gather(&self.posterior_cov, &keep, &keep),
            alpha: DVector::from_iterator(keep.len(), keep.iter().map(|&i| self.alpha[i])),
            blocks,
        })
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kernel: self.kernel.clone(),
            params: self.params.clone(),
            belief_dim: self.belief_dim,
            dictionary: self.dictionary.clone(),
            alpha: self.alpha.iter().copied().collect(),
            cov_factor: rows_of(&self.cov_factor()),
            posterior_mean: self.posterior_mean.iter().copied().collect(),
            posterior_cov: rows_of(&self.posterior_cov),
            gram_inverse: self
                .blocks
                .iter()
                .map(|(a, b)| BlockFile {
                    action: a.clone(),
                    indices: b.indices.clone(),
                    inverse: rows_of(&b.gram_inv),
                })
                .collect(),
        };
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Parse(format!(
                "not a model file: format `{}`",
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Version {
                what: "policy model",
                expected: MODEL_VERSION,
                found: file.version,
            });
        }
        file.kernel.validate()?;
        file.params.validate()?;
        let n = file.dictionary.len();
        let bad = |what: &str| Error::Parse(format!("model file: {what} has the wrong shape"));
        if file.alpha.len() != n || file.posterior_mean.len() != n {
            return Err(bad("alpha / posterior_mean"));
        }
        let cov_factor = matrix_from_rows(&file.cov_factor, n).ok_or_else(|| bad("cov_factor"))?;
        let posterior_cov =
            matrix_from_rows(&file.posterior_cov, n).ok_or_else(|| bad("posterior_cov"))?;
        if file
            .dictionary
            .iter()
            .any(|p| p.belief.len() != file.belief_dim)
        {
            return Err(bad("dictionary"));
        }
        let mut blocks = BTreeMap::new();
        for b in file.gram_inverse {
            let m = b.indices.len();
            if b.indices
                .iter()
                .any(|&i| i >= n || file.dictionary[i].action != b.action)
            {
                return Err(bad("gram_inverse indices"));
            }
            let gram_inv = matrix_from_rows(&b.inverse, m).ok_or_else(|| bad("gram_inverse"))?;
            let cov = gather(&cov_factor, &b.indices, &b.indices);
            blocks.insert(
                b.action,
                ActionBlock {
                    indices: b.indices,
                    gram_inv,
                    cov,
                },
            );
        }
        if blocks.values().map(|b| b.indices.len()).sum::<usize>() != n {
            return Err(bad("gram_inverse"));
        }
        Ok(Self {
            kernel: file.kernel,
            params: file.params,
            belief_dim: file.belief_dim,
            dictionary: file.dictionary,
            posterior_mean: DVector::from_vec(file.posterior_mean),
            posterior_cov,
            alpha: DVector::from_vec(file.alpha),
            blocks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Rebuilds a Gram-block inverse from scratch (Cholesky, with jitter if the
    /// block is numerically singular). Used to audit the incremental inverse.
    pub fn gram_inverse_from_scratch(&self, action: &ActionId) -> Option<DMatrix<f64>> {
        let block = self.blocks.get(action)?;
        let m = block.indices.len();
        let gram = DMatrix::from_fn(m, m, |i, j| {
            self.kernel.belief_value(
                &self.dictionary[block.indices[i]].belief,
                &self.dictionary[block.indices[j]].belief,
            )
        });
        gram.clone()
            .cholesky()
            .or_else(|| (gram + DMatrix::identity(m, m) * JITTER).cholesky())
            .map(|c| c.inverse())
    }

    /// Incrementally maintained inverse of one action's Gram block.
    pub fn gram_inverse(&self, action: &ActionId) -> Option<&DMatrix<f64>> {
        self.blocks.get(action).map(|b| &b.gram_inv)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn gather(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn scatter(m: &mut DMatrix<f64>, rows: &[usize], cols: &[usize], block: &DMatrix<f64>) {
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[(r, c)] = block[(i, j)];
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Option<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return None;
    }
    Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
struct BlockFile {
    action: ActionId,
    indices: Vec<usize>,
    inverse: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kernel: KernelSpec,
    params: GpParams,
    belief_dim: usize,
    dictionary: Vec<JointPoint>,
    alpha: Vec<f64>,
    cov_factor: Vec<Vec<f64>>,
    posterior_mean: Vec<f64>,
    posterior_cov: Vec<Vec<f64>>,
    gram_inverse: Vec<BlockFile>,
}
