//! Mini-batch training of the joint objective with straight-through codes
//! and SGD with momentum, under the three data settings: warm, cold-item,
//! and cold-user.

pub mod gradcheck;
pub mod loss;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ContentMatrix, DatasetSplit};
use crate::error::{CghError, Result};
use crate::mf::LatentFactors;
use crate::model::{CghModel, ModelShape};
pub use gradcheck::gradient_check;
pub use loss::{
    kl_bernoulli, loss, loss_and_grad, Batch, CodeMode, GradientSet, LossBreakdown, LossWeights,
    RatingExample, TrainData, KL_CLAMP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Warm,
    ColdItem,
    ColdUser,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::Warm => "warm",
            TrainMode::ColdItem => "cold-item",
            TrainMode::ColdUser => "cold-user",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(TrainMode::Warm),
            "cold-item" => Ok(TrainMode::ColdItem),
            "cold-user" => Ok(TrainMode::ColdUser),
            other => Err(CghError::Config(format!("unknown train mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub shape: ModelShape,
    /// Confidence on observed positives.
    pub a: f64,
    /// Confidence on sampled zeros (negative-sampling scale folded in).
    pub b: f64,
    pub kl_weight: f64,
    pub reg_weight: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub corruption: f64,
    pub negatives_per_positive: usize,
    pub code_mode: CodeMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Warm,
            shape: ModelShape::default(),
            a: 1.0,
            b: 0.3,
            kl_weight: 1.0,
            reg_weight: 1e-4,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 256,
            epochs: 100,
            corruption: 0.3,
            negatives_per_positive: 5,
            code_mode: CodeMode::Sample,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > self.b && self.b > 0.0) {
            return Err(CghError::Config("train: need a > b > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(CghError::Config("train: batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.corruption) {
            return Err(CghError::Config("train: corruption must lie in [0,1]".into()));
        }
        if !(self.shape.rho > 0.0 && self.shape.rho < 1.0) {
            return Err(CghError::Config("train: rho must lie in (0,1)".into()));
        }
        if self.shape.lambda_u <= 0.0 || self.shape.lambda_v <= 0.0 {
            return Err(CghError::Config("train: lambda precisions must be > 0".into()));
        }
        Ok(())
    }

    /// Mode gating: warm zeroes both content weights and the KL weights;
    /// cold-item zeroes the user content weight; cold-user the item one.
    pub fn effective_weights(&self) -> LossWeights {
        match self.mode {
            TrainMode::Warm => LossWeights {
                lambda_u: 0.0,
                lambda_v: 0.0,
                kl_user: 0.0,
                kl_item: 0.0,
                reg: self.reg_weight,
            },
            TrainMode::ColdItem => LossWeights {
                lambda_u: 0.0,
                lambda_v: self.shape.lambda_v,
                kl_user: self.kl_weight,
                kl_item: self.kl_weight,
                reg: self.reg_weight,
            },
            TrainMode::ColdUser => LossWeights {
                lambda_u: self.shape.lambda_u,
                lambda_v: 0.0,
                kl_user: self.kl_weight,
                kl_item: self.kl_weight,
                reg: self.reg_weight,
            },
        }
    }
}

/// A trained model with its frozen factors and per-epoch loss curve.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: CghModel,
    pub factors: LatentFactors,
    pub curve: Vec<LossBreakdown>,
    pub mode: TrainMode,
}

impl TrainedModel {
    /// Epoch log CSV:
    /// `epoch,rating_loss,recon_user,recon_item,kl_user,kl_item,reg,total`.
    pub fn write_epoch_log(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "epoch,rating_loss,recon_user,recon_item,kl_user,kl_item,reg,total"
        )?;
        for (epoch, l) in self.curve.iter().enumerate() {
            writeln!(
                w,
                "{epoch},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                l.rating_loss, l.recon_user, l.recon_item, l.kl_user, l.kl_item, l.regularizer,
                l.total
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mini-batch SGD with momentum over the warm training ratings. The latent
/// factors stay frozen; they only feed the encoder inputs. Deterministic
/// given the seed.
pub fn train(
    split: &DatasetSplit,
    user_content: &ContentMatrix,
    item_content: &ContentMatrix,
    factors: &LatentFactors,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let ratings = &split.warm_train;
    if ratings.is_empty() {
        return Err(CghError::EmptyTrainingSet);
    }
    if factors.n_users() != ratings.n_users() || factors.n_items() != ratings.n_items() {
        return Err(CghError::DimensionMismatch(format!(
            "factors {}x{} vs ratings {}x{}",
            factors.n_users(),
            factors.n_items(),
            ratings.n_users(),
            ratings.n_items()
        )));
    }
    if factors.r() != cfg.shape.r {
        return Err(CghError::DimensionMismatch(format!(
            "factor dim {} vs configured r {}",
            factors.r(),
            cfg.shape.r
        )));
    }
    if user_content.n_rows() != ratings.n_users() || item_content.n_rows() != ratings.n_items() {
        return Err(CghError::DimensionMismatch(format!(
            "content rows {}x{} vs ratings {}x{}",
            user_content.n_rows(),
            item_content.n_rows(),
            ratings.n_users(),
            ratings.n_items()
        )));
    }

    let mut model = CghModel::init(user_content.dim(), item_content.dim(), &cfg.shape, cfg.seed)?;
    let mut velocity = zeros_velocity(&model);
    let weights = cfg.effective_weights();
    let data = TrainData {
        user_content,
        item_content,
        factors,
    };

    // Stream 1 keeps the training draws disjoint from the init draws.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let positives = ratings.triples();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    // The logged curve is a deterministic end-of-epoch evaluation over a
    // fixed example set (threshold codes, no corruption, negatives drawn
    // once from their own stream), so it tracks objective descent rather
    // than batch-sampling noise.
    let eval_batch = {
        let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        eval_rng.set_stream(2);
        let mut examples = Vec::with_capacity(positives.len() * (1 + cfg.negatives_per_positive));
        for t in positives {
            examples.push(RatingExample {
                user: t.user,
                item: t.item,
                rating: 1.0,
                confidence: cfg.a,
            });
            sample_negatives(ratings, *t, cfg, &mut eval_rng, &mut examples);
        }
        Batch::from_examples(examples)
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut examples =
                Vec::with_capacity(chunk.len() * (1 + cfg.negatives_per_positive));
            for &idx in chunk {
                let t = positives[idx];
                examples.push(RatingExample {
                    user: t.user,
                    item: t.item,
                    rating: 1.0,
                    confidence: cfg.a,
                });
                sample_negatives(ratings, t, cfg, &mut rng, &mut examples);
            }
            let batch = Batch::from_examples(examples);
            let (breakdown, grads) = loss_and_grad(
                &model,
                &data,
                &batch,
                &weights,
                cfg.code_mode,
                cfg.corruption,
                &mut rng,
            )?;
            if !breakdown.is_finite() {
                return Err(CghError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    detail: format!("total = {}", breakdown.total),
                });
            }
            // Gradients are sums over the batch; scale the step by the
            // positive count so the learning rate is batch-size independent.
            apply_sgd_momentum(
                &mut model,
                &mut velocity,
                &grads,
                cfg.learning_rate / chunk.len() as f64,
                cfg.momentum,
            );
            epoch_loss.accumulate(&breakdown);
        }
        let _ = epoch_loss;
        let mut no_draws = ChaCha8Rng::seed_from_u64(0);
        let eval_loss = loss(
            &model,
            &data,
            &eval_batch,
            &weights,
            CodeMode::Threshold,
            0.0,
            &mut no_draws,
        )?;
        if !eval_loss.is_finite() {
            return Err(CghError::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
                detail: format!("epoch evaluation total = {}", eval_loss.total),
            });
        }
        curve.push(eval_loss);
    }

    if !model.all_params_finite() {
        return Err(CghError::NonFiniteLoss {
            epoch: cfg.epochs,
            batch: 0,
            detail: "non-finite parameters after training".into(),
        });
    }

    Ok(TrainedModel {
        model,
        factors: factors.clone(),
        curve,
        mode: cfg.mode,
    })
}

fn zeros_velocity(model: &CghModel) -> GradientSet {
    GradientSet::zeros_like(model)
}

/// Zeros sampled for one positive, alternating sides: even slots swap in a
/// random unrated item, odd slots a random non-rating user, so both encoders
/// see repulsion examples.
fn sample_negatives(
    ratings: &crate::data::SparseRatings,
    positive: crate::data::Rating,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    examples: &mut Vec<RatingExample>,
) {
    let n_items = ratings.n_items() as u32;
    let n_users = ratings.n_users() as u32;
    for slot in 0..cfg.negatives_per_positive {
        let mut attempts = 0usize;
        while attempts < 200 {
            attempts += 1;
            if slot % 2 == 0 {
                let j = rng.random_range(0..n_items);
                if ratings.is_positive(positive.user, j) {
                    continue;
                }
                examples.push(RatingExample {
                    user: positive.user,
                    item: j,
                    rating: 0.0,
                    confidence: cfg.b,
                });
            } else {
                let u = rng.random_range(0..n_users);
                if ratings.is_positive(u, positive.item) {
                    continue;
                }
                examples.push(RatingExample {
                    user: u,
                    item: positive.item,
                    rating: 0.0,
                    confidence: cfg.b,
                });
            }
            break;
        }
    }
}

fn apply_sgd_momentum(
    model: &mut CghModel,
    velocity: &mut GradientSet,
    grads: &GradientSet,
    lr: f64,
    momentum: f64,
) {
    let g = grads.slices();
    let mut v = velocity_slices_mut(velocity);
    let mut p = model.param_slices_mut();
    debug_assert_eq!(g.len(), v.len());
    debug_assert_eq!(g.len(), p.len());
    for i in 0..g.len() {
        let (gs, vs, ps) = (g[i], &mut v[i], &mut p[i]);
        for k in 0..gs.len() {
            vs[k] = momentum * vs[k] - lr * gs[k];
            ps[k] += vs[k];
        }
    }
}

fn velocity_slices_mut(v: &mut GradientSet) -> Vec<&mut [f64]> {
    let mut out = Vec::new();
    for sg in [&mut v.user, &mut v.item] {
        for (w, b) in &mut sg.hidden {
            out.push(w.as_slice_mut().expect("standard layout"));
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out.push(sg.proj.0.as_slice_mut().expect("standard layout"));
        out.push(sg.proj.1.as_slice_mut().expect("standard layout"));
        out.push(sg.codebook.as_slice_mut().expect("standard layout"));
    }
    out
}
