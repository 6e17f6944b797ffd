//! The joint training objective and its analytic gradients.
//!
//! For a mini-batch of rating examples (positives plus sampled zeros) the
//! loss is
//!
//!   sum_ex (C/2) (r - delta(c_u, c_i))^2
//!   + (lambda_u/2) sum_users |u - C_u c_u|^2
//!   + (lambda_v/2) sum_items |v - C_v c_i|^2
//!   + kl_u sum_users KL(q_u || rho_u) + kl_v sum_items KL(q_i || rho_v)
//!   + reg |active params|^2
//!
//! where c is the code vector used in the forward pass: sampled bits or
//! thresholded bits (gradients flow straight through the binarization as if
//! it were the identity), or the probabilities themselves in relaxed mode,
//! which makes the whole objective smooth for gradient checking. With real
//! vectors, delta(x, y) = 1 - |x - y|^2 / r coincides with
//! 1 - HammingDistance/r on binary codes.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

use crate::data::ContentMatrix;
use crate::error::{CghError, Result};
use crate::mf::LatentFactors;
use crate::model::encoder::{assemble_input, Forward};
use crate::model::CghModel;

/// Probabilities are clamped into [KL_CLAMP, 1 - KL_CLAMP] before logs.
pub const KL_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeMode {
    /// Bernoulli draws from the posterior; straight-through gradients.
    Sample,
    /// Deterministic thresholding at 0.5; straight-through gradients.
    Threshold,
    /// Codes are the probabilities themselves; exact gradients.
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub kl_user: f64,
    pub kl_item: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingExample {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
    pub confidence: f64,
}

/// A mini-batch: rating examples plus the deduplicated entity lists they touch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub examples: Vec<RatingExample>,
    pub users: Vec<u32>,
    pub items: Vec<u32>,
}

impl Batch {
    pub fn from_examples(examples: Vec<RatingExample>) -> Self {
        let mut users: Vec<u32> = examples.iter().map(|e| e.user).collect();
        users.sort_unstable();
        users.dedup();
        let mut items: Vec<u32> = examples.iter().map(|e| e.item).collect();
        items.sort_unstable();
        items.dedup();
        Batch {
            examples,
            users,
            items,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rating_loss: f64,
    pub recon_user: f64,
    pub recon_item: f64,
    pub kl_user: f64,
    pub kl_item: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.rating_loss += other.rating_loss;
        self.recon_user += other.recon_user;
        self.recon_item += other.recon_item;
        self.kl_user += other.kl_user;
        self.kl_item += other.kl_item;
        self.regularizer += other.regularizer;
        self.total += other.total;
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// KL divergence between independent Bernoulli vectors:
/// sum_k q ln(q/rho) + (1-q) ln((1-q)/(1-rho)). Nonnegative, zero iff q = rho.
/// Components must lie strictly inside (0,1); clamp with [`KL_CLAMP`] first.
pub fn kl_bernoulli(q: ArrayView1<'_, f64>, rho: ArrayView1<'_, f64>) -> Result<f64> {
    if q.len() != rho.len() {
        return Err(CghError::LengthMismatch {
            left: q.len(),
            right: rho.len(),
        });
    }
    let mut total = 0.0;
    for (&qk, &rk) in q.iter().zip(rho.iter()) {
        if !(qk > 0.0 && qk < 1.0 && rk > 0.0 && rk < 1.0) {
            return Err(CghError::DomainError);
        }
        total += qk * (qk / rk).ln() + (1.0 - qk) * ((1.0 - qk) / (1.0 - rk)).ln();
    }
    Ok(total)
}

/// Immutable inputs the loss reads per entity.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub user_content: &'a ContentMatrix,
    pub item_content: &'a ContentMatrix,
    pub factors: &'a LatentFactors,
}

/// Gradient (or velocity) buffers mirroring the trainable tensors of a model:
/// per side, hidden layers, projection, codebook — the same order as
/// [`CghModel::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct SideGrads {
    pub hidden: Vec<(Array2<f64>, Array1<f64>)>,
    pub proj: (Array2<f64>, Array1<f64>),
    pub codebook: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub user: SideGrads,
    pub item: SideGrads,
}

impl GradientSet {
    pub fn zeros_like(model: &CghModel) -> Self {
        let side = |sm: &crate::model::SideModel| SideGrads {
            hidden: sm
                .encoder
                .hidden
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weight.dim()),
                        Array1::zeros(l.bias.len()),
                    )
                })
                .collect(),
            proj: (
                Array2::zeros(sm.encoder.proj.weight.dim()),
                Array1::zeros(sm.encoder.proj.bias.len()),
            ),
            codebook: Array2::zeros(sm.decoder.codebook.dim()),
        };
        GradientSet {
            user: side(&model.user),
            item: side(&model.item),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for sg in [&self.user, &self.item] {
            for (w, b) in &sg.hidden {
                out.push(w.as_slice().expect("standard layout"));
                out.push(b.as_slice().expect("standard layout"));
            }
            out.push(sg.proj.0.as_slice().expect("standard layout"));
            out.push(sg.proj.1.as_slice().expect("standard layout"));
            out.push(sg.codebook.as_slice().expect("standard layout"));
        }
        out
    }
}

struct EntityForward {
    fwd: Forward,
    /// Code vector used downstream: bits as reals, or the probabilities.
    code: Array1<f64>,
    /// Reconstruction residual x - C c, kept when the side's lambda > 0.
    resid: Option<Array1<f64>>,
}

struct BatchForward {
    users: Vec<EntityForward>,
    items: Vec<EntityForward>,
    breakdown: LossBreakdown,
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(KL_CLAMP, 1.0 - KL_CLAMP)
}

#[allow(clippy::too_many_arguments)]
fn forward_side<R: Rng>(
    model: &CghModel,
    side: crate::data::Side,
    entities: &[u32],
    data: &TrainData<'_>,
    mode: CodeMode,
    corruption: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<(Vec<EntityForward>, f64, f64)> {
    use crate::data::Side;
    let sm = model.side(side);
    let (content, factor_matrix) = match side {
        Side::User => (data.user_content, &data.factors.p),
        Side::Item => (data.item_content, &data.factors.q),
    };
    let mut out = Vec::with_capacity(entities.len());
    let mut recon = 0.0;
    let mut kl = 0.0;
    for &e in entities {
        let row = content.row(e as usize);
        let factor = factor_matrix.row(e as usize);
        let input = assemble_input(
            row,
            sm.content_dim,
            factor.to_slice(),
            model.r,
            corruption,
            rng,
        );
        if input.len() != sm.encoder.input_dim() {
            return Err(CghError::DimensionMismatch(format!(
                "{} entity {e}: encoder input {} vs {}",
                side.name(),
                input.len(),
                sm.encoder.input_dim()
            )));
        }
        let fwd = sm.encoder.forward(&input);
        let code: Array1<f64> = match mode {
            CodeMode::Relaxed => fwd.probs.clone(),
            CodeMode::Threshold => fwd.probs.mapv(|p| if p >= 0.5 { 1.0 } else { 0.0 }),
            CodeMode::Sample => fwd
                .probs
                .mapv(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }),
        };
        let resid = if lambda > 0.0 {
            let mut r_vec = Array1::zeros(sm.content_dim);
            for &(f, w) in row {
                r_vec[f as usize] = w;
            }
            r_vec -= &crate::model::decode_real(
                code.as_slice().expect("standard layout"),
                &sm.decoder.codebook,
            );
            recon += 0.5 * lambda * r_vec.iter().map(|v| v * v).sum::<f64>();
            Some(r_vec)
        } else {
            None
        };
        let kl_weight_active = true;
        if kl_weight_active {
            // KL uses clamped probabilities; weight applied by the caller.
            let qc = fwd.probs.mapv(clamp_prob);
            kl += kl_bernoulli(qc.view(), sm.prior.rho().view())?;
        }
        out.push(EntityForward { fwd, code, resid });
    }
    Ok((out, recon, kl))
}

fn reg_norm_sq(model: &CghModel, weights: &LossWeights) -> f64 {
    let mut total = 0.0;
    let sum_sq = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>();
    for sm in [&model.user, &model.item] {
        for layer in &sm.encoder.hidden {
            total += sum_sq(layer.weight.as_slice().expect("standard layout"));
            total += sum_sq(layer.bias.as_slice().expect("standard layout"));
        }
        total += sum_sq(sm.encoder.proj.weight.as_slice().expect("standard layout"));
        total += sum_sq(sm.encoder.proj.bias.as_slice().expect("standard layout"));
    }
    // Codebooks count as active parameters only when their side is learned.
    if weights.lambda_u > 0.0 {
        total += sum_sq(model.user.decoder.codebook.as_slice().expect("standard layout"));
    }
    if weights.lambda_v > 0.0 {
        total += sum_sq(model.item.decoder.codebook.as_slice().expect("standard layout"));
    }
    total
}

fn forward_batch<R: Rng>(
    model: &CghModel,
    data: &TrainData<'_>,
    batch: &Batch,
    weights: &LossWeights,
    mode: CodeMode,
    corruption: f64,
    rng: &mut R,
) -> Result<BatchForward> {
    use crate::data::Side;
    let (users, recon_user_raw, kl_user_raw) = forward_side(
        model,
        Side::User,
        &batch.users,
        data,
        mode,
        corruption,
        weights.lambda_u,
        rng,
    )?;
    let (items, recon_item_raw, kl_item_raw) = forward_side(
        model,
        Side::Item,
        &batch.items,
        data,
        mode,
        corruption,
        weights.lambda_v,
        rng,
    )?;

    let r = model.r as f64;
    let mut rating_loss = 0.0;
    for ex in &batch.examples {
        let ui = batch.users.binary_search(&ex.user).expect("user in batch");
        let ii = batch.items.binary_search(&ex.item).expect("item in batch");
        let cu = &users[ui].code;
        let ci = &items[ii].code;
        let mut dist_sq = 0.0;
        for (a, b) in cu.iter().zip(ci.iter()) {
            dist_sq += (a - b) * (a - b);
        }
        let delta = 1.0 - dist_sq / r;
        let err = ex.rating - delta;
        rating_loss += 0.5 * ex.confidence * err * err;
    }

    let kl_user = weights.kl_user * kl_user_raw;
    let kl_item = weights.kl_item * kl_item_raw;
    let regularizer = weights.reg * reg_norm_sq(model, weights);
    let breakdown = LossBreakdown {
        rating_loss,
        recon_user: recon_user_raw,
        recon_item: recon_item_raw,
        kl_user,
        kl_item,
        regularizer,
        total: rating_loss + recon_user_raw + recon_item_raw + kl_user + kl_item + regularizer,
    };
    Ok(BatchForward {
        users,
        items,
        breakdown,
    })
}

/// Evaluate the batch loss. Deterministic given the rng state; Sample mode
/// draws codes, the other modes only draw for corruption.
pub fn loss<R: Rng>(
    model: &CghModel,
    data: &TrainData<'_>,
    batch: &Batch,
    weights: &LossWeights,
    mode: CodeMode,
    corruption: f64,
    rng: &mut R,
) -> Result<LossBreakdown> {
    Ok(forward_batch(model, data, batch, weights, mode, corruption, rng)?.breakdown)
}

/// Loss plus analytic gradients of every trainable tensor. Straight-through:
/// the gradient w.r.t. a binarized code is applied to the probabilities as if
/// binarization were the identity; in relaxed mode the same formula is exact.
pub fn loss_and_grad<R: Rng>(
    model: &CghModel,
    data: &TrainData<'_>,
    batch: &Batch,
    weights: &LossWeights,
    mode: CodeMode,
    corruption: f64,
    rng: &mut R,
) -> Result<(LossBreakdown, GradientSet)> {
    use crate::data::Side;
    let fwd = forward_batch(model, data, batch, weights, mode, corruption, rng)?;
    let mut grads = GradientSet::zeros_like(model);
    let r = model.r as f64;

    // d(loss)/d(code) per entity, accumulated over rating examples.
    let mut d_code_user: Vec<Array1<f64>> =
        batch.users.iter().map(|_| Array1::zeros(model.r)).collect();
    let mut d_code_item: Vec<Array1<f64>> =
        batch.items.iter().map(|_| Array1::zeros(model.r)).collect();
    for ex in &batch.examples {
        let ui = batch.users.binary_search(&ex.user).expect("user in batch");
        let ii = batch.items.binary_search(&ex.item).expect("item in batch");
        let cu = &fwd.users[ui].code;
        let ci = &fwd.items[ii].code;
        let mut dist_sq = 0.0;
        for (a, b) in cu.iter().zip(ci.iter()) {
            dist_sq += (a - b) * (a - b);
        }
        let delta = 1.0 - dist_sq / r;
        let err = ex.rating - delta;
        // d/dc_u (C/2)(r - delta)^2 = C err (2/r) (c_u - c_i), item side negated.
        let coef = ex.confidence * err * 2.0 / r;
        for k in 0..model.r {
            let diff = cu[k] - ci[k];
            d_code_user[ui][k] += coef * diff;
            d_code_item[ii][k] -= coef * diff;
        }
    }

    backward_side(
        model,
        Side::User,
        &batch.users,
        &fwd.users,
        d_code_user,
        weights.lambda_u,
        weights.kl_user,
        &mut grads.user,
    );
    backward_side(
        model,
        Side::Item,
        &batch.items,
        &fwd.items,
        d_code_item,
        weights.lambda_v,
        weights.kl_item,
        &mut grads.item,
    );

    if weights.reg > 0.0 {
        add_reg_grads(model, weights, &mut grads);
    }

    Ok((fwd.breakdown, grads))
}

#[allow(clippy::too_many_arguments)]
fn backward_side(
    model: &CghModel,
    side: crate::data::Side,
    entities: &[u32],
    forwards: &[EntityForward],
    mut d_code: Vec<Array1<f64>>,
    lambda: f64,
    kl_weight: f64,
    grads: &mut SideGrads,
) {
    let _ = entities;
    let sm = model.side(side);
    let r = model.r;
    for (idx, ef) in forwards.iter().enumerate() {
        // Reconstruction: d/dc (lambda/2)|x - C c|^2 = -lambda C^T (x - C c),
        // d/dC = -lambda (x - C c) c^T.
        if lambda > 0.0 {
            let resid = ef.resid.as_ref().expect("resid kept when lambda > 0");
            let resid = resid.as_slice().expect("standard layout");
            let code = ef.code.as_slice().expect("standard layout");
            let cb = sm.decoder.codebook.as_slice().expect("standard layout");
            let gcb = grads.codebook.as_slice_mut().expect("standard layout");
            let dc = d_code[idx].as_slice_mut().expect("standard layout");
            for (row, &rv) in resid.iter().enumerate() {
                let cb_row = &cb[row * r..(row + 1) * r];
                let gcb_row = &mut gcb[row * r..(row + 1) * r];
                let lam_rv = lambda * rv;
                for k in 0..r {
                    dc[k] -= lam_rv * cb_row[k];
                    gcb_row[k] -= lam_rv * code[k];
                }
            }
        }

        // d(loss)/d(probs): straight-through code gradient plus the KL term.
        // The KL gradient vanishes where the clamp is active.
        let mut d_prob = d_code[idx].clone();
        if kl_weight > 0.0 {
            for (k, &q) in ef.fwd.probs.iter().enumerate() {
                if q > KL_CLAMP && q < 1.0 - KL_CLAMP {
                    let rho = sm.prior.rho()[k];
                    d_prob[k] += kl_weight * ((q * (1.0 - rho)) / ((1.0 - q) * rho)).ln();
                }
            }
        }

        // d(probs)/d(logits) = q (1 - q).
        let d_logits: Vec<f64> = ef
            .fwd
            .probs
            .iter()
            .zip(d_prob.iter())
            .map(|(&q, &dp)| dp * q * (1.0 - q))
            .collect();

        // Projection layer.
        let last_act: &[f64] = match ef.fwd.activations.last() {
            Some(a) => a.as_slice().expect("standard layout"),
            None => &ef.fwd.input,
        };
        let in_dim = last_act.len();
        let gw = grads.proj.0.as_slice_mut().expect("standard layout");
        let gb = grads.proj.1.as_slice_mut().expect("standard layout");
        let w = sm.encoder.proj.weight.as_slice().expect("standard layout");
        let mut d_act = vec![0.0; in_dim];
        for (k, &dz) in d_logits.iter().enumerate() {
            gb[k] += dz;
            let gw_row = &mut gw[k * in_dim..(k + 1) * in_dim];
            let w_row = &w[k * in_dim..(k + 1) * in_dim];
            for j in 0..in_dim {
                gw_row[j] += dz * last_act[j];
                d_act[j] += w_row[j] * dz;
            }
        }

        // Hidden tanh layers, last to first.
        for l in (0..sm.encoder.hidden.len()).rev() {
            let act = ef.fwd.activations[l].as_slice().expect("standard layout");
            let d_pre: Vec<f64> = act
                .iter()
                .zip(d_act.iter())
                .map(|(&h, &dh)| dh * (1.0 - h * h))
                .collect();
            let prev_act: &[f64] = if l == 0 {
                &ef.fwd.input
            } else {
                ef.fwd.activations[l - 1].as_slice().expect("standard layout")
            };
            let in_dim = prev_act.len();
            let (gw, gb) = &mut grads.hidden[l];
            let gw = gw.as_slice_mut().expect("standard layout");
            let gb = gb.as_slice_mut().expect("standard layout");
            let w = sm.encoder.hidden[l].weight.as_slice().expect("standard layout");
            let mut d_prev = vec![0.0; in_dim];
            for (o, &dp) in d_pre.iter().enumerate() {
                gb[o] += dp;
                let gw_row = &mut gw[o * in_dim..(o + 1) * in_dim];
                let w_row = &w[o * in_dim..(o + 1) * in_dim];
                for j in 0..in_dim {
                    gw_row[j] += dp * prev_act[j];
                    d_prev[j] += w_row[j] * dp;
                }
            }
            d_act = d_prev;
        }
    }
}

fn add_reg_grads(model: &CghModel, weights: &LossWeights, grads: &mut GradientSet) {
    let two_reg = 2.0 * weights.reg;
    for (sm, sg, lambda) in [
        (&model.user, &mut grads.user, weights.lambda_u),
        (&model.item, &mut grads.item, weights.lambda_v),
    ] {
        for (l, layer) in sm.encoder.hidden.iter().enumerate() {
            sg.hidden[l].0.scaled_add(two_reg, &layer.weight);
            sg.hidden[l].1.scaled_add(two_reg, &layer.bias);
        }
        sg.proj.0.scaled_add(two_reg, &sm.encoder.proj.weight);
        sg.proj.1.scaled_add(two_reg, &sm.encoder.proj.bias);
        if lambda > 0.0 {
            sg.codebook.scaled_add(two_reg, &sm.decoder.codebook);
        }
    }
}
