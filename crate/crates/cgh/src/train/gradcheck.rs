//! Central finite-difference validation of the analytic gradients.
//!
//! Runs in relaxed mode (probabilities in place of codes, no sampling, no
//! corruption) so the objective is smooth and the analytic gradient is exact
//! rather than a straight-through surrogate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::CghModel;
use crate::train::loss::{loss, loss_and_grad, Batch, CodeMode, LossWeights, TrainData};

fn set_param(model: &mut CghModel, tensor: usize, elem: usize, value: f64) {
    model.param_slices_mut()[tensor][elem] = value;
}

fn get_param(model: &CghModel, tensor: usize, elem: usize) -> f64 {
    model.param_slices()[tensor][elem]
}

/// Probe `n_probes` randomly chosen parameters and return the worst relative
/// error between analytic and central-difference gradients of the total loss.
pub fn gradient_check(
    model: &mut CghModel,
    data: &TrainData<'_>,
    batch: &Batch,
    weights: &LossWeights,
    eps: f64,
    n_probes: usize,
    seed: u64,
) -> Result<f64> {
    let mut no_draws = ChaCha8Rng::seed_from_u64(0);
    let (_, grads) = loss_and_grad(
        model,
        data,
        batch,
        weights,
        CodeMode::Relaxed,
        0.0,
        &mut no_draws,
    )?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
    let lens: Vec<usize> = analytic.iter().map(|s| s.len()).collect();
    let total: usize = lens.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel: f64 = 0.0;
    for _ in 0..n_probes {
        let mut flat = rng.random_range(0..total);
        let mut tensor = 0;
        while flat >= lens[tensor] {
            flat -= lens[tensor];
            tensor += 1;
        }
        let elem = flat;

        let orig = get_param(model, tensor, elem);
        set_param(model, tensor, elem, orig + eps);
        let plus = loss(model, data, batch, weights, CodeMode::Relaxed, 0.0, &mut no_draws)?.total;
        set_param(model, tensor, elem, orig - eps);
        let minus = loss(model, data, batch, weights, CodeMode::Relaxed, 0.0, &mut no_draws)?.total;
        set_param(model, tensor, elem, orig);

        let numeric = (plus - minus) / (2.0 * eps);
        let exact = analytic[tensor][elem];
        let scale = numeric.abs().max(exact.abs());
        if scale < 1e-10 {
            continue;
        }
        max_rel = max_rel.max((numeric - exact).abs() / scale);
    }
    Ok(max_rel)
}
