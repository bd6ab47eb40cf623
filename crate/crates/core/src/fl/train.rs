use rand::seq::SliceRandom;

use super::data::DatasetShard;
use super::model::{LogisticModel, ModelVector};
use crate::error::{invalid, Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// `ζ_β = epsilon / (β + delta0)` for round `β`.
    Decaying {
        epsilon: f64,
        delta0: f64,
    },
}

impl LrSchedule {
    pub fn at(&self, round: usize) -> f64 {
        match *self {
            LrSchedule::Constant(z) => z,
            LrSchedule::Decaying { epsilon, delta0 } => epsilon / (round as f64 + delta0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Local epochs `J` (full passes over the shard) per round.
    pub local_epochs: usize,
    pub lr: LrSchedule,
    pub batch_size: usize,
    pub l2_reg: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_epochs == 0 {
            return Err(invalid("local_epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be at least 1"));
        }
        if !(self.l2_reg >= 0.0) {
            return Err(invalid("l2_reg", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Runs `J` epochs of shuffled mini-batch SGD from `model`. Batch order for
/// each epoch comes from `rng_for(seed, "local-train", [shell, orbit, slot,
/// round, epoch])`, so results do not depend on scheduling.
pub fn local_train(
    model: &ModelVector,
    shard: &DatasetShard,
    cfg: &TrainConfig,
    round: usize,
    seed: u64,
) -> Result<ModelVector> {
    cfg.validate()?;
    let lm = LogisticModel::for_dataset(&shard.data);
    if model.dim() != lm.param_count() {
        return Err(invalid(
            "model",
            format!(
                "dimension {} does not match {}",
                model.dim(),
                lm.param_count()
            ),
        ));
    }
    let lr = cfg.lr.at(round);
    let mut w = model.clone();
    let mut grad = vec![0.0; w.dim()];
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let id = shard.owner;
    for epoch in 0..cfg.local_epochs {
        let mut rng = rng_for(
            seed,
            "local-train",
            &[
                id.shell_index as u64,
                id.orbit_index as u64,
                id.slot_index as u64,
                round as u64,
                epoch as u64,
            ],
        );
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            lm.loss_grad(&w, &shard.data, Some(batch), cfg.l2_reg, &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    context: id.to_string(),
                    round,
                    epoch,
                });
            }
            for (wi, gi) in w.weights.iter_mut().zip(&grad) {
                *wi -= lr * gi;
            }
        }
    }
    Ok(w)
}
