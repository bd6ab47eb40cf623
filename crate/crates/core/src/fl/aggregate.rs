use super::model::ModelVector;
use crate::error::{invalid, Result};

/// Data-size weighted average `Σ (|D_k|/|D|) w_k`.
pub fn fedavg(models: &[ModelVector], sizes: &[usize]) -> Result<ModelVector> {
    if models.is_empty() {
        return Err(invalid("models", "fedavg needs at least one model"));
    }
    if models.len() != sizes.len() {
        return Err(invalid("sizes", "one size per model"));
    }
    let dim = models[0].dim();
    if models.iter().any(|m| m.dim() != dim) {
        return Err(invalid("models", "dimension mismatch"));
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(invalid("sizes", "total data size is zero"));
    }
    let mut out = ModelVector::zeros(dim);
    for (m, &s) in models.iter().zip(sizes) {
        out.add_scaled(s as f64 / total as f64, m);
    }
    Ok(out)
}

/// One step of the intra-orbit chain: `γ·own + incoming` with
/// `γ = own_size / orbit_total_size`. The chain head passes `None`.
pub fn suborbital_accumulate(
    incoming: Option<&ModelVector>,
    own: &ModelVector,
    own_size: usize,
    orbit_total_size: usize,
) -> ModelVector {
    let gamma = own_size as f64 / orbit_total_size as f64;
    let mut out = own.scaled(gamma);
    if let Some(acc) = incoming {
        out.add_scaled(1.0, acc);
    }
    out
}
