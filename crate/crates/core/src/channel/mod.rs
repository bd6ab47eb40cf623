//! Link-budget terms and fading statistics.

mod link;
mod nakagami;
mod shadowed_rician;
pub mod special;

pub use link::{
    beam_gain, free_space_path_loss, noise_power, pointing_loss, shl_budget, LinkBudgetParams,
    NoiseParams,
};
pub use nakagami::{nakagami_cdf, nakagami_pdf, NakagamiParams};
pub use shadowed_rician::{sr_cdf, sr_pdf, sr_sample, ShadowedRicianParams};
pub use special::hyp1f1_finite;
