//! NOMA superposition with successive interference cancellation: power
//! allocation, SINR and rates, outage probability (closed form and Monte
//! Carlo), a symbol-level QPSK BER estimator and OMA timing.

mod ber;
mod capacity;
mod group;
mod outage;
mod timing;

pub use ber::{q_function, qpsk_ber_monte_carlo, BerConfig, FadingMode};
pub use capacity::{capacity_sweep, oma_sum_rate, CapacityParams, CapacityPoint};
pub use group::{
    allocate_power, gamma_threshold, order_by_gain, sinr, sum_rate, sum_rate_closed,
    sum_rate_high_snr, GammaForm, NomaGroup, NomaUser, PowerMode, RateReport,
};
pub use outage::{
    outage_fs_closed, outage_monte_carlo, outage_ns_closed, outage_system_closed, InterferenceMode,
    OutageMethod, OutageReport, OutageScenario, MC_CHUNK,
};
pub use timing::oma_exchange_time;
