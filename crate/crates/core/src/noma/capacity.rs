use super::group::{
    gamma_threshold, order_by_gain, sinr, sum_rate, GammaForm, NomaGroup, NomaUser, PowerMode,
};
use crate::channel::{sr_sample, ShadowedRicianParams};
use crate::constellation::SatelliteId;
use crate::error::{invalid, Result};
use crate::seed::rng_for;

/// Sum rate when the band is split equally among the users instead:
/// `(1/K) Σ log2(1 + K a_k ρ |λ_k|²)` per unit of total bandwidth.
pub fn oma_sum_rate(group: &NomaGroup) -> f64 {
    let k = group.len() as f64;
    group
        .users
        .iter()
        .map(|u| (k * u.power_coeff * group.snr_rho * u.gain).ln_1p() / std::f64::consts::LN_2)
        .sum::<f64>()
        / k
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityParams {
    pub rho: f64,
    pub fading: ShadowedRicianParams,
    /// Deterministic large-scale gain per shell; users are assigned to shells
    /// round-robin.
    pub shell_scales: Vec<f64>,
    /// Per-shell distance, used only by dynamic power allocation.
    pub shell_distances_m: Vec<f64>,
    pub target_rate: f64,
    pub gamma_form: GammaForm,
    pub power_mode: PowerMode,
    /// Fading draws averaged per point.
    pub draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityPoint {
    pub users: usize,
    /// Mean NOMA sum rate, bits/s/Hz.
    pub sum_rate: f64,
    /// Mean sum rate counting only users whose SINR meets the threshold.
    pub feasible_rate: f64,
    pub feasible_users: f64,
    pub oma_rate: f64,
}

pub fn capacity_sweep(
    users: impl IntoIterator<Item = usize>,
    params: &CapacityParams,
) -> Result<Vec<CapacityPoint>> {
    let shells = params.shell_scales.len();
    if shells == 0 {
        return Err(invalid("shell_scales", "need at least one shell"));
    }
    if params.power_mode == PowerMode::Dynamic && params.shell_distances_m.len() != shells {
        return Err(invalid("shell_distances_m", "one distance per shell"));
    }
    if params.draws == 0 {
        return Err(invalid("draws", "must be positive"));
    }
    let gamma = gamma_threshold(params.target_rate, params.gamma_form);
    let mut out = Vec::new();
    for k in users {
        if k == 0 {
            return Err(invalid("users", "group size must be positive"));
        }
        let mut acc = CapacityPoint {
            users: k,
            sum_rate: 0.0,
            feasible_rate: 0.0,
            feasible_users: 0.0,
            oma_rate: 0.0,
        };
        for d in 0..params.draws {
            let mut rng = rng_for(params.seed, "capacity", &[k as u64, d as u64]);
            let members: Vec<NomaUser> = (0..k)
                .map(|i| {
                    let shell = i % shells;
                    let mut u = NomaUser::new(
                        SatelliteId::new(shell, 0, i / shells),
                        sr_sample(&params.fading, &mut rng) * params.shell_scales[shell],
                    );
                    u.target_rate = params.target_rate;
                    u
                })
                .collect();
            let mut group = order_by_gain(members, params.rho);
            let distances: Vec<f64> = match params.power_mode {
                PowerMode::Dynamic => group
                    .users
                    .iter()
                    .map(|u| params.shell_distances_m[u.shell_index])
                    .collect(),
                PowerMode::Static => Vec::new(),
            };
            group.allocate(params.power_mode, &distances)?;
            let rates = sum_rate(&group);
            acc.sum_rate += rates.total;
            acc.oma_rate += oma_sum_rate(&group);
            for (i, r) in rates.per_user.iter().enumerate() {
                if sinr(&group, i) >= gamma {
                    acc.feasible_rate += r;
                    acc.feasible_users += 1.0;
                }
            }
        }
        let n = params.draws as f64;
        acc.sum_rate /= n;
        acc.feasible_rate /= n;
        acc.feasible_users /= n;
        acc.oma_rate /= n;
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rho: f64) -> CapacityParams {
        CapacityParams {
            rho,
            fading: ShadowedRicianParams::from_multipath_power(0.279, 2, 0.251).unwrap(),
            shell_scales: vec![1.0, 0.5, 0.25],
            shell_distances_m: vec![500e3, 1000e3, 1500e3],
            target_rate: 0.25,
            gamma_form: GammaForm::DoubleRate,
            power_mode: PowerMode::Static,
            draws: 50,
            seed: 4,
        }
    }

    #[test]
    fn single_user_is_plain_rate_and_equals_oma() {
        let p = params(100.0);
        let pt = &capacity_sweep([1], &p).unwrap()[0];
        assert!((pt.sum_rate - pt.oma_rate).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_rho_and_feasibility_drops_off() {
        let lo = capacity_sweep(1..=12, &params(100.0)).unwrap();
        let hi = capacity_sweep(1..=12, &params(1000.0)).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            assert!(b.sum_rate >= a.sum_rate);
            assert!(a.sum_rate + 1e-12 >= a.oma_rate);
        }
        let best = hi
            .iter()
            .max_by(|a, b| a.feasible_rate.total_cmp(&b.feasible_rate))
            .unwrap();
        assert!(best.users < 12, "feasible rate should peak before the end");
        assert!(hi.last().unwrap().feasible_rate < best.feasible_rate);
    }
}
