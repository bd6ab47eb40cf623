use std::collections::BTreeMap;

use proptest::prelude::*;

use leofl_core::constellation::build_walker_delta;
use leofl_core::fl::{fedavg, suborbital_accumulate, ModelVector};
use leofl_core::noma::{
    oma_sum_rate, order_by_gain, sum_rate, sum_rate_closed, NomaUser, PowerMode,
};
use leofl_core::protocol::{aggregate_round, InboxEntry, SubOrbitalModel};
use leofl_core::scenario::Sweep;
use leofl_core::seed::derive_seed;
use leofl_core::{SatelliteId, ShellSpec};

fn orbit_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..10, 1usize..6).prop_flat_map(|(k, dim)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), k),
            prop::collection::vec(1usize..300, k),
        )
    })
}

fn chain(models: &[ModelVector], sizes: &[usize], order: &[usize]) -> ModelVector {
    let total = sizes.iter().sum();
    let mut acc: Option<ModelVector> = None;
    for &i in order {
        acc = Some(suborbital_accumulate(
            acc.as_ref(),
            &models[i],
            sizes[i],
            total,
        ));
    }
    acc.unwrap()
}

fn max_diff(a: &ModelVector, b: &ModelVector) -> f64 {
    a.weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chain_matches_fedavg_from_any_start((raw, sizes) in orbit_strategy(), start in 0usize..10, reverse: bool) {
        let models: Vec<ModelVector> = raw.into_iter().map(ModelVector::from_vec).collect();
        let k = models.len();
        let mut order: Vec<usize> = (0..k).map(|j| (start + j) % k).collect();
        if reverse {
            order.reverse();
        }
        let want = fedavg(&models, &sizes).unwrap();
        prop_assert!(max_diff(&chain(&models, &sizes, &order), &want) < 1e-12);
    }

    #[test]
    fn telescoped_rates_equal_closed_form(
        gains in prop::collection::vec(1e-4..50.0f64, 1..10),
        rho_db in -20.0..60.0f64,
        dynamic: bool,
    ) {
        let users: Vec<NomaUser> = gains
            .iter()
            .enumerate()
            .map(|(i, &g)| NomaUser::new(SatelliteId::new(0, 0, i), g))
            .collect();
        let k = users.len();
        let mut group = order_by_gain(users, 10f64.powf(rho_db / 10.0));
        let dist: Vec<f64> = (0..k).map(|i| 500e3 + 1e5 * i as f64).collect();
        group.allocate(if dynamic { PowerMode::Dynamic } else { PowerMode::Static }, &dist).unwrap();
        let a_sum: f64 = group.users.iter().map(|u| u.power_coeff).sum();
        prop_assert!((a_sum - 1.0).abs() < 1e-12);
        let rates = sum_rate(&group);
        prop_assert!((rates.total - sum_rate_closed(&group)).abs() < 1e-10);
        prop_assert!(rates.total + 1e-12 >= oma_sum_rate(&group));
    }

    #[test]
    fn aggregation_ignores_inbox_order(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), dup in 0usize..6) {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 2, 3)]).unwrap();
        let sizes: BTreeMap<SatelliteId, usize> = c.ids().iter().enumerate().map(|(i, id)| (*id, i + 1)).collect();
        let mut entries: Vec<InboxEntry> = c
            .ids()
            .iter()
            .map(|id| {
                let orbit_total: usize = sizes.iter().filter(|(s, _)| s.orbit() == id.orbit()).map(|(_, v)| v).sum();
                let gamma = sizes[id] as f64 / orbit_total as f64;
                InboxEntry {
                    model: SubOrbitalModel {
                        weights: ModelVector::from_vec(vec![gamma * (id.slot_index as f64 + 1.0), gamma]),
                        contributors: vec![*id],
                        orbit: id.orbit(),
                        round: 2,
                        carried_size: sizes[id],
                    },
                    received_s: 10.0,
                }
            })
            .collect();
        entries.push(entries[dup].clone());
        let base = aggregate_round(&entries, &c, &sizes, 2).unwrap().global.unwrap();
        let shuffled: Vec<InboxEntry> = perm.iter().map(|&i| entries[i].clone()).chain(entries[6..].iter().cloned()).collect();
        let again = aggregate_round(&shuffled, &c, &sizes, 2).unwrap().global.unwrap();
        prop_assert!(max_diff(&base, &again) < 1e-12);
        // Second coordinate is Σ_l share_l · Σ γ = 1.
        prop_assert!((base.weights[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_inclusive_and_evenly_spaced(start in -50i32..50, n in 0usize..40, step in 1u32..20) {
        let step = f64::from(step) / 4.0;
        let stop = f64::from(start) + n as f64 * step;
        let s = Sweep::parse(&format!("{start}:{stop}:{step}")).unwrap();
        let v = s.values();
        prop_assert_eq!(v.len(), n + 1);
        prop_assert!((v[n] - stop).abs() < 1e-9);
    }

    #[test]
    fn seeds_depend_on_every_index(master: u64, a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, "x", &[a]), derive_seed(master, "x", &[b]));
        prop_assert_ne!(derive_seed(master, "x", &[a, b]), derive_seed(master, "x", &[b, a]));
        prop_assert_eq!(derive_seed(master, "x", &[a]), derive_seed(master, "x", &[a]));
    }

    #[test]
    fn walker_shells_are_evenly_spaced(orbits in 1usize..6, per in 1usize..12, alt in 400.0..2000.0f64) {
        let c = build_walker_delta(&[ShellSpec::walker(alt * 1e3, 60.0, orbits, per)]).unwrap();
        prop_assert_eq!(c.len(), orbits * per);
        for (orbit, sats) in c.orbits() {
            prop_assert_eq!(sats.len(), per);
            prop_assert_eq!(c.sats_in_orbit(orbit), per);
        }
        let r = leofl_core::constellation::build_walker_delta(&[ShellSpec::walker(alt * 1e3, 60.0, orbits, per)]).unwrap();
        let p0 = r.position_at(0, 0.0);
        prop_assert!((p0.norm() - (6371e3 + alt * 1e3)).abs() < 1e-3);
    }
}
