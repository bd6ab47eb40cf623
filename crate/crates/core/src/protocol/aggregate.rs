//! Source-side sorting, deduplication, balancing and global aggregation.

use std::collections::{BTreeMap, BTreeSet};

use crate::constellation::{Constellation, OrbitId, SatelliteId};
use crate::error::{invalid, Result};
use crate::fl::ModelVector;

/// A partially aggregated orbit model: `Σ_{k∈contributors} (|D_k|/|D_orbit|) w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubOrbitalModel {
    pub weights: ModelVector,
    /// Sorted, duplicate-free.
    pub contributors: Vec<SatelliteId>,
    pub orbit: OrbitId,
    pub round: usize,
    /// Total data size of the contributors.
    pub carried_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InboxEntry {
    pub model: SubOrbitalModel,
    pub received_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    pub global: Option<ModelVector>,
    pub waited: bool,
    pub missing: Vec<SatelliteId>,
    /// Entries kept after deduplication.
    pub used: usize,
    /// Effective weight of every satellite within its orbit.
    pub orbit_weights: BTreeMap<OrbitId, f64>,
}

/// Sorts entries per orbit, keeps one model per contributor set (larger sets
/// first, then earliest receipt), and aggregates once every satellite is
/// covered:
/// `w = Σ_l (|D_l|/|D|) Σ_{U kept in l} w_U`.
pub fn aggregate_round(
    inbox: &[InboxEntry],
    constellation: &Constellation,
    data_sizes: &BTreeMap<SatelliteId, usize>,
    round: usize,
) -> Result<AggregateOutcome> {
    let mut per_orbit: BTreeMap<OrbitId, Vec<&InboxEntry>> = BTreeMap::new();
    for e in inbox.iter().filter(|e| e.model.round == round) {
        if e.model.contributors.is_empty() {
            return Err(invalid("inbox", "sub-orbital model without contributors"));
        }
        per_orbit.entry(e.model.orbit).or_default().push(e);
    }
    let mut kept: BTreeMap<OrbitId, Vec<&InboxEntry>> = BTreeMap::new();
    let mut covered: BTreeSet<SatelliteId> = BTreeSet::new();
    for (orbit, mut entries) in per_orbit {
        entries.sort_by(|a, b| {
            b.model
                .contributors
                .len()
                .cmp(&a.model.contributors.len())
                .then(a.received_s.total_cmp(&b.received_s))
                .then(a.model.contributors.cmp(&b.model.contributors))
        });
        let slot = kept.entry(orbit).or_default();
        for e in entries {
            if e.model.contributors.iter().all(|c| !covered.contains(c)) {
                covered.extend(e.model.contributors.iter().copied());
                slot.push(e);
            }
        }
    }
    let missing: Vec<SatelliteId> = constellation
        .ids()
        .iter()
        .copied()
        .filter(|id| !covered.contains(id))
        .collect();
    if !missing.is_empty() {
        return Ok(AggregateOutcome {
            global: None,
            waited: true,
            missing,
            used: kept.values().map(Vec::len).sum(),
            orbit_weights: BTreeMap::new(),
        });
    }
    let total: usize = data_sizes.values().sum();
    let mut orbit_sizes: BTreeMap<OrbitId, usize> = BTreeMap::new();
    for (id, s) in data_sizes {
        *orbit_sizes.entry(id.orbit()).or_default() += s;
    }
    let Some(first) = kept.values().flatten().next() else {
        return Err(invalid("inbox", "nothing to aggregate"));
    };
    let dim = first.model.weights.dim();
    let mut global = ModelVector::zeros(dim);
    let mut orbit_weights = BTreeMap::new();
    for (orbit, entries) in &kept {
        let d_l = orbit_sizes.get(orbit).copied().unwrap_or(0);
        let scale = d_l as f64 / total as f64;
        let mut w_sum = 0.0;
        for e in entries {
            global.add_scaled(scale, &e.model.weights);
            w_sum += e.model.carried_size as f64 / d_l as f64;
        }
        orbit_weights.insert(*orbit, w_sum);
    }
    Ok(AggregateOutcome {
        global: Some(global),
        waited: false,
        missing,
        used: kept.values().map(Vec::len).sum(),
        orbit_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_walker_delta, ShellSpec};

    fn entry(slots: &[(usize, usize)], w: f64, size: usize, t: f64) -> InboxEntry {
        let contributors: Vec<SatelliteId> = slots
            .iter()
            .map(|&(o, k)| SatelliteId::new(0, o, k))
            .collect();
        InboxEntry {
            model: SubOrbitalModel {
                weights: ModelVector::from_vec(vec![w]),
                orbit: contributors[0].orbit(),
                contributors,
                round: 0,
                carried_size: size,
            },
            received_s: t,
        }
    }

    fn sizes(c: &Constellation) -> BTreeMap<SatelliteId, usize> {
        c.ids().iter().map(|id| (*id, 1)).collect()
    }

    #[test]
    fn duplicate_copies_counted_once() {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 1, 2)]).unwrap();
        // Orbit data 2, chain weights already carry gamma = 1/2.
        let inbox = vec![
            entry(&[(0, 0)], 0.5, 1, 1.0),
            entry(&[(0, 0)], 0.5, 1, 2.0),
            entry(&[(0, 1)], 1.0, 1, 3.0),
        ];
        let out = aggregate_round(&inbox, &c, &sizes(&c), 0).unwrap();
        assert_eq!(out.used, 2);
        assert_eq!(out.global.unwrap().weights, vec![1.5]);
        assert_eq!(out.orbit_weights[&SatelliteId::new(0, 0, 0).orbit()], 1.0);
    }

    #[test]
    fn larger_chain_wins_over_its_parts() {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 1, 3)]).unwrap();
        let inbox = vec![
            entry(&[(0, 0)], 9.0, 1, 0.0),
            entry(&[(0, 0), (0, 1)], 1.0, 2, 5.0),
            entry(&[(0, 2)], 2.0, 1, 6.0),
        ];
        let out = aggregate_round(&inbox, &c, &sizes(&c), 0).unwrap();
        assert_eq!(out.used, 2);
        assert_eq!(out.global.unwrap().weights, vec![3.0]);
    }

    #[test]
    fn waits_for_missing_satellites() {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 2, 1)]).unwrap();
        let inbox = vec![entry(&[(0, 0)], 1.0, 1, 0.0)];
        let out = aggregate_round(&inbox, &c, &sizes(&c), 0).unwrap();
        assert!(out.waited && out.global.is_none());
        assert_eq!(out.missing, vec![SatelliteId::new(0, 1, 0)]);
    }

    #[test]
    fn orbits_weighted_by_data_share() {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 2, 1)]).unwrap();
        let mut ds = sizes(&c);
        ds.insert(SatelliteId::new(0, 1, 0), 3);
        let inbox = vec![entry(&[(0, 0)], 2.0, 1, 0.0), entry(&[(1, 0)], 6.0, 3, 0.0)];
        let out = aggregate_round(&inbox, &c, &ds, 0).unwrap();
        assert_eq!(out.global.unwrap().weights, vec![0.25 * 2.0 + 0.75 * 6.0]);
    }

    #[test]
    fn stale_rounds_ignored() {
        let c = build_walker_delta(&[ShellSpec::walker(500e3, 53.0, 1, 1)]).unwrap();
        let inbox = vec![entry(&[(0, 0)], 1.0, 1, 0.0)];
        let out = aggregate_round(&inbox, &c, &sizes(&c), 1).unwrap();
        assert!(out.waited);
    }
}
