//! Discrete-event execution of one FL run.
//!
//! Each round has three overlapping phases: the global model travels around
//! the server ring and is broadcast to satellites as they come into view;
//! satellites train and pass sub-orbital models along their orbit until a
//! visible satellite uplinks them; uplinked models travel back to the source,
//! which aggregates once every satellite is covered.
//!
//! Chain rule within an orbit: a satellite that finishes training while
//! visible uplinks whatever chain it holds and starts a new chain with its
//! own model; an invisible one adds its model to the held chain and forwards
//! it. A chain reaching an already trained satellite is uplinked there (at
//! the next contact if the satellite is out of view).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rayon::prelude::*;

use super::aggregate::{aggregate_round, InboxEntry, SubOrbitalModel};
use super::ring::HapRing;
use crate::channel::{shl_budget, LinkBudgetParams};
use crate::constellation::{Constellation, ContactPlan, SatelliteId};
use crate::error::{invalid, Error, Result};
use crate::fl::{evaluate, local_train, Dataset, DatasetShard, Metrics, ModelVector, TrainConfig};
use crate::noma::{order_by_gain, sinr, NomaUser, PowerMode};
use crate::units::SPEED_OF_LIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Toward increasing slot index.
    #[default]
    Prograde,
    Retrograde,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UplinkModel {
    FixedRate {
        rate_bps: f64,
    },
    /// Rate of the satellite within the NOMA group of concurrent uplinks to
    /// the same server.
    Noma {
        bandwidth_hz: f64,
        /// Transmit SNR `P_s/σ²`.
        rho: f64,
        /// Folded into the gains when present; otherwise unit large-scale gain.
        link: Option<LinkBudgetParams>,
        /// Mean small-scale gain per shell.
        mean_gain_per_shell: Vec<f64>,
        power_mode: PowerMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Termination {
    pub max_rounds: usize,
    pub max_sim_time_s: f64,
    pub target_loss: Option<f64>,
    pub target_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub direction: Direction,
    pub isl_rate_bps: f64,
    pub ihl_rate_bps: f64,
    pub broadcast_rate_bps: f64,
    pub train_time_s: f64,
    pub uplink: UplinkModel,
    /// Zero transmission and propagation time on every link.
    pub instant_links: bool,
    /// Replaces `dim × 32` as the model size in bits.
    pub payload_bits_override: Option<f64>,
    /// Metadata bits per satellite ID carried with a sub-orbital model.
    pub id_bits: f64,
    pub termination: Termination,
    pub record_trace: bool,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("isl_rate_bps", self.isl_rate_bps),
            ("ihl_rate_bps", self.ihl_rate_bps),
            ("broadcast_rate_bps", self.broadcast_rate_bps),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(self.train_time_s >= 0.0) {
            return Err(invalid("train_time_s", "must be nonnegative"));
        }
        if self.termination.max_rounds == 0 {
            return Err(invalid("max_rounds", "must be at least 1"));
        }
        Ok(())
    }
}

/// Inputs of the learning side of a run.
#[derive(Debug, Clone)]
pub struct TrainingSetup<'a> {
    /// One shard per satellite, sorted by owner.
    pub shards: &'a [DatasetShard],
    pub train: TrainConfig,
    /// Data for the reported loss (normally the union of the shards).
    pub eval: &'a Dataset,
    /// Held-out data for the reported accuracy.
    pub test: &'a Dataset,
    pub initial: ModelVector,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Completed rounds so far (1-based).
    pub round: usize,
    pub global_model: ModelVector,
    pub sim_time_s: f64,
    pub bytes_transmitted: u64,
    pub contributors_count: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxRounds,
    TargetLoss,
    TargetAccuracy,
    SimTimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    HapForward,
    HapBroadcast,
    SatTrainDone,
    IslHop,
    UplinkDone,
    ReverseForward,
    AggregateReady,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::HapForward => "hap_forward",
            EventKind::HapBroadcast => "hap_broadcast",
            EventKind::SatTrainDone => "sat_train_done",
            EventKind::IslHop => "isl_hop",
            EventKind::UplinkDone => "uplink_done",
            EventKind::ReverseForward => "reverse_forward",
            EventKind::AggregateReady => "aggregate_ready",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// 0-based round the event belongs to.
    pub round: usize,
    pub at_s: f64,
    pub kind: EventKind,
    pub src: String,
    pub dst: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub records: Vec<RoundRecord>,
    pub trace: Vec<TraceEntry>,
    pub stop: StopReason,
    pub initial_metrics: Metrics,
    /// Satellites still missing when the run stopped mid-round.
    pub stalled: Vec<SatelliteId>,
}

#[derive(Debug, Clone)]
enum Payload {
    HapForward {
        node: usize,
    },
    HapBroadcast {
        node: usize,
        sat: usize,
    },
    SatTrainDone {
        sat: usize,
    },
    IslHop {
        from: usize,
        to: usize,
        chain: SubOrbitalModel,
    },
    UplinkDone {
        node: usize,
        sat: usize,
        chain: SubOrbitalModel,
    },
    ReverseForward {
        node: usize,
        chain: SubOrbitalModel,
    },
    AggregateReady,
}

impl Payload {
    fn kind(&self) -> EventKind {
        match self {
            Payload::HapForward { .. } => EventKind::HapForward,
            Payload::HapBroadcast { .. } => EventKind::HapBroadcast,
            Payload::SatTrainDone { .. } => EventKind::SatTrainDone,
            Payload::IslHop { .. } => EventKind::IslHop,
            Payload::UplinkDone { .. } => EventKind::UplinkDone,
            Payload::ReverseForward { .. } => EventKind::ReverseForward,
            Payload::AggregateReady => EventKind::AggregateReady,
        }
    }

    /// Secondary tie-break key.
    fn key(&self) -> u64 {
        match self {
            Payload::HapForward { node } => *node as u64,
            Payload::HapBroadcast { node, sat } => ((*sat as u64) << 16) | *node as u64,
            Payload::SatTrainDone { sat } => *sat as u64,
            Payload::IslHop { to, .. } => *to as u64,
            Payload::UplinkDone { node, sat, .. } => ((*sat as u64) << 16) | *node as u64,
            Payload::ReverseForward { node, .. } => *node as u64,
            Payload::AggregateReady => 0,
        }
    }
}

#[derive(Debug)]
struct Queued {
    at: f64,
    kind: EventKind,
    key: u64,
    seq: u64,
    round: usize,
    payload: Payload,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    /// Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then(other.kind.cmp(&self.kind))
            .then(other.key.cmp(&self.key))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Default)]
struct SatState {
    has_global: bool,
    trained: bool,
    holding: Option<SubOrbitalModel>,
}

struct Engine<'a, 'p> {
    setup: &'a TrainingSetup<'a>,
    proto: &'a ProtocolConfig,
    plan: &'p mut ContactPlan,
    constellation: Constellation,
    ring: HapRing,
    sizes: Vec<usize>,
    orbit_sizes: Vec<usize>,
    data_sizes: BTreeMap<SatelliteId, usize>,
    base_bits: f64,
    queue: BinaryHeap<Queued>,
    seq: u64,
    round: usize,
    global: ModelVector,
    locals: Vec<ModelVector>,
    sats: Vec<SatState>,
    inbox: Vec<InboxEntry>,
    covered: BTreeSet<SatelliteId>,
    aggregate_scheduled: bool,
    active_uplinks: Vec<Vec<(usize, f64)>>,
    bytes_round: f64,
    trace: Vec<TraceEntry>,
    records: Vec<RoundRecord>,
}

fn bytes(bits: f64) -> u64 {
    (bits / 8.0).ceil() as u64
}

impl<'a, 'p> Engine<'a, 'p> {
    fn push(&mut self, at: f64, payload: Payload) {
        self.seq += 1;
        self.queue.push(Queued {
            at,
            kind: payload.kind(),
            key: payload.key(),
            seq: self.seq,
            round: self.round,
            payload,
        });
    }

    fn sat_name(&self, s: usize) -> String {
        self.constellation.ids()[s].to_string()
    }

    fn node_name(&self, n: usize) -> String {
        self.plan.nodes()[n].name.clone()
    }

    fn log(&mut self, at: f64, kind: EventKind, src: String, dst: String, bits: f64) {
        if self.proto.record_trace {
            self.trace.push(TraceEntry {
                round: self.round,
                at_s: at,
                kind,
                src,
                dst,
                bytes: bytes(bits),
            });
        }
    }

    fn chain_bits(&self, chain: &SubOrbitalModel) -> f64 {
        self.base_bits + self.proto.id_bits * chain.contributors.len() as f64
    }

    fn next_hop(&self, s: usize) -> usize {
        let id = self.constellation.ids()[s];
        let k = self.constellation.sats_in_orbit(id.orbit());
        let slot = match self.proto.direction {
            Direction::Prograde => (id.slot_index + 1) % k,
            Direction::Retrograde => (id.slot_index + k - 1) % k,
        };
        self.constellation
            .index_of(SatelliteId::new(id.shell_index, id.orbit_index, slot))
            .expect("orbit neighbour exists")
    }

    fn own_chain(&self, s: usize) -> SubOrbitalModel {
        let id = self.constellation.ids()[s];
        let gamma = self.sizes[s] as f64 / self.orbit_sizes[s] as f64;
        SubOrbitalModel {
            weights: self.locals[s].scaled(gamma),
            contributors: vec![id],
            orbit: id.orbit(),
            round: self.round,
            carried_size: self.sizes[s],
        }
    }

    fn start_round(&mut self, t: f64) {
        let setup = self.setup;
        let global = &self.global;
        let round = self.round;
        self.locals = setup
            .shards
            .par_iter()
            .map(|shard| local_train(global, shard, &setup.train, round, setup.seed))
            .collect::<Result<Vec<_>>>()
            .unwrap_or_else(|e| panic!("local training failed: {e}"));
        self.sats = vec![SatState::default(); self.constellation.len()];
        self.inbox.clear();
        self.covered.clear();
        self.aggregate_scheduled = false;
        self.active_uplinks.iter_mut().for_each(Vec::clear);
        self.bytes_round = self.base_bits * (self.ring.len() - 1) as f64;
        let offsets = self
            .ring
            .receipt_offsets(self.base_bits, self.proto.instant_links);
        for node in self.ring.haps.clone() {
            self.push(t + offsets[node], Payload::HapForward { node });
        }
    }

    fn on_hap_forward(&mut self, node: usize, t: f64) {
        let src = self.node_name(self.ring.source_node());
        let dst = self.node_name(node);
        let bits = if node == self.ring.source_node() {
            0.0
        } else {
            self.base_bits
        };
        self.log(t, EventKind::HapForward, src, dst, bits);
        let tx = if self.proto.instant_links {
            0.0
        } else {
            self.base_bits / self.proto.broadcast_rate_bps
        };
        for s in 0..self.constellation.len() {
            if self.sats[s].has_global {
                continue;
            }
            if let Some(done) = self.plan.transfer(s, node, t, tx) {
                let prop = if self.proto.instant_links {
                    0.0
                } else {
                    self.plan.slant_range(s, node, done) / SPEED_OF_LIGHT
                };
                self.push(done + prop, Payload::HapBroadcast { node, sat: s });
            }
        }
    }

    fn on_broadcast(&mut self, node: usize, s: usize, t: f64) {
        if self.sats[s].has_global {
            return;
        }
        self.sats[s].has_global = true;
        self.bytes_round += self.base_bits;
        let (src, dst) = (self.node_name(node), self.sat_name(s));
        self.log(t, EventKind::HapBroadcast, src, dst, self.base_bits);
        self.push(
            t + self.proto.train_time_s,
            Payload::SatTrainDone { sat: s },
        );
    }

    fn send_isl(&mut self, from: usize, chain: SubOrbitalModel, t: f64) {
        let to = self.next_hop(from);
        let bits = self.base_bits + self.chain_bits(&chain);
        let dt = if self.proto.instant_links {
            0.0
        } else {
            let d = self.constellation.isl_distance_m(chain.orbit);
            bits / self.proto.isl_rate_bps + d / SPEED_OF_LIGHT
        };
        self.bytes_round += bits;
        self.push(t + dt, Payload::IslHop { from, to, chain });
    }

    fn merge(mut a: SubOrbitalModel, b: SubOrbitalModel) -> SubOrbitalModel {
        a.weights.add_scaled(1.0, &b.weights);
        a.contributors.extend(b.contributors);
        a.contributors.sort();
        a.contributors.dedup();
        a.carried_size += b.carried_size;
        a
    }

    fn on_train_done(&mut self, s: usize, t: f64) {
        self.sats[s].trained = true;
        let own = self.own_chain(s);
        let (src, dst) = (self.sat_name(s), self.sat_name(s));
        self.log(t, EventKind::SatTrainDone, src, dst, 0.0);
        let id = self.constellation.ids()[s];
        if self.constellation.sats_in_orbit(id.orbit()) == 1 {
            self.uplink(own, s, t);
            return;
        }
        let visible = !self.plan.visible_nodes(s, t).is_empty();
        let held = self.sats[s].holding.take();
        if visible {
            if let Some(c) = held {
                self.uplink(c, s, t);
            }
            self.send_isl(s, own, t);
        } else {
            let chain = match held {
                Some(c) => Self::merge(c, own),
                None => own,
            };
            self.send_isl(s, chain, t);
        }
    }

    fn on_isl(&mut self, from: usize, s: usize, chain: SubOrbitalModel, t: f64) {
        let bits = self.base_bits + self.chain_bits(&chain);
        let (src, dst) = (self.sat_name(from), self.sat_name(s));
        self.log(t, EventKind::IslHop, src, dst, bits);
        if !self.sats[s].has_global {
            self.sats[s].has_global = true;
            self.push(
                t + self.proto.train_time_s,
                Payload::SatTrainDone { sat: s },
            );
        }
        if self.sats[s].trained {
            self.uplink(chain, s, t);
        } else {
            let held = self.sats[s].holding.take();
            self.sats[s].holding = Some(match held {
                Some(c) => Self::merge(c, chain),
                None => chain,
            });
        }
    }

    fn uplink_rate(&mut self, s: usize, node: usize, t: f64) -> f64 {
        match &self.proto.uplink {
            UplinkModel::FixedRate { rate_bps } => *rate_bps,
            UplinkModel::Noma {
                bandwidth_hz,
                rho,
                link,
                mean_gain_per_shell,
                power_mode,
            } => {
                let active = &mut self.active_uplinks[node];
                active.retain(|&(_, end)| end > t);
                let mut members: Vec<usize> = active.iter().map(|&(m, _)| m).collect();
                members.push(s);
                members.sort_unstable();
                members.dedup();
                let ids = self.constellation.ids();
                let ranges: Vec<f64> = members
                    .iter()
                    .map(|&m| self.plan.slant_range(m, node, t))
                    .collect();
                let users: Vec<NomaUser> = members
                    .iter()
                    .zip(&ranges)
                    .map(|(&m, &d)| {
                        let id = ids[m];
                        let small = mean_gain_per_shell
                            .get(id.shell_index)
                            .copied()
                            .unwrap_or(1.0);
                        let large = link.as_ref().map_or(1.0, |l| shl_budget(l, d));
                        NomaUser::new(id, small * large)
                    })
                    .collect();
                let mut group = order_by_gain(users, *rho);
                let dist: Vec<f64> = group
                    .users
                    .iter()
                    .map(|u| {
                        let m = members
                            .iter()
                            .position(|&x| ids[x] == u.sat)
                            .expect("member");
                        ranges[m]
                    })
                    .collect();
                if group.allocate(*power_mode, &dist).is_err() {
                    return 0.0;
                }
                let k = group
                    .position_of(ids[s])
                    .expect("uplinking satellite in group");
                bandwidth_hz * sinr(&group, k).ln_1p() / std::f64::consts::LN_2
            }
        }
    }

    fn uplink(&mut self, chain: SubOrbitalModel, s: usize, t: f64) {
        let visible = self.plan.visible_nodes(s, t);
        let (receivers, start) = if visible.is_empty() {
            match self.plan.earliest_contact(s, t) {
                Some((node, start)) => (vec![node], start),
                None => return,
            }
        } else {
            (visible, t)
        };
        let bits = self.chain_bits(&chain);
        self.bytes_round += bits;
        for node in receivers {
            let (tx, prop_needed) = if self.proto.instant_links {
                (0.0, false)
            } else {
                let rate = self.uplink_rate(s, node, start);
                if !(rate > 0.0) {
                    continue;
                }
                (bits / rate, true)
            };
            let Some(done) = self.plan.transfer(s, node, start, tx) else {
                continue;
            };
            let at = done
                + if prop_needed {
                    self.plan.slant_range(s, node, done) / SPEED_OF_LIGHT
                } else {
                    0.0
                };
            self.active_uplinks[node].push((s, at));
            self.push(
                at,
                Payload::UplinkDone {
                    node,
                    sat: s,
                    chain: chain.clone(),
                },
            );
        }
    }

    fn on_uplink_done(&mut self, node: usize, s: usize, chain: SubOrbitalModel, t: f64) {
        let bits = self.chain_bits(&chain);
        let (src, dst) = (self.sat_name(s), self.node_name(node));
        self.log(t, EventKind::UplinkDone, src, dst, bits);
        let pos = self
            .ring
            .haps
            .iter()
            .position(|&h| h == node)
            .expect("ring node");
        let hops = self.ring.hops_from_source(pos);
        self.bytes_round += bits * hops as f64;
        let offset = self.ring.receipt_offsets(bits, self.proto.instant_links)[node];
        self.push(t + offset, Payload::ReverseForward { node, chain });
    }

    fn on_reverse(&mut self, node: usize, chain: SubOrbitalModel, t: f64) {
        let bits = self.chain_bits(&chain);
        let (src, dst) = (
            self.node_name(node),
            self.node_name(self.ring.source_node()),
        );
        self.log(t, EventKind::ReverseForward, src, dst, bits);
        self.covered.extend(chain.contributors.iter().copied());
        self.inbox.push(InboxEntry {
            model: chain,
            received_s: t,
        });
        if !self.aggregate_scheduled && self.covered.len() == self.constellation.len() {
            self.aggregate_scheduled = true;
            self.push(t, Payload::AggregateReady);
        }
    }

    /// Returns the stop reason if the run is over.
    fn on_aggregate(&mut self, t: f64) -> Result<Option<StopReason>> {
        let outcome = aggregate_round(
            &self.inbox,
            &self.constellation,
            &self.data_sizes,
            self.round,
        )?;
        let global = outcome.global.ok_or_else(|| Error::Unreachable {
            diagnosis: format!("aggregation incomplete, missing {:?}", outcome.missing),
        })?;
        let src = self.node_name(self.ring.source_node());
        self.log(t, EventKind::AggregateReady, src.clone(), src, 0.0);
        let m_train = evaluate(&global, self.setup.eval, self.setup.train.l2_reg);
        let m_test = evaluate(&global, self.setup.test, self.setup.train.l2_reg);
        self.global = global.clone();
        self.records.push(RoundRecord {
            round: self.round + 1,
            global_model: global,
            sim_time_s: t,
            bytes_transmitted: bytes(self.bytes_round),
            contributors_count: self.covered.len(),
            loss: m_train.loss,
            accuracy: m_test.accuracy,
        });
        let term = &self.proto.termination;
        if term.target_loss.is_some_and(|l| m_train.loss <= l) {
            return Ok(Some(StopReason::TargetLoss));
        }
        if term.target_accuracy.is_some_and(|a| m_test.accuracy >= a) {
            return Ok(Some(StopReason::TargetAccuracy));
        }
        if self.records.len() >= term.max_rounds {
            return Ok(Some(StopReason::MaxRounds));
        }
        self.round += 1;
        self.start_round(t);
        Ok(None)
    }
}

/// Time to deliver `bits` at `rate_bps` over `slant_range_m`:
/// transmission plus propagation.
pub fn uplink_duration(bits: f64, rate_bps: f64, slant_range_m: f64) -> f64 {
    bits / rate_bps + slant_range_m / SPEED_OF_LIGHT
}

/// Checks that every orbit has at least one satellite that ever sees a
/// server before the plan's horizon.
fn check_reachability(plan: &mut ContactPlan) -> Result<()> {
    let c = plan.constellation().clone();
    let mut dead = Vec::new();
    for (orbit, members) in c.orbits() {
        let reachable = members.iter().any(|id| {
            let s = c.index_of(*id).expect("member");
            plan.earliest_contact(s, 0.0).is_some()
        });
        if !reachable {
            dead.push(orbit.to_string());
        }
    }
    if dead.is_empty() {
        Ok(())
    } else {
        Err(Error::Unreachable {
            diagnosis: format!(
                "{} never see any parameter server within {:.0} s; their models cannot be delivered",
                dead.join(", "),
                plan.horizon_s()
            ),
        })
    }
}

/// Runs rounds until a termination criterion fires.
pub fn run_training(
    setup: &TrainingSetup<'_>,
    plan: &mut ContactPlan,
    proto: &ProtocolConfig,
) -> Result<TrainingRun> {
    proto.validate()?;
    setup.train.validate()?;
    let constellation = plan.constellation().clone();
    if constellation.is_empty() {
        return Err(Error::InvalidConstellation("zero satellites".into()));
    }
    if plan.nodes().is_empty() {
        return Err(invalid("nodes", "need at least one parameter server"));
    }
    if setup.shards.len() != constellation.len()
        || setup
            .shards
            .iter()
            .zip(constellation.ids())
            .any(|(s, id)| s.owner != *id)
    {
        return Err(invalid(
            "shards",
            "need exactly one shard per satellite, in ID order",
        ));
    }
    check_reachability(plan)?;

    let sizes: Vec<usize> = setup.shards.iter().map(DatasetShard::len).collect();
    let mut per_orbit: BTreeMap<_, usize> = BTreeMap::new();
    for (id, s) in constellation.ids().iter().zip(&sizes) {
        *per_orbit.entry(id.orbit()).or_default() += s;
    }
    let orbit_sizes = constellation
        .ids()
        .iter()
        .map(|id| per_orbit[&id.orbit()])
        .collect();
    let data_sizes = constellation
        .ids()
        .iter()
        .copied()
        .zip(sizes.iter().copied())
        .collect();
    let base_bits = proto
        .payload_bits_override
        .unwrap_or(32.0 * setup.initial.dim() as f64);
    let initial_metrics = Metrics {
        loss: evaluate(&setup.initial, setup.eval, setup.train.l2_reg).loss,
        accuracy: evaluate(&setup.initial, setup.test, setup.train.l2_reg).accuracy,
    };
    let nodes = plan.nodes().len();
    let mut engine = Engine {
        setup,
        proto,
        ring: HapRing::new(plan.nodes(), proto.ihl_rate_bps),
        plan,
        constellation,
        sizes,
        orbit_sizes,
        data_sizes,
        base_bits,
        queue: BinaryHeap::new(),
        seq: 0,
        round: 0,
        global: setup.initial.clone(),
        locals: Vec::new(),
        sats: Vec::new(),
        inbox: Vec::new(),
        covered: BTreeSet::new(),
        aggregate_scheduled: false,
        active_uplinks: vec![Vec::new(); nodes],
        bytes_round: 0.0,
        trace: Vec::new(),
        records: Vec::new(),
    };
    engine.start_round(0.0);
    let stop = loop {
        let Some(ev) = engine.queue.pop() else {
            break StopReason::SimTimeLimit;
        };
        if ev.at > proto.termination.max_sim_time_s {
            break StopReason::SimTimeLimit;
        }
        if ev.round != engine.round {
            continue;
        }
        let t = ev.at;
        match ev.payload {
            Payload::HapForward { node } => engine.on_hap_forward(node, t),
            Payload::HapBroadcast { node, sat } => engine.on_broadcast(node, sat, t),
            Payload::SatTrainDone { sat } => engine.on_train_done(sat, t),
            Payload::IslHop { from, to, chain } => engine.on_isl(from, to, chain, t),
            Payload::UplinkDone { node, sat, chain } => engine.on_uplink_done(node, sat, chain, t),
            Payload::ReverseForward { node, chain } => engine.on_reverse(node, chain, t),
            Payload::AggregateReady => {
                if let Some(reason) = engine.on_aggregate(t)? {
                    break reason;
                }
            }
        }
    };
    let stalled = if stop == StopReason::SimTimeLimit {
        engine
            .constellation
            .ids()
            .iter()
            .copied()
            .filter(|id| !engine.covered.contains(id))
            .collect()
    } else {
        Vec::new()
    };
    Ok(TrainingRun {
        records: engine.records,
        trace: engine.trace,
        stop,
        initial_metrics,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_walker_delta, GroundNode, NodeKind, ShellSpec};
    use crate::fl::{
        fedavg, generate_synthetic, partition, LogisticModel, LrSchedule, PartitionMode,
    };

    fn hap(name: &str, lon: f64) -> GroundNode {
        GroundNode {
            name: name.into(),
            latitude_deg: 0.0,
            longitude_deg: lon,
            altitude_m: 20e3,
            min_elevation_deg: 10.0,
            kind: NodeKind::Hap,
        }
    }

    fn proto(max_rounds: usize) -> ProtocolConfig {
        ProtocolConfig {
            direction: Direction::Prograde,
            isl_rate_bps: 1e9,
            ihl_rate_bps: 1e9,
            broadcast_rate_bps: 1e8,
            train_time_s: 5.0,
            uplink: UplinkModel::FixedRate { rate_bps: 1e6 },
            instant_links: true,
            payload_bits_override: None,
            id_bits: 32.0,
            termination: Termination {
                max_rounds,
                max_sim_time_s: 1e6,
                target_loss: None,
                target_accuracy: None,
            },
            record_trace: true,
        }
    }

    struct Fixture {
        constellation: Constellation,
        shards: Vec<DatasetShard>,
        data: Dataset,
        train: TrainConfig,
        initial: ModelVector,
    }

    fn fixture(shells: &[ShellSpec]) -> Fixture {
        let constellation = build_walker_delta(shells).unwrap();
        let data = generate_synthetic(3, 4, 40 * constellation.len(), 2.0, 3).unwrap();
        let shards = partition(&data, PartitionMode::Iid, &constellation, 5).unwrap();
        let dim = LogisticModel::for_dataset(&data).param_count();
        Fixture {
            constellation,
            shards,
            data,
            train: TrainConfig {
                local_epochs: 2,
                lr: LrSchedule::Constant(0.1),
                batch_size: 8,
                l2_reg: 0.01,
            },
            initial: ModelVector::zeros(dim),
        }
    }

    impl Fixture {
        fn setup(&self) -> TrainingSetup<'_> {
            TrainingSetup {
                shards: &self.shards,
                train: self.train,
                eval: &self.data,
                test: &self.data,
                initial: self.initial.clone(),
                seed: 11,
            }
        }
    }

    fn reference_fedavg(f: &Fixture, rounds: usize) -> Vec<ModelVector> {
        let sizes: Vec<usize> = f.shards.iter().map(DatasetShard::len).collect();
        let mut w = f.initial.clone();
        let mut out = Vec::new();
        for r in 0..rounds {
            let locals: Vec<ModelVector> = f
                .shards
                .iter()
                .map(|s| local_train(&w, s, &f.train, r, 11).unwrap())
                .collect();
            w = fedavg(&locals, &sizes).unwrap();
            out.push(w.clone());
        }
        out
    }

    fn max_abs_diff(a: &ModelVector, b: &ModelVector) -> f64 {
        a.weights
            .iter()
            .zip(&b.weights)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn all_visible_instant_matches_fedavg() {
        let f = fixture(&[
            ShellSpec::walker(500e3, 53.0, 2, 3),
            ShellSpec::walker(800e3, 70.0, 1, 4),
        ]);
        let mut plan = ContactPlan::all_visible(f.constellation.clone(), vec![hap("a", 0.0)], 1e6);
        let run = run_training(&f.setup(), &mut plan, &proto(4)).unwrap();
        assert_eq!(run.stop, StopReason::MaxRounds);
        let reference = reference_fedavg(&f, 4);
        for (rec, w) in run.records.iter().zip(&reference) {
            assert!(max_abs_diff(&rec.global_model, w) < 1e-12);
            assert_eq!(rec.contributors_count, 10);
            assert_eq!(rec.sim_time_s, 5.0 * rec.round as f64);
        }
        // Every uplinked chain carries a single model.
        let single = 32 * f.initial.dim() as u64 / 8 + 4;
        assert!(run
            .trace
            .iter()
            .filter(|e| e.kind == EventKind::UplinkDone)
            .all(|e| e.bytes == single));
    }

    #[test]
    fn duplicates_from_two_servers_are_counted_once() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 2, 2)]);
        let nodes = vec![hap("a", 0.0), hap("b", 120.0)];
        let mut plan = ContactPlan::all_visible(f.constellation.clone(), nodes, 1e6);
        let run = run_training(&f.setup(), &mut plan, &proto(2)).unwrap();
        let uplinks = run
            .trace
            .iter()
            .filter(|e| e.kind == EventKind::UplinkDone && e.round == 0)
            .count();
        assert_eq!(uplinks, 8);
        let reference = reference_fedavg(&f, 2);
        assert!(max_abs_diff(&run.records[1].global_model, &reference[1]) < 1e-12);
    }

    fn one_visible_plan(f: &Fixture, visible_slot: usize) -> ContactPlan {
        let windows = f
            .constellation
            .ids()
            .iter()
            .map(|id| {
                if id.slot_index == visible_slot {
                    vec![vec![(0.0, 1e6)]]
                } else {
                    vec![Vec::new()]
                }
            })
            .collect();
        ContactPlan::with_fixed_windows(f.constellation.clone(), vec![hap("a", 0.0)], windows, 1e6)
            .unwrap()
    }

    #[test]
    fn single_visible_satellite_collects_whole_orbit() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 1, 10)]);
        let mut plan = one_visible_plan(&f, 3);
        let run = run_training(&f.setup(), &mut plan, &proto(1)).unwrap();
        let uplinks: Vec<&TraceEntry> = run
            .trace
            .iter()
            .filter(|e| e.kind == EventKind::UplinkDone)
            .collect();
        assert_eq!(uplinks.len(), 1);
        assert_eq!(uplinks[0].src, "sat(0,0,3)");
        assert_eq!(uplinks[0].bytes, 32 * f.initial.dim() as u64 / 8 + 40);
        // Ten sequential training stages.
        assert_eq!(run.records[0].sim_time_s, 50.0);
        let reference = reference_fedavg(&f, 1);
        assert!(max_abs_diff(&run.records[0].global_model, &reference[0]) < 1e-12);
    }

    #[test]
    fn chain_direction_sets_hop_order() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 1, 4)]);
        for (dir, next) in [
            (Direction::Prograde, "sat(0,0,1)"),
            (Direction::Retrograde, "sat(0,0,3)"),
        ] {
            let mut plan = one_visible_plan(&f, 0);
            let p = ProtocolConfig {
                direction: dir,
                ..proto(1)
            };
            let run = run_training(&f.setup(), &mut plan, &p).unwrap();
            let first = run
                .trace
                .iter()
                .find(|e| e.kind == EventKind::IslHop)
                .unwrap();
            assert_eq!(first.src, "sat(0,0,0)");
            assert_eq!(first.dst, next);
        }
    }

    #[test]
    fn unreachable_orbit_is_diagnosed() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 2, 2)]);
        let windows = f
            .constellation
            .ids()
            .iter()
            .map(|id| {
                if id.orbit_index == 0 {
                    vec![vec![(0.0, 1e6)]]
                } else {
                    vec![Vec::new()]
                }
            })
            .collect();
        let mut plan = ContactPlan::with_fixed_windows(
            f.constellation.clone(),
            vec![hap("a", 0.0)],
            windows,
            1e6,
        )
        .unwrap();
        match run_training(&f.setup(), &mut plan, &proto(1)) {
            Err(Error::Unreachable { diagnosis }) => assert!(diagnosis.contains("orbit(0,1)")),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn timed_links_are_deterministic_and_ordered() {
        let f = fixture(&[ShellSpec::walker(550e3, 53.0, 3, 4)]);
        let nodes = vec![hap("a", 0.0), hap("b", 90.0), hap("c", -120.0)];
        let p = ProtocolConfig {
            instant_links: false,
            uplink: UplinkModel::Noma {
                bandwidth_hz: 1e6,
                rho: 1e3,
                link: None,
                mean_gain_per_shell: vec![0.53],
                power_mode: PowerMode::Static,
            },
            ..proto(2)
        };
        let opts = crate::constellation::WindowOptions::default();
        let mut plan_a = ContactPlan::new(f.constellation.clone(), nodes.clone(), opts, 2e5);
        let mut plan_b = ContactPlan::new(f.constellation.clone(), nodes, opts, 2e5);
        let a = run_training(&f.setup(), &mut plan_a, &p).unwrap();
        let b = run_training(&f.setup(), &mut plan_b, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 2);
        assert!(a.trace.windows(2).all(|w| w[0].at_s <= w[1].at_s));
        assert!(a.records[0].sim_time_s > 0.0);
        assert!(a.records[1].bytes_transmitted > 0);
    }

    #[test]
    fn sim_time_limit_stops_mid_round() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 1, 10)]);
        let mut plan = one_visible_plan(&f, 0);
        let mut p = proto(5);
        p.termination.max_sim_time_s = 20.0;
        let run = run_training(&f.setup(), &mut plan, &p).unwrap();
        assert_eq!(run.stop, StopReason::SimTimeLimit);
        assert!(run.records.is_empty());
        assert_eq!(run.stalled.len(), 10);
    }

    #[test]
    fn zero_satellites_rejected() {
        let f = fixture(&[ShellSpec::walker(500e3, 53.0, 1, 2)]);
        let empty = build_walker_delta(&[]).unwrap();
        let mut plan = ContactPlan::all_visible(empty, vec![hap("a", 0.0)], 1e3);
        let setup = TrainingSetup {
            shards: &[],
            ..f.setup()
        };
        assert!(run_training(&setup, &mut plan, &proto(1)).is_err());
    }
}
