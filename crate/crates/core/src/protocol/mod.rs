//! Model propagation and aggregation over the server ring and intra-orbit
//! links, executed by a deterministic discrete-event engine.

mod aggregate;
mod engine;
mod ring;

pub use aggregate::{aggregate_round, AggregateOutcome, InboxEntry, SubOrbitalModel};
pub use engine::{
    run_training, uplink_duration, Direction, EventKind, ProtocolConfig, RoundRecord, StopReason,
    Termination, TraceEntry, TrainingRun, TrainingSetup, UplinkModel,
};
pub use ring::{propagate_global, HapRing};
