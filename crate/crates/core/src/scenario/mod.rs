//! Scenario configuration and the back ends of the command-line
//! subcommands.

mod commands;
mod config;

pub use commands::{
    bound_problem, bound_runs, cmd_compare_oma, cmd_outage, cmd_rate, cmd_train, cmd_verify_bound,
    cmd_visibility, link_snr, outage_rows, outage_scenario, protocol_config, run_scenario_training,
    training_data, BoundRun, CommandOutput, OutageRow, OutputFile, TrainingData, COMPARE_HEADER,
    OUTAGE_HEADER, RATE_HEADER, TRACE_HEADER, VISIBILITY_HEADER,
};
pub use config::{
    BoundSection, ChannelConfig, DirectionConfig, FadingConfig, FlConfig, GammaFormConfig,
    InterferenceConfig, LinkMode, LrConfig, NodeConfig, NodeKindConfig, NomaConfig, OutageSection,
    PartitionConfig, PowerModeConfig, ProtocolSection, RateSection, ScenarioConfig, ShellConfig,
    Sweep, UplinkConfig, VisibilitySection,
};
