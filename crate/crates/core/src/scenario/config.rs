//! Scenario files: TOML with explicit units in key names. Unknown keys are
//! rejected and errors carry the offending field path.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{LinkBudgetParams, NoiseParams, ShadowedRicianParams};
use crate::constellation::{GroundNode, NodeKind, ShellSpec};
use crate::error::{Error, Result};
use crate::fl::{LrSchedule, PartitionMode, TrainConfig};
use crate::noma::{GammaForm, InterferenceMode, PowerMode};
use crate::protocol::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub shells: Vec<ShellConfig>,
    pub nodes: Vec<NodeConfig>,
    pub channel: ChannelConfig,
    #[serde(default)]
    pub noma: NomaConfig,
    pub fl: FlConfig,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub visibility: VisibilitySection,
    #[serde(default)]
    pub outage: OutageSection,
    #[serde(default)]
    pub rate: RateSection,
    #[serde(default)]
    pub bound: BoundSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub num_orbits: usize,
    pub sats_per_orbit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raan_offsets_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_offset_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindConfig {
    GroundStation,
    Hap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    pub kind: NodeKindConfig,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_km: f64,
    pub min_elevation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingConfig {
    /// Average multipath power `2b`.
    pub multipath_power_2b: f64,
    pub nakagami_m: u32,
    /// Average line-of-sight power `Ω`.
    pub los_power_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// SNR includes path loss, antenna gains and pointing loss at the
    /// satellite-server distance.
    #[default]
    Budget,
    /// SNR is `P_s/σ²` with unit large-scale gain.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_ghz: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    pub pointing_error_deg: f64,
    pub aperture_diameter_m: f64,
    #[serde(default)]
    pub beam_edge_constant: f64,
    pub temperature_k: f64,
    pub bandwidth_mhz: f64,
    #[serde(default)]
    pub link_mode: LinkMode,
    /// One entry per shell, in shell order.
    pub fading: Vec<FadingConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModeConfig {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaFormConfig {
    #[default]
    DoubleRate,
    Conventional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NomaConfig {
    #[serde(default)]
    pub power_mode: PowerModeConfig,
    #[serde(default)]
    pub gamma_form: GammaFormConfig,
    /// Target rates of the nearest and farthest satellite, bit/s/Hz.
    #[serde(default = "default_target_rates")]
    pub target_rates_bps_hz: Vec<f64>,
    /// Transmit power used by the protocol's uplinks.
    #[serde(default = "default_p_s_dbm")]
    pub p_s_dbm: f64,
}

fn default_target_rates() -> Vec<f64> {
    vec![1.0, 1.0]
}
fn default_p_s_dbm() -> f64 {
    40.0
}

impl Default for NomaConfig {
    fn default() -> Self {
        Self {
            power_mode: PowerModeConfig::Static,
            gamma_form: GammaFormConfig::DoubleRate,
            target_rates_bps_hz: default_target_rates(),
            p_s_dbm: default_p_s_dbm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrConfig {
    Constant {
        value: f64,
    },
    /// `epsilon / (round + delta0)`.
    Decaying {
        epsilon: f64,
        delta0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionConfig {
    #[default]
    Iid,
    NonIid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlConfig {
    pub classes: usize,
    pub dim: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub separation: f64,
    #[serde(default)]
    pub partition: PartitionConfig,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub l2_reg: f64,
    pub lr: LrConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConfig {
    #[default]
    Prograde,
    Retrograde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UplinkConfig {
    #[default]
    Noma,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default)]
    pub direction: DirectionConfig,
    pub isl_rate_mbps: f64,
    pub ihl_rate_mbps: f64,
    pub broadcast_rate_mbps: f64,
    pub train_time_s: f64,
    #[serde(default)]
    pub uplink: UplinkConfig,
    /// Used when `uplink = "fixed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_rate_mbps: Option<f64>,
    #[serde(default)]
    pub instant_links: bool,
    /// Every satellite sees every server at all times (test mode).
    #[serde(default)]
    pub all_visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_bits: Option<f64>,
    pub id_bits: f64,
    pub max_rounds: usize,
    pub max_sim_time_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_accuracy: Option<f64>,
    pub visibility_dt_s: f64,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            direction: DirectionConfig::Prograde,
            isl_rate_mbps: 100.0,
            ihl_rate_mbps: 500.0,
            broadcast_rate_mbps: 100.0,
            train_time_s: 30.0,
            uplink: UplinkConfig::Noma,
            uplink_rate_mbps: None,
            instant_links: false,
            all_visible: false,
            payload_bits: None,
            id_bits: 32.0,
            max_rounds: 50,
            max_sim_time_h: 72.0,
            target_loss: None,
            target_accuracy: None,
            visibility_dt_s: 10.0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisibilitySection {
    pub start_h: f64,
    pub duration_h: f64,
    pub dt_s: f64,
    pub refine: bool,
}

impl Default for VisibilitySection {
    fn default() -> Self {
        Self {
            start_h: 0.0,
            duration_h: 48.0,
            dt_s: 10.0,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceConfig {
    /// FS interference uses the NS mean gain, as the closed form assumes.
    #[default]
    Conditional,
    Unconditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutageSection {
    /// Transmit-power sweep `start:stop:step` in dBm.
    pub sweep_dbm: String,
    pub trials: u64,
    pub ns_shell: usize,
    pub fs_shell: usize,
    /// NS-to-server distance; defaults to the altitude difference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns_distance_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs_distance_km: Option<f64>,
    /// Power share of the nearest satellite.
    pub a_ns: f64,
    #[serde(default)]
    pub interference: InterferenceConfig,
}

impl Default for OutageSection {
    fn default() -> Self {
        Self {
            sweep_dbm: "-40:40:5".into(),
            trials: 200_000,
            ns_shell: 0,
            fs_shell: 0,
            ns_distance_km: None,
            fs_distance_km: None,
            a_ns: 0.25,
            interference: InterferenceConfig::Conditional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    /// Transmit-power sweep for `rate`, dBm.
    pub sweep_dbm: String,
    /// Group sizes for `compare-oma`.
    pub users_sweep: String,
    /// Group size for `rate`.
    pub users: usize,
    /// Transmit power for `compare-oma`.
    pub p_s_dbm: f64,
    pub draws: usize,
    /// Model size used for upload-time columns.
    pub model_mbytes: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            sweep_dbm: "-40:40:5".into(),
            users_sweep: "1:20:1".into(),
            users: 2,
            p_s_dbm: 30.0,
            draws: 200,
            model_mbytes: 528.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    pub dim: usize,
    pub classes: usize,
    pub satellites: usize,
    pub samples_per_satellite: usize,
    pub separation: f64,
    pub l2_reg: f64,
    pub local_steps: Vec<usize>,
    pub total_steps: usize,
    pub repetitions: usize,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self {
            dim: 10,
            classes: 3,
            satellites: 4,
            samples_per_satellite: 100,
            separation: 2.0,
            l2_reg: 0.1,
            local_steps: vec![1, 5],
            total_steps: 3000,
            repetitions: 30,
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_err("", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(&path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("", e.to_string()))
    }

    /// Cross-field checks the schema alone cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.shells.is_empty() {
            return Err(config_err("shells", "at least one shell is required"));
        }
        if self.nodes.is_empty() {
            return Err(config_err(
                "nodes",
                "at least one ground station or HAP is required",
            ));
        }
        let mut names = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !names.insert(n.name.as_str()) {
                return Err(config_err(
                    &format!("nodes[{i}].name"),
                    format!("duplicate node {:?}", n.name),
                ));
            }
            if !(-90.0..=90.0).contains(&n.latitude_deg) {
                return Err(config_err(
                    &format!("nodes[{i}].latitude_deg"),
                    "outside [-90, 90]",
                ));
            }
        }
        for (i, s) in self.shell_specs().iter().enumerate() {
            s.validate(i)
                .map_err(|e| config_err(&format!("shells[{i}]"), e.to_string()))?;
        }
        if self.channel.fading.len() != self.shells.len() {
            return Err(config_err(
                "channel.fading",
                format!(
                    "{} entries for {} shells",
                    self.channel.fading.len(),
                    self.shells.len()
                ),
            ));
        }
        for (i, f) in self.channel.fading.iter().enumerate() {
            ShadowedRicianParams::from_multipath_power(
                f.multipath_power_2b,
                f.nakagami_m,
                f.los_power_omega,
            )
            .map_err(|e| config_err(&format!("channel.fading[{i}]"), e.to_string()))?;
        }
        self.link_params()
            .validate()
            .map_err(|e| config_err("channel", e.to_string()))?;
        if !(self.channel.temperature_k > 0.0 && self.channel.bandwidth_mhz > 0.0) {
            return Err(config_err(
                "channel",
                "temperature and bandwidth must be positive",
            ));
        }
        if self.noma.target_rates_bps_hz.len() != 2
            || self.noma.target_rates_bps_hz.iter().any(|r| !(*r >= 0.0))
        {
            return Err(config_err(
                "noma.target_rates_bps_hz",
                "need two nonnegative rates (NS, FS)",
            ));
        }
        let o = &self.outage;
        if o.ns_shell >= self.shells.len() || o.fs_shell >= self.shells.len() {
            return Err(config_err(
                "outage",
                "ns_shell/fs_shell must name a defined shell",
            ));
        }
        if !(o.a_ns > 0.0 && o.a_ns < 1.0) {
            return Err(config_err("outage.a_ns", "must be in (0, 1)"));
        }
        if o.trials == 0 {
            return Err(config_err("outage.trials", "must be positive"));
        }
        Sweep::parse(&o.sweep_dbm).map_err(|e| config_err("outage.sweep_dbm", e.to_string()))?;
        Sweep::parse(&self.rate.sweep_dbm)
            .map_err(|e| config_err("rate.sweep_dbm", e.to_string()))?;
        Sweep::parse(&self.rate.users_sweep)
            .map_err(|e| config_err("rate.users_sweep", e.to_string()))?;
        if self.rate.users == 0 || self.rate.draws == 0 {
            return Err(config_err("rate", "users and draws must be positive"));
        }
        let p = &self.protocol;
        if p.uplink == UplinkConfig::Fixed && p.uplink_rate_mbps.is_none() {
            return Err(config_err(
                "protocol.uplink_rate_mbps",
                "required when uplink = \"fixed\"",
            ));
        }
        if !(p.max_sim_time_h > 0.0) || !(p.visibility_dt_s > 0.0) {
            return Err(config_err(
                "protocol",
                "max_sim_time_h and visibility_dt_s must be positive",
            ));
        }
        super::commands::protocol_config(self)
            .and_then(|p| p.validate())
            .map_err(|e| config_err("protocol", e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| config_err("fl", e.to_string()))?;
        let f = &self.fl;
        if f.classes < 2 || f.dim == 0 || f.train_samples == 0 || f.test_samples == 0 {
            return Err(config_err(
                "fl",
                "need at least 2 classes, positive dim and sample counts",
            ));
        }
        let v = &self.visibility;
        if !(v.dt_s > 0.0 && v.duration_h > 0.0) {
            return Err(config_err(
                "visibility",
                "dt_s and duration_h must be positive",
            ));
        }
        let b = &self.bound;
        if b.satellites == 0
            || b.local_steps.contains(&0)
            || b.repetitions == 0
            || !(b.l2_reg > 0.0)
        {
            return Err(config_err(
                "bound",
                "satellites, local_steps, repetitions and l2_reg must be positive",
            ));
        }
        Ok(())
    }

    pub fn shell_specs(&self) -> Vec<ShellSpec> {
        self.shells
            .iter()
            .map(|s| {
                let mut spec = ShellSpec::walker(
                    s.altitude_km * 1e3,
                    s.inclination_deg,
                    s.num_orbits,
                    s.sats_per_orbit,
                );
                if let Some(r) = &s.raan_offsets_deg {
                    spec.raan_offsets_deg = r.clone();
                }
                if let Some(p) = s.phase_offset_deg {
                    spec.phase_offset_deg = p;
                }
                spec
            })
            .collect()
    }

    pub fn ground_nodes(&self) -> Vec<GroundNode> {
        self.nodes
            .iter()
            .map(|n| GroundNode {
                name: n.name.clone(),
                latitude_deg: n.latitude_deg,
                longitude_deg: n.longitude_deg,
                altitude_m: n.altitude_km * 1e3,
                min_elevation_deg: n.min_elevation_deg,
                kind: match n.kind {
                    NodeKindConfig::GroundStation => NodeKind::GroundStation,
                    NodeKindConfig::Hap => NodeKind::Hap,
                },
            })
            .collect()
    }

    pub fn link_params(&self) -> LinkBudgetParams {
        let c = &self.channel;
        LinkBudgetParams {
            carrier_hz: c.carrier_ghz * 1e9,
            tx_antenna_gain_dbi: c.tx_antenna_gain_dbi,
            rx_antenna_gain_dbi: c.rx_antenna_gain_dbi,
            pointing_error_deg: c.pointing_error_deg,
            aperture_diameter_m: c.aperture_diameter_m,
            beam_edge_constant: c.beam_edge_constant,
        }
    }

    pub fn noise_params(&self) -> NoiseParams {
        NoiseParams {
            temperature_k: self.channel.temperature_k,
            bandwidth_hz: self.channel.bandwidth_mhz * 1e6,
        }
    }

    pub fn fading(&self) -> Vec<ShadowedRicianParams> {
        self.channel
            .fading
            .iter()
            .map(|f| {
                ShadowedRicianParams::from_multipath_power(
                    f.multipath_power_2b,
                    f.nakagami_m,
                    f.los_power_omega,
                )
                .expect("validated")
            })
            .collect()
    }

    pub fn power_mode(&self) -> PowerMode {
        match self.noma.power_mode {
            PowerModeConfig::Static => PowerMode::Static,
            PowerModeConfig::Dynamic => PowerMode::Dynamic,
        }
    }

    pub fn gamma_form(&self) -> GammaForm {
        match self.noma.gamma_form {
            GammaFormConfig::DoubleRate => GammaForm::DoubleRate,
            GammaFormConfig::Conventional => GammaForm::Conventional,
        }
    }

    pub fn interference_mode(&self) -> InterferenceMode {
        match self.outage.interference {
            InterferenceConfig::Conditional => InterferenceMode::Conditional,
            InterferenceConfig::Unconditional => InterferenceMode::Unconditional,
        }
    }

    pub fn partition_mode(&self) -> PartitionMode {
        match self.fl.partition {
            PartitionConfig::Iid => PartitionMode::Iid,
            PartitionConfig::NonIid => PartitionMode::NonIid,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            local_epochs: self.fl.local_epochs,
            lr: match self.fl.lr {
                LrConfig::Constant { value } => LrSchedule::Constant(value),
                LrConfig::Decaying { epsilon, delta0 } => LrSchedule::Decaying { epsilon, delta0 },
            },
            batch_size: self.fl.batch_size,
            l2_reg: self.fl.l2_reg,
        }
    }

    pub fn direction(&self) -> Direction {
        match self.protocol.direction {
            DirectionConfig::Prograde => Direction::Prograde,
            DirectionConfig::Retrograde => Direction::Retrograde,
        }
    }
}

/// Inclusive `start:stop:step` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = |m: &str| config_err("sweep", format!("{text:?}: {m}"));
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
        let sweep = Self {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        if !(sweep.step > 0.0) || !sweep.start.is_finite() || !(sweep.stop >= sweep.start) {
            return Err(bad("need finite start <= stop and step > 0"));
        }
        if (sweep.stop - sweep.start) / sweep.step > 1e6 {
            return Err(bad("more than a million points"));
        }
        Ok(sweep)
    }

    /// Points `start + i·step` up to `stop` (with a small tolerance so that
    /// decimal steps land on `stop`).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}
