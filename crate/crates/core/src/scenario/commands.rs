//! Subcommand back ends. Each is a pure function of the configuration
//! (seed included) returning CSV bytes and a text summary; the binary only
//! writes them out.

use std::fmt::Write as _;

use super::config::{LinkMode, ScenarioConfig, Sweep, UplinkConfig};
use crate::analysis::{
    bound_curve, bound_table, estimate_constants, round_table, run_local_sgd, summary_text,
    verify_lemmas, BoundPoint, ConvergenceConstants, CsvTable, LemmaReport, LocalSgdConfig,
    StepSchedule,
};
use crate::channel::{noise_power, shl_budget, sr_sample};
use crate::constellation::{
    build_walker_delta, visibility_windows_all, Constellation, ContactPlan, ShellSpec,
    WindowOptions,
};
use crate::error::Result;
use crate::fl::{partition, Dataset, DatasetShard, LogisticModel, ModelVector, SyntheticSpec};
use crate::noma::{
    capacity_sweep, gamma_threshold, order_by_gain, outage_monte_carlo, sum_rate, CapacityParams,
    NomaUser, OutageReport, OutageScenario,
};
use crate::protocol::{
    run_training, ProtocolConfig, StopReason, Termination, TrainingRun, TrainingSetup, UplinkModel,
};
use crate::seed::{derive_seed, rng_for};
use crate::units::dbm_to_watts;
use crate::SatelliteId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    pub summary: String,
    /// False when a built-in check failed (only `verify-bound` has one).
    pub check_passed: bool,
}

fn single(name: &str, table: &CsvTable, summary: String) -> CommandOutput {
    CommandOutput {
        files: vec![OutputFile {
            name: name.into(),
            bytes: table.to_bytes(),
        }],
        summary,
        check_passed: true,
    }
}

fn constellation(cfg: &ScenarioConfig) -> Result<Constellation> {
    build_walker_delta(&cfg.shell_specs())
}

pub const VISIBILITY_HEADER: [&str; 8] = [
    "node",
    "sat",
    "shell",
    "orbit",
    "slot",
    "start_s",
    "end_s",
    "duration_s",
];

pub fn cmd_visibility(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let c = constellation(cfg)?;
    let nodes = cfg.ground_nodes();
    let v = &cfg.visibility;
    let t0 = v.start_h * 3600.0;
    let t1 = t0 + v.duration_h * 3600.0;
    let opts = WindowOptions {
        dt_s: v.dt_s,
        refine: v.refine,
    };
    let windows = visibility_windows_all(&c, &nodes, t0, t1, opts);
    let mut table = CsvTable::new(&VISIBILITY_HEADER);
    for w in &windows {
        table.push([
            nodes[w.node].name.clone(),
            w.sat.to_string(),
            w.sat.shell_index.to_string(),
            w.sat.orbit_index.to_string(),
            w.sat.slot_index.to_string(),
            w.start_s.to_string(),
            w.end_s.to_string(),
            (w.end_s - w.start_s).to_string(),
        ]);
    }
    let seen: std::collections::BTreeSet<SatelliteId> = windows.iter().map(|w| w.sat).collect();
    let summary = format!(
        "{} windows over {:.1} h; {}/{} satellites seen at least once\n",
        windows.len(),
        v.duration_h,
        seen.len(),
        c.len()
    );
    Ok(single("visibility.csv", &table, summary))
}

/// Per-link SNR `P_s·G(d)/σ²` (or `P_s/σ²` in direct mode).
pub fn link_snr(cfg: &ScenarioConfig, p_s_dbm: f64, distance_m: f64) -> Result<f64> {
    let sigma2 = noise_power(&cfg.noise_params())?;
    let large = match cfg.channel.link_mode {
        LinkMode::Budget => shl_budget(&cfg.link_params(), distance_m),
        LinkMode::Direct => 1.0,
    };
    Ok(dbm_to_watts(p_s_dbm) * large / sigma2)
}

/// Distance from shell `shell` to the first server when directly overhead.
fn overhead_distance_m(cfg: &ScenarioConfig, shell: usize) -> f64 {
    (cfg.shells[shell].altitude_km - cfg.nodes[0].altitude_km) * 1e3
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageRow {
    pub p_s_dbm: f64,
    pub rho_ns: f64,
    pub rho_fs: f64,
    pub closed: OutageReport,
    pub mc: OutageReport,
}

/// The nearest/farthest pair of the configuration at transmit power `p_s_dbm`.
pub fn outage_scenario(cfg: &ScenarioConfig, p_s_dbm: f64) -> Result<OutageScenario> {
    let o = &cfg.outage;
    let fading = cfg.fading();
    let d_ns = o
        .ns_distance_km
        .map_or_else(|| overhead_distance_m(cfg, o.ns_shell), |d| d * 1e3);
    let d_fs = o
        .fs_distance_km
        .map_or_else(|| overhead_distance_m(cfg, o.fs_shell), |d| d * 1e3);
    let form = cfg.gamma_form();
    let rates = &cfg.noma.target_rates_bps_hz;
    let ns = fading[o.ns_shell].clone();
    Ok(OutageScenario {
        ns_interference_gain: ns.mean(),
        ns,
        fs: fading[o.fs_shell].clone(),
        rho_ns: link_snr(cfg, p_s_dbm, d_ns)?,
        rho_fs: link_snr(cfg, p_s_dbm, d_fs)?,
        a_ns: o.a_ns,
        a_fs: 1.0 - o.a_ns,
        gamma_ns: gamma_threshold(rates[0], form),
        gamma_fs: gamma_threshold(rates[1], form),
    })
}

pub fn outage_rows(
    cfg: &ScenarioConfig,
    sweep: Option<Sweep>,
    trials: Option<u64>,
) -> Result<Vec<OutageRow>> {
    let sweep = match sweep {
        Some(s) => s,
        None => Sweep::parse(&cfg.outage.sweep_dbm)?,
    };
    let trials = trials.unwrap_or(cfg.outage.trials);
    sweep
        .values()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let sc = outage_scenario(cfg, p)?;
            let seed = derive_seed(cfg.seed, "outage-sweep", &[i as u64]);
            Ok(OutageRow {
                p_s_dbm: p,
                rho_ns: sc.rho_ns,
                rho_fs: sc.rho_fs,
                closed: sc.closed_form(),
                mc: outage_monte_carlo(&sc, trials, seed, cfg.interference_mode())?,
            })
        })
        .collect()
}

pub const OUTAGE_HEADER: [&str; 11] = [
    "p_s_dbm",
    "rho_ns_db",
    "rho_fs_db",
    "op_ns_closed",
    "op_fs_closed",
    "op_system_closed",
    "op_ns_mc",
    "op_fs_mc",
    "op_system_mc",
    "std_err_mc",
    "trials",
];

pub fn cmd_outage(
    cfg: &ScenarioConfig,
    sweep: Option<Sweep>,
    trials: Option<u64>,
) -> Result<CommandOutput> {
    let rows = outage_rows(cfg, sweep, trials)?;
    let mut table = CsvTable::new(&OUTAGE_HEADER);
    for r in &rows {
        table.push([
            r.p_s_dbm.to_string(),
            (10.0 * r.rho_ns.log10()).to_string(),
            (10.0 * r.rho_fs.log10()).to_string(),
            r.closed.op_ns.to_string(),
            r.closed.op_fs.to_string(),
            r.closed.op_system.to_string(),
            r.mc.op_ns.to_string(),
            r.mc.op_fs.to_string(),
            r.mc.op_system.to_string(),
            r.mc.std_err.to_string(),
            r.mc.trials.to_string(),
        ]);
    }
    let mut summary = String::new();
    for r in &rows {
        let _ = writeln!(
            summary,
            "P_s {:>6.1} dBm: OP closed {:.4e}, MC {:.4e} ± {:.1e}",
            r.p_s_dbm, r.closed.op_system, r.mc.op_system, r.mc.std_err
        );
    }
    Ok(single("outage.csv", &table, summary))
}

/// Large-scale gain per shell at the overhead distance.
fn shell_scales(cfg: &ScenarioConfig) -> Vec<f64> {
    (0..cfg.shells.len())
        .map(|s| match cfg.channel.link_mode {
            LinkMode::Budget => shl_budget(&cfg.link_params(), overhead_distance_m(cfg, s)),
            LinkMode::Direct => 1.0,
        })
        .collect()
}

pub const RATE_HEADER: [&str; 7] = [
    "p_s_dbm",
    "rank",
    "noma_rate_bps_hz",
    "oma_rate_bps_hz",
    "noma_rate_mbps",
    "oma_rate_mbps",
    "users",
];

/// Mean per-rank NOMA and OMA rates of a `users`-satellite group (shells
/// assigned round-robin) at every sweep power. Ranks follow SIC order
/// (1 = strongest); the last row per power has rank `total`.
pub fn cmd_rate(cfg: &ScenarioConfig, sweep: Option<Sweep>) -> Result<CommandOutput> {
    let sweep = match sweep {
        Some(s) => s,
        None => Sweep::parse(&cfg.rate.sweep_dbm)?,
    };
    let k = cfg.rate.users;
    let draws = cfg.rate.draws;
    let fading = cfg.fading();
    let scales = shell_scales(cfg);
    let shells = cfg.shells.len();
    let distances: Vec<f64> = (0..shells).map(|s| overhead_distance_m(cfg, s)).collect();
    let bandwidth = cfg.channel.bandwidth_mhz * 1e6;
    let mut table = CsvTable::new(&RATE_HEADER);
    let mut summary = String::new();
    for (pi, p) in sweep.values().into_iter().enumerate() {
        let rho = dbm_to_watts(p) / noise_power(&cfg.noise_params())?;
        let mut noma = vec![0.0; k];
        let mut oma = vec![0.0; k];
        for d in 0..draws {
            let mut rng = rng_for(cfg.seed, "rate", &[pi as u64, d as u64]);
            let users: Vec<NomaUser> = (0..k)
                .map(|i| {
                    let s = i % shells;
                    NomaUser::new(
                        SatelliteId::new(s, 0, i / shells),
                        sr_sample(&fading[s], &mut rng) * scales[s],
                    )
                })
                .collect();
            let mut group = order_by_gain(users, rho);
            let dist: Vec<f64> = group
                .users
                .iter()
                .map(|u| distances[u.sat.shell_index])
                .collect();
            group.allocate(cfg.power_mode(), &dist)?;
            let rates = sum_rate(&group);
            for (i, u) in group.users.iter().enumerate() {
                noma[i] += rates.per_user[i];
                oma[i] += (k as f64 * u.power_coeff * rho * u.gain).ln_1p()
                    / std::f64::consts::LN_2
                    / k as f64;
            }
        }
        let n = draws as f64;
        let mut push = |rank: String, r_noma: f64, r_oma: f64| {
            table.push([
                p.to_string(),
                rank,
                r_noma.to_string(),
                r_oma.to_string(),
                (r_noma * bandwidth / 1e6).to_string(),
                (r_oma * bandwidth / 1e6).to_string(),
                k.to_string(),
            ]);
        };
        for i in 0..k {
            push((i + 1).to_string(), noma[i] / n, oma[i] / n);
        }
        let (tn, to) = (noma.iter().sum::<f64>() / n, oma.iter().sum::<f64>() / n);
        push("total".into(), tn, to);
        let _ = writeln!(
            summary,
            "P_s {p:>6.1} dBm: NOMA {:.3} Mbps, OMA {:.3} Mbps",
            tn * bandwidth / 1e6,
            to * bandwidth / 1e6
        );
    }
    Ok(single("rate.csv", &table, summary))
}

pub const COMPARE_HEADER: [&str; 8] = [
    "users",
    "noma_sum_rate_bps_hz",
    "noma_feasible_rate_bps_hz",
    "feasible_users",
    "oma_sum_rate_bps_hz",
    "noma_upload_s",
    "oma_upload_s",
    "p_s_dbm",
];

/// Sum rate and upload time of `K'` models with NOMA versus an equal
/// bandwidth split, over a sweep of group sizes.
pub fn cmd_compare_oma(cfg: &ScenarioConfig, sweep: Option<Sweep>) -> Result<CommandOutput> {
    let sweep = match sweep {
        Some(s) => s,
        None => Sweep::parse(&cfg.rate.users_sweep)?,
    };
    let users: Vec<usize> = sweep
        .values()
        .into_iter()
        .map(|u| u.round().max(1.0) as usize)
        .collect();
    let rho = dbm_to_watts(cfg.rate.p_s_dbm) / noise_power(&cfg.noise_params())?;
    let params = CapacityParams {
        rho,
        fading: cfg.fading()[0].clone(),
        shell_scales: shell_scales(cfg),
        shell_distances_m: (0..cfg.shells.len())
            .map(|s| overhead_distance_m(cfg, s))
            .collect(),
        target_rate: cfg.noma.target_rates_bps_hz[0],
        gamma_form: cfg.gamma_form(),
        power_mode: cfg.power_mode(),
        draws: cfg.rate.draws,
        seed: derive_seed(cfg.seed, "compare-oma", &[]),
    };
    let points = capacity_sweep(users, &params)?;
    let bandwidth = cfg.channel.bandwidth_mhz * 1e6;
    let model_bits = cfg.rate.model_mbytes * 8e6;
    let mut table = CsvTable::new(&COMPARE_HEADER);
    let mut summary = String::new();
    for pt in &points {
        let total_bits = model_bits * pt.users as f64;
        let t_noma = total_bits / (pt.sum_rate * bandwidth);
        let t_oma = total_bits / (pt.oma_rate * bandwidth);
        table.push([
            pt.users.to_string(),
            pt.sum_rate.to_string(),
            pt.feasible_rate.to_string(),
            pt.feasible_users.to_string(),
            pt.oma_rate.to_string(),
            t_noma.to_string(),
            t_oma.to_string(),
            cfg.rate.p_s_dbm.to_string(),
        ]);
        let _ = writeln!(
            summary,
            "K'={:>3}: NOMA {:.4} bps/Hz, OMA {:.4} bps/Hz",
            pt.users, pt.sum_rate, pt.oma_rate
        );
    }
    Ok(single("compare_oma.csv", &table, summary))
}

/// Datasets and shards of a training scenario.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub constellation: Constellation,
    pub train: Dataset,
    pub test: Dataset,
    pub shards: Vec<DatasetShard>,
}

pub fn training_data(cfg: &ScenarioConfig) -> Result<TrainingData> {
    let constellation = constellation(cfg)?;
    let spec = SyntheticSpec {
        classes: cfg.fl.classes,
        dim: cfg.fl.dim,
        separation: cfg.fl.separation,
        seed: derive_seed(cfg.seed, "dataset", &[]),
    };
    let train = spec.sample(cfg.fl.train_samples, 0)?;
    let test = spec.sample(cfg.fl.test_samples, 1)?;
    let shards = partition(
        &train,
        cfg.partition_mode(),
        &constellation,
        derive_seed(cfg.seed, "partition", &[]),
    )?;
    Ok(TrainingData {
        constellation,
        train,
        test,
        shards,
    })
}

pub fn protocol_config(cfg: &ScenarioConfig) -> Result<ProtocolConfig> {
    let p = &cfg.protocol;
    let uplink = match p.uplink {
        UplinkConfig::Fixed => UplinkModel::FixedRate {
            rate_bps: p.uplink_rate_mbps.unwrap_or(0.0) * 1e6,
        },
        UplinkConfig::Noma => UplinkModel::Noma {
            bandwidth_hz: cfg.channel.bandwidth_mhz * 1e6,
            rho: dbm_to_watts(cfg.noma.p_s_dbm) / noise_power(&cfg.noise_params())?,
            link: match cfg.channel.link_mode {
                LinkMode::Budget => Some(cfg.link_params()),
                LinkMode::Direct => None,
            },
            mean_gain_per_shell: cfg.fading().iter().map(|f| f.mean()).collect(),
            power_mode: cfg.power_mode(),
        },
    };
    Ok(ProtocolConfig {
        direction: cfg.direction(),
        isl_rate_bps: p.isl_rate_mbps * 1e6,
        ihl_rate_bps: p.ihl_rate_mbps * 1e6,
        broadcast_rate_bps: p.broadcast_rate_mbps * 1e6,
        train_time_s: p.train_time_s,
        uplink,
        instant_links: p.instant_links,
        payload_bits_override: p.payload_bits,
        id_bits: p.id_bits,
        termination: Termination {
            max_rounds: p.max_rounds,
            max_sim_time_s: p.max_sim_time_h * 3600.0,
            target_loss: p.target_loss,
            target_accuracy: p.target_accuracy,
        },
        record_trace: p.record_trace,
    })
}

/// Runs the full protocol for the scenario.
pub fn run_scenario_training(cfg: &ScenarioConfig) -> Result<(TrainingData, TrainingRun)> {
    let data = training_data(cfg)?;
    let proto = protocol_config(cfg)?;
    let nodes = cfg.ground_nodes();
    let horizon = proto.termination.max_sim_time_s;
    let mut plan = if cfg.protocol.all_visible {
        ContactPlan::all_visible(data.constellation.clone(), nodes, horizon)
    } else {
        ContactPlan::new(
            data.constellation.clone(),
            nodes,
            WindowOptions {
                dt_s: cfg.protocol.visibility_dt_s,
                refine: true,
            },
            horizon,
        )
    };
    let dim = LogisticModel::for_dataset(&data.train).param_count();
    let setup = TrainingSetup {
        shards: &data.shards,
        train: cfg.train_config(),
        eval: &data.train,
        test: &data.test,
        initial: ModelVector::zeros(dim),
        seed: derive_seed(cfg.seed, "training", &[]),
    };
    let run = run_training(&setup, &mut plan, &proto)?;
    Ok((data, run))
}

pub const TRACE_HEADER: [&str; 6] = ["at_s", "round", "kind", "src", "dst", "bytes"];

pub fn cmd_train(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let (data, run) = run_scenario_training(cfg)?;
    let mut files = vec![OutputFile {
        name: "rounds.csv".into(),
        bytes: round_table(&run.records).to_bytes(),
    }];
    if cfg.protocol.record_trace {
        let mut t = CsvTable::new(&TRACE_HEADER);
        for e in &run.trace {
            t.push([
                e.at_s.to_string(),
                e.round.to_string(),
                e.kind.label().to_string(),
                e.src.clone(),
                e.dst.clone(),
                e.bytes.to_string(),
            ]);
        }
        files.push(OutputFile {
            name: "trace.csv".into(),
            bytes: t.to_bytes(),
        });
    }
    let mut summary = format!(
        "{} satellites, {} servers; stopped by {:?} after {} rounds\n",
        data.constellation.len(),
        cfg.nodes.len(),
        run.stop,
        run.records.len()
    );
    let _ = writeln!(
        summary,
        "initial loss {:.6}, accuracy {:.4}",
        run.initial_metrics.loss, run.initial_metrics.accuracy
    );
    if let Some(last) = run.records.last() {
        let _ = writeln!(
            summary,
            "final loss {:.6}, accuracy {:.4}, simulated time {:.2} h",
            last.loss,
            last.accuracy,
            last.sim_time_s / 3600.0
        );
    }
    if run.stop == StopReason::SimTimeLimit && !run.stalled.is_empty() {
        let _ = writeln!(
            summary,
            "round incomplete at the time limit; {} satellites not yet aggregated",
            run.stalled.len()
        );
    }
    Ok(CommandOutput {
        files,
        summary,
        check_passed: true,
    })
}

/// One bound experiment for a given number of local steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRun {
    pub local_steps: usize,
    pub constants: ConvergenceConstants,
    pub points: Vec<BoundPoint>,
    pub lemmas: LemmaReport,
}

impl BoundRun {
    pub fn passed(&self) -> bool {
        self.points.iter().all(BoundPoint::holds) && self.lemmas.passed()
    }
}

/// The desk problem of the `[bound]` section: IID shards of a synthetic
/// multinomial-logistic task.
pub fn bound_problem(cfg: &ScenarioConfig) -> Result<(Dataset, Vec<DatasetShard>)> {
    let b = &cfg.bound;
    let data = SyntheticSpec {
        classes: b.classes,
        dim: b.dim,
        separation: b.separation,
        seed: derive_seed(cfg.seed, "bound-data", &[]),
    }
    .sample(b.satellites * b.samples_per_satellite, 0)?;
    let holders = build_walker_delta(&[ShellSpec::walker(500e3, 0.0, 1, b.satellites)])?;
    let shards = partition(
        &data,
        crate::fl::PartitionMode::Iid,
        &holders,
        derive_seed(cfg.seed, "bound-partition", &[]),
    )?;
    Ok((data, shards))
}

pub fn bound_runs(cfg: &ScenarioConfig) -> Result<Vec<BoundRun>> {
    let b = &cfg.bound;
    let (data, shards) = bound_problem(cfg)?;
    let w0 = ModelVector::zeros(LogisticModel::for_dataset(&data).param_count());
    b.local_steps
        .iter()
        .map(|&j| {
            let constants = estimate_constants(
                &data,
                &shards,
                b.l2_reg,
                j,
                &w0,
                derive_seed(cfg.seed, "bound-constants", &[]),
            )?;
            let trace = run_local_sgd(
                &shards,
                &constants,
                &LocalSgdConfig {
                    local_steps: j,
                    total_steps: b.total_steps,
                    repetitions: b.repetitions,
                    l2_reg: b.l2_reg,
                    schedule: StepSchedule::Decaying,
                    seed: derive_seed(cfg.seed, "bound-sgd", &[j as u64]),
                },
                &w0,
            )?;
            Ok(BoundRun {
                local_steps: j,
                points: bound_curve(&trace, &constants),
                lemmas: verify_lemmas(&trace, &constants),
                constants,
            })
        })
        .collect()
}

pub fn cmd_verify_bound(cfg: &ScenarioConfig) -> Result<CommandOutput> {
    let runs = bound_runs(cfg)?;
    let mut files = Vec::new();
    let mut summary = String::new();
    let mut ok = true;
    for r in &runs {
        files.push(OutputFile {
            name: format!("bound_j{}.csv", r.local_steps),
            bytes: bound_table(&r.points).to_bytes(),
        });
        let c = &r.constants;
        let _ = writeln!(
            summary,
            "J={}: Λ={:.4} ϱ={:.4} G={:.4} Γ={:.3e} δ={:.2} Z={:.4}",
            r.local_steps,
            c.smooth_l,
            c.strong_mu,
            c.grad_g,
            c.gamma_gap,
            c.delta(),
            c.z()
        );
        summary.push_str(&summary_text(&r.points, &r.lemmas));
        ok &= r.passed();
    }
    let _ = writeln!(summary, "verdict: {}", if ok { "PASS" } else { "FAIL" });
    Ok(CommandOutput {
        files,
        summary,
        check_passed: ok,
    })
}
