use std::path::PathBuf;

use leofl_core::channel::sr_sample;
use leofl_core::noma::{oma_sum_rate, order_by_gain, sum_rate, NomaUser, PowerMode};
use leofl_core::scenario::{
    cmd_rate, cmd_train, cmd_visibility, ScenarioConfig, Sweep, RATE_HEADER, VISIBILITY_HEADER,
};
use leofl_core::seed::rng_for;
use leofl_core::{Error, SatelliteId};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&configs_dir().join(name)).unwrap()
}

fn text(name: &str) -> String {
    std::fs::read_to_string(configs_dir().join(name)).unwrap()
}

fn config_path_of(err: Error) -> String {
    match err {
        Error::Config { path, .. } => path,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn shipped_configs_round_trip() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ScenarioConfig::load(&path).unwrap();
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 9);
}

#[test]
fn unknown_key_reports_its_path() {
    let bad = text("tiny.toml").replace(
        "train_time_s = 30.0",
        "train_time_s = 30.0\ntrain_tme_s = 1.0",
    );
    let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
    assert_eq!(config_path_of(err), "protocol.train_tme_s");

    let bad = text("tiny.toml").replace("altitude_km = 500.0", "altitude_m = 500.0");
    let err = ScenarioConfig::from_toml_str(&bad).unwrap_err();
    assert!(config_path_of(err).starts_with("shells[0]"));
}

#[test]
fn cross_field_errors_name_the_field() {
    let bad = text("reduced_gs.toml").replacen(
        "[[channel.fading]]\nmultipath_power_2b = 0.279\nnakagami_m = 2\nlos_power_omega = 0.251\n",
        "",
        1,
    );
    assert_eq!(
        config_path_of(ScenarioConfig::from_toml_str(&bad).unwrap_err()),
        "channel.fading"
    );

    let bad = text("tiny.toml").replace("latitude_deg = 37.95", "latitude_deg = 137.95");
    assert_eq!(
        config_path_of(ScenarioConfig::from_toml_str(&bad).unwrap_err()),
        "nodes[0].latitude_deg"
    );

    let bad = text("tiny.toml").replace("uplink = \"noma\"", "uplink = \"fixed\"");
    assert_eq!(
        config_path_of(ScenarioConfig::from_toml_str(&bad).unwrap_err()),
        "protocol.uplink_rate_mbps"
    );
}

#[test]
fn sweep_syntax() {
    assert_eq!(Sweep::parse("-40:40:5").unwrap().values().len(), 17);
    assert_eq!(Sweep::parse("0:1:0.1").unwrap().values().len(), 11);
    assert_eq!(Sweep::parse("3:3:1").unwrap().values(), vec![3.0]);
    for bad in ["1:2", "a:2:1", "2:1:1", "0:1:0", "0:1:-1"] {
        assert!(Sweep::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn outputs_carry_fixed_headers() {
    let mut cfg = load("tiny.toml");
    cfg.visibility.duration_h = 6.0;
    let vis = cmd_visibility(&cfg).unwrap();
    let first = String::from_utf8(vis.files[0].bytes.clone()).unwrap();
    assert_eq!(first.lines().next().unwrap(), VISIBILITY_HEADER.join(","));

    let rate = cmd_rate(&cfg, Some(Sweep::parse("0:10:10").unwrap())).unwrap();
    let body = String::from_utf8(rate.files[0].bytes.clone()).unwrap();
    assert_eq!(body.lines().next().unwrap(), RATE_HEADER.join(","));
    // Two powers × (2 ranks + total).
    assert_eq!(body.lines().count(), 1 + 2 * 3);
}

#[test]
fn seed_changes_training_output() {
    let a = load("tiny.toml");
    let mut b = a.clone();
    b.seed += 1;
    assert_eq!(cmd_train(&a).unwrap().files, cmd_train(&a).unwrap().files);
    assert_ne!(cmd_train(&a).unwrap().files, cmd_train(&b).unwrap().files);
}

fn rate_table(cfg: &ScenarioConfig, sweep: &str) -> Vec<(f64, String, f64, f64)> {
    let out = cmd_rate(cfg, Some(Sweep::parse(sweep).unwrap())).unwrap();
    let mut reader = csv::Reader::from_reader(out.files[0].bytes.as_slice());
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[0].parse().unwrap(),
                r[1].to_string(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn single_user_noma_equals_oma() {
    let mut cfg = load("tiny.toml");
    cfg.rate.users = 1;
    cfg.rate.draws = 20;
    for (_, _, noma, oma) in rate_table(&cfg, "-10:40:10") {
        assert!(
            (noma - oma).abs() <= 1e-12 * noma.max(1e-300),
            "{noma} vs {oma}"
        );
    }
}

#[test]
fn rates_grow_with_power() {
    let mut cfg = load("reduced_hap1.toml");
    cfg.channel.link_mode = leofl_core::scenario::LinkMode::Direct;
    cfg.rate.users = 3;
    cfg.rate.draws = 30;
    let totals: Vec<f64> = rate_table(&cfg, "-60:40:5")
        .into_iter()
        .filter(|r| r.1 == "total")
        .map(|r| r.2)
        .collect();
    assert_eq!(totals.len(), 21);
    assert!(totals.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn four_user_noma_beats_oma_on_every_draw() {
    let p =
        leofl_core::channel::ShadowedRicianParams::from_multipath_power(0.279, 2, 0.251).unwrap();
    let mut rng = rng_for(99, "noma-vs-oma", &[]);
    for draw in 0..100 {
        let users: Vec<NomaUser> = (0..4)
            .map(|i| {
                NomaUser::new(
                    SatelliteId::new(i % 3, 0, i),
                    sr_sample(&p, &mut rng) / (1.0 + i as f64),
                )
            })
            .collect();
        let mut g = order_by_gain(users, 1e3);
        g.allocate(PowerMode::Static, &[]).unwrap();
        let (noma, oma) = (sum_rate(&g).total, oma_sum_rate(&g));
        assert!(noma >= oma - 1e-12, "draw {draw}: {noma} < {oma}");
    }
}
