use glvortex_cli::config::{ChartChoice, CommandConfig, Order, ProfileArgs, ResidualScanArgs, RunConfig, FORMAT_VERSION};
use proptest::prelude::*;

#[test]
fn defaults_come_from_the_flag_definitions() {
    let p = ProfileArgs::default();
    assert_eq!((p.rmax, p.n, p.tol), (12.0, 2000, 1e-8));
    let s = ResidualScanArgs::default();
    assert_eq!(s.eps, vec![0.2, 0.1, 0.05]);
    assert_eq!((s.chart, s.order, s.band), (ChartChoice::Catenoid, Order::W0, None));
}

#[test]
fn every_default_config_round_trips() {
    for c in CommandConfig::all_defaults() {
        let cfg = RunConfig::new(c, None);
        let text = cfg.to_canonical();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_canonical(), text);
    }
}

#[test]
fn missing_fields_take_defaults() {
    let cfg = RunConfig::parse(r#"{"format_version": 1, "command": {"name": "profile", "n": 400}}"#).unwrap();
    assert_eq!(cfg.command, CommandConfig::Profile(ProfileArgs { n: 400, ..Default::default() }));
    assert_eq!(cfg.out, None);
}

#[test]
fn rejects_unknown_fields_and_versions() {
    assert!(RunConfig::parse(r#"{"format_version": 1, "command": {"name": "profile", "rmx": 3}}"#).is_err());
    let e = RunConfig::parse(r#"{"format_version": 99, "command": {"name": "profile"}}"#).unwrap_err();
    assert!(e.contains("format_version"), "{e}");
    assert!(RunConfig::parse(r#"{"format_version": 1, "command": {"name": "nope"}}"#).is_err());
}

#[test]
fn format_version_is_written() {
    let text = RunConfig::new(CommandConfig::Profile(Default::default()), None).to_canonical();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["format_version"], FORMAT_VERSION);
    assert_eq!(v["command"]["name"], "profile");
}

proptest! {
    #[test]
    fn scan_configs_round_trip(eps in prop::collection::vec(1e-6f64..10.0, 0..6), delta in -5.0f64..5.0, band in prop::option::of(0.0f64..1.0)) {
        let args = ResidualScanArgs { eps, delta, band, chart: ChartChoice::Cylinder, ..Default::default() };
        let cfg = RunConfig::new(CommandConfig::ResidualScan(args), Some("out/dir".into()));
        let text = cfg.to_canonical();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_canonical(), text);
    }
}
