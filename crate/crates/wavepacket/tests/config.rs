use wavepacket::config::{parse_epsilon_list, ExternalConfig, SlopeStatistic};
use wavepacket::{scenario, ExperimentConfig, Overrides};

const MINIMAL: &str = r#"
name = "minimal"
dim = 1
cutoff = 6.0
q0 = [0.0]
p0 = [0.3]
epsilons = [0.0625, 0.03125]

[lattice]
period = 6.283185307179586

[[potential]]
m = [1]
re = 1.0

[external]
kind = "cosine"
terms = [{ amplitude = 0.1, wavevector = [1.0] }]
"#;

#[test]
fn minimal_file_fills_defaults() {
    let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(c.band, 1);
    assert_eq!(c.horizon, 1.0);
    assert_eq!(c.steppers.dt, 1e-3);
    assert_eq!(c.checks.statistic, SlopeStatistic::Final);
    assert!(matches!(c.external, ExternalConfig::Cosine { .. }));
    assert_eq!(c.checkpoints().len(), 100);
}

#[test]
fn resolved_config_round_trips() {
    for name in scenario::SCENARIOS {
        let c = scenario::builtin(name).unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let top = format!("{MINIMAL}\nepsilon = [0.1]\n");
    assert!(ExperimentConfig::from_toml(&top).is_err());
    let nested = MINIMAL.replace("period = ", "periodd = ");
    assert!(ExperimentConfig::from_toml(&nested).is_err());
    let external = MINIMAL.replace("kind = \"cosine\"", "kind = \"cosine\"\nscale = 2.0");
    assert!(ExperimentConfig::from_toml(&external).is_err());
}

#[test]
fn epsilon_values_are_checked() {
    for bad in ["[0.5]", "[0.1]", "[0.0625, 0.0625]", "[0.0]", "[-0.0625]"] {
        let text = MINIMAL.replace("[0.0625, 0.03125]", bad);
        assert!(ExperimentConfig::from_toml(&text).is_err(), "{bad}");
    }
    let text = MINIMAL.replace("[0.0625, 0.03125]", "[0.25, 0.0078125]");
    assert!(ExperimentConfig::from_toml(&text).is_ok());
}

#[test]
fn ehrenfest_guard() {
    let mut c = ExperimentConfig::from_toml(MINIMAL).unwrap();
    let limit = c.ehrenfest_horizon().unwrap();
    assert!((limit - 32f64.ln()).abs() < 1e-12);
    c.horizon = 4.0;
    c.checkpoint_interval = 0.5;
    assert!(c.validate().is_err());
    c.ehrenfest_constant = 2.0;
    assert!(c.validate().is_ok());
}

#[test]
fn overrides_apply_and_revalidate() {
    let mut c = scenario::mathieu_1d();
    let o = Overrides {
        output: Some("elsewhere".into()),
        workers: Some(2),
        dt: Some(5e-4),
        epsilons: Some(parse_epsilon_list("1/16, 1/128").unwrap()),
    };
    c.apply(&o).unwrap();
    assert_eq!(c.epsilons, vec![0.0625, 0.0078125]);
    assert_eq!(c.workers, 2);
    assert_eq!(c.steppers.dt, 5e-4);
    assert_eq!(c.output, std::path::PathBuf::from("elsewhere"));
    let bad = Overrides { epsilons: Some(vec![0.3]), ..Default::default() };
    assert!(c.apply(&bad).is_err());
}

#[test]
fn epsilon_lists() {
    assert_eq!(parse_epsilon_list("1/16,0.03125").unwrap(), vec![0.0625, 0.03125]);
    assert!(parse_epsilon_list("1/x").is_err());
    assert!(parse_epsilon_list("").is_err());
}

#[test]
fn scenarios_resolve_and_build() {
    for name in scenario::SCENARIOS {
        let c = scenario::resolve(name).unwrap();
        c.band_model().unwrap();
        c.external().unwrap();
        c.envelope_grid().unwrap();
    }
    assert!(scenario::resolve("no-such-scenario").is_err());
}

#[test]
fn shipped_example_matches_builtin_scenario() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/mathieu-1d.toml");
    let file = ExperimentConfig::load(&path).unwrap();
    let mut builtin = scenario::mathieu_1d();
    builtin.envelope.snapshot_times = vec![0.0, 0.5, 1.0];
    assert_eq!(file, builtin);
}
