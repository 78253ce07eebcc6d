use speckle_cli::{export_plotdata, parse_config, ExperimentKind, ResultRecord, Row};

#[test]
fn empty_config_uses_defaults() {
    let cfg = parse_config("").unwrap();
    assert_eq!(cfg.regime.epsilon, 0.01);
    assert_eq!(cfg.regime.eta, 0.25);
    assert_eq!(cfg.grid.n, 256);
    assert_eq!(cfg.ensemble.n_realizations, 200);
    assert_eq!(cfg.experiment.kind, ExperimentKind::Validate);
}

#[test]
fn partial_section_keeps_other_defaults() {
    let cfg = parse_config("[grid]\nn = 128\n").unwrap();
    assert_eq!(cfg.grid.n, 128);
    assert_eq!(cfg.grid.length, 64.0);
}

#[test]
fn epsilon_not_below_eta_is_rejected() {
    let text = "[regime]\nepsilon = 0.3\neta = 0.25\n";
    let errs = parse_config(text).unwrap_err();
    assert!(errs.iter().any(|e| e.message.contains("epsilon")), "{errs:?}");
    assert!(errs.iter().any(|e| e.line == Some(2)), "{errs:?}");
}

#[test]
fn unknown_key_is_named_with_its_line() {
    let text = "[grid]\nn = 64\nfoo = 1\n";
    let errs = parse_config(text).unwrap_err();
    assert_eq!(errs.len(), 1);
    assert!(errs[0].message.contains("foo"), "{}", errs[0]);
    assert_eq!(errs[0].line, Some(3));
    assert!(errs[0].to_string().starts_with("line 3:"));
}

#[test]
fn step_above_stability_bound_is_rejected_for_ensembles() {
    let text = "[solver]\ndz = 0.01\n[experiment]\nkind = \"simulate\"\n";
    let errs = parse_config(text).unwrap_err();
    assert!(errs.iter().any(|e| e.message.contains("dz")), "{errs:?}");
}

#[test]
fn emit_parse_round_trip() {
    let text = "[regime]\nepsilon = 0.02\neta = 0.3\n[source]\nprofile = \"gaussian\"\nwidth = 2.0\n[ensemble]\nseed = 9\n";
    let cfg = parse_config(text).unwrap();
    let again = parse_config(&cfg.emit()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(cfg.hash(), again.hash());
}

#[test]
fn hash_tracks_content() {
    let a = parse_config("").unwrap();
    let b = parse_config("[ensemble]\nseed = 2\n").unwrap();
    assert_eq!(a.hash(), parse_config("").unwrap().hash());
    assert_ne!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn plotdata_exports_one_series() {
    let record = ResultRecord {
        experiment: "x".into(),
        config_hash: String::new(),
        seed: 1,
        rows: vec![Row::real("a", 0.0, 1.5), Row::real("b", 1.0, 2.0), Row::real("a", 2.0, 3.0)],
        progress: Vec::new(),
        wall_clock_s: 0.0,
    };
    let csv = export_plotdata(&record, "a").unwrap();
    assert_eq!(csv, "x,series,value,stderr\n0,a,1.5,0\n2,a,3,0\n");
    let err = export_plotdata(&record, "nope").unwrap_err();
    assert!(err.to_string().contains("nope"));
}
