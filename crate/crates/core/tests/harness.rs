use mixlasso::harness::config::ExperimentConfig;
use mixlasso::harness::runner::{self, load_records, run_experiment, TRIALS_FILE};
use mixlasso::harness::summary::summarize;

fn small(extra: &[&str]) -> ExperimentConfig {
    let mut o = vec!["mixture.n=60", "mixture.p=400", "mixture.k=12", "mixture.s_star=4", "truth.s=4"];
    o.extend_from_slice(extra);
    ExperimentConfig::reference().with_overrides(&o).unwrap()
}

#[test]
fn summary_is_a_function_of_the_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&["experiment.trials=30"]);
    let s = run_experiment(&cfg, dir.path()).unwrap();
    let records = load_records(&dir.path().join(TRIALS_FILE)).unwrap();
    assert_eq!(records.len(), 30);
    assert!(records.iter().enumerate().all(|(i, r)| r.trial_index == i as u64));
    assert_eq!(summarize(&cfg, &records), s);
    assert_eq!(runner::report(dir.path()).unwrap(), s);
}

#[test]
fn single_trial_frequencies_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&small(&["experiment.trials=1"]), dir.path()).unwrap();
    assert_eq!(s.completed, 1);
    for f in s.event_failure.iter().chain([&s.bound_violation]).chain(&s.assumption_held) {
        assert!(f.frequency == 0.0 || f.frequency == 1.0);
        assert!(f.wilson_low <= f.frequency && f.frequency <= f.wilson_high);
    }
}

#[test]
fn failed_trials_are_recorded_not_fatal() {
    // s* > K cannot be drawn; every trial fails but the run completes.
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&["experiment.trials=5", "mixture.s_star=20"]);
    let s = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!((s.trials, s.completed, s.failed), (5, 0, 5));
    let records = load_records(&dir.path().join(TRIALS_FILE)).unwrap();
    assert!(records.iter().all(|r| r.error.is_some() && r.result.is_none()));
    let csv = std::fs::read_to_string(dir.path().join(runner::CSV_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.lines().skip(1).all(|l| l.contains(",failed")));
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small(&["experiment.trials=20", "centers.redraw_per_trial=true"]);
    let one = runner::run_trials(&cfg.with_overrides(&["experiment.workers=1"]).unwrap(), |_| Ok(())).unwrap();
    let three = runner::run_trials(&cfg.with_overrides(&["experiment.workers=3"]).unwrap(), |_| Ok(())).unwrap();
    assert_eq!(runner::to_csv(&one), runner::to_csv(&three));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let cfg = small(&["theory.c_chi=12.5", "solver.lambda=0.4"]);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
    std::fs::write(&path, cfg.to_toml().replace("[mixture]", "[mixture]\nextra = 1")).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
}
