//! Scenario harness end to end: config files, outputs, sweeps and error paths.

use std::path::{Path, PathBuf};

use trapwave::convergence::{convergence_study, SCHEME_ORDER};
use trapwave::harness::config::CheckKind;
use trapwave::harness::report::report_dir;
use trapwave::harness::{run_scenario, sweep, write_outputs, ScenarioConfig, SummaryReport, SweepAxis};
use trapwave::model::Phase;
use trapwave::solver::evolve_observed;
use trapwave::{
    initial_data_gaussian, Error, GaussianData, GridSpec, Mode, ModelParams, ModelProblem, PotentialProfile, Trajectory,
};

/// Short scenario at the reference spacing with every check enabled.
const SMALL: &str = r#"
schema = "trapwave-scenario/1"
id = "small"
modes = [0, 1]
checks = [
    "energy_balance", "exponential_bound", "noether", "classical_morawetz", "refined_morawetz",
    "i_functional", "gen_energy", "positivity", "identity_classical", "identity_refined",
    "approx_divergence", "parseval", "refined_weight", "closing", "source_norms",
    "cutoff_domination", "lemma", "alpha_balance",
]

[model]
epsilon = 0.01
t_horizon = 5.0

[grid]
spacing = 0.03125

[data]
kind = "gaussian"
phase = "complex"

[spectral]
tau_max = 64.0

[multiplier]
identity_taus = [1.0, 4.0]
"#;

fn small(out: &Path) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_toml_str(SMALL).unwrap();
    cfg.run.output_dir = Some(out.to_path_buf());
    cfg
}

fn shipped() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_scenarios_load_and_round_trip() {
    let files = shipped();
    assert!(files.len() >= 5);
    for path in files {
        let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg, "{}", path.display());
    }
}

#[test]
fn small_scenario_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_scenario(&small(dir.path())).unwrap();
    let failed: Vec<&str> = o
        .summary
        .checks
        .iter()
        .filter(|c| !c.verdict)
        .map(|c| c.name.as_str())
        .collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(o.summary.checks.len(), 18);
    for c in &o.summary.checks {
        assert!(!c.statement.is_empty());
        assert!(c.margin >= 0.0, "{} margin {}", c.name, c.margin);
    }
}

#[test]
fn zero_data_passes_with_vanishing_functionals() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.data = trapwave::harness::DataConfig::Zero;
    cfg.checks = CheckKind::ALL.to_vec();
    let o = run_scenario(&cfg).unwrap();
    assert!(o.summary.all_pass);
    let row = o.morawetz.as_ref().unwrap();
    for v in [
        row.energy_0,
        row.energy_t,
        row.classical_bulk,
        row.classical_arctan,
        row.refined_bulk,
    ] {
        assert_eq!(v, 0.0);
    }
    assert_eq!(row.i_functional, Some(0.0));
    assert_eq!(row.j_functional, Some(0.0));
    assert!(o.energy.as_ref().unwrap().e_total.iter().all(|e| *e == 0.0));
    assert!(o.summary.constants.is_empty());
}

#[test]
fn large_epsilon_still_runs_and_reports_positivity() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.model.epsilon = 0.5;
    cfg.checks = vec![
        CheckKind::Positivity,
        CheckKind::ExponentialBound,
        CheckKind::EnergyBalance,
    ];
    let o = run_scenario(&cfg).unwrap();
    let p = o.summary.check(CheckKind::Positivity).unwrap();
    assert!(p.margin.is_finite());
    for key in ["min_c_x", "min_c_omega", "min_c_0", "monotone_in_epsilon"] {
        assert!(p.details.contains_key(key), "{key}");
    }
    let b = o.summary.check(CheckKind::ExponentialBound).unwrap();
    assert!(b.verdict);
}

#[test]
fn identical_configs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small(a.path());
    write_outputs(&run_scenario(&cfg).unwrap(), a.path()).unwrap();
    write_outputs(&run_scenario(&cfg).unwrap(), b.path()).unwrap();
    for name in ["energies.csv", "morawetz.csv", "spectral.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert!(x == y, "{name} differs");
    }
    let s = SummaryReport::load(&a.path().join("summary.json")).unwrap();
    assert_eq!(s.scenario_id, "small");
    let (text, pass) = report_dir(a.path()).unwrap();
    assert!(pass);
    assert!(text.contains("parseval"));
}

#[test]
fn csv_headers_name_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_scenario(&small(dir.path())).unwrap();
    write_outputs(&o, dir.path()).unwrap();
    let energies = std::fs::read_to_string(dir.path().join("energies.csv")).unwrap();
    assert_eq!(energies.lines().next().unwrap(), "t,E_total,E_ratio,E_B,E_l0,E_l1");
    let morawetz = std::fs::read_to_string(dir.path().join("morawetz.csv")).unwrap();
    assert_eq!(morawetz.lines().count(), 2);
}

#[test]
fn unresolvable_band_is_reported_with_scenario_and_mode() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.spectral.tau_max = 1000.0;
    match run_scenario(&cfg) {
        Err(e @ Error::Scenario { .. }) => {
            let msg = e.to_string();
            assert!(msg.contains("`small`") && msg.contains("mode l = 0"), "{msg}");
            assert!(matches!(e, Error::Scenario { ref source, .. } if matches!(**source, Error::Nyquist { .. })));
        }
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

#[test]
fn config_errors_name_the_offending_field() {
    let unknown = SMALL.replace("spacing = 0.03125", "spacing = 0.03125\nspacin = 1.0");
    let msg = ScenarioConfig::from_toml_str(&unknown).unwrap_err().to_string();
    assert!(msg.contains("spacin") && msg.contains("line"), "{msg}");

    let bad_check = SMALL.replace("\"lemma\",", "\"lema\",");
    let msg = ScenarioConfig::from_toml_str(&bad_check).unwrap_err().to_string();
    assert!(msg.contains("lema"), "{msg}");

    let bad_alpha = SMALL.replace("epsilon = 0.01", "epsilon = 0.01\nalpha = 0.9");
    let msg = ScenarioConfig::from_toml_str(&bad_alpha).unwrap_err().to_string();
    assert!(msg.contains("alpha"), "{msg}");

    let short_horizon = SMALL.replace("t_horizon = 5.0", "t_horizon = 3.0");
    assert!(ScenarioConfig::from_toml_str(&short_horizon).is_err());
}

#[test]
fn sweep_keeps_going_past_a_failing_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.checks = vec![CheckKind::ExponentialBound, CheckKind::ClassicalMorawetz];
    let r = sweep(&cfg, SweepAxis::Epsilon, &[0.01, -1.0, 0.02]).unwrap();
    assert_eq!(r.points.len(), 3);
    assert!(r.points[1].error.is_some());
    assert_eq!(r.points[0].all_pass, Some(true));
    assert_eq!(r.points[2].all_pass, Some(true));
    assert!(!r.all_pass);
    assert!(dir.path().join("sweep.json").exists());
    assert!(dir.path().join("sweep.csv").exists());
    let fit = r.fit("classical_bulk_per_e0").unwrap();
    assert_eq!(fit.history.len(), 2);
}

#[test]
fn sweep_needs_values() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        sweep(&small(dir.path()), SweepAxis::Horizon, &[]),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn backward_and_forward_records_join_at_the_start_time() {
    let grid = GridSpec::from_spacing(25.0, 0.125, 0.5).unwrap();
    let problem = ModelProblem::new(ModelParams::default(), PotentialProfile::default());
    let mode = Mode::new(1);
    let data = GaussianData {
        phase: Phase::Complex,
        ..Default::default()
    };
    let init = initial_data_gaussian(&grid, &data, 0.0).unwrap();
    let record = || Trajectory::recorder(grid, mode, problem, 2).with_x_window(-5.0, 5.0);
    let (mut back, mut fwd) = (record(), record());
    evolve_observed(&problem, mode, &grid, &init, -1.0, &mut back).unwrap();
    evolve_observed(&problem, mode, &grid, &init, 2.0, &mut fwd).unwrap();
    let n = back.times.len() + fwd.times.len() - 1;
    let joined = Trajectory::join_backward(back, fwd).unwrap();
    assert_eq!(joined.times.len(), n);
    assert_eq!(joined.states.len(), n);
    assert!(joined.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(joined.times.iter().filter(|t| **t == 0.0).count(), 1);
    assert!((joined.t_start() + 1.0).abs() < 1e-12 && (joined.t_end() - 2.0).abs() < 1e-12);

    let mut late = Trajectory::recorder(grid, mode, problem, 2).with_x_window(-5.0, 5.0);
    let mut shifted = init.clone();
    shifted.time = 0.5;
    evolve_observed(&problem, mode, &grid, &shifted, 1.0, &mut late).unwrap();
    let mut early = Trajectory::recorder(grid, mode, problem, 2).with_x_window(-5.0, 5.0);
    evolve_observed(&problem, mode, &grid, &init, -1.0, &mut early).unwrap();
    assert!(Trajectory::join_backward(early, late).is_err());
}

#[test]
fn self_convergence_reaches_scheme_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg =
        ScenarioConfig::load(&shipped().into_iter().find(|p| p.ends_with("convergence.toml")).unwrap()).unwrap();
    cfg.run.output_dir = Some(dir.path().to_path_buf());
    let r = convergence_study(&cfg).unwrap();
    let solution = r.series("solution").unwrap();
    assert!(solution.order.unwrap() >= SCHEME_ORDER - 0.2, "{solution:?}");
    assert!(r.all_pass(), "{}", r.render());

    cfg.data = trapwave::harness::DataConfig::Zero;
    let z = convergence_study(&cfg).unwrap();
    for s in &z.series {
        assert!(s.errors.iter().all(|e| *e == 0.0), "{}", s.name);
        assert_eq!(s.order, None);
    }

    cfg.convergence.spacings = Some(vec![0.125, 0.125, 0.0625]);
    assert!(convergence_study(&cfg).is_err());
}
