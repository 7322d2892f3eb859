use proptest::prelude::*;
use sieveboot::harness::{build_report, run_experiment_with, Execution};
use sieveboot::rng::stream;
use sieveboot::{arfima_acvf, ArfimaSpec, BootstrapMethod, ExperimentConfig, GaussianSimulator, PreparedBootstrap};

const CONFIG: &str = r#"{
  "spec": {"d": 0.3, "phi": 0.3, "sigma2": 1.0},
  "t": 150,
  "replications": 6,
  "draws": 30,
  "statistics": ["mean", {"acf": 1}, {"acf0": 2}],
  "methods": [{"kind": "sbs"}, {"kind": "pfsbs"}, {"kind": "fpfbs"}],
  "seed": 7
}"#;

fn path(d: f64, phi: f64, t: usize, seed: u64) -> Vec<f64> {
    let acvf = arfima_acvf(&ArfimaSpec::new(d, phi, 1.0).unwrap(), t).unwrap();
    GaussianSimulator::new(&acvf, t).unwrap().sample(&mut stream(seed, 0))
}

#[test]
fn serial_and_parallel_runs_agree() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let a = run_experiment_with(&cfg, Execution::Serial).unwrap();
    let b = run_experiment_with(&cfg, Execution::Parallel).unwrap();
    assert_eq!(a.mc, b.mc);
    for (x, y) in a.draws.iter().flatten().zip(b.draws.iter().flatten()) {
        assert_eq!(x.values(), y.values());
    }
    assert_eq!(a.draws.len(), 3);
    assert!(a.draws.iter().flatten().all(|d| d.replication_count() == 6 && d.draw_count() == 30));
}

#[test]
fn config_round_trips_through_json() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn report_covers_every_method_and_statistic() {
    let cfg = ExperimentConfig::from_json(CONFIG).unwrap();
    let result = run_experiment_with(&cfg, Execution::Serial).unwrap();
    let report = build_report(&result).unwrap();
    for s in ["mean", "acf_1", "acf0_2"] {
        for m in ["pfsbs", "fpfbs"] {
            assert!(report.gof.iter().any(|g| g.statistic == s && g.subject == m), "{m} {s}");
        }
    }
}

#[test]
fn fpfbs_recovers_long_memory_that_sbs_misses() {
    // the fixed filter reintroduces d = 0.499, so the mean spreads far wider
    let y = path(0.4, 0.0, 400, 3);
    let spread = |m: BootstrapMethod| {
        let p = PreparedBootstrap::new(&y, &m).unwrap();
        let mut rng = stream(5, 1);
        let means: Vec<f64> = (0..200).map(|_| p.draw(&mut rng).iter().sum::<f64>() / 400.0).collect();
        let mu = means.iter().sum::<f64>() / 200.0;
        means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / 199.0
    };
    assert!(spread(BootstrapMethod::fpfbs()) > 2.0 * spread(BootstrapMethod::sbs()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn draws_are_finite_and_sized(d in -0.3f64..0.45, phi in -0.6f64..0.6, t in 40usize..320, seed in 0u64..1000) {
        let y = path(d, phi, t, seed);
        for m in [BootstrapMethod::sbs(), BootstrapMethod::pfsbs(), BootstrapMethod::fpfbs()] {
            let p = PreparedBootstrap::new(&y, &m).unwrap();
            let a = p.draw(&mut stream(seed, 9));
            prop_assert_eq!(a.len(), t);
            prop_assert!(a.iter().all(|v| v.is_finite()));
            prop_assert_eq!(&a, &p.draw(&mut stream(seed, 9)));
        }
    }
}
