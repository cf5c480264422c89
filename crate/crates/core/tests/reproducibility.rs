use hostsym::config::{load_preset, Experiment};
use hostsym::experiments::{interface_drift_experiment, interface_replicate, monotone_coupling};
use hostsym::reference::{estimate_critical_beta, CriticalBetaConfig, CriticalPreset};

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

#[test]
fn aggregates_do_not_depend_on_worker_count() {
    let cfg = load_preset("thm3", &["experiment.length=200".into(), "experiment.t_end=20.0".into()]).unwrap();
    let Experiment::Interface(exp) = cfg.experiment else { unreachable!() };
    let one = pool(1).install(|| interface_drift_experiment(&exp, 10.0, 12, 4).unwrap());
    let four = pool(4).install(|| interface_drift_experiment(&exp, 10.0, 12, 4).unwrap());
    let slopes = |e: &hostsym::experiments::DriftEstimate| e.runs.iter().map(|r| r.slope).collect::<Vec<_>>();
    assert_eq!(slopes(&one), slopes(&four));
    assert_eq!(one.slope, four.slope);
    assert_eq!(one.sign_p, four.sign_p);
}

#[test]
fn a_replicate_regenerates_in_isolation() {
    let cfg = load_preset("thm3", &["experiment.length=200".into(), "experiment.t_end=20.0".into()]).unwrap();
    let Experiment::Interface(exp) = cfg.experiment else { unreachable!() };
    let batch = interface_drift_experiment(&exp, 5.0, 6, 9).unwrap();
    let alone = interface_replicate(&exp, 5.0, 9, 4).unwrap();
    assert_eq!(batch.runs[4].samples, alone.samples);
}

#[test]
fn coupling_pairs_are_stable() {
    let cfg = load_preset("coupling", &["experiment.side=10".into(), "experiment.t_end=2.0".into()]).unwrap();
    let Experiment::Coupling(exp) = cfg.experiment else { unreachable!() };
    let a = pool(1).install(|| monotone_coupling(&exp, 8, 3).unwrap());
    let b = pool(3).install(|| monotone_coupling(&exp, 8, 3).unwrap());
    assert_eq!(a.pairs, b.pairs);
}

#[test]
fn critical_estimate_is_reproducible() {
    let cfg = CriticalBetaConfig {
        preset: CriticalPreset::Contact,
        dimension: 1,
        side: 30,
        r1: 1,
        r2: 1,
        replicates: 8,
        tolerance: 1.0,
        beta_lo: 0.0,
        beta_hi: 8.0,
    };
    let a = pool(1).install(|| estimate_critical_beta(&cfg, 5).unwrap());
    let b = pool(2).install(|| estimate_critical_beta(&cfg, 5).unwrap());
    assert_eq!((a.lo, a.hi), (b.lo, b.hi));
    assert_eq!(a.samples, b.samples);
}
