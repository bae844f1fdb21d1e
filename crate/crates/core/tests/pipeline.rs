use w1mix::cvar::{cvar_empirical, cvar_error_bound, cvar_exact};
use w1mix::experiment::run_experiment;
use w1mix::functionals::{check_mixing_condition, compute_v};
use w1mix::gaussian::l1_norm_distribution;
use w1mix::kernel::exact_kernel_iid;
use w1mix::wasserstein::w1_empirical_vs_cdf;
use w1mix::{
    DistributionSpec, Error, ExperimentConfig, Grid, ModelDescriptor, QuadratureConfig, Verdict,
};

fn model(name: &str) -> w1mix::ProcessModel {
    ModelDescriptor::builtin(name).unwrap().build().unwrap()
}

#[test]
fn builtin_models_satisfy_the_mixing_condition() {
    let q = QuadratureConfig::default();
    for name in w1mix::process::BUILTIN_MODELS {
        let m = model(name);
        let report = check_mixing_condition(m.mixing(), &q).unwrap();
        assert_eq!(report.verdict, Verdict::Holds, "{name}");
        let v = compute_v(m.mixing(), &q).unwrap();
        assert!((report.value - v).abs() < 1e-12, "{name}");
    }
}

#[test]
fn scaled_w1_matches_gaussian_limit_mean() {
    let q = QuadratureConfig::default();
    let u = DistributionSpec::standard_uniform();
    let grid = Grid::for_marginal(&u, 256).unwrap();
    let limit = l1_norm_distribution(&exact_kernel_iid(&u, &grid), 20_000, 5).unwrap();
    let target = (2.0 * std::f64::consts::PI).sqrt() / 8.0;
    assert!((limit.mean - target).abs() < 0.01, "{}", limit.mean);

    let m = model("iid-uniform");
    let n = 10_000;
    let reps = 200;
    let mean = (0..reps)
        .map(|r| {
            let x = m.sample_batch(9, r, n).unwrap();
            (n as f64).sqrt() * w1_empirical_vs_cdf(&x, &u, &q).unwrap()
        })
        .sum::<f64>()
        / reps as f64;
    assert!((mean - target).abs() < 0.03, "{mean}");
}

#[test]
fn cvar_estimate_within_w1_bound_on_dependent_path() {
    let q = QuadratureConfig::default();
    let m = model("ar1");
    let x = m.sample_batch(3, 0, 20_000).unwrap();
    for u in [0.01, 0.1, 0.5, 1.0] {
        let est = cvar_empirical(&x, u).unwrap();
        let exact = cvar_exact(m.marginal(), u, &q).unwrap();
        let bound = cvar_error_bound(&x, m.marginal(), u, &q).unwrap();
        assert!((est - exact).abs() <= bound + 1e-9 / u, "u={u}");
    }
}

#[test]
fn heavy_tailed_model_is_refused() {
    let cfg = ExperimentConfig::from_json(
        r#"{"experiment":"clt","n":100,
            "model":{"name":"pareto","params":{"family":"iid",
                "marginal":{"family":"pareto","scale":1,"shape":1.5}}}}"#,
    )
    .unwrap();
    assert!(matches!(run_experiment(&cfg), Err(Error::Refused(_))));
}

#[test]
fn experiment_output_is_reproducible() {
    let cfg = ExperimentConfig::from_json(
        r#"{"experiment":"clt","model":"ma1-uniform","n":[200,400],"replicates":6,
            "seed":17,"grid_points":64,"limit_draws":500,"kernel_n":2000}"#,
    )
    .unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.records.len(), 12);
    assert_eq!(a.csv_bytes().unwrap(), b.csv_bytes().unwrap());
    assert_eq!(a.summary.config_hash, cfg.config_hash().unwrap());
}
