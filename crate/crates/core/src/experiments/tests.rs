use super::*;
use crate::fluid::{solve_fluid, solve_lyapunov, Grid, TiltControl};
use crate::model::{builtin, validate_model, Builtin, ModelConfig};

fn config(kind: ExperimentKind, model: Builtin, params: &[(&str, f64)]) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        model: Some(ModelConfig::from_builtin(model, params)),
        t0: 1.0,
        n_list: vec![200],
        alpha: 0.75,
        reps: 2000,
        seed: 5,
        h: 0.01,
        event: None,
        epsilons: None,
        tilt: None,
        naive: false,
        tolerance: 0.25,
        delta: None,
        t1: None,
    }
}

fn grid_sup(f: impl Fn(f64) -> f64) -> f64 {
    (1..200_000).map(|k| f(k as f64 * 1e-4)).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn poisson_exponent_closed_form() {
    let p = poisson_tail_exponent(1.0, 1.0).unwrap();
    assert!((p.theta_star - 2f64.ln()).abs() < 1e-15);
    assert!((p.upper - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
    assert!((p.upper - 0.3863).abs() < 1e-4);
    for (delta, t1) in [(1.0, 1.0), (0.3, 2.0), (0.05, 0.5), (2.0, 3.0)] {
        let p = poisson_tail_exponent(delta, t1).unwrap();
        let up = grid_sup(|th| delta * th - t1 * (th.exp() - th - 1.0));
        assert!((p.upper - up).abs() < 1e-8, "{delta} {t1}");
        if delta < t1 {
            let low = grid_sup(|th| delta * th + t1 * (1.0 - th - (-th).exp()));
            assert!((p.lower - low).abs() < 1e-8, "{delta} {t1}");
        }
        assert_eq!(p.k12, 0.5 * p.upper.min(p.lower));
    }
    let p = poisson_tail_exponent(2.0, 1.0).unwrap();
    assert_eq!(p.lower, f64::INFINITY);
    assert_eq!(p.k12, 0.5 * p.upper);
    assert!(poisson_tail_exponent(1e-8, 1.0).unwrap().upper < 1e-15);
    assert!(poisson_tail_exponent(0.0, 1.0).is_err());
}

#[test]
fn poisson_frequency_below_bound() {
    let row = poisson_sup_frequency(0.5, 1.0, 20, 20_000, 1, 0).unwrap();
    assert!(row.frequency > 0.0);
    assert!(row.frequency <= row.bound);
}

#[test]
fn config_roundtrip_and_validation() {
    let text = r#"
        experiment = "mdp"
        n_list = [1000, 10000]
        reps = 500
        seed = 7
        [model]
        builtin = "yule"
        [event]
        kind = "endpoint_exceed"
        coordinate = 0
        level = 1.0
    "#;
    let c = ExperimentConfig::from_toml_str(text).unwrap();
    assert_eq!(c.alpha, 0.75);
    assert_eq!(c.h, 0.01);
    assert_eq!(c.event, Some(EventSpec::EndpointExceed { coordinate: 0, level: 1.0 }));
    c.validate().unwrap();

    let mut bad = c.clone();
    bad.alpha = 0.5;
    bad.reps = 99;
    bad.event = None;
    let ExperimentError::Invalid(msgs) = bad.validate().unwrap_err() else { panic!() };
    assert_eq!(msgs.len(), 3, "{msgs:?}");
    assert!(matches!(
        ExperimentConfig::from_toml_str("experiment = \"mdp\"\nreps = 1"),
        Err(ExperimentError::Parse(_))
    ));
}

#[test]
fn zero_tilt_martingale_is_exactly_one() {
    let m = validate_model(builtin(Builtin::Yule, &Default::default()).unwrap(), 32).unwrap();
    let g = TiltControl::zeros(Grid::with_step(1.0, 0.1).unwrap(), 1);
    let row = martingale_mean_check(&m, 100, &g, 0.75, 200, 3).unwrap();
    assert_eq!(row.mean, 1.0);
    assert_eq!(row.stderr, 0.0);
    assert_eq!(row.ess, 200.0);
}

#[test]
fn yule_reference_rate() {
    let m = validate_model(builtin(Builtin::Yule, &Default::default()).unwrap(), 32).unwrap();
    let fl = solve_lyapunov(solve_fluid(&m, 1.0, 0.01).unwrap()).unwrap();
    let e = std::f64::consts::E;
    let t = event_reference(&fl, &EventSpec::EndpointExceed { coordinate: 0, level: 1.0 }).unwrap();
    assert!((t.reference_rate - 1.0 / (2.0 * (e * e - e))).abs() < 1e-9);
    assert!((t.z[0] - 1.0).abs() < 1e-15);
    // Sigma_t is increasing, so the sup event is cheapest at T0
    let s = event_reference(&fl, &EventSpec::SupnormExceed { level: 1.0 }).unwrap();
    assert_eq!(s.k, 100);
    assert_eq!(s.reference_rate, t.reference_rate);
    assert!(event_reference(&fl, &EventSpec::EndpointExceed { coordinate: 1, level: 1.0 }).is_err());
}

#[test]
fn tilted_and_naive_agree_at_small_n() {
    for event in [
        EventSpec::EndpointExceed { coordinate: 0, level: 1.0 },
        EventSpec::SupnormExceed { level: 1.0 },
    ] {
        let mut c = config(ExperimentKind::Mdp, Builtin::Yule, &[]);
        c.event = Some(event.clone());
        c.naive = true;
        let r = mdp_estimate(&c).unwrap();
        let (t, nv) = (&r.tilted[0], &r.naive[0]);
        assert!(t.ess >= MIN_ESS && nv.ess >= MIN_ESS, "{t:?} {nv:?}");
        assert!(t.ess <= c.reps as f64);
        let se = (t.stderr.powi(2) + nv.stderr.powi(2)).sqrt();
        assert!((t.p_hat - nv.p_hat).abs() < 3.0 * se, "{event:?}: {} vs {}", t.p_hat, nv.p_hat);
        assert!(t.stderr < nv.stderr, "tilting should reduce the variance");
    }
}

#[test]
fn zero_level_is_central() {
    let mut c = config(ExperimentKind::Mdp, Builtin::Yule, &[]);
    c.n_list = vec![5000];
    c.reps = 1000;
    c.event = Some(EventSpec::EndpointExceed { coordinate: 0, level: 0.0 });
    let r = mdp_estimate(&c).unwrap();
    let row = &r.tilted[0];
    assert_eq!(row.reference_rate, 0.0);
    assert!((row.p_hat - 0.5).abs() < 4.0 * row.stderr + 0.02, "{}", row.p_hat);
    // p = 1/2 gives n^(1 - 2 alpha) log 2 ~ 0.0098
    assert!(row.minus_log_scaled.abs() < 0.015, "{}", row.minus_log_scaled);
}

#[test]
fn rare_event_estimates_decrease_in_level() {
    let mut last = 1.0;
    for level in [0.5, 1.0, 1.5] {
        let mut c = config(ExperimentKind::Mdp, Builtin::Contact, &[("lambda", 2.0)]);
        c.n_list = vec![1000];
        c.event = Some(EventSpec::EndpointExceed { coordinate: 0, level });
        let row = mdp_estimate(&c).unwrap().tilted.remove(0);
        assert!(row.p_hat < last + 3.0 * row.stderr, "{level}");
        last = row.p_hat;
    }
}

#[test]
fn lln_huge_epsilon_never_exceeded() {
    let mut c = config(ExperimentKind::Lln, Builtin::Contact, &[("lambda", 2.0)]);
    c.n_list = vec![10, 100];
    c.reps = 200;
    c.epsilons = Some(vec![10.0]);
    let r = lln_check(&c).unwrap();
    assert!(r.rows.iter().all(|row| row.frequency == 0.0));
    assert_eq!(r.trends[0].points, 0);
    assert_eq!(r.trends[0].slope, None);
}

#[test]
fn results_identical_across_thread_counts() {
    let mut c = config(ExperimentKind::Mdp, Builtin::Sir, &[]);
    c.reps = 300;
    c.event = Some(EventSpec::SupnormExceed { level: 1.0 });
    let csv = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_experiment(&c)).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&report.rows(), &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let one = csv(1);
    assert_eq!(one, csv(4));
    assert_eq!(
        one.lines().next().unwrap(),
        "experiment,model,n,a_n,alpha,level,target_time,degenerate,estimate,stderr,ess,reference,scaled_log"
    );
}
