//! Acceptance table: one PASS/FAIL line per criterion, with the measured
//! quantities underneath. Criteria that fail are reported, not hidden; the
//! process exits 0 either way so the table is always printed in full by
//! `cargo test`. Set `DDMC_ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ddmc::experiments::{martingale_mean_check, mdp_estimate, ExperimentConfig};
use ddmc::fluid::{closed_form_oracle, solve_fluid, solve_lyapunov, solve_tilted_ode, FluidSolution, TiltControl};
use ddmc::model::{builtin, validate_model, Builtin, ValidatedModel};
use ddmc::ratefn::{
    endpoint_min_cost, optimal_tilt, rate, rate_closed_form, rate_degenerate, variational_sup, variational_value,
    CandidatePath, RateValue,
};
use ddmc::simulate::{replicate_rng, EndpointObserver, Mode, Simulator};
use ddmc::stats::{chi_square_gof, sample_variance};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(summary: impl Into<String>) -> Self {
        Self {
            pass: true,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    /// Records one sub-check.
    fn check(&mut self, ok: bool, line: impl Into<String>) {
        self.pass &= ok;
        let tag = if ok { "ok  " } else { "FAIL" };
        self.details.push(format!("{tag} {}", line.into()));
    }

    fn note(&mut self, line: impl Into<String>) {
        self.details.push(format!("     {}", line.into()));
    }
}

fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
    p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn model(kind: Builtin, p: &[(&str, f64)]) -> ValidatedModel {
    validate_model(builtin(kind, &params(p)).unwrap(), 128).unwrap()
}

fn fluid(kind: Builtin, p: &[(&str, f64)], h: f64) -> FluidSolution {
    solve_lyapunov(solve_fluid(&model(kind, p), 1.0, h).unwrap()).unwrap()
}

const YULE: [(&str, f64); 2] = [("lambda", 1.0), ("x0", 1.0)];

fn fluid_oracles() -> Outcome {
    let mut o = Outcome::new("fluid oracles, max grid error < 1e-6 at h = 1e-3");
    let cases: [(&str, Builtin, Vec<(&str, f64)>); 5] = [
        ("contact lambda=1", Builtin::Contact, vec![("lambda", 1.0)]),
        ("contact lambda=2", Builtin::Contact, vec![("lambda", 2.0)]),
        ("sir", Builtin::Sir, vec![]),
        ("chemical", Builtin::Chemical, vec![]),
        ("yule", Builtin::Yule, YULE.to_vec()),
    ];
    for (name, kind, p) in cases {
        let fl = solve_fluid(&model(kind, &p), 1.0, 1e-3).unwrap();
        let pm = params(&p);
        let err = fl
            .grid()
            .times()
            .zip(fl.x())
            .map(|(t, x)| {
                let exact = closed_form_oracle(kind, &pm, t).unwrap().x;
                x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        o.check(err < 1e-6, format!("{name}: {err:.2e}"));
    }
    o
}

fn clt_covariance() -> Outcome {
    let mut o = Outcome::new("Yule covariance to 1e-6; MC variance at n = 1e5 within 5%");
    let fl = fluid(Builtin::Yule, &YULE, 1e-3);
    let cov = fl.sigma_ou().unwrap();
    let err = fl
        .grid()
        .times()
        .zip(cov)
        .map(|(t, s)| (s[(0, 0)] - ((2.0 * t).exp() - t.exp())).abs())
        .fold(0.0, f64::max);
    o.check(err < 1e-6, format!("max |Sigma_t - (e^2t - e^t)| = {err:.2e}"));

    let (n, reps) = (100_000u64, 5000u64);
    let m = model(Builtin::Yule, &YULE);
    let sim = Simulator::new(&m, n, 1.0).unwrap();
    let x1 = fl.x_final()[0];
    let nf = n as f64;
    let theta: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut obs = EndpointObserver::default();
            sim.run(&mut replicate_rng(2, r), Mode::Plain, &mut obs).unwrap();
            (obs.state[0] as f64 - nf * x1) / nf.sqrt()
        })
        .collect();
    let var = sample_variance(&theta);
    let reference = cov.last().unwrap()[(0, 0)];
    let rel = var / reference - 1.0;
    o.check(rel.abs() < 0.05, format!("variance {var:.4} vs {reference:.4} ({:+.2}%)", 100.0 * rel));
    o
}

fn geometric_law() -> Outcome {
    let mut o = Outcome::new("Yule n = 1 at t = 1 is geometric(e^-1), chi-square p > 0.01");
    let m = model(Builtin::Yule, &YULE);
    let sim = Simulator::new(&m, 1, 1.0).unwrap();
    let reps = 100_000u64;
    let max_k = 60;
    let mut counts = vec![0u64; max_k + 1];
    let samples: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut obs = EndpointObserver::default();
            sim.run(&mut replicate_rng(3, r), Mode::Plain, &mut obs).unwrap();
            obs.state[0] as usize
        })
        .collect();
    for k in samples {
        counts[k.clamp(1, max_k + 1) - 1] += 1;
    }
    // cells k = 1..=max_k, then the tail k > max_k
    let p = (-1.0f64).exp();
    let mut probs: Vec<f64> = (1..=max_k).map(|k| p * (1.0 - p).powi(k as i32 - 1)).collect();
    probs.push((1.0 - p).powi(max_k as i32));
    let r = chi_square_gof(&counts, &probs, 5.0).unwrap();
    o.check(
        r.p_value > 0.01,
        format!("chi2 = {:.2}, dof = {}, p = {:.3}", r.statistic, r.dof, r.p_value),
    );
    o
}

/// Rescales `shape` so that `(a_n^2 / n) int g^T sigma g dt = 1` along the
/// fluid path, the leading-order variance of `log w_T(g)`.
fn unit_variance_control(fl: &FluidSolution, shape: &TiltControl, n: u64, alpha: f64) -> TiltControl {
    let h = fl.grid().h();
    let q: Vec<f64> = shape
        .values()
        .iter()
        .zip(fl.sigma())
        .map(|(g, s)| g.dot(&(s * g)))
        .collect();
    let integral = h * (q.iter().sum::<f64>() - 0.5 * (q[0] + q[q.len() - 1]));
    let scale = (n as f64).powf(2.0 * alpha - 1.0);
    shape.scaled(1.0 / (scale * integral).sqrt())
}

fn martingale_mean() -> Outcome {
    let mut o = Outcome::new("|E w_T(g) - 1| < 3 stderr, n = 1e3, alpha = 0.75, 1e4 reps");
    let (n, alpha, reps) = (1000u64, 0.75, 10_000u64);
    let yule = model(Builtin::Yule, &YULE);
    let fy = solve_fluid(&yule, 1.0, 1e-2).unwrap();
    let flat = TiltControl::constant(fy.grid().clone(), &[1.0]);
    let contact = model(Builtin::Contact, &[("lambda", 2.0)]);
    let fc = solve_fluid(&contact, 1.0, 1e-2).unwrap();
    let wave = TiltControl::from_fn(fc.grid().clone(), 1, |t| vec![(2.0 * std::f64::consts::PI * t).sin()]).unwrap();
    let cases = [
        ("yule, constant g", &yule, unit_variance_control(&fy, &flat, n, alpha)),
        ("contact, sine g", &contact, unit_variance_control(&fc, &wave, n, alpha)),
    ];
    for (name, m, g) in cases {
        let row = martingale_mean_check(m, n, &g, alpha, reps, 4).unwrap();
        let sup = g.values().iter().map(|v| v.amax()).fold(0.0, f64::max);
        o.check(
            (row.mean - 1.0).abs() < 3.0 * row.stderr,
            format!(
                "{name} (sup|g| = {sup:.3}): mean {:.4} +- {:.4}, ess {:.0}",
                row.mean, row.stderr, row.ess
            ),
        );
    }
    // g = 1 on Yule: log-weight variance ~ 54, the sample mean is dominated
    // by rare huge weights and cannot resolve E w = 1 at this budget
    let row = martingale_mean_check(&yule, n, &flat, alpha, reps, 4).unwrap();
    let ok = (row.mean - 1.0).abs() < 3.0 * row.stderr;
    o.note(format!(
        "[informational] yule, g = 1: mean {:.4} +- {:.4}, ess {:.1} -> {}",
        row.mean,
        row.stderr,
        row.ess,
        if ok { "within 3 stderr" } else { "outside 3 stderr" }
    ));
    o
}

fn yule_path(fl: &FluidSolution, c: f64) -> CandidatePath {
    CandidatePath::from_fn(fl.grid().clone(), 1, move |t| vec![c * (t.exp() - 1.0)], None).unwrap()
}

fn rate_consistency() -> Outcome {
    let mut o = Outcome::new("degenerate = closed to 1e-8; variational_sup(32) >= 0.95 I; value at psi = I");
    for (kind, d) in [(Builtin::Contact, 1), (Builtin::Sir, 2), (Builtin::Yule, 1)] {
        let fl = fluid(kind, &[], 1e-3);
        let f = CandidatePath::from_fn(fl.grid().clone(), d, |t| vec![t * t; d], None).unwrap();
        let a = rate_closed_form(&fl, &f).unwrap().value.as_f64();
        let b = rate_degenerate(&fl, &f).unwrap().value.as_f64();
        let rel = (a - b).abs() / a;
        o.check(rel < 1e-8, format!("{kind}: closed {a:.10}, degenerate {b:.10}, rel {rel:.1e}"));
    }
    let fl = fluid(Builtin::Yule, &YULE, 1e-3);
    let f = yule_path(&fl, 0.7);
    let closed = rate_closed_form(&fl, &f).unwrap();
    let i = closed.value.as_f64();
    let lb = variational_sup(&fl, &f, 32, 2).unwrap().value.as_f64();
    o.check(lb >= 0.95 * i && lb <= i * (1.0 + 1e-6), format!("yule golden path: I = {i:.8}, sup_32 = {lb:.8} ({:.4} I)", lb / i));
    let v = variational_value(&fl, &f, &closed.tilt().unwrap()).unwrap();
    let rel = (v - i).abs() / i;
    o.check(rel < 1e-5, format!("yule: value at psi {v:.10} vs I {i:.10}, rel {rel:.1e}"));
    let sir = fluid(Builtin::Sir, &[], 1e-3);
    let f = CandidatePath::from_fn(sir.grid().clone(), 2, |t| vec![t.sin(), -0.5 * t * t], None).unwrap();
    let r = rate_closed_form(&sir, &f).unwrap();
    let v = variational_value(&sir, &f, &r.tilt().unwrap()).unwrap();
    let rel = (v - r.value.as_f64()).abs() / r.value.as_f64();
    o.check(rel < 1e-5, format!("sir: value at psi vs I, rel {rel:.1e}"));
    o
}

fn degenerate_dichotomy() -> Outcome {
    let mut o = Outcome::new("chemical: pattern paths finite with psi_1 to 1e-6, others infinite");
    let (lambda, mu) = (1.0, 1.0);
    let fl = fluid(Builtin::Chemical, &[], 1e-3);
    let f1 = |t: f64| 0.3 * t * t + 0.2 * t;
    let df1 = |t: f64| 0.6 * t + 0.2;
    let df = |t: f64| vec![df1(t), df1(t), -df1(t)];
    let f = CandidatePath::from_fn(fl.grid().clone(), 3, |t| vec![f1(t), f1(t), -f1(t)], Some(&df)).unwrap();
    let r = rate(&fl, &f).unwrap();
    let finite = r.value.is_finite();
    let mut err: f64 = 0.0;
    if let Some(psi) = &r.psi {
        for (k, t) in fl.grid().times().enumerate() {
            let x = &fl.x()[k];
            let expected = (df1(t) + (lambda * x[0] + lambda * x[1] + mu) * f1(t)) / (3.0 * (lambda * x[0] * x[1] + mu * x[2]));
            let p = &psi[k];
            err = err.max((p[0] - expected).abs()).max((p[1] - p[0]).abs()).max((p[2] + p[0]).abs());
        }
    }
    o.check(finite && err < 1e-6, format!("(f, f, -f): I = {:.6}, max psi error {err:.1e}", r.value.as_f64()));
    for (name, path) in [
        ("(t, 0, 0)", Box::new(|t: f64| vec![t, 0.0, 0.0]) as Box<dyn Fn(f64) -> Vec<f64>>),
        ("(f, f, f)", Box::new(move |t: f64| vec![f1(t), f1(t), f1(t)])),
        ("(f, 2f, -f)", Box::new(move |t: f64| vec![f1(t), 2.0 * f1(t), -f1(t)])),
    ] {
        let g = CandidatePath::from_fn(fl.grid().clone(), 3, path, None).unwrap();
        let r = rate_degenerate(&fl, &g).unwrap();
        o.check(r.value == RateValue::Infinite, format!("{name}: I = {}", r.value.as_f64()));
    }
    o
}

/// Minimises a midpoint discretisation of the one-dimensional rate over grid
/// paths pinned at `f(0) = 0`, `f(T) = z`, by a direct linear solve.
fn qp_endpoint_cost(fl: &FluidSolution, z: f64) -> f64 {
    let m = fl.grid().steps();
    let h = fl.grid().h();
    let mut a = DMatrix::zeros(m, m + 1);
    let mut w = DVector::zeros(m);
    for k in 0..m {
        let b = 0.5 * (fl.b()[k][(0, 0)] + fl.b()[k + 1][(0, 0)]);
        a[(k, k)] = -1.0 / h - 0.5 * b;
        a[(k, k + 1)] = 1.0 / h - 0.5 * b;
        w[k] = h / (0.5 * (fl.sigma()[k][(0, 0)] + fl.sigma()[k + 1][(0, 0)]));
    }
    let hm = a.transpose() * DMatrix::from_diagonal(&w) * &a;
    let free = hm.view((1, 1), (m - 1, m - 1)).into_owned();
    let rhs = -hm.view((1, m), (m - 1, 1)).into_owned() * z;
    let x = free.lu().solve(&rhs).unwrap();
    let mut full = DVector::zeros(m + 1);
    full.rows_mut(1, m - 1).copy_from(&x);
    full[m] = z;
    0.5 * full.dot(&(hm * &full))
}

fn endpoint_identity() -> Outcome {
    let mut o = Outcome::new("endpoint cost = z^T Sigma^-1 z / 2 to 1e-6; QP oracle to 1e-4");
    for (name, kind, p, z) in [
        ("yule", Builtin::Yule, YULE.to_vec(), 0.8),
        ("contact", Builtin::Contact, vec![("lambda", 2.0)], 0.5),
    ] {
        let fl = fluid(kind, &p, 1e-3);
        let (_, r) = endpoint_min_cost(&fl, &[z]).unwrap();
        let value = r.value.as_f64();
        let sigma = fl.sigma_ou().unwrap().last().unwrap()[(0, 0)];
        let exact = z * z / (2.0 * sigma);
        let rel = (value / exact - 1.0).abs();
        o.check(rel < 1e-6, format!("{name}: {value:.10} vs {exact:.10}, rel {rel:.1e}"));
        let coarse = fluid(kind, &p, 2e-3);
        let qp = qp_endpoint_cost(&coarse, z);
        let rel = (value / qp - 1.0).abs();
        o.check(rel < 1e-4, format!("{name}: QP oracle {qp:.10}, rel {rel:.1e}"));
    }
    o
}

fn mdp_desk_scale() -> Outcome {
    let mut o = Outcome::new("Yule theta_T >= 1: -(n/a_n^2) log p within 25% of reference, ESS >= 30, trend toward it");
    let c = ExperimentConfig::from_toml_str(
        "experiment = \"mdp\"\nn_list = [1000, 10000]\nalpha = 0.75\nreps = 4000\nseed = 8\n\
         [model]\nbuiltin = \"yule\"\n[event]\nkind = \"endpoint_exceed\"\ncoordinate = 0\nlevel = 1.0\n",
    )
    .unwrap();
    let r = mdp_estimate(&c).unwrap();
    o.note(format!("reference rate 1 / (2 Sigma_T) = {:.5}", r.target.reference_rate));
    for row in &r.tilted {
        let err = row.relative_error();
        o.check(
            err.abs() <= 0.25 && row.ess >= 30.0,
            format!(
                "n = {}: p = {:.3e} +- {:.1e}, scaled -log p = {:.5} ({:+.1}%), ess {:.0}",
                row.n,
                row.p_hat,
                row.stderr,
                row.minus_log_scaled,
                100.0 * err,
                row.ess
            ),
        );
    }
    let (a, b) = (r.tilted[0].relative_error().abs(), r.tilted[1].relative_error().abs());
    o.check(b < a, format!("relative error {:.1}% -> {:.1}%", 100.0 * a, 100.0 * b));
    o
}

const KINDS: [Builtin; 4] = [Builtin::Contact, Builtin::Sir, Builtin::Chemical, Builtin::Yule];
const INVERTIBLE: [Builtin; 3] = [Builtin::Contact, Builtin::Sir, Builtin::Yule];

fn poly_path(fl: &FluidSolution, kind: Builtin, c: Vec<f64>) -> CandidatePath {
    let d = fl.dimension();
    let free = if kind == Builtin::Chemical { 1 } else { d };
    let comp = move |i: usize, t: f64| (0..3).map(|j| c[3 * i + j] * t.powi(j as i32 + 1)).sum::<f64>();
    let f = move |t: f64| {
        let v: Vec<f64> = (0..free).map(|i| comp(i, t)).collect();
        if kind == Builtin::Chemical {
            vec![v[0], v[0], -v[0]]
        } else {
            v
        }
    };
    CandidatePath::from_fn(fl.grid().clone(), d, f, None).unwrap()
}

fn smooth_control(fl: &FluidSolution, c: Vec<f64>) -> TiltControl {
    let d = fl.dimension();
    TiltControl::from_fn(fl.grid().clone(), d, move |t| {
        (0..d).map(|i| c[2 * i] * (2.0 * t).cos() + c[2 * i + 1] * t).collect()
    })
    .unwrap()
}

fn uniform(rng: &mut impl Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

fn property_suites() -> Outcome {
    let mut o = Outcome::new("sigma PSD, quadratic scaling, variational bound, superposition, round trip");
    let mut rng = replicate_rng(9, 0);

    let mut worst = f64::INFINITY;
    let mut count = usize::MAX;
    for kind in KINDS {
        let m = validate_model(builtin(kind, &BTreeMap::new()).unwrap(), 1000).unwrap();
        count = count.min(m.samples().len());
        for x in m.samples() {
            let s = m.sigma_matrix(x).unwrap();
            let e = SymmetricEigen::new(s.clone()).eigenvalues.min() / s.amax().max(1.0);
            worst = worst.min(e);
        }
    }
    o.check(worst >= -1e-12 && count >= 1000, format!("sigma PSD on >= {count} points per builtin, min scaled eigenvalue {worst:.1e}"));

    let fls: Vec<FluidSolution> = KINDS.iter().map(|&k| fluid(k, &[], 1e-2)).collect();
    let mut scale_err: f64 = 0.0;
    for _ in 0..32 {
        for (kind, fl) in KINDS.iter().zip(&fls) {
            let f = poly_path(fl, *kind, uniform(&mut rng, 9, 2.0));
            let base = rate(fl, &f).unwrap().value.as_f64();
            for c in [2.0, 3.0] {
                let scaled = rate(fl, &f.scaled(c)).unwrap().value.as_f64();
                scale_err = scale_err.max((scaled - c * c * base).abs() / (c * c * base).max(1e-300));
            }
        }
    }
    o.check(scale_err <= 1e-10, format!("I(cf) = c^2 I(f), c in {{2, 3}}: max rel error {scale_err:.1e}"));

    let mut excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let k = rng.random_range(0..3);
        let kind = INVERTIBLE[k];
        let fl = &fls[KINDS.iter().position(|&x| x == kind).unwrap()];
        let f = poly_path(fl, kind, uniform(&mut rng, 9, 2.0));
        let i = rate_closed_form(fl, &f).unwrap().value.as_f64();
        let v = variational_value(fl, &f, &smooth_control(fl, uniform(&mut rng, 6, 3.0))).unwrap();
        excess = excess.max((v - i) / (1.0 + i));
    }
    o.check(excess <= 1e-6, format!("100 random (f, g): max (v - I)/(1 + I) = {excess:.2e}"));

    let mut lin: f64 = 0.0;
    for _ in 0..32 {
        for fl in &fls {
            let (g1, g2) = (smooth_control(fl, uniform(&mut rng, 6, 2.0)), smooth_control(fl, uniform(&mut rng, 6, 2.0)));
            let c = 3.0 * (2.0 * rng.random::<f64>() - 1.0);
            let y1 = solve_tilted_ode(fl, &g1).unwrap();
            let y2 = solve_tilted_ode(fl, &g2).unwrap();
            let sum = solve_tilted_ode(fl, &(&g1 + &g2.scaled(c))).unwrap();
            for ((s, p), q) in sum.iter().zip(&y1).zip(&y2) {
                let expected = p + q * c;
                lin = lin.max((s - &expected).amax() / expected.amax().max(1.0));
            }
        }
    }
    o.check(lin <= 1e-9, format!("tilted ODE superposition: max rel error {lin:.1e}"));

    let mut ratio: f64 = 0.0;
    for _ in 0..32 {
        for kind in INVERTIBLE {
            let fl = &fls[KINDS.iter().position(|&x| x == kind).unwrap()];
            let g = smooth_control(fl, uniform(&mut rng, 6, 2.0));
            let y = solve_tilted_ode(fl, &g).unwrap();
            let f = CandidatePath::new(fl.grid().clone(), y, None).unwrap();
            let y2 = solve_tilted_ode(fl, &optimal_tilt(fl, &f).unwrap()).unwrap();
            let h = fl.grid().h();
            let gap = y2.iter().zip(f.values()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
            ratio = ratio.max(gap / (h * h));
        }
    }
    o.check(ratio <= 10.0, format!("round trip: max gap = {ratio:.2} h^2"));
    o
}

fn determinism() -> Outcome {
    let mut o = Outcome::new("byte-identical CSVs across runs and --threads 1 vs N");
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join("configs");
    let work = tempfile::TempDir::new().unwrap();
    let sup = work.path().join("mdp_sir.toml");
    fs::write(
        &sup,
        "experiment = \"mdp\"\nn_list = [200, 800]\nreps = 400\nseed = 3\nnaive = true\n\
         [model]\nbuiltin = \"sir\"\n[event]\nkind = \"supnorm_exceed\"\nlevel = 1.0\n",
    )
    .unwrap();
    let lln = root.join("lln_contact.toml");
    let yule = root.join("yule.toml");
    let jobs: Vec<(&str, Vec<String>, &str)> = vec![
        ("mdp sup-norm", vec!["experiment".into(), "--config".into(), sup.display().to_string()], "results.csv"),
        ("lln", vec!["experiment".into(), "--config".into(), lln.display().to_string(), "--seed".into(), "5".into()], "results.csv"),
        ("simulate", vec!["simulate".into(), "--model".into(), yule.display().to_string(), "--seed".into(), "7".into()], "trajectory.csv"),
        ("fluid", vec!["fluid".into(), "--model".into(), yule.display().to_string()], "fluid.csv"),
    ];
    for (name, args, file) in jobs {
        let outputs: Vec<Option<Vec<u8>>> = ["1", "1", "4"]
            .iter()
            .enumerate()
            .map(|(i, threads)| {
                let dir = work.path().join(format!("{}-{i}", name.replace(' ', "_")));
                let status = Command::new(env!("CARGO_BIN_EXE_ddmc"))
                    .args(&args)
                    .args(["--threads", threads, "--out-dir"])
                    .arg(&dir)
                    .output()
                    .unwrap();
                status.status.success().then(|| fs::read(dir.join(file)).unwrap())
            })
            .collect();
        let ok = outputs[0].is_some() && outputs.iter().all(|x| x == &outputs[0]);
        let size = outputs[0].as_ref().map_or(0, Vec::len);
        o.check(ok, format!("{name}: {file} ({size} bytes) identical over 2 runs at 1 thread and 1 at 4"));
    }
    o
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "fluid oracles", fluid_oracles),
        (2, "CLT covariance", clt_covariance),
        (3, "geometric law", geometric_law),
        (4, "martingale mean", martingale_mean),
        (5, "rate-function consistency", rate_consistency),
        (6, "degenerate dichotomy", degenerate_dichotomy),
        (7, "endpoint identity", endpoint_identity),
        (8, "MDP desk-scale check", mdp_desk_scale),
        (9, "property suites", property_suites),
        (10, "determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id:>2}] {name}: {} ({:.1}s)", o.summary, start.elapsed().as_secs_f64());
        for d in &o.details {
            println!("          {d}");
        }
        if !o.pass {
            failed.push(id);
        }
    }
    println!("acceptance: {}/10 passed; failed: {failed:?}", 10 - failed.len());
    if std::env::var("DDMC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") && !failed.is_empty() {
        std::process::exit(1);
    }
}
