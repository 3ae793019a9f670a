mod common;

use common::REFERENCE;
use necrosim::dynamics::{integrate, integrate_from, log_ratio, period_samples, IntegratorConfig};
use necrosim::growth::stationary_radius;
use necrosim::model::{supply_stats, Supply, SupplyShape};
use necrosim::periodic::{
    classify, convergence_study, find_periodic_orbit, find_periodic_orbit_from, poincare_map, SolverConfig,
    Verdict,
};
use necrosim::Error;

const RS_2: f64 = 2.166026975179906;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn period_map_fixes_equilibrium() {
    let m = REFERENCE.model();
    let s = Supply::constant(2.0, 1.0).unwrap();
    let rs = stationary_radius(&m, 2.0, &cfg().shooting).unwrap();
    assert!((poincare_map(&m, &s, rs, &cfg()).unwrap() - rs).abs() < 1e-8);
}

#[test]
fn period_map_does_not_grow_for_nonpositive_mean() {
    let m = REFERENCE.model();
    for (mean, amp) in [(0.8, 0.2), (1.0, 0.3), (0.7, 0.5)] {
        let s = Supply::sinusoidal(mean, amp, 0.0, 1.0).unwrap();
        for r0 in [0.2, 1.0, 6.0] {
            let p = poincare_map(&m, &s, r0, &cfg()).unwrap();
            assert!(p <= r0 * (1.0 + 1e-8), "{mean} {amp} {r0}: {p}");
        }
    }
}

#[test]
fn constant_supply_orbit_is_flat() {
    let m = REFERENCE.model();
    let s = Supply::constant(2.0, 1.0).unwrap();
    let orbit = find_periodic_orbit(&m, &s, &cfg()).unwrap();
    assert!((orbit.fixed_point - RS_2).abs() < 1e-6);
    assert!(orbit.samples.iter().all(|(_, r)| (r - RS_2).abs() < 1e-6));
    assert!((orbit.upper_bound - RS_2).abs() < 1e-8);
}

#[test]
fn sinusoidal_orbit_properties() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let c = cfg();
    let fp_tol = c.periodic.fp_tol;
    let orbit = find_periodic_orbit(&m, &s, &c).unwrap();
    let rs: Vec<f64> = orbit.samples.iter().map(|p| p.1).collect();
    let (lo, hi) = rs.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(*r), b.max(*r)));
    let mean = rs[..rs.len() - 1].iter().sum::<f64>() / (rs.len() - 1) as f64;
    assert!(lo < mean && mean < hi && hi - lo > 1e-2);
    assert!(orbit.closure < fp_tol);
    assert!((rs[0] - rs[rs.len() - 1]).abs() < fp_tol);
    assert!(orbit.fixed_point <= orbit.upper_bound);
    assert!(orbit.iterates_monotone());
    assert!(orbit.iteration_log.iter().all(|it| it.radius <= orbit.upper_bound * (1.0 + 1e-12)));

    // five periods from the fixed point close up period after period
    let tr = integrate(&m, &s, orbit.fixed_point, &IntegratorConfig::with_horizon(5.0), &c.shooting).unwrap();
    for k in 0..=64 {
        let t = k as f64 / 64.0 * 4.0;
        assert!((tr.radius_at(t + 1.0) - tr.radius_at(t)).abs() < 10.0 * fp_tol, "t = {t}");
        assert!((tr.radius_at(t) - orbit.radius_at(t)).abs() < 10.0 * fp_tol);
    }
}

#[test]
fn orbit_is_independent_of_start() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let c = cfg();
    let a = find_periodic_orbit(&m, &s, &c).unwrap();
    let b = find_periodic_orbit_from(&m, &s, Some(0.1 * a.upper_bound), &c).unwrap();
    assert!((a.fixed_point - b.fixed_point).abs() < 10.0 * c.periodic.fp_tol);
    // from above the sequence decreases, from below it increases
    let da = a.iteration_log[1].radius - a.iteration_log[0].radius;
    let db = b.iteration_log[1].radius - b.iteration_log[0].radius;
    assert!(da < 0.0 && db > 0.0);
    assert!(b.iterates_monotone());
}

#[test]
fn plain_iteration_agrees_with_accelerated() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let mut plain = cfg();
    plain.periodic.secant = false;
    let a = find_periodic_orbit(&m, &s, &cfg()).unwrap();
    let b = find_periodic_orbit(&m, &s, &plain).unwrap();
    assert!((a.fixed_point - b.fixed_point).abs() < 10.0 * plain.periodic.fp_tol);
    assert!(b.iteration_log.len() > a.iteration_log.len());
}

#[test]
fn iteration_limit_reports_nonconvergence() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let mut c = cfg();
    c.periodic.secant = false;
    c.periodic.max_iterations = 3;
    assert!(matches!(find_periodic_orbit(&m, &s, &c), Err(Error::NonConvergence { iterations: 3, .. })));
}

#[test]
fn log_ratio_behaviour() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let c = cfg();
    let orbit = find_periodic_orbit(&m, &s, &c).unwrap();
    let on = integrate(&m, &s, orbit.fixed_point, &IntegratorConfig::with_horizon(3.0), &c.shooting).unwrap();
    assert!(log_ratio(&on, &orbit).iter().all(|y| y.abs() < 1e-8));

    let min = orbit.samples.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let below = integrate(&m, &s, 0.5 * min, &IntegratorConfig::with_horizon(10.0), &c.shooting).unwrap();
    let y = log_ratio(&below, &orbit);
    assert!(y.iter().all(|v| *v < 0.0));
    assert!(y.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    assert!(y.last().unwrap().abs() < 0.5 * y[0].abs());
}

#[test]
fn classification_verdicts() {
    let m = REFERENCE.model();
    let c = cfg();
    let low = classify(&m, &Supply::constant(0.4, 1.0).unwrap(), &c).unwrap();
    assert_eq!(low.verdict, Verdict::Extinction);
    assert!((low.s_bar + 1.0).abs() < 1e-14);
    assert!(low.orbit.is_none());

    let boundary = classify(&m, &Supply::sinusoidal(1.0, 0.3, 0.0, 1.0).unwrap(), &c).unwrap();
    assert_eq!(boundary.verdict, Verdict::Extinction);
    assert!(boundary.s_bar.abs() < 1e-14);

    let high = classify(&m, &Supply::constant(2.0, 1.0).unwrap(), &c).unwrap();
    assert_eq!(high.verdict, Verdict::PersistentPeriodic);
    let orbit = high.orbit.unwrap();
    assert!((orbit.fixed_point - RS_2).abs() < 1e-6);
}

#[test]
fn unresolved_sign_is_ambiguous() {
    // S̄ = 1e-6 exactly, but two Simpson panels per piece cannot resolve it.
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(1.0 + 1e-6, 0.3, 0.0, 1.0).unwrap();
    let mut c = cfg();
    c.quadrature.initial_panels = 2;
    c.quadrature.max_panels = 4;
    c.quadrature.rel_tol = 1.0;
    let stats = supply_stats(&m, &s, &c.quadrature()).unwrap();
    assert!(stats.quad_error > 1e-6, "{stats:?}");
    assert!(matches!(classify(&m, &s, &c), Err(Error::AmbiguousClassification { .. })));
    // resolved with the default quadrature
    let fine = classify(&m, &s, &cfg()).unwrap();
    assert!((fine.s_bar - 1e-6).abs() < 1e-12);
    assert_eq!(fine.verdict, Verdict::PersistentPeriodic);
}

#[test]
fn piecewise_linear_mean_matches_hand_integral() {
    // φ rises linearly 0.3 → 1.9 on [0, 0.5] and falls back on [0.5, 1].
    let m = REFERENCE.model();
    let s = Supply::new(
        SupplyShape::PiecewiseLinear {
            knots: vec![[0.0, 0.3], [0.5, 1.9]],
        },
        1.0,
    )
    .unwrap();
    let stats = supply_stats(&m, &s, &cfg().quadrature()).unwrap();
    // φ > σ_D = 0.5 on a fraction (1.9 − 0.5)/1.6 of the period, where φ is
    // uniform on (0.5, 1.9) in the time average, so the mean of g(φ) there is 0.2.
    let live = 1.4 / 1.6;
    let exact = live * 0.2 - (1.0 - live);
    assert!((stats.s_bar - exact).abs() < 1e-12, "{} vs {exact}", stats.s_bar);
}

#[test]
fn negative_mean_decays_at_predicted_rate() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(0.9, 0.3, 0.0, 1.0).unwrap();
    let stats = supply_stats(&m, &s, &cfg().quadrature()).unwrap();
    assert!(stats.s_bar < 0.0);
    let tr = integrate(&m, &s, 2.0, &IntegratorConfig::with_horizon(20.0), &cfg().shooting).unwrap();
    for (n, r) in period_samples(&tr, 1.0).iter().enumerate() {
        assert!(*r <= 2.0 * (n as f64 * stats.s_bar / 3.0).exp() * (1.0 + 1e-8));
    }
}

#[test]
fn on_orbit_convergence_study_stays_put() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let c = cfg();
    let orbit = find_periodic_orbit(&m, &s, &c).unwrap();
    let rep = convergence_study(&m, &s, &orbit, &[orbit.fixed_point], 10, 2, &c).unwrap();
    let run = &rep.runs[0];
    assert!(run.per_period_sup.iter().all(|d| *d <= 10.0 * c.periodic.fp_tol), "{:?}", run.per_period_sup);
    assert!(run.bounded);
}

#[test]
fn orbit_matches_restarted_period() {
    let m = REFERENCE.model();
    let s = Supply::sinusoidal(2.0, 0.5, 0.0, 1.0).unwrap();
    let c = cfg();
    let orbit = find_periodic_orbit(&m, &s, &c).unwrap();
    let second = integrate_from(&m, &s, 1.0, orbit.fixed_point, 2.0, &c.integrator, &c.shooting).unwrap();
    assert!((second.final_radius() - orbit.fixed_point).abs() < 10.0 * c.periodic.fp_tol);
}
