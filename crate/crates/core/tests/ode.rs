use lra_cmaes::ode::{euler_integrate, EulerOptions, OdeState};

fn endpoint(eta: f64, horizon: f64) -> OdeState {
    let steps = (horizon / eta).round() as u64;
    let opts = EulerOptions {
        stride: u64::MAX,
        stop_tol: 0.0,
        ..EulerOptions::new(eta, steps)
    };
    let tr = euler_integrate(OdeState::new(3.0, 2.0), &opts);
    assert!(tr.degenerate.is_none());
    tr.last
}

fn dist(a: OdeState, b: OdeState) -> f64 {
    (a.m - b.m).hypot(a.v - b.v)
}

#[test]
fn richardson_error_ratio_first_order() {
    let horizon = 0.2;
    for &eta in &[1e-3, 1e-4, 1e-5] {
        let e1 = dist(endpoint(eta, horizon), endpoint(eta / 2.0, horizon));
        let e2 = dist(endpoint(eta / 2.0, horizon), endpoint(eta / 4.0, horizon));
        let ratio = e1 / e2;
        assert!((1.5..=3.0).contains(&ratio), "eta={eta}: ratio {ratio}");
    }
}

#[test]
fn small_rate_tracks_reference_to_optimum() {
    let run = |eta: f64, steps: u64| euler_integrate(OdeState::new(3.0, 2.0), &EulerOptions::new(eta, steps)).last;
    let coarse = run(1e-5, 5_000_000);
    assert!(coarse.m.hypot(coarse.v) < 0.05, "{coarse:?}");
    // reference: ten times finer over the same time horizon
    let reference = run(1e-6, 50_000_000);
    assert!(dist(coarse, reference) < 0.05);
}

#[test]
fn large_initial_variance_converges_to_origin() {
    let tr = euler_integrate(OdeState::new(3.0, 2.0), &EulerOptions::new(1e-5, 5_000_000));
    let s = tr.last;
    assert!(s.m.abs() < 0.05 && s.v < 0.05);
}

#[test]
fn emitted_states_keep_positive_variance() {
    for &(m, v) in &[(3.0, 0.02), (3.0, 0.5), (3.0, 2.0), (0.4, 1.0)] {
        let tr = euler_integrate(OdeState::new(m, v), &EulerOptions::new(1e-3, 200_000));
        assert!(tr.states.iter().all(|s| s.v > 0.0));
        assert!(tr.states.windows(2).all(|w| w[1].step > w[0].step));
    }
}
