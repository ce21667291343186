use glvortex::profile::*;
use glvortex::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn base() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| solve_profile(12.0, 2000, 1e-8).unwrap())
}

#[test]
fn boundary_values_and_far_field() {
    let p = base();
    assert_eq!(p.f[0], 0.0);
    assert_eq!(p.a[0], 0.0);
    let (f, a, _, _) = p.eval(12.0).unwrap();
    assert!(1.0 - f < 1e-3 && 1.0 - a < 1e-3);
    let (f0, a0, df0, da0) = p.eval(0.0).unwrap();
    assert_eq!((f0, a0, da0), (0.0, 0.0, 0.0));
    assert!(df0 > 0.5 && df0 < 0.7, "f'(0) = {df0}");
}

#[test]
fn bounded_and_monotone() {
    let p = base();
    for i in 1..p.len() - 1 {
        assert!(p.f[i] > 0.0 && p.f[i] < 1.0);
        assert!(p.a[i] > 0.0 && p.a[i] < 1.0);
        assert!(p.f[i] >= p.f[i - 1] && p.a[i] >= p.a[i - 1]);
    }
}

#[test]
fn residual_and_decay() {
    let p = base();
    assert!(p.residual_sup < p.tol);
    let rep = ode_residual(p);
    assert!(rep.sup() < 10.0 * p.tol, "{}", rep.sup());
    assert!(!rep.trivial_branch);
    let (rf, ra) = p.decay_rates();
    assert!((rf - 1.0).abs() < 0.15 && (ra - 1.0).abs() < 0.15, "{rf} {ra}");
}

#[test]
fn linearized_far_field_decays_at_unit_rate() {
    // g'' + g'/r - g = 0 integrated inward from a K0-like start: log slope -> -1
    let (r0, r1, n) = (20.0, 6.0, 20000);
    let h = (r0 - r1) / n as f64;
    let mut g = 1e-8;
    let mut dg = -g * (1.0 + 0.5 / r0);
    let mut pts = Vec::new();
    let mut r = r0;
    for k in 0..n {
        let acc = g - dg / r;
        dg -= h * acc;
        g -= h * dg;
        r -= h;
        if k % 100 == 0 && r <= 10.0 {
            pts.push((r, g.ln()));
        }
    }
    let slope = least_squares_slope(&pts);
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn asymptotic_closure_keeps_the_invariants() {
    let p = solve_profile_with(ProfileConfig { far_field: FarField::Asymptotic, ..Default::default() }).unwrap();
    assert!(ode_residual(&p).sup() < 1e-7);
    let last = p.len() - 1;
    assert!(p.f[last] < 1.0 && 1.0 - p.f[last] < 1e-3);
    assert!(p.f.windows(2).all(|w| w[1] >= w[0]) && p.a.windows(2).all(|w| w[1] >= w[0]));
    let gap = (0..p.len()).map(|i| (p.f[i] - base().f[i]).abs()).fold(0.0, f64::max);
    assert!(gap > 1e-7 && gap < 1e-4, "gap to Dirichlet {gap}");
}

#[test]
fn eval_exact_at_nodes_and_out_of_range() {
    let p = base();
    for i in [1, 17, 500, 1999] {
        let (f, a, df, da) = p.eval(p.r_grid[i]).unwrap();
        assert_eq!((f, a, df, da), (p.f[i], p.a[i], p.df[i], p.da[i]));
    }
    assert!(matches!(p.eval(12.5), Err(Error::OutOfRange { .. })));
    assert!(matches!(p.eval(-0.1), Err(Error::OutOfRange { .. })));
}

#[test]
fn perturbed_profile_has_large_residual() {
    let p = base();
    let f: Vec<f64> = p.r_grid.iter().zip(&p.f).map(|(r, f)| f + 0.01 * r.sin()).collect();
    let q = RadialProfile::from_samples(p.r_max, f, p.a.clone()).unwrap();
    assert!(ode_residual(&q).sup() > 1e-3);
}

#[test]
fn trivial_branch_is_flagged() {
    let q = RadialProfile::from_samples(12.0, vec![0.0; 400], vec![0.0; 400]).unwrap();
    let rep = ode_residual(&q);
    assert_eq!(rep.sup(), 0.0);
    assert!(rep.trivial_branch);
}

#[test]
fn refinement_reduces_residual() {
    let sup: Vec<f64> = [200, 400, 800].iter().map(|&n| ode_residual(&solve_profile(12.0, n, 1e-11).unwrap()).sup()).collect();
    assert!(sup[0] / sup[1] >= 3.0 && sup[1] / sup[2] >= 3.0, "{sup:?}");
}

#[test]
fn independent_of_truncation_radius() {
    // the Dirichlet closure is off by ~e^{-r_max}; the asymptotic closure is not
    let solve = |r_max, n| {
        solve_profile_with(ProfileConfig { r_max, n, tol: 1e-10, far_field: FarField::Asymptotic, ..Default::default() }).unwrap()
    };
    let (p, q) = (solve(12.0, 2000), solve(16.0, 2667));
    let mut gap = 0.0f64;
    for k in 0..=200 {
        let r = k as f64 * 0.05;
        gap = gap.max((p.eval(r).unwrap().0 - q.eval(r).unwrap().0).abs());
        gap = gap.max((p.eval(r).unwrap().1 - q.eval(r).unwrap().1).abs());
    }
    assert!(gap < 1e-6, "gap {gap}");
}

#[test]
fn invalid_inputs() {
    assert!(matches!(solve_profile(8.0, 2000, 1e-8), Err(Error::InvalidGrid(_))));
    assert!(matches!(solve_profile(12.0, 100, 1e-8), Err(Error::InvalidGrid(_))));
    assert!(matches!(solve_profile(12.0, 2000, 0.0), Err(Error::InvalidGrid(_))));
    assert!(matches!(solve_profile(12.0, 2000, 1e-30), Err(Error::NonConvergence(_))));
    let cfg = ProfileConfig { max_iter: 1, ..Default::default() };
    assert!(matches!(solve_profile_with(cfg), Err(Error::NonConvergence(_))));
}

#[test]
fn csv_and_report() {
    let p = base();
    let mut buf = Vec::new();
    p.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("r,f,a,df,da\n"));
    assert_eq!(text.lines().count(), p.len() + 1);
    let rep = serde_json::to_value(p.report()).unwrap();
    for key in ["r_max", "n", "tol", "residual_sup", "decay_rate_f", "decay_rate_a"] {
        assert!(rep.get(key).is_some(), "{key}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jet_matches_eval(r in 0.0f64..12.0) {
        let p = base();
        let (f, a, df, da) = p.eval(r).unwrap();
        let j = p.jet(r);
        prop_assert!((j.f - f).abs() < 1e-8 && (j.a - a).abs() < 1e-8);
        prop_assert!((j.df - df).abs() < 1e-6 && (j.da - da).abs() < 1e-6);
    }

    #[test]
    fn interpolant_stays_in_unit_interval(r in 0.0f64..12.0) {
        let (f, a, _, _) = base().eval(r).unwrap();
        prop_assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&a));
    }
}
