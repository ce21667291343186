use glvortex::fermi::{CatenoidLogShift, FermiFrame, ShiftField, ZeroShift};
use glvortex::fields::*;
use glvortex::linop::{nabla_first, solve_lambda, LambdaTerms};
use glvortex::profile::{solve_profile, RadialProfile};
use glvortex::surface::{catenoid_chart, plane_chart, SurfaceChart};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

fn profile() -> Arc<RadialProfile> {
    static P: OnceLock<Arc<RadialProfile>> = OnceLock::new();
    P.get_or_init(|| Arc::new(solve_profile(24.0, 12001, 1e-9).unwrap())).clone()
}

fn lambda() -> Arc<LambdaTerms> {
    static L: OnceLock<Arc<LambdaTerms>> = OnceLock::new();
    L.get_or_init(|| Arc::new(solve_lambda(&profile(), 14.0, 200, 16).unwrap())).clone()
}

fn catenoid() -> Arc<dyn SurfaceChart<f64>> {
    Arc::new(catenoid_chart(6.0, 121, 64).unwrap())
}

fn frame(eps: f64, delta: f64, shifted: bool) -> FermiFrame<f64> {
    let shift: Arc<dyn ShiftField<f64>> = if shifted { Arc::new(CatenoidLogShift { scale: 1.0 }) } else { Arc::new(ZeroShift) };
    FermiFrame::with_shift(catenoid(), eps, shift, delta).unwrap()
}

fn magnitude(s: &ResidualSample) -> f64 {
    s.scalar_residual.norm().max(s.form_residual.iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[test]
fn w0_real_on_positive_axis() {
    let fr = frame(0.1, 1.0, false);
    let w0 = build_w0(profile(), fr.clone());
    for rho in [0.3, 1.0, 2.5] {
        let v = w0.eval(fr.fermi_map([0.4, 1.0], [rho, 0.0]).unwrap()).unwrap();
        assert!(v.u.im.abs() < 1e-10, "{:?}", v.u);
        let (f, ..) = profile().eval(rho).unwrap();
        assert!((v.u.re - f).abs() < 1e-8);
        assert!(v.u.re > 0.0);
    }
}

#[test]
fn w0_far_field_is_winding_phase_and_dtheta() {
    let fr = frame(0.02, 1.0, false);
    let w0 = build_w0(profile(), fr.clone());
    let xi = [0.3, 2.0];
    let nu = fr.chart.normal(xi);
    for ang in [0.2f64, 1.9, 4.0] {
        let t = [12.0 * ang.cos(), 12.0 * ang.sin()];
        let v = w0.eval(fr.fermi_map(xi, t).unwrap()).unwrap();
        assert!(1.0 - v.u.norm() < 1e-3);
        let phase = v.u / v.u.norm();
        assert!((phase - Complex64::new(ang.cos(), ang.sin())).norm() < 1e-9);
        let r2 = 144.0;
        let expect = [-t[1] * nu[0] / r2, -t[1] * nu[1] / r2, -t[1] * nu[2] / r2, t[0] / r2];
        for k in 0..4 {
            assert!((v.a[k] - expect[k]).abs() < 1e-4 / 12.0, "{k}: {} vs {}", v.a[k], expect[k]);
        }
    }
}

#[test]
fn w0_zero_sits_on_the_shifted_core() {
    let fr = frame(0.1, 1.0, true);
    let w0 = build_w0(profile(), fr.clone());
    for xi in [[0.0, 0.0], [0.8, 1.0]] {
        let h = fr.shift.value(xi);
        // scan the normal line in the unshifted coordinate z = t + h
        let cell = 0.01;
        let mut best = (f64::INFINITY, 0.0);
        for k in -300..=300 {
            let z = k as f64 * cell;
            let x = fr.map_unchecked(xi, [z - h[0], -h[1]]);
            let m = w0.eval(x).unwrap().u.norm();
            if m < best.0 {
                best = (m, z);
            }
        }
        assert!((best.1 - h[0]).abs() <= cell, "zero at z = {} vs h = {}", best.1, h[0]);
    }
}

#[test]
fn w0_residual_vanishes_on_a_flat_sheet() {
    let chart: Arc<dyn SurfaceChart<f64>> = Arc::new(plane_chart(20.0, 41).unwrap());
    let fr = FermiFrame::with_shift(chart, 1.0, Arc::new(ZeroShift), 3.0).unwrap();
    let w0 = build_w0(profile(), fr.clone());
    let opts = ResidualOptions { step: 1e-3, richardson: false, weight: Weight::default() };
    for t in [[0.5, 0.2], [1.5, -1.0], [-2.0, 2.5]] {
        let x = fr.fermi_map([1.0, -2.0], t).unwrap();
        let s = gl_residual(&w0, &fr, x, 1.0, &opts).unwrap();
        assert!(magnitude(&s) < 1e-5, "{t:?}: {}", magnitude(&s));
    }
}

#[test]
fn w0_core_residual_has_no_first_order_term() {
    let mut sup = Vec::new();
    for eps in [0.1, 0.05] {
        let fr = frame(eps, 1.0, false);
        let w0 = build_w0(profile(), fr.clone());
        let opts = ResidualOptions::for_eps(eps);
        let mut m = 0.0f64;
        for t in [[0.5, 0.0], [0.0, 0.7], [-0.4, -0.4]] {
            let (a, _) = gl_residual_both(&w0, &fr, [0.3, 0.5], t, 1.0, &opts).unwrap();
            m = m.max(magnitude(&a));
        }
        sup.push(m);
    }
    let ratio = sup[0] / sup[1];
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
}

#[test]
fn ambient_and_fermi_routes_agree_at_second_order() {
    let fr = frame(0.1, 1.0, true);
    let w1 = build_w1(profile(), fr.clone(), lambda());
    for (xi, t) in [([0.4, 0.3], [0.8, -0.5]), ([-1.0, 2.0], [-0.3, 1.1])] {
        let mut gaps = Vec::new();
        for step in [2e-3, 1e-3] {
            let opts = ResidualOptions { step, richardson: false, weight: Weight::default() };
            let (a, f) = gl_residual_both(&w1, &fr, xi, t, 1.0, &opts).unwrap();
            let g = (a.scalar_residual - f.scalar_residual)
                .norm()
                .max((0..4).fold(0.0f64, |m, k| m.max((a.form_residual[k] - f.form_residual[k]).abs())));
            gaps.push(g);
        }
        assert!(gaps[1] < 1e-6);
        assert!(gaps[0] / gaps[1] > 3.0, "{gaps:?}");
    }
}

#[test]
fn projection_on_the_kernel_is_third_order() {
    // ∫ S(W₁)·𝖵_α dt at a fixed chart point, h solving the Jacobi equation
    let p = profile();
    let mut proj = Vec::new();
    for eps in [0.1, 0.05] {
        let fr = frame(eps, 1.0, true);
        let w1 = build_w1(p.clone(), fr.clone(), lambda());
        let opts = ResidualOptions::for_eps(eps);
        let xi = [0.3, 0.5];
        let (nr, nt, rmax) = (24, 24, 6.0);
        let mut acc = [0.0f64; 2];
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * rmax / nr as f64;
            for j in 0..nt {
                let th = 2.0 * PI * j as f64 / nt as f64;
                let t = [rho * th.cos(), rho * th.sin()];
                let (a, _) = gl_residual_both(&w1, &fr, xi, t, 1.0, &opts).unwrap();
                let jac = fr.jacobian(xi, t);
                let sq: [f64; 4] = std::array::from_fn(|c| (0..4).map(|r| jac[c][r] * a.form_residual[r]).sum());
                let s4 = [a.scalar_residual.re, a.scalar_residual.im, sq[2], sq[3]];
                let w = rho * (rmax / nr as f64) * (2.0 * PI / nt as f64);
                for (al, acc) in acc.iter_mut().enumerate() {
                    let v = nabla_first(&p, al, t);
                    *acc += w * (0..4).map(|c| s4[c] * v[c]).sum::<f64>();
                }
            }
        }
        proj.push(acc[0].abs().max(acc[1].abs()));
    }
    let ratio = proj[0] / proj[1];
    assert!(ratio > 5.0, "projection ratio {ratio} ({proj:?})");
}

fn glue_setup(eps: f64) -> (FermiFrame<f64>, Glued, Arc<PureGauge>) {
    let fr = frame(eps, 0.2, false);
    let mut w1 = build_w1(profile(), fr.clone(), lambda());
    w1.tube_limited = false;
    let w1: Arc<dyn FieldPair> = Arc::new(w1);
    let psi = Arc::new(PureGauge::new(fr.clone()));
    (fr.clone(), glue(w1, psi.clone(), fr), psi)
}

/// Points X(ξ, t) with t¹ chosen so that ζ_δ takes the value `target` region.
fn collar_points(fr: &FermiFrame<f64>, g: &Glued, inside: bool) -> Vec<glvortex::fermi::Vec4<f64>> {
    let mut out = Vec::new();
    for xi in [[0.0, 0.3], [0.5, 2.0], [-0.7, 4.0]] {
        let r = fr.chart.radius(xi);
        let rho = fr.delta / fr.eps + 4.0 * (1.0 + r).ln();
        for (k, frac) in [0.15, 0.5, 0.85].iter().enumerate() {
            let w = rho + g.radius_offset + 1.0 + frac;
            let ang: f64 = 0.4 + k as f64;
            let t = if inside { [w * ang.cos(), w * ang.sin()] } else { [w + 3.0, 0.5] };
            out.push(fr.map_unchecked(xi, t));
        }
    }
    out
}

#[test]
fn pure_gauge_is_unimodular_with_zero_residual() {
    let (fr, _, psi) = glue_setup(0.05);
    let opts = ResidualOptions::for_eps(0.05);
    let mut pts = Vec::new();
    for xi in [[0.0, 0.3], [1.0, 1.0]] {
        for t in [[3.0, 1.0], [-9.0, 2.0], [12.0, -4.0]] {
            pts.push(fr.map_unchecked(xi, t));
        }
    }
    pts.push([40.0, 10.0, 5.0, 2.0]);
    pts.push([-3.0, 60.0, -20.0, -1.0]);
    for x in pts {
        let v = psi.eval(x).unwrap();
        assert!((v.u.norm() - 1.0).abs() < 1e-14);
        let s = gl_residual_ambient(psi.as_ref(), x, 1.0, opts.step, false).unwrap();
        let m = s.0.norm().max(s.1.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(m < 1e-6, "{x:?}: {m}");
    }
}

#[test]
fn pure_gauge_branch_locus_is_reported() {
    let (fr, _, psi) = glue_setup(0.05);
    let x = fr.map_unchecked([0.2, 0.2], [0.0, 0.0]);
    assert!(matches!(psi.eval(x), Err(glvortex::Error::OnBranchLocus)));
}

#[test]
fn pure_gauge_matches_the_normal_phase_on_the_collar() {
    let (fr, g, psi) = glue_setup(0.05);
    for x in collar_points(&fr, &g, true) {
        let z = g.zeta(x);
        assert!(z > 0.0 && z < 1.0, "zeta {z}");
        let (xi, t) = fr.fermi_invert_focal(x).unwrap();
        let v = psi.eval(x).unwrap();
        let r2 = t[0] * t[0] + t[1] * t[1];
        let phase = Complex64::new(t[0], t[1]) / r2.sqrt();
        assert!((v.u - phase).norm() < 1e-10);
        // dθ in ambient components: J^{-T} (0, 0, −t²/|t|², t¹/|t|²)
        let j = fr.jacobian(xi, t);
        let jt: [[f64; 4]; 4] = std::array::from_fn(|c| std::array::from_fn(|r| j[c][r]));
        let inv = glvortex::fermi::inv4(jt).unwrap();
        let aq = [0.0, 0.0, -t[1] / r2, t[0] / r2];
        for r in 0..4 {
            let e: f64 = (0..4).map(|c| inv[r][c] * aq[c]).sum();
            assert!((v.a[r] - e).abs() < 1e-10, "{r}: {} vs {e}", v.a[r]);
        }
    }
}

#[test]
fn glue_returns_the_pieces_exactly_away_from_the_collar() {
    let (fr, g, psi) = glue_setup(0.05);
    let inner: &dyn FieldPair = g.inner.as_ref();
    let x = fr.fermi_map([0.2, 1.0], [1.0, 0.5]).unwrap();
    assert_eq!(g.zeta(x), 1.0);
    assert_eq!(g.eval(x).unwrap(), inner.eval(x).unwrap());
    for x in collar_points(&fr, &g, false) {
        assert_eq!(g.zeta(x), 0.0);
        assert_eq!(g.eval(x).unwrap(), psi.eval(x).unwrap());
    }
    let far = [100.0, -40.0, 30.0, 7.0];
    assert_eq!(g.eval(far).unwrap(), psi.eval(far).unwrap());
    assert_eq!(g.provenance(), Provenance::Glued);
}

#[test]
fn collar_residual_decays_exponentially_in_one_over_eps() {
    let sigma = Weight::default().sigma;
    let mut sups = Vec::new();
    for eps in [0.05, 0.025] {
        let (fr, g, _) = glue_setup(eps);
        let opts = ResidualOptions::for_eps(eps);
        let mut m = 0.0f64;
        for x in collar_points(&fr, &g, true) {
            let s = gl_residual_ambient(&g, x, 1.0, opts.step, false).unwrap();
            m = m.max(s.0.norm().max(s.1.iter().map(|v| v * v).sum::<f64>().sqrt()));
        }
        sups.push(m);
    }
    let bound = (-sigma * 0.2 / 0.05f64).exp();
    assert!(sups[1] / sups[0] < bound, "{sups:?} vs factor {bound}");
}

#[test]
fn energy_density_trivial_cases() {
    let zero = FnField { f: |_x: [f64; 4]| FieldValue { u: Complex64::new(0.0, 0.0), a: [0.0; 4] } };
    assert!((energy_density(&zero, [0.3, 1.0, -2.0, 0.5], 1.0, 1e-3).unwrap() - 0.125).abs() < 1e-14);
    let (fr, _, psi) = glue_setup(0.05);
    let x = fr.map_unchecked([0.1, 0.1], [5.0, 2.0]);
    assert!(energy_density(psi.as_ref(), x, 1.0, 1e-3).unwrap() < 1e-6);
}

#[test]
fn vortex_energy_per_unit_area_is_pi_along_the_sheet() {
    let fr = frame(0.01, 1.0, false);
    let w0 = build_w0(profile(), fr.clone());
    for xi in [[0.0, 0.0], [1.0, 2.0]] {
        let (nr, nt, rmax) = (60, 16, 10.0);
        let mut e = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * rmax / nr as f64;
            for j in 0..nt {
                let th = 2.0 * PI * (j as f64 + 0.25) / nt as f64;
                let x = fr.map_unchecked(xi, [rho * th.cos(), rho * th.sin()]);
                e += energy_density(&w0, x, 1.0, 1e-3).unwrap() * rho * (rmax / nr as f64) * (2.0 * PI / nt as f64);
            }
        }
        assert!((e - PI).abs() < 0.01 * PI, "energy {e} at {xi:?}");
    }
}

#[test]
fn gauge_identity_and_fixed_quadratic() {
    let fr = frame(0.1, 1.0, false);
    let base: Arc<dyn FieldPair> = Arc::new(build_w0(profile(), fr.clone()));
    let x = fr.fermi_map([0.2, 0.9], [0.7, -0.3]).unwrap();
    let id = gauge_transform(base.clone(), Arc::new(QuadraticGauge { c: 0.0, b: [0.0; 4], m: [[0.0; 4]; 4], center: [0.0; 4] }));
    assert_eq!(id.eval(x).unwrap(), base.eval(x).unwrap());
    let mut m = [[0.0; 4]; 4];
    m[0][1] = 0.3;
    m[1][0] = 0.3;
    let g = gauge_transform(base.clone(), Arc::new(QuadraticGauge { c: 0.0, b: [0.0; 4], m, center: [0.0; 4] }));
    let e0 = energy_density(base.as_ref(), x, 1.0, 1e-3).unwrap();
    let e1 = energy_density(&g, x, 1.0, 1e-3).unwrap();
    assert!((e1 - e0).abs() < 1e-10 * e0.max(1.0));
}

#[test]
fn stencil_outside_domain_is_reported() {
    let fr = frame(0.1, 0.2, false);
    let w0 = build_w0(profile(), fr.clone());
    let tau = fr.tau([0.0, 0.0]) / fr.eps;
    let x = fr.fermi_map([0.0, 0.0], [tau - 1e-4, 0.0]).unwrap();
    let r = gl_residual_ambient(&w0, x, 1.0, 1e-3, false);
    assert!(matches!(r, Err(glvortex::Error::StencilOutsideDomain(_))), "{r:?}");
}

#[test]
fn scaling_study_rejects_bad_eps_lists() {
    let ss = SampleSet::standard([0.0; 4], 1.0);
    let make = |e: f64| -> glvortex::Result<(Arc<dyn FieldPair>, FermiFrame<f64>)> {
        let fr = frame(e, 1.0, false);
        Ok((Arc::new(build_w0(profile(), fr.clone())), fr))
    };
    assert!(residual_scaling_study(&[0.1, 0.2, 0.05], &ss, Weight::default(), make).is_err());
    assert!(residual_scaling_study(&[0.2, 0.1], &ss, Weight::default(), make).is_err());
}

#[test]
fn sample_set_layout() {
    let ss = SampleSet::standard([-1.0, 0.0, 0.5, 1.0], 2.0);
    assert_eq!(ss.points().len(), 16 * 24 * 12);
    assert!(ss.radii.iter().all(|&r| r > 0.0 && r <= 2.0));
}

#[test]
fn weighted_magnitude_formula() {
    let fr = frame(0.1, 1.0, false);
    let w0 = build_w0(profile(), fr.clone());
    let opts = ResidualOptions::for_eps(0.1);
    let (xi, t) = ([0.5, 0.5], [0.6, 0.8]);
    let (a, _) = gl_residual_both(&w0, &fr, xi, t, 1.0, &opts).unwrap();
    let w = Weight::default();
    let expect = fr.chart.radius(xi).powf(w.mu) * (w.sigma * 1.0f64).exp() * magnitude(&a);
    assert!((a.weighted_magnitude - expect).abs() < 1e-12 * expect);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_is_monotone_and_bounded(s in -1.0f64..4.0, d in 0.0f64..1.0) {
        let (a, b) = (cutoff(s), cutoff(s + d));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
        let h = 1e-6;
        let fd = (cutoff(s + h) - cutoff(s - h)) / (2.0 * h);
        prop_assert!((fd - cutoff_derivative(s)).abs() < 1e-6);
    }

    #[test]
    fn energy_is_gauge_invariant(c in -3.0f64..3.0, b in prop::array::uniform4(-1.0f64..1.0),
                                 m in prop::array::uniform4(-0.5f64..0.5), s in -1.0f64..1.0, r in 0.1f64..1.4) {
        let fr = frame(0.1, 1.0, false);
        let base: Arc<dyn FieldPair> = Arc::new(build_w0(profile(), fr.clone()));
        let x = fr.fermi_map([s, 1.0], [r, 0.3]).unwrap();
        let mm = [[m[0], m[1], 0.0, 0.0], [m[1], m[2], m[3], 0.0], [0.0, m[3], 0.0, 0.0], [0.0, 0.0, 0.0, 0.1]];
        let g = gauge_transform(base.clone(), Arc::new(QuadraticGauge { c, b, m: mm, center: x }));
        let e0 = energy_density(base.as_ref(), x, 1.0, 1e-3).unwrap();
        let e1 = energy_density(&g, x, 1.0, 1e-3).unwrap();
        prop_assert!((e1 - e0).abs() < 1e-9 * e0);
    }
}
