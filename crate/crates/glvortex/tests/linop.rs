use glvortex::linop::*;
use glvortex::profile::{solve_profile, RadialProfile};
use glvortex::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn profile() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| solve_profile(14.0, 4001, 1e-9).unwrap())
}

fn system() -> &'static LinearizedSystem {
    static S: OnceLock<LinearizedSystem> = OnceLock::new();
    S.get_or_init(|| assemble_l(profile(), 12.0, 200, 16).unwrap())
}

fn ring_sup(sys: &LinearizedSystem, v: &[f64], i: usize) -> f64 {
    let g = sys.grid;
    (0..g.n_theta).flat_map(|j| (0..FIELDS).map(move |c| v[g.index(i, j, c)].abs())).fold(0.0, f64::max)
}

fn ring_at(sys: &LinearizedSystem, rho: f64) -> usize {
    (0..sys.grid.n_rho).min_by(|&a, &b| (sys.grid.rho(a) - rho).abs().partial_cmp(&(sys.grid.rho(b) - rho).abs()).unwrap()).unwrap()
}

fn orthogonalize(sys: &LinearizedSystem, v: &mut [f64]) {
    // Gram-Schmidt against the two (mutually orthogonal up to roundoff) kernel samples
    for _ in 0..2 {
        for k in &sys.kernel {
            let c = sys.inner(v, k) / sys.inner(k, k);
            v.iter_mut().zip(k).for_each(|(x, y)| *x -= c * y);
        }
    }
}

#[test]
fn weighted_operator_is_symmetric() {
    // the mass-weighted discretization is symmetric up to roundoff, not just O(h²)
    for n in [50, 100, 200] {
        let d = assemble_l(profile(), 12.0, n, 16).unwrap().symmetry_defect();
        assert!(d < 1e-14, "{n}: {d}");
    }
}

#[test]
fn kernel_residual_is_second_order() {
    let r: Vec<f64> = [100, 200, 400].iter().map(|&n| assemble_l(profile(), 12.0, n, 16).unwrap().kernel_residual(0, 1.0)).collect();
    for w in r.windows(2) {
        let q = w[0] / w[1];
        assert!((3.2..4.8).contains(&q), "{r:?}");
    }
}

#[test]
fn finite_difference_theta_scheme_converges() {
    let r: Vec<f64> = [(100, 16), (200, 32)]
        .iter()
        .map(|&(n, m)| assemble_l_with(profile(), 12.0, n, m, ThetaScheme::FiniteDifference).unwrap().kernel_residual(1, 1.0))
        .collect();
    assert!(r[0] / r[1] > 3.2, "{r:?}");
}

#[test]
fn far_field_blocks_approach_helmholtz() {
    let sys = assemble_l(profile(), 12.0, 160, 64).unwrap();
    let (c, w) = ([7.0, 0.0], 1.5);
    let bump = |t: [f64; 2]| (-((t[0] - c[0]).powi(2) + (t[1] - c[1]).powi(2)) / (w * w)).exp();
    let lap = |t: [f64; 2]| {
        let d2 = (t[0] - c[0]).powi(2) + (t[1] - c[1]).powi(2);
        bump(t) * (4.0 * d2 / w.powi(4) - 4.0 / (w * w))
    };
    let x = sys.grid.sample(|t| [0.0, 0.0, bump(t), 0.0]);
    let expect = sys.grid.sample(|t| [0.0, 0.0, -lap(t) + bump(t), 0.0]);
    let lx = sys.apply(&x);
    let g = sys.grid;
    let mut gap = 0.0f64;
    for i in 0..g.n_rho {
        if !(6.0..=8.0).contains(&g.rho(i)) {
            continue;
        }
        for j in 0..g.n_theta {
            let k = g.index(i, j, 2);
            gap = gap.max((lx[k] - expect[k]).abs());
        }
    }
    assert!(gap < 1e-2, "gap {gap}");
}

#[test]
fn coercivity_and_scalar_block() {
    let c10 = assemble_l(profile(), 10.0, 200, 16).unwrap().coercivity_constant().unwrap();
    let c12 = system().coercivity_constant().unwrap();
    assert!(c10 > 0.0 && c12 > 0.0);
    assert!((c10 - c12).abs() < 0.05 * c12, "{c10} {c12}");
    assert!(scalar_block_coercivity(profile(), 12.0, 100, 16).unwrap() > 0.0);
}

#[test]
fn unconstrained_spectrum_has_two_kernel_modes() {
    let sys = system();
    let eig = sys.low_spectrum(6, -0.5, false).unwrap();
    let near: Vec<&Eigenpair> = eig.iter().filter(|e| e.value.abs() < 0.1).collect();
    assert_eq!(near.len(), 2, "{:?}", eig.iter().map(|e| e.value).collect::<Vec<_>>());
    for e in &near {
        assert!(sys.kernel_alignment(&e.vector) > 0.99);
    }
    assert!(eig[2].value > 0.3);
}

#[test]
fn kernel_right_hand_side_is_absorbed() {
    let sys = system();
    let sol = sys.solve_projected(&sys.kernel[0]).unwrap();
    assert!((sol.multipliers[0] - 1.0).abs() < 1e-8 && sol.multipliers[1].abs() < 1e-8, "{:?}", sol.multipliers);
    assert!(sys.norm(&sol.phi) < 1e-8 * sys.norm(&sys.kernel[0]));
}

#[test]
fn manufactured_solution_is_recovered() {
    let sys = system();
    let mut phi = sys.grid.sample(|t| {
        let r2 = t[0] * t[0] + t[1] * t[1];
        let e = (-r2 / 4.0).exp();
        [e * (1.0 + t[0]), e * t[1] * 0.5, e * t[0] * t[1] * 0.3, -e * 0.2]
    });
    orthogonalize(sys, &mut phi);
    let rhs = sys.apply(&phi);
    let sol = sys.solve_projected(&rhs).unwrap();
    let err: Vec<f64> = sol.phi.iter().zip(&phi).map(|(a, b)| a - b).collect();
    assert!(sys.norm(&err) < 1e-8 * sys.norm(&phi));
    assert!(sol.multipliers.iter().all(|m| m.abs() < 1e-8));
    assert!(sol.orthogonality_defects.iter().all(|d| d.abs() < 1e-10));
}

#[test]
fn lambda_one_is_orthogonal_and_decays() {
    let sys = system();
    let rhs = sys.grid.sample(|t| nabla_first(profile(), 0, t).map(|x| t[0] * x));
    let sol = sys.solve_projected(&rhs).unwrap();
    assert!(sol.multipliers.iter().all(|m| m.abs() < 1e-6), "{:?}", sol.multipliers);
    let (i4, i10) = (ring_at(sys, 4.0), ring_at(sys, 10.0));
    let (v4, v10) = (ring_sup(sys, &sol.phi, i4), ring_sup(sys, &sol.phi, i10));
    assert!(v10 < (-0.5f64 * 6.0).exp() * v4, "{v10} vs {v4}");
    let lt = solve_lambda(profile(), 12.0, 200, 16).unwrap();
    let t = [1.0, 0.5];
    let c = lt.combine(2.0, 0.0, t);
    let l1 = lt.lambda1.eval(t);
    assert!((0..4).all(|k| (c[k] + 2.0 * l1[k]).abs() < 1e-14));
}

#[test]
fn first_covariant_derivative_closed_form() {
    let p = profile();
    for rho in [0.5, 2.0, 5.0] {
        let (_, _, df, _) = p.eval(rho).unwrap();
        let v = nabla_first(p, 0, [rho, 0.0]);
        let jet = p.jet(rho);
        assert!((v[0] - df).abs() < 1e-6 && v[1].abs() < 1e-12 && v[2].abs() < 1e-12);
        assert!((v[3] - jet.da / rho).abs() < 1e-12);
        let w = nabla_first(p, 1, [rho, 0.0]);
        // 𝖵₂ = (i f′, −(a′/r) dt¹)
        assert!(w[0].abs() < 1e-12 && (w[2] + jet.da / rho).abs() < 1e-12);
    }
    let sys = system();
    assert_eq!(sys.kernel[0], sys.grid.sample(|t| nabla_first(p, 0, t)));
}

#[test]
fn improvement_sources_are_orthogonal_to_the_kernel() {
    let sys = system();
    let p = profile();
    let src1 = sys.grid.sample(|t| nabla_first(p, 0, t).map(|x| t[0] * x));
    let scale = sys.norm(&src1) * sys.norm(&sys.kernel[0]);
    for k in &sys.kernel {
        assert!(sys.inner(&src1, k).abs() < 1e-8 * scale);
    }
    for (b, c) in [(0, 0), (0, 1), (1, 1)] {
        let s = sys.grid.sample(|t| nabla_second(p, b, c, t));
        for k in &sys.kernel {
            assert!(sys.inner(&s, k).abs() < 1e-8 * sys.norm(&s) * sys.norm(k), "({b},{c})");
        }
    }
}

#[test]
fn gauge_orthogonality_defects() {
    let p = profile();
    let zero = vec![0.0; system().grid.unknowns()];
    assert_eq!(system().goc_defect(&zero).1, 0.0);
    let mut kern = Vec::new();
    let mut gauge = Vec::new();
    for n in [100, 200] {
        let sys = assemble_l(p, 12.0, n, 16).unwrap();
        kern.push(sys.goc_defect(&sys.kernel[0]).1);
        let field = sys.grid.sample(|t| {
            let r2 = t[0] * t[0] + t[1] * t[1];
            let r = r2.sqrt();
            let gam = (-r2).exp();
            let f = p.jet(r).f;
            let (s, c) = (t[1].atan2(t[0])).sin_cos();
            [-f * s * gam, f * c * gam, -2.0 * t[0] * gam, -2.0 * t[1] * gam]
        });
        let (d, _) = sys.goc_defect(&field);
        let g = sys.grid;
        let mut err = 0.0f64;
        for i in 0..g.n_rho {
            let r = g.rho(i);
            let gam = (-r * r).exp();
            let expect = -(4.0 * r * r - 4.0) * gam + p.jet(r).f.powi(2) * gam;
            for j in 0..g.n_theta {
                err = err.max((d[g.node(i, j)] - expect).abs());
            }
        }
        gauge.push(err);
    }
    assert!(kern[0] / kern[1] > 3.0, "{kern:?}");
    assert!(gauge[0] / gauge[1] > 3.0 && gauge[1] < 1e-2, "{gauge:?}");
}

#[test]
fn invalid_grids() {
    let p = profile();
    assert!(matches!(assemble_l(p, 20.0, 100, 16), Err(Error::InvalidGrid(_))));
    assert!(matches!(assemble_l(p, 12.0, 16, 16), Err(Error::InvalidGrid(_))));
    assert!(matches!(assemble_l(p, 12.0, 100, 15), Err(Error::InvalidGrid(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_is_self_adjoint(c in prop::array::uniform8(-1.0f64..1.0), x0 in -3.0f64..3.0, y0 in -3.0f64..3.0) {
        let sys = system();
        let bump = |t: [f64; 2], cx: f64, cy: f64| (-((t[0] - cx).powi(2) + (t[1] - cy).powi(2)) / 2.0).exp();
        let a = sys.grid.sample(|t| { let b = bump(t, x0, y0); [c[0] * b, c[1] * b, c[2] * b, c[3] * b] });
        let b = sys.grid.sample(|t| { let b = bump(t, -y0, x0); [c[4] * b, c[5] * b, c[6] * b, c[7] * b] });
        let (la, lb) = (sys.apply(&a), sys.apply(&b));
        let lhs = sys.inner(&la, &b);
        let rhs = sys.inner(&a, &lb);
        let scale = sys.norm(&la) * sys.norm(&b) + sys.norm(&a) * sys.norm(&lb);
        prop_assert!((lhs - rhs).abs() < 1e-3 * scale, "{lhs} {rhs}");
    }
}
