use glvortex::fermi::*;
use glvortex::surface::*;
use glvortex::verify::fermi_metric_defect;
use glvortex::Error;
use proptest::prelude::*;
use std::sync::Arc;

fn chart(n_s: usize, n_t: usize) -> Arc<dyn SurfaceChart<f64>> {
    Arc::new(catenoid_chart(6.0, n_s, n_t).unwrap())
}

fn unit() -> FermiFrame<f64> {
    FermiFrame::new(chart(61, 16), 1.0).unwrap()
}

#[test]
fn map_at_the_surface_and_along_e4() {
    let f = FermiFrame::new(chart(61, 16), 0.1).unwrap();
    let x = f.fermi_map([0.5, 1.0], [0.0, 0.0]).unwrap();
    let y = f.chart.position([0.5, 1.0]);
    for k in 0..3 {
        assert!((x[k] - y[k] / 0.1).abs() < 1e-12);
    }
    assert_eq!(x[3], 0.0);
    let p = unit().fermi_point([0.0, 0.0], [0.0, 0.37]);
    assert_eq!(p, [1.0, 0.0, 0.0, 0.37]);
}

#[test]
fn map_rejects_points_outside_the_tube() {
    let f = FermiFrame::new(chart(61, 16), 0.1).unwrap();
    let tau = f.tau([0.0, 0.0]) / 0.1;
    assert!(f.fermi_map([0.0, 0.0], [0.99 * tau, 0.0]).is_ok());
    assert!(matches!(f.fermi_map([0.0, 0.0], [0.0, 1.01 * tau]), Err(Error::OutsideTube(_))));
    let far = f.map_unchecked([0.0, 0.0], [1.5 * tau, 0.0]);
    assert!(f.fermi_invert(far).is_err());
    // inside the focal radius the extended inversion still succeeds
    let (xi, t) = f.fermi_invert_focal(far).unwrap();
    assert!(xi[0].abs() < 1e-9 && (t[0] - 1.5 * tau).abs() < 1e-8);
}

#[test]
fn focal_inversion_stops_at_the_focal_distance() {
    let f = FermiFrame::new(chart(61, 16), 0.1).unwrap();
    // waist focal radius 1/κ = 1, i.e. 10 in stretched units, on the axis side
    let x = f.map_unchecked([0.0, 0.3], [10.5, 0.0]);
    assert!(f.fermi_invert_focal(x).is_err());
}

#[test]
fn metric_examples() {
    let f = unit();
    let g0 = f.chart.metric([0.8, 2.0]);
    assert_eq!(f.metric_gz([0.8, 2.0], [0.0, 0.0]).unwrap(), g0);
    for z in [0.1, -0.3, 0.6] {
        let g = f.metric_gz([0.0, 1.0], [z, 0.0]).unwrap();
        assert!((g[0][0] - (1.0 - z) * (1.0 - z)).abs() < 1e-14);
        assert!((g[1][1] - (1.0 + z) * (1.0 + z)).abs() < 1e-14);
        assert!(g[0][1].abs() < 1e-14);
    }
    assert!(matches!(f.metric_gz([0.0, 1.0], [1.0, 0.0]), Err(Error::SingularTube(_))));
    let full = f.metric_full([0.4, 0.2], [0.1, 0.2]).unwrap();
    assert_eq!((full[2][2], full[3][3], full[0][2], full[1][3]), (1.0, 1.0, 0.0, 0.0));
}

#[test]
fn mean_curvature_examples() {
    let f = unit();
    for beta in 0..2 {
        assert!(f.mean_curvature_normal([0.7, 0.3], [0.0, 0.0], beta).unwrap().exact.abs() < 1e-12);
    }
    assert_eq!(f.mean_curvature_normal([0.7, 0.3], [0.2, 0.1], 1).unwrap().exact, 0.0);
    for z in [0.05, 0.2] {
        let h = f.mean_curvature_normal([0.0, 0.0], [z, 0.0], 0).unwrap();
        assert!((h.exact - 2.0 * z / (1.0 - z * z)).abs() < 1e-12);
        assert!((h.quadratic - 2.0 * z).abs() < 1e-12);
    }
    assert!(matches!(f.mean_curvature_normal([0.0, 0.0], [1.0, 0.0], 0), Err(Error::SingularTube(_))));
}

#[test]
fn moments() {
    let f = unit();
    for s in [0.0f64, 0.6, -1.7] {
        let cd = f.curvature_moments([s, 0.5]);
        assert!(cd.h_mn[1][0].abs() < 1e-12);
        assert!((cd.h_mn[2][0] - 2.0 / s.cosh().powi(4)).abs() < 1e-12);
        assert!((cd.h_mn[2][0] - f.chart.second_fundamental_norm([s, 0.5])).abs() < 1e-12);
        for m in 0..4 {
            for n in 1..4 - m {
                assert_eq!(cd.h_mn[m][n], 0.0);
            }
        }
        assert_eq!(cd.k[0][1], 0.0);
        assert_eq!(cd.k[1][1], 0.0);
    }
    let ns = f.expansion_sample([0.0, 0.0], [0.1, 0.0]).unwrap();
    let v = serde_json::to_value(&ns).unwrap();
    for key in ["xi", "z", "H_exact", "H_quadratic", "remainder"] {
        assert!(v.get(key).is_some());
    }
}

#[test]
fn expansion_remainder_is_cubic() {
    let f = unit();
    for (xi, dir) in [([0.0, 0.0], [1.0, 0.0]), ([0.5, 1.0], [0.6, 0.8]), ([-1.0, 3.0], [-0.8, 0.6])] {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&s| {
                let r = f.expansion_sample(xi, [s * dir[0], s * dir[1]]).unwrap().remainder;
                (s.ln(), r[0].abs().max(r[1].abs()).ln())
            })
            .collect();
        let slope = glvortex::profile::least_squares_slope(&pts);
        assert!((slope - 3.0).abs() < 0.3, "{xi:?}: {slope}");
    }
}

#[test]
fn fd_metric_matches_closed_form() {
    let f = unit();
    for (xi, z) in [([0.3, 0.4], [0.2, -0.1]), ([-1.0, 2.0], [-0.15, 0.3])] {
        let e1 = fermi_metric_defect(&f, xi, z, 2e-3).unwrap();
        let e2 = fermi_metric_defect(&f, xi, z, 1e-3).unwrap();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.2, "{order}");
    }
}

#[test]
fn log_determinant_gives_mean_curvature() {
    let f = unit();
    let (xi, z) = ([0.4, 1.1], [0.2, 0.1]);
    let ld = |z: [f64; 2]| 0.5 * det2(f.metric_gz(xi, z).unwrap()).ln();
    for beta in 0..2 {
        let exact = f.mean_curvature_normal(xi, z, beta).unwrap().exact;
        let err = |h: f64| {
            let (mut a, mut b) = (z, z);
            a[beta] += h;
            b[beta] -= h;
            (-(ld(a) - ld(b)) / (2.0 * h) - exact).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        assert!(e2 < 1e-4);
        if beta == 0 {
            assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
        }
    }
}

#[test]
fn codim2_jacobi_operator() {
    let r: Vec<f64> = [(61, 16), (121, 32)]
        .iter()
        .map(|&(n, m)| {
            let f = FermiFrame::new(chart(n, m), 1.0).unwrap();
            let g = f.grid();
            let phi: Vec<[f64; 2]> = (0..g.len()).map(|k| [f.chart.jacobi_fields(g.node(k / m, k % m))[3], 0.0]).collect();
            f.jacobi_operator_codim2(&phi).iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max)
        })
        .collect();
    assert!(r[0] / r[1] > 3.5, "{r:?}");
    let f = unit();
    let g = f.grid();
    let zero = f.jacobi_operator_codim2(&vec![[0.0, 1.0]; g.len()]);
    assert!(zero.iter().all(|v| v[0].abs() < 1e-12 && v[1].abs() < 1e-12));
    let pot = f.jacobi_operator_codim2(&vec![[1.0, 0.0]; g.len()]);
    for i in 1..g.n[0] - 1 {
        let s = g.coord(0, i);
        let v = pot[g.index(i, 3)];
        assert!((v[0] - 2.0 / s.cosh().powi(4)).abs() < 1e-12 && v[1] == 0.0);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let f = FermiFrame::with_shift(chart(61, 16), 0.2, Arc::new(CatenoidLogShift { scale: 1.0 }), 1.0).unwrap();
    let (xi, t) = ([0.3, 0.7], [0.4, -0.2]);
    let j = f.jacobian(xi, t);
    let h = 1e-6;
    for q in 0..4 {
        let (mut a, mut b) = ((xi, t), (xi, t));
        if q < 2 {
            a.0[q] += h;
            b.0[q] -= h;
        } else {
            a.1[q - 2] += h;
            b.1[q - 2] -= h;
        }
        let (pa, pb) = (f.map_unchecked(a.0, a.1), f.map_unchecked(b.0, b.1));
        for r in 0..4 {
            assert!(((pa[r] - pb[r]) / (2.0 * h) - j[q][r]).abs() < 1e-6);
        }
    }
}

#[test]
fn invalid_frames() {
    assert!(FermiFrame::new(chart(61, 16), 0.0).is_err());
    assert!(FermiFrame::with_shift(chart(61, 16), 0.1, Arc::new(ZeroShift), -1.0).is_err());
}

#[test]
fn single_precision_frame() {
    let c: Arc<dyn SurfaceChart<f32>> = Arc::new(catenoid_chart(6.0f32, 61, 16).unwrap());
    let f: glvortex::FermiFrame32 = FermiFrame::new(c, 0.5).unwrap();
    let x = f.fermi_map([0.2, 1.0], [0.1, 0.05]).unwrap();
    let (xi, t) = f.fermi_invert(x).unwrap();
    assert!((xi[0] - 0.2).abs() < 1e-4 && (t[0] - 0.1).abs() < 1e-4 && (t[1] - 0.05).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip(s in -4.0f64..4.0, th in 0.0f64..std::f64::consts::TAU, r in 0.0f64..0.3, a in 0.0f64..std::f64::consts::TAU, eps in 0.05f64..0.5) {
        let f = FermiFrame::with_shift(chart(61, 16), eps, Arc::new(CatenoidLogShift { scale: 1.0 }), 0.2).unwrap();
        let xi = [s, th];
        let h = f.shift.value(xi);
        let rad = r * f.tau(xi) / eps;
        let t = [rad * a.cos() - h[0], rad * a.sin() - h[1]];
        let x = f.fermi_map(xi, t).unwrap();
        let (xi2, t2) = f.fermi_invert(x).unwrap();
        let dth = (xi2[1] - xi[1]).rem_euclid(std::f64::consts::TAU);
        let dth = dth.min(std::f64::consts::TAU - dth);
        prop_assert!((xi2[0] - xi[0]).abs() < 1e-8 && dth < 1e-8);
        prop_assert!((t2[0] - t[0]).abs() < 1e-8 && (t2[1] - t[1]).abs() < 1e-8);
    }
}
