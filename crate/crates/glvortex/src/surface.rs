//! Embedded surfaces in R³ given by a chart ξ ↦ y(ξ), with the normal ν
//! extended to R⁴ as ν₁ and the flat fourth direction ν₂ = e₄.
//!
//! Shape operator convention: ∂ᵢν = -Σₖ 𝒜ᵏᵢ ∂ₖy, stored as `s[k][i]`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::Serialize;
use std::io::Write;

pub type Mat2<T> = [[T; 2]; 2];
pub type Vec3<T> = [T; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Catenoid,
    Cylinder,
    Plane,
    Custom,
}

/// Height function `a log|x'| + b` of one end, and whether ν·e₃ → +1 or -1 there.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EndData<T> {
    pub a: T,
    pub b: T,
    pub orientation: T,
}

/// Tensor grid over the parameter rectangle. Periodic directions omit the
/// right endpoint.
#[derive(Debug, Clone, Copy)]
pub struct ChartGrid<T> {
    pub lo: [T; 2],
    pub hi: [T; 2],
    pub n: [usize; 2],
    pub periodic: [bool; 2],
}

impl<T: Real> ChartGrid<T> {
    pub fn spacing(&self, d: usize) -> T {
        let len = self.hi[d] - self.lo[d];
        if self.periodic[d] {
            len / T::c(self.n[d] as f64)
        } else {
            len / T::c((self.n[d] - 1) as f64)
        }
    }

    pub fn coord(&self, d: usize, i: usize) -> T {
        self.lo[d] + self.spacing(d) * T::c(i as f64)
    }

    pub fn node(&self, i: usize, j: usize) -> [T; 2] {
        [self.coord(0, i), self.coord(1, j)]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n[1] + j
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Is (i, j) a boundary node of a non-periodic direction?
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        (!self.periodic[0] && (i == 0 || i + 1 == self.n[0])) || (!self.periodic[1] && (j == 0 || j + 1 == self.n[1]))
    }

    /// Trapezoid weights per direction (Simpson in a non-periodic direction
    /// with an odd node count).
    pub fn weights_1d(&self, d: usize) -> Vec<T> {
        let n = self.n[d];
        let h = self.spacing(d);
        if self.periodic[d] {
            return vec![h; n];
        }
        if n % 2 == 1 && n >= 5 {
            (0..n)
                .map(|i| {
                    let w = if i == 0 || i == n - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    h * T::c(w / 3.0)
                })
                .collect()
        } else {
            (0..n).map(|i| if i == 0 || i == n - 1 { h * T::c(0.5) } else { h }).collect()
        }
    }

    pub fn sample<F: Fn([T; 2]) -> T>(&self, f: F) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n[0] {
            for j in 0..self.n[1] {
                out.push(f(self.node(i, j)));
            }
        }
        out
    }
}

fn dot3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn inv2<T: Real>(m: Mat2<T>) -> Mat2<T> {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn mul2<T: Real>(a: Mat2<T>, b: Mat2<T>) -> Mat2<T> {
    let mut c = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

pub fn det2<T: Real>(m: Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub trait SurfaceChart<T: Real>: Send + Sync {
    fn kind(&self) -> ChartKind;
    fn grid(&self) -> ChartGrid<T>;
    fn position(&self, xi: [T; 2]) -> Vec3<T>;
    /// ∂₁y, ∂₂y.
    fn tangents(&self, xi: [T; 2]) -> [Vec3<T>; 2];
    fn normal(&self, xi: [T; 2]) -> Vec3<T>;
    /// ∂₁ν, ∂₂ν.
    fn normal_derivatives(&self, xi: [T; 2]) -> [Vec3<T>; 2];
    /// Implicit function positive on the side ν points to.
    fn side(&self, x: Vec3<T>) -> T;

    fn ends(&self) -> Vec<EndData<T>> {
        Vec::new()
    }

    /// Metric and curvature independent of ξ².
    fn axisymmetric(&self) -> bool {
        false
    }

    /// Starting parameter for the Fermi inversion of a point near the surface.
    fn initial_guess(&self, x: Vec3<T>) -> [T; 2] {
        let g = self.grid();
        let mut best = (T::infinity(), g.node(0, 0));
        for i in 0..g.n[0] {
            for j in 0..g.n[1] {
                let xi = g.node(i, j);
                let p = self.position(xi);
                let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
                if d < best.0 {
                    best = (d, xi);
                }
            }
        }
        best.1
    }

    fn metric(&self, xi: [T; 2]) -> Mat2<T> {
        let t = self.tangents(xi);
        let g01 = dot3(t[0], t[1]);
        [[dot3(t[0], t[0]), g01], [g01, dot3(t[1], t[1])]]
    }

    /// b_ij = -∂ᵢν·∂ⱼy, symmetrized.
    fn second_fundamental_form(&self, xi: [T; 2]) -> Mat2<T> {
        let t = self.tangents(xi);
        let dn = self.normal_derivatives(xi);
        let half = T::c(0.5);
        let b01 = -(dot3(dn[0], t[1]) + dot3(dn[1], t[0])) * half;
        [[-dot3(dn[0], t[0]), b01], [b01, -dot3(dn[1], t[1])]]
    }

    fn shape_operator(&self, xi: [T; 2]) -> Mat2<T> {
        mul2(inv2(self.metric(xi)), self.second_fundamental_form(xi))
    }

    /// Principal curvatures κ₁ ≥ κ₂ with respect to ν₁.
    fn principal_curvatures(&self, xi: [T; 2]) -> [T; 2] {
        let s = self.shape_operator(xi);
        let tr = s[0][0] + s[1][1];
        let det = det2(s);
        let disc = (tr * tr * T::c(0.25) - det).max(T::zero()).sqrt();
        [tr * T::c(0.5) + disc, tr * T::c(0.5) - disc]
    }

    fn mean_curvature(&self, xi: [T; 2]) -> T {
        let s = self.shape_operator(xi);
        s[0][0] + s[1][1]
    }

    /// |𝒜|² = κ₁² + κ₂² = tr(𝒜²).
    fn second_fundamental_norm(&self, xi: [T; 2]) -> T {
        let s = self.shape_operator(xi);
        s[0][0] * s[0][0] + s[1][1] * s[1][1] + T::c(2.0) * s[0][1] * s[1][0]
    }

    fn gauss_curvature(&self, xi: [T; 2]) -> T {
        det2(self.shape_operator(xi))
    }

    fn area_element(&self, xi: [T; 2]) -> T {
        det2(self.metric(xi)).sqrt()
    }

    /// (z₀, z₁, z₂, z₃) with zᵢ = ν·eᵢ and z₀ = ν·(-y₂, y₁, 0).
    fn jacobi_fields(&self, xi: [T; 2]) -> [T; 4] {
        let n = self.normal(xi);
        let y = self.position(xi);
        [-n[0] * y[1] + n[1] * y[0], n[0], n[1], n[2]]
    }

    /// r(y) = sqrt(1 + |y|²).
    fn radius(&self, xi: [T; 2]) -> T {
        let y = self.position(xi);
        (T::one() + dot3(y, y)).sqrt()
    }
}

/// Catenoid (cosh s cos θ, cosh s sin θ, s) with ν = (cos θ, sin θ, -sinh s)/cosh s.
#[derive(Debug, Clone, Copy)]
pub struct Catenoid<T> {
    pub s_max: T,
    pub n_s: usize,
    pub n_theta: usize,
}

pub fn catenoid_chart<T: Real>(s_max: T, n_s: usize, n_theta: usize) -> Result<Catenoid<T>> {
    if !(s_max >= T::c(3.0)) {
        return Err(Error::InvalidGrid(format!("catenoid s_max = {s_max:?} must be >= 3")));
    }
    if n_s < 5 || n_theta < 4 {
        return Err(Error::InvalidGrid(format!("catenoid grid {n_s} x {n_theta} too small")));
    }
    Ok(Catenoid { s_max, n_s, n_theta })
}

impl<T: Real> SurfaceChart<T> for Catenoid<T> {
    fn kind(&self) -> ChartKind {
        ChartKind::Catenoid
    }

    fn grid(&self) -> ChartGrid<T> {
        ChartGrid { lo: [-self.s_max, T::zero()], hi: [self.s_max, T::TAU()], n: [self.n_s, self.n_theta], periodic: [false, true] }
    }

    fn position(&self, xi: [T; 2]) -> Vec3<T> {
        let (s, th) = (xi[0], xi[1]);
        [s.cosh() * th.cos(), s.cosh() * th.sin(), s]
    }

    fn tangents(&self, xi: [T; 2]) -> [Vec3<T>; 2] {
        let (s, th) = (xi[0], xi[1]);
        [[s.sinh() * th.cos(), s.sinh() * th.sin(), T::one()], [-s.cosh() * th.sin(), s.cosh() * th.cos(), T::zero()]]
    }

    fn normal(&self, xi: [T; 2]) -> Vec3<T> {
        let (s, th) = (xi[0], xi[1]);
        let c = s.cosh();
        [th.cos() / c, th.sin() / c, -s.tanh()]
    }

    fn normal_derivatives(&self, xi: [T; 2]) -> [Vec3<T>; 2] {
        let (s, th) = (xi[0], xi[1]);
        let sech = T::one() / s.cosh();
        let th_s = s.tanh();
        [[-th_s * sech * th.cos(), -th_s * sech * th.sin(), -sech * sech], [-th.sin() * sech, th.cos() * sech, T::zero()]]
    }

    fn side(&self, x: Vec3<T>) -> T {
        (x[0] * x[0] + x[1] * x[1]).sqrt() - x[2].cosh()
    }

    fn ends(&self) -> Vec<EndData<T>> {
        let l2 = T::c(2.0).ln();
        vec![EndData { a: -T::one(), b: -l2, orientation: T::one() }, EndData { a: T::one(), b: l2, orientation: -T::one() }]
    }

    fn axisymmetric(&self) -> bool {
        true
    }

    fn initial_guess(&self, x: Vec3<T>) -> [T; 2] {
        let th = x[1].atan2(x[0]);
        let th = if th < T::zero() { th + T::TAU() } else { th };
        [x[2], th]
    }
}

/// Cylinder of radius R about the x³ axis, ξ = (x³, θ), inward normal.
#[derive(Debug, Clone, Copy)]
pub struct Cylinder<T> {
    pub radius: T,
    pub half_length: T,
    pub n_s: usize,
    pub n_theta: usize,
}

pub fn cylinder_chart<T: Real>(radius: T, half_length: T, n_s: usize, n_theta: usize) -> Result<Cylinder<T>> {
    if !(radius > T::zero()) || !(half_length > T::zero()) || n_s < 5 || n_theta < 4 {
        return Err(Error::InvalidGrid("cylinder needs R > 0, L > 0 and a 5 x 4 grid".into()));
    }
    Ok(Cylinder { radius, half_length, n_s, n_theta })
}

impl<T: Real> SurfaceChart<T> for Cylinder<T> {
    fn kind(&self) -> ChartKind {
        ChartKind::Cylinder
    }

    fn grid(&self) -> ChartGrid<T> {
        ChartGrid {
            lo: [-self.half_length, T::zero()],
            hi: [self.half_length, T::TAU()],
            n: [self.n_s, self.n_theta],
            periodic: [false, true],
        }
    }

    fn position(&self, xi: [T; 2]) -> Vec3<T> {
        [self.radius * xi[1].cos(), self.radius * xi[1].sin(), xi[0]]
    }

    fn tangents(&self, xi: [T; 2]) -> [Vec3<T>; 2] {
        [[T::zero(), T::zero(), T::one()], [-self.radius * xi[1].sin(), self.radius * xi[1].cos(), T::zero()]]
    }

    fn normal(&self, xi: [T; 2]) -> Vec3<T> {
        [-xi[1].cos(), -xi[1].sin(), T::zero()]
    }

    fn normal_derivatives(&self, xi: [T; 2]) -> [Vec3<T>; 2] {
        [[T::zero(); 3], [xi[1].sin(), -xi[1].cos(), T::zero()]]
    }

    fn side(&self, x: Vec3<T>) -> T {
        self.radius - (x[0] * x[0] + x[1] * x[1]).sqrt()
    }

    fn axisymmetric(&self) -> bool {
        true
    }

    fn initial_guess(&self, x: Vec3<T>) -> [T; 2] {
        let th = x[1].atan2(x[0]);
        let th = if th < T::zero() { th + T::TAU() } else { th };
        [x[2], th]
    }
}

/// The plane x³ = 0 with ν = e₃ over [-L, L]².
#[derive(Debug, Clone, Copy)]
pub struct Plane<T> {
    pub half_width: T,
    pub n: usize,
}

pub fn plane_chart<T: Real>(half_width: T, n: usize) -> Result<Plane<T>> {
    if !(half_width > T::zero()) || n < 5 {
        return Err(Error::InvalidGrid("plane needs L > 0 and n >= 5".into()));
    }
    Ok(Plane { half_width, n })
}

impl<T: Real> SurfaceChart<T> for Plane<T> {
    fn kind(&self) -> ChartKind {
        ChartKind::Plane
    }

    fn grid(&self) -> ChartGrid<T> {
        let l = self.half_width;
        ChartGrid { lo: [-l, -l], hi: [l, l], n: [self.n, self.n], periodic: [false, false] }
    }

    fn position(&self, xi: [T; 2]) -> Vec3<T> {
        [xi[0], xi[1], T::zero()]
    }

    fn tangents(&self, _xi: [T; 2]) -> [Vec3<T>; 2] {
        [[T::one(), T::zero(), T::zero()], [T::zero(), T::one(), T::zero()]]
    }

    fn normal(&self, _xi: [T; 2]) -> Vec3<T> {
        [T::zero(), T::zero(), T::one()]
    }

    fn normal_derivatives(&self, _xi: [T; 2]) -> [Vec3<T>; 2] {
        [[T::zero(); 3]; 2]
    }

    fn side(&self, x: Vec3<T>) -> T {
        x[2]
    }

    fn ends(&self) -> Vec<EndData<T>> {
        vec![EndData { a: T::zero(), b: T::zero(), orientation: T::one() }]
    }

    fn initial_guess(&self, x: Vec3<T>) -> [T; 2] {
        [x[0], x[1]]
    }
}

/// ∫ |K| dA by tensor quadrature on the chart grid.
pub fn total_curvature<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C) -> T {
    let g = chart.grid();
    let (w0, w1) = (g.weights_1d(0), g.weights_1d(1));
    let mut acc = T::zero();
    for i in 0..g.n[0] {
        let mut row = T::zero();
        for j in 0..g.n[1] {
            let xi = g.node(i, j);
            row = row + w1[j] * chart.gauss_curvature(xi).abs() * chart.area_element(xi);
        }
        acc = acc + w0[i] * row;
    }
    acc
}

/// Integral of a sampled field against the area element.
pub fn integrate<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C, field: &[T]) -> T {
    let g = chart.grid();
    let (w0, w1) = (g.weights_1d(0), g.weights_1d(1));
    let mut acc = T::zero();
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let xi = g.node(i, j);
            acc = acc + w0[i] * w1[j] * chart.area_element(xi) * field[g.index(i, j)];
        }
    }
    acc
}

/// Coefficients √g g^{ab} and √g sampled on the grid.
pub struct DivFormCoefficients<T> {
    pub c: Vec<Mat2<T>>,
    pub sqrt_g: Vec<T>,
}

pub fn div_form_coefficients<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C) -> DivFormCoefficients<T> {
    let g = chart.grid();
    let mut c = Vec::with_capacity(g.len());
    let mut sqrt_g = Vec::with_capacity(g.len());
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let m = chart.metric(g.node(i, j));
            let sg = det2(m).sqrt();
            let gi = inv2(m);
            c.push([[sg * gi[0][0], sg * gi[0][1]], [sg * gi[1][0], sg * gi[1][1]]]);
            sqrt_g.push(sg);
        }
    }
    DivFormCoefficients { c, sqrt_g }
}

/// Div-form Laplace–Beltrami stencil at (i, j): list of (node, weight) such
/// that Δ_M u ≈ Σ w u. Metric coefficients are frozen at nodes and averaged
/// to cell faces. Returns None on the boundary of a non-periodic direction.
pub fn laplace_beltrami_stencil<T: Real>(g: &ChartGrid<T>, co: &DivFormCoefficients<T>, i: usize, j: usize) -> Option<Vec<(usize, T)>> {
    if g.on_boundary(i, j) {
        return None;
    }
    let (n0, n1) = (g.n[0], g.n[1]);
    let wrap0 = |k: isize| -> usize { ((k + n0 as isize) % n0 as isize) as usize };
    let wrap1 = |k: isize| -> usize { ((k + n1 as isize) % n1 as isize) as usize };
    let (ii, jj) = (i as isize, j as isize);
    let ip = wrap0(ii + 1);
    let im = wrap0(ii - 1);
    let jp = wrap1(jj + 1);
    let jm = wrap1(jj - 1);
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let half = T::c(0.5);
    let id = |a: usize, b: usize| g.index(a, b);
    let c = |a: usize, b: usize| co.c[id(a, b)];
    let here = c(i, j);
    let mut out: Vec<(usize, T)> = Vec::with_capacity(9);
    let e_p = (here[0][0] + c(ip, j)[0][0]) * half / (h0 * h0);
    let e_m = (here[0][0] + c(im, j)[0][0]) * half / (h0 * h0);
    let n_p = (here[1][1] + c(i, jp)[1][1]) * half / (h1 * h1);
    let n_m = (here[1][1] + c(i, jm)[1][1]) * half / (h1 * h1);
    out.push((id(ip, j), e_p));
    out.push((id(im, j), e_m));
    out.push((id(i, jp), n_p));
    out.push((id(i, jm), n_m));
    out.push((id(i, j), -(e_p + e_m + n_p + n_m)));
    // mixed terms ∂₁(c¹² ∂₂u) + ∂₂(c²¹ ∂₁u)
    let q = T::one() / (T::c(4.0) * h0 * h1);
    let c_ip = c(ip, j)[0][1] * q;
    let c_im = c(im, j)[0][1] * q;
    let c_jp = c(i, jp)[1][0] * q;
    let c_jm = c(i, jm)[1][0] * q;
    if c_ip != T::zero() || c_im != T::zero() || c_jp != T::zero() || c_jm != T::zero() {
        out.push((id(ip, jp), c_ip + c_jp));
        out.push((id(ip, jm), -c_ip - c_jm));
        out.push((id(im, jp), -c_im - c_jp));
        out.push((id(im, jm), c_im + c_jm));
    }
    let inv = T::one() / co.sqrt_g[id(i, j)];
    for e in out.iter_mut() {
        e.1 = e.1 * inv;
    }
    Some(out)
}

/// Δ_M applied to a sampled field; boundary nodes of non-periodic directions
/// are set to zero.
pub fn laplace_beltrami<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C, field: &[T]) -> Vec<T> {
    let g = chart.grid();
    let co = div_form_coefficients(chart);
    let mut out = vec![T::zero(); g.len()];
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            if let Some(st) = laplace_beltrami_stencil(&g, &co, i, j) {
                out[g.index(i, j)] = st.iter().fold(T::zero(), |s, &(k, w)| s + w * field[k]);
            }
        }
    }
    out
}

/// sup over interior nodes of |Δ_M u + |𝒜|² u|.
pub fn jacobi_residual<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C, field: &[T]) -> T {
    let g = chart.grid();
    let lap = laplace_beltrami(chart, field);
    let mut sup = T::zero();
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            if g.on_boundary(i, j) {
                continue;
            }
            let k = g.index(i, j);
            let v = lap[k] + chart.second_fundamental_norm(g.node(i, j)) * field[k];
            sup = sup.max(v.abs());
        }
    }
    sup
}

/// sup |K_Brioschi - det 𝒜| where K_Brioschi uses only finite differences of
/// the metric; nodes within two cells of a non-periodic boundary are skipped.
pub fn brioschi_defect<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C) -> T {
    let g = chart.grid();
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let e = |xi: [T; 2]| chart.metric(xi);
    let half = T::c(0.5);
    let two = T::c(2.0);
    let mut sup = T::zero();
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let skip0 = !g.periodic[0] && (i < 2 || i + 2 >= g.n[0]);
            let skip1 = !g.periodic[1] && (j < 2 || j + 2 >= g.n[1]);
            if skip0 || skip1 {
                continue;
            }
            let xi = g.node(i, j);
            let at = |du: T, dv: T| e([xi[0] + du, xi[1] + dv]);
            let m = at(T::zero(), T::zero());
            let (mu_p, mu_m, mv_p, mv_m) = (at(h0, T::zero()), at(-h0, T::zero()), at(T::zero(), h1), at(T::zero(), -h1));
            let (mpp, mpm, mmp, mmm) = (at(h0, h1), at(h0, -h1), at(-h0, h1), at(-h0, -h1));
            let d_u = |a: usize, b: usize| (mu_p[a][b] - mu_m[a][b]) / (two * h0);
            let d_v = |a: usize, b: usize| (mv_p[a][b] - mv_m[a][b]) / (two * h1);
            let d_uu = |a: usize, b: usize| (mu_p[a][b] - two * m[a][b] + mu_m[a][b]) / (h0 * h0);
            let d_vv = |a: usize, b: usize| (mv_p[a][b] - two * m[a][b] + mv_m[a][b]) / (h1 * h1);
            let d_uv = |a: usize, b: usize| (mpp[a][b] - mpm[a][b] - mmp[a][b] + mmm[a][b]) / (T::c(4.0) * h0 * h1);
            let (ee, ff, gg) = (m[0][0], m[0][1], m[1][1]);
            let m1 = [
                [-half * d_vv(0, 0) + d_uv(0, 1) - half * d_uu(1, 1), half * d_u(0, 0), d_u(0, 1) - half * d_v(0, 0)],
                [d_v(0, 1) - half * d_u(1, 1), ee, ff],
                [half * d_v(1, 1), ff, gg],
            ];
            let m2 = [[T::zero(), half * d_v(0, 0), half * d_u(1, 1)], [half * d_v(0, 0), ee, ff], [half * d_u(1, 1), ff, gg]];
            let det3 = |a: [[T; 3]; 3]| {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            };
            let k_b = (det3(m1) - det3(m2)) / (ee * gg - ff * ff).powi(2);
            sup = sup.max((k_b - chart.gauss_curvature(xi)).abs());
        }
    }
    sup
}

/// Least-squares fit of x³ against log|x'| along θ = 0 for ξ¹ in [from, to].
pub fn end_fit<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C, from: T, to: T, samples: usize) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|k| {
            let s = from + (to - from) * T::c(k as f64 / (samples - 1) as f64);
            let p = chart.position([s, T::zero()]);
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            (rho.ln().to_f64().unwrap(), p[2].to_f64().unwrap())
        })
        .collect();
    let slope = crate::profile::least_squares_slope(&pts);
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Serialize)]
pub struct EndReport {
    pub ends: Vec<EndCoefficients>,
    pub total_curvature: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EndCoefficients {
    pub a: f64,
    pub b: f64,
}

pub fn end_report<T: Real, C: SurfaceChart<T> + ?Sized>(chart: &C) -> EndReport {
    EndReport {
        ends: chart.ends().iter().map(|e| EndCoefficients { a: e.a.to_f64().unwrap(), b: e.b.to_f64().unwrap() }).collect(),
        total_curvature: total_curvature(chart).to_f64().unwrap(),
    }
}

/// CSV columns xi1, xi2, x, y, z, k1, k2 over the chart grid.
pub fn write_mesh_csv<T: Real, C: SurfaceChart<T> + ?Sized, W: Write>(chart: &C, w: W) -> Result<()> {
    let g = chart.grid();
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["xi1", "xi2", "x", "y", "z", "k1", "k2"])?;
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            let xi = g.node(i, j);
            let p = chart.position(xi);
            let k = chart.principal_curvatures(xi);
            let rec: Vec<String> =
                [xi[0], xi[1], p[0], p[1], p[2], k[0], k[1]].iter().map(|v| format!("{:.12e}", v.to_f64().unwrap())).collect();
            wr.write_record(&rec)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// One eigenpair of 𝒥 w = λ |𝒜|² w on a truncated axisymmetric chart with
/// Dirichlet ends, with the weighted distance of w from span{z₀..z₃}.
#[derive(Debug, Clone, Serialize)]
pub struct JacobiMode {
    pub m: usize,
    pub lambda: f64,
    pub projection_residual: f64,
}

/// Low |λ| spectrum of the |𝒜|²-weighted Jacobi problem, angular modes
/// `0..=m_max`, sorted by |λ|.
pub fn jacobi_low_modes<C: SurfaceChart<f64> + ?Sized>(chart: &C, m_max: usize, count: usize) -> Result<Vec<JacobiMode>> {
    if !chart.axisymmetric() {
        return Err(Error::InvalidGrid("mode decomposition needs an axisymmetric chart".into()));
    }
    let g = chart.grid();
    let (n0, n1) = (g.n[0], g.n[1]);
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let co = div_form_coefficients(chart);
    let col = |i: usize| co.c[g.index(i, 0)];
    let nint = n0 - 2;
    let weight: Vec<f64> = (1..n0 - 1)
        .map(|i| {
            let xi = g.node(i, 0);
            co.sqrt_g[g.index(i, 0)] * chart.second_fundamental_norm(xi)
        })
        .collect();
    if weight.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::EigenFailure("|A|^2 weight vanishes on the grid".into()));
    }
    let zs: Vec<Vec<f64>> = (0..4).map(|k| g.sample(|xi| chart.jacobi_fields(xi)[k])).collect();
    let w2d: Vec<f64> = g.sample(|xi| chart.area_element(xi) * chart.second_fundamental_norm(xi));
    let mut candidates = Vec::new();
    for m in 0..=m_max {
        let lam_th = (2.0 - 2.0 * (m as f64 * h1).cos()) / (h1 * h1);
        // symmetric matrix √g 𝒥_m on interior nodes
        let mut a = nalgebra::DMatrix::<f64>::zeros(nint, nint);
        for r in 0..nint {
            let i = r + 1;
            let xi = g.node(i, 0);
            let e_p = 0.5 * (col(i)[0][0] + col(i + 1)[0][0]) / (h0 * h0);
            let e_m = 0.5 * (col(i)[0][0] + col(i - 1)[0][0]) / (h0 * h0);
            a[(r, r)] = -(e_p + e_m) - lam_th * col(i)[1][1] + co.sqrt_g[g.index(i, 0)] * chart.second_fundamental_norm(xi);
            if r + 1 < nint {
                a[(r, r + 1)] = e_p;
            }
            if r > 0 {
                a[(r, r - 1)] = e_m;
            }
        }
        let scaled = nalgebra::DMatrix::<f64>::from_fn(nint, nint, |r, c| a[(r, c)] / (weight[r] * weight[c]).sqrt());
        let eig = nalgebra::SymmetricEigen::new(scaled);
        for k in 0..nint {
            let y = eig.eigenvectors.column(k);
            let w_s: Vec<f64> = (0..nint).map(|r| y[r] / weight[r].sqrt()).collect();
            let copies = if m == 0 { 1 } else { 2 };
            for copy in 0..copies {
                candidates.push((m, copy, eig.eigenvalues[k], w_s.clone()));
            }
        }
    }
    candidates.sort_by(|a, b| a.2.abs().partial_cmp(&b.2.abs()).unwrap());
    candidates.truncate(count);
    let mut modes = Vec::with_capacity(count);
    for (m, copy, lambda, w_s) in candidates {
        let mut field = vec![0.0; g.len()];
        for (r, wr) in w_s.iter().enumerate() {
            for j in 0..n1 {
                let ang = m as f64 * g.coord(1, j);
                field[g.index(r + 1, j)] = wr * if copy == 0 { ang.cos() } else { ang.sin() };
            }
        }
        let res = projection_residual(&field, &zs, &w2d);
        modes.push(JacobiMode { m, lambda, projection_residual: res });
    }
    Ok(modes)
}

/// 1 - |P v|²/|v|² for the weighted projection onto the span of the nonzero `basis` fields.
fn projection_residual(v: &[f64], basis: &[Vec<f64>], w: &[f64]) -> f64 {
    let ip = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum::<f64>();
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for b in basis {
        let mut u = b.clone();
        for q in &ortho {
            let c = ip(&u, q);
            for (x, y) in u.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
        let nrm = ip(&u, &u).sqrt();
        if nrm > 1e-10 {
            u.iter_mut().for_each(|x| *x /= nrm);
            ortho.push(u);
        }
    }
    let vv = ip(v, v);
    let proj: f64 = ortho.iter().map(|q| ip(v, q).powi(2)).sum();
    (1.0 - proj / vv).max(0.0)
}
