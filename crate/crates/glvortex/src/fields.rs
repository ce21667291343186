//! Pairs (u, A) on R⁴, the approximations built from the planar vortex, the
//! Ginzburg–Landau residual and the energy density.
//!
//! Tube fields live in stretched coordinates, so the equations are used with
//! ε = 1 there while the frame's ε sets the geometry.

use crate::error::{Error, Result};
use crate::fermi::{inv4, FermiFrame, Vec4};
use crate::linop::LambdaTerms;
use crate::profile::RadialProfile;
use crate::surface::inv2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub u: Complex64,
    pub a: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    W0,
    W1,
    Glued,
    PureGauge,
    Custom,
}

pub trait FieldPair: Send + Sync {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue>;
    fn provenance(&self) -> Provenance;

    /// u and the pulled-back form A_q = Jᵀ A at Fermi coordinates q = (ξ, t).
    fn eval_fermi(&self, frame: &FermiFrame<f64>, xi: [f64; 2], t: [f64; 2]) -> Result<FieldValue> {
        let x = frame.map_unchecked(xi, t);
        let v = self.eval(x)?;
        let j = frame.jacobian(xi, t);
        let aq = std::array::from_fn(|c| (0..4).map(|r| j[c][r] * v.a[r]).sum());
        Ok(FieldValue { u: v.u, a: aq })
    }
}

/// C² cutoff: 1 for s ≤ 1, 0 for s ≥ 2, quintic in between.
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let x = s - 1.0;
        1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

pub fn cutoff_derivative(s: f64) -> f64 {
    if s <= 1.0 || s >= 2.0 {
        0.0
    } else {
        let x = s - 1.0;
        -30.0 * x * x * (1.0 - x) * (1.0 - x)
    }
}

/// W₀ = U₀(t) in shifted Fermi coordinates, optionally improved to
/// W₁ = W₀ + ε²Λ.
pub struct TubeField {
    pub frame: FermiFrame<f64>,
    pub profile: Arc<RadialProfile>,
    pub lambda: Option<Arc<LambdaTerms>>,
    /// When false, evaluation extends past τ/ε up to the focal distance
    /// (needed on the gluing collar).
    pub tube_limited: bool,
}

pub fn build_w0(profile: Arc<RadialProfile>, frame: FermiFrame<f64>) -> TubeField {
    TubeField { frame, profile, lambda: None, tube_limited: true }
}

pub fn build_w1(profile: Arc<RadialProfile>, frame: FermiFrame<f64>, lambda: Arc<LambdaTerms>) -> TubeField {
    TubeField { frame, profile, lambda: Some(lambda), tube_limited: true }
}

impl TubeField {
    /// (u, A_t) in the normal plane at (ξ, t).
    pub fn normal_values(&self, xi: [f64; 2], t: [f64; 2]) -> (Complex64, [f64; 2]) {
        let rho = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let jet = self.profile.jet(rho);
        let (mut u, mut at) = if rho > 0.0 {
            let a_over = if rho < 1e-6 { 0.5 * jet.d2a } else { jet.a / (rho * rho) };
            (Complex64::new(t[0], t[1]) * (jet.f / rho), [-a_over * t[1], a_over * t[0]])
        } else {
            (Complex64::new(0.0, 0.0), [0.0, 0.0])
        };
        if let Some(lam) = &self.lambda {
            let chart = &self.frame.chart;
            let a2 = chart.second_fundamental_norm(xi);
            let dh = self.frame.shift.gradient(xi);
            let gi = inv2(chart.metric(xi));
            let grad2 = (0..2).map(|i| (0..2).map(|j| gi[i][j] * dh[0][i] * dh[0][j]).sum::<f64>()).sum::<f64>();
            let l = lam.combine(a2, grad2, t);
            let e2 = self.frame.eps * self.frame.eps;
            u += Complex64::new(l[0], l[1]) * e2;
            at[0] += e2 * l[2];
            at[1] += e2 * l[3];
        }
        (u, at)
    }
}

impl FieldPair for TubeField {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue> {
        let (xi, t) = if self.tube_limited { self.frame.fermi_invert(x)? } else { self.frame.fermi_invert_focal(x)? };
        let (u, at) = self.normal_values(xi, t);
        let j = self.frame.jacobian(xi, t);
        let jt = std::array::from_fn(|c| std::array::from_fn(|r| j[c][r]));
        let inv = inv4(jt).ok_or(Error::SingularTube(0.0))?;
        let aq = [0.0, 0.0, at[0], at[1]];
        let a = std::array::from_fn(|r| (0..4).map(|c| inv[r][c] * aq[c]).sum());
        Ok(FieldValue { u, a })
    }

    fn provenance(&self) -> Provenance {
        if self.lambda.is_some() {
            Provenance::W1
        } else {
            Provenance::W0
        }
    }

    fn eval_fermi(&self, _frame: &FermiFrame<f64>, xi: [f64; 2], t: [f64; 2]) -> Result<FieldValue> {
        let (u, at) = self.normal_values(xi, t);
        Ok(FieldValue { u, a: [0.0, 0.0, at[0], at[1]] })
    }
}

/// Pure gauge (e^{iψ}, dψ) with e^{iψ} = (𝚍 + ix⁴)/|𝚍 + ix⁴|.
pub struct PureGauge {
    pub frame: FermiFrame<f64>,
    /// The constant 3 in ζ(|t + h¹| − ϱ_ε − 3).
    pub radius_offset: f64,
}

/// Extra offset of the smoothing cutoff inside 𝚍 beyond the gluing cutoff,
/// so that 𝚍 = t¹ on the whole gluing collar.
const DISTANCE_CUTOFF_SHIFT: f64 = 2.0;

impl PureGauge {
    pub fn new(frame: FermiFrame<f64>) -> Self {
        Self { frame, radius_offset: 3.0 }
    }

    /// ϱ_ε(ξ) = δ/ε + 4 log(1 + r(ξ)) and its ξ-gradient.
    fn varrho(&self, xi: [f64; 2]) -> (f64, [f64; 2]) {
        let chart = &self.frame.chart;
        let y = chart.position(xi);
        let tg = chart.tangents(xi);
        let r = chart.radius(xi);
        let dr: [f64; 2] = std::array::from_fn(|i| (0..3).map(|k| y[k] * tg[i][k]).sum::<f64>() / r);
        let v = self.frame.delta / self.frame.eps + 4.0 * (1.0 + r).ln();
        (v, dr.map(|d| 4.0 * d / (1.0 + r)))
    }

    /// 3-D normal data of x′: (ξ, stretched normal coordinate w) and the rows
    /// of the inverse Jacobian, or None outside the region where 𝚍 is
    /// built from Fermi coordinates.
    fn normal_coordinates(&self, xp: [f64; 3]) -> Option<([f64; 2], f64, [[f64; 3]; 3])> {
        let x4 = [xp[0], xp[1], xp[2], 0.0];
        let (xi, t) = self.frame.fermi_invert_focal(x4).ok()?;
        let h = self.frame.shift.value(xi);
        let w = t[0] + h[0];
        let (rho, _) = self.varrho(xi);
        if w.abs() >= rho + self.radius_offset + DISTANCE_CUTOFF_SHIFT + 2.0 {
            return None;
        }
        let chart = &self.frame.chart;
        let tg = chart.tangents(xi);
        let dn = chart.normal_derivatives(xi);
        let n = chart.normal(xi);
        let e = 1.0 / self.frame.eps;
        let mut m = [[0.0; 4]; 4];
        for r in 0..3 {
            m[r][0] = e * tg[0][r] + w * dn[0][r];
            m[r][1] = e * tg[1][r] + w * dn[1][r];
            m[r][2] = n[r];
        }
        m[3][3] = 1.0;
        let inv = inv4(m)?;
        let rows = [[inv[0][0], inv[0][1], inv[0][2]], [inv[1][0], inv[1][1], inv[1][2]], [inv[2][0], inv[2][1], inv[2][2]]];
        Some((xi, w, rows))
    }

    /// 𝚍(x′) and its gradient.
    pub fn smoothed_distance(&self, xp: [f64; 3]) -> ([f64; 1], [f64; 3]) {
        let Some((xi, w, rows)) = self.normal_coordinates(xp) else {
            let e = self.frame.eps;
            let side = self.frame.chart.side([e * xp[0], e * xp[1], e * xp[2]]);
            return ([side.signum()], [0.0; 3]);
        };
        let h = self.frame.shift.value(xi);
        let dh = self.frame.shift.gradient(xi);
        let t1 = w - h[0];
        let (rho, drho) = self.varrho(xi);
        let arg = w.abs() - rho - self.radius_offset - DISTANCE_CUTOFF_SHIFT;
        let z = cutoff(arg);
        let dz = cutoff_derivative(arg);
        let sg = t1.signum();
        let d = z * t1 + (1.0 - z) * sg;
        // gradients of ξ and w with respect to x′ are the rows of the inverse Jacobian
        let mut grad = [0.0; 3];
        for k in 0..3 {
            let dxi = [rows[0][k], rows[1][k]];
            let dw = rows[2][k];
            let dt1 = dw - dh[0][0] * dxi[0] - dh[0][1] * dxi[1];
            let darg = w.signum() * dw - drho[0] * dxi[0] - drho[1] * dxi[1];
            grad[k] = z * dt1 + (t1 - sg) * dz * darg;
        }
        ([d], grad)
    }
}

impl FieldPair for PureGauge {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue> {
        let ([d], gd) = self.smoothed_distance([x[0], x[1], x[2]]);
        let x4 = x[3];
        let n2 = d * d + x4 * x4;
        if n2 < 1e-24 {
            return Err(Error::OnBranchLocus);
        }
        let u = Complex64::new(d, x4) / n2.sqrt();
        // dψ = (𝚍 dx⁴ − x⁴ d𝚍)/(𝚍² + (x⁴)²)
        let a = [-x4 * gd[0] / n2, -x4 * gd[1] / n2, -x4 * gd[2] / n2, d / n2];
        Ok(FieldValue { u, a })
    }

    fn provenance(&self) -> Provenance {
        Provenance::PureGauge
    }
}

/// W = ζ_δ W₁ + (1 − ζ_δ)Ψ.
pub struct Glued {
    pub inner: Arc<dyn FieldPair>,
    pub outer: Arc<dyn FieldPair>,
    pub frame: FermiFrame<f64>,
    pub radius_offset: f64,
}

pub fn glue(inner: Arc<dyn FieldPair>, outer: Arc<dyn FieldPair>, frame: FermiFrame<f64>) -> Glued {
    Glued { inner, outer, frame, radius_offset: 3.0 }
}

impl Glued {
    pub fn zeta(&self, x: Vec4<f64>) -> f64 {
        let Ok((xi, t)) = self.frame.fermi_invert_focal(x) else {
            return 0.0;
        };
        let h = self.frame.shift.value(xi);
        let r = self.frame.chart.radius(xi);
        let rho = self.frame.delta / self.frame.eps + 4.0 * (1.0 + r).ln();
        let w = ((t[0] + h[0]).powi(2) + (t[1] + h[1]).powi(2)).sqrt();
        cutoff(w - rho - self.radius_offset)
    }
}

impl FieldPair for Glued {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue> {
        let z = self.zeta(x);
        if z == 1.0 {
            return self.inner.eval(x);
        }
        if z == 0.0 {
            return self.outer.eval(x);
        }
        let a = self.inner.eval(x)?;
        let b = self.outer.eval(x)?;
        Ok(FieldValue { u: a.u * z + b.u * (1.0 - z), a: std::array::from_fn(|k| z * a.a[k] + (1.0 - z) * b.a[k]) })
    }

    fn provenance(&self) -> Provenance {
        Provenance::Glued
    }
}

/// Real gauge function with its gradient.
pub trait GaugeFunction: Send + Sync {
    fn value(&self, x: Vec4<f64>) -> f64;
    fn gradient(&self, x: Vec4<f64>) -> [f64; 4];
}

/// γ(x) = c + b·(x − x₀) + ½ (x − x₀)ᵀM(x − x₀) with M symmetric.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticGauge {
    pub c: f64,
    pub b: [f64; 4],
    pub m: [[f64; 4]; 4],
    pub center: [f64; 4],
}

impl GaugeFunction for QuadraticGauge {
    fn value(&self, x: Vec4<f64>) -> f64 {
        let d: [f64; 4] = std::array::from_fn(|k| x[k] - self.center[k]);
        let mut v = self.c;
        for i in 0..4 {
            v += self.b[i] * d[i];
            for j in 0..4 {
                v += 0.5 * self.m[i][j] * d[i] * d[j];
            }
        }
        v
    }

    fn gradient(&self, x: Vec4<f64>) -> [f64; 4] {
        let d: [f64; 4] = std::array::from_fn(|k| x[k] - self.center[k]);
        std::array::from_fn(|i| self.b[i] + (0..4).map(|j| 0.5 * (self.m[i][j] + self.m[j][i]) * d[j]).sum::<f64>())
    }
}

/// G_γ(u, A) = (u e^{iγ}, A + dγ).
pub struct GaugeTransformed {
    pub inner: Arc<dyn FieldPair>,
    pub gamma: Arc<dyn GaugeFunction>,
}

pub fn gauge_transform(inner: Arc<dyn FieldPair>, gamma: Arc<dyn GaugeFunction>) -> GaugeTransformed {
    GaugeTransformed { inner, gamma }
}

impl FieldPair for GaugeTransformed {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue> {
        let v = self.inner.eval(x)?;
        let g = self.gamma.value(x);
        let dg = self.gamma.gradient(x);
        Ok(FieldValue { u: v.u * Complex64::from_polar(1.0, g), a: std::array::from_fn(|k| v.a[k] + dg[k]) })
    }

    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }
}

/// Field given by closures; used for manufactured tests.
pub struct FnField<F> {
    pub f: F,
}

impl<F: Fn(Vec4<f64>) -> FieldValue + Send + Sync> FieldPair for FnField<F> {
    fn eval(&self, x: Vec4<f64>) -> Result<FieldValue> {
        Ok((self.f)(x))
    }
    fn provenance(&self) -> Provenance {
        Provenance::Custom
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Weight {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for Weight {
    fn default() -> Self {
        Weight { mu: 4.0, sigma: 0.5 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ResidualOptions {
    pub step: f64,
    pub richardson: bool,
    pub weight: Weight,
}

impl ResidualOptions {
    /// step = min(1e-3, ε/50) for frame parameter ε.
    pub fn for_eps(eps: f64) -> Self {
        ResidualOptions { step: (1e-3f64).min(eps / 50.0), richardson: false, weight: Weight::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualSample {
    pub xi: [f64; 2],
    pub t: [f64; 2],
    pub x: [f64; 4],
    pub scalar_residual: Complex64,
    pub form_residual: [f64; 4],
    pub weighted_magnitude: f64,
}

impl ResidualSample {
    fn new(frame: &FermiFrame<f64>, xi: [f64; 2], t: [f64; 2], x: Vec4<f64>, s: (Complex64, [f64; 4]), w: Weight) -> Self {
        let r = frame.chart.radius(xi);
        let form = s.1.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tn = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let weighted = r.powf(w.mu) * (w.sigma * tn).exp() * s.0.norm().max(form);
        ResidualSample { xi, t, x, scalar_residual: s.0, form_residual: s.1, weighted_magnitude: weighted }
    }
}

type Offset = [i8; 4];

fn unit(a: usize, s: i8) -> Offset {
    let mut o = [0i8; 4];
    o[a] = s;
    o
}

fn add(a: Offset, b: Offset) -> Offset {
    std::array::from_fn(|k| a[k] + b[k])
}

/// Offsets {0, ±eₐ, ±eₐ ± e_b}, plus ±2eₐ when `wide`.
fn stencil(wide: bool) -> Vec<Offset> {
    let mut v = vec![[0i8; 4]];
    for a in 0..4 {
        for s in [1i8, -1] {
            v.push(unit(a, s));
            if wide {
                v.push(unit(a, 2 * s));
            }
        }
        for b in a + 1..4 {
            for sa in [1i8, -1] {
                for sb in [1i8, -1] {
                    v.push(add(unit(a, sa), unit(b, sb)));
                }
            }
        }
    }
    v
}

fn sample_ambient(field: &dyn FieldPair, x: Vec4<f64>, h: f64, wide: bool) -> Result<HashMap<Offset, FieldValue>> {
    let mut m = HashMap::new();
    for o in stencil(wide) {
        let p = std::array::from_fn(|k| x[k] + h * o[k] as f64);
        let v = field.eval(p).map_err(|e| match e {
            Error::OutsideTube(s) => Error::StencilOutsideDomain(s),
            other => other,
        })?;
        m.insert(o, v);
    }
    Ok(m)
}

/// exp(−i ∫ A_k) along the segment from offset `from` to `from + s e_k`, trapezoid rule.
fn link(m: &HashMap<Offset, FieldValue>, from: Offset, k: usize, s: i8, h: f64) -> Complex64 {
    let to = add(from, unit(k, s));
    let integral = 0.5 * h * s as f64 * (m[&from].a[k] + m[&to].a[k]);
    Complex64::from_polar(1.0, -integral)
}

fn ambient_once(field: &dyn FieldPair, x: Vec4<f64>, eps: f64, h: f64) -> Result<(Complex64, [f64; 4])> {
    let m = sample_ambient(field, x, h, false)?;
    let o = [0i8; 4];
    let u = m[&o].u;
    let mut lap = Complex64::new(0.0, 0.0);
    let mut du = [Complex64::new(0.0, 0.0); 4];
    for k in 0..4 {
        let up = link(&m, o, k, 1, h) * m[&unit(k, 1)].u;
        let um = link(&m, o, k, -1, h) * m[&unit(k, -1)].u;
        lap += (up + um - u * 2.0) / (h * h);
        du[k] = (up - um) / (2.0 * h);
    }
    let a = |off: Offset, k: usize| m[&off].a[k];
    let mut dsd = [0.0; 4];
    for (k, d) in dsd.iter_mut().enumerate() {
        for j in 0..4 {
            if j == k {
                continue;
            }
            let djj = (a(unit(j, 1), k) - 2.0 * a(o, k) + a(unit(j, -1), k)) / (h * h);
            let dkj = (a(add(unit(k, 1), unit(j, 1)), j) - a(add(unit(k, 1), unit(j, -1)), j) - a(add(unit(k, -1), unit(j, 1)), j)
                + a(add(unit(k, -1), unit(j, -1)), j))
                / (4.0 * h * h);
            *d += dkj - djj;
        }
    }
    let su = -lap * (eps * eps) - u * (0.5 * (1.0 - u.norm_sqr()));
    let sa = std::array::from_fn(|k| eps * eps * dsd[k] - (u.conj() * du[k]).im);
    Ok((su, sa))
}

fn richardson(fine: (Complex64, [f64; 4]), coarse: (Complex64, [f64; 4])) -> (Complex64, [f64; 4]) {
    ((fine.0 * 4.0 - coarse.0) / 3.0, std::array::from_fn(|k| (4.0 * fine.1[k] - coarse.1[k]) / 3.0))
}

/// S_ε(u, A) at x by covariant central differences in ambient coordinates.
pub fn gl_residual_ambient(
    field: &dyn FieldPair,
    x: Vec4<f64>,
    eps: f64,
    step: f64,
    richardson_step: bool,
) -> Result<(Complex64, [f64; 4])> {
    let fine = ambient_once(field, x, eps, step)?;
    if richardson_step {
        Ok(richardson(fine, ambient_once(field, x, eps, 2.0 * step)?))
    } else {
        Ok(fine)
    }
}

fn fermi_once(
    field: &dyn FieldPair,
    frame: &FermiFrame<f64>,
    xi: [f64; 2],
    t: [f64; 2],
    eps: f64,
    h: f64,
) -> Result<(Complex64, [f64; 4])> {
    let q0 = [xi[0], xi[1], t[0], t[1]];
    let at = |o: Offset| -> [f64; 4] { std::array::from_fn(|k| q0[k] + h * o[k] as f64) };
    let mut m: HashMap<Offset, FieldValue> = HashMap::new();
    for o in stencil(true) {
        let q = at(o);
        m.insert(o, field.eval_fermi(frame, [q[0], q[1]], [q[2], q[3]])?);
    }
    let geo = |o: Offset| -> Result<([[f64; 4]; 4], [[f64; 4]; 4], f64)> {
        let q = at(o);
        let g = frame.stretched_metric([q[0], q[1]], [q[2], q[3]]);
        let gi = inv4(g).ok_or(Error::SingularTube(0.0))?;
        let det = det4(g);
        if !(det > 0.0) {
            return Err(Error::SingularTube(det));
        }
        Ok((g, gi, det.sqrt()))
    };
    let o = [0i8; 4];
    let (g0, gi0, sg0) = geo(o)?;
    let u = m[&o].u;
    let a0 = m[&o].a;
    let du: [Complex64; 4] = std::array::from_fn(|a| (m[&unit(a, 1)].u - m[&unit(a, -1)].u) / (2.0 * h));
    let ddu = |a: usize, b: usize| -> Complex64 {
        if a == b {
            (m[&unit(a, 1)].u - u * 2.0 + m[&unit(a, -1)].u) / (h * h)
        } else {
            (m[&add(unit(a, 1), unit(b, 1))].u - m[&add(unit(a, 1), unit(b, -1))].u - m[&add(unit(a, -1), unit(b, 1))].u
                + m[&add(unit(a, -1), unit(b, -1))].u)
                / (4.0 * h * h)
        }
    };
    // ∂_c A_d at an offset point, central
    let da = |p: Offset, c: usize, d: usize| (m[&add(p, unit(c, 1))].a[d] - m[&add(p, unit(c, -1))].a[d]) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    let cov: [Complex64; 4] = std::array::from_fn(|b| du[b] - i * a0[b] * u);
    let mut lap = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        for b in 0..4 {
            let sym_da = 0.5 * (da(o, a, b) + da(o, b, a));
            let dd = ddu(a, b) - i * sym_da * u - i * a0[b] * du[a] - i * a0[a] * du[b] - u * (a0[a] * a0[b]);
            lap += dd * gi0[a][b];
        }
    }
    // c^b = (1/√G) ∂ₐ(√G G^{ab})
    let mut geos = HashMap::new();
    for a in 0..4 {
        for s in [1i8, -1] {
            geos.insert(unit(a, s), geo(unit(a, s))?);
        }
    }
    for b in 0..4 {
        let mut c = 0.0;
        for a in 0..4 {
            let (_, gp, sp) = geos[&unit(a, 1)];
            let (_, gm, sm) = geos[&unit(a, -1)];
            c += (sp * gp[a][b] - sm * gm[a][b]) / (2.0 * h);
        }
        lap += cov[b] * (c / sg0);
    }
    // (d*F)^b = −(1/√G) ∂ₐ(√G F^{ab})
    let f_at = |p: Offset| -> [[f64; 4]; 4] { std::array::from_fn(|c| std::array::from_fn(|d| da(p, c, d) - da(p, d, c))) };
    let raised = |p: Offset, gi: &[[f64; 4]; 4], sg: f64| -> [[f64; 4]; 4] {
        let f = f_at(p);
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut s = 0.0;
                for c in 0..4 {
                    for d in 0..4 {
                        s += gi[a][c] * gi[b][d] * f[c][d];
                    }
                }
                sg * s
            })
        })
    };
    let mut dsf_up = [0.0; 4];
    for a in 0..4 {
        let (_, gp, sp) = geos[&unit(a, 1)];
        let (_, gm, sm) = geos[&unit(a, -1)];
        let qp = raised(unit(a, 1), &gp, sp);
        let qm = raised(unit(a, -1), &gm, sm);
        for b in 0..4 {
            dsf_up[b] -= (qp[a][b] - qm[a][b]) / (2.0 * h * sg0);
        }
    }
    let dsf: [f64; 4] = std::array::from_fn(|e| (0..4).map(|b| g0[e][b] * dsf_up[b]).sum());
    let su = -lap * (eps * eps) - u * (0.5 * (1.0 - u.norm_sqr()));
    let sa_q: [f64; 4] = std::array::from_fn(|b| eps * eps * dsf[b] - (u.conj() * cov[b]).im);
    // ambient components from covariant q components
    let j = frame.jacobian(xi, t);
    let jt: [[f64; 4]; 4] = std::array::from_fn(|c| std::array::from_fn(|r| j[c][r]));
    let inv = inv4(jt).ok_or(Error::SingularTube(0.0))?;
    let sa = std::array::from_fn(|r| (0..4).map(|c| inv[r][c] * sa_q[c]).sum());
    Ok((su, sa))
}

fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mat = nalgebra::Matrix4::from_fn(|i, j| m[i][j]);
    mat.determinant()
}

/// S_ε through the coordinate expression of the operators in shifted Fermi
/// coordinates; the form part is returned in ambient components.
pub fn gl_residual_fermi_route(
    field: &dyn FieldPair,
    frame: &FermiFrame<f64>,
    xi: [f64; 2],
    t: [f64; 2],
    eps: f64,
    step: f64,
    richardson_step: bool,
) -> Result<(Complex64, [f64; 4])> {
    let fine = fermi_once(field, frame, xi, t, eps, step)?;
    if richardson_step {
        Ok(richardson(fine, fermi_once(field, frame, xi, t, eps, 2.0 * step)?))
    } else {
        Ok(fine)
    }
}

/// Residual at the ambient point x, located in the frame for the weight.
pub fn gl_residual(
    field: &dyn FieldPair,
    frame: &FermiFrame<f64>,
    x: Vec4<f64>,
    eps: f64,
    opts: &ResidualOptions,
) -> Result<ResidualSample> {
    let (xi, t) = frame.fermi_invert(x)?;
    let s = gl_residual_ambient(field, x, eps, opts.step, opts.richardson)?;
    Ok(ResidualSample::new(frame, xi, t, x, s, opts.weight))
}

/// Ambient and Fermi-route residual samples at X_{ε,h}(ξ, t).
pub fn gl_residual_both(
    field: &dyn FieldPair,
    frame: &FermiFrame<f64>,
    xi: [f64; 2],
    t: [f64; 2],
    eps: f64,
    opts: &ResidualOptions,
) -> Result<(ResidualSample, ResidualSample)> {
    let x = frame.fermi_map(xi, t)?;
    let amb = gl_residual_ambient(field, x, eps, opts.step, opts.richardson)?;
    let fer = gl_residual_fermi_route(field, frame, xi, t, eps, opts.step, opts.richardson)?;
    Ok((ResidualSample::new(frame, xi, t, x, amb, opts.weight), ResidualSample::new(frame, xi, t, x, fer, opts.weight)))
}

/// ½[ε²|Du|² + ε⁴ Σ_{j<k} F_{jk}² + ¼(1 − |u|²)²] by central differences.
pub fn energy_density(field: &dyn FieldPair, x: Vec4<f64>, eps: f64, step: f64) -> Result<f64> {
    let h = step;
    let mut m = HashMap::new();
    let o = [0i8; 4];
    m.insert(o, field.eval(x)?);
    for k in 0..4 {
        for s in [1i8, -1] {
            let mut p = x;
            p[k] += h * s as f64;
            m.insert(unit(k, s), field.eval(p).map_err(|e| Error::StencilOutsideDomain(e.to_string()))?);
        }
    }
    let u = m[&o].u;
    let mut kin = 0.0;
    for k in 0..4 {
        let up = link(&m, o, k, 1, h) * m[&unit(k, 1)].u;
        let um = link(&m, o, k, -1, h) * m[&unit(k, -1)].u;
        kin += ((up - um) / (2.0 * h)).norm_sqr();
    }
    let d = |j: usize, k: usize| (m[&unit(j, 1)].a[k] - m[&unit(j, -1)].a[k]) / (2.0 * h);
    let mut mag = 0.0;
    for j in 0..4 {
        for k in j + 1..4 {
            mag += (d(j, k) - d(k, j)).powi(2);
        }
    }
    let pot = 0.25 * (1.0 - u.norm_sqr()).powi(2);
    Ok(0.5 * (eps * eps * kin + eps.powi(4) * mag + pot))
}

/// Deterministic tube sample layout: chart points × normal directions × radii.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub chart_points: Vec<[f64; 2]>,
    pub directions: usize,
    pub radii: Vec<f64>,
}

impl SampleSet {
    /// 16 chart points (4 values of ξ¹ × 4 angles), 24 directions, 12 radii in (0, t_max].
    pub fn standard(xi1: [f64; 4], t_max: f64) -> Self {
        let mut pts = Vec::new();
        for &s in &xi1 {
            for k in 0..4 {
                pts.push([s, std::f64::consts::FRAC_PI_2 * k as f64 + 0.3]);
            }
        }
        SampleSet { chart_points: pts, directions: 24, radii: (1..=12).map(|k| t_max * k as f64 / 12.0).collect() }
    }

    pub fn points(&self) -> Vec<([f64; 2], [f64; 2])> {
        let mut out = Vec::new();
        for &xi in &self.chart_points {
            for d in 0..self.directions {
                let ang = std::f64::consts::TAU * (d as f64 + 0.5) / self.directions as f64;
                for &r in &self.radii {
                    out.push((xi, [r * ang.cos(), r * ang.sin()]));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub weighted_sup: f64,
    pub ratio: Option<f64>,
    /// max over samples of |ambient − Fermi| (componentwise max norm).
    pub oracle_gap: f64,
    /// max over samples of the same gap divided by step².
    pub oracle_gap_over_step2: f64,
    pub step: f64,
    pub samples: usize,
}

/// Weighted sup residual of `make(ε)` over the sample set for each ε, with
/// successive ratios; every sample is evaluated by both routes.
pub fn residual_scaling_study<M>(eps_list: &[f64], samples: &SampleSet, weight: Weight, make: M) -> Result<Vec<ScalingRow>>
where
    M: Fn(f64) -> Result<(Arc<dyn FieldPair>, FermiFrame<f64>)>,
{
    if eps_list.len() < 3 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidGrid("epsilon list must be decreasing with at least 3 entries".into()));
    }
    let pts = samples.points();
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &eps in eps_list {
        let (field, frame) = make(eps)?;
        let mut opts = ResidualOptions::for_eps(eps);
        opts.weight = weight;
        let results: Vec<Result<(f64, f64)>> = pts
            .par_iter()
            .map(|&(xi, t)| {
                let (a, f) = gl_residual_both(field.as_ref(), &frame, xi, t, 1.0, &opts)?;
                let gap = (a.scalar_residual - f.scalar_residual)
                    .norm()
                    .max((0..4).fold(0.0f64, |m, k| m.max((a.form_residual[k] - f.form_residual[k]).abs())));
                Ok((a.weighted_magnitude, gap))
            })
            .collect();
        let mut sup = 0.0f64;
        let mut gap = 0.0f64;
        for r in results {
            let (w, g) = r?;
            sup = sup.max(w);
            gap = gap.max(g);
        }
        let ratio = rows.last().map(|p| p.weighted_sup / sup);
        rows.push(ScalingRow {
            epsilon: eps,
            weighted_sup: sup,
            ratio,
            oracle_gap: gap,
            oracle_gap_over_step2: gap / (opts.step * opts.step),
            step: opts.step,
            samples: pts.len(),
        });
    }
    Ok(rows)
}
