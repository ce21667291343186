//! Codimension-2 Jacobi system on a two-ended chart (ξ¹ along the ends, ξ²
//! periodic): the corrected inversion, the mean-zero Laplace inversion and
//! the log-growing Jacobi field h₀.
//!
//! All solves use a zero-flux closure at ξ¹ = ±s_max, with the bounded
//! Jacobi fields removed through |𝒜|²-weighted orthogonality constraints.

use crate::error::{Error, Result};
use crate::fields::cutoff;
use crate::sparse::{Csr, SparseLu};
use crate::surface::{div_form_coefficients, inv2, laplace_beltrami_stencil, ChartGrid, SurfaceChart};
use serde::Serialize;

/// Discrete operators on the chart grid, as mass-weighted symmetric matrices.
pub struct JacobiGrid {
    pub grid: ChartGrid<f64>,
    /// Trapezoid weights √g Δξ¹ Δξ² (halved on the two end rings).
    pub mass: Vec<f64>,
    /// |𝒜|² at the nodes.
    pub a2: Vec<f64>,
    /// r(y) at the nodes.
    pub radius: Vec<f64>,
    /// W·Δ_M, zero-flux at the end rings.
    laplace: Vec<(usize, usize, f64)>,
    sqrt_g: Vec<f64>,
    c11: Vec<f64>,
}

/// One normalized kernel field ẑ_j (pair-valued), j = 0..=4.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub index: usize,
    pub slot: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobiSolution {
    #[serde(skip)]
    pub h: [Vec<f64>; 2],
    /// c⁰..c⁴; c⁰ is zero when z₀ vanishes on the chart.
    pub corrections: [f64; 5],
    pub defect: f64,
    pub star_norm: f64,
}

impl JacobiGrid {
    pub fn new<C: SurfaceChart<f64> + ?Sized>(chart: &C) -> Result<Self> {
        let g = chart.grid();
        if g.periodic[0] || !g.periodic[1] {
            return Err(Error::InvalidGrid("Jacobi solves need ends along the first chart direction".into()));
        }
        let co = div_form_coefficients(chart);
        let (n0, n1) = (g.n[0], g.n[1]);
        let (h0, h1) = (g.spacing(0), g.spacing(1));
        let mut laplace = Vec::new();
        let mut mass = vec![0.0; g.len()];
        let mut a2 = vec![0.0; g.len()];
        let mut radius = vec![0.0; g.len()];
        for i in 0..n0 {
            let end = i == 0 || i + 1 == n0;
            for j in 0..n1 {
                let k = g.index(i, j);
                let xi = g.node(i, j);
                let w = co.sqrt_g[k] * h0 * h1 * if end { 0.5 } else { 1.0 };
                mass[k] = w;
                a2[k] = chart.second_fundamental_norm(xi);
                radius[k] = chart.radius(xi);
                let sg = co.sqrt_g[k];
                if end {
                    let nb = if i == 0 { 1 } else { n0 - 2 };
                    let kn = g.index(nb, j);
                    if co.c[k][0][1].abs() > 1e-12 {
                        return Err(Error::InvalidGrid("end rings must be orthogonal to the ends".into()));
                    }
                    let e = 0.5 * (co.c[k][0][0] + co.c[kn][0][0]) / (h0 * h0);
                    let jp = g.index(i, (j + 1) % n1);
                    let jm = g.index(i, (j + n1 - 1) % n1);
                    let np = 0.5 * (co.c[k][1][1] + co.c[jp][1][1]) / (h1 * h1);
                    let nm = 0.5 * (co.c[k][1][1] + co.c[jm][1][1]) / (h1 * h1);
                    for (col, v) in [(kn, 2.0 * e), (jp, np), (jm, nm), (k, -(2.0 * e + np + nm))] {
                        laplace.push((k, col, w * v / sg));
                    }
                } else {
                    let st = laplace_beltrami_stencil(&g, &co, i, j).expect("interior node");
                    for (col, v) in st {
                        laplace.push((k, col, w * v));
                    }
                }
            }
        }
        let c11 = co.c.iter().map(|c| c[0][0]).collect();
        Ok(JacobiGrid { grid: g, mass, a2, radius, laplace, sqrt_g: co.sqrt_g, c11 })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Σ W u v.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), w)| a * b * w).sum()
    }

    /// ∫ |𝒜|² u v.
    pub fn weighted_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(self.mass.iter().zip(&self.a2)).map(|((a, b), (w, p))| a * b * w * p).sum()
    }

    fn entries(&self, potential: bool) -> Vec<(usize, usize, f64)> {
        let mut e = self.laplace.clone();
        if potential {
            for k in 0..self.len() {
                e.push((k, k, self.mass[k] * self.a2[k]));
            }
        }
        e
    }

    /// Δ_M u (slot 2) or Δ_M u + |𝒜|²u (slot 1); end rings use zero flux plus
    /// the given outward-derivative data.
    pub fn apply(&self, u: &[f64], potential: bool) -> Vec<f64> {
        let n = self.len();
        let csr = Csr::from_triplets(n, n, &self.entries(potential));
        csr.apply(u).iter().zip(&self.mass).map(|(v, w)| v / w).collect()
    }

    /// Boundary flux contribution for prescribed ∂_{ξ¹}u at the two end rings,
    /// as a nodal source to add to the zero-flux operator.
    fn end_flux(&self, ds: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; self.len()];
        let h0 = g.spacing(0);
        let n0 = g.n[0];
        for (i, sign) in [(0usize, -1.0), (n0 - 1, 1.0)] {
            for j in 0..g.n[1] {
                let k = g.index(i, j);
                // outward flux c¹¹ ∂ₙu over the half cell of width h/2
                out[k] = sign * self.c11[k] * ds(g.node(i, j)) / (0.5 * h0) / self.sqrt_g[k];
            }
        }
        out
    }
}

/// Gram–Schmidt of {z₀, z₁, z₂, z₃} (slot 1) and the constant (slot 2) in
/// the |𝒜|²-weighted inner product.
pub fn kernel_basis<C: SurfaceChart<f64> + ?Sized>(chart: &C, jg: &JacobiGrid) -> Vec<KernelField> {
    let g = &jg.grid;
    let mut basis: Vec<KernelField> = Vec::new();
    for idx in 0..4 {
        let mut v = g.sample(|xi| chart.jacobi_fields(xi)[idx]);
        let raw = jg.weighted_inner(&v, &v).sqrt();
        for b in &basis {
            let c = jg.weighted_inner(&v, &b.values);
            v.iter_mut().zip(&b.values).for_each(|(x, y)| *x -= c * y);
        }
        let n = jg.weighted_inner(&v, &v).sqrt();
        if n <= 1e-8 * raw.max(1.0) {
            log::warn!("Jacobi field z{idx} vanishes on this chart and is dropped");
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(KernelField { index: idx, slot: 0, values: v });
    }
    let total: f64 = jg.weighted_inner(&vec![1.0; jg.len()], &vec![1.0; jg.len()]);
    basis.push(KernelField { index: 4, slot: 1, values: vec![1.0 / total.sqrt(); jg.len()] });
    basis
}

/// Solve K u + Σ μ_j B_j = b, B_jᵀ u = 0 for B_j = W|𝒜|²ẑ_j (Schur complement).
fn solve_bordered(lu: &SparseLu, jg: &JacobiGrid, rhs_w: &[f64], constraints: &[&[f64]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let b: Vec<Vec<f64>> =
        constraints.iter().map(|z| z.iter().zip(jg.mass.iter().zip(&jg.a2)).map(|(v, (w, p))| v * w * p).collect()).collect();
    let z = lu.solve_many(&b)?;
    let y = lu.solve(rhs_w)?;
    let m = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let s = nalgebra::DMatrix::<f64>::from_fn(m, m, |i, j| dot(&b[i], &z[j]));
    let g = nalgebra::DVector::<f64>::from_fn(m, |i, _| dot(&b[i], &y));
    let mu = s.lu().solve(&g).ok_or_else(|| Error::SolverFailure("singular kernel constraint block".into()))?;
    let mut u = y;
    for (j, zj) in z.iter().enumerate() {
        u.iter_mut().zip(zj).for_each(|(x, v)| *x -= mu[j] * v);
    }
    Ok((u, mu.iter().copied().collect()))
}

/// Neumann Laplacian solve Δu = g (∫g = 0 discretely) with ∫|𝒜|²u = 0.
fn solve_laplace(jg: &JacobiGrid, g_rhs: &[f64]) -> Result<Vec<f64>> {
    let n = jg.len();
    let pin = 0usize;
    let mut e: Vec<(usize, usize, f64)> = jg.entries(false).into_iter().filter(|t| t.0 != pin).collect();
    e.push((pin, pin, 1.0));
    let lu = SparseLu::new(n, &e)?;
    let mut b: Vec<f64> = g_rhs.iter().zip(&jg.mass).map(|(x, w)| x * w).collect();
    b[pin] = 0.0;
    let mut u = lu.solve(&b)?;
    let shift = jg.weighted_inner(&u, &vec![1.0; n]) / jg.weighted_inner(&vec![1.0; n], &vec![1.0; n]);
    u.iter_mut().for_each(|x| *x -= shift);
    Ok(u)
}

/// c^j = ∫ f·ẑ_j / ∫|𝒜|²ẑ_j² with the solver's quadrature.
pub fn corrections(jg: &JacobiGrid, basis: &[KernelField], f: &[Vec<f64>; 2]) -> [f64; 5] {
    let mut c = [0.0; 5];
    for b in basis {
        let num = jg.inner(&f[b.slot], &b.values);
        let den = jg.weighted_inner(&b.values, &b.values);
        c[b.index] = num / den;
    }
    c
}

fn check_decay(jg: &JacobiGrid, f: &[f64]) -> Result<()> {
    let g = &jg.grid;
    let n0 = g.n[0];
    let (mut inner, mut outer) = (0.0f64, 0.0f64);
    for i in 0..n0 {
        let frac = (i as f64 / (n0 - 1) as f64 - 0.5).abs() * 2.0;
        for j in 0..g.n[1] {
            let k = g.index(i, j);
            let v = jg.radius[k].powi(4) * f[k].abs();
            if frac <= 0.5 {
                inner = inner.max(v);
            } else if frac >= 0.9 {
                outer = outer.max(v);
            }
        }
    }
    if outer > 1e-12 && outer > 10.0 * inner {
        return Err(Error::DecayViolation(format!("r^4 |f| reaches {outer:.3e} at the ends against {inner:.3e} inside")));
    }
    Ok(())
}

/// ‖u‖_∞ + ‖r²Du‖_∞ + ‖r⁴D²u‖_∞ with metric-normalized central differences.
pub fn star_norm<C: SurfaceChart<f64> + ?Sized>(chart: &C, jg: &JacobiGrid, u: &[f64]) -> f64 {
    let g = &jg.grid;
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let n1 = g.n[1];
    let (mut s0, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..g.n[0] {
        for j in 0..n1 {
            let k = g.index(i, j);
            s0 = s0.max(u[k].abs());
            if i == 0 || i + 1 == g.n[0] {
                continue;
            }
            let at = |a: usize, b: usize| u[g.index(a, b % n1)];
            let (jp, jm) = (j + 1, j + n1 - 1);
            let d1 = (at(i + 1, j) - at(i - 1, j)) / (2.0 * h0);
            let d2 = (at(i, jp) - at(i, jm)) / (2.0 * h1);
            let gi = inv2(chart.metric(g.node(i, j)));
            let grad = (gi[0][0] * d1 * d1 + 2.0 * gi[0][1] * d1 * d2 + gi[1][1] * d2 * d2).sqrt();
            let d11 = (at(i + 1, j) - 2.0 * u[k] + at(i - 1, j)) / (h0 * h0);
            let d22 = (at(i, jp) - 2.0 * u[k] + at(i, jm)) / (h1 * h1);
            let d12 = (at(i + 1, jp) - at(i + 1, jm) - at(i - 1, jp) + at(i - 1, jm)) / (4.0 * h0 * h1);
            let hess = (gi[0][0] * gi[0][0] * d11 * d11 + 2.0 * gi[0][0] * gi[1][1] * d12 * d12 + gi[1][1] * gi[1][1] * d22 * d22).sqrt();
            let r = jg.radius[k];
            s1 = s1.max(r * r * grad);
            s2 = s2.max(r.powi(4) * hess);
        }
    }
    s0 + s1 + s2
}

/// Prop.-2 system: 𝒥h = f − Σ_j c^j|𝒜|²ẑ_j, h ⊥ ẑ_j.
pub fn solve_corrected_jacobi<C: SurfaceChart<f64> + ?Sized>(chart: &C, f: &[Vec<f64>; 2]) -> Result<JacobiSolution> {
    let jg = JacobiGrid::new(chart)?;
    let basis = kernel_basis(chart, &jg);
    solve_corrected_with(chart, &jg, &basis, f)
}

pub fn solve_corrected_with<C: SurfaceChart<f64> + ?Sized>(
    chart: &C,
    jg: &JacobiGrid,
    basis: &[KernelField],
    f: &[Vec<f64>; 2],
) -> Result<JacobiSolution> {
    if f[0].len() != jg.len() || f[1].len() != jg.len() {
        return Err(Error::InvalidGrid("right-hand side does not match the chart grid".into()));
    }
    check_decay(jg, &f[0])?;
    check_decay(jg, &f[1])?;
    let c = corrections(jg, basis, f);
    let mut rhs = f.clone();
    for b in basis {
        for k in 0..jg.len() {
            rhs[b.slot][k] -= c[b.index] * jg.a2[k] * b.values[k];
        }
    }
    // slot 1: Jacobi operator, bordered against ẑ₁..ẑ₃
    let lu = SparseLu::new(jg.len(), &jg.entries(true))?;
    let rhs_w: Vec<f64> = rhs[0].iter().zip(&jg.mass).map(|(x, w)| x * w).collect();
    let cons: Vec<&[f64]> = basis.iter().filter(|b| b.slot == 0).map(|b| b.values.as_slice()).collect();
    let (h1, _) = solve_bordered(&lu, jg, &rhs_w, &cons)?;
    // slot 2: Laplacian modulo constants
    let h2 = solve_laplace(jg, &rhs[1])?;
    let r1 = jg.apply(&h1, true);
    let r2 = jg.apply(&h2, false);
    let defect = (0..jg.len()).fold(0.0f64, |m, k| m.max((r1[k] - rhs[0][k]).abs()).max((r2[k] - rhs[1][k]).abs()));
    let star = star_norm(chart, jg, &h1) + star_norm(chart, jg, &h2);
    Ok(JacobiSolution { h: [h1, h2], corrections: c, defect, star_norm: star })
}

/// Bounded ψ with Δ_Mψ = g and ∫|𝒜|²ψ = 0, for g of zero mean.
pub fn laplace_invert_mean_zero<C: SurfaceChart<f64> + ?Sized>(chart: &C, g: &[f64]) -> Result<Vec<f64>> {
    let jg = JacobiGrid::new(chart)?;
    let ones = vec![1.0; jg.len()];
    let mean = jg.inner(g, &ones);
    let scale = g.iter().zip(&jg.mass).map(|(x, w)| x.abs() * w).sum::<f64>();
    if mean.abs() > 1e-6 * scale.max(1e-300) {
        return Err(Error::MeanNotZero(mean));
    }
    if scale == 0.0 {
        return Ok(vec![0.0; jg.len()]);
    }
    // remove the quadrature-level mean along |𝒜|² so the discrete problem is solvable
    let wa = jg.inner(&jg.a2, &ones);
    let g2: Vec<f64> = g.iter().zip(&jg.a2).map(|(x, p)| x - mean / wa * p).collect();
    solve_laplace(&jg, &g2)
}

#[derive(Debug, Clone, Serialize)]
pub struct H0Solution {
    #[serde(skip)]
    pub h0: Vec<f64>,
    #[serde(skip)]
    pub remainder: Vec<f64>,
    pub defect: f64,
    pub multipliers: Vec<f64>,
}

/// log r blended onto the two ends: Σ_j (−1)^j λ_j χ_j log r.
fn log_ansatz<C: SurfaceChart<f64> + ?Sized>(chart: &C, lambda: [f64; 2], xi: [f64; 2]) -> f64 {
    let s = xi[0];
    let lr = chart.radius(xi).ln();
    let lower = 1.0 - cutoff(-s);
    let upper = 1.0 - cutoff(s);
    (-lambda[0] * lower + lambda[1] * upper) * lr
}

/// Jacobi field with h₀ = (−1)^jλ_j log r + η on end j, η bounded.
pub fn build_h0<C: SurfaceChart<f64> + ?Sized>(chart: &C, lambda: [f64; 2]) -> Result<H0Solution> {
    let sum = lambda[0] + lambda[1];
    if sum.abs() > 1e-12 * (1.0 + lambda[0].abs() + lambda[1].abs()) {
        return Err(Error::UnbalancedLambda(sum));
    }
    let jg = JacobiGrid::new(chart)?;
    let n = jg.len();
    if lambda == [0.0, 0.0] {
        return Ok(H0Solution { h0: vec![0.0; n], remainder: vec![0.0; n], defect: 0.0, multipliers: vec![] });
    }
    let basis = kernel_basis(chart, &jg);
    let anz = jg.grid.sample(|xi| log_ansatz(chart, lambda, xi));
    let ds = |xi: [f64; 2]| {
        let d = 1e-5;
        (log_ansatz(chart, lambda, [xi[0] + d, xi[1]]) - log_ansatz(chart, lambda, [xi[0] - d, xi[1]])) / (2.0 * d)
    };
    // 𝒥(ansatz) with its true end flux, then η with zero flux
    let flux = jg.end_flux(&ds);
    let j_anz: Vec<f64> = jg.apply(&anz, true).iter().zip(&flux).map(|(a, b)| a + b).collect();
    let rhs_w: Vec<f64> = j_anz.iter().zip(&jg.mass).map(|(x, w)| -x * w).collect();
    let lu = SparseLu::new(n, &jg.entries(true))?;
    let cons: Vec<&[f64]> = basis.iter().filter(|b| b.slot == 0).map(|b| b.values.as_slice()).collect();
    let (eta, mu) = solve_bordered(&lu, &jg, &rhs_w, &cons)?;
    let h0: Vec<f64> = anz.iter().zip(&eta).map(|(a, e)| a + e).collect();
    let jh: Vec<f64> = jg.apply(&h0, true).iter().zip(&flux).map(|(a, b)| a + b).collect();
    let defect = jh.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(H0Solution { h0, remainder: eta, defect, multipliers: mu })
}

/// Weighted distance of `u` from span{ẑ₁, ẑ₂, ẑ₃}: returns u minus its
/// |𝒜|²-orthogonal projection.
pub fn modulo_kernel(jg: &JacobiGrid, basis: &[KernelField], u: &[f64]) -> Vec<f64> {
    let mut v = u.to_vec();
    for b in basis.iter().filter(|b| b.slot == 0) {
        let c = jg.weighted_inner(&v, &b.values);
        v.iter_mut().zip(&b.values).for_each(|(x, y)| *x -= c * y);
    }
    v
}

/// Independent 1-D solve of 𝒥h = f for ξ²-independent data on an
/// axisymmetric chart: dense, zero flux, bordered against the m = 0 kernel
/// field sampled from the chart.
pub fn solve_axisymmetric_1d<C: SurfaceChart<f64> + ?Sized>(chart: &C, f: &[f64]) -> Result<Vec<f64>> {
    let g = chart.grid();
    let n = g.n[0];
    let h = g.spacing(0);
    if f.len() != n {
        return Err(Error::InvalidGrid("1-D data must have one value per ring".into()));
    }
    let xi = |i: usize| [g.coord(0, i), 0.0];
    let sg: Vec<f64> = (0..n).map(|i| chart.area_element(xi(i))).collect();
    let c11: Vec<f64> = (0..n).map(|i| sg[i] * inv2(chart.metric(xi(i)))[0][0]).collect();
    let a2: Vec<f64> = (0..n).map(|i| chart.second_fundamental_norm(xi(i))).collect();
    let w: Vec<f64> = (0..n).map(|i| sg[i] * h * if i == 0 || i == n - 1 { 0.5 } else { 1.0 }).collect();
    let z: Vec<f64> = (0..n).map(|i| chart.jacobi_fields(xi(i))[3]).collect();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        let mut add = |j: usize, v: f64| m[(i, j)] += v;
        if i > 0 {
            let e = 0.5 * (c11[i] + c11[i - 1]) / (h * h) * h;
            add(i - 1, e);
            add(i, -e);
        }
        if i + 1 < n {
            let e = 0.5 * (c11[i] + c11[i + 1]) / (h * h) * h;
            add(i + 1, e);
            add(i, -e);
        }
        add(i, w[i] * a2[i]);
        m[(i, n)] = w[i] * a2[i] * z[i];
        m[(n, i)] = w[i] * a2[i] * z[i];
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(n + 1);
    for i in 0..n {
        rhs[i] = w[i] * f[i];
    }
    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::SolverFailure("singular 1-D system".into()))?;
    Ok((0..n).map(|i| sol[i]).collect())
}
