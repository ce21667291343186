//! The gauge-orthogonal linearization 𝖫 of the planar equations around the
//! degree-1 vortex, on a staggered polar grid of the disk of radius R.
//!
//! Unknowns per node are (φ₁, φ₂, ω₁, ω₂): the real and imaginary parts of
//! the scalar perturbation and the Cartesian components of the 1-form.

use crate::error::{Error, Result};
use crate::interp::{trig_weights, CubicSpline};
use crate::profile::{ProfileJet, RadialProfile};
use crate::sparse::{Csr, SparseLu, Triplets};
use serde::Serialize;
use std::f64::consts::{PI, TAU};

pub const FIELDS: usize = 4;

/// Angular discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaScheme {
    /// Trigonometric collocation; spectrally accurate in θ.
    Fourier,
    /// Second-order central differences.
    FiniteDifference,
}

/// Rings ρᵢ = (i + ½)h, i < n_rho, with h = R/(n_rho + ½), so that the
/// homogeneous Dirichlet node sits exactly at ρ = R.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PolarGrid {
    pub r_outer: f64,
    pub n_rho: usize,
    pub n_theta: usize,
}

impl PolarGrid {
    pub fn h(&self) -> f64 {
        self.r_outer / (self.n_rho as f64 + 0.5)
    }

    pub fn dtheta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn rho(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, c: usize) -> usize {
        FIELDS * self.node(i, j) + c
    }

    pub fn nodes(&self) -> usize {
        self.n_rho * self.n_theta
    }

    pub fn unknowns(&self) -> usize {
        FIELDS * self.nodes()
    }

    /// Quadrature weight ρᵢ h Δθ of a node.
    pub fn weight(&self, i: usize) -> f64 {
        self.rho(i) * self.h() * self.dtheta()
    }

    /// Sample a 4-field given as a function of Cartesian t = (t¹, t²).
    pub fn sample<F: Fn([f64; 2]) -> [f64; 4]>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.unknowns()];
        for i in 0..self.n_rho {
            for j in 0..self.n_theta {
                let (r, th) = (self.rho(i), self.theta(j));
                let v = f([r * th.cos(), r * th.sin()]);
                for c in 0..FIELDS {
                    out[self.index(i, j, c)] = v[c];
                }
            }
        }
        out
    }
}

/// Entries (k, D[j][k]) of the first and second θ-derivative matrices.
fn theta_matrices(n: usize, scheme: ThetaScheme) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dth = TAU / n as f64;
    let mut d1 = vec![vec![0.0; n]; n];
    let mut d2 = vec![vec![0.0; n]; n];
    match scheme {
        ThetaScheme::Fourier => {
            for j in 0..n {
                for k in 0..n {
                    if j == k {
                        d2[j][k] = -PI * PI / (3.0 * dth * dth) - 1.0 / 6.0;
                    } else {
                        let x = (j as f64 - k as f64) * dth / 2.0;
                        let sign = if (j + n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                        d1[j][k] = 0.5 * sign / x.tan();
                        d2[j][k] = -sign / (2.0 * x.sin().powi(2));
                    }
                }
            }
        }
        ThetaScheme::FiniteDifference => {
            for j in 0..n {
                let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
                d1[j][jp] += 0.5 / dth;
                d1[j][jm] -= 0.5 / dth;
                d2[j][jp] += 1.0 / (dth * dth);
                d2[j][jm] += 1.0 / (dth * dth);
                d2[j][j] -= 2.0 / (dth * dth);
            }
        }
    }
    (d1, d2)
}

/// Dense θ-derivative of ring samples.
fn apply_theta(d: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    d.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Profile data needed by the operator at one radius.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    jet: ProfileJet,
    r: f64,
}

impl Coeffs {
    fn q(&self) -> f64 {
        (1.0 - self.jet.a) * self.jet.f / self.r
    }
    fn b(&self) -> f64 {
        self.jet.da / self.r
    }
}

/// D_k u = e^{iθ}(f′ r̂_k + i q θ̂_k), as (Re, Im) per k.
fn covariant_gradient(c: &Coeffs, th: f64) -> [[f64; 2]; 2] {
    let (s, co) = th.sin_cos();
    let rh = [co, s];
    let thh = [-s, co];
    let fp = c.jet.df;
    let q = c.q();
    let mut g = [[0.0; 2]; 2];
    for k in 0..2 {
        let (re, im) = (fp * rh[k], q * thh[k]);
        g[k] = [co * re - s * im, s * re + co * im];
    }
    g
}

/// ∇_{β,U₀}U₀ = 𝖵_β at (ρ, θ).
pub fn nabla_first(profile: &RadialProfile, beta: usize, t: [f64; 2]) -> [f64; 4] {
    let r = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if r >= profile.r_max {
        return [0.0; 4];
    }
    let th = t[1].atan2(t[0]);
    let c = Coeffs { jet: profile.jet(r.max(1e-300)), r: r.max(1e-300) };
    let g = covariant_gradient(&c, th);
    let b = c.b();
    let omega = if beta == 0 { [0.0, b] } else { [-b, 0.0] };
    [g[beta][0], g[beta][1], omega[0], omega[1]]
}

/// Symmetrized second covariant derivative ∇_{βγ,U₀}U₀ at t.
pub fn nabla_second(profile: &RadialProfile, beta: usize, gamma: usize, t: [f64; 2]) -> [f64; 4] {
    let r = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if r >= profile.r_max {
        return [0.0; 4];
    }
    let th = t[1].atan2(t[0]);
    let rr = r.max(1e-300);
    let jet = profile.jet(rr);
    let (f, a, fp, ap, fpp) = (jet.f, jet.a, jet.df, jet.da, jet.d2f);
    let q = (1.0 - a) * f / rr;
    let qp = -ap * f / rr + (1.0 - a) * fp / rr - q / rr;
    let (s, co) = th.sin_cos();
    let rh = [co, s];
    let thh = [-s, co];
    // D_j G_k = e^{iθ}(α r̂r̂ + iβ r̂θ̂ + iγ θ̂r̂ + δ θ̂θ̂)
    let c_rr = fpp;
    let c_rt = qp;
    let c_tr = ((1.0 - a) * fp - q) / rr;
    let c_tt = (fp - (1.0 - a) * q) / rr;
    let entry = |j: usize, k: usize| -> (f64, f64) {
        let re = c_rr * rh[j] * rh[k] + c_tt * thh[j] * thh[k];
        let im = c_rt * rh[j] * thh[k] + c_tr * thh[j] * rh[k];
        (co * re - s * im, s * re + co * im)
    };
    let (p, q2) = (entry(beta, gamma), entry(gamma, beta));
    let bp = -f * f * (1.0 - a) / rr;
    let eps = |x: usize, y: usize| -> f64 {
        match (x, y) {
            (0, 1) => 1.0,
            (1, 0) => -1.0,
            _ => 0.0,
        }
    };
    let omega = |d: usize| 0.5 * bp * (rh[beta] * eps(gamma, d) + rh[gamma] * eps(beta, d));
    [0.5 * (p.0 + q2.0), 0.5 * (p.1 + q2.1), omega(0), omega(1)]
}

/// Assembled operator with its mass weights and kernel samples.
pub struct LinearizedSystem {
    pub grid: PolarGrid,
    pub scheme: ThetaScheme,
    /// 𝖫 acting on nodal values.
    pub operator: Csr,
    /// Quadrature weight per unknown.
    pub mass: Vec<f64>,
    /// Sampled 𝖵₁, 𝖵₂.
    pub kernel: [Vec<f64>; 2],
    entries: Vec<(usize, usize, f64)>,
    d1: Vec<Vec<f64>>,
    coeffs: Vec<Coeffs>,
    profile_r_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectedSolution {
    pub phi: Vec<f64>,
    pub multipliers: [f64; 2],
    pub orthogonality_defects: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct Eigenpair {
    pub value: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
}

pub fn assemble_l(profile: &RadialProfile, r_outer: f64, n_rho: usize, n_theta: usize) -> Result<LinearizedSystem> {
    assemble_l_with(profile, r_outer, n_rho, n_theta, ThetaScheme::Fourier)
}

pub fn assemble_l_with(
    profile: &RadialProfile,
    r_outer: f64,
    n_rho: usize,
    n_theta: usize,
    scheme: ThetaScheme,
) -> Result<LinearizedSystem> {
    if !(r_outer > 0.0) || r_outer > profile.r_max + 1e-12 {
        return Err(Error::InvalidGrid(format!("disk radius {r_outer} must lie in (0, r_max = {}]", profile.r_max)));
    }
    if n_rho < 32 || n_theta < 8 || !n_theta.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("polar grid {n_rho} x {n_theta} too small or odd")));
    }
    let grid = PolarGrid { r_outer, n_rho, n_theta };
    let (d1, d2) = theta_matrices(n_theta, scheme);
    let h = grid.h();
    let coeffs: Vec<Coeffs> = (0..n_rho)
        .map(|i| {
            let r = grid.rho(i);
            Coeffs { jet: profile.jet(r), r }
        })
        .collect();
    let mut entries = Vec::with_capacity(grid.unknowns() * (2 * n_theta + 8));
    let mut push = |i: usize, j: usize, v: f64| {
        if v != 0.0 {
            entries.push((i, j, v));
        }
    };
    for i in 0..n_rho {
        let c = coeffs[i];
        let r = c.r;
        let (f, a) = (c.jet.f, c.jet.a);
        let r_in = i as f64 * h;
        let r_out = (i + 1) as f64 * h;
        let w_in = r_in / (r * h * h);
        let w_out = r_out / (r * h * h);
        let pot_phi = (a / r).powi(2) - 0.5 * (1.0 - 3.0 * f * f);
        let pot_omega = f * f;
        let rot = 2.0 * a / (r * r);
        for j in 0..n_theta {
            let g = covariant_gradient(&c, grid.theta(j));
            for comp in 0..FIELDS {
                let row = grid.index(i, j, comp);
                // −∂ᵣ² − ∂ᵣ/r in flux form
                push(row, row, w_in + w_out);
                if i > 0 {
                    push(row, grid.index(i - 1, j, comp), -w_in);
                }
                if i + 1 < n_rho {
                    push(row, grid.index(i + 1, j, comp), -w_out);
                }
                for k in 0..n_theta {
                    push(row, grid.index(i, k, comp), -d2[j][k] / (r * r));
                }
                let pot = if comp < 2 { pot_phi } else { pot_omega };
                push(row, row, pot);
            }
            let p1 = grid.index(i, j, 0);
            let p2 = grid.index(i, j, 1);
            for k in 0..n_theta {
                push(p1, grid.index(i, k, 1), -rot * d1[j][k]);
                push(p2, grid.index(i, k, 0), rot * d1[j][k]);
            }
            for k in 0..2 {
                let wk = grid.index(i, j, 2 + k);
                push(p1, wk, -2.0 * g[k][1]);
                push(p2, wk, 2.0 * g[k][0]);
                push(wk, p1, -2.0 * g[k][1]);
                push(wk, p2, 2.0 * g[k][0]);
            }
        }
    }
    let n = grid.unknowns();
    let operator = Csr::from_triplets(n, n, &entries);
    let mut mass = vec![0.0; n];
    for i in 0..n_rho {
        for j in 0..n_theta {
            for comp in 0..FIELDS {
                mass[grid.index(i, j, comp)] = grid.weight(i);
            }
        }
    }
    let kernel = [grid.sample(|t| nabla_first(profile, 0, t)), grid.sample(|t| nabla_first(profile, 1, t))];
    Ok(LinearizedSystem { grid, scheme, operator, mass, kernel, entries, d1, coeffs, profile_r_max: profile.r_max })
}

impl LinearizedSystem {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.operator.apply(x)
    }

    /// Mass-weighted inner product.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.mass).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).sqrt()
    }

    /// max |K − Kᵀ| / max |K| for K = diag(mass)·𝖫.
    pub fn symmetry_defect(&self) -> f64 {
        let k = self.weighted_entries(0.0);
        let csr = Csr::from_triplets(self.grid.unknowns(), self.grid.unknowns(), &k);
        let scale = k.iter().fold(0.0f64, |m, e| m.max(e.2.abs()));
        csr.asymmetry() / scale
    }

    fn weighted_entries(&self, sigma: f64) -> Vec<(usize, usize, f64)> {
        let mut out: Vec<(usize, usize, f64)> = self.entries.iter().map(|&(i, j, v)| (i, j, v * self.mass[i])).collect();
        if sigma != 0.0 {
            for (i, w) in self.mass.iter().enumerate() {
                out.push((i, i, -sigma * w));
            }
        }
        out
    }

    /// Sup of |𝖫𝖵_α| over rings with ρ ≤ R − `exclude`.
    pub fn kernel_residual(&self, alpha: usize, exclude: f64) -> f64 {
        let lv = self.apply(&self.kernel[alpha]);
        self.sup_inside(&lv, self.grid.r_outer - exclude)
    }

    pub fn sup_inside(&self, v: &[f64], radius: f64) -> f64 {
        let mut sup = 0.0f64;
        for i in 0..self.grid.n_rho {
            if self.grid.rho(i) > radius {
                break;
            }
            for j in 0..self.grid.n_theta {
                for c in 0..FIELDS {
                    sup = sup.max(v[self.grid.index(i, j, c)].abs());
                }
            }
        }
        sup
    }

    /// Fraction of the mass norm of `v` lying in span{𝖵₁, 𝖵₂}.
    pub fn kernel_alignment(&self, v: &[f64]) -> f64 {
        let q = self.kernel_basis();
        let proj: f64 = q.iter().map(|b| self.inner(v, b).powi(2)).sum();
        (proj / self.inner(v, v)).sqrt()
    }

    fn kernel_basis(&self) -> Vec<Vec<f64>> {
        let mut q: Vec<Vec<f64>> = Vec::new();
        for k in &self.kernel {
            let mut u = k.clone();
            for b in &q {
                let c = self.inner(&u, b);
                u.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let n = self.norm(&u);
            u.iter_mut().for_each(|x| *x /= n);
            q.push(u);
        }
        q
    }

    /// Factorization of the bordered system [[K − σW, W𝖵], [𝖵ᵀW, 0]],
    /// applied through its 2×2 Schur complement.
    fn bordered(&self, sigma: f64) -> Result<Bordered> {
        let lu = SparseLu::new(self.grid.unknowns(), &self.weighted_entries(sigma))?;
        let wv: Vec<Vec<f64>> = self.kernel.iter().map(|v| v.iter().zip(&self.mass).map(|(x, w)| x * w).collect()).collect();
        let z = lu.solve_many(&wv)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let s = [[dot(&wv[0], &z[0]), dot(&wv[0], &z[1])], [dot(&wv[1], &z[0]), dot(&wv[1], &z[1])]];
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::SolverFailure("singular kernel Schur complement".into()));
        }
        let s_inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        Ok(Bordered { lu, wv, z, s_inv })
    }

    /// Solve 𝖫Φ + Σ λ_α𝖵_α = Ψ with ∫Φ·𝖵_α = 0.
    pub fn solve_projected(&self, rhs: &[f64]) -> Result<ProjectedSolution> {
        let b = self.bordered(0.0)?;
        self.solve_projected_with(&b, rhs)
    }

    fn solve_projected_with(&self, b: &Bordered, rhs: &[f64]) -> Result<ProjectedSolution> {
        let wr: Vec<f64> = rhs.iter().zip(&self.mass).map(|(x, w)| x * w).collect();
        let (phi, mu) = b.solve(&wr)?;
        let defects = [self.inner(&phi, &self.kernel[0]), self.inner(&phi, &self.kernel[1])];
        Ok(ProjectedSolution { phi, multipliers: mu, orthogonality_defects: defects })
    }

    /// `count` eigenvalues of 𝖫 closest to `sigma` from above, by
    /// shift-invert Lanczos; with `constrained`, on the mass-orthogonal
    /// complement of span{𝖵₁, 𝖵₂}.
    pub fn low_spectrum(&self, count: usize, sigma: f64, constrained: bool) -> Result<Vec<Eigenpair>> {
        let n = self.grid.unknowns();
        let steps = (4 * count + 60).min(n);
        let deflate = if constrained { self.kernel_basis() } else { Vec::new() };
        let op: Box<dyn Fn(&[f64]) -> Result<Vec<f64>>> = if constrained {
            let bd = self.bordered(sigma)?;
            Box::new(move |x: &[f64]| {
                let b: Vec<f64> = x.iter().zip(&self.mass).map(|(a, w)| a * w).collect();
                Ok(bd.solve(&b)?.0)
            })
        } else {
            let lu = SparseLu::new(n, &self.weighted_entries(sigma))?;
            Box::new(move |x: &[f64]| {
                let b: Vec<f64> = x.iter().zip(&self.mass).map(|(a, w)| a * w).collect();
                lu.solve(&b)
            })
        };
        let start: Vec<f64> = (0..n).map(|k| ((k as f64 * 0.754_877_666).fract() - 0.5) + 0.1 * (k as f64 * 1.3).sin()).collect();
        let ritz = lanczos(&|x, y| self.inner(x, y), &*op, start, &deflate, steps)?;
        let mut pairs: Vec<Eigenpair> =
            ritz.into_iter().filter(|(nu, _)| *nu > 0.0).map(|(nu, v)| Eigenpair { value: sigma + 1.0 / nu, vector: v }).collect();
        pairs.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
        pairs.truncate(count);
        if pairs.len() < count {
            return Err(Error::EigenFailure(format!("only {} Ritz values converged", pairs.len())));
        }
        Ok(pairs)
    }

    /// Smallest Rayleigh quotient of 𝖫 on the complement of the kernel.
    pub fn coercivity_constant(&self) -> Result<f64> {
        let lo = self.low_spectrum(1, -0.5, true)?;
        let c = lo[0].value;
        if !(c > 0.0) {
            return Err(Error::EigenFailure(format!("constrained eigenvalue {c} is not positive")));
        }
        Ok(c)
    }

    /// d*ω + ⟨φ, iu⟩ at every node, and its discrete L² norm; profile is the
    /// one used for assembly.
    pub fn goc_defect(&self, field: &[f64]) -> (Vec<f64>, f64) {
        let g = self.grid;
        let h = g.h();
        let half = g.n_theta / 2;
        let mut out = vec![0.0; g.nodes()];
        let val = |i: isize, j: usize, c: usize| -> f64 {
            if i < 0 {
                field[g.index((-i - 1) as usize, (j + half) % g.n_theta, c)]
            } else if i as usize >= g.n_rho {
                0.0
            } else {
                field[g.index(i as usize, j, c)]
            }
        };
        for i in 0..g.n_rho {
            let cf = self.coeffs[i];
            let r = cf.r;
            // the ghost across the axis sits at signed radius −ρ₀, i.e. a distance h from ρ₀
            let ring: Vec<[f64; 2]> = (0..g.n_theta).map(|j| [val(i as isize, j, 2), val(i as isize, j, 3)]).collect();
            let dth: Vec<Vec<f64>> = (0..2).map(|c| apply_theta(&self.d1, &ring.iter().map(|w| w[c]).collect::<Vec<_>>())).collect();
            for j in 0..g.n_theta {
                let th = g.theta(j);
                let (s, co) = th.sin_cos();
                let dr = |c: usize| {
                    let plus = val(i as isize + 1, j, c);
                    let minus = if i == 0 {
                        // value at the physical point (ρ₀, θ + π) equals the field at signed radius −ρ₀
                        val(-1, j, c)
                    } else {
                        val(i as isize - 1, j, c)
                    };
                    (plus - minus) / (2.0 * h)
                };
                let div = co * dr(2) - s / r * dth[0][j] + s * dr(3) + co / r * dth[1][j];
                let f = cf.jet.f;
                let phi1 = val(i as isize, j, 0);
                let phi2 = val(i as isize, j, 1);
                out[g.node(i, j)] = -div + f * (-s * phi1 + co * phi2);
            }
        }
        let l2 = (0..g.n_rho).map(|i| (0..g.n_theta).map(|j| out[g.node(i, j)].powi(2)).sum::<f64>() * g.weight(i)).sum::<f64>().sqrt();
        (out, l2)
    }

    /// Interpolating evaluator for a nodal 4-field.
    pub fn polar_field(&self, values: &[f64]) -> PolarField {
        PolarField::new(self.grid, values)
    }

    pub fn profile_r_max(&self) -> f64 {
        self.profile_r_max
    }
}

struct Bordered {
    lu: SparseLu,
    wv: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    s_inv: [[f64; 2]; 2],
}

impl Bordered {
    /// Returns (y, μ) with (K − σW)y + W𝖵μ = b and 𝖵ᵀW y = 0.
    fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, [f64; 2])> {
        let mut y = self.lu.solve(b)?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let g = [dot(&self.wv[0], &y), dot(&self.wv[1], &y)];
        let mu = [self.s_inv[0][0] * g[0] + self.s_inv[0][1] * g[1], self.s_inv[1][0] * g[0] + self.s_inv[1][1] * g[1]];
        for (k, yk) in y.iter_mut().enumerate() {
            *yk -= mu[0] * self.z[0][k] + mu[1] * self.z[1][k];
        }
        Ok((y, mu))
    }
}

/// Shift-invert Lanczos with full reorthogonalization in the inner product
/// `ip`; returns Ritz pairs (ν, vector).
fn lanczos(
    ip: &dyn Fn(&[f64], &[f64]) -> f64,
    op: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    start: Vec<f64>,
    deflate: &[Vec<f64>],
    steps: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let orth = |v: &mut Vec<f64>, basis: &[Vec<f64>]| {
        for _ in 0..2 {
            for b in basis {
                let c = ip(v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
    };
    let mut q0 = start;
    orth(&mut q0, deflate);
    let n0 = ip(&q0, &q0).sqrt();
    q0.iter_mut().for_each(|x| *x /= n0);
    let mut qs = vec![q0];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last_b = 0.0;
    for k in 0..steps {
        let mut w = op(&qs[k])?;
        orth(&mut w, deflate);
        let a = ip(&w, &qs[k]);
        alpha.push(a);
        orth(&mut w, &qs);
        let b = ip(&w, &w).sqrt();
        if k + 1 == steps || b < 1e-12 * a.abs().max(1e-300) {
            last_b = b;
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        qs.push(w);
    }
    let m = alpha.len();
    let t = nalgebra::DMatrix::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::new(t);
    let nu_max = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let y = eig.eigenvectors.column(k);
        // discard poorly converged Ritz values via the Lanczos residual bound
        let resid = (last_b * y[m - 1]).abs();
        let nu = eig.eigenvalues[k];
        if resid > 1e-5 * nu_max && m > 1 {
            continue;
        }
        let mut v = vec![0.0; qs[0].len()];
        for (j, q) in qs.iter().take(m).enumerate() {
            v.iter_mut().zip(q).for_each(|(x, z)| *x += y[j] * z);
        }
        out.push((nu, v));
    }
    Ok(out)
}

/// Smallest eigenvalue of −Δ + f² on scalars, Dirichlet at R.
pub fn scalar_block_coercivity(profile: &RadialProfile, r_outer: f64, n_rho: usize, n_theta: usize) -> Result<f64> {
    let sys = assemble_l(profile, r_outer, n_rho, n_theta)?;
    // restrict to the ω₁ component, which only sees −Δ + f² after dropping couplings
    let g = sys.grid;
    let n = g.nodes();
    let map = |i: usize, j: usize| g.node(i, j);
    let mut t = Triplets::new(n, n);
    let mut mass = vec![0.0; n];
    for &(row, col, v) in &sys.entries {
        if row % FIELDS == 2 && col % FIELDS == 2 {
            let (rn, cn) = (row / FIELDS, col / FIELDS);
            t.push(rn, cn, v * g.weight(rn / g.n_theta));
        }
    }
    for i in 0..g.n_rho {
        for j in 0..g.n_theta {
            mass[map(i, j)] = g.weight(i);
        }
    }
    let sigma = -0.5;
    for k in 0..n {
        t.push(k, k, -sigma * mass[k]);
    }
    let lu = t.lu()?;
    let ip = |x: &[f64], y: &[f64]| x.iter().zip(y).zip(&mass).map(|((a, b), w)| a * b * w).sum::<f64>();
    let op = |x: &[f64]| {
        let b: Vec<f64> = x.iter().zip(&mass).map(|(a, w)| a * w).collect();
        lu.solve(&b)
    };
    let start: Vec<f64> = (0..n).map(|k| 1.0 + 0.1 * (k as f64 * 0.37).sin()).collect();
    let ritz = lanczos(&ip, &op, start, &[], 40.min(n))?;
    ritz.iter()
        .filter(|(nu, _)| *nu > 0.0)
        .map(|(nu, _)| sigma + 1.0 / nu)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
        .ok_or_else(|| Error::EigenFailure("no Ritz value for the scalar block".into()))
}

/// Smooth evaluator of a nodal 4-field: natural cubic splines along each
/// diameter (vanishing at ρ = ±R) and trigonometric interpolation in θ.
#[derive(Debug, Clone)]
pub struct PolarField {
    pub grid: PolarGrid,
    splines: Vec<[CubicSpline; FIELDS]>,
}

impl PolarField {
    pub fn new(grid: PolarGrid, values: &[f64]) -> Self {
        let (n, m) = (grid.n_rho, grid.n_theta);
        let half = m / 2;
        let mut xs = Vec::with_capacity(2 * n + 2);
        xs.push(-grid.r_outer);
        for i in (0..n).rev() {
            xs.push(-grid.rho(i));
        }
        for i in 0..n {
            xs.push(grid.rho(i));
        }
        xs.push(grid.r_outer);
        let splines = (0..half)
            .map(|d| {
                std::array::from_fn(|c| {
                    let mut ys = Vec::with_capacity(2 * n + 2);
                    ys.push(0.0);
                    for i in (0..n).rev() {
                        ys.push(values[grid.index(i, d + half, c)]);
                    }
                    for i in 0..n {
                        ys.push(values[grid.index(i, d, c)]);
                    }
                    ys.push(0.0);
                    CubicSpline::natural(xs.clone(), ys)
                })
            })
            .collect();
        PolarField { grid, splines }
    }

    /// Value at Cartesian t; zero for |t| ≥ R.
    pub fn eval(&self, t: [f64; 2]) -> [f64; 4] {
        let r = (t[0] * t[0] + t[1] * t[1]).sqrt();
        if r >= self.grid.r_outer {
            return [0.0; 4];
        }
        let m = self.grid.n_theta;
        let half = m / 2;
        let th = t[1].atan2(t[0]).rem_euclid(TAU);
        let mut w = vec![0.0; m];
        trig_weights(m, th, &mut w);
        let mut out = [0.0; 4];
        for (d, sp) in self.splines.iter().enumerate() {
            for c in 0..FIELDS {
                let plus = sp[c].eval(r);
                let minus = sp[c].eval(-r);
                out[c] += w[d] * plus + w[d + half] * minus;
            }
        }
        out
    }
}

/// Fiberwise improvement terms: 𝖫Λ₁ = t¹𝖵₁ and 𝖫Λ₁₁ = ∇₁₁U₀, both
/// mass-orthogonal to the kernel.
pub struct LambdaTerms {
    pub lambda1: PolarField,
    pub lambda11: PolarField,
    pub multipliers: [[f64; 2]; 2],
    pub nodal: [Vec<f64>; 2],
}

impl LambdaTerms {
    /// Λ = −|𝒜|²Λ₁ + |∇h|²Λ₁₁ at t.
    pub fn combine(&self, a_norm2: f64, grad_h2: f64, t: [f64; 2]) -> [f64; 4] {
        let l1 = self.lambda1.eval(t);
        let l11 = if grad_h2 != 0.0 { self.lambda11.eval(t) } else { [0.0; 4] };
        std::array::from_fn(|c| -a_norm2 * l1[c] + grad_h2 * l11[c])
    }
}

pub fn solve_lambda(profile: &RadialProfile, r_outer: f64, n_rho: usize, n_theta: usize) -> Result<LambdaTerms> {
    let sys = assemble_l(profile, r_outer, n_rho, n_theta)?;
    let lu = sys.bordered(0.0)?;
    let rhs1 = sys.grid.sample(|t| {
        let v = nabla_first(profile, 0, t);
        v.map(|x| t[0] * x)
    });
    let rhs11 = sys.grid.sample(|t| nabla_second(profile, 0, 0, t));
    let s1 = sys.solve_projected_with(&lu, &rhs1)?;
    let s11 = sys.solve_projected_with(&lu, &rhs11)?;
    Ok(LambdaTerms {
        lambda1: sys.polar_field(&s1.phi),
        lambda11: sys.polar_field(&s11.phi),
        multipliers: [s1.multipliers, s11.multipliers],
        nodal: [s1.phi, s11.phi],
    })
}
