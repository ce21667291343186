//! Fermi coordinates X(ξ, z) = y(ξ) + z¹ν₁(ξ) + z²e₄ around a surface in
//! R³ × R, and the shifted, stretched version
//! X_{ε,h}(ξ, t) = ε⁻¹y(ξ) + (t¹ + h¹(ξ))ν₁(ξ) + (t² + h²(ξ))e₄.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::surface::{det2, mul2, ChartGrid, Mat2, SurfaceChart};
use serde::Serialize;
use std::sync::Arc;

pub type Vec4<T> = [T; 4];

/// Normal shift h = (h¹, h²) over the chart parameters.
pub trait ShiftField<T: Real>: Send + Sync {
    fn value(&self, xi: [T; 2]) -> [T; 2];
    /// grad[β][i] = ∂ᵢ h^β.
    fn gradient(&self, xi: [T; 2]) -> [[T; 2]; 2];
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroShift;

impl<T: Real> ShiftField<T> for ZeroShift {
    fn value(&self, _xi: [T; 2]) -> [T; 2] {
        [T::zero(); 2]
    }
    fn gradient(&self, _xi: [T; 2]) -> [[T; 2]; 2] {
        [[T::zero(); 2]; 2]
    }
}

/// h¹ = scale·(s tanh s − 1), h² = 0 on a chart with ξ¹ = s (catenoid).
#[derive(Debug, Clone, Copy)]
pub struct CatenoidLogShift<T> {
    pub scale: T,
}

impl<T: Real> ShiftField<T> for CatenoidLogShift<T> {
    fn value(&self, xi: [T; 2]) -> [T; 2] {
        let s = xi[0];
        [self.scale * (s * s.tanh() - T::one()), T::zero()]
    }
    fn gradient(&self, xi: [T; 2]) -> [[T; 2]; 2] {
        let s = xi[0];
        let sech = T::one() / s.cosh();
        [[self.scale * (s.tanh() + s * sech * sech), T::zero()], [T::zero(); 2]]
    }
}

/// Principal curvatures per normal direction and their moments.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvatureData<T> {
    /// k[ℓ][β]
    pub k: [[T; 2]; 2],
    /// h_mn[m][n] = Σ_ℓ k_{ℓ1}^m k_{ℓ2}^n for m + n ≤ 3, zero elsewhere.
    pub h_mn: [[T; 4]; 4],
}

/// Exact and quadratic-expansion values of H_z^β.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalCurvature<T> {
    pub exact: T,
    pub quadratic: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionSample {
    pub xi: [f64; 2],
    pub z: [f64; 2],
    #[serde(rename = "H_exact")]
    pub h_exact: [f64; 2],
    #[serde(rename = "H_quadratic")]
    pub h_quadratic: [f64; 2],
    pub remainder: [f64; 2],
}

pub struct FermiFrame<T: Real> {
    pub chart: Arc<dyn SurfaceChart<T>>,
    pub eps: T,
    pub shift: Arc<dyn ShiftField<T>>,
    /// τ(y) = δ log(1 + r(y)).
    pub delta: T,
}

impl<T: Real> Clone for FermiFrame<T> {
    fn clone(&self) -> Self {
        Self { chart: self.chart.clone(), eps: self.eps, shift: self.shift.clone(), delta: self.delta }
    }
}

fn sub3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn solve3<T: Real>(m: [[T; 3]; 3], b: [T; 3]) -> Option<[T; 3]> {
    let det = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d == T::zero() || !d.is_finite() {
        return None;
    }
    let mut out = [T::zero(); 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *o = det(mc) / d;
    }
    Some(out)
}

impl<T: Real> FermiFrame<T> {
    pub fn new(chart: Arc<dyn SurfaceChart<T>>, eps: T) -> Result<Self> {
        Self::with_shift(chart, eps, Arc::new(ZeroShift), T::c(0.2))
    }

    pub fn with_shift(chart: Arc<dyn SurfaceChart<T>>, eps: T, shift: Arc<dyn ShiftField<T>>, delta: T) -> Result<Self> {
        if !(eps > T::zero()) || !(delta > T::zero()) {
            return Err(Error::InvalidGrid(format!("need eps > 0 and delta > 0, got {eps:?}, {delta:?}")));
        }
        Ok(Self { chart, eps, shift, delta })
    }

    pub fn grid(&self) -> ChartGrid<T> {
        self.chart.grid()
    }

    pub fn tau(&self, xi: [T; 2]) -> T {
        self.delta * (T::one() + self.chart.radius(xi)).ln()
    }

    /// Unscaled X(ξ, z).
    pub fn fermi_point(&self, xi: [T; 2], z: [T; 2]) -> Vec4<T> {
        let y = self.chart.position(xi);
        let n = self.chart.normal(xi);
        [y[0] + z[0] * n[0], y[1] + z[0] * n[1], y[2] + z[0] * n[2], z[1]]
    }

    /// X_{ε,h}(ξ, t), with ξ the chart parameter of the point εy.
    pub fn fermi_map(&self, xi: [T; 2], t: [T; 2]) -> Result<Vec4<T>> {
        let h = self.shift.value(xi);
        let w = [t[0] + h[0], t[1] + h[1]];
        let tau = self.tau(xi);
        if (w[0] * w[0] + w[1] * w[1]).sqrt() >= tau / self.eps {
            return Err(Error::OutsideTube(format!(
                "|t + h| = {:?} exceeds tau/eps = {:?}",
                (w[0] * w[0] + w[1] * w[1]).sqrt(),
                tau / self.eps
            )));
        }
        Ok(self.map_unchecked(xi, t))
    }

    pub fn map_unchecked(&self, xi: [T; 2], t: [T; 2]) -> Vec4<T> {
        let h = self.shift.value(xi);
        let y = self.chart.position(xi);
        let n = self.chart.normal(xi);
        let e = T::one() / self.eps;
        let w = t[0] + h[0];
        [e * y[0] + w * n[0], e * y[1] + w * n[1], e * y[2] + w * n[2], t[1] + h[1]]
    }

    /// Inverse of `fermi_map` by damped Newton from `chart.initial_guess`.
    pub fn fermi_invert(&self, x: Vec4<T>) -> Result<([T; 2], [T; 2])> {
        let (xi, t) = self.fermi_invert_focal(x)?;
        let h = self.shift.value(xi);
        let (w1, w2) = (t[0] + h[0], t[1] + h[1]);
        if (w1 * w1 + w2 * w2).sqrt() >= self.tau(xi) / self.eps {
            return Err(Error::OutsideTube("point lies outside the Fermi tube".into()));
        }
        Ok((xi, t))
    }

    /// Inversion without the τ bound; fails only past the focal distance,
    /// where the normal map stops being a local diffeomorphism.
    pub fn fermi_invert_focal(&self, x: Vec4<T>) -> Result<([T; 2], [T; 2])> {
        let target = [self.eps * x[0], self.eps * x[1], self.eps * x[2]];
        let mut xi = self.chart.initial_guess(target);
        let mut w = dot3(sub3(target, self.chart.position(xi)), self.chart.normal(xi));
        let resid = |xi: [T; 2], w: T| -> [T; 3] {
            let y = self.chart.position(xi);
            let n = self.chart.normal(xi);
            [y[0] + w * n[0] - target[0], y[1] + w * n[1] - target[1], y[2] + w * n[2] - target[2]]
        };
        let norm = |r: [T; 3]| dot3(r, r).sqrt();
        let scale = T::one() + norm(target);
        let tol = T::epsilon() * T::c(64.0) * scale;
        let mut r = resid(xi, w);
        let mut converged = norm(r) <= tol;
        for _ in 0..60 {
            if converged {
                break;
            }
            let tg = self.chart.tangents(xi);
            let dn = self.chart.normal_derivatives(xi);
            let n = self.chart.normal(xi);
            let mut jm = [[T::zero(); 3]; 3];
            for row in 0..3 {
                jm[row][0] = tg[0][row] + w * dn[0][row];
                jm[row][1] = tg[1][row] + w * dn[1][row];
                jm[row][2] = n[row];
            }
            let step = solve3(jm, [-r[0], -r[1], -r[2]]).ok_or_else(|| Error::SingularTube(w.to_f64().unwrap_or(f64::NAN)))?;
            let mut lam = T::one();
            let r0 = norm(r);
            loop {
                let xn = [xi[0] + lam * step[0], xi[1] + lam * step[1]];
                let wn = w + lam * step[2];
                let rn = resid(xn, wn);
                if norm(rn) < r0 || lam < T::c(1e-4) {
                    xi = xn;
                    w = wn;
                    r = rn;
                    break;
                }
                lam = lam * T::c(0.5);
            }
            converged = norm(r) <= tol;
        }
        if !converged {
            return Err(Error::OutsideTube(format!("Fermi inversion did not converge (residual {:?})", norm(r))));
        }
        let g = self.chart.grid();
        for d in 0..2 {
            if g.periodic[d] {
                let len = g.hi[d] - g.lo[d];
                while xi[d] < g.lo[d] {
                    xi[d] = xi[d] + len;
                }
                while xi[d] >= g.hi[d] {
                    xi[d] = xi[d] - len;
                }
            }
        }
        for k in self.chart.principal_curvatures(xi) {
            if !(T::one() - w * k > T::zero()) {
                return Err(Error::SingularTube((T::one() - w * k).to_f64().unwrap_or(f64::NAN)));
            }
        }
        let h = self.shift.value(xi);
        Ok((xi, [w / self.eps - h[0], x[3] - h[1]]))
    }

    /// I − z¹𝒜₁ (𝒜₂ = 0 for the flat fourth direction).
    fn tube_factor(&self, xi: [T; 2], z: [T; 2]) -> Mat2<T> {
        let s = self.chart.shape_operator(xi);
        [[T::one() - z[0] * s[0][0], -z[0] * s[0][1]], [-z[0] * s[1][0], T::one() - z[0] * s[1][1]]]
    }

    /// g_z = g(I − z^γ𝒜_γ)².
    pub fn metric_gz(&self, xi: [T; 2], z: [T; 2]) -> Result<Mat2<T>> {
        let p = self.tube_factor(xi, z);
        let d = det2(p);
        if !(d > T::zero()) {
            return Err(Error::SingularTube(d.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(mul2(self.chart.metric(xi), mul2(p, p)))
    }

    /// Full metric of X(ξ, z) in coordinates (ξ¹, ξ², z¹, z²): g_z ⊕ I₂.
    pub fn metric_full(&self, xi: [T; 2], z: [T; 2]) -> Result<[[T; 4]; 4]> {
        let gz = self.metric_gz(xi, z)?;
        let mut m = [[T::zero(); 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = gz[i][j];
            }
        }
        m[2][2] = T::one();
        m[3][3] = T::one();
        Ok(m)
    }

    pub fn curvature_moments(&self, xi: [T; 2]) -> CurvatureData<T> {
        let kc = self.chart.principal_curvatures(xi);
        let k = [[kc[0], T::zero()], [kc[1], T::zero()]];
        let mut h_mn = [[T::zero(); 4]; 4];
        for m in 0..4 {
            for n in 0..4 - m {
                h_mn[m][n] = (0..2).fold(T::zero(), |acc, l| acc + k[l][0].powi(m as i32) * k[l][1].powi(n as i32));
            }
        }
        CurvatureData { k, h_mn }
    }

    /// H_z^β = Σ_ℓ k_{ℓβ}/(1 − z^γ k_{ℓγ}), and its quadratic expansion.
    pub fn mean_curvature_normal(&self, xi: [T; 2], z: [T; 2], beta: usize) -> Result<NormalCurvature<T>> {
        let cd = self.curvature_moments(xi);
        let mut exact = T::zero();
        for l in 0..2 {
            let den = T::one() - z[0] * cd.k[l][0] - z[1] * cd.k[l][1];
            if !(den > T::zero()) {
                return Err(Error::SingularTube(den.to_f64().unwrap_or(f64::NAN)));
            }
            exact = exact + cd.k[l][beta] / den;
        }
        let h = cd.h_mn;
        let two = T::c(2.0);
        let (z1, z2) = (z[0], z[1]);
        let quadratic = if beta == 0 {
            h[1][0] + z1 * h[2][0] + z2 * h[1][1] + z1 * z1 * h[3][0] + two * z1 * z2 * h[2][1] + z2 * z2 * h[1][2]
        } else {
            h[0][1] + z1 * h[1][1] + z2 * h[0][2] + z1 * z1 * h[2][1] + two * z1 * z2 * h[1][2] + z2 * z2 * h[0][3]
        };
        Ok(NormalCurvature { exact, quadratic })
    }

    pub fn expansion_sample(&self, xi: [T; 2], z: [T; 2]) -> Result<ExpansionSample> {
        let f = |v: T| v.to_f64().unwrap();
        let h1 = self.mean_curvature_normal(xi, z, 0)?;
        let h2 = self.mean_curvature_normal(xi, z, 1)?;
        Ok(ExpansionSample {
            xi: [f(xi[0]), f(xi[1])],
            z: [f(z[0]), f(z[1])],
            h_exact: [f(h1.exact), f(h2.exact)],
            h_quadratic: [f(h1.quadratic), f(h2.quadratic)],
            remainder: [f(h1.exact - h1.quadratic), f(h2.exact - h2.quadratic)],
        })
    }

    /// Columns ∂X_{ε,h}/∂q for q = (ξ¹, ξ², t¹, t²).
    pub fn jacobian(&self, xi: [T; 2], t: [T; 2]) -> [Vec4<T>; 4] {
        let tg = self.chart.tangents(xi);
        let dn = self.chart.normal_derivatives(xi);
        let n = self.chart.normal(xi);
        let h = self.shift.value(xi);
        let dh = self.shift.gradient(xi);
        let e = T::one() / self.eps;
        let w = t[0] + h[0];
        let mut cols = [[T::zero(); 4]; 4];
        for i in 0..2 {
            for r in 0..3 {
                cols[i][r] = e * tg[i][r] + dh[0][i] * n[r] + w * dn[i][r];
            }
            cols[i][3] = dh[1][i];
        }
        cols[2] = [n[0], n[1], n[2], T::zero()];
        cols[3] = [T::zero(), T::zero(), T::zero(), T::one()];
        cols
    }

    /// Pullback of the Euclidean metric by X_{ε,h} in q = (ξ, t).
    pub fn stretched_metric(&self, xi: [T; 2], t: [T; 2]) -> [[T; 4]; 4] {
        let j = self.jacobian(xi, t);
        let mut m = [[T::zero(); 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] = (0..4).fold(T::zero(), |acc, r| acc + j[a][r] * j[b][r]);
            }
        }
        m
    }

    /// 𝒥φ = Δ_M φ + 𝖧φ with 𝖧_{βγ} = Σ_ℓ k_{ℓβ}k_{ℓγ}, on sampled pairs.
    pub fn jacobi_operator_codim2(&self, phi: &[[T; 2]]) -> Vec<[T; 2]> {
        let g = self.grid();
        let comp = |c: usize| -> Vec<T> { phi.iter().map(|p| p[c]).collect() };
        let l1 = crate::surface::laplace_beltrami(self.chart.as_ref(), &comp(0));
        let l2 = crate::surface::laplace_beltrami(self.chart.as_ref(), &comp(1));
        let mut out = Vec::with_capacity(phi.len());
        for i in 0..g.n[0] {
            for j in 0..g.n[1] {
                let k = g.index(i, j);
                if g.on_boundary(i, j) {
                    out.push([T::zero(); 2]);
                    continue;
                }
                let h = self.curvature_moments(g.node(i, j)).h_mn;
                let hh = [[h[2][0], h[1][1]], [h[1][1], h[0][2]]];
                out.push([l1[k] + hh[0][0] * phi[k][0] + hh[0][1] * phi[k][1], l2[k] + hh[1][0] * phi[k][0] + hh[1][1] * phi[k][1]]);
            }
        }
        out
    }
}

/// Inverse of a 4×4 matrix by Gauss–Jordan with partial pivoting.
pub fn inv4<T: Real>(m: [[T; 4]; 4]) -> Option<[[T; 4]; 4]> {
    let mut a = m;
    let mut inv = [[T::zero(); 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for c in 0..4 {
        let p = (c..4).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())?;
        if a[p][c] == T::zero() {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..4 {
            a[c][k] = a[c][k] / d;
            inv[c][k] = inv[c][k] / d;
        }
        for r in 0..4 {
            if r != c {
                let f = a[r][c];
                for k in 0..4 {
                    a[r][k] = a[r][k] - f * a[c][k];
                    inv[r][k] = inv[r][k] - f * inv[c][k];
                }
            }
        }
    }
    Some(inv)
}
