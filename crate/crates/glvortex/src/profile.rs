//! Radial degree-one vortex: u = f(r) e^{iθ}, A = a(r) dθ, solving
//!
//!   -f'' - f'/r + (1-a)^2 f / r^2 - f(1-f^2)/2 = 0,
//!   -a'' + a'/r - f^2 (1-a) = 0,
//!
//! with f(0) = a(0) = 0 and f, a -> 1 at infinity.

use crate::error::{Error, Result};
use crate::interp::{hermite3, hermite5};
use crate::sparse::Triplets;
use crate::stencil::{fd_weights, window};
use serde::Serialize;
use std::io::Write;

const SOLVER_WIDTH: usize = 5;
const CHECK_WIDTH: usize = 7;

/// Closure at r = r_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarField {
    /// f = a = 1; error of order e^{-r_max}.
    #[default]
    Dirichlet,
    /// Robin conditions from the linearized decay 1 - f ~ K0(r), 1 - a ~ r K1(r).
    Asymptotic,
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileConfig {
    pub r_max: f64,
    pub n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub far_field: FarField,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { r_max: 12.0, n: 2000, tol: 1e-8, max_iter: 60, far_field: FarField::Dirichlet }
    }
}

/// Large-argument series for e^x sqrt(2x/π) K_ν(x); fine for x >= 10.
fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..12 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        sum += term;
    }
    sum
}

/// Sampled profile on a uniform grid `r_i = i h`, `i = 0..n`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialProfile {
    pub r_grid: Vec<f64>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    pub df: Vec<f64>,
    pub da: Vec<f64>,
    #[serde(skip)]
    pub d2f: Vec<f64>,
    #[serde(skip)]
    pub d2a: Vec<f64>,
    pub r_max: f64,
    pub tol: f64,
    /// Sup of the solver's own discrete residual at convergence.
    pub residual_sup: f64,
    pub iterations: usize,
    #[serde(skip)]
    h: f64,
}

/// Values and derivatives of the profile at one radius.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProfileJet {
    pub f: f64,
    pub a: f64,
    pub df: f64,
    pub da: f64,
    pub d2f: f64,
    pub d2a: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub sup_f: f64,
    pub sup_a: f64,
    pub l2_f: f64,
    pub l2_a: f64,
    /// Radius below which the axis series, not the ODE, is authoritative.
    pub r_from: f64,
    pub trivial_branch: bool,
}

impl ResidualReport {
    pub fn sup(&self) -> f64 {
        self.sup_f.max(self.sup_a)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub r_max: f64,
    pub n: usize,
    pub tol: f64,
    pub residual_sup: f64,
    pub decay_rate_f: f64,
    pub decay_rate_a: f64,
}

/// Differentiation stencil at node `i`: (node index, d/dr weight, d²/dr² weight).
type Stencil = Vec<(isize, f64, f64)>;

fn stencil(i: usize, n_int: usize, h: f64, width: usize) -> Stencil {
    let last = n_int as isize;
    let w = if (i + width / 2) as isize <= last { width } else { width + 1 };
    let idx: Vec<isize> = window(i as isize, w, -(w as isize), last).collect();
    let xs: Vec<f64> = idx.iter().map(|&k| k as f64 * h).collect();
    let wt = fd_weights(i as f64 * h, &xs, 2);
    idx.iter().enumerate().map(|(j, &k)| (k, wt[1][j], wt[2][j])).collect()
}

/// Sample value with axis parity (f odd, a even) and the far-field condition.
#[inline]
fn sample(v: &[f64], k: isize, odd: bool) -> f64 {
    if k < 0 {
        let s = v[(-k) as usize];
        if odd {
            -s
        } else {
            s
        }
    } else {
        v[k as usize]
    }
}

fn residuals_at(f: &[f64], a: &[f64], i: usize, h: f64, st: &Stencil) -> (f64, f64) {
    let r = i as f64 * h;
    let (mut f1, mut f2, mut a1, mut a2) = (0.0, 0.0, 0.0, 0.0);
    for &(k, w1, w2) in st {
        let fk = sample(f, k, true);
        let ak = sample(a, k, false);
        f1 += w1 * fk;
        f2 += w2 * fk;
        a1 += w1 * ak;
        a2 += w2 * ak;
    }
    let (fi, ai) = (f[i], a[i]);
    let rf = -f2 - f1 / r + (1.0 - ai).powi(2) * fi / (r * r) - 0.5 * fi * (1.0 - fi * fi);
    let ra = -a2 + a1 / r - fi * fi * (1.0 - ai);
    (rf, ra)
}

/// Damped Newton solve of the boundary-value problem on `n` nodes over [0, r_max].
pub fn solve_profile(r_max: f64, n: usize, tol: f64) -> Result<RadialProfile> {
    solve_profile_with(ProfileConfig { r_max, n, tol, ..Default::default() })
}

pub fn solve_profile_with(cfg: ProfileConfig) -> Result<RadialProfile> {
    let ProfileConfig { r_max, n, tol, max_iter, far_field } = cfg;
    let robin = far_field == FarField::Asymptotic;
    if !(r_max >= 10.0) || !r_max.is_finite() {
        return Err(Error::InvalidGrid(format!("r_max = {r_max} must be >= 10")));
    }
    if n < 200 {
        return Err(Error::InvalidGrid(format!("n = {n} must be >= 200")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidGrid(format!("tol = {tol} must be positive")));
    }
    let n_int = n - 1;
    let h = r_max / n_int as f64;
    let r: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let mut f: Vec<f64> = r.iter().map(|&x| (0.5 * x).tanh()).collect();
    let mut a: Vec<f64> = r.iter().map(|&x| x * x / (1.0 + x * x)).collect();
    f[0] = 0.0;
    a[0] = 0.0;
    f[n_int] = 1.0;
    a[n_int] = 1.0;

    let stencils: Vec<Stencil> = (0..n).map(|i| if i == 0 { vec![] } else { stencil(i, n_int, h, SOLVER_WIDTH) }).collect();
    let last = if robin { n_int + 1 } else { n_int };
    let m = 2 * (last - 1);
    let end = stencil(n_int, n_int, h, SOLVER_WIDTH);
    let (k0, k1) = (bessel_k_scaled(0.0, r_max), bessel_k_scaled(1.0, r_max));
    // (1 - f)' = -(K1/K0)(1 - f),  (1 - a)' = -(K0/K1)(1 - a)
    let (cf, ca) = (k1 / k0, k0 / k1);
    let col = |k: isize| -> Option<(usize, f64, f64)> {
        // (unknown offset, parity sign for f, parity sign for a)
        if k < 0 {
            Some((((-k) as usize - 1) * 2, -1.0, 1.0))
        } else if k == 0 || (k as usize == n_int && !robin) {
            None
        } else {
            Some(((k as usize - 1) * 2, 1.0, 1.0))
        }
    };
    let residual = |f: &[f64], a: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for i in 1..n_int {
            let (rf, ra) = residuals_at(f, a, i, h, &stencils[i]);
            out[2 * (i - 1)] = rf;
            out[2 * (i - 1) + 1] = ra;
        }
        if robin {
            let (mut f1, mut a1) = (0.0, 0.0);
            for &(k, w1, _) in &end {
                f1 += w1 * f[k as usize];
                a1 += w1 * a[k as usize];
            }
            out[2 * (n_int - 1)] = f1 - cf * (1.0 - f[n_int]);
            out[2 * (n_int - 1) + 1] = a1 - ca * (1.0 - a[n_int]);
        }
        out
    };
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |s, x| s.max(x.abs()));

    let mut res = residual(&f, &a);
    let mut norm = sup(&res);
    let mut iterations = 0;
    while norm >= tol {
        if iterations >= max_iter {
            return Err(Error::NonConvergence(format!("profile Newton: residual {norm:.3e} after {iterations} iterations (tol {tol:e})")));
        }
        iterations += 1;
        let mut jac = Triplets::new(m, m);
        for i in 1..n_int {
            let ri = r[i];
            let (fi, ai) = (f[i], a[i]);
            let (rf_row, ra_row) = (2 * (i - 1), 2 * (i - 1) + 1);
            for &(k, w1, w2) in &stencils[i] {
                if let Some((c, sf, sa)) = col(k) {
                    jac.push(rf_row, c, sf * (-w2 - w1 / ri));
                    jac.push(ra_row, c + 1, sa * (-w2 + w1 / ri));
                }
            }
            jac.push(rf_row, rf_row, (1.0 - ai).powi(2) / (ri * ri) - 0.5 * (1.0 - 3.0 * fi * fi));
            jac.push(rf_row, rf_row + 1, -2.0 * (1.0 - ai) * fi / (ri * ri));
            jac.push(ra_row, ra_row, fi * fi);
            jac.push(ra_row, ra_row - 1, -2.0 * fi * (1.0 - ai));
        }
        if robin {
            let (rf_row, ra_row) = (2 * (n_int - 1), 2 * (n_int - 1) + 1);
            for &(k, w1, _) in &end {
                if let Some((c, _, _)) = col(k) {
                    jac.push(rf_row, c, w1);
                    jac.push(ra_row, c + 1, w1);
                }
            }
            jac.push(rf_row, rf_row, cf);
            jac.push(ra_row, ra_row, ca);
        }
        let lu = jac.lu().map_err(|e| Error::NonConvergence(format!("profile Jacobian: {e}")))?;
        let step = lu.solve(&res).map_err(|e| Error::NonConvergence(format!("profile Jacobian: {e}")))?;
        let mut lambda = 1.0;
        loop {
            let mut f_new = f.clone();
            let mut a_new = a.clone();
            for i in 1..last {
                f_new[i] -= lambda * step[2 * (i - 1)];
                a_new[i] -= lambda * step[2 * (i - 1) + 1];
            }
            let res_new = residual(&f_new, &a_new);
            let norm_new = sup(&res_new);
            if norm_new < norm || lambda < 1e-3 {
                // a stalled damped step means we are at the roundoff floor
                if !(norm_new < norm) && lambda < 1e-3 {
                    return Err(Error::NonConvergence(format!("profile Newton stalled at residual {norm:.3e} (tol {tol:e})")));
                }
                f = f_new;
                a = a_new;
                res = res_new;
                norm = norm_new;
                break;
            }
            lambda *= 0.5;
        }
    }
    let (df, d2f) = derivatives(&f, h, true);
    let (da, d2a) = derivatives(&a, h, false);
    Ok(RadialProfile { r_grid: r, f, a, df, da, d2f, d2a, r_max, tol, residual_sup: norm, iterations, h })
}

/// Sixth-order derivative samples, consistent with the stored values.
fn derivatives(v: &[f64], h: f64, odd: bool) -> (Vec<f64>, Vec<f64>) {
    let n_int = v.len() - 1;
    let mut d1 = vec![0.0; v.len()];
    let mut d2 = vec![0.0; v.len()];
    for i in 0..=n_int {
        let st = stencil(i, n_int, h, CHECK_WIDTH);
        for (k, w1, w2) in st {
            let s = sample(v, k, odd);
            d1[i] += w1 * s;
            d2[i] += w2 * s;
        }
    }
    if odd {
        d2[0] = 0.0;
    } else {
        d1[0] = 0.0;
    }
    (d1, d2)
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.r_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_grid.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Builds a profile from raw samples on a uniform grid (used for
    /// perturbation studies); derivatives are recomputed from the values.
    pub fn from_samples(r_max: f64, f: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        let n = f.len();
        if n < 8 || a.len() != n {
            return Err(Error::InvalidGrid("need at least 8 matching samples".into()));
        }
        let h = r_max / (n - 1) as f64;
        let (df, d2f) = derivatives(&f, h, true);
        let (da, d2a) = derivatives(&a, h, false);
        Ok(RadialProfile {
            r_grid: (0..n).map(|i| i as f64 * h).collect(),
            f,
            a,
            df,
            da,
            d2f,
            d2a,
            r_max,
            tol: f64::NAN,
            residual_sup: f64::NAN,
            iterations: 0,
            h,
        })
    }

    #[inline]
    fn cell(&self, r: f64) -> usize {
        ((r / self.h) as usize).min(self.len() - 2)
    }

    /// Cubic Hermite interpolation of (f, a, f', a'); exact at the nodes.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64, f64)> {
        if !(0.0..=self.r_max).contains(&r) {
            return Err(Error::OutOfRange { r, r_max: self.r_max });
        }
        let i = self.cell(r);
        let (x0, x1) = (self.r_grid[i], self.r_grid[i + 1]);
        let (f, df) = hermite3(x0, x1, [self.f[i], self.f[i + 1]], [self.df[i], self.df[i + 1]], r);
        let (a, da) = hermite3(x0, x1, [self.a[i], self.a[i + 1]], [self.da[i], self.da[i + 1]], r);
        Ok((f, a, df, da))
    }

    /// C² quintic Hermite jet for field construction. Beyond `r_max` the
    /// far-field values (1, 1, 0, 0, 0, 0) are returned; negative radii are
    /// not meaningful and are treated as 0.
    pub fn jet(&self, r: f64) -> ProfileJet {
        if r >= self.r_max {
            return ProfileJet { f: 1.0, a: 1.0, ..Default::default() };
        }
        let r = r.max(0.0);
        let i = self.cell(r);
        let (x0, x1) = (self.r_grid[i], self.r_grid[i + 1]);
        let (f, df, d2f) = hermite5(x0, x1, [self.f[i], self.f[i + 1]], [self.df[i], self.df[i + 1]], [self.d2f[i], self.d2f[i + 1]], r);
        let (a, da, d2a) = hermite5(x0, x1, [self.a[i], self.a[i + 1]], [self.da[i], self.da[i + 1]], [self.d2a[i], self.d2a[i + 1]], r);
        ProfileJet { f, a, df, da, d2f, d2a }
    }

    /// Least-squares decay rates of 1 - f and 1 - a over r in [6, 10].
    pub fn decay_rates(&self) -> (f64, f64) {
        let hi = 10.0_f64.min(self.r_max - 2.0);
        let fit = |v: &[f64]| {
            let pts: Vec<(f64, f64)> =
                self.r_grid.iter().zip(v).filter(|(r, _)| **r >= 6.0 && **r <= hi).map(|(r, x)| (*r, (1.0 - x).ln())).collect();
            -least_squares_slope(&pts)
        };
        (fit(&self.f), fit(&self.a))
    }

    pub fn report(&self) -> ProfileReport {
        let (decay_rate_f, decay_rate_a) = self.decay_rates();
        ProfileReport { r_max: self.r_max, n: self.len(), tol: self.tol, residual_sup: self.residual_sup, decay_rate_f, decay_rate_a }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["r", "f", "a", "df", "da"])?;
        for i in 0..self.len() {
            wr.write_record(&[
                format!("{:.17e}", self.r_grid[i]),
                format!("{:.17e}", self.f[i]),
                format!("{:.17e}", self.a[i]),
                format!("{:.17e}", self.df[i]),
                format!("{:.17e}", self.da[i]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Both ODE residuals recomputed with a sixth-order stencil, on r >= r_from.
pub fn ode_residual(p: &RadialProfile) -> ResidualReport {
    ode_residual_from(p, 0.1)
}

pub fn ode_residual_from(p: &RadialProfile, r_from: f64) -> ResidualReport {
    let n_int = p.len() - 1;
    let h = p.h;
    let (mut sup_f, mut sup_a, mut l2_f, mut l2_a) = (0.0_f64, 0.0_f64, 0.0, 0.0);
    for i in 1..n_int {
        if p.r_grid[i] < r_from {
            continue;
        }
        let st = stencil(i, n_int, h, CHECK_WIDTH);
        let (rf, ra) = residuals_at(&p.f, &p.a, i, h, &st);
        sup_f = sup_f.max(rf.abs());
        sup_a = sup_a.max(ra.abs());
        l2_f += rf * rf * h;
        l2_a += ra * ra * h;
    }
    let trivial_branch = p.f.iter().chain(&p.a).all(|v| v.abs() < 1e-14);
    ResidualReport { sup_f, sup_a, l2_f: l2_f.sqrt(), l2_a: l2_a.sqrt(), r_from, trivial_branch }
}
