//! Piecewise polynomial and trigonometric interpolation.

use crate::scalar::Real;

/// Index `i` with `xs[i] <= x <= xs[i+1]`, clamped to the last interval.
pub fn bracket<T: Real>(xs: &[T], x: T) -> usize {
    let n = xs.len();
    let k = xs.partition_point(|&v| v <= x);
    k.saturating_sub(1).min(n - 2)
}

/// Cubic Hermite value and first derivative from end values and slopes.
pub fn hermite3<T: Real>(x0: T, x1: T, y: [T; 2], dy: [T; 2], x: T) -> (T, T) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let (two, three, six) = (T::c(2.0), T::c(3.0), T::c(6.0));
    let h00 = two * t3 - three * t2 + T::one();
    let h10 = t3 - two * t2 + t;
    let h01 = -two * t3 + three * t2;
    let h11 = t3 - t2;
    let d00 = (six * t2 - six * t) / h;
    let d10 = three * t2 - T::c(4.0) * t + T::one();
    let d01 = (six * t - six * t2) / h;
    let d11 = three * t2 - two * t;
    let v = y[0] * h00 + h * dy[0] * h10 + y[1] * h01 + h * dy[1] * h11;
    let dv = y[0] * d00 + dy[0] * d10 + y[1] * d01 + dy[1] * d11;
    (v, dv)
}

/// Quintic Hermite interpolation with values, first and second derivatives at
/// both ends. Returns (p, p', p'').
pub fn hermite5<T: Real>(x0: T, x1: T, y: [T; 2], dy: [T; 2], d2y: [T; 2], x: T) -> (T, T, T) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let c = T::c;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    // basis, first and second t-derivatives
    let b = [
        T::one() - c(10.0) * t3 + c(15.0) * t4 - c(6.0) * t5,
        t - c(6.0) * t3 + c(8.0) * t4 - c(3.0) * t5,
        c(0.5) * t2 - c(1.5) * t3 + c(1.5) * t4 - c(0.5) * t5,
        c(10.0) * t3 - c(15.0) * t4 + c(6.0) * t5,
        -c(4.0) * t3 + c(7.0) * t4 - c(3.0) * t5,
        c(0.5) * t3 - t4 + c(0.5) * t5,
    ];
    let db = [
        -c(30.0) * t2 + c(60.0) * t3 - c(30.0) * t4,
        T::one() - c(18.0) * t2 + c(32.0) * t3 - c(15.0) * t4,
        t - c(4.5) * t2 + c(6.0) * t3 - c(2.5) * t4,
        c(30.0) * t2 - c(60.0) * t3 + c(30.0) * t4,
        -c(12.0) * t2 + c(28.0) * t3 - c(15.0) * t4,
        c(1.5) * t2 - c(4.0) * t3 + c(2.5) * t4,
    ];
    let d2b = [
        -c(60.0) * t + c(180.0) * t2 - c(120.0) * t3,
        -c(36.0) * t + c(96.0) * t2 - c(60.0) * t3,
        T::one() - c(9.0) * t + c(18.0) * t2 - c(10.0) * t3,
        c(60.0) * t - c(180.0) * t2 + c(120.0) * t3,
        -c(24.0) * t + c(84.0) * t2 - c(60.0) * t3,
        c(3.0) * t - c(12.0) * t2 + c(10.0) * t3,
    ];
    let w = [y[0], h * dy[0], h * h * d2y[0], y[1], h * dy[1], h * h * d2y[1]];
    let mut p = T::zero();
    let mut dp = T::zero();
    let mut d2p = T::zero();
    for k in 0..6 {
        p = p + w[k] * b[k];
        dp = dp + w[k] * db[k];
        d2p = d2p + w[k] * d2b[k];
    }
    (p, dp / h, d2p / (h * h))
}

/// Natural cubic spline through `(xs, ys)`; stores second derivatives.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 3 && ys.len() == n);
        // tridiagonal system for interior second derivatives
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            sub[i] = h0 / 6.0;
            diag[i] = (h0 + h1) / 3.0;
            sup[i] = h1 / 6.0;
            rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
        }
        let m = thomas(&sub, &diag, &sup, &rhs);
        CubicSpline { xs, ys, m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = bracket(&self.xs, x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[i] + b * self.ys[i + 1] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

/// Tridiagonal solve; `sub[0]` and `sup[n-1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Weights `w_j` with `p(θ) = Σ w_j v_j` for the trigonometric interpolant of
/// values on `n` (even) equispaced nodes `θ_j = 2πj/n`.
pub fn trig_weights(n: usize, theta: f64, out: &mut [f64]) {
    let dth = std::f64::consts::TAU / n as f64;
    for (j, w) in out.iter_mut().enumerate().take(n) {
        let x = theta - j as f64 * dth;
        let s = (0.5 * x).sin();
        // periodic sinc for even n; equals 1 at every node
        *w = if s.abs() < 1e-14 { 1.0 } else { (0.5 * n as f64 * x).sin() * (0.5 * x).cos() / (n as f64 * s) };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_reproduces_quintics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x.powi(3) + 0.3 * x.powi(5);
        let dp = |x: f64| -2.0 + 1.5 * x * x + 1.5 * x.powi(4);
        let d2p = |x: f64| 3.0 * x + 6.0 * x.powi(3);
        let (x0, x1) = (0.3, 1.1);
        for k in 0..=10 {
            let x = x0 + (x1 - x0) * k as f64 / 10.0;
            let (v, d, d2) = hermite5(x0, x1, [p(x0), p(x1)], [dp(x0), dp(x1)], [d2p(x0), d2p(x1)], x);
            assert!((v - p(x)).abs() < 1e-13);
            assert!((d - dp(x)).abs() < 1e-12);
            assert!((d2 - d2p(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn cubic_hermite_single_precision() {
        let (v, d) = hermite3::<f32>(0.0, 1.0, [0.0, 1.0], [0.0, 3.0], 0.5);
        assert!((v - 0.125).abs() < 1e-6);
        assert!((d - 0.75).abs() < 1e-6);
    }

    #[test]
    fn trig_interpolation_exact_for_low_modes() {
        let n = 16;
        let vals: Vec<f64> = (0..n)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / n as f64;
                1.0 + (3.0 * t).cos() - 0.5 * (2.0 * t).sin()
            })
            .collect();
        let mut w = vec![0.0; n];
        for &th in &[0.1, 1.7, 4.0, 0.0] {
            trig_weights(n, th, &mut w);
            let p: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
            let e = 1.0 + (3.0 * th).cos() - 0.5 * (2.0 * th).sin();
            assert!((p - e).abs() < 1e-12, "{p} {e}");
        }
    }

    #[test]
    fn spline_is_exact_at_nodes() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::natural(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
    }
}
