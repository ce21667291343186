//! Finite-difference weights on arbitrary point sets.

/// Fornberg's recursion. Returns `w[m][j]`, the weight of `xs[j]` in the
/// approximation of the m-th derivative at `x0`, for m = 0..=max_order.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Window of `width` consecutive indices around `i`, shifted to stay in `lo..=hi`.
pub fn window(i: isize, width: usize, lo: isize, hi: isize) -> std::ops::RangeInclusive<isize> {
    let w = width as isize;
    let mut start = i - (w - 1) / 2;
    if start + w - 1 > hi {
        start = hi - w + 1;
    }
    if start < lo {
        start = lo;
    }
    start..=(start + w - 1)
}
