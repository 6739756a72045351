//! Second-order finite-difference stencils on uniform 1-D grids.
//!
//! Periodic grids wrap around; non-periodic grids use one-sided
//! second-order stencils at the two end nodes.

/// First derivative, second order everywhere.
pub fn d1(v: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let inv = 1.0 / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) * inv;
    }
    if periodic {
        out[0] = (v[1] - v[n - 1]) * inv;
        out[n - 1] = (v[0] - v[n - 2]) * inv;
    } else {
        out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv;
        out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv;
    }
    out
}

/// Compact second derivative, second order everywhere.
pub fn d2(v: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 4 {
        return out;
    }
    let inv = 1.0 / (h * h);
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv;
    }
    if periodic {
        out[0] = (v[1] - 2.0 * v[0] + v[n - 1]) * inv;
        out[n - 1] = (v[0] - 2.0 * v[n - 1] + v[n - 2]) * inv;
    } else {
        out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) * inv;
        out[n - 1] = (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) * inv;
    }
    out
}

/// Forward first difference. First order; only used to show that a
/// convergence study detects a loss of order.
pub fn d1_forward(v: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    for i in 0..n - 1 {
        out[i] = (v[i + 1] - v[i]) / h;
    }
    out[n - 1] = if periodic {
        (v[0] - v[n - 1]) / h
    } else {
        (v[n - 1] - v[n - 2]) / h
    };
    out
}
