//! Two interchangeable backends for the space-time calculus used by the
//! identity checks.
//!
//! [`Jet`] is a truncated Taylor polynomial in (ξ, τ) around a point, with
//! x-degree below [`JET_X`] and t-degree at most one. Differentiation
//! shifts coefficients, and coefficients that fall off the truncation
//! become NaN, so a formula that needs more derivatives than the jet
//! carries produces NaN instead of a silently wrong number.
//!
//! [`GridField`] stores values on an nt × nx space-time grid and
//! differentiates with second-order finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::fd;

/// Arithmetic shared by plain numbers, jets and grid fields.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// A constant with the same shape as `self`.
    fn cst(&self, c: f64) -> Self;
    fn powf(&self, r: f64) -> Self;
    fn exp(&self) -> Self;
    fn cos(&self) -> Self;
    fn sin(&self) -> Self;
}

/// Scalars that have a single base value, so piecewise definitions can
/// branch on it.
pub trait PointScalar: Scalar {
    fn re(&self) -> f64;
}

/// Scalars that can be differentiated in x and t.
pub trait Field: Scalar {
    fn dx(&self) -> Self;
    fn dxx(&self) -> Self;
    fn dt(&self) -> Self;
}

impl Scalar for f64 {
    fn cst(&self, c: f64) -> f64 {
        c
    }
    fn powf(&self, r: f64) -> f64 {
        f64::powf(*self, r)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
}

impl PointScalar for f64 {
    fn re(&self) -> f64 {
        *self
    }
}

/// Number of x-coefficients carried by a [`Jet`].
pub const JET_X: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    /// c[i][j] = ∂x^i ∂t^j f / i! at the expansion point.
    pub c: [[f64; 2]; JET_X],
}

impl Jet {
    pub fn constant(v: f64) -> Jet {
        let mut c = [[0.0; 2]; JET_X];
        c[0][0] = v;
        Jet { c }
    }

    /// The coordinate x* + ξ.
    pub fn x_var(x: f64) -> Jet {
        let mut j = Jet::constant(x);
        j.c[1][0] = 1.0;
        j
    }

    /// The coordinate t* + τ.
    pub fn t_var(t: f64) -> Jet {
        let mut j = Jet::constant(t);
        j.c[0][1] = 1.0;
        j
    }

    /// Build from x-derivatives at the point (index i holds ∂x^i f) and
    /// the x-derivatives of ∂t f.
    pub fn from_derivatives(dx: &[f64], dxdt: &[f64]) -> Jet {
        let mut j = Jet::constant(0.0);
        let mut fact = 1.0;
        for i in 0..JET_X {
            if i > 0 {
                fact *= i as f64;
            }
            j.c[i][0] = dx.get(i).copied().unwrap_or(f64::NAN) / fact;
            j.c[i][1] = dxdt.get(i).copied().unwrap_or(f64::NAN) / fact;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    /// ∂x^k f at the point.
    pub fn deriv_x(&self, k: usize) -> f64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.c[k][0] * fact
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Jet {
        let mut out = *self;
        for row in out.c.iter_mut() {
            for v in row.iter_mut() {
                *v = f(*v);
            }
        }
        out
    }

    fn zip(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let mut out = *self;
        for i in 0..JET_X {
            for j in 0..2 {
                out.c[i][j] = f(self.c[i][j], o.c[i][j]);
            }
        }
        out
    }

    fn nilpotent_part(&self) -> Jet {
        let mut e = *self;
        e.c[0][0] = 0.0;
        e
    }

    /// Σ_k coef[k] ε^k for nilpotent ε; the series terminates at degree JET_X.
    fn series(eps: &Jet, coef: impl Fn(usize) -> f64) -> Jet {
        let mut acc = Jet::constant(coef(0));
        let mut pow = Jet::constant(1.0);
        for k in 1..=JET_X {
            pow = pow * *eps;
            acc = acc + pow * coef(k);
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut c = [[0.0; 2]; JET_X];
        for i in 0..JET_X {
            for j in 0..2 {
                let mut s = 0.0;
                for i1 in 0..=i {
                    for j1 in 0..=j {
                        s += self.c[i1][j1] * o.c[i - i1][j - j1];
                    }
                }
                c[i][j] = s;
            }
        }
        Jet { c }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let b0 = o.c[0][0];
        let mut q = [[0.0; 2]; JET_X];
        for j in 0..2 {
            for i in 0..JET_X {
                let mut s = self.c[i][j];
                for i1 in 0..=i {
                    for j1 in 0..=j {
                        if i1 == 0 && j1 == 0 {
                            continue;
                        }
                        s -= o.c[i1][j1] * q[i - i1][j - j1];
                    }
                }
                q[i][j] = s / b0;
            }
        }
        Jet { c: q }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.map(|a| -a)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.c[0][0] += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.c[0][0] -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.map(|a| a * c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.map(|a| a / c)
    }
}

impl Scalar for Jet {
    fn cst(&self, c: f64) -> Jet {
        Jet::constant(c)
    }

    fn powf(&self, r: f64) -> Jet {
        if r == 0.0 {
            return Jet::constant(1.0);
        }
        if r.fract() == 0.0 && (1.0..=8.0).contains(&r) {
            let mut acc = *self;
            for _ in 1..r as usize {
                acc = acc * *self;
            }
            return acc;
        }
        let a0 = self.c[0][0];
        if !(a0 > 0.0) {
            return self.map(|_| f64::NAN);
        }
        let eps = self.nilpotent_part() / a0;
        let base = a0.powf(r);
        Jet::series(&eps, |k| {
            let mut b = 1.0;
            for i in 0..k {
                b *= (r - i as f64) / (i + 1) as f64;
            }
            base * b
        })
    }

    fn exp(&self) -> Jet {
        let a0 = self.c[0][0].exp();
        let eps = self.nilpotent_part();
        Jet::series(&eps, |k| {
            let f: f64 = (1..=k).map(|i| i as f64).product();
            a0 / f
        })
    }

    fn cos(&self) -> Jet {
        let (s0, c0) = self.c[0][0].sin_cos();
        let eps = self.nilpotent_part();
        Jet::series(&eps, |k| {
            let f: f64 = (1..=k).map(|i| i as f64).product();
            let d = match k % 4 {
                0 => c0,
                1 => -s0,
                2 => -c0,
                _ => s0,
            };
            d / f
        })
    }

    fn sin(&self) -> Jet {
        let (s0, c0) = self.c[0][0].sin_cos();
        let eps = self.nilpotent_part();
        Jet::series(&eps, |k| {
            let f: f64 = (1..=k).map(|i| i as f64).product();
            let d = match k % 4 {
                0 => s0,
                1 => c0,
                2 => -s0,
                _ => -c0,
            };
            d / f
        })
    }
}

impl PointScalar for Jet {
    fn re(&self) -> f64 {
        self.c[0][0]
    }
}

impl Field for Jet {
    fn dx(&self) -> Jet {
        let mut c = [[f64::NAN; 2]; JET_X];
        for i in 0..JET_X - 1 {
            for j in 0..2 {
                c[i][j] = (i + 1) as f64 * self.c[i + 1][j];
            }
        }
        Jet { c }
    }

    fn dxx(&self) -> Jet {
        self.dx().dx()
    }

    fn dt(&self) -> Jet {
        let mut c = [[f64::NAN; 2]; JET_X];
        for i in 0..JET_X {
            c[i][0] = self.c[i][1];
        }
        Jet { c }
    }
}

/// Values on an nt × nx space-time grid (row-major in time).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub nt: usize,
    pub nx: usize,
    pub hx: f64,
    pub ht: f64,
    pub periodic: bool,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn from_fn(
        nt: usize,
        nx: usize,
        hx: f64,
        ht: f64,
        periodic: bool,
        f: impl Fn(usize, usize) -> f64,
    ) -> GridField {
        let mut data = Vec::with_capacity(nt * nx);
        for it in 0..nt {
            for ix in 0..nx {
                data.push(f(it, ix));
            }
        }
        GridField {
            nt,
            nx,
            hx,
            ht,
            periodic,
            data,
        }
    }

    pub fn at(&self, it: usize, ix: usize) -> f64 {
        self.data[it * self.nx + ix]
    }

    pub fn row(&self, it: usize) -> &[f64] {
        &self.data[it * self.nx..(it + 1) * self.nx]
    }

    fn map(mut self, f: impl Fn(f64) -> f64) -> GridField {
        for v in self.data.iter_mut() {
            *v = f(*v);
        }
        self
    }

    fn zip(mut self, o: &GridField, f: impl Fn(f64, f64) -> f64) -> GridField {
        assert_eq!(
            (self.nt, self.nx),
            (o.nt, o.nx),
            "grid fields must share a shape"
        );
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a = f(*a, *b);
        }
        self
    }

    fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> GridField {
        let mut data = Vec::with_capacity(self.data.len());
        for it in 0..self.nt {
            data.extend(f(self.row(it)));
        }
        GridField {
            data,
            ..self.clone()
        }
    }
}

macro_rules! grid_binop {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for GridField {
            type Output = GridField;
            fn $m(self, o: GridField) -> GridField {
                self.zip(&o, |a, b| a $op b)
            }
        }
        impl $tr<f64> for GridField {
            type Output = GridField;
            fn $m(self, c: f64) -> GridField {
                self.map(|a| a $op c)
            }
        }
    };
}

grid_binop!(Add, add, +);
grid_binop!(Sub, sub, -);
grid_binop!(Mul, mul, *);
grid_binop!(Div, div, /);

impl Neg for GridField {
    type Output = GridField;
    fn neg(self) -> GridField {
        self.map(|a| -a)
    }
}

impl Scalar for GridField {
    fn cst(&self, c: f64) -> GridField {
        GridField {
            data: vec![c; self.data.len()],
            ..self.clone()
        }
    }
    fn powf(&self, r: f64) -> GridField {
        if r == 0.0 {
            return self.cst(1.0);
        }
        self.clone().map(|a| a.powf(r))
    }
    fn exp(&self) -> GridField {
        self.clone().map(f64::exp)
    }
    fn cos(&self) -> GridField {
        self.clone().map(f64::cos)
    }
    fn sin(&self) -> GridField {
        self.clone().map(f64::sin)
    }
}

impl Field for GridField {
    fn dx(&self) -> GridField {
        self.map_rows(|r| fd::d1(r, self.hx, self.periodic))
    }

    fn dxx(&self) -> GridField {
        self.map_rows(|r| fd::d2(r, self.hx, self.periodic))
    }

    /// Centered in time on interior slices, one-sided second order at the
    /// first and last slice.
    fn dt(&self) -> GridField {
        let (nt, nx) = (self.nt, self.nx);
        let mut data = vec![0.0; nt * nx];
        if nt >= 3 {
            let inv = 1.0 / (2.0 * self.ht);
            for ix in 0..nx {
                let g = |it: usize| self.data[it * nx + ix];
                data[ix] = (-3.0 * g(0) + 4.0 * g(1) - g(2)) * inv;
                for it in 1..nt - 1 {
                    data[it * nx + ix] = (g(it + 1) - g(it - 1)) * inv;
                }
                data[(nt - 1) * nx + ix] = (3.0 * g(nt - 1) - 4.0 * g(nt - 2) + g(nt - 3)) * inv;
            }
        } else {
            data.iter_mut().for_each(|v| *v = f64::NAN);
        }
        GridField {
            data,
            ..self.clone()
        }
    }
}
