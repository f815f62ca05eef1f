//! Shared machinery for radial profiles: quadrature with surface measure,
//! Hermite interpolation of tabulated profiles, and a classical RK4 step for
//! second-order radial equations.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

/// Area of the unit sphere `S^{d-1}`; for `d = 1` this is the two-point
/// measure, so radial integrals reproduce integrals over the whole line.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!("dimension checked by callers"),
    }
}

/// Composite Simpson rule on uniformly spaced samples. An odd number of
/// intervals closes with the 3/8 rule on the last three.
pub fn simpson(f: &[f64], h: f64) -> f64 {
    let m = f.len();
    match m {
        0 | 1 => 0.0,
        2 => 0.5 * h * (f[0] + f[1]),
        3 => h / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let intervals = m - 1;
            let (simp_end, tail) = if intervals % 2 == 0 {
                (m - 1, false)
            } else {
                (m - 4, true)
            };
            let mut s = 0.0;
            if simp_end > 0 {
                s += f[0] + f[simp_end];
                for (j, v) in f.iter().enumerate().take(simp_end).skip(1) {
                    s += if j % 2 == 1 { 4.0 * v } else { 2.0 * v };
                }
                s *= h / 3.0;
            }
            if tail {
                let k = simp_end;
                s += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
            }
            s
        }
    }
}

/// `∫_{R^d} f(|y|) dy` for samples `f(i·dr)`.
pub fn radial_integral(f: &[f64], dr: f64, d: usize) -> f64 {
    let w: Vec<f64> = f
        .iter()
        .enumerate()
        .map(|(i, v)| v * (i as f64 * dr).powi(d as i32 - 1))
        .collect();
    sphere_area(d) * simpson(&w, dr)
}

/// Cubic Hermite interpolation of a table with known derivatives on
/// `r_i = i·dr`. Returns `(f, f')`; zero beyond the table.
pub fn hermite<T>(r: f64, dr: f64, vals: &[T], ders: &[T]) -> (T, T)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let n = vals.len();
    let t = r / dr;
    if !(t >= 0.0) || t > (n - 1) as f64 {
        return (T::default(), T::default());
    }
    let i = (t.floor() as usize).min(n - 2);
    let s = t - i as f64;
    let (y0, y1) = (vals[i], vals[i + 1]);
    let (m0, m1) = (ders[i] * dr, ders[i + 1] * dr);
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let f = y0 * h00 + m0 * h10 + y1 * h01 + m1 * h11;
    let g00 = 6.0 * s2 - 6.0 * s;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = -6.0 * s2 + 6.0 * s;
    let g11 = 3.0 * s2 - 2.0 * s;
    let df = (y0 * g00 + m0 * g10 + y1 * g01 + m1 * g11) * (1.0 / dr);
    (f, df)
}

/// One RK4 step of `y'' = rhs(r, y, y')` written as a first-order system.
pub fn rk4_step<T, F>(r: f64, y: T, dy: T, h: f64, rhs: &F) -> (T, T)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: Fn(f64, T, T) -> T,
{
    let k1y = dy;
    let k1v = rhs(r, y, dy);
    let k2y = dy + k1v * (0.5 * h);
    let k2v = rhs(r + 0.5 * h, y + k1y * (0.5 * h), dy + k1v * (0.5 * h));
    let k3y = dy + k2v * (0.5 * h);
    let k3v = rhs(r + 0.5 * h, y + k2y * (0.5 * h), dy + k2v * (0.5 * h));
    let k4y = dy + k3v * h;
    let k4v = rhs(r + h, y + k3y * h, dy + k3v * h);
    (
        y + (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0),
        dy + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0),
    )
}

/// Taylor start for a regular radial solution of
/// `y'' + (d-1)/r y' = g(y)` with `y(0) = y0`, `y'(0) = 0`:
/// `y ≈ y0 + c2 r² + c4 r⁴` where `c2 = g(y0)/(2d)` and
/// `c4 = c2·g'(y0)/(4(d+2))`.
pub fn regular_start(y0: f64, g0: f64, dg0: f64, d: usize, r: f64) -> (f64, f64) {
    let df = d as f64;
    let c2 = g0 / (2.0 * df);
    let c4 = c2 * dg0 / (4.0 * (df + 2.0));
    let r2 = r * r;
    (
        y0 + c2 * r2 + c4 * r2 * r2,
        2.0 * c2 * r + 4.0 * c4 * r2 * r,
    )
}
