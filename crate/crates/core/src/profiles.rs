//! Self-similar profiles `Q_b` and the outgoing radiation they shed.
//!
//! The complex profile is obtained from the real equation
//! `ΔP − P + b²|y|²/4 P + P|P|^{4/d} = 0` on the ball of radius
//! `R_b = (2/b)√(1−η)` with `P(R_b) = 0`, through `Q̄_b = P e^{−ib|y|²/4}`,
//! and is then localised by a quintic cutoff `φ_b` that equals one on
//! `[0, R_b⁻]` and vanishes past `R_b`.
//!
//! Three shooting regimes cover the range of `b`:
//! * `R_b` moderate: plain bisection on the sign of `P(R_b)`;
//! * `R_b` large: forward trajectory to a matching radius, joined to the
//!   solution of the linearised tail that vanishes at `R_b` (integrated
//!   inward, where it is stable);
//! * `R_b` beyond the table cap (including `b = 0`): as above, with the
//!   tail started from its decaying WKB branch at the cap. The neglected
//!   part of the profile is below `e^{−cap}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::energy_from;
use crate::ground_state::cached_ground_state;
use crate::radial::{hermite, radial_integral, regular_start, rk4_step, simpson};

/// Largest `R_b` handled by direct shooting.
const DIRECT_RADIUS: f64 = 12.0;
/// Matching radius for the large-`R_b` regimes.
const MATCH_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Target radial spacing; adjusted so that `R_b` is a grid point.
    pub dr: f64,
    /// Tables never extend past this radius.
    pub r_cap: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            dr: 1e-3,
            r_cap: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowupProfile {
    pub b: f64,
    pub eta: f64,
    pub d: usize,
    pub dr: f64,
    pub r: Vec<f64>,
    /// Real positive solution `P̄_b`.
    pub p: Vec<f64>,
    pub dp: Vec<f64>,
    pub d2p: Vec<f64>,
    /// Localised profile `Q_b = P e^{−ibr²/4} φ_b` and its first two
    /// radial derivatives.
    pub qb: Vec<Complex64>,
    pub dqb: Vec<Complex64>,
    pub d2qb: Vec<Complex64>,
    pub phi: Vec<f64>,
    /// Self-similar residual, supported in `[R_b⁻, R_b]`.
    pub psi: Vec<Complex64>,
    pub r_b: f64,
    pub r_b_minus: f64,
    pub mass_qb: f64,
    pub energy_qb: f64,
    pub p0: f64,
    /// True when `R_b` exceeds the table cap and the table stops early.
    pub truncated: bool,
}

fn nonlin(p: f64, d: usize) -> f64 {
    let a = p.abs();
    match d {
        1 => p * a * a * a * a,
        2 => p * a * a,
        4 => p * a,
        _ => p * a.powf(4.0 / d as f64),
    }
}

/// Quintic smoothstep cutoff and its first two derivatives.
pub fn cutoff(r: f64, inner: f64, outer: f64) -> (f64, f64, f64) {
    if r <= inner {
        return (1.0, 0.0, 0.0);
    }
    if r >= outer {
        return (0.0, 0.0, 0.0);
    }
    let w = outer - inner;
    let x = (r - inner) / w;
    let s = x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
    let ds = 30.0 * x * x * (1.0 - x) * (1.0 - x);
    let d2s = 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    (1.0 - s, -ds / w, -d2s / (w * w))
}

pub fn r_b(b: f64, eta: f64) -> f64 {
    2.0 / b.abs() * (1.0 - eta).sqrt()
}

#[derive(Clone, Copy)]
struct Shooter {
    d: usize,
    b2: f64,
    h: f64,
}

impl Shooter {
    fn rhs(&self) -> impl Fn(f64, f64, f64) -> f64 + '_ {
        let dm1 = self.d as f64 - 1.0;
        move |r, p, dp| -dm1 / r * dp + p - 0.25 * self.b2 * r * r * p - nonlin(p, self.d)
    }

    fn lin(&self) -> impl Fn(f64, f64, f64) -> f64 + '_ {
        let dm1 = self.d as f64 - 1.0;
        move |r, w, dw| -dm1 / r * dw + (1.0 - 0.25 * self.b2 * r * r) * w
    }

    fn start(&self, p0: f64) -> (f64, f64) {
        let d = self.d;
        let pexp = 1.0 + 4.0 / d as f64;
        let g0 = p0 - nonlin(p0, d);
        let dg0 = 1.0 - pexp * p0.abs().powf(pexp - 1.0);
        // r² source from the harmonic term enters the quartic coefficient.
        let extra = -0.25 * self.b2 * p0 / (4.0 * (d as f64 + 2.0));
        let (y, dy) = regular_start(p0, g0, dg0, d, self.h);
        (
            y + extra * self.h.powi(4),
            dy + 4.0 * extra * self.h.powi(3),
        )
    }

    /// Forward trajectory on `[0, i_end·h]`; `None` if it reaches zero first.
    fn forward(&self, p0: f64, i_end: usize, keep: bool) -> Option<(Vec<f64>, Vec<f64>)> {
        let f = self.rhs();
        let mut ps = Vec::new();
        let mut dps = Vec::new();
        let (mut p, mut dp) = (p0, 0.0);
        if keep {
            ps.reserve(i_end + 1);
            dps.reserve(i_end + 1);
            ps.push(p);
            dps.push(dp);
        }
        (p, dp) = self.start(p0);
        for i in 1..=i_end {
            if p <= 0.0 {
                return None;
            }
            if keep {
                ps.push(p);
                dps.push(dp);
            }
            if i < i_end {
                (p, dp) = rk4_step(i as f64 * self.h, p, dp, self.h, &f);
                if !p.is_finite() {
                    // Runaway growth means the trajectory undershot.
                    p = f64::MAX;
                    dp = 0.0;
                }
            }
        }
        Some((ps, dps))
    }

    /// Value and slope at `i_end·h` only.
    fn endpoint(&self, p0: f64, i_end: usize) -> Shot {
        let f = self.rhs();
        let (mut p, mut dp) = self.start(p0);
        for i in 1..i_end {
            (p, dp) = rk4_step(i as f64 * self.h, p, dp, self.h, &f);
            if !p.is_finite() {
                return Shot::Turned;
            }
            if p <= 0.0 {
                return Shot::Crossed;
            }
            if dp > 0.0 {
                return Shot::Turned;
            }
        }
        Shot::Reached(p, dp)
    }
}

enum Shot {
    Crossed,
    Turned,
    Reached(f64, f64),
}

/// Shooting outcome: `true` when `P(0)` is too large.
type Classifier<'a> = Box<dyn Fn(f64) -> bool + 'a>;

fn bisect(classify: &Classifier, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    if classify(lo) || !classify(hi) {
        return Err(Error::ProfileExistence(format!(
            "no sign change of the shooting function on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if classify(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Profile for any `|b| ≤ 0.6` including `b = 0` (then `Q_0 = Q`) and
/// negative `b` (then `Q_{−b} = conj Q_b`).
pub fn profile(
    b: f64,
    eta: f64,
    d: usize,
    tol: f64,
    opts: ProfileOptions,
) -> Result<BlowupProfile> {
    if !(1..=4).contains(&d) {
        return Err(Error::Config(format!("unsupported dimension d = {d}")));
    }
    if !(b.abs() <= 0.6) {
        return Err(Error::Config(format!("|b| must not exceed 0.6, got {b}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Config(format!("eta must lie in (0, 1), got {eta}")));
    }
    let q0 = cached_ground_state(d)?.q0;
    let rb = if b == 0.0 { f64::INFINITY } else { r_b(b, eta) };
    let rb_minus = (1.0 - eta).sqrt() * rb;
    let truncated = rb > opts.r_cap;
    let r_end = if truncated { opts.r_cap } else { rb };
    let n = (r_end / opts.dr).ceil() as usize;
    let h = r_end / n as f64;
    let sh = Shooter { d, b2: b * b, h };

    let lo0 = 0.2 * q0;
    let hi0 = 3.0 * q0;
    let (p, dp, p0) = if !truncated && rb <= DIRECT_RADIUS {
        let classify: Classifier = Box::new(|p0| matches!(sh.endpoint(p0, n), Shot::Crossed));
        let (lo, hi) = bisect(&classify, lo0, hi0)?;
        check_width(lo, hi, tol)?;
        let (mut p, dp) = sh
            .forward(lo, n, true)
            .ok_or_else(|| Error::ProfileExistence("lost positivity before R_b".into()))?;
        p[n] = 0.0;
        (p, dp, lo)
    } else {
        let im = (MATCH_RADIUS / h).round() as usize;
        // Inward tail, normalised at the outer end.
        let lin = sh.lin();
        let mut w = vec![0.0; n + 1];
        let mut dw = vec![0.0; n + 1];
        if truncated {
            let kappa = (1.0 - 0.25 * b * b * r_end * r_end).max(0.0).sqrt();
            w[n] = 1e-30;
            dw[n] = -(kappa + (d as f64 - 1.0) / (2.0 * r_end)) * w[n];
        } else {
            w[n] = 0.0;
            dw[n] = -1e-30;
        }
        for i in (im..n).rev() {
            (w[i], dw[i]) = rk4_step((i + 1) as f64 * h, w[i + 1], dw[i + 1], -h, &lin);
            if w[i].abs() > 1e200 {
                return Err(Error::Solver("tail solution overflowed".into()));
            }
        }
        let (wm, dwm) = (w[im], dw[im]);
        let classify: Classifier = Box::new(move |p0| match sh.endpoint(p0, im) {
            Shot::Crossed => true,
            Shot::Turned => false,
            Shot::Reached(pm, dpm) => dpm * wm - pm * dwm < 0.0,
        });
        let (lo, hi) = bisect(&classify, lo0, hi0)?;
        check_width(lo, hi, tol)?;
        let p0 = 0.5 * (lo + hi);
        let (mut p, mut dp) = sh
            .forward(p0, im, true)
            .ok_or_else(|| Error::ProfileExistence("lost positivity before R_b".into()))?;
        let scale = p[im] / wm;
        p.extend(w[im + 1..].iter().map(|v| v * scale));
        dp.extend(dw[im + 1..].iter().map(|v| v * scale));
        (p, dp, p0)
    };
    if (p0 - q0).abs() > 0.5 * q0 {
        return Err(Error::ProfileExistence(format!(
            "P(0) = {p0} is far from Q(0) = {q0}: b = {b} too large for eta = {eta}"
        )));
    }
    if p[..n].iter().any(|&v| !(v > 0.0)) {
        return Err(Error::ProfileExistence(
            "P lost positivity before R_b".into(),
        ));
    }
    Ok(assemble(b, eta, d, h, p, dp, rb, rb_minus, truncated))
}

fn check_width(lo: f64, hi: f64, tol: f64) -> Result<()> {
    if hi - lo > tol * hi {
        return Err(Error::Solver(format!(
            "shooting bracket {:e} wider than tolerance {tol:e}",
            hi - lo
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    b: f64,
    eta: f64,
    d: usize,
    h: f64,
    p: Vec<f64>,
    dp: Vec<f64>,
    rb: f64,
    rb_minus: f64,
    truncated: bool,
) -> BlowupProfile {
    let n = p.len() - 1;
    let dm1 = d as f64 - 1.0;
    let i = Complex64::new(0.0, 1.0);
    let r: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let mut qb = Vec::with_capacity(n + 1);
    let mut dqb = Vec::with_capacity(n + 1);
    let mut d2qb = Vec::with_capacity(n + 1);
    let mut phi = Vec::with_capacity(n + 1);
    let mut d2p = Vec::with_capacity(n + 1);
    let mut psi = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let rk = r[k];
        let (pk, dpk) = (p[k], dp[k]);
        let d2pk = if k == 0 {
            (pk - nonlin(pk, d)) / d as f64
        } else {
            -dm1 / rk * dpk + pk - 0.25 * b * b * rk * rk * pk - nonlin(pk, d)
        };
        d2p.push(d2pk);
        let e = Complex64::from_polar(1.0, -0.25 * b * rk * rk);
        let de = -i * (0.5 * b * rk) * e;
        let d2e = (-i * (0.5 * b) - 0.25 * b * b * rk * rk) * e;
        let qbar = e * pk;
        let dqbar = e * dpk + de * pk;
        let d2qbar = e * d2pk + de * (2.0 * dpk) + d2e * pk;
        let (f, df, d2f) = cutoff(rk, rb_minus, rb);
        qb.push(qbar * f);
        dqb.push(dqbar * f + qbar * df);
        d2qb.push(d2qbar * f + dqbar * (2.0 * df) + qbar * d2f);
        phi.push(f);
        let lap_phi = if k == 0 {
            d as f64 * d2f
        } else {
            d2f + dm1 / rk * df
        };
        let pw = nonlin(pk, d) / pk.max(f64::MIN_POSITIVE);
        let psi_k = if df == 0.0 && d2f == 0.0 && (f == 1.0 || f == 0.0) {
            Complex64::new(0.0, 0.0)
        } else {
            -(dqbar * (2.0 * df)
                + qbar * lap_phi
                + i * (b * rk * df) * qbar
                + qbar * ((f.powf(1.0 + 4.0 / d as f64) - f) * pw))
        };
        psi.push(psi_k);
    }
    let pexp = 2.0 + 4.0 / d as f64;
    let mass_qb = radial_integral(&qb.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(), h, d);
    let grad = radial_integral(&dqb.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(), h, d);
    let lp = radial_integral(
        &qb.iter().map(|z| z.norm().powf(pexp)).collect::<Vec<_>>(),
        h,
        d,
    );
    BlowupProfile {
        b,
        eta,
        d,
        dr: h,
        r,
        p0: p[0],
        p,
        dp,
        d2p,
        qb,
        dqb,
        d2qb,
        phi,
        psi,
        r_b: rb,
        r_b_minus: rb_minus,
        mass_qb,
        energy_qb: energy_from(d, grad, lp),
        truncated,
    }
}

/// `Q_b` for `0 < b ≤ 0.5`, `0 < η ≤ 0.2`.
pub fn solve_qb(b: f64, eta: f64, d: usize, tol: f64) -> Result<BlowupProfile> {
    if !(b > 0.0 && b <= 0.5) {
        return Err(Error::Config(format!("b must lie in (0, 0.5], got {b}")));
    }
    if !(eta > 0.0 && eta <= 0.2) {
        return Err(Error::Config(format!(
            "eta must lie in (0, 0.2], got {eta}"
        )));
    }
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Config(format!(
            "tol must lie in [1e-13, 1e-6], got {tol}"
        )));
    }
    profile(b, eta, d, tol, ProfileOptions::default())
}

impl BlowupProfile {
    /// `(Q_b, Q_b')` at radius `r`.
    pub fn eval(&self, r: f64) -> (Complex64, Complex64) {
        hermite(r, self.dr, &self.qb, &self.dqb)
    }

    /// `(Q_b, Q_b', Q_b'')` at radius `r`.
    pub fn eval2(&self, r: f64) -> (Complex64, Complex64, Complex64) {
        let (f, df) = hermite(r, self.dr, &self.qb, &self.dqb);
        let (_, d2f) = hermite(r, self.dr, &self.dqb, &self.d2qb);
        (f, df, d2f)
    }

    /// `(Q_b, Q_b', Q_b'')` rebuilt from the interpolated `P̄_b` with the
    /// phase and cutoff applied analytically. Smooth on `[0, R_b⁻]` and on
    /// `[R_b⁻, R_b]`, unlike [`Self::eval2`] which interpolates across the
    /// cutoff layer.
    pub fn eval_smooth(&self, r: f64) -> (Complex64, Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        if r >= self.r_b || r > self.r_max() {
            return (zero, zero, zero);
        }
        let (p, _) = hermite(r, self.dr, &self.p, &self.dp);
        let (dp, _) = hermite(r, self.dr, &self.dp, &self.d2p);
        let (b, d) = (self.b, self.d);
        let d2p = if r == 0.0 {
            (p - nonlin(p, d)) / d as f64
        } else {
            -(d as f64 - 1.0) / r * dp + p - 0.25 * b * b * r * r * p - nonlin(p, d)
        };
        let i = Complex64::new(0.0, 1.0);
        let e = Complex64::from_polar(1.0, -0.25 * b * r * r);
        let de = -i * (0.5 * b * r) * e;
        let d2e = (-i * (0.5 * b) - 0.25 * b * b * r * r) * e;
        let q = e * p;
        let dq = e * dp + de * p;
        let d2q = e * d2p + de * (2.0 * dp) + d2e * p;
        let (f, df, d2f) = cutoff(r, self.r_b_minus, self.r_b);
        (q * f, dq * f + q * df, d2q * f + dq * (2.0 * df) + q * d2f)
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    pub fn psi_sup(&self) -> f64 {
        self.psi.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖Q_b − Q_{b'}‖_{L²}` on the common radial range.
    pub fn l2_distance(&self, other: &BlowupProfile) -> f64 {
        let r_end = self.r_max().max(other.r_max());
        let n = (r_end / self.dr).ceil() as usize;
        let h = r_end / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|k| {
                let r = k as f64 * h;
                (self.eval(r).0 - other.eval(r).0).norm_sqr()
            })
            .collect();
        radial_integral(&vals, h, self.d).sqrt()
    }
}

/// `E(Q_b)` by radial quadrature.
pub fn qb_energy(p: &BlowupProfile) -> f64 {
    p.energy_qb
}

/// Fit of `∫|Q_b|² − ∫Q²` against `b²`.
#[derive(Debug, Clone, Serialize)]
pub struct MassExpansion {
    pub c0: f64,
    pub residuals: Vec<f64>,
    pub excess: Vec<f64>,
}

pub fn qb_mass_expansion(bs: &[f64], eta: f64, d: usize) -> Result<MassExpansion> {
    if bs.len() < 3 {
        return Err(Error::Config(format!(
            "mass expansion needs at least 3 values of b, got {}",
            bs.len()
        )));
    }
    if bs.iter().any(|&b| !(b > 0.0 && b <= 0.25)) {
        return Err(Error::Config("every b must lie in (0, 0.25]".into()));
    }
    let opts = ProfileOptions::default();
    let q_mass = profile(0.0, eta, d, 1e-12, opts)?.mass_qb;
    let excess: Vec<f64> = bs
        .iter()
        .map(|&b| Ok(profile(b, eta, d, 1e-12, opts)?.mass_qb - q_mass))
        .collect::<Result<_>>()?;
    let num: f64 = bs.iter().zip(&excess).map(|(b, m)| b * b * m).sum();
    let den: f64 = bs.iter().map(|b| b.powi(4)).sum();
    let c0 = num / den;
    let residuals: Vec<f64> = bs
        .iter()
        .zip(&excess)
        .map(|(b, m)| ((m - c0 * b * b) / (c0 * b * b)).abs())
        .collect();
    if residuals.iter().any(|&r| !(r <= 0.1)) {
        return Err(Error::Fit(format!(
            "mass excess is not quadratic in b (residuals {residuals:?}); b values too large"
        )));
    }
    Ok(MassExpansion {
        c0,
        residuals,
        excess,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiationProfile {
    pub b: f64,
    pub dr: f64,
    pub r: Vec<f64>,
    pub zeta: Vec<Complex64>,
    pub gamma_b: f64,
    /// `(max − min)/mean` of `r^d|ζ|²` over the fit window.
    pub plateau_oscillation: f64,
    pub fit_window: (f64, f64),
}

/// Outgoing radiation for the profile `(b, η)`; the fit window defaults to
/// `[3R_b, 6R_b]`.
pub fn solve_radiation(
    b: f64,
    eta: f64,
    d: usize,
    r_fit: Option<(f64, f64)>,
) -> Result<RadiationProfile> {
    if !(0.15..=0.4).contains(&b) {
        return Err(Error::Config(format!(
            "radiation is resolved for b in [0.15, 0.4], got {b}"
        )));
    }
    let prof = profile(b, eta, d, 1e-12, ProfileOptions::default())?;
    let window = r_fit.unwrap_or((3.0 * prof.r_b, 6.0 * prof.r_b));
    radiation_from_source(b, d, prof.dr, &prof.psi, window)
}

/// Radiation sourced by an arbitrary radial table `psi` on `r_i = i·dr`
/// (zero past the table).
pub fn radiation_from_source(
    b: f64,
    d: usize,
    dr: f64,
    psi: &[Complex64],
    window: (f64, f64),
) -> Result<RadiationProfile> {
    let (r1, r2) = window;
    if !(r2 > r1 && r1 > 0.0) {
        return Err(Error::Config(format!("bad fit window [{r1}, {r2}]")));
    }
    let i = Complex64::new(0.0, 1.0);
    let dm1 = d as f64 - 1.0;
    let df = d as f64;
    // RK4 over doubled steps so that midpoints land on table nodes.
    let h = 2.0 * dr;
    let steps = (r2 / h).ceil() as usize + 1;
    let zero = Complex64::new(0.0, 0.0);
    let src = |r: f64| -> Complex64 {
        let k = (r / dr).round() as usize;
        psi.get(k).copied().unwrap_or(zero)
    };
    let op = |r: f64, z: Complex64, dz: Complex64, s: Complex64| -> Complex64 {
        -(dz * (dm1 / r) + i * (b * r) * dz) + (1.0 - i * (0.5 * b * df)) * z - s
    };
    let integrate = |z0: Complex64, with_source: bool| -> (Vec<Complex64>, Vec<Complex64>) {
        let c = (1.0 - i * (0.5 * b * df)) * z0 / df;
        let mut z = z0 + c * (0.5 * h * h);
        let mut dz = c * h;
        let mut zs = vec![z0, z];
        let mut dzs = vec![zero, dz];
        for k in 1..steps {
            let f = |r: f64, z: Complex64, dz: Complex64| {
                let s = if with_source { src(r) } else { zero };
                op(r, z, dz, s)
            };
            (z, dz) = rk4_step(k as f64 * h, z, dz, h, &f);
            zs.push(z);
            dzs.push(dz);
        }
        (zs, dzs)
    };
    let (zp, dzp) = integrate(zero, true);
    let (zh, dzh) = integrate(Complex64::new(1.0, 0.0), false);
    let r_end = steps as f64 * h;
    let alpha = -df / 2.0 - i / b;
    let a1 = alpha * (alpha + df - 2.0) / (2.0 * i * b);
    let log_deriv = alpha / r_end - 2.0 * a1 * r_end.powi(-3) / (1.0 + a1 * r_end.powi(-2));
    let bc = |z: Complex64, dz: Complex64| dz - log_deriv * z;
    let bh = bc(zh[steps], dzh[steps]);
    if !(bh.norm() > 0.0) || !bh.norm().is_finite() {
        return Err(Error::Solver("radiation matching failed".into()));
    }
    let c = -bc(zp[steps], dzp[steps]) / bh;
    let zeta: Vec<Complex64> = zp.iter().zip(&zh).map(|(p, q)| p + c * q).collect();
    let r: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let i1 = (r1 / h).ceil() as usize;
    let i2 = ((r2 / h).floor() as usize).min(steps);
    if i2 <= i1 + 2 {
        return Err(Error::Config("fit window too narrow".into()));
    }
    let plateau: Vec<f64> = (i1..=i2)
        .map(|k| r[k].powi(d as i32) * zeta[k].norm_sqr())
        .collect();
    let span = (i2 - i1) as f64 * h;
    let mean = simpson(&plateau, h) / span;
    let (mn, mx) = plateau
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let oscillation = if mean > 0.0 { (mx - mn) / mean } else { 0.0 };
    if oscillation > 0.2 {
        return Err(Error::Fit(format!(
            "radiation plateau oscillates by {:.1}% over [{r1}, {r2}]",
            100.0 * oscillation
        )));
    }
    Ok(RadiationProfile {
        b,
        dr: h,
        r,
        zeta,
        gamma_b: mean,
        plateau_oscillation: oscillation,
        fit_window: window,
    })
}

/// Thread-safe memo of profiles keyed by `(b, η, d)`.
#[derive(Debug, Default)]
pub struct ProfileCache {
    opts: Option<ProfileOptions>,
    map: Mutex<HashMap<(u64, u64, usize), Arc<BlowupProfile>>>,
}

impl ProfileCache {
    pub fn new(opts: ProfileOptions) -> Self {
        ProfileCache {
            opts: Some(opts),
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, b: f64, eta: f64, d: usize) -> Result<Arc<BlowupProfile>> {
        let key = (b.to_bits(), eta.to_bits(), d);
        if let Some(p) = self.map.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(profile(b, eta, d, 1e-12, self.opts.unwrap_or_default())?);
        let mut map = self.map.lock().unwrap();
        if map.len() > 4096 {
            map.clear();
        }
        map.insert(key, p.clone());
        Ok(p)
    }
}
