//! The ground state `Q`: unique positive radial solution of
//! `ΔQ − Q + Q^{1+4/d} = 0`.
//!
//! `Q(0)` is located by bisection on the shooting dichotomy: too large and
//! the trajectory crosses zero, too small and it turns back up. Once the
//! bisection has pinned the separatrix to machine precision the forward
//! trajectory is kept down to `Q ≈ 1e-4·Q(0)`; past that point the growing
//! mode amplifies the residual error, so the tail is replaced by the decaying
//! solution of the linearised equation, obtained by integrating inward from
//! `r_max` (the stable direction for the decaying mode).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{energy_from, Field, Grid};
use crate::radial::{hermite, radial_integral, regular_start, rk4_step};

pub const DEFAULT_R_MAX: f64 = 30.0;
pub const DEFAULT_N_R: usize = 30_000;
pub const DEFAULT_TOL: f64 = 1e-12;

/// Relative amplitude at which the forward trajectory hands over to the tail.
const TAIL_SWITCH: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    pub d: usize,
    pub dr: f64,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    /// `Q'(r)`, used for Hermite interpolation.
    pub dq: Vec<f64>,
    pub mass: f64,
    pub grad_sq: f64,
    pub lp_crit: f64,
    pub q0: f64,
    /// Final bisection bracket width on `Q(0)`.
    pub shooting_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// Crossed zero: `Q(0)` too large.
    Over,
    /// Turned upward while positive: `Q(0)` too small.
    Under,
    /// Reached `r_max` without deciding.
    Undecided,
}

fn exponent(d: usize) -> f64 {
    1.0 + 4.0 / d as f64
}

/// `q|q|^{4/d}`.
fn nonlin(q: f64, d: usize) -> f64 {
    let a = q.abs();
    match d {
        1 => q * a * a * a * a,
        2 => q * a * a,
        4 => q * a,
        _ => q * a.powf(4.0 / d as f64),
    }
}

fn rhs(d: usize) -> impl Fn(f64, f64, f64) -> f64 {
    let dm1 = d as f64 - 1.0;
    move |r, q, dq| -dm1 / r * dq + q - nonlin(q, d)
}

fn start(q0: f64, d: usize, h: f64) -> (f64, f64) {
    let p = exponent(d);
    let g0 = q0 - nonlin(q0, d);
    let dg0 = 1.0 - p * q0.abs().powf(p - 1.0);
    regular_start(q0, g0, dg0, d, h)
}

fn shoot(q0: f64, d: usize, h: f64, steps: usize) -> Shot {
    let f = rhs(d);
    let (mut q, mut dq) = start(q0, d, h);
    for i in 1..steps {
        (q, dq) = rk4_step(i as f64 * h, q, dq, h, &f);
        if q <= 0.0 {
            return Shot::Over;
        }
        if dq > 0.0 {
            return Shot::Under;
        }
    }
    Shot::Undecided
}

/// Solve for the ground state on `[0, r_max]` with `n_r` uniform intervals.
pub fn solve_ground_state(d: usize, tol: f64, r_max: f64, n_r: usize) -> Result<GroundState> {
    if !(1..=4).contains(&d) {
        return Err(Error::Config(format!("unsupported dimension d = {d}")));
    }
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Config(format!(
            "tol must lie in [1e-13, 1e-6], got {tol}"
        )));
    }
    if !(r_max > 0.0) || n_r < 100 {
        return Err(Error::Config(format!(
            "need r_max > 0 and n_r >= 100, got r_max = {r_max}, n_r = {n_r}"
        )));
    }
    let h = r_max / n_r as f64;
    let steps = n_r;

    let mut lo = 0.5;
    let mut hi = 5.0;
    if shoot(lo, d, h, steps) != Shot::Under {
        return Err(Error::Solver(format!(
            "bracketing failure: Q(0) = {lo} does not undershoot (r_max = {r_max}, n_r = {n_r})"
        )));
    }
    let mut expansions = 0;
    while shoot(hi, d, h, steps) != Shot::Over {
        expansions += 1;
        if expansions > 3 {
            return Err(Error::Solver(format!(
                "bracketing failure: Q(0) = {hi} does not overshoot (r_max = {r_max}, n_r = {n_r})"
            )));
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(mid, d, h, steps) {
            Shot::Over => hi = mid,
            Shot::Under => lo = mid,
            Shot::Undecided => {
                lo = mid;
                hi = mid;
                break;
            }
        }
    }
    let q0 = 0.5 * (lo + hi);
    let width = hi - lo;
    if width > tol * q0 {
        return Err(Error::Solver(format!(
            "shooting bracket {width:e} wider than tolerance {tol:e}"
        )));
    }

    // Forward trajectory down to the hand-over point.
    let f = rhs(d);
    let mut q = vec![0.0; n_r + 1];
    let mut dq = vec![0.0; n_r + 1];
    q[0] = q0;
    (q[1], dq[1]) = start(q0, d, h);
    let mut switch = None;
    for i in 1..n_r {
        if q[i] < TAIL_SWITCH * q0 {
            switch = Some(i);
            break;
        }
        (q[i + 1], dq[i + 1]) = rk4_step(i as f64 * h, q[i], dq[i], h, &f);
        if q[i + 1] <= 0.0 || dq[i + 1] > 0.0 {
            return Err(Error::Solver(format!(
                "trajectory left the separatrix at r = {:.3} before the tail hand-over",
                (i + 1) as f64 * h
            )));
        }
    }
    let Some(im) = switch else {
        return Err(Error::Solver(format!(
            "Q did not decay below {TAIL_SWITCH:e}·Q(0) on [0, {r_max}]: r_max too small"
        )));
    };

    // Decaying tail of the linearised equation, integrated inward.
    let lin = {
        let dm1 = d as f64 - 1.0;
        move |r: f64, w: f64, dw: f64| -dm1 / r * dw + w
    };
    let mut w = vec![0.0; n_r + 1];
    let mut dw = vec![0.0; n_r + 1];
    w[n_r] = 1.0;
    dw[n_r] = -(1.0 + (d as f64 - 1.0) / (2.0 * r_max));
    for i in (im..n_r).rev() {
        (w[i], dw[i]) = rk4_step((i + 1) as f64 * h, w[i + 1], dw[i + 1], -h, &lin);
    }
    let scale = q[im] / w[im];
    for i in im + 1..=n_r {
        q[i] = scale * w[i];
        dq[i] = scale * dw[i];
    }
    if q[n_r] > 1e-10 * q0 {
        return Err(Error::Solver(format!(
            "Q(r_max) = {:e} is not negligible: r_max too small",
            q[n_r]
        )));
    }
    if q.windows(2).any(|p| !(p[1] < p[0])) || q.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Solver(
            "ground state not positive and strictly decreasing".into(),
        ));
    }

    let p = exponent(d);
    let mass = radial_integral(&q.iter().map(|v| v * v).collect::<Vec<_>>(), h, d);
    let grad_sq = radial_integral(&dq.iter().map(|v| v * v).collect::<Vec<_>>(), h, d);
    let lp_crit = radial_integral(&q.iter().map(|v| v.powf(p + 1.0)).collect::<Vec<_>>(), h, d);
    Ok(GroundState {
        d,
        dr: h,
        r: (0..=n_r).map(|i| i as f64 * h).collect(),
        q,
        dq,
        mass,
        grad_sq,
        lp_crit,
        q0,
        shooting_width: width,
    })
}

/// Ground state with the default radial resolution.
pub fn ground_state(d: usize) -> Result<GroundState> {
    solve_ground_state(d, DEFAULT_TOL, DEFAULT_R_MAX, DEFAULT_N_R)
}

/// Process-wide [`ground_state`] per dimension, computed once.
pub fn cached_ground_state(d: usize) -> Result<&'static GroundState> {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GroundState>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(gs) = map.lock().unwrap().get(&d) {
        return Ok(gs);
    }
    let gs: &'static GroundState = Box::leak(Box::new(ground_state(d)?));
    map.lock().unwrap().insert(d, gs);
    Ok(gs)
}

impl GroundState {
    /// `(Q(r), Q'(r))`, zero beyond the table.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        hermite(r, self.dr, &self.q, &self.dq)
    }

    pub fn energy(&self) -> f64 {
        energy_from(self.d, self.grad_sq, self.lp_crit)
    }

    pub fn l2norm(&self) -> f64 {
        self.mass.sqrt()
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// Radius where `Q` falls to half its peak.
    pub fn half_max_radius(&self) -> f64 {
        let half = 0.5 * self.q0;
        let i = self
            .q
            .iter()
            .position(|&v| v <= half)
            .unwrap_or(self.q.len() - 1);
        if i == 0 {
            return 0.0;
        }
        let (a, b) = (self.q[i - 1], self.q[i]);
        self.r[i - 1] + (a - half) / (a - b) * self.dr
    }

    /// Fraction of `∫Q²` carried by `|y| > rho`.
    pub fn mass_outside(&self, rho: f64) -> f64 {
        if rho >= self.r_max() {
            return 0.0;
        }
        let i = (rho / self.dr).floor() as usize;
        let inner: Vec<f64> = self.q[..=i].iter().map(|v| v * v).collect();
        let m_in = radial_integral(&inner, self.dr, self.d);
        ((self.mass - m_in) / self.mass).max(0.0)
    }

    /// Largest pointwise residual of the radial equation, measured with a
    /// fourth-order finite-difference stencil of spacing `8·dr` (the stencil,
    /// not the solver, sets the floor of this number).
    pub fn residual_max(&self) -> f64 {
        let s = 8;
        let h = s as f64 * self.dr;
        let dm1 = self.d as f64 - 1.0;
        let mut worst: f64 = 0.0;
        for i in (2 * s)..(self.q.len() - 2 * s) {
            let q = &self.q;
            let d2 = (-q[i + 2 * s] + 16.0 * q[i + s] - 30.0 * q[i] + 16.0 * q[i - s]
                - q[i - 2 * s])
                / (12.0 * h * h);
            let d1 = (-q[i + 2 * s] + 8.0 * q[i + s] - 8.0 * q[i - s] + q[i - 2 * s]) / (12.0 * h);
            let res = d2 + dm1 / self.r[i] * d1 - q[i] + nonlin(q[i], self.d);
            worst = worst.max(res.abs());
        }
        worst
    }
}

/// Result of placing a rescaled ground state on a grid.
#[derive(Debug, Clone)]
pub struct GridSample {
    pub field: Field,
    /// Fraction of the profile's mass lying outside the box.
    pub leakage: f64,
    /// Set when the leakage exceeds `1e-10`.
    pub tail_warning: bool,
}

/// `λ^{-d/2} Q(|x − x0|/λ) e^{iγ}` on `grid`.
pub fn sample_on_grid(
    gs: &GroundState,
    grid: &Grid,
    lambda: f64,
    gamma: f64,
    x0: &[f64],
) -> Result<GridSample> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if grid.d != gs.d || x0.len() != grid.d {
        return Err(Error::Config(
            "dimension mismatch between grid, profile and x0".into(),
        ));
    }
    let amp = lambda.powf(-(grid.d as f64) / 2.0);
    let phase = Complex64::from_polar(amp, gamma);
    let field = Field::from_fn(*grid, |x| {
        let r = x
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        phase * gs.eval(r / lambda).0
    });
    let wall = x0
        .iter()
        .map(|&c| (c + grid.half_width).min(grid.half_width - grid.dx - c))
        .fold(f64::INFINITY, f64::min);
    let leakage = gs.mass_outside((wall / lambda).max(0.0));
    let tail_warning = leakage > 1e-10;
    if tail_warning {
        log::warn!("ground-state tail leaks {leakage:e} of the mass outside the box");
    }
    Ok(GridSample {
        field,
        leakage,
        tail_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, observables};
    use std::f64::consts::PI;

    fn closed_form(x: f64) -> f64 {
        3f64.powf(0.25) / (2.0 * x).cosh().sqrt()
    }

    #[test]
    fn one_dimensional_closed_form() {
        let gs = ground_state(1).unwrap();
        let err =
            gs.r.iter()
                .zip(&gs.q)
                .map(|(&r, &q)| (q - closed_form(r)).abs())
                .fold(0.0, f64::max);
        assert!(err < 1e-8, "sup error {err:e}");
        assert!((gs.q0 - 3f64.powf(0.25)).abs() < 1e-9);
        assert!(
            (gs.mass - 3f64.sqrt() * PI / 2.0).abs() < 1e-8,
            "{}",
            gs.mass
        );
        assert!(gs.energy().abs() < 1e-8 * gs.mass);
    }

    #[test]
    fn pohozaev_relations_in_one_dimension() {
        let gs = ground_state(1).unwrap();
        assert!((gs.mass / (2.0 * gs.grad_sq) - 1.0).abs() < 1e-6);
        assert!((gs.lp_crit / (3.0 * gs.grad_sq) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn residual_is_small() {
        let gs = ground_state(1).unwrap();
        assert!(gs.residual_max() < 1e-7, "{:e}", gs.residual_max());
    }

    #[test]
    fn zero_energy_in_every_dimension() {
        for d in 1..=4 {
            let gs = ground_state(d).unwrap();
            assert!(
                gs.energy().abs() < 1e-8 * gs.mass,
                "d = {d}: E = {:e}",
                gs.energy()
            );
            assert!(gs.q.windows(2).all(|p| p[1] < p[0]));
        }
    }

    #[test]
    fn refinement_changes_mass_little() {
        for d in [1, 2] {
            let a = solve_ground_state(d, 1e-12, 30.0, 30_000).unwrap();
            let b = solve_ground_state(d, 1e-12, 30.0, 60_000).unwrap();
            assert!(
                (a.mass - b.mass).abs() < 1e-9,
                "d = {d}: {:e}",
                a.mass - b.mass
            );
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            solve_ground_state(5, 1e-12, 30.0, 30_000),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            solve_ground_state(1, 1e-3, 30.0, 30_000),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            solve_ground_state(1, 1e-12, 5.0, 5_000),
            Err(Error::Solver(_))
        ));
    }

    #[test]
    fn sampling_preserves_mass_and_scales_gradient() {
        let gs = ground_state(1).unwrap();
        let g = make_grid(1, 1024, 20.0).unwrap();
        let s = sample_on_grid(&gs, &g, 1.0, 0.0, &[0.0]).unwrap();
        assert!(!s.tail_warning);
        let o = observables(&s.field).unwrap();
        assert!((o.mass - gs.mass).abs() < 1e-8);
        let s = sample_on_grid(&gs, &g, 0.5, 0.0, &[0.0]).unwrap();
        let o2 = observables(&s.field).unwrap();
        assert!(
            (o2.grad_sq - 4.0 * gs.grad_sq).abs() < 1e-6,
            "{}",
            o2.grad_sq
        );
    }

    #[test]
    fn sampling_applies_phase() {
        let gs = ground_state(1).unwrap();
        let g = make_grid(1, 256, 20.0).unwrap();
        let a = sample_on_grid(&gs, &g, 1.0, 0.0, &[0.0]).unwrap().field;
        let b = sample_on_grid(&gs, &g, 1.0, PI / 2.0, &[0.0])
            .unwrap()
            .field;
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((Complex64::new(0.0, 1.0) * x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn narrow_box_raises_tail_warning() {
        let gs = ground_state(1).unwrap();
        let g = make_grid(1, 256, 4.0).unwrap();
        let s = sample_on_grid(&gs, &g, 1.0, 0.0, &[0.0]).unwrap();
        assert!(s.tail_warning);
    }
}
