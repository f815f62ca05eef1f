//! Geometrical decomposition `u = λ^{−d/2}(Q_b + ε)((x−x0)/λ)e^{iγ}`.
//!
//! The parameters are fixed by
//! `Re⟨ε, ΛQ_b⟩ = 0`, `Re⟨ε, yQ_b⟩ = 0`, `Im⟨ε, Λ²Q_b⟩ = 0`,
//! `Im⟨ε, ΛQ_b⟩ = 0` with `Λf = d/2 f + y·∇f`. Inner products are taken in
//! the `y` variable. In one dimension they are integrated with Gauss–Legendre
//! panels that respect the cutoff layer of `Q_b`, with `u` interpolated by
//! 8-point Lagrange; otherwise they are grid sums with Jacobian `λ^{−d}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::estimate_lambda_with;
use crate::error::{Error, Result};
use crate::field::{Field, Spectral};
use crate::ground_state::GroundState;
use crate::profiles::{BlowupProfile, ProfileCache, ProfileOptions};

/// Step used for the `b`-column of the Newton Jacobian.
pub const DB: f64 = 1e-4;
/// Radius beyond which the local weight `e^{−|y|}` is dropped.
const WEIGHT_CUTOFF: f64 = 40.0;
const B_LIMIT: f64 = 0.55;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub lambda: f64,
    pub b: f64,
    pub gamma: f64,
    pub x0: Vec<f64>,
    /// `(∫|ε|²e^{−|y|})^{1/2}`.
    pub eps_l2_local: f64,
    /// `‖∇ε‖_{L²}`.
    pub eps_grad: f64,
    pub converged: bool,
    pub newton_iters: usize,
    /// Orthogonality residuals divided by `‖Q‖²`.
    pub residuals: Vec<f64>,
}

impl ModulationState {
    pub fn guess(lambda: f64, b: f64, gamma: f64, x0: Vec<f64>) -> Self {
        ModulationState {
            lambda,
            b,
            gamma,
            x0,
            eps_l2_local: f64::NAN,
            eps_grad: f64::NAN,
            converged: false,
            newton_iters: 0,
            residuals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModulationOptions {
    /// Convergence when every residual is below `tol·‖Q‖²`.
    pub tol: f64,
    pub max_iter: usize,
    pub eta: f64,
    pub profile: ProfileOptions,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        ModulationOptions {
            tol: 1e-10,
            max_iter: 50,
            eta: 0.05,
            profile: ProfileOptions {
                dr: 2e-3,
                r_cap: 60.0,
            },
        }
    }
}

/// Principal value in `(−π, π]`.
pub fn wrap_angle(g: f64) -> f64 {
    let mut x = g.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// Decomposition engine for one grid: owns the transform plans and a profile
/// cache.
pub struct Modulator<'a> {
    gs: &'a GroundState,
    spectral: Spectral,
    cache: ProfileCache,
    lines: Mutex<HashMap<u64, Arc<LineQuad>>>,
    pub opts: ModulationOptions,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, eight points.
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];
const PANEL: f64 = 0.05;

/// Profile directions tabulated on positive quadrature nodes in `y`.
struct LineQuad {
    y: Vec<f64>,
    w: Vec<f64>,
    q: Vec<Complex64>,
    l1: Vec<Complex64>,
    l2: Vec<Complex64>,
}

impl LineQuad {
    fn new(prof: &BlowupProfile) -> Self {
        let end = prof.r_b.min(prof.r_max());
        let mut cuts = vec![0.0];
        if prof.r_b_minus < end {
            cuts.push(prof.r_b_minus);
        }
        cuts.push(end);
        let mut lq = LineQuad {
            y: Vec::new(),
            w: Vec::new(),
            q: Vec::new(),
            l1: Vec::new(),
            l2: Vec::new(),
        };
        for seg in cuts.windows(2) {
            let m = ((seg[1] - seg[0]) / PANEL).ceil().max(1.0) as usize;
            let h = (seg[1] - seg[0]) / m as f64;
            for j in 0..m {
                let mid = seg[0] + (j as f64 + 0.5) * h;
                for k in 0..8 {
                    let (x, w) = if k < 4 {
                        (-GL_X[k], GL_W[k])
                    } else {
                        (GL_X[k - 4], GL_W[k - 4])
                    };
                    let r = mid + 0.5 * h * x;
                    let (q, dq, d2q) = prof.eval_smooth(r);
                    lq.y.push(r);
                    lq.w.push(0.5 * h * w);
                    lq.q.push(q);
                    lq.l1.push(q * 0.5 + dq * r);
                    lq.l2.push(q * 0.25 + dq * (2.0 * r) + d2q * (r * r));
                }
            }
        }
        lq
    }
}

/// Eight-point Lagrange interpolation on the periodic line.
fn interp_periodic(v: &[Complex64], grid: &crate::field::Grid, x: f64) -> Complex64 {
    let n = grid.n as i64;
    let t = (x + grid.half_width) / grid.dx;
    let i0 = t.floor();
    let s = t - i0;
    let base = i0 as i64 - 3;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..8i64 {
        let mut l = 1.0;
        for m in 0..8i64 {
            if m != j {
                l *= (s + 3.0 - m as f64) / (j - m) as f64;
            }
        }
        acc += v[(base + j).rem_euclid(n) as usize] * l;
    }
    acc
}

#[derive(Clone, Copy)]
struct Params<'p> {
    loglam: f64,
    gamma: f64,
    x0: &'p [f64],
}

impl<'a> Modulator<'a> {
    pub fn new(gs: &'a GroundState, grid: crate::field::Grid, opts: ModulationOptions) -> Self {
        Modulator {
            gs,
            spectral: Spectral::new(grid),
            cache: ProfileCache::new(opts.profile),
            lines: Mutex::new(HashMap::new()),
            opts,
        }
    }

    pub fn profile(&self, b: f64) -> Result<Arc<BlowupProfile>> {
        self.cache.get(b, self.opts.eta, self.gs.d)
    }

    /// Minimum-image displacement `(x − x0)` on the periodic box.
    fn displacement(&self, flat: usize, x0: &[f64], out: &mut [f64]) {
        let g = self.spectral.grid();
        g.point(flat, out);
        let period = 2.0 * g.half_width;
        for (v, c) in out.iter_mut().zip(x0) {
            *v = (*v - c + g.half_width).rem_euclid(period) - g.half_width;
        }
    }

    fn line_quad(&self, prof: &BlowupProfile) -> Arc<LineQuad> {
        let key = prof.b.to_bits();
        if let Some(l) = self.lines.lock().unwrap().get(&key) {
            return l.clone();
        }
        let l = Arc::new(LineQuad::new(prof));
        let mut map = self.lines.lock().unwrap();
        if map.len() > 4096 {
            map.clear();
        }
        map.insert(key, l.clone());
        l
    }

    /// Raw orthogonality inner products. On the line they are integrated in
    /// `y` by Gauss–Legendre panels split at the cutoff, with `u`
    /// interpolated; otherwise by grid sums.
    fn residual(&self, u: &Field, prof: &BlowupProfile, p: Params) -> Vec<f64> {
        if u.grid.d == 1 {
            return self.residual_line(u, prof, p);
        }
        let g = self.spectral.grid();
        let d = g.d;
        let df = d as f64;
        let lam = p.loglam.exp();
        let amp = Complex64::from_polar(lam.powf(df / 2.0), -p.gamma);
        let jac = g.cell() * lam.powf(-df);
        let r_max = prof.r_max();
        let mut out = vec![0.0; d + 3];
        let mut x = [0.0; 4];
        for (flat, z) in u.values.iter().enumerate() {
            self.displacement(flat, p.x0, &mut x[..d]);
            let r = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt() / lam;
            if r > r_max {
                continue;
            }
            let (q, dq, d2q) = prof.eval2(r);
            let eps = amp * z - q;
            let l1 = q * (df / 2.0) + dq * r;
            let l2 = q * (df * df / 4.0) + dq * ((df + 1.0) * r) + d2q * (r * r);
            out[0] += (eps * l1.conj()).re;
            for ax in 0..d {
                out[1 + ax] += (eps * q.conj()).re * (x[ax] / lam);
            }
            out[d + 1] += (eps * l2.conj()).im;
            out[d + 2] += (eps * l1.conj()).im;
        }
        for v in &mut out {
            *v *= jac;
        }
        out
    }

    fn residual_line(&self, u: &Field, prof: &BlowupProfile, p: Params) -> Vec<f64> {
        let lq = self.line_quad(prof);
        let lam = p.loglam.exp();
        let amp = Complex64::from_polar(lam.sqrt(), -p.gamma);
        let mut out = vec![0.0; 4];
        for k in 0..lq.y.len() {
            for sign in [1.0, -1.0] {
                let y = sign * lq.y[k];
                let eps = amp * interp_periodic(&u.values, &u.grid, lam * y + p.x0[0]) - lq.q[k];
                let w = lq.w[k];
                let c1 = eps * lq.l1[k].conj();
                out[0] += w * c1.re;
                out[1] += w * (eps * lq.q[k].conj()).re * y;
                out[2] += w * (eps * lq.l2[k].conj()).im;
                out[3] += w * c1.im;
            }
        }
        out
    }

    /// `ε` pulled back to the physical grid: `e^{−iγ}λ^{d/2}u(x) − Q_b((x−x0)/λ)`.
    pub fn remainder(&self, u: &Field, state: &ModulationState) -> Result<Field> {
        let prof = self.profile(state.b)?;
        let g = self.spectral.grid();
        let d = g.d;
        let lam = state.lambda;
        let amp = Complex64::from_polar(lam.powf(d as f64 / 2.0), -state.gamma);
        let mut x = [0.0; 4];
        let mut eps = Field::zeros(*g);
        for (flat, (e, z)) in eps.values.iter_mut().zip(&u.values).enumerate() {
            self.displacement(flat, &state.x0, &mut x[..d]);
            let r = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt() / lam;
            *e = amp * z - prof.eval(r).0;
        }
        Ok(eps)
    }

    fn fill_norms(&self, u: &Field, state: &mut ModulationState) -> Result<()> {
        let eps = self.remainder(u, state)?;
        let g = self.spectral.grid();
        let d = g.d;
        let lam = state.lambda;
        let jac = g.cell() * lam.powf(-(d as f64));
        let mut x = [0.0; 4];
        let mut local = 0.0;
        for (flat, e) in eps.values.iter().enumerate() {
            self.displacement(flat, &state.x0, &mut x[..d]);
            let r = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt() / lam;
            if r <= WEIGHT_CUTOFF {
                local += e.norm_sqr() * (-r).exp();
            }
        }
        state.eps_l2_local = (local * jac).sqrt();
        // ∇_y = λ∇_x.
        state.eps_grad = (self.spectral.grad_sq(&eps) * lam * lam * lam.powf(-(d as f64))).sqrt();
        Ok(())
    }

    /// `‖ε‖_{L²}` at a candidate state.
    pub fn remainder_l2(&self, u: &Field, state: &ModulationState) -> Result<f64> {
        let eps = self.remainder(u, state)?;
        Ok((eps.mass() * state.lambda.powf(-(self.gs.d as f64))).sqrt())
    }

    pub fn quick_estimate(&self, u: &Field) -> Result<ModulationState> {
        quick_estimate_with(&self.spectral, u, self.gs)
    }

    /// Damped Newton on `(log λ, b, γ, x0)`.
    pub fn decompose(&self, u: &Field, init: &ModulationState) -> Result<ModulationState> {
        let d = self.gs.d;
        if u.grid != *self.spectral.grid() {
            return Err(Error::Config("field is not on the modulator grid".into()));
        }
        if init.x0.len() != d || !(init.lambda > 0.0) {
            return Err(Error::Config("initial guess has the wrong shape".into()));
        }
        if !(init.b.abs() <= B_LIMIT) {
            return Err(Error::GuessQuality(format!(
                "initial b = {} out of range",
                init.b
            )));
        }
        let qn = self.gs.mass;
        let start_res = self.remainder_l2(u, init)?;
        if !(start_res < 0.5 * self.gs.l2norm()) {
            return Err(Error::GuessQuality(format!(
                "remainder {start_res:.3e} exceeds half of the ground-state norm"
            )));
        }
        let n = d + 3;
        // θ = (log λ, b, γ, x0…).
        let mut th = vec![init.lambda.ln(), init.b, init.gamma];
        th.extend_from_slice(&init.x0);
        let eval = |th: &[f64]| -> Result<Vec<f64>> {
            let prof = self.profile(th[1])?;
            Ok(self
                .residual(
                    u,
                    &prof,
                    Params {
                        loglam: th[0],
                        gamma: th[2],
                        x0: &th[3..],
                    },
                )
                .into_iter()
                .map(|v| v / qn)
                .collect())
        };
        let norm = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let maxabs = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut f = eval(&th)?;
        let mut iters = 0;
        let mut converged = maxabs(&f) < self.opts.tol;
        while !converged && iters < self.opts.max_iter {
            iters += 1;
            let lam = th[0].exp();
            let steps: Vec<f64> = (0..n)
                .map(|j| match j {
                    0 | 2 => 1e-6,
                    1 => DB,
                    _ => 1e-6 * lam,
                })
                .collect();
            let mut jac = vec![vec![0.0; n]; n];
            for j in 0..n {
                let mut tp = th.clone();
                tp[j] += steps[j];
                let fp = eval(&tp)?;
                for i in 0..n {
                    jac[i][j] = (fp[i] - f[i]) / steps[j];
                }
            }
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut delta = match solve_linear(jac, rhs) {
                Some(x) => x,
                None => break,
            };
            // Trust region: at most 0.3 in log λ, γ and x0/λ, 0.05 in b.
            let limits: Vec<f64> = (0..n)
                .map(|j| match j {
                    1 => 0.05,
                    0 | 2 => 0.3,
                    _ => 0.3 * lam,
                })
                .collect();
            let shrink = delta
                .iter()
                .zip(&limits)
                .map(|(v, l)| v.abs() / l)
                .fold(1.0f64, f64::max);
            for v in &mut delta {
                *v /= shrink;
            }
            let mut t = 1.0;
            let f_norm = norm(&f);
            let mut accepted = false;
            for _ in 0..30 {
                let mut cand: Vec<f64> = th.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
                cand[1] = cand[1].clamp(-B_LIMIT, B_LIMIT);
                if let Ok(fc) = eval(&cand) {
                    if norm(&fc) < f_norm {
                        th = cand;
                        f = fc;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            converged = maxabs(&f) < self.opts.tol;
        }
        let mut state = ModulationState {
            lambda: th[0].exp(),
            b: th[1],
            gamma: wrap_angle(th[2]),
            x0: th[3..].to_vec(),
            eps_l2_local: f64::NAN,
            eps_grad: f64::NAN,
            converged,
            newton_iters: iters,
            residuals: f,
        };
        self.fill_norms(u, &mut state)?;
        Ok(state)
    }

    /// Orthogonality residuals (over `‖Q‖²`) at an arbitrary state.
    pub fn residuals_at(&self, u: &Field, state: &ModulationState) -> Result<Vec<f64>> {
        let prof = self.profile(state.b)?;
        Ok(self
            .residual(
                u,
                &prof,
                Params {
                    loglam: state.lambda.ln(),
                    gamma: state.gamma,
                    x0: &state.x0,
                },
            )
            .into_iter()
            .map(|v| v / self.gs.mass)
            .collect())
    }

    /// `λ^{−d/2}Q_b((x−x0)/λ)e^{iγ}` on the modulator grid.
    pub fn synthesize(&self, lambda: f64, b: f64, gamma: f64, x0: &[f64]) -> Result<Field> {
        let prof = self.profile(b)?;
        let g = *self.spectral.grid();
        let d = g.d;
        let amp = Complex64::from_polar(lambda.powf(-(d as f64) / 2.0), gamma);
        let mut x = [0.0; 4];
        let mut u = Field::zeros(g);
        for (flat, z) in u.values.iter_mut().enumerate() {
            self.displacement(flat, x0, &mut x[..d]);
            let r = x[..d].iter().map(|v| v * v).sum::<f64>().sqrt() / lambda;
            *z = amp * prof.eval(r).0;
        }
        Ok(u)
    }

    /// Sequential decomposition of time-ordered snapshots with warm starts.
    pub fn track(&self, snapshots: &[Field]) -> Result<ModulationTrack> {
        let mut rows: Vec<TrackRow> = Vec::with_capacity(snapshots.len());
        let mut prev: Option<ModulationState> = None;
        for u in snapshots {
            if let Some(r) = rows.last() {
                if !(u.time > r.t) {
                    return Err(Error::Config("snapshots are not time-ordered".into()));
                }
            }
            let quick = self.quick_estimate(u)?;
            let init = match &prev {
                Some(p) if p.converged => {
                    // Keep the warm start but follow the observed scale.
                    let mut g = p.clone();
                    g.lambda = quick.lambda;
                    g.x0 = quick.x0.clone();
                    g
                }
                _ => quick.clone(),
            };
            let state = match self.decompose(u, &init) {
                Ok(s) => s,
                Err(Error::GuessQuality(_)) if init != quick => self.decompose(u, &quick)?,
                Err(e) => return Err(e),
            };
            if !state.converged {
                log::warn!("decomposition at t = {} did not converge", u.time);
            }
            let b_geom = match rows.last() {
                Some(r) => geometric_b(r.t, r.state.lambda, u.time, state.lambda),
                None => f64::NAN,
            };
            prev = Some(state.clone());
            rows.push(TrackRow {
                t: u.time,
                discrepancy: (b_geom - state.b).abs(),
                b_geom,
                state,
            });
        }
        Ok(ModulationTrack { rows })
    }
}

/// `−Δlog λ/Δs` between two samples, with `Δs` integrated exactly for `λ²`
/// linear in `t`.
pub fn geometric_b(t0: f64, l0: f64, t1: f64, l1: f64) -> f64 {
    let dt = t1 - t0;
    let (a, c) = (l0 * l0, l1 * l1);
    let ds = if ((a - c) / a).abs() < 1e-12 {
        dt / a
    } else {
        dt * (a / c).ln() / (a - c)
    };
    -(l1 / l0).ln() / ds
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if !(a[p][k].abs() > 0.0) {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `λ` from the gradient, `x0` from the peak (with a parabolic sub-grid
/// correction per axis), `γ` from the phase at the peak, `b = 0`.
pub fn quick_estimate(u: &Field, gs: &GroundState) -> Result<ModulationState> {
    quick_estimate_with(&Spectral::new(u.grid), u, gs)
}

fn quick_estimate_with(spec: &Spectral, u: &Field, gs: &GroundState) -> Result<ModulationState> {
    let lambda = estimate_lambda_with(spec, u, gs)?;
    let g = u.grid;
    let d = g.d;
    let k = u.argmax_abs();
    let mut idx = [0usize; 4];
    g.unravel(k, &mut idx[..d]);
    let mut x0 = Vec::with_capacity(d);
    for ax in 0..d {
        let mut nb = idx;
        nb[ax] = (idx[ax] + g.n - 1) % g.n;
        let fm = u.values[g.ravel(&nb[..d])].norm();
        nb[ax] = (idx[ax] + 1) % g.n;
        let fp = u.values[g.ravel(&nb[..d])].norm();
        let f0 = u.values[k].norm();
        let den = fm - 2.0 * f0 + fp;
        let shift = if den < 0.0 {
            0.5 * (fm - fp) / den
        } else {
            0.0
        };
        x0.push(g.coord(idx[ax]) + shift.clamp(-0.5, 0.5) * g.dx);
    }
    let gamma = wrap_angle(u.values[k].arg());
    Ok(ModulationState::guess(lambda, 0.0, gamma, x0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub t: f64,
    pub state: ModulationState,
    /// `−λ_s/λ` from consecutive rows.
    pub b_geom: f64,
    /// `|b_geom − b|`.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModulationTrack {
    pub rows: Vec<TrackRow>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::ground_state::{ground_state, sample_on_grid};

    fn setup(n: usize, l: f64) -> (GroundState, Grid) {
        (ground_state(1).unwrap(), Grid::new(1, n, l).unwrap())
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn quick_estimate_examples() {
        let (gs, grid) = setup(4096, 20.0);
        let q = sample_on_grid(&gs, &grid, 1.0, 0.0, &[0.0]).unwrap().field;
        let s = quick_estimate(&q, &gs).unwrap();
        assert!((s.lambda - 1.0).abs() < 1e-10 && s.x0[0].abs() < 1e-12 && s.gamma == 0.0);
        let mut qr = q.clone();
        qr.scale(Complex64::from_polar(1.0, PI / 3.0));
        assert!((quick_estimate(&qr, &gs).unwrap().gamma - PI / 3.0).abs() < 1e-12);
        let q2 = sample_on_grid(&gs, &grid, 0.5, 0.0, &[2.0]).unwrap().field;
        let s2 = quick_estimate(&q2, &gs).unwrap();
        assert!((s2.lambda - 0.5).abs() < 1e-6);
        assert!((s2.x0[0] - 2.0).abs() < grid.dx);
        assert!(matches!(
            quick_estimate(&Field::zeros(grid), &gs),
            Err(Error::UndefinedScale(_))
        ));
    }

    #[test]
    fn ground_state_decomposes_to_identity() {
        let (gs, grid) = setup(2048, 20.0);
        let m = Modulator::new(&gs, grid, ModulationOptions::default());
        let q = sample_on_grid(&gs, &grid, 1.0, 0.0, &[0.0]).unwrap().field;
        let s = m.decompose(&q, &m.quick_estimate(&q).unwrap()).unwrap();
        assert!(s.converged);
        assert!((s.lambda - 1.0).abs() < 1e-8, "{s:?}");
        assert!(
            s.b.abs() < 1e-8 && s.gamma.abs() < 1e-8 && s.x0[0].abs() < 1e-8,
            "{s:?}"
        );
    }

    #[test]
    fn synthetic_round_trip() {
        let (gs, grid) = setup(4096, 15.0);
        let m = Modulator::new(&gs, grid, ModulationOptions::default());
        let u = m.synthesize(0.3, 0.1, 1.2, &[0.7]).unwrap();
        let init = ModulationState::guess(0.31, 0.08, 1.15, vec![0.69]);
        let s = m.decompose(&u, &init).unwrap();
        assert!(s.converged, "{s:?}");
        assert!((s.lambda - 0.3).abs() < 1e-8);
        assert!((s.b - 0.1).abs() < 1e-8);
        assert!((s.gamma - 1.2).abs() < 1e-8);
        assert!((s.x0[0] - 0.7).abs() < 1e-8);
        assert!(s.eps_l2_local < 1e-8 && s.eps_grad < 1e-6);
    }

    #[test]
    fn far_guess_is_rejected() {
        let (gs, grid) = setup(1024, 20.0);
        let m = Modulator::new(&gs, grid, ModulationOptions::default());
        let q = sample_on_grid(&gs, &grid, 1.0, 0.0, &[0.0]).unwrap().field;
        let bad = ModulationState::guess(1.0, 0.0, 0.0, vec![8.0]);
        assert!(matches!(m.decompose(&q, &bad), Err(Error::GuessQuality(_))));
    }

    #[test]
    fn geometric_b_of_exact_family() {
        // λ(s) = e^{−b s} gives λ² = 1 − 2bt.
        let b = 0.1;
        let l = |t: f64| (1.0 - 2.0 * b * t).sqrt();
        let g = geometric_b(0.5, l(0.5), 0.9, l(0.9));
        assert!((g - b).abs() < 1e-12);
    }
}
