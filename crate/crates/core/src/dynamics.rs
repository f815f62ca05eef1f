//! Time integration of `iu_t + Δu + |u|^{4/d}u + iau = 0`.
//!
//! Strang splitting `L(dt/2) N(dt) L(dt/2)`: `L` is the exact Fourier
//! propagator, `N` the exact solution of `iu_t = −|u|^{4/d}u − iau`, which
//! damps the modulus by `e^{−aτ}` and rotates the phase by
//! `ρ₀^{4/d}·(d/4a)(1 − e^{−4aτ/d})`. Both substeps scale the L² norm by
//! exactly the continuous factor, so mass decay holds to rounding.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{modulus_pow_4_over_d, Field, Grid, ObservableSet, Spectral};
use crate::ground_state::{sample_on_grid, GroundState};
use crate::profiles::{profile, ProfileOptions};

fn yes() -> bool {
    true
}

fn default_max_steps() -> usize {
    10_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub d: usize,
    /// Friction coefficient.
    pub a: f64,
    pub grid: Grid,
    pub dt0: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub lambda_floor: f64,
    pub gradnorm_ceiling: f64,
    /// Keep every `snapshot_stride`-th state; 0 keeps only the final one.
    pub snapshot_stride: usize,
    pub seed: u64,
    /// When false the step is always `dt0`.
    #[serde(default = "yes")]
    pub adaptive: bool,
    #[serde(default = "yes")]
    pub dealias: bool,
    /// Diagnostic switch: false leaves only the linear flow and damping.
    #[serde(default = "yes")]
    pub nonlinear: bool,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub scheme: Scheme,
    /// Cumulative mass fraction the dealiasing mask may remove before the
    /// grid counts as exhausted.
    #[serde(default = "default_mask_loss_tol")]
    pub mask_loss_tol: f64,
}

fn default_mask_loss_tol() -> f64 {
    1e-11
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Second-order Strang splitting.
    #[default]
    Strang,
    /// Fourth-order triple-jump composition of Strang steps.
    Fourth,
}

impl SimConfig {
    /// Defaults for a run on `grid` with friction `a`.
    pub fn new(grid: Grid, a: f64) -> Self {
        SimConfig {
            d: grid.d,
            a,
            grid,
            dt0: 1e-3,
            cfl: 0.05,
            t_end: 1.0,
            lambda_floor: 1e-4,
            gradnorm_ceiling: 1e8,
            snapshot_stride: 0,
            seed: 0,
            adaptive: true,
            dealias: true,
            nonlinear: true,
            max_steps: default_max_steps(),
            scheme: Scheme::Strang,
            mask_loss_tol: default_mask_loss_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d != self.grid.d {
            return bad(format!("d = {} but grid has d = {}", self.d, self.grid.d));
        }
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return bad(format!("a must be finite and nonnegative, got {}", self.a));
        }
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return bad(format!("dt0 must be positive, got {}", self.dt0));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.lambda_floor > 0.0) {
            return bad(format!(
                "lambda_floor must be positive, got {}",
                self.lambda_floor
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.mask_loss_tol >= 0.0) {
            return bad(format!("mask_loss_tol must be nonnegative, got {}", self.mask_loss_tol));
        }
        if !(self.gradnorm_ceiling > 0.0) {
            return bad("gradnorm_ceiling must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Completed,
    BlowupStopped,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TEnd,
    LambdaFloor,
    GradientCeiling,
    /// `λ·r_half < 4dx`, or the dealiasing mask removed more than
    /// `mask_loss_tol` of the mass.
    GridExhausted,
    NonFinite,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub step_count: usize,
    /// Rescaled time `∫ dt/λ²`.
    pub s: f64,
    pub status: Status,
    /// Cumulative mass fraction removed by the dealiasing mask.
    pub mask_loss: f64,
}

impl SimState {
    pub fn new(u: Field) -> Self {
        SimState {
            t: u.time,
            u,
            step_count: 0,
            s: 0.0,
            status: Status::Running,
            mask_loss: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub s: f64,
    pub dt: f64,
    pub mass: f64,
    pub l2norm: f64,
    pub energy: f64,
    pub momentum: Vec<f64>,
    pub grad_sq: f64,
    pub kinetic_defect: f64,
    pub lambda_est: f64,
    pub b_est: f64,
}

impl SeriesRow {
    fn new(t: f64, s: f64, dt: f64, obs: &ObservableSet, lambda_est: f64, b_est: f64) -> Self {
        SeriesRow {
            t,
            s,
            dt,
            mass: obs.mass,
            l2norm: obs.l2norm,
            energy: obs.energy,
            momentum: obs.momentum.clone(),
            grad_sq: obs.grad_sq,
            kinetic_defect: obs.kinetic_defect,
            lambda_est,
            b_est,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub d: usize,
    pub rows: Vec<SeriesRow>,
}

impl TimeSeries {
    pub fn new(d: usize) -> Self {
        TimeSeries {
            d,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&SeriesRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Reusable split-step integrator for one grid.
#[derive(Debug)]
pub struct Stepper {
    spectral: Spectral,
    a: f64,
    dealias: bool,
    nonlinear: bool,
    scheme: Scheme,
}

impl Stepper {
    pub fn new(grid: Grid, a: f64, dealias: bool, nonlinear: bool) -> Self {
        Stepper {
            spectral: Spectral::new(grid),
            a,
            dealias,
            nonlinear,
            scheme: Scheme::Strang,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn from_config(cfg: &SimConfig) -> Self {
        Stepper::new(cfg.grid, cfg.a, cfg.dealias, cfg.nonlinear).with_scheme(cfg.scheme)
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Exact linear flow; with `mask` the 2/3-rule band is zeroed and the
    /// fraction of `Σ|û|²` it held is returned.
    fn linear(&self, v: &mut [Complex64], tau: f64, mask: bool) -> f64 {
        self.spectral.forward(v);
        let keep = self.spectral.keep_mask();
        let mut total = 0.0;
        let mut removed = 0.0;
        for ((z, &k2), &k) in v.iter_mut().zip(self.spectral.ksq()).zip(keep) {
            if mask {
                let m = z.norm_sqr();
                total += m;
                if !k {
                    removed += m;
                    *z = Complex64::new(0.0, 0.0);
                    continue;
                }
            }
            *z *= Complex64::from_polar(1.0, -k2 * tau);
        }
        self.spectral.inverse(v);
        if removed > 0.0 {
            removed / total
        } else {
            0.0
        }
    }

    /// Zero the 2/3-rule band when dealiasing is on; returns the removed
    /// mass fraction.
    pub fn project(&self, u: &mut Field) -> f64 {
        if self.dealias {
            self.linear(&mut u.values, 0.0, true)
        } else {
            0.0
        }
    }

    fn nonlinear_substep(&self, v: &mut [Complex64], tau: f64) {
        let d = self.spectral.grid().d;
        let decay = (-self.a * tau).exp();
        let x = 4.0 * self.a * tau / d as f64;
        // ∫₀^τ e^{−4as/d} ds = τ·(1 − e^{−x})/x.
        let weight = if x == 0.0 {
            tau
        } else {
            tau * (-(-x).exp_m1() / x)
        };
        for z in v.iter_mut() {
            let rot = if self.nonlinear {
                Complex64::from_polar(decay, modulus_pow_4_over_d(*z, d) * weight)
            } else {
                Complex64::new(decay, 0.0)
            };
            *z *= rot;
        }
    }

    fn strang(&self, v: &mut [Complex64], dt: f64) -> f64 {
        self.linear(v, 0.5 * dt, false);
        self.nonlinear_substep(v, dt);
        self.linear(v, 0.5 * dt, self.dealias)
    }

    /// Advance `u` by `dt` in place.
    pub fn step(&self, u: &mut Field, dt: f64) {
        self.step_tracked(u, dt);
    }

    /// As [`Stepper::step`], returning the mass fraction removed by the
    /// dealiasing mask.
    pub fn step_tracked(&self, u: &mut Field, dt: f64) -> f64 {
        let loss = match self.scheme {
            Scheme::Strang => self.strang(&mut u.values, dt),
            Scheme::Fourth => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                let w0 = 1.0 - 2.0 * w1;
                self.strang(&mut u.values, w1 * dt)
                    + self.strang(&mut u.values, w0 * dt)
                    + self.strang(&mut u.values, w1 * dt)
            }
        };
        u.time += dt;
        loss
    }
}

/// One step of the scheme with a freshly planned transform. The rescaled
/// clock `s` needs the ground-state scale and is advanced by [`run`].
pub fn step(state: &SimState, dt: f64, cfg: &SimConfig) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !state.u.is_finite() {
        return Err(Error::Diverged("input field is not finite".into()));
    }
    let stepper = Stepper::from_config(cfg);
    let mut next = state.clone();
    next.mask_loss += stepper.step_tracked(&mut next.u, dt);
    next.t = state.t + dt;
    next.step_count += 1;
    if !next.u.is_finite() {
        next.status = Status::Diverged;
    }
    Ok(next)
}

fn lambda_from_grad(grad_sq: f64) -> f64 {
    if grad_sq > 0.0 {
        1.0 / grad_sq.sqrt()
    } else {
        f64::INFINITY
    }
}

/// `‖∇Q‖/‖∇u‖`.
pub fn estimate_lambda(u: &Field, gs: &GroundState) -> Result<f64> {
    estimate_lambda_with(&Spectral::new(u.grid), u, gs)
}

pub fn estimate_lambda_with(spec: &Spectral, u: &Field, gs: &GroundState) -> Result<f64> {
    let g = spec.grad_sq(u);
    if !(g > 0.0) {
        return Err(Error::UndefinedScale("gradient norm vanishes".into()));
    }
    Ok((gs.grad_sq / g).sqrt())
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub snapshots: Vec<Field>,
    pub state: SimState,
    pub stop: StopReason,
}

/// Integrate until one of the stopping rules fires, collecting snapshots in
/// memory.
pub fn run(cfg: &SimConfig, u0: Field, gs: &GroundState) -> Result<RunOutput> {
    let mut snaps = Vec::new();
    let (series, state, stop) = run_with(cfg, u0, gs, |f| {
        snaps.push(f.clone());
        Ok(())
    })?;
    Ok(RunOutput {
        series,
        snapshots: snaps,
        state,
        stop,
    })
}

/// As [`run`], handing each snapshot to `on_snapshot` instead of keeping it.
pub fn run_with(
    cfg: &SimConfig,
    u0: Field,
    gs: &GroundState,
    mut on_snapshot: impl FnMut(&Field) -> Result<()>,
) -> Result<(TimeSeries, SimState, StopReason)> {
    cfg.validate()?;
    if u0.grid != cfg.grid {
        return Err(Error::Config(
            "initial field is not on the configured grid".into(),
        ));
    }
    if gs.d != cfg.d {
        return Err(Error::Config(
            "ground state dimension differs from the run".into(),
        ));
    }
    let stepper = Stepper::from_config(cfg);
    let spec = &stepper.spectral;
    let focal = gs.half_max_radius();
    let q_grad = gs.grad_sq.sqrt();
    let mut u0 = u0;
    stepper.project(&mut u0);
    let mut state = SimState::new(u0);
    let mut series = TimeSeries::new(cfg.d);

    let obs = spec.observables(&state.u)?;
    let mut lambda = q_grad * lambda_from_grad(obs.grad_sq);
    series
        .rows
        .push(SeriesRow::new(state.t, 0.0, 0.0, &obs, lambda, f64::NAN));
    if cfg.snapshot_stride > 0 {
        on_snapshot(&state.u)?;
    }
    let mut last_snap = 0usize;
    let t_tol = 1e-12 * cfg.t_end;

    let stop = loop {
        if state.step_count >= cfg.max_steps {
            break StopReason::MaxSteps;
        }
        let mut dt = cfg.dt0;
        if cfg.adaptive && lambda.is_finite() {
            dt = dt.min(cfg.cfl * lambda * lambda);
        }
        let remaining = cfg.t_end - state.t;
        if dt >= remaining - t_tol {
            dt = remaining;
        }
        state.mask_loss += stepper.step_tracked(&mut state.u, dt);
        state.step_count += 1;
        state.t += dt;
        state.u.time = state.t;
        if lambda.is_finite() {
            state.s += dt / (lambda * lambda);
        }
        let obs = match spec.observables(&state.u) {
            Ok(o) => o,
            Err(_) => {
                state.status = Status::Diverged;
                break StopReason::NonFinite;
            }
        };
        let new_lambda = q_grad * lambda_from_grad(obs.grad_sq);
        let b_est = -(new_lambda * new_lambda - lambda * lambda) / (2.0 * dt);
        lambda = new_lambda;
        series
            .rows
            .push(SeriesRow::new(state.t, state.s, dt, &obs, lambda, b_est));
        if cfg.snapshot_stride > 0 && state.step_count % cfg.snapshot_stride == 0 {
            on_snapshot(&state.u)?;
            last_snap = state.step_count;
        }
        if state.t >= cfg.t_end - t_tol {
            state.status = Status::Completed;
            break StopReason::TEnd;
        }
        if lambda < cfg.lambda_floor {
            state.status = Status::BlowupStopped;
            break StopReason::LambdaFloor;
        }
        if obs.grad_sq.sqrt() > cfg.gradnorm_ceiling {
            state.status = Status::BlowupStopped;
            break StopReason::GradientCeiling;
        }
        if lambda * focal < 4.0 * cfg.grid.dx || state.mask_loss > cfg.mask_loss_tol {
            state.status = Status::BlowupStopped;
            break StopReason::GridExhausted;
        }
    };
    if last_snap != state.step_count || cfg.snapshot_stride == 0 {
        if state.u.is_finite() {
            on_snapshot(&state.u)?;
        }
    }
    Ok((series, state, stop))
}

fn default_one() -> f64 {
    1.0
}

fn default_eta() -> f64 {
    0.05
}

/// Initial-data recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `c·λ^{−d/2}Q((x−x0)/λ)e^{iγ}e^{ik·x}`.
    ScaledGroundState {
        c: f64,
        #[serde(default = "default_one")]
        lambda: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        x0: Vec<f64>,
        #[serde(default)]
        kick: Vec<f64>,
    },
    /// `λ0^{−d/2}Q_{b0}((x−x0)/λ0)e^{iγ}`.
    QbSeed {
        b0: f64,
        lambda0: f64,
        #[serde(default = "default_eta")]
        eta: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        x0: Vec<f64>,
    },
    /// `A·e^{−|x−x0|²/σ²}e^{ik·x}`.
    Gaussian {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        x0: Vec<f64>,
        #[serde(default)]
        kick: Vec<f64>,
    },
    /// `base + h` with a seeded random `h` of H¹ norm `beta`.
    Perturbed {
        base: Box<InitialData>,
        beta: f64,
    },
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Holds,
    Fails,
    /// Not representable in double precision.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub status: ConditionStatus,
    pub value: f64,
    pub bound: f64,
    pub note: String,
}

/// Which of the initial-data conditions of the log-log bootstrap hold at
/// the realised parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub b0: f64,
    pub lambda0: f64,
    pub conditions: Vec<Condition>,
}

impl ConditionsReport {
    pub fn get(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct InitialOutput {
    pub field: Field,
    pub conditions: Option<ConditionsReport>,
}

fn shift_or_zero(v: &[f64], d: usize, what: &str) -> Result<Vec<f64>> {
    match v.len() {
        0 => Ok(vec![0.0; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(Error::Config(format!(
            "{what} has {n} components, expected {d}"
        ))),
    }
}

fn apply_kick(u: &mut Field, kick: &[f64]) {
    if kick.iter().all(|&k| k == 0.0) {
        return;
    }
    let mut x = [0.0; 4];
    for (i, z) in u.values.iter_mut().enumerate() {
        u.grid.point(i, &mut x);
        let ph: f64 = kick.iter().zip(&x).map(|(k, x)| k * x).sum();
        *z *= Complex64::from_polar(1.0, ph);
    }
}

/// Seeded smooth perturbation with `‖h‖_{H¹} = beta`.
pub fn random_perturbation(grid: &Grid, beta: f64, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Complex64, Vec<f64>, f64)> = (0..3)
        .map(|_| {
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let x: Vec<f64> = (0..grid.d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = rng.gen_range(0.5..1.5);
            (c, x, s)
        })
        .collect();
    let mut h = Field::from_fn(*grid, |x| {
        bumps
            .iter()
            .map(|(c, c0, s)| {
                let r2: f64 = x.iter().zip(c0).map(|(a, b)| (a - b) * (a - b)).sum();
                c * (-0.5 * r2 / (s * s)).exp()
            })
            .sum()
    });
    let spec = Spectral::new(*grid);
    let norm = (h.mass() + spec.grad_sq(&h)).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Solver("degenerate perturbation".into()));
    }
    h.scale(Complex64::new(beta / norm, 0.0));
    Ok(h)
}

pub fn make_initial_data(
    kind: &InitialData,
    grid: &Grid,
    gs: &GroundState,
    seed: u64,
) -> Result<InitialOutput> {
    let d = grid.d;
    if gs.d != d {
        return Err(Error::Config(
            "ground state dimension differs from the grid".into(),
        ));
    }
    match kind {
        InitialData::ScaledGroundState {
            c,
            lambda,
            gamma,
            x0,
            kick,
        } => {
            let x0 = shift_or_zero(x0, d, "x0")?;
            let kick = shift_or_zero(kick, d, "kick")?;
            let mut field = sample_on_grid(gs, grid, *lambda, *gamma, &x0)?.field;
            field.scale(Complex64::new(*c, 0.0));
            apply_kick(&mut field, &kick);
            Ok(InitialOutput {
                field,
                conditions: None,
            })
        }
        InitialData::Gaussian {
            amplitude,
            sigma,
            x0,
            kick,
        } => {
            if !(*sigma > 0.0) {
                return Err(Error::Config(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            let x0 = shift_or_zero(x0, d, "x0")?;
            let kick = shift_or_zero(kick, d, "kick")?;
            let mut field = Field::from_fn(*grid, |x| {
                let r2: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum();
                Complex64::new(amplitude * (-r2 / (sigma * sigma)).exp(), 0.0)
            });
            apply_kick(&mut field, &kick);
            Ok(InitialOutput {
                field,
                conditions: None,
            })
        }
        InitialData::QbSeed {
            b0,
            lambda0,
            eta,
            gamma,
            x0,
        } => {
            if !(*b0 > 0.0 && *b0 <= 0.5) {
                return Err(Error::Config(format!("b0 must lie in (0, 0.5], got {b0}")));
            }
            if !(*lambda0 > 0.0) {
                return Err(Error::Config(format!(
                    "lambda0 must be positive, got {lambda0}"
                )));
            }
            let x0 = shift_or_zero(x0, d, "x0")?;
            let prof = profile(*b0, *eta, d, 1e-12, ProfileOptions::default())?;
            let amp = Complex64::from_polar(lambda0.powf(-(d as f64) / 2.0), *gamma);
            let field = Field::from_fn(*grid, |x| {
                let r: f64 = x
                    .iter()
                    .zip(&x0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                amp * prof.eval(r / lambda0).0
            });
            let conditions = conditions_report(&field, *b0, *lambda0, 0.0, 0.0)?;
            Ok(InitialOutput {
                field,
                conditions: Some(conditions),
            })
        }
        InitialData::Perturbed { base, beta } => {
            if !(*beta >= 0.0) {
                return Err(Error::Config(format!(
                    "beta must be nonnegative, got {beta}"
                )));
            }
            let mut out = make_initial_data(base, grid, gs, seed)?;
            let h = random_perturbation(grid, *beta, seed)?;
            for (z, w) in out.field.values.iter_mut().zip(&h.values) {
                *z += w;
            }
            if let InitialData::QbSeed { b0, lambda0, .. } = base.as_ref() {
                let spec = Spectral::new(*grid);
                let eps_l2 = h.mass().sqrt();
                // Rescaled: ∫|∇ε|² = λ0²∫|∇h|², and e^{−|y|} ≤ 1.
                let eps_h1 = lambda0 * lambda0 * spec.grad_sq(&h) + h.mass();
                out.conditions = Some(conditions_report(
                    &out.field, *b0, *lambda0, eps_l2, eps_h1,
                )?);
            }
            Ok(out)
        }
        InitialData::Zero => Ok(InitialOutput {
            field: Field::zeros(*grid),
            conditions: None,
        }),
    }
}

/// Smallness threshold used for the `‖ε‖_{L²} ≪ 1` condition.
pub const EPS_L2_SMALL: f64 = 0.1;

fn conditions_report(
    u: &Field,
    b0: f64,
    lambda0: f64,
    eps_l2: f64,
    eps_local_h1: f64,
) -> Result<ConditionsReport> {
    let obs = Spectral::new(u.grid).observables(u)?;
    let mut conditions = Vec::new();
    // λ0 < exp(−exp(2π/(3b0))); compare logarithms.
    let log_bound = -(2.0 * std::f64::consts::PI / (3.0 * b0)).exp();
    let unreachable = log_bound < f64::MIN_POSITIVE.ln();
    conditions.push(Condition {
        name: "scale_bound".into(),
        status: if unreachable {
            ConditionStatus::Unreachable
        } else if lambda0.ln() < log_bound {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Fails
        },
        value: lambda0.ln(),
        bound: log_bound,
        note: if unreachable {
            "not satisfiable at machine scale: the bound underflows double precision".into()
        } else {
            "log(lambda0) against log of the bound".into()
        },
    });
    let holds = |ok: bool| {
        if ok {
            ConditionStatus::Holds
        } else {
            ConditionStatus::Fails
        }
    };
    conditions.push(Condition {
        name: "mass_excess_small".into(),
        status: holds(eps_l2 <= EPS_L2_SMALL),
        value: eps_l2,
        bound: EPS_L2_SMALL,
        note: "L2 norm of the profile remainder".into(),
    });
    let gamma_proxy = (-std::f64::consts::PI / b0).exp().powf(0.75);
    conditions.push(Condition {
        name: "local_h1_small".into(),
        status: holds(eps_local_h1 <= gamma_proxy),
        value: eps_local_h1,
        bound: gamma_proxy,
        note: "gradient plus weighted mass of the remainder against exp(-pi/b0)^(3/4)".into(),
    });
    let inv_sqrt = 1.0 / lambda0.sqrt();
    conditions.push(Condition {
        name: "energy_bound".into(),
        status: holds(obs.energy.abs() <= inv_sqrt),
        value: obs.energy.abs(),
        bound: inv_sqrt,
        note: "|E(u0)| against lambda0^(-1/2)".into(),
    });
    let p = obs.momentum.iter().map(|v| v * v).sum::<f64>().sqrt();
    conditions.push(Condition {
        name: "momentum_bound".into(),
        status: holds(p <= inv_sqrt),
        value: p,
        bound: inv_sqrt,
        note: "|P(u0)| against lambda0^(-1/2)".into(),
    });
    Ok(ConditionsReport {
        b0,
        lambda0,
        conditions,
    })
}
