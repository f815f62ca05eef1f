//! Periodic grids, complex fields, spectral differentiation and the scalar
//! observables of the damped critical NLS flow.
//!
//! All integrals use the uniform rectangle rule on the periodic box, which is
//! spectrally accurate for smooth fields that have decayed at the boundary.
//! Gradients are Fourier multipliers, so `grad_sq` and the momentum are
//! evaluated through Parseval's identity.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground_state::GroundState;

/// Uniform periodic grid on `[-L, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub half_width: f64,
    pub dx: f64,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    d: usize,
    n: usize,
    half_width: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.d, s.n, s.half_width)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            d: g.d,
            n: g.n,
            half_width: g.half_width,
        }
    }
}

impl Grid {
    pub fn new(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=4).contains(&d) {
            return Err(Error::Config(format!(
                "unsupported dimension d = {d} (1..=4)"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Config(format!(
                "half_width must be positive, got {half_width}"
            )));
        }
        Ok(Grid {
            d,
            n,
            half_width,
            dx: 2.0 * half_width / n as f64,
        })
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx
    }

    /// Volume element `dx^d`.
    pub fn cell(&self) -> f64 {
        self.dx.powi(self.d as i32)
    }

    /// Wavenumber spacing `2π / 2L`.
    pub fn dk(&self) -> f64 {
        PI / self.half_width
    }

    /// Multi-index of a flat row-major index (last axis fastest).
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for ax in (0..self.d).rev() {
            out[ax] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Physical position of a flat index.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 4];
        self.unravel(flat, &mut idx[..self.d]);
        for ax in 0..self.d {
            out[ax] = self.coord(idx[ax]);
        }
    }

    /// Signed FFT mode number of an axis index.
    pub fn mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Same grid with the half width multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Grid::new(self.d, self.n, self.half_width * factor)
    }
}

pub fn make_grid(d: usize, n: usize, half_width: f64) -> Result<Grid> {
    Grid::new(d, n, half_width)
}

/// Complex samples of `u(t, ·)` on a grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<Complex64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            time: 0.0,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} samples, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values, time })
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut x = [0.0; 4];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x[..grid.d])
            })
            .collect();
        Field {
            grid,
            values,
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.values {
            *z *= c;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Flat index of the largest modulus.
    pub fn argmax_abs(&self) -> usize {
        let mut best = 0;
        let mut best_v = -1.0;
        for (i, z) in self.values.iter().enumerate() {
            let v = z.norm_sqr();
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        best
    }

    /// Sup-norm distance between two fields on the same grid.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn mass(&self) -> f64 {
        self.grid.cell() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Mass, energy, momentum and related functionals of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub mass: f64,
    pub l2norm: f64,
    pub energy: f64,
    pub momentum: Vec<f64>,
    pub grad_sq: f64,
    pub lp_crit: f64,
    pub kinetic_defect: f64,
}

impl ObservableSet {
    fn from_parts(d: usize, mass: f64, grad_sq: f64, lp_crit: f64, momentum: Vec<f64>) -> Self {
        ObservableSet {
            mass,
            l2norm: mass.sqrt(),
            energy: energy_from(d, grad_sq, lp_crit),
            momentum,
            grad_sq,
            lp_crit,
            kinetic_defect: grad_sq - lp_crit,
        }
    }
}

/// `E = ½‖∇u‖² − d/(4+2d) ‖u‖^{2+4/d}_{2+4/d}`.
pub fn energy_from(d: usize, grad_sq: f64, lp_crit: f64) -> f64 {
    let d = d as f64;
    0.5 * grad_sq - d / (4.0 + 2.0 * d) * lp_crit
}

/// `|z|^{4/d}` without a `powf` for the common dimensions.
#[inline]
pub fn modulus_pow_4_over_d(z: Complex64, d: usize) -> f64 {
    let m2 = z.norm_sqr();
    match d {
        1 => m2 * m2,
        2 => m2,
        4 => m2.sqrt(),
        _ => m2.powf(2.0 / d as f64),
    }
}

/// FFT plans and wavenumber tables for one grid.
pub struct Spectral {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `|k|²` per flat index, Nyquist included (used by the propagator).
    ksq: Vec<f64>,
    /// `|k|²` with the Nyquist component dropped (first-derivative operator).
    kdsq: Vec<f64>,
    /// Derivative wavenumber per axis index (Nyquist set to zero).
    kd_axis: Vec<f64>,
    /// 2/3-rule mask per flat index.
    keep: Vec<bool>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let dk = grid.dk();
        let n = grid.n;
        let kd_axis: Vec<f64> = (0..n)
            .map(|i| {
                if i == n / 2 {
                    0.0
                } else {
                    grid.mode(i) as f64 * dk
                }
            })
            .collect();
        let cutoff = (n / 3) as i64;
        let mut ksq = Vec::with_capacity(grid.len());
        let mut kdsq = Vec::with_capacity(grid.len());
        let mut keep = Vec::with_capacity(grid.len());
        let mut idx = [0usize; 4];
        for flat in 0..grid.len() {
            grid.unravel(flat, &mut idx[..grid.d]);
            let mut s = 0.0;
            let mut sd = 0.0;
            let mut k_ok = true;
            for &i in &idx[..grid.d] {
                let m = grid.mode(i);
                let k = m as f64 * dk;
                s += k * k;
                sd += kd_axis[i] * kd_axis[i];
                k_ok &= m.abs() <= cutoff;
            }
            ksq.push(s);
            kdsq.push(sd);
            keep.push(k_ok);
        }
        Spectral {
            grid,
            fwd,
            inv,
            ksq,
            kdsq,
            kd_axis,
            keep,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    pub fn keep_mask(&self) -> &[bool] {
        &self.keep
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n;
        let d = self.grid.d;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for ax in 0..d.saturating_sub(1) {
            let stride = n.pow((d - 1 - ax) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    let start = base + off;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    /// Partial derivative along `axis`, spectrally.
    pub fn derivative(&self, u: &Field, axis: usize) -> Field {
        let mut hat = u.values.clone();
        self.forward(&mut hat);
        let mut idx = [0usize; 4];
        for (flat, z) in hat.iter_mut().enumerate() {
            self.grid.unravel(flat, &mut idx[..self.grid.d]);
            *z *= Complex64::new(0.0, self.kd_axis[idx[axis]]);
        }
        self.inverse(&mut hat);
        Field {
            grid: u.grid,
            values: hat,
            time: u.time,
        }
    }

    /// All gradient components.
    pub fn gradient(&self, u: &Field) -> Vec<Field> {
        (0..self.grid.d).map(|ax| self.derivative(u, ax)).collect()
    }

    /// `(grad_sq, momentum)` from the spectrum through Parseval.
    fn spectral_moments(&self, u: &Field) -> (f64, Vec<f64>) {
        let mut hat = u.values.clone();
        self.forward(&mut hat);
        let norm = self.grid.cell() / self.grid.len() as f64;
        let d = self.grid.d;
        let mut grad_sq = 0.0;
        let mut p = [0.0f64; 4];
        let mut idx = [0usize; 4];
        for (flat, z) in hat.iter().enumerate() {
            let w = z.norm_sqr();
            grad_sq += self.kdsq[flat] * w;
            self.grid.unravel(flat, &mut idx[..d]);
            for ax in 0..d {
                p[ax] += self.kd_axis[idx[ax]] * w;
            }
        }
        (grad_sq * norm, p[..d].iter().map(|v| v * norm).collect())
    }

    pub fn observables(&self, u: &Field) -> Result<ObservableSet> {
        if !u.is_finite() {
            return Err(Error::Diverged("non-finite samples in field".into()));
        }
        let d = self.grid.d;
        let cell = self.grid.cell();
        let mut mass = 0.0;
        let mut lp = 0.0;
        for z in &u.values {
            let m2 = z.norm_sqr();
            mass += m2;
            lp += m2 * modulus_pow_4_over_d(*z, d);
        }
        let (grad_sq, momentum) = self.spectral_moments(u);
        Ok(ObservableSet::from_parts(
            d,
            mass * cell,
            grad_sq,
            lp * cell,
            momentum,
        ))
    }

    pub fn grad_sq(&self, u: &Field) -> f64 {
        self.spectral_moments(u).0
    }

    /// Translate by an arbitrary vector using the Fourier shift theorem.
    pub fn translate(&self, u: &Field, shift: &[f64]) -> Field {
        let mut hat = u.values.clone();
        self.forward(&mut hat);
        let dk = self.grid.dk();
        let mut idx = [0usize; 4];
        for (flat, z) in hat.iter_mut().enumerate() {
            self.grid.unravel(flat, &mut idx[..self.grid.d]);
            let mut phase = 0.0;
            for ax in 0..self.grid.d {
                let i = idx[ax];
                let k = if i == self.grid.n / 2 {
                    0.0
                } else {
                    self.grid.mode(i) as f64 * dk
                };
                phase -= k * shift[ax];
            }
            *z *= Complex64::from_polar(1.0, phase);
        }
        self.inverse(&mut hat);
        Field {
            grid: u.grid,
            values: hat,
            time: u.time,
        }
    }
}

/// Observables with a freshly planned transform.
pub fn observables(u: &Field) -> Result<ObservableSet> {
    Spectral::new(u.grid).observables(u)
}

/// Sharp Gagliardo–Nirenberg certificate
/// `E(u) − ½‖∇u‖²(1 − (M(u)/M(Q))^{2/d})`, nonnegative for every field.
pub fn gn_certificate(u: &Field, gs: &GroundState) -> Result<f64> {
    let obs = observables(u)?;
    Ok(gn_certificate_from(&obs, u.grid.d, gs.mass))
}

pub fn gn_certificate_from(obs: &ObservableSet, d: usize, q_mass: f64) -> f64 {
    let ratio = (obs.mass / q_mass).powf(2.0 / d as f64);
    obs.energy - 0.5 * obs.grad_sq * (1.0 - ratio)
}
