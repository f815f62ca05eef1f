//! Checks run on finished series: decay identities, blow-up rate fits,
//! L² concentration and energy growth.

use serde::{Deserialize, Serialize};

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::ground_state::GroundState;
use crate::modulation::ModulationTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub max_rel_err_mass: f64,
    pub max_rel_err_momentum: f64,
    pub max_rel_err_energy_flux: f64,
    pub rows_checked: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compare the series against `‖u(t)‖ = e^{−at}‖u₀‖`, `P(t) = e^{−2at}P(0)`
/// and `dE/dt = −a(‖∇u‖² − ‖u‖^{2+4/d}_{2+4/d})`.
///
/// The energy derivative is the second-order three-point difference on the
/// (possibly non-uniform) sample times. Its error is measured relative to the
/// largest flux `a·|K|` seen in the run, or to the largest `‖∇u‖²` when
/// `a = 0`.
pub fn verify_decay_identities(series: &TimeSeries, a: f64) -> Result<IdentityReport> {
    let rows = &series.rows;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 rows, got {}",
            rows.len()
        )));
    }
    let r0 = &rows[0];
    let mut mass_err: f64 = 0.0;
    let mut mom_err: f64 = 0.0;
    let p0 = norm(&r0.momentum);
    // Real data has zero momentum up to rounding; nothing to compare then.
    let momentum_vacuous = p0 <= 1e-14 * (r0.mass * r0.grad_sq).sqrt();
    for r in rows {
        let decay = (-a * (r.t - r0.t)).exp();
        let expect = decay * r0.l2norm;
        mass_err = mass_err.max((r.l2norm - expect).abs() / expect);
        if !momentum_vacuous {
            let f = decay * decay;
            let diff: Vec<f64> = r
                .momentum
                .iter()
                .zip(&r0.momentum)
                .map(|(p, q)| p - f * q)
                .collect();
            mom_err = mom_err.max(norm(&diff) / (f * p0));
        }
    }

    let scale = if a > 0.0 {
        rows.iter()
            .map(|r| a * r.kinetic_defect.abs())
            .fold(0.0, f64::max)
    } else {
        rows.iter().map(|r| r.grad_sq).fold(0.0, f64::max)
    };
    let mut flux_err: f64 = 0.0;
    for w in rows.windows(3) {
        let (h1, h2) = (w[1].t - w[0].t, w[2].t - w[1].t);
        if !(h1 > 0.0 && h2 > 0.0) {
            continue;
        }
        let de =
            (h1 * h1 * w[2].energy - h2 * h2 * w[0].energy - (h1 * h1 - h2 * h2) * w[1].energy)
                / (h1 * h2 * (h1 + h2));
        flux_err = flux_err.max((de + a * w[1].kinetic_defect).abs());
    }
    if scale > 0.0 {
        flux_err /= scale;
    }
    Ok(IdentityReport {
        max_rel_err_mass: mass_err,
        max_rel_err_momentum: mom_err,
        max_rel_err_energy_flux: flux_err,
        rows_checked: rows.len(),
    })
}

/// One `(t, λ, b)` sample for rate fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub t: f64,
    pub lambda: f64,
    pub b: f64,
}

/// Anything that carries a scale history.
pub trait RateSource {
    fn rate_samples(&self) -> Vec<RateSample>;
}

impl RateSource for TimeSeries {
    fn rate_samples(&self) -> Vec<RateSample> {
        self.rows
            .iter()
            .map(|r| RateSample {
                t: r.t,
                lambda: r.lambda_est,
                b: r.b_est,
            })
            .collect()
    }
}

impl RateSource for ModulationTrack {
    fn rate_samples(&self) -> Vec<RateSample> {
        self.rows
            .iter()
            .map(|r| RateSample {
                t: r.t,
                lambda: r.state.lambda,
                b: r.state.b,
            })
            .collect()
    }
}

impl RateSource for [RateSample] {
    fn rate_samples(&self) -> Vec<RateSample> {
        self.to_vec()
    }
}

impl RateSource for Vec<RateSample> {
    fn rate_samples(&self) -> Vec<RateSample> {
        self.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Orders of magnitude of λ decrease kept in the fit window.
    pub decades: f64,
    /// Minimal overall focusing `max λ / λ_last`.
    pub min_focusing: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            decades: 1.0,
            min_focusing: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub t_hat: f64,
    /// Slope of `log λ` against `log(T̂ − t)` on the window.
    pub exponent: f64,
    /// `λ / √((T̂−t)/log|log(T̂−t)|)`.
    pub loglog_ratio_range: (f64, f64),
    /// `b·log|log λ|`, only where `λ < e^{−e}`.
    pub b_loglog_range: (f64, f64),
    /// `λ² / (2b(T̂−t))`.
    pub two_b_ratio_range: (f64, f64),
    pub fit_window: (f64, f64),
    pub window_rows: usize,
    /// `T̂` from the straight-line fit of `λ²` alone.
    pub t_hat_linear: f64,
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ssr = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icept - slope * a).powi(2))
        .sum();
    (slope, icept, ssr)
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (f64::NAN, f64::NAN)
    } else {
        (lo, hi)
    }
}

/// Fit the blow-up time and rate laws to the last `decades` of focusing.
///
/// `T̂` is seeded by the straight-line fit of `λ²` against `t` and then refined
/// jointly with the exponent by minimising the residual of the regression of
/// `log λ` on `log(T̂ − t)`; the linear estimate is kept in `t_hat_linear`.
pub fn fit_blowup(source: &(impl RateSource + ?Sized), opts: &FitOptions) -> Result<RateFit> {
    let samples: Vec<RateSample> = source
        .rate_samples()
        .into_iter()
        .filter(|s| s.t.is_finite() && s.lambda.is_finite() && s.lambda > 0.0)
        .collect();
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 finite scale samples, got {}",
            samples.len()
        )));
    }
    let last = samples[samples.len() - 1];
    let lam_max = samples.iter().map(|s| s.lambda).fold(0.0, f64::max);
    if lam_max / last.lambda < opts.min_focusing {
        return Err(Error::NotABlowup(format!(
            "λ only decreased by a factor {:.3}",
            lam_max / last.lambda
        )));
    }
    let cut = last.lambda * 10f64.powf(opts.decades);
    let start = samples
        .iter()
        .rposition(|s| s.lambda > cut)
        .map_or(0, |k| k + 1);
    let win = &samples[start..];
    if win.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} samples in the fit window",
            win.len()
        )));
    }
    let t: Vec<f64> = win.iter().map(|s| s.t).collect();
    let l2: Vec<f64> = win.iter().map(|s| s.lambda * s.lambda).collect();
    let (slope, icept, _) = line_fit(&t, &l2);
    if !(slope < 0.0) {
        return Err(Error::NotABlowup(
            "λ² is not decreasing on the fit window".into(),
        ));
    }
    let t_lin = -icept / slope;
    let t_last = last.t;
    let span = (t_last - t[0]).max(f64::MIN_POSITIVE);

    let log_lam: Vec<f64> = win.iter().map(|s| s.lambda.ln()).collect();
    let ssr_at = |log_delta: f64| -> f64 {
        let th = t_last + log_delta.exp();
        let x: Vec<f64> = t.iter().map(|ti| (th - ti).ln()).collect();
        line_fit(&x, &log_lam).2
    };
    let lo = (span * 1e-9).ln();
    let hi = (span * 1e3).ln();
    let n_scan = 240;
    let h = (hi - lo) / n_scan as f64;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=n_scan {
        let x = lo + h * k as f64;
        let v = ssr_at(x);
        if v < best.0 {
            best = (v, x);
        }
    }
    if t_lin > t_last {
        let x = (t_lin - t_last).ln();
        if x > lo && x < hi && ssr_at(x) < best.0 {
            best = (ssr_at(x), x);
        }
    }
    // Golden-section refinement inside the neighbouring scan cells.
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (ssr_at(c), ssr_at(d));
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = ssr_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = ssr_at(d);
        }
    }
    let x_best = if fc < fd { c } else { d };
    let t_hat = t_last + x_best.exp();

    let x: Vec<f64> = t.iter().map(|ti| (t_hat - ti).ln()).collect();
    let (exponent, _, _) = line_fit(&x, &log_lam);

    let loglog_ratio_range = range(win.iter().map(|s| {
        let tau = t_hat - s.t;
        let ll = tau.ln().abs().ln();
        if tau < (-1.0f64).exp() {
            s.lambda / (tau / ll).sqrt()
        } else {
            f64::NAN
        }
    }));
    let guard = (-std::f64::consts::E).exp();
    let b_loglog_range = range(win.iter().map(|s| {
        if s.lambda < guard {
            s.b * s.lambda.ln().abs().ln()
        } else {
            f64::NAN
        }
    }));
    let two_b_ratio_range = range(
        win.iter()
            .map(|s| s.lambda * s.lambda / (2.0 * s.b * (t_hat - s.t))),
    );

    Ok(RateFit {
        t_hat,
        exponent,
        loglog_ratio_range,
        b_loglog_range,
        two_b_ratio_range,
        fit_window: (t[0], t_last),
        window_rows: win.len(),
        t_hat_linear: t_lin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub window_width: f64,
    pub center: Vec<f64>,
    pub captured_mass: f64,
    pub q_mass: f64,
    pub ratio: f64,
    /// The ball `|x − center| < w` sticks out of the box.
    pub clipped: bool,
}

/// `∫_{|x−c|<w} |u|²` relative to `∫Q²`; the center defaults to the grid
/// point of largest modulus.
pub fn concentration(
    u: &Field,
    center: Option<&[f64]>,
    w: f64,
    gs: &GroundState,
) -> Result<ConcentrationReport> {
    let grid = &u.grid;
    if !(w > grid.dx) {
        return Err(Error::Config(format!(
            "window {w} must exceed the grid spacing {}",
            grid.dx
        )));
    }
    if gs.d != grid.d {
        return Err(Error::Config(
            "ground state and field dimensions differ".into(),
        ));
    }
    let c: Vec<f64> = match center {
        Some(c) if c.len() == grid.d => c.to_vec(),
        Some(_) => return Err(Error::Config("center has the wrong dimension".into())),
        None => {
            let mut p = vec![0.0; grid.d];
            grid.point(u.argmax_abs(), &mut p);
            p
        }
    };
    let lo = -grid.half_width;
    let hi = grid.half_width;
    let clipped = c.iter().any(|&ci| ci - w < lo || ci + w > hi);
    if clipped {
        log::warn!("concentration window of width {w} is clipped by the box");
    }
    let w2 = w * w;
    let mut p = vec![0.0; grid.d];
    let mut captured = 0.0;
    for (k, z) in u.values.iter().enumerate() {
        grid.point(k, &mut p);
        let r2: f64 = p.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum();
        if r2 < w2 {
            captured += z.norm_sqr();
        }
    }
    captured *= grid.cell();
    Ok(ConcentrationReport {
        window_width: w,
        center: c,
        captured_mass: captured,
        q_mass: gs.mass,
        ratio: captured / gs.mass,
        clipped,
    })
}

/// `max |E(t)| / (1 + log²λ(t))` over rows with a finite scale.
pub fn energy_growth_check(series: &TimeSeries) -> f64 {
    series
        .rows
        .iter()
        .filter(|r| r.lambda_est.is_finite() && r.lambda_est > 0.0)
        .map(|r| r.energy.abs() / (1.0 + r.lambda_est.ln().powi(2)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SeriesRow;
    use crate::field::Grid;
    use crate::ground_state::{ground_state, sample_on_grid};

    fn samples(ts: &[f64], lam: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> Vec<RateSample> {
        ts.iter()
            .map(|&t| RateSample {
                t,
                lambda: lam(t),
                b: b(t),
            })
            .collect()
    }

    fn geometric_times(t_end: f64, first_gap: f64, last_gap: f64, n: usize) -> Vec<f64> {
        let (l0, l1) = (first_gap.ln(), last_gap.ln());
        (0..n)
            .map(|k| t_end - (l0 + (l1 - l0) * k as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn exact_square_root_law_is_recovered() {
        let ts = geometric_times(1.0, 0.5, 1e-6, 300);
        let s = samples(&ts, |t| (0.2 * (1.0 - t)).sqrt(), |_| 0.1);
        let fit = fit_blowup(&s, &FitOptions::default()).unwrap();
        assert!((fit.t_hat - 1.0).abs() < 1e-6, "{}", fit.t_hat);
        assert!((fit.exponent - 0.5).abs() < 1e-3);
        assert!(fit.two_b_ratio_range.0 >= 0.999 && fit.two_b_ratio_range.1 <= 1.001);
    }

    #[test]
    fn loglog_law_is_recovered() {
        let ts = geometric_times(1.0, 0.1, 1e-8, 400);
        let law = |t: f64| {
            let tau = 1.0 - t;
            (tau / tau.ln().abs().ln()).sqrt()
        };
        let fit = fit_blowup(&samples(&ts, law, |_| 0.1), &FitOptions::default()).unwrap();
        let (lo, hi) = fit.loglog_ratio_range;
        assert!(lo >= 0.95 && hi <= 1.05, "{lo} {hi}");
        assert!((fit.exponent - 0.5).abs() < 0.05);
    }

    #[test]
    fn pure_powers_are_recovered() {
        let ts = geometric_times(2.0, 1.0, 1e-5, 200);
        for p in [0.4, 0.5, 0.6] {
            let s = samples(&ts, |t| (2.0 - t).powf(p), |_| 0.1);
            let fit = fit_blowup(&s, &FitOptions::default()).unwrap();
            assert!((fit.exponent - p).abs() < 1e-3, "{p}: {}", fit.exponent);
        }
    }

    #[test]
    fn fit_rejects_weak_focusing_and_short_series() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.01).collect();
        let s = samples(&ts, |t| 1.0 - 0.5 * t, |_| 0.1);
        assert!(matches!(
            fit_blowup(&s, &FitOptions::default()),
            Err(Error::NotABlowup(_))
        ));
        assert!(matches!(
            fit_blowup(&s[..2], &FitOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    fn row(t: f64, l2: f64, mom: f64, energy: f64, k: f64, lambda: f64) -> SeriesRow {
        SeriesRow {
            t,
            s: 0.0,
            dt: 0.0,
            mass: l2 * l2,
            l2norm: l2,
            energy,
            momentum: vec![mom],
            grad_sq: 1.0,
            kinetic_defect: k,
            lambda_est: lambda,
            b_est: f64::NAN,
        }
    }

    #[test]
    fn exact_identities_give_rounding_errors() {
        let a = 0.3;
        let mut ts = TimeSeries::new(1);
        for i in 0..40 {
            let t = 0.05 * i as f64 + 0.001 * (i % 3) as f64;
            // E(t) = e^{−t}, K = e^{−t}/a satisfies dE/dt = −aK.
            ts.rows.push(row(
                t,
                2.0 * (-a * t).exp(),
                0.7 * (-2.0 * a * t).exp(),
                (-t).exp(),
                (-t).exp() / a,
                1.0,
            ));
        }
        let rep = verify_decay_identities(&ts, a).unwrap();
        assert!(rep.max_rel_err_mass < 1e-14);
        assert!(rep.max_rel_err_momentum < 1e-14);
        assert!(rep.max_rel_err_energy_flux < 1e-3);
        assert_eq!(rep.rows_checked, 40);
    }

    #[test]
    fn zero_momentum_is_vacuous() {
        let mut ts = TimeSeries::new(1);
        for i in 0..5 {
            ts.rows.push(row(i as f64, 1.0, 0.0, 0.0, 0.0, 1.0));
        }
        assert_eq!(
            verify_decay_identities(&ts, 0.0)
                .unwrap()
                .max_rel_err_momentum,
            0.0
        );
        ts.rows.truncate(2);
        assert!(matches!(
            verify_decay_identities(&ts, 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constructed_energy_growth_is_bounded() {
        let mut ts = TimeSeries::new(1);
        for i in 1..30 {
            let lam = 0.9f64.powi(i);
            ts.rows
                .push(row(i as f64, 1.0, 0.0, lam.ln().powi(2), 0.0, lam));
        }
        assert!(energy_growth_check(&ts) <= 1.0);
    }

    #[test]
    fn concentrated_ground_state_is_captured() {
        let gs = ground_state(1).unwrap();
        let grid = Grid::new(1, 1 << 14, 8.0).unwrap();
        let u = sample_on_grid(&gs, &grid, 0.01, 0.0, &[0.0]).unwrap().field;
        let rep = concentration(&u, None, 0.5, &gs).unwrap();
        assert!(rep.ratio >= 0.999, "{}", rep.ratio);
        assert!(!rep.clipped);
    }

    #[test]
    fn full_box_captures_all_of_q() {
        let gs = ground_state(1).unwrap();
        let grid = Grid::new(1, 2048, 30.0).unwrap();
        let u = sample_on_grid(&gs, &grid, 1.0, 0.0, &[0.0]).unwrap().field;
        let rep = concentration(&u, Some(&[0.0]), 100.0, &gs).unwrap();
        assert!((rep.ratio - 1.0).abs() < 1e-8, "{}", rep.ratio);
        assert!(rep.clipped);
        assert!(concentration(&u, None, grid.dx * 0.5, &gs).is_err());
    }
}
