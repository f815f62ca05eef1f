//! Acceptance suite: one line per criterion, non-zero exit if any blocking
//! criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dampnls::diagnostics::{concentration, fit_blowup, verify_decay_identities, FitOptions, RateSample};
use dampnls::dynamics::{
    make_initial_data, run, InitialData, RunOutput, Scheme, SimConfig, Status,
    StopReason,
};
use dampnls::field::{gn_certificate, Field, Grid, Spectral};
use dampnls::ground_state::{ground_state, sample_on_grid, GroundState};
use dampnls::modulation::{ModulationOptions, ModulationState, Modulator};
use dampnls::profiles::{profile, qb_mass_expansion, solve_qb, solve_radiation, ProfileOptions};
use dampnls::radial::hermite;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

#[derive(Default)]
struct Suite {
    failed: Vec<u32>,
}

impl Suite {
    fn check(&mut self, id: u32, name: &str, blocking: bool, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let o = f();
        let tag = match (o.pass, blocking) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "SKIPPED-TIER",
        };
        println!(
            "criterion {id:>2} [{tag}] {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass && blocking {
            self.failed.push(id);
        }
    }
}

fn sgs(c: f64, kick: f64) -> InitialData {
    InitialData::ScaledGroundState {
        c,
        lambda: 1.0,
        gamma: 0.0,
        x0: vec![],
        kick: if kick == 0.0 { vec![] } else { vec![kick] },
    }
}

fn fixed_step(grid: Grid, a: f64, dt: f64, t_end: f64) -> SimConfig {
    let mut cfg = SimConfig::new(grid, a);
    cfg.adaptive = false;
    cfg.dt0 = dt;
    cfg.t_end = t_end;
    cfg
}

/// Random low-mode field under a Gaussian envelope.
fn random_smooth(grid: Grid, amp: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, Complex64)> = (0..8)
        .map(|_| {
            (
                rng.gen_range(-3.0..3.0),
                Complex64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        let env = (-x[0] * x[0] / 8.0).exp();
        modes.iter().map(|(k, c)| c * Complex64::from_polar(env, k * x[0])).sum()
    })
}

fn mass_decay(gs: &GroundState) -> Outcome {
    let grid = Grid::new(1, 1024, 20.0).unwrap();
    let mut cases: Vec<(&str, Field)> = Vec::new();
    let mk = |k: &InitialData| make_initial_data(k, &grid, gs, 3).unwrap().field;
    cases.push(("Q", mk(&sgs(1.0, 0.0))));
    cases.push(("0.9Q e^{ix}", mk(&sgs(0.9, 1.0))));
    cases.push((
        "gaussian",
        mk(&InitialData::Gaussian {
            amplitude: 1.2,
            sigma: 1.5,
            x0: vec![1.0],
            kick: vec![-0.5],
        }),
    ));
    cases.push((
        "Q + h",
        mk(&InitialData::Perturbed {
            base: Box::new(sgs(1.0, 0.0)),
            beta: 0.1,
        }),
    ));
    cases.push(("random smooth", random_smooth(grid, 0.3, 11)));
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for a in [0.0, 0.1, 1.0] {
        for (_, u) in &cases {
            let out = run(&fixed_step(grid, a, 1e-3, 10.0), u.clone(), gs).unwrap();
            let rep = verify_decay_identities(&out.series, a).unwrap();
            worst = worst.max(rep.max_rel_err_mass);
            steps = steps.max(out.state.step_count);
        }
    }
    outcome(
        worst < 1e-10,
        format!(
            "max rel err {worst:.2e} over {} runs (a in {{0, 0.1, 1}}, up to {steps} steps)",
            3 * cases.len()
        ),
    )
}

fn momentum_decay(gs: &GroundState) -> Outcome {
    let grid = Grid::new(1, 1024, 20.0).unwrap();
    let u0 = make_initial_data(&sgs(1.0, 1.0), &grid, gs, 0).unwrap().field;
    let mut worst: f64 = 0.0;
    for a in [0.0, 0.1, 1.0] {
        let out = run(&fixed_step(grid, a, 1e-3, 10.0), u0.clone(), gs).unwrap();
        worst = worst.max(verify_decay_identities(&out.series, a).unwrap().max_rel_err_momentum);
    }
    outcome(worst < 1e-9, format!("u0 = e^{{ix}}Q, max rel err {worst:.2e}"))
}

fn energy_flux(gs: &GroundState) -> Outcome {
    let grid = Grid::new(1, 1024, 20.0).unwrap();
    let u0 = make_initial_data(&sgs(0.9, 0.5), &grid, gs, 0).unwrap().field;
    let err = |dt: f64| {
        let out = run(&fixed_step(grid, 0.1, dt, 1.0), u0.clone(), gs).unwrap();
        verify_decay_identities(&out.series, 0.1).unwrap().max_rel_err_energy_flux
    };
    let e1 = err(1e-4);
    let e2 = err(5e-5);
    let ratio = e1 / e2;
    outcome(
        e1 < 1e-3 && (3.5..=4.5).contains(&ratio),
        format!("rel err {e1:.2e} at dt = 1e-4, {e2:.2e} at dt = 5e-5, ratio {ratio:.3}"),
    )
}

/// Plain RK4 shooting for `Q'' + Q'/r − Q + Q³ = 0` at step `h`; returns the
/// mass `2π∫Q² r dr`.
fn townes_mass_oracle(h: f64) -> f64 {
    let rhs = |r: f64, q: f64, p: f64| -> (f64, f64) { (p, -p / r + q - q * q * q) };
    let shoot = |q0: f64, keep: bool| -> (i32, Vec<f64>) {
        let r0 = 1e-6;
        let mut r = r0;
        let mut q = q0 + 0.25 * (q0 - q0.powi(3)) * r0 * r0;
        let mut p = 0.5 * (q0 - q0.powi(3)) * r0;
        let mut tab = Vec::new();
        while r < 14.0 {
            if keep {
                tab.push(q);
            }
            let (k1q, k1p) = rhs(r, q, p);
            let (k2q, k2p) = rhs(r + h / 2.0, q + h / 2.0 * k1q, p + h / 2.0 * k1p);
            let (k3q, k3p) = rhs(r + h / 2.0, q + h / 2.0 * k2q, p + h / 2.0 * k2p);
            let (k4q, k4p) = rhs(r + h, q + h * k3q, p + h * k3p);
            q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
            p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            r += h;
            if q < 0.0 {
                return (1, tab);
            }
            if p > 0.0 {
                return (-1, tab);
            }
        }
        (0, tab)
    };
    let (mut lo, mut hi) = (2.0, 2.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match shoot(mid, false).0 {
            1 => hi = mid,
            _ => lo = mid,
        }
    }
    let (_, tab) = shoot(lo, true);
    // Stop where the separatrix starts to peel away.
    let mut mass = 0.0;
    for (k, q) in tab.iter().enumerate() {
        let r = 1e-6 + k as f64 * h;
        if *q < 1e-6 {
            break;
        }
        mass += 2.0 * PI * q * q * r * h;
    }
    mass
}

fn ground_states() -> Outcome {
    let gs = ground_state(1).unwrap();
    let sup = gs
        .r
        .iter()
        .zip(&gs.q)
        .map(|(&r, &q)| (q - 3f64.powf(0.25) / (2.0 * r).cosh().sqrt()).abs())
        .fold(0.0, f64::max);
    let mass_err = (gs.mass - 3f64.sqrt() * PI / 2.0).abs();
    let e = gs.energy().abs();
    let g2 = ground_state(2).unwrap();
    let oracle = townes_mass_oracle(5e-4);
    let d2 = (g2.mass - oracle).abs();
    outcome(
        sup < 1e-8 && mass_err < 1e-8 && e < 1e-8 && d2 < 1e-3 && (g2.mass - 11.7009).abs() < 1e-3,
        format!(
            "d=1 sup {sup:.1e}, mass err {mass_err:.1e}, |E| {e:.1e}; d=2 mass {:.6} vs oracle {oracle:.6}",
            g2.mass
        ),
    )
}

fn stationarity(gs: &GroundState) -> Outcome {
    let grid = Grid::new(1, 1024, 20.0).unwrap();
    let q = sample_on_grid(gs, &grid, 1.0, 0.0, &[0.0]).unwrap().field;
    let worst = |scheme: Scheme| {
        let mut cfg = fixed_step(grid, 0.0, 1e-3, 1.0);
        cfg.scheme = scheme;
        cfg.snapshot_stride = 50;
        let out = run(&cfg, q.clone(), gs).unwrap();
        out.snapshots
            .iter()
            .map(|u| {
                let rot = Complex64::from_polar(1.0, u.time);
                u.values
                    .iter()
                    .zip(&q.values)
                    .map(|(a, b)| (a - b * rot).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    let fourth = worst(Scheme::Fourth);
    let strang = worst(Scheme::Strang);
    outcome(
        fourth < 1e-6,
        format!("sup_t<=1 |u - e^{{it}}Q| = {fourth:.2e} (fourth-order composition); Strang gives {strang:.2e}"),
    )
}

fn sharp_gn(gs1: &GroundState) -> Outcome {
    let gs2 = ground_state(2).unwrap();
    let g1 = Grid::new(1, 1024, 20.0).unwrap();
    let g2 = Grid::new(2, 128, 12.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for k in 0..100 {
        let (grid, gs) = if k % 2 == 0 { (g1, gs1) } else { (g2, &gs2) };
        let bumps: Vec<(Complex64, Vec<f64>, f64, Vec<f64>)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                (
                    Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                    (0..grid.d).map(|_| rng.gen_range(-3.0..3.0)).collect(),
                    rng.gen_range(0.4..2.0),
                    (0..grid.d).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let u = Field::from_fn(grid, |x| {
            bumps
                .iter()
                .map(|(c, x0, s, k)| {
                    let r2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
                    let ph: f64 = x.iter().zip(k).map(|(a, b)| a * b).sum();
                    c * (-r2 / (s * s)).exp() * Complex64::from_polar(1.0, ph)
                })
                .sum()
        });
        worst = worst.min(gn_certificate(&u, gs).unwrap());
    }
    let q = sample_on_grid(gs1, &g1, 1.0, 0.0, &[0.0]).unwrap().field;
    let eq = gn_certificate(&q, gs1).unwrap();
    outcome(
        worst >= -1e-6 && eq.abs() < 1e-6,
        format!("min certificate {worst:.3e} over 100 fields (d = 1, 2); at Q {eq:.1e}"),
    )
}

fn global_below_threshold(gs: &GroundState) -> Outcome {
    let grid = Grid::new(1, 2048, 40.0).unwrap();
    let u0 = make_initial_data(&sgs(0.9, 0.0), &grid, gs, 0).unwrap().field;
    let mut cfg = SimConfig::new(grid, 0.01);
    cfg.dt0 = 1e-2;
    cfg.t_end = 50.0;
    let out = run(&cfg, u0, gs).unwrap();
    let g0 = out.series.rows[0].grad_sq;
    let gmax = out.series.rows.iter().map(|r| r.grad_sq).fold(0.0, f64::max);
    outcome(
        out.state.status == Status::Completed && gmax <= 2.0 * g0,
        format!(
            "status {:?} at t = {}, max grad_sq / initial = {:.4}",
            out.state.status,
            out.state.t,
            gmax / g0
        ),
    )
}

fn blowup_run(gs: &GroundState) -> RunOutput {
    let grid = Grid::new(1, 16384, 12.0).unwrap();
    let u0 = make_initial_data(&sgs(1.05, 0.0), &grid, gs, 0).unwrap().field;
    let mut cfg = SimConfig::new(grid, 0.01);
    cfg.dt0 = 1e-2;
    cfg.cfl = 0.005;
    cfg.t_end = 5.0;
    cfg.snapshot_stride = 100;
    run(&cfg, u0, gs).unwrap()
}

fn blowup(gs: &GroundState, out: &RunOutput) -> Outcome {
    let rows = &out.series.rows;
    let e0 = rows[0].energy;
    let lam0 = rows[0].lambda_est;
    let lam1 = rows.last().unwrap().lambda_est;
    let rises = rows.windows(2).filter(|w| w[1].lambda_est > w[0].lambda_est).count();
    let focusing = lam0 / lam1;
    let stopped = out.state.status == Status::BlowupStopped && out.stop == StopReason::GridExhausted;

    let m = Modulator::new(gs, out.snapshots[0].grid, ModulationOptions::default());
    let track = m.track(&out.snapshots);
    let (b_min, n_decade, converged) = match &track {
        Ok(t) => {
            let last = t.rows.last().unwrap().state.lambda;
            let dec: Vec<_> = t.rows.iter().filter(|r| r.state.lambda <= 10.0 * last).collect();
            (
                dec.iter().map(|r| r.state.b).fold(f64::INFINITY, f64::min),
                dec.len(),
                t.rows.iter().all(|r| r.state.converged),
            )
        }
        Err(_) => (f64::NAN, 0, false),
    };
    let fit = fit_blowup(&out.series, &FitOptions::default());
    let Ok(fit) = fit else {
        return outcome(false, format!("rate fit failed: {}", fit.unwrap_err()));
    };
    let (r_lo, r_hi) = fit.two_b_ratio_range;
    let (bl_lo, bl_hi) = fit.b_loglog_range;
    let pass = e0 < 0.0
        && rises == 0
        && focusing >= 10.0
        && stopped
        && b_min > 0.0
        && converged
        && r_lo >= 0.5
        && r_hi <= 2.0
        && (0.40..=0.60).contains(&fit.exponent)
        && bl_lo > 0.0
        && bl_hi / bl_lo <= 10.0;
    outcome(
        pass,
        format!(
            "E0 = {e0:.4}, λ {lam0:.3} -> {lam1:.4} ({focusing:.0}x, {rises} increases), stop {:?}; \
             b_orth min {b_min:.3} over {n_decade} tracked rows in the final decade; T̂ = {:.6}, \
             exponent {:.3}, 2b ratio [{r_lo:.3}, {r_hi:.3}], b·log|log λ| [{bl_lo:.3}, {bl_hi:.3}]",
            out.stop, fit.t_hat, fit.exponent
        ),
    )
}

fn profile_suite(gs: &GroundState) -> Outcome {
    let p = solve_qb(0.02, 0.05, 1, 1e-12).unwrap();
    let mut real_err: f64 = 0.0;
    let mut complex_err: f64 = 0.0;
    let mut r = 0.0;
    while r < p.r_b_minus {
        let q = gs.eval(r).0;
        real_err = real_err.max((hermite(r, p.dr, &p.p, &p.dp).0 - q).abs());
        complex_err = complex_err.max((p.eval(r).0 - q).norm());
        r += 1e-3;
    }
    let exp = qb_mass_expansion(&[0.05, 0.1, 0.15, 0.2], 0.05, 1);
    let (c0, res_max) = match &exp {
        Ok(e) => (e.c0, e.residuals.iter().fold(0.0f64, |a, &b| a.max(b.abs()))),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let mut support_ok = true;
    for b in [0.1, 0.2, 0.3, 0.4] {
        let q = solve_qb(b, 0.05, 1, 1e-12).unwrap();
        for (r, z) in q.r.iter().zip(&q.psi) {
            if (*r < q.r_b_minus || *r > q.r_b) && z.norm() != 0.0 {
                support_ok = false;
            }
        }
        support_ok &= q.psi_sup() > 0.0;
    }
    let bs = [0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
    let x: Vec<f64> = bs.iter().map(|b| 1.0 / b).collect();
    let y: Vec<f64> = bs
        .iter()
        .map(|&b| -profile(b, 0.05, 1, 1e-12, ProfileOptions::default()).unwrap().energy_qb.abs().ln())
        .collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    outcome(
        real_err < 1e-3 && exp.is_ok() && c0 > 0.0 && res_max < 0.1 && support_ok && slope > 0.0,
        format!(
            "b = 0.02: max|P_b - Q| {real_err:.2e} (complex |Q_b - Q| {complex_err:.2e}, phase e^{{-ibr²/4}} included); \
             c0 = {c0:.4}, max residual {res_max:.3}; Ψ_b support exact: {support_ok}; \
             slope of -log|E(Q_b)| vs 1/b = {slope:.3}"
        ),
    )
}

fn modulation_round_trip(gs: &GroundState) -> Outcome {
    // The cutoff layer of the profile limits interpolation accuracy, so the
    // round trip uses a finer grid than the equivariance checks.
    let fine = Modulator::new(gs, Grid::new(1, 8192, 15.0).unwrap(), ModulationOptions::default());
    let mut rt: f64 = 0.0;
    for &(l, b, g, x) in &[(0.3, 0.1, 1.2, 0.7), (1.0, 0.0, 0.0, 0.0), (0.2, 0.3, -2.0, -0.5), (0.6, 0.45, 3.0, 1.5)] {
        let u = fine.synthesize(l, b, g, &[x]).unwrap();
        let guess = ModulationState::guess(l * 1.03, b * 0.9, g + 0.05, vec![x - 0.01 * l]);
        let s = fine.decompose(&u, &guess).unwrap();
        let dg = dampnls::modulation::wrap_angle(s.gamma - g).abs();
        rt = rt.max((s.lambda - l).abs() / l).max((s.b - b).abs()).max(dg).max((s.x0[0] - x).abs() / l);
    }

    // Equivariance on a state with a non-trivial remainder.
    let grid = Grid::new(1, 4096, 15.0).unwrap();
    let m = Modulator::new(gs, grid, ModulationOptions::default());
    let (l, b, g, x) = (0.5, 0.1, 0.4, 0.3);
    let eps = |y: f64| Complex64::new(2e-3 * (-(y - 0.2) * (y - 0.2) / 0.5).exp(), 1e-3 * (-y * y).exp());
    let build = |mu: f64| {
        let mut u = m.synthesize(mu * l, b, g, &[mu * x]).unwrap();
        let gr = u.grid;
        for (k, z) in u.values.iter_mut().enumerate() {
            *z += eps(gr.coord(k) / mu) / mu.sqrt();
        }
        u
    };
    let base = build(1.0);
    let s0 = m.decompose(&base, &m.quick_estimate(&base).unwrap()).unwrap();
    let theta = 0.7;
    let mut rotated = base.clone();
    rotated.scale(Complex64::from_polar(1.0, theta));
    let sg = m.decompose(&rotated, &m.quick_estimate(&rotated).unwrap()).unwrap();
    let shift = 1.25;
    let moved = Spectral::new(grid).translate(&base, &[shift]);
    let st = m.decompose(&moved, &m.quick_estimate(&moved).unwrap()).unwrap();
    let mu = 0.8;
    let scaled = build(mu);
    let ss = m.decompose(&scaled, &m.quick_estimate(&scaled).unwrap()).unwrap();
    let gauge = dampnls::modulation::wrap_angle(sg.gamma - s0.gamma - theta)
        .abs()
        .max((sg.lambda - s0.lambda).abs())
        .max((sg.b - s0.b).abs())
        .max((sg.x0[0] - s0.x0[0]).abs());
    let trans = (st.x0[0] - s0.x0[0] - shift)
        .abs()
        .max((st.lambda - s0.lambda).abs())
        .max((st.b - s0.b).abs())
        .max(dampnls::modulation::wrap_angle(st.gamma - s0.gamma).abs());
    let scal = (ss.lambda - mu * s0.lambda)
        .abs()
        .max((ss.x0[0] - mu * s0.x0[0]).abs())
        .max((ss.b - s0.b).abs())
        .max(dampnls::modulation::wrap_angle(ss.gamma - s0.gamma).abs());
    outcome(
        rt < 1e-8 && gauge < 1e-6 && trans < 1e-6 && scal < 1e-6,
        format!("round trip {rt:.1e}; gauge {gauge:.1e}, translation {trans:.1e}, scaling {scal:.1e}"),
    )
}

fn concentration_check(gs: &GroundState, out: &RunOutput) -> Outcome {
    let u = out.snapshots.last().unwrap();
    let lam = out.series.rows.last().unwrap().lambda_est;
    let w = lam * lam.ln().abs();
    match concentration(u, None, w, gs) {
        Ok(c) => outcome(
            c.ratio >= 0.9,
            format!("λ = {lam:.4}, w = {w:.4}, captured / ∫Q² = {:.4}", c.ratio),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn scaling_covariance(gs: &GroundState) -> Outcome {
    let (mu, a, t_end, dt) = (2.0, 0.04, 0.5, 1e-3);
    let ga = Grid::new(1, 1024, 20.0).unwrap();
    let gb = Grid::new(1, 1024, 20.0 / mu).unwrap();
    let u0 = |x: f64| {
        let (q, _) = gs.eval(x.abs());
        Complex64::new(1.05 * q, 0.0) * Complex64::from_polar(1.0, 0.3 * x)
    };
    let ua = Field::from_fn(ga, |x| u0(x[0]));
    let ub = Field::from_fn(gb, |x| u0(mu * x[0]) * mu.sqrt());
    let ra = run(&fixed_step(ga, a, dt, t_end), ua, gs).unwrap();
    let rb = run(&fixed_step(gb, mu * mu * a, dt / (mu * mu), t_end / (mu * mu)), ub, gs).unwrap();
    let (fa, fb) = (&ra.state.u, &rb.state.u);
    let diff = fa
        .values
        .iter()
        .zip(&fb.values)
        .map(|(x, y)| (x * mu.sqrt() - y).norm())
        .fold(0.0, f64::max);
    outcome(
        diff < 1e-5 && ra.state.step_count == rb.state.step_count,
        format!("λ = 2: max pointwise difference {diff:.2e} after {} steps", ra.state.step_count),
    )
}

fn radiation_tier() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for b in [0.25, 0.3] {
        match solve_radiation(b, 0.05, 1, None) {
            Ok(r) => {
                let ratio = r.gamma_b.ln() / (-PI / b);
                pass &= (0.7..=1.3).contains(&ratio);
                details.push(format!(
                    "b = {b}: log Γ/(-π/b) = {ratio:.3} (plateau oscillation {:.1}%)",
                    100.0 * r.plateau_oscillation
                ));
            }
            Err(e) => {
                pass = false;
                details.push(format!("b = {b}: {e}"));
            }
        }
    }
    outcome(pass, details.join("; "))
}

fn rate_oracle() -> Outcome {
    let times = |gap0: f64, gap1: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| 1.0 - (gap0.ln() + (gap1 / gap0).ln() * k as f64 / (n - 1) as f64).exp())
            .collect()
    };
    let sq: Vec<RateSample> = times(0.5, 1e-6, 300)
        .into_iter()
        .map(|t| RateSample { t, lambda: (0.2 * (1.0 - t)).sqrt(), b: 0.1 })
        .collect();
    let ll: Vec<RateSample> = times(0.1, 1e-8, 400)
        .into_iter()
        .map(|t| {
            let s = 1.0 - t;
            RateSample { t, lambda: (s / s.ln().abs().ln()).sqrt(), b: 0.1 }
        })
        .collect();
    let f1 = fit_blowup(&sq, &FitOptions::default()).unwrap();
    let f2 = fit_blowup(&ll, &FitOptions::default()).unwrap();
    let (t1, p1) = ((f1.t_hat - 1.0).abs(), (f1.exponent - 0.5).abs());
    let (t2, p2) = ((f2.t_hat - 1.0).abs(), (f2.exponent - 0.5).abs());
    outcome(
        t1 < 1e-6 && p1 < 1e-3 && t2 < 1e-6 && p2 < 0.05,
        format!(
            "square-root law: |T̂-T| {t1:.1e}, |p-1/2| {p1:.1e}; log-log law: |T̂-T| {t2:.1e}, |p-1/2| {p2:.3}, \
             ratio range [{:.4}, {:.4}]",
            f2.loglog_ratio_range.0, f2.loglog_ratio_range.1
        ),
    )
}

fn main() {
    let gs = ground_state(1).unwrap();
    let mut s = Suite::default();
    s.check(1, "mass decay", true, || mass_decay(&gs));
    s.check(2, "momentum decay", true, || momentum_decay(&gs));
    s.check(3, "energy flux", true, || energy_flux(&gs));
    s.check(4, "ground state", true, ground_states);
    s.check(5, "soliton stationarity", true, || stationarity(&gs));
    s.check(6, "sharp Gagliardo-Nirenberg", true, || sharp_gn(&gs));
    s.check(7, "global existence below threshold", true, || global_below_threshold(&gs));
    let t = Instant::now();
    let blow = blowup_run(&gs);
    println!("(1.05Q focusing run: {} steps in {:.1} s)", blow.state.step_count, t.elapsed().as_secs_f64());
    s.check(8, "blow-up above threshold", true, || blowup(&gs, &blow));
    s.check(9, "self-similar profiles", true, || profile_suite(&gs));
    s.check(10, "modulation round trip and equivariance", true, || modulation_round_trip(&gs));
    s.check(11, "L2 concentration", true, || concentration_check(&gs, &blow));
    s.check(12, "scaling covariance", true, || scaling_covariance(&gs));
    s.check(13, "radiation tier (optional)", false, radiation_tier);
    s.check(14, "rate-fitter oracle", true, rate_oracle);
    if s.failed.is_empty() {
        println!("acceptance: all blocking criteria passed");
    } else {
        println!("acceptance: failing criteria {:?}", s.failed);
        std::process::exit(1);
    }
}
