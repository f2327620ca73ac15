//! Nonlocal space-time maps `dτ = f dt`, `q = √m · (…)` onto the constant-mass
//! reference oscillator, and checks that the image obeys `dq̃/dτ + ω₀² q = 0`.
//!
//! | family | `q`            | `f`                 |
//! |--------|----------------|---------------------|
//! | A      | `√m(r) x`      | `1 + r m'/(2m)`     |
//! | B      | `√m(r) ζ`      | `|ζ| m'/(2m)`       |
//! | C      | `√m(y) (x+ξ)`  | `1 + y m'/(2m)`     |
//!
//! In every case `q̃ = dq/dτ = √m ẋ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{collinearity_defect, dot, Family, OscillatorModel, PhaseState, Trajectory, VerificationReport};
use crate::profiles::{mass, time_scale_f};

/// Collinearity slack of the type-B map.
pub const TYPE_B_COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub tau: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub qtilde: Vec<Vec<f64>>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }
}

/// Maps one PDM state to the reference coordinates `(q, q̃)`.
pub fn map_point(model: &OscillatorModel, state: &PhaseState) -> Result<(Vec<f64>, Vec<f64>)> {
    model.check_dim(&state.x)?;
    model.check_dim(&state.v)?;
    let p = model.mass_center(&state.x);
    let m = mass(&model.profile, &state.x)?;
    if !(m > 0.0) {
        return Err(Error::Domain(format!("mass {m} has no real square root")));
    }
    let root = m.sqrt();
    let q = match model.family {
        Family::TypeA | Family::TypeC => p.iter().map(|c| root * c).collect(),
        Family::TypeB => {
            if model.imaginary_zeta {
                return Err(Error::Validity("an imaginary ζ has no real image".into()));
            }
            let dx = collinearity_defect(&state.x, &model.zeta);
            let dv = collinearity_defect(&state.x, &state.v);
            if dx > TYPE_B_COLLINEAR_TOL || dv > TYPE_B_COLLINEAR_TOL {
                return Err(Error::Validity(format!("type-B map needs x ∥ ζ and x ∥ v (defects {dx:e}, {dv:e})")));
            }
            if !(dot(&state.x, &model.zeta) > 0.0) {
                return Err(Error::Validity("type-B map needs x pointing along ζ".into()));
            }
            model.zeta.iter().map(|z| root * z).collect()
        }
    };
    let qtilde = state.v.iter().map(|c| root * c).collect();
    Ok((q, qtilde))
}

/// Maps every sample, using the τ recorded on the trajectory.
pub fn map_trajectory(traj: &Trajectory) -> Result<ReferenceTrajectory> {
    let mut out = ReferenceTrajectory::default();
    for s in &traj.samples {
        let (q, qt) = map_point(&traj.model, &s.state)?;
        out.tau.push(s.tau);
        out.q.push(q);
        out.qtilde.push(qt);
    }
    Ok(out)
}

/// Re-computes `τ(t) = τ₀ + ∫ f dt` from the recorded states.
///
/// Between samples the position is the cubic Hermite interpolant of `(x, v)` and
/// the integral uses three-point Gauss-Legendre, so the result is fourth order in
/// the sample spacing like the integrators. Integrated trajectories already carry
/// τ as an appended state; this serves trajectories sampled from closed forms.
pub fn accumulate_tau(model: &OscillatorModel, traj: &Trajectory) -> Result<Vec<f64>> {
    const NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
    const WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
    let Some(first) = traj.samples.first() else {
        return Ok(Vec::new());
    };
    let mut taus = vec![first.tau];
    let mut x = vec![0.0; model.dim];
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let h = b.t - a.t;
        let mut acc = 0.0;
        for (&s, &wt) in NODES.iter().zip(&WEIGHTS) {
            let (h00, h10, h01, h11) = hermite_basis(s);
            for i in 0..model.dim {
                x[i] = h00 * a.x[i] + h10 * h * a.v[i] + h01 * b.x[i] + h11 * h * b.v[i];
            }
            acc += wt * time_scale_f(model, &x)?;
        }
        taus.push(taus.last().unwrap() + h * acc);
    }
    Ok(taus)
}

fn hermite_basis(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2)
}

/// Second-order derivative of `y` at interior node `k` on a nonuniform grid.
fn nonuniform_derivative(t: &[f64], k: usize, y: impl Fn(usize) -> f64) -> f64 {
    let h1 = t[k] - t[k - 1];
    let h2 = t[k + 1] - t[k];
    -h2 / (h1 * (h1 + h2)) * y(k - 1) + (h2 - h1) / (h1 * h2) * y(k) + h1 / (h2 * (h1 + h2)) * y(k + 1)
}

fn check_monotone(t: &[f64]) -> Result<()> {
    match t.windows(2).position(|w| !(w[1] > w[0])) {
        Some(i) => Err(Error::NonMonotoneTau(i + 1)),
        None => Ok(()),
    }
}

/// Evaluates `dq̃/dτ + ω₀² q` on the interior samples with a three-point
/// nonuniform stencil. Each sample contributes its largest component.
pub fn sho_residual(reference: &ReferenceTrajectory, omega0: f64, tolerance: f64) -> Result<VerificationReport> {
    let n = reference.len();
    if n < 5 {
        return Err(Error::Validity(format!("need at least 5 samples, got {n}")));
    }
    check_monotone(&reference.tau)?;
    let w2 = omega0 * omega0;
    let residuals = (1..n - 1).map(|k| {
        (0..reference.dim())
            .map(|i| {
                let d = nonuniform_derivative(&reference.tau, k, |j| reference.qtilde[j][i]);
                (d + w2 * reference.q[k][i]).abs()
            })
            .fold(0.0, f64::max)
    });
    Ok(VerificationReport::from_residuals("sho_residual", residuals, tolerance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub amplitudes: Vec<f64>,
    pub omega: f64,
    pub phase: f64,
    pub rms_error: f64,
}

const FIT_MAX_ITERATIONS: usize = 200;

/// Least-squares fit of `qᵢ(τ) = Bᵢ cos(ωτ + φ)` with shared `ω` and `φ`.
///
/// Levenberg-Marquardt; the frequency is seeded from the zero-crossing count of
/// the dominant axis and the phase from the first sample. The result has `ω > 0`,
/// the largest `|Bᵢ|` positive and `φ ∈ (-π, π]`.
pub fn cosine_fit(reference: &ReferenceTrajectory) -> Result<CosineFit> {
    let n = reference.len();
    let dim = reference.dim();
    if n < 4 || dim == 0 {
        return Err(Error::FitDiverged(format!("need at least 4 samples, got {n}")));
    }
    check_monotone(&reference.tau)?;
    let tau = &reference.tau;
    let center = 0.5 * (tau[0] + tau[n - 1]);
    let tc: Vec<f64> = tau.iter().map(|t| t - center).collect();

    let dominant = (0..dim)
        .max_by(|&a, &b| {
            let pa: f64 = reference.q.iter().map(|q| q[a] * q[a]).sum();
            let pb: f64 = reference.q.iter().map(|q| q[b] * q[b]).sum();
            pa.total_cmp(&pb)
        })
        .unwrap();
    let crossings: Vec<f64> = (1..n)
        .filter_map(|k| {
            let (a, b) = (reference.q[k - 1][dominant], reference.q[k][dominant]);
            ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) || (a == 0.0 && b != 0.0 && k == 1))
                .then(|| tc[k - 1] + (tc[k] - tc[k - 1]) * a / (a - b))
        })
        .collect();
    let omega_seed = match crossings.len() {
        0 => return Err(Error::FitDiverged("signal has no zero crossings".into())),
        1 => std::f64::consts::PI / (tc[n - 1] - tc[0]),
        c => std::f64::consts::PI * (c - 1) as f64 / (crossings[c - 1] - crossings[0]),
    };
    let (q0, qt0) = (reference.q[0][dominant], reference.qtilde[0][dominant]);
    let theta0 = (-qt0 / omega_seed).atan2(q0);
    let phase_seed = theta0 - omega_seed * tc[0];
    let amp_seed: Vec<f64> = (0..dim)
        .map(|i| {
            let (num, den) = (0..n).fold((0.0, 0.0), |(nu, de), k| {
                let c = (omega_seed * tc[k] + phase_seed).cos();
                (nu + c * reference.q[k][i], de + c * c)
            });
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();

    let np = dim + 2;
    let mut params = DVector::from_iterator(np, [omega_seed, phase_seed].into_iter().chain(amp_seed));
    let cost = |p: &DVector<f64>| -> f64 {
        let mut s = 0.0;
        for k in 0..n {
            let c = (p[0] * tc[k] + p[1]).cos();
            for i in 0..dim {
                let r = p[2 + i] * c - reference.q[k][i];
                s += r * r;
            }
        }
        s
    };
    let mut current = cost(&params);
    let mut mu = 1e-3;
    let mut converged = false;
    for _ in 0..FIT_MAX_ITERATIONS {
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        let mut row = vec![0.0; np];
        for k in 0..n {
            let th = params[0] * tc[k] + params[1];
            let (s, c) = th.sin_cos();
            for i in 0..dim {
                let b = params[2 + i];
                row.iter_mut().for_each(|r| *r = 0.0);
                row[0] = -b * tc[k] * s;
                row[1] = -b * s;
                row[2 + i] = c;
                let r = b * c - reference.q[k][i];
                for a in 0..np {
                    if row[a] == 0.0 {
                        continue;
                    }
                    jtr[a] += row[a] * r;
                    for bb in 0..np {
                        jtj[(a, bb)] += row[a] * row[bb];
                    }
                }
            }
        }
        let mut stepped = false;
        while mu < 1e16 {
            let mut lhs = jtj.clone();
            for d in 0..np {
                lhs[(d, d)] += mu * jtj[(d, d)].max(1e-300);
            }
            let Some(delta) = lhs.cholesky().map(|ch| ch.solve(&(-&jtr))) else {
                mu *= 10.0;
                continue;
            };
            let trial = &params + &delta;
            let trial_cost = cost(&trial);
            if trial_cost <= current {
                let rel_step = delta.amax() / params.amax().max(1e-300);
                let gain = current - trial_cost;
                params = trial;
                let before = current;
                current = trial_cost;
                mu = (mu * 0.3).max(1e-12);
                stepped = true;
                if rel_step < 1e-13 || gain <= 1e-28 * before.max(1e-300) || current == 0.0 {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if !stepped {
            // no descent direction left: the minimum is reached to rounding
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged || !params.iter().all(|p| p.is_finite()) {
        return Err(Error::FitDiverged(format!("no convergence within {FIT_MAX_ITERATIONS} iterations")));
    }

    let mut omega = params[0];
    let mut phase = params[1] - omega * center;
    let mut amplitudes: Vec<f64> = params.iter().skip(2).copied().collect();
    if omega < 0.0 {
        omega = -omega;
        phase = -phase;
    }
    let lead = amplitudes.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
    if lead == 0.0 || omega == 0.0 {
        return Err(Error::FitDiverged("degenerate amplitude or frequency".into()));
    }
    if lead < 0.0 {
        amplitudes.iter_mut().for_each(|a| *a = -*a);
        phase += std::f64::consts::PI;
    }
    Ok(CosineFit { amplitudes, omega, phase: wrap_phase(phase), rms_error: (current / (n * dim) as f64).sqrt() })
}

fn wrap_phase(phase: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = phase.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Compares the time derivative of the mapped `q` (three-point differences in `t`)
/// with `√m f ẋ` on the interior samples. Residuals are scaled by `max(1, |√m f ẋ|)`.
pub fn verify_f_consistency(model: &OscillatorModel, traj: &Trajectory, tolerance: f64) -> Result<VerificationReport> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::Validity(format!("need at least 3 samples, got {n}")));
    }
    let t = traj.times();
    if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Validity(format!("sample times not increasing at {}", i + 1)));
    }
    let qs = traj.samples.iter().map(|s| map_point(model, &s.state).map(|(q, _)| q)).collect::<Result<Vec<_>>>()?;
    let mut residuals = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let state = &traj.samples[k].state;
        let scale = mass(&model.profile, &state.x)?.sqrt() * time_scale_f(model, &state.x)?;
        let mut worst = 0.0_f64;
        let mut size = 1.0_f64;
        for i in 0..model.dim {
            let fd = nonuniform_derivative(&t, k, |j| qs[j][i]);
            let exact = scale * state.v[i];
            size = size.max(exact.abs());
            worst = worst.max((fd - exact).abs());
        }
        residuals.push(worst / size);
    }
    Ok(VerificationReport::from_residuals("f_consistency", residuals, tolerance))
}
