//! Explicit Runge-Kutta integration of the equations of motion.
//!
//! The integrated state is the flat vector `(x₁..xₙ, v₁..vₙ, τ)` with `τ̇ = f(x)`,
//! so the re-scaled time inherits the order of the scheme. The mass guard runs at
//! every stage; a stage outside the domain ends the run with
//! [`Error::DomainExit`] carrying the samples recorded so far.

use serde::{Deserialize, Serialize};

use crate::dynamics::{form_energy, EomForm, Rhs};
use crate::error::{Error, Result};
use crate::model::{collinearity_defect, OscillatorModel, PhaseState, Sample, Trajectory};

/// Collinearity slack accepted for the reduced equations of motion.
pub const REDUCED_FORM_COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical fourth-order scheme with a fixed step.
    Rk4 { dt: f64 },
    /// Dormand-Prince 5(4) with PI step control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    pub max_steps: usize,
    /// Record every k-th accepted step; the first and last states are always kept.
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_end: f64) -> Self {
        IntegratorConfig { method: Method::Rk4 { dt }, t_end, max_steps: 10_000_000, record_every: 1 }
    }

    pub fn rk45(abs_tol: f64, rel_tol: f64, t_end: f64) -> Self {
        IntegratorConfig { method: Method::Rk45 { abs_tol, rel_tol }, t_end, max_steps: 10_000_000, record_every: 1 }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    pub fn validate(&self, t_start: f64) -> Result<()> {
        if !(self.t_end > t_start) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must exceed t_start = {t_start}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => {
                Err(Error::Config(format!("dt = {dt} must be positive")))
            }
            Method::Rk45 { abs_tol, rel_tol } if !(abs_tol > 0.0 && rel_tol > 0.0) => {
                Err(Error::Config(format!("tolerances must be positive (abs {abs_tol}, rel {rel_tol})")))
            }
            _ => Ok(()),
        }
    }
}

struct System<'a> {
    rhs: Rhs<'a>,
    n: usize,
}

impl System<'_> {
    fn deriv(&mut self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.n;
        let (x, rest) = y.split_at(n);
        let v = &rest[..n];
        dy[..n].copy_from_slice(v);
        let f = self.rhs.eval(x, v, &mut dy[n..2 * n])?;
        dy[2 * n] = f;
        if dy.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain("non-finite derivative".into()))
        }
    }
}

fn is_domain(e: &Error) -> bool {
    matches!(e, Error::Domain(_) | Error::SingularMass(_))
}

struct Recorder<'a> {
    model: &'a OscillatorModel,
    form: EomForm,
    traj: Trajectory,
    every: usize,
    n: usize,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, y: &[f64]) -> Result<()> {
        let n = self.n;
        let state = PhaseState::new(t, y[..n].to_vec(), y[n..2 * n].to_vec());
        let energy = form_energy(self.model, self.form, &state)?;
        self.traj.samples.push(Sample { state, tau: y[2 * n], energy });
        Ok(())
    }

    fn step(&mut self, steps: usize, t: f64, y: &[f64]) -> Result<()> {
        if steps.is_multiple_of(self.every) {
            self.push(t, y)?;
        }
        Ok(())
    }

    fn finish(&mut self, t: f64, y: &[f64]) -> Result<()> {
        self.push(t, y)
    }

    fn domain_exit(self, t: f64, reason: impl Into<String>) -> Error {
        Error::DomainExit { t, reason: reason.into(), partial: Box::new(self.traj) }
    }
}

/// Integrates `form` from `initial` to `config.t_end`.
///
/// Reduced forms refuse initial states whose (shifted) position and velocity are
/// not collinear to within [`REDUCED_FORM_COLLINEAR_TOL`].
pub fn integrate(
    model: &OscillatorModel,
    form: EomForm,
    initial: &PhaseState,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    model.validate()?;
    model.check_dim(&initial.x)?;
    model.check_dim(&initial.v)?;
    config.validate(initial.t)?;
    if form.requires_collinearity() {
        let defect = collinearity_defect(&model.mass_center(&initial.x), &initial.v);
        if defect > REDUCED_FORM_COLLINEAR_TOL {
            return Err(Error::Collinearity(defect));
        }
    }
    let n = model.dim;
    let mut sys = System { rhs: Rhs::new(model, form), n };
    let mut rec = Recorder { model, form, traj: Trajectory::new(model.clone()), every: config.record_every, n };

    let mut y = Vec::with_capacity(2 * n + 1);
    y.extend_from_slice(&initial.x);
    y.extend_from_slice(&initial.v);
    y.push(0.0);
    let mut dy = vec![0.0; 2 * n + 1];
    if let Err(e) = sys.deriv(&y, &mut dy) {
        return Err(if is_domain(&e) { rec.domain_exit(initial.t, e.to_string()) } else { e });
    }
    rec.push(initial.t, &y)?;
    match config.method {
        Method::Rk4 { dt } => rk4(&mut sys, rec, initial.t, y, dt, config),
        Method::Rk45 { abs_tol, rel_tol } => rk45(&mut sys, rec, initial.t, y, dy, abs_tol, rel_tol, config),
    }
}

fn axpy(out: &mut [f64], y: &[f64], terms: &[(f64, &[f64])]) {
    for i in 0..out.len() {
        let mut s = y[i];
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] = s;
    }
}

fn rk4(
    sys: &mut System<'_>,
    mut rec: Recorder<'_>,
    t0: f64,
    mut y: Vec<f64>,
    dt: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let len = y.len();
    let total = ((config.t_end - t0) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if total > config.max_steps {
        return Err(Error::StepLimit { limit: config.max_steps, t: t0, partial: Box::new(rec.traj) });
    }
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut tmp = vec![0.0; len];
    let mut t = t0;
    for step in 1..=total {
        // t advances by the same additions as τ, so f ≡ 1 gives τ = t - t₀ exactly
        let h = if step == total { config.t_end - t } else { dt };
        let stages = (|| -> Result<()> {
            sys.deriv(&y, &mut k1)?;
            axpy(&mut tmp, &y, &[(0.5 * h, &k1)]);
            sys.deriv(&tmp, &mut k2)?;
            axpy(&mut tmp, &y, &[(0.5 * h, &k2)]);
            sys.deriv(&tmp, &mut k3)?;
            axpy(&mut tmp, &y, &[(h, &k3)]);
            sys.deriv(&tmp, &mut k4)
        })();
        if let Err(e) = stages {
            return Err(if is_domain(&e) { rec.domain_exit(t, e.to_string()) } else { e });
        }
        for i in 0..len {
            y[i] += h * ((k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0);
        }
        t = if step == total { config.t_end } else { t + h };
        if step == total {
            rec.finish(t, &y)?;
        } else {
            rec.step(step, t, &y)?;
        }
    }
    Ok(rec.traj)
}

// Dormand-Prince 5(4) tableau; the system is autonomous so the nodes cᵢ are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

fn scaled_norm(v: &[f64], y: &[f64], abs_tol: f64, rel_tol: f64) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(e, yi)| {
            let r = e / (abs_tol + rel_tol * yi.abs());
            r * r
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step(sys: &mut System<'_>, y: &[f64], dy: &[f64], abs_tol: f64, rel_tol: f64, span: f64) -> f64 {
    let d0 = scaled_norm(y, y, abs_tol, rel_tol);
    let d1 = scaled_norm(dy, y, abs_tol, rel_tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = vec![0.0; y.len()];
    axpy(&mut y1, y, &[(h0, dy)]);
    let mut f1 = vec![0.0; y.len()];
    if sys.deriv(&y1, &mut f1).is_err() {
        return h0 * 1e-3;
    }
    let diff: Vec<f64> = f1.iter().zip(dy).map(|(a, b)| (a - b) / h0).collect();
    let d2 = scaled_norm(&diff, y, abs_tol, rel_tol);
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

#[allow(clippy::too_many_arguments)]
fn rk45(
    sys: &mut System<'_>,
    mut rec: Recorder<'_>,
    t0: f64,
    mut y: Vec<f64>,
    mut k1: Vec<f64>,
    abs_tol: f64,
    rel_tol: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let len = y.len();
    let mut k: Vec<Vec<f64>> = (0..6).map(|_| vec![0.0; len]).collect();
    let mut tmp = vec![0.0; len];
    let mut y_new = vec![0.0; len];
    let mut err = vec![0.0; len];
    let mut t = t0;
    let mut h = initial_step(sys, &y, &k1, abs_tol, rel_tol, config.t_end - t0);
    let mut err_prev: f64 = 1e-4;
    let mut rejected = false;
    let mut accepted = 0usize;
    let mut attempts = 0usize;

    loop {
        if attempts >= config.max_steps {
            return Err(Error::StepLimit { limit: config.max_steps, t, partial: Box::new(rec.traj) });
        }
        attempts += 1;
        let remaining = config.t_end - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(rec.domain_exit(t, "step size underflow"));
        }

        let [k2, k3, k4, k5, k6, k7] = &mut k[..] else { unreachable!() };
        let stages = (|| -> Result<()> {
            axpy(&mut tmp, &y, &[(h * A21, &k1)]);
            sys.deriv(&tmp, k2)?;
            axpy(&mut tmp, &y, &[(h * A31, &k1), (h * A32, k2)]);
            sys.deriv(&tmp, k3)?;
            axpy(&mut tmp, &y, &[(h * A41, &k1), (h * A42, k2), (h * A43, k3)]);
            sys.deriv(&tmp, k4)?;
            axpy(&mut tmp, &y, &[(h * A51, &k1), (h * A52, k2), (h * A53, k3), (h * A54, k4)]);
            sys.deriv(&tmp, k5)?;
            axpy(&mut tmp, &y, &[(h * A61, &k1), (h * A62, k2), (h * A63, k3), (h * A64, k4), (h * A65, k5)]);
            sys.deriv(&tmp, k6)?;
            axpy(&mut y_new, &y, &[(h * A71, &k1), (h * A73, k3), (h * A74, k4), (h * A75, k5), (h * A76, k6)]);
            sys.deriv(&y_new, k7)
        })();
        if let Err(e) = stages {
            if !is_domain(&e) {
                return Err(e);
            }
            h *= 0.25;
            rejected = true;
            continue;
        }
        for i in 0..len {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let scale: Vec<f64> = y.iter().zip(&y_new).map(|(a, b)| a.abs().max(b.abs())).collect();
        let e = scaled_norm(&err, &scale, abs_tol, rel_tol);
        if !e.is_finite() {
            h *= 0.25;
            rejected = true;
            continue;
        }
        if e <= 1.0 {
            let e = e.max(1e-10);
            let mut fac = SAFETY * e.powf(-ALPHA) * err_prev.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected {
                fac = fac.min(1.0);
            }
            err_prev = e;
            rejected = false;
            t = if last { config.t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, k7);
            accepted += 1;
            if last {
                rec.finish(t, &y)?;
                return Ok(rec.traj);
            }
            rec.step(accepted, t, &y)?;
            h *= fac;
        } else {
            let fac = (SAFETY * e.powf(-ALPHA)).max(FAC_MIN);
            h *= fac;
            rejected = true;
        }
    }
}

/// Oscillation period of one coordinate.
///
/// Crossings of the sample mean are located on the cubic Hermite interpolant of
/// `(x, ẋ)`. With at least two crossings in the same direction the period is the
/// average spacing of those; a single pair of opposite crossings gives twice their gap.
pub fn measure_period(traj: &Trajectory, axis: usize) -> Result<f64> {
    let dim = traj.model.dim;
    if axis >= dim {
        return Err(Error::DimensionMismatch { expected: dim, found: axis });
    }
    let n = traj.len();
    if n < 2 {
        return Err(Error::InsufficientCrossings(0));
    }
    let level = traj.samples.iter().map(|s| s.state.x[axis]).sum::<f64>() / n as f64;
    let mut up = Vec::new();
    let mut down = Vec::new();
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0].state, &w[1].state);
        let (ya, yb) = (a.x[axis] - level, b.x[axis] - level);
        let rising = ya < 0.0 && yb >= 0.0;
        let falling = ya > 0.0 && yb <= 0.0;
        if !(rising || falling) {
            continue;
        }
        let h = b.t - a.t;
        let value = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * ya
                + (s3 - 2.0 * s2 + s) * h * a.v[axis]
                + (-2.0 * s3 + 3.0 * s2) * yb
                + (s3 - s2) * h * b.v[axis]
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if (value(mid) < 0.0) == (ya < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let tc = a.t + 0.5 * (lo + hi) * h;
        if rising {
            up.push(tc);
        } else {
            down.push(tc);
        }
    }
    let spacing = |c: &[f64]| (c[c.len() - 1] - c[0]) / (c.len() - 1) as f64;
    match (up.len(), down.len()) {
        (u, d) if u >= 2 && u >= d => Ok(spacing(&up)),
        (_, d) if d >= 2 => Ok(spacing(&down)),
        (1, 1) => Ok(2.0 * (up[0] - down[0]).abs()),
        (u, d) => Err(Error::InsufficientCrossings(u + d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Branch, PdmProfile};
    use std::f64::consts::{PI, TAU};

    fn ml(lambda: f64, branch: Branch, dim: usize) -> OscillatorModel {
        OscillatorModel::type_a(PdmProfile::MathewsLakshmanan { lambda, branch }, dim, 1.0).unwrap()
    }

    #[test]
    fn sho_returns_after_one_period() {
        let model = ml(0.0, Branch::Plus, 2);
        let init = PhaseState::at_rest(0.0, vec![1.0, 0.0]);
        let traj = integrate(&model, EomForm::El2Direct, &init, &IntegratorConfig::rk4(TAU / 1000.0, TAU)).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.state.t, TAU);
        assert!((last.state.x[0] - 1.0).abs() < 1e-8 && last.state.x[1].abs() < 1e-8);
        assert_eq!(last.tau, TAU);
        assert_eq!(traj.len(), 1001);
    }

    #[test]
    fn recording_cadence() {
        let model = ml(0.0, Branch::Plus, 1);
        let init = PhaseState::at_rest(0.0, vec![1.0]);
        let cfg = IntegratorConfig::rk4(0.1, 1.05).with_record_every(3);
        let traj = integrate(&model, EomForm::El2Direct, &init, &cfg).unwrap();
        let t = traj.times();
        assert_eq!(t.len(), 5);
        assert!((t[1] - 0.3).abs() < 1e-12 && t[4] == 1.05);
    }

    #[test]
    fn outside_domain_exits_immediately() {
        let model = ml(1.0, Branch::Minus, 1);
        let init = PhaseState::at_rest(0.0, vec![1.5]);
        for cfg in [IntegratorConfig::rk4(0.01, 1.0), IntegratorConfig::rk45(1e-9, 1e-9, 1.0)] {
            match integrate(&model, EomForm::El2Direct, &init, &cfg) {
                Err(Error::DomainExit { t, partial, .. }) => {
                    assert_eq!(t, 0.0);
                    assert!(partial.is_empty());
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn reduced_forms_need_collinear_start() {
        let model = ml(0.5, Branch::Plus, 2);
        let init = PhaseState::new(0.0, vec![1.0, 0.0], vec![0.0, 1.0]);
        let cfg = IntegratorConfig::rk4(0.01, 1.0);
        for form in [EomForm::El2Mdot, EomForm::El2Radial, EomForm::NewtonParallel] {
            assert!(matches!(integrate(&model, form, &init, &cfg), Err(Error::Collinearity(_))));
        }
        assert!(integrate(&model, EomForm::El2Direct, &init, &cfg).is_ok());
    }

    #[test]
    fn config_errors() {
        let model = ml(0.0, Branch::Plus, 1);
        let init = PhaseState::at_rest(0.0, vec![1.0]);
        for cfg in [
            IntegratorConfig::rk4(0.0, 1.0),
            IntegratorConfig::rk4(0.1, 0.0),
            IntegratorConfig::rk45(0.0, 1e-6, 1.0),
            IntegratorConfig::rk4(0.1, 1.0).with_record_every(0),
        ] {
            assert!(matches!(integrate(&model, EomForm::El2Direct, &init, &cfg), Err(Error::Config(_))));
        }
        let cfg = IntegratorConfig::rk4(0.1, 1.0).with_max_steps(5);
        assert!(matches!(integrate(&model, EomForm::El2Direct, &init, &cfg), Err(Error::StepLimit { .. })));
    }

    #[test]
    fn adaptive_matches_sho() {
        let model = ml(0.0, Branch::Plus, 1);
        let init = PhaseState::at_rest(0.0, vec![1.0]);
        let traj = integrate(&model, EomForm::El2Direct, &init, &IntegratorConfig::rk45(1e-12, 1e-12, 10.0)).unwrap();
        for s in &traj.samples {
            assert!((s.state.x[0] - s.state.t.cos()).abs() < 1e-9);
        }
        assert_eq!(traj.last().unwrap().state.t, 10.0);
    }

    #[test]
    fn period_of_synthetic_cosine() {
        let model = ml(0.0, Branch::Plus, 1);
        let mut traj = Trajectory::new(model.clone());
        for k in 0..=400 {
            let t = k as f64 * 0.02;
            traj.samples.push(Sample {
                state: PhaseState::new(t, vec![(2.0 * t).cos()], vec![-2.0 * (2.0 * t).sin()]),
                tau: t,
                energy: 0.0,
            });
        }
        assert!((measure_period(&traj, 0).unwrap() - PI).abs() < 1e-8);

        let mut flat = traj.clone();
        for s in &mut flat.samples {
            s.state.x[0] = 0.3;
            s.state.v[0] = 0.0;
        }
        assert!(matches!(measure_period(&flat, 0), Err(Error::InsufficientCrossings(0))));
    }

    #[test]
    fn ml1_period() {
        let model = ml(1.0, Branch::Plus, 2);
        let init = PhaseState::at_rest(0.0, vec![1.0, 0.0]);
        let traj = integrate(&model, EomForm::El2Radial, &init, &IntegratorConfig::rk4(1e-3, 30.0)).unwrap();
        let expected = TAU / 0.5_f64.sqrt();
        assert!((measure_period(&traj, 0).unwrap() / expected - 1.0).abs() < 1e-5);
    }
}
