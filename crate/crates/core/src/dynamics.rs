//! Equations of motion, residuals and total energy.
//!
//! With `L = ½ m₀ m(r) |v|² - V(r)` the component Euler-Lagrange equations read
//!
//! ```text
//! ẍᵢ + (ṁ/m) ẋᵢ - ½ (∂ᵢm/m) |v|² + ∂ᵢV/(m₀m) = 0          (EL-II, direct)
//! ```
//!
//! Summing them against the unit vectors gives the Newtonian vector form. When
//! `r ∥ v` the identity `v (v·r) = r (v·v)` collapses the velocity terms and two
//! reduced component forms follow:
//!
//! ```text
//! ẍᵢ + (ṁ/2m) ẋᵢ + ∂ᵢV/(m₀m) = 0                              (EL-II, ṁ form)
//! ẍᵢ + (∂ᵣm / 2rm) |v|² xᵢ + ∂ᵢV/(m₀m) = 0                     (EL-II, radial form)
//! ```
//!
//! The reduced forms are only valid on collinear states. For the shifted profile
//! every `r`, `xᵢ` above is replaced by `y = |x + ξ|`, `xᵢ + ξᵢ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, norm_sq, Family, OscillatorModel, PhaseState};
use crate::profiles::{self, Radial};

/// Masses with magnitude below this are rejected before dividing by them.
pub const SINGULAR_MASS: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EomForm {
    /// Per-axis masses `mᵢ(xᵢ)`; for a model, every axis carries its own 1-D copy
    /// of the profile and potential.
    El1,
    /// Component EL-II equations, valid for any state.
    El2Direct,
    /// Reduced EL-II with the `ṁ/2m` friction-like term (collinear states).
    El2Mdot,
    /// Reduced EL-II with the radial `|v|² xᵢ` term (collinear states).
    El2Radial,
    /// Newtonian vector form of EL-II, valid for any state.
    NewtonFull,
    /// Newtonian vector form after the parallel-vector identity (collinear states).
    NewtonParallel,
}

impl EomForm {
    pub const ALL: [EomForm; 6] = [
        EomForm::El1,
        EomForm::El2Direct,
        EomForm::El2Mdot,
        EomForm::El2Radial,
        EomForm::NewtonFull,
        EomForm::NewtonParallel,
    ];

    pub fn requires_collinearity(self) -> bool {
        matches!(self, EomForm::El2Mdot | EomForm::El2Radial | EomForm::NewtonParallel)
    }

    pub fn name(self) -> &'static str {
        match self {
            EomForm::El1 => "el1",
            EomForm::El2Direct => "el2_direct",
            EomForm::El2Mdot => "el2_mdot",
            EomForm::El2Radial => "el2_radial",
            EomForm::NewtonFull => "newton_full",
            EomForm::NewtonParallel => "newton_parallel",
        }
    }
}

impl fmt::Display for EomForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn check_mass(m: f64) -> Result<()> {
    if m.abs() < SINGULAR_MASS || !m.is_finite() {
        Err(Error::SingularMass(m))
    } else {
        Ok(())
    }
}

/// Reusable right-hand-side evaluator; keeps scratch buffers so the integrators
/// do not allocate per stage.
pub(crate) struct Rhs<'a> {
    model: &'a OscillatorModel,
    form: EomForm,
    p: Vec<f64>,
    grad: Vec<f64>,
}

impl<'a> Rhs<'a> {
    pub(crate) fn new(model: &'a OscillatorModel, form: EomForm) -> Self {
        Rhs { model, form, p: vec![0.0; model.dim], grad: vec![0.0; model.dim] }
    }

    /// Writes the acceleration into `a` and returns the time-scale factor `f`.
    pub(crate) fn eval(&mut self, x: &[f64], v: &[f64], a: &mut [f64]) -> Result<f64> {
        let model = self.model;
        model.check_dim(x)?;
        model.check_dim(v)?;
        match model.profile.shift() {
            Some(s) => {
                for ((p, xi), si) in self.p.iter_mut().zip(x).zip(s) {
                    *p = xi + si;
                }
            }
            None => self.p.copy_from_slice(x),
        }
        let rad = profiles::radial(&model.profile, norm_sq(&self.p).sqrt())?;
        let f = profiles::f_from_radial(model, &rad)?;
        if self.form == EomForm::El1 {
            el1_model_into(model, &self.p, v, a)?;
            return Ok(f);
        }
        check_mass(rad.m)?;
        profiles::gradient_from_radial(model, &self.p, &rad, &mut self.grad)?;
        el2_into(model, self.form, &self.p, v, &rad, &self.grad, a)?;
        Ok(f)
    }
}

fn el2_into(
    model: &OscillatorModel,
    form: EomForm,
    p: &[f64],
    v: &[f64],
    rad: &Radial,
    grad: &[f64],
    a: &mut [f64],
) -> Result<()> {
    let m = rad.m;
    let inv_mm0 = 1.0 / (model.m0 * m);
    let vv = norm_sq(v);
    let pv = dot(p, v);
    match form {
        EomForm::El2Direct => {
            // ṁ = Σ ∂ₖm ẋₖ, ∂ᵢm = (m'/ρ) pᵢ
            let mdot = rad.dm_over_rho * pv;
            for i in 0..a.len() {
                let dmi = rad.dm_over_rho * p[i];
                a[i] = -(mdot / m) * v[i] + 0.5 * (dmi / m) * vv - grad[i] * inv_mm0;
            }
        }
        EomForm::El2Mdot => {
            let mdot = rad.dm_over_rho * pv;
            for i in 0..a.len() {
                a[i] = -(mdot / (2.0 * m)) * v[i] - grad[i] * inv_mm0;
            }
        }
        EomForm::El2Radial => {
            let c = 0.5 * rad.dm_over_rho / m * vv;
            for i in 0..a.len() {
                a[i] = -c * p[i] - grad[i] * inv_mm0;
            }
        }
        EomForm::NewtonFull | EomForm::NewtonParallel => {
            // Vector form written with ∂ᵣm and the unit vector r̂.
            let (dm, rhat): (f64, Vec<f64>) = if rad.rho > 0.0 {
                (rad.dm, p.iter().map(|c| c / rad.rho).collect())
            } else {
                (0.0, vec![0.0; p.len()])
            };
            let rhat_v = dot(&rhat, v);
            for i in 0..a.len() {
                let velocity_terms = if form == EomForm::NewtonFull {
                    dm * rhat_v * v[i] - 0.5 * dm * rhat[i] * vv
                } else {
                    0.5 * dm * rhat[i] * vv
                };
                a[i] = -velocity_terms / m - grad[i] * inv_mm0;
            }
        }
        EomForm::El1 => unreachable!("per-axis form handled separately"),
    }
    if a.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("acceleration diverges at radius {}", rad.rho)))
    }
}

/// EL-I for a model: axis `i` uses `mᵢ = m(|pᵢ|)` and the 1-D potential
/// `½ m₀ ω₀² mᵢ sᵢ`, where `sᵢ = pᵢ²` (types A, C) or `ζᵢ²` (type B).
fn el1_model_into(model: &OscillatorModel, p: &[f64], v: &[f64], a: &mut [f64]) -> Result<()> {
    let w2 = model.omega0 * model.omega0;
    let zeta_sign = if model.imaginary_zeta { -1.0 } else { 1.0 };
    for i in 0..a.len() {
        let rad = profiles::radial(&model.profile, p[i].abs())?;
        check_mass(rad.m)?;
        // d mᵢ/d xᵢ
        let dm_i = rad.dm_over_rho * p[i];
        let grad_i = match model.family {
            Family::TypeA | Family::TypeC => model.m0 * w2 * rad.m * (1.0 + 0.5 * rad.log_slope) * p[i],
            Family::TypeB => {
                let z2 = zeta_sign * model.zeta[i] * model.zeta[i];
                0.5 * model.m0 * w2 * z2 * dm_i
            }
        };
        a[i] = el1_axis(rad.m, dm_i, v[i], grad_i / model.m0);
        if !a[i].is_finite() {
            return Err(Error::Domain(format!("acceleration diverges on axis {i}")));
        }
    }
    Ok(())
}

/// `ẍ = -(ṁ/2m) ẋ - ∂V/m` with `ṁ = m' ẋ`.
fn el1_axis(m: f64, dm: f64, v: f64, grad: f64) -> f64 {
    -(dm * v / (2.0 * m)) * v - grad / m
}

/// Acceleration `ẍ` solving the chosen equation of motion at `state`.
///
/// The reduced forms are evaluated as written even off the collinear manifold;
/// gating is left to the integrators.
pub fn acceleration(model: &OscillatorModel, form: EomForm, state: &PhaseState) -> Result<Vec<f64>> {
    let mut a = vec![0.0; model.dim];
    Rhs::new(model, form).eval(&state.x, &state.v, &mut a)?;
    Ok(a)
}

/// Left-hand side of the chosen equation with `ẍ := accel`; zero iff `accel` solves it.
///
/// Component forms are normalized as written (unit coefficient on `ẍ`);
/// `NewtonFull` is the force balance of [`newtonian_vector_residual`].
pub fn el_residual(model: &OscillatorModel, form: EomForm, state: &PhaseState, accel: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(accel)?;
    if form == EomForm::NewtonFull {
        return newtonian_vector_residual(model, state, accel);
    }
    let solved = acceleration(model, form, state)?;
    Ok(accel.iter().zip(&solved).map(|(a, s)| a - s).collect())
}

/// `m₀ m a + m₀ ∂ᵣm [v (r·v)/r] - ½ m₀ ∂ᵣm [r (v·v)/r] + ∇V`, with no collinearity assumed.
pub fn newtonian_vector_residual(model: &OscillatorModel, state: &PhaseState, accel: &[f64]) -> Result<Vec<f64>> {
    model.check_dim(accel)?;
    model.check_dim(&state.v)?;
    let (p, rad) = profiles::radial_at(model, &state.x)?;
    let mut grad = vec![0.0; model.dim];
    profiles::gradient_from_radial(model, &p, &rad, &mut grad)?;
    let v = &state.v;
    let vv = norm_sq(v);
    let mut out = vec![0.0; model.dim];
    if rad.rho > 0.0 {
        let rv = dot(&p, v) / rad.rho;
        for i in 0..model.dim {
            let r_over = p[i] / rad.rho;
            out[i] = model.m0 * (rad.m * accel[i] + rad.dm * v[i] * rv - 0.5 * rad.dm * r_over * vv) + grad[i];
        }
    } else {
        for i in 0..model.dim {
            out[i] = model.m0 * rad.m * accel[i] + grad[i];
        }
    }
    Ok(out)
}

/// `½ m₀ m |v|² + V`.
pub fn total_energy(model: &OscillatorModel, state: &PhaseState) -> Result<f64> {
    model.check_dim(&state.v)?;
    let (_, rad) = profiles::radial_at(model, &state.x)?;
    let kinetic = 0.5 * model.m0 * rad.m * norm_sq(&state.v);
    Ok(kinetic + profiles::potential_from_radial(model, &rad))
}

/// Energy conserved by `form`: [`total_energy`] for the common-mass forms, and
/// `Σ ½ m₀ mᵢ ẋᵢ² + ½ m₀ ω₀² mᵢ sᵢ` for the per-axis form.
pub fn form_energy(model: &OscillatorModel, form: EomForm, state: &PhaseState) -> Result<f64> {
    if form != EomForm::El1 {
        return total_energy(model, state);
    }
    model.check_dim(&state.x)?;
    model.check_dim(&state.v)?;
    let p = model.mass_center(&state.x);
    let w2 = model.omega0 * model.omega0;
    let zeta_sign = if model.imaginary_zeta { -1.0 } else { 1.0 };
    let mut e = 0.0;
    for i in 0..model.dim {
        let m = profiles::radial(&model.profile, p[i].abs())?.m;
        let s = match model.family {
            Family::TypeA | Family::TypeC => p[i] * p[i],
            Family::TypeB => zeta_sign * model.zeta[i] * model.zeta[i],
        };
        e += 0.5 * model.m0 * m * (state.v[i] * state.v[i] + w2 * s);
    }
    Ok(e)
}

/// One-dimensional mass function returning `(mᵢ(xᵢ), mᵢ'(xᵢ))`.
pub type AxisMass = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Per-axis masses of the EL-I Lagrangian `½ m₀ Σ mⱼ(xⱼ) ẋⱼ² - V`.
#[derive(Clone)]
pub struct PerAxisMassSpec {
    pub axes: Vec<AxisMass>,
}

impl fmt::Debug for PerAxisMassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerAxisMassSpec").field("dim", &self.axes.len()).finish()
    }
}

impl PerAxisMassSpec {
    pub fn new(axes: Vec<AxisMass>) -> Self {
        PerAxisMassSpec { axes }
    }

    pub fn constant(dim: usize) -> Self {
        PerAxisMassSpec { axes: (0..dim).map(|_| Arc::new(|_: f64| (1.0, 0.0)) as AxisMass).collect() }
    }

    /// Every axis carries `m(|xᵢ|)` of an unshifted profile.
    pub fn from_profile(profile: &crate::model::PdmProfile, dim: usize) -> Self {
        let axes = (0..dim)
            .map(|_| {
                let profile = profile.clone();
                Arc::new(move |xi: f64| match profiles::radial(&profile, xi.abs()) {
                    Ok(rad) => (rad.m, rad.dm_over_rho * xi),
                    Err(_) => (f64::NAN, f64::NAN),
                }) as AxisMass
            })
            .collect();
        PerAxisMassSpec { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Decoupled EL-I accelerations `ẍᵢ = -(ṁᵢ/2mᵢ) ẋᵢ - ∂ᵢV/mᵢ` (m₀ = 1 units:
/// `potential_grad` must already be divided by m₀).
pub fn el1_acceleration<G>(spec: &PerAxisMassSpec, potential_grad: G, state: &PhaseState) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let n = spec.dim();
    for len in [state.x.len(), state.v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let grad = potential_grad(&state.x);
    if grad.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: grad.len() });
    }
    let mut a = Vec::with_capacity(n);
    for (i, mass) in spec.axes.iter().enumerate() {
        let (m, dm) = mass(state.x[i]);
        if m.is_nan() {
            return Err(Error::Domain(format!("axis {i} mass undefined at {}", state.x[i])));
        }
        check_mass(m)?;
        a.push(el1_axis(m, dm, state.v[i], grad[i]));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Branch, PdmProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ml(lambda: f64, branch: Branch) -> PdmProfile {
        PdmProfile::MathewsLakshmanan { lambda, branch }
    }

    fn state(x: &[f64], v: &[f64]) -> PhaseState {
        PhaseState::new(0.0, x.to_vec(), v.to_vec())
    }

    fn assert_vec(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn sho_limit() {
        let model = OscillatorModel::type_a(ml(0.0, Branch::Plus), 2, 1.0).unwrap();
        let s = state(&[1.0, 0.0], &[0.0, 0.0]);
        for form in EomForm::ALL {
            assert_vec(&acceleration(&model, form, &s).unwrap(), &[-1.0, 0.0], 1e-15);
        }
        // pure restoring force remains when ẍ = 0 is plugged in
        let model = OscillatorModel::type_a(ml(0.0, Branch::Plus), 2, 2.0).unwrap();
        let r = el_residual(&model, EomForm::El2Direct, &s, &[0.0, 0.0]).unwrap();
        assert_vec(&r, &[4.0, 0.0], 1e-15);
    }

    #[test]
    fn ml_type_one_at_rest() {
        // ẍ = -x/(1+λr²) with Σẋ² = 0
        let model = OscillatorModel::type_a(ml(1.0, Branch::Plus), 2, 1.0).unwrap();
        let s = state(&[1.0, 0.0], &[0.0, 0.0]);
        assert_vec(&acceleration(&model, EomForm::El2Radial, &s).unwrap(), &[-0.5, 0.0], 1e-15);
        assert_vec(&acceleration(&model, EomForm::El2Direct, &s).unwrap(), &[-0.5, 0.0], 1e-15);
    }

    #[test]
    fn power_law_forms_differ_off_collinear() {
        // x ⟂ v, υ = 1: only the radial term, the ṁ term or both survive.
        let model = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon: 1.0 }, 2, 1.0).unwrap();
        let s = state(&[1.0, 0.0], &[0.0, 1.0]);
        assert_vec(&acceleration(&model, EomForm::El2Radial, &s).unwrap(), &[-3.0, 0.0], 1e-15);
        assert_vec(&acceleration(&model, EomForm::El2Mdot, &s).unwrap(), &[-2.0, 0.0], 1e-15);
        assert_vec(&acceleration(&model, EomForm::El2Direct, &s).unwrap(), &[-1.0, 0.0], 1e-15);
        assert_vec(&acceleration(&model, EomForm::NewtonFull, &s).unwrap(), &[-1.0, 0.0], 1e-15);
    }

    #[test]
    fn residual_of_own_acceleration_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = OscillatorModel::type_c(
            PdmProfile::ShiftedMl { lambda: 0.4, branch: Branch::Minus, shift: vec![0.2, -0.1, 0.3] },
            1.4,
        )
        .unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = state(&x, &v);
            for form in EomForm::ALL {
                let a = acceleration(&model, form, &s).unwrap();
                let r = el_residual(&model, form, &s, &a).unwrap();
                let scale = a.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
                assert!(r.iter().all(|c| c.abs() <= 1e-13 * scale), "{form}: {r:?}");
            }
        }
    }

    #[test]
    fn newtonian_constant_mass_limit() {
        let model = OscillatorModel::type_a(ml(0.0, Branch::Plus), 3, 1.5).unwrap();
        let s = state(&[0.3, -0.2, 0.9], &[1.0, 2.0, -0.5]);
        let a = [0.1, 0.2, 0.3];
        let r = newtonian_vector_residual(&model, &s, &a).unwrap();
        let grad = profiles::potential_gradient(&model, &s.x).unwrap();
        let expected: Vec<f64> = a.iter().zip(&grad).map(|(ai, gi)| ai + gi).collect();
        assert_vec(&r, &expected, 1e-15);
    }

    #[test]
    fn singular_mass_rejected() {
        let model = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon: 1.0 }, 2, 1.0).unwrap();
        let s = state(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(matches!(acceleration(&model, EomForm::El2Direct, &s), Err(Error::SingularMass(_))));
        let minus = OscillatorModel::type_a(ml(1.0, Branch::Minus), 1, 1.0).unwrap();
        assert!(matches!(acceleration(&minus, EomForm::El2Direct, &state(&[1.2], &[0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn energy_examples() {
        let model = OscillatorModel::type_a(ml(1.0, Branch::Plus), 1, 1.0).unwrap();
        assert_eq!(total_energy(&model, &state(&[0.0], &[0.0])).unwrap(), 0.0);
        assert!((total_energy(&model, &state(&[1.0], &[0.0])).unwrap() - 0.25).abs() < 1e-15);
        let pl = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon: 1.0 }, 2, 1.0).unwrap();
        assert!((total_energy(&pl, &state(&[1.0, 0.0], &[0.0, 0.0])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn el1_examples() {
        let sho = PerAxisMassSpec::constant(2);
        let grad = |x: &[f64]| x.to_vec();
        let a = el1_acceleration(&sho, grad, &state(&[1.0, 1.0], &[0.0, 0.0])).unwrap();
        assert_vec(&a, &[-1.0, -1.0], 0.0);

        // m₁ = 1/(1+x₁²): m = ½, m' = -½, ṁ = -½ → ẍ₁ = ½ - 2
        let spec = PerAxisMassSpec::new(vec![
            Arc::new(|x: f64| (1.0 / (1.0 + x * x), -2.0 * x / (1.0 + x * x).powi(2))) as AxisMass,
            Arc::new(|_: f64| (1.0, 0.0)) as AxisMass,
        ]);
        let a = el1_acceleration(&spec, grad, &state(&[1.0, 0.0], &[1.0, 0.0])).unwrap();
        assert_vec(&a, &[-1.5, 0.0], 1e-15);

        // at rest only -∂V/m remains
        let a = el1_acceleration(&spec, grad, &state(&[1.0, 0.5], &[0.0, 0.0])).unwrap();
        assert_vec(&a, &[-2.0, -0.5], 1e-15);
    }

    #[test]
    fn el1_decouples() {
        let spec = PerAxisMassSpec::from_profile(&ml(0.8, Branch::Plus), 3);
        let grad = |x: &[f64]| x.iter().map(|c| 2.0 * c).collect::<Vec<_>>();
        let base = el1_acceleration(&spec, grad, &state(&[0.3, -0.4, 0.5], &[1.0, 0.2, -0.7])).unwrap();
        let moved = el1_acceleration(&spec, grad, &state(&[0.3, 1.4, -2.5], &[1.0, -3.0, 0.1])).unwrap();
        assert_eq!(base[0], moved[0]);
    }

    #[test]
    fn model_el1_matches_el2_in_one_dimension() {
        let model = OscillatorModel::type_a(ml(0.6, Branch::Minus), 1, 1.2).unwrap();
        let s = state(&[0.7], &[-0.9]);
        let a1 = acceleration(&model, EomForm::El1, &s).unwrap();
        let a2 = acceleration(&model, EomForm::El2Direct, &s).unwrap();
        assert!((a1[0] - a2[0]).abs() <= 1e-14 * a2[0].abs().max(1.0));
    }
}
