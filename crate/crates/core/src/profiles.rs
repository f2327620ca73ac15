//! Mass multiplier, time- and space-scale factors and the deformed potential
//! for each (profile, substitution family) pair.
//!
//! The time-scale factor `f` follows from requiring `q̇ = √m f ẋ`:
//!
//! * type A (`q = √m r`): `f = 1 + r ∂ᵣm / 2m`
//! * type B (`q = √m ζ`): `f = ζ ∂ᵣm / 2m`
//! * type C (`q = √m(y) y`): `f = 1 + y ∂ᵧm / 2m`
//!
//! and the space-scale factor is always `g = m f²`.

use crate::error::{Error, Result};
use crate::model::{norm_sq, Family, OscillatorModel, PdmProfile};

/// Slack kept between a Mathews-Lakshmanan minus-branch state and its singular radius.
pub const SINGULAR_RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileEvaluation {
    pub m: f64,
    pub dm_dr: f64,
    pub f: f64,
    pub g: f64,
    pub potential: f64,
}

/// Radial quantities of a mass profile at radius `rho`. Entries may be infinite
/// where the profile is singular but the mass itself is still defined (power law at
/// the origin); callers decide whether that is an error.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Radial {
    pub rho: f64,
    pub m: f64,
    /// ∂m/∂ρ
    pub dm: f64,
    /// (∂m/∂ρ)/ρ, finite at the origin for the Mathews-Lakshmanan kinds
    pub dm_over_rho: f64,
    /// (∂m/∂ρ)/m
    pub dm_over_m: f64,
    /// ρ (∂m/∂ρ)/m
    pub log_slope: f64,
}

pub(crate) fn radial(profile: &PdmProfile, rho: f64) -> Result<Radial> {
    match *profile {
        PdmProfile::MathewsLakshmanan { lambda, branch } | PdmProfile::ShiftedMl { lambda, branch, .. } => {
            let s = branch.sign();
            let rho2 = rho * rho;
            if s < 0.0 && lambda > 0.0 && rho2 >= 1.0 / lambda - SINGULAR_RADIUS_SLACK {
                return Err(Error::Domain(format!("r² = {rho2} reaches the singular radius 1/λ = {}", 1.0 / lambda)));
            }
            let d = 1.0 + s * lambda * rho2;
            if d <= 0.0 {
                return Err(Error::Domain(format!("1 ± λr² = {d} is not positive")));
            }
            Ok(Radial {
                rho,
                m: 1.0 / d,
                dm: -2.0 * s * lambda * rho / (d * d),
                dm_over_rho: -2.0 * s * lambda / (d * d),
                dm_over_m: -2.0 * s * lambda * rho / d,
                log_slope: -2.0 * s * lambda * rho2 / d,
            })
        }
        PdmProfile::PowerLaw { k, upsilon } => {
            if rho == 0.0 && upsilon < 0.0 {
                return Err(Error::Domain(format!("power-law mass with upsilon = {upsilon} diverges at the origin")));
            }
            let m = k * rho.powf(2.0 * upsilon);
            let (dm, dm_over_rho, dm_over_m) = if upsilon == 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                (
                    2.0 * upsilon * k * rho.powf(2.0 * upsilon - 1.0),
                    2.0 * upsilon * k * rho.powf(2.0 * upsilon - 2.0),
                    2.0 * upsilon / rho,
                )
            };
            Ok(Radial { rho, m, dm, dm_over_rho, dm_over_m, log_slope: 2.0 * upsilon })
        }
    }
}

/// Mass argument vector (`x` or `x + ξ`) for a bare profile.
fn profile_center(profile: &PdmProfile, x: &[f64]) -> Result<Vec<f64>> {
    match profile.shift() {
        Some(shift) if shift.len() != x.len() => {
            Err(Error::DimensionMismatch { expected: shift.len(), found: x.len() })
        }
        Some(shift) => Ok(x.iter().zip(shift).map(|(a, b)| a + b).collect()),
        None => Ok(x.to_vec()),
    }
}

/// Center vector, its norm and the radial profile data at a model point.
pub(crate) fn radial_at(model: &OscillatorModel, x: &[f64]) -> Result<(Vec<f64>, Radial)> {
    model.check_dim(x)?;
    let p = model.mass_center(x);
    let rad = radial(&model.profile, norm_sq(&p).sqrt())?;
    Ok((p, rad))
}

pub(crate) fn f_from_radial(model: &OscillatorModel, rad: &Radial) -> Result<f64> {
    let f = match model.family {
        Family::TypeA | Family::TypeC => 1.0 + 0.5 * rad.log_slope,
        // For an imaginary ζ this is the real coefficient of i.
        Family::TypeB => model.zeta_norm() * 0.5 * rad.dm_over_m,
    };
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::Domain(format!("time-scale factor undefined at radius {}", rad.rho)))
    }
}

pub(crate) fn potential_from_radial(model: &OscillatorModel, rad: &Radial) -> f64 {
    let w2 = model.omega0 * model.omega0;
    let shape = match model.family {
        Family::TypeA | Family::TypeC => rad.rho * rad.rho,
        Family::TypeB => model.zeta_sq(),
    };
    0.5 * model.m0 * rad.m * w2 * shape
}

/// ∇V written into `out`, given the center vector `p` and radial data.
pub(crate) fn gradient_from_radial(model: &OscillatorModel, p: &[f64], rad: &Radial, out: &mut [f64]) -> Result<()> {
    let w2 = model.omega0 * model.omega0;
    let coeff = match model.family {
        // ∂ᵢ(½ m ρ²) = m f pᵢ
        Family::TypeA | Family::TypeC => model.m0 * w2 * rad.m * (1.0 + 0.5 * rad.log_slope),
        // ∂ᵢ(½ m ζ²) = ½ ζ² (m'/ρ) pᵢ
        Family::TypeB => 0.5 * model.m0 * w2 * model.zeta_sq() * rad.dm_over_rho,
    };
    for (o, pi) in out.iter_mut().zip(p) {
        *o = coeff * pi;
    }
    if out.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("potential gradient undefined at radius {}", rad.rho)))
    }
}

pub fn mass(profile: &PdmProfile, x: &[f64]) -> Result<f64> {
    let p = profile_center(profile, x)?;
    Ok(radial(profile, norm_sq(&p).sqrt())?.m)
}

/// ∂m/∂r (∂m/∂y for the shifted profile).
pub fn mass_radial_derivative(profile: &PdmProfile, x: &[f64]) -> Result<f64> {
    let p = profile_center(profile, x)?;
    let rad = radial(profile, norm_sq(&p).sqrt())?;
    if rad.dm.is_finite() {
        Ok(rad.dm)
    } else {
        Err(Error::Domain(format!("mass derivative diverges at radius {}", rad.rho)))
    }
}

pub fn time_scale_f(model: &OscillatorModel, x: &[f64]) -> Result<f64> {
    let (_, rad) = radial_at(model, x)?;
    f_from_radial(model, &rad)
}

pub fn space_scale_g(model: &OscillatorModel, x: &[f64]) -> Result<f64> {
    let (_, rad) = radial_at(model, x)?;
    let f = f_from_radial(model, &rad)?;
    Ok(rad.m * f * f)
}

pub fn potential(model: &OscillatorModel, x: &[f64]) -> Result<f64> {
    let (_, rad) = radial_at(model, x)?;
    Ok(potential_from_radial(model, &rad))
}

pub fn potential_gradient(model: &OscillatorModel, x: &[f64]) -> Result<Vec<f64>> {
    let (p, rad) = radial_at(model, x)?;
    let mut out = vec![0.0; p.len()];
    gradient_from_radial(model, &p, &rad, &mut out)?;
    Ok(out)
}

pub fn evaluate(model: &OscillatorModel, x: &[f64]) -> Result<ProfileEvaluation> {
    let (_, rad) = radial_at(model, x)?;
    let f = f_from_radial(model, &rad)?;
    Ok(ProfileEvaluation {
        m: rad.m,
        dm_dr: rad.dm,
        f,
        g: rad.m * f * f,
        potential: potential_from_radial(model, &rad),
    })
}
