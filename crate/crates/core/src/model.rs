//! Shared domain types and small vector helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// States with a collinearity defect at or below this are treated as collinear.
pub const COLLINEAR_TOL: f64 = 1e-12;

/// Sign in the Mathews-Lakshmanan denominator `1 ± λ r²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Mass-deformation family. The mass multiplier is a function of a single radius:
/// `|x|` for the unshifted kinds and `y = |x + ξ|` for the shifted one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PdmProfile {
    /// `m = 1 / (1 ± λ r²)`
    MathewsLakshmanan { lambda: f64, branch: Branch },
    /// `m = k r^(2υ)`
    PowerLaw { k: f64, upsilon: f64 },
    /// `m = 1 / (1 ± λ y²)`, `y = |x + ξ|`
    ShiftedMl { lambda: f64, branch: Branch, shift: Vec<f64> },
}

impl PdmProfile {
    pub fn shift(&self) -> Option<&[f64]> {
        match self {
            PdmProfile::ShiftedMl { shift, .. } => Some(shift),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PdmProfile::MathewsLakshmanan { .. } => "mathews_lakshmanan",
            PdmProfile::PowerLaw { .. } => "power_law",
            PdmProfile::ShiftedMl { .. } => "shifted_ml",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PdmProfile::MathewsLakshmanan { lambda, .. } | PdmProfile::ShiftedMl { lambda, .. } => {
                // λ = 0 is admitted as the harmonic-oscillator limit.
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "Mathews-Lakshmanan profiles need a finite lambda >= 0, got {lambda}"
                    )));
                }
            }
            PdmProfile::PowerLaw { k, upsilon } => {
                if !(k.is_finite() && *k != 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "power-law prefactor must be finite and nonzero, got {k}"
                    )));
                }
                if !upsilon.is_finite() {
                    return Err(Error::InvalidModel(format!("upsilon must be finite, got {upsilon}")));
                }
            }
        }
        if let Some(shift) = self.shift() {
            if shift.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidModel("shift vector must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Substitution used to build the reference coordinates `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `q = √m · r`
    TypeA,
    /// `q = √m · ζ` for a constant vector `ζ`
    TypeB,
    /// `q = √m(y) · y`, `y = x + ξ`
    TypeC,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorModel {
    pub profile: PdmProfile,
    pub family: Family,
    pub dim: usize,
    /// Reference angular frequency ω₀.
    pub omega0: f64,
    /// Constant mass m₀; scales energies and potentials, not accelerations.
    pub m0: f64,
    /// Constant vector of the `q = √m ζ` substitution. Empty unless the family is `TypeB`.
    pub zeta: Vec<f64>,
    /// Treat `zeta` as `i·zeta`, so that `ζ² = -|zeta|²`. This is the formal
    /// bookkeeping behind the power-law type-II orbits, where `λ = -1/ζ²` with
    /// `λ > 0` is needed for real oscillation.
    pub imaginary_zeta: bool,
}

impl OscillatorModel {
    pub fn type_a(profile: PdmProfile, dim: usize, omega0: f64) -> Result<Self> {
        let model = OscillatorModel {
            profile,
            family: Family::TypeA,
            dim,
            omega0,
            m0: 1.0,
            zeta: Vec::new(),
            imaginary_zeta: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn type_b(profile: PdmProfile, zeta: Vec<f64>, omega0: f64) -> Result<Self> {
        let model = OscillatorModel {
            profile,
            family: Family::TypeB,
            dim: zeta.len(),
            omega0,
            m0: 1.0,
            zeta,
            imaginary_zeta: false,
        };
        model.validate()?;
        Ok(model)
    }

    /// Shifted model; the dimension is taken from the profile's shift vector.
    pub fn type_c(profile: PdmProfile, omega0: f64) -> Result<Self> {
        let dim = profile.shift().map_or(0, <[f64]>::len);
        let model = OscillatorModel {
            profile,
            family: Family::TypeC,
            dim,
            omega0,
            m0: 1.0,
            zeta: Vec::new(),
            imaginary_zeta: false,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_m0(mut self, m0: f64) -> Result<Self> {
        self.m0 = m0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_imaginary_zeta(mut self) -> Result<Self> {
        self.imaginary_zeta = true;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if !(self.omega0.is_finite() && self.omega0 > 0.0) {
            return Err(Error::InvalidModel(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if !(self.m0.is_finite() && self.m0 > 0.0) {
            return Err(Error::InvalidModel(format!("m0 must be > 0, got {}", self.m0)));
        }
        self.profile.validate()?;
        match (self.family, &self.profile) {
            (Family::TypeA | Family::TypeB, PdmProfile::ShiftedMl { .. }) => {
                return Err(Error::InvalidModel(
                    "the shifted profile belongs to the shifted (type C) substitution".into(),
                ))
            }
            (Family::TypeC, PdmProfile::ShiftedMl { shift, .. }) => {
                if shift.len() != self.dim {
                    return Err(Error::InvalidModel(format!(
                        "shift has dimension {}, model has {}",
                        shift.len(),
                        self.dim
                    )));
                }
            }
            (Family::TypeC, _) => {
                return Err(Error::InvalidModel("the shifted substitution needs a shifted_ml profile".into()))
            }
            _ => {}
        }
        if self.family == Family::TypeB {
            if self.zeta.len() != self.dim {
                return Err(Error::InvalidModel(format!(
                    "zeta has dimension {}, model has {}",
                    self.zeta.len(),
                    self.dim
                )));
            }
            if self.zeta.iter().any(|z| !z.is_finite()) || norm_sq(&self.zeta) == 0.0 {
                return Err(Error::InvalidModel("zeta must be a finite nonzero vector".into()));
            }
        } else if self.imaginary_zeta {
            return Err(Error::InvalidModel("imaginary_zeta only applies to type B".into()));
        }
        Ok(())
    }

    pub fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim, found: v.len() })
        }
    }

    /// Vector whose norm is the mass argument: `x`, or `x + ξ` for the shifted profile.
    pub fn mass_center(&self, x: &[f64]) -> Vec<f64> {
        match self.profile.shift() {
            Some(shift) => x.iter().zip(shift).map(|(a, b)| a + b).collect(),
            None => x.to_vec(),
        }
    }

    /// Euclidean norm of `zeta`.
    pub fn zeta_norm(&self) -> f64 {
        norm_sq(&self.zeta).sqrt()
    }

    /// `ζ²` with the sign flip applied for an imaginary `ζ`.
    pub fn zeta_sq(&self) -> f64 {
        let s = norm_sq(&self.zeta);
        if self.imaginary_zeta {
            -s
        } else {
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhaseState {
    pub fn new(t: f64, x: Vec<f64>, v: Vec<f64>) -> Self {
        PhaseState { t, x, v }
    }

    pub fn at_rest(t: f64, x: Vec<f64>) -> Self {
        let v = vec![0.0; x.len()];
        PhaseState { t, x, v }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: PhaseState,
    /// Re-scaled time, `dτ = f dt`.
    pub tau: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: OscillatorModel,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn new(model: OscillatorModel) -> Self {
        Trajectory { model, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }

    pub fn states(&self) -> impl Iterator<Item = &PhaseState> {
        self.samples.iter().map(|s| &s.state)
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Largest relative deviation of the recorded energy from its first value.
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else {
            return 0.0;
        };
        let e0 = first.energy;
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.samples.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// Result of one named numerical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    #[serde(rename = "check")]
    pub check_name: String,
    pub max_residual: f64,
    pub rms_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub notes: String,
}

impl VerificationReport {
    /// Summarizes absolute residuals; `passed` holds iff the maximum is within `tolerance`.
    /// A NaN residual fails the check.
    pub fn from_residuals<I>(check_name: impl Into<String>, residuals: I, tolerance: f64) -> Self
    where
        I: IntoIterator<Item = f64>,
    {
        let mut max = 0.0_f64;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        let mut saw_nan = false;
        for r in residuals {
            if r.is_nan() {
                saw_nan = true;
                continue;
            }
            let a = r.abs();
            max = max.max(a);
            sum_sq += a * a;
            count += 1;
        }
        let max_residual = if saw_nan { f64::NAN } else { max };
        let rms_residual = if count == 0 { 0.0 } else { (sum_sq / count as f64).sqrt() };
        VerificationReport {
            check_name: check_name.into(),
            max_residual,
            rms_residual,
            tolerance,
            passed: max_residual <= tolerance,
            notes: String::new(),
        }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    /// Re-evaluates `passed` against a different tolerance.
    pub fn retolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.passed = self.max_residual <= tolerance;
        self
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn radius(x: &[f64]) -> f64 {
    norm_sq(x).sqrt()
}

/// `1 - (x·v)² / ((x·x)(v·v))`, i.e. `sin²` of the angle between the vectors.
///
/// Evaluated through the Lagrange identity `|x∧v|² = |x|²|v|² - (x·v)²` so that
/// nearly parallel inputs do not lose precision. Returns 0 when either vector is zero.
pub fn collinearity_defect(x: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), v.len());
    let xx = norm_sq(x);
    let vv = norm_sq(v);
    if xx == 0.0 || vv == 0.0 {
        return 0.0;
    }
    let mut wedge = 0.0;
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let w = x[i] * v[j] - x[j] * v[i];
            wedge += w * w;
        }
    }
    (wedge / xx / vv).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn radius_examples() {
        assert_eq!(radius(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(radius(&[3.0, 4.0]), 5.0);
        assert_eq!(radius(&[1.0, 1.0, 1.0, 1.0]), 2.0);
    }

    #[test]
    fn collinearity_examples() {
        assert_eq!(collinearity_defect(&[1.0, 2.0], &[2.0, 4.0]), 0.0);
        assert_eq!(collinearity_defect(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        // sin²(45°)
        assert!((collinearity_defect(&[1.0, 0.0], &[1.0, 1.0]) - 0.5).abs() < 1e-15);
        assert_eq!(collinearity_defect(&[0.0, 0.0], &[1.0, 3.0]), 0.0);
    }

    #[test]
    fn model_invariants() {
        let ml = PdmProfile::MathewsLakshmanan { lambda: 0.5, branch: Branch::Plus };
        assert!(OscillatorModel::type_a(ml.clone(), 0, 1.0).is_err());
        assert!(OscillatorModel::type_a(ml.clone(), 2, 0.0).is_err());
        assert!(OscillatorModel::type_a(ml.clone(), 2, 1.0).unwrap().with_m0(-1.0).is_err());
        assert!(OscillatorModel::type_b(ml.clone(), vec![0.0, 0.0], 1.0).is_err());
        assert!(OscillatorModel::type_c(ml, 1.0).is_err());
        let neg = PdmProfile::MathewsLakshmanan { lambda: -0.1, branch: Branch::Plus };
        assert!(OscillatorModel::type_a(neg, 1, 1.0).is_err());
        let pl = PdmProfile::PowerLaw { k: 0.0, upsilon: 1.0 };
        assert!(OscillatorModel::type_a(pl, 1, 1.0).is_err());
        let shifted = PdmProfile::ShiftedMl { lambda: 1.0, branch: Branch::Plus, shift: vec![1.0, 0.0] };
        let m = OscillatorModel::type_c(shifted.clone(), 1.0).unwrap();
        assert_eq!(m.dim, 2);
        assert_eq!(m.mass_center(&[0.5, 2.0]), vec![1.5, 2.0]);
        assert!(OscillatorModel::type_a(shifted, 2, 1.0).is_err());
    }

    #[test]
    fn report_pass_rule() {
        let r = VerificationReport::from_residuals("x", [1e-3, -2e-3], 2e-3);
        assert!(r.passed);
        assert_eq!(r.max_residual, 2e-3);
        let r = r.retolerance(1e-3);
        assert!(!r.passed);
        let r = VerificationReport::from_residuals("nan", [0.0, f64::NAN], 1.0);
        assert!(!r.passed);
    }

    fn scaled() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (1usize..6)
            .prop_flat_map(|n| (prop::collection::vec(-10.0..10.0f64, n), -5.0..5.0f64))
            .prop_filter("nonzero", |(a, s)| norm_sq(a) > 1e-6 && s.abs() > 1e-3)
    }

    proptest! {
        #[test]
        fn parallel_identity((a, s) in scaled()) {
            // (A·B)A - (A·A)B = 0 for B = sA
            let b: Vec<f64> = a.iter().map(|x| s * x).collect();
            let ab = dot(&a, &b);
            let aa = dot(&a, &a);
            for (ai, bi) in a.iter().zip(&b) {
                let lhs = ab * ai - aa * bi;
                prop_assert!(lhs.abs() <= 1e-13 * (ab.abs() * ai.abs()).max(1.0));
            }
            prop_assert!(collinearity_defect(&a, &b) <= COLLINEAR_TOL);
        }

        #[test]
        fn defect_is_scale_invariant(
            x in prop::collection::vec(-10.0..10.0f64, 3),
            v in prop::collection::vec(-10.0..10.0f64, 3),
            a in prop_oneof![-4.0..-0.1f64, 0.1..4.0f64],
            b in prop_oneof![-4.0..-0.1f64, 0.1..4.0f64],
        ) {
            prop_assume!(norm_sq(&x) > 1e-6 && norm_sq(&v) > 1e-6);
            let d = collinearity_defect(&x, &v);
            let xs: Vec<f64> = x.iter().map(|c| a * c).collect();
            let vs: Vec<f64> = v.iter().map(|c| b * c).collect();
            let ds = collinearity_defect(&xs, &vs);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((d - ds).abs() <= 1e-12);
        }
    }
}
