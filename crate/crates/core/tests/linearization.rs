//! Closed forms, the nonlocal map and re-scaled time against independent oracles:
//! forward-mode dual numbers for the space-scale factor, the analytic `τ(t)` of the
//! Mathews-Lakshmanan orbit, and root finding for periods.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Div, Mul, Sub};

use pdm_core::closed_form::{admissible_times, orbit_acceleration};
use pdm_core::dynamics::total_energy;
use pdm_core::profiles::{space_scale_g, time_scale_f};
use pdm_core::transforms::{
    accumulate_tau, cosine_fit, map_point, sho_residual, verify_f_consistency, ReferenceTrajectory,
};
use pdm_core::{
    build_orbit, evaluate_orbit, Branch, ClosedFormOrbit, Error, OrbitFamily, OscillatorModel, PdmProfile, Sample,
    Trajectory,
};

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn var(v: f64) -> Self {
        Dual { v, d: 1.0 }
    }
    fn cst(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Dual { v: s, d: self.d / (2.0 * s) }
    }
    fn powf(self, e: f64) -> Self {
        Dual { v: self.v.powf(e), d: e * self.v.powf(e - 1.0) * self.d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}
impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}
impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}
impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}

fn dual_mass(profile: &PdmProfile, rho: Dual) -> Dual {
    match *profile {
        PdmProfile::MathewsLakshmanan { lambda, branch } | PdmProfile::ShiftedMl { lambda, branch, .. } => {
            let s = if branch == Branch::Plus { 1.0 } else { -1.0 };
            Dual::cst(1.0) / (Dual::cst(1.0) + Dual::cst(s * lambda) * rho * rho)
        }
        PdmProfile::PowerLaw { k, upsilon } => Dual::cst(k) * rho.powf(2.0 * upsilon),
    }
}

/// `(d|q|/dρ)²` along a ray, with `|q| = √m ρ` (types A, C) or `√m |ζ|` (type B).
fn g_by_differentiation(model: &OscillatorModel, rho: f64) -> f64 {
    let r = Dual::var(rho);
    let root = dual_mass(&model.profile, r).sqrt();
    let q = match model.zeta.is_empty() {
        true => root * r,
        false => root * Dual::cst(model.zeta.iter().map(|z| z * z).sum::<f64>().sqrt()),
    };
    q.d * q.d
}

#[test]
fn space_scale_matches_differentiated_map() {
    let models = [
        OscillatorModel::type_a(PdmProfile::MathewsLakshmanan { lambda: 0.7, branch: Branch::Plus }, 2, 1.0).unwrap(),
        OscillatorModel::type_a(PdmProfile::MathewsLakshmanan { lambda: 0.7, branch: Branch::Minus }, 2, 1.0).unwrap(),
        OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.3, upsilon: 1.5 }, 2, 1.0).unwrap(),
        OscillatorModel::type_a(PdmProfile::PowerLaw { k: 0.4, upsilon: -0.5 }, 2, 1.0).unwrap(),
        OscillatorModel::type_b(
            PdmProfile::MathewsLakshmanan { lambda: 2.0, branch: Branch::Minus },
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap(),
        OscillatorModel::type_b(PdmProfile::PowerLaw { k: 1.0, upsilon: -1.0 }, vec![0.0, 2.0], 1.0).unwrap(),
        OscillatorModel::type_c(
            PdmProfile::ShiftedMl { lambda: 0.9, branch: Branch::Minus, shift: vec![0.25, -0.5] },
            1.0,
        )
        .unwrap(),
    ];
    for model in &models {
        for k in 1..=60 {
            let rho = 0.6 * k as f64 / 60.0;
            let dir = [0.6, 0.8];
            let p: Vec<f64> = dir.iter().map(|d| d * rho).collect();
            let x: Vec<f64> = match &model.profile {
                PdmProfile::ShiftedMl { shift, .. } => p.iter().zip(shift).map(|(a, b)| a - b).collect(),
                _ => p,
            };
            let g = space_scale_g(model, &x).unwrap();
            let expected = g_by_differentiation(model, rho);
            assert!(
                (g - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "{:?} at {rho}: {g} vs {expected}",
                model.profile
            );
        }
    }
}

fn ml1(lambda: f64, branch: Branch, amps: &[f64]) -> (OscillatorModel, ClosedFormOrbit) {
    let model = OscillatorModel::type_a(PdmProfile::MathewsLakshmanan { lambda, branch }, amps.len(), 1.0).unwrap();
    let orbit = build_orbit(&model, amps, 0.2).unwrap();
    (model, orbit)
}

/// `ω₀τ = atan2(sin θ, √(1+a) cos θ)`, unwrapped, for `a = ±λΣB²`.
fn analytic_tau(orbit: &ClosedFormOrbit, a: f64, omega0: f64, times: &[f64]) -> Vec<f64> {
    let phase_at = |t: f64| {
        let th = orbit.omega * t + orbit.phase;
        th.sin().atan2((1.0 + a).sqrt() * th.cos())
    };
    let start = phase_at(times[0]);
    let mut out = Vec::with_capacity(times.len());
    let mut prev = start;
    let mut acc = 0.0;
    for &t in times {
        let ph = phase_at(t);
        let mut d = ph - prev;
        while d < -PI {
            d += TAU;
        }
        while d > PI {
            d -= TAU;
        }
        acc += d;
        prev = ph;
        out.push(acc / omega0);
    }
    out
}

fn sampled(model: &OscillatorModel, orbit: &ClosedFormOrbit, times: &[f64]) -> Trajectory {
    let mut traj = Trajectory::new(model.clone());
    for &t in times {
        let state = evaluate_orbit(orbit, t).unwrap();
        let energy = total_energy(model, &state).unwrap();
        traj.samples.push(Sample { state, tau: 0.0, energy });
    }
    traj
}

fn reference(model: &OscillatorModel, traj: &Trajectory, taus: &[f64]) -> ReferenceTrajectory {
    let mut out = ReferenceTrajectory::default();
    for (s, tau) in traj.samples.iter().zip(taus) {
        let (q, qt) = map_point(model, &s.state).unwrap();
        out.tau.push(*tau);
        out.q.push(q);
        out.qtilde.push(qt);
    }
    out
}

#[test]
fn ml_type_one_linearizes_exactly() {
    for (lambda, branch) in [(1.0, Branch::Plus), (0.6, Branch::Minus)] {
        let amps = [1.0, 0.5, 0.25];
        let (model, orbit) = ml1(lambda, branch, &amps);
        let s: f64 = amps.iter().map(|b| b * b).sum();
        let a = branch.sign() * lambda * s;
        let times: Vec<f64> = (0..=6000).map(|k| k as f64 * 5.0 * orbit.period() / 6000.0).collect();
        let exact = analytic_tau(&orbit, a, model.omega0, &times);
        let traj = sampled(&model, &orbit, &times);
        let quad = accumulate_tau(&model, &traj).unwrap();
        for (u, w) in quad.iter().zip(&exact) {
            assert!((u - w).abs() < 1e-9, "{u} vs {w}");
        }

        // q(τ) = (B/√(1+a)) cos(ω₀τ + ψ₀)
        let psi0 = orbit.phase.sin().atan2((1.0 + a).sqrt() * orbit.phase.cos());
        let rf = reference(&model, &traj, &exact);
        for (q, tau) in rf.q.iter().zip(&rf.tau) {
            for (qi, b) in q.iter().zip(&amps) {
                let expected = b / (1.0 + a).sqrt() * (model.omega0 * tau + psi0).cos();
                assert!((qi - expected).abs() < 1e-12, "{qi} vs {expected}");
            }
        }
        let report = sho_residual(&rf, model.omega0, 1e-4).unwrap();
        assert!(report.passed && report.rms_residual <= 1e-4, "{report:?}");
        let fit = cosine_fit(&rf).unwrap();
        assert!((fit.omega / model.omega0 - 1.0).abs() < 1e-9, "{fit:?}");
        assert!((fit.amplitudes[0] - 1.0 / (1.0 + a).sqrt()).abs() < 1e-9);
        assert!(fit.rms_error < 1e-10);
    }
}

#[test]
fn power_law_time_scale_is_constant() {
    let model = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon: 2.0 }, 2, 1.0).unwrap();
    let orbit = build_orbit(&model, &[0.6, 0.8], 0.0).unwrap();
    let times = admissible_times(&orbit, 500);
    let traj = sampled(&model, &orbit, &times);
    let taus = accumulate_tau(&model, &traj).unwrap();
    for (tau, t) in taus.iter().zip(&times) {
        assert!((tau - 3.0 * (t - times[0])).abs() < 1e-12);
    }
    // the mapped orbit is a pure cosine of frequency ω₀ in τ
    let rf = reference(&model, &traj, &taus);
    let report = sho_residual(&rf, 1.0, 1e-4).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(time_scale_f(&model, &[0.3, 0.1]).unwrap() == 3.0);
}

#[test]
fn shifted_recipe_linearizes() {
    let model = OscillatorModel::type_c(
        PdmProfile::ShiftedMl { lambda: 0.5, branch: Branch::Plus, shift: vec![1.0, -0.5] },
        1.3,
    )
    .unwrap();
    let orbit = build_orbit(&model, &[0.8, 0.6], 0.0).unwrap();
    let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 4.0 * orbit.period() / 4000.0).collect();
    let traj = sampled(&model, &orbit, &times);
    let taus = accumulate_tau(&model, &traj).unwrap();
    let exact = analytic_tau(&orbit, 0.5, model.omega0, &times);
    for (u, w) in taus.iter().zip(&exact) {
        assert!((u - w).abs() < 1e-9);
    }
    let rf = reference(&model, &traj, &taus);
    assert!(sho_residual(&rf, model.omega0, 1e-4).unwrap().passed);
    let fit = cosine_fit(&rf).unwrap();
    assert!((fit.omega / model.omega0 - 1.0).abs() < 1e-9, "{fit:?}");
}

#[test]
fn type_b_half_orbit_linearizes() {
    // λ|ζ|² = 1 on the minus branch, x along ζ where cos θ > 0
    let lambda: f64 = 2.0;
    let zeta = vec![0.6 / lambda.sqrt(), 0.8 / lambda.sqrt()];
    let model =
        OscillatorModel::type_b(PdmProfile::MathewsLakshmanan { lambda, branch: Branch::Minus }, zeta, 1.0).unwrap();
    let orbit = build_orbit(&model, &[0.3, 0.4], 0.0).unwrap();
    let edge = 0.2_f64.acos();
    let times: Vec<f64> = (0..=2000).map(|k| (-edge + 2.0 * edge * k as f64 / 2000.0) / orbit.omega).collect();
    let traj = sampled(&model, &orbit, &times);
    let taus = accumulate_tau(&model, &traj).unwrap();
    let rf = reference(&model, &traj, &taus);
    let report = sho_residual(&rf, model.omega0, 1e-5).unwrap();
    assert!(report.passed, "{report:?}");
    assert!(verify_f_consistency(&model, &traj, 1e-5).unwrap().passed);

    // the other half of the orbit points against ζ
    let back = sampled(&model, &orbit, &[PI / orbit.omega]);
    assert!(matches!(map_point(&model, &back.samples[0].state), Err(Error::Validity(_))));
}

#[test]
fn f_consistency_examples() {
    let (model, orbit) = ml1(0.0, Branch::Plus, &[1.0, -0.3]);
    let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.01).collect();
    let r = verify_f_consistency(&model, &sampled(&model, &orbit, &times), 1e-3).unwrap();
    assert!(r.passed && r.max_residual < 1e-4);

    let (model, orbit) = ml1(1.0, Branch::Plus, &[1.0, 0.5, 0.25]);
    let times: Vec<f64> = (0..=2000).map(|k| k as f64 * orbit.period() / 2000.0).collect();
    let r = verify_f_consistency(&model, &sampled(&model, &orbit, &times), 1e-5).unwrap();
    assert!(r.passed, "{r:?}");
}

fn crossings(orbit: &ClosedFormOrbit, axis: usize, t_end: f64) -> Vec<f64> {
    let value = |t: f64| evaluate_orbit(orbit, t).unwrap().x[axis] + orbit.shift[axis];
    let steps = 4000;
    let mut out = Vec::new();
    for k in 0..steps {
        let (mut a, mut b) = (t_end * k as f64 / steps as f64, t_end * (k + 1) as f64 / steps as f64);
        let (fa, fb) = (value(a), value(b));
        if fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if value(mid).signum() == fa.signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[test]
fn closed_form_periods_match_frequency_laws() {
    let cases = [
        (ml1(1.0, Branch::Plus, &[1.0, 0.0]).0, 0.5_f64.sqrt()),
        (ml1(0.5, Branch::Plus, &[1.0]).0, (2.0_f64 / 3.0).sqrt()),
        (ml1(0.0, Branch::Plus, &[1.0]).0, 1.0),
    ];
    for (model, omega) in cases {
        let amps: Vec<f64> = (0..model.dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let orbit = build_orbit(&model, &amps, 0.1).unwrap();
        assert!((orbit.omega - omega).abs() < 1e-15);
        let c = crossings(&orbit, 0, 12.0 * orbit.period());
        let period = 2.0 * (c[c.len() - 1] - c[0]) / (c.len() - 1) as f64;
        assert!((period / (TAU / omega) - 1.0).abs() < 1e-10, "{period}");
    }
    for (upsilon, ratio) in [(1.0, 2.0), (2.0, 3.0)] {
        let model = OscillatorModel::type_a(PdmProfile::PowerLaw { k: 1.0, upsilon }, 1, 1.0).unwrap();
        let orbit = build_orbit(&model, &[1.0], 0.0).unwrap();
        assert_eq!(orbit.omega, ratio);
        // the branch closes after exactly one period
        let a = evaluate_orbit(&orbit, 0.1).unwrap();
        let b = evaluate_orbit(&orbit, 0.1 + orbit.period()).unwrap();
        assert!((a.x[0] - b.x[0]).abs() < 1e-12 && (a.v[0] - b.v[0]).abs() < 1e-12);
        assert!(matches!(evaluate_orbit(&orbit, 0.5 * orbit.period()), Err(Error::BranchDomain(_))));
    }
}

fn orbit_models() -> Vec<(OscillatorModel, Vec<f64>)> {
    vec![
        (ml1(0.8, Branch::Plus, &[1.0]).0.with_m0(2.0).unwrap(), vec![0.6]),
        (ml1(0.8, Branch::Minus, &[0.5, 0.5]).0, vec![0.6, -0.5]),
        (OscillatorModel::type_a(PdmProfile::PowerLaw { k: 0.5, upsilon: 1.5 }, 2, 1.2).unwrap(), vec![1.0, 0.4]),
        (OscillatorModel::type_a(PdmProfile::PowerLaw { k: 2.0, upsilon: -0.5 }, 1, 0.9).unwrap(), vec![1.3]),
        (
            OscillatorModel::type_b(
                PdmProfile::MathewsLakshmanan { lambda: 4.0, branch: Branch::Minus },
                vec![0.0, 0.5],
                1.0,
            )
            .unwrap(),
            vec![0.2, 0.3],
        ),
        (
            OscillatorModel::type_b(PdmProfile::PowerLaw { k: 0.5, upsilon: -1.0 }, vec![2.0_f64.sqrt()], 1.4)
                .unwrap()
                .with_imaginary_zeta()
                .unwrap(),
            vec![0.9],
        ),
        (
            OscillatorModel::type_c(
                PdmProfile::ShiftedMl { lambda: 0.3, branch: Branch::Minus, shift: vec![0.5, 0.5, 0.5] },
                1.0,
            )
            .unwrap(),
            vec![1.0, 0.5, 0.25],
        ),
    ]
}

#[test]
fn energy_is_constant_on_orbits_and_equals_the_turning_point_potential() {
    for (model, amps) in orbit_models() {
        let orbit = build_orbit(&model, &amps, 0.0).unwrap();
        // θ = 0 is a turning point
        let turning = evaluate_orbit(&orbit, 0.0).unwrap();
        assert!(turning.v.iter().all(|v| v.abs() < 1e-15));
        let e0 = total_energy(&model, &turning).unwrap();
        assert!(
            (e0 - orbit.energy).abs() <= 1e-12 * orbit.energy.abs().max(1.0),
            "{:?}: {e0} vs {}",
            orbit.family,
            orbit.energy
        );
        for t in admissible_times(&orbit, 300) {
            let e = total_energy(&model, &evaluate_orbit(&orbit, t).unwrap()).unwrap();
            assert!((e - orbit.energy).abs() <= 1e-12 * orbit.energy.abs().max(1.0));
        }
    }
}

#[test]
fn type_two_energy_is_shifted_by_a_constant() {
    let lambda = 4.0;
    let model_b =
        OscillatorModel::type_b(PdmProfile::MathewsLakshmanan { lambda, branch: Branch::Minus }, vec![0.0, 0.5], 1.5)
            .unwrap();
    let model_a =
        OscillatorModel::type_a(PdmProfile::MathewsLakshmanan { lambda, branch: Branch::Minus }, 2, 1.5).unwrap();
    let ob = build_orbit(&model_b, &[0.1, 0.3], 0.0).unwrap();
    let oa = build_orbit(&model_a, &[0.1, 0.3], 0.0).unwrap();
    assert_eq!(ob.family, OrbitFamily::Ml2);
    assert_eq!(ob.omega, oa.omega);
    assert!((ob.energy - oa.energy - 0.5 * 1.5 * 1.5 / lambda).abs() < 1e-15);
}

#[test]
fn analytic_acceleration_matches_differenced_velocity() {
    for (model, amps) in orbit_models() {
        let orbit = build_orbit(&model, &amps, 0.3).unwrap();
        let h = 1e-5;
        for t in admissible_times(&orbit, 50).into_iter().skip(1).take(48) {
            let a = orbit_acceleration(&orbit, t).unwrap();
            let (p, m) = (evaluate_orbit(&orbit, t + h).unwrap(), evaluate_orbit(&orbit, t - h).unwrap());
            let v = evaluate_orbit(&orbit, t).unwrap().v;
            for (i, (&ai, &vi)) in a.iter().zip(&v).enumerate() {
                let fd = (p.v[i] - m.v[i]) / (2.0 * h);
                assert!((fd - ai).abs() < 1e-5 * ai.abs().max(1.0), "{:?}", orbit.family);
                let fdx = (p.x[i] - m.x[i]) / (2.0 * h);
                assert!((fdx - vi).abs() < 1e-6 * vi.abs().max(1.0));
            }
        }
    }
}
