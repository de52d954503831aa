//! Phase-plane shooting for the steady-state equation u'' = k^2 u - f_beta(u),
//! the method the integral construction is measured against.
//!
//! Written as a first-order system u' = v, v' = k^2 u - f_beta(u), the bump
//! is a homoclinic orbit of the saddle at the origin. Shooting from the
//! threshold crossing (h, k h) rides the unstable manifold, so integrator
//! and rounding errors are amplified like e^{k x}; this module reproduces
//! that degradation on purpose, as the contrast case for the fixed-point
//! refinement, which has no such amplification.
//!
//! The integrator is fixed-step classical RK4. The steep-limit right-hand
//! side is discontinuous across u = h, and the threshold-crossing events are
//! deliberately not located: adaptive control or event location would
//! obscure the instability story this module exists to tell.

use crate::error::{Error, Result};
use crate::firing_rates::FiringRateModel;
use crate::quad;

/// Trajectories are flagged, not aborted, once |u| exceeds this bound.
pub const BLOWUP_BOUND: f64 = 1e3;

/// One point of the phase plane, v = u'.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub u: f64,
    pub v: f64,
}

/// The phase-plane vector field (u', v') = (v, k^2 u - f_beta(u)).
pub fn fhn_field(p: PhasePoint, k: f64, firing: &FiringRateModel) -> PhasePoint {
    PhasePoint {
        u: p.v,
        v: k * k * p.u - firing.eval(p.u),
    }
}

/// First integral v^2/2 - k^2 u^2/2 + F(u), where F is the firing-rate
/// potential integrated from the threshold. Constant along exact orbits away
/// from threshold crossings; the homoclinic orbit sits on the zero level.
pub fn energy(p: PhasePoint, k: f64, firing: &FiringRateModel) -> f64 {
    let h = firing.h;
    let potential = if firing.is_step() {
        (p.u - h).max(0.0)
    } else if p.u >= h {
        quad::composite_gl4(|t| firing.eval(t), h, p.u, 64)
    } else {
        -quad::composite_gl4(|t| firing.eval(t), p.u, h, 64)
    };
    0.5 * p.v * p.v - 0.5 * k * k * p.u * p.u + potential
}

/// A sampled phase-plane orbit.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    /// First sample position where |u| exceeded [`BLOWUP_BOUND`], if any.
    pub blowup_at: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Largest |u(x) - reference(x)| over the sampled points.
    pub fn sup_deviation(&self, reference: impl Fn(f64) -> f64) -> f64 {
        self.xs
            .iter()
            .zip(&self.us)
            .fold(0.0f64, |sup, (&x, &u)| sup.max((u - reference(x)).abs()))
    }

    /// CSV rendering with header `x,u,v`, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,u,v\n");
        for i in 0..self.xs.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.xs[i], self.us[i], self.vs[i]
            ));
        }
        out
    }
}

fn advance(p: PhasePoint, d: PhasePoint, t: f64) -> PhasePoint {
    PhasePoint {
        u: p.u + t * d.u,
        v: p.v + t * d.v,
    }
}

fn rk4_step(p: PhasePoint, k: f64, firing: &FiringRateModel, step: f64) -> PhasePoint {
    let k1 = fhn_field(p, k, firing);
    let k2 = fhn_field(advance(p, k1, 0.5 * step), k, firing);
    let k3 = fhn_field(advance(p, k2, 0.5 * step), k, firing);
    let k4 = fhn_field(advance(p, k3, step), k, firing);
    PhasePoint {
        u: p.u + step / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
        v: p.v + step / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
    }
}

/// Integrate the phase-plane system from the threshold crossing (h, k h)
/// out to |x| = x_max with classical fixed-step RK4.
///
/// The sign of `step` sets the direction: positive steps shoot forward along
/// the unstable manifold (the Fig.-style degradation), negative steps run
/// down the subthreshold tail. A final shortened step lands exactly on
/// x_max when the step does not divide it. Exceeding [`BLOWUP_BOUND`] is
/// recorded in the trajectory and integration continues; the blowup is the
/// observation, not a failure.
pub fn shoot_homoclinic(
    k: f64,
    firing: &FiringRateModel,
    x_max: f64,
    step: f64,
) -> Result<Trajectory> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "decay rate k must be positive and finite, got {k}"
        )));
    }
    let bound = 1.0 / (2.0 * firing.h).sqrt();
    if k >= bound {
        return Err(Error::InvalidParameter(format!(
            "homoclinic orbit needs k < 1/sqrt(2h) = {bound}, got {k}"
        )));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration length x_max must be positive and finite, got {x_max}"
        )));
    }
    if !(step != 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step must be nonzero and finite, got {step}"
        )));
    }

    let direction = step.signum();
    let magnitude = step.abs();
    let mut p = PhasePoint {
        u: firing.h,
        v: k * firing.h,
    };
    let mut trajectory = Trajectory {
        xs: vec![0.0],
        us: vec![p.u],
        vs: vec![p.v],
        blowup_at: None,
    };
    let record = |x: f64, p: PhasePoint, t: &mut Trajectory| {
        t.xs.push(x);
        t.us.push(p.u);
        t.vs.push(p.v);
        if t.blowup_at.is_none() && p.u.abs() > BLOWUP_BOUND {
            t.blowup_at = Some(x);
        }
    };

    let full_steps = (x_max / magnitude + 1e-9).floor() as usize;
    for i in 1..=full_steps {
        p = rk4_step(p, k, firing, direction * magnitude);
        record(direction * magnitude * i as f64, p, &mut trajectory);
    }
    let leftover = x_max - magnitude * full_steps as f64;
    if leftover > 1e-9 * magnitude {
        p = rk4_step(p, k, firing, direction * leftover);
        record(direction * x_max, p, &mut trajectory);
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::firing_rates::{FiringFamily, FiringRateModel};
    use crate::kernels::{KernelFamily, KernelModel};
    use crate::limit_bump;

    const K: f64 = 1.339;
    const H: f64 = 0.2;

    fn step_firing() -> FiringRateModel {
        FiringRateModel::step(H).unwrap()
    }

    fn crossing() -> f64 {
        // closed form for the single steep-limit crossing
        -(1.0 - 2.0 * K * K * H).ln() / (2.0 * K)
    }

    /// The analytic profile shifted so the upward crossing sits at x = 0.
    fn shifted_profile() -> impl Fn(f64) -> f64 {
        let kernel = KernelModel::new(KernelFamily::Exponential { k: K }).unwrap();
        let bump = limit_bump::solve_crossings(&kernel, H, 1, &[0.4]).unwrap();
        let a = bump.crossings[0];
        move |x: f64| bump.eval(x - a)
    }

    #[test]
    fn field_matches_the_phase_plane_equations() {
        let hill = FiringRateModel::new(FiringFamily::Hill { p: 2.0 }, 100.0, H).unwrap();
        let origin = PhasePoint { u: 0.0, v: 0.0 };
        let at_origin = fhn_field(origin, K, &hill);
        assert_eq!(at_origin.u, 0.0);
        assert_eq!(at_origin.v, 0.0);

        // the closed-endpoint convention f(h) = 1 enters the field directly
        let at_threshold = fhn_field(PhasePoint { u: H, v: 0.7 }, K, &step_firing());
        assert_eq!(at_threshold.u, 0.7);
        assert!((at_threshold.v - (K * K * H - 1.0)).abs() <= 1e-15);

        let p = PhasePoint { u: 0.5, v: -0.3 };
        let field = fhn_field(p, K, &hill);
        assert_eq!(field.u, -0.3);
        assert!((field.v - (K * K * 0.5 - hill.eval(0.5))).abs() <= 1e-15);
    }

    #[test]
    fn energy_is_conserved_inside_the_superthreshold_arc() {
        // the back-crossing sits at 2a = 0.943, so [0, 0.8] stays strictly
        // superthreshold and the steep-limit field is smooth along the arc
        let firing = step_firing();
        let trajectory = shoot_homoclinic(K, &firing, 0.8, 1e-3).unwrap();
        for i in 0..trajectory.len() {
            let p = PhasePoint {
                u: trajectory.us[i],
                v: trajectory.vs[i],
            };
            let e = energy(p, K, &firing);
            assert!(
                e.abs() <= 1e-12,
                "homoclinic energy level violated at x = {}: {e}",
                trajectory.xs[i]
            );
        }

        // finite-beta potential agrees with the step potential well above h
        let hill = FiringRateModel::new(FiringFamily::Hill { p: 2.0 }, 4000.0, H).unwrap();
        let p = PhasePoint { u: 0.8, v: 0.1 };
        let gap = (energy(p, K, &hill) - energy(p, K, &firing)).abs();
        assert!(gap <= 1e-3, "potential mismatch {gap}");
    }

    #[test]
    fn forward_shot_tracks_the_profile_then_departs() {
        let profile = shifted_profile();
        let trajectory = shoot_homoclinic(K, &step_firing(), 9.0, 1e-3).unwrap();

        let early: f64 = trajectory
            .xs
            .iter()
            .zip(&trajectory.us)
            .filter(|(&x, _)| x <= 2.0)
            .fold(0.0f64, |sup, (&x, &u)| sup.max((u - profile(x)).abs()));
        assert!(early <= 1e-2, "early deviation {early}");

        let full = trajectory.sup_deviation(&profile);
        assert!(
            full > 1e-2,
            "shot should have departed from the profile by x = 9, deviation {full}"
        );
    }

    #[test]
    fn deviation_grows_with_the_window() {
        let profile = shifted_profile();
        let mut deviations = Vec::new();
        for x_max in [3.0, 6.0, 9.0] {
            let trajectory = shoot_homoclinic(K, &step_firing(), x_max, 1e-3).unwrap();
            deviations.push(trajectory.sup_deviation(&profile));
        }
        for pair in deviations.windows(2) {
            assert!(
                pair[1] >= pair[0],
                "sup-deviation must not shrink with the window: {deviations:?}"
            );
        }
        // anchors for the three windows; the growth is the e^{kx}
        // amplification of the initial-step error
        let expected = [1.4918e-5, 8.3190e-4, 4.6199e-2];
        for (dev, want) in deviations.iter().zip(expected) {
            assert!(
                (dev - want).abs() <= 0.1 * want,
                "deviation {dev} drifted from anchor {want}"
            );
        }
    }

    #[test]
    fn backward_shot_follows_the_subthreshold_tail() {
        // below threshold the steep-limit tail through (h, kh) is exactly
        // h e^{kx}. The first step straddles the threshold convention and
        // injects an error of about step (1 - k^2 h) / 6 into v; backward
        // integration amplifies its transverse part by e^{k|x|} / (2k),
        // which predicts 3.4e-3 at x = -3 and matches the anchor below.
        let trajectory = shoot_homoclinic(K, &step_firing(), 3.0, -1e-3).unwrap();
        assert!(trajectory.blowup_at.is_none());
        let last = *trajectory.xs.last().unwrap();
        assert!((last + 3.0).abs() <= 1e-12, "backward end at {last}");
        let deviation = trajectory.sup_deviation(|x| H * (K * x).exp());
        assert!(
            (deviation - 3.4551e-3).abs() <= 0.1 * 3.4551e-3,
            "tail deviation {deviation} drifted from its anchor"
        );

        // near the crossing the amplification has not kicked in yet
        let near: f64 = trajectory
            .xs
            .iter()
            .zip(&trajectory.us)
            .filter(|(&x, _)| x >= -crossing())
            .fold(0.0f64, |sup, (&x, &u)| {
                sup.max((u - H * (K * x).exp()).abs())
            });
        assert!(near <= 5e-4, "near-crossing deviation {near}");
    }

    #[test]
    fn halving_the_step_shows_fourth_order_on_the_smooth_arc() {
        let profile = shifted_profile();
        let window = 0.9;
        let mut devs = Vec::new();
        for step in [0.02, 0.01] {
            let trajectory = shoot_homoclinic(K, &step_firing(), window, step).unwrap();
            devs.push(trajectory.sup_deviation(&profile));
        }
        let ratio = devs[0] / devs[1];
        assert!(
            (12.0..=20.0).contains(&ratio),
            "halving ratio {ratio} is not fourth order: {devs:?}"
        );
    }

    #[test]
    fn blowup_is_recorded_not_fatal() {
        let trajectory = shoot_homoclinic(K, &step_firing(), 30.0, 1e-3).unwrap();
        let blowup = trajectory.blowup_at.expect("the saddle must win by x = 30");
        assert!(blowup > 10.0 && blowup < 30.0, "blowup at {blowup}");
        assert!((trajectory.xs.last().unwrap() - 30.0).abs() <= 1e-12);
        assert!(trajectory.us.iter().all(|u| u.is_finite()));
    }

    #[test]
    fn coarse_shot_can_be_captured_inside_the_loop() {
        // the sign of the accumulated energy error decides the failure mode:
        // landing inside the homoclinic loop gives a bounded periodic orbit
        // instead of a blowup, so absence of blowup is not success
        let trajectory = shoot_homoclinic(K, &step_firing(), 40.0, 1e-2).unwrap();
        assert!(trajectory.blowup_at.is_none());
        let max_u = trajectory.us.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        assert!(
            (0.2..=0.3).contains(&max_u),
            "captured orbit should stay at bump scale, max |u| = {max_u}"
        );
    }

    #[test]
    fn gate_and_validation() {
        let firing = step_firing();
        // 1/sqrt(2h) = 1.5811 for h = 0.2
        assert!(shoot_homoclinic(1.6, &firing, 5.0, 1e-3).is_err());
        assert!(shoot_homoclinic(-1.0, &firing, 5.0, 1e-3).is_err());
        assert!(shoot_homoclinic(K, &firing, 0.0, 1e-3).is_err());
        assert!(shoot_homoclinic(K, &firing, 5.0, 0.0).is_err());
        assert!(shoot_homoclinic(K, &firing, f64::INFINITY, 1e-3).is_err());

        // a finite-steepness shoot is legitimate, just not the headline case
        let hill = FiringRateModel::new(FiringFamily::Hill { p: 2.0 }, 100.0, H).unwrap();
        let trajectory = shoot_homoclinic(K, &hill, 1.0, 1e-3).unwrap();
        assert_eq!(trajectory.len(), 1001);
    }

    #[test]
    fn trajectory_csv_has_the_contract_shape() {
        let trajectory = shoot_homoclinic(K, &step_firing(), 0.01, 1e-3).unwrap();
        let csv = trajectory.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,u,v");
        assert_eq!(lines.len(), 1 + trajectory.len());
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 3);
        }
    }

    #[test]
    fn partial_final_step_lands_exactly_on_x_max() {
        let trajectory = shoot_homoclinic(K, &step_firing(), 0.0105, 1e-3).unwrap();
        assert_eq!(trajectory.len(), 12, "10 full steps, then one short step");
        assert!((trajectory.xs.last().unwrap() - 0.0105).abs() <= 1e-15);
    }

    #[test]
    fn closed_form_crossing_matches_the_solver() {
        let kernel = KernelModel::new(KernelFamily::Exponential { k: K }).unwrap();
        let bump = limit_bump::solve_crossings(&kernel, H, 1, &[0.4]).unwrap();
        assert!((bump.crossings[0] - crossing()).abs() <= 1e-10);
    }
}
