//! The constrained energy functionals and their L²-gradients.
//!
//! The full energy is
//!
//! ```text
//! E(u) = 1/2·‖∇u‖₂² − (1/q)·∫ c(x)·|u|^q − (η/p)·∫ |u|^p,
//! ```
//!
//! where the subcritical coefficient `c` is either the sampled modulated
//! coefficient h(εx) or a constant μ (the autonomous functionals share the
//! same code path). The truncated variant multiplies the supercritical term
//! by τ(‖∇u‖₂); it agrees with the full energy wherever ‖∇u‖₂ ≤ R₀ and its
//! gradient picks up a chain-rule multiple of −Δu inside the transition band.

use super::{Field, Kahan};
use crate::landscape::{ProblemParams, TruncationProfile};
use num_complex::Complex64;

/// Spatial coefficient of the subcritical term.
#[derive(Debug, Clone)]
pub enum Coefficient {
    Uniform(f64),
    Sampled(Vec<f64>),
}

impl Coefficient {
    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        match self {
            Coefficient::Uniform(c) => *c,
            Coefficient::Sampled(v) => v[idx],
        }
    }
}

/// ∫ c(x)·|u|^t by quadrature.
fn weighted_power_integral(u: &Field, coeff: &Coefficient, t: f64) -> f64 {
    let mut acc = Kahan::default();
    match coeff {
        Coefficient::Uniform(c) => {
            for v in u.values() {
                acc.add(v.norm().powf(t));
            }
            acc.total() * c * u.grid().cell_volume()
        }
        Coefficient::Sampled(cs) => {
            for (v, c) in u.values().iter().zip(cs) {
                acc.add(c * v.norm().powf(t));
            }
            acc.total() * u.grid().cell_volume()
        }
    }
}

fn power_integral(u: &Field, t: f64) -> f64 {
    weighted_power_integral(u, &Coefficient::Uniform(1.0), t)
}

/// Full (untruncated) energy.
pub fn energy_full(u: &Field, params: &ProblemParams, coeff: &Coefficient) -> f64 {
    let sigma = u.grad_norm();
    0.5 * sigma * sigma
        - weighted_power_integral(u, coeff, params.q) / params.q
        - params.eta / params.p * power_integral(u, params.p)
}

/// Energy with the supercritical term capped by τ(‖∇u‖₂).
pub fn energy_truncated(
    u: &Field,
    params: &ProblemParams,
    coeff: &Coefficient,
    profile: &TruncationProfile,
) -> f64 {
    let sigma = u.grad_norm();
    0.5 * sigma * sigma
        - weighted_power_integral(u, coeff, params.q) / params.q
        - params.eta / params.p * profile.tau(sigma) * power_integral(u, params.p)
}

/// Autonomous functional at constant coupling μ.
pub fn energy_autonomous(u: &Field, mu: f64, params: &ProblemParams) -> f64 {
    energy_full(u, params, &Coefficient::Uniform(mu))
}

/// Truncated autonomous functional.
pub fn energy_autonomous_truncated(
    u: &Field,
    mu: f64,
    params: &ProblemParams,
    profile: &TruncationProfile,
) -> f64 {
    energy_truncated(u, params, &Coefficient::Uniform(mu), profile)
}

/// L²-gradient of the truncated energy at a real-valued state:
///
/// ```text
/// (1 − (η/p)·τ'(σ)·‖u‖_p^p/σ)·(−Δu) − c(x)·|u|^{q−2}u − η·τ(σ)·|u|^{p−2}u
/// ```
///
/// with σ = ‖∇u‖₂. The τ' factor vanishes identically outside the
/// transition band.
pub fn gradient_truncated(
    u: &Field,
    params: &ProblemParams,
    coeff: &Coefficient,
    profile: &TruncationProfile,
) -> Field {
    debug_assert!(u.is_real(), "the descent phase works on real fields");
    let sigma = u.grad_norm();
    let tau = profile.tau(sigma);
    let tau_p = profile.tau_prime(sigma);
    let kinetic_factor = if tau_p == 0.0 || sigma == 0.0 {
        1.0
    } else {
        1.0 - params.eta / params.p * tau_p * power_integral(u, params.p) / sigma
    };
    let lap = u.neg_laplacian();
    let eq = params.q - 2.0;
    let ep = params.p - 2.0;
    let values: Vec<Complex64> = u
        .values()
        .iter()
        .zip(lap.values())
        .enumerate()
        .map(|(idx, (v, l))| {
            let x = v.re;
            let nl = coeff.at(idx) * x.abs().powf(eq) * x + params.eta * tau * x.abs().powf(ep) * x;
            Complex64::new(kinetic_factor * l.re - nl, 0.0)
        })
        .collect();
    Field::from_values(u.grid(), values).expect("gradient keeps the grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::landscape::{GnConstants, EnergyFloor, LandscapeReport};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_params() -> ProblemParams {
        ProblemParams::new(1, 0.5, 0.1, 1.0, 8.0, 4.0).unwrap()
    }

    fn desk_profile() -> TruncationProfile {
        LandscapeReport::compute(&desk_params(), 1.0)
            .unwrap()
            .truncation_profile()
            .unwrap()
    }

    fn grid() -> Grid {
        Grid::new(1, 256, 40.0).unwrap()
    }

    #[test]
    fn truncated_equals_full_on_the_plateau() {
        let params = desk_params();
        let profile = desk_profile();
        let g = grid();
        let coeff = Coefficient::Uniform(0.8);
        // Tiny amplitude keeps the gradient norm below the lower threshold.
        let u = Field::gaussian(g, &[0.0], 3.0).normalize_to_mass(0.01).unwrap();
        assert!(u.grad_norm() < profile.r0);
        let full = energy_full(&u, &params, &coeff);
        let trunc = energy_truncated(&u, &params, &coeff, &profile);
        assert_eq!(full, trunc, "τ is exactly one on the plateau");
    }

    #[test]
    fn energy_dominates_the_floor() {
        let params = desk_params();
        let report = LandscapeReport::compute(&params, 1.0).unwrap();
        let profile = report.truncation_profile().unwrap();
        let floor = report.floor();
        let g = grid();
        let coeff = Coefficient::Uniform(report.h_max);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let u = Field::random_localized(g, 1.5, 4.0, &[0.0], true, &mut rng)
                .normalize_to_mass(params.a)
                .unwrap();
            let e = energy_truncated(&u, &params, &coeff, &profile);
            let bound = floor.g_bar(u.grad_norm(), &profile);
            assert!(
                e >= bound - 1e-3 * bound.abs().max(1.0),
                "energy {e} under floor {bound} at σ = {}",
                u.grad_norm()
            );
        }
    }

    #[test]
    fn small_dilations_go_negative() {
        // A narrow base profile leaves room for the hundredfold spreading.
        let params = desk_params();
        let profile = desk_profile();
        let g = Grid::new(1, 4096, 640.0).unwrap();
        let base = Field::gaussian(g, &[0.0], 0.64).normalize_to_mass(params.a).unwrap();
        let dilated = base.dilate(0.01).unwrap().normalize_to_mass(params.a).unwrap();
        let e = energy_autonomous_truncated(&dilated, 1.0, &params, &profile);
        assert!(e < 0.0, "energy {e}");
    }

    #[test]
    fn dilation_scaling_of_the_functional_terms() {
        // Kinetic term scales by t², the subcritical term by t^{qγ_q}.
        let params = desk_params();
        let g = Grid::new(1, 256, 640.0).unwrap();
        let consts = GnConstants::compute(&params).unwrap();
        let u = Field::gaussian(g, &[0.0], 8.0).normalize_to_mass(params.a).unwrap();
        let t = 0.5;
        let ut = u.dilate(t).unwrap();
        let kin = |v: &Field| 0.5 * v.grad_norm() * v.grad_norm();
        let sub = |v: &Field| power_integral(v, params.q) / params.q;
        assert!((kin(&ut) - t * t * kin(&u)).abs() <= 1e-6 * kin(&u));
        let qg = params.q * consts.gamma_q;
        assert!((sub(&ut) - t.powf(qg) * sub(&u)).abs() <= 1e-6 * sub(&u));
    }

    #[test]
    fn gn_inequality_holds_on_random_fields() {
        // The landscape constants must dominate the quadrature quotient on
        // localized samples up to discretization slack.
        let params = desk_params();
        let consts = GnConstants::compute(&params).unwrap();
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t_and_c in [(params.q, consts.c_q, consts.gamma_q), (params.p, consts.c_p, consts.gamma_p)] {
            let (t, c, gam) = t_and_c;
            for _ in 0..50 {
                let u = Field::random_localized(g, 2.0, 4.0, &[0.0], false, &mut rng);
                let lhs = u.lp_norm(t).unwrap();
                let rhs = c * u.mass().sqrt().powf(1.0 - gam) * u.grad_norm().powf(gam);
                assert!(lhs <= rhs * (1.0 + 1e-3), "t = {t}: {lhs} > {rhs}");
            }
        }
    }

    fn directional_check(u: &Field, params: &ProblemParams, coeff: &Coefficient, profile: &TruncationProfile, rng: &mut ChaCha8Rng) {
        let grad = gradient_truncated(u, params, coeff, profile);
        for _ in 0..20 {
            // Wide-band directions so the probe overlaps the state spectrally.
            let phi = Field::random_localized(u.grid(), 16.0, 4.0, &[0.0], true, rng)
                .normalize_to_mass(1.0)
                .unwrap();
            let delta = 1e-5;
            let plus = Field::combined(1.0.into(), u, delta.into(), &phi).unwrap();
            let minus = Field::combined(1.0.into(), u, (-delta).into(), &phi).unwrap();
            let fd = (energy_truncated(&plus, params, coeff, profile)
                - energy_truncated(&minus, params, coeff, profile))
                / (2.0 * delta);
            let an = grad.l2_inner(&phi).re;
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()),
                "fd {fd}, analytic {an}, σ = {}",
                u.grad_norm()
            );
        }
    }

    #[test]
    fn gradient_matches_directional_derivatives_in_all_regimes() {
        let params = desk_params();
        let report = LandscapeReport::compute(&params, 1.0).unwrap();
        let profile = report.truncation_profile().unwrap();
        let g = grid();
        let coeff = Coefficient::Uniform(0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // An oscillatory profile reaches large gradient norms at moderate
        // amplitude, keeping the difference-quotient oracle well conditioned.
        let base = Field::from_real_fn(g, |x| (-x[0] * x[0] / 18.0).exp() * (15.0 * x[0]).cos());
        let (r0, r1) = (profile.r0, profile.r1);
        // Below the plateau edge, mid-transition (where the chain-rule term
        // is strong), and beyond the upper cutoff.
        for sigma_target in [0.5 * r0, 0.5 * (r0 + r1), 2.0 * r1] {
            let u = base.scaled(sigma_target / base.grad_norm());
            assert!((u.grad_norm() - sigma_target).abs() <= 1e-9 * sigma_target);
            directional_check(&u, &params, &coeff, &profile, &mut rng);
        }
    }

    #[test]
    fn gradient_on_plateau_reduces_to_untruncated_derivative() {
        let params = desk_params();
        let profile = desk_profile();
        let g = grid();
        let coeff = Coefficient::Uniform(1.0);
        let u = Field::gaussian(g, &[0.0], 3.0).normalize_to_mass(0.02).unwrap();
        assert!(u.grad_norm() < profile.r0);
        let grad = gradient_truncated(&u, &params, &coeff, &profile);
        let lap = u.neg_laplacian();
        for (idx, (gv, lv)) in grad.values().iter().zip(lap.values()).enumerate() {
            let x = u.values()[idx].re;
            let expected = lv.re
                - coeff.at(idx) * x.abs().powf(params.q - 2.0) * x
                - params.eta * x.abs().powf(params.p - 2.0) * x;
            assert!((gv.re - expected).abs() <= 1e-15 * expected.abs().max(1e-300));
        }
    }

    #[test]
    fn zero_field_has_zero_gradient() {
        let params = desk_params();
        let profile = desk_profile();
        let u = Field::zeros(grid());
        let grad = gradient_truncated(&u, &params, &Coefficient::Uniform(1.0), &profile);
        assert!(grad.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn autonomous_energy_invariant_under_cell_translation() {
        let params = desk_params();
        let profile = desk_profile();
        let g = grid();
        let u = Field::gaussian(g, &[0.0], 2.0).normalize_to_mass(params.a).unwrap();
        let shifted = u.translate_cells(&[37]);
        let e0 = energy_autonomous_truncated(&u, 0.7, &params, &profile);
        let e1 = energy_autonomous_truncated(&shifted, 0.7, &params, &profile);
        assert!((e0 - e1).abs() <= 1e-12 * e0.abs());
    }

    #[test]
    fn floor_energy_floor_consistency_with_mass_rescaling() {
        // The floor at a smaller mass level dominates the floor at level a.
        let params = desk_params();
        let report = LandscapeReport::compute(&params, 1.0).unwrap();
        let consts = report.constants();
        let floor_a = report.floor();
        let floor_half = EnergyFloor::with_mass(&params, 1.0, &consts, params.a / 2.0);
        for i in 1..50 {
            let r = i as f64 * 0.01;
            assert!(floor_half.w(r).unwrap() >= floor_a.w(r).unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn functionals_are_phase_invariant(theta in 0.0f64..std::f64::consts::TAU) {
            let params = desk_params();
            let profile = desk_profile();
            let g = Grid::new(1, 64, 20.0).unwrap();
            let u = Field::from_complex_fn(g, |x| {
                Complex64::new((-x[0]*x[0] / 3.0).exp(), 0.4 * (-x[0]*x[0] / 5.0).exp())
            });
            let coeff = Coefficient::Uniform(0.8);
            let rotated = u.phase_rotated(theta);
            let e0 = energy_truncated(&u, &params, &coeff, &profile);
            let e1 = energy_truncated(&rotated, &params, &coeff, &profile);
            prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1e-30));
        }
    }
}
