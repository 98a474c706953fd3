//! Sphere-constrained local minimization.
//!
//! Projected gradient descent with Armijo backtracking on the mass sphere
//! (renormalize after every accepted step). The multiplicity driver runs one
//! localized descent per coefficient maximum, each started from the
//! autonomous minimizer translated to that maximum, and extracts the
//! Lagrange multiplier from the converged first-order condition
//! ∇E(u) = λ·u.
//!
//! Descent from a negative-energy starter can never leave the truncation
//! plateau: accepted steps are monotone, and a negative truncated energy
//! forces the gradient norm below the lower threshold. The upper-threshold
//! trap therefore only fires on a genuine solver bug.

use crate::field::{
    energy::{energy_autonomous_truncated, energy_full, energy_truncated, gradient_truncated},
    Coefficient, Field, FieldError, Grid, BOUNDARY_MASS_MAX,
};
use crate::landscape::{LandscapeError, LandscapeReport, ProblemParams, TruncationProfile};
use crate::potential::{
    barycenter, default_localization, in_core_set, region_of_point, LocalizationConfig, PotentialSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("the smallness condition fails; the truncated functional has no lower threshold")]
    LandscapeRejected,
    #[error("descent did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("descent stalled at iteration {iterations} (residual {residual:.3e}, no acceptable step)")]
    Stalled { iterations: usize, residual: f64 },
    #[error("iterate left region {region} at iteration {iteration} (barycenter {barycenter:?})")]
    RegionEscape {
        region: usize,
        iteration: usize,
        barycenter: Vec<f64>,
        /// Last iterate that was still inside the region.
        last_inside: Box<Field>,
    },
    #[error("gradient norm {grad_norm:.3e} crossed the upper threshold {bound:.3e}; negative-energy descent cannot do this")]
    LandscapeViolated { grad_norm: f64, bound: f64 },
    #[error("converged state keeps {fraction:.3e} of its mass in the boundary shell; enlarge the box")]
    DomainTooSmall { fraction: f64 },
    #[error("dilation scan found no negative-energy starter after {tried} halvings")]
    ScanFailed { tried: u32 },
    #[error("converged state violates an invariant: {0}")]
    InvariantViolated(String),
}

/// Descent parameters. Defaults are the documented desk-scale values.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Residual tolerance factor: converged when
    /// ‖∇E − λu‖₂ ≤ factor·a·max(1, |λ|·a).
    pub tol_res_factor: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_max: f64,
    pub step_min: f64,
    /// Barycenter region check cadence, in accepted steps.
    pub region_check_every: usize,
    pub seed: u64,
    /// Random-restart probes for the global-level estimate.
    pub restarts: u32,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_res_factor: 1e-8,
            max_iter: 200_000,
            armijo_c: 1e-4,
            step_init: 1.0,
            step_max: 64.0,
            step_min: 1e-18,
            region_check_every: 25,
            seed: 0,
            restarts: 2,
        }
    }
}

/// Converged localized minimizer with its first-order data.
#[derive(Debug, Clone)]
pub struct MinimizerRecord {
    pub u: Field,
    pub region: usize,
    /// Achieved energy of the truncated functional (equals the full energy
    /// on the plateau).
    pub energy: f64,
    /// Lagrange multiplier of the mass constraint.
    pub lambda: f64,
    /// ‖∇E(u) − λu‖₂ at convergence.
    pub residual: f64,
    pub barycenter: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub boundary_fraction: f64,
}

/// Tangent projection on the mass sphere: returns (g − λ·u, λ) with
/// λ = ⟨g, u⟩/‖u‖₂².
pub fn project_tangent(g: &Field, u: &Field) -> (Field, f64) {
    let a_sq = u.mass();
    let lambda = g.l2_inner(u).re / a_sq;
    let tan = Field::combined(1.0.into(), g, (-lambda).into(), u).expect("same grid");
    (tan, lambda)
}

struct RegionMonitor<'a> {
    spec: &'a PotentialSpec,
    loc: &'a LocalizationConfig,
    epsilon: f64,
    region: usize,
}

impl RegionMonitor<'_> {
    fn center(&self) -> &[f64] {
        &self.spec.maxima()[self.region]
    }

    fn check(&self, u: &Field, iteration: usize, last_inside: &Field) -> Result<(), OptimError> {
        let q = barycenter(u, self.epsilon, self.loc.r_tilde)?;
        let inside = region_of_point(&q, self.loc, self.spec)
            .map(|hit| hit.index == self.region)
            .unwrap_or(false);
        if inside {
            Ok(())
        } else {
            Err(OptimError::RegionEscape {
                region: self.region,
                iteration,
                barycenter: q,
                last_inside: Box::new(last_inside.clone()),
            })
        }
    }
}

struct Descent {
    u: Field,
    energy: f64,
    lambda: f64,
    residual: f64,
    iterations: usize,
}

/// Projected gradient descent with backtracking; the workhorse for both the
/// localized and the autonomous problems.
fn descend(
    starter: &Field,
    mass_level: f64,
    params: &ProblemParams,
    coeff: &Coefficient,
    profile: &TruncationProfile,
    settings: &SolverSettings,
    monitor: Option<&RegionMonitor<'_>>,
) -> Result<Descent, OptimError> {
    let mut u = starter.normalize_to_mass(mass_level)?;
    let mut energy = energy_truncated(&u, params, coeff, profile);
    let mut alpha = settings.step_init;
    let mut accepted_since_check = 0usize;
    for iteration in 0..settings.max_iter {
        let grad = gradient_truncated(&u, params, coeff, profile);
        let (tangent, lambda) = project_tangent(&grad, &u);
        let residual = tangent.mass().sqrt();
        let tol = settings.tol_res_factor * mass_level * (lambda.abs() * mass_level).max(1.0);
        if residual <= tol {
            return Ok(Descent { u, energy, lambda, residual, iterations: iteration });
        }
        if u.grad_norm() >= profile.r1 {
            return Err(OptimError::LandscapeViolated { grad_norm: u.grad_norm(), bound: profile.r1 });
        }
        let mut stepped = false;
        while alpha >= settings.step_min {
            let trial = Field::combined(1.0.into(), &u, (-alpha).into(), &tangent)?
                .normalize_to_mass(mass_level)?;
            let trial_energy = energy_truncated(&trial, params, coeff, profile);
            if trial_energy <= energy - settings.armijo_c * alpha * residual * residual {
                u = trial;
                energy = trial_energy;
                alpha = (2.0 * alpha).min(settings.step_max);
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if !stepped {
            return Err(OptimError::Stalled { iterations: iteration, residual });
        }
        if let Some(mon) = monitor {
            accepted_since_check += 1;
            if accepted_since_check >= settings.region_check_every {
                accepted_since_check = 0;
                mon.check(&u, iteration, &u)?;
            }
        }
    }
    let grad = gradient_truncated(&u, params, coeff, profile);
    let (tangent, _) = project_tangent(&grad, &u);
    Err(OptimError::NotConverged { iterations: settings.max_iter, residual: tangent.mass().sqrt() })
}

/// Base profile translated to the region's maximum and renormalized.
///
/// The shift is `center/ε`, so the box must be large enough to hold the
/// translate; the boundary-shell guard rejects anything else.
pub fn starter_profile(
    region: usize,
    epsilon: f64,
    params: &ProblemParams,
    base: &Field,
    spec: &PotentialSpec,
) -> Result<Field, OptimError> {
    let center = &spec.maxima()[region];
    let shift: Vec<f64> = center.iter().map(|c| c / epsilon).collect();
    let translated = if shift.iter().all(|s| *s == 0.0) {
        base.clone()
    } else {
        base.translate(&shift)
    };
    let fraction = translated.boundary_mass_fraction();
    if fraction > BOUNDARY_MASS_MAX {
        return Err(FieldError::SupportOverflow { fraction, limit: BOUNDARY_MASS_MAX }.into());
    }
    Ok(translated.normalize_to_mass(params.a)?)
}

/// Minimize the autonomous truncated functional at coupling `mu` over the
/// sphere of mass level `a1`, starting from a dilated Gaussian driven to
/// negative energy by the halving scan.
pub fn autonomous_minimize(
    mu: f64,
    a1: f64,
    params: &ProblemParams,
    grid: Grid,
    profile: &TruncationProfile,
    settings: &SolverSettings,
) -> Result<(f64, Field), OptimError> {
    let coeff = Coefficient::Uniform(mu);
    let base = Field::gaussian(grid, &[0.0; 3][..grid.dim() as usize], grid.edge() / 80.0)
        .normalize_to_mass(a1)?;
    let mut starter = None;
    let mut t = 1.0;
    for tried in 0..=60u32 {
        let candidate = if tried == 0 { base.clone() } else { base.dilate(t)?.normalize_to_mass(a1)? };
        if energy_autonomous_truncated(&candidate, mu, params, profile) < 0.0 {
            starter = Some(candidate);
            break;
        }
        t *= 0.5;
    }
    let starter = starter.ok_or(OptimError::ScanFailed { tried: 60 })?;
    let out = descend(&starter, a1, params, &coeff, profile, settings, None)?;
    if !(out.energy < 0.0) {
        return Err(OptimError::InvariantViolated(format!(
            "autonomous level {:.6e} is not negative",
            out.energy
        )));
    }
    if !(out.u.grad_norm() < profile.r0) {
        return Err(OptimError::InvariantViolated(format!(
            "autonomous minimizer has gradient norm {:.6e} >= {:.6e}",
            out.u.grad_norm(),
            profile.r0
        )));
    }
    Ok((out.energy, out.u))
}

/// Localized minimization in one region, from a prepared starter.
pub fn minimize_localized(
    region: usize,
    starter: &Field,
    params: &ProblemParams,
    spec: &PotentialSpec,
    loc: &LocalizationConfig,
    coeff: &Coefficient,
    profile: &TruncationProfile,
    settings: &SolverSettings,
) -> Result<MinimizerRecord, OptimError> {
    let monitor = RegionMonitor { spec, loc, epsilon: params.epsilon, region };
    // A starter outside its region cannot seed a localized search; this is
    // the signature of a coefficient dilation too coarse for the box of
    // attraction.
    monitor.check(starter, 0, starter)?;
    let out = descend(starter, params.a, params, coeff, profile, settings, Some(&monitor))?;
    finish_record(region, out, params, spec, loc, coeff, profile)
}

fn finish_record(
    region: usize,
    out: Descent,
    params: &ProblemParams,
    spec: &PotentialSpec,
    loc: &LocalizationConfig,
    coeff: &Coefficient,
    profile: &TruncationProfile,
) -> Result<MinimizerRecord, OptimError> {
    let u = out.u;
    let a_sq = params.a * params.a;
    let mass_err = (u.mass() - a_sq).abs() / a_sq;
    if mass_err > 1e-10 {
        return Err(OptimError::InvariantViolated(format!("mass error {mass_err:.3e}")));
    }
    let grad_norm = u.grad_norm();
    if !(grad_norm < profile.r0) {
        return Err(OptimError::InvariantViolated(format!(
            "gradient norm {grad_norm:.6e} not below the plateau edge {:.6e}",
            profile.r0
        )));
    }
    if !(out.energy < 0.0) {
        return Err(OptimError::InvariantViolated(format!("energy {:.6e} not negative", out.energy)));
    }
    if !(out.lambda < 0.0) {
        return Err(OptimError::InvariantViolated(format!("multiplier {:.6e} not negative", out.lambda)));
    }
    // On the plateau the truncation is inert; the full energy must agree.
    let full = energy_full(&u, params, coeff);
    if (full - out.energy).abs() > 1e-12 {
        return Err(OptimError::InvariantViolated(format!(
            "plateau mismatch: full {full:.16e} vs truncated {:.16e}",
            out.energy
        )));
    }
    let fraction = u.boundary_mass_fraction();
    if fraction > BOUNDARY_MASS_MAX {
        return Err(OptimError::DomainTooSmall { fraction });
    }
    let q = barycenter(&u, params.epsilon, loc.r_tilde)?;
    let in_region = region_of_point(&q, loc, spec).map(|h| h.index == region).unwrap_or(false);
    if !in_region {
        return Err(OptimError::InvariantViolated(format!(
            "converged barycenter {q:?} outside region {region}"
        )));
    }
    Ok(MinimizerRecord {
        region,
        energy: out.energy,
        lambda: out.lambda,
        residual: out.residual,
        barycenter: q,
        grad_norm,
        iterations: out.iterations,
        converged: true,
        boundary_fraction: fraction,
        u,
    })
}

/// Level ordering diagnostics for one dilation value.
#[derive(Debug, Clone)]
pub struct OrderingReport {
    /// Infimum of the truncated autonomous functional at the peak coupling.
    pub level_max: f64,
    /// Same at the asymptotic coupling.
    pub level_infty: f64,
    /// Half the spread between the two levels; converged energies below
    /// level_max + margin must localize in the core set.
    pub localization_margin: f64,
    /// Smallest converged region energy (lower-bound estimate of the global
    /// infimum of the modulated functional).
    pub global_proxy: f64,
    /// Smallest energy reached by random-restart probes, when run.
    pub probe_min: Option<f64>,
    /// global_proxy − level_max; nonnegative up to solver noise and
    /// shrinking as the dilation decreases.
    pub gap: f64,
    pub ordering_ok: bool,
}

/// Everything the multiplicity run produces.
#[derive(Debug)]
pub struct MultiplicityReport {
    pub records: Vec<MinimizerRecord>,
    pub failures: Vec<(usize, OptimError)>,
    pub ordering: OrderingReport,
    pub localization: LocalizationConfig,
    pub landscape: LandscapeReport,
    pub warnings: Vec<String>,
}

impl MultiplicityReport {
    /// True when every region produced a converged record.
    pub fn complete(&self, spec: &PotentialSpec) -> bool {
        self.failures.is_empty() && self.records.len() == spec.multiplicity()
    }
}

/// Full multiplicity run: landscape gate, autonomous levels, one localized
/// descent per region (in parallel), ordering assembly and diagnostics.
pub fn solve_multiplicity(
    params: &ProblemParams,
    spec: &PotentialSpec,
    grid: Grid,
    settings: &SolverSettings,
) -> Result<MultiplicityReport, OptimError> {
    let landscape = LandscapeReport::compute(params, spec.h_max())?;
    let profile = landscape.truncation_profile().ok_or(OptimError::LandscapeRejected)?;
    let loc = default_localization(spec);
    let (level_max, base) = autonomous_minimize(spec.h_max(), params.a, params, grid, &profile, settings)?;
    let (level_infty, _) = autonomous_minimize(spec.h_infty(), params.a, params, grid, &profile, settings)?;
    let coeff = spec.sample(grid, params.epsilon);

    let l = spec.multiplicity();
    let mut slots: Vec<Option<Result<MinimizerRecord, OptimError>>> = (0..l).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for region in 0..l {
            let base = &base;
            let coeff = &coeff;
            let profile = &profile;
            let loc = &loc;
            handles.push(scope.spawn(move || {
                let starter = starter_profile(region, params.epsilon, params, base, spec)?;
                minimize_localized(region, &starter, params, spec, loc, coeff, profile, settings)
            }));
        }
        for (region, handle) in handles.into_iter().enumerate() {
            slots[region] = Some(handle.join().expect("region worker must not panic"));
        }
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (region, slot) in slots.into_iter().enumerate() {
        match slot.expect("every region ran") {
            Ok(record) => records.push(record),
            Err(err) => failures.push((region, err)),
        }
    }

    let probe_min = if settings.restarts > 0 {
        random_restart_probe(params, grid, &coeff, &profile, settings).ok()
    } else {
        None
    };

    let localization_margin = 0.5 * (level_infty - level_max);
    let global_proxy = records
        .iter()
        .map(|r| r.energy)
        .chain(probe_min)
        .fold(f64::INFINITY, f64::min);
    let gap = global_proxy - level_max;
    let ordering_ok =
        level_max < level_infty && level_infty < 0.0 && gap >= -1e-8 * level_max.abs().max(1e-12);
    let ordering = OrderingReport {
        level_max,
        level_infty,
        localization_margin,
        global_proxy,
        probe_min,
        gap,
        ordering_ok,
    };

    let mut warnings = Vec::new();
    for record in &records {
        // Low-energy states must localize: any converged energy within the
        // margin above the peak level has to carry its barycenter into the
        // core set.
        if record.energy <= level_max + localization_margin
            && !in_core_set(&record.barycenter, &loc, spec)
        {
            warnings.push(format!(
                "region {}: energy {:.6e} is within the localization margin but the barycenter {:?} misses the core set",
                record.region, record.energy, record.barycenter
            ));
        }
    }
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            let (a, b) = (&records[i], &records[j]);
            let d_centers = dists(&spec.maxima()[a.region], &spec.maxima()[b.region]);
            let d_bary = dists(&a.barycenter, &b.barycenter);
            if d_bary < d_centers - 2.0 * loc.rho_tilde {
                warnings.push(format!(
                    "regions {} and {}: barycenters {:.3e} apart, expected at least {:.3e}",
                    a.region,
                    b.region,
                    d_bary,
                    d_centers - 2.0 * loc.rho_tilde
                ));
            }
        }
    }

    Ok(MultiplicityReport { records, failures, ordering, localization: loc, landscape, warnings })
}

fn dists(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// Descend from a few random localized starters and report the best energy
// seen; a lower-bound probe for the global level, not a certificate.
fn random_restart_probe(
    params: &ProblemParams,
    grid: Grid,
    coeff: &Coefficient,
    profile: &TruncationProfile,
    settings: &SolverSettings,
) -> Result<f64, OptimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut best = f64::INFINITY;
    let n = grid.dim() as usize;
    for _ in 0..settings.restarts {
        let center: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() - 0.5) * 0.4 * grid.edge()).collect();
        let sample = Field::random_localized(grid, 0.5, grid.edge() / 20.0, &center, true, &mut rng);
        let Ok(normalized) = sample.normalize_to_mass(params.a) else { continue };
        let mut starter = None;
        let mut t = 1.0;
        for _ in 0..=40u32 {
            let candidate = match normalized.dilate(t) {
                Ok(c) => c.normalize_to_mass(params.a)?,
                Err(_) => break,
            };
            if energy_truncated(&candidate, params, coeff, profile) < 0.0 {
                starter = Some(candidate);
                break;
            }
            t *= 0.5;
        }
        let Some(starter) = starter else { continue };
        if let Ok(out) = descend(&starter, params.a, params, coeff, profile, settings, None) {
            best = best.min(out.energy);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(OptimError::ScanFailed { tried: 40 })
    }
}
