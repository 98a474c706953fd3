//! Coefficient functions built from compactly supported bumps, and the
//! barycenter machinery that localizes low-energy states near their maxima.
//!
//! A valid coefficient is `h(x) = h_∞ + Σⱼ Aⱼ·φ((x−cⱼ)/Rⱼ)` with
//! `φ(s) = e·exp(−1/(1−|s|²))` on |s| < 1 and 0 outside, the supports
//! pairwise disjoint, and the origin among the global maxima. Disjointness
//! makes every peak value exactly `h_∞ + Aⱼ`, so the maxima set is read off
//! the amplitudes rather than hunted numerically.

use crate::field::{Coefficient, Field, FieldError, Grid, Kahan};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("coefficient bounds violated: {reason} (witness point {witness:?})")]
    BoundViolated { reason: String, witness: Vec<f64> },
    #[error("asymptotic value must sit strictly below the global maximum: {0}")]
    AsymptoteViolated(String),
    #[error("maxima structure violated: {0}")]
    MaximaViolated(String),
    #[error("peak geometry invalid: {0}")]
    BadPeak(String),
}

/// One compactly supported bump.
#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    /// Center in physical coordinates (length = dimension).
    pub center: Vec<f64>,
    /// Height above the asymptotic value; the peak value is h_∞ + amplitude.
    pub amplitude: f64,
    /// Support radius.
    pub radius: f64,
}

impl Peak {
    fn bump(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let s2 = r2 / (self.radius * self.radius);
        if s2 >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - 1.0 / (1.0 - s2)).exp()
        }
    }
}

/// Validated bump-sum coefficient.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    dim: u32,
    h_infty: f64,
    peaks: Vec<Peak>,
    h_max: f64,
    h_min: f64,
    /// Global maximum points, origin first.
    maxima: Vec<Vec<f64>>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Validate and build a coefficient function from its raw description.
pub fn build_potential(dim: u32, h_infty: f64, peaks: Vec<Peak>) -> Result<PotentialSpec, PotentialError> {
    if peaks.is_empty() {
        return Err(PotentialError::MaximaViolated("at least one peak is required".into()));
    }
    for (i, p) in peaks.iter().enumerate() {
        if p.center.len() != dim as usize {
            return Err(PotentialError::BadPeak(format!(
                "peak {i} center has {} coordinates in dimension {dim}",
                p.center.len()
            )));
        }
        if !(p.radius > 0.0) || !p.radius.is_finite() {
            return Err(PotentialError::BadPeak(format!("peak {i} radius {} must be positive", p.radius)));
        }
        if p.amplitude == 0.0 || !p.amplitude.is_finite() {
            return Err(PotentialError::BadPeak(format!(
                "peak {i} amplitude {} must be nonzero and finite",
                p.amplitude
            )));
        }
    }
    // Disjoint closed supports keep peak values exact and maxima isolated.
    for i in 0..peaks.len() {
        for j in i + 1..peaks.len() {
            let d = dist(&peaks[i].center, &peaks[j].center);
            if d <= peaks[i].radius + peaks[j].radius {
                let witness: Vec<f64> = peaks[i]
                    .center
                    .iter()
                    .zip(&peaks[j].center)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                return Err(PotentialError::MaximaViolated(format!(
                    "supports of peaks {i} and {j} overlap near {witness:?}"
                )));
            }
        }
    }
    let amp_max = peaks.iter().map(|p| p.amplitude).fold(f64::NEG_INFINITY, f64::max);
    let amp_min = peaks.iter().map(|p| p.amplitude).fold(f64::INFINITY, f64::min);
    let h_max = h_infty + amp_max.max(0.0);
    let h_min = h_infty + amp_min.min(0.0);
    if !(h_min > 0.0) {
        let worst = peaks
            .iter()
            .min_by(|a, b| a.amplitude.partial_cmp(&b.amplitude).unwrap())
            .unwrap();
        return Err(PotentialError::BoundViolated {
            reason: format!("infimum {h_min} is not positive"),
            witness: worst.center.clone(),
        });
    }
    if !(h_infty < h_max) {
        return Err(PotentialError::AsymptoteViolated(format!(
            "h_infty = {h_infty} but the maximum is {h_max}; at least one amplitude must be positive"
        )));
    }
    // The maxima are the peaks whose amplitude attains the largest value.
    let mut maxima: Vec<Vec<f64>> = peaks
        .iter()
        .filter(|p| p.amplitude == amp_max)
        .map(|p| p.center.clone())
        .collect();
    let origin_pos = maxima.iter().position(|c| c.iter().all(|&x| x == 0.0));
    match origin_pos {
        Some(i) => maxima.swap(0, i),
        None => {
            return Err(PotentialError::MaximaViolated(
                "the origin must be among the global maximum points".into(),
            ))
        }
    }
    let spec = PotentialSpec { dim, h_infty, peaks, h_max, h_min, maxima };
    spec.verify_bounds_by_sampling()?;
    Ok(spec)
}

impl PotentialSpec {
    pub fn dim(&self) -> u32 {
        self.dim
    }
    pub fn h_infty(&self) -> f64 {
        self.h_infty
    }
    pub fn h_max(&self) -> f64 {
        self.h_max
    }
    pub fn h_min(&self) -> f64 {
        self.h_min
    }
    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }
    /// Global maximum points, origin first.
    pub fn maxima(&self) -> &[Vec<f64>] {
        &self.maxima
    }
    pub fn multiplicity(&self) -> usize {
        self.maxima.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.h_infty + self.peaks.iter().map(|p| p.bump(x)).sum::<f64>()
    }

    /// h(ε·x) sampled on the grid.
    pub fn sample(&self, grid: Grid, epsilon: f64) -> Coefficient {
        let n = grid.dim() as usize;
        let values = (0..grid.total_points())
            .map(|idx| {
                let x = grid.coords(idx);
                let scaled: Vec<f64> = x[..n].iter().map(|v| epsilon * v).collect();
                self.eval(&scaled)
            })
            .collect();
        Coefficient::Sampled(values)
    }

    // Dense line sampling through every peak: construction already
    // guarantees the bounds, this guards the implementation against
    // regressions.
    fn verify_bounds_by_sampling(&self) -> Result<(), PotentialError> {
        let samples_per_line = 2_000;
        for peak in &self.peaks {
            for axis in 0..self.dim as usize {
                for k in 0..samples_per_line {
                    let t = -1.5 + 3.0 * k as f64 / (samples_per_line - 1) as f64;
                    let mut x = peak.center.clone();
                    x[axis] += t * peak.radius;
                    let v = self.eval(&x);
                    if v < self.h_min - 1e-12 || v > self.h_max + 1e-12 {
                        return Err(PotentialError::BoundViolated {
                            reason: format!("sampled value {v} outside [{}, {}]", self.h_min, self.h_max),
                            witness: x,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Radial clamp onto the closed ball of radius `r_tilde`.
pub fn clamp_to_ball(x: &[f64], r_tilde: f64) -> Vec<f64> {
    let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= r_tilde {
        x.to_vec()
    } else {
        x.iter().map(|v| v * r_tilde / norm).collect()
    }
}

/// Clamped barycenter of |u|² in coefficient coordinates:
/// ∫ clamp(εx)·|u|² dx / ∫ |u|² dx.
pub fn barycenter(u: &Field, epsilon: f64, r_tilde: f64) -> Result<Vec<f64>, FieldError> {
    let mass = u.mass();
    if mass == 0.0 {
        return Err(FieldError::ZeroField);
    }
    let grid = u.grid();
    let n = grid.dim() as usize;
    let mut acc = vec![Kahan::default(); n];
    for (idx, v) in u.values().iter().enumerate() {
        let x = grid.coords(idx);
        let scaled: Vec<f64> = x[..n].iter().map(|xi| epsilon * xi).collect();
        let clamped = clamp_to_ball(&scaled, r_tilde);
        let w = v.norm_sqr();
        for (a, c) in acc.iter_mut().zip(&clamped) {
            a.add(w * c);
        }
    }
    let scale = grid.cell_volume() / mass;
    Ok(acc.iter().map(|a| a.total() * scale).collect())
}

/// Radii of the localization construction.
///
/// `rho_tilde` separates the maxima (closed balls stay disjoint) and
/// `r_tilde` contains all of them with room to spare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationConfig {
    pub rho_tilde: f64,
    pub r_tilde: f64,
}

/// Default radii: just under half the minimum pairwise distance between
/// maxima (twice the largest support radius for a single maximum), and an
/// enclosing radius one unit beyond the farthest maximum.
pub fn default_localization(spec: &PotentialSpec) -> LocalizationConfig {
    let maxima = spec.maxima();
    let rho_tilde = if maxima.len() == 1 {
        2.0 * spec.peaks().iter().map(|p| p.radius).fold(0.0, f64::max)
    } else {
        let mut min_d = f64::INFINITY;
        for i in 0..maxima.len() {
            for j in i + 1..maxima.len() {
                min_d = min_d.min(dist(&maxima[i], &maxima[j]));
            }
        }
        0.49 * min_d
    };
    let r_max = maxima
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    LocalizationConfig { rho_tilde, r_tilde: r_max + rho_tilde + 1.0 }
}

/// Which localization region a state's barycenter falls in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionHit {
    pub index: usize,
    /// The barycenter sits within tolerance of the region's rim.
    pub boundary: bool,
}

/// The unique region whose center lies within `rho_tilde` of the barycenter,
/// if any. Disjointness of the balls makes the index unique; ties on the rim
/// resolve to the nearer center with the boundary flag set.
pub fn region_index(
    u: &Field,
    epsilon: f64,
    config: &LocalizationConfig,
    spec: &PotentialSpec,
) -> Result<Option<RegionHit>, FieldError> {
    let q = barycenter(u, epsilon, config.r_tilde)?;
    Ok(region_of_point(&q, config, spec))
}

/// Region lookup for an already-computed barycenter.
pub fn region_of_point(q: &[f64], config: &LocalizationConfig, spec: &PotentialSpec) -> Option<RegionHit> {
    let rim_tol = 1e-9 * config.rho_tilde.max(1.0);
    let mut best: Option<(usize, f64)> = None;
    for (i, center) in spec.maxima().iter().enumerate() {
        let d = dist(q, center);
        if d <= config.rho_tilde + rim_tol {
            match best {
                Some((_, bd)) if bd <= d => {}
                _ => best = Some((i, d)),
            }
        }
    }
    best.map(|(index, d)| RegionHit { index, boundary: (d - config.rho_tilde).abs() <= rim_tol })
}

/// Membership in the core set: within half the separation radius of some
/// maximum. Low-energy states must land here.
pub fn in_core_set(q: &[f64], config: &LocalizationConfig, spec: &PotentialSpec) -> bool {
    spec.maxima().iter().any(|c| dist(q, c) <= 0.5 * config.rho_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    fn two_bump() -> PotentialSpec {
        build_potential(
            1,
            0.5,
            vec![
                Peak { center: vec![0.0], amplitude: 0.5, radius: 3.0 },
                Peak { center: vec![10.0], amplitude: 0.5, radius: 3.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_bump_construction() {
        let spec = build_potential(
            1,
            0.5,
            vec![Peak { center: vec![0.0], amplitude: 0.5, radius: 2.0 }],
        )
        .unwrap();
        assert_eq!(spec.multiplicity(), 1);
        assert_eq!(spec.h_max(), 1.0);
        assert_eq!(spec.h_infty(), 0.5);
        assert_eq!(spec.eval(&[0.0]), 1.0);
        assert_eq!(spec.eval(&[5.0]), 0.5);
        // Smooth positive bump in between.
        let v = spec.eval(&[1.0]);
        assert!(v > 0.5 && v < 1.0);
    }

    #[test]
    fn overlapping_supports_rejected() {
        let r = build_potential(
            1,
            0.5,
            vec![
                Peak { center: vec![0.0], amplitude: 0.5, radius: 3.0 },
                Peak { center: vec![4.0], amplitude: 0.5, radius: 3.0 },
            ],
        );
        assert!(matches!(r, Err(PotentialError::MaximaViolated(_))));
    }

    #[test]
    fn lower_peak_excluded_from_maxima() {
        let spec = build_potential(
            1,
            0.5,
            vec![
                Peak { center: vec![0.0], amplitude: 0.5, radius: 3.0 },
                Peak { center: vec![10.0], amplitude: 0.4, radius: 3.0 },
            ],
        )
        .unwrap();
        assert_eq!(spec.multiplicity(), 1);
        assert_eq!(spec.maxima()[0], vec![0.0]);
        assert_eq!(spec.h_max(), 1.0);
    }

    #[test]
    fn origin_must_be_a_maximum() {
        let r = build_potential(
            1,
            0.5,
            vec![
                Peak { center: vec![0.0], amplitude: 0.4, radius: 3.0 },
                Peak { center: vec![10.0], amplitude: 0.5, radius: 3.0 },
            ],
        );
        assert!(matches!(r, Err(PotentialError::MaximaViolated(_))));
        let r2 = build_potential(1, 0.5, vec![Peak { center: vec![3.0], amplitude: 0.5, radius: 1.0 }]);
        assert!(matches!(r2, Err(PotentialError::MaximaViolated(_))));
    }

    #[test]
    fn positivity_and_asymptote_guards() {
        // A dip deeper than the asymptote kills positivity.
        let r = build_potential(
            1,
            0.5,
            vec![
                Peak { center: vec![0.0], amplitude: 0.5, radius: 2.0 },
                Peak { center: vec![10.0], amplitude: -0.6, radius: 2.0 },
            ],
        );
        assert!(matches!(r, Err(PotentialError::BoundViolated { .. })));
        // All-negative amplitudes leave the asymptote as the supremum.
        let r2 = build_potential(1, 0.5, vec![Peak { center: vec![0.0], amplitude: -0.2, radius: 2.0 }]);
        assert!(matches!(r2, Err(PotentialError::AsymptoteViolated(_))));
    }

    #[test]
    fn desk_instance_geometry() {
        let spec = two_bump();
        assert_eq!(spec.multiplicity(), 2);
        assert_eq!(spec.maxima()[0], vec![0.0]);
        assert_eq!(spec.maxima()[1], vec![10.0]);
        let loc = default_localization(&spec);
        assert!((loc.rho_tilde - 4.9).abs() < 1e-12);
        assert!((loc.r_tilde - 15.9).abs() < 1e-12);
        // Balls disjoint and inside the clamp radius.
        assert!(2.0 * loc.rho_tilde < 10.0);
        assert!(10.0 + loc.rho_tilde < loc.r_tilde);
    }

    #[test]
    fn clamp_behavior() {
        let r = 2.0;
        assert_eq!(clamp_to_ball(&[1.0, 0.5], r), vec![1.0, 0.5]);
        let out = clamp_to_ball(&[4.0, 0.0], r);
        assert!((out[0] - 2.0).abs() < 1e-15 && out[1] == 0.0);
        // Continuity across the rim.
        let inside = clamp_to_ball(&[r - 1e-9, 0.0], r);
        let outside = clamp_to_ball(&[r + 1e-9, 0.0], r);
        assert!((inside[0] - outside[0]).abs() < 1e-8);
    }

    #[test]
    fn barycenter_even_profile_is_centered() {
        let grid = Grid::new(1, 256, 640.0).unwrap();
        let u = Field::gaussian(grid, &[0.0], 8.0);
        let q = barycenter(&u, 0.1, 15.9).unwrap();
        assert!(q[0].abs() < 1e-12, "barycenter {q:?}");
        assert!(barycenter(&Field::zeros(grid), 0.1, 15.9).is_err());
    }

    #[test]
    fn barycenter_tracks_translated_profiles() {
        let spec = two_bump();
        let loc = default_localization(&spec);
        let grid = Grid::new(1, 256, 640.0).unwrap();
        let eps = 0.1;
        // Profile concentrated at the second maximum, well inside the clamp plateau.
        let u = Field::gaussian(grid, &[10.0 / eps], 8.0);
        let q = barycenter(&u, eps, loc.r_tilde).unwrap();
        assert!((q[0] - 10.0).abs() < 1e-6, "barycenter {q:?}");
        // Translation covariance while both profiles stay inside the plateau.
        let v = u.translate(&[20.0]);
        let qv = barycenter(&v, eps, loc.r_tilde).unwrap();
        assert!((qv[0] - (10.0 + eps * 20.0)).abs() < 1e-6, "covariant barycenter {qv:?}");
    }

    #[test]
    fn barycenter_stays_in_clamp_ball() {
        let grid = Grid::new(1, 256, 640.0).unwrap();
        let r_tilde = 15.9;
        // Mass piled near the box edge, far outside the clamp plateau.
        let u = Field::gaussian(grid, &[250.0], 20.0);
        let q = barycenter(&u, 0.1, r_tilde).unwrap();
        let norm: f64 = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm <= r_tilde + 1e-12);
    }

    #[test]
    fn region_lookup() {
        let spec = two_bump();
        let loc = default_localization(&spec);
        let hit = region_of_point(&[0.3], &loc, &spec).unwrap();
        assert_eq!(hit.index, 0);
        assert!(!hit.boundary);
        let hit2 = region_of_point(&[10.0 - 0.2], &loc, &spec).unwrap();
        assert_eq!(hit2.index, 1);
        // The midpoint is farther than rho from both centers.
        assert!(region_of_point(&[5.0], &loc, &spec).is_none());
        // Rim point flagged.
        let rim = region_of_point(&[loc.rho_tilde], &loc, &spec).unwrap();
        assert!(rim.boundary);
        // Core set membership.
        assert!(in_core_set(&[1.0], &loc, &spec));
        assert!(!in_core_set(&[3.0], &loc, &spec));
        assert!(in_core_set(&[10.0 + 2.0], &loc, &spec));
    }

    #[test]
    fn sampled_coefficient_matches_eval() {
        let spec = two_bump();
        let grid = Grid::new(1, 64, 640.0).unwrap();
        let eps = 0.1;
        let coeff = spec.sample(grid, eps);
        for idx in [0usize, 10, 32, 63] {
            let x = grid.coords(idx);
            let direct = spec.eval(&[eps * x[0]]);
            assert_eq!(coeff.at(idx), direct);
        }
    }
}
