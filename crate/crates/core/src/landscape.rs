//! Scalar analysis of the constrained energy landscape.
//!
//! For mass level `a` (the constraint is ‖u‖₂² = a²) the energy of any
//! admissible state is bounded below by `g(‖∇u‖₂)` where
//!
//! ```text
//! g(r) = r² w(r),
//! w(r) = 1/2 − (1/q)·h_max·C_q^q·a^{q(1−γ_q)}·r^{qγ_q−2}
//!            − (η/p)·C_p^p·a^{p(1−γ_p)}·r^{pγ_p−2},
//! ```
//!
//! with `γ_t = N/2 − N/t` and `C_{N,t}` the best constant of the
//! Gagliardo–Nirenberg interpolation inequality
//! ‖u‖_t ≤ C_{N,t}·‖u‖₂^{1−γ_t}·‖∇u‖₂^{γ_t}.
//!
//! When the mass–coupling smallness condition holds, `w` has a positive
//! maximum at a unique `r₀` and exactly two zeros `R₀ < r₀ < R₁`. The
//! smooth truncation `τ` equals 1 below `R₀` and 0 above `R₁`; capping the
//! supercritical term with `τ(‖∇u‖₂)` makes the constrained functional
//! bounded below while leaving it untouched on `{‖∇u‖₂ ≤ R₀}`.

use once_cell::sync::Lazy;
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

/// Absolute tolerance on `w` at the reported zeros.
pub const TOL_ROOT: f64 = 1e-10;
/// Bisection terminates once the bracket width falls below this relative size.
pub const REL_ROOT_WIDTH: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("exponent t = {0} must be strictly greater than 2")]
    ExponentTooSmall(f64),
    #[error("exponent t = {t} exceeds the critical exponent {crit} for dimension {n}")]
    ExponentSupercritical { t: f64, crit: f64, n: u32 },
    #[error("dimension must satisfy N >= 3 for the critical embedding, got {0}")]
    DimensionTooSmall(u32),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("the lower-bound profile has no positive peak (max {0:.6e} <= 0): no zeros exist")]
    NoRoots(f64),
    #[error("invalid problem parameters: {0}")]
    BadParams(String),
    #[error("shooting solver failed to bracket the ground state for N={n}, t={t}")]
    ShootingFailed { n: u32, t: f64 },
}

/// All scalar data of the stationary problem.
///
/// Fields are public; [`ProblemParams::validate`] checks the admissibility
/// box: `2 < q < 2 + 4/N < p`, with `p ≤ 2N/(N−2)` in dimension `N ≥ 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    /// Spatial dimension.
    pub n: u32,
    /// Mass level: the constraint reads ‖u‖₂² = a².
    pub a: f64,
    /// Dilation of the coefficient function, h(εx).
    pub epsilon: f64,
    /// Coupling of the supercritical term.
    pub eta: f64,
    /// Supercritical exponent.
    pub p: f64,
    /// Subcritical exponent.
    pub q: f64,
}

impl ProblemParams {
    pub fn new(n: u32, a: f64, epsilon: f64, eta: f64, p: f64, q: f64) -> Result<Self, LandscapeError> {
        let params = Self { n, a, epsilon, eta, p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), LandscapeError> {
        let bad = |msg: String| Err(LandscapeError::BadParams(msg));
        if self.n < 1 {
            return bad(format!("dimension must be >= 1, got {}", self.n));
        }
        if !(self.a > 0.0) || !(self.epsilon > 0.0) || !(self.eta > 0.0) {
            return bad(format!(
                "a, epsilon, eta must be positive, got a={}, epsilon={}, eta={}",
                self.a, self.epsilon, self.eta
            ));
        }
        let mass_crit = 2.0 + 4.0 / self.n as f64;
        if !(self.q > 2.0 && self.q < mass_crit) {
            return bad(format!("q = {} must lie in (2, {})", self.q, mass_crit));
        }
        if !(self.p > mass_crit) {
            return bad(format!("p = {} must exceed {}", self.p, mass_crit));
        }
        if !self.p.is_finite() {
            return bad("p must be finite".into());
        }
        if let Some(crit) = self.sobolev_critical() {
            if self.p > crit * (1.0 + 1e-12) {
                return bad(format!("p = {} exceeds the critical exponent {}", self.p, crit));
            }
        }
        Ok(())
    }

    /// 2N/(N−2) for N ≥ 3, `None` otherwise.
    pub fn sobolev_critical(&self) -> Option<f64> {
        (self.n >= 3).then(|| 2.0 * self.n as f64 / (self.n as f64 - 2.0))
    }

    /// Whether p sits exactly at the critical exponent (relative tolerance 1e−12).
    pub fn is_critical(&self) -> bool {
        self.sobolev_critical()
            .map(|c| (self.p - c).abs() <= 1e-12 * c)
            .unwrap_or(false)
    }
}

/// Interpolation exponent γ_t = N/2 − N/t.
pub fn gamma(t: f64, n: u32) -> Result<f64, LandscapeError> {
    if !(t > 2.0) {
        return Err(LandscapeError::ExponentTooSmall(t));
    }
    let nf = n as f64;
    Ok(nf / 2.0 - nf / t)
}

/// Best constant of the critical Sobolev embedding for N ≥ 3,
/// S = inf ‖∇u‖₂² / ‖u‖_{2*}², in closed form from the extremal bubble
/// profile (1 + |x|²)^{−(N−2)/2}.
pub fn sobolev_constant(n: u32) -> Result<f64, LandscapeError> {
    if n < 3 {
        return Err(LandscapeError::DimensionTooSmall(n));
    }
    let nf = n as f64;
    // Surface area of the unit sphere in R^N.
    let omega = 2.0 * (std::f64::consts::PI.ln() * nf / 2.0 - ln_gamma(nf / 2.0)).exp();
    let ln_beta = |x: f64, y: f64| ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y);
    // Kinetic and critical-norm integrals of the bubble, radial part.
    let grad = (nf - 2.0).powi(2) * (omega / 2.0) * ln_beta(nf / 2.0 + 1.0, nf / 2.0 - 1.0).exp();
    let crit = (omega / 2.0) * ln_beta(nf / 2.0, nf / 2.0).exp();
    Ok(grad / crit.powf((nf - 2.0) / nf))
}

static GN_CACHE: Lazy<Mutex<HashMap<(u32, u64), f64>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Best constant `C_{N,t}` of ‖u‖_t ≤ C‖u‖₂^{1−γ_t}‖∇u‖₂^{γ_t}.
///
/// Computed from the positive radial ground state of −ΔQ + Q = Q^{t−1} by
/// shooting on Q(0) and quadrature of the optimizing quotient. At the
/// critical exponent (N ≥ 3, t = 2N/(N−2)) the equation has no ground state
/// and the constant equals S^{−1/2}.
pub fn gn_constant(n: u32, t: f64) -> Result<f64, LandscapeError> {
    if n < 1 {
        return Err(LandscapeError::BadParams(format!("dimension {n} < 1")));
    }
    if !(t > 2.0) {
        return Err(LandscapeError::ExponentTooSmall(t));
    }
    if !t.is_finite() {
        return Err(LandscapeError::BadParams("exponent must be finite".into()));
    }
    if n >= 3 {
        let crit = 2.0 * n as f64 / (n as f64 - 2.0);
        if t > crit * (1.0 + 1e-12) {
            return Err(LandscapeError::ExponentSupercritical { t, crit, n });
        }
        if (t - crit).abs() <= 1e-12 * crit {
            return Ok(sobolev_constant(n)?.powf(-0.5));
        }
    }
    let key = (n, t.to_bits());
    if let Some(&c) = GN_CACHE.lock().unwrap().get(&key) {
        return Ok(c);
    }
    let gs = shooting::ground_state(n, t)?;
    let gamma_t = gamma(t, n)?;
    let c = gs.lt_norm(t) / (gs.l2_norm().powf(1.0 - gamma_t) * gs.grad_norm().powf(gamma_t));
    GN_CACHE.lock().unwrap().insert(key, c);
    Ok(c)
}

/// Interpolation constants entering the lower-bound profile.
#[derive(Debug, Clone, Copy)]
pub struct GnConstants {
    pub gamma_q: f64,
    pub gamma_p: f64,
    pub c_q: f64,
    pub c_p: f64,
    /// Best Sobolev constant; present only when p is critical.
    pub s: Option<f64>,
}

impl GnConstants {
    pub fn compute(params: &ProblemParams) -> Result<Self, LandscapeError> {
        params.validate()?;
        let gamma_q = gamma(params.q, params.n)?;
        let gamma_p = gamma(params.p, params.n)?;
        let c_q = gn_constant(params.n, params.q)?;
        let (c_p, s) = if params.is_critical() {
            let s = sobolev_constant(params.n)?;
            (s.powf(-0.5), Some(s))
        } else {
            (gn_constant(params.n, params.p)?, None)
        };
        Ok(Self { gamma_q, gamma_p, c_q, c_p, s })
    }
}

/// The composite coefficient B governing the peak value of `w`:
/// w(r₀) = 1/2 − B·(h_max·a^{q(1−γ_q)})^{(pγ_p−2)/(pγ_p−qγ_q)}·(η·a^{p(1−γ_p)})^{(2−qγ_q)/(pγ_p−qγ_q)}.
pub fn coefficient_b(params: &ProblemParams, consts: &GnConstants) -> f64 {
    let qg = params.q * consts.gamma_q;
    let pg = params.p * consts.gamma_p;
    let e_hi = (pg - 2.0) / (pg - qg);
    let e_lo = (2.0 - qg) / (pg - qg);
    (pg - qg) / (2.0 - qg)
        * ((2.0 - qg) / (pg - 2.0)).powf(e_hi)
        * (consts.c_q.powf(params.q) / params.q).powf(e_hi)
        * (consts.c_p.powf(params.p) / params.p).powf(e_lo)
}

/// Lower bound for the constrained energy as a function of the gradient norm.
///
/// `w(r) = 1/2 − cq·r^{eq} − cp·r^{ep}` with `eq = qγ_q − 2 < 0` and
/// `ep = pγ_p − 2 > 0`; `g(r) = r²·w(r)` bounds the energy from below on the
/// mass sphere, and `g_bar` is the analogous bound for the truncated
/// functional.
#[derive(Debug, Clone, Copy)]
pub struct EnergyFloor {
    cq: f64,
    cp: f64,
    eq: f64,
    ep: f64,
}

impl EnergyFloor {
    pub fn new(params: &ProblemParams, h_max: f64, consts: &GnConstants) -> Self {
        let qg = params.q * consts.gamma_q;
        let pg = params.p * consts.gamma_p;
        Self {
            cq: h_max / params.q
                * consts.c_q.powf(params.q)
                * params.a.powf(params.q * (1.0 - consts.gamma_q)),
            cp: params.eta / params.p
                * consts.c_p.powf(params.p)
                * params.a.powf(params.p * (1.0 - consts.gamma_p)),
            eq: qg - 2.0,
            ep: pg - 2.0,
        }
    }

    /// Same floor evaluated for a smaller mass level a₁ ≤ a (the exponents
    /// are unchanged; only the mass powers in the coefficients move).
    pub fn with_mass(params: &ProblemParams, h_max: f64, consts: &GnConstants, a1: f64) -> Self {
        let mut p1 = *params;
        p1.a = a1;
        Self::new(&p1, h_max, consts)
    }

    fn w_unchecked(&self, r: f64) -> f64 {
        0.5 - self.cq * r.powf(self.eq) - self.cp * r.powf(self.ep)
    }

    /// w(r); rejects r ≤ 0 (both power laws are singular or degenerate there).
    pub fn w(&self, r: f64) -> Result<f64, LandscapeError> {
        if !(r > 0.0) {
            return Err(LandscapeError::NonPositiveRadius(r));
        }
        Ok(self.w_unchecked(r))
    }

    pub fn w_prime(&self, r: f64) -> f64 {
        -self.cq * self.eq * r.powf(self.eq - 1.0) - self.cp * self.ep * r.powf(self.ep - 1.0)
    }

    /// g(r) = r²·w(r), extended by 0 at r = 0.
    pub fn g(&self, r: f64) -> f64 {
        if r == 0.0 {
            0.0
        } else {
            r * r * self.w_unchecked(r)
        }
    }

    /// Floor of the truncated functional: the supercritical term is capped
    /// by the truncation value.
    pub fn g_bar(&self, r: f64, profile: &TruncationProfile) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        0.5 * r * r - self.cq * r.powf(self.eq + 2.0) - profile.tau(r) * self.cp * r.powf(self.ep + 2.0)
    }

    /// The unique critical point of w, in closed form.
    pub fn peak_radius(&self) -> f64 {
        // w'(r) = 0  <=>  -cq·eq·r^{eq-1} = cp·ep·r^{ep-1}; eq < 0 < ep.
        ((-self.eq * self.cq) / (self.ep * self.cp)).powf(1.0 / (self.ep - self.eq))
    }

    /// Peak value w(r₀).
    pub fn peak_value(&self) -> f64 {
        self.w_unchecked(self.peak_radius())
    }

    /// The two zeros R₀ < r₀ < R₁ of w, by certified bracketing and bisection.
    ///
    /// w is strictly increasing on (0, r₀) and strictly decreasing on
    /// (r₀, ∞), so one sign change sits on each side of the peak whenever the
    /// peak value is positive.
    pub fn find_zeros(&self) -> Result<(f64, f64), LandscapeError> {
        let r0 = self.peak_radius();
        let w_max = self.w_unchecked(r0);
        if !(w_max > 0.0) {
            return Err(LandscapeError::NoRoots(w_max));
        }
        let lower = self.bracketed_zero(r0, 0.5)?;
        let upper = self.bracketed_zero(r0, 2.0)?;
        Ok((lower, upper))
    }

    // Geometric scan from the peak in the direction given by `factor`
    // until w changes sign, then bisection.
    fn bracketed_zero(&self, r_peak: f64, factor: f64) -> Result<f64, LandscapeError> {
        let mut inside = r_peak; // w > 0 here
        let mut outside = r_peak * factor;
        let limit = if factor < 1.0 { r_peak * 1e-8 } else { r_peak * 1e8 };
        while self.w_unchecked(outside) > 0.0 {
            inside = outside;
            outside *= factor;
            let escaped = if factor < 1.0 { outside < limit } else { outside > limit };
            if escaped {
                return Err(LandscapeError::NoRoots(self.w_unchecked(outside)));
            }
        }
        let (mut pos, mut neg) = (inside, outside);
        loop {
            let mid = 0.5 * (pos + neg);
            if (pos - neg).abs() <= REL_ROOT_WIDTH * mid || mid == pos || mid == neg {
                return Ok(mid);
            }
            if self.w_unchecked(mid) > 0.0 {
                pos = mid;
            } else {
                neg = mid;
            }
        }
    }
}

/// Mass–coupling smallness: the condition making the peak of `w` positive,
/// equivalently giving `g` exactly two positive zeros. Returns the flag and
/// the margin `1/(2B) − lhs` (positive iff the condition holds).
pub fn mass_coupling_smallness(params: &ProblemParams, h_max: f64, consts: &GnConstants) -> (bool, f64) {
    let qg = params.q * consts.gamma_q;
    let pg = params.p * consts.gamma_p;
    let b = coefficient_b(params, consts);
    let lhs = (h_max * params.a.powf(params.q * (1.0 - consts.gamma_q))).powf((pg - 2.0) / (pg - qg))
        * (params.eta * params.a.powf(params.p * (1.0 - consts.gamma_p))).powf((2.0 - qg) / (pg - qg));
    let margin = 1.0 / (2.0 * b) - lhs;
    (lhs < 1.0 / (2.0 * b), margin)
}

/// Additional threshold required at the critical exponent: r₀ must stay
/// below η^{−(N−2)/4}·S^{N/4}. Vacuously true (infinite margin) when p is
/// subcritical. Returns the flag and the margin (threshold − r₀).
pub fn critical_radius_condition(
    params: &ProblemParams,
    floor: &EnergyFloor,
    consts: &GnConstants,
) -> (bool, f64) {
    if !params.is_critical() {
        return (true, f64::INFINITY);
    }
    let s = consts.s.expect("critical parameters carry the Sobolev constant");
    let nf = params.n as f64;
    let threshold = params.eta.powf(-(nf - 2.0) / 4.0) * s.powf(nf / 4.0);
    let r0 = floor.peak_radius();
    (r0 < threshold, threshold - r0)
}

/// Smooth truncation: 1 below `r0`, 0 above `r1`, non-increasing C^∞ bridge
/// in between (the standard bump quotient).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationProfile {
    pub r0: f64,
    pub r1: f64,
}

impl TruncationProfile {
    pub fn new(r0: f64, r1: f64) -> Result<Self, LandscapeError> {
        if !(r0 > 0.0 && r1 > r0) {
            return Err(LandscapeError::BadParams(format!(
                "truncation interval must satisfy 0 < r0 < r1, got ({r0}, {r1})"
            )));
        }
        Ok(Self { r0, r1 })
    }

    /// τ(r) ∈ [0, 1]; exactly 1 for r ≤ r0 and exactly 0 for r ≥ r1.
    pub fn tau(&self, r: f64) -> f64 {
        if r <= self.r0 {
            return 1.0;
        }
        if r >= self.r1 {
            return 0.0;
        }
        let s = (r - self.r0) / (self.r1 - self.r0);
        // phi(1-s) / (phi(s) + phi(1-s)) with phi(x) = exp(-1/x):
        // equals 1/(1 + exp(1/(1-s) - 1/s)), strictly decreasing on (0, 1).
        1.0 / (1.0 + (1.0 / (1.0 - s) - 1.0 / s).exp())
    }

    /// Exact derivative of the implemented bridge; ≤ 0 everywhere, exactly 0
    /// outside the open transition interval.
    pub fn tau_prime(&self, r: f64) -> f64 {
        if r <= self.r0 || r >= self.r1 {
            return 0.0;
        }
        let width = self.r1 - self.r0;
        let s = (r - self.r0) / width;
        let arg = 1.0 / (1.0 - s) - 1.0 / s;
        let darg = 1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s);
        // d tau/ds = -darg * sigma(arg) * sigma(-arg), written with two
        // logistic factors so extreme arguments underflow instead of overflow.
        let sig_pos = 1.0 / (1.0 + arg.exp());
        let sig_neg = 1.0 / (1.0 + (-arg).exp());
        -darg * sig_pos * sig_neg / width
    }
}

/// All scalar outputs of the landscape analysis for one parameter set.
#[derive(Debug, Clone)]
pub struct LandscapeReport {
    pub params: ProblemParams,
    pub h_max: f64,
    pub gamma_q: f64,
    pub gamma_p: f64,
    pub c_q: f64,
    pub c_p: f64,
    pub sobolev: Option<f64>,
    pub b: f64,
    /// Unique critical point of w.
    pub r0: f64,
    /// Peak value w(r₀).
    pub w_max: f64,
    pub smallness_ok: bool,
    pub smallness_margin: f64,
    pub critical_ok: bool,
    pub critical_margin: f64,
    /// The zeros (R₀, R₁) of w; present iff the smallness condition holds.
    pub zeros: Option<(f64, f64)>,
}

impl LandscapeReport {
    pub fn compute(params: &ProblemParams, h_max: f64) -> Result<Self, LandscapeError> {
        if !(h_max > 0.0) {
            return Err(LandscapeError::BadParams(format!("h_max must be positive, got {h_max}")));
        }
        let consts = GnConstants::compute(params)?;
        let floor = EnergyFloor::new(params, h_max, &consts);
        let (smallness_ok, smallness_margin) = mass_coupling_smallness(params, h_max, &consts);
        let (critical_ok, critical_margin) = critical_radius_condition(params, &floor, &consts);
        let zeros = if smallness_ok { Some(floor.find_zeros()?) } else { None };
        Ok(Self {
            params: *params,
            h_max,
            gamma_q: consts.gamma_q,
            gamma_p: consts.gamma_p,
            c_q: consts.c_q,
            c_p: consts.c_p,
            sobolev: consts.s,
            b: coefficient_b(params, &consts),
            r0: floor.peak_radius(),
            w_max: floor.peak_value(),
            smallness_ok,
            smallness_margin,
            critical_ok,
            critical_margin,
            zeros,
        })
    }

    pub fn constants(&self) -> GnConstants {
        GnConstants {
            gamma_q: self.gamma_q,
            gamma_p: self.gamma_p,
            c_q: self.c_q,
            c_p: self.c_p,
            s: self.sobolev,
        }
    }

    pub fn floor(&self) -> EnergyFloor {
        EnergyFloor::new(&self.params, self.h_max, &self.constants())
    }

    /// Truncation profile spanning the two zeros; `None` when they do not exist.
    pub fn truncation_profile(&self) -> Option<TruncationProfile> {
        self.zeros.map(|(r0, r1)| TruncationProfile { r0, r1 })
    }

    /// Flat key = value report, 17 significant digits per scalar.
    pub fn to_report_string(&self) -> String {
        let mut pairs: Vec<(&str, String)> = vec![
            ("n", format!("{}", self.params.n)),
            ("a", format!("{:.16e}", self.params.a)),
            ("epsilon", format!("{:.16e}", self.params.epsilon)),
            ("eta", format!("{:.16e}", self.params.eta)),
            ("p", format!("{:.16e}", self.params.p)),
            ("q", format!("{:.16e}", self.params.q)),
            ("h_max", format!("{:.16e}", self.h_max)),
            ("gamma_q", format!("{:.16e}", self.gamma_q)),
            ("gamma_p", format!("{:.16e}", self.gamma_p)),
            ("C_q", format!("{:.16e}", self.c_q)),
            ("C_p", format!("{:.16e}", self.c_p)),
        ];
        if let Some(s) = self.sobolev {
            pairs.push(("S", format!("{s:.16e}")));
        }
        pairs.push(("B", format!("{:.16e}", self.b)));
        pairs.push(("r0", format!("{:.16e}", self.r0)));
        pairs.push(("w_max", format!("{:.16e}", self.w_max)));
        if let Some((lo, hi)) = self.zeros {
            pairs.push(("R0", format!("{lo:.16e}")));
            pairs.push(("R1", format!("{hi:.16e}")));
        }
        pairs.push(("smallness_ok", format!("{}", self.smallness_ok)));
        pairs.push(("smallness_margin", format!("{:.16e}", self.smallness_margin)));
        pairs.push(("critical_ok", format!("{}", self.critical_ok)));
        pairs.push(("critical_margin", format!("{:.16e}", self.critical_margin)));
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

mod shooting {
    //! Radial ground state of −Q″ − (N−1)/r·Q′ + Q = Q^{t−1} by shooting on
    //! Q(0). Too-large initial heights cross zero; too-small ones turn back
    //! up before decaying. The ground state sits on the boundary.

    use super::LandscapeError;
    use statrs::function::gamma::ln_gamma;

    const STEP: f64 = 1e-3;
    const R_MAX: f64 = 60.0;
    // Stop integrating the converged trajectory here: beyond this height the
    // bisection error (amplified like e^r) starts to dominate the tail.
    const Q_FLOOR: f64 = 1e-7;

    pub struct GroundState {
        pub n: u32,
        /// ∫ Q² r^{N−1} dr and friends.
        pub i2: f64,
        pub it: f64,
        pub igrad: f64,
    }

    impl GroundState {
        fn sphere_area(&self) -> f64 {
            let nf = self.n as f64;
            2.0 * (std::f64::consts::PI.ln() * nf / 2.0 - ln_gamma(nf / 2.0)).exp()
        }
        pub fn l2_norm(&self) -> f64 {
            (self.sphere_area() * self.i2).sqrt()
        }
        pub fn lt_norm(&self, t: f64) -> f64 {
            (self.sphere_area() * self.it).powf(1.0 / t)
        }
        pub fn grad_norm(&self) -> f64 {
            (self.sphere_area() * self.igrad).sqrt()
        }
    }

    // Odd power extension keeps the right-hand side finite if a trajectory
    // dips below zero inside a Runge-Kutta stage.
    fn pw(q: f64, e: f64) -> f64 {
        q.abs().powf(e - 1.0) * q
    }

    fn rhs(n: f64, t: f64, r: f64, q: f64, dq: f64) -> (f64, f64) {
        (dq, -(n - 1.0) / r * dq + q - pw(q, t - 1.0))
    }

    #[derive(PartialEq, Clone, Copy, Debug)]
    enum Outcome {
        Crossed,
        TurnedBack,
    }

    // Integrate from the series start; report each grid sample to `on_step`.
    fn integrate(n: u32, t: f64, alpha: f64, mut on_step: impl FnMut(f64, f64, f64) -> bool) -> Outcome {
        let nf = n as f64;
        let curv = (alpha - pw(alpha, t - 1.0)) / nf;
        let mut r = STEP;
        let mut q = alpha + 0.5 * curv * STEP * STEP;
        let mut dq = curv * STEP;
        if !on_step(r, q, dq) {
            return Outcome::TurnedBack;
        }
        while r < R_MAX {
            let h = STEP;
            let (k1, l1) = rhs(nf, t, r, q, dq);
            let (k2, l2) = rhs(nf, t, r + 0.5 * h, q + 0.5 * h * k1, dq + 0.5 * h * l1);
            let (k3, l3) = rhs(nf, t, r + 0.5 * h, q + 0.5 * h * k2, dq + 0.5 * h * l2);
            let (k4, l4) = rhs(nf, t, r + h, q + h * k3, dq + h * l3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            dq += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            r += h;
            if q <= 0.0 {
                return Outcome::Crossed;
            }
            if dq >= 0.0 {
                return Outcome::TurnedBack;
            }
            if !on_step(r, q, dq) {
                return Outcome::TurnedBack;
            }
        }
        Outcome::TurnedBack
    }

    fn classify(n: u32, t: f64, alpha: f64) -> Outcome {
        integrate(n, t, alpha, |_, _, _| true)
    }

    // Composite Simpson on a uniform grid; trapezoid fallback on the last
    // interval when the sample count is even.
    fn simpson(samples: &[f64], h: f64) -> f64 {
        if samples.len() < 2 {
            return 0.0;
        }
        let m = if samples.len() % 2 == 1 { samples.len() } else { samples.len() - 1 };
        let mut sum = samples[0] + samples[m - 1];
        for (i, &v) in samples.iter().enumerate().take(m - 1).skip(1) {
            sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        let mut total = sum * h / 3.0;
        if samples.len() % 2 == 0 {
            total += 0.5 * h * (samples[samples.len() - 2] + samples[samples.len() - 1]);
        }
        total
    }

    pub fn ground_state(n: u32, t: f64) -> Result<GroundState, LandscapeError> {
        // The zero-energy height (t/2)^{1/(t-2)} is a lower bound for the
        // ground-state height; trajectories just above 1 always turn back.
        let mut lo = 1.0 + 1e-9;
        let mut hi = 2.0 * (t / 2.0).powf(1.0 / (t - 2.0));
        let mut tries = 0;
        while classify(n, t, hi) == Outcome::TurnedBack {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(LandscapeError::ShootingFailed { n, t });
            }
        }
        if classify(n, t, lo) == Outcome::Crossed {
            return Err(LandscapeError::ShootingFailed { n, t });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (hi - lo) <= 1e-15 * mid || mid == lo || mid == hi {
                break;
            }
            match classify(n, t, mid) {
                Outcome::Crossed => hi = mid,
                Outcome::TurnedBack => lo = mid,
            }
        }
        let alpha = 0.5 * (lo + hi);

        // Final pass: record the trajectory down to Q_FLOOR and integrate
        // the quotient's three integrals with r^{N-1} weight.
        let nf = n as f64;
        let mut f2 = Vec::with_capacity(32_768);
        let mut ft = Vec::with_capacity(32_768);
        let mut fg = Vec::with_capacity(32_768);
        let mut last = (0.0, 0.0);
        // Contribution of [0, STEP] where the series holds: Q ~ alpha there.
        let head = |e: f64| alpha.powf(e) * STEP.powf(nf) / nf;
        integrate(n, t, alpha, |r, q, dq| {
            let w = r.powf(nf - 1.0);
            f2.push(w * q * q);
            ft.push(w * q.abs().powf(t));
            fg.push(w * dq * dq);
            last = (r, q);
            q > Q_FLOOR
        });
        let (r_stop, q_stop) = last;
        // Exponential tail beyond the cutoff: Q ~ q_stop · e^{-(r - r_stop)}.
        let tail2 = 0.5 * q_stop * q_stop * r_stop.powf(nf - 1.0);
        let tailt = q_stop.powf(t) / t * r_stop.powf(nf - 1.0);
        Ok(GroundState {
            n,
            i2: head(2.0) + simpson(&f2, STEP) + tail2,
            it: head(t) + simpson(&ft, STEP) + tailt,
            igrad: simpson(&fg, STEP) + tail2,
        })
    }
}
