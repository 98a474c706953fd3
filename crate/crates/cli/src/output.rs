//! Deterministic text renderings of run results.

use nls_core::dynamics::StabilityVerdict;
use nls_core::optimizer::{MinimizerRecord, MultiplicityReport};
use nls_core::potential::PotentialSpec;

fn vec_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

/// Summary table plus level ordering, one deterministic block.
pub fn records_table(report: &MultiplicityReport, spec: &PotentialSpec) -> String {
    let mut s = String::new();
    s.push_str("region  energy                  lambda                  |Q - center|  residual\n");
    for r in &report.records {
        let center = &spec.maxima()[r.region];
        let dev: f64 = r
            .barycenter
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        s.push_str(&format!(
            "{:<7} {:<23.16e} {:<23.16e} {:<13.6e} {:.6e}\n",
            r.region, r.energy, r.lambda, dev, r.residual
        ));
    }
    for (region, err) in &report.failures {
        s.push_str(&format!("{region:<7} FAILED: {err}\n"));
    }
    s.push_str(&format!("level_max = {:.16e}\n", report.ordering.level_max));
    s.push_str(&format!("level_infty = {:.16e}\n", report.ordering.level_infty));
    s.push_str(&format!("global_proxy = {:.16e}\n", report.ordering.global_proxy));
    if let Some(p) = report.ordering.probe_min {
        s.push_str(&format!("probe_min = {p:.16e}\n"));
    }
    s.push_str(&format!("gap = {:.16e}\n", report.ordering.gap));
    s.push_str(&format!("ordering_ok = {}\n", report.ordering.ordering_ok));
    s.push_str(&format!("rho_tilde = {:.16e}\n", report.localization.rho_tilde));
    s.push_str(&format!("r_tilde = {:.16e}\n", report.localization.r_tilde));
    for w in &report.warnings {
        s.push_str(&format!("warning = {w}\n"));
    }
    s
}

/// Sidecar for one saved minimizer.
pub fn record_meta(record: &MinimizerRecord, hash: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!("config_sha256 = {hash}\n"));
    s.push_str(&format!("region = {}\n", record.region));
    s.push_str(&format!("energy = {:.16e}\n", record.energy));
    s.push_str(&format!("lambda = {:.16e}\n", record.lambda));
    s.push_str(&format!("residual = {:.16e}\n", record.residual));
    s.push_str(&format!("grad_norm = {:.16e}\n", record.grad_norm));
    s.push_str(&format!("barycenter = {}\n", vec_text(&record.barycenter)));
    s.push_str(&format!("iterations = {}\n", record.iterations));
    s.push_str(&format!("boundary_fraction = {:.16e}\n", record.boundary_fraction));
    s
}

pub fn verdict_text(v: &StabilityVerdict) -> String {
    let mut s = String::new();
    s.push_str(&format!("verdict = {}\n", if v.pass { "PASS" } else { "FAIL" }));
    s.push_str(&format!("gamma = {:.16e}\n", v.gamma));
    s.push_str(&format!("theta = {:.16e}\n", v.theta));
    s.push_str(&format!("theta_translated = {:.16e}\n", v.theta_translated));
    s.push_str(&format!("theta_target = {:.16e}\n", v.theta_target));
    s.push_str(&format!("horizon = {:.16e}\n", v.horizon));
    s.push_str(&format!("guard_ok = {}\n", v.guard_ok));
    s
}
