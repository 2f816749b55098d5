use std::f64::consts::PI;

use serde::Serialize;
use twisted::circuit::{evolve_regions, linspace, outcome_probabilities, GateAngle, Sign, Snapshot};
use twisted::logic::{compare_predictions, discrimination_analysis, DiscriminationReport};
use twisted::tomography::{mle_reconstruct, setting_grid, simulate_counts, DensityMatrix, MleOptions};

#[derive(Debug, Serialize)]
pub struct RegionRow {
    pub snapshot: &'static str,
    /// `p00, p01, p10, p11`.
    pub probabilities: [f64; 4],
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub theta: f64,
    pub quantum: [f64; 4],
    /// Classical chain-model probability of the forbidden outcome.
    pub classical_forbidden: f64,
    pub divergence: f64,
}

#[derive(Debug, Serialize)]
pub struct CircuitView {
    pub sign: String,
    pub theta: f64,
    pub regions: Vec<RegionRow>,
    pub curve: Vec<CurvePoint>,
}

fn sign(s: &str) -> Result<Sign, String> {
    s.parse()
}

pub fn circuit(sign_str: &str, theta: f64, points: usize) -> Result<CircuitView, String> {
    let sign = sign(sign_str)?;
    if !theta.is_finite() {
        return Err("theta must be finite".into());
    }
    let states = evolve_regions(&sign.params(), GateAngle::new(theta));
    let regions = states
        .iter()
        .map(|(snap, psi)| {
            Ok(RegionRow { snapshot: snap.label(), probabilities: outcome_probabilities(psi).map_err(|e| e.to_string())?.as_array() })
        })
        .collect::<Result<_, String>>()?;
    let curve = compare_predictions(sign, &linspace(0.0, PI, points.clamp(2, 2000)))
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|c| CurvePoint {
            theta: c.theta,
            quantum: c.quantum.as_array(),
            classical_forbidden: c.classical.table.get(sign.trigger(), 1),
            divergence: c.divergence,
        })
        .collect();
    Ok(CircuitView { sign: sign.to_string(), theta, regions, curve })
}

#[derive(Debug, Serialize)]
pub struct TomographyView {
    pub fidelity: f64,
    pub iterations: usize,
    pub purity: f64,
    /// Real and imaginary parts, row-major.
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub target_re: Vec<Vec<f64>>,
}

/// Shots capped so a page click stays interactive.
pub const MAX_SHOTS: u64 = 10_000_000;

pub fn tomography(sign_str: &str, region: &str, theta: f64, shots: u64, seed: u64, noise: f64) -> Result<TomographyView, String> {
    let sign = sign(sign_str)?;
    let region: Snapshot = region.parse()?;
    if !matches!(region, Snapshot::I | Snapshot::II | Snapshot::III) {
        return Err("region must be I, II or III".into());
    }
    if !(1..=MAX_SHOTS).contains(&shots) {
        return Err(format!("shots must be in 1..={MAX_SHOTS}"));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err("noise must be in [0, 1]".into());
    }
    let err = |e: twisted::tomography::TomographyError| e.to_string();
    let psi = evolve_regions(&sign.params(), GateAngle::new(theta)).get(region).clone();
    let target = DensityMatrix::from_pure(&psi).map_err(err)?;
    let counts = simulate_counts(&target, &setting_grid(), shots, seed, (noise > 0.0).then_some(noise)).map_err(err)?;
    let res = mle_reconstruct(&counts, MleOptions::default()).map_err(err)?.with_target(&target).map_err(err)?;
    let grid = |m: &twisted::qcore::ComplexMatrix, f: fn(twisted::qcore::C64) -> f64| {
        (0..4).map(|i| (0..4).map(|j| f(m[(i, j)])).collect()).collect()
    };
    Ok(TomographyView {
        fidelity: res.fidelity_vs_target.unwrap_or(0.0),
        iterations: res.iterations,
        purity: res.rho.purity(),
        re: grid(res.rho.matrix(), |z| z.re),
        im: grid(res.rho.matrix(), |z| z.im),
        target_re: grid(target.matrix(), |z| z.re),
    })
}

pub fn discriminate(theta: f64) -> DiscriminationReport {
    discrimination_analysis(theta)
}
