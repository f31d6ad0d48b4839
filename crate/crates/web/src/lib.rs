//! Browser bindings for the static demo page in `www/`.
//!
//! Each exported function takes plain numbers and strings and returns a JSON
//! string, so the page needs no glue beyond `JSON.parse`. The `*_json`
//! functions are ordinary Rust and are tested natively.

use num_complex::Complex64 as C64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use qbethe::bethe::{check_completeness, joint_eigenvectors, solve_bethe, SeedStrategy};
use qbethe::extras::check_hamiltonian;
use qbethe::linalg::poly_eval;
use qbethe::monodromy::{check_commuting_family, check_spin_flip};
use qbethe::{Chain, Sign, Spin, VerificationReport};

/// Largest Hilbert-space dimension the page may request.
pub const MAX_DIM: usize = 256;

fn chain(spin: &str, sites: u32) -> Result<(Spin, usize), String> {
    let spin: Spin = spin.parse().map_err(|e: qbethe::Error| e.to_string())?;
    let n = sites as usize;
    let chain = Chain::new(spin, n).map_err(|e| e.to_string())?;
    if n == 0 || chain.dim() > MAX_DIM {
        return Err(format!("chain dimension must be between 2 and {MAX_DIM}"));
    }
    Ok((spin, n))
}

fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Serialize)]
struct TrajectoryPoint {
    phi: f64,
    solutions: Vec<Vec<[f64; 2]>>,
}

/// Bethe roots of every `Q_+` eigenstate with `magnons` roots, for real twists
/// from `phi_from` to `phi_to` in `steps` steps.
pub fn root_trajectories_json(
    spin: &str,
    sites: u32,
    magnons: u32,
    phi_from: f64,
    phi_to: f64,
    steps: u32,
) -> Result<String, String> {
    let (spin, n) = chain(spin, sites)?;
    let steps = steps.clamp(1, 200);
    let mut out = Vec::new();
    for k in 0..=steps {
        let phi = phi_from + (phi_to - phi_from) * k as f64 / steps as f64;
        let sols = match solve_bethe(
            Sign::Plus,
            magnons as usize,
            C64::new(phi, 0.0),
            spin,
            n,
            &SeedStrategy::Spectrum,
        ) {
            Ok(s) => s,
            // singular or degenerate twists are skipped, the curve just has a gap
            Err(_) => continue,
        };
        out.push(TrajectoryPoint {
            phi,
            solutions: sols.iter().map(|b| b.roots.iter().map(|&z| pair(z)).collect()).collect(),
        });
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    sector: usize,
    plus_roots: Vec<[f64; 2]>,
    minus_roots: Vec<[f64; 2]>,
    plus: Vec<[f64; 2]>,
    minus: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Curves {
    y: Vec<f64>,
    states: Vec<Curve>,
}

/// Stripped eigenvalues `Π(y - z^±)` of both Q-operators on a real grid, one curve per eigenvector.
pub fn q_curves_json(
    spin: &str,
    sites: u32,
    phi_re: f64,
    phi_im: f64,
    y_min: f64,
    y_max: f64,
    points: u32,
) -> Result<String, String> {
    let (spin, n) = chain(spin, sites)?;
    let points = points.clamp(2, 2000) as usize;
    let ys: Vec<f64> = (0..points)
        .map(|k| y_min + (y_max - y_min) * k as f64 / (points - 1) as f64)
        .collect();
    let eigen = joint_eigenvectors(C64::new(phi_re, phi_im), spin, n).map_err(|e| e.to_string())?;
    let states = eigen
        .iter()
        .map(|e| Curve {
            sector: e.magnons,
            plus_roots: e.plus_roots.iter().map(|&z| pair(z)).collect(),
            minus_roots: e.minus_roots.iter().map(|&z| pair(z)).collect(),
            plus: ys.iter().map(|&y| pair(poly_eval(&e.plus_poly, C64::new(y, 0.0)))).collect(),
            minus: ys.iter().map(|&y| pair(poly_eval(&e.minus_poly, C64::new(y, 0.0)))).collect(),
        })
        .collect();
    serde_json::to_string(&Curves { y: ys, states }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SummaryLine {
    identity: String,
    residual: f64,
    pass: bool,
}

/// A short verification run: commuting family, spin flip, completeness and,
/// for spin 1/2, the Hamiltonian.
pub fn verify_summary_json(spin: &str, sites: u32, phi_re: f64, phi_im: f64, tol: f64) -> Result<String, String> {
    let (spin, n) = chain(spin, sites)?;
    let phi = C64::new(phi_re, phi_im);
    let ys = [C64::new(0.31, 0.17), C64::new(-0.62, 0.05), C64::new(1.13, -0.41)];
    let mut reports: Vec<VerificationReport> = Vec::new();
    let run = |r: qbethe::Result<VerificationReport>| r.map_err(|e| e.to_string());
    reports.push(run(check_commuting_family(spin, n, phi, &ys, tol))?);
    reports.push(run(check_spin_flip(spin, n, phi, ys[0], tol))?);
    reports.push(run(check_completeness(phi, spin, n, tol))?);
    if spin == Spin::HALF && n >= 2 {
        reports.push(run(check_hamiltonian(n, phi, &ys, tol))?);
    }
    let lines: Vec<SummaryLine> = reports
        .into_iter()
        .map(|r| SummaryLine {
            identity: r.identity,
            residual: r.residual,
            pass: r.pass,
        })
        .collect();
    serde_json::to_string(&lines).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn root_trajectories(
    spin: &str,
    sites: u32,
    magnons: u32,
    phi_from: f64,
    phi_to: f64,
    steps: u32,
) -> Result<String, JsValue> {
    root_trajectories_json(spin, sites, magnons, phi_from, phi_to, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn q_curves(
    spin: &str,
    sites: u32,
    phi_re: f64,
    phi_im: f64,
    y_min: f64,
    y_max: f64,
    points: u32,
) -> Result<String, JsValue> {
    q_curves_json(spin, sites, phi_re, phi_im, y_min, y_max, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn verify_summary(spin: &str, sites: u32, phi_re: f64, phi_im: f64, tol: f64) -> Result<String, JsValue> {
    verify_summary_json(spin, sites, phi_re, phi_im, tol).map_err(|e| JsValue::from_str(&e))
}
