//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use qbethe::bethe::{
    bethe_vector, check_completeness, check_onshell_action, joint_eigenvectors, scaled_bethe_residual,
    solve_bethe, BetheRoots, SeedStrategy,
};
use qbethe::extras::{
    check_equator_relation, check_hamiltonian, equator_cutoff, equator_pairs, equator_partial_sum, hamiltonian,
};
use qbethe::fcr::{
    check_abcd_fcr, check_adc_action, check_curious_identity, check_f1_and_gcof, check_g_recursion,
    check_offshell_decomposition, check_q_fcr, ensure_generic, unwanted_vector,
};
use qbethe::lax::{check_all_relations, l_fund, l_osc, r_spm};
use qbethe::linalg::eigenvalues;
use qbethe::monodromy::{check_spin_flip, q_monodromy};
use qbethe::weyl::check_trace_oracle;
use qbethe::{Chain, Sign, Spin, VerificationReport, WeylPoly};

const SPINS: [Spin; 3] = [Spin::HALF, Spin::ONE, Spin::THREE_HALVES];

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn point(r: &mut StdRng) -> C64 {
    C64::new(r.gen_range(-1.5..1.5), r.gen_range(-1.0..1.0))
}

fn generic_roots(r: &mut StdRng, k: usize) -> Vec<C64> {
    loop {
        let roots: Vec<C64> = (0..k).map(|_| point(r)).collect();
        if ensure_generic(&roots).is_ok() {
            return roots;
        }
    }
}

struct Tally {
    worst: f64,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    fn value(&mut self, label: impl Into<String>, residual: f64, tol: f64) {
        if residual.is_nan() || self.worst < residual {
            self.worst = residual;
        }
        if !(residual < tol) {
            self.failures.push(format!("{}: {residual:e} >= {tol:e}", label.into()));
        }
    }

    fn report(&mut self, r: &VerificationReport, tol: f64) {
        self.value(r.identity.clone(), r.residual, tol);
    }

    fn condition(&mut self, label: impl Into<String>, ok: bool) {
        if !ok {
            self.failures.push(label.into());
        }
    }

    fn finish(self, number: u32, title: &str, started: Instant, budget: Duration) {
        let elapsed = started.elapsed();
        let mut failures = self.failures;
        if elapsed > budget {
            failures.push(format!("runtime {elapsed:.1?} over budget {budget:.0?}"));
        }
        let status = if failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "criterion {number:>2} {status} {title}: worst residual {:.2e}, {:.2?}",
            self.worst, elapsed
        );
        for f in failures.iter().take(10) {
            println!("    {f}");
        }
        assert!(failures.is_empty(), "criterion {number} failed");
    }
}

#[test]
fn criterion_01_yang_baxter_and_unitarity() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(101);
    for spin in SPINS {
        for _ in 0..20 {
            let (x, y) = (point(&mut r), point(&mut r));
            for rep in check_all_relations(x, y, spin, 1e-10).unwrap() {
                tally.report(&rep, 1e-10);
            }
        }
    }
    tally.finish(1, "local Yang-Baxter, RTT and unitarity relations", t0, Duration::from_secs(30));
}

#[test]
fn criterion_02_exchange_relations() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(202);
    for (spin, n) in [(Spin::HALF, 2), (Spin::HALF, 3), (Spin::ONE, 2)] {
        for _ in 0..10 {
            let (x, y) = (point(&mut r), point(&mut r));
            tally.report(&check_abcd_fcr(spin, n, x, y, 1e-10).unwrap(), 1e-10);
            for sign in [Sign::Plus, Sign::Minus] {
                tally.report(&check_q_fcr(sign, spin, n, x, y, 1e-10).unwrap(), 1e-10);
            }
        }
    }
    tally.finish(2, "monodromy exchange relations", t0, Duration::from_secs(120));
}

#[test]
fn criterion_03_bethe_eigenvectors_and_completeness() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(303);
    for (spin, n) in [(Spin::HALF, 2), (Spin::HALF, 3), (Spin::HALF, 4), (Spin::ONE, 2)] {
        let chain = Chain::new(spin, n).unwrap();
        for phi in [C64::new(0.3, 0.0), C64::new(0.7, 0.0)] {
            let ys: Vec<C64> = (0..5).map(|_| point(&mut r)).collect();
            let eigen = joint_eigenvectors(phi, spin, n).unwrap();
            for m in 0..=chain.max_magnons() {
                let count = eigen.iter().filter(|e| e.magnons == m).count();
                tally.condition(format!("sector {m} count {count}"), count == chain.sector_dim(m));
            }
            for e in &eigen {
                for (sign, roots) in [(Sign::Plus, &e.plus_roots), (Sign::Minus, &e.minus_roots)] {
                    let b = BetheRoots::new(sign, phi, roots.clone());
                    tally.value("bethe residual", scaled_bethe_residual(&b, spin, n), 1e-9);
                    let rep = check_onshell_action(&b, spin, n, &ys, 1e-8).unwrap();
                    tally.report(&rep, 1e-8);
                }
            }
            tally.report(&check_completeness(phi, spin, n, 1e-8).unwrap(), 1e-8);
        }
    }
    tally.finish(3, "on-shell Bethe vectors and completeness", t0, Duration::from_secs(180));
}

#[test]
fn criterion_04_offshell_decomposition() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(404);
    for (spin, n) in [(Spin::HALF, 2), (Spin::HALF, 3), (Spin::ONE, 2), (Spin::ONE, 3)] {
        for m in 1..=2 {
            for _ in 0..3 {
                let roots = generic_roots(&mut r, m);
                let (y, phi) = (point(&mut r), C64::new(r.gen_range(0.1..1.4), 0.0));
                tally.report(&check_offshell_decomposition(y, &roots, phi, spin, n, 1e-9).unwrap(), 1e-9);
                let v = unwanted_vector(y, &roots, phi, spin, n).unwrap();
                let rev: Vec<C64> = roots.iter().rev().copied().collect();
                let w = unwanted_vector(y, &rev, phi, spin, n).unwrap();
                let scale = v.norm().max(1.0);
                tally.value("unwanted vector symmetry", (&v - &w).norm() / scale, 1e-10);
            }
        }
    }
    tally.finish(4, "off-shell action and unwanted terms", t0, Duration::from_secs(120));
}

#[test]
fn criterion_05_recursion_and_onshell_coefficients() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(505);
    for p in 1..=6 {
        tally.report(&check_curious_identity(&generic_roots(&mut r, p), 1e-9).unwrap(), 1e-9);
    }
    for (spin, n) in [(Spin::HALF, 3), (Spin::ONE, 2)] {
        for m in 1..=4 {
            tally.report(&check_g_recursion(&generic_roots(&mut r, m), spin, n, 1e-9).unwrap(), 1e-9);
        }
    }
    for (spin, n, m) in [(Spin::HALF, 3, 1), (Spin::HALF, 4, 2), (Spin::HALF, 3, 3), (Spin::ONE, 2, 2)] {
        for phi in [C64::new(0.3, 0.0), C64::new(0.7, 0.0)] {
            for b in solve_bethe(Sign::Plus, m, phi, spin, n, &SeedStrategy::Spectrum).unwrap() {
                let rep = check_f1_and_gcof(point(&mut r), &b.roots, phi, spin, n, true, 1e-8).unwrap();
                tally.report(&rep, 1e-8);
            }
        }
    }
    tally.finish(5, "coefficient recursion and on-shell vanishing", t0, Duration::from_secs(120));
}

#[test]
fn criterion_06_action_coefficients() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(606);
    for (spin, n) in [(Spin::HALF, 2), (Spin::HALF, 3), (Spin::ONE, 2), (Spin::ONE, 3)] {
        for m in 0..=2 {
            for _ in 0..3 {
                let all = generic_roots(&mut r, m + 1);
                let rep = check_adc_action(spin, n, all[0], &all[1..], 1e-10).unwrap();
                tally.report(&rep, 1e-10);
            }
        }
    }
    tally.finish(6, "A, D, C action coefficients", t0, Duration::from_secs(60));
}

#[test]
fn criterion_07_spin_flip() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(707);
    for spin in SPINS {
        for n in 1..=3 {
            if spin == Spin::THREE_HALVES && n == 3 {
                continue;
            }
            for phi in [C64::new(0.3, 0.0), C64::new(0.7, -0.2)] {
                tally.report(&check_spin_flip(spin, n, phi, point(&mut r), 1e-11).unwrap(), 1e-11);
            }
        }
    }
    tally.finish(7, "spin-flip symmetry of Q-operators", t0, Duration::from_secs(60));
}

#[test]
fn criterion_08_hamiltonian() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(808);
    let ys: Vec<C64> = (0..3).map(|_| point(&mut r)).collect();
    for phi in [C64::new(0.3, 0.0), C64::new(0.7, 0.0)] {
        tally.report(&check_hamiltonian(3, phi, &ys, 1e-10).unwrap(), 1e-10);
    }
    let h = hamiltonian(2, C64::new(0.0, 0.0)).unwrap();
    let mut ev: Vec<f64> = eigenvalues(h.matrix()).unwrap().iter().map(|z| z.re).collect();
    ev.sort_by(f64::total_cmp);
    let dev = ev.iter().zip([0.0, 0.0, 0.0, 8.0]).fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    tally.value("two-site spectrum", dev, 1e-10);
    tally.finish(8, "twisted Hamiltonian", t0, Duration::from_secs(60));
}

#[test]
fn criterion_09_equator_relation() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(909);
    let phi = C64::new(0.4, -0.3);
    for n in 1..=3 {
        for pair in equator_pairs(phi, Spin::HALF, n).unwrap() {
            let ys: Vec<C64> = (0..3).map(|_| point(&mut r)).collect();
            tally.report(&check_equator_relation(&pair, &ys, 1e-7).unwrap(), 1e-7);
            // the certified cutoff must leave a tail below the requested accuracy
            for &y in ys.iter().chain(&pair.roots_plus) {
                let cut = equator_cutoff(y, &pair, 1e-10).unwrap();
                let short = equator_partial_sum(y, &pair, cut).unwrap();
                let long = equator_partial_sum(y, &pair, 3 * cut + 200).unwrap();
                tally.value("tail bound", (short - long).norm() / 1e-10, 1.0);
            }
        }
    }
    tally.finish(9, "series relation across the equator", t0, Duration::from_secs(60));
}

#[test]
fn criterion_10_trace_oracle() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let mut r = rng(1010);
    let xs = [
        C64::new(0.5, 0.0),
        C64::new(0.0, 0.9),
        C64::new(-0.9, 0.0),
        C64::from_polar(0.9, 0.8),
        C64::from_polar(0.3, -2.0),
    ];
    let mut polys: Vec<WeylPoly> = Vec::new();
    for spin in SPINS {
        polys.push(r_spm(Sign::Plus, point(&mut r), spin));
        polys.push(r_spm(Sign::Minus, point(&mut r), spin));
        polys.push(l_fund(point(&mut r), spin).to_weyl());
    }
    polys.push(l_osc(Sign::Plus, point(&mut r)).to_weyl());
    polys.push(l_osc(Sign::Minus, point(&mut r)).to_weyl());
    for (spin, n) in [(Spin::HALF, 2), (Spin::HALF, 3), (Spin::ONE, 2)] {
        for sign in [Sign::Plus, Sign::Minus] {
            polys.push(q_monodromy(sign, point(&mut r), spin, n).unwrap().poly);
        }
    }
    for w in &polys {
        for &x in &xs {
            tally.report(&check_trace_oracle(w, x, 1e-9).unwrap(), 1e-9);
        }
    }
    tally.finish(10, "regulated trace against truncated Fock sum", t0, Duration::from_secs(60));
}

#[test]
fn criterion_11_deterministic_spectrum_output() {
    let t0 = Instant::now();
    let mut tally = Tally::new();
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qbethe"))
            .args(["spectrum", "--spin", "1/2", "--sites", "3", "--phi", "0.3", "--seed", "42", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        (status.code(), std::fs::read(&path).unwrap_or_default())
    };
    let (code_a, a) = run("a.json");
    let (code_b, b) = run("b.json");
    tally.condition(format!("exit codes {code_a:?} {code_b:?}"), code_a == Some(0) && code_b == Some(0));
    tally.condition("non-empty output", !a.is_empty());
    tally.condition("byte-identical output", a == b);
    tally.finish(11, "deterministic spectrum export", t0, Duration::from_secs(60));
}

#[test]
fn bethe_vectors_of_minus_family_are_nonzero() {
    let phi = C64::new(0.3, 0.0);
    for b in solve_bethe(Sign::Minus, 2, phi, Spin::HALF, 3, &SeedStrategy::Spectrum).unwrap() {
        assert!(bethe_vector(&b, Spin::HALF, 3).unwrap().norm() > 0.0);
    }
}
