//! Command implementations for the `qbethe` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Map, Value};

use qbethe::bethe::{
    bethe_ratio_residual, check_completeness, check_onshell_action, joint_eigenvectors, scaled_bethe_residual,
    solve_bethe, BetheRoots, SeedStrategy,
};
use qbethe::extras::{check_equator_relation, check_hamiltonian, equator_pairs, hamiltonian};
use qbethe::fcr::{
    check_abcd_fcr, check_adc_action, check_curious_identity, check_f1_and_gcof, check_g_recursion,
    check_offshell_decomposition, check_q_fcr, ensure_generic,
};
use qbethe::lax::{check_all_relations, check_lax_spin_flip};
use qbethe::linalg::{eigenvalues, poly_eval};
use qbethe::monodromy::{check_commuting_family, check_spin_flip, q_monodromy, transfer_matrix, twist_prefactor};
use qbethe::report::complex_json;
use qbethe::weyl::check_trace_oracle;
use qbethe::{Chain, Error, Sign, Spin, VerificationReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "qbethe", version, about = "Q-operators and Bethe ansatz for the twisted XXX_s chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Spin of each site: 1/2, 1, 3/2, ...
    #[arg(long, global = true, default_value = "1/2")]
    pub spin: String,

    /// Number of sites N.
    #[arg(long, global = true, default_value_t = 2)]
    pub sites: usize,

    /// Twist angle, real or complex as `a+bi`.
    #[arg(long, global = true, default_value = "0.3", allow_hyphen_values = true)]
    pub phi: String,

    /// Number of Bethe roots (bethe) or magnon sector filter (spectrum).
    #[arg(long, global = true)]
    pub magnons: Option<usize>,

    /// Which Q-operator the bethe command solves for: + or -.
    #[arg(long, global = true, default_value = "+", allow_hyphen_values = true)]
    pub sign: String,

    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tolerance: f64,

    /// Number of random spectral points per check.
    #[arg(long, global = true, default_value_t = 5)]
    pub samples: usize,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Run the full identity suite.
    Verify,
    /// Joint spectrum of T and Q± with the roots of both Q-functions.
    Spectrum,
    /// Solve the Bethe equations and check the on-shell eigenvalue relations.
    Bethe,
    /// Series relation between the roots of Q+ and Q- (needs Im φ < 0).
    Equator,
    /// Twisted spin-1/2 Hamiltonian, its spectrum and commutation checks.
    Hamiltonian,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Spectrum => "spectrum",
            Command::Bethe => "bethe",
            Command::Equator => "equator",
            Command::Hamiltonian => "hamiltonian",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Validated run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub spin: Spin,
    pub n_sites: usize,
    pub phi: C64,
    pub magnons: Option<usize>,
    pub sign: Sign,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularTwist
            | Error::InvalidSpin(_)
            | Error::InvalidParameter(_)
            | Error::DivergentSeries(_)
            | Error::DivergentTrace(_) => Failure::Config(e.to_string()),
            other => Failure::Solver(other.to_string()),
        }
    }
}

pub fn parse_phi(text: &str) -> Result<C64, String> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    cleaned
        .parse::<C64>()
        .map_err(|_| format!("cannot parse phi {text:?}, expected a+bi"))
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, String> {
        let spin: Spin = cli.spin.parse().map_err(|e: Error| e.to_string())?;
        let phi = parse_phi(&cli.phi)?;
        if !(phi.re.is_finite() && phi.im.is_finite()) {
            return Err("phi must be finite".into());
        }
        if cli.sites == 0 {
            return Err("--sites must be at least 1".into());
        }
        if !(cli.tolerance > 0.0) {
            return Err("--tolerance must be positive".into());
        }
        if cli.samples == 0 {
            return Err("--samples must be at least 1".into());
        }
        let sign: Sign = cli.sign.parse().map_err(|e: Error| e.to_string())?;
        Ok(Self {
            command: cli.command,
            spin,
            n_sites: cli.sites,
            phi,
            magnons: cli.magnons,
            sign,
            tolerance: cli.tolerance,
            samples: cli.samples,
            seed: cli.seed,
            out: cli.out.clone(),
            format: cli.format,
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command.name(),
            "spin": self.spin.to_string(),
            "sites": self.n_sites,
            "phi": complex_json(self.phi),
            "magnons": self.magnons,
            "sign": self.sign.to_string(),
            "tolerance": self.tolerance,
            "samples": self.samples,
            "seed": self.seed,
        })
    }

    fn chain(&self) -> Result<Chain, Failure> {
        Ok(Chain::new(self.spin, self.n_sites)?)
    }

    fn ensure_regular_twist(&self) -> Result<(), Failure> {
        if ((C64::new(0.0, -2.0) * self.phi).exp() - 1.0).norm() < 1e-12 {
            return Err(Failure::Config("singular twist: e^(-2i phi) = 1".into()));
        }
        Ok(())
    }
}

/// Finished command output, before serialization.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Vec<Value>,
    pub pass: bool,
    /// Exit code when `pass` is false.
    pub fail_code: i32,
}

impl Outcome {
    fn from_reports(reports: Vec<VerificationReport>) -> Self {
        let pass = reports.iter().all(|r| r.pass);
        Self {
            results: reports.into_iter().map(report_json).collect(),
            pass,
            fail_code: EXIT_VERIFY,
        }
    }
}

fn report_json(r: VerificationReport) -> Value {
    serde_json::to_value(r).expect("reports serialize")
}

struct Sampler(StdRng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Self(StdRng::seed_from_u64(seed))
    }

    fn point(&mut self) -> C64 {
        C64::new(self.0.gen_range(-1.5..1.5), self.0.gen_range(-1.0..1.0))
    }

    fn points(&mut self, k: usize) -> Vec<C64> {
        (0..k).map(|_| self.point()).collect()
    }

    /// Pairwise distinct spectral parameters away from unit differences.
    fn generic_roots(&mut self, k: usize) -> Vec<C64> {
        loop {
            let roots = self.points(k);
            if ensure_generic(&roots).is_ok() && roots.iter().all(|z| z.norm() > 1e-3) {
                return roots;
            }
        }
    }
}

fn verify(cfg: &RunConfig) -> Result<Outcome, Failure> {
    cfg.ensure_regular_twist()?;
    let chain = cfg.chain()?;
    let (spin, n, phi, tol) = (cfg.spin, cfg.n_sites, cfg.phi, cfg.tolerance);
    let mut rng = Sampler::new(cfg.seed);
    let mut reports = Vec::new();
    for _ in 0..cfg.samples {
        let (x, y) = (rng.point(), rng.point());
        reports.extend(check_all_relations(x, y, spin, tol)?);
        reports.push(check_abcd_fcr(spin, n, x, y, tol)?);
        reports.push(check_q_fcr(Sign::Plus, spin, n, x, y, tol)?);
        reports.push(check_q_fcr(Sign::Minus, spin, n, x, y, tol)?);
    }
    let y = rng.point();
    for sign in [Sign::Plus, Sign::Minus] {
        reports.push(check_lax_spin_flip(sign, y, spin, tol)?);
    }
    let points = rng.points(cfg.samples);
    reports.push(check_commuting_family(spin, n, phi, &points, tol)?);
    reports.push(check_spin_flip(spin, n, phi, rng.point(), tol)?);

    let x = (C64::new(0.0, -2.0 * phi.re)).exp() * 0.9;
    let mono = q_monodromy(Sign::Plus, rng.point(), spin, n)?;
    reports.push(check_trace_oracle(&mono.poly, x, tol)?);

    let max_m = chain.max_magnons().min(2);
    for m in 1..=max_m {
        let roots = rng.generic_roots(m);
        let z1 = loop {
            let z = rng.point();
            let mut all = vec![z];
            all.extend(&roots);
            if ensure_generic(&all).is_ok() {
                break z;
            }
        };
        reports.push(check_adc_action(spin, n, z1, &roots, tol)?);
        reports.push(check_offshell_decomposition(rng.point(), &roots, phi, spin, n, tol)?);
        reports.push(check_f1_and_gcof(rng.point(), &roots, phi, spin, n, false, tol)?);
    }
    reports.push(check_g_recursion(&rng.generic_roots(3), spin, n, tol)?);
    reports.push(check_curious_identity(&rng.generic_roots(cfg.samples.clamp(2, 6)), tol)?);

    reports.push(check_completeness(phi, spin, n, tol)?);
    let ys = rng.points(cfg.samples);
    for m in 0..=chain.max_magnons() {
        for b in solve_bethe(Sign::Plus, m, phi, spin, n, &SeedStrategy::Spectrum)? {
            reports.push(check_onshell_action(&b, spin, n, &ys, tol)?);
        }
    }
    if spin == Spin::HALF && n >= 2 {
        reports.push(check_hamiltonian(n, phi, &ys, tol)?);
    }
    if phi.im < 0.0 {
        for pair in equator_pairs(phi, spin, n)? {
            reports.push(check_equator_relation(&pair, &ys, tol)?);
        }
    }
    Ok(Outcome::from_reports(reports))
}

fn complex_list(zs: &[C64]) -> Value {
    Value::from(zs.iter().map(|&z| complex_json(z)).collect::<Vec<_>>())
}

fn spectrum(cfg: &RunConfig) -> Result<Outcome, Failure> {
    cfg.ensure_regular_twist()?;
    let (spin, n, phi) = (cfg.spin, cfg.n_sites, cfg.phi);
    let mut rng = Sampler::new(cfg.seed);
    let ys = rng.points(cfg.samples);
    let transfer: Vec<_> = ys
        .iter()
        .map(|&y| transfer_matrix(y, phi, spin, n))
        .collect::<Result<_, _>>()?;
    let eigen = joint_eigenvectors(phi, spin, n)?;
    let mut records = Vec::new();
    for e in eigen {
        if cfg.magnons.is_some_and(|m| m != e.magnons) {
            continue;
        }
        let norm2 = e.vector.dotc(&e.vector);
        let t_vals: Vec<C64> = transfer
            .iter()
            .map(|t| e.vector.dotc(&t.apply(&e.vector)) / norm2)
            .collect();
        let qp: Vec<C64> = ys
            .iter()
            .map(|&y| twist_prefactor(Sign::Plus, y, phi) * poly_eval(&e.plus_poly, y))
            .collect();
        let qm: Vec<C64> = ys
            .iter()
            .map(|&y| twist_prefactor(Sign::Minus, y, phi) * poly_eval(&e.minus_poly, y))
            .collect();
        let res_p = scaled_bethe_residual(&BetheRoots::new(Sign::Plus, phi, e.plus_roots.clone()), spin, n);
        let res_m = scaled_bethe_residual(&BetheRoots::new(Sign::Minus, phi, e.minus_roots.clone()), spin, n);
        let pass = res_p < cfg.tolerance && res_m < cfg.tolerance;
        records.push((e.magnons, t_vals, qp, qm, e.plus_roots, e.minus_roots, res_p, res_m, pass));
    }
    records.sort_by(|a, b| {
        let key = |r: &[C64]| r.first().map(|z| z.arg()).unwrap_or(0.0);
        a.0.cmp(&b.0).then(key(&a.1).total_cmp(&key(&b.1)))
    });
    let pass = records.iter().all(|r| r.8);
    let results = records
        .into_iter()
        .enumerate()
        .map(|(idx, (m, t, qp, qm, rp, rm, res_p, res_m, ok))| {
            json!({
                "sector": m,
                "pairing": idx,
                "y": complex_list(&ys),
                "t_eigenvalues": complex_list(&t),
                "q_plus_eigenvalues": complex_list(&qp),
                "q_minus_eigenvalues": complex_list(&qm),
                "roots_plus": complex_list(&rp),
                "roots_minus": complex_list(&rm),
                "bethe_residual_plus": res_p,
                "bethe_residual_minus": res_m,
                "pass": ok,
            })
        })
        .collect();
    Ok(Outcome {
        results,
        pass,
        fail_code: EXIT_SOLVER,
    })
}

fn bethe(cfg: &RunConfig) -> Result<Outcome, Failure> {
    cfg.ensure_regular_twist()?;
    let (spin, n, phi) = (cfg.spin, cfg.n_sites, cfg.phi);
    let m = cfg.magnons.unwrap_or(1);
    let mut rng = Sampler::new(cfg.seed);
    let ys = rng.points(cfg.samples);
    let solutions = solve_bethe(cfg.sign, m, phi, spin, n, &SeedStrategy::Spectrum)?;
    let mut results = Vec::new();
    let mut pass = true;
    for (idx, b) in solutions.iter().enumerate() {
        let ratio = bethe_ratio_residual(b, spin, n)?
            .iter()
            .fold(0.0f64, |acc, r| acc.max(r.norm()));
        let report = check_onshell_action(b, spin, n, &ys, cfg.tolerance)?;
        pass &= report.pass;
        results.push(json!({
            "index": idx,
            "sign": b.sign.to_string(),
            "roots": complex_list(&b.roots),
            "bethe_residual": scaled_bethe_residual(b, spin, n),
            "ratio_residual": ratio,
            "onshell": report_json(report),
        }));
    }
    Ok(Outcome {
        results,
        pass,
        fail_code: EXIT_VERIFY,
    })
}

fn equator(cfg: &RunConfig) -> Result<Outcome, Failure> {
    if !(cfg.phi.im < 0.0) {
        return Err(Failure::Config(format!(
            "divergent series: equator needs Im(phi) < 0, got {}",
            cfg.phi.im
        )));
    }
    let mut rng = Sampler::new(cfg.seed);
    let ys = rng.points(cfg.samples);
    let mut reports = Vec::new();
    for pair in equator_pairs(cfg.phi, cfg.spin, cfg.n_sites)? {
        reports.push(check_equator_relation(&pair, &ys, cfg.tolerance)?);
    }
    Ok(Outcome::from_reports(reports))
}

fn hamiltonian_cmd(cfg: &RunConfig) -> Result<Outcome, Failure> {
    if cfg.spin != Spin::HALF {
        return Err(Failure::Config("the Hamiltonian is available for spin 1/2 only".into()));
    }
    if cfg.n_sites < 2 {
        return Err(Failure::Config("the Hamiltonian needs --sites >= 2".into()));
    }
    let h = hamiltonian(cfg.n_sites, cfg.phi)?;
    let mut ev = eigenvalues(h.matrix())?;
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    // Round away last-bit noise so repeated runs print identical spectra.
    let ev: Vec<C64> = ev
        .into_iter()
        .map(|z| C64::new((z.re * 1e12).round() / 1e12, (z.im * 1e12).round() / 1e12) + 0.0)
        .collect();
    let mut rng = Sampler::new(cfg.seed);
    let ys = rng.points(cfg.samples);
    let report = check_hamiltonian(cfg.n_sites, cfg.phi, &ys, cfg.tolerance)?;
    let pass = report.pass;
    Ok(Outcome {
        results: vec![json!({ "eigenvalues": complex_list(&ev) }), report_json(report)],
        pass,
        fail_code: EXIT_VERIFY,
    })
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    match cfg.command {
        Command::Verify => verify(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Bethe => bethe(cfg),
        Command::Equator => equator(cfg),
        Command::Hamiltonian => hamiltonian_cmd(cfg),
    }
}

pub fn render_json(cfg: &RunConfig, outcome: &Outcome) -> String {
    let doc = json!({
        "config": cfg.to_json(),
        "results": outcome.results,
        "pass": outcome.pass,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("json serializes");
    text.push('\n');
    text
}

fn csv_cell(v: &Value) -> String {
    let as_complex = |v: &Value| -> Option<String> {
        let arr = v.as_array()?;
        if arr.len() != 2 {
            return None;
        }
        let (re, im) = (arr[0].as_f64()?, arr[1].as_f64()?);
        Some(format!("{re}{}{}i", if im < 0.0 { "-" } else { "+" }, im.abs()))
    };
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(items) => {
            if let Some(z) = as_complex(v) {
                return z;
            }
            let cells: Option<Vec<String>> = items.iter().map(as_complex).collect();
            cells.map(|c| c.join(";")).unwrap_or_else(|| v.to_string())
        }
        other => other.to_string(),
    }
}

/// One row per result, columns sorted by key; nested objects stay JSON.
pub fn render_csv(outcome: &Outcome) -> anyhow::Result<String> {
    let rows: Vec<Map<String, Value>> = outcome
        .results
        .iter()
        .map(|r| r.as_object().cloned().unwrap_or_default())
        .collect();
    let mut header: Vec<String> = rows.iter().flat_map(|r| r.keys().cloned()).collect();
    header.sort();
    header.dedup();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header)?;
    for row in &rows {
        writer.write_record(header.iter().map(|k| row.get(k).map(csv_cell).unwrap_or_default()))?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Parses arguments, runs the command, writes the output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    let cfg = match RunConfig::from_cli(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("error: {msg}"),
                Failure::Solver(msg) => eprintln!("solver failure: {msg}"),
            }
            return f.code();
        }
    };
    let text = match cfg.format {
        Format::Json => render_json(&cfg, &outcome),
        Format::Csv => match render_csv(&outcome) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e:#}");
                return EXIT_CONFIG;
            }
        },
    };
    let written = match &cfg.out {
        Some(path) => write_atomic(path, &text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Into::into),
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return EXIT_CONFIG;
    }
    if outcome.pass {
        EXIT_PASS
    } else {
        outcome.fail_code
    }
}
