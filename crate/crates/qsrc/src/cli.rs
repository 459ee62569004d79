//! Batch experiment driver behind the `qsrc` binary.
//!
//! Experiments are described by a single JSON config (complex numbers as
//! `[re, im]` pairs, matrices as nested row-major arrays, qubit states
//! optionally as Bloch vectors) and produce deterministic CSV: identical
//! config and seed reproduce byte-identical output. Every emitted number
//! is finite or the literal token `inf`; cells that do not apply read
//! `na`.
//!
//! Exit codes: 0 success, 2 config error, 3 property violation, 4
//! resource cap.

use crate::channels::{self, KrausChannel};
use crate::compression::{
    run_blind_sj, run_composed, Estimation, ProtocolRecord, SubspaceMode, EXACT_BUDGET,
};
use crate::functionals;
use crate::linalg::ComplexMatrix;
use crate::states::{
    ensemble_average, optimal_purification_pair, random_density, DensityMatrix, Ensemble,
};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const CSV_VERSION_HEADER: &str = "# qsrc-compress v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdKind {
    Holevo,
    BinarySmin,
    RdSweep,
    Props,
    Protocol,
}

impl CmdKind {
    pub fn name(&self) -> &'static str {
        match self {
            CmdKind::Holevo => "holevo",
            CmdKind::BinarySmin => "binary-smin",
            CmdKind::RdSweep => "rd-sweep",
            CmdKind::Props => "props",
            CmdKind::Protocol => "protocol",
        }
    }
}

/// One CLI invocation: subcommand plus paths and overrides.
#[derive(Debug, Clone)]
pub struct CliRequest {
    pub kind: CmdKind,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub protocols: Option<Vec<String>>,
    #[serde(default)]
    pub protocol: Option<String>,
    #[serde(default)]
    pub n_range: Option<Vec<usize>>,
    #[serde(default)]
    pub k_range: Option<Vec<usize>>,
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub mode: Option<ModeSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub dense_cap: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub props: Option<PropsSpec>,
}

#[derive(Debug, Deserialize)]
pub struct EnsembleSpec {
    pub probs: Vec<f64>,
    pub states: Vec<StateSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    /// Qubit Bloch vector [x, y, z] with |v| ≤ 1: ρ = ½(I + xX + yY + zZ).
    Bloch { bloch: [f64; 3] },
    /// Explicit complex matrix, row-major, entries as [re, im].
    Matrix { matrix: Vec<Vec<[f64; 2]>> },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModeSpec {
    Named(String),
    Delta { delta: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropsSpec {
    #[serde(default = "default_contractivity")]
    pub contractivity: usize,
    #[serde(default = "default_monotonicity")]
    pub monotonicity: usize,
    #[serde(default = "default_fannes")]
    pub fannes: usize,
    #[serde(default = "default_lemma")]
    pub lemma: usize,
    /// Test hook: inject a trace-decreasing channel and report the
    /// resulting validation failure.
    #[serde(default)]
    pub tamper: bool,
}

fn default_contractivity() -> usize {
    500
}
fn default_monotonicity() -> usize {
    500
}
fn default_fannes() -> usize {
    1000
}
fn default_lemma() -> usize {
    200
}

impl Default for PropsSpec {
    fn default() -> Self {
        PropsSpec {
            contractivity: default_contractivity(),
            monotonicity: default_monotonicity(),
            fannes: default_fannes(),
            lemma: default_lemma(),
            tamper: false,
        }
    }
}

/// Result of executing a request: the CSV body plus any property-suite
/// violations (serialized counterexamples).
#[derive(Debug)]
pub struct CliOutput {
    pub csv: String,
    pub violations: Vec<String>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

pub fn build_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    let states = spec
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            match s {
                StateSpec::Bloch { bloch } => DensityMatrix::from_bloch(bloch[0], bloch[1], bloch[2]),
                StateSpec::Matrix { matrix } => {
                    let rows = matrix.len();
                    if rows == 0 || matrix.iter().any(|r| r.len() != rows) {
                        return Err(Error::Config(format!("state {i}: matrix is not square")));
                    }
                    let mut m = ComplexMatrix::zeros(rows, rows);
                    for (r, row) in matrix.iter().enumerate() {
                        for (c, &[re, im]) in row.iter().enumerate() {
                            m[(r, c)] = Complex64::new(re, im);
                        }
                    }
                    DensityMatrix::new(m)
                }
            }
            .map_err(|e| Error::Config(format!("state {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(spec.probs.clone(), states)
        .map_err(|e| Error::Config(format!("ensemble: {e}")))
}

fn fmt_f64(x: f64) -> String {
    assert!(!x.is_nan(), "NaN must never reach the CSV output");
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x}")
    }
}

fn mode_of(cfg: &ExperimentConfig) -> Result<SubspaceMode> {
    match &cfg.mode {
        None => Ok(SubspaceMode::TopK),
        Some(ModeSpec::Named(s)) if s == "topk" => Ok(SubspaceMode::TopK),
        Some(ModeSpec::Named(s)) => Err(Error::Config(format!("unknown mode '{s}'"))),
        Some(ModeSpec::Delta { delta }) => Ok(SubspaceMode::Delta(*delta)),
    }
}

fn record_row(r: &ProtocolRecord) -> String {
    let (bl, br, bok) = match &r.bound {
        Some(b) => (fmt_f64(b.lhs), fmt_f64(b.rhs), b.satisfied.to_string()),
        None => ("na".to_string(), "na".to_string(), "na".to_string()),
    };
    let (est, samples, seed) = match r.estimation {
        crate::compression::EstimationUsed::Exact => {
            ("exact".to_string(), "na".to_string(), "na".to_string())
        }
        crate::compression::EstimationUsed::MonteCarlo { seed, samples } => {
            ("mc".to_string(), samples.to_string(), seed.to_string())
        }
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.kind,
        r.n,
        fmt_f64(r.rate),
        fmt_f64(r.log_dim_encoded),
        fmt_f64(r.avg_distortion),
        bl,
        br,
        bok,
        est,
        samples,
        seed
    )
}

fn skipped_row(kind: &str, n: usize, rate: f64, err: &Error) -> String {
    let reason = err.to_string().replace(',', ";");
    format!("{kind},{n},{},na,na,na,na,na,skipped({reason}),na,na", fmt_f64(rate))
}

const RD_COLUMNS: &str =
    "protocol,N,rate,log_dim,avg_distortion,bound_lhs,bound_rhs,bound_ok,estimation,samples,seed";

/// Holevo report: average-state entropy, mean member entropy, χ by both
/// formulas and their agreement delta.
pub fn cmd_holevo(e: &Ensemble) -> Result<Vec<String>> {
    let avg = ensemble_average(e);
    let s_avg = functionals::von_neumann_entropy(&avg);
    let mean_s: f64 = e
        .iter()
        .map(|(p, rho)| p * functionals::von_neumann_entropy(rho))
        .sum();
    let chi = functionals::holevo_information(e);
    let chi_rel = functionals::holevo_via_relative_entropy(e)?;
    Ok(vec![
        "S_avg,mean_member_entropy,chi,chi_via_relative_entropy,agreement_delta".to_string(),
        format!(
            "{},{},{},{},{}",
            fmt_f64(s_avg),
            fmt_f64(mean_s),
            fmt_f64(chi),
            fmt_f64(chi_rel),
            fmt_f64((chi - chi_rel).abs())
        ),
    ])
}

/// Binary minimal-entropy report: fidelity, S_min by formula and by
/// explicit construction of the optimal purified pair, χ, and the gap
/// S_min − χ (nonnegative for any binary source).
pub fn cmd_binary_smin(e: &Ensemble) -> Result<(Vec<String>, Vec<String>)> {
    if e.len() != 2 {
        return Err(Error::Config(format!(
            "binary-smin needs exactly 2 ensemble members, got {}",
            e.len()
        )));
    }
    let (p1, p2) = (e.prob(0), e.prob(1));
    let f = functionals::fidelity(e.state(0), e.state(1))?;
    let smin = functionals::smin_binary(p1, p2, e.state(0), e.state(1))?;
    let (psi1, psi2) = optimal_purification_pair(e.state(0), e.state(1))?;
    let purified = Ensemble::of_pure_states(vec![p1, p2], vec![psi1, psi2])?;
    let smin_constructed = functionals::von_neumann_entropy(&ensemble_average(&purified));
    let chi = functionals::holevo_information(e);
    let gap = smin - chi;
    let mut violations = Vec::new();
    if gap < -1e-9 {
        violations.push(format!(
            "{{\"suite\":\"binary-smin\",\"gap\":{gap},\"smin\":{smin},\"chi\":{chi}}}"
        ));
    }
    Ok((
        vec![
            "fidelity,smin_formula,smin_constructed,chi,gap".to_string(),
            format!(
                "{},{},{},{},{}",
                fmt_f64(f),
                fmt_f64(smin),
                fmt_f64(smin_constructed),
                fmt_f64(chi),
                fmt_f64(gap)
            ),
        ],
        violations,
    ))
}

/// Rate-distortion sweep: one row per (protocol kind, block length,
/// rate). Cap violations become per-row `skipped(reason)` entries.
pub fn cmd_rd_sweep(
    e: &Ensemble,
    cfg: &ExperimentConfig,
    seed: Option<u64>,
    dense_cap: usize,
) -> Result<Vec<String>> {
    let mode = mode_of(cfg)?;
    let rates = cfg
        .rates
        .clone()
        .ok_or_else(|| Error::Config("rd-sweep needs a 'rates' grid".to_string()))?;
    let protocols = cfg
        .protocols
        .clone()
        .unwrap_or_else(|| vec!["blind_sj".to_string()]);
    let samples = cfg.samples.unwrap_or(10_000);
    let mut rows = vec![RD_COLUMNS.to_string()];

    for proto in &protocols {
        match proto.as_str() {
            "blind_sj" => {
                let ns = cfg
                    .n_range
                    .clone()
                    .ok_or_else(|| Error::Config("blind_sj sweep needs 'n_range'".to_string()))?;
                for &n in &ns {
                    let est = estimation_for(e, n, seed, samples)?;
                    for &rate in &rates {
                        match run_blind_sj(e, n, rate, mode, est, dense_cap) {
                            Ok(rec) => rows.push(record_row(&rec)),
                            Err(err @ Error::CapExceeded { .. }) => {
                                rows.push(skipped_row("blind_sj", n, rate, &err))
                            }
                            Err(err) => return Err(err),
                        }
                    }
                }
            }
            "composed" => {
                let ks = cfg
                    .k_range
                    .clone()
                    .ok_or_else(|| Error::Config("composed sweep needs 'k_range'".to_string()))?;
                for &k in &ks {
                    let est = estimation_for(e, k, seed, samples)?;
                    for &rate in &rates {
                        match run_composed(e, k, rate, est, dense_cap) {
                            Ok(rec) => rows.push(record_row(&rec)),
                            Err(err @ Error::CapExceeded { .. }) => {
                                rows.push(skipped_row("composed", k, rate, &err))
                            }
                            Err(err) => return Err(err),
                        }
                    }
                }
            }
            other => {
                return Err(Error::Config(format!("unknown protocol kind '{other}'")));
            }
        }
    }
    Ok(rows)
}

fn estimation_for(e: &Ensemble, n: usize, seed: Option<u64>, samples: usize) -> Result<Estimation> {
    let exact_possible = (e.len() as u128)
        .checked_pow(n as u32)
        .map(|t| t <= EXACT_BUDGET as u128)
        .unwrap_or(false);
    if exact_possible {
        Ok(Estimation::Exact)
    } else {
        let seed = seed.ok_or_else(|| {
            Error::Config(format!(
                "block length {n} exceeds the exact budget; Monte Carlo needs a seed"
            ))
        })?;
        Ok(Estimation::MonteCarlo { seed, samples })
    }
}

/// Single protocol run (kind `protocol`).
pub fn cmd_protocol(
    e: &Ensemble,
    cfg: &ExperimentConfig,
    seed: Option<u64>,
    dense_cap: usize,
) -> Result<Vec<String>> {
    let mode = mode_of(cfg)?;
    let rate = cfg
        .rate
        .ok_or_else(|| Error::Config("protocol run needs 'rate'".to_string()))?;
    let samples = cfg.samples.unwrap_or(10_000);
    let which = cfg.protocol.as_deref().unwrap_or("blind_sj");
    let rec = match which {
        "blind_sj" => {
            let n = cfg
                .n
                .ok_or_else(|| Error::Config("blind_sj run needs 'n'".to_string()))?;
            run_blind_sj(e, n, rate, mode, estimation_for(e, n, seed, samples)?, dense_cap)?
        }
        "composed" => {
            let k = cfg
                .k
                .or(cfg.n)
                .ok_or_else(|| Error::Config("composed run needs 'k'".to_string()))?;
            run_composed(e, k, rate, estimation_for(e, k, seed, samples)?, dense_cap)?
        }
        other => return Err(Error::Config(format!("unknown protocol kind '{other}'"))),
    };
    Ok(vec![RD_COLUMNS.to_string(), record_row(&rec)])
}

/// Property suites: contractivity, relative-entropy monotonicity, the
/// Fannes estimate and the ensemble-difference bound, each over seeded
/// random cases. Violations are returned as replayable JSON snippets.
pub fn cmd_props(spec: &PropsSpec, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut rows = vec!["suite,cases,violations".to_string()];
    let mut violations = Vec::new();

    // trace-distance contractivity under random channels, dims 2-4
    let mut bad = 0usize;
    for case in 0..spec.contractivity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x100_0000 + case as u64));
        let din = 2 + case % 3;
        let dout = 2 + (case / 3) % 3;
        let k = 1 + case % 3;
        if dout * k < din {
            continue;
        }
        let ch = channels::random_channel(din, dout, k, &mut rng).expect("valid dims");
        let rho = random_density(din, 1 + case % din, &mut rng);
        let sigma = random_density(din, din, &mut rng);
        let before = functionals::trace_distance(&rho, &sigma).unwrap();
        let after = functionals::trace_distance(
            &channels::apply(&ch, &rho).unwrap(),
            &channels::apply(&ch, &sigma).unwrap(),
        )
        .unwrap();
        if after > before + 1e-9 {
            bad += 1;
            violations.push(format!(
                "{{\"suite\":\"contractivity\",\"seed\":{seed},\"case\":{case},\"before\":{before},\"after\":{after}}}"
            ));
        }
    }
    rows.push(format!("contractivity,{},{}", spec.contractivity, bad));

    // relative-entropy monotonicity on finite cases
    let mut bad = 0usize;
    for case in 0..spec.monotonicity {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x200_0000 + case as u64));
        let d = 2 + case % 3;
        let ch = channels::random_channel(d, d, 2, &mut rng).expect("valid dims");
        let rho = random_density(d, d, &mut rng);
        let sigma = random_density(d, d, &mut rng);
        let before = functionals::relative_entropy(&rho, &sigma).unwrap();
        if !before.is_finite() {
            continue;
        }
        let after = functionals::relative_entropy(
            &channels::apply(&ch, &rho).unwrap(),
            &channels::apply(&ch, &sigma).unwrap(),
        )
        .unwrap();
        if after > before + 1e-8 {
            bad += 1;
            violations.push(format!(
                "{{\"suite\":\"monotonicity\",\"seed\":{seed},\"case\":{case},\"before\":{before},\"after\":{after}}}"
            ));
        }
    }
    rows.push(format!("monotonicity,{},{}", spec.monotonicity, bad));

    // Fannes estimate on applicable pairs
    let mut bad = 0usize;
    for case in 0..spec.fannes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x300_0000 + case as u64));
        let d = 2 + case % 3;
        let rho = random_density(d, d, &mut rng);
        let tau = random_density(d, d, &mut rng);
        let eps: f64 = 0.2 * rng.gen::<f64>();
        let sigma =
            DensityMatrix::new(rho.matrix().scale(1.0 - eps) + tau.matrix().scale(eps)).unwrap();
        match functionals::fannes_bound_check(&rho, &sigma).unwrap() {
            Some(rep) if !rep.satisfied => {
                bad += 1;
                violations.push(format!(
                    "{{\"suite\":\"fannes\",\"seed\":{seed},\"case\":{case},\"lhs\":{},\"rhs\":{}}}",
                    rep.lhs, rep.rhs
                ));
            }
            _ => {}
        }
    }
    rows.push(format!("fannes,{},{}", spec.fannes, bad));

    // ensemble-difference bound on perturbed block ensembles
    let mut bad = 0usize;
    for case in 0..spec.lemma {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x400_0000 + case as u64));
        let d = 2 + case % 3;
        let n = 1 + case % 3;
        let dim = d.pow(n as u32);
        let members = 2 + case % 2;
        let mut probs: Vec<f64> = (0..members).map(|_| rng.gen::<f64>() + 0.1).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        let states: Vec<DensityMatrix> =
            (0..members).map(|_| random_density(dim, dim, &mut rng)).collect();
        let scale: f64 = 0.1 * rng.gen::<f64>();
        let perturbed: Vec<DensityMatrix> = states
            .iter()
            .map(|s| {
                let t = random_density(dim, dim, &mut rng);
                DensityMatrix::new(s.matrix().scale(1.0 - scale) + t.matrix().scale(scale))
                    .unwrap()
            })
            .collect();
        let e1 = Ensemble::new(probs.clone(), states).unwrap();
        let e2 = Ensemble::new(probs, perturbed).unwrap();
        let eps: f64 = e1
            .iter()
            .zip(e2.states())
            .map(|((p, a), b)| p * functionals::trace_distance(a, b).unwrap())
            .sum();
        if eps > 0.5 {
            continue;
        }
        let lhs =
            (functionals::holevo_information(&e1) - functionals::holevo_information(&e2)).abs();
        let rhs = functionals::lemma_bound(eps, n, d).unwrap();
        if lhs > rhs + 1e-9 {
            bad += 1;
            violations.push(format!(
                "{{\"suite\":\"lemma\",\"seed\":{seed},\"case\":{case},\"lhs\":{lhs},\"rhs\":{rhs}}}"
            ));
        }
    }
    rows.push(format!("lemma,{},{}", spec.lemma, bad));

    if spec.tamper {
        // negative control: a trace-decreasing operator list must be
        // rejected by channel validation
        let bad_ops = vec![crate::linalg::identity(2).scale(0.9)];
        match KrausChannel::new(bad_ops) {
            Err(e) => violations.push(format!(
                "{{\"suite\":\"tamper\",\"expected_rejection\":\"{e}\"}}"
            )),
            Ok(_) => violations.push(
                "{\"suite\":\"tamper\",\"error\":\"trace-decreasing channel was accepted\"}"
                    .to_string(),
            ),
        }
        rows.push("tamper,1,1".to_string());
    }

    (rows, violations)
}

/// Executes a request and returns the CSV plus violations, without
/// touching the filesystem beyond reading the config.
pub fn execute(req: &CliRequest) -> Result<CliOutput> {
    let cfg = parse_config(&req.config)?;
    if let Some(kind) = &cfg.kind {
        if kind != req.kind.name() {
            return Err(Error::Config(format!(
                "config kind '{kind}' does not match subcommand '{}'",
                req.kind.name()
            )));
        }
    }
    let seed = req.seed.or(cfg.seed);
    let dense_cap = match std::env::var("QSRC_DENSE_CAP") {
        Ok(v) => v
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("QSRC_DENSE_CAP='{v}' is not a number")))?,
        Err(_) => cfg.dense_cap.unwrap_or(4096),
    };

    let ensemble = || -> Result<Ensemble> {
        build_ensemble(
            cfg.ensemble
                .as_ref()
                .ok_or_else(|| Error::Config("config needs an 'ensemble'".to_string()))?,
        )
    };

    let (mut rows, violations) = match req.kind {
        CmdKind::Holevo => (cmd_holevo(&ensemble()?)?, Vec::new()),
        CmdKind::BinarySmin => cmd_binary_smin(&ensemble()?)?,
        CmdKind::RdSweep => (cmd_rd_sweep(&ensemble()?, &cfg, seed, dense_cap)?, Vec::new()),
        CmdKind::Protocol => (cmd_protocol(&ensemble()?, &cfg, seed, dense_cap)?, Vec::new()),
        CmdKind::Props => {
            let seed = seed.ok_or_else(|| {
                Error::Config("props needs a seed (config 'seed' or --seed)".to_string())
            })?;
            let spec = cfg.props.unwrap_or_default();
            cmd_props(&spec, seed)
        }
    };

    let mut csv = String::new();
    csv.push_str(CSV_VERSION_HEADER);
    csv.push('\n');
    for row in rows.drain(..) {
        csv.push_str(&row);
        csv.push('\n');
    }
    Ok(CliOutput { csv, violations })
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::CapExceeded { .. } => 4,
        _ => 2,
    }
}

/// Full CLI entry point: executes, writes the CSV, reports violations on
/// stderr, and maps the outcome to an exit code.
pub fn run(req: &CliRequest) -> i32 {
    if let Some(threads) = req.threads {
        // ignore failure: the pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let out_path = req.out.clone();
    match execute(req) {
        Ok(output) => {
            let out_path = match out_path.or_else(|| {
                parse_config(&req.config)
                    .ok()
                    .and_then(|c| c.out)
            }) {
                Some(p) => p,
                None => {
                    eprintln!("error: no output path (--out or config 'out')");
                    return 2;
                }
            };
            if let Err(e) = std::fs::write(&out_path, output.csv.as_bytes()) {
                eprintln!("error: cannot write {}: {e}", out_path.display());
                return 2;
            }
            if !output.violations.is_empty() {
                for v in &output.violations {
                    eprintln!("violation: {v}");
                }
                return 3;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn zero_plus_config() -> &'static str {
        r#"{
            "kind": "holevo",
            "ensemble": {
                "probs": [0.5, 0.5],
                "states": [ {"bloch": [0, 0, 1]}, {"bloch": [1, 0, 0]} ]
            }
        }"#
    }

    #[test]
    fn parse_and_run_holevo() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(&dir, "h.json", zero_plus_config());
        let req = CliRequest {
            kind: CmdKind::Holevo,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        let out = execute(&req).unwrap();
        assert!(out.csv.starts_with(CSV_VERSION_HEADER));
        let data_line = out.csv.lines().nth(2).unwrap();
        let chi: f64 = data_line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((chi - 0.6008760366928562).abs() < 1e-9);
    }

    #[test]
    fn config_parse_error_is_line_precise() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(&dir, "bad.json", "{\n  \"kind\": oops\n}");
        let req = CliRequest {
            kind: CmdKind::Holevo,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        match execute(&req) {
            Err(Error::Config(msg)) => assert!(msg.contains(":2:"), "message was {msg}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(&dir, "h.json", zero_plus_config());
        let req = CliRequest {
            kind: CmdKind::RdSweep,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        assert!(matches!(execute(&req), Err(Error::Config(_))));
    }

    #[test]
    fn bloch_vector_validation_flows_through() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            &dir,
            "bad_state.json",
            r#"{"ensemble": {"probs": [1.0], "states": [{"bloch": [2, 0, 0]}]}}"#,
        );
        let req = CliRequest {
            kind: CmdKind::Holevo,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        assert!(matches!(execute(&req), Err(Error::Config(_))));
    }

    #[test]
    fn rd_sweep_rows_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{
            "kind": "rd-sweep",
            "ensemble": {
                "probs": [0.5, 0.5],
                "states": [ {"bloch": [0, 0, 1]}, {"bloch": [1, 0, 0]} ]
            },
            "protocols": ["blind_sj"],
            "n_range": [3, 6],
            "rates": [0.45, 1.0],
            "seed": 7,
            "samples": 200
        }"#;
        let cfg = write_config(&dir, "rd.json", body);
        let req = CliRequest {
            kind: CmdKind::RdSweep,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        let a = execute(&req).unwrap();
        let b = execute(&req).unwrap();
        assert_eq!(a.csv, b.csv, "identical config+seed must be byte-identical");
        let lines: Vec<&str> = a.csv.lines().collect();
        assert_eq!(lines[1], RD_COLUMNS);
        assert_eq!(lines.len(), 2 + 4); // header comment + columns + 2x2 grid
        // full-rate rows have zero distortion
        for line in &lines[2..] {
            let cells: Vec<&str> = line.split(',').collect();
            if cells[2] == "1" {
                let d: f64 = cells[4].parse().unwrap();
                assert!(d.abs() < 1e-9);
            }
            assert_ne!(cells[7], "false", "bound must never be violated: {line}");
        }
    }

    #[test]
    fn props_all_pass_and_tamper_reports() {
        let spec = PropsSpec {
            contractivity: 40,
            monotonicity: 40,
            fannes: 40,
            lemma: 10,
            tamper: false,
        };
        let (rows, violations) = cmd_props(&spec, 12345);
        assert!(violations.is_empty(), "violations: {violations:?}");
        assert_eq!(rows.len(), 5);

        let spec = PropsSpec {
            contractivity: 0,
            monotonicity: 0,
            fannes: 0,
            lemma: 0,
            tamper: true,
        };
        let (_, violations) = cmd_props(&spec, 1);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("tamper"));
    }

    #[test]
    fn binary_smin_report() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{
            "ensemble": {
                "probs": [0.6, 0.4],
                "states": [ {"bloch": [0, 0, 0.8]}, {"bloch": [0.5, 0, -0.5]} ]
            }
        }"#;
        let cfg = write_config(&dir, "bs.json", body);
        let req = CliRequest {
            kind: CmdKind::BinarySmin,
            config: cfg,
            out: None,
            seed: None,
            threads: None,
        };
        let out = execute(&req).unwrap();
        assert!(out.violations.is_empty());
        let data: Vec<f64> = out
            .csv
            .lines()
            .nth(2)
            .unwrap()
            .split(',')
            .map(|x| x.parse().unwrap())
            .collect();
        let (smin_formula, smin_constructed, gap) = (data[1], data[2], data[4]);
        assert!((smin_formula - smin_constructed).abs() < 1e-7);
        assert!(gap >= -1e-9);
    }
}
