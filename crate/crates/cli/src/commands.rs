//! One function per subcommand, each turning an [`ExperimentSpec`] into a
//! [`Report`].

use std::fs;
use std::path::Path;

use align_lab::counting::{self, fraction_string, rational_to_f64, CountingRecord};
use align_lab::{cj3, poly, probe, solve, verify, Channels, Exact, SolverOptions, Solution, SystemConfig};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::spec::{Command, ExperimentSpec, Format, IntRange};

/// Rendered results of a command.
#[derive(Debug, Default)]
pub struct Report {
    pub json: Option<Value>,
    pub csv: Option<String>,
    /// Plain-text output that ignores the format flag.
    pub text: Option<String>,
    /// Set when the command completed but its result failed a check.
    pub failure: Option<String>,
}

impl Report {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        if let Some(text) = &self.text {
            return Ok(text.clone());
        }
        match format {
            Format::Json => {
                let v = self.json.as_ref().ok_or_else(|| CliError::Spec("no JSON output for this command".into()))?;
                Ok(serde_json::to_string_pretty(v).expect("JSON value serializes") + "\n")
            }
            Format::Csv => self
                .csv
                .clone()
                .ok_or_else(|| CliError::Spec("CSV output is not available for this command".into())),
        }
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<Report, CliError> {
    match spec.command {
        Command::Bounds => bounds(spec),
        Command::CjParams => cj_params(spec),
        Command::Contradiction => contradiction(spec),
        Command::Cj3 => cj3_cmd(spec),
        Command::Probe => probe_cmd(spec),
        Command::Solve => solve_cmd(spec),
        Command::Verify => verify_cmd(spec),
        Command::ExportPoly => export_poly(spec),
    }
}

const MAX_ROWS: u64 = 1_000_000;

fn to_json<S: Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("report serializes")
}

fn to_csv<S: Serialize>(rows: &[S]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("CSV row serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// First 16 hex digits of SHA-256 over the canonical JSON of `cfg`.
pub fn config_hash(cfg: &SystemConfig) -> String {
    let digest = Sha256::digest(serde_json::to_vec(cfg).expect("config serializes"));
    format!("{digest:x}")[..16].to_string()
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn range_or(r: Option<IntRange>, default: IntRange, name: &str, lo: u64, hi: u64) -> Result<IntRange, CliError> {
    let r = r.unwrap_or(default);
    if r.start < lo || r.end > hi {
        return Err(CliError::Spec(format!("{name} range {r} must lie within {lo}..{hi}")));
    }
    Ok(r)
}

fn check_rows(count: u64) -> Result<(), CliError> {
    if count > MAX_ROWS {
        return Err(CliError::Spec(format!("sweep has {count} rows, the limit is {MAX_ROWS}")));
    }
    Ok(())
}

fn usize_of(x: u64) -> usize {
    usize::try_from(x).expect("range bounds are capped")
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct BoundRow {
    bound: &'static str,
    K: u64,
    n: Option<u64>,
    M: Option<u64>,
    value: String,
    decimal: f64,
}

impl BoundRow {
    fn new(bound: &'static str, users: u64, n: Option<u64>, m: Option<u64>, x: &Exact) -> Self {
        Self {
            bound,
            K: users,
            n,
            M: m,
            value: fraction_string(x),
            decimal: rational_to_f64(x),
        }
    }
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct CountingRow {
    config_hash: String,
    N_e: String,
    N_v: String,
    proper: bool,
    dim_H: String,
    deficit: String,
}

fn bounds(spec: &ExperimentSpec) -> Result<Report, CliError> {
    if let Some(cfg) = &spec.config {
        let rec = CountingRecord::for_config(cfg)?;
        let row = CountingRow {
            config_hash: config_hash(cfg),
            N_e: rec.equations.to_string(),
            N_v: rec.variables.to_string(),
            proper: rec.proper,
            dim_H: rec.dim_channel_space.to_string(),
            deficit: rec.deficit.to_string(),
        };
        return Ok(Report {
            json: Some(to_json(&rec)),
            csv: Some(to_csv(&[row])),
            ..Report::default()
        });
    }
    let ks = range_or(spec.sweep.users, IntRange { start: 3, end: 6 }, "K", 2, 100)?;
    let ns = range_or(spec.sweep.n, IntRange { start: 1, end: 5 }, "n", 1, 10_000)?;
    let ms = range_or(spec.sweep.antennas, IntRange { start: 1, end: 4 }, "M", 1, 1_000_000)?;
    check_rows(ks.len() * (ns.len() + ms.len() + 1))?;

    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut tdma = Vec::new();
    for k in ks.iter() {
        if k >= 3 {
            for n in ns.iter() {
                let p = counting::cj_parameters(usize_of(k), n)?;
                a.push(BoundRow::new("A", k, Some(n), None, &p.normalized));
            }
        }
        for m in ms.iter() {
            b.push(BoundRow::new("B", k, None, Some(m), &counting::symmetric_bound(m, k)));
        }
        tdma.push(BoundRow::new("TDMA", k, None, None, &counting::tdma_baseline(k)?));
    }
    let json = serde_json::json!({ "bound_a": a, "bound_b": b, "tdma": tdma });
    let all: Vec<&BoundRow> = a.iter().chain(&b).chain(&tdma).collect();
    Ok(Report {
        json: Some(json),
        csv: Some(to_csv(&all)),
        ..Report::default()
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct CjRow {
    K: usize,
    n: u64,
    N_exp: u32,
    N_s: String,
    d_1: String,
    d_k: String,
    d_total: String,
    d_bar: String,
    d_bar_decimal: f64,
    N_e: String,
    N_v: String,
    proper: bool,
    exceeds_tdma: bool,
}

fn cj_params(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let ks = range_or(spec.sweep.users, IntRange { start: 3, end: 6 }, "K", 3, 100)?;
    let ns = range_or(spec.sweep.n, IntRange { start: 1, end: 5 }, "n", 1, 10_000)?;
    check_rows(ks.len() * ns.len())?;
    let mut rows = Vec::new();
    for k in ks.iter() {
        let tdma = counting::tdma_baseline(k)?;
        for n in ns.iter() {
            let p = counting::cj_parameters(usize_of(k), n)?;
            let prop = p.properness();
            rows.push(CjRow {
                K: p.users,
                n: p.n,
                N_exp: p.exponent,
                N_s: p.signal_dim.to_string(),
                d_1: p.streams[0].to_string(),
                d_k: p.streams[1].to_string(),
                d_total: p.total.to_string(),
                d_bar: fraction_string(&p.normalized),
                d_bar_decimal: rational_to_f64(&p.normalized),
                N_e: prop.equations.to_string(),
                N_v: prop.variables.to_string(),
                proper: prop.proper,
                exceeds_tdma: p.normalized > tdma,
            });
        }
    }
    Ok(Report {
        json: Some(to_json(&rows)),
        csv: Some(to_csv(&rows)),
        ..Report::default()
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Witness {
    n: u64,
    N_s: String,
    d: Vec<String>,
    N_e: String,
    N_v: String,
    slack: String,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct ContradictionEntry {
    K: usize,
    n_max: u64,
    min_improper_n: Option<u64>,
    /// First `n` meeting the closed threshold inequality.
    threshold_n: Option<u64>,
    agree: bool,
    witness: Option<Witness>,
    message: String,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct ContradictionRow {
    K: usize,
    n_max: u64,
    min_improper_n: Option<u64>,
    threshold_n: Option<u64>,
    agree: bool,
    N_s: Option<String>,
    d_1: Option<String>,
    d_k: Option<String>,
    N_e: Option<String>,
    N_v: Option<String>,
}

fn contradiction(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let ks = range_or(spec.sweep.users, IntRange { start: 3, end: 6 }, "K", 3, 12)?;
    let n_max = spec.params.n_max.unwrap_or(100);
    if !(1..=10_000_000).contains(&n_max) {
        return Err(CliError::Spec("n_max must lie within 1..10000000".into()));
    }
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for k in ks.iter().map(usize_of) {
        let found = counting::min_improper_n(k, n_max)?;
        let mut threshold_n = None;
        for n in 1..=n_max {
            if counting::improper_by_threshold(k, n)? {
                threshold_n = Some(n);
                break;
            }
        }
        let witness = match found {
            Some(n) => {
                let p = counting::cj_parameters(k, n)?;
                let prop = p.properness();
                Some(Witness {
                    n,
                    N_s: p.signal_dim.to_string(),
                    d: p.streams.iter().map(ToString::to_string).collect(),
                    N_e: prop.equations.to_string(),
                    N_v: prop.variables.to_string(),
                    slack: prop.slack.to_string(),
                })
            }
            None => None,
        };
        let message = match &witness {
            Some(w) => format!(
                "K={k}: the time-extension configuration at n={} is achievable yet improper (N_e={} > N_v={})",
                w.n, w.N_e, w.N_v
            ),
            None => format!("K={k}: none within n_max={n_max}"),
        };
        rows.push(ContradictionRow {
            K: k,
            n_max,
            min_improper_n: found,
            threshold_n,
            agree: found == threshold_n,
            N_s: witness.as_ref().map(|w| w.N_s.clone()),
            d_1: witness.as_ref().map(|w| w.d[0].clone()),
            d_k: witness.as_ref().map(|w| w.d[1].clone()),
            N_e: witness.as_ref().map(|w| w.N_e.clone()),
            N_v: witness.as_ref().map(|w| w.N_v.clone()),
        });
        entries.push(ContradictionEntry {
            K: k,
            n_max,
            min_improper_n: found,
            threshold_n,
            agree: found == threshold_n,
            witness,
            message,
        });
    }
    let failure = entries
        .iter()
        .find(|e| !e.agree)
        .map(|e| format!("K={}: sweep and closed-form threshold disagree", e.K));
    Ok(Report {
        json: Some(to_json(&entries)),
        csv: Some(to_csv(&rows)),
        failure,
        ..Report::default()
    })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Cj3Summary {
    n: usize,
    seed: u64,
    N_s: usize,
    d: Vec<usize>,
    leakage: f64,
    min_cross_residual: f64,
    direct_ranks: Vec<usize>,
    aligned: bool,
    rank_ok: bool,
    passed: bool,
    span_residuals: [f64; 3],
    d_bar: String,
    d_bar_decimal: f64,
    exceeds_tdma: bool,
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct Cj3Row {
    n: usize,
    seed: u64,
    N_s: usize,
    leakage: f64,
    min_cross_residual: f64,
    direct_ranks: String,
    passed: bool,
    d_bar: String,
    d_bar_decimal: f64,
    exceeds_tdma: bool,
}

fn cj3_cmd(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let ns = range_or(spec.sweep.n, IntRange::single(1), "n", 1, 1000)?;
    let seed = spec.params.seed.unwrap_or(0);
    let seeds = spec.params.seeds.unwrap_or(1);
    if seeds == 0 {
        return Err(CliError::Spec("seeds must be at least 1".into()));
    }
    check_rows(ns.len().saturating_mul(seeds))?;
    let mut summaries = Vec::new();
    let mut single = None;
    for n in ns.iter().map(usize_of) {
        for s in 0..seeds {
            let s = seed.wrapping_add(s);
            let inst = align_lab::Cj3::generate(n, s)?;
            let r = verify::check(&inst.channels, &inst.solution)?;
            let dbar = inst.normalized_dof();
            let passed = r.passed() && r.direct_ranks == cj3::cj3_streams(n);
            summaries.push(Cj3Summary {
                n,
                seed: s,
                N_s: 2 * n + 1,
                d: cj3::cj3_streams(n),
                leakage: r.leakage,
                min_cross_residual: r.max_cross_entry,
                direct_ranks: r.direct_ranks.clone(),
                aligned: r.aligned,
                rank_ok: r.rank_ok,
                passed,
                span_residuals: cj3::span_residuals(&inst.channels, &inst.solution),
                d_bar: fraction_string(&dbar),
                d_bar_decimal: rational_to_f64(&dbar),
                exceeds_tdma: inst.exceeds_tdma(),
            });
            single = Some(inst);
        }
    }
    let rows: Vec<Cj3Row> = summaries
        .iter()
        .map(|s| Cj3Row {
            n: s.n,
            seed: s.seed,
            N_s: s.N_s,
            leakage: s.leakage,
            min_cross_residual: s.min_cross_residual,
            direct_ranks: join(&s.direct_ranks),
            passed: s.passed,
            d_bar: s.d_bar.clone(),
            d_bar_decimal: s.d_bar_decimal,
            exceeds_tdma: s.exceeds_tdma,
        })
        .collect();
    let mut json = serde_json::json!({ "instances": summaries });
    if summaries.len() == 1 {
        let inst = single.expect("one instance");
        json["config"] = to_json(&inst.config);
        json["channels"] = to_json(&inst.channels);
        json["solution"] = to_json(&inst.solution);
    }
    let failure = summaries
        .iter()
        .find(|s| !s.passed)
        .map(|s| format!("construction for n={} seed={} failed verification", s.n, s.seed));
    Ok(Report {
        json: Some(json),
        csv: Some(to_csv(&rows)),
        failure,
        ..Report::default()
    })
}

fn probe_cmd(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let cfg = spec.require_config()?;
    let draws = spec.params.draws.unwrap_or(64);
    let seed = spec.params.seed.unwrap_or(cfg.seed);
    let report = probe::run_probe::<f64>(cfg, draws, seed)?;
    Ok(Report {
        json: Some(to_json(&report)),
        csv: Some(report.nullity_csv()),
        ..Report::default()
    })
}

#[derive(Serialize)]
struct SolveReport {
    config_hash: String,
    #[serde(flatten)]
    verdict: solve::FeasibilityVerdict,
}

#[derive(Serialize)]
struct SolveRow {
    config_hash: String,
    trial: usize,
    restart: usize,
    iterations: usize,
    final_leakage: f64,
    rank_ok: bool,
    success: bool,
    max_increase: f64,
}

fn solve_cmd(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let cfg = spec.require_config()?;
    let d = SolverOptions::default();
    let p = &spec.params;
    let opts = SolverOptions {
        max_iters: p.max_iters.unwrap_or(d.max_iters),
        tol_align: p.tol_align.unwrap_or(d.tol_align),
        restarts: p.restarts.unwrap_or(d.restarts),
        trials: p.trials.unwrap_or(d.trials),
        seed: p.seed.unwrap_or(d.seed),
    };
    opts.validate().map_err(|e| CliError::Spec(e.to_string()))?;
    let verdict = solve::classify::<f64>(cfg, &opts)?;
    let hash = config_hash(cfg);
    let rows: Vec<SolveRow> = verdict
        .runs
        .iter()
        .map(|r| SolveRow {
            config_hash: hash.clone(),
            trial: r.trial,
            restart: r.restart,
            iterations: r.iterations,
            final_leakage: r.final_leakage,
            rank_ok: r.rank_ok,
            success: r.success,
            max_increase: r.max_increase,
        })
        .collect();
    let report = SolveReport {
        config_hash: hash,
        verdict,
    };
    Ok(Report {
        json: Some(to_json(&report)),
        csv: Some(to_csv(&rows)),
        ..Report::default()
    })
}

/// Read a JSON document holding either the bare object or a wrapper with
/// the object under `key` (as written by `cj3`).
fn load_wrapped<T: serde::de::DeserializeOwned>(path: &Path, key: &str) -> Result<T, CliError> {
    let text = read_file(path)?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut(key) {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))
}

fn load_channels(spec: &ExperimentSpec) -> Result<Channels, CliError> {
    match &spec.params.channels {
        Some(path) => {
            let ch: Channels = load_wrapped(path, "channels")?;
            if let Some(cfg) = &spec.config {
                ch.conforms_to(cfg).map_err(|e| CliError::Spec(e.to_string()))?;
            }
            Ok(ch)
        }
        None => Ok(align_lab::model::sample_channels(spec.require_config()?)?),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    result: align_lab::Verification,
    passed: bool,
    normalized: bool,
}

#[derive(Serialize)]
struct VerifyRow {
    leakage: f64,
    min_cross_residual: f64,
    direct_ranks: String,
    aligned: bool,
    rank_ok: bool,
    passed: bool,
}

fn verify_cmd(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let ch = load_channels(spec)?;
    let path = spec
        .params
        .solution
        .as_ref()
        .ok_or_else(|| CliError::Spec("verify needs --solution".into()))?;
    let mut sol: Solution = load_wrapped(path, "solution")?;
    sol.matches_channels(&ch).map_err(|e| CliError::Spec(e.to_string()))?;
    if spec.params.normalize {
        sol = verify::normalize_gauge(&sol)?;
    }
    let result = verify::check(&ch, &sol)?;
    let passed = result.passed();
    let row = VerifyRow {
        leakage: result.leakage,
        min_cross_residual: result.max_cross_entry,
        direct_ranks: join(&result.direct_ranks),
        aligned: result.aligned,
        rank_ok: result.rank_ok,
        passed,
    };
    let report = VerifyReport {
        result,
        passed,
        normalized: spec.params.normalize,
    };
    Ok(Report {
        json: Some(to_json(&report)),
        csv: Some(to_csv(&[row])),
        failure: (!passed).then(|| "solution does not align the channels".to_string()),
        ..Report::default()
    })
}

fn export_poly(spec: &ExperimentSpec) -> Result<Report, CliError> {
    let cfg = spec.require_config()?;
    if spec.output.format == Format::Csv {
        return Err(CliError::Spec("export-poly writes the text grammar only".into()));
    }
    let ch = load_channels(spec)?;
    let system = poly::polynomial_system(cfg, &ch)?;
    Ok(Report {
        text: Some(system.to_text()),
        ..Report::default()
    })
}
