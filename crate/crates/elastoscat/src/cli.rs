//! Command implementations and file formats behind the `elastoscat` binary:
//! trace CSV + metadata sidecar, reconstruction reports (JSON lines), polyline
//! exports, and the exit-code policy.
//!
//! Formats:
//! * trace file — CSV `n,t,point_index,varsigma,v1,v2` (17 significant digits),
//!   with a JSON sidecar `<stem>.meta.json` describing the run;
//! * reconstruction report — JSON lines: one `meta` line, one `iteration` line
//!   per outer step, one closing `final` line;
//! * curve and polyline formats from [`crate::geometry`].

use crate::config::RunConfig;
use crate::forward::{add_noise, forward_solve, IncidentWave, Scene, TraceSet, WaveKind};
use crate::geometry::{
    hausdorff_distance, write_polyline_csv, CurveJson, ObservationCircle, Point, StarCurve,
};
use crate::inverse::{reconstruct, IterationRecord, ReconStatus};
use crate::verify::{self, CheckResult};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Sidecar metadata stored next to a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "N")]
    pub n_steps: usize,
    pub lambda_tilde: f64,
    pub lame: LameMeta,
    pub obs: ObsMeta,
    pub wave: WaveMeta,
    pub seed: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LameMeta {
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsMeta {
    pub b1: f64,
    pub b2: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub n_bar: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveMeta {
    pub kind: WaveKind,
    pub theta_inc: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub tw: f64,
    pub amplitude: f64,
}

impl TraceMeta {
    pub fn from_config(config: &RunConfig, lambda_tilde: f64, seed: u64) -> Self {
        TraceMeta {
            t_final: config.time.t_final,
            n_steps: config.time.n_steps,
            lambda_tilde,
            lame: LameMeta {
                lambda: config.medium.lambda,
                mu: config.medium.mu,
            },
            obs: ObsMeta {
                b1: config.obs.b[0],
                b2: config.obs.b[1],
                radius: config.obs.radius,
                n_bar: config.obs.n_bar,
            },
            wave: WaveMeta {
                kind: config.wave.kind,
                theta_inc: config.wave.theta_inc,
                r0: config.wave.r0,
                tw: config.wave.tw,
                amplitude: config.wave.amplitude,
            },
            seed,
            delta: config.noise.delta,
        }
    }

    pub fn scene(&self) -> Result<Scene, CliError> {
        let medium = crate::forward::ElasticMedium::new(self.lame.lambda, self.lame.mu)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let obs = ObservationCircle::new(
            Point::new(self.obs.b1, self.obs.b2),
            self.obs.radius,
            self.obs.n_bar,
        )
        .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(Scene {
            medium,
            wave: IncidentWave {
                kind: self.wave.kind,
                angle: self.wave.theta_inc,
                amplitude: self.wave.amplitude,
                offset: self.wave.r0,
                window: self.wave.tw,
            },
            obs,
            t_final: self.t_final,
            n_steps: self.n_steps,
            lambda_tilde: Some(self.lambda_tilde),
        })
    }
}

/// `traces.csv` → `traces.meta.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("meta.json")
}

pub fn write_traces(path: &Path, traces: &TraceSet, meta: &TraceMeta) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "n,t,point_index,varsigma,v1,v2")?;
    for (n, row) in traces.values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            writeln!(
                out,
                "{},{:.16e},{},{:.16e},{:.16e},{:.16e}",
                n, traces.times[n], i, traces.angles[i], v.x, v.y
            )?;
        }
    }
    out.flush()?;
    let meta_text =
        serde_json::to_string_pretty(meta).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(sidecar_path(path), meta_text)?;
    Ok(())
}

pub fn read_traces(path: &Path) -> Result<(TraceSet, TraceMeta), CliError> {
    let meta_text = fs::read_to_string(sidecar_path(path)).map_err(|e| {
        CliError::Io(format!(
            "missing metadata sidecar {}: {e}",
            sidecar_path(path).display()
        ))
    })?;
    let meta: TraceMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::Validation(format!("metadata sidecar: {e}")))?;

    let n_times = meta.n_steps + 1;
    let n_points = 2 * meta.obs.n_bar;
    let mut times = vec![0.0f64; n_times];
    let mut angles = vec![0.0f64; n_points];
    let mut values = vec![vec![Vector2::new(0.0f64, 0.0f64); n_points]; n_times];
    let mut seen = vec![false; n_times * n_points];

    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "n,t,point_index,varsigma,v1,v2" {
                return Err(CliError::Validation(format!(
                    "line {lineno}: unexpected header {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(CliError::Validation(format!(
                "line {lineno}: expected 6 columns, got {}",
                cols.len()
            )));
        }
        let parse_usize = |text: &str, what: &str| {
            text.trim().parse::<usize>().map_err(|e| {
                CliError::Validation(format!("line {lineno}: bad {what} {text:?}: {e}"))
            })
        };
        let parse_f64 = |text: &str, what: &str| {
            text.trim().parse::<f64>().map_err(|e| {
                CliError::Validation(format!("line {lineno}: bad {what} {text:?}: {e}"))
            })
        };
        let n = parse_usize(cols[0], "time index")?;
        let i = parse_usize(cols[2], "point index")?;
        if n >= n_times || i >= n_points {
            return Err(CliError::Validation(format!(
                "line {lineno}: index ({n},{i}) outside ({n_times},{n_points}) from metadata"
            )));
        }
        times[n] = parse_f64(cols[1], "time")?;
        angles[i] = parse_f64(cols[3], "angle")?;
        values[n][i] = Vector2::new(parse_f64(cols[4], "v1")?, parse_f64(cols[5], "v2")?);
        seen[n * n_points + i] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CliError::Validation(format!(
            "trace file incomplete: missing sample (n={}, point={})",
            missing / n_points,
            missing % n_points
        )));
    }

    Ok((
        TraceSet {
            times,
            angles,
            values,
            vhat: None,
        },
        meta,
    ))
}

/// One line of a reconstruction report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ReportLine {
    Meta {
        epsilon: f64,
        initial_curve: CurveJson,
        #[serde(skip_serializing_if = "Option::is_none")]
        truth_curve: Option<CurveJson>,
        data_path: String,
    },
    Iteration(IterationRecord),
    Final {
        status: ReconStatus,
        iterations: usize,
        #[serde(rename = "E")]
        error: Option<f64>,
        curve: CurveJson,
    },
}

pub fn write_report(path: &Path, lines: &[ReportLine]) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for line in lines {
        let text = serde_json::to_string(line).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out, "{text}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<ReportLine>, CliError> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReportLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Validation(format!("report line {}: {e}", idx + 1)))?;
        lines.push(parsed);
    }
    Ok(lines)
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            RunConfig::from_json(&text)
                .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))
        }
    }
}

fn validated(config: &RunConfig, allow_inverse_crime: bool) -> Result<(), CliError> {
    let (errors, warnings) = config.validate(allow_inverse_crime);
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors.join("; ")));
    }
    Ok(())
}

/// Synthesizes noisy traces and writes the CSV + sidecar. Deterministic for a
/// fixed (config, seed).
pub fn cmd_simulate(
    config: &RunConfig,
    out: &Path,
    seed_override: Option<u64>,
    allow_inverse_crime: bool,
) -> Result<(), CliError> {
    validated(config, allow_inverse_crime)?;
    let seed = seed_override.unwrap_or(config.noise.seed);
    let scene = config.scene().map_err(CliError::Validation)?;
    let truth = config
        .truth_curve()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let traces = forward_solve(&scene, &truth, config.forward.n_tilde)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let noisy = add_noise(&traces, config.noise.delta, seed);
    let lambda = scene
        .grid()
        .map_err(|e| CliError::Validation(e.to_string()))?
        .lambda_tilde();
    let meta = TraceMeta::from_config(config, lambda, seed);
    write_traces(out, &noisy, &meta)
}

#[derive(Debug, Clone, Serialize)]
pub struct InvertSummary {
    pub status: ReconStatus,
    pub iterations: usize,
    pub final_error: Option<f64>,
    pub final_curve: CurveJson,
    /// distance to the configured truth curve, when one is known
    pub hausdorff_to_truth: Option<f64>,
}

/// Runs the reconstruction on a trace file and writes `report.jsonl` and
/// `final_curve.json` into `out_dir`.
pub fn cmd_invert(
    data: &Path,
    config: &RunConfig,
    out_dir: &Path,
    allow_inverse_crime: bool,
) -> Result<InvertSummary, CliError> {
    validated(config, allow_inverse_crime)?;
    let (traces, meta) = read_traces(data)?;

    // the dataset, not the config, fixes the experiment; mismatches are fatal
    let mut mismatches = Vec::new();
    if meta.t_final != config.time.t_final {
        mismatches.push(format!(
            "T: data {} vs config {}",
            meta.t_final, config.time.t_final
        ));
    }
    if meta.n_steps != config.time.n_steps {
        mismatches.push(format!(
            "N: data {} vs config {}",
            meta.n_steps, config.time.n_steps
        ));
    }
    if meta.obs.b1 != config.obs.b[0]
        || meta.obs.b2 != config.obs.b[1]
        || meta.obs.radius != config.obs.radius
        || meta.obs.n_bar != config.obs.n_bar
    {
        mismatches.push("observation circle differs between data and config".to_string());
    }
    if !mismatches.is_empty() {
        return Err(CliError::Validation(format!(
            "data/config mismatch: {}",
            mismatches.join("; ")
        )));
    }

    let scene = meta.scene()?;
    let mut inv_cfg = config.inverse_config();
    inv_cfg.epsilon = config
        .inverse
        .epsilon
        .resolved()
        .unwrap_or_else(|| (2.0 * meta.delta).max(1e-3));

    let result =
        reconstruct(&scene, &traces, &inv_cfg).map_err(|e| CliError::Numerical(e.to_string()))?;

    fs::create_dir_all(out_dir)?;
    let initial = CurveJson {
        center: [inv_cfg.initial_center.x, inv_cfg.initial_center.y],
        kind: "circle".to_string(),
        alpha: vec![],
        beta: vec![],
        r0: Some(inv_cfg.initial_r0),
    };
    let truth_curve = config.truth_curve().ok();
    let mut lines = vec![ReportLine::Meta {
        epsilon: inv_cfg.epsilon,
        initial_curve: initial,
        truth_curve: truth_curve.as_ref().map(CurveJson::from),
        data_path: data.display().to_string(),
    }];
    lines.extend(result.history.iter().cloned().map(ReportLine::Iteration));
    let final_curve_json = CurveJson::from(&result.final_curve);
    lines.push(ReportLine::Final {
        status: result.status,
        iterations: result.history.len(),
        error: result.final_error,
        curve: final_curve_json.clone(),
    });
    write_report(&out_dir.join("report.jsonl"), &lines)?;
    let curve_text = serde_json::to_string_pretty(&final_curve_json)
        .map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(out_dir.join("final_curve.json"), curve_text)?;

    let hausdorff = truth_curve
        .as_ref()
        .map(|truth| hausdorff_distance(&result.final_curve, truth, 512));
    Ok(InvertSummary {
        status: result.status,
        iterations: result.history.len(),
        final_error: result.final_error,
        final_curve: final_curve_json,
        hausdorff_to_truth: hausdorff,
    })
}

/// Runs the self-verification suite, printing one JSON line per check.
pub fn cmd_verify() -> Result<Vec<CheckResult>, CliError> {
    let results = verify::run_all();
    for check in &results {
        let text = serde_json::to_string(check).map_err(|e| CliError::Io(e.to_string()))?;
        println!("{text}");
    }
    if results.iter().any(|c| !c.passed) {
        return Err(CliError::Numerical(format!(
            "verification failed: {}",
            results
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    Ok(results)
}

fn write_curve_polyline(curve_json: &CurveJson, path: &Path) -> Result<(), CliError> {
    let curve = StarCurve::try_from(curve_json)
        .map_err(|e| CliError::Validation(format!("curve in report: {e}")))?;
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_polyline_csv(&curve, 256, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Exports plot-ready CSV bundles from a reconstruction report: one closed
/// polyline per snapshot, plus `errors.csv` with the E-vs-ll history.
pub fn cmd_plotdata(report_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let lines = read_report(report_path)?;
    fs::create_dir_all(out_dir)?;

    let mut errors_csv = String::from("ll,E\n");
    for line in &lines {
        match line {
            ReportLine::Meta {
                initial_curve,
                truth_curve,
                ..
            } => {
                write_curve_polyline(initial_curve, &out_dir.join("initial.csv"))?;
                if let Some(truth) = truth_curve {
                    write_curve_polyline(truth, &out_dir.join("exact.csv"))?;
                }
            }
            ReportLine::Iteration(record) => {
                if let Some(e) = record.error {
                    errors_csv.push_str(&format!("{},{:.16e}\n", record.ll, e));
                }
                write_curve_polyline(
                    &record.curve,
                    &out_dir.join(format!("snapshot_ll{:04}.csv", record.ll)),
                )?;
            }
            ReportLine::Final { curve, .. } => {
                write_curve_polyline(curve, &out_dir.join("reconstructed.csv"))?;
            }
        }
    }
    fs::write(out_dir.join("errors.csv"), errors_csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.time.n_steps = 24;
        cfg.obs.n_bar = 4;
        cfg.forward.n_tilde = 10;
        cfg.inverse.n_tilde = 8;
        cfg.truth = CurveJson {
            center: [0.0, 0.0],
            kind: "circle".to_string(),
            alpha: vec![],
            beta: vec![],
            r0: Some(0.7),
        };
        cfg.inverse.initial.center = [0.0, 0.0];
        cfg.inverse.initial.r0 = 0.6;
        cfg
    }

    #[test]
    fn simulate_is_deterministic_and_shaped() {
        let dir = tempdir().unwrap();
        let cfg = tiny_config();
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        cmd_simulate(&cfg, &a, None, false).unwrap();
        cmd_simulate(&cfg, &b, None, false).unwrap();
        let bytes_a = fs::read(&a).unwrap();
        let bytes_b = fs::read(&b).unwrap();
        assert_eq!(bytes_a, bytes_b);

        let text = String::from_utf8(bytes_a).unwrap();
        let rows = text.lines().count() - 1;
        assert_eq!(rows, (cfg.time.n_steps + 1) * 2 * cfg.obs.n_bar);

        // different delta changes only the value columns
        let mut noisy_cfg = cfg.clone();
        noisy_cfg.noise.delta = 0.0;
        let c = dir.path().join("c.csv");
        cmd_simulate(&noisy_cfg, &c, None, false).unwrap();
        let clean = fs::read_to_string(&c).unwrap();
        for (la, lb) in text.lines().zip(clean.lines()).skip(1) {
            let ca: Vec<&str> = la.split(',').collect();
            let cb: Vec<&str> = lb.split(',').collect();
            assert_eq!(ca[..4], cb[..4]);
        }
    }

    #[test]
    fn trace_roundtrip_and_parse_errors() {
        let dir = tempdir().unwrap();
        let cfg = tiny_config();
        let path = dir.path().join("traces.csv");
        cmd_simulate(&cfg, &path, Some(5), false).unwrap();
        let (traces, meta) = read_traces(&path).unwrap();
        assert_eq!(traces.num_times(), cfg.time.n_steps + 1);
        assert_eq!(traces.num_points(), 2 * cfg.obs.n_bar);
        assert_eq!(meta.seed, 5);

        // corrupt one line; the error names it
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[16] = "garbage".to_string();
        fs::write(&path, lines.join("\n")).unwrap();
        let err = read_traces(&path).unwrap_err();
        match err {
            CliError::Validation(msg) => assert!(msg.contains("line 17"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invert_rejects_mismatched_config() {
        let dir = tempdir().unwrap();
        let cfg = tiny_config();
        let path = dir.path().join("traces.csv");
        cmd_simulate(&cfg, &path, None, false).unwrap();

        let mut other = cfg.clone();
        other.time.n_steps = 32;
        let err = cmd_invert(&path, &other, dir.path(), false).unwrap_err();
        match err {
            CliError::Validation(msg) => assert!(msg.contains("N:"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn invert_writes_report_and_final_curve() {
        let dir = tempdir().unwrap();
        let cfg = tiny_config();
        let path = dir.path().join("traces.csv");
        cmd_simulate(&cfg, &path, None, false).unwrap();
        let out = dir.path().join("run");
        let summary = cmd_invert(&path, &cfg, &out, false).unwrap();
        assert!(summary.iterations > 0);

        let lines = read_report(&out.join("report.jsonl")).unwrap();
        assert!(matches!(lines[0], ReportLine::Meta { .. }));
        assert!(matches!(lines.last(), Some(ReportLine::Final { .. })));

        let curve_text = fs::read_to_string(out.join("final_curve.json")).unwrap();
        let curve: CurveJson = serde_json::from_str(&curve_text).unwrap();
        assert_eq!(curve.kind, "trig");

        // plotdata bundle
        let plots = dir.path().join("plots");
        cmd_plotdata(&out.join("report.jsonl"), &plots).unwrap();
        assert!(plots.join("errors.csv").exists());
        assert!(plots.join("initial.csv").exists());
        assert!(plots.join("exact.csv").exists());
        assert!(plots.join("reconstructed.csv").exists());
        let n_snapshots = fs::read_dir(&plots)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("snapshot_ll")
            })
            .count();
        assert_eq!(n_snapshots, summary.iterations);

        // closed polylines
        let text = fs::read_to_string(plots.join("reconstructed.csv")).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        let first: Vec<&str> = rows[1].split(',').collect();
        let last: Vec<&str> = rows[rows.len() - 1].split(',').collect();
        assert_eq!(first[1..], last[1..]);
    }

    #[test]
    fn plotdata_on_empty_history() {
        let dir = tempdir().unwrap();
        let report = dir.path().join("report.jsonl");
        write_report(&report, &[]).unwrap();
        let out = dir.path().join("plots");
        cmd_plotdata(&report, &out).unwrap();
        let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
        assert_eq!(errors, "ll,E\n");
    }

    #[test]
    fn inverse_crime_flag_paths() {
        let dir = tempdir().unwrap();
        let mut cfg = tiny_config();
        cfg.inverse.n_tilde = cfg.forward.n_tilde;
        let path = dir.path().join("traces.csv");
        let err = cmd_simulate(&cfg, &path, None, false).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        cmd_simulate(&cfg, &path, None, true).unwrap();
    }
}
