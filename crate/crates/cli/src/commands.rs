//! The four subcommands. Each writes its machine-readable output under an
//! output directory and returns a short human summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use hk_noise::checks::{self, CheckOutcome, Scale};
use hk_noise::{
    derive_stream, estimate_mean_stopping_time, run_episode, EpisodeOutput, EstimateReport,
    ExperimentConfig, RecordMode, StopRule, StoppingRecord,
};

use crate::config::{Preset, RunConfigFile};
use crate::error::{CliError, CliResult};

/// Default number of steps drawn for a figure.
pub const FIGURE_HORIZON: u64 = 50_000;

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfigFile) -> CliResult<RunConfigFile> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(name);
    let f =
        File::create(&path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(name, e))
}

fn stop_summary(rec: &StoppingRecord) -> String {
    let show = |t: &hk_noise::StopTime| match t.value() {
        Some(v) => v.to_string(),
        None => format!("censored at {}", t.step),
    };
    let merges: Vec<String> = rec.merges.iter().map(show).collect();
    let mut s = format!(
        "T = {}, T_bar = [{}]",
        show(&rec.consensus),
        merges.join(", ")
    );
    if let Some(tl) = &rec.leader_capture {
        s += &format!(", T_l = {}", show(tl));
    }
    s
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    pub metrics_only: bool,
    pub run_to_horizon: bool,
}

/// One episode with run index 0 of the configured seed. Writes
/// `trajectory.csv` (or `metrics.csv`) and `stopping.json`.
pub fn simulate(cfg: &RunConfigFile, opts: SimulateOptions) -> CliResult<(StoppingRecord, String)> {
    let record = if opts.metrics_only {
        RecordMode::Metrics
    } else {
        RecordMode::Full
    };
    let stop = if opts.run_to_horizon {
        StopRule::Horizon
    } else {
        StopRule::AfterDetection { extra_steps: 0 }
    };
    let episode = cfg.episode()?.record(record).stop(stop);
    let (out, rec) = run_episode(&episode, &mut derive_stream(cfg.seed, 0))?;
    let dir = &cfg.output_dir;
    let name = match &out {
        EpisodeOutput::Trajectory(traj) => {
            let mut w = create(dir, "trajectory.csv")?;
            traj.write_csv(&mut w)?;
            w.flush().map_err(|e| CliError::io("trajectory.csv", e))?;
            "trajectory.csv"
        }
        EpisodeOutput::Metrics(rows) => {
            let mut w = create(dir, "metrics.csv")?;
            hk_noise::write_metrics_csv(rows, &mut w)?;
            w.flush().map_err(|e| CliError::io("metrics.csv", e))?;
            "metrics.csv"
        }
        EpisodeOutput::None => unreachable!("simulate always records"),
    };
    write_json(dir, "stopping.json", &rec)?;
    let summary = format!(
        "{} steps, {}\nwrote {} and stopping.json to {}",
        rec.steps,
        stop_summary(&rec),
        name,
        dir.display()
    );
    Ok((rec, summary))
}

/// Truncation horizons: the decades from 10^3 below the horizon, then the
/// horizon itself.
pub fn default_horizons(horizon: u64) -> Vec<u64> {
    let mut hs: Vec<u64> = (3..19)
        .map(|k| 10u64.pow(k))
        .take_while(|&h| h < horizon)
        .collect();
    hs.push(horizon);
    hs
}

/// Monte Carlo estimate of the mean stopping time. Writes `estimate.json`.
pub fn estimate(cfg: &RunConfigFile, parallelism: usize) -> CliResult<(EstimateReport, String)> {
    if parallelism == 0 {
        return Err(CliError::Usage("--parallelism must be at least 1".into()));
    }
    let exp = ExperimentConfig::new(cfg.episode()?, cfg.runs, cfg.seed)
        .horizons(default_horizons(cfg.horizon))
        .parallelism(parallelism);
    let report = estimate_mean_stopping_time(&exp)?;
    write_json(&cfg.output_dir, "estimate.json", &report)?;
    let bound = match report.analytic_bound.finite() {
        Some(b) => format!("{b:.1}"),
        None => "infinite".to_string(),
    };
    let mut summary =
        format!(
        "{} runs of {}: mean (uncensored) {}, censored-aware mean {:.1}, censored {:.3}, bound {}",
        report.runs,
        serde_json::to_value(report.quantity)?.as_str().unwrap_or("?"),
        report
            .mean_uncensored
            .map_or("n/a".to_string(), |m| format!("{m:.1}")),
        report.mean_lower_bound,
        report.censor_fraction,
        bound
    );
    for note in &report.notes {
        summary += &format!("\nnote: {note}");
    }
    summary += &format!("\nwrote estimate.json to {}", cfg.output_dir.display());
    Ok((report, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    NoiseFree,
    Lemma2,
    Oriented,
    NeutralTail,
    Leader,
    WalkOracle,
    Wald,
    Determinism,
    All,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    pub scale: Scale,
    pub checks: Vec<CheckOutcome>,
}

/// Runs the selected checks and writes `verify.json`. A failed check is
/// reported through `passed`, not as an error.
pub fn verify(suite: Suite, seed: u64, parallelism: usize, out: &Path) -> CliResult<VerifyReport> {
    let scale = Scale::acceptance();
    let want = |s: Suite| suite == s || suite == Suite::All;
    let mut list = Vec::new();
    if want(Suite::NoiseFree) {
        list.push(checks::noise_free_dichotomy(seed, &scale)?);
    }
    if want(Suite::Lemma2) {
        list.push(checks::cohesion_persistence(seed, &scale)?);
    }
    if want(Suite::Oriented) || want(Suite::NeutralTail) {
        let (outcome, report) = checks::oriented_consensus(seed, parallelism, &scale)?;
        if want(Suite::Oriented) {
            list.push(outcome);
        }
        if want(Suite::NeutralTail) {
            list.push(checks::neutral_tail(
                seed,
                parallelism,
                report.mean_lower_bound,
                &scale,
            )?);
        }
    }
    if want(Suite::Leader) {
        list.push(checks::leader_capture(seed, &scale)?);
    }
    if want(Suite::WalkOracle) {
        list.push(checks::walk_oracle(seed, &scale)?);
    }
    if want(Suite::Wald) {
        list.push(checks::wald_identity(seed, &scale)?);
    }
    if want(Suite::Determinism) {
        list.push(determinism_check(seed, &out.join("determinism"))?);
    }
    let report = VerifyReport {
        suite,
        seed,
        passed: list.iter().all(|c| c.passed),
        scale,
        checks: list,
    };
    write_json(out, "verify.json", &report)?;
    Ok(report)
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

/// Repeats `simulate` and `estimate` with one seed and compares the output
/// files byte for byte, including estimates at parallelism 1 and 8.
pub fn determinism_check(seed: u64, dir: &Path) -> CliResult<CheckOutcome> {
    let mut failures = Vec::new();
    for (preset, opts) in [
        (Preset::Fig4, SimulateOptions::default()),
        (
            Preset::Fig2,
            SimulateOptions {
                metrics_only: true,
                run_to_horizon: false,
            },
        ),
    ] {
        let file = if opts.metrics_only {
            "metrics.csv"
        } else {
            "trajectory.csv"
        };
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let mut cfg = preset.config();
            cfg.seed = seed;
            cfg.output_dir = dir.join(format!("simulate-{preset}-{rep}"));
            simulate(&cfg, opts)?;
            outputs.push((
                read(&cfg.output_dir.join(file))?,
                read(&cfg.output_dir.join("stopping.json"))?,
            ));
        }
        if outputs[0] != outputs[1] {
            failures.push(format!("simulate {preset} differs between repeats"));
        }
    }
    let mut estimates = Vec::new();
    for (tag, threads) in [("p1a", 1), ("p1b", 1), ("p8", 8)] {
        let mut cfg = Preset::Fig2.config();
        cfg.seed = seed;
        cfg.runs = 40;
        cfg.output_dir = dir.join(format!("estimate-{tag}"));
        estimate(&cfg, threads)?;
        estimates.push(read(&cfg.output_dir.join("estimate.json"))?);
    }
    if estimates[0] != estimates[1] {
        failures.push("estimate differs between repeats".into());
    }
    if estimates[0] != estimates[2] {
        failures.push("estimate differs between parallelism 1 and 8".into());
    }
    let passed = failures.is_empty();
    let detail = if passed {
        "simulate (full and metrics) and estimate outputs are byte-identical across repeats and parallelism 1/8".to_string()
    } else {
        failures.join("; ")
    };
    Ok(CheckOutcome {
        id: 8,
        name: "determinism",
        passed,
        evidence: "exact",
        detail,
    })
}

const PLOT_STUB: &str = r#"import sys

import matplotlib.pyplot as plt
import pandas as pd

data = pd.read_csv(sys.argv[1] if len(sys.argv) > 1 else "{csv}")
agents = [c for c in data.columns if c.startswith("x_")]
for c in agents:
    plt.plot(data["t"], data[c], linewidth=0.6)
if "leader" in data.columns:
    plt.plot(data["t"], data["leader"], "k--", linewidth=0.8, label="leader")
    plt.legend()
plt.xlabel("t")
plt.ylabel("opinion")
plt.title("{preset}")
plt.savefig("{preset}.png", dpi=150)
"#;

/// Runs a figure preset for a fixed number of steps and writes the
/// trajectory, its stopping times, the configuration echo and a plot stub.
pub fn figure(preset: Preset, overrides: &Overrides) -> CliResult<String> {
    let mut cfg = preset.config();
    cfg.horizon = FIGURE_HORIZON;
    let cfg = overrides.apply(cfg)?;
    let episode = cfg
        .episode()?
        .record(RecordMode::Full)
        .stop(StopRule::Horizon);
    let (out, rec) = run_episode(&episode, &mut derive_stream(cfg.seed, 0))?;
    let dir = &cfg.output_dir;
    let csv = format!("{preset}.csv");
    let mut w = create(dir, &csv)?;
    out.trajectory().expect("full record").write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::io(csv.clone(), e))?;
    write_json(dir, &format!("{preset}_stopping.json"), &rec)?;
    write_json(dir, &format!("{preset}_config.json"), &cfg)?;
    let stub = PLOT_STUB
        .replace("{csv}", &csv)
        .replace("{preset}", &preset.to_string());
    let script = format!("plot_{preset}.py");
    create(dir, &script)?
        .write_all(stub.as_bytes())
        .map_err(|e| CliError::io(script.clone(), e))?;
    Ok(format!(
        "{}\n{}\nwrote {csv}, {preset}_stopping.json, {preset}_config.json and {script} to {}",
        echo(preset, &cfg),
        stop_summary(&rec),
        dir.display()
    ))
}

/// One-line echo of the preset's model parameters.
pub fn echo(preset: Preset, cfg: &RunConfigFile) -> String {
    let mut s = format!(
        "{preset}: n={} epsilon={} delta1={} delta2={}",
        cfg.n, cfg.epsilon, cfg.delta1, cfg.delta2
    );
    if let Some(a) = cfg.leader {
        s += &format!(" leader={a}");
    }
    s + &format!(" seed={} steps={}", cfg.seed, cfg.horizon)
}
