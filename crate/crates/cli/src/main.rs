use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ecc_biometrics::codes::{far_bound, frr_bound};
use ecc_biometrics::harness::{
    equivalence_report, linkage_report, run_experiment, CodeSpec, CsvRow, ExperimentConfig,
    ExperimentOutput, Metric,
};
use ecc_biometrics::leakage::{
    exact_mutual_info, exact_single_system_leakage, leakage_rank_bound, LeakageQuery,
};
use ecc_biometrics::leakage::{single_system_leakage, LeakageMethod, LeakageReport};
use ecc_biometrics::multisys::{design_search, Objective, Preset};
use ecc_biometrics::schemes::{Scheme, SystemParams};
use ecc_biometrics::{BitMatrix, Error, Result};

#[derive(Parser)]
#[command(
    name = "eccbio",
    version,
    about = "Simulate and analyse ECC-based biometric authentication systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SimMetric {
    Frr,
    Far,
    Sar,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Write results into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Parity-check matrix file replacing the config's codes.
    #[arg(long)]
    matrix_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo estimate of FRR, FAR or SAR.
    Simulate {
        #[arg(value_enum)]
        metric: SimMetric,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form FRR and FAR bounds, from a config or from flags.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        /// Legitimate crossover probability.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Fuzzy commitment vs secure sketch comparison on the config's code.
    Equiv {
        #[command(flatten)]
        common: Common,
    },
    /// Privacy leakage: single-system from a config, or multi-system from
    /// one or more matrix files.
    Leakage {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parity-check matrix of a fully compromised system (repeatable).
        #[arg(long = "matrix-file")]
        matrix_files: Vec<PathBuf>,
        /// Enrollment noise per matrix, comma separated.
        #[arg(long, value_delimiter = ',')]
        noise: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linkage attacks on a three-system preset geometry.
    Linkage {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 8)]
        m: usize,
        #[arg(long, default_value_t = 24)]
        n: usize,
        #[arg(long, default_value = "ss")]
        scheme: String,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        keyed: bool,
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        #[arg(long, default_value_t = 0.0)]
        enroll_noise: f64,
        #[arg(long, default_value_t = 0.0)]
        probe_noise: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for parity-check tuples with good r_max / t_min.
    Design {
        #[arg(long, default_value_t = 3)]
        u: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        /// Size of compromised subsets.
        #[arg(long, default_value_t = 2)]
        l: usize,
        /// min_rmax, max_tmin, weighted or weighted:<lambda>.
        #[arg(long, default_value = "max_tmin")]
        objective: String,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(file) = &common.matrix_file {
        cfg.codes = vec![CodeSpec::MatrixFile { path: file.clone() }];
        cfg.preset = None;
    }
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>, name: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>, name: &str) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"), out, name)
}

fn finish(output: ExperimentOutput, id: &str, common: &Common) -> Result<i32> {
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    match (&common.out, common.format) {
        (Some(dir), _) => {
            let (csv, json) = output.write_files(dir, id)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        (None, Format::Csv) => print!("{}", output.csv_string()),
        (None, Format::Json) => println!("{}", serde_json::to_string_pretty(&output.summary)?),
    }
    Ok(output.exit_code())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { metric, common } => {
            let mut cfg = load_config(&common)?;
            cfg.metric = match metric {
                SimMetric::Frr => Metric::Frr,
                SimMetric::Far => Metric::Far,
                SimMetric::Sar => Metric::Sar,
            };
            let id = cfg.id.clone();
            finish(run_experiment(&cfg)?, &id, &common)
        }
        Command::Bounds {
            common,
            n,
            m,
            p,
            tau,
        } => {
            if common.config.is_some() {
                let mut cfg = load_config(&common)?;
                cfg.metric = Metric::Bounds;
                let id = cfg.id.clone();
                return finish(run_experiment(&cfg)?, &id, &common);
            }
            let (Some(n), Some(m), Some(p), Some(tau)) = (n, m, p, tau) else {
                return Err(Error::InvalidConfig(
                    "bounds needs --config or all of --n --m --p --tau".into(),
                ));
            };
            if m == 0 || m >= n {
                return Err(Error::InvalidParameter(format!(
                    "need 0 < m < n (m = {m}, n = {n})"
                )));
            }
            let rate = (n - m) as f64 / n as f64;
            let frr = frr_bound(n, p, tau, rate)?;
            let far = far_bound(n, m, tau)?;
            let warnings: Vec<String> = frr.warnings.iter().chain(&far.warnings).cloned().collect();
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let id = format!("bounds-n{n}-m{m}");
            let row = |metric: &str, bound: f64| CsvRow {
                experiment_id: id.clone(),
                metric: metric.into(),
                p_hat: None,
                ci_low: None,
                ci_high: None,
                bound: Some(bound),
                trials: 0,
                seed: 0,
            };
            let output = ExperimentOutput {
                rows: vec![row("frr", frr.value), row("far", far.value)],
                summary: json!({ "n": n, "m": m, "p": p, "tau": tau, "frr_bound": frr, "far_bound": far }),
                warnings,
            };
            finish(output, &id, &common)
        }
        Command::Equiv { common } => {
            let mut fc = load_config(&common)?;
            fc.scheme = Scheme::FuzzyCommitment;
            let mut ss = fc.clone();
            ss.scheme = Scheme::SecureSketch;
            let report = equivalence_report(&fc, &ss)?;
            match common.format {
                Format::Json => emit_json(
                    &serde_json::to_value(&report)?,
                    common.out.as_deref(),
                    "equiv.json",
                )?,
                Format::Csv => {
                    let mut rows = Vec::new();
                    for (metric, pair) in [("frr", report.frr), ("far", report.far)] {
                        for (scheme, e) in ["fc", "ss"].iter().zip(pair) {
                            rows.push(CsvRow {
                                experiment_id: format!("{}/{scheme}", fc.id),
                                metric: metric.into(),
                                p_hat: Some(e.p_hat),
                                ci_low: Some(e.ci_low),
                                ci_high: Some(e.ci_high),
                                bound: None,
                                trials: e.trials,
                                seed: fc.seed,
                            });
                        }
                    }
                    let out = ExperimentOutput {
                        rows,
                        warnings: Vec::new(),
                        summary: json!(null),
                    };
                    emit(&out.csv_string(), common.out.as_deref(), "equiv.csv")?;
                }
            }
            Ok(if report.all_consistent() { 0 } else { 2 })
        }
        Command::Leakage {
            config,
            matrix_files,
            noise,
            out,
        } => {
            let reports: Vec<LeakageReport> = if let Some(path) = config {
                let cfg = ExperimentConfig::from_path(&path)?;
                let spec = cfg.codes.first().ok_or_else(|| {
                    Error::InvalidConfig("leakage needs a code in the config".into())
                })?;
                let code = std::sync::Arc::new(spec.build()?);
                let params = SystemParams::new(cfg.scheme, cfg.keyed, cfg.tau[0], code)?;
                LeakageQuery::ALL
                    .into_iter()
                    .map(|q| match exact_single_system_leakage(&params, q) {
                        Ok(r) => Ok(r),
                        Err(Error::InstanceTooLarge(_)) => Ok(single_system_leakage(&params, q)),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<_>>()?
            } else {
                let mats = matrix_files
                    .iter()
                    .map(|p| BitMatrix::parse_text(&fs::read_to_string(p)?))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&BitMatrix> = mats.iter().collect();
                let noise = match noise.len() {
                    0 => vec![0.0; refs.len()],
                    1 => vec![noise[0]; refs.len()],
                    _ => noise,
                };
                let n = refs.first().map_or(1, |m| m.cols());
                let report = match exact_mutual_info(&refs, &noise, n) {
                    Err(Error::InstanceTooLarge(why)) => {
                        let rank = leakage_rank_bound(&refs)? as f64;
                        let noiseless = noise.iter().all(|&p| p == 0.0);
                        LeakageReport {
                            method: LeakageMethod::RankFormula,
                            // Exact only when enrollments are noiseless.
                            bits_leaked: rank,
                            bound: Some(rank),
                            params: json!({ "n": n, "systems": refs.len(), "noise": noise, "exact": noiseless, "note": why }),
                        }
                    }
                    other => other?,
                };
                vec![report]
            };
            emit_json(
                &serde_json::to_value(&reports)?,
                out.as_deref(),
                "leakage.json",
            )?;
            Ok(0)
        }
        Command::Linkage {
            preset,
            m,
            n,
            scheme,
            keyed,
            tau,
            enroll_noise,
            probe_noise,
            trials,
            seed,
            out,
        } => {
            let preset: Preset = preset.parse()?;
            let scheme: Scheme = scheme.parse()?;
            let report = linkage_report(
                preset,
                m,
                n,
                scheme,
                keyed,
                tau,
                enroll_noise,
                probe_noise,
                trials,
                seed,
            )?;
            emit_json(
                &serde_json::to_value(&report)?,
                out.as_deref(),
                "linkage.json",
            )?;
            Ok(0)
        }
        Command::Design {
            u,
            m,
            n,
            l,
            objective,
            restarts,
            seed,
            out,
        } => {
            let objective: Objective = objective.parse()?;
            let outcome = design_search(u, m, n, l, objective, seed, restarts)?;
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            let mut text = String::new();
            for (i, h) in outcome.matrices.iter().enumerate() {
                if i > 0 {
                    text.push_str("---\n");
                }
                text.push_str(&h.to_text());
            }
            let report = serde_json::to_value(&outcome)?;
            match out {
                Some(dir) => {
                    emit(&text, Some(&dir), "design.txt")?;
                    emit_json(&report, Some(&dir), "design.json")?;
                }
                None => {
                    print!("{text}");
                    println!("===");
                    println!("{}", serde_json::to_string_pretty(&report)?);
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
