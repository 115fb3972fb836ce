//! Seeded Monte Carlo estimation of FRR, FAR and SAR, bound comparison and
//! experiment plumbing.
//!
//! Every trial draws its randomness from substreams keyed by the master
//! seed and the trial index, and results are plain counts, so outputs do
//! not depend on the number of threads.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adversary::{mount, AttackTag, BiometricId, CompromiseSet};
use crate::biomodel::{bsc_apply, composite_crossover, substream, StreamRole};
use crate::codes::{far_bound, frr_bound, BoundValue, CosetLeaderTable, LinearCode};
use crate::error::{Error, Result};
use crate::gf2::{residual_rank, BitMatrix, BitVec};
use crate::multisys::{sar_lower_bound, MultiSystemConfig, Preset};
use crate::schemes::{authenticate, enroll, Scheme, SystemParams};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959963984540054;

pub const DEFAULT_TRIALS: u64 = 100_000;

/// Hit count over a number of trials with a 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Self {
        assert!(
            trials > 0 && hits <= trials,
            "need 0 <= hits <= trials, trials > 0"
        );
        let n = trials as f64;
        let p = hits as f64 / n;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        // Clamp so rounding never pushes the interval past p_hat or [0, 1].
        Self {
            trials,
            hits,
            p_hat: p,
            ci_low: (centre - half).clamp(0.0, p),
            ci_high: (centre + half).clamp(p, 1.0),
        }
    }

    pub fn overlaps(&self, other: &RateEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Where the parity-check matrix of a system comes from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CodeSpec {
    Hamming {
        r: usize,
    },
    Random {
        m: usize,
        n: usize,
        seed: u64,
    },
    /// Rows of `H` as 0/1 strings.
    Matrix {
        rows: Vec<String>,
    },
    /// `H` in the text matrix format.
    MatrixFile {
        path: PathBuf,
    },
}

impl CodeSpec {
    pub fn build(&self) -> Result<LinearCode> {
        match self {
            CodeSpec::Hamming { r } => LinearCode::hamming(*r),
            CodeSpec::Random { m, n, seed } => {
                LinearCode::random(*m, *n, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
            CodeSpec::Matrix { rows } => {
                let rows: Vec<&str> = rows.iter().map(String::as_str).collect();
                LinearCode::from_parity_check(BitMatrix::from_strs(&rows)?)
            }
            CodeSpec::MatrixFile { path } => {
                LinearCode::from_parity_check(BitMatrix::parse_text(&fs::read_to_string(path)?)?)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetSpec {
    pub name: Preset,
    pub m: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Frr,
    Far,
    Sar,
    /// Closed-form FRR and FAR bounds only.
    Bounds,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Frr => "frr",
            Metric::Far => "far",
            Metric::Sar => "sar",
            Metric::Bounds => "bounds",
        }
    }
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

/// One experiment, as read from a JSON config file.
///
/// `codes` holds one entry per system or a single entry shared by all;
/// noise lists hold one entry per system, a single shared entry, or nothing
/// (noiseless). A `preset` replaces `codes` with a three-system geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub id: String,
    pub metric: Metric,
    pub scheme: Scheme,
    pub keyed: bool,
    #[serde(default)]
    pub codes: Vec<CodeSpec>,
    #[serde(default)]
    pub preset: Option<PresetSpec>,
    #[serde(default)]
    pub enroll_noise: Vec<f64>,
    #[serde(default)]
    pub probe_noise: Vec<f64>,
    pub tau: Vec<f64>,
    #[serde(default)]
    pub attack: Option<AttackTag>,
    #[serde(default)]
    pub compromise: Option<CompromiseSet>,
    #[serde(default)]
    pub target: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Parses JSON, reporting the line of the first syntax or schema error.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn expand<T: Clone>(values: &[T], u: usize, fill: T, what: &str) -> Result<Vec<T>> {
    match values.len() {
        0 => Ok(vec![fill; u]),
        1 => Ok(vec![values[0].clone(); u]),
        len if len == u => Ok(values.to_vec()),
        len => Err(Error::InvalidConfig(format!(
            "{what} has {len} entries for {u} systems"
        ))),
    }
}

/// A validated config with its codes and coset tables built once.
#[derive(Clone, Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    codes: Vec<(Arc<LinearCode>, Arc<CosetLeaderTable>)>,
    enroll_noise: Vec<f64>,
    probe_noise: Vec<f64>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        if config.id.is_empty() {
            return Err(Error::InvalidConfig("empty experiment id".into()));
        }
        if config.tau.is_empty() {
            return Err(Error::InvalidConfig("tau list is empty".into()));
        }
        if let Some(t) = config.tau.iter().find(|t| !(**t > 0.0 && **t < 0.5)) {
            return Err(Error::InvalidConfig(format!("tau = {t} outside (0, 0.5)")));
        }
        let codes: Vec<Arc<LinearCode>> = match (&config.preset, config.codes.is_empty()) {
            (Some(_), false) => {
                return Err(Error::InvalidConfig(
                    "give either codes or a preset, not both".into(),
                ))
            }
            (None, true) => return Err(Error::InvalidConfig("no codes given".into())),
            (Some(p), true) => p
                .name
                .matrices(p.m, p.n, &mut ChaCha8Rng::seed_from_u64(p.seed))?
                .into_iter()
                .map(|h| LinearCode::from_parity_check(h).map(Arc::new))
                .collect::<Result<_>>()?,
            (None, false) => {
                let built = config
                    .codes
                    .iter()
                    .map(|c| c.build().map(Arc::new))
                    .collect::<Result<Vec<_>>>()?;
                let u = built
                    .len()
                    .max(config.enroll_noise.len())
                    .max(config.probe_noise.len());
                if built.len() == 1 {
                    vec![built[0].clone(); u]
                } else {
                    built
                }
            }
        };
        let u = codes.len();
        let n = codes[0].n();
        if let Some(c) = codes.iter().find(|c| c.n() != n) {
            return Err(Error::InvalidConfig(format!(
                "codes disagree on n ({n} vs {})",
                c.n()
            )));
        }
        let enroll_noise = expand(&config.enroll_noise, u, 0.0, "enroll_noise")?;
        let probe_noise = expand(&config.probe_noise, u, 0.0, "probe_noise")?;
        if config.target >= u {
            return Err(Error::InvalidConfig(format!(
                "target {} but only {u} systems",
                config.target
            )));
        }
        if config.metric == Metric::Sar && config.attack.is_none() {
            return Err(Error::InvalidConfig("sar needs an attack".into()));
        }
        if let Some(c) = &config.compromise {
            if c.systems.len() > u {
                return Err(Error::InvalidConfig(format!(
                    "compromise lists {} systems, have {u}",
                    c.systems.len()
                )));
            }
        }
        // Shared codes share one table.
        let mut tables: Vec<(Arc<LinearCode>, Arc<CosetLeaderTable>)> = Vec::with_capacity(u);
        for code in codes {
            let table = match tables.iter().find(|(c, _)| Arc::ptr_eq(c, &code)) {
                Some((_, t)) => t.clone(),
                None => Arc::new(CosetLeaderTable::build(&code)?),
            };
            tables.push((code, table));
        }
        Ok(Self {
            config,
            codes: tables,
            enroll_noise,
            probe_noise,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn u(&self) -> usize {
        self.codes.len()
    }

    pub fn n(&self) -> usize {
        self.codes[0].0.n()
    }

    pub fn target_code(&self) -> &LinearCode {
        &self.codes[self.config.target].0
    }

    pub fn compromise(&self) -> CompromiseSet {
        self.config
            .compromise
            .clone()
            .unwrap_or_else(|| CompromiseSet::none(self.u()))
    }

    pub fn systems(&self, tau: f64) -> Result<MultiSystemConfig> {
        let systems = self
            .codes
            .iter()
            .map(|(c, t)| {
                SystemParams::with_table(
                    self.config.scheme,
                    self.config.keyed,
                    tau,
                    c.clone(),
                    t.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MultiSystemConfig::new(systems, self.enroll_noise.clone(), self.probe_noise.clone())
    }

    /// Crossover between the target's enrollment and a legitimate probe.
    pub fn legitimate_crossover(&self) -> f64 {
        let j = self.config.target;
        composite_crossover(self.enroll_noise[j], self.probe_noise[j])
    }

    pub fn estimate(&self, metric: Metric, tau: f64, trials: u64) -> Result<RateEstimate> {
        if trials == 0 {
            return Err(Error::InvalidConfig(
                "estimation needs at least one trial".into(),
            ));
        }
        let sys = self.systems(tau)?;
        let seed = self.config.seed;
        let j = self.config.target;
        let set = self.compromise();
        let attack = self.config.attack;
        let hits = count_trials(trials, |t| {
            let mut world = substream(seed, t, StreamRole::World);
            let mut act = substream(seed, t, StreamRole::Attack);
            let d = sys.deploy(&mut world)?;
            let rec = &d.records[j];
            match metric {
                Metric::Frr => {
                    let b = d.probe(j, &mut act)?;
                    Ok(!authenticate(rec, &b, rec.key())?.accepted)
                }
                Metric::Far => {
                    let a = crate::adversary::attack_uninformed(rec.params(), &mut act);
                    Ok(authenticate(rec, &a.probe, &a.key)?.accepted)
                }
                Metric::Sar => {
                    let tag =
                        attack.ok_or_else(|| Error::InvalidConfig("sar needs an attack".into()))?;
                    let a = mount(tag, &d.view(&set)?, j, &mut act)?;
                    Ok(authenticate(rec, &a.probe, &a.key)?.accepted)
                }
                Metric::Bounds => Err(Error::InvalidConfig("bounds are not estimated".into())),
            }
        })?;
        Ok(RateEstimate::from_counts(hits, trials))
    }

    pub fn frr_bound(&self, tau: f64) -> Result<BoundValue> {
        let code = self.target_code();
        frr_bound(code.n(), self.legitimate_crossover(), tau, code.rate())
    }

    pub fn far_bound(&self, tau: f64) -> Result<BoundValue> {
        let code = self.target_code();
        far_bound(code.n(), code.m(), tau)
    }

    /// Residual rank of the target over the fully compromised systems.
    pub fn target_residual(&self) -> Result<usize> {
        let set = self.compromise();
        let j = self.config.target;
        let stack: Vec<&BitMatrix> = (0..self.u())
            .filter(|&i| {
                i != j
                    && (set.exposure(i).fully_compromised()
                        || (set.exposure(i).stored && !self.config.keyed))
            })
            .map(|i| self.codes[i].0.parity_check())
            .collect();
        residual_rank(&stack, self.codes[j].0.parity_check())
    }

    /// Reference value for a SAR run: exact 1 where an attack provably
    /// always wins, the FAR bound where compromised data is useless, and
    /// `2^-t` for linkage attacks.
    pub fn sar_reference(&self, tau: f64) -> Result<Option<f64>> {
        let j = self.config.target;
        let set = self.compromise();
        let keyed = self.config.keyed;
        Ok(match self.config.attack {
            None => None,
            Some(AttackTag::Uninformed) => Some(self.far_bound(tau)?.value),
            Some(AttackTag::Stored) => Some(1.0),
            Some(AttackTag::BiometricAndKey) => {
                let a = set.biometric_exposed(BiometricId::Enrollment(j));
                let k = set.exposure(j).key || !keyed;
                Some(if a && k {
                    1.0
                } else {
                    self.far_bound(tau)?.value
                })
            }
            Some(AttackTag::Substitute) => None,
            Some(AttackTag::RankLinked) | Some(AttackTag::CosetSampling) => {
                Some(sar_lower_bound(self.target_residual()?))
            }
        })
    }

    /// Violations of the operating assumptions for the target system.
    pub fn warnings(&self, tau: f64) -> Result<Vec<String>> {
        let sys = self.systems(tau)?;
        let mut w = sys
            .system(self.config.target)?
            .assumption_warnings(self.legitimate_crossover());
        for b in [self.frr_bound(tau)?, self.far_bound(tau)?] {
            w.extend(b.warnings);
        }
        w.sort();
        w.dedup();
        Ok(w)
    }
}

/// Counts trials for which `f` returns true, in parallel.
pub fn count_trials<F>(trials: u64, f: F) -> Result<u64>
where
    F: Fn(u64) -> Result<bool> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| f(t).map(u64::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

fn single_tau(config: &ExperimentConfig) -> f64 {
    config.tau[0]
}

/// Rejection rate of legitimate probes (first tau in the config).
pub fn estimate_frr(config: &ExperimentConfig) -> Result<RateEstimate> {
    Experiment::new(config.clone())?.estimate(Metric::Frr, single_tau(config), config.trials)
}

/// Acceptance rate of uniformly random `(C, J)` (first tau in the config).
pub fn estimate_far(config: &ExperimentConfig) -> Result<RateEstimate> {
    Experiment::new(config.clone())?.estimate(Metric::Far, single_tau(config), config.trials)
}

/// Success rate of the configured attack (first tau in the config).
pub fn estimate_sar(config: &ExperimentConfig) -> Result<RateEstimate> {
    Experiment::new(config.clone())?.estimate(Metric::Sar, single_tau(config), config.trials)
}

/// One output line. Missing values serialize as empty CSV cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment_id: String,
    pub metric: String,
    pub p_hat: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bound: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<CsvRow>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl ExperimentOutput {
    /// 0 on success, 2 when operating assumptions are violated.
    pub fn exit_code(&self) -> i32 {
        if self.warnings.is_empty() {
            0
        } else {
            2
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Writes `<id>.csv` and `<id>.json` into `dir`, returning both paths.
    pub fn write_files(&self, dir: &Path, id: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let stem: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(fs::File::create(&csv_path)?)?;
        fs::write(
            &json_path,
            serde_json::to_string_pretty(&self.summary)? + "\n",
        )?;
        Ok((csv_path, json_path))
    }
}

/// Runs every tau in the config. With several taus the row id becomes
/// `<id>/tau=<tau>`. With `trials = 0` (or metric `bounds`) only bound
/// columns are filled.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let exp = Experiment::new(config.clone())?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let sweep = config.tau.len() > 1;
    for &tau in &config.tau {
        let id = if sweep {
            format!("{}/tau={tau}", config.id)
        } else {
            config.id.clone()
        };
        warnings.extend(
            exp.warnings(tau)?
                .into_iter()
                .map(|w| format!("tau = {tau}: {w}")),
        );
        let metrics: &[Metric] = match config.metric {
            Metric::Bounds => &[Metric::Frr, Metric::Far],
            m => match m {
                Metric::Frr => &[Metric::Frr],
                Metric::Far => &[Metric::Far],
                _ => &[Metric::Sar],
            },
        };
        for &metric in metrics {
            let bound = match metric {
                Metric::Frr => Some(exp.frr_bound(tau)?.value),
                Metric::Far => Some(exp.far_bound(tau)?.value),
                _ => exp.sar_reference(tau)?,
            };
            let est = if config.metric == Metric::Bounds || config.trials == 0 {
                None
            } else {
                Some(exp.estimate(metric, tau, config.trials)?)
            };
            rows.push(CsvRow {
                experiment_id: id.clone(),
                metric: metric.as_str().to_string(),
                p_hat: est.map(|e| e.p_hat),
                ci_low: est.map(|e| e.ci_low),
                ci_high: est.map(|e| e.ci_high),
                bound,
                trials: est.map_or(0, |e| e.trials),
                seed: config.seed,
            });
        }
    }
    let code = exp.target_code();
    let summary = json!({
        "id": config.id,
        "metric": config.metric,
        "scheme": config.scheme,
        "keyed": config.keyed,
        "systems": exp.u(),
        "target": config.target,
        "n": code.n(),
        "m": code.m(),
        "attack": config.attack,
        "seed": config.seed,
        "trials": config.trials,
        "rows": rows,
        "warnings": warnings,
    });
    Ok(ExperimentOutput {
        rows,
        warnings,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageRow {
    pub scheme: Scheme,
    pub keyed: bool,
    pub storage_bits: usize,
    pub key_bits: usize,
}

/// Expected SAR of a single-system exposure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SarExpectation {
    /// Every trial succeeds.
    One,
    /// Statistically indistinguishable from the FAR.
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarRow {
    pub scheme: Scheme,
    pub keyed: bool,
    pub exposed: String,
    pub attack: AttackTag,
    pub expected: SarExpectation,
    pub estimate: RateEstimate,
    pub far: RateEstimate,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub coupled_trials: u64,
    pub coupled_agreements: u64,
    pub frr: [RateEstimate; 2],
    pub far: [RateEstimate; 2],
    pub frr_overlap: bool,
    pub far_overlap: bool,
    pub storage: Vec<StorageRow>,
    pub sar: Vec<SarRow>,
}

impl EquivalenceReport {
    pub fn all_consistent(&self) -> bool {
        self.coupled_agreements == self.coupled_trials
            && self.frr_overlap
            && self.far_overlap
            && self.sar.iter().all(|r| r.consistent)
    }
}

fn same_except_scheme(fc: &ExperimentConfig, ss: &ExperimentConfig) -> bool {
    let mut a = fc.clone();
    let mut b = ss.clone();
    for c in [&mut a, &mut b] {
        c.scheme = Scheme::FuzzyCommitment;
        c.seed = 0;
        c.id.clear();
    }
    a == b
}

/// Compares fuzzy commitment and secure sketch on matched parameters.
///
/// The coupled run feeds both schemes the same `(A, B)` per trial and counts
/// identical legitimate-path decisions. FRR and FAR are then estimated
/// independently (the SS run uses a seed derived from `ss.seed`), and the
/// SAR of every single-system exposure is measured for all four variants.
pub fn equivalence_report(
    fc: &ExperimentConfig,
    ss: &ExperimentConfig,
) -> Result<EquivalenceReport> {
    if fc.scheme != Scheme::FuzzyCommitment || ss.scheme != Scheme::SecureSketch {
        return Err(Error::InvalidConfig(
            "expected a fuzzy commitment and a secure sketch config".into(),
        ));
    }
    if !same_except_scheme(fc, ss) {
        return Err(Error::InvalidConfig(
            "parameter mismatch between the two configs".into(),
        ));
    }
    let fc_exp = Experiment::new(fc.clone())?;
    if fc_exp.u() != 1 {
        return Err(Error::InvalidConfig(
            "equivalence is defined for a single system".into(),
        ));
    }
    let tau = single_tau(fc);
    let trials = fc.trials.max(1);
    let code = fc_exp.target_code().clone();
    let (n, m) = (code.n(), code.m());

    let params = |scheme, keyed| -> Result<SystemParams> {
        let (c, t) = &fc_exp.codes[0];
        SystemParams::with_table(scheme, keyed, tau, c.clone(), t.clone())
    };
    let p_fc = params(Scheme::FuzzyCommitment, fc.keyed)?;
    let p_ss = params(Scheme::SecureSketch, fc.keyed)?;
    let (pe, pp) = (fc_exp.enroll_noise[0], fc_exp.probe_noise[0]);
    let seed = fc.seed;
    let agreements = count_trials(trials, |t| {
        let mut world = substream(seed, t, StreamRole::World);
        let a0 = BitVec::random(n, &mut world);
        let a = bsc_apply(&a0, pe, &mut world)?;
        let b = bsc_apply(&a0, pp, &mut world)?;
        let mut own = substream(seed, t, StreamRole::Enrollment);
        let r_fc = enroll(&p_fc, &a, &mut own)?;
        let r_ss = enroll(&p_ss, &a, &mut own)?;
        let d_fc = authenticate(&r_fc, &b, r_fc.key())?;
        let d_ss = authenticate(&r_ss, &b, r_ss.key())?;
        Ok(d_fc.accepted == d_ss.accepted)
    })?;

    let mut ss_indep = ss.clone();
    ss_indep.seed = ss.seed.rotate_left(32) ^ 0x5bd1_e995_5bd1_e995;
    let ss_exp = Experiment::new(ss_indep)?;
    let frr = [
        fc_exp.estimate(Metric::Frr, tau, trials)?,
        ss_exp.estimate(Metric::Frr, tau, trials)?,
    ];
    let far = [
        fc_exp.estimate(Metric::Far, tau, trials)?,
        ss_exp.estimate(Metric::Far, tau, trials)?,
    ];

    let mut storage = Vec::new();
    let mut sar = Vec::new();
    for scheme in [Scheme::FuzzyCommitment, Scheme::SecureSketch] {
        for keyed in [true, false] {
            let p = params(scheme, keyed)?;
            storage.push(StorageRow {
                scheme,
                keyed,
                storage_bits: p.stored_len(),
                key_bits: if keyed { p.key_len() } else { 0 },
            });
            let mut base = fc.clone();
            base.scheme = scheme;
            base.keyed = keyed;
            base.metric = Metric::Far;
            let far_ref = Experiment::new(base.clone())?.estimate(Metric::Far, tau, trials)?;
            let none = CompromiseSet::none(1);
            let a_only = none.clone().expose_biometric(BiometricId::Enrollment(0));
            let scenarios = [
                (
                    "S",
                    AttackTag::Stored,
                    none.clone().expose(0, true, false),
                    SarExpectation::One,
                ),
                (
                    "K",
                    if keyed {
                        AttackTag::BiometricAndKey
                    } else {
                        AttackTag::Uninformed
                    },
                    none.clone().expose(0, false, true),
                    SarExpectation::Far,
                ),
                (
                    "A",
                    AttackTag::BiometricAndKey,
                    a_only.clone(),
                    if keyed {
                        SarExpectation::Far
                    } else {
                        SarExpectation::One
                    },
                ),
                (
                    "A,K",
                    AttackTag::BiometricAndKey,
                    a_only.expose(0, false, true),
                    SarExpectation::One,
                ),
            ];
            for (label, tag, set, expected) in scenarios {
                let mut cfg = base.clone();
                cfg.metric = Metric::Sar;
                cfg.attack = Some(tag);
                cfg.compromise = Some(set);
                let est = Experiment::new(cfg)?.estimate(Metric::Sar, tau, trials)?;
                let consistent = match expected {
                    SarExpectation::One => est.hits == est.trials,
                    SarExpectation::Far => est.overlaps(&far_ref),
                };
                sar.push(SarRow {
                    scheme,
                    keyed,
                    exposed: label.to_string(),
                    attack: tag,
                    expected,
                    estimate: est,
                    far: far_ref,
                    consistent,
                });
            }
        }
    }
    Ok(EquivalenceReport {
        n,
        m,
        tau,
        coupled_trials: trials,
        coupled_agreements: agreements,
        frr_overlap: frr[0].overlaps(&frr[1]),
        far_overlap: far[0].overlaps(&far[1]),
        frr,
        far,
        storage,
        sar,
    })
}

/// Linkage attacks against system 2 of a preset geometry with systems 0
/// and 1 fully exposed and the target key known.
#[derive(Clone, Debug, Serialize)]
pub struct LinkageReport {
    pub preset: Preset,
    pub m: usize,
    pub n: usize,
    pub profile: crate::multisys::DesignReport,
    pub residual: usize,
    pub sar_lower_bound: f64,
    pub far: RateEstimate,
    /// Only run when the residual rank is zero.
    pub rank_linked: Option<RateEstimate>,
    pub coset_sampling: RateEstimate,
}

#[allow(clippy::too_many_arguments)]
pub fn linkage_report(
    preset: Preset,
    m: usize,
    n: usize,
    scheme: Scheme,
    keyed: bool,
    tau: f64,
    enroll_noise: f64,
    probe_noise: f64,
    trials: u64,
    seed: u64,
) -> Result<LinkageReport> {
    let base = ExperimentConfig {
        id: preset.to_string(),
        metric: Metric::Sar,
        scheme,
        keyed,
        codes: Vec::new(),
        preset: Some(PresetSpec {
            name: preset,
            m,
            n,
            seed,
        }),
        enroll_noise: vec![enroll_noise],
        probe_noise: vec![probe_noise],
        tau: vec![tau],
        attack: Some(AttackTag::CosetSampling),
        compromise: Some(Preset::scenario()),
        target: Preset::TARGET,
        trials,
        seed,
    };
    let exp = Experiment::new(base.clone())?;
    let mats: Vec<&BitMatrix> = exp.codes.iter().map(|(c, _)| c.parity_check()).collect();
    let profile = crate::multisys::rank_profiles(&mats, 2)?;
    let residual = exp.target_residual()?;
    let far = exp.estimate(Metric::Far, tau, trials)?;
    let coset_sampling = exp.estimate(Metric::Sar, tau, trials)?;
    let rank_linked = if residual == 0 {
        let mut cfg = base;
        cfg.attack = Some(AttackTag::RankLinked);
        Some(Experiment::new(cfg)?.estimate(Metric::Sar, tau, trials)?)
    } else {
        None
    };
    Ok(LinkageReport {
        preset,
        m,
        n,
        profile,
        residual,
        sar_lower_bound: sar_lower_bound(residual),
        far,
        rank_linked,
        coset_sampling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base(metric: Metric, scheme: Scheme, keyed: bool) -> ExperimentConfig {
        ExperimentConfig {
            id: "t".into(),
            metric,
            scheme,
            keyed,
            codes: vec![CodeSpec::Hamming { r: 4 }],
            preset: None,
            enroll_noise: vec![0.03],
            probe_noise: vec![0.03],
            tau: vec![0.2],
            attack: None,
            compromise: None,
            target: 0,
            trials: 2_000,
            seed: 42,
        }
    }

    #[test]
    fn wilson_interval_values() {
        let e = RateEstimate::from_counts(0, 100);
        assert_eq!((e.p_hat, e.ci_low), (0.0, 0.0));
        assert!((e.ci_high - 0.036995).abs() < 1e-5);
        let e = RateEstimate::from_counts(50, 100);
        assert!((e.ci_low - 0.403832).abs() < 1e-5 && (e.ci_high - 0.596168).abs() < 1e-5);
        let e = RateEstimate::from_counts(100, 100);
        assert_eq!((e.p_hat, e.ci_high), (1.0, 1.0));
    }

    #[test]
    fn config_round_trips() {
        let mut c = base(Metric::Sar, Scheme::SecureSketch, true);
        c.codes.push(CodeSpec::Random {
            m: 4,
            n: 15,
            seed: 9,
        });
        c.codes.push(CodeSpec::Matrix {
            rows: vec!["1".repeat(15), "0".repeat(14) + "1"],
        });
        c.tau = vec![0.1, 0.2, 0.30000000000000004];
        c.attack = Some(AttackTag::BiometricAndKey);
        c.compromise = Some(
            CompromiseSet::none(3)
                .expose(1, true, true)
                .expose_biometric(BiometricId::GroundTruth),
        );
        c.enroll_noise = vec![0.1 + 0.2, 0.0, 1e-17];
        let text = c.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "{\n  \"id\": \"x\",\n  \"metric\": \"nope\"\n}";
        match ExperimentConfig::from_json(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let minimal = r#"{"id":"x","metric":"far","scheme":"fc","keyed":false,"codes":[{"kind":"hamming","r":3}],"tau":[0.2]}"#;
        let c = ExperimentConfig::from_json(minimal).unwrap();
        assert_eq!(c.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn zero_noise_never_rejects() {
        let mut c = base(Metric::Frr, Scheme::FuzzyCommitment, true);
        c.enroll_noise = vec![0.0];
        c.probe_noise = vec![0.0];
        assert_eq!(estimate_frr(&c).unwrap().hits, 0);
    }

    #[test]
    fn high_threshold_rarely_rejects() {
        let mut c = base(Metric::Frr, Scheme::SecureSketch, false);
        c.codes = vec![CodeSpec::Random {
            m: 8,
            n: 16,
            seed: 3,
        }];
        c.tau = vec![0.49];
        c.enroll_noise = vec![0.005];
        c.probe_noise = vec![0.005];
        assert!(estimate_frr(&c).unwrap().p_hat < 0.01);
    }

    #[test]
    fn tiny_tau_far_is_two_to_minus_m() {
        let mut c = base(Metric::Far, Scheme::SecureSketch, true);
        c.codes = vec![CodeSpec::Random {
            m: 4,
            n: 12,
            seed: 5,
        }];
        c.tau = vec![0.01];
        c.trials = 40_000;
        let e = estimate_far(&c).unwrap();
        assert!(e.ci_low <= 1.0 / 16.0 && 1.0 / 16.0 <= e.ci_high, "{e:?}");
    }

    #[test]
    fn results_are_deterministic_and_thread_independent() {
        let c = base(Metric::Frr, Scheme::SecureSketch, true);
        let a = estimate_frr(&c).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| estimate_frr(&c).unwrap());
        assert_eq!(a, b);
        let out1 = run_experiment(&c).unwrap().csv_string();
        let out2 = run_experiment(&c).unwrap().csv_string();
        assert_eq!(out1, out2);
    }

    #[test]
    fn uninformed_sar_equals_far() {
        let mut c = base(Metric::Sar, Scheme::FuzzyCommitment, true);
        c.attack = Some(AttackTag::Uninformed);
        assert_eq!(estimate_sar(&c).unwrap(), estimate_far(&c).unwrap());
    }

    #[test]
    fn sar_scenarios_are_checked() {
        let mut c = base(Metric::Sar, Scheme::SecureSketch, true);
        c.attack = Some(AttackTag::Stored);
        assert!(matches!(
            estimate_sar(&c),
            Err(Error::InconsistentScenario(_))
        ));
        c.compromise = Some(CompromiseSet::none(1).expose(0, true, false));
        let e = estimate_sar(&c).unwrap();
        assert_eq!(e.hits, e.trials);
        c.attack = None;
        assert!(estimate_sar(&c).is_err());
    }

    #[test]
    fn bounds_only_and_sweep_rows() {
        let mut c = base(Metric::Far, Scheme::SecureSketch, true);
        c.trials = 0;
        c.tau = vec![0.1, 0.2];
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows[0].experiment_id, "t/tau=0.1");
        assert!(out
            .rows
            .iter()
            .all(|r| r.p_hat.is_none() && r.bound.is_some() && r.trials == 0));
        let csv = out.csv_string();
        assert!(csv.starts_with("experiment_id,metric,p_hat,ci_low,ci_high,bound,trials,seed\n"));
        assert!(csv.contains("t/tau=0.1,far,,,,"));

        let mut b = base(Metric::Bounds, Scheme::FuzzyCommitment, false);
        b.tau = vec![0.2];
        let out = run_experiment(&b).unwrap();
        assert_eq!(
            out.rows
                .iter()
                .map(|r| r.metric.as_str())
                .collect::<Vec<_>>(),
            ["frr", "far"]
        );
    }

    #[test]
    fn assumption_violations_set_exit_code() {
        let mut c = base(Metric::Far, Scheme::SecureSketch, true);
        c.codes = vec![CodeSpec::Random {
            m: 10,
            n: 20,
            seed: 1,
        }];
        c.enroll_noise = vec![0.01];
        c.probe_noise = vec![0.01];
        c.tau = vec![0.05];
        c.trials = 0;
        assert_eq!(
            run_experiment(&c).unwrap().exit_code(),
            0,
            "{:?}",
            run_experiment(&c).unwrap().warnings
        );
        // m/n = 0.5 < h_b(0.3).
        c.tau = vec![0.3];
        let out = run_experiment(&c).unwrap();
        assert_eq!(out.exit_code(), 2);
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn invalid_configs() {
        let mut c = base(Metric::Frr, Scheme::SecureSketch, true);
        c.target = 3;
        assert!(Experiment::new(c.clone()).is_err());
        c.target = 0;
        c.tau = vec![];
        assert!(Experiment::new(c.clone()).is_err());
        c.tau = vec![0.2];
        c.enroll_noise = vec![0.1, 0.1, 0.1];
        c.probe_noise = vec![0.1, 0.1];
        assert!(Experiment::new(c.clone()).is_err());
        c.probe_noise = vec![];
        assert_eq!(Experiment::new(c.clone()).unwrap().u(), 3);
        c.preset = Some(PresetSpec {
            name: Preset::Example1,
            m: 4,
            n: 12,
            seed: 0,
        });
        assert!(Experiment::new(c).is_err());
    }

    #[test]
    fn equivalence_small() {
        let mut fc = base(Metric::Frr, Scheme::FuzzyCommitment, true);
        fc.trials = 3_000;
        let mut ss = fc.clone();
        ss.scheme = Scheme::SecureSketch;
        let r = equivalence_report(&fc, &ss).unwrap();
        assert_eq!(r.coupled_agreements, r.coupled_trials);
        assert_eq!(
            r.storage[0],
            StorageRow {
                scheme: Scheme::FuzzyCommitment,
                keyed: true,
                storage_bits: 15,
                key_bits: 15
            }
        );
        assert_eq!(
            r.storage[3],
            StorageRow {
                scheme: Scheme::SecureSketch,
                keyed: false,
                storage_bits: 4,
                key_bits: 0
            }
        );
        assert_eq!(r.sar.len(), 16);
        assert!(r.all_consistent(), "{r:#?}");

        let mut bad = ss.clone();
        bad.tau = vec![0.1];
        assert!(equivalence_report(&fc, &bad).is_err());
        assert!(equivalence_report(&ss, &fc).is_err());
    }

    #[test]
    fn linkage_presets() {
        let r = linkage_report(
            Preset::Example1,
            4,
            12,
            Scheme::SecureSketch,
            true,
            0.05,
            0.0,
            0.0,
            500,
            1,
        )
        .unwrap();
        assert_eq!(r.residual, 0);
        let rl = r.rank_linked.unwrap();
        assert_eq!(rl.hits, rl.trials);
        assert_eq!(r.coset_sampling.hits, r.coset_sampling.trials);
        let r = linkage_report(
            Preset::Example3,
            4,
            12,
            Scheme::SecureSketch,
            true,
            0.05,
            0.0,
            0.0,
            500,
            1,
        )
        .unwrap();
        assert_eq!(r.residual, 4);
        assert!(r.rank_linked.is_none());
    }

    /// Across a sweep satisfying the operating assumptions, empirical FAR
    /// exceeds the closed-form bound at well under 5% of the points.
    #[test]
    fn far_bound_holds_across_sweep() {
        let mut points = 0;
        let mut violations = 0;
        for (m, n) in [(8usize, 16usize), (10, 20), (6, 14)] {
            for tau in [0.03, 0.06, 0.1] {
                let mut c = base(Metric::Far, Scheme::SecureSketch, true);
                c.codes = vec![CodeSpec::Random {
                    m,
                    n,
                    seed: (m * n) as u64,
                }];
                c.tau = vec![tau];
                c.trials = 5_000;
                let exp = Experiment::new(c.clone()).unwrap();
                if !exp.far_bound(tau).unwrap().assumptions_hold() {
                    continue;
                }
                points += 1;
                let e = estimate_far(&c).unwrap();
                violations += (e.ci_low > exp.far_bound(tau).unwrap().value) as usize;
            }
        }
        assert!(points >= 5);
        assert!(
            (violations as f64) < 0.05 * points as f64 + 1.0,
            "{violations}/{points}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        /// Per coupled seed, raising tau never raises FRR or lowers FAR.
        #[test]
        fn tradeoff_monotonicity(seed in any::<u64>(), t1 in 0.02f64..0.45, t2 in 0.02f64..0.45) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let mut c = base(Metric::Frr, Scheme::SecureSketch, true);
            c.seed = seed;
            c.trials = 500;
            c.enroll_noise = vec![0.05];
            c.probe_noise = vec![0.05];
            let exp = Experiment::new(c).unwrap();
            let frr_lo = exp.estimate(Metric::Frr, lo, 500).unwrap();
            let frr_hi = exp.estimate(Metric::Frr, hi, 500).unwrap();
            let far_lo = exp.estimate(Metric::Far, lo, 500).unwrap();
            let far_hi = exp.estimate(Metric::Far, hi, 500).unwrap();
            prop_assert!(frr_hi.hits <= frr_lo.hits);
            prop_assert!(far_hi.hits >= far_lo.hits);
        }

        #[test]
        fn wilson_invariants(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
            let hits = ((trials as f64) * frac).floor() as u64;
            let e = RateEstimate::from_counts(hits, trials);
            prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.p_hat && e.p_hat <= e.ci_high && e.ci_high <= 1.0);
        }
    }
}
