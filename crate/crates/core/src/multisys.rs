//! Several enrollments of one biometric: deployment, rank profiles of the
//! parity checks, preset geometries and a randomized design search.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryView, CompromiseSet};
use crate::biomodel::{substream, BiometricWorld, StreamRole};
use crate::error::{Error, Result};
use crate::gf2::{stacked_rank, BitMatrix, BitVec};
use crate::schemes::{enroll, EnrollmentRecord, SystemParams};

/// Upper limit on `C(u, L) * u` rank evaluations in [`rank_profiles`].
pub const MAX_PROFILE_EVALUATIONS: u64 = 1_000_000;

/// Non-improving proposals tolerated before a climb stops.
pub const PLATEAU_PROPOSALS: usize = 200;

/// Hard cap on proposals per restart.
pub const MAX_PROPOSALS: usize = 20_000;

/// `u` devices enrolling the same person, one [`SystemParams`] each.
#[derive(Clone, Debug)]
pub struct MultiSystemConfig {
    systems: Vec<SystemParams>,
    enroll_noise: Vec<f64>,
    probe_noise: Vec<f64>,
}

impl MultiSystemConfig {
    pub fn new(
        systems: Vec<SystemParams>,
        enroll_noise: Vec<f64>,
        probe_noise: Vec<f64>,
    ) -> Result<Self> {
        let Some(first) = systems.first() else {
            return Err(Error::InvalidParameter(
                "at least one system is required".into(),
            ));
        };
        let n = first.n();
        if let Some(bad) = systems.iter().find(|s| s.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.n(),
            });
        }
        if enroll_noise.len() != systems.len() || probe_noise.len() != systems.len() {
            return Err(Error::InvalidParameter(format!(
                "{} systems but {} enrollment and {} probe noise levels",
                systems.len(),
                enroll_noise.len(),
                probe_noise.len()
            )));
        }
        // Validates the noise levels.
        BiometricWorld::new(BitVec::zeros(n), enroll_noise.clone(), probe_noise.clone())?;
        Ok(Self {
            systems,
            enroll_noise,
            probe_noise,
        })
    }

    pub fn u(&self) -> usize {
        self.systems.len()
    }

    pub fn n(&self) -> usize {
        self.systems[0].n()
    }

    pub fn systems(&self) -> &[SystemParams] {
        &self.systems
    }

    pub fn system(&self, j: usize) -> Result<&SystemParams> {
        self.systems.get(j).ok_or(Error::InvalidIndex {
            index: j,
            count: self.u(),
        })
    }

    pub fn enroll_noise(&self) -> &[f64] {
        &self.enroll_noise
    }

    pub fn probe_noise(&self) -> &[f64] {
        &self.probe_noise
    }

    pub fn parity_checks(&self) -> Vec<&BitMatrix> {
        self.systems
            .iter()
            .map(|s| s.code().parity_check())
            .collect()
    }

    pub fn rank_profiles(&self, l: usize) -> Result<DesignReport> {
        rank_profiles(&self.parity_checks(), l)
    }

    /// Draws a ground truth, one noisy enrollment per system, and enrolls
    /// each device.
    pub fn deploy<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Deployment> {
        let world = BiometricWorld::sample(
            self.n(),
            self.enroll_noise.clone(),
            self.probe_noise.clone(),
            rng,
        )?;
        let enrollments = world.sample_enrollments(rng)?;
        let records = self
            .systems
            .iter()
            .zip(&enrollments)
            .map(|(p, a)| enroll(p, a, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Deployment {
            world,
            enrollments,
            records,
        })
    }
}

/// One realized multi-system enrollment.
#[derive(Clone, Debug)]
pub struct Deployment {
    pub world: BiometricWorld,
    pub enrollments: Vec<BitVec>,
    pub records: Vec<EnrollmentRecord>,
}

impl Deployment {
    pub fn view(&self, set: &CompromiseSet) -> Result<AdversaryView> {
        let noise = (0..self.world.systems())
            .map(|i| self.world.enroll_noise(i))
            .collect::<Result<Vec<_>>>()?;
        AdversaryView::observe(
            &self.records,
            self.world.ground_truth(),
            &self.enrollments,
            &noise,
            set,
        )
    }

    /// A fresh legitimate probe for system `j`.
    pub fn probe<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<BitVec> {
        self.world.sample_probe(j, rng)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankEntry {
    pub subset: Vec<usize>,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub subset: Vec<usize>,
    pub target: usize,
    pub residual: usize,
}

/// Collective ranks `r_l` of every `L`-subset and residual ranks `t_{l,j}`
/// of every outside matrix. Subsets are listed in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignReport {
    pub u: usize,
    pub l: usize,
    pub r_profile: Vec<RankEntry>,
    pub t_profile: Vec<ResidualEntry>,
    pub r_max: usize,
    /// `None` when `L = u` and no matrix lies outside a subset.
    pub t_min: Option<usize>,
}

fn binomial(u: usize, l: usize) -> u64 {
    let l = l.min(u - l);
    let mut acc: u128 = 1;
    for i in 0..l {
        acc = acc * (u - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

pub fn rank_profiles(mats: &[&BitMatrix], l: usize) -> Result<DesignReport> {
    let u = mats.len();
    if l == 0 || l > u {
        return Err(Error::InvalidParameter(format!(
            "subset size L = {l} must lie in 1..={u}"
        )));
    }
    if let Some(m) = mats.iter().find(|m| m.cols() != mats[0].cols()) {
        return Err(Error::DimensionMismatch {
            expected: mats[0].cols(),
            found: m.cols(),
        });
    }
    let work = binomial(u, l).saturating_mul(u as u64);
    if work > MAX_PROFILE_EVALUATIONS {
        return Err(Error::CombinatorialGuard(format!(
            "C({u}, {l}) * {u} = {work} rank evaluations exceeds {MAX_PROFILE_EVALUATIONS}"
        )));
    }
    let mut r_profile = Vec::new();
    let mut t_profile = Vec::new();
    for subset in (0..u).combinations(l) {
        let stack: Vec<&BitMatrix> = subset.iter().map(|&i| mats[i]).collect();
        let rank = stacked_rank(&stack)?;
        for j in (0..u).filter(|j| !subset.contains(j)) {
            let mut with = stack.clone();
            with.push(mats[j]);
            t_profile.push(ResidualEntry {
                subset: subset.clone(),
                target: j,
                residual: stacked_rank(&with)? - rank,
            });
        }
        r_profile.push(RankEntry { subset, rank });
    }
    Ok(DesignReport {
        u,
        l,
        r_max: r_profile.iter().map(|e| e.rank).max().unwrap_or(0),
        t_min: t_profile.iter().map(|e| e.residual).min(),
        r_profile,
        t_profile,
    })
}

/// Success probability guaranteed by coset sampling at residual rank `t`.
pub fn sar_lower_bound(t: usize) -> f64 {
    0.5f64.powi(t as i32)
}

/// The three-system geometries used throughout the linkage analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `H_3 = H_1 + H_2`.
    Example1,
    /// `H_1 = H_2 = H_3`.
    Example2,
    /// Jointly independent rows.
    Example3,
    /// `H_i = [H_a; H_x]` sharing the half `H_a`.
    Example4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Example1,
        Preset::Example2,
        Preset::Example3,
        Preset::Example4,
    ];

    /// Attacked system in the preset scenario.
    pub const TARGET: usize = 2;

    /// Systems 0 and 1 fully exposed plus the target's key.
    pub fn scenario() -> CompromiseSet {
        CompromiseSet::none(3)
            .expose_fully(0)
            .expose_fully(1)
            .expose(Self::TARGET, false, true)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
            Preset::Example3 => "example3",
            Preset::Example4 => "example4",
        }
    }

    /// Three full-rank `m x n` parity-check matrices with this geometry.
    pub fn matrices<R: Rng + ?Sized>(
        self,
        m: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<BitMatrix>> {
        let need = match self {
            Preset::Example1 | Preset::Example4 => 2 * m,
            Preset::Example2 => m,
            Preset::Example3 => 3 * m,
        };
        if m == 0 || need > n || (self == Preset::Example4 && m % 2 == 1) {
            return Err(Error::InvalidParameter(format!(
                "{self} needs an even m for example4 and at least {need} columns (m = {m}, n = {n})"
            )));
        }
        let base = BitMatrix::sample_full_rank(need, n, rng)?;
        let block = |start, count| base.row_block(start, count);
        Ok(match self {
            Preset::Example1 => {
                let (h1, h2) = (block(0, m)?, block(m, m)?);
                let h3 = &h1 ^ &h2;
                vec![h1, h2, h3]
            }
            Preset::Example2 => vec![base.clone(), base.clone(), base],
            Preset::Example3 => vec![block(0, m)?, block(m, m)?, block(2 * m, m)?],
            Preset::Example4 => {
                let half = m / 2;
                let ha = block(0, half)?;
                (1..=3)
                    .map(|x| BitMatrix::vstack([&ha, &block(x * half, half)?]))
                    .collect::<Result<Vec<_>>>()?
            }
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinRmax,
    MaxTmin,
    /// Maximize `t_min - lambda * r_max`; `lambda` defaults to `1/m`.
    Weighted {
        lambda: Option<f64>,
    },
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_rmax" => Ok(Objective::MinRmax),
            "max_tmin" => Ok(Objective::MaxTmin),
            "weighted" => Ok(Objective::Weighted { lambda: None }),
            other => match other.strip_prefix("weighted:") {
                Some(l) => l
                    .parse::<f64>()
                    .map(|lambda| Objective::Weighted {
                        lambda: Some(lambda),
                    })
                    .map_err(|_| Error::InvalidParameter(format!("bad lambda in {other:?}"))),
                None => Err(Error::InvalidParameter(format!(
                    "unknown objective {other:?}"
                ))),
            },
        }
    }
}

/// Score compared lexicographically: the objective itself, then the same
/// quantity summed over the whole profile so that plateaus have a slope.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Score(f64, f64);

impl Score {
    fn cmp(&self, other: &Score) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.total_cmp(&other.1))
    }
}

fn score(objective: Objective, m: usize, report: &DesignReport) -> Score {
    let r_sum: usize = report.r_profile.iter().map(|e| e.rank).sum();
    let t_sum: usize = report.t_profile.iter().map(|e| e.residual).sum();
    let t_min = report.t_min.unwrap_or(0) as f64;
    match objective {
        Objective::MinRmax => Score(-(report.r_max as f64), -(r_sum as f64)),
        Objective::MaxTmin => Score(t_min, t_sum as f64),
        Objective::Weighted { lambda } => {
            let lambda = lambda.unwrap_or(1.0 / m as f64);
            Score(
                t_min - lambda * report.r_max as f64,
                t_sum as f64 - lambda * r_sum as f64,
            )
        }
    }
}

impl Objective {
    pub fn value(self, m: usize, report: &DesignReport) -> f64 {
        score(self, m, report).0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DesignOutcome {
    #[serde(skip)]
    pub matrices: Vec<BitMatrix>,
    pub report: DesignReport,
    pub objective_value: f64,
    pub restart: usize,
    pub proposals: usize,
    pub notes: Vec<String>,
}

/// Replaces one row of one matrix with either a fresh random row or a
/// random combination of another matrix's rows. Returns `None` when the
/// edited matrix loses rank.
fn propose<R: Rng + ?Sized>(mats: &[BitMatrix], rng: &mut R) -> Option<(usize, BitMatrix)> {
    let u = mats.len();
    let (m, n) = (mats[0].rows(), mats[0].cols());
    let i = rng.gen_range(0..u);
    let r = rng.gen_range(0..m);
    let row = if u == 1 || rng.gen_bool(0.5) {
        BitVec::random(n, rng)
    } else {
        let mut o = rng.gen_range(0..u - 1);
        if o >= i {
            o += 1;
        }
        let mut acc = BitVec::zeros(n);
        while acc.is_zero() {
            for row in mats[o].row_iter() {
                if rng.gen_bool(0.5) {
                    acc ^= row;
                }
            }
        }
        acc
    };
    let mut edited = mats[i].clone();
    edited.set_row(r, row);
    edited.is_full_row_rank().then_some((i, edited))
}

fn climb(
    u: usize,
    m: usize,
    n: usize,
    l: usize,
    objective: Objective,
    seed: u64,
    restart: usize,
) -> Result<DesignOutcome> {
    let mut rng = substream(seed, restart as u64, StreamRole::Design);
    let mut mats = (0..u)
        .map(|_| BitMatrix::sample_full_rank(m, n, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let eval = |mats: &[BitMatrix]| rank_profiles(&mats.iter().collect::<Vec<_>>(), l);
    let mut report = eval(&mats)?;
    let mut current = score(objective, m, &report);
    let mut stale = 0;
    let mut proposals = 0;
    while stale < PLATEAU_PROPOSALS && proposals < MAX_PROPOSALS {
        proposals += 1;
        let Some((i, edited)) = propose(&mats, &mut rng) else {
            stale += 1;
            continue;
        };
        let old = std::mem::replace(&mut mats[i], edited);
        let candidate = eval(&mats)?;
        let s = score(objective, m, &candidate);
        match s.cmp(&current) {
            Ordering::Greater => {
                stale = 0;
                current = s;
                report = candidate;
            }
            // Sideways moves keep the walk going across plateaus.
            Ordering::Equal => {
                stale += 1;
                report = candidate;
            }
            Ordering::Less => {
                stale += 1;
                mats[i] = old;
            }
        }
    }
    Ok(DesignOutcome {
        matrices: mats,
        objective_value: current.0,
        report,
        restart,
        proposals,
        notes: Vec::new(),
    })
}

/// Randomized local search over tuples of `u` full-rank `m x n` matrices.
///
/// Restarts run in parallel from independent seeds; the best outcome wins,
/// ties going to the lowest restart index, so the result only depends on
/// `seed`.
pub fn design_search(
    u: usize,
    m: usize,
    n: usize,
    l: usize,
    objective: Objective,
    seed: u64,
    restarts: usize,
) -> Result<DesignOutcome> {
    if u < 2 || l == 0 || l >= u {
        return Err(Error::InvalidParameter(format!(
            "need u >= 2 and 1 <= L < u (u = {u}, L = {l})"
        )));
    }
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < m < n (m = {m}, n = {n})"
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidParameter(
            "at least one restart is required".into(),
        ));
    }
    let outcomes = (0..restarts)
        .into_par_iter()
        .map(|r| climb(u, m, n, l, objective, seed, r))
        .collect::<Result<Vec<_>>>()?;
    let mut best = outcomes
        .into_iter()
        .reduce(|a, b| {
            let (sa, sb) = (
                score(objective, m, &a.report),
                score(objective, m, &b.report),
            );
            if sb.cmp(&sa) == Ordering::Greater {
                b
            } else {
                a
            }
        })
        .expect("restarts > 0");
    best.notes = design_notes(u, m, n, l, objective, &best.report);
    Ok(best)
}

fn design_notes(
    u: usize,
    m: usize,
    n: usize,
    l: usize,
    objective: Objective,
    report: &DesignReport,
) -> Vec<String> {
    let mut notes = Vec::new();
    if !matches!(objective, Objective::MinRmax) {
        if (l + 1) * m > n {
            notes.push(format!(
                "infeasible: t_min = m = {m} needs every {} matrices to have independent rows, but (L+1)m = {} > n = {n}",
                l + 1,
                (l + 1) * m
            ));
        } else if u * m > n {
            notes.push(format!(
                "u*m = {} > n = {n}: the {u} matrices cannot be jointly independent, only every {} of them",
                u * m,
                l + 1
            ));
        }
        if report.t_min.is_some_and(|t| t < m) && (l + 1) * m <= n {
            notes.push(format!(
                "search stopped at t_min = {} below the reachable m = {m}",
                report.t_min.unwrap()
            ));
        }
    }
    notes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{mount, AttackTag};
    use crate::codes::LinearCode;
    use crate::schemes::{authenticate, Scheme};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn profile(mats: &[BitMatrix], l: usize) -> DesignReport {
        rank_profiles(&mats.iter().collect::<Vec<_>>(), l).unwrap()
    }

    #[test]
    fn preset_profiles() {
        let m = 8;
        let cases = [
            (Preset::Example1, 2 * m, 0),
            (Preset::Example2, m, 0),
            (Preset::Example3, 2 * m, m),
            (Preset::Example4, 3 * m / 2, m / 2),
        ];
        for (preset, r, t) in cases {
            let mats = preset.matrices(m, 3 * m, &mut rng(1)).unwrap();
            assert!(mats.iter().all(|h| h.rows() == m && h.is_full_row_rank()));
            let rep = profile(&mats, 2);
            assert_eq!(rep.r_profile.len(), 3);
            assert_eq!(rep.t_profile.len(), 3);
            assert!(
                rep.r_profile.iter().all(|e| e.rank == r),
                "{preset}: {rep:?}"
            );
            assert!(
                rep.t_profile.iter().all(|e| e.residual == t),
                "{preset}: {rep:?}"
            );
            assert_eq!((rep.r_max, rep.t_min), (r, Some(t)));
        }
        assert!(Preset::Example3.matrices(8, 20, &mut rng(1)).is_err());
        assert!(Preset::Example4.matrices(3, 20, &mut rng(1)).is_err());
    }

    #[test]
    fn profile_layout_and_guard() {
        let mats = Preset::Example3.matrices(2, 6, &mut rng(2)).unwrap();
        let rep = profile(&mats, 1);
        assert_eq!(
            rep.r_profile
                .iter()
                .map(|e| e.subset.clone())
                .collect::<Vec<_>>(),
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            rep.t_profile[0],
            ResidualEntry {
                subset: vec![0],
                target: 1,
                residual: 2
            }
        );
        let all = profile(&mats, 3);
        assert_eq!((all.r_max, all.t_min), (6, None));
        assert!(rank_profiles(&mats.iter().collect::<Vec<_>>(), 0).is_err());

        let h = BitMatrix::zeros(1, 4);
        let many: Vec<&BitMatrix> = vec![&h; 40];
        assert!(matches!(
            rank_profiles(&many, 20),
            Err(Error::CombinatorialGuard(_))
        ));
    }

    #[test]
    fn sar_bound_values() {
        assert_eq!(sar_lower_bound(0), 1.0);
        assert_eq!(sar_lower_bound(1), 0.5);
        assert_eq!(sar_lower_bound(4), 1.0 / 16.0);
    }

    #[test]
    fn design_search_reaches_the_endpoints() {
        let m = 4;
        let indep = design_search(3, m, 3 * m, 2, Objective::MaxTmin, 7, 4).unwrap();
        assert_eq!(indep.report.t_min, Some(m));
        assert!(indep.notes.is_empty(), "{:?}", indep.notes);

        let same = design_search(3, m, 3 * m, 2, Objective::MinRmax, 7, 4).unwrap();
        assert_eq!(same.report.r_max, m);
        assert_eq!(same.report.t_min, Some(0));

        for h in indep.matrices.iter().chain(&same.matrices) {
            assert!(h.is_full_row_rank());
        }
    }

    #[test]
    fn design_search_flags_infeasibility() {
        let m = 3;
        let out = design_search(4, m, 3 * m, 3, Objective::MaxTmin, 1, 2).unwrap();
        assert!(out.report.t_min.unwrap() < m);
        assert!(out.notes.iter().any(|n| n.starts_with("infeasible")));

        let pairs = design_search(4, m, 3 * m, 2, Objective::MaxTmin, 1, 2).unwrap();
        assert!(pairs
            .notes
            .iter()
            .any(|n| n.contains("jointly independent")));
    }

    #[test]
    fn design_search_is_deterministic() {
        let a = design_search(3, 3, 9, 2, Objective::Weighted { lambda: None }, 11, 3).unwrap();
        let b = design_search(3, 3, 9, 2, Objective::Weighted { lambda: None }, 11, 3).unwrap();
        assert_eq!(a.matrices, b.matrices);
        assert_eq!(a.report, b.report);
        assert!(design_search(3, 3, 9, 3, Objective::MaxTmin, 1, 1).is_err());
    }

    #[test]
    fn objective_parsing() {
        assert_eq!("min_rmax".parse::<Objective>().unwrap(), Objective::MinRmax);
        assert_eq!(
            "weighted:0.5".parse::<Objective>().unwrap(),
            Objective::Weighted { lambda: Some(0.5) }
        );
        assert!("weighted:x".parse::<Objective>().is_err());
        assert_eq!("example4".parse::<Preset>().unwrap(), Preset::Example4);
    }

    /// Whenever a residual rank is zero the rank-linked attack succeeds on
    /// noiseless enrollments.
    #[test]
    fn zero_residual_means_linked_attack_wins() {
        let mut r = rng(3);
        for preset in [Preset::Example1, Preset::Example2] {
            let mats = preset.matrices(4, 12, &mut r).unwrap();
            let rep = profile(&mats, 2);
            let systems = mats
                .into_iter()
                .map(|h| {
                    let code = Arc::new(LinearCode::from_parity_check(h).unwrap());
                    SystemParams::new(Scheme::SecureSketch, true, 0.05, code).unwrap()
                })
                .collect();
            let cfg = MultiSystemConfig::new(systems, vec![0.0; 3], vec![0.0; 3]).unwrap();
            for e in rep.t_profile.iter().filter(|e| e.residual == 0) {
                let mut set = CompromiseSet::none(3).expose(e.target, false, true);
                for &i in &e.subset {
                    set = set.expose_fully(i);
                }
                for _ in 0..50 {
                    let d = cfg.deploy(&mut r).unwrap();
                    let att = mount(
                        AttackTag::RankLinked,
                        &d.view(&set).unwrap(),
                        e.target,
                        &mut r,
                    )
                    .unwrap();
                    assert!(
                        authenticate(&d.records[e.target], &att.probe, &att.key)
                            .unwrap()
                            .accepted
                    );
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let c7 = Arc::new(LinearCode::hamming(3).unwrap());
        let c15 = Arc::new(LinearCode::hamming(4).unwrap());
        let p7 = SystemParams::new(Scheme::SecureSketch, true, 0.2, c7).unwrap();
        let p15 = SystemParams::new(Scheme::SecureSketch, true, 0.2, c15).unwrap();
        assert!(MultiSystemConfig::new(vec![], vec![], vec![]).is_err());
        assert!(MultiSystemConfig::new(vec![p7.clone(), p15], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(MultiSystemConfig::new(vec![p7.clone()], vec![0.6], vec![0.0]).is_err());
        let cfg =
            MultiSystemConfig::new(vec![p7.clone(), p7], vec![0.0, 0.1], vec![0.1, 0.1]).unwrap();
        let d = cfg.deploy(&mut rng(4)).unwrap();
        assert_eq!(d.enrollments[0], *d.world.ground_truth());
        assert_eq!(d.records.len(), 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn profile_invariants(seed in any::<u64>(), u in 2usize..5, m in 1usize..5, l in 1usize..4) {
            prop_assume!(l < u);
            let n = 10;
            let mut r = rng(seed);
            let mats: Vec<BitMatrix> = (0..u).map(|_| BitMatrix::sample_full_rank(m, n, &mut r).unwrap()).collect();
            let rep = profile(&mats, l);
            for e in &rep.r_profile {
                prop_assert!(e.rank >= m && e.rank <= (l * m).min(n));
            }
            for e in &rep.t_profile {
                prop_assert!(e.residual <= m);
                prop_assert!(!e.subset.contains(&e.target));
            }
            prop_assert_eq!(rep.r_max, rep.r_profile.iter().map(|e| e.rank).max().unwrap());
            prop_assert_eq!(rep.t_min, rep.t_profile.iter().map(|e| e.residual).min());
        }
    }
}
