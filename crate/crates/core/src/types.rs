//! Shared domain types: count snapshots, mean models, teams, plans and
//! the small report records passed between the engine's modules.
//!
//! Node indices are 0-based in memory. Every serialised form (JSON, CSV,
//! CLI output) uses 1-based labels; the [`ids`] helpers do the shift.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surrogate::SurrogateModel;

/// Dense row-major n×n matrix of reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn filled(n: usize, value: f64) -> Self {
        Matrix {
            n,
            data: vec![value; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Matrix { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// Dense row-major n×n matrix of nonnegative counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    n: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn zeros(n: usize) -> Self {
        CountMatrix {
            n,
            data: vec![0; n * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, count: u32) {
        self.data[i * self.n + j] = count;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.data
    }

    /// Sum over all ordered pairs of the given nodes.
    pub fn block_sum(&self, nodes: &[usize]) -> u64 {
        let mut total = 0u64;
        for &i in nodes {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            for &j in nodes {
                total += u64::from(row[j]);
            }
        }
        total
    }
}

/// Communication counts observed at one time step.
///
/// `active` implements prefix-active membership for networks whose size
/// varies: nodes `0..active` take part at this time, the rest contribute
/// nothing and are skipped by sums and team searches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSnapshot {
    pub t: u32,
    pub active: usize,
    pub counts: CountMatrix,
}

impl NetworkSnapshot {
    pub fn new(t: u32, counts: CountMatrix) -> Result<Self> {
        let active = counts.n();
        Self::with_active(t, active, counts)
    }

    pub fn with_active(t: u32, active: usize, counts: CountMatrix) -> Result<Self> {
        let n = counts.n();
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "networks need at least 2 nodes, got {n}"
            )));
        }
        if t == 0 {
            return Err(Error::NonContiguousTime {
                expected: 1,
                found: 0,
            });
        }
        if active < 2 || active > n {
            return Err(Error::DimensionMismatch(format!(
                "active node count {active} outside [2, {n}]"
            )));
        }
        if let Some(i) = (0..n).find(|&i| counts.get(i, i) != 0) {
            return Err(Error::InvalidConfig(format!(
                "self-pair count at node {} must be 0",
                i + 1
            )));
        }
        Ok(NetworkSnapshot { t, active, counts })
    }

    pub fn n(&self) -> usize {
        self.counts.n()
    }
}

/// Ordered snapshots with consecutive times 1..=T and a common dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSeries {
    snapshots: Vec<NetworkSnapshot>,
}

impl NetworkSeries {
    pub fn new(snapshots: Vec<NetworkSnapshot>) -> Result<Self> {
        check_series(&snapshots)?;
        Ok(NetworkSeries { snapshots })
    }

    pub fn snapshots(&self) -> &[NetworkSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Matrix dimension shared by every snapshot.
    pub fn n(&self) -> usize {
        self.snapshots.first().map_or(0, NetworkSnapshot::n)
    }

    /// Smallest and largest active node counts across the series.
    pub fn active_range(&self) -> (usize, usize) {
        let lo = self.snapshots.iter().map(|s| s.active).min().unwrap_or(0);
        let hi = self.snapshots.iter().map(|s| s.active).max().unwrap_or(0);
        (lo, hi)
    }
}

fn check_series(snapshots: &[NetworkSnapshot]) -> Result<()> {
    let Some(first) = snapshots.first() else {
        return Err(Error::EmptySeries);
    };
    let n = first.n();
    for (idx, snap) in snapshots.iter().enumerate() {
        let expected = idx as u32 + 1;
        if snap.t != expected {
            return Err(Error::NonContiguousTime {
                expected,
                found: snap.t,
            });
        }
        if snap.n() != n {
            return Err(Error::DimensionMismatch(format!(
                "snapshot t={} has dimension {}, expected {n}",
                snap.t,
                snap.n()
            )));
        }
    }
    Ok(())
}

/// Expected communication counts λ_{i,j,t}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanModel {
    /// One constant rate for every pair and time.
    Homogeneous { lambda: f64 },
    /// One full matrix per time step, index 0 holding t = 1.
    PerEdgeSeries { means: Vec<Matrix> },
    /// λ_{i,j} = a·|i−j| + b, constant in time.
    DistanceLinear {
        a: f64,
        #[serde(default = "default_distance_intercept")]
        b: f64,
    },
}

pub(crate) fn default_distance_intercept() -> f64 {
    0.90
}

impl MeanModel {
    pub fn distance_linear(a: f64) -> Self {
        MeanModel::DistanceLinear {
            a,
            b: default_distance_intercept(),
        }
    }

    /// Mean for the ordered pair (i, j) at time `t` (1-based time).
    pub fn lambda(&self, i: usize, j: usize, t: u32) -> f64 {
        match self {
            MeanModel::Homogeneous { lambda } => *lambda,
            MeanModel::PerEdgeSeries { means } => {
                let idx = (t.max(1) - 1) as usize;
                means[idx.min(means.len() - 1)].get(i, j)
            }
            MeanModel::DistanceLinear { a, b } => a * i.abs_diff(j) as f64 + b,
        }
    }

    /// Writes λ_{·,·,t} for every pair of an n×n matrix.
    pub fn fill(&self, t: u32, out: &mut Matrix) {
        let n = out.n();
        match self {
            MeanModel::Homogeneous { lambda } => out.fill(*lambda),
            MeanModel::PerEdgeSeries { means } => {
                let idx = (t.max(1) - 1) as usize;
                let src = &means[idx.min(means.len() - 1)];
                out.as_mut_slice().copy_from_slice(src.as_slice());
            }
            MeanModel::DistanceLinear { a, b } => {
                let data = out.as_mut_slice();
                for i in 0..n {
                    for j in 0..n {
                        data[i * n + j] = a * i.abs_diff(j) as f64 + b;
                    }
                }
            }
        }
    }

    pub fn matrix(&self, n: usize, t: u32) -> Matrix {
        let mut m = Matrix::filled(n, 0.0);
        self.fill(t, &mut m);
        m
    }

    /// Checks that every implied mean is strictly positive for an n-node
    /// network observed over times 1..=t_max.
    pub fn validate(&self, n: usize, t_max: u32) -> Result<()> {
        match self {
            MeanModel::Homogeneous { lambda } => {
                if !(*lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::NonPositiveMean {
                        src: 1,
                        dst: 1,
                        t: 1,
                        value: *lambda,
                    });
                }
            }
            MeanModel::PerEdgeSeries { means } => {
                if (means.len() as u64) < u64::from(t_max) {
                    return Err(Error::DimensionMismatch(format!(
                        "mean series covers {} steps, series has {t_max}",
                        means.len()
                    )));
                }
                for (idx, m) in means.iter().enumerate() {
                    if m.n() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "mean matrix at t={} has dimension {}, expected {n}",
                            idx + 1,
                            m.n()
                        )));
                    }
                    for i in 0..n {
                        for j in 0..n {
                            let v = m.get(i, j);
                            if !(v > 0.0) || !v.is_finite() {
                                return Err(Error::NonPositiveMean {
                                    src: i + 1,
                                    dst: j + 1,
                                    t: idx as u32 + 1,
                                    value: v,
                                });
                            }
                        }
                    }
                }
            }
            MeanModel::DistanceLinear { a, b } => {
                // Linear in |i−j|, so the extremes are the diagonal and the
                // farthest pair.
                let far = n.saturating_sub(1);
                for (src, dst) in [(0usize, far), (0, 0)] {
                    let v = a * src.abs_diff(dst) as f64 + b;
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::NonPositiveMean {
                            src: src + 1,
                            dst: dst + 1,
                            t: 1,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Checks a series against a mean model: dimensions, contiguous time and
/// strictly positive means everywhere the series needs them.
pub fn validate_series(series: &NetworkSeries, means: &MeanModel) -> Result<()> {
    check_series(series.snapshots())?;
    means.validate(series.n(), series.len() as u32)
}

/// How self-pairs (i, i) enter team double sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfPairs {
    /// Sum over all ordered pairs including i = j, so μ = n_Ω²λ. Since
    /// self-pair counts are always 0, the smoothed team sum then settles
    /// below its boundary and small teams may never signal.
    Include,
    /// Sum over i ≠ j only, so μ = n_Ω(n_Ω−1)λ.
    #[default]
    Exclude,
}

/// A set of actors, optionally with a dominant leader kept outside the
/// member set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Team {
    #[serde(with = "ids::set")]
    pub members: BTreeSet<usize>,
    #[serde(default, with = "ids::opt", skip_serializing_if = "Option::is_none")]
    pub leader: Option<usize>,
}

impl Team {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        Team {
            members: members.into_iter().collect(),
            leader: None,
        }
    }

    pub fn with_leader(leader: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        if members.contains(&leader) {
            return Err(Error::LeaderInTeam(leader + 1));
        }
        Ok(Team {
            members,
            leader: Some(leader),
        })
    }

    /// n_Ω: members plus the leader when present.
    pub fn size(&self) -> usize {
        self.members.len() + usize::from(self.leader.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.size() == 0
    }

    /// Every node in the team in ascending order, leader included.
    pub fn nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.members.iter().copied().collect();
        if let Some(l) = self.leader {
            if let Err(pos) = nodes.binary_search(&l) {
                nodes.insert(pos, l);
            }
        }
        nodes
    }

    pub fn max_node(&self) -> Option<usize> {
        let m = self.members.iter().next_back().copied();
        match (m, self.leader) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// `|`-joined sorted 1-based ids; the leader alone when present.
    pub fn label(&self) -> String {
        match self.leader {
            Some(l) => (l + 1).to_string(),
            None => self
                .members
                .iter()
                .map(|m| (m + 1).to_string())
                .collect::<Vec<_>>()
                .join("|"),
        }
    }
}

/// Surveillance statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StatisticKind {
    Gewma,
    GewmaStar,
    Dewma,
    Tewma,
    TewmaStar,
    LGewma,
    Agewma,
    Adewma,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 8] = [
        StatisticKind::Gewma,
        StatisticKind::GewmaStar,
        StatisticKind::Dewma,
        StatisticKind::Tewma,
        StatisticKind::TewmaStar,
        StatisticKind::LGewma,
        StatisticKind::Agewma,
        StatisticKind::Adewma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Gewma => "GEWMA",
            StatisticKind::GewmaStar => "GEWMA_STAR",
            StatisticKind::Dewma => "DEWMA",
            StatisticKind::Tewma => "TEWMA",
            StatisticKind::TewmaStar => "TEWMA_STAR",
            StatisticKind::LGewma => "L_GEWMA",
            StatisticKind::Agewma => "AGEWMA",
            StatisticKind::Adewma => "ADEWMA",
        }
    }

    /// Dominant-leader statistics, whose events are labelled by leader.
    pub fn is_leader_based(self) -> bool {
        matches!(self, StatisticKind::Dewma | StatisticKind::Adewma)
    }

    /// Default significance threshold for candidate-team search.
    pub fn default_k(self) -> f64 {
        if self.is_leader_based() {
            0.45
        } else {
            0.5
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        StatisticKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown statistic '{s}'")))
    }
}

/// Flag threshold of a plan.
///
/// For fixed thresholds the plan flags when its excess exceeds `h`. For
/// surrogate thresholds the excess is scaled by the predicted threshold and
/// compared with `adjustment` (1 reproduces the unadjusted rule).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Fixed(f64),
    Surrogate {
        model: SurrogateModel,
        #[serde(default = "one")]
        adjustment: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Threshold {
    /// The number the plan's score is compared against.
    pub fn value(&self) -> f64 {
        match self {
            Threshold::Fixed(h) => *h,
            Threshold::Surrogate { adjustment, .. } => *adjustment,
        }
    }

    pub fn with_value(&self, value: f64) -> Threshold {
        match self {
            Threshold::Fixed(_) => Threshold::Fixed(value),
            Threshold::Surrogate { model, .. } => Threshold::Surrogate {
                model: model.clone(),
                adjustment: value,
            },
        }
    }

    pub fn surrogate(&self) -> Option<&SurrogateModel> {
        match self {
            Threshold::Fixed(_) => None,
            Threshold::Surrogate { model, .. } => Some(model),
        }
    }
}

/// Complete description of a monitoring plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveillancePlan {
    pub statistic: StatisticKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Candidate-team significance threshold; `None` takes the statistic's
    /// default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub threshold: Threshold,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub team: Option<Team>,
    #[serde(default = "default_target_ats")]
    pub target_ats: f64,
    /// Count self-pairs i = i in team sums and boundaries.
    #[serde(default)]
    pub include_self_pairs: bool,
}

pub(crate) fn default_alpha() -> f64 {
    0.075
}

fn default_target_ats() -> f64 {
    100.0
}

impl SurveillancePlan {
    pub fn new(statistic: StatisticKind, threshold: Threshold) -> Self {
        SurveillancePlan {
            statistic,
            alpha: default_alpha(),
            k: None,
            threshold,
            team: None,
            target_ats: default_target_ats(),
            include_self_pairs: false,
        }
    }

    pub fn with_team(mut self, team: Team) -> Self {
        self.team = Some(team);
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// The same plan with its threshold value (or adjustment) replaced.
    pub fn with_threshold_value(mut self, value: f64) -> Self {
        self.threshold = self.threshold.with_value(value);
        self
    }

    pub fn k(&self) -> f64 {
        self.k.unwrap_or_else(|| self.statistic.default_k())
    }

    pub fn self_pairs(&self) -> SelfPairs {
        if self.include_self_pairs {
            SelfPairs::Include
        } else {
            SelfPairs::Exclude
        }
    }

    /// True when the plan searches for candidate teams rather than
    /// following a known one.
    pub fn is_scan(&self) -> bool {
        match self.statistic {
            StatisticKind::Agewma | StatisticKind::Adewma => true,
            StatisticKind::GewmaStar => self.team.is_none(),
            StatisticKind::Dewma => self.team.is_none(),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use StatisticKind::*;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::BadAlpha(self.alpha));
        }
        let k = self.k();
        if !(k >= 0.0) {
            return Err(Error::BadK(k));
        }
        let h = self.threshold.value();
        if !(h >= 0.0) {
            return Err(Error::InvalidConfig(format!("threshold {h} must be >= 0")));
        }
        if !(self.target_ats > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target ATS {} must be positive",
                self.target_ats
            )));
        }
        match self.statistic {
            Gewma | LGewma => match &self.team {
                Some(team) if !team.is_empty() => {}
                _ => return Err(Error::EmptyTeam),
            },
            Dewma => {
                if let Some(team) = &self.team {
                    if team.leader.is_none() {
                        return Err(Error::InvalidConfig(
                            "a known-team DEWMA plan needs a leader".into(),
                        ));
                    }
                }
            }
            GewmaStar => {
                if let Some(team) = &self.team {
                    if team.is_empty() {
                        return Err(Error::EmptyTeam);
                    }
                }
            }
            Tewma | TewmaStar => {
                if self.team.is_some() {
                    return Err(Error::InvalidConfig(
                        "global statistics monitor the whole network and take no team".into(),
                    ));
                }
            }
            Agewma | Adewma => {
                if self.team.is_some() {
                    return Err(Error::InvalidConfig(
                        "adaptive scans estimate their own teams".into(),
                    ));
                }
                let expected = if self.statistic == Agewma {
                    crate::surrogate::SurrogateKind::HgRecip
                } else {
                    crate::surrogate::SurrogateKind::HdLog
                };
                match self.threshold.surrogate() {
                    None => return Err(Error::SurrogateMissing),
                    Some(model) if model.kind != expected => {
                        return Err(Error::SurrogateKindMismatch {
                            expected: expected.to_string(),
                            found: model.kind.to_string(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

/// One evaluation of a plan's flag rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagEvent {
    pub t: u32,
    pub statistic: StatisticKind,
    pub team: Team,
    pub value: f64,
    pub boundary: f64,
    pub flagged: bool,
}

impl FlagEvent {
    pub fn team_size(&self) -> usize {
        self.team.size()
    }
}

/// Summary of a batch of time-to-signal replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtsReport {
    pub reps: usize,
    pub mean_tts: f64,
    pub std_error: f64,
    /// Runs without a signal inside the horizon, counted at the horizon.
    pub censored: usize,
    /// In-control signals: for in-control estimates every signal, for
    /// change-point experiments the flagged steps before the change.
    pub false_alarms: usize,
    pub horizon: u32,
}

impl AtsReport {
    /// Builds a report from per-run times to signal (already censored).
    pub fn from_times(times: &[f64], censored: usize, false_alarms: usize, horizon: u32) -> Self {
        let reps = times.len();
        let mean = times.iter().sum::<f64>() / reps as f64;
        let var = if reps > 1 {
            times.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64
        } else {
            0.0
        };
        AtsReport {
            reps,
            mean_tts: mean,
            std_error: (var / reps as f64).sqrt(),
            censored,
            false_alarms,
            horizon,
        }
    }
}

/// Serde adapters that store 0-based node indices as 1-based labels.
pub mod ids {
    fn to_index<E: serde::de::Error>(label: usize) -> Result<usize, E> {
        label
            .checked_sub(1)
            .ok_or_else(|| E::custom("node labels are 1-based"))
    }

    pub mod set {
        use std::collections::BTreeSet;

        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &BTreeSet<usize>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|i| i + 1))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeSet<usize>, D::Error> {
            Vec::<usize>::deserialize(d)?
                .into_iter()
                .map(super::to_index)
                .collect()
        }
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[usize], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|i| i + 1))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
            Vec::<usize>::deserialize(d)?
                .into_iter()
                .map(super::to_index)
                .collect()
        }
    }

    pub mod opt {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(i) => s.serialize_some(&(i + 1)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
            Option::<usize>::deserialize(d)?
                .map(super::to_index)
                .transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshots(n: usize, times: &[u32]) -> Vec<NetworkSnapshot> {
        times
            .iter()
            .map(|&t| NetworkSnapshot::new(t, CountMatrix::zeros(n)).unwrap())
            .collect()
    }

    #[test]
    fn homogeneous_series_is_accepted() {
        let series = NetworkSeries::new(snapshots(4, &[1, 2, 3])).unwrap();
        validate_series(&series, &MeanModel::Homogeneous { lambda: 0.2 }).unwrap();
    }

    #[test]
    fn distance_linear_positivity_depends_on_size() {
        let model = MeanModel::distance_linear(-0.003);
        model.validate(135, 1).unwrap();
        match model.validate(350, 1) {
            Err(Error::NonPositiveMean { src, dst, value, .. }) => {
                assert_eq!((src, dst), (1, 350));
                assert!(value < 0.0);
            }
            other => panic!("expected NonPositiveMean, got {other:?}"),
        }
        // Smallest mean at n = 135 is a·134 + b.
        let min = model.lambda(0, 134, 1);
        assert!((min - 0.498).abs() < 1e-12);
    }

    #[test]
    fn non_contiguous_time_is_rejected() {
        let err = NetworkSeries::new(snapshots(3, &[1, 3])).unwrap_err();
        assert_eq!(
            err,
            Error::NonContiguousTime {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut snaps = snapshots(3, &[1]);
        snaps.push(NetworkSnapshot::new(2, CountMatrix::zeros(4)).unwrap());
        assert!(matches!(
            NetworkSeries::new(snaps),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn per_edge_means_name_the_offending_entry() {
        let mut m = Matrix::filled(3, 0.5);
        m.set(1, 2, 0.0);
        let model = MeanModel::PerEdgeSeries {
            means: vec![Matrix::filled(3, 0.5), m],
        };
        let series = NetworkSeries::new(snapshots(3, &[1, 2])).unwrap();
        assert_eq!(
            validate_series(&series, &model),
            Err(Error::NonPositiveMean {
                src: 2,
                dst: 3,
                t: 2,
                value: 0.0
            })
        );
    }

    #[test]
    fn leader_cannot_be_a_member() {
        assert_eq!(Team::with_leader(2, [1, 2]), Err(Error::LeaderInTeam(3)));
        let team = Team::with_leader(5, [0, 1]).unwrap();
        assert_eq!(team.size(), 3);
        assert_eq!(team.nodes(), vec![0, 1, 5]);
        assert_eq!(team.label(), "6");
        assert_eq!(Team::new([4, 0, 2]).label(), "1|3|5");
    }

    #[test]
    fn team_json_is_one_based() {
        let team = Team::with_leader(5, [0, 3]).unwrap();
        let json = serde_json::to_string(&team).unwrap();
        assert_eq!(json, r#"{"members":[1,4],"leader":6}"#);
        assert_eq!(serde_json::from_str::<Team>(&json).unwrap(), team);
        assert!(serde_json::from_str::<Team>(r#"{"members":[0]}"#).is_err());
    }

    #[test]
    fn plan_validation() {
        let plan = SurveillancePlan::new(StatisticKind::Gewma, Threshold::Fixed(0.3));
        assert_eq!(plan.validate(), Err(Error::EmptyTeam));
        let plan = plan.with_team(Team::new([0, 1]));
        plan.validate().unwrap();
        assert_eq!(
            plan.clone().with_alpha(1.5).validate(),
            Err(Error::BadAlpha(1.5))
        );
        assert_eq!(plan.clone().with_k(-0.1).validate(), Err(Error::BadK(-0.1)));
        let scan = SurveillancePlan::new(StatisticKind::Agewma, Threshold::Fixed(1.0));
        assert_eq!(scan.validate(), Err(Error::SurrogateMissing));
        assert_eq!(
            SurveillancePlan::new(StatisticKind::Dewma, Threshold::Fixed(0.1)).k(),
            0.45
        );
    }

    #[test]
    fn statistic_names_parse() {
        for kind in StatisticKind::ALL {
            assert_eq!(kind.name().parse::<StatisticKind>().unwrap(), kind);
        }
        assert_eq!(
            "l-gewma".parse::<StatisticKind>().unwrap(),
            StatisticKind::LGewma
        );
        let json = serde_json::to_string(&StatisticKind::GewmaStar).unwrap();
        assert_eq!(json, "\"GEWMA_STAR\"");
    }

    #[test]
    fn ats_report_statistics() {
        let r = AtsReport::from_times(&[1.0, 3.0], 0, 2, 10);
        assert_eq!(r.mean_tts, 2.0);
        assert!((r.std_error - 1.0).abs() < 1e-12);
    }
}
