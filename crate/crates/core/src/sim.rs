//! Synthetic networks with planted outbreaks and the time-to-signal driver.
//!
//! Every ordered pair of distinct active nodes draws an independent Poisson
//! count. Outbreak pairs draw from `(1+δ)·λ` after the change point.
//! Replication `r` of an experiment with seed `s` uses the ChaCha8 stream
//! `r` of seed `s`, so results do not depend on scheduling.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::types::{ids, AtsReport, CountMatrix, Matrix, MeanModel, NetworkSeries, NetworkSnapshot, SurveillancePlan};

/// A mean multiplier applied to the team's pairs over `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub start: u32,
    pub end: u32,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    Homogeneous {
        n: usize,
        lambda: f64,
    },
    /// Every ordered pair inside `team` rises to `(1+δ)λ` after `change_t`.
    CollaborativeOutbreak {
        n: usize,
        lambda: f64,
        #[serde(with = "ids::set")]
        team: BTreeSet<usize>,
        delta: f64,
        #[serde(default = "default_change")]
        change_t: u32,
    },
    /// Only the directed edges of the chosen leader topology rise.
    DominantLeaderOutbreak {
        n: usize,
        lambda: f64,
        sim_id: u8,
        delta: f64,
        #[serde(default = "default_change")]
        change_t: u32,
    },
    /// Distance-linear means over a network whose size is drawn uniformly
    /// from `m_low..=m_high` at every step; nodes `1..=n_t` are active.
    HeterogeneousVarSize {
        a: f64,
        #[serde(default = "crate::types::default_distance_intercept")]
        b: f64,
        m_low: usize,
        m_high: usize,
    },
    /// Distance-linear means with team-pair multipliers over given epochs.
    HeterogeneousShifts {
        n: usize,
        a: f64,
        #[serde(default = "crate::types::default_distance_intercept")]
        b: f64,
        #[serde(with = "ids::set")]
        team: BTreeSet<usize>,
        shifts: Vec<Shift>,
    },
}

fn default_change() -> u32 {
    100
}

fn default_t_max() -> u32 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    /// Last generated time step.
    #[serde(default = "default_t_max")]
    pub t_max: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Scenario {
            kind,
            t_max: default_t_max(),
            seed: 0,
        }
    }

    pub fn homogeneous(n: usize, lambda: f64) -> Self {
        Self::new(ScenarioKind::Homogeneous { n, lambda })
    }

    pub fn collaborative(n: usize, lambda: f64, team: impl IntoIterator<Item = usize>, delta: f64) -> Self {
        Self::new(ScenarioKind::CollaborativeOutbreak {
            n,
            lambda,
            team: team.into_iter().collect(),
            delta,
            change_t: default_change(),
        })
    }

    pub fn dominant_leader(n: usize, lambda: f64, sim_id: u8, delta: f64) -> Self {
        Self::new(ScenarioKind::DominantLeaderOutbreak {
            n,
            lambda,
            sim_id,
            delta,
            change_t: default_change(),
        })
    }

    /// Largest network size the scenario produces.
    pub fn n(&self) -> usize {
        match &self.kind {
            ScenarioKind::Homogeneous { n, .. }
            | ScenarioKind::CollaborativeOutbreak { n, .. }
            | ScenarioKind::DominantLeaderOutbreak { n, .. }
            | ScenarioKind::HeterogeneousShifts { n, .. } => *n,
            ScenarioKind::HeterogeneousVarSize { m_high, .. } => *m_high,
        }
    }

    /// In-control expected counts, the means a monitor is given.
    pub fn mean_model(&self) -> MeanModel {
        match &self.kind {
            ScenarioKind::Homogeneous { lambda, .. }
            | ScenarioKind::CollaborativeOutbreak { lambda, .. }
            | ScenarioKind::DominantLeaderOutbreak { lambda, .. } => MeanModel::Homogeneous { lambda: *lambda },
            ScenarioKind::HeterogeneousVarSize { a, b, .. } | ScenarioKind::HeterogeneousShifts { a, b, .. } => {
                MeanModel::DistanceLinear { a: *a, b: *b }
            }
        }
    }

    pub fn change_point(&self) -> Option<u32> {
        match &self.kind {
            ScenarioKind::CollaborativeOutbreak { change_t, .. }
            | ScenarioKind::DominantLeaderOutbreak { change_t, .. } => Some(*change_t),
            _ => None,
        }
    }

    /// True when the network size varies over time.
    pub fn varies_in_size(&self) -> bool {
        matches!(&self.kind, ScenarioKind::HeterogeneousVarSize { m_low, m_high, .. } if m_low != m_high)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidConfig(format!("networks need at least 2 nodes, got {n}")));
        }
        if self.t_max < 1 {
            return Err(Error::InvalidConfig("t_max must be at least 1".into()));
        }
        let check_delta = |delta: f64| {
            if delta >= 0.0 && delta.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("outbreak size delta={delta} must be >= 0")))
            }
        };
        let check_team = |team: &BTreeSet<usize>| match team.iter().next_back() {
            Some(&max) if max >= n => Err(Error::InvalidConfig(format!(
                "team node {} outside a {n}-node network",
                max + 1
            ))),
            _ => Ok(()),
        };
        match &self.kind {
            ScenarioKind::Homogeneous { .. } => {}
            ScenarioKind::CollaborativeOutbreak { team, delta, change_t, .. } => {
                check_delta(*delta)?;
                check_team(team)?;
                if team.len() < 2 {
                    return Err(Error::InvalidConfig("an outbreak team needs at least 2 nodes".into()));
                }
                if *change_t < 1 {
                    return Err(Error::InvalidConfig("change_t must be at least 1".into()));
                }
            }
            ScenarioKind::DominantLeaderOutbreak { sim_id, delta, change_t, .. } => {
                check_delta(*delta)?;
                let edges = dominant_leader_edges(*sim_id)?;
                let max = edges.iter().map(|&(i, j)| i.max(j)).max().unwrap_or(0);
                if max >= n {
                    return Err(Error::InvalidConfig(format!(
                        "leader topology {sim_id} needs {} nodes, network has {n}",
                        max + 1
                    )));
                }
                if *change_t < 1 {
                    return Err(Error::InvalidConfig("change_t must be at least 1".into()));
                }
            }
            ScenarioKind::HeterogeneousVarSize { m_low, m_high, .. } => {
                if m_low > m_high || *m_low < 2 {
                    return Err(Error::InvalidConfig(format!(
                        "network size range {m_low}..={m_high} is empty or below 2"
                    )));
                }
            }
            ScenarioKind::HeterogeneousShifts { team, shifts, .. } => {
                check_team(team)?;
                for s in shifts {
                    if !(s.factor > 0.0) || s.start > s.end {
                        return Err(Error::InvalidConfig(format!(
                            "shift {}..={} with factor {} is invalid",
                            s.start, s.end, s.factor
                        )));
                    }
                }
            }
        }
        self.mean_model().validate(n, self.t_max)
    }
}

/// Directed outbreak edges of the dominant-leader topologies, 0-based.
/// The leader is node index 5; each topology adds one node and its edges to
/// the previous one.
pub fn dominant_leader_edges(sim_id: u8) -> Result<Vec<(usize, usize)>> {
    const STAGES: [&[(usize, usize)]; 4] = [
        &[(2, 5), (4, 1), (6, 1), (6, 2), (6, 3), (6, 4), (6, 5)],
        &[(7, 5), (4, 7), (6, 7)],
        &[(6, 8), (7, 8), (4, 8), (1, 8)],
        &[(6, 9), (3, 9), (9, 2), (8, 9)],
    ];
    if !(1..=4).contains(&sim_id) {
        return Err(Error::BadSimId(sim_id));
    }
    Ok(STAGES[..sim_id as usize]
        .iter()
        .flat_map(|stage| stage.iter().map(|&(i, j)| (i - 1, j - 1)))
        .collect())
}

/// Independent Poisson samplers keyed by their mean.
#[derive(Debug, Default, Clone)]
struct Samplers {
    index: HashMap<u64, usize>,
    dists: Vec<Poisson<f64>>,
}

impl Samplers {
    fn id(&mut self, mean: f64) -> Result<usize> {
        if let Some(&id) = self.index.get(&mean.to_bits()) {
            return Ok(id);
        }
        let dist = Poisson::new(mean).map_err(|_| Error::NonPositiveMean {
            src: 0,
            dst: 0,
            t: 0,
            value: mean,
        })?;
        self.dists.push(dist);
        self.index.insert(mean.to_bits(), self.dists.len() - 1);
        Ok(self.dists.len() - 1)
    }

    #[inline]
    fn draw<R: Rng + ?Sized>(&self, id: usize, rng: &mut R) -> u32 {
        self.dists[id].sample(rng) as u32
    }
}

/// Per-scenario sampling state reused across time steps.
#[derive(Debug, Clone)]
pub struct Generator {
    scenario: Scenario,
    outbreaks: bool,
    lambda: Matrix,
    samplers: Samplers,
    base: Vec<usize>,
    /// Outbreak pairs as (flat index, sampler for the raised mean).
    raised: Vec<(usize, usize)>,
    /// Per-shift sampler ids for the team pairs, aligned with `team_pairs`.
    shifted: Vec<Vec<usize>>,
    team_pairs: Vec<usize>,
}

impl Generator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::build(scenario, true)
    }

    /// A generator that never injects outbreaks or shifts.
    pub fn in_control(scenario: &Scenario) -> Result<Self> {
        Self::build(scenario, false)
    }

    fn build(scenario: &Scenario, outbreaks: bool) -> Result<Self> {
        scenario.validate()?;
        let n = scenario.n();
        let lambda = scenario.mean_model().matrix(n, 1);
        let mut samplers = Samplers::default();
        let mut base = vec![usize::MAX; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    base[i * n + j] = samplers.id(lambda.get(i, j))?;
                }
            }
        }
        let mut raised = Vec::new();
        let mut shifted = Vec::new();
        let mut team_pairs = Vec::new();
        let pairs: Vec<(usize, usize)> = match &scenario.kind {
            ScenarioKind::CollaborativeOutbreak { team, .. } | ScenarioKind::HeterogeneousShifts { team, .. } => team
                .iter()
                .flat_map(|&i| team.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
                .collect(),
            ScenarioKind::DominantLeaderOutbreak { sim_id, .. } => dominant_leader_edges(*sim_id)?,
            _ => Vec::new(),
        };
        match &scenario.kind {
            ScenarioKind::CollaborativeOutbreak { delta, .. } | ScenarioKind::DominantLeaderOutbreak { delta, .. } => {
                for &(i, j) in &pairs {
                    raised.push((i * n + j, samplers.id((1.0 + delta) * lambda.get(i, j))?));
                }
            }
            ScenarioKind::HeterogeneousShifts { shifts, .. } => {
                team_pairs = pairs.iter().map(|&(i, j)| i * n + j).collect();
                for s in shifts {
                    let ids = pairs
                        .iter()
                        .map(|&(i, j)| samplers.id(s.factor * lambda.get(i, j)))
                        .collect::<Result<Vec<_>>>()?;
                    shifted.push(ids);
                }
            }
            _ => {}
        }
        Ok(Generator {
            scenario: scenario.clone(),
            outbreaks,
            lambda,
            samplers,
            base,
            raised,
            shifted,
            team_pairs,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// In-control means over all nodes; time-invariant for every scenario.
    pub fn means(&self) -> &Matrix {
        &self.lambda
    }

    /// Draws the snapshot for time `t` into `counts` and returns the number
    /// of active nodes.
    pub fn fill<R: Rng + ?Sized>(&self, t: u32, rng: &mut R, counts: &mut CountMatrix) -> usize {
        let n = self.scenario.n();
        let active = match &self.scenario.kind {
            ScenarioKind::HeterogeneousVarSize { m_low, m_high, .. } => rng.random_range(*m_low..=*m_high),
            _ => n,
        };
        let data = counts.as_mut_slice();
        data.fill(0);
        for i in 0..active {
            for j in 0..active {
                if i != j {
                    let idx = i * n + j;
                    data[idx] = self.samplers.draw(self.base[idx], rng);
                }
            }
        }
        if self.outbreaks {
            match &self.scenario.kind {
                ScenarioKind::CollaborativeOutbreak { change_t, .. }
                | ScenarioKind::DominantLeaderOutbreak { change_t, .. }
                    if t > *change_t =>
                {
                    for &(idx, id) in &self.raised {
                        data[idx] = self.samplers.draw(id, rng);
                    }
                }
                ScenarioKind::HeterogeneousShifts { shifts, .. } => {
                    if let Some(s) = shifts.iter().position(|s| (s.start..=s.end).contains(&t)) {
                        for (&idx, &id) in self.team_pairs.iter().zip(&self.shifted[s]) {
                            data[idx] = self.samplers.draw(id, rng);
                        }
                    }
                }
                _ => {}
            }
        }
        active
    }

    pub fn snapshot<R: Rng + ?Sized>(&self, t: u32, rng: &mut R) -> NetworkSnapshot {
        let mut counts = CountMatrix::zeros(self.scenario.n());
        let active = self.fill(t, rng, &mut counts);
        NetworkSnapshot::with_active(t, active, counts).expect("generator output is well formed")
    }
}

/// One snapshot of `scenario` at time `t`.
pub fn gen_step<R: Rng + ?Sized>(scenario: &Scenario, t: u32, rng: &mut R) -> Result<NetworkSnapshot> {
    if t < 1 || t > scenario.t_max {
        return Err(Error::InvalidHorizon(format!("t={t} outside 1..={}", scenario.t_max)));
    }
    Ok(Generator::new(scenario)?.snapshot(t, rng))
}

/// The RNG for replication `rep` under `seed`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// A full series `1..=t_max` drawn with the scenario's own seed.
pub fn simulate_series(scenario: &Scenario) -> Result<NetworkSeries> {
    let generator = Generator::new(scenario)?;
    let mut rng = rep_rng(scenario.seed, 0);
    let snaps = (1..=scenario.t_max).map(|t| generator.snapshot(t, &mut rng)).collect();
    NetworkSeries::new(snaps)
}

/// Streams one replication through a fresh monitor, returning the first
/// signal after the change and the number of signals up to the change.
fn run_rep(generator: &Generator, plan: &SurveillancePlan, change: u32, t_end: u32, rng: &mut ChaCha8Rng) -> Result<(Option<u32>, usize)> {
    let mut monitor = Monitor::new(plan.clone())?;
    let limit = plan.threshold.value();
    let n = generator.scenario().n();
    let mut counts = CountMatrix::zeros(n);
    let mut false_alarms = 0;
    for t in 1..=t_end {
        let active = generator.fill(t, rng, &mut counts);
        let snap = NetworkSnapshot::with_active(t, active, std::mem::replace(&mut counts, CountMatrix::zeros(0)))?;
        let score = monitor.observe_score(&snap, generator.means())?;
        counts = snap.counts;
        if score > limit {
            if t > change {
                return Ok((Some(t - change), false_alarms));
            }
            false_alarms += 1;
        }
    }
    Ok((None, false_alarms))
}

/// Time to signal after the change point, averaged over `reps` runs.
///
/// Signals at or before the change count as false alarms and do not stop
/// the run. Runs without a signal within `t_max − change_t` steps after the
/// change are censored at that horizon.
pub fn run_ats_experiment(scenario: &Scenario, plan: &SurveillancePlan, reps: usize, seed: u64) -> Result<AtsReport> {
    let change = scenario.change_point().ok_or(Error::NoChangePoint)?;
    if reps == 0 {
        return Err(Error::ZeroReps);
    }
    if scenario.t_max <= change {
        return Err(Error::InvalidHorizon(format!(
            "t_max={} leaves no steps after the change at t={change}",
            scenario.t_max
        )));
    }
    plan.validate()?;
    let generator = Generator::new(scenario)?;
    let horizon = scenario.t_max - change;
    let runs = (0..reps as u64)
        .into_par_iter()
        .map(|rep| run_rep(&generator, plan, change, scenario.t_max, &mut rep_rng(seed, rep)))
        .collect::<Result<Vec<_>>>()?;
    let censored = runs.iter().filter(|r| r.0.is_none()).count();
    let false_alarms = runs.iter().map(|r| r.1).sum();
    let times: Vec<f64> = runs.iter().map(|r| f64::from(r.0.unwrap_or(horizon))).collect();
    Ok(AtsReport::from_times(&times, censored, false_alarms, horizon))
}
