//! Streaming evaluation of a surveillance plan.
//!
//! Each observed snapshot advances the smoother, updates the plan's
//! statistic and reduces it to a single score. The plan signals when the
//! score exceeds [`Threshold::value`]:
//!
//! * fixed thresholds score the excess `√value − √boundary` (mirrored for
//!   the lower chart);
//! * surrogate thresholds on non-adaptive statistics divide that excess by
//!   the threshold predicted at the network's mean smoothed rate;
//! * adaptive scans score the excess of their per-edge scaled sums.
//!
//! Scans score the largest excess over all evaluated candidate teams.

use crate::error::{Error, Result};
use crate::search::{DivisorCache, Scanner};
use crate::smoothing::{init_state_with, SmootherState};
use crate::statistics::{self, excess, StatState};
use crate::types::{FlagEvent, Matrix, NetworkSeries, NetworkSnapshot, SelfPairs, StatisticKind, SurveillancePlan, Team, Threshold};

/// Outcome of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: u32,
    /// Largest score over evaluated teams; −∞ when nothing was evaluated.
    pub score: f64,
    pub flagged: bool,
    /// One event per evaluated team, in node order.
    pub events: Vec<FlagEvent>,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    plan: SurveillancePlan,
    smoother: Option<SmootherState>,
    stat: StatState,
    scanner: Scanner,
    cache: DivisorCache,
    div: Matrix,
    w: Vec<usize>,
}

impl Monitor {
    pub fn new(plan: SurveillancePlan) -> Result<Self> {
        plan.validate()?;
        Ok(Monitor {
            stat: StatState::new(plan.statistic),
            plan,
            smoother: None,
            scanner: Scanner::new(),
            cache: DivisorCache::new(),
            div: Matrix::filled(2, 1.0),
            w: Vec::new(),
        })
    }

    pub fn plan(&self) -> &SurveillancePlan {
        &self.plan
    }

    pub fn smoother(&self) -> Option<&SmootherState> {
        self.smoother.as_ref()
    }

    /// Current value of the recursive statistic, for charting.
    pub fn statistic(&self) -> &StatState {
        &self.stat
    }

    /// Pair scores computed by the team search so far.
    pub fn pair_evaluations(&self) -> u64 {
        self.scanner.pair_evaluations
    }

    /// Absorbs one snapshot and returns the score with per-team events.
    pub fn observe(&mut self, y: &NetworkSnapshot, lambda: &Matrix) -> Result<Observation> {
        self.absorb(y, lambda)?;
        let mut events = Vec::new();
        let score = self.evaluate(Some(&mut events))?;
        Ok(Observation {
            t: y.t,
            score,
            flagged: score > self.plan.threshold.value(),
            events,
        })
    }

    /// Absorbs one snapshot and returns only the score.
    pub fn observe_score(&mut self, y: &NetworkSnapshot, lambda: &Matrix) -> Result<f64> {
        self.absorb(y, lambda)?;
        self.evaluate(None)
    }

    fn absorb(&mut self, y: &NetworkSnapshot, lambda: &Matrix) -> Result<()> {
        if self.smoother.is_none() {
            if let Some(max) = self.plan.team.as_ref().and_then(Team::max_node) {
                if max >= y.n() {
                    return Err(Error::DimensionMismatch(format!(
                        "team node {} outside a {}-node network",
                        max + 1,
                        y.n()
                    )));
                }
            }
            self.smoother = Some(init_state_with(lambda, self.plan.alpha, self.plan.self_pairs())?);
        }
        self.smoother.as_mut().expect("initialised above").advance(y, lambda)
    }

    fn evaluate(&mut self, events: Option<&mut Vec<FlagEvent>>) -> Result<f64> {
        let s = self.smoother.take().expect("absorb runs first");
        let result = self.evaluate_with(&s, events);
        self.smoother = Some(s);
        result
    }

    fn evaluate_with(&mut self, s: &SmootherState, mut events: Option<&mut Vec<FlagEvent>>) -> Result<f64> {
        use StatisticKind::*;
        let kind = self.plan.statistic;
        let k = self.plan.k();
        let limit = self.plan.threshold.value();
        let t = s.t;
        let record = events.is_some();
        let mut push = |team: Team, value: f64, boundary: f64, score: f64| {
            if let Some(ev) = events.as_deref_mut() {
                ev.push(FlagEvent {
                    t,
                    statistic: kind,
                    team,
                    value,
                    boundary,
                    flagged: score > limit,
                });
            }
        };

        match kind {
            Gewma | LGewma | Tewma | GewmaStar | TewmaStar if !self.plan.is_scan() => {
                let team = self.plan.team.as_ref();
                let (value, boundary) = match kind {
                    Gewma => {
                        self.stat = statistics::gewma_step(&self.stat, s, team.expect("validated"))?;
                        (self.stat.value, self.stat.mu)
                    }
                    LGewma => {
                        self.stat = statistics::l_gewma_step(&self.stat, s, team.expect("validated"))?;
                        (self.stat.value, self.stat.mu)
                    }
                    Tewma => {
                        self.stat = statistics::tewma_step(&self.stat, s)?;
                        (self.stat.value, self.stat.mu)
                    }
                    GewmaStar => {
                        let team = team.expect("validated");
                        (statistics::gewma_star(s, team)?, statistics::team_mean(s, team)?)
                    }
                    _ => (statistics::tewma_star(s), statistics::network_mean(s)),
                };
                let raw = if kind == LGewma {
                    excess(boundary, value)
                } else {
                    excess(value, boundary)
                };
                let score = raw / excess_scale(&self.plan.threshold, &mut self.cache, s)?;
                if record {
                    let team = team.cloned().unwrap_or_else(|| Team::new(0..s.active));
                    push(team, value, boundary, score);
                }
                Ok(score)
            }
            Dewma if self.plan.team.is_some() => {
                let team = self.plan.team.as_ref().expect("checked by the guard");
                let leader = team.leader.expect("validated");
                self.w.clear();
                if team.members.is_empty() {
                    let nb = crate::search::leader_neighborhood(s, leader, k)?;
                    self.w.extend(nb.members.iter().copied());
                } else {
                    self.w.extend(team.members.iter().copied());
                }
                if self.w.is_empty() {
                    return Ok(f64::NEG_INFINITY);
                }
                let (value, boundary) = self.scanner.fixed_leader(s, k, leader, &self.w, None)?;
                let score = excess(value, boundary) / excess_scale(&self.plan.threshold, &mut self.cache, s)?;
                let w_team = Team {
                    members: self.w.iter().copied().collect(),
                    leader: Some(leader),
                };
                push(w_team, value, boundary, score);
                Ok(score)
            }
            GewmaStar | Agewma => self.scan_collaborative(s, k, &mut push),
            Dewma | Adewma => self.scan_dominant(s, k, &mut push),
            _ => unreachable!("every statistic is handled above"),
        }
    }

    fn scan_collaborative(
        &mut self,
        s: &SmootherState,
        k: f64,
        push: &mut impl FnMut(Team, f64, f64, f64),
    ) -> Result<f64> {
        let adaptive = self.plan.statistic == StatisticKind::Agewma;
        let scale = if adaptive {
            let model = self.plan.threshold.surrogate().expect("validated");
            self.cache.edge_divisors(s, model, &mut self.div)?;
            1.0
        } else {
            excess_scale(&self.plan.threshold, &mut self.cache, s)?
        };
        let div = adaptive.then_some(&self.div);
        let mut best = f64::NEG_INFINITY;
        self.scanner.collaborative(s, k, div, |_, nodes, value, boundary| {
            let score = excess(value, boundary) / scale;
            best = best.max(score);
            push(Team::new(nodes.iter().copied()), value, boundary, score);
        })?;
        Ok(best)
    }

    fn scan_dominant(&mut self, s: &SmootherState, k: f64, push: &mut impl FnMut(Team, f64, f64, f64)) -> Result<f64> {
        let adaptive = self.plan.statistic == StatisticKind::Adewma;
        let scale = if adaptive {
            let model = self.plan.threshold.surrogate().expect("validated");
            self.cache.edge_divisors(s, model, &mut self.div)?;
            1.0
        } else {
            excess_scale(&self.plan.threshold, &mut self.cache, s)?
        };
        let div = adaptive.then_some(&self.div);
        let mut best = f64::NEG_INFINITY;
        self.scanner.dominant(s, k, div, |leader, w, _, value, boundary| {
            let score = excess(value, boundary) / scale;
            best = best.max(score);
            let team = Team {
                members: w.iter().copied().collect(),
                leader: Some(leader),
            };
            push(team, value, boundary, score);
        })?;
        Ok(best)
    }
}

/// Scale applied to excesses under a surrogate threshold on a
/// non-adaptive statistic: the threshold predicted at the network's mean
/// smoothed rate and active size.
fn excess_scale(threshold: &Threshold, cache: &mut DivisorCache, s: &SmootherState) -> Result<f64> {
    match threshold {
        Threshold::Fixed(_) => Ok(1.0),
        Threshold::Surrogate { model, .. } => {
            let pairs = match s.self_pairs {
                SelfPairs::Include => s.active * s.active,
                SelfPairs::Exclude => s.active * (s.active - 1),
            };
            let mean = statistics::network_mean(s) / pairs as f64;
            cache.threshold(model, mean, s.active)
        }
    }
}

/// Runs a plan over a whole series with means from `means`.
pub fn run_series(
    plan: &SurveillancePlan,
    series: &NetworkSeries,
    means: &crate::types::MeanModel,
) -> Result<Vec<Observation>> {
    crate::types::validate_series(series, means)?;
    let mut monitor = Monitor::new(plan.clone())?;
    let mut lambda = Matrix::filled(series.n(), 0.0);
    series
        .snapshots()
        .iter()
        .map(|snap| {
            means.fill(snap.t, &mut lambda);
            monitor.observe(snap, &lambda)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CountMatrix, MeanModel};

    fn snapshot(t: u32, n: usize, f: impl Fn(usize, usize) -> u32) -> NetworkSnapshot {
        let mut c = CountMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c.set(i, j, f(i, j));
                }
            }
        }
        NetworkSnapshot::new(t, c).unwrap()
    }

    #[test]
    fn known_team_gewma_matches_direct_statistic() {
        let team = Team::new([0, 1, 2]);
        let plan = SurveillancePlan::new(StatisticKind::Gewma, Threshold::Fixed(0.3)).with_team(team.clone());
        let mut monitor = Monitor::new(plan).unwrap();
        let lam = Matrix::filled(5, 0.5);
        let mut smoother = init_state_with(&lam, 0.075, SelfPairs::Exclude).unwrap();
        let mut stat = StatState::new(StatisticKind::Gewma);
        for t in 1..=30 {
            let y = snapshot(t, 5, |i, j| ((i + j + t as usize) % 3 == 0) as u32 * 2);
            let obs = monitor.observe(&y, &lam).unwrap();
            smoother.advance(&y, &lam).unwrap();
            stat = statistics::gewma_step(&stat, &smoother, &team).unwrap();
            assert_eq!(obs.events.len(), 1);
            assert_eq!(obs.events[0].value, stat.value);
            assert_eq!(obs.score, excess(stat.value, stat.mu));
            assert_eq!(obs.flagged, obs.score > 0.3);
        }
    }

    #[test]
    fn heavy_team_traffic_is_flagged_by_every_upper_plan() {
        let lam = Matrix::filled(8, 0.2);
        let plans = [
            SurveillancePlan::new(StatisticKind::Gewma, Threshold::Fixed(0.5)).with_team(Team::new([0, 1, 2])),
            SurveillancePlan::new(StatisticKind::GewmaStar, Threshold::Fixed(0.5)),
            SurveillancePlan::new(StatisticKind::Tewma, Threshold::Fixed(0.5)),
            SurveillancePlan::new(StatisticKind::Dewma, Threshold::Fixed(0.5)),
            SurveillancePlan::new(StatisticKind::Dewma, Threshold::Fixed(0.5))
                .with_team(Team::with_leader(0, []).unwrap()),
        ];
        for plan in plans {
            let name = plan.statistic;
            let mut m = Monitor::new(plan).unwrap();
            let mut flagged = false;
            for t in 1..=40 {
                let y = snapshot(t, 8, |i, j| if i < 3 && j < 3 { 6 } else { 0 });
                flagged |= m.observe(&y, &lam).unwrap().flagged;
            }
            assert!(flagged, "{name} never flagged");
        }
    }

    #[test]
    fn lower_chart_flags_silence() {
        let lam = Matrix::filled(4, 2.0);
        let plan = SurveillancePlan::new(StatisticKind::LGewma, Threshold::Fixed(0.5)).with_team(Team::new([0, 1, 2, 3]));
        let mut m = Monitor::new(plan).unwrap();
        let mut first = None;
        for t in 1..=60 {
            let obs = m.observe(&snapshot(t, 4, |_, _| 0), &lam).unwrap();
            if obs.flagged && first.is_none() {
                first = Some(t);
            }
            assert!(m.statistic().value <= m.statistic().mu);
        }
        assert!(first.is_some());
    }

    #[test]
    fn quiet_scan_scores_negative_infinity() {
        let lam = Matrix::filled(5, 1.0);
        let plan = SurveillancePlan::new(StatisticKind::GewmaStar, Threshold::Fixed(0.0));
        let mut m = Monitor::new(plan).unwrap();
        let obs = m.observe(&snapshot(1, 5, |_, _| 1), &lam).unwrap();
        assert_eq!(obs.score, f64::NEG_INFINITY);
        assert!(!obs.flagged);
        assert!(obs.events.is_empty());
    }

    #[test]
    fn run_series_checks_team_range() {
        let series = NetworkSeries::new(vec![snapshot(1, 3, |_, _| 0)]).unwrap();
        let plan = SurveillancePlan::new(StatisticKind::Gewma, Threshold::Fixed(1.0)).with_team(Team::new([0, 5]));
        assert!(matches!(
            run_series(&plan, &series, &MeanModel::Homogeneous { lambda: 1.0 }),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
