//! Known-team and whole-network statistics with their flag rules.
//!
//! Every rule has the variance-stabilised form `√value − √boundary > h`,
//! where the boundary is the matching sum of smoothed means λ̃. The lower
//! chart mirrors it as `√boundary − √value > h`.

use crate::error::{Error, Result};
use crate::smoothing::SmootherState;
use crate::types::{Matrix, SelfPairs, StatisticKind, Team};

/// Running value of a recursive statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatState {
    pub kind: StatisticKind,
    pub value: f64,
    /// Reflection boundary μ_Ω at the current time.
    pub mu: f64,
    /// Time of the last update; 0 before the first.
    pub t: u32,
}

impl StatState {
    pub fn new(kind: StatisticKind) -> Self {
        StatState {
            kind,
            value: 0.0,
            mu: 0.0,
            t: 0,
        }
    }
}

/// Σ_{i∈nodes} Σ_{j∈nodes} m_{i,j}, with or without i = j.
pub fn block_sum(m: &Matrix, nodes: &[usize], self_pairs: SelfPairs) -> f64 {
    let n = m.n();
    let data = m.as_slice();
    let mut total = 0.0;
    for &i in nodes {
        let row = &data[i * n..(i + 1) * n];
        for &j in nodes {
            total += row[j];
        }
    }
    if self_pairs == SelfPairs::Exclude {
        for &i in nodes {
            total -= data[i * n + i];
        }
    }
    total
}

/// Σ over the whole active block, accumulated in the same order as
/// [`block_sum`] over `0..active` so the two agree bit for bit.
pub fn active_sum(m: &Matrix, active: usize, self_pairs: SelfPairs) -> f64 {
    let n = m.n();
    let data = m.as_slice();
    let mut total = 0.0;
    for i in 0..active {
        for &v in &data[i * n..i * n + active] {
            total += v;
        }
    }
    if self_pairs == SelfPairs::Exclude {
        for i in 0..active {
            total -= data[i * n + i];
        }
    }
    total
}

fn team_nodes(smoother: &SmootherState, team: &Team) -> Result<Vec<usize>> {
    if team.is_empty() {
        return Err(Error::EmptyTeam);
    }
    let nodes = team.nodes();
    check_active(smoother, &nodes)?;
    Ok(nodes)
}

fn check_active(smoother: &SmootherState, nodes: &[usize]) -> Result<()> {
    match nodes.iter().find(|&&i| i >= smoother.active) {
        Some(i) => Err(Error::DimensionMismatch(format!(
            "node {} is not active ({} active nodes)",
            i + 1,
            smoother.active
        ))),
        None => Ok(()),
    }
}

/// `√value − √boundary`, the excess every upper flag rule compares to h.
#[inline]
pub fn excess(value: f64, boundary: f64) -> f64 {
    value.sqrt() - boundary.sqrt()
}

fn reflect_up(stat: &StatState, smoother: &SmootherState, sum: f64, mu: f64) -> StatState {
    // The first update seeds the recursion with the first smoothed sum, so
    // value_1 = max(S_1, μ_1).
    let prev = if stat.t == 0 { sum } else { stat.value };
    let a = smoother.alpha;
    StatState {
        kind: stat.kind,
        value: (a * sum + (1.0 - a) * prev).max(mu),
        mu,
        t: smoother.t,
    }
}

fn reflect_down(stat: &StatState, smoother: &SmootherState, sum: f64, mu: f64) -> StatState {
    let prev = if stat.t == 0 { sum } else { stat.value };
    let a = smoother.alpha;
    StatState {
        kind: stat.kind,
        value: (a * sum + (1.0 - a) * prev).min(mu),
        mu,
        t: smoother.t,
    }
}

/// GEWMA_t = max(α·Σ_Ω ỹ + (1−α)·GEWMA_{t−1}, μ_Ω) with μ_Ω = Σ_Ω λ̃.
pub fn gewma_step(stat: &StatState, smoother: &SmootherState, team: &Team) -> Result<StatState> {
    let nodes = team_nodes(smoother, team)?;
    let sum = block_sum(&smoother.ytilde, &nodes, smoother.self_pairs);
    let mu = block_sum(&smoother.ltilde, &nodes, smoother.self_pairs);
    Ok(reflect_up(stat, smoother, sum, mu))
}

/// Lower chart: min(α·Σ_Ω ỹ + (1−α)·L_{t−1}, μ_Ω).
pub fn l_gewma_step(stat: &StatState, smoother: &SmootherState, team: &Team) -> Result<StatState> {
    let nodes = team_nodes(smoother, team)?;
    let sum = block_sum(&smoother.ytilde, &nodes, smoother.self_pairs);
    let mu = block_sum(&smoother.ltilde, &nodes, smoother.self_pairs);
    Ok(reflect_down(stat, smoother, sum, mu))
}

/// GEWMA with the team set to every active node.
pub fn tewma_step(stat: &StatState, smoother: &SmootherState) -> Result<StatState> {
    let sum = active_sum(&smoother.ytilde, smoother.active, smoother.self_pairs);
    let mu = active_sum(&smoother.ltilde, smoother.active, smoother.self_pairs);
    Ok(reflect_up(stat, smoother, sum, mu))
}

/// Σ_{i,j∈Ω} y*_{i,j,t}.
pub fn gewma_star(smoother: &SmootherState, team: &Team) -> Result<f64> {
    let nodes = team_nodes(smoother, team)?;
    Ok(block_sum(&smoother.ystar, &nodes, smoother.self_pairs))
}

/// μ_Ω = Σ_{i,j∈Ω} λ̃_{i,j,t}.
pub fn team_mean(smoother: &SmootherState, team: &Team) -> Result<f64> {
    let nodes = team_nodes(smoother, team)?;
    Ok(block_sum(&smoother.ltilde, &nodes, smoother.self_pairs))
}

/// Σ of y* over the whole active network.
pub fn tewma_star(smoother: &SmootherState) -> f64 {
    active_sum(&smoother.ystar, smoother.active, smoother.self_pairs)
}

/// μ_[n] = Σ of λ̃ over the whole active network.
pub fn network_mean(smoother: &SmootherState) -> f64 {
    active_sum(&smoother.ltilde, smoother.active, smoother.self_pairs)
}

fn check_nonnegative(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v >= 0.0)) {
        Some(&v) => Err(Error::NegativeInput(v)),
        None => Ok(()),
    }
}

/// `√value − √mu > h`.
pub fn gewma_flag(value: f64, mu: f64, h: f64) -> Result<bool> {
    check_nonnegative(&[value, mu, h])?;
    Ok(excess(value, mu) > h)
}

/// `√mu − √value > h`, the lower chart's rule.
pub fn l_gewma_flag(value: f64, mu: f64, h: f64) -> Result<bool> {
    check_nonnegative(&[value, mu, h])?;
    Ok(excess(mu, value) > h)
}

/// `√value − √boundary > h` for the dominant-leader statistic.
pub fn dewma_flag(value: f64, boundary: f64, h: f64) -> Result<bool> {
    check_nonnegative(&[value, boundary, h])?;
    Ok(excess(value, boundary) > h)
}

fn leader_sum(m: &Matrix, leader: usize, w: &[usize], omega: &[usize], self_pairs: SelfPairs) -> f64 {
    let spoke: f64 = w.iter().map(|&i| m.get(i, leader) + m.get(leader, i)).sum();
    spoke + block_sum(m, omega, self_pairs)
}

fn check_leader_team(smoother: &SmootherState, leader: usize, w: &Team, omega: &Team) -> Result<(Vec<usize>, Vec<usize>)> {
    if w.members.contains(&leader) {
        return Err(Error::LeaderInTeam(leader + 1));
    }
    if !omega.members.is_subset(&w.members) {
        return Err(Error::OmegaNotSubset);
    }
    let w_nodes: Vec<usize> = w.members.iter().copied().collect();
    let o_nodes: Vec<usize> = omega.members.iter().copied().collect();
    check_active(smoother, &w_nodes)?;
    check_active(smoother, &[leader])?;
    Ok((w_nodes, o_nodes))
}

/// DEWMA = Σ_{i∈W}(y*_{i,ν} + y*_{ν,i}) + Σ_{i,j∈Ω} y*_{i,j}.
///
/// `w` and `omega` are read through their member sets.
pub fn dewma(smoother: &SmootherState, leader: usize, w: &Team, omega: &Team) -> Result<f64> {
    let (w_nodes, o_nodes) = check_leader_team(smoother, leader, w, omega)?;
    Ok(leader_sum(&smoother.ystar, leader, &w_nodes, &o_nodes, smoother.self_pairs))
}

/// The λ̃ analogue of [`dewma`], used as its flag boundary.
pub fn dewma_boundary(smoother: &SmootherState, leader: usize, w: &Team, omega: &Team) -> Result<f64> {
    let (w_nodes, o_nodes) = check_leader_team(smoother, leader, w, omega)?;
    Ok(leader_sum(&smoother.ltilde, leader, &w_nodes, &o_nodes, smoother.self_pairs))
}
