//! Neighbourhood estimation of unknown teams and the adaptive scans.
//!
//! A pair is significant when `√y* − √λ̃ > k`. A collaborative candidate
//! around a centre collects every node with a significant pair to or from
//! the centre. A dominant-leader candidate first collects the leader's
//! neighbourhood W from the symmetrised pair score, then refines it to the
//! nodes of W that share a significant pair inside W.
//!
//! The single-team functions recompute everything from the smoother. The
//! [`Scanner`] evaluates all centres or leaders of one time step, reusing a
//! significance bitmap so the cost stays quadratic in the network size.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::smoothing::SmootherState;
use crate::statistics::{self, excess};
use crate::surrogate::{predict_threshold, SurrogateKind, SurrogateModel};
use crate::types::{FlagEvent, Matrix, SelfPairs, StatisticKind, Team};

fn check_k(k: f64) -> Result<()> {
    if k >= 0.0 {
        Ok(())
    } else {
        Err(Error::BadK(k))
    }
}

fn check_node(s: &SmootherState, node: usize) -> Result<()> {
    if node < s.active {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "node {} is not active ({} active nodes)",
            node + 1,
            s.active
        )))
    }
}

#[inline]
fn pair_score(s: &SmootherState, i: usize, j: usize) -> f64 {
    excess(s.ystar.get(i, j), s.ltilde.get(i, j))
}

#[inline]
fn leader_score(s: &SmootherState, leader: usize, i: usize) -> f64 {
    excess(
        s.ystar.get(leader, i) + s.ystar.get(i, leader),
        s.ltilde.get(leader, i) + s.ltilde.get(i, leader),
    )
}

/// Nodes with a significant pair to or from `center`, plus the centre.
pub fn collab_candidate(s: &SmootherState, center: usize, k: f64) -> Result<Team> {
    check_k(k)?;
    check_node(s, center)?;
    let members = (0..s.active)
        .filter(|&i| i == center || pair_score(s, i, center) > k || pair_score(s, center, i) > k);
    Ok(Team::new(members))
}

/// Nodes other than the leader whose combined traffic with it is significant.
pub fn leader_neighborhood(s: &SmootherState, leader: usize, k: f64) -> Result<Team> {
    check_k(k)?;
    check_node(s, leader)?;
    let members = (0..s.active).filter(|&i| i != leader && leader_score(s, leader, i) > k);
    Ok(Team::new(members))
}

/// Members of `w` that take part in at least one significant pair inside `w`.
pub fn refine_leader_team(s: &SmootherState, w: &Team, k: f64) -> Result<Team> {
    check_k(k)?;
    let nodes: Vec<usize> = w.members.iter().copied().collect();
    let mut out = BTreeSet::new();
    for &i in &nodes {
        for &j in &nodes {
            if i != j && pair_score(s, i, j) > k {
                out.insert(i);
                out.insert(j);
            }
        }
    }
    Ok(Team {
        members: out,
        leader: None,
    })
}

/// The collaborative candidate around `center` and its reflected team sum.
pub fn local_gewma_star(s: &SmootherState, center: usize, k: f64) -> Result<(Team, f64)> {
    let team = collab_candidate(s, center, k)?;
    let value = statistics::gewma_star(s, &team)?;
    Ok((team, value))
}

/// Leader neighbourhood W, refined team Ω̂ and the leader statistic.
pub fn local_dewma_star(s: &SmootherState, leader: usize, k: f64) -> Result<(Team, Team, f64)> {
    let w = leader_neighborhood(s, leader, k)?;
    let omega = refine_leader_team(s, &w, k)?;
    let value = statistics::dewma(s, leader, &w, &omega)?;
    Ok((w, omega, value))
}

/// Memoised surrogate predictions keyed by (λ̃, network size).
#[derive(Debug, Default, Clone)]
pub struct DivisorCache {
    memo: HashMap<(u64, usize), f64>,
}

impl DivisorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn threshold(&mut self, model: &SurrogateModel, lambda: f64, n: usize) -> Result<f64> {
        if let Some(&h) = self.memo.get(&(lambda.to_bits(), n)) {
            return Ok(h);
        }
        let h = predict_threshold(model, lambda, n)?;
        if self.memo.len() > 1 << 20 {
            self.memo.clear();
        }
        self.memo.insert((lambda.to_bits(), n), h);
        Ok(h)
    }

    /// Per-edge divisors for an adaptive scan: `h²` for the collaborative
    /// form, `h` for the leader form. The size argument is the number of
    /// active nodes.
    pub fn edge_divisors(&mut self, s: &SmootherState, model: &SurrogateModel, out: &mut Matrix) -> Result<()> {
        let n = s.n();
        if out.n() != n {
            *out = Matrix::filled(n, 1.0);
        }
        let active = s.active;
        let squared = model.kind == SurrogateKind::HgRecip;
        for i in 0..active {
            for j in 0..active {
                let h = self.threshold(model, s.ltilde.get(i, j), active)?;
                out.set(i, j, if squared { h * h } else { h });
            }
        }
        Ok(())
    }
}

/// Reusable buffers for scanning every centre or leader at one time step.
#[derive(Debug, Default, Clone)]
pub struct Scanner {
    sig: Vec<bool>,
    nodes: Vec<usize>,
    omega: Vec<usize>,
    in_omega: Vec<bool>,
    /// Pair scores computed so far, for complexity checks.
    pub pair_evaluations: u64,
}

/// Weighted sums Σ m_ij / d_ij over a node block.
fn weighted_block(m: &Matrix, div: Option<&Matrix>, nodes: &[usize], self_pairs: SelfPairs) -> f64 {
    match div {
        None => statistics::block_sum(m, nodes, self_pairs),
        Some(d) => {
            let mut total = 0.0;
            for &i in nodes {
                for &j in nodes {
                    if i == j && self_pairs == SelfPairs::Exclude {
                        continue;
                    }
                    total += m.get(i, j) / d.get(i, j);
                }
            }
            total
        }
    }
}

fn weighted_leader(m: &Matrix, div: Option<&Matrix>, leader: usize, w: &[usize], omega: &[usize], sp: SelfPairs) -> f64 {
    let spoke: f64 = match div {
        None => w.iter().map(|&i| m.get(i, leader) + m.get(leader, i)).sum(),
        Some(d) => w
            .iter()
            .map(|&i| m.get(i, leader) / d.get(i, leader) + m.get(leader, i) / d.get(leader, i))
            .sum(),
    };
    spoke + weighted_block(m, div, omega, sp)
}

impl Scanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Visits the collaborative candidate of every active centre, in node
    /// order, as `(center, sorted nodes, value, boundary)`. Candidates with
    /// fewer than two nodes are skipped. With `div`, every edge term is
    /// divided by its entry.
    pub fn collaborative(
        &mut self,
        s: &SmootherState,
        k: f64,
        div: Option<&Matrix>,
        mut visit: impl FnMut(usize, &[usize], f64, f64),
    ) -> Result<()> {
        check_k(k)?;
        let n = s.n();
        let active = s.active;
        self.sig.clear();
        self.sig.resize(n * n, false);
        for i in 0..active {
            for j in 0..active {
                if i != j {
                    self.sig[i * n + j] = pair_score(s, i, j) > k;
                }
            }
        }
        self.pair_evaluations += (active * (active - 1)) as u64;
        for center in 0..active {
            self.nodes.clear();
            for i in 0..active {
                if i == center || self.sig[i * n + center] || self.sig[center * n + i] {
                    self.nodes.push(i);
                }
            }
            if self.nodes.len() < 2 {
                continue;
            }
            let value = weighted_block(&s.ystar, div, &self.nodes, s.self_pairs);
            let boundary = weighted_block(&s.ltilde, div, &self.nodes, s.self_pairs);
            visit(center, &self.nodes, value, boundary);
        }
        Ok(())
    }

    /// Visits the estimated dominant-leader team of every active node as
    /// `(leader, W, Ω̂, value, boundary)`. Leaders with an empty W are
    /// skipped.
    pub fn dominant(
        &mut self,
        s: &SmootherState,
        k: f64,
        div: Option<&Matrix>,
        mut visit: impl FnMut(usize, &[usize], &[usize], f64, f64),
    ) -> Result<()> {
        check_k(k)?;
        let active = s.active;
        self.in_omega.clear();
        self.in_omega.resize(s.n(), false);
        for leader in 0..active {
            self.nodes.clear();
            for i in 0..active {
                if i != leader && leader_score(s, leader, i) > k {
                    self.nodes.push(i);
                }
            }
            self.pair_evaluations += (active - 1) as u64;
            if self.nodes.is_empty() {
                continue;
            }
            self.refine(s, k);
            let value = weighted_leader(&s.ystar, div, leader, &self.nodes, &self.omega, s.self_pairs);
            let boundary = weighted_leader(&s.ltilde, div, leader, &self.nodes, &self.omega, s.self_pairs);
            visit(leader, &self.nodes, &self.omega, value, boundary);
        }
        Ok(())
    }

    /// Evaluates one leader with a fixed neighbourhood `w`, refining Ω̂
    /// inside it. Returns `(value, boundary)` and leaves Ω̂ in
    /// [`Scanner::omega`].
    pub fn fixed_leader(
        &mut self,
        s: &SmootherState,
        k: f64,
        leader: usize,
        w: &[usize],
        div: Option<&Matrix>,
    ) -> Result<(f64, f64)> {
        check_k(k)?;
        self.in_omega.clear();
        self.in_omega.resize(s.n(), false);
        self.nodes.clear();
        self.nodes.extend_from_slice(w);
        self.refine(s, k);
        let value = weighted_leader(&s.ystar, div, leader, &self.nodes, &self.omega, s.self_pairs);
        let boundary = weighted_leader(&s.ltilde, div, leader, &self.nodes, &self.omega, s.self_pairs);
        Ok((value, boundary))
    }

    /// Ω̂ from the most recent leader evaluation, sorted.
    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    fn refine(&mut self, s: &SmootherState, k: f64) {
        let w = &self.nodes;
        for (a, &i) in w.iter().enumerate() {
            for &j in &w[a + 1..] {
                if pair_score(s, i, j) > k || pair_score(s, j, i) > k {
                    self.in_omega[i] = true;
                    self.in_omega[j] = true;
                }
            }
        }
        self.pair_evaluations += (w.len() * w.len().saturating_sub(1)) as u64;
        self.omega.clear();
        for &i in w {
            if self.in_omega[i] {
                self.omega.push(i);
                self.in_omega[i] = false;
            }
        }
    }
}

fn require_kind(model: &SurrogateModel, expected: SurrogateKind) -> Result<()> {
    if model.kind == expected {
        Ok(())
    } else {
        Err(Error::SurrogateKindMismatch {
            expected: expected.to_string(),
            found: model.kind.to_string(),
        })
    }
}

/// Adaptive collaborative scan: every edge term is divided by the squared
/// predicted threshold at its own smoothed mean, and a candidate flags when
/// `√value − √boundary > adjustment`. One event per evaluated candidate.
pub fn agewma_scan(s: &SmootherState, k: f64, model: &SurrogateModel, adjustment: f64) -> Result<Vec<FlagEvent>> {
    require_kind(model, SurrogateKind::HgRecip)?;
    let mut div = Matrix::filled(s.n(), 1.0);
    DivisorCache::new().edge_divisors(s, model, &mut div)?;
    let mut events = Vec::new();
    Scanner::new().collaborative(s, k, Some(&div), |_, nodes, value, boundary| {
        events.push(FlagEvent {
            t: s.t,
            statistic: StatisticKind::Agewma,
            team: Team::new(nodes.iter().copied()),
            value,
            boundary,
            flagged: excess(value, boundary) > adjustment,
        });
    })?;
    Ok(events)
}

/// Adaptive dominant-leader scan: edge terms are divided by the predicted
/// threshold itself, with the same flag rule as [`agewma_scan`].
pub fn adewma_scan(s: &SmootherState, k: f64, model: &SurrogateModel, adjustment: f64) -> Result<Vec<FlagEvent>> {
    require_kind(model, SurrogateKind::HdLog)?;
    let mut div = Matrix::filled(s.n(), 1.0);
    DivisorCache::new().edge_divisors(s, model, &mut div)?;
    let mut events = Vec::new();
    Scanner::new().dominant(s, k, Some(&div), |leader, w, _, value, boundary| {
        events.push(FlagEvent {
            t: s.t,
            statistic: StatisticKind::Adewma,
            team: Team {
                members: w.iter().copied().collect(),
                leader: Some(leader),
            },
            value,
            boundary,
            flagged: excess(value, boundary) > adjustment,
        });
    })?;
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::FitDiagnostics;

    fn floor_state(n: usize, lambda: f64) -> SmootherState {
        let m = Matrix::filled(n, lambda);
        SmootherState {
            ytilde: m.clone(),
            ltilde: m.clone(),
            ystar: m,
            t: 5,
            alpha: 0.075,
            active: n,
            self_pairs: SelfPairs::Include,
        }
    }

    fn constant_model(kind: SurrogateKind, h: f64) -> SurrogateModel {
        let size = kind.basis_size();
        let mut coefficients = vec![0.0; size];
        coefficients[0] = match kind {
            SurrogateKind::HdLog => h.ln(),
            SurrogateKind::HgRecip => 1.0 / h,
        };
        SurrogateModel {
            kind,
            coefficients,
            diagnostics: FitDiagnostics::default(),
        }
    }

    #[test]
    fn floor_state_gives_singleton_candidates() {
        let s = floor_state(6, 0.4);
        assert_eq!(collab_candidate(&s, 2, 0.5).unwrap(), Team::new([2]));
        assert!(leader_neighborhood(&s, 2, 0.45).unwrap().is_empty());
        assert!(refine_leader_team(&s, &Team::new([0, 1]), 0.0).unwrap().is_empty());
    }

    #[test]
    fn collaborative_hand_case() {
        let mut s = floor_state(5, 1.0);
        s.ystar.set(3, 1, 4.0);
        let team = collab_candidate(&s, 1, 0.5).unwrap();
        assert_eq!(team, Team::new([1, 3]));
        assert_eq!(collab_candidate(&s, 1, 1.0).unwrap(), Team::new([1]));
        assert_eq!(collab_candidate(&s, 1, -0.1), Err(Error::BadK(-0.1)));
        let (t2, value) = local_gewma_star(&s, 1, 0.5).unwrap();
        assert_eq!(t2, team);
        assert_eq!(value, 7.0);
    }

    #[test]
    fn leader_hand_case() {
        let mut s = floor_state(8, 2.0);
        s.ystar.set(0, 6, 5.0);
        s.ystar.set(6, 0, 4.0);
        let w = leader_neighborhood(&s, 0, 0.9).unwrap();
        assert_eq!(w, Team::new([6]));
        assert!(!w.members.contains(&0));
        assert!(leader_neighborhood(&s, 0, 1.0).unwrap().is_empty());
    }

    #[test]
    fn refinement_hand_case() {
        // √y* − √λ̃ = 0.6 on the pair (a, b).
        let mut s = floor_state(5, 1.0);
        s.ystar.set(2, 4, 1.6f64 * 1.6);
        let w = Team::new([2, 4]);
        assert_eq!(refine_leader_team(&s, &w, 0.5).unwrap(), Team::new([2, 4]));
        assert!(refine_leader_team(&s, &w, 0.7).unwrap().is_empty());
        assert!(refine_leader_team(&s, &Team::new([2]), 0.0).unwrap().is_empty());
    }

    #[test]
    fn local_dewma_matches_hand_sum() {
        let mut s = floor_state(4, 1.0);
        s.ystar.set(1, 3, 2.0);
        s.ystar.set(3, 1, 3.0);
        let (w, omega, value) = local_dewma_star(&s, 3, 0.2).unwrap();
        assert_eq!(w, Team::new([1]));
        assert!(omega.is_empty());
        assert_eq!(value, 5.0);
        let (w, _, value) = local_dewma_star(&floor_state(4, 1.0), 3, 0.2).unwrap();
        assert!(w.is_empty());
        assert_eq!(value, 0.0);
    }

    #[test]
    fn scanner_matches_single_team_functions() {
        let mut s = floor_state(7, 0.5);
        for (i, j, v) in [(0, 1, 3.0), (1, 0, 2.0), (2, 5, 4.0), (5, 6, 1.9), (6, 2, 2.5), (4, 0, 1.3)] {
            s.ystar.set(i, j, v);
        }
        let k = 0.3;
        let mut scanner = Scanner::new();
        let mut seen = Vec::new();
        scanner
            .collaborative(&s, k, None, |c, nodes, value, boundary| seen.push((c, nodes.to_vec(), value, boundary)))
            .unwrap();
        for (c, nodes, value, boundary) in &seen {
            let (team, direct) = local_gewma_star(&s, *c, k).unwrap();
            assert_eq!(team.nodes(), *nodes);
            assert_eq!(*value, direct);
            assert_eq!(*boundary, statistics::team_mean(&s, &team).unwrap());
        }
        let skipped = (0..7).filter(|&c| collab_candidate(&s, c, k).unwrap().size() < 2).count();
        assert_eq!(seen.len() + skipped, 7);

        let mut leaders = Vec::new();
        scanner
            .dominant(&s, k, None, |l, w, o, value, _| leaders.push((l, w.to_vec(), o.to_vec(), value)))
            .unwrap();
        assert!(!leaders.is_empty());
        for (l, w, o, value) in leaders {
            let (w2, o2, v2) = local_dewma_star(&s, l, k).unwrap();
            assert_eq!(w2.nodes(), w);
            assert_eq!(o2.nodes(), o);
            assert!((value - v2).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_scans_are_quiet_on_the_floor() {
        let s = floor_state(6, 0.3);
        let hg = constant_model(SurrogateKind::HgRecip, 0.5);
        let hd = constant_model(SurrogateKind::HdLog, 0.5);
        assert!(agewma_scan(&s, 0.5, &hg, 1.0).unwrap().iter().all(|e| !e.flagged));
        assert!(adewma_scan(&s, 0.45, &hd, 1.0).unwrap().iter().all(|e| !e.flagged));
        assert!(matches!(
            agewma_scan(&s, 0.5, &hd, 1.0),
            Err(Error::SurrogateKindMismatch { .. })
        ));
    }

    #[test]
    fn agewma_ratio_algebra() {
        // A two-node candidate whose reflected sum is four times its
        // boundary: the scaled excess is 2√B − √B = √B with B the scaled
        // boundary, so it flags exactly when B > 1.
        for (lambda, h, expect) in [(1.0, 0.5, true), (0.2, 1.0, false)] {
            let mut s = floor_state(4, lambda);
            for i in 0..2 {
                for j in 0..2 {
                    s.ystar.set(i, j, 4.0 * lambda);
                }
            }
            let model = constant_model(SurrogateKind::HgRecip, h);
            let events = agewma_scan(&s, 0.0, &model, 1.0).unwrap();
            let ev = events.iter().find(|e| e.team == Team::new([0, 1])).unwrap();
            let b = 4.0 * lambda / (h * h);
            assert!((ev.boundary - b).abs() < 1e-9);
            assert!((excess(ev.value, ev.boundary) - b.sqrt()).abs() < 1e-9);
            assert_eq!(ev.flagged, expect);
        }
    }

    #[test]
    fn scan_cost_is_quadratic() {
        let mut s = floor_state(10, 0.2);
        for i in 0..10 {
            s.ystar.set(i, (i + 1) % 10, 3.0);
        }
        let mut sc = Scanner::new();
        sc.collaborative(&s, 0.1, None, |_, _, _, _| {}).unwrap();
        assert!(sc.pair_evaluations <= 2 * 100);
        let mut sc = Scanner::new();
        let mut sum_w2 = 0u64;
        sc.dominant(&s, 0.1, None, |_, w, _, _, _| sum_w2 += (w.len() * w.len()) as u64)
            .unwrap();
        assert!(sc.pair_evaluations <= 100 + sum_w2);
    }
}
