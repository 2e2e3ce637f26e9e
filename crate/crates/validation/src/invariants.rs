//! Invariants of the smoother, the team statistics and the team search,
//! written as reusable checks over random network streams.
//!
//! Each check returns a `TestCaseError` on violation so it can run under
//! `proptest!` or under an explicit [`TestRunner`] via [`run_all`].

use std::collections::BTreeSet;

use outbreak::search::{collab_candidate, leader_neighborhood, local_dewma_star, local_gewma_star, Scanner};
use outbreak::smoothing::{init_state, SmootherState};
use outbreak::statistics::{gewma_step, l_gewma_step, tewma_step, StatState};
use outbreak::{CountMatrix, Matrix, NetworkSnapshot, StatisticKind, Team};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

type Check = std::result::Result<(), TestCaseError>;

/// A random network stream: size, α, per-pair means and counts per step.
#[derive(Debug, Clone)]
pub struct Stream {
    pub n: usize,
    pub alpha: f64,
    pub lambda: Vec<f64>,
    pub counts: Vec<Vec<u32>>,
}

pub fn stream(max_n: usize, max_t: usize) -> impl Strategy<Value = Stream> {
    (2..=max_n, 0.01f64..0.99, 1..=max_t).prop_flat_map(|(n, alpha, t)| {
        (
            Just(n),
            Just(alpha),
            prop::collection::vec(0.05f64..4.0, n * n),
            prop::collection::vec(prop::collection::vec(0u32..9, n * n), t),
        )
            .prop_map(|(n, alpha, lambda, mut counts)| {
                // Nodes do not message themselves.
                for step in &mut counts {
                    for i in 0..n {
                        step[i * n + i] = 0;
                    }
                }
                Stream { n, alpha, lambda, counts }
            })
    })
}

fn means(s: &Stream) -> Matrix {
    Matrix::from_fn(s.n, |i, j| s.lambda[i * s.n + j])
}

fn snapshot(s: &Stream, t: usize, counts: &[u32]) -> NetworkSnapshot {
    let mut c = CountMatrix::zeros(s.n);
    c.as_mut_slice().copy_from_slice(counts);
    NetworkSnapshot::new(t as u32 + 1, c).expect("diagonal is zero")
}

/// Every smoother state along the stream.
pub fn smooth(s: &Stream) -> Vec<SmootherState> {
    let lambda = means(s);
    let mut state = init_state(&lambda, s.alpha).expect("means are positive");
    let mut out = Vec::new();
    for (t, counts) in s.counts.iter().enumerate() {
        state.advance(&snapshot(s, t, counts), &lambda).expect("stream is consistent");
        out.push(state.clone());
    }
    out
}

/// Upper and lower team statistics along the stream.
fn team_paths(s: &Stream, team: &Team) -> Vec<(StatState, StatState)> {
    let mut up = StatState::new(StatisticKind::Gewma);
    let mut low = StatState::new(StatisticKind::LGewma);
    smooth(s)
        .iter()
        .map(|st| {
            up = gewma_step(&up, st, team).expect("team is active");
            low = l_gewma_step(&low, st, team).expect("team is active");
            (up, low)
        })
        .collect()
}

/// The nodes selected by the low `n` bits of `mask`, or node 0 alone.
pub fn team_from(n: usize, mask: u32) -> Team {
    let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
    if members.is_empty() {
        Team::new([0])
    } else {
        Team::new(members)
    }
}

/// Smoother written out element by element on plain nested vectors.
struct Reference {
    yt: Vec<Vec<f64>>,
    lt: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
}

fn reference(s: &Stream) -> Reference {
    let n = s.n;
    let lam: Vec<Vec<f64>> = (0..n).map(|i| s.lambda[i * n..(i + 1) * n].to_vec()).collect();
    let mut r = Reference {
        yt: lam.clone(),
        lt: lam.clone(),
        ys: lam.clone(),
    };
    let a = s.alpha;
    for counts in &s.counts {
        for i in 0..n {
            for j in 0..n {
                let y = f64::from(counts[i * n + j]);
                r.yt[i][j] = a * y + (1.0 - a) * r.yt[i][j];
                r.lt[i][j] = a * lam[i][j] + (1.0 - a) * r.lt[i][j];
                let raw = a * r.yt[i][j] + (1.0 - a) * r.ys[i][j];
                r.ys[i][j] = if raw > r.lt[i][j] { raw } else { r.lt[i][j] };
            }
        }
    }
    r
}

fn significant(r: &Reference, i: usize, j: usize, k: f64) -> bool {
    r.ys[i][j].sqrt() - r.lt[i][j].sqrt() > k
}

/// y* ≥ λ̃ everywhere and GEWMA ≥ μ ≥ L-GEWMA at every step.
pub fn reflection_floors(s: &Stream, mask: u32) -> Check {
    let team = team_from(s.n, mask);
    for st in smooth(s) {
        for (y, l) in st.ystar.as_slice().iter().zip(st.ltilde.as_slice()) {
            prop_assert!(y >= l);
        }
    }
    for (up, low) in team_paths(s, &team) {
        prop_assert!(up.value >= up.mu);
        prop_assert!(up.mu >= low.value);
        prop_assert_eq!(up.mu, low.mu);
    }
    Ok(())
}

/// Counts equal to their means keep every smoothed quantity at that level.
pub fn constant_fixed_point(n: usize, level: u32, alpha: f64, steps: usize) -> Check {
    let step: Vec<u32> = (0..n * n).map(|idx| if idx / n == idx % n { 0 } else { level }).collect();
    let s = Stream {
        n,
        alpha,
        lambda: vec![f64::from(level); n * n],
        counts: vec![step; steps],
    };
    let c = f64::from(level);
    for (st, (up, low)) in smooth(&s).iter().zip(team_paths(&s, &Team::new(0..n))) {
        for m in [&st.ytilde, &st.ltilde, &st.ystar] {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    prop_assert!((m.get(i, j) - c).abs() <= 1e-12 * c);
                }
            }
        }
        prop_assert!((up.value - up.mu).abs() <= 1e-12 * up.mu);
        prop_assert!((low.value - low.mu).abs() <= 1e-12 * low.mu);
    }
    Ok(())
}

/// ỹ_t = (1−α)^t λ_1 + Σ_s α(1−α)^{t−s} y_s, and likewise for λ̃, to 1e-12.
pub fn closed_form(s: &Stream) -> Check {
    let states = smooth(s);
    let a = s.alpha;
    let t = s.counts.len();
    let last = &states[t - 1];
    for idx in 0..s.n * s.n {
        let mut y = (1.0 - a).powi(t as i32) * s.lambda[idx];
        let mut l = y;
        for (step, counts) in s.counts.iter().enumerate() {
            let w = a * (1.0 - a).powi((t - 1 - step) as i32);
            y += w * f64::from(counts[idx]);
            l += w * s.lambda[idx];
        }
        let (i, j) = (idx / s.n, idx % s.n);
        prop_assert!((last.ytilde.get(i, j) - y).abs() <= 1e-12 * y.abs().max(1.0));
        prop_assert!((last.ltilde.get(i, j) - l).abs() <= 1e-12 * l.abs().max(1.0));
    }
    Ok(())
}

/// The whole-network statistic is the team statistic of all nodes.
pub fn tewma_is_gewma_on_all_nodes(s: &Stream) -> Check {
    let all = Team::new(0..s.n);
    let mut g = StatState::new(StatisticKind::Gewma);
    let mut tw = StatState::new(StatisticKind::Tewma);
    for st in smooth(s) {
        g = gewma_step(&g, &st, &all).expect("team is active");
        tw = tewma_step(&tw, &st).expect("network is active");
        prop_assert!((g.value - tw.value).abs() <= 1e-12 * g.value.max(1.0));
        prop_assert!((g.mu - tw.mu).abs() <= 1e-12 * g.mu.max(1.0));
    }
    Ok(())
}

/// Raising k can only remove nodes from a candidate team.
pub fn nesting_in_k(s: &Stream, k1: f64, dk: f64) -> Check {
    let st = smooth(s).pop().expect("nonempty stream");
    let k2 = k1 + dk;
    for c in 0..s.n {
        let wide = collab_candidate(&st, c, k1).expect("valid k");
        let narrow = collab_candidate(&st, c, k2).expect("valid k");
        prop_assert!(narrow.members.is_subset(&wide.members));
        let wide = leader_neighborhood(&st, c, k1).expect("valid k");
        let narrow = leader_neighborhood(&st, c, k2).expect("valid k");
        prop_assert!(narrow.members.is_subset(&wide.members));
    }
    Ok(())
}

/// Raising one count never lowers y* or either team statistic later on.
pub fn monotone_in_counts(s: &Stream, mask: u32, at: usize, cell: usize, bump: u32) -> Check {
    let team = team_from(s.n, mask);
    let mut raised = s.clone();
    let t = at % s.counts.len();
    let off = cell % (s.n * (s.n - 1));
    let (i, j) = (off / (s.n - 1), off % (s.n - 1));
    raised.counts[t][i * s.n + if j >= i { j + 1 } else { j }] += bump;
    for (b, u) in smooth(s).iter().zip(&smooth(&raised)) {
        for (x, y) in b.ystar.as_slice().iter().zip(u.ystar.as_slice()) {
            prop_assert!(y >= x);
        }
    }
    for ((bu, bl), (uu, ul)) in team_paths(s, &team).into_iter().zip(team_paths(&raised, &team)) {
        prop_assert!(uu.value >= bu.value);
        prop_assert!(ul.value >= bl.value);
    }
    Ok(())
}

/// Candidate teams and their statistics against the set definitions,
/// evaluated on an independently written smoother.
pub fn search_matches_definitions(s: &Stream, k: f64) -> Check {
    let st = smooth(s).pop().expect("nonempty stream");
    let r = reference(s);
    let n = s.n;
    let pair_sum = |set: &BTreeSet<usize>| -> f64 {
        set.iter()
            .flat_map(|&i| set.iter().map(move |&j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| r.ys[i][j])
            .sum()
    };
    for c in 0..n {
        let expect: BTreeSet<usize> = (0..n)
            .filter(|&i| i == c || significant(&r, i, c, k) || significant(&r, c, i, k))
            .collect();
        let (team, value) = local_gewma_star(&st, c, k).expect("valid centre");
        prop_assert_eq!(&team.members, &expect);
        let sum = pair_sum(&expect);
        prop_assert!((value - sum).abs() <= 1e-9 * sum.max(1.0));

        let w: BTreeSet<usize> = (0..n)
            .filter(|&i| i != c)
            .filter(|&i| (r.ys[i][c] + r.ys[c][i]).sqrt() - (r.lt[i][c] + r.lt[c][i]).sqrt() > k)
            .collect();
        let mut omega = BTreeSet::new();
        for &i in &w {
            for &j in &w {
                if i != j && significant(&r, i, j, k) {
                    omega.insert(i);
                    omega.insert(j);
                }
            }
        }
        let (got_w, got_omega, got_value) = local_dewma_star(&st, c, k).expect("valid leader");
        prop_assert_eq!(&got_w.members, &w);
        prop_assert_eq!(&got_omega.members, &omega);
        let spokes: f64 = w.iter().map(|&i| r.ys[i][c] + r.ys[c][i]).sum();
        let total = spokes + pair_sum(&omega);
        prop_assert!((got_value - total).abs() <= 1e-9 * total.max(1.0));
    }
    Ok(())
}

/// The all-centre scanner reports the same teams and values as the
/// single-centre search.
pub fn scanner_matches_search(s: &Stream, k: f64) -> Check {
    let st = smooth(s).pop().expect("nonempty stream");
    let mut scanner = Scanner::new();
    let mut seen = Vec::new();
    scanner
        .collaborative(&st, k, None, |c, nodes, value, _| seen.push((c, nodes.to_vec(), value)))
        .expect("valid k");
    for (c, nodes, value) in seen {
        let (team, direct) = local_gewma_star(&st, c, k).expect("valid centre");
        prop_assert_eq!(team.nodes(), nodes);
        prop_assert!((direct - value).abs() <= 1e-12 * direct.max(1.0));
    }
    Ok(())
}

/// Sample variance of √X for `draws` Poisson(λ) variates.
pub fn sqrt_poisson_variance(lambda: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist: Poisson<f64> = Poisson::new(lambda).expect("positive rate");
    let xs: Vec<f64> = (0..draws).map(|_| f64::sqrt(dist.sample(&mut rng))).collect();
    let mean = xs.iter().sum::<f64>() / draws as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64
}

/// Runs every invariant for `cases` random cases with a fixed seed and
/// reports each by name.
pub fn run_all(cases: u32) -> Vec<(&'static str, std::result::Result<(), String>)> {
    fn run<S: Strategy>(cases: u32, strategy: S, check: impl Fn(S::Value) -> Check) -> std::result::Result<(), String> {
        let config = Config {
            cases,
            failure_persistence: None,
            rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
            ..Config::default()
        };
        let mut runner = TestRunner::new_with_rng(
            config,
            proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[7; 32]),
        );
        runner.run(&strategy, check).map_err(|e| e.to_string())
    }
    let mut out = vec![
        ("reflection floors", run(cases, (stream(6, 40), 1u32..64), |(s, m)| reflection_floors(&s, m))),
        (
            "constant-input fixed point",
            run(cases, (2usize..6, 1u32..6, 0.01f64..0.99, 1usize..30), |(n, l, a, t)| {
                constant_fixed_point(n, l, a, t)
            }),
        ),
        ("closed form vs recursion", run(cases, stream(4, 60), |s| closed_form(&s))),
        ("TEWMA equals GEWMA on all nodes", run(cases, stream(6, 40), |s| tewma_is_gewma_on_all_nodes(&s))),
        (
            "team nesting in k",
            run(cases, (stream(6, 30), 0.0f64..1.0, 0.0f64..1.0), |(s, k, dk)| nesting_in_k(&s, k, dk)),
        ),
        (
            "monotone in counts",
            run(cases, (stream(5, 30), 1u32..32, any::<usize>(), any::<usize>(), 1u32..6), |(s, m, at, c, b)| {
                monotone_in_counts(&s, m, at, c, b)
            }),
        ),
        (
            "set-definition oracle",
            run(cases, (stream(6, 25), 0.0f64..0.8), |(s, k)| search_matches_definitions(&s, k)),
        ),
        (
            "scanner matches search",
            run(cases, (stream(6, 25), 0.0f64..0.8), |(s, k)| scanner_matches_search(&s, k)),
        ),
    ];
    let variances: Vec<f64> = [5.0, 10.0, 20.0]
        .iter()
        .map(|&l| sqrt_poisson_variance(l, 200_000, 20))
        .collect();
    let ok = variances.iter().all(|v| (0.20..=0.30).contains(v));
    out.push((
        "sqrt-Poisson variance in [0.20, 0.30]",
        if ok { Ok(()) } else { Err(format!("variances {variances:?}")) },
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig {
            cases: 128,
            failure_persistence: None,
            ..ProptestConfig::default()
        })]

        #[test]
        fn floors_hold(s in stream(6, 40), mask in 1u32..64) {
            reflection_floors(&s, mask)?;
        }

        #[test]
        fn constant_input_is_a_fixed_point(n in 2usize..6, level in 1u32..6, alpha in 0.01f64..0.99, steps in 1usize..30) {
            constant_fixed_point(n, level, alpha, steps)?;
        }

        #[test]
        fn recursion_matches_closed_form(s in stream(4, 60)) {
            closed_form(&s)?;
        }

        #[test]
        fn tewma_equals_gewma_on_the_whole_network(s in stream(6, 40)) {
            tewma_is_gewma_on_all_nodes(&s)?;
        }

        #[test]
        fn candidate_teams_shrink_as_k_grows(s in stream(6, 30), k in 0.0f64..1.0, dk in 0.0f64..1.0) {
            nesting_in_k(&s, k, dk)?;
        }

        #[test]
        fn statistics_are_monotone_in_counts(
            s in stream(5, 30),
            mask in 1u32..32,
            at in any::<usize>(),
            cell in any::<usize>(),
            bump in 1u32..6,
        ) {
            monotone_in_counts(&s, mask, at, cell, bump)?;
        }

        #[test]
        fn team_search_matches_set_definitions(s in stream(6, 25), k in 0.0f64..0.8) {
            search_matches_definitions(&s, k)?;
        }

        #[test]
        fn scanner_agrees_with_single_team_search(s in stream(6, 25), k in 0.0f64..0.8) {
            scanner_matches_search(&s, k)?;
        }
    }

    #[test]
    fn square_root_stabilises_poisson_variance() {
        for lambda in [5.0, 10.0, 20.0] {
            let var = sqrt_poisson_variance(lambda, 200_000, 20);
            assert!((0.20..=0.30).contains(&var), "lambda {lambda}: var of sqrt = {var}");
        }
    }

    #[test]
    fn block_sums_agree_on_all_nodes() {
        use outbreak::statistics::{active_sum, block_sum};
        let m = Matrix::from_fn(5, |i, j| (i * 5 + j) as f64 * 0.1 + 0.05);
        let all: Vec<usize> = (0..5).collect();
        for sp in [outbreak::SelfPairs::Include, outbreak::SelfPairs::Exclude] {
            assert_eq!(block_sum(&m, &all, sp), active_sum(&m, 5, sp));
        }
    }

    #[test]
    fn every_invariant_passes_the_fixed_seed_run() {
        for (name, result) in run_all(32) {
            assert!(result.is_ok(), "{name}: {result:?}");
        }
    }
}
