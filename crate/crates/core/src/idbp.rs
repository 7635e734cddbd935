//! Information-directed branch-and-prune search over phase sequences.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::metrics::Objective;
use crate::priors::{ConditionalPrior, PhaseSequence};

/// Search controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Children explored per node on the best-child path.
    pub k_best: usize,
    /// Let side branches branch again. Exponential in `M`; guarded by `max_leaf_evals`.
    pub recursive_second_pass: bool,
    pub max_leaf_evals: usize,
    pub record_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k_best: 2,
            recursive_second_pass: false,
            max_leaf_evals: 1_000_000,
            record_trace: false,
        }
    }
}

impl SearchConfig {
    pub fn single_pass() -> SearchConfig {
        SearchConfig {
            k_best: 1,
            ..SearchConfig::default()
        }
    }
}

/// Source of the transition law `p` that scores the edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransitionPolicy {
    /// `p = q`
    #[default]
    Prior,
    Uniform,
}

/// One visited node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// 1-based depth.
    pub stage: usize,
    pub state: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub nodes_expanded: usize,
    pub mi_evaluations: usize,
    pub leaf_evaluations: usize,
    pub best_sequence: PhaseSequence,
    pub best_objective: f64,
    /// Best objective after each leaf, in evaluation order.
    pub best_history: Vec<f64>,
    /// Every evaluated leaf with its objective, in evaluation order.
    pub leaves: Vec<(Vec<usize>, f64)>,
    pub trace: Vec<TraceEntry>,
}

impl SearchTrace {
    /// One line per visited node: `stage state score`.
    pub fn trace_log(&self) -> String {
        let mut s = String::new();
        for e in &self.trace {
            let _ = writeln!(s, "{} {} {:.12e}", e.stage, e.state, e.score);
        }
        s
    }
}

/// Pointwise mutual information increment `p(x,y) log2 [p(x,y) / (p(x) p(y))]`.
pub fn mi_edge_score(p_joint: f64, p_child: f64, p_parent: f64) -> f64 {
    if p_joint <= 0.0 {
        return 0.0;
    }
    p_joint * (p_joint / (p_child * p_parent)).log2()
}

/// Scores used to pick children.
#[derive(Debug, Clone)]
pub struct EdgeModel {
    k: usize,
    initial: DVector<f64>,
    transition: nalgebra::DMatrix<f64>,
    marginals: Vec<DVector<f64>>,
}

impl EdgeModel {
    pub fn new(prior: &ConditionalPrior, m: usize, policy: TransitionPolicy) -> EdgeModel {
        let p = match policy {
            TransitionPolicy::Prior => prior.clone(),
            TransitionPolicy::Uniform => ConditionalPrior::uniform(prior.k()),
        };
        EdgeModel {
            k: p.k(),
            marginals: p.marginals(m.max(1)),
            initial: p.initial,
            transition: p.transition,
        }
    }

    /// Root scores from a certain virtual root: joint `q(Phi_1 = i)` against a
    /// uniform child reference. The maximizer is always the mode of `q(Phi_1)`.
    pub fn root_scores(&self) -> Vec<f64> {
        let u = 1.0 / self.k as f64;
        (0..self.k)
            .map(|i| mi_edge_score(self.initial[i], u, 1.0))
            .collect()
    }

    /// Score of moving from `state` at 1-based `stage` to each child.
    pub fn child_scores(&self, stage: usize, state: usize) -> Vec<f64> {
        let mu_t = &self.marginals[stage - 1];
        let mu_next = &self.marginals[stage];
        (0..self.k)
            .map(|i| {
                let joint = self.transition[(state, i)] * mu_t[state];
                mi_edge_score(joint, mu_next[i], mu_t[state])
            })
            .collect()
    }
}

/// Indices ordered by descending score, lowest index first on ties.
pub fn rank_children(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Top two children of `state` with their accumulated costs.
pub fn find_best_children(
    model: &EdgeModel,
    stage: usize,
    state: usize,
    accumulated_cost: f64,
) -> (usize, Option<usize>, f64, Option<f64>) {
    let s = model.child_scores(stage, state);
    let order = rank_children(&s);
    let best = order[0];
    let second = order.get(1).copied();
    (
        best,
        second,
        accumulated_cost + s[best],
        second.map(|j| accumulated_cost + s[j]),
    )
}

struct Frame {
    seq: Vec<usize>,
    cost: f64,
    score: f64,
    branching: bool,
}

/// Depth-first IDBP from the root state, scoring leaves with `leaf_objective`.
pub fn idbp_search<O: Objective + ?Sized>(
    m: usize,
    scfg: &SearchConfig,
    prior: &ConditionalPrior,
    policy: TransitionPolicy,
    leaf_objective: &O,
) -> Result<SearchTrace> {
    let k = prior.k();
    if m == 0 {
        return Err(Error::InvalidConfig("sequence length must be at least 1".into()));
    }
    if scfg.k_best == 0 || scfg.k_best > k {
        return Err(Error::InvalidConfig(format!(
            "k_best must lie in 1..={k}, got {}",
            scfg.k_best
        )));
    }
    let model = EdgeModel::new(prior, m, policy);

    let root = model.root_scores();
    let x0 = rank_children(&root)[0];
    let mut mi_evaluations = k;
    let mut nodes_expanded = 0;
    let mut leaf_evaluations = 0;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut best_history = Vec::new();
    let mut leaves = Vec::new();
    let mut trace = Vec::new();

    let mut stack = vec![Frame {
        seq: vec![x0],
        cost: root[x0],
        score: root[x0],
        branching: true,
    }];
    while let Some(frame) = stack.pop() {
        nodes_expanded += 1;
        let stage = frame.seq.len();
        let state = *frame.seq.last().expect("nonempty path");
        if scfg.record_trace {
            trace.push(TraceEntry {
                stage,
                state,
                score: frame.score,
            });
        }
        if stage == m {
            if leaf_evaluations >= scfg.max_leaf_evals {
                return Err(Error::BudgetExceeded {
                    cap: scfg.max_leaf_evals,
                });
            }
            leaf_evaluations += 1;
            let v = leaf_objective.eval(&frame.seq);
            let better = match &best {
                None => true,
                Some((_, b)) => v <= *b,
            };
            if better {
                best = Some((frame.seq.clone(), v));
            }
            best_history.push(best.as_ref().map(|b| b.1).unwrap_or(v));
            leaves.push((frame.seq, v));
            continue;
        }
        let scores = model.child_scores(stage, state);
        mi_evaluations += k;
        let order = rank_children(&scores);
        let width = if frame.branching { scfg.k_best } else { 1 };
        for r in (0..width).rev() {
            let child = order[r];
            let mut seq = frame.seq.clone();
            seq.push(child);
            stack.push(Frame {
                seq,
                cost: frame.cost + scores[child],
                score: scores[child],
                branching: if r == 0 {
                    frame.branching
                } else {
                    scfg.recursive_second_pass
                },
            });
        }
    }
    let (seq, value) = best.expect("at least one leaf");
    Ok(SearchTrace {
        nodes_expanded,
        mi_evaluations,
        leaf_evaluations,
        best_sequence: PhaseSequence::scored(seq, value),
        best_objective: value,
        best_history,
        leaves,
        trace,
    })
}

/// Node visits of the non-recursive k-best search: `M + (k - 1) M (M - 1) / 2`.
pub fn expected_nodes(m: usize, k_best: usize) -> usize {
    m + (k_best - 1) * m * (m - 1) / 2
}

/// Leaves of the non-recursive k-best search: `1 + (k - 1)(M - 1)`.
pub fn expected_leaves(m: usize, k_best: usize) -> usize {
    1 + (k_best - 1) * (m - 1)
}
