//! First-order Markov prior over near-optimal phase sequences.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::metrics::Objective;

/// Default smoothing floor.
pub const EPSILON_FLOOR: f64 = 1e-6;

/// A length-`M` assignment of alphabet indices, optionally scored.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSequence {
    pub phases: Vec<usize>,
    pub objective_value: Option<f64>,
}

impl PhaseSequence {
    pub fn new(phases: Vec<usize>) -> PhaseSequence {
        PhaseSequence {
            phases,
            objective_value: None,
        }
    }

    pub fn scored(phases: Vec<usize>, value: f64) -> PhaseSequence {
        PhaseSequence {
            phases,
            objective_value: Some(value),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn check(&self, k: usize, m: usize) -> Result<()> {
        if self.phases.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "sequence of length {} where {m} expected",
                self.phases.len()
            )));
        }
        match self.phases.iter().find(|&&p| p >= k) {
            Some(&index) => Err(Error::AlphabetViolation { index, k }),
            None => Ok(()),
        }
    }
}

/// Initial distribution and `K x K` transition matrix; row `j` is the parent state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPrior {
    pub initial: DVector<f64>,
    pub transition: DMatrix<f64>,
    pub epsilon_floor: f64,
}

fn normalized(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidConfig("probabilities must be finite and nonnegative".into()));
    }
    let s: f64 = v.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidConfig("probability vector sums to zero".into()));
    }
    Ok(v.iter().map(|x| x / s).collect())
}

fn smooth(v: &[f64], eps: f64) -> Vec<f64> {
    let k = v.len() as f64;
    let out: Vec<f64> = v.iter().map(|x| (1.0 - k * eps) * x + eps).collect();
    let s: f64 = out.iter().sum();
    out.iter().map(|x| x / s).collect()
}

impl ConditionalPrior {
    /// Normalize and smooth the given tables. Each entry becomes
    /// `(1 - K eps) q + eps`, which keeps rows stochastic and every entry at least `eps`.
    pub fn new(initial: &[f64], transition: &[Vec<f64>], epsilon_floor: f64) -> Result<ConditionalPrior> {
        let k = initial.len();
        if k == 0 || transition.len() != k || transition.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("prior tables must be K and K x K".into()));
        }
        if !(epsilon_floor >= 0.0) || epsilon_floor * k as f64 >= 1.0 {
            return Err(Error::InvalidConfig("epsilon_floor must satisfy 0 <= K eps < 1".into()));
        }
        let init = smooth(&normalized(initial)?, epsilon_floor);
        let mut t = DMatrix::zeros(k, k);
        for (j, row) in transition.iter().enumerate() {
            for (i, v) in smooth(&normalized(row)?, epsilon_floor).into_iter().enumerate() {
                t[(j, i)] = v;
            }
        }
        Ok(ConditionalPrior {
            initial: DVector::from_vec(init),
            transition: t,
            epsilon_floor,
        })
    }

    pub fn uniform(k: usize) -> ConditionalPrior {
        let row = vec![1.0 / k as f64; k];
        ConditionalPrior::new(&row, &vec![row.clone(); k], 0.0).expect("uniform prior")
    }

    pub fn k(&self) -> usize {
        self.initial.len()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.transition.row(j).iter().cloned().collect()
    }

    /// Marginals `mu_1 .. mu_M` propagated from the initial distribution.
    pub fn marginals(&self, m: usize) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(m);
        if m == 0 {
            return out;
        }
        out.push(self.initial.clone());
        let tt = self.transition.transpose();
        for t in 1..m {
            let next = &tt * &out[t - 1];
            out.push(next);
        }
        out
    }

    /// Draw a sequence of length `m`.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<usize> {
        let draw = |probs: &[f64], rng: &mut R| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        };
        let mut seq = Vec::with_capacity(m);
        if m == 0 {
            return seq;
        }
        let init: Vec<f64> = self.initial.iter().cloned().collect();
        seq.push(draw(&init, rng));
        for t in 1..m {
            let row = self.row(seq[t - 1]);
            seq.push(draw(&row, rng));
        }
        seq
    }

    /// Plain-text form: comment header, the initial vector on one line, then one
    /// transition row per line, whitespace separated.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# K={} epsilon_floor={}", self.k(), self.epsilon_floor);
        let line = |v: Vec<f64>| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", line(self.initial.iter().cloned().collect()));
        for j in 0..self.k() {
            let _ = writeln!(s, "{}", line(self.row(j)));
        }
        s
    }

    /// Parse the format written by [`ConditionalPrior::to_text`]. Values are taken
    /// as stored, without renormalization.
    pub fn from_text(text: &str) -> Result<ConditionalPrior> {
        let mut eps = EPSILON_FLOOR;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for raw in text.lines() {
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some(c) = l.strip_prefix('#') {
                for tok in c.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("epsilon_floor=") {
                        eps = v.parse().map_err(|_| Error::Parse(format!("bad floor {v}")))?;
                    }
                }
                continue;
            }
            let row = l
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t}"))))
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse("empty prior".into()));
        }
        let k = rows[0].len();
        if rows.len() != k + 1 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Parse("expected one K-vector and K rows of length K".into()));
        }
        let initial = DVector::from_vec(rows[0].clone());
        let transition = DMatrix::from_fn(k, k, |j, i| rows[j + 1][i]);
        for v in initial.iter().chain(transition.iter()) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Parse("probabilities must be finite and nonnegative".into()));
            }
        }
        Ok(ConditionalPrior {
            initial,
            transition,
            epsilon_floor: eps,
        })
    }
}

/// Raw tallies behind an estimated prior.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionCounts {
    /// `counts[(j, i)]` is the number of `j -> i` transitions.
    pub counts: DMatrix<f64>,
    pub first: DVector<f64>,
    pub pool_size: usize,
    pub seq_len: usize,
}

impl TransitionCounts {
    pub fn tally(pool: &[PhaseSequence], k: usize, m: usize) -> Result<TransitionCounts> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let mut counts = DMatrix::zeros(k, k);
        let mut first = DVector::zeros(k);
        for s in pool {
            s.check(k, m)?;
            if let Some(&f) = s.phases.first() {
                first[f] += 1.0;
            }
            for w in s.phases.windows(2) {
                counts[(w[0], w[1])] += 1.0;
            }
        }
        Ok(TransitionCounts {
            counts,
            first,
            pool_size: pool.len(),
            seq_len: m,
        })
    }

    /// Counts divided by `m M`, the literal pool-normalized table.
    pub fn pool_normalized(&self) -> DMatrix<f64> {
        &self.counts / (self.pool_size * self.seq_len) as f64
    }
}

/// Estimate `q` from a pool: row-normalized transition counts, first-position
/// frequencies for the initial law, unseen parents uniform, then smoothing.
pub fn estimate_prior(
    pool: &[PhaseSequence],
    k: usize,
    m: usize,
    epsilon_floor: f64,
) -> Result<ConditionalPrior> {
    let t = TransitionCounts::tally(pool, k, m)?;
    let uniform = vec![1.0 / k as f64; k];
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let r: Vec<f64> = t.counts.row(j).iter().cloned().collect();
            if r.iter().sum::<f64>() > 0.0 {
                r
            } else {
                uniform.clone()
            }
        })
        .collect();
    let first: Vec<f64> = t.first.iter().cloned().collect();
    ConditionalPrior::new(&first, &rows, epsilon_floor)
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d
}

/// Entropy of a length-`M` sequence in bits.
pub fn entropy_rate(prior: &ConditionalPrior, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let init: Vec<f64> = prior.initial.iter().cloned().collect();
    let row_h: Vec<f64> = (0..prior.k()).map(|j| entropy(&prior.row(j))).collect();
    let mu = prior.marginals(m);
    let mut h = entropy(&init);
    for t in 0..m - 1 {
        h += mu[t].iter().zip(&row_h).map(|(a, b)| a * b).sum::<f64>();
    }
    h
}

/// `log2 q(pi)`.
pub fn log_prob(pi: &[usize], prior: &ConditionalPrior) -> f64 {
    let Some(&first) = pi.first() else {
        return 0.0;
    };
    let mut lp = prior.initial[first].log2();
    for w in pi.windows(2) {
        lp += prior.transition[(w[0], w[1])].log2();
    }
    lp
}

/// Transition statistics of a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTransitions {
    pub counts: DMatrix<f64>,
    /// Counts divided by `M - 1`.
    pub joint: DMatrix<f64>,
    /// Counts divided by their row sums; empty rows stay zero.
    pub conditional: DMatrix<f64>,
    pub first: usize,
}

pub fn empirical_conditional(pi: &[usize], k: usize) -> EmpiricalTransitions {
    let mut counts = DMatrix::zeros(k, k);
    for w in pi.windows(2) {
        counts[(w[0], w[1])] += 1.0;
    }
    let n = pi.len().saturating_sub(1).max(1) as f64;
    let joint = &counts / n;
    let mut conditional = counts.clone();
    for j in 0..k {
        let s: f64 = counts.row(j).sum();
        if s > 0.0 {
            for i in 0..k {
                conditional[(j, i)] /= s;
            }
        }
    }
    EmpiricalTransitions {
        counts,
        joint,
        conditional,
        first: pi.first().cloned().unwrap_or(0),
    }
}

/// Outcome of a strong-typicality test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalityCheck {
    pub typical: bool,
    /// Largest `|empirical - reference| / reference` over the tested cells.
    pub max_deviation: f64,
    /// Bits of `|log2 q(pi) + H|` not covered by `delta H`: the first-symbol
    /// excess plus the mass of skipped cells.
    pub slack_bits: f64,
}

/// Strong typicality of `pi` under `prior` at tolerance `delta`.
///
/// Each transition frequency `n_ji / (M - 1)` is compared with the reference
/// joint `r_ji = mubar(j) q(i|j)`, where `mubar` averages the parent marginals
/// of stages `1..M-1`. A cell that never occurs in `pi` is skipped when
/// `q(i|j)` or `r_ji` is at or below the smoothing floor; a cell that occurs
/// while `q(i|j)` is at the floor makes `pi` atypical. With `d` the largest
/// cell deviation and `T` the entropy carried by the tested cells, the first
/// symbol must satisfy
/// `|-log2 q(phi_1) - H(Phi_1)| <= delta H(Phi_1) + (delta - d) T + K eps log2(e/eps)`.
///
/// When the result is typical, `|log2 q(pi) + H(Phi)| <= delta H(Phi) + slack_bits`.
pub fn is_strongly_typical(pi: &[usize], prior: &ConditionalPrior, delta: f64) -> TypicalityCheck {
    let k = prior.k();
    let m = pi.len();
    let eps = prior.epsilon_floor;
    if m == 0 {
        return TypicalityCheck {
            typical: true,
            max_deviation: 0.0,
            slack_bits: 0.0,
        };
    }
    let init_allowance = if eps > 0.0 {
        k as f64 * eps * (std::f64::consts::E / eps).log2()
    } else {
        0.0
    };
    let mut typical = true;
    let mut worst = 0.0f64;

    let mut slack = 0.0;
    let mut tested_bits = 0.0;
    if m >= 2 {
        let emp = empirical_conditional(pi, k);
        let mu = prior.marginals(m);
        let mut mubar = DVector::zeros(k);
        for v in &mu[..m - 1] {
            mubar += v;
        }
        mubar /= (m - 1) as f64;
        let stages = (m - 1) as f64;
        for j in 0..k {
            for i in 0..k {
                let q = prior.transition[(j, i)];
                let r = mubar[j] * q;
                let seen = emp.counts[(j, i)] > 0.0;
                if !seen && (q <= eps || r <= eps) {
                    if q > 0.0 {
                        slack += stages * r * (-q.log2());
                    }
                    continue;
                }
                if q <= eps {
                    typical = false;
                }
                if q > 0.0 {
                    tested_bits += stages * r * (-q.log2());
                }
                let observed = emp.joint[(j, i)];
                let ratio = if r > 0.0 {
                    (observed - r).abs() / r
                } else {
                    f64::INFINITY
                };
                worst = worst.max(ratio);
                if ratio > delta {
                    typical = false;
                }
            }
        }
    }

    let init: Vec<f64> = prior.initial.iter().cloned().collect();
    let h0 = entropy(&init);
    let dev0 = (-prior.initial[pi[0]].log2() - h0).abs();
    let margin = if worst <= delta { (delta - worst) * tested_bits } else { 0.0 };
    let excess0 = (dev0 - delta * h0 - margin).max(0.0);
    if excess0 > init_allowance {
        typical = false;
    }
    slack += excess0;

    TypicalityCheck {
        typical,
        max_deviation: worst,
        slack_bits: slack,
    }
}

/// `|-(1/M) log2 q(pi) - (1/M) H(Phi)|`.
pub fn weak_typicality_gap(pi: &[usize], prior: &ConditionalPrior, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let mf = m as f64;
    (-log_prob(pi, prior) / mf - entropy_rate(prior, m) / mf).abs()
}

/// Sequence-level `D(p || q)` in bits for two homogeneous chains.
pub fn kl_divergence(p_prior: &ConditionalPrior, q_prior: &ConditionalPrior, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let pi: Vec<f64> = p_prior.initial.iter().cloned().collect();
    let qi: Vec<f64> = q_prior.initial.iter().cloned().collect();
    let rows: Vec<f64> = (0..p_prior.k())
        .map(|j| relative_entropy(&p_prior.row(j), &q_prior.row(j)))
        .collect();
    let mu = p_prior.marginals(m);
    let mut d = relative_entropy(&pi, &qi);
    for t in 0..m - 1 {
        d += mu[t].iter().zip(&rows).map(|(a, b)| if *a > 0.0 { a * b } else { 0.0 }).sum::<f64>();
    }
    d
}

/// Information-to-go table: entry `[t][j]` is the expected divergence of the
/// remaining path after stage `t + 1` ends in state `j`, via
/// `I(t, j) = sum_i p(i|j) [log2 p(i|j)/q(i|j) + I(t + 1, i)]` and `I(M - 1, .) = 0`.
pub fn information_to_go(p_prior: &ConditionalPrior, q_prior: &ConditionalPrior, m: usize) -> Vec<Vec<f64>> {
    let k = p_prior.k();
    let mut table = vec![vec![0.0; k]; m];
    for t in (0..m.saturating_sub(1)).rev() {
        for j in 0..k {
            let mut acc = 0.0;
            for i in 0..k {
                let p = p_prior.transition[(j, i)];
                if p > 0.0 {
                    let q = q_prior.transition[(j, i)];
                    let step = if q > 0.0 { (p / q).log2() } else { f64::INFINITY };
                    acc += p * (step + table[t + 1][i]);
                }
            }
            table[t][j] = acc;
        }
    }
    table
}

/// The `m` best sequences by `objective`, ascending. Enumerates the space when
/// `K^M <= budget`, otherwise scores `budget` uniform draws.
pub fn sample_candidate_pool<O: Objective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    k: usize,
    m_len: usize,
    budget: usize,
    m: usize,
    rng: &mut R,
) -> Vec<PhaseSequence> {
    let space = (k as u128).checked_pow(m_len as u32);
    let mut scored: Vec<PhaseSequence> = match space {
        Some(n) if n <= budget as u128 => {
            let n = n as usize;
            let mut seq = vec![0usize; m_len];
            let mut out = Vec::with_capacity(n);
            for idx in 0..n {
                let mut r = idx;
                for pos in (0..m_len).rev() {
                    seq[pos] = r % k;
                    r /= k;
                }
                out.push(PhaseSequence::scored(seq.clone(), objective.eval(&seq)));
            }
            out
        }
        _ => (0..budget)
            .map(|_| {
                let s: Vec<usize> = (0..m_len).map(|_| rng.random_range(0..k)).collect();
                let v = objective.eval(&s);
                PhaseSequence::scored(s, v)
            })
            .collect(),
    };
    scored.sort_by(|a, b| {
        let x = a.objective_value.unwrap_or(f64::INFINITY);
        let y = b.objective_value.unwrap_or(f64::INFINITY);
        x.total_cmp(&y)
    });
    scored.truncate(m);
    scored
}
