//! Ground-truth semantics by exhaustive enumeration of valuation patterns.
//!
//! Query satisfaction and EGD consistency only depend on the equality
//! type a valuation induces over the active domain plus the query's
//! constants, so valuations are enumerated up to that type: each null maps
//! to a known constant or to a fresh one, with fresh constants used in
//! first-appearance order. A pool of one fresh constant per null is
//! exhaustive; the pool can be grown to check stability.

use std::collections::BTreeSet;
use std::fmt;

use crate::eval::{eval_fo, AnswerSet};
use crate::model::{satisfies_egds, Constant, Database, Egd, ModelError, Valuation, Value};
use crate::query::Formula;

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Enumeration cap: databases with more nulls are refused.
    pub max_nulls: usize,
    /// Extra fresh constants beyond the `|nulls|`-sized pool, for
    /// stability checks. Results must not depend on this.
    pub extra_fresh: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_nulls: 6,
            extra_fresh: 0,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("database has {count} nulls, above the enumeration cap {cap}")]
    NullCapExceeded { count: usize, cap: usize },
    #[error("payload tuple has arity {got}, query has arity {want}")]
    PayloadArity { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A canonical representative of a class of valuations with the same
/// equality type: nulls map to known constants or to pool constants
/// `f1, f2, ...` in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ValuationPattern {
    pub valuation: Valuation,
}

impl fmt::Display for ValuationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.valuation)
    }
}

/// Fresh constants distinct from everything in `base`.
fn fresh_pool(base: &BTreeSet<Constant>, k: usize) -> Vec<Constant> {
    let mut out = Vec::new();
    let mut i = 1usize;
    while out.len() < k {
        let c = Constant::Str(format!("f{i}"));
        if !base.contains(&c) {
            out.push(c);
        }
        i += 1;
    }
    out
}

/// Everything the oracle precomputes for one `(database, query, sigma)`
/// instance: the canonical patterns with their consistency flags, and the
/// candidate answer tuples.
pub struct PatternSpace {
    pub patterns: Vec<(ValuationPattern, bool)>,
    /// adom(D) plus the query's constants, the range of answer tuples.
    pub candidate_domain: Vec<Value>,
    pub answer_vars: Vec<String>,
}

impl PatternSpace {
    pub fn consistent(&self) -> impl Iterator<Item = &ValuationPattern> {
        self.patterns
            .iter()
            .filter(|(_, ok)| *ok)
            .map(|(p, _)| p)
    }

    pub fn candidates(&self, arity: usize) -> Vec<Vec<Value>> {
        let mut out = vec![Vec::new()];
        for _ in 0..arity {
            let mut next = Vec::new();
            for t in &out {
                for v in &self.candidate_domain {
                    let mut t2 = t.clone();
                    t2.push(v.clone());
                    next.push(t2);
                }
            }
            out = next;
        }
        out
    }
}

/// Enumerates every canonical valuation pattern of `d` (with the fresh
/// pool sized by the config) and flags each as consistent with `sigma`.
pub fn enumerate_patterns(
    d: &Database,
    q: &Formula,
    sigma: &[Egd],
    cfg: &OracleConfig,
) -> Result<PatternSpace, OracleError> {
    let nulls: Vec<String> = d.nulls().into_iter().collect();
    if nulls.len() > cfg.max_nulls {
        return Err(OracleError::NullCapExceeded {
            count: nulls.len(),
            cap: cfg.max_nulls,
        });
    }
    let mut base: BTreeSet<Constant> = d.constants();
    base.extend(q.constants());
    let pool = fresh_pool(&base, nulls.len() + cfg.extra_fresh);
    let base: Vec<Constant> = base.into_iter().collect();

    let mut patterns = Vec::new();
    let mut current: Vec<Constant> = Vec::new();
    enumerate_rec(
        &nulls,
        &base,
        &pool,
        cfg.extra_fresh,
        0,
        0,
        &mut current,
        &mut patterns,
    );

    let mut out = Vec::new();
    for valuation in patterns {
        let complete = valuation.apply(d)?;
        let ok = satisfies_egds(&complete, sigma)?;
        out.push((ValuationPattern { valuation }, ok));
    }

    let mut candidate_domain: BTreeSet<Value> = d.adom();
    candidate_domain.extend(q.constants().into_iter().map(Value::Const));
    Ok(PatternSpace {
        patterns: out,
        candidate_domain: candidate_domain.into_iter().collect(),
        answer_vars: q.answer_vars(),
    })
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    nulls: &[String],
    base: &[Constant],
    pool: &[Constant],
    slack: usize,
    i: usize,
    fresh_high: usize,
    current: &mut Vec<Constant>,
    out: &mut Vec<Valuation>,
) {
    if i == nulls.len() {
        out.push(Valuation::from_pairs(
            nulls.iter().cloned().zip(current.iter().cloned()),
        ));
        return;
    }
    // canonical form: a used fresh constant may repeat and a new one must
    // be the next unused pool element; a nonzero slack relaxes this by
    // making a few further pool elements reachable, which adds equivalent
    // representatives the results must not depend on
    let reachable = (fresh_high + 1 + slack).min(pool.len());
    for (j, c) in base
        .iter()
        .map(|c| (None, c))
        .chain(pool[..reachable].iter().enumerate().map(|(j, c)| (Some(j), c)))
    {
        current.push(c.clone());
        let next_high = match j {
            Some(j) => fresh_high.max(j + 1),
            None => fresh_high,
        };
        enumerate_rec(nulls, base, pool, slack, i + 1, next_high, current, out);
        current.pop();
    }
}

/// The consistent patterns witnessing `a` as an answer:
/// `v(a) in Q(v(D))`.
pub fn support_of(
    q: &Formula,
    d: &Database,
    sigma: &[Egd],
    a: &[Value],
    cfg: &OracleConfig,
) -> Result<Vec<ValuationPattern>, OracleError> {
    let space = enumerate_patterns(d, q, sigma, cfg)?;
    if a.len() != space.answer_vars.len() {
        return Err(OracleError::PayloadArity {
            got: a.len(),
            want: space.answer_vars.len(),
        });
    }
    let mut out = Vec::new();
    for p in space.consistent() {
        let image = p.valuation.apply(d)?;
        let answers = eval_fo(q, &image)?;
        if answers.tuples.contains(&p.valuation.apply_tuple(a)?) {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Per-candidate supports as index sets into the consistent patterns.
struct Supports {
    candidates: Vec<Vec<Value>>,
    supports: Vec<BTreeSet<usize>>,
    consistent_count: usize,
    answer_vars: Vec<String>,
}

fn compute_supports(
    q: &Formula,
    d: &Database,
    sigma: &[Egd],
    cfg: &OracleConfig,
) -> Result<Supports, OracleError> {
    let space = enumerate_patterns(d, q, sigma, cfg)?;
    let candidates = space.candidates(space.answer_vars.len());
    let mut supports = vec![BTreeSet::new(); candidates.len()];
    let mut consistent_count = 0usize;
    for p in space.consistent() {
        let idx = consistent_count;
        consistent_count += 1;
        let image = p.valuation.apply(d)?;
        let answers = eval_fo(q, &image)?;
        for (ci, cand) in candidates.iter().enumerate() {
            if answers.tuples.contains(&p.valuation.apply_tuple(cand)?) {
                supports[ci].insert(idx);
            }
        }
    }
    Ok(Supports {
        candidates,
        supports,
        consistent_count,
        answer_vars: space.answer_vars,
    })
}

/// Certain answers: candidates witnessed by every consistent pattern.
/// With no consistent pattern at all, every candidate is (vacuously)
/// certain.
pub fn certain_oracle(
    q: &Formula,
    d: &Database,
    sigma: &[Egd],
    cfg: &OracleConfig,
) -> Result<AnswerSet, OracleError> {
    let s = compute_supports(q, d, sigma, cfg)?;
    let tuples = s
        .candidates
        .iter()
        .zip(&s.supports)
        .filter(|(_, supp)| supp.len() == s.consistent_count)
        .map(|(c, _)| c.clone())
        .collect();
    Ok(AnswerSet {
        vars: s.answer_vars,
        tuples,
    })
}

/// Best answers: candidates whose support is not strictly contained in
/// another candidate's support.
pub fn best_oracle(
    q: &Formula,
    d: &Database,
    sigma: &[Egd],
    cfg: &OracleConfig,
) -> Result<AnswerSet, OracleError> {
    let s = compute_supports(q, d, sigma, cfg)?;
    let tuples = s
        .candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            !s.supports.iter().enumerate().any(|(j, other)| {
                j != *i && s.supports[*i].is_subset(other) && s.supports[*i] != *other
            })
        })
        .map(|(_, c)| c.clone())
        .collect();
    Ok(AnswerSet {
        vars: s.answer_vars,
        tuples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecideKind {
    Certain,
    Best,
}

#[derive(Debug, Clone)]
pub enum DecidePayload {
    /// Is this tuple in the answer set?
    Member(Vec<Value>),
    /// Is the answer set exactly this set?
    Equal(BTreeSet<Vec<Value>>),
    /// Does the answer set belong to this family of sets?
    Family(BTreeSet<BTreeSet<Vec<Value>>>),
}

/// The three decision variants, answered by comparison against the
/// corresponding oracle set.
pub fn decide(
    kind: DecideKind,
    payload: &DecidePayload,
    q: &Formula,
    d: &Database,
    sigma: &[Egd],
    cfg: &OracleConfig,
) -> Result<bool, OracleError> {
    let answer = match kind {
        DecideKind::Certain => certain_oracle(q, d, sigma, cfg)?,
        DecideKind::Best => best_oracle(q, d, sigma, cfg)?,
    };
    match payload {
        DecidePayload::Member(t) => {
            if t.len() != answer.vars.len() {
                return Err(OracleError::PayloadArity {
                    got: t.len(),
                    want: answer.vars.len(),
                });
            }
            Ok(answer.tuples.contains(t))
        }
        DecidePayload::Equal(x) => Ok(&answer.tuples == x),
        DecidePayload::Family(xs) => Ok(xs.contains(&answer.tuples)),
    }
}
