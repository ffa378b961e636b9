//! Exact checks of the classifier-error bound and mutual-information
//! claims on small enumerable distributions of graph states.
//!
//! States are abstract ids `0..n`; a readout is a total map from states to
//! summary ids. All probabilities are exact rationals.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DgiError, Result};

pub type Prob = Ratio<i128>;

/// Largest state space [`optimal_classifier_error`] enumerates.
pub const MAX_STATES: usize = 20;
/// Largest state space [`best_summary_cardinality`] accepts.
pub const MAX_CARDINALITY_STATES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGraphDistribution {
    probs: Vec<Prob>,
    readout: Vec<usize>,
}

impl DiscreteGraphDistribution {
    pub fn new(probs: Vec<Prob>, readout: Vec<usize>) -> Result<Self> {
        if probs.is_empty() {
            return Err(DgiError::invalid("distribution needs at least one state"));
        }
        if probs.len() != readout.len() {
            return Err(DgiError::invalid(format!(
                "{} probabilities but readout covers {} states",
                probs.len(),
                readout.len()
            )));
        }
        if probs.iter().any(|p| *p <= Prob::zero()) {
            return Err(DgiError::invalid("state probabilities must be positive"));
        }
        let total: Prob = probs.iter().copied().sum();
        if !total.is_one() {
            return Err(DgiError::invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs, readout })
    }

    pub fn uniform(readout: Vec<usize>) -> Result<Self> {
        let n = readout.len();
        if n == 0 {
            return Err(DgiError::invalid("distribution needs at least one state"));
        }
        Self::new(vec![Prob::new(1, n as i128); n], readout)
    }

    pub fn state_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[Prob] {
        &self.probs
    }

    pub fn readout(&self) -> &[usize] {
        &self.readout
    }

    pub fn is_uniform(&self) -> bool {
        self.probs.iter().all(|p| *p == self.probs[0])
    }

    /// Summary marginal `p(s)`, keyed by summary id.
    pub fn summary_marginal(&self) -> BTreeMap<usize, Prob> {
        let mut m = BTreeMap::new();
        for (&p, &s) in self.probs.iter().zip(&self.readout) {
            *m.entry(s).or_insert_with(Prob::zero) += p;
        }
        m
    }

    pub fn summary_count(&self) -> usize {
        self.summary_marginal().len()
    }

    pub fn is_injective(&self) -> bool {
        self.summary_count() == self.state_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierError {
    /// Bayes error separating joint from product-of-marginals samples.
    pub err: Prob,
    /// `½ Σ_k p(s_k)²` over states `k`, with `s_k` the summary of state `k`.
    pub bound: Prob,
}

/// Bayes error of the best classifier telling `(X, s)` pairs drawn from the
/// joint apart from pairs drawn from `p(X)p(s)`, with both classes equally
/// likely, together with the bound it is checked against.
pub fn optimal_classifier_error(dist: &DiscreteGraphDistribution) -> Result<ClassifierError> {
    if !dist.is_uniform() {
        return Err(DgiError::invalid("state probabilities must be uniform"));
    }
    if dist.state_count() > MAX_STATES {
        return Err(DgiError::invalid(format!(
            "{} states exceeds the enumeration limit of {MAX_STATES}",
            dist.state_count()
        )));
    }
    let marginal = dist.summary_marginal();
    let half = Prob::new(1, 2);
    let mut err = Prob::zero();
    for (&px, &fx) in dist.probs.iter().zip(&dist.readout) {
        for (&s, &ps) in &marginal {
            let joint = if s == fx { px } else { Prob::zero() };
            let product = px * ps;
            err += half * joint.min(product);
        }
    }
    let bound = dist
        .readout
        .iter()
        .map(|s| {
            let p = marginal[s];
            half * p * p
        })
        .sum();
    let out = ClassifierError { err, bound };
    check_bound(dist, &out)?;
    Ok(out)
}

fn check_bound(dist: &DiscreteGraphDistribution, e: &ClassifierError) -> Result<()> {
    if e.err > e.bound {
        return Err(DgiError::Assertion(format!("error {} exceeds bound {}", e.err, e.bound)));
    }
    if (e.err == e.bound) != dist.is_injective() {
        return Err(DgiError::Assertion(format!(
            "error {} vs bound {}: equality must hold exactly for injective readouts",
            e.err, e.bound
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CardinalityWinner {
    /// Index into the candidate list.
    pub index: usize,
    pub err: Prob,
    pub summaries: usize,
}

/// Picks the readout with the smallest optimal classifier error over a
/// uniform distribution on `states` states (first index wins ties). When
/// any candidate is injective the winner must be injective.
pub fn best_summary_cardinality(states: usize, candidates: &[Vec<usize>]) -> Result<CardinalityWinner> {
    if candidates.is_empty() {
        return Err(DgiError::invalid("no candidate readout maps"));
    }
    if states == 0 || states > MAX_CARDINALITY_STATES {
        return Err(DgiError::invalid(format!(
            "state count must be in 1..={MAX_CARDINALITY_STATES}, got {states}"
        )));
    }
    let mut best: Option<CardinalityWinner> = None;
    let mut any_injective = false;
    for (index, map) in candidates.iter().enumerate() {
        if map.len() != states {
            return Err(DgiError::invalid(format!("candidate {index} covers {} states, not {states}", map.len())));
        }
        let dist = DiscreteGraphDistribution::uniform(map.clone())?;
        any_injective |= dist.is_injective();
        let err = optimal_classifier_error(&dist)?.err;
        if best.is_none_or(|b| err < b.err) {
            best = Some(CardinalityWinner {
                index,
                err,
                summaries: dist.summary_count(),
            });
        }
    }
    let best = best.expect("non-empty candidates");
    if any_injective && best.summaries != states {
        return Err(DgiError::Assertion(format!(
            "winner {} uses {} summaries for {states} states",
            best.index, best.summaries
        )));
    }
    Ok(best)
}

/// `MI(X; s)` in bits for a deterministic readout.
pub fn mutual_information_enum(dist: &DiscreteGraphDistribution) -> f64 {
    let marginal = dist.summary_marginal();
    let mut mi = 0.0;
    for (&px, &fx) in dist.probs.iter().zip(&dist.readout) {
        for (&s, &ps) in &marginal {
            let joint = if s == fx { px } else { Prob::zero() };
            if joint.is_zero() {
                continue;
            }
            let ratio = joint / (px * ps);
            mi += to_f64(joint) * to_f64(ratio).log2();
        }
    }
    mi
}

/// `H(X)` in bits.
pub fn entropy_bits(dist: &DiscreteGraphDistribution) -> f64 {
    dist.probs.iter().map(|&p| -to_f64(p) * to_f64(p).log2()).sum()
}

/// For a uniform distribution `H(X) - MI(X; s) = log₂(D) / n` with
/// `D = Π_s c_s^{c_s}` and `c_s` the number of states reading out to `s`.
/// Returns `D`, so `MI = H(X)` exactly when `D = 1`.
pub fn information_deficit(dist: &DiscreteGraphDistribution) -> Result<u128> {
    if !dist.is_uniform() {
        return Err(DgiError::invalid("state probabilities must be uniform"));
    }
    let n = dist.state_count() as i128;
    let mut d: u128 = 1;
    for p in dist.summary_marginal().values() {
        let c = (*p * n).to_integer() as u128;
        let factor = c
            .checked_pow(c as u32)
            .ok_or_else(|| DgiError::invalid("state space too large for an exact deficit"))?;
        d = d
            .checked_mul(factor)
            .ok_or_else(|| DgiError::invalid("state space too large for an exact deficit"))?;
    }
    Ok(d)
}

fn to_f64(p: Prob) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// Deliberate defects for exercising the failure path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Report half the true bound.
    HalveBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: String,
    pub states: usize,
    pub summaries: usize,
    pub err: Prob,
    pub bound: Prob,
    pub mi_bits: f64,
    pub h_bits: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub cases: Vec<CaseReport>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseReport> {
        self.cases.iter().filter(|c| !c.passed)
    }

    pub fn case(&self, name: &str) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>3} {:>3} {:>10} {:>10} {:>8} {:>8}  result",
            "case", "|X|", "|s|", "error", "bound", "MI", "H"
        )?;
        for c in &self.cases {
            writeln!(
                f,
                "{:<28} {:>3} {:>3} {:>10} {:>10} {:>8.4} {:>8.4}  {}{}",
                c.name,
                c.states,
                c.summaries,
                c.err.to_string(),
                c.bound.to_string(),
                c.mi_bits,
                c.h_bits,
                if c.passed { "pass" } else { "FAIL" },
                if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) }
            )?;
        }
        Ok(())
    }
}

/// What a suite case must satisfy beyond the generic checks.
enum Expect {
    Nothing,
    Err(Prob),
    ErrBelowBound(Prob, Prob),
    MiBits(f64),
}

fn run_case(name: &str, readout: Vec<usize>, expect: Expect, fault: Fault) -> CaseReport {
    let dist = DiscreteGraphDistribution::uniform(readout).expect("suite readouts are non-empty");
    let mut problems = Vec::new();
    let (err, bound) = match optimal_classifier_error(&dist) {
        Ok(e) => {
            let bound = match fault {
                Fault::None => e.bound,
                Fault::HalveBound => e.bound / 2,
            };
            let reported = ClassifierError { err: e.err, bound };
            if let Err(msg) = check_bound(&dist, &reported) {
                problems.push(msg.to_string());
            }
            (e.err, bound)
        }
        Err(e) => {
            problems.push(e.to_string());
            (Prob::zero(), Prob::zero())
        }
    };
    let mi = mutual_information_enum(&dist);
    let h = entropy_bits(&dist);
    match information_deficit(&dist) {
        Ok(d) if (d == 1) != dist.is_injective() => {
            problems.push(format!("information deficit {d} disagrees with injectivity"))
        }
        Ok(_) => {}
        Err(e) => problems.push(e.to_string()),
    }
    match expect {
        Expect::Nothing => {}
        Expect::Err(want) if err != want => problems.push(format!("expected error {want}")),
        Expect::ErrBelowBound(e, b) if !(err == e && bound == b && err < bound) => {
            problems.push(format!("expected error {e} strictly below bound {b}"))
        }
        Expect::MiBits(want) if mi != want => problems.push(format!("expected MI {want} bits")),
        _ => {}
    }
    CaseReport {
        name: name.to_string(),
        states: dist.state_count(),
        summaries: dist.summary_count(),
        err,
        bound,
        mi_bits: mi,
        h_bits: h,
        passed: problems.is_empty(),
        detail: problems.join("; "),
    }
}

fn cardinality_case(name: &str, states: usize, candidates: &[Vec<usize>], want: Option<Prob>) -> CaseReport {
    let (passed, detail, err, summaries) = match best_summary_cardinality(states, candidates) {
        Ok(w) => {
            let ok = want.is_none_or(|e| e == w.err);
            let detail = if ok { format!("winner #{}", w.index) } else { format!("winner error {} unexpected", w.err) };
            (ok, detail, w.err, w.summaries)
        }
        Err(e) => (false, e.to_string(), Prob::zero(), 0),
    };
    CaseReport {
        name: name.to_string(),
        states,
        summaries,
        err,
        bound: err,
        mi_bits: f64::NAN,
        h_bits: (states as f64).log2(),
        passed,
        detail,
    }
}

/// Every map from `states` states onto `0..states` (not only surjections).
fn all_maps(states: usize) -> Vec<Vec<usize>> {
    let total = states.pow(states as u32);
    (0..total)
        .map(|mut code| {
            (0..states)
                .map(|_| {
                    let v = code % states;
                    code /= states;
                    v
                })
                .collect()
        })
        .collect()
}

/// Runs the built-in distribution suite.
pub fn run_suite(fault: Fault) -> SuiteReport {
    let mut cases = vec![
        run_case("injective-4", vec![0, 1, 2, 3], Expect::Err(Prob::new(1, 8)), fault),
        run_case("constant-4", vec![0; 4], Expect::Err(Prob::new(1, 2)), fault),
        run_case("constant-7", vec![5; 7], Expect::Err(Prob::new(1, 2)), fault),
        run_case("single-state", vec![0], Expect::Err(Prob::new(1, 2)), fault),
        run_case(
            "three-onto-two",
            vec![0, 0, 1],
            Expect::ErrBelowBound(Prob::new(5, 18), Prob::new(1, 2)),
            fault,
        ),
        run_case("four-onto-two-even", vec![0, 0, 1, 1], Expect::MiBits(1.0), fault),
        run_case("injective-4-mi", vec![3, 1, 0, 2], Expect::MiBits(2.0), fault),
        run_case("constant-mi", vec![1; 5], Expect::MiBits(0.0), fault),
        run_case("injective-20", (0..20).rev().collect(), Expect::Err(Prob::new(1, 40)), fault),
        // node neighbourhoods standing in for graph states, encoder outputs for summaries
        run_case("neighbourhood-injective", vec![4, 2, 7, 0, 1, 9], Expect::Nothing, fault),
        run_case("neighbourhood-collapsing", vec![4, 2, 4, 0, 2, 4], Expect::Nothing, fault),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..40 {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=n);
        let map = (0..n).map(|_| rng.gen_range(0..k)).collect();
        cases.push(run_case(&format!("random-{i:02}"), map, Expect::Nothing, fault));
    }

    cases.push(cardinality_case("cardinality-all-maps-3", 3, &all_maps(3), Some(Prob::new(1, 6))));
    cases.push(cardinality_case("cardinality-constant-only", 4, &[vec![0; 4], vec![2; 4]], Some(Prob::new(1, 2))));
    let mut pool: Vec<Vec<usize>> = (0..49).map(|_| (0..6).map(|_| rng.gen_range(0..6)).collect()).collect();
    let mut injective: Vec<usize> = (0..6).collect();
    for i in (1..6).rev() {
        injective.swap(i, rng.gen_range(0..=i));
    }
    let at = rng.gen_range(0..=pool.len());
    pool.insert(at, injective);
    cases.push(cardinality_case("cardinality-random-pool-6", 6, &pool, Some(Prob::new(1, 12))));
    SuiteReport { cases }
}

/// Plain-text rendering of [`run_suite`]'s report.
pub fn suite_table(report: &SuiteReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "{report}");
    let failed = report.failures().count();
    let _ = writeln!(out, "{} cases, {failed} failed", report.cases.len());
    out
}
