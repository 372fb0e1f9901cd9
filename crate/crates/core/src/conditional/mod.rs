//! Conditional reachability `Pr(◇G | ◇E)` through the reward reduction.
//!
//! For a candidate `λ` the sign of
//! `V(λ) = opt_σ Pr^σ(◇G ∧ ◇E) − λ·Pr^σ(◇E)` decides `Pr(◇G | ◇E) ∼ λ`.
//! `V(λ)` is an optimal total reward on a transformed model: goal and
//! evidence states become absorbing and collect `R^λ` when entered, and the
//! part of the model that can avoid the terminal states forever (the initial
//! component) is replaced by a single choice among its exits.

mod policy;
mod restart;

use std::fmt;

use num_traits::{One, Zero};

pub use policy::{
    agrees_on_reachable, evaluate_policy, extract_policy, joint_and_evidence, reachable_choices, ConditionalPolicy,
};
pub use restart::{build_restart, solve_restart, solve_restart_with, RestartModel, RestartSolution};

use crate::graph::{prob_zero_min, reach_positive_max};
use crate::model::{reachable_from, Mdp, MdpBuilder, MemorylessPolicy, StateSet};
use crate::rational::Rational;
use crate::solver::{reach_prob_with, total_reward_with, RewardFunction, SolveMethod, SolverConfig};
use crate::{Direction, Error, Mode, Scalar, Sign};

/// Comparison `Pr(◇G | ◇E) ∼ λ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparison {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparison {
    /// Whether `x ∼ 0` holds for `x` of the given sign.
    pub fn holds(self, sign: Sign) -> bool {
        match self {
            Comparison::Lt => sign == Sign::Negative,
            Comparison::Le => sign != Sign::Positive,
            Comparison::Eq => sign == Sign::Zero,
            Comparison::Ge => sign != Sign::Negative,
            Comparison::Gt => sign == Sign::Positive,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Comparison::Lt => "lt",
            Comparison::Le => "le",
            Comparison::Eq => "eq",
            Comparison::Ge => "ge",
            Comparison::Gt => "gt",
        }
    }
}

impl std::str::FromStr for Comparison {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "lt" | "<" => Comparison::Lt,
            "le" | "<=" => Comparison::Le,
            "eq" | "=" => Comparison::Eq,
            "ge" | ">=" => Comparison::Ge,
            "gt" | ">" => Comparison::Gt,
            _ => return Err(Error::InvalidArgument(format!("unknown comparison '{s}'"))),
        })
    }
}

/// A conditional reachability query.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub goal: StateSet,
    pub evidence: StateSet,
    pub direction: Direction,
    pub mode: Mode,
    pub epsilon: Rational,
    pub comparison: Comparison,
    pub threshold: Rational,
    pub solver: SolverConfig,
    /// Float results within this distance of zero count as zero.
    pub sign_tolerance: f64,
}

impl Query {
    pub fn new(goal: StateSet, evidence: StateSet, direction: Direction) -> Self {
        Query {
            goal,
            evidence,
            direction,
            mode: Mode::Exact,
            epsilon: Rational::zero(),
            comparison: Comparison::Le,
            threshold: Rational::new(1.into(), 2.into()),
            solver: SolverConfig::default(),
            sign_tolerance: 1e-9,
        }
    }

    /// Query over the labels `goal` and `evidence` of `m`.
    pub fn from_labels(m: &Mdp, goal: &str, evidence: &str, direction: Direction) -> Result<Self, Error> {
        Ok(Query::new(m.label_set(goal)?, m.label_set(evidence)?, direction))
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_threshold(mut self, cmp: Comparison, threshold: Rational) -> Self {
        self.comparison = cmp;
        self.threshold = threshold;
        self
    }

    pub fn with_epsilon(mut self, eps: Rational) -> Self {
        self.epsilon = eps;
        self
    }

    fn check(&self, m: &Mdp) -> Result<(), Error> {
        let n = m.num_states();
        if self.goal.universe() != n || self.evidence.universe() != n {
            return Err(Error::InvalidArgument("goal/evidence sets do not match the model size".into()));
        }
        Ok(())
    }
}

/// True iff some policy reaches `evidence` with positive probability.
pub fn check_defined(m: &Mdp, evidence: &StateSet) -> bool {
    reach_positive_max(m, evidence).contains(m.initial())
}

/// Model after initial-component elimination (or `M◦` itself when the
/// initial component is empty).
#[derive(Clone, Debug)]
pub struct Eliminated {
    pub mdp: Mdp,
    /// Original state behind each state, `None` for the fresh initial state and the sink.
    pub to_original: Vec<Option<usize>>,
    pub from_original: Vec<Option<usize>>,
    /// Sink receiving the mass that would re-enter the initial component.
    pub bottom: Option<usize>,
    /// Exit behind each action of the fresh initial state.
    pub exit_catalog: Vec<(usize, usize)>,
    /// Absorbing states of the reduction: terminal set, other goal states and the sink.
    pub terminal: StateSet,
}

impl Eliminated {
    pub fn initial(&self) -> usize {
        self.mdp.initial()
    }

    pub fn is_eliminated(&self) -> bool {
        self.bottom.is_some()
    }
}

/// Everything the λ-probes share.
#[derive(Clone, Debug)]
pub struct TransformArtifacts<T> {
    pub original: Mdp,
    pub goal: StateSet,
    pub evidence: StateSet,
    pub direction: Direction,
    /// `M◦`: goal and evidence states absorbing.
    pub m_circ: Mdp,
    /// `T = E ∪ { s ∈ G | Pr^dir_s(◇E) > 0 }`.
    pub terminal: StateSet,
    /// `Pr^dir_s(◇E)` on the original model.
    pub reach_evidence: Vec<T>,
    /// `Pr^dir_s(◇G)` on the original model.
    pub reach_goal: Vec<T>,
    /// Witness of `reach_evidence`, used once the goal was seen.
    pub after_goal: MemorylessPolicy,
    /// Witness of `reach_goal`, used once the evidence was seen.
    pub after_evidence: MemorylessPolicy,
    pub initial_component: StateSet,
    pub exits: Vec<(usize, usize)>,
    pub tilde: Eliminated,
    /// Minimisation where no policy reaches `T`: the answer is 1.
    pub forced_one: bool,
    pub solver: SolverConfig,
    pub sign_tolerance: f64,
}

/// Outcome of one probe.
#[derive(Clone, Debug)]
pub struct ThresholdOutcome<T> {
    pub lambda: Rational,
    pub sign: Sign,
    pub value: T,
    pub witness: ConditionalPolicy,
    pub tilde_witness: MemorylessPolicy,
    pub iterations: usize,
    pub method: SolveMethod,
}

impl<T: fmt::Display> fmt::Display for ThresholdOutcome<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V({}) = {} ({})", self.lambda, self.value, self.sign.name())
    }
}

/// Builds `M◦`, `T`, the initial component and the eliminated model.
pub fn build_transform<T: Scalar>(m: &Mdp, q: &Query) -> Result<TransformArtifacts<T>, Error> {
    q.check(m)?;
    if !check_defined(m, &q.evidence) {
        return Err(Error::Undefined);
    }
    let n = m.num_states();
    let dir = q.direction;
    let absorbing = q.goal.union(&q.evidence);

    let ev = reach_prob_with::<T>(m, &q.evidence, dir, &q.solver)?;
    let gl = reach_prob_with::<T>(m, &q.goal, dir, &q.solver)?;

    let mut b = m.clone().into_builder();
    for s in absorbing.iter() {
        b.clear_actions(s).action(s, "absorb", vec![(s, Rational::one())]);
    }
    let m_circ = b.build_unchecked();

    // Qualitative membership, so float noise cannot change T.
    let evidence_possible = match dir {
        Direction::Max => reach_positive_max(m, &q.evidence),
        Direction::Min => prob_zero_min(m, &q.evidence).complement(),
    };
    let terminal = q.evidence.union(&q.goal.intersection(&evidence_possible));

    let forced_one = dir == Direction::Min && !reach_positive_max(&m_circ, &terminal).contains(m.initial());

    let z = prob_zero_min(&m_circ, &terminal);
    let initial_component = if z.contains(m.initial()) {
        reachable_from(&m_circ, m.initial(), |s, a| m_circ.action(s, a).support_within(&z))
    } else {
        StateSet::empty(n)
    };
    let mut exits = Vec::new();
    for s in initial_component.iter() {
        for (a, c) in m_circ.actions(s).iter().enumerate() {
            if !c.support_within(&initial_component) {
                exits.push((s, a));
            }
        }
    }
    let tilde = eliminate(&m_circ, &initial_component, &exits, &absorbing, &terminal);

    Ok(TransformArtifacts {
        original: m.clone(),
        goal: q.goal.clone(),
        evidence: q.evidence.clone(),
        direction: dir,
        m_circ,
        terminal,
        reach_evidence: ev.values,
        reach_goal: gl.values,
        after_goal: ev.witness,
        after_evidence: gl.witness,
        initial_component,
        exits,
        tilde,
        forced_one,
        solver: q.solver,
        sign_tolerance: q.sign_tolerance,
    })
}

fn eliminate(
    m_circ: &Mdp,
    component: &StateSet,
    exits: &[(usize, usize)],
    absorbing: &StateSet,
    terminal: &StateSet,
) -> Eliminated {
    let n = m_circ.num_states();
    if component.is_empty() {
        return Eliminated {
            mdp: m_circ.clone(),
            to_original: (0..n).map(Some).collect(),
            from_original: (0..n).map(Some).collect(),
            bottom: None,
            exit_catalog: Vec::new(),
            terminal: absorbing.clone(),
        };
    }
    // Fresh initial state first, then the kept states in order, then the sink.
    let mut to_original = vec![None];
    let mut from_original = vec![None; n];
    for s in 0..n {
        if !component.contains(s) {
            from_original[s] = Some(to_original.len());
            to_original.push(Some(s));
        }
    }
    let bottom = to_original.len();
    to_original.push(None);
    let size = to_original.len();
    let redirect = |dist: &[(usize, Rational)]| -> Vec<(usize, Rational)> {
        dist.iter().map(|(t, p)| (from_original[*t].unwrap_or(bottom), p.clone())).collect()
    };
    let mut b = MdpBuilder::new(size);
    b.initial(0);
    for &(s, a) in exits {
        let c = m_circ.action(s, a);
        b.action(0, format!("{s}:{}", c.name), redirect(&c.dist));
    }
    for (k, orig) in to_original.iter().enumerate() {
        if let Some(s) = orig {
            for c in m_circ.actions(*s) {
                b.action(k, c.name.clone(), redirect(&c.dist));
            }
        }
    }
    b.action(bottom, "bottom", vec![(bottom, Rational::one())]);
    for (name, set) in m_circ.labels() {
        b.label_set(name.clone(), StateSet::from_fn(size, |k| to_original[k].is_some_and(|s| set.contains(s))));
    }
    let mut tilde_terminal = StateSet::from_fn(size, |k| to_original[k].is_some_and(|s| absorbing.contains(s)));
    tilde_terminal.insert(bottom);
    debug_assert!(terminal.is_subset(&StateSet::from_fn(n, |s| absorbing.contains(s))));
    Eliminated {
        mdp: b.build_unchecked(),
        to_original,
        from_original,
        bottom: Some(bottom),
        exit_catalog: exits.to_vec(),
        terminal: tilde_terminal,
    }
}

impl<T: Scalar> TransformArtifacts<T> {
    /// `(g, e)` collected when entering original state `s`, if nonzero.
    pub fn weights(&self, s: usize) -> Option<(T, T)> {
        if self.evidence.contains(s) {
            Some((self.reach_goal[s].clone(), T::one()))
        } else if self.terminal.contains(s) {
            let p = self.reach_evidence[s].clone();
            Some((p.clone(), p))
        } else {
            None
        }
    }

    fn weight_reward(&self, f: impl Fn(&T, &T) -> T) -> RewardFunction<T> {
        let t = &self.tilde;
        RewardFunction::on_entering(
            &t.mdp,
            |k| t.to_original[k].and_then(|s| self.weights(s)).map(|(g, e)| f(&g, &e)),
            &t.terminal,
        )
    }

    /// `R^λ` on the eliminated model.
    pub fn reward_lambda(&self, lambda: &Rational) -> RewardFunction<T> {
        let l = T::from_rational(lambda);
        self.weight_reward(|g, e| g.clone() - l.clone() * e)
    }

    /// Reward counting only the evidence weight `e`.
    pub fn evidence_reward(&self) -> RewardFunction<T> {
        self.weight_reward(|_, e| e.clone())
    }

    pub fn initial_in_terminal(&self) -> bool {
        self.terminal.contains(self.original.initial())
    }

    /// Decides the sign of `V(λ)` and extracts a witness.
    pub fn threshold(&self, lambda: &Rational) -> Result<ThresholdOutcome<T>, Error> {
        if self.forced_one {
            let v = T::one() - T::from_rational(lambda);
            return Ok(ThresholdOutcome {
                lambda: lambda.clone(),
                sign: v.sign(self.sign_tolerance),
                value: v,
                witness: self.forced_one_policy()?,
                tilde_witness: MemorylessPolicy::first_action(self.tilde.mdp.num_states()),
                iterations: 0,
                method: SolveMethod::AcyclicSweep,
            });
        }
        if self.initial_in_terminal() {
            let (g, e) = self.weights(self.original.initial()).expect("terminal state has weights");
            let v = g - T::from_rational(lambda) * &e;
            let tw = MemorylessPolicy::first_action(self.tilde.mdp.num_states());
            return Ok(ThresholdOutcome {
                lambda: lambda.clone(),
                sign: v.sign(self.sign_tolerance),
                value: v,
                witness: extract_policy(self, &tw)?,
                tilde_witness: tw,
                iterations: 0,
                method: SolveMethod::AcyclicSweep,
            });
        }
        let rew = self.reward_lambda(lambda);
        let res = total_reward_with(&self.tilde.mdp, &rew, &self.tilde.terminal, self.direction, &self.solver)?;
        let v = res.values[self.tilde.initial()].clone();
        Ok(ThresholdOutcome {
            lambda: lambda.clone(),
            sign: v.sign(self.sign_tolerance),
            value: v,
            witness: extract_policy(self, &res.witness)?,
            tilde_witness: res.witness,
            iterations: res.iterations,
            method: res.method,
        })
    }

    /// Smallest and largest evidence probability over policies of the
    /// eliminated model (used by the advanced bisection bounds).
    pub fn evidence_extremes(&self) -> Result<(T, T), Error> {
        if self.forced_one || self.initial_in_terminal() {
            let e = self.weights(self.original.initial()).map(|(_, e)| e).unwrap_or_else(T::one);
            return Ok((e.clone(), e));
        }
        let rew = self.evidence_reward();
        let t = &self.tilde;
        let lo = total_reward_with(&t.mdp, &rew, &t.terminal, Direction::Min, &self.solver)?;
        let hi = total_reward_with(&t.mdp, &rew, &t.terminal, Direction::Max, &self.solver)?;
        Ok((lo.values[t.initial()].clone(), hi.values[t.initial()].clone()))
    }

    /// Witness of the minimisation edge case: reach the evidence through the goal.
    fn forced_one_policy(&self) -> Result<ConditionalPolicy, Error> {
        let towards_e = reach_prob_with::<T>(&self.original, &self.evidence, Direction::Max, &self.solver)?;
        Ok(ConditionalPolicy {
            before_any: towards_e.witness.clone(),
            after_goal: towards_e.witness,
            after_evidence: self.after_evidence.clone(),
            chosen_exit: None,
        })
    }
}

/// `R^λ` for the artifacts (free-function form).
pub fn reward_lambda<T: Scalar>(t: &TransformArtifacts<T>, lambda: &Rational) -> RewardFunction<T> {
    t.reward_lambda(lambda)
}

/// Sign of `V(λ)` for a one-off query.
pub fn threshold_value<T: Scalar>(m: &Mdp, q: &Query, lambda: &Rational) -> Result<ThresholdOutcome<T>, Error> {
    build_transform::<T>(m, q)?.threshold(lambda)
}

/// `Some(1)` when a minimising query is forced to probability one.
pub fn min_edge_case<T: Scalar>(t: &TransformArtifacts<T>) -> Option<Rational> {
    t.forced_one.then(Rational::one)
}
