//! Optimal reachability probabilities and expected total rewards.
//!
//! Exact scalars go through policy iteration with exact elimination; floats
//! through value iteration. Both run on a quotient in which the end
//! components of the non-terminal region are collapsed, so every remaining
//! policy is proper. Acyclic inputs use a single reverse-topological sweep.

mod linear;
mod quotient;

use std::collections::HashMap;

pub use linear::solve_transient;

use crate::graph::{prob_zero_min, reach_positive_max, topological_order};
use crate::model::{Mdp, MemorylessPolicy, StateSet};
use crate::rational::Rational;
use crate::{Direction, Error, Scalar};

use quotient::Quotient;

/// Sparse transition reward `(state, action, successor) -> value`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFunction<T> {
    entries: HashMap<(usize, usize, usize), T>,
}

impl<T: Scalar> Default for RewardFunction<T> {
    fn default() -> Self {
        RewardFunction { entries: HashMap::new() }
    }
}

impl<T: Scalar> RewardFunction<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, s: usize, a: usize, t: usize, v: T) {
        if v.is_zero() {
            self.entries.remove(&(s, a, t));
        } else {
            self.entries.insert((s, a, t), v);
        }
    }

    pub fn get(&self, s: usize, a: usize, t: usize) -> Option<&T> {
        self.entries.get(&(s, a, t))
    }

    /// Reward `weight(t)` on every transition entering a state `t` with a
    /// weight, except from states listed in `skip_from`.
    pub fn on_entering(m: &Mdp, weight: impl Fn(usize) -> Option<T>, skip_from: &StateSet) -> Self {
        let weights: Vec<Option<T>> = m.states().map(&weight).collect();
        let mut r = Self::new();
        for s in m.states() {
            if skip_from.contains(s) {
                continue;
            }
            for (a, c) in m.actions(s).iter().enumerate() {
                for (t, _) in &c.dist {
                    if let Some(w) = &weights[*t] {
                        r.set(s, a, *t, w.clone());
                    }
                }
            }
        }
        r
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize, usize), &T)> {
        self.entries.iter()
    }

    /// Expected one-step reward of `(s, a)`.
    pub fn expected(&self, m: &Mdp, s: usize, a: usize) -> T {
        let mut acc = T::zero();
        if self.entries.is_empty() {
            return acc;
        }
        for (t, p) in &m.action(s, a).dist {
            if let Some(r) = self.entries.get(&(s, a, *t)) {
                acc += T::from_rational(p) * r;
            }
        }
        acc
    }

    fn check_contract(&self, terminal: &StateSet) -> Result<(), Error> {
        let mut bad: Vec<_> = self.entries.keys().filter(|(_, _, t)| !terminal.contains(*t)).collect();
        bad.sort();
        match bad.first() {
            Some(&&(state, action, successor)) => Err(Error::RewardContract { state, action, successor }),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    PolicyIteration,
    ValueIteration,
    AcyclicSweep,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::PolicyIteration => "policy-iteration",
            SolveMethod::ValueIteration => "value-iteration",
            SolveMethod::AcyclicSweep => "acyclic-dp",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<T> {
    pub values: Vec<T>,
    pub witness: MemorylessPolicy,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Numeric knobs of the float path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Relative per-state step below which value iteration stops.
    pub float_tolerance: f64,
    pub max_iterations: usize,
    /// Try the acyclic sweep before anything else.
    pub use_acyclic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { float_tolerance: 1e-6, max_iterations: 1_000_000, use_acyclic: true }
    }
}

/// `Pr_s^dir(◇target)` for every state, with a memoryless optimal witness.
pub fn reach_prob<T: Scalar>(m: &Mdp, target: &StateSet, dir: Direction) -> Result<SolveResult<T>, Error> {
    reach_prob_with(m, target, dir, &SolverConfig::default())
}

pub fn reach_prob_with<T: Scalar>(
    m: &Mdp,
    target: &StateSet,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>, Error> {
    let zero = match dir {
        Direction::Max => reach_positive_max(m, target).complement(),
        Direction::Min => prob_zero_min(m, target),
    };
    let terminal = target.union(&zero);
    let rew = RewardFunction::on_entering(m, |t| target.contains(t).then(T::one), &terminal);
    let mut res = total_reward_with(m, &rew, &terminal, dir, cfg)?;
    for s in target.iter() {
        res.values[s] = T::one();
    }
    if dir == Direction::Min {
        // Zero states must keep avoiding the target.
        for s in zero.iter() {
            let a = m.actions(s).iter().position(|c| c.support_within(&zero)).unwrap_or(0);
            res.witness.set(s, a);
        }
    }
    Ok(res)
}

/// Optimal expected total reward until `terminal`.
pub fn total_reward<T: Scalar>(
    m: &Mdp,
    rew: &RewardFunction<T>,
    terminal: &StateSet,
    dir: Direction,
) -> Result<SolveResult<T>, Error> {
    total_reward_with(m, rew, terminal, dir, &SolverConfig::default())
}

pub fn total_reward_with<T: Scalar>(
    m: &Mdp,
    rew: &RewardFunction<T>,
    terminal: &StateSet,
    dir: Direction,
    cfg: &SolverConfig,
) -> Result<SolveResult<T>, Error> {
    rew.check_contract(terminal)?;
    if cfg.use_acyclic {
        if let Some(order) = topological_order(m) {
            return Ok(sweep(m, rew, terminal, dir, &order));
        }
    }
    let q = Quotient::build(m, rew, terminal);
    let (qvalues, qpolicy, iterations, method) = if T::EXACT {
        let (v, p, it) = q.policy_iteration(dir)?;
        (v, p, it, SolveMethod::PolicyIteration)
    } else {
        let (v, p, it) = q.value_iteration(dir, cfg);
        (v, p, it, SolveMethod::ValueIteration)
    };
    let values = m.states().map(|s| qvalues[q.of_state[s]].clone()).collect();
    let witness = q.lift_policy(m, &qpolicy);
    Ok(SolveResult { values, witness, iterations, method })
}

/// Single reverse-topological sweep; requires an acyclic model.
pub fn acyclic_dp<T: Scalar>(
    m: &Mdp,
    rew: &RewardFunction<T>,
    terminal: &StateSet,
    dir: Direction,
) -> Result<SolveResult<T>, Error> {
    rew.check_contract(terminal)?;
    let order = topological_order(m).ok_or(Error::Cyclic)?;
    Ok(sweep(m, rew, terminal, dir, &order))
}

fn sweep<T: Scalar>(
    m: &Mdp,
    rew: &RewardFunction<T>,
    terminal: &StateSet,
    dir: Direction,
    order: &[usize],
) -> SolveResult<T> {
    let n = m.num_states();
    let mut values = vec![T::zero(); n];
    let mut witness = MemorylessPolicy::first_action(n);
    for &s in order {
        if terminal.contains(s) {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for (a, c) in m.actions(s).iter().enumerate() {
            let mut acc = T::zero();
            let mut stay = T::zero();
            for (t, p) in &c.dist {
                let p = T::from_rational(p);
                if let Some(r) = rew.get(s, a, *t) {
                    acc += p.clone() * r;
                }
                if *t == s {
                    stay += p;
                } else {
                    acc += p * &values[*t];
                }
            }
            // Looping forever collects nothing.
            let q = if stay.is_one() { T::zero() } else { acc / (T::one() - stay) };
            if best.as_ref().is_none_or(|(_, b)| dir.better(&q, b)) {
                best = Some((a, q));
            }
        }
        let (a, v) = best.expect("state has actions");
        witness.set(s, a);
        values[s] = v;
    }
    SolveResult { values, witness, iterations: 1, method: SolveMethod::AcyclicSweep }
}

/// Values of a fixed memoryless policy (exact linear solve, or float solve).
pub fn evaluate_memoryless<T: Scalar>(
    m: &Mdp,
    sigma: &MemorylessPolicy,
    rew: &RewardFunction<T>,
    terminal: &StateSet,
) -> Result<Vec<T>, Error> {
    let n = m.num_states();
    // States that cannot reach a rewarded transition under sigma keep value 0.
    let chain = crate::model::induce_chain(m, sigma)?;
    let rewarded =
        StateSet::from_fn(n, |s| !terminal.contains(s) && !rew.expected(m, s, sigma.get(s).unwrap_or(0)).is_zero());
    let live = reach_positive_max(&chain, &rewarded).difference(terminal);
    let mut idx = vec![usize::MAX; n];
    let live_states: Vec<usize> = live.iter().collect();
    for (k, &s) in live_states.iter().enumerate() {
        idx[s] = k;
    }
    let mut rows = Vec::with_capacity(live_states.len());
    let mut rhs = Vec::with_capacity(live_states.len());
    for &s in &live_states {
        let a = sigma.get(s).ok_or(Error::PolicyUndefined(s))?;
        rhs.push(rew.expected(m, s, a));
        rows.push(
            m.action(s, a)
                .dist
                .iter()
                .filter(|(t, _)| idx[*t] != usize::MAX)
                .map(|(t, p)| (idx[*t], T::from_rational(p)))
                .collect(),
        );
    }
    let x = solve_transient(&rows, &rhs)?;
    let mut out = vec![T::zero(); n];
    for (k, &s) in live_states.iter().enumerate() {
        out[s] = x[k].clone();
    }
    Ok(out)
}

/// Exact optimal reachability probabilities, without the witness.
pub fn reach_prob_exact(m: &Mdp, target: &StateSet, dir: Direction) -> Result<Vec<Rational>, Error> {
    Ok(reach_prob::<Rational>(m, target, dir)?.values)
}
