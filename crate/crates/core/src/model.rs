//! Explicit-state MDPs with exact rational probabilities.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::Rational;
use crate::Error;

/// Dense membership set over `0..universe`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn empty(universe: usize) -> Self {
        StateSet { bits: vec![false; universe] }
    }

    pub fn full(universe: usize) -> Self {
        StateSet { bits: vec![true; universe] }
    }

    pub fn from_indices(universe: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in members {
            s.insert(i);
        }
        s
    }

    pub fn from_fn(universe: usize, f: impl Fn(usize) -> bool) -> Self {
        StateSet { bits: (0..universe).map(f).collect() }
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.bits.get(s).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, s: usize) -> bool {
        let fresh = !self.bits[s];
        self.bits[s] = true;
        fresh
    }

    pub fn remove(&mut self, s: usize) {
        self.bits[s] = false;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect() }
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        StateSet { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect() }
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        StateSet { bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && !*b).collect() }
    }

    pub fn complement(&self) -> StateSet {
        StateSet { bits: self.bits.iter().map(|b| !*b).collect() }
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// One action: a display name and a distribution sorted by successor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub name: String,
    pub dist: Vec<(usize, Rational)>,
}

impl Choice {
    pub fn new(name: impl Into<String>, dist: Vec<(usize, Rational)>) -> Self {
        Choice { name: name.into(), dist: normalize_dist(dist) }
    }

    pub fn successors(&self) -> impl Iterator<Item = usize> + '_ {
        self.dist.iter().map(|(t, _)| *t)
    }

    pub fn prob_to(&self, t: usize) -> Rational {
        self.dist.iter().find(|(s, _)| *s == t).map(|(_, p)| p.clone()).unwrap_or_else(Rational::zero)
    }

    pub fn support_within(&self, set: &StateSet) -> bool {
        self.dist.iter().all(|(t, _)| set.contains(*t))
    }
}

/// Merges duplicate successors and sorts by index.
fn normalize_dist(dist: Vec<(usize, Rational)>) -> Vec<(usize, Rational)> {
    let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
    for (t, p) in dist {
        *merged.entry(t).or_insert_with(Rational::zero) += p;
    }
    merged.into_iter().collect()
}

/// Finite MDP. Immutable once built; use [`MdpBuilder`] to construct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mdp {
    initial: usize,
    actions: Vec<Vec<Choice>>,
    labels: BTreeMap<String, StateSet>,
    colors: BTreeMap<usize, String>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn actions(&self, s: usize) -> &[Choice] {
        &self.actions[s]
    }

    pub fn action(&self, s: usize, a: usize) -> &Choice {
        &self.actions[s][a]
    }

    pub fn labels(&self) -> &BTreeMap<String, StateSet> {
        &self.labels
    }

    pub fn label(&self, name: &str) -> Option<&StateSet> {
        self.labels.get(name)
    }

    /// Label lookup that reports unknown names as errors.
    pub fn label_set(&self, name: &str) -> Result<StateSet, Error> {
        self.labels.get(name).cloned().ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    /// Color annotations from `@color` lines (sparse).
    pub fn colors(&self) -> &BTreeMap<usize, String> {
        &self.colors
    }

    /// Transition count |M|: sum of all distribution support sizes.
    pub fn size(&self) -> usize {
        self.actions.iter().flatten().map(|c| c.dist.len()).sum()
    }

    pub fn states(&self) -> std::ops::Range<usize> {
        0..self.num_states()
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.actions[s].iter().all(|c| c.dist.len() == 1 && c.dist[0].0 == s)
    }

    /// Successors over every action, with duplicates.
    pub fn all_successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.actions[s].iter().flat_map(|c| c.successors())
    }

    pub fn into_builder(self) -> MdpBuilder {
        MdpBuilder { initial: self.initial, actions: self.actions, labels: self.labels, colors: self.colors }
    }
}

/// Accumulates states, actions and labels; `build` validates.
#[derive(Clone, Debug, Default)]
pub struct MdpBuilder {
    initial: usize,
    actions: Vec<Vec<Choice>>,
    labels: BTreeMap<String, StateSet>,
    colors: BTreeMap<usize, String>,
}

impl MdpBuilder {
    pub fn new(num_states: usize) -> Self {
        MdpBuilder { initial: 0, actions: vec![Vec::new(); num_states], ..Default::default() }
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn add_state(&mut self) -> usize {
        self.actions.push(Vec::new());
        for set in self.labels.values_mut() {
            set.bits.push(false);
        }
        self.actions.len() - 1
    }

    pub fn initial(&mut self, s: usize) -> &mut Self {
        self.initial = s;
        self
    }

    pub fn action(&mut self, s: usize, name: impl Into<String>, dist: Vec<(usize, Rational)>) -> &mut Self {
        self.actions[s].push(Choice::new(name, dist));
        self
    }

    pub fn choice(&mut self, s: usize, c: Choice) -> &mut Self {
        self.actions[s].push(c);
        self
    }

    pub fn has_action(&self, s: usize, name: &str) -> bool {
        self.actions[s].iter().any(|c| c.name == name)
    }

    pub fn clear_actions(&mut self, s: usize) -> &mut Self {
        self.actions[s].clear();
        self
    }

    pub fn label(&mut self, name: impl Into<String>, members: impl IntoIterator<Item = usize>) -> &mut Self {
        let n = self.actions.len();
        let set = self.labels.entry(name.into()).or_insert_with(|| StateSet::empty(n));
        for m in members {
            if m >= set.bits.len() {
                set.bits.resize(m + 1, false);
            }
            set.bits[m] = true;
        }
        self
    }

    pub fn label_set(&mut self, name: impl Into<String>, set: StateSet) -> &mut Self {
        self.labels.insert(name.into(), set);
        self
    }

    pub fn color(&mut self, s: usize, color: impl Into<String>) -> &mut Self {
        self.colors.insert(s, color.into());
        self
    }

    /// Builds without checking; pair with [`validate`].
    pub fn build_unchecked(self) -> Mdp {
        Mdp { initial: self.initial, actions: self.actions, labels: self.labels, colors: self.colors }
    }

    pub fn build(self) -> Result<Mdp, ValidationError> {
        let m = self.build_unchecked();
        validate(&m)?;
        Ok(m)
    }
}

/// A single broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("state without actions: {state}")]
    NoActions { state: usize },
    #[error("dangling successor {successor} at state {state}, action '{action}'")]
    DanglingSuccessor { state: usize, action: String, successor: usize },
    #[error("probability {prob} outside (0,1] at state {state}, action '{action}'")]
    BadProbability { state: usize, action: String, prob: String },
    #[error("distribution of state {state}, action '{action}' sums to {sum}, not 1")]
    BadSum { state: usize, action: String, sum: String },
    #[error("initial state {initial} out of range for {states} states")]
    InitialOutOfRange { initial: usize, states: usize },
    #[error("label '{label}' refers to state {state} out of range")]
    DanglingLabel { label: String, state: usize },
    #[error("color of state {state} out of range")]
    DanglingColor { state: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationError(pub Vec<Violation>);

/// Checks every structural invariant; returns one diagnostic per violation.
pub fn validate(m: &Mdp) -> Result<(), ValidationError> {
    let n = m.num_states();
    let mut out = Vec::new();
    if m.initial >= n {
        out.push(Violation::InitialOutOfRange { initial: m.initial, states: n });
    }
    for (s, acts) in m.actions.iter().enumerate() {
        if acts.is_empty() {
            out.push(Violation::NoActions { state: s });
        }
        for c in acts {
            let mut sum = Rational::zero();
            for (t, p) in &c.dist {
                if *t >= n {
                    out.push(Violation::DanglingSuccessor { state: s, action: c.name.clone(), successor: *t });
                }
                if !p.is_positive() || *p > Rational::one() {
                    out.push(Violation::BadProbability { state: s, action: c.name.clone(), prob: p.to_string() });
                }
                sum += p;
            }
            if !sum.is_one() {
                out.push(Violation::BadSum { state: s, action: c.name.clone(), sum: sum.to_string() });
            }
        }
    }
    for (name, set) in &m.labels {
        for i in set.iter() {
            if i >= n {
                out.push(Violation::DanglingLabel { label: name.clone(), state: i });
            }
        }
    }
    for &s in m.colors.keys() {
        if s >= n {
            out.push(Violation::DanglingColor { state: s });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(ValidationError(out))
    }
}

/// Memoryless policy: state → action index, defined on some domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MemorylessPolicy {
    choice: Vec<Option<usize>>,
}

impl MemorylessPolicy {
    pub fn undefined(n: usize) -> Self {
        MemorylessPolicy { choice: vec![None; n] }
    }

    pub fn total(choices: Vec<usize>) -> Self {
        MemorylessPolicy { choice: choices.into_iter().map(Some).collect() }
    }

    /// First action everywhere.
    pub fn first_action(n: usize) -> Self {
        Self::total(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn get(&self, s: usize) -> Option<usize> {
        self.choice.get(s).copied().flatten()
    }

    pub fn set(&mut self, s: usize, a: usize) {
        self.choice[s] = Some(a);
    }

    pub fn unset(&mut self, s: usize) {
        self.choice[s] = None;
    }

    pub fn domain(&self) -> StateSet {
        StateSet::from_fn(self.choice.len(), |s| self.choice[s].is_some())
    }

    pub fn is_total(&self) -> bool {
        self.choice.iter().all(|c| c.is_some())
    }

    /// Every defined choice indexes a real action of `m`.
    pub fn is_valid_for(&self, m: &Mdp) -> bool {
        self.choice.len() == m.num_states()
            && self.choice.iter().enumerate().all(|(s, c)| c.is_none_or(|a| a < m.actions(s).len()))
    }

    pub fn choices(&self) -> &[Option<usize>] {
        &self.choice
    }

    /// `state:action` pairs using action names.
    pub fn render(&self, m: &Mdp) -> String {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.map(|a| format!("{s}:{}", m.action(s, a).name)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Markov chain induced by `sigma`: every state keeps only its chosen action.
pub fn induce_chain(m: &Mdp, sigma: &MemorylessPolicy) -> Result<Mdp, Error> {
    let mut actions = Vec::with_capacity(m.num_states());
    for s in m.states() {
        let a = sigma.get(s).ok_or(Error::PolicyUndefined(s))?;
        let c = m.actions(s).get(a).ok_or(Error::PolicyUndefined(s))?;
        actions.push(vec![c.clone()]);
    }
    Ok(Mdp { initial: m.initial, actions, labels: m.labels.clone(), colors: m.colors.clone() })
}

/// States reachable from the initial state (any action).
pub fn reachable(m: &Mdp) -> StateSet {
    reachable_from(m, m.initial(), |_, _| true)
}

/// Forward reachability through actions accepted by `allow(state, action)`.
pub fn reachable_from(m: &Mdp, from: usize, allow: impl Fn(usize, usize) -> bool) -> StateSet {
    let mut seen = StateSet::empty(m.num_states());
    let mut stack = vec![from];
    seen.insert(from);
    while let Some(s) = stack.pop() {
        for (a, c) in m.actions(s).iter().enumerate() {
            if !allow(s, a) {
                continue;
            }
            for t in c.successors() {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn two_state() -> MdpBuilder {
        let mut b = MdpBuilder::new(2);
        b.action(0, "a", vec![(1, rat(1, 2)), (0, rat(1, 2))]);
        b.action(1, "loop", vec![(1, int(1))]);
        b
    }

    #[test]
    fn builds_and_sorts() {
        let m = two_state().build().unwrap();
        assert_eq!(m.action(0, 0).dist[0].0, 0);
        assert_eq!(m.size(), 3);
        assert!(m.is_absorbing(1));
        assert!(!m.is_absorbing(0));
    }

    #[test]
    fn reports_each_violation() {
        let mut b = MdpBuilder::new(3);
        b.action(0, "a", vec![(5, rat(1, 2)), (1, rat(1, 3))]);
        b.action(1, "b", vec![(1, int(1))]);
        let err = b.build().unwrap_err();
        assert!(err.0.contains(&Violation::NoActions { state: 2 }));
        assert!(err.0.iter().any(|v| matches!(v, Violation::DanglingSuccessor { successor: 5, .. })));
        assert!(err.0.iter().any(|v| matches!(v, Violation::BadSum { .. })));
        assert_eq!(err.0.len(), 3);
        assert!(err.to_string().contains("state without actions"));
        assert!(err.to_string().contains("dangling successor"));
    }

    #[test]
    fn induces_chain() {
        let mut b = MdpBuilder::new(2);
        b.action(0, "a", vec![(1, int(1))]).action(0, "b", vec![(0, int(1))]);
        b.action(1, "loop", vec![(1, int(1))]);
        let m = b.build().unwrap();
        let c = induce_chain(&m, &MemorylessPolicy::total(vec![1, 0])).unwrap();
        assert_eq!(c.actions(0).len(), 1);
        assert_eq!(c.action(0, 0).name, "b");
        assert!(matches!(induce_chain(&m, &MemorylessPolicy::undefined(2)), Err(Error::PolicyUndefined(0))));
        let single = two_state().build().unwrap();
        assert_eq!(induce_chain(&single, &MemorylessPolicy::first_action(2)).unwrap(), single);
    }

    #[test]
    fn state_set_ops() {
        let a = StateSet::from_indices(5, [0, 2, 4]);
        let b = StateSet::from_indices(5, [2, 3]);
        assert_eq!(a.union(&b).iter().collect::<Vec<_>>(), vec![0, 2, 3, 4]);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), vec![2]);
        assert_eq!(a.difference(&b).count(), 2);
        assert_eq!(a.complement().iter().collect::<Vec<_>>(), vec![1, 3]);
        assert!(StateSet::from_indices(5, [2]).is_subset(&a));
        assert_eq!(format!("{a:?}"), "{0, 2, 4}");
    }
}
