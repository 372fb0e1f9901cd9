//! End-component quotient used by the iterative solvers.
//!
//! Every MEC of the non-terminal region becomes one state carrying the
//! block's exiting actions plus a `stay` action into a zero-valued sink, so
//! remaining away forever stays available at value zero. In the quotient no
//! end component survives outside the terminal states, which makes policy
//! iteration well defined for both directions.

use crate::graph::{mecs_within, MecPartition};
use crate::model::{Mdp, MemorylessPolicy, StateSet};
use crate::solver::{linear::solve_transient, RewardFunction, SolverConfig};
use crate::{Direction, Error, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Origin {
    Action(usize, usize),
    Stay,
}

#[derive(Clone, Debug)]
pub(crate) struct QAction<T> {
    pub origin: Origin,
    pub succ: Vec<(usize, T)>,
    pub reward: T,
}

pub(crate) struct Quotient<T> {
    pub terminal: Vec<bool>,
    pub actions: Vec<Vec<QAction<T>>>,
    pub of_state: Vec<usize>,
    pub mecs: MecPartition,
}

impl<T: Scalar> Quotient<T> {
    pub fn build(m: &Mdp, rew: &RewardFunction<T>, terminal: &StateSet) -> Self {
        let n = m.num_states();
        let mecs = mecs_within(m, &terminal.complement());
        let mut of_state = vec![usize::MAX; n];
        let mut block_q = vec![usize::MAX; mecs.blocks.len()];
        let mut nq = 0;
        for s in 0..n {
            match mecs.block_of[s] {
                Some(b) => {
                    if block_q[b] == usize::MAX {
                        block_q[b] = nq;
                        nq += 1;
                    }
                    of_state[s] = block_q[b];
                }
                None => {
                    of_state[s] = nq;
                    nq += 1;
                }
            }
        }
        let sink = if mecs.blocks.is_empty() {
            None
        } else {
            nq += 1;
            Some(nq - 1)
        };
        let mut terminal_q = vec![false; nq];
        for s in terminal.iter() {
            terminal_q[of_state[s]] = true;
        }
        if let Some(k) = sink {
            terminal_q[k] = true;
        }
        let lift = |s: usize, a: usize| -> QAction<T> {
            let mut succ: Vec<(usize, T)> = Vec::new();
            for (t, p) in &m.action(s, a).dist {
                let qt = of_state[*t];
                let p = T::from_rational(p);
                match succ.iter_mut().find(|(u, _)| *u == qt) {
                    Some((_, acc)) => *acc += p,
                    None => succ.push((qt, p)),
                }
            }
            QAction { origin: Origin::Action(s, a), succ, reward: rew.expected(m, s, a) }
        };
        let mut actions: Vec<Vec<QAction<T>>> = (0..nq).map(|_| Vec::new()).collect();
        for s in 0..n {
            if terminal.contains(s) || mecs.block_of[s].is_some() {
                continue;
            }
            actions[of_state[s]] = (0..m.actions(s).len()).map(|a| lift(s, a)).collect();
        }
        for (b, block) in mecs.blocks.iter().enumerate() {
            let q = block_q[b];
            let mut list = Vec::new();
            for &s in &block.states {
                for a in 0..m.actions(s).len() {
                    if !block.actions.contains(&(s, a)) {
                        list.push(lift(s, a));
                    }
                }
            }
            list.push(QAction {
                origin: Origin::Stay,
                succ: vec![(sink.expect("sink exists"), T::one())],
                reward: T::zero(),
            });
            actions[q] = list;
        }
        Quotient { terminal: terminal_q, actions, of_state, mecs }
    }

    fn size(&self) -> usize {
        self.actions.len()
    }

    fn q_value(&self, q: usize, a: usize, x: &[T]) -> T {
        let act = &self.actions[q][a];
        let mut v = act.reward.clone();
        for (t, p) in &act.succ {
            if !self.terminal[*t] {
                v += p.clone() * &x[*t];
            }
        }
        v
    }

    /// Values of a fixed quotient policy.
    fn evaluate(&self, policy: &[usize]) -> Result<Vec<T>, Error> {
        let n = self.size();
        let mut idx = vec![usize::MAX; n];
        let mut live = Vec::new();
        for q in 0..n {
            if !self.terminal[q] {
                idx[q] = live.len();
                live.push(q);
            }
        }
        let mut rows = Vec::with_capacity(live.len());
        let mut rhs = Vec::with_capacity(live.len());
        for &q in &live {
            let act = &self.actions[q][policy[q]];
            rhs.push(act.reward.clone());
            rows.push(
                act.succ
                    .iter()
                    .filter(|(t, _)| idx[*t] != usize::MAX)
                    .map(|(t, p)| (idx[*t], p.clone()))
                    .collect::<Vec<_>>(),
            );
        }
        let y = solve_transient(&rows, &rhs)?;
        let mut x = vec![T::zero(); n];
        for (k, &q) in live.iter().enumerate() {
            x[q] = y[k].clone();
        }
        Ok(x)
    }

    fn best_action(&self, q: usize, x: &[T], dir: Direction) -> (usize, T) {
        let mut best: Option<(usize, T)> = None;
        for a in 0..self.actions[q].len() {
            let v = self.q_value(q, a, x);
            if best.as_ref().is_none_or(|(_, b)| dir.better(&v, b)) {
                best = Some((a, v));
            }
        }
        best.expect("non-terminal quotient state has actions")
    }

    /// Policy iteration from the first action everywhere; switches only on
    /// strict improvement. The returned policy is the lowest-index greedy
    /// policy for the final values.
    pub fn policy_iteration(&self, dir: Direction) -> Result<(Vec<T>, Vec<usize>, usize), Error> {
        let n = self.size();
        let mut policy = vec![0usize; n];
        let mut iterations = 0;
        loop {
            iterations += 1;
            let x = self.evaluate(&policy)?;
            let mut changed = false;
            for q in 0..n {
                if self.terminal[q] {
                    continue;
                }
                let (a, v) = self.best_action(q, &x, dir);
                let current = self.q_value(q, policy[q], &x);
                if dir.better(&v, &current) {
                    policy[q] = a;
                    changed = true;
                }
            }
            if !changed {
                for q in 0..n {
                    if !self.terminal[q] {
                        policy[q] = self.best_action(q, &x, dir).0;
                    }
                }
                return Ok((x, policy, iterations));
            }
        }
    }

    /// Value iteration from zero with the relative stopping rule.
    pub fn value_iteration(&self, dir: Direction, cfg: &SolverConfig) -> (Vec<T>, Vec<usize>, usize) {
        let n = self.size();
        let mut x = vec![T::zero(); n];
        let mut iterations = 0;
        loop {
            iterations += 1;
            let mut next = x.clone();
            let mut converged = true;
            for q in 0..n {
                if self.terminal[q] {
                    continue;
                }
                let (_, v) = self.best_action(q, &x, dir);
                let diff = (v.to_f64() - x[q].to_f64()).abs();
                let scale = v.to_f64().abs();
                if diff > cfg.float_tolerance * scale || (scale == 0.0 && diff > 0.0) {
                    converged = false;
                }
                next[q] = v;
            }
            x = next;
            if converged || iterations >= cfg.max_iterations {
                break;
            }
        }
        let policy = (0..n).map(|q| if self.terminal[q] { 0 } else { self.greedy_with_ties(q, &x, dir) }).collect();
        (x, policy, iterations)
    }

    /// Lowest-index action within a small relative band of the optimum.
    fn greedy_with_ties(&self, q: usize, x: &[T], dir: Direction) -> usize {
        let (_, best) = self.best_action(q, x, dir);
        let b = best.to_f64();
        let band = 1e-12 * (1.0 + b.abs());
        (0..self.actions[q].len()).find(|&a| (self.q_value(q, a, x).to_f64() - b).abs() <= band).unwrap_or(0)
    }

    /// Maps a quotient policy back to the original states: the chosen exit
    /// of a collapsed block is taken at its source state, and the remaining
    /// block states route towards it through retained actions.
    pub fn lift_policy(&self, m: &Mdp, qpolicy: &[usize]) -> MemorylessPolicy {
        let n = m.num_states();
        let mut sigma = MemorylessPolicy::first_action(n);
        for s in 0..n {
            if self.mecs.block_of[s].is_some() {
                continue;
            }
            let q = self.of_state[s];
            if self.terminal[q] {
                continue;
            }
            if let Origin::Action(_, a) = self.actions[q][qpolicy[q]].origin {
                sigma.set(s, a);
            }
        }
        for block in &self.mecs.blocks {
            let q = self.of_state[block.states[0]];
            let origin = self.actions[q][qpolicy[q]].origin;
            let mut assigned = StateSet::empty(n);
            match origin {
                Origin::Action(u, a) => {
                    sigma.set(u, a);
                    assigned.insert(u);
                    // Backward sweep through retained actions.
                    loop {
                        let mut progress = false;
                        for &(s, a) in &block.actions {
                            if assigned.contains(s) {
                                continue;
                            }
                            if m.action(s, a).successors().any(|t| assigned.contains(t)) {
                                sigma.set(s, a);
                                assigned.insert(s);
                                progress = true;
                            }
                        }
                        if !progress {
                            break;
                        }
                    }
                }
                Origin::Stay => {
                    for &(s, a) in &block.actions {
                        if assigned.insert(s) {
                            sigma.set(s, a);
                        }
                    }
                }
            }
        }
        sigma
    }
}
