//! Three-memory policies: before anything, after the goal, after the evidence.

use crate::model::{Mdp, MemorylessPolicy, StateSet};
use crate::solver::solve_transient;
use crate::{Error, Scalar};

use super::TransformArtifacts;

const SEEN_G: u8 = 1;
const SEEN_E: u8 = 2;
const BOTH: u8 = SEEN_G | SEEN_E;

/// Policy with memory `{∅, G, E}`; memory switches when a goal or evidence
/// state is entered and the run stops mattering once both were seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalPolicy {
    pub before_any: MemorylessPolicy,
    pub after_goal: MemorylessPolicy,
    pub after_evidence: MemorylessPolicy,
    /// Exit of the initial component the policy heads for.
    pub chosen_exit: Option<(usize, usize)>,
}

impl ConditionalPolicy {
    fn component(&self, mode: u8) -> &MemorylessPolicy {
        match mode {
            0 => &self.before_any,
            SEEN_G => &self.after_goal,
            _ => &self.after_evidence,
        }
    }

    /// Action in state `s` under memory `mode`.
    pub fn action(&self, s: usize, mode: u8) -> Option<usize> {
        self.component(mode).get(s)
    }
}

fn flags(s: usize, goal: &StateSet, evidence: &StateSet) -> u8 {
    (if goal.contains(s) { SEEN_G } else { 0 }) | (if evidence.contains(s) { SEEN_E } else { 0 })
}

/// Reachable part of the product of `m` with the memory of `pi`.
struct Product {
    /// `(state, mode)` per product state.
    nodes: Vec<(usize, u8)>,
    /// Successor lists over product indices with original probabilities.
    succ: Vec<Vec<(usize, crate::Rational)>>,
    /// Action used at each non-final product state.
    chosen: Vec<Option<usize>>,
}

fn product(m: &Mdp, pi: &ConditionalPolicy, goal: &StateSet, evidence: &StateSet) -> Result<Product, Error> {
    let n = m.num_states();
    let mut index = vec![usize::MAX; 4 * n];
    let mut nodes = Vec::new();
    let mut succ = Vec::new();
    let mut chosen = Vec::new();
    let start = (m.initial(), flags(m.initial(), goal, evidence));
    index[start.0 * 4 + start.1 as usize] = 0;
    nodes.push(start);
    let mut head = 0;
    while head < nodes.len() {
        let (s, mode) = nodes[head];
        head += 1;
        if mode == BOTH {
            succ.push(Vec::new());
            chosen.push(None);
            continue;
        }
        let a = pi.action(s, mode).ok_or(Error::PolicyUndefined(s))?;
        let c = m.actions(s).get(a).ok_or(Error::PolicyUndefined(s))?;
        let mut out = Vec::with_capacity(c.dist.len());
        for (t, p) in &c.dist {
            let tm = mode | flags(*t, goal, evidence);
            let key = t * 4 + tm as usize;
            if index[key] == usize::MAX {
                index[key] = nodes.len();
                nodes.push((*t, tm));
            }
            out.push((index[key], p.clone()));
        }
        succ.push(out);
        chosen.push(Some(a));
    }
    Ok(Product { nodes, succ, chosen })
}

/// `(state, memory, action)` for every product state reachable under `pi`
/// before both sets were seen, in discovery order.
pub fn reachable_choices(
    m: &Mdp,
    pi: &ConditionalPolicy,
    goal: &StateSet,
    evidence: &StateSet,
) -> Result<Vec<(usize, u8, usize)>, Error> {
    let p = product(m, pi, goal, evidence)?;
    Ok(p.nodes.iter().zip(&p.chosen).filter_map(|(&(s, mode), a)| a.map(|a| (s, mode, a))).collect())
}

/// Probability of reaching `target` from product state 0.
fn reach_in_chain<T: Scalar>(succ: &[Vec<(usize, crate::Rational)>], target: &[bool]) -> Result<T, Error> {
    let n = succ.len();
    if target[0] {
        return Ok(T::one());
    }
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, out) in succ.iter().enumerate() {
        for (j, _) in out {
            pred[*j].push(i);
        }
    }
    let mut can = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| target[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &pred[j] {
            if !can[i] {
                can[i] = true;
                stack.push(i);
            }
        }
    }
    if !can[0] {
        return Ok(T::zero());
    }
    let unknowns: Vec<usize> = (0..n).filter(|&i| can[i] && !target[i]).collect();
    let mut pos = vec![usize::MAX; n];
    for (k, &i) in unknowns.iter().enumerate() {
        pos[i] = k;
    }
    let mut rows = Vec::with_capacity(unknowns.len());
    let mut rhs = Vec::with_capacity(unknowns.len());
    for &i in &unknowns {
        let mut b = T::zero();
        let mut row = Vec::new();
        for (j, p) in &succ[i] {
            if target[*j] {
                b += T::from_rational(p);
            } else if pos[*j] != usize::MAX {
                row.push((pos[*j], T::from_rational(p)));
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let x = solve_transient(&rows, &rhs)?;
    Ok(x[pos[0]].clone())
}

/// `Pr^π(◇G ∧ ◇E)` and `Pr^π(◇E)`.
pub fn joint_and_evidence<T: Scalar>(
    m: &Mdp,
    pi: &ConditionalPolicy,
    goal: &StateSet,
    evidence: &StateSet,
) -> Result<(T, T), Error> {
    let p = product(m, pi, goal, evidence)?;
    let both: Vec<bool> = p.nodes.iter().map(|(_, md)| *md == BOTH).collect();
    let seen_e: Vec<bool> = p.nodes.iter().map(|(_, md)| md & SEEN_E != 0).collect();
    Ok((reach_in_chain(&p.succ, &both)?, reach_in_chain(&p.succ, &seen_e)?))
}

/// `Pr^π(◇G | ◇E)` on the product chain.
pub fn evaluate_policy<T: Scalar>(
    m: &Mdp,
    pi: &ConditionalPolicy,
    goal: &StateSet,
    evidence: &StateSet,
) -> Result<T, Error> {
    let (joint, ev) = joint_and_evidence::<T>(m, pi, goal, evidence)?;
    if ev.is_zero() {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint / ev)
}

/// Whether `a` and `b` choose the same action in every product state
/// reachable under `a` (which then is also the set reachable under `b`).
pub fn agrees_on_reachable(
    m: &Mdp,
    a: &ConditionalPolicy,
    b: &ConditionalPolicy,
    goal: &StateSet,
    evidence: &StateSet,
) -> bool {
    if a.chosen_exit != b.chosen_exit {
        return false;
    }
    let Ok(p) = product(m, a, goal, evidence) else {
        return false;
    };
    p.nodes.iter().zip(&p.chosen).all(|((s, mode), act)| act.is_none() || b.action(*s, *mode) == *act)
}

/// Lifts a witness of the eliminated model back to the original model.
pub fn extract_policy<T: Scalar>(
    t: &TransformArtifacts<T>,
    tilde_witness: &MemorylessPolicy,
) -> Result<ConditionalPolicy, Error> {
    let m = &t.original;
    let n = m.num_states();
    let tilde = &t.tilde;
    let mut before = MemorylessPolicy::first_action(n);
    let absorbing = t.goal.union(&t.evidence);
    for s in 0..n {
        if absorbing.contains(s) {
            continue;
        }
        if let Some(k) = tilde.from_original[s] {
            if let Some(a) = tilde_witness.get(k) {
                before.set(s, a);
            }
        }
    }
    let mut chosen_exit = None;
    if tilde.is_eliminated() {
        let ci = &t.initial_component;
        let pick = tilde_witness.get(tilde.initial()).unwrap_or(0);
        let (se, ae) = *tilde.exit_catalog.get(pick).ok_or_else(|| Error::Internal("witness picks no exit".into()))?;
        chosen_exit = Some((se, ae));
        let internal = |s: usize| -> Vec<usize> {
            if absorbing.contains(s) {
                return Vec::new();
            }
            (0..m.actions(s).len()).filter(|&a| m.action(s, a).support_within(ci)).collect()
        };
        let mut assigned = StateSet::empty(n);
        before.set(se, ae);
        assigned.insert(se);
        loop {
            let mut progress = false;
            for s in ci.iter() {
                if assigned.contains(s) {
                    continue;
                }
                if let Some(a) =
                    internal(s).into_iter().find(|&a| m.action(s, a).successors().any(|x| assigned.contains(x)))
                {
                    before.set(s, a);
                    assigned.insert(s);
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if !assigned.contains(m.initial()) {
            return Err(Error::Internal("no route from the initial state to the chosen exit".into()));
        }
        for s in ci.iter() {
            if !assigned.contains(s) {
                before.set(s, internal(s).first().copied().unwrap_or(0));
            }
        }
    }
    Ok(ConditionalPolicy {
        before_any: before,
        after_goal: t.after_goal.clone(),
        after_evidence: t.after_evidence.clone(),
        chosen_exit,
    })
}
