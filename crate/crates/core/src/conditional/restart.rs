//! Restart baseline: conditional probabilities as plain reachability in a
//! product where runs that can no longer see the evidence start over.

use num_traits::One;

use crate::graph::{mecs_within, reach_positive_max};
use crate::model::{Mdp, MdpBuilder, StateSet};
use crate::rational::Rational;
use crate::solver::{reach_prob_with, SolveMethod, SolverConfig};
use crate::{Direction, Error, Scalar};

use super::{check_defined, Query};

const SEEN_G: u8 = 1;
const SEEN_E: u8 = 2;
const BOTH: u8 = 3;

#[derive(Clone, Debug)]
pub struct RestartModel {
    pub mdp: Mdp,
    /// Target of the maximal reachability query.
    pub goal: StateSet,
    /// `(state, memory)` behind each product state.
    pub product_of: Vec<(usize, u8)>,
    /// The answer is `1 - Pr^max(◇goal)` (minimisation via the complement event).
    pub complement: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestartSolution<T> {
    pub value: T,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// Builds the restart product for `q`.
pub fn build_restart(m: &Mdp, q: &Query) -> Result<RestartModel, Error> {
    q.check(m)?;
    if !check_defined(m, &q.evidence) {
        return Err(Error::Undefined);
    }
    let flags = |s: usize| -> u8 {
        (if q.goal.contains(s) { SEEN_G } else { 0 }) | (if q.evidence.contains(s) { SEEN_E } else { 0 })
    };
    let n = m.num_states();

    // Full product reachable from the initial state.
    let mut index = vec![usize::MAX; 4 * n];
    let mut nodes: Vec<(usize, u8)> = vec![(m.initial(), flags(m.initial()))];
    index[m.initial() * 4 + flags(m.initial()) as usize] = 0;
    let mut acts: Vec<Vec<(String, Vec<(usize, Rational)>)>> = Vec::new();
    let mut head = 0;
    while head < nodes.len() {
        let (s, mode) = nodes[head];
        head += 1;
        if mode == BOTH {
            acts.push(vec![("done".to_string(), vec![(head - 1, Rational::one())])]);
            continue;
        }
        let mut list = Vec::new();
        for c in m.actions(s) {
            let mut dist = Vec::with_capacity(c.dist.len());
            for (t, p) in &c.dist {
                let tm = mode | flags(*t);
                let key = t * 4 + tm as usize;
                if index[key] == usize::MAX {
                    index[key] = nodes.len();
                    nodes.push((*t, tm));
                }
                dist.push((index[key], p.clone()));
            }
            list.push((c.name.clone(), dist));
        }
        acts.push(list);
    }
    let size = nodes.len();
    let complement = q.direction == Direction::Min;

    let build = |acts: &[Vec<(String, Vec<(usize, Rational)>)>]| {
        let mut b = MdpBuilder::new(acts.len());
        for (i, list) in acts.iter().enumerate() {
            for (name, dist) in list {
                b.action(i, name.clone(), dist.clone());
            }
        }
        b.build_unchecked()
    };

    let e_region = StateSet::from_fn(size, |i| nodes[i].1 & SEEN_E != 0);
    let pre_e = e_region.complement();
    let raw = build(&acts);
    let alive = reach_positive_max(&raw, &e_region);
    if !alive.contains(0) {
        return Err(Error::Undefined);
    }
    // Branches into hopeless pre-evidence states restart.
    for i in pre_e.iter() {
        for (_, dist) in acts[i].iter_mut() {
            for (t, _) in dist.iter_mut() {
                if !alive.contains(*t) {
                    *t = 0;
                }
            }
        }
    }
    // Lingering forever before the evidence is equivalent to restarting.
    let rewired = build(&acts);
    let lingering = mecs_within(&rewired, &pre_e);
    for block in &lingering.blocks {
        for &i in &block.states {
            acts[i].push(("restart".to_string(), vec![(0, Rational::one())]));
        }
    }

    let full = build(&acts);
    let goal_full = if complement {
        // Evidence seen and the goal avoided forever.
        let only_e = StateSet::from_fn(size, |i| nodes[i].1 == SEEN_E);
        let avoid = mecs_within(&full, &only_e);
        StateSet::from_fn(size, |i| avoid.in_mec(i))
    } else {
        StateSet::from_fn(size, |i| nodes[i].1 == BOTH)
    };

    // Keep what the rewired model can still reach.
    let keep = crate::model::reachable_from(&full, 0, |_, _| true);
    let mut new_index = vec![usize::MAX; size];
    let mut product_of = Vec::new();
    for i in keep.iter() {
        new_index[i] = product_of.len();
        product_of.push(nodes[i]);
    }
    let mut b = MdpBuilder::new(product_of.len());
    b.initial(0);
    for i in keep.iter() {
        for (name, dist) in &acts[i] {
            b.action(new_index[i], name.clone(), dist.iter().map(|(t, p)| (new_index[*t], p.clone())).collect());
        }
    }
    let kept: Vec<usize> = keep.iter().collect();
    let goal = StateSet::from_fn(product_of.len(), |k| goal_full.contains(kept[k]));
    b.label_set("goal", goal.clone());
    Ok(RestartModel { mdp: b.build_unchecked(), goal, product_of, complement })
}

/// Conditional optimum through the restart product.
pub fn solve_restart<T: Scalar>(m: &Mdp, q: &Query) -> Result<RestartSolution<T>, Error> {
    solve_restart_with(m, q, &q.solver)
}

pub fn solve_restart_with<T: Scalar>(m: &Mdp, q: &Query, cfg: &SolverConfig) -> Result<RestartSolution<T>, Error> {
    let rm = build_restart(m, q)?;
    let r = reach_prob_with::<T>(&rm.mdp, &rm.goal, Direction::Max, cfg)?;
    let v = r.values[0].clone();
    Ok(RestartSolution {
        value: if rm.complement { T::one() - v } else { v },
        iterations: r.iterations,
        method: r.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditional::tests::m2;
    use crate::rational::{int, rat};

    #[test]
    fn m2_restart_values() {
        let m = m2();
        let q = Query::from_labels(&m, "goal", "evidence", Direction::Max).unwrap();
        assert_eq!(solve_restart::<Rational>(&m, &q).unwrap().value, rat(2, 3));
        let q = Query::from_labels(&m, "goal", "evidence", Direction::Min).unwrap();
        // Min: s1 alpha, s2 beta, s3 beta: (1/2·1/2·2/3 ... ) evaluated by brute force elsewhere.
        let v = solve_restart::<Rational>(&m, &q).unwrap().value;
        assert!(v <= rat(2, 3) && v >= int(0));
    }

    #[test]
    fn undefined_rejected() {
        let m = m2();
        let q = Query::new(StateSet::from_indices(6, [3]), StateSet::empty(6), Direction::Max);
        assert!(matches!(build_restart(&m, &q), Err(Error::Undefined)));
    }
}
