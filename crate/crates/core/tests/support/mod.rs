//! Brute-force oracles shared by the integration tests. Nothing here uses
//! the library's solvers: chains are solved with a dense exact Gaussian
//! elimination and optima come from enumerating memoryless policies.
#![allow(dead_code)]

use condreach::generate::{random_mdp, GenConfig};
use condreach::model::{Mdp, StateSet};
use condreach::{Direction, Rational};
use num_traits::{One, Zero};

/// Dense exact solve of `A x = b`; `None` when singular.
pub fn gauss(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = Rational::one() / &a[col][col];
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] * &inv;
                for c in col..n {
                    let d = &f * &a[col][c];
                    a[r][c] -= d;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Successor distribution of state `s` under a total memoryless choice.
fn step(m: &Mdp, choice: &[usize], s: usize) -> Vec<(usize, Rational)> {
    m.action(s, choice[s]).dist.clone()
}

/// Reachability probabilities of `target` in the chain induced by `choice`.
pub fn chain_reach(m: &Mdp, choice: &[usize], target: &StateSet) -> Vec<Rational> {
    let n = m.num_states();
    // States that can reach the target in the chain.
    let mut can: Vec<bool> = (0..n).map(|s| target.contains(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !can[s] && step(m, choice, s).iter().any(|(t, _)| can[*t]) {
                can[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !target.contains(s)).collect();
    let pos = |s: usize| unknown.iter().position(|&u| u == s);
    let k = unknown.len();
    let mut a = vec![vec![Rational::zero(); k]; k];
    let mut b = vec![Rational::zero(); k];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] += Rational::one();
        for (t, p) in step(m, choice, s) {
            if target.contains(t) {
                b[i] += p;
            } else if let Some(j) = pos(t) {
                a[i][j] -= p;
            }
        }
    }
    let x = gauss(a, b).expect("transient system is regular");
    (0..n)
        .map(
            |s| {
                if target.contains(s) {
                    Rational::one()
                } else {
                    pos(s).map_or_else(Rational::zero, |i| x[i].clone())
                }
            },
        )
        .collect()
}

/// Calls `f` with every total memoryless choice vector of `m`.
pub fn for_each_policy(m: &Mdp, mut f: impl FnMut(&[usize])) {
    let n = m.num_states();
    let counts: Vec<usize> = (0..n).map(|s| m.actions(s).len()).collect();
    let mut digits = vec![0usize; n];
    loop {
        f(&digits);
        let mut i = n;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < counts[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

pub fn policy_count(m: &Mdp) -> u128 {
    (0..m.num_states()).map(|s| m.actions(s).len() as u128).product()
}

/// Optimal reachability from every state by enumeration.
pub fn opt_reach(m: &Mdp, target: &StateSet, dir: Direction) -> Vec<Rational> {
    let mut best: Option<Vec<Rational>> = None;
    for_each_policy(m, |c| {
        let v = chain_reach(m, c, target);
        best = Some(match best.take() {
            None => v,
            Some(b) => b
                .into_iter()
                .zip(v)
                .map(|(x, y)| match dir {
                    Direction::Max => {
                        if y > x {
                            y
                        } else {
                            x
                        }
                    }
                    Direction::Min => {
                        if y < x {
                            y
                        } else {
                            x
                        }
                    }
                })
                .collect(),
        });
    });
    best.expect("at least one policy")
}

/// `M` with goal and evidence states made absorbing.
pub fn absorbing(m: &Mdp, goal: &StateSet, evidence: &StateSet) -> Mdp {
    let mut b = m.clone().into_builder();
    for s in goal.union(evidence).iter() {
        b.clear_actions(s);
        b.action(s, "stop", vec![(s, Rational::one())]);
    }
    b.build_unchecked()
}

/// `(g, e)` per memoryless policy of the absorbing model, where entering an
/// evidence state is worth `(Pr^dir(◇G), 1)` and entering a goal-only state
/// `(Pr^dir(◇E), Pr^dir(◇E))`.
pub fn policy_weights(m: &Mdp, goal: &StateSet, evidence: &StateSet, dir: Direction) -> Vec<(Rational, Rational)> {
    let to_g = opt_reach(m, goal, dir);
    let to_e = opt_reach(m, evidence, dir);
    let circ = absorbing(m, goal, evidence);
    let terminals: Vec<usize> = goal.union(evidence).iter().collect();
    let mut out = Vec::new();
    for_each_policy(&circ, |c| {
        let mut g = Rational::zero();
        let mut e = Rational::zero();
        for &t in &terminals {
            let p = chain_reach(&circ, c, &StateSet::from_indices(m.num_states(), [t]))[m.initial()].clone();
            if evidence.contains(t) {
                g += &p * &to_g[t];
                e += p;
            } else {
                g += &p * &to_e[t];
                e += &p * &to_e[t];
            }
        }
        out.push((g, e));
    });
    out
}

/// Optimal conditional probability by enumeration; for minimisation with no
/// policy of positive weight the answer is 1.
pub fn brute_conditional(m: &Mdp, goal: &StateSet, evidence: &StateSet, dir: Direction) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    for (g, e) in policy_weights(m, goal, evidence, dir) {
        if e.is_zero() {
            continue;
        }
        let r = g / e;
        if best.as_ref().is_none_or(|b| dir.better(&r, b)) {
            best = Some(r);
        }
    }
    match (best, dir) {
        (None, Direction::Min) => Some(Rational::one()),
        (b, _) => b,
    }
}

/// `V(λ)` by enumeration over policies with positive evidence weight.
pub fn brute_v(m: &Mdp, goal: &StateSet, evidence: &StateSet, dir: Direction, lambda: &Rational) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    for (g, e) in policy_weights(m, goal, evidence, dir) {
        if e.is_zero() {
            continue;
        }
        let v = g - lambda * e;
        if best.as_ref().is_none_or(|b| dir.better(&v, b)) {
            best = Some(v);
        }
    }
    best
}

/// Seeded random model with its goal and evidence sets.
pub fn instance(seed: u64, states: usize, actions: usize, acyclic: bool) -> (Mdp, StateSet, StateSet) {
    let m = random_mdp(seed, &GenConfig::new(states, actions, acyclic)).expect("generator succeeds");
    let g = m.label_set("goal").unwrap();
    let e = m.label_set("evidence").unwrap();
    (m, g, e)
}

/// Small random sizes derived from the seed.
pub fn sized_instance(seed: u64, max_states: usize, max_actions: usize) -> (Mdp, StateSet, StateSet) {
    let states = 2 + (seed as usize * 7) % (max_states - 1);
    let acyclic = seed.is_multiple_of(3);
    instance(seed, states, max_actions, acyclic)
}
