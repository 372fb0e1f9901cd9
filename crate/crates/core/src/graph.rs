//! Qualitative graph algorithms over the transition structure.

use std::collections::VecDeque;

use crate::model::{Mdp, StateSet};

/// Predecessor lists: for each state, the `(pred, action)` pairs with an edge into it.
pub fn predecessors(m: &Mdp) -> Vec<Vec<(usize, usize)>> {
    let mut pre = vec![Vec::new(); m.num_states()];
    for s in m.states() {
        for (a, c) in m.actions(s).iter().enumerate() {
            for t in c.successors() {
                pre[t].push((s, a));
            }
        }
    }
    for p in &mut pre {
        p.dedup();
    }
    pre
}

/// `{ s | Pr_s^max(◇target) > 0 }`: backward reachability over any edge.
pub fn reach_positive_max(m: &Mdp, target: &StateSet) -> StateSet {
    let pre = predecessors(m);
    let mut out = target.clone();
    let mut queue: Vec<usize> = target.iter().collect();
    while let Some(t) = queue.pop() {
        for &(s, _) in &pre[t] {
            if out.insert(s) {
                queue.push(s);
            }
        }
    }
    out
}

/// `{ s | Pr_s^min(◇target) = 0 }`: complement of the states from which every
/// action keeps a positive chance of reaching `target`.
pub fn prob_zero_min(m: &Mdp, target: &StateSet) -> StateSet {
    let n = m.num_states();
    let pre = predecessors(m);
    // Actions of each state not yet known to hit the attractor.
    let mut pending: Vec<usize> = (0..n).map(|s| m.actions(s).len()).collect();
    let mut action_hit: Vec<Vec<bool>> = (0..n).map(|s| vec![false; m.actions(s).len()]).collect();
    let mut attr = target.clone();
    let mut queue: VecDeque<usize> = target.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &(s, a) in &pre[t] {
            if attr.contains(s) || action_hit[s][a] {
                continue;
            }
            action_hit[s][a] = true;
            pending[s] -= 1;
            if pending[s] == 0 {
                attr.insert(s);
                queue.push_back(s);
            }
        }
    }
    attr.complement()
}

/// `{ s | Pr_s^max(◇target) = 1 }` via the nested fixed point.
pub fn prob_one_max(m: &Mdp, target: &StateSet) -> StateSet {
    let n = m.num_states();
    let mut u = StateSet::full(n);
    loop {
        // Least fixed point: reach target using actions that stay inside u.
        let mut r = target.intersection(&u);
        loop {
            let mut changed = false;
            for s in m.states() {
                if r.contains(s) || !u.contains(s) {
                    continue;
                }
                let ok = m.actions(s).iter().any(|c| c.support_within(&u) && c.successors().any(|t| r.contains(t)));
                if ok {
                    r.insert(s);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Strongly connected components of an adjacency list, in reverse
/// topological order (components without outgoing edges first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0usize;
    // Explicit call stack: (node, next edge position).
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// One maximal end component and the actions it retains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MecBlock {
    pub states: Vec<usize>,
    /// `(state, action)` pairs whose support stays in the block.
    pub actions: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MecPartition {
    pub blocks: Vec<MecBlock>,
    /// Block index per state, if the state belongs to a MEC.
    pub block_of: Vec<Option<usize>>,
}

impl MecPartition {
    pub fn in_mec(&self, s: usize) -> bool {
        self.block_of[s].is_some()
    }
}

/// Maximal end components of the whole model.
pub fn maximal_end_components(m: &Mdp) -> MecPartition {
    mecs_within(m, &StateSet::full(m.num_states()))
}

/// Maximal end components of the sub-MDP on `region` (actions leaving the
/// region are dropped).
pub fn mecs_within(m: &Mdp, region: &StateSet) -> MecPartition {
    let n = m.num_states();
    let mut alive = region.clone();
    let mut enabled: Vec<Vec<bool>> =
        (0..n).map(|s| m.actions(s).iter().map(|c| alive.contains(s) && c.support_within(region)).collect()).collect();
    let mut comp_of = vec![usize::MAX; n];
    loop {
        for s in 0..n {
            if alive.contains(s) && !enabled[s].iter().any(|e| *e) {
                alive.remove(s);
            }
        }
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !alive.contains(s) {
                    return Vec::new();
                }
                let mut out: Vec<usize> = m
                    .actions(s)
                    .iter()
                    .enumerate()
                    .filter(|(a, _)| enabled[s][*a])
                    .flat_map(|(_, c)| c.successors())
                    .filter(|t| alive.contains(*t))
                    .collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        let comps = tarjan_scc(&adj);
        for (i, comp) in comps.iter().enumerate() {
            for &s in comp {
                comp_of[s] = i;
            }
        }
        let mut changed = false;
        for s in 0..n {
            if !alive.contains(s) {
                continue;
            }
            for (a, c) in m.actions(s).iter().enumerate() {
                if enabled[s][a] && c.successors().any(|t| !alive.contains(t) || comp_of[t] != comp_of[s]) {
                    enabled[s][a] = false;
                    changed = true;
                }
            }
            if !enabled[s].iter().any(|e| *e) {
                alive.remove(s);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut block_of = vec![None; n];
    let mut by_comp: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for s in alive.iter() {
        by_comp.entry(comp_of[s]).or_default().push(s);
    }
    let enabled = &enabled;
    let mut blocks: Vec<MecBlock> = by_comp
        .into_values()
        .map(|states| {
            let actions = states
                .iter()
                .flat_map(|&s| (0..m.actions(s).len()).filter(move |&a| enabled[s][a]).map(move |a| (s, a)))
                .collect();
            MecBlock { states, actions }
        })
        .collect();
    blocks.sort_by_key(|b| b.states[0]);
    for (i, b) in blocks.iter().enumerate() {
        for &s in &b.states {
            block_of[s] = Some(i);
        }
    }
    MecPartition { blocks, block_of }
}

/// Reverse topological order (successors before predecessors) of the graph
/// with self-loops ignored, or `None` if a longer cycle exists.
pub fn topological_order(m: &Mdp) -> Option<Vec<usize>> {
    let n = m.num_states();
    let mut indeg = vec![0usize; n];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in m.states() {
        let mut out: Vec<usize> = m.all_successors(s).filter(|&t| t != s).collect();
        out.sort_unstable();
        out.dedup();
        for &t in &out {
            indeg[t] += 1;
        }
        succ[s] = out;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| indeg[s] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for &t in &succ[s] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    if order.len() < n {
        return None;
    }
    order.reverse();
    Some(order)
}

/// BFS hop distances from `from`; neighbours visited in ascending index.
pub fn bfs_distance(m: &Mdp, from: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; m.num_states()];
    dist[from] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        let d = dist[s].unwrap_or(0);
        let mut out: Vec<usize> = m.all_successors(s).collect();
        out.sort_unstable();
        out.dedup();
        for t in out {
            if dist[t].is_none() {
                dist[t] = Some(d + 1);
                queue.push_back(t);
            }
        }
    }
    dist
}
