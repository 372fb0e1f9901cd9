//! Colored MDPs and abstraction-refinement synthesis of color-consistent
//! memoryless policies.
//!
//! States of the same color must pick the same action index. A colored MDP
//! therefore describes a family of Markov chains, one per consistent policy.
//! Synthesis bounds a whole (sub)family through its unrestricted MDP and
//! splits the allowed actions of one color whenever the optimal witness is
//! inconsistent.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::bisection::{optimize, BisectionConfig, Estimate, Variant};
use crate::conditional::{check_defined, evaluate_policy, reachable_choices, Comparison, ConditionalPolicy, Query};
use crate::graph::bfs_distance;
use crate::model::{Mdp, MdpBuilder, MemorylessPolicy};
use crate::rational::{from_f64, Rational};
use crate::{Direction, Error, Mode};

/// Float bounds must miss the threshold by this much before a node is dropped.
const FLOAT_DISCARD_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ColoredMdp {
    base: Mdp,
    color_of: Vec<usize>,
    color_names: Vec<String>,
    /// Allowed action indices per color, sorted.
    allowed: Vec<Vec<usize>>,
}

/// Two states of one color choosing different actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conflict {
    pub color: usize,
    pub state_a: usize,
    pub state_b: usize,
    pub action_a: usize,
    pub action_b: usize,
}

impl ColoredMdp {
    /// Colors from the model's `@color` entries; uncolored states get fresh
    /// colors of their own. Color ids follow the first state carrying them.
    pub fn from_mdp(m: &Mdp) -> Result<Self, Error> {
        let n = m.num_states();
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut color_of = Vec::with_capacity(n);
        let mut color_names = Vec::new();
        for s in 0..n {
            let name = match m.colors().get(&s) {
                Some(c) => c.clone(),
                None => format!("#{s}"),
            };
            let id = *ids.entry(name.clone()).or_insert_with(|| {
                color_names.push(name);
                color_names.len() - 1
            });
            color_of.push(id);
        }
        let mut allowed: Vec<Option<Vec<usize>>> = vec![None; color_names.len()];
        for s in 0..n {
            let k = m.actions(s).len();
            match &allowed[color_of[s]] {
                None => allowed[color_of[s]] = Some((0..k).collect()),
                Some(a) if a.len() != k => {
                    return Err(Error::InvalidArgument(format!(
                        "states of color '{}' have different numbers of actions",
                        color_names[color_of[s]]
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(ColoredMdp {
            base: m.clone(),
            color_of,
            color_names,
            allowed: allowed.into_iter().map(Option::unwrap_or_default).collect(),
        })
    }

    /// Colors given explicitly, one per state.
    pub fn with_colors(m: &Mdp, colors: &[usize]) -> Result<Self, Error> {
        if colors.len() != m.num_states() {
            return Err(Error::InvalidArgument("one color per state required".into()));
        }
        let mut b = m.clone().into_builder();
        for (s, c) in colors.iter().enumerate() {
            b.color(s, format!("c{c}"));
        }
        ColoredMdp::from_mdp(&b.build_unchecked())
    }

    pub fn base(&self) -> &Mdp {
        &self.base
    }

    pub fn num_colors(&self) -> usize {
        self.allowed.len()
    }

    pub fn color_of(&self, s: usize) -> usize {
        self.color_of[s]
    }

    pub fn color_name(&self, c: usize) -> &str {
        &self.color_names[c]
    }

    pub fn allowed(&self, c: usize) -> &[usize] {
        &self.allowed[c]
    }

    /// Number of consistent policies.
    pub fn family_size(&self) -> u128 {
        self.allowed.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }

    /// A copy with the allowed set of color `c` replaced.
    pub fn restrict(&self, c: usize, actions: Vec<usize>) -> Result<Self, Error> {
        if actions.is_empty() || actions.iter().any(|a| !self.allowed[c].contains(a)) {
            return Err(Error::InvalidArgument("restriction must be a nonempty subset".into()));
        }
        let mut out = self.clone();
        let mut actions = actions;
        actions.sort_unstable();
        actions.dedup();
        out.allowed[c] = actions;
        Ok(out)
    }

    /// The MDP with only the allowed actions, plus for each of its states
    /// the base index behind each kept action.
    pub fn restricted(&self) -> (Mdp, Vec<Vec<usize>>) {
        let n = self.base.num_states();
        let mut b = MdpBuilder::new(n);
        b.initial(self.base.initial());
        let mut map = Vec::with_capacity(n);
        for s in 0..n {
            let keep = self.allowed[self.color_of[s]].clone();
            for &a in &keep {
                b.choice(s, self.base.action(s, a).clone());
            }
            map.push(keep);
        }
        for (name, set) in self.base.labels() {
            b.label_set(name.clone(), set.clone());
        }
        (b.build_unchecked(), map)
    }

    /// The memoryless policy choosing `per_color[c]` in every state of color `c`.
    pub fn policy(&self, per_color: &[usize]) -> MemorylessPolicy {
        MemorylessPolicy::total(self.color_of.iter().map(|&c| per_color[c]).collect())
    }

    /// Every consistent policy, lexicographic by color id then action index.
    pub fn enumerate_family(&self, cap: u128) -> Result<Vec<MemorylessPolicy>, Error> {
        let size = self.family_size();
        if size > cap {
            return Err(Error::CapExceeded { size, cap });
        }
        let k = self.num_colors();
        let mut digits = vec![0usize; k];
        let mut out = Vec::with_capacity(size as usize);
        loop {
            let per_color: Vec<usize> = (0..k).map(|c| self.allowed[c][digits[c]]).collect();
            out.push(self.policy(&per_color));
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < self.allowed[i].len() {
                    break;
                }
                digits[i] = 0;
            }
        }
    }
}

/// Conflicts of `sigma` among the states of `domain` (base action indices).
pub fn is_consistent(
    cm: &ColoredMdp,
    sigma: &MemorylessPolicy,
    domain: impl IntoIterator<Item = usize>,
) -> Vec<Conflict> {
    let choices = domain.into_iter().filter_map(|s| sigma.get(s).map(|a| (s, a)));
    conflicts_of(cm, choices)
}

fn conflicts_of(cm: &ColoredMdp, choices: impl IntoIterator<Item = (usize, usize)>) -> Vec<Conflict> {
    let mut first: Vec<Option<(usize, usize)>> = vec![None; cm.num_colors()];
    let mut out = Vec::new();
    for (s, a) in choices {
        let c = cm.color_of(s);
        match first[c] {
            None => first[c] = Some((s, a)),
            Some((s0, a0)) if a0 != a => {
                out.push(Conflict { color: c, state_a: s0, state_b: s, action_a: a0, action_b: a })
            }
            Some(_) => {}
        }
    }
    out
}

/// Color and action to split on: the conflict whose farther state is
/// farthest from the initial state (ties by the lower state index), and the
/// lower of its two actions.
pub fn choose_split(conflicts: &[Conflict], distances: &[Option<usize>]) -> Option<(usize, usize)> {
    let key = |c: &Conflict| {
        let far = |s: usize| distances[s].map_or(-1i64, |d| d as i64);
        let (d, s) =
            if far(c.state_a) >= far(c.state_b) { (far(c.state_a), c.state_a) } else { (far(c.state_b), c.state_b) };
        (d, std::cmp::Reverse(s))
    };
    conflicts.iter().max_by(|x, y| key(x).cmp(&key(y))).map(|c| (c.color, c.action_a.min(c.action_b)))
}

/// Children `({α}, allowed \ {α})` of color `c`.
pub fn split(cm: &ColoredMdp, c: usize, alpha: usize) -> Result<(ColoredMdp, ColoredMdp), Error> {
    let rest: Vec<usize> = cm.allowed(c).iter().copied().filter(|&a| a != alpha).collect();
    if rest.is_empty() {
        return Err(Error::InvalidArgument("cannot split a color with one allowed action".into()));
    }
    Ok((cm.restrict(c, vec![alpha])?, cm.restrict(c, rest)?))
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeOutcome {
    /// No policy of the node reaches the evidence.
    EvidenceUnreachable,
    /// The node's bound cannot satisfy the threshold.
    Discarded,
    /// Split on a color into two children.
    Split { color: usize, alpha: usize },
    /// A consistent witness satisfies the threshold.
    Satisfied,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub depth: usize,
    /// Optimal conditional value of the node's unrestricted MDP.
    pub bound: Option<Rational>,
    pub outcome: NodeOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Feasible { witness: MemorylessPolicy, value: Rational },
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub outcome: Outcome,
    pub nodes: Vec<NodeRecord>,
    pub nodes_explored: usize,
    /// Explored nodes per second of wall time.
    pub it_per_s: f64,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self.outcome, Outcome::Feasible { .. })
    }
}

/// Finds a consistent policy `σ` with `Pr^σ(◇G | ◇E) ∼ λ`, where `∼` and
/// `λ` come from `q.comparison` and `q.threshold`. Lower-bound comparisons
/// search with maximal bounds, upper-bound ones with minimal bounds.
pub fn synthesize(cm: &ColoredMdp, q: &Query) -> Result<SynthesisResult, Error> {
    let start = Instant::now();
    let dir = match q.comparison {
        Comparison::Ge | Comparison::Gt => Direction::Max,
        Comparison::Le | Comparison::Lt => Direction::Min,
        Comparison::Eq => {
            return Err(Error::InvalidArgument("synthesis supports lt, le, ge and gt only".into()));
        }
    };
    let mut q = q.clone();
    q.direction = dir;
    let lambda = q.threshold.clone();
    let exact = q.mode.is_exact();
    let cfg = BisectionConfig::new(
        Variant::PtStd,
        Rational::from_integer(0.into()),
        if exact { Mode::Exact } else { Mode::Float },
    );
    let slack = if exact { Rational::from_integer(0.into()) } else { from_f64(FLOAT_DISCARD_SLACK) };
    let holds = |v: &Rational| match q.comparison {
        Comparison::Ge => *v >= lambda,
        Comparison::Gt => *v > lambda,
        Comparison::Le => *v <= lambda,
        Comparison::Lt => *v < lambda,
        Comparison::Eq => unreachable!(),
    };
    // Could some member of a node with this bound satisfy the threshold?
    let promising = |b: &Rational| match q.comparison {
        Comparison::Ge => *b >= &lambda - &slack,
        Comparison::Gt => *b > &lambda - &slack,
        Comparison::Le => *b <= &lambda + &slack,
        Comparison::Lt => *b < &lambda + &slack,
        Comparison::Eq => unreachable!(),
    };

    let mut nodes = Vec::new();
    let mut stack = vec![(cm.clone(), 0usize)];
    let finish = |outcome, nodes: Vec<NodeRecord>| {
        let secs = start.elapsed().as_secs_f64();
        let n = nodes.len();
        SynthesisResult {
            outcome,
            nodes_explored: n,
            it_per_s: if secs > 0.0 { n as f64 / secs } else { n as f64 },
            nodes,
        }
    };
    while let Some((node, depth)) = stack.pop() {
        let (mdp, map) = node.restricted();
        if !check_defined(&mdp, &q.evidence) {
            nodes.push(NodeRecord { depth, bound: None, outcome: NodeOutcome::EvidenceUnreachable });
            continue;
        }
        let opt = optimize(&mdp, &q, &cfg)?;
        // Conservative end of the estimate for the search direction.
        let bound = match (&opt.estimate, dir) {
            (Estimate::Exact(v), _) => v.clone(),
            (Estimate::Approx { upper, .. }, Direction::Max) => upper.clone(),
            (Estimate::Approx { lower, .. }, Direction::Min) => lower.clone(),
        };
        if !promising(&bound) {
            nodes.push(NodeRecord { depth, bound: Some(bound), outcome: NodeOutcome::Discarded });
            continue;
        }
        let lifted = opt.witness.as_ref().map(|w| lift(w, &map));
        let mut split_on = None;
        if let Some(pi) = &lifted {
            let choices = reachable_choices(node.base(), pi, &q.goal, &q.evidence)?;
            let conflicts = conflicts_of(&node, choices.iter().map(|&(s, _, a)| (s, a)));
            if conflicts.is_empty() {
                let sigma = memoryless_from(&node, &choices);
                if let Ok(v) = member_value(node.base(), &sigma, &q, exact) {
                    if holds(&v) {
                        nodes.push(NodeRecord { depth, bound: Some(bound), outcome: NodeOutcome::Satisfied });
                        return Ok(finish(Outcome::Feasible { witness: sigma, value: v }, nodes));
                    }
                }
            } else {
                split_on = choose_split(&conflicts, &bfs_distance(&mdp, mdp.initial()));
            }
        }
        // Consistent but unverified (or no witness): split any open color.
        let split_on = split_on
            .or_else(|| (0..node.num_colors()).find(|&c| node.allowed(c).len() > 1).map(|c| (c, node.allowed(c)[0])));
        match split_on {
            Some((c, alpha)) => {
                let (first, second) = split(&node, c, alpha)?;
                nodes.push(NodeRecord { depth, bound: Some(bound), outcome: NodeOutcome::Split { color: c, alpha } });
                stack.push((second, depth + 1));
                stack.push((first, depth + 1));
            }
            None => nodes.push(NodeRecord { depth, bound: Some(bound), outcome: NodeOutcome::Discarded }),
        }
    }
    Ok(finish(Outcome::Infeasible, nodes))
}

/// Maps a witness of the restricted MDP to base action indices.
fn lift(pi: &ConditionalPolicy, map: &[Vec<usize>]) -> ConditionalPolicy {
    let conv = |p: &MemorylessPolicy| {
        let mut out = MemorylessPolicy::undefined(p.len());
        for (s, a) in p.choices().iter().enumerate() {
            if let Some(a) = a {
                if let Some(&b) = map[s].get(*a) {
                    out.set(s, b);
                }
            }
        }
        out
    };
    ConditionalPolicy {
        before_any: conv(&pi.before_any),
        after_goal: conv(&pi.after_goal),
        after_evidence: conv(&pi.after_evidence),
        chosen_exit: pi.chosen_exit.map(|(s, a)| (s, map[s].get(a).copied().unwrap_or(a))),
    }
}

/// Consistent memoryless policy agreeing with the observed choices;
/// colors never seen take their first allowed action.
fn memoryless_from(cm: &ColoredMdp, choices: &[(usize, u8, usize)]) -> MemorylessPolicy {
    let mut per_color: Vec<usize> = (0..cm.num_colors()).map(|c| cm.allowed(c)[0]).collect();
    for &(s, _, a) in choices {
        per_color[cm.color_of(s)] = a;
    }
    cm.policy(&per_color)
}

/// Conditional value of one family member.
pub fn member_value(m: &Mdp, sigma: &MemorylessPolicy, q: &Query, exact: bool) -> Result<Rational, Error> {
    let pi = ConditionalPolicy {
        before_any: sigma.clone(),
        after_goal: sigma.clone(),
        after_evidence: sigma.clone(),
        chosen_exit: None,
    };
    if exact {
        evaluate_policy::<Rational>(m, &pi, &q.goal, &q.evidence)
    } else {
        evaluate_policy::<f64>(m, &pi, &q.goal, &q.evidence).map(from_f64)
    }
}

/// Brute force over the family (test oracle and small instances).
pub fn synthesize_by_enumeration(
    cm: &ColoredMdp,
    q: &Query,
    cap: u128,
) -> Result<Option<(MemorylessPolicy, Rational)>, Error> {
    for sigma in cm.enumerate_family(cap)? {
        let v = match member_value(cm.base(), &sigma, q, true) {
            Ok(v) => v,
            Err(Error::ZeroEvidence) => continue,
            Err(e) => return Err(e),
        };
        let ok = match q.comparison {
            Comparison::Ge => v >= q.threshold,
            Comparison::Gt => v > q.threshold,
            Comparison::Le => v <= q.threshold,
            Comparison::Lt => v < q.threshold,
            Comparison::Eq => v == q.threshold,
        };
        if ok {
            return Ok(Some((sigma, v)));
        }
    }
    Ok(None)
}
