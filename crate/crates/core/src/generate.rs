//! Fixed example models and a seeded random generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditional::check_defined;
use crate::model::{Mdp, MdpBuilder, StateSet};
use crate::rational::{int, rat, Rational};
use crate::Error;

/// Two chains of length `n` leaving `s0` with probability 1/2 each; every
/// step drops to an absorbing `s⊥` with probability 1/2. The upper chain
/// ends in `g` followed by `e`, the lower one in `e`. Labels `goal = {g}`,
/// `evidence = {e}`; the conditional probability is 1/2 for every `n ≥ 1`.
///
/// Layout: `s0`, `s1..sn`, `s1'..sn'`, `g`, `e`, `s⊥`.
pub fn fix_m1(n: usize) -> Mdp {
    assert!(n >= 1, "chain length must be positive");
    let g = 2 * n + 1;
    let e = g + 1;
    let bot = e + 1;
    let half = rat(1, 2);
    let mut b = MdpBuilder::new(bot + 1);
    b.action(0, "a", vec![(1, half.clone()), (n + 1, half.clone())]);
    for i in 1..=n {
        let upper_next = if i == n { g } else { i + 1 };
        let lower_next = if i == n { e } else { n + i + 1 };
        b.action(i, "a", vec![(upper_next, half.clone()), (bot, half.clone())]);
        b.action(n + i, "a", vec![(lower_next, half.clone()), (bot, half.clone())]);
    }
    b.action(g, "a", vec![(e, int(1))]);
    b.action(e, "loop", vec![(e, int(1))]);
    b.action(bot, "loop", vec![(bot, int(1))]);
    b.label("goal", [g]).label("evidence", [e]);
    b.build().expect("well-formed chain")
}

/// Every path to `e` passes `g`, and `g` may refuse to continue to `e`.
/// States: `s0`, `g`, `e`, `sink`.
pub fn fix_min() -> Mdp {
    let mut b = MdpBuilder::new(4);
    b.action(0, "a", vec![(1, int(1))]);
    b.action(1, "alpha", vec![(2, int(1))]).action(1, "beta", vec![(3, int(1))]);
    b.action(2, "loop", vec![(2, int(1))]);
    b.action(3, "loop", vec![(3, int(1))]);
    b.label("goal", [1]).label("evidence", [2]);
    b.build().expect("well-formed model")
}

/// The six-state example with two nondeterministic states in the middle.
/// Labels `goal = {s4}`, `evidence = {s5, s6}` (states 3, 4, 5).
pub fn fix_m2() -> Mdp {
    let mut b = MdpBuilder::new(6);
    b.action(0, "alpha", vec![(1, rat(1, 2)), (2, rat(1, 2))]).action(0, "beta", vec![(3, int(1))]);
    b.action(1, "alpha", vec![(2, int(1))]).action(1, "beta", vec![(4, rat(1, 2)), (1, rat(1, 2))]);
    b.action(2, "alpha", vec![(2, int(1))]).action(2, "beta", vec![(4, rat(2, 3)), (5, rat(1, 3))]);
    b.action(3, "loop", vec![(3, int(1))]);
    b.action(4, "a", vec![(3, rat(2, 3)), (5, rat(1, 3))]);
    b.action(5, "loop", vec![(5, int(1))]);
    b.label("goal", [3]).label("evidence", [4, 5]);
    b.build().expect("well-formed model")
}

/// `fix_m2` with states 1 and 2 sharing a color.
pub fn fix_fam() -> Mdp {
    let mut b = fix_m2().into_builder();
    for (s, c) in ["c0", "c12", "c12", "c3", "c4", "c5"].iter().enumerate() {
        b.color(s, *c);
    }
    b.build().expect("well-formed model")
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub states: usize,
    pub max_actions: usize,
    /// Successors only point forward (plus self-loops at the end).
    pub acyclic: bool,
    /// Chance that a successor is redrawn uniformly (cyclic models only).
    pub back_edge: f64,
    /// Number of colors; `None` leaves the model uncolored.
    pub colors: Option<usize>,
}

impl GenConfig {
    pub fn new(states: usize, max_actions: usize, acyclic: bool) -> Self {
        GenConfig { states, max_actions, acyclic, back_edge: 0.25, colors: None }
    }

    pub fn with_colors(mut self, colors: usize) -> Self {
        self.colors = Some(colors);
        self
    }
}

/// A random model with labels `goal` and `evidence` whose conditional query
/// is defined. Identical seeds give identical models.
pub fn random_mdp(seed: u64, cfg: &GenConfig) -> Result<Mdp, Error> {
    if cfg.states < 2 || cfg.max_actions == 0 {
        return Err(Error::InvalidArgument("need at least 2 states and 1 action".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let m = draw(&mut rng, cfg);
        let ev = m.label_set("evidence")?;
        if check_defined(&m, &ev) {
            return Ok(m);
        }
    }
    Err(Error::InvalidArgument("could not draw a model with reachable evidence".into()))
}

fn draw(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Mdp {
    let n = cfg.states;
    // The last layer is absorbing.
    let sinks = 1.max(n / 4);
    let inner = n - sinks;
    let mut b = MdpBuilder::new(n);
    let mut action_count = vec![0usize; n];
    let palette: Vec<usize> = match cfg.colors {
        Some(k) => (0..n).map(|s| if s < inner { rng.gen_range(0..k.max(1)) } else { k + s }).collect(),
        None => (0..n).collect(),
    };
    // States sharing a color need the same number of actions.
    let mut per_color = std::collections::BTreeMap::new();
    for s in 0..inner {
        let k = *per_color.entry(palette[s]).or_insert_with(|| rng.gen_range(1..=cfg.max_actions));
        action_count[s] = k;
    }
    for s in 0..inner {
        for a in 0..action_count[s] {
            let pick = |rng: &mut ChaCha8Rng| {
                let t = rng.gen_range(s + 1..n);
                if !cfg.acyclic && rng.gen_bool(cfg.back_edge) {
                    rng.gen_range(0..n)
                } else {
                    t
                }
            };
            let t1 = pick(rng);
            let mut t2 = pick(rng);
            if t2 == t1 {
                t2 = if t1 + 1 < n { t1 + 1 } else { s + 1 };
            }
            let dist = if t1 == t2 {
                vec![(t1, int(1))]
            } else {
                let d: i64 = rng.gen_range(2..=8);
                let k: i64 = rng.gen_range(1..d);
                vec![(t1, rat(k, d)), (t2, rat(d - k, d))]
            };
            b.action(s, format!("a{a}"), dist);
        }
    }
    for s in inner..n {
        b.action(s, "loop", vec![(s, int(1))]);
    }
    let mut candidates: Vec<usize> = (1..n).collect();
    candidates.shuffle(rng);
    let ng = rng.gen_range(1..=1.max(n / 3));
    let ne = rng.gen_range(1..=1.max(n / 3));
    let goal: Vec<usize> = candidates.iter().copied().take(ng).collect();
    candidates.shuffle(rng);
    let evidence: Vec<usize> = candidates.iter().copied().take(ne).collect();
    b.label("goal", goal).label("evidence", evidence);
    if cfg.colors.is_some() {
        for s in 0..n {
            b.color(s, format!("c{}", palette[s]));
        }
    }
    b.build_unchecked()
}

/// `goal` and `evidence` of a generated model.
pub fn labels(m: &Mdp) -> Result<(StateSet, StateSet), Error> {
    Ok((m.label_set("goal")?, m.label_set("evidence")?))
}

/// Probabilities used by the generator are all of this form.
pub fn small_denominator(p: &Rational) -> bool {
    p.denom() <= &8.into()
}
