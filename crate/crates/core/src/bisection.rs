//! Optimal conditional probabilities by bisection over the threshold.
//!
//! Every probe decides the sign of `V(λ)` for one candidate `λ` and moves
//! one end of the interval `[ℓ, u]` that contains the optimum. Variants:
//!
//! * `std`: midpoint candidates, standard update.
//! * `adv`: additionally tightens both ends with the evidence extremes.
//! * `pt-std` / `pt-adv`: stop as soon as the witnesses behind `ℓ` and `u`
//!   coincide; that policy is then optimal and its value is returned.
//! * `stern-brocot`: always mixes simplest-rational and midpoint candidates.
//!
//! With `ε = 0` in exact arithmetic every variant uses the mixed candidate
//! rule, which hits the optimum (a rational) after finitely many probes.

use std::fmt;

use num_traits::{One, Zero};

use crate::conditional::{
    agrees_on_reachable, build_transform, check_defined, evaluate_policy, min_edge_case, ConditionalPolicy, Query,
    TransformArtifacts,
};
use crate::rational::{format_rational, simplest_in, to_f64, Rational};
use crate::{Direction, Error, Mdp, Mode, Scalar, Sign};

/// Probes allowed in float mode before giving up on exact termination.
const FLOAT_PROBE_CAP: usize = 200;
/// Safety guard for exact mode; never reached by a correct run.
const EXACT_PROBE_GUARD: usize = 100_000;
/// Consecutive midpoints after which the simplest rational is forced.
const MAX_MIDPOINTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Std,
    Adv,
    PtStd,
    PtAdv,
    SternBrocot,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Std, Variant::Adv, Variant::PtStd, Variant::PtAdv, Variant::SternBrocot];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Std => "std",
            Variant::Adv => "adv",
            Variant::PtStd => "pt-std",
            Variant::PtAdv => "pt-adv",
            Variant::SternBrocot => "stern-brocot",
        }
    }

    pub fn tracks_policies(self) -> bool {
        matches!(self, Variant::PtStd | Variant::PtAdv)
    }

    pub fn advanced_bounds(self) -> bool {
        matches!(self, Variant::Adv | Variant::PtAdv)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "std" => Variant::Std,
            "adv" => Variant::Adv,
            "pt-std" => Variant::PtStd,
            "pt-adv" => Variant::PtAdv,
            "stern-brocot" | "sb" => Variant::SternBrocot,
            _ => return Err(Error::InvalidArgument(format!("unknown variant '{s}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BisectionConfig {
    pub variant: Variant,
    pub epsilon: Rational,
    pub mode: Mode,
}

impl BisectionConfig {
    pub fn new(variant: Variant, epsilon: Rational, mode: Mode) -> Self {
        BisectionConfig { variant, epsilon, mode }
    }

    /// Exact optimum with the given variant.
    pub fn exact(variant: Variant) -> Self {
        BisectionConfig::new(variant, Rational::zero(), Mode::Exact)
    }

    fn validate(&self) -> Result<(), Error> {
        if self.epsilon < Rational::zero() || self.epsilon > Rational::one() {
            return Err(Error::InvalidArgument("epsilon must lie in [0,1]".into()));
        }
        if self.epsilon.is_zero()
            && !self.mode.is_exact()
            && !self.variant.tracks_policies()
            && self.variant != Variant::SternBrocot
        {
            return Err(Error::InvalidArgument(format!(
                "epsilon = 0 needs exact arithmetic or a variant with exact termination (got {} in {} mode)",
                self.variant,
                self.mode.name()
            )));
        }
        Ok(())
    }

    /// Whether candidates mix simplest rationals with midpoints.
    fn mixes(&self) -> bool {
        self.variant == Variant::SternBrocot || self.epsilon.is_zero()
    }
}

/// How a candidate was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pick {
    Midpoint,
    Simplest,
}

/// One probe of the bisection loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub lambda: Rational,
    pub pick: Pick,
    pub sign: Sign,
    pub value: f64,
    /// Interval after the update.
    pub lower: Rational,
    pub upper: Rational,
}

/// Interval and witnesses maintained by the loop.
#[derive(Clone, Debug)]
pub struct BisectionState {
    pub lower: Rational,
    pub upper: Rational,
    pub lower_witness: Option<ConditionalPolicy>,
    pub upper_witness: Option<ConditionalPolicy>,
    pub iterations: usize,
    /// Extreme evidence weights, for the advanced bounds.
    pub evidence_min: Option<Rational>,
    pub evidence_max: Option<Rational>,
    probed: Vec<Rational>,
    midpoints_in_row: usize,
}

impl Default for BisectionState {
    fn default() -> Self {
        BisectionState::new()
    }
}

impl BisectionState {
    pub fn new() -> Self {
        BisectionState {
            lower: Rational::zero(),
            upper: Rational::one(),
            lower_witness: None,
            upper_witness: None,
            iterations: 0,
            evidence_min: None,
            evidence_max: None,
            probed: Vec::new(),
            midpoints_in_row: 0,
        }
    }

    pub fn width(&self) -> Rational {
        &self.upper - &self.lower
    }

    fn was_probed(&self, x: &Rational) -> bool {
        self.probed.contains(x)
    }

    /// Standard update: a positive sign moves `ℓ`, a negative one `u`, zero
    /// collapses the interval.
    pub fn update_standard(&mut self, lambda: &Rational, sign: Sign) {
        match sign {
            Sign::Positive => {
                if *lambda > self.lower {
                    self.lower = lambda.clone();
                }
            }
            Sign::Negative => {
                if *lambda < self.upper {
                    self.upper = lambda.clone();
                }
            }
            Sign::Zero => {
                self.lower = lambda.clone();
                self.upper = lambda.clone();
            }
        }
    }

    /// Next candidate; mixes simplest rationals in when `mix` is set.
    fn candidate(&mut self, mix: bool) -> (Rational, Pick) {
        if !mix {
            return (candidate_midpoint(&self.lower, &self.upper), Pick::Midpoint);
        }
        let simplest =
            simplest_in(&self.lower, !self.was_probed(&self.lower), &self.upper, !self.was_probed(&self.upper));
        let quarter = self.width() / Rational::from_integer(4.into());
        let in_middle = simplest >= &self.lower + &quarter && simplest <= &self.upper - &quarter;
        if in_middle || self.midpoints_in_row >= MAX_MIDPOINTS || self.lower == self.upper {
            self.midpoints_in_row = 0;
            (simplest, Pick::Simplest)
        } else {
            self.midpoints_in_row += 1;
            (candidate_midpoint(&self.lower, &self.upper), Pick::Midpoint)
        }
    }
}

/// `(ℓ+u)/2`.
pub fn candidate_midpoint(lower: &Rational, upper: &Rational) -> Rational {
    (lower + upper) / Rational::from_integer(2.into())
}

/// Rational with the smallest denominator in `[ℓ, u]`.
pub fn candidate_min_denominator(lower: &Rational, upper: &Rational) -> Rational {
    simplest_in(lower, true, upper, true)
}

/// Tightens `[ℓ, u]` from `V(λ)` and the extreme evidence weights
/// `pmin ≤ pmax`. A side whose divisor is zero keeps the standard update.
/// Bounds only ever move inwards and stay within `[0, 1]`.
pub fn update_bounds_advanced(
    state: &mut BisectionState,
    lambda: &Rational,
    value: &Rational,
    pmin: &Rational,
    pmax: &Rational,
) {
    let sign = if value.is_zero() {
        Sign::Zero
    } else if *value > Rational::zero() {
        Sign::Positive
    } else {
        Sign::Negative
    };
    state.update_standard(lambda, sign);
    let through = |p: &Rational| -> Option<Rational> {
        if p.is_zero() {
            None
        } else {
            Some(clamp01(lambda + value / p))
        }
    };
    let (lo, hi) =
        if *value >= Rational::zero() { (through(pmax), through(pmin)) } else { (through(pmin), through(pmax)) };
    if let Some(lo) = lo {
        if lo > state.lower {
            state.lower = lo;
        }
    }
    if let Some(hi) = hi {
        if hi < state.upper {
            state.upper = hi;
        }
    }
    if state.lower > state.upper {
        // Only possible through rounding in float mode.
        let mid = candidate_midpoint(&state.lower, &state.upper);
        state.lower = mid.clone();
        state.upper = mid;
    }
}

fn clamp01(x: Rational) -> Rational {
    if x < Rational::zero() {
        Rational::zero()
    } else if x > Rational::one() {
        Rational::one()
    } else {
        x
    }
}

/// If the witnesses behind both ends agree on every reachable product
/// state, their common policy is optimal; returns its value.
pub fn policy_tracking_check<T: Scalar>(t: &TransformArtifacts<T>, state: &BisectionState) -> Result<Option<T>, Error> {
    let (Some(a), Some(b)) = (&state.lower_witness, &state.upper_witness) else {
        return Ok(None);
    };
    if !agrees_on_reachable(&t.original, a, b, &t.goal, &t.evidence) {
        return Ok(None);
    }
    evaluate_policy::<T>(&t.original, a, &t.goal, &t.evidence).map(Some)
}

/// Result of an optimisation run.
#[derive(Clone, Debug, PartialEq)]
pub enum Estimate {
    /// The optimum itself (exact arithmetic), or a float value claimed exact
    /// by a zero probe or by policy tracking.
    Exact(Rational),
    /// `value` is within `ε` of the optimum, which lies in `[lower, upper]`.
    Approx { value: Rational, lower: Rational, upper: Rational },
}

impl Estimate {
    pub fn value(&self) -> &Rational {
        match self {
            Estimate::Exact(v) => v,
            Estimate::Approx { value, .. } => value,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Estimate::Exact(_))
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimate::Exact(v) => write!(f, "{}", format_rational(v)),
            Estimate::Approx { value, lower, upper } => {
                write!(f, "{} in [{}, {}]", to_f64(value), format_rational(lower), format_rational(upper))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimum {
    pub estimate: Estimate,
    /// Policy attaining (or approaching from the right side) the optimum.
    pub witness: Option<ConditionalPolicy>,
    /// Number of probes.
    pub iterations: usize,
    pub trace: Vec<Probe>,
}

/// Optimal `Pr(◇G | ◇E)` in the direction of `q`.
pub fn optimize(m: &Mdp, q: &Query, cfg: &BisectionConfig) -> Result<Optimum, Error> {
    cfg.validate()?;
    if !check_defined(m, &q.evidence) {
        return Err(Error::Undefined);
    }
    if cfg.mode.is_exact() {
        optimize_artifacts(&build_transform::<Rational>(m, q)?, cfg)
    } else {
        optimize_artifacts(&build_transform::<f64>(m, q)?, cfg)
    }
}

/// Bisection on prebuilt artifacts; only `R^λ` changes between probes.
pub fn optimize_artifacts<T: Scalar>(t: &TransformArtifacts<T>, cfg: &BisectionConfig) -> Result<Optimum, Error> {
    cfg.validate()?;
    if let Some(v) = min_edge_case(t) {
        let w = t.threshold(&Rational::zero())?.witness;
        return Ok(Optimum { estimate: Estimate::Exact(v), witness: Some(w), iterations: 0, trace: Vec::new() });
    }
    let mut st = BisectionState::new();
    if cfg.variant.advanced_bounds() {
        let (lo, hi) = t.evidence_extremes()?;
        st.evidence_min = Some(lo.to_rational());
        st.evidence_max = Some(hi.to_rational());
    }
    let cap = if T::EXACT { EXACT_PROBE_GUARD } else { FLOAT_PROBE_CAP };
    let mix = cfg.mixes();
    let mut trace = Vec::new();
    let approx = |st: &BisectionState| Estimate::Approx {
        value: candidate_midpoint(&st.lower, &st.upper),
        lower: st.lower.clone(),
        upper: st.upper.clone(),
    };
    let keep_going = |st: &BisectionState| {
        if cfg.epsilon.is_zero() {
            st.lower < st.upper
        } else {
            st.width() / Rational::from_integer(2.into()) > cfg.epsilon
        }
    };

    while keep_going(&st) {
        if st.iterations >= cap {
            if T::EXACT {
                return Err(Error::Internal("bisection did not terminate".into()));
            }
            let witness = preferred(t.direction, &st);
            return Ok(Optimum { estimate: approx(&st), witness, iterations: st.iterations, trace });
        }
        let (lambda, pick) = st.candidate(mix);
        let out = t.threshold(&lambda)?;
        st.iterations += 1;
        st.probed.push(lambda.clone());
        let sign = out.sign;
        match sign {
            Sign::Positive => st.lower_witness = Some(out.witness.clone()),
            Sign::Negative => st.upper_witness = Some(out.witness.clone()),
            Sign::Zero => {}
        }
        if sign != Sign::Zero && cfg.variant.advanced_bounds() {
            let v = out.value.to_rational();
            let (pmin, pmax) = (st.evidence_min.clone().unwrap(), st.evidence_max.clone().unwrap());
            if T::EXACT {
                update_bounds_advanced(&mut st, &lambda, &v, &pmin, &pmax);
            } else {
                // Keep the float bounds conservative by the sign tolerance.
                let mut tmp = st.clone();
                update_bounds_advanced(&mut tmp, &lambda, &v, &pmin, &pmax);
                let slack = crate::rational::from_f64(t.sign_tolerance);
                st.update_standard(&lambda, sign);
                let lo = clamp01(&tmp.lower - &slack);
                let hi = clamp01(&tmp.upper + &slack);
                if lo > st.lower {
                    st.lower = lo;
                }
                if hi < st.upper {
                    st.upper = hi;
                }
            }
        } else {
            st.update_standard(&lambda, sign);
        }
        trace.push(Probe {
            lambda: lambda.clone(),
            pick,
            sign,
            value: out.value.to_f64(),
            lower: st.lower.clone(),
            upper: st.upper.clone(),
        });
        if sign == Sign::Zero {
            return Ok(Optimum {
                estimate: Estimate::Exact(lambda),
                witness: Some(out.witness),
                iterations: st.iterations,
                trace,
            });
        }
        if cfg.variant.tracks_policies() {
            if let Some(v) = policy_tracking_check(t, &st)? {
                return Ok(Optimum {
                    estimate: Estimate::Exact(v.to_rational()),
                    witness: st.lower_witness.clone(),
                    iterations: st.iterations,
                    trace,
                });
            }
        }
    }
    let witness = preferred(t.direction, &st);
    let estimate = if st.lower == st.upper { Estimate::Exact(st.lower.clone()) } else { approx(&st) };
    Ok(Optimum { estimate, witness, iterations: st.iterations, trace })
}

/// Witness on the optimal side of the interval: for maximisation the one
/// proving `ℓ`, for minimisation the one proving `u`.
fn preferred(dir: Direction, st: &BisectionState) -> Option<ConditionalPolicy> {
    match dir {
        Direction::Max => st.lower_witness.clone().or_else(|| st.upper_witness.clone()),
        Direction::Min => st.upper_witness.clone().or_else(|| st.lower_witness.clone()),
    }
}

/// `⌈log2(1/(2ε))⌉`, the probe bound of the standard variant.
pub fn standard_probe_bound(epsilon: &Rational) -> usize {
    let mut k = 0;
    let mut width = Rational::one();
    let two = Rational::from_integer(2.into());
    while &width / &two > *epsilon {
        width /= &two;
        k += 1;
    }
    k
}
