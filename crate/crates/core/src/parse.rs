//! Line-oriented model format.
//!
//! ```text
//! @type mdp
//! @states 2
//! @initial 0
//! @label goal: 1
//! @color 0 red
//! 0 go : 1=1/2 0=0.5
//! 1 stay : 1=1
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use num_traits::Signed;
use thiserror::Error;

use crate::model::{validate, Mdp, MdpBuilder, ValidationError, Violation};
use crate::rational::parse_rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {violation}")]
    Invalid { line: usize, violation: Violation },
    #[error(transparent)]
    Model(#[from] ValidationError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, message: message.into() }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<Mdp, ParseError> {
    let mut saw_type = false;
    let mut builder: Option<MdpBuilder> = None;
    let mut initial: Option<usize> = None;
    let mut seen_actions: HashSet<(usize, String)> = HashSet::new();
    let mut pending_labels: Vec<(usize, String, Vec<usize>)> = Vec::new();
    let mut pending_colors: Vec<(usize, usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_type {
            let mut toks = content.split_whitespace();
            if toks.next() != Some("@type") {
                return Err(syntax(line, "expected '@type mdp' first"));
            }
            match toks.next() {
                Some("mdp") if toks.next().is_none() => saw_type = true,
                _ => return Err(syntax(line, "only '@type mdp' is supported")),
            }
            continue;
        }
        if let Some(rest) = content.strip_prefix('@') {
            let (key, args) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let args = args.trim();
            match key {
                "states" => {
                    if builder.is_some() {
                        return Err(syntax(line, "duplicate '@states'"));
                    }
                    let n: usize = args.parse().map_err(|_| syntax(line, format!("bad state count '{args}'")))?;
                    builder = Some(MdpBuilder::new(n));
                }
                "initial" => {
                    let i: usize = args.parse().map_err(|_| syntax(line, format!("bad initial state '{args}'")))?;
                    initial = Some(i);
                }
                "label" => {
                    let (name, members) =
                        args.split_once(':').ok_or_else(|| syntax(line, "expected '@label <name>: <states>'"))?;
                    let name = name.trim();
                    if name.is_empty() || name.contains(char::is_whitespace) {
                        return Err(syntax(line, format!("bad label name '{name}'")));
                    }
                    let mut states = Vec::new();
                    for tok in members.split_whitespace() {
                        states.push(tok.parse().map_err(|_| syntax(line, format!("bad state index '{tok}'")))?);
                    }
                    pending_labels.push((line, name.to_string(), states));
                }
                "color" => {
                    let toks: Vec<&str> = args.split_whitespace().collect();
                    if toks.len() != 2 {
                        return Err(syntax(line, "expected '@color <state> <color>'"));
                    }
                    let s: usize =
                        toks[0].parse().map_err(|_| syntax(line, format!("bad state index '{}'", toks[0])))?;
                    pending_colors.push((line, s, toks[1].to_string()));
                }
                "type" => return Err(syntax(line, "duplicate '@type'")),
                other => return Err(syntax(line, format!("unknown directive '@{other}'"))),
            }
            continue;
        }
        let b = builder.as_mut().ok_or_else(|| syntax(line, "transition before '@states'"))?;
        let (head, body) = content.split_once(':').ok_or_else(|| syntax(line, "expected '<state> <action> : ...'"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        if head.len() != 2 {
            return Err(syntax(line, "expected '<state> <action>' before ':'"));
        }
        let s: usize = head[0].parse().map_err(|_| syntax(line, format!("bad state index '{}'", head[0])))?;
        let name = head[1].to_string();
        if s >= b.num_states() {
            return Err(ParseError::Invalid {
                line,
                violation: Violation::DanglingSuccessor { state: s, action: name, successor: s },
            });
        }
        if !seen_actions.insert((s, name.clone())) {
            return Err(syntax(line, format!("duplicate action '{name}' at state {s}")));
        }
        let mut dist = Vec::new();
        let mut targets = BTreeSet::new();
        let mut sum = crate::Rational::from_integer(0.into());
        for tok in body.split_whitespace() {
            let (t, p) =
                tok.split_once('=').ok_or_else(|| syntax(line, format!("expected '<succ>=<prob>', got '{tok}'")))?;
            let t: usize = t.parse().map_err(|_| syntax(line, format!("bad successor '{t}'")))?;
            let p = parse_rational(p).map_err(|e| syntax(line, e))?;
            if t >= b.num_states() {
                return Err(ParseError::Invalid {
                    line,
                    violation: Violation::DanglingSuccessor { state: s, action: name, successor: t },
                });
            }
            if !p.is_positive() || p > crate::Rational::from_integer(1.into()) {
                return Err(ParseError::Invalid {
                    line,
                    violation: Violation::BadProbability { state: s, action: name, prob: p.to_string() },
                });
            }
            if !targets.insert(t) {
                return Err(syntax(line, format!("duplicate successor {t}")));
            }
            sum += &p;
            dist.push((t, p));
        }
        if dist.is_empty() {
            return Err(syntax(line, "empty distribution"));
        }
        if sum != crate::Rational::from_integer(1.into()) {
            return Err(ParseError::Invalid {
                line,
                violation: Violation::BadSum { state: s, action: name, sum: sum.to_string() },
            });
        }
        b.action(s, name, dist);
    }

    if !saw_type {
        return Err(syntax(1, "empty document"));
    }
    let mut b = builder.ok_or_else(|| syntax(1, "missing '@states'"))?;
    let n = b.num_states();
    for (line, name, states) in pending_labels {
        if let Some(&bad) = states.iter().find(|&&i| i >= n) {
            return Err(ParseError::Invalid { line, violation: Violation::DanglingLabel { label: name, state: bad } });
        }
        b.label(name, states);
    }
    for (line, s, color) in pending_colors {
        if s >= n {
            return Err(ParseError::Invalid { line, violation: Violation::DanglingColor { state: s } });
        }
        b.color(s, color);
    }
    b.initial(initial.unwrap_or(0));
    let m = b.build_unchecked();
    validate(&m)?;
    Ok(m)
}

/// Serializes a model so that `parse_model` reproduces it.
pub fn to_text(m: &Mdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@type mdp");
    let _ = writeln!(out, "@states {}", m.num_states());
    let _ = writeln!(out, "@initial {}", m.initial());
    for (name, set) in m.labels() {
        let members: Vec<String> = set.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "@label {name}: {}", members.join(" "));
    }
    for (s, c) in m.colors() {
        let _ = writeln!(out, "@color {s} {c}");
    }
    for s in m.states() {
        for c in m.actions(s) {
            let dist: Vec<String> = c.dist.iter().map(|(t, p)| format!("{t}={p}")).collect();
            let _ = writeln!(out, "{s} {} : {}", c.name, dist.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    const M2: &str = "\
@type mdp
@states 6
@initial 0
@label goal: 3
@label evidence: 4 5
# s1..s6 are 0..5
0 alpha : 1=1/2 2=1/2
0 beta : 3=1
1 alpha : 2=1
1 beta : 4=1/2 1=1/2
2 alpha : 2=1
2 beta : 4=2/3 5=1/3
3 loop : 3=1
4 a : 3=2/3 5=1/3
5 loop : 5=1
";

    #[test]
    fn parses_fixture() {
        let m = parse_model(M2).unwrap();
        assert_eq!(m.num_states(), 6);
        for s in 0..3 {
            assert_eq!(m.actions(s).len(), 2);
        }
        assert_eq!(m.label("evidence").unwrap().iter().collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(m.action(2, 1).prob_to(4), rat(2, 3));
    }

    #[test]
    fn minimal_model() {
        let m = parse_model("@type mdp\n@states 1\n@initial 0\n0 a : 0=1\n").unwrap();
        assert_eq!(m.num_states(), 1);
    }

    #[test]
    fn decimal_literals_exact() {
        let m = parse_model("@type mdp\n@states 2\n0 a : 0=0.5 1=0.5\n1 b : 1=1.0\n").unwrap();
        assert_eq!(m.action(0, 0).prob_to(1), rat(1, 2));
    }

    #[test]
    fn sum_error_with_line() {
        let err =
            parse_model("@type mdp\n@states 3\n@initial 0\n0 a : 1=1/3 2=1/3\n1 b : 1=1\n2 c : 2=1\n").unwrap_err();
        match err {
            ParseError::Invalid { line: 4, violation: Violation::BadSum { .. } } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_errors() {
        let dangling = parse_model("@type mdp\n@states 1\n0 a : 3=1\n").unwrap_err();
        assert!(matches!(dangling, ParseError::Invalid { line: 3, violation: Violation::DanglingSuccessor { .. } }));
        let no_actions = parse_model("@type mdp\n@states 2\n0 a : 0=1\n").unwrap_err();
        assert!(no_actions.to_string().contains("state without actions: 1"));
        assert!(matches!(parse_model("@states 1\n"), Err(ParseError::Syntax { line: 1, .. })));
        assert!(matches!(parse_model("@type mdp\n@states 1\n0 a : 0=x\n"), Err(ParseError::Syntax { line: 3, .. })));
        assert!(matches!(
            parse_model("@type mdp\n@states 1\n0 a : 0=1\n0 a : 0=1\n"),
            Err(ParseError::Syntax { line: 4, .. })
        ));
    }

    #[test]
    fn round_trip() {
        let m = parse_model(M2).unwrap();
        let again = parse_model(&to_text(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn colors_parse() {
        let m = parse_model("@type mdp\n@states 2\n@color 0 red\n@color 1 red\n0 a : 1=1\n1 a : 1=1\n").unwrap();
        assert_eq!(m.colors().len(), 2);
    }
}
