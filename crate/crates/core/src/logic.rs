//! Epistemic formulas over the common ground.
//!
//! Formulas are finite trees built from atoms, the agent-indexed modalities
//! `K` (knows), `L` (believes), and `P` (perceives), negation, conjunction,
//! public announcement `[phi!]psi`, necessity, and the reflexive-transitive
//! perception closure used when a scene is first presented. Formulas are
//! plain values with a total order so they can live in sorted sets and
//! serialize with a stable layout.

use std::fmt;

use serde::{Deserialize, Serialize};

/// The two interlocutors of an EMRE scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    /// The virtual avatar performing the referring expression.
    Avatar,
    /// The human observer (the annotator stands in for this role).
    Observer,
}

impl AgentRole {
    pub const BOTH: [AgentRole; 2] = [AgentRole::Avatar, AgentRole::Observer];

    pub fn short(self) -> &'static str {
        match self {
            AgentRole::Avatar => "a",
            AgentRole::Observer => "h",
        }
    }
}

/// A term position inside an atom: either the referent variable of a parsed
/// expression or a concrete scene entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Var(String),
    Entity(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Entity(e) => write!(f, "{e}"),
        }
    }
}

/// A pointing direction. Components are kept NaN-free so atoms stay totally
/// ordered and hashable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dir(pub [ordered_float::NotNan<f64>; 3]);

impl Dir {
    pub fn new(v: [f64; 3]) -> crate::error::Result<Self> {
        let mk = |x: f64| {
            ordered_float::NotNan::new(x)
                .map_err(|_| crate::error::Error::Formula("NaN in direction vector".into()))
        };
        Ok(Dir([mk(v[0])?, mk(v[1])?, mk(v[2])?]))
    }

    pub fn as_array(&self) -> [f64; 3] {
        [
            self.0[0].into_inner(),
            self.0[1].into_inner(),
            self.0[2].into_inner(),
        ]
    }
}

/// Atomic propositional content.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// The empty conjunction.
    Top,
    /// A bare object term: `b` is among the jointly perceived entities.
    Object(String),
    /// `b` has been raised to target status.
    Target(String),
    /// A deictic point along `direction` at `object`.
    Points { direction: Dir, object: String },
    /// The interpretation of a content term under the current lexicon and
    /// ground; compared by term identity.
    TermMeaning { term: String },
    /// Two entities are distinct.
    Distinct(String, String),
    /// The near region of the table surface is meaningfully distinguished
    /// from the far region.
    NearFarDistinct,
    /// `attribute` predicates over `subject`.
    AttrHolds { attribute: String, subject: Term },
    /// `subject` is a `noun`.
    Head { noun: String, subject: Term },
    /// `subject` stands in `relation` to `relatum` from `viewer`'s frame.
    Spatial {
        relation: String,
        subject: Term,
        relatum: String,
        viewer: AgentRole,
    },
}

/// A formula over the common ground.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposition {
    Atom(Atom),
    /// `K_agent phi`
    Knows(AgentRole, Box<Proposition>),
    /// `L_agent phi`
    Believes(AgentRole, Box<Proposition>),
    /// `P_agent phi`
    Perceives(AgentRole, Box<Proposition>),
    Not(Box<Proposition>),
    And(Box<Proposition>, Box<Proposition>),
    /// `[phi!]psi` — after `phi` is publicly announced, `psi` holds.
    Announce(Box<Proposition>, Box<Proposition>),
    /// `[]phi`
    Necessarily(Box<Proposition>),
    /// `[(P_x u P_y)*]phi` — perception closed over the listed agents.
    PerceptionClosure(Vec<AgentRole>, Box<Proposition>),
}

impl Proposition {
    pub fn object(label: impl Into<String>) -> Self {
        Proposition::Atom(Atom::Object(label.into()))
    }

    pub fn target(label: impl Into<String>) -> Self {
        Proposition::Atom(Atom::Target(label.into()))
    }

    pub fn term_meaning(term: impl Into<String>) -> Self {
        Proposition::Atom(Atom::TermMeaning { term: term.into() })
    }

    pub fn knows(agent: AgentRole, inner: Proposition) -> Self {
        Proposition::Knows(agent, Box::new(inner))
    }

    pub fn believes(agent: AgentRole, inner: Proposition) -> Self {
        Proposition::Believes(agent, Box::new(inner))
    }

    pub fn perceives(agent: AgentRole, inner: Proposition) -> Self {
        Proposition::Perceives(agent, Box::new(inner))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Proposition) -> Self {
        Proposition::Not(Box::new(inner))
    }

    pub fn and(a: Proposition, b: Proposition) -> Self {
        Proposition::And(Box::new(a), Box::new(b))
    }

    pub fn announce(content: Proposition, result: Proposition) -> Self {
        Proposition::Announce(Box::new(content), Box::new(result))
    }

    pub fn necessarily(inner: Proposition) -> Self {
        Proposition::Necessarily(Box::new(inner))
    }

    /// Right-folded conjunction; `Top` when the list is empty.
    pub fn conjoin(mut parts: Vec<Proposition>) -> Self {
        match parts.len() {
            0 => Proposition::Atom(Atom::Top),
            1 => parts.remove(0),
            _ => {
                let mut acc = parts.pop().unwrap();
                while let Some(p) = parts.pop() {
                    acc = Proposition::and(p, acc);
                }
                acc
            }
        }
    }

    /// The modal agent of the outermost connective, if it is K/L/P.
    pub fn outer_agent(&self) -> Option<AgentRole> {
        match self {
            Proposition::Knows(a, _)
            | Proposition::Believes(a, _)
            | Proposition::Perceives(a, _) => Some(*a),
            _ => None,
        }
    }

    /// All object labels occurring in the formula.
    pub fn referenced_objects(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_objects(&mut out);
        out
    }

    fn collect_objects<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Proposition::Atom(atom) => match atom {
                Atom::Top | Atom::NearFarDistinct => {}
                Atom::Object(b) | Atom::Target(b) => out.push(b),
                Atom::Points { object, .. } => out.push(object),
                Atom::TermMeaning { .. } => {}
                Atom::Distinct(b1, b2) => {
                    out.push(b1);
                    out.push(b2);
                }
                Atom::AttrHolds { subject, .. } | Atom::Head { subject, .. } => {
                    if let Term::Entity(e) = subject {
                        out.push(e);
                    }
                }
                Atom::Spatial {
                    subject, relatum, ..
                } => {
                    if let Term::Entity(e) = subject {
                        out.push(e);
                    }
                    out.push(relatum);
                }
            },
            Proposition::Knows(_, p)
            | Proposition::Believes(_, p)
            | Proposition::Perceives(_, p)
            | Proposition::Not(p)
            | Proposition::Necessarily(p)
            | Proposition::PerceptionClosure(_, p) => p.collect_objects(out),
            Proposition::And(a, b) | Proposition::Announce(a, b) => {
                a.collect_objects(out);
                b.collect_objects(out);
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Top => write!(f, "top"),
            Atom::Object(b) => write!(f, "{b}"),
            Atom::Target(b) => write!(f, "target({b})"),
            Atom::Points { object, .. } => write!(f, "point({object})"),
            Atom::TermMeaning { term } => write!(f, "[[{term}]]"),
            Atom::Distinct(b1, b2) => write!(f, "{b1} != {b2}"),
            Atom::NearFarDistinct => write!(f, "near(sfc) != far(sfc)"),
            Atom::AttrHolds { attribute, subject } => write!(f, "{attribute}({subject})"),
            Atom::Head { noun, subject } => write!(f, "{noun}({subject})"),
            Atom::Spatial {
                relation,
                subject,
                relatum,
                viewer,
            } => {
                write!(f, "{relation}({subject},{relatum},{})", viewer.short())
            }
        }
    }
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proposition::Atom(a) => write!(f, "{a}"),
            Proposition::Knows(agent, p) => write!(f, "K_{}({p})", agent.short()),
            Proposition::Believes(agent, p) => write!(f, "L_{}({p})", agent.short()),
            Proposition::Perceives(agent, p) => write!(f, "P_{}({p})", agent.short()),
            Proposition::Not(p) => write!(f, "not({p})"),
            Proposition::And(a, b) => write!(f, "({a} & {b})"),
            Proposition::Announce(a, b) => write!(f, "[{a}!]{b}"),
            Proposition::Necessarily(p) => write!(f, "box({p})"),
            Proposition::PerceptionClosure(agents, p) => {
                let list: Vec<&str> = agents.iter().map(|a| a.short()).collect();
                write!(f, "[(P_{{{}}})*]{p}", list.join(" u "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjoin_handles_empty_and_nested() {
        assert_eq!(Proposition::conjoin(vec![]), Proposition::Atom(Atom::Top));
        let p = Proposition::target("r1");
        assert_eq!(Proposition::conjoin(vec![p.clone()]), p);
        let three = Proposition::conjoin(vec![
            Proposition::object("a"),
            Proposition::object("b"),
            Proposition::object("c"),
        ]);
        assert_eq!(three.to_string(), "(a & (b & c))".to_string());
    }

    #[test]
    fn display_matches_conventions() {
        let p = Proposition::knows(
            AgentRole::Observer,
            Proposition::perceives(AgentRole::Avatar, Proposition::object("Cup")),
        );
        assert_eq!(p.to_string(), "K_h(P_a(Cup))");
        let nb = Proposition::not(Proposition::necessarily(Proposition::knows(
            AgentRole::Observer,
            Proposition::knows(AgentRole::Avatar, Proposition::target("r1")),
        )));
        assert_eq!(nb.to_string(), "not(box(K_h(K_a(target(r1)))))");
    }

    #[test]
    fn ordering_is_total_and_stable() {
        let mut set = std::collections::BTreeSet::new();
        set.insert(Proposition::object("b"));
        set.insert(Proposition::object("a"));
        set.insert(Proposition::object("b"));
        assert_eq!(set.len(), 2);
    }
}
