//! The common-ground state and its update operations.
//!
//! A `CommonGroundState` holds the two agents (A), the shared belief space
//! Delta (B), the jointly perceived entities and relations (P), and the
//! embedding space (E). States are immutable values: every update returns a
//! new state, the belief space only ever grows, and the scene timeline runs
//! through three fixed timesteps:
//!
//! * `t0` — the scene is presented and perception is closed over both agents,
//! * `t1` — one object is raised to target status,
//! * `t2` — the avatar performs a communicative act (gesture, speech, or both).
//!
//! `holds` is a syntactic check: a formula holds when it is stored in Delta,
//! is a perception fact recoverable from P, or decomposes into such by
//! conjunction/negation. There is no possible-worlds search; the single
//! necessity formula produced at `t1` is stored verbatim and recognized by
//! membership.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{AgentRole, Atom, Dir, Proposition, Term};
use crate::names::{label_color, label_noun};
use crate::parser::CommunicativeAct;

/// Seconds at which the scene presentation, the target circle, and the
/// communicative act occur.
pub const TIME_OFFSETS: [f64; 3] = [0.0, 1.5, 3.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    T0,
    T1,
    T2,
}

impl TimeStep {
    pub fn offset_seconds(self) -> f64 {
        TIME_OFFSETS[self as usize]
    }
}

/// One of the two interlocutors, with its fixed role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: String,
    pub role: AgentRole,
}

/// A jointly perceived scene object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub label: String,
    pub position: [f64; 3],
    pub attributes: BTreeSet<String>,
}

impl Entity {
    pub fn new(label: impl Into<String>, position: [f64; 3]) -> Self {
        let label = label.into();
        let attributes = label_color(&label).into_iter().collect();
        Entity {
            label,
            position,
            attributes,
        }
    }

    /// The head noun this entity answers to ("RedBlock1" -> "block").
    pub fn noun(&self) -> String {
        label_noun(&self.label)
    }
}

/// The embedding space occupied by the agents: the table surface extent and
/// the boundary splitting its near region from its far region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpace {
    pub surface_min: [f64; 2],
    pub surface_max: [f64; 2],
    pub near_far_boundary: f64,
}

impl Default for EmbeddingSpace {
    fn default() -> Self {
        EmbeddingSpace {
            surface_min: [-1.0, -1.0],
            surface_max: [1.0, 1.0],
            near_far_boundary: 0.0,
        }
    }
}

/// One update applied to the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub time: TimeStep,
    pub offset_seconds: f64,
    /// The update formula (announcements carry the announced content).
    pub formula: Proposition,
    /// Formulas this update added to Delta.
    pub added: BTreeSet<Proposition>,
}

/// The per-agent slices of the belief space: which Delta formulas are headed
/// by each agent's own modality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentViews {
    pub avatar: Vec<Proposition>,
    pub observer: Vec<Proposition>,
}

impl AgentViews {
    pub fn view(&self, agent: AgentRole) -> &[Proposition] {
        match agent {
            AgentRole::Avatar => &self.avatar,
            AgentRole::Observer => &self.observer,
        }
    }

    fn push(&mut self, agent: AgentRole, p: Proposition) {
        let list = match agent {
            AgentRole::Avatar => &mut self.avatar,
            AgentRole::Observer => &mut self.observer,
        };
        if !list.contains(&p) {
            list.push(p);
        }
    }

    /// The propositional content available to `agent`: the bodies of its own
    /// outer-modality formulas.
    pub fn content(&self, agent: AgentRole) -> Vec<&Proposition> {
        self.view(agent)
            .iter()
            .filter_map(|p| match p {
                Proposition::Knows(a, inner)
                | Proposition::Believes(a, inner)
                | Proposition::Perceives(a, inner)
                    if *a == agent =>
                {
                    Some(inner.as_ref())
                }
                _ => None,
            })
            .collect()
    }
}

/// The common-ground state monad: agents, belief space, jointly perceived
/// content, and embedding space, with the update timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonGroundState {
    pub agents: [Agent; 2],
    /// Delta — the shared belief space.
    pub delta: BTreeSet<Proposition>,
    /// P — jointly perceived entities, keyed by label.
    pub perceived: BTreeMap<String, Entity>,
    /// P — jointly perceived relation triples (relation, subject, relatum).
    pub relations: Vec<(String, String, String)>,
    /// E — the embedding space.
    pub space: EmbeddingSpace,
    pub per_agent_view: AgentViews,
    pub timeline: Vec<UpdateEvent>,
    pub clock: TimeStep,
}

/// Build the `t0` state: populate P with the scene and close perception over
/// both agents, so each knows the other perceives every object.
pub fn initialize_common_ground(
    scene: Vec<Entity>,
    relations: Vec<(String, String, String)>,
    space: EmbeddingSpace,
) -> Result<CommonGroundState> {
    let mut perceived = BTreeMap::new();
    for entity in scene {
        if perceived
            .insert(entity.label.clone(), entity.clone())
            .is_some()
        {
            return Err(Error::State(format!(
                "duplicate entity label {}",
                entity.label
            )));
        }
    }

    let mut delta = BTreeSet::new();
    let mut views = AgentViews::default();
    let mut object_atoms = Vec::new();
    for label in perceived.keys() {
        object_atoms.push(Proposition::object(label.clone()));
        for (knower, perceiver) in [
            (AgentRole::Observer, AgentRole::Avatar),
            (AgentRole::Avatar, AgentRole::Observer),
        ] {
            let fact = Proposition::knows(
                knower,
                Proposition::perceives(perceiver, Proposition::object(label.clone())),
            );
            delta.insert(fact.clone());
            views.push(knower, fact);
        }
    }

    let formula = Proposition::PerceptionClosure(
        vec![AgentRole::Observer, AgentRole::Avatar],
        Box::new(Proposition::conjoin(object_atoms)),
    );
    let event = UpdateEvent {
        time: TimeStep::T0,
        offset_seconds: TimeStep::T0.offset_seconds(),
        formula,
        added: delta.clone(),
    };

    Ok(CommonGroundState {
        agents: [
            Agent {
                id: "avatar".into(),
                role: AgentRole::Avatar,
            },
            Agent {
                id: "observer".into(),
                role: AgentRole::Observer,
            },
        ],
        delta,
        perceived,
        relations,
        space,
        per_agent_view: views,
        timeline: vec![event],
        clock: TimeStep::T0,
    })
}

impl CommonGroundState {
    fn insert(&mut self, p: Proposition) -> bool {
        let fresh = self.delta.insert(p.clone());
        if fresh {
            if let Some(agent) = p.outer_agent() {
                self.per_agent_view.push(agent, p);
            }
        }
        fresh
    }

    fn require_entity(&self, label: &str) -> Result<()> {
        if self.perceived.contains_key(label) {
            Ok(())
        } else {
            Err(Error::UnknownEntity(label.to_string()))
        }
    }

    /// Every object symbol in `p` must resolve against P.
    pub fn check_well_formed(&self, p: &Proposition) -> Result<()> {
        for label in p.referenced_objects() {
            self.require_entity(label)?;
        }
        Ok(())
    }

    /// `t1`: raise `target` to target status. The observer now knows which
    /// object is the target, without it being settled that the observer knows
    /// the avatar knows it too.
    pub fn mark_target(&self, target: &str) -> Result<CommonGroundState> {
        if self.clock != TimeStep::T0 {
            return Err(Error::State(format!(
                "mark_target requires clock t0, state is at {:?}",
                self.clock
            )));
        }
        self.require_entity(target)?;

        let mut next = self.clone();
        next.clock = TimeStep::T1;

        let known = Proposition::knows(AgentRole::Observer, Proposition::target(target));
        let unsettled = Proposition::not(Proposition::necessarily(Proposition::knows(
            AgentRole::Observer,
            Proposition::knows(AgentRole::Avatar, Proposition::target(target)),
        )));
        let mut added = BTreeSet::new();
        for p in [known.clone(), unsettled.clone()] {
            if next.insert(p.clone()) {
                added.insert(p);
            }
        }
        next.timeline.push(UpdateEvent {
            time: TimeStep::T1,
            offset_seconds: TimeStep::T1.offset_seconds(),
            formula: Proposition::and(known, unsettled),
            added,
        });
        Ok(next)
    }

    /// `t2`: apply a communicative act. Gesture applies before speech; each
    /// modality yields one event. A pointing gesture records that the observer
    /// knows the avatar can point and knows the target. Speech records, for
    /// every content term used, that the observer knows the avatar knows its
    /// meaning, plus the propositions the description itself introduces: the
    /// avatar's grasp of each spatial and attributive term, its perception of
    /// each relatum, the differentiation pair when "other" is used, and the
    /// near/far distinction when a pointing act accompanies "this".
    pub fn apply_act(
        &self,
        act: &CommunicativeAct,
    ) -> Result<(CommonGroundState, Vec<UpdateEvent>)> {
        if self.clock != TimeStep::T1 {
            return Err(Error::State(format!(
                "apply_act requires clock t1, state is at {:?}",
                self.clock
            )));
        }
        if act.speech.is_none() && act.gesture.is_none() {
            return Err(Error::MalformedAct(
                "act carries neither speech nor gesture".into(),
            ));
        }

        let mut next = self.clone();
        next.clock = TimeStep::T2;
        let mut events = Vec::new();

        if let Some(gesture) = &act.gesture {
            self.require_entity(&gesture.object)?;
            let point = Atom::Points {
                direction: Dir::new(gesture.direction)?,
                object: gesture.object.clone(),
            };
            let fact = Proposition::knows(
                AgentRole::Observer,
                Proposition::knows(
                    AgentRole::Avatar,
                    Proposition::and(
                        Proposition::Atom(point.clone()),
                        Proposition::target(gesture.object.clone()),
                    ),
                ),
            );
            let mut added = BTreeSet::new();
            if next.insert(fact.clone()) {
                added.insert(fact.clone());
            }
            events.push(UpdateEvent {
                time: TimeStep::T2,
                offset_seconds: TimeStep::T2.offset_seconds(),
                formula: Proposition::announce(Proposition::Atom(point), fact),
                added,
            });
        }

        if let Some(parse) = &act.speech {
            let mut introduced = Vec::new();

            for term in parse.content_terms() {
                introduced.push(Proposition::knows(
                    AgentRole::Observer,
                    Proposition::knows(AgentRole::Avatar, Proposition::term_meaning(term)),
                ));
            }
            for (relation, relatum) in &parse.spatial_pps {
                introduced.push(Proposition::knows(
                    AgentRole::Avatar,
                    Proposition::term_meaning(relation.clone()),
                ));
                if let Some(entity) = &relatum.resolved_entity {
                    self.require_entity(entity)?;
                    introduced.push(Proposition::perceives(
                        AgentRole::Avatar,
                        Proposition::object(entity.clone()),
                    ));
                }
            }
            for attribute in parse.all_attributes() {
                introduced.push(Proposition::knows(
                    AgentRole::Avatar,
                    Proposition::term_meaning(attribute),
                ));
            }
            if parse.other_flag {
                if let Some((b1, b2)) =
                    find_other_pair(&self.perceived, &parse.head, &parse.attributes)
                {
                    let attribute = parse.attributes[0].clone();
                    for entity in [&b1, &b2] {
                        introduced.push(Proposition::knows(
                            AgentRole::Avatar,
                            Proposition::Atom(Atom::AttrHolds {
                                attribute: attribute.clone(),
                                subject: Term::Entity(entity.clone()),
                            }),
                        ));
                    }
                    introduced.push(Proposition::knows(
                        AgentRole::Avatar,
                        Proposition::Atom(Atom::Distinct(b1, b2)),
                    ));
                }
            }
            if act.gesture.is_some() && parse.demonstrative == crate::parser::Demonstrative::This {
                introduced.push(Proposition::knows(
                    AgentRole::Avatar,
                    Proposition::Atom(Atom::NearFarDistinct),
                ));
            }

            let mut added = BTreeSet::new();
            for p in introduced.clone() {
                if next.insert(p.clone()) {
                    added.insert(p);
                }
            }
            let content = Proposition::conjoin(parse.logical_form(&self.perceived)?);
            events.push(UpdateEvent {
                time: TimeStep::T2,
                offset_seconds: TimeStep::T2.offset_seconds(),
                formula: Proposition::announce(content, Proposition::conjoin(introduced)),
                added,
            });
        }

        next.timeline.extend(events.clone());
        Ok((next, events))
    }

    /// Publicly announce `phi`: both agents come to know it. Announcing a
    /// formula both agents already know returns the state unchanged.
    pub fn announce(&self, phi: &Proposition) -> Result<CommonGroundState> {
        self.check_well_formed(phi)?;
        let facts: Vec<Proposition> = AgentRole::BOTH
            .iter()
            .map(|agent| Proposition::knows(*agent, phi.clone()))
            .collect();
        if facts.iter().all(|f| self.delta.contains(f)) {
            return Ok(self.clone());
        }

        let mut next = self.clone();
        let mut added = BTreeSet::new();
        for fact in &facts {
            if next.insert(fact.clone()) {
                added.insert(fact.clone());
            }
        }
        next.timeline.push(UpdateEvent {
            time: next.clock,
            offset_seconds: next.clock.offset_seconds(),
            formula: Proposition::announce(phi.clone(), Proposition::conjoin(facts)),
            added,
        });
        Ok(next)
    }

    /// Syntactic entailment: membership in Delta, perception facts recovered
    /// from P, and structural evaluation of conjunction and negation.
    pub fn holds(&self, phi: &Proposition) -> bool {
        if self.delta.contains(phi) {
            return true;
        }
        match phi {
            Proposition::Atom(atom) => self.atom_holds(atom),
            Proposition::And(a, b) => self.holds(a) && self.holds(b),
            Proposition::Not(inner) => !self.holds(inner),
            Proposition::Perceives(_, inner) => {
                // Everything in P is jointly perceived, so each agent
                // perceives it.
                match inner.as_ref() {
                    Proposition::Atom(atom) => self.atom_holds(atom),
                    _ => false,
                }
            }
            // Knowledge, belief, announcement, necessity, and closure
            // formulas are recognized by membership only.
            _ => false,
        }
    }

    fn atom_holds(&self, atom: &Atom) -> bool {
        if self.delta.contains(&Proposition::Atom(atom.clone())) {
            return true;
        }
        match atom {
            Atom::Top => true,
            Atom::Object(b) => self.perceived.contains_key(b),
            Atom::Distinct(b1, b2) => {
                b1 != b2 && self.perceived.contains_key(b1) && self.perceived.contains_key(b2)
            }
            Atom::AttrHolds {
                attribute,
                subject: Term::Entity(e),
            } => self
                .perceived
                .get(e)
                .is_some_and(|entity| entity.attributes.contains(attribute)),
            Atom::Head {
                noun,
                subject: Term::Entity(e),
            } => self
                .perceived
                .get(e)
                .is_some_and(|entity| entity.noun() == *noun),
            Atom::Spatial {
                relation,
                subject: Term::Entity(e),
                relatum,
                ..
            } => self
                .relations
                .iter()
                .any(|(r, s, o)| r == relation && s == e && o == relatum),
            _ => false,
        }
    }

    /// JSON rendering with stable key order (maps are sorted, struct fields
    /// fixed).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The differentiation pair for an "other"-marked description: the first two
/// scene entities (by label) matching the head noun and all listed
/// attributes. `None` when fewer than two match or no attribute is given.
pub fn find_other_pair(
    perceived: &BTreeMap<String, Entity>,
    head: &str,
    attributes: &[String],
) -> Option<(String, String)> {
    if attributes.is_empty() {
        return None;
    }
    let matches: Vec<&String> = perceived
        .values()
        .filter(|e| e.noun() == head && attributes.iter().all(|a| e.attributes.contains(a)))
        .map(|e| &e.label)
        .collect();
    if matches.len() >= 2 {
        Some((matches[0].clone(), matches[1].clone()))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{Demonstrative, Gesture};

    fn scene(labels: &[&str]) -> Vec<Entity> {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| Entity::new(*l, [i as f64 * 0.2, 0.0, 0.5]))
            .collect()
    }

    fn init(labels: &[&str]) -> CommonGroundState {
        initialize_common_ground(scene(labels), Vec::new(), EmbeddingSpace::default()).unwrap()
    }

    #[test]
    fn t0_closure_adds_cross_perception_knowledge() {
        let state = init(&["Cup"]);
        let kh = Proposition::knows(
            AgentRole::Observer,
            Proposition::perceives(AgentRole::Avatar, Proposition::object("Cup")),
        );
        let ka = Proposition::knows(
            AgentRole::Avatar,
            Proposition::perceives(AgentRole::Observer, Proposition::object("Cup")),
        );
        assert!(state.holds(&kh));
        assert!(state.holds(&ka));
        assert_eq!(state.clock, TimeStep::T0);
        assert_eq!(state.timeline.len(), 1);
        assert_eq!(state.timeline[0].offset_seconds, 0.0);
    }

    #[test]
    fn t0_empty_scene_has_no_perception_facts() {
        let state = init(&[]);
        assert!(state.perceived.is_empty());
        assert!(state.delta.is_empty());
        assert_eq!(state.timeline.len(), 1);
    }

    #[test]
    fn t0_ten_objects_yield_twenty_facts() {
        // Two agents x ten objects, counted by brute-force enumeration.
        let labels: Vec<String> = (0..10).map(|i| format!("Obj{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let state = init(&refs);
        let mut expected = 0;
        for _agent in AgentRole::BOTH {
            for _label in &labels {
                expected += 1;
            }
        }
        assert_eq!(expected, 20);
        assert_eq!(state.delta.len(), expected);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let entities = vec![
            Entity::new("Cup", [0.0; 3]),
            Entity::new("Cup", [1.0, 0.0, 0.0]),
        ];
        let err =
            initialize_common_ground(entities, Vec::new(), EmbeddingSpace::default()).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn mark_target_updates_observer_only() {
        let state = init(&["RedBlock1", "Knife"])
            .mark_target("RedBlock1")
            .unwrap();
        assert_eq!(state.clock, TimeStep::T1);
        assert!(state.holds(&Proposition::knows(
            AgentRole::Observer,
            Proposition::target("RedBlock1")
        )));
        assert!(!state.holds(&Proposition::knows(
            AgentRole::Observer,
            Proposition::knows(AgentRole::Avatar, Proposition::target("RedBlock1"))
        )));
        // The avatar's own knowledge of the target is not yet settled either.
        assert!(!state.holds(&Proposition::knows(
            AgentRole::Avatar,
            Proposition::target("RedBlock1")
        )));
        let observer_content = state.per_agent_view.content(AgentRole::Observer);
        assert!(observer_content.contains(&&Proposition::target("RedBlock1")));
        let avatar_content = state.per_agent_view.content(AgentRole::Avatar);
        assert!(!avatar_content.contains(&&Proposition::target("RedBlock1")));
    }

    #[test]
    fn mark_target_unknown_entity_errors() {
        let err = init(&["Cup"]).mark_target("spoon").unwrap_err();
        assert!(matches!(err, Error::UnknownEntity(_)));
    }

    #[test]
    fn mark_target_twice_errors() {
        let state = init(&["Cup"]).mark_target("Cup").unwrap();
        assert!(matches!(
            state.mark_target("Cup").unwrap_err(),
            Error::State(_)
        ));
    }

    #[test]
    fn mark_target_adds_exactly_two_formulas() {
        let base = init(&["Cup", "Knife"]);
        let before = base.delta.len();
        let after = base.mark_target("Cup").unwrap();
        assert_eq!(after.delta.len(), before + 2);
        // The stored necessity formula is recognized verbatim.
        let unsettled = Proposition::not(Proposition::necessarily(Proposition::knows(
            AgentRole::Observer,
            Proposition::knows(AgentRole::Avatar, Proposition::target("Cup")),
        )));
        assert!(after.holds(&unsettled));
    }

    #[test]
    fn gesture_act_adds_single_pointing_event() {
        let state = init(&["RedBlock1"]).mark_target("RedBlock1").unwrap();
        let act = CommunicativeAct::gesture_only(Gesture {
            direction: [0.0, 0.0, 1.0],
            object: "RedBlock1".into(),
        })
        .unwrap();
        let (next, events) = state.apply_act(&act).unwrap();
        assert_eq!(next.clock, TimeStep::T2);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].added.len(), 1);
        let fact = events[0].added.iter().next().unwrap();
        assert!(matches!(fact, Proposition::Knows(AgentRole::Observer, _)));
        assert!(next.holds(fact));
        assert_eq!(events[0].offset_seconds, 3.5);
    }

    #[test]
    fn act_without_modality_is_malformed() {
        // Constructors refuse empty acts, so drive the state check directly.
        let state = init(&["Cup"]).mark_target("Cup").unwrap();
        let act = CommunicativeAct {
            speaker: AgentRole::Avatar,
            speech: None,
            gesture: None,
            alignment: None,
            continuations: Default::default(),
        };
        assert!(matches!(
            state.apply_act(&act).unwrap_err(),
            Error::MalformedAct(_)
        ));
    }

    #[test]
    fn gesture_at_unknown_object_errors() {
        let state = init(&["Cup"]).mark_target("Cup").unwrap();
        let act = CommunicativeAct::gesture_only(Gesture {
            direction: [0.0, 0.0, 1.0],
            object: "Spoon".into(),
        })
        .unwrap();
        assert!(matches!(
            state.apply_act(&act).unwrap_err(),
            Error::UnknownEntity(_)
        ));
    }

    #[test]
    fn announce_makes_both_agents_know() {
        let state = init(&["Cup"]);
        let phi = Proposition::perceives(AgentRole::Avatar, Proposition::object("Cup"));
        let next = state.announce(&phi).unwrap();
        assert!(next.holds(&Proposition::knows(AgentRole::Observer, phi.clone())));
        assert!(next.holds(&Proposition::knows(AgentRole::Avatar, phi.clone())));
        // Announcing again is a no-op.
        let again = next.announce(&phi).unwrap();
        assert_eq!(again, next);
    }

    #[test]
    fn announce_over_empty_delta_adds_one_fact_per_agent() {
        let state = init(&[]);
        assert!(state.delta.is_empty());
        let phi = Proposition::Atom(Atom::NearFarDistinct);
        let next = state.announce(&phi).unwrap();
        assert_eq!(next.delta.len(), AgentRole::BOTH.len());
    }

    #[test]
    fn announce_rejects_ill_formed_formula() {
        let state = init(&["Cup"]);
        let phi = Proposition::target("Spoon");
        assert!(state.announce(&phi).is_err());
    }

    #[test]
    fn holds_object_membership() {
        let state = init(&["Cup"]);
        assert!(state.holds(&Proposition::object("Cup")));
        assert!(!state.holds(&Proposition::object("Spoon")));
        assert!(state.holds(&Proposition::perceives(
            AgentRole::Avatar,
            Proposition::object("Cup")
        )));
    }

    #[test]
    fn holds_conjunction_matches_independent_evaluator() {
        // Independent oracle: a second recursive evaluator over the same
        // semantics, written against the raw sets.
        fn oracle(state: &CommonGroundState, p: &Proposition) -> bool {
            fn atom_oracle(state: &CommonGroundState, a: &Atom) -> bool {
                if state.delta.contains(&Proposition::Atom(a.clone())) {
                    return true;
                }
                match a {
                    Atom::Top => true,
                    Atom::Object(b) => state.perceived.contains_key(b),
                    Atom::Distinct(x, y) => {
                        x != y && state.perceived.contains_key(x) && state.perceived.contains_key(y)
                    }
                    Atom::AttrHolds {
                        attribute,
                        subject: Term::Entity(e),
                    } => state
                        .perceived
                        .get(e)
                        .is_some_and(|en| en.attributes.contains(attribute)),
                    Atom::Head {
                        noun,
                        subject: Term::Entity(e),
                    } => state.perceived.get(e).is_some_and(|en| en.noun() == *noun),
                    Atom::Spatial {
                        relation,
                        subject: Term::Entity(e),
                        relatum,
                        ..
                    } => state
                        .relations
                        .iter()
                        .any(|(r, s, o)| r == relation && s == e && o == relatum),
                    _ => false,
                }
            }
            if state.delta.contains(p) {
                return true;
            }
            match p {
                Proposition::Atom(a) => atom_oracle(state, a),
                Proposition::And(x, y) => oracle(state, x) && oracle(state, y),
                Proposition::Not(x) => !oracle(state, x),
                Proposition::Perceives(_, inner) => match inner.as_ref() {
                    Proposition::Atom(a) => atom_oracle(state, a),
                    _ => false,
                },
                _ => false,
            }
        }

        use rand::prelude::*;
        use rand_chacha::ChaCha20Rng;
        let state = init(&["Cup", "Knife", "RedBlock1", "RedBlock2"])
            .mark_target("RedBlock1")
            .unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let pool: Vec<Proposition> = vec![
            Proposition::object("Cup"),
            Proposition::object("Spoon"),
            Proposition::target("RedBlock1"),
            Proposition::knows(AgentRole::Observer, Proposition::target("RedBlock1")),
            Proposition::knows(AgentRole::Avatar, Proposition::target("RedBlock1")),
            Proposition::Atom(Atom::AttrHolds {
                attribute: "red".into(),
                subject: Term::Entity("RedBlock2".into()),
            }),
            Proposition::Atom(Atom::Distinct("RedBlock1".into(), "RedBlock2".into())),
        ];
        for _ in 0..500 {
            let a = pool.choose(&mut rng).unwrap().clone();
            let b = pool.choose(&mut rng).unwrap().clone();
            let a = if rng.gen_bool(0.3) {
                Proposition::not(a)
            } else {
                a
            };
            let joint = Proposition::and(a.clone(), b.clone());
            assert_eq!(state.holds(&joint), state.holds(&a) && state.holds(&b));
            assert_eq!(state.holds(&joint), oracle(&state, &joint));
        }
    }

    #[test]
    fn other_pair_picks_first_two_matching_labels() {
        let state = init(&["RedBlock1", "RedBlock2", "GreenBlock1", "Knife"]);
        let pair = find_other_pair(&state.perceived, "block", &["red".to_string()]);
        assert_eq!(
            pair,
            Some(("RedBlock1".to_string(), "RedBlock2".to_string()))
        );
        assert_eq!(
            find_other_pair(&state.perceived, "block", &["blue".to_string()]),
            None
        );
        assert_eq!(find_other_pair(&state.perceived, "block", &[]), None);
    }

    #[test]
    fn timeline_offsets_follow_schedule() {
        assert_eq!(TimeStep::T0.offset_seconds(), 0.0);
        assert_eq!(TimeStep::T1.offset_seconds(), 1.5);
        assert_eq!(TimeStep::T2.offset_seconds(), 3.5);
    }

    #[test]
    fn ensemble_near_far_requires_this_and_gesture() {
        let lex = crate::parser::test_lexicon();
        let state = init(&["RedBlock1", "Knife"])
            .mark_target("RedBlock1")
            .unwrap();

        let mut parse = crate::parser::parse_re("this red block", &lex).unwrap();
        parse
            .resolve_against_scene(&state.perceived, "RedBlock1")
            .unwrap();
        let gesture = Gesture {
            direction: [0.0, 0.0, 1.0],
            object: "RedBlock1".into(),
        };
        let act = crate::parser::align(parse.clone(), gesture.clone(), &state.perceived).unwrap();
        let (next, _) = state.apply_act(&act).unwrap();
        let near_far =
            Proposition::knows(AgentRole::Avatar, Proposition::Atom(Atom::NearFarDistinct));
        assert!(next.holds(&near_far));
        assert_eq!(parse.demonstrative, Demonstrative::This);

        // Speech-only "this" does not introduce the distinction.
        let act = CommunicativeAct::speech_only(parse).unwrap();
        let (next, _) = state.apply_act(&act).unwrap();
        assert!(!next.holds(&near_far));
    }
}
