//! Parsing and alignment of referring expressions.
//!
//! EMRE utterances are templatic noun phrases:
//!
//! ```text
//! [demonstrative] [other?] [attribute*] head ([spatial term] [relatum NP])*
//! ```
//!
//! Parsing is greedy longest-match over a lexicon induced from the dataset:
//! closed classes are seeded (demonstratives, "other", colors, spatial
//! relations with their canonical names) and head nouns come from the object
//! inventory. A parse aligned with a deictic gesture forms a communicative
//! act, the structure the common-ground update at `t2` consumes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::common_ground::{find_other_pair, Entity};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::logic::{AgentRole, Atom, Proposition, Term};
use crate::names::{label_noun, tokenize, COLOR_WORDS};

/// A multiword spatial relation: its surface tokens and the canonical
/// predicate name used in logical forms ("in front of" -> `in_front`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpatialTerm {
    pub surface: Vec<String>,
    pub canonical: String,
}

impl SpatialTerm {
    fn new(surface: &str, canonical: &str) -> Self {
        SpatialTerm {
            surface: surface.split_whitespace().map(str::to_string).collect(),
            canonical: canonical.to_string(),
        }
    }
}

pub(crate) const SPATIAL_SEEDS: &[(&str, &str)] = &[
    ("in front of", "in_front"),
    ("behind", "behind"),
    ("left of", "left"),
    ("right of", "right"),
    ("next to", "next_to"),
    ("on top of", "on_top"),
    ("near", "near"),
    ("beside", "beside"),
    ("touching", "touching"),
    ("under", "under"),
    ("on", "on"),
];

const SIZE_WORDS: &[&str] = &["big", "small", "large"];

/// Token classes for segmenting utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub demonstratives: BTreeSet<String>,
    pub attributives: BTreeSet<String>,
    pub head_nouns: BTreeSet<String>,
    /// Sorted longest-first so greedy matching prefers multiword terms.
    pub spatial_terms: Vec<SpatialTerm>,
    pub differentiators: BTreeSet<String>,
    pub function_words: BTreeSet<String>,
}

impl Lexicon {
    fn seeded() -> Self {
        let mut spatial: Vec<SpatialTerm> = SPATIAL_SEEDS
            .iter()
            .map(|(s, c)| SpatialTerm::new(s, c))
            .collect();
        spatial.sort_by(|a, b| {
            b.surface
                .len()
                .cmp(&a.surface.len())
                .then(a.surface.cmp(&b.surface))
        });
        Lexicon {
            demonstratives: ["this", "that", "the"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            attributives: COLOR_WORDS
                .iter()
                .chain(SIZE_WORDS.iter())
                .map(|s| s.to_string())
                .collect(),
            head_nouns: BTreeSet::new(),
            spatial_terms: spatial,
            differentiators: ["other"].iter().map(|s| s.to_string()).collect(),
            function_words: ["a", "an", "of", "to", "is", "it"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    /// Surface tokens of a canonical spatial relation.
    pub fn spatial_surface(&self, canonical: &str) -> Option<&[String]> {
        self.spatial_terms
            .iter()
            .find(|t| t.canonical == canonical)
            .map(|t| t.surface.as_slice())
    }

    fn match_spatial(&self, tokens: &[String], at: usize) -> Option<&SpatialTerm> {
        self.spatial_terms.iter().find(|term| {
            tokens.len() >= at + term.surface.len()
                && tokens[at..at + term.surface.len()] == term.surface[..]
        })
    }

    fn is_determiner(&self, token: &str) -> bool {
        self.demonstratives.contains(token) || token == "a" || token == "an"
    }

    fn check_disjoint(&self) -> Result<()> {
        let classes: [(&str, &BTreeSet<String>); 4] = [
            ("demonstrative", &self.demonstratives),
            ("attributive", &self.attributives),
            ("head noun", &self.head_nouns),
            ("differentiator", &self.differentiators),
        ];
        for i in 0..classes.len() {
            for j in i + 1..classes.len() {
                if let Some(tok) = classes[i].1.intersection(classes[j].1).next() {
                    return Err(Error::Lexicon(format!(
                        "token \"{tok}\" is both {} and {}",
                        classes[i].0, classes[j].0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Induce a lexicon from the dataset: head nouns come from the object
/// inventory, closed classes from seeds. Returns the lexicon and the
/// utterance tokens that fell into no class.
pub fn build_lexicon(ds: &Dataset) -> Result<(Lexicon, BTreeSet<String>)> {
    let mut lex = Lexicon::seeded();
    for label in &ds.object_inventory {
        lex.head_nouns.insert(label_noun(label));
    }
    lex.check_disjoint()?;

    let mut unknown = BTreeSet::new();
    for record in &ds.records {
        let tokens = tokenize(&record.utterance);
        let mut i = 0;
        while i < tokens.len() {
            if let Some(term) = lex.match_spatial(&tokens, i) {
                i += term.surface.len();
                continue;
            }
            let tok = &tokens[i];
            let known = lex.demonstratives.contains(tok)
                || lex.attributives.contains(tok)
                || lex.head_nouns.contains(tok)
                || lex.differentiators.contains(tok)
                || lex.function_words.contains(tok);
            if !known {
                unknown.insert(tok.clone());
            }
            i += 1;
        }
    }
    Ok((lex, unknown))
}

/// The demonstrative slot of a parsed expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Demonstrative {
    This,
    That,
    The,
    None,
}

impl Demonstrative {
    fn from_token(token: &str) -> Demonstrative {
        match token {
            "this" => Demonstrative::This,
            "that" => Demonstrative::That,
            "the" => Demonstrative::The,
            _ => Demonstrative::None,
        }
    }

    pub fn token(self) -> Option<&'static str> {
        match self {
            Demonstrative::This => Some("this"),
            Demonstrative::That => Some("that"),
            Demonstrative::The => Some("the"),
            Demonstrative::None => None,
        }
    }
}

/// The relatum noun phrase inside a locative PP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedNP {
    pub determiner: Option<String>,
    pub attributes: Vec<String>,
    pub head: String,
    pub resolved_entity: Option<String>,
}

/// A structured referring expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRE {
    /// The referent variable the description constrains.
    pub referent_var: String,
    pub demonstrative: Demonstrative,
    pub other_flag: bool,
    pub attributes: Vec<String>,
    pub head: String,
    /// (canonical relation, relatum) pairs, in surface order.
    pub spatial_pps: Vec<(String, ParsedNP)>,
    /// The viewer whose frame situates spatial relations.
    pub frame_of_reference: AgentRole,
    pub surface_tokens: Vec<String>,
}

impl ParsedRE {
    /// Content terms in surface order: demonstrative, attributes, head, and
    /// per PP the canonical relation plus the relatum's attributes and head.
    /// Function words and "other" carry no term meaning.
    pub fn content_terms(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(d) = self.demonstrative.token() {
            out.push(d.to_string());
        }
        out.extend(self.attributes.iter().cloned());
        out.push(self.head.clone());
        for (relation, np) in &self.spatial_pps {
            out.push(relation.clone());
            out.extend(np.attributes.iter().cloned());
            out.push(np.head.clone());
        }
        out
    }

    /// Attributive terms used anywhere in the expression.
    pub fn all_attributes(&self) -> Vec<String> {
        let mut out = self.attributes.clone();
        for (_, np) in &self.spatial_pps {
            out.extend(np.attributes.iter().cloned());
        }
        out
    }

    /// The target noun-phrase constituent ("that red block").
    pub fn dem_constituent(&self) -> String {
        let mut parts = Vec::new();
        if let Some(d) = self.demonstrative.token() {
            parts.push(d.to_string());
        }
        if self.other_flag {
            parts.push("other".to_string());
        }
        parts.extend(self.attributes.iter().cloned());
        parts.push(self.head.clone());
        parts.join(" ")
    }

    /// Regenerate surface tokens from the parsed fields.
    pub fn regenerate(&self, lex: &Lexicon) -> Result<Vec<String>> {
        let mut out = Vec::new();
        if let Some(d) = self.demonstrative.token() {
            out.push(d.to_string());
        }
        if self.other_flag {
            out.push("other".to_string());
        }
        out.extend(self.attributes.iter().cloned());
        out.push(self.head.clone());
        for (relation, np) in &self.spatial_pps {
            let surface = lex
                .spatial_surface(relation)
                .ok_or_else(|| Error::Lexicon(format!("no surface form for {relation}")))?;
            out.extend(surface.iter().cloned());
            if let Some(det) = &np.determiner {
                out.push(det.clone());
            }
            out.extend(np.attributes.iter().cloned());
            out.push(np.head.clone());
        }
        Ok(out)
    }

    /// Resolve every relatum NP against the scene. A unique noun/attribute
    /// match wins; among several candidates the one nearest the target is
    /// chosen. The target itself is never a relatum.
    pub fn resolve_against_scene(
        &mut self,
        scene: &BTreeMap<String, Entity>,
        target: &str,
    ) -> Result<()> {
        let target_pos = scene
            .get(target)
            .map(|e| e.position)
            .ok_or_else(|| Error::Resolution(format!("target {target} not in scene")))?;
        for (_, np) in &mut self.spatial_pps {
            let mut candidates: Vec<&Entity> = scene
                .values()
                .filter(|e| {
                    e.label != target
                        && e.noun() == np.head
                        && np.attributes.iter().all(|a| e.attributes.contains(a))
                })
                .collect();
            if candidates.is_empty() {
                return Err(Error::Resolution(format!(
                    "no scene entity matches relatum \"{}\"",
                    np.head
                )));
            }
            candidates.sort_by(|a, b| {
                let da = dist2(a.position, target_pos);
                let db = dist2(b.position, target_pos);
                da.partial_cmp(&db).unwrap().then(a.label.cmp(&b.label))
            });
            np.resolved_entity = Some(candidates[0].label.clone());
        }
        Ok(())
    }

    /// The conjunction the expression denotes over its referent variable.
    pub fn logical_form(&self, scene: &BTreeMap<String, Entity>) -> Result<Vec<Proposition>> {
        to_logical_form(self, scene)
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Parse an utterance with greedy longest-match segmentation. Every token
/// must be consumed.
pub fn parse_re(utterance: &str, lex: &Lexicon) -> Result<ParsedRE> {
    let tokens = tokenize(utterance);
    if tokens.is_empty() {
        return Err(Error::Parse("empty utterance".into()));
    }

    let mut i = 0;
    let demonstrative = if lex.demonstratives.contains(&tokens[i]) {
        let d = Demonstrative::from_token(&tokens[i]);
        i += 1;
        d
    } else {
        Demonstrative::None
    };
    let other_flag = if i < tokens.len() && lex.differentiators.contains(&tokens[i]) {
        i += 1;
        true
    } else {
        false
    };
    let mut attributes = Vec::new();
    while i < tokens.len() && lex.attributives.contains(&tokens[i]) {
        attributes.push(tokens[i].clone());
        i += 1;
    }
    if i >= tokens.len() || !lex.head_nouns.contains(&tokens[i]) {
        let (tok, pos) = tokens
            .get(i)
            .map(|t| (t.as_str(), i))
            .unwrap_or(("<end>", tokens.len()));
        return Err(Error::Parse(format!(
            "expected head noun, found \"{tok}\" at token {pos}"
        )));
    }
    if other_flag && attributes.is_empty() {
        return Err(Error::Parse(
            "\"other\" requires at least one attribute".into(),
        ));
    }
    let head = tokens[i].clone();
    i += 1;

    let mut spatial_pps = Vec::new();
    while i < tokens.len() {
        let term = lex.match_spatial(&tokens, i).ok_or_else(|| {
            Error::Parse(format!(
                "expected spatial term, found \"{}\" at token {i}",
                tokens[i]
            ))
        })?;
        let canonical = term.canonical.clone();
        i += term.surface.len();

        let determiner = if i < tokens.len() && lex.is_determiner(&tokens[i]) {
            let d = tokens[i].clone();
            i += 1;
            Some(d)
        } else {
            None
        };
        let mut np_attrs = Vec::new();
        while i < tokens.len() && lex.attributives.contains(&tokens[i]) {
            np_attrs.push(tokens[i].clone());
            i += 1;
        }
        if i >= tokens.len() || !lex.head_nouns.contains(&tokens[i]) {
            let (tok, pos) = tokens
                .get(i)
                .map(|t| (t.as_str(), i))
                .unwrap_or(("<end>", tokens.len()));
            return Err(Error::Parse(format!(
                "expected relatum noun, found \"{tok}\" at token {pos}"
            )));
        }
        let np = ParsedNP {
            determiner,
            attributes: np_attrs,
            head: tokens[i].clone(),
            resolved_entity: None,
        };
        i += 1;
        spatial_pps.push((canonical, np));
    }

    Ok(ParsedRE {
        referent_var: "x".to_string(),
        demonstrative,
        other_flag,
        attributes,
        head,
        spatial_pps,
        frame_of_reference: AgentRole::Avatar,
        surface_tokens: tokens,
    })
}

/// A deictic pointing gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gesture {
    pub direction: [f64; 3],
    pub object: String,
}

/// The link between the target noun phrase and the pointed object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub dem_constituent: String,
    pub object: String,
}

/// Per-modality continuation slots, each bound to the referent variable when
/// its modality is present. The slots are structural only; nothing applies
/// them within a single video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Continuations {
    pub speech: Option<String>,
    pub gesture: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActConfiguration {
    GestureOnly,
    SpeechOnly,
    Ensemble,
}

/// A communicative act: speech, gesture, or an aligned ensemble of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunicativeAct {
    pub speaker: AgentRole,
    pub speech: Option<ParsedRE>,
    pub gesture: Option<Gesture>,
    pub alignment: Option<Alignment>,
    pub continuations: Continuations,
}

impl CommunicativeAct {
    pub fn speech_only(parse: ParsedRE) -> Result<Self> {
        let var = parse.referent_var.clone();
        Ok(CommunicativeAct {
            speaker: AgentRole::Avatar,
            speech: Some(parse),
            gesture: None,
            alignment: None,
            continuations: Continuations {
                speech: Some(var),
                gesture: None,
            },
        })
    }

    pub fn gesture_only(gesture: Gesture) -> Result<Self> {
        if gesture.object.is_empty() {
            return Err(Error::MalformedAct("gesture without object".into()));
        }
        Ok(CommunicativeAct {
            speaker: AgentRole::Avatar,
            speech: None,
            gesture: Some(gesture),
            alignment: None,
            continuations: Continuations {
                speech: None,
                gesture: Some("x".to_string()),
            },
        })
    }

    pub fn configuration(&self) -> ActConfiguration {
        match (&self.speech, &self.gesture) {
            (Some(_), Some(_)) => ActConfiguration::Ensemble,
            (Some(_), None) => ActConfiguration::SpeechOnly,
            _ => ActConfiguration::GestureOnly,
        }
    }
}

/// Align a parsed expression with a deictic gesture into an ensemble act,
/// linking the target noun phrase to the pointed object and binding both
/// continuation slots to the referent variable.
pub fn align(
    parse: ParsedRE,
    gesture: Gesture,
    scene: &BTreeMap<String, Entity>,
) -> Result<CommunicativeAct> {
    if gesture.object.is_empty() {
        return Err(Error::Alignment("gesture carries no object".into()));
    }
    if !scene.contains_key(&gesture.object) {
        return Err(Error::Alignment(format!(
            "gesture object {} is not a scene entity",
            gesture.object
        )));
    }
    let var = parse.referent_var.clone();
    let alignment = Alignment {
        dem_constituent: parse.dem_constituent(),
        object: gesture.object.clone(),
    };
    Ok(CommunicativeAct {
        speaker: AgentRole::Avatar,
        speech: Some(parse),
        gesture: Some(gesture),
        alignment: Some(alignment),
        continuations: Continuations {
            speech: Some(var.clone()),
            gesture: Some(var),
        },
    })
}

/// The conjunction of atoms a parsed expression denotes: the head predicate
/// over the referent variable, one attribute atom per attributive, one
/// spatial atom per PP (relatum resolved, frame fixed to the viewer), and a
/// distinctness atom when "other" differentiates two same-attribute objects.
pub fn to_logical_form(
    parse: &ParsedRE,
    scene: &BTreeMap<String, Entity>,
) -> Result<Vec<Proposition>> {
    let var = Term::Var(parse.referent_var.clone());
    let mut atoms = vec![Proposition::Atom(Atom::Head {
        noun: parse.head.clone(),
        subject: var.clone(),
    })];
    for attribute in &parse.attributes {
        atoms.push(Proposition::Atom(Atom::AttrHolds {
            attribute: attribute.clone(),
            subject: var.clone(),
        }));
    }
    for (relation, np) in &parse.spatial_pps {
        let relatum = np
            .resolved_entity
            .clone()
            .ok_or_else(|| Error::Resolution(format!("relatum \"{}\" is unresolved", np.head)))?;
        if !scene.contains_key(&relatum) {
            return Err(Error::Resolution(format!("relatum {relatum} not in scene")));
        }
        atoms.push(Proposition::Atom(Atom::Spatial {
            relation: relation.clone(),
            subject: var.clone(),
            relatum,
            viewer: parse.frame_of_reference,
        }));
    }
    if parse.other_flag {
        if let Some((b1, b2)) = find_other_pair(scene, &parse.head, &parse.attributes) {
            atoms.push(Proposition::Atom(Atom::Distinct(b1, b2)));
        }
    }
    Ok(atoms)
}

#[cfg(test)]
pub(crate) fn test_lexicon() -> Lexicon {
    let mut lex = Lexicon::seeded();
    for noun in ["block", "knife", "cup", "plate", "table"] {
        lex.head_nouns.insert(noun.to_string());
    }
    lex
}
