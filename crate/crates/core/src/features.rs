//! Feature assembly: raw scene/expression features, sentence-embedding
//! features, and formal one-hot features read off the common-ground state.
//!
//! A `FeatureSchema` is induced from the dataset once and frozen: slot order
//! is fixed (raw, embedding, formal; lexicographic by name within each
//! group), every slot carries the modality its value depends on, and the
//! formal dictionary enumerates the spatial terms, attributives, and objects
//! the dataset actually uses. Ablation specs select feature groups, restrict
//! the record subset by modality, and can drop everything that is not purely
//! language-dependent.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::common_ground::{find_other_pair, CommonGroundState, TimeStep};
use crate::dataset::{Dataset, DistinctionScope, EmreRecord, Modality};
use crate::embeddings::{descriptor_vector, sentence_vector, WordVectors};
use crate::error::{Error, Result};
use crate::logic::{AgentRole, Atom, Dir, Proposition, Term};
use crate::names::tokenize;
use crate::parser::{CommunicativeAct, Demonstrative, Lexicon};
use crate::trace::build_trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Raw,
    Embedding,
    Formal,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 3] = [
        FeatureGroup::Raw,
        FeatureGroup::Embedding,
        FeatureGroup::Formal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Raw => "raw",
            FeatureGroup::Embedding => "se",
            FeatureGroup::Formal => "formal",
        }
    }
}

/// Which modality a feature's value depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityDependence {
    Linguistic,
    Gestural,
    Embodied,
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    // Raw group.
    AgentDistanceZ,
    DistanceDistinction,
    DistinctionScope,
    Modality,
    TargetObject,
    // Embedding group.
    UtteranceVector,
    DescriptorVector,
    // Formal group.
    AttributiveTermKnown(String),
    NearFarDistinction,
    OtherAttrFirst,
    OtherAttrSecond,
    OtherDistinct,
    Pointing,
    RelatumPerceived(String),
    SpatialTermKnown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub group: FeatureGroup,
    pub modality_dependence: ModalityDependence,
    pub width: usize,
    pub one_hot: bool,
    pub kind: SlotKind,
}

/// The frozen, ordered slot list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub descriptors: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn total_width(&self) -> usize {
        self.descriptors.iter().map(|d| d.width).sum()
    }

    pub fn group(&self, group: FeatureGroup) -> impl Iterator<Item = &FeatureDescriptor> {
        self.descriptors.iter().filter(move |d| d.group == group)
    }
}

/// Feature groups to assemble, the record subset, and the dependence filter
/// for one ablation cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub groups: BTreeSet<FeatureGroup>,
    pub modality_subset: ModalitySubset,
    pub dependence_filter: DependenceFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalitySubset {
    All,
    LanguageOnly,
    EnsembleOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceFilter {
    All,
    /// Keep only features that depend on nothing but the language (sentence
    /// embeddings included; agent distance and the pointing bit excluded).
    LinguisticOnly,
}

impl AblationSpec {
    pub fn new(groups: &[FeatureGroup]) -> AblationSpec {
        AblationSpec {
            groups: groups.iter().copied().collect(),
            modality_subset: ModalitySubset::All,
            dependence_filter: DependenceFilter::All,
        }
    }

    pub fn with_subset(mut self, subset: ModalitySubset) -> AblationSpec {
        self.modality_subset = subset;
        self
    }

    pub fn with_filter(mut self, filter: DependenceFilter) -> AblationSpec {
        self.dependence_filter = filter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config(
                "ablation spec selects no feature group".into(),
            ));
        }
        Ok(())
    }

    pub fn includes_record(&self, rec: &EmreRecord) -> bool {
        match self.modality_subset {
            ModalitySubset::All => true,
            ModalitySubset::LanguageOnly => rec.modality == Modality::Language,
            ModalitySubset::EnsembleOnly => rec.modality == Modality::Ensemble,
        }
    }

    fn keeps(&self, descriptor: &FeatureDescriptor) -> bool {
        match self.dependence_filter {
            DependenceFilter::All => true,
            DependenceFilter::LinguisticOnly => {
                descriptor.modality_dependence == ModalityDependence::Linguistic
            }
        }
    }

    /// A short stable label ("raw+formal+se/language/ling-feats").
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.groups.contains(&FeatureGroup::Raw) {
            parts.push("raw");
        }
        if self.groups.contains(&FeatureGroup::Formal) {
            parts.push("formal");
        }
        if self.groups.contains(&FeatureGroup::Embedding) {
            parts.push("se");
        }
        let mut label = parts.join("+");
        match self.modality_subset {
            ModalitySubset::All => {}
            ModalitySubset::LanguageOnly => label.push_str("/language"),
            ModalitySubset::EnsembleOnly => label.push_str("/ensemble"),
        }
        if self.dependence_filter == DependenceFilter::LinguisticOnly {
            label.push_str("/ling-feats");
        }
        label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Schema plus the dataset-wide statistics and resources extraction needs.
pub struct FeatureExtractor {
    pub schema: FeatureSchema,
    pub lexicon: Lexicon,
    pub vectors: Option<WordVectors>,
    inventory: Vec<String>,
    distance_mean: f64,
    distance_std: f64,
}

fn sorted_descriptors(mut v: Vec<FeatureDescriptor>) -> Vec<FeatureDescriptor> {
    v.sort_by(|a, b| a.name.cmp(&b.name));
    v
}

impl FeatureExtractor {
    /// Induce the schema from one dataset pass and freeze it. Word vectors
    /// are optional; requesting the embedding group without them is an error
    /// at assembly time.
    pub fn build(
        ds: &Dataset,
        lexicon: Lexicon,
        vectors: Option<WordVectors>,
    ) -> Result<FeatureExtractor> {
        let inventory: Vec<String> = ds.object_inventory.iter().cloned().collect();

        let n = ds.records.len() as f64;
        let (distance_mean, distance_std) = if ds.records.is_empty() {
            (0.0, 0.0)
        } else {
            let mean = ds.records.iter().map(|r| r.agent_distance).sum::<f64>() / n;
            let var = ds
                .records
                .iter()
                .map(|r| (r.agent_distance - mean).powi(2))
                .sum::<f64>()
                / n;
            (mean, var.sqrt())
        };

        let mut spatial_terms = BTreeSet::new();
        let mut attributive_terms = BTreeSet::new();
        for rec in &ds.records {
            if rec.utterance.trim().is_empty() {
                continue;
            }
            let parse = crate::parser::parse_re(&rec.utterance, &lexicon)?;
            for (relation, _) in &parse.spatial_pps {
                spatial_terms.insert(relation.clone());
            }
            for attribute in parse.all_attributes() {
                attributive_terms.insert(attribute);
            }
        }

        let dim = vectors
            .as_ref()
            .map(|wv| wv.dim)
            .unwrap_or(crate::embeddings::EMBEDDING_DIM);

        let raw = sorted_descriptors(vec![
            FeatureDescriptor {
                name: "agent_distance_z".into(),
                group: FeatureGroup::Raw,
                modality_dependence: ModalityDependence::Embodied,
                width: 1,
                one_hot: false,
                kind: SlotKind::AgentDistanceZ,
            },
            FeatureDescriptor {
                name: "distance_distinction".into(),
                group: FeatureGroup::Raw,
                modality_dependence: ModalityDependence::Linguistic,
                width: 1,
                one_hot: true,
                kind: SlotKind::DistanceDistinction,
            },
            FeatureDescriptor {
                name: "distinction_scope".into(),
                group: FeatureGroup::Raw,
                modality_dependence: ModalityDependence::Linguistic,
                width: 3,
                one_hot: true,
                kind: SlotKind::DistinctionScope,
            },
            FeatureDescriptor {
                name: "modality".into(),
                group: FeatureGroup::Raw,
                modality_dependence: ModalityDependence::Global,
                width: 3,
                one_hot: true,
                kind: SlotKind::Modality,
            },
            FeatureDescriptor {
                name: "target_object".into(),
                group: FeatureGroup::Raw,
                modality_dependence: ModalityDependence::Global,
                width: inventory.len(),
                one_hot: true,
                kind: SlotKind::TargetObject,
            },
        ]);

        let embedding = sorted_descriptors(vec![
            FeatureDescriptor {
                name: "linguistic_description".into(),
                group: FeatureGroup::Embedding,
                modality_dependence: ModalityDependence::Linguistic,
                width: dim,
                one_hot: false,
                kind: SlotKind::UtteranceVector,
            },
            FeatureDescriptor {
                name: "relational_descriptors".into(),
                group: FeatureGroup::Embedding,
                modality_dependence: ModalityDependence::Linguistic,
                width: dim,
                one_hot: false,
                kind: SlotKind::DescriptorVector,
            },
        ]);

        let mut formal = Vec::new();
        for term in &attributive_terms {
            formal.push(FeatureDescriptor {
                name: format!("att_known:{term}"),
                group: FeatureGroup::Formal,
                modality_dependence: ModalityDependence::Linguistic,
                width: 1,
                one_hot: true,
                kind: SlotKind::AttributiveTermKnown(term.clone()),
            });
        }
        formal.push(FeatureDescriptor {
            name: "near_far_distinction".into(),
            group: FeatureGroup::Formal,
            modality_dependence: ModalityDependence::Gestural,
            width: 1,
            one_hot: true,
            kind: SlotKind::NearFarDistinction,
        });
        for (name, kind) in [
            ("other_attr_first", SlotKind::OtherAttrFirst),
            ("other_attr_second", SlotKind::OtherAttrSecond),
            ("other_distinct", SlotKind::OtherDistinct),
        ] {
            formal.push(FeatureDescriptor {
                name: name.into(),
                group: FeatureGroup::Formal,
                modality_dependence: ModalityDependence::Linguistic,
                width: 1,
                one_hot: true,
                kind,
            });
        }
        formal.push(FeatureDescriptor {
            name: "pointing".into(),
            group: FeatureGroup::Formal,
            modality_dependence: ModalityDependence::Gestural,
            width: 1,
            one_hot: true,
            kind: SlotKind::Pointing,
        });
        for label in &inventory {
            formal.push(FeatureDescriptor {
                name: format!("relatum_perceived:{label}"),
                group: FeatureGroup::Formal,
                modality_dependence: ModalityDependence::Linguistic,
                width: 1,
                one_hot: true,
                kind: SlotKind::RelatumPerceived(label.clone()),
            });
        }
        for term in &spatial_terms {
            formal.push(FeatureDescriptor {
                name: format!("sp_known:{term}"),
                group: FeatureGroup::Formal,
                modality_dependence: ModalityDependence::Linguistic,
                width: 1,
                one_hot: true,
                kind: SlotKind::SpatialTermKnown(term.clone()),
            });
        }
        let formal = sorted_descriptors(formal);

        let mut descriptors = raw;
        descriptors.extend(embedding);
        descriptors.extend(formal);

        Ok(FeatureExtractor {
            schema: FeatureSchema { descriptors },
            lexicon,
            vectors,
            inventory,
            distance_mean,
            distance_std,
        })
    }

    /// The descriptors an ablation spec selects, in schema order.
    pub fn active_descriptors(&self, spec: &AblationSpec) -> Vec<&FeatureDescriptor> {
        self.schema
            .descriptors
            .iter()
            .filter(|d| spec.groups.contains(&d.group) && spec.keeps(d))
            .collect()
    }

    fn raw_slot(&self, rec: &EmreRecord, kind: &SlotKind, out: &mut Vec<f64>) -> Result<()> {
        match kind {
            SlotKind::AgentDistanceZ => {
                let z = if self.distance_std > 0.0 {
                    (rec.agent_distance - self.distance_mean) / self.distance_std
                } else {
                    0.0
                };
                out.push(z);
            }
            SlotKind::DistanceDistinction => {
                out.push(if rec.uses_distance_distinction {
                    1.0
                } else {
                    0.0
                });
            }
            SlotKind::DistinctionScope => {
                let idx = match rec.distinction_scope {
                    DistinctionScope::SimilarObjects => 0,
                    DistinctionScope::EntireWorld => 1,
                    DistinctionScope::NotApplicable => 2,
                };
                for i in 0..3 {
                    out.push(if i == idx { 1.0 } else { 0.0 });
                }
            }
            SlotKind::Modality => {
                let idx = match rec.modality {
                    Modality::Gesture => 0,
                    Modality::Language => 1,
                    Modality::Ensemble => 2,
                };
                for i in 0..3 {
                    out.push(if i == idx { 1.0 } else { 0.0 });
                }
            }
            SlotKind::TargetObject => {
                let idx = self
                    .inventory
                    .iter()
                    .position(|l| *l == rec.target_object)
                    .ok_or_else(|| {
                        Error::Schema(format!(
                            "target {} outside the frozen inventory",
                            rec.target_object
                        ))
                    })?;
                for i in 0..self.inventory.len() {
                    out.push(if i == idx { 1.0 } else { 0.0 });
                }
            }
            _ => unreachable!("raw_slot called with non-raw kind"),
        }
        Ok(())
    }

    /// The raw feature segment, in schema order.
    pub fn extract_raw(&self, rec: &EmreRecord) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for d in self.schema.group(FeatureGroup::Raw) {
            self.raw_slot(rec, &d.kind, &mut out)?;
        }
        Ok(out)
    }

    /// The sentence-embedding segment: utterance vector then aggregated
    /// descriptor vector.
    pub fn extract_embedding(&self, rec: &EmreRecord) -> Result<Vec<f64>> {
        let wv = self.vectors.as_ref().ok_or_else(|| {
            Error::Config("embedding group requested without trained vectors".into())
        })?;
        let mut out = Vec::new();
        for d in self.schema.group(FeatureGroup::Embedding) {
            match &d.kind {
                SlotKind::UtteranceVector => {
                    out.extend(sentence_vector(&tokenize(&rec.utterance), wv)?);
                }
                SlotKind::DescriptorVector => {
                    out.extend(descriptor_vector(&rec.relational_descriptors, wv)?);
                }
                _ => unreachable!("embedding group holds embedding kinds only"),
            }
        }
        Ok(out)
    }

    fn formal_bit(state: &CommonGroundState, act: &CommunicativeAct, kind: &SlotKind) -> bool {
        let speech = act.speech.as_ref();
        match kind {
            SlotKind::SpatialTermKnown(term) => {
                speech.is_some_and(|p| p.spatial_pps.iter().any(|(r, _)| r == term))
            }
            SlotKind::AttributiveTermKnown(term) => {
                speech.is_some_and(|p| p.all_attributes().contains(term))
            }
            SlotKind::RelatumPerceived(label) => speech.is_some_and(|p| {
                p.spatial_pps
                    .iter()
                    .any(|(_, np)| np.resolved_entity.as_deref() == Some(label.as_str()))
            }),
            SlotKind::OtherAttrFirst | SlotKind::OtherAttrSecond | SlotKind::OtherDistinct => {
                speech.is_some_and(|p| {
                    p.other_flag
                        && find_other_pair(&state.perceived, &p.head, &p.attributes).is_some()
                })
            }
            SlotKind::NearFarDistinction => {
                act.gesture.is_some()
                    && speech.is_some_and(|p| p.demonstrative == Demonstrative::This)
            }
            SlotKind::Pointing => act.gesture.is_some(),
            _ => unreachable!("formal_bit called with non-formal kind"),
        }
    }

    /// The formal one-hot segment read off a `t2` state and its act.
    pub fn extract_formal(
        &self,
        state: &CommonGroundState,
        act: &CommunicativeAct,
    ) -> Result<Vec<f64>> {
        if state.clock != TimeStep::T2 {
            return Err(Error::State(format!(
                "formal features require a t2 state, got {:?}",
                state.clock
            )));
        }
        let mut out = Vec::new();
        for d in self.schema.group(FeatureGroup::Formal) {
            out.push(if Self::formal_bit(state, act, &d.kind) {
                1.0
            } else {
                0.0
            });
        }
        Ok(out)
    }

    /// Assemble the selected groups, in schema order, for one record.
    pub fn assemble(&self, rec: &EmreRecord, spec: &AblationSpec) -> Result<FeatureVector> {
        spec.validate()?;
        let trace = if spec.groups.contains(&FeatureGroup::Formal) {
            Some(build_trace(rec, &self.lexicon)?)
        } else {
            None
        };

        let mut values = Vec::new();
        for d in self.active_descriptors(spec) {
            match d.group {
                FeatureGroup::Raw => self.raw_slot(rec, &d.kind, &mut values)?,
                FeatureGroup::Embedding => {
                    let wv = self.vectors.as_ref().ok_or_else(|| {
                        Error::Config("embedding group requested without trained vectors".into())
                    })?;
                    match &d.kind {
                        SlotKind::UtteranceVector => {
                            values.extend(sentence_vector(&tokenize(&rec.utterance), wv)?)
                        }
                        SlotKind::DescriptorVector => {
                            values.extend(descriptor_vector(&rec.relational_descriptors, wv)?)
                        }
                        _ => unreachable!(),
                    }
                }
                FeatureGroup::Formal => {
                    let t = trace
                        .as_ref()
                        .expect("trace built when formal group selected");
                    values.push(if Self::formal_bit(&t.state, &t.act, &d.kind) {
                        1.0
                    } else {
                        0.0
                    });
                }
            }
        }
        Ok(FeatureVector { values })
    }

    /// The proposition a set formal bit stands for, buildable only when the
    /// bit's preconditions hold in (state, act). Independent checks verify
    /// each against `CommonGroundState::holds`.
    pub fn formal_slot_proposition(
        state: &CommonGroundState,
        act: &CommunicativeAct,
        kind: &SlotKind,
    ) -> Option<Proposition> {
        let speech = act.speech.as_ref();
        match kind {
            SlotKind::SpatialTermKnown(term) | SlotKind::AttributiveTermKnown(term) => Some(
                Proposition::knows(AgentRole::Avatar, Proposition::term_meaning(term.clone())),
            ),
            SlotKind::RelatumPerceived(label) => Some(Proposition::perceives(
                AgentRole::Avatar,
                Proposition::object(label.clone()),
            )),
            SlotKind::OtherAttrFirst | SlotKind::OtherAttrSecond | SlotKind::OtherDistinct => {
                let parse = speech?;
                let (b1, b2) = find_other_pair(&state.perceived, &parse.head, &parse.attributes)?;
                let attribute = parse.attributes.first()?.clone();
                let atom = match kind {
                    SlotKind::OtherAttrFirst => Atom::AttrHolds {
                        attribute,
                        subject: Term::Entity(b1),
                    },
                    SlotKind::OtherAttrSecond => Atom::AttrHolds {
                        attribute,
                        subject: Term::Entity(b2),
                    },
                    _ => Atom::Distinct(b1, b2),
                };
                Some(Proposition::knows(
                    AgentRole::Avatar,
                    Proposition::Atom(atom),
                ))
            }
            SlotKind::NearFarDistinction => Some(Proposition::knows(
                AgentRole::Avatar,
                Proposition::Atom(Atom::NearFarDistinct),
            )),
            SlotKind::Pointing => {
                let gesture = act.gesture.as_ref()?;
                let point = Atom::Points {
                    direction: Dir::new(gesture.direction).ok()?,
                    object: gesture.object.clone(),
                };
                Some(Proposition::knows(
                    AgentRole::Observer,
                    Proposition::knows(
                        AgentRole::Avatar,
                        Proposition::and(
                            Proposition::Atom(point),
                            Proposition::target(gesture.object.clone()),
                        ),
                    ),
                ))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{train_skipgram, SkipGramConfig};
    use crate::parser::build_lexicon;
    use crate::synth::{generate, SynthConfig};

    fn setup(videos: usize, seed: u64) -> (Dataset, FeatureExtractor) {
        let ds = generate(&SynthConfig { videos, seed });
        let (lex, _) = build_lexicon(&ds).unwrap();
        let corpus: Vec<Vec<String>> = ds
            .records
            .iter()
            .filter(|r| !r.utterance.is_empty())
            .map(|r| tokenize(&r.utterance))
            .collect();
        let wv = train_skipgram(
            &corpus,
            &SkipGramConfig {
                dim: 16,
                epochs: 3,
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let extractor = FeatureExtractor::build(&ds, lex, Some(wv)).unwrap();
        (ds, extractor)
    }

    #[test]
    fn raw_segment_encodes_modality_and_scope() {
        let (ds, ex) = setup(30, 4);
        let gesture = ds
            .records
            .iter()
            .find(|r| r.modality == Modality::Gesture)
            .unwrap();
        let raw = ex.extract_raw(gesture).unwrap();

        // Schema order within raw: agent_distance_z, distance_distinction,
        // distinction_scope(3), modality(3), target_object(n).
        let names: Vec<&str> = ex
            .schema
            .group(FeatureGroup::Raw)
            .map(|d| d.name.as_str())
            .collect();
        assert_eq!(
            names,
            vec![
                "agent_distance_z",
                "distance_distinction",
                "distinction_scope",
                "modality",
                "target_object"
            ]
        );
        assert_eq!(raw.len(), 1 + 1 + 3 + 3 + ds.object_inventory.len());
        // Gesture records use no distance distinction: scope is n/a.
        assert_eq!(raw[1], 0.0);
        assert_eq!(&raw[2..5], &[0.0, 0.0, 1.0]);
        // Modality one-hot: gesture slot.
        assert_eq!(&raw[5..8], &[1.0, 0.0, 0.0]);
        // Target one-hot has exactly one bit.
        let target_bits: f64 = raw[8..].iter().sum();
        assert_eq!(target_bits, 1.0);
    }

    #[test]
    fn distance_at_mean_z_scores_to_zero() {
        let (ds, ex) = setup(20, 5);
        let mean =
            ds.records.iter().map(|r| r.agent_distance).sum::<f64>() / ds.records.len() as f64;
        let mut rec = ds.records[0].clone();
        rec.agent_distance = mean;
        let raw = ex.extract_raw(&rec).unwrap();
        assert!(raw[0].abs() < 1e-12);
    }

    #[test]
    fn target_outside_inventory_is_a_schema_error() {
        let (ds, ex) = setup(10, 6);
        let mut rec = ds.records[0].clone();
        rec.target_object = "Zeppelin".into();
        assert!(matches!(
            ex.extract_raw(&rec).unwrap_err(),
            Error::Schema(_)
        ));
    }

    #[test]
    fn gesture_only_embedding_segment_is_all_zeros() {
        let (ds, ex) = setup(30, 7);
        let gesture = ds
            .records
            .iter()
            .find(|r| r.modality == Modality::Gesture)
            .unwrap();
        let seg = ex.extract_embedding(gesture).unwrap();
        assert_eq!(seg.len(), 2 * 16);
        assert!(seg.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn descriptor_half_is_mean_of_descriptor_vectors() {
        let (ds, ex) = setup(60, 8);
        let rec = ds
            .records
            .iter()
            .find(|r| r.relational_descriptors.len() == 1)
            .expect("some record has exactly one descriptor");
        let seg = ex.extract_embedding(rec).unwrap();
        let wv = ex.vectors.as_ref().unwrap();
        let single =
            crate::embeddings::sentence_vector(&tokenize(&rec.relational_descriptors[0]), wv)
                .unwrap();
        assert_eq!(&seg[16..], single.as_slice());
    }

    #[test]
    fn formal_bits_match_fig2_style_sentence() {
        let (ds, ex) = setup(60, 9);
        let rec = ds
            .records
            .iter()
            .find(|r| r.modality == Modality::Ensemble && !r.relational_descriptors.is_empty())
            .unwrap();
        let trace = build_trace(rec, &ex.lexicon).unwrap();
        let formal = ex.extract_formal(&trace.state, &trace.act).unwrap();
        let parse = trace.act.speech.as_ref().unwrap();

        for (d, &bit) in ex.schema.group(FeatureGroup::Formal).zip(&formal) {
            let expected = match &d.kind {
                SlotKind::Pointing => true,
                SlotKind::SpatialTermKnown(t) => parse.spatial_pps.iter().any(|(r, _)| r == t),
                SlotKind::AttributiveTermKnown(t) => parse.all_attributes().contains(t),
                SlotKind::RelatumPerceived(l) => parse
                    .spatial_pps
                    .iter()
                    .any(|(_, np)| np.resolved_entity.as_deref() == Some(l.as_str())),
                _ => bit == 1.0, // other/near-far covered in dedicated tests
            };
            assert_eq!(bit == 1.0, expected, "slot {}", d.name);
        }
        assert_eq!(formal.len(), ex.schema.group(FeatureGroup::Formal).count());
    }

    #[test]
    fn other_rule_sets_exactly_three_extra_bits() {
        let ds = generate(&SynthConfig {
            videos: 300,
            seed: 10,
        });
        let (lex, _) = build_lexicon(&ds).unwrap();
        let ex = FeatureExtractor::build(&ds, lex, None).unwrap();
        let rec = ds
            .records
            .iter()
            .find(|r| r.utterance.contains(" other ") && r.relational_descriptors.is_empty())
            .expect("generator produces bare other-expressions");
        let trace = build_trace(rec, &ex.lexicon).unwrap();
        let formal = ex.extract_formal(&trace.state, &trace.act).unwrap();
        let mut set = std::collections::BTreeMap::new();
        for (d, &bit) in ex.schema.group(FeatureGroup::Formal).zip(&formal) {
            if bit == 1.0 {
                set.insert(d.name.clone(), bit);
            }
        }
        assert!(set.contains_key("other_attr_first"));
        assert!(set.contains_key("other_attr_second"));
        assert!(set.contains_key("other_distinct"));
    }

    #[test]
    fn gesture_only_act_sets_only_the_pointing_bit() {
        let (ds, ex) = setup(30, 11);
        let rec = ds
            .records
            .iter()
            .find(|r| r.modality == Modality::Gesture)
            .unwrap();
        let trace = build_trace(rec, &ex.lexicon).unwrap();
        let formal = ex.extract_formal(&trace.state, &trace.act).unwrap();
        for (d, &bit) in ex.schema.group(FeatureGroup::Formal).zip(&formal) {
            if d.name == "pointing" {
                assert_eq!(bit, 1.0);
            } else {
                assert_eq!(bit, 0.0, "unexpected bit {}", d.name);
            }
        }
    }

    #[test]
    fn formal_extraction_requires_t2() {
        let (ds, ex) = setup(10, 12);
        let rec = &ds.records[0];
        let (entities, relations, space) = crate::trace::scene_from_record(rec);
        let state =
            crate::common_ground::initialize_common_ground(entities, relations, space).unwrap();
        let act = crate::parser::CommunicativeAct::gesture_only(crate::parser::Gesture {
            direction: [0.0, 0.0, 1.0],
            object: rec.target_object.clone(),
        })
        .unwrap();
        assert!(matches!(
            ex.extract_formal(&state, &act).unwrap_err(),
            Error::State(_)
        ));
    }

    #[test]
    fn assemble_widths_match_group_sums() {
        let (ds, ex) = setup(30, 13);
        let rec = &ds.records[0];
        let raw_w: usize = ex.schema.group(FeatureGroup::Raw).map(|d| d.width).sum();
        let emb_w: usize = ex
            .schema
            .group(FeatureGroup::Embedding)
            .map(|d| d.width)
            .sum();
        let formal_w: usize = ex.schema.group(FeatureGroup::Formal).map(|d| d.width).sum();

        let raw_only = ex
            .assemble(rec, &AblationSpec::new(&[FeatureGroup::Raw]))
            .unwrap();
        assert_eq!(raw_only.values.len(), raw_w);

        let formal_only = ex
            .assemble(rec, &AblationSpec::new(&[FeatureGroup::Formal]))
            .unwrap();
        let trace = build_trace(rec, &ex.lexicon).unwrap();
        assert_eq!(
            formal_only.values,
            ex.extract_formal(&trace.state, &trace.act).unwrap()
        );

        let all = ex
            .assemble(rec, &AblationSpec::new(&FeatureGroup::ALL))
            .unwrap();
        assert_eq!(all.values.len(), raw_w + emb_w + formal_w);
    }

    #[test]
    fn embedding_group_without_vectors_is_a_config_error() {
        let ds = generate(&SynthConfig {
            videos: 10,
            seed: 14,
        });
        let (lex, _) = build_lexicon(&ds).unwrap();
        let ex = FeatureExtractor::build(&ds, lex, None).unwrap();
        let err = ex
            .assemble(
                &ds.records[0],
                &AblationSpec::new(&[FeatureGroup::Embedding]),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn empty_group_set_is_rejected() {
        let (ds, ex) = setup(10, 15);
        let spec = AblationSpec::new(&[]);
        assert!(ex.assemble(&ds.records[0], &spec).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let (ds, ex) = setup(30, 16);
        let spec = AblationSpec::new(&FeatureGroup::ALL);
        for rec in ds.records.iter().take(10) {
            let a = ex.assemble(rec, &spec).unwrap();
            let b = ex.assemble(rec, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zeroing_a_group_equals_assembling_without_it() {
        let (ds, ex) = setup(30, 17);
        let with = AblationSpec::new(&[FeatureGroup::Raw, FeatureGroup::Formal]);
        let without = AblationSpec::new(&[FeatureGroup::Raw]);
        for rec in ds.records.iter().take(8) {
            let mut joint = ex.assemble(rec, &with).unwrap().values;
            // Zero the formal slots (they follow the raw slots in schema order).
            let raw_w: usize = ex.schema.group(FeatureGroup::Raw).map(|d| d.width).sum();
            for v in &mut joint[raw_w..] {
                *v = 0.0;
            }
            let mut padded = ex.assemble(rec, &without).unwrap().values;
            padded.extend(vec![0.0; joint.len() - raw_w]);
            assert_eq!(joint, padded);
        }
    }

    #[test]
    fn linguistic_filter_drops_distance_pointing_and_near_far() {
        let (_, ex) = setup(30, 18);
        let spec =
            AblationSpec::new(&FeatureGroup::ALL).with_filter(DependenceFilter::LinguisticOnly);
        let kept: Vec<&str> = ex
            .active_descriptors(&spec)
            .iter()
            .map(|d| d.name.as_str())
            .collect();
        assert!(!kept.contains(&"agent_distance_z"));
        assert!(!kept.contains(&"pointing"));
        assert!(!kept.contains(&"near_far_distinction"));
        assert!(!kept.contains(&"modality"));
        assert!(!kept.contains(&"target_object"));
        assert!(kept.contains(&"distance_distinction"));
        assert!(kept.contains(&"linguistic_description"));
        assert!(kept.contains(&"relational_descriptors"));
        assert!(kept.iter().any(|n| n.starts_with("sp_known:")));
    }

    #[test]
    fn one_hot_slots_contain_only_zeros_and_ones() {
        let (ds, ex) = setup(40, 19);
        let spec = AblationSpec::new(&FeatureGroup::ALL);
        let active = ex.active_descriptors(&spec);
        for rec in ds.records.iter().take(15) {
            let v = ex.assemble(rec, &spec).unwrap().values;
            let mut offset = 0;
            for d in &active {
                if d.one_hot {
                    for &x in &v[offset..offset + d.width] {
                        assert!(x == 0.0 || x == 1.0, "slot {} value {x}", d.name);
                    }
                }
                offset += d.width;
            }
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn set_formal_bits_hold_in_delta_at_t2() {
        let (ds, ex) = setup(60, 20);
        for rec in &ds.records {
            let trace = build_trace(rec, &ex.lexicon).unwrap();
            let formal = ex.extract_formal(&trace.state, &trace.act).unwrap();
            for (d, &bit) in ex.schema.group(FeatureGroup::Formal).zip(&formal) {
                if bit == 1.0 {
                    let prop = FeatureExtractor::formal_slot_proposition(
                        &trace.state,
                        &trace.act,
                        &d.kind,
                    )
                    .unwrap_or_else(|| {
                        panic!("{}: no proposition for set bit {}", rec.video_id, d.name)
                    });
                    assert!(
                        trace.state.holds(&prop),
                        "{}: bit {} set but {} does not hold",
                        rec.video_id,
                        d.name,
                        prop
                    );
                }
            }
        }
    }

    #[test]
    fn spec_labels_are_stable() {
        let spec = AblationSpec::new(&FeatureGroup::ALL);
        assert_eq!(spec.label(), "raw+formal+se");
        let spec =
            AblationSpec::new(&[FeatureGroup::Formal]).with_subset(ModalitySubset::EnsembleOnly);
        assert_eq!(spec.label(), "formal/ensemble");
        let spec = AblationSpec::new(&[FeatureGroup::Raw, FeatureGroup::Embedding])
            .with_subset(ModalitySubset::LanguageOnly)
            .with_filter(DependenceFilter::LinguisticOnly);
        assert_eq!(spec.label(), "raw+se/language/ling-feats");
    }
}
