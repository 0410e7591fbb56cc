//! Per-record common-ground reconstruction.
//!
//! Each EMRE record replays the same three-step scene: present the stored
//! scene at `t0`, raise the target at `t1`, then perform the recorded
//! communicative act at `t2` (pointing gesture, parsed utterance, or an
//! aligned ensemble of both). Coordinates in the export are agent-relative,
//! so the pointing direction is the unit vector from the origin to the
//! target.

use serde::Serialize;

use crate::common_ground::{
    initialize_common_ground, CommonGroundState, EmbeddingSpace, Entity, UpdateEvent,
};
use crate::dataset::{EmreRecord, Modality};
use crate::error::{Error, Result};
use crate::parser::{align, parse_re, CommunicativeAct, Gesture, Lexicon};

/// The scene a record stores: entities, relation triples, and the embedding
/// space spanned by the coordinates.
pub fn scene_from_record(
    rec: &EmreRecord,
) -> (Vec<Entity>, Vec<(String, String, String)>, EmbeddingSpace) {
    let entities: Vec<Entity> = rec
        .object_coordinates
        .iter()
        .map(|(label, pos)| Entity::new(label, *pos))
        .collect();

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_z, mut max_z) = (f64::INFINITY, f64::NEG_INFINITY);
    for e in &entities {
        min_x = min_x.min(e.position[0]);
        max_x = max_x.max(e.position[0]);
        min_z = min_z.min(e.position[2]);
        max_z = max_z.max(e.position[2]);
    }
    let space = if entities.is_empty() {
        EmbeddingSpace::default()
    } else {
        EmbeddingSpace {
            surface_min: [min_x, min_z],
            surface_max: [max_x, max_z],
            near_far_boundary: (min_z + max_z) / 2.0,
        }
    };
    (entities, rec.relation_set.clone(), space)
}

fn pointing_gesture(rec: &EmreRecord) -> Result<Gesture> {
    let pos = rec
        .object_coordinates
        .get(&rec.target_object)
        .ok_or_else(|| Error::UnknownEntity(rec.target_object.clone()))?;
    let norm = (pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]).sqrt();
    let direction = if norm > 0.0 {
        [pos[0] / norm, pos[1] / norm, pos[2] / norm]
    } else {
        [0.0, 0.0, 1.0]
    };
    Ok(Gesture {
        direction,
        object: rec.target_object.clone(),
    })
}

/// A record's full update trace: the `t2` state, the act that produced it,
/// and the `t2` events.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTrace {
    pub state: CommonGroundState,
    pub act: CommunicativeAct,
    pub act_events: Vec<UpdateEvent>,
}

/// Replay a record through `t0 -> t1 -> t2`.
pub fn build_trace(rec: &EmreRecord, lex: &Lexicon) -> Result<GroundTrace> {
    let (entities, relations, space) = scene_from_record(rec);
    let state = initialize_common_ground(entities, relations, space)?;
    let state = state.mark_target(&rec.target_object)?;

    let act = match rec.modality {
        Modality::Gesture => CommunicativeAct::gesture_only(pointing_gesture(rec)?)?,
        Modality::Language => {
            let mut parse = parse_re(&rec.utterance, lex)?;
            parse.resolve_against_scene(&state.perceived, &rec.target_object)?;
            CommunicativeAct::speech_only(parse)?
        }
        Modality::Ensemble => {
            let mut parse = parse_re(&rec.utterance, lex)?;
            parse.resolve_against_scene(&state.perceived, &rec.target_object)?;
            align(parse, pointing_gesture(rec)?, &state.perceived)?
        }
    };
    let (state, act_events) = state.apply_act(&act)?;
    Ok(GroundTrace {
        state,
        act,
        act_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::common_ground::TimeStep;
    use crate::dataset::DistinctionScope;
    use crate::logic::{AgentRole, Proposition};
    use crate::parser::ActConfiguration;
    use std::collections::BTreeMap;

    fn record(modality: Modality, utterance: &str) -> EmreRecord {
        let mut coords = BTreeMap::new();
        coords.insert("RedBlock1".to_string(), [0.2, 0.0, 0.5]);
        coords.insert("RedBlock2".to_string(), [-0.4, 0.0, 0.9]);
        coords.insert("Knife".to_string(), [0.3, 0.0, 0.8]);
        EmreRecord {
            video_id: "v1".into(),
            target_object: "RedBlock1".into(),
            modality,
            agent_distance: 0.5385,
            uses_distance_distinction: false,
            distinction_scope: DistinctionScope::NotApplicable,
            utterance: utterance.to_string(),
            relational_descriptors: vec![],
            object_coordinates: coords,
            relation_set: vec![("in_front".into(), "RedBlock1".into(), "Knife".into())],
            scores: vec![4; 8],
        }
    }

    #[test]
    fn gesture_trace_reaches_t2_with_pointing_fact() {
        let lex = crate::parser::test_lexicon();
        let trace = build_trace(&record(Modality::Gesture, ""), &lex).unwrap();
        assert_eq!(trace.state.clock, TimeStep::T2);
        assert_eq!(trace.act.configuration(), ActConfiguration::GestureOnly);
        assert_eq!(trace.act_events.len(), 1);
        let g = trace.act.gesture.as_ref().unwrap();
        let norm: f64 = g.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ensemble_trace_aligns_gesture_with_target() {
        let lex = crate::parser::test_lexicon();
        let trace = build_trace(
            &record(Modality::Ensemble, "that red block in front of the knife"),
            &lex,
        )
        .unwrap();
        let link = trace.act.alignment.as_ref().unwrap();
        assert_eq!(link.object, "RedBlock1");
        assert_eq!(trace.act_events.len(), 2);
        // Speech introduced the avatar's grasp of the spatial term.
        assert!(trace.state.holds(&Proposition::knows(
            AgentRole::Avatar,
            Proposition::term_meaning("in_front")
        )));
        // Every content term yields an observer-knows-avatar-knows meaning
        // fact.
        for term in ["that", "red", "block", "in_front", "knife"] {
            let fact = Proposition::knows(
                AgentRole::Observer,
                Proposition::knows(AgentRole::Avatar, Proposition::term_meaning(term)),
            );
            assert!(trace.state.holds(&fact), "missing {fact}");
        }
        // And its perception of the relatum.
        assert!(trace.state.holds(&Proposition::perceives(
            AgentRole::Avatar,
            Proposition::object("Knife")
        )));
    }

    #[test]
    fn language_trace_resolves_relata() {
        let lex = crate::parser::test_lexicon();
        let trace = build_trace(
            &record(Modality::Language, "the red block in front of the knife"),
            &lex,
        )
        .unwrap();
        let parse = trace.act.speech.as_ref().unwrap();
        assert_eq!(
            parse.spatial_pps[0].1.resolved_entity.as_deref(),
            Some("Knife")
        );
        assert!(trace.act.gesture.is_none());
    }

    #[test]
    fn ensemble_delta_is_union_of_single_modality_runs() {
        let lex = crate::parser::test_lexicon();
        let gesture = build_trace(&record(Modality::Gesture, ""), &lex).unwrap();
        let language = build_trace(
            &record(Modality::Language, "that red block in front of the knife"),
            &lex,
        )
        .unwrap();
        let ensemble = build_trace(
            &record(Modality::Ensemble, "that red block in front of the knife"),
            &lex,
        )
        .unwrap();
        let union: std::collections::BTreeSet<_> = gesture
            .state
            .delta
            .union(&language.state.delta)
            .cloned()
            .collect();
        assert_eq!(ensemble.state.delta, union);
        assert!(ensemble.state.delta.len() > gesture.state.delta.len());
        assert!(ensemble.state.delta.len() > language.state.delta.len());
    }
}
