//! Synthetic dataset generation.
//!
//! Stands in for the published EMRE export when it is not on disk: scenes of
//! tabletop objects with stored coordinates and qualitative relations,
//! referring expressions cycling through gesture / language / ensemble with
//! templatic utterances over the parser's grammar, and eight per-video
//! annotator scores drawn around a latent naturalness that depends on the
//! expression (modality, attributes, spatial PPs, distance distinctions), so
//! classifiers have real structure to find.

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DistinctionScope, EmreRecord, Modality};
use crate::names::{label_color, label_noun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub videos: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            videos: 200,
            seed: 7,
        }
    }
}

const OBJECT_POOL: [&str; 9] = [
    "Cup",
    "Knife",
    "Plate",
    "PurpleBlock1",
    "PurpleBlock2",
    "RedBlock1",
    "RedBlock2",
    "GreenBlock1",
    "GreenBlock2",
];

const TABLE: &str = "Table";
const NEAR_FAR_SPLIT: f64 = 0.9;

struct SceneObject {
    label: String,
    position: [f64; 3],
}

impl SceneObject {
    fn noun(&self) -> String {
        label_noun(&self.label)
    }

    fn color(&self) -> Option<String> {
        label_color(&self.label)
    }
}

fn surface_of(canonical: &str) -> &'static str {
    crate::parser::SPATIAL_SEEDS
        .iter()
        .find(|(_, c)| *c == canonical)
        .map(|(s, _)| *s)
        .expect("generator uses seeded spatial terms only")
}

fn relations_for(objects: &[SceneObject]) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for a in objects {
        if a.label != TABLE {
            out.push(("on".to_string(), a.label.clone(), TABLE.to_string()));
        }
    }
    for a in objects.iter().filter(|o| o.label != TABLE) {
        for b in objects.iter().filter(|o| o.label != TABLE) {
            if a.label == b.label {
                continue;
            }
            let dx = a.position[0] - b.position[0];
            let dz = a.position[2] - b.position[2];
            let dist = (dx * dx + dz * dz).sqrt();
            if dist > 0.7 {
                continue;
            }
            if dist < 0.45 {
                out.push(("near".to_string(), a.label.clone(), b.label.clone()));
            }
            if dz.abs() >= dx.abs() {
                let rel = if dz < 0.0 { "in_front" } else { "behind" };
                out.push((rel.to_string(), a.label.clone(), b.label.clone()));
            } else {
                let rel = if dx > 0.0 { "right" } else { "left" };
                out.push((rel.to_string(), a.label.clone(), b.label.clone()));
            }
        }
    }
    out
}

/// A relatum is usable when its noun+color description picks it out uniquely
/// among the non-target scene objects.
fn unique_relatum(objects: &[SceneObject], target: &str, candidate: &str) -> bool {
    let cand = objects.iter().find(|o| o.label == candidate).unwrap();
    objects
        .iter()
        .filter(|o| o.label != target && o.noun() == cand.noun() && o.color() == cand.color())
        .count()
        == 1
}

fn relatum_phrase(objects: &[SceneObject], label: &str) -> String {
    let obj = objects.iter().find(|o| o.label == label).unwrap();
    match obj.color() {
        Some(color) => format!("the {color} {}", obj.noun()),
        None => format!("the {}", obj.noun()),
    }
}

/// Generate a synthetic dataset.
pub fn generate(cfg: &SynthConfig) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let score_noise = Normal::new(0.0, 0.65).unwrap();
    let latent_noise = Normal::new(0.0, 0.25).unwrap();

    let mut records = Vec::with_capacity(cfg.videos);
    for video in 0..cfg.videos {
        let mut pool: Vec<&str> = OBJECT_POOL.to_vec();
        pool.shuffle(&mut rng);
        let count = rng.gen_range(4..=pool.len());
        let mut objects: Vec<SceneObject> = pool[..count]
            .iter()
            .map(|label| SceneObject {
                label: label.to_string(),
                position: [rng.gen_range(-0.9..0.9), 0.0, rng.gen_range(0.3..1.5)],
            })
            .collect();
        objects.push(SceneObject {
            label: TABLE.to_string(),
            position: [0.0, -0.1, 0.9],
        });

        let target_idx = rng.gen_range(0..count);
        let target = objects[target_idx].label.clone();
        let target_pos = objects[target_idx].position;
        let agent_distance =
            (target_pos[0].powi(2) + target_pos[1].powi(2) + target_pos[2].powi(2)).sqrt();

        let relations = relations_for(&objects);
        let modality = match video % 3 {
            0 => Modality::Gesture,
            1 => Modality::Language,
            _ => Modality::Ensemble,
        };

        let target_color = objects[target_idx].color();
        let target_noun = objects[target_idx].noun();
        let competitor_exists = objects
            .iter()
            .any(|o| o.label != target && o.noun() == target_noun && o.color() == target_color);
        let same_noun_exists = objects
            .iter()
            .any(|o| o.label != target && o.label != TABLE && o.noun() == target_noun);

        let mut utterance = String::new();
        let mut descriptors: Vec<String> = Vec::new();
        let mut uses_distinction = false;
        let mut used_other = false;
        let mut used_attribute = false;
        let mut pp_count = 0usize;

        if modality != Modality::Gesture {
            let other_form = competitor_exists && target_color.is_some() && rng.gen_bool(0.45);
            let dem = if other_form {
                used_other = true;
                "the"
            } else {
                let distance_dem_p = if modality == Modality::Ensemble {
                    0.75
                } else {
                    0.4
                };
                if rng.gen_bool(distance_dem_p) {
                    uses_distinction = true;
                    if target_pos[2] < NEAR_FAR_SPLIT {
                        "this"
                    } else {
                        "that"
                    }
                } else {
                    "the"
                }
            };

            let mut words: Vec<String> = vec![dem.to_string()];
            if used_other {
                words.push("other".to_string());
            }
            if let Some(color) = &target_color {
                if used_other || rng.gen_bool(0.85) {
                    words.push(color.clone());
                    used_attribute = true;
                }
            }
            words.push(target_noun.clone());

            let mut candidates: Vec<(String, String)> = relations
                .iter()
                .filter(|(_, subj, rel)| *subj == target && unique_relatum(&objects, &target, rel))
                .map(|(r, _, rel)| (r.clone(), rel.clone()))
                .collect();
            candidates.dedup();
            if rng.gen_bool(0.65) && !candidates.is_empty() {
                let mut picks = 1;
                if candidates.len() > 1 && rng.gen_bool(0.2) {
                    picks = 2;
                }
                candidates.shuffle(&mut rng);
                for (relation, relatum) in candidates.into_iter().take(picks) {
                    let phrase = format!(
                        "{} {}",
                        surface_of(&relation),
                        relatum_phrase(&objects, &relatum)
                    );
                    words.push(phrase.clone());
                    descriptors.push(phrase);
                    pp_count += 1;
                }
            }
            utterance = words.join(" ");
        }

        let distinction_scope = if uses_distinction {
            if same_noun_exists {
                DistinctionScope::SimilarObjects
            } else {
                DistinctionScope::EntireWorld
            }
        } else {
            DistinctionScope::NotApplicable
        };

        let base = match modality {
            Modality::Gesture => 1.9,
            Modality::Language => 3.3,
            Modality::Ensemble => 4.3,
        };
        let latent = base
            + 0.3 * (pp_count > 0) as u8 as f64
            + 0.2 * used_attribute as u8 as f64
            + 0.15 * uses_distinction as u8 as f64
            + 0.1 * used_other as u8 as f64
            + latent_noise.sample(&mut rng);
        let scores: Vec<u8> = (0..8)
            .map(|_| {
                (latent + score_noise.sample(&mut rng))
                    .round()
                    .clamp(1.0, 5.0) as u8
            })
            .collect();

        records.push(EmreRecord {
            video_id: format!("synth-{video:04}"),
            target_object: target,
            modality,
            agent_distance,
            uses_distance_distinction: uses_distinction,
            distinction_scope,
            utterance,
            relational_descriptors: descriptors,
            object_coordinates: objects
                .iter()
                .map(|o| (o.label.clone(), o.position))
                .collect(),
            relation_set: relations,
            scores,
        });
    }
    Dataset::from_records(records)
}

/// Sample `n` distinct-by-position utterances from the generator's grammar.
pub fn sample_utterances(n: usize, seed: u64) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut batch_seed = seed;
    while out.len() < n {
        let ds = generate(&SynthConfig {
            videos: 3 * n,
            seed: batch_seed,
        });
        out.extend(
            ds.records
                .into_iter()
                .filter(|r| !r.utterance.is_empty())
                .map(|r| r.utterance)
                .take(n - out.len()),
        );
        batch_seed = batch_seed.wrapping_add(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::validate;
    use crate::parser::build_lexicon;

    #[test]
    fn generated_dataset_is_valid() {
        let ds = generate(&SynthConfig {
            videos: 60,
            seed: 3,
        });
        assert_eq!(ds.records.len(), 60);
        let report = validate(&ds);
        assert!(report.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            videos: 30,
            seed: 11,
        };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = generate(&SynthConfig {
            videos: 30,
            seed: 12,
        });
        assert_ne!(generate(&cfg), other);
    }

    #[test]
    fn every_generated_utterance_parses_and_traces() {
        let ds = generate(&SynthConfig {
            videos: 90,
            seed: 5,
        });
        let (lex, unknown) = build_lexicon(&ds).unwrap();
        assert!(unknown.is_empty(), "unknown tokens: {unknown:?}");
        for rec in &ds.records {
            let trace = crate::trace::build_trace(rec, &lex)
                .unwrap_or_else(|e| panic!("{}: {e} ({})", rec.video_id, rec.utterance));
            assert_eq!(trace.state.clock, crate::common_ground::TimeStep::T2);
        }
    }

    #[test]
    fn modalities_are_balanced_and_consistent() {
        let ds = generate(&SynthConfig {
            videos: 90,
            seed: 2,
        });
        let count = |m: Modality| ds.records.iter().filter(|r| r.modality == m).count();
        assert_eq!(count(Modality::Gesture), 30);
        assert_eq!(count(Modality::Language), 30);
        assert_eq!(count(Modality::Ensemble), 30);
        for rec in &ds.records {
            if rec.modality == Modality::Gesture {
                assert!(rec.utterance.is_empty());
                assert!(rec.relational_descriptors.is_empty());
            } else {
                assert!(!rec.utterance.is_empty());
            }
        }
    }

    #[test]
    fn csv_roundtrip_preserves_every_field() {
        use crate::dataset::{load_dataset, write_csv, ColumnMapping, FileFormat};
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        let ds = generate(&SynthConfig {
            videos: 40,
            seed: 9,
        });
        write_csv(&ds, &path).unwrap();
        let loaded = load_dataset(&path, FileFormat::Csv, &ColumnMapping::default()).unwrap();
        assert_eq!(ds.records.len(), loaded.records.len());
        for (a, b) in ds.records.iter().zip(&loaded.records) {
            assert_eq!(a.video_id, b.video_id);
            assert_eq!(a.modality, b.modality);
            assert_eq!(a.utterance, b.utterance);
            assert_eq!(a.scores, b.scores);
            assert_eq!(a.relational_descriptors, b.relational_descriptors);
            assert_eq!(a.relation_set, b.relation_set);
            assert_eq!(a.object_coordinates.len(), b.object_coordinates.len());
            for (label, pos) in &a.object_coordinates {
                let loaded_pos = b.object_coordinates[label];
                for (x, y) in pos.iter().zip(loaded_pos) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
            assert!((a.agent_distance - b.agent_distance).abs() < 1e-12);
        }
        assert_eq!(ds.object_inventory, loaded.object_inventory);
        assert_eq!(ds.term_vocabulary, loaded.term_vocabulary);
    }

    #[test]
    fn scores_track_modality_preferences() {
        let ds = generate(&SynthConfig {
            videos: 150,
            seed: 21,
        });
        let mean_score = |m: Modality| {
            let (sum, n) = ds
                .records
                .iter()
                .filter(|r| r.modality == m)
                .flat_map(|r| r.scores.iter())
                .fold((0.0, 0usize), |(s, n), &v| (s + v as f64, n + 1));
            sum / n as f64
        };
        let g = mean_score(Modality::Gesture);
        let l = mean_score(Modality::Language);
        let e = mean_score(Modality::Ensemble);
        assert!(g < l && l < e, "gesture {g}, language {l}, ensemble {e}");
    }
}
