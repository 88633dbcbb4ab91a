//! Fusion of several voice-activity systems into one speech timeline:
//! frame-level majority voting, short-silence bridging, and pruning of
//! segments far from ASR-detected speech.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::timeline::{frame_count, Segment, Timeline, TIME_EPS};

/// How the ASR-distance prune interprets "far from ASR speech".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AsrPruneGranularity {
    /// Whole fused segments are kept or removed (boundary-to-boundary distance).
    #[default]
    Segment,
    /// Any part of the fused speech farther than the distance bound is trimmed.
    Fine,
}

#[derive(Debug, Clone)]
pub struct FusionConfig {
    /// Voting resolution in seconds.
    pub frame_step: f64,
    /// Internal silences strictly shorter than this are relabeled as speech.
    pub fill_gap: f64,
    /// Fused segments farther than this from ASR speech are removed.
    pub asr_max_distance: f64,
    pub asr_prune_granularity: AsrPruneGranularity,
    /// Per-system silence-fill lengths used when smoothing an individual
    /// system's output for inspection or scoring; the vote itself always runs
    /// on the raw outputs.
    pub per_system_fill: BTreeMap<String, f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        let mut per_system_fill = BTreeMap::new();
        per_system_fill.insert("energy".to_string(), 0.3);
        per_system_fill.insert("dnn".to_string(), 0.7);
        per_system_fill.insert("asr".to_string(), 1.1);
        Self {
            frame_step: 0.01,
            fill_gap: 0.6,
            asr_max_distance: 0.8,
            asr_prune_granularity: AsrPruneGranularity::Segment,
            per_system_fill,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_step <= 0.0 {
            return Err(Error::config("frame_step must be positive"));
        }
        if self.fill_gap < 0.0 || self.asr_max_distance < 0.0 {
            return Err(Error::config("fusion durations must be non-negative"));
        }
        if self.per_system_fill.values().any(|&v| v < 0.0) {
            return Err(Error::config("per-system fill lengths must be non-negative"));
        }
        Ok(())
    }

    /// Smoothed form of one system's output, using its tuned fill length.
    pub fn fill_for_system(&self, system: &str, speech: &Timeline) -> Timeline {
        match self.per_system_fill.get(system) {
            Some(&gap) => fill_short_silence(speech, gap),
            None => speech.normalize(),
        }
    }
}

/// Relabel internal silences strictly shorter than `max_gap` as speech.
/// Gaps of exactly `max_gap` (within the time tolerance) are kept. Only
/// internal gaps change, so this is not a more tolerant detection threshold.
pub fn fill_short_silence(speech: &Timeline, max_gap: f64) -> Timeline {
    let norm = speech.normalize();
    if norm.is_empty() {
        return norm;
    }
    let mut out: Vec<Segment> = Vec::with_capacity(norm.len());
    for seg in norm.segments() {
        match out.last_mut() {
            Some(last) if seg.onset() - last.offset() < max_gap - TIME_EPS => {
                *last = Segment::new(last.onset(), seg.offset()).expect("widening keeps order");
            }
            _ => out.push(*seg),
        }
    }
    Timeline::from_segments(out)
}

/// Frame-level majority vote: a frame is speech iff strictly more than half
/// of the systems mark it as speech. The voted frames are converted back to
/// segments with boundaries on the frame grid.
pub fn majority_vote(systems: &[Timeline], frame_step: f64, horizon: f64) -> Result<Timeline> {
    if systems.is_empty() {
        return Err(Error::invalid("majority_vote: empty system list"));
    }
    let n = frame_count(frame_step, horizon)?;
    let mut counts = vec![0usize; n];
    for system in systems {
        for (i, on) in system.quantize(frame_step, horizon)?.iter().enumerate() {
            if *on {
                counts[i] += 1;
            }
        }
    }
    let needed = systems.len() / 2 + 1;
    let frames: Vec<bool> = counts.into_iter().map(|c| c >= needed).collect();
    Ok(frames_to_timeline(&frames, frame_step))
}

/// Merge consecutive true frames into segments with boundaries at i·frame_step.
pub fn frames_to_timeline(frames: &[bool], frame_step: f64) -> Timeline {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &on) in frames.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(
                    Segment::new(s as f64 * frame_step, i as f64 * frame_step)
                        .expect("non-empty frame run"),
                );
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(
            Segment::new(s as f64 * frame_step, frames.len() as f64 * frame_step)
                .expect("non-empty frame run"),
        );
    }
    Timeline::from_segments(out)
}

/// Remove each fused segment whose boundary-to-boundary distance to ASR
/// speech exceeds `max_distance`; segments at or under the bound are kept
/// whole.
pub fn asr_distance_prune(fused: &Timeline, asr_speech: &Timeline, max_distance: f64) -> Timeline {
    let asr = asr_speech.normalize();
    let kept = fused
        .normalize()
        .segments()
        .iter()
        .filter(|seg| asr.distance(seg) <= max_distance + TIME_EPS)
        .copied()
        .collect();
    Timeline::from_segments(kept)
}

/// Fine-grained variant: keep only the parts of the fused speech within
/// `max_distance` of ASR speech.
pub fn asr_distance_prune_fine(fused: &Timeline, asr_speech: &Timeline, max_distance: f64) -> Timeline {
    fused.intersect(&asr_speech.dilate(max_distance))
}

/// Intermediate and final stages of the fusion, each inspectable on its own.
#[derive(Debug, Clone)]
pub struct FusionStages {
    /// Majority vote over the raw system outputs.
    pub voted: Timeline,
    /// Vote with short internal silences bridged.
    pub filled: Timeline,
    /// Final output after ASR-distance pruning (equal to `filled` when no
    /// system is tagged "asr").
    pub fused: Timeline,
}

/// Full fusion: majority vote on raw outputs, short-silence fill, then
/// ASR-distance pruning against the system tagged `asr` (when present).
/// A single system skips the vote and goes straight to the fill.
pub fn fuse(systems: &[(String, Timeline)], cfg: &FusionConfig, horizon: f64) -> Result<FusionStages> {
    cfg.validate()?;
    if systems.is_empty() {
        return Err(Error::invalid("fuse: empty system list"));
    }
    let voted = if systems.len() == 1 {
        // Nothing to vote over; quantize for grid-consistent output.
        let frames = systems[0].1.quantize(cfg.frame_step, horizon)?;
        frames_to_timeline(&frames, cfg.frame_step)
    } else {
        let raw: Vec<Timeline> = systems.iter().map(|(_, t)| t.clone()).collect();
        majority_vote(&raw, cfg.frame_step, horizon)?
    };
    let filled = fill_short_silence(&voted, cfg.fill_gap);
    let fused = match systems.iter().find(|(name, _)| name == "asr") {
        Some((_, asr)) => match cfg.asr_prune_granularity {
            AsrPruneGranularity::Segment => asr_distance_prune(&filled, asr, cfg.asr_max_distance),
            AsrPruneGranularity::Fine => asr_distance_prune_fine(&filled, asr, cfg.asr_max_distance),
        },
        None => filled.clone(),
    };
    Ok(FusionStages { voted, filled, fused })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn tl(pairs: &[(f64, f64)]) -> Timeline {
        Timeline::from_segments(
            pairs
                .iter()
                .map(|&(a, b)| Segment::new(a, b).unwrap())
                .collect(),
        )
    }

    fn as_pairs(t: &Timeline) -> Vec<(f64, f64)> {
        t.normalize()
            .segments()
            .iter()
            .map(|s| (s.onset(), s.offset()))
            .collect()
    }

    #[test]
    fn fill_absorbs_short_gap() {
        assert_eq!(as_pairs(&fill_short_silence(&tl(&[(0.0, 1.0), (1.4, 2.0)]), 0.6)), vec![(0.0, 2.0)]);
    }

    #[test]
    fn fill_keeps_boundary_gap() {
        // gap of exactly 0.6 is not strictly shorter than 0.6
        let out = fill_short_silence(&tl(&[(0.0, 1.0), (1.6, 2.0)]), 0.6);
        assert_eq!(as_pairs(&out), vec![(0.0, 1.0), (1.6, 2.0)]);
    }

    #[test]
    fn fill_cascades_left_to_right() {
        let out = fill_short_silence(&tl(&[(0.0, 1.0), (1.3, 2.0), (2.4, 3.0)]), 0.6);
        assert_eq!(as_pairs(&out), vec![(0.0, 3.0)]);
    }

    #[test]
    fn fill_monotone_and_idempotent() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut segs = Vec::new();
            let mut cursor = 0.0;
            for _ in 0..rng.random_range(1..10) {
                cursor += rng.random_range(0.05..1.5);
                let len = rng.random_range(0.05..2.0);
                segs.push((cursor, cursor + len));
                cursor += len;
            }
            let t = tl(&segs);
            let gap = rng.random_range(0.0..1.0);
            let filled = fill_short_silence(&t, gap);
            // monotone: output covers input
            assert!((filled.intersect(&t).duration() - t.duration()).abs() < 1e-9);
            // idempotent
            let twice = fill_short_silence(&filled, gap);
            assert_eq!(as_pairs(&twice), as_pairs(&filled));
        }
    }

    #[test]
    fn vote_unanimity_is_identity_at_frame_resolution() {
        let t = tl(&[(0.1, 0.5), (0.8, 1.2)]);
        let out = majority_vote(&[t.clone(), t.clone(), t.clone()], 0.01, 1.5).unwrap();
        assert_eq!(as_pairs(&out), vec![(0.1, 0.5), (0.8, 1.2)]);
    }

    #[test]
    fn vote_two_of_three() {
        let out = majority_vote(
            &[tl(&[(0.0, 1.0)]), tl(&[(0.0, 1.0)]), Timeline::new()],
            0.01,
            1.0,
        )
        .unwrap();
        assert_eq!(as_pairs(&out), vec![(0.0, 1.0)]);
    }

    #[test]
    fn vote_staggered_case() {
        let out = majority_vote(
            &[tl(&[(0.0, 1.0)]), tl(&[(0.5, 1.5)]), tl(&[(0.9, 2.0)])],
            0.01,
            2.0,
        )
        .unwrap();
        assert_eq!(as_pairs(&out), vec![(0.5, 1.5)]);
    }

    #[test]
    fn vote_requires_systems() {
        assert!(majority_vote(&[], 0.01, 1.0).is_err());
    }

    #[test]
    fn vote_bounded_by_union_and_intersection() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut systems = Vec::new();
            for _ in 0..3 {
                let mut segs = Vec::new();
                let mut cursor = 0.0;
                for _ in 0..rng.random_range(1..6) {
                    cursor += rng.random_range(0.0..0.8);
                    let len = rng.random_range(0.05..1.0);
                    segs.push((cursor, cursor + len));
                    cursor += len;
                }
                systems.push(tl(&segs));
            }
            let horizon = systems.iter().map(Timeline::extent).fold(0.0f64, f64::max);
            let voted = majority_vote(&systems, 0.01, horizon).unwrap();
            let union = systems.iter().fold(Timeline::new(), |acc, t| acc.union(t));
            let inter = systems[0].intersect(&systems[1]).intersect(&systems[2]);
            // intersection ⊆ voted ⊆ union, checked on the shared frame grid
            let vf = voted.quantize(0.01, horizon).unwrap();
            let uf = union.quantize(0.01, horizon).unwrap();
            let inf = inter.quantize(0.01, horizon).unwrap();
            for i in 0..vf.len() {
                assert!(!vf[i] || uf[i], "voted frame {i} outside union");
                assert!(!inf[i] || vf[i], "intersection frame {i} missing from vote");
            }
        }
    }

    #[test]
    fn prune_keeps_intersecting() {
        let out = asr_distance_prune(&tl(&[(0.0, 1.0)]), &tl(&[(0.5, 2.0)]), 0.8);
        assert_eq!(as_pairs(&out), vec![(0.0, 1.0)]);
    }

    #[test]
    fn prune_removes_far_segment() {
        let out = asr_distance_prune(&tl(&[(0.0, 1.0), (5.0, 6.0)]), &tl(&[(0.0, 1.0)]), 0.8);
        assert_eq!(as_pairs(&out), vec![(0.0, 1.0)]);
    }

    #[test]
    fn prune_keeps_within_bound() {
        // distance 0.5 <= 0.8
        let out = asr_distance_prune(&tl(&[(0.0, 1.0)]), &tl(&[(1.5, 2.0)]), 0.8);
        assert_eq!(as_pairs(&out), vec![(0.0, 1.0)]);
    }

    #[test]
    fn fuse_identity_on_identical_gapless_inputs() {
        let t = tl(&[(0.0, 2.0)]);
        let systems = vec![
            ("energy".to_string(), t.clone()),
            ("dnn".to_string(), t.clone()),
            ("asr".to_string(), t.clone()),
        ];
        let stages = fuse(&systems, &FusionConfig::default(), 2.0).unwrap();
        assert_eq!(as_pairs(&stages.fused), vec![(0.0, 2.0)]);
    }

    #[test]
    fn fuse_far_from_asr_becomes_empty() {
        let systems = vec![
            ("energy".to_string(), tl(&[(5.0, 6.0)])),
            ("dnn".to_string(), tl(&[(5.0, 6.0)])),
            ("asr".to_string(), tl(&[(0.0, 1.0)])),
        ];
        let stages = fuse(&systems, &FusionConfig::default(), 6.0).unwrap();
        // vote keeps (5,6) (2 of 3), but it sits 4 s away from ASR speech
        assert_eq!(as_pairs(&stages.voted), vec![(5.0, 6.0)]);
        assert!(stages.fused.is_empty());
    }

    #[test]
    fn fuse_with_identical_systems_equals_filled_input() {
        let t = tl(&[(0.0, 1.0), (1.3, 2.0), (4.0, 5.0)]);
        let systems = vec![
            ("a".to_string(), t.clone()),
            ("b".to_string(), t.clone()),
            ("c".to_string(), t.clone()),
        ];
        let stages = fuse(&systems, &FusionConfig::default(), 5.0).unwrap();
        let expected = fill_short_silence(&t, 0.6);
        assert_eq!(as_pairs(&stages.fused), as_pairs(&expected));
    }

    #[test]
    fn prune_output_subset_of_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        for _ in 0..100 {
            let mk = |rng: &mut ChaCha20Rng| {
                let mut segs = Vec::new();
                let mut cursor = 0.0;
                for _ in 0..rng.random_range(1..5) {
                    cursor += rng.random_range(0.0..2.0);
                    let len = rng.random_range(0.1..1.5);
                    segs.push((cursor, cursor + len));
                    cursor += len;
                }
                tl(&segs)
            };
            let fused = mk(&mut rng);
            let asr = mk(&mut rng);
            let d = rng.random_range(0.0..1.5);
            let pruned = asr_distance_prune(&fused, &asr, d);
            assert!((pruned.intersect(&fused).duration() - pruned.duration()).abs() < 1e-9);
            // segments intersecting asr are always kept
            for seg in fused.normalize().segments() {
                if asr.normalize().segments().iter().any(|a| a.intersects(seg)) {
                    assert!(pruned.normalize().segments().iter().any(|p| p == seg));
                }
            }
        }
    }
}
