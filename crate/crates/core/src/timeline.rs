//! Interval algebra over time segments.
//!
//! Time is abstract 64-bit floating seconds; all comparisons use a 1e-9 s
//! tolerance, far below the centisecond precision of diarization annotation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Comparison tolerance for times, in seconds.
pub const TIME_EPS: f64 = 1e-9;

/// A half-open time interval with strictly positive length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    onset: f64,
    offset: f64,
}

impl Segment {
    pub fn new(onset: f64, offset: f64) -> Result<Self> {
        if !onset.is_finite() || !offset.is_finite() {
            return Err(Error::invalid(format!(
                "segment times must be finite, got ({onset}, {offset})"
            )));
        }
        if offset <= onset {
            return Err(Error::invalid(format!(
                "segment must have positive length, got ({onset}, {offset})"
            )));
        }
        Ok(Self { onset, offset })
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.onset + self.offset)
    }

    /// Membership of an instant, half-open: [onset, offset).
    pub fn contains(&self, t: f64) -> bool {
        t >= self.onset - TIME_EPS && t < self.offset - TIME_EPS
    }

    /// True when the open interiors intersect (touching does not count).
    pub fn intersects(&self, other: &Segment) -> bool {
        self.onset < other.offset - TIME_EPS && other.onset < self.offset - TIME_EPS
    }

    /// Boundary-to-boundary gap; 0 when the segments intersect or touch.
    pub fn gap_to(&self, other: &Segment) -> f64 {
        (other.onset - self.offset).max(self.onset - other.offset).max(0.0)
    }

    /// Intersection of two segments, if longer than the time tolerance.
    pub fn intersection(&self, other: &Segment) -> Option<Segment> {
        let onset = self.onset.max(other.onset);
        let offset = self.offset.min(other.offset);
        if offset - onset > TIME_EPS {
            Some(Segment { onset, offset })
        } else {
            None
        }
    }
}

/// A set of segments. May hold overlapping or unsorted segments; most
/// operations work on the normalized (sorted, merged) form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timeline {
    segments: Vec<Segment>,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_segments(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn push(&mut self, segment: Segment) {
        self.segments.push(segment);
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Sorted, pairwise non-overlapping form. Touching segments are merged.
    /// Idempotent, and preserves the total covered measure.
    pub fn normalize(&self) -> Timeline {
        if self.segments.is_empty() {
            return Timeline::new();
        }
        let mut segs = self.segments.clone();
        segs.sort_by(|a, b| {
            a.onset
                .partial_cmp(&b.onset)
                .unwrap()
                .then(a.offset.partial_cmp(&b.offset).unwrap())
        });
        let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
        for seg in segs {
            match out.last_mut() {
                Some(last) if seg.onset <= last.offset + TIME_EPS => {
                    if seg.offset > last.offset {
                        last.offset = seg.offset;
                    }
                }
                _ => out.push(seg),
            }
        }
        Timeline { segments: out }
    }

    /// Total covered measure in seconds (overlaps counted once).
    pub fn duration(&self) -> f64 {
        self.normalize().segments.iter().map(Segment::duration).sum()
    }

    /// Largest offset over all segments, or 0 when empty.
    pub fn extent(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.offset)
            .fold(0.0f64, f64::max)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.segments.iter().any(|s| s.contains(t))
    }

    /// Complement of the timeline inside `within`.
    pub fn gaps(&self, within: &Segment) -> Timeline {
        let norm = self.normalize();
        let mut out = Vec::new();
        let mut cursor = within.onset;
        for seg in &norm.segments {
            if seg.offset <= within.onset + TIME_EPS {
                continue;
            }
            if seg.onset >= within.offset - TIME_EPS {
                break;
            }
            let lo = seg.onset.max(within.onset);
            if lo - cursor > TIME_EPS {
                out.push(Segment {
                    onset: cursor,
                    offset: lo,
                });
            }
            cursor = cursor.max(seg.offset);
        }
        if within.offset - cursor > TIME_EPS {
            out.push(Segment {
                onset: cursor,
                offset: within.offset,
            });
        }
        Timeline { segments: out }
    }

    /// Minimum boundary-to-boundary distance from `segment` to the timeline;
    /// 0 when they intersect, +infinity for an empty timeline.
    pub fn distance(&self, segment: &Segment) -> f64 {
        self.segments
            .iter()
            .map(|s| s.gap_to(segment))
            .fold(f64::INFINITY, f64::min)
    }

    /// Boolean frame sequence of length ceil(horizon / frame_step).
    /// Frame i is true iff its center (i + 0.5)·frame_step lies inside the
    /// timeline.
    pub fn quantize(&self, frame_step: f64, horizon: f64) -> Result<Vec<bool>> {
        let n = frame_count(frame_step, horizon)?;
        let norm = self.normalize();
        let mut frames = vec![false; n];
        let mut idx = 0usize;
        for (i, frame) in frames.iter_mut().enumerate() {
            let c = (i as f64 + 0.5) * frame_step;
            while idx < norm.segments.len() && c >= norm.segments[idx].offset - TIME_EPS {
                idx += 1;
            }
            if idx < norm.segments.len() {
                *frame = c >= norm.segments[idx].onset - TIME_EPS;
            }
        }
        Ok(frames)
    }

    /// Intersection with another timeline (both taken in normalized form).
    pub fn intersect(&self, other: &Timeline) -> Timeline {
        let a = self.normalize();
        let b = other.normalize();
        let mut out = Vec::new();
        let (mut i, mut j) = (0usize, 0usize);
        while i < a.segments.len() && j < b.segments.len() {
            let sa = &a.segments[i];
            let sb = &b.segments[j];
            if let Some(seg) = sa.intersection(sb) {
                out.push(seg);
            }
            if sa.offset < sb.offset {
                i += 1;
            } else {
                j += 1;
            }
        }
        Timeline { segments: out }
    }

    /// Union with another timeline, normalized.
    pub fn union(&self, other: &Timeline) -> Timeline {
        let mut segs = self.segments.clone();
        segs.extend_from_slice(&other.segments);
        Timeline { segments: segs }.normalize()
    }

    /// Every point within `radius` of the timeline.
    pub fn dilate(&self, radius: f64) -> Timeline {
        let segs = self
            .segments
            .iter()
            .map(|s| Segment {
                onset: s.onset - radius,
                offset: s.offset + radius,
            })
            .collect();
        Timeline { segments: segs }.normalize()
    }
}

/// Number of frames covering `horizon` at `frame_step`, guarding against
/// floating-point spill at exact multiples.
pub fn frame_count(frame_step: f64, horizon: f64) -> Result<usize> {
    if frame_step <= 0.0 || !frame_step.is_finite() {
        return Err(Error::invalid(format!(
            "frame_step must be positive, got {frame_step}"
        )));
    }
    if horizon < 0.0 || !horizon.is_finite() {
        return Err(Error::invalid(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    Ok((horizon / frame_step - TIME_EPS).ceil().max(0.0) as usize)
}

/// One speaker turn of an [`Annotation`].
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    pub segment: Segment,
    pub speaker: String,
}

impl Turn {
    pub fn new(segment: Segment, speaker: impl Into<String>) -> Result<Self> {
        let speaker = speaker.into();
        if speaker.is_empty() {
            return Err(Error::invalid("speaker label must be non-empty"));
        }
        Ok(Self { segment, speaker })
    }
}

/// Speaker-labeled interval set for one recording. Turns of different
/// speakers may overlap (overlapped speech).
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    recording_id: String,
    turns: Vec<Turn>,
}

impl Annotation {
    pub fn new(recording_id: impl Into<String>) -> Self {
        Self {
            recording_id: recording_id.into(),
            turns: Vec::new(),
        }
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn push(&mut self, turn: Turn) {
        self.turns.push(turn);
    }

    pub fn add_turn(&mut self, segment: Segment, speaker: impl Into<String>) -> Result<()> {
        self.turns.push(Turn::new(segment, speaker)?);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Distinct speaker labels, sorted.
    pub fn speakers(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.turns.iter().map(|t| t.speaker.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn n_speakers(&self) -> usize {
        self.turns
            .iter()
            .map(|t| t.speaker.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Normalized timeline of one speaker's turns.
    pub fn speaker_timeline(&self, speaker: &str) -> Timeline {
        Timeline::from_segments(
            self.turns
                .iter()
                .filter(|t| t.speaker == speaker)
                .map(|t| t.segment)
                .collect(),
        )
        .normalize()
    }

    /// Normalized union of all turns (anyone speaking).
    pub fn support(&self) -> Timeline {
        Timeline::from_segments(self.turns.iter().map(|t| t.segment).collect()).normalize()
    }

    pub fn extent(&self) -> f64 {
        self.turns
            .iter()
            .map(|t| t.segment.offset())
            .fold(0.0f64, f64::max)
    }

    /// Canonical form: per-speaker overlapping turns merged, turns sorted by
    /// (onset, speaker). Cross-speaker overlaps are kept.
    pub fn normalized_turns(&self) -> Annotation {
        let mut out = Annotation::new(self.recording_id.clone());
        for speaker in self.speakers() {
            for seg in self.speaker_timeline(&speaker).segments() {
                out.turns.push(Turn {
                    segment: *seg,
                    speaker: speaker.clone(),
                });
            }
        }
        out.turns.sort_by(|a, b| {
            a.segment
                .onset()
                .partial_cmp(&b.segment.onset())
                .unwrap()
                .then(a.segment.offset().partial_cmp(&b.segment.offset()).unwrap())
                .then(a.speaker.cmp(&b.speaker))
        });
        out
    }

    /// Regions where at least two distinct speakers are active.
    pub fn overlap_regions(&self) -> Timeline {
        let speakers = self.speakers();
        let mut out = Timeline::new();
        for i in 0..speakers.len() {
            let ti = self.speaker_timeline(&speakers[i]);
            for j in (i + 1)..speakers.len() {
                let tj = self.speaker_timeline(&speakers[j]);
                out = out.union(&ti.intersect(&tj));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tl(pairs: &[(f64, f64)]) -> Timeline {
        Timeline::from_segments(
            pairs
                .iter()
                .map(|&(a, b)| Segment::new(a, b).unwrap())
                .collect(),
        )
    }

    fn seg(a: f64, b: f64) -> Segment {
        Segment::new(a, b).unwrap()
    }

    fn as_pairs(t: &Timeline) -> Vec<(f64, f64)> {
        t.segments().iter().map(|s| (s.onset(), s.offset())).collect()
    }

    #[test]
    fn segment_rejects_degenerate() {
        assert!(Segment::new(1.0, 1.0).is_err());
        assert!(Segment::new(2.0, 1.0).is_err());
        assert!(Segment::new(0.0, f64::NAN).is_err());
        assert!(Segment::new(f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn normalize_merges_overlapping() {
        assert_eq!(as_pairs(&tl(&[(0.0, 1.0), (0.5, 2.0)]).normalize()), vec![(0.0, 2.0)]);
    }

    #[test]
    fn normalize_merges_touching() {
        assert_eq!(as_pairs(&tl(&[(0.0, 1.0), (1.0, 2.0)]).normalize()), vec![(0.0, 2.0)]);
    }

    #[test]
    fn normalize_sorts() {
        assert_eq!(
            as_pairs(&tl(&[(3.0, 4.0), (0.0, 1.0)]).normalize()),
            vec![(0.0, 1.0), (3.0, 4.0)]
        );
    }

    #[test]
    fn gaps_basic() {
        let t = tl(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(
            as_pairs(&t.gaps(&seg(0.0, 5.0))),
            vec![(0.0, 1.0), (2.0, 3.0), (4.0, 5.0)]
        );
    }

    #[test]
    fn gaps_empty_input() {
        assert_eq!(as_pairs(&Timeline::new().gaps(&seg(0.0, 5.0))), vec![(0.0, 5.0)]);
    }

    #[test]
    fn gaps_full_cover() {
        assert!(tl(&[(0.0, 5.0)]).gaps(&seg(0.0, 5.0)).is_empty());
    }

    #[test]
    fn distance_cases() {
        assert_abs_diff_eq!(tl(&[(0.0, 1.0)]).distance(&seg(2.0, 3.0)), 1.0);
        assert_abs_diff_eq!(tl(&[(1.0, 2.0)]).distance(&seg(0.5, 1.5)), 0.0);
        // min(4−1, 6−5) = 1.0
        assert_abs_diff_eq!(tl(&[(0.0, 1.0), (6.0, 7.0)]).distance(&seg(4.0, 5.0)), 1.0);
        assert_eq!(Timeline::new().distance(&seg(0.0, 1.0)), f64::INFINITY);
    }

    #[test]
    fn quantize_hand_enumeration() {
        // centers 0.005..0.045 inside (0, 0.05); 0.055.. outside
        let frames = tl(&[(0.0, 0.05)]).quantize(0.01, 0.1).unwrap();
        assert_eq!(frames.len(), 10);
        assert_eq!(frames, vec![true, true, true, true, true, false, false, false, false, false]);
    }

    #[test]
    fn quantize_empty_and_full() {
        assert_eq!(Timeline::new().quantize(0.01, 0.1).unwrap(), vec![false; 10]);
        assert_eq!(tl(&[(0.0, 0.1)]).quantize(0.01, 0.1).unwrap(), vec![true; 10]);
    }

    #[test]
    fn quantize_rejects_bad_args() {
        assert!(Timeline::new().quantize(0.0, 1.0).is_err());
        assert!(Timeline::new().quantize(0.01, -1.0).is_err());
    }

    #[test]
    fn frame_count_exact_multiples() {
        assert_eq!(frame_count(0.01, 0.1).unwrap(), 10);
        assert_eq!(frame_count(0.01, 0.095).unwrap(), 10);
        assert_eq!(frame_count(0.01, 0.0).unwrap(), 0);
        assert_eq!(frame_count(0.25, 300.0).unwrap(), 1200);
    }

    #[test]
    fn intersect_basic() {
        let a = tl(&[(0.0, 2.0), (3.0, 5.0)]);
        let b = tl(&[(1.0, 4.0)]);
        assert_eq!(as_pairs(&a.intersect(&b)), vec![(1.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn annotation_helpers() {
        let mut ann = Annotation::new("rec");
        ann.add_turn(seg(0.0, 2.0), "a").unwrap();
        ann.add_turn(seg(1.0, 3.0), "b").unwrap();
        ann.add_turn(seg(2.5, 4.0), "a").unwrap();
        assert_eq!(ann.speakers(), vec!["a".to_string(), "b".to_string()]);
        assert_eq!(as_pairs(&ann.support()), vec![(0.0, 4.0)]);
        assert_eq!(as_pairs(&ann.overlap_regions()), vec![(1.0, 2.0), (2.5, 3.0)]);
        assert!(Turn::new(seg(0.0, 1.0), "").is_err());
    }

    proptest! {
        #[test]
        fn normalize_idempotent(raw in proptest::collection::vec((0.0f64..100.0, 0.001f64..5.0), 0..40)) {
            let t = Timeline::from_segments(
                raw.iter().map(|&(on, d)| Segment::new(on, on + d).unwrap()).collect());
            let once = t.normalize();
            let twice = once.normalize();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn normalize_preserves_covered_duration(raw in proptest::collection::vec((0.0f64..100.0, 0.001f64..5.0), 0..40)) {
            let t = Timeline::from_segments(
                raw.iter().map(|&(on, d)| Segment::new(on, on + d).unwrap()).collect());
            // covered measure via independent fine sweep over event boundaries
            let mut points: Vec<f64> = raw.iter().flat_map(|&(on, d)| [on, on + d]).collect();
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut covered = 0.0;
            for w in points.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if t.segments().iter().any(|s| mid > s.onset() && mid < s.offset()) {
                    covered += w[1] - w[0];
                }
            }
            prop_assert!((t.normalize().duration() - covered).abs() < 1e-9);
        }

        #[test]
        fn gaps_involution_is_intersection(raw in proptest::collection::vec((0.0f64..50.0, 0.01f64..5.0), 0..20)) {
            let t = Timeline::from_segments(
                raw.iter().map(|&(on, d)| Segment::new(on, on + d).unwrap()).collect());
            let w = seg(0.0, 60.0);
            let double = t.gaps(&w).gaps(&w);
            let clipped = t.intersect(&Timeline::from_segments(vec![w]));
            prop_assert_eq!(double.len(), clipped.len());
            for (a, b) in double.segments().iter().zip(clipped.segments()) {
                prop_assert!((a.onset() - b.onset()).abs() < 1e-9);
                prop_assert!((a.offset() - b.offset()).abs() < 1e-9);
            }
        }

        #[test]
        fn distance_symmetric(a in (0.0f64..20.0, 0.01f64..3.0), b in (0.0f64..20.0, 0.01f64..3.0)) {
            let sa = seg(a.0, a.0 + a.1);
            let sb = seg(b.0, b.0 + b.1);
            let d1 = Timeline::from_segments(vec![sb]).distance(&sa);
            let d2 = Timeline::from_segments(vec![sa]).distance(&sb);
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }
}
