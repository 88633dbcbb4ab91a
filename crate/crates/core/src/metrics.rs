//! Diarization evaluation: DER with a forgiveness collar around reference
//! boundaries, Jaccard error rate (no collar by definition), frame-level
//! detection metrics, and speaker-count statistics.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hungarian::max_assignment;
use crate::timeline::{frame_count, Annotation, Timeline, TIME_EPS};

/// Default frame step for frame-based scoring, in seconds.
pub const SCORING_FRAME_STEP: f64 = 0.01;

/// DER decomposition. Rates are percentages of the total reference speaker
/// time inside the scored region; times are in seconds.
#[derive(Debug, Clone)]
pub struct DerReport {
    pub der: f64,
    pub miss: f64,
    pub fa: f64,
    pub speaker_error: f64,
    pub miss_time: f64,
    pub fa_time: f64,
    pub speaker_error_time: f64,
    /// Total reference speaker time in the scored region.
    pub scored_time: f64,
    /// Set when the reference was empty; the rates above are NaN.
    pub empty_reference: bool,
}

impl DerReport {
    fn from_times(miss_time: f64, fa_time: f64, speaker_error_time: f64, scored_time: f64) -> Self {
        let empty_reference = scored_time <= TIME_EPS;
        let rate = |t: f64| {
            if empty_reference {
                f64::NAN
            } else {
                100.0 * t / scored_time
            }
        };
        DerReport {
            der: rate(miss_time + fa_time + speaker_error_time),
            miss: rate(miss_time),
            fa: rate(fa_time),
            speaker_error: rate(speaker_error_time),
            miss_time,
            fa_time,
            speaker_error_time,
            scored_time,
            empty_reference,
        }
    }
}

/// Time-weighted aggregate over per-recording reports.
pub fn aggregate_der(reports: &[DerReport]) -> DerReport {
    let sum = |f: fn(&DerReport) -> f64| reports.iter().map(f).sum::<f64>();
    DerReport::from_times(
        sum(|r| r.miss_time),
        sum(|r| r.fa_time),
        sum(|r| r.speaker_error_time),
        sum(|r| r.scored_time),
    )
}

/// Diarization error rate at the given forgiveness collar, computed on a
/// fine frame grid inside the scored region.
///
/// The region within ±collar of every reference turn boundary is excluded.
/// Per scored frame, the reference speaker set R and hypothesis speaker set H
/// are compared under the one-to-one speaker mapping that maximizes total
/// matched speaker time (Hungarian assignment): miss = Σ max(|R|−|H|, 0),
/// false alarm = Σ max(|H|−|R|, 0), speaker error = Σ (min(|R|, |H|) −
/// matched). An empty reference yields NaN rates and the `empty_reference`
/// flag.
pub fn der(
    reference: &Annotation,
    hypothesis: &Annotation,
    collar: f64,
    frame_step: f64,
) -> Result<DerReport> {
    if reference.recording_id() != hypothesis.recording_id() {
        return Err(Error::invalid(format!(
            "recording ids differ: '{}' vs '{}'",
            reference.recording_id(),
            hypothesis.recording_id()
        )));
    }
    if collar < 0.0 {
        return Err(Error::config("collar must be non-negative"));
    }
    let horizon = reference.extent().max(hypothesis.extent()) + collar + frame_step;
    let n = frame_count(frame_step, horizon)?;

    // scored mask: frames whose center is farther than the collar from every
    // reference boundary
    let mut scored = vec![true; n];
    if collar > 0.0 {
        let mut collar_zones = Timeline::new();
        for turn in reference.turns() {
            for b in [turn.segment.onset(), turn.segment.offset()] {
                if let Ok(seg) = crate::timeline::Segment::new(b - collar, b + collar) {
                    collar_zones.push(seg);
                }
            }
        }
        for (i, inside) in collar_zones.quantize(frame_step, horizon)?.iter().enumerate() {
            if *inside {
                scored[i] = false;
            }
        }
    }

    let ref_speakers = reference.speakers();
    let hyp_speakers = hypothesis.speakers();
    let ref_masks: Vec<Vec<bool>> = ref_speakers
        .iter()
        .map(|s| reference.speaker_timeline(s).quantize(frame_step, horizon))
        .collect::<Result<_>>()?;
    let hyp_masks: Vec<Vec<bool>> = hyp_speakers
        .iter()
        .map(|s| hypothesis.speaker_timeline(s).quantize(frame_step, horizon))
        .collect::<Result<_>>()?;

    // co-occurrence counts inside the scored region drive the speaker mapping
    let mut overlap = Array2::<f64>::zeros((ref_speakers.len(), hyp_speakers.len()));
    for i in 0..n {
        if !scored[i] {
            continue;
        }
        for (r, rm) in ref_masks.iter().enumerate() {
            if !rm[i] {
                continue;
            }
            for (h, hm) in hyp_masks.iter().enumerate() {
                if hm[i] {
                    overlap[[r, h]] += 1.0;
                }
            }
        }
    }
    let mapping = max_assignment(&overlap)?;

    let mut ref_frames = 0u64;
    let mut miss_frames = 0u64;
    let mut fa_frames = 0u64;
    let mut err_frames = 0u64;
    for i in 0..n {
        if !scored[i] {
            continue;
        }
        let r_count = ref_masks.iter().filter(|m| m[i]).count();
        let h_count = hyp_masks.iter().filter(|m| m[i]).count();
        let matched = ref_masks
            .iter()
            .enumerate()
            .filter(|(r, rm)| {
                rm[i] && mapping[*r].map(|h| hyp_masks[h][i]).unwrap_or(false)
            })
            .count();
        ref_frames += r_count as u64;
        miss_frames += r_count.saturating_sub(h_count) as u64;
        fa_frames += h_count.saturating_sub(r_count) as u64;
        err_frames += (r_count.min(h_count) - matched) as u64;
    }
    Ok(DerReport::from_times(
        miss_frames as f64 * frame_step,
        fa_frames as f64 * frame_step,
        err_frames as f64 * frame_step,
        ref_frames as f64 * frame_step,
    ))
}

/// Jaccard error rate in percent: reference speakers are mapped one-to-one
/// to system speakers by the Hungarian assignment maximizing total
/// intersection duration; each reference speaker contributes
/// 1 − |ref ∩ sys| / |ref ∪ sys| (1 when unmapped), averaged and scaled by
/// 100. No collar applies.
pub fn jer(reference: &Annotation, hypothesis: &Annotation) -> Result<f64> {
    if reference.recording_id() != hypothesis.recording_id() {
        return Err(Error::invalid(format!(
            "recording ids differ: '{}' vs '{}'",
            reference.recording_id(),
            hypothesis.recording_id()
        )));
    }
    let ref_speakers = reference.speakers();
    if ref_speakers.is_empty() {
        return Err(Error::invalid("jer: empty reference"));
    }
    let hyp_speakers = hypothesis.speakers();
    let ref_timelines: Vec<Timeline> = ref_speakers
        .iter()
        .map(|s| reference.speaker_timeline(s))
        .collect();
    let hyp_timelines: Vec<Timeline> = hyp_speakers
        .iter()
        .map(|s| hypothesis.speaker_timeline(s))
        .collect();
    let mut inter = Array2::<f64>::zeros((ref_speakers.len(), hyp_speakers.len()));
    for (r, rt) in ref_timelines.iter().enumerate() {
        for (h, ht) in hyp_timelines.iter().enumerate() {
            inter[[r, h]] = rt.intersect(ht).duration();
        }
    }
    let mapping = max_assignment(&inter)?;
    let mut total = 0.0;
    for (r, rt) in ref_timelines.iter().enumerate() {
        let jer_r = match mapping[r] {
            Some(h) => {
                let i = inter[[r, h]];
                let union = rt.duration() + hyp_timelines[h].duration() - i;
                if union <= TIME_EPS {
                    1.0
                } else {
                    1.0 - i / union
                }
            }
            None => 1.0,
        };
        total += jer_r;
    }
    Ok(100.0 * total / ref_speakers.len() as f64)
}

/// Frame-level detection metrics; all fields are ratios over all frames.
#[derive(Debug, Clone)]
pub struct FrameReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub miss: f64,
    pub fa: f64,
    pub total_error: f64,
    pub n_frames: usize,
}

/// Confusion counts over quantized frames on the shared horizon
/// (max offset across both inputs). No collar applies.
pub fn frame_metrics(reference: &Timeline, hypothesis: &Timeline, frame_step: f64) -> Result<FrameReport> {
    let horizon = reference.extent().max(hypothesis.extent());
    let n = frame_count(frame_step, horizon)?;
    if n == 0 {
        return Err(Error::invalid("frame_metrics: zero-length horizon"));
    }
    let r = reference.quantize(frame_step, horizon)?;
    let h = hypothesis.quantize(frame_step, horizon)?;
    let (mut tp, mut fp, mut fne, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        match (r[i], h[i]) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fne += 1,
            (false, false) => tn += 1,
        }
    }
    let nf = n as f64;
    Ok(FrameReport {
        accuracy: (tp + tn) as f64 / nf,
        precision: if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            f64::NAN
        },
        recall: if tp + fne > 0 {
            tp as f64 / (tp + fne) as f64
        } else {
            f64::NAN
        },
        miss: fne as f64 / nf,
        fa: fp as f64 / nf,
        total_error: fne as f64 / nf + fp as f64 / nf,
        n_frames: n,
    })
}

/// Recording counts where the found speaker count exceeds, equals, or falls
/// short of the correct one, plus the mean of (correct − found).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerCountStats {
    pub n_over: usize,
    pub n_equal: usize,
    pub n_under: usize,
    pub mean_diff: f64,
}

/// Statistics over (correct, found) speaker-count pairs.
pub fn speaker_count_stats(pairs: &[(usize, usize)]) -> Result<SpeakerCountStats> {
    if pairs.is_empty() {
        return Err(Error::invalid("speaker_count_stats: no pairs"));
    }
    let mut stats = SpeakerCountStats {
        n_over: 0,
        n_equal: 0,
        n_under: 0,
        mean_diff: 0.0,
    };
    let mut sum = 0.0;
    for &(correct, found) in pairs {
        match found.cmp(&correct) {
            std::cmp::Ordering::Greater => stats.n_over += 1,
            std::cmp::Ordering::Equal => stats.n_equal += 1,
            std::cmp::Ordering::Less => stats.n_under += 1,
        }
        sum += correct as f64 - found as f64;
    }
    stats.mean_diff = sum / pairs.len() as f64;
    Ok(stats)
}
