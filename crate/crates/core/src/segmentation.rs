//! Uniform sub-segmentation of speech, binding of sub-segments to embedding
//! vectors, and the frame-to-sub-segment labeling map used to turn per-sub-
//! segment speaker decisions into output turns.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::timeline::{frame_count, Annotation, Segment, Timeline, TIME_EPS};
use crate::vad::frames_to_timeline;

/// One embedding extraction window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubSegment {
    pub segment: Segment,
    /// Ordinal within the recording.
    pub index: usize,
}

impl SubSegment {
    pub fn center(&self) -> f64 {
        self.segment.center()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SegmentationConfig {
    /// Window length in seconds.
    pub window: f64,
    /// Window shift in seconds (window − overlap).
    pub shift: f64,
    /// Speech segments shorter than this produce no sub-segment.
    pub min_length: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            window: 1.5,
            shift: 0.25,
            min_length: 0.1,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shift <= 0.0 || self.window <= 0.0 || self.shift > self.window + TIME_EPS {
            return Err(Error::config(format!(
                "need 0 < shift <= window, got shift {} window {}",
                self.shift, self.window
            )));
        }
        if self.min_length < 0.0 {
            return Err(Error::config("min_length must be non-negative"));
        }
        Ok(())
    }
}

/// Slide a fixed window over each speech segment.
///
/// A segment no longer than the window yields one sub-segment spanning it
/// (dropped when shorter than `min_length`). Longer segments yield windows at
/// onset + k·shift while they fit, plus one final window ending exactly at the
/// segment offset so the tail is always covered.
pub fn uniform_subsegment(speech: &Timeline, cfg: &SegmentationConfig) -> Result<Vec<SubSegment>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for seg in speech.normalize().segments() {
        let len = seg.duration();
        if len < cfg.min_length - TIME_EPS {
            continue;
        }
        if len <= cfg.window + TIME_EPS {
            out.push(*seg);
            continue;
        }
        let mut k = 0usize;
        let mut covered_to = seg.onset();
        loop {
            let onset = seg.onset() + k as f64 * cfg.shift;
            if onset + cfg.window > seg.offset() + TIME_EPS {
                break;
            }
            out.push(Segment::new(onset, onset + cfg.window)?);
            covered_to = onset + cfg.window;
            k += 1;
        }
        if covered_to < seg.offset() - TIME_EPS {
            out.push(Segment::new(seg.offset() - cfg.window, seg.offset())?);
        }
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(index, segment)| SubSegment { segment, index })
        .collect())
}

/// Assign each frame covered by some sub-segment span to the sub-segment with
/// the nearest center (ties go to the earlier one). Frames outside all spans
/// are unmapped.
pub fn frames_to_subsegments(
    subsegments: &[SubSegment],
    frame_step: f64,
    horizon: f64,
) -> Result<Vec<Option<usize>>> {
    let n = frame_count(frame_step, horizon)?;
    if subsegments.is_empty() {
        return Ok(vec![None; n]);
    }
    for pair in subsegments.windows(2) {
        if pair[1].segment.onset() < pair[0].segment.onset() - TIME_EPS {
            return Err(Error::invalid("sub-segments must be sorted by onset"));
        }
    }
    let span_union = Timeline::from_segments(subsegments.iter().map(|s| s.segment).collect());
    let covered = span_union.quantize(frame_step, horizon)?;
    let centers: Vec<f64> = subsegments.iter().map(SubSegment::center).collect();
    let mut out = vec![None; n];
    let mut ptr = 0usize;
    for i in 0..n {
        if !covered[i] {
            continue;
        }
        let c = (i as f64 + 0.5) * frame_step;
        while ptr + 1 < centers.len() && c > 0.5 * (centers[ptr] + centers[ptr + 1]) {
            ptr += 1;
        }
        out[i] = Some(ptr);
    }
    Ok(out)
}

/// Turn per-sub-segment speaker labels into an annotation by labeling each
/// covered frame with its owner's label and merging consecutive equal-label
/// frames into turns. When `speech` is given, frames outside it are dropped.
pub fn labels_to_annotation(
    recording_id: &str,
    subsegments: &[SubSegment],
    labels: &[String],
    frame_step: f64,
    speech: Option<&Timeline>,
) -> Result<Annotation> {
    if subsegments.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} sub-segments but {} labels",
            subsegments.len(),
            labels.len()
        )));
    }
    let mut ann = Annotation::new(recording_id);
    if subsegments.is_empty() {
        return Ok(ann);
    }
    let horizon = subsegments
        .iter()
        .map(|s| s.segment.offset())
        .fold(0.0f64, f64::max);
    let map = frames_to_subsegments(subsegments, frame_step, horizon)?;
    let speech_mask = match speech {
        Some(t) => Some(t.quantize(frame_step, horizon)?),
        None => None,
    };
    let frame_label = |i: usize| -> Option<&str> {
        if let Some(mask) = &speech_mask {
            if !mask[i] {
                return None;
            }
        }
        map[i].map(|idx| labels[idx].as_str())
    };
    let mut run: Option<(usize, &str)> = None;
    for i in 0..=map.len() {
        let label = if i < map.len() { frame_label(i) } else { None };
        match (run, label) {
            (None, Some(l)) => run = Some((i, l)),
            (Some((start, l0)), Some(l)) if l == l0 => run = Some((start, l0)),

            (Some((start, l0)), next) => {
                ann.add_turn(
                    Segment::new(start as f64 * frame_step, i as f64 * frame_step)?,
                    l0,
                )?;
                run = next.map(|l| (i, l));
            }
            (None, None) => {}
        }
    }
    Ok(ann)
}

/// Ordered sub-segment windows with one embedding vector each.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    recording_id: String,
    dim: usize,
    spans: Vec<SubSegment>,
    vectors: Array2<f64>,
}

impl EmbeddingSequence {
    pub fn new(recording_id: impl Into<String>, dim: usize, spans: Vec<SubSegment>, vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() != spans.len() || vectors.ncols() != dim {
            return Err(Error::invalid(format!(
                "embedding matrix is {}x{}, expected {}x{dim}",
                vectors.nrows(),
                vectors.ncols(),
                spans.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("embedding vectors must be finite"));
        }
        for pair in spans.windows(2) {
            if pair[1].segment.onset() < pair[0].segment.onset() - TIME_EPS {
                return Err(Error::invalid("embedding spans must be sorted by onset"));
            }
        }
        for (i, s) in spans.iter().enumerate() {
            if s.index != i {
                return Err(Error::invalid("sub-segment indices must be consecutive"));
            }
        }
        Ok(Self {
            recording_id: recording_id.into(),
            dim,
            spans,
            vectors,
        })
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn spans(&self) -> &[SubSegment] {
        &self.spans
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    /// Normalized union of the spans (the speech that carries embeddings).
    pub fn span_union(&self) -> Timeline {
        Timeline::from_segments(self.spans.iter().map(|s| s.segment).collect()).normalize()
    }
}

const EMB_MAGIC: &str = "DIARKIT-EMB v1";

/// Write an embedding file: a header `DIARKIT-EMB v1 <recording_id> <D>`
/// followed by one `<onset> <offset> <D reals>` row per sub-segment. Values
/// are printed with 17 significant digits, so reading back is exact.
pub fn write_embeddings<W: Write>(seq: &EmbeddingSequence, mut writer: W) -> Result<()> {
    writeln!(writer, "{EMB_MAGIC} {} {}", seq.recording_id(), seq.dim())?;
    for (i, span) in seq.spans.iter().enumerate() {
        write!(writer, "{:.16e} {:.16e}", span.segment.onset(), span.segment.offset())?;
        for v in seq.vectors.row(i) {
            write!(writer, " {v:.16e}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn write_embeddings_file(seq: &EmbeddingSequence, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(seq, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingSequence> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing embedding header"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "DIARKIT-EMB" || fields[1] != "v1" {
        return Err(Error::parse(1, format!("bad embedding header '{header}'")));
    }
    let recording_id = fields[2].to_string();
    let dim: usize = fields[3]
        .parse()
        .map_err(|_| Error::parse(1, format!("bad dimension '{}'", fields[3])))?;
    let mut spans = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Vec<&str> = trimmed.split_whitespace().collect();
        if row.len() != dim + 2 {
            return Err(Error::parse(
                lineno,
                format!("expected {} fields, got {}", dim + 2, row.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("bad number '{s}'")))
        };
        let onset = parse(row[0])?;
        let offset = parse(row[1])?;
        let segment = Segment::new(onset, offset).map_err(|e| Error::parse(lineno, e.to_string()))?;
        spans.push(SubSegment {
            segment,
            index: spans.len(),
        });
        for s in &row[2..] {
            let v = parse(s)?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value '{s}'")));
            }
            values.push(v);
        }
    }
    let n = spans.len();
    let vectors = Array2::from_shape_vec((n, dim), values)
        .map_err(|e| Error::invalid(format!("embedding shape: {e}")))?;
    EmbeddingSequence::new(recording_id, dim, spans, vectors)
}

pub fn read_embeddings_file(path: impl AsRef<Path>) -> Result<EmbeddingSequence> {
    read_embeddings(BufReader::new(File::open(path)?))
}

/// Speech frames (by quantize) covered by some sub-segment span, as a
/// timeline on the frame grid. Used to check coverage in diagnostics.
pub fn covered_speech(subsegments: &[SubSegment], frame_step: f64, horizon: f64) -> Result<Timeline> {
    let map = frames_to_subsegments(subsegments, frame_step, horizon)?;
    let frames: Vec<bool> = map.iter().map(Option::is_some).collect();
    Ok(frames_to_timeline(&frames, frame_step))
}
