//! RTTM diarization files and simple start/end label files.
//!
//! RTTM rows: `SPEAKER <rec> <chan> <onset> <dur> <NA> <NA> <speaker> <NA> <NA>`,
//! whitespace-delimited, one speaker turn per row. Label files carry one
//! `<onset> <offset> <label>` row per line and are the carrier for VAD and
//! overlap-detector outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::timeline::{Annotation, Segment, Timeline};

/// Map from recording id to its annotation.
pub type AnnotationSet = BTreeMap<String, Annotation>;

/// Shortest turn that survives the 3-decimal RTTM output precision.
pub const MIN_WRITABLE_DURATION: f64 = 1e-3;

/// Parse RTTM text. Only SPEAKER rows are read; other row types are ignored.
/// Turns are grouped per recording in file order, without normalization.
pub fn read_rttm<R: BufRead>(reader: R) -> Result<AnnotationSet> {
    let mut out = AnnotationSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        if fields.len() < 9 {
            return Err(Error::parse(
                lineno,
                format!("SPEAKER row needs at least 9 fields, got {}", fields.len()),
            ));
        }
        let rec = fields[1].to_string();
        let onset: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad onset '{}'", fields[3])))?;
        let dur: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad duration '{}'", fields[4])))?;
        if !dur.is_finite() || dur <= 0.0 {
            return Err(Error::parse(
                lineno,
                format!("duration must be positive, got {dur}"),
            ));
        }
        let speaker = fields[7];
        if speaker.is_empty() {
            return Err(Error::parse(lineno, "empty speaker label"));
        }
        let segment = Segment::new(onset, onset + dur)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        out.entry(rec.clone())
            .or_insert_with(|| Annotation::new(rec))
            .add_turn(segment, speaker)
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
    }
    Ok(out)
}

pub fn read_rttm_file(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    read_rttm(BufReader::new(File::open(path)?))
}

/// Write annotations as RTTM, sorted by (recording id, onset). Turns shorter
/// than [`MIN_WRITABLE_DURATION`] are rejected: they would not survive the
/// 3-decimal output precision.
pub fn write_rttm<W: Write>(annotations: &AnnotationSet, mut writer: W) -> Result<()> {
    for (rec, ann) in annotations {
        if rec.split_whitespace().count() != 1 {
            return Err(Error::invalid(format!(
                "recording id '{rec}' must be a single whitespace-free token"
            )));
        }
        let mut turns = ann.turns().to_vec();
        turns.sort_by(|a, b| {
            a.segment
                .onset()
                .partial_cmp(&b.segment.onset())
                .unwrap()
                .then(a.segment.offset().partial_cmp(&b.segment.offset()).unwrap())
                .then(a.speaker.cmp(&b.speaker))
        });
        for turn in &turns {
            if turn.speaker.split_whitespace().count() != 1 {
                return Err(Error::invalid(format!(
                    "speaker label '{}' must be a single whitespace-free token",
                    turn.speaker
                )));
            }
            let dur = turn.segment.duration();
            if dur < MIN_WRITABLE_DURATION {
                return Err(Error::invalid(format!(
                    "turn at {:.6} in '{rec}' has duration {dur:.6} below the {MIN_WRITABLE_DURATION} writable floor",
                    turn.segment.onset()
                )));
            }
            writeln!(
                writer,
                "SPEAKER {rec} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
                turn.segment.onset(),
                dur,
                turn.speaker
            )?;
        }
    }
    Ok(())
}

pub fn write_rttm_file(annotations: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_rttm(annotations, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Wrap a single annotation into an [`AnnotationSet`].
pub fn single(ann: Annotation) -> AnnotationSet {
    let mut set = AnnotationSet::new();
    set.insert(ann.recording_id().to_string(), ann);
    set
}

/// Read a label file, keeping rows whose label is in `keep_labels`.
/// The result is the normalized union of the kept rows.
pub fn read_labels<R: BufRead>(reader: R, keep_labels: &BTreeSet<String>) -> Result<Timeline> {
    let mut out = Timeline::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("label row needs 3 fields, got {}", fields.len()),
            ));
        }
        let onset: f64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad onset '{}'", fields[0])))?;
        let offset: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad offset '{}'", fields[1])))?;
        if !keep_labels.contains(fields[2]) {
            continue;
        }
        let seg = Segment::new(onset, offset).map_err(|e| Error::parse(lineno, e.to_string()))?;
        out.push(seg);
    }
    Ok(out.normalize())
}

pub fn read_labels_file(path: impl AsRef<Path>, keep_labels: &BTreeSet<String>) -> Result<Timeline> {
    read_labels(BufReader::new(File::open(path)?), keep_labels)
}

/// Write a timeline as a label file with a fixed label per row.
pub fn write_labels<W: Write>(timeline: &Timeline, label: &str, mut writer: W) -> Result<()> {
    if label.split_whitespace().count() != 1 {
        return Err(Error::invalid(format!(
            "label '{label}' must be a single whitespace-free token"
        )));
    }
    for seg in timeline.normalize().segments() {
        writeln!(writer, "{:.3} {:.3} {label}", seg.onset(), seg.offset())?;
    }
    Ok(())
}

pub fn write_labels_file(timeline: &Timeline, label: &str, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_labels(timeline, label, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Convenience set with a single kept label.
pub fn keep(label: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    set.insert(label.to_string());
    set
}
