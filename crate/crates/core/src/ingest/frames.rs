//! `frames-v1`: role-labeled verb frames extracted from a background corpus.
//!
//! One frame per line:
//!
//! ```text
//! topic <TAB> verb_lemma <TAB> ROLE:text [<TAB> ROLE:text ...]
//! ```
//!
//! Frame files are machine-extracted and noisy, so this is the one lenient
//! reader: a line that does not fit the shape (too few fields, an argument
//! without `:`, an empty role, text, topic, or verb) is skipped and tallied
//! in [`ParsedFrames::skipped`] rather than failing the whole file. The
//! version line and LF-only rule still hold.

use super::common::{read_file, IngestError};
use crate::priors::{FrameArg, FrameRecord};
use std::path::Path;

const VERSION: &str = "frames-v1";

/// A lenient parse: the usable frames plus how many lines were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFrames {
    pub frames: Vec<FrameRecord>,
    pub skipped: usize,
}

pub fn read_frames(path: &Path) -> Result<ParsedFrames, IngestError> {
    parse_frames(&read_file(path)?, &path.display().to_string())
}

fn frame_from_line(line: &str) -> Option<FrameRecord> {
    let parts: Vec<&str> = line.split('\t').collect();
    if parts.len() < 3 || parts[0].is_empty() || parts[1].is_empty() {
        return None;
    }
    let mut args = Vec::with_capacity(parts.len() - 2);
    for field in &parts[2..] {
        let (role, text) = field.split_once(':')?;
        if role.is_empty() || text.is_empty() {
            return None;
        }
        args.push(FrameArg { role: role.to_string(), text: text.to_string() });
    }
    Some(FrameRecord {
        topic: parts[0].to_string(),
        verb_lemma: parts[1].to_string(),
        args,
    })
}

pub fn parse_frames(text: &str, path: &str) -> Result<ParsedFrames, IngestError> {
    let mut out = ParsedFrames { frames: Vec::new(), skipped: 0 };
    for (_, line) in super::common::content_lines(text, path, VERSION)? {
        match frame_from_line(line) {
            Some(frame) => out.frames.push(frame),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

pub fn write_frames(frames: &[FrameRecord]) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for frame in frames {
        out.push_str(&frame.topic);
        out.push('\t');
        out.push_str(&frame.verb_lemma);
        for arg in &frame.args {
            debug_assert!(!arg.role.contains(':'), "roles must not contain `:`");
            out.push_str(&format!("\t{}:{}", arg.role, arg.text));
        }
        out.push('\n');
    }
    out
}
