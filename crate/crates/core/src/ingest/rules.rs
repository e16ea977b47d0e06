//! `rules-v1`: the rulebase mapping verb frames to change events.
//!
//! One rule per line:
//!
//! ```text
//! verb <TAB> KIND <TAB> target_role <TAB> role_1 [<TAB> role_2 ...]
//! ```
//!
//! `KIND` is `MOVE`, `CREATE`, or `DESTROY` (`NONE` is not a rule kind: rules
//! assert that something changed). The target role must appear among the
//! required roles. Exact duplicate rules are rejected.

use super::common::{fields, read_file, schema, IngestError};
use crate::domain::ChangeKind;
use crate::priors::Rule;
use std::path::Path;

const VERSION: &str = "rules-v1";

pub fn read_rules(path: &Path) -> Result<Vec<Rule>, IngestError> {
    parse_rules(&read_file(path)?, &path.display().to_string())
}

pub fn parse_rules(text: &str, path: &str) -> Result<Vec<Rule>, IngestError> {
    let mut out: Vec<Rule> = Vec::new();
    for (line_no, line) in super::common::content_lines(text, path, VERSION)? {
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() < 4 {
            // Reuse the arity message shape for the fixed prefix.
            fields(line, 4, path, line_no, "rule line (verb, kind, target, roles...)")?;
        }
        let kind = ChangeKind::from_label(parts[1]).ok_or_else(|| {
            schema(path, line_no, format!("unknown change kind {:?}", parts[1]))
        })?;
        let roles = parts[3..].iter().map(|s| s.to_string()).collect();
        let rule = Rule::new(parts[0], roles, parts[2], kind)
            .map_err(|e| schema(path, line_no, e.to_string()))?;
        if out.contains(&rule) {
            return Err(schema(path, line_no, format!("duplicate rule for verb {:?}", parts[0])));
        }
        out.push(rule);
    }
    Ok(out)
}

pub fn write_rules(rules: &[Rule]) -> String {
    let mut out = String::from(VERSION);
    out.push('\n');
    for rule in rules {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            rule.verb_lemma,
            rule.change_kind.label(),
            rule.target_role,
            rule.required_roles.join("\t")
        ));
    }
    out
}
