//! The textual net format and process exports.
//!
//! Net files are line oriented:
//!
//! ```text
//! # comment
//! place <id> [<tokens>]     tokens default to 0
//! trans <id>
//! arc <from> <to> [<weight>]   weight defaults to 1
//! ```
//!
//! Identifiers match `[A-Za-z0-9_]+`, declarations precede use, duplicate
//! declarations and duplicate arcs are errors. The writer emits a canonical
//! form (places, then transitions, then arcs, each sorted; default fields
//! elided), so parsing and re-writing a valid file is the identity.

use std::fmt;

use thiserror::Error;

use crate::net::{Net, NetBuilder, NetError};
use crate::process::{Process, ProcessSketch, SketchPlace, SketchTrans};

/// One problem found in an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based source line; absent for whole-net diagnostics.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => write!(f, "net: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}", diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

fn is_ident(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_occ_ident(text: &str) -> bool {
    !text.is_empty()
        && text
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

struct Lines<'a> {
    text: &'a str,
}

impl<'a> Lines<'a> {
    /// Content lines with their 1-based numbers, comments and blanks gone.
    fn meaningful(&self) -> impl Iterator<Item = (usize, Vec<&'a str>)> {
        self.text.lines().enumerate().filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> = content.split_whitespace().collect();
            (!fields.is_empty()).then_some((i + 1, fields))
        })
    }
}

/// Parses the net format, reporting every violation with its line.
pub fn parse_net(text: &str) -> Result<Net, ParseError> {
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut builder = NetBuilder::new();
    let mut places: Vec<String> = Vec::new();
    let mut transitions: Vec<String> = Vec::new();
    let mut arcs: Vec<(String, String)> = Vec::new();

    let bad = |line: usize, message: String, diagnostics: &mut Vec<Diagnostic>| {
        diagnostics.push(Diagnostic {
            line: Some(line),
            message,
        });
    };

    for (line, fields) in (Lines { text }).meaningful() {
        match fields[0] {
            "place" => {
                if fields.len() < 2 || fields.len() > 3 {
                    bad(
                        line,
                        "expected `place <id> [<tokens>]`".into(),
                        &mut diagnostics,
                    );
                    continue;
                }
                let id = fields[1];
                if !is_ident(id) {
                    bad(line, format!("bad identifier `{id}`"), &mut diagnostics);
                    continue;
                }
                let tokens = match fields.get(2) {
                    None => 0,
                    Some(raw) => match raw.parse::<u64>() {
                        Ok(n) => n,
                        Err(_) => {
                            bad(line, format!("bad token count `{raw}`"), &mut diagnostics);
                            continue;
                        }
                    },
                };
                if places.iter().any(|p| p == id) || transitions.iter().any(|t| t == id) {
                    bad(
                        line,
                        format!("duplicate declaration of `{id}`"),
                        &mut diagnostics,
                    );
                    continue;
                }
                places.push(id.to_string());
                builder = builder.place(id, tokens);
            }
            "trans" => {
                if fields.len() != 2 {
                    bad(line, "expected `trans <id>`".into(), &mut diagnostics);
                    continue;
                }
                let id = fields[1];
                if !is_ident(id) {
                    bad(line, format!("bad identifier `{id}`"), &mut diagnostics);
                    continue;
                }
                if places.iter().any(|p| p == id) || transitions.iter().any(|t| t == id) {
                    bad(
                        line,
                        format!("duplicate declaration of `{id}`"),
                        &mut diagnostics,
                    );
                    continue;
                }
                transitions.push(id.to_string());
                builder = builder.transition(id);
            }
            "arc" => {
                if fields.len() < 3 || fields.len() > 4 {
                    bad(
                        line,
                        "expected `arc <from> <to> [<weight>]`".into(),
                        &mut diagnostics,
                    );
                    continue;
                }
                let (from, to) = (fields[1], fields[2]);
                let weight = match fields.get(3) {
                    None => 1,
                    Some(raw) => match raw.parse::<u64>() {
                        Ok(n) => n,
                        Err(_) => {
                            bad(line, format!("bad weight `{raw}`"), &mut diagnostics);
                            continue;
                        }
                    },
                };
                let mut ok = true;
                for id in [from, to] {
                    if !places.iter().any(|p| p == id) && !transitions.iter().any(|t| t == id) {
                        bad(
                            line,
                            format!("`{id}` used before declaration"),
                            &mut diagnostics,
                        );
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
                if arcs.iter().any(|(f, t)| f == from && t == to) {
                    bad(
                        line,
                        format!("duplicate arc {from} -> {to}"),
                        &mut diagnostics,
                    );
                    continue;
                }
                arcs.push((from.to_string(), to.to_string()));
                builder = builder.arc(from, to, weight);
            }
            other => {
                bad(
                    line,
                    format!("unknown directive `{other}`"),
                    &mut diagnostics,
                );
            }
        }
    }

    match builder.build() {
        Ok(net) if diagnostics.is_empty() => Ok(net),
        Ok(_) => Err(ParseError { diagnostics }),
        Err(NetError::Invalid { issues }) => {
            diagnostics.extend(issues.into_iter().map(|issue| Diagnostic {
                line: None,
                message: issue.to_string(),
            }));
            Err(ParseError { diagnostics })
        }
        Err(other) => {
            diagnostics.push(Diagnostic {
                line: None,
                message: other.to_string(),
            });
            Err(ParseError { diagnostics })
        }
    }
}

/// Serialises a net in canonical order: places, transitions, then arcs,
/// each sorted by name; zero token counts and weight-one arcs elided.
pub fn write_net(net: &Net) -> String {
    let mut out = String::new();
    for s in net.places() {
        let tokens = net.initial_marking().count(&s);
        if tokens == 0 {
            out.push_str(&format!("place {}\n", net.name(s)));
        } else {
            out.push_str(&format!("place {} {}\n", net.name(s), tokens));
        }
    }
    for t in net.transitions() {
        out.push_str(&format!("trans {}\n", net.name(t)));
    }
    let mut arcs: Vec<(&str, &str, u64)> = net
        .arcs()
        .map(|(f, t, w)| (net.name(f), net.name(t), w))
        .collect();
    arcs.sort();
    for (from, to, weight) in arcs {
        if weight == 1 {
            out.push_str(&format!("arc {from} {to}\n"));
        } else {
            out.push_str(&format!("arc {from} {to} {weight}\n"));
        }
    }
    out
}

/// Output shape for process exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProcessFormat {
    /// Occurrence lists and arcs, re-importable with `parse_process`.
    #[default]
    Structured,
    /// A dot digraph: circles for place occurrences (double for initial
    /// ones), boxes for transition occurrences, labels are the host names.
    Graph,
}

/// Renders a process; the structured form round-trips through
/// [`parse_process`].
pub fn export_process(p: &Process, format: ProcessFormat) -> String {
    let sketch = {
        let mut s = p.sketch();
        s.places.sort_by(|a, b| a.id.cmp(&b.id));
        s.transitions.sort_by(|a, b| a.id.cmp(&b.id));
        s.arcs.sort();
        s
    };
    match format {
        ProcessFormat::Structured => {
            let mut out = String::new();
            for place in &sketch.places {
                if place.initial {
                    out.push_str(&format!("pocc {} {} initial\n", place.id, place.host));
                } else {
                    out.push_str(&format!("pocc {} {}\n", place.id, place.host));
                }
            }
            for trans in &sketch.transitions {
                out.push_str(&format!("tocc {} {}\n", trans.id, trans.host));
            }
            for (from, to) in &sketch.arcs {
                out.push_str(&format!("arc {from} {to}\n"));
            }
            out
        }
        ProcessFormat::Graph => {
            let mut out = String::from("digraph process {\n");
            for place in &sketch.places {
                let shape = if place.initial {
                    "doublecircle"
                } else {
                    "circle"
                };
                out.push_str(&format!(
                    "  \"{}\" [shape={shape} label=\"{}\"];\n",
                    place.id, place.host
                ));
            }
            for trans in &sketch.transitions {
                out.push_str(&format!(
                    "  \"{}\" [shape=box label=\"{}\"];\n",
                    trans.id, trans.host
                ));
            }
            for (from, to) in &sketch.arcs {
                out.push_str(&format!("  \"{from}\" -> \"{to}\";\n"));
            }
            out.push_str("}\n");
            out
        }
    }
}

/// Parses the structured process form into a sketch; validation against a
/// host net is a separate step.
pub fn parse_process(text: &str) -> Result<ProcessSketch, ParseError> {
    let mut diagnostics = Vec::new();
    let mut sketch = ProcessSketch::default();
    for (line, fields) in (Lines { text }).meaningful() {
        let bad = |message: String, diagnostics: &mut Vec<Diagnostic>| {
            diagnostics.push(Diagnostic {
                line: Some(line),
                message,
            });
        };
        match fields[0] {
            "pocc" => {
                if fields.len() < 3
                    || fields.len() > 4
                    || (fields.len() == 4 && fields[3] != "initial")
                {
                    bad(
                        "expected `pocc <id> <host> [initial]`".into(),
                        &mut diagnostics,
                    );
                    continue;
                }
                if !is_occ_ident(fields[1]) || !is_ident(fields[2]) {
                    bad(
                        format!("bad identifier in `{}`", fields.join(" ")),
                        &mut diagnostics,
                    );
                    continue;
                }
                sketch.places.push(SketchPlace {
                    id: fields[1].to_string(),
                    host: fields[2].to_string(),
                    initial: fields.len() == 4,
                });
            }
            "tocc" => {
                if fields.len() != 3 {
                    bad("expected `tocc <id> <host>`".into(), &mut diagnostics);
                    continue;
                }
                if !is_occ_ident(fields[1]) || !is_ident(fields[2]) {
                    bad(
                        format!("bad identifier in `{}`", fields.join(" ")),
                        &mut diagnostics,
                    );
                    continue;
                }
                sketch.transitions.push(SketchTrans {
                    id: fields[1].to_string(),
                    host: fields[2].to_string(),
                });
            }
            "arc" => {
                if fields.len() != 3 || !is_occ_ident(fields[1]) || !is_occ_ident(fields[2]) {
                    bad("expected `arc <from> <to>`".into(), &mut diagnostics);
                    continue;
                }
                sketch
                    .arcs
                    .push((fields[1].to_string(), fields[2].to_string()));
            }
            other => {
                bad(format!("unknown directive `{other}`"), &mut diagnostics);
            }
        }
    }
    if diagnostics.is_empty() {
        Ok(sketch)
    } else {
        Err(ParseError { diagnostics })
    }
}
