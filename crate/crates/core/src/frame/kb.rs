use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::FrameSchema;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintForm {
    /// The two assignments may not hold together.
    Incompatible {
        first: (String, String),
        second: (String, String),
    },
    /// When `when` holds and `slot` is filled, its value must be in `values`.
    Requires {
        when: (String, String),
        slot: String,
        values: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub id: String,
    pub form: ConstraintForm,
}

impl Constraint {
    pub fn slots(&self) -> Vec<&str> {
        match &self.form {
            ConstraintForm::Incompatible { first, second } => vec![&first.0, &second.0],
            ConstraintForm::Requires { when, slot, .. } => vec![&when.0, slot],
        }
    }
}

impl fmt::Display for ConstraintForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintForm::Incompatible { first, second } => write!(
                f,
                "incompatible {}={} {}={}",
                first.0, first.1, second.0, second.1
            ),
            ConstraintForm::Requires { when, slot, values } => write!(
                f,
                "requires {}={} -> {} in {{{}}}",
                when.0,
                when.1,
                slot,
                values.join(", ")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub parents: Vec<String>,
    pub defaults: BTreeMap<String, String>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub theories: BTreeMap<String, Theory>,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("inheritance cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("theory {theory} names unknown parent {parent}")]
    DanglingParent { theory: String, parent: String },
    #[error("unknown theory {0}")]
    UnknownTheory(String),
    #[error("constraint {constraint} refers to unknown slot {slot}")]
    UnknownSlot { constraint: String, slot: String },
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn identifier(s: &str) -> Result<String, String> {
    if is_identifier(s) {
        Ok(s.to_string())
    } else {
        Err(format!("invalid identifier '{s}'"))
    }
}

fn assignment(s: &str) -> Result<(String, String), String> {
    let (slot, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <slot>=<value>, found '{s}'"))?;
    if value.is_empty() {
        return Err(format!("empty value in '{s}'"));
    }
    Ok((identifier(slot)?, value.to_string()))
}

fn constraint_form(rest: &str) -> Result<ConstraintForm, String> {
    let words: Vec<&str> = rest.split_whitespace().collect();
    match words.as_slice() {
        ["incompatible", a, b] => Ok(ConstraintForm::Incompatible {
            first: assignment(a)?,
            second: assignment(b)?,
        }),
        ["requires", when, "->", slot, "in", ..] => {
            let after_in = rest
                .split_once(" in ")
                .map(|(_, v)| v.trim())
                .unwrap_or_default();
            let inner = after_in
                .strip_prefix('{')
                .and_then(|v| v.strip_suffix('}'))
                .ok_or("expected a value set in braces")?;
            let values: Vec<String> = inner
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            if values.is_empty() {
                return Err("empty value set".into());
            }
            Ok(ConstraintForm::Requires {
                when: assignment(when)?,
                slot: identifier(slot)?,
                values,
            })
        }
        _ => Err("expected 'incompatible <slot>=<v> <slot>=<v>' or 'requires <slot>=<v> -> <slot> in {...}'".into()),
    }
}

/// Parses the line-oriented KB format. Without a `context` line the first
/// declared theory is the context.
pub fn load_kb(source: &str) -> Result<KnowledgeBase, KbError> {
    let mut theories: BTreeMap<String, Theory> = BTreeMap::new();
    let mut first_theory: Option<String> = None;
    let mut current: Option<String> = None;
    let mut context: Option<String> = None;

    for (i, raw) in source.lines().enumerate() {
        let line_no = i + 1;
        let syntax = |message: String| KbError::Syntax {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match keyword {
            "theory" => {
                let mut words = rest.split_whitespace();
                let name = identifier(words.next().unwrap_or_default()).map_err(syntax)?;
                let parents = match words.next() {
                    None => Vec::new(),
                    Some("parents") => words
                        .map(identifier)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(syntax)?,
                    Some(other) => return Err(syntax(format!("expected 'parents', found '{other}'"))),
                };
                if theories.contains_key(&name) {
                    return Err(syntax(format!("duplicate theory {name}")));
                }
                first_theory.get_or_insert_with(|| name.clone());
                theories.insert(
                    name.clone(),
                    Theory {
                        name: name.clone(),
                        parents,
                        defaults: BTreeMap::new(),
                        constraints: Vec::new(),
                    },
                );
                current = Some(name);
            }
            "context" => {
                if context.is_some() {
                    return Err(syntax("duplicate context declaration".into()));
                }
                context = Some(identifier(rest).map_err(syntax)?);
            }
            "default" | "constraint" => {
                let theory = current
                    .as_ref()
                    .and_then(|n| theories.get_mut(n))
                    .ok_or_else(|| syntax(format!("'{keyword}' outside of a theory")))?;
                if keyword == "default" {
                    let (slot, value) = rest
                        .split_once('=')
                        .ok_or_else(|| syntax("expected default <slot> = <value>".into()))?;
                    let slot = identifier(slot.trim()).map_err(syntax)?;
                    let value = value.trim();
                    if value.is_empty() {
                        return Err(syntax("empty default value".into()));
                    }
                    theory.defaults.insert(slot, value.to_string());
                } else {
                    let form = constraint_form(rest).map_err(syntax)?;
                    let id = format!("{}:{}", theory.name, theory.constraints.len() + 1);
                    theory.constraints.push(Constraint { id, form });
                }
            }
            other => return Err(syntax(format!("unknown declaration '{other}'"))),
        }
    }

    for t in theories.values() {
        for p in &t.parents {
            if !theories.contains_key(p) {
                return Err(KbError::DanglingParent {
                    theory: t.name.clone(),
                    parent: p.clone(),
                });
            }
        }
    }
    if let Some(cycle) = find_cycle(&theories) {
        return Err(KbError::Cycle(cycle));
    }
    let context = context
        .or(first_theory)
        .ok_or_else(|| KbError::Syntax {
            line: 0,
            message: "no theory declared".into(),
        })?;
    if !theories.contains_key(&context) {
        return Err(KbError::UnknownTheory(context));
    }
    Ok(KnowledgeBase { theories, context })
}

fn find_cycle(theories: &BTreeMap<String, Theory>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit<'a>(
        name: &'a str,
        theories: &'a BTreeMap<String, Theory>,
        marks: &mut BTreeMap<&'a str, Mark>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        match marks.get(name) {
            Some(Mark::Done) => return None,
            Some(Mark::Open) => {
                let from = path.iter().position(|n| *n == name).unwrap_or(0);
                let mut cycle: Vec<String> = path[from..].iter().map(|s| s.to_string()).collect();
                cycle.push(name.to_string());
                return Some(cycle);
            }
            None => {}
        }
        marks.insert(name, Mark::Open);
        path.push(name);
        for p in &theories[name].parents {
            if let Some(c) = visit(p, theories, marks, path) {
                return Some(c);
            }
        }
        path.pop();
        marks.insert(name, Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for name in theories.keys() {
        if let Some(c) = visit(name, theories, &mut marks, &mut Vec::new()) {
            return Some(c);
        }
    }
    None
}

impl KnowledgeBase {
    /// Same knowledge base with another active context theory.
    pub fn with_context(&self, context: &str) -> Result<KnowledgeBase, KbError> {
        if !self.theories.contains_key(context) {
            return Err(KbError::UnknownTheory(context.to_string()));
        }
        Ok(KnowledgeBase {
            theories: self.theories.clone(),
            context: context.to_string(),
        })
    }

    /// Every constraint must talk about slots of the schema.
    pub fn check_slots(&self, schema: &FrameSchema) -> Result<(), KbError> {
        for t in self.theories.values() {
            for c in &t.constraints {
                for slot in c.slots() {
                    if schema.slot(slot).is_none() {
                        return Err(KbError::UnknownSlot {
                            constraint: c.id.clone(),
                            slot: slot.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Depth-first, left-to-right walk of the parent graph keeping the first
/// occurrence of each theory. Unknown names yield an empty list.
pub fn linearize(kb: &KnowledgeBase, theory: &str) -> Vec<String> {
    fn walk(kb: &KnowledgeBase, name: &str, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        let Some(t) = kb.theories.get(name) else {
            return;
        };
        if !seen.insert(name.to_string()) {
            return;
        }
        out.push(name.to_string());
        for p in &t.parents {
            walk(kb, p, seen, out);
        }
    }
    let mut out = Vec::new();
    walk(kb, theory, &mut BTreeSet::new(), &mut out);
    out
}

/// Default for `slot` from the first theory in linearization order that
/// defines one.
pub fn resolve_default<'a>(kb: &'a KnowledgeBase, theory: &str, slot: &str) -> Option<&'a str> {
    linearize(kb, theory)
        .iter()
        .find_map(|t| kb.theories[t].defaults.get(slot))
        .map(String::as_str)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAMOND: &str = "\
theory d parents b c
theory b parents a
  default city = lausanne
theory c parents a
  default city = genève
theory a
context d
";

    #[test]
    fn single_theory_loads() {
        let kb = load_kb("theory base\n").unwrap();
        assert_eq!(kb.theories.len(), 1);
        assert_eq!(kb.context, "base");
    }

    #[test]
    fn cycles_are_rejected() {
        let err = load_kb("theory a parents b\ntheory b parents a\n").unwrap_err();
        assert!(matches!(err, KbError::Cycle(_)), "{err}");
        let err = load_kb("theory a parents a\n").unwrap_err();
        assert_eq!(err, KbError::Cycle(vec!["a".into(), "a".into()]));
    }

    #[test]
    fn dangling_parent() {
        assert_eq!(
            load_kb("theory a parents nowhere\n").unwrap_err(),
            KbError::DanglingParent {
                theory: "a".into(),
                parent: "nowhere".into()
            }
        );
    }

    #[test]
    fn syntax_errors() {
        for (src, line) in [
            ("default x = 1\n", 1),
            ("theory a\n  default x =\n", 2),
            ("theory a\n  constraint incompatible x=1\n", 2),
            ("theory a\n  constraint requires x=1 -> y in {}\n", 2),
            ("theory a\n  constraint requires x=1 -> y in a, b\n", 2),
            ("theory a\ncontext a\ncontext a\n", 3),
            ("theory a\ntheory a\n", 2),
            ("theory a kids b\n", 1),
            ("frobnicate\n", 1),
        ] {
            match load_kb(src) {
                Err(KbError::Syntax { line: l, .. }) => assert_eq!(l, line, "{src}"),
                other => panic!("{src}: unexpected {other:?}"),
            }
        }
        assert_eq!(
            load_kb("theory a\ncontext b\n").unwrap_err(),
            KbError::UnknownTheory("b".into())
        );
    }

    #[test]
    fn constraint_forms() {
        let kb = load_kb(
            "theory a\n  constraint incompatible query=adresse category=urgences\n  constraint requires city=lausanne -> canton in {vaud, genève}\n",
        )
        .unwrap();
        let cs = &kb.theories["a"].constraints;
        assert_eq!(cs[0].id, "a:1");
        assert_eq!(
            cs[1].form,
            ConstraintForm::Requires {
                when: ("city".into(), "lausanne".into()),
                slot: "canton".into(),
                values: vec!["vaud".into(), "genève".into()],
            }
        );
        assert_eq!(cs[1].form.to_string(), "requires city=lausanne -> canton in {vaud, genève}");
    }

    #[test]
    fn linearization_examples() {
        let kb = load_kb(DIAMOND).unwrap();
        assert_eq!(linearize(&kb, "d"), ["d", "b", "a", "c"]);
        assert_eq!(linearize(&kb, "a"), ["a"]);
        let chain = load_kb("theory x parents y\ntheory y parents z\ntheory z\n").unwrap();
        assert_eq!(linearize(&chain, "x"), ["x", "y", "z"]);
    }

    #[test]
    fn default_resolution() {
        let kb = load_kb(DIAMOND).unwrap();
        assert_eq!(resolve_default(&kb, "d", "city"), Some("lausanne"));
        assert_eq!(resolve_default(&kb, "c", "city"), Some("genève"));
        assert_eq!(resolve_default(&kb, "d", "name"), None);
        let own = DIAMOND.replace("theory d parents b c\n", "theory d parents b c\n  default city = sion\n");
        let kb = load_kb(&own).unwrap();
        assert_eq!(resolve_default(&kb, "d", "city"), Some("sion"));
    }

    #[test]
    fn shipped_kb_loads() {
        let kb = load_kb(include_str!("../../fixtures/phonebook.kb")).unwrap();
        assert_eq!(kb.theories.len(), 4);
        assert_eq!(linearize(&kb, &kb.context).len(), 4);
    }
}
