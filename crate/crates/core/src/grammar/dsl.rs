use std::fmt::Write as _;

use super::{
    validate_grammar, BodyElement, CategoryId, Grammar, GrammarError, MarkerDecl, MarkerRole,
    OrderElement, OrderRule, Rule, RuleOrigin, Severity, Weight,
};
use crate::parser::tokenize;

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Word(String),
    Quoted(String),
    Colon,
    Bar,
    Arrow,
}

fn lex_line(line: &str) -> Result<Vec<Lexeme>, String> {
    let mut out = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            ':' => {
                chars.next();
                out.push(Lexeme::Colon);
            }
            '|' => {
                chars.next();
                out.push(Lexeme::Bar);
            }
            '"' => {
                chars.next();
                let mut text = String::new();
                let mut closed = false;
                for (_, c) in chars.by_ref() {
                    if c == '"' {
                        closed = true;
                        break;
                    }
                    text.push(c);
                }
                if !closed {
                    return Err(format!("unterminated string at column {}", i + 1));
                }
                out.push(Lexeme::Quoted(text));
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '"' | '|' | '#') || c == ':' {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                if word == "->" {
                    out.push(Lexeme::Arrow);
                } else {
                    out.push(Lexeme::Word(word));
                }
            }
        }
    }
    Ok(out)
}

fn category(word: &str) -> Result<CategoryId, String> {
    CategoryId::parse(word).ok_or_else(|| format!("invalid category name '{word}'"))
}

fn weight(word: &str) -> Result<Weight, String> {
    let value: f64 = word
        .parse()
        .map_err(|_| format!("invalid weight '{word}'"))?;
    Weight::new(value).map_err(|e| e.to_string())
}

fn pattern(text: &str) -> Result<Vec<String>, String> {
    let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.text).collect();
    if tokens.is_empty() {
        Err(format!("empty pattern \"{text}\""))
    } else {
        Ok(tokens)
    }
}

/// `"a b" | "c"` after a colon.
fn alternatives(rest: &[Lexeme]) -> Result<Vec<Vec<String>>, String> {
    let mut out = Vec::new();
    let mut expect_pattern = true;
    for lx in rest {
        match (lx, expect_pattern) {
            (Lexeme::Quoted(text), true) => {
                out.push(pattern(text)?);
                expect_pattern = false;
            }
            (Lexeme::Bar, false) => expect_pattern = true,
            _ => return Err("expected quoted patterns separated by '|'".into()),
        }
    }
    if expect_pattern {
        return Err("missing pattern after ':' or '|'".into());
    }
    Ok(out)
}

fn body_element(lx: &Lexeme) -> Result<BodyElement, String> {
    match lx {
        Lexeme::Quoted(text) => Ok(BodyElement::Terminal(pattern(text)?)),
        Lexeme::Word(w) if w == "eps" => Ok(BodyElement::Epsilon),
        Lexeme::Word(w) => {
            if let Some(neg) = w.strip_prefix('~') {
                Ok(BodyElement::Negation(category(neg)?))
            } else if let Some(head) = w.strip_suffix('!') {
                Ok(BodyElement::NonTerminal {
                    category: category(head)?,
                    head: true,
                })
            } else {
                Ok(BodyElement::NonTerminal {
                    category: category(w)?,
                    head: false,
                })
            }
        }
        _ => Err("unexpected symbol in rule body".into()),
    }
}

struct Builder {
    rules: Vec<Rule>,
    markers: Vec<MarkerDecl>,
    start: Option<CategoryId>,
    orders: Vec<OrderRule>,
}

impl Builder {
    fn push_rule(
        &mut self,
        lhs: CategoryId,
        body: Vec<BodyElement>,
        w: Option<Weight>,
        preterminal: bool,
        origin: RuleOrigin,
    ) {
        self.rules.push(Rule {
            id: self.rules.len(),
            lhs,
            body,
            static_weight: w.unwrap_or(Weight::ONE),
            is_preterminal: preterminal,
            explicit_weight: w.is_some(),
            origin,
        });
    }

    fn line(&mut self, lexemes: &[Lexeme]) -> Result<(), String> {
        let Some(Lexeme::Word(keyword)) = lexemes.first() else {
            return Err("expected a declaration keyword".into());
        };
        let args = &lexemes[1..];
        match keyword.as_str() {
            "start" => match args {
                [Lexeme::Word(c)] => {
                    if self.start.is_some() {
                        return Err("duplicate start declaration".into());
                    }
                    self.start = Some(category(c)?);
                    Ok(())
                }
                _ => Err("usage: start <category>".into()),
            },
            "term" => match args {
                [Lexeme::Word(c), Lexeme::Word(w), Lexeme::Colon, rest @ ..] => {
                    let lhs = category(c)?;
                    let w = weight(w)?;
                    for alt in alternatives(rest)? {
                        self.push_rule(
                            lhs.clone(),
                            vec![BodyElement::Terminal(alt)],
                            Some(w),
                            true,
                            RuleOrigin::Term,
                        );
                    }
                    Ok(())
                }
                _ => Err("usage: term <category> <weight> : \"<tokens>\" ( | \"<tokens>\" )*".into()),
            },
            "rule" => {
                let (lhs, w, rest) = match args {
                    [Lexeme::Word(c), Lexeme::Arrow, rest @ ..] => (c, None, rest),
                    [Lexeme::Word(c), Lexeme::Word(w), Lexeme::Arrow, rest @ ..] => {
                        (c, Some(weight(w)?), rest)
                    }
                    _ => return Err("usage: rule <category> [<weight>] -> <element>+".into()),
                };
                if rest.is_empty() {
                    return Err("rule body is empty".into());
                }
                let body = rest.iter().map(body_element).collect::<Result<Vec<_>, _>>()?;
                if body.iter().filter(|e| matches!(e, BodyElement::NonTerminal { head: true, .. })).count() > 1 {
                    return Err("more than one head element".into());
                }
                self.push_rule(category(lhs)?, body, w, false, RuleOrigin::Rule);
                Ok(())
            }
            "marker" => match args {
                [Lexeme::Word(role), Lexeme::Word(name), Lexeme::Word(w), Lexeme::Colon, rest @ ..] => {
                    let role = match role.as_str() {
                        "separator" => MarkerRole::Separator,
                        "introducer" => MarkerRole::Introducer,
                        other => return Err(format!("unknown marker role '{other}'")),
                    };
                    let name = category(name)?;
                    let w = weight(w)?;
                    let patterns = alternatives(rest)?;
                    let index = self.markers.len();
                    for p in &patterns {
                        self.push_rule(
                            name.clone(),
                            vec![BodyElement::Terminal(p.clone())],
                            Some(w),
                            true,
                            RuleOrigin::Marker(index),
                        );
                    }
                    self.markers.push(MarkerDecl {
                        role,
                        name,
                        patterns,
                        weight: w,
                    });
                    Ok(())
                }
                _ => Err("usage: marker separator|introducer <name> <weight> : \"<tokens>\" ...".into()),
            },
            "order" => {
                if args.is_empty() {
                    return Err("order line needs at least one category".into());
                }
                let mut order = Vec::new();
                for lx in args {
                    let Lexeme::Word(w) = lx else {
                        return Err("order elements must be categories".into());
                    };
                    let (name, optional) = match w.strip_suffix('?') {
                        Some(n) => (n, true),
                        None => (w.as_str(), false),
                    };
                    order.push(OrderElement {
                        category: category(name)?,
                        optional,
                    });
                }
                self.orders.push(order);
                Ok(())
            }
            other => Err(format!("unknown declaration '{other}'")),
        }
    }
}

/// Parses and validates grammar source text. Warnings from validation are
/// not fatal; call [`validate_grammar`] to see them.
pub fn load_grammar(source: &str) -> Result<Grammar, GrammarError> {
    let mut b = Builder {
        rules: Vec::new(),
        markers: Vec::new(),
        start: None,
        orders: Vec::new(),
    };
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let lexemes = lex_line(line).map_err(|message| GrammarError::Syntax {
            line: line_no,
            message,
        })?;
        if lexemes.is_empty() {
            continue;
        }
        b.line(&lexemes).map_err(|message| GrammarError::Syntax {
            line: line_no,
            message,
        })?;
    }
    let start = b.start.ok_or_else(|| {
        GrammarError::Validation(vec![super::Diagnostic::error("missing start declaration")])
    })?;
    let grammar = Grammar::new(b.rules, b.markers, start, b.orders);
    let errors: Vec<_> = validate_grammar(&grammar)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(grammar)
    } else {
        Err(GrammarError::Validation(errors))
    }
}

fn quoted(tokens: &[String]) -> String {
    format!("\"{}\"", tokens.join(" "))
}

/// Debug printer producing DSL text that loads back to an equal grammar.
pub fn render_grammar(g: &Grammar) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "start {}", g.start);
    let mut emitted_markers = vec![false; g.markers.len()];
    for rule in &g.rules {
        match rule.origin {
            RuleOrigin::Marker(m) => {
                if emitted_markers[m] {
                    continue;
                }
                emitted_markers[m] = true;
                let decl = &g.markers[m];
                let alts: Vec<String> = decl.patterns.iter().map(|p| quoted(p)).collect();
                let _ = writeln!(
                    out,
                    "marker {} {} {} : {}",
                    decl.role,
                    decl.name,
                    decl.weight,
                    alts.join(" | ")
                );
            }
            RuleOrigin::Term => {
                let pattern = match rule.body.as_slice() {
                    [BodyElement::Terminal(p)] => quoted(p),
                    _ => unreachable!("term rules hold exactly one terminal"),
                };
                let _ = writeln!(out, "term {} {} : {}", rule.lhs, rule.static_weight, pattern);
            }
            RuleOrigin::Rule => {
                let _ = write!(out, "rule {}", rule.lhs);
                if rule.explicit_weight {
                    let _ = write!(out, " {}", rule.static_weight);
                }
                out.push_str(" ->");
                for elem in &rule.body {
                    let _ = match elem {
                        BodyElement::NonTerminal { category, head } => {
                            write!(out, " {}{}", category, if *head { "!" } else { "" })
                        }
                        BodyElement::Terminal(p) => write!(out, " {}", quoted(p)),
                        BodyElement::Negation(c) => write!(out, " ~{c}"),
                        BodyElement::Epsilon => write!(out, " eps"),
                    };
                }
                out.push('\n');
            }
        }
    }
    // Markers without patterns never produce rules; keep them anyway.
    for (m, done) in emitted_markers.iter().enumerate() {
        if !done {
            let decl = &g.markers[m];
            let _ = writeln!(out, "marker {} {} {} :", decl.role, decl.name, decl.weight);
        }
    }
    for order in &g.orders {
        out.push_str("order");
        for e in order {
            let _ = write!(out, " {}{}", e.category, if e.optional { "?" } else { "" });
        }
        out.push('\n');
    }
    out
}
