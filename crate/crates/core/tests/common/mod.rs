#![allow(dead_code)]

use std::path::PathBuf;

use island_query::datastore::load_table;
use island_query::eval::{load_gold, GoldExample};
use island_query::frame::{load_kb, FrameSchema};
use island_query::grammar::{load_grammar, Grammar};
use island_query::parser::{tokenize, Token};
use island_query::pipeline::Resources;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn phonebook() -> Resources {
    Resources {
        grammar: load_grammar(&read_fixture("phonebook.grammar")).unwrap(),
        schema: FrameSchema::from_json(&read_fixture("phonebook.schema.json")).unwrap(),
        kb: load_kb(&read_fixture("phonebook.kb")).unwrap(),
        table: Some(load_table(&fixture("phonebook.tsv")).unwrap()),
    }
}

pub fn gold() -> Vec<GoldExample> {
    load_gold(&read_fixture("gold.jsonl")).unwrap()
}

/// Resource flags for the CLI.
pub fn fixture_args() -> Vec<String> {
    [
        ("--grammar", "phonebook.grammar"),
        ("--schema", "phonebook.schema.json"),
        ("--kb", "phonebook.kb"),
        ("--table", "phonebook.tsv"),
    ]
    .iter()
    .flat_map(|(flag, file)| [flag.to_string(), fixture(file).display().to_string()])
    .collect()
}

pub const ALPHABET: [&str; 4] = ["a", "b", "c", "d"];

fn weight(rng: &mut StdRng) -> String {
    format!("{:.2}", rng.gen_range(1..=20) as f64 * 0.05)
}

fn pattern(rng: &mut StdRng) -> String {
    let len = if rng.gen_bool(0.8) { 1 } else { 2 };
    let words: Vec<&str> = (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect();
    format!("\"{}\"", words.join(" "))
}

/// DSL text of a random small grammar with start `s`. Negation, epsilon and
/// inline terminals appear when enabled.
pub fn random_grammar_source(rng: &mut StdRng, rich: bool) -> String {
    let nonterminals = ["s", "p", "q"];
    let preterminals = ["t", "u", "v"];
    let cats: Vec<&str> = nonterminals.iter().chain(&preterminals).copied().collect();
    let mut src = String::from("start s\n");
    for t in preterminals {
        for _ in 0..rng.gen_range(1..=2) {
            let alts: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| pattern(rng)).collect();
            src += &format!("term {t} {} : {}\n", weight(rng), alts.join(" | "));
        }
    }
    for nt in nonterminals {
        for _ in 0..rng.gen_range(1..=3) {
            let len = rng.gen_range(1..=3);
            let mut body = Vec::new();
            for _ in 0..len {
                let roll: f64 = rng.gen();
                let elem = if rich && roll < 0.08 {
                    "eps".to_string()
                } else if rich && roll < 0.18 {
                    format!("~{}", cats.choose(rng).unwrap())
                } else if rich && roll < 0.28 {
                    pattern(rng)
                } else {
                    cats.choose(rng).unwrap().to_string()
                };
                body.push(elem);
            }
            let w = if rng.gen_bool(0.5) { format!(" {}", weight(rng)) } else { String::new() };
            src += &format!("rule {nt}{w} -> {}\n", body.join(" "));
        }
    }
    src
}

/// Draws until the source passes validation (negation cycles are the only
/// reason it can fail).
pub fn random_grammar(rng: &mut StdRng, rich: bool) -> (String, Grammar) {
    loop {
        let src = random_grammar_source(rng, rich);
        if let Ok(g) = load_grammar(&src) {
            return (src, g);
        }
    }
}

pub fn random_input(rng: &mut StdRng, min: usize, max: usize) -> Vec<Token> {
    let len = rng.gen_range(min..=max);
    let words: Vec<&str> = (0..len)
        .map(|_| if rng.gen_bool(0.15) { "x" } else { *ALPHABET.choose(rng).unwrap() })
        .collect();
    tokenize(&words.join(" "))
}
