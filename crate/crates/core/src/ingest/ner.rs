//! Rule-based entity extraction for crowd-pump signals.
//!
//! Text is scanned into a stream of keyword and number tokens. Each number
//! is attributed to the most recent section keyword as long as only
//! separator text lies between them; any other text closes the section.

use std::collections::BTreeSet;

use super::price::Price;
use super::rules::{KeywordRole, RuleSet};
use super::Direction;

/// Entities pulled out of one message text.
#[derive(Debug, Clone, PartialEq)]
pub struct Entities {
    pub cryptocurrency: String,
    pub direction: Direction,
    pub exchange: String,
    pub entry_prices: Vec<Price>,
    pub target_prices: Vec<Price>,
    pub stop_loss: Option<Price>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    NoEntities,
    Ambiguous,
}

#[derive(Debug, Clone, Copy)]
enum Token<'a> {
    Keyword { role: KeywordRole, indexed: bool, start: usize, end: usize },
    Number { text: &'a str, start: usize, end: usize },
}

impl Token<'_> {
    fn start(&self) -> usize {
        match *self {
            Token::Keyword { start, .. } | Token::Number { start, .. } => start,
        }
    }
}

#[derive(Debug)]
struct Section<'a> {
    role: KeywordRole,
    indexed: bool,
    values: Vec<&'a str>,
}

fn keyword_tokens(rules: &RuleSet, text: &str) -> Vec<Token<'static>> {
    let mut found = Vec::new();
    for rule in &rules.keywords {
        for caps in rule.regex.captures_iter(text) {
            let m = caps.get(0).expect("group 0 always present");
            found.push(Token::Keyword {
                role: rule.role,
                indexed: caps.name("index").is_some(),
                start: m.start(),
                end: m.end(),
            });
        }
    }
    // leftmost, then longest
    found.sort_by_key(|t| match *t {
        Token::Keyword { start, end, .. } => (start, std::cmp::Reverse(end)),
        Token::Number { .. } => unreachable!(),
    });
    let mut accepted: Vec<Token<'static>> = Vec::new();
    let mut covered_to = 0;
    for tok in found {
        if let Token::Keyword { start, end, .. } = tok {
            if start >= covered_to {
                accepted.push(tok);
                covered_to = end;
            }
        }
    }
    accepted
}

fn glued_to_word(text: &str, start: usize, end: usize) -> bool {
    let before = text[..start].chars().rev().take(2).collect::<Vec<_>>();
    let glued_before = match before.as_slice() {
        [c, ..] if c.is_ascii_alphabetic() => true,
        ['_', c, ..] if c.is_ascii_alphabetic() => true,
        _ => false,
    };
    let glued_after = text[end..]
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '%');
    glued_before || glued_after
}

fn tokenize<'a>(rules: &RuleSet, text: &'a str) -> Vec<Token<'a>> {
    let keywords = keyword_tokens(rules, text);
    let inside_keyword = |pos: usize| {
        keywords.iter().any(|k| matches!(*k, Token::Keyword { start, end, .. } if pos >= start && pos < end))
    };
    let mut tokens: Vec<Token<'a>> = keywords.clone();
    for m in rules.number.find_iter(text) {
        if inside_keyword(m.start()) || glued_to_word(text, m.start(), m.end()) {
            continue;
        }
        tokens.push(Token::Number { text: m.as_str(), start: m.start(), end: m.end() });
    }
    tokens.sort_by_key(Token::start);
    tokens
}

fn sections<'a>(rules: &RuleSet, text: &'a str) -> Vec<Section<'a>> {
    let mut out: Vec<Section<'a>> = Vec::new();
    // (index into out, end of the last consumed token) while a section is open
    let mut open: Option<(usize, usize)> = None;
    for tok in tokenize(rules, text) {
        match tok {
            Token::Keyword { role, indexed, end, .. } => {
                out.push(Section { role, indexed, values: Vec::new() });
                open = Some((out.len() - 1, end));
            }
            Token::Number { text: num, start, end } => {
                if let Some((idx, last_end)) = open {
                    if rules.gap.is_match(&text[last_end..start]) {
                        out[idx].values.push(num);
                        open = Some((idx, end));
                    } else {
                        open = None;
                    }
                }
            }
        }
    }
    out
}

fn small_index(s: &str) -> Option<u32> {
    if s.len() <= 2 && s.bytes().all(|b| b.is_ascii_digit()) {
        s.parse().ok().filter(|v| (1..=20).contains(v))
    } else {
        None
    }
}

/// Values of one section with enumeration indices removed.
/// The flag is true for a plain list, which may still carry glued indices.
fn interpret<'a>(section: &Section<'a>) -> (Vec<&'a str>, bool) {
    let v = &section.values;
    if section.indexed {
        return (v.iter().take(1).copied().collect(), false);
    }
    // "1 0.6750 2 0.6827 3 0.6950"
    if v.len() >= 4 {
        if let Some(k0) = small_index(v[0]) {
            let alternating = v
                .iter()
                .step_by(2)
                .enumerate()
                .all(|(i, s)| small_index(s) == Some(k0 + i as u32));
            if alternating {
                return (v.iter().skip(1).step_by(2).copied().collect(), false);
            }
        }
    }
    // "Target 1 1.60319 4.47": index, price, annotation
    if v.len() >= 2 && small_index(v[0]).is_some() {
        return (vec![v[1]], false);
    }
    (v.clone(), true)
}

/// Undo list flattening such as "11.85 21.87 31.89" for "1) 1.85 2) 1.87 3) 1.89".
fn repair_enumeration(values: &[&str], entry: f64) -> Option<Vec<String>> {
    let mut repaired = Vec::new();
    for (k, v) in values.iter().enumerate() {
        let index = (k + 1).to_string();
        if *v == index && k + 1 == values.len() {
            break;
        }
        let rest = v.strip_prefix(index.as_str())?;
        if !rest.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        repaired.push(rest.to_string());
    }
    if repaired.len() < 2 {
        return None;
    }
    let near = |s: &str| s.parse::<f64>().is_ok_and(|x| x >= 0.5 * entry && x <= 2.0 * entry);
    let repaired_near = repaired.iter().all(|s| near(s));
    let raw_near = values.iter().all(|s| near(s));
    (repaired_near && !raw_near).then_some(repaired)
}

fn parse_prices<S: AsRef<str>>(values: &[S]) -> Vec<Price> {
    values.iter().filter_map(|s| s.as_ref().parse::<Price>().ok()).collect()
}

/// Extract entities from a message text.
pub fn extract(rules: &RuleSet, text: &str) -> Result<Entities, SkipReason> {
    let mut tickers = BTreeSet::new();
    for rule in &rules.pairs {
        for caps in rule.regex.captures_iter(text) {
            if let Some(pair) = caps.name("pair") {
                if let Ok(t) = rules.normalize_symbol(pair.as_str()) {
                    tickers.insert(t);
                }
            }
        }
    }
    let cryptocurrency = match tickers.len() {
        0 => return Err(SkipReason::NoEntities),
        1 => tickers.into_iter().next().expect("one element"),
        _ => return Err(SkipReason::Ambiguous),
    };

    let mut entry_raw: Vec<&str> = Vec::new();
    let mut target_lists: Vec<(Vec<&str>, bool)> = Vec::new();
    let mut stop_raw: Option<&str> = None;
    let mut saw_long = false;
    let mut saw_short = false;
    for section in sections(rules, text) {
        match section.role {
            KeywordRole::Long => saw_long = true,
            KeywordRole::Short => saw_short = true,
            KeywordRole::Terminator => {}
            KeywordRole::Entry => entry_raw.extend(interpret(&section).0),
            KeywordRole::Target => {
                let (vals, plain) = interpret(&section);
                if !vals.is_empty() {
                    target_lists.push((vals, plain));
                }
            }
            KeywordRole::Stop => {
                if stop_raw.is_none() {
                    stop_raw = interpret(&section).0.first().copied();
                }
            }
        }
    }

    let entry_prices = parse_prices(&entry_raw);
    let first_entry = entry_prices.first().map(Price::to_f64);

    let mut targets: Vec<Price> = Vec::new();
    for (vals, plain) in &target_lists {
        let repaired = match (plain, first_entry) {
            (true, Some(e)) => repair_enumeration(vals, e),
            _ => None,
        };
        match repaired {
            Some(fixed) => targets.extend(parse_prices(&fixed)),
            None => targets.extend(parse_prices(vals)),
        }
    }
    if targets.is_empty() {
        return Err(SkipReason::NoEntities);
    }

    let inferred = first_entry.and_then(|e| {
        let t = targets[0].to_f64();
        if e < t {
            Some(Direction::Long)
        } else if e > t {
            Some(Direction::Short)
        } else {
            None
        }
    });
    let direction = match (saw_long, saw_short) {
        (true, false) => Direction::Long,
        (false, true) => Direction::Short,
        (true, true) => inferred.ok_or(SkipReason::Ambiguous)?,
        (false, false) => inferred.ok_or(SkipReason::NoEntities)?,
    };

    // Drop values on the wrong side of the entry or far outside its scale.
    let (lo, hi) = entry_prices
        .iter()
        .map(Price::to_f64)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p), hi.max(p)));
    let ratio = rules.max_price_ratio;
    let in_band = |p: f64| first_entry.is_none_or(|e| p / e <= ratio && e / p <= ratio);
    let target_side_ok = |p: f64| match (first_entry, direction) {
        (None, _) => true,
        (Some(_), Direction::Long) => p > lo,
        (Some(_), Direction::Short) => p < hi,
    };
    let stop_side_ok = |p: f64| match (first_entry, direction) {
        (None, _) => true,
        (Some(_), Direction::Long) => p < lo,
        (Some(_), Direction::Short) => p > hi,
    };
    targets.retain(|t| {
        let p = t.to_f64();
        in_band(p) && target_side_ok(p)
    });
    if targets.is_empty() {
        return Err(SkipReason::NoEntities);
    }
    let stop_loss = stop_raw
        .and_then(|s| s.parse::<Price>().ok())
        .filter(|s| in_band(s.to_f64()) && stop_side_ok(s.to_f64()));

    let exchange = rules
        .exchange
        .find(text)
        .map(|m| m.as_str().to_uppercase().split_whitespace().collect::<Vec<_>>().join("_"))
        .unwrap_or_else(|| "Unspecified".to_string());

    Ok(Entities { cryptocurrency, direction, exchange, entry_prices, target_prices: targets, stop_loss })
}
