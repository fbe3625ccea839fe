//! Versioned regular-expression rule set for signal extraction.
//!
//! The rules live in `rules/ner_rules.toml` and are compiled once; a custom
//! file with the same schema can be loaded with [`RuleSet::from_toml`].

use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use super::IngestError;

const BUILTIN_RULES: &str = include_str!("../../rules/ner_rules.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordRole {
    Entry,
    Target,
    Stop,
    Long,
    Short,
    Terminator,
}

#[derive(Debug, Deserialize)]
struct RawRules {
    version: String,
    quote_currencies: Vec<String>,
    pair_separators: Vec<String>,
    max_price_ratio: f64,
    pair: Vec<RawPattern>,
    keyword: Vec<RawKeyword>,
    exchange: RawSingle,
    numbers: RawNumbers,
}

#[derive(Debug, Deserialize)]
struct RawPattern {
    name: String,
    pattern: String,
}

#[derive(Debug, Deserialize)]
struct RawKeyword {
    role: KeywordRole,
    pattern: String,
}

#[derive(Debug, Deserialize)]
struct RawSingle {
    pattern: String,
}

#[derive(Debug, Deserialize)]
struct RawNumbers {
    pattern: String,
    gap: String,
}

#[derive(Debug, Clone)]
pub struct PairRule {
    pub name: String,
    pub regex: Regex,
}

#[derive(Debug, Clone)]
pub struct KeywordRule {
    pub role: KeywordRole,
    pub regex: Regex,
}

/// Compiled extraction rules.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: String,
    pub quote_currencies: Vec<String>,
    pub pair_separators: Vec<char>,
    pub max_price_ratio: f64,
    pub pairs: Vec<PairRule>,
    pub keywords: Vec<KeywordRule>,
    pub exchange: Regex,
    pub number: Regex,
    pub gap: Regex,
}

fn compile(pattern: &str) -> Result<Regex, IngestError> {
    Regex::new(pattern).map_err(|e| IngestError::Rules(format!("bad pattern {pattern:?}: {e}")))
}

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let raw: RawRules = toml::from_str(text).map_err(|e| IngestError::Rules(e.to_string()))?;
        let pairs = raw
            .pair
            .iter()
            .map(|p| {
                let regex = compile(&p.pattern)?;
                if !regex.capture_names().any(|n| n == Some("pair")) {
                    return Err(IngestError::Rules(format!("pair rule {} lacks a `pair` group", p.name)));
                }
                Ok(PairRule { name: p.name.clone(), regex })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let keywords = raw
            .keyword
            .iter()
            .map(|k| Ok(KeywordRule { role: k.role, regex: compile(&k.pattern)? }))
            .collect::<Result<Vec<_>, IngestError>>()?;
        let mut pair_separators = Vec::new();
        for sep in &raw.pair_separators {
            let mut chars = sep.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => pair_separators.push(c),
                _ => return Err(IngestError::Rules(format!("separator {sep:?} must be one character"))),
            }
        }
        if !(raw.max_price_ratio > 1.0) {
            return Err(IngestError::Rules("max_price_ratio must exceed 1".into()));
        }
        let mut quote_currencies: Vec<String> = raw.quote_currencies.iter().map(|q| q.to_uppercase()).collect();
        quote_currencies.sort_by_key(|q| std::cmp::Reverse(q.len()));
        Ok(Self {
            version: raw.version,
            quote_currencies,
            pair_separators,
            max_price_ratio: raw.max_price_ratio,
            pairs,
            keywords,
            exchange: compile(&raw.exchange.pattern)?,
            number: compile(&raw.numbers.pattern)?,
            gap: compile(&raw.numbers.gap)?,
        })
    }

    /// The rule set shipped with the crate.
    pub fn builtin() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::from_toml(BUILTIN_RULES).expect("builtin rule file is valid"))
    }

    fn is_quote(&self, s: &str) -> bool {
        self.quote_currencies.iter().any(|q| q == s)
    }

    /// Reduce a pair token (`VETUSDT`, `BTC_STORJ`, `sui`) to its base ticker.
    ///
    /// At most one quote currency is stripped. Separated pairs keep the
    /// non-quote side; when both sides are quotes, `_` pairs are read
    /// quote-first and `/`/`-` pairs base-first.
    pub fn normalize_symbol(&self, token: &str) -> Result<String, IngestError> {
        let upper = token.trim().to_uppercase();
        if upper.is_empty() {
            return Err(IngestError::EmptySymbol(token.to_string()));
        }
        let base = if let Some(sep) = upper.chars().find(|c| self.pair_separators.contains(c)) {
            let mut parts = upper.splitn(2, sep);
            let left = parts.next().unwrap_or_default();
            let right = parts.next().unwrap_or_default();
            match (self.is_quote(left), self.is_quote(right)) {
                (true, false) => right.to_string(),
                (false, true) => left.to_string(),
                (true, true) if sep == '_' => right.to_string(),
                (true, true) => left.to_string(),
                (false, false) => left.to_string(),
            }
        } else {
            let mut stripped = None;
            for q in &self.quote_currencies {
                if let Some(rest) = upper.strip_suffix(q.as_str()) {
                    stripped = Some(rest.to_string());
                    break;
                }
            }
            if stripped.is_none() {
                for q in &self.quote_currencies {
                    if let Some(rest) = upper.strip_prefix(q.as_str()) {
                        stripped = Some(rest.to_string());
                        break;
                    }
                }
            }
            stripped.unwrap_or(upper.clone())
        };
        let base: String = base.chars().filter(|c| !self.pair_separators.contains(c)).collect();
        if base.is_empty() {
            return Err(IngestError::EmptySymbol(token.to_string()));
        }
        Ok(base)
    }
}

/// Normalize with the builtin rules.
pub fn normalize_symbol(token: &str) -> Result<String, IngestError> {
    RuleSet::builtin().normalize_symbol(token)
}
