//! Masked-query construction: entities and relations become numbered
//! placeholders and problem characters become printable aliases.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lexer::TokenSequence;

pub const ENTITY_PREFIX: &str = "ent";
pub const RELATION_PREFIX: &str = "rel";

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("token {token:?} matches both an entity and a relation pattern")]
    Ambiguous { token: String },
    #[error("token {token:?} already looks like a placeholder or alias and would not survive demasking")]
    ReservedToken { token: String },
    #[error("placeholder {placeholder:?} has no entry in its map")]
    DanglingPlaceholder { placeholder: String },
    #[error("invalid pattern {pattern:?}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: regex::Error,
    },
    #[error("delimiter map is not injective: alias {alias:?} is used more than once")]
    NonInjectiveDelimiters { alias: String },
    #[error("alias {alias:?} is not a single printable ASCII token")]
    BadAlias { alias: String },
    #[error("allowlisted token {token:?} matches no relation or entity pattern")]
    AllowlistUnmatched { token: String },
    #[error("could not read masking config: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse masking config: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMaskingConfig {
    #[serde(default)]
    entity_patterns: Vec<String>,
    #[serde(default)]
    relation_patterns: Vec<String>,
    #[serde(default)]
    schema_allowlist: BTreeSet<String>,
    #[serde(default)]
    delimiter_map: BTreeMap<String, String>,
}

/// Rules for what gets masked. Patterns are regular expressions anchored at
/// both ends of a token. Immutable once built.
#[derive(Debug, Clone)]
pub struct MaskingConfig {
    raw: RawMaskingConfig,
    entity_res: Vec<Regex>,
    relation_res: Vec<Regex>,
    alias_inverse: HashMap<String, String>,
}

impl MaskingConfig {
    pub fn new(
        entity_patterns: Vec<String>,
        relation_patterns: Vec<String>,
        schema_allowlist: BTreeSet<String>,
        delimiter_map: BTreeMap<String, String>,
    ) -> Result<Self, MaskError> {
        Self::from_raw(RawMaskingConfig {
            entity_patterns,
            relation_patterns,
            schema_allowlist,
            delimiter_map,
        })
    }

    fn from_raw(raw: RawMaskingConfig) -> Result<Self, MaskError> {
        let compile = |patterns: &[String]| -> Result<Vec<Regex>, MaskError> {
            patterns
                .iter()
                .map(|p| {
                    Regex::new(&format!("^(?:{p})$")).map_err(|source| MaskError::Pattern {
                        pattern: p.clone(),
                        source,
                    })
                })
                .collect()
        };
        let entity_res = compile(&raw.entity_patterns)?;
        let relation_res = compile(&raw.relation_patterns)?;

        let mut alias_inverse = HashMap::new();
        for (from, alias) in &raw.delimiter_map {
            let printable = !alias.is_empty() && alias.chars().all(|c| c.is_ascii_graphic());
            if !printable || from.is_empty() || from.chars().any(char::is_whitespace) {
                return Err(MaskError::BadAlias { alias: alias.clone() });
            }
            if alias_inverse.insert(alias.clone(), from.clone()).is_some() {
                return Err(MaskError::NonInjectiveDelimiters { alias: alias.clone() });
            }
        }
        for alias in raw.delimiter_map.values() {
            if raw.delimiter_map.contains_key(alias) {
                return Err(MaskError::BadAlias { alias: alias.clone() });
            }
        }

        let config = MaskingConfig {
            raw,
            entity_res,
            relation_res,
            alias_inverse,
        };
        for token in &config.raw.schema_allowlist {
            if !config.is_entity(token) && !config.is_relation(token) {
                return Err(MaskError::AllowlistUnmatched { token: token.clone() });
            }
        }
        Ok(config)
    }

    pub fn from_json_str(json: &str) -> Result<Self, MaskError> {
        Self::from_raw(serde_json::from_str(json)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, MaskError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.raw).expect("config serializes")
    }

    pub fn entity_patterns(&self) -> &[String] {
        &self.raw.entity_patterns
    }

    pub fn relation_patterns(&self) -> &[String] {
        &self.raw.relation_patterns
    }

    pub fn schema_allowlist(&self) -> &BTreeSet<String> {
        &self.raw.schema_allowlist
    }

    pub fn delimiter_map(&self) -> &BTreeMap<String, String> {
        &self.raw.delimiter_map
    }

    pub fn is_entity(&self, token: &str) -> bool {
        self.entity_res.iter().any(|re| re.is_match(token))
    }

    pub fn is_relation(&self, token: &str) -> bool {
        self.relation_res.iter().any(|re| re.is_match(token))
    }

    /// Aliases that stand in for raw delimiter tokens (`OB`, `CB`, ...).
    pub fn aliases(&self) -> impl Iterator<Item = &str> {
        self.raw.delimiter_map.values().map(String::as_str)
    }
}

impl Default for MaskingConfig {
    /// Freebase (GrailQA) and Wikidata identifiers, with `:type.object.type`
    /// kept verbatim and `{`, `}`, `^` aliased.
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|p| p.to_string()).collect::<Vec<_>>();
        MaskingConfig::new(
            s(&[r"wd:Q[0-9]+", r":[mg]\.[0-9A-Za-z_]+"]),
            s(&[
                r"(?:wdt|p|ps|pq):P[0-9]+",
                // Dotted Freebase names; a lone `m` or `g` first segment is a MID.
                r":(?:[A-Za-z0-9_]{2,}|[a-fh-ln-zA-Z0-9_])(?:\.[A-Za-z0-9_]+)+",
            ]),
            [":type.object.type".to_string()].into_iter().collect(),
            [("{", "OB"), ("}", "CB"), ("^", "CARET")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        )
        .expect("default masking config is valid")
    }
}

/// Placeholders `{prefix}0 .. {prefix}{k-1}` with the original token for each,
/// in first-occurrence order. Serializes as a JSON object in index order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlaceholderMap {
    prefix: &'static str,
    originals: Vec<String>,
}

impl PlaceholderMap {
    pub fn new(prefix: &'static str) -> Self {
        PlaceholderMap {
            prefix,
            originals: Vec::new(),
        }
    }

    pub fn from_originals(prefix: &'static str, originals: Vec<String>) -> Self {
        PlaceholderMap { prefix, originals }
    }

    pub fn len(&self) -> usize {
        self.originals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.originals.is_empty()
    }

    pub fn placeholder(&self, index: usize) -> String {
        format!("{}{index}", self.prefix)
    }

    /// Resolves `ent3` to its original token.
    pub fn get(&self, placeholder: &str) -> Option<&str> {
        let index = placeholder_index(self.prefix, placeholder)?;
        self.originals.get(index).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, &str)> {
        self.originals
            .iter()
            .enumerate()
            .map(|(i, o)| (self.placeholder(i), o.as_str()))
    }

    pub fn originals(&self) -> &[String] {
        &self.originals
    }

    fn intern(&mut self, token: &str, seen: &mut HashMap<String, usize>) -> String {
        let index = *seen.entry(token.to_owned()).or_insert_with(|| {
            self.originals.push(token.to_owned());
            self.originals.len() - 1
        });
        self.placeholder(index)
    }
}

/// Parses the numeric suffix of `ent12` given prefix `ent`.
pub fn placeholder_index(prefix: &str, token: &str) -> Option<usize> {
    let digits = token.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok()
}

pub fn is_placeholder(token: &str) -> bool {
    placeholder_index(ENTITY_PREFIX, token).is_some() || placeholder_index(RELATION_PREFIX, token).is_some()
}

impl Serialize for PlaceholderMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.originals.len()))?;
        for (k, v) in self.iter() {
            map.serialize_entry(&k, v)?;
        }
        map.end()
    }
}

struct PlaceholderVisitor;

impl<'de> Visitor<'de> for PlaceholderVisitor {
    type Value = Vec<(String, String)>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a map from placeholder to original token")
    }

    fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
        let mut out = Vec::new();
        while let Some((k, v)) = access.next_entry::<String, String>()? {
            out.push((k, v));
        }
        Ok(out)
    }
}

fn deserialize_placeholders<'de, D: Deserializer<'de>>(
    deserializer: D,
    prefix: &'static str,
) -> Result<PlaceholderMap, D::Error> {
    let entries = deserializer.deserialize_map(PlaceholderVisitor)?;
    let mut originals = vec![None; entries.len()];
    for (k, v) in entries {
        let index = placeholder_index(prefix, &k)
            .filter(|&i| i < originals.len())
            .ok_or_else(|| de::Error::custom(format!("placeholders must be {prefix}0..{prefix}N, got {k:?}")))?;
        originals[index] = Some(v);
    }
    let originals = originals
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| de::Error::custom("duplicate placeholder"))?;
    Ok(PlaceholderMap { prefix, originals })
}

/// A masked query and the maps needed to undo the masking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskingResult {
    pub masked: TokenSequence,
    #[serde(deserialize_with = "deserialize_entities")]
    pub entity_map: PlaceholderMap,
    #[serde(deserialize_with = "deserialize_relations")]
    pub relation_map: PlaceholderMap,
    /// Inverse of the delimiter map used while masking (alias to raw token).
    pub aliases: BTreeMap<String, String>,
}

fn deserialize_entities<'de, D: Deserializer<'de>>(d: D) -> Result<PlaceholderMap, D::Error> {
    deserialize_placeholders(d, ENTITY_PREFIX)
}

fn deserialize_relations<'de, D: Deserializer<'de>>(d: D) -> Result<PlaceholderMap, D::Error> {
    deserialize_placeholders(d, RELATION_PREFIX)
}

/// Masks entities and relations and aliases delimiter characters.
///
/// Repeated occurrences of one original token reuse its placeholder, and
/// placeholders are numbered densely in first-occurrence order. Variables,
/// literals and keywords pass through unchanged.
pub fn mask(tokens: &TokenSequence, config: &MaskingConfig) -> Result<MaskingResult, MaskError> {
    let mut entity_map = PlaceholderMap::new(ENTITY_PREFIX);
    let mut relation_map = PlaceholderMap::new(RELATION_PREFIX);
    let mut seen_entities = HashMap::new();
    let mut seen_relations = HashMap::new();
    let mut masked = Vec::with_capacity(tokens.len());

    for token in tokens {
        if let Some(alias) = config.raw.delimiter_map.get(token) {
            masked.push(alias.clone());
            continue;
        }
        if config.alias_inverse.contains_key(token) || is_placeholder(token) {
            return Err(MaskError::ReservedToken { token: token.clone() });
        }
        if config.raw.schema_allowlist.contains(token) {
            masked.push(token.clone());
            continue;
        }
        match (config.is_entity(token), config.is_relation(token)) {
            (true, true) => return Err(MaskError::Ambiguous { token: token.clone() }),
            (true, false) => masked.push(entity_map.intern(token, &mut seen_entities)),
            (false, true) => masked.push(relation_map.intern(token, &mut seen_relations)),
            (false, false) => {
                if !token.chars().all(|c| c.is_ascii_graphic()) {
                    log::warn!("token {token:?} has characters outside printable ASCII after masking");
                }
                masked.push(token.clone())
            }
        }
    }

    Ok(MaskingResult {
        masked: TokenSequence::from_vec_unchecked(masked),
        entity_map,
        relation_map,
        aliases: config
            .alias_inverse
            .iter()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect(),
    })
}

/// Restores the original token sequence from a masked query and its maps.
pub fn demask(result: &MaskingResult) -> Result<TokenSequence, MaskError> {
    let mut out = Vec::with_capacity(result.masked.len());
    for token in &result.masked {
        if let Some(raw) = result.aliases.get(token) {
            out.push(raw.clone());
        } else if placeholder_index(ENTITY_PREFIX, token).is_some() {
            out.push(resolve(&result.entity_map, token)?);
        } else if placeholder_index(RELATION_PREFIX, token).is_some() {
            out.push(resolve(&result.relation_map, token)?);
        } else {
            out.push(token.clone());
        }
    }
    Ok(TokenSequence::from_vec_unchecked(out))
}

fn resolve(map: &PlaceholderMap, token: &str) -> Result<String, MaskError> {
    map.get(token)
        .map(str::to_owned)
        .ok_or_else(|| MaskError::DanglingPlaceholder {
            placeholder: token.to_owned(),
        })
}

/// Splits leading `PREFIX p: <iri>` and `BASE <iri>` declarations off a query.
///
/// Returns `(prologue, body)`. The body is what a model is trained to emit.
pub fn strip_prologue(tokens: &TokenSequence) -> (TokenSequence, TokenSequence) {
    let t = tokens.as_slice();
    let mut i = 0;
    loop {
        let is_iri = |k: usize| t.get(k).is_some_and(|s| s.starts_with('<') && s.ends_with('>') && s.len() >= 2);
        match t.get(i) {
            Some(kw) if kw.eq_ignore_ascii_case("PREFIX") && t.get(i + 1).is_some_and(|p| p.ends_with(':')) && is_iri(i + 2) => {
                i += 3
            }
            Some(kw) if kw.eq_ignore_ascii_case("BASE") && is_iri(i + 1) => i += 2,
            _ => break,
        }
    }
    (
        TokenSequence::from_vec_unchecked(t[..i].to_vec()),
        TokenSequence::from_vec_unchecked(t[i..].to_vec()),
    )
}
