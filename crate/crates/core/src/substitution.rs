//! Seeded bijections from the masked-query vocabulary onto replacement
//! vocabularies, and their application to token sequences.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::TokenSequence;
use crate::vocab::{is_literal, Vocabulary};

/// Characters used by the multi-character code schemes.
pub const CODE_ALPHABET: &[u8; 36] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

const CHAR1_LETTERS: &str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
const CHAR1_DIGITS: &str = "123456789";
/// Single special characters for `char1` once letters and digits run out,
/// used in this order. Braces and `^` are left out on purpose: they are the
/// characters the masking step exists to remove.
pub const CHAR1_SPECIALS: &[char] = &[
    '*', '$', '-', '|', '+', ':', '!', '#', '%', '&', '@', '~', '=', ';', '/', '?', '_', '<', '>', '[', ']', ',',
    '`', '\\',
];

#[derive(Debug, Error)]
pub enum SubstitutionError {
    #[error("{scheme} needs {needed} distinct replacements but only {available} are available")]
    Capacity {
        scheme: Scheme,
        needed: usize,
        available: u128,
    },
    #[error("code length {0} is not one of 2, 4, 8")]
    UnsupportedLength(usize),
    #[error("wordlist contains {word:?} more than once")]
    DuplicateWord { word: String },
    #[error("replacement {replacement:?} is used for more than one word")]
    NotBijective { replacement: String },
    #[error("replacement {replacement:?} for {word:?} collides with a corpus token")]
    Collision { word: String, replacement: String },
    #[error("{token:?} is not a valid token")]
    InvalidToken { token: String },
    #[error("unknown scheme {0:?} (expected original, dictionary, char1, char2, char4 or char8)")]
    UnknownScheme(String),
    #[error("{scheme} requires a wordlist")]
    MissingWordlist { scheme: Scheme },
    #[error("could not read substitution map: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse substitution map: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Original,
    Dictionary,
    Char1,
    Char2,
    Char4,
    Char8,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Char8,
        Scheme::Char4,
        Scheme::Char2,
        Scheme::Char1,
        Scheme::Dictionary,
        Scheme::Original,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Original => "original",
            Scheme::Dictionary => "dictionary",
            Scheme::Char1 => "char1",
            Scheme::Char2 => "char2",
            Scheme::Char4 => "char4",
            Scheme::Char8 => "char8",
        }
    }

    /// Code length for the random fixed-length schemes.
    pub fn code_length(self) -> Option<usize> {
        match self {
            Scheme::Char2 => Some(2),
            Scheme::Char4 => Some(4),
            Scheme::Char8 => Some(8),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SubstitutionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| SubstitutionError::UnknownScheme(s.to_owned()))
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    scheme: Scheme,
    seed: u64,
    forward: BTreeMap<String, String>,
}

/// A bijection from vocabulary words to replacement words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMap {
    scheme: Scheme,
    seed: u64,
    forward: BTreeMap<String, String>,
    inverse: HashMap<String, String>,
}

/// Output of [`SubstitutionMap::desubstitute`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Desubstituted {
    pub tokens: TokenSequence,
    /// Non-literal tokens that have no inverse mapping, in order of appearance.
    pub unknown: Vec<String>,
}

impl SubstitutionMap {
    /// Builds a map from explicit pairs, checking that it is a bijection.
    pub fn from_pairs<I>(scheme: Scheme, seed: u64, pairs: I) -> Result<Self, SubstitutionError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut forward = BTreeMap::new();
        let mut inverse = HashMap::new();
        for (word, replacement) in pairs {
            for token in [&word, &replacement] {
                if token.is_empty() || token.chars().any(char::is_whitespace) {
                    return Err(SubstitutionError::InvalidToken { token: token.clone() });
                }
            }
            if let Some(previous) = inverse.insert(replacement.clone(), word.clone()) {
                if previous != word {
                    return Err(SubstitutionError::NotBijective { replacement });
                }
            }
            if let Some(old) = forward.insert(word, replacement.clone()) {
                if old != replacement {
                    return Err(SubstitutionError::NotBijective { replacement });
                }
            }
        }
        Ok(SubstitutionMap {
            scheme,
            seed,
            forward,
            inverse,
        })
    }

    pub fn identity(vocab: &Vocabulary) -> Self {
        Self::from_pairs(
            Scheme::Original,
            0,
            vocab.words().iter().map(|w| (w.clone(), w.clone())),
        )
        .expect("identity over distinct words is a bijection")
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn forward(&self) -> &BTreeMap<String, String> {
        &self.forward
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.forward.get(word).map(String::as_str)
    }

    pub fn invert(&self, replacement: &str) -> Option<&str> {
        self.inverse.get(replacement).map(String::as_str)
    }

    /// Replacement words, ordered by the word they replace.
    pub fn replacements(&self) -> impl Iterator<Item = &str> {
        self.forward.values().map(String::as_str)
    }

    /// Replaces every mapped token; literals and unmapped tokens pass through.
    pub fn substitute(&self, masked: &TokenSequence) -> TokenSequence {
        TokenSequence::from_vec_unchecked(
            masked
                .iter()
                .map(|t| self.forward.get(t).unwrap_or(t).clone())
                .collect(),
        )
    }

    /// Applies the inverse mapping. Tokens with no inverse pass through; the
    /// non-literal ones are also reported in [`Desubstituted::unknown`].
    pub fn desubstitute(&self, substituted: &TokenSequence) -> Desubstituted {
        let mut unknown = Vec::new();
        let tokens = substituted
            .iter()
            .map(|t| match self.inverse.get(t) {
                Some(word) => word.clone(),
                None => {
                    if !is_literal(t) {
                        unknown.push(t.clone());
                    }
                    t.clone()
                }
            })
            .collect();
        Desubstituted {
            tokens: TokenSequence::from_vec_unchecked(tokens),
            unknown,
        }
    }

    /// Checks that no replacement collides with a vocabulary word or a
    /// pass-through corpus token. The identity map is exempt.
    pub fn check_collisions(&self, vocab: &Vocabulary, reserved: &BTreeSet<String>) -> Result<(), SubstitutionError> {
        if self.scheme == Scheme::Original {
            return Ok(());
        }
        for (word, replacement) in &self.forward {
            if vocab.contains(replacement) || reserved.contains(replacement) {
                return Err(SubstitutionError::Collision {
                    word: word.clone(),
                    replacement: replacement.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = MapFile {
            scheme: self.scheme,
            seed: self.seed,
            forward: self.forward.clone(),
        };
        serde_json::to_string_pretty(&file).expect("map serializes")
    }

    pub fn from_json_str(json: &str) -> Result<Self, SubstitutionError> {
        let file: MapFile = serde_json::from_str(json)?;
        Self::from_pairs(file.scheme, file.seed, file.forward)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SubstitutionError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

fn blocked_set<'a>(vocab: &'a Vocabulary, reserved: &'a BTreeSet<String>) -> HashSet<&'a str> {
    vocab
        .words()
        .iter()
        .chain(reserved.iter())
        .map(String::as_str)
        .collect()
}

/// Maps each word to a distinct random code of `n` characters from `[A-Z0-9]`.
///
/// Codes that collide with a vocabulary word, a reserved corpus token or an
/// earlier code are re-drawn.
pub fn gen_char_n(
    vocab: &Vocabulary,
    n: usize,
    seed: u64,
    reserved: &BTreeSet<String>,
) -> Result<SubstitutionMap, SubstitutionError> {
    let scheme = match n {
        2 => Scheme::Char2,
        4 => Scheme::Char4,
        8 => Scheme::Char8,
        _ => return Err(SubstitutionError::UnsupportedLength(n)),
    };
    let blocked = blocked_set(vocab, reserved);
    let code_space = (CODE_ALPHABET.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    let blocked_codes = blocked
        .iter()
        .filter(|t| t.len() == n && t.bytes().all(|b| CODE_ALPHABET.contains(&b)))
        .count() as u128;
    let available = code_space - blocked_codes;
    if (vocab.len() as u128) > available {
        return Err(SubstitutionError::Capacity {
            scheme,
            needed: vocab.len(),
            available,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(vocab.len());
    for word in vocab.words() {
        let code = loop {
            let candidate: String = (0..n)
                .map(|_| CODE_ALPHABET[rng.gen_range(0..CODE_ALPHABET.len())] as char)
                .collect();
            if !blocked.contains(candidate.as_str()) && !used.contains(&candidate) {
                break candidate;
            }
        };
        used.insert(code.clone());
        pairs.push((word.clone(), code));
    }
    SubstitutionMap::from_pairs(scheme, seed, pairs)
}

/// Maps each word to a single character, filling tiers in order: letters
/// `A-Z`, then digits `1-9`, then [`CHAR1_SPECIALS`]. The characters taken
/// from each tier are shuffled with the seed before assignment.
pub fn gen_char1(
    vocab: &Vocabulary,
    seed: u64,
    reserved: &BTreeSet<String>,
) -> Result<SubstitutionMap, SubstitutionError> {
    let blocked = blocked_set(vocab, reserved);
    let free = |chars: &mut dyn Iterator<Item = char>| -> Vec<String> {
        chars
            .map(|c| c.to_string())
            .filter(|c| !blocked.contains(c.as_str()))
            .collect()
    };
    let tiers = [
        free(&mut CHAR1_LETTERS.chars()),
        free(&mut CHAR1_DIGITS.chars()),
        free(&mut CHAR1_SPECIALS.iter().copied()),
    ];
    let available: usize = tiers.iter().map(Vec::len).sum();
    if vocab.len() > available {
        return Err(SubstitutionError::Capacity {
            scheme: Scheme::Char1,
            needed: vocab.len(),
            available: available as u128,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = vocab.len();
    let mut codes = Vec::with_capacity(vocab.len());
    for tier in tiers {
        let take = remaining.min(tier.len());
        let mut chosen = tier[..take].to_vec();
        chosen.shuffle(&mut rng);
        codes.extend(chosen);
        remaining -= take;
    }
    SubstitutionMap::from_pairs(Scheme::Char1, seed, vocab.words().iter().cloned().zip(codes))
}

/// Maps each word to a distinct word sampled without replacement from `wordlist`.
pub fn gen_dictionary(
    vocab: &Vocabulary,
    wordlist: &[String],
    seed: u64,
    reserved: &BTreeSet<String>,
) -> Result<SubstitutionMap, SubstitutionError> {
    let mut seen = HashSet::new();
    for word in wordlist {
        if !seen.insert(word.as_str()) {
            return Err(SubstitutionError::DuplicateWord { word: word.clone() });
        }
    }
    let blocked = blocked_set(vocab, reserved);
    let candidates: Vec<&String> = wordlist.iter().filter(|w| !blocked.contains(w.as_str())).collect();
    if vocab.len() > candidates.len() {
        return Err(SubstitutionError::Capacity {
            scheme: Scheme::Dictionary,
            needed: vocab.len(),
            available: candidates.len() as u128,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, candidates.len(), vocab.len());
    SubstitutionMap::from_pairs(
        Scheme::Dictionary,
        seed,
        vocab
            .words()
            .iter()
            .cloned()
            .zip(picks.iter().map(|i| candidates[i].clone())),
    )
}

/// Generates the map for any scheme. `wordlist` is only read for `dictionary`.
pub fn generate(
    scheme: Scheme,
    vocab: &Vocabulary,
    seed: u64,
    reserved: &BTreeSet<String>,
    wordlist: Option<&[String]>,
) -> Result<SubstitutionMap, SubstitutionError> {
    match scheme {
        Scheme::Original => Ok(SubstitutionMap {
            seed,
            ..SubstitutionMap::identity(vocab)
        }),
        Scheme::Dictionary => {
            let wordlist = wordlist.ok_or(SubstitutionError::MissingWordlist { scheme })?;
            gen_dictionary(vocab, wordlist, seed, reserved)
        }
        Scheme::Char1 => gen_char1(vocab, seed, reserved),
        Scheme::Char2 | Scheme::Char4 | Scheme::Char8 => {
            gen_char_n(vocab, scheme.code_length().expect("char scheme"), seed, reserved)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_of(n: usize) -> Vocabulary {
        Vocabulary::from_words((0..n).map(|i| format!("w{i}")), "test")
    }

    fn none() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn char_n_shape_and_determinism() {
        let v = vocab_of(48);
        for n in [2, 4, 8] {
            let a = gen_char_n(&v, n, 13, &none()).unwrap();
            let b = gen_char_n(&v, n, 13, &none()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_json(), b.to_json());
            assert_eq!(a.len(), 48);
            let codes: HashSet<_> = a.replacements().collect();
            assert_eq!(codes.len(), 48);
            assert!(codes.iter().all(|c| c.len() == n && c.bytes().all(|b| CODE_ALPHABET.contains(&b))));
            assert_ne!(a, gen_char_n(&v, n, 14, &none()).unwrap());
        }
    }

    #[test]
    fn char_n_avoids_reserved_codes() {
        // Every two-digit number is reserved, leaving only codes with a letter.
        let reserved: BTreeSet<String> = (0..100).map(|i| format!("{i:02}")).collect();
        let v = vocab_of(200);
        let m = gen_char_n(&v, 2, 1, &reserved).unwrap();
        assert!(m.replacements().all(|c| !reserved.contains(c)));
        m.check_collisions(&v, &reserved).unwrap();
    }

    #[test]
    fn char_n_capacity() {
        let v = vocab_of(1297);
        assert!(matches!(
            gen_char_n(&v, 2, 0, &none()),
            Err(SubstitutionError::Capacity { needed: 1297, available: 1296, .. })
        ));
        assert!(gen_char_n(&vocab_of(1296), 2, 0, &none()).is_ok());
        assert!(matches!(gen_char_n(&v, 3, 0, &none()), Err(SubstitutionError::UnsupportedLength(3))));
    }

    #[test]
    fn char1_tiers_for_48_words() {
        let v = vocab_of(48);
        let m = gen_char1(&v, 7, &none()).unwrap();
        let codes: Vec<&str> = v.words().iter().map(|w| m.get(w).unwrap()).collect();
        let unique: HashSet<_> = codes.iter().collect();
        assert_eq!(unique.len(), 48);
        assert!(codes.iter().all(|c| c.chars().count() == 1));
        let letters: HashSet<char> = codes[..26].iter().map(|c| c.chars().next().unwrap()).collect();
        assert_eq!(letters, CHAR1_LETTERS.chars().collect());
        let digits: HashSet<char> = codes[26..35].iter().map(|c| c.chars().next().unwrap()).collect();
        assert_eq!(digits, CHAR1_DIGITS.chars().collect());
        let specials: HashSet<char> = codes[35..].iter().map(|c| c.chars().next().unwrap()).collect();
        assert_eq!(specials, CHAR1_SPECIALS[..13].iter().copied().collect());
        assert_eq!(m, gen_char1(&v, 7, &none()).unwrap());
    }

    #[test]
    fn char1_small_vocab_uses_letters() {
        let m = gen_char1(&vocab_of(2), 3, &none()).unwrap();
        let codes: Vec<&str> = m.replacements().collect();
        assert_ne!(codes[0], codes[1]);
        assert!(codes.iter().all(|c| c.len() == 1 && c.chars().all(|ch| ch.is_ascii_uppercase())));
    }

    #[test]
    fn char1_skips_colliding_characters() {
        let v = Vocabulary::from_words(["SELECT", "A", "*"], "t");
        let reserved: BTreeSet<String> = ["B".to_string()].into();
        let m = gen_char1(&v, 0, &reserved).unwrap();
        assert!(m.replacements().all(|c| !["A", "B", "*"].contains(&c)));
    }

    #[test]
    fn char1_capacity() {
        let cap = 26 + 9 + CHAR1_SPECIALS.len();
        assert!(gen_char1(&vocab_of(cap), 0, &none()).is_ok());
        assert!(matches!(
            gen_char1(&vocab_of(cap + 1), 0, &none()),
            Err(SubstitutionError::Capacity { .. })
        ));
    }

    #[test]
    fn dictionary_sampling() {
        let v = vocab_of(5);
        let list: Vec<String> = ["dog", "cat", "rain", "boy", "nation"].map(String::from).to_vec();
        let m = gen_dictionary(&v, &list, 1, &none()).unwrap();
        let got: BTreeSet<&str> = m.replacements().collect();
        assert_eq!(got, list.iter().map(String::as_str).collect());
        assert_eq!(m, gen_dictionary(&v, &list, 1, &none()).unwrap());

        let short = &list[..4];
        assert!(matches!(gen_dictionary(&v, short, 1, &none()), Err(SubstitutionError::Capacity { .. })));
        let dup: Vec<String> = ["dog", "dog"].map(String::from).to_vec();
        assert!(matches!(
            gen_dictionary(&vocab_of(1), &dup, 1, &none()),
            Err(SubstitutionError::DuplicateWord { .. })
        ));
    }

    #[test]
    fn original_is_identity() {
        let v = vocab_of(4);
        let m = generate(Scheme::Original, &v, 5, &none(), None).unwrap();
        let t = TokenSequence::from_whitespace("w0 w3 22.4 w1");
        assert_eq!(m.substitute(&t), t);
        assert!(m.forward().iter().all(|(a, b)| a == b));
    }

    #[test]
    fn desubstitute_reports_unknown() {
        let m = SubstitutionMap::from_pairs(
            Scheme::Dictionary,
            0,
            [("SELECT".to_string(), "banana".to_string())],
        )
        .unwrap();
        let d = m.desubstitute(&TokenSequence::from_whitespace("banana zebra 3 \"x\""));
        assert_eq!(d.tokens, TokenSequence::from_whitespace("SELECT zebra 3 \"x\""));
        assert_eq!(d.unknown, ["zebra"]);
    }

    #[test]
    fn from_pairs_rejects_non_bijection() {
        let r = SubstitutionMap::from_pairs(
            Scheme::Char2,
            0,
            [("a".to_string(), "XX".to_string()), ("b".to_string(), "XX".to_string())],
        );
        assert!(matches!(r, Err(SubstitutionError::NotBijective { .. })));
    }

    #[test]
    fn json_round_trip() {
        let m = gen_char_n(&vocab_of(10), 4, 99, &none()).unwrap();
        let json = m.to_json();
        assert!(json.contains("\"scheme\": \"char4\""));
        assert_eq!(SubstitutionMap::from_json_str(&json).unwrap(), m);
    }

    #[test]
    fn scheme_names() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("char3".parse::<Scheme>().is_err());
    }
}
