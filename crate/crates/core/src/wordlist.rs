//! The bundled dictionary wordlist (common lowercase English nouns).

/// Version tag recorded in run manifests.
pub const DEFAULT_WORDLIST_VERSION: &str = "wordlist_v1";

const DEFAULT_WORDLIST: &str = include_str!("../data/wordlist_v1.txt");

pub fn default_wordlist() -> Vec<String> {
    parse_wordlist(DEFAULT_WORDLIST)
}

/// One word per line. Blank lines are skipped and surrounding whitespace trimmed.
pub fn parse_wordlist(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}
