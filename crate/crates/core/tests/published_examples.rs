//! The worked example of a GrailQA question: its masked form and the
//! published substitutions for each setting.

use std::collections::BTreeMap;

use sparql_vocab::masking::strip_prologue;
use sparql_vocab::substitution::{Scheme, CODE_ALPHABET};
use sparql_vocab::wordlist::default_wordlist;
use sparql_vocab::{demask, extract_vocabulary, lex_sparql, mask, MaskingConfig, SubstitutionMap, TokenSequence};

const SPARQL: &str = "
SELECT DISTINCT ?x0  WHERE {
  ?x0 :type.object.type :aviation.airport .
  VALUES ?x1 { :m.0199qf }
  ?x0 :aviation.airport.airport_type ?x1 .
  FILTER ( ?x0 != ?x1  )
}
";

const MASKED: &str = "SELECT DISTINCT ?x0 WHERE OB
  ?x0 :type.object.type rel0 .
  VALUES ?x1 OB ent0 CB
  ?x0 rel1 ?x1 .
  FILTER ( ?x0 != ?x1 )
CB";

const DICTIONARY: &str = "banana compound boy nation rain
  boy catastrophe elementary flower
  teeth today rain jacket case
  boy fog today flower
  duck folk boy chart today concede
case";

const CHAR2: &str = "UY SJ 0X 6L VZ
  0X 5G JO SE
  5Z QB VZ QJ 8O
  0X FT QB SE
  RU 2K 0X WY QB I5
8O";

const CHAR4: &str = "53IY 3UQZ JKMQ CEK2 5DZV
  JKMQ KRDN 1G8E ZC5C
  5ILL 3JBD 5DZV X5XB YMG5
  JKMQ ZVGC 3JBD ZC5C
  87O2 DE3Z JKMQ TU76 3JBD 049K
YMG5";

const CHAR8: &str = "WDEUTG57 L741BHJP ORWDXYPH 6L05N8AS ZLZXSARH
  ORWDXYPH K4GR9TPQ 797G3PGO V13Y1EFE
  PQMAIPQ4 MLN1V72G ZLZXSARH KPHC8I2N WG0XRTYG
  ORWDXYPH ZF82YUH8 MLN1V72G V13Y1EFE
  41O2LA2M F1SANW03 ORWDXYPH 4R26K1BW MLN1V72G TD9BSKSN
WG0XRTYG";

fn masked() -> sparql_vocab::MaskingResult {
    let (_, body) = strip_prologue(&lex_sparql(SPARQL).unwrap());
    mask(&body, &MaskingConfig::default()).unwrap()
}

// The map implied by aligning the masked query with a substituted row.
fn aligned_map(scheme: Scheme, row: &str) -> SubstitutionMap {
    let original = TokenSequence::from_whitespace(MASKED);
    let row = TokenSequence::from_whitespace(row);
    assert_eq!(original.len(), row.len(), "{scheme} row is not token-aligned");
    let mut pairs = BTreeMap::new();
    for (a, b) in original.iter().zip(row.iter()) {
        if let Some(prev) = pairs.insert(a.clone(), b.clone()) {
            assert_eq!(&prev, b, "{scheme}: {a} maps to both {prev} and {b}");
        }
    }
    SubstitutionMap::from_pairs(scheme, 0, pairs).expect("published row is a bijection")
}

#[test]
fn masking_matches_published_form() {
    let result = masked();
    assert_eq!(result.masked, TokenSequence::from_whitespace(MASKED));
    assert_eq!(result.entity_map.get("ent0"), Some(":m.0199qf"));
    assert_eq!(result.relation_map.get("rel0"), Some(":aviation.airport"));
    assert_eq!(result.relation_map.get("rel1"), Some(":aviation.airport.airport_type"));
    let (_, body) = strip_prologue(&lex_sparql(SPARQL).unwrap());
    assert_eq!(demask(&result).unwrap(), body);
}

#[test]
fn example_vocabulary() {
    let vocab = extract_vocabulary(&[masked().masked], "published");
    assert_eq!(vocab.len(), 17);
}

#[test]
fn published_rows_are_bijective_substitutions() {
    let masked = masked().masked;
    for (scheme, row) in [
        (Scheme::Dictionary, DICTIONARY),
        (Scheme::Char2, CHAR2),
        (Scheme::Char4, CHAR4),
        (Scheme::Char8, CHAR8),
    ] {
        let map = aligned_map(scheme, row);
        assert_eq!(map.len(), 17);
        let substituted = map.substitute(&masked);
        assert_eq!(substituted, TokenSequence::from_whitespace(row), "{scheme}");
        let back = map.desubstitute(&substituted);
        assert!(back.unknown.is_empty());
        assert_eq!(back.tokens, masked);
    }
}

#[test]
fn published_codes_have_the_generated_shape() {
    for (scheme, row) in [(Scheme::Char2, CHAR2), (Scheme::Char4, CHAR4), (Scheme::Char8, CHAR8)] {
        let n = scheme.code_length().unwrap();
        for code in aligned_map(scheme, row).replacements() {
            assert_eq!(code.len(), n);
            assert!(code.bytes().all(|b| CODE_ALPHABET.contains(&b)), "{code}");
        }
    }
    let wordlist = default_wordlist();
    for word in aligned_map(Scheme::Dictionary, DICTIONARY).replacements() {
        assert!(wordlist.iter().any(|w| w == word), "{word} missing from the built-in wordlist");
    }
}
