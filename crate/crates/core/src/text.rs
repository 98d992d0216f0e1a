//! Tokenization, vocabularies, fixed-length encoding and a rule-based
//! universal-tagset POS tagger.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDataset;
use crate::{Error, Result};

/// Characters split off the start and end of a whitespace chunk.
const EDGE_PUNCT: &[char] = &['.', ',', '!', '?', ';', ':', '"', '(', ')', '[', ']'];

pub const DEFAULT_MAX_LEN: usize = 64;

/// Lowercases, splits on whitespace and separates leading/trailing
/// punctuation. Runs of one punctuation character become a single token
/// capped at two characters (`"!!!"` becomes `"!!"`). Apostrophes and
/// hyphens inside words are kept.
pub fn tokenize(raw: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in raw.split_whitespace() {
        let chunk = chunk.to_lowercase();
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| EDGE_PUNCT.contains(c)).count();
        if lead == chars.len() {
            push_punct_runs(&chars, &mut out);
            continue;
        }
        let trail = chars
            .iter()
            .rev()
            .take_while(|c| EDGE_PUNCT.contains(c))
            .count();
        push_punct_runs(&chars[..lead], &mut out);
        out.push(chars[lead..chars.len() - trail].iter().collect());
        push_punct_runs(&chars[chars.len() - trail..], &mut out);
    }
    out
}

fn push_punct_runs(chars: &[char], out: &mut Vec<String>) {
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let run = chars[i..].iter().take_while(|&&d| d == c).count();
        out.push(std::iter::repeat_n(c, run.min(2)).collect());
        i += run;
    }
}

/// Token to index map with two reserved entries: index 0 is padding and
/// index 1 stands for unknown tokens. Corpus tokens start at index 2 and
/// never alias the reserved entries, whatever their spelling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    words: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Vocabulary::from_words(r.words)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { words: v.words }
    }
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const RESERVED: usize = 2;

    /// Builds a vocabulary whose `i`-th word gets index `i + 2`. Later
    /// duplicates are ignored.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocabulary {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for w in words {
            if !v.index.contains_key(&w) {
                v.index.insert(w.clone(), v.words.len() + Self::RESERVED);
                v.words.push(w);
            }
        }
        v
    }

    /// Tokens with frequency `>= min_count`, most frequent first, ties in
    /// lexicographic order.
    pub fn from_token_lists<'a>(
        lists: impl IntoIterator<Item = &'a [String]>,
        min_count: usize,
    ) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for list in lists {
            for t in list {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_words(entries.into_iter().map(|(w, _)| w.to_string()))
    }

    /// The twelve universal POS tags in fixed order.
    pub fn tagset() -> Self {
        Self::from_words(UNIVERSAL_TAGS.iter().map(|t| t.to_string()))
    }

    /// Size including the two reserved entries.
    pub fn len(&self) -> usize {
        self.words.len() + Self::RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Index of `token`, or [`Vocabulary::UNK`].
    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Corpus token at `index`; `None` for reserved or out-of-range indices.
    pub fn token(&self, index: usize) -> Option<&str> {
        index
            .checked_sub(Self::RESERVED)
            .and_then(|i| self.words.get(i))
            .map(String::as_str)
    }

    /// Corpus tokens in index order (starting at index 2).
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

pub fn build_vocab(dataset: &LabeledDataset, min_count: usize) -> Vocabulary {
    Vocabulary::from_token_lists(
        dataset.examples.iter().map(|e| e.tokens.as_slice()),
        min_count,
    )
}

pub const NOUN: &str = "NOUN";
pub const VERB: &str = "VERB";
pub const ADJ: &str = "ADJ";
pub const ADV: &str = "ADV";
pub const PRON: &str = "PRON";
pub const DET: &str = "DET";
pub const ADP: &str = "ADP";
pub const NUM: &str = "NUM";
pub const CONJ: &str = "CONJ";
pub const PRT: &str = "PRT";
pub const PUNCT: &str = "PUNCT";
pub const X: &str = "X";

pub const UNIVERSAL_TAGS: [&str; 12] = [
    NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, CONJ, PRT, PUNCT, X,
];

const PRONOUNS: &[&str] = &[
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "u",
    "ur",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
    "who",
    "whom",
    "whose",
    "what",
    "which",
    "someone",
    "somebody",
    "something",
    "anyone",
    "anybody",
    "anything",
    "everyone",
    "everybody",
    "everything",
    "nobody",
    "nothing",
    "one",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "no",
    "all", "both", "either", "neither", "another", "such", "many", "much", "few", "several",
];

const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
    "during", "before", "after", "above", "below", "to", "from", "of", "over", "under", "around",
    "among", "across", "behind", "beyond", "near", "upon", "within", "without", "toward",
    "towards", "than", "via", "despite",
];

const CONJUNCTIONS: &[&str] = &[
    "and", "or", "but", "nor", "yet", "because", "although", "though", "while", "if", "unless",
    "whereas", "whether", "&",
];

const PARTICLES: &[&str] = &["not", "n't", "'s", "'ll", "'re", "'ve", "'d", "'m", "'"];

const NUMBER_WORDS: &[&str] = &[
    "zero", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "twenty", "thirty", "hundred", "thousand", "million", "billion",
];

const AUXILIARIES: &[&str] = &[
    "is", "am", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "done", "will", "would", "shall", "should", "can", "could", "may", "might",
    "must", "ca", "wo",
];

/// Base forms used both as VERB entries and as stems for the `-ing`, `-ed`
/// and `-s` suffix rules.
const VERB_STEMS: &[&str] = &[
    "hate",
    "love",
    "like",
    "kill",
    "go",
    "get",
    "make",
    "know",
    "think",
    "take",
    "see",
    "come",
    "want",
    "look",
    "use",
    "find",
    "give",
    "tell",
    "work",
    "call",
    "try",
    "ask",
    "need",
    "feel",
    "become",
    "leave",
    "put",
    "mean",
    "keep",
    "let",
    "begin",
    "seem",
    "help",
    "talk",
    "turn",
    "start",
    "show",
    "hear",
    "play",
    "run",
    "move",
    "live",
    "believe",
    "bring",
    "happen",
    "write",
    "sit",
    "stand",
    "lose",
    "pay",
    "meet",
    "include",
    "continue",
    "learn",
    "change",
    "lead",
    "understand",
    "watch",
    "follow",
    "stop",
    "create",
    "speak",
    "read",
    "spend",
    "grow",
    "open",
    "walk",
    "win",
    "offer",
    "remember",
    "consider",
    "appear",
    "buy",
    "wait",
    "serve",
    "die",
    "send",
    "expect",
    "build",
    "stay",
    "fall",
    "cut",
    "reach",
    "remain",
    "suggest",
    "raise",
    "pass",
    "sell",
    "require",
    "decide",
    "pull",
    "shut",
    "destroy",
    "hurt",
    "punch",
    "hit",
    "fight",
    "attack",
    "insult",
    "suck",
    "shoot",
    "beat",
    "burn",
    "choke",
    "smash",
    "crush",
    "laugh",
    "cry",
    "enjoy",
    "say",
    "fail",
    "deserve",
    "bore",
    "entertain",
    "act",
    "feature",
    "manage",
    "miss",
    "waste",
    "care",
    "shine",
    "fuck",
    "screw",
    "rot",
];

const ADJECTIVES: &[&str] = &[
    "stupid",
    "dumb",
    "idiotic",
    "good",
    "bad",
    "great",
    "terrible",
    "awful",
    "horrible",
    "best",
    "worst",
    "better",
    "worse",
    "new",
    "old",
    "big",
    "small",
    "little",
    "high",
    "low",
    "beautiful",
    "ugly",
    "nice",
    "funny",
    "boring",
    "dull",
    "interesting",
    "pathetic",
    "sad",
    "happy",
    "angry",
    "real",
    "true",
    "false",
    "whole",
    "long",
    "short",
    "fat",
    "lazy",
    "worthless",
    "useless",
    "disgusting",
    "brilliant",
    "fine",
    "smart",
    "clever",
    "weak",
    "strong",
    "dead",
    "sick",
    "fresh",
    "flat",
    "cheap",
    "silly",
    "pointless",
    "mediocre",
    "wonderful",
    "excellent",
    "poor",
    "rich",
    "full",
    "empty",
    "own",
    "other",
    "same",
    "different",
    "entire",
    "original",
    "predictable",
    "tedious",
    "hilarious",
    "moving",
    "charming",
];

const ADVERBS: &[&str] = &[
    "very", "too", "also", "just", "really", "quite", "rather", "often", "never", "always",
    "still", "even", "here", "there", "now", "then", "again", "almost", "already", "well", "soon",
    "ever", "so", "only", "perhaps", "maybe", "once", "enough", "away", "back", "up", "down",
    "out", "off", "how", "why", "when", "where", "more", "most", "less", "least",
];

/// Deterministic universal-tagset tagger: an optional user lexicon, then
/// closed-class lists, then suffix rules, then NOUN.
#[derive(Debug, Clone, Default)]
pub struct Tagger {
    overrides: HashMap<String, String>,
}

impl Tagger {
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Loads `word<TAB>TAG` lines overriding the built-in rules.
    pub fn with_lexicon_file(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut overrides = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(path, Some(i + 1), "expected 'word<TAB>TAG'"))?;
            let tag = tag.trim().to_uppercase();
            if !UNIVERSAL_TAGS.contains(&tag.as_str()) {
                return Err(Error::format(
                    path,
                    Some(i + 1),
                    format!("unknown tag '{tag}'"),
                ));
            }
            overrides.insert(word.trim().to_lowercase(), tag);
        }
        Ok(Tagger { overrides })
    }

    pub fn tag(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| self.tag_token(t).to_string())
            .collect()
    }

    pub fn tag_token<'a>(&'a self, token: &str) -> &'a str {
        if let Some(tag) = self.overrides.get(token) {
            return tag;
        }
        builtin_tag(token)
    }
}

fn is_verb_form(token: &str) -> bool {
    let known = |stem: &str| VERB_STEMS.contains(&stem);
    let undouble = |stem: &str| {
        let b = stem.as_bytes();
        b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] && known(&stem[..stem.len() - 1])
    };
    if let Some(stem) = token.strip_suffix("ing") {
        return known(stem) || known(&format!("{stem}e")) || undouble(stem);
    }
    if let Some(stem) = token.strip_suffix("ed") {
        return known(stem)
            || known(&format!("{stem}e"))
            || undouble(stem)
            || known(&format!("{stem}d"));
    }
    if let Some(stem) = token.strip_suffix("ies") {
        if known(&format!("{stem}y")) {
            return true;
        }
    }
    if let Some(stem) = token.strip_suffix("es") {
        if known(stem) {
            return true;
        }
    }
    if let Some(stem) = token.strip_suffix('s') {
        return known(stem);
    }
    false
}

fn builtin_tag(token: &str) -> &'static str {
    if token.is_empty() {
        return X;
    }
    if token
        .chars()
        .all(|c| c.is_ascii_punctuation() || EDGE_PUNCT.contains(&c))
    {
        return PUNCT;
    }
    if !token.chars().any(char::is_alphanumeric) {
        return if token
            .chars()
            .all(|c| c.is_ascii_punctuation() || c.is_whitespace())
        {
            PUNCT
        } else {
            X
        };
    }
    if token.chars().any(|c| c.is_ascii_digit())
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '/' | '%'))
    {
        return NUM;
    }
    let lists: [(&[&str], &'static str); 9] = [
        (PRONOUNS, PRON),
        (DETERMINERS, DET),
        (ADPOSITIONS, ADP),
        (CONJUNCTIONS, CONJ),
        (PARTICLES, PRT),
        (NUMBER_WORDS, NUM),
        (AUXILIARIES, VERB),
        (ADJECTIVES, ADJ),
        (ADVERBS, ADV),
    ];
    for (list, tag) in lists {
        if list.contains(&token) {
            return tag;
        }
    }
    if VERB_STEMS.contains(&token) {
        return VERB;
    }
    if token.len() > 4 && token.ends_with("ly") {
        return ADV;
    }
    if is_verb_form(token) {
        return VERB;
    }
    if ["ous", "ful", "ive"]
        .iter()
        .any(|s| token.len() > s.len() + 2 && token.ends_with(s))
    {
        return ADJ;
    }
    NOUN
}

/// A sentence as fixed-length index sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub indices: Vec<usize>,
    /// Number of leading positions that take part in convolution.
    pub true_length: usize,
    pub pos_indices: Option<Vec<usize>>,
}

/// Truncates to `max_len` and pads with PAD. Sentences shorter than
/// `min_width` (the widest filter) get `true_length = min_width`, so every
/// filter sees at least one window.
pub fn encode(
    tokens: &[String],
    pos_tags: Option<&[String]>,
    vocab: &Vocabulary,
    tag_vocab: &Vocabulary,
    max_len: usize,
    min_width: usize,
) -> Result<EncodedSentence> {
    if tokens.is_empty() {
        return Err(Error::invalid("cannot encode an empty sentence"));
    }
    if max_len < min_width.max(1) {
        return Err(Error::invalid(format!(
            "max_len {max_len} is smaller than the widest filter ({min_width})"
        )));
    }
    if let Some(tags) = pos_tags {
        if tags.len() != tokens.len() {
            return Err(Error::invalid(format!(
                "{} tags for {} tokens",
                tags.len(),
                tokens.len()
            )));
        }
    }
    let kept = tokens.len().min(max_len);
    let fill = |lookup: &mut dyn FnMut(usize) -> usize| -> Vec<usize> {
        let mut v = vec![Vocabulary::PAD; max_len];
        for (i, slot) in v.iter_mut().enumerate().take(kept) {
            *slot = lookup(i);
        }
        v
    };
    let indices = fill(&mut |i| vocab.get(&tokens[i]));
    let pos_indices = pos_tags.map(|tags| fill(&mut |i| tag_vocab.get(&tags[i])));
    Ok(EncodedSentence {
        indices,
        true_length: kept.max(min_width),
        pos_indices,
    })
}
