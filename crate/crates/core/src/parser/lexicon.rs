use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ParseError;

/// Penn Treebank tags used by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pos {
    VB,
    NN,
    NNS,
    NNP,
    DT,
    JJ,
    CD,
    PRP,
    #[serde(rename = "PRP$")]
    PRPS,
    IN,
    TO,
    CC,
}

impl Pos {
    fn parse(s: &str) -> Option<Pos> {
        Some(match s {
            "VB" => Pos::VB,
            "NN" => Pos::NN,
            "NNS" => Pos::NNS,
            "NNP" => Pos::NNP,
            "DT" => Pos::DT,
            "JJ" => Pos::JJ,
            "CD" => Pos::CD,
            "PRP" => Pos::PRP,
            "PRP$" => Pos::PRPS,
            "IN" => Pos::IN,
            "TO" => Pos::TO,
            "CC" => Pos::CC,
            _ => return None,
        })
    }

    pub fn is_noun(self) -> bool {
        matches!(self, Pos::NN | Pos::NNS | Pos::NNP)
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pos::VB => "VB",
            Pos::NN => "NN",
            Pos::NNS => "NNS",
            Pos::NNP => "NNP",
            Pos::DT => "DT",
            Pos::JJ => "JJ",
            Pos::CD => "CD",
            Pos::PRP => "PRP",
            Pos::PRPS => "PRP$",
            Pos::IN => "IN",
            Pos::TO => "TO",
            Pos::CC => "CC",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub pos: Pos,
    pub lemma: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position after multiword joining and punctuation removal.
    pub index: usize,
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    pub category: String,
}

/// Word list keyed by lower-cased surface form. A surface may carry several
/// entries (`her` is both PRP and PRP$); the parser picks by context.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, Vec<Entry>>,
    longest: usize,
}

const BUNDLED: &str = include_str!("../../data/lexicon.txt");

impl Lexicon {
    pub fn bundled() -> Lexicon {
        Lexicon::parse(BUNDLED).expect("bundled lexicon parses")
    }

    /// Parses `word | POS | lemma | category` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Lexicon, String> {
        let mut lex = Lexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('|').map(str::trim).collect();
            if cols.len() != 4 || cols.iter().any(|c| c.is_empty()) {
                return Err(format!("lexicon line {}: expected 4 columns", i + 1));
            }
            let pos = Pos::parse(cols[1]).ok_or(format!("lexicon line {}: unknown tag `{}`", i + 1, cols[1]))?;
            let word = cols[0].to_lowercase();
            lex.longest = lex.longest.max(word.split_whitespace().count());
            lex.entries.entry(word).or_default().push(Entry {
                pos,
                lemma: cols[2].to_string(),
                category: cols[3].to_string(),
            });
        }
        Ok(lex)
    }

    pub fn lookup(&self, word: &str) -> Option<&[Entry]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Splits a command into tagged tokens. Commas and final punctuation
    /// are dropped; a leading vocative `Robot,` is removed.
    pub fn tokenize(&self, text: &str) -> Result<Vec<Token>, ParseError> {
        // words with a flag marking a comma right before them
        let mut words: Vec<(String, bool)> = Vec::new();
        let mut comma = false;
        for piece in text.split_whitespace() {
            let mut w = piece;
            let mut lead = false;
            while let Some(r) = w.strip_prefix(',') {
                lead = true;
                w = r;
            }
            let mut trail = false;
            loop {
                if let Some(r) = w.strip_suffix(',') {
                    trail = true;
                    w = r;
                } else if let Some(r) = w.strip_suffix(['.', '!', '?']) {
                    w = r;
                } else {
                    break;
                }
            }
            if !w.is_empty() {
                words.push((w.to_string(), comma || lead));
                comma = false;
            }
            if trail {
                comma = true;
            }
            if let Some(bad) = w.chars().find(|c| !(c.is_alphanumeric() || *c == '\'' || *c == '-')) {
                return Err(ParseError::UnexpectedCharacter(bad));
            }
        }
        if words.is_empty() {
            return Err(ParseError::Empty);
        }
        // vocative
        if words.len() > 1 && words[0].0.eq_ignore_ascii_case("robot") && words[1].1 {
            words.remove(0);
            words[0].1 = false;
        }

        let mut out: Vec<Token> = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let clause_start = i == 0 || words[i].1 || out.last().is_some_and(|t| t.pos == Pos::CC);
            let mut matched = None;
            for k in (1..=self.longest.min(words.len() - i)).rev() {
                // a multiword entry cannot span a comma
                if (i + 1..i + k).any(|j| words[j].1) {
                    continue;
                }
                let key: Vec<String> = words[i..i + k].iter().map(|(w, _)| w.to_lowercase()).collect();
                if let Some(entries) = self.entries.get(&key.join(" ")) {
                    matched = Some((k, entries));
                    break;
                }
            }
            let index = out.len() + 1;
            match matched {
                Some((k, entries)) => {
                    let surface = words[i..i + k]
                        .iter()
                        .map(|(w, _)| w.as_str())
                        .collect::<Vec<_>>()
                        .join("_");
                    let next = words.get(i + k).map(|(w, _)| w.as_str());
                    let e = self.choose(entries, next);
                    out.push(Token {
                        index,
                        surface,
                        lemma: e.lemma.clone(),
                        pos: e.pos,
                        category: e.category.clone(),
                    });
                    i += k;
                }
                None => {
                    let w = &words[i].0;
                    let (pos, lemma, category) = if w.bytes().all(|b| b.is_ascii_digit()) {
                        (Pos::CD, w.trim_start_matches('0').to_string(), "num".to_string())
                    } else if clause_start {
                        (Pos::VB, w.to_lowercase(), "verb:unknown".to_string())
                    } else if out.last().is_some_and(|t| matches!(t.pos, Pos::DT | Pos::JJ | Pos::CD | Pos::PRPS)) {
                        (Pos::NN, w.to_lowercase(), "unknown".to_string())
                    } else {
                        return Err(ParseError::UnknownWord {
                            index,
                            word: w.clone(),
                        });
                    };
                    let lemma = if lemma.is_empty() { "0".to_string() } else { lemma };
                    out.push(Token {
                        index,
                        surface: w.clone(),
                        lemma,
                        pos,
                        category,
                    });
                    i += 1;
                }
            }
        }
        Ok(out)
    }

    /// `her` before a noun phrase head is possessive; before a determiner,
    /// number or nothing it is an object pronoun.
    fn choose<'a>(&'a self, entries: &'a [Entry], next: Option<&str>) -> &'a Entry {
        if entries.len() == 1 {
            return &entries[0];
        }
        let next_is_head = next
            .and_then(|w| self.lookup(w))
            .is_some_and(|es| es.iter().any(|e| matches!(e.pos, Pos::JJ | Pos::NN | Pos::NNS)));
        let want = if next_is_head { Pos::PRPS } else { Pos::PRP };
        entries.iter().find(|e| e.pos == want).unwrap_or(&entries[0])
    }
}
