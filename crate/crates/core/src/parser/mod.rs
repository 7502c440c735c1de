//! Restricted-English command understanding: tokens, typed dependencies,
//! action frames and modifiers.

mod deps;
mod frames;
mod lexicon;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use deps::{parse_tokens, Dependency, Parse};
pub use frames::{
    extract_frames, extract_modifiers, mention_kind, resolve_pronouns, ActionFrame, Attribute, DiscourseContext,
    Mention, MentionKind, ModValue, Modifier, Primitive, Slot, SUPPORTED_NUMERALS,
};
pub use lexicon::{Entry, Lexicon, Pos, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty command")]
    Empty,
    #[error("unexpected character `{0}`")]
    UnexpectedCharacter(char),
    #[error("unknown word `{word}` at position {index}")]
    UnknownWord { index: usize, word: String },
    #[error("unexpected `{word}` at position {index}, expected {expected}")]
    UnexpectedToken {
        index: usize,
        word: String,
        expected: &'static str,
    },
    #[error("command ended early, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
    #[error("no action is known for the verb `{0}`")]
    UnknownAction(String),
    #[error("unsupported number `{word}`; use {supported}")]
    UnsupportedNumber { word: String, supported: String },
    #[error("cannot tell what `{pronoun}` (position {index}) refers to")]
    UnresolvedPronoun { pronoun: String, index: usize },
}

/// Tokenizes and parses one command.
pub fn parse_dependencies(lex: &Lexicon, text: &str) -> Result<Parse, ParseError> {
    parse_tokens(lex.tokenize(text)?)
}

/// Everything the goal compiler needs from one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Understanding {
    pub parse: Parse,
    pub frames: Vec<ActionFrame>,
    pub modifiers: Vec<Modifier>,
}

/// Runs the whole pipeline. The context records this utterance's nouns even
/// when a later stage fails.
pub fn understand(
    lex: &Lexicon,
    text: &str,
    ctx: &mut DiscourseContext,
    bindings: &BTreeMap<String, String>,
) -> Result<Understanding, ParseError> {
    let parse = parse_dependencies(lex, text)?;
    ctx.hear(&parse.tokens);
    let raw = extract_frames(&parse)?;
    let modifiers = extract_modifiers(&parse)?;
    let frames = resolve_pronouns(&raw, &parse, ctx, bindings)?;
    Ok(Understanding {
        parse,
        frames,
        modifiers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deps(text: &str) -> Vec<String> {
        parse_dependencies(&Lexicon::bundled(), text).unwrap().rendered()
    }

    fn frames(text: &str) -> Vec<String> {
        let mut ctx = DiscourseContext::with_speaker("jamie");
        understand(&Lexicon::bundled(), text, &mut ctx, &BTreeMap::new())
            .unwrap()
            .frames
            .iter()
            .map(ToString::to_string)
            .collect()
    }

    #[test]
    fn book_sentence_dependencies() {
        assert_eq!(
            deps("take this book from the table to the bookshelf"),
            [
                "root(ROOT-0,take-1)",
                "det(book-3,this-2)",
                "dobj(take-1,book-3)",
                "case(table-6,from-4)",
                "det(table-6,the-5)",
                "nmod:from(take-1,table-6)",
                "case(bookshelf-9,to-7)",
                "det(bookshelf-9,the-8)",
                "nmod:to(table-6,bookshelf-9)",
            ]
        );
    }

    #[test]
    fn single_verb_and_double_object() {
        assert_eq!(deps("stop"), ["root(ROOT-0,stop-1)"]);
        assert_eq!(
            deps("bring me a coke"),
            ["root(ROOT-0,bring-1)", "iobj(bring-1,me-2)", "det(coke-4,a-3)", "dobj(bring-1,coke-4)"]
        );
    }

    #[test]
    fn frames_for_the_worked_examples() {
        assert_eq!(
            frames("take this book from the table to the bookshelf"),
            ["action(robot,take,book,table,bookshelf)"]
        );
        assert_eq!(frames("bring James to the office"), ["action(robot,bring,james,NIL,office)"]);
        assert_eq!(
            frames("Robot, find Mary, and bring her an apple"),
            ["action(robot,find,mary,NIL,NIL)", "action(robot,bring,apple,NIL,mary)"]
        );
        assert_eq!(
            frames("grasp a cup, go to the living room, and give it to Mary"),
            [
                "action(robot,grasp,cup,NIL,NIL)",
                "action(robot,go,NIL,NIL,living_room)",
                "action(robot,give,cup,NIL,mary)"
            ]
        );
    }

    #[test]
    fn modifiers() {
        let p = parse_dependencies(&Lexicon::bundled(), "give Mary two big apples").unwrap();
        let m: Vec<String> = extract_modifiers(&p).unwrap().iter().map(ToString::to_string).collect();
        assert_eq!(m, ["number(apple,2)", "size(apple,big)"]);
        let p = parse_dependencies(&Lexicon::bundled(), "bring me no apples").unwrap();
        assert_eq!(extract_modifiers(&p).unwrap()[0].to_string(), "number(apple,0)");
        let p = parse_dependencies(&Lexicon::bundled(), "bring me twelve apples").unwrap();
        assert!(matches!(extract_modifiers(&p), Err(ParseError::UnsupportedNumber { .. })));
    }

    #[test]
    fn pronoun_without_antecedent() {
        let mut ctx = DiscourseContext::new();
        let r = understand(&Lexicon::bundled(), "give it to Mary", &mut ctx, &BTreeMap::new());
        assert_eq!(
            r,
            Err(ParseError::UnresolvedPronoun {
                pronoun: "it".into(),
                index: 2
            })
        );
        let bound = BTreeMap::from([("it".to_string(), "cup1".to_string())]);
        let r = understand(&Lexicon::bundled(), "give it to Mary", &mut ctx, &bound).unwrap();
        assert_eq!(r.frames[0].to_string(), "action(robot,give,cup1,NIL,mary)");
    }

    #[test]
    fn unknown_verb_is_an_action_error() {
        let r = parse_dependencies(&Lexicon::bundled(), "transmogrify the lamp").and_then(|p| extract_frames(&p));
        assert_eq!(r, Err(ParseError::UnknownAction("transmogrify".into())));
    }
}
