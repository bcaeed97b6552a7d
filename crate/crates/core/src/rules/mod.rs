//! Mangling-rule language: a Hashcat-compatible subset.
//!
//! A rule is a sequence of single-character functions, some followed by a
//! fixed number of operand characters (`$1`, `sa@`, `i3x`). Rules are applied
//! in word-major order by the attack engine; every application either yields
//! a guess or is rejected (position out of range, or the result grows past
//! [`MAX_WORD_LEN`]).

mod apply;
mod parse;

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use apply::Scratch;
pub use parse::{parse_rule, parse_ruleset, position_decode, position_encode, ParsedRuleSet, SkippedLine};

/// Longest word (dictionary entry or guess) the engine handles.
pub const MAX_WORD_LEN: usize = 32;

/// True for the printable ASCII range accepted everywhere in the crate.
pub fn is_printable(b: u8) -> bool {
    (0x20..=0x7e).contains(&b)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown rule function {found:?} at position {position}")]
    UnknownOpcode { position: usize, found: char },
    #[error("function at position {position} is missing an operand")]
    TruncatedOperand { position: usize },
    #[error("invalid position operand {found:?} at position {position}")]
    InvalidPosition { position: usize, found: char },
    #[error("operand at position {position} is not printable ASCII")]
    InvalidOperand { position: usize },
    #[error("empty rule")]
    EmptyRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleSetError {
    #[error("rule set is empty ({skipped} unparsable lines)")]
    EmptyRuleSet { skipped: usize },
}

/// One primitive mangling function with its decoded operands.
///
/// Positions are already decoded (`'A'` is 10); characters are raw ASCII bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleToken {
    /// `:`
    Passthrough,
    /// `l`
    Lowercase,
    /// `u`
    Uppercase,
    /// `c`
    Capitalize,
    /// `C`
    InvertCapitalize,
    /// `t`
    ToggleAll,
    /// `TN`
    ToggleAt(u8),
    /// `r`
    Reverse,
    /// `d`
    Duplicate,
    /// `pN`: append the word N more times.
    DuplicateTimes(u8),
    /// `f`
    Reflect,
    /// `{`
    RotateLeft,
    /// `}`
    RotateRight,
    /// `$X`
    Append(u8),
    /// `^X`
    Prepend(u8),
    /// `[`
    DropFirst,
    /// `]`
    DropLast,
    /// `DN`
    DeleteAt(u8),
    /// `xNM`: keep M characters starting at N.
    Extract(u8, u8),
    /// `iNX`
    InsertAt(u8, u8),
    /// `oNX`
    OverwriteAt(u8, u8),
    /// `'N`
    Truncate(u8),
    /// `sXY`
    Replace(u8, u8),
    /// `@X`
    Purge(u8),
    /// `zN`
    DuplicateFirst(u8),
    /// `ZN`
    DuplicateLast(u8),
    /// `q`
    DuplicateEach,
}

/// Kind of a single operand slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Operand {
    Position,
    Char,
}

impl RuleToken {
    /// Every supported function character, in documentation order.
    pub const OPCODES: [char; 27] = [
        ':', 'l', 'u', 'c', 'C', 't', 'T', 'r', 'd', 'p', 'f', '{', '}', '$', '^', '[', ']', 'D', 'x', 'i',
        'o', '\'', 's', '@', 'z', 'Z', 'q',
    ];

    pub(crate) fn signature(opcode: char) -> Option<&'static [Operand]> {
        use Operand::*;
        Some(match opcode {
            ':' | 'l' | 'u' | 'c' | 'C' | 't' | 'r' | 'd' | 'f' | '{' | '}' | '[' | ']' | 'q' => &[],
            'T' | 'p' | 'D' | '\'' | 'z' | 'Z' => &[Position],
            '$' | '^' | '@' => &[Char],
            'x' => &[Position, Position],
            'i' | 'o' => &[Position, Char],
            's' => &[Char, Char],
            _ => return None,
        })
    }

    pub(crate) fn build(opcode: char, args: &[u8]) -> RuleToken {
        use RuleToken::*;
        match opcode {
            ':' => Passthrough,
            'l' => Lowercase,
            'u' => Uppercase,
            'c' => Capitalize,
            'C' => InvertCapitalize,
            't' => ToggleAll,
            'T' => ToggleAt(args[0]),
            'r' => Reverse,
            'd' => Duplicate,
            'p' => DuplicateTimes(args[0]),
            'f' => Reflect,
            '{' => RotateLeft,
            '}' => RotateRight,
            '$' => Append(args[0]),
            '^' => Prepend(args[0]),
            '[' => DropFirst,
            ']' => DropLast,
            'D' => DeleteAt(args[0]),
            'x' => Extract(args[0], args[1]),
            'i' => InsertAt(args[0], args[1]),
            'o' => OverwriteAt(args[0], args[1]),
            '\'' => Truncate(args[0]),
            's' => Replace(args[0], args[1]),
            '@' => Purge(args[0]),
            'z' => DuplicateFirst(args[0]),
            'Z' => DuplicateLast(args[0]),
            'q' => DuplicateEach,
            other => unreachable!("no token for opcode {other:?}"),
        }
    }

    pub fn opcode(&self) -> char {
        use RuleToken::*;
        match self {
            Passthrough => ':',
            Lowercase => 'l',
            Uppercase => 'u',
            Capitalize => 'c',
            InvertCapitalize => 'C',
            ToggleAll => 't',
            ToggleAt(_) => 'T',
            Reverse => 'r',
            Duplicate => 'd',
            DuplicateTimes(_) => 'p',
            Reflect => 'f',
            RotateLeft => '{',
            RotateRight => '}',
            Append(_) => '$',
            Prepend(_) => '^',
            DropFirst => '[',
            DropLast => ']',
            DeleteAt(_) => 'D',
            Extract(..) => 'x',
            InsertAt(..) => 'i',
            OverwriteAt(..) => 'o',
            Truncate(_) => '\'',
            Replace(..) => 's',
            Purge(_) => '@',
            DuplicateFirst(_) => 'z',
            DuplicateLast(_) => 'Z',
            DuplicateEach => 'q',
        }
    }

    fn operands(&self) -> Vec<u8> {
        use RuleToken::*;
        match *self {
            ToggleAt(n) | DuplicateTimes(n) | DeleteAt(n) | Truncate(n) | DuplicateFirst(n) | DuplicateLast(n) => {
                vec![position_encode(n)]
            }
            Append(c) | Prepend(c) | Purge(c) => vec![c],
            Extract(n, m) => vec![position_encode(n), position_encode(m)],
            InsertAt(n, c) | OverwriteAt(n, c) => vec![position_encode(n), c],
            Replace(a, b) => vec![a, b],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for RuleToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.opcode())?;
        for b in self.operands() {
            write!(f, "{}", b as char)?;
        }
        Ok(())
    }
}

/// A parsed rule: a non-empty token sequence plus the line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    tokens: Vec<RuleToken>,
    source: String,
}

impl Rule {
    pub(crate) fn new(tokens: Vec<RuleToken>, source: String) -> Self {
        debug_assert!(!tokens.is_empty());
        Rule { tokens, source }
    }

    pub fn tokens(&self) -> &[RuleToken] {
        &self.tokens
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Tokens joined by single spaces. Parsing this string yields the same tokens.
    pub fn canonical(&self) -> String {
        self.tokens.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    }

    pub fn is_passthrough(&self) -> bool {
        self.tokens == [RuleToken::Passthrough]
    }

    /// Apply the rule to `word`. `None` means the application was rejected.
    pub fn apply(&self, word: &str) -> Option<String> {
        let mut out = Vec::with_capacity(MAX_WORD_LEN);
        let mut scratch = Scratch::default();
        if self.apply_into(word.as_bytes(), &mut out, &mut scratch) {
            // apply only ever produces printable ASCII
            Some(String::from_utf8(out).expect("ASCII output"))
        } else {
            None
        }
    }

    /// Allocation-free application into a caller-owned buffer.
    ///
    /// Returns `false` when rejected; `out` then holds unspecified content.
    pub fn apply_into(&self, word: &[u8], out: &mut Vec<u8>, scratch: &mut Scratch) -> bool {
        apply::apply_tokens(&self.tokens, word, out, scratch)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Hash of a rule set's canonical forms; ties trained weights to the rule set they were trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RulesetFingerprint(pub u64);

impl fmt::Display for RulesetFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// An ordered, duplicate-free collection of rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    name: String,
    identity_removed: bool,
}

impl RuleSet {
    /// Builds a rule set, dropping later duplicates (by canonical form) and,
    /// if asked, the bare `:` rule.
    pub fn new(name: impl Into<String>, rules: Vec<Rule>, drop_identity: bool) -> Result<Self, RuleSetError> {
        let mut seen = std::collections::HashSet::new();
        let rules: Vec<Rule> = rules
            .into_iter()
            .filter(|r| !(drop_identity && r.is_passthrough()))
            .filter(|r| seen.insert(r.canonical()))
            .collect();
        if rules.is_empty() {
            return Err(RuleSetError::EmptyRuleSet { skipped: 0 });
        }
        Ok(RuleSet { rules, name: name.into(), identity_removed: drop_identity })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn identity_removed(&self) -> bool {
        self.identity_removed
    }

    pub fn get(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }

    pub fn fingerprint(&self) -> RulesetFingerprint {
        let mut hasher = Sha256::new();
        for rule in &self.rules {
            hasher.update(rule.canonical().as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        RulesetFingerprint(u64::from_le_bytes(head))
    }

    /// One canonical rule per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&rule.canonical());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opcode_table_is_consistent() {
        for op in RuleToken::OPCODES {
            let sig = RuleToken::signature(op).expect("listed opcode has a signature");
            let args: Vec<u8> = sig.iter().map(|_| 1u8).collect();
            assert_eq!(RuleToken::build(op, &args).opcode(), op);
        }
        assert!(RuleToken::signature('Q').is_none());
    }

    #[test]
    fn fingerprint_depends_on_content_and_order() {
        let a = parse_ruleset("l\nu\n", "a", true).unwrap().ruleset;
        let b = parse_ruleset("u\nl\n", "b", true).unwrap().ruleset;
        let c = parse_ruleset("l  \nu\n", "c", true).unwrap().ruleset;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), c.fingerprint());
    }
}
