use super::{is_printable, Operand, ParseError, Rule, RuleSet, RuleSetError, RuleToken};

/// Decode a Hashcat position character: `0-9` then `A-Z` (10..=35).
pub fn position_decode(c: char) -> Result<u8, ParseError> {
    match c {
        '0'..='9' => Ok(c as u8 - b'0'),
        'A'..='Z' => Ok(c as u8 - b'A' + 10),
        _ => Err(ParseError::InvalidPosition { position: 0, found: c }),
    }
}

pub fn position_encode(n: u8) -> u8 {
    match n {
        0..=9 => b'0' + n,
        10..=35 => b'A' + n - 10,
        _ => panic!("position {n} is not encodable"),
    }
}

fn is_separator(c: char) -> bool {
    c == ' ' || c == '\t'
}

/// Parse a single rule line. Whitespace between functions is ignored; each
/// function consumes exactly its fixed number of operand characters, so `$ `
/// appends a space.
pub fn parse_rule(line: &str) -> Result<Rule, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_separator(c) {
            i += 1;
            continue;
        }
        let opcode_pos = i;
        let sig = RuleToken::signature(c).ok_or(ParseError::UnknownOpcode { position: opcode_pos, found: c })?;
        i += 1;
        let mut args = [0u8; 2];
        for (slot, kind) in sig.iter().enumerate() {
            let Some(&arg) = chars.get(i) else {
                return Err(ParseError::TruncatedOperand { position: opcode_pos });
            };
            args[slot] = match kind {
                Operand::Position => position_decode(arg)
                    .map_err(|_| ParseError::InvalidPosition { position: i, found: arg })?,
                Operand::Char => {
                    if !arg.is_ascii() || !is_printable(arg as u8) {
                        return Err(ParseError::InvalidOperand { position: i });
                    }
                    arg as u8
                }
            };
            i += 1;
        }
        tokens.push(RuleToken::build(c, &args[..sig.len()]));
    }
    if tokens.is_empty() {
        return Err(ParseError::EmptyRule);
    }
    Ok(Rule::new(tokens, line.to_string()))
}

/// A line of a rule file that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line_number: usize,
    pub text: String,
    pub error: ParseError,
}

#[derive(Debug, Clone)]
pub struct ParsedRuleSet {
    pub ruleset: RuleSet,
    pub skipped: Vec<SkippedLine>,
}

/// Parse a rule file. Comments (`#`) and blank lines are ignored, unparsable
/// lines are collected rather than aborting, duplicates keep their first
/// occurrence, and `drop_identity` removes the bare `:` rule.
pub fn parse_ruleset(text: &str, name: &str, drop_identity: bool) -> Result<ParsedRuleSet, RuleSetError> {
    let mut rules = Vec::new();
    let mut skipped = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.starts_with('#') || line.chars().all(is_separator) {
            continue;
        }
        match parse_rule(line) {
            Ok(rule) => rules.push(rule),
            Err(error) => skipped.push(SkippedLine { line_number: idx + 1, text: line.to_string(), error }),
        }
    }
    match RuleSet::new(name, rules, drop_identity) {
        Ok(ruleset) => Ok(ParsedRuleSet { ruleset, skipped }),
        Err(RuleSetError::EmptyRuleSet { .. }) => Err(RuleSetError::EmptyRuleSet { skipped: skipped.len() }),
    }
}
