use super::{RuleToken, MAX_WORD_LEN};

/// Reusable buffer for functions that cannot work in place.
#[derive(Debug, Default)]
pub struct Scratch {
    buf: Vec<u8>,
}

fn toggle(b: &mut u8) {
    if b.is_ascii_lowercase() {
        b.make_ascii_uppercase();
    } else if b.is_ascii_uppercase() {
        b.make_ascii_lowercase();
    }
}

/// Runs `tokens` over `word`, leaving the result in `out`.
pub(super) fn apply_tokens(tokens: &[RuleToken], word: &[u8], out: &mut Vec<u8>, scratch: &mut Scratch) -> bool {
    if word.len() > MAX_WORD_LEN {
        return false;
    }
    out.clear();
    out.extend_from_slice(word);
    tokens.iter().all(|t| apply_token(*t, out, scratch) && out.len() <= MAX_WORD_LEN)
}

fn apply_token(token: RuleToken, w: &mut Vec<u8>, scratch: &mut Scratch) -> bool {
    use RuleToken::*;
    let len = w.len();
    match token {
        Passthrough => {}
        Lowercase => w.make_ascii_lowercase(),
        Uppercase => w.make_ascii_uppercase(),
        Capitalize => {
            w.make_ascii_lowercase();
            if let Some(first) = w.first_mut() {
                first.make_ascii_uppercase();
            }
        }
        InvertCapitalize => {
            w.make_ascii_uppercase();
            if let Some(first) = w.first_mut() {
                first.make_ascii_lowercase();
            }
        }
        ToggleAll => w.iter_mut().for_each(toggle),
        ToggleAt(n) => {
            let Some(b) = w.get_mut(n as usize) else { return false };
            toggle(b);
        }
        Reverse => w.reverse(),
        Duplicate => {
            if 2 * len > MAX_WORD_LEN {
                return false;
            }
            w.extend_from_within(..);
        }
        DuplicateTimes(n) => {
            if len * (n as usize + 1) > MAX_WORD_LEN {
                return false;
            }
            for _ in 0..n {
                w.extend_from_within(..len);
            }
        }
        Reflect => {
            if 2 * len > MAX_WORD_LEN {
                return false;
            }
            w.extend_from_within(..);
            w[len..].reverse();
        }
        RotateLeft => {
            if len > 0 {
                w.rotate_left(1);
            }
        }
        RotateRight => {
            if len > 0 {
                w.rotate_right(1);
            }
        }
        Append(c) => w.push(c),
        Prepend(c) => w.insert(0, c),
        DropFirst => {
            if len > 0 {
                w.remove(0);
            }
        }
        DropLast => {
            w.pop();
        }
        DeleteAt(n) => {
            if n as usize >= len {
                return false;
            }
            w.remove(n as usize);
        }
        Extract(n, m) => {
            let (n, m) = (n as usize, m as usize);
            if n >= len || n + m > len {
                return false;
            }
            w.copy_within(n..n + m, 0);
            w.truncate(m);
        }
        InsertAt(n, c) => {
            if n as usize > len {
                return false;
            }
            w.insert(n as usize, c);
        }
        OverwriteAt(n, c) => {
            let Some(b) = w.get_mut(n as usize) else { return false };
            *b = c;
        }
        Truncate(n) => {
            if n as usize >= len {
                return false;
            }
            w.truncate(n as usize);
        }
        Replace(from, to) => w.iter_mut().filter(|b| **b == from).for_each(|b| *b = to),
        Purge(c) => w.retain(|b| *b != c),
        DuplicateFirst(n) => {
            if len == 0 || len + n as usize > MAX_WORD_LEN {
                return false;
            }
            let first = w[0];
            w.splice(0..0, std::iter::repeat(first).take(n as usize));
        }
        DuplicateLast(n) => {
            if len == 0 || len + n as usize > MAX_WORD_LEN {
                return false;
            }
            let last = w[len - 1];
            w.extend(std::iter::repeat(last).take(n as usize));
        }
        DuplicateEach => {
            if 2 * len > MAX_WORD_LEN {
                return false;
            }
            scratch.buf.clear();
            scratch.buf.extend(w.iter().flat_map(|&b| [b, b]));
            std::mem::swap(w, &mut scratch.buf);
        }
    }
    true
}
