//! Fact extraction from message text.
//!
//! Recognized patterns:
//! - hashtag: `#token`, where the token is a maximal run of letters, digits or `_`
//! - retweet: `RT @user` or `RT user`, optionally followed by `:`
//! - mention: `@user` outside an RT pattern
//!
//! A `#` or `@` directly preceded by a word character (as in an e-mail
//! address) does not start a token. Handles use Twitter's charset
//! `[A-Za-z0-9_]`. Each fact is counted once per message.

use super::{Fact, FactKind, Practice, Roster, UserHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Drop retweetees and mentionees that are not roster members.
    pub restrict_to_roster: bool,
    /// Count hashtags that appear inside a retweeted message toward the
    /// retweeter's tagging practice.
    pub count_retweet_hashtags: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            restrict_to_roster: true,
            count_retweet_hashtags: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExtractedFacts {
    pub tagging: Vec<Fact>,
    pub retweeting: Vec<Fact>,
    pub mentioning: Vec<Fact>,
}

impl ExtractedFacts {
    pub fn is_empty(&self) -> bool {
        self.tagging.is_empty() && self.retweeting.is_empty() && self.mentioning.is_empty()
    }

    pub fn into_practices(self) -> [(Practice, Vec<Fact>); 3] {
        [
            (Practice::Tagging, self.tagging),
            (Practice::Retweeting, self.retweeting),
            (Practice::Mentioning, self.mentioning),
        ]
    }
}

/// Lowercases and folds common Latin diacritics to ASCII (`ä`→`a`, `ß`→`ss`).
pub fn fold_key(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars().flat_map(char::to_lowercase) {
        match c {
            'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' | 'ā' | 'ă' | 'ą' => out.push('a'),
            'æ' => out.push_str("ae"),
            'ç' | 'ć' | 'č' => out.push('c'),
            'ď' | 'đ' => out.push('d'),
            'è' | 'é' | 'ê' | 'ë' | 'ē' | 'ė' | 'ę' | 'ě' => out.push('e'),
            'ì' | 'í' | 'î' | 'ï' | 'ī' | 'į' | 'ı' => out.push('i'),
            'ł' | 'ľ' => out.push('l'),
            'ñ' | 'ń' | 'ň' => out.push('n'),
            'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' | 'ō' | 'ő' => out.push('o'),
            'œ' => out.push_str("oe"),
            'ř' => out.push('r'),
            'ß' => out.push_str("ss"),
            'ś' | 'š' | 'ş' => out.push('s'),
            'ť' | 'ţ' => out.push('t'),
            'ù' | 'ú' | 'û' | 'ü' | 'ū' | 'ů' | 'ű' => out.push('u'),
            'ý' | 'ÿ' => out.push('y'),
            'ź' | 'ż' | 'ž' => out.push('z'),
            _ => out.push(c),
        }
    }
    out
}

fn is_tag_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_handle_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn run_end(chars: &[char], from: usize, pred: fn(char) -> bool) -> usize {
    chars[from..]
        .iter()
        .position(|&c| !pred(c))
        .map_or(chars.len(), |n| from + n)
}

fn push_unique(list: &mut Vec<Fact>, fact: Fact) {
    if !list.contains(&fact) {
        list.push(fact);
    }
}

/// Scans an `RT` marker at `i`; returns the handle span end and the handle.
fn scan_retweet(chars: &[char], i: usize) -> Option<(usize, String)> {
    if chars.get(i) != Some(&'R') || chars.get(i + 1) != Some(&'T') {
        return None;
    }
    if i > 0 && is_tag_char(chars[i - 1]) {
        return None;
    }
    let mut k = i + 2;
    let ws_start = k;
    while k < chars.len() && chars[k].is_whitespace() {
        k += 1;
    }
    if chars.get(k) == Some(&'@') {
        k += 1;
    } else if k == ws_start {
        // "RTfoo" is a word, not a marker
        return None;
    }
    let end = run_end(chars, k, is_handle_char);
    if end == k {
        return None;
    }
    let name: String = chars[k..end].iter().collect();
    Some((end, name))
}

/// Extracts hashtags, retweetees and mentionees from one message.
pub fn extract_facts(text: &str, roster: &Roster, opts: &ExtractOptions) -> ExtractedFacts {
    let chars: Vec<char> = text.chars().collect();
    let mut out = ExtractedFacts::default();
    let mut mentions: Vec<String> = Vec::new();
    let mut in_retweet = false;
    let mut i = 0;
    while i < chars.len() {
        let prev_word = i > 0 && is_tag_char(chars[i - 1]);
        let c = chars[i];
        if c == '#' && !prev_word {
            let end = run_end(&chars, i + 1, is_tag_char);
            if end > i + 1 {
                if !in_retweet || opts.count_retweet_hashtags {
                    let token: String = chars[i + 1..end].iter().collect();
                    if let Ok(f) = Fact::hashtag(&token) {
                        push_unique(&mut out.tagging, f);
                    }
                }
                i = end;
                continue;
            }
        } else if let Some((end, name)) = scan_retweet(&chars, i) {
            if let Ok(h) = UserHandle::parse(&name) {
                push_unique(&mut out.retweeting, Fact::user(FactKind::Retweetee, &h));
            }
            in_retweet = true;
            i = end;
            continue;
        } else if c == '@' && !prev_word {
            let end = run_end(&chars, i + 1, is_handle_char);
            if end > i + 1 {
                mentions.push(chars[i + 1..end].iter().collect());
                i = end;
                continue;
            }
        }
        i += 1;
    }
    for name in mentions {
        let Ok(h) = UserHandle::parse(&name) else {
            continue;
        };
        if out.retweeting.iter().any(|f| f.key == h.as_str()) {
            continue;
        }
        push_unique(&mut out.mentioning, Fact::user(FactKind::Mentionee, &h));
    }
    if opts.restrict_to_roster {
        out.retweeting.retain(|f| roster.contains_key(&f.key));
        out.mentioning.retain(|f| roster.contains_key(&f.key));
    }
    out
}
