/// Split a message into lowercase word tokens.
///
/// URLs and `@`-mentions are dropped, `$` and `#` prefixes are stripped so
/// cashtags and hashtags reduce to their word, and every other
/// non-alphanumeric character acts as a separator.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let kept = &lower[..url_start(&lower).unwrap_or(lower.len())];
        push_chunk_tokens(kept, &mut tokens);
    }
    tokens
}

fn url_start(chunk: &str) -> Option<usize> {
    ["http://", "https://", "www."]
        .iter()
        .filter_map(|p| chunk.find(p))
        .min()
}

fn push_chunk_tokens(chunk: &str, out: &mut Vec<String>) {
    let mut current = String::new();
    let mut in_mention = false;
    for c in chunk.chars() {
        if in_mention {
            if c.is_alphanumeric() || c == '_' {
                continue;
            }
            in_mention = false;
        }
        if c == '@' {
            flush(&mut current, out);
            in_mention = true;
        } else if c.is_alphanumeric() {
            current.push(c);
        } else {
            flush(&mut current, out);
        }
    }
    flush(&mut current, out);
}

fn flush(current: &mut String, out: &mut Vec<String>) {
    if !current.is_empty() {
        out.push(std::mem::take(current));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn strips_urls_and_mentions() {
        assert_eq!(toks("Oil SPILL at @BP! https://t.co/x"), ["oil", "spill", "at"]);
    }

    #[test]
    fn hashtags_and_cashtags_keep_their_word() {
        assert_eq!(toks("#ClimateChange is real"), ["climatechange", "is", "real"]);
        assert_eq!(toks("$AAPL down 3%"), ["aapl", "down", "3"]);
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(toks("").is_empty());
        assert!(toks("   \t\n").is_empty());
        assert!(toks("!!! ... @someone").is_empty());
    }

    #[test]
    fn punctuation_separates() {
        assert_eq!(toks("labor-strike,again"), ["labor", "strike", "again"]);
        assert_eq!(toks("(see www.example.com)"), ["see"]);
    }

    #[test]
    fn unicode_lowercases() {
        assert_eq!(toks("ÉMISSIONS Über"), ["émissions", "über"]);
    }
}
