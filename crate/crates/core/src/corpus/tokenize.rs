use std::sync::OnceLock;

use regex::Regex;

use super::porter_stem;

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

fn token_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            (?P<placeholder><url>|<user>)
            | (?P<url>https?://\S+|www\.\S+)
            | (?P<user>@\w+)
            | \#(?P<tag>\w+)
            | (?P<word>\w+(?:'\w+)*)
            | (?P<punct>[^\w\s])
            ",
        )
        .expect("static pattern")
    })
}

/// Splits raw tweet text into lowercase tokens.
///
/// URLs become `<url>`, mentions become `<user>`, the `#` of a hashtag is
/// dropped and every punctuation character is its own token. Placeholders
/// already present in the text are kept, so re-tokenizing joined output is
/// stable.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    token_pattern()
        .captures_iter(&lower)
        .map(|caps| {
            if let Some(p) = caps.name("placeholder") {
                p.as_str().to_string()
            } else if caps.name("url").is_some() {
                URL_TOKEN.to_string()
            } else if caps.name("user").is_some() {
                USER_TOKEN.to_string()
            } else if let Some(tag) = caps.name("tag") {
                tag.as_str().to_string()
            } else {
                caps[0].to_string()
            }
        })
        .collect()
}

/// Tokenizes and stems, the single preprocessing path used everywhere.
pub fn preprocess(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| porter_stem(t)).collect()
}
