//! The `13a` tokenizer (mteval-v13a rules, as used by WMT scoring).

use std::sync::LazyLock;

use regex::Regex;

struct Rule {
    re: Regex,
    replacement: &'static str,
}

static RULES: LazyLock<[Rule; 4]> = LazyLock::new(|| {
    let rule = |pattern: &str, replacement| Rule {
        re: Regex::new(pattern).expect("static pattern"),
        replacement,
    };
    [
        // ASCII punctuation and symbols: { | } ~ [ \ ] ^ _ ` space ! " # $ % & ( ) * + : ; < = > ? @ /
        rule(
            r"([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40/])",
            " ${1} ",
        ),
        // period and comma unless preceded by a digit
        rule(r"([^0-9])([.,])", "${1} ${2} "),
        // period and comma unless followed by a digit
        rule(r"([.,])([^0-9])", " ${1} ${2}"),
        // dash preceded by a digit
        rule(r"([0-9])(-)", "${1} ${2} "),
    ]
});

/// Tokenizes one segment. Output tokens are separated by single spaces.
pub fn tokenize_13a(line: &str) -> String {
    let mut line = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for rule in RULES.iter() {
        line = rule.re.replace_all(&line, rule.replacement).into_owned();
    }
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}
