use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Zh,
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF | 0x3000..=0x303F | 0xFF00..=0xFFEF)
}

/// Splits a question into surface tokens. Whitespace separates words and
/// leading/trailing punctuation is dropped; for Chinese every CJK character
/// is its own token.
pub fn tokenize_question(text: &str, language: Language) -> Vec<String> {
    let mut out = Vec::new();
    for piece in text.split_whitespace() {
        if language == Language::Zh {
            let mut run = String::new();
            for c in piece.chars() {
                if is_cjk(c) {
                    push_word(&mut out, &run);
                    run.clear();
                    if c.is_alphanumeric() {
                        out.push(c.to_string());
                    }
                } else {
                    run.push(c);
                }
            }
            push_word(&mut out, &run);
        } else {
            push_word(&mut out, piece);
        }
    }
    out
}

fn push_word(out: &mut Vec<String>, piece: &str) {
    let w = piece.trim_matches(|c: char| !c.is_alphanumeric());
    if !w.is_empty() {
        out.push(w.to_string());
    }
}

/// Lowercased word pieces with `_`/punctuation split and a trailing plural
/// `s` stripped. Shared by question tokens and schema names.
pub fn normalize_name(name: &str) -> Vec<String> {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| stem(&w.to_lowercase()))
        .collect()
}

fn stem(word: &str) -> String {
    if word.len() > 3 && word.ends_with('s') && !word.ends_with("ss") && word.is_ascii() {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_tokens() {
        assert_eq!(
            tokenize_question("Which players won in Jan 5, 2016?", Language::En),
            vec!["Which", "players", "won", "in", "Jan", "5", "2016"]
        );
        assert_eq!(tokenize_question("sold 1,200 units", Language::En), vec!["sold", "1,200", "units"]);
    }

    #[test]
    fn chinese_per_character() {
        assert_eq!(tokenize_question("球员 的 排名2016", Language::Zh), vec!["球", "员", "的", "排", "名", "2016"]);
    }

    #[test]
    fn name_normalization() {
        assert_eq!(normalize_name("Player_id"), vec!["player", "id"]);
        assert_eq!(normalize_name("Players"), vec!["player"]);
        assert_eq!(normalize_name("Address"), vec!["address"]);
        assert_eq!(normalize_name("song_release_year"), vec!["song", "release", "year"]);
    }
}
