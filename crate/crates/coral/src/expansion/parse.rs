//! Parsing of tagged like/dislike responses.

use super::ExpansionError;
use crate::corpus::PreferenceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Like,
    Dislike,
}

/// Byte offsets of every `[Like]` / `[Dislike]` occurrence, matched
/// case-insensitively. Tags are pure ASCII, so byte comparison at arbitrary
/// offsets cannot split a multi-byte character.
fn find_tags(text: &str) -> Vec<(usize, usize, Tag)> {
    let bytes = text.as_bytes();
    let mut found = Vec::new();
    for (pos, _) in text.char_indices() {
        for (pattern, tag) in [("[like]", Tag::Like), ("[dislike]", Tag::Dislike)] {
            let end = pos + pattern.len();
            if end <= bytes.len() && bytes[pos..end].eq_ignore_ascii_case(pattern.as_bytes()) {
                found.push((pos, end, tag));
            }
        }
    }
    found
}

fn split_phrases(raw: &str) -> Vec<String> {
    let trimmed = raw.trim();
    if trimmed.eq_ignore_ascii_case("none") || trimmed.eq_ignore_ascii_case("none.") {
        return Vec::new();
    }
    trimmed
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses a tagged response into a preference set.
///
/// The text after each tag, up to the next tag or the end, is split on
/// commas and trimmed; a literal "None" or "None." yields an empty list.
/// Tags match case-insensitively and may appear in either order. Both tags
/// must be present.
pub fn parse_like_dislike(text: &str) -> Result<PreferenceSet, ExpansionError> {
    let tags = find_tags(text);
    let section = |want: Tag| -> Option<&str> {
        let (idx, &(_, content_start, _)) = tags
            .iter()
            .enumerate()
            .find(|(_, (_, _, tag))| *tag == want)?;
        let content_end = tags
            .get(idx + 1)
            .map(|&(next_start, _, _)| next_start)
            .unwrap_or(text.len());
        Some(&text[content_start..content_end])
    };
    let like = section(Tag::Like).ok_or_else(|| ExpansionError::Parse {
        message: "response has no [Like] tag".to_string(),
    })?;
    let dislike = section(Tag::Dislike).ok_or_else(|| ExpansionError::Parse {
        message: "response has no [Dislike] tag".to_string(),
    })?;
    Ok(PreferenceSet::new(split_phrases(like), split_phrases(dislike)))
}

/// Keeps the first occurrence of each phrase, compared case-insensitively.
pub fn dedup_phrases(phrases: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    phrases
        .into_iter()
        .filter(|p| seen.insert(p.to_lowercase()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tagged_lists() {
        let set = parse_like_dislike("[Like] a, b\n[Dislike] None.").unwrap();
        assert_eq!(set.like, vec!["a", "b"]);
        assert!(set.dislike.is_empty());
    }

    #[test]
    fn tag_order_does_not_matter() {
        let set = parse_like_dislike("[Dislike] x\n[Like] y").unwrap();
        assert_eq!(set.like, vec!["y"]);
        assert_eq!(set.dislike, vec!["x"]);
    }

    #[test]
    fn tags_match_case_insensitively() {
        let set = parse_like_dislike("[LIKE] a\n[dislike] b").unwrap();
        assert_eq!(set.like, vec!["a"]);
        assert_eq!(set.dislike, vec!["b"]);
    }

    #[test]
    fn none_sentinel_in_any_case_is_empty() {
        for sentinel in ["None", "None.", "none", "NONE."] {
            let set =
                parse_like_dislike(&format!("[Like] {sentinel}\n[Dislike] {sentinel}")).unwrap();
            assert!(set.is_empty(), "sentinel {sentinel}");
        }
    }

    #[test]
    fn missing_tags_are_errors_naming_the_tag() {
        let err = parse_like_dislike("no tags here").unwrap_err();
        assert!(err.to_string().contains("[Like]"));
        let err = parse_like_dislike("[Like] a").unwrap_err();
        assert!(err.to_string().contains("[Dislike]"));
        let err = parse_like_dislike("[Dislike] a").unwrap_err();
        assert!(err.to_string().contains("[Like]"));
    }

    #[test]
    fn surrounding_prose_is_ignored() {
        let set = parse_like_dislike(
            "Sure! Here are the preferences.\n[Like] cozy mysteries , espionage\n[Dislike] gore\nHope that helps.",
        )
        .unwrap();
        assert_eq!(set.like, vec!["cozy mysteries", "espionage"]);
        // Trailing prose after the last tag stays inside that section; the
        // comma split keeps it as part of the final phrase.
        assert_eq!(set.dislike, vec!["gore\nHope that helps."]);
    }

    #[test]
    fn empty_phrases_from_stray_commas_are_dropped() {
        let set = parse_like_dislike("[Like] a,, b, \n[Dislike] ,").unwrap();
        assert_eq!(set.like, vec!["a", "b"]);
        assert!(set.dislike.is_empty());
    }

    #[test]
    fn repeated_tags_use_the_first_occurrence() {
        let set = parse_like_dislike("[Like] a\n[Dislike] b\n[Like] c").unwrap();
        assert_eq!(set.like, vec!["a"]);
        assert_eq!(set.dislike, vec!["b"]);
    }

    #[test]
    fn multibyte_text_around_tags_is_handled() {
        let set = parse_like_dislike("日本語 [Like] 映画, ドラマ [Dislike] None.").unwrap();
        assert_eq!(set.like, vec!["映画", "ドラマ"]);
        assert!(set.dislike.is_empty());
    }

    #[test]
    fn dedup_keeps_first_spelling() {
        let out = dedup_phrases(vec![
            "Thriller".into(),
            "space opera".into(),
            "thriller".into(),
            "THRILLER".into(),
        ]);
        assert_eq!(out, vec!["Thriller", "space opera"]);
    }
}
